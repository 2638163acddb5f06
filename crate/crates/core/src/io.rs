//! TOML fixtures: a graph, and optionally a germ (explicit sectors or cusp-induced), a transport
//! table, an `R_f` functional and run options.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::arith::{parse_rat, QuadElem, Rat};
use crate::cusp::{cusp_dual_graph, induced_skeleton_map, CuspData};
use crate::dynamics::{Mat2, SectorSpec, SkeletonMap};
use crate::error::{Error, Result};
use crate::resolution::{DualGraph, Prime};
use crate::transport::{ContractedCurve, GermResolutionTable, PrimeMap, RfFunctional};

/// A rational written as an integer or a `"p/q"` string.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum RatLit {
    Int(i64),
    Text(String),
}

impl RatLit {
    pub fn value(&self) -> Result<Rat> {
        match self {
            RatLit::Int(n) => Ok(Rat::from_integer((*n).into())),
            RatLit::Text(s) => parse_rat(s),
        }
    }

    /// Like `value`, with `"inf"` mapped to `None`.
    pub fn slope(&self) -> Result<Option<Rat>> {
        match self {
            RatLit::Text(s) if matches!(s.trim(), "inf" | "oo" | "infinity") => Ok(None),
            _ => self.value().map(Some),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrimeDoc {
    pub id: String,
    #[serde(default)]
    pub genus: u32,
    pub self_int: i64,
    #[serde(default = "one")]
    pub b: u64,
}

fn one() -> u64 {
    1
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDoc {
    pub ends: [String; 2],
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RayDoc {
    pub label: String,
    pub from: String,
    pub affine: Option<[RatLit; 2]>,
}

#[derive(Clone, Debug, Default, Deserialize)]
pub struct GraphDoc {
    #[serde(default)]
    pub prime: Vec<PrimeDoc>,
    #[serde(default)]
    pub edge: Vec<EdgeDoc>,
    #[serde(default)]
    pub ray: Vec<RayDoc>,
}

impl GraphDoc {
    pub fn build(&self) -> Result<DualGraph> {
        let primes = self.prime.iter().map(|p| Prime::new(&p.id, p.genus, p.self_int, p.b)).collect();
        let edges: Vec<(String, String)> = self.edge.iter().map(|e| (e.ends[0].clone(), e.ends[1].clone())).collect();
        let rays: Vec<(String, String)> = self.ray.iter().map(|r| (r.label.clone(), r.from.clone())).collect();
        DualGraph::build(primes, &edges, &rays)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectorDoc {
    pub src: String,
    pub cone: [RatLit; 2],
    pub matrix: Mat2,
    pub dst: String,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrimeMapDoc {
    pub src: String,
    pub dst: String,
    pub k: u64,
    pub e: u64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractedDoc {
    pub label: String,
    pub attach: BTreeMap<String, u64>,
    pub m: u64,
    pub dst: String,
    pub k: u64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CuspDoc {
    pub cycle: Vec<i64>,
    #[serde(default = "one_u32")]
    pub s: u32,
    pub alpha: Option<String>,
}

fn one_u32() -> u32 {
    1
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    pub start: Option<String>,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_m_max")]
    pub m_max: usize,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_steps() -> usize {
    31
}
fn default_m_max() -> usize {
    crate::dynamics::DEFAULT_M_MAX
}
fn default_n_max() -> usize {
    crate::dynamics::DEFAULT_N_MAX
}
fn default_pairs() -> usize {
    100
}

impl Default for Options {
    fn default() -> Self {
        Options { start: None, steps: default_steps(), m_max: default_m_max(), n_max: default_n_max(), pairs: default_pairs(), seed: 0 }
    }
}

/// Raw document; every section is optional.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureDoc {
    pub name: Option<String>,
    /// Path of another fixture whose graph is reused, relative to this file.
    pub graph: Option<String>,
    #[serde(default)]
    pub prime: Vec<PrimeDoc>,
    #[serde(default)]
    pub edge: Vec<EdgeDoc>,
    #[serde(default)]
    pub ray: Vec<RayDoc>,
    #[serde(default)]
    pub non_finite: bool,
    #[serde(default)]
    pub sector: Vec<SectorDoc>,
    pub target: Option<GraphDoc>,
    #[serde(default)]
    pub prime_map: Vec<PrimeMapDoc>,
    #[serde(default)]
    pub contracted: Vec<ContractedDoc>,
    pub r_f: Option<BTreeMap<String, Vec<RatLit>>>,
    pub cusp: Option<CuspDoc>,
    pub options: Option<Options>,
}

#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: String,
    pub graph: DualGraph,
    pub germ: Option<SkeletonMap>,
    pub table: Option<GermResolutionTable>,
    pub r_f: Option<RfFunctional>,
    pub cusp: Option<CuspData>,
    pub alpha: Option<QuadElem>,
    pub options: Options,
}

pub fn parse_doc(text: &str) -> Result<FixtureDoc> {
    toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn load_fixture(path: impl AsRef<Path>) -> Result<Fixture> {
    let path = path.as_ref();
    let doc = parse_doc(&read(path)?)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    build_fixture(doc, &base, path.file_stem().and_then(|s| s.to_str()).unwrap_or("fixture"))
}

pub fn fixture_from_str(text: &str) -> Result<Fixture> {
    build_fixture(parse_doc(text)?, &PathBuf::from("."), "inline")
}

fn lookup_graph(doc: &FixtureDoc, base: &Path) -> Result<(GraphDoc, Option<DualGraph>)> {
    if let Some(rel) = &doc.graph {
        if !doc.prime.is_empty() {
            return Err(Error::Parse("give either 'graph' or inline primes, not both".into()));
        }
        let other = parse_doc(&read(&base.join(rel))?)?;
        let g = GraphDoc { prime: other.prime, edge: other.edge, ray: other.ray };
        let built = g.build()?;
        return Ok((g, Some(built)));
    }
    let g = GraphDoc { prime: doc.prime.clone(), edge: doc.edge.clone(), ray: doc.ray.clone() };
    if g.prime.is_empty() {
        return Ok((g, None));
    }
    let built = g.build()?;
    Ok((g, Some(built)))
}

fn build_fixture(doc: FixtureDoc, base: &Path, stem: &str) -> Result<Fixture> {
    let (gdoc, graph) = lookup_graph(&doc, base)?;
    let cusp = match &doc.cusp {
        Some(c) => Some(CuspData::new(c.cycle.clone(), c.s)?),
        None => None,
    };
    let alpha = match doc.cusp.as_ref().and_then(|c| c.alpha.as_ref()) {
        Some(a) => Some(QuadElem::parse(a)?),
        None => None,
    };
    let graph = match (graph, &cusp) {
        (Some(g), _) => g,
        (None, Some(c)) => cusp_dual_graph(c)?,
        (None, None) => return Err(Error::Parse("fixture has neither primes, a graph path nor a cusp block".into())),
    };
    if !doc.sector.is_empty() && alpha.is_some() {
        return Err(Error::Parse("a germ is given both by sectors and by a cusp alpha".into()));
    }
    let germ = if !doc.sector.is_empty() {
        let specs = doc
            .sector
            .iter()
            .map(|s| {
                let lo = s.cone[0].value()?;
                let hi = s.cone[1].slope()?;
                Ok(SectorSpec { src: s.src.clone(), lo, hi, matrix: s.matrix, dst: s.dst.clone() })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut affine = Vec::new();
        for r in &gdoc.ray {
            if let Some([l, m]) = &r.affine {
                affine.push((r.label.clone(), l.value()?, m.value()?));
            }
        }
        Some(SkeletonMap::new(graph.clone(), &specs, &affine, doc.non_finite, None)?)
    } else if let (Some(c), Some(a)) = (&cusp, &alpha) {
        Some(induced_skeleton_map(a, c)?)
    } else {
        None
    };
    let r_f = match &doc.r_f {
        Some(entries) => {
            let mut list = Vec::new();
            let mut default = None;
            for (k, v) in entries {
                let vals = v.iter().map(RatLit::value).collect::<Result<Vec<_>>>()?;
                if k == "default" {
                    let [l, m] = vals.as_slice() else {
                        return Err(Error::InvalidTable("R_f default needs [lambda, mu]".into()));
                    };
                    default = Some((l.clone(), m.clone()));
                } else {
                    list.push((k.clone(), vals));
                }
            }
            Some(RfFunctional::from_entries(&graph, &list, default)?)
        }
        None => None,
    };
    let table = match &doc.target {
        Some(t) => {
            let target = t.build()?;
            let maps = doc
                .prime_map
                .iter()
                .map(|p| Ok(PrimeMap { src: graph.idx(&p.src)?, dst: target.idx(&p.dst)?, k: p.k, e: p.e }))
                .collect::<Result<Vec<_>>>()?;
            let curves = doc
                .contracted
                .iter()
                .map(|c| {
                    let attach = c.attach.iter().map(|(id, n)| Ok((graph.idx(id)?, *n))).collect::<Result<Vec<_>>>()?;
                    Ok(ContractedCurve { label: c.label.clone(), attach, m: c.m, dst: target.idx(&c.dst)?, k: c.k })
                })
                .collect::<Result<Vec<_>>>()?;
            Some(GermResolutionTable::new(graph.clone(), target, maps, curves, r_f.clone())?)
        }
        None => {
            if !doc.prime_map.is_empty() || !doc.contracted.is_empty() {
                return Err(Error::InvalidTable("prime_map or contracted entries need a [target] graph".into()));
            }
            None
        }
    };
    Ok(Fixture {
        name: doc.name.unwrap_or_else(|| stem.to_string()),
        graph,
        germ,
        table,
        r_f,
        cusp,
        alpha,
        options: doc.options.unwrap_or_default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inline_fixture() {
        let text = r#"
            [[prime]]
            id = "A"
            self_int = -2
            [[prime]]
            id = "B"
            self_int = -2
            [[edge]]
            ends = ["A", "B"]
            [[sector]]
            src = "edge:(A,B)"
            cone = [0, "inf"]
            matrix = [[0, 1], [1, 0]]
            dst = "edge:(A,B)"
            [options]
            steps = 4
        "#;
        let f = fixture_from_str(text).unwrap();
        assert_eq!(f.graph.len(), 2);
        assert_eq!(f.options.steps, 4);
        assert_eq!(f.options.m_max, 6);
        assert!(f.germ.is_some());
    }

    #[test]
    fn cusp_fixture_builds_graph_and_germ() {
        let f = fixture_from_str("[cusp]\ncycle = [4, 2]\nalpha = \"3+1*sqrt(2)\"\n").unwrap();
        assert_eq!(f.graph.len(), 2);
        assert!(f.germ.unwrap().cusp().is_some());
    }

    #[test]
    fn bad_documents() {
        assert_eq!(fixture_from_str("nonsense = 1").unwrap_err().kind(), "parse_error");
        assert_eq!(fixture_from_str("name = \"x\"").unwrap_err().kind(), "parse_error");
        let both = "[cusp]\ncycle=[4,2]\nalpha=\"3+1*sqrt(2)\"\n[[sector]]\nsrc=\"edge:(E0,E1)\"\ncone=[0,\"inf\"]\nmatrix=[[1,0],[0,1]]\ndst=\"edge:(E0,E1)\"\n";
        assert_eq!(fixture_from_str(both).unwrap_err().kind(), "parse_error");
    }
}
