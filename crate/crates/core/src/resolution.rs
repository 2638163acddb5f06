//! Weighted dual graphs of good resolutions.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use num_traits::{One, Signed, Zero};

use crate::arith::{int, Rat};
use crate::error::{Error, Result};

pub type RatMatrix = Vec<Vec<Rat>>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Prime {
    pub id: String,
    pub genus: u32,
    pub self_int: i64,
    pub b: u64,
}

impl Prime {
    pub fn new(id: &str, genus: u32, self_int: i64, b: u64) -> Self {
        Prime { id: id.to_string(), genus, self_int, b }
    }

    pub fn rational(id: &str, self_int: i64) -> Self {
        Prime::new(id, 0, self_int, 1)
    }
}

/// Half-infinite edge leaving a prime toward a named end (curve or infinitely singular direction).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ray {
    pub label: String,
    pub from: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscrepancyTable {
    pub k: Vec<Rat>,
    pub a_div: Vec<Rat>,
    pub a_norm: Vec<Rat>,
}

/// Edge or ray of a graph, together with the orientation a caller used to name it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Handle {
    /// `reversed` means the caller's first end is the second end of the stored edge.
    Edge { index: usize, reversed: bool },
    Ray(usize),
}

impl Handle {
    pub fn canonical(self) -> Handle {
        match self {
            Handle::Edge { index, .. } => Handle::Edge { index, reversed: false },
            h => h,
        }
    }

    pub fn is_reversed(self) -> bool {
        matches!(self, Handle::Edge { reversed: true, .. })
    }
}

#[derive(Clone, Debug)]
pub struct DualGraph {
    primes: Vec<Prime>,
    edges: Vec<(usize, usize)>,
    rays: Vec<Ray>,
    index: HashMap<String, usize>,
    matrix: Vec<Vec<i64>>,
    inverse: RatMatrix,
    table: DiscrepancyTable,
}

impl PartialEq for DualGraph {
    fn eq(&self, o: &Self) -> bool {
        self.primes == o.primes && self.edges == o.edges && self.rays == o.rays
    }
}

impl DualGraph {
    /// Builds and validates a graph; edges name primes by id.
    pub fn new(primes: Vec<Prime>, edges: &[(&str, &str)]) -> Result<Self> {
        let owned: Vec<(String, String)> = edges.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        Self::build(primes, &owned, &[])
    }

    /// Same as `new`, with rays given as `(label, from-id)`.
    pub fn build(primes: Vec<Prime>, edges: &[(String, String)], rays: &[(String, String)]) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, p) in primes.iter().enumerate() {
            if index.insert(p.id.clone(), i).is_some() {
                return Err(Error::DuplicatePrime(p.id.clone()));
            }
            if p.self_int >= 0 {
                return Err(Error::InvalidPrime { id: p.id.clone(), reason: "self-intersection must be negative".into() });
            }
            if p.b == 0 {
                return Err(Error::InvalidPrime { id: p.id.clone(), reason: "generic multiplicity b must be >= 1".into() });
            }
        }
        let lookup = |id: &str| index.get(id).copied().ok_or_else(|| Error::UnknownPrime(id.to_string()));
        let mut es = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            let (i, j) = (lookup(a)?, lookup(b)?);
            if i == j {
                return Err(Error::SelfLoop(a.clone()));
            }
            es.push((i, j));
        }
        let mut rs = Vec::with_capacity(rays.len());
        for (label, from) in rays {
            if rs.iter().any(|r: &Ray| &r.label == label) {
                return Err(Error::Parse(format!("ray '{label}' declared twice")));
            }
            rs.push(Ray { label: label.clone(), from: lookup(from)? });
        }
        Self::from_parts(primes, es, rs)
    }

    fn from_parts(primes: Vec<Prime>, edges: Vec<(usize, usize)>, rays: Vec<Ray>) -> Result<Self> {
        if primes.is_empty() {
            return Err(Error::Parse("graph has no primes".into()));
        }
        let index = primes.iter().enumerate().map(|(i, p)| (p.id.clone(), i)).collect();
        let n = primes.len();
        let mut matrix = vec![vec![0i64; n]; n];
        for (i, p) in primes.iter().enumerate() {
            matrix[i][i] = p.self_int;
        }
        for &(i, j) in &edges {
            matrix[i][j] += 1;
            matrix[j][i] += 1;
        }
        let mut g = DualGraph {
            primes,
            edges,
            rays,
            index,
            matrix,
            inverse: Vec::new(),
            table: DiscrepancyTable { k: vec![], a_div: vec![], a_norm: vec![] },
        };
        if !g.is_connected() {
            return Err(Error::Disconnected);
        }
        if !check_negative_definite(&g.matrix) {
            return Err(Error::NotNegativeDefinite);
        }
        for i in 0..n {
            let row: i64 = (0..n).map(|j| g.matrix[i][j] * g.primes[j].b as i64).sum();
            if row > 0 {
                return Err(Error::NotNef(g.primes[i].id.clone()));
            }
        }
        let m = to_rat_matrix(&g.matrix);
        g.inverse = inverse(&m)?;
        let rhs: Vec<Rat> = g.primes.iter().map(|p| int(2 * p.genus as i64 - 2 - p.self_int)).collect();
        let k = mat_vec(&g.inverse, &rhs);
        let a_div: Vec<Rat> = k.iter().map(|x| x + Rat::one()).collect();
        let a_norm = a_div.iter().zip(&g.primes).map(|(a, p)| a / int(p.b as i64)).collect();
        g.table = DiscrepancyTable { k, a_div, a_norm };
        Ok(g)
    }

    pub fn primes(&self) -> &[Prime] {
        &self.primes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn rays(&self) -> &[Ray] {
        &self.rays
    }

    pub fn len(&self) -> usize {
        self.primes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primes.is_empty()
    }

    pub fn idx(&self, id: &str) -> Result<usize> {
        self.index.get(id).copied().ok_or_else(|| Error::UnknownPrime(id.to_string()))
    }

    pub fn id(&self, i: usize) -> &str {
        &self.primes[i].id
    }

    pub fn b(&self, i: usize) -> u64 {
        self.primes[i].b
    }

    pub fn b_rat(&self, i: usize) -> Rat {
        int(self.primes[i].b as i64)
    }

    pub fn intersection_matrix(&self) -> &Vec<Vec<i64>> {
        &self.matrix
    }

    /// `M^{-1}`; column `i` holds the coefficients of the dual divisor of prime `i`.
    pub fn dual_basis(&self) -> &RatMatrix {
        &self.inverse
    }

    /// Coefficient vector of the dual divisor of prime `i`.
    pub fn dual(&self, i: usize) -> Vec<Rat> {
        (0..self.len()).map(|k| self.inverse[k][i].clone()).collect()
    }

    pub fn canonical_coeffs(&self) -> &DiscrepancyTable {
        &self.table
    }

    /// Number of edge ends at `i`, parallel edges counted separately; rays are not counted.
    pub fn degree(&self, i: usize) -> usize {
        self.edges.iter().map(|&(a, b)| (a == i) as usize + (b == i) as usize).sum()
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| if a == i { Some(b) } else if b == i { Some(a) } else { None })
            .collect()
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for w in self.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Edges between `i` and `j` in declaration order.
    pub fn parallel_edges(&self, i: usize, j: usize) -> Vec<usize> {
        (0..self.edges.len())
            .filter(|&e| {
                let (a, b) = self.edges[e];
                (a, b) == (i, j) || (a, b) == (j, i)
            })
            .collect()
    }

    /// Canonical text of an edge handle, `edge:(A,B)#k`.
    pub fn edge_handle(&self, e: usize) -> String {
        let (a, b) = self.edges[e];
        let k = self.parallel_edges(a, b).iter().position(|&x| x == e).unwrap_or(0);
        format!("edge:({},{})#{}", self.id(a), self.id(b), k)
    }

    pub fn handle_text(&self, h: Handle) -> String {
        match h {
            Handle::Edge { index, reversed: false } => self.edge_handle(index),
            Handle::Edge { index, reversed: true } => {
                let (a, b) = self.edges[index];
                let k = self.parallel_edges(a, b).iter().position(|&x| x == index).unwrap_or(0);
                format!("edge:({},{})#{}", self.id(b), self.id(a), k)
            }
            Handle::Ray(r) => format!("ray:{}", self.rays[r].label),
        }
    }

    /// Resolves `edge:(A,B)#k`, `edge:(A,B)` (meaning `#0`) or `ray:label`.
    pub fn resolve_handle(&self, text: &str) -> Result<Handle> {
        let text = text.trim();
        let unknown = || Error::UnknownHandle(text.to_string());
        if let Some(label) = text.strip_prefix("ray:") {
            return self.rays.iter().position(|r| r.label == label.trim()).map(Handle::Ray).ok_or_else(unknown);
        }
        let body = text.strip_prefix("edge:").ok_or_else(unknown)?;
        let (pair, k) = match body.split_once('#') {
            Some((p, k)) => (p, k.trim().parse::<usize>().map_err(|_| unknown())?),
            None => (body, 0),
        };
        let inner = pair.trim().strip_prefix('(').and_then(|p| p.strip_suffix(')')).ok_or_else(unknown)?;
        let (a, b) = inner.split_once(',').ok_or_else(unknown)?;
        let (i, j) = (self.idx(a.trim())?, self.idx(b.trim())?);
        let index = *self.parallel_edges(i, j).get(k).ok_or_else(unknown)?;
        Ok(Handle::Edge { index, reversed: self.edges[index].0 != i })
    }

    /// Endpoints of a handle in the caller's orientation; a ray has no second prime.
    pub fn handle_ends(&self, h: Handle) -> (usize, Option<usize>) {
        match h {
            Handle::Edge { index, reversed } => {
                let (a, b) = self.edges[index];
                if reversed {
                    (b, Some(a))
                } else {
                    (a, Some(b))
                }
            }
            Handle::Ray(r) => (self.rays[r].from, None),
        }
    }

    /// Every handle in canonical orientation: edges first, then rays.
    pub fn all_handles(&self) -> Vec<Handle> {
        (0..self.edges.len())
            .map(|index| Handle::Edge { index, reversed: false })
            .chain((0..self.rays.len()).map(Handle::Ray))
            .collect()
    }

    /// Smallest connected subgraph holding all cycles, forks and positive-genus primes.
    pub fn essential_skeleton(&self) -> Vec<usize> {
        let n = self.len();
        let protected: Vec<bool> = (0..n).map(|i| self.degree(i) >= 3 || self.primes[i].genus > 0).collect();
        let mut alive = vec![true; n];
        let mut deg: Vec<usize> = (0..n).map(|i| self.degree(i)).collect();
        loop {
            let victim = (0..n).find(|&i| alive[i] && !protected[i] && deg[i] <= 1);
            let Some(v) = victim else { break };
            alive[v] = false;
            for &(a, b) in &self.edges {
                if a == v && alive[b] {
                    deg[b] -= 1;
                } else if b == v && alive[a] {
                    deg[a] -= 1;
                }
            }
        }
        (0..n).filter(|&i| alive[i]).collect()
    }

    pub fn classify_singularity(&self) -> Result<Singularity> {
        let min = self.table.a_norm.iter().min().cloned().unwrap_or_else(Rat::zero);
        if min.is_positive() {
            let is_tree = self.edges.len() + 1 == self.len();
            let chain = is_tree
                && self.primes.iter().all(|p| p.genus == 0)
                && (0..self.len()).all(|i| self.degree(i) <= 2);
            return Ok(if chain { Singularity::CyclicQuotient } else { Singularity::OtherQuotient });
        }
        if min.is_negative() {
            return Ok(Singularity::NotLc);
        }
        let core = self.essential_skeleton();
        let inside: BTreeSet<usize> = core.iter().copied().collect();
        let core_edges: Vec<(usize, usize)> =
            self.edges.iter().copied().filter(|(a, b)| inside.contains(a) && inside.contains(b)).collect();
        let core_deg = |i: usize| core_edges.iter().map(|&(a, b)| (a == i) as usize + (b == i) as usize).sum::<usize>();
        let rational = core.iter().all(|&i| self.primes[i].genus == 0);
        if core.is_empty() {
            return Err(Error::UnrecognizedLcShape("empty essential skeleton with A = 0".into()));
        }
        if core.len() == 1 {
            let v = core[0];
            if self.primes[v].genus == 1 {
                return Ok(Singularity::SimpleElliptic);
            }
            if rational && matches!(self.degree(v), 3 | 4) {
                return Ok(Singularity::EllipticQuotient);
            }
        }
        if rational && core_edges.len() == core.len() && core.iter().all(|&i| core_deg(i) == 2) {
            return Ok(Singularity::Cusp);
        }
        if rational && core.len() >= 2 && core_edges.len() + 1 == core.len() {
            let ends: Vec<usize> = core.iter().copied().filter(|&i| core_deg(i) == 1).collect();
            let path = core.iter().all(|&i| core_deg(i) <= 2);
            let forks_at_ends = ends.len() == 2 && ends.iter().all(|&i| self.degree(i) == 3);
            let interior_plain = core.iter().filter(|i| !ends.contains(i)).all(|&i| self.degree(i) == 2);
            if path && forks_at_ends && interior_plain {
                return Ok(Singularity::QuotientCusp);
            }
        }
        let ids: Vec<&str> = core.iter().map(|&i| self.id(i)).collect();
        Err(Error::UnrecognizedLcShape(format!("essential skeleton {{{}}} matches no known shape", ids.join(","))))
    }

    fn fresh_id(&self, stem: &str) -> String {
        let mut n = self.len();
        loop {
            let id = format!("{stem}{n}");
            if !self.index.contains_key(&id) {
                return id;
            }
            n += 1;
        }
    }

    /// Blows up a free point of `E`; the new prime is last and named by `fresh_id`.
    pub fn blowup_free(&self, e: &str) -> Result<DualGraph> {
        let i = self.idx(e)?;
        let mut primes = self.primes.clone();
        let b = primes[i].b;
        primes[i].self_int -= 1;
        primes.push(Prime::new(&self.fresh_id("F"), 0, -1, b));
        let mut edges = self.edges.clone();
        edges.push((i, primes.len() - 1));
        Self::from_parts(primes, edges, self.rays.clone())
    }

    /// Blows up the intersection point of edge `e`: the edge becomes `E-G` in place and `G-F` is appended.
    pub fn blowup_satellite(&self, e: usize) -> Result<DualGraph> {
        let &(i, j) = self.edges.get(e).ok_or_else(|| Error::UnknownHandle(format!("edge #{e}")))?;
        let mut primes = self.primes.clone();
        primes[i].self_int -= 1;
        primes[j].self_int -= 1;
        let b = primes[i].b + primes[j].b;
        primes.push(Prime::new(&self.fresh_id("G"), 0, -1, b));
        let g = primes.len() - 1;
        let mut edges = self.edges.clone();
        edges[e] = (i, g);
        edges.push((g, j));
        Self::from_parts(primes, edges, self.rays.clone())
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph dual {\n");
        for (i, p) in self.primes.iter().enumerate() {
            let _ = writeln!(
                out,
                "  v{i} [label=\"{} ({}, g={}, b={})\"];",
                p.id, p.self_int, p.genus, p.b
            );
        }
        for &(a, b) in &self.edges {
            let _ = writeln!(out, "  v{a} -- v{b};");
        }
        for (k, r) in self.rays.iter().enumerate() {
            let _ = writeln!(out, "  end{k} [shape=point, xlabel=\"{}\"];", r.label);
            let _ = writeln!(out, "  v{} -- end{k} [style=dashed];", r.from);
        }
        out.push_str("}\n");
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Singularity {
    CyclicQuotient,
    OtherQuotient,
    Cusp,
    SimpleElliptic,
    EllipticQuotient,
    QuotientCusp,
    NotLc,
}

impl Singularity {
    pub fn family(self) -> &'static str {
        match self {
            Singularity::CyclicQuotient | Singularity::OtherQuotient => "log-terminal",
            Singularity::NotLc => "not-lc",
            _ => "lc-not-lt",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Singularity::CyclicQuotient => "cyclic-quotient",
            Singularity::OtherQuotient => "other-quotient",
            Singularity::Cusp => "cusp",
            Singularity::SimpleElliptic => "simple-elliptic",
            Singularity::EllipticQuotient => "elliptic-quotient",
            Singularity::QuotientCusp => "quotient-cusp",
            Singularity::NotLc => "not-lc",
        }
    }
}

pub fn to_rat_matrix(m: &[Vec<i64>]) -> RatMatrix {
    m.iter().map(|row| row.iter().map(|&x| int(x)).collect()).collect()
}

pub fn mat_vec(m: &[Vec<Rat>], v: &[Rat]) -> Vec<Rat> {
    m.iter().map(|row| row.iter().zip(v).fold(Rat::zero(), |acc, (a, b)| acc + a * b)).collect()
}

/// `u^T m v`.
pub fn bilinear(m: &[Vec<Rat>], u: &[Rat], v: &[Rat]) -> Rat {
    let mv = mat_vec(m, v);
    u.iter().zip(&mv).fold(Rat::zero(), |acc, (a, b)| acc + a * b)
}

pub fn determinant(m: &[Vec<Rat>]) -> Rat {
    let n = m.len();
    let mut a: RatMatrix = m.to_vec();
    let mut det = Rat::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&r| !a[r][c].is_zero()) else {
            return Rat::zero();
        };
        if p != c {
            a.swap(p, c);
            det = -det;
        }
        let pivot = a[c][c].clone();
        det *= &pivot;
        for r in c + 1..n {
            if a[r][c].is_zero() {
                continue;
            }
            let f = &a[r][c] / &pivot;
            for k in c..n {
                let t = &f * &a[c][k];
                a[r][k] -= t;
            }
        }
    }
    det
}

pub fn leading_minors(m: &[Vec<Rat>]) -> Vec<Rat> {
    (1..=m.len())
        .map(|k| {
            let sub: RatMatrix = m[..k].iter().map(|row| row[..k].to_vec()).collect();
            determinant(&sub)
        })
        .collect()
}

/// Sylvester's criterion: the k-th leading minor has sign (-1)^k.
pub fn is_negative_definite(m: &[Vec<Rat>]) -> bool {
    leading_minors(m).iter().enumerate().all(|(k, d)| if k % 2 == 0 { d.is_negative() } else { d.is_positive() })
}

pub fn check_negative_definite(m: &[Vec<i64>]) -> bool {
    is_negative_definite(&to_rat_matrix(m))
}

/// Gauss-Jordan inverse.
pub fn inverse(m: &[Vec<Rat>]) -> Result<RatMatrix> {
    let n = m.len();
    let mut a: RatMatrix = m.to_vec();
    let mut inv: RatMatrix = (0..n).map(|i| (0..n).map(|j| if i == j { Rat::one() } else { Rat::zero() }).collect()).collect();
    for c in 0..n {
        let p = (c..n).find(|&r| !a[r][c].is_zero()).ok_or(Error::Singular)?;
        a.swap(p, c);
        inv.swap(p, c);
        let pivot = a[c][c].clone();
        for k in 0..n {
            a[c][k] = &a[c][k] / &pivot;
            inv[c][k] = &inv[c][k] / &pivot;
        }
        for r in 0..n {
            if r == c || a[r][c].is_zero() {
                continue;
            }
            let f = a[r][c].clone();
            for k in 0..n {
                let t = &f * &a[c][k];
                a[r][k] -= t;
                let t = &f * &inv[c][k];
                inv[r][k] -= t;
            }
        }
    }
    Ok(inv)
}

pub fn solve(m: &[Vec<Rat>], rhs: &[Rat]) -> Result<Vec<Rat>> {
    Ok(mat_vec(&inverse(m)?, rhs))
}
