//! Germ actions on the skeleton as piecewise integer-linear cone maps.
//!
//! A sector acts on homogeneous weights `(r, s)` of its source handle by `(r', s') = M (r, s)` and
//! lands on its target handle. Cones are intervals of the slope `s/r`, with `None` standing for
//! infinity. Everything is stored in the declared orientation of each edge.

use std::collections::BTreeSet;

use log::{debug, warn};
use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;

use crate::arith::{fmt_rat, int, primitive_integer_poly, rat_sqrt, squarefree_part, QuadElem, Rat, Scalar};
use crate::cusp::{rotation_number, CuspData};
use crate::error::{Error, Result};
use crate::resolution::{DualGraph, Handle};
use crate::valuation::{angular_distance, skewness, QMValuation, Site};

pub type Mat2 = [[i64; 2]; 2];

/// A sector as written by a user: handles in any orientation, cone in that orientation's slope.
#[derive(Clone, Debug, PartialEq)]
pub struct SectorSpec {
    pub src: String,
    pub lo: Rat,
    pub hi: Option<Rat>,
    pub matrix: Mat2,
    pub dst: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sector {
    pub src: Handle,
    pub lo: Rat,
    pub hi: Option<Rat>,
    pub matrix: Mat2,
    pub dst: Handle,
}

impl Sector {
    pub fn det(&self) -> i64 {
        let m = self.matrix;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    fn contains<S: Scalar>(&self, sigma: &Option<S>, witness: &S) -> bool {
        let above_lo = match sigma {
            None => true,
            Some(x) => x.minus(&witness.lift(&self.lo)).signum() >= 0,
        };
        let below_hi = match (&self.hi, sigma) {
            (None, _) => true,
            (Some(_), None) => false,
            (Some(h), Some(x)) => x.minus(&witness.lift(h)).signum() <= 0,
        };
        above_lo && below_hi
    }
}

/// Records that a map was induced by a cusp endomorphism, so rotation questions are decided arithmetically.
#[derive(Clone, Debug, PartialEq)]
pub struct CuspProvenance {
    pub cycle: Vec<i64>,
    pub s: u32,
    pub alpha: QuadElem,
}

#[derive(Clone, Debug)]
pub struct SkeletonMap {
    graph: DualGraph,
    sectors: Vec<Sector>,
    affine: Vec<(usize, Rat, Rat)>,
    non_finite: bool,
    cusp: Option<CuspProvenance>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Applied<S = Rat> {
    pub image: QMValuation<S>,
    pub rate: S,
    pub sector: usize,
}

fn swap_cols(m: Mat2) -> Mat2 {
    [[m[0][1], m[0][0]], [m[1][1], m[1][0]]]
}

fn swap_rows(m: Mat2) -> Mat2 {
    [m[1], m[0]]
}

fn inv_slope(x: &Option<Rat>) -> Option<Rat> {
    match x {
        None => Some(Rat::zero()),
        Some(v) if v.is_zero() => None,
        Some(v) => Some(Rat::one() / v),
    }
}

/// Primitive integer generator `(r, s)` of the ray of slope `x`.
fn generator(x: &Option<Rat>) -> (Rat, Rat) {
    match x {
        None => (Rat::zero(), Rat::one()),
        Some(v) => (Rat::from_integer(v.denom().clone()), Rat::from_integer(v.numer().clone())),
    }
}

fn mat_apply<S: Scalar>(m: &Mat2, r: &S, s: &S) -> (S, S) {
    let e = |x: i64| r.lift(&int(x));
    (e(m[0][0]).times(r).plus(&e(m[0][1]).times(s)), e(m[1][0]).times(r).plus(&e(m[1][1]).times(s)))
}

/// Image slope under the projective action of `m`.
pub fn mobius(m: &Mat2, x: &Option<Rat>) -> Option<Rat> {
    let (r, s) = match x {
        None => (Rat::zero(), Rat::one()),
        Some(v) => (Rat::one(), v.clone()),
    };
    let (r2, s2) = mat_apply(m, &r, &s);
    if r2.is_zero() {
        None
    } else {
        Some(s2 / r2)
    }
}

fn slope_le(a: &Option<Rat>, b: &Option<Rat>) -> bool {
    match (a, b) {
        (_, None) => true,
        (None, Some(_)) => false,
        (Some(x), Some(y)) => x <= y,
    }
}

fn site_of(h: Handle) -> Site {
    match h {
        Handle::Edge { index, .. } => Site::Edge(index),
        Handle::Ray(k) => Site::Ray(k),
    }
}

fn fmt_slope(x: &Option<Rat>) -> String {
    x.as_ref().map_or_else(|| "inf".to_string(), fmt_rat)
}

impl SkeletonMap {
    pub fn new(
        graph: DualGraph,
        specs: &[SectorSpec],
        affine: &[(String, Rat, Rat)],
        non_finite: bool,
        cusp: Option<CuspProvenance>,
    ) -> Result<Self> {
        let mut sectors = Vec::with_capacity(specs.len());
        for sp in specs {
            let src = graph.resolve_handle(&sp.src)?;
            let dst = graph.resolve_handle(&sp.dst)?;
            if let Some(h) = &sp.hi {
                if h < &sp.lo {
                    return Err(Error::InvalidSector(format!("empty cone on {}", sp.src)));
                }
            }
            if sp.lo.is_negative() {
                return Err(Error::InvalidSector(format!("negative slope on {}", sp.src)));
            }
            let mut m = sp.matrix;
            let (mut lo, mut hi) = (sp.lo.clone(), sp.hi.clone());
            if src.is_reversed() {
                m = swap_cols(m);
                lo = inv_slope(&hi).unwrap_or_else(Rat::zero);
                hi = inv_slope(&Some(sp.lo.clone()));
            }
            if dst.is_reversed() {
                m = swap_rows(m);
            }
            sectors.push(Sector { src: src.canonical(), lo, hi, matrix: m, dst: dst.canonical() });
        }
        let mut aff = Vec::new();
        for (label, l, mu) in affine {
            let Handle::Ray(k) = graph.resolve_handle(&format!("ray:{label}"))? else { unreachable!() };
            aff.push((k, l.clone(), mu.clone()));
        }
        let map = SkeletonMap { graph, sectors, affine: aff, non_finite, cusp };
        map.validate()?;
        Ok(map)
    }

    pub fn graph(&self) -> &DualGraph {
        &self.graph
    }

    pub fn sectors(&self) -> &[Sector] {
        &self.sectors
    }

    pub fn is_non_finite(&self) -> bool {
        self.non_finite
    }

    pub fn cusp(&self) -> Option<&CuspProvenance> {
        self.cusp.as_ref()
    }

    /// Source handles, in first-seen order.
    pub fn domain(&self) -> Vec<Handle> {
        let mut out: Vec<Handle> = Vec::new();
        for s in &self.sectors {
            if !out.contains(&s.src) {
                out.push(s.src);
            }
        }
        out
    }

    /// Primes bounding some source handle.
    pub fn domain_vertices(&self) -> Vec<usize> {
        let mut out = BTreeSet::new();
        for h in self.domain() {
            let (a, b) = self.graph.handle_ends(h);
            out.insert(a);
            if let Some(b) = b {
                out.insert(b);
            }
        }
        out.into_iter().collect()
    }

    fn image_point(&self, k: usize, r: &Rat, s: &Rat) -> QMValuation<Rat> {
        let sec = &self.sectors[k];
        let (r2, s2) = mat_apply(&sec.matrix, r, s);
        QMValuation { site: site_of(sec.dst), r: r2, s: s2 }.canonical(&self.graph)
    }

    fn validate(&self) -> Result<()> {
        let g = &self.graph;
        for (k, sec) in self.sectors.iter().enumerate() {
            let label = format!("sector {k} on {}", g.handle_text(sec.src));
            if sec.det() == 0 {
                return Err(Error::InvalidSector(format!("{label}: determinant is zero")));
            }
            for x in [Some(sec.lo.clone()), sec.hi.clone()] {
                let (r, s) = generator(&x);
                let (r2, s2) = mat_apply(&sec.matrix, &r, &s);
                if r2.is_negative() || s2.is_negative() || (r2.is_zero() && s2.is_zero()) {
                    return Err(Error::InvalidSector(format!(
                        "{label}: boundary slope {} leaves the target cone",
                        fmt_slope(&x)
                    )));
                }
            }
        }
        for h in self.domain() {
            let mut mine: Vec<usize> = (0..self.sectors.len()).filter(|&k| self.sectors[k].src == h).collect();
            mine.sort_by(|&a, &b| self.sectors[a].lo.cmp(&self.sectors[b].lo));
            let name = g.handle_text(h);
            if !self.sectors[mine[0]].lo.is_zero() {
                return Err(Error::InvalidSector(format!("{name}: cones do not start at slope 0")));
            }
            for w in mine.windows(2) {
                let (p, q) = (&self.sectors[w[0]], &self.sectors[w[1]]);
                if p.hi.as_ref() != Some(&q.lo) {
                    return Err(Error::InvalidSector(format!("{name}: cones do not tile at slope {}", fmt_rat(&q.lo))));
                }
                let (r, s) = generator(&Some(q.lo.clone()));
                if self.image_point(w[0], &r, &s) != self.image_point(w[1], &r, &s) {
                    return Err(Error::InvalidSector(format!("{name}: map is discontinuous at slope {}", fmt_rat(&q.lo))));
                }
            }
            if self.sectors[*mine.last().unwrap()].hi.is_some() {
                return Err(Error::InvalidSector(format!("{name}: cones do not reach slope inf")));
            }
        }
        for v in self.domain_vertices() {
            let nu = QMValuation::vertex(g, v);
            let mut seen: Option<QMValuation<Rat>> = None;
            for (k, r, s) in self.vertex_sectors(&nu) {
                let img = self.image_point(k, &r, &s);
                match &seen {
                    Some(x) if *x != img => {
                        return Err(Error::InvalidSector(format!("map is discontinuous at prime '{}'", g.id(v))));
                    }
                    _ => seen = Some(img),
                }
            }
        }
        for (k, l, mu) in &self.affine {
            let tail = self.sectors.iter().find(|s| s.src == Handle::Ray(*k) && s.hi.is_none());
            let name = format!("ray:{}", g.rays()[*k].label);
            let Some(t) = tail else {
                return Err(Error::InvalidSector(format!("{name}: affine data given but no tail sector")));
            };
            let m = t.matrix;
            let ok = t.dst == t.src && m[0][1] == 0 && int(m[1][1]) / int(m[0][0]) == *l && int(m[1][0]) / int(m[0][0]) == *mu;
            if !ok {
                return Err(Error::InvalidSector(format!("{name}: affine data disagree with the tail sector")));
            }
        }
        Ok(())
    }

    /// Sectors containing a vertex point, with its weights in each source handle.
    fn vertex_sectors<S: Scalar>(&self, nu: &QMValuation<S>) -> Vec<(usize, S, S)> {
        let Site::Vertex(i) = nu.site else { return vec![] };
        let zero = nu.r.lift(&Rat::zero());
        let mut out = Vec::new();
        for (k, sec) in self.sectors.iter().enumerate() {
            let (a, b) = self.graph.handle_ends(sec.src);
            if a == i && sec.lo.is_zero() {
                out.push((k, nu.r.clone(), zero.clone()));
            } else if b == Some(i) && sec.hi.is_none() {
                out.push((k, zero.clone(), nu.r.clone()));
            }
        }
        out
    }

    fn locate<S: Scalar>(&self, n: &QMValuation<S>) -> Result<(usize, S, S)> {
        if let Site::Vertex(_) = n.site {
            return self.vertex_sectors(n).into_iter().next().ok_or_else(|| self.outside(n));
        }
        let h = n.handle().expect("edge or ray");
        let sigma = if n.r.is_zero_value() { None } else { Some(n.s.over(&n.r)) };
        for (k, sec) in self.sectors.iter().enumerate() {
            if sec.src == h && sec.contains(&sigma, &n.r) {
                return Ok((k, n.r.clone(), n.s.clone()));
            }
        }
        Err(self.outside(n))
    }

    fn outside<S: Scalar>(&self, n: &QMValuation<S>) -> Error {
        let at = match n.site {
            Site::Vertex(i) => format!("vertex:{}", self.graph.id(i)),
            _ => format!("{} at slope {:.6}", self.graph.handle_text(n.handle().unwrap()), n.s.approx() / n.r.approx()),
        };
        Error::OutsideDomain(at)
    }

    pub fn apply<S: Scalar>(&self, nu: &QMValuation<S>) -> Result<Applied<S>> {
        let n = nu.normalized(&self.graph);
        let (k, r, s) = self.locate(&n)?;
        let sec = &self.sectors[k];
        let (r2, s2) = mat_apply(&sec.matrix, &r, &s);
        if r2.signum() < 0 || s2.signum() < 0 || (r2.is_zero_value() && s2.is_zero_value()) {
            return Err(Error::OutsideDomain(format!("image of sector {k} leaves its target cone")));
        }
        if matches!(sec.dst, Handle::Ray(_)) && r2.is_zero_value() {
            return Err(Error::OutsideDomain(format!("sector {k} sends the point to the end of {}", self.graph.handle_text(sec.dst))));
        }
        let img = QMValuation { site: site_of(sec.dst), r: r2, s: s2 };
        let rate = img.norm_factor(&self.graph);
        Ok(Applied { image: img.normalized(&self.graph), rate, sector: k })
    }

    /// `n + 1` points starting at `nu`, each with the cumulative rate `c(f^k, nu)`.
    pub fn orbit(&self, nu: &QMValuation<Rat>, n: usize) -> Result<Vec<(QMValuation<Rat>, Rat)>> {
        let mut cur = nu.normalized(&self.graph);
        let mut c = Rat::one();
        let mut out = vec![(cur.clone(), c.clone())];
        for _ in 0..n {
            let step = self.apply(&cur)?;
            c *= &step.rate;
            cur = step.image;
            out.push((cur.clone(), c.clone()));
        }
        Ok(out)
    }

    pub fn rates(&self, nu: &QMValuation<Rat>, n: usize) -> Result<Vec<Rat>> {
        Ok(self.orbit(nu, n - 1)?.into_iter().map(|(_, c)| c).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Recursion {
    pub m: usize,
    pub a: BigInt,
    pub b: BigInt,
    pub n0: usize,
}

pub const DEFAULT_M_MAX: usize = 6;
pub const DEFAULT_N_MAX: usize = 8;

fn as_integer(x: &Rat) -> Option<BigInt> {
    x.is_integer().then(|| x.to_integer())
}

/// Finds `c_{n+2m} = a c_{n+m} + b c_n` for all `n >= N0`, minimizing `m` then `N0`.
pub fn detect_recursion(seq: &[Rat], m_max: usize, n_max: usize) -> Result<Option<Recursion>> {
    let need = 2 * m_max + n_max + 2;
    if seq.len() < need {
        return Err(Error::InsufficientTerms { need, got: seq.len() });
    }
    let holds = |m: usize, n0: usize, a: &Rat, b: &Rat| (n0..seq.len() - 2 * m).all(|n| seq[n + 2 * m] == a * &seq[n + m] + b * &seq[n]);
    for m in 1..=m_max {
        for n0 in 0..=n_max {
            let (p0, p1, q0, q1) = (&seq[n0 + m], &seq[n0], &seq[n0 + 1 + m], &seq[n0 + 1]);
            let (y0, y1) = (&seq[n0 + 2 * m], &seq[n0 + 1 + 2 * m]);
            let det = p0 * q1 - p1 * q0;
            let mut candidates: Vec<(Rat, Rat)> = Vec::new();
            if !det.is_zero() {
                let a = (y0 * q1 - p1 * y1) / &det;
                let b = (p0 * y1 - y0 * q0) / &det;
                candidates.push((a, b));
            } else {
                if !p0.is_zero() {
                    candidates.push((y0 / p0, Rat::zero()));
                }
                if !p1.is_zero() {
                    candidates.push((Rat::zero(), y0 / p1));
                }
            }
            for (a, b) in candidates {
                let (Some(ai), Some(bi)) = (as_integer(&a), as_integer(&b)) else { continue };
                if holds(m, n0, &a, &b) {
                    return Ok(Some(Recursion { m, a: ai, b: bi, n0 }));
                }
            }
        }
    }
    Ok(None)
}

/// Algebraic integer given by its minimal polynomial (leading coefficient first) and the chosen real root.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticInteger {
    pub minpoly: Vec<BigInt>,
    pub approx: f64,
}

impl QuadraticInteger {
    pub fn rational(x: &Rat) -> Self {
        QuadraticInteger { minpoly: primitive_integer_poly(&[Rat::one(), -x.clone()]), approx: x.to_f64().unwrap_or(f64::NAN) }
    }

    /// Larger root of `x^2 - p x + q`.
    pub fn from_trace_det(p: &BigInt, q: &BigInt) -> Self {
        let disc = p * p - q * BigInt::from(4);
        let pr = Rat::from_integer(p.clone());
        if let Some(root) = rat_sqrt(&Rat::from_integer(disc.clone())) {
            return QuadraticInteger::rational(&((pr + root) / int(2)));
        }
        let pf = p.to_f64().unwrap_or(f64::NAN);
        let approx = (pf + disc.to_f64().unwrap_or(f64::NAN).sqrt()) / 2.0;
        QuadraticInteger { minpoly: vec![BigInt::one(), -p.clone(), q.clone()], approx }
    }

    pub fn is_integer(&self) -> bool {
        self.minpoly.len() == 2 && self.minpoly[0].is_one()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FixedKind {
    Divisorial { point: QMValuation<Rat>, rate: Rat, attracting: bool },
    Irrational {
        sector: usize,
        slope: QuadElem,
        point: QMValuation<QuadElem>,
        rate: QuadElem,
        skewness: QuadElem,
        attracting: bool,
    },
    End { ray: usize, sector: usize, rate: Rat, attracting: bool },
    /// Pointwise fixed (or periodic, `period > 1`) piece of a handle.
    Segment { sector: usize, lo: Rat, hi: Option<Rat>, period: usize, rate: Rat },
    Rotation { beta: Option<f64>, rational: Option<Rat>, period: Option<usize> },
}

impl FixedKind {
    pub fn name(&self) -> &'static str {
        match self {
            FixedKind::Divisorial { .. } => "divisorial-point",
            FixedKind::Irrational { .. } => "irrational-point",
            FixedKind::End { .. } => "end",
            FixedKind::Segment { .. } => "segment",
            FixedKind::Rotation { .. } => "circle-rotation",
        }
    }

    fn attracting(&self) -> bool {
        match self {
            FixedKind::Divisorial { attracting, .. }
            | FixedKind::Irrational { attracting, .. }
            | FixedKind::End { attracting, .. } => *attracting,
            _ => false,
        }
    }
}

/// Evidence that orbits of every domain vertex contract to the fixed point.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub seeds: usize,
    pub max_steps: usize,
    pub worst_final: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FixedReport {
    pub primary: FixedKind,
    pub candidates: Vec<FixedKind>,
    pub certificate: Option<Certificate>,
}

pub const ITERATION_BUDGET: usize = 256;
const CONVERGED: f64 = 1e-12;

fn quad_slope_roots(a: i64, b: i64, c: i64, d: i64) -> Vec<std::result::Result<Rat, QuadElem>> {
    // b x^2 + (a - d) x - c = 0
    let (a, b, c, d) = (BigInt::from(a), BigInt::from(b), BigInt::from(c), BigInt::from(d));
    if b.is_zero() {
        if a == d {
            return vec![];
        }
        return vec![Ok(Rat::new(c, &a - &d))];
    }
    let disc: BigInt = (&a - &d) * (&a - &d) + BigInt::from(4) * &b * &c;
    if disc.is_negative() {
        return vec![];
    }
    let two_b = Rat::from_integer(BigInt::from(2) * &b);
    let base = Rat::from_integer(&d - &a) / &two_b;
    if let Some(root) = rat_sqrt(&Rat::from_integer(disc.clone())) {
        let w = root / &two_b;
        return vec![Ok(&base + &w), Ok(&base - &w)];
    }
    let (f, sq) = squarefree_part(&disc);
    let w = Rat::from_integer(f) / &two_b;
    let plus = QuadElem::new(base.clone(), w.clone(), sq.clone()).expect("square-free part");
    let minus = QuadElem::new(base, -w, sq).expect("square-free part");
    vec![Err(plus), Err(minus)]
}

impl SkeletonMap {
    /// One-sided slope factors `d/a` at a fixed vertex, computed with the vertex as first end.
    fn vertex_factors(&self, i: usize) -> Vec<Rat> {
        let nu = QMValuation::vertex(&self.graph, i);
        let mut out = Vec::new();
        for (k, r, _) in self.vertex_sectors(&nu) {
            let sec = &self.sectors[k];
            let mut m = sec.matrix;
            if r.is_zero() {
                m = swap_cols(m);
            }
            let (da, db) = self.graph.handle_ends(sec.dst);
            if m[1][0] != 0 || da != i {
                if m[0][0] == 0 && db == Some(i) {
                    m = swap_rows(m);
                } else {
                    continue;
                }
            }
            out.push(int(m[1][1]) / int(m[0][0]));
        }
        out
    }

    pub fn fixed_candidates(&self) -> Result<Vec<FixedKind>> {
        let g = &self.graph;
        let mut out: Vec<FixedKind> = Vec::new();
        for v in self.domain_vertices() {
            let nu = QMValuation::vertex(g, v);
            let step = self.apply(&nu)?;
            if step.image == nu {
                let attracting = self.vertex_factors(v).iter().all(|f| f < &Rat::one());
                out.push(FixedKind::Divisorial { point: nu, rate: step.rate, attracting });
            }
        }
        for (k, sec) in self.sectors.iter().enumerate() {
            if sec.dst != sec.src {
                continue;
            }
            let [[a, b], [c, d]] = sec.matrix;
            if b == 0 && c == 0 && a == d {
                out.push(FixedKind::Segment { sector: k, lo: sec.lo.clone(), hi: sec.hi.clone(), period: 1, rate: int(a) });
                continue;
            }
            let det = Rat::from_integer(BigInt::from(sec.det()).abs());
            for root in quad_slope_roots(a, b, c, d) {
                match root {
                    Ok(x) => {
                        if !x.is_positive() || !sec.contains(&Some(x.clone()), &x) {
                            continue;
                        }
                        let lambda = int(a) + int(b) * &x;
                        if !lambda.is_positive() {
                            continue;
                        }
                        let point = QMValuation::on_handle(sec.src, Rat::one(), x)?.normalized(g);
                        let attracting = det < &lambda * &lambda;
                        let dup = out.iter().any(|f| matches!(f, FixedKind::Divisorial { point: p, .. } if *p == point));
                        if !dup {
                            out.push(FixedKind::Divisorial { point, rate: lambda, attracting });
                        }
                    }
                    Err(x) => {
                        if x.sign() <= 0 || !sec.contains(&Some(x.clone()), &x) {
                            continue;
                        }
                        let lambda = x.lift(&int(a)).plus(&x.lift(&int(b)).times(&x));
                        if lambda.sign() <= 0 {
                            continue;
                        }
                        let one = x.lift(&Rat::one());
                        let point = QMValuation::on_handle(sec.src, one, x.clone())?.normalized(g);
                        let attracting = x.lift(&det).minus(&lambda.times(&lambda)).sign() < 0;
                        let skew = skewness(&point, g);
                        out.push(FixedKind::Irrational { sector: k, slope: x, point, rate: lambda, skewness: skew, attracting });
                    }
                }
            }
            if let (Handle::Ray(ray), None, 0) = (sec.src, &sec.hi, b) {
                let attracting = d > a || (d == a && c > 0);
                out.push(FixedKind::End { ray, sector: k, rate: int(a), attracting });
            }
        }
        Ok(out)
    }

    /// Classifies the fixed set and certifies convergence of vertex orbits where that applies.
    pub fn find_fixed_set(&self) -> Result<FixedReport> {
        if let Some(cp) = &self.cusp {
            let data = CuspData::new(cp.cycle.clone(), cp.s)?;
            let rot = rotation_number(&cp.alpha, &data)?;
            let primary = FixedKind::Rotation { beta: Some(rot.beta), rational: rot.rational.clone(), period: None };
            return Ok(FixedReport { primary, candidates: vec![], certificate: None });
        }
        let candidates = self.fixed_candidates()?;
        debug!("fixed-set candidates: {}", candidates.len());
        let attracting: Vec<&FixedKind> = candidates
            .iter()
            .filter(|c| c.attracting() && matches!(c, FixedKind::Divisorial { .. } | FixedKind::Irrational { .. }))
            .collect();
        if attracting.len() > 1 {
            warn!("{} attracting fixed points; certifying the first", attracting.len());
        }
        let primary = if let Some(p) = attracting.first() {
            (*p).clone()
        } else if let Some(seg) = candidates.iter().find(|c| matches!(c, FixedKind::Segment { .. })) {
            seg.clone()
        } else if let Some(end) = candidates.iter().find(|c| matches!(c, FixedKind::End { attracting: true, .. })) {
            end.clone()
        } else {
            self.periodic_search()?
        };
        let certificate = match &primary {
            FixedKind::Divisorial { point, .. } => Some(self.certify(&point.clone(), |p| p.clone())?),
            FixedKind::Irrational { point, slope, .. } => Some(self.certify(point, |p| p.to_quad(slope))?),
            _ => None,
        };
        Ok(FixedReport { primary, candidates, certificate })
    }

    fn certify<S: Scalar>(&self, target: &QMValuation<S>, lift: impl Fn(&QMValuation<Rat>) -> QMValuation<S>) -> Result<Certificate> {
        let g = &self.graph;
        let seeds = self.domain_vertices();
        let mut max_steps = 0;
        let mut worst: f64 = 0.0;
        for &v in &seeds {
            let mut cur = QMValuation::vertex(g, v);
            let mut prev = angular_distance(&lift(&cur), target, g).exact_exp;
            let mut steps = 0;
            while prev.approx() - 1.0 > CONVERGED {
                if steps == ITERATION_BUDGET {
                    return Err(Error::Unresolved(format!(
                        "orbit of prime '{}' is still at exp(rho) = {:.3e} after {ITERATION_BUDGET} steps",
                        g.id(v),
                        prev.approx()
                    )));
                }
                cur = self.apply(&cur)?.image;
                let e = angular_distance(&lift(&cur), target, g).exact_exp;
                if e.minus(&prev).signum() > 0 {
                    return Err(Error::Unresolved(format!("exp(rho) to the fixed point increased along the orbit of '{}'", g.id(v))));
                }
                prev = e;
                steps += 1;
            }
            max_steps = max_steps.max(steps);
            worst = worst.max(prev.approx() - 1.0);
        }
        Ok(Certificate { seeds: seeds.len(), max_steps, worst_final: worst })
    }

    fn periodic_search(&self) -> Result<FixedKind> {
        let g = &self.graph;
        let core = g.essential_skeleton();
        let on_cycle = !core.is_empty() && core.iter().all(|&i| g.neighbors(i).iter().filter(|j| core.contains(j)).count() == 2);
        for v in self.domain_vertices() {
            let start = QMValuation::vertex(g, v);
            let mut cur = start.clone();
            let mut c = Rat::one();
            for n in 1..=ITERATION_BUDGET {
                let step = self.apply(&cur)?;
                c *= &step.rate;
                cur = step.image;
                if cur == start {
                    if on_cycle {
                        return Ok(FixedKind::Rotation { beta: None, rational: None, period: Some(n) });
                    }
                    let k = self.locate(&start)?.0;
                    return Ok(FixedKind::Segment { sector: k, lo: Rat::zero(), hi: None, period: n, rate: c });
                }
            }
        }
        Err(Error::Unresolved(format!("no fixed point, segment, end or periodic vertex orbit within {ITERATION_BUDGET} steps")))
    }

    pub fn dynamical_degree(&self) -> Result<QuadraticInteger> {
        let report = self.find_fixed_set()?;
        match &report.primary {
            FixedKind::Divisorial { rate, .. } | FixedKind::End { rate, .. } => Ok(QuadraticInteger::rational(rate)),
            FixedKind::Irrational { sector, .. } => {
                let m = self.sectors[*sector].matrix;
                let tr = BigInt::from(m[0][0] + m[1][1]);
                Ok(QuadraticInteger::from_trace_det(&tr, &BigInt::from(self.sectors[*sector].det())))
            }
            FixedKind::Segment { period: 1, rate, .. } => Ok(QuadraticInteger::rational(rate)),
            FixedKind::Segment { period: 2, rate, .. } => {
                let r = rate.to_integer();
                Ok(QuadraticInteger::from_trace_det(&BigInt::zero(), &-r))
            }
            FixedKind::Segment { period, .. } => {
                Err(Error::Unresolved(format!("segment of period {period}: the degree is not a quadratic integer of this form")))
            }
            FixedKind::Rotation { .. } => {
                let dets: BTreeSet<i64> = self.sectors.iter().map(|s| s.det()).collect();
                if dets.len() != 1 {
                    let list: Vec<String> = dets.iter().map(|d| d.to_string()).collect();
                    return Err(Error::NonConstantDeterminant(list.join(",")));
                }
                let det = *dets.iter().next().unwrap();
                Ok(QuadraticInteger::from_trace_det(&BigInt::zero(), &BigInt::from(-det)))
            }
        }
    }

    /// Random normalized points of the domain; slopes have denominators up to 40, unbounded cones are cut at `lo + 8`.
    pub fn sample_point(&self, rng: &mut impl Rng) -> QMValuation<Rat> {
        let sec = &self.sectors[rng.gen_range(0..self.sectors.len())];
        let hi = sec.hi.clone().unwrap_or_else(|| &sec.lo + int(8));
        let den: i64 = rng.gen_range(1..=40);
        let num: i64 = rng.gen_range(0..=den);
        let x = &sec.lo + (hi - &sec.lo) * Rat::new(num.into(), den.into());
        QMValuation::on_handle(sec.src, Rat::one(), x).expect("valid weights").normalized(&self.graph)
    }

    pub fn sample_pairs(&self, rng: &mut impl Rng, n: usize) -> Vec<(QMValuation<Rat>, QMValuation<Rat>)> {
        (0..n).map(|_| (self.sample_point(rng), self.sample_point(rng))).collect()
    }

    pub fn check_nonexpansion(&self, pairs: &[(QMValuation<Rat>, QMValuation<Rat>)]) -> Result<NonexpansionReport> {
        let g = &self.graph;
        let mut rep = NonexpansionReport { pairs: pairs.len(), strict_required: self.non_finite, ..Default::default() };
        for (idx, (nu, mu)) in pairs.iter().enumerate() {
            let (n, m) = (nu.normalized(g), mu.normalized(g));
            if n == m {
                rep.identical += 1;
                continue;
            }
            let before = angular_distance(&n, &m, g).exact_exp;
            let after = angular_distance(&self.apply(&n)?.image, &self.apply(&m)?.image, g).exact_exp;
            if after > before {
                rep.violations.push(idx);
            } else if after == before {
                rep.equal += 1;
            } else {
                rep.strict += 1;
            }
        }
        rep.ok = rep.violations.is_empty() && (!self.non_finite || rep.equal == 0);
        Ok(rep)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NonexpansionReport {
    pub pairs: usize,
    pub identical: usize,
    pub equal: usize,
    pub strict: usize,
    pub violations: Vec<usize>,
    pub strict_required: bool,
    pub ok: bool,
}

/// Stern-Brocot path to a positive rational: every mediant visited, ending with `x` itself.
pub fn stern_brocot_path(x: &Rat) -> Vec<Rat> {
    let (p, q) = (x.numer().clone(), x.denom().clone());
    let mut out = Vec::new();
    let (mut ln, mut ld) = (BigInt::zero(), BigInt::one());
    let (mut rn, mut rd) = (BigInt::one(), BigInt::zero());
    loop {
        let (mn, md) = (&ln + &rn, &ld + &rd);
        out.push(Rat::new(mn.clone(), md.clone()));
        // compare mn/md with p/q
        match (&mn * &q).cmp(&(&p * &md)) {
            std::cmp::Ordering::Equal => return out,
            std::cmp::Ordering::Less => {
                ln = mn;
                ld = md;
            }
            std::cmp::Ordering::Greater => {
                rn = mn;
                rd = md;
            }
        }
    }
}

fn blowups_for(xs: &[Option<Rat>]) -> BTreeSet<Rat> {
    let mut need = BTreeSet::new();
    for x in xs.iter().flatten() {
        if x.is_positive() {
            need.extend(stern_brocot_path(x));
        }
    }
    need
}

/// Fractions of Stern-Brocot depth at most `depth` in `[0, inf]`, sorted, with `None` last.
fn stern_brocot_level(depth: usize) -> Vec<Option<Rat>> {
    let mut pts: Vec<(BigInt, BigInt)> = vec![(BigInt::zero(), BigInt::one()), (BigInt::one(), BigInt::zero())];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(pts.len() * 2);
        for w in pts.windows(2) {
            next.push(w[0].clone());
            next.push((&w[0].0 + &w[1].0, &w[0].1 + &w[1].1));
        }
        next.push(pts.last().unwrap().clone());
        pts = next;
    }
    pts.into_iter().map(|(n, d)| if d.is_zero() { None } else { Some(Rat::new(n, d)) }).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Interval {
    pub handle: Handle,
    pub lo: Rat,
    pub hi: Option<Rat>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityReport {
    pub verdict: String,
    pub interval: Option<Interval>,
    /// Slopes on the interval's handle that must become primes.
    pub realize: Vec<Rat>,
    pub contract_interior: bool,
    pub witness: Option<QMValuation<Rat>>,
}

impl SkeletonMap {
    fn invariant(&self, k: usize, lo: &Option<Rat>, hi: &Option<Rat>) -> bool {
        let sec = &self.sectors[k];
        if !(slope_le(&Some(sec.lo.clone()), lo) && slope_le(hi, &sec.hi)) {
            return false;
        }
        let (x, y) = (mobius(&sec.matrix, lo), mobius(&sec.matrix, hi));
        let (a, b) = if slope_le(&x, &y) { (x, y) } else { (y, x) };
        slope_le(lo, &a) && slope_le(&b, hi)
    }

    /// Cheapest interval around slope `target` in sector `k` mapped into itself, by Stern-Brocot depth.
    fn search_interval(&self, k: usize, below: impl Fn(&Option<Rat>) -> bool, above: impl Fn(&Option<Rat>) -> bool) -> Option<(Option<Rat>, Option<Rat>)> {
        for depth in 0..=10 {
            let pts = stern_brocot_level(depth);
            let mut best: Option<(usize, Option<Rat>, Option<Rat>)> = None;
            for lo in pts.iter().filter(|x| below(x)) {
                for hi in pts.iter().filter(|x| above(x)) {
                    if !self.invariant(k, lo, hi) {
                        continue;
                    }
                    let cost = blowups_for(&[lo.clone(), hi.clone()]).len();
                    if best.as_ref().map_or(true, |b| cost < b.0) {
                        best = Some((cost, lo.clone(), hi.clone()));
                    }
                }
            }
            if let Some((_, lo, hi)) = best {
                return Some((lo, hi));
            }
        }
        None
    }

    pub fn stability_report(&self) -> Result<StabilityReport> {
        let g = &self.graph;
        let report = self.find_fixed_set()?;
        let interval_report = |h: Handle, lo: Option<Rat>, hi: Option<Rat>, verdict: String| {
            let need = blowups_for(&[lo.clone(), hi.clone()]);
            let interior = need.iter().any(|x| lo.as_ref().map_or(false, |l| x > l) && hi.as_ref().map_or(true, |h| x < h));
            StabilityReport {
                verdict,
                interval: Some(Interval { handle: h, lo: lo.unwrap_or_else(Rat::zero), hi }),
                realize: need.into_iter().collect(),
                contract_interior: interior,
                witness: None,
            }
        };
        Ok(match report.primary {
            FixedKind::Divisorial { point, .. } => match point.site {
                Site::Vertex(i) => StabilityReport {
                    verdict: format!("the eigenvaluation is the prime '{}': the model is stable along it", g.id(i)),
                    interval: None,
                    realize: vec![],
                    contract_interior: false,
                    witness: Some(point),
                },
                _ => {
                    let h = point.handle().unwrap();
                    let x = Some(&point.s / &point.r);
                    let mut rep = interval_report(h, x.clone(), x, "realize the eigenvaluation by blowing up along the edge".into());
                    rep.witness = Some(point);
                    rep
                }
            },
            FixedKind::Irrational { sector, slope, .. } => {
                let sec = &self.sectors[sector];
                let below = |x: &Option<Rat>| x.as_ref().map_or(false, |v| slope.minus(&slope.lift(v)).sign() > 0);
                let above = |x: &Option<Rat>| x.as_ref().map_or(true, |v| slope.minus(&slope.lift(v)).sign() < 0);
                match self.search_interval(sector, below, above) {
                    Some((lo, hi)) => interval_report(sec.src, lo, hi, "realize the endpoints of J, then contract the interior chain".into()),
                    None => return Err(Error::Unresolved("no invariant interval of Stern-Brocot depth <= 10".into())),
                }
            }
            FixedKind::Segment { sector, lo, hi, .. } => {
                let sec = &self.sectors[sector];
                interval_report(sec.src, Some(lo), hi, "realize the endpoints of the fixed segment".into())
            }
            FixedKind::End { ray, sector, .. } => {
                let sec = &self.sectors[sector];
                let witness = QMValuation::on_handle(Handle::Ray(ray), Rat::one(), sec.lo.clone())?.normalized(g);
                StabilityReport {
                    verdict: format!("blow up toward the end of ray:{} until a free point is fixed", g.rays()[ray].label),
                    interval: None,
                    realize: vec![],
                    contract_interior: false,
                    witness: Some(witness),
                }
            }
            FixedKind::Rotation { rational: None, period: None, .. } => StabilityReport {
                verdict: "no geometrically stable model exists".into(),
                interval: None,
                realize: vec![],
                contract_interior: false,
                witness: None,
            },
            FixedKind::Rotation { rational, period, .. } => StabilityReport {
                verdict: match (rational, period) {
                    (Some(b), _) => format!("rational rotation {}: every cycle point is periodic", fmt_rat(&b)),
                    (None, Some(p)) => format!("vertex orbits are periodic with period {p}"),
                    _ => unreachable!(),
                },
                interval: None,
                realize: vec![],
                contract_interior: false,
                witness: None,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;
    use crate::resolution::Prime;

    fn chain() -> DualGraph {
        DualGraph::build(
            vec![Prime::rational("E0", -2), Prime::rational("E1", -2), Prime::rational("E2", -1)],
            &[("E0".into(), "E1".into()), ("E1".into(), "E2".into())],
            &[],
        )
        .unwrap()
    }

    fn spec(src: &str, lo: Rat, hi: Option<Rat>, m: Mat2, dst: &str) -> SectorSpec {
        SectorSpec { src: src.into(), lo, hi, matrix: m, dst: dst.into() }
    }

    #[test]
    fn identity_map() {
        let g = chain();
        let specs = vec![
            spec("edge:(E0,E1)", int(0), None, [[1, 0], [0, 1]], "edge:(E0,E1)"),
            spec("edge:(E1,E2)", int(0), None, [[1, 0], [0, 1]], "edge:(E1,E2)"),
        ];
        let f = SkeletonMap::new(g.clone(), &specs, &[], false, None).unwrap();
        let nu = QMValuation::parse(&g, "edge:(E0,E1)#0 t=2/5").unwrap();
        let out = f.apply(&nu).unwrap();
        assert_eq!(out.image, nu);
        assert_eq!(out.rate, int(1));
        let rep = f.check_nonexpansion(&[(nu.clone(), QMValuation::vertex(&g, 2))]).unwrap();
        assert_eq!(rep.equal, 1);
        assert!(rep.ok);
    }

    #[test]
    fn reversed_specs_are_canonicalized() {
        let g = chain();
        let fwd = vec![
            spec("edge:(E0,E1)", int(0), Some(int(1)), [[1, 0], [0, 1]], "edge:(E0,E1)"),
            spec("edge:(E0,E1)", int(1), None, [[1, 0], [0, 1]], "edge:(E0,E1)"),
            spec("edge:(E1,E2)", int(0), None, [[2, 0], [0, 2]], "edge:(E1,E2)"),
        ];
        let rev = vec![
            spec("edge:(E1,E0)", int(0), Some(int(1)), [[1, 0], [0, 1]], "edge:(E1,E0)"),
            spec("edge:(E1,E0)", int(1), None, [[1, 0], [0, 1]], "edge:(E1,E0)"),
            spec("edge:(E2,E1)", int(0), None, [[2, 0], [0, 2]], "edge:(E2,E1)"),
        ];
        assert!(SkeletonMap::new(g.clone(), &fwd, &[], false, None).is_err());
        assert!(SkeletonMap::new(g.clone(), &rev, &[], false, None).is_err());
        let swap = vec![spec("edge:(E1,E0)", int(0), None, [[0, 1], [1, 0]], "edge:(E0,E1)"), spec("edge:(E1,E2)", int(0), None, [[1, 0], [0, 1]], "edge:(E1,E2)")];
        let f = SkeletonMap::new(g, &swap, &[], false, None).unwrap();
        assert_eq!(f.sectors()[0].matrix, [[1, 0], [0, 1]]);
    }

    #[test]
    fn rejects_bad_sectors() {
        let g = chain();
        let gap = vec![
            spec("edge:(E0,E1)", int(0), Some(int(1)), [[1, 0], [0, 1]], "edge:(E0,E1)"),
            spec("edge:(E0,E1)", int(2), None, [[1, 0], [0, 1]], "edge:(E0,E1)"),
        ];
        assert_eq!(SkeletonMap::new(g.clone(), &gap, &[], false, None).unwrap_err().kind(), "invalid_sector");
        let singular = vec![spec("edge:(E0,E1)", int(0), None, [[1, 1], [1, 1]], "edge:(E0,E1)")];
        assert_eq!(SkeletonMap::new(g.clone(), &singular, &[], false, None).unwrap_err().kind(), "invalid_sector");
        let negative = vec![spec("edge:(E0,E1)", int(0), None, [[1, -1], [0, 1]], "edge:(E0,E1)")];
        assert_eq!(SkeletonMap::new(g, &negative, &[], false, None).unwrap_err().kind(), "invalid_sector");
    }

    #[test]
    fn recursion_detection() {
        let fib: Vec<Rat> = {
            let mut v = vec![int(1), int(1)];
            while v.len() < 30 {
                let n = v.len();
                v.push(&v[n - 1] + &v[n - 2]);
            }
            v
        };
        let r = detect_recursion(&fib, 6, 8).unwrap().unwrap();
        assert_eq!((r.m, r.a.clone(), r.b.clone(), r.n0), (1, BigInt::from(1), BigInt::from(1), 0));
        let geo: Vec<Rat> = (0..30).map(|k| int(3).pow(k)).collect();
        let r = detect_recursion(&geo, 6, 8).unwrap().unwrap();
        assert_eq!((r.m, r.a, r.b), (1, BigInt::from(3), BigInt::zero()));
        assert_eq!(detect_recursion(&geo[..10], 6, 8).unwrap_err().kind(), "insufficient_terms");
        // halving is a recursion with non-integer a
        let half: Vec<Rat> = (0..30).map(|k| rat(1, 2).pow(k)).collect();
        assert!(detect_recursion(&half, 6, 8).unwrap().is_none());
    }

    #[test]
    fn stern_brocot() {
        assert_eq!(stern_brocot_path(&rat(3, 4)), vec![int(1), rat(1, 2), rat(2, 3), rat(3, 4)]);
        assert_eq!(stern_brocot_path(&int(1)), vec![int(1)]);
        assert_eq!(stern_brocot_level(1), vec![Some(int(0)), Some(int(1)), None]);
    }

    #[test]
    fn quadratic_integers() {
        let q = QuadraticInteger::from_trace_det(&BigInt::from(2), &BigInt::from(-1));
        assert_eq!(q.minpoly, vec![BigInt::from(1), BigInt::from(-2), BigInt::from(-1)]);
        assert!((q.approx - (1.0 + 2f64.sqrt())).abs() < 1e-12);
        let sq = QuadraticInteger::from_trace_det(&BigInt::zero(), &BigInt::from(-4));
        assert_eq!(sq.minpoly, vec![BigInt::from(1), BigInt::from(-2)]);
    }
}
