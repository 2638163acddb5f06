//! Quasimonomial valuations as points of the embedded dual graph.
//!
//! A point carries homogeneous weights `(r, s)` on its site. Edge weights are stored in the edge's
//! declared orientation, so `r` belongs to the first end. On a ray, `r` belongs to the prime the ray
//! leaves and `s` to the end; ends have no dual divisor and log discrepancy 1.

use num_traits::{One, Signed, Zero};

use crate::arith::{parse_rat, rat_to_f64, Rat, Scalar};
use crate::error::{Error, Result};
use crate::resolution::{DualGraph, Handle};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Site {
    Vertex(usize),
    Edge(usize),
    Ray(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct QMValuation<S = Rat> {
    pub site: Site,
    pub r: S,
    pub s: S,
}

impl<S: Scalar> QMValuation<S> {
    /// Orients weights given along `h` into storage orientation.
    pub fn on_handle(h: Handle, r: S, s: S) -> Result<Self> {
        if r.signum() < 0 || s.signum() < 0 || (r.is_zero_value() && s.is_zero_value()) {
            return Err(Error::InvalidValuation("weights must be >= 0 and not both zero".into()));
        }
        Ok(match h {
            Handle::Edge { index, reversed: false } => QMValuation { site: Site::Edge(index), r, s },
            Handle::Edge { index, reversed: true } => QMValuation { site: Site::Edge(index), r: s, s: r },
            Handle::Ray(k) => {
                if r.is_zero_value() {
                    return Err(Error::InvalidValuation("a ray point needs r > 0; the end itself is not quasimonomial".into()));
                }
                QMValuation { site: Site::Ray(k), r, s }
            }
        })
    }

    /// Weights read along `h` (swapped back when `h` is reversed).
    pub fn weights_along(&self, h: Handle) -> (S, S) {
        if h.is_reversed() {
            (self.s.clone(), self.r.clone())
        } else {
            (self.r.clone(), self.s.clone())
        }
    }

    pub fn handle(&self) -> Option<Handle> {
        match self.site {
            Site::Vertex(_) => None,
            Site::Edge(index) => Some(Handle::Edge { index, reversed: false }),
            Site::Ray(k) => Some(Handle::Ray(k)),
        }
    }

    /// Primes carrying the dual divisor, with their weights.
    pub fn ends(&self, g: &DualGraph) -> Vec<(usize, S)> {
        match self.site {
            Site::Vertex(i) => vec![(i, self.r.clone())],
            Site::Edge(e) => {
                let (a, b) = g.edges()[e];
                vec![(a, self.r.clone()), (b, self.s.clone())]
            }
            Site::Ray(k) => vec![(g.rays()[k].from, self.r.clone())],
        }
    }

    /// `nu(m)`: the value on the maximal ideal.
    pub fn norm_factor(&self, g: &DualGraph) -> S {
        let zero = self.r.lift(&Rat::zero());
        self.ends(g).iter().fold(zero, |acc, (i, w)| acc.plus(&w.times(&w.lift(&g.b_rat(*i)))))
    }

    /// Collapses a point with a vanishing weight onto the corresponding vertex.
    pub fn canonical(&self, g: &DualGraph) -> Self {
        match self.site {
            Site::Edge(e) if self.s.is_zero_value() => {
                QMValuation { site: Site::Vertex(g.edges()[e].0), r: self.r.clone(), s: self.s.clone() }
            }
            Site::Edge(e) if self.r.is_zero_value() => {
                QMValuation { site: Site::Vertex(g.edges()[e].1), r: self.s.clone(), s: self.r.clone() }
            }
            Site::Ray(k) if self.s.is_zero_value() => {
                QMValuation { site: Site::Vertex(g.rays()[k].from), r: self.r.clone(), s: self.s.clone() }
            }
            _ => self.clone(),
        }
    }

    /// Rescales so that `nu(m) = 1`, then canonicalizes.
    pub fn normalized(&self, g: &DualGraph) -> Self {
        let f = self.norm_factor(g);
        QMValuation { site: self.site, r: self.r.over(&f), s: self.s.over(&f) }.canonical(g)
    }

    pub fn is_normalized(&self, g: &DualGraph) -> bool {
        self.norm_factor(g).minus(&self.r.lift(&Rat::one())).is_zero_value()
    }
}

impl QMValuation<Rat> {
    /// The normalized divisorial valuation of prime `i`.
    pub fn vertex(g: &DualGraph, i: usize) -> Self {
        QMValuation { site: Site::Vertex(i), r: Rat::one() / g.b_rat(i), s: Rat::zero() }
    }

    /// Normalized point at monomial parameter `t` along `h` (`t = 0` is the first end).
    pub fn at_parameter(g: &DualGraph, h: Handle, t: &Rat) -> Result<Self> {
        let (a, b) = g.handle_ends(h);
        let Some(b) = b else {
            return Err(Error::InvalidValuation("the parameter t is only defined on edges".into()));
        };
        if t.is_negative() || t > &Rat::one() {
            return Err(Error::InvalidValuation("t must lie in [0,1]".into()));
        }
        let r = (Rat::one() - t) / g.b_rat(a);
        let s = t / g.b_rat(b);
        Ok(QMValuation::on_handle(h, r, s)?.canonical(g))
    }

    /// Parses `vertex:E`, `edge:(E,F)#k r=.. s=..`, `edge:(E,F)#k t=..` or `ray:label s=..`.
    pub fn parse(g: &DualGraph, text: &str) -> Result<Self> {
        let mut parts = text.split_whitespace();
        let head = parts.next().ok_or_else(|| Error::Parse("empty valuation literal".into()))?;
        let mut r = None;
        let mut s = None;
        let mut t = None;
        for kv in parts {
            let (k, v) = kv.split_once('=').ok_or_else(|| Error::Parse(format!("expected key=value, got '{kv}'")))?;
            let v = parse_rat(v)?;
            match k {
                "r" => r = Some(v),
                "s" => s = Some(v),
                "t" => t = Some(v),
                _ => return Err(Error::Parse(format!("unknown valuation key '{k}'"))),
            }
        }
        if let Some(id) = head.strip_prefix("vertex:") {
            if r.is_some() || s.is_some() || t.is_some() {
                return Err(Error::Parse("a vertex literal takes no weights".into()));
            }
            return Ok(QMValuation::vertex(g, g.idx(id)?));
        }
        let h = g.resolve_handle(head)?;
        match (h, r, s, t) {
            (_, None, None, Some(t)) => QMValuation::at_parameter(g, h, &t),
            (_, Some(r), Some(s), None) => Ok(QMValuation::on_handle(h, r, s)?),
            (Handle::Ray(k), None, Some(s), None) => {
                let r = Rat::one() / g.b_rat(g.rays()[k].from);
                QMValuation::on_handle(h, r, s)
            }
            _ => Err(Error::Parse(format!("cannot read weights in '{text}'"))),
        }
    }

    /// Literal of the normalized point.
    pub fn to_literal(&self, g: &DualGraph) -> String {
        use crate::arith::fmt_rat;
        let n = self.normalized(g);
        match n.site {
            Site::Vertex(i) => format!("vertex:{}", g.id(i)),
            Site::Edge(e) => format!("{} r={} s={}", g.edge_handle(e), fmt_rat(&n.r), fmt_rat(&n.s)),
            Site::Ray(k) => format!("ray:{} r={} s={}", g.rays()[k].label, fmt_rat(&n.r), fmt_rat(&n.s)),
        }
    }

    pub fn to_quad(&self, witness: &crate::arith::QuadElem) -> QMValuation<crate::arith::QuadElem> {
        QMValuation { site: self.site, r: witness.lift(&self.r), s: witness.lift(&self.s) }
    }
}

/// `Z(nu) = r * dual(E) + s * dual(F)` as a coefficient vector over the primes.
pub fn divisor_of<S: Scalar>(nu: &QMValuation<S>, g: &DualGraph) -> Vec<S> {
    let zero = nu.r.lift(&Rat::zero());
    let mut z = vec![zero; g.len()];
    for (i, w) in nu.ends(g) {
        for (k, zk) in z.iter_mut().enumerate() {
            *zk = zk.plus(&w.times(&w.lift(&g.dual_basis()[k][i])));
        }
    }
    z
}

/// The b-divisor product `Z(nu1).Z(nu2)`, including the correction for two points on one edge or ray.
pub fn b_intersection<S: Scalar>(nu1: &QMValuation<S>, nu2: &QMValuation<S>, g: &DualGraph) -> S {
    let inv = g.dual_basis();
    let mut acc = nu1.r.lift(&Rat::zero());
    for (a, wa) in nu1.ends(g) {
        for (b, wb) in nu2.ends(g) {
            acc = acc.plus(&wa.times(&wb).times(&wa.lift(&inv[a][b])));
        }
    }
    let same = nu1.site == nu2.site && !matches!(nu1.site, Site::Vertex(_));
    if same {
        let c = nu1.r.times(&nu2.s).min_of(&nu2.r.times(&nu1.s));
        acc = acc.minus(&c);
    }
    acc
}

pub fn skewness<S: Scalar>(nu: &QMValuation<S>, g: &DualGraph) -> S {
    let n = nu.normalized(g);
    let zero = n.r.lift(&Rat::zero());
    zero.minus(&b_intersection(&n, &n, g))
}

/// `beta(nu|mu) = alpha(nu) / (-Z(nu).Z(mu))`.
pub fn rel_skewness<S: Scalar>(nu: &QMValuation<S>, mu: &QMValuation<S>, g: &DualGraph) -> S {
    let (n, m) = (nu.normalized(g), mu.normalized(g));
    let zero = n.r.lift(&Rat::zero());
    skewness(&n, g).over(&zero.minus(&b_intersection(&n, &m, g)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Angular<S = Rat> {
    /// `exp(rho)`, exact.
    pub exact_exp: S,
    pub log_value: f64,
}

pub fn angular_distance<S: Scalar>(nu: &QMValuation<S>, mu: &QMValuation<S>, g: &DualGraph) -> Angular<S> {
    let e = rel_skewness(nu, mu, g).times(&rel_skewness(mu, nu, g));
    let log_value = e.approx().ln();
    Angular { exact_exp: e, log_value }
}

/// `mu <= nu` in the valuative order.
pub fn leq<S: Scalar>(mu: &QMValuation<S>, nu: &QMValuation<S>, g: &DualGraph) -> bool {
    let one = mu.r.lift(&Rat::one());
    rel_skewness(mu, nu, g).minus(&one).is_zero_value()
}

/// `A(nu) = r A(E) + s A(F)`, homogeneous in the weights.
pub fn log_discrepancy<S: Scalar>(nu: &QMValuation<S>, g: &DualGraph) -> S {
    let a = &g.canonical_coeffs().a_div;
    let mut acc = nu.r.lift(&Rat::zero());
    for (i, w) in nu.ends(g) {
        acc = acc.plus(&w.times(&w.lift(&a[i])));
    }
    if let Site::Ray(_) = nu.site {
        acc = acc.plus(&nu.s);
    }
    acc
}

/// Distances from a normalized point to the primes bounding its site.
fn anchors(nu: &QMValuation<Rat>, g: &DualGraph) -> Vec<(usize, Rat)> {
    match nu.site {
        Site::Vertex(i) => vec![(i, Rat::zero())],
        Site::Edge(e) => {
            let (a, b) = g.edges()[e];
            vec![(a, &nu.s / g.b_rat(a)), (b, &nu.r / g.b_rat(b))]
        }
        Site::Ray(k) => {
            let from = g.rays()[k].from;
            vec![(from, &nu.s / g.b_rat(from))]
        }
    }
}

/// All-pairs shortest path lengths between primes; an edge has length `1/(b_E b_F)`.
pub fn vertex_distances(g: &DualGraph) -> Vec<Vec<Option<Rat>>> {
    let n = g.len();
    let mut d: Vec<Vec<Option<Rat>>> = vec![vec![None; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = Some(Rat::zero());
    }
    for &(a, b) in g.edges() {
        let len = Rat::one() / (g.b_rat(a) * g.b_rat(b));
        if d[a][b].as_ref().map_or(true, |x| &len < x) {
            d[a][b] = Some(len.clone());
            d[b][a] = Some(len);
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if let (Some(x), Some(y)) = (&d[i][k], &d[k][j]) {
                    let via = x + y;
                    if d[i][j].as_ref().map_or(true, |cur| &via < cur) {
                        d[i][j] = Some(via);
                    }
                }
            }
        }
    }
    d
}

/// Shortest-path distance along the skeleton (edges and rays).
pub fn edge_metric(nu: &QMValuation<Rat>, mu: &QMValuation<Rat>, g: &DualGraph) -> Rat {
    let (n, m) = (nu.normalized(g), mu.normalized(g));
    let d = vertex_distances(g);
    let mut best: Option<Rat> = None;
    let mut offer = |x: Rat| {
        if best.as_ref().map_or(true, |b| &x < b) {
            best = Some(x);
        }
    };
    if n.site == m.site {
        match n.site {
            Site::Vertex(_) => offer(Rat::zero()),
            Site::Edge(e) => {
                let a = g.edges()[e].0;
                offer(((&n.s - &m.s) / g.b_rat(a)).abs());
            }
            Site::Ray(k) => offer(((&n.s - &m.s) / g.b_rat(g.rays()[k].from)).abs()),
        }
    }
    for (a, da) in anchors(&n, g) {
        for (b, db) in anchors(&m, g) {
            if let Some(dab) = &d[a][b] {
                offer(&da + dab + &db);
            }
        }
    }
    best.unwrap_or_else(Rat::zero)
}

/// True iff `|alpha(F) - alpha(E)|` equals the edge length `1/(b_E b_F)`.
pub fn monotone_edge_test(edge: usize, g: &DualGraph) -> bool {
    let (a, b) = g.edges()[edge];
    let diff = skewness(&QMValuation::vertex(g, b), g) - skewness(&QMValuation::vertex(g, a), g);
    diff.abs() == Rat::one() / (g.b_rat(a) * g.b_rat(b))
}

pub fn log_value(exact_exp: &Rat) -> f64 {
    rat_to_f64(exact_exp).ln()
}

/// The normalized point of an edge or ray at slope `s/r = sigma` (`None` means the far end).
pub fn point_at_slope(g: &DualGraph, h: Handle, sigma: Option<&Rat>) -> Result<QMValuation<Rat>> {
    let (r, s) = match sigma {
        Some(x) => (Rat::one(), x.clone()),
        None => (Rat::zero(), Rat::one()),
    };
    Ok(QMValuation::on_handle(h, r, s)?.normalized(g))
}
