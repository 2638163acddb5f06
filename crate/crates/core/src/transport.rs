//! Push-forward and pull-back of dual divisors under a germ given by a resolution table.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};

use crate::arith::{int, Rat};
use crate::error::{Error, Result};
use crate::resolution::{bilinear, to_rat_matrix, DualGraph, Handle};
use crate::valuation::{log_discrepancy, QMValuation, Site};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrimeMap {
    pub src: usize,
    pub dst: usize,
    pub k: u64,
    pub e: u64,
}

/// A curve of the source model contracted by the germ onto a point of the target prime `dst`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContractedCurve {
    pub label: String,
    /// `(source prime, C.E_i)`; intersection numbers are >= 0 and not all zero.
    pub attach: Vec<(usize, u64)>,
    pub m: u64,
    pub dst: usize,
    pub k: u64,
}

/// Rational divisor: an exceptional part plus multiples of contracted curves.
#[derive(Clone, Debug, PartialEq)]
pub struct Divisor {
    pub exceptional: Vec<Rat>,
    /// `(index into the table's contracted curves, coefficient)`.
    pub curves: Vec<(usize, Rat)>,
}

impl Divisor {
    pub fn exceptional(v: Vec<Rat>) -> Self {
        Divisor { exceptional: v, curves: Vec::new() }
    }
}

/// Linear functional `nu -> nu(R_f)`, given per handle as `(lambda, mu)` with value `lambda r + mu s`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RfFunctional {
    handles: BTreeMap<Handle, (Rat, Rat)>,
    vertices: BTreeMap<usize, Rat>,
    default: Option<(Rat, Rat)>,
}

impl RfFunctional {
    pub fn zero() -> Self {
        RfFunctional { default: Some((Rat::zero(), Rat::zero())), ..Default::default() }
    }

    /// Keys are handle texts (in any orientation) or `vertex:E`; vertex entries take one value.
    pub fn from_entries(g: &DualGraph, entries: &[(String, Vec<Rat>)], default: Option<(Rat, Rat)>) -> Result<Self> {
        let mut rf = RfFunctional { default, ..Default::default() };
        for (key, vals) in entries {
            if let Some(id) = key.strip_prefix("vertex:") {
                let [v] = vals.as_slice() else {
                    return Err(Error::InvalidTable(format!("R_f entry '{key}' needs one value")));
                };
                rf.vertices.insert(g.idx(id)?, v.clone());
                continue;
            }
            let h = g.resolve_handle(key)?;
            let [l, m] = vals.as_slice() else {
                return Err(Error::InvalidTable(format!("R_f entry '{key}' needs [lambda, mu]")));
            };
            let pair = if h.is_reversed() { (m.clone(), l.clone()) } else { (l.clone(), m.clone()) };
            rf.handles.insert(h.canonical(), pair);
        }
        Ok(rf)
    }

    fn coeffs(&self, h: Handle) -> Option<(Rat, Rat)> {
        self.handles.get(&h).cloned().or_else(|| self.default.clone())
    }

    /// Value of `R_f` on the divisorial valuation of prime `i` scaled to `r = 1`; incident data must agree.
    pub fn vertex_value(&self, g: &DualGraph, i: usize) -> Result<Rat> {
        if let Some(v) = self.vertices.get(&i) {
            return Ok(v.clone());
        }
        let mut found: Option<Rat> = None;
        for h in g.all_handles() {
            let (a, b) = g.handle_ends(h);
            let Some((l, m)) = self.coeffs(h) else { continue };
            let cand = if a == i {
                l
            } else if b == Some(i) {
                m
            } else {
                continue;
            };
            match &found {
                Some(x) if *x != cand => {
                    return Err(Error::InvalidTable(format!("R_f data disagree at prime '{}'", g.id(i))));
                }
                _ => found = Some(cand),
            }
        }
        found.ok_or_else(|| Error::MissingRf(format!("no R_f data at prime '{}'", g.id(i))))
    }

    pub fn evaluate(&self, g: &DualGraph, nu: &QMValuation<Rat>) -> Result<Rat> {
        match nu.site {
            Site::Vertex(i) => Ok(&nu.r * self.vertex_value(g, i)?),
            Site::Edge(_) | Site::Ray(_) => {
                let h = nu.handle().expect("edge or ray site");
                let (l, m) = self.coeffs(h).ok_or_else(|| Error::MissingRf(g.handle_text(h)))?;
                Ok(l * &nu.r + m * &nu.s)
            }
        }
    }
}

/// Checks `c * A(f nu) = A(nu) + nu(R_f)` exactly.
pub fn jacobian_check(
    nu: &QMValuation<Rat>,
    src: &DualGraph,
    image: &QMValuation<Rat>,
    image_graph: &DualGraph,
    c: &Rat,
    rf: Option<&RfFunctional>,
) -> Result<bool> {
    let rf = rf.ok_or_else(|| Error::MissingRf("no R_f functional supplied".into()))?;
    let lhs = c * log_discrepancy(image, image_graph);
    let rhs = log_discrepancy(nu, src) + rf.evaluate(src, nu)?;
    Ok(lhs == rhs)
}

#[derive(Clone, Debug)]
pub struct GermResolutionTable {
    pub source: DualGraph,
    pub target: DualGraph,
    /// Indexed by source prime.
    pub prime_maps: Vec<PrimeMap>,
    pub contracted: Vec<ContractedCurve>,
    pub r_f: Option<RfFunctional>,
}

impl GermResolutionTable {
    pub fn new(
        source: DualGraph,
        target: DualGraph,
        prime_maps: Vec<PrimeMap>,
        contracted: Vec<ContractedCurve>,
        r_f: Option<RfFunctional>,
    ) -> Result<Self> {
        let mut by_src: Vec<Option<PrimeMap>> = vec![None; source.len()];
        for pm in prime_maps {
            if pm.src >= source.len() || pm.dst >= target.len() {
                return Err(Error::InvalidTable("prime map refers to a missing prime".into()));
            }
            if pm.k == 0 || pm.e == 0 {
                return Err(Error::InvalidTable(format!("k and e must be >= 1 for '{}'", source.id(pm.src))));
            }
            let slot = &mut by_src[pm.src];
            if slot.is_some() {
                return Err(Error::InvalidTable(format!("prime '{}' mapped twice", source.id(pm.src))));
            }
            *slot = Some(pm);
        }
        let mut maps = Vec::with_capacity(source.len());
        for (i, slot) in by_src.into_iter().enumerate() {
            maps.push(slot.ok_or_else(|| Error::InvalidTable(format!("prime '{}' has no image", source.id(i))))?);
        }
        for c in &contracted {
            if c.attach.iter().all(|&(_, n)| n == 0) {
                return Err(Error::InvalidTable(format!("curve '{}' has a zero attachment vector", c.label)));
            }
            if c.attach.iter().any(|&(i, _)| i >= source.len()) || c.dst >= target.len() {
                return Err(Error::InvalidTable(format!("curve '{}' refers to a missing prime", c.label)));
            }
            if c.k == 0 || c.m == 0 {
                return Err(Error::InvalidTable(format!("curve '{}' needs k, m >= 1", c.label)));
            }
        }
        Ok(GermResolutionTable { source, target, prime_maps: maps, contracted, r_f })
    }

    pub fn curve_index(&self, label: &str) -> Result<usize> {
        self.contracted
            .iter()
            .position(|c| c.label == label)
            .ok_or_else(|| Error::InvalidTable(format!("unknown contracted curve '{label}'")))
    }

    fn attach_vec(&self, c: usize) -> Vec<Rat> {
        let mut v = vec![Rat::zero(); self.source.len()];
        for &(i, n) in &self.contracted[c].attach {
            v[i] += int(n as i64);
        }
        v
    }

    /// `C.D` for an exceptional divisor `D` of the source.
    pub fn curve_dot(&self, c: usize, d: &[Rat]) -> Rat {
        self.attach_vec(c).iter().zip(d).fold(Rat::zero(), |acc, (a, x)| acc + a * x)
    }

    /// `C_hat = -C + sum_i (C.E_i) dual(E_i)`, orthogonal to every source prime.
    pub fn curve_hat_divisor(&self, c: usize) -> Divisor {
        let a = self.attach_vec(c);
        let exc = crate::resolution::mat_vec(self.source.dual_basis(), &a);
        let d = Divisor { exceptional: exc, curves: vec![(c, -Rat::one())] };
        debug_assert!((0..self.source.len()).all(|j| self.dot_prime(&d, j).is_zero()));
        d
    }

    /// `D.E_j` on the source.
    pub fn dot_prime(&self, d: &Divisor, j: usize) -> Rat {
        let m = self.source.intersection_matrix();
        let mut acc: Rat = (0..self.source.len()).fold(Rat::zero(), |acc, k| acc + &d.exceptional[k] * int(m[j][k]));
        for (c, coef) in &d.curves {
            acc += coef * self.attach_vec(*c)[j].clone();
        }
        acc
    }

    /// `D.X` on the source, where `X` is exceptional.
    pub fn dot_exceptional(&self, d: &Divisor, x: &[Rat]) -> Rat {
        let m = to_rat_matrix(self.source.intersection_matrix());
        let mut acc = bilinear(&m, &d.exceptional, x);
        for (c, coef) in &d.curves {
            acc += coef * self.curve_dot(*c, x);
        }
        acc
    }

    /// `f_* dual(E) = k dual(E') - sum_C (-C.dual(E)) k_C dual(G_C)` on the target.
    pub fn pushforward_dual(&self, e: usize) -> Vec<Rat> {
        let pm = &self.prime_maps[e];
        let mut out: Vec<Rat> = self.target.dual(pm.dst).iter().map(|x| x * int(pm.k as i64)).collect();
        let de = self.source.dual(e);
        for (c, curve) in self.contracted.iter().enumerate() {
            let coef = -self.curve_dot(c, &de) * int(curve.k as i64);
            for (o, g) in out.iter_mut().zip(self.target.dual(curve.dst)) {
                *o -= &coef * g;
            }
        }
        out
    }

    /// `f^* dual(E') = sum_{E_i -> E'} e_i dual(E_i) + sum_C (-dual(G_C).dual(E')) k_C C_hat`.
    pub fn pullback_dual(&self, e_prime: usize) -> Divisor {
        let n = self.source.len();
        let mut exc = vec![Rat::zero(); n];
        for pm in self.prime_maps.iter().filter(|pm| pm.dst == e_prime) {
            for (x, d) in exc.iter_mut().zip(self.source.dual(pm.src)) {
                *x += d * int(pm.e as i64);
            }
        }
        let mut curves = Vec::new();
        for (c, curve) in self.contracted.iter().enumerate() {
            let coef = -self.target.dual_basis()[curve.dst][e_prime].clone() * int(curve.k as i64);
            let hat = self.curve_hat_divisor(c);
            for (x, h) in exc.iter_mut().zip(&hat.exceptional) {
                *x += &coef * h;
            }
            curves.push((c, -coef));
        }
        Divisor { exceptional: exc, curves }
    }

    /// Correction coefficients `-C.dual(E)` for every curve and source prime; all positive on valid tables.
    pub fn push_corrections(&self) -> Vec<(usize, usize, Rat)> {
        let mut out = Vec::new();
        for c in 0..self.contracted.len() {
            for e in 0..self.source.len() {
                out.push((c, e, -self.curve_dot(c, &self.source.dual(e))));
            }
        }
        out
    }

    /// Correction coefficients `-dual(G_C).dual(E')` for every curve and target prime.
    pub fn pull_corrections(&self) -> Vec<(usize, usize, Rat)> {
        let mut out = Vec::new();
        for (c, curve) in self.contracted.iter().enumerate() {
            for e in 0..self.target.len() {
                out.push((c, e, -self.target.dual_basis()[curve.dst][e].clone()));
            }
        }
        out
    }

    /// `c(f, nu_E) = (b_E' / b_E) k_E`.
    pub fn attraction_rate_from_table(&self, e: usize) -> Rat {
        let pm = &self.prime_maps[e];
        self.target.b_rat(pm.dst) / self.source.b_rat(e) * int(pm.k as i64)
    }

    /// `(i, j, f_* dual(E_i) . dual(E'_j), dual(E_i) . f^* dual(E'_j))` for every prime pair.
    pub fn projection_pairs(&self) -> Vec<(usize, usize, Rat, Rat)> {
        let mut out = Vec::new();
        for i in 0..self.source.len() {
            let push = self.pushforward_dual(i);
            let di = self.source.dual(i);
            for j in 0..self.target.len() {
                // dual(E'_j) picks out the E'_j coefficient
                let lhs = push[j].clone();
                let rhs = self.dot_exceptional(&self.pullback_dual(j), &di);
                out.push((i, j, lhs, rhs));
            }
        }
        out
    }

    pub fn all_corrections_positive(&self) -> bool {
        self.push_corrections().iter().chain(self.pull_corrections().iter()).all(|(_, _, x)| x.is_positive())
    }
}
