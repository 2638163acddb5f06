//! Cusp singularities from periodic modified continued fractions, and the finite germs `f_α`
//! given by multiplication by a totally positive `α` on the lattice `N_ω = Z + Zω`.

use log::debug;
use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::arith::{fmt_rat, int, rat_sqrt, squarefree_part, QuadElem, Rat};
use crate::dynamics::{CuspProvenance, Mat2, SectorSpec, SkeletonMap};
use crate::error::{Error, Result};
use crate::resolution::{DualGraph, Handle, Prime};

/// Search bound shared by unit power searches and the irrational example search.
pub const SEARCH_BOUND: u32 = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub struct CuspData {
    cycle: Vec<i64>,
    s: u32,
    omega: QuadElem,
    eps_omega: QuadElem,
}

impl CuspData {
    pub fn new(cycle: Vec<i64>, s: u32) -> Result<Self> {
        if cycle.is_empty() || cycle.iter().any(|&k| k < 2) || cycle.iter().all(|&k| k == 2) {
            return Err(Error::InvalidCycle(format!("{cycle:?}: weights must be >= 2 and not all 2")));
        }
        if s == 0 {
            return Err(Error::InvalidCycle("unit exponent s must be >= 1".into()));
        }
        // e_{n+1} = k_n e_n - e_{n-1} is shift-periodic only when e_1/e_0 expands the cycle read backwards
        let backwards: Vec<i64> = std::iter::once(cycle[0]).chain(cycle[1..].iter().rev().copied()).collect();
        let omega = cf_to_quadratic(&backwards)?;
        let mut c = CuspData { cycle, s, omega: omega.clone(), eps_omega: omega };
        c.eps_omega = c.vertex_sequence(c.cycle.len() as i64);
        debug_assert!(c.eps_omega.is_unit() && c.eps_omega.is_totally_positive());
        Ok(c)
    }

    pub fn cycle(&self) -> &[i64] {
        &self.cycle
    }

    pub fn s(&self) -> u32 {
        self.s
    }

    pub fn r(&self) -> usize {
        self.cycle.len()
    }

    pub fn omega(&self) -> &QuadElem {
        &self.omega
    }

    pub fn d(&self) -> &BigInt {
        self.omega.d()
    }

    pub fn fundamental_unit(&self) -> &QuadElem {
        &self.eps_omega
    }

    /// `ε = ε_ω^s`.
    pub fn epsilon(&self) -> QuadElem {
        self.eps_omega.pow(self.s)
    }

    fn k(&self, n: i64) -> Rat {
        int(self.cycle[n.rem_euclid(self.cycle.len() as i64) as usize])
    }

    /// `e_0 = 1`, `e_1 = ω`, `e_{n+1} = k_n e_n - e_{n-1}`, extended backwards by the same rule.
    pub fn vertex_sequence(&self, n: i64) -> QuadElem {
        let one = self.omega.lift_rat(Rat::one());
        let (mut prev, mut cur) = (one, self.omega.clone());
        if n >= 1 {
            for i in 1..n {
                let next = &cur.scale(&self.k(i)) - &prev;
                prev = cur;
                cur = next;
            }
            cur
        } else {
            // walk down: (e_i, e_{i+1}) -> (e_{i-1}, e_i)
            let (mut lo, mut hi) = (prev, cur);
            for i in (n..0).rev() {
                let below = &lo.scale(&self.k(i + 1)) - &hi;
                hi = lo;
                lo = below;
            }
            lo
        }
    }

    /// Coordinates of `z` in the basis `{1, ω}`.
    pub fn lattice_coords(&self, z: &QuadElem) -> Result<(Rat, Rat)> {
        let z = self.same_field(z)?;
        let v = z.b() / self.omega.b();
        let u = z.a() - &v * self.omega.a();
        Ok((u, v))
    }

    pub fn in_lattice(&self, z: &QuadElem) -> Result<bool> {
        let (u, v) = self.lattice_coords(z)?;
        Ok(u.is_integer() && v.is_integer())
    }

    /// Coordinates of `z` in the basis `{e_n, e_{n+1}}`.
    pub fn face_coords(&self, z: &QuadElem, n: i64) -> Result<(Rat, Rat)> {
        let z = self.same_field(z)?;
        let (p, q) = (self.vertex_sequence(n), self.vertex_sequence(n + 1));
        let det = p.a() * q.b() - q.a() * p.b();
        let x = (z.a() * q.b() - q.a() * z.b()) / &det;
        let y = (p.a() * z.b() - z.a() * p.b()) / &det;
        Ok((x, y))
    }

    /// Index `n` of a face `(e_n, e_{n+1})` containing the totally positive `z`.
    /// With `upper`, a point on the ray `e_n` is assigned to face `n - 1`.
    fn locate(&self, z: &QuadElem, upper: bool) -> Result<(i64, Rat, Rat)> {
        let mut n = 0i64;
        for _ in 0..SEARCH_BOUND {
            let (x, y) = self.face_coords(z, n)?;
            if y.is_negative() || (upper && y.is_zero()) {
                n -= 1;
            } else if x.is_negative() || (!upper && x.is_zero()) {
                n += 1;
            } else {
                return Ok((n, x, y));
            }
        }
        Err(Error::SearchBoundExceeded(format!("face of {z} not found within {SEARCH_BOUND} steps")))
    }

    fn same_field(&self, z: &QuadElem) -> Result<QuadElem> {
        if z.d() == self.d() {
            Ok(z.clone())
        } else if z.is_rational() {
            Ok(self.omega.lift_rat(z.a().clone()))
        } else {
            Err(Error::FieldMismatch { left: z.d().to_string(), right: self.d().to_string() })
        }
    }
}

fn mobius_k(k: i64) -> [[BigInt; 2]; 2] {
    [[BigInt::from(k), BigInt::from(-1)], [BigInt::one(), BigInt::zero()]]
}

fn mat_mul(a: &[[BigInt; 2]; 2], b: &[[BigInt; 2]; 2]) -> [[BigInt; 2]; 2] {
    let e = |i: usize, j: usize| &a[i][0] * &b[0][j] + &a[i][1] * &b[1][j];
    [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]]
}

/// The purely periodic `ω = k_0 - 1/(k_1 - 1/(... - 1/ω))` with `ω > 1 > ω' > 0`.
pub fn cf_to_quadratic(cycle: &[i64]) -> Result<QuadElem> {
    if cycle.is_empty() || cycle.iter().any(|&k| k < 2) || cycle.iter().all(|&k| k == 2) {
        return Err(Error::InvalidCycle(format!("{cycle:?}: weights must be >= 2 and not all 2")));
    }
    let mut p = mobius_k(cycle[0]);
    for &k in &cycle[1..] {
        p = mat_mul(&p, &mobius_k(k));
    }
    // ω = (a ω + b)/(c ω + d)  <=>  c ω² + (d - a) ω - b = 0
    let [[a, b], [c, d]] = p;
    let disc: BigInt = (&d - &a) * (&d - &a) + BigInt::from(4) * &b * &c;
    if rat_sqrt(&Rat::from_integer(disc.clone())).is_some() {
        return Err(Error::InvalidCycle(format!("{cycle:?}: fixed point is rational")));
    }
    let (f, sq) = squarefree_part(&disc);
    let two_c = Rat::from_integer(BigInt::from(2) * &c);
    let base = Rat::from_integer(&a - &d) / &two_c;
    let w = Rat::from_integer(f) / &two_c;
    for sign in [1, -1] {
        let cand = QuadElem::new(base.clone(), &w * int(sign), sq.clone())?;
        let one = cand.lift_rat(Rat::one());
        let zero = cand.lift_rat(Rat::zero());
        let conj = cand.conj();
        if (&cand - &one).sign() > 0 && (&one - &conj).sign() > 0 && (&conj - &zero).sign() > 0 {
            return Ok(cand);
        }
    }
    Err(Error::InvalidCycle(format!("{cycle:?}: no root with w > 1 > w' > 0")))
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlphaCheck {
    pub ok: bool,
    pub degree: Rat,
    pub reason: Option<String>,
}

/// `α` defines a finite germ iff it is totally positive with `α N_ω ⊆ N_ω`; its degree is `Q(α)`.
pub fn validate_alpha(alpha: &QuadElem, cusp: &CuspData) -> Result<AlphaCheck> {
    let alpha = cusp.same_field(alpha)?;
    let degree = alpha.field_norm();
    let fail = |why: &str| Ok(AlphaCheck { ok: false, degree: degree.clone(), reason: Some(why.to_string()) });
    if !alpha.is_totally_positive() {
        return fail("not totally positive");
    }
    if !cusp.in_lattice(&alpha)? || !cusp.in_lattice(&(&alpha * cusp.omega()))? {
        return fail("does not preserve the lattice Z + Z*omega");
    }
    if !degree.is_integer() || !degree.is_positive() {
        return fail("norm is not a positive integer");
    }
    Ok(AlphaCheck { ok: true, degree, reason: None })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RotationNumber {
    pub beta: f64,
    /// Exact value when rational (not reduced mod 1).
    pub rational: Option<Rat>,
}

/// `β = (log α - log α')/(2 log ε)`; rational exactly when `α/α'` is a unit.
pub fn rotation_number(alpha: &QuadElem, cusp: &CuspData) -> Result<RotationNumber> {
    let check = validate_alpha(alpha, cusp)?;
    if !check.ok {
        return Err(Error::InvalidAlpha(format!("{alpha}: {}", check.reason.unwrap_or_default())));
    }
    let alpha = cusp.same_field(alpha)?;
    let eps = cusp.fundamental_unit();
    let log_eps = eps.to_f64().ln() * f64::from(cusp.s());
    let a = alpha.to_f64();
    let beta = (2.0 * a.ln() - rat_to_f64_big(&check.degree).ln()) / (2.0 * log_eps);
    let u = alpha.checked_div(&alpha.conj())?;
    if !u.is_integral() {
        return Ok(RotationNumber { beta, rational: None });
    }
    // u is a totally positive unit: find u^q = ε_ω^j
    let log_u = u.to_f64().ln();
    let log_e = eps.to_f64().ln();
    for q in 1..=SEARCH_BOUND.min(64) {
        let target = u.pow(q);
        let j = (f64::from(q) * log_u / log_e).round() as i64;
        let power = if j >= 0 { eps.pow(j as u32) } else { eps.inv()?.pow((-j) as u32) };
        if power == target {
            let exact = Rat::new(BigInt::from(j), BigInt::from(2 * i64::from(q) * i64::from(cusp.s())));
            return Ok(RotationNumber { beta, rational: Some(exact) });
        }
    }
    Err(Error::SearchBoundExceeded(format!("unit {u} is not a power of the fundamental unit within 64 steps")))
}

fn rat_to_f64_big(q: &Rat) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// Smallest `p > a` with `p + b√d` valid and of irrational rotation, where `ε = a + b√d`.
pub fn irrational_example(cusp: &CuspData) -> Result<QuadElem> {
    let eps = cusp.epsilon();
    let a = eps.a().to_integer();
    for step in 1..=SEARCH_BOUND {
        let p = &a + BigInt::from(step);
        let alpha = QuadElem::new(Rat::from_integer(p), eps.b().clone(), cusp.d().clone())?;
        if !validate_alpha(&alpha, cusp)?.ok {
            continue;
        }
        if rotation_number(&alpha, cusp)?.rational.is_none() {
            return Ok(alpha);
        }
    }
    Err(Error::SearchBoundExceeded(format!("no irrational example within {SEARCH_BOUND} candidates")))
}

/// Cycle of `rs` rational primes `E0..` with self-intersections `-k_i` and `b = 1`.
pub fn cusp_dual_graph(cusp: &CuspData) -> Result<DualGraph> {
    let n = cusp.r() * cusp.s() as usize;
    if n < 2 {
        return Err(Error::InvalidCycle(format!(
            "cycle {:?} with s = {} has a single component; refine with s >= 2 so that r*s >= 2",
            cusp.cycle(),
            cusp.s()
        )));
    }
    let primes = (0..n).map(|i| Prime::rational(&format!("E{i}"), -cusp.cycle[i % cusp.r()])).collect();
    let edges: Vec<(String, String)> = (0..n).map(|i| (format!("E{i}"), format!("E{}", (i + 1) % n))).collect();
    DualGraph::build(primes, &edges, &[])
}

fn to_i64(x: &Rat) -> Result<i64> {
    if !x.is_integer() {
        return Err(Error::InvalidAlpha(format!("non-integral coordinate {}", fmt_rat(x))));
    }
    x.to_integer().to_i64().ok_or_else(|| Error::InvalidAlpha("coordinate overflows i64".into()))
}

/// Sector description of `f_α` on the cycle: face `n` is the edge `(E_n, E_{n+1})`, with weights
/// `(x, y)` standing for `x e_n + y e_{n+1}`.
pub fn induced_sectors(alpha: &QuadElem, cusp: &CuspData, g: &DualGraph) -> Result<Vec<SectorSpec>> {
    let check = validate_alpha(alpha, cusp)?;
    if !check.ok {
        return Err(Error::InvalidAlpha(format!("{alpha}: {}", check.reason.unwrap_or_default())));
    }
    let alpha = cusp.same_field(alpha)?;
    let n_faces = g.edges().len() as i64;
    let face = |m: i64| g.handle_text(Handle::Edge { index: m.rem_euclid(n_faces) as usize, reversed: false });
    let mut out = Vec::new();
    for n in 0..n_faces {
        let (g0, g1) = (cusp.vertex_sequence(n), cusp.vertex_sequence(n + 1));
        let (im0, im1) = (&alpha * &g0, &alpha * &g1);
        let (m0, _, _) = cusp.locate(&im0, false)?;
        let (m1, _, _) = cusp.locate(&im1, true)?;
        let inv = alpha.inv()?;
        let mut lo = Rat::zero();
        for m in m0..=m1 {
            let hi = if m == m1 {
                None
            } else {
                let (x, y) = cusp.face_coords(&(&cusp.vertex_sequence(m + 1) * &inv), n)?;
                Some(y / x)
            };
            let (a, c) = cusp.face_coords(&im0, m)?;
            let (b, d) = cusp.face_coords(&im1, m)?;
            let matrix: Mat2 = [[to_i64(&a)?, to_i64(&b)?], [to_i64(&c)?, to_i64(&d)?]];
            out.push(SectorSpec { src: face(n), lo: lo.clone(), hi: hi.clone(), matrix, dst: face(m) });
            if let Some(h) = hi {
                lo = h;
            }
        }
    }
    debug!("induced {} sectors for alpha = {alpha}", out.len());
    Ok(out)
}

pub fn induced_skeleton_map(alpha: &QuadElem, cusp: &CuspData) -> Result<SkeletonMap> {
    let g = cusp_dual_graph(cusp)?;
    let specs = induced_sectors(alpha, cusp, &g)?;
    let prov = CuspProvenance { cycle: cusp.cycle().to_vec(), s: cusp.s(), alpha: cusp.same_field(alpha)? };
    SkeletonMap::new(g, &specs, &[], false, Some(prov))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;

    fn q(s: &str) -> QuadElem {
        QuadElem::parse(s).unwrap()
    }

    fn c42() -> CuspData {
        CuspData::new(vec![4, 2], 1).unwrap()
    }

    #[test]
    fn omega_and_units() {
        assert_eq!(cf_to_quadratic(&[4, 2]).unwrap(), q("2+1*sqrt(2)"));
        assert_eq!(cf_to_quadratic(&[3]).unwrap(), QuadElem::new(rat(3, 2), rat(1, 2), 5).unwrap());
        assert!(cf_to_quadratic(&[2, 2]).is_err());
        assert!(cf_to_quadratic(&[1, 4]).is_err());
        let c = c42();
        assert_eq!(c.vertex_sequence(2), q("3+2*sqrt(2)"));
        assert_eq!(c.vertex_sequence(-1), q("2-1*sqrt(2)"));
        assert_eq!(c.vertex_sequence(1), q("2+1*sqrt(2)"));
        assert_eq!(c.fundamental_unit(), &q("3+2*sqrt(2)"));
        let c3 = CuspData::new(vec![3], 1).unwrap();
        assert_eq!(c3.fundamental_unit(), c3.omega());
        assert_eq!(c3.fundamental_unit().field_norm(), int(1));
        let c223 = CuspData::new(vec![2, 2, 3], 1).unwrap();
        assert_eq!(c223.omega(), &cf_to_quadratic(&[2, 3, 2]).unwrap());
        let eps = c223.fundamental_unit();
        assert!(eps.is_unit() && eps.is_totally_positive());
        assert_eq!(c223.vertex_sequence(4), &c223.vertex_sequence(1) * eps);
    }

    #[test]
    fn alpha_validation() {
        let c = c42();
        let v = validate_alpha(&q("3+1*sqrt(2)"), &c).unwrap();
        assert!(v.ok);
        assert_eq!(v.degree, int(7));
        assert_eq!(c.lattice_coords(&(&q("3+1*sqrt(2)") * c.omega())).unwrap(), (int(-2), int(5)));
        assert!(validate_alpha(c.fundamental_unit(), &c).unwrap().ok);
        assert!(!validate_alpha(&q("0+1*sqrt(2)"), &c).unwrap().ok);
    }

    #[test]
    fn rotation_numbers() {
        let c = c42();
        let r = rotation_number(&q("3+1*sqrt(2)"), &c).unwrap();
        assert!(r.rational.is_none());
        let expected = ((11.0 + 6.0 * 2f64.sqrt()) / 7.0).ln() / (2.0 * (3.0 + 2.0 * 2f64.sqrt()).ln());
        assert!((r.beta - expected).abs() < 1e-14);
        assert_eq!(rotation_number(c.fundamental_unit(), &c).unwrap().rational, Some(int(1)));
        assert_eq!(rotation_number(&q("2+0*sqrt(2)"), &c).unwrap().rational, Some(int(0)));
    }

    #[test]
    fn irrational_search() {
        let c = c42();
        let a = irrational_example(&c).unwrap();
        assert_eq!(a, q("5+2*sqrt(2)"));
        assert_eq!(validate_alpha(&a, &c).unwrap().degree, int(17));
        // p = 4 is valid but rational
        assert!(rotation_number(&q("4+2*sqrt(2)"), &c).unwrap().rational.is_some());
    }

    #[test]
    fn dual_graphs() {
        let g = cusp_dual_graph(&c42()).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.edges().len(), 2);
        assert_eq!(g.intersection_matrix(), &vec![vec![-4, 2], vec![2, -2]]);
        assert!(cusp_dual_graph(&CuspData::new(vec![3], 1).unwrap()).is_err());
        let g4 = cusp_dual_graph(&CuspData::new(vec![4, 2], 2).unwrap()).unwrap();
        let selfs: Vec<i64> = g4.primes().iter().map(|p| p.self_int).collect();
        assert_eq!(selfs, vec![-4, -2, -4, -2]);
    }

    #[test]
    fn induced_map_42() {
        let c = c42();
        let alpha = q("3+1*sqrt(2)");
        assert_eq!(c.face_coords(&(&alpha * &c.vertex_sequence(0)), 0).unwrap(), (int(1), int(1)));
        assert_eq!(c.face_coords(&(&alpha * &c.vertex_sequence(1)), 1).unwrap(), (int(1), int(2)));
        let f = induced_skeleton_map(&alpha, &c).unwrap();
        let face0: Vec<_> = f.sectors().iter().filter(|s| s.src == Handle::Edge { index: 0, reversed: false }).collect();
        assert_eq!(face0.len(), 2);
        assert_eq!(face0[0].matrix, [[1, -2], [1, 5]]);
        assert_eq!(face0[0].hi, Some(rat(1, 2)));
        assert_eq!(face0[1].matrix, [[3, 1], [-1, 2]]);
        assert!(f.sectors().iter().all(|s| s.det() == 7));
    }
}
