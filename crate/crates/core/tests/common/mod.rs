#![allow(dead_code)]

use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::Rng;
use valdyn_core::arith::{int, Rat};
use valdyn_core::io::{load_fixture, Fixture};
use valdyn_core::resolution::{DualGraph, Prime};
use valdyn_core::transport::{GermResolutionTable, PrimeMap};
use valdyn_core::valuation::{QMValuation, Site};

pub fn fixture(name: &str) -> Fixture {
    let path = format!("{}/../../fixtures/{name}.toml", env!("CARGO_MANIFEST_DIR"));
    load_fixture(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

/// Random connected graph of rational primes with `b = 1`, nef and negative definite.
/// Self-intersections are `-(degree + 0..=2)`; draws that fail negative definiteness are retried.
pub fn random_graph(rng: &mut impl Rng, max_n: usize) -> DualGraph {
    loop {
        let n = rng.gen_range(1..=max_n);
        let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (rng.gen_range(0..i), i)).collect();
        let extra = if n >= 3 { rng.gen_range(0..=1) } else { 0 };
        for _ in 0..extra {
            let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
            if a != b && !edges.contains(&(a.min(b), a.max(b))) {
                edges.push((a.min(b), a.max(b)));
            }
        }
        let mut deg = vec![0i64; n];
        for &(a, b) in &edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        let primes = (0..n).map(|i| Prime::rational(&format!("P{i}"), -(deg[i] + rng.gen_range(0..=2)))).collect();
        let named: Vec<(String, String)> = edges.iter().map(|&(a, b)| (format!("P{a}"), format!("P{b}"))).collect();
        if let Ok(g) = DualGraph::build(primes, &named, &[]) {
            return g;
        }
    }
}

/// Primes reachable from `from` without passing through `removed`.
pub fn component_without(g: &DualGraph, removed: usize, from: usize) -> Vec<bool> {
    let mut seen = vec![false; g.len()];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(v) = stack.pop() {
        for &(a, b) in g.edges() {
            for (x, y) in [(a, b), (b, a)] {
                if x == v && y != removed && !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
    }
    seen
}

/// `Z1.Z2` with `Z = sum w_i dual(E_i)`, computed from the intersection matrix alone.
pub fn plain_product(nu1: &QMValuation<Rat>, nu2: &QMValuation<Rat>, g: &DualGraph) -> Rat {
    let n = g.len();
    let inv = g.dual_basis();
    let z = |nu: &QMValuation<Rat>| {
        let mut v = vec![Rat::zero(); n];
        for (i, w) in nu.ends(g) {
            for k in 0..n {
                v[k] += &w * &inv[k][i];
            }
        }
        v
    };
    let (z1, z2) = (z(nu1), z(nu2));
    let m = g.intersection_matrix();
    let mut acc = Rat::zero();
    for i in 0..n {
        for j in 0..n {
            acc += &z1[i] * int(m[i][j]) * &z2[j];
        }
    }
    acc
}

fn after_blowup(nu: &QMValuation<Rat>, e: usize, g2: &DualGraph) -> QMValuation<Rat> {
    let new_prime = g2.len() - 1;
    let new_edge = g2.edges().len() - 1;
    let (r, s) = (nu.r.clone(), nu.s.clone());
    if r > s {
        QMValuation { site: Site::Edge(e), r: &r - &s, s }
    } else if r < s {
        QMValuation { site: Site::Edge(new_edge), r: r.clone(), s: &s - &r }
    } else {
        QMValuation { site: Site::Vertex(new_prime), r, s: Rat::zero() }
    }
}

/// Blows up the common edge until the two points sit on different sites (or on one prime), then
/// returns the plain product there; `None` if `depth` blow-ups do not suffice.
pub fn blowup_oracle(nu1: &QMValuation<Rat>, nu2: &QMValuation<Rat>, g: &DualGraph, depth: usize) -> Option<Rat> {
    let (mut a, mut b, mut g) = (nu1.clone(), nu2.clone(), g.clone());
    for _ in 0..=depth {
        let Site::Edge(e) = a.site else { return Some(plain_product(&a, &b, &g)) };
        if a.site != b.site {
            return Some(plain_product(&a, &b, &g));
        }
        let g2 = g.blowup_satellite(e).expect("blow-ups keep the form negative definite");
        a = after_blowup(&a, e, &g2);
        b = after_blowup(&b, e, &g2);
        g = g2;
    }
    None
}

/// Random interior point of edge `e` with integer weights in `1..=6`.
pub fn random_edge_point(rng: &mut impl Rng, e: usize) -> QMValuation<Rat> {
    QMValuation { site: Site::Edge(e), r: int(rng.gen_range(1..=6)), s: int(rng.gen_range(1..=6)) }
}

/// A finite germ whose lift permutes the primes by a graph automorphism with uniform ramification:
/// either the identity on a random graph or the flip of a palindromic chain; `k = e = c`.
pub fn random_finite_table(rng: &mut impl Rng) -> GermResolutionTable {
    let c: u64 = rng.gen_range(1..=5);
    if rng.gen_bool(0.5) {
        let g = random_graph(rng, 6);
        let maps = (0..g.len()).map(|i| PrimeMap { src: i, dst: i, k: c, e: c }).collect();
        return GermResolutionTable::new(g.clone(), g, maps, vec![], None).unwrap();
    }
    let n: usize = rng.gen_range(2..=7);
    let half: Vec<i64> = (0..n.div_ceil(2)).map(|_| -rng.gen_range(2..=4)).collect();
    let selfs: Vec<i64> = (0..n).map(|i| half[i.min(n - 1 - i)]).collect();
    let primes = (0..n).map(|i| Prime::rational(&format!("P{i}"), selfs[i])).collect();
    let edges: Vec<(String, String)> = (1..n).map(|i| (format!("P{}", i - 1), format!("P{i}"))).collect();
    let g = DualGraph::build(primes, &edges, &[]).unwrap();
    let maps = (0..n).map(|i| PrimeMap { src: i, dst: n - 1 - i, k: c, e: c }).collect();
    GermResolutionTable::new(g.clone(), g, maps, vec![], None).unwrap()
}

/// A table with the same graphs but prime images shuffled and ramification drawn independently.
pub fn random_scrambled_table(rng: &mut impl Rng) -> GermResolutionTable {
    let g = random_graph(rng, 6);
    let mut dst: Vec<usize> = (0..g.len()).collect();
    dst.shuffle(rng);
    let maps = (0..g.len()).map(|i| PrimeMap { src: i, dst: dst[i], k: rng.gen_range(1..=5), e: rng.gen_range(1..=5) }).collect();
    GermResolutionTable::new(g.clone(), g, maps, vec![], None).unwrap()
}

