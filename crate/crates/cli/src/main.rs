use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{debug, info};
use serde_json::{json, Map, Value};

use valdyn_core::arith::{fmt_rat, QuadElem, Rat};
use valdyn_core::cusp::{induced_sectors, irrational_example, rotation_number, validate_alpha, CuspData};
use valdyn_core::dynamics::{detect_recursion, FixedKind, QuadraticInteger, SectorSpec, SkeletonMap};
use valdyn_core::io::{load_fixture, Fixture};
use valdyn_core::resolution::DualGraph;
use valdyn_core::transport::{jacobian_check, GermResolutionTable, RfFunctional};
use valdyn_core::valuation::{angular_distance, edge_metric, leq, log_discrepancy, rel_skewness, skewness, QMValuation, Site};
use valdyn_core::{Error, Result};

#[derive(Parser)]
#[command(name = "valdyn", version, about = "Exact valuation-space dynamics on surface singularities")]
struct Cli {
    #[command(subcommand)]
    group: Group,
}

#[derive(Subcommand)]
enum Group {
    /// Dual graph invariants
    Graph {
        cmd: GraphCmd,
        #[command(flatten)]
        args: Common,
    },
    /// Quasimonomial valuations
    Val {
        cmd: ValCmd,
        #[command(flatten)]
        args: Common,
    },
    /// Skeleton map dynamics
    Germ {
        cmd: GermCmd,
        #[command(flatten)]
        args: Common,
    },
    /// Divisor transport through a germ table
    Transport {
        cmd: TransportCmd,
        #[command(flatten)]
        args: Common,
    },
    /// Cusp arithmetic
    Cusp {
        cmd: CuspCmd,
        #[command(flatten)]
        args: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphCmd {
    Check,
    Dualbasis,
    Discrepancy,
    Skeleton,
    Classify,
}

#[derive(Clone, Copy, ValueEnum)]
enum ValCmd {
    Skewness,
    Beta,
    Rho,
    Leq,
    Metric,
}

#[derive(Clone, Copy, ValueEnum)]
enum GermCmd {
    Apply,
    Orbit,
    Rates,
    Recursion,
    Degree,
    Fixed,
    Nonexpansion,
    Stability,
}

#[derive(Clone, Copy, ValueEnum)]
enum TransportCmd {
    Push,
    Pull,
    Rate,
    Jacobian,
}

#[derive(Clone, Copy, ValueEnum)]
enum CuspCmd {
    Build,
    Unit,
    Validate,
    Rotation,
    Induce,
    Example,
}

#[derive(Args)]
struct Common {
    /// TOML fixture
    fixture: PathBuf,
    /// Valuation literal, e.g. "vertex:E0" or "edge:(E0,E1) r=1 s=2"
    #[arg(long)]
    nu: Option<String>,
    /// Second valuation literal
    #[arg(long)]
    mu: Option<String>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    m_max: Option<usize>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    pairs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Prime id
    #[arg(long)]
    prime: Option<String>,
    /// Quadratic integer such as "3+1*sqrt(2)"
    #[arg(long)]
    alpha: Option<String>,
    /// Also write the dual graph in DOT format to this file
    #[arg(long)]
    dot: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("VALDYN_LOG")).init();
    let cli = Cli::parse();
    match run(&cli.group) {
        Ok(v) => {
            println!("{}", serde_json::to_string(&v).expect("json"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            let code = if e.is_inconclusive() { 3 } else { 2 };
            let v = json!({"error": {"kind": e.kind(), "message": e.to_string()}});
            println!("{}", serde_json::to_string(&v).expect("json"));
            ExitCode::from(code)
        }
    }
}

fn common(g: &Group) -> &Common {
    match g {
        Group::Graph { args, .. } | Group::Val { args, .. } | Group::Germ { args, .. } | Group::Transport { args, .. } | Group::Cusp { args, .. } => args,
    }
}

fn run(group: &Group) -> Result<Value> {
    let args = common(group);
    let fx = load_fixture(&args.fixture)?;
    info!("loaded fixture '{}' with {} primes", fx.name, fx.graph.len());
    if let Some(path) = &args.dot {
        std::fs::write(path, fx.graph.to_dot()).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    }
    match group {
        Group::Graph { cmd, .. } => graph(*cmd, &fx, args),
        Group::Val { cmd, .. } => val(*cmd, &fx, args),
        Group::Germ { cmd, .. } => germ(*cmd, &fx, args),
        Group::Transport { cmd, .. } => transport(*cmd, &fx, args),
        Group::Cusp { cmd, .. } => cusp(*cmd, &fx, args),
    }
}

fn q(x: &Rat) -> Value {
    Value::String(fmt_rat(x))
}

/// Float rounded to 12 significant digits.
fn fl(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("float literal");
    json!(rounded)
}

fn big(x: &num_bigint::BigInt) -> Value {
    match i64::try_from(x) {
        Ok(v) => json!(v),
        Err(_) => Value::String(x.to_string()),
    }
}

fn poly(p: &[num_bigint::BigInt]) -> Value {
    Value::Array(p.iter().map(big).collect())
}

fn by_prime(g: &DualGraph, v: &[Rat]) -> Value {
    Value::Object((0..g.len()).map(|i| (g.id(i).to_string(), q(&v[i]))).collect())
}

fn need<T>(x: Option<T>, what: &str) -> Result<T> {
    x.ok_or_else(|| Error::Parse(format!("missing {what}")))
}

fn valuation(g: &DualGraph, text: Option<&str>, what: &str) -> Result<QMValuation<Rat>> {
    QMValuation::parse(g, need(text, what)?)
}

fn start(fx: &Fixture, args: &Common, g: &DualGraph) -> Result<QMValuation<Rat>> {
    valuation(g, args.nu.as_deref().or(fx.options.start.as_deref()), "--nu (or options.start)")
}

fn graph(cmd: GraphCmd, fx: &Fixture, args: &Common) -> Result<Value> {
    let g = &fx.graph;
    Ok(match cmd {
        GraphCmd::Check => json!({
            "name": fx.name,
            "primes": g.len(),
            "edges": g.edges().len(),
            "rays": g.rays().len(),
            "negative_definite": true,
            "germ": fx.germ.is_some(),
            "table": fx.table.is_some(),
            "cusp": fx.cusp.is_some(),
        }),
        GraphCmd::Dualbasis => match &args.prime {
            Some(p) => json!({"prime": p, "dual": by_prime(g, &g.dual(g.idx(p)?))}),
            None => {
                let rows: Map<String, Value> = (0..g.len()).map(|i| (g.id(i).to_string(), by_prime(g, &g.dual(i)))).collect();
                json!({"dual_basis": rows})
            }
        },
        GraphCmd::Discrepancy => {
            let t = g.canonical_coeffs();
            json!({"k": by_prime(g, &t.k), "a_div": by_prime(g, &t.a_div), "a_norm": by_prime(g, &t.a_norm)})
        }
        GraphCmd::Skeleton => {
            let ids: Vec<&str> = g.essential_skeleton().into_iter().map(|i| g.id(i)).collect();
            json!({"essential_skeleton": ids})
        }
        GraphCmd::Classify => {
            let s = g.classify_singularity()?;
            json!({"family": s.family(), "type": s.name()})
        }
    })
}

fn val(cmd: ValCmd, fx: &Fixture, args: &Common) -> Result<Value> {
    let g = &fx.graph;
    let nu = valuation(g, args.nu.as_deref(), "--nu")?;
    let mu = || valuation(g, args.mu.as_deref(), "--mu");
    let lit = nu.to_literal(g);
    Ok(match cmd {
        ValCmd::Skewness => json!({"nu": lit, "skewness": q(&skewness(&nu, g)), "log_discrepancy": q(&log_discrepancy(&nu, g))}),
        ValCmd::Beta => {
            let b = rel_skewness(&nu, &mu()?, g);
            json!({"nu": lit, "exact": q(&b), "beta": fl(valdyn_core::arith::rat_to_f64(&b))})
        }
        ValCmd::Rho => {
            let a = angular_distance(&nu, &mu()?, g);
            json!({"nu": lit, "exp_rho": q(&a.exact_exp), "approx": fl(a.log_value)})
        }
        ValCmd::Leq => {
            let m = mu()?;
            json!({"nu": lit, "mu": m.to_literal(g), "mu_leq_nu": leq(&m, &nu, g), "nu_leq_mu": leq(&nu, &m, g)})
        }
        ValCmd::Metric => json!({"nu": lit, "distance": q(&edge_metric(&nu, &mu()?, g))}),
    })
}

fn germ_of(fx: &Fixture) -> Result<&SkeletonMap> {
    fx.germ.as_ref().ok_or_else(|| Error::Parse("fixture defines no germ (sectors or cusp alpha)".into()))
}

fn quad_json(x: &QuadraticInteger) -> Value {
    json!({"minpoly": poly(&x.minpoly), "approx": fl(x.approx)})
}

fn quad_point(g: &DualGraph, p: &QMValuation<QuadElem>) -> String {
    let head = match p.site {
        Site::Vertex(i) => return format!("vertex:{}", g.id(i)),
        Site::Edge(e) => g.edge_handle(e),
        Site::Ray(k) => format!("ray:{}", g.rays()[k].label),
    };
    format!("{head} r={} s={}", p.r, p.s)
}

fn fixed_json(g: &DualGraph, k: &FixedKind) -> Value {
    let mut v = match k {
        FixedKind::Divisorial { point, rate, attracting } => json!({"point": point.to_literal(g), "rate": q(rate), "attracting": attracting}),
        FixedKind::Irrational { sector, slope, point, rate, skewness, attracting } => json!({
            "sector": sector,
            "slope": slope.to_string(),
            "slope_minpoly": poly(&slope.minimal_polynomial()),
            "point": quad_point(g, point),
            "rate": rate.to_string(),
            "approx": fl(rate.to_f64()),
            "skewness": skewness.to_string(),
            "skewness_minpoly": poly(&skewness.minimal_polynomial()),
            "attracting": attracting,
        }),
        FixedKind::End { ray, sector, rate, attracting } => {
            json!({"ray": g.rays()[*ray].label, "sector": sector, "rate": q(rate), "attracting": attracting})
        }
        FixedKind::Segment { sector, lo, hi, period, rate } => {
            json!({"sector": sector, "lo": q(lo), "hi": hi.as_ref().map_or(json!("inf"), q), "period": period, "rate": q(rate)})
        }
        FixedKind::Rotation { beta, rational, period } => {
            json!({"beta": beta.map_or(Value::Null, fl), "rational": rational.is_some(), "value": rational.as_ref().map(q), "period": period})
        }
    };
    v["kind"] = json!(k.name());
    v
}

fn germ(cmd: GermCmd, fx: &Fixture, args: &Common) -> Result<Value> {
    let f = germ_of(fx)?;
    let g = f.graph();
    let o = &fx.options;
    let steps = args.steps.unwrap_or(o.steps);
    let (m_max, n_max) = (args.m_max.unwrap_or(o.m_max), args.n_max.unwrap_or(o.n_max));
    Ok(match cmd {
        GermCmd::Apply => {
            let step = f.apply(&start(fx, args, g)?)?;
            json!({"image": step.image.to_literal(g), "rate": q(&step.rate), "sector": step.sector})
        }
        GermCmd::Orbit => {
            let pts: Vec<Value> = f.orbit(&start(fx, args, g)?, steps)?.iter().map(|(p, c)| json!({"point": p.to_literal(g), "rate": q(c)})).collect();
            json!({"orbit": pts})
        }
        GermCmd::Rates => {
            let rates: Vec<Value> = f.rates(&start(fx, args, g)?, steps.max(1))?.iter().map(q).collect();
            json!({"rates": rates})
        }
        GermCmd::Recursion => {
            let n = steps.max(2 * m_max + n_max + 2);
            let rates = f.rates(&start(fx, args, g)?, n)?;
            debug!("recursion search over {n} rate terms");
            match detect_recursion(&rates, m_max, n_max)? {
                Some(r) => json!({"found": true, "m": r.m, "a": big(&r.a), "b": big(&r.b), "n0": r.n0, "terms": n}),
                None => json!({"found": false, "terms": n}),
            }
        }
        GermCmd::Degree => quad_json(&f.dynamical_degree()?),
        GermCmd::Fixed => {
            let rep = f.find_fixed_set()?;
            let mut v = fixed_json(g, &rep.primary);
            v["candidates"] = Value::Array(rep.candidates.iter().map(|c| json!(c.name())).collect());
            v["certificate"] = match &rep.certificate {
                Some(c) => json!({"seeds": c.seeds, "max_steps": c.max_steps, "approx": fl(c.worst_final)}),
                None => Value::Null,
            };
            v
        }
        GermCmd::Nonexpansion => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed.unwrap_or(o.seed));
            let pairs = f.sample_pairs(&mut rng, args.pairs.unwrap_or(o.pairs));
            let r = f.check_nonexpansion(&pairs)?;
            json!({
                "pairs": r.pairs,
                "identical": r.identical,
                "equal": r.equal,
                "strict": r.strict,
                "violations": r.violations,
                "strict_required": r.strict_required,
                "ok": r.ok,
            })
        }
        GermCmd::Stability => {
            let r = f.stability_report()?;
            json!({
                "verdict": r.verdict,
                "interval": r.interval.as_ref().map(|i| json!({
                    "handle": g.handle_text(i.handle),
                    "lo": q(&i.lo),
                    "hi": i.hi.as_ref().map_or(json!("inf"), q),
                })),
                "realize": r.realize.iter().map(q).collect::<Vec<_>>(),
                "contract_interior": r.contract_interior,
                "witness": r.witness.as_ref().map(|w| w.to_literal(g)),
            })
        }
    })
}

fn table_of(fx: &Fixture) -> Result<&GermResolutionTable> {
    fx.table.as_ref().ok_or_else(|| Error::Parse("fixture defines no transport table".into()))
}

fn transport(cmd: TransportCmd, fx: &Fixture, args: &Common) -> Result<Value> {
    if let TransportCmd::Jacobian = cmd {
        let f = germ_of(fx)?;
        let g = f.graph();
        let nu = start(fx, args, g)?;
        let step = f.apply(&nu)?;
        let rf = fx.r_f.clone().or_else(|| fx.cusp.as_ref().map(|_| RfFunctional::zero()));
        let holds = jacobian_check(&nu, g, &step.image, g, &step.rate, rf.as_ref())?;
        let rhs = log_discrepancy(&nu, g) + rf.as_ref().expect("checked above").evaluate(g, &nu)?;
        return Ok(json!({
            "nu": nu.to_literal(g),
            "image": step.image.to_literal(g),
            "rate": q(&step.rate),
            "lhs": q(&(&step.rate * log_discrepancy(&step.image, g))),
            "rhs": q(&rhs),
            "holds": holds,
        }));
    }
    let t = table_of(fx)?;
    let prime = need(args.prime.as_deref(), "--prime")?;
    Ok(match cmd {
        TransportCmd::Push => {
            let e = t.source.idx(prime)?;
            json!({"prime": prime, "pushforward": by_prime(&t.target, &t.pushforward_dual(e))})
        }
        TransportCmd::Pull => {
            let d = t.pullback_dual(t.target.idx(prime)?);
            let curves: Map<String, Value> = d.curves.iter().map(|(c, x)| (t.contracted[*c].label.clone(), q(x))).collect();
            json!({"prime": prime, "exceptional": by_prime(&t.source, &d.exceptional), "curves": curves})
        }
        TransportCmd::Rate => json!({"prime": prime, "rate": q(&t.attraction_rate_from_table(t.source.idx(prime)?))}),
        TransportCmd::Jacobian => unreachable!(),
    })
}

fn cusp_of(fx: &Fixture) -> Result<&CuspData> {
    fx.cusp.as_ref().ok_or_else(|| Error::Parse("fixture has no [cusp] block".into()))
}

fn alpha_of(fx: &Fixture, args: &Common) -> Result<QuadElem> {
    match &args.alpha {
        Some(text) => QuadElem::parse(text),
        None => fx.alpha.clone().ok_or_else(|| Error::Parse("missing --alpha (or cusp.alpha)".into())),
    }
}

fn sector_json(s: &SectorSpec) -> Value {
    json!({
        "src": s.src,
        "cone": [q(&s.lo), s.hi.as_ref().map_or(json!("inf"), q)],
        "matrix": s.matrix,
        "dst": s.dst,
    })
}

fn cusp(cmd: CuspCmd, fx: &Fixture, args: &Common) -> Result<Value> {
    let c = cusp_of(fx)?;
    Ok(match cmd {
        CuspCmd::Build => json!({
            "cycle": c.cycle(),
            "s": c.s(),
            "omega": c.omega().to_string(),
            "omega_conj": c.omega().conj().to_string(),
            "d": big(c.d()),
            "epsilon_omega": c.fundamental_unit().to_string(),
            "epsilon": c.epsilon().to_string(),
            "primes": fx.graph.len(),
        }),
        CuspCmd::Unit => {
            let e = c.fundamental_unit();
            json!({
                "epsilon_omega": e.to_string(),
                "norm": q(&e.field_norm()),
                "is_unit": e.is_unit(),
                "totally_positive": e.is_totally_positive(),
                "approx": fl(e.to_f64()),
            })
        }
        CuspCmd::Validate => {
            let a = alpha_of(fx, args)?;
            let v = validate_alpha(&a, c)?;
            json!({"alpha": a.to_string(), "ok": v.ok, "degree": q(&v.degree), "reason": v.reason})
        }
        CuspCmd::Rotation => {
            let a = alpha_of(fx, args)?;
            let r = rotation_number(&a, c)?;
            json!({"alpha": a.to_string(), "rational": r.rational.is_some(), "value": r.rational.as_ref().map(q), "beta": fl(r.beta)})
        }
        CuspCmd::Induce => {
            let a = alpha_of(fx, args)?;
            let secs = induced_sectors(&a, c, &fx.graph)?;
            json!({"alpha": a.to_string(), "sectors": secs.iter().map(sector_json).collect::<Vec<_>>()})
        }
        CuspCmd::Example => {
            let a = irrational_example(c)?;
            let v = validate_alpha(&a, c)?;
            json!({"alpha": a.to_string(), "degree": q(&v.degree)})
        }
    })
}
