mod render;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hardcore::arith::{case_remark, classify, sliding_status};
use hardcore::contour::{
    dominance_decision, enumerate_u2_insertions, peierls_scan, InsertionOptions, TemplateGrid,
};
use hardcore::gibbs::{mcmc_run, partition_polynomial, McmcOptions, Region, DEFAULT_EXACT_BUDGET};
use hardcore::mtriangle::solve_problem5;
use hardcore::oracle::{max_packing_torus, sliding_witness, verify_density_formula, DEFAULT_BUDGET};
use hardcore::pgs::{packing_density, pgs_catalog, template_lattice, DensityValue, PgsCatalog};
use hardcore::torus::Torus;
use hardcore::{Error, LatticeKind, Vec2i};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde_json::{json, Value};

const SCHEMA_VERSION: u32 = 1;

const EXIT_DOMAIN: u8 = 2;
const EXIT_BUDGET: u8 = 3;
const EXIT_USAGE: u8 = 64;
const EXIT_IO: u8 = 74;

#[derive(Parser, Debug)]
#[command(name = "hardcore", version, about = "Hard-core exclusion model on the A2, H2 and Z2 lattices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long, global = true, value_enum)]
    lattice: Option<Kind>,
    /// Squared exclusion distance.
    #[arg(long, global = true)]
    d2: Option<u64>,
    /// Torus periods in translation coordinates: "p1a,p1b;p2a,p2b".
    #[arg(long, global = true)]
    torus: Option<String>,
    /// Torus of NxM template cells.
    #[arg(long, global = true)]
    cells: Option<String>,
    /// Fugacity, as an integer, decimal or fraction p/q.
    #[arg(long, global = true)]
    u: Option<String>,
    #[arg(long, global = true)]
    steps: Option<u64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    budget: Option<usize>,
    /// Emit the JSON report instead of a plain summary.
    #[arg(long, global = true)]
    json: bool,
    /// Write the report (or SVG) to a file instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    A2,
    H2,
    Z2,
}

impl From<Kind> for LatticeKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::A2 => LatticeKind::A2,
            Kind::H2 => LatticeKind::H2,
            Kind::Z2 => LatticeKind::Z2,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Case label, PGS counts, density and sliding status.
    Classify,
    /// Maximal packing density, exact and as a decimal.
    Density,
    /// Catalog of periodic ground states.
    Pgs {
        /// List every PGS (class, sublattice basis, offset).
        #[arg(long)]
        list: bool,
    },
    /// Minimal-area triangles on Z2.
    Mtriangles,
    /// Sliding status, with an optional witness search on an L x L torus.
    Sliding {
        #[arg(long)]
        witness: bool,
        #[arg(long)]
        side: Option<i64>,
    },
    /// Counts u^-2 insertions per PGS class and picks the dominant classes.
    Dominance {
        #[arg(long, default_value_t = 5)]
        max_n: usize,
        #[arg(long, default_value_t = 4)]
        factor: u64,
        /// Report the insertions of one class instead of the comparison.
        #[arg(long)]
        class: Option<usize>,
    },
    /// Local Peierls deficit scan over small supports.
    Peierls {
        #[arg(long, default_value_t = 3)]
        templates: usize,
    },
    /// Exact partition polynomial on a torus.
    GibbsExact,
    /// Metropolis chain on a torus.
    GibbsMcmc {
        #[arg(long, default_value_t = 0.0)]
        shift: f64,
        #[arg(long, default_value_t = 100)]
        thin: u64,
        #[arg(long, default_value_t = 0)]
        burn_in: u64,
    },
    /// Brute-force packing checks.
    Oracle,
    /// SVG drawing of a PGS, sliding witness, vacancy contour or insertions.
    Render {
        #[arg(long, value_enum, default_value_t = render::Scene::Pgs)]
        scene: render::Scene,
        #[arg(long, default_value_t = 0)]
        class: usize,
    },
}

/// Failure of a command, with the exit code it maps to.
#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Lib(#[from] Error),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Lib(Error::Budget { .. }) => EXIT_BUDGET,
            CliError::Lib(_) => EXIT_DOMAIN,
            CliError::Io { .. } => EXIT_IO,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
            CliError::Lib(e) => match e {
                Error::InvalidSite { .. } => "invalid_site",
                Error::NotAttainable { .. } => "not_attainable",
                Error::Unsupported { .. } => "unsupported",
                Error::Domain(_) => "domain",
                Error::Commensurability(_) => "commensurability",
                Error::Budget { .. } => "budget",
            },
        }
    }
}

type CliResult<T> = Result<T, CliError>;

enum Output {
    Report(Value),
    Svg(String),
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let name = command_name(&cli.command);
    let result = configure_threads(&cli.common).and_then(|_| run(&cli));
    let written = result.and_then(|out| match out {
        Output::Svg(s) => emit(&cli.common, &s),
        Output::Report(results) => {
            let report = json!({
                "schema_version": SCHEMA_VERSION,
                "command": name,
                "argv": argv,
                "results": results,
            });
            let text = if cli.common.json {
                serde_json::to_string_pretty(&report).expect("reports serialize") + "\n"
            } else {
                let mut s = String::new();
                plain(&report["results"], 0, &mut s);
                s
            };
            emit(&cli.common, &text)
        }
    });
    match written {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if cli.common.json {
                let obj = json!({
                    "schema_version": SCHEMA_VERSION,
                    "command": name,
                    "argv": argv,
                    "error": {"kind": e.kind(), "message": e.to_string(), "exit_code": e.code()},
                });
                println!("{}", serde_json::to_string_pretty(&obj).expect("reports serialize"));
            }
            ExitCode::from(e.code())
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Classify => "classify",
        Command::Density => "density",
        Command::Pgs { .. } => "pgs",
        Command::Mtriangles => "mtriangles",
        Command::Sliding { .. } => "sliding",
        Command::Dominance { .. } => "dominance",
        Command::Peierls { .. } => "peierls",
        Command::GibbsExact => "gibbs-exact",
        Command::GibbsMcmc { .. } => "gibbs-mcmc",
        Command::Oracle => "oracle",
        Command::Render { .. } => "render",
    }
}

fn configure_threads(c: &Common) -> CliResult<()> {
    if let Some(n) = c.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
    }
    Ok(())
}

fn emit(c: &Common, text: &str) -> CliResult<()> {
    match &c.out {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Indented `key: value` rendering of a JSON value.
fn plain(v: &Value, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                if is_scalar(x) || is_flat_array(x) {
                    out.push_str(&format!("{pad}{k}: {}\n", scalar(x)));
                } else {
                    out.push_str(&format!("{pad}{k}:\n"));
                    plain(x, depth + 1, out);
                }
            }
        }
        Value::Array(items) => {
            for x in items {
                if is_scalar(x) || is_flat_array(x) {
                    out.push_str(&format!("{pad}- {}\n", scalar(x)));
                } else {
                    out.push_str(&format!("{pad}-\n"));
                    plain(x, depth + 1, out);
                }
            }
        }
        x => out.push_str(&format!("{pad}{}\n", scalar(x))),
    }
}

fn is_scalar(v: &Value) -> bool {
    !matches!(v, Value::Object(_) | Value::Array(_))
}

fn is_flat_array(v: &Value) -> bool {
    matches!(v, Value::Array(a) if a.iter().all(|x| is_scalar(x) || matches!(x, Value::Array(b) if b.iter().all(is_scalar))))
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn kind_of(c: &Common) -> CliResult<LatticeKind> {
    c.lattice
        .map(Into::into)
        .ok_or_else(|| CliError::Usage("--lattice is required".into()))
}

fn d2_of(c: &Common) -> CliResult<u64> {
    match c.d2 {
        Some(0) => Err(CliError::Usage("--d2 must be positive".into())),
        Some(d) => Ok(d),
        None => Err(CliError::Usage("--d2 is required".into())),
    }
}

fn parse_pair(s: &str) -> Option<Vec2i> {
    let (a, b) = s.split_once(',')?;
    Some(Vec2i::new(a.trim().parse().ok()?, b.trim().parse().ok()?))
}

fn parse_cells(s: &str) -> CliResult<[usize; 2]> {
    let bad = || CliError::Usage(format!("--cells expects NxM, got {s:?}"));
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let n: usize = a.trim().parse().map_err(|_| bad())?;
    let m: usize = b.trim().parse().map_err(|_| bad())?;
    Ok([n, m])
}

/// Parses "p/q", an integer or a plain decimal such as "0.25" into an exact rational.
fn parse_rational(s: &str) -> CliResult<BigRational> {
    let bad = || CliError::Usage(format!("--u expects an integer, decimal or p/q, got {s:?}"));
    let t = s.trim();
    let r = if let Some((int, frac)) = t.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let digits: BigInt = format!("{int}{frac}").parse().map_err(|_| bad())?;
        BigRational::new(digits, num_traits::pow(BigInt::from(10), frac.len()))
    } else {
        BigRational::from_str(t).map_err(|_| bad())?
    };
    if r <= BigRational::zero() {
        return Err(CliError::Usage("--u must be positive".into()));
    }
    Ok(r)
}

fn fugacity(c: &Common) -> CliResult<BigRational> {
    parse_rational(c.u.as_deref().unwrap_or("1"))
}

/// The torus from --torus, or NxM template cells from --cells.
fn torus_of(c: &Common, kind: LatticeKind) -> CliResult<(Torus, Option<TemplateGrid>)> {
    match (&c.torus, &c.cells) {
        (Some(_), Some(_)) => Err(CliError::Usage("give either --torus or --cells, not both".into())),
        (Some(t), None) => {
            let bad = || CliError::Usage(format!("--torus expects \"p1a,p1b;p2a,p2b\", got {t:?}"));
            let (a, b) = t.split_once(';').ok_or_else(bad)?;
            let torus = Torus::new(kind, parse_pair(a).ok_or_else(bad)?, parse_pair(b).ok_or_else(bad)?)?;
            Ok((torus, None))
        }
        (None, Some(s)) => {
            let [n, m] = parse_cells(s)?;
            let grid = TemplateGrid::new(&template_lattice(kind, d2_of(c)?)?, n, m)?;
            Ok((grid.torus.clone(), Some(grid)))
        }
        (None, None) => Err(CliError::Usage("--torus or --cells is required".into())),
    }
}

fn density_json(d: &DensityValue) -> Value {
    json!({
        "coeff_num": d.coeff.numer(),
        "coeff_den": d.coeff.denom(),
        "radical": d.radical,
        "scope": d.scope,
        "exact": d.to_string(),
        "decimal": d.decimal(),
    })
}

fn catalog_json(cat: &PgsCatalog) -> Value {
    json!({
        "case": cat.case.to_string(),
        "sigma": cat.sigma,
        "k": cat.k,
        "m": cat.m,
        "pgs_count": cat.pgs_count,
    })
}

fn rational_json(r: &BigRational) -> Value {
    json!({
        "exact": r.to_string(),
        "decimal": r.to_f64().map(|x| hardcore::pgs::significant(x, 12)),
    })
}

fn run(cli: &Cli) -> CliResult<Output> {
    let c = &cli.common;
    let value = match &cli.command {
        Command::Classify => {
            let kind = kind_of(c)?;
            let d2 = d2_of(c)?;
            let case = classify(kind, d2);
            if case == hardcore::arith::CaseLabel::NotAttainable {
                return Err(Error::NotAttainable { kind, d2 }.into());
            }
            let mut v = json!({
                "lattice": kind.name(),
                "d2": d2,
                "case": case.to_string(),
                "sliding": sliding_status(kind, d2),
                "density": density_json(&packing_density(kind, d2)?),
            });
            match pgs_catalog(kind, d2) {
                Ok(cat) => v["catalog"] = catalog_json(&cat),
                Err(Error::Unsupported { .. }) => v["catalog"] = Value::Null,
                Err(e) => return Err(e.into()),
            }
            if let hardcore::arith::CaseLabel::HC { dstar2 } = case {
                v["dstar2"] = json!(dstar2);
            }
            if let Some(r) = case_remark(kind, d2) {
                v["remark"] = json!(r);
            }
            v
        }
        Command::Density => {
            let kind = kind_of(c)?;
            let d2 = d2_of(c)?;
            json!({"lattice": kind.name(), "d2": d2, "density": density_json(&packing_density(kind, d2)?)})
        }
        Command::Pgs { list } => {
            let kind = kind_of(c)?;
            let d2 = d2_of(c)?;
            let cat = pgs_catalog(kind, d2)?;
            let classes: Vec<Value> = cat
                .classes
                .iter()
                .map(|cl| {
                    json!({
                        "label": cl.label,
                        "m": cl.m,
                        "sublattices": cl.sublattices.len(),
                        "representative_basis": cl.representative.basis,
                        "index": cl.representative.index,
                    })
                })
                .collect();
            let mut v = json!({"lattice": kind.name(), "d2": d2, "catalog": catalog_json(&cat), "classes": classes});
            if *list {
                let limit = c.budget.unwrap_or(100_000);
                if cat.pgs_count as usize > limit {
                    return Err(Error::Budget {
                        what: "PGS listing".into(),
                        needed: cat.pgs_count as usize,
                        budget: limit,
                    }
                    .into());
                }
                let all: Vec<Value> = cat
                    .all_pgs()
                    .iter()
                    .map(|p| json!({"class": p.class, "basis": p.sublattice.basis(), "offset": p.offset}))
                    .collect();
                v["pgs"] = json!(all);
            }
            v
        }
        Command::Mtriangles => {
            if let Some(k) = c.lattice {
                if !matches!(k, Kind::Z2) {
                    return Err(Error::Domain("minimal-area triangles are computed on z2 only".into()).into());
                }
            }
            let r = solve_problem5(d2_of(c)?)?;
            json!({"d2": r.d2, "s": r.s, "k": r.k, "n0": r.n0, "n1": r.n1, "search_bound": r.search_bound, "classes": r.classes})
        }
        Command::Sliding { witness, side } => {
            let kind = kind_of(c)?;
            let d2 = d2_of(c)?;
            if classify(kind, d2) == hardcore::arith::CaseLabel::NotAttainable {
                return Err(Error::NotAttainable { kind, d2 }.into());
            }
            let mut v = json!({"lattice": kind.name(), "d2": d2, "status": sliding_status(kind, d2)});
            if *witness {
                let l = match side {
                    Some(l) => *l,
                    None => default_side(kind, d2)?,
                };
                let w = sliding_witness(kind, d2, l, c.budget.unwrap_or(DEFAULT_BUDGET))?;
                v["side"] = json!(l);
                v["witness"] = json!(w);
            }
            v
        }
        Command::Dominance { max_n, factor, class } => {
            let kind = kind_of(c)?;
            let d2 = d2_of(c)?;
            let opts = InsertionOptions {
                max_n: *max_n,
                diameter2_factor: *factor,
                ..Default::default()
            };
            match class {
                Some(id) => json!(enumerate_u2_insertions(kind, d2, *id, &opts)?),
                None => json!(dominance_decision(kind, d2, &opts)?),
            }
        }
        Command::Peierls { templates } => {
            let kind = kind_of(c)?;
            let d2 = d2_of(c)?;
            let r = peierls_scan(kind, d2, *templates, c.budget.unwrap_or(100_000))?;
            let mut v = json!(r);
            v["min_ratio"] = json!(r.min_ratio.to_string());
            v
        }
        Command::GibbsExact => {
            let kind = kind_of(c)?;
            let d2 = d2_of(c)?;
            let (torus, _) = torus_of(c, kind)?;
            let u = fugacity(c)?;
            let z = partition_polynomial(&Region::torus(torus.clone()), d2, c.budget.unwrap_or(DEFAULT_EXACT_BUDGET))?;
            let coeffs: Vec<String> = z.coeffs.iter().map(|x| x.to_string()).collect();
            json!({
                "lattice": kind.name(),
                "d2": d2,
                "torus": [torus.p1, torus.p2],
                "sites": torus.site_count,
                "u": u.to_string(),
                "coefficients": coeffs,
                "degree": z.degree(),
                "partition_function": rational_json(&z.eval(&u)),
                "mean_count": rational_json(&z.mean_count(&u)),
            })
        }
        Command::GibbsMcmc { shift, thin, burn_in } => {
            let kind = kind_of(c)?;
            let d2 = d2_of(c)?;
            let (torus, grid) = torus_of(c, kind)?;
            let u = fugacity(c)?;
            let uf = u.to_f64().filter(|x| x.is_finite()).ok_or_else(|| CliError::Usage("--u out of range".into()))?;
            if !(0.0..=1.0).contains(shift) {
                return Err(CliError::Usage("--shift must lie in [0, 1]".into()));
            }
            let opts = McmcOptions {
                shift_probability: *shift,
                thin: (*thin).max(1),
                burn_in: *burn_in,
            };
            let catalog = match &grid {
                Some(_) => Some(pgs_catalog(kind, d2)?),
                None => None,
            };
            let order = catalog.as_ref().zip(grid.as_ref());
            let steps = c.steps.unwrap_or(100_000);
            let seed = c.seed.unwrap_or(0);
            let s = mcmc_run(&torus, d2, uf, steps, seed, &opts, order)?;
            json!({
                "lattice": kind.name(),
                "d2": d2,
                "torus": [torus.p1, torus.p2],
                "sites": torus.site_count,
                "u": u.to_string(),
                "steps": steps,
                "seed": seed,
                "moves": {"insert": s.insert, "delete": s.delete, "shift": s.shift},
                "samples": s.count_trace.len(),
                "mean_count": s.mean_count(),
                "standard_error": finite(s.standard_error(20)),
                "final_count": s.final_state.len(),
                "final_max_order": s.final_max_order(),
            })
        }
        Command::Oracle => {
            let kind = kind_of(c)?;
            let d2 = d2_of(c)?;
            let budget = c.budget.unwrap_or(DEFAULT_BUDGET);
            let mut v = json!({"lattice": kind.name(), "d2": d2});
            if c.torus.is_some() || c.cells.is_some() {
                let (torus, _) = torus_of(c, kind)?;
                let r = max_packing_torus(&torus, d2, false, budget)?;
                v["packing"] = json!({
                    "torus": [r.p1, r.p2],
                    "sites": r.site_count,
                    "max_count": r.max_count,
                    "nodes": r.nodes,
                });
            } else {
                v["density_check"] = json!(verify_density_formula(kind, d2, budget)?);
            }
            v
        }
        Command::Render { scene, class } => {
            let kind = kind_of(c)?;
            let d2 = d2_of(c)?;
            let cells = c.cells.as_deref().map(parse_cells).transpose()?;
            let req = render::Request {
                kind,
                d2,
                class: *class,
                cells,
                budget: c.budget.unwrap_or(render::DEFAULT_SITE_LIMIT),
            };
            return Ok(Output::Svg(render::render(*scene, &req)?));
        }
    };
    Ok(Output::Report(value))
}

fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

/// Witness torus side: a multiple of the minimal doubled area on Z2 that is at least 12.
pub(crate) fn default_side(kind: LatticeKind, d2: u64) -> CliResult<i64> {
    Ok(match kind {
        LatticeKind::Z2 => {
            let s = solve_problem5(d2)?.s as i64;
            s * ((12 + s - 1) / s)
        }
        _ => 8.max(2 * (d2 as f64).sqrt().ceil() as i64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationals() {
        assert_eq!(parse_rational("3/2").unwrap().to_string(), "3/2");
        assert_eq!(parse_rational("0.25").unwrap().to_string(), "1/4");
        assert_eq!(parse_rational("10000").unwrap().to_string(), "10000");
        assert!(parse_rational("-1").is_err());
        assert!(parse_rational("1.").is_err());
        assert!(parse_rational("x").is_err());
    }

    #[test]
    fn cells_and_pairs() {
        assert_eq!(parse_cells("3x4").unwrap(), [3, 4]);
        assert!(parse_cells("3").is_err());
        assert_eq!(parse_pair(" 4, 0"), Some(Vec2i::new(4, 0)));
        assert_eq!(parse_pair("4"), None);
    }

    #[test]
    fn plain_output_is_stable() {
        let mut s = String::new();
        plain(&json!({"b": [1, 2], "a": {"c": "x"}}), 0, &mut s);
        assert_eq!(s, "a:\n  c: x\nb: [1,2]\n");
    }
}
