//! Command-line front end. Every command produces one JSON document; the
//! same inputs and flags always give the same bytes.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::construct;
use crate::criteria::{self, Indicator};
use crate::info::{self, ClosedSet, PointSet};
use crate::ortho::{self, OrthoProcess, OrthoVector, Scaling};
use crate::par;
use crate::rat::{self, Q};
use crate::sets;
use crate::suites;
use crate::surd::{Field, Surd};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_ASSERT: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "orthoseries", version, about = "Convergence criteria and constructions for orthogonal series")]
pub struct Cli {
    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Exact arithmetic for constructions (also `ORTHO_EXACT=1`).
    #[arg(long, global = true)]
    pub exact: bool,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Criteria, tail set and V trace of a coefficient file.
    Analyze(AnalyzeArgs),
    /// Ternary families or processes built along a triadic set.
    Construct(ConstructArgs),
    /// Randomized inequality suites.
    Verify(VerifyArgs),
    /// Cantor-set tail bounds and the local continuity trace.
    Cantor(CantorArgs),
    /// Orthogonal-measure criterion for atom probabilities.
    Measure(MeasureArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum IndicatorArg {
    Ib,
    Hb,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Coefficient file (JSON array or one value per line), `-` for stdin.
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "ib")]
    pub indicator: IndicatorArg,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct ConstructArgs {
    /// Ternary family with 3^k vectors.
    #[arg(long, conflicts_with = "b", required_unless_present = "b")]
    pub k: Option<u32>,
    /// Triadic set: `grid0`, `grid1`, `grid2` or comma-separated rationals.
    #[arg(long)]
    pub b: Option<String>,
    /// Target level for the exceedance report of a set construction.
    #[arg(long, default_value_t = 4.0)]
    pub y: f64,
    /// Write the vectors or the process here.
    #[arg(long)]
    pub dump: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = suites::DEFAULT_INSTANCES)]
    pub instances: usize,
    /// Run only these suites (repeatable).
    #[arg(long = "suite")]
    pub suites: Vec<String>,
    /// Check a stored instance instead of the random suites.
    #[arg(long)]
    pub fixture: Option<PathBuf>,
    /// Print the suite ids.
    #[arg(long)]
    pub list: bool,
}

#[derive(Args, Debug)]
pub struct CantorArgs {
    /// Point of the Cantor set.
    #[arg(long, default_value = "0")]
    pub t: String,
    #[arg(long = "radius", default_values = ["1/3", "1/9", "1/27"])]
    pub radii: Vec<String>,
    /// Deepest truncation for the continuity trace.
    #[arg(long, default_value_t = 8)]
    pub depth: u32,
    /// Largest k for the tail bound table.
    #[arg(long, default_value_t = 12)]
    pub k_max: u32,
}

#[derive(Args, Debug)]
pub struct MeasureArgs {
    /// Atom probabilities (JSON array or one value per line), `-` for stdin.
    pub input: PathBuf,
}

/// A finished command: the report and whether its assertions held.
#[derive(Clone, Debug, PartialEq)]
pub struct Output {
    pub json: Value,
    pub passed: bool,
}

impl Output {
    fn ok(json: Value) -> Output {
        Output { json, passed: true }
    }
}

pub fn exact_mode(flag: bool) -> bool {
    flag || std::env::var("ORTHO_EXACT").is_ok_and(|v| v == "1")
}

pub fn render(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

fn read_input(path: &Path) -> Result<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::Read::read_to_string(&mut std::io::stdin(), &mut s)?;
        Ok(s)
    } else {
        Ok(std::fs::read_to_string(path)?)
    }
}

fn qs(x: &Q) -> Value {
    Value::String(rat::fmt(x))
}

pub fn cmd_analyze(a: &AnalyzeArgs, exact: bool) -> Result<Output> {
    let text = read_input(&a.input)?;
    let seq = info::parse_coefficients(&text)?;
    let indicator = match a.indicator {
        IndicatorArg::Ib => Indicator::Ib,
        IndicatorArg::Hb => Indicator::Hb,
    };
    let report = criteria::evaluate_all(&seq, indicator)?;
    let s = seq.normalized()?;
    let b = info::tail_set(&s)?;
    let raw = info::info_fn(&b, 3);
    let (h, clipped) = info::clip_below_one(&raw);
    let sandwich = criteria::sandwich_check(&s)?;
    let mut notices = Vec::new();
    if !report.normalized {
        notices.push(format!("input normalized: sum of squares was {}", rat::fmt(&seq.total())));
    }
    if clipped {
        notices.push("h_B raised to 1 where it was below 1".to_string());
    }
    let json = json!({
        "command": "analyze",
        "config": {
            "input": a.input.display().to_string(),
            "indicator": indicator,
            "seed": a.seed,
            "exact": exact,
        },
        "n": report.n,
        "notices": notices,
        "tail_set": {"points": b.len(), "set": b},
        "h_b": {
            "pieces": h.num_pieces(),
            "min": raw.min_value(),
            "max": raw.max_value(),
            "clipped_at_one": clipped,
        },
        "v_trace": report.v_trace,
        "criteria": report.entries,
        "sandwich": sandwich,
    });
    Ok(Output::ok(json))
}

fn analyze_table(v: &Value) -> String {
    let mut out = String::new();
    out.push_str(&format!("n = {}\n", v["n"]));
    for n in v["notices"].as_array().into_iter().flatten() {
        out.push_str(&format!("notice: {}\n", n.as_str().unwrap_or_default()));
    }
    out.push_str(&format!("{:<10} {:>16}\n", "criterion", "value"));
    for e in v["criteria"].as_array().into_iter().flatten() {
        let val = match e["value"].as_f64() {
            Some(x) => format!("{x:.9}"),
            None => e["note"].as_str().unwrap_or("n/a").to_string(),
        };
        out.push_str(&format!("{:<10} {:>16}\n", e["name"].as_str().unwrap_or_default(), val));
    }
    let t = &v["v_trace"];
    out.push_str(&format!("stabilization level {}\n", t["stabilization_level"]));
    for l in t["levels"].as_array().into_iter().flatten() {
        out.push_str(&format!("  V_{:<3} {:.9}\n", l["j"], l["norm"].as_f64().unwrap_or(f64::NAN)));
    }
    out
}

/// Named grids or a comma-separated list of rationals.
pub fn parse_set(spec: &str) -> Result<PointSet> {
    let level = match spec {
        "grid0" => Some(0),
        "grid1" => Some(1),
        "grid2" => Some(2),
        _ => None,
    };
    if let Some(j) = level {
        let n = 3i64.pow(1 << j);
        return PointSet::new((0..=n).map(|m| rat::q(m, n)).collect());
    }
    let pts = spec
        .split(',')
        .map(|p| rat::parse(p.trim()))
        .collect::<Result<Vec<_>>>()?;
    PointSet::with_endpoints(pts)
}

fn write_dump(path: &Path, v: &Value) -> Result<()> {
    std::fs::write(path, render(v))?;
    Ok(())
}

fn family_report<V: Field>(k: u32, dump: Option<&Path>) -> Result<Output> {
    let chi = OrthoVector::<V>::basis(0);
    let phis = construct::phi_family(k, &chi)?;
    let n = phis.len();
    let mut vals = Vec::with_capacity(n + 1);
    vals.push(OrthoVector::zero());
    for p in &phis {
        let next = vals.last().expect("non-empty").add(p);
        vals.push(next);
    }
    let times = (0..=n as i64).map(|m| rat::q(m, n as i64)).collect();
    let x = OrthoProcess::new(times, vals, Scaling::Scaled { c: rat::qi(3) })?;
    let gram = ortho::gram_check(&x);
    let max = ortho::maximal_function(&x, None, false)?;
    let exceed: Vec<Value> = (1..=k)
        .map(|y| json!({"y": y, "measure": qs(&ortho::exceedance(&max, &V::from_i64(y as i64), false))}))
        .collect();
    let menshov = ortho::menshov_bound_check(&phis)?;
    let identities = if k <= construct::MAX_CHECK_K {
        Some(construct::family_check(k)?)
    } else {
        None
    };
    let passed = gram.ok && identities.as_ref().is_none_or(|r| r.ok);
    if let Some(p) = dump {
        let vs: Vec<Value> = phis.iter().map(|v| v.to_json()).collect();
        write_dump(p, &json!({"k": k, "vectors": vs}))?;
    }
    Ok(Output {
        json: json!({
            "kind": "family",
            "k": k,
            "vectors": n,
            "norm_sq": qs(&rat::q(3, n as i64)),
            "gram": gram,
            "max_partial_sum": {"pieces": max.num_pieces(), "at_least": exceed},
            "menshov": menshov,
            "identities": identities,
        }),
        passed,
    })
}

fn set_report<V: Field>(b: &PointSet, y: f64, dump: Option<&Path>) -> Result<Output> {
    let (cert, report) = construct::build_divergent::<V>(b, y)?;
    if let Some(p) = dump {
        write_dump(p, &cert.process.to_json())?;
    }
    Ok(Output {
        json: json!({"kind": "process", "set": b, "report": report}),
        passed: cert.checks.ok,
    })
}

pub fn cmd_construct(a: &ConstructArgs, exact: bool) -> Result<Output> {
    let dump = a.dump.as_deref();
    let mut out = match (a.k, &a.b) {
        (Some(k), _) => {
            if k == 0 || k > construct::MAX_PHI_K {
                return Err(Error::Budget(format!("k = {k} outside 1..={}", construct::MAX_PHI_K)));
            }
            if exact {
                family_report::<Surd>(k, dump)?
            } else {
                family_report::<f64>(k, dump)?
            }
        }
        (None, Some(spec)) => {
            let b = parse_set(spec)?;
            if exact {
                set_report::<Surd>(&b, a.y, dump)?
            } else {
                set_report::<f64>(&b, a.y, dump)?
            }
        }
        (None, None) => return Err(Error::Invalid("one of --k or --b is required".into())),
    };
    out.json["command"] = json!("construct");
    out.json["config"] = json!({
        "k": a.k,
        "b": a.b,
        "y": a.y,
        "dump": a.dump.as_ref().map(|p| p.display().to_string()),
        "seed": a.seed,
        "exact": exact,
    });
    Ok(out)
}

pub fn cmd_verify(a: &VerifyArgs) -> Result<Output> {
    if a.list {
        let ids: Vec<Value> = suites::all_suites()
            .iter()
            .map(|s| json!({"id": s.id, "title": s.title}))
            .collect();
        return Ok(Output::ok(json!({"command": "verify", "suites": ids})));
    }
    if let Some(path) = &a.fixture {
        let text = std::fs::read_to_string(path)?;
        let v: Value = serde_json::from_str(&text)?;
        let r = suites::check_fixture(&v)?;
        let passed = r.passed;
        return Ok(Output {
            json: json!({"command": "verify", "fixture": path.display().to_string(), "result": r, "passed": passed}),
            passed,
        });
    }
    let cfg = suites::VerifyConfig {
        seed: a.seed,
        instances: a.instances,
        only: a.suites.clone(),
    };
    let rep = suites::run(&cfg)?;
    let passed = rep.passed;
    let mut json = serde_json::to_value(&rep)?;
    json["command"] = json!("verify");
    Ok(Output { json, passed })
}

pub fn cmd_cantor(a: &CantorArgs) -> Result<Output> {
    let t = rat::parse(&a.t)?;
    let radii = a.radii.iter().map(|r| rat::parse(r)).collect::<Result<Vec<_>>>()?;
    if a.depth == 0 || a.depth > info::MAX_CANTOR_DEPTH {
        return Err(Error::Budget(format!("depth {} outside 1..={}", a.depth, info::MAX_CANTOR_DEPTH)));
    }
    let depths: Vec<u32> = (1..=a.depth).collect();
    let set = ClosedSet::Cantor { depth: a.depth };
    let cont = sets::continuity_verdict(&set, &t, &radii, &depths)?;
    let rows: Vec<Value> = (0..=a.k_max)
        .map(|k| {
            let v = sets::cantor_tail_norm(k);
            json!({
                "k": k,
                "tail_norm": v,
                "stated_bound": sets::cantor_stated_bound(k),
                "triangle_bound": sets::cantor_triangle_bound(k),
                "stated_holds": v <= sets::cantor_stated_bound(k),
                "triangle_holds": v <= sets::cantor_triangle_bound(k),
            })
        })
        .collect();
    let passed = rows.iter().all(|r| r["triangle_holds"] == json!(true));
    Ok(Output {
        json: json!({
            "command": "cantor",
            "config": {"t": a.t, "radii": a.radii, "depth": a.depth, "k_max": a.k_max},
            "tail": rows,
            "continuity": cont,
        }),
        passed,
    })
}

/// Rationals from a JSON array or one value per line.
pub fn parse_rationals(text: &str) -> Result<Vec<Q>> {
    let t = text.trim();
    if t.starts_with('[') {
        let raw: Vec<Value> = serde_json::from_str(t)?;
        return raw
            .iter()
            .map(|v| match v {
                Value::String(s) => rat::parse(s),
                Value::Number(n) => rat::parse(&n.to_string()),
                _ => Err(Error::Parse(format!("not a number: {v}"))),
            })
            .collect();
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let l = line.split('#').next().unwrap_or("").trim();
        if !l.is_empty() {
            out.push(rat::parse(l).map_err(|_| Error::Parse(format!("line {}: not a number: {l:?}", i + 1)))?);
        }
    }
    Ok(out)
}

pub fn cmd_measure(a: &MeasureArgs) -> Result<Output> {
    let probs = parse_rationals(&read_input(&a.input)?)?;
    if probs.is_empty() {
        return Err(Error::Parse("no probabilities found".into()));
    }
    let m = criteria::measure_criterion(&probs)?;
    Ok(Output::ok(json!({
        "command": "measure",
        "config": {"input": a.input.display().to_string()},
        "atoms": probs.len(),
        "criterion": m,
    })))
}

pub fn dispatch(cli: &Cli) -> Result<Output> {
    let exact = exact_mode(cli.exact);
    match &cli.command {
        Command::Analyze(a) => cmd_analyze(a, exact),
        Command::Construct(a) => cmd_construct(a, exact),
        Command::Verify(a) => cmd_verify(a),
        Command::Cantor(a) => cmd_cantor(a),
        Command::Measure(a) => cmd_measure(a),
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) | Error::Json(_) | Error::Parse(_) | Error::Invalid(_) => EXIT_DATA,
        Error::Domain(_) | Error::Precondition(_) | Error::Budget(_) | Error::Inexact(_) => EXIT_DATA,
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let res = par::with_jobs(cli.jobs, || dispatch(&cli));
    let out = match res {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let text = match &cli.command {
        Command::Analyze(a) if a.format == Format::Table => analyze_table(&out.json),
        _ => render(&out.json),
    };
    match &cli.out {
        Some(p) => {
            if let Err(e) = std::fs::write(p, text) {
                eprintln!("error: {e}");
                return EXIT_DATA;
            }
        }
        None => print!("{text}"),
    }
    if out.passed {
        EXIT_OK
    } else {
        EXIT_ASSERT
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("orthoseries").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["orthoseries", "bogus"]), EXIT_USAGE);
        assert_eq!(run(["orthoseries", "construct", "--k", "1", "--b", "grid1"]), EXIT_USAGE);
    }

    #[test]
    fn construct_k1_gram_is_identity() {
        let c = cli(&["construct", "--k", "1"]);
        let o = dispatch(&c).unwrap();
        assert!(o.passed);
        assert_eq!(o.json["vectors"], 3);
        assert_eq!(o.json["norm_sq"], "1");
        assert_eq!(o.json["gram"]["ok"], true);
        assert_eq!(o.json["max_partial_sum"]["at_least"][0]["measure"], "1/3");
    }

    #[test]
    fn construct_budget() {
        let c = cli(&["construct", "--k", "9"]);
        let e = dispatch(&c).unwrap_err();
        assert!(matches!(e, Error::Budget(_)));
        assert_eq!(exit_code(&e), EXIT_DATA);
    }

    #[test]
    fn construct_grid1_nests() {
        let c = cli(&["--exact", "construct", "--b", "grid1"]);
        let o = dispatch(&c).unwrap();
        assert!(o.passed);
        assert_eq!(o.json["report"]["plan"]["kind"], "nest");
    }

    #[test]
    fn analyze_examples() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        std::fs::write(&p, "1/3\n1/3\n1/3\n").unwrap();
        let o = dispatch(&cli(&["analyze", p.to_str().unwrap()])).unwrap();
        assert_eq!(o.json["notices"].as_array().unwrap().len(), 1);
        let v = o.json["criteria"].as_array().unwrap().iter().find(|e| e["name"] == "V h_B").unwrap();
        assert!(v["value"].as_f64().unwrap() >= 1.0);
        std::fs::write(&p, "").unwrap();
        let e = dispatch(&cli(&["analyze", p.to_str().unwrap()])).unwrap_err();
        assert_eq!(exit_code(&e), EXIT_DATA);
        std::fs::write(&p, "1\n").unwrap();
        let o = dispatch(&cli(&["analyze", p.to_str().unwrap()])).unwrap();
        for e in o.json["criteria"].as_array().unwrap() {
            if e["name"] != "V h_B" {
                assert_eq!(e["value"], 0.0, "{e}");
            }
        }
    }

    #[test]
    fn set_specs() {
        assert_eq!(parse_set("grid1").unwrap().len(), 10);
        assert_eq!(parse_set("1/3, 2/3").unwrap().len(), 4);
        assert!(parse_set("x").is_err());
    }

    #[test]
    fn measure_uniform() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.json");
        std::fs::write(&p, r#"["1/3", "1/3", "1/3"]"#).unwrap();
        let o = dispatch(&cli(&["measure", p.to_str().unwrap()])).unwrap();
        assert_eq!(o.json["criterion"]["total"], 1.0);
    }
}
