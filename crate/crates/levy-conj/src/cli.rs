//! Command-line front end.
//!
//! Exit codes: 0 success (or verdict yes), 1 verdict no, 2 inconclusive,
//! 3 input error, 4 numeric failure.

use crate::charfn::{cumulant_with_error, mapped_cumulant_with_error};
use crate::classes::{build_l_infinity, class_membership, factor_decompose, Variant};
use crate::error::{LevyError, Result};
use crate::inversion::{check_semistable, invert, DEFAULT_SPANS};
use crate::io::{
    kernel_from_json, kernel_to_json, linf_from_json, num, parse_json, triplet_from_json,
    triplet_to_json,
};
use crate::kernel::MappingKernel;
use crate::mapping::{apply_mapping, check_domain, check_range, iterate_mapping, Verdict};
use crate::measure::{moment_report, triplets_close, LimitStatus, MomentValue, Triplet};
use crate::par;
use crate::simulate::{cf_discrepancy, sample_mapped, SimConfig, SmallJumps};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use std::io::{Read, Write};
use std::path::PathBuf;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(name = "levy-conj", version, about = "Inversion and stochastic integral mappings of infinitely divisible laws")]
struct Cli {
    /// Worker threads for parallel operations.
    #[arg(long, global = true, env = "LEVY_CONJ_THREADS")]
    threads: Option<usize>,
    /// Output format; each command has its own default.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Tolerance for the semistable check and the validate round trip.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Output file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum What {
    Domain,
    Range,
    Class,
    Semistable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Level {
    /// Essentially definable
    De,
    /// Definable
    D,
    /// Absolutely definable
    D0,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    #[value(name = "L")]
    L,
    #[value(name = "Lstar")]
    Lstar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SmallArg {
    Drop,
    Gaussian,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Inversion μ ↦ μ′ of a triplet.
    Invert {
        #[arg(long = "in")]
        input: String,
    },
    /// Applies the mapping of a kernel to a triplet.
    Map {
        #[arg(long)]
        kernel: String,
        #[arg(long = "in")]
        input: String,
    },
    /// Applies the mapping repeatedly.
    Iterate {
        #[arg(long)]
        kernel: String,
        #[arg(long = "in")]
        input: String,
        #[arg(long, default_value_t = 2)]
        steps: usize,
    },
    /// Conjugate kernel h*(u) = h(1/u)u⁻⁴.
    Conjugate {
        #[arg(long)]
        kernel: String,
    },
    /// Domain, range, class or semistability checks.
    Check {
        #[arg(long, value_enum)]
        what: What,
        #[arg(long)]
        kernel: Option<String>,
        #[arg(long = "in")]
        input: Option<String>,
        /// L∞ spectrum; builds the triplet instead of --in.
        #[arg(long)]
        linf: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<f64>,
        #[arg(long, value_enum, default_value = "L")]
        variant: VariantArg,
        /// Domain level deciding the exit code.
        #[arg(long, value_enum, default_value = "de")]
        level: Level,
        /// Span b: cofactor for class checks, single span for semistable.
        #[arg(long)]
        span: Option<f64>,
    },
    /// Cumulant C(z) of a triplet, or of its image when --kernel is given.
    Charfn {
        #[arg(long = "in")]
        input: String,
        #[arg(long)]
        kernel: Option<String>,
        /// Points as "z1,z2;z1,z2".
        #[arg(long, allow_hyphen_values = true)]
        z: Option<String>,
        /// "lo:hi:n" along the first axis.
        #[arg(long, allow_hyphen_values = true, default_value = "-5:5:21")]
        grid: String,
    },
    /// Monte Carlo samples of ∫f(s)dX_s, or the cf discrepancy with --compare.
    Simulate {
        #[arg(long)]
        kernel: String,
        #[arg(long = "in")]
        input: String,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        #[arg(long)]
        q_max: Option<f64>,
        #[arg(long)]
        p_min: Option<f64>,
        #[arg(long, default_value_t = 1e-3)]
        epsilon: f64,
        #[arg(long, value_enum, default_value = "drop")]
        small_jumps: SmallArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        compare: bool,
        #[arg(long, allow_hyphen_values = true, default_value = "-5:5:41")]
        grid: String,
    },
    /// Validates a triplet (and optionally a kernel) and reports moments.
    Validate {
        #[arg(long = "in")]
        input: String,
        #[arg(long)]
        kernel: Option<String>,
    },
}

impl Cmd {
    fn name(&self) -> &'static str {
        match self {
            Cmd::Invert { .. } => "invert",
            Cmd::Map { .. } => "map",
            Cmd::Iterate { .. } => "iterate",
            Cmd::Conjugate { .. } => "conjugate",
            Cmd::Check { .. } => "check",
            Cmd::Charfn { .. } => "charfn",
            Cmd::Simulate { .. } => "simulate",
            Cmd::Validate { .. } => "validate",
        }
    }

    fn default_format(&self) -> Format {
        match self {
            Cmd::Charfn { .. } => Format::Csv,
            Cmd::Simulate { compare: false, .. } => Format::Csv,
            _ => Format::Json,
        }
    }
}

/// Maps a library error to the documented exit code.
pub fn exit_code(e: &LevyError) -> i32 {
    match e {
        LevyError::Inconclusive(_) => 2,
        LevyError::Numeric { .. } | LevyError::Resource(_) => 4,
        LevyError::NotDecomposable { .. } => 1,
        _ => 3,
    }
}

fn verdict_code(v: Verdict) -> i32 {
    match v {
        Verdict::Yes => 0,
        Verdict::No => 1,
        Verdict::Inconclusive => 2,
    }
}

/// Raw input documents, read before any computation.
#[derive(Default)]
struct Inputs {
    triplet: Option<Value>,
    kernel: Option<Value>,
    linf: Option<Value>,
}

fn read_doc(spec: &str, stdin: &mut dyn Read) -> Result<Value> {
    let (text, name) = if spec == "-" {
        let mut s = String::new();
        stdin
            .read_to_string(&mut s)
            .map_err(|e| LevyError::Parse(format!("stdin: {e}")))?;
        (s, "stdin".to_string())
    } else if spec.trim_start().starts_with('{') {
        (spec.to_string(), "inline".to_string())
    } else {
        let s = std::fs::read_to_string(spec)
            .map_err(|e| LevyError::Parse(format!("{spec}: {e}")))?;
        (s, spec.to_string())
    };
    let v = parse_json(&text, &name)?;
    // Accept documents previously emitted with a provenance wrapper.
    Ok(match (v.get("provenance"), v.get("result")) {
        (Some(_), Some(r)) => r.clone(),
        _ => v,
    })
}

fn load_inputs(cmd: &Cmd, stdin: &mut dyn Read) -> Result<Inputs> {
    let mut inp = Inputs::default();
    let (t, k, l): (Option<&String>, Option<&String>, Option<&String>) = match cmd {
        Cmd::Invert { input } => (Some(input), None, None),
        Cmd::Map { kernel, input } | Cmd::Iterate { kernel, input, .. } => (Some(input), Some(kernel), None),
        Cmd::Conjugate { kernel } => (None, Some(kernel), None),
        Cmd::Check { kernel, input, linf, .. } => (input.as_ref(), kernel.as_ref(), linf.as_ref()),
        Cmd::Charfn { input, kernel, .. } | Cmd::Validate { input, kernel } => (Some(input), kernel.as_ref(), None),
        Cmd::Simulate { kernel, input, .. } => (Some(input), Some(kernel), None),
    };
    if let Some(s) = t {
        inp.triplet = Some(read_doc(s, stdin)?);
    }
    if let Some(s) = k {
        inp.kernel = Some(read_doc(s, stdin)?);
    }
    if let Some(s) = l {
        inp.linf = Some(read_doc(s, stdin)?);
    }
    Ok(inp)
}

struct Outcome {
    result: Value,
    csv: Option<String>,
    code: i32,
}

impl Outcome {
    fn json(result: Value) -> Outcome {
        Outcome { result, csv: None, code: 0 }
    }
}

fn kernel_of(inp: &Inputs) -> Result<MappingKernel> {
    kernel_from_json(inp.kernel.as_ref().ok_or_else(|| LevyError::Argument("--kernel is required".into()))?)
}

fn triplet_of(inp: &Inputs) -> Result<Triplet> {
    triplet_from_json(inp.triplet.as_ref().ok_or_else(|| LevyError::Argument("--in is required".into()))?)
}

fn parse_grid(spec: &str, d: usize) -> Result<Vec<Vec<f64>>> {
    let bad = || LevyError::Argument(format!("grid {spec:?} must be lo:hi:n"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n == 0 {
        return Err(bad());
    }
    Ok(crate::simulate::line_grid(lo, hi, n)
        .into_iter()
        .map(|z| {
            let mut v = vec![0.0; d];
            v[0] = z[0];
            v
        })
        .collect())
}

fn parse_points(spec: &str, d: usize) -> Result<Vec<Vec<f64>>> {
    spec.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|p| {
            let v: Vec<f64> = p
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| LevyError::Argument(format!("bad point {p:?}")))?;
            if v.len() != d {
                return Err(LevyError::Dimension(v.len(), d));
            }
            Ok(v)
        })
        .collect()
}

fn csv_rows(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

fn fmt(x: f64) -> String {
    if x.is_finite() {
        format!("{x:?}")
    } else {
        num(x).as_str().unwrap_or("nan").to_string()
    }
}

fn triplet_csv(v: &Value) -> String {
    let header = ["component", "kind", "r", "value"].map(String::from);
    let mut rows = Vec::new();
    if let Some(levy) = v["levy"].as_array() {
        for (i, c) in levy.iter().enumerate() {
            for a in c["atoms"].as_array().into_iter().flatten() {
                rows.push(vec![i.to_string(), "atom".into(), a[0].to_string(), a[1].to_string()]);
            }
            let d = &c["density"];
            if let (Some(n), Some(vals)) = (d["nodes"].as_array(), d["values"].as_array()) {
                for (r, y) in n.iter().zip(vals) {
                    rows.push(vec![i.to_string(), "density".into(), r.to_string(), y.to_string()]);
                }
            } else if !d.is_null() {
                rows.push(vec![i.to_string(), "density".into(), String::new(), format!("\"{}\"", d.to_string().replace('"', "'"))]);
            }
        }
    }
    csv_rows(&header, rows)
}

fn evidence_csv(v: &Value) -> String {
    let header = ["name", "value", "note"].map(String::from);
    let rows = v["evidence"]
        .as_array()
        .into_iter()
        .flatten()
        .map(|e| vec![e["name"].as_str().unwrap_or("").to_string(), e["value"].to_string(), e["note"].as_str().unwrap_or("").replace(',', ";")]);
    csv_rows(&header, rows)
}

fn moment_json(t: &Triplet) -> Result<Value> {
    let m = moment_report(t)?;
    let vecs = |v: &Option<Vec<f64>>| v.as_ref().map(|x| x.iter().map(|&y| num(y)).collect::<Vec<_>>());
    let status = match m.weak_mean.status {
        LimitStatus::Exists => "exists",
        LimitStatus::ExistsAbsolutely => "exists_absolutely",
        LimitStatus::None => "none",
        LimitStatus::Inconclusive => "inconclusive",
    };
    let frac: Vec<Value> = m
        .fractional_moments
        .iter()
        .map(|(a, region, v)| {
            json!({
                "alpha": num(*a),
                "region": format!("{region:?}").to_lowercase(),
                "value": match v {
                    MomentValue::Finite(x) => num(*x),
                    MomentValue::Infinite => num(f64::INFINITY),
                    MomentValue::Inconclusive => json!("inconclusive"),
                },
            })
        })
        .collect();
    Ok(json!({
        "drift": vecs(&m.drift),
        "mean": vecs(&m.mean),
        "weak_mean": {"value": vecs(&m.weak_mean.value), "status": status},
        "fractional_moments": frac,
    }))
}

fn execute(cli: &Cli, inp: &Inputs) -> Result<Outcome> {
    match &cli.cmd {
        Cmd::Invert { .. } => {
            let t = invert(&triplet_of(inp)?)?;
            Ok(Outcome::json(triplet_to_json(&t)?))
        }
        Cmd::Map { .. } => {
            let t = apply_mapping(&kernel_of(inp)?, &triplet_of(inp)?)?;
            Ok(Outcome::json(triplet_to_json(&t)?))
        }
        Cmd::Iterate { steps, .. } => {
            let it = iterate_mapping(&kernel_of(inp)?, &triplet_of(inp)?, *steps)?;
            Ok(Outcome::json(json!({
                "triplet": triplet_to_json(&it.result)?,
                "steps": to_value(&it.reports)?,
            })))
        }
        Cmd::Conjugate { .. } => Ok(Outcome::json(kernel_to_json(&kernel_of(inp)?.conjugate_kernel()))),
        Cmd::Check { what, alpha, variant, level, span, .. } => check(cli, inp, *what, *alpha, *variant, *level, *span),
        Cmd::Charfn { kernel, z, grid, .. } => {
            let t = triplet_of(inp)?;
            let d = t.dim();
            let zs = match z {
                Some(p) => parse_points(p, d)?,
                None => parse_grid(grid, d)?,
            };
            let k = match kernel {
                Some(_) => Some(kernel_of(inp)?),
                None => None,
            };
            let vals = par::map(zs.len(), |i| match &k {
                Some(k) => mapped_cumulant_with_error(k, &t, &zs[i]),
                None => cumulant_with_error(&t, &zs[i]),
            });
            let vals = vals.into_iter().collect::<Result<Vec<_>>>()?;
            let mut header: Vec<String> = (1..=d).map(|i| format!("z_{i}")).collect();
            header.extend(["re_C", "im_C", "abs_error_estimate"].map(String::from));
            let rows: Vec<Vec<String>> = zs
                .iter()
                .zip(&vals)
                .map(|(z, v)| {
                    let mut r: Vec<String> = z.iter().map(|&x| fmt(x)).collect();
                    r.extend([fmt(v.value.re), fmt(v.value.im), fmt(v.error)]);
                    r
                })
                .collect();
            let result = json!(zs
                .iter()
                .zip(&vals)
                .map(|(z, v)| json!({"z": z, "re": num(v.value.re), "im": num(v.value.im), "error": num(v.error)}))
                .collect::<Vec<_>>());
            Ok(Outcome { result, csv: Some(csv_rows(&header, rows)), code: 0 })
        }
        Cmd::Simulate { n, step, q_max, p_min, epsilon, small_jumps, seed, compare, grid, .. } => {
            let k = kernel_of(inp)?;
            let t = triplet_of(inp)?;
            let cfg = SimConfig {
                n_samples: *n,
                step: *step,
                q_max: *q_max,
                p_min: *p_min,
                epsilon: *epsilon,
                small_jumps: match small_jumps {
                    SmallArg::Drop => SmallJumps::DropRecompensate,
                    SmallArg::Gaussian => SmallJumps::GaussianSubstitute,
                },
                seed: *seed,
            };
            if *compare {
                let zs = parse_grid(grid, t.dim())?;
                let rep = cf_discrepancy(&k, &t, &cfg, &zs)?;
                let d = t.dim();
                let mut header: Vec<String> = (1..=d).map(|i| format!("z_{i}")).collect();
                header.extend(["ecf_re", "ecf_im", "cf_re", "cf_im", "abs_diff", "stderr"].map(String::from));
                let rows = rep.rows.iter().map(|r| {
                    let mut v: Vec<String> = r.z.iter().map(|&x| fmt(x)).collect();
                    v.extend([r.ecf.re, r.ecf.im, r.analytic.re, r.analytic.im, r.abs_diff, r.stderr].map(fmt));
                    v
                });
                let csv = csv_rows(&header, rows);
                let result = to_value(&rep)?;
                Ok(Outcome { result, csv: Some(csv), code: 0 })
            } else {
                let b = sample_mapped(&k, &t, &cfg)?;
                let d = t.dim();
                let header: Vec<String> = (1..=d).map(|i| format!("x_{i}")).collect();
                let csv = csv_rows(&header, b.samples.iter().map(|x| x.iter().map(|&v| fmt(v)).collect()));
                let result = to_value(&b)?;
                Ok(Outcome { result, csv: Some(csv), code: 0 })
            }
        }
        Cmd::Validate { kernel, .. } => {
            let doc = inp.triplet.as_ref().ok_or_else(|| LevyError::Argument("--in is required".into()))?;
            let t = match triplet_from_json(doc) {
                Ok(t) => t,
                Err(e @ (LevyError::Validation(_) | LevyError::Dimension(..))) => {
                    return Ok(Outcome {
                        result: json!({"valid": false, "problems": [e.to_string()]}),
                        csv: None,
                        code: 3,
                    })
                }
                Err(e) => return Err(e),
            };
            let mut out = json!({
                "valid": true,
                "dimension": t.dim(),
                "id0": t.is_id0(),
                "moments": moment_json(&t)?,
            });
            if t.is_id0() {
                let tol = cli.tol.unwrap_or(1e-12);
                let back = invert(&invert(&t)?)?;
                out["inversion_round_trip"] = json!(triplets_close(&back, &t, tol, tol));
            }
            if kernel.is_some() {
                let k = kernel_of(inp)?;
                out["kernel"] = kernel_to_json(&k);
                out["domain"] = to_value(&check_domain(&k, &t))?;
            }
            Ok(Outcome::json(out))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn check(
    cli: &Cli,
    inp: &Inputs,
    what: What,
    alpha: Option<f64>,
    variant: VariantArg,
    level: Level,
    span: Option<f64>,
) -> Result<Outcome> {
    match what {
        What::Domain => {
            let rep = check_domain(&kernel_of(inp)?, &triplet_of(inp)?);
            let v = match level {
                Level::De => rep.in_de,
                Level::D => rep.in_d,
                Level::D0 => rep.in_d0,
            };
            let result = to_value(&rep)?;
            Ok(Outcome { csv: Some(evidence_csv(&result)), result, code: verdict_code(v) })
        }
        What::Range => {
            let rep = check_range(&kernel_of(inp)?, &triplet_of(inp)?)?;
            let result = to_value(&rep)?;
            let mut csv = String::from("ray,x,k\n");
            for f in &rep.k_functions {
                for (x, k) in f.x.iter().zip(&f.k) {
                    csv.push_str(&format!("{},{},{}\n", f.ray, fmt(*x), fmt(*k)));
                }
            }
            Ok(Outcome { result, csv: Some(csv), code: verdict_code(rep.verdict) })
        }
        What::Class => {
            let alpha = alpha.ok_or_else(|| LevyError::Argument("--alpha is required".into()))?;
            let variant = match variant {
                VariantArg::L => Variant::L,
                VariantArg::Lstar => Variant::Lstar,
            };
            let (t, spectrum) = match &inp.linf {
                Some(spec) => {
                    let l = build_l_infinity(&linf_from_json(spec)?)?;
                    let s: Vec<Value> = l.spectrum.iter().map(|(b, g)| json!({"beta": num(*b), "mass": num(*g)})).collect();
                    (l.triplet, Some(s))
                }
                None => (triplet_of(inp)?, None),
            };
            let rep = class_membership(&t, alpha, variant)?;
            let mut result = to_value(&rep)?;
            if let Some(s) = spectrum {
                result["spectrum"] = json!(s);
                result["triplet"] = triplet_to_json(&t)?;
            }
            if let Some(b) = span {
                match factor_decompose(&t, alpha, b, variant) {
                    Ok(c) => result["cofactor"] = triplet_to_json(&c)?,
                    Err(LevyError::NotDecomposable { ray, radius }) => {
                        result["cofactor"] = json!({"error": "negative", "ray": ray, "radius": num(radius)})
                    }
                    Err(e) => return Err(e),
                }
            }
            let mut csv = String::from("ray,verdict,worst_violation,location\n");
            for r in &rep.rays {
                csv.push_str(&format!("{},{:?},{},{}\n", r.ray, r.verdict, fmt(r.worst_violation), fmt(r.location)));
            }
            Ok(Outcome { result, csv: Some(csv), code: verdict_code(rep.verdict) })
        }
        What::Semistable => {
            let alpha = alpha.ok_or_else(|| LevyError::Argument("--alpha is required".into()))?;
            let t = triplet_of(inp)?;
            let spans: Vec<f64> = match span {
                Some(b) => vec![b],
                None => DEFAULT_SPANS.to_vec(),
            };
            let rep = check_semistable(&t, alpha, &spans, cli.tol.unwrap_or(1e-9))?;
            let pass = rep.spans.iter().all(|s| s.pass);
            let result = json!({
                "alpha": num(rep.alpha),
                "spans": rep.spans.iter().map(|s| json!({"b": num(s.b), "pass": s.pass, "max_rel_deviation": num(s.max_rel_deviation)})).collect::<Vec<_>>(),
                "stable": rep.stable,
                "max_rel_deviation": num(rep.max_rel_deviation),
            });
            let mut csv = String::from("b,pass,max_rel_deviation\n");
            for s in &rep.spans {
                csv.push_str(&format!("{},{},{}\n", fmt(s.b), s.pass, fmt(s.max_rel_deviation)));
            }
            Ok(Outcome { result, csv: Some(csv), code: verdict_code(Verdict::from_bool(pass)) })
        }
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| LevyError::Parse(e.to_string()))
}

fn provenance(cli: &Cli, argv: &[String], inp: &Inputs) -> Value {
    json!({
        "tool": "levy-conj",
        "version": VERSION,
        "command": cli.cmd.name(),
        "args": argv,
        "threads": cli.threads,
        "tol": cli.tol.map(num),
        "inputs": {"triplet": inp.triplet, "kernel": inp.kernel, "linf": inp.linf},
    })
}

/// Runs the CLI on the given arguments (including the program name).
pub fn run_with<I, T>(args: I, stdin: &mut dyn Read, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<String>,
{
    let argv: Vec<String> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    3
                }
            };
        }
    };
    let report = |stderr: &mut dyn Write, e: &LevyError| {
        let _ = writeln!(stderr, "error: {e}");
        exit_code(e)
    };
    let inp = match load_inputs(&cli.cmd, stdin) {
        Ok(i) => i,
        Err(e) => return report(stderr, &e),
    };
    let outcome = match par::with_threads(cli.threads, || execute(&cli, &inp)) {
        Ok(o) => o,
        Err(e) => return report(stderr, &e),
    };
    let format = cli.format.unwrap_or_else(|| cli.cmd.default_format());
    let prov = provenance(&cli, &argv[1.min(argv.len())..], &inp);
    let text = match format {
        Format::Json => {
            let doc = json!({"provenance": prov, "result": outcome.result});
            let mut s = serde_json::to_string_pretty(&doc).unwrap_or_default();
            s.push('\n');
            s
        }
        Format::Csv => {
            let body = match (&outcome.csv, &cli.cmd) {
                (Some(c), _) => c.clone(),
                (None, Cmd::Invert { .. } | Cmd::Map { .. }) => triplet_csv(&outcome.result),
                (None, Cmd::Iterate { .. }) => triplet_csv(&outcome.result["triplet"]),
                (None, _) => {
                    let mut s = String::from("key,value\n");
                    if let Some(o) = outcome.result.as_object() {
                        for (k, v) in o {
                            s.push_str(&format!("{k},\"{}\"\n", v.to_string().replace('"', "'")));
                        }
                    }
                    s
                }
            };
            let mut head = format!("# levy-conj {VERSION} {}\n", cli.cmd.name());
            head.push_str(&format!("# provenance {}\n", serde_json::to_string(&prov).unwrap_or_default()));
            head + &body
        }
    };
    let written = match &cli.out {
        Some(p) => std::fs::write(p, text.as_bytes()).map_err(|e| format!("{}: {e}", p.display())),
        None => stdout.write_all(text.as_bytes()).map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        let _ = writeln!(stderr, "error: cannot write output: {e}");
        return 3;
    }
    outcome.code
}

/// Runs the CLI with the process's standard streams.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<String>,
{
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdin.lock(), &mut stdout.lock(), &mut stderr.lock())
}
