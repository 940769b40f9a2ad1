//! JSON documents for triplets, kernels and `L∞` spectra.
//!
//! Non-finite numbers are written as the strings `"inf"`, `"-inf"` and `"nan"`
//! and accepted back in any numeric position.

use crate::classes::LInfSpec;
use crate::error::{LevyError, Result};
use crate::expr::Expr;
use crate::kernel::{build_kernel, KernelFamily, MappingKernel};
use crate::mapping::gridded;
use crate::measure::{
    AnalyticDensity, Density, Direction, GammaRepr, GridDensity, LevyMeasure, RadialPart, Tail,
    Triplet,
};
use crate::special::gamma;
use serde::{Deserialize, Deserializer, Serializer};
use serde_json::{json, Map, Value};

fn err(path: &str, msg: impl std::fmt::Display) -> LevyError {
    LevyError::Parse(format!("{path}: {msg}"))
}

/// Parses JSON text, reporting line and column on failure.
pub fn parse_json(text: &str, source: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| {
        LevyError::Parse(format!("{source}:{}:{}: {e}", e.line(), e.column()))
    })
}

pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn parse_special(s: &str) -> Option<f64> {
    match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" | "+infinity" => Some(f64::INFINITY),
        "-inf" | "-infinity" => Some(f64::NEG_INFINITY),
        "nan" => Some(f64::NAN),
        other => other.parse().ok(),
    }
}

pub fn as_f64(v: &Value, path: &str) -> Result<f64> {
    match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| err(path, "number out of range")),
        Value::String(s) => parse_special(s).ok_or_else(|| err(path, format!("not a number: {s:?}"))),
        _ => Err(err(path, format!("expected a number, found {v}"))),
    }
}

fn field<'a>(obj: &'a Value, key: &str, path: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| err(path, format!("missing field {key:?}")))
}

fn f64_field(obj: &Value, key: &str, path: &str) -> Result<f64> {
    as_f64(field(obj, key, path)?, &format!("{path}.{key}"))
}

fn f64_or(obj: &Value, key: &str, path: &str, default: f64) -> Result<f64> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(default),
        Some(v) => as_f64(v, &format!("{path}.{key}")),
    }
}

fn array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| err(path, "expected an array"))
}

fn f64_vec(v: &Value, path: &str) -> Result<Vec<f64>> {
    array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, x)| as_f64(x, &format!("{path}[{i}]")))
        .collect()
}

fn str_field<'a>(obj: &'a Value, key: &str, path: &str) -> Result<&'a str> {
    field(obj, key, path)?
        .as_str()
        .ok_or_else(|| err(&format!("{path}.{key}"), "expected a string"))
}

/// `serialize_with` helper for `f64` fields that may be infinite.
pub fn ser_f64<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else if x.is_nan() {
        s.serialize_str("nan")
    } else if *x > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

/// `deserialize_with` counterpart of [`ser_f64`]; `null` reads as NaN.
pub fn de_f64<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    let v = Value::deserialize(d)?;
    match &v {
        Value::Null => Ok(f64::NAN),
        _ => as_f64(&v, "value").map_err(serde::de::Error::custom),
    }
}

// ---------------------------------------------------------------------------
// Triplets

fn tail_to_json(t: Tail) -> Value {
    match t {
        Tail::Power(th) => json!({ "power": num(th) }),
        Tail::Zero => json!("zero"),
    }
}

fn tail_from_json(v: &Value, path: &str) -> Result<Tail> {
    match v {
        Value::String(s) if s == "zero" => Ok(Tail::Zero),
        Value::Object(_) => Ok(Tail::Power(f64_field(v, "power", path)?)),
        _ => Err(err(path, "tail must be \"zero\" or {\"power\": theta}")),
    }
}

fn density_to_json(d: &Density) -> Result<Value> {
    Ok(match d {
        Density::PowerLaw { c, beta, r_lo, r_hi } => json!({
            "type": "power_law", "c": num(*c), "beta": num(*beta),
            "r_lo": num(*r_lo), "r_hi": num(*r_hi),
        }),
        Density::Analytic(a) => match &a.expr {
            Some(e) => json!({
                "type": "analytic", "expr": e.source(),
                "r_lo": num(a.r_lo), "r_hi": num(a.r_hi),
                "theta0": num(a.theta0), "theta_inf": num(a.theta_inf),
                "breaks": a.breaks.iter().map(|&b| num(b)).collect::<Vec<_>>(),
            }),
            None => {
                return Err(LevyError::Unsupported(
                    "analytic density without an expression; grid it first".into(),
                ))
            }
        },
        Density::Grid(g) => json!({
            "type": "grid",
            "nodes": g.nodes.iter().map(|&x| num(x)).collect::<Vec<_>>(),
            "values": g.values.iter().map(|&x| num(x)).collect::<Vec<_>>(),
            "lo_tail": tail_to_json(g.lo_tail),
            "hi_tail": tail_to_json(g.hi_tail),
        }),
    })
}

fn density_from_json(v: &Value, path: &str) -> Result<Density> {
    let kind = str_field(v, "type", path)?;
    match kind {
        "power_law" => Ok(Density::power_law(
            f64_field(v, "c", path)?,
            f64_field(v, "beta", path)?,
            f64_or(v, "r_lo", path, 0.0)?,
            f64_or(v, "r_hi", path, f64::INFINITY)?,
        )),
        "analytic" => {
            let src = str_field(v, "expr", path)?;
            let e = Expr::parse(src).map_err(|e| err(&format!("{path}.expr"), e))?;
            let breaks = match v.get("breaks") {
                Some(b) => f64_vec(b, &format!("{path}.breaks"))?,
                None => Vec::new(),
            };
            let d = AnalyticDensity::from_expr(
                e,
                f64_or(v, "r_lo", path, 0.0)?,
                f64_or(v, "r_hi", path, f64::INFINITY)?,
                f64_field(v, "theta0", path)?,
                f64_field(v, "theta_inf", path)?,
            )
            .with_breaks(breaks);
            Ok(Density::Analytic(d))
        }
        "grid" => {
            let g = GridDensity::new(
                f64_vec(field(v, "nodes", path)?, &format!("{path}.nodes"))?,
                f64_vec(field(v, "values", path)?, &format!("{path}.values"))?,
                tail_from_json(field(v, "lo_tail", path)?, &format!("{path}.lo_tail"))?,
                tail_from_json(field(v, "hi_tail", path)?, &format!("{path}.hi_tail"))?,
            )
            .map_err(|e| err(path, e))?;
            Ok(Density::Grid(g))
        }
        other => Err(err(&format!("{path}.type"), format!("unknown density type {other:?}"))),
    }
}

/// Serializes a triplet. Densities without a closed form are gridded.
pub fn triplet_to_json(t: &Triplet) -> Result<Value> {
    let t = gridded(t)?;
    let mut levy = Vec::new();
    for c in &t.nu.components {
        let mut obj = Map::new();
        obj.insert("xi".into(), json!(c.xi.as_slice().iter().map(|&x| num(x)).collect::<Vec<_>>()));
        obj.insert("weight".into(), num(c.weight));
        obj.insert(
            "atoms".into(),
            json!(c.radial.atoms.iter().map(|&(r, m)| json!([num(r), num(m)])).collect::<Vec<_>>()),
        );
        if let Some(d) = &c.radial.density {
            obj.insert("density".into(), density_to_json(d)?);
        }
        levy.push(Value::Object(obj));
    }
    Ok(json!({
        "dimension": t.dim(),
        "gaussian": t.a.iter().map(|row| row.iter().map(|&x| num(x)).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "gamma": t.gamma.iter().map(|&x| num(x)).collect::<Vec<_>>(),
        "gamma_repr": t.repr.name(),
        "levy": levy,
    }))
}

/// Reads a triplet in any `gamma_repr` and normalizes it to `cut1`.
pub fn triplet_from_json(v: &Value) -> Result<Triplet> {
    let root = "$";
    if !v.is_object() {
        return Err(err(root, "expected an object"));
    }
    let gamma = f64_vec(field(v, "gamma", root)?, "$.gamma")?;
    let d = match v.get("dimension") {
        Some(x) => {
            let d = as_f64(x, "$.dimension")?;
            if d < 1.0 || d.fract() != 0.0 {
                return Err(err("$.dimension", "must be a positive integer"));
            }
            d as usize
        }
        None => gamma.len(),
    };
    if gamma.len() != d {
        return Err(err("$.gamma", format!("length {} differs from dimension {d}", gamma.len())));
    }
    let a = match v.get("gaussian") {
        None | Some(Value::Null) => vec![vec![0.0; d]; d],
        Some(g) => array(g, "$.gaussian")?
            .iter()
            .enumerate()
            .map(|(i, row)| f64_vec(row, &format!("$.gaussian[{i}]")))
            .collect::<Result<Vec<_>>>()?,
    };
    let repr = match v.get("gamma_repr") {
        None => GammaRepr::Cut1,
        Some(r) => {
            let s = r.as_str().ok_or_else(|| err("$.gamma_repr", "expected a string"))?;
            GammaRepr::from_name(s)
                .ok_or_else(|| err("$.gamma_repr", format!("unknown representation {s:?}")))?
        }
    };
    let mut nu = LevyMeasure::zero(d);
    if let Some(levy) = v.get("levy") {
        for (i, c) in array(levy, "$.levy")?.iter().enumerate() {
            let p = format!("$.levy[{i}]");
            let xi = f64_vec(field(c, "xi", &p)?, &format!("{p}.xi"))?;
            let xi = Direction::new(xi).map_err(|e| err(&format!("{p}.xi"), e))?;
            let weight = f64_or(c, "weight", &p, 1.0)?;
            let mut atoms = Vec::new();
            if let Some(at) = c.get("atoms") {
                for (j, pair) in array(at, &format!("{p}.atoms"))?.iter().enumerate() {
                    let q = format!("{p}.atoms[{j}]");
                    let rm = f64_vec(pair, &q)?;
                    if rm.len() != 2 {
                        return Err(err(&q, "atom must be [radius, mass]"));
                    }
                    atoms.push((rm[0], rm[1]));
                }
            }
            let density = match c.get("density") {
                None | Some(Value::Null) => None,
                Some(dv) => Some(density_from_json(dv, &format!("{p}.density"))?),
            };
            nu = nu.push(xi, weight, RadialPart::new(atoms, density));
        }
    }
    Triplet::from_repr(a, nu, gamma, repr)
}

// ---------------------------------------------------------------------------
// Kernels

fn family_name(f: &KernelFamily) -> &'static str {
    match f {
        KernelFamily::BarPhi { .. } => "bar_phi",
        KernelFamily::LambdaQ { .. } => "lambda_q",
        KernelFamily::Psi { .. } => "psi",
        KernelFamily::GaussTypeG => "gauss",
        KernelFamily::CustomC { .. } => "custom_c",
        KernelFamily::CustomD { .. } => "custom_d",
    }
}

fn fmt_num(x: f64) -> String {
    let s = format!("{x}");
    if x < 0.0 {
        format!("({s})")
    } else {
        s
    }
}

fn power_term(base: &str, e: f64) -> Option<String> {
    if e == 0.0 {
        None
    } else if e == 1.0 {
        Some(base.to_string())
    } else {
        Some(format!("{base}^{}", fmt_num(e)))
    }
}

fn product(coef: f64, factors: Vec<Option<String>>) -> String {
    let mut parts: Vec<String> = Vec::new();
    if (coef - 1.0).abs() > 1e-15 {
        parts.push(fmt_num(coef));
    }
    parts.extend(factors.into_iter().flatten());
    if parts.is_empty() {
        "1".into()
    } else {
        parts.join("*")
    }
}

/// `h` as an expression in `u`, valid on the kernel's support.
pub fn kernel_formula(k: &MappingKernel) -> String {
    let conj = k.conjugate;
    match &k.family {
        KernelFamily::BarPhi { p, alpha } => {
            let lead = if conj { "(1-1/u)" } else { "(1-u)" };
            let e = if conj { alpha - 3.0 } else { -alpha - 1.0 };
            product(1.0 / gamma(*p), vec![power_term(lead, p - 1.0), power_term("u", e)])
        }
        KernelFamily::LambdaQ { q, alpha } => {
            let lead = if conj { "log(u)" } else { "(-log(u))" };
            let e = if conj { alpha - 3.0 } else { -alpha - 1.0 };
            product(1.0 / gamma(*q), vec![power_term(lead, q - 1.0), power_term("u", e)])
        }
        KernelFamily::Psi { alpha, beta } => {
            let (e, inner) = if conj {
                (alpha - 3.0, format!("exp(-u^{})", fmt_num(-beta)))
            } else {
                (-alpha - 1.0, format!("exp(-u^{})", fmt_num(*beta)))
            };
            product(1.0, vec![power_term("u", e), Some(inner)])
        }
        KernelFamily::GaussTypeG => {
            if conj {
                "exp(-u^(-2)/2)/sqrt(2*pi)*u^(-4)".into()
            } else {
                "exp(-u^2/2)/sqrt(2*pi)".into()
            }
        }
        KernelFamily::CustomC { h, .. } | KernelFamily::CustomD { h } => {
            if conj {
                h.rewrite("1/u", "({})*u^(-4)")
                    .map(|e| e.source().to_string())
                    .unwrap_or_else(|_| h.source().to_string())
            } else {
                h.source().to_string()
            }
        }
    }
}

pub fn kernel_to_json(k: &MappingKernel) -> Value {
    let mut obj = Map::new();
    obj.insert("family".into(), json!(family_name(&k.family)));
    match &k.family {
        KernelFamily::BarPhi { p, alpha } => {
            obj.insert("p".into(), num(*p));
            obj.insert("alpha".into(), num(*alpha));
        }
        KernelFamily::LambdaQ { q, alpha } => {
            obj.insert("q".into(), num(*q));
            obj.insert("alpha".into(), num(*alpha));
        }
        KernelFamily::Psi { alpha, beta } => {
            obj.insert("alpha".into(), num(*alpha));
            obj.insert("beta".into(), num(*beta));
        }
        KernelFamily::GaussTypeG => {}
        KernelFamily::CustomC { h, a, b } => {
            obj.insert("a".into(), num(*a));
            obj.insert("b".into(), num(*b));
            obj.insert("h".into(), json!(h.source()));
        }
        KernelFamily::CustomD { h } => {
            obj.insert("h".into(), json!(h.source()));
        }
    }
    obj.insert("conjugate".into(), json!(k.conjugate));
    obj.insert("formula".into(), json!(kernel_formula(k)));
    obj.insert(
        "support".into(),
        if k.two_sided {
            json!([num(f64::NEG_INFINITY), num(f64::INFINITY)])
        } else {
            json!([num(k.a), num(k.b)])
        },
    );
    obj.insert("condition".into(), json!(k.condition.label()));
    obj.insert("c".into(), num(k.c));
    obj.insert("kappa0".into(), num(k.kappa0));
    obj.insert("kappa_inf".into(), num(k.kappa_inf));
    Value::Object(obj)
}

pub fn kernel_from_json(v: &Value) -> Result<MappingKernel> {
    let root = "$";
    let name = str_field(v, "family", root)?;
    let expr = |key: &str| -> Result<Expr> {
        Expr::parse(str_field(v, key, root)?).map_err(|e| err(&format!("$.{key}"), e))
    };
    let family = match name {
        "bar_phi" => KernelFamily::BarPhi {
            p: f64_field(v, "p", root)?,
            alpha: f64_field(v, "alpha", root)?,
        },
        "lambda_q" => KernelFamily::LambdaQ {
            q: f64_field(v, "q", root)?,
            alpha: f64_field(v, "alpha", root)?,
        },
        "psi" => KernelFamily::Psi {
            alpha: f64_field(v, "alpha", root)?,
            beta: f64_field(v, "beta", root)?,
        },
        "gauss" | "gauss_type_g" => KernelFamily::GaussTypeG,
        "custom_c" => KernelFamily::CustomC {
            h: expr("h")?,
            a: f64_or(v, "a", root, 0.0)?,
            b: f64_or(v, "b", root, f64::INFINITY)?,
        },
        "custom_d" => KernelFamily::CustomD { h: expr("h")? },
        other => return Err(err("$.family", format!("unknown kernel family {other:?}"))),
    };
    let k = build_kernel(family)?;
    let conj = match v.get("conjugate") {
        None | Some(Value::Null) => false,
        Some(Value::Bool(b)) => *b,
        Some(_) => return Err(err("$.conjugate", "expected a boolean")),
    };
    Ok(if conj { k.conjugate_kernel() } else { k })
}

pub fn linf_from_json(v: &Value) -> Result<LInfSpec> {
    LInfSpec::deserialize(v).map_err(|e| err("$", e))
}
