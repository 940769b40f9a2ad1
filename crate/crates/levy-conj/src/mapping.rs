//! The mappings `Λ_h` on triplets: domain checks, the transform itself,
//! iteration and range tests.

use crate::charfn::CumulantPlan;
use crate::classes::{completely_monotone_test, order_test, OrderMode, OrderOutcome, Sampled};
use crate::error::{LevyError, Result};
use crate::kernel::{KernelFamily, MappingKernel};
use crate::measure::{
    convert_gamma, integrate_log_scale, levy_integral, limit_protocol, moment, moment_report, norm, power_integral,
    AnalyticDensity, Component, Density, GammaRepr, Growth, GridDensity, Integral, LevyMeasure, Limit,
    LimitStatus, RadialPart, RadialRange, Region, Tail, Triplet, LEVY_TOL, LIMIT_CUTOFFS,
};
use crate::quad::{self, Tol, V3};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Yes,
    No,
    Inconclusive,
}

impl Verdict {
    /// Conjunction: any `No` wins, then any `Inconclusive`.
    pub fn and(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Verdict::No, _) | (_, Verdict::No) => Verdict::No,
            (Verdict::Inconclusive, _) | (_, Verdict::Inconclusive) => Verdict::Inconclusive,
            _ => Verdict::Yes,
        }
    }

    pub fn from_bool(b: bool) -> Verdict {
        if b {
            Verdict::Yes
        } else {
            Verdict::No
        }
    }
}

/// A named quantity behind a verdict. `value` is `+∞` for divergent
/// integrals and NaN when it could not be decided.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub name: String,
    #[serde(serialize_with = "crate::io::ser_f64", deserialize_with = "crate::io::de_f64")]
    pub value: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl Evidence {
    fn new(name: impl Into<String>, value: f64, note: impl Into<String>) -> Evidence {
        Evidence {
            name: name.into(),
            value,
            note: note.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainReport {
    pub in_de: Verdict,
    pub in_d: Verdict,
    pub in_d0: Verdict,
    pub evidence: Vec<Evidence>,
}

impl DomainReport {
    fn all(v: Verdict, evidence: Vec<Evidence>) -> DomainReport {
        DomainReport {
            in_de: v,
            in_d: v,
            in_d0: v,
            evidence,
        }
    }

    /// Enforces `𝔇⁰ ⊂ 𝔇 ⊂ 𝔇ᵉ` on the verdicts.
    fn nested(in_de: Verdict, in_d: Verdict, in_d0: Verdict, evidence: Vec<Evidence>) -> DomainReport {
        let in_d = in_d.and(in_de);
        let in_d0 = in_d0.and(in_d);
        DomainReport {
            in_de,
            in_d,
            in_d0,
            evidence,
        }
    }
}

fn verdict_of(name: &str, r: Result<Integral>, ev: &mut Vec<Evidence>) -> Verdict {
    match r {
        Ok(Integral::Finite { value, .. }) => {
            ev.push(Evidence::new(name, value, ""));
            Verdict::Yes
        }
        Ok(Integral::Infinite) => {
            ev.push(Evidence::new(name, f64::INFINITY, "diverges"));
            Verdict::No
        }
        Err(e) => {
            ev.push(Evidence::new(name, f64::NAN, e.to_string()));
            Verdict::Inconclusive
        }
    }
}

fn has_gaussian(t: &Triplet) -> bool {
    t.a.iter().flatten().any(|x| *x != 0.0)
}

/// Exponent of the logarithmic weight in the criteria: `q` for `Λ_{q,α}`,
/// one otherwise.
fn log_weight(k: &MappingKernel) -> (f64, bool) {
    match k.family {
        KernelFamily::LambdaQ { q, .. } => (q, true),
        _ => (1.0, false),
    }
}

const ZERO_TOL: f64 = 1e-8;

fn is_zero_vec(v: &[f64], scale: f64) -> bool {
    v.iter().all(|x| x.abs() <= ZERO_TOL * scale.max(1.0))
}

/// `𝔇ᵉ` criterion of a named family; `conj` selects the mirrored one.
fn named_de(k: &MappingKernel, rho: &Triplet, alpha: f64, ev: &mut Vec<Evidence>) -> Verdict {
    let (q, lambda) = log_weight(k);
    let nu = &rho.nu;
    if alpha < 0.0 {
        ev.push(Evidence::new("alpha", alpha, "alpha < 0: every law is in the domain"));
        return Verdict::Yes;
    }
    if !k.conjugate {
        if alpha == 0.0 {
            let r = levy_integral(nu, &|r, _| r.ln().powf(q), Growth::new(0.0, 0.0, 0.0, q), Region::Outer);
            return verdict_of(&format!("∫_{{|x|>1}} (log|x|)^{q} ν(dx)"), r, ev);
        }
        if lambda {
            let region = Region::Range(RadialRange::half_open(2.0, f64::INFINITY));
            let r = levy_integral(
                nu,
                &|r, _| r.ln().powf(q - 1.0) * r.powf(alpha),
                Growth::new(alpha, 0.0, alpha, q - 1.0),
                region,
            );
            return verdict_of(&format!("∫_{{|x|>2}} (log|x|)^{} |x|^{alpha} ν(dx)", q - 1.0), r, ev);
        }
        let r = moment(nu, alpha, Region::Outer);
        return verdict_of(&format!("∫_{{|x|>1}} |x|^{alpha} ν(dx)"), r, ev);
    }
    if has_gaussian(rho) {
        ev.push(Evidence::new("gaussian part", 1.0, "alpha >= 0 requires A = 0"));
        return Verdict::No;
    }
    if alpha == 0.0 {
        let r = levy_integral(
            nu,
            &|r, _| (-r.ln()).powf(q) * r * r,
            Growth::new(2.0, q, 2.0, 0.0),
            Region::InnerOpen,
        );
        return verdict_of(&format!("∫_{{|x|<1}} (−log|x|)^{q} |x|² ν(dx)"), r, ev);
    }
    if lambda {
        let region = Region::Range(RadialRange {
            lo: 0.0,
            lo_closed: true,
            hi: 0.5,
            hi_closed: false,
        });
        let r = levy_integral(
            nu,
            &|r, _| (-r.ln()).powf(q - 1.0) * r.powf(2.0 - alpha),
            Growth::new(2.0 - alpha, q - 1.0, 2.0 - alpha, 0.0),
            region,
        );
        return verdict_of(
            &format!("∫_{{|x|<1/2}} (−log|x|)^{} |x|^{} ν(dx)", q - 1.0, 2.0 - alpha),
            r,
            ev,
        );
    }
    let r = moment(nu, 2.0 - alpha, Region::InnerOpen);
    verdict_of(&format!("∫_{{|x|<1}} |x|^{} ν(dx)", 2.0 - alpha), r, ev)
}

/// Whether the mean (forward) or drift (conjugate) of `rho` vanishes.
fn location_zero(rho: &Triplet, conj: bool, ev: &mut Vec<Evidence>) -> Verdict {
    let (repr, name) = if conj {
        (GammaRepr::Drift, "drift")
    } else {
        (GammaRepr::Mean, "mean")
    };
    match convert_gamma(rho, repr) {
        Ok(t) => {
            let scale = rho.gamma.iter().fold(1.0f64, |m, g| m.max(g.abs()));
            let n = norm(&t.gamma);
            ev.push(Evidence::new(format!("|{name}|"), n, ""));
            Verdict::from_bool(is_zero_vec(&t.gamma, scale))
        }
        Err(LevyError::ReprUnavailable(_)) => {
            ev.push(Evidence::new(format!("|{name}|"), f64::INFINITY, "does not exist"));
            Verdict::No
        }
        Err(e) => {
            ev.push(Evidence::new(format!("|{name}|"), f64::NAN, e.to_string()));
            Verdict::Inconclusive
        }
    }
}

/// Outcome of the partial-limit protocol for the `α = 1` criteria.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaOneLimits {
    pub plain: Limit,
    pub absolute: Limit,
}

/// `lim_{r→∞} ∫_1^r (log s)^{q−1}s⁻¹ds ∫_{|x|>s} x ν(dx)` (forward) or
/// `lim_{r↓0} ∫_r^1 (−log s)^{q−1}s⁻¹ds ∫_{|x|<s} x ν(dx)` (conjugate), and the
/// same with the norm of the inner vector, judged from partials at the cut-offs
/// `10^{±k}`.
pub fn alpha_one_limits(k: &MappingKernel, rho: &Triplet) -> AlphaOneLimits {
    let (q, _) = log_weight(k);
    let conj = k.conjugate;
    let nu = &rho.nu;
    let d = nu.dim;
    let breaks: Vec<f64> = radii_of(nu).into_iter().map(|r| r.ln()).collect();
    // ∫_{r>s} r ν_ξ(dr), or ∫_{r<s} for the conjugate side.
    let side_moment = |part: &RadialPart, s: f64| -> f64 {
        let mut v: f64 = part
            .atoms
            .iter()
            .filter(|(r, _)| if conj { *r < s } else { *r > s })
            .map(|(r, m)| r * m)
            .sum();
        if let Some(den) = &part.density {
            let (lo, hi) = den.support();
            let (a, b) = if conj { (lo, hi.min(s)) } else { (lo.max(s), hi) };
            if b > a {
                let qd = integrate_log_scale(|r| r * den.eval(r), a, b, &den.breakpoints(), LEVY_TOL);
                v += if qd.converged || qd.error <= 1e-8 * qd.value.abs().max(1e-300) {
                    qd.value
                } else {
                    f64::NAN
                };
            }
        }
        v
    };
    let vec_at = |y: f64| -> Vec<f64> {
        let s = y.exp();
        let mut v = vec![0.0; d];
        for c in &nu.components {
            let m = c.weight * side_moment(&c.radial, s);
            for (o, x) in v.iter_mut().zip(c.xi.as_slice()) {
                *o += m * x;
            }
        }
        v
    };
    let weight = |y: f64| {
        let w = y.abs();
        if q == 1.0 {
            1.0
        } else {
            w.powf(q - 1.0)
        }
    };
    let tol = Tol::new(1e-15, 1e-11);
    let mut plain: Vec<Vec<f64>> = vec![Vec::new(); d];
    let mut absolute = Vec::new();
    let mut acc = vec![0.0; d];
    let mut acc_abs = 0.0;
    let mut y0 = 0.0;
    for &cut in &LIMIT_CUTOFFS {
        let y1 = if conj { -cut.ln() } else { cut.ln() };
        let mut pts = vec![y0, y1];
        pts.extend(breaks.iter().copied().filter(|b| (*b - y0) * (*b - y1) < 0.0));
        pts.sort_by(f64::total_cmp);
        if conj {
            pts.reverse();
        }
        let sgn = if conj { -1.0 } else { 1.0 };
        for c0 in (0..d).step_by(3) {
            let qv = quad::integrate_breaks(
                |y: f64| {
                    let v = vec_at(y);
                    let w = weight(y) * sgn;
                    let mut out = [0.0; 3];
                    for (i, o) in out.iter_mut().enumerate() {
                        if c0 + i < d {
                            *o = w * v[c0 + i];
                        }
                    }
                    V3(out)
                },
                &pts,
                tol,
            );
            for i in 0..3.min(d - c0) {
                acc[c0 + i] += qv.value.0[i];
            }
        }
        let qa = quad::integrate_breaks(|y: f64| weight(y) * sgn * norm(&vec_at(y)), &pts, tol);
        acc_abs += qa.value;
        for i in 0..d {
            plain[i].push(acc[i]);
        }
        absolute.push(acc_abs);
        y0 = y1;
    }
    let mut combined = Limit::Exists(0.0);
    let mut sq = 0.0;
    for p in &plain {
        match limit_protocol(p) {
            Limit::Exists(v) => sq += v * v,
            Limit::Diverges => combined = Limit::Diverges,
            Limit::Inconclusive => {
                if combined != Limit::Diverges {
                    combined = Limit::Inconclusive
                }
            }
        }
    }
    if let Limit::Exists(_) = combined {
        combined = Limit::Exists(sq.sqrt());
    }
    AlphaOneLimits {
        plain: combined,
        absolute: limit_protocol(&absolute),
    }
}

fn limit_verdict(name: &str, l: Limit, ev: &mut Vec<Evidence>) -> Verdict {
    match l {
        Limit::Exists(v) => {
            ev.push(Evidence::new(name, v, "limit exists"));
            Verdict::Yes
        }
        Limit::Diverges => {
            ev.push(Evidence::new(name, f64::INFINITY, "diverges"));
            Verdict::No
        }
        Limit::Inconclusive => {
            ev.push(Evidence::new(name, f64::NAN, "partials do not settle"));
            Verdict::Inconclusive
        }
    }
}

fn named_domain(k: &MappingKernel, rho: &Triplet, alpha: f64) -> DomainReport {
    let mut ev = Vec::new();
    let de = named_de(k, rho, alpha, &mut ev);
    let conj = k.conjugate;
    if alpha < 1.0 {
        return DomainReport::nested(de, de, de, ev);
    }
    if alpha > 1.0 {
        let loc = if de == Verdict::No {
            Verdict::No
        } else {
            location_zero(rho, conj, &mut ev)
        };
        let d = de.and(loc);
        return DomainReport::nested(de, d, d, ev);
    }
    if de == Verdict::No {
        return DomainReport::all(Verdict::No, ev);
    }
    let (q, lambda) = log_weight(k);
    if lambda && q < 1.0 {
        ev.push(Evidence::new("q", q, "alpha = 1 with q < 1 has no known description"));
        return DomainReport::nested(de, Verdict::Inconclusive, Verdict::Inconclusive, ev);
    }
    let loc = location_zero(rho, conj, &mut ev);
    let lim = alpha_one_limits(k, rho);
    let what = if conj { "∫_r^1 s⁻¹ds∫_{|x|<s}xν" } else { "∫_1^r s⁻¹ds∫_{|x|>s}xν" };
    let plain = limit_verdict(&format!("limit of {what}"), lim.plain, &mut ev);
    let absolute = limit_verdict(&format!("limit of |{what}|"), lim.absolute, &mut ev);
    let d = loc.and(plain);
    let d0 = loc.and(absolute);
    DomainReport::nested(de, d, d0, ev)
}

/// Points `±e_i`, `±3e_i` at which custom kernels are probed.
fn probe_points(d: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for i in 0..d {
        for s in [1.0, -1.0, 3.0, -3.0] {
            let mut z = vec![0.0; d];
            z[i] = s;
            out.push(z);
        }
    }
    out
}

fn custom_domain(k: &MappingKernel, rho: &Triplet) -> DomainReport {
    let mut ev = Vec::new();
    if has_gaussian(rho) && !k.condition.c1 {
        ev.push(Evidence::new("gaussian part", 1.0, "∫h(u)u²du diverges, so A must vanish"));
        return DomainReport::all(Verdict::No, ev);
    }
    let plan = match CumulantPlan::new(rho) {
        Ok(p) => p,
        Err(e) => {
            ev.push(Evidence::new("cumulant", f64::NAN, e.to_string()));
            return DomainReport::all(Verdict::Inconclusive, ev);
        }
    };
    let mut verdict = Verdict::Yes;
    for z in probe_points(rho.dim()) {
        let failed = std::sync::atomic::AtomicBool::new(false);
        let q = k.integrate(
            |t: f64| {
                let tz: Vec<f64> = z.iter().map(|x| t * x).collect();
                match plan.eval(&tz) {
                    Ok(c) => c.value.norm(),
                    Err(_) => {
                        failed.store(true, std::sync::atomic::Ordering::Relaxed);
                        0.0
                    }
                }
            },
            &[],
            Tol::new(1e-14, 1e-9),
        );
        let ok = !failed.into_inner()
            && q.value.is_finite()
            && (q.converged || q.error <= 1e-6 * q.value.abs().max(1.0));
        ev.push(Evidence::new(
            format!("∫h(t)|C_ρ(tz)|dt at z={z:?}"),
            if ok { q.value } else { f64::NAN },
            if ok { "" } else { "quadrature does not settle" },
        ));
        if !ok {
            verdict = Verdict::Inconclusive;
        }
    }
    DomainReport::all(verdict, ev)
}

/// Decides `ρ ∈ 𝔇ᵉ(Λ_h)`, `𝔇(Λ_h)` and `𝔇⁰(Λ_h)` from moment criteria.
pub fn check_domain(k: &MappingKernel, rho: &Triplet) -> DomainReport {
    if k.two_sided {
        let ev = vec![Evidence::new(
            "condition",
            1.0,
            "two-sided kernel: Λ_hρ is absolutely definable for every ρ",
        )];
        return DomainReport::all(Verdict::Yes, ev);
    }
    match k.family.alpha() {
        Some(alpha) => named_domain(k, rho, alpha),
        None => custom_domain(k, rho),
    }
}

// ---------------------------------------------------------------------------
// The transform

const DENS_TOL: Tol = Tol::new(1e-300, 1e-12).with_limit(4000);
const GAMMA_TOL: Tol = Tol::new(1e-15, 1e-12);

/// Radii where a radial part is non-smooth: atoms, support ends, breaks.
fn part_radii(part: &RadialPart) -> Vec<f64> {
    let mut out: Vec<f64> = part.atoms.iter().map(|a| a.0).collect();
    if let Some(d) = &part.density {
        let (lo, hi) = d.support();
        out.push(lo);
        out.push(hi);
        out.extend(d.breakpoints());
    }
    out.retain(|r| *r > 0.0 && r.is_finite());
    out
}

fn radii_of(nu: &LevyMeasure) -> Vec<f64> {
    let mut out: Vec<f64> = nu.components.iter().flat_map(|c| part_radii(&c.radial)).collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// `|t|`-range of one side of the kernel.
fn side_range(k: &MappingKernel) -> (f64, f64) {
    if k.two_sided {
        (0.0, f64::INFINITY)
    } else {
        (k.a, k.b)
    }
}

/// `∫_{t>0} h(sign·t) t^β dt`.
fn side_moment(k: &MappingKernel, beta: f64, sign: f64) -> f64 {
    if !k.two_sided {
        return k.moment(beta);
    }
    if k.family == KernelFamily::GaussTypeG {
        // ½E|Z|^e for the standard normal Z
        let e = if k.conjugate { 2.0 - beta } else { beta };
        if e <= -1.0 {
            return f64::INFINITY;
        }
        let ln = 0.5 * e * 2f64.ln() + crate::special::ln_gamma(0.5 * (e + 1.0)) - 0.5 * std::f64::consts::PI.ln();
        return 0.5 * ln.exp();
    }
    let q = k.integrate_side(&|t: f64| t.abs().powf(beta), sign, &[], Tol::new(1e-15, 1e-12));
    if q.value.is_finite() && q.converged {
        q.value
    } else {
        f64::INFINITY
    }
}

/// Density of `∫h(sign·t)dt ∫1_B(tr)ν_ξ(dr)` on the ray, lazily evaluated.
fn mapped_part(k: &MappingKernel, part: &RadialPart, sign: f64) -> Result<Option<Density>> {
    if part.is_zero() {
        return Ok(None);
    }
    if part.atoms.is_empty() {
        if let Some(Density::PowerLaw { c, beta, r_lo, r_hi }) = &part.density {
            if *r_lo == 0.0 && *r_hi == f64::INFINITY {
                let m = side_moment(k, *beta, sign);
                if !m.is_finite() {
                    return Err(LevyError::NotDefinable(format!("∫h(t)t^{beta}dt diverges")));
                }
                return Ok(Some(Density::power_law(c * m, *beta, 0.0, f64::INFINITY)));
            }
        }
    }
    let (ta, tb) = side_range(k);
    let mut r_lo = f64::INFINITY;
    let mut r_hi: f64 = 0.0;
    for &(r, _) in &part.atoms {
        r_lo = r_lo.min(r);
        r_hi = r_hi.max(r);
    }
    let mut theta0 = f64::NEG_INFINITY;
    let mut theta_inf = f64::INFINITY;
    if let Some(d) = &part.density {
        let (lo, hi) = d.support();
        r_lo = r_lo.min(lo);
        r_hi = r_hi.max(hi);
        if let Some(t) = d.tail_zero() {
            theta0 = theta0.max(t.theta);
        }
        if let Some(t) = d.tail_inf() {
            theta_inf = theta_inf.min(t.theta);
        }
    }
    if ta == 0.0 {
        theta0 = theta0.max(k.kappa0);
    }
    if tb == f64::INFINITY {
        theta_inf = theta_inf.min(k.kappa_inf);
    }
    let out_lo = ta * r_lo;
    let out_hi = if r_hi == 0.0 { 0.0 } else { tb * r_hi };
    if !theta0.is_finite() {
        theta0 = if out_lo > 0.0 { 0.0 } else { theta0 };
    }
    let mut breaks = Vec::new();
    for r in part_radii(part) {
        for t in [ta, tb] {
            let u = t * r;
            if u > out_lo && u < out_hi && u.is_finite() {
                breaks.push(u);
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let kk = k.clone();
    let atoms = part.atoms.clone();
    let dens = part.density.clone();
    let radii: Vec<f64> = dens
        .as_ref()
        .map(|d| {
            let (lo, hi) = d.support();
            let mut v = d.breakpoints();
            v.push(lo);
            v.push(hi);
            v.retain(|r| *r > 0.0 && r.is_finite());
            v
        })
        .unwrap_or_default();
    let f = move |u: f64| -> f64 {
        if !(u > out_lo && u < out_hi) {
            return 0.0;
        }
        let mut v = 0.0;
        for &(r0, m) in &atoms {
            v += m * kk.h(sign * u / r0) / r0;
        }
        if let Some(d) = &dens {
            let bt: Vec<f64> = radii.iter().map(|r| u / r).collect();
            let q = kk.integrate_side(
                &|t: f64| {
                    let t = t.abs();
                    d.eval(u / t) / t
                },
                sign,
                &bt,
                DENS_TOL,
            );
            v += q.value;
        }
        v
    };
    Ok(Some(Density::Analytic(AnalyticDensity::new(
        Arc::new(f),
        out_lo,
        out_hi,
        theta0,
        theta_inf,
        breaks,
    ))))
}

fn mapped_measure(k: &MappingKernel, nu: &LevyMeasure) -> Result<LevyMeasure> {
    let signs: &[f64] = if k.two_sided { &[1.0, -1.0] } else { &[1.0] };
    let jobs: Vec<(usize, f64)> = (0..nu.components.len())
        .flat_map(|i| signs.iter().map(move |s| (i, *s)))
        .collect();
    let parts = crate::par::map(jobs.len(), |j| {
        let (i, s) = jobs[j];
        mapped_part(k, &nu.components[i].radial, s)
    });
    let mut components = Vec::new();
    for (j, p) in parts.into_iter().enumerate() {
        let (i, s) = jobs[j];
        if let Some(d) = p? {
            let c = &nu.components[i];
            components.push(Component {
                xi: if s > 0.0 { c.xi.clone() } else { c.xi.neg() },
                weight: c.weight,
                radial: RadialPart::density(d),
            });
        }
    }
    Ok(LevyMeasure { dim: nu.dim, components })
}

/// `∫_{range} r ν_ξ(dr)` on one ray, `None` when divergent.
fn ray_first_moment(part: &RadialPart, range: RadialRange) -> Result<Option<f64>> {
    if !(range.hi > range.lo) {
        return Ok(Some(0.0));
    }
    if let Some(Density::PowerLaw { c, beta, r_lo, r_hi }) = &part.density {
        let atoms = part.atom_mass_weighted(&range, |r| r);
        let lo = range.lo.max(*r_lo);
        let hi = range.hi.min(*r_hi);
        return Ok(power_integral(*c, -beta, lo, hi).map(|v| v + atoms));
    }
    Ok(part.integrate(&|r| r, Growth::power(1.0), &range, LEVY_TOL)?.value())
}

/// Which of the two representations of the inner vector is used.
#[derive(Clone, Copy)]
enum Side {
    /// `|t| < 1` with the mean: `−∫_{|x|>R} x ν`
    InnerMean,
    /// `|t| < 1`: `∫_{1<|x|≤R} x ν`
    InnerCut,
    /// `|t| > 1` with the drift: `∫_{|x|≤R} x ν`
    OuterDrift,
    /// `|t| > 1`: `−∫_{R<|x|≤1} x ν`
    OuterCut,
}

fn shell_vector(nu: &LevyMeasure, side: Side, big_r: f64) -> Result<Vec<f64>> {
    let mut v = vec![0.0; nu.dim];
    for c in &nu.components {
        let (range, sgn) = match side {
            Side::InnerMean => (
                RadialRange {
                    lo: big_r,
                    lo_closed: false,
                    hi: f64::INFINITY,
                    hi_closed: false,
                },
                -1.0,
            ),
            Side::InnerCut => (RadialRange::half_open(1.0, big_r), 1.0),
            Side::OuterDrift => (
                RadialRange {
                    lo: 0.0,
                    lo_closed: true,
                    hi: big_r,
                    hi_closed: true,
                },
                1.0,
            ),
            Side::OuterCut => (RadialRange::half_open(big_r, 1.0), -1.0),
        };
        let m = ray_first_moment(&c.radial, range)?
            .ok_or_else(|| LevyError::NotDefinable("shell first moment diverges".into()))?;
        for (o, x) in v.iter_mut().zip(c.xi.as_slice()) {
            *o += sgn * c.weight * m * x;
        }
    }
    Ok(v)
}

/// `∫_{inner or outer} t h(t) dt`, `+∞` when divergent.
fn t_coefficient(k: &MappingKernel, inner: bool) -> f64 {
    if !k.two_sided {
        let (a, b) = (k.a, k.b);
        if inner {
            if a >= 1.0 {
                return 0.0;
            }
            if a == 0.0 && k.kappa0 >= 1.0 {
                return f64::INFINITY;
            }
        } else {
            if b <= 1.0 {
                return 0.0;
            }
            if b == f64::INFINITY && k.kappa_inf <= 1.0 {
                return f64::INFINITY;
            }
        }
    }
    let q = k.integrate(
        |t: f64| if (t.abs() < 1.0) == inner { t } else { 0.0 },
        &[1.0],
        GAMMA_TOL,
    );
    if q.value.is_finite() {
        q.value
    } else {
        f64::INFINITY
    }
}

fn has_side(k: &MappingKernel, inner: bool) -> bool {
    k.two_sided || if inner { k.a < 1.0 } else { k.b > 1.0 }
}

/// `∫ h(t)·t·[γ + ∫x(1_{|tx|≤1} − 1_{|x|≤1})ν(dx)] dt`, evaluated with the mean
/// form for `|t| < 1` and the drift form for `|t| > 1` when available.
fn mapped_gamma(k: &MappingKernel, rho: &Triplet) -> Result<Vec<f64>> {
    let d = rho.dim();
    let mut out = vec![0.0; d];
    let mean = optional_repr(rho, GammaRepr::Mean)?;
    let drift = optional_repr(rho, GammaRepr::Drift)?;
    let tbreaks: Vec<f64> = radii_of(&rho.nu).into_iter().map(|r| 1.0 / r).collect();
    let nonzero = |v: &[f64]| v.iter().any(|x| *x != 0.0);
    for inner in [true, false] {
        if !has_side(k, inner) {
            continue;
        }
        let (loc, side) = match (inner, &mean, &drift) {
            (true, Some(m), _) => (m.clone(), Side::InnerMean),
            (true, None, _) => (rho.gamma.clone(), Side::InnerCut),
            (false, _, Some(g0)) => (g0.clone(), Side::OuterDrift),
            (false, _, None) => (rho.gamma.clone(), Side::OuterCut),
        };
        if nonzero(&loc) {
            let coef = t_coefficient(k, inner);
            if !coef.is_finite() {
                return Err(LevyError::NotDefinable(format!(
                    "∫t·h(t)dt over |t| {} 1 diverges and the location does not vanish",
                    if inner { "<" } else { ">" }
                )));
            }
            for (o, l) in out.iter_mut().zip(&loc) {
                *o += coef * l;
            }
        }
        if rho.nu.is_zero() {
            continue;
        }
        let first_err = std::sync::Mutex::new(None);
        for c0 in (0..d).step_by(3) {
            let q = k.integrate(
                |t: f64| {
                    let at = t.abs();
                    if (at < 1.0) != inner || at == 1.0 {
                        return V3::default();
                    }
                    match shell_vector(&rho.nu, side, 1.0 / at) {
                        Ok(v) => {
                            let mut o = [0.0; 3];
                            for (i, x) in o.iter_mut().enumerate() {
                                if c0 + i < d {
                                    *x = t * v[c0 + i];
                                }
                            }
                            V3(o)
                        }
                        Err(e) => {
                            first_err.lock().unwrap().get_or_insert(e);
                            V3([f64::NAN; 3])
                        }
                    }
                },
                &tbreaks,
                GAMMA_TOL,
            );
            if let Some(e) = first_err.lock().unwrap().take() {
                return Err(e);
            }
            let n = q.value.0.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if !n.is_finite() || (!q.converged && q.error > 1e-6 * n.max(1.0)) {
                return Err(LevyError::NotDefinable(format!(
                    "location integral over |t| {} 1 does not converge (error estimate {:.3e})",
                    if inner { "<" } else { ">" },
                    q.error
                )));
            }
            for i in 0..3.min(d - c0) {
                out[c0 + i] += q.value.0[i];
            }
        }
    }
    Ok(out)
}

fn optional_repr(rho: &Triplet, repr: GammaRepr) -> Result<Option<Vec<f64>>> {
    match convert_gamma(rho, repr) {
        Ok(t) => Ok(Some(t.gamma)),
        Err(LevyError::ReprUnavailable(_)) | Err(LevyError::Inconclusive(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// The triplet of `Λ_h ρ`.
pub fn apply_mapping(k: &MappingKernel, rho: &Triplet) -> Result<Triplet> {
    rho.validate()?;
    if k.family.is_named() && !k.two_sided {
        let rep = check_domain(k, rho);
        if rep.in_de == Verdict::No {
            let why: Vec<String> = rep
                .evidence
                .iter()
                .filter(|e| e.value == f64::INFINITY || !e.note.is_empty())
                .map(|e| format!("{} = {} {}", e.name, e.value, e.note))
                .collect();
            return Err(LevyError::NotDefinable(why.join("; ")));
        }
    }
    let rho = rho.to_cut1()?;
    let a = if has_gaussian(&rho) {
        let m2 = k.moment(2.0);
        if !k.condition.c1 || !m2.is_finite() {
            return Err(LevyError::NotDefinable(
                "Gaussian part present but ∫h(u)u²du diverges".into(),
            ));
        }
        rho.a.iter().map(|row| row.iter().map(|x| x * m2).collect()).collect()
    } else {
        rho.a.clone()
    };
    let nu = mapped_measure(k, &rho.nu)?;
    let gamma = mapped_gamma(k, &rho)?;
    Ok(Triplet {
        a,
        nu,
        gamma,
        repr: GammaRepr::Cut1,
    })
}

/// Result of `iterate_mapping`: the final triplet and one report per step.
#[derive(Debug, Clone)]
pub struct Iteration {
    pub result: Triplet,
    pub reports: Vec<DomainReport>,
}

/// `Λ_hⁿ ρ`, checking the domain before every step. From the third step on the
/// input densities are tabulated on `GRID_NODES` log-spaced nodes.
pub fn iterate_mapping(k: &MappingKernel, rho: &Triplet, n: usize) -> Result<Iteration> {
    if n == 0 {
        return Err(LevyError::Argument("iteration count must be positive".into()));
    }
    let mut cur = rho.clone();
    let mut reports = Vec::with_capacity(n);
    for step in 1..=n {
        if step >= 3 {
            // lazy images of lazy images nest quadratures, so tabulate first
            cur = gridded(&cur)?;
        }
        let rep = check_domain(k, &cur);
        if rep.in_de == Verdict::No {
            let reason = rep
                .evidence
                .iter()
                .find(|e| e.value == f64::INFINITY || e.note.contains("A = 0"))
                .map(|e| format!("{} diverges", e.name))
                .unwrap_or_else(|| "outside the domain".into());
            return Err(LevyError::IterationDomain { step, reason });
        }
        reports.push(rep);
        cur = match apply_mapping(k, &cur) {
            Ok(t) => t,
            Err(LevyError::NotDefinable(reason)) => return Err(LevyError::IterationDomain { step, reason }),
            Err(e) => return Err(e),
        };
    }
    Ok(Iteration { result: cur, reports })
}

// ---------------------------------------------------------------------------
// Grids

/// Number of nodes of output grids.
pub const GRID_NODES: usize = 400;

/// Samples a density on `n` log-spaced nodes over its support clipped to
/// `[10⁻⁶, 10⁶]`, keeping its tail exponents.
pub fn grid_of(d: &Density, n: usize) -> Result<Density> {
    let (lo, hi) = d.support();
    let a = lo.max(1e-6);
    let b = hi.min(1e6);
    if !(b > a) || n < 2 {
        return Err(LevyError::Argument("density support misses [1e-6, 1e6]".into()));
    }
    let nodes: Vec<f64> = (0..n)
        .map(|i| (a.ln() + (b.ln() - a.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect();
    let values: Vec<f64> = crate::par::map(n, |i| d.eval(nodes[i].clamp(a * (1.0 + 1e-12), b * (1.0 - 1e-12))));
    let lo_tail = match d.tail_zero() {
        Some(t) if lo < a => Tail::Power(t.theta),
        _ => Tail::Zero,
    };
    let hi_tail = match d.tail_inf() {
        Some(t) if hi > b => Tail::Power(t.theta),
        _ => Tail::Zero,
    };
    Ok(Density::Grid(GridDensity::new(nodes, values, lo_tail, hi_tail)?))
}

/// Replaces every lazily evaluated density by its grid.
pub fn gridded(t: &Triplet) -> Result<Triplet> {
    let mut out = t.clone();
    for c in &mut out.nu.components {
        if let Some(Density::Analytic(a)) = &c.radial.density {
            if a.expr.is_none() {
                let g = grid_of(c.radial.density.as_ref().unwrap(), GRID_NODES)?;
                c.radial = RadialPart::new(c.radial.atoms.clone(), Some(g));
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Range

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayFunction {
    pub ray: usize,
    /// Abscissae in the variable the order test runs in.
    pub x: Vec<f64>,
    pub k: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeReport {
    pub verdict: Verdict,
    pub order: String,
    pub k_functions: Vec<RayFunction>,
    #[serde(serialize_with = "crate::io::ser_f64", deserialize_with = "crate::io::de_f64")]
    pub worst_violation: f64,
    pub side_conditions: Vec<Evidence>,
}

/// Variable in which a family's range criterion is stated.
#[derive(Clone, Copy)]
enum RangeVar {
    /// `u` itself on `(0, ∞)`
    U,
    /// `y = log u` on ℝ
    LogU,
    /// `v = u^β` on `(0, ∞)`
    Power(f64),
}

/// Log-spaced radii covering `[10⁻³, 10³]` and reaching past the support ends.
pub(crate) fn range_nodes(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mut e: f64 = 1e3;
    if lo > 0.0 {
        e = e.max(2.0 / lo).max(10.0 * lo);
    }
    if hi < f64::INFINITY && hi > 0.0 {
        e = e.max(2.0 * hi).max(10.0 / hi);
    }
    let (a, b) = (-e.ln(), e.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Tests `μ ∈ ℜ(Λ_h)` for the named families.
pub fn check_range(k: &MappingKernel, mu: &Triplet) -> Result<RangeReport> {
    mu.validate()?;
    let mut side = Vec::new();
    let alpha = match k.family.alpha() {
        Some(a) => a,
        None => {
            return Ok(RangeReport {
                verdict: Verdict::Inconclusive,
                order: "none".into(),
                k_functions: Vec::new(),
                worst_violation: f64::NAN,
                side_conditions: vec![Evidence::new("family", f64::NAN, "no range description for this kernel")],
            })
        }
    };
    let conj = k.conjugate;
    let (var, order, cm) = match k.family {
        KernelFamily::BarPhi { p, .. } => (RangeVar::U, p, false),
        KernelFamily::LambdaQ { q, .. } => (RangeVar::LogU, q, false),
        KernelFamily::Psi { beta, .. } => (RangeVar::Power(beta), 8.0, true),
        _ => unreachable!(),
    };
    let order_name = if cm {
        "completely monotone (depth 8)".to_string()
    } else if conj {
        format!("increasing of order {order}")
    } else {
        format!("monotone of order {order}")
    };
    let report = |verdict, k_functions, worst, side| RangeReport {
        verdict,
        order: order_name.clone(),
        k_functions,
        worst_violation: worst,
        side_conditions: side,
    };

    let mut verdict = Verdict::Yes;
    if conj && alpha == 1.0 {
        side.push(Evidence::new("alpha", 1.0, "no range description for the conjugate at alpha = 1"));
        verdict = Verdict::Inconclusive;
    }
    if matches!(k.family, KernelFamily::LambdaQ { q, .. } if alpha == 1.0 && q != 1.0) {
        side.push(Evidence::new("q", order, "no range description at alpha = 1 with q != 1"));
        verdict = Verdict::Inconclusive;
    }
    if conj && alpha >= 0.0 && has_gaussian(mu) {
        side.push(Evidence::new("gaussian part", 1.0, "the range lies in ID0"));
        return Ok(report(Verdict::No, Vec::new(), f64::NAN, side));
    }
    if mu.nu.has_atoms() {
        side.push(Evidence::new("atoms", 1.0, "an atomic Lévy measure is not in the range"));
        return Ok(report(Verdict::No, Vec::new(), f64::NAN, side));
    }

    // Side conditions on the location.
    if alpha >= 1.0 && !(conj && alpha == 1.0) {
        let mr = moment_report(mu)?;
        let scale = mu.gamma.iter().fold(1.0f64, |m, g| m.max(g.abs()));
        let (name, value) = if conj {
            ("drift", mr.drift.clone())
        } else if alpha == 1.0 {
            let ok = matches!(mr.weak_mean.status, LimitStatus::Exists | LimitStatus::ExistsAbsolutely);
            ("weak mean", if ok { mr.weak_mean.value.clone() } else { None })
        } else {
            ("mean", mr.mean.clone())
        };
        let v = match value {
            Some(v) => {
                side.push(Evidence::new(format!("|{name}|"), norm(&v), ""));
                Verdict::from_bool(is_zero_vec(&v, scale))
            }
            None => {
                side.push(Evidence::new(format!("|{name}|"), f64::NAN, "does not exist"));
                Verdict::No
            }
        };
        verdict = verdict.and(v);
    }

    let p = order;
    let mut funcs = Vec::new();
    let mut worst: f64 = 0.0;
    for (ray, c) in mu.nu.components.iter().enumerate() {
        let Some(d) = &c.radial.density else { continue };
        let (lo, hi) = d.support();
        let us = range_nodes(lo, hi, GRID_NODES);
        // k on the radii, in the forward or mirrored form
        let kvals: Vec<f64> = crate::par::map(us.len(), |i| {
            let u = us[i];
            if conj {
                // v^{α+1}·ℓ′(v) at v = 1/u, with ℓ′(v) = v⁻⁴ℓ(1/v)
                let v = 1.0 / u;
                v.powf(alpha - 3.0) * d.eval(u)
            } else {
                u.powf(alpha + 1.0) * d.eval(u)
            }
        });
        // Abscissae: for the conjugate the variable runs over v = 1/u.
        let mut pts: Vec<(f64, f64)> = us
            .iter()
            .zip(&kvals)
            .map(|(u, kv)| {
                let w = if conj { 1.0 / u } else { *u };
                let x = match var {
                    RangeVar::U => w,
                    RangeVar::LogU => w.ln(),
                    RangeVar::Power(b) => w.powf(b),
                };
                (x, *kv)
            })
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        let s = match var {
            RangeVar::LogU => Sampled::on_line(xs, ys)?,
            _ => Sampled::on_half_line(xs, ys)?,
        };
        let res: Result<OrderOutcome> = if cm {
            completely_monotone_test(&s, 8)
        } else {
            order_test(&s, p, OrderMode::Monotone)
        };
        let res = match res {
            Ok(r) => r,
            Err(LevyError::Unsupported(m)) => {
                side.push(Evidence::new("order", p, m));
                verdict = verdict.and(Verdict::Inconclusive);
                funcs.push(RayFunction {
                    ray,
                    x: s.x.clone(),
                    k: s.y.clone(),
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        worst = worst.max(res.worst_violation);
        verdict = verdict.and(res.verdict);
        funcs.push(RayFunction { ray, x: s.x, k: s.y });
    }
    Ok(report(verdict, funcs, worst, side))
}
