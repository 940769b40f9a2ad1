//! Monotonicity of order p, complete monotonicity, the classes `L⟨α⟩` and
//! `L⟨α⟩*`, and construction of `L∞` members from a discrete spectrum.

use crate::error::{LevyError, Result};
use crate::inversion::invert;
use crate::mapping::{range_nodes, Verdict, GRID_NODES};
use crate::measure::{
    dilate, sym_eigenvalues, AnalyticDensity, Component, Density, Direction, GammaRepr, LevyMeasure,
    RadialPart, Triplet,
};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Largest order handled by the finite-difference tests.
pub const MAX_ORDER: usize = 8;

/// Relative size of value noise assumed for sampled functions.
const REL_NOISE: f64 = 1e-10;

/// A function sampled on increasing abscissae, on ℝ or on `(0, ∞)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sampled {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub half_line: bool,
}

impl Sampled {
    fn build(x: Vec<f64>, y: Vec<f64>, half_line: bool) -> Result<Sampled> {
        if x.len() != y.len() {
            return Err(LevyError::Argument(format!("{} abscissae but {} values", x.len(), y.len())));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(LevyError::Argument("abscissae must increase strictly".into()));
        }
        if half_line && x.first().is_some_and(|v| *v <= 0.0) {
            return Err(LevyError::Argument("abscissae must be positive on the half line".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(LevyError::Argument("sampled values must be finite".into()));
        }
        Ok(Sampled { x, y, half_line })
    }

    /// Samples on ℝ.
    pub fn on_line(x: Vec<f64>, y: Vec<f64>) -> Result<Sampled> {
        Sampled::build(x, y, false)
    }

    /// Samples on `(0, ∞)`.
    pub fn on_half_line(x: Vec<f64>, y: Vec<f64>) -> Result<Sampled> {
        Sampled::build(x, y, true)
    }

    /// `n` equally spaced samples of `phi` on `[lo, hi]`.
    pub fn from_fn(phi: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize, half_line: bool) -> Result<Sampled> {
        if n < 2 || !(hi > lo) {
            return Err(LevyError::Argument("need n >= 2 and lo < hi".into()));
        }
        let x: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let y = x.iter().map(|&u| phi(u)).collect();
        Sampled::build(x, y, half_line)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderMode {
    Monotone,
    Increasing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderOutcome {
    pub verdict: Verdict,
    /// Largest sign violation relative to `max|φ|`.
    #[serde(serialize_with = "crate::io::ser_f64", deserialize_with = "crate::io::de_f64")]
    pub worst_violation: f64,
    /// Abscissa (in the input variable) of the worst violation.
    #[serde(serialize_with = "crate::io::ser_f64", deserialize_with = "crate::io::de_f64")]
    pub location: f64,
    /// Difference order of the worst violation, 0 when none.
    pub failing_order: usize,
    /// Orders tested.
    pub depth: usize,
}

/// Worst violation of `(−1)ⁿΔⁿy ≥ 0` over `n = 1..=p` on scaled divided
/// differences, as (ratio to the order tolerance, relative size, index, n).
fn difference_signs(x: &[f64], y: &[f64], p: usize, eps: f64) -> (f64, f64, usize, usize) {
    let m = y.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let mut dd = y.to_vec();
    let mut worst = (0.0, 0.0, 0, 0);
    let mut fact = 1.0;
    for n in 1..=p {
        fact *= n as f64;
        let next: Vec<f64> = (0..dd.len() - 1)
            .map(|i| (dd[i + 1] - dd[i]) / (x[i + n] - x[i]))
            .collect();
        dd = next;
        let tol = 10f64.powi(n as i32) * eps;
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        for (i, v) in dd.iter().enumerate() {
            let h = (x[i + n] - x[i]) / n as f64;
            let scaled = sign * v * fact * h.powi(n as i32);
            if scaled < 0.0 {
                let ratio = -scaled / tol;
                if ratio > worst.0 {
                    worst = (ratio, -scaled / m, i, n);
                }
            }
        }
    }
    worst
}

fn verdict_from_ratio(ratio: f64) -> Verdict {
    if ratio > 10.0 {
        Verdict::No
    } else if ratio > 1.0 {
        Verdict::Inconclusive
    } else {
        Verdict::Yes
    }
}

fn noise_floor(y: &[f64]) -> f64 {
    let m = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    (REL_NOISE * m).max(1e-300)
}

fn check_order(p: f64) -> Result<usize> {
    if p.fract() != 0.0 || !p.is_finite() {
        return Err(LevyError::Unsupported(format!(
            "order {p} is not an integer; only integer orders have a finite-difference test"
        )));
    }
    if !(1.0..=MAX_ORDER as f64).contains(&p) {
        return Err(LevyError::Argument(format!("order {p} must lie in 1..={MAX_ORDER}")));
    }
    Ok(p as usize)
}

fn monotone_outcome(x: &[f64], y: &[f64], p: usize, map_back: &dyn Fn(f64) -> f64) -> OrderOutcome {
    let eps = noise_floor(y);
    let (ratio, rel, idx, n) = difference_signs(x, y, p, eps);
    let mut verdict = verdict_from_ratio(ratio);
    // φ must tend to 0 at the right end.
    let m = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let last = *y.last().unwrap();
    if m > 0.0 && last > 1e-3 * m {
        let k = y.len();
        let still_falling = y[k - 1] < y[k - 2] - 10.0 * eps && y[k - 2] < y[k - 3] - 10.0 * eps;
        verdict = verdict.and(if still_falling { Verdict::Inconclusive } else { Verdict::No });
    }
    let loc = if n == 0 { f64::NAN } else { map_back(x[idx + n / 2]) };
    OrderOutcome {
        verdict,
        worst_violation: if n == 0 { 0.0 } else { rel },
        location: loc,
        failing_order: if verdict == Verdict::Yes { 0 } else { n },
        depth: p,
    }
}

/// Tests monotonicity (or increase) of order `p` by the signs of finite
/// differences up to order `p`; increase is reduced to monotonicity of
/// `φ(−u)` on ℝ or `u^{p−1}φ(1/u)` on `(0, ∞)`.
pub fn order_test(s: &Sampled, p: f64, mode: OrderMode) -> Result<OrderOutcome> {
    let p = check_order(p)?;
    if s.x.len() < 10 * p {
        return Err(LevyError::Argument(format!(
            "{} samples are too few for order {p} (need {})",
            s.x.len(),
            10 * p
        )));
    }
    match mode {
        OrderMode::Monotone => Ok(monotone_outcome(&s.x, &s.y, p, &|x| x)),
        OrderMode::Increasing => {
            let n = s.x.len();
            let (x, y): (Vec<f64>, Vec<f64>) = if s.half_line {
                (0..n)
                    .rev()
                    .map(|i| {
                        let v = 1.0 / s.x[i];
                        (v, v.powi(p as i32 - 1) * s.y[i])
                    })
                    .unzip()
            } else {
                (0..n).rev().map(|i| (-s.x[i], s.y[i])).unzip()
            };
            let half = s.half_line;
            Ok(monotone_outcome(&x, &y, p, &move |v| if half { 1.0 / v } else { -v }))
        }
    }
}

/// Monotonicity of every order up to `depth`; a `Yes` is a finite-depth proxy.
pub fn completely_monotone_test(s: &Sampled, depth: usize) -> Result<OrderOutcome> {
    order_test(s, depth as f64, OrderMode::Monotone)
}

// ---------------------------------------------------------------------------
// L⟨α⟩ and L⟨α⟩*

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    L,
    Lstar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayCheck {
    pub ray: usize,
    pub verdict: Verdict,
    #[serde(serialize_with = "crate::io::ser_f64", deserialize_with = "crate::io::de_f64")]
    pub worst_violation: f64,
    #[serde(serialize_with = "crate::io::ser_f64", deserialize_with = "crate::io::de_f64")]
    pub location: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub verdict: Verdict,
    pub alpha: f64,
    pub variant: Variant,
    pub rays: Vec<RayCheck>,
    pub notes: Vec<String>,
}

/// Tests `t ∈ L⟨α⟩` (`k(u) = u^{α+1}ℓ(u)` non-increasing on every ray) or
/// `t ∈ L⟨α⟩*` (`u^{3−α}ℓ(u)` non-decreasing).
pub fn class_membership(t: &Triplet, alpha: f64, variant: Variant) -> Result<ClassReport> {
    t.validate()?;
    let mut notes = Vec::new();
    let mut verdict = Verdict::Yes;
    let gauss = t.a.iter().flatten().any(|x| *x != 0.0);
    let nu_zero = t.nu.is_zero();
    let (gauss_limit, nu_limit) = match variant {
        Variant::L => (2.0, 2.0),
        Variant::Lstar => (0.0, 2.0),
    };
    if gauss && alpha > gauss_limit {
        notes.push(format!("Gaussian part is excluded for alpha > {gauss_limit}"));
        verdict = Verdict::No;
    }
    if !nu_zero && alpha >= nu_limit {
        notes.push("a nonzero Lévy measure is excluded for alpha >= 2".into());
        verdict = Verdict::No;
    }
    if !nu_zero && t.nu.has_atoms() {
        notes.push("atoms in the Lévy measure".into());
        verdict = Verdict::No;
    }
    let mut rays = Vec::new();
    for (ray, c) in t.nu.components.iter().enumerate() {
        let Some(d) = &c.radial.density else { continue };
        let (lo, hi) = d.support();
        let us = range_nodes(lo, hi, GRID_NODES);
        let ks: Vec<f64> = crate::par::map(us.len(), |i| {
            let u = us[i];
            match variant {
                Variant::L => u.powf(alpha + 1.0) * d.eval(u),
                // increasing in u is decreasing in 1/u
                Variant::Lstar => u.powf(3.0 - alpha) * d.eval(u),
            }
        });
        let (xs, ys): (Vec<f64>, Vec<f64>) = match variant {
            Variant::L => (us.clone(), ks),
            Variant::Lstar => us.iter().zip(ks).rev().map(|(u, k)| (1.0 / u, k)).unzip(),
        };
        let eps = noise_floor(&ys);
        let (ratio, rel, idx, n) = difference_signs(&xs, &ys, 1, eps);
        let v = verdict_from_ratio(ratio);
        let location = if n == 0 {
            f64::NAN
        } else {
            match variant {
                Variant::L => xs[idx],
                Variant::Lstar => 1.0 / xs[idx],
            }
        };
        rays.push(RayCheck {
            ray,
            verdict: v,
            worst_violation: if n == 0 { 0.0 } else { rel },
            location,
        });
        verdict = verdict.and(v);
    }
    Ok(ClassReport {
        verdict,
        alpha,
        variant,
        rays,
        notes,
    })
}

/// Directions of `ν` with the components on each.
fn group_by_direction(nu: &LevyMeasure) -> Vec<(Direction, Vec<usize>)> {
    let mut groups: Vec<(Direction, Vec<usize>)> = Vec::new();
    for (i, c) in nu.components.iter().enumerate() {
        match groups.iter_mut().find(|g| g.0 == c.xi) {
            Some(g) => g.1.push(i),
            None => groups.push((c.xi.clone(), vec![i])),
        }
    }
    groups
}

/// Cofactor `ρ_b` of `μ̂(z) = μ̂(b⁻¹z)^{b^α}ρ̂_b(z)` (L) or `σ_b` of
/// `μ̂(z) = μ̂(bz)^{b^{α−2}}σ̂_b(z)` (Lstar), checked for positivity.
pub fn factor_decompose(t: &Triplet, alpha: f64, b: f64, variant: Variant) -> Result<Triplet> {
    if !(b > 1.0 && b.is_finite()) {
        return Err(LevyError::Argument(format!("b = {b} must be > 1")));
    }
    let t = t.to_cut1()?;
    let (s, dil) = match variant {
        Variant::L => (b.powf(alpha), dilate(&t, 1.0 / b)?),
        Variant::Lstar => (b.powf(alpha - 2.0), dilate(&t, b)?),
    };
    let d = t.dim();
    let a: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|j| t.a[i][j] - s * dil.a[i][j]).collect())
        .collect();
    let scale = t.a.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    if sym_eigenvalues(&a).iter().any(|e| *e < -1e-12 * scale.max(1e-300)) {
        return Err(LevyError::Validation("Gaussian part of the cofactor is not positive semidefinite".into()));
    }
    let gamma: Vec<f64> = t.gamma.iter().zip(&dil.gamma).map(|(g, h)| g - s * h).collect();

    let mut components = Vec::new();
    for (ray, (xi, idx)) in group_by_direction(&t.nu).into_iter().enumerate() {
        // atoms: +w·m at r, −s·w·m at the dilated radius
        let mut atoms: Vec<(f64, f64)> = Vec::new();
        let mut add_atom = |r: f64, m: f64| match atoms.iter_mut().find(|a| (a.0 - r).abs() <= 1e-12 * r) {
            Some(a) => a.1 += m,
            None => atoms.push((r, m)),
        };
        for &i in &idx {
            let (c, cd) = (&t.nu.components[i], &dil.nu.components[i]);
            for &(r, m) in &c.radial.atoms {
                add_atom(r, c.weight * m);
            }
            for &(r, m) in &cd.radial.atoms {
                add_atom(r, -s * cd.weight * m);
            }
        }
        atoms.retain(|a| a.1 != 0.0);
        let atom_scale = atoms.iter().fold(0.0f64, |m, a| m.max(a.1.abs()));
        let mut kept = Vec::new();
        for (r, m) in atoms {
            if m < -1e-12 * atom_scale {
                return Err(LevyError::NotDecomposable { ray, radius: r });
            }
            if m > 1e-12 * atom_scale {
                kept.push((r, m));
            }
        }
        let dens: Vec<(f64, Density)> = idx
            .iter()
            .flat_map(|&i| {
                let (c, cd) = (&t.nu.components[i], &dil.nu.components[i]);
                let mut v = Vec::new();
                if let Some(x) = &c.radial.density {
                    v.push((c.weight, x.clone()));
                }
                if let Some(x) = &cd.radial.density {
                    v.push((-s * cd.weight, x.clone()));
                }
                v
            })
            .collect();
        let density = combine_densities(&dens, ray)?;
        if !kept.is_empty() || density.is_some() {
            components.push(Component {
                xi,
                weight: 1.0,
                radial: RadialPart::new(kept, density),
            });
        }
    }
    let out = Triplet {
        a,
        nu: LevyMeasure { dim: d, components },
        gamma,
        repr: GammaRepr::Cut1,
    };
    out.validate()?;
    Ok(out)
}

/// `Σ wᵢℓᵢ`, exact when every term is a power law on `(0, ∞)` with one
/// exponent; otherwise probed for negativity on a log grid.
fn combine_densities(terms: &[(f64, Density)], ray: usize) -> Result<Option<Density>> {
    if terms.is_empty() {
        return Ok(None);
    }
    let full_power = |d: &Density| match d {
        Density::PowerLaw { beta, r_lo, r_hi, .. } if *r_lo == 0.0 && *r_hi == f64::INFINITY => Some(*beta),
        _ => None,
    };
    if let Some(beta) = full_power(&terms[0].1) {
        if terms.iter().all(|(_, d)| full_power(d) == Some(beta)) {
            let (c, scale) = terms.iter().fold((0.0, 0.0f64), |(acc, sc), (w, d)| match d {
                Density::PowerLaw { c, .. } => (acc + w * c, sc.max((w * c).abs())),
                _ => unreachable!(),
            });
            if c < -1e-12 * scale {
                return Err(LevyError::NotDecomposable { ray, radius: 1.0 });
            }
            if c <= 1e-12 * scale {
                return Ok(None);
            }
            return Ok(Some(Density::power_law(c, beta, 0.0, f64::INFINITY)));
        }
    }
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    let mut theta0 = f64::NEG_INFINITY;
    let mut theta_inf = f64::INFINITY;
    let mut breaks = Vec::new();
    for (_, d) in terms {
        let (a, b) = d.support();
        lo = lo.min(a);
        hi = hi.max(b);
        if let Some(t) = d.tail_zero() {
            theta0 = theta0.max(t.theta);
        }
        if let Some(t) = d.tail_inf() {
            theta_inf = theta_inf.min(t.theta);
        }
        breaks.extend(d.breakpoints());
        for r in [a, b] {
            if r > 0.0 && r.is_finite() {
                breaks.push(r);
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    if !theta0.is_finite() {
        theta0 = 0.0;
    }
    let owned: Vec<(f64, Density)> = terms.to_vec();
    let eval = move |r: f64| owned.iter().map(|(w, d)| w * d.eval(r)).sum::<f64>();
    // Probe on a log grid plus both sides of every break.
    let mut probes = range_nodes(lo, hi, 4 * GRID_NODES);
    for &b in &breaks {
        probes.push(b * (1.0 - 1e-9));
        probes.push(b * (1.0 + 1e-9));
    }
    probes.sort_by(f64::total_cmp);
    let vals: Vec<f64> = probes.iter().map(|&r| eval(r)).collect();
    let termscale = |r: f64| terms.iter().map(|(w, d)| (w * d.eval(r)).abs()).fold(0.0, f64::max);
    let mut any = false;
    for (&r, &v) in probes.iter().zip(&vals) {
        let sc = termscale(r);
        if v < -1e-10 * sc {
            return Err(LevyError::NotDecomposable { ray, radius: r });
        }
        if v > 1e-10 * sc {
            any = true;
        }
    }
    if !any {
        return Ok(None);
    }
    Ok(Some(Density::Analytic(AnalyticDensity::new(
        Arc::new(move |r| eval(r).max(0.0)),
        lo,
        hi,
        theta0,
        theta_inf,
        breaks,
    ))))
}

// ---------------------------------------------------------------------------
// L∞ from a discrete spectrum

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LInfRay {
    pub xi: Vec<f64>,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LInfComponent {
    pub beta: f64,
    pub mass: f64,
    pub rays: Vec<LInfRay>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LInfSpec {
    pub components: Vec<LInfComponent>,
}

/// A constructed `L∞` member together with its spectrum `Γ = Σ g δ_β`.
#[derive(Debug, Clone, PartialEq)]
pub struct LInfinity {
    pub triplet: Triplet,
    /// `(β, g)` pairs.
    pub spectrum: Vec<(f64, f64)>,
}

impl LInfinity {
    /// The inversion, whose spectrum sits at `2 − β`.
    pub fn inverted(&self) -> Result<LInfinity> {
        Ok(LInfinity {
            triplet: invert(&self.triplet)?,
            spectrum: self.spectrum.iter().map(|&(b, g)| (2.0 - b, g)).collect(),
        })
    }
}

/// `ν = Σ g·λ_β(dξ)·r^{−β−1}dr` with zero Gaussian part and location.
pub fn build_l_infinity(spec: &LInfSpec) -> Result<LInfinity> {
    let first = spec
        .components
        .first()
        .and_then(|c| c.rays.first())
        .ok_or_else(|| LevyError::Argument("empty L-infinity spec".into()))?;
    let d = first.xi.len();
    let mut nu = LevyMeasure::zero(d);
    let mut spectrum = Vec::new();
    for c in &spec.components {
        if !(c.beta > 0.0 && c.beta < 2.0) {
            return Err(LevyError::Argument(format!("beta = {} must lie in (0, 2)", c.beta)));
        }
        if !(c.mass > 0.0 && c.mass.is_finite()) {
            return Err(LevyError::Argument(format!("mass = {} must be positive", c.mass)));
        }
        let total: f64 = c.rays.iter().map(|r| r.w).sum();
        if c.rays.is_empty() || (total - 1.0).abs() > 1e-9 || c.rays.iter().any(|r| !(r.w > 0.0)) {
            return Err(LevyError::Argument(format!(
                "ray weights for beta = {} must be positive and sum to 1 (got {total})",
                c.beta
            )));
        }
        for r in &c.rays {
            if r.xi.len() != d {
                return Err(LevyError::Dimension(d, r.xi.len()));
            }
            nu = nu.push(
                Direction::unit(r.xi.clone())?,
                c.mass * r.w,
                RadialPart::density(Density::power_law(1.0, c.beta, 0.0, f64::INFINITY)),
            );
        }
        spectrum.push((c.beta, c.mass));
    }
    Ok(LInfinity {
        triplet: Triplet::id0(nu, vec![0.0; d])?,
        spectrum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Direction;

    fn exp_ray(f: impl Fn(f64) -> f64 + Send + Sync + 'static, theta0: f64) -> Triplet {
        let d = Density::Analytic(AnalyticDensity::from_fn(f, 0.0, f64::INFINITY, theta0, f64::INFINITY));
        Triplet::id0(LevyMeasure::single(Direction::e1(1), 1.0, RadialPart::density(d)), vec![0.0]).unwrap()
    }

    #[test]
    fn exponential_is_completely_monotone() {
        let s = Sampled::from_fn(|u| (-u).exp(), -5.0, 10.0, 400, false).unwrap();
        assert_eq!(order_test(&s, 5.0, OrderMode::Monotone).unwrap().verdict, Verdict::Yes);
        assert_eq!(completely_monotone_test(&s, 8).unwrap().verdict, Verdict::Yes);
    }

    #[test]
    fn hat_function_orders() {
        let s = Sampled::from_fn(|u| (1.0 - u).max(0.0), -2.0, 3.0, 401, false).unwrap();
        assert_eq!(order_test(&s, 2.0, OrderMode::Monotone).unwrap().verdict, Verdict::Yes);
        let r = order_test(&s, 3.0, OrderMode::Monotone).unwrap();
        assert_eq!(r.verdict, Verdict::No);
        assert_eq!(r.failing_order, 3);
        assert!((r.location - 1.0).abs() < 0.05, "{r:?}");
    }

    #[test]
    fn reciprocal_is_completely_monotone() {
        let s = Sampled::from_fn(|v| 1.0 / (1.0 + v), 0.01, 2000.0, 4000, true).unwrap();
        assert_eq!(completely_monotone_test(&s, 8).unwrap().verdict, Verdict::Yes);
    }

    #[test]
    fn min_is_increasing_of_order_one() {
        let s = Sampled::from_fn(|u| u.min(1.0), 0.0004, 10.0, 400, true).unwrap();
        assert_eq!(order_test(&s, 1.0, OrderMode::Increasing).unwrap().verdict, Verdict::Yes);
        assert_eq!(order_test(&s, 1.0, OrderMode::Monotone).unwrap().verdict, Verdict::No);
    }

    #[test]
    fn order_test_arguments() {
        let s = Sampled::from_fn(|u| (-u).exp(), 0.0, 1.0, 50, false).unwrap();
        assert!(matches!(order_test(&s, 1.5, OrderMode::Monotone), Err(LevyError::Unsupported(_))));
        assert!(matches!(order_test(&s, 6.0, OrderMode::Monotone), Err(LevyError::Argument(_))));
        assert!(matches!(order_test(&s, 9.0, OrderMode::Monotone), Err(LevyError::Argument(_))));
    }

    #[test]
    fn selfdecomposable_example_and_its_inversion() {
        let t = exp_ray(|r| (-r).exp() / r, 0.0);
        assert_eq!(class_membership(&t, 0.0, Variant::L).unwrap().verdict, Verdict::Yes);
        let inv = invert(&t).unwrap();
        assert_eq!(class_membership(&inv, 0.0, Variant::Lstar).unwrap().verdict, Verdict::Yes);
        assert_eq!(class_membership(&t, 0.5, Variant::L).unwrap().verdict, Verdict::No);
    }

    #[test]
    fn deltas_are_in_every_lstar() {
        for alpha in [-1.0, 0.0, 1.0, 2.5] {
            let r = class_membership(&Triplet::delta(vec![1.0]), alpha, Variant::Lstar).unwrap();
            assert_eq!(r.verdict, Verdict::Yes);
        }
    }

    #[test]
    fn cofactor_closed_form() {
        let t = exp_ray(|r| (-r).exp() / r, 0.0);
        let cof = factor_decompose(&t, 0.0, 2.0, Variant::L).unwrap();
        let d = cof.nu.components[0].radial.density.as_ref().unwrap();
        for r in [0.1f64, 1.0, 3.0] {
            let want = ((-r).exp() - (-2.0 * r).exp()) / r;
            assert!((d.eval(r) - want).abs() <= 1e-14 * want, "{r}");
        }
    }

    #[test]
    fn bump_breaks_decomposability() {
        // a bump on (1.2, 1.4) doubles back up at r ∈ (0.6, 0.7) for b = 2
        let t = exp_ray(
            |r| (-r).exp() / r * if r > 1.2 && r < 1.4 { 3.0 } else { 1.0 },
            0.0,
        );
        match factor_decompose(&t, 0.0, 2.0, Variant::L) {
            Err(LevyError::NotDecomposable { radius, .. }) => assert!(radius > 0.6 && radius < 0.7, "{radius}"),
            other => panic!("{other:?}"),
        }
        assert_eq!(class_membership(&t, 0.0, Variant::L).unwrap().verdict, Verdict::No);
    }

    #[test]
    fn stable_rays() {
        for beta in [0.3, 1.0, 1.6] {
            let spec = LInfSpec {
                components: vec![LInfComponent {
                    beta,
                    mass: 1.0,
                    rays: vec![LInfRay { xi: vec![1.0], w: 1.0 }],
                }],
            };
            let t = build_l_infinity(&spec).unwrap().triplet;
            for alpha in [-0.5, 0.2, 0.7, 1.0, 1.5, 1.9] {
                let l = class_membership(&t, alpha, Variant::L).unwrap().verdict;
                let ls = class_membership(&t, alpha, Variant::Lstar).unwrap().verdict;
                assert_eq!(l, Verdict::from_bool(alpha <= beta), "L beta={beta} alpha={alpha}");
                assert_eq!(ls, Verdict::from_bool(alpha <= 2.0 - beta), "L* beta={beta} alpha={alpha}");
            }
        }
    }

    #[test]
    fn l_infinity_spectrum_inverts() {
        let spec = LInfSpec {
            components: vec![
                LInfComponent {
                    beta: 0.5,
                    mass: 1.0,
                    rays: vec![LInfRay { xi: vec![1.0], w: 1.0 }],
                },
                LInfComponent {
                    beta: 1.5,
                    mass: 2.0,
                    rays: vec![LInfRay { xi: vec![1.0], w: 0.5 }, LInfRay { xi: vec![-1.0], w: 0.5 }],
                },
            ],
        };
        let m = build_l_infinity(&spec).unwrap();
        assert_eq!(m.triplet.nu.components.len(), 3);
        let inv = m.inverted().unwrap();
        assert_eq!(inv.spectrum, vec![(1.5, 1.0), (0.5, 2.0)]);
        assert!(build_l_infinity(&LInfSpec {
            components: vec![LInfComponent {
                beta: 2.0,
                mass: 1.0,
                rays: vec![LInfRay { xi: vec![1.0], w: 1.0 }]
            }]
        })
        .is_err());
    }
}
