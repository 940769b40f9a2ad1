//! Cumulant functions `C(z) = log μ̂(z)` of triplets and of mapped laws.

use crate::error::{LevyError, Result};
use crate::kernel::MappingKernel;
use crate::measure::{convert_gamma, dot, Density, GammaRepr, RadialPart, Triplet};
use crate::quad::{self, wynn_epsilon_c, Tol};
use num_complex::Complex64;
use std::f64::consts::PI;

/// A cumulant value with its accumulated absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CumulantValue {
    pub value: Complex64,
    pub error: f64,
}

const RAY_TOL: Tol = Tol::new(1e-15, 1e-12);
const OUTER_TOL: Tol = Tol::new(1e-14, 1e-11);
/// Half periods integrated one by one before Wynn extrapolation.
const TAIL_PIECES: usize = 64;
/// Bounded supports with at most this many half periods are integrated fully.
const MAX_EXACT_PIECES: usize = 4096;

/// Compensation in the radial integrand `e^{irs} − 1 − irs·1{r ≤ R}`.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Cut {
    /// `R = 1`
    Unit,
    /// `R = ∞`
    All,
    /// `R = 0`
    None,
}

impl Cut {
    fn compensates(self, r: f64) -> bool {
        match self {
            Cut::Unit => r <= 1.0,
            Cut::All => true,
            Cut::None => false,
        }
    }

    fn of(repr: GammaRepr) -> Cut {
        match repr {
            GammaRepr::Mean => Cut::All,
            GammaRepr::Drift => Cut::None,
            _ => Cut::Unit,
        }
    }
}

#[inline]
fn sin_minus_x(x: f64) -> f64 {
    if x.abs() < 0.3 {
        let x2 = x * x;
        x * x2 * (-1.0 / 6.0 + x2 * (1.0 / 120.0 + x2 * (-1.0 / 5040.0 + x2 * (1.0 / 362_880.0 - x2 / 39_916_800.0))))
    } else {
        x.sin() - x
    }
}

/// `e^{ix} − 1 − ix·[compensate]` without cancellation for small `x`.
#[inline]
fn levy_term(x: f64, compensate: bool) -> Complex64 {
    let h = (0.5 * x).sin();
    Complex64::new(-2.0 * h * h, if compensate { sin_minus_x(x) } else { x.sin() })
}

/// `∫(e^{irs} − 1 − irs·1{r≤R}) ν_ξ(dr)` for one ray.
fn radial_cumulant(part: &RadialPart, s: f64, cut: Cut) -> Result<(Complex64, f64)> {
    if s == 0.0 {
        return Ok((Complex64::new(0.0, 0.0), 0.0));
    }
    if s < 0.0 {
        let (v, e) = radial_cumulant(part, -s, cut)?;
        return Ok((v.conj(), e));
    }
    let mut total = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    for &(r, m) in &part.atoms {
        total += levy_term(r * s, cut.compensates(r)) * m;
    }
    if let Some(d) = &part.density {
        let (v, e) = density_cumulant(d, s, cut)?;
        total += v;
        err += e;
    }
    Ok((total, err))
}

fn density_cumulant(d: &Density, s: f64, cut: Cut) -> Result<(Complex64, f64)> {
    let (lo, hi) = d.support();
    let breaks = d.breakpoints();
    let t0 = (2.0 * PI / s).max(1.0);
    let mut total = Complex64::new(0.0, 0.0);
    let mut err = 0.0;

    // Non-oscillatory part on the log scale.
    let near_hi = hi.min(t0);
    if near_hi > lo {
        let q = log_scale_c(
            |r| levy_term(r * s, cut.compensates(r)) * d.eval(r),
            lo,
            near_hi,
            &breaks,
            RAY_TOL,
        );
        check(q.value.norm(), q.error, q.converged, "near-field cumulant quadrature")?;
        total += q.value;
        err += q.error;
    }
    if hi <= t0 {
        return Ok((total, err));
    }

    // Oscillatory tail: ∫ e^{irs}ℓ − ∫ℓ − is∫rℓ·[mean form].
    let a = lo.max(t0);
    let half = PI / s;
    let (osc, osc_err) = oscillatory_tail(d, s, a, hi, half, &breaks)?;
    total += osc;
    err += osc_err;
    let mass = crate::measure::integrate_log_scale(|r| d.eval(r), a, hi, &breaks, RAY_TOL);
    check(mass.value, mass.error, mass.converged, "tail mass quadrature")?;
    total -= Complex64::new(mass.value, 0.0);
    err += mass.error;
    if cut == Cut::All {
        let m1 = crate::measure::integrate_log_scale(|r| r * d.eval(r), a, hi, &breaks, RAY_TOL);
        check(m1.value, m1.error, m1.converged, "tail first moment quadrature")?;
        total -= Complex64::new(0.0, s * m1.value);
        err += s * m1.error;
    }
    Ok((total, err))
}

/// `∫_a^hi e^{irs} ℓ(r) dr` by half periods, with Wynn acceleration when the
/// support is unbounded or too long to sweep.
fn oscillatory_tail(d: &Density, s: f64, a: f64, hi: f64, half: f64, breaks: &[f64]) -> Result<(Complex64, f64)> {
    let span = (hi - a) / half;
    let exact = hi.is_finite() && span <= MAX_EXACT_PIECES as f64;
    let n = if exact { span.ceil() as usize } else { TAIL_PIECES };
    let mut partial = Vec::with_capacity(n);
    let mut acc = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    let mut quiet = 0;
    for k in 0..n {
        let lo_k = a + k as f64 * half;
        let hi_k = (a + (k + 1) as f64 * half).min(hi);
        if hi_k <= lo_k {
            break;
        }
        let mut pts = vec![lo_k];
        pts.extend(breaks.iter().copied().filter(|b| *b > lo_k && *b < hi_k));
        pts.push(hi_k);
        let q = quad::integrate_breaks(
            |r: f64| {
                let v = d.eval(r);
                if v == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    let (sn, cs) = (r * s).sin_cos();
                    Complex64::new(cs * v, sn * v)
                }
            },
            &pts,
            RAY_TOL,
        );
        check(q.value.norm(), q.error, q.converged, "oscillatory piece")?;
        acc += q.value;
        err += q.error;
        partial.push(acc);
        if q.value.norm() <= 1e-18 * acc.norm().max(1e-300) {
            quiet += 1;
            if quiet >= 4 {
                return Ok((acc, err));
            }
        } else {
            quiet = 0;
        }
    }
    if exact {
        return Ok((acc, err));
    }
    let (lim, werr) = wynn_epsilon_c(&partial);
    if !(lim.re.is_finite() && lim.im.is_finite()) {
        return Err(LevyError::numeric("oscillatory tail extrapolation failed", werr));
    }
    Ok((lim, err + werr))
}

fn log_scale_c<F: Fn(f64) -> Complex64>(g: F, lo: f64, hi: f64, breaks: &[f64], tol: Tol) -> quad::Quad<Complex64> {
    let ylo = if lo == 0.0 { f64::NEG_INFINITY } else { lo.ln() };
    let yhi = if hi == f64::INFINITY { f64::INFINITY } else { hi.ln() };
    let mut pts = vec![ylo, yhi];
    if ylo < 0.0 && 0.0 < yhi {
        pts.push(0.0);
    }
    pts.extend(breaks.iter().map(|b| b.ln()).filter(|y| *y > ylo && *y < yhi));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    quad::integrate_breaks(
        |y: f64| {
            let r = y.exp();
            if r == 0.0 || !r.is_finite() {
                return Complex64::new(0.0, 0.0);
            }
            let v = g(r) * r;
            if v.re.is_nan() || v.im.is_nan() || (!(v.re.is_finite() && v.im.is_finite()) && y.abs() > 40.0) {
                Complex64::new(0.0, 0.0)
            } else {
                v
            }
        },
        &pts,
        tol,
    )
}

fn check(v: f64, err: f64, converged: bool, what: &str) -> Result<()> {
    if !v.is_finite() || !err.is_finite() {
        return Err(LevyError::numeric(format!("{what}: non-finite result"), err));
    }
    if !converged && err > 1e-9 * v.abs().max(1.0) {
        return Err(LevyError::numeric(format!("{what}: tolerance not met"), err));
    }
    Ok(())
}

/// A triplet prepared for repeated cumulant evaluation in a fixed centering.
#[derive(Debug, Clone)]
pub struct CumulantPlan {
    t: Triplet,
    cut: Cut,
}

impl CumulantPlan {
    /// Uses the mean form when `ν` has a first moment at ∞, else the drift
    /// form when it has one at 0, else the cut-at-one form.
    pub fn new(t: &Triplet) -> Result<CumulantPlan> {
        let order = [GammaRepr::Mean, GammaRepr::Drift, GammaRepr::Cut1];
        CumulantPlan::with_preference(t, &order)
    }

    fn with_preference(t: &Triplet, order: &[GammaRepr]) -> Result<CumulantPlan> {
        t.validate()?;
        let base = t.to_cut1()?;
        for &repr in order {
            match convert_gamma(&base, repr) {
                Ok(c) => {
                    return Ok(CumulantPlan {
                        t: c,
                        cut: Cut::of(repr),
                    })
                }
                Err(LevyError::ReprUnavailable(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        Ok(CumulantPlan {
            t: base,
            cut: Cut::Unit,
        })
    }

    pub fn repr(&self) -> GammaRepr {
        self.t.repr
    }

    pub fn eval(&self, z: &[f64]) -> Result<CumulantValue> {
        let d = self.t.dim();
        if z.len() != d {
            return Err(LevyError::Dimension(d, z.len()));
        }
        let mut quad_form = 0.0;
        for i in 0..d {
            for j in 0..d {
                quad_form += z[i] * self.t.a[i][j] * z[j];
            }
        }
        let mut value = Complex64::new(-0.5 * quad_form, dot(&self.t.gamma, z));
        let mut error = 0.0;
        for c in &self.t.nu.components {
            let s = c.xi.dot(z);
            let (v, e) = radial_cumulant(&c.radial, s, self.cut)?;
            value += v * c.weight;
            error += e * c.weight;
        }
        Ok(CumulantValue { value, error })
    }
}

/// `log μ̂(z)`.
pub fn cumulant(t: &Triplet, z: &[f64]) -> Result<Complex64> {
    Ok(cumulant_with_error(t, z)?.value)
}

pub fn cumulant_with_error(t: &Triplet, z: &[f64]) -> Result<CumulantValue> {
    CumulantPlan::new(t)?.eval(z)
}

/// Cumulant on a list of points, evaluated in parallel.
pub fn cumulant_grid(t: &Triplet, zs: &[Vec<f64>]) -> Result<Vec<CumulantValue>> {
    let plan = CumulantPlan::new(t)?;
    crate::par::map(zs.len(), |i| plan.eval(&zs[i])).into_iter().collect()
}

/// `∫ h(t) C_ρ(tz) dt`, the cumulant of `Λ_h ρ` computed without building
/// its triplet.
pub fn mapped_cumulant(k: &MappingKernel, rho: &Triplet, z: &[f64]) -> Result<Complex64> {
    Ok(mapped_cumulant_with_error(k, rho, z)?.value)
}

pub fn mapped_cumulant_with_error(k: &MappingKernel, rho: &Triplet, z: &[f64]) -> Result<CumulantValue> {
    if z.len() != rho.dim() {
        return Err(LevyError::Dimension(rho.dim(), z.len()));
    }
    let has_gauss = rho.a.iter().flatten().any(|x| *x != 0.0);
    if has_gauss && !k.condition.c1 && !k.two_sided {
        return Err(LevyError::NotDefinable(
            "Gaussian part present but ∫h(u)u²du diverges".into(),
        ));
    }
    if z.iter().all(|x| *x == 0.0) {
        return Ok(CumulantValue {
            value: Complex64::new(0.0, 0.0),
            error: 0.0,
        });
    }
    // Small |t| favours the mean form, large |t| the drift form.
    let small = CumulantPlan::with_preference(rho, &[GammaRepr::Mean, GammaRepr::Cut1])?;
    let large = CumulantPlan::with_preference(rho, &[GammaRepr::Drift, GammaRepr::Cut1])?;
    let first_err = std::sync::Mutex::new(None);
    let inner_err = std::sync::Mutex::new(0.0f64);
    let q = k.integrate(
        |t: f64| {
            let plan = if t.abs() < 1.0 { &small } else { &large };
            let tz: Vec<f64> = z.iter().map(|x| t * x).collect();
            match plan.eval(&tz) {
                Ok(c) => {
                    let mut e = inner_err.lock().unwrap();
                    *e = e.max(c.error);
                    c.value
                }
                Err(e) => {
                    first_err.lock().unwrap().get_or_insert(e);
                    Complex64::new(f64::NAN, f64::NAN)
                }
            }
        },
        &[1.0],
        OUTER_TOL,
    );
    if let Some(e) = first_err.into_inner().unwrap() {
        return Err(e);
    }
    let norm = q.value.re.abs().max(q.value.im.abs());
    if !norm.is_finite() {
        return Err(LevyError::NotDefinable("∫h(t)C_ρ(tz)dt diverges".into()));
    }
    if !q.converged && q.error > 1e-6 * norm.max(1.0) {
        if q.error > norm.max(1.0) {
            return Err(LevyError::NotDefinable(format!(
                "∫h(t)C_ρ(tz)dt does not settle (error estimate {:.3e})",
                q.error
            )));
        }
        return Err(LevyError::numeric("mapped cumulant tolerance not met", q.error));
    }
    let inner = inner_err.into_inner().unwrap();
    Ok(CumulantValue {
        value: q.value,
        error: q.error + inner * k.c.min(1e6),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{build_kernel, KernelFamily};
    use crate::measure::{AnalyticDensity, Direction, LevyMeasure};
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm().max(1.0)
    }

    #[test]
    fn delta_and_poisson() {
        let d = Triplet::delta(vec![1.5]);
        assert_eq!(cumulant(&d, &[2.0]).unwrap(), c(0.0, 3.0));
        let p = Triplet::poisson(2.0);
        for z in [-3.0, 0.1, 1.0, 7.5] {
            let want = (c(0.0, z).exp() - 1.0) * 2.0;
            assert!(close(cumulant(&p, &[z]).unwrap(), want, 1e-14));
        }
        assert_eq!(cumulant(&p, &[0.0]).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn symmetric_cauchy() {
        let pl = RadialPart::density(Density::power_law(1.0, 1.0, 0.0, f64::INFINITY));
        let nu = LevyMeasure::single(Direction::e1(1), 1.0, pl.clone()).push(Direction::new(vec![-1.0]).unwrap(), 1.0, pl);
        let t = Triplet::id0(nu, vec![0.0]).unwrap();
        for z in [0.3, 1.0, -2.0, 5.0] {
            let v = cumulant_with_error(&t, &[z]).unwrap();
            assert!(close(v.value, c(-PI * f64::abs(z), 0.0), 1e-9), "z={z}: {v:?}");
        }
    }

    #[test]
    fn one_sided_stable_closed_form() {
        // ∫₀^∞ (e^{iu}−1) u^{−1.5} du = Γ(−0.5) e^{−iπ/4}
        let t = Triplet::id0(
            LevyMeasure::single(
                Direction::e1(1),
                1.0,
                RadialPart::density(Density::power_law(1.0, 0.5, 0.0, f64::INFINITY)),
            ),
            vec![0.0],
        )
        .unwrap();
        let plan = CumulantPlan::new(&t).unwrap();
        assert_eq!(plan.repr(), GammaRepr::Drift);
        let g = crate::special::gamma(-0.5);
        let want = c((-PI / 4.0).cos(), (-PI / 4.0).sin()) * g;
        // drift 0, so C(1) = ∫(e^{iu}−1)ν(du)
        let d = convert_gamma(&t, GammaRepr::Drift).unwrap();
        let shift = c(0.0, d.gamma[0]);
        assert!(close(cumulant(&t, &[1.0]).unwrap(), want + shift, 1e-9));
    }

    #[test]
    fn gamma_subordinator() {
        // ℓ(r) = r⁻¹e^{−r}: C(z) = −log(1 − iz) in the drift form with drift 0.
        let a = AnalyticDensity::from_fn(|r: f64| (-r).exp() / r, 0.0, f64::INFINITY, 0.0, f64::INFINITY);
        let nu = LevyMeasure::single(Direction::e1(1), 1.0, RadialPart::density(Density::Analytic(a)));
        let t = Triplet::from_repr(vec![vec![0.0]], nu, vec![0.0], GammaRepr::Drift).unwrap();
        for z in [-4.0, -0.5, 0.01, 1.0, 3.0] {
            let want = -(c(1.0, -z)).ln();
            let got = cumulant(&t, &[z]).unwrap();
            assert!(close(got, want, 1e-10), "z={z}: {got} vs {want}");
        }
    }

    #[test]
    fn bounded_grid_support() {
        let nodes: Vec<f64> = (0..50).map(|i| 0.5 * 1.05f64.powi(i)).collect();
        let values: Vec<f64> = nodes.iter().map(|r| r.powf(-2.0)).collect();
        let g = crate::measure::GridDensity::new(nodes, values, crate::measure::Tail::Zero, crate::measure::Tail::Zero).unwrap();
        let (lo, hi) = g.support();
        let nu = LevyMeasure::single(Direction::e1(1), 1.0, RadialPart::density(Density::Grid(g)));
        let t = Triplet::id0(nu, vec![0.0]).unwrap();
        let z = 20.0;
        let want = quad::integrate(
            |r: f64| levy_term(r * z, r <= 1.0) * r.powf(-2.0),
            lo,
            hi,
            Tol::new(1e-15, 1e-13).with_limit(100_000),
        );
        let direct = CumulantPlan { t: t.clone(), cut: Cut::Unit }.eval(&[z]).unwrap().value;
        assert!(close(direct, want.value, 1e-9), "{direct} vs {:?}", want.value);
    }

    #[test]
    fn convolution_adds() {
        let a = AnalyticDensity::from_fn(|r: f64| r.powf(-1.5) * (-r).exp(), 0.0, f64::INFINITY, 0.5, f64::INFINITY);
        let nu = LevyMeasure::single(Direction::unit(vec![1.0, 1.0]).unwrap(), 0.7, RadialPart::density(Density::Analytic(a)));
        let t1 = Triplet::new(vec![vec![1.0, 0.2], vec![0.2, 0.5]], nu, vec![0.3, -0.1]).unwrap();
        let t2 = Triplet::id0(
            LevyMeasure::single(Direction::e1(2), 2.0, RadialPart::atoms(vec![(1.0, 1.0), (2.5, 0.5)])),
            vec![1.0, 0.0],
        )
        .unwrap();
        let sum = crate::measure::convolve(&t1, &t2).unwrap();
        for z in [[0.5, -1.0], [2.0, 3.0], [-4.0, 0.1]] {
            let lhs = cumulant(&sum, &z).unwrap();
            let rhs = cumulant(&t1, &z).unwrap() + cumulant(&t2, &z).unwrap();
            assert!(close(lhs, rhs, 1e-9), "{lhs} {rhs}");
            let p = crate::measure::power(&t1, 2.5).unwrap();
            assert!(close(cumulant(&p, &z).unwrap(), cumulant(&t1, &z).unwrap() * 2.5, 1e-9));
        }
    }

    #[test]
    fn mapped_cumulant_of_delta() {
        let k = build_kernel(KernelFamily::BarPhi { p: 1.0, alpha: 0.0 }).unwrap();
        let v = mapped_cumulant(&k, &Triplet::delta(vec![2.0]), &[0.7]).unwrap();
        assert_relative_eq!(v.im, 1.4, max_relative = 1e-10);
        assert!(v.re.abs() < 1e-14);
        assert_eq!(mapped_cumulant(&k, &Triplet::poisson(1.0), &[0.0]).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn mapped_cumulant_poisson_closed_form() {
        // BarPhi{1,0}: ∫₀¹ (e^{itz} − 1) t⁻¹ dt + i z·1 (γ = 1 compensates t ≤ 1 jumps)
        let k = build_kernel(KernelFamily::BarPhi { p: 1.0, alpha: 0.0 }).unwrap();
        let z = 1.3;
        let v = mapped_cumulant(&k, &Triplet::poisson(1.0), &[z]).unwrap();
        let want = quad::integrate(
            |t: f64| (c(0.0, t * z).exp() - 1.0) * (1.0 / t),
            0.0,
            1.0,
            Tol::new(1e-15, 1e-14),
        )
        .value;
        assert!(close(v, want, 1e-10), "{v} vs {want}");
    }

    #[test]
    fn gaussian_part_needs_c1() {
        let k = build_kernel(KernelFamily::BarPhi { p: 1.0, alpha: 0.5 }).unwrap().conjugate_kernel();
        let t = Triplet::new(vec![vec![1.0]], LevyMeasure::zero(1), vec![0.0]).unwrap();
        assert!(matches!(mapped_cumulant(&k, &t, &[1.0]), Err(LevyError::NotDefinable(_))));
        let k = build_kernel(KernelFamily::BarPhi { p: 1.0, alpha: 0.0 }).unwrap();
        let v = mapped_cumulant(&k, &t, &[2.0]).unwrap();
        assert_relative_eq!(v.re, -0.5 * 4.0 * 0.5, max_relative = 1e-10);
    }
}
