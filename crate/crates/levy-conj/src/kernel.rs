//! Mapping kernels `h`, their conjugates `h*(u) = h(1/u)u⁻⁴`, and the
//! functions `g_h(t) = ∫_t^b h(u)du`, `f_h = g_h⁻¹`.

use crate::error::{LevyError, Result};
use crate::expr::Expr;
use crate::quad::{self, Quad, QuadValue, Tol};
use crate::special::{beta_i, erfc_inv, gamma, gamma_p, gamma_q, ln_gamma, norm_cdf, norm_pdf};
use std::f64::consts::{PI, SQRT_2};

#[derive(Debug, Clone, PartialEq)]
pub enum KernelFamily {
    /// `Γ(p)⁻¹(1−u)^{p−1}u^{−α−1}` on (0, 1).
    BarPhi { p: f64, alpha: f64 },
    /// `Γ(q)⁻¹(−log u)^{q−1}u^{−α−1}` on (0, 1).
    LambdaQ { q: f64, alpha: f64 },
    /// `u^{−α−1}e^{−u^β}` on (0, ∞).
    Psi { alpha: f64, beta: f64 },
    /// Standard normal density on ℝ∖{0}.
    GaussTypeG,
    /// User kernel on (a, b) ⊂ (0, ∞).
    CustomC { h: Expr, a: f64, b: f64 },
    /// User kernel on ℝ∖{0}.
    CustomD { h: Expr },
}

impl KernelFamily {
    pub fn alpha(&self) -> Option<f64> {
        match *self {
            KernelFamily::BarPhi { alpha, .. }
            | KernelFamily::LambdaQ { alpha, .. }
            | KernelFamily::Psi { alpha, .. } => Some(alpha),
            _ => None,
        }
    }

    pub fn is_named(&self) -> bool {
        !matches!(self, KernelFamily::CustomC { .. } | KernelFamily::CustomD { .. })
    }

    fn two_sided(&self) -> bool {
        matches!(self, KernelFamily::GaussTypeG | KernelFamily::CustomD { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Condition {
    /// `∫h(u)u²du < ∞`
    pub c1: bool,
    /// `∫h(u)du < ∞`
    pub c2: bool,
    /// Two-sided, `∫h(u)(1+u²)du < ∞`
    pub d: bool,
}

impl Condition {
    pub fn label(&self) -> &'static str {
        match (self.d, self.c1, self.c2) {
            (true, _, _) => "D",
            (false, true, true) => "C1&C2",
            (false, true, false) => "C1",
            (false, false, true) => "C2",
            _ => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MappingKernel {
    pub family: KernelFamily,
    /// Whether this is `h*` for the stated family.
    pub conjugate: bool,
    pub a: f64,
    pub b: f64,
    pub condition: Condition,
    /// `c_h = g_h(a+)`, possibly infinite.
    pub c: f64,
    pub two_sided: bool,
    /// `h(u) ≍ u^{−κ₀−1}` as u ↓ 0 (`−∞` when h vanishes near 0).
    pub kappa0: f64,
    /// `h(u) ≍ u^{−κ∞−1}` as u → ∞ (`+∞` for faster than any power).
    pub kappa_inf: f64,
    ln_norm: f64,
}

const G_TOL: Tol = Tol::new(1e-300, 1e-13).with_limit(4000);

impl MappingKernel {
    pub fn h(&self, u: f64) -> f64 {
        if self.two_sided {
            if u == 0.0 || !u.is_finite() {
                return 0.0;
            }
            return if self.conjugate {
                let v = 1.0 / u;
                let v2 = v * v;
                self.h_base_two_sided(v) * v2 * v2
            } else {
                self.h_base_two_sided(u)
            };
        }
        if !(u > self.a && u < self.b) {
            return 0.0;
        }
        self.h_y(u.ln())
    }

    /// `h(e^y)` evaluated without forming `1 − e^y` by subtraction.
    pub fn h_y(&self, y: f64) -> f64 {
        let v = self.ln_h_y(y).exp();
        if v.is_nan() {
            0.0
        } else {
            v
        }
    }

    /// `log h(e^y)`, finite where `h` itself would overflow or underflow.
    pub fn ln_h_y(&self, y: f64) -> f64 {
        if self.conjugate {
            self.ln_h_base_y(-y) - 4.0 * y
        } else {
            self.ln_h_base_y(y)
        }
    }

    fn ln_h_base_y(&self, y: f64) -> f64 {
        match &self.family {
            KernelFamily::BarPhi { p, alpha } => {
                if y >= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let lead = if *p == 1.0 { 0.0 } else { (p - 1.0) * (-y.exp_m1()).ln() };
                lead - (alpha + 1.0) * y - self.ln_norm
            }
            KernelFamily::LambdaQ { q, alpha } => {
                if y >= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let lead = if *q == 1.0 { 0.0 } else { (q - 1.0) * (-y).ln() };
                lead - (alpha + 1.0) * y - self.ln_norm
            }
            KernelFamily::Psi { alpha, beta } => -(alpha + 1.0) * y - (beta * y).exp(),
            KernelFamily::CustomC { h, .. } => h.eval(y.exp()).ln(),
            KernelFamily::GaussTypeG | KernelFamily::CustomD { .. } => self.h_base_two_sided(y.exp()).ln(),
        }
    }

    fn h_base_two_sided(&self, u: f64) -> f64 {
        match &self.family {
            KernelFamily::GaussTypeG => norm_pdf(u),
            KernelFamily::CustomD { h } => h.eval(u),
            _ => unreachable!(),
        }
    }

    /// Parameters of the conjugate kernel (involutive on family parameters).
    pub fn conjugate_kernel(&self) -> MappingKernel {
        let mut k = build_oriented(self.family.clone(), !self.conjugate)
            .expect("conjugate of a valid kernel is valid");
        k.conjugate = !self.conjugate;
        k
    }

    /// `∫ h(t) t^k dt` over the kernel's domain (signed `t` for two-sided
    /// kernels with integer `k`; otherwise `|t|^k`). `+∞` when divergent.
    pub fn moment(&self, k: f64) -> f64 {
        if self.conjugate {
            // ∫ t^k h*(t) dt = ∫ v^{2−k} h(v) dv
            return base_moment(&self.family, 2.0 - k, self);
        }
        base_moment(&self.family, k, self)
    }

    /// Integral of `φ(t)h(t)` over the kernel domain, computed in `y = log|t|`.
    /// For two-sided kernels `φ` receives signed `t`.
    pub fn integrate<T: QuadValue, F: Fn(f64) -> T>(&self, phi: F, breaks: &[f64], tol: Tol) -> Quad<T> {
        if self.two_sided {
            let pos = self.integrate_side(&phi, 1.0, breaks, tol);
            let neg = self.integrate_side(&phi, -1.0, breaks, tol);
            return Quad {
                value: pos.value + neg.value,
                error: pos.error + neg.error,
                evals: pos.evals + neg.evals,
                converged: pos.converged && neg.converged,
            };
        }
        self.integrate_side(&phi, 1.0, breaks, tol)
    }

    /// One side of [`MappingKernel::integrate`]; `sign = -1` only for two-sided kernels.
    pub(crate) fn integrate_side<T: QuadValue, F: Fn(f64) -> T>(
        &self,
        phi: &F,
        sign: f64,
        breaks: &[f64],
        tol: Tol,
    ) -> Quad<T> {
        let (ylo, yhi) = self.y_range();
        let mut pts = vec![ylo, yhi];
        for &b in breaks {
            if b > 0.0 && b.is_finite() {
                let y = b.ln();
                if y > ylo && y < yhi {
                    pts.push(y);
                }
            }
        }
        if ylo < 0.0 && yhi > 0.0 {
            pts.push(0.0);
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let two = self.two_sided;
        quad::integrate_breaks(
            |y: f64| {
                let t = y.exp();
                if t == 0.0 || !t.is_finite() {
                    return T::default();
                }
                let hv = if two { self.h(sign * t) } else { self.h_y(y) };
                if hv == 0.0 || !hv.is_finite() {
                    return T::default();
                }
                phi(sign * t) * (hv * t)
            },
            &pts,
            tol,
        )
    }

    /// `(log a, log b)`, or `(−∞, ∞)` for `|t|` of two-sided kernels.
    pub fn y_range(&self) -> (f64, f64) {
        if self.two_sided {
            return (f64::NEG_INFINITY, f64::INFINITY);
        }
        let lo = if self.a == 0.0 { f64::NEG_INFINITY } else { self.a.ln() };
        let hi = if self.b == f64::INFINITY { f64::INFINITY } else { self.b.ln() };
        (lo, hi)
    }

    /// `g_h(t) = ∫_t^b h(u)du` (two-sided: over `(t, ∞)∖{0}`).
    pub fn g(&self, t: f64) -> Result<f64> {
        if self.two_sided {
            if t.is_nan() {
                return Err(LevyError::Argument("t is NaN".into()));
            }
        } else if !(t > self.a && t < self.b) {
            return Err(LevyError::Argument(format!(
                "t = {t} outside ({}, {})",
                self.a, self.b
            )));
        }
        if let Some(v) = self.g_closed(t) {
            return Ok(v);
        }
        Ok(self.g_quad(t))
    }

    fn g_closed(&self, t: f64) -> Option<f64> {
        let fam = &self.family;
        if !self.conjugate {
            match *fam {
                KernelFamily::BarPhi { p, alpha } => {
                    if p == 1.0 {
                        let y = t.ln();
                        return Some(if alpha == 0.0 { -y } else { (-alpha * y).exp_m1() / alpha });
                    }
                    if alpha < 0.0 {
                        return Some(self.c * beta_i(p, -alpha, 1.0 - t));
                    }
                }
                KernelFamily::LambdaQ { q, alpha } => {
                    let x = -t.ln();
                    if alpha < 0.0 {
                        return Some((-alpha).powf(-q) * gamma_p(q, -alpha * x));
                    }
                    if alpha == 0.0 {
                        return Some((q * x.ln() - ln_gamma(q + 1.0)).exp());
                    }
                }
                KernelFamily::Psi { alpha, beta } => {
                    if alpha < 0.0 {
                        let a = -alpha / beta;
                        return Some(gamma(a) / beta * gamma_q(a, t.powf(beta)));
                    }
                }
                KernelFamily::GaussTypeG => return Some(1.0 - norm_cdf(t)),
                _ => {}
            }
        } else {
            match *fam {
                KernelFamily::BarPhi { p, alpha } => {
                    return Some(self.c * beta_i(2.0 - alpha, p, 1.0 / t));
                }
                KernelFamily::LambdaQ { q, alpha } => {
                    return Some((2.0 - alpha).powf(-q) * gamma_q(q, (2.0 - alpha) * t.ln()));
                }
                KernelFamily::Psi { alpha, beta } => {
                    let a = (2.0 - alpha) / beta;
                    return Some(gamma(a) / beta * gamma_p(a, t.powf(-beta)));
                }
                KernelFamily::GaussTypeG => {
                    // ∫ v²φ(v) over (−∞, 1/t) for t < 0, over (0, 1/t) for t > 0.
                    if t == 0.0 {
                        return Some(0.5);
                    }
                    let x = 1.0 / t;
                    let below = norm_cdf(x) - x * norm_pdf(x);
                    return Some(if t > 0.0 { below - 0.5 } else { 0.5 + below });
                }
                _ => {}
            }
        }
        None
    }

    fn g_quad(&self, t: f64) -> f64 {
        if self.two_sided {
            let h = |u: f64| self.h(u);
            if t >= 0.0 {
                return quad::integrate(h, t, f64::INFINITY, G_TOL).value;
            }
            let neg = quad::integrate(h, t, 0.0, G_TOL).value;
            let pos = quad::integrate(h, 0.0, f64::INFINITY, G_TOL).value;
            return neg + pos;
        }
        self.g_quad_y(t.ln())
    }

    /// `g(e^y)` by quadrature in `v = log u`, usable where `e^y` underflows.
    fn g_quad_y(&self, y: f64) -> f64 {
        let (_, yhi) = self.y_range();
        let mut pts = vec![y, yhi];
        if y < 0.0 && yhi > 0.0 {
            pts.insert(1, 0.0);
        }
        quad::integrate_breaks(
            |v: f64| {
                let w = (self.ln_h_y(v) + v).exp();
                if w.is_finite() {
                    w
                } else {
                    0.0
                }
            },
            &pts,
            G_TOL,
        )
        .value
    }

    /// `f_h(s)` for `s ∈ (0, c_h)`.
    pub fn f(&self, s: f64) -> Result<f64> {
        self.check_s(s)?;
        if let Some(v) = self.f_closed(s) {
            return Ok(v);
        }
        self.f_generic(s)
    }

    /// `log f_h(s)` (one-sided kernels), finite even where `f` underflows.
    pub fn log_f(&self, s: f64) -> Result<f64> {
        if self.two_sided {
            return Err(LevyError::Unsupported("log f for a two-sided kernel".into()));
        }
        self.check_s(s)?;
        if !self.conjugate {
            match self.family {
                KernelFamily::BarPhi { p, alpha } if p == 1.0 => {
                    return Ok(if alpha == 0.0 { -s } else { -(alpha * s).ln_1p() / alpha });
                }
                KernelFamily::LambdaQ { q, alpha } if alpha == 0.0 => {
                    return Ok(-((ln_gamma(q + 1.0) + s.ln()) / q).exp());
                }
                _ => {}
            }
        }
        if let Some(v) = self.f_closed(s) {
            if v > 0.0 {
                return Ok(v.ln());
            }
        }
        self.solve_y(s)
    }

    fn check_s(&self, s: f64) -> Result<()> {
        if !(s > 0.0 && s < self.c) {
            return Err(LevyError::Argument(format!("s = {s} outside (0, {})", self.c)));
        }
        Ok(())
    }

    fn f_closed(&self, s: f64) -> Option<f64> {
        if !self.conjugate {
            match self.family {
                KernelFamily::BarPhi { p, alpha } => {
                    if p == 1.0 {
                        return Some(if alpha == 0.0 {
                            (-s).exp()
                        } else {
                            (-(alpha * s).ln_1p() / alpha).exp()
                        });
                    }
                    if alpha == -1.0 {
                        return Some(1.0 - (gamma(p + 1.0) * s).powf(1.0 / p));
                    }
                }
                KernelFamily::LambdaQ { q, alpha } => {
                    if alpha == 0.0 {
                        return Some((-(gamma(q + 1.0) * s).powf(1.0 / q)).exp());
                    }
                    if q == 1.0 {
                        return Some((-(alpha * s).ln_1p() / alpha).exp());
                    }
                }
                KernelFamily::Psi { alpha, beta } => {
                    if alpha == -beta {
                        return Some((-(beta * s).ln()).powf(1.0 / beta));
                    }
                }
                KernelFamily::GaussTypeG => return Some(SQRT_2 * erfc_inv(2.0 * s)),
                _ => {}
            }
        } else {
            match self.family {
                KernelFamily::BarPhi { p, alpha } | KernelFamily::LambdaQ { q: p, alpha }
                    if p == 1.0 =>
                {
                    return Some(((2.0 - alpha) * s).powf(-1.0 / (2.0 - alpha)));
                }
                KernelFamily::Psi { alpha, beta } => {
                    if (2.0 - alpha) == beta {
                        return Some((-(-beta * s).ln_1p()).powf(-1.0 / beta));
                    }
                }
                _ => {}
            }
        }
        None
    }

    /// `f_h(s)` by bracketed root finding on `g_h`, ignoring closed forms of `f`.
    pub fn f_generic(&self, s: f64) -> Result<f64> {
        self.check_s(s)?;
        if self.two_sided {
            return self.solve_t(s);
        }
        Ok(self.solve_y(s)?.exp())
    }

    /// Solves `g(e^y) = s` in `y`.
    fn solve_y(&self, s: f64) -> Result<f64> {
        let (ylo, yhi) = self.y_range();
        let gy = |y: f64| {
            let t = y.exp();
            if t > 0.0 {
                self.g(t).unwrap_or(f64::NAN)
            } else {
                self.g_quad_y(y)
            }
        };
        let mut y0 = self.initial_y(s);
        if !(y0 > ylo && y0 < yhi) {
            y0 = match (ylo.is_finite(), yhi.is_finite()) {
                (true, true) => 0.5 * (ylo + yhi),
                (true, false) => ylo + 1.0,
                (false, true) => yhi - 1.0,
                (false, false) => 0.0,
            };
        }
        solve_decreasing(gy, s, y0, ylo, yhi)
    }

    fn solve_t(&self, s: f64) -> Result<f64> {
        let gt = |t: f64| self.g(t).unwrap_or(f64::NAN);
        solve_decreasing(gt, s, 0.0, f64::NEG_INFINITY, f64::INFINITY)
    }

    /// Starting point for the root search from the endpoint asymptotics.
    fn initial_y(&self, s: f64) -> f64 {
        let (ylo, yhi) = self.y_range();
        let guess = if !self.conjugate {
            match self.family.alpha() {
                Some(a) if a > 0.0 && s > 1.0 => -(a * s).ln() / a,
                Some(a) if a == 0.0 && s > 1.0 => -s,
                _ => 0.5 * (ylo.max(-1.0) + yhi.min(1.0)),
            }
        } else {
            match self.family.alpha() {
                Some(a) if s < 0.1 * self.c => -((2.0 - a) * s).ln() / (2.0 - a),
                _ => 0.5 * (ylo.max(-1.0) + yhi.min(1.0)),
            }
        };
        if guess.is_finite() {
            guess
        } else {
            0.0
        }
    }
}

/// Root of a decreasing function `g(x) = s` with bracket expansion from `x0`
/// toward the limits `(lo, hi)`, refined to machine precision in `x`.
pub fn solve_decreasing<G: Fn(f64) -> f64>(g: G, s: f64, x0: f64, lo: f64, hi: f64) -> Result<f64> {
    let toward = |x: f64, lim: f64, step: f64| -> f64 {
        if lim.is_finite() {
            let d = (lim - x) * 0.5;
            x + d.signum() * d.abs().min(step)
        } else {
            x + lim.signum() * step
        }
    };
    let g0 = g(x0);
    if g0.is_nan() {
        return Err(LevyError::numeric("g undefined at starting point", f64::NAN));
    }
    let (mut a, mut b) = (x0, x0);
    let (mut ga, mut gb) = (g0, g0);
    let mut step = 1.0;
    let mut iters = 0;
    // a: g(a) >= s, b: g(b) <= s
    while ga < s {
        iters += 1;
        b = a;
        gb = ga;
        a = toward(a, lo, step);
        ga = g(a);
        step *= 2.0;
        if iters > 2000 || !(a > lo) {
            return Err(LevyError::numeric("root bracket expansion failed toward lower end", ga - s));
        }
    }
    step = 1.0;
    while gb > s {
        iters += 1;
        a = b;
        ga = gb;
        b = toward(b, hi, step);
        gb = g(b);
        step *= 2.0;
        if iters > 2000 || !(b < hi) {
            return Err(LevyError::numeric("root bracket expansion failed toward upper end", gb - s));
        }
    }
    if ga == s {
        return Ok(a);
    }
    if gb == s {
        return Ok(b);
    }
    // Illinois regula falsi with bisection safeguard.
    let mut side = 0i32;
    for _ in 0..400 {
        let width = b - a;
        if width.abs() <= 2.0 * f64::EPSILON * a.abs().max(b.abs()).max(f64::MIN_POSITIVE) {
            break;
        }
        let (fa, fb) = (ga - s, gb - s);
        let mut x = if fa.is_finite() && fb.is_finite() && fa != fb {
            b - fb * (b - a) / (fb - fa)
        } else {
            0.5 * (a + b)
        };
        if !(x > a.min(b) && x < a.max(b)) || side.abs() > 3 {
            x = 0.5 * (a + b);
            side = 0;
        }
        if x == a || x == b {
            break;
        }
        let gx = g(x);
        if gx.is_nan() {
            return Err(LevyError::numeric("g undefined inside bracket", f64::NAN));
        }
        if gx == s {
            return Ok(x);
        }
        if gx > s {
            a = x;
            ga = gx;
            side = if side < 0 { side - 1 } else { -1 };
            if side < -1 {
                gb = s + (gb - s) * 0.5;
            }
        } else {
            b = x;
            gb = gx;
            side = if side > 0 { side + 1 } else { 1 };
            if side > 1 {
                ga = s + (ga - s) * 0.5;
            }
        }
    }
    Ok(0.5 * (a + b))
}

fn base_moment(fam: &KernelFamily, k: f64, kern: &MappingKernel) -> f64 {
    match *fam {
        KernelFamily::BarPhi { p, alpha } => {
            if k > alpha {
                (ln_gamma(k - alpha) - ln_gamma(p + k - alpha)).exp()
            } else {
                f64::INFINITY
            }
        }
        KernelFamily::LambdaQ { q, alpha } => {
            if k > alpha {
                (k - alpha).powf(-q)
            } else {
                f64::INFINITY
            }
        }
        KernelFamily::Psi { alpha, beta } => {
            if k > alpha {
                gamma((k - alpha) / beta) / beta
            } else {
                f64::INFINITY
            }
        }
        KernelFamily::GaussTypeG => {
            if k <= -1.0 {
                return f64::INFINITY;
            }
            // signed for odd integer k, absolute otherwise
            if k.fract() == 0.0 && (k as i64) % 2 != 0 {
                return 0.0;
            }
            2f64.powf(k / 2.0) * gamma((k + 1.0) / 2.0) / PI.sqrt()
        }
        KernelFamily::CustomC { .. } | KernelFamily::CustomD { .. } => custom_moment(kern, k),
    }
}

fn custom_moment(kern: &MappingKernel, k: f64) -> f64 {
    // h ≍ u^{−κ−1}: ∫_0 u^k h converges iff k > κ₀, ∫^∞ iff k < κ∞.
    // `k` is already in the base orientation; undo the conjugate's support.
    let k_eff = k;
    let base = if kern.conjugate {
        let (a, b) = if kern.two_sided {
            (kern.a, kern.b)
        } else {
            (
                if kern.b == f64::INFINITY { 0.0 } else { 1.0 / kern.b },
                if kern.a == 0.0 { f64::INFINITY } else { 1.0 / kern.a },
            )
        };
        MappingKernel {
            conjugate: false,
            a,
            b,
            kappa0: 2.0 - kern.kappa_inf,
            kappa_inf: 2.0 - kern.kappa0,
            ..kern.clone()
        }
    } else {
        kern.clone()
    };
    let (k0, kinf) = (base.kappa0, base.kappa_inf);
    let zero_end = base.two_sided || base.a == 0.0;
    let inf_end = base.two_sided || base.b == f64::INFINITY;
    if (zero_end && !(k_eff > k0 + 1e-9)) || (inf_end && !(k_eff < kinf - 1e-9)) {
        return f64::INFINITY;
    }
    let signed = base.two_sided && k_eff.fract() == 0.0;
    base.integrate(
        |t: f64| {
            if signed {
                t.signum().powi(k_eff as i32) * t.abs().powf(k_eff)
            } else {
                t.abs().powf(k_eff)
            }
        },
        &[],
        Tol::new(1e-300, 1e-12),
    )
    .value
}

/// Log-slope of `h` at a tiny or huge argument, as `κ` in `h ≍ u^{−κ−1}`.
fn endpoint_kappa(h: &dyn Fn(f64) -> f64, at_zero: bool) -> f64 {
    let (u1, u2) = if at_zero { (1e-14, 1e-12) } else { (1e12, 1e14) };
    let (h1, h2) = (h(u1), h(u2));
    if h1 <= 0.0 && h2 <= 0.0 {
        return if at_zero { f64::NEG_INFINITY } else { f64::INFINITY };
    }
    if !(h1 > 0.0 && h2 > 0.0) {
        return if at_zero { f64::NEG_INFINITY } else { f64::INFINITY };
    }
    let slope = (h2.ln() - h1.ln()) / (u2.ln() - u1.ln());
    let kappa = -slope - 1.0;
    // Super-polynomial decay shows up as a steep slope.
    if at_zero && kappa < -50.0 {
        f64::NEG_INFINITY
    } else if !at_zero && kappa > 50.0 {
        f64::INFINITY
    } else {
        (kappa * 1e6).round() / 1e6
    }
}

/// Builds and classifies a kernel of the given family.
pub fn build_kernel(family: KernelFamily) -> Result<MappingKernel> {
    build_oriented(family, false)
}

fn build_oriented(family: KernelFamily, conjugate: bool) -> Result<MappingKernel> {
    let bad = |m: String| Err(LevyError::Argument(m));
    let (a, b, ln_norm, k0, kinf) = match &family {
        KernelFamily::BarPhi { p, alpha } => {
            if !(*p > 0.0 && *alpha < 2.0 && alpha.is_finite() && p.is_finite()) {
                return bad(format!("bar_phi needs p > 0 and alpha < 2 (got p={p}, alpha={alpha})"));
            }
            (0.0, 1.0, ln_gamma(*p), *alpha, f64::INFINITY)
        }
        KernelFamily::LambdaQ { q, alpha } => {
            if !(*q > 0.0 && *alpha < 2.0 && alpha.is_finite() && q.is_finite()) {
                return bad(format!("lambda_q needs q > 0 and alpha < 2 (got q={q}, alpha={alpha})"));
            }
            (0.0, 1.0, ln_gamma(*q), *alpha, f64::INFINITY)
        }
        KernelFamily::Psi { alpha, beta } => {
            if !(*beta > 0.0 && *alpha < 2.0 && alpha.is_finite() && beta.is_finite()) {
                return bad(format!("psi needs alpha < 2 and beta > 0 (got alpha={alpha}, beta={beta})"));
            }
            (0.0, f64::INFINITY, 0.0, *alpha, f64::INFINITY)
        }
        KernelFamily::GaussTypeG => (f64::NEG_INFINITY, f64::INFINITY, 0.0, -1.0, f64::INFINITY),
        KernelFamily::CustomC { h, a, b } => {
            if !(*a >= 0.0 && b > a) {
                return bad(format!("custom kernel needs 0 <= a < b (got {a}, {b})"));
            }
            let probe = |u: f64| h.eval(u);
            for i in 1..40 {
                let u = if b.is_finite() {
                    a + (b - a) * i as f64 / 40.0
                } else {
                    a + 10f64.powf(-3.0 + 0.2 * i as f64)
                };
                let v = probe(u);
                if !(v > 0.0 && v.is_finite()) {
                    return bad(format!("custom kernel h({u}) = {v} is not positive"));
                }
            }
            let k0 = if *a == 0.0 { endpoint_kappa(&probe, true) } else { f64::NEG_INFINITY };
            let ki = if *b == f64::INFINITY { endpoint_kappa(&probe, false) } else { f64::INFINITY };
            (*a, *b, 0.0, k0, ki)
        }
        KernelFamily::CustomD { h } => {
            for i in 1..40 {
                for sgn in [-1.0, 1.0] {
                    let u = sgn * 10f64.powf(-3.0 + 0.2 * i as f64);
                    let v = h.eval(u);
                    if !(v > 0.0 && v.is_finite()) {
                        return bad(format!("custom kernel h({u}) = {v} is not positive"));
                    }
                }
            }
            let both = |u: f64| h.eval(u).max(h.eval(-u));
            (
                f64::NEG_INFINITY,
                f64::INFINITY,
                0.0,
                endpoint_kappa(&both, true),
                endpoint_kappa(&both, false),
            )
        }
    };
    let two_sided = family.two_sided();
    let (a, b, kappa0, kappa_inf) = if conjugate && !two_sided {
        (
            if b == f64::INFINITY { 0.0 } else { 1.0 / b },
            if a == 0.0 { f64::INFINITY } else { 1.0 / a },
            2.0 - kinf,
            2.0 - k0,
        )
    } else if conjugate {
        (a, b, 2.0 - kinf, 2.0 - k0)
    } else {
        (a, b, k0, kinf)
    };
    let mut k = MappingKernel {
        family,
        conjugate,
        a,
        b,
        condition: Condition {
            c1: false,
            c2: false,
            d: false,
        },
        c: f64::NAN,
        two_sided,
        kappa0,
        kappa_inf,
        ln_norm,
    };
    let m0 = k.moment(0.0);
    let m2 = k.moment(2.0);
    k.c = m0;
    k.condition = if two_sided {
        Condition {
            c1: m2.is_finite(),
            c2: m0.is_finite(),
            d: m0.is_finite() && m2.is_finite(),
        }
    } else {
        Condition {
            c1: m2.is_finite(),
            c2: m0.is_finite(),
            d: false,
        }
    };
    if two_sided && !k.condition.d {
        return Err(LevyError::Argument("two-sided kernel violates ∫h(1+u²) < ∞".into()));
    }
    if !k.condition.c1 && !k.condition.c2 {
        return Err(LevyError::Argument("kernel satisfies neither (C1) nor (C2)".into()));
    }
    Ok(k)
}

pub fn conjugate_kernel(k: &MappingKernel) -> MappingKernel {
    k.conjugate_kernel()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsymptoticEnd {
    /// `s → c_h` for the forward kernel.
    FAtC,
    /// `s ↓ 0` for the conjugate kernel.
    FStarAt0,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticReport {
    pub which: AsymptoticEnd,
    /// `(s, f(s)/asymptote(s))`; for exponential decay the ratio of decay rates.
    pub ratios: Vec<(f64, f64)>,
    pub rate_only: bool,
}

/// Compares `f` (or `f*`) with its leading asymptote at `s ∈ {10², 10⁴, 10⁶}`
/// (or `{10⁻², 10⁻⁴, 10⁻⁶}`).
pub fn asymptotic_check(k: &MappingKernel, which: AsymptoticEnd) -> Result<AsymptoticReport> {
    if !k.family.is_named() || k.two_sided {
        return Err(LevyError::Unsupported("asymptotics are known for the named one-sided families only".into()));
    }
    match which {
        AsymptoticEnd::FAtC => {
            let k = if k.conjugate { k.conjugate_kernel() } else { k.clone() };
            let probes = [1e2, 1e4, 1e6];
            let (rate_only, log_asym): (bool, Box<dyn Fn(f64) -> f64>) = match k.family {
                KernelFamily::BarPhi { p, alpha } if alpha > 0.0 => {
                    let gp = gamma(p);
                    (false, Box::new(move |s: f64| -(alpha * gp * s).ln() / alpha))
                }
                KernelFamily::BarPhi { p, alpha } if alpha == 0.0 => {
                    let gp = gamma(p);
                    (true, Box::new(move |s: f64| -gp * s))
                }
                KernelFamily::LambdaQ { q, alpha } if alpha > 0.0 => {
                    let gq = gamma(q);
                    (
                        false,
                        Box::new(move |s: f64| {
                            -(alpha * gq * s).ln() / alpha + (q - 1.0) / alpha * (s.ln() / alpha).ln()
                        }),
                    )
                }
                KernelFamily::LambdaQ { q, alpha } if alpha == 0.0 => {
                    let gq1 = gamma(q + 1.0);
                    (false, Box::new(move |s: f64| -(gq1 * s).powf(1.0 / q)))
                }
                KernelFamily::Psi { alpha, .. } if alpha > 0.0 => {
                    (false, Box::new(move |s: f64| -(alpha * s).ln() / alpha))
                }
                KernelFamily::Psi { alpha, .. } if alpha == 0.0 => (true, Box::new(move |s: f64| -s)),
                _ => {
                    return Err(LevyError::Unsupported(
                        "no asymptote at c_h for alpha < 0 (c_h is finite)".into(),
                    ))
                }
            };
            let mut ratios = Vec::new();
            for &s in &probes {
                let r = if rate_only {
                    let d = k.log_f(s)? - k.log_f(0.5 * s)?;
                    d / (log_asym(s) - log_asym(0.5 * s))
                } else {
                    (k.log_f(s)? - log_asym(s)).exp()
                };
                ratios.push((s, r));
            }
            Ok(AsymptoticReport {
                which,
                ratios,
                rate_only,
            })
        }
        AsymptoticEnd::FStarAt0 => {
            let ks = if k.conjugate { k.clone() } else { k.conjugate_kernel() };
            let log_asym: Box<dyn Fn(f64) -> f64> = match ks.family {
                KernelFamily::BarPhi { p, alpha } => {
                    let gp = gamma(p);
                    Box::new(move |s: f64| -((2.0 - alpha) * gp * s).ln() / (2.0 - alpha))
                }
                KernelFamily::LambdaQ { q, alpha } => {
                    let e = 2.0 - alpha;
                    let lgq = ln_gamma(q);
                    Box::new(move |s: f64| {
                        -q / e * e.ln() - (lgq + s.ln()) / e + (q - 1.0) / e * (-s.ln()).ln()
                    })
                }
                KernelFamily::Psi { alpha, .. } => Box::new(move |s: f64| -((2.0 - alpha) * s).ln() / (2.0 - alpha)),
                _ => unreachable!(),
            };
            let mut ratios = Vec::new();
            for s in [1e-2, 1e-4, 1e-6] {
                if s >= ks.c {
                    continue;
                }
                ratios.push((s, (ks.log_f(s)? - log_asym(s)).exp()));
            }
            Ok(AsymptoticReport {
                which,
                ratios,
                rate_only: false,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bar_phi(p: f64, alpha: f64) -> MappingKernel {
        build_kernel(KernelFamily::BarPhi { p, alpha }).unwrap()
    }

    #[test]
    fn bar_phi_examples() {
        let k = bar_phi(1.0, 0.0);
        assert_eq!((k.a, k.b, k.c), (0.0, 1.0, f64::INFINITY));
        assert!(k.condition.c1 && !k.condition.c2);
        for s in [0.1, 1.0, 7.0] {
            assert_relative_eq!(k.f(s).unwrap(), (-s).exp(), max_relative = 1e-15);
        }
        let k = bar_phi(2.0, -1.0);
        assert_relative_eq!(k.c, 0.5, max_relative = 1e-14);
        assert!(k.condition.c1 && k.condition.c2);
        assert_relative_eq!(k.f(0.125).unwrap(), 0.5, max_relative = 1e-14);
        assert_relative_eq!(k.f_generic(0.125).unwrap(), 0.5, max_relative = 1e-12);
    }

    #[test]
    fn conjugate_bar_phi() {
        let k = bar_phi(1.0, 0.5).conjugate_kernel();
        assert_eq!((k.a, k.b), (1.0, f64::INFINITY));
        assert_relative_eq!(k.c, 1.0 / 1.5, max_relative = 1e-14);
        assert_relative_eq!(k.h(2.0), 2f64.powf(-2.5), max_relative = 1e-14);
        assert!(k.condition.c2 && !k.condition.c1);
        let s = 0.3;
        assert_relative_eq!(k.f(s).unwrap(), (1.5 * s).powf(-1.0 / 1.5), max_relative = 1e-14);
        assert_eq!(k.conjugate_kernel(), bar_phi(1.0, 0.5));
    }

    #[test]
    fn psi_examples() {
        let k = build_kernel(KernelFamily::Psi { alpha: -1.0, beta: 1.0 }).unwrap();
        assert_relative_eq!(k.c, 1.0, max_relative = 1e-14);
        assert_relative_eq!(k.f(0.3).unwrap(), -(0.3f64).ln(), max_relative = 1e-14);
        assert_relative_eq!(k.f_generic(0.3).unwrap(), -(0.3f64).ln(), max_relative = 1e-12);
        let k = build_kernel(KernelFamily::Psi { alpha: -0.6, beta: 2.0 }).unwrap();
        assert_relative_eq!(k.c, gamma(0.3) / 2.0, max_relative = 1e-13);
    }

    #[test]
    fn lambda_q_closed_form() {
        let k = build_kernel(KernelFamily::LambdaQ { q: 2.0, alpha: 0.0 }).unwrap();
        for s in [0.01, 0.5, 3.0] {
            let want = (-(2.0 * s as f64).sqrt()).exp();
            assert_relative_eq!(k.f(s).unwrap(), want, max_relative = 1e-14);
            assert_relative_eq!(k.f_generic(s).unwrap(), want, max_relative = 1e-11);
        }
    }

    #[test]
    fn bar_phi_half_closed_form() {
        let k = bar_phi(1.0, 0.5);
        assert_relative_eq!(k.f(2.0).unwrap(), 4.0f64.powi(-1) * 1.0, max_relative = 1e-14);
    }

    #[test]
    fn g_of_f_round_trip() {
        let kernels = [
            bar_phi(2.0, 0.5),
            bar_phi(0.5, -0.7),
            bar_phi(1.7, 1.2).conjugate_kernel(),
            build_kernel(KernelFamily::LambdaQ { q: 0.6, alpha: 0.3 }).unwrap(),
            build_kernel(KernelFamily::Psi { alpha: 0.5, beta: 1.0 }).unwrap().conjugate_kernel(),
            build_kernel(KernelFamily::GaussTypeG).unwrap(),
        ];
        for k in &kernels {
            let hi = if k.c.is_finite() { k.c } else { 1e4 };
            for i in 1..30 {
                let s = hi * (i as f64 / 30.0).powi(3);
                let t = k.f(s).unwrap();
                let back = k.g(t).unwrap();
                assert!((back - s).abs() <= 1e-10 * s.max(1.0), "{:?}: s={s} g(f(s))={back}", k.family);
            }
        }
    }

    #[test]
    fn conjugate_constants_by_quadrature() {
        for (p, alpha) in [(0.5, -1.0), (1.0, 0.3), (2.5, 1.5), (3.0, -2.0)] {
            let ks = bar_phi(p, alpha).conjugate_kernel();
            let q = ks.integrate(|_| 1.0, &[], Tol::new(1e-300, 1e-13)).value;
            assert_relative_eq!(q, gamma(2.0 - alpha) / gamma(p + 2.0 - alpha), max_relative = 1e-9);
        }
        let ks = build_kernel(KernelFamily::LambdaQ { q: 1.5, alpha: 0.5 }).unwrap().conjugate_kernel();
        let q = ks.integrate(|_| 1.0, &[], Tol::new(1e-300, 1e-13)).value;
        assert_relative_eq!(q, 1.5f64.powf(-1.5), max_relative = 1e-9);
    }

    #[test]
    fn gauss_type_g() {
        let k = build_kernel(KernelFamily::GaussTypeG).unwrap();
        assert!(k.condition.d);
        assert_relative_eq!(k.c, 1.0, max_relative = 1e-14);
        let ks = k.conjugate_kernel();
        assert_relative_eq!(ks.c, 1.0, max_relative = 1e-14);
        assert_relative_eq!(ks.g(-1e-9).unwrap(), 0.5, max_relative = 1e-12);
        assert_relative_eq!(ks.g(-1e6).unwrap(), 1.0, max_relative = 1e-12);
        let q = ks.integrate(|_| 1.0, &[], Tol::new(1e-300, 1e-12)).value;
        assert_relative_eq!(q, 1.0, max_relative = 1e-10);
        assert_relative_eq!(ks.g(0.7).unwrap(), ks.g_quad(0.7), max_relative = 1e-10);
        assert_relative_eq!(ks.g(-0.7).unwrap(), ks.g_quad(-0.7), max_relative = 1e-10);
    }

    #[test]
    fn custom_kernel_matches_named() {
        let h = Expr::parse("u^(-1.5)").unwrap();
        let k = build_kernel(KernelFamily::CustomC { h, a: 0.0, b: 1.0 }).unwrap();
        assert!(k.condition.c1 && !k.condition.c2);
        assert_relative_eq!(k.kappa0, 0.5, epsilon = 1e-6);
        let named = bar_phi(1.0, 0.5);
        for s in [0.2, 3.0] {
            assert_relative_eq!(k.f(s).unwrap(), named.f(s).unwrap(), max_relative = 1e-10);
        }
        let bad = build_kernel(KernelFamily::CustomC {
            h: Expr::parse("u^(-3)").unwrap(),
            a: 0.0,
            b: f64::INFINITY,
        });
        assert!(bad.is_err());
    }

    #[test]
    fn asymptotics_bar_phi() {
        let rep = asymptotic_check(&bar_phi(2.0, 0.5), AsymptoticEnd::FAtC).unwrap();
        let (_, r) = rep.ratios[2];
        assert!((r - 1.0).abs() < 0.02, "{rep:?}");
        let rep = asymptotic_check(&bar_phi(1.0, 0.7), AsymptoticEnd::FStarAt0).unwrap();
        for (_, r) in rep.ratios {
            assert_relative_eq!(r, 1.0, max_relative = 1e-13);
        }
        let rep = asymptotic_check(&build_kernel(KernelFamily::Psi { alpha: 1.0, beta: 1.0 }).unwrap(), AsymptoticEnd::FAtC).unwrap();
        assert!((rep.ratios[2].1 - 1.0).abs() < 0.01);
    }

    #[test]
    fn log_f_past_underflow() {
        // f(s) = E1⁻¹(s) ≈ e^{-s-γ} for Psi(0,1)
        let k = build_kernel(KernelFamily::Psi { alpha: 0.0, beta: 1.0 }).unwrap();
        let euler = 0.577_215_664_901_532_9;
        assert_relative_eq!(k.log_f(1e4).unwrap(), -1e4 - euler, max_relative = 1e-10);
        let rep = asymptotic_check(&bar_phi(2.0, 0.0), AsymptoticEnd::FAtC).unwrap();
        assert!(rep.rate_only && (rep.ratios[2].1 - 1.0).abs() < 0.02, "{rep:?}");
    }
}
