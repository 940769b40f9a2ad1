//! Triplets, radially decomposed Lévy measures and their algebra.
//!
//! A Lévy measure is a finite list of rays `(ξ, w, ν_ξ)`; each radial part
//! holds atoms plus at most one density from a small catalog. All values are
//! immutable and every operation returns a new value.

use crate::error::{LevyError, Result};
use crate::expr::Expr;
use crate::quad::{self, Tol};
use std::fmt;
use std::sync::Arc;

/// Relative tolerance used to decide `|x| = 1` and other radius ties.
pub const RADIUS_TIE: f64 = 4.0 * f64::EPSILON;

pub(crate) const LEVY_TOL: Tol = Tol::new(1e-13, 1e-11);

#[inline]
pub fn on_sphere(r: f64) -> bool {
    (r - 1.0).abs() <= RADIUS_TIE
}

// ---------------------------------------------------------------------------
// Directions

#[derive(Debug, Clone, PartialEq)]
pub struct Direction(Vec<f64>);

impl Direction {
    /// Accepts a vector of Euclidean norm 1 within 1e-12.
    pub fn new(xi: Vec<f64>) -> Result<Direction> {
        if xi.is_empty() {
            return Err(LevyError::Validation("direction of dimension 0".into()));
        }
        let n = norm(&xi);
        if !((n - 1.0).abs() <= 1e-12) {
            return Err(LevyError::Validation(format!(
                "direction {xi:?} has norm {n}, expected 1"
            )));
        }
        Ok(Direction(xi))
    }

    /// Normalizes an arbitrary nonzero vector.
    pub fn unit(v: Vec<f64>) -> Result<Direction> {
        let n = norm(&v);
        if !(n > 0.0 && n.is_finite()) {
            return Err(LevyError::Validation(format!("cannot normalize {v:?}")));
        }
        Ok(Direction(v.into_iter().map(|x| x / n).collect()))
    }

    pub fn e1(d: usize) -> Direction {
        let mut v = vec![0.0; d];
        v[0] = 1.0;
        Direction(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn neg(&self) -> Direction {
        Direction(self.0.iter().map(|x| -x).collect())
    }

    pub fn dot(&self, z: &[f64]) -> f64 {
        dot(&self.0, z)
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// ---------------------------------------------------------------------------
// Radial densities

pub type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Behaviour of a grid density beyond its end nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tail {
    /// `ℓ(r) ∝ r^{-θ-1}` continuing from the end node.
    Power(f64),
    Zero,
}

/// A density given by an evaluator with declared support and tail indices.
/// `θ₀` and `θ∞` mean `ℓ(r) ≍ r^{-θ-1}` near 0 and near ∞ respectively.
#[derive(Clone)]
pub struct AnalyticDensity {
    pub f: RadialFn,
    pub r_lo: f64,
    pub r_hi: f64,
    pub theta0: f64,
    pub theta_inf: f64,
    /// Interior radii where ℓ may be non-smooth.
    pub breaks: Vec<f64>,
    /// Source expression, when the density came from one.
    pub expr: Option<Expr>,
}

impl AnalyticDensity {
    pub fn new(
        f: RadialFn,
        r_lo: f64,
        r_hi: f64,
        theta0: f64,
        theta_inf: f64,
        breaks: Vec<f64>,
    ) -> AnalyticDensity {
        AnalyticDensity {
            f,
            r_lo,
            r_hi,
            theta0,
            theta_inf,
            breaks,
            expr: None,
        }
    }

    pub fn from_expr(expr: Expr, r_lo: f64, r_hi: f64, theta0: f64, theta_inf: f64) -> Self {
        let e = expr.clone();
        AnalyticDensity {
            f: Arc::new(move |r| e.eval(r)),
            r_lo,
            r_hi,
            theta0,
            theta_inf,
            breaks: Vec::new(),
            expr: Some(expr),
        }
    }

    pub fn from_fn<F>(f: F, r_lo: f64, r_hi: f64, theta0: f64, theta_inf: f64) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        AnalyticDensity::new(Arc::new(f), r_lo, r_hi, theta0, theta_inf, Vec::new())
    }

    pub fn with_breaks(mut self, breaks: Vec<f64>) -> Self {
        self.breaks = breaks;
        self
    }
}

impl fmt::Debug for AnalyticDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Analytic")
            .field("expr", &self.expr.as_ref().map(|e| e.source().to_string()))
            .field("r_lo", &self.r_lo)
            .field("r_hi", &self.r_hi)
            .field("theta0", &self.theta0)
            .field("theta_inf", &self.theta_inf)
            .finish()
    }
}

impl PartialEq for AnalyticDensity {
    fn eq(&self, other: &Self) -> bool {
        let same_fn = Arc::ptr_eq(&self.f, &other.f)
            || matches!((&self.expr, &other.expr), (Some(a), Some(b)) if a == b);
        same_fn
            && self.r_lo == other.r_lo
            && self.r_hi == other.r_hi
            && self.theta0 == other.theta0
            && self.theta_inf == other.theta_inf
    }
}

/// Tabulated density on increasing nodes with piecewise power-law
/// interpolation (linear in log–log coordinates).
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    pub lo_tail: Tail,
    pub hi_tail: Tail,
}

impl GridDensity {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>, lo_tail: Tail, hi_tail: Tail) -> Result<Self> {
        if nodes.len() < 2 || nodes.len() != values.len() {
            return Err(LevyError::Validation(format!(
                "grid needs >= 2 nodes with matching values ({} nodes, {} values)",
                nodes.len(),
                values.len()
            )));
        }
        if nodes[0] <= 0.0 || nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(LevyError::Validation(
                "grid nodes must be positive and strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(LevyError::Validation("grid values must be finite and >= 0".into()));
        }
        Ok(GridDensity {
            nodes,
            values,
            lo_tail,
            hi_tail,
        })
    }

    pub fn eval(&self, r: f64) -> f64 {
        let n = self.nodes.len();
        let (r0, rn) = (self.nodes[0], self.nodes[n - 1]);
        if r < r0 {
            return match self.lo_tail {
                Tail::Power(theta) if r > 0.0 => self.values[0] * (r / r0).powf(-theta - 1.0),
                _ => 0.0,
            };
        }
        if r > rn {
            return match self.hi_tail {
                Tail::Power(theta) if r.is_finite() => {
                    self.values[n - 1] * (r / rn).powf(-theta - 1.0)
                }
                _ => 0.0,
            };
        }
        let j = match self.nodes.binary_search_by(|x| x.total_cmp(&r)) {
            Ok(j) => return self.values[j],
            Err(j) => j - 1,
        };
        let (x0, x1) = (self.nodes[j], self.nodes[j + 1]);
        let (v0, v1) = (self.values[j], self.values[j + 1]);
        let s = (r / x0).ln() / (x1 / x0).ln();
        if v0 > 0.0 && v1 > 0.0 {
            v0 * (v1 / v0).powf(s)
        } else {
            v0 + (v1 - v0) * s
        }
    }

    pub fn support(&self) -> (f64, f64) {
        let lo = match self.lo_tail {
            Tail::Power(_) => 0.0,
            Tail::Zero => self.nodes[0],
        };
        let hi = match self.hi_tail {
            Tail::Power(_) => f64::INFINITY,
            Tail::Zero => *self.nodes.last().unwrap(),
        };
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Density {
    /// `c·r^{-β-1}` on `(r_lo, r_hi)`.
    PowerLaw {
        c: f64,
        beta: f64,
        r_lo: f64,
        r_hi: f64,
    },
    Analytic(AnalyticDensity),
    Grid(GridDensity),
}

/// Tail exponent near an end of the support; `exact` means the density is
/// exactly a power there, so critical comparisons can be decided.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailInfo {
    pub theta: f64,
    pub exact: bool,
}

impl Density {
    pub fn power_law(c: f64, beta: f64, r_lo: f64, r_hi: f64) -> Density {
        Density::PowerLaw {
            c,
            beta,
            r_lo,
            r_hi,
        }
    }

    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Density::PowerLaw {
                c,
                beta,
                r_lo,
                r_hi,
            } => {
                if r > *r_lo && r < *r_hi {
                    c * r.powf(-beta - 1.0)
                } else {
                    0.0
                }
            }
            Density::Analytic(a) => {
                if r > a.r_lo && r < a.r_hi {
                    (a.f)(r)
                } else {
                    0.0
                }
            }
            Density::Grid(g) => g.eval(r),
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            Density::PowerLaw { r_lo, r_hi, .. } => (*r_lo, *r_hi),
            Density::Analytic(a) => (a.r_lo, a.r_hi),
            Density::Grid(g) => g.support(),
        }
    }

    /// Radii where the density may be non-smooth, including finite support ends.
    pub fn breakpoints(&self) -> Vec<f64> {
        let (lo, hi) = self.support();
        let mut v = vec![lo, hi];
        match self {
            Density::PowerLaw { .. } => {}
            Density::Analytic(a) => v.extend(a.breaks.iter().copied()),
            Density::Grid(g) => v.extend(g.nodes.iter().copied()),
        }
        v.retain(|x| *x > 0.0 && x.is_finite());
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// Tail behaviour at 0 (`None` when the support stays away from 0).
    pub fn tail_zero(&self) -> Option<TailInfo> {
        if self.support().0 > 0.0 {
            return None;
        }
        Some(match self {
            Density::PowerLaw { beta, .. } => TailInfo {
                theta: *beta,
                exact: true,
            },
            Density::Analytic(a) => TailInfo {
                theta: a.theta0,
                exact: false,
            },
            Density::Grid(g) => match g.lo_tail {
                Tail::Power(t) => TailInfo {
                    theta: t,
                    exact: false,
                },
                Tail::Zero => unreachable!(),
            },
        })
    }

    /// Tail behaviour at ∞ (`None` for bounded support).
    pub fn tail_inf(&self) -> Option<TailInfo> {
        if self.support().1 < f64::INFINITY {
            return None;
        }
        Some(match self {
            Density::PowerLaw { beta, .. } => TailInfo {
                theta: *beta,
                exact: true,
            },
            Density::Analytic(a) => TailInfo {
                theta: a.theta_inf,
                exact: false,
            },
            Density::Grid(g) => match g.hi_tail {
                Tail::Power(t) => TailInfo {
                    theta: t,
                    exact: false,
                },
                Tail::Zero => unreachable!(),
            },
        })
    }

    /// `u ↦ u^{-4} ℓ(1/u)`.
    fn inverted(&self) -> Result<Density> {
        Ok(match self {
            Density::PowerLaw {
                c,
                beta,
                r_lo,
                r_hi,
            } => Density::PowerLaw {
                c: *c,
                beta: 2.0 - beta,
                r_lo: recip(*r_hi),
                r_hi: recip(*r_lo),
            },
            Density::Analytic(a) => {
                let f = a.f.clone();
                let expr = match &a.expr {
                    Some(e) => Some(e.rewrite("1/u", "u^(-4)*{}")?),
                    None => None,
                };
                let mut breaks: Vec<f64> = a.breaks.iter().map(|b| 1.0 / b).collect();
                breaks.reverse();
                Density::Analytic(AnalyticDensity {
                    f: Arc::new(move |u| {
                        let v = 1.0 / u;
                        let fv = f(v);
                        if fv == 0.0 {
                            return 0.0;
                        }
                        let w = v * v;
                        fv * w * w
                    }),
                    r_lo: recip(a.r_hi),
                    r_hi: recip(a.r_lo),
                    theta0: 2.0 - a.theta_inf,
                    theta_inf: 2.0 - a.theta0,
                    breaks,
                    expr,
                })
            }
            Density::Grid(g) => {
                let n = g.nodes.len();
                let mut nodes = Vec::with_capacity(n);
                let mut values = Vec::with_capacity(n);
                for j in (0..n).rev() {
                    let r = g.nodes[j];
                    let r2 = r * r;
                    nodes.push(1.0 / r);
                    values.push(g.values[j] * (r2 * r2));
                }
                let flip = |t: Tail| match t {
                    Tail::Power(theta) => Tail::Power(2.0 - theta),
                    Tail::Zero => Tail::Zero,
                };
                Density::Grid(GridDensity {
                    nodes,
                    values,
                    lo_tail: flip(g.hi_tail),
                    hi_tail: flip(g.lo_tail),
                })
            }
        })
    }

    /// Density of the pushforward under `x ↦ bx`: `r ↦ b⁻¹ℓ(r/b)`.
    fn dilated(&self, b: f64) -> Result<Density> {
        Ok(match self {
            Density::PowerLaw {
                c,
                beta,
                r_lo,
                r_hi,
            } => Density::PowerLaw {
                c: c * b.powf(*beta),
                beta: *beta,
                r_lo: r_lo * b,
                r_hi: r_hi * b,
            },
            Density::Analytic(a) => {
                let f = a.f.clone();
                let expr = match &a.expr {
                    Some(e) => Some(e.rewrite(&format!("u/{b:?}"), &format!("{:?}*{{}}", 1.0 / b))?),
                    None => None,
                };
                Density::Analytic(AnalyticDensity {
                    f: Arc::new(move |r| f(r / b) / b),
                    r_lo: a.r_lo * b,
                    r_hi: a.r_hi * b,
                    theta0: a.theta0,
                    theta_inf: a.theta_inf,
                    breaks: a.breaks.iter().map(|x| x * b).collect(),
                    expr,
                })
            }
            Density::Grid(g) => Density::Grid(GridDensity {
                nodes: g.nodes.iter().map(|x| x * b).collect(),
                values: g.values.iter().map(|v| v / b).collect(),
                lo_tail: g.lo_tail,
                hi_tail: g.hi_tail,
            }),
        })
    }

    /// Returns `s·ℓ`.
    pub fn scaled(&self, s: f64) -> Density {
        match self {
            Density::PowerLaw {
                c,
                beta,
                r_lo,
                r_hi,
            } => Density::PowerLaw {
                c: c * s,
                beta: *beta,
                r_lo: *r_lo,
                r_hi: *r_hi,
            },
            Density::Analytic(a) => {
                let f = a.f.clone();
                let expr = a
                    .expr
                    .as_ref()
                    .and_then(|e| e.rewrite("u", &format!("{s:?}*{{}}")).ok());
                Density::Analytic(AnalyticDensity {
                    f: Arc::new(move |r| s * f(r)),
                    expr,
                    ..a.clone()
                })
            }
            Density::Grid(g) => Density::Grid(GridDensity {
                values: g.values.iter().map(|v| v * s).collect(),
                ..g.clone()
            }),
        }
    }
}

fn recip(x: f64) -> f64 {
    if x == 0.0 {
        f64::INFINITY
    } else if x == f64::INFINITY {
        0.0
    } else {
        1.0 / x
    }
}

// ---------------------------------------------------------------------------
// Radial parts

/// Atoms plus an optional density on one ray.
#[derive(Debug, Clone)]
pub struct RadialPart {
    /// `(radius, mass)`, sorted by radius.
    pub atoms: Vec<(f64, f64)>,
    pub density: Option<Density>,
    /// The part this one was inverted from; inverting again returns it as is.
    inverted_from: Option<Arc<RadialPart>>,
}

impl PartialEq for RadialPart {
    fn eq(&self, other: &Self) -> bool {
        self.atoms == other.atoms && self.density == other.density
    }
}

impl RadialPart {
    pub fn new(mut atoms: Vec<(f64, f64)>, density: Option<Density>) -> RadialPart {
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        RadialPart {
            atoms,
            density,
            inverted_from: None,
        }
    }

    pub fn atoms(atoms: Vec<(f64, f64)>) -> RadialPart {
        RadialPart::new(atoms, None)
    }

    pub fn density(d: Density) -> RadialPart {
        RadialPart::new(Vec::new(), Some(d))
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty() && self.density.is_none()
    }

    pub fn density_at(&self, r: f64) -> f64 {
        self.density.as_ref().map_or(0.0, |d| d.eval(r))
    }

    /// Sum of atom masses with radius in `range`.
    pub fn atom_mass(&self, range: &RadialRange) -> f64 {
        self.atoms
            .iter()
            .filter(|(r, _)| range.contains(*r))
            .map(|(_, m)| m)
            .sum()
    }

    /// `Σ m·φ(r)` over atoms with radius in `range`.
    pub fn atom_mass_weighted(&self, range: &RadialRange, phi: impl Fn(f64) -> f64) -> f64 {
        self.atoms
            .iter()
            .filter(|(r, _)| range.contains(*r))
            .map(|(r, m)| m * phi(*r))
            .sum()
    }

    pub fn inverted(&self) -> Result<RadialPart> {
        if let Some(orig) = &self.inverted_from {
            return Ok((**orig).clone());
        }
        let mut atoms: Vec<(f64, f64)> = self.atoms.iter().map(|&(r, m)| (1.0 / r, m * r * r)).collect();
        atoms.reverse();
        let density = self.density.as_ref().map(|d| d.inverted()).transpose()?;
        Ok(RadialPart {
            atoms,
            density,
            inverted_from: Some(Arc::new(self.clone())),
        })
    }

    pub fn dilated(&self, b: f64) -> Result<RadialPart> {
        Ok(RadialPart::new(
            self.atoms.iter().map(|&(r, m)| (r * b, m)).collect(),
            self.density.as_ref().map(|d| d.dilated(b)).transpose()?,
        ))
    }

    pub fn scaled(&self, s: f64) -> RadialPart {
        RadialPart::new(
            self.atoms.iter().map(|&(r, m)| (r, m * s)).collect(),
            self.density.as_ref().map(|d| d.scaled(s)),
        )
    }

    /// `∫_range φ(r) ν_ξ(dr)` with divergence decided from the tails.
    pub fn integrate(
        &self,
        phi: &dyn Fn(f64) -> f64,
        growth: Growth,
        range: &RadialRange,
        tol: Tol,
    ) -> Result<Integral> {
        let mut total = 0.0;
        let mut err = 0.0;
        for &(r, m) in &self.atoms {
            if range.contains(r) {
                total += m * phi(r);
            }
        }
        if let Some(d) = &self.density {
            match integrate_density(d, phi, growth, range, tol)? {
                Integral::Finite { value, error } => {
                    total += value;
                    err += error;
                }
                Integral::Infinite => return Ok(Integral::Infinite),
            }
        }
        Ok(Integral::Finite {
            value: total,
            error: err,
        })
    }
}

/// Growth of an integrand `|φ(r)| ≍ r^p |log r|^l` near 0 and near ∞.
/// `p = +∞` at 0 or `p = -∞` at ∞ means the integrand vanishes there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Growth {
    pub zero: (f64, f64),
    pub inf: (f64, f64),
}

impl Growth {
    pub const fn new(p0: f64, l0: f64, p_inf: f64, l_inf: f64) -> Growth {
        Growth {
            zero: (p0, l0),
            inf: (p_inf, l_inf),
        }
    }

    /// `|x|^p` at both ends.
    pub const fn power(p: f64) -> Growth {
        Growth::new(p, 0.0, p, 0.0)
    }

    /// `|x|² ∧ 1`.
    pub const fn square_min_one() -> Growth {
        Growth::new(2.0, 0.0, 0.0, 0.0)
    }
}

/// Result of a possibly divergent integral.
#[derive(Debug, Clone, PartialEq)]
pub enum Integral<T = f64> {
    Finite { value: T, error: f64 },
    Infinite,
}

impl<T: Clone> Integral<T> {
    pub fn value(&self) -> Option<T> {
        match self {
            Integral::Finite { value, .. } => Some(value.clone()),
            Integral::Infinite => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Integral::Infinite)
    }
}

fn end_converges(tail: TailInfo, (p, l): (f64, f64), at_zero: bool) -> Option<bool> {
    let e = p - tail.theta;
    if e.is_nan() {
        return Some(true);
    }
    let tiny = 1e-12 * (1.0 + p.abs().max(tail.theta.abs()).min(1e6));
    let strict = if at_zero { e } else { -e };
    if strict > tiny {
        Some(true)
    } else if strict < -tiny {
        Some(false)
    } else if tail.exact {
        Some(l < -1.0)
    } else {
        None
    }
}

fn integrate_density(
    d: &Density,
    phi: &dyn Fn(f64) -> f64,
    growth: Growth,
    range: &RadialRange,
    tol: Tol,
) -> Result<Integral> {
    let (s_lo, s_hi) = d.support();
    let lo = range.lo.max(s_lo);
    let hi = range.hi.min(s_hi);
    if !(hi > lo) {
        return Ok(Integral::Finite {
            value: 0.0,
            error: 0.0,
        });
    }
    let mut undecided = None;
    if lo == 0.0 {
        if let Some(t) = d.tail_zero() {
            match end_converges(t, growth.zero, true) {
                Some(true) => {}
                Some(false) => return Ok(Integral::Infinite),
                None => undecided = Some("0"),
            }
        }
    }
    if hi == f64::INFINITY {
        if let Some(t) = d.tail_inf() {
            match end_converges(t, growth.inf, false) {
                Some(true) => {}
                Some(false) => return Ok(Integral::Infinite),
                None => undecided = Some("infinity"),
            }
        }
    }
    if let Some(end) = undecided {
        return Err(LevyError::Inconclusive(format!(
            "integrand growth is critical for the declared tail index at {end}"
        )));
    }
    let q = integrate_log_scale(|r| d.eval(r) * phi(r), lo, hi, &d.breakpoints(), tol);
    check_quad(q.value, q.error, q.converged)?;
    Ok(Integral::Finite {
        value: q.value,
        error: q.error,
    })
}

fn check_quad(v: f64, err: f64, converged: bool) -> Result<()> {
    if !v.is_finite() {
        return Err(LevyError::numeric("non-finite quadrature result", err));
    }
    if !converged && err > 1e-7 * v.abs().max(1.0) {
        return Err(LevyError::numeric("radial quadrature did not converge", err));
    }
    Ok(())
}

/// `∫_lo^hi g(r) dr` computed as `∫ g(e^y) e^y dy`, split at r = 1 and at
/// `breaks`.
pub(crate) fn integrate_log_scale<F: Fn(f64) -> f64>(
    g: F,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    tol: Tol,
) -> quad::Quad<f64> {
    let ylo = if lo == 0.0 { f64::NEG_INFINITY } else { lo.ln() };
    let yhi = if hi == f64::INFINITY { f64::INFINITY } else { hi.ln() };
    let mut pts = vec![ylo, yhi];
    if ylo < 0.0 && 0.0 < yhi {
        pts.push(0.0);
    }
    for &b in breaks {
        let y = b.ln();
        if y > ylo && y < yhi {
            pts.push(y);
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    quad::integrate_breaks(
        |y: f64| {
            let r = y.exp();
            if r == 0.0 || !r.is_finite() {
                return 0.0;
            }
            let v = g(r) * r;
            // Far out only overflow of intermediate powers remains; convergence
            // was settled from the tail indices.
            if v.is_nan() || (!v.is_finite() && y.abs() > 40.0) {
                0.0
            } else {
                v
            }
        },
        &pts,
        tol,
    )
}

// ---------------------------------------------------------------------------
// Regions

/// An interval of radii with open/closed ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialRange {
    pub lo: f64,
    pub lo_closed: bool,
    pub hi: f64,
    pub hi_closed: bool,
}

impl RadialRange {
    /// `(lo, hi]`.
    pub fn half_open(lo: f64, hi: f64) -> RadialRange {
        RadialRange {
            lo,
            lo_closed: false,
            hi,
            hi_closed: true,
        }
    }

    pub fn contains(&self, r: f64) -> bool {
        let above = if self.lo_closed {
            r >= self.lo * (1.0 - RADIUS_TIE)
        } else {
            r > self.lo * (1.0 + RADIUS_TIE)
        };
        let below = if self.hi_closed {
            r <= self.hi * (1.0 + RADIUS_TIE)
        } else {
            r < self.hi * (1.0 - RADIUS_TIE)
        };
        above && below
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    /// `|x| ≤ 1`
    Inner,
    /// `|x| < 1`
    InnerOpen,
    /// `|x| > 1`
    Outer,
    /// `|x| = 1`
    Sphere,
    All,
    Range(RadialRange),
}

impl Region {
    pub fn range(&self) -> RadialRange {
        let r = |lo, lo_closed, hi, hi_closed| RadialRange {
            lo,
            lo_closed,
            hi,
            hi_closed,
        };
        match *self {
            Region::Inner => r(0.0, true, 1.0, true),
            Region::InnerOpen => r(0.0, true, 1.0, false),
            Region::Outer => r(1.0, false, f64::INFINITY, false),
            Region::Sphere => r(1.0, true, 1.0, true),
            Region::All => r(0.0, true, f64::INFINITY, false),
            Region::Range(x) => x,
        }
    }
}

// ---------------------------------------------------------------------------
// Lévy measures

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub xi: Direction,
    pub weight: f64,
    pub radial: RadialPart,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevyMeasure {
    pub dim: usize,
    pub components: Vec<Component>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub ok: bool,
    /// `w·∫(r²∧1)ν_ξ(dr)` per component.
    pub integrals: Vec<Integral>,
    pub problems: Vec<String>,
}

impl LevyMeasure {
    pub fn zero(dim: usize) -> LevyMeasure {
        LevyMeasure {
            dim,
            components: Vec::new(),
        }
    }

    pub fn single(xi: Direction, weight: f64, radial: RadialPart) -> LevyMeasure {
        LevyMeasure {
            dim: xi.dim(),
            components: vec![Component { xi, weight, radial }],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| c.radial.is_zero())
    }

    pub fn push(mut self, xi: Direction, weight: f64, radial: RadialPart) -> LevyMeasure {
        self.components.push(Component { xi, weight, radial });
        self
    }

    pub fn has_atoms(&self) -> bool {
        self.components.iter().any(|c| !c.radial.atoms.is_empty())
    }

    /// Same measure with components sharing a direction and carrying only
    /// atoms merged into one atom list.
    pub fn normalized(&self) -> LevyMeasure {
        let mut out: Vec<Component> = Vec::new();
        for c in &self.components {
            if c.radial.is_zero() {
                continue;
            }
            if c.radial.density.is_some() {
                out.push(c.clone());
                continue;
            }
            let slot = out
                .iter_mut()
                .find(|o| o.xi == c.xi && o.radial.density.is_none() && o.weight == 1.0);
            let scaled: Vec<(f64, f64)> = c.radial.atoms.iter().map(|&(r, m)| (r, m * c.weight)).collect();
            match slot {
                Some(o) => {
                    let mut atoms = o.radial.atoms.clone();
                    for (r, m) in scaled {
                        match atoms.iter_mut().find(|(ra, _)| *ra == r) {
                            Some(a) => a.1 += m,
                            None => atoms.push((r, m)),
                        }
                    }
                    o.radial = RadialPart::atoms(atoms);
                }
                None => out.push(Component {
                    xi: c.xi.clone(),
                    weight: 1.0,
                    radial: RadialPart::atoms(scaled),
                }),
            }
        }
        LevyMeasure {
            dim: self.dim,
            components: out,
        }
    }

    pub fn validate(&self) -> Result<ValidationReport> {
        validate_measure(self)
    }

    /// Every atom as `(x, mass)` with the ray weight applied.
    pub fn atom_list(&self) -> Vec<(Vec<f64>, f64)> {
        let mut out = Vec::new();
        for c in &self.components {
            for &(r, m) in &c.radial.atoms {
                out.push((c.xi.as_slice().iter().map(|x| x * r).collect(), m * c.weight));
            }
        }
        out
    }

    pub fn inverted(&self) -> Result<LevyMeasure> {
        Ok(LevyMeasure {
            dim: self.dim,
            components: self
                .components
                .iter()
                .map(|c| {
                    Ok(Component {
                        xi: c.xi.clone(),
                        weight: c.weight,
                        radial: c.radial.inverted()?,
                    })
                })
                .collect::<Result<_>>()?,
        })
    }

    pub fn dilated(&self, b: f64) -> Result<LevyMeasure> {
        Ok(LevyMeasure {
            dim: self.dim,
            components: self
                .components
                .iter()
                .map(|c| {
                    Ok(Component {
                        xi: c.xi.clone(),
                        weight: c.weight,
                        radial: c.radial.dilated(b)?,
                    })
                })
                .collect::<Result<_>>()?,
        })
    }

    /// `s·ν`, realized by scaling the ray weights.
    pub fn scaled(&self, s: f64) -> LevyMeasure {
        if s == 0.0 {
            return LevyMeasure::zero(self.dim);
        }
        LevyMeasure {
            dim: self.dim,
            components: self
                .components
                .iter()
                .map(|c| Component {
                    weight: c.weight * s,
                    ..c.clone()
                })
                .collect(),
        }
    }

    /// Compares two measures as multisets of rays with relative tolerance on
    /// every numeric parameter (density evaluators compared by identity).
    pub fn approx_eq(&self, other: &LevyMeasure, rel: f64) -> bool {
        let a = self.normalized();
        let b = other.normalized();
        if a.dim != b.dim || a.components.len() != b.components.len() {
            return false;
        }
        let mut used = vec![false; b.components.len()];
        'outer: for ca in &a.components {
            for (j, cb) in b.components.iter().enumerate() {
                if !used[j] && component_close(ca, cb, rel) {
                    used[j] = true;
                    continue 'outer;
                }
            }
            return false;
        }
        true
    }
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * a.abs().max(b.abs())
}

fn component_close(a: &Component, b: &Component, rel: f64) -> bool {
    if a.xi.as_slice().len() != b.xi.as_slice().len()
        || a.xi.as_slice().iter().zip(b.xi.as_slice()).any(|(x, y)| (x - y).abs() > 1e-12)
    {
        return false;
    }
    let (ra, rb) = (&a.radial, &b.radial);
    if ra.atoms.len() != rb.atoms.len() {
        return false;
    }
    for (x, y) in ra.atoms.iter().zip(&rb.atoms) {
        if !close(x.0, y.0, rel) || !close(x.1 * a.weight, y.1 * b.weight, rel) {
            return false;
        }
    }
    match (&ra.density, &rb.density) {
        (None, None) => true,
        (Some(da), Some(db)) => density_close(da, a.weight, db, b.weight, rel),
        _ => false,
    }
}

fn density_close(a: &Density, wa: f64, b: &Density, wb: f64, rel: f64) -> bool {
    match (a, b) {
        (
            Density::PowerLaw {
                c: c1,
                beta: b1,
                r_lo: l1,
                r_hi: h1,
            },
            Density::PowerLaw {
                c: c2,
                beta: b2,
                r_lo: l2,
                r_hi: h2,
            },
        ) => close(c1 * wa, c2 * wb, rel) && close(*b1, *b2, rel) && close(*l1, *l2, rel) && close(*h1, *h2, rel),
        (Density::Grid(g1), Density::Grid(g2)) => {
            g1.nodes.len() == g2.nodes.len()
                && g1.nodes.iter().zip(&g2.nodes).all(|(x, y)| close(*x, *y, rel))
                && g1.values.iter().zip(&g2.values).all(|(x, y)| close(x * wa, y * wb, rel))
                && g1.lo_tail == g2.lo_tail
                && g1.hi_tail == g2.hi_tail
        }
        (Density::Analytic(x), Density::Analytic(y)) => {
            // Evaluators are opaque; compare on probe radii.
            let (lo, hi) = (x.r_lo.max(y.r_lo), x.r_hi.min(y.r_hi));
            if !close(x.r_lo, y.r_lo, rel) || !close(x.r_hi, y.r_hi, rel) {
                return false;
            }
            (0..41).all(|i| {
                let r = 10f64.powf(-4.0 + 0.2 * i as f64);
                if r <= lo || r >= hi {
                    return true;
                }
                close(wa * (x.f)(r), wb * (y.f)(r), rel.max(1e-13))
            })
        }
        _ => false,
    }
}

/// Checks structural validity and `∫(|x|²∧1)ν < ∞`.
pub fn validate_measure(nu: &LevyMeasure) -> Result<ValidationReport> {
    let mut bad = Vec::new();
    for (i, c) in nu.components.iter().enumerate() {
        if !(c.weight > 0.0 && c.weight.is_finite()) {
            bad.push(format!("component {i}: weight {} must be > 0", c.weight));
        }
        if c.xi.dim() != nu.dim {
            bad.push(format!("component {i}: direction has dimension {}", c.xi.dim()));
        }
        let n = norm(c.xi.as_slice());
        if (n - 1.0).abs() > 1e-12 {
            bad.push(format!("component {i}: direction norm {n}"));
        }
        for &(r, m) in &c.radial.atoms {
            if !(r > 0.0 && r.is_finite() && m > 0.0 && m.is_finite()) {
                bad.push(format!("component {i}: atom ({r}, {m}) needs radius > 0 and mass > 0"));
            }
        }
        if c.radial.atoms.windows(2).any(|w| w[0].0 == w[1].0) {
            bad.push(format!("component {i}: repeated atom radius"));
        }
        if let Some(Density::PowerLaw { c: k, r_lo, r_hi, .. }) = &c.radial.density {
            if !(*k > 0.0) || !(*r_lo >= 0.0) || !(r_hi > r_lo) {
                bad.push(format!("component {i}: power law needs c > 0 and 0 <= r_lo < r_hi"));
            }
        }
    }
    if !bad.is_empty() {
        return Err(LevyError::Validation(bad.join("; ")));
    }

    let mut ok = true;
    let mut integrals = Vec::new();
    let mut problems = Vec::new();
    for (i, c) in nu.components.iter().enumerate() {
        if let Some(d) = &c.radial.density {
            let neg = probe_radii(d).into_iter().find(|&r| {
                let v = d.eval(r);
                !(v >= 0.0) || v.is_infinite()
            });
            if let Some(r) = neg {
                ok = false;
                problems.push(format!("component {i}: density invalid at r = {r:e}"));
            }
        }
        let v = match &c.radial.density {
            Some(Density::PowerLaw {
                c: k,
                beta,
                r_lo,
                r_hi,
            }) => {
                let atoms: f64 = c.radial.atoms.iter().map(|&(r, m)| m * (r * r).min(1.0)).sum();
                power_law_square_min_one(*k, *beta, *r_lo, *r_hi)
                    .map(|v| Integral::Finite {
                        value: c.weight * (v + atoms),
                        error: 0.0,
                    })
                    .unwrap_or(Integral::Infinite)
            }
            _ => match c.radial.integrate(
                &|r| (r * r).min(1.0),
                Growth::square_min_one(),
                &Region::All.range(),
                LEVY_TOL,
            ) {
                Ok(Integral::Finite { value, error }) => Integral::Finite {
                    value: c.weight * value,
                    error: c.weight * error,
                },
                Ok(Integral::Infinite) => Integral::Infinite,
                Err(e) => {
                    problems.push(format!("component {i}: {e}"));
                    Integral::Infinite
                }
            },
        };
        if v.is_infinite() {
            ok = false;
            problems.push(format!("component {i}: ∫(r²∧1) diverges"));
        }
        integrals.push(v);
    }
    Ok(ValidationReport {
        ok,
        integrals,
        problems,
    })
}

fn probe_radii(d: &Density) -> Vec<f64> {
    let (lo, hi) = d.support();
    let mut out: Vec<f64> = (0..121)
        .map(|i| 10f64.powf(-6.0 + 0.1 * i as f64))
        .filter(|&r| r > lo && r < hi)
        .collect();
    for b in d.breakpoints() {
        for s in [1.0 - 1e-9, 1.0 + 1e-9] {
            let r = b * s;
            if r > lo && r < hi {
                out.push(r);
            }
        }
    }
    out
}

/// `∫_lo^hi (r²∧1)·c·r^{-β-1} dr` in closed form, `None` when divergent.
pub fn power_law_square_min_one(c: f64, beta: f64, lo: f64, hi: f64) -> Option<f64> {
    let inner = power_integral(c, 1.0 - beta, lo, hi.min(1.0))?;
    let outer = power_integral(c, -beta - 1.0, lo.max(1.0), hi)?;
    Some(inner + outer)
}

/// `∫_lo^hi c·r^e dr` in closed form (0 when the interval is empty).
pub fn power_integral(c: f64, e: f64, lo: f64, hi: f64) -> Option<f64> {
    if !(hi > lo) {
        return Some(0.0);
    }
    if e == -1.0 {
        if lo == 0.0 || hi == f64::INFINITY {
            return None;
        }
        return Some(c * (hi / lo).ln());
    }
    let k = e + 1.0;
    if lo == 0.0 && k <= 0.0 {
        return None;
    }
    if hi == f64::INFINITY && k >= 0.0 {
        return None;
    }
    let at = |r: f64| {
        if r == f64::INFINITY || r == 0.0 {
            0.0
        } else {
            r.powf(k) / k
        }
    };
    Some(c * (at(hi) - at(lo)))
}

/// `∫_region φ(|x|, ξ) ν(dx)`.
pub fn levy_integral(
    nu: &LevyMeasure,
    phi: &(dyn Fn(f64, &[f64]) -> f64 + Sync),
    growth: Growth,
    region: Region,
) -> Result<Integral> {
    levy_integral_with(nu, phi, growth, region, LEVY_TOL)
}

pub fn levy_integral_with(
    nu: &LevyMeasure,
    phi: &(dyn Fn(f64, &[f64]) -> f64 + Sync),
    growth: Growth,
    region: Region,
    tol: Tol,
) -> Result<Integral> {
    let range = region.range();
    let mut value = 0.0;
    let mut error = 0.0;
    for c in &nu.components {
        let xi = c.xi.as_slice();
        match c.radial.integrate(&|r| phi(r, xi), growth, &range, tol)? {
            Integral::Finite { value: v, error: e } => {
                value += c.weight * v;
                error += c.weight * e;
            }
            Integral::Infinite => return Ok(Integral::Infinite),
        }
    }
    Ok(Integral::Finite { value, error })
}

/// `∫_region x·φ(|x|) ν(dx)` as a vector. `growth` describes `r·φ(r)`.
pub fn levy_integral_vec(
    nu: &LevyMeasure,
    phi: &(dyn Fn(f64) -> f64 + Sync),
    growth: Growth,
    region: Region,
) -> Result<Integral<Vec<f64>>> {
    levy_integral_vec_with(nu, phi, growth, region, LEVY_TOL)
}

pub fn levy_integral_vec_with(
    nu: &LevyMeasure,
    phi: &(dyn Fn(f64) -> f64 + Sync),
    growth: Growth,
    region: Region,
    tol: Tol,
) -> Result<Integral<Vec<f64>>> {
    let range = region.range();
    let mut value = vec![0.0; nu.dim];
    let mut error = 0.0;
    for c in &nu.components {
        match c.radial.integrate(&|r| r * phi(r), growth, &range, tol)? {
            Integral::Finite { value: v, error: e } => {
                for (out, x) in value.iter_mut().zip(c.xi.as_slice()) {
                    *out += c.weight * v * x;
                }
                error += c.weight * e;
            }
            Integral::Infinite => return Ok(Integral::Infinite),
        }
    }
    Ok(Integral::Finite { value, error })
}

/// `∫_region |x|^α ν(dx)`.
pub fn moment(nu: &LevyMeasure, alpha: f64, region: Region) -> Result<Integral> {
    levy_integral(nu, &|r, _| r.powf(alpha), Growth::power(alpha), region)
}

/// `∫_region x ν(dx)`.
pub fn first_moment_vec(nu: &LevyMeasure, region: Region) -> Result<Integral<Vec<f64>>> {
    levy_integral_vec(nu, &|_| 1.0, Growth::power(1.0), region)
}

fn vec_or_unavailable(v: Integral<Vec<f64>>, what: &str) -> Result<Vec<f64>> {
    v.value()
        .ok_or_else(|| LevyError::ReprUnavailable(what.to_string()))
}

// ---------------------------------------------------------------------------
// Triplets

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GammaRepr {
    /// Truncation `1_{|x|≤1}`.
    Cut1,
    /// `x/(1+|x|²)` compensation.
    Cut1Sharp,
    /// Truncation `1_{|x|<1}`.
    Cut1Open,
    /// Half weight on the unit sphere.
    Cut1Half,
    /// `1_{|x|≤1} + |x|⁻¹1_{|x|>1}`.
    RR,
    Drift,
    Mean,
}

impl GammaRepr {
    pub const ALL: [GammaRepr; 7] = [
        GammaRepr::Cut1,
        GammaRepr::Cut1Sharp,
        GammaRepr::Cut1Open,
        GammaRepr::Cut1Half,
        GammaRepr::RR,
        GammaRepr::Drift,
        GammaRepr::Mean,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            GammaRepr::Cut1 => "cut1",
            GammaRepr::Cut1Sharp => "cut1_sharp",
            GammaRepr::Cut1Open => "cut1_open",
            GammaRepr::Cut1Half => "cut1_half",
            GammaRepr::RR => "rr",
            GammaRepr::Drift => "drift",
            GammaRepr::Mean => "mean",
        }
    }

    pub fn from_name(s: &str) -> Option<GammaRepr> {
        GammaRepr::ALL.iter().copied().find(|r| r.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Triplet {
    pub a: Vec<Vec<f64>>,
    pub nu: LevyMeasure,
    pub gamma: Vec<f64>,
    pub repr: GammaRepr,
}

impl Triplet {
    /// Builds a Cut1 triplet and checks it.
    pub fn new(a: Vec<Vec<f64>>, nu: LevyMeasure, gamma: Vec<f64>) -> Result<Triplet> {
        let t = Triplet {
            a,
            nu,
            gamma,
            repr: GammaRepr::Cut1,
        };
        t.check()?;
        Ok(t)
    }

    /// Builds from a location in any representation and normalizes to Cut1.
    pub fn from_repr(
        a: Vec<Vec<f64>>,
        nu: LevyMeasure,
        gamma: Vec<f64>,
        repr: GammaRepr,
    ) -> Result<Triplet> {
        let t = Triplet { a, nu, gamma, repr };
        t.check()?;
        t.to_cut1()
    }

    pub fn id0(nu: LevyMeasure, gamma: Vec<f64>) -> Result<Triplet> {
        let d = nu.dim;
        Triplet::new(zeros(d), nu, gamma)
    }

    pub fn delta(c: Vec<f64>) -> Triplet {
        let d = c.len();
        Triplet {
            a: zeros(d),
            nu: LevyMeasure::zero(d),
            gamma: c,
            repr: GammaRepr::Cut1,
        }
    }

    pub fn zero(d: usize) -> Triplet {
        Triplet::delta(vec![0.0; d])
    }

    /// One-dimensional Poisson law with jumps of size 1 at rate `m`.
    pub fn poisson(m: f64) -> Triplet {
        Triplet {
            a: zeros(1),
            nu: LevyMeasure::single(Direction::e1(1), 1.0, RadialPart::atoms(vec![(1.0, m)])),
            gamma: vec![m],
            repr: GammaRepr::Cut1,
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_id0(&self) -> bool {
        self.a.iter().flatten().all(|x| *x == 0.0)
    }

    fn check(&self) -> Result<()> {
        let d = self.gamma.len();
        if d == 0 {
            return Err(LevyError::Validation("dimension must be >= 1".into()));
        }
        if self.nu.dim != d {
            return Err(LevyError::Dimension(self.nu.dim, d));
        }
        if self.a.len() != d || self.a.iter().any(|row| row.len() != d) {
            return Err(LevyError::Validation(format!("gaussian part must be {d}x{d}")));
        }
        for i in 0..d {
            for j in 0..i {
                let (x, y) = (self.a[i][j], self.a[j][i]);
                if (x - y).abs() > 1e-12 * (1.0 + x.abs()) {
                    return Err(LevyError::Validation("gaussian part is not symmetric".into()));
                }
            }
        }
        let ev = sym_eigenvalues(&self.a);
        if ev.iter().any(|&e| e < -1e-12) {
            return Err(LevyError::Validation(format!(
                "gaussian part is not positive semidefinite (eigenvalues {ev:?})"
            )));
        }
        if self.gamma.iter().any(|g| !g.is_finite()) {
            return Err(LevyError::Validation("gamma must be finite".into()));
        }
        let rep = validate_measure(&self.nu)?;
        if !rep.ok {
            return Err(LevyError::Validation(rep.problems.join("; ")));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.check()
    }

    pub fn to_cut1(&self) -> Result<Triplet> {
        convert_gamma(self, GammaRepr::Cut1)
    }
}

pub(crate) fn zeros(d: usize) -> Vec<Vec<f64>> {
    vec![vec![0.0; d]; d]
}

/// Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations.
pub fn sym_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q] == 0.0 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    (0..n).map(|i| m[i][i]).collect()
}

/// Amount added to a Cut1 location to obtain the location in `repr`.
fn cut1_offset(nu: &LevyMeasure, repr: GammaRepr) -> Result<Vec<f64>> {
    let d = nu.dim;
    if nu.is_zero() {
        return Ok(vec![0.0; d]);
    }
    let sphere = || -> Result<Vec<f64>> {
        let mut v = vec![0.0; d];
        for c in &nu.components {
            let m = c.radial.atom_mass(&Region::Sphere.range());
            for (o, x) in v.iter_mut().zip(c.xi.as_slice()) {
                *o += c.weight * m * x;
            }
        }
        Ok(v)
    };
    Ok(match repr {
        GammaRepr::Cut1 => vec![0.0; d],
        GammaRepr::Cut1Open => sphere()?.into_iter().map(|x| -x).collect(),
        GammaRepr::Cut1Half => sphere()?.into_iter().map(|x| -0.5 * x).collect(),
        GammaRepr::Drift => {
            let v = first_moment_vec(nu, Region::Inner)?;
            vec_or_unavailable(v, "∫_{|x|≤1}|x|ν(dx)")?
                .into_iter()
                .map(|x| -x)
                .collect()
        }
        GammaRepr::Mean => vec_or_unavailable(first_moment_vec(nu, Region::Outer)?, "∫_{|x|>1}|x|ν(dx)")?,
        GammaRepr::Cut1Sharp => {
            let inner = levy_integral_vec(
                nu,
                &|r| r * r / (1.0 + r * r),
                Growth::new(3.0, 0.0, 1.0, 0.0),
                Region::Inner,
            )?;
            let outer = levy_integral_vec(
                nu,
                &|r| 1.0 / (1.0 + r * r),
                Growth::new(1.0, 0.0, -1.0, 0.0),
                Region::Outer,
            )?;
            let (i, o) = (
                vec_or_unavailable(inner, "sharp inner")?,
                vec_or_unavailable(outer, "sharp outer")?,
            );
            i.iter().zip(&o).map(|(a, b)| b - a).collect()
        }
        GammaRepr::RR => {
            let outer = levy_integral_vec(nu, &|r| 1.0 / r, Growth::power(0.0), Region::Outer)?;
            vec_or_unavailable(outer, "∫_{|x|>1}ν(dx)")?
        }
    })
}

/// Re-expresses the location of `t` in representation `target`.
pub fn convert_gamma(t: &Triplet, target: GammaRepr) -> Result<Triplet> {
    if t.repr == target {
        return Ok(t.clone());
    }
    let from = cut1_offset(&t.nu, t.repr)?;
    let to = cut1_offset(&t.nu, target)?;
    let gamma = t
        .gamma
        .iter()
        .zip(from.iter().zip(&to))
        .map(|(g, (f, o))| g - f + o)
        .collect();
    Ok(Triplet {
        a: t.a.clone(),
        nu: t.nu.clone(),
        gamma,
        repr: target,
    })
}

/// Law of `bX`.
pub fn dilate(t: &Triplet, b: f64) -> Result<Triplet> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(LevyError::Argument(format!("dilation factor {b} must be > 0")));
    }
    let t = t.to_cut1()?;
    if b == 1.0 {
        return Ok(t);
    }
    let nu = t.nu.dilated(b)?;
    let b2 = b * b;
    let a = t.a.iter().map(|row| row.iter().map(|x| x * b2).collect()).collect();
    let (region, sign) = if b < 1.0 {
        (Region::Range(RadialRange::half_open(1.0, 1.0 / b)), 1.0)
    } else {
        (Region::Range(RadialRange::half_open(1.0 / b, 1.0)), -1.0)
    };
    let corr = vec_or_unavailable(first_moment_vec(&t.nu, region)?, "dilation shell integral")?;
    let gamma = t
        .gamma
        .iter()
        .zip(&corr)
        .map(|(g, c)| b * g + sign * b * c)
        .collect();
    Ok(Triplet {
        a,
        nu,
        gamma,
        repr: GammaRepr::Cut1,
    })
}

/// Triplet of `μ₁ * μ₂`.
pub fn convolve(t1: &Triplet, t2: &Triplet) -> Result<Triplet> {
    if t1.dim() != t2.dim() {
        return Err(LevyError::Dimension(t1.dim(), t2.dim()));
    }
    let (t1, t2) = if t1.repr == t2.repr {
        (t1.clone(), t2.clone())
    } else {
        (t1.to_cut1()?, t2.to_cut1()?)
    };
    let a = t1
        .a
        .iter()
        .zip(&t2.a)
        .map(|(r1, r2)| r1.iter().zip(r2).map(|(x, y)| x + y).collect())
        .collect();
    let mut comps = t1.nu.components.clone();
    comps.extend(t2.nu.components.iter().cloned());
    let nu = LevyMeasure {
        dim: t1.dim(),
        components: comps,
    }
    .normalized();
    let gamma = t1.gamma.iter().zip(&t2.gamma).map(|(x, y)| x + y).collect();
    Ok(Triplet {
        a,
        nu,
        gamma,
        repr: t1.repr,
    })
}

/// Triplet of `μ^{s}`.
pub fn power(t: &Triplet, s: f64) -> Result<Triplet> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(LevyError::Argument(format!("power {s} must be >= 0")));
    }
    Ok(Triplet {
        a: t.a.iter().map(|row| row.iter().map(|x| x * s).collect()).collect(),
        nu: t.nu.scaled(s),
        gamma: t.gamma.iter().map(|g| g * s).collect(),
        repr: t.repr,
    })
}

/// `(A, 0, 0)` and `(0, ν, γ)`.
pub fn split_gaussian(t: &Triplet) -> (Triplet, Triplet) {
    let d = t.dim();
    let gauss = Triplet {
        a: t.a.clone(),
        nu: LevyMeasure::zero(d),
        gamma: vec![0.0; d],
        repr: t.repr,
    };
    let id0 = Triplet {
        a: zeros(d),
        nu: t.nu.clone(),
        gamma: t.gamma.clone(),
        repr: t.repr,
    };
    (gauss, id0)
}

/// Approximate equality of triplets: measure parameters and `A` to relative
/// `rel`, gamma to absolute `gamma_tol`.
pub fn triplets_close(x: &Triplet, y: &Triplet, rel: f64, gamma_tol: f64) -> bool {
    x.repr == y.repr
        && x.dim() == y.dim()
        && x.gamma.iter().zip(&y.gamma).all(|(a, b)| (a - b).abs() <= gamma_tol)
        && x
            .a
            .iter()
            .flatten()
            .zip(y.a.iter().flatten())
            .all(|(a, b)| (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300) || a == b)
        && x.nu.approx_eq(&y.nu, rel)
}

// ---------------------------------------------------------------------------
// Moments

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitStatus {
    Exists,
    ExistsAbsolutely,
    None,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakMean {
    pub value: Option<Vec<f64>>,
    pub status: LimitStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentRegion {
    Inner,
    Outer,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MomentValue {
    Finite(f64),
    Infinite,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub has_drift: bool,
    pub drift: Option<Vec<f64>>,
    pub has_mean: bool,
    pub mean: Option<Vec<f64>>,
    pub weak_mean: WeakMean,
    pub fractional_moments: Vec<(f64, MomentRegion, MomentValue)>,
}

/// Exponents reported in `MomentReport::fractional_moments`.
pub const REPORTED_MOMENTS: [f64; 5] = [0.5, 1.0, 1.5, 2.0, 3.0];

/// Outcome of the partial-limit protocol on values at `r = 10¹ … 10⁶`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Limit {
    Exists(f64),
    Diverges,
    Inconclusive,
}

/// Decides convergence of a sequence of partial integrals `P_k` taken at
/// geometrically growing cut-offs. A limit exists when the last three
/// Aitken-accelerated values (or the raw increments) agree to `1e-8·scale`;
/// divergence is declared when the increments keep one sign and do not decay
/// faster than harmonically.
pub fn limit_protocol(p: &[f64]) -> Limit {
    let n = p.len();
    if n < 4 || p.iter().any(|x| !x.is_finite()) {
        return Limit::Inconclusive;
    }
    let scale = p.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let tol = 1e-8 * scale;
    let d: Vec<f64> = p.windows(2).map(|w| w[1] - w[0]).collect();
    let m = d.len();
    if d[m - 3..].iter().all(|x| x.abs() <= tol) {
        return Limit::Exists(p[n - 1]);
    }
    let aitken: Vec<f64> = (2..n)
        .map(|k| {
            let den = p[k] - 2.0 * p[k - 1] + p[k - 2];
            let num = (p[k] - p[k - 1]).powi(2);
            if den.abs() <= 1e-300 || !(num / den).is_finite() {
                p[k]
            } else {
                p[k] - num / den
            }
        })
        .collect();
    let a = &aitken[aitken.len() - 3..];
    let spread = a.iter().fold(f64::NEG_INFINITY, |x, y| x.max(*y))
        - a.iter().fold(f64::INFINITY, |x, y| x.min(*y));
    // Geometric decay of the increments is needed for Aitken to be trusted.
    let geometric = d[m - 3..].windows(2).all(|w| w[1].abs() <= 0.5 * w[0].abs());
    if spread <= tol && geometric {
        return Limit::Exists(a[2]);
    }
    let last = &d[m - 3..];
    let same_sign = last.iter().all(|x| *x > 0.0) || last.iter().all(|x| *x < 0.0);
    let slow = (1..3).all(|i| {
        let k = (m - 3 + i + 1) as f64;
        k * last[i].abs() >= 0.95 * (k - 1.0) * last[i - 1].abs()
    });
    if same_sign && slow {
        return Limit::Diverges;
    }
    Limit::Inconclusive
}

pub fn moment_report(t: &Triplet) -> Result<MomentReport> {
    let t = t.to_cut1()?;
    let nu = &t.nu;
    let d = t.dim();

    let drift = match convert_gamma(&t, GammaRepr::Drift) {
        Ok(x) => Some(x.gamma),
        Err(LevyError::ReprUnavailable(_)) | Err(LevyError::Inconclusive(_)) => None,
        Err(e) => return Err(e),
    };
    let mean = match convert_gamma(&t, GammaRepr::Mean) {
        Ok(x) => Some(x.gamma),
        Err(LevyError::ReprUnavailable(_)) | Err(LevyError::Inconclusive(_)) => None,
        Err(e) => return Err(e),
    };

    let weak_mean = if let Some(m) = &mean {
        WeakMean {
            value: Some(m.clone()),
            status: LimitStatus::ExistsAbsolutely,
        }
    } else {
        weak_mean(&t)?
    };

    let mut fractional_moments = Vec::new();
    for &alpha in &REPORTED_MOMENTS {
        for (region, reg) in [(MomentRegion::Inner, Region::Inner), (MomentRegion::Outer, Region::Outer)] {
            let v = match moment(nu, alpha, reg) {
                Ok(Integral::Finite { value, .. }) => MomentValue::Finite(value),
                Ok(Integral::Infinite) => MomentValue::Infinite,
                Err(_) => MomentValue::Inconclusive,
            };
            fractional_moments.push((alpha, region, v));
        }
    }
    let _ = d;
    Ok(MomentReport {
        has_drift: drift.is_some(),
        drift,
        has_mean: mean.is_some(),
        mean,
        weak_mean,
        fractional_moments,
    })
}

/// Cut-offs `10^k`, `k = 1..=6`, used by the limit protocol.
pub const LIMIT_CUTOFFS: [f64; 6] = [1e1, 1e2, 1e3, 1e4, 1e5, 1e6];

/// `∫_{1<|x|≤a} x ν(dx)` for each cut-off.
pub fn outer_partials(nu: &LevyMeasure) -> Result<Vec<Vec<f64>>> {
    LIMIT_CUTOFFS
        .iter()
        .map(|&a| {
            let v = first_moment_vec(nu, Region::Range(RadialRange::half_open(1.0, a)))?;
            vec_or_unavailable(v, "partial first moment")
        })
        .collect()
}

/// `V(r) = Σ_ξ w ξ ℓ_ξ(r)`, the spherical first moment of the densities.
fn spherical_first_moment(nu: &LevyMeasure, r: f64) -> Vec<f64> {
    let mut v = vec![0.0; nu.dim];
    for c in &nu.components {
        let l = c.weight * c.radial.density_at(r);
        if l != 0.0 {
            for (o, x) in v.iter_mut().zip(c.xi.as_slice()) {
                *o += l * x;
            }
        }
    }
    v
}

/// `∫_{(1,a]} r·|V(r)| dr` plus the atom analogue, for each cut-off.
pub fn absolute_weak_mean_partials(nu: &LevyMeasure) -> Vec<f64> {
    let mut breaks: Vec<f64> = nu
        .components
        .iter()
        .filter_map(|c| c.radial.density.as_ref())
        .flat_map(|d| d.breakpoints())
        .collect();
    breaks.sort_by(f64::total_cmp);
    // Atoms grouped by radius.
    let mut atoms: Vec<(f64, Vec<f64>)> = Vec::new();
    for c in &nu.components {
        for &(r, m) in &c.radial.atoms {
            if r <= 1.0 + RADIUS_TIE {
                continue;
            }
            let slot = match atoms.iter_mut().position(|(ra, _)| (*ra - r).abs() <= RADIUS_TIE * r) {
                Some(i) => i,
                None => {
                    atoms.push((r, vec![0.0; nu.dim]));
                    atoms.len() - 1
                }
            };
            for (o, x) in atoms[slot].1.iter_mut().zip(c.xi.as_slice()) {
                *o += c.weight * m * x;
            }
        }
    }
    let mut acc = 0.0;
    let mut lo = 1.0;
    let mut out = Vec::new();
    for &a in &LIMIT_CUTOFFS {
        let q = integrate_log_scale(|r| r * norm(&spherical_first_moment(nu, r)), lo, a, &breaks, LEVY_TOL);
        acc += q.value;
        acc += atoms
            .iter()
            .filter(|(r, _)| *r > lo && *r <= a)
            .map(|(r, v)| r * norm(v))
            .sum::<f64>();
        out.push(acc);
        lo = a;
    }
    out
}

fn weak_mean(t: &Triplet) -> Result<WeakMean> {
    let nu = &t.nu;
    let d = t.dim();
    let abs = absolute_weak_mean_partials(nu);
    let partials = outer_partials(nu)?;
    let per_dim: Vec<Limit> = (0..d)
        .map(|i| limit_protocol(&partials.iter().map(|p| p[i]).collect::<Vec<_>>()))
        .collect();
    let value: Option<Vec<f64>> = per_dim
        .iter()
        .zip(&t.gamma)
        .map(|(l, g)| match l {
            Limit::Exists(v) => Some(g + v),
            _ => None,
        })
        .collect();
    let status = match limit_protocol(&abs) {
        Limit::Exists(_) if value.is_some() => LimitStatus::ExistsAbsolutely,
        _ => {
            if value.is_some() {
                LimitStatus::Exists
            } else if per_dim.iter().any(|l| *l == Limit::Diverges) {
                LimitStatus::None
            } else {
                LimitStatus::Inconclusive
            }
        }
    };
    Ok(WeakMean { value, status })
}
