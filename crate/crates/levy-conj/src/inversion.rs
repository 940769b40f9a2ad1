//! The inversion `μ ↦ μ′` on ID₀ and semistability checks.

use crate::error::{LevyError, Result};
use crate::measure::{
    integrate_log_scale, GammaRepr, LevyMeasure, RadialPart, RadialRange, Region, Triplet, LEVY_TOL,
};

/// `ν′(B) = ∫1_B(x/|x|²)|x|²ν(dx)`, `γ′ = −γ + ∫_{|x|=1} x ν(dx)`.
pub fn invert(t: &Triplet) -> Result<Triplet> {
    if !t.is_id0() {
        return Err(LevyError::NotId0);
    }
    let t = t.to_cut1()?;
    let sphere = sphere_moment(&t.nu);
    let gamma = t.gamma.iter().zip(&sphere).map(|(g, s)| -g + s).collect();
    Ok(Triplet {
        a: t.a.clone(),
        nu: t.nu.inverted()?,
        gamma,
        repr: GammaRepr::Cut1,
    })
}

/// `∫_{|x|=1} x ν(dx)`. Only atoms contribute; densities give zero.
pub fn sphere_moment(nu: &LevyMeasure) -> Vec<f64> {
    let mut v = vec![0.0; nu.dim];
    let sphere = Region::Sphere.range();
    for c in &nu.components {
        let m = c.radial.atom_mass(&sphere);
        if m != 0.0 {
            for (o, x) in v.iter_mut().zip(c.xi.as_slice()) {
                *o += c.weight * m * x;
            }
        }
    }
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpanVerdict {
    pub b: f64,
    pub pass: bool,
    pub max_rel_deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemistableReport {
    pub alpha: f64,
    pub spans: Vec<SpanVerdict>,
    /// True when every span of the default grid passes.
    pub stable: Option<bool>,
    pub max_rel_deviation: f64,
}

pub const DEFAULT_SPANS: [f64; 5] = [1.5, 2.0, std::f64::consts::E, 3.0, 5.0];

/// Number of annular probe sets per ray.
pub const SEMISTABLE_PROBES: usize = 200;

/// `ν_ξ((lo, hi])` for one ray.
fn annulus_mass(part: &RadialPart, lo: f64, hi: f64) -> f64 {
    let atoms = part.atom_mass(&RadialRange::half_open(lo, hi));
    let dens = match &part.density {
        Some(d) => {
            let (s_lo, s_hi) = d.support();
            let (a, b) = (lo.max(s_lo), hi.min(s_hi));
            if b > a {
                integrate_log_scale(|r| d.eval(r), a, b, &d.breakpoints(), LEVY_TOL).value
            } else {
                0.0
            }
        }
        None => 0.0,
    };
    atoms + dens
}

/// Tests `b^α ν(B) = ν(b⁻¹B)` on annuli `B = (r_i, r_{i+1}]` with radii
/// log-spaced over `[10⁻³, 10³]` on every ray.
pub fn check_semistable(t: &Triplet, alpha: f64, spans: &[f64], tol: f64) -> Result<SemistableReport> {
    if !t.is_id0() {
        return Err(LevyError::NotId0);
    }
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(LevyError::Argument(format!("alpha {alpha} must lie in (0, 2)")));
    }
    if let Some(b) = spans.iter().find(|b| !(**b > 1.0)) {
        return Err(LevyError::Argument(format!("span {b} must be > 1")));
    }
    let edges: Vec<f64> = (0..=SEMISTABLE_PROBES)
        .map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / SEMISTABLE_PROBES as f64))
        .collect();
    let deviation = |b: f64| -> f64 {
        let ba = b.powf(alpha);
        let per_ray = crate::par::map(t.nu.components.len(), |ci| {
            let part = &t.nu.components[ci].radial;
            let mut worst: f64 = 0.0;
            for w in edges.windows(2) {
                let lhs = ba * annulus_mass(part, w[0], w[1]);
                let rhs = annulus_mass(part, w[0] / b, w[1] / b);
                let scale = lhs.abs().max(rhs.abs());
                if scale > 0.0 {
                    worst = worst.max((lhs - rhs).abs() / scale);
                }
            }
            worst
        });
        per_ray.into_iter().fold(0.0, f64::max)
    };
    let verdicts: Vec<SpanVerdict> = spans
        .iter()
        .map(|&b| {
            let dev = deviation(b);
            SpanVerdict {
                b,
                pass: dev <= tol,
                max_rel_deviation: dev,
            }
        })
        .collect();
    let stable = if spans.is_empty() {
        let all: Vec<SpanVerdict> = DEFAULT_SPANS
            .iter()
            .map(|&b| {
                let dev = deviation(b);
                SpanVerdict {
                    b,
                    pass: dev <= tol,
                    max_rel_deviation: dev,
                }
            })
            .collect();
        Some(all.iter().all(|v| v.pass))
    } else if DEFAULT_SPANS.iter().all(|b| spans.contains(b)) {
        Some(verdicts.iter().filter(|v| DEFAULT_SPANS.contains(&v.b)).all(|v| v.pass))
    } else {
        None
    };
    let max_rel_deviation = verdicts.iter().map(|v| v.max_rel_deviation).fold(0.0, f64::max);
    Ok(SemistableReport {
        alpha,
        spans: verdicts,
        stable,
        max_rel_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{AnalyticDensity, Density, Direction, LevyMeasure};
    use std::f64::consts::PI;

    fn log_periodic() -> Triplet {
        let a = AnalyticDensity::from_fn(
            |r: f64| r.powf(-1.7) * (1.0 + 0.5 * (2.0 * PI * r.ln() / 2f64.ln()).sin()),
            0.0,
            f64::INFINITY,
            0.7,
            0.7,
        );
        Triplet::id0(
            LevyMeasure::single(Direction::e1(1), 1.0, RadialPart::density(Density::Analytic(a))),
            vec![0.0],
        )
        .unwrap()
    }

    #[test]
    fn delta_inverts_to_negative() {
        let t = invert(&Triplet::delta(vec![1.5, -0.5])).unwrap();
        assert_eq!(t.gamma, vec![-1.5, 0.5]);
    }

    #[test]
    fn poisson_example() {
        let t = invert(&Triplet::poisson(2.0)).unwrap();
        assert_eq!(t.nu.components[0].radial.atoms, vec![(1.0, 2.0)]);
        assert_eq!(t.gamma, vec![0.0]);
    }

    #[test]
    fn power_law_exponent_maps_to_two_minus_beta() {
        let nu = LevyMeasure::single(
            Direction::e1(1),
            1.0,
            RadialPart::density(Density::power_law(1.0, 0.5, 0.0, f64::INFINITY)),
        );
        let t = invert(&Triplet::id0(nu, vec![0.0]).unwrap()).unwrap();
        assert_eq!(
            t.nu.components[0].radial.density,
            Some(Density::power_law(1.0, 1.5, 0.0, f64::INFINITY))
        );
    }

    #[test]
    fn gaussian_part_rejected() {
        let t = Triplet::new(vec![vec![1.0]], LevyMeasure::zero(1), vec![0.0]).unwrap();
        assert_eq!(invert(&t), Err(LevyError::NotId0));
    }

    #[test]
    fn involution_is_exact() {
        let t = log_periodic();
        let back = invert(&invert(&t).unwrap()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn semistable_log_periodic() {
        let t = log_periodic();
        let rep = check_semistable(&t, 0.7, &[2.0, 3.0], 1e-9).unwrap();
        assert!(rep.spans[0].pass, "{rep:?}");
        assert!(!rep.spans[1].pass);
        let inv = invert(&t).unwrap();
        let rep = check_semistable(&inv, 1.3, &[2.0, 3.0], 1e-9).unwrap();
        assert!(rep.spans[0].pass && !rep.spans[1].pass);
    }

    #[test]
    fn stable_power_law_passes_every_span() {
        let nu = LevyMeasure::single(
            Direction::e1(1),
            1.0,
            RadialPart::density(Density::power_law(2.0, 1.2, 0.0, f64::INFINITY)),
        );
        let t = Triplet::id0(nu, vec![0.0]).unwrap();
        let rep = check_semistable(&t, 1.2, &DEFAULT_SPANS, 1e-9).unwrap();
        assert_eq!(rep.stable, Some(true));
    }

    #[test]
    fn poisson_is_not_semistable() {
        let t = invert(&Triplet::poisson(1.0)).unwrap();
        let rep = check_semistable(&t, 1.0, &DEFAULT_SPANS, 1e-6).unwrap();
        assert!(rep.spans.iter().all(|v| !v.pass));
    }
}
