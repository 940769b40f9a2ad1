//! Monte Carlo sampling of `∫f(s)dX_s` and empirical characteristic function
//! checks against the analytic cumulant of the mapped law.
//!
//! Jumps of size at least `ε` are drawn as a compound Poisson process at exact
//! times and weighted by `f` at the midpoint of the time cell containing them.
//! Deterministic parts (drift, Gaussian variance) use the midpoint sums of the
//! same grid; for kernels with `f(0+) = ∞` the deterministic head on
//! `(0, p_min)` is added by quadrature when it is finite.

use crate::charfn::mapped_cumulant;
use crate::error::{LevyError, Result};
use crate::kernel::MappingKernel;
use crate::mapping::{check_domain, Verdict};
use crate::measure::{
    levy_integral_vec, Density, Growth, RadialPart, RadialRange, Region, Triplet, LEVY_TOL,
};
use crate::par;
use crate::quad::{self, Tol};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmallJumps {
    DropRecompensate,
    GaussianSubstitute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_samples: usize,
    pub step: f64,
    /// Upper time cut for kernels with `c_h = ∞`; `None` picks a default.
    pub q_max: Option<f64>,
    /// Lower time cut for kernels with `f(0+) = ∞`; `None` means `10⁻⁴·c_h`.
    pub p_min: Option<f64>,
    pub epsilon: f64,
    pub small_jumps: SmallJumps,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_samples: 10_000,
            step: 1e-3,
            q_max: None,
            p_min: None,
            epsilon: 1e-3,
            small_jumps: SmallJumps::DropRecompensate,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleBatch {
    /// `n × d`, one sample per row.
    pub samples: Vec<Vec<f64>>,
    pub config: SimConfig,
    /// Seed of each block of [`BLOCK`] consecutive samples.
    pub block_seeds: Vec<u64>,
    /// Time window actually simulated.
    pub window: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EcfPoint {
    pub z: Vec<f64>,
    pub ecf: Complex64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscrepancyRow {
    pub z: Vec<f64>,
    pub ecf: Complex64,
    pub analytic: Complex64,
    pub abs_diff: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscrepancyReport {
    pub sup: f64,
    /// Fraction of grid points with `|ecf − cf| ≤ 2·stderr`.
    pub fraction_within: f64,
    pub rows: Vec<DiscrepancyRow>,
    pub config: SimConfig,
}

/// Samples per RNG stream; fixed so output does not depend on the pool size.
pub const BLOCK: usize = 4096;
pub const BOOTSTRAP: usize = 200;
const MAX_EVENTS: f64 = 2e9;
const MAX_CELLS: usize = 20_000_000;
const TABLE_NODES: usize = 4096;
const HEAD_TOL: Tol = Tol::new(1e-15, 1e-12).with_limit(2000);

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn stream_seed(seed: u64, tag: u64, index: u64) -> u64 {
    seed ^ splitmix(splitmix(tag) ^ index)
}

// ---------------------------------------------------------------------------
// Time grid

struct TimeGrid {
    edges: Vec<f64>,
    f_mid: Vec<f64>,
    /// `∫f ds` and `∫f² ds` over the simulated window plus any exact head.
    int_f: f64,
    int_f2: f64,
}

impl TimeGrid {
    fn window(&self) -> (f64, f64) {
        (self.edges[0], *self.edges.last().unwrap())
    }

    fn f_at(&self, s: f64) -> f64 {
        let i = self.edges.partition_point(|&e| e <= s);
        self.f_mid[i.clamp(1, self.f_mid.len()) - 1]
    }
}

/// `∫ φ(t)h(t)dt` restricted to `t > t0` (`upper`) or `t < t0`.
fn kernel_part(k: &MappingKernel, t0: f64, upper: bool, pow: i32) -> Option<f64> {
    let q = k.integrate(
        |t: f64| {
            if (upper && t > t0) || (!upper && t < t0) {
                t.powi(pow)
            } else {
                0.0
            }
        },
        &[t0.abs()],
        HEAD_TOL,
    );
    (q.converged && q.value.is_finite()).then_some(q.value)
}

/// `∫_q^c (|f| + f²) ds` for a one-sided kernel, as a function of `t = f(q)`.
fn tail_bound(k: &MappingKernel, t: f64) -> f64 {
    let q = k.integrate(
        |u: f64| if u < t { u.abs() + u * u } else { 0.0 },
        &[t],
        HEAD_TOL,
    );
    if q.value.is_finite() {
        q.value
    } else {
        f64::INFINITY
    }
}

fn default_q_max(k: &MappingKernel) -> Result<f64> {
    let mut q = 1.0;
    while q <= 1e6 {
        if tail_bound(k, k.f(q)?) < 1e-3 {
            return Ok(q);
        }
        q *= 2.0;
    }
    Err(LevyError::Resource(
        "no q_max below 1e6 bounds the truncated contribution by 1e-3; set q_max".into(),
    ))
}

fn build_grid(k: &MappingKernel, cfg: &SimConfig) -> Result<TimeGrid> {
    let ds = cfg.step;
    let c = k.c;
    let scale = if c.is_finite() { c } else { 1.0 };
    let left_singular = k.two_sided || k.b == f64::INFINITY;
    let right_singular = k.two_sided;
    let p_min = cfg.p_min.unwrap_or(1e-4 * scale);
    if !(p_min > 0.0) {
        return Err(LevyError::Argument("p_min must be positive".into()));
    }
    let s_lo = if left_singular { p_min } else { 0.0 };
    let s_hi = if c.is_finite() {
        if right_singular {
            c - p_min
        } else {
            c
        }
    } else {
        match cfg.q_max {
            Some(q) if q > 0.0 => q,
            Some(_) => return Err(LevyError::Argument("q_max must be positive".into())),
            None => default_q_max(k)?,
        }
    };
    if !(s_hi > s_lo) {
        return Err(LevyError::Argument(format!("empty time window ({s_lo}, {s_hi})")));
    }
    let width = |s: f64| {
        let mut w = ds;
        if left_singular {
            w = w.min(ds * s / scale);
        }
        if right_singular {
            w = w.min(ds * (c - s) / scale);
        }
        w
    };
    let mut edges = vec![s_lo];
    let mut s = s_lo;
    while s < s_hi {
        let next = s + width(s);
        s = if next >= s_hi || s_hi - next < 1e-3 * width(next) { s_hi } else { next };
        edges.push(s);
        if edges.len() > MAX_CELLS {
            return Err(LevyError::Resource(format!(
                "time grid exceeds {MAX_CELLS} cells; increase step"
            )));
        }
    }
    let n = edges.len() - 1;
    let f_mid = par::map(n, |i| k.f(0.5 * (edges[i] + edges[i + 1])));
    let f_mid = f_mid.into_iter().collect::<Result<Vec<f64>>>()?;
    let mut int_f = 0.0;
    let mut int_f2 = 0.0;
    for i in 0..n {
        let w = edges[i + 1] - edges[i];
        int_f += f_mid[i] * w;
        int_f2 += f_mid[i] * f_mid[i] * w;
    }
    // Heads where f is unbounded: a rare-jump region whose deterministic part
    // is not small, so it is kept exactly.
    if left_singular {
        let t0 = k.f(s_lo)?;
        int_f += kernel_part(k, t0, true, 1).unwrap_or(0.0);
        int_f2 += kernel_part(k, t0, true, 2).unwrap_or(0.0);
    }
    if right_singular {
        let t1 = k.f(s_hi)?;
        int_f += kernel_part(k, t1, false, 1).unwrap_or(0.0);
        int_f2 += kernel_part(k, t1, false, 2).unwrap_or(0.0);
    }
    Ok(TimeGrid {
        edges,
        f_mid,
        int_f,
        int_f2,
    })
}

// ---------------------------------------------------------------------------
// Jump sizes

struct RaySampler {
    xi: Vec<f64>,
    /// Total mass on `[ε, ∞)` including the component weight.
    rate: f64,
    atoms: Vec<(f64, f64)>,
    atom_mass: f64,
    table: Option<Table>,
}

struct Table {
    nodes: Vec<f64>,
    cdf: Vec<f64>,
    /// Pareto tail `(R, θ, mass)` beyond the last node.
    tail: Option<(f64, f64, f64)>,
}

impl Table {
    fn total(&self) -> f64 {
        self.cdf.last().copied().unwrap_or(0.0) + self.tail.map_or(0.0, |t| t.2)
    }

    fn sample(&self, u: f64, rng: &mut ChaCha8Rng) -> f64 {
        let body = *self.cdf.last().unwrap();
        if u >= body {
            if let Some((r, theta, _)) = self.tail {
                let v: f64 = 1.0 - rng.random::<f64>();
                return r * v.powf(-1.0 / theta);
            }
            return *self.nodes.last().unwrap();
        }
        let i = self.cdf.partition_point(|&c| c <= u).clamp(1, self.nodes.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        self.nodes[i - 1] * (self.nodes[i] / self.nodes[i - 1]).powf(frac)
    }
}

fn mass_beyond(d: &Density, r: f64) -> Result<f64> {
    let rp = RadialPart::density(d.clone());
    let v = rp.integrate(
        &|_| 1.0,
        Growth::power(0.0),
        &RadialRange::half_open(r, f64::INFINITY),
        LEVY_TOL,
    )?;
    v.value()
        .ok_or_else(|| LevyError::numeric("jump tail mass diverges", f64::INFINITY))
}

fn build_table(d: &Density, eps: f64) -> Result<Option<Table>> {
    let (lo, hi) = d.support();
    let start = lo.max(eps);
    if !(start < hi) {
        return Ok(None);
    }
    let mut tail = None;
    let end = if hi.is_finite() {
        hi
    } else {
        let theta = d.tail_inf().map_or(f64::INFINITY, |t| t.theta);
        let mut r = start.max(1.0) * 1e4;
        if theta.is_finite() && theta > 0.0 {
            tail = Some((r, theta, mass_beyond(d, r)?));
        } else {
            let body = mass_beyond(d, start)?;
            while r < 1e12 && mass_beyond(d, r)? > 1e-13 * body {
                r *= 10.0;
            }
        }
        r
    };
    let breaks = d.breakpoints();
    let (l0, l1) = (start.ln(), end.ln());
    let nodes: Vec<f64> = (0..=TABLE_NODES)
        .map(|i| (l0 + (l1 - l0) * i as f64 / TABLE_NODES as f64).exp())
        .collect();
    let masses = par::map(TABLE_NODES, |i| {
        let (a, b) = (nodes[i], nodes[i + 1]);
        let mut pts = vec![a.ln()];
        pts.extend(breaks.iter().filter(|&&x| x > a && x < b).map(|x| x.ln()));
        pts.push(b.ln());
        quad::integrate_breaks(
            |y: f64| {
                let r = y.exp();
                let v = d.eval(r) * r;
                if v.is_finite() {
                    v
                } else {
                    0.0
                }
            },
            &pts,
            Tol::new(1e-300, 1e-10),
        )
        .value
    });
    let mut cdf = Vec::with_capacity(nodes.len());
    let mut acc = 0.0;
    cdf.push(0.0);
    for m in masses {
        acc += m.max(0.0);
        cdf.push(acc);
    }
    Ok(Some(Table { nodes, cdf, tail }))
}

fn build_samplers(rho: &Triplet, eps: f64) -> Result<Vec<RaySampler>> {
    let mut out = Vec::new();
    for comp in &rho.nu.components {
        let atoms: Vec<(f64, f64)> =
            comp.radial.atoms.iter().copied().filter(|&(r, _)| r >= eps).collect();
        let atom_mass: f64 = atoms.iter().map(|a| a.1).sum();
        let table = match &comp.radial.density {
            Some(d) => build_table(d, eps)?,
            None => None,
        };
        let mass = atom_mass + table.as_ref().map_or(0.0, Table::total);
        if mass > 0.0 {
            out.push(RaySampler {
                xi: comp.xi.as_slice().to_vec(),
                rate: comp.weight * mass,
                atoms,
                atom_mass,
                table,
            });
        }
    }
    Ok(out)
}

impl RaySampler {
    fn radius(&self, rng: &mut ChaCha8Rng) -> f64 {
        let total = self.atom_mass + self.table.as_ref().map_or(0.0, Table::total);
        let mut u = rng.random::<f64>() * total;
        if u < self.atom_mass {
            for &(r, m) in &self.atoms {
                if u < m {
                    return r;
                }
                u -= m;
            }
            return self.atoms.last().unwrap().0;
        }
        u -= self.atom_mass;
        match &self.table {
            Some(t) => t.sample(u, rng),
            None => self.atoms.last().map_or(0.0, |a| a.0),
        }
    }
}

/// Lower-triangular `L` with `LLᵀ = A` for positive semidefinite `A`.
fn psd_cholesky(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = a.len();
    let mut l = vec![vec![0.0; d]; d];
    let scale = (0..d).map(|i| a[i][i].abs()).fold(0.0, f64::max);
    for j in 0..d {
        let s: f64 = (0..j).map(|p| l[j][p] * l[j][p]).sum();
        let piv = a[j][j] - s;
        if piv <= 1e-14 * scale {
            continue;
        }
        let lj = piv.sqrt();
        l[j][j] = lj;
        for i in j + 1..d {
            let s: f64 = (0..j).map(|p| l[i][p] * l[j][p]).sum();
            l[i][j] = (a[i][j] - s) / lj;
        }
    }
    l
}

// ---------------------------------------------------------------------------
// Sampling

/// Samples `∫f(s)dX_s^{(ρ)}` over the configured window.
pub fn sample_mapped(k: &MappingKernel, rho: &Triplet, cfg: &SimConfig) -> Result<SampleBatch> {
    if cfg.n_samples == 0 || !(cfg.step > 0.0) || !(cfg.epsilon > 0.0) {
        return Err(LevyError::Argument(
            "n_samples, step and epsilon must be positive".into(),
        ));
    }
    if k.c.is_finite() && cfg.step >= k.c / 100.0 {
        return Err(LevyError::Argument(format!(
            "step {} must be below c_h/100 = {}",
            cfg.step,
            k.c / 100.0
        )));
    }
    let dom = check_domain(k, rho);
    if dom.in_de == Verdict::No {
        return Err(LevyError::NotDefinable(
            "input lies outside the essential domain of the mapping".into(),
        ));
    }
    let rho = rho.to_cut1()?;
    let d = rho.dim();
    let eps = cfg.epsilon;
    let grid = build_grid(k, cfg)?;
    let (s_lo, s_hi) = grid.window();

    // Drift of the process once jumps below ε are removed and recompensated.
    let mut drift = rho.gamma.clone();
    let (range, sign) = if eps <= 1.0 {
        (RadialRange { lo: eps, lo_closed: true, hi: 1.0, hi_closed: true }, -1.0)
    } else {
        (RadialRange { lo: 1.0, lo_closed: false, hi: eps, hi_closed: false }, 1.0)
    };
    let shift = levy_integral_vec(&rho.nu, &|_| 1.0, Growth::power(1.0), Region::Range(range))?
        .value()
        .ok_or_else(|| LevyError::numeric("first moment of the jump band diverges", f64::INFINITY))?;
    for (g, s) in drift.iter_mut().zip(&shift) {
        *g += sign * s;
    }

    let mut cov = rho.a.clone();
    if cfg.small_jumps == SmallJumps::GaussianSubstitute {
        let small = RadialRange { lo: 0.0, lo_closed: false, hi: eps, hi_closed: false };
        for comp in &rho.nu.components {
            let v = comp
                .radial
                .integrate(&|r| r * r, Growth::power(2.0), &small, LEVY_TOL)?
                .value()
                .ok_or_else(|| LevyError::numeric("small-jump variance diverges", f64::INFINITY))?;
            let xi = comp.xi.as_slice();
            for i in 0..d {
                for j in 0..d {
                    cov[i][j] += comp.weight * v * xi[i] * xi[j];
                }
            }
        }
    }
    let chol = psd_cholesky(&cov);
    let sd = grid.int_f2.max(0.0).sqrt();
    let has_gauss = sd > 0.0 && chol.iter().flatten().any(|&x| x != 0.0);
    let mean: Vec<f64> = drift.iter().map(|g| g * grid.int_f).collect();

    let samplers = build_samplers(&rho, eps)?;
    let total_rate: f64 = samplers.iter().map(|s| s.rate).sum();
    let lambda = total_rate * (s_hi - s_lo);
    if lambda * cfg.n_samples as f64 > MAX_EVENTS {
        return Err(LevyError::Resource(format!(
            "epsilon = {eps:e} gives about {:.3e} jumps in total; increase epsilon",
            lambda * cfg.n_samples as f64
        )));
    }
    let mut cum_rates = Vec::with_capacity(samplers.len());
    let mut acc = 0.0;
    for s in &samplers {
        acc += s.rate;
        cum_rates.push(acc);
    }
    let count = if lambda > 0.0 {
        Some(Poisson::new(lambda).map_err(|e| LevyError::Argument(e.to_string()))?)
    } else {
        None
    };

    let n_blocks = cfg.n_samples.div_ceil(BLOCK);
    let block_seeds: Vec<u64> = (0..n_blocks as u64).map(|b| stream_seed(cfg.seed, 1, b)).collect();
    let blocks = par::map(n_blocks, |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(block_seeds[b]);
        let len = BLOCK.min(cfg.n_samples - b * BLOCK);
        let mut rows = Vec::with_capacity(len);
        for _ in 0..len {
            let mut x = mean.clone();
            if let Some(pois) = &count {
                let n_jumps = pois.sample(&mut rng) as usize;
                for _ in 0..n_jumps {
                    let s = s_lo + (s_hi - s_lo) * rng.random::<f64>();
                    let u = rng.random::<f64>() * total_rate;
                    let idx = cum_rates.partition_point(|&c| c <= u).min(samplers.len() - 1);
                    let ray = &samplers[idx];
                    let size = grid.f_at(s) * ray.radius(&mut rng);
                    for (xi, v) in x.iter_mut().zip(&ray.xi) {
                        *xi += size * v;
                    }
                }
            }
            if has_gauss {
                let g: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                for i in 0..d {
                    let v: f64 = (0..=i).map(|j| chol[i][j] * g[j]).sum();
                    x[i] += sd * v;
                }
            }
            rows.push(x);
        }
        rows
    });
    Ok(SampleBatch {
        samples: blocks.into_iter().flatten().collect(),
        config: cfg.clone(),
        block_seeds,
        window: (s_lo, s_hi),
    })
}

// ---------------------------------------------------------------------------
// Empirical characteristic function

/// Empirical cf on `z_grid` with bootstrap standard errors.
pub fn empirical_cf(batch: &SampleBatch, z_grid: &[Vec<f64>]) -> Result<Vec<EcfPoint>> {
    let n = batch.samples.len();
    if n < 100 {
        return Err(LevyError::Argument(format!("need at least 100 samples, got {n}")));
    }
    let d = batch.samples[0].len();
    if let Some(z) = z_grid.iter().find(|z| z.len() != d) {
        return Err(LevyError::Dimension(z.len(), d));
    }
    let nz = z_grid.len();
    // phases[j·nz + m] = exp(i⟨z_m, x_j⟩)
    let phases: Vec<Complex64> = par::map(n, |j| {
        let x = &batch.samples[j];
        z_grid
            .iter()
            .map(|z| {
                let t: f64 = z.iter().zip(x).map(|(a, b)| a * b).sum();
                Complex64::new(t.cos(), t.sin())
            })
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect();
    let mean_of = |counts: Option<&[u32]>| {
        let mut acc = vec![Complex64::new(0.0, 0.0); nz];
        for j in 0..n {
            let w = counts.map_or(1.0, |c| c[j] as f64);
            if w == 0.0 {
                continue;
            }
            let row = &phases[j * nz..(j + 1) * nz];
            for (a, p) in acc.iter_mut().zip(row) {
                *a += p * w;
            }
        }
        acc.into_iter().map(|a| a / n as f64).collect::<Vec<_>>()
    };
    let ecf = mean_of(None);
    let boot = par::map(BOOTSTRAP, |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(batch.config.seed, 2, b as u64));
        let mut counts = vec![0u32; n];
        for _ in 0..n {
            counts[rng.random_range(0..n)] += 1;
        }
        mean_of(Some(&counts))
    });
    Ok((0..nz)
        .map(|m| {
            let avg = boot.iter().map(|r| r[m]).sum::<Complex64>() / BOOTSTRAP as f64;
            let var = boot.iter().map(|r| (r[m] - avg).norm_sqr()).sum::<f64>()
                / (BOOTSTRAP - 1) as f64;
            EcfPoint {
                z: z_grid[m].clone(),
                ecf: ecf[m],
                stderr: var.sqrt(),
            }
        })
        .collect())
}

/// Compares the empirical cf of [`sample_mapped`] with `exp(mapped_cumulant)`.
pub fn cf_discrepancy(
    k: &MappingKernel,
    rho: &Triplet,
    cfg: &SimConfig,
    z_grid: &[Vec<f64>],
) -> Result<DiscrepancyReport> {
    let batch = sample_mapped(k, rho, cfg)?;
    let emp = empirical_cf(&batch, z_grid)?;
    let analytic = par::map(z_grid.len(), |m| mapped_cumulant(k, rho, &z_grid[m]).map(|c| c.exp()));
    let mut rows = Vec::with_capacity(emp.len());
    for (p, a) in emp.into_iter().zip(analytic) {
        let a = a?;
        rows.push(DiscrepancyRow {
            abs_diff: (p.ecf - a).norm(),
            z: p.z,
            ecf: p.ecf,
            analytic: a,
            stderr: p.stderr,
        });
    }
    let sup = rows.iter().map(|r| r.abs_diff).fold(0.0, f64::max);
    let within = rows.iter().filter(|r| r.abs_diff <= 2.0 * r.stderr).count();
    Ok(DiscrepancyReport {
        sup,
        fraction_within: within as f64 / rows.len().max(1) as f64,
        rows,
        config: cfg.clone(),
    })
}

/// `n` equally spaced scalar points on `[lo, hi]`.
pub fn line_grid(lo: f64, hi: f64, n: usize) -> Vec<Vec<f64>> {
    if n == 1 {
        return vec![vec![lo]];
    }
    (0..n)
        .map(|i| vec![lo + (hi - lo) * i as f64 / (n - 1) as f64])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{build_kernel, KernelFamily};
    use crate::measure::{Direction, GammaRepr, LevyMeasure};

    fn barphi10() -> MappingKernel {
        build_kernel(KernelFamily::BarPhi { p: 1.0, alpha: 0.0 }).unwrap()
    }

    fn cfg(n: usize, seed: u64) -> SimConfig {
        SimConfig {
            n_samples: n,
            q_max: Some(12.0),
            seed,
            ..SimConfig::default()
        }
    }

    fn centered_poisson(m: f64) -> Triplet {
        let nu = LevyMeasure::single(Direction::e1(1), 1.0, RadialPart::atoms(vec![(1.0, m)]));
        Triplet::from_repr(vec![vec![0.0]], nu, vec![0.0], GammaRepr::Mean).unwrap()
    }

    #[test]
    fn delta_input_is_deterministic_integral() {
        let b = sample_mapped(&barphi10(), &Triplet::delta(vec![1.5]), &cfg(500, 3)).unwrap();
        // ∫_0^12 e^{-s} ds
        let exact = 1.5 * (1.0 - (-12.0f64).exp());
        for x in &b.samples {
            assert!((x[0] - exact).abs() < 1e-6, "{}", x[0]);
        }
    }

    #[test]
    fn centered_poisson_has_zero_mean() {
        let b = sample_mapped(&barphi10(), &centered_poisson(2.0), &cfg(20_000, 11)).unwrap();
        let n = b.samples.len() as f64;
        let m = b.samples.iter().map(|x| x[0]).sum::<f64>() / n;
        let v = b.samples.iter().map(|x| (x[0] - m).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(m.abs() < 3.0 * (v / n).sqrt(), "mean {m}");
        // variance 2·∫e^{-2s}ds = 1
        assert!((v - 1.0).abs() < 0.05, "variance {v}");
    }

    #[test]
    fn reproducible_across_pool_sizes() {
        let k = barphi10();
        let rho = Triplet::poisson(2.0);
        let c = cfg(9000, 42);
        let a = par::with_threads(Some(1), || sample_mapped(&k, &rho, &c).unwrap());
        let b = par::with_threads(Some(3), || sample_mapped(&k, &rho, &c).unwrap());
        assert_eq!(a.samples, b.samples);
        let other = sample_mapped(&k, &rho, &cfg(9000, 43)).unwrap();
        assert_ne!(a.samples, other.samples);
    }

    #[test]
    fn ecf_of_constant_batches() {
        let mk = |v: f64| SampleBatch {
            samples: vec![vec![v]; 200],
            config: SimConfig::default(),
            block_seeds: vec![],
            window: (0.0, 1.0),
        };
        let zs = line_grid(-5.0, 5.0, 11);
        for p in empirical_cf(&mk(0.0), &zs).unwrap() {
            assert!((p.ecf - Complex64::new(1.0, 0.0)).norm() < 1e-15);
            assert!(p.stderr < 1e-15);
        }
        for p in empirical_cf(&mk(0.7), &zs).unwrap() {
            let t = 0.7 * p.z[0];
            assert!((p.ecf - Complex64::new(t.cos(), t.sin())).norm() < 1e-13);
        }
        assert!(empirical_cf(&SampleBatch { samples: vec![vec![0.0]; 99], ..mk(0.0) }, &zs).is_err());
    }

    #[test]
    fn stderr_halves_when_sample_quadruples() {
        let k = barphi10();
        let rho = centered_poisson(2.0);
        let zs = line_grid(0.5, 3.0, 6);
        let small = empirical_cf(&sample_mapped(&k, &rho, &cfg(5000, 5)).unwrap(), &zs).unwrap();
        let large = empirical_cf(&sample_mapped(&k, &rho, &cfg(20_000, 5)).unwrap(), &zs).unwrap();
        for (s, l) in small.iter().zip(&large) {
            let ratio = s.stderr / l.stderr;
            assert!((ratio - 2.0).abs() < 0.6, "ratio {ratio} at z = {:?}", s.z);
        }
    }

    #[test]
    fn delta_discrepancy_is_small() {
        let rep = cf_discrepancy(&barphi10(), &Triplet::delta(vec![1.0]), &cfg(200, 1), &line_grid(-5.0, 5.0, 21))
            .unwrap();
        assert!(rep.sup < 1e-2, "sup {}", rep.sup);
    }

    #[test]
    fn conjugate_kernel_head_is_exact() {
        // h*(u) = u^{-3} on (1,∞): f(s) = (2s)^{-1/2} on (0, 1/2), ∫f = 1.
        let k = barphi10().conjugate_kernel();
        let b = sample_mapped(&k, &Triplet::delta(vec![1.0]), &SimConfig { n_samples: 100, ..SimConfig::default() })
            .unwrap();
        assert!((b.samples[0][0] - 1.0).abs() < 1e-5, "{}", b.samples[0][0]);
    }

    #[test]
    fn tempered_input_uses_tables() {
        let d = Density::Analytic(crate::measure::AnalyticDensity::from_fn(
            |r: f64| r.powf(-1.5) * (-r).exp(),
            0.0,
            f64::INFINITY,
            0.5,
            f64::INFINITY,
        ));
        let nu = LevyMeasure::single(Direction::e1(1), 1.0, RadialPart::density(d));
        let rho = Triplet::from_repr(vec![vec![0.0]], nu, vec![0.0], GammaRepr::Mean).unwrap();
        let k = build_kernel(KernelFamily::BarPhi { p: 1.0, alpha: 0.5 }).unwrap();
        let c = SimConfig { n_samples: 20_000, seed: 9, epsilon: 1e-2, q_max: Some(50.0), ..SimConfig::default() };
        let rep = cf_discrepancy(&k, &rho, &c, &line_grid(-3.0, 3.0, 13)).unwrap();
        assert!(rep.sup < 0.03, "sup {}", rep.sup);
    }

    #[test]
    fn rejects_inputs_outside_domain() {
        let d = Density::power_law(1.0, 0.3, 1.0, f64::INFINITY);
        let nu = LevyMeasure::single(Direction::e1(1), 1.0, RadialPart::density(d));
        let rho = Triplet::id0(nu, vec![0.0]).unwrap();
        let k = build_kernel(KernelFamily::BarPhi { p: 1.0, alpha: 0.5 }).unwrap();
        assert!(matches!(sample_mapped(&k, &rho, &SimConfig::default()), Err(LevyError::NotDefinable(_))));
    }
}
