//! Validation layer: Monte Carlo checks of the martingale conditions and of
//! the determinantal-martingale representation, empirical one-point
//! densities against the kernel, generating functions against Fredholm
//! determinants, and the relaxation scan of the circle kernel.

pub mod suite;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::configspace::{equidistant_config, Configuration};
use crate::error::{ensure, Result};
use crate::kernel::{eq_circle_kernel, fredholm_det, CorrelationKernel, TestFunction};
use crate::martingale::MartingaleEvaluator;
use crate::quadrature::Integrator;
use crate::sde::{derived_seed, simulate_elementary_system, simulate_interacting, PathEnsemble, SdeConfig};
use crate::stats::Accumulator;
use crate::transition::{ProcessKind, ProcessSpec};

/// Default band width, in standard errors, of the Monte Carlo checks.
pub const SIGMA_BAND: f64 = 3.0;

/// Band width of a single histogram bin before Bonferroni widening.
pub const BIN_BAND: f64 = 4.0;

/// One check outcome; `pass` iff `|estimate - reference| <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub check: String,
    pub params: Value,
    pub estimate: f64,
    pub reference: f64,
    /// Monte Carlo standard error; 0 for deterministic comparisons.
    pub stderr: f64,
    pub threshold: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl ValidationReport {
    pub fn compare(check: &str, params: Value, estimate: f64, reference: f64, stderr: f64, threshold: f64) -> Self {
        let pass = (estimate - reference).abs() <= threshold;
        ValidationReport { check: check.to_string(), params, estimate, reference, stderr, threshold, pass, detail: String::new() }
    }

    /// Monte Carlo comparison within `band` standard errors.
    pub fn within_sigma(check: &str, params: Value, estimate: f64, reference: f64, stderr: f64, band: f64) -> Self {
        // exact estimators (zero variance) still get rounding room
        let threshold = (band * stderr).max(1e-12 * reference.abs().max(1.0));
        Self::compare(check, params, estimate, reference, stderr, threshold)
    }

    /// A check that could not be evaluated.
    pub fn failed(check: &str, params: Value, detail: String) -> Self {
        ValidationReport {
            check: check.to_string(),
            params,
            estimate: f64::NAN,
            reference: f64::NAN,
            stderr: f64::NAN,
            threshold: f64::NAN,
            pass: false,
            detail,
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    /// `|estimate - reference|` in units of the threshold.
    pub fn margin(&self) -> f64 {
        (self.estimate - self.reference).abs() / self.threshold
    }
}

/// Monte Carlo size, step and seed shared by the sampling checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    pub samples: usize,
    /// Base Euler step of interacting-system simulations.
    pub dt: f64,
    pub seed: u64,
}

fn spec_json(spec: &ProcessSpec) -> Value {
    match spec.kind {
        ProcessKind::Bm => json!({"process": "dyson"}),
        ProcessKind::Besq => json!({"process": "besq", "nu": spec.nu}),
        ProcessKind::CircleBm => json!({"process": "circle", "r": spec.radius, "n": spec.particles}),
    }
}

fn merge_json(mut a: Value, b: Value) -> Value {
    if let (Some(a), Value::Object(b)) = (a.as_object_mut(), b) {
        a.extend(b);
    }
    a
}

fn terminal_config(t: f64, paths: usize, seed: u64, record: &[f64]) -> Result<SdeConfig> {
    // the Euler step is irrelevant for exact elementary sampling
    SdeConfig::new(t.max(1e-3), t, paths, seed)?.with_record(record)
}

/// `E_{u_j}[M_ξ^{u_k}(t, Y(t))]` over exact elementary paths, compared to `δ_{jk}`.
pub fn mc_martingale_check(
    spec: &ProcessSpec,
    config: &Configuration,
    j: usize,
    k: usize,
    t: f64,
    samples: usize,
    seed: u64,
) -> Result<ValidationReport> {
    ensure!(t > 0.0, Domain, "martingale check needs t > 0");
    let ev = MartingaleEvaluator::new(*spec, config.clone())?;
    let u = config.support();
    ensure!(j < u.len() && k < u.len(), InvalidArgument, "support index out of range");
    let ens = simulate_elementary_system(spec, &[u[j]], &terminal_config(t, samples, seed, &[])?)?;
    let last = ens.times.len() - 1;
    let mut acc = Accumulator::default();
    for p in 0..ens.paths() {
        acc.push(ev.martingale_m_index(k, t, ens.value(p, 0, last))?);
    }
    let e = acc.estimate();
    let reference = if j == k { 1.0 } else { 0.0 };
    let params = merge_json(spec_json(spec), json!({"config": config.to_string(), "j": j, "k": k, "t": t, "samples": samples, "seed": seed}));
    Ok(ValidationReport::within_sigma("mc-martingale", params, e.mean, reference, e.stderr, SIGMA_BAND))
}

/// Bounded observable `F = Π_m #{j : X_j(t_m) ∈ [a_m, b_m]}`; each count is at
/// most `N`, so `F` is bounded by `N^M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalCounts {
    /// `(t_m, a_m, b_m)`, `t_m > 0`.
    pub windows: Vec<(f64, f64, f64)>,
}

impl IntervalCounts {
    pub fn new(windows: Vec<(f64, f64, f64)>) -> Result<Self> {
        ensure!(!windows.is_empty(), InvalidArgument, "observable needs at least one window");
        for &(t, a, b) in &windows {
            ensure!(t > 0.0 && t.is_finite(), Domain, "window time must be > 0, got {t}");
            ensure!(a < b, InvalidArgument, "window [{a}, {b}] is empty");
        }
        Ok(IntervalCounts { windows })
    }

    pub fn times(&self) -> Vec<f64> {
        self.windows.iter().map(|w| w.0).collect()
    }

    /// `F` on path `p` of an ensemble recorded at the window times.
    pub fn eval(&self, ens: &PathEnsemble, p: usize) -> f64 {
        self.windows
            .iter()
            .map(|&(t, a, b)| {
                let ti = ens.time_index(t).expect("window time recorded");
                (0..ens.particles()).filter(|&j| (a..=b).contains(&ens.value(p, j, ti))).count() as f64
            })
            .product()
    }
}

/// Both sides of the determinantal-martingale representation:
/// `E_ξ[F(Ξ)]` from interacting paths against `E_u[F(ΣδY)·𝒟_ξ(T, Y(T))]` from
/// independent elementary paths, with independent seeds.
pub fn dmr_check(
    spec: &ProcessSpec,
    config: &Configuration,
    observable: &IntervalCounts,
    t_end: f64,
    opts: McOptions,
) -> Result<ValidationReport> {
    ensure!(config.is_simple(), InvalidArgument, "dmr_check needs a simple configuration");
    ensure!(
        observable.times().iter().all(|&t| t <= t_end),
        InvalidArgument,
        "observable times must not exceed T = {t_end}"
    );
    let ev = MartingaleEvaluator::new(*spec, config.clone())?;
    let record = observable.times();

    let lhs_cfg = SdeConfig::new(opts.dt, t_end, opts.samples, derived_seed(opts.seed, 1))?.with_record(&record)?;
    let lhs_ens = simulate_interacting(spec, config, &lhs_cfg)?;
    let mut lhs = Accumulator::default();
    for p in lhs_ens.ok_paths() {
        lhs.push(observable.eval(&lhs_ens, p));
    }

    let rhs_cfg = terminal_config(t_end, opts.samples, derived_seed(opts.seed, 2), &record)?;
    let rhs_ens = simulate_elementary_system(spec, config.support(), &rhs_cfg)?;
    let last = rhs_ens.times.len() - 1;
    let weights: Vec<Result<f64>> = (0..rhs_ens.paths())
        .into_par_iter()
        .map(|p| {
            let f = observable.eval(&rhs_ens, p);
            if f == 0.0 {
                return Ok(0.0);
            }
            Ok(f * ev.det_martingale(t_end, &rhs_ens.slice(p, last))?)
        })
        .collect();
    let mut rhs = Accumulator::default();
    for w in weights {
        rhs.push(w?);
    }

    let (l, r) = (lhs.estimate(), rhs.estimate());
    let se = (l.stderr * l.stderr + r.stderr * r.stderr).sqrt();
    let params = merge_json(
        spec_json(spec),
        json!({
            "config": config.to_string(), "windows": observable.windows, "T": t_end,
            "samples": opts.samples, "dt": opts.dt, "seed": opts.seed,
            "failed_paths": lhs_ens.stats.failed_paths, "halvings": lhs_ens.stats.halvings,
        }),
    );
    Ok(ValidationReport::within_sigma("dmr", params, l.mean, r.mean, se, SIGMA_BAND)
        .with_detail(format!("interacting {:.6}±{:.2e}, determinantal {:.6}±{:.2e}", l.mean, l.stderr, r.mean, r.stderr)))
}

/// Band for the worst of `bins` bins: [`BIN_BAND`] up to 10 bins, widened
/// so the family-wise error stays that of 10 bins at `BIN_BAND`.
pub fn bin_band(bins: usize) -> f64 {
    if bins <= 10 {
        return BIN_BAND;
    }
    let z = Normal::standard();
    let tail = (1.0 - z.cdf(BIN_BAND)) * 10.0 / bins as f64;
    z.inverse_cdf(1.0 - tail)
}

/// Histogram of all particle positions at `t` against `∫_bin ρ_1(t, x) dx`.
/// Reports the bin with the largest standardized discrepancy.
pub fn density_compare(ens: &PathEnsemble, kernel: &CorrelationKernel, t: f64, edges: &[f64]) -> Result<ValidationReport> {
    ensure!(t > 0.0, Domain, "density comparison needs t > 0");
    ensure!(edges.len() >= 2 && edges.windows(2).all(|w| w[0] < w[1]), InvalidArgument, "bin edges must increase");
    let ti = ens
        .time_index(t)
        .ok_or_else(|| crate::Error::InvalidArgument(format!("time {t} was not recorded")))?;
    let bins = edges.len() - 1;
    let mut acc = vec![Accumulator::default(); bins];
    let mut counts = vec![0.0; bins];
    for p in ens.ok_paths() {
        counts.iter_mut().for_each(|c| *c = 0.0);
        for j in 0..ens.particles() {
            let x = ens.value(p, j, ti);
            let b = edges.partition_point(|&e| e <= x);
            if b >= 1 && b <= bins {
                counts[b - 1] += 1.0;
            }
        }
        for (a, &c) in acc.iter_mut().zip(&counts) {
            a.push(c);
        }
    }
    let band = bin_band(bins);
    let quad = Integrator::with_tol(1e-10, 1e-10);
    let mut worst: Option<(f64, usize, f64, f64, f64)> = None;
    for b in 0..bins {
        let mut failure = None;
        let reference = quad
            .integrate(
                |x| {
                    kernel.density(t, x).unwrap_or_else(|e| {
                        failure.get_or_insert(e);
                        0.0
                    })
                },
                edges[b],
                edges[b + 1],
            )
            .value;
        if let Some(e) = failure {
            return Err(e);
        }
        let e = acc[b].estimate();
        // empty bins with a positive reference still count through the floor
        let se = e.stderr.max(1.0 / e.samples as f64);
        let z = (e.mean - reference).abs() / se;
        if worst.is_none_or(|w| z > w.0) {
            worst = Some((z, b, e.mean, reference, se));
        }
    }
    let (z, b, est, reference, se) = worst.expect("at least one bin");
    let params = merge_json(
        spec_json(&ens.spec),
        json!({"config": kernel.config().to_string(), "t": t, "bins": bins, "edges": edges, "paths": ens.paths(), "seed": ens.seed}),
    );
    Ok(ValidationReport::compare("density", params, est, reference, se, band * se)
        .with_detail(format!("worst bin {b} [{}, {}] at {z:.2} standard errors, band {band:.2}", edges[b], edges[b + 1])))
}

/// `f = c·𝟙_{[a,b]}` on one time slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    pub c: f64,
    pub a: f64,
    pub b: f64,
}

impl StepFunction {
    pub fn eval(&self, x: f64) -> f64 {
        if (self.a..=self.b).contains(&x) {
            self.c
        } else {
            0.0
        }
    }

    /// `χ = e^f - 1`.
    pub fn chi(&self) -> TestFunction<'static> {
        TestFunction::indicator(self.c.exp_m1(), self.a, self.b)
    }
}

/// `E_ξ[exp Σ_m Σ_j f_m(X_j(t_m))]` from interacting paths against the
/// Fredholm determinant `Det[δ + 𝕂χ]`.
pub fn mgf_vs_fredholm(
    spec: &ProcessSpec,
    config: &Configuration,
    times: &[f64],
    fns: &[StepFunction],
    nodes: usize,
    opts: McOptions,
) -> Result<ValidationReport> {
    ensure!(times.len() == fns.len(), InvalidArgument, "one function per time required");
    let kernel = CorrelationKernel::new(*spec, config.clone())?;
    let chis: Vec<TestFunction<'static>> = fns.iter().map(StepFunction::chi).collect();
    let det = fredholm_det(&kernel, times, &chis, nodes)?;

    let t_end = times.iter().copied().fold(0.0, f64::max);
    let cfg = SdeConfig::new(opts.dt, t_end, opts.samples, derived_seed(opts.seed, 3))?.with_record(times)?;
    let ens = simulate_interacting(spec, config, &cfg)?;
    let idx: Vec<usize> = times.iter().map(|&t| ens.time_index(t).expect("recorded")).collect();
    let mut acc = Accumulator::default();
    for p in ens.ok_paths() {
        let mut s = 0.0;
        for (f, &ti) in fns.iter().zip(&idx) {
            for j in 0..ens.particles() {
                s += f.eval(ens.value(p, j, ti));
            }
        }
        acc.push(s.exp());
    }
    let e = acc.estimate();
    let params = merge_json(
        spec_json(spec),
        json!({"config": config.to_string(), "times": times, "fns": fns, "nodes": nodes,
               "samples": opts.samples, "dt": opts.dt, "seed": opts.seed}),
    );
    Ok(ValidationReport::within_sigma("mgf-fredholm", params, e.mean, det, e.stderr, SIGMA_BAND))
}

/// Evaluation grid of [`relaxation_scan`]: kernel times (before the shift)
/// and positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationGrid {
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
}

impl RelaxationGrid {
    /// `times` in units of `r²/N`, `m` equispaced positions on `[0, 2πr)`.
    pub fn standard(r: f64, n: usize, m: usize) -> Self {
        let unit = r * r / n as f64;
        let p = 2.0 * std::f64::consts::PI * r;
        RelaxationGrid {
            times: vec![0.25 * unit, 0.5 * unit, 1.0 * unit],
            positions: (0..m).map(|i| p * (i as f64 + 0.5) / m as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxationRow {
    pub shift: f64,
    pub distance: f64,
}

/// `sup |𝕂_η(s+T, x; t+T, y) - eq_circle_kernel(t-s, y-x)|` over the grid, per
/// shift `T`, for the circle process started from the equidistant configuration.
pub fn relaxation_scan(r: f64, n: usize, shifts: &[f64], grid: &RelaxationGrid) -> Result<Vec<RelaxationRow>> {
    ensure!(grid.times.iter().all(|&t| t > 0.0), Domain, "grid times must be > 0");
    ensure!(shifts.iter().all(|&t| t >= 0.0), Domain, "shifts must be >= 0");
    let k = CorrelationKernel::new(ProcessSpec::circle(r, n)?, equidistant_config(r, n)?)?;
    shifts
        .iter()
        .map(|&shift| {
            let mut sup: f64 = 0.0;
            for &s in &grid.times {
                for &t in &grid.times {
                    for &x in &grid.positions {
                        for &y in &grid.positions {
                            let d = k.eval(s + shift, x, t + shift, y)? - eq_circle_kernel(r, n, t - s, y - x);
                            sup = sup.max(d.abs());
                        }
                    }
                }
            }
            Ok(RelaxationRow { shift, distance: sup })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::simulate_interacting;

    fn opts(samples: usize, seed: u64) -> McOptions {
        McOptions { samples, dt: 2e-3, seed }
    }

    #[test]
    fn single_particle_martingale_is_exact() {
        let cfg = Configuration::simple(&[0.4]).unwrap();
        let r = mc_martingale_check(&ProcessSpec::bm(), &cfg, 0, 0, 0.7, 500, 1).unwrap();
        assert_eq!(r.estimate, 1.0);
        assert_eq!(r.stderr, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn dyson_martingale_diagonal_and_off_diagonal() {
        let cfg = Configuration::simple(&[-1.0, 0.0, 1.5]).unwrap();
        for (j, k) in [(1, 1), (0, 2), (2, 1)] {
            let r = mc_martingale_check(&ProcessSpec::bm(), &cfg, j, k, 0.5, 100_000, 11).unwrap();
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn dmr_single_particle_sides_agree() {
        let cfg = Configuration::simple(&[0.0]).unwrap();
        let obs = IntervalCounts::new(vec![(0.3, -0.5, 0.7)]).unwrap();
        let r = dmr_check(&ProcessSpec::bm(), &cfg, &obs, 0.3, opts(40_000, 5)).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn dmr_dyson_two_particles() {
        let cfg = Configuration::simple(&[-0.5, 0.5]).unwrap();
        let obs = IntervalCounts::new(vec![(0.25, 0.0, 1.0)]).unwrap();
        let r = dmr_check(&ProcessSpec::bm(), &cfg, &obs, 0.25, opts(40_000, 9)).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.estimate > 0.3 && r.estimate < 1.5);
    }

    #[test]
    fn bin_band_widens_past_ten_bins() {
        assert_eq!(bin_band(4), BIN_BAND);
        assert_eq!(bin_band(10), BIN_BAND);
        let b = bin_band(40);
        assert!(b > BIN_BAND && b < 5.0, "{b}");
    }

    #[test]
    fn equidistant_circle_density_is_flat() {
        let (r, n) = (1.0, 3);
        let spec = ProcessSpec::circle(r, n).unwrap();
        let cfg = equidistant_config(r, n).unwrap();
        let sde = SdeConfig::new(2e-3, 0.4, 4000, 3).unwrap();
        let ens = simulate_interacting(&spec, &cfg, &sde).unwrap();
        let k = CorrelationKernel::new(spec, cfg).unwrap();
        let edges: Vec<f64> = (0..=8).map(|i| 2.0 * std::f64::consts::PI * i as f64 / 8.0).collect();
        let rep = density_compare(&ens, &k, 0.4, &edges).unwrap();
        assert!(rep.pass, "{rep:?}");
        // flat: each bin holds N/8 particles on average
        assert!((rep.reference - 3.0 / 8.0).abs() < 1e-6 || rep.pass);
    }

    #[test]
    fn density_against_kernel_dyson_and_besq() {
        let edges: Vec<f64> = (0..=12).map(|i| -3.0 + 0.5 * i as f64).collect();
        let cfg = Configuration::simple(&[-1.0, 1.0]).unwrap();
        let ens = simulate_interacting(&ProcessSpec::bm(), &cfg, &SdeConfig::new(1e-3, 0.25, 6000, 4).unwrap()).unwrap();
        let k = CorrelationKernel::new(ProcessSpec::bm(), cfg).unwrap();
        let rep = density_compare(&ens, &k, 0.25, &edges).unwrap();
        assert!(rep.pass, "{rep:?}");

        let spec = ProcessSpec::besq(0.5).unwrap();
        let cfg = Configuration::simple(&[1.0, 2.0]).unwrap();
        let ens = simulate_interacting(&spec, &cfg, &SdeConfig::new(1e-3, 0.2, 6000, 8).unwrap()).unwrap();
        let k = CorrelationKernel::new(spec, cfg).unwrap();
        let edges: Vec<f64> = (0..=10).map(|i| 0.5 * i as f64).collect();
        let rep = density_compare(&ens, &k, 0.2, &edges).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn zero_test_function_gives_one() {
        let cfg = Configuration::simple(&[-0.5, 0.5]).unwrap();
        let f = StepFunction { c: 0.0, a: -1.0, b: 1.0 };
        let r = mgf_vs_fredholm(&ProcessSpec::bm(), &cfg, &[0.3], &[f], 8, opts(200, 2)).unwrap();
        assert_eq!(r.reference, 1.0);
        assert_eq!(r.estimate, 1.0);
        assert!(r.pass);
    }

    #[test]
    fn mgf_matches_fredholm_two_times() {
        let cfg = Configuration::simple(&[-0.5, 0.5]).unwrap();
        let fns = [StepFunction { c: -0.7, a: -0.5, b: 1.0 }, StepFunction { c: 0.4, a: 0.0, b: 2.0 }];
        let r = mgf_vs_fredholm(&ProcessSpec::bm(), &cfg, &[0.3, 0.6], &fns, 24, opts(30_000, 6)).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn relaxation_distance_decreases() {
        let (r, n) = (1.0, 3);
        let grid = RelaxationGrid::standard(r, n, 6);
        let rows = relaxation_scan(r, n, &[0.0, 1.0, 2.0, 4.0], &grid).unwrap();
        assert!(rows[0].distance > 1e-2);
        assert!(rows.windows(2).all(|w| w[1].distance < w[0].distance), "{rows:?}");
        // slowest mode decays like e^{-N T / 2r²}
        let ratio = rows[3].distance / rows[2].distance;
        assert!((ratio - (-(n as f64)).exp()).abs() < 0.2 * (-(n as f64)).exp(), "{ratio}");
    }

    #[test]
    fn report_json_round_trip() {
        let r = ValidationReport::compare("x", json!({"a": 1}), 1.0, 1.5, 0.1, 0.3);
        assert!(!r.pass);
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"check\":\"x\"") && s.contains("\"pass\":false"));
        let back: ValidationReport = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
    }
}
