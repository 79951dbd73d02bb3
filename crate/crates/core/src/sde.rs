//! Path simulation of the interacting systems and of the elementary
//! one-particle processes.
//!
//! Interacting systems use Euler–Maruyama on the SDEs with reject-and-halve
//! near collisions. Random numbers for base step `k` of path `p` come from
//! the stream keyed by `(seed, p, k)`, so ensembles are bit-identical for any
//! worker count.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::configspace::{canonicalize_circle, in_alcove, in_weyl_chamber, Configuration};
use crate::error::{ensure, Error, Result};
use crate::stats::stream_rng;
use crate::transition::{ProcessKind, ProcessSpec};

/// Deepest step refinement: `dt / 2^MAX_HALVINGS`.
pub const MAX_HALVINGS: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Fixed step; a step leaving the chamber aborts the path.
    Euler,
    /// Halve the step (with fresh increments) until ordering is kept.
    EulerAdaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdeConfig {
    pub dt: f64,
    pub t_end: f64,
    pub paths: usize,
    pub seed: u64,
    pub scheme: Scheme,
    /// Times at which states are stored, besides `t = 0`; defaults to `[t_end]`.
    pub record: Vec<f64>,
}

impl SdeConfig {
    pub fn new(dt: f64, t_end: f64, paths: usize, seed: u64) -> Result<Self> {
        let c = SdeConfig { dt, t_end, paths, seed, scheme: Scheme::EulerAdaptive, record: vec![t_end] };
        c.validate()?;
        Ok(c)
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    /// Store states at `times` (sorted, deduplicated; `t_end` is always added).
    pub fn with_record(mut self, times: &[f64]) -> Result<Self> {
        let mut r: Vec<f64> = times.iter().copied().filter(|&t| t > 0.0).collect();
        r.push(self.t_end);
        r.sort_by(f64::total_cmp);
        r.dedup();
        self.record = r;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.dt > 0.0 && self.dt.is_finite(), Config, "dt must be > 0, got {}", self.dt);
        ensure!(self.t_end >= 0.0 && self.t_end.is_finite(), Config, "t_end must be >= 0, got {}", self.t_end);
        ensure!(self.paths >= 1, Config, "paths must be >= 1");
        ensure!(
            self.record.iter().all(|&t| t > 0.0 && t <= self.t_end) || self.t_end == 0.0,
            Config,
            "record times must lie in (0, t_end]"
        );
        Ok(())
    }

    /// `0` followed by the record times.
    pub fn grid(&self) -> Vec<f64> {
        let mut g = vec![0.0];
        g.extend(self.record.iter().copied().filter(|&t| t > 0.0));
        g
    }
}

/// Step-control counters, summed over paths.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub base_steps: u64,
    pub halvings: u64,
    pub failed_paths: usize,
}

/// Simulated paths: `values[path][particle][time]`, flattened.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    pub spec: ProcessSpec,
    pub start: Vec<f64>,
    pub seed: u64,
    pub times: Vec<f64>,
    particles: usize,
    values: Vec<f64>,
    lifted: Option<Vec<f64>>,
    failed: Vec<bool>,
    pub stats: SimStats,
}

impl PathEnsemble {
    pub fn paths(&self) -> usize {
        self.failed.len()
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    fn idx(&self, path: usize, particle: usize, time: usize) -> usize {
        (path * self.particles + particle) * self.times.len() + time
    }

    /// Position in the state space (reduced mod `2πr` on the circle).
    pub fn value(&self, path: usize, particle: usize, time: usize) -> f64 {
        self.values[self.idx(path, particle, time)]
    }

    /// Position on the universal cover (circle only).
    pub fn lifted_value(&self, path: usize, particle: usize, time: usize) -> Option<f64> {
        self.lifted.as_ref().map(|l| l[self.idx(path, particle, time)])
    }

    /// All particle positions of one path at one stored time.
    pub fn slice(&self, path: usize, time: usize) -> Vec<f64> {
        (0..self.particles).map(|j| self.value(path, j, time)).collect()
    }

    pub fn is_failed(&self, path: usize) -> bool {
        self.failed[path]
    }

    /// Indices of paths that completed.
    pub fn ok_paths(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.paths()).filter(|&p| !self.failed[p])
    }

    /// Index of a stored time (exact match up to rounding).
    pub fn time_index(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
    }

    /// Completed paths whose stored slices leave the chamber (or alcove).
    pub fn ordering_violations(&self) -> usize {
        self.ok_paths()
            .filter(|&p| {
                (0..self.times.len()).any(|ti| {
                    let v: Vec<f64> = match &self.lifted {
                        Some(_) => (0..self.particles).map(|j| self.lifted_value(p, j, ti).unwrap_or(f64::NAN)).collect(),
                        None => self.slice(p, ti),
                    };
                    !state_valid(&self.spec, &v)
                })
            })
            .count()
    }

    /// CSV dump `path,particle,t,x` with a leading comment line.
    pub fn write_csv(&self, out: &mut impl Write, comment: &str) -> Result<()> {
        writeln!(out, "# {comment}")?;
        writeln!(out, "path,particle,t,x")?;
        for p in 0..self.paths() {
            for j in 0..self.particles {
                for (ti, t) in self.times.iter().enumerate() {
                    writeln!(out, "{p},{j},{t:.16e},{:.16e}", self.value(p, j, ti))?;
                }
            }
        }
        Ok(())
    }
}

fn state_valid(spec: &ProcessSpec, x: &[f64]) -> bool {
    if x.len() <= 1 {
        return x.iter().all(|v| v.is_finite()) && (spec.kind != ProcessKind::Besq || x.iter().all(|&v| v >= 0.0));
    }
    match spec.kind {
        ProcessKind::Bm => in_weyl_chamber(x),
        ProcessKind::Besq => x[0] >= 0.0 && in_weyl_chamber(x),
        ProcessKind::CircleBm => in_alcove(spec.radius, x),
    }
}

fn drift(spec: &ProcessSpec, x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for j in 0..n {
        let mut b = 0.0;
        for k in 0..n {
            if k == j {
                continue;
            }
            b += match spec.kind {
                ProcessKind::Bm => 1.0 / (x[j] - x[k]),
                ProcessKind::Besq => 4.0 * x[j] / (x[j] - x[k]),
                ProcessKind::CircleBm => 1.0 / (2.0 * spec.radius * ((x[j] - x[k]) / (2.0 * spec.radius)).tan()),
            };
        }
        if spec.kind == ProcessKind::Besq {
            b += 2.0 * (spec.nu + 1.0);
        }
        out[j] = b;
    }
}

struct Stepper<'a> {
    spec: &'a ProcessSpec,
    adaptive: bool,
    b: Vec<f64>,
    trial: Vec<f64>,
    halvings: u64,
}

impl Stepper<'_> {
    // advances x by h; false if ordering cannot be kept at the finest level
    fn advance(&mut self, x: &mut Vec<f64>, h: f64, depth: u32, rng: &mut ChaCha8Rng) -> bool {
        drift(self.spec, x, &mut self.b);
        let sq = h.sqrt();
        for j in 0..x.len() {
            let g: f64 = StandardNormal.sample(rng);
            let next = match self.spec.kind {
                ProcessKind::Besq => (x[j] + self.b[j] * h + 2.0 * x[j].max(0.0).sqrt() * sq * g).max(0.0),
                _ => x[j] + self.b[j] * h + sq * g,
            };
            self.trial[j] = next;
        }
        if state_valid(self.spec, &self.trial) {
            x.copy_from_slice(&self.trial);
            return true;
        }
        if !self.adaptive || depth >= MAX_HALVINGS {
            return false;
        }
        self.halvings += 1;
        self.advance(x, h / 2.0, depth + 1, rng) && self.advance(x, h / 2.0, depth + 1, rng)
    }
}

struct PathOut {
    values: Vec<f64>,
    lifted: Option<Vec<f64>>,
    steps: u64,
    halvings: u64,
    failed: bool,
}

fn segment_steps(len: f64, dt: f64) -> usize {
    ((len / dt) - 1e-9).ceil().max(1.0) as usize
}

fn run_interacting(spec: ProcessSpec, start: &[f64], cfg: &SdeConfig) -> Result<PathEnsemble> {
    cfg.validate()?;
    ensure!(state_valid(&spec, start), Domain, "start configuration is not strictly ordered in the state space");
    let grid = cfg.grid();
    let n = start.len();
    let nt = grid.len();
    let outs: Vec<PathOut> = (0..cfg.paths)
        .into_par_iter()
        .map(|p| {
            let mut x = start.to_vec();
            let mut st = Stepper { spec: &spec, adaptive: cfg.scheme == Scheme::EulerAdaptive, b: vec![0.0; n], trial: vec![0.0; n], halvings: 0 };
            let mut rec = vec![f64::NAN; n * nt];
            let store = |rec: &mut Vec<f64>, x: &[f64], ti: usize| {
                for j in 0..n {
                    rec[j * nt + ti] = x[j];
                }
            };
            store(&mut rec, &x, 0);
            let mut step = 0u64;
            let mut failed = false;
            'outer: for ti in 1..nt {
                let len = grid[ti] - grid[ti - 1];
                let m = segment_steps(len, cfg.dt);
                let h = len / m as f64;
                for _ in 0..m {
                    let mut rng = stream_rng(cfg.seed, p as u64, step);
                    step += 1;
                    if !st.advance(&mut x, h, 0, &mut rng) {
                        failed = true;
                        break 'outer;
                    }
                }
                store(&mut rec, &x, ti);
            }
            let (values, lifted) = if spec.kind == ProcessKind::CircleBm {
                (rec.iter().map(|&v| canonicalize_circle(spec.radius, v)).collect(), Some(rec))
            } else {
                (rec, None)
            };
            PathOut { values, lifted, steps: step, halvings: st.halvings, failed }
        })
        .collect();
    Ok(assemble(spec, start, cfg, grid, n, outs))
}

fn assemble(spec: ProcessSpec, start: &[f64], cfg: &SdeConfig, times: Vec<f64>, n: usize, outs: Vec<PathOut>) -> PathEnsemble {
    let mut stats = SimStats::default();
    let mut values = Vec::with_capacity(outs.len() * n * times.len());
    let mut lifted = if spec.kind == ProcessKind::CircleBm { Some(Vec::with_capacity(values.capacity())) } else { None };
    let mut failed = Vec::with_capacity(outs.len());
    for o in outs {
        stats.base_steps += o.steps;
        stats.halvings += o.halvings;
        stats.failed_paths += o.failed as usize;
        failed.push(o.failed);
        values.extend(o.values);
        if let (Some(l), Some(ol)) = (lifted.as_mut(), o.lifted) {
            l.extend(ol);
        }
    }
    PathEnsemble { spec, start: start.to_vec(), seed: cfg.seed, times, particles: n, values, lifted, failed, stats }
}

fn simple_points(config: &Configuration) -> Result<Vec<f64>> {
    ensure!(config.is_simple(), InvalidArgument, "path simulation needs a configuration without multiple points");
    Ok(config.support().to_vec())
}

/// Noncolliding Brownian motion (Dyson model, β = 2).
pub fn simulate_dyson(config: &Configuration, cfg: &SdeConfig) -> Result<PathEnsemble> {
    run_interacting(ProcessSpec::bm(), &simple_points(config)?, cfg)
}

/// Noncolliding squared Bessel process; negative excursions are clamped to 0.
pub fn simulate_besq(nu: f64, config: &Configuration, cfg: &SdeConfig) -> Result<PathEnsemble> {
    let pts = simple_points(config)?;
    ensure!(pts[0] >= 0.0, Domain, "BESQ start must lie in [0, inf)");
    run_interacting(ProcessSpec::besq(nu)?, &pts, cfg)
}

/// Noncolliding Brownian motion on the circle of radius `r`, integrated on
/// the universal cover; the start is taken in increasing order on `[0, 2πr)`.
pub fn simulate_circle(r: f64, config: &Configuration, cfg: &SdeConfig) -> Result<PathEnsemble> {
    let pts = simple_points(config)?;
    let spec = ProcessSpec::circle(r, pts.len())?;
    ensure!(in_alcove(r, &pts), Domain, "circle start must fit in one period");
    run_interacting(spec, &pts, cfg)
}

/// Interacting system for `spec`, dispatched by process kind.
pub fn simulate_interacting(spec: &ProcessSpec, config: &Configuration, cfg: &SdeConfig) -> Result<PathEnsemble> {
    match spec.kind {
        ProcessKind::Bm => simulate_dyson(config, cfg),
        ProcessKind::Besq => simulate_besq(spec.nu, config, cfg),
        ProcessKind::CircleBm => {
            ensure!(spec.particles == config.total(), InvalidArgument, "circle spec N differs from configuration size");
            simulate_circle(spec.radius, config, cfg)
        }
    }
}

fn elementary_step(spec: &ProcessSpec, x: f64, h: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
    Ok(match spec.kind {
        ProcessKind::Bm | ProcessKind::CircleBm => {
            let g: f64 = StandardNormal.sample(rng);
            x + h.sqrt() * g
        }
        ProcessKind::Besq => {
            // noncentral χ² as a Poisson mixture of Gamma laws
            let lambda = x / (2.0 * h);
            let k = if lambda > 0.0 {
                Poisson::new(lambda).map_err(|e| Error::Numerical(e.to_string()))?.sample(rng)
            } else {
                0.0
            };
            let gamma = Gamma::new(spec.nu + 1.0 + k, 1.0).map_err(|e| Error::Numerical(e.to_string()))?;
            2.0 * h * gamma.sample(rng)
        }
    })
}

/// Independent elementary processes started at `starts`, sampled exactly at
/// the record times.
pub fn simulate_elementary_system(spec: &ProcessSpec, starts: &[f64], cfg: &SdeConfig) -> Result<PathEnsemble> {
    cfg.validate()?;
    ensure!(!starts.is_empty(), InvalidArgument, "need at least one start");
    ensure!(
        spec.kind != ProcessKind::CircleBm || spec.odd_parity(),
        Unsupported,
        "the even-N elementary circle process has a signed density and no path sampler"
    );
    ensure!(starts.iter().all(|&x| spec.contains(x)), Domain, "start outside the state space");
    let grid = cfg.grid();
    let n = starts.len();
    let nt = grid.len();
    let outs: Vec<Result<PathOut>> = (0..cfg.paths)
        .into_par_iter()
        .map(|p| {
            let mut rec = vec![0.0; n * nt];
            for (j, &u) in starts.iter().enumerate() {
                let mut x = u;
                rec[j * nt] = x;
                for ti in 1..nt {
                    let mut rng = stream_rng(cfg.seed, p as u64, (ti * n + j) as u64);
                    x = elementary_step(spec, x, grid[ti] - grid[ti - 1], &mut rng)?;
                    rec[j * nt + ti] = x;
                }
            }
            let (values, lifted) = if spec.kind == ProcessKind::CircleBm {
                (rec.iter().map(|&v| canonicalize_circle(spec.radius, v)).collect(), Some(rec))
            } else {
                (rec, None)
            };
            Ok(PathOut { values, lifted, steps: (nt - 1) as u64, halvings: 0, failed: false })
        })
        .collect();
    let outs = outs.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(assemble(*spec, starts, cfg, grid, n, outs))
}

/// A single elementary particle started at `start`.
pub fn simulate_elementary(spec: &ProcessSpec, start: f64, cfg: &SdeConfig) -> Result<PathEnsemble> {
    simulate_elementary_system(spec, &[start], cfg)
}

/// Seed of an independent sub-experiment derived from `(seed, salt)`.
pub fn derived_seed(seed: u64, salt: u64) -> u64 {
    stream_rng(seed, salt, u64::MAX >> 24).gen()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configspace::equidistant_config;
    use crate::stats::Accumulator;
    use std::f64::consts::PI;

    fn terminal(ens: &PathEnsemble, j: usize) -> Accumulator {
        let last = ens.times.len() - 1;
        let mut acc = Accumulator::default();
        for p in ens.ok_paths() {
            acc.push(ens.value(p, j, last));
        }
        acc
    }

    #[test]
    fn config_validation() {
        assert!(SdeConfig::new(0.0, 1.0, 10, 1).is_err());
        assert!(SdeConfig::new(0.01, 1.0, 0, 1).is_err());
        let c = SdeConfig::new(0.01, 1.0, 10, 1).unwrap().with_record(&[0.5, 0.25, 0.5]).unwrap();
        assert_eq!(c.grid(), vec![0.0, 0.25, 0.5, 1.0]);
        assert!(SdeConfig::new(0.01, 1.0, 10, 1).unwrap().with_record(&[2.0]).is_err());
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let cfg = SdeConfig::new(1e-2, 0.5, 64, 42).unwrap().with_record(&[0.2]).unwrap();
        let config = Configuration::simple(&[-0.1, 0.0, 0.1]).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate_dyson(&config, &cfg).unwrap())
        };
        let a = run(1);
        let b = run(3);
        assert_eq!(a.values, b.values);
        assert_eq!(a.stats, b.stats);
    }

    #[test]
    fn single_bm_variance() {
        let cfg = SdeConfig::new(1e-2, 0.8, 20_000, 7).unwrap();
        let ens = simulate_dyson(&Configuration::simple(&[0.3]).unwrap(), &cfg).unwrap();
        let acc = terminal(&ens, 0);
        let e = acc.estimate();
        let var = acc.sum_sq / acc.n as f64 - e.mean * e.mean;
        // stderr of the sample variance ≈ t·√(2/n)
        assert!((var - 0.8).abs() < 4.0 * 0.8 * (2.0 / acc.n as f64).sqrt());
    }

    #[test]
    fn dyson_center_of_mass_and_order() {
        let u = [-0.2, 0.0, 0.3];
        let cfg = SdeConfig::new(1e-3, 0.3, 4000, 9).unwrap();
        let ens = simulate_dyson(&Configuration::simple(&u).unwrap(), &cfg).unwrap();
        assert_eq!(ens.stats.failed_paths, 0);
        assert_eq!(ens.ordering_violations(), 0);
        let mut acc = Accumulator::default();
        for p in ens.ok_paths() {
            acc.push(ens.slice(p, 1).iter().sum());
        }
        let e = acc.estimate();
        assert!((e.mean - 0.1).abs() < 4.0 * e.stderr);
    }

    #[test]
    fn besq_single_mean_and_positivity() {
        let cfg = SdeConfig::new(1e-3, 0.5, 8000, 3).unwrap();
        let ens = simulate_besq(0.0, &Configuration::simple(&[0.4]).unwrap(), &cfg).unwrap();
        let e = terminal(&ens, 0).estimate();
        assert!((e.mean - 1.4).abs() < 4.0 * e.stderr, "{} ± {}", e.mean, e.stderr);
        assert!(ens.values.iter().all(|&v| v >= 0.0));
        let ex = simulate_elementary(&ProcessSpec::besq(0.0).unwrap(), 0.4, &cfg).unwrap();
        let e = terminal(&ex, 0).estimate();
        assert!((e.mean - 1.4).abs() < 4.0 * e.stderr);
    }

    #[test]
    fn wrapped_bm_matches_circle_density() {
        let r = 1.0;
        let spec = ProcessSpec::circle(r, 1).unwrap();
        let cfg = SdeConfig::new(1e-2, 1.5, 20_000, 5).unwrap();
        let ens = simulate_circle(r, &Configuration::simple(&[1.0]).unwrap(), &cfg).unwrap();
        let mut xs: Vec<f64> = ens.ok_paths().map(|p| ens.value(p, 0, 1)).collect();
        xs.sort_by(f64::total_cmp);
        // wrapped-normal CDF on [0, 2π) from the odd-parity density
        let cdf = |y: f64| {
            crate::quadrature::integrate(|z| spec.density(1.5, z, 1.0).unwrap(), 0.0, y, 1e-12).value
        };
        let n = xs.len() as f64;
        let mut d: f64 = 0.0;
        for (i, chunk) in xs.chunks(200).enumerate() {
            let x = chunk[0];
            let f = cdf(x);
            let emp = (i * 200) as f64 / n;
            d = d.max((f - emp).abs());
        }
        assert!(d * n.sqrt() < 1.63, "KS statistic {}", d * n.sqrt());
        assert!(xs.iter().all(|&x| (0.0..2.0 * PI * r).contains(&x)));
    }

    #[test]
    fn equidistant_circle_is_flat() {
        let (r, n) = (1.0, 3);
        let cfg = SdeConfig::new(2e-3, 0.4, 3000, 13).unwrap();
        let ens = simulate_circle(r, &equidistant_config(r, n).unwrap(), &cfg).unwrap();
        assert_eq!(ens.ordering_violations(), 0);
        let bins = 6;
        let mut counts = vec![0.0; bins];
        for p in ens.ok_paths() {
            for x in ens.slice(p, 1) {
                counts[((x / (2.0 * PI * r) * bins as f64) as usize).min(bins - 1)] += 1.0;
            }
        }
        let paths = ens.ok_paths().count() as f64;
        let expect = n as f64 / bins as f64;
        for c in counts {
            let mean = c / paths;
            // per-path count in a bin is at most N, variance <= N²/4
            let se = (n as f64 / 2.0) / paths.sqrt();
            assert!((mean - expect).abs() < 4.0 * se, "{mean} vs {expect}");
        }
    }

    #[test]
    fn even_circle_elementary_rejected() {
        let cfg = SdeConfig::new(1e-2, 0.1, 10, 1).unwrap();
        assert!(simulate_elementary(&ProcessSpec::circle(1.0, 2).unwrap(), 0.0, &cfg).is_err());
        assert!(simulate_elementary(&ProcessSpec::circle(1.0, 3).unwrap(), 0.0, &cfg).is_ok());
    }

    #[test]
    fn plain_euler_flags_failures() {
        // one unit step from gap 1: the difference ends below 0 with probability Φ(-3/√2) ≈ 1.7%
        let cfg = SdeConfig::new(1.0, 1.0, 2000, 1).unwrap().with_scheme(Scheme::Euler);
        let ens = simulate_dyson(&Configuration::simple(&[0.0, 1.0]).unwrap(), &cfg).unwrap();
        assert!(ens.stats.failed_paths > 0);
        assert_eq!(ens.ordering_violations(), 0);
    }

    #[test]
    fn csv_dump() {
        let cfg = SdeConfig::new(0.1, 0.2, 2, 1).unwrap();
        let ens = simulate_dyson(&Configuration::simple(&[0.0, 1.0]).unwrap(), &cfg).unwrap();
        let mut buf = Vec::new();
        ens.write_csv(&mut buf, "x").unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "path,particle,t,x");
        assert_eq!(text.lines().count(), 2 + 2 * 2 * 2);
    }
}
