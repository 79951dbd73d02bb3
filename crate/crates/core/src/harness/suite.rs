//! The named validation suite: one entry per acceptance criterion, each with
//! its tolerance and runtime budget fixed here.

use std::f64::consts::PI;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use statrs::distribution::{ContinuousCDF, Normal};

use super::{dmr_check, mgf_vs_fredholm, relaxation_scan, IntervalCounts, McOptions, RelaxationGrid, StepFunction, ValidationReport};
use crate::configspace::{equidistant_config, h_r, vandermonde, Configuration};
use crate::error::{Error, Result};
use crate::kernel::{eq_circle_kernel, extended_sine, fredholm_det, kernel_trace, CorrelationKernel, KernelForm};
use crate::martingale::{
    cpr_martingale_mc, cpr_reference, det_identity_check, itransform, itransform_quad, CoefficientExpansion,
    IdentityKind, MartingaleEvaluator,
};
use crate::quadrature::Integrator;
use crate::stats::stream_rng;
use crate::transition::{td_circle, CircleMethod, ProcessKind, ProcessSpec};

use num_complex::Complex64;

/// Suite check names in criterion order.
pub const CHECK_NAMES: [&str; 11] = [
    "det-identities",
    "itransform",
    "martingale-quadrature",
    "det-martingale",
    "circle-dual",
    "kernel-trace",
    "dmr",
    "fredholm",
    "relaxation",
    "sine-limit",
    "cpr",
];

/// `Full` runs the acceptance sizes; `Fast` cuts sample counts and draws for
/// smoke runs (tolerances are unchanged).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteSize {
    Full,
    Fast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub criterion: usize,
    pub name: String,
    pub pass: bool,
    pub elapsed_secs: f64,
    pub budget_secs: f64,
    pub reports: Vec<ValidationReport>,
}

impl CheckResult {
    /// One-line summary naming the worst sub-check.
    pub fn summary(&self) -> String {
        let failed = self.reports.iter().filter(|r| !r.pass).count();
        let worst = self
            .reports
            .iter()
            .filter(|r| !r.pass)
            .chain(self.reports.iter())
            .max_by(|a, b| a.margin().partial_cmp(&b.margin()).unwrap_or(std::cmp::Ordering::Greater));
        let worst = worst.map_or(String::new(), |r| {
            let d = if r.detail.is_empty() { String::new() } else { format!("; {}", r.detail) };
            format!(
                " worst {}: |{:.6e} - {:.6e}| vs {:.3e}{d}",
                r.check, r.estimate, r.reference, r.threshold
            )
        });
        format!(
            "[{}] criterion {:>2} {:<22} {}/{} sub-checks, {:.1}s (budget {:.0}s){worst}",
            if self.pass { "PASS" } else { "FAIL" },
            self.criterion,
            self.name,
            self.reports.len() - failed,
            self.reports.len(),
            self.elapsed_secs,
            self.budget_secs,
        )
    }
}

fn budget(name: &str) -> f64 {
    match name {
        "det-identities" => 5.0,
        "itransform" => 30.0,
        "martingale-quadrature" => 120.0,
        "det-martingale" => 30.0,
        "circle-dual" => 10.0,
        "kernel-trace" => 120.0,
        "dmr" => 1200.0,
        "fredholm" => 600.0,
        "relaxation" => 60.0,
        "sine-limit" => 60.0,
        "cpr" => 120.0,
        _ => 0.0,
    }
}

/// Run one named check; unknown names are a configuration error.
pub fn run_check(name: &str, size: SuiteSize, seed: u64) -> Result<CheckResult> {
    let criterion = CHECK_NAMES
        .iter()
        .position(|&n| n == name)
        .ok_or_else(|| Error::Config(format!("unknown check {name:?}; known: {}", CHECK_NAMES.join(", "))))?
        + 1;
    let start = Instant::now();
    let reports = match name {
        "det-identities" => det_identities(size, seed),
        "itransform" => itransform_routes(),
        "martingale-quadrature" => martingale_quadrature(seed),
        "det-martingale" => det_martingale_closed_forms(seed),
        "circle-dual" => circle_dual(),
        "kernel-trace" => trace_cases(),
        "dmr" => dmr_cases(size, seed),
        "fredholm" => fredholm_cases(size, seed),
        "relaxation" => relaxation(),
        "sine-limit" => sine_limit(),
        "cpr" => cpr_cases(size, seed),
        _ => unreachable!(),
    };
    let elapsed_secs = start.elapsed().as_secs_f64();
    let budget_secs = budget(name);
    let pass = !reports.is_empty() && reports.iter().all(|r| r.pass) && elapsed_secs <= budget_secs;
    Ok(CheckResult { criterion, name: name.to_string(), pass, elapsed_secs, budget_secs, reports })
}

/// Every check in criterion order.
pub fn run_all(size: SuiteSize, seed: u64) -> Vec<CheckResult> {
    CHECK_NAMES.iter().map(|n| run_check(n, size, seed).expect("known name")).collect()
}

fn report_or_fail(check: &str, params: serde_json::Value, r: Result<ValidationReport>) -> ValidationReport {
    r.unwrap_or_else(|e| ValidationReport::failed(check, params, e.to_string()))
}

/// Relative error floored at 1: `|a - b| / max(1, |b|)`.
fn scaled_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// `n` points, one per cell of `[start, start+len)`, jittered within ±30% of a cell.
fn jittered_grid(rng: &mut impl Rng, n: usize, start: f64, len: f64) -> Vec<f64> {
    let h = len / n as f64;
    (0..n).map(|k| start + (k as f64 + 0.5 + rng.gen_range(-0.3..0.3)) * h).collect()
}

fn det_identities(size: SuiteSize, seed: u64) -> Vec<ValidationReport> {
    let draws = if size == SuiteSize::Full { 100 } else { 20 };
    let r = 1.3;
    let mut out = Vec::new();
    for (kind, label) in [(IdentityKind::Rational, "rational"), (IdentityKind::Trigonometric { r }, "trigonometric")] {
        for n in 1..=6 {
            let mut worst: f64 = 0.0;
            let mut error = None;
            for d in 0..draws {
                let mut rng = stream_rng(seed, 100 + n as u64, d);
                let (u, x) = match kind {
                    IdentityKind::Rational => (jittered_grid(&mut rng, n, -3.0, 6.0), jittered_grid(&mut rng, n, -3.0, 6.0)),
                    IdentityKind::Trigonometric { .. } => {
                        let shift = rng.gen_range(-4.0..4.0);
                        (jittered_grid(&mut rng, n, 0.0, 2.0 * PI * r), jittered_grid(&mut rng, n, shift, 2.0 * PI * r))
                    }
                };
                match det_identity_check(kind, &x, &u) {
                    Ok((l, rhs)) => worst = worst.max((l - rhs).abs() / rhs.abs()),
                    Err(e) => error = Some(e.to_string()),
                }
            }
            let params = json!({"kind": label, "n": n, "draws": draws, "seed": seed});
            out.push(match error {
                Some(e) => ValidationReport::failed("det-identity", params, e),
                None => ValidationReport::compare("det-identity", params, worst, 0.0, 0.0, 1e-11),
            });
        }
    }
    out
}

fn monomial(n: usize) -> CoefficientExpansion {
    let mut c = vec![Complex64::new(0.0, 0.0); n + 1];
    c[n] = Complex64::new(1.0, 0.0);
    CoefficientExpansion::monomial(c).expect("valid monomial")
}

fn itransform_routes() -> Vec<ValidationReport> {
    let mut out = Vec::new();
    let ts = [0.3, 1.0, 2.5];
    let cases: Vec<(ProcessSpec, Vec<f64>)> = vec![
        (ProcessSpec::bm(), vec![-1.2, 0.4, 2.0]),
        (ProcessSpec::besq(0.5).unwrap(), vec![0.0, 0.7, 3.0]),
        (ProcessSpec::besq(-0.5).unwrap(), vec![0.0, 1.1]),
        (ProcessSpec::circle(1.3, 3).unwrap(), vec![-1.0, 0.5, 4.0]),
        (ProcessSpec::circle(1.3, 4).unwrap(), vec![0.5, 6.0]),
    ];
    for (spec, xs) in cases {
        let mut worst: f64 = 0.0;
        let mut error = None;
        let mut note = |r: Result<(f64, f64)>| match r {
            Ok((a, b)) => worst = worst.max(scaled_err(b, a)),
            Err(e) => error = Some(e.to_string()),
        };
        for &t in &ts {
            for &x in &xs {
                for n in 0..=8usize {
                    // the circle transform of z^n is the Gaussian one of the line
                    let route_spec = if spec.kind == ProcessKind::CircleBm { ProcessSpec::bm() } else { spec };
                    note(itransform(&route_spec, &monomial(n), t, x).and_then(|a| {
                        itransform_quad(&spec, |z| z.powu(n as u32), t, x).map(|b| (a, b))
                    }));
                }
                if spec.kind == ProcessKind::CircleBm {
                    let r = spec.radius;
                    // cos(nz/2r) and sin(nz/2r), real on the real line
                    for n in 0i64..=8 {
                        for (cp, cm, is_cos) in [(0.5, 0.5, true), (-0.5, 0.5, false)] {
                            let mut c = vec![Complex64::new(0.0, 0.0); 17];
                            let (a, b) = if is_cos {
                                (Complex64::new(cp, 0.0), Complex64::new(cm, 0.0))
                            } else {
                                (Complex64::new(0.0, cp), Complex64::new(0.0, cm))
                            };
                            c[(8 + n) as usize] += a;
                            c[(8 - n) as usize] += b;
                            let f = CoefficientExpansion::fourier(r, c).expect("valid");
                            let w = n as f64 / (2.0 * r);
                            note(itransform(&spec, &f, t, x).and_then(|a| {
                                itransform_quad(&spec, |z| if is_cos { (z * w).cos() } else { (z * w).sin() }, t, x)
                                    .map(|b| (a, b))
                            }));
                        }
                    }
                }
            }
        }
        let params = json!({"process": spec.kind.name(), "nu": spec.nu, "r": spec.radius, "n_particles": spec.particles,
                            "times": ts, "xs": xs, "max_degree": 8});
        out.push(match error {
            Some(e) => ValidationReport::failed("itransform", params, e),
            None => ValidationReport::compare("itransform", params, worst, 0.0, 0.0, 1e-8),
        });
    }
    out
}

/// `∫ M^{u_k}(t, y) p(t-s, y | x) dy` over the state space (one period from
/// `x` on the circle).
fn propagate(ev: &MartingaleEvaluator, k: usize, s: f64, t: f64, x: f64) -> Result<f64> {
    let spec = *ev.spec();
    let tau = t - s;
    let n = ev.config().total() as f64;
    let (lo, hi) = match spec.kind {
        ProcessKind::Bm => (x - 40.0 * tau.sqrt(), x + 40.0 * tau.sqrt()),
        ProcessKind::Besq => (0.0, x + 2.0 * tau * (80.0 + 4.0 * (n + spec.nu.abs())) + 80.0 * (x * tau).sqrt()),
        ProcessKind::CircleBm => (x, x + spec.period()),
    };
    let mut failure = None;
    let est = Integrator::with_tol(1e-13, 1e-12).integrate(
        |y| match (ev.martingale_m_index(k, t, y), spec.density(tau, y, x)) {
            (Ok(m), Ok(p)) => m * p,
            (Err(e), _) | (_, Err(e)) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        lo,
        hi,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    if !est.converged {
        return Err(Error::Numerical("propagation quadrature did not converge".into()));
    }
    Ok(est.value)
}

fn martingale_quadrature(seed: u64) -> Vec<ValidationReport> {
    let cases: Vec<(ProcessSpec, Vec<f64>, (f64, f64))> = vec![
        (ProcessSpec::bm(), vec![-1.0, 0.2, 1.1], (-2.0, 2.0)),
        (ProcessSpec::besq(0.5).unwrap(), vec![0.5, 1.5, 3.0], (0.0, 3.0)),
        (ProcessSpec::circle(1.0, 3).unwrap(), vec![0.2, 2.0, 4.1], (0.0, 2.0 * PI)),
        (ProcessSpec::circle(1.0, 4).unwrap(), vec![0.3, 1.6, 3.4, 5.0], (0.0, 2.0 * PI)),
    ];
    let mut out = Vec::new();
    for (ci, (spec, u, (xa, xb))) in cases.into_iter().enumerate() {
        let params = json!({"process": spec.kind.name(), "n": u.len(), "config": u, "draws": 20, "seed": seed});
        let ev = match Configuration::simple(&u).and_then(|c| MartingaleEvaluator::new(spec, c)) {
            Ok(ev) => ev,
            Err(e) => {
                out.push(ValidationReport::failed("martingale-m1", params, e.to_string()));
                continue;
            }
        };
        let mut worst: f64 = 0.0;
        let mut error = None;
        for d in 0..20 {
            let mut rng = stream_rng(seed, 200 + ci as u64, d);
            let s = rng.gen_range(0.0..1.0);
            let t = s + rng.gen_range(0.05..1.0);
            let x = rng.gen_range(xa..xb);
            let k = rng.gen_range(0..u.len());
            match propagate(&ev, k, s, t, x).and_then(|l| ev.martingale_m_index(k, s, x).map(|r| (l, r))) {
                Ok((l, r)) => worst = worst.max(scaled_err(l, r)),
                Err(e) => error = Some(e.to_string()),
            }
        }
        out.push(match error {
            Some(e) => ValidationReport::failed("martingale-m1", params, e),
            None => ValidationReport::compare("martingale-m1", params, worst, 0.0, 0.0, 1e-7),
        });
    }
    out
}

fn det_martingale_closed_forms(seed: u64) -> Vec<ValidationReport> {
    let mut out = Vec::new();
    let r = 1.0;
    for (pi, label) in ["dyson", "besq", "circle"].iter().enumerate() {
        let mut worst: f64 = 0.0;
        let mut error = None;
        let mut draws = 0;
        for n in 1..=5usize {
            let spec = match pi {
                0 => ProcessSpec::bm(),
                1 => ProcessSpec::besq(0.5).unwrap(),
                _ => ProcessSpec::circle(r, n).unwrap(),
            };
            for d in 0..20 {
                draws += 1;
                let mut rng = stream_rng(seed, 300 + (pi * 8 + n) as u64, d);
                let t = rng.gen_range(0.1..1.0);
                let (u, y) = match spec.kind {
                    ProcessKind::Bm => (jittered_grid(&mut rng, n, -3.0, 6.0), jittered_grid(&mut rng, n, -3.0, 6.0)),
                    ProcessKind::Besq => (jittered_grid(&mut rng, n, 0.0, 6.0), jittered_grid(&mut rng, n, 0.0, 6.0)),
                    ProcessKind::CircleBm => {
                        let shift = rng.gen_range(-4.0..4.0);
                        (jittered_grid(&mut rng, n, 0.0, 2.0 * PI * r), jittered_grid(&mut rng, n, shift, 2.0 * PI * r))
                    }
                };
                let closed = match spec.kind {
                    ProcessKind::CircleBm => h_r(r, t, &y) / h_r(r, 0.0, &u),
                    _ => vandermonde(&y) / vandermonde(&u),
                };
                let got = Configuration::simple(&u)
                    .and_then(|c| MartingaleEvaluator::new(spec, c))
                    .and_then(|ev| ev.det_martingale(t, &y));
                match got {
                    Ok(v) => worst = worst.max((v - closed).abs() / closed.abs()),
                    Err(e) => error = Some(e.to_string()),
                }
            }
        }
        let params = json!({"process": label, "n_max": 5, "draws": draws, "seed": seed});
        out.push(match error {
            Some(e) => ValidationReport::failed("det-martingale", params, e),
            None => ValidationReport::compare("det-martingale", params, worst, 0.0, 0.0, 1e-9),
        });
    }
    out
}

fn circle_dual() -> Vec<ValidationReport> {
    let r = 1.0;
    let mut out = Vec::new();
    for n in [3usize, 4] {
        let spec = ProcessSpec::circle(r, n).unwrap();
        let mut worst: f64 = 0.0;
        let mut error = None;
        for i in 0..10 {
            let dx = -PI + 2.0 * PI * (i as f64 + 0.5) / 10.0;
            for j in 0..10 {
                let t = 0.05 + 0.3 * j as f64;
                match td_circle(&spec, t, dx, 0.0, CircleMethod::Wrapped)
                    .and_then(|a| td_circle(&spec, t, dx, 0.0, CircleMethod::Spectral).map(|b| (a, b)))
                {
                    Ok((a, b)) => worst = worst.max(scaled_err(a, b)),
                    Err(e) => error = Some(e.to_string()),
                }
            }
        }
        let params = json!({"r": r, "n": n, "grid": "10 dx in (-pi, pi) x 10 t in [0.05, 2.75]"});
        out.push(match error {
            Some(e) => ValidationReport::failed("circle-dual-series", params, e),
            None => ValidationReport::compare("circle-dual-series", params, worst, 0.0, 0.0, 1e-12),
        });

        let mut total_worst: f64 = 0.0;
        let want = if n % 2 == 1 { 1.0 } else { 0.0 };
        for (t, x) in [(0.1, 0.0), (0.7, 1.3), (2.0, -2.5)] {
            let est = Integrator::with_tol(1e-13, 1e-13)
                .integrate(|y| td_circle(&spec, t, y, x, CircleMethod::Auto).unwrap_or(f64::NAN), x, x + spec.period());
            total_worst = total_worst.max((est.value - want).abs());
        }
        out.push(ValidationReport::compare(
            "circle-total-mass",
            json!({"r": r, "n": n, "expected": want}),
            want + total_worst,
            want,
            0.0,
            1e-10,
        ));
    }
    out
}

fn trace_cases() -> Vec<ValidationReport> {
    let cases: Vec<(&str, ProcessSpec, Configuration, f64, KernelForm)> = vec![
        ("dyson simple", ProcessSpec::bm(), Configuration::simple(&[-1.0, 0.0, 1.0]).unwrap(), 0.5, KernelForm::Simple),
        ("besq simple", ProcessSpec::besq(0.5).unwrap(), Configuration::simple(&[1.0, 2.0]).unwrap(), 0.3, KernelForm::Simple),
        ("extended hermite", ProcessSpec::bm(), Configuration::concentrated(0.0, 3).unwrap(), 0.7, KernelForm::NDelta0),
        ("extended laguerre", ProcessSpec::besq(1.0).unwrap(), Configuration::concentrated(0.0, 3).unwrap(), 0.5, KernelForm::NDelta0),
        ("equidistant circle", ProcessSpec::circle(1.0, 5).unwrap(), equidistant_config(1.0, 5).unwrap(), 0.4, KernelForm::Simple),
        ("dyson multiple point", ProcessSpec::bm(), Configuration::from_points(&[0.0, 0.0, 1.0]).unwrap(), 0.4, KernelForm::MultiplePoint),
    ];
    cases
        .into_iter()
        .map(|(label, spec, cfg, t, form)| {
            let n = cfg.total() as f64;
            let params = json!({"case": label, "config": cfg.to_string(), "t": t});
            let got = CorrelationKernel::new(spec, cfg).and_then(|k| {
                if k.form() != form {
                    return Err(Error::Numerical(format!("expected {form:?} kernel, got {:?}", k.form())));
                }
                kernel_trace(&k, t)
            });
            report_or_fail("kernel-trace", params.clone(), got.map(|v| ValidationReport::compare("kernel-trace", params, v, n, 0.0, 1e-6)))
        })
        .collect()
}

fn dmr_cases(size: SuiteSize, seed: u64) -> Vec<ValidationReport> {
    let samples = if size == SuiteSize::Full { 200_000 } else { 20_000 };
    let dt = 1e-3;
    let t_end = 0.5;
    let r = 1.0;
    let cases: Vec<(ProcessSpec, Configuration, IntervalCounts)> = vec![
        (
            ProcessSpec::bm(),
            Configuration::simple(&[-0.5, 0.5]).unwrap(),
            IntervalCounts::new(vec![(0.5, 0.0, 1.0)]).unwrap(),
        ),
        (
            ProcessSpec::bm(),
            Configuration::simple(&[-1.0, 0.0, 1.0]).unwrap(),
            IntervalCounts::new(vec![(0.25, -0.5, 0.5), (0.5, 0.0, 2.0)]).unwrap(),
        ),
        (
            ProcessSpec::besq(0.5).unwrap(),
            Configuration::simple(&[1.0, 2.0]).unwrap(),
            IntervalCounts::new(vec![(0.5, 1.0, 3.0)]).unwrap(),
        ),
        (
            ProcessSpec::circle(r, 3).unwrap(),
            equidistant_config(r, 3).unwrap(),
            IntervalCounts::new(vec![(0.5, 0.0, 2.0)]).unwrap(),
        ),
    ];
    cases
        .into_iter()
        .enumerate()
        .map(|(i, (spec, cfg, obs))| {
            let opts = McOptions { samples, dt, seed: seed.wrapping_add(700 + i as u64) };
            let params = json!({"process": spec.kind.name(), "config": cfg.to_string()});
            report_or_fail("dmr", params, dmr_check(&spec, &cfg, &obs, t_end, opts))
        })
        .collect()
}

fn fredholm_cases(size: SuiteSize, seed: u64) -> Vec<ValidationReport> {
    let samples = if size == SuiteSize::Full { 200_000 } else { 20_000 };
    let mut out = Vec::new();

    let cfg = Configuration::simple(&[-0.5, 0.5]).unwrap();
    let fns = [StepFunction { c: -0.7, a: -0.5, b: 1.0 }, StepFunction { c: 0.4, a: 0.0, b: 2.0 }];
    let opts = McOptions { samples, dt: 1e-3, seed: seed.wrapping_add(800) };
    out.push(report_or_fail(
        "mgf-fredholm",
        json!({"config": cfg.to_string()}),
        mgf_vs_fredholm(&ProcessSpec::bm(), &cfg, &[0.3, 0.8], &fns, 24, opts),
    ));

    // one particle: Det[δ + 𝕂χ] = 1 + ∫ χ p
    let (u, t): (f64, f64) = (0.3, 0.5);
    let f = StepFunction { c: 0.8, a: -0.4, b: 1.2 };
    let z = Normal::standard();
    let mass = z.cdf((f.b - u) / t.sqrt()) - z.cdf((f.a - u) / t.sqrt());
    let oracle = 1.0 + f.c.exp_m1() * mass;
    let params = json!({"u": u, "t": t, "f": f});
    let got = CorrelationKernel::new(ProcessSpec::bm(), Configuration::simple(&[u]).unwrap())
        .and_then(|k| fredholm_det(&k, &[t], &[f.chi()], 16))
        .map(|d| ValidationReport::compare("fredholm-rank-one", params.clone(), d, oracle, 0.0, 1e-8));
    out.push(report_or_fail("fredholm-rank-one", params, got));
    out
}

/// Shifts `T` in units of `r²/N`; the last is the acceptance point `20 r²/N`.
pub const RELAXATION_SHIFTS: [f64; 6] = [0.0, 2.0, 5.0, 10.0, 15.0, 20.0];

fn relaxation() -> Vec<ValidationReport> {
    let mut out = Vec::new();
    for (r, n) in [(1.0, 3usize), (1.0, 4), (2.0, 5)] {
        let unit = r * r / n as f64;
        let shifts: Vec<f64> = RELAXATION_SHIFTS.iter().map(|s| s * unit).collect();
        let grid = RelaxationGrid::standard(r, n, 12);
        let params = json!({"r": r, "n": n, "shifts": shifts, "grid": grid});
        match relaxation_scan(r, n, &shifts, &grid) {
            Ok(rows) => {
                let monotone = rows.windows(2).all(|w| w[1].distance < w[0].distance);
                let last = rows.last().expect("nonempty").distance;
                let table: Vec<String> = rows.iter().map(|row| format!("{:.3}:{:.3e}", row.shift, row.distance)).collect();
                let mut rep = ValidationReport::compare("relaxation", params, last, 0.0, 0.0, 1e-6)
                    .with_detail(format!("monotone={monotone} T:distance {}", table.join(" ")));
                rep.pass &= monotone;
                out.push(rep);
            }
            Err(e) => out.push(ValidationReport::failed("relaxation", params, e.to_string())),
        }

        // equal-time equilibrium kernel against the CUE sine ratio
        let mut worst: f64 = 0.0;
        for i in 1..50 {
            let dx = -2.0 * PI * r + 4.0 * PI * r * i as f64 / 50.0 + 0.013;
            let ratio = (n as f64 * dx / (2.0 * r)).sin() / (2.0 * PI * r * (dx / (2.0 * r)).sin());
            worst = worst.max((eq_circle_kernel(r, n, 0.0, dx) - ratio).abs());
        }
        out.push(ValidationReport::compare("cue-sine-ratio", json!({"r": r, "n": n}), worst, 0.0, 0.0, 1e-12));
    }
    out
}

fn sine_limit() -> Vec<ValidationReport> {
    let (r, n) = (50.0, 314usize);
    let rho = n as f64 / (2.0 * PI * r);
    let mut worst: f64 = 0.0;
    let mut at = (0.0, 0.0);
    for i in 0..=10 {
        let dt = -0.5 + 0.1 * i as f64;
        for j in 0..=60 {
            let dx = -3.0 + 0.1 * j as f64;
            let d = (eq_circle_kernel(r, n, dt, dx) - extended_sine(rho, dt, dx)).abs();
            if d > worst {
                worst = d;
                at = (dt, dx);
            }
        }
    }
    vec![ValidationReport::compare(
        "sine-limit",
        json!({"r": r, "n": n, "rho": rho, "grid": "dt in -0.5:0.5:11, dx in -3:3:61"}),
        worst,
        0.0,
        0.0,
        1e-3,
    )
    .with_detail(format!("worst at dt={:.2}, dx={:.2}", at.0, at.1))]
}

fn cpr_cases(size: SuiteSize, seed: u64) -> Vec<ValidationReport> {
    let samples = if size == SuiteSize::Full { 100_000 } else { 20_000 };
    let cfg = Configuration::simple(&[0.6, 1.4]).unwrap();
    let (t, x) = (0.4, 1.0);
    let mut out = Vec::new();
    for n in [-1i64, 0, 1] {
        for k in 0..2 {
            let s = seed.wrapping_add(1100 + (3 * (n + 1) as u64) + k as u64);
            let params = json!({"n": n, "k": k, "config": cfg.to_string(), "t": t, "x": x, "samples": samples, "seed": s});
            let got = cpr_martingale_mc(n, &cfg, k, t, x, samples, s).and_then(|e| {
                cpr_reference(n, &cfg, k, t, x).map(|r| {
                    ValidationReport::within_sigma("cpr", params.clone(), e.mean, r, e.stderr, super::SIGMA_BAND)
                })
            });
            out.push(report_or_fail("cpr", params, got));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_check_is_config_error() {
        assert!(matches!(run_check("nope", SuiteSize::Fast, 1), Err(Error::Config(_))));
    }

    #[test]
    fn deterministic_checks_pass_fast() {
        for name in ["det-identities", "itransform", "det-martingale", "circle-dual"] {
            let r = run_check(name, SuiteSize::Fast, 1).unwrap();
            assert!(r.pass, "{}", r.summary());
        }
    }

    #[test]
    fn summary_line_shape() {
        let r = run_check("det-identities", SuiteSize::Fast, 1).unwrap();
        let s = r.summary();
        assert!(s.starts_with("[PASS] criterion  1 det-identities"), "{s}");
    }
}
