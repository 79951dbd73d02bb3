//! Correlation kernels, multi-time correlation functions, closed-form
//! kernels (extended Hermite, Laguerre and sine; circle equilibrium and
//! relaxation) and Nyström-discretized Fredholm determinants.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;

use crate::configspace::Configuration;
use crate::error::{ensure, Error, Result};
use crate::linalg;
use crate::martingale::{m_ndelta0, MartingaleEvaluator};
use crate::quadrature::{gauss_legendre_on, Integrator};
use crate::specfun::{HermiteFunctions, LaguerreFunctions};
use crate::transition::{sigma_n, ProcessKind, ProcessSpec};

/// Term-magnitude floor for every truncated mode sum.
pub const TAIL_TOL: f64 = 1e-16;

const MAX_TAIL_TERMS: usize = 2_000_000;

/// How [`CorrelationKernel`] evaluates its first term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelForm {
    /// `Σ_k p(s,x|u_k) M^{u_k}(t,y)` over a simple configuration.
    Simple,
    /// Closed Hermite/Laguerre series for `Nδ_0`.
    NDelta0,
    /// Contour residues at multiple points.
    MultiplePoint,
}

/// The space-time correlation kernel `𝕂_ξ` of a noncolliding process.
#[derive(Debug, Clone)]
pub struct CorrelationKernel {
    evaluator: MartingaleEvaluator,
    form: KernelForm,
    drift: f64,
}

impl CorrelationKernel {
    pub fn new(spec: ProcessSpec, config: Configuration) -> Result<Self> {
        let form = if config.is_simple() {
            KernelForm::Simple
        } else if config.support().len() == 1 && config.support()[0] == 0.0 && spec.kind != ProcessKind::CircleBm {
            KernelForm::NDelta0
        } else {
            KernelForm::MultiplePoint
        };
        let evaluator = MartingaleEvaluator::new(spec, config)?;
        Ok(CorrelationKernel { evaluator, form, drift: 0.0 })
    }

    /// Common drift `b`: `𝕂_b(s,x;t,y) = 𝕂(s, x-bs; t, y-bt)`.
    pub fn with_drift(mut self, b: f64) -> Result<Self> {
        ensure!(b.is_finite(), InvalidArgument, "drift must be finite");
        ensure!(
            b == 0.0 || self.spec().kind != ProcessKind::Besq,
            Unsupported,
            "a drift transform is not defined on the half line"
        );
        self.drift = b;
        Ok(self)
    }

    pub fn spec(&self) -> &ProcessSpec {
        self.evaluator.spec()
    }

    pub fn config(&self) -> &Configuration {
        self.evaluator.config()
    }

    pub fn form(&self) -> KernelForm {
        self.form
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn particles(&self) -> usize {
        self.config().total()
    }

    /// `𝕂(s, x; t, y)`, `s > 0`, `t >= 0`.
    pub fn eval(&self, s: f64, x: f64, t: f64, y: f64) -> Result<f64> {
        ensure!(s > 0.0 && s.is_finite(), Domain, "kernel needs s > 0, got {s}");
        ensure!(t >= 0.0 && t.is_finite(), Domain, "kernel needs t >= 0, got {t}");
        let (x, y) = (x - self.drift * s, y - self.drift * t);
        let spec = *self.spec();
        let main = match self.form {
            KernelForm::Simple => {
                let mut acc = 0.0;
                for (k, &u) in self.config().support().iter().enumerate() {
                    let p = spec.density(s, x, u)?;
                    if p != 0.0 {
                        acc += p * self.evaluator.martingale_m_index(k, t, y)?;
                    }
                }
                acc
            }
            KernelForm::NDelta0 => {
                let p = spec.density(s, x, 0.0)?;
                if p == 0.0 {
                    0.0
                } else {
                    p * m_ndelta0(&spec, self.particles(), s, x, t, y)?
                }
            }
            KernelForm::MultiplePoint => {
                let mut acc = 0.0;
                for &v in self.config().support() {
                    acc += self.evaluator.multipoint_weighted(v, s, x, t, y)?;
                }
                acc
            }
        };
        if s > t {
            Ok(main - spec.density(s - t, x, y)?)
        } else {
            Ok(main)
        }
    }

    /// Space-time correlation function `det[𝕂(t_i, x_i; t_j, x_j)]`.
    pub fn corr_function(&self, points: &[(f64, f64)]) -> Result<f64> {
        ensure!(!points.is_empty(), InvalidArgument, "need at least one point");
        ensure!(points.iter().all(|p| p.0 > 0.0), Domain, "correlation functions need all t_i > 0");
        let n = points.len();
        let mut m = vec![0.0; n * n];
        for (i, &(ti, xi)) in points.iter().enumerate() {
            for (j, &(tj, xj)) in points.iter().enumerate() {
                m[i * n + j] = self.eval(ti, xi, tj, xj)?;
            }
        }
        Ok(linalg::det(n, &m))
    }

    /// `ρ_1(t, x) = 𝕂(t, x; t, x)`.
    pub fn density(&self, t: f64, x: f64) -> Result<f64> {
        self.eval(t, x, t, x)
    }
}

fn check_times(s: f64, t: f64) -> Result<()> {
    ensure!(s > 0.0 && t > 0.0, Domain, "closed-form kernel needs s, t > 0, got s={s}, t={t}");
    Ok(())
}

/// Extended Hermite kernel `𝐊_H(s, x; t, y)`.
pub fn extended_hermite(n: usize, s: f64, x: f64, t: f64, y: f64) -> Result<f64> {
    check_times(s, t)?;
    ensure!(n >= 1, InvalidArgument, "needs N >= 1");
    let ratio = (t / s).sqrt();
    let a = x / (2.0 * s).sqrt();
    let b = y / (2.0 * t).sqrt();
    let mut pairs = HermiteFunctions::new(a).zip(HermiteFunctions::new(b));
    let mut head = 0.0;
    let mut w = 1.0;
    for (fa, fb) in pairs.by_ref().take(n) {
        head += w * fa * fb;
        w *= ratio;
    }
    let mut tail = 0.0;
    if s > t {
        // |φ_n| <= π^{-1/4}
        let mut k = n;
        for (fa, fb) in pairs {
            if w < TAIL_TOL * 0.5 {
                break;
            }
            ensure!(k < MAX_TAIL_TERMS, Numerical, "extended Hermite tail did not converge (t/s too close to 1)");
            tail += w * fa * fb;
            w *= ratio;
            k += 1;
        }
    }
    // for s > t the finite sum cancels against the full series
    let k = if s > t { -tail } else { head };
    Ok(k / (2.0 * s).sqrt())
}

/// Extended Laguerre kernel `𝐊_{L^{(ν)}}(s, x; t, y)`, with Laguerre
/// functions evaluated at `x/2s` and `y/2t`.
pub fn extended_laguerre(nu: f64, n: usize, s: f64, x: f64, t: f64, y: f64) -> Result<f64> {
    check_times(s, t)?;
    ensure!(n >= 1, InvalidArgument, "needs N >= 1");
    ensure!(x >= 0.0 && y >= 0.0, Domain, "Laguerre kernel needs x, y >= 0");
    let ratio = t / s;
    let mut pairs = LaguerreFunctions::new(nu, x / (2.0 * s))?.zip(LaguerreFunctions::new(nu, y / (2.0 * t))?);
    let mut head = 0.0;
    let mut w = 1.0;
    for (fa, fb) in pairs.by_ref().take(n) {
        head += w * fa * fb;
        w *= ratio;
    }
    let mut tail = 0.0;
    if s > t {
        let mut k = n;
        for (fa, fb) in pairs {
            // Laguerre functions grow at most like a power of n
            if w * (k as f64 + 1.0).powf(nu.abs() + 1.0) < TAIL_TOL * 0.5 {
                break;
            }
            ensure!(k < MAX_TAIL_TERMS, Numerical, "extended Laguerre tail did not converge (t/s too close to 1)");
            tail += w * fa * fb;
            w *= ratio;
            k += 1;
        }
    }
    let k = if s > t { -tail } else { head };
    Ok(k / (2.0 * s))
}

/// Gauge `(e^{-x²/4s}/e^{-y²/4t})` linking [`extended_hermite`] to the `Nδ_0` kernel.
pub fn hermite_gauge(s: f64, x: f64, t: f64, y: f64) -> f64 {
    (y * y / (4.0 * t) - x * x / (4.0 * s)).exp()
}

/// Gauge `(x/2s)^{ν/2}e^{-x/4s} / ((y/2t)^{ν/2}e^{-y/4t})` linking [`extended_laguerre`] to the `Nδ_0` kernel.
pub fn laguerre_gauge(nu: f64, s: f64, x: f64, t: f64, y: f64) -> f64 {
    let a = x / (2.0 * s);
    let b = y / (2.0 * t);
    if nu == 0.0 {
        return ((b - a) / 2.0).exp();
    }
    (0.5 * nu * (a.ln() - b.ln()) + (b - a) / 2.0).exp()
}

fn lowest_modes(n: usize) -> impl Iterator<Item = f64> {
    let half = (n as f64 - 1.0) / 2.0;
    let lo = -(n as i64);
    (lo..=n as i64).map(move |m| sigma_n(n, m)).filter(move |s| s.abs() <= half)
}

/// Equilibrium kernel of the circle process, `𝕂_eq^r(t-s, y-x)`.
pub fn eq_circle_kernel(r: f64, n: usize, dt: f64, dx: f64) -> f64 {
    let c = 1.0 / (2.0 * PI * r);
    if dt > 0.0 {
        return c * lowest_modes(n).map(|sg| (sg * sg * dt / (2.0 * r * r)).exp() * (sg * dx / r).cos()).sum::<f64>();
    }
    if dt == 0.0 {
        let den = (dx / (2.0 * r)).sin();
        if den.abs() < 1e-6 {
            return c * lowest_modes(n).map(|sg| (sg * dx / r).cos()).sum::<f64>();
        }
        return c * (n as f64 * dx / (2.0 * r)).sin() / den;
    }
    // complementary modes |σ| > (N-1)/2, outward in pairs ±σ
    let first = (n as f64 + 1.0) / 2.0;
    let mut sum = 0.0;
    let mut sg = first;
    let mut terms = 0usize;
    loop {
        let e = (sg * sg * dt / (2.0 * r * r)).exp();
        if e < TAIL_TOL * 0.5 || terms > MAX_TAIL_TERMS {
            break;
        }
        sum += 2.0 * e * (sg * dx / r).cos();
        sg += 1.0;
        terms += 1;
    }
    -c * sum
}

/// `Re 𝒢_η^{(k)}(s, x; t, y)` for the equidistant start; the `k` and `-k`
/// components are complex conjugates, so the real parts sum to the kernel.
pub fn relaxation_component(r: f64, n: usize, k: i64, s: f64, x: f64, t: f64, y: f64) -> Result<f64> {
    ensure!(s > 0.0, Domain, "relaxation kernel needs s > 0, got {s}");
    ensure!(r > 0.0 && n >= 1, Domain, "needs r > 0 and N >= 1");
    let r2 = 2.0 * r * r;
    let shift = (k * n as i64) as f64;
    let mut sum = 0.0;
    for sg in lowest_modes(n) {
        let sk = sg + shift;
        let decay = -(sk * sk - sg * sg) * s / r2 + sg * sg * (t - s) / r2;
        sum += decay.exp() * ((sk * x - sg * y) / r).cos();
    }
    Ok(sum / (2.0 * PI * r))
}

/// `Σ_{|k|<=k_cut} 𝒢_η^{(k)} - 𝟙(s>t) p^r(s-t, x|y)`.
pub fn relaxation_kernel(r: f64, n: usize, s: f64, x: f64, t: f64, y: f64, k_cut: usize) -> Result<f64> {
    let mut g = 0.0;
    for k in -(k_cut as i64)..=(k_cut as i64) {
        g += relaxation_component(r, n, k, s, x, t, y)?;
    }
    if s > t {
        g -= ProcessSpec::circle(r, n)?.density(s - t, x, y)?;
    }
    Ok(g)
}

/// Extended sine kernel with density `ρ`.
pub fn extended_sine(rho: f64, dt: f64, dx: f64) -> f64 {
    if dt == 0.0 {
        if dx.abs() < 1e-8 {
            let z = PI * rho * dx;
            return rho * (1.0 - z * z / 6.0);
        }
        return (PI * rho * dx).sin() / (PI * dx);
    }
    let integrand = |v: f64| (PI * PI * v * v * dt / 2.0).exp() * (PI * v * dx).cos();
    let head = Integrator::with_tol(1e-15, 1e-14).integrate(integrand, 0.0, rho).value;
    if dt > 0.0 {
        return head;
    }
    // ∫_0^∞ e^{-a v²} cos(b v) dv = √(π/a)/2 · e^{-b²/4a}
    let a = PI * PI * (-dt) / 2.0;
    let b = PI * dx;
    let full = 0.5 * (PI / a).sqrt() * (-b * b / (4.0 * a)).exp();
    -(full - head)
}

/// Test function `χ` on one time slice, with compact support `[a, b]`.
pub struct TestFunction<'a> {
    pub chi: Box<dyn Fn(f64) -> f64 + Send + Sync + 'a>,
    pub support: (f64, f64),
}

impl<'a> TestFunction<'a> {
    pub fn new(chi: impl Fn(f64) -> f64 + Send + Sync + 'a, a: f64, b: f64) -> Self {
        TestFunction { chi: Box::new(chi), support: (a, b) }
    }

    /// `χ = c·𝟙_{[a,b]}`.
    pub fn indicator(c: f64, a: f64, b: f64) -> TestFunction<'static> {
        TestFunction { chi: Box::new(move |_| c), support: (a, b) }
    }
}

/// Nyström discretization of `δ + 𝕂χ` on Gauss–Legendre nodes per time slice.
#[derive(Debug, Clone)]
pub struct KernelGrid {
    pub times: Vec<f64>,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<Vec<f64>>,
    /// Row-major square matrix of size `Σ nodes`.
    pub matrix: Vec<f64>,
}

impl KernelGrid {
    pub fn assemble(k: &CorrelationKernel, times: &[f64], fns: &[TestFunction<'_>], nodes_per_slice: usize) -> Result<Self> {
        ensure!(!times.is_empty(), InvalidArgument, "need at least one time");
        ensure!(times.len() == fns.len(), InvalidArgument, "one test function per time required");
        ensure!(times.windows(2).all(|w| w[0] < w[1]), InvalidArgument, "times must be strictly increasing");
        ensure!(times[0] > 0.0, Domain, "times must be > 0");
        ensure!(nodes_per_slice >= 1, InvalidArgument, "need at least one node per slice");
        for f in fns {
            ensure!(f.support.0 < f.support.1, InvalidArgument, "test-function support must be a nonempty interval");
        }
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for f in fns {
            let rule = gauss_legendre_on(nodes_per_slice, f.support.0, f.support.1);
            let w: Vec<f64> = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * (f.chi)(*x)).collect();
            nodes.push(rule.nodes);
            weights.push(w);
        }
        let flat: Vec<(f64, f64, f64)> = times
            .iter()
            .zip(nodes.iter().zip(&weights))
            .flat_map(|(&t, (xs, ws))| xs.iter().zip(ws).map(move |(&x, &w)| (t, x, w)))
            .collect();
        let dim = flat.len();
        let rows: Vec<Result<Vec<f64>>> = flat
            .par_iter()
            .enumerate()
            .map(|(i, &(ti, xi, _))| {
                let mut row = vec![0.0; dim];
                for (j, &(tj, xj, wj)) in flat.iter().enumerate() {
                    let kv = if wj == 0.0 { 0.0 } else { k.eval(ti, xi, tj, xj)? * wj };
                    row[j] = kv + if i == j { 1.0 } else { 0.0 };
                }
                Ok(row)
            })
            .collect();
        let mut matrix = Vec::with_capacity(dim * dim);
        for row in rows {
            matrix.extend(row?);
        }
        Ok(KernelGrid { times: times.to_vec(), nodes, weights, matrix })
    }

    pub fn dim(&self) -> usize {
        self.nodes.iter().map(Vec::len).sum()
    }

    pub fn determinant(&self) -> f64 {
        linalg::det(self.dim(), &self.matrix)
    }
}

/// Tolerance on the node-doubling check in [`fredholm_det`].
pub const FREDHOLM_DOUBLING_TOL: f64 = 1e-8;

/// `Det[δ + 𝕂χ]` with `nodes_per_slice` and twice as many nodes; fails
/// unless the two agree to [`FREDHOLM_DOUBLING_TOL`].
pub fn fredholm_det(k: &CorrelationKernel, times: &[f64], fns: &[TestFunction<'_>], nodes_per_slice: usize) -> Result<f64> {
    let coarse = KernelGrid::assemble(k, times, fns, nodes_per_slice)?.determinant();
    let fine = KernelGrid::assemble(k, times, fns, 2 * nodes_per_slice)?.determinant();
    ensure!(
        (coarse - fine).abs() < FREDHOLM_DOUBLING_TOL,
        Numerical,
        "Fredholm determinant not converged: {coarse} with {nodes_per_slice} nodes, {fine} with {}",
        2 * nodes_per_slice
    );
    Ok(fine)
}

/// `∫ 𝕂(t, x; t, x) dx` over the state space (or one period).
pub fn kernel_trace(k: &CorrelationKernel, t: f64) -> Result<f64> {
    let spec = *k.spec();
    let pts = k.config().expand();
    let (lo, hi) = match spec.kind {
        ProcessKind::CircleBm => (0.0, spec.period()),
        ProcessKind::Bm => {
            let w = 40.0 * t.sqrt() + 4.0 * (pts.len() as f64).sqrt() * t.sqrt() + k.drift().abs() * t;
            let c = k.drift() * t;
            (pts[0] + c - w, pts[pts.len() - 1] + c + w)
        }
        ProcessKind::Besq => {
            let n = pts.len() as f64;
            let top = pts[pts.len() - 1];
            (0.0, top + 2.0 * t * (80.0 + 4.0 * (n + spec.nu.abs())) + 8.0 * (top * t).sqrt() * 10.0)
        }
    };
    let mut failure: Option<Error> = None;
    let est = Integrator::with_tol(1e-11, 1e-11).integrate(
        |x| match k.density(t, x) {
            Ok(v) => v,
            Err(e) => {
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
    ensure!(est.converged, Numerical, "trace quadrature did not converge");
    Ok(est.value)
}

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write kernel values on a grid as CSV with header `s,x,t,y,K`.
pub fn write_kernel_csv(
    out: &mut impl Write,
    comment: &str,
    k: &CorrelationKernel,
    points: &[(f64, f64, f64, f64)],
) -> Result<()> {
    let values: Vec<Result<f64>> = points.par_iter().map(|&(s, x, t, y)| k.eval(s, x, t, y)).collect();
    writeln!(out, "# {comment}")?;
    writeln!(out, "s,x,t,y,K")?;
    for (&(s, x, t, y), v) in points.iter().zip(values) {
        writeln!(out, "{},{},{},{},{}", fmt_f(s), fmt_f(x), fmt_f(t), fmt_f(y), fmt_f(v?))?;
    }
    Ok(())
}

/// Write correlation functions as CSV with header `t1,x1,...,tM,xM,rho`.
pub fn write_correlation_csv(
    out: &mut impl Write,
    comment: &str,
    k: &CorrelationKernel,
    rows: &[Vec<(f64, f64)>],
) -> Result<()> {
    let m = rows.first().map_or(0, Vec::len);
    ensure!(rows.iter().all(|r| r.len() == m && m > 0), InvalidArgument, "rows must have equal nonzero length");
    writeln!(out, "# {comment}")?;
    let header: Vec<String> = (1..=m).flat_map(|i| [format!("t{i}"), format!("x{i}")]).collect();
    writeln!(out, "{},rho", header.join(","))?;
    for row in rows {
        let rho = k.corr_function(row)?;
        let cells: Vec<String> = row.iter().flat_map(|&(t, x)| [fmt_f(t), fmt_f(x)]).collect();
        writeln!(out, "{},{}", cells.join(","), fmt_f(rho))?;
    }
    Ok(())
}
