//! Entire functions `Φ_ξ^v`, the integral transform `I`, martingale functions
//! `M_ξ^v`, determinantal martingales and their closed forms, multiple-point
//! martingales, and the complex-process prefactors `Q_t^{(n+1/2)}`.
//!
//! The production evaluator works on coefficient expansions: a polynomial
//! `Σ a_n z^n` is mapped term by term to `Σ a_n m_n(t,x)` using the
//! fundamental martingale polynomials, and a trigonometric polynomial
//! `Σ b_n e^{inz/2r}` to `Σ b_n e^{inx/2r + n²t/8r²}`. Quadrature versions of
//! the transform exist as independent oracles.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::configspace::{in_alcove, in_weyl_chamber, vandermonde, Configuration};
use crate::error::{ensure, Error, Result};
use crate::linalg;
use crate::quadrature::{gauss_hermite, Integrator};
use crate::specfun::{gammafn, ln_gamma, HermiteFunctions, LaguerreFunctions};
use crate::stats::{stream_rng, Accumulator, McEstimate};
use crate::transition::{itransform_kernel_qnu, td_circle_complex, ProcessKind, ProcessSpec};

/// Trapezoid nodes on the residue contour.
pub const RESIDUE_NODES: usize = 64;

/// Largest tolerated `|Im|` of a transformed real function, relative to the term scale.
pub const IMAG_RESIDUE_TOL: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Basis of a [`CoefficientExpansion`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    /// `z^n`, `n = 0..N-1`.
    Monomial,
    /// `e^{inz/2r}`, `n = -(N-1)..N-1`.
    Fourier,
}

/// Finite expansion of an entire function in a monomial or Fourier basis.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientExpansion {
    basis: Basis,
    radius: f64,
    coefficients: Vec<Complex64>,
}

impl CoefficientExpansion {
    pub fn monomial(coefficients: Vec<Complex64>) -> Result<Self> {
        ensure!(!coefficients.is_empty(), InvalidArgument, "expansion needs at least one coefficient");
        Ok(CoefficientExpansion { basis: Basis::Monomial, radius: 0.0, coefficients })
    }

    /// Coefficients of `e^{inz/2r}` for `n = -(N-1), ..., N-1` (length `2N-1`).
    pub fn fourier(radius: f64, coefficients: Vec<Complex64>) -> Result<Self> {
        ensure!(radius > 0.0, Domain, "Fourier basis needs r > 0");
        ensure!(
            coefficients.len() % 2 == 1,
            InvalidArgument,
            "Fourier expansion needs 2N-1 coefficients, got {}",
            coefficients.len()
        );
        Ok(CoefficientExpansion { basis: Basis::Fourier, radius, coefficients })
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    /// `N` implied by the basis range.
    pub fn particles(&self) -> usize {
        match self.basis {
            Basis::Monomial => self.coefficients.len(),
            Basis::Fourier => self.coefficients.len().div_ceil(2),
        }
    }

    /// Exponent `n` carried by coefficient `i`.
    pub fn power(&self, i: usize) -> i64 {
        match self.basis {
            Basis::Monomial => i as i64,
            Basis::Fourier => i as i64 - (self.particles() as i64 - 1),
        }
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        match self.basis {
            Basis::Monomial => self.coefficients.iter().rev().fold(ZERO, |acc, c| acc * z + c),
            Basis::Fourier => {
                let i = Complex64::i();
                self.coefficients
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| **c != ZERO)
                    .map(|(k, c)| c * (i * self.power(k) as f64 * z / (2.0 * self.radius)).exp())
                    .sum()
            }
        }
    }
}

fn support_index(config: &Configuration, v: f64) -> Result<usize> {
    config
        .index_of(v)
        .ok_or_else(|| Error::InvalidArgument(format!("{v} is not a support point of the configuration")))
}

fn require_simple(config: &Configuration) -> Result<()> {
    ensure!(config.is_simple(), InvalidArgument, "operation needs a configuration without multiple points");
    Ok(())
}

/// `Φ_ξ^v(z)`: Lagrange-type product equal to 1 at `v` and 0 at the other points.
pub fn phi(spec: &ProcessSpec, config: &Configuration, v: f64, z: Complex64) -> Result<Complex64> {
    require_simple(config)?;
    let k = support_index(config, v)?;
    let u = config.support();
    let v = u[k];
    let mut p = ONE;
    for (l, &ul) in u.iter().enumerate() {
        if l == k {
            continue;
        }
        p *= match spec.kind {
            ProcessKind::Bm | ProcessKind::Besq => (z - ul) / (v - ul),
            ProcessKind::CircleBm => {
                let r2 = 2.0 * spec.radius;
                ((z - ul) / r2).sin() / ((v - ul) / r2).sin()
            }
        };
    }
    Ok(p)
}

/// Exact expansion of `Φ_ξ^v` by multiplying out its factors.
pub fn phi_expand(spec: &ProcessSpec, config: &Configuration, v: f64) -> Result<CoefficientExpansion> {
    require_simple(config)?;
    let k = support_index(config, v)?;
    let u = config.support();
    let n = u.len();
    let v = u[k];
    match spec.kind {
        ProcessKind::Bm | ProcessKind::Besq => {
            let mut poly = vec![ONE];
            for (l, &ul) in u.iter().enumerate() {
                if l == k {
                    continue;
                }
                let d = v - ul;
                let mut next = vec![ZERO; poly.len() + 1];
                for (i, c) in poly.iter().enumerate() {
                    next[i + 1] += c / d;
                    next[i] -= c * ul / d;
                }
                poly = next;
            }
            CoefficientExpansion::monomial(poly)
        }
        ProcessKind::CircleBm => {
            let r2 = 2.0 * spec.radius;
            let mut coef = vec![ZERO; 2 * n - 1];
            coef[n - 1] = ONE;
            let i = Complex64::i();
            for (l, &ul) in u.iter().enumerate() {
                if l == k {
                    continue;
                }
                // sin((z-u)/2r) = (α w - β/w)/2i with w = e^{iz/2r}
                let den = 2.0 * i * ((v - ul) / r2).sin();
                let alpha = (-i * ul / r2).exp() / den;
                let beta = (i * ul / r2).exp() / den;
                let mut next = vec![ZERO; 2 * n - 1];
                for (j, c) in coef.iter().enumerate() {
                    if *c == ZERO {
                        continue;
                    }
                    next[j + 1] += alpha * c;
                    next[j - 1] -= beta * c;
                }
                coef = next;
            }
            CoefficientExpansion::fourier(spec.radius, coef)
        }
    }
}

/// Fundamental martingale polynomials `m_0..m_{n_max}` at `(t, x)`.
pub fn fmp_all(spec: &ProcessSpec, n_max: usize, t: f64, x: f64) -> Result<Vec<f64>> {
    ensure!(t >= 0.0, Domain, "martingale polynomials need t >= 0, got {t}");
    let mut m = Vec::with_capacity(n_max + 1);
    m.push(1.0);
    match spec.kind {
        ProcessKind::Bm => {
            if n_max >= 1 {
                m.push(x);
            }
            for k in 1..n_max {
                let next = x * m[k] - k as f64 * t * m[k - 1];
                m.push(next);
            }
        }
        ProcessKind::Besq => {
            ensure!(x >= 0.0, Domain, "BESQ martingale polynomials need x >= 0, got {x}");
            let nu = spec.nu;
            if n_max >= 1 {
                m.push(x - 2.0 * t * (1.0 + nu));
            }
            for k in 1..n_max {
                let kf = k as f64;
                let next = (x - 2.0 * t * (2.0 * kf + 1.0 + nu)) * m[k]
                    - 4.0 * t * t * kf * (kf + nu) * m[k - 1];
                m.push(next);
            }
        }
        ProcessKind::CircleBm => {
            return Err(Error::Unsupported(
                "the circle process uses the Fourier basis, not polynomial martingales".into(),
            ))
        }
    }
    Ok(m)
}

/// `m_n(t, x)`; `m_n(0, x) = x^n`.
pub fn fmp(spec: &ProcessSpec, n: usize, t: f64, x: f64) -> Result<f64> {
    Ok(fmp_all(spec, n, t, x)?[n])
}

/// Image `e^{inx/2r + n²t/8r²}` of `e^{inz/2r}` under the transform.
pub fn fourier_martingale(r: f64, n: i64, t: f64, x: f64) -> Complex64 {
    let nf = n as f64;
    Complex64::new(nf * nf * t / (8.0 * r * r), nf * x / (2.0 * r)).exp()
}

fn itransform_complex(spec: &ProcessSpec, f: &CoefficientExpansion, t: f64, x: f64) -> Result<(Complex64, f64)> {
    ensure!(t >= 0.0, Domain, "integral transform needs t >= 0, got {t}");
    let mut sum = ZERO;
    let mut scale = 0.0;
    match (spec.kind, f.basis) {
        (ProcessKind::Bm | ProcessKind::Besq, Basis::Monomial) => {
            let m = fmp_all(spec, f.coefficients.len() - 1, t, x)?;
            for (c, mn) in f.coefficients.iter().zip(&m) {
                let term = c * mn;
                scale += term.norm();
                sum += term;
            }
        }
        (ProcessKind::CircleBm, Basis::Fourier) => {
            ensure!(
                (f.radius - spec.radius).abs() <= 1e-14 * spec.radius,
                InvalidArgument,
                "expansion radius {} does not match process radius {}",
                f.radius,
                spec.radius
            );
            for (k, c) in f.coefficients.iter().enumerate() {
                if *c == ZERO {
                    continue;
                }
                let term = c * fourier_martingale(spec.radius, f.power(k), t, x);
                scale += term.norm();
                sum += term;
            }
        }
        (kind, basis) => {
            return Err(Error::InvalidArgument(format!(
                "{basis:?} expansion does not match process {}",
                kind.name()
            )))
        }
    }
    Ok((sum, scale))
}

fn real_part_checked(sum: Complex64, scale: f64) -> Result<f64> {
    ensure!(
        sum.im.abs() <= IMAG_RESIDUE_TOL * scale.max(1.0),
        Numerical,
        "transform of a real function has imaginary part {} (scale {scale})",
        sum.im
    );
    Ok(sum.re)
}

/// `I[f(W) | (t, x)]` by the coefficient route; returns the real part after
/// checking that the imaginary residue is negligible.
pub fn itransform(spec: &ProcessSpec, f: &CoefficientExpansion, t: f64, x: f64) -> Result<f64> {
    let (sum, scale) = itransform_complex(spec, f, t, x)?;
    real_part_checked(sum, scale)
}

/// `I[f(W) | (t, x)]` by quadrature of a callable `f` (test oracle).
///
/// Line and circle: 128-node Gauss–Hermite for `E[f(x + iỸ)]`, `Ỹ ~ N(0, t)`.
/// Half line: adaptive Gauss–Kronrod of `f(-w) q^{(ν)}(t, w | x)` over
/// `[0, w_max]`, in the variable `w = u²`.
pub fn itransform_quad(spec: &ProcessSpec, f: impl Fn(Complex64) -> Complex64, t: f64, x: f64) -> Result<f64> {
    ensure!(t > 0.0, Domain, "quadrature transform needs t > 0 (use the coefficient route at t = 0)");
    match spec.kind {
        ProcessKind::Bm | ProcessKind::CircleBm => {
            let rule = gauss_hermite(128);
            let s = (2.0 * t).sqrt();
            let mut sum = ZERO;
            for (xi, w) in rule.nodes.iter().zip(&rule.weights) {
                sum += f(Complex64::new(x, s * xi)) * *w;
            }
            Ok(sum.re / PI.sqrt())
        }
        ProcessKind::Besq => {
            let nu = spec.nu;
            // tail of (w/2t)^d e^{-(w - x)/2t} below 1e-16, degree allowance d = 16 + ν
            let mut l: f64 = 40.0 + x.max(0.0) / (2.0 * t);
            for _ in 0..8 {
                l = x.max(0.0) / (2.0 * t) + 40.0 + (18.0 + nu) * l.max(1.0).ln();
            }
            let umax = (2.0 * t * l).sqrt();
            let mut failure = None;
            let est = Integrator::with_tol(1e-14, 1e-13).integrate(
                |u| {
                    let w = u * u;
                    match itransform_kernel_qnu(nu, t, w, x) {
                        Ok(q) => (f(Complex64::new(-w, 0.0)) * q).re * 2.0 * u,
                        Err(e) => {
                            failure = Some(e);
                            0.0
                        }
                    }
                },
                0.0,
                umax,
            );
            if let Some(e) = failure {
                return Err(e);
            }
            ensure!(est.converged, Numerical, "half-line transform quadrature did not converge");
            Ok(est.value)
        }
    }
}

/// Evaluator of `M_ξ^v`, built once per (process, configuration).
#[derive(Debug, Clone)]
pub struct MartingaleEvaluator {
    spec: ProcessSpec,
    config: Configuration,
    expansions: Option<Vec<CoefficientExpansion>>,
    // P(z) = Π(z - u_ℓ) (line, half line) or R(u) = Π(α_ℓ u - β_ℓ)/2i (circle), with multiplicity
    poly: Vec<Complex64>,
}

impl MartingaleEvaluator {
    pub fn new(spec: ProcessSpec, config: Configuration) -> Result<Self> {
        let pts = config.expand();
        match spec.kind {
            ProcessKind::Bm => {}
            ProcessKind::Besq => {
                ensure!(pts.iter().all(|&x| x >= 0.0), Domain, "BESQ configuration must lie in [0, inf)");
            }
            ProcessKind::CircleBm => {
                ensure!(
                    spec.particles == config.total(),
                    InvalidArgument,
                    "circle spec has N = {} but configuration has {} points",
                    spec.particles,
                    config.total()
                );
                let sup = config.support();
                ensure!(
                    in_alcove(spec.radius, sup),
                    Domain,
                    "circle configuration support must fit in one period"
                );
            }
        }
        let expansions = if config.is_simple() {
            Some(
                config
                    .support()
                    .iter()
                    .map(|&v| phi_expand(&spec, &config, v))
                    .collect::<Result<Vec<_>>>()?,
            )
        } else {
            None
        };
        let mut poly = vec![ONE];
        let i = Complex64::i();
        for &u in &pts {
            let (a, b) = match spec.kind {
                ProcessKind::CircleBm => {
                    let r2 = 2.0 * spec.radius;
                    ((-i * u / r2).exp() / (2.0 * i), (i * u / r2).exp() / (2.0 * i))
                }
                _ => (ONE, Complex64::new(u, 0.0)),
            };
            let mut next = vec![ZERO; poly.len() + 1];
            for (j, c) in poly.iter().enumerate() {
                next[j + 1] += a * c;
                next[j] -= b * c;
            }
            poly = next;
        }
        Ok(MartingaleEvaluator { spec, config, expansions, poly })
    }

    pub fn spec(&self) -> &ProcessSpec {
        &self.spec
    }

    pub fn config(&self) -> &Configuration {
        &self.config
    }

    /// Expansion of `Φ_ξ^{u_k}` (simple configurations only).
    pub fn expansion(&self, k: usize) -> Result<&CoefficientExpansion> {
        let ex = self
            .expansions
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("configuration has multiple points".into()))?;
        ex.get(k)
            .ok_or_else(|| Error::InvalidArgument(format!("support index {k} out of range")))
    }

    /// `M_ξ^{u_k}(t, x)` by support index.
    pub fn martingale_m_index(&self, k: usize, t: f64, x: f64) -> Result<f64> {
        itransform(&self.spec, self.expansion(k)?, t, x)
    }

    /// `M_ξ^v(t, x) = I[Φ_ξ^v(W) | (t, x)]`.
    pub fn martingale_m(&self, v: f64, t: f64, x: f64) -> Result<f64> {
        let k = support_index(&self.config, v)?;
        self.martingale_m_index(k, t, x)
    }

    /// `det[M_ξ^{u_k}(t, y_j)]`.
    pub fn det_martingale(&self, t: f64, y: &[f64]) -> Result<f64> {
        let n = self.config.total();
        ensure!(y.len() == n, InvalidArgument, "need {n} positions, got {}", y.len());
        require_simple(&self.config)?;
        let mut m = vec![0.0; n * n];
        for (j, &yj) in y.iter().enumerate() {
            for k in 0..n {
                m[j * n + k] = self.martingale_m_index(k, t, yj)?;
            }
        }
        Ok(linalg::det(n, &m))
    }

    fn contour_radius(&self, k: usize) -> f64 {
        let sup = self.config.support();
        let v = sup[k];
        let mut gap = f64::INFINITY;
        for (l, &u) in sup.iter().enumerate() {
            if l != k {
                let mut d = (u - v).abs();
                if self.spec.kind == ProcessKind::CircleBm {
                    d = d.min(self.spec.period() - d);
                }
                gap = gap.min(d);
            }
        }
        if self.spec.kind == ProcessKind::CircleBm {
            gap = gap.min(self.spec.period());
        }
        0.5 * gap.min(1.0)
    }

    // unnormalized p(s, x | ζ) for complex ζ
    fn start_density(&self, s: f64, x: f64, zeta: Complex64) -> Result<Complex64> {
        match self.spec.kind {
            ProcessKind::Bm => {
                let d = Complex64::new(x, 0.0) - zeta;
                Ok((-(d * d) / (2.0 * s)).exp() / (2.0 * PI * s).sqrt())
            }
            ProcessKind::Besq => besq_density_complex_start(self.spec.nu, s, x, zeta),
            ProcessKind::CircleBm => td_circle_complex(&self.spec, s, x, zeta),
        }
    }

    /// Expansion of `p(s, x | v) Φ_ξ^v((s, x); z)` from the contour residue.
    pub fn multipoint_expansion(&self, v: f64, s: f64, x: f64) -> Result<CoefficientExpansion> {
        Ok(self.multipoint_expansion_bounded(v, s, x)?.0)
    }

    /// Expansion plus, per coefficient, the sum of absolute contour
    /// contributions; rounding error in a coefficient is ~ε times its bound.
    fn multipoint_expansion_bounded(&self, v: f64, s: f64, x: f64) -> Result<(CoefficientExpansion, Vec<f64>)> {
        ensure!(s > 0.0, Domain, "multiple-point martingale needs s > 0, got {s}");
        let k = support_index(&self.config, v)?;
        let v = self.config.support()[k];
        let n = self.config.total();
        let rho = self.contour_radius(k);
        let i = Complex64::i();
        let mut acc = vec![ZERO; n];
        let mut bound = vec![0.0; n];
        let mut d = vec![ZERO; n];
        for node in 0..RESIDUE_NODES {
            let e = (i * (2.0 * PI * node as f64 / RESIDUE_NODES as f64)).exp();
            let zeta = v + rho * e;
            let weight = rho * e / RESIDUE_NODES as f64;
            let h = self.start_density(s, x, zeta)?;
            match self.spec.kind {
                ProcessKind::Bm | ProcessKind::Besq => {
                    // c_j(ζ) = Σ_{k>j} p_k ζ^{k-1-j}
                    let p_at: Complex64 = self.poly.iter().rev().fold(ZERO, |a, c| a * zeta + c);
                    d[n - 1] = self.poly[n];
                    for j in (0..n - 1).rev() {
                        d[j] = self.poly[j + 1] + zeta * d[j + 1];
                    }
                    let f = weight * h / p_at;
                    for j in 0..n {
                        acc[j] += f * d[j];
                        bound[j] += (f * d[j]).norm();
                    }
                }
                ProcessKind::CircleBm => {
                    let r = self.spec.radius;
                    let omega = (i * zeta / (2.0 * r)).exp();
                    let mu = omega * omega;
                    let s_at: Complex64 = self
                        .config
                        .expand()
                        .iter()
                        .map(|&u| ((zeta - u) / (2.0 * r)).sin())
                        .product();
                    d[n - 1] = self.poly[n];
                    for j in (0..n - 1).rev() {
                        d[j] = self.poly[j + 1] + mu * d[j + 1];
                    }
                    let f = weight * h * (i / r) * omega / s_at;
                    for j in 0..n {
                        acc[j] += f * d[j];
                        bound[j] += (f * d[j]).norm();
                    }
                }
            }
        }
        let ex = match self.spec.kind {
            ProcessKind::CircleBm => {
                let mut coef = vec![ZERO; 2 * n - 1];
                let mut b = vec![0.0; 2 * n - 1];
                for (j, a) in acc.into_iter().enumerate() {
                    coef[2 * j] = a;
                    b[2 * j] = bound[j];
                }
                bound = b;
                CoefficientExpansion::fourier(self.spec.radius, coef)?
            }
            _ => CoefficientExpansion::monomial(acc)?,
        };
        Ok((ex, bound))
    }

    /// `p(s, x | v) M_ξ^v((s, x) | (t, y))`, the summand of the multiple-point kernel.
    pub fn multipoint_weighted(&self, v: f64, s: f64, x: f64, t: f64, y: f64) -> Result<f64> {
        let (ex, bound) = self.multipoint_expansion_bounded(v, s, x)?;
        let (sum, _) = itransform_complex(&self.spec, &ex, t, y)?;
        // rounding in the contour sums, propagated through the transform
        let mut bex = ex.clone();
        for (c, b) in bex.coefficients.iter_mut().zip(&bound) {
            *c = Complex64::new(*b, 0.0);
        }
        let (_, scale) = itransform_complex(&self.spec, &bex, t, y)?;
        ensure!(
            sum.im.abs() <= 1e-8 * scale + 1e-300,
            Numerical,
            "multiple-point martingale has imaginary part {} (scale {scale})",
            sum.im
        );
        Ok(sum.re)
    }

    /// `M_ξ^v((s, x) | (t, y))` for general `ξ`.
    pub fn multipoint_m(&self, v: f64, s: f64, x: f64, t: f64, y: f64) -> Result<f64> {
        let k = support_index(&self.config, v)?;
        let v = self.config.support()[k];
        let w = self.multipoint_weighted(v, s, x, t, y)?;
        let p = self.spec.density(s, x, v)?;
        ensure!(p != 0.0, Numerical, "p(s, x | v) vanishes; use multipoint_weighted");
        Ok(w / p)
    }
}

/// `Σ_k u^k/(k! Γ(k+ν+1))` for complex `u`.
fn modified_series_complex(nu: f64, u: Complex64) -> Result<Complex64> {
    ensure!(u.norm() < 1e5, Numerical, "series argument {u} too large");
    let mut term = Complex64::new((-ln_gamma(nu + 1.0)).exp(), 0.0);
    let mut sum = term;
    let mut peak = term.norm();
    for k in 1..100_000 {
        let kf = k as f64;
        term *= u / (kf * (kf + nu));
        sum += term;
        peak = peak.max(term.norm());
        if term.norm() <= 1e-17 * sum.norm().max(1e-300) && kf * kf > u.norm() {
            break;
        }
    }
    let _ = peak;
    Ok(sum)
}

/// `p^{(ν)}(s, x | ζ)` continued to complex starting points; entire in `ζ`.
fn besq_density_complex_start(nu: f64, s: f64, x: f64, zeta: Complex64) -> Result<Complex64> {
    ensure!(x >= 0.0, Domain, "BESQ density needs x >= 0");
    let lead = if x == 0.0 {
        if nu == 0.0 {
            1.0
        } else if nu > 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (nu * (x / (2.0 * s)).ln()).exp()
    };
    let e = (-(zeta + x) / (2.0 * s)).exp();
    Ok(lead * e * modified_series_complex(nu, zeta * (x / (4.0 * s * s)))? / (2.0 * s))
}

/// Closed series for `M_{Nδ0}^0((s, x) | (t, y))`.
///
/// Line: `Σ_{n<N} m_n(s,x) m_n(t,y)/(n! s^n)`, evaluated through the
/// normalized Hermite functions. Half line:
/// `Γ(ν+1) Σ_{n<N} m_n(s,x) m_n(t,y)/(n! Γ(n+ν+1) (2s)^{2n})`, evaluated
/// through the normalized Laguerre functions at `x/2s`, `y/2t`.
pub fn m_ndelta0(spec: &ProcessSpec, n: usize, s: f64, x: f64, t: f64, y: f64) -> Result<f64> {
    ensure!(s > 0.0, Domain, "needs s > 0, got {s}");
    ensure!(t >= 0.0, Domain, "needs t >= 0, got {t}");
    ensure!(n >= 1, InvalidArgument, "needs N >= 1");
    match spec.kind {
        ProcessKind::Bm => {
            if t == 0.0 || x * x / (4.0 * s) + y * y / (4.0 * t) > 600.0 {
                return m_ndelta0_unnormalized(spec, n, s, x, t, y);
            }
            let a = x / (2.0 * s).sqrt();
            let b = y / (2.0 * t).sqrt();
            let ratio = (t / s).sqrt();
            let mut sum = 0.0;
            let mut w = 1.0;
            for (fa, fb) in HermiteFunctions::new(a).zip(HermiteFunctions::new(b)).take(n) {
                sum += w * fa * fb;
                w *= ratio;
            }
            Ok(PI.sqrt() * (x * x / (4.0 * s) + y * y / (4.0 * t)).exp() * sum)
        }
        ProcessKind::Besq => {
            ensure!(x >= 0.0 && y >= 0.0, Domain, "BESQ positions must be >= 0");
            let a = x / (2.0 * s);
            let b = if t > 0.0 { y / (2.0 * t) } else { 0.0 };
            if t == 0.0 || a == 0.0 || b == 0.0 || (a + b) / 2.0 > 600.0 {
                return m_ndelta0_unnormalized(spec, n, s, x, t, y);
            }
            let nu = spec.nu;
            let ratio = t / s;
            let mut sum = 0.0;
            let mut w = 1.0;
            for (fa, fb) in LaguerreFunctions::new(nu, a)?.zip(LaguerreFunctions::new(nu, b)?).take(n) {
                sum += w * fa * fb;
                w *= ratio;
            }
            let pre = (ln_gamma(nu + 1.0) - 0.5 * nu * (a * b).ln() + 0.5 * (a + b)).exp();
            Ok(pre * sum)
        }
        ProcessKind::CircleBm => Err(Error::Unsupported(
            "closed N-delta series exist for the line and half line only".into(),
        )),
    }
}

/// Unnormalized form of [`m_ndelta0`]: the finite sum of products of martingale polynomials.
pub fn m_ndelta0_unnormalized(spec: &ProcessSpec, n: usize, s: f64, x: f64, t: f64, y: f64) -> Result<f64> {
    ensure!(s > 0.0, Domain, "needs s > 0, got {s}");
    let ms = fmp_all(spec, n - 1, s, x)?;
    let mt = fmp_all(spec, n - 1, t, y)?;
    let mut sum = 0.0;
    for k in 0..n {
        let kf = k as f64;
        let w = match spec.kind {
            ProcessKind::Bm => (-ln_gamma(kf + 1.0) - kf * s.ln()).exp(),
            ProcessKind::Besq => (ln_gamma(spec.nu + 1.0)
                - ln_gamma(kf + 1.0)
                - ln_gamma(kf + spec.nu + 1.0)
                - 2.0 * kf * (2.0 * s).ln())
            .exp(),
            ProcessKind::CircleBm => return Err(Error::Unsupported("no closed series on the circle".into())),
        };
        sum += w * ms[k] * mt[k];
    }
    Ok(sum)
}

/// Which side of the determinant identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum IdentityKind {
    /// `det[Π_{ℓ≠k}(x_j-u_ℓ)/(u_k-u_ℓ)] = h(x)/h(u)`.
    Rational,
    /// `det[Π_{ℓ≠k} sin((x_j-u_ℓ)/2r)/sin((u_k-u_ℓ)/2r)] = Π_{j<k} sin((x_k-x_j)/2r)/sin((u_k-u_j)/2r)`.
    Trigonometric { r: f64 },
}

/// Both sides `(lhs, rhs)` of the Lagrange-determinant identity.
pub fn det_identity_check(kind: IdentityKind, x: &[f64], u: &[f64]) -> Result<(f64, f64)> {
    let n = u.len();
    ensure!(x.len() == n && n >= 1, InvalidArgument, "x and u must have the same nonzero length");
    let (spec, rhs) = match kind {
        IdentityKind::Rational => {
            ensure!(in_weyl_chamber(u), Domain, "u must be strictly increasing");
            (ProcessSpec::bm(), vandermonde(x) / vandermonde(u))
        }
        IdentityKind::Trigonometric { r } => {
            ensure!(in_alcove(r, u), Domain, "u must lie in the alcove");
            let mut p = 1.0;
            for k in 0..n {
                for j in 0..k {
                    p *= ((x[k] - x[j]) / (2.0 * r)).sin() / ((u[k] - u[j]) / (2.0 * r)).sin();
                }
            }
            (ProcessSpec::circle(r, n)?, p)
        }
    };
    let config = Configuration::simple(u)?;
    let mut m = vec![0.0; n * n];
    for j in 0..n {
        for k in 0..n {
            m[j * n + k] = phi(&spec, &config, u[k], Complex64::new(x[j], 0.0))?.re;
        }
    }
    Ok((linalg::det(n, &m), rhs))
}

/// `Q_t^{(n+1/2)}(x + iy)`; `Q ≡ 1` for `n = -1` or `t = 0`.
pub fn cpr_q(n: i64, t: f64, x: f64, y: f64) -> Result<Complex64> {
    ensure!(n >= -1, InvalidArgument, "prefactor index must be >= -1, got {n}");
    ensure!(t >= 0.0, Domain, "needs t >= 0, got {t}");
    ensure!(x >= 0.0, Domain, "needs x >= 0, got {x}");
    if n == -1 || t == 0.0 {
        return Ok(ONE);
    }
    let nn = n as usize;
    if x == 0.0 {
        let c = PI.sqrt() / (2f64.powi(n as i32 + 1) * t.powi(n as i32 + 1) * gammafn(n as f64 + 1.5)?);
        return Ok(Complex64::new(c * y.powi(2 * n as i32 + 2), 0.0));
    }
    let z = Complex64::new(x, y);
    let g = z * (2.0 * x / t);
    let mut sum = ZERO;
    let mut gk = ONE;
    for k in 0..=nn {
        let c = (ln_gamma((2 * nn - k) as f64 + 1.0)
            - ln_gamma((nn - k) as f64 + 1.0)
            - ln_gamma(k as f64 + 1.0))
        .exp();
        sum += gk * c;
        gk *= g;
    }
    Ok(sum * z * (t / 2.0).powi(n as i32) / x.powi(2 * n as i32 + 1))
}

fn phi_hat(u: &[f64], k: usize, z: Complex64) -> Complex64 {
    let uk2 = u[k] * u[k];
    u.iter()
        .enumerate()
        .filter(|&(l, _)| l != k)
        .map(|(_, &ul)| (z * z - ul * ul) / (uk2 - ul * ul))
        .product()
}

/// Monte Carlo estimate of `E[Q_t(x + iỸ) Φ̂(x + iỸ)]`, `Ỹ ~ N(0, t)`, for the
/// Bessel process of index `n + 1/2` started from the `k`-th support point.
pub fn cpr_martingale_mc(
    n: i64,
    config: &Configuration,
    k: usize,
    t: f64,
    x: f64,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    require_simple(config)?;
    ensure!(samples >= 100, InvalidArgument, "needs at least 100 samples, got {samples}");
    ensure!(k < config.total(), InvalidArgument, "support index {k} out of range");
    let u = config.support();
    ensure!(u.iter().all(|&v| v >= 0.0), Domain, "configuration must lie in [0, inf)");
    let sq: Vec<f64> = u.iter().map(|v| v * v).collect();
    ensure!(in_weyl_chamber(&sq), Domain, "squared support points must be distinct");
    cpr_q(n, t, x, 0.0)?;
    if t == 0.0 {
        let v = phi_hat(u, k, Complex64::new(x, 0.0)).re;
        return Ok(McEstimate { mean: v, stderr: 0.0, samples });
    }
    const CHUNK: usize = 4096;
    let chunks = samples.div_ceil(CHUNK);
    let sd = t.sqrt();
    let parts: Vec<Result<Accumulator>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64, 0);
            let mut acc = Accumulator::default();
            let len = CHUNK.min(samples - c * CHUNK);
            for _ in 0..len {
                let g: f64 = StandardNormal.sample(&mut rng);
                let y = sd * g;
                let z = Complex64::new(x, y);
                acc.push((cpr_q(n, t, x, y)? * phi_hat(u, k, z)).re);
            }
            Ok(acc)
        })
        .collect();
    let mut total = Accumulator::default();
    for p in parts {
        total = total.merge(p?);
    }
    Ok(total.estimate())
}

/// Deterministic value of the CPR martingale: the BESQ(`n + 1/2`) martingale
/// for the squared support, evaluated at `x²`.
pub fn cpr_reference(n: i64, config: &Configuration, k: usize, t: f64, x: f64) -> Result<f64> {
    ensure!(n >= -1, InvalidArgument, "prefactor index must be >= -1, got {n}");
    let sq: Vec<f64> = config.support().iter().map(|v| v * v).collect();
    let spec = ProcessSpec::besq(n as f64 + 0.5)?;
    let ev = MartingaleEvaluator::new(spec, Configuration::simple(&sq)?)?;
    ev.martingale_m_index(k, t, x * x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn phi_examples() {
        let spec = ProcessSpec::bm();
        let cfg = Configuration::simple(&[-1.0, 1.0]).unwrap();
        assert_relative_eq!(phi(&spec, &cfg, 1.0, c(0.0)).unwrap().re, 0.5);
        assert_relative_eq!(phi(&spec, &cfg, 1.0, c(-1.0)).unwrap().re, 0.0);
        let one = Configuration::simple(&[0.3]).unwrap();
        assert_eq!(phi(&spec, &one, 0.3, Complex64::new(2.0, 1.0)).unwrap(), ONE);
        assert!(phi(&spec, &cfg, 0.5, c(0.0)).is_err());
        let multi = Configuration::concentrated(0.0, 2).unwrap();
        assert!(phi(&spec, &multi, 0.0, c(0.0)).is_err());
    }

    #[test]
    fn expansion_reconstructs_phi() {
        let cfg = Configuration::simple(&[0.2, 1.1, 2.0, 4.0]).unwrap();
        for spec in [ProcessSpec::bm(), ProcessSpec::circle(1.0, 4).unwrap()] {
            for &v in cfg.support() {
                let ex = phi_expand(&spec, &cfg, v).unwrap();
                for z in [Complex64::new(0.3, 0.2), Complex64::new(-1.0, 0.7), Complex64::new(3.3, -0.4)] {
                    let a = ex.eval(z);
                    let b = phi(&spec, &cfg, v, z).unwrap();
                    assert!((a - b).norm() < 1e-12 * b.norm().max(1.0));
                }
            }
        }
    }

    #[test]
    fn fmp_examples() {
        let bm = ProcessSpec::bm();
        assert_relative_eq!(fmp(&bm, 5, 0.0, 1.3).unwrap(), 1.3f64.powi(5), max_relative = 1e-14);
        assert_relative_eq!(fmp(&bm, 2, 0.7, 0.0).unwrap(), -0.7);
        let besq = ProcessSpec::besq(0.0).unwrap();
        assert_relative_eq!(fmp(&besq, 1, 0.4, 2.0).unwrap(), 2.0 - 0.8);
        assert!(fmp(&besq, 1, 0.4, -1.0).is_err());
    }

    #[test]
    fn fourier_transform_closed_form() {
        let spec = ProcessSpec::circle(1.5, 3).unwrap();
        let r = 1.5;
        let (t, x) = (0.6, 0.9);
        let q = itransform_quad(&spec, |z| (Complex64::i() * z / (2.0 * r)).exp(), t, x).unwrap();
        let want = (x / (2.0 * r)).cos() * (t / (8.0 * r * r)).exp();
        assert!((q - want).abs() < 1e-10);
    }

    #[test]
    fn constant_maps_to_one() {
        let f = CoefficientExpansion::monomial(vec![ONE]).unwrap();
        for spec in [ProcessSpec::bm(), ProcessSpec::besq(0.5).unwrap()] {
            assert_eq!(itransform(&spec, &f, 0.8, 1.2).unwrap(), 1.0);
            assert!((itransform_quad(&spec, |_| ONE, 0.8, 1.2).unwrap() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn m3_at_time_zero() {
        let spec = ProcessSpec::bm();
        let cfg = Configuration::simple(&[-1.0, 0.5, 2.0]).unwrap();
        let ev = MartingaleEvaluator::new(spec, cfg.clone()).unwrap();
        for (k, &uk) in cfg.support().iter().enumerate() {
            for (j, &uj) in cfg.support().iter().enumerate() {
                let m = ev.martingale_m(uk, 0.0, uj).unwrap();
                let want = if j == k { 1.0 } else { 0.0 };
                assert!((m - want).abs() < 1e-13);
            }
        }
        assert!((ev.det_martingale(0.0, cfg.support()).unwrap() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn equidistant_circle_martingale() {
        let (r, n) = (1.2, 4usize);
        let spec = ProcessSpec::circle(r, n).unwrap();
        let cfg = crate::configspace::equidistant_config(r, n).unwrap();
        let ev = MartingaleEvaluator::new(spec, cfg.clone()).unwrap();
        let (t, y) = (0.35, 1.7);
        for k in 0..n {
            let mut want = Complex64::new(0.0, 0.0);
            for m in -(n as i64)..=(n as i64) {
                let sg = crate::transition::sigma_n(n, m);
                if sg.abs() <= (n as f64 - 1.0) / 2.0 {
                    want += Complex64::new(
                        sg * sg * t / (2.0 * r * r),
                        -sg * y / r + 2.0 * k as f64 * sg * PI / n as f64,
                    )
                    .exp();
                }
            }
            let want = want.re / n as f64;
            let got = ev.martingale_m_index(k, t, y).unwrap();
            assert!((got - want).abs() < 1e-10, "k={k}: {got} vs {want}");
        }
    }

    #[test]
    fn ndelta0_examples() {
        let bm = ProcessSpec::bm();
        assert!((m_ndelta0(&bm, 1, 0.4, 0.7, 0.9, -0.3).unwrap() - 1.0).abs() < 1e-14);
        // at s = 2 the weight 1/(n! s^n) coincides with 1/(n! 2^n)
        let (x, t, y) = (0.7, 0.9, -0.3);
        let ms = fmp_all(&bm, 4, 2.0, x).unwrap();
        let mt = fmp_all(&bm, 4, t, y).unwrap();
        let direct: f64 = (0..5).map(|n| ms[n] * mt[n] / ((1..=n).product::<usize>() as f64 * 2f64.powi(n as i32))).sum();
        assert!((m_ndelta0(&bm, 5, 2.0, x, t, y).unwrap() - direct).abs() < 1e-12);
        for n in [2, 4, 7] {
            let a = m_ndelta0(&bm, n, 0.4, 0.7, 0.9, -0.3).unwrap();
            let b = m_ndelta0_unnormalized(&bm, n, 0.4, 0.7, 0.9, -0.3).unwrap();
            assert!((a - b).abs() < 1e-10 * b.abs().max(1.0));
        }
        let besq = ProcessSpec::besq(0.7).unwrap();
        for n in [1, 3, 6] {
            let a = m_ndelta0(&besq, n, 0.4, 0.7, 0.9, 1.3).unwrap();
            let b = m_ndelta0_unnormalized(&besq, n, 0.4, 0.7, 0.9, 1.3).unwrap();
            assert!((a - b).abs() < 1e-10 * b.abs().max(1.0), "{a} {b}");
        }
        assert!(m_ndelta0(&bm, 2, 0.0, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn det_identity_examples() {
        let (l, r) = det_identity_check(IdentityKind::Rational, &[0.0, 2.0], &[-1.0, 1.0]).unwrap();
        assert_relative_eq!(l, 1.0, max_relative = 1e-14);
        assert_relative_eq!(r, 1.0, max_relative = 1e-14);
        let (l, r) = det_identity_check(IdentityKind::Rational, &[0.4], &[3.0]).unwrap();
        assert_eq!((l, r), (1.0, 1.0));
    }

    #[test]
    fn cpr_examples() {
        let q = cpr_q(0, 0.7, 1.3, 0.4).unwrap();
        assert!((q - Complex64::new(1.3, 0.4) / 1.3).norm() < 1e-15);
        assert_eq!(cpr_q(-1, 0.7, 1.3, 0.4).unwrap(), ONE);
        assert_eq!(cpr_q(2, 0.0, 1.3, 0.4).unwrap(), ONE);
        let q1 = cpr_q(1, 0.5, 0.8, -0.3).unwrap();
        let z = Complex64::new(0.8, -0.3);
        let want = z * 0.5 / 0.8f64.powi(3) + z * z / 0.64;
        assert!((q1 - want).norm() < 1e-14);
        // E[Q] = 1 at x = 0 (normalization of the half-line kernel)
        for n in 0..3 {
            let t = 0.6;
            let rule = gauss_hermite(64);
            let mut e = 0.0;
            for (xi, w) in rule.nodes.iter().zip(&rule.weights) {
                e += w * cpr_q(n, t, 0.0, (2.0 * t).sqrt() * xi).unwrap().re;
            }
            assert!((e / PI.sqrt() - 1.0).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn cpr_trivial_cases() {
        let cfg = Configuration::simple(&[1.0]).unwrap();
        let e = cpr_martingale_mc(-1, &cfg, 0, 0.5, 1.0, 1000, 3).unwrap();
        assert_eq!(e.mean, 1.0);
        let cfg = Configuration::simple(&[0.5, 1.5]).unwrap();
        let e = cpr_martingale_mc(0, &cfg, 1, 0.0, 1.2, 1000, 3).unwrap();
        assert_relative_eq!(e.mean, (1.44 - 0.25) / (2.25 - 0.25), max_relative = 1e-14);
        assert!(cpr_martingale_mc(0, &cfg, 1, 0.3, 1.2, 99, 3).is_err());
    }

    #[test]
    fn coefficient_route_matches_quadrature() {
        let cfg = Configuration::simple(&[0.3, 1.0, 2.2]).unwrap();
        let cases = [
            (ProcessSpec::bm(), 0.7, -0.4),
            (ProcessSpec::besq(0.5).unwrap(), 0.6, 1.3),
            (ProcessSpec::besq(-0.5).unwrap(), 0.4, 0.8),
            (ProcessSpec::circle(1.0, 3).unwrap(), 0.5, 2.0),
        ];
        for (spec, t, x) in cases {
            let ev = MartingaleEvaluator::new(spec, cfg.clone()).unwrap();
            for (k, &v) in cfg.support().iter().enumerate() {
                let a = ev.martingale_m_index(k, t, x).unwrap();
                let b = itransform_quad(&spec, |z| phi(&spec, &cfg, v, z).unwrap(), t, x).unwrap();
                assert!((a - b).abs() < 1e-8 * a.abs().max(1.0), "{:?} k={k}: {a} vs {b}", spec.kind);
            }
        }
    }

    #[test]
    fn residue_reduces_to_simple_martingale() {
        let cfg = Configuration::simple(&[-0.8, 0.1, 1.4]).unwrap();
        for spec in [ProcessSpec::bm(), ProcessSpec::circle(1.0, 3).unwrap()] {
            let ev = MartingaleEvaluator::new(spec, cfg.clone()).unwrap();
            let (s, x, t, y) = (0.5, 0.3, 0.4, -0.2);
            for &v in cfg.support() {
                let a = ev.multipoint_m(v, s, x, t, y).unwrap();
                let b = ev.martingale_m(v, t, y).unwrap();
                assert!((a - b).abs() < 1e-10 * b.abs().max(1.0), "{a} vs {b}");
            }
        }
        let besq = ProcessSpec::besq(0.3).unwrap();
        let cfg = Configuration::simple(&[0.2, 1.0, 2.5]).unwrap();
        let ev = MartingaleEvaluator::new(besq, cfg.clone()).unwrap();
        for &v in cfg.support() {
            let a = ev.multipoint_m(v, 0.6, 0.9, 0.3, 0.7).unwrap();
            let b = ev.martingale_m(v, 0.3, 0.7).unwrap();
            assert!((a - b).abs() < 1e-10 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn residue_matches_closed_series() {
        for (spec, x, y) in [
            (ProcessSpec::bm(), 0.4, -0.6),
            (ProcessSpec::besq(0.5).unwrap(), 0.4, 0.9),
            (ProcessSpec::besq(1.0).unwrap(), 1.2, 0.3),
        ] {
            for n in [2usize, 4] {
                let ev = MartingaleEvaluator::new(spec, Configuration::concentrated(0.0, n).unwrap()).unwrap();
                let (s, t) = (0.5, 0.8);
                let a = ev.multipoint_m(0.0, s, x, t, y).unwrap();
                let b = m_ndelta0(&spec, n, s, x, t, y).unwrap();
                assert!((a - b).abs() < 1e-9 * b.abs().max(1.0), "{:?} N={n}: {a} vs {b}", spec.kind);
            }
        }
    }

    #[test]
    fn ndelta0_expectation_is_one() {
        use crate::quadrature::integrate;
        let bm = ProcessSpec::bm();
        let (s, x, t) = (0.5, 0.7, 0.9);
        let e = integrate(
            |y| m_ndelta0(&bm, 4, s, x, t, y).unwrap() * crate::transition::td_bm(t, y, 0.0).unwrap(),
            -20.0,
            20.0,
            1e-13,
        );
        assert!((e.value - 1.0).abs() < 1e-8);
        let besq = ProcessSpec::besq(0.5).unwrap();
        let e = integrate(
            |y| m_ndelta0(&besq, 3, s, x, t, y).unwrap() * besq.density(t, y, 0.0).unwrap(),
            0.0,
            120.0,
            1e-13,
        );
        assert!((e.value - 1.0).abs() < 1e-8, "{}", e.value);
    }

    #[test]
    fn cpr_monte_carlo_matches_reference() {
        let cfg = Configuration::simple(&[0.5, 1.2, 2.0]).unwrap();
        for n in [-1i64, 0, 1, 2] {
            for k in 0..3 {
                let (t, x) = (0.3, 0.9);
                let mc = cpr_martingale_mc(n, &cfg, k, t, x, 200_000, 11).unwrap();
                let reference = cpr_reference(n, &cfg, k, t, x).unwrap();
                assert!(
                    (mc.mean - reference).abs() < 4.0 * mc.stderr.max(1e-12),
                    "n={n} k={k}: {} ± {} vs {reference}",
                    mc.mean,
                    mc.stderr
                );
            }
        }
    }

    #[test]
    fn circle_requires_full_configuration() {
        let spec = ProcessSpec::circle(1.0, 3).unwrap();
        assert!(MartingaleEvaluator::new(spec, Configuration::simple(&[0.0, 1.0]).unwrap()).is_err());
        assert!(MartingaleEvaluator::new(spec, Configuration::simple(&[0.0, 1.0, 7.0]).unwrap()).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn jittered_grid(jitter: &[f64], start: f64, len: f64) -> Vec<f64> {
            let h = len / jitter.len() as f64;
            jitter.iter().enumerate().map(|(k, j)| start + (k as f64 + 0.5 + j) * h).collect()
        }

        fn separated(v: Vec<f64>, gap: f64) -> Option<Vec<f64>> {
            let mut v = v;
            v.sort_by(f64::total_cmp);
            v.windows(2).all(|w| w[1] - w[0] > gap).then_some(v)
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn rational_identity(ju in prop::collection::vec(-0.3f64..0.3, 1..=6), jx in prop::collection::vec(-0.3f64..0.3, 6)) {
                let n = ju.len();
                let (u, x) = (jittered_grid(&ju, -3.0, 6.0), jittered_grid(&jx[..n], -3.0, 6.0));
                let (l, r) = det_identity_check(IdentityKind::Rational, &x, &u).unwrap();
                prop_assert!((l - r).abs() <= 1e-11 * r.abs());
            }

            #[test]
            fn trig_identity(ju in prop::collection::vec(-0.3f64..0.3, 1..=6), jx in prop::collection::vec(-0.3f64..0.3, 6), shift in -4.0f64..4.0) {
                let n = ju.len();
                let r = 1.3;
                let u = jittered_grid(&ju, 0.0, 2.0 * PI * r);
                let x = jittered_grid(&jx[..n], shift, 2.0 * PI * r);
                let (l, rhs) = det_identity_check(IdentityKind::Trigonometric { r }, &x, &u).unwrap();
                prop_assert!((l - rhs).abs() <= 1e-11 * rhs.abs());
            }

            #[test]
            fn martingale_is_lagrange_at_time_zero(u in prop::collection::vec(-2.0f64..2.0, 4)) {
                let Some(u) = separated(u, 0.1) else { return Ok(()) };
                let ev = MartingaleEvaluator::new(ProcessSpec::bm(), Configuration::simple(&u).unwrap()).unwrap();
                for k in 0..4 {
                    for (j, &uj) in u.iter().enumerate() {
                        let m = ev.martingale_m_index(k, 0.0, uj).unwrap();
                        let want = if j == k { 1.0 } else { 0.0 };
                        prop_assert!((m - want).abs() < 1e-9);
                    }
                }
            }

            #[test]
            fn partition_of_unity(u in prop::collection::vec(0.0f64..3.0, 3), t in 0.0f64..2.0, x in 0.0f64..3.0) {
                // Σ_k Φ^{u_k} ≡ 1, so Σ_k M^{u_k} ≡ 1
                let Some(u) = separated(u, 0.1) else { return Ok(()) };
                for spec in [ProcessSpec::bm(), ProcessSpec::besq(0.5).unwrap()] {
                    let ev = MartingaleEvaluator::new(spec, Configuration::simple(&u).unwrap()).unwrap();
                    let total: f64 = (0..3).map(|k| ev.martingale_m_index(k, t, x).unwrap()).sum();
                    prop_assert!((total - 1.0).abs() < 1e-8);
                }
            }
        }
    }
}
