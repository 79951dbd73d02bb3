//! Transition densities of the one-particle processes underlying the three
//! interacting systems, the Karlin–McGregor determinant on the circle, and the
//! kernels `q`, `q^{(ν)}` of the integral transform.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::configspace::in_alcove;
use crate::error::{ensure, Result};
use crate::linalg;
use crate::specfun::{bessel_i_scaled, bessel_j, ln_gamma};

/// Which elementary one-particle process drives the system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProcessKind {
    /// Brownian motion on the real line (Dyson model).
    Bm,
    /// Squared Bessel process of index `ν` on `[0, ∞)`.
    Besq,
    /// Brownian motion on a circle of radius `r`, with sign structure fixed by the parity of `N`.
    CircleBm,
}

impl ProcessKind {
    pub fn name(self) -> &'static str {
        match self {
            ProcessKind::Bm => "dyson",
            ProcessKind::Besq => "besq",
            ProcessKind::CircleBm => "circle",
        }
    }
}

/// Elementary process specification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessSpec {
    pub kind: ProcessKind,
    /// BESQ index; 0 otherwise.
    pub nu: f64,
    /// Circle radius; 0 otherwise.
    pub radius: f64,
    /// Particle count, meaningful for the circle only (fixes parity).
    pub particles: usize,
}

impl ProcessSpec {
    pub fn bm() -> Self {
        ProcessSpec { kind: ProcessKind::Bm, nu: 0.0, radius: 0.0, particles: 0 }
    }

    pub fn besq(nu: f64) -> Result<Self> {
        ensure!(nu > -1.0 && nu.is_finite(), Domain, "BESQ index must exceed -1, got {nu}");
        Ok(ProcessSpec { kind: ProcessKind::Besq, nu, radius: 0.0, particles: 0 })
    }

    pub fn circle(radius: f64, particles: usize) -> Result<Self> {
        ensure!(radius > 0.0 && radius.is_finite(), Domain, "circle radius must be positive, got {radius}");
        ensure!(particles >= 1, Domain, "circle process needs N >= 1");
        Ok(ProcessSpec { kind: ProcessKind::CircleBm, nu: 0.0, radius, particles })
    }

    /// The circle density is a genuine probability density only for odd `N`.
    pub fn odd_parity(&self) -> bool {
        self.particles % 2 == 1
    }

    pub fn period(&self) -> f64 {
        2.0 * PI * self.radius
    }

    /// `p(t, y | x)` of the elementary process, `t > 0`.
    pub fn density(&self, t: f64, y: f64, x: f64) -> Result<f64> {
        match self.kind {
            ProcessKind::Bm => td_bm(t, y, x),
            ProcessKind::Besq => td_besq(self.nu, t, y, x),
            ProcessKind::CircleBm => td_circle(self, t, y, x, CircleMethod::Auto),
        }
    }

    /// Whether `x` lies in the state space.
    pub fn contains(&self, x: f64) -> bool {
        match self.kind {
            ProcessKind::Bm => x.is_finite(),
            ProcessKind::Besq => x >= 0.0 && x.is_finite(),
            ProcessKind::CircleBm => x.is_finite(),
        }
    }
}

/// A point `(t, x)` of space-time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    pub t: f64,
    pub x: f64,
}

impl SpaceTimePoint {
    pub fn new(t: f64, x: f64) -> Result<Self> {
        ensure!(t >= 0.0 && t.is_finite(), Domain, "time must be nonnegative, got {t}");
        ensure!(x.is_finite(), Domain, "position must be finite, got {x}");
        Ok(SpaceTimePoint { t, x })
    }
}

fn check_time(t: f64) -> Result<()> {
    ensure!(t > 0.0 && t.is_finite(), Domain, "transition density needs t > 0, got {t}");
    Ok(())
}

/// Gaussian kernel `p_BM(t, y | x)`.
pub fn td_bm(t: f64, y: f64, x: f64) -> Result<f64> {
    check_time(t)?;
    let d = y - x;
    Ok((-d * d / (2.0 * t)).exp() / (2.0 * PI * t).sqrt())
}

/// `Σ_k u^k / (k! Γ(k+ν+1))` for `u ≥ 0`.
fn modified_series(nu: f64, u: f64) -> f64 {
    let mut term = (-ln_gamma(nu + 1.0)).exp();
    let mut sum = term;
    for k in 1..10_000 {
        let kf = k as f64;
        term *= u / (kf * (kf + nu));
        sum += term;
        if term <= 1e-17 * sum {
            break;
        }
    }
    sum
}

/// `Σ_k (-u)^k / (k! Γ(k+ν+1))` for small `u ≥ 0`.
fn oscillating_series(nu: f64, u: f64) -> f64 {
    let mut term = (-ln_gamma(nu + 1.0)).exp();
    let mut sum = term;
    for k in 1..10_000 {
        let kf = k as f64;
        term *= -u / (kf * (kf + nu));
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

// (y/2t)^ν with the y = 0 conventions
fn scaled_power(nu: f64, y: f64, t: f64) -> f64 {
    if y == 0.0 {
        if nu == 0.0 {
            1.0
        } else if nu > 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (nu * (y / (2.0 * t)).ln()).exp()
    }
}

/// Squared Bessel transition density `p^{(ν)}(t, y | x)`.
///
/// Written as `(1/2t)(y/2t)^ν e^{-(x+y)/2t} Σ_k (xy/4t²)^k/(k!Γ(k+ν+1))` for
/// moderate `√(xy)/t`, which is continuous at `x = 0`, and through the
/// exponentially scaled `I_ν` otherwise.
pub fn td_besq(nu: f64, t: f64, y: f64, x: f64) -> Result<f64> {
    ensure!(nu > -1.0, Domain, "BESQ index must exceed -1, got {nu}");
    check_time(t)?;
    ensure!(y >= 0.0, Domain, "BESQ density needs y >= 0, got {y}");
    ensure!(x >= 0.0, Domain, "BESQ density needs x >= 0, got {x}");
    let z = (x * y).sqrt() / t;
    if z <= 30.0 {
        let pre = scaled_power(nu, y, t) * (-(x + y) / (2.0 * t)).exp() / (2.0 * t);
        return Ok(pre * modified_series(nu, 0.25 * z * z));
    }
    let d = x.sqrt() - y.sqrt();
    let ratio = (0.5 * nu * (y / x).ln()).exp();
    Ok(ratio * (-d * d / (2.0 * t)).exp() * bessel_i_scaled(nu, z)? / (2.0 * t))
}

/// Bessel-process transition density `p^{(ν)}(t, y² | x²) · 2y`.
pub fn td_bes(nu: f64, t: f64, y: f64, x: f64) -> Result<f64> {
    ensure!(y >= 0.0 && x >= 0.0, Domain, "BES density needs x, y >= 0");
    if y == 0.0 {
        check_time(t)?;
        // leading term 2 y^{2ν+1} e^{-x²/2t} / ((2t)^{ν+1} Γ(ν+1))
        let e = 2.0 * nu + 1.0;
        return Ok(if e > 0.0 {
            0.0
        } else if e == 0.0 {
            2.0 * (-x * x / (2.0 * t)).exp() / ((2.0 * t).powf(nu + 1.0) * ln_gamma(nu + 1.0).exp())
        } else {
            f64::INFINITY
        });
    }
    Ok(td_besq(nu, t, y * y, x * x)? * 2.0 * y)
}

/// `σ_N(m)`: `m` for odd `N`, `m - 1/2` for even `N`.
pub fn sigma_n(n: usize, m: i64) -> f64 {
    if n % 2 == 1 {
        m as f64
    } else {
        m as f64 - 0.5
    }
}

/// Series used for the circle density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CircleMethod {
    /// Sum of images with signs `(±1)^ℓ`.
    Wrapped,
    /// Fourier series over `σ_N(ℓ)`.
    Spectral,
    /// Wrapped when `t/r² < 1`, spectral otherwise.
    Auto,
}

/// Circle density `p^r(t, y | x)`; signed for even `N`.
///
/// Any real `y`, `x` are accepted: the density is `2πr`-periodic for odd `N`
/// and antiperiodic for even `N`.
pub fn td_circle(spec: &ProcessSpec, t: f64, y: f64, x: f64, method: CircleMethod) -> Result<f64> {
    check_time(t)?;
    ensure!(spec.radius > 0.0, Domain, "circle density needs r > 0");
    let r = spec.radius;
    let odd = spec.odd_parity();
    let use_wrapped = match method {
        CircleMethod::Wrapped => true,
        CircleMethod::Spectral => false,
        CircleMethod::Auto => t / (r * r) < 1.0,
    };
    if use_wrapped {
        Ok(wrapped_complex(r, odd, t, Complex64::new(y - x, 0.0)).re)
    } else {
        Ok(spectral_complex(r, odd, t, Complex64::new(y - x, 0.0)).re)
    }
}

/// Circle density evaluated at complex displacement `y - x`.
pub fn td_circle_complex(spec: &ProcessSpec, t: f64, y: f64, x: Complex64) -> Result<Complex64> {
    check_time(t)?;
    let r = spec.radius;
    let d = Complex64::new(y, 0.0) - x;
    if t / (r * r) < 1.0 {
        Ok(wrapped_complex(r, spec.odd_parity(), t, d))
    } else {
        Ok(spectral_complex(r, spec.odd_parity(), t, d))
    }
}

fn wrapped_complex(r: f64, odd: bool, t: f64, d: Complex64) -> Complex64 {
    let period = 2.0 * PI * r;
    let norm = 1.0 / (2.0 * PI * t).sqrt();
    let centre = (-d.re / period).round() as i64;
    let term = |l: i64| -> Complex64 {
        let z = d + period * l as f64;
        let g = (-(z * z) / (2.0 * t)).exp() * norm;
        if !odd && l.rem_euclid(2) == 1 {
            -g
        } else {
            g
        }
    };
    let mut sum = term(centre);
    for k in 1.. {
        let a = term(centre + k);
        let b = term(centre - k);
        sum += a + b;
        // past the centre the Gaussian factors decrease monotonically
        let gap = (period * (k as f64 - 0.5)).max(0.0);
        if (-(gap * gap) / (2.0 * t)).exp() * (1.0 + (d.im * d.im / (2.0 * t)).exp()) < 1e-17 || k > 100_000 {
            break;
        }
    }
    sum
}

fn spectral_complex(r: f64, odd: bool, t: f64, d: Complex64) -> Complex64 {
    let i = Complex64::i();
    let mut sum = Complex64::new(0.0, 0.0);
    let start = if odd {
        sum += 1.0;
        1
    } else {
        1
    };
    for m in start.. {
        let sigma = if odd { m as f64 } else { m as f64 - 0.5 };
        let damp = -sigma * sigma * t / (2.0 * r * r);
        let phase = i * sigma * d / r;
        // e^{iσd/r} + e^{-iσd/r}
        let pair = (phase + damp).exp() + (-phase + damp).exp();
        sum += pair;
        if damp.exp() * (sigma * d.im.abs() / r).exp() < 1e-17 || m > 10_000_000 {
            break;
        }
    }
    sum / (2.0 * PI * r)
}

/// `det[p^r(t, y_j | x_k)]` for `x`, `y` in the alcove `x_1 < ... < x_N < x_1 + 2πr`.
pub fn km_determinant(spec: &ProcessSpec, t: f64, y: &[f64], x: &[f64]) -> Result<f64> {
    ensure!(
        spec.kind == ProcessKind::CircleBm,
        InvalidArgument,
        "Karlin-McGregor determinant is defined here for the circle process"
    );
    ensure!(y.len() == x.len() && !x.is_empty(), InvalidArgument, "point vectors must have equal nonzero length");
    ensure!(in_alcove(spec.radius, y), Domain, "target point is outside the alcove");
    ensure!(in_alcove(spec.radius, x), Domain, "source point is outside the alcove");
    let n = x.len();
    let mut m = vec![0.0; n * n];
    for j in 0..n {
        for k in 0..n {
            m[j * n + k] = td_circle(spec, t, y[j], x[k], CircleMethod::Auto)?;
        }
    }
    Ok(linalg::det(n, &m))
}

/// `q(t, w | x) = e^{-(ix + w)²/2t} / √(2πt)`.
pub fn itransform_kernel_q(t: f64, w: f64, x: f64) -> Result<Complex64> {
    ensure!(t >= 0.0, Domain, "kernel q needs t >= 0, got {t}");
    ensure!(t > 0.0, Domain, "kernel q at t = 0 is a point mass; callers handle it");
    let z = Complex64::new(w, x);
    Ok((-(z * z) / (2.0 * t)).exp() / (2.0 * PI * t).sqrt())
}

/// `q^{(ν)}(t, w | x)`: the analytic continuation of `p^{(ν)}(t, w | ·)` to
/// `-x`; for `x ≤ 0` it equals `p^{(ν)}(t, w | |x|)`.
pub fn itransform_kernel_qnu(nu: f64, t: f64, w: f64, x: f64) -> Result<f64> {
    ensure!(nu > -1.0, Domain, "BESQ index must exceed -1, got {nu}");
    ensure!(t >= 0.0, Domain, "kernel q^(nu) needs t >= 0, got {t}");
    ensure!(t > 0.0, Domain, "kernel q^(nu) at t = 0 is a point mass; callers handle it");
    ensure!(w >= 0.0, Domain, "kernel q^(nu) needs w >= 0, got {w}");
    if x <= 0.0 {
        return td_besq(nu, t, w, -x);
    }
    let z = (x * w).sqrt() / t;
    if z <= 2.0 {
        let pre = scaled_power(nu, w, t) * ((x - w) / (2.0 * t)).exp() / (2.0 * t);
        return Ok(pre * oscillating_series(nu, 0.25 * z * z));
    }
    let ratio = (0.5 * nu * (w / x).ln()).exp();
    Ok(ratio * ((x - w) / (2.0 * t)).exp() / (2.0 * t) * bessel_j(nu, z)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;
    use approx::assert_relative_eq;

    #[test]
    fn bm_examples() {
        assert_relative_eq!(td_bm(1.0, 0.0, 0.0).unwrap(), 1.0 / (2.0 * PI).sqrt());
        assert_relative_eq!(td_bm(2.0, 1.0, 1.0).unwrap(), 1.0 / (4.0 * PI).sqrt());
        assert!(td_bm(0.0, 1.0, 1.0).is_err());
        let (t, x): (f64, f64) = (0.7, -1.3);
        let sd = t.sqrt();
        let e = integrate(|y| td_bm(t, y, x).unwrap(), x - 12.0 * sd, x + 12.0 * sd, 1e-13);
        assert!((e.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn besq_examples() {
        assert_relative_eq!(td_besq(0.0, 0.5, 0.1, 0.0).unwrap(), (-0.1f64).exp(), max_relative = 1e-14);
        let (nu, t, x) = (0.5, 0.3, 1.2);
        let e = integrate(|y| td_besq(nu, t, y, x).unwrap(), 0.0, 60.0, 1e-11);
        assert!((e.value - 1.0).abs() < 1e-8, "{}", e.value);
        for y in [0.01, 0.5, 2.0] {
            let a = td_besq(nu, t, y, 1e-8).unwrap();
            let b = td_besq(nu, t, y, 0.0).unwrap();
            assert!((a - b).abs() < 1e-6 * b.abs().max(1.0));
        }
        assert!(td_besq(0.5, 0.0, 1.0, 1.0).is_err());
        assert!(td_besq(0.5, 1.0, -1.0, 1.0).is_err());
        assert!(td_besq(0.5, 1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn besq_branches_agree() {
        // z = √(xy)/t straddling the series/scaled switch at 30
        let (nu, t): (f64, f64) = (1.7, 0.1);
        let y = 2.25;
        let x_lo = (29.999 * t).powi(2) / y;
        let x_hi = (30.001 * t).powi(2) / y;
        let a = td_besq(nu, t, y, x_lo).unwrap();
        let b = td_besq(nu, t, y, x_hi).unwrap();
        assert!((a - b).abs() < 1e-3 * a);
    }

    #[test]
    fn bes_reflected_bm() {
        let (t, x): (f64, f64) = (0.8, 0.6);
        for y in [0.0f64, 0.3, 1.1, 2.5] {
            let want = ((-(y - x) * (y - x) / (2.0 * t)).exp() + (-(y + x) * (y + x) / (2.0 * t)).exp())
                / (2.0 * PI * t).sqrt();
            assert_relative_eq!(td_bes(-0.5, t, y, x).unwrap(), want, max_relative = 1e-12, epsilon = 1e-300);
        }
        let e = integrate(|y| td_bes(1.3, 0.4, y, 0.9).unwrap(), 0.0, 12.0, 1e-12);
        assert!((e.value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(sigma_n(3, 2), 2.0);
        assert_eq!(sigma_n(4, 2), 1.5);
        assert_eq!(sigma_n(4, 0), -0.5);
    }

    #[test]
    fn circle_methods_agree() {
        for n in [3usize, 4] {
            let spec = ProcessSpec::circle(1.3, n).unwrap();
            for i in 0..10 {
                let d = -4.0 + 0.8 * i as f64;
                for j in 0..10 {
                    let t = 0.05 + 0.4 * j as f64;
                    let a = td_circle(&spec, t, d, 0.0, CircleMethod::Wrapped).unwrap();
                    let b = td_circle(&spec, t, d, 0.0, CircleMethod::Spectral).unwrap();
                    assert!((a - b).abs() < 1e-12, "n={n} d={d} t={t}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn circle_total_mass() {
        for (n, want) in [(3usize, 1.0), (4usize, 0.0)] {
            let spec = ProcessSpec::circle(1.0, n).unwrap();
            // one full period starting at the source point
            let e = integrate(|y| td_circle(&spec, 0.3, y, 1.0, CircleMethod::Auto).unwrap(), 1.0, 1.0 + 2.0 * PI, 1e-13);
            assert!((e.value - want).abs() < 1e-10, "n={n}: {}", e.value);
        }
    }

    #[test]
    fn km_examples() {
        let spec = ProcessSpec::circle(1.0, 1).unwrap();
        assert_relative_eq!(
            km_determinant(&spec, 0.4, &[1.0], &[2.0]).unwrap(),
            td_circle(&spec, 0.4, 1.0, 2.0, CircleMethod::Auto).unwrap()
        );
        let spec = ProcessSpec::circle(1.0, 3).unwrap();
        let (x, y) = ([0.1, 1.0, 4.0], [0.5, 2.0, 3.5]);
        let a = km_determinant(&spec, 0.4, &y, &x).unwrap();
        let b = km_determinant(&spec, 0.4, &x, &y).unwrap();
        assert!(a >= 0.0);
        assert_relative_eq!(a, b, max_relative = 1e-12);
        assert!(km_determinant(&spec, 0.4, &[0.0, 3.0, 6.5], &x).is_err());
    }

    #[test]
    fn qnu_examples() {
        assert_relative_eq!(
            itransform_kernel_q(1.0, 0.0, 0.0).unwrap().re,
            1.0 / (2.0 * PI).sqrt()
        );
        let (nu, t) = (0.5, 0.4);
        for w in [0.0, 0.3, 1.0] {
            assert_eq!(itransform_kernel_qnu(nu, t, w, 0.0).unwrap(), td_besq(nu, t, w, 0.0).unwrap());
        }
        assert_relative_eq!(
            itransform_kernel_qnu(nu, t, 1.0, -2.0).unwrap(),
            td_besq(nu, t, 1.0, 2.0).unwrap(),
            max_relative = 1e-14
        );
        // continuity across the series / Bessel switch at √(xw)/t = 2
        let x = 0.64 / 1.0;
        let a = itransform_kernel_qnu(nu, t, 1.0, x * 0.9999).unwrap();
        let b = itransform_kernel_qnu(nu, t, 1.0, x * 1.0001).unwrap();
        assert!((a - b).abs() < 1e-3 * a.abs());
    }
}
