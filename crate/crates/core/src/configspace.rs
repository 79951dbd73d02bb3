//! Finite point configurations, Weyl chambers and alcoves, and the
//! Vandermonde-type products `h` and `h^r`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// Relative tolerance under which two positions are the same support point.
pub const MERGE_TOL: f64 = 1e-12;

/// A finite configuration `Σ_j m_j δ_{u_j}` with strictly increasing support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    support: Vec<f64>,
    multiplicities: Vec<usize>,
}

fn coincide(a: f64, b: f64) -> bool {
    (a - b).abs() <= MERGE_TOL * 1f64.max(a.abs()).max(b.abs())
}

impl Configuration {
    pub fn new(support: Vec<f64>, multiplicities: Vec<usize>) -> Result<Self> {
        ensure!(!support.is_empty(), InvalidArgument, "configuration must have at least one point");
        ensure!(
            support.len() == multiplicities.len(),
            InvalidArgument,
            "support and multiplicity lengths differ"
        );
        ensure!(support.iter().all(|x| x.is_finite()), InvalidArgument, "positions must be finite");
        ensure!(
            support.windows(2).all(|w| w[0] < w[1]),
            InvalidArgument,
            "support must be strictly increasing"
        );
        ensure!(multiplicities.iter().all(|&m| m >= 1), InvalidArgument, "multiplicities must be >= 1");
        Ok(Configuration { support, multiplicities })
    }

    /// `N` simple points.
    pub fn simple(points: &[f64]) -> Result<Self> {
        Configuration::new(points.to_vec(), vec![1; points.len()])
    }

    /// `N δ_x`.
    pub fn concentrated(x: f64, n: usize) -> Result<Self> {
        Configuration::new(vec![x], vec![n])
    }

    /// Collapse a labeled vector, merging coincident positions.
    pub fn from_points(points: &[f64]) -> Result<Self> {
        ensure!(!points.is_empty(), InvalidArgument, "configuration must have at least one point");
        ensure!(points.iter().all(|x| x.is_finite()), InvalidArgument, "positions must be finite");
        let mut sorted = points.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut support: Vec<f64> = Vec::new();
        let mut mult: Vec<usize> = Vec::new();
        for x in sorted {
            match support.last() {
                Some(&last) if coincide(last, x) => *mult.last_mut().expect("nonempty") += 1,
                _ => {
                    support.push(x);
                    mult.push(1);
                }
            }
        }
        Configuration::new(support, mult)
    }

    /// As [`Configuration::from_points`] after reducing positions to `[0, 2πr)`.
    pub fn from_points_circle(r: f64, points: &[f64]) -> Result<Self> {
        ensure!(r > 0.0, Domain, "circle radius must be positive");
        let reduced: Vec<f64> = points.iter().map(|&x| canonicalize_circle(r, x)).collect();
        Configuration::from_points(&reduced)
    }

    /// Reduce the support to `[0, 2πr)`, merging any points that now coincide.
    pub fn canonical_on_circle(&self, r: f64) -> Result<Self> {
        Configuration::from_points_circle(r, &self.expand())
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicities
    }

    pub fn total(&self) -> usize {
        self.multiplicities.iter().sum()
    }

    pub fn is_simple(&self) -> bool {
        self.multiplicities.iter().all(|&m| m == 1)
    }

    /// Labeled positions in increasing order, each repeated by multiplicity.
    pub fn expand(&self) -> Vec<f64> {
        self.support
            .iter()
            .zip(&self.multiplicities)
            .flat_map(|(&x, &m)| std::iter::repeat_n(x, m))
            .collect()
    }

    /// Index of `v` in the support.
    pub fn index_of(&self, v: f64) -> Option<usize> {
        self.support.iter().position(|&u| coincide(u, v))
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (x, m)) in self.support.iter().zip(&self.multiplicities).enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            if *m == 1 {
                write!(f, "{x:?}")?;
            } else {
                write!(f, "{x:?}*{m}")?;
            }
        }
        Ok(())
    }
}

impl FromStr for Configuration {
    type Err = Error;

    /// Comma-separated `position[*multiplicity]` entries, e.g. `-1,0,1` or `0*3`.
    fn from_str(s: &str) -> Result<Self> {
        let mut points = Vec::new();
        for item in s.split(',') {
            let item = item.trim();
            ensure!(!item.is_empty(), Config, "empty entry in configuration {s:?}");
            let (pos, mult) = match item.split_once('*') {
                Some((p, m)) => {
                    let m: usize = m
                        .trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("bad multiplicity in {item:?}")))?;
                    ensure!(m >= 1, Config, "multiplicity must be >= 1 in {item:?}");
                    (p.trim(), m)
                }
                None => (item, 1),
            };
            let x: f64 = pos
                .parse()
                .map_err(|_| Error::Config(format!("bad position in {item:?}")))?;
            ensure!(x.is_finite(), Config, "position must be finite in {item:?}");
            points.extend(std::iter::repeat_n(x, mult));
        }
        Configuration::from_points(&points).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Reduce `x` modulo `2πr` into `[0, 2πr)`.
pub fn canonicalize_circle(r: f64, x: f64) -> f64 {
    let p = 2.0 * PI * r;
    let y = x.rem_euclid(p);
    if y >= p {
        0.0
    } else {
        y
    }
}

/// `x_1 < x_2 < ... < x_N`.
pub fn in_weyl_chamber(x: &[f64]) -> bool {
    x.windows(2).all(|w| w[0] < w[1])
}

/// `x_1 < ... < x_N < x_1 + 2πr`.
pub fn in_alcove(r: f64, x: &[f64]) -> bool {
    in_weyl_chamber(x) && x.first().zip(x.last()).is_none_or(|(a, b)| b < &(a + 2.0 * PI * r))
}

/// `Π_{j<k} (x_k - x_j)`.
pub fn vandermonde(x: &[f64]) -> f64 {
    let mut p = 1.0;
    for k in 0..x.len() {
        for j in 0..k {
            p *= x[k] - x[j];
        }
    }
    p
}

/// `e^{tN(N²-1)/24r²} Π_{j<k} sin((x_k - x_j)/2r)`.
pub fn h_r(r: f64, t: f64, x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mut p = (t * n * (n * n - 1.0) / (24.0 * r * r)).exp();
    for k in 0..x.len() {
        for j in 0..k {
            p *= ((x[k] - x[j]) / (2.0 * r)).sin();
        }
    }
    p
}

/// `w_j = 2πr (j-1)/N`, `j = 1..N`.
pub fn equidistant_config(r: f64, n: usize) -> Result<Configuration> {
    ensure!(r > 0.0 && r.is_finite(), Domain, "radius must be positive, got {r}");
    ensure!(n >= 1, Domain, "need at least one particle");
    let pts: Vec<f64> = (0..n).map(|j| 2.0 * PI * r * j as f64 / n as f64).collect();
    Configuration::simple(&pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn chamber_and_alcove() {
        assert!(in_weyl_chamber(&[1.0, 2.0, 3.0]));
        assert!(!in_weyl_chamber(&[1.0, 1.0, 3.0]));
        assert!(in_weyl_chamber(&[]));
        assert!(in_alcove(1.0, &[0.0, 1.0, 2.0]));
        assert!(!in_alcove(1.0, &[0.0, 3.0, 6.3]));
        assert!(in_alcove(1.0, &[17.0]));
    }

    #[test]
    fn vandermonde_examples() {
        assert_eq!(vandermonde(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(vandermonde(&[1.0, 2.0, 2.0]), 0.0);
        assert_eq!(vandermonde(&[5.0]), 1.0);
    }

    #[test]
    fn h_r_examples() {
        assert_eq!(h_r(1.0, 0.0, &[0.3]), 1.0);
        let x = [0.1, 0.9, 2.0, 4.4];
        let mut shifted = x;
        shifted[1] += 2.0 * PI;
        assert_relative_eq!(h_r(1.0, 0.2, &shifted), -h_r(1.0, 0.2, &x), max_relative = 1e-12);
    }

    #[test]
    fn equidistant_examples() {
        assert_eq!(equidistant_config(1.0, 2).unwrap().support(), &[0.0, PI]);
        assert_eq!(equidistant_config(1.0, 1).unwrap().support(), &[0.0]);
        let c = equidistant_config(2.0, 4).unwrap();
        for (a, b) in c.support().iter().zip([0.0, PI, 2.0 * PI, 3.0 * PI]) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn parse_and_display() {
        let c: Configuration = "-1.0,0.0,1.0".parse().unwrap();
        assert!(c.is_simple());
        assert_eq!(c.total(), 3);
        let d: Configuration = "0.0*3".parse().unwrap();
        assert_eq!(d.support(), &[0.0]);
        assert_eq!(d.total(), 3);
        assert_eq!(d.to_string(), "0.0*3");
        let back: Configuration = c.to_string().parse().unwrap();
        assert_eq!(back, c);
        assert!("1,,2".parse::<Configuration>().is_err());
        assert!("1*0".parse::<Configuration>().is_err());
        assert!("a".parse::<Configuration>().is_err());
    }

    #[test]
    fn merging_and_circle() {
        let c = Configuration::from_points(&[1.0, 0.0, 1.0 + 1e-14]).unwrap();
        assert_eq!(c.multiplicities(), &[1, 2]);
        let c = Configuration::from_points_circle(1.0, &[-0.5, 7.0]).unwrap();
        assert_relative_eq!(c.support()[0], 7.0 - 2.0 * PI, epsilon = 1e-14);
        assert_relative_eq!(c.support()[1], 2.0 * PI - 0.5, epsilon = 1e-14);
    }
}
