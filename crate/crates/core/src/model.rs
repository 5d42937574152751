//! Analytic density models with exact samplers.

// float methods come from the trait under no_std and are inherent when std is linked
use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, RngCore};
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        debug_assert_eq!(lo.len(), hi.len());
        BoxRegion { lo, hi }
    }

    pub fn cube(dim: usize, half_width: f64) -> Self {
        BoxRegion::new(vec![-half_width; dim], vec![half_width; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, t: &[f64]) -> bool {
        t.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(x, (a, b))| *a <= *x && *x <= *b)
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    /// Smallest box containing both.
    pub fn union(&self, other: &BoxRegion) -> BoxRegion {
        BoxRegion::new(
            self.lo.iter().zip(&other.lo).map(|(a, b)| a.min(*b)).collect(),
            self.hi.iter().zip(&other.hi).map(|(a, b)| a.max(*b)).collect(),
        )
    }

    pub fn dilate(&self, by: f64) -> BoxRegion {
        BoxRegion::new(
            self.lo.iter().map(|a| a - by).collect(),
            self.hi.iter().map(|b| b + by).collect(),
        )
    }
}

/// Family classification of the shipped models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelFamily {
    Gaussian,
    Laplace,
    Cauchy,
    PolynomialBump,
    UniformBox,
}

/// A density `f` on `Rᵈ` with its positivity set `B_f` and an exact sampler.
///
/// Samplers draw points one at a time from the supplied stream, so a sample of size `m`
/// drawn from a fresh stream is a prefix of any larger sample drawn from the same stream.
pub trait Density: Send + Sync {
    fn dim(&self) -> usize;

    fn name(&self) -> String;

    fn pdf(&self, t: &[f64]) -> f64;

    /// `‖f‖∞`.
    fn sup_pdf(&self) -> f64;

    /// Membership in the open positivity set `B_f`.
    fn in_positivity_set(&self, t: &[f64]) -> bool;

    /// A box holding at least `1 - 10⁻⁶` of the probability mass.
    fn bounding_box(&self) -> BoxRegion;

    /// The closure of `B_f` when it is a box; quadratures clip to it.
    fn support_box(&self) -> Option<BoxRegion> {
        None
    }

    /// Draws one point into `out`.
    fn sample_point(&self, rng: &mut dyn RngCore, out: &mut [f64]);

    /// `P{f(X) < s}` in closed form, when available.
    fn prob_density_below(&self, _s: f64) -> Option<f64> {
        None
    }

    /// `P{X ∈ [lo, hi]}` in closed form, when available.
    fn box_probability(&self, _lo: &[f64], _hi: &[f64]) -> Option<f64> {
        None
    }
}

/// The shipped analytic models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityModel {
    family: ModelFamily,
    dim: usize,
    /// Scale for laplace / cauchy, polynomial power for the bump.
    param: f64,
    /// Normalizing constant for the bump, volume for the box.
    norm: f64,
    box_region: Option<BoxRegion>,
}

impl DensityModel {
    /// Standard gaussian, product over `dim` axes.
    pub fn gaussian(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(DensityModel {
            family: ModelFamily::Gaussian,
            dim,
            param: 1.0,
            norm: (2.0 * PI).powf(-(dim as f64) / 2.0),
            box_region: None,
        })
    }

    /// One-dimensional laplace with the given scale.
    pub fn laplace(scale: f64) -> Result<Self> {
        check_scale(scale)?;
        Ok(DensityModel {
            family: ModelFamily::Laplace,
            dim: 1,
            param: scale,
            norm: 0.5 / scale,
            box_region: None,
        })
    }

    /// One-dimensional cauchy with the given scale.
    pub fn cauchy(scale: f64) -> Result<Self> {
        check_scale(scale)?;
        Ok(DensityModel {
            family: ModelFamily::Cauchy,
            dim: 1,
            param: scale,
            norm: 1.0 / (PI * scale),
            box_region: None,
        })
    }

    /// `c(1 - |t|²)^k` on the open unit ball, with `c` normalizing.
    pub fn polynomial_bump(dim: usize, power: u32) -> Result<Self> {
        check_dim(dim)?;
        if power == 0 {
            return Err(Error::Config("bump power must be at least 1".into()));
        }
        let half_d = dim as f64 / 2.0;
        let k = power as f64;
        let norm = libm::tgamma(half_d + k + 1.0) / (PI.powf(half_d) * libm::tgamma(k + 1.0));
        Ok(DensityModel {
            family: ModelFamily::PolynomialBump,
            dim,
            param: k,
            norm,
            box_region: Some(BoxRegion::cube(dim, 1.0)),
        })
    }

    /// Uniform density on the open box `(lo, hi)`.
    pub fn uniform_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Dimension {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        check_dim(lo.len())?;
        if lo
            .iter()
            .zip(&hi)
            .any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b))
        {
            return Err(Error::Config(format!(
                "box bounds {lo:?} .. {hi:?} are not an open box"
            )));
        }
        let region = BoxRegion::new(lo, hi);
        Ok(DensityModel {
            family: ModelFamily::UniformBox,
            dim: region.dim(),
            param: 0.0,
            norm: region.volume(),
            box_region: Some(region),
        })
    }

    /// Builds a model from a config name. `param` is the scale (laplace, cauchy), the power
    /// (bump) or ignored.
    pub fn parse(name: &str, dim: usize, param: Option<f64>) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => DensityModel::gaussian(dim),
            "laplace" => one_dim(dim, name).and_then(|_| DensityModel::laplace(param.unwrap_or(1.0))),
            "cauchy" => one_dim(dim, name).and_then(|_| DensityModel::cauchy(param.unwrap_or(1.0))),
            "bump" | "polynomial-bump" => {
                let k = param.unwrap_or(2.0);
                if k.fract() != 0.0 || k < 1.0 {
                    return Err(Error::Config(format!("bump power must be a positive integer, got {k}")));
                }
                DensityModel::polynomial_bump(dim, k as u32)
            }
            "uniform-box" | "uniform" => DensityModel::uniform_box(vec![0.0; dim], vec![1.0; dim]),
            other => Err(Error::Config(format!(
                "unknown model '{other}' (expected gaussian, laplace, cauchy, bump or uniform-box)"
            ))),
        }
    }

    pub fn family(&self) -> ModelFamily {
        self.family
    }

    pub fn boxed(self) -> Box<dyn Density> {
        Box::new(self)
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::Config("model dimension must be positive".into()));
    }
    Ok(())
}

fn check_scale(scale: f64) -> Result<()> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::Config(format!("scale must be positive, got {scale}")));
    }
    Ok(())
}

fn one_dim(dim: usize, name: &str) -> Result<()> {
    if dim != 1 {
        return Err(Error::Config(format!(
            "model '{name}' is one-dimensional, got dim={dim}"
        )));
    }
    Ok(())
}

/// `P{N(0,1) > x}`.
pub fn normal_upper_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// Quantile `x` with `P{N(0,1) > x} = p`, by bisection on the tail.
pub fn normal_upper_quantile(p: f64) -> f64 {
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_upper_tail(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `P{χ²_d > q}` via the closed forms for integer degrees of freedom.
pub fn chi_square_upper_tail(d: usize, q: f64) -> f64 {
    if q <= 0.0 {
        return 1.0;
    }
    let half = 0.5 * q;
    if d.is_multiple_of(2) {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..d / 2 {
            term *= half / k as f64;
            sum += term;
        }
        (-half).exp() * sum
    } else {
        let mut acc = libm::erfc(half.sqrt());
        // e^{-q/2} Σ_{k=0}^{(d-3)/2} (q/2)^{k+1/2} / Γ(k + 3/2)
        if d >= 3 {
            let mut term = half.sqrt() / libm::tgamma(1.5);
            let mut sum = term;
            for k in 1..=(d - 3) / 2 {
                term *= half / (k as f64 + 0.5);
                sum += term;
            }
            acc += (-half).exp() * sum;
        }
        acc
    }
}

impl Density for DensityModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn name(&self) -> String {
        match self.family {
            ModelFamily::Gaussian => format!("gaussian dim={}", self.dim),
            ModelFamily::Laplace => format!("laplace scale={}", self.param),
            ModelFamily::Cauchy => format!("cauchy scale={}", self.param),
            ModelFamily::PolynomialBump => format!("bump dim={} power={}", self.dim, self.param),
            ModelFamily::UniformBox => {
                let b = self.box_region.as_ref().expect("box model carries its region");
                format!("uniform-box {:?}..{:?}", b.lo, b.hi)
            }
        }
    }

    fn pdf(&self, t: &[f64]) -> f64 {
        match self.family {
            ModelFamily::Gaussian => {
                let r2: f64 = t.iter().map(|x| x * x).sum();
                self.norm * (-0.5 * r2).exp()
            }
            ModelFamily::Laplace => self.norm * (-t[0].abs() / self.param).exp(),
            ModelFamily::Cauchy => {
                let z = t[0] / self.param;
                self.norm / (1.0 + z * z)
            }
            ModelFamily::PolynomialBump => {
                let r2: f64 = t.iter().map(|x| x * x).sum();
                if r2 < 1.0 {
                    self.norm * (1.0 - r2).powi(self.param as i32)
                } else {
                    0.0
                }
            }
            ModelFamily::UniformBox => {
                if self.in_positivity_set(t) {
                    1.0 / self.norm
                } else {
                    0.0
                }
            }
        }
    }

    fn sup_pdf(&self) -> f64 {
        match self.family {
            ModelFamily::UniformBox => 1.0 / self.norm,
            _ => self.norm,
        }
    }

    fn in_positivity_set(&self, t: &[f64]) -> bool {
        if t.iter().any(|x| !x.is_finite()) {
            return false;
        }
        match self.family {
            ModelFamily::Gaussian | ModelFamily::Laplace | ModelFamily::Cauchy => true,
            ModelFamily::PolynomialBump => t.iter().map(|x| x * x).sum::<f64>() < 1.0,
            ModelFamily::UniformBox => {
                let b = self.box_region.as_ref().expect("box model carries its region");
                t.iter()
                    .zip(b.lo.iter().zip(&b.hi))
                    .all(|(x, (lo, hi))| lo < x && x < hi)
            }
        }
    }

    fn bounding_box(&self) -> BoxRegion {
        // half of the promised tail, leaving room for rounding
        let tail = 0.5e-6;
        match self.family {
            ModelFamily::Gaussian => {
                // each axis keeps 1 - tail/d of its mass
                let q = normal_upper_quantile(0.5 * tail / self.dim as f64);
                BoxRegion::cube(self.dim, q)
            }
            ModelFamily::Laplace => BoxRegion::cube(1, self.param * (1.0 / tail).ln()),
            ModelFamily::Cauchy => BoxRegion::cube(1, self.param / (0.5 * PI * tail).tan()),
            ModelFamily::PolynomialBump | ModelFamily::UniformBox => {
                self.box_region.clone().expect("compact models carry their region")
            }
        }
    }

    fn support_box(&self) -> Option<BoxRegion> {
        match self.family {
            ModelFamily::UniformBox => self.box_region.clone(),
            ModelFamily::PolynomialBump if self.dim == 1 => self.box_region.clone(),
            _ => None,
        }
    }

    fn sample_point(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        match self.family {
            ModelFamily::Gaussian => {
                for x in out.iter_mut() {
                    *x = StandardNormal.sample(rng);
                }
            }
            ModelFamily::Laplace => {
                let u: f64 = rng.random::<f64>() - 0.5;
                out[0] = -self.param * u.signum() * (1.0 - 2.0 * u.abs()).ln();
            }
            ModelFamily::Cauchy => {
                // inverse CDF on the open interval (0, 1)
                let u: f64 = rng.random_range(f64::EPSILON..1.0);
                out[0] = self.param * (PI * (u - 0.5)).tan();
            }
            ModelFamily::PolynomialBump => {
                let beta = Beta::new(self.dim as f64 / 2.0, self.param + 1.0).expect("valid beta parameters");
                let r = Distribution::<f64>::sample(&beta, rng).sqrt();
                if self.dim == 1 {
                    out[0] = if rng.random::<bool>() { r } else { -r };
                } else {
                    let mut norm = 0.0;
                    while norm == 0.0 {
                        for x in out.iter_mut() {
                            *x = StandardNormal.sample(rng);
                        }
                        norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
                    }
                    for x in out.iter_mut() {
                        *x *= r / norm;
                    }
                }
            }
            ModelFamily::UniformBox => {
                let b = self.box_region.as_ref().expect("box model carries its region");
                for (k, x) in out.iter_mut().enumerate() {
                    let u: f64 = rng.random();
                    *x = b.lo[k] + (b.hi[k] - b.lo[k]) * u;
                }
            }
        }
    }

    fn prob_density_below(&self, s: f64) -> Option<f64> {
        if s <= 0.0 {
            return Some(0.0);
        }
        if s > self.sup_pdf() {
            return Some(1.0);
        }
        match self.family {
            ModelFamily::Gaussian => {
                // f(x) < s  ⟺  |x|² > -2 ln(s / norm)
                let q = -2.0 * (s / self.norm).ln();
                Some(chi_square_upper_tail(self.dim, q))
            }
            ModelFamily::Laplace => Some((s / self.norm).min(1.0)),
            ModelFamily::Cauchy => {
                let z2 = self.norm / s - 1.0;
                if z2 <= 0.0 {
                    return Some(1.0);
                }
                Some(2.0 / PI * (1.0 / z2.sqrt()).atan())
            }
            ModelFamily::UniformBox => Some(if s > 1.0 / self.norm { 1.0 } else { 0.0 }),
            ModelFamily::PolynomialBump => None,
        }
    }

    fn box_probability(&self, lo: &[f64], hi: &[f64]) -> Option<f64> {
        match self.family {
            ModelFamily::Gaussian => Some(
                lo.iter()
                    .zip(hi)
                    .map(|(&a, &b)| interval_probability(a, b, normal_upper_tail))
                    .product(),
            ),
            ModelFamily::Laplace => {
                let scale = self.param;
                Some(interval_probability(lo[0], hi[0], |x| 0.5 * (-x / scale).exp()))
            }
            ModelFamily::Cauchy => {
                let scale = self.param;
                // atan(s/x)/π is the upper tail for x > 0 without cancellation
                let tail = |x: f64| {
                    if x > 0.0 {
                        (scale / x).atan() / PI
                    } else {
                        0.5 - (x / scale).atan() / PI
                    }
                };
                Some(interval_probability(lo[0], hi[0], tail))
            }
            ModelFamily::UniformBox => {
                let b = self.box_region.as_ref().expect("box model carries its region");
                let mut vol = 1.0;
                for k in 0..self.dim {
                    let side = hi[k].min(b.hi[k]) - lo[k].max(b.lo[k]);
                    if side <= 0.0 {
                        return Some(0.0);
                    }
                    vol *= side;
                }
                Some(vol / self.norm)
            }
            ModelFamily::PolynomialBump => None,
        }
    }
}

/// `P{a ≤ X ≤ b}` for a symmetric law from its upper tail `S(x) = P{X > x}` (valid for
/// `x ≥ 0`), differencing tails on the same side of zero to avoid cancellation.
fn interval_probability(a: f64, b: f64, upper_tail: impl Fn(f64) -> f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if a >= 0.0 {
        (upper_tail(a) - upper_tail(b)).max(0.0)
    } else if b <= 0.0 {
        (upper_tail(-b) - upper_tail(-a)).max(0.0)
    } else {
        (1.0 - upper_tail(b) - upper_tail(-a)).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::composite;
    use crate::quadrature::GaussLegendre;
    use rand::SeedableRng;

    #[test]
    fn densities_integrate_to_one_on_bounding_box() {
        let rule = GaussLegendre::new(16);
        for m in [
            DensityModel::gaussian(1).unwrap(),
            DensityModel::laplace(1.0).unwrap(),
            DensityModel::polynomial_bump(1, 2).unwrap(),
            DensityModel::uniform_box(vec![0.0], vec![1.0]).unwrap(),
        ] {
            let b = m.bounding_box();
            let mass = composite(&rule, b.lo[0], b.hi[0], 2000, |x| m.pdf(&[x]));
            assert!((1.0 - 1e-6..1.0 + 1e-9).contains(&mass), "{}: {mass}", m.name());
        }
        // cauchy: heavy tail, mass of the box in closed form
        let c = DensityModel::cauchy(1.0).unwrap();
        let b = c.bounding_box();
        let mass = 2.0 / PI * b.hi[0].atan();
        assert!(mass >= 1.0 - 1e-6 - 1e-12);
    }

    #[test]
    fn bump_in_two_dimensions_integrates_to_one() {
        let m = DensityModel::polynomial_bump(2, 2).unwrap();
        // radial integral 2π ∫ c (1-r²)² r dr = 2π c / 6
        assert!((2.0 * PI * m.sup_pdf() / 6.0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn positivity_matches_pdf() {
        let models = [
            DensityModel::gaussian(1).unwrap(),
            DensityModel::polynomial_bump(1, 3).unwrap(),
            DensityModel::uniform_box(vec![0.0], vec![1.0]).unwrap(),
        ];
        for m in &models {
            for i in 0..=400 {
                let t = -2.0 + 0.01 * i as f64;
                assert_eq!(m.pdf(&[t]) > 0.0, m.in_positivity_set(&[t]), "{} at {t}", m.name());
                assert!(m.pdf(&[t]) <= m.sup_pdf());
            }
        }
    }

    #[test]
    fn analytic_density_tails() {
        let g = DensityModel::gaussian(1).unwrap();
        // f(x) < f(2)  ⟺ |x| > 2
        let p = g.prob_density_below(g.pdf(&[2.0])).unwrap();
        assert!((p - 2.0 * normal_upper_tail(2.0)).abs() < 1e-12);
        let c = DensityModel::cauchy(1.0).unwrap();
        let p = c.prob_density_below(c.pdf(&[3.0])).unwrap();
        assert!((p - (1.0 - 2.0 / PI * 3.0f64.atan())).abs() < 1e-12);
        let g2 = DensityModel::gaussian(2).unwrap();
        let p = g2.prob_density_below(g2.pdf(&[1.0, 1.0])).unwrap();
        assert!((p - (-1.0f64).exp()).abs() < 1e-12);
        // d = 3 odd-degree closed form against P{χ²₃ > 3} = 0.391625...
        assert!((chi_square_upper_tail(3, 3.0) - 0.391_625_176_271_087_7).abs() < 1e-12);
    }

    #[test]
    fn samplers_stay_in_support() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let m = DensityModel::polynomial_bump(3, 2).unwrap();
        let mut p = [0.0; 3];
        for _ in 0..1000 {
            m.sample_point(&mut rng, &mut p);
            assert!(p.iter().map(|x| x * x).sum::<f64>() < 1.0);
        }
    }
}
