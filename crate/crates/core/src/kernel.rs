//! Compactly supported kernels on the closed box `[-1/2, 1/2]^d`.
//!
//! Every shipped kernel is a product of a one-dimensional polynomial profile restricted
//! to `[-1/2, 1/2]`. The support is closed: `K(±1/2)` takes the value of the profile at
//! the boundary, so the indicator kernel equals 1 on the whole closed box.

// float methods come from the trait under no_std and are inherent when std is linked
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// One-dimensional profile of a product kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    /// `K(u) = 1` on `[-1/2, 1/2]`.
    Uniform,
    /// `K(u) = (3/2)(1 - 4u²)`.
    Epanechnikov,
    /// `K(u) = (35/16)(1 - 4u²)³`.
    Triweight,
}

/// Classification reported alongside a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyTag {
    Uniform,
    Epanechnikov,
    Triweight,
    ProductOf1d,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 3] = [
        KernelFamily::Uniform,
        KernelFamily::Epanechnikov,
        KernelFamily::Triweight,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Uniform => "uniform",
            KernelFamily::Epanechnikov => "epanechnikov",
            KernelFamily::Triweight => "triweight",
        }
    }

    /// Profile value at `u`; zero outside the closed interval `[-1/2, 1/2]`.
    #[inline]
    pub fn profile(self, u: f64) -> f64 {
        if !(-0.5..=0.5).contains(&u) {
            return 0.0;
        }
        match self {
            KernelFamily::Uniform => 1.0,
            KernelFamily::Epanechnikov => 1.5 * (1.0 - 4.0 * u * u),
            KernelFamily::Triweight => {
                let v = 1.0 - 4.0 * u * u;
                (35.0 / 16.0) * v * v * v
            }
        }
    }

    /// Sup of the profile, attained at 0.
    pub fn kappa(self) -> f64 {
        match self {
            KernelFamily::Uniform => 1.0,
            KernelFamily::Epanechnikov => 1.5,
            KernelFamily::Triweight => 35.0 / 16.0,
        }
    }

    /// `∫ K₁²` in closed form.
    pub fn l2_norm_sq(self) -> f64 {
        match self {
            KernelFamily::Uniform => 1.0,
            KernelFamily::Epanechnikov => 1.2,
            KernelFamily::Triweight => 700.0 / 429.0,
        }
    }

    /// Polynomial degree of the profile on its support.
    pub fn degree(self) -> usize {
        match self {
            KernelFamily::Uniform => 0,
            KernelFamily::Epanechnikov => 2,
            KernelFamily::Triweight => 6,
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "uniform" | "box" => Ok(KernelFamily::Uniform),
            "epanechnikov" => Ok(KernelFamily::Epanechnikov),
            "triweight" => Ok(KernelFamily::Triweight),
            other => Err(Error::Config(format!(
                "unknown kernel '{other}' (expected uniform, epanechnikov or triweight)"
            ))),
        }
    }
}

/// Cached kernel constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConstants {
    pub kappa: f64,
    pub l2_norm_sq: f64,
}

/// A product kernel `K(u) = scale · ∏ᵢ K₁(uᵢ)` on `[-1/2, 1/2]^d`.
///
/// Kernels are immutable; evaluation is pure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    dim: usize,
    family: KernelFamily,
    scale: f64,
    kappa: f64,
    l2_norm_sq: f64,
}

impl Kernel {
    pub fn new(family: KernelFamily, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidKernel("dimension must be positive".into()));
        }
        let d = dim as i32;
        Ok(Kernel {
            dim,
            family,
            scale: 1.0,
            kappa: family.kappa().powi(d),
            l2_norm_sq: family.l2_norm_sq().powi(d),
        })
    }

    pub fn uniform(dim: usize) -> Result<Self> {
        Kernel::new(KernelFamily::Uniform, dim)
    }

    pub fn epanechnikov(dim: usize) -> Result<Self> {
        Kernel::new(KernelFamily::Epanechnikov, dim)
    }

    pub fn triweight(dim: usize) -> Result<Self> {
        Kernel::new(KernelFamily::Triweight, dim)
    }

    /// Parses `"<family>"` or `"<family> dim=<d>"` (separators: space, comma or colon).
    pub fn parse(spec: &str) -> Result<Self> {
        let mut family = None;
        let mut dim = 1usize;
        for token in spec
            .split(|c: char| c.is_whitespace() || c == ',' || c == ':')
            .filter(|s| !s.is_empty())
        {
            if let Some(v) = token.strip_prefix("dim=") {
                dim = v
                    .parse()
                    .map_err(|_| Error::Config(format!("kernel dimension '{v}' is not a positive integer")))?;
            } else if family.is_none() {
                family = Some(KernelFamily::parse(token)?);
            } else {
                return Err(Error::Config(format!(
                    "unexpected token '{token}' in kernel spec '{spec}'"
                )));
            }
        }
        let family = family.ok_or_else(|| Error::Config(format!("kernel spec '{spec}' names no kernel")))?;
        Kernel::new(family, dim)
    }

    /// Multiplies the kernel by `factor`. Only positive factors are accepted; the result is
    /// generally not a density and fails [`Kernel::validate`] unless `factor == 1`.
    pub fn scaled(mut self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::InvalidKernel(format!(
                "kernels must be positive; got scale factor {factor}"
            )));
        }
        self.scale *= factor;
        self.kappa *= factor;
        self.l2_norm_sq *= factor * factor;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn family_tag(&self) -> FamilyTag {
        if self.dim > 1 {
            return FamilyTag::ProductOf1d;
        }
        match self.family {
            KernelFamily::Uniform => FamilyTag::Uniform,
            KernelFamily::Epanechnikov => FamilyTag::Epanechnikov,
            KernelFamily::Triweight => FamilyTag::Triweight,
        }
    }

    pub fn name(&self) -> String {
        if self.dim == 1 {
            String::from(self.family.name())
        } else {
            format!("{} dim={}", self.family.name(), self.dim)
        }
    }

    pub fn support_half_width(&self) -> f64 {
        0.5
    }

    /// True when `K` is the indicator of its support (times a constant).
    pub fn is_indicator(&self) -> bool {
        self.family == KernelFamily::Uniform
    }

    pub fn constants(&self) -> KernelConstants {
        KernelConstants {
            kappa: self.kappa,
            l2_norm_sq: self.l2_norm_sq,
        }
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.l2_norm_sq
    }

    /// `K(u)`, checking the dimension and finiteness of `u`.
    pub fn eval(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: u.len(),
            });
        }
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("kernel argument {u:?} is not finite")));
        }
        Ok(self.eval_unchecked(u))
    }

    #[inline]
    pub fn eval_unchecked(&self, u: &[f64]) -> f64 {
        let mut acc = self.scale;
        for &x in u {
            let v = self.family.profile(x);
            if v == 0.0 {
                return 0.0;
            }
            acc *= v;
        }
        acc
    }

    /// `(K₁ * K₁)(v)` for one axis, exact by Gauss-Legendre on the overlap.
    pub fn self_convolution_1d(&self, v: f64) -> f64 {
        let lo = (-0.5f64).max(v - 0.5);
        let hi = 0.5f64.min(v + 0.5);
        if hi <= lo {
            return 0.0;
        }
        let rule = GaussLegendre::new(self.family.degree() + 1);
        rule.integrate(lo, hi, |u| self.family.profile(u) * self.family.profile(u - v))
    }

    /// `(K * K)(v)` for the product kernel.
    pub fn self_convolution(&self, v: &[f64]) -> f64 {
        let mut acc = self.scale * self.scale;
        for &x in v {
            let c = self.self_convolution_1d(x);
            if c == 0.0 {
                return 0.0;
            }
            acc *= c;
        }
        acc
    }

    /// Numerical validation of normalization, boundedness, support and right-continuity.
    pub fn validate(&self, quad_points_per_axis: usize) -> Result<ValidationReport> {
        if quad_points_per_axis < 16 {
            return Err(Error::Usage(format!(
                "kernel validation needs at least 16 quadrature points per axis, got {quad_points_per_axis}"
            )));
        }
        let d = self.dim;
        let rule = GaussLegendre::new(quad_points_per_axis);
        let lo = vec![-0.5; d];
        let hi = vec![0.5; d];
        let integral = rule.integrate_box(&lo, &hi, |u| self.eval_unchecked(u));

        // Validation grid over [-3/4, 3/4]^d with the support faces on grid lines.
        let m = quad_points_per_axis.div_ceil(4);
        let coords: Vec<f64> = (0..=6 * m)
            .map(|i| (i as f64 - (3 * m) as f64) / (4 * m) as f64)
            .collect();
        let eps = 1e-9;
        let mut observed_sup = 0.0f64;
        let mut support_violations = 0usize;
        let mut negative_values = 0usize;
        let mut right_continuity_failures = 0usize;
        let mut non_finite_at = None;
        let mut idx = vec![0usize; d];
        let mut u = vec![0.0; d];
        let mut shifted = vec![0.0; d];
        'grid: loop {
            for k in 0..d {
                u[k] = coords[idx[k]];
            }
            let value = self.eval_unchecked(&u);
            if !value.is_finite() {
                non_finite_at = Some(u.clone());
                break 'grid;
            }
            if value < 0.0 {
                negative_values += 1;
            }
            observed_sup = observed_sup.max(value);
            let outside = u.iter().any(|x| x.abs() > 0.5);
            if outside && value != 0.0 {
                support_violations += 1;
            }
            // The closed-support convention makes the upper face a left limit, so
            // right-continuity is audited away from it.
            let on_upper_face = u.contains(&0.5);
            if !on_upper_face {
                for k in 0..d {
                    shifted[k] = u[k] + eps;
                }
                let jump = (self.eval_unchecked(&shifted) - value).abs();
                if jump > 1e-6 * self.kappa.max(1.0) {
                    right_continuity_failures += 1;
                }
            }
            let mut k = 0;
            loop {
                if k == d {
                    break 'grid;
                }
                idx[k] += 1;
                if idx[k] < coords.len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
        let integral_error = (integral - 1.0).abs();
        let passed = non_finite_at.is_none()
            && integral_error <= 1e-8
            && support_violations == 0
            && negative_values == 0
            && right_continuity_failures == 0
            && observed_sup <= self.kappa * (1.0 + 1e-12);
        Ok(ValidationReport {
            kernel: self.name(),
            quad_points_per_axis,
            integral,
            integral_error,
            observed_sup,
            kappa: self.kappa,
            support_violations,
            negative_values,
            right_continuity_failures,
            non_finite_at,
            passed,
        })
    }
}

/// Outcome of [`Kernel::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub kernel: String,
    pub quad_points_per_axis: usize,
    pub integral: f64,
    pub integral_error: f64,
    pub observed_sup: f64,
    pub kappa: f64,
    pub support_violations: usize,
    pub negative_values: usize,
    pub right_continuity_failures: usize,
    pub non_finite_at: Option<Vec<f64>>,
    pub passed: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_values() {
        let uni = Kernel::uniform(1).unwrap();
        assert_eq!(uni.eval(&[0.0]).unwrap(), 1.0);
        assert_eq!(uni.eval(&[0.5]).unwrap(), 1.0);
        assert_eq!(uni.eval(&[-0.5]).unwrap(), 1.0);
        assert_eq!(uni.eval(&[0.5000001]).unwrap(), 0.0);
        let epa = Kernel::epanechnikov(1).unwrap();
        assert_eq!(epa.eval(&[0.0]).unwrap(), 1.5);
    }

    #[test]
    fn dimension_and_finiteness_errors() {
        let k = Kernel::uniform(2).unwrap();
        assert_eq!(k.eval(&[0.0]), Err(Error::Dimension { expected: 2, got: 1 }));
        assert!(matches!(k.eval(&[0.0, f64::NAN]), Err(Error::Domain(_))));
    }

    #[test]
    fn constants_of_shipped_kernels() {
        let c = Kernel::uniform(1).unwrap().constants();
        assert_eq!((c.kappa, c.l2_norm_sq), (1.0, 1.0));
        let c = Kernel::epanechnikov(1).unwrap().constants();
        assert_eq!(c.kappa, 1.5);
        assert!((c.l2_norm_sq - 1.2).abs() < 1e-15);
        let c = Kernel::uniform(2).unwrap().constants();
        assert_eq!((c.kappa, c.l2_norm_sq), (1.0, 1.0));
    }

    #[test]
    fn parse_names_and_dims() {
        assert_eq!(Kernel::parse("uniform").unwrap(), Kernel::uniform(1).unwrap());
        assert_eq!(Kernel::parse("triweight dim=3").unwrap(), Kernel::triweight(3).unwrap());
        assert_eq!(
            Kernel::parse("epanechnikov,dim=2").unwrap(),
            Kernel::epanechnikov(2).unwrap()
        );
        assert!(Kernel::parse("gaussian").is_err());
        assert!(Kernel::parse("uniform dim=x").is_err());
    }

    #[test]
    fn signed_scaling_rejected() {
        assert!(Kernel::uniform(1).unwrap().scaled(-1.0).is_err());
        assert!(Kernel::uniform(1).unwrap().scaled(0.0).is_err());
    }

    #[test]
    fn validation_passes_for_shipped_and_fails_for_misnormalized() {
        let r = Kernel::uniform(1).unwrap().validate(64).unwrap();
        assert!(r.passed);
        assert!(r.integral_error < 1e-15);
        let r = Kernel::epanechnikov(1).unwrap().validate(128).unwrap();
        assert!(r.passed && r.integral_error <= 1e-10);
        let r = Kernel::uniform(1).unwrap().scaled(2.0).unwrap().validate(64).unwrap();
        assert!(!r.passed);
        assert!((r.integral_error - 1.0).abs() < 1e-14);
        assert!(Kernel::uniform(1).unwrap().validate(8).is_err());
    }

    #[test]
    fn self_convolution_of_uniform_is_triangle() {
        let k = Kernel::uniform(1).unwrap();
        assert!((k.self_convolution_1d(0.0) - 1.0).abs() < 1e-15);
        assert!((k.self_convolution_1d(0.25) - 0.75).abs() < 1e-15);
        assert_eq!(k.self_convolution_1d(1.5), 0.0);
    }
}
