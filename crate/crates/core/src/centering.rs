//! The exact centering `E f_{n,h}(t) = ∫ K(u) f(t + u h^{1/d}) du` by quadrature.

// float methods come from the trait under no_std and are inherent when std is linked
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::bandwidth::check_bandwidth;
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::model::Density;
use crate::quadrature::GaussLegendre;

/// Absolute disagreement allowed between the two quadrature resolutions.
pub const CENTERING_TOL: f64 = 1e-6;

/// Side length `h^{1/d}` of the kernel window.
#[inline]
pub fn window_side(h: f64, dim: usize) -> f64 {
    if dim == 1 {
        h
    } else {
        h.powf(1.0 / dim as f64)
    }
}

/// Gauss-Legendre rules at `q` and `2q` nodes per axis for repeated centering evaluations.
#[derive(Debug, Clone)]
pub struct Centering {
    kernel: Kernel,
    coarse: GaussLegendre,
    fine: GaussLegendre,
}

impl Centering {
    pub fn new(kernel: &Kernel, quad_points_per_axis: usize) -> Result<Self> {
        if quad_points_per_axis < 2 {
            return Err(Error::Usage(
                "centering quadrature needs at least 2 points per axis".into(),
            ));
        }
        Ok(Centering {
            kernel: kernel.clone(),
            coarse: GaussLegendre::new(quad_points_per_axis),
            fine: GaussLegendre::new(2 * quad_points_per_axis),
        })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    /// `E f_{n,h}(t)`; independent of `n`. For the indicator kernel and a model with a
    /// closed-form box probability this is `κ P{X ∈ t + h^{1/d}[-1/2, 1/2]^d} / h`.
    pub fn eval(&self, model: &dyn Density, h: f64, t: &[f64]) -> Result<f64> {
        let d = self.kernel.dim();
        if self.kernel.is_indicator() && d <= 8 && t.len() == d && model.dim() == d {
            let s = window_side(h, d);
            let mut lo = [0.0f64; 8];
            let mut hi = [0.0f64; 8];
            for k in 0..d {
                lo[k] = t[k] - 0.5 * s;
                hi[k] = t[k] + 0.5 * s;
            }
            if let Some(p) = model.box_probability(&lo[..d], &hi[..d]) {
                return Ok(self.kernel.kappa() * p / h);
            }
        }
        self.eval_quadrature(model, h, t)
    }

    /// `E f_{n,h}(t)` by tensor Gauss-Legendre quadrature at two resolutions.
    pub fn eval_quadrature(&self, model: &dyn Density, h: f64, t: &[f64]) -> Result<f64> {
        let d = self.kernel.dim();
        if t.len() != d || model.dim() != d {
            return Err(Error::Dimension {
                expected: d,
                got: if t.len() != d { t.len() } else { model.dim() },
            });
        }
        let s = window_side(h, d);
        // integration box in kernel coordinates, clipped to the support of f when it is a box
        let mut lo = [-0.5f64; 8];
        let mut hi = [0.5f64; 8];
        let (lo, hi) = if d <= 8 {
            (&mut lo[..d], &mut hi[..d])
        } else {
            return self.eval_high_dim(model, s, t);
        };
        if let Some(sb) = model.support_box() {
            for k in 0..d {
                lo[k] = lo[k].max((sb.lo[k] - t[k]) / s);
                hi[k] = hi[k].min((sb.hi[k] - t[k]) / s);
                if hi[k] <= lo[k] {
                    return Ok(0.0);
                }
            }
        }
        let (coarse, fine) = if d == 1 {
            let g = |u: f64| self.kernel.eval_unchecked(&[u]) * model.pdf(&[t[0] + u * s]);
            (
                self.coarse.integrate(lo[0], hi[0], g),
                self.fine.integrate(lo[0], hi[0], g),
            )
        } else {
            let mut x = [0.0f64; 8];
            let mut g = |u: &[f64]| {
                for k in 0..d {
                    x[k] = t[k] + u[k] * s;
                }
                self.kernel.eval_unchecked(u) * model.pdf(&x[..d])
            };
            let c = self.coarse.integrate_box(lo, hi, &mut g);
            let f = self.fine.integrate_box(lo, hi, &mut g);
            (c, f)
        };
        check_agreement(coarse, fine)
    }

    fn eval_high_dim(&self, model: &dyn Density, s: f64, t: &[f64]) -> Result<f64> {
        let d = t.len();
        let lo = alloc::vec![-0.5; d];
        let hi = alloc::vec![0.5; d];
        let mut x: Vec<f64> = alloc::vec![0.0; d];
        let mut g = |u: &[f64]| {
            for k in 0..d {
                x[k] = t[k] + u[k] * s;
            }
            self.kernel.eval_unchecked(u) * model.pdf(&x)
        };
        let c = self.coarse.integrate_box(&lo, &hi, &mut g);
        let f = self.fine.integrate_box(&lo, &hi, &mut g);
        check_agreement(c, f)
    }
}

fn check_agreement(coarse: f64, fine: f64) -> Result<f64> {
    if !((coarse - fine).abs() <= CENTERING_TOL) {
        return Err(Error::Accuracy { coarse, fine });
    }
    Ok(fine)
}

/// `E f_{n,h}(t)` with `q` and `2q` Gauss-Legendre nodes per axis.
pub fn expected_kde(
    model: &dyn Density,
    kernel: &Kernel,
    h: f64,
    t: &[f64],
    quad_points_per_axis: usize,
) -> Result<f64> {
    check_bandwidth(h)?;
    if t.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("evaluation point is not finite".into()));
    }
    Centering::new(kernel, quad_points_per_axis)?.eval(model, h, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{normal_upper_tail, DensityModel};

    #[test]
    fn constant_density_window() {
        let m = DensityModel::uniform_box(alloc::vec![0.0], alloc::vec![1.0]).unwrap();
        let k = Kernel::uniform(1).unwrap();
        assert!((expected_kde(&m, &k, 0.1, &[0.5], 16).unwrap() - 1.0).abs() < 1e-14);
        // half of the window leaves B_f
        assert!((expected_kde(&m, &k, 0.1, &[0.0], 16).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn gaussian_matches_cdf_difference() {
        let m = DensityModel::gaussian(1).unwrap();
        let k = Kernel::uniform(1).unwrap();
        for h in [0.125, 0.03125, 0.0078125] {
            let got = expected_kde(&m, &k, h, &[0.3], 8).unwrap();
            let want = (normal_upper_tail(0.3 - h / 2.0) - normal_upper_tail(0.3 + h / 2.0)) / h;
            assert!((got - want).abs() < 1e-12, "h={h}: {got} vs {want}");
        }
    }

    #[test]
    fn closed_form_agrees_with_quadrature() {
        let k1 = Kernel::uniform(1).unwrap();
        let c1 = Centering::new(&k1, 16).unwrap();
        for m in [
            DensityModel::gaussian(1).unwrap(),
            DensityModel::laplace(0.7).unwrap(),
            DensityModel::cauchy(2.0).unwrap(),
        ] {
            for t in [-3.0, -0.01, 0.0, 0.4, 25.0] {
                let h = 0.05;
                let exact = c1.eval(&m, h, &[t]).unwrap();
                let quad = c1.eval_quadrature(&m, h, &[t]);
                // the laplace kink at 0 limits the quadrature near the origin
                if let Ok(q) = quad {
                    assert!((exact - q).abs() < 1e-6, "{} t={t}: {exact} vs {q}", m.name());
                }
            }
        }
        let k2 = Kernel::uniform(2).unwrap();
        let c2 = Centering::new(&k2, 8).unwrap();
        let g2 = DensityModel::gaussian(2).unwrap();
        let exact = c2.eval(&g2, 0.01, &[0.3, -1.2]).unwrap();
        let quad = c2.eval_quadrature(&g2, 0.01, &[0.3, -1.2]).unwrap();
        assert!((exact - quad).abs() < 1e-10);
    }

    #[test]
    fn dimension_errors() {
        let m = DensityModel::gaussian(2).unwrap();
        let k = Kernel::uniform(1).unwrap();
        assert!(matches!(
            expected_kde(&m, &k, 0.1, &[0.0], 8),
            Err(Error::Dimension { .. })
        ));
        assert!(expected_kde(&m, &k, 1.0, &[0.0], 8).is_err());
    }
}
