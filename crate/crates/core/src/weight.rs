//! Weight functions `ψ` on the positivity set.

// float methods come from the trait under no_std and are inherent when std is linked
use alloc::format;
use alloc::string::String;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Density;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    /// `ψ = f^{-β}`.
    InverseDensityPower,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "shape")]
pub enum WeightShape {
    /// `ψ = scale · f^{-β}`.
    InverseDensityPower { scale: f64 },
    /// `ψ ≡ value`.
    Constant { value: f64 },
}

/// A positive weight `ψ` paired with the exponent `β ∈ (0, 1/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightFunction {
    beta: f64,
    shape: WeightShape,
}

impl WeightFunction {
    /// `ψ = f^{-β}`.
    pub fn inverse_density(beta: f64) -> Result<Self> {
        WeightFunction::new(beta, WeightShape::InverseDensityPower { scale: 1.0 })
    }

    pub fn new(beta: f64, shape: WeightShape) -> Result<Self> {
        if !(beta > 0.0 && beta < 0.5) {
            return Err(Error::Domain(format!("beta must lie in (0, 1/2), got {beta}")));
        }
        let factor = match shape {
            WeightShape::InverseDensityPower { scale } => scale,
            WeightShape::Constant { value } => value,
        };
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::Domain(format!("weight must be positive, got factor {factor}")));
        }
        Ok(WeightFunction { beta, shape })
    }

    /// Parses `inverse-density` or `constant`, with a positive factor.
    pub fn parse(kind: &str, beta: f64, factor: f64) -> Result<Self> {
        let shape = match kind.trim().to_ascii_lowercase().as_str() {
            "inverse-density" | "inverse-density-power" => WeightShape::InverseDensityPower { scale: factor },
            "constant" => WeightShape::Constant { value: factor },
            other => {
                return Err(Error::Config(format!(
                    "unknown weight '{other}' (expected inverse-density or constant)"
                )))
            }
        };
        WeightFunction::new(beta, shape)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn shape(&self) -> WeightShape {
        self.shape
    }

    pub fn mode(&self) -> WeightMode {
        match self.shape {
            WeightShape::InverseDensityPower { scale: 1.0 } => WeightMode::InverseDensityPower,
            _ => WeightMode::Custom,
        }
    }

    pub fn describe(&self) -> String {
        match self.shape {
            WeightShape::InverseDensityPower { scale } => format!("{scale}*f^-{}", self.beta),
            WeightShape::Constant { value } => format!("constant {value} (beta {})", self.beta),
        }
    }

    /// `ψ(t)` given `f(t) > 0`.
    #[inline]
    pub fn at_density(&self, f: f64) -> f64 {
        match self.shape {
            WeightShape::InverseDensityPower { scale } => scale / f.powf(self.beta),
            WeightShape::Constant { value } => value,
        }
    }

    /// `ψ(t)`; `None` outside `B_f`.
    pub fn eval(&self, model: &dyn Density, t: &[f64]) -> Option<f64> {
        if !model.in_positivity_set(t) {
            return None;
        }
        let f = model.pdf(t);
        if f <= 0.0 {
            return None;
        }
        Some(self.at_density(f))
    }

    /// `f^β ψ` at a point with density `f`.
    pub fn weighted_density(&self, f: f64) -> f64 {
        f.powf(self.beta) * self.at_density(f)
    }

    /// `‖f^β ψ‖∞`. For `ψ = c·f^{-β}` the product is identically `c` on `B_f`; a constant
    /// weight gives `c·‖f‖∞^β`.
    pub fn wd_bound(&self, model: &dyn Density) -> f64 {
        match self.shape {
            WeightShape::InverseDensityPower { scale } => scale,
            WeightShape::Constant { value } => value * model.sup_pdf().powf(self.beta),
        }
    }

    /// Largest `ψ` value for which `P{ψ(X) > λ}` reduces to a density tail, and that tail.
    /// Returns `None` when the model has no closed-form tail.
    pub fn analytic_exceedance(&self, model: &dyn Density, lambda: f64) -> Option<f64> {
        match self.shape {
            WeightShape::InverseDensityPower { scale } => {
                // scale f^{-β} > λ  ⟺  f < (λ/scale)^{-1/β}
                let s = (lambda / scale).powf(-1.0 / self.beta);
                model.prob_density_below(s)
            }
            WeightShape::Constant { value } => Some(if value > lambda { 1.0 } else { 0.0 }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DensityModel;

    #[test]
    fn beta_range_enforced() {
        assert!(WeightFunction::inverse_density(0.0).is_err());
        assert!(WeightFunction::inverse_density(0.5).is_err());
        assert!(WeightFunction::inverse_density(0.25).is_ok());
        assert!(WeightFunction::new(0.25, WeightShape::Constant { value: -1.0 }).is_err());
    }

    #[test]
    fn inverse_density_normalization() {
        let m = DensityModel::gaussian(1).unwrap();
        let w = WeightFunction::inverse_density(0.25).unwrap();
        assert_eq!(w.wd_bound(&m), 1.0);
        for i in 0..=200 {
            let t = -5.0 + 0.05 * i as f64;
            let f = m.pdf(&[t]);
            assert!((w.weighted_density(f) - 1.0).abs() < 1e-12);
            assert!(w.eval(&m, &[t]).unwrap() > 0.0);
        }
    }

    #[test]
    fn outside_positivity_set_has_no_weight() {
        let m = DensityModel::uniform_box(alloc::vec![0.0], alloc::vec![1.0]).unwrap();
        let w = WeightFunction::inverse_density(0.1).unwrap();
        assert!(w.eval(&m, &[1.5]).is_none());
        assert!(w.eval(&m, &[0.0]).is_none());
        assert_eq!(w.eval(&m, &[0.5]), Some(1.0));
    }
}
