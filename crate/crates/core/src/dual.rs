//! Dual activations and the fully connected NTK scalar recursion.
//!
//! For an activation `phi` normalized so that `E[phi(u)^2] = 1/c^2` under a
//! standard Gaussian, the dual activation is
//! `dual(xi) = c^2 E[phi(u) phi(v)]` where `(u, v)` are standard Gaussians with
//! correlation `xi`. Because the activations here are positively homogeneous
//! of degree one, every covariance that appears in the kernel recursions can
//! be rescaled onto this unit-variance form.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Arguments within this distance outside `[-1, 1]` are clamped rather than
/// rejected. Gram entries of unit vectors routinely overshoot by a few ulps.
pub const CLAMP_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Relu,
    LeakyRelu { slope: f64 },
    Linear,
}

impl Activation {
    pub fn leaky_relu(slope: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&slope) {
            return Err(Error::InvalidParameter(format!(
                "leaky_relu slope must lie in [0, 1), got {slope}"
            )));
        }
        Ok(Activation::LeakyRelu { slope })
    }

    /// Evaluates the activation itself (used by finite-width checks).
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu { slope } => {
                if x > 0.0 {
                    x
                } else {
                    slope * x
                }
            }
            Activation::Linear => x,
        }
    }

    /// Derivative of the activation, taking the right-hand value at 0.
    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu { slope } => {
                if x > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Linear => 1.0,
        }
    }

    /// The constant `c^2 = 1 / E[phi(u)^2]`.
    pub fn scale_squared(&self) -> f64 {
        match *self {
            Activation::Relu => 2.0,
            Activation::LeakyRelu { slope } => 2.0 / (1.0 + slope * slope),
            Activation::Linear => 1.0,
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Activation::Relu => write!(f, "relu"),
            Activation::LeakyRelu { slope } => write!(f, "leaky_relu slope={slope}"),
            Activation::Linear => write!(f, "linear"),
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("relu") {
            return Ok(Activation::Relu);
        }
        if s.eq_ignore_ascii_case("linear") {
            return Ok(Activation::Linear);
        }
        if let Some(rest) = s.strip_prefix("leaky_relu") {
            let rest = rest.trim().trim_start_matches(':');
            let slope = match rest.trim() {
                "" => 0.01,
                word => {
                    let v = word.strip_prefix("slope=").unwrap_or(word);
                    v.parse::<f64>().map_err(|_| {
                        Error::InvalidParameter(format!("bad leaky_relu slope `{v}`"))
                    })?
                }
            };
            return Activation::leaky_relu(slope);
        }
        Err(Error::InvalidParameter(format!("unknown activation `{s}`")))
    }
}

pub(crate) fn clamp_unit(xi: f64) -> Result<f64> {
    if xi.is_nan() || xi.abs() > 1.0 + CLAMP_TOLERANCE {
        return Err(Error::Domain { value: xi });
    }
    Ok(xi.clamp(-1.0, 1.0))
}

fn relu_dual(xi: f64) -> f64 {
    (xi * (PI - xi.acos()) + (1.0 - xi * xi).max(0.0).sqrt()) / PI
}

fn relu_dual_derivative(xi: f64) -> f64 {
    (PI - xi.acos()) / PI
}

/// Dual activation evaluated at correlation `xi`.
pub fn dual(act: Activation, xi: f64) -> Result<f64> {
    let xi = clamp_unit(xi)?;
    Ok(match act {
        Activation::Relu => relu_dual(xi),
        // phi = (1 - a) relu + a id, expanded by bilinearity of the Gaussian
        // expectation and renormalized so that dual(1) = 1.
        Activation::LeakyRelu { slope: a } => {
            ((1.0 - a) * (1.0 - a) * relu_dual(xi) + 2.0 * a * xi) / (1.0 + a * a)
        }
        Activation::Linear => xi,
    })
}

/// Derivative of the dual activation with respect to the correlation.
pub fn dual_derivative(act: Activation, xi: f64) -> Result<f64> {
    let xi = clamp_unit(xi)?;
    Ok(match act {
        Activation::Relu => relu_dual_derivative(xi),
        Activation::LeakyRelu { slope: a } => {
            ((1.0 - a) * (1.0 - a) * relu_dual_derivative(xi) + 2.0 * a) / (1.0 + a * a)
        }
        Activation::Linear => 1.0,
    })
}

/// `h`-fold composition of the dual activation; `h = 0` is the identity.
pub fn iterated_dual(act: Activation, h: usize, xi: f64) -> Result<f64> {
    let mut value = clamp_unit(xi)?;
    for _ in 0..h {
        value = dual(act, value)?;
    }
    Ok(value)
}

/// Depth-`d` NTK scalar: `kappa_d = dual^(d) + kappa_{d-1} * dual'(dual^(d-1))`
/// with `kappa_0(xi) = xi`.
pub fn kappa(act: Activation, d: usize, xi: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidParameter("depth must be at least 1".into()));
    }
    let xi = clamp_unit(xi)?;
    let mut composed = xi;
    let mut k = xi;
    for _ in 0..d {
        let next = dual(act, composed)?;
        k = next + k * dual_derivative(act, composed)?;
        composed = next;
    }
    Ok(k)
}
