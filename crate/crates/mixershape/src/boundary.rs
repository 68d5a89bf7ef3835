//! Inner-boundary parameterization: truncated Fourier series over mode
//! coefficients, Sobolev norms, and the smooth radial clamp that keeps the
//! boundary inside a fixed annular band.

use std::f64::consts::TAU;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BoundaryError {
    #[error("coefficient vector length {0} must be even and at least 2")]
    BadDimension(usize),
    #[error("coefficient {index} is not finite")]
    NonFiniteCoefficient { index: usize },
    #[error("mean radius b0 = {0} is not finite")]
    NonFiniteMean(f64),
    #[error(
        "invalid clamp band: need 0 < r_min < r_max and 0 < epsilon < (r_max - r_min)/2, \
         got r_min = {r_min}, r_max = {r_max}, epsilon = {epsilon}"
    )]
    BadClampBand { r_min: f64, r_max: f64, epsilon: f64 },
}

/// Truncated Fourier description of the inner boundary perturbation.
///
/// Coefficients are ordered so that index 2k-1 multiplies cos(kx) and index
/// 2k multiplies sin(kx) for k = 1..K/2 (one-based, matching the usual
/// Karhunen-Loeve indexing). The fixed mean radius `b0` is carried alongside
/// the coefficients; the perturbation itself is mean-free.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryParams {
    coeffs: Vec<f64>,
    b0: f64,
}

impl BoundaryParams {
    pub fn new(coeffs: Vec<f64>, b0: f64) -> Result<Self, BoundaryError> {
        if coeffs.is_empty() || coeffs.len() % 2 != 0 {
            return Err(BoundaryError::BadDimension(coeffs.len()));
        }
        if let Some(index) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(BoundaryError::NonFiniteCoefficient { index });
        }
        if !b0.is_finite() {
            return Err(BoundaryError::NonFiniteMean(b0));
        }
        Ok(Self { coeffs, b0 })
    }

    /// Zero perturbation with the given dimension and mean radius.
    pub fn zero(dim: usize, b0: f64) -> Result<Self, BoundaryError> {
        Self::new(vec![0.0; dim], b0)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn b0(&self) -> f64 {
        self.b0
    }

    /// Number of coefficients K.
    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    /// Number of Fourier modes K/2.
    pub fn num_modes(&self) -> usize {
        self.coeffs.len() / 2
    }

    /// The mean-free perturbation b(x) = sum_k b_{2k-1} cos(kx) + b_{2k} sin(kx).
    ///
    /// `b0` is not included; use [`BoundaryParams::inner_radius`] for the
    /// clamped physical radius.
    pub fn eval_fourier(&self, x: f64) -> f64 {
        let mut sum = 0.0;
        for k in 1..=self.num_modes() {
            let kx = k as f64 * x;
            sum += self.coeffs[2 * k - 2] * kx.cos() + self.coeffs[2 * k - 1] * kx.sin();
        }
        sum
    }

    /// Squared Sobolev norm (1/2) sum_k k^{2s} (b_{2k-1}^2 + b_{2k}^2).
    pub fn sobolev_norm_sq(&self, s: f64) -> f64 {
        assert!(s >= 0.0, "Sobolev exponent must be nonnegative");
        let mut sum = 0.0;
        for k in 1..=self.num_modes() {
            let pair = self.coeffs[2 * k - 2].powi(2) + self.coeffs[2 * k - 1].powi(2);
            sum += (k as f64).powf(2.0 * s) * pair;
        }
        0.5 * sum
    }

    /// Clamped inner radius r(phi) = clamp(b0 + b(phi)).
    pub fn inner_radius(&self, clamp: &ClampParams, phi: f64) -> f64 {
        clamp.apply(self.b0 + self.eval_fourier(phi))
    }
}

/// Parameters of the C^1 radial clamp.
///
/// The clamp is the identity on [r_min + epsilon, r_max - epsilon], saturates
/// at r_min and r_max outside the band, and interpolates with quadratic
/// blends of half-width epsilon around each end.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClampParams {
    r_min: f64,
    r_max: f64,
    epsilon: f64,
}

impl ClampParams {
    pub fn new(r_min: f64, r_max: f64, epsilon: f64) -> Result<Self, BoundaryError> {
        let finite = r_min.is_finite() && r_max.is_finite() && epsilon.is_finite();
        let ordered = 0.0 < r_min && r_min < r_max;
        let band = 0.0 < epsilon && epsilon < 0.5 * (r_max - r_min);
        if !finite || !ordered || !band {
            return Err(BoundaryError::BadClampBand {
                r_min,
                r_max,
                epsilon,
            });
        }
        Ok(Self {
            r_min,
            r_max,
            epsilon,
        })
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// The five-branch clamp value at t.
    pub fn apply(&self, t: f64) -> f64 {
        let (rm, rx, eps) = (self.r_min, self.r_max, self.epsilon);
        if t <= rm - eps {
            rm
        } else if t < rm + eps {
            rm + (t - rm + eps).powi(2) / (4.0 * eps)
        } else if t <= rx - eps {
            t
        } else if t < rx + eps {
            rx - (t - rx - eps).powi(2) / (4.0 * eps)
        } else {
            rx
        }
    }
}

/// Periodic wrap of an angle into [0, 2*pi).
pub fn wrap_angle(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    if w == TAU {
        0.0
    } else {
        w
    }
}
