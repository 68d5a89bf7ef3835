//! Posterior summaries: convergence checks, shape quantiles, correlations.
//!
//! Everything here consumes plain sample collections (usually chain records
//! read back from CSV logs) and produces small tables ready for plotting.
//! Per-angle work parallelizes over disjoint output slots, so results are
//! identical across execution modes.

use std::io::{self, Write};

use thiserror::Error;

use crate::boundary::{BoundaryParams, ClampParams};
use crate::chain::ChainRecord;
use crate::exec::{self, Execution};

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("no data given")]
    Empty,
    #[error("chains must have equal, positive lengths")]
    LengthMismatch,
    #[error("potential scale reduction needs at least two chains")]
    TooFewChains,
    #[error("chains must contain at least two samples each")]
    TooShort,
    #[error("within-chain variance is zero, the scale reduction is undefined")]
    ZeroWithinVariance,
    #[error("probability must lie in [0, 1], got {0}")]
    InvalidProbability(f64),
    #[error("samples contain non-finite values")]
    NonFinite,
    #[error("coefficient rows must share one length")]
    RaggedRows,
    #[error("bad coefficient row: {0}")]
    BadRow(crate::boundary::BoundaryError),
}

/// Area enclosed by the clamped boundary curve, `int 0.5 r(phi)^2 dphi`,
/// by a 2048-point midpoint rule (spectrally accurate for these smooth,
/// periodic integrands).
pub fn enclosed_area(params: &BoundaryParams, clamp: &ClampParams) -> f64 {
    const N: usize = 2048;
    let delta = std::f64::consts::TAU / N as f64;
    let mut sum = 0.0;
    for i in 0..N {
        let phi = (i as f64 + 0.5) * delta;
        let r = params.inner_radius(clamp, phi);
        sum += 0.5 * r * r;
    }
    sum * delta
}

/// Potential scale reduction factor across chains of one scalar statistic.
///
/// With `m` chains of length `n`: `B = n/(m-1) sum_j (mean_j - mean)^2`,
/// `W = mean_j s_j^2`, and the returned value is
/// `sqrt(((n-1)/n W + B/n) / W)`. Identical chains give exactly
/// `sqrt((n-1)/n)`, slightly below one.
pub fn rhat(chains: &[Vec<f64>]) -> Result<f64, DiagnosticsError> {
    let m = chains.len();
    if m < 2 {
        return Err(DiagnosticsError::TooFewChains);
    }
    let n = chains[0].len();
    if chains.iter().any(|c| c.len() != n) {
        return Err(DiagnosticsError::LengthMismatch);
    }
    if n < 2 {
        return Err(DiagnosticsError::TooShort);
    }
    if chains.iter().flatten().any(|x| !x.is_finite()) {
        return Err(DiagnosticsError::NonFinite);
    }

    let nf = n as f64;
    let means: Vec<f64> = chains
        .iter()
        .map(|c| c.iter().sum::<f64>() / nf)
        .collect();
    let variances: Vec<f64> = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (nf - 1.0))
        .collect();
    let grand = means.iter().sum::<f64>() / m as f64;
    let b = nf / (m as f64 - 1.0)
        * means.iter().map(|mu| (mu - grand) * (mu - grand)).sum::<f64>();
    let w = variances.iter().sum::<f64>() / m as f64;
    if w <= 0.0 {
        return Err(DiagnosticsError::ZeroWithinVariance);
    }
    let var_plus = (nf - 1.0) / nf * w + b / nf;
    Ok((var_plus / w).sqrt())
}

/// Type-7 (linear interpolation) quantile of an ascending-sorted slice.
pub fn quantile_type7(sorted: &[f64], p: f64) -> Result<f64, DiagnosticsError> {
    if sorted.is_empty() {
        return Err(DiagnosticsError::Empty);
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(DiagnosticsError::InvalidProbability(p));
    }
    debug_assert!(sorted.windows(2).all(|w| w[0] <= w[1]));
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

/// Quantiles of an unsorted sample at several probabilities.
pub fn quantiles_of(values: &[f64], probs: &[f64]) -> Result<Vec<f64>, DiagnosticsError> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(DiagnosticsError::NonFinite);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    probs.iter().map(|&p| quantile_type7(&sorted, p)).collect()
}

/// Pearson correlation, or None when either margin is degenerate.
pub fn pearson_correlation(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        cov += dx * dy;
        vx += dx * dx;
        vy += dy * dy;
    }
    if vx <= 0.0 || vy <= 0.0 || !vx.is_finite() || !vy.is_finite() {
        return None;
    }
    Some((cov / (vx * vy).sqrt()).clamp(-1.0, 1.0))
}

/// Running mean of a series (entry t averages the first t + 1 values).
pub fn running_mean(series: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(series.len());
    let mut sum = 0.0;
    for (i, x) in series.iter().enumerate() {
        sum += x;
        out.push(sum / (i + 1) as f64);
    }
    out
}

/// One-degree angle grid over the full circle.
pub fn default_angles_deg() -> Vec<f64> {
    (0..360).map(|i| i as f64).collect()
}

/// The five standard summary probabilities.
pub fn default_probs() -> Vec<f64> {
    vec![0.05, 0.25, 0.5, 0.75, 0.95]
}

/// Turn raw coefficient rows into boundary parameter objects, rejecting
/// empty input and ragged or invalid rows.
pub fn build_params(rows: &[&[f64]], b0: f64) -> Result<Vec<BoundaryParams>, DiagnosticsError> {
    if rows.is_empty() {
        return Err(DiagnosticsError::Empty);
    }
    let dim = rows[0].len();
    if rows.iter().any(|r| r.len() != dim) {
        return Err(DiagnosticsError::RaggedRows);
    }
    rows.iter()
        .map(|r| BoundaryParams::new(r.to_vec(), b0).map_err(DiagnosticsError::BadRow))
        .collect()
}

/// Posterior radius samples per angle: entry `[a][s]` is the clamped radius
/// of sample `s` at angle `a`.
pub fn radius_matrix(
    rows: &[&[f64]],
    b0: f64,
    clamp: &ClampParams,
    angles_deg: &[f64],
    exec: Execution,
) -> Result<Vec<Vec<f64>>, DiagnosticsError> {
    let params = build_params(rows, b0)?;
    Ok(exec::map_indexed(exec, angles_deg.len(), |a| {
        let phi = angles_deg[a].to_radians();
        params.iter().map(|p| p.inner_radius(clamp, phi)).collect()
    }))
}

/// Quantile curves of the posterior radius, angle by angle.
#[derive(Clone, Debug, PartialEq)]
pub struct RadiusQuantiles {
    pub angles_deg: Vec<f64>,
    pub probs: Vec<f64>,
    /// Entry `[a][p]`: the probs\[p\] quantile of the radius at angle a.
    pub values: Vec<Vec<f64>>,
}

impl RadiusQuantiles {
    /// Long-format CSV: `angle_deg,prob,value`.
    pub fn write_csv(&self, w: &mut impl Write) -> io::Result<()> {
        writeln!(w, "angle_deg,prob,value")?;
        for (a, row) in self.angles_deg.iter().zip(&self.values) {
            for (p, v) in self.probs.iter().zip(row) {
                writeln!(w, "{a},{p},{v}")?;
            }
        }
        Ok(())
    }
}

pub fn radius_quantiles(
    rows: &[&[f64]],
    b0: f64,
    clamp: &ClampParams,
    angles_deg: &[f64],
    probs: &[f64],
    exec: Execution,
) -> Result<RadiusQuantiles, DiagnosticsError> {
    for &p in probs {
        if !(0.0..=1.0).contains(&p) {
            return Err(DiagnosticsError::InvalidProbability(p));
        }
    }
    let params = build_params(rows, b0)?;
    let values: Vec<Result<Vec<f64>, DiagnosticsError>> =
        exec::map_indexed(exec, angles_deg.len(), |a| {
            let phi = angles_deg[a].to_radians();
            let mut radii: Vec<f64> = params
                .iter()
                .map(|p| p.inner_radius(clamp, phi))
                .collect();
            radii.sort_by(f64::total_cmp);
            probs.iter().map(|&p| quantile_type7(&radii, p)).collect()
        });
    let mut out = Vec::with_capacity(values.len());
    for v in values {
        out.push(v?);
    }
    Ok(RadiusQuantiles {
        angles_deg: angles_deg.to_vec(),
        probs: probs.to_vec(),
        values: out,
    })
}

/// Correlations of the posterior radius between angles.
#[derive(Clone, Debug, PartialEq)]
pub struct RadiusCorrelations {
    pub base_angles_deg: Vec<f64>,
    pub lags_deg: Vec<f64>,
    /// Entry `[b][l]`: correlation of r(base_b) with r(base_b + lag_l);
    /// None where a margin is degenerate (for example fully clamped).
    pub values: Vec<Vec<Option<f64>>>,
}

impl RadiusCorrelations {
    /// Long-format CSV: `base_angle_deg,lag_deg,correlation` (nan when
    /// undefined).
    pub fn write_csv(&self, w: &mut impl Write) -> io::Result<()> {
        writeln!(w, "base_angle_deg,lag_deg,correlation")?;
        for (b, row) in self.base_angles_deg.iter().zip(&self.values) {
            for (l, v) in self.lags_deg.iter().zip(row) {
                match v {
                    Some(c) => writeln!(w, "{b},{l},{c}")?,
                    None => writeln!(w, "{b},{l},nan")?,
                }
            }
        }
        Ok(())
    }
}

pub fn radius_correlations(
    rows: &[&[f64]],
    b0: f64,
    clamp: &ClampParams,
    base_angles_deg: &[f64],
    lags_deg: &[f64],
    exec: Execution,
) -> Result<RadiusCorrelations, DiagnosticsError> {
    let params = build_params(rows, b0)?;
    let radii_at = |deg: f64| -> Vec<f64> {
        let phi = deg.to_radians();
        params.iter().map(|p| p.inner_radius(clamp, phi)).collect()
    };
    let base_radii: Vec<Vec<f64>> = base_angles_deg.iter().map(|&b| radii_at(b)).collect();

    let n_lags = lags_deg.len();
    let flat: Vec<Option<f64>> =
        exec::map_indexed(exec, base_angles_deg.len() * n_lags, |idx| {
            let b = idx / n_lags;
            let l = idx % n_lags;
            let lagged = radii_at(base_angles_deg[b] + lags_deg[l]);
            pearson_correlation(&base_radii[b], &lagged)
        });
    let values = flat
        .chunks(n_lags)
        .map(|c| c.to_vec())
        .collect();
    Ok(RadiusCorrelations {
        base_angles_deg: base_angles_deg.to_vec(),
        lags_deg: lags_deg.to_vec(),
        values,
    })
}

/// Quantiles of each observation component over a set of records.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationQuantiles {
    pub probs: Vec<f64>,
    /// Entry `[c][p]`: the probs\[p\] quantile of observation component c.
    pub values: Vec<Vec<f64>>,
}

impl ObservationQuantiles {
    /// Long-format CSV: `component,prob,value` (components one-based).
    pub fn write_csv(&self, w: &mut impl Write) -> io::Result<()> {
        writeln!(w, "component,prob,value")?;
        for (c, row) in self.values.iter().enumerate() {
            for (p, v) in self.probs.iter().zip(row) {
                writeln!(w, "{},{p},{v}", c + 1)?;
            }
        }
        Ok(())
    }
}

pub fn observation_quantiles(
    records: &[ChainRecord],
    probs: &[f64],
) -> Result<ObservationQuantiles, DiagnosticsError> {
    if records.is_empty() {
        return Err(DiagnosticsError::Empty);
    }
    let n_obs = records[0].observed.len();
    if records.iter().any(|r| r.observed.len() != n_obs) {
        return Err(DiagnosticsError::RaggedRows);
    }
    let mut values = Vec::with_capacity(n_obs);
    for c in 0..n_obs {
        let series: Vec<f64> = records.iter().map(|r| r.observed[c]).collect();
        values.push(quantiles_of(&series, probs)?);
    }
    Ok(ObservationQuantiles {
        probs: probs.to_vec(),
        values,
    })
}
