//! Preconditioned Crank-Nicolson sampling of the boundary posterior.
//!
//! The unknown is the vector of Fourier coefficients with the Gaussian
//! prior `b_{2k-1}, b_{2k} ~ N(0, k^(-2s-1))`. Proposals blend the current
//! state with a fresh prior draw, `b' = rho b + sqrt(1 - rho^2) xi`, and are
//! accepted with probability `min(1, exp(phi(b) - phi(b')))` where `phi` is
//! the data misfit. This leaves the prior invariant for any forward model,
//! so a prior-only run doubles as a sampler self-test.
//!
//! The step size `1 - rho` adapts every hundred steps toward a target
//! acceptance rate, with a clip window that narrows as the run progresses so
//! the chain becomes asymptotically homogeneous. Every step consumes the
//! same generator quantity (one normal per coefficient, then one uniform)
//! whether or not the proposal survives, which keeps runs reproducible and
//! resumable from checkpoints.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::boundary::{BoundaryError, BoundaryParams};
use crate::chain::{Chain, ChainError, ChainRecord, Checkpoint};
use crate::exec::{self, Execution};

/// A forward evaluation failed; the proposal that caused it is rejected.
#[derive(Clone, Debug, Error)]
#[error("{message}")]
pub struct ForwardFailure {
    message: String,
}

impl ForwardFailure {
    pub fn new(message: impl Into<String>) -> Self {
        ForwardFailure {
            message: message.into(),
        }
    }

    pub fn message(&self) -> &str {
        &self.message
    }
}

/// Anything that maps boundary coefficients to a measurement vector.
///
/// Implementations must be usable from several chains at once.
pub trait ForwardModel: Sync {
    fn evaluate(&self, params: &BoundaryParams) -> Result<Vec<f64>, ForwardFailure>;

    /// Length of the vectors `evaluate` returns.
    fn output_len(&self) -> usize;
}

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("prior specification: {0}")]
    BadPrior(String),
    #[error("likelihood specification: {0}")]
    BadLikelihood(String),
    #[error("observation length {got} does not match data length {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("initial forward evaluation failed: {0}")]
    InitialForward(#[from] ForwardFailure),
    #[error("boundary parameters rejected: {0}")]
    BadBoundary(#[from] BoundaryError),
    #[error("chain storage: {0}")]
    Chain(#[from] ChainError),
    #[error("run options: {0}")]
    BadRunOptions(String),
}

/// The Gaussian prior on Fourier coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PriorSpec {
    /// Number of coefficients (pairs of cosine and sine modes).
    pub dim: usize,
    /// Smoothness exponent; mode k has standard deviation k^-(s + 1/2).
    pub s: f64,
}

impl PriorSpec {
    pub fn new(dim: usize, s: f64) -> Result<Self, InferenceError> {
        if dim < 2 || dim % 2 != 0 {
            return Err(InferenceError::BadPrior(format!(
                "dimension must be a positive even number, got {dim}"
            )));
        }
        if !(s.is_finite() && s > 0.5) {
            return Err(InferenceError::BadPrior(format!(
                "smoothness must exceed 1/2, got {s}"
            )));
        }
        Ok(PriorSpec { dim, s })
    }

    /// Standard deviation of coefficient `index` (zero-based: index 2k-2 is
    /// cos(k x), index 2k-1 is sin(k x)).
    pub fn mode_std(&self, index: usize) -> f64 {
        let k = (index / 2 + 1) as f64;
        k.powf(-(self.s + 0.5))
    }

    /// Draw an independent coefficient vector from the prior.
    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        (0..self.dim)
            .map(|i| {
                let z: f64 = StandardNormal.sample(rng);
                self.mode_std(i) * z
            })
            .collect()
    }
}

/// Independent Gaussian observation noise with one shared scale.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianLikelihood {
    data: Vec<f64>,
    sigma: f64,
}

impl GaussianLikelihood {
    pub fn new(data: Vec<f64>, sigma: f64) -> Result<Self, InferenceError> {
        if data.is_empty() {
            return Err(InferenceError::BadLikelihood("no data given".into()));
        }
        if data.iter().any(|y| !y.is_finite()) {
            return Err(InferenceError::BadLikelihood(
                "data must be finite".into(),
            ));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(InferenceError::BadLikelihood(format!(
                "noise scale must be positive, got {sigma}"
            )));
        }
        Ok(GaussianLikelihood { data, sigma })
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Data misfit `0.5 sum ((y_i - g_i) / sigma)^2`.
    pub fn misfit(&self, predicted: &[f64]) -> Result<f64, InferenceError> {
        if predicted.len() != self.data.len() {
            return Err(InferenceError::DimensionMismatch {
                expected: self.data.len(),
                got: predicted.len(),
            });
        }
        Ok(self
            .data
            .iter()
            .zip(predicted)
            .map(|(y, g)| {
                let r = (y - g) / self.sigma;
                0.5 * r * r
            })
            .sum())
    }
}

/// What the chain targets: the prior itself, or the posterior given data.
#[derive(Clone, Debug, PartialEq)]
pub enum TargetDensity {
    /// Misfit identically zero; the forward model is never called.
    PriorOnly,
    Posterior(GaussianLikelihood),
}

/// Acceptance probability of a pCN move, `min(1, exp(phi_old - phi_new))`.
pub fn pcn_acceptance_probability(phi_current: f64, phi_proposed: f64) -> f64 {
    (phi_current - phi_proposed).exp().min(1.0)
}

/// Step-size adaptation settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PcnOptions {
    pub rho_init: f64,
    pub adapt: bool,
    /// Steps between adaptations (also the acceptance window length).
    pub adapt_interval: u64,
    pub target_acceptance: f64,
    /// Gain of the multiplicative update `exp(gain * (rate - target))`.
    pub gain: f64,
    pub rho_min: f64,
    pub rho_max: f64,
}

impl Default for PcnOptions {
    fn default() -> Self {
        PcnOptions {
            rho_init: 0.9,
            adapt: true,
            adapt_interval: 100,
            target_acceptance: 0.23,
            gain: 2.0,
            rho_min: 0.1,
            rho_max: 0.99999,
        }
    }
}

impl PcnOptions {
    fn validate(&self) -> Result<(), InferenceError> {
        let ok = self.rho_min > 0.0
            && self.rho_min <= self.rho_max
            && self.rho_max < 1.0
            && (self.rho_min..=self.rho_max).contains(&self.rho_init)
            && self.adapt_interval >= 1
            && (0.0..1.0).contains(&self.target_acceptance)
            && self.gain.is_finite()
            && self.gain > 0.0;
        if ok {
            Ok(())
        } else {
            Err(InferenceError::BadRunOptions(format!(
                "inconsistent pCN options: {self:?}"
            )))
        }
    }
}

/// One adaptation of the correlation parameter.
///
/// The step size `1 - rho` is scaled by `exp(gain * (rate - target))`,
/// clipped to `[0.5 + 0.5 p, 2 - p]` where `p` is the run progress in
/// [0, 1]. The clip window collapses to 1 as `p -> 1`, so late adaptations
/// vanish and the chain becomes homogeneous.
pub fn adapt_rho(window: &[bool], rho: f64, progress: f64, opts: &PcnOptions) -> f64 {
    if window.is_empty() {
        return rho;
    }
    let rate = window.iter().filter(|a| **a).count() as f64 / window.len() as f64;
    let p = progress.clamp(0.0, 1.0);
    let raw = (opts.gain * (rate - opts.target_acceptance)).exp();
    let factor = raw.clamp(0.5 + 0.5 * p, 2.0 - p);
    let step = (1.0 - rho) * factor;
    (1.0 - step).clamp(opts.rho_min, opts.rho_max)
}

/// How a fresh chain chooses its first state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ChainInit {
    /// Draw the initial coefficients from the prior.
    #[default]
    Prior,
    /// Start from the zero vector (the concentric reference shape).
    Zero,
}

/// Mutable state of one running chain.
#[derive(Clone, Debug)]
pub struct ChainState {
    pub step: u64,
    pub coeffs: Vec<f64>,
    /// Forward observation of the current state (empty in prior-only runs).
    pub observed: Vec<f64>,
    pub phi: f64,
    pub rho: f64,
    pub total_accepted: u64,
    window: Vec<bool>,
    rng: ChaCha8Rng,
    seed: u64,
    stream: u64,
}

impl ChainState {
    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            step: self.step,
            rho: self.rho,
            phi: self.phi,
            total_accepted: self.total_accepted,
            seed: self.seed,
            stream: self.stream,
            word_pos: self.rng.get_word_pos(),
            window: self.window.clone(),
            observed: self.observed.clone(),
            coeffs: self.coeffs.clone(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> ChainState {
        let mut rng = ChaCha8Rng::seed_from_u64(ck.seed);
        rng.set_stream(ck.stream);
        rng.set_word_pos(ck.word_pos);
        ChainState {
            step: ck.step,
            coeffs: ck.coeffs.clone(),
            observed: ck.observed.clone(),
            phi: ck.phi,
            rho: ck.rho,
            total_accepted: ck.total_accepted,
            window: ck.window.clone(),
            rng,
            seed: ck.seed,
            stream: ck.stream,
        }
    }

    fn record(&self, accepted: bool) -> ChainRecord {
        ChainRecord {
            step: self.step,
            accepted,
            rho: self.rho,
            phi: self.phi,
            observed: self.observed.clone(),
            coeffs: self.coeffs.clone(),
        }
    }
}

/// File and length settings for one chain run.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub n_samples: u64,
    pub seed: u64,
    /// Generator stream; give each parallel chain its own.
    pub stream: u64,
    pub init: ChainInit,
    /// Steps between checkpoints; zero disables periodic checkpoints.
    pub checkpoint_every: u64,
    pub csv_path: Option<PathBuf>,
    pub checkpoint_path: Option<PathBuf>,
    /// Resume from `checkpoint_path` when it exists.
    pub resume: bool,
    /// Collect records in memory (in addition to any CSV log).
    pub keep_records: bool,
    /// Stop after this many steps of the current invocation; used to
    /// exercise crash recovery in tests.
    pub halt_after: Option<u64>,
    /// Steps between progress log lines; zero disables them.
    pub log_every: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            n_samples: 2000,
            seed: 1,
            stream: 0,
            init: ChainInit::Prior,
            checkpoint_every: 500,
            csv_path: None,
            checkpoint_path: None,
            resume: false,
            keep_records: true,
            halt_after: None,
            log_every: 0,
        }
    }
}

/// Summary of a finished (or halted) run.
#[derive(Clone, Debug)]
pub struct ChainRun {
    /// Steps taken over the whole chain history, including resumed parts.
    pub steps_completed: u64,
    pub n_samples: u64,
    pub total_accepted: u64,
    pub final_rho: f64,
    pub final_phi: f64,
    pub final_coeffs: Vec<f64>,
    /// Records gathered during this invocation, when requested.
    pub chain: Option<Chain>,
}

impl ChainRun {
    /// Acceptance rate over the whole chain history.
    pub fn acceptance_rate(&self) -> f64 {
        if self.steps_completed == 0 {
            0.0
        } else {
            self.total_accepted as f64 / self.steps_completed as f64
        }
    }
}

/// A pCN sampler bound to a forward model.
pub struct Sampler<'a, F: ForwardModel + ?Sized> {
    forward: &'a F,
    prior: PriorSpec,
    b0: f64,
    target: TargetDensity,
    pcn: PcnOptions,
}

impl<'a, F: ForwardModel + ?Sized> Sampler<'a, F> {
    pub fn new(
        forward: &'a F,
        prior: PriorSpec,
        b0: f64,
        target: TargetDensity,
        pcn: PcnOptions,
    ) -> Result<Self, InferenceError> {
        pcn.validate()?;
        if !b0.is_finite() {
            return Err(InferenceError::BadPrior(format!(
                "mean radius must be finite, got {b0}"
            )));
        }
        if let TargetDensity::Posterior(lik) = &target {
            let out = forward.output_len();
            if lik.data().len() != out {
                return Err(InferenceError::DimensionMismatch {
                    expected: lik.data().len(),
                    got: out,
                });
            }
        }
        Ok(Sampler {
            forward,
            prior,
            b0,
            target,
            pcn,
        })
    }

    pub fn prior(&self) -> &PriorSpec {
        &self.prior
    }

    /// Misfit and observation of a coefficient vector. The initial state
    /// must evaluate cleanly; later failures only reject proposals.
    fn target_at(&self, coeffs: &[f64]) -> Result<(f64, Vec<f64>), InferenceError> {
        match &self.target {
            TargetDensity::PriorOnly => Ok((0.0, Vec::new())),
            TargetDensity::Posterior(lik) => {
                let params = BoundaryParams::new(coeffs.to_vec(), self.b0)?;
                let values = self.forward.evaluate(&params)?;
                let phi = lik.misfit(&values)?;
                Ok((phi, values))
            }
        }
    }

    /// Build the state a fresh chain starts from (step zero).
    pub fn init_state(
        &self,
        seed: u64,
        stream: u64,
        init: ChainInit,
    ) -> Result<ChainState, InferenceError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let coeffs = match init {
            ChainInit::Prior => self.prior.sample(&mut rng),
            ChainInit::Zero => vec![0.0; self.prior.dim],
        };
        let (phi, observed) = self.target_at(&coeffs)?;
        Ok(ChainState {
            step: 0,
            coeffs,
            observed,
            phi,
            rho: self.pcn.rho_init,
            total_accepted: 0,
            window: Vec::with_capacity(self.pcn.adapt_interval as usize),
            rng,
            seed,
            stream,
        })
    }

    /// Advance the chain by one step. `progress` is the fraction of the run
    /// completed after this step; it shapes the adaptation clip window.
    ///
    /// Returns whether the proposal was accepted. The generator use per step
    /// is fixed (one normal per coefficient, then one uniform), independent
    /// of the outcome.
    pub fn step(&self, state: &mut ChainState, progress: f64) -> Result<bool, InferenceError> {
        let rho = state.rho;
        let spread = (1.0 - rho * rho).sqrt();
        let mut proposal = Vec::with_capacity(self.prior.dim);
        for i in 0..self.prior.dim {
            let z: f64 = StandardNormal.sample(&mut state.rng);
            proposal.push(rho * state.coeffs[i] + spread * self.prior.mode_std(i) * z);
        }
        let u: f64 = state.rng.random();

        let evaluated = match &self.target {
            TargetDensity::PriorOnly => Some((0.0, Vec::new())),
            TargetDensity::Posterior(lik) => match BoundaryParams::new(proposal.clone(), self.b0)
            {
                Err(err) => {
                    log::warn!(
                        "step {}: proposal rejected before the forward solve: {err}",
                        state.step + 1
                    );
                    None
                }
                Ok(params) => match self.forward.evaluate(&params) {
                    Ok(values) => {
                        let phi = lik.misfit(&values)?;
                        Some((phi, values))
                    }
                    Err(failure) => {
                        log::warn!(
                            "step {}: forward model failed ({failure}); rejecting proposal",
                            state.step + 1
                        );
                        None
                    }
                },
            },
        };

        let accepted = match evaluated {
            None => false,
            Some((phi_new, observed_new)) => {
                if u < pcn_acceptance_probability(state.phi, phi_new) {
                    state.coeffs = proposal;
                    state.phi = phi_new;
                    state.observed = observed_new;
                    state.total_accepted += 1;
                    true
                } else {
                    false
                }
            }
        };

        state.step += 1;
        state.window.push(accepted);
        if state.window.len() as u64 == self.pcn.adapt_interval {
            if self.pcn.adapt {
                state.rho = adapt_rho(&state.window, state.rho, progress, &self.pcn);
            }
            state.window.clear();
        }
        Ok(accepted)
    }

    /// Run (or resume) one chain to `opts.n_samples` steps.
    pub fn run(&self, opts: &RunOptions) -> Result<ChainRun, InferenceError> {
        use std::fs::{File, OpenOptions};
        use std::io::{BufWriter, Write};

        if opts.n_samples == 0 {
            return Err(InferenceError::BadRunOptions(
                "a run needs at least one step".into(),
            ));
        }

        let mut resumed = false;
        let mut state = if opts.resume {
            match &opts.checkpoint_path {
                Some(path) if path.exists() => {
                    let ck = Checkpoint::read(path)?;
                    if ck.coeffs.len() != self.prior.dim {
                        return Err(InferenceError::BadRunOptions(format!(
                            "checkpoint has {} coefficients but the prior has {}",
                            ck.coeffs.len(),
                            self.prior.dim
                        )));
                    }
                    resumed = true;
                    log::info!(
                        "resuming from {} at step {}",
                        path.display(),
                        ck.step
                    );
                    ChainState::from_checkpoint(&ck)
                }
                _ => self.init_state(opts.seed, opts.stream, opts.init)?,
            }
        } else {
            self.init_state(opts.seed, opts.stream, opts.init)?
        };

        let mut csv = match &opts.csv_path {
            Some(path) => {
                if resumed && path.exists() {
                    crate::chain::truncate_csv(path, state.step).map_err(InferenceError::Chain)?;
                    let file = OpenOptions::new()
                        .append(true)
                        .open(path)
                        .map_err(ChainError::Io)?;
                    Some(BufWriter::new(file))
                } else {
                    let mut w = BufWriter::new(File::create(path).map_err(ChainError::Io)?);
                    writeln!(
                        w,
                        "{}",
                        crate::chain::csv_header(state.observed.len(), state.coeffs.len())
                    )
                    .map_err(ChainError::Io)?;
                    writeln!(w, "{}", state.record(true).to_csv_row()).map_err(ChainError::Io)?;
                    Some(w)
                }
            }
            None => None,
        };

        let mut records = Vec::new();
        if opts.keep_records && !resumed {
            records.push(state.record(true));
        }

        let mut executed: u64 = 0;
        let total = opts.n_samples;
        while state.step < total {
            let t = state.step + 1;
            let progress = t as f64 / total as f64;
            let accepted = self.step(&mut state, progress)?;
            let record = state.record(accepted);
            if let Some(w) = csv.as_mut() {
                writeln!(w, "{}", record.to_csv_row()).map_err(ChainError::Io)?;
            }
            if opts.keep_records {
                records.push(record);
            }
            executed += 1;

            let at_checkpoint =
                opts.checkpoint_every > 0 && state.step % opts.checkpoint_every == 0;
            if at_checkpoint {
                if let Some(path) = &opts.checkpoint_path {
                    // The log must never lag behind the checkpoint it will
                    // be truncated against on resume.
                    if let Some(w) = csv.as_mut() {
                        w.flush().map_err(ChainError::Io)?;
                    }
                    state.to_checkpoint().write(path)?;
                }
            }
            if opts.log_every > 0 && state.step % opts.log_every == 0 {
                log::info!(
                    "stream {}: step {}/{} acceptance {:.3} rho {:.5}",
                    opts.stream,
                    state.step,
                    total,
                    state.total_accepted as f64 / state.step as f64,
                    state.rho
                );
            }
            if opts.halt_after == Some(executed) {
                break;
            }
        }

        if let Some(w) = csv.as_mut() {
            w.flush().map_err(ChainError::Io)?;
        }
        if state.step == total {
            if let Some(path) = &opts.checkpoint_path {
                state.to_checkpoint().write(path)?;
            }
        }

        Ok(ChainRun {
            steps_completed: state.step,
            n_samples: total,
            total_accepted: state.total_accepted,
            final_rho: state.rho,
            final_phi: state.phi,
            final_coeffs: state.coeffs,
            chain: if opts.keep_records {
                Some(Chain { records })
            } else {
                None
            },
        })
    }

    /// Run several chains, optionally in parallel. Outputs are identical
    /// across execution modes because each chain owns its generator stream
    /// and its files.
    pub fn run_many(
        &self,
        runs: &[RunOptions],
        exec: Execution,
    ) -> Result<Vec<ChainRun>, InferenceError> {
        let results = exec::map_indexed(exec, runs.len(), |i| self.run(&runs[i]));
        let mut out = Vec::with_capacity(results.len());
        for r in results {
            out.push(r?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::sync::atomic::{AtomicU64, Ordering};

    /// Forward model `g(b) = b` restricted to the first component, with an
    /// evaluation counter and an optional failure region.
    struct LinearProbe {
        calls: AtomicU64,
        fail_above: f64,
    }

    impl LinearProbe {
        fn new() -> Self {
            LinearProbe {
                calls: AtomicU64::new(0),
                fail_above: f64::INFINITY,
            }
        }
    }

    impl ForwardModel for LinearProbe {
        fn evaluate(&self, params: &BoundaryParams) -> Result<Vec<f64>, ForwardFailure> {
            self.calls.fetch_add(1, Ordering::Relaxed);
            let b1 = params.coeffs()[0];
            if b1 > self.fail_above {
                return Err(ForwardFailure::new("probe failure region"));
            }
            Ok(vec![b1])
        }

        fn output_len(&self) -> usize {
            1
        }
    }

    fn posterior_target(y: f64, sigma: f64) -> TargetDensity {
        TargetDensity::Posterior(GaussianLikelihood::new(vec![y], sigma).unwrap())
    }

    #[test]
    fn prior_mode_scales_follow_the_power_law() {
        let prior = PriorSpec::new(6, 1.25).unwrap();
        assert_eq!(prior.mode_std(0), 1.0);
        assert_eq!(prior.mode_std(1), 1.0);
        let v2 = prior.mode_std(2) * prior.mode_std(2);
        assert_relative_eq!(v2, 2f64.powf(-3.5), max_relative = 1e-14);
        assert_relative_eq!(
            prior.mode_std(4),
            3f64.powf(-1.75),
            max_relative = 1e-14
        );
        assert!(PriorSpec::new(5, 1.0).is_err());
        assert!(PriorSpec::new(4, 0.5).is_err());
    }

    #[test]
    fn misfit_matches_a_hand_computation() {
        let lik = GaussianLikelihood::new(vec![1.0, 2.0], 0.5).unwrap();
        // Residuals 1 and 0 scaled by 1/0.5: 0.5 * (4 + 0) = 2.
        assert_relative_eq!(lik.misfit(&[0.0, 2.0]).unwrap(), 2.0, max_relative = 1e-14);
        assert!(lik.misfit(&[0.0]).is_err());
        assert!(GaussianLikelihood::new(vec![], 1.0).is_err());
        assert!(GaussianLikelihood::new(vec![1.0], 0.0).is_err());
    }

    #[test]
    fn acceptance_probability_is_one_sided() {
        assert_eq!(pcn_acceptance_probability(3.0, 3.0), 1.0);
        assert_eq!(pcn_acceptance_probability(1.0, 0.5), 1.0);
        assert_relative_eq!(
            pcn_acceptance_probability(1.0, 2.0),
            (-1.0f64).exp(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn adaptation_obeys_the_clip_window() {
        let opts = PcnOptions::default();
        // All accepted at the start of the run: the raw factor exp(2 * 0.77)
        // is clipped to 2, so the step size doubles.
        let rho = adapt_rho(&vec![true; 100], 0.9, 0.0, &opts);
        assert_relative_eq!(rho, 0.8, max_relative = 1e-12);
        // All rejected: the raw factor exp(-0.46) is inside the window.
        let rho = adapt_rho(&vec![false; 100], 0.9, 0.0, &opts);
        let expected = 1.0 - 0.1 * (-2.0 * 0.23f64).exp();
        assert_relative_eq!(rho, expected, max_relative = 1e-12);
        // At the end of the run the window degenerates and nothing moves.
        assert_eq!(adapt_rho(&vec![true; 100], 0.7, 1.0, &opts), 0.7);
        // Bounds are enforced.
        assert_eq!(adapt_rho(&vec![true; 100], 0.15, 0.0, &opts), 0.1);
        assert_eq!(adapt_rho(&vec![false; 100], 0.99999, 0.9, &opts), 0.99999);
    }

    #[test]
    fn prior_only_runs_accept_everything_and_match_prior_moments() {
        let probe = LinearProbe::new();
        let prior = PriorSpec::new(8, 1.0).unwrap();
        let pcn = PcnOptions {
            adapt: false,
            rho_init: 0.5,
            ..PcnOptions::default()
        };
        let sampler =
            Sampler::new(&probe, prior, 1.0, TargetDensity::PriorOnly, pcn).unwrap();
        let n = 20_000u64;
        let run = sampler
            .run(&RunOptions {
                n_samples: n,
                seed: 7,
                ..RunOptions::default()
            })
            .unwrap();
        // Zero misfit means every uniform draw in [0, 1) beats the threshold.
        assert_eq!(run.total_accepted, n);
        assert_eq!(probe.calls.load(Ordering::Relaxed), 0);

        let chain = run.chain.unwrap();
        assert_eq!(chain.records.len() as u64, n + 1);
        // First-coefficient variance must be 1. The chain is AR(1) with
        // coefficient rho = 0.5, which inflates the variance of the sample
        // variance by (1 + rho^2) / (1 - rho^2); three standard errors give
        // the bound below.
        let xs: Vec<f64> = chain.records.iter().map(|r| r.coeffs[0]).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xs.len() - 1) as f64;
        let inflation = (1.0 + 0.25) / (1.0 - 0.25);
        let se = (2.0 / xs.len() as f64 * inflation).sqrt();
        assert!(
            (var - 1.0).abs() < 3.0 * se,
            "var = {var:.4}, tolerance {:.4}",
            3.0 * se
        );

        // Expected squared Sobolev norm at exponent 1/2: sum over modes of
        // k^(-2) for this prior, here 1 + 1/4 + 1/9 + 1/16.
        let expected = 1.0 + 0.25 + 1.0 / 9.0 + 1.0 / 16.0;
        let norms: Vec<f64> = chain
            .records
            .iter()
            .map(|r| {
                BoundaryParams::new(r.coeffs.clone(), 1.0)
                    .unwrap()
                    .sobolev_norm_sq(0.5)
            })
            .collect();
        let norm_mean = norms.iter().sum::<f64>() / norms.len() as f64;
        assert_relative_eq!(norm_mean, expected, max_relative = 0.05);
    }

    #[test]
    fn every_step_calls_the_forward_model_exactly_once() {
        let probe = LinearProbe::new();
        let prior = PriorSpec::new(4, 1.0).unwrap();
        let sampler = Sampler::new(
            &probe,
            prior,
            1.0,
            posterior_target(0.2, 0.5),
            PcnOptions::default(),
        )
        .unwrap();
        let n = 250u64;
        let run = sampler
            .run(&RunOptions {
                n_samples: n,
                seed: 3,
                ..RunOptions::default()
            })
            .unwrap();
        assert_eq!(probe.calls.load(Ordering::Relaxed), n + 1);
        assert_eq!(run.steps_completed, n);
        assert!(run.total_accepted > 0 && run.total_accepted < n);
        // The recorded observation always equals the forward value of the
        // recorded state for this identity-like probe.
        for r in &run.chain.unwrap().records {
            assert_eq!(r.observed[0], r.coeffs[0]);
        }
    }

    #[test]
    fn forward_failures_reject_but_do_not_stop_the_chain() {
        let probe = LinearProbe {
            calls: AtomicU64::new(0),
            fail_above: 0.4,
        };
        let prior = PriorSpec::new(4, 1.0).unwrap();
        let sampler = Sampler::new(
            &probe,
            prior,
            1.0,
            posterior_target(0.0, 1.0),
            PcnOptions::default(),
        )
        .unwrap();
        // Start from zero so the initial evaluation cannot fail.
        let run = sampler
            .run(&RunOptions {
                n_samples: 400,
                seed: 11,
                init: ChainInit::Zero,
                ..RunOptions::default()
            })
            .unwrap();
        let chain = run.chain.unwrap();
        assert_eq!(chain.records.len(), 401);
        // The failure region is unreachable: accepted states stay below it.
        for r in &chain.records {
            assert!(r.coeffs[0] <= 0.4);
            assert!(r.phi.is_finite());
        }
        assert!(run.total_accepted < 400);
    }

    #[test]
    fn chains_are_deterministic_in_seed_and_stream() {
        let probe = LinearProbe::new();
        let prior = PriorSpec::new(6, 1.25).unwrap();
        let sampler = Sampler::new(
            &probe,
            prior,
            1.0,
            posterior_target(0.3, 0.2),
            PcnOptions::default(),
        )
        .unwrap();
        let opts = RunOptions {
            n_samples: 120,
            seed: 9,
            stream: 2,
            ..RunOptions::default()
        };
        let a = sampler.run(&opts).unwrap();
        let b = sampler.run(&opts).unwrap();
        assert_eq!(a.chain.unwrap().records, b.chain.unwrap().records);

        let c = sampler
            .run(&RunOptions {
                stream: 3,
                ..opts.clone()
            })
            .unwrap();
        assert_ne!(
            a.final_coeffs, c.final_coeffs,
            "different streams must explore differently"
        );
    }

    #[test]
    fn parallel_and_serial_multi_chain_runs_agree() {
        let probe = LinearProbe::new();
        let prior = PriorSpec::new(4, 1.0).unwrap();
        let sampler = Sampler::new(
            &probe,
            prior,
            1.0,
            posterior_target(0.1, 0.3),
            PcnOptions::default(),
        )
        .unwrap();
        let runs: Vec<RunOptions> = (0..4)
            .map(|i| RunOptions {
                n_samples: 80,
                seed: 5,
                stream: i,
                ..RunOptions::default()
            })
            .collect();
        let serial = sampler.run_many(&runs, Execution::Serial).unwrap();
        #[cfg(feature = "parallel")]
        {
            let parallel = sampler.run_many(&runs, Execution::Parallel).unwrap();
            for (s, p) in serial.iter().zip(&parallel) {
                assert_eq!(s.final_coeffs, p.final_coeffs);
                assert_eq!(s.total_accepted, p.total_accepted);
            }
        }
        assert_eq!(serial.len(), 4);
    }

    #[test]
    fn dimension_mismatch_is_caught_at_construction() {
        let probe = LinearProbe::new();
        let prior = PriorSpec::new(4, 1.0).unwrap();
        let lik = GaussianLikelihood::new(vec![0.0, 1.0], 1.0).unwrap();
        assert!(matches!(
            Sampler::new(
                &probe,
                prior,
                1.0,
                TargetDensity::Posterior(lik),
                PcnOptions::default()
            ),
            Err(InferenceError::DimensionMismatch { expected: 2, got: 1 })
        ));
    }
}
