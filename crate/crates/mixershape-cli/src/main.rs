//! Command-line driver for the mixer shape-inference pipeline.
//!
//! Three subcommands cover the workflow end to end:
//!
//! * `forward` runs a single forward solve for a given coefficient vector
//!   and prints the observation, optionally exporting the mesh and fields.
//! * `sample` runs one pCN chain per configured stream and writes CSV logs
//!   plus checkpoints into an output directory.
//! * `diagnose` turns chain logs into posterior summary tables.
//!
//! Exit codes: 0 on success, 1 for configuration or input validation
//! problems, 2 for runtime failures (solver breakdowns, i/o).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use mixershape::boundary::BoundaryParams;
use mixershape::chain::Chain;
use mixershape::config::ProblemConfig;
use mixershape::diagnostics::{
    self, default_angles_deg, default_probs, enclosed_area, observation_quantiles,
    radius_correlations, radius_quantiles, rhat, running_mean,
};
use mixershape::exec::Execution;
use mixershape::inference::{RunOptions, Sampler, TargetDensity};
use mixershape::observe::ForwardMap;

#[derive(Parser)]
#[command(
    name = "mixershape",
    version,
    about = "Bayesian inference of an annular mixer's inner boundary shape"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one forward solve and print the observation vector.
    Forward {
        /// Problem configuration file.
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        /// File of whitespace-separated Fourier coefficients; zeros when
        /// omitted.
        #[arg(long, value_name = "PATH")]
        params: Option<PathBuf>,
        /// Write the generated mesh to this file.
        #[arg(long, value_name = "PATH")]
        export_mesh: Option<PathBuf>,
        /// Write velocity, pressure, and scalar tables into this directory.
        #[arg(long, value_name = "DIR")]
        export_fields: Option<PathBuf>,
    },
    /// Run pCN chains and write CSV logs plus checkpoints.
    Sample {
        /// Problem configuration file.
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        /// Output directory for chain logs, checkpoints, and the resolved
        /// configuration.
        #[arg(long, value_name = "DIR")]
        output: PathBuf,
        /// Override the configured seed.
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
        /// Continue from existing checkpoints instead of refusing to touch
        /// a non-empty output directory.
        #[arg(long)]
        resume: bool,
        /// Discard any existing chain files and start over.
        #[arg(long)]
        force: bool,
        /// Sample the prior instead of the posterior; the forward model is
        /// never called.
        #[arg(long)]
        prior_only: bool,
    },
    /// Summarize chain logs into posterior diagnostic tables.
    Diagnose {
        /// Problem configuration the chains were run with.
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        /// Directory to write the diagnostic tables into.
        #[arg(long, value_name = "DIR")]
        output: PathBuf,
        /// Override the configured burn-in fraction.
        #[arg(long, value_name = "FRAC")]
        burn_in: Option<f64>,
        /// Chain CSV files, at least one.
        #[arg(required = true, value_name = "CHAIN.CSV")]
        chains: Vec<PathBuf>,
    },
}

enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> ExitCode {
        match self {
            CliError::Validation(_) => ExitCode::from(1),
            CliError::Runtime(_) => ExitCode::from(2),
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => m,
        }
    }
}

fn validation(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
            // Help and version go to stdout, usage errors to stderr.
            let _ = e.print();
            return code;
        }
    };

    let result = match cli.command {
        Command::Forward {
            config,
            params,
            export_mesh,
            export_fields,
        } => cmd_forward(&config, params.as_deref(), export_mesh.as_deref(), export_fields.as_deref()),
        Command::Sample {
            config,
            output,
            seed,
            resume,
            force,
            prior_only,
        } => cmd_sample(&config, &output, seed, resume, force, prior_only),
        Command::Diagnose {
            config,
            output,
            burn_in,
            chains,
        } => cmd_diagnose(&config, &output, burn_in, &chains),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn load_config(path: &Path) -> Result<ProblemConfig, CliError> {
    ProblemConfig::from_file(path).map_err(validation)
}

fn read_params(path: Option<&Path>, dim: usize, b0: f64) -> Result<BoundaryParams, CliError> {
    let coeffs = match path {
        None => vec![0.0; dim],
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| validation(format!("cannot read params file {}: {e}", p.display())))?;
            let coeffs: Result<Vec<f64>, _> = text
                .split_whitespace()
                .map(|tok| tok.parse::<f64>())
                .collect();
            let coeffs = coeffs
                .map_err(|e| validation(format!("params file {}: {e}", p.display())))?;
            if coeffs.len() != dim {
                return Err(validation(format!(
                    "params file {} has {} coefficients, the configuration asks for {}",
                    p.display(),
                    coeffs.len(),
                    dim
                )));
            }
            coeffs
        }
    };
    BoundaryParams::new(coeffs, b0).map_err(validation)
}

fn cmd_forward(
    config_path: &Path,
    params_path: Option<&Path>,
    export_mesh: Option<&Path>,
    export_fields: Option<&Path>,
) -> Result<(), CliError> {
    let config = load_config(config_path)?;
    let params = read_params(params_path, config.dim, config.b0)?;
    let map = ForwardMap::new(config.forward_spec()).map_err(validation)?;
    let solution = map.solve(&params).map_err(runtime)?;

    if let Some(path) = export_mesh {
        let mut w = BufWriter::new(File::create(path).map_err(runtime)?);
        solution.mesh.write_text(&mut w).map_err(runtime)?;
        w.flush().map_err(runtime)?;
    }
    if let Some(dir) = export_fields {
        std::fs::create_dir_all(dir).map_err(runtime)?;
        let mut w = BufWriter::new(File::create(dir.join("velocity.txt")).map_err(runtime)?);
        solution.flow.write_velocity_text(&mut w).map_err(runtime)?;
        w.flush().map_err(runtime)?;
        let mut w = BufWriter::new(File::create(dir.join("pressure.txt")).map_err(runtime)?);
        solution.flow.write_pressure_text(&mut w).map_err(runtime)?;
        w.flush().map_err(runtime)?;
        if let Some(scalar) = &solution.scalar {
            let mut w = BufWriter::new(File::create(dir.join("scalar.txt")).map_err(runtime)?);
            scalar.write_text(&mut w).map_err(runtime)?;
            w.flush().map_err(runtime)?;
        }
    }

    let mut stdout = std::io::stdout().lock();
    for v in &solution.observation.values {
        writeln!(stdout, "{v}").map_err(runtime)?;
    }
    Ok(())
}

fn chain_csv_path(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("chain_{i:02}.csv"))
}

fn chain_ckpt_path(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("chain_{i:02}.ckpt"))
}

fn cmd_sample(
    config_path: &Path,
    output: &Path,
    seed: Option<u64>,
    resume: bool,
    force: bool,
    prior_only: bool,
) -> Result<(), CliError> {
    let mut config = load_config(config_path)?;
    if let Some(seed) = seed {
        config.chain.seed = seed;
    }

    std::fs::create_dir_all(output).map_err(runtime)?;
    let n_chains = config.chain.n_chains;
    let existing: Vec<PathBuf> = (0..n_chains)
        .flat_map(|i| [chain_csv_path(output, i), chain_ckpt_path(output, i)])
        .filter(|p| p.exists())
        .collect();
    if !existing.is_empty() && !resume && !force {
        return Err(validation(format!(
            "{} already holds chain files (e.g. {}); pass --resume to continue \
             them or --force to start over",
            output.display(),
            existing[0].display()
        )));
    }
    if force && !resume {
        for p in &existing {
            std::fs::remove_file(p).map_err(runtime)?;
        }
    }

    // Keep the resolved configuration next to the chains so a later
    // `diagnose` sees exactly what produced them.
    std::fs::write(output.join("config.cfg"), config.serialize()).map_err(runtime)?;

    let map = ForwardMap::new(config.forward_spec()).map_err(validation)?;
    let prior = config.prior_spec().map_err(validation)?;
    let target = if prior_only {
        TargetDensity::PriorOnly
    } else {
        TargetDensity::Posterior(config.likelihood().map_err(validation)?)
    };
    let sampler = Sampler::new(&map, prior, config.b0, target, config.pcn_options())
        .map_err(validation)?;

    let runs: Vec<RunOptions> = (0..n_chains)
        .map(|i| RunOptions {
            n_samples: config.chain.n_samples,
            seed: config.chain.seed,
            stream: i as u64,
            init: config.chain.init,
            checkpoint_every: config.chain.checkpoint_every,
            csv_path: Some(chain_csv_path(output, i)),
            checkpoint_path: Some(chain_ckpt_path(output, i)),
            resume,
            keep_records: false,
            halt_after: None,
            log_every: config.chain.checkpoint_every,
        })
        .collect();

    let results = sampler.run_many(&runs, Execution::default()).map_err(runtime)?;

    let mut stdout = std::io::stdout().lock();
    for (i, run) in results.iter().enumerate() {
        writeln!(
            stdout,
            "chain {i:02}: {} steps, acceptance {:.1}%, final rho {:.4}, final misfit {:.6}",
            run.steps_completed,
            100.0 * run.acceptance_rate(),
            run.final_rho,
            run.final_phi
        )
        .map_err(runtime)?;
    }
    writeln!(
        stdout,
        "wrote {} chain(s) under {}",
        results.len(),
        output.display()
    )
    .map_err(runtime)?;
    Ok(())
}

fn cmd_diagnose(
    config_path: &Path,
    output: &Path,
    burn_in: Option<f64>,
    chain_paths: &[PathBuf],
) -> Result<(), CliError> {
    let config = load_config(config_path)?;
    let burn_in = burn_in.unwrap_or(config.chain.burn_in);
    if !(0.0..1.0).contains(&burn_in) {
        return Err(validation(format!(
            "burn-in fraction must lie in [0, 1), got {burn_in}"
        )));
    }

    let mut chains = Vec::with_capacity(chain_paths.len());
    for path in chain_paths {
        let chain = Chain::read_csv(path)
            .map_err(|e| validation(format!("{}: {e}", path.display())))?;
        if chain.dim() != config.dim {
            return Err(validation(format!(
                "{} carries {} coefficients per state, the configuration says {}",
                path.display(),
                chain.dim(),
                config.dim
            )));
        }
        chains.push(chain);
    }

    // Post-burn-in slices, one per chain.
    let mut kept = Vec::with_capacity(chains.len());
    for (chain, path) in chains.iter().zip(chain_paths) {
        let records = chain
            .after_burn_in(burn_in)
            .map_err(|e| validation(format!("{}: {e}", path.display())))?;
        kept.push(records);
    }

    std::fs::create_dir_all(output).map_err(runtime)?;

    // Enclosed-area series drive both the running means and R-hat.
    let area_series: Vec<Vec<f64>> = kept
        .iter()
        .map(|records| {
            let rows: Vec<&[f64]> = records.iter().map(|r| r.coeffs.as_slice()).collect();
            let params = diagnostics::build_params(&rows, config.b0).map_err(validation)?;
            Ok(params
                .iter()
                .map(|p| enclosed_area(p, &config.clamp))
                .collect())
        })
        .collect::<Result<_, CliError>>()?;

    {
        let mut w = BufWriter::new(
            File::create(output.join("running_means.csv")).map_err(runtime)?,
        );
        writeln!(w, "chain,step,mean_enclosed_area").map_err(runtime)?;
        for (c, (series, records)) in area_series.iter().zip(&kept).enumerate() {
            for (mean, record) in running_mean(series).iter().zip(records.iter()) {
                writeln!(w, "{c},{},{}", record.step, mean).map_err(runtime)?;
            }
        }
        w.flush().map_err(runtime)?;
    }

    // R-hat needs equally long chains; trim all series to the shortest.
    let area_rhat = if area_series.len() >= 2 {
        let shortest = area_series.iter().map(Vec::len).min().unwrap_or(0);
        if area_series.iter().any(|s| s.len() != shortest) {
            log::warn!(
                "chains have unequal post-burn-in lengths; trimming to {shortest} for R-hat"
            );
        }
        let trimmed: Vec<Vec<f64>> = area_series
            .iter()
            .map(|s| s[..shortest].to_vec())
            .collect();
        match rhat(&trimmed) {
            Ok(v) => Some(v),
            Err(e) => {
                log::warn!("R-hat unavailable: {e}");
                None
            }
        }
    } else {
        None
    };

    // Pooled posterior samples across all chains.
    let pooled_rows: Vec<&[f64]> = kept
        .iter()
        .flat_map(|records| records.iter().map(|r| r.coeffs.as_slice()))
        .collect();
    let pooled_records: Vec<mixershape::chain::ChainRecord> = kept
        .iter()
        .flat_map(|records| records.iter().cloned())
        .collect();

    let angles = default_angles_deg();
    let probs = default_probs();
    let quantiles = radius_quantiles(
        &pooled_rows,
        config.b0,
        &config.clamp,
        &angles,
        &probs,
        Execution::default(),
    )
    .map_err(validation)?;
    {
        let mut w = BufWriter::new(
            File::create(output.join("radius_quantiles.csv")).map_err(runtime)?,
        );
        quantiles.write_csv(&mut w).map_err(runtime)?;
        w.flush().map_err(runtime)?;
    }

    let bases = [0.0, 90.0, 180.0, 270.0];
    let lags: Vec<f64> = (0..360).map(f64::from).collect();
    let correlations = radius_correlations(
        &pooled_rows,
        config.b0,
        &config.clamp,
        &bases,
        &lags,
        Execution::default(),
    )
    .map_err(validation)?;
    {
        let mut w = BufWriter::new(
            File::create(output.join("radius_correlations.csv")).map_err(runtime)?,
        );
        correlations.write_csv(&mut w).map_err(runtime)?;
        w.flush().map_err(runtime)?;
    }

    let obs_quantiles = if pooled_records.iter().any(|r| !r.observed.is_empty()) {
        let oq = observation_quantiles(&pooled_records, &probs).map_err(validation)?;
        let mut w = BufWriter::new(
            File::create(output.join("observation_quantiles.csv")).map_err(runtime)?,
        );
        oq.write_csv(&mut w).map_err(runtime)?;
        w.flush().map_err(runtime)?;
        true
    } else {
        false
    };

    // Human-readable roll-up, mirrored on stdout.
    let mut summary = String::new();
    summary.push_str(&format!(
        "chains: {}\nburn-in fraction: {burn_in}\n",
        chains.len()
    ));
    for (i, (chain, records)) in chains.iter().zip(&kept).enumerate() {
        let last_rho = records.last().map(|r| r.rho).unwrap_or(f64::NAN);
        summary.push_str(&format!(
            "chain {i:02}: {} records, {} kept, acceptance {:.1}%, final rho {:.4}\n",
            chain.records.len(),
            records.len(),
            100.0 * chain.acceptance_rate(),
            last_rho
        ));
    }
    match area_rhat {
        Some(v) => summary.push_str(&format!("R-hat (enclosed area): {v:.4}\n")),
        None => summary.push_str("R-hat (enclosed area): not available\n"),
    }
    summary.push_str(&format!(
        "tables: radius_quantiles.csv, radius_correlations.csv, running_means.csv{}\n",
        if obs_quantiles {
            ", observation_quantiles.csv"
        } else {
            ""
        }
    ));
    std::fs::write(output.join("summary.txt"), &summary).map_err(runtime)?;
    print!("{summary}");
    Ok(())
}
