//! Chain storage: CSV sample logs and restart checkpoints.
//!
//! A chain log is a plain CSV file with header
//! `step,accepted,rho,phi,obs_1,...,obs_n,b_1,...,b_K`; row zero holds the
//! initial state and every later row one Markov step. Floats are written
//! with the shortest representation that round-trips, so a log can be read
//! back bit for bit.
//!
//! A checkpoint is a small text file capturing everything needed to resume a
//! chain mid-run, including the counter-mode generator position, so a
//! resumed run reproduces the uninterrupted one exactly.

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("chain storage i/o: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("chain file has no records")]
    Empty,
    #[error("burn-in fraction must lie in [0, 1), got {0}")]
    BadBurnIn(f64),
    #[error("unsupported checkpoint header: {0}")]
    BadVersion(String),
}

fn malformed(line: usize, message: impl Into<String>) -> ChainError {
    ChainError::Malformed {
        line,
        message: message.into(),
    }
}

/// One row of a chain log.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainRecord {
    pub step: u64,
    pub accepted: bool,
    /// pCN correlation parameter in force when this state was recorded.
    pub rho: f64,
    /// Data misfit of the recorded state (zero in prior-only runs).
    pub phi: f64,
    /// Forward observation of the recorded state (empty in prior-only runs).
    pub observed: Vec<f64>,
    /// Boundary coefficients of the recorded state.
    pub coeffs: Vec<f64>,
}

/// CSV header for a log with `n_obs` observation and `dim` coefficient columns.
pub fn csv_header(n_obs: usize, dim: usize) -> String {
    let mut head = String::from("step,accepted,rho,phi");
    for i in 1..=n_obs {
        head.push_str(&format!(",obs_{i}"));
    }
    for i in 1..=dim {
        head.push_str(&format!(",b_{i}"));
    }
    head
}

impl ChainRecord {
    pub fn to_csv_row(&self) -> String {
        let mut row = format!(
            "{},{},{},{}",
            self.step,
            if self.accepted { 1 } else { 0 },
            self.rho,
            self.phi
        );
        for v in &self.observed {
            row.push_str(&format!(",{v}"));
        }
        for v in &self.coeffs {
            row.push_str(&format!(",{v}"));
        }
        row
    }

    fn parse(line: &str, n_obs: usize, dim: usize, line_no: usize) -> Result<Self, ChainError> {
        let fields: Vec<&str> = line.split(',').collect();
        let expected = 4 + n_obs + dim;
        if fields.len() != expected {
            return Err(malformed(
                line_no,
                format!("expected {expected} fields, found {}", fields.len()),
            ));
        }
        let step: u64 = fields[0]
            .parse()
            .map_err(|_| malformed(line_no, "bad step"))?;
        let accepted = match fields[1] {
            "0" => false,
            "1" => true,
            other => return Err(malformed(line_no, format!("bad accepted flag '{other}'"))),
        };
        let parse_f = |s: &str, what: &str| -> Result<f64, ChainError> {
            s.parse::<f64>()
                .map_err(|_| malformed(line_no, format!("bad {what} '{s}'")))
        };
        let rho = parse_f(fields[2], "rho")?;
        let phi = parse_f(fields[3], "phi")?;
        let mut observed = Vec::with_capacity(n_obs);
        for f in &fields[4..4 + n_obs] {
            observed.push(parse_f(f, "observation")?);
        }
        let mut coeffs = Vec::with_capacity(dim);
        for f in &fields[4 + n_obs..] {
            coeffs.push(parse_f(f, "coefficient")?);
        }
        Ok(ChainRecord {
            step,
            accepted,
            rho,
            phi,
            observed,
            coeffs,
        })
    }
}

/// An in-memory chain log.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Chain {
    pub records: Vec<ChainRecord>,
}

impl Chain {
    /// Number of boundary coefficients per record.
    pub fn dim(&self) -> usize {
        self.records.first().map_or(0, |r| r.coeffs.len())
    }

    /// Number of observation components per record.
    pub fn num_observed(&self) -> usize {
        self.records.first().map_or(0, |r| r.observed.len())
    }

    /// Fraction of accepted proposals, counted over steps >= 1 (row zero is
    /// the initial state, not a proposal).
    pub fn acceptance_rate(&self) -> f64 {
        let steps: Vec<&ChainRecord> = self.records.iter().filter(|r| r.step >= 1).collect();
        if steps.is_empty() {
            return 0.0;
        }
        steps.iter().filter(|r| r.accepted).count() as f64 / steps.len() as f64
    }

    /// Records with the first `fraction` of rows discarded.
    pub fn after_burn_in(&self, fraction: f64) -> Result<&[ChainRecord], ChainError> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(ChainError::BadBurnIn(fraction));
        }
        if self.records.is_empty() {
            return Err(ChainError::Empty);
        }
        let start = (fraction * self.records.len() as f64).floor() as usize;
        Ok(&self.records[start..])
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), ChainError> {
        let first = self.records.first().ok_or(ChainError::Empty)?;
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "{}", csv_header(first.observed.len(), first.coeffs.len()))?;
        for r in &self.records {
            writeln!(w, "{}", r.to_csv_row())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self, ChainError> {
        let reader = BufReader::new(File::open(path)?);
        let mut lines = reader.lines();
        let header = lines.next().ok_or(ChainError::Empty)??;
        let (n_obs, dim) = parse_header(&header)?;
        let mut records = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(ChainRecord::parse(&line, n_obs, dim, i + 2)?);
        }
        if records.is_empty() {
            return Err(ChainError::Empty);
        }
        Ok(Chain { records })
    }
}

/// Parse a log header, returning the observation and coefficient counts.
fn parse_header(header: &str) -> Result<(usize, usize), ChainError> {
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols.len() < 4 || cols[..4] != ["step", "accepted", "rho", "phi"] {
        return Err(malformed(1, "header must start with step,accepted,rho,phi"));
    }
    let mut n_obs = 0;
    let mut dim = 0;
    for (i, col) in cols[4..].iter().enumerate() {
        let expect_obs = format!("obs_{}", n_obs + 1);
        let expect_b = format!("b_{}", dim + 1);
        if dim == 0 && *col == expect_obs {
            n_obs += 1;
        } else if *col == expect_b {
            dim += 1;
        } else {
            return Err(malformed(
                1,
                format!("unexpected column '{col}' at position {}", i + 5),
            ));
        }
    }
    Ok((n_obs, dim))
}

/// Drop log rows with `step > max_step`, keeping the header.
///
/// Used when resuming from a checkpoint that is older than the log tail
/// (for example after a crash between a log append and the next checkpoint);
/// the dropped steps are replayed deterministically.
pub fn truncate_csv(path: &Path, max_step: u64) -> Result<(), ChainError> {
    let content = fs::read_to_string(path)?;
    let mut lines = content.lines();
    let header = lines.next().ok_or(ChainError::Empty)?.to_string();
    let mut kept = vec![header];
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let step: u64 = line
            .split(',')
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| malformed(kept.len() + 1, "bad step field"))?;
        if step <= max_step {
            kept.push(line.to_string());
        }
    }
    let mut out = kept.join("\n");
    out.push('\n');
    fs::write(path, out)?;
    Ok(())
}

/// Everything needed to resume a chain exactly where it stopped.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub step: u64,
    pub rho: f64,
    pub phi: f64,
    pub total_accepted: u64,
    pub seed: u64,
    pub stream: u64,
    /// Counter position of the ChaCha generator.
    pub word_pos: u128,
    /// Acceptance flags gathered since the last adaptation.
    pub window: Vec<bool>,
    pub observed: Vec<f64>,
    pub coeffs: Vec<f64>,
}

const CHECKPOINT_HEADER: &str = "mixershape-checkpoint v1";

impl Checkpoint {
    /// Write atomically: to a sibling temp file, then rename into place.
    pub fn write(&self, path: &Path) -> Result<(), ChainError> {
        let mut body = String::new();
        body.push_str(CHECKPOINT_HEADER);
        body.push('\n');
        body.push_str(&format!("step {}\n", self.step));
        body.push_str(&format!("rho {}\n", self.rho));
        body.push_str(&format!("phi {}\n", self.phi));
        body.push_str(&format!("total_accepted {}\n", self.total_accepted));
        body.push_str(&format!("seed {}\n", self.seed));
        body.push_str(&format!("stream {}\n", self.stream));
        body.push_str(&format!("word_pos {}\n", self.word_pos));
        body.push_str("window");
        for b in &self.window {
            body.push_str(if *b { " 1" } else { " 0" });
        }
        body.push('\n');
        body.push_str("observed");
        for v in &self.observed {
            body.push_str(&format!(" {v}"));
        }
        body.push('\n');
        body.push_str("coeffs");
        for v in &self.coeffs {
            body.push_str(&format!(" {v}"));
        }
        body.push('\n');

        let file_name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "checkpoint".into());
        let tmp = path.with_file_name(format!("{file_name}.tmp"));
        fs::write(&tmp, body)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, ChainError> {
        let content = fs::read_to_string(path)?;
        let mut lines = content.lines().enumerate();
        let (_, header) = lines.next().ok_or(ChainError::Empty)?;
        if header.trim() != CHECKPOINT_HEADER {
            return Err(ChainError::BadVersion(header.trim().into()));
        }

        let mut step = None;
        let mut rho = None;
        let mut phi = None;
        let mut total_accepted = None;
        let mut seed = None;
        let mut stream = None;
        let mut word_pos = None;
        let mut window = None;
        let mut observed = None;
        let mut coeffs = None;

        for (i, line) in lines {
            let line_no = i + 1;
            let mut parts = line.split_whitespace();
            let key = match parts.next() {
                Some(k) => k,
                None => continue,
            };
            let rest: Vec<&str> = parts.collect();
            let single = |rest: &[&str]| -> Result<String, ChainError> {
                if rest.len() != 1 {
                    return Err(malformed(line_no, format!("'{key}' wants one value")));
                }
                Ok(rest[0].to_string())
            };
            match key {
                "step" => {
                    step = Some(single(&rest)?.parse().map_err(|_| {
                        malformed(line_no, "bad step")
                    })?)
                }
                "rho" => {
                    rho = Some(single(&rest)?.parse().map_err(|_| {
                        malformed(line_no, "bad rho")
                    })?)
                }
                "phi" => {
                    phi = Some(single(&rest)?.parse().map_err(|_| {
                        malformed(line_no, "bad phi")
                    })?)
                }
                "total_accepted" => {
                    total_accepted = Some(single(&rest)?.parse().map_err(|_| {
                        malformed(line_no, "bad total_accepted")
                    })?)
                }
                "seed" => {
                    seed = Some(single(&rest)?.parse().map_err(|_| {
                        malformed(line_no, "bad seed")
                    })?)
                }
                "stream" => {
                    stream = Some(single(&rest)?.parse().map_err(|_| {
                        malformed(line_no, "bad stream")
                    })?)
                }
                "word_pos" => {
                    word_pos = Some(single(&rest)?.parse().map_err(|_| {
                        malformed(line_no, "bad word_pos")
                    })?)
                }
                "window" => {
                    let mut w = Vec::with_capacity(rest.len());
                    for r in &rest {
                        match *r {
                            "0" => w.push(false),
                            "1" => w.push(true),
                            other => {
                                return Err(malformed(
                                    line_no,
                                    format!("bad window flag '{other}'"),
                                ))
                            }
                        }
                    }
                    window = Some(w);
                }
                "observed" => {
                    let mut v = Vec::with_capacity(rest.len());
                    for r in &rest {
                        v.push(r.parse().map_err(|_| {
                            malformed(line_no, format!("bad observation '{r}'"))
                        })?);
                    }
                    observed = Some(v);
                }
                "coeffs" => {
                    let mut v = Vec::with_capacity(rest.len());
                    for r in &rest {
                        v.push(r.parse().map_err(|_| {
                            malformed(line_no, format!("bad coefficient '{r}'"))
                        })?);
                    }
                    coeffs = Some(v);
                }
                other => return Err(malformed(line_no, format!("unknown key '{other}'"))),
            }
        }

        let need = |line: usize, what: &str| malformed(line, format!("missing '{what}'"));
        Ok(Checkpoint {
            step: step.ok_or_else(|| need(0, "step"))?,
            rho: rho.ok_or_else(|| need(0, "rho"))?,
            phi: phi.ok_or_else(|| need(0, "phi"))?,
            total_accepted: total_accepted.ok_or_else(|| need(0, "total_accepted"))?,
            seed: seed.ok_or_else(|| need(0, "seed"))?,
            stream: stream.ok_or_else(|| need(0, "stream"))?,
            word_pos: word_pos.ok_or_else(|| need(0, "word_pos"))?,
            window: window.ok_or_else(|| need(0, "window"))?,
            observed: observed.ok_or_else(|| need(0, "observed"))?,
            coeffs: coeffs.ok_or_else(|| need(0, "coeffs"))?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn record(step: u64, accepted: bool) -> ChainRecord {
        ChainRecord {
            step,
            accepted,
            rho: 0.9 + step as f64 * 1e-3,
            phi: 1.0 / (step as f64 + 1.0),
            observed: vec![0.1 * step as f64, -2.0],
            coeffs: vec![0.25, f64::MIN_POSITIVE, -1.0 / 3.0, 1e300],
        }
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("chain.csv");
        let chain = Chain {
            records: (0..5).map(|s| record(s, s % 2 == 0)).collect(),
        };
        chain.write_csv(&path).unwrap();
        let back = Chain::read_csv(&path).unwrap();
        assert_eq!(chain, back);
    }

    #[test]
    fn header_matches_the_documented_layout() {
        assert_eq!(csv_header(2, 3), "step,accepted,rho,phi,obs_1,obs_2,b_1,b_2,b_3");
        assert_eq!(csv_header(0, 1), "step,accepted,rho,phi,b_1");
        assert!(parse_header("step,accepted,rho,phi,obs_1,b_1").is_ok());
        assert!(parse_header("step,accepted,rho,phi,b_1,obs_1").is_err());
        assert!(parse_header("step,rho,phi").is_err());
    }

    #[test]
    fn acceptance_rate_ignores_the_initial_row() {
        let chain = Chain {
            records: vec![record(0, true), record(1, true), record(2, false)],
        };
        assert_eq!(chain.acceptance_rate(), 0.5);
    }

    #[test]
    fn burn_in_discards_the_leading_fraction() {
        let chain = Chain {
            records: (0..10).map(|s| record(s, true)).collect(),
        };
        let kept = chain.after_burn_in(0.2).unwrap();
        assert_eq!(kept.len(), 8);
        assert_eq!(kept[0].step, 2);
        assert_eq!(chain.after_burn_in(0.0).unwrap().len(), 10);
        assert!(chain.after_burn_in(1.0).is_err());
        assert!(chain.after_burn_in(-0.1).is_err());
    }

    #[test]
    fn truncation_drops_rows_beyond_the_checkpoint() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("chain.csv");
        let chain = Chain {
            records: (0..8).map(|s| record(s, true)).collect(),
        };
        chain.write_csv(&path).unwrap();
        truncate_csv(&path, 5).unwrap();
        let back = Chain::read_csv(&path).unwrap();
        assert_eq!(back.records.len(), 6);
        assert_eq!(back.records.last().unwrap().step, 5);
        assert_eq!(back.records, chain.records[..6]);
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("state.ckpt");
        let ck = Checkpoint {
            step: 1500,
            rho: 0.84375,
            phi: 12.5e-17,
            total_accepted: 347,
            seed: 42,
            stream: 3,
            word_pos: 123456789012345,
            window: vec![true, false, true],
            observed: vec![0.1, -0.25],
            coeffs: vec![1.0 / 3.0, -2e-300],
        };
        ck.write(&path).unwrap();
        assert_eq!(Checkpoint::read(&path).unwrap(), ck);
    }

    #[test]
    fn empty_window_and_observations_survive_the_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("state.ckpt");
        let ck = Checkpoint {
            step: 0,
            rho: 0.9,
            phi: 0.0,
            total_accepted: 0,
            seed: 1,
            stream: 0,
            word_pos: 16,
            window: vec![],
            observed: vec![],
            coeffs: vec![0.0, 0.0],
        };
        ck.write(&path).unwrap();
        assert_eq!(Checkpoint::read(&path).unwrap(), ck);
    }

    #[test]
    fn foreign_checkpoints_are_refused() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("state.ckpt");
        std::fs::write(&path, "other-tool v9\nstep 1\n").unwrap();
        assert!(matches!(
            Checkpoint::read(&path),
            Err(ChainError::BadVersion(_))
        ));
    }
}
