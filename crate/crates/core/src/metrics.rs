//! Evaluation rollouts, metric rows and their aggregation across seeds.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::Environment;

pub const CSV_HEADER: [&str; 6] = ["step", "success", "coverage", "mean_bonus", "reward_mse", "seconds"];

/// One logged point of a run. Diagnostics a strategy does not compute are NaN.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub step: u64,
    pub success: f64,
    pub coverage: f64,
    pub mean_bonus: f64,
    pub reward_mse: f64,
    pub seconds: f64,
}

/// Streams rows to a CSV file; the header is written up front so that a
/// run with no rows still produces a valid file.
pub struct MetricsWriter<W: Write> {
    inner: csv::Writer<W>,
    last_step: Option<u64>,
}

impl MetricsWriter<File> {
    pub fn create(path: &Path) -> Result<Self> {
        Self::new(File::create(path)?)
    }
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(sink: W) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
        inner.write_record(CSV_HEADER)?;
        Ok(Self {
            inner,
            last_step: None,
        })
    }

    pub fn write(&mut self, row: &MetricRow) -> Result<()> {
        if self.last_step.is_some_and(|s| row.step <= s) {
            return Err(Error::usage(format!(
                "metric steps must increase; got {} after {:?}",
                row.step, self.last_step
            )));
        }
        self.last_step = Some(row.step);
        self.inner.serialize(row)?;
        self.inner.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> Result<W> {
        self.inner
            .into_inner()
            .map_err(|e| Error::Io(e.into_error()))
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::Format {
            path: path.to_path_buf(),
            reason: format!("unexpected header {header:?}"),
        });
    }
    Ok(reader.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Fraction of `episodes` deterministic-policy episodes that end in success.
pub fn evaluate<E, P>(env: &mut E, mut policy: P, episodes: usize, rng: &mut ChaCha8Rng) -> Result<f64>
where
    E: Environment + ?Sized,
    P: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if episodes == 0 {
        return Err(Error::config("evaluation needs at least one episode"));
    }
    let mut successes = 0;
    for _ in 0..episodes {
        let mut state = env.reset(rng);
        loop {
            let out = env.step(&policy(&state)?)?;
            if out.terminal {
                successes += 1;
            }
            if out.done() {
                break;
            }
            state = out.next_state;
        }
    }
    Ok(successes as f64 / episodes as f64)
}

/// Mean and standard error of one metric at one logged step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AggregatePoint {
    pub step: u64,
    pub mean: f64,
    /// Sample standard deviation over `√n`.
    pub stderr: f64,
}

pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Per-step mean ± standard error of `field` across runs logged at the same steps.
pub fn aggregate<F>(runs: &[Vec<MetricRow>], field: F) -> Result<Vec<AggregatePoint>>
where
    F: Fn(&MetricRow) -> f64,
{
    if runs.len() < 2 {
        return Err(Error::usage("aggregation needs at least two runs"));
    }
    let steps: Vec<u64> = runs[0].iter().map(|r| r.step).collect();
    for (k, run) in runs.iter().enumerate().skip(1) {
        if run.len() != steps.len() || run.iter().zip(&steps).any(|(r, s)| r.step != *s) {
            return Err(Error::Alignment(format!(
                "run {k} is not logged at the same steps as run 0"
            )));
        }
    }
    Ok(steps
        .iter()
        .enumerate()
        .map(|(i, &step)| {
            let values: Vec<f64> = runs.iter().map(|r| field(&r[i])).collect();
            let (mean, stderr) = mean_stderr(&values);
            AggregatePoint { step, mean, stderr }
        })
        .collect())
}
