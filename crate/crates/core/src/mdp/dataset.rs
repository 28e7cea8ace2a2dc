//! Text serialization of unlabeled prior datasets.
//!
//! ```text
//! # explore-dataset v1
//! # state_dim=2 action_dim=2 count=3
//! # columns: s[0..2],a[0..2],s'[0..2],t
//! 0.5,0.5,0.1,-0.2,0.52,0.48,0
//! ```
//!
//! Each row is one transition `(s, a, s′)` followed by its step index
//! within the originating trajectory. Rewards are never stored.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{ReplayBuffer, Transition};
use crate::error::{Error, Result};

const MAGIC: &str = "# explore-dataset v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DatasetDims {
    pub state_dim: usize,
    pub action_dim: usize,
}

pub fn write_dataset(path: &Path, data: &ReplayBuffer, dims: DatasetDims) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    let DatasetDims {
        state_dim: s,
        action_dim: a,
    } = dims;
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "# state_dim={s} action_dim={a} count={}", data.len())?;
    writeln!(out, "# columns: s[0..{s}],a[0..{a}],s'[0..{s}],t")?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for t in data.iter() {
        if t.state.len() != s || t.action.len() != a || t.next_state.len() != s {
            return Err(Error::Dimension {
                context: "dataset row",
                expected: 2 * s + a,
                actual: t.state.len() + t.action.len() + t.next_state.len(),
            });
        }
        let mut rec: Vec<String> = t
            .state
            .iter()
            .chain(&t.action)
            .chain(&t.next_state)
            .map(|v| v.to_string())
            .collect();
        rec.push(t.step.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dataset written by [`write_dataset`]; every row comes back as an
/// unlabeled prior transition.
pub fn read_dataset(path: &Path, seed: u64) -> Result<(ReplayBuffer, DatasetDims)> {
    let fail = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(MAGIC) {
        return Err(fail(format!("missing '{MAGIC}' header")));
    }
    let dims_line = lines
        .next()
        .ok_or_else(|| fail("missing dimension header".into()))?;
    let mut state_dim = None;
    let mut action_dim = None;
    let mut count = None;
    for field in dims_line.trim_start_matches('#').split_whitespace() {
        let (k, v) = field
            .split_once('=')
            .ok_or_else(|| fail(format!("bad header field '{field}'")))?;
        let v: usize = v
            .parse()
            .map_err(|_| fail(format!("bad header value '{field}'")))?;
        match k {
            "state_dim" => state_dim = Some(v),
            "action_dim" => action_dim = Some(v),
            "count" => count = Some(v),
            _ => return Err(fail(format!("unknown header field '{k}'"))),
        }
    }
    let (Some(s), Some(a), Some(count)) = (state_dim, action_dim, count) else {
        return Err(fail("header must give state_dim, action_dim and count".into()));
    };
    let width = 2 * s + a + 1;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows = Vec::with_capacity(count);
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.len() != width {
            return Err(fail(format!("row {i} has {} fields, expected {width}", rec.len())));
        }
        let mut vals = Vec::with_capacity(width - 1);
        for f in rec.iter().take(width - 1) {
            vals.push(
                f.parse::<f64>()
                    .map_err(|_| fail(format!("row {i}: bad number '{f}'")))?,
            );
        }
        let step = rec[width - 1]
            .parse::<u32>()
            .map_err(|_| fail(format!("row {i}: bad step index")))?;
        rows.push(Transition::prior(
            vals[..s].to_vec(),
            vals[s..s + a].to_vec(),
            vals[s + a..].to_vec(),
            step,
        ));
    }
    if rows.len() != count {
        return Err(fail(format!("header count {count} but {} rows", rows.len())));
    }
    Ok((
        ReplayBuffer::from_transitions(rows, seed),
        DatasetDims {
            state_dim: s,
            action_dim: a,
        },
    ))
}
