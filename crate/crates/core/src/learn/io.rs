//! Dataset and trainer-state files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::segment::Sample;
use super::task::TrainerState;
use crate::error::{Error, Result};

/// One JSON object per line: `{"input": [[..]], "target": [[..]], "pad_len": n}`.
pub fn write_dataset<W: Write>(samples: &[Sample], mut out: W) -> Result<()> {
    for s in samples {
        serde_json::to_writer(&mut out, s).map_err(|e| Error::Format(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_dataset<R: BufRead>(input: R) -> Result<Vec<Sample>> {
    let mut samples = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s: Sample = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("dataset line {}: {e}", n + 1)))?;
        if s.input.len() != s.target.len() || s.pad_len >= s.input.len() {
            return Err(Error::Format(format!(
                "dataset line {}: input/target lengths {}/{} with pad {}",
                n + 1,
                s.input.len(),
                s.target.len(),
                s.pad_len
            )));
        }
        samples.push(s);
    }
    Ok(samples)
}

pub fn save_dataset(samples: &[Sample], path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dataset(samples, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<Sample>> {
    read_dataset(BufReader::new(File::open(path)?))
}

pub fn save_trainer(state: &TrainerState, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, state).map_err(|e| Error::Format(e.to_string()))?;
    w.flush()?;
    Ok(())
}

pub fn load_trainer(path: impl AsRef<Path>) -> Result<TrainerState> {
    let r = BufReader::new(File::open(path)?);
    let mut state: TrainerState =
        serde_json::from_reader(r).map_err(|e| Error::Format(format!("trainer file: {e}")))?;
    state.model.dense.zero_grad();
    if state.adam.m.len() != state.model.param_count() {
        return Err(Error::Format("optimizer state does not match model".into()));
    }
    Ok(state)
}
