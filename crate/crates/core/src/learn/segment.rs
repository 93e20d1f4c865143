//! Cutting long recordings into supervised samples.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Each sample is `pad_len` unsupervised steps followed by `out_len`
/// supervised ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentationScheme {
    pub pad_len: usize,
    pub out_len: usize,
}

/// One training example; only steps `pad_len..` of `target` are supervised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub input: Vec<Vec<f64>>,
    pub target: Vec<Vec<f64>>,
    pub pad_len: usize,
}

impl Sample {
    pub fn steps(&self) -> usize {
        self.input.len()
    }
}

/// Sample `i` covers steps `[i*out_len, i*out_len + pad_len + out_len)`, so
/// supervised windows tile the recording while prefixes overlap the previous
/// window.
pub fn segment_traces(
    input: &[Vec<f64>],
    output: &[Vec<f64>],
    scheme: SegmentationScheme,
) -> Result<Vec<Sample>> {
    if scheme.out_len == 0 {
        return Err(Error::Config("out_len must be > 0".into()));
    }
    if input.len() != output.len() {
        return Err(Error::Usage(format!(
            "input has {} steps, output has {}",
            input.len(),
            output.len()
        )));
    }
    let t = input.len();
    let count = t.saturating_sub(scheme.pad_len) / scheme.out_len;
    Ok((0..count)
        .map(|i| {
            let start = i * scheme.out_len;
            let end = start + scheme.pad_len + scheme.out_len;
            Sample {
                input: input[start..end].to_vec(),
                target: output[start..end].to_vec(),
                pad_len: scheme.pad_len,
            }
        })
        .collect())
}

/// Shuffled 3:1 partition of `n` indices; the train side takes `floor(3n/4)`.
pub fn split_train_test<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let train = 3 * n / 4;
    let test = idx.split_off(train);
    (idx, test)
}
