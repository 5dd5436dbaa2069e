//! JSON serialization for channels and Choi matrices.
//!
//! A channel file stores the Stinespring isometry row-major as `[re, im]`
//! pairs; a Choi file stores the Choi matrix the same way. Readers validate
//! every structural invariant and report which one failed, so a hand-edited
//! file cannot silently produce a non-channel.

use super::{ChannelError, ChoiMatrix, QuantumChannel};
use crate::numkernel::CMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

#[derive(Serialize, Deserialize)]
struct ChannelFile {
    d_in: usize,
    d_out: usize,
    d_env: usize,
    /// Row-major `(d_out * d_env) x d_in` entries as `[re, im]`.
    isometry: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct ChoiFile {
    d_in: usize,
    d_out: usize,
    /// Row-major `(d_out * d_in) x (d_out * d_in)` entries as `[re, im]`.
    choi: Vec<[f64; 2]>,
}

fn flatten(m: &CMatrix) -> Vec<[f64; 2]> {
    (0..m.rows())
        .flat_map(|r| (0..m.cols()).map(move |c| (r, c)))
        .map(|(r, c)| [m[(r, c)].re, m[(r, c)].im])
        .collect()
}

fn unflatten(entries: &[[f64; 2]], rows: usize, cols: usize) -> Result<CMatrix, ChannelError> {
    let expected = rows.checked_mul(cols).ok_or_else(|| ChannelError::BadDimensions {
        detail: format!("matrix dimensions {rows} x {cols} overflow"),
    })?;
    if entries.len() != expected {
        return Err(ChannelError::Parse {
            detail: format!(
                "expected {expected} entries for a {rows} x {cols} matrix, found {}",
                entries.len()
            ),
        });
    }
    let m = CMatrix::from_fn(rows, cols, |r, c| {
        let [re, im] = entries[r * cols + c];
        Complex64::new(re, im)
    });
    if !m.is_finite() {
        return Err(ChannelError::Parse { detail: "matrix contains a non-finite entry".into() });
    }
    Ok(m)
}

/// Writes a channel as pretty JSON with a trailing newline.
pub fn write_channel_json(ch: &QuantumChannel, out: &mut impl Write) -> Result<(), ChannelError> {
    let file = ChannelFile {
        d_in: ch.d_in(),
        d_out: ch.d_out(),
        d_env: ch.d_env(),
        isometry: flatten(ch.isometry()),
    };
    let text = serde_json::to_string_pretty(&file).expect("channel file serializes");
    out.write_all(text.as_bytes())
        .and_then(|_| out.write_all(b"\n"))
        .map_err(|e| ChannelError::Parse { detail: format!("write failed: {e}") })
}

/// Reads a channel, re-validating dimensions and the isometry constraint.
pub fn read_channel_json(input: &mut impl Read) -> Result<QuantumChannel, ChannelError> {
    let mut text = String::new();
    input
        .read_to_string(&mut text)
        .map_err(|e| ChannelError::Parse { detail: format!("read failed: {e}") })?;
    let file: ChannelFile = serde_json::from_str(&text)
        .map_err(|e| ChannelError::Parse { detail: format!("invalid channel JSON: {e}") })?;
    let rows = file
        .d_out
        .checked_mul(file.d_env)
        .ok_or_else(|| ChannelError::BadDimensions { detail: "d_out * d_env overflows".into() })?;
    let isometry = unflatten(&file.isometry, rows, file.d_in)?;
    QuantumChannel::new(file.d_in, file.d_out, file.d_env, isometry)
}

/// Writes a Choi matrix as pretty JSON with a trailing newline.
pub fn write_choi_json(choi: &ChoiMatrix, out: &mut impl Write) -> Result<(), ChannelError> {
    let file = ChoiFile { d_in: choi.d_in, d_out: choi.d_out, choi: flatten(&choi.matrix) };
    let text = serde_json::to_string_pretty(&file).expect("choi file serializes");
    out.write_all(text.as_bytes())
        .and_then(|_| out.write_all(b"\n"))
        .map_err(|e| ChannelError::Parse { detail: format!("write failed: {e}") })
}

/// Reads a Choi matrix, re-validating positivity and trace preservation.
pub fn read_choi_json(input: &mut impl Read) -> Result<ChoiMatrix, ChannelError> {
    let mut text = String::new();
    input
        .read_to_string(&mut text)
        .map_err(|e| ChannelError::Parse { detail: format!("read failed: {e}") })?;
    let file: ChoiFile = serde_json::from_str(&text)
        .map_err(|e| ChannelError::Parse { detail: format!("invalid choi JSON: {e}") })?;
    let dim = file
        .d_out
        .checked_mul(file.d_in)
        .ok_or_else(|| ChannelError::BadDimensions { detail: "d_out * d_in overflows".into() })?;
    let matrix = unflatten(&file.choi, dim, dim)?;
    ChoiMatrix::new(file.d_in, file.d_out, matrix)
}
