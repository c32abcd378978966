use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::frame::CHANNELS;
use super::series::SeriesSet;
use crate::{Error, Result};

/// Overlapping windows laid out as `(count, window_len, 6)`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowBatch {
    data: Vec<f64>,
    origin: Vec<usize>,
    window_len: usize,
    step: usize,
}

impl WindowBatch {
    pub fn count(&self) -> usize {
        self.origin.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origin.is_empty()
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn step(&self) -> usize {
        self.step
    }

    /// Start index of each window, relative to the sliced rows.
    pub fn origins(&self) -> &[usize] {
        &self.origin
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn window(&self, k: usize) -> &[f64] {
        let w = self.window_len * CHANNELS;
        &self.data[k * w..(k + 1) * w]
    }

    /// Copies the selected windows into one contiguous `(n, window_len, 6)` buffer.
    pub fn gather(&self, indices: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(indices.len() * self.window_len * CHANNELS);
        for &k in indices {
            out.extend_from_slice(self.window(k));
        }
        out
    }
}

/// Slices all rows of `s` into windows of `window_len` with stride `step`.
pub fn windowize(s: &SeriesSet, window_len: usize, step: usize) -> Result<WindowBatch> {
    windowize_rows(&s.rows(0..s.len()), window_len, step)
}

/// Window `k` covers rows `[k·step, k·step + window_len)`.
pub fn windowize_rows(rows: &[[f64; CHANNELS]], window_len: usize, step: usize) -> Result<WindowBatch> {
    if window_len == 0 || step == 0 {
        return Err(Error::Config("window length and step must be at least 1".into()));
    }
    if window_len > rows.len() {
        return Err(Error::Config(format!(
            "window length {window_len} exceeds series length {}",
            rows.len()
        )));
    }
    let count = (rows.len() - window_len) / step + 1;
    let mut data = Vec::with_capacity(count * window_len * CHANNELS);
    let mut origin = Vec::with_capacity(count);
    for k in 0..count {
        let start = k * step;
        origin.push(start);
        for row in &rows[start..start + window_len] {
            data.extend_from_slice(row);
        }
    }
    Ok(WindowBatch {
        data,
        origin,
        window_len,
        step,
    })
}

/// How overlapping per-window values are combined into one value per row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Aggregation {
    #[default]
    Mean,
    Median,
}

/// Folds per-window values `(count, window_len, 6)` back onto `len` rows.
///
/// Every row must be covered by at least one window.
pub fn fold_windows(
    values: &[f64],
    origins: &[usize],
    window_len: usize,
    len: usize,
    aggregation: Aggregation,
) -> Result<Vec<[f64; CHANNELS]>> {
    if values.len() != origins.len() * window_len * CHANNELS {
        return Err(Error::Shape(format!(
            "{} values for {} windows of length {window_len}",
            values.len(),
            origins.len()
        )));
    }
    let mut cover: Vec<Vec<usize>> = vec![Vec::new(); len];
    for (k, &start) in origins.iter().enumerate() {
        if start + window_len > len {
            return Err(Error::Shape(format!("window {k} at {start} runs past row {len}")));
        }
        for (j, c) in cover[start..start + window_len].iter_mut().enumerate() {
            c.push(k * window_len + j);
        }
    }
    let mut out = Vec::with_capacity(len);
    let mut scratch = Vec::new();
    for (t, slots) in cover.iter().enumerate() {
        if slots.is_empty() {
            return Err(Error::Shape(format!("row {t} is not covered by any window")));
        }
        let row = core::array::from_fn(|c| match aggregation {
            Aggregation::Mean => {
                slots.iter().map(|&s| values[s * CHANNELS + c]).sum::<f64>() / slots.len() as f64
            }
            Aggregation::Median => {
                scratch.clear();
                scratch.extend(slots.iter().map(|&s| values[s * CHANNELS + c]));
                scratch.sort_by(f64::total_cmp);
                let m = scratch.len() / 2;
                if scratch.len() % 2 == 1 {
                    scratch[m]
                } else {
                    0.5 * (scratch[m - 1] + scratch[m])
                }
            }
        });
        out.push(row);
    }
    Ok(out)
}
