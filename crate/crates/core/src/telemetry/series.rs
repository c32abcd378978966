use alloc::format;
use alloc::vec::Vec;
use core::ops::Range;

use super::frame::{Channel, MeasurementFrame, CHANNELS};
use crate::{Error, Result};

/// Boundaries of the chronological train / validation / test split.
///
/// Train is `[0, train_end)`, validation `[train_end, val_end)`, test
/// `[val_end, len)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Split {
    pub train_end: usize,
    pub val_end: usize,
}

impl Split {
    /// 75% / 10% / 15%, each region kept non-empty.
    pub fn default_for(len: usize) -> Result<Split> {
        if len < 3 {
            return Err(Error::Config(format!(
                "series of length {len} cannot hold a train/validation/test split"
            )));
        }
        let train_end = (len * 75 / 100).clamp(1, len - 2);
        let val_end = (len * 85 / 100).clamp(train_end + 1, len - 1);
        Ok(Split { train_end, val_end })
    }

    fn validate(&self, len: usize) -> Result<()> {
        if 0 < self.train_end && self.train_end < self.val_end && self.val_end < len {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "split ({}, {}) invalid for length {len}",
                self.train_end, self.val_end
            )))
        }
    }
}

/// Per-channel MinMax state, fitted on one index range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinMax {
    pub min: [f64; CHANNELS],
    pub max: [f64; CHANNELS],
}

impl MinMax {
    pub fn fit(rows: impl IntoIterator<Item = [f64; CHANNELS]>) -> Result<MinMax> {
        let mut min = [f64::INFINITY; CHANNELS];
        let mut max = [f64::NEG_INFINITY; CHANNELS];
        let mut seen = false;
        for row in rows {
            seen = true;
            for c in 0..CHANNELS {
                min[c] = min[c].min(row[c]);
                max[c] = max[c].max(row[c]);
            }
        }
        if !seen {
            return Err(Error::Empty("minmax fitting range"));
        }
        let mm = MinMax { min, max };
        mm.validate()?;
        Ok(mm)
    }

    pub fn validate(&self) -> Result<()> {
        for c in Channel::ALL {
            let (lo, hi) = (self.min[c.index()], self.max[c.index()]);
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(Error::NonFinite(format!("minmax bounds of channel {c}")));
            }
            if hi <= lo {
                return Err(Error::DegenerateChannel(c.name()));
            }
        }
        Ok(())
    }

    pub fn span(&self, channel: usize) -> f64 {
        self.max[channel] - self.min[channel]
    }

    pub fn apply(&self, channel: usize, x: f64) -> f64 {
        (x - self.min[channel]) / self.span(channel)
    }

    pub fn invert(&self, channel: usize, x: f64) -> f64 {
        x * self.span(channel) + self.min[channel]
    }

    pub fn apply_row(&self, row: [f64; CHANNELS]) -> [f64; CHANNELS] {
        core::array::from_fn(|c| self.apply(c, row[c]))
    }

    pub fn invert_row(&self, row: [f64; CHANNELS]) -> [f64; CHANNELS] {
        core::array::from_fn(|c| self.invert(c, row[c]))
    }
}

/// An ordered multichannel series with its split and normalization state.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSet {
    frames: Vec<MeasurementFrame>,
    minmax: Option<MinMax>,
    normalized: bool,
    split: Split,
}

impl SeriesSet {
    /// Wraps frames in physical units with the default split.
    pub fn new(frames: Vec<MeasurementFrame>) -> Result<SeriesSet> {
        let split = Split::default_for(frames.len())?;
        Ok(SeriesSet {
            frames,
            minmax: None,
            normalized: false,
            split,
        })
    }

    pub fn with_split(mut self, split: Split) -> Result<SeriesSet> {
        split.validate(self.frames.len())?;
        self.split = split;
        Ok(self)
    }

    /// Attaches previously fitted MinMax state (for example, from a checkpoint).
    pub fn with_minmax(mut self, minmax: MinMax) -> Result<SeriesSet> {
        minmax.validate()?;
        self.minmax = Some(minmax);
        Ok(self)
    }

    pub fn frames(&self) -> &[MeasurementFrame] {
        &self.frames
    }

    pub fn frames_mut(&mut self) -> &mut [MeasurementFrame] {
        &mut self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn train_range(&self) -> Range<usize> {
        0..self.split.train_end
    }

    pub fn val_range(&self) -> Range<usize> {
        self.split.train_end..self.split.val_end
    }

    pub fn test_range(&self) -> Range<usize> {
        self.split.val_end..self.frames.len()
    }

    pub fn minmax(&self) -> Option<&MinMax> {
        self.minmax.as_ref()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn rows(&self, range: Range<usize>) -> Vec<[f64; CHANNELS]> {
        self.frames[range].iter().map(MeasurementFrame::row).collect()
    }

    /// Fits per-channel MinMax bounds on `range` (normally the training split).
    pub fn fit_minmax(mut self, range: Range<usize>) -> Result<SeriesSet> {
        if range.is_empty() || range.end > self.frames.len() {
            return Err(Error::Config(format!(
                "fitting range {range:?} invalid for length {}",
                self.frames.len()
            )));
        }
        if self.normalized {
            return Err(Error::Config("cannot fit on normalized data".into()));
        }
        self.minmax = Some(MinMax::fit(self.frames[range].iter().map(MeasurementFrame::row))?);
        Ok(self)
    }

    /// `x' = (x - min) / (max - min)` per channel. Values outside the fitted
    /// range map outside `[0, 1]`.
    pub fn apply_minmax(mut self) -> Result<SeriesSet> {
        let mm = self.minmax.ok_or(Error::Unfitted)?;
        if self.normalized {
            return Err(Error::Config("series is already normalized".into()));
        }
        for f in &mut self.frames {
            *f = MeasurementFrame::from_row(f.t, mm.apply_row(f.row()));
        }
        self.normalized = true;
        Ok(self)
    }

    pub fn invert_minmax(mut self) -> Result<SeriesSet> {
        let mm = self.minmax.ok_or(Error::Unfitted)?;
        if !self.normalized {
            return Err(Error::Config("series is not normalized".into()));
        }
        for f in &mut self.frames {
            *f = MeasurementFrame::from_row(f.t, mm.invert_row(f.row()));
        }
        self.normalized = false;
        Ok(self)
    }
}
