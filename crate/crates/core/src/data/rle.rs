//! Run-length encoding of binary masks as `start length start length ...`.
//!
//! Pixels are numbered column-major from 1: index `p` is row `(p-1) mod H`,
//! column `(p-1) / H`.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use super::mask::Mask;
use crate::error::{bail, Error, Result};

/// A parsed run-length encoding: 1-based starts, strictly increasing,
/// non-overlapping, positive lengths.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct RleString {
    runs: Vec<(usize, usize)>,
}

impl RleString {
    pub fn parse(text: &str) -> Result<Self> {
        let tokens: Vec<&str> = text.split_ascii_whitespace().collect();
        if !tokens.len().is_multiple_of(2) {
            bail!(Decode, "odd number of tokens ({})", tokens.len());
        }
        let mut runs = Vec::with_capacity(tokens.len() / 2);
        for pair in tokens.chunks(2) {
            let start = parse_positive(pair[0])?;
            let len = parse_positive(pair[1])?;
            runs.push((start, len));
        }
        Self::from_runs(runs)
    }

    pub fn from_runs(runs: Vec<(usize, usize)>) -> Result<Self> {
        let mut prev_end = 0usize; // one past the last covered index
        for (i, &(start, len)) in runs.iter().enumerate() {
            if start == 0 || len == 0 {
                bail!(Decode, "run {i} has zero start or length");
            }
            if i > 0 && start <= runs[i - 1].0 {
                bail!(Decode, "run starts are not strictly increasing at run {i}");
            }
            if start < prev_end {
                bail!(Decode, "run {i} (start {start}) overlaps the previous run");
            }
            prev_end = start + len;
        }
        Ok(Self { runs })
    }

    pub fn runs(&self) -> &[(usize, usize)] {
        &self.runs
    }
    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }
    pub fn covered(&self) -> usize {
        self.runs.iter().map(|r| r.1).sum()
    }
}

fn parse_positive(tok: &str) -> Result<usize> {
    match tok.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => bail!(Decode, "token `{tok}` is not a positive integer"),
    }
}

impl FromStr for RleString {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl fmt::Display for RleString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (s, l)) in self.runs.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{s} {l}")?;
        }
        Ok(())
    }
}

pub fn rle_decode(rle: &RleString, height: usize, width: usize) -> Result<Mask> {
    let area = height * width;
    let mut mask = Mask::zeros(height, width);
    for &(start, len) in rle.runs() {
        let end = start - 1 + len;
        if end > area {
            bail!(Decode, "run {start}+{len} overruns the {height}x{width} image ({area} pixels)");
        }
        for p in start - 1..end {
            mask.set(p % height, p / height, true);
        }
    }
    Ok(mask)
}

/// Canonical encoding: maximal runs in ascending order. `data` is row-major.
pub fn rle_encode(data: &[u8], height: usize, width: usize) -> Result<RleString> {
    if data.len() != height * width {
        bail!(Validation, "mask has {} entries, expected {height}x{width}", data.len());
    }
    let mut runs = Vec::new();
    let mut open: Option<usize> = None;
    for col in 0..width {
        for row in 0..height {
            let p = col * height + row;
            let on = match data[row * width + col] {
                0 => false,
                1 => true,
                v => bail!(Validation, "mask is not binary (found value {v})"),
            };
            match (on, open) {
                (true, None) => open = Some(p),
                (false, Some(s)) => {
                    runs.push((s + 1, p - s));
                    open = None;
                }
                _ => {}
            }
        }
    }
    if let Some(s) = open {
        runs.push((s + 1, height * width - s));
    }
    Ok(RleString { runs })
}

impl Mask {
    pub fn to_rle(&self) -> RleString {
        rle_encode(self.data(), self.height(), self.width()).expect("masks are binary by construction")
    }
}
