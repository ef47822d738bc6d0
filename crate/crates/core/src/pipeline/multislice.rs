//! Acquisition order for multi-slice scans: every slice's low-frequency
//! lines first, interleaved across slices, then the high-frequency lines in
//! the same interleaving. While later slices acquire their ACS lines, the
//! earlier ones have time to compute uncertainty and pick a mask.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Acs,
    Hf,
}

/// One step of the schedule; `slice` and `index` are 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ScheduleEntry {
    pub slice: usize,
    pub phase: Phase,
    pub index: usize,
}

impl fmt::Display for ScheduleEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = match self.phase {
            Phase::Acs => 'A',
            Phase::Hf => 'H',
        };
        write!(f, "S{}{}{}", self.slice, p, self.index)
    }
}

pub fn multislice_schedule(n_slices: usize, n_acs: usize, n_hf: usize) -> Result<Vec<ScheduleEntry>> {
    if n_slices == 0 || n_acs == 0 || n_hf == 0 {
        return Err(Error::invalid(format!(
            "slice, ACS and HF counts must be positive (got {n_slices}, {n_acs}, {n_hf})"
        )));
    }
    let mut out = Vec::with_capacity(n_slices * (n_acs + n_hf));
    for (phase, count) in [(Phase::Acs, n_acs), (Phase::Hf, n_hf)] {
        for index in 1..=count {
            for slice in 1..=n_slices {
                out.push(ScheduleEntry { slice, phase, index });
            }
        }
    }
    Ok(out)
}
