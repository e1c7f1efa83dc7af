use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dual-threshold current comparator with a gated output source.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BistableCellModel {
    #[serde(rename = "I_thresh_pA")]
    pub i_thresh: f64,
    #[serde(rename = "I_width_pA")]
    pub i_width: f64,
    #[serde(rename = "I_gain_pA")]
    pub i_gain: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellState {
    Off,
    On,
}

impl BistableCellModel {
    /// Switch-down level `I_thresh - I_width`.
    pub fn i_lower(&self) -> f64 {
        self.i_thresh - self.i_width
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.i_thresh > self.i_width && self.i_width > 0.0 && self.i_gain > 0.0) {
            return Err(Error::Precondition(format!(
                "cell needs I_thresh > I_width > 0 and I_gain > 0, got {} / {} / {}",
                self.i_thresh, self.i_width, self.i_gain
            )));
        }
        Ok(())
    }

    pub fn calibrated(&self, cal: &CellCalibration) -> Self {
        let hi = self.i_thresh * cal.k_thresh;
        let lo = self.i_lower() * cal.k_lower;
        Self {
            i_thresh: hi,
            i_width: hi - lo,
            i_gain: self.i_gain * cal.k_gain,
        }
    }
}

/// Next state and output current for input `i_in`. Strict comparisons:
/// an input exactly at a threshold leaves the state alone.
pub fn cell_response(c: &BistableCellModel, state: CellState, i_in: f64) -> (f64, CellState) {
    let next = if i_in > c.i_thresh {
        CellState::On
    } else if i_in < c.i_lower() {
        CellState::Off
    } else {
        state
    };
    let out = match next {
        CellState::On => c.i_gain,
        CellState::Off => 0.0,
    };
    (out, next)
}

/// Multiplicative corrections from bias settings to realized switching
/// levels and output, fitted so that a 368 / 216 / 486 pA cell switches
/// up at 350 pA, down at 150 pA and outputs 500 pA.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellCalibration {
    pub k_thresh: f64,
    pub k_lower: f64,
    pub k_gain: f64,
}

impl Default for CellCalibration {
    fn default() -> Self {
        Self {
            k_thresh: 350.0 / 368.0,
            k_lower: 150.0 / 152.0,
            k_gain: 500.0 / 486.0,
        }
    }
}
