use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::cell::BistableCellModel;
use super::netlist::CircuitNetlist;
use crate::error::{Error, Result};

/// Deterministic process corners as multipliers on (thresholds, gains).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Corner {
    TT,
    FF,
    SS,
    FS,
    SF,
}

pub const CORNER_SHIFT: f64 = 0.08;

impl Corner {
    pub const ALL: [Corner; 5] = [Corner::TT, Corner::FF, Corner::SS, Corner::FS, Corner::SF];

    /// `(threshold factor, gain factor)`.
    pub fn shifts(self) -> (f64, f64) {
        let (dn, up) = (1.0 - CORNER_SHIFT, 1.0 + CORNER_SHIFT);
        match self {
            Corner::TT => (1.0, 1.0),
            Corner::FF => (dn, up),
            Corner::SS => (up, dn),
            Corner::FS => (dn, dn),
            Corner::SF => (up, up),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Corner::TT => "TT",
            Corner::FF => "FF",
            Corner::SS => "SS",
            Corner::FS => "FS",
            Corner::SF => "SF",
        }
    }
}

impl FromStr for Corner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Corner::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown corner `{s}` (TT, FF, SS, FS, SF)")))
    }
}

/// Static non-idealities of one die. Relative sigmas are 1-sigma Gaussian
/// spreads; bias sources share the mirror sigma.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub mirror_sigma: f64,
    pub thresh_sigma: f64,
    pub gain_sigma: f64,
    /// Output of a cell in the off state.
    pub leakage_pa: f64,
    pub corner: Corner,
    pub seed: u64,
}

pub const DEFAULT_LEAKAGE_PA: f64 = 3.0;

impl PerturbationSpec {
    /// Leakage only: no mismatch, typical corner.
    pub fn leakage_only() -> Self {
        Self {
            mirror_sigma: 0.0,
            thresh_sigma: 0.0,
            gain_sigma: 0.0,
            leakage_pa: DEFAULT_LEAKAGE_PA,
            corner: Corner::TT,
            seed: 0,
        }
    }

    /// Mirrors 2%, thresholds 4%, gains 3%.
    pub fn mismatch(seed: u64) -> Self {
        Self {
            mirror_sigma: 0.02,
            thresh_sigma: 0.04,
            gain_sigma: 0.03,
            seed,
            ..Self::leakage_only()
        }
    }

    pub fn with_corner(self, corner: Corner) -> Self {
        Self { corner, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let v = [self.mirror_sigma, self.thresh_sigma, self.gain_sigma, self.leakage_pa];
        if v.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
            return Err(Error::Config("sigmas and leakage must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// One drawn die: multiplicative factors per mirror and bias source and the
/// realized cell currents.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub mirror_gain: Vec<f64>,
    pub bias_gain: Vec<f64>,
    pub cells: Vec<BistableCellModel>,
    pub leakage_pa: f64,
}

fn factor(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    (1.0 + sigma * z).max(0.0)
}

impl Instance {
    pub fn nominal(net: &CircuitNetlist) -> Self {
        Self {
            mirror_gain: vec![1.0; net.mirrors.len()],
            bias_gain: vec![1.0; net.biases_pa.len()],
            cells: net.cells.clone(),
            leakage_pa: 0.0,
        }
    }

    pub fn draw(net: &CircuitNetlist, spec: &PerturbationSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mirror_gain = (0..net.mirrors.len()).map(|_| factor(&mut rng, spec.mirror_sigma)).collect();
        let bias_gain = (0..net.biases_pa.len()).map(|_| factor(&mut rng, spec.mirror_sigma)).collect();
        let (kt, kg) = spec.corner.shifts();
        let cells = net
            .cells
            .iter()
            .map(|c| {
                let (fh, fl) = (kt * factor(&mut rng, spec.thresh_sigma), kt * factor(&mut rng, spec.thresh_sigma));
                let gain = c.i_gain * kg * factor(&mut rng, spec.gain_sigma);
                if fh == 1.0 && fl == 1.0 {
                    return BistableCellModel { i_gain: gain, ..*c };
                }
                let hi = c.i_thresh * fh;
                BistableCellModel {
                    i_thresh: hi,
                    i_width: hi - c.i_lower() * fl,
                    i_gain: gain,
                }
            })
            .collect();
        Ok(Self {
            mirror_gain,
            bias_gain,
            cells,
            leakage_pa: spec.leakage_pa,
        })
    }
}
