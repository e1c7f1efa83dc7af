use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ForwardCtx, HardwareBackbone, SequenceModel, SoftwareBackbone};
use crate::autodiff::Var;
use crate::cells::CellKind;
use crate::error::Result;
use crate::params::{Parameterized, Visit, VisitMut};

/// Shape of a network, enough to rebuild it before loading parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backbone", rename_all = "kebab-case")]
pub enum ArchSpec {
    Hardware {
        cell: CellKind,
        n_in: usize,
        d: usize,
        n_layers: usize,
        n_classes: usize,
    },
    Software {
        cell: CellKind,
        n_in: usize,
        m: usize,
        r: usize,
        d: usize,
        n_classes: usize,
    },
}

impl ArchSpec {
    pub fn build(&self, seed: u64) -> AnyModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match *self {
            ArchSpec::Hardware { cell, n_in, d, n_layers, n_classes } => {
                AnyModel::Hardware(HardwareBackbone::init(cell, n_in, d, n_layers, n_classes, &mut rng))
            }
            ArchSpec::Software { cell, n_in, m, r, d, n_classes } => {
                AnyModel::Software(SoftwareBackbone::init(cell, n_in, m, r, d, n_classes, &mut rng))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AnyModel {
    Hardware(HardwareBackbone),
    Software(SoftwareBackbone),
}

impl AnyModel {
    pub fn as_hardware(&self) -> Option<&HardwareBackbone> {
        match self {
            AnyModel::Hardware(h) => Some(h),
            AnyModel::Software(_) => None,
        }
    }
}

impl Parameterized for AnyModel {
    fn visit(&self, prefix: &str, f: Visit<'_>) {
        match self {
            AnyModel::Hardware(m) => m.visit(prefix, f),
            AnyModel::Software(m) => m.visit(prefix, f),
        }
    }
    fn visit_mut(&mut self, prefix: &str, f: VisitMut<'_>) {
        match self {
            AnyModel::Hardware(m) => m.visit_mut(prefix, f),
            AnyModel::Software(m) => m.visit_mut(prefix, f),
        }
    }
}

impl SequenceModel for AnyModel {
    fn n_in(&self) -> usize {
        match self {
            AnyModel::Hardware(m) => m.n_in(),
            AnyModel::Software(m) => m.n_in(),
        }
    }
    fn n_classes(&self) -> usize {
        match self {
            AnyModel::Hardware(m) => m.n_classes(),
            AnyModel::Software(m) => m.n_classes(),
        }
    }
    fn cell_kind(&self) -> CellKind {
        match self {
            AnyModel::Hardware(m) => m.cell_kind(),
            AnyModel::Software(m) => m.cell_kind(),
        }
    }
    fn forward<'t>(&self, ctx: &mut ForwardCtx<'t, '_>, x: Var<'t>, batch: usize) -> Result<Var<'t>> {
        match self {
            AnyModel::Hardware(m) => m.forward(ctx, x, batch),
            AnyModel::Software(m) => m.forward(ctx, x, batch),
        }
    }
}
