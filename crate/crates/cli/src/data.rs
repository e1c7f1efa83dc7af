use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use fqbmru::data::{
    balanced_kws_split, load_idx, pixel_task, read_fseq_file, PixelMode, SequenceSet, SyntheticTask,
};
use serde::Serialize;

use crate::error::CliError;
use crate::manifest::Run;

/// Resolves dataset paths: relative paths live under the data directory
/// when one is configured.
#[derive(Clone, Debug, Default)]
pub struct DataRoot(pub Option<PathBuf>);

impl DataRoot {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        match &self.0 {
            Some(root) if p.is_relative() => root.join(p),
            _ => p.to_path_buf(),
        }
    }
}

/// An evaluation set: an FSEQ file, or synthetic samples generated on the fly.
#[derive(Args, Clone, Debug, Serialize)]
pub struct EvalData {
    /// Feature-sequence file (relative paths resolve under --data-dir).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Number of synthetic samples when --data is absent.
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    /// Generator seed for synthetic samples.
    #[arg(long, default_value_t = 4)]
    pub data_seed: u64,
    /// Generate weaker and later keywords.
    #[arg(long)]
    pub boundary: bool,
}

impl EvalData {
    pub fn load(&self, root: &DataRoot, run: &mut Run) -> Result<SequenceSet, CliError> {
        match &self.data {
            Some(p) => {
                let path = root.resolve(p);
                run.input(&path)?;
                Ok(read_fseq_file(&path)?)
            }
            None => {
                run.seed("data", self.data_seed);
                Ok(synth(self.boundary).generate(self.n, self.data_seed)?)
            }
        }
    }
}

pub fn synth(boundary: bool) -> SyntheticTask {
    if boundary {
        SyntheticTask::boundary()
    } else {
        SyntheticTask::default()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    /// Synthetic keyword task.
    Synth,
    /// Any pair of FSEQ files.
    Fseq,
    /// FSEQ keyword features; one target class against a balanced negative set.
    Kws,
    /// MNIST read as a pixel or row sequence.
    Smnist,
    /// MNIST pixels in a fixed shuffled order.
    Pmnist,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PixelLayout {
    Row28,
    Raster784,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct TrainData {
    #[arg(long, value_enum, default_value_t = Task::Synth)]
    pub task: Task,
    /// Training FSEQ file (fseq and kws tasks).
    #[arg(long)]
    pub train_file: Option<PathBuf>,
    /// Validation FSEQ file (fseq and kws tasks).
    #[arg(long)]
    pub val_file: Option<PathBuf>,
    /// Keyword class for the kws task.
    #[arg(long, default_value_t = 1)]
    pub target_class: usize,
    #[arg(long, default_value_t = 2000)]
    pub n_train: usize,
    #[arg(long, default_value_t = 512)]
    pub n_val: usize,
    /// Seed of the synthetic training set; the validation set uses seed + 1.
    #[arg(long, default_value_t = 1)]
    pub data_seed: u64,
    #[arg(long, value_enum, default_value_t = PixelLayout::Row28)]
    pub pixel_layout: PixelLayout,
    #[arg(long, default_value_t = 0)]
    pub perm_seed: u64,
    /// Fraction of the MNIST training images held out for validation.
    #[arg(long, default_value_t = 0.1)]
    pub val_frac: f64,
}

fn two_files(td: &TrainData, root: &DataRoot, run: &mut Run) -> Result<(SequenceSet, SequenceSet), CliError> {
    let (Some(t), Some(v)) = (&td.train_file, &td.val_file) else {
        return Err(CliError::usage("this task needs --train-file and --val-file"));
    };
    let (t, v) = (root.resolve(t), root.resolve(v));
    run.input(&t)?;
    run.input(&v)?;
    Ok((read_fseq_file(&t)?, read_fseq_file(&v)?))
}

fn binary(set: &SequenceSet, target: usize) -> Result<SequenceSet, CliError> {
    let labels = set.labels.iter().map(|&l| usize::from(l == target)).collect();
    Ok(SequenceSet::new(set.seqs.clone(), labels, 2)?)
}

impl TrainData {
    pub fn load(&self, root: &DataRoot, run: &mut Run) -> Result<(SequenceSet, SequenceSet), CliError> {
        match self.task {
            Task::Synth => {
                run.seed("data", self.data_seed);
                let task = SyntheticTask::default();
                Ok((
                    task.generate(self.n_train, self.data_seed)?,
                    task.generate(self.n_val, self.data_seed + 1)?,
                ))
            }
            Task::Fseq => two_files(self, root, run),
            Task::Kws => {
                run.seed("data", self.data_seed);
                let (t, v) = two_files(self, root, run)?;
                let val = balanced_kws_split(&v, self.target_class, self.data_seed)?;
                Ok((binary(&t, self.target_class)?, binary(&val, self.target_class)?))
            }
            Task::Smnist | Task::Pmnist => {
                let images = root.resolve(Path::new("train-images-idx3-ubyte"));
                let labels = root.resolve(Path::new("train-labels-idx1-ubyte"));
                run.input(&images)?;
                run.input(&labels)?;
                let (imgs, labs) = load_idx(&images, &labels)?;
                let mode = match (self.task, self.pixel_layout) {
                    (Task::Pmnist, _) => {
                        run.seed("permutation", self.perm_seed);
                        PixelMode::Permuted(self.perm_seed)
                    }
                    (_, PixelLayout::Row28) => PixelMode::Row28,
                    (_, PixelLayout::Raster784) => PixelMode::Raster784,
                };
                run.seed("split", self.data_seed);
                Ok(pixel_task(&imgs, &labs, mode)?.split(self.val_frac, self.data_seed)?)
            }
        }
    }
}
