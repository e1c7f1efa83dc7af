use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Serialize;

use fqbmru::analog::{
    compile as compile_net, simulate, to_currents, write_trace_csv, CalibrationTable, CircuitNetlist, Corner,
    MirrorMode, PerturbationSpec, SimOptions, DEFAULT_LEAKAGE_PA,
};
use fqbmru::analysis::{
    mismatch_mc, noise_sweep as run_sweep, power_report, select_by_margin, write_draws_csv, write_mismatch_csv,
    write_power_csv, write_sweep_csv, MismatchRun, NoiseSweepConfig,
};
use fqbmru::backbone::{majority_vote, vote_margin, AnyModel, ArchSpec, DropoutSite, InitState, SequenceModel};
use fqbmru::cells::CellKind;
use fqbmru::data::write_fseq_file;
use fqbmru::quant::{quantization_report, write_quant_csv, QuantSpec};
use fqbmru::training::{
    evaluate, load_checkpoint, save_checkpoint, sidecar_path, train as run_train, write_log_csv, CheckpointMeta,
    EpsSchedule, TrainConfig, CHECKPOINT_FORMAT,
};

use crate::data::{synth, DataRoot, EvalData, TrainData};
use crate::error::CliError;
use crate::manifest::Run;

fn config_json<T: Serialize>(args: &T) -> serde_json::Value {
    serde_json::to_value(args).unwrap_or(serde_json::Value::Null)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn parse_cell(s: &str) -> Result<CellKind, String> {
    s.parse().map_err(|e: fqbmru::Error| e.to_string())
}

fn parse_site(s: &str) -> Result<DropoutSite, String> {
    match s {
        "candidate" => Ok(DropoutSite::Candidate),
        "cell-input" => Ok(DropoutSite::CellInput),
        "off" => Ok(DropoutSite::Off),
        _ => Err(format!("unknown dropout site `{s}` (candidate, cell-input, off)")),
    }
}

fn parse_init(s: &str) -> Result<InitState, String> {
    match s {
        "zero" => Ok(InitState::Zero),
        "random" => Ok(InitState::Random),
        _ => Err(format!("unknown initial state `{s}` (zero, random)")),
    }
}

fn parse_corner(s: &str) -> Result<Corner, String> {
    s.parse().map_err(|e: fqbmru::Error| e.to_string())
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError> {
    s.split(',')
        .map(|p| p.trim().parse::<T>().map_err(|_| CliError::usage(format!("bad {what} `{p}`"))))
        .collect()
}

fn load_model(path: &Path, run: &mut Run) -> Result<(AnyModel, CheckpointMeta), CliError> {
    run.input(path)?;
    run.input(&sidecar_path(path))?;
    Ok(load_checkpoint(path)?)
}

fn load_netlist(path: &Path, run: &mut Run) -> Result<CircuitNetlist, CliError> {
    run.input(path)?;
    Ok(CircuitNetlist::from_json(&fs::read_to_string(path)?)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backbone {
    Hardware,
    Software,
}

#[derive(Args, Debug, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    data: TrainData,
    #[arg(long, value_enum, default_value_t = Backbone::Hardware)]
    backbone: Backbone,
    #[arg(long, default_value = "fq-bmru", value_parser = parse_cell)]
    cell: CellKind,
    /// State size per layer.
    #[arg(long, default_value_t = 8)]
    d: usize,
    #[arg(long, default_value_t = 2)]
    n_layers: usize,
    /// Model width of the software backbone.
    #[arg(long, default_value_t = 64)]
    m: usize,
    /// Depth of the software backbone.
    #[arg(long, default_value_t = 2)]
    r: usize,
    #[arg(long, default_value_t = 2000)]
    iters: usize,
    #[arg(long, default_value_t = 1e-2)]
    lr: f64,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, default_value_t = 1e-4)]
    weight_decay: f64,
    #[arg(long, default_value_t = 0.1)]
    dropout: f64,
    #[arg(long, default_value = "cell-input", value_parser = parse_site)]
    dropout_site: DropoutSite,
    #[arg(long, default_value = "zero", value_parser = parse_init)]
    init_state: InitState,
    /// Fractions of training spent holding eps at 1, decaying it, and at 0,
    /// e.g. `0.05,0.70,0.25`. Bistable cells only.
    #[arg(long)]
    eps_schedule: Option<String>,
    /// Train bistable cells without the eps augmentation.
    #[arg(long, conflicts_with = "eps_schedule")]
    no_eps: bool,
    #[arg(long, default_value_t = 100)]
    eval_every: usize,
    #[arg(long, default_value_t = 8)]
    eval_batches: usize,
    #[arg(long, default_value_t = 2)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

impl TrainArgs {
    fn eps(&self) -> Result<Option<EpsSchedule>, CliError> {
        if !self.cell.is_bistable() {
            if self.eps_schedule.is_some() {
                return Err(CliError::usage(format!(
                    "--eps-schedule applies to bistable cells only, not {}",
                    self.cell.name()
                )));
            }
            return Ok(None);
        }
        if self.no_eps {
            return Ok(None);
        }
        match &self.eps_schedule {
            None => Ok(Some(EpsSchedule::default())),
            Some(s) => {
                let v: Vec<f64> = parse_list(s, "eps fraction")?;
                let [hold_frac, decay_frac, zero_frac] = v[..] else {
                    return Err(CliError::usage("--eps-schedule takes three comma-separated fractions"));
                };
                let sched = EpsSchedule {
                    hold_frac,
                    decay_frac,
                    zero_frac,
                };
                sched.validate().map_err(|e| CliError::usage(e.to_string()))?;
                Ok(Some(sched))
            }
        }
    }

    fn config(&self) -> Result<TrainConfig, CliError> {
        let cfg = TrainConfig {
            lr0: self.lr,
            weight_decay: self.weight_decay,
            batch: self.batch,
            max_iters: self.iters,
            eval_every: self.eval_every,
            eval_batches: self.eval_batches,
            dropout: self.dropout,
            dropout_site: self.dropout_site,
            init_state: self.init_state,
            eps_schedule: self.eps()?,
            seed: self.seed,
            ..TrainConfig::default()
        };
        cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
        Ok(cfg)
    }
}

pub fn train(args: TrainArgs, root: &DataRoot) -> Result<(), CliError> {
    // flag problems surface before any data is read
    let cfg = args.config()?;
    let mut run = Run::start("train", &args.out, args.force, config_json(&args))?;
    run.seed("train", args.seed);
    let (train_set, val_set) = args.data.load(root, &mut run)?;
    let (n_in, n_classes) = (train_set.d_in(), train_set.n_classes);
    let arch = match args.backbone {
        Backbone::Hardware => ArchSpec::Hardware {
            cell: args.cell,
            n_in,
            d: args.d,
            n_layers: args.n_layers,
            n_classes,
        },
        Backbone::Software => ArchSpec::Software {
            cell: args.cell,
            n_in,
            m: args.m,
            r: args.r,
            d: args.d,
            n_classes,
        },
    };
    let out = run_train(arch.build(args.seed), &train_set, &val_set, &cfg)?;
    let (val_loss, val_acc) = evaluate(&out.best.model, &val_set, 64)?;
    let meta = CheckpointMeta {
        format: CHECKPOINT_FORMAT.into(),
        arch,
        config: Some(cfg),
        iteration: out.best.iter,
        val_loss,
        val_accuracy: val_acc,
        eps: out.best.eps,
    };
    save_checkpoint(&run.path("model.bmru"), &out.best.model, &meta)?;
    write_log_csv(&out.log, create(&run.path("train_log.csv"))?)?;
    for name in ["model.bmru", "model.bmru.json", "train_log.csv"] {
        run.output(name)?;
    }
    run.finish()?;
    println!(
        "val accuracy {val_acc:.4} (val loss {val_loss:.4}, best iteration {})",
        out.best.iter
    );
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct CompileArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Quantize weights and biases to this many bits first.
    #[arg(long)]
    bits: Option<u32>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

pub fn compile(args: CompileArgs) -> Result<(), CliError> {
    let quant = args
        .bits
        .map(QuantSpec::new)
        .transpose()
        .map_err(|e| CliError::usage(e.to_string()))?;
    let mut run = Run::start("compile", &args.out, args.force, config_json(&args))?;
    let (model, _) = load_model(&args.checkpoint, &mut run)?;
    let hw = model
        .as_hardware()
        .ok_or_else(|| CliError::data("only hardware-backbone checkpoints map onto the circuit"))?;
    let net = compile_net(hw, quant)?;
    fs::write(run.path("netlist.json"), net.to_json()?)?;
    run.output("netlist.json")?;
    run.finish()?;
    println!(
        "{} elements: {} mirrors, {} bias sources, {} bistable cells",
        net.element_count(),
        net.mirrors.len(),
        net.biases_pa.len(),
        net.cells.len()
    );
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Perturb {
    /// Ideal devices.
    None,
    /// Off cells leak; devices otherwise nominal.
    Leakage,
    /// One drawn die with mismatch on every element.
    Mismatch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mirrors {
    Ideal,
    Calibrated,
}

#[derive(Args, Debug, Serialize)]
pub struct SimArgs {
    #[arg(long)]
    netlist: PathBuf,
    #[command(flatten)]
    data: EvalData,
    #[arg(long, value_enum, default_value_t = Perturb::None)]
    perturb: Perturb,
    #[arg(long, default_value = "TT", value_parser = parse_corner)]
    corner: Corner,
    /// Seed of the drawn die.
    #[arg(long, default_value_t = 0)]
    mc_seed: u64,
    #[arg(long, default_value_t = DEFAULT_LEAKAGE_PA)]
    leakage_pa: f64,
    #[arg(long, value_enum, default_value_t = Mirrors::Ideal)]
    mirrors: Mirrors,
    /// Mirror calibration table (`target_ratio,input_pA,effective_ratio`);
    /// a built-in table is used otherwise.
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Sample whose full trace is written.
    #[arg(long, default_value_t = 0)]
    trace_sample: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

pub fn sim(args: SimArgs, root: &DataRoot) -> Result<(), CliError> {
    let mut run = Run::start("sim", &args.out, args.force, config_json(&args))?;
    let net = load_netlist(&args.netlist, &mut run)?;
    let set = args.data.load(root, &mut run)?;
    if args.trace_sample >= set.len() {
        return Err(CliError::usage(format!(
            "--trace-sample {} but the dataset has {} samples",
            args.trace_sample,
            set.len()
        )));
    }
    let mut opts = SimOptions::default();
    if args.mirrors == Mirrors::Calibrated {
        opts.mirror_mode = MirrorMode::Calibrated;
    }
    if let Some(p) = &args.calibration {
        run.input(p)?;
        opts.table = CalibrationTable::read_csv(File::open(p)?)?;
    }
    let base = PerturbationSpec {
        leakage_pa: args.leakage_pa,
        corner: args.corner,
        ..PerturbationSpec::leakage_only()
    };
    opts.perturbation = match args.perturb {
        Perturb::None if args.corner == Corner::TT => None,
        Perturb::None | Perturb::Leakage => Some(base),
        Perturb::Mismatch => {
            run.seed("mc", args.mc_seed);
            Some(PerturbationSpec {
                leakage_pa: args.leakage_pa,
                corner: args.corner,
                ..PerturbationSpec::mismatch(args.mc_seed)
            })
        }
    };
    let mut w = csv::Writer::from_writer(create(&run.path("predictions.csv"))?);
    w.write_record(["sample_id", "label", "prediction", "margin", "power_nW"])?;
    let mut correct = 0;
    for (i, (seq, &label)) in set.seqs.iter().zip(&set.labels).enumerate() {
        let tr = simulate(&net, &to_currents(seq), &opts)?;
        let pred = majority_vote(tr.logits());
        correct += usize::from(pred == label);
        w.write_record([
            i.to_string(),
            label.to_string(),
            pred.to_string(),
            vote_margin(tr.logits()).to_string(),
            tr.total_power_nw().to_string(),
        ])?;
        if i == args.trace_sample {
            write_trace_csv(&tr, create(&run.path("trace.csv"))?)?;
        }
    }
    w.flush()?;
    drop(w);
    run.output("predictions.csv")?;
    run.output("trace.csv")?;
    run.finish()?;
    println!("accuracy {:.4} over {} samples", correct as f64 / set.len() as f64, set.len());
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct NoiseSweepArgs {
    /// `name=checkpoint`, repeatable.
    #[arg(long = "model", required = true)]
    models: Vec<String>,
    #[command(flatten)]
    data: EvalData,
    /// Noise levels as multiples of --noise-rel.
    #[arg(long, default_value = "0.5,1,2,4")]
    levels: String,
    /// Noise standard deviation at level 1, relative to each signal's RMS.
    #[arg(long, default_value_t = 0.05)]
    noise_rel: f64,
    #[arg(long, default_value_t = 10)]
    instantiations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

pub fn noise_sweep(args: NoiseSweepArgs, root: &DataRoot) -> Result<(), CliError> {
    let cfg = NoiseSweepConfig {
        levels: parse_list(&args.levels, "noise level")?,
        analog_noise_rel: args.noise_rel,
        instantiations: args.instantiations,
        seed: args.seed,
        ..NoiseSweepConfig::default()
    };
    cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let specs = args
        .models
        .iter()
        .map(|m| {
            m.split_once('=')
                .map(|(n, p)| (n.to_string(), PathBuf::from(p)))
                .ok_or_else(|| CliError::usage(format!("--model expects name=checkpoint, got `{m}`")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut run = Run::start("noise-sweep", &args.out, args.force, config_json(&args))?;
    run.seed("noise", args.seed);
    let mut models = Vec::new();
    for (name, path) in &specs {
        models.push((name.as_str(), load_model(path, &mut run)?.0));
    }
    let set = args.data.load(root, &mut run)?;
    let variants: Vec<(&str, &dyn SequenceModel)> = models.iter().map(|(n, m)| (*n, m as &dyn SequenceModel)).collect();
    let rows = run_sweep(&variants, &set, &cfg)?;
    write_sweep_csv(&rows, create(&run.path("sweep.csv"))?)?;
    run.output("sweep.csv")?;
    run.finish()?;
    for r in &rows {
        println!("{} {} {:.4}", r.variant, r.level, r.accuracy);
    }
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct McArgs {
    #[arg(long)]
    netlist: PathBuf,
    #[command(flatten)]
    data: EvalData,
    /// Number of Monte Carlo draws.
    #[arg(long, default_value_t = 200)]
    samples: usize,
    /// Evaluate only this many inputs, picked at evenly spaced margin ranks.
    #[arg(long)]
    subset: Option<usize>,
    #[arg(long, default_value_t = 0.02)]
    mirror_sigma: f64,
    #[arg(long, default_value_t = 0.04)]
    thresh_sigma: f64,
    #[arg(long, default_value_t = 0.03)]
    gain_sigma: f64,
    #[arg(long, default_value_t = DEFAULT_LEAKAGE_PA)]
    leakage_pa: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

pub fn mc(args: McArgs, root: &DataRoot) -> Result<(), CliError> {
    let mc_run = MismatchRun {
        samples: args.samples,
        mirror_sigma: args.mirror_sigma,
        thresh_sigma: args.thresh_sigma,
        gain_sigma: args.gain_sigma,
        leakage_pa: args.leakage_pa,
        seed: args.seed,
    };
    mc_run.spec(0).validate().map_err(|e| CliError::usage(e.to_string()))?;
    if args.samples == 0 {
        return Err(CliError::usage("--samples must be at least 1"));
    }
    let mut run = Run::start("mc", &args.out, args.force, config_json(&args))?;
    run.seed("mc", args.seed);
    let net = load_netlist(&args.netlist, &mut run)?;
    let set = args.data.load(root, &mut run)?;
    let seqs = match args.subset {
        Some(k) => select_by_margin(&net, &set.seqs, k)?
            .into_iter()
            .map(|i| set.seqs[i].clone())
            .collect(),
        None => set.seqs.clone(),
    };
    let report = mismatch_mc(&net, &seqs, &mc_run)?;
    write_mismatch_csv(&report, create(&run.path("mc_samples.csv"))?)?;
    write_draws_csv(&report, &mc_run, create(&run.path("mc_draws.csv"))?)?;
    run.output("mc_samples.csv")?;
    run.output("mc_draws.csv")?;
    run.finish()?;
    let impaired = report.records.iter().filter(|r| r.impaired_rate > 0.0).count();
    println!("{impaired} of {} inputs flipped in at least one of {} draws", seqs.len(), args.samples);
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct PowerArgs {
    /// State size; repeatable.
    #[arg(long = "d", default_values_t = [4, 8, 16, 32, 64])]
    ds: Vec<usize>,
    #[arg(long, default_value_t = 2)]
    n_layers: usize,
    /// Also write power.csv and a manifest here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

pub fn power(args: PowerArgs) -> Result<(), CliError> {
    let rows = args
        .ds
        .iter()
        .map(|&d| power_report(d, args.n_layers))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::usage(e.to_string()))?;
    for r in &rows {
        println!("{},{}", r.p_bmru_nw, r.p_fc_nw);
    }
    if let Some(out) = &args.out {
        let mut run = Run::start("power", out, args.force, config_json(&args))?;
        write_power_csv(&rows, create(&run.path("power.csv"))?)?;
        run.output("power.csv")?;
        run.finish()?;
    }
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct QuantArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    data: EvalData,
    /// Bit widths; 0 stands for full precision.
    #[arg(long, default_value = "0,8,6,4,3,2,1")]
    bits: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

pub fn quant_report(args: QuantArgs, root: &DataRoot) -> Result<(), CliError> {
    let bits: Vec<u32> = parse_list(&args.bits, "bit width")?;
    for &b in bits.iter().filter(|&&b| b != 0) {
        QuantSpec::new(b).map_err(|e| CliError::usage(e.to_string()))?;
    }
    let mut run = Run::start("quant-report", &args.out, args.force, config_json(&args))?;
    let (model, _) = load_model(&args.checkpoint, &mut run)?;
    let set = args.data.load(root, &mut run)?;
    let rows = quantization_report(&model, &set, &bits)?;
    write_quant_csv(&rows, create(&run.path("quant.csv"))?)?;
    run.output("quant.csv")?;
    run.finish()?;
    for r in &rows {
        println!("{} {:.4}", r.bits, r.accuracy);
    }
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct GenSynthArgs {
    #[arg(long, default_value_t = 64)]
    n: usize,
    #[arg(long, default_value_t = 4)]
    seed: u64,
    /// Weaker and later keywords.
    #[arg(long)]
    boundary: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

pub fn gen_synth(args: GenSynthArgs) -> Result<(), CliError> {
    let mut run = Run::start("gen-synth", &args.out, args.force, config_json(&args))?;
    run.seed("data", args.seed);
    let set = synth(args.boundary).generate(args.n, args.seed)?;
    write_fseq_file(&run.path("data.fseq"), &set)?;
    run.output("data.fseq")?;
    run.finish()?;
    println!("{} samples, {} steps, {} features", set.len(), set.t_len(), set.d_in());
    Ok(())
}
