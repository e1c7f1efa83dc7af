use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adamw::AdamW;
use super::schedule::{lr_at, TrainConfig};
use crate::autodiff::{GradStore, Tape};
use crate::backbone::{majority_vote, sample_rows, time_major, ForwardCtx, SequenceModel};
use crate::data::SequenceSet;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub iter: usize,
    pub loss: f64,
    pub val_loss: Option<f64>,
    pub eps: f64,
    pub lr: f64,
}

/// Parameters at the best validation loss among `eps = 0` evaluations.
#[derive(Clone, Debug)]
pub struct Checkpoint<M> {
    pub model: M,
    pub iter: usize,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub eps: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<M> {
    pub best: Checkpoint<M>,
    pub log: Vec<LogRow>,
}

fn row_labels(labels: &[usize], t_len: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(labels.len() * t_len);
    for _ in 0..t_len {
        out.extend_from_slice(labels);
    }
    out
}

/// Mean over timesteps of `-log softmax(logits[t])[label]` for one
/// `T x C` sequence.
pub fn ce_loss_over_time(logits: &Tensor, label: usize) -> Result<f64> {
    let tape = Tape::new();
    let labels = vec![label; logits.rows()];
    Ok(tape.constant(logits.clone()).cross_entropy(&labels)?.value().data()[0])
}

/// Eval-mode loss and majority-vote accuracy over `set`, in chunks of
/// `batch` sequences.
pub fn evaluate<M: SequenceModel + ?Sized>(model: &M, set: &SequenceSet, batch: usize) -> Result<(f64, f64)> {
    let mut loss_sum = 0.0;
    let mut rows = 0usize;
    let mut correct = 0usize;
    for (seqs, labels) in set.seqs.chunks(batch.max(1)).zip(set.labels.chunks(batch.max(1))) {
        let refs: Vec<&Tensor> = seqs.iter().collect();
        let x = time_major(&refs)?;
        let t_len = seqs[0].rows();
        let tape = Tape::new();
        let mut ctx = ForwardCtx::eval(&tape);
        let logits = model.forward(&mut ctx, tape.constant(x), seqs.len())?;
        let n = logits.shape().0;
        let loss = logits.cross_entropy(&row_labels(labels, t_len))?.value().data()[0];
        loss_sum += loss * n as f64;
        rows += n;
        let lv = logits.value();
        for (b, &y) in labels.iter().enumerate() {
            if majority_vote(&sample_rows(&lv, seqs.len(), b)) == y {
                correct += 1;
            }
        }
    }
    if rows == 0 {
        return Err(Error::Data("evaluation set is empty".into()));
    }
    Ok((loss_sum / rows as f64, correct as f64 / set.len() as f64))
}

/// The full recipe: AdamW, warm-up + cosine learning rate, global-norm
/// clipping, timestep-averaged cross-entropy, dropout, `eps` annealing and
/// periodic validation. Returns the best `eps = 0` checkpoint.
pub fn train<M: SequenceModel + Clone>(
    model: M,
    train_set: &SequenceSet,
    val_set: &SequenceSet,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<M>> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Data("training and validation sets must be non-empty".into()));
    }
    let val_subset = val_set.head(cfg.eval_batches * cfg.batch);
    let mut model = model;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = AdamW::new(cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    order.shuffle(&mut rng);
    let mut cursor = 0;
    let mut log = Vec::with_capacity(cfg.max_iters);
    let mut best: Option<Checkpoint<M>> = None;
    let mut grads = GradStore::new();

    for it in 0..cfg.max_iters {
        let eps = cfg.eps_at_iter(it);
        let lr = lr_at(cfg, it);
        let mut idx = Vec::with_capacity(cfg.batch);
        while idx.len() < cfg.batch {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            idx.push(order[cursor]);
            cursor += 1;
        }
        let seqs: Vec<&Tensor> = idx.iter().map(|&i| &train_set.seqs[i]).collect();
        let labels: Vec<usize> = idx.iter().map(|&i| train_set.labels[i]).collect();
        let t_len = seqs[0].rows();

        let tape = Tape::new();
        let loss = {
            let mut ctx = ForwardCtx::train(&tape, eps, cfg.dropout, cfg.dropout_site, &mut rng)
                .with_init_state(cfg.init_state);
            let logits = model.forward(&mut ctx, tape.constant(time_major(&seqs)?), seqs.len())?;
            logits.cross_entropy(&row_labels(&labels, t_len))?
        };
        let loss_value = loss.value().data()[0];
        grads.zero();
        tape.backward(loss, &mut grads)?;
        if !loss_value.is_finite() || !grads.all_finite() {
            return Err(Error::Numerical(format!(
                "non-finite loss or gradient at iteration {it} (loss {loss_value}, eps {eps}, lr {lr}); batch indices {idx:?}"
            )));
        }
        grads.clip_global_norm(cfg.clip_norm);
        opt.step(&mut model, &grads, lr);

        let done = it + 1;
        let mut row = LogRow {
            iter: done,
            loss: loss_value,
            val_loss: None,
            eps,
            lr,
        };
        if done % cfg.eval_every == 0 || done == cfg.max_iters {
            let (val_loss, val_acc) = evaluate(&model, &val_subset, cfg.batch)?;
            row.val_loss = Some(val_loss);
            let eligible = eps == 0.0;
            if eligible && best.as_ref().is_none_or(|b| val_loss < b.val_loss) {
                best = Some(Checkpoint {
                    model: model.clone(),
                    iter: done,
                    val_loss,
                    val_accuracy: val_acc,
                    eps,
                });
            }
        }
        log.push(row);
    }
    let best = best.ok_or_else(|| {
        Error::Numerical("no evaluation happened with eps = 0; lengthen training or the zero phase".into())
    })?;
    Ok(TrainOutcome { best, log })
}

/// Writes the training curve as `iter,loss,val_loss,eps,lr`.
pub fn write_log_csv<W: Write>(rows: &[LogRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iter", "loss", "val_loss", "eps", "lr"])?;
    for r in rows {
        w.write_record([
            r.iter.to_string(),
            r.loss.to_string(),
            r.val_loss.map(|v| v.to_string()).unwrap_or_default(),
            r.eps.to_string(),
            r.lr.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
