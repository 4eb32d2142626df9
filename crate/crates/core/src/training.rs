//! Adam with L1 + L2 penalties, eigen-directed feature augmentation and the
//! seeded epoch loop.
//!
//! Seeds: parameters are initialized from substream 0 of `seed`, epoch
//! shuffles draw from substream 1 and augmentation noise from substream 2.
//! Gradients within a batch are summed in clip order, so a run is a pure
//! function of its inputs and config.

use std::fmt::Write as _;
use std::time::Instant;

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::EdgeConfig;
use crate::model::{backward, cross_entropy, forward, Gradients, ModelDims, ModelParams};
use crate::numerics::{sym_eigen, Matrix, Real, Rng};
use crate::scene::{ClipTensor, DataConfig};

/// Cue ablation switches; each `true` removes one cue.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ablation {
    pub head_orientation: bool,
    pub head_localization: bool,
    pub mutual_attention: bool,
    pub pairwise_distance: bool,
    pub first_person_motion: bool,
}

impl Ablation {
    pub const NAMES: [&'static str; 5] = [
        "head-orientation",
        "head-localization",
        "mutual-attention",
        "pairwise-distance",
        "first-person-motion",
    ];

    /// Enables the switch named as in [`Ablation::NAMES`].
    pub fn set(&mut self, name: &str) -> Result<()> {
        match name {
            "head-orientation" => self.head_orientation = true,
            "head-localization" => self.head_localization = true,
            "mutual-attention" => self.mutual_attention = true,
            "pairwise-distance" => self.pairwise_distance = true,
            "first-person-motion" => self.first_person_motion = true,
            other => {
                return Err(Error::invalid(format!(
                    "unknown ablation `{other}` (expected one of {})",
                    Self::NAMES.join(", ")
                )))
            }
        }
        Ok(())
    }

    pub fn active(&self) -> Vec<&'static str> {
        let flags = [
            self.head_orientation,
            self.head_localization,
            self.mutual_attention,
            self.pairwise_distance,
            self.first_person_motion,
        ];
        Self::NAMES.iter().zip(flags).filter(|(_, f)| *f).map(|(n, _)| *n).collect()
    }

    /// Data and model settings with the disabled cues switched off.
    pub fn apply(&self, data: &DataConfig, dims: &ModelDims) -> (DataConfig, ModelDims) {
        let data = DataConfig {
            use_orientation: data.use_orientation && !self.head_orientation,
            use_localization: data.use_localization && !self.head_localization,
            edges: EdgeConfig {
                use_attention: data.edges.use_attention && !self.mutual_attention,
                use_distance: data.edges.use_distance && !self.pairwise_distance,
                ..data.edges
            },
            ..*data
        };
        let dims = ModelDims {
            use_motion: dims.use_motion && !self.first_person_motion,
            m_max: data.m_max,
            ..*dims
        };
        (data, dims)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay_l2: f64,
    pub l1_coeff: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub augment: bool,
    pub augmentation_std: f64,
    pub ablation: Ablation,
    /// Record wall-clock seconds in the history; off keeps histories byte-stable.
    pub record_timing: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::synthetic()
    }
}

impl TrainConfig {
    /// Preset tuned for the synthetic corpus.
    pub fn synthetic() -> Self {
        Self {
            learning_rate: 1e-3,
            weight_decay_l2: 0.005,
            l1_coeff: 1e-5,
            epochs: 60,
            batch_size: 8,
            seed: 0,
            augment: true,
            augmentation_std: 1e-4,
            ablation: Ablation::default(),
            record_timing: false,
        }
    }

    /// Small learning rate and long schedule, suited to large real-video corpora.
    pub fn conservative() -> Self {
        Self {
            learning_rate: 1e-6,
            epochs: 83,
            ..Self::synthetic()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be finite and nonnegative"));
        }
        if !(self.weight_decay_l2 >= 0.0) || !(self.l1_coeff >= 0.0) {
            return Err(Error::invalid("regularization coefficients must be nonnegative"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be positive"));
        }
        if !(self.augmentation_std >= 0.0) {
            return Err(Error::invalid("augmentation_std must be nonnegative"));
        }
        Ok(())
    }
}

/// First and second moment estimates for Adam.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub first: ModelParams<T>,
    pub second: ModelParams<T>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl<T: Real> AdamState<T> {
    pub fn new(dims: ModelDims) -> Result<Self> {
        Ok(Self {
            first: ModelParams::zeros(dims)?,
            second: ModelParams::zeros(dims)?,
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        })
    }
}

/// Regularization added to the data gradient before the moment update.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Penalty {
    pub l2: f64,
    pub l1: f64,
}

/// One bias-corrected Adam update. The effective gradient is
/// `g + l2 · θ + l1 · sign(θ)`.
pub fn adam_step<T: Real>(
    params: &mut ModelParams<T>,
    grads: &Gradients<T>,
    state: &mut AdamState<T>,
    lr: f64,
    penalty: Penalty,
) -> Result<()> {
    if params.dims != grads.dims || params.dims != state.first.dims {
        return Err(Error::invalid("adam_step: parameter, gradient and state dims differ"));
    }
    state.step += 1;
    let (b1, b2) = (T::of(state.beta1), T::of(state.beta2));
    let one = T::one();
    let c1 = one - b1.powi(state.step as i32);
    let c2 = one - b2.powi(state.step as i32);
    let (lr, eps, l2, l1) = (T::of(lr), T::of(state.eps), T::of(penalty.l2), T::of(penalty.l1));
    let blocks = params
        .blocks_mut()
        .into_iter()
        .zip(grads.blocks())
        .zip(state.first.blocks_mut().into_iter().zip(state.second.blocks_mut()));
    for (((_, theta), (_, g)), ((_, m), (_, v))) in blocks {
        let theta = theta.as_mut_slice();
        let (m, v) = (m.as_mut_slice(), v.as_mut_slice());
        for (k, &gk) in g.as_slice().iter().enumerate() {
            let th = theta[k];
            let sign = if th > T::zero() {
                one
            } else if th < T::zero() {
                -one
            } else {
                T::zero()
            };
            let ge = gk + l2 * th + l1 * sign;
            m[k] = b1 * m[k] + (one - b1) * ge;
            v[k] = b2 * v[k] + (one - b2) * ge * ge;
            let m_hat = m[k] / c1;
            let v_hat = v[k] / c2;
            theta[k] = th - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Noise model fitted to the corpus of per-person feature vectors.
///
/// Each perturbation is `Σ_k g_k λ_k v_k` with `g_k ~ N(0, std)`, where
/// `(λ_k, v_k)` are the covariance eigenpairs. The wearer slot and padding
/// are never perturbed.
#[derive(Clone, Debug)]
pub struct Augmenter<T> {
    pub eigenvalues: Vec<T>,
    /// Eigenvectors as columns.
    pub eigenvectors: Matrix<T>,
    pub samples: usize,
}

fn person_rows<T: Real>(clip: &ClipTensor<T>) -> impl Iterator<Item = (usize, usize)> + '_ {
    clip.node_mask
        .iter()
        .enumerate()
        .flat_map(|(t, mask)| mask.iter().enumerate().skip(1).filter(|(_, &m)| m).map(move |(s, _)| (t, s)))
}

impl<T: Real> Augmenter<T> {
    /// Returns `None` when there are fewer person vectors than features.
    pub fn fit(dataset: &[ClipTensor<T>]) -> Result<Option<Self>> {
        let dim = match dataset.first() {
            Some(c) if c.frames() > 0 => c.node_features[0].cols(),
            _ => return Err(Error::invalid("augmentation needs a nonempty dataset")),
        };
        let mut n = 0usize;
        let mut mean = vec![T::zero(); dim];
        for clip in dataset {
            for (t, s) in person_rows(clip) {
                for (m, &x) in mean.iter_mut().zip(clip.node_features[t].row(s)) {
                    *m += x;
                }
                n += 1;
            }
        }
        if n < dim {
            warn!("augmentation skipped: {n} person vectors for {dim} features");
            return Ok(None);
        }
        let nf = T::of(n as f64);
        mean.iter_mut().for_each(|m| *m /= nf);
        let mut cov = Matrix::<T>::zeros(dim, dim);
        let mut centered = vec![T::zero(); dim];
        for clip in dataset {
            for (t, s) in person_rows(clip) {
                for ((c, &x), &m) in centered.iter_mut().zip(clip.node_features[t].row(s)).zip(&mean) {
                    *c = x - m;
                }
                cov.add_outer(T::one(), &centered, &centered);
            }
        }
        cov.scale_in_place(T::one() / T::of((n - 1).max(1) as f64));
        let eig = sym_eigen(&cov)?;
        Ok(Some(Self {
            eigenvalues: eig.values.into_iter().map(|l| l.max(T::zero())).collect(),
            eigenvectors: eig.vectors,
            samples: n,
        }))
    }

    /// One perturbation vector.
    pub fn noise(&self, rng: &mut Rng, std: f64) -> Vec<T> {
        let dim = self.eigenvalues.len();
        let mut delta = vec![T::zero(); dim];
        if std == 0.0 {
            return delta;
        }
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            let g = T::of(rng.normal(0.0, std));
            for (i, d) in delta.iter_mut().enumerate() {
                *d += g * lambda * self.eigenvectors[(i, k)];
            }
        }
        delta
    }

    pub fn perturb(&self, clip: &ClipTensor<T>, rng: &mut Rng, std: f64) -> ClipTensor<T> {
        let mut out = clip.clone();
        if std == 0.0 {
            return out;
        }
        let rows: Vec<(usize, usize)> = person_rows(clip).collect();
        for (t, s) in rows {
            let delta = self.noise(rng, std);
            for (x, d) in out.node_features[t].row_mut(s).iter_mut().zip(delta) {
                *x += d;
            }
        }
        out
    }
}

/// Perturbed copies of every clip; the input is returned unchanged when the
/// corpus is too small to estimate a covariance.
pub fn augment_features<T: Real>(dataset: &[ClipTensor<T>], rng: &mut Rng, std: f64) -> Result<Vec<ClipTensor<T>>> {
    if !(std >= 0.0) {
        return Err(Error::invalid(format!("negative augmentation std {std}")));
    }
    match Augmenter::fit(dataset)? {
        Some(aug) => Ok(dataset.iter().map(|c| aug.perturb(c, rng, std)).collect()),
        None => Ok(dataset.to_vec()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: Option<f64>,
    pub val_acc: Option<f64>,
    pub seconds: f64,
}

pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,train_loss,train_acc,val_loss,val_acc,seconds\n");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in history {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.epoch,
            r.train_loss,
            r.train_acc,
            opt(r.val_loss),
            opt(r.val_acc),
            r.seconds
        );
    }
    out
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    pub params: ModelParams<T>,
    pub history: Vec<EpochRecord>,
    /// Epoch whose parameters were returned (best validation accuracy, or the last).
    pub selected_epoch: usize,
}

/// Mean cross-entropy and top-1 predictions over `clips`.
pub fn predict_all<T: Real>(params: &ModelParams<T>, clips: &[ClipTensor<T>]) -> Result<(f64, Vec<usize>)> {
    let mut total = 0.0;
    let mut preds = Vec::with_capacity(clips.len());
    for clip in clips {
        let tr = forward(clip, params)?;
        total += cross_entropy(&tr, clip.label).as_f64();
        preds.push(tr.predicted());
    }
    Ok((total / clips.len().max(1) as f64, preds))
}

fn accuracy(preds: &[usize], clips: &[ClipTensor<impl Real>]) -> f64 {
    let hits = preds.iter().zip(clips).filter(|(p, c)| **p == c.label).count();
    hits as f64 / clips.len().max(1) as f64
}

/// Trains from a fresh initialization.
pub fn train<T: Real>(
    train_set: &[ClipTensor<T>],
    val_set: Option<&[ClipTensor<T>]>,
    dims: ModelDims,
    config: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let mut init_rng = Rng::substream(config.seed, 0);
    let params = ModelParams::init(dims, &mut init_rng)?;
    train_from(params, train_set, val_set, config)
}

/// Trains starting from `params`.
pub fn train_from<T: Real>(
    mut params: ModelParams<T>,
    train_set: &[ClipTensor<T>],
    val_set: Option<&[ClipTensor<T>]>,
    config: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let classes: std::collections::BTreeSet<usize> = train_set.iter().map(|c| c.label).collect();
    if classes.len() < 2 {
        warn!("training set has a single class; the classifier will be degenerate");
    }
    let val_set = val_set.filter(|v| !v.is_empty());
    let mut shuffle_rng = Rng::substream(config.seed, 1);
    let mut noise_rng = Rng::substream(config.seed, 2);
    let augmenter = if config.augment && config.augmentation_std > 0.0 {
        Augmenter::fit(train_set)?
    } else {
        None
    };
    let mut adam = AdamState::new(params.dims)?;
    let penalty = Penalty {
        l2: config.weight_decay_l2,
        l1: config.l1_coeff,
    };
    let start = Instant::now();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, f64, usize, ModelParams<T>)> = None;
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=config.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut hits = 0usize;
        for batch in order.chunks(config.batch_size) {
            let mut acc = ModelParams::zeros(params.dims)?;
            for &idx in batch {
                let perturbed;
                let clip = match &augmenter {
                    Some(a) => {
                        perturbed = a.perturb(&train_set[idx], &mut noise_rng, config.augmentation_std);
                        &perturbed
                    }
                    None => &train_set[idx],
                };
                let trace = forward(clip, &params)?;
                if trace.predicted() == clip.label {
                    hits += 1;
                }
                let (l, g) = backward(&trace, clip, &params, clip.label)?;
                loss_sum += l.as_f64();
                acc.add_scaled(T::one(), &g);
            }
            acc.scale_in_place(T::one() / T::of(batch.len() as f64));
            adam_step(&mut params, &acc, &mut adam, config.learning_rate, penalty)?;
        }
        if !params.is_finite() {
            return Err(Error::Numeric(format!("parameters diverged in epoch {epoch}")));
        }
        let train_loss = loss_sum / train_set.len() as f64;
        let train_acc = hits as f64 / train_set.len() as f64;
        let (val_loss, val_acc) = match val_set {
            Some(v) => {
                let (l, preds) = predict_all(&params, v)?;
                (Some(l), Some(accuracy(&preds, v)))
            }
            None => (None, None),
        };
        if let (Some(vl), Some(va)) = (val_loss, val_acc) {
            let better = match &best {
                None => true,
                Some((ba, bl, _, _)) => va > *ba || (va == *ba && vl < *bl),
            };
            if better {
                best = Some((va, vl, epoch, params.clone()));
            }
        }
        let seconds = if config.record_timing {
            start.elapsed().as_secs_f64()
        } else {
            0.0
        };
        debug!("epoch {epoch}: loss {train_loss:.4} acc {train_acc:.3} val {val_acc:?}");
        history.push(EpochRecord {
            epoch,
            train_loss,
            train_acc,
            val_loss,
            val_acc,
            seconds,
        });
    }
    let (params, selected_epoch) = match best {
        Some((va, _, epoch, p)) => {
            info!("selected epoch {epoch} (val acc {va:.3})");
            (p, epoch)
        }
        None => (params, config.epochs),
    };
    Ok(TrainOutcome {
        params,
        history,
        selected_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_params(theta: f64) -> ModelParams<f64> {
        let dims = ModelDims {
            m_max: 1,
            d_in: 1,
            h_graph: 1,
            hidden: 1,
            use_motion: false,
            ..ModelDims::default()
        };
        let mut p = ModelParams::zeros(dims).unwrap();
        p.b_c.as_mut_slice()[0] = theta;
        p
    }

    fn grad_of(p: &ModelParams<f64>, f: impl Fn(f64) -> f64) -> ModelParams<f64> {
        let mut g = ModelParams::zeros(p.dims).unwrap();
        g.b_c.as_mut_slice()[0] = f(p.b_c.as_slice()[0]);
        g
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        for g0 in [1e-3, 0.5, -2.0, 40.0] {
            let mut p = scalar_params(0.3);
            let g = grad_of(&p, |_| g0);
            let mut st = AdamState::new(p.dims).unwrap();
            adam_step(&mut p, &g, &mut st, 0.01, Penalty::default()).unwrap();
            let moved = 0.3 - p.b_c.as_slice()[0];
            assert!((moved - 0.01 * g0.signum()).abs() <= 0.01 * 1e-5, "{g0}: {moved}");
        }
    }

    #[test]
    fn zero_gradient_no_penalty_is_a_no_op() {
        let mut p = scalar_params(0.7);
        let before = p.clone();
        let g = ModelParams::zeros(p.dims).unwrap();
        let mut st = AdamState::new(p.dims).unwrap();
        for _ in 0..10 {
            adam_step(&mut p, &g, &mut st, 0.1, Penalty::default()).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn converges_on_quadratic() {
        let mut p = scalar_params(1.0);
        let mut st = AdamState::new(p.dims).unwrap();
        for _ in 0..100 {
            let g = grad_of(&p, |t| 2.0 * t);
            adam_step(&mut p, &g, &mut st, 0.1, Penalty::default()).unwrap();
        }
        assert!(p.b_c.as_slice()[0].abs() < 0.05, "{}", p.b_c.as_slice()[0]);
    }

    #[test]
    fn l2_alone_shrinks_every_magnitude() {
        let dims = ModelDims {
            m_max: 2,
            h_graph: 2,
            hidden: 3,
            ..ModelDims::default()
        };
        // Adam moves each coordinate by about lr per step, so the magnitudes
        // are kept above the 50-step budget to stay on one side of zero.
        let mut p = ModelParams::<f64>::zeros(dims).unwrap();
        let mut rng = Rng::new(1);
        for (_, m) in p.blocks_mut() {
            for (k, v) in m.as_mut_slice().iter_mut().enumerate() {
                let sign = if rng.bernoulli(0.5) { 1.0 } else { -1.0 };
                *v = if k % 7 == 3 { 0.0 } else { sign * rng.uniform_range(0.1, 0.5) };
            }
        }
        let zero = ModelParams::zeros(dims).unwrap();
        let mut st = AdamState::new(dims).unwrap();
        let penalty = Penalty { l2: 0.005, l1: 0.0 };
        for _ in 0..50 {
            let before = p.clone();
            adam_step(&mut p, &zero, &mut st, 1e-3, penalty).unwrap();
            for ((_, a), (_, b)) in p.blocks().into_iter().zip(before.blocks()) {
                for (&x, &y) in a.as_slice().iter().zip(b.as_slice()) {
                    let (x, y): (f64, f64) = (x, y);
                    assert!(x.abs() <= y.abs());
                    assert!(y == 0.0 || x.abs() < y.abs());
                }
            }
        }
    }

    #[test]
    fn ablation_names_round_trip() {
        let mut a = Ablation::default();
        for n in Ablation::NAMES {
            a.set(n).unwrap();
        }
        assert_eq!(a.active(), Ablation::NAMES.to_vec());
        assert!(a.set("gaze").is_err());
        let (data, dims) = a.apply(&DataConfig::default(), &ModelDims::default());
        assert!(!data.use_orientation && !data.use_localization);
        assert!(!data.edges.use_attention && !data.edges.use_distance);
        assert!(!dims.use_motion);
    }

    #[test]
    fn history_csv_layout() {
        let h = vec![EpochRecord {
            epoch: 1,
            train_loss: 1.5,
            train_acc: 0.25,
            val_loss: None,
            val_acc: None,
            seconds: 0.0,
        }];
        assert_eq!(history_csv(&h), "epoch,train_loss,train_acc,val_loss,val_acc,seconds\n1,1.5,0.25,,,0\n");
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::synthetic().validate().is_ok());
        assert_eq!(TrainConfig::conservative().learning_rate, 1e-6);
        assert!(TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        }
        .validate()
        .is_err());
    }
}
