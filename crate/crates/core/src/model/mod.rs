//! Relational graph convolution per frame, a GRU over frames, max+mean
//! temporal pooling and a softmax classifier, with reverse-mode gradients.
//!
//! Per frame `t` the R-GCN output `g_t` (`M_max × H_g`) is flattened
//! slot-major and concatenated with the 9 motion values into `x_t`. The GRU
//! starts from `H_0 = 0`; the head pools `H_1..H_T` into
//! `[max_t H_t, mean_t H_t]` and applies `logits = W_cᵀ pooled + b_c`.

mod checkpoint;
mod gru;
mod rgcn;

use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use gru::{gru_step, GruParams, GruStep};
pub use rgcn::{rgcn_layer, LayerTrace, RelationalLayer};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Real, Rng};
use crate::scene::{ClipTensor, MOTION_FEATURES, NODE_FEATURES, NUM_CLASSES};

/// Architecture dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelDims {
    pub m_max: usize,
    pub d_in: usize,
    /// Width of every R-GCN layer.
    pub h_graph: usize,
    /// GRU hidden size.
    pub hidden: usize,
    pub gcn_layers: usize,
    /// Whether `x_t` carries the first-person motion vector.
    pub use_motion: bool,
    pub classes: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        Self {
            m_max: 6,
            d_in: NODE_FEATURES,
            h_graph: 16,
            hidden: 64,
            gcn_layers: 1,
            use_motion: true,
            classes: NUM_CLASSES,
        }
    }
}

impl ModelDims {
    pub fn d_x(&self) -> usize {
        self.m_max * self.h_graph + if self.use_motion { MOTION_FEATURES } else { 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_max == 0 || self.d_in == 0 || self.h_graph == 0 || self.hidden == 0 || self.classes < 2 {
            return Err(Error::invalid(format!("degenerate model dims {self:?}")));
        }
        if self.gcn_layers == 0 {
            return Err(Error::invalid("at least one R-GCN layer is required"));
        }
        Ok(())
    }
}

/// All learnable tensors. Also used for gradients of the same shapes.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    pub dims: ModelDims,
    pub gcn: Vec<RelationalLayer<T>>,
    pub gru: GruParams<T>,
    /// `2H × classes`
    pub w_c: Matrix<T>,
    /// `classes × 1`
    pub b_c: Matrix<T>,
}

/// `∂loss/∂θ`, laid out like [`ModelParams`].
pub type Gradients<T> = ModelParams<T>;

impl<T: Real> ModelParams<T> {
    pub fn zeros(dims: ModelDims) -> Result<Self> {
        dims.validate()?;
        let gcn = (0..dims.gcn_layers)
            .map(|k| RelationalLayer::zeros(if k == 0 { dims.d_in } else { dims.h_graph }, dims.h_graph))
            .collect();
        Ok(Self {
            dims,
            gcn,
            gru: GruParams::zeros(dims.d_x(), dims.hidden),
            w_c: Matrix::zeros(2 * dims.hidden, dims.classes),
            b_c: Matrix::zeros(dims.classes, 1),
        })
    }

    /// Glorot-uniform weights `U(±√(6 / (fan_in + fan_out)))`, zero biases.
    pub fn init(dims: ModelDims, rng: &mut Rng) -> Result<Self> {
        let mut p = Self::zeros(dims)?;
        for (name, m) in p.blocks_mut() {
            if name.starts_with('b') {
                continue;
            }
            // R-GCN weights are in × out, GRU weights out × in; both sums agree
            let limit = (6.0 / (m.rows() + m.cols()) as f64).sqrt();
            for v in m.as_mut_slice() {
                *v = T::of(rng.uniform_range(-limit, limit));
            }
        }
        Ok(p)
    }

    /// Parameter blocks in declared (checkpoint) order.
    pub fn blocks(&self) -> Vec<(String, &Matrix<T>)> {
        let mut out = Vec::new();
        let multi = self.gcn.len() > 1;
        for (k, l) in self.gcn.iter().enumerate() {
            let suffix = if multi { format!("[{k}]") } else { String::new() };
            out.push((format!("W_d{suffix}"), &l.w_distance));
            out.push((format!("W_a{suffix}"), &l.w_attention));
            out.push((format!("W_0{suffix}"), &l.w_self));
        }
        let g = &self.gru;
        for (name, m) in [
            ("W_xz", &g.w_xz),
            ("W_Hz", &g.w_hz),
            ("b_z", &g.b_z),
            ("W_xr", &g.w_xr),
            ("W_Hr", &g.w_hr),
            ("b_r", &g.b_r),
            ("W_xH", &g.w_xh),
            ("W_HH", &g.w_hh),
            ("b_H", &g.b_h),
            ("W_c", &self.w_c),
            ("b_c", &self.b_c),
        ] {
            out.push((name.to_string(), m));
        }
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<(String, &mut Matrix<T>)> {
        let mut out = Vec::new();
        let multi = self.gcn.len() > 1;
        for (k, l) in self.gcn.iter_mut().enumerate() {
            let suffix = if multi { format!("[{k}]") } else { String::new() };
            out.push((format!("W_d{suffix}"), &mut l.w_distance));
            out.push((format!("W_a{suffix}"), &mut l.w_attention));
            out.push((format!("W_0{suffix}"), &mut l.w_self));
        }
        let g = &mut self.gru;
        for (name, m) in [
            ("W_xz", &mut g.w_xz),
            ("W_Hz", &mut g.w_hz),
            ("b_z", &mut g.b_z),
            ("W_xr", &mut g.w_xr),
            ("W_Hr", &mut g.w_hr),
            ("b_r", &mut g.b_r),
            ("W_xH", &mut g.w_xh),
            ("W_HH", &mut g.w_hh),
            ("b_H", &mut g.b_h),
            ("W_c", &mut self.w_c),
            ("b_c", &mut self.b_c),
        ] {
            out.push((name.to_string(), m));
        }
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.blocks().iter().map(|(_, m)| m.as_slice().len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|(_, m)| m.is_finite())
    }

    /// Sum of squares over every parameter.
    pub fn l2_squared(&self) -> T {
        self.blocks().iter().flat_map(|(_, m)| m.as_slice().iter()).map(|&x| x * x).sum()
    }

    pub fn l1(&self) -> T {
        self.blocks().iter().flat_map(|(_, m)| m.as_slice().iter()).map(|&x| x.abs()).sum()
    }

    /// `self += s · other`, block by block.
    pub fn add_scaled(&mut self, s: T, other: &Self) {
        for ((_, a), (_, b)) in self.blocks_mut().into_iter().zip(other.blocks()) {
            a.add_scaled(s, b);
        }
    }

    pub fn scale_in_place(&mut self, s: T) {
        for (_, m) in self.blocks_mut() {
            m.scale_in_place(s);
        }
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        ModelParams {
            dims: self.dims,
            gcn: self
                .gcn
                .iter()
                .map(|l| RelationalLayer {
                    w_distance: l.w_distance.cast(),
                    w_attention: l.w_attention.cast(),
                    w_self: l.w_self.cast(),
                })
                .collect(),
            gru: GruParams {
                w_xz: self.gru.w_xz.cast(),
                w_hz: self.gru.w_hz.cast(),
                b_z: self.gru.b_z.cast(),
                w_xr: self.gru.w_xr.cast(),
                w_hr: self.gru.w_hr.cast(),
                b_r: self.gru.b_r.cast(),
                w_xh: self.gru.w_xh.cast(),
                w_hh: self.gru.w_hh.cast(),
                b_h: self.gru.b_h.cast(),
            },
            w_c: self.w_c.cast(),
            b_c: self.b_c.cast(),
        }
    }

    /// Re-lays the GRU input columns for a larger slot count. Columns of the
    /// new slots are zero; since padding slots feed exact zeros into `x_t`
    /// the logits do not change.
    pub fn with_slot_capacity(&self, m_max: usize) -> Result<Self> {
        let old = self.dims;
        if m_max < old.m_max {
            return Err(Error::invalid(format!("cannot shrink slots from {} to {m_max}", old.m_max)));
        }
        let dims = ModelDims { m_max, ..old };
        let graph_cols = old.m_max * old.h_graph;
        let new_graph_cols = m_max * old.h_graph;
        let remap = |w: &Matrix<T>| {
            Matrix::from_fn(w.rows(), dims.d_x(), |i, j| {
                if j < graph_cols {
                    w[(i, j)]
                } else if j >= new_graph_cols {
                    w[(i, j - new_graph_cols + graph_cols)]
                } else {
                    T::zero()
                }
            })
        };
        let mut p = self.clone();
        p.dims = dims;
        p.gru.w_xz = remap(&self.gru.w_xz);
        p.gru.w_xr = remap(&self.gru.w_xr);
        p.gru.w_xh = remap(&self.gru.w_xh);
        Ok(p)
    }
}

/// Every intermediate of one forward pass over a clip.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace<T> {
    /// `layers[t][k]` is layer `k` at frame `t`.
    pub layers: Vec<Vec<LayerTrace<T>>>,
    pub steps: Vec<GruStep<T>>,
    pub pooled: Vec<T>,
    /// Timestep (0-based into `steps`) selected by max pooling per coordinate.
    pub argmax: Vec<usize>,
    pub logits: Vec<T>,
    pub probabilities: Vec<T>,
}

impl<T: Real> ForwardTrace<T> {
    pub fn predicted(&self) -> usize {
        argmax(&self.probabilities)
    }

    /// Hidden states `H_1..H_T`.
    pub fn hidden_states(&self) -> impl Iterator<Item = &[T]> {
        self.steps.iter().map(|s| s.h_next.as_slice())
    }
}

pub(crate) fn argmax<T: Real>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax.
pub fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn log_sum_exp<T: Real>(logits: &[T]) -> T {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    max + logits.iter().map(|&l| (l - max).exp()).sum::<T>().ln()
}

fn check_clip<T: Real>(clip: &ClipTensor<T>, dims: &ModelDims) -> Result<()> {
    if clip.frames() == 0 {
        return Err(Error::invalid(format!("clip `{}` has no frames", clip.clip_id)));
    }
    if clip.m_max() != dims.m_max {
        return Err(Error::Shape {
            op: "forward (M_max)",
            left: (clip.m_max(), clip.node_features[0].cols()),
            right: (dims.m_max, dims.d_in),
        });
    }
    for (t, f) in clip.node_features.iter().enumerate() {
        if f.shape() != (dims.m_max, dims.d_in) || clip.graphs[t].m_max() != dims.m_max {
            return Err(Error::Shape {
                op: "forward (node features)",
                left: f.shape(),
                right: (dims.m_max, dims.d_in),
            });
        }
        if clip.motion[t].len() != MOTION_FEATURES {
            return Err(Error::invalid(format!("frame {t}: motion must have 9 values")));
        }
    }
    if clip.label >= dims.classes {
        return Err(Error::invalid(format!("label index {} out of range", clip.label)));
    }
    Ok(())
}

/// Runs the network on one clip.
pub fn forward<T: Real>(clip: &ClipTensor<T>, params: &ModelParams<T>) -> Result<ForwardTrace<T>> {
    let dims = params.dims;
    check_clip(clip, &dims)?;
    let frames = clip.frames();
    let mut layers = Vec::with_capacity(frames);
    let mut steps: Vec<GruStep<T>> = Vec::with_capacity(frames);
    let mut h = vec![T::zero(); dims.hidden];
    for t in 0..frames {
        let graph = &clip.graphs[t];
        let mut per_layer: Vec<LayerTrace<T>> = Vec::with_capacity(params.gcn.len());
        for layer in &params.gcn {
            let input = per_layer.last().map_or(&clip.node_features[t], |l| &l.output);
            let tr = rgcn_layer(graph, input, layer)?;
            per_layer.push(tr);
        }
        let mut x = per_layer.last().expect("at least one layer").output.as_slice().to_vec();
        if dims.use_motion {
            x.extend_from_slice(&clip.motion[t]);
        }
        let step = gru_step(&x, &h, &params.gru)?;
        h.clone_from(&step.h_next);
        steps.push(step);
        layers.push(per_layer);
    }

    let n = dims.hidden;
    let mut pooled = vec![T::zero(); 2 * n];
    let mut arg = vec![0usize; n];
    for k in 0..n {
        let mut best = steps[0].h_next[k];
        let mut sum = T::zero();
        for (t, s) in steps.iter().enumerate() {
            let v = s.h_next[k];
            if v > best {
                best = v;
                arg[k] = t;
            }
            sum += v;
        }
        pooled[k] = best;
        pooled[n + k] = sum / T::of(frames as f64);
    }
    let logits: Vec<T> = params
        .w_c
        .tr_matvec(&pooled)?
        .into_iter()
        .zip(params.b_c.as_slice())
        .map(|(a, &b)| a + b)
        .collect();
    let probabilities = softmax(&logits);
    Ok(ForwardTrace {
        layers,
        steps,
        pooled,
        argmax: arg,
        logits,
        probabilities,
    })
}

/// Cross-entropy `-ln p[label]` of a trace, via log-sum-exp.
pub fn cross_entropy<T: Real>(trace: &ForwardTrace<T>, label: usize) -> T {
    log_sum_exp(&trace.logits) - trace.logits[label]
}

/// Forward pass and cross-entropy against the clip's own label.
pub fn loss<T: Real>(clip: &ClipTensor<T>, params: &ModelParams<T>) -> Result<T> {
    Ok(cross_entropy(&forward(clip, params)?, clip.label))
}

/// Reverse-mode gradients of the cross-entropy loss.
///
/// Max pooling routes each coordinate's gradient to the timestep recorded in
/// `trace.argmax` (earliest timestep on ties). Regularization is added by
/// the optimizer, not here.
pub fn backward<T: Real>(
    trace: &ForwardTrace<T>,
    clip: &ClipTensor<T>,
    params: &ModelParams<T>,
    label: usize,
) -> Result<(T, Gradients<T>)> {
    let dims = params.dims;
    if label >= dims.classes || trace.steps.len() != clip.frames() || trace.logits.len() != dims.classes {
        return Err(Error::invalid("trace does not match clip/params"));
    }
    let loss = cross_entropy(trace, label);
    let mut grads = ModelParams::zeros(dims)?;

    let mut d_logits = trace.probabilities.clone();
    d_logits[label] -= T::one();
    grads.w_c.add_outer(T::one(), &trace.pooled, &d_logits);
    grads.b_c.as_mut_slice().copy_from_slice(&d_logits);
    let d_pooled = params.w_c.matvec(&d_logits)?;

    let n = dims.hidden;
    let frames = clip.frames();
    let inv_t = T::one() / T::of(frames as f64);
    let graph_len = dims.m_max * dims.h_graph;
    let mut carry = vec![T::zero(); n];
    for t in (0..frames).rev() {
        let mut d_h = carry;
        for k in 0..n {
            d_h[k] += d_pooled[n + k] * inv_t;
            if trace.argmax[k] == t {
                d_h[k] += d_pooled[k];
            }
        }
        let (d_prev, d_x) = gru::gru_backward(&trace.steps[t], &params.gru, &d_h, &mut grads.gru);
        carry = d_prev;

        let mut d_out = Matrix::from_vec(dims.m_max, dims.h_graph, d_x[..graph_len].to_vec())?;
        let graph = &clip.graphs[t];
        for k in (0..params.gcn.len()).rev() {
            let want_input = k > 0;
            let d_in = rgcn::rgcn_backward(
                graph,
                &trace.layers[t][k],
                &params.gcn[k],
                &d_out,
                &mut grads.gcn[k],
                want_input,
            );
            if let Some(d) = d_in {
                d_out = d;
            }
        }
    }
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::FrameGraph;

    fn tiny_clip(frames: usize, m_max: usize) -> ClipTensor<f64> {
        let mut feats = Matrix::zeros(m_max, NODE_FEATURES);
        feats.row_mut(0).copy_from_slice(&[0.0, 0.0, 0.0, 0.5, 1.0, 1.0]);
        feats.row_mut(1).copy_from_slice(&[0.2, -0.1, 0.05, 0.3, 0.4, 0.0]);
        let mut g = FrameGraph::empty(m_max);
        g.n_active = 2;
        g.self_weight[0] = 1.0;
        g.self_weight[1] = 1.0;
        g.dist_weight[(0, 1)] = 0.6;
        g.dist_weight[(1, 0)] = 0.6;
        g.attn_weight[(1, 0)] = 1.0;
        let mut mask = vec![false; m_max];
        mask[0] = true;
        mask[1] = true;
        ClipTensor {
            clip_id: "tiny".into(),
            node_features: vec![feats; frames],
            node_mask: vec![mask; frames],
            graphs: vec![g; frames],
            motion: vec![vec![1.0, 0.0, 0.02, 0.0, 1.0, -0.01, 0.0, 0.0, 1.0]; frames],
            label: 2,
        }
    }

    fn dims(m_max: usize) -> ModelDims {
        ModelDims {
            m_max,
            h_graph: 4,
            hidden: 5,
            ..ModelDims::default()
        }
    }

    #[test]
    fn zero_parameters_give_uniform_output() {
        let p = ModelParams::zeros(dims(3)).unwrap();
        let clip = tiny_clip(4, 3);
        let tr = forward(&clip, &p).unwrap();
        assert!(tr.logits.iter().all(|&l| l == 0.0));
        assert!(tr.probabilities.iter().all(|&q| (q - 0.2).abs() < 1e-15));
        let (l, _) = backward(&tr, &clip, &p, 3).unwrap();
        assert!((l - 5f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn single_step_pools_equal() {
        let p = ModelParams::init(dims(3), &mut Rng::new(1)).unwrap();
        let tr = forward(&tiny_clip(1, 3), &p).unwrap();
        let n = p.dims.hidden;
        assert_eq!(&tr.pooled[..n], &tr.pooled[n..]);
        assert_eq!(&tr.pooled[..n], tr.steps[0].h_next.as_slice());
    }

    #[test]
    fn softmax_properties() {
        let l = [1.0, -2.0, 0.5, 3.0, 0.0];
        let p = softmax(&l);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let shifted: Vec<f64> = l.iter().map(|x| x + 123.0).collect();
        for (a, b) in p.iter().zip(softmax(&shifted)) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn masked_slot_columns_get_no_gradient() {
        let mut p = ModelParams::init(dims(3), &mut Rng::new(2)).unwrap();
        p.gru.b_z.fill(0.1);
        let clip = tiny_clip(3, 3);
        let tr = forward(&clip, &p).unwrap();
        let (_, g) = backward(&tr, &clip, &p, 0).unwrap();
        let h = p.dims.h_graph;
        for w in [&g.gru.w_xz, &g.gru.w_xr, &g.gru.w_xh] {
            for i in 0..w.rows() {
                for j in 2 * h..3 * h {
                    assert_eq!(w[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn rejects_mismatched_clip() {
        let p = ModelParams::<f64>::zeros(dims(4)).unwrap();
        assert!(forward(&tiny_clip(2, 3), &p).is_err());
    }

    #[test]
    fn motion_ablation_shrinks_input() {
        let d = ModelDims {
            use_motion: false,
            ..dims(3)
        };
        assert_eq!(d.d_x(), 12);
        let p = ModelParams::init(d, &mut Rng::new(3)).unwrap();
        let tr = forward(&tiny_clip(2, 3), &p).unwrap();
        assert_eq!(tr.steps[0].x.len(), 12);
    }

    #[test]
    fn block_names_are_unique_and_ordered() {
        let p = ModelParams::<f64>::zeros(dims(3)).unwrap();
        let names: Vec<String> = p.blocks().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names.first().unwrap(), "W_d");
        assert_eq!(names.last().unwrap(), "b_c");
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), names.len());
        let multi = ModelParams::<f64>::zeros(ModelDims { gcn_layers: 2, ..dims(3) }).unwrap();
        assert!(multi.blocks().iter().any(|(n, _)| n == "W_a[1]"));
    }
}
