use crate::error::{Error, Result};
use crate::graph::FrameGraph;
use crate::numerics::matrix::{axpy, dot};
use crate::numerics::{Matrix, Real};

/// Weights of one relational graph convolution layer (`in × out` each).
#[derive(Clone, Debug, PartialEq)]
pub struct RelationalLayer<T> {
    pub w_distance: Matrix<T>,
    pub w_attention: Matrix<T>,
    pub w_self: Matrix<T>,
}

impl<T: Real> RelationalLayer<T> {
    pub fn zeros(d_in: usize, d_out: usize) -> Self {
        Self {
            w_distance: Matrix::zeros(d_in, d_out),
            w_attention: Matrix::zeros(d_in, d_out),
            w_self: Matrix::zeros(d_in, d_out),
        }
    }

    pub fn d_in(&self) -> usize {
        self.w_self.rows()
    }

    pub fn d_out(&self) -> usize {
        self.w_self.cols()
    }
}

/// Pre-activation and output of one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerTrace<T> {
    pub input: Matrix<T>,
    pub pre: Matrix<T>,
    pub output: Matrix<T>,
}

/// `h · W` for every node row.
fn transform<T: Real>(h: &Matrix<T>, w: &Matrix<T>) -> Matrix<T> {
    let mut out = Matrix::zeros(h.rows(), w.cols());
    for i in 0..h.rows() {
        let dst = out.row_mut(i);
        for (k, &hk) in h.row(i).iter().enumerate() {
            if hk != T::zero() {
                axpy(hk, w.row(k), dst);
            }
        }
    }
    out
}

/// One R-GCN propagation step:
///
/// `h'_i = ReLU( Σ_r Σ_{j ∈ N_i^r} (α_ij^r / |N_i^r|) W_r h_j + α_ii W_0 h_i )`
///
/// with `r ∈ {distance, attention}`. A relation with no neighbors at `i`
/// contributes nothing. Padding slots have no edges and `α_ii = 0`, so they
/// output zero.
pub fn rgcn_layer<T: Real>(g: &FrameGraph<T>, features: &Matrix<T>, layer: &RelationalLayer<T>) -> Result<LayerTrace<T>> {
    if features.rows() != g.m_max() || features.cols() != layer.d_in() {
        return Err(Error::Shape {
            op: "rgcn_layer",
            left: features.shape(),
            right: (g.m_max(), layer.d_in()),
        });
    }
    let t_dist = transform(features, &layer.w_distance);
    let t_attn = transform(features, &layer.w_attention);
    let t_self = transform(features, &layer.w_self);
    let mut pre = Matrix::zeros(g.m_max(), layer.d_out());
    for i in 0..g.m_max() {
        let dst = pre.row_mut(i);
        accumulate(g.distance_neighbors(i), &t_dist, dst);
        accumulate(g.attention_neighbors(i), &t_attn, dst);
        let a_ii = g.self_weight[i];
        if a_ii != T::zero() {
            axpy(a_ii, t_self.row(i), dst);
        }
    }
    let output = pre.map(|x| x.max(T::zero()));
    Ok(LayerTrace {
        input: features.clone(),
        pre,
        output,
    })
}

fn accumulate<T: Real>(neighbors: impl Iterator<Item = (usize, T)>, transformed: &Matrix<T>, dst: &mut [T]) {
    let nb: Vec<(usize, T)> = neighbors.collect();
    if nb.is_empty() {
        return;
    }
    let c = T::of(nb.len() as f64);
    for (j, alpha) in nb {
        axpy(alpha / c, transformed.row(j), dst);
    }
}

/// Gradients of one layer given `∂L/∂output`. Returns `∂L/∂input` as well
/// so stacked layers can chain.
pub(crate) fn rgcn_backward<T: Real>(
    g: &FrameGraph<T>,
    trace: &LayerTrace<T>,
    layer: &RelationalLayer<T>,
    d_output: &Matrix<T>,
    grads: &mut RelationalLayer<T>,
    want_input_grad: bool,
) -> Option<Matrix<T>> {
    let m = g.m_max();
    let d_out = layer.d_out();
    let mut d_pre = d_output.clone();
    for (d, &p) in d_pre.as_mut_slice().iter_mut().zip(trace.pre.as_slice()) {
        if p <= T::zero() {
            *d = T::zero();
        }
    }
    // per-source accumulated message gradients for each relation
    let mut dt_dist = Matrix::zeros(m, d_out);
    let mut dt_attn = Matrix::zeros(m, d_out);
    let mut dt_self = Matrix::zeros(m, d_out);
    for i in 0..m {
        let dpi = d_pre.row(i);
        if dpi.iter().all(|&x| x == T::zero()) {
            continue;
        }
        scatter(g.distance_neighbors(i), dpi, &mut dt_dist);
        scatter(g.attention_neighbors(i), dpi, &mut dt_attn);
        let a_ii = g.self_weight[i];
        if a_ii != T::zero() {
            axpy(a_ii, dpi, dt_self.row_mut(i));
        }
    }
    let h = &trace.input;
    for j in 0..m {
        let hj = h.row(j);
        grads.w_distance.add_outer(T::one(), hj, dt_dist.row(j));
        grads.w_attention.add_outer(T::one(), hj, dt_attn.row(j));
        grads.w_self.add_outer(T::one(), hj, dt_self.row(j));
    }
    if !want_input_grad {
        return None;
    }
    let mut d_input = Matrix::zeros(m, layer.d_in());
    for j in 0..m {
        let dst = d_input.row_mut(j);
        for (k, d) in dst.iter_mut().enumerate() {
            *d = dot(layer.w_distance.row(k), dt_dist.row(j))
                + dot(layer.w_attention.row(k), dt_attn.row(j))
                + dot(layer.w_self.row(k), dt_self.row(j));
        }
    }
    Some(d_input)
}

fn scatter<T: Real>(neighbors: impl Iterator<Item = (usize, T)>, d_pre_i: &[T], into: &mut Matrix<T>) {
    let nb: Vec<(usize, T)> = neighbors.collect();
    if nb.is_empty() {
        return;
    }
    let c = T::of(nb.len() as f64);
    for (j, alpha) in nb {
        axpy(alpha / c, d_pre_i, into.row_mut(j));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BirdViewPose;
    use crate::graph::{build_frame_graph, EdgeConfig};

    fn padded_identity(d_in: usize, d_out: usize) -> Matrix<f64> {
        Matrix::from_fn(d_in, d_out, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    #[test]
    fn self_connection_only() {
        let g: FrameGraph<f64> = build_frame_graph(1, &[(0, BirdViewPose::wearer())], &EdgeConfig::default()).unwrap();
        let layer = RelationalLayer {
            w_self: padded_identity(6, 6),
            ..RelationalLayer::zeros(6, 6)
        };
        let h = Matrix::from_rows(&[vec![1.0, -2.0, 0.0, 0.0, 0.0, 1.0]]).unwrap();
        let out = rgcn_layer(&g, &h, &layer).unwrap();
        assert_eq!(out.output.row(0), &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn single_attention_neighbor_passes_through() {
        let mut g = FrameGraph::<f64>::empty(2);
        g.n_active = 2;
        g.self_weight = vec![1.0, 1.0];
        g.attn_weight[(0, 1)] = 1.0;
        let layer = RelationalLayer {
            w_attention: padded_identity(6, 6),
            ..RelationalLayer::zeros(6, 6)
        };
        let h = Matrix::from_rows(&[vec![0.3, -0.2, 1.5, 0.0, -1.0, 1.0], vec![9.0; 6]]).unwrap();
        let out = rgcn_layer(&g, &h, &layer).unwrap();
        assert_eq!(out.output.row(1), &[0.3, 0.0, 1.5, 0.0, 0.0, 1.0]);
        assert_eq!(out.output.row(0), &[0.0; 6]);
    }

    #[test]
    fn shape_mismatch() {
        let g = FrameGraph::<f64>::empty(3);
        assert!(rgcn_layer(&g, &Matrix::zeros(2, 6), &RelationalLayer::zeros(6, 4)).is_err());
        assert!(rgcn_layer(&g, &Matrix::zeros(3, 5), &RelationalLayer::zeros(6, 4)).is_err());
    }
}
