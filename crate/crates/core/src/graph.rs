//! Per-frame relational graph over the wearer and the observed persons.
//!
//! Two relations connect nodes: a symmetric *distance* relation weighted by
//! `exp(-d / τ)`, and a directed binary *attention* relation (`attn[i][j] = 1`
//! when `i` looks at `j`). Every active node also carries a self connection.
//! In aggregation node `i` receives attention messages from the nodes looking
//! at it, so a speaker collects its listeners.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{is_looking_at, pairwise_distance, BirdViewPose, ConeParams};
use crate::numerics::{Matrix, Real};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdgeConfig {
    /// Distance scale τ in meters.
    pub distance_scale: f64,
    pub cone: ConeParams,
    pub use_distance: bool,
    pub use_attention: bool,
}

impl Default for EdgeConfig {
    fn default() -> Self {
        Self {
            distance_scale: 3.0,
            cone: ConeParams::default(),
            use_distance: true,
            use_attention: true,
        }
    }
}

impl EdgeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.distance_scale > 0.0) {
            return Err(Error::invalid(format!(
                "distance scale must be positive, got {}",
                self.distance_scale
            )));
        }
        ConeParams::new(self.cone.half_angle).map(|_| ())
    }
}

/// Weighted typed adjacency for one frame, padded to `M_max` slots.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameGraph<T> {
    pub n_active: usize,
    /// `α^d`, symmetric with zero diagonal.
    pub dist_weight: Matrix<T>,
    /// `α^a`; entry `(i, j) > 0` iff `i` looks at `j`.
    pub attn_weight: Matrix<T>,
    /// `α_ii`: 1 for active slots, 0 for padding.
    pub self_weight: Vec<T>,
}

/// `|N_i^r|` for both relations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighborCounts {
    pub distance: Vec<usize>,
    /// Number of nodes looking at `i`.
    pub attention: Vec<usize>,
}

impl<T: Real> FrameGraph<T> {
    /// Graph with no active nodes.
    pub fn empty(m_max: usize) -> Self {
        Self {
            n_active: 0,
            dist_weight: Matrix::zeros(m_max, m_max),
            attn_weight: Matrix::zeros(m_max, m_max),
            self_weight: vec![T::zero(); m_max],
        }
    }

    pub fn m_max(&self) -> usize {
        self.self_weight.len()
    }

    pub fn is_active(&self, slot: usize) -> bool {
        self.self_weight[slot] > T::zero()
    }

    /// Distance neighbors of `i` as `(j, α_ij^d)`.
    pub fn distance_neighbors(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        self.dist_weight
            .row(i)
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > T::zero())
            .map(|(j, &w)| (j, w))
    }

    /// Nodes looking at `i`, as `(j, α_ji^a)`.
    pub fn attention_neighbors(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        (0..self.m_max())
            .map(move |j| (j, self.attn_weight[(j, i)]))
            .filter(|(_, w)| *w > T::zero())
    }

    pub fn neighbor_counts(&self) -> NeighborCounts {
        let m = self.m_max();
        NeighborCounts {
            distance: (0..m).map(|i| self.distance_neighbors(i).count()).collect(),
            attention: (0..m).map(|i| self.attention_neighbors(i).count()).collect(),
        }
    }

    pub fn cast<U: Real>(&self) -> FrameGraph<U> {
        FrameGraph {
            n_active: self.n_active,
            dist_weight: self.dist_weight.cast(),
            attn_weight: self.attn_weight.cast(),
            self_weight: self.self_weight.iter().map(|&w| U::of(w.as_f64())).collect(),
        }
    }

    /// Same graph padded with inactive slots up to `m_max`.
    pub fn padded(&self, m_max: usize) -> Result<Self> {
        let old = self.m_max();
        if m_max < old {
            return Err(Error::invalid(format!("cannot shrink graph from {old} to {m_max} slots")));
        }
        let grow = |m: &Matrix<T>| Matrix::from_fn(m_max, m_max, |i, j| if i < old && j < old { m[(i, j)] } else { T::zero() });
        let mut self_weight = self.self_weight.clone();
        self_weight.resize(m_max, T::zero());
        Ok(Self {
            n_active: self.n_active,
            dist_weight: grow(&self.dist_weight),
            attn_weight: grow(&self.attn_weight),
            self_weight,
        })
    }

    /// JSON adjacency dump for inspection.
    pub fn to_json(&self) -> serde_json::Value {
        let rows = |m: &Matrix<T>| -> Vec<Vec<f64>> { (0..m.rows()).map(|i| m.row(i).iter().map(|x| x.as_f64()).collect()).collect() };
        let counts = self.neighbor_counts();
        serde_json::json!({
            "n_active": self.n_active,
            "active_slots": (0..self.m_max()).filter(|&i| self.is_active(i)).collect::<Vec<_>>(),
            "self_weight": self.self_weight.iter().map(|x| x.as_f64()).collect::<Vec<_>>(),
            "dist_weight": rows(&self.dist_weight),
            "attn_weight": rows(&self.attn_weight),
            "distance_neighbors": counts.distance,
            "attention_neighbors": counts.attention,
        })
    }
}

/// Builds the frame graph from bird-view poses keyed by slot.
pub fn build_frame_graph<T: Real>(
    m_max: usize,
    poses: &[(usize, BirdViewPose)],
    config: &EdgeConfig,
) -> Result<FrameGraph<T>> {
    config.validate()?;
    let mut seen = vec![false; m_max];
    for &(slot, _) in poses {
        if slot >= m_max {
            return Err(Error::invalid(format!("slot {slot} out of range for M_max {m_max}")));
        }
        if seen[slot] {
            return Err(Error::invalid(format!("duplicate slot {slot}")));
        }
        seen[slot] = true;
    }
    if !seen.first().copied().unwrap_or(false) {
        return Err(Error::invalid("frame graph requires the wearer in slot 0"));
    }

    let mut g = FrameGraph::empty(m_max);
    g.n_active = poses.len();
    for &(i, _) in poses {
        g.self_weight[i] = T::one();
    }
    for (a, &(i, pi)) in poses.iter().enumerate() {
        for &(j, pj) in &poses[a + 1..] {
            if config.use_distance {
                let w = T::of((-pairwise_distance(&pi, &pj) / config.distance_scale).exp());
                g.dist_weight[(i, j)] = w;
                g.dist_weight[(j, i)] = w;
            }
            if config.use_attention && pi.position != pj.position {
                if is_looking_at(&pi, &pj, &config.cone)? {
                    g.attn_weight[(i, j)] = T::one();
                }
                if is_looking_at(&pj, &pi, &config.cone)? {
                    g.attn_weight[(j, i)] = T::one();
                }
            }
        }
    }
    Ok(g)
}

/// Convenience wrapper returning only the counts.
pub fn neighbor_counts<T: Real>(g: &FrameGraph<T>) -> NeighborCounts {
    g.neighbor_counts()
}
