//! Central finite-difference verification of the analytic gradients.
//!
//! The numeric side only calls [`forward`](crate::model::forward); it never
//! touches the backward code it checks.

use serde::Serialize;

use crate::error::Result;
use crate::geometry::DistanceCalibration;
use crate::model::{backward, forward, loss, ModelDims, ModelParams};
use crate::numerics::Rng;
use crate::scene::{tensorize, Clip, ClipTensor, DataConfig, Frame, Label, PersonObservation};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GradCheckConfig {
    pub m_max: usize,
    pub h_graph: usize,
    pub hidden: usize,
    pub frames: usize,
    /// Observed persons besides the wearer.
    pub persons: usize,
    pub step: f64,
    pub rel_tol: f64,
    pub abs_floor: f64,
    pub seeds: u64,
    pub base_seed: u64,
    /// Test hook: perturb one analytic gradient entry before comparing.
    pub corrupt: bool,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            m_max: 3,
            h_graph: 4,
            hidden: 5,
            frames: 4,
            persons: 2,
            step: 1e-5,
            rel_tol: 1e-4,
            abs_floor: 1e-7,
            seeds: 20,
            base_seed: 0,
            corrupt: false,
        }
    }
}

impl GradCheckConfig {
    /// `|a - n| / max(|a|, |n|, abs_floor / rel_tol)`: the relative error,
    /// except that differences below `abs_floor` always pass.
    pub fn error(&self, analytic: f64, numeric: f64) -> f64 {
        let scale = analytic.abs().max(numeric.abs()).max(self.abs_floor / self.rel_tol);
        (analytic - numeric).abs() / scale
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockReport {
    pub name: String,
    pub entries: usize,
    pub max_error: f64,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub seeds: u64,
    pub blocks: Vec<BlockReport>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.blocks.iter().all(|b| b.failures == 0)
    }

    pub fn max_error(&self) -> f64 {
        self.blocks.iter().map(|b| b.max_error).fold(0.0, f64::max)
    }
}

/// Random small clip and parameters for seed `seed`.
pub fn random_instance(cfg: &GradCheckConfig, seed: u64) -> Result<(ClipTensor<f64>, ModelParams<f64>)> {
    let mut rng = Rng::new(seed);
    // d = 6 - 0.02 h on [20, 280] px
    let cal = DistanceCalibration::new(vec![6.0, -0.02], [20.0, 280.0])?;
    let base: Vec<(f64, f64, f64)> = (0..cfg.persons)
        .map(|_| (rng.uniform_range(0.1, 0.9), rng.uniform_range(1.0, 4.0), rng.uniform_range(-1.0, 1.0)))
        .collect();
    let mut frames = Vec::with_capacity(cfg.frames);
    for t in 0..cfg.frames {
        let mut observations = Vec::new();
        for (k, &(x, d, yaw)) in base.iter().enumerate() {
            // the last person drops out now and then, exercising masked slots
            if k + 1 == cfg.persons && k > 0 && t > 0 && rng.bernoulli(0.25) {
                continue;
            }
            let d = (d + rng.normal(0.0, 0.1)).clamp(0.5, 5.0);
            observations.push(PersonObservation {
                track_id: k as i64 + 1,
                yaw: (yaw + rng.normal(0.0, 0.2)).clamp(-3.0, 3.0),
                pitch: rng.uniform_range(-0.3, 0.3),
                roll: rng.uniform_range(-0.2, 0.2),
                image_x_norm: (x + rng.normal(0.0, 0.02)).clamp(0.0, 1.0),
                image_y_norm: rng.uniform_range(0.3, 0.6),
                face_height_px: (6.0 - d) / 0.02,
            });
        }
        let mut motion = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        for m in motion.iter_mut().take(8) {
            *m += rng.normal(0.0, 0.05);
        }
        frames.push(Frame { motion, observations });
    }
    let label = Label::ALL[rng.below(Label::ALL.len())];
    let clip = Clip {
        clip_id: format!("gradcheck-{seed}"),
        label,
        frames,
    };
    let data = DataConfig {
        frames_per_clip: cfg.frames,
        m_max: cfg.m_max,
        ..DataConfig::default()
    };
    let tensor = tensorize(&clip, &cal, &data)?;
    let dims = ModelDims {
        m_max: cfg.m_max,
        h_graph: cfg.h_graph,
        hidden: cfg.hidden,
        ..ModelDims::default()
    };
    let mut params = ModelParams::init(dims, &mut rng)?;
    for (name, m) in params.blocks_mut() {
        if name.starts_with('b') {
            for v in m.as_mut_slice() {
                *v = rng.uniform_range(-0.3, 0.3);
            }
        }
    }
    Ok((tensor, params))
}

/// Compares every analytic gradient entry of one instance with central differences.
pub fn check_instance(cfg: &GradCheckConfig, clip: &ClipTensor<f64>, params: &ModelParams<f64>) -> Result<Vec<BlockReport>> {
    let trace = forward(clip, params)?;
    let (_, mut grads) = backward(&trace, clip, params, clip.label)?;
    if cfg.corrupt {
        let (_, w) = grads.blocks_mut().into_iter().last().expect("blocks");
        w.as_mut_slice()[0] = w.as_slice()[0] * 1.5 + 1e-2;
    }
    let mut probe = params.clone();
    let mut reports = Vec::new();
    let names: Vec<String> = params.blocks().into_iter().map(|(n, _)| n).collect();
    let analytic: Vec<Vec<f64>> = grads.blocks().into_iter().map(|(_, m)| m.as_slice().to_vec()).collect();
    for (b, name) in names.iter().enumerate() {
        let len = analytic[b].len();
        let mut report = BlockReport {
            name: name.clone(),
            entries: len,
            max_error: 0.0,
            failures: 0,
        };
        for (e, &a) in analytic[b].iter().enumerate() {
            let orig = params.blocks()[b].1.as_slice()[e];
            set_entry(&mut probe, b, e, orig + cfg.step);
            let up = loss(clip, &probe)?;
            set_entry(&mut probe, b, e, orig - cfg.step);
            let down = loss(clip, &probe)?;
            set_entry(&mut probe, b, e, orig);
            let numeric = (up - down) / (2.0 * cfg.step);
            let err = cfg.error(a, numeric);
            report.max_error = report.max_error.max(err);
            if !(err <= cfg.rel_tol) {
                report.failures += 1;
            }
        }
        reports.push(report);
    }
    Ok(reports)
}

fn set_entry(p: &mut ModelParams<f64>, block: usize, entry: usize, value: f64) {
    let mut blocks = p.blocks_mut();
    blocks[block].1.as_mut_slice()[entry] = value;
}

/// Runs the check over `cfg.seeds` random instances and merges the per-block results.
pub fn run(cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let mut merged: Vec<BlockReport> = Vec::new();
    for s in 0..cfg.seeds {
        let (clip, params) = random_instance(cfg, cfg.base_seed + s)?;
        let reports = check_instance(cfg, &clip, &params)?;
        if merged.is_empty() {
            merged = reports;
            continue;
        }
        for (m, r) in merged.iter_mut().zip(reports) {
            m.entries += r.entries;
            m.failures += r.failures;
            m.max_error = m.max_error.max(r.max_error);
        }
    }
    Ok(GradCheckReport {
        seeds: cfg.seeds,
        blocks: merged,
    })
}
