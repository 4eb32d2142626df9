//! Labeled synthetic scenes whose geometry encodes the five conversation types.
//!
//! A scene is laid out once per clip in the bird-view plane: positions around
//! the wearer plus one facing angle per person and attention segment. Layouts
//! are resampled until every gaze-cone test clears the cone boundary by
//! [`CONE_MARGIN`], so per-frame jitter rarely flips an edge. Frames then add
//! Gaussian jitter, sporadic detection dropouts and the ego-motion homography.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, CameraModel, ConeParams, DistanceCalibration};
use crate::numerics::Rng;
use crate::scene::{write_clips, Clip, Frame, Label, PersonObservation};

const DEG: f64 = PI / 180.0;
/// Clearance kept between every gaze offset and the cone boundary.
pub const CONE_MARGIN: f64 = 7.0 * DEG;
const EDGE_OF_VIEW: f64 = 3.0 * DEG;
const MIN_SEPARATION_M: f64 = 0.4;
const MAX_LAYOUT_ATTEMPTS: usize = 5000;
const WALK_HEADING_SPREAD: f64 = 20.0 * DEG;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttentionPattern {
    /// One partner and the wearer attend each other; anyone else looks away.
    Mutual,
    /// Everyone attends a single speaker, who attends nobody.
    AllToOne,
    /// The speaker changes between segments; listeners attend the speaker,
    /// who attends one of them.
    Mixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JitterParams {
    /// Per-frame noise on facing, pitch and roll (radians).
    pub orientation_std: f64,
    /// Per-frame noise on bird-view coordinates (meters).
    pub position_std: f64,
    /// Multiplier on the homography noise; 0 gives exact ego-motion.
    pub motion_std: f64,
    /// Probability that a person is missed in an interior frame.
    pub dropout: f64,
}

impl Default for JitterParams {
    fn default() -> Self {
        Self {
            orientation_std: 0.03,
            position_std: 0.02,
            motion_std: 1.0,
            dropout: 0.02,
        }
    }
}

impl JitterParams {
    pub fn none() -> Self {
        Self {
            orientation_std: 0.0,
            position_std: 0.0,
            motion_std: 0.0,
            dropout: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenePreset {
    pub label: Label,
    /// Inclusive range of persons besides the wearer.
    pub n_people: [usize; 2],
    pub distance_mean: f64,
    pub distance_std: f64,
    pub pattern: AttentionPattern,
    /// Per-frame homography translation: a steady heading for walk classes,
    /// the scale of random sway otherwise.
    pub ego_motion_scale: f64,
    pub jitter: JitterParams,
}

impl ScenePreset {
    pub fn default_for(label: Label) -> Self {
        let (n_people, mean, std, pattern) = match label {
            Label::Dialogue | Label::WalkDialogue => ([1, 2], 1.5, 0.3, AttentionPattern::Mutual),
            Label::Discussion | Label::WalkDiscussion => ([3, 5], 1.8, 0.4, AttentionPattern::Mixed),
            Label::Monologue => ([2, 5], 3.5, 0.5, AttentionPattern::AllToOne),
        };
        Self {
            label,
            n_people,
            distance_mean: mean,
            distance_std: std,
            pattern,
            ego_motion_scale: if label.is_walk() { 0.05 } else { 0.003 },
            jitter: JitterParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.n_people;
        if lo > hi {
            return Err(Error::invalid(format!("{}: n_people range [{lo}, {hi}] is empty", self.label)));
        }
        let min_needed = match self.pattern {
            AttentionPattern::Mutual => 1,
            AttentionPattern::AllToOne => 2,
            AttentionPattern::Mixed => 2,
        };
        if lo < min_needed {
            return Err(Error::invalid(format!(
                "{}: {:?} attention needs at least {min_needed} persons, preset allows {lo}",
                self.label, self.pattern
            )));
        }
        let positive = [self.distance_mean, self.ego_motion_scale];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invalid(format!("{}: distance mean and ego-motion scale must be positive", self.label)));
        }
        let j = &self.jitter;
        let nonneg = [self.distance_std, j.orientation_std, j.position_std, j.motion_std];
        if nonneg.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::invalid(format!("{}: spreads and jitter must be nonnegative", self.label)));
        }
        if !(0.0..1.0).contains(&j.dropout) {
            return Err(Error::invalid(format!("{}: dropout must lie in [0, 1)", self.label)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub frames_per_clip: usize,
    pub camera: CameraModel,
    pub cone: ConeParams,
    /// One preset per label, in label order.
    pub presets: Vec<ScenePreset>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            frames_per_clip: 25,
            camera: CameraModel::default(),
            cone: ConeParams::default(),
            presets: Label::ALL.iter().map(|&l| ScenePreset::default_for(l)).collect(),
        }
    }
}

impl SynthConfig {
    pub fn with_jitter(mut self, jitter: JitterParams) -> Self {
        for p in &mut self.presets {
            p.jitter = jitter;
        }
        self
    }

    pub fn preset(&self, label: Label) -> Result<&ScenePreset> {
        self.presets
            .iter()
            .find(|p| p.label == label)
            .ok_or_else(|| Error::invalid(format!("no preset for {label}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames_per_clip == 0 {
            return Err(Error::invalid("frames_per_clip must be positive"));
        }
        self.camera.validate()?;
        ConeParams::new(self.cone.half_angle)?;
        if self.cone.half_angle - CONE_MARGIN <= 0.0 || self.cone.half_angle + CONE_MARGIN >= self.camera.fov_h / 2.0 {
            return Err(Error::invalid("cone half angle leaves no room for robust layouts in this field of view"));
        }
        for label in Label::ALL {
            self.preset(label)?.validate()?;
        }
        Ok(())
    }
}

/// Face-height calibration of the synthetic camera: `d = 9 - 0.045 h + 5.75e-5 h²`,
/// decreasing on its valid range of 20 to 380 px.
pub fn synthetic_calibration() -> DistanceCalibration {
    DistanceCalibration::new(vec![9.0, -0.045, 5.75e-5], [20.0, 380.0]).expect("valid calibration")
}

/// Face height that the calibration maps to `distance_m`, by bisection.
pub fn face_height_for(cal: &DistanceCalibration, distance_m: f64) -> f64 {
    let [mut lo, mut hi] = cal.valid_height_range;
    let at = |h: f64| crate::numerics::poly_eval(&cal.coefficients, h);
    if distance_m >= at(lo) {
        return lo;
    }
    if distance_m <= at(hi) {
        return hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if at(mid) > distance_m {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Clone, Debug)]
struct Segment {
    start: usize,
    /// Facing per node; index 0 is the wearer.
    facings: Vec<f64>,
    edges: BTreeSet<(usize, usize)>,
    speaker: Option<usize>,
}

#[derive(Clone, Debug)]
struct Layout {
    positions: Vec<[f64; 2]>,
    segments: Vec<Segment>,
}

fn bearing(from: [f64; 2], to: [f64; 2]) -> f64 {
    (to[1] - from[1]).atan2(to[0] - from[0])
}

/// Realized edges and whether every test clears the boundary by the margin.
fn cone_edges(positions: &[[f64; 2]], facings: &[f64], cone: &ConeParams) -> (BTreeSet<(usize, usize)>, bool) {
    let mut edges = BTreeSet::new();
    let mut robust = true;
    for (i, &pi) in positions.iter().enumerate() {
        for (j, &pj) in positions.iter().enumerate() {
            if i == j {
                continue;
            }
            let off = normalize_angle(bearing(pi, pj) - facings[i]).abs();
            if off <= cone.half_angle {
                edges.insert((i, j));
            }
            if (off - cone.half_angle).abs() < CONE_MARGIN {
                robust = false;
            }
        }
    }
    (edges, robust)
}

/// A facing for node `i` whose cone robustly misses every other node.
fn facing_away(i: usize, positions: &[[f64; 2]], cone: &ConeParams, rng: &mut Rng) -> Option<f64> {
    let limit = cone.half_angle + CONE_MARGIN;
    (0..64).map(|_| rng.uniform_range(-PI, PI)).find(|&f| {
        positions
            .iter()
            .enumerate()
            .all(|(j, &pj)| j == i || normalize_angle(bearing(positions[i], pj) - f).abs() >= limit)
    })
}

struct Placer<'a> {
    preset: &'a ScenePreset,
    cfg: &'a SynthConfig,
}

impl Placer<'_> {
    fn max_offset(&self) -> f64 {
        self.cfg.camera.fov_h / 2.0 - EDGE_OF_VIEW
    }

    /// Offset angle inside the wearer's cone.
    fn central(&self, rng: &mut Rng) -> f64 {
        let m = self.cfg.cone.half_angle - CONE_MARGIN;
        rng.uniform_range(-m, m)
    }

    /// Offset angle visible to the camera but outside the wearer's cone.
    fn peripheral(&self, rng: &mut Rng) -> f64 {
        let lo = self.cfg.cone.half_angle + CONE_MARGIN;
        let side = if rng.bernoulli(0.5) { 1.0 } else { -1.0 };
        side * rng.uniform_range(lo, self.max_offset())
    }

    fn anywhere(&self, rng: &mut Rng) -> f64 {
        let inner = self.cfg.cone.half_angle - CONE_MARGIN;
        let outer = self.cfg.cone.half_angle + CONE_MARGIN;
        let central = 2.0 * inner;
        let side = 2.0 * (self.max_offset() - outer);
        if rng.uniform() * (central + side) < central {
            self.central(rng)
        } else {
            self.peripheral(rng)
        }
    }

    fn point(&self, phi: f64, rng: &mut Rng) -> [f64; 2] {
        let d = rng
            .normal(self.preset.distance_mean, self.preset.distance_std)
            .clamp(0.6, 7.5);
        [d * phi.sin(), d * phi.cos()]
    }

    fn try_layout(&self, frames: usize, rng: &mut Rng) -> Option<Layout> {
        let cone = &self.cfg.cone;
        let [lo, hi] = self.preset.n_people;
        let k = rng.int_inclusive(lo, hi);
        let mut positions = vec![[0.0, 0.0]];
        let offsets: Vec<f64> = match self.preset.pattern {
            AttentionPattern::Mutual | AttentionPattern::AllToOne => {
                let mut v = vec![self.central(rng)];
                v.extend((1..k).map(|_| self.peripheral(rng)));
                v
            }
            AttentionPattern::Mixed => (0..k).map(|_| self.anywhere(rng)).collect(),
        };
        for phi in offsets {
            positions.push(self.point(phi, rng));
        }
        for i in 0..positions.len() {
            for j in 0..i {
                let (a, b) = (positions[i], positions[j]);
                if (a[0] - b[0]).hypot(a[1] - b[1]) < MIN_SEPARATION_M {
                    return None;
                }
            }
        }
        let n = positions.len();
        let mut segments = Vec::new();
        match self.preset.pattern {
            AttentionPattern::Mutual => {
                let mut facings = vec![FRAC_PI_2, bearing(positions[1], positions[0])];
                for i in 2..n {
                    facings.push(facing_away(i, &positions, cone, rng)?);
                }
                let want: BTreeSet<_> = [(0, 1), (1, 0)].into_iter().collect();
                segments.push(self.checked(0, facings, &positions, Some(1), |e| *e == want)?);
            }
            AttentionPattern::AllToOne => {
                let s = 1;
                let mut facings = vec![FRAC_PI_2, facing_away(s, &positions, cone, rng)?];
                for i in 2..n {
                    facings.push(bearing(positions[i], positions[s]));
                }
                let want: BTreeSet<_> = (0..n).filter(|&j| j != s).map(|j| (j, s)).collect();
                segments.push(self.checked(0, facings, &positions, Some(s), |e| *e == want)?);
            }
            AttentionPattern::Mixed => {
                let count = if frames >= 6 { 3 } else { 1 };
                let mut prev = usize::MAX;
                for seg in 0..count {
                    let start = if seg == 0 {
                        0
                    } else {
                        let base = seg * frames / count;
                        (base + rng.int_inclusive(0, 4)).saturating_sub(2).clamp(1, frames - 1)
                    };
                    let speaker = loop {
                        let s = rng.below(n);
                        if s != prev {
                            break s;
                        }
                    };
                    prev = speaker;
                    let addressee = if speaker == 0 {
                        None
                    } else {
                        let others: Vec<usize> = (0..n).filter(|&j| j != speaker).collect();
                        Some(others[rng.below(others.len())])
                    };
                    let mut facings = vec![FRAC_PI_2];
                    for i in 1..n {
                        let target = if i == speaker { addressee.expect("person speaker") } else { speaker };
                        facings.push(bearing(positions[i], positions[target]));
                    }
                    let mut need: BTreeSet<(usize, usize)> = (1..n).filter(|&j| j != speaker).map(|j| (j, speaker)).collect();
                    if let Some(a) = addressee {
                        need.insert((speaker, a));
                    }
                    segments.push(self.checked(start, facings, &positions, Some(speaker), |e| need.is_subset(e))?);
                }
                segments.sort_by_key(|s| s.start);
                segments.dedup_by_key(|s| s.start);
            }
        }
        Some(Layout { positions, segments })
    }

    fn checked(
        &self,
        start: usize,
        facings: Vec<f64>,
        positions: &[[f64; 2]],
        speaker: Option<usize>,
        accept: impl Fn(&BTreeSet<(usize, usize)>) -> bool,
    ) -> Option<Segment> {
        let (edges, robust) = cone_edges(positions, &facings, &self.cfg.cone);
        (robust && accept(&edges)).then_some(Segment {
            start,
            facings,
            edges,
            speaker,
        })
    }

    fn layout(&self, frames: usize, rng: &mut Rng) -> Result<Layout> {
        (0..MAX_LAYOUT_ATTEMPTS)
            .find_map(|_| self.try_layout(frames, rng))
            .ok_or_else(|| {
                Error::invalid(format!(
                    "{}: no robust layout found in {MAX_LAYOUT_ATTEMPTS} attempts",
                    self.preset.label
                ))
            })
    }
}

/// A generated clip with the attention pattern it was built to show.
#[derive(Clone, Debug)]
pub struct GeneratedClip {
    pub clip: Clip,
    /// Per frame, the intended `(source, target)` track pairs among the
    /// persons present; track 0 is the wearer.
    pub attention: Vec<BTreeSet<(i64, i64)>>,
    /// Per frame, the speaker's track id when the pattern has one.
    pub speaker: Vec<Option<i64>>,
}

fn homography(label: Label, preset: &ScenePreset, heading: f64, rng: &mut Rng) -> Vec<f64> {
    let s = preset.ego_motion_scale;
    let j = preset.jitter.motion_std;
    let (tx, ty) = if label.is_walk() {
        (
            s * (heading.cos() + 0.2 * j * rng.standard_normal()),
            s * (heading.sin() + 0.2 * j * rng.standard_normal()),
        )
    } else {
        (s * j * rng.standard_normal(), s * j * rng.standard_normal())
    };
    let theta = 0.002 * j * rng.standard_normal();
    let (sin, cos) = theta.sin_cos();
    vec![cos, -sin, tx, sin, cos, ty, 0.0, 0.0, 1.0]
}

/// One clip from `preset`, with its intended attention pattern.
pub fn generate_scene(preset: &ScenePreset, cfg: &SynthConfig, clip_id: &str, rng: &mut Rng) -> Result<GeneratedClip> {
    preset.validate()?;
    cfg.validate()?;
    let frames = cfg.frames_per_clip;
    let layout = Placer { preset, cfg }.layout(frames, rng)?;
    let n = layout.positions.len();
    let cal = synthetic_calibration();

    // random track ids so slot order carries no role information
    let mut ids: Vec<i64> = (1..n as i64).collect();
    rng.shuffle(&mut ids);
    let track = |node: usize| if node == 0 { 0 } else { ids[node - 1] };
    let base: Vec<(f64, f64, f64)> = (0..n)
        .map(|_| (rng.normal(0.0, 0.1), rng.normal(0.0, 0.05), rng.uniform_range(0.35, 0.55)))
        .collect();
    // image flow of forward walking: downward, with a per-clip spread
    let heading = -FRAC_PI_2 + rng.normal(0.0, WALK_HEADING_SPREAD);
    let jit = preset.jitter;

    let mut out = GeneratedClip {
        clip: Clip {
            clip_id: clip_id.to_string(),
            label: preset.label,
            frames: Vec::with_capacity(frames),
        },
        attention: Vec::with_capacity(frames),
        speaker: Vec::with_capacity(frames),
    };
    for t in 0..frames {
        let seg = layout
            .segments
            .iter()
            .rev()
            .find(|s| s.start <= t)
            .expect("segment starting at frame 0");
        let interior = t > 0 && t + 1 < frames;
        let mut present = vec![true; n];
        let mut observations = Vec::with_capacity(n - 1);
        for i in 1..n {
            if interior && jit.dropout > 0.0 && rng.bernoulli(jit.dropout) {
                present[i] = false;
                continue;
            }
            let p = layout.positions[i];
            let pos = [
                p[0] + rng.normal(0.0, jit.position_std),
                p[1] + rng.normal(0.0, jit.position_std),
            ];
            let facing = seg.facings[i] + rng.normal(0.0, jit.orientation_std);
            let x = cfg.camera.image_x_for(pos).clamp(0.0, 1.0);
            let d = pos[0].hypot(pos[1]);
            let (pitch, roll, y) = base[i];
            observations.push(PersonObservation {
                track_id: track(i),
                yaw: cfg.camera.yaw_for_facing(x, facing),
                pitch: pitch + rng.normal(0.0, jit.orientation_std),
                roll: roll + rng.normal(0.0, jit.orientation_std),
                image_x_norm: x,
                image_y_norm: y,
                face_height_px: face_height_for(&cal, d),
            });
        }
        observations.sort_by_key(|o| o.track_id);
        out.attention.push(
            seg.edges
                .iter()
                .filter(|&&(a, b)| present[a] && present[b])
                .map(|&(a, b)| (track(a), track(b)))
                .collect(),
        );
        out.speaker.push(seg.speaker.filter(|&s| present[s]).map(track));
        out.clip.frames.push(Frame {
            motion: homography(preset.label, preset, heading, rng),
            observations,
        });
    }
    Ok(out)
}

pub fn generate_clip(preset: &ScenePreset, cfg: &SynthConfig, clip_id: &str, rng: &mut Rng) -> Result<Clip> {
    Ok(generate_scene(preset, cfg, clip_id, rng)?.clip)
}

/// Clip ids per split.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl Manifest {
    pub fn split(&self, name: &str) -> Result<&[String]> {
        match name {
            "train" => Ok(&self.train),
            "val" => Ok(&self.val),
            "test" => Ok(&self.test),
            other => Err(Error::invalid(format!("unknown split `{other}` (train, val, test)"))),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    /// The clips named by `ids`, in that order.
    pub fn select<'a>(clips: &'a [Clip], ids: &[String]) -> Result<Vec<&'a Clip>> {
        let by_id: std::collections::HashMap<&str, &Clip> = clips.iter().map(|c| (c.clip_id.as_str(), c)).collect();
        ids.iter()
            .map(|id| {
                by_id
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| Error::invalid(format!("manifest names unknown clip `{id}`")))
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct Corpus {
    pub clips: Vec<Clip>,
    pub manifest: Manifest,
    pub calibration: DistanceCalibration,
}

pub const CLIPS_FILE: &str = "clips.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CALIBRATION_FILE: &str = "calibration.json";

/// Balanced corpus with a per-class 70/15/15 split, deterministic in `seed`.
pub fn generate_corpus_in_memory(n_per_class: usize, seed: u64, cfg: &SynthConfig) -> Result<Corpus> {
    if n_per_class == 0 {
        return Err(Error::invalid("n_per_class must be at least 1"));
    }
    cfg.validate()?;
    let mut clips = Vec::with_capacity(n_per_class * Label::ALL.len());
    let mut manifest = Manifest::default();
    for (c, &label) in Label::ALL.iter().enumerate() {
        let preset = cfg.preset(label)?;
        let mut ids = Vec::with_capacity(n_per_class);
        for k in 0..n_per_class {
            let id = format!("{}_{k:04}", label.as_str());
            let mut rng = Rng::substream(seed, ((c as u64) << 32) | k as u64);
            clips.push(generate_clip(preset, cfg, &id, &mut rng)?);
            ids.push(id);
        }
        Rng::substream(seed, (8 << 32) | c as u64).shuffle(&mut ids);
        let n_train = (0.70 * n_per_class as f64).round() as usize;
        let n_val = ((0.15 * n_per_class as f64).round() as usize).min(n_per_class - n_train);
        manifest.train.extend_from_slice(&ids[..n_train]);
        manifest.val.extend_from_slice(&ids[n_train..n_train + n_val]);
        manifest.test.extend_from_slice(&ids[n_train + n_val..]);
    }
    Ok(Corpus {
        clips,
        manifest,
        calibration: synthetic_calibration(),
    })
}

/// Writes `clips.jsonl`, `manifest.json` and `calibration.json` into `dir`.
pub fn write_corpus(dir: impl AsRef<Path>, corpus: &Corpus) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let clips_path = dir.join(CLIPS_FILE);
    let mut buf = Vec::new();
    write_clips(&mut buf, &corpus.clips).map_err(|e| Error::io(&clips_path, e))?;
    fs::write(&clips_path, buf).map_err(|e| Error::io(&clips_path, e))?;
    let m = dir.join(MANIFEST_FILE);
    fs::write(&m, corpus.manifest.to_json() + "\n").map_err(|e| Error::io(&m, e))?;
    let c = dir.join(CALIBRATION_FILE);
    fs::write(&c, corpus.calibration.to_json() + "\n").map_err(|e| Error::io(&c, e))?;
    Ok(())
}

pub fn generate_corpus(n_per_class: usize, seed: u64, cfg: &SynthConfig, dir: impl AsRef<Path>) -> Result<Corpus> {
    let corpus = generate_corpus_in_memory(n_per_class, seed, cfg)?;
    write_corpus(dir, &corpus)?;
    Ok(corpus)
}

/// Reads a corpus directory written by [`write_corpus`].
pub fn load_corpus(dir: impl AsRef<Path>) -> Result<Corpus> {
    let dir = dir.as_ref();
    let read = |name: &str| {
        let p = dir.join(name);
        fs::read_to_string(&p).map_err(|e| Error::io(&p, e))
    };
    let clips = crate::scene::load_clips(dir.join(CLIPS_FILE))?;
    let manifest = Manifest::from_json(&read(MANIFEST_FILE)?)?;
    let calibration = DistanceCalibration::from_json(&read(CALIBRATION_FILE)?)?;
    let known: BTreeSet<&str> = clips.iter().map(|c| c.clip_id.as_str()).collect();
    for id in manifest.train.iter().chain(&manifest.val).chain(&manifest.test) {
        if !known.contains(id.as_str()) {
            return Err(Error::invalid(format!("{}: unknown clip `{id}`", dir.join(MANIFEST_FILE).display())));
        }
    }
    Ok(Corpus {
        clips,
        manifest,
        calibration,
    })
}
