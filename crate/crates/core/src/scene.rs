//! Clip files and their conversion into fixed-shape tensors.
//!
//! Clip files are UTF-8 JSON Lines, one clip per line:
//!
//! ```json
//! {"clip_id": "c1", "label": "dialogue",
//!  "frames": [{"motion": [1,0,0, 0,1,0, 0,0,1],
//!              "people": [{"track_id": 3, "yaw": 0.1, "pitch": 0.0, "roll": 0.0,
//!                          "x": 0.4, "y": 0.45, "face_h": 120.0}]}]}
//! ```
//!
//! Preprocessing runs presence filtering, gap interpolation and tensorization,
//! in that order (see [`prepare_clip`]).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{estimate_distance, normalize_angle, BirdViewPose, CameraModel, DistanceCalibration};
use crate::graph::{build_frame_graph, EdgeConfig, FrameGraph};
use crate::numerics::{Matrix, Real};

/// Per-node input features: yaw, pitch, roll, image x, image y, wearer flag.
pub const NODE_FEATURES: usize = 6;
/// Flattened 3×3 homography.
pub const MOTION_FEATURES: usize = 9;
pub const NUM_CLASSES: usize = 5;

const WEARER_FEATURES: [f64; NODE_FEATURES] = [0.0, 0.0, 0.0, 0.5, 1.0, 1.0];

/// Conversation type.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Dialogue,
    Discussion,
    Monologue,
    WalkDialogue,
    WalkDiscussion,
}

impl Label {
    pub const ALL: [Label; NUM_CLASSES] = [
        Label::Dialogue,
        Label::Discussion,
        Label::Monologue,
        Label::WalkDialogue,
        Label::WalkDiscussion,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Dialogue => "dialogue",
            Label::Discussion => "discussion",
            Label::Monologue => "monologue",
            Label::WalkDialogue => "walk_dialogue",
            Label::WalkDiscussion => "walk_discussion",
        }
    }

    pub fn is_walk(self) -> bool {
        matches!(self, Label::WalkDialogue | Label::WalkDiscussion)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown label `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PersonObservation {
    pub track_id: i64,
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
    #[serde(rename = "x")]
    pub image_x_norm: f64,
    #[serde(rename = "y")]
    pub image_y_norm: f64,
    #[serde(rename = "face_h")]
    pub face_height_px: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Frame {
    /// Row-major 3×3 homography to the next frame, `motion[8] == 1`.
    pub motion: Vec<f64>,
    #[serde(rename = "people")]
    pub observations: Vec<PersonObservation>,
}

impl Frame {
    pub fn find(&self, track_id: i64) -> Option<&PersonObservation> {
        self.observations.iter().find(|o| o.track_id == track_id)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Clip {
    pub clip_id: String,
    pub label: Label,
    pub frames: Vec<Frame>,
}

impl Clip {
    /// Distinct track ids, ascending.
    pub fn track_ids(&self) -> Vec<i64> {
        let ids: BTreeSet<i64> = self.frames.iter().flat_map(|f| f.observations.iter().map(|o| o.track_id)).collect();
        ids.into_iter().collect()
    }

    /// Checks every schema invariant. `line` is used for error reporting.
    pub fn validate(&self, line: usize) -> Result<()> {
        let fail = |field: &str, message: String| Error::Schema {
            line,
            clip_id: self.clip_id.clone(),
            field: field.to_string(),
            message,
        };
        if self.frames.len() < 2 {
            return Err(fail("frames", format!("need at least 2 frames, got {}", self.frames.len())));
        }
        for (t, frame) in self.frames.iter().enumerate() {
            if frame.motion.len() != MOTION_FEATURES {
                return Err(fail("motion", format!("frame {t}: expected 9 values, got {}", frame.motion.len())));
            }
            if frame.motion.iter().any(|m| !m.is_finite()) {
                return Err(fail("motion", format!("frame {t}: non-finite entry")));
            }
            if frame.motion[8] != 1.0 {
                return Err(fail("motion", format!("frame {t}: bottom-right entry must be 1, got {}", frame.motion[8])));
            }
            let mut ids = BTreeSet::new();
            for o in &frame.observations {
                if !ids.insert(o.track_id) {
                    return Err(fail("track_id", format!("frame {t}: duplicate track {}", o.track_id)));
                }
                for (name, a) in [("yaw", o.yaw), ("pitch", o.pitch), ("roll", o.roll)] {
                    if !(a > -std::f64::consts::PI && a <= std::f64::consts::PI) {
                        return Err(fail(name, format!("frame {t}, track {}: angle {a} outside (-π, π]", o.track_id)));
                    }
                }
                for (name, v) in [("x", o.image_x_norm), ("y", o.image_y_norm)] {
                    if !(0.0..=1.0).contains(&v) {
                        return Err(fail(name, format!("frame {t}, track {}: {v} outside [0, 1]", o.track_id)));
                    }
                }
                if !(o.face_height_px > 0.0 && o.face_height_px.is_finite()) {
                    return Err(fail("face_h", format!("frame {t}, track {}: must be positive", o.track_id)));
                }
            }
        }
        Ok(())
    }
}

/// Parses clip JSON Lines. Blank lines are skipped; line numbers are 1-based.
pub fn parse_clips(reader: impl BufRead) -> Result<Vec<Clip>> {
    let mut clips = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(format!("line {line_no}"), e))?;
        if line.trim().is_empty() {
            continue;
        }
        clips.push(parse_clip_line(&line, line_no)?);
    }
    Ok(clips)
}

fn parse_clip_line(line: &str, line_no: usize) -> Result<Clip> {
    let value: serde_json::Value = serde_json::from_str(line).map_err(|e| Error::Schema {
        line: line_no,
        clip_id: "?".into(),
        field: "<json>".into(),
        message: e.to_string(),
    })?;
    let clip_id = value
        .get("clip_id")
        .and_then(|v| v.as_str())
        .unwrap_or("?")
        .to_string();
    let clip: Clip = serde_json::from_value(value).map_err(|e| {
        let message = e.to_string();
        Error::Schema {
            line: line_no,
            clip_id: clip_id.clone(),
            field: backticked(&message).unwrap_or("?").to_string(),
            message,
        }
    })?;
    clip.validate(line_no)?;
    Ok(clip)
}

fn backticked(msg: &str) -> Option<&str> {
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    Some(&msg[start..start + len])
}

pub fn load_clips(path: impl AsRef<Path>) -> Result<Vec<Clip>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_clips(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn write_clips(mut out: impl Write, clips: &[Clip]) -> std::io::Result<()> {
    for clip in clips {
        serde_json::to_writer(&mut out, clip)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn save_clips(path: impl AsRef<Path>, clips: &[Clip]) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_clips(std::io::BufWriter::new(file), clips).map_err(|e| Error::io(path, e))
}

/// Presence score `(frames present / frames) · 1 / (1 + mean distance)` per track.
pub fn presence_scores(clip: &Clip, cal: &DistanceCalibration) -> Result<BTreeMap<i64, f64>> {
    let n = clip.frames.len().max(1) as f64;
    let mut acc: BTreeMap<i64, (usize, f64)> = BTreeMap::new();
    for frame in &clip.frames {
        for o in &frame.observations {
            let d = estimate_distance(cal, o.face_height_px)?;
            let e = acc.entry(o.track_id).or_insert((0, 0.0));
            e.0 += 1;
            e.1 += d;
        }
    }
    Ok(acc
        .into_iter()
        .map(|(id, (count, dsum))| {
            let mean = dsum / count as f64;
            (id, (count as f64 / n) / (1.0 + mean))
        })
        .collect())
}

/// Drops tracks whose presence score is below `threshold`.
pub fn presence_filter(clip: &Clip, threshold: f64, cal: &DistanceCalibration) -> Result<Clip> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::invalid(format!("presence threshold {threshold} outside [0, 1]")));
    }
    let scores = presence_scores(clip, cal)?;
    let keep: BTreeSet<i64> = scores.into_iter().filter(|&(_, s)| s >= threshold).map(|(id, _)| id).collect();
    let mut out = clip.clone();
    for frame in &mut out.frames {
        frame.observations.retain(|o| keep.contains(&o.track_id));
    }
    Ok(out)
}

fn lerp(a: f64, b: f64, s: f64) -> f64 {
    a + (b - a) * s
}

fn lerp_angle(a: f64, b: f64, s: f64) -> f64 {
    normalize_angle(a + normalize_angle(b - a) * s)
}

/// Fills absences of at most `max_gap` frames that have an observation on
/// both sides. Angles follow the shortest arc; other fields are linear.
pub fn interpolate_gaps(clip: &Clip, max_gap: usize) -> Clip {
    let mut out = clip.clone();
    for id in clip.track_ids() {
        let seen: Vec<usize> = clip
            .frames
            .iter()
            .enumerate()
            .filter(|(_, f)| f.find(id).is_some())
            .map(|(t, _)| t)
            .collect();
        for w in seen.windows(2) {
            let (a, b) = (w[0], w[1]);
            let gap = b - a - 1;
            if gap == 0 || gap > max_gap {
                continue;
            }
            let oa = clip.frames[a].find(id).expect("observed");
            let ob = clip.frames[b].find(id).expect("observed");
            for t in a + 1..b {
                let s = (t - a) as f64 / (b - a) as f64;
                out.frames[t].observations.push(PersonObservation {
                    track_id: id,
                    yaw: lerp_angle(oa.yaw, ob.yaw, s),
                    pitch: lerp_angle(oa.pitch, ob.pitch, s),
                    roll: lerp_angle(oa.roll, ob.roll, s),
                    image_x_norm: lerp(oa.image_x_norm, ob.image_x_norm, s),
                    image_y_norm: lerp(oa.image_y_norm, ob.image_y_norm, s),
                    face_height_px: lerp(oa.face_height_px, ob.face_height_px, s),
                });
            }
        }
    }
    for frame in &mut out.frames {
        frame.observations.sort_by_key(|o| o.track_id);
    }
    out
}

/// Shapes, cue switches and preprocessing knobs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub frames_per_clip: usize,
    pub m_max: usize,
    pub presence_threshold: f64,
    pub max_gap: usize,
    pub camera: CameraModel,
    pub edges: EdgeConfig,
    pub use_orientation: bool,
    pub use_localization: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            frames_per_clip: 25,
            m_max: 6,
            presence_threshold: 0.1,
            max_gap: 5,
            camera: CameraModel::default(),
            edges: EdgeConfig::default(),
            use_orientation: true,
            use_localization: true,
        }
    }
}

impl DataConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frames_per_clip == 0 {
            return Err(Error::invalid("frames_per_clip must be positive"));
        }
        if self.m_max < 2 {
            return Err(Error::invalid("m_max must be at least 2 (wearer + one person)"));
        }
        if !(0.0..=1.0).contains(&self.presence_threshold) {
            return Err(Error::invalid("presence_threshold must lie in [0, 1]"));
        }
        self.camera.validate()?;
        self.edges.validate()
    }
}

/// A clip as fixed-shape model input.
#[derive(Clone, Debug, PartialEq)]
pub struct ClipTensor<T> {
    pub clip_id: String,
    /// One `M_max × 6` matrix per frame; slot 0 is the wearer.
    pub node_features: Vec<Matrix<T>>,
    pub node_mask: Vec<Vec<bool>>,
    pub graphs: Vec<FrameGraph<T>>,
    /// One 9-vector per frame.
    pub motion: Vec<Vec<T>>,
    pub label: usize,
}

impl<T: Real> ClipTensor<T> {
    pub fn frames(&self) -> usize {
        self.node_features.len()
    }

    pub fn m_max(&self) -> usize {
        self.node_features.first().map_or(0, Matrix::rows)
    }

    /// Same content with extra inactive slots appended.
    pub fn padded(&self, m_max: usize) -> Result<Self> {
        let old = self.m_max();
        if m_max < old {
            return Err(Error::invalid(format!("cannot shrink clip tensor from {old} to {m_max} slots")));
        }
        Ok(Self {
            clip_id: self.clip_id.clone(),
            node_features: self
                .node_features
                .iter()
                .map(|f| Matrix::from_fn(m_max, f.cols(), |i, j| if i < old { f[(i, j)] } else { T::zero() }))
                .collect(),
            node_mask: self
                .node_mask
                .iter()
                .map(|m| {
                    let mut m = m.clone();
                    m.resize(m_max, false);
                    m
                })
                .collect(),
            graphs: self.graphs.iter().map(|g| g.padded(m_max)).collect::<Result<_>>()?,
            motion: self.motion.clone(),
            label: self.label,
        })
    }

    pub fn cast<U: Real>(&self) -> ClipTensor<U> {
        ClipTensor {
            clip_id: self.clip_id.clone(),
            node_features: self.node_features.iter().map(Matrix::cast).collect(),
            node_mask: self.node_mask.clone(),
            graphs: self.graphs.iter().map(FrameGraph::cast).collect(),
            motion: self.motion.iter().map(|m| m.iter().map(|&x| U::of(x.as_f64())).collect()).collect(),
            label: self.label,
        }
    }
}

/// Nearest-index resampling of `n` frames to `t` frames.
pub fn resample_indices(n: usize, t: usize) -> Vec<usize> {
    if t == 1 || n == 1 {
        return vec![0; t];
    }
    (0..t)
        .map(|k| ((k as f64) * (n - 1) as f64 / (t - 1) as f64).round() as usize)
        .collect()
}

/// Converts an already filtered clip into a [`ClipTensor`].
pub fn tensorize<T: Real>(clip: &Clip, cal: &DistanceCalibration, config: &DataConfig) -> Result<ClipTensor<T>> {
    config.validate()?;
    clip.validate(0)?;
    let tracks = clip.track_ids();
    let capacity = config.m_max - 1;
    if tracks.len() > capacity {
        return Err(Error::TooManyTracks {
            clip_id: clip.clip_id.clone(),
            tracks: tracks.len(),
            capacity,
        });
    }
    let slot_of: BTreeMap<i64, usize> = tracks.iter().enumerate().map(|(k, &id)| (id, k + 1)).collect();

    let t_out = config.frames_per_clip;
    let mut out = ClipTensor {
        clip_id: clip.clip_id.clone(),
        node_features: Vec::with_capacity(t_out),
        node_mask: Vec::with_capacity(t_out),
        graphs: Vec::with_capacity(t_out),
        motion: Vec::with_capacity(t_out),
        label: clip.label.index(),
    };
    for src in resample_indices(clip.frames.len(), t_out) {
        let frame = &clip.frames[src];
        let mut feats = Matrix::<T>::zeros(config.m_max, NODE_FEATURES);
        let mut mask = vec![false; config.m_max];
        let mut poses = vec![(0, BirdViewPose::wearer())];
        mask[0] = true;
        write_features(feats.row_mut(0), &WEARER_FEATURES, config);
        for o in &frame.observations {
            let slot = slot_of[&o.track_id];
            mask[slot] = true;
            let raw = [o.yaw, o.pitch, o.roll, o.image_x_norm, o.image_y_norm, 0.0];
            write_features(feats.row_mut(slot), &raw, config);
            let d = estimate_distance(cal, o.face_height_px)?;
            poses.push((slot, config.camera.pose(o.image_x_norm, d, o.yaw)?));
        }
        out.graphs.push(build_frame_graph(config.m_max, &poses, &config.edges)?);
        out.node_features.push(feats);
        out.node_mask.push(mask);
        out.motion.push(frame.motion.iter().map(|&m| T::of(m)).collect());
    }
    Ok(out)
}

fn write_features<T: Real>(dst: &mut [T], raw: &[f64; NODE_FEATURES], config: &DataConfig) {
    for (k, (d, &v)) in dst.iter_mut().zip(raw).enumerate() {
        let keep = match k {
            0..=2 => config.use_orientation,
            3 | 4 => config.use_localization,
            _ => true,
        };
        *d = if keep { T::of(v) } else { T::zero() };
    }
}

/// Presence filter, gap interpolation, then tensorization.
pub fn prepare_clip<T: Real>(clip: &Clip, cal: &DistanceCalibration, config: &DataConfig) -> Result<ClipTensor<T>> {
    let filtered = presence_filter(clip, config.presence_threshold, cal)?;
    let filled = interpolate_gaps(&filtered, config.max_gap);
    tensorize(&filled, cal, config)
}

/// [`prepare_clip`] over many clips.
pub fn prepare_all<'a, T: Real>(
    clips: impl IntoIterator<Item = &'a Clip>,
    cal: &DistanceCalibration,
    config: &DataConfig,
) -> Result<Vec<ClipTensor<T>>> {
    clips.into_iter().map(|c| prepare_clip(c, cal, config)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cal() -> DistanceCalibration {
        // d = 4 - 0.02 h over [25, 175] px
        DistanceCalibration::new(vec![4.0, -0.02], [25.0, 175.0]).unwrap()
    }

    fn obs(track_id: i64, yaw: f64, face_h: f64) -> PersonObservation {
        PersonObservation {
            track_id,
            yaw,
            pitch: 0.0,
            roll: 0.0,
            image_x_norm: 0.5,
            image_y_norm: 0.4,
            face_height_px: face_h,
        }
    }

    fn identity() -> Vec<f64> {
        vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]
    }

    fn clip(frames: Vec<Vec<PersonObservation>>) -> Clip {
        Clip {
            clip_id: "c".into(),
            label: Label::Dialogue,
            frames: frames
                .into_iter()
                .map(|observations| Frame {
                    motion: identity(),
                    observations,
                })
                .collect(),
        }
    }

    #[test]
    fn empty_input_parses_to_nothing() {
        assert!(parse_clips("".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn missing_label_names_line_and_field() {
        let good = serde_json::to_string(&clip(vec![vec![], vec![]])).unwrap();
        let bad = r#"{"clip_id":"x9","frames":[]}"#;
        let text = format!("{good}\n{bad}\n");
        match parse_clips(text.as_bytes()).unwrap_err() {
            Error::Schema { line, clip_id, field, .. } => {
                assert_eq!(line, 2);
                assert_eq!(clip_id, "x9");
                assert_eq!(field, "label");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn semantic_validation() {
        let mut c = clip(vec![vec![obs(1, 0.0, 100.0)], vec![]]);
        c.frames[0].motion[8] = 2.0;
        let text = serde_json::to_string(&c).unwrap();
        assert!(matches!(parse_clips(text.as_bytes()), Err(Error::Schema { field, .. }) if field == "motion"));

        let one = clip(vec![vec![]]);
        assert!(one.validate(1).is_err());

        let dup = clip(vec![vec![obs(1, 0.0, 100.0), obs(1, 0.1, 100.0)], vec![]]);
        assert!(dup.validate(1).is_err());

        let bad_label = r#"{"clip_id":"q","label":"chat","frames":[]}"#;
        assert!(parse_clips(bad_label.as_bytes()).is_err());
    }

    #[test]
    fn full_presence_near_camera_scores_one() {
        let c = clip(vec![vec![obs(4, 0.0, 200.0)]; 3]);
        let zero = DistanceCalibration::new(vec![0.0], [1.0, 500.0]).unwrap();
        // clamped to the 0.1 m floor
        let s = presence_scores(&c, &zero).unwrap()[&4];
        assert!((s - 1.0 / 1.1).abs() < 1e-12);
        assert_eq!(presence_filter(&c, 1.0 / 1.1, &zero).unwrap(), c);
    }

    #[test]
    fn presence_filter_drops_rare_far_tracks() {
        let mut frames = vec![vec![obs(1, 0.0, 150.0)]; 10];
        frames[0].push(obs(2, 0.0, 30.0));
        let c = clip(frames);
        let f = presence_filter(&c, 0.1, &cal()).unwrap();
        assert_eq!(f.track_ids(), vec![1]);
        assert_eq!(presence_filter(&f, 0.1, &cal()).unwrap(), f);
        assert_eq!(presence_filter(&c, 0.0, &cal()).unwrap(), c);
        assert!(presence_filter(&c, 1.5, &cal()).is_err());
    }

    #[test]
    fn constant_gap_fill() {
        let o = obs(1, 0.3, 90.0);
        let c = clip(vec![vec![o.clone()], vec![], vec![o.clone()]]);
        let f = interpolate_gaps(&c, 1);
        assert_eq!(f.frames[1].observations, vec![o]);
    }

    #[test]
    fn midpoint_fill() {
        let c = clip(vec![vec![obs(1, 0.0, 100.0)], vec![], vec![obs(1, 0.4, 120.0)]]);
        let f = interpolate_gaps(&c, 5);
        let m = &f.frames[1].observations[0];
        assert!((m.yaw - 0.2).abs() < 1e-15);
        assert!((m.face_height_px - 110.0).abs() < 1e-12);
    }

    #[test]
    fn shortest_arc_fill() {
        let c = clip(vec![vec![obs(1, 3.0, 100.0)], vec![], vec![obs(1, -3.0, 100.0)]]);
        let f = interpolate_gaps(&c, 1);
        let y = f.frames[1].observations[0].yaw;
        // unwrap -3.0 to -3.0 + 2π and average on the real line
        let oracle = normalize_angle((3.0 + (-3.0 + std::f64::consts::TAU)) / 2.0);
        assert!(y.abs() > 3.0);
        assert!((normalize_angle(y - oracle)).abs() < 1e-12);
    }

    #[test]
    fn long_and_boundary_gaps_stay_open() {
        let c = clip(vec![vec![], vec![obs(1, 0.0, 100.0)], vec![], vec![], vec![], vec![obs(1, 0.0, 100.0)], vec![]]);
        let f = interpolate_gaps(&c, 2);
        assert_eq!(f, c);
        let g = interpolate_gaps(&c, 3);
        assert!(g.frames[0].observations.is_empty() && g.frames[6].observations.is_empty());
        assert_eq!(g.frames[3].observations.len(), 1);
        for t in [1, 5] {
            assert_eq!(g.frames[t], c.frames[t]);
        }
    }

    #[test]
    fn resampling() {
        assert_eq!(resample_indices(5, 5), vec![0, 1, 2, 3, 4]);
        assert_eq!(resample_indices(3, 5), vec![0, 1, 1, 2, 2]);
        assert_eq!(resample_indices(10, 1), vec![0]);
    }

    #[test]
    fn tensorize_single_person() {
        let c = clip(vec![vec![obs(7, 0.1, 100.0)]; 4]);
        let cfg = DataConfig {
            frames_per_clip: 4,
            m_max: 3,
            ..DataConfig::default()
        };
        let t: ClipTensor<f64> = tensorize(&c, &cal(), &cfg).unwrap();
        assert_eq!(t.frames(), 4);
        assert_eq!(t.m_max(), 3);
        for (g, feats) in t.graphs.iter().zip(&t.node_features) {
            assert_eq!(g.n_active, 2);
            assert_eq!(feats.row(0), &WEARER_FEATURES);
            assert_eq!(feats.row(1), &[0.1, 0.0, 0.0, 0.5, 0.4, 0.0]);
            assert_eq!(feats.row(2), &[0.0; 6]);
        }
        assert_eq!(t.node_mask[0], vec![true, true, false]);
        assert_eq!(t.motion[0], identity());
    }

    #[test]
    fn tensorize_shapes_depend_only_on_config() {
        let cfg = DataConfig::default();
        let a: ClipTensor<f64> = tensorize(&clip(vec![vec![]; 3]), &cal(), &cfg).unwrap();
        let b: ClipTensor<f64> =
            tensorize(&clip(vec![vec![obs(1, 0.0, 90.0), obs(2, 0.2, 80.0)]; 60]), &cal(), &cfg).unwrap();
        assert_eq!(a.frames(), b.frames());
        assert_eq!(a.m_max(), b.m_max());
        assert_eq!(a.node_features[0].shape(), b.node_features[0].shape());
    }

    #[test]
    fn too_many_tracks() {
        let people: Vec<_> = (0..6).map(|k| obs(k, 0.0, 100.0)).collect();
        let c = clip(vec![people; 2]);
        let err = tensorize::<f64>(&c, &cal(), &DataConfig::default()).unwrap_err();
        assert!(matches!(err, Error::TooManyTracks { tracks: 6, capacity: 5, .. }));
        assert!(err.to_string().contains("presence threshold"));
    }

    #[test]
    fn ablated_columns_are_zero() {
        let c = clip(vec![vec![obs(1, 0.7, 100.0)]; 2]);
        let cfg = DataConfig {
            frames_per_clip: 2,
            use_orientation: false,
            use_localization: false,
            ..DataConfig::default()
        };
        let t: ClipTensor<f64> = tensorize(&c, &cal(), &cfg).unwrap();
        assert_eq!(t.node_features[0].row(1), &[0.0; 6]);
        assert_eq!(t.node_features[0].row(0), &[0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    }
}
