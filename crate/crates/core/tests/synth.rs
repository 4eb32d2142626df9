use igcn::geometry::estimate_distance;
use igcn::numerics::Rng;
use igcn::scene::{Clip, Label};
use igcn::synth::{generate_clip, generate_corpus, load_corpus, synthetic_calibration, SynthConfig, CLIPS_FILE, MANIFEST_FILE};

fn clips_of(label: Label, n: usize, seed: u64) -> Vec<Clip> {
    let cfg = SynthConfig::default();
    let preset = cfg.preset(label).unwrap();
    (0..n)
        .map(|k| generate_clip(preset, &cfg, &format!("c{k}"), &mut Rng::substream(seed, k as u64)).unwrap())
        .collect()
}

fn mean_distance(clips: &[Clip]) -> f64 {
    let cal = synthetic_calibration();
    let (mut sum, mut n) = (0.0, 0usize);
    for c in clips {
        for f in &c.frames {
            for o in &f.observations {
                sum += estimate_distance(&cal, o.face_height_px).unwrap();
                n += 1;
            }
        }
    }
    sum / n as f64
}

#[test]
fn monologue_audiences_sit_further_away() {
    let mono = mean_distance(&clips_of(Label::Monologue, 500, 1));
    let dia = mean_distance(&clips_of(Label::Dialogue, 500, 2));
    assert!((mono - 3.5).abs() <= 0.2, "monologue mean distance {mono}");
    assert!((dia - 1.5).abs() <= 0.2, "dialogue mean distance {dia}");
}

fn mean_translation(clip: &Clip) -> f64 {
    let total: f64 = clip.frames.iter().map(|f| f.motion[2].hypot(f.motion[5])).sum();
    total / clip.frames.len() as f64
}

#[test]
fn walking_is_separable_by_translation() {
    let threshold = 0.02;
    for label in Label::ALL {
        for clip in clips_of(label, 100, 3 + label.index() as u64) {
            let m = mean_translation(&clip);
            assert_eq!(m > threshold, label.is_walk(), "{} clip {}: mean translation {m}", label.as_str(), clip.clip_id);
        }
    }
}

#[test]
fn corpus_files_are_reproducible() {
    let cfg = SynthConfig::default();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    generate_corpus(4, 9, &cfg, a.path()).unwrap();
    generate_corpus(4, 9, &cfg, b.path()).unwrap();
    for name in [CLIPS_FILE, MANIFEST_FILE, igcn::synth::CALIBRATION_FILE] {
        assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    let c = tempfile::tempdir().unwrap();
    generate_corpus(4, 10, &cfg, c.path()).unwrap();
    assert_ne!(std::fs::read(a.path().join(CLIPS_FILE)).unwrap(), std::fs::read(c.path().join(CLIPS_FILE)).unwrap());
}

#[test]
fn manifest_covers_every_clip_once() {
    let dir = tempfile::tempdir().unwrap();
    let n = 20;
    generate_corpus(n, 0, &SynthConfig::default(), dir.path()).unwrap();
    let corpus = load_corpus(dir.path()).unwrap();
    let m = &corpus.manifest;
    assert_eq!(corpus.clips.len(), 5 * n);
    assert_eq!(m.train.len() + m.val.len() + m.test.len(), 5 * n);
    assert_eq!((m.train.len(), m.val.len(), m.test.len()), (70, 15, 15));
    for label in Label::ALL {
        let count = |ids: &[String]| ids.iter().filter(|id| id.starts_with(&format!("{}_", label.as_str()))).count();
        assert_eq!((count(&m.train), count(&m.val), count(&m.test)), (14, 3, 3), "{}", label.as_str());
    }
}
