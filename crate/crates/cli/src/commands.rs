use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use igcn::config::RunConfig;
use igcn::geometry::{fit_distance_model, DistanceCalibration};
use igcn::gradcheck::{self, GradCheckConfig};
use igcn::metrics::evaluate;
use igcn::model::{forward, load_checkpoint, save_checkpoint, Checkpoint};
use igcn::numerics::{poly_eval, Rng};
use igcn::scene::{load_clips, prepare_all, prepare_clip, Clip, Label};
use igcn::synth::{self, Manifest, CALIBRATION_FILE};
use igcn::training::{history_csv, predict_all, train, TrainConfig};
use log::info;

use crate::{Cli, CliResult, Command, DumpGraphArgs, EvalArgs, Failure, FitArgs, GradcheckArgs, PredictArgs, SynthArgs, TrainArgs};

pub fn run(cli: Cli) -> CliResult {
    let config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Synth(a) => synth_cmd(config, a),
        Command::Train(a) => train_cmd(config, a),
        Command::Eval(a) => eval_cmd(a),
        Command::Predict(a) => predict_cmd(a),
        Command::Gradcheck(a) => gradcheck_cmd(a),
        Command::FitDistanceModel(a) => fit_cmd(a),
        Command::DumpGraph(a) => dump_graph_cmd(config, a),
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    let parsed = if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str::<RunConfig>(&text).map_err(|e| e.to_string())
    } else {
        RunConfig::from_json(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn validated(config: &RunConfig) -> CliResult {
    config.validate().map_err(|e| usage(format!("invalid configuration: {e}")))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> CliResult {
    fs::write(path, contents).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> CliResult {
    fs::create_dir_all(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn header(config_hash: &str, config: &RunConfig) -> String {
    let ablated = config.train.ablation.active();
    let ablated = if ablated.is_empty() { "none".to_string() } else { ablated.join(",") };
    format!("# config_hash={config_hash} ablate={ablated}\n")
}

fn synth_cmd(config: RunConfig, a: SynthArgs) -> CliResult {
    config.synth.validate().map_err(|e| usage(format!("invalid synth configuration: {e}")))?;
    let n = usize::try_from(a.n).map_err(|_| usage("--n is too large"))?;
    let corpus = synth::generate_corpus_in_memory(n, a.seed, &config.synth)?;
    synth::write_corpus(&a.out, &corpus)?;
    let hash = config.hash();
    let meta = serde_json::json!({
        "config_hash": hash,
        "n_per_class": n,
        "seed": a.seed,
        "synth": config.synth,
    });
    write(&a.out.join("synth.json"), serde_json::to_string_pretty(&meta).expect("json") + "\n")?;
    outln!(
        "wrote {} clips to {} (train {}, val {}, test {})",
        corpus.clips.len(),
        a.out.display(),
        corpus.manifest.train.len(),
        corpus.manifest.val.len(),
        corpus.manifest.test.len()
    );
    Ok(())
}

fn apply_train_overrides(config: &mut RunConfig, a: &TrainArgs) -> CliResult {
    if let Some(p) = &a.preset {
        let ablation = config.train.ablation;
        config.train = if p == "conservative" { TrainConfig::conservative() } else { TrainConfig::synthetic() };
        config.train.ablation = ablation;
    }
    let t = &mut config.train;
    if let Some(s) = a.seed {
        t.seed = s;
    }
    if let Some(e) = a.epochs {
        t.epochs = e;
    }
    if let Some(lr) = a.lr {
        t.learning_rate = lr;
    }
    if let Some(b) = a.batch_size {
        t.batch_size = b;
    }
    for name in &a.ablate {
        t.ablation.set(name).map_err(|e| usage(e.to_string()))?;
    }
    if a.no_augment {
        t.augment = false;
    }
    if a.record_timing {
        t.record_timing = true;
    }
    if a.val_fraction.is_some() {
        config.val_fraction = a.val_fraction;
    }
    let p = &mut config.paths;
    for (dst, src) in [(&mut p.data, &a.data), (&mut p.out, &a.out), (&mut p.calibration, &a.calibration)] {
        if src.is_some() {
            dst.clone_from(src);
        }
    }
    Ok(())
}

fn load_calibration(path: &Path) -> CliResult<DistanceCalibration> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    Ok(DistanceCalibration::from_json(&text)?)
}

fn selected<'a>(clips: &'a [Clip], ids: &[String]) -> CliResult<Vec<&'a Clip>> {
    Ok(Manifest::select(clips, ids)?)
}

fn train_cmd(mut config: RunConfig, a: TrainArgs) -> CliResult {
    apply_train_overrides(&mut config, &a)?;
    validated(&config)?;
    let data_dir = config.paths.data.clone().ok_or_else(|| usage("train needs --data or paths.data"))?;
    let out_dir = config.paths.out.clone().ok_or_else(|| usage("train needs --out or paths.out"))?;
    let hash = config.hash();
    outln!("config_hash {hash}");
    log::debug!("effective config: {}", config.to_json());

    let mut corpus = synth::load_corpus(&data_dir)?;
    if let Some(p) = &config.paths.calibration {
        corpus.calibration = load_calibration(p)?;
    }
    let (data, dims) = config.effective();
    let (train_ids, val_ids) = match config.val_fraction {
        Some(f) => {
            let mut ids = corpus.manifest.train.clone();
            Rng::substream(config.train.seed, 3).shuffle(&mut ids);
            let n_val = ((f * ids.len() as f64).round() as usize).clamp(1, ids.len().saturating_sub(1).max(1));
            let val = ids.split_off(ids.len() - n_val);
            (ids, val)
        }
        None => (corpus.manifest.train.clone(), corpus.manifest.val.clone()),
    };
    let train_set = prepare_all::<f64>(selected(&corpus.clips, &train_ids)?, &corpus.calibration, &data)?;
    let val_set = prepare_all::<f64>(selected(&corpus.clips, &val_ids)?, &corpus.calibration, &data)?;

    let start = Instant::now();
    let outcome = train(&train_set, Some(&val_set), dims, &config.train)?;
    info!("trained in {:.1}s", start.elapsed().as_secs_f64());

    let mut recorded = config.clone();
    recorded.paths = Default::default();
    let ckpt = Checkpoint {
        config_hash: hash.clone(),
        config: serde_json::to_value(&recorded).expect("config serializes"),
        params: outcome.params,
    };
    create_dir(&out_dir)?;
    save_checkpoint(out_dir.join("checkpoint.json"), &ckpt)?;
    write(&out_dir.join("history.csv"), header(&hash, &config) + &history_csv(&outcome.history))?;
    write(&out_dir.join("config.json"), config.to_json() + "\n")?;
    outln!("selected epoch {} of {}", outcome.selected_epoch, config.train.epochs);
    if !val_set.is_empty() {
        let (loss, preds) = predict_all(&ckpt.params, &val_set)?;
        let truths: Vec<usize> = val_set.iter().map(|c| c.label).collect();
        let ev = evaluate(&preds, &truths)?;
        write(&out_dir.join("val_metrics.csv"), ev.to_csv() + &format!("config_hash,{hash},\n"))?;
        outln!("validation loss {loss:.4}");
        out!("{}", ev.report());
    }
    Ok(())
}

fn checkpoint_config(ckpt: &Checkpoint) -> CliResult<RunConfig> {
    serde_json::from_value(ckpt.config.clone()).map_err(|e| Failure::Data(format!("checkpoint config: {e}")))
}

fn check_slots(ckpt: &Checkpoint, m_max: usize) -> CliResult {
    let want = ckpt.params.dims.m_max;
    if want != m_max {
        return Err(Failure::Data(format!(
            "checkpoint was trained with M_max = {want}, data is configured for M_max = {m_max}"
        )));
    }
    Ok(())
}

fn eval_cmd(a: EvalArgs) -> CliResult {
    let ckpt = load_checkpoint(&a.checkpoint)?;
    let config = checkpoint_config(&ckpt)?;
    let (mut data, _) = config.effective();
    if let Some(m) = a.m_max {
        data.m_max = m;
    }
    data.validate().map_err(|e| usage(e.to_string()))?;
    check_slots(&ckpt, data.m_max)?;
    let mut corpus = synth::load_corpus(&a.data)?;
    if let Some(p) = &a.calibration {
        corpus.calibration = load_calibration(p)?;
    }
    let ids = corpus.manifest.split(&a.split).map_err(|e| usage(e.to_string()))?.to_vec();
    let set = prepare_all::<f64>(selected(&corpus.clips, &ids)?, &corpus.calibration, &data)?;
    if set.is_empty() {
        return Err(Failure::Data(format!("split `{}` is empty", a.split)));
    }
    let (loss, preds) = predict_all(&ckpt.params, &set)?;
    let truths: Vec<usize> = set.iter().map(|c| c.label).collect();
    let ev = evaluate(&preds, &truths)?;
    outln!("split {} ({} clips), loss {loss:.4}", a.split, set.len());
    out!("{}", ev.report());
    if let Some(out) = &a.out {
        write(out, ev.to_csv() + &format!("config_hash,{},\n", ckpt.config_hash))?;
    }
    if let Some(out) = &a.confusion_out {
        write(out, ev.confusion.to_csv())?;
    }
    Ok(())
}

fn predict_cmd(a: PredictArgs) -> CliResult {
    let ckpt = load_checkpoint(&a.checkpoint)?;
    let config = checkpoint_config(&ckpt)?;
    let (data, _) = config.effective();
    check_slots(&ckpt, data.m_max)?;
    let cal_path = a.calibration.clone().unwrap_or_else(|| sibling(&a.clips, CALIBRATION_FILE));
    let cal = load_calibration(&cal_path)?;
    let clips = load_clips(&a.clips)?;
    let mut out = format!("# config_hash={}\nclip_id,predicted", ckpt.config_hash);
    for l in Label::ALL {
        out.push_str(&format!(",p_{l}"));
    }
    out.push('\n');
    for clip in &clips {
        let tensor = prepare_clip::<f64>(clip, &cal, &data)?;
        let trace = forward(&tensor, &ckpt.params)?;
        let label = Label::from_index(trace.predicted()).expect("class index");
        out.push_str(&format!("{},{label}", clip.clip_id));
        for p in &trace.probabilities {
            out.push_str(&format!(",{p}"));
        }
        out.push('\n');
    }
    match &a.out {
        Some(path) => write(path, out),
        None => {
            out!("{out}");
            Ok(())
        }
    }
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().map_or_else(|| PathBuf::from(name), |p| p.join(name))
}

fn gradcheck_cmd(a: GradcheckArgs) -> CliResult {
    if a.seeds == 0 {
        return Err(usage("--seeds must be at least 1"));
    }
    let cfg = GradCheckConfig {
        seeds: a.seeds,
        base_seed: a.base_seed,
        corrupt: a.corrupt,
        ..GradCheckConfig::default()
    };
    let start = Instant::now();
    let report = gradcheck::run(&cfg)?;
    outln!("{:<8} {:>8} {:>12} {:>9}", "block", "entries", "max_rel_err", "failures");
    for b in &report.blocks {
        outln!("{:<8} {:>8} {:>12.3e} {:>9}", b.name, b.entries, b.max_error, b.failures);
    }
    outln!(
        "{} seeds, max relative error {:.3e} (tolerance {:e}), {:.1}s",
        report.seeds,
        report.max_error(),
        cfg.rel_tol,
        start.elapsed().as_secs_f64()
    );
    if report.passed() {
        outln!("PASS");
        Ok(())
    } else {
        Err(Failure::Numeric("gradient check failed".into()))
    }
}

fn parse_samples(path: &Path) -> CliResult<Vec<(f64, f64)>> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    let mut samples = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = match fields.as_slice() {
            [h, d] => h.parse::<f64>().ok().zip(d.parse::<f64>().ok()),
            _ => None,
        };
        match parsed {
            Some(s) => samples.push(s),
            None if k == 0 && samples.is_empty() => continue,
            None => {
                return Err(Failure::Data(format!(
                    "{}: line {}: expected `face_height_px,distance_m`",
                    path.display(),
                    k + 1
                )))
            }
        }
    }
    Ok(samples)
}

fn fit_cmd(a: FitArgs) -> CliResult {
    let samples = parse_samples(&a.csv)?;
    let cal = fit_distance_model(&samples, a.degree)?;
    let mut max_res: f64 = 0.0;
    outln!("{:>14} {:>12} {:>12} {:>12}", "face_height_px", "distance_m", "fitted", "residual");
    for &(h, d) in &samples {
        let fitted = poly_eval(&cal.coefficients, h);
        max_res = max_res.max((fitted - d).abs());
        outln!("{h:>14.4} {d:>12.6} {fitted:>12.6} {:>12.3e}", fitted - d);
    }
    outln!("max |residual| {max_res:.3e} over {} samples", samples.len());
    write(&a.out, cal.to_json() + "\n")?;
    outln!("wrote {}", a.out.display());
    Ok(())
}

fn dump_graph_cmd(config: RunConfig, a: DumpGraphArgs) -> CliResult {
    validated(&config)?;
    let (data, _) = config.effective();
    let cal_path = a.calibration.clone().unwrap_or_else(|| sibling(&a.clips, CALIBRATION_FILE));
    let cal = load_calibration(&cal_path)?;
    let clips = load_clips(&a.clips)?;
    let clip = match &a.clip_id {
        Some(id) => clips
            .iter()
            .find(|c| &c.clip_id == id)
            .ok_or_else(|| Failure::Data(format!("no clip `{id}` in {}", a.clips.display())))?,
        None => clips.first().ok_or_else(|| Failure::Data(format!("{} holds no clips", a.clips.display())))?,
    };
    let tensor = prepare_clip::<f64>(clip, &cal, &data)?;
    let graph = tensor
        .graphs
        .get(a.frame)
        .ok_or_else(|| usage(format!("frame {} out of range (clip has {} frames)", a.frame, tensor.frames())))?;
    let doc = serde_json::json!({
        "clip_id": clip.clip_id,
        "label": clip.label,
        "frame": a.frame,
        "graph": graph.to_json(),
    });
    outln!("{}", serde_json::to_string_pretty(&doc).expect("json"));
    Ok(())
}
