use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::config::{InitialKind, RunConfig, TrajectoryFormat};
use super::io::{
    file_sha256, fmt_f64, load_dataset, parse_f64, parse_table, render_table, trajectory_to_binary,
    trajectory_to_csv, write_file, CommentHeader, DatasetManifest, ManifestFile,
};
use super::HarnessError;
use crate::esn::persist::{read_model, write_model};
use crate::esn::{EsnModel, MemberOutcome};
use crate::experiments::runner::{run_members, synchronized_members};
use crate::experiments::{
    count_status, detect_laminarization, early_warning_scan, fit_exponential_mle, initial_condition, ks_statistic,
    laminarization_probability_curve, lifetime_experiment, prefix_at, reference_probability, relative_error,
    spread_times, uncensored, ExponentialFit, LaminarizationCurve, LaminarizationDetector, LifetimeSample,
    LifetimeSource, LifetimeStatus, PlamSource, Source, SurvivalCurve, TransitionProbabilityEstimate,
};
use crate::mfe::{integrate, Amplitudes, DomainGeometry, Trajectory};
use crate::rng::{stream, StreamKind};
use crate::stats::{kendall_tau, spearman};

/// Files a command wrote and what it has to say about them.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

fn header(cfg: &RunConfig, command: &str) -> CommentHeader {
    CommentHeader::new()
        .with("command", command)
        .with("config_hash", cfg.hash())
        .with("seed", cfg.seed)
        .with("re", cfg.flow.re)
}

fn write_text(path: PathBuf, text: &str, files: &mut Vec<PathBuf>) -> Result<(), HarnessError> {
    write_file(&path, text.as_bytes())?;
    files.push(path);
    Ok(())
}

pub fn load_model(path: &Path) -> Result<(EsnModel, BTreeMap<String, String>), HarnessError> {
    let mut f = fs::File::open(path).map_err(|e| HarnessError::Input(format!("{}: {e}", path.display())))?;
    Ok(read_model(&mut f)?)
}

/// Teacher-forced one-step error on `states`, normalized by their spread:
/// `sqrt(Σ‖ã − a‖² / Σ‖a − ā‖²)`. The first `n_sync` steps warm the reservoir
/// up and are not scored.
pub fn one_step_nrmse(model: &EsnModel, states: &[Amplitudes], seed: u64) -> Result<f64, HarnessError> {
    let washout = model.hyperparameters().n_sync;
    if states.len() < washout + 2 {
        return Err(HarnessError::Config(format!(
            "held-out segment of {} samples is too short",
            states.len()
        )));
    }
    let mut rng = stream(seed, StreamKind::SyncNoise, u64::from(u32::MAX));
    let zero = crate::esn::ReservoirState::zeros(model.n_reservoir());
    let rs = model.drive(&states[..states.len() - 1], &zero, &mut rng)?;
    let targets = &states[washout..];
    let n = targets.len() as f64;
    let mut mean = Amplitudes::zeros();
    for a in targets {
        mean = mean.add(&a.scaled(1.0 / n));
    }
    let (mut err, mut spread) = (0.0, 0.0);
    for (k, a) in targets.iter().enumerate() {
        let pred = model.read(&rs[washout - 1 + k].0)?;
        err += pred.add(&a.scaled(-1.0)).norm_squared();
        spread += a.add(&mean.scaled(-1.0)).norm_squared();
    }
    Ok((err / spread).sqrt())
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<CommandOutput, HarnessError> {
    let sys = cfg.system()?;
    let i = &cfg.integration;
    let a0 = match i.initial {
        InitialKind::Laminar => Amplitudes::laminar(),
        InitialKind::Random => initial_condition(&sys, cfg.ic_energy()?, cfg.seed, 0)?,
    };
    let traj = integrate(&sys, a0, i.dt, i.duration, i.sample_every)?;

    let hdr = header(cfg, "simulate")
        .with("dt", fmt_f64(i.dt))
        .with("dt_sample", fmt_f64(traj.dt_sample))
        .with("initial", format!("{:?}", i.initial).to_lowercase());
    let (name, bytes) = match i.format {
        TrajectoryFormat::Csv => ("trajectory.csv", trajectory_to_csv(&traj, &hdr).into_bytes()),
        TrajectoryFormat::Binary => ("trajectory.bin", trajectory_to_binary(&traj, cfg.flow.re, cfg.seed)),
    };
    let path = cfg.out.join(name);
    write_file(&path, &bytes)?;
    let manifest = DatasetManifest {
        re: cfg.flow.re,
        dt_sample: traj.dt_sample,
        count: traj.len(),
        seed: cfg.seed,
        config_hash: cfg.hash(),
        files: vec![ManifestFile {
            path: name.into(),
            sha256: file_sha256(&path)?,
        }],
    };
    let mpath = DatasetManifest::manifest_path(&path);
    manifest.write(&mpath)?;

    let geom = sys.geometry();
    let e = traj.energies(geom);
    let (lo, hi) = e.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
    let lam = detect_laminarization(&e, traj.t0, traj.dt_sample, cfg.detector())?;
    let mut summary = String::new();
    let _ = writeln!(summary, "simulated {} samples at Re = {} (dt_sample {})", traj.len(), cfg.flow.re, traj.dt_sample);
    let _ = writeln!(summary, "energy range [{lo:.4}, {hi:.4}], final {:.4}", e[e.len() - 1]);
    match lam.time() {
        Some(t) => {
            let _ = writeln!(summary, "laminarized at T = {t}");
        }
        None => {
            let _ = writeln!(summary, "no laminarization detected");
        }
    }
    Ok(CommandOutput {
        files: vec![path, mpath],
        summary,
    })
}

pub fn cmd_train(cfg: &RunConfig, dataset: &Path) -> Result<CommandOutput, HarnessError> {
    let started = Instant::now();
    let traj = load_dataset(dataset)?;
    let tr = &cfg.training;
    let window = traj.window(tr.t_start, tr.t_end).ok_or_else(|| {
        HarnessError::Config(format!(
            "training window [{}, {}] is not inside the dataset [{}, {}]",
            tr.t_start,
            tr.t_end,
            traj.t0,
            traj.end_time()
        ))
    })?;
    let geom = cfg.geometry()?;
    let check = detect_laminarization(&window.energies(&geom), window.t0, window.dt_sample, cfg.detector())?;
    if let (Some(t), false) = (check.time(), tr.allow_laminar) {
        return Err(HarnessError::TrainingWindow(format!(
            "laminarization detected at t = {t}; set training.allow_laminar = true to train anyway"
        )));
    }

    let mut model = EsnModel::new(cfg.hyperparameters())?;
    let mut noise = stream(cfg.seed, StreamKind::TrainingNoise, 0);
    let report = model.train(&window, &mut noise)?;

    // held-out data right after the window, when there is any
    let end = traj.index_of(tr.t_end).expect("window checked above");
    let held_out = &traj.states[end + 1..traj.len().min(end + 1 + 2000)];
    let nrmse = if held_out.len() >= model.hyperparameters().n_sync + 2 {
        Some(one_step_nrmse(&model, held_out, cfg.seed)?)
    } else {
        None
    };

    let mut info = BTreeMap::new();
    info.insert("re".to_string(), cfg.flow.re.to_string());
    info.insert("config_hash".to_string(), cfg.hash());
    info.insert("dataset_sha256".to_string(), file_sha256(dataset)?);
    info.insert("training_start".to_string(), fmt_f64(window.t0));
    info.insert("training_end".to_string(), fmt_f64(window.end_time()));
    info.insert("turbulence_only".to_string(), check.time().is_none().to_string());
    let mut bytes = Vec::new();
    write_model(&mut bytes, &model, &info)?;
    let mut files = Vec::new();
    let path = cfg.out.join("model.esn");
    write_file(&path, &bytes)?;
    files.push(path);

    let mut text = String::new();
    let _ = writeln!(text, "training samples      {}", report.n_samples);
    let _ = writeln!(text, "window                [{}, {}]", window.t0, window.end_time());
    let _ = writeln!(text, "turbulence only       {}", check.time().is_none());
    let _ = writeln!(text, "residual              {:.6e}", report.residual);
    let _ = writeln!(text, "relative residual     {:.6e}", report.residual / report.target_norm_sq);
    let _ = writeln!(text, "R diagonal ratio      {:.3e}", report.diagonal_ratio);
    match nrmse {
        Some(v) => {
            let _ = writeln!(text, "held-out 1-step NRMSE {v:.4e} ({} samples)", held_out.len());
        }
        None => {
            let _ = writeln!(text, "held-out 1-step NRMSE n/a (no data after the window)");
        }
    }
    for w in &report.warnings {
        let _ = writeln!(text, "warning: {w}");
    }
    let _ = writeln!(text, "elapsed               {:.2} s", started.elapsed().as_secs_f64());
    write_text(cfg.out.join("training_report.txt"), &text, &mut files)?;
    Ok(CommandOutput { files, summary: text })
}

pub fn cmd_predict(cfg: &RunConfig, model_path: &Path, dataset: &Path) -> Result<CommandOutput, HarnessError> {
    let (model, _) = load_model(model_path)?;
    let traj = load_dataset(dataset)?;
    let geom = cfg.geometry()?;
    let n_sync = model.hyperparameters().n_sync;
    let t_start = cfg.predict.t_start;
    let prefix = prefix_at(&traj, t_start, n_sync)?;
    let mut sync = stream(cfg.seed, StreamKind::SyncNoise, 0);
    let r0 = model.synchronize(prefix, &mut sync)?;
    let mut noise = stream(cfg.seed, StreamKind::PredictionNoise, 0);
    let a0 = prefix[prefix.len() - 1];
    let mut pred = model.predict(&r0, &a0, cfg.predict.horizon, &mut noise, cfg.prediction_noise)?;
    pred.t0 = t_start;

    let hdr = header(cfg, "predict")
        .with("model_sha256", file_sha256(model_path)?)
        .with("t_start", t_start)
        .with("horizon", cfg.predict.horizon)
        .with("prediction_noise", cfg.prediction_noise);
    let mut files = Vec::new();
    write_text(cfg.out.join("prediction.csv"), &trajectory_to_csv(&pred, &hdr), &mut files)?;
    let e = pred.energies(&geom);
    let rows: Vec<Vec<String>> = e
        .iter()
        .enumerate()
        .map(|(i, v)| vec![fmt_f64(pred.time(i)), fmt_f64(*v)])
        .collect();
    write_text(cfg.out.join("prediction_energy.csv"), &render_table(&hdr, &["t", "E"], &rows), &mut files)?;

    let lam = detect_laminarization(&e, pred.t0, pred.dt_sample, cfg.detector())?;
    let tail = &e[e.len().saturating_sub(2000)..];
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let sd = (tail.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / tail.len() as f64).sqrt();
    let mut summary = String::new();
    let _ = writeln!(summary, "predicted {} steps from t = {t_start}", cfg.predict.horizon);
    let _ = writeln!(summary, "final-{} energy mean {mean:.4}, std {sd:.4}", tail.len());
    let _ = match lam.time() {
        Some(t) => writeln!(summary, "laminarized at T = {t}"),
        None => writeln!(summary, "no laminarization detected"),
    };
    Ok(CommandOutput { files, summary })
}

fn lifetime_rows(samples: &[LifetimeSample]) -> Vec<Vec<String>> {
    samples
        .iter()
        .map(|s| vec![s.ic.to_string(), fmt_f64(s.lifetime), s.status.as_str().to_string()])
        .collect()
}

fn survival_rows(curve: &SurvivalCurve) -> Vec<Vec<String>> {
    curve
        .points()
        .into_iter()
        .map(|(t, s)| vec![fmt_f64(t), fmt_f64(s)])
        .collect()
}

fn fit_row(re: f64, fit: &ExponentialFit, rel: Option<f64>) -> Vec<String> {
    vec![
        re.to_string(),
        fmt_f64(fit.t0),
        fmt_f64(fit.tau),
        fit.n_samples.to_string(),
        rel.map(fmt_f64).unwrap_or_default(),
    ]
}

const FIT_COLUMNS: [&str; 5] = ["re", "t0", "tau", "n", "relative_error"];

pub fn cmd_lifetime(cfg: &RunConfig, model_path: Option<&Path>) -> Result<CommandOutput, HarnessError> {
    let sys = cfg.system()?;
    let params = cfg.lifetime_params()?;
    let model = if cfg.lifetime.source.esn() {
        let p = model_path.ok_or_else(|| HarnessError::Config("the esn source needs --model".into()))?;
        Some(load_model(p)?.0)
    } else {
        None
    };

    let mut runs: Vec<(Source, Vec<LifetimeSample>)> = Vec::new();
    if cfg.lifetime.source.truth() {
        runs.push((Source::Truth, lifetime_experiment(LifetimeSource::Truth(&sys), &params, cfg.seed)?));
    }
    if let Some(model) = &model {
        let src = LifetimeSource::Esn { model, system: &sys };
        runs.push((Source::Esn, lifetime_experiment(src, &params, cfg.seed)?));
    }

    let base = header(cfg, "lifetime")
        .with("n_ic", params.n_ic)
        .with("ic_energy", fmt_f64(params.ic_energy))
        .with("t_max", params.t_max)
        .with("threshold", params.detector.threshold)
        .with("window", params.detector.window)
        .with("prediction_noise", params.noise_enabled);
    let mut files = Vec::new();
    let mut summary = String::new();
    let mut fits = Vec::new();
    let mut failure = None;
    for (src, samples) in &runs {
        let hdr = base.clone().with("source", src.as_str());
        let name = src.as_str();
        write_text(
            cfg.out.join(format!("lifetimes_{name}.csv")),
            &render_table(&hdr, &["ic", "lifetime", "status"], &lifetime_rows(samples)),
            &mut files,
        )?;
        let n_cens = count_status(samples, LifetimeStatus::Censored);
        let n_div = count_status(samples, LifetimeStatus::Diverged);
        let _ = writeln!(
            summary,
            "{name}: {} samples, {n_cens} censored at t_max, {n_div} diverged",
            samples.len()
        );
        let curve = match SurvivalCurve::from_samples(samples) {
            Ok(c) => c,
            Err(e) => {
                failure.get_or_insert(e);
                continue;
            }
        };
        write_text(
            cfg.out.join(format!("survival_{name}.csv")),
            &render_table(&hdr, &["t", "S"], &survival_rows(&curve)),
            &mut files,
        )?;
        let lifetimes = uncensored(samples);
        match fit_exponential_mle(&lifetimes) {
            Ok(fit) => {
                let ks = ks_statistic(&lifetimes, &fit);
                let _ = writeln!(summary, "{name}: t0 = {:.1}, tau = {:.1}, KS = {ks:.4}", fit.t0, fit.tau);
                fits.push((*src, fit));
            }
            Err(e) => {
                failure.get_or_insert(e);
            }
        }
    }

    let truth_tau = fits.iter().find(|(s, _)| *s == Source::Truth).map(|(_, f)| f.tau);
    let rows: Vec<Vec<String>> = fits
        .iter()
        .map(|(s, f)| {
            let rel = match (s, truth_tau) {
                (Source::Esn, Some(t)) => Some(relative_error(f.tau, t)),
                _ => None,
            };
            if let Some(r) = rel {
                let _ = writeln!(summary, "relative error in tau: {r:.4}");
            }
            fit_row(cfg.flow.re, f, rel)
        })
        .collect();
    if !rows.is_empty() {
        write_text(cfg.out.join("fits.csv"), &render_table(&base, &FIT_COLUMNS, &rows), &mut files)?;
    }
    write_text(cfg.out.join("lifetime_summary.txt"), &summary, &mut files)?;
    match failure {
        Some(e) => Err(e.into()),
        None => Ok(CommandOutput { files, summary }),
    }
}

const PROBABILITY_COLUMNS: [&str; 5] = ["t_j", "p", "n_laminarized", "n_ensemble", "n_diverged"];

fn probability_rows(estimates: &[TransitionProbabilityEstimate]) -> Vec<Vec<String>> {
    estimates
        .iter()
        .map(|e| {
            vec![
                e.t_start.to_string(),
                fmt_f64(e.p),
                e.n_laminarized.to_string(),
                e.n_ensemble.to_string(),
                e.n_diverged.to_string(),
            ]
        })
        .collect()
}

pub fn cmd_earlywarn(cfg: &RunConfig, model_path: &Path, dataset: &Path) -> Result<CommandOutput, HarnessError> {
    let ew = &cfg.earlywarn;
    if ew.times.is_empty() {
        return Err(HarnessError::Config("earlywarn.times is empty".into()));
    }
    if ew.n_reference > 0 && !(ew.reference_end > ew.reference_start) {
        return Err(HarnessError::Config(
            "set earlywarn.reference_start < reference_end, or n_reference = 0".into(),
        ));
    }
    let (model, _) = load_model(model_path)?;
    let traj = load_dataset(dataset)?;
    let geom = cfg.geometry()?;
    let params = cfg.ensemble_params();

    let scan = early_warning_scan(&model, &geom, &traj, &ew.times, &params, cfg.seed)?;
    let hdr = header(cfg, "earlywarn")
        .with("model_sha256", file_sha256(model_path)?)
        .with("n_ensemble", params.n_ensemble)
        .with("horizon", params.horizon)
        .with("threshold", params.detector.threshold)
        .with("window", params.detector.window);
    let mut files = Vec::new();
    write_text(
        cfg.out.join("earlywarn.csv"),
        &render_table(&hdr, &PROBABILITY_COLUMNS, &probability_rows(&scan)),
        &mut files,
    )?;
    let mut summary = String::new();
    for e in &scan {
        let _ = writeln!(summary, "t = {:>8}: p = {:.3} ({} of {}, {} diverged)", e.t_start, e.p, e.n_laminarized, e.n_ensemble, e.n_diverged);
    }
    if scan.len() > 1 {
        let t: Vec<f64> = scan.iter().map(|e| e.t_start).collect();
        let p: Vec<f64> = scan.iter().map(|e| e.p).collect();
        let _ = writeln!(summary, "Spearman correlation with time: {:.3}", spearman(&t, &p));
    }

    if ew.n_reference > 0 {
        let times = spread_times(&traj, ew.reference_start, ew.reference_end, ew.n_reference);
        let n_sync = model.hyperparameters().n_sync;
        let prefixes = times
            .iter()
            .map(|&t| prefix_at(&traj, t, n_sync).map(|p| (p, t)))
            .collect::<Result<Vec<_>, _>>()?;
        let reference = reference_probability(&model, &geom, &prefixes, &params, cfg.seed)?;
        let hdr = hdr
            .with("reference_start", ew.reference_start)
            .with("reference_end", ew.reference_end)
            .with("p_ref", fmt_f64(reference.p_ref));
        write_text(
            cfg.out.join("reference.csv"),
            &render_table(&hdr, &PROBABILITY_COLUMNS, &probability_rows(&reference.estimates)),
            &mut files,
        )?;
        let _ = writeln!(summary, "P_ref = {:.4} over {} test states", reference.p_ref, reference.estimates.len());
    }
    write_text(cfg.out.join("earlywarn_summary.txt"), &summary, &mut files)?;
    Ok(CommandOutput { files, summary })
}

fn plam_rows(curve: &LaminarizationCurve) -> Vec<Vec<String>> {
    (0..curve.energies.len())
        .map(|j| {
            vec![
                fmt_f64(curve.energies[j]),
                fmt_f64(curve.p_lam[j]),
                curve.n_pert.to_string(),
                curve.n_diverged[j].to_string(),
            ]
        })
        .collect()
}

pub fn cmd_plam(cfg: &RunConfig, model_path: Option<&Path>) -> Result<CommandOutput, HarnessError> {
    let sys = cfg.system()?;
    let params = cfg.plam_params();
    let hdr = header(cfg, "plam")
        .with("n_pert", params.n_pert)
        .with("horizon", params.horizon)
        .with("turb_threshold", params.turb_threshold);
    let mut curves = Vec::new();
    if cfg.plam.source.truth() {
        curves.push((Source::Truth, laminarization_probability_curve(PlamSource::Truth(&sys), &params, cfg.seed)?));
    }
    if cfg.plam.source.esn() {
        let p = model_path.ok_or_else(|| HarnessError::Config("the esn source needs --model".into()))?;
        let (model, _) = load_model(p)?;
        let src = PlamSource::Esn { model: &model, system: &sys };
        curves.push((Source::Esn, laminarization_probability_curve(src, &params, cfg.seed)?));
    }
    let mut files = Vec::new();
    let mut summary = String::new();
    for (src, curve) in &curves {
        let h = hdr.clone().with("source", src.as_str());
        write_text(
            cfg.out.join(format!("plam_{}.csv", src.as_str())),
            &render_table(&h, &["E", "p_lam", "n_pert", "n_diverged"], &plam_rows(curve)),
            &mut files,
        )?;
        let tau = kendall_tau(&curve.energies, &curve.p_lam);
        let _ = writeln!(
            summary,
            "{}: P_lam from {:.2} at E = {:.1e} to {:.2} at E = {:.1e}, Kendall tau {tau:.3}",
            src.as_str(),
            curve.p_lam[0],
            curve.energies[0],
            curve.p_lam[curve.p_lam.len() - 1],
            curve.energies[curve.energies.len() - 1]
        );
    }
    write_text(cfg.out.join("plam_summary.txt"), &summary, &mut files)?;
    Ok(CommandOutput { files, summary })
}

#[derive(Debug, Clone)]
struct PlateauTrack {
    det: LaminarizationDetector,
    threshold: f64,
    above: bool,
    exits: usize,
}

/// Laminarization counts of free runs started inside one training window.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub t_start: f64,
    pub t_end: f64,
    pub turbulence_only: bool,
    pub n_runs: usize,
    pub n_laminarized: usize,
    /// Laminarized and never dropped back below the threshold.
    pub n_stable: usize,
    /// Laminarized, then left the plateau at least once.
    pub n_exits: usize,
    pub n_diverged: usize,
}

fn ablate_window(
    cfg: &RunConfig,
    traj: &Trajectory,
    geom: &DomainGeometry,
    index: usize,
    [a, b]: [f64; 2],
) -> Result<AblationRow, HarnessError> {
    let window = traj
        .window(a, b)
        .ok_or_else(|| HarnessError::Config(format!("ablation window [{a}, {b}] is outside the dataset")))?;
    let detector = cfg.detector();
    let turbulence_only = detect_laminarization(&window.energies(geom), window.t0, window.dt_sample, detector)?
        .time()
        .is_none();
    let mut model = EsnModel::new(cfg.hyperparameters())?;
    let mut noise = stream(cfg.seed, StreamKind::TrainingNoise, index as u64);
    model.train(&window, &mut noise)?;

    let n_sync = model.hyperparameters().n_sync;
    let earliest = window.time(n_sync.saturating_sub(1).min(window.len() - 1));
    let times = spread_times(traj, earliest.max(a), b, cfg.ablate.n_runs);
    let histories = times
        .iter()
        .map(|&t| prefix_at(traj, t, n_sync))
        .collect::<Result<Vec<_>, _>>()?;
    let units: Vec<u64> = (0..histories.len() as u64).map(|k| ((index as u64) << 24) | k).collect();
    let members = synchronized_members(&model, &histories, cfg.seed, &units)?;
    let track = PlateauTrack {
        det: LaminarizationDetector::new(detector, model.hyperparameters().dt_model)?,
        threshold: detector.threshold,
        above: true,
        exits: 0,
    };
    let results = run_members(
        &model,
        members,
        vec![track; histories.len()],
        cfg.ablate.steps,
        cfg.prediction_noise,
        |t, _, a| {
            let e = crate::mfe::kinetic_energy(a, geom);
            if t.det.hit().is_some() {
                if t.above && e <= t.threshold {
                    t.exits += 1;
                }
                t.above = e > t.threshold;
            } else {
                t.det.push(e);
            }
            ControlFlow::Continue(())
        },
    )?;

    let mut row = AblationRow {
        t_start: a,
        t_end: b,
        turbulence_only,
        n_runs: results.len(),
        n_laminarized: 0,
        n_stable: 0,
        n_exits: 0,
        n_diverged: 0,
    };
    for (outcome, t) in &results {
        if matches!(outcome, MemberOutcome::Diverged { .. }) {
            row.n_diverged += 1;
        } else if t.det.hit().is_some() {
            row.n_laminarized += 1;
            if t.exits == 0 {
                row.n_stable += 1;
            } else {
                row.n_exits += 1;
            }
        }
    }
    Ok(row)
}

pub fn cmd_ablate(cfg: &RunConfig, dataset: &Path) -> Result<CommandOutput, HarnessError> {
    if cfg.ablate.windows.is_empty() {
        return Err(HarnessError::Config("ablate.windows is empty".into()));
    }
    let traj = load_dataset(dataset)?;
    let geom = cfg.geometry()?;
    let rows = cfg
        .ablate
        .windows
        .iter()
        .enumerate()
        .map(|(i, w)| ablate_window(cfg, &traj, &geom, i, *w))
        .collect::<Result<Vec<_>, _>>()?;

    let hdr = header(cfg, "ablate")
        .with("n_runs", cfg.ablate.n_runs)
        .with("steps", cfg.ablate.steps)
        .with("prediction_noise", cfg.prediction_noise);
    let columns = [
        "window",
        "t_start",
        "t_end",
        "turbulence_only",
        "n_runs",
        "n_laminarized",
        "n_stable_plateau",
        "n_plateau_exits",
        "n_diverged",
    ];
    let mut summary = String::new();
    let table: Vec<Vec<String>> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let _ = writeln!(
                summary,
                "window {i} [{}, {}]: {}/{} laminarized, {} stable, {} with plateau exits, {} diverged",
                r.t_start, r.t_end, r.n_laminarized, r.n_runs, r.n_stable, r.n_exits, r.n_diverged
            );
            vec![
                i.to_string(),
                r.t_start.to_string(),
                r.t_end.to_string(),
                r.turbulence_only.to_string(),
                r.n_runs.to_string(),
                r.n_laminarized.to_string(),
                r.n_stable.to_string(),
                r.n_exits.to_string(),
                r.n_diverged.to_string(),
            ]
        })
        .collect();
    let mut files = Vec::new();
    write_text(cfg.out.join("ablate.csv"), &render_table(&hdr, &columns, &table), &mut files)?;
    write_text(cfg.out.join("ablate_summary.txt"), &summary, &mut files)?;
    Ok(CommandOutput { files, summary })
}

/// Fits the shifted exponential to a lifetime table: either the
/// `ic,lifetime,status` files written by `lifetime` (only laminarized rows
/// count) or any table with a `lifetime` column.
pub fn cmd_fit(cfg: &RunConfig, lifetimes: &Path) -> Result<CommandOutput, HarnessError> {
    let text = fs::read_to_string(lifetimes).map_err(|e| HarnessError::Input(format!("{}: {e}", lifetimes.display())))?;
    let table = parse_table(&text)?;
    let col = |name: &str| table.columns.iter().position(|c| c == name);
    let lt = col("lifetime").ok_or_else(|| HarnessError::Format("no lifetime column".into()))?;
    let status = col("status");
    let mut values = Vec::new();
    for row in &table.rows {
        let keep = match status {
            Some(s) => row[s].parse::<LifetimeStatus>()? == LifetimeStatus::Laminarized,
            None => true,
        };
        if keep {
            values.push(parse_f64(&row[lt])?);
        }
    }
    let re = match table.header.get("re") {
        Some(v) => parse_f64(v)?,
        None => cfg.flow.re,
    };
    let fit = fit_exponential_mle(&values)?;
    let ks = ks_statistic(&values, &fit);
    let hdr = header(cfg, "fit")
        .with("input_sha256", file_sha256(lifetimes)?)
        .with("ks", fmt_f64(ks));
    let mut files = Vec::new();
    write_text(
        cfg.out.join("fits.csv"),
        &render_table(&hdr, &FIT_COLUMNS, &[fit_row(re, &fit, None)]),
        &mut files,
    )?;
    let summary = format!(
        "Re = {re}: t0 = {:.2}, tau = {:.2} from {} lifetimes, KS = {ks:.4}\n",
        fit.t0, fit.tau, fit.n_samples
    );
    Ok(CommandOutput { files, summary })
}
