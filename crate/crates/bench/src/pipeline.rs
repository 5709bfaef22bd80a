//! The benchmark run: mix every scenario, run every algorithm, score, then
//! aggregate. Stages can also be run one at a time on files on disk.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use sebench_core::audio::{read_wav, write_wav, WavEncoding};
use sebench_core::enhancers::{build_enhancer, run_enhancer, Enhancer, EnhancerKind};
use sebench_core::metrics::{external_pesq, score, MetricReport, PesqCommand};
use sebench_core::mixer::{build_matrix, mix_with_ids, stable_hash, MixtureScenario};
use sebench_core::segan::{load_checkpoint, GanModel};
use sebench_core::AudioClip;
use serde::Serialize;

use crate::aggregate::AggregateSummary;
use crate::config::BenchConfig;
use crate::corpus::load_corpus;
use crate::report::{self, write_bytes};
use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Load,
    Mix,
    Enhance,
    Score,
    Pesq,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Load => "load",
            Stage::Mix => "mix",
            Stage::Enhance => "enhance",
            Stage::Score => "score",
            Stage::Pesq => "pesq",
        })
    }
}

/// A (scenario, algorithm) pair that produced no report, and why.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorEntry {
    pub clean_id: String,
    pub noise_id: String,
    pub snr_db: f64,
    pub algorithm: String,
    pub stage: Stage,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Timing {
    pub scenario: String,
    pub algorithm: String,
    pub runtime_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub scenarios: Vec<MixtureScenario>,
    pub reports: Vec<MetricReport>,
    pub errors: Vec<ErrorEntry>,
    pub timings: Vec<Timing>,
    pub summary: Option<AggregateSummary>,
}

/// Mixing seed of a scenario under a run seed.
pub fn run_scenario_seed(scenario_seed: u64, run_seed: u64) -> u64 {
    stable_hash(&[&scenario_seed.to_le_bytes(), &run_seed.to_le_bytes()])
}

struct Inputs {
    clean: BTreeMap<String, Result<AudioClip, String>>,
    noise: BTreeMap<String, Result<AudioClip, String>>,
    scenarios: Vec<MixtureScenario>,
}

fn load_inputs(cfg: &BenchConfig) -> Result<Inputs, BenchError> {
    let to_map = |entries: Vec<crate::corpus::CorpusEntry>| {
        entries
            .into_iter()
            .map(|e| (e.id, e.clip))
            .collect::<BTreeMap<_, _>>()
    };
    let clean = to_map(load_corpus(&cfg.clean_dir)?);
    let noise = to_map(load_corpus(&cfg.noise_dir)?);
    let clean_ids: Vec<String> = clean.keys().cloned().collect();
    let noise_ids: Vec<String> = noise.keys().cloned().collect();
    let mut matrix = build_matrix(&clean_ids, &noise_ids, &cfg.snr_levels_db)?;
    for s in &mut matrix.scenarios {
        s.seed = run_scenario_seed(s.seed, cfg.seed);
    }
    Ok(Inputs {
        clean,
        noise,
        scenarios: matrix.scenarios,
    })
}

fn entry(s: &MixtureScenario, algorithm: &str, stage: Stage, message: String) -> ErrorEntry {
    ErrorEntry {
        clean_id: s.clean_id.clone(),
        noise_id: s.noise_id.clone(),
        snr_db: s.snr_db,
        algorithm: algorithm.to_string(),
        stage,
        message,
    }
}

/// Clean clip and mixture of one scenario, with `noise_scale` filled in.
fn mix_one(
    inputs: &Inputs,
    s: &MixtureScenario,
    cfg: &BenchConfig,
) -> Result<(AudioClip, AudioClip, MixtureScenario), (Stage, String)> {
    let load = |map: &BTreeMap<String, Result<AudioClip, String>>, id: &str| {
        map[id]
            .clone()
            .map_err(|e| (Stage::Load, format!("{id}: {e}")))
    };
    let clean = load(&inputs.clean, &s.clean_id)?;
    let noise = load(&inputs.noise, &s.noise_id)?;
    let (noisy, mut done) = mix_with_ids(
        &clean,
        &noise,
        s.snr_db,
        s.seed,
        cfg.noise_offset,
        &s.clean_id,
        &s.noise_id,
    )
    .map_err(|e| (Stage::Mix, e.to_string()))?;
    done.seed = s.seed;
    Ok((clean, noisy, done))
}

/// One enhancer per configured algorithm; each SEGAN checkpoint is loaded once.
pub fn build_enhancers(cfg: &BenchConfig) -> Result<Vec<Box<dyn Enhancer>>, BenchError> {
    let mut models: HashMap<PathBuf, Arc<GanModel>> = HashMap::new();
    cfg.resolved_algorithms()
        .iter()
        .map(|alg| {
            let model = match (&alg.kind, &alg.segan.checkpoint) {
                (EnhancerKind::Segan, Some(path)) => Some(match models.get(path) {
                    Some(m) => m.clone(),
                    None => {
                        let m = Arc::new(load_checkpoint(path)?);
                        models.insert(path.clone(), m.clone());
                        m
                    }
                }),
                _ => None,
            };
            Ok(build_enhancer(alg, model)?)
        })
        .collect()
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, BenchError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| BenchError::Pool(e.to_string()))
}

/// Score one enhanced clip, including PESQ when configured. PESQ inputs are
/// written as 16-bit files under `scratch`.
fn score_one(
    s: &MixtureScenario,
    algorithm: &str,
    clean: &AudioClip,
    enhanced: &AudioClip,
    cfg: &BenchConfig,
    pesq: Option<&PesqCommand>,
    scratch: &Path,
) -> Result<MetricReport, ErrorEntry> {
    let scores = score(clean, enhanced, cfg.sdr_filter_len)
        .map_err(|e| entry(s, algorithm, Stage::Score, e.to_string()))?;
    let pesq_value = match pesq {
        None => None,
        Some(cmd) => {
            let fail = |m: String| entry(s, algorithm, Stage::Pesq, m);
            let stem = format!("{}__{algorithm}", s.key());
            let clean_path = scratch.join(format!("{stem}__clean.wav"));
            let enh_path = scratch.join(format!("{stem}__enhanced.wav"));
            write_wav(clean, &clean_path, WavEncoding::Pcm16).map_err(|e| fail(e.to_string()))?;
            write_wav(enhanced, &enh_path, WavEncoding::Pcm16).map_err(|e| fail(e.to_string()))?;
            let result = external_pesq(&clean_path, &enh_path, Some(cmd));
            let _ = fs::remove_file(&clean_path);
            let _ = fs::remove_file(&enh_path);
            result.map_err(|e| fail(e.to_string()))?
        }
    };
    Ok(MetricReport {
        clean_id: s.clean_id.clone(),
        noise_id: s.noise_id.clone(),
        snr_db: s.snr_db,
        algorithm: algorithm.to_string(),
        stoi: scores.stoi(),
        stoi_raw: scores.stoi_raw,
        sdr_db: scores.sdr_db,
        si_sdr_db: scores.si_sdr_db,
        pesq: pesq_value,
    })
}

fn make_scratch(cfg: &BenchConfig) -> Result<Option<PathBuf>, BenchError> {
    if cfg.pesq_command.is_none() {
        return Ok(None);
    }
    let dir = cfg.out_dir.join(".pesq-scratch");
    fs::create_dir_all(&dir).map_err(|e| BenchError::io(&dir, e))?;
    Ok(Some(dir))
}

struct JobOutput {
    scenario: MixtureScenario,
    mixed: bool,
    reports: Vec<MetricReport>,
    errors: Vec<ErrorEntry>,
    timings: Vec<Timing>,
}

/// Run every scenario × algorithm and write the report files into
/// `cfg.out_dir`. Everything except `timings.csv` is a deterministic
/// function of the config and the corpus, whatever the worker count.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<RunOutput, BenchError> {
    cfg.validate()?;
    let inputs = load_inputs(cfg)?;
    let enhancers = build_enhancers(cfg)?;
    let pesq = cfg.pesq();
    fs::create_dir_all(&cfg.out_dir).map_err(|e| BenchError::io(&cfg.out_dir, e))?;
    let scratch = make_scratch(cfg)?;

    let job = |s: &MixtureScenario| -> JobOutput {
        let mut out = JobOutput {
            scenario: s.clone(),
            mixed: false,
            reports: Vec::new(),
            errors: Vec::new(),
            timings: Vec::new(),
        };
        let (clean, noisy, mixed) = match mix_one(&inputs, s, cfg) {
            Ok(m) => m,
            Err((stage, msg)) => {
                out.errors = enhancers
                    .iter()
                    .map(|e| entry(s, e.name(), stage, msg.clone()))
                    .collect();
                return out;
            }
        };
        out.scenario = mixed;
        out.mixed = true;
        for enh in &enhancers {
            let name = enh.name();
            let result = run_enhancer(&noisy, enh.as_ref(), s.seed)
                .map_err(|e| entry(s, name, Stage::Enhance, e.to_string()))
                .and_then(|r| {
                    out.timings.push(Timing {
                        scenario: s.key(),
                        algorithm: name.to_string(),
                        runtime_seconds: r.runtime_seconds,
                    });
                    score_one(s, name, &clean, &r.enhanced, cfg, pesq.as_ref(), scratch.as_deref().unwrap_or(Path::new(".")))
                });
            match result {
                Ok(r) => out.reports.push(r),
                Err(e) => out.errors.push(e),
            }
        }
        out
    };
    // par_iter().collect() keeps matrix order, so the gathered output does
    // not depend on scheduling
    let jobs: Vec<JobOutput> =
        pool(cfg.worker_count)?.install(|| inputs.scenarios.par_iter().map(job).collect());
    if let Some(dir) = &scratch {
        let _ = fs::remove_dir(dir);
    }

    let mut out = RunOutput {
        scenarios: Vec::new(),
        reports: Vec::new(),
        errors: Vec::new(),
        timings: Vec::new(),
        summary: None,
    };
    for j in jobs {
        if j.mixed {
            out.scenarios.push(j.scenario);
        }
        out.reports.extend(j.reports);
        out.errors.extend(j.errors);
        out.timings.extend(j.timings);
    }

    let dir = &cfg.out_dir;
    write_bytes(&dir.join(report::SCENARIOS_JSONL), &report::scenarios_jsonl(&out.scenarios)?)?;
    write_bytes(&dir.join(report::REPORTS_CSV), &report::reports_csv(&out.reports)?)?;
    write_bytes(&dir.join(report::ERRORS_CSV), &report::errors_csv(&out.errors)?)?;
    write_bytes(&dir.join(report::TIMINGS_CSV), &report::timings_csv(&out.timings)?)?;
    if !out.reports.is_empty() {
        out.summary = Some(report::write_aggregates(dir, &out.reports)?);
    }
    Ok(out)
}

fn audio_path(cfg: &BenchConfig, kind: &str, key: &str) -> PathBuf {
    cfg.out_dir.join("audio").join(kind).join(format!("{key}.wav"))
}

fn enhanced_path(cfg: &BenchConfig, algorithm: &str, key: &str) -> PathBuf {
    cfg.out_dir
        .join("audio")
        .join("enhanced")
        .join(algorithm)
        .join(format!("{key}.wav"))
}

fn write_float_wav(clip: &AudioClip, path: &Path) -> Result<(), BenchError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    }
    Ok(write_wav(clip, path, WavEncoding::Float32)?)
}

fn algorithm_names(cfg: &BenchConfig) -> Vec<String> {
    cfg.algorithms.iter().map(|a| a.name()).collect()
}

/// Mix stage: `scenarios.jsonl` plus float32 `audio/clean/{key}.wav` and
/// `audio/noisy/{key}.wav`. Failed scenarios go to `errors_mix.csv`.
pub fn stage_mix(cfg: &BenchConfig) -> Result<Vec<MixtureScenario>, BenchError> {
    cfg.validate()?;
    let inputs = load_inputs(cfg)?;
    let names = algorithm_names(cfg);
    let results: Vec<Result<MixtureScenario, Vec<ErrorEntry>>> = pool(cfg.worker_count)?.install(|| {
        inputs
            .scenarios
            .par_iter()
            .map(|s| {
                let fail = |stage: Stage, msg: String| {
                    names.iter().map(|n| entry(s, n, stage, msg.clone())).collect::<Vec<_>>()
                };
                let (clean, noisy, mixed) = mix_one(&inputs, s, cfg).map_err(|(st, m)| fail(st, m))?;
                let key = s.key();
                write_float_wav(&clean, &audio_path(cfg, "clean", &key))
                    .and_then(|_| write_float_wav(&noisy, &audio_path(cfg, "noisy", &key)))
                    .map_err(|e| fail(Stage::Mix, e.to_string()))?;
                Ok(mixed)
            })
            .collect()
    });
    let mut scenarios = Vec::new();
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(s) => scenarios.push(s),
            Err(e) => errors.extend(e),
        }
    }
    write_bytes(&cfg.out_dir.join(report::SCENARIOS_JSONL), &report::scenarios_jsonl(&scenarios)?)?;
    write_bytes(&cfg.out_dir.join("errors_mix.csv"), &report::errors_csv(&errors)?)?;
    Ok(scenarios)
}

/// Enhance stage: reads the mix stage output and writes
/// `audio/enhanced/{algorithm}/{key}.wav` for every configured algorithm.
pub fn stage_enhance(cfg: &BenchConfig) -> Result<Vec<ErrorEntry>, BenchError> {
    cfg.validate()?;
    let scenarios = report::read_scenarios(&cfg.out_dir.join(report::SCENARIOS_JSONL))?;
    let enhancers = build_enhancers(cfg)?;
    let results: Vec<(Vec<ErrorEntry>, Vec<Timing>)> = pool(cfg.worker_count)?.install(|| {
        scenarios
            .par_iter()
            .map(|s| {
                let key = s.key();
                let mut errors = Vec::new();
                let mut timings = Vec::new();
                let noisy = match read_wav(audio_path(cfg, "noisy", &key)) {
                    Ok(c) => c,
                    Err(e) => {
                        let msg = e.to_string();
                        return (
                            enhancers.iter().map(|h| entry(s, h.name(), Stage::Load, msg.clone())).collect(),
                            timings,
                        );
                    }
                };
                for enh in &enhancers {
                    let result = run_enhancer(&noisy, enh.as_ref(), s.seed)
                        .map_err(BenchError::from)
                        .and_then(|r| {
                            timings.push(Timing {
                                scenario: key.clone(),
                                algorithm: enh.name().to_string(),
                                runtime_seconds: r.runtime_seconds,
                            });
                            write_float_wav(&r.enhanced, &enhanced_path(cfg, enh.name(), &key))
                        });
                    if let Err(e) = result {
                        errors.push(entry(s, enh.name(), Stage::Enhance, e.to_string()));
                    }
                }
                (errors, timings)
            })
            .collect()
    });
    let (errors, timings): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let errors: Vec<ErrorEntry> = errors.into_iter().flatten().collect();
    let timings: Vec<Timing> = timings.into_iter().flatten().collect();
    write_bytes(&cfg.out_dir.join("errors_enhance.csv"), &report::errors_csv(&errors)?)?;
    write_bytes(&cfg.out_dir.join(report::TIMINGS_CSV), &report::timings_csv(&timings)?)?;
    Ok(errors)
}

/// Score stage: reads clean and enhanced audio, writes `reports.csv` and
/// `errors_score.csv`.
pub fn stage_score(cfg: &BenchConfig) -> Result<Vec<MetricReport>, BenchError> {
    cfg.validate()?;
    let scenarios = report::read_scenarios(&cfg.out_dir.join(report::SCENARIOS_JSONL))?;
    let names = algorithm_names(cfg);
    let pesq = cfg.pesq();
    let scratch = make_scratch(cfg)?;
    let results: Vec<Vec<Result<MetricReport, ErrorEntry>>> = pool(cfg.worker_count)?.install(|| {
        scenarios
            .par_iter()
            .map(|s| {
                let key = s.key();
                let clean = read_wav(audio_path(cfg, "clean", &key));
                names
                    .iter()
                    .map(|name| {
                        let clean = clean
                            .as_ref()
                            .map_err(|e| entry(s, name, Stage::Load, e.to_string()))?;
                        let enhanced = read_wav(enhanced_path(cfg, name, &key))
                            .map_err(|e| entry(s, name, Stage::Load, e.to_string()))?;
                        score_one(s, name, clean, &enhanced, cfg, pesq.as_ref(), scratch.as_deref().unwrap_or(Path::new(".")))
                    })
                    .collect()
            })
            .collect()
    });
    if let Some(dir) = &scratch {
        let _ = fs::remove_dir(dir);
    }
    let mut reports = Vec::new();
    let mut errors = Vec::new();
    for r in results.into_iter().flatten() {
        match r {
            Ok(r) => reports.push(r),
            Err(e) => errors.push(e),
        }
    }
    report::write_reports(&cfg.out_dir.join(report::REPORTS_CSV), &reports)?;
    write_bytes(&cfg.out_dir.join("errors_score.csv"), &report::errors_csv(&errors)?)?;
    Ok(reports)
}
