//! The `fit`, `compare`, `cluster` and `synth` commands.
//!
//! Analysis units run in parallel and are collected in config order; every
//! file is written afterwards from the calling thread.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use log::{info, warn};
use ndarray::Axis;
use rayon::prelude::*;
use serde::Serialize;
use xssd_core::embedding::remove_first_component_jointly;
use xssd_core::inference::{histogram, observed_rho, HISTOGRAM_BINS};
use xssd_core::seed::derive;
use xssd_core::{
    alignment_test, bootstrap_interval, closed_form_pls1, cluster_pole, difference_gradient,
    difference_test, fit_gradient, fit_pls_gradient, load_embeddings, load_lexicon, select_k,
    select_pole_candidates, EmbeddingSpace, Gradient, JoinedSample, NormLexicon, Pole,
    Preprocessing, SynthSpec,
};

use crate::config::{ClusterGradient, LanguageConfig, Parameters, PreprocessingConfig, RunConfig};
use crate::error::{CliError, Result, EXIT_OK, EXIT_VALIDATION};
use crate::records::{
    BootstrapSummary, ClusterRecord, CompareRecord, FitRecord, Manifest, PairDiagnostics,
    PermutationSummary, UnitEntry, UnitStatus, Verdict,
};
use crate::render;

/// Command-line overrides applied on top of a loaded config.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// What a command did: its exit status and the manifest it wrote.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub exit_code: i32,
    pub manifest: Manifest,
    pub output: PathBuf,
}

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let mut config = RunConfig::load(path)?;
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    if let Some(out) = &overrides.out {
        config.output = out.clone();
    }
    Ok(config)
}

struct Language {
    config: LanguageConfig,
    space: EmbeddingSpace,
    lexicon: NormLexicon,
}

/// Loads and preprocesses every configured language.
fn load_languages(config: &RunConfig) -> Result<Vec<Language>> {
    let pre = &config.preprocessing;
    let loaded: Vec<(EmbeddingSpace, NormLexicon)> = config
        .languages
        .par_iter()
        .map(|lang| -> Result<_> {
            let space = load_embeddings(&lang.embeddings, &lang.name, lang.max_vocab)?;
            let lexicon = load_lexicon(&lang.lexicon, &lang.name)?;
            info!(
                "{}: {} vectors of dimension {}, {} lexicon entries",
                lang.name,
                space.len(),
                space.dim(),
                lexicon.len()
            );
            let space = if pre.joint_removal && pre.remove_first_component {
                if pre.l2_normalize {
                    space.l2_normalize()?
                } else {
                    space
                }
            } else {
                preprocess_one(space, pre)?
            };
            Ok((space, lexicon))
        })
        .collect::<Result<_>>()?;
    let (mut spaces, lexicons): (Vec<_>, Vec<_>) = loaded.into_iter().unzip();
    if pre.joint_removal && pre.remove_first_component {
        spaces = remove_first_component_jointly(spaces)?
            .into_iter()
            .map(|s| {
                if pre.l2_normalize {
                    s.l2_normalize()
                } else {
                    Ok(s)
                }
            })
            .collect::<xssd_core::Result<_>>()?;
    }
    let dim = spaces[0].dim();
    if let Some(other) = spaces.iter().find(|s| s.dim() != dim) {
        return Err(CliError::Validation(format!(
            "{} has dimension {} but {} has {dim}",
            other.language(),
            other.dim(),
            spaces[0].language()
        )));
    }
    Ok(config
        .languages
        .iter()
        .cloned()
        .zip(spaces.into_iter().zip(lexicons))
        .map(|(config, (space, lexicon))| Language {
            config,
            space: trust_disabled_steps(space, pre),
            lexicon,
        })
        .collect())
}

fn preprocess_one(
    space: EmbeddingSpace,
    pre: &PreprocessingConfig,
) -> xssd_core::Result<EmbeddingSpace> {
    match (pre.l2_normalize, pre.remove_first_component) {
        (true, true) => space.preprocess(),
        (true, false) => space.l2_normalize(),
        (false, true) => space.remove_first_component(),
        (false, false) => Ok(space),
    }
}

/// A step switched off in the config counts as done upstream.
fn trust_disabled_steps(space: EmbeddingSpace, pre: &PreprocessingConfig) -> EmbeddingSpace {
    let done = space.preprocessing();
    space.assume_preprocessed(Preprocessing {
        l2_normalized: done.l2_normalized || !pre.l2_normalize,
        first_pc_removed: done.first_pc_removed || !pre.remove_first_component,
    })
}

fn select_k_seed(seed: u64, language: &str, dimension: &str) -> u64 {
    derive(seed, &format!("select-k/{language}/{dimension}"))
}

fn join(lang: &Language, dimension: &str, min_samples: usize) -> xssd_core::Result<JoinedSample> {
    xssd_core::join(&lang.lexicon, &lang.space, dimension, min_samples)
}

/// Gradient with K from the one-SE rule, using the same folds as `fit`.
fn selected_gradient(
    sample: &JoinedSample,
    params: &Parameters,
    seed: u64,
) -> xssd_core::Result<Gradient> {
    let sel = select_k(
        sample.x.view(),
        &sample.y,
        params.k_max,
        params.folds,
        select_k_seed(seed, &sample.language, &sample.dimension),
    )?;
    Ok(fit_pls_gradient(sample, sel.k)?.0)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn prepare_output(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Exit status for units that failed: degenerate data outranks other errors.
fn failure_code(errors: &[&CliError]) -> Option<i32> {
    errors.iter().map(|e| e.exit_code()).max()
}

fn finish(
    command: &str,
    config: &RunConfig,
    units: Vec<UnitEntry>,
    exit_code: i32,
) -> Result<Outcome> {
    let manifest = Manifest {
        command: command.to_string(),
        seed: config.seed,
        exit_code,
        preprocessing: config.preprocessing.clone(),
        parameters: config.parameters.clone(),
        units,
    };
    write_json(
        &config.output.join(format!("manifest_{command}.json")),
        &manifest,
    )?;
    Ok(Outcome {
        exit_code,
        manifest,
        output: config.output.clone(),
    })
}

enum UnitResult<T> {
    Done(T),
    Skipped(String),
    Refused(String),
    Failed(CliError),
}

fn fit_unit(
    lang: &Language,
    dimension: &str,
    config: &RunConfig,
) -> UnitResult<(FitRecord, Gradient)> {
    let params = &config.parameters;
    if !lang.lexicon.has_dimension(dimension) {
        return UnitResult::Skipped(format!("{} has no {dimension} column", lang.config.name));
    }
    let run = || -> xssd_core::Result<(FitRecord, Gradient)> {
        let sample = join(lang, dimension, params.min_samples)?;
        let seed = select_k_seed(config.seed, &lang.config.name, dimension);
        let fitted = fit_gradient(&sample, &params.fit_options(), seed)?;
        let fit = fitted
            .gradient
            .fit
            .clone()
            .expect("fit_gradient attaches a report");
        let record = FitRecord {
            language: lang.config.name.clone(),
            dimension: dimension.to_string(),
            n: sample.len(),
            dropped_oov: sample.dropped_oov,
            k: fitted.selection.k,
            r_squared: fit.r_squared,
            r_squared_in_sample: fit.r_squared_in_sample,
            r_pred: fit.r_pred,
            t_statistic: fit.t_statistic,
            p_value: fit.p_value,
            cv_mse: fitted.selection.cv_mse.clone(),
            cv_se: fitted.selection.cv_se.clone(),
            split_scores: fit.split_scores.clone(),
            gradient_file: format!("gradient_{}_{dimension}.vec", lang.config.name),
            seed,
            preprocessing: config.preprocessing.clone(),
            parameters: params.clone(),
        };
        Ok((record, fitted.gradient))
    };
    match run() {
        Ok(v) => UnitResult::Done(v),
        Err(source) => UnitResult::Failed(CliError::Analysis {
            unit: format!("fit {} {dimension}", lang.config.name),
            source,
        }),
    }
}

/// Fits a gradient per (language, dimension) and writes its report row and
/// the gradient as a one-row vector file.
pub fn fit(config: &RunConfig) -> Result<Outcome> {
    config.validate(false)?;
    let langs = load_languages(config)?;
    prepare_output(&config.output)?;
    let jobs: Vec<(usize, &str)> = (0..langs.len())
        .flat_map(|i| config.dimensions.iter().map(move |d| (i, d.as_str())))
        .collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(i, dim)| fit_unit(&langs[i], dim, config))
        .collect();

    let mut units = Vec::new();
    let mut errors = Vec::new();
    for (&(i, dim), result) in jobs.iter().zip(&results) {
        let name = &langs[i].config.name;
        let unit = format!("{name}/{dim}");
        match result {
            UnitResult::Done((record, gradient)) => {
                let json = format!("fit_{name}_{dim}.json");
                write_json(&config.output.join(&json), record)?;
                let row = gradient.direction().to_owned().insert_axis(Axis(0));
                EmbeddingSpace::new(name.clone(), vec![format!("{name}:{dim}")], row)?
                    .write_to_path(config.output.join(&record.gradient_file))?;
                info!(
                    "{unit}: K={} R²={:.3} p={:.2e}",
                    record.k, record.r_squared, record.p_value
                );
                units.push(UnitEntry::ok(
                    unit,
                    vec![json, record.gradient_file.clone()],
                ));
            }
            UnitResult::Skipped(m) | UnitResult::Refused(m) => {
                warn!("{unit}: skipped, {m}");
                units.push(UnitEntry::with_status(unit, UnitStatus::Skipped, m.clone()));
            }
            UnitResult::Failed(e) => {
                warn!("{e}");
                units.push(UnitEntry::with_status(
                    unit,
                    UnitStatus::Failed,
                    e.to_string(),
                ));
                errors.push(e);
            }
        }
    }
    let code = failure_code(&errors).unwrap_or(EXIT_OK);
    finish("fit", config, units, code)
}

fn compare_unit(
    a: &Language,
    b: &Language,
    dimension: &str,
    config: &RunConfig,
) -> UnitResult<CompareRecord> {
    let params = &config.parameters;
    for lang in [a, b] {
        if !lang.lexicon.has_dimension(dimension) {
            return UnitResult::Skipped(format!("{} has no {dimension} column", lang.config.name));
        }
    }
    let (na, nb) = (&a.config.name, &b.config.name);
    let run = || -> xssd_core::Result<CompareRecord> {
        let sa = join(a, dimension, params.min_samples)?;
        let sb = join(b, dimension, params.min_samples)?;
        let label = format!("{na}/{nb}/{dimension}");
        let rho = observed_rho(&sa, &sb)?;
        let align = alignment_test(
            &sa,
            &sb,
            params.n_permutations,
            derive(config.seed, &format!("alignment/{label}")),
        )?;
        let diff = difference_test(
            &sa,
            &sb,
            params.n_permutations,
            derive(config.seed, &format!("difference/{label}")),
        )?;
        let boot = bootstrap_interval(
            &sa,
            &sb,
            params.bootstrap_replicates,
            derive(config.seed, &format!("bootstrap/{label}")),
        )?;
        let ga = selected_gradient(&sa, params, config.seed)?;
        let gb = selected_gradient(&sb, params, config.seed)?;
        let words_a: HashSet<&str> = sa.words.iter().map(String::as_str).collect();
        let summary = |r: &xssd_core::PermutationResult| PermutationSummary {
            rho_observed: r.rho_observed,
            p_value: r.p_value,
            n: r.n,
            tail: r.tail,
            seed: r.seed,
            null_histogram: histogram(&r.null_samples, HISTOGRAM_BINS),
        };
        Ok(CompareRecord {
            language_a: na.clone(),
            language_b: nb.clone(),
            dimension: dimension.to_string(),
            rho_observed: rho,
            rho_selected_k: xssd_core::cosine(&ga, &gb)?,
            k_a: ga.components(),
            k_b: gb.components(),
            verdict: Verdict::from_p_values(align.p_value, diff.p_value, params.alpha),
            alignment: summary(&align),
            difference: summary(&diff),
            bootstrap: BootstrapSummary {
                rho_observed: boot.rho_observed,
                sigma_z: boot.sigma_z,
                ci: [boot.ci_low, boot.ci_high],
                replicates: boot.replicates,
                seed: boot.seed,
                replicate_histogram: histogram(&boot.replicate_rhos, HISTOGRAM_BINS),
            },
            diagnostics: PairDiagnostics {
                n_a: sa.len(),
                n_b: sb.len(),
                dropped_oov_a: sa.dropped_oov,
                dropped_oov_b: sb.dropped_oov,
                shared_words: sb
                    .words
                    .iter()
                    .filter(|w| words_a.contains(w.as_str()))
                    .count(),
            },
            seed: config.seed,
            preprocessing: config.preprocessing.clone(),
            parameters: params.clone(),
        })
    };
    match run() {
        Ok(v) => UnitResult::Done(v),
        Err(source) => UnitResult::Failed(CliError::Analysis {
            unit: format!("compare {na} {nb} {dimension}"),
            source,
        }),
    }
}

fn pair_jobs(config: &RunConfig) -> Vec<(usize, usize, &str)> {
    config
        .pair_indices()
        .into_iter()
        .flat_map(|(a, b)| config.dimensions.iter().map(move |d| (a, b, d.as_str())))
        .collect()
}

/// Runs the alignment test, the difference test and the bootstrap for
/// every (pair, dimension).
///
/// With no failures, the exit status reflects the weakest verdict:
/// 0 aligned and different, 4 aligned but not different, 5 not aligned.
pub fn compare(config: &RunConfig) -> Result<Outcome> {
    config.validate(true)?;
    let langs = load_languages(config)?;
    prepare_output(&config.output)?;
    let jobs = pair_jobs(config);
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(a, b, dim)| compare_unit(&langs[a], &langs[b], dim, config))
        .collect();

    let mut units = Vec::new();
    let mut errors = Vec::new();
    let mut verdict_code = EXIT_OK;
    for (&(a, b, dim), result) in jobs.iter().zip(&results) {
        let (na, nb) = (&langs[a].config.name, &langs[b].config.name);
        let unit = format!("{na}/{nb}/{dim}");
        match result {
            UnitResult::Done(record) => {
                let json = format!("compare_{na}_{nb}_{dim}.json");
                write_json(&config.output.join(&json), record)?;
                info!(
                    "{unit}: rho={:.3} p_align={:.4} p_diff={:.4} CI=[{:.3}, {:.3}] {}",
                    record.rho_observed,
                    record.alignment.p_value,
                    record.difference.p_value,
                    record.bootstrap.ci[0],
                    record.bootstrap.ci[1],
                    record.verdict.label()
                );
                verdict_code = verdict_code.max(record.verdict.exit_code());
                let mut entry = UnitEntry::ok(unit, vec![json]);
                entry.verdict = Some(record.verdict);
                units.push(entry);
            }
            UnitResult::Skipped(m) | UnitResult::Refused(m) => {
                warn!("{unit}: skipped, {m}");
                units.push(UnitEntry::with_status(unit, UnitStatus::Skipped, m.clone()));
            }
            UnitResult::Failed(e) => {
                warn!("{e}");
                units.push(UnitEntry::with_status(
                    unit,
                    UnitStatus::Failed,
                    e.to_string(),
                ));
                errors.push(e);
            }
        }
    }
    let code = failure_code(&errors).unwrap_or(verdict_code);
    finish("compare", config, units, code)
}

/// Difference-test p-value from an earlier `compare` run, if there was one.
fn recorded_p_difference(out: &Path, a: &str, b: &str, dim: &str) -> Result<Option<f64>> {
    let path = out.join(format!("compare_{a}_{b}_{dim}.json"));
    if !path.is_file() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let record: CompareRecord =
        serde_json::from_str(&text).map_err(|source| CliError::Json { path, source })?;
    Ok(Some(record.difference.p_value))
}

struct ClusterOutput {
    records: Vec<ClusterRecord>,
}

fn cluster_unit(
    a: &Language,
    b: &Language,
    dimension: &str,
    p_difference: Option<f64>,
    config: &RunConfig,
    force: bool,
) -> UnitResult<ClusterOutput> {
    let params = &config.parameters;
    let (na, nb) = (&a.config.name, &b.config.name);
    let significant = p_difference.is_some_and(|p| p < params.alpha);
    if !significant && !force {
        return UnitResult::Refused(match p_difference {
            Some(p) => format!(
                "difference not significant (p = {p} ≥ {}); pass --force to cluster anyway",
                params.alpha
            ),
            None => "no compare report for this pair; run compare first or pass --force".into(),
        });
    }
    for lang in [a, b] {
        if !lang.lexicon.has_dimension(dimension) {
            return UnitResult::Skipped(format!("{} has no {dimension} column", lang.config.name));
        }
    }
    let run = || -> xssd_core::Result<ClusterOutput> {
        let sa = join(a, dimension, params.min_samples)?;
        let sb = join(b, dimension, params.min_samples)?;
        let (ga, gb) = match params.cluster_gradient {
            ClusterGradient::ClosedForm => (closed_form_pls1(&sa)?, closed_form_pls1(&sb)?),
            ClusterGradient::Selected => (
                selected_gradient(&sa, params, config.seed)?,
                selected_gradient(&sb, params, config.seed)?,
            ),
        };
        let dg = difference_gradient(&ga, &gb)?;
        let [k_min, k_max] = params.k_range;
        let mut records = Vec::new();
        for vocab in [a, b] {
            let space = &vocab.space;
            let m = params.candidates.min(space.len());
            let vname = &vocab.config.name;
            let reports = if params.joint_clustering {
                let seed = derive(
                    config.seed,
                    &format!("cluster/{na}/{nb}/{dimension}/{vname}/joint"),
                );
                let (pos, neg) = xssd_core::difference::cluster_poles_jointly(
                    space, &dg, m, k_min, k_max, seed,
                )?;
                vec![(pos, seed), (neg, seed)]
            } else {
                let mut out = Vec::new();
                for pole in [Pole::Positive, Pole::Negative] {
                    let seed = derive(
                        config.seed,
                        &format!("cluster/{na}/{nb}/{dimension}/{vname}/{}", pole.name()),
                    );
                    let words = select_pole_candidates(space, &dg, pole, m)?;
                    out.push((
                        cluster_pole(&words, space, &dg, pole, k_min, k_max, seed)?,
                        seed,
                    ));
                }
                out
            };
            for (report, seed) in reports {
                records.push(ClusterRecord {
                    language_a: na.clone(),
                    language_b: nb.clone(),
                    dimension: dimension.to_string(),
                    vocabulary: vname.clone(),
                    pole: report.pole,
                    gradient: params.cluster_gradient,
                    delta_norm: dg.norm(),
                    cos_ab: dg.cos_ab,
                    p_difference,
                    forced: !significant,
                    candidates: m,
                    seed,
                    report,
                    parameters: params.clone(),
                });
            }
        }
        Ok(ClusterOutput { records })
    };
    match run() {
        Ok(v) => UnitResult::Done(v),
        Err(source) => UnitResult::Failed(CliError::Analysis {
            unit: format!("cluster {na} {nb} {dimension}"),
            source,
        }),
    }
}

/// Clusters both vocabularies around both poles of each significant
/// difference gradient. Without `force`, a pair needs a compare report with
/// a difference-test p-value below alpha.
pub fn cluster(config: &RunConfig, force: bool) -> Result<Outcome> {
    config.validate(true)?;
    let jobs = pair_jobs(config);
    let mut p_values = Vec::with_capacity(jobs.len());
    for &(a, b, dim) in &jobs {
        let (na, nb) = (&config.languages[a].name, &config.languages[b].name);
        p_values.push(recorded_p_difference(&config.output, na, nb, dim)?);
    }
    let langs = load_languages(config)?;
    prepare_output(&config.output)?;
    let results: Vec<_> = jobs
        .par_iter()
        .zip(&p_values)
        .map(|(&(a, b, dim), &p)| cluster_unit(&langs[a], &langs[b], dim, p, config, force))
        .collect();

    let mut units = Vec::new();
    let mut errors = Vec::new();
    let mut refused = 0;
    for (&(a, b, dim), result) in jobs.iter().zip(&results) {
        let (na, nb) = (&langs[a].config.name, &langs[b].config.name);
        let unit = format!("{na}/{nb}/{dim}");
        match result {
            UnitResult::Done(output) => {
                let mut files = Vec::new();
                for record in &output.records {
                    let stem = format!(
                        "cluster_{na}_{nb}_{dim}_{}_{}",
                        record.vocabulary,
                        record.pole.name()
                    );
                    write_json(&config.output.join(format!("{stem}.json")), record)?;
                    write_text(
                        &config.output.join(format!("{stem}.txt")),
                        &render::cluster_text(record),
                    )?;
                    files.push(format!("{stem}.json"));
                    files.push(format!("{stem}.txt"));
                }
                info!("{unit}: wrote {} cluster reports", output.records.len());
                units.push(UnitEntry::ok(unit, files));
            }
            UnitResult::Refused(m) => {
                warn!("{unit}: refused, {m}");
                refused += 1;
                units.push(UnitEntry::with_status(unit, UnitStatus::Refused, m.clone()));
            }
            UnitResult::Skipped(m) => {
                warn!("{unit}: skipped, {m}");
                units.push(UnitEntry::with_status(unit, UnitStatus::Skipped, m.clone()));
            }
            UnitResult::Failed(e) => {
                warn!("{e}");
                units.push(UnitEntry::with_status(
                    unit,
                    UnitStatus::Failed,
                    e.to_string(),
                ));
                errors.push(e);
            }
        }
    }
    let code = match failure_code(&errors) {
        Some(code) => code,
        None if refused == jobs.len() => EXIT_VALIDATION,
        None => EXIT_OK,
    };
    finish("cluster", config, units, code)
}

/// Generates a synthetic pair from a spec file and writes it with a run
/// config that points at the generated files.
pub fn synth(spec_path: &Path, overrides: &Overrides) -> Result<(PathBuf, RunConfig)> {
    let text = std::fs::read_to_string(spec_path).map_err(|e| CliError::io(spec_path, e))?;
    let mut spec: SynthSpec = serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: spec_path.to_path_buf(),
        source,
    })?;
    if let Some(seed) = overrides.seed {
        spec.seed = seed;
    }
    let out = overrides
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("synth"));
    let data = xssd_core::generate(&spec)?;
    let files = data.write_to_dir(&out)?;
    let rel = |p: &Path| PathBuf::from(p.file_name().expect("written files have names"));
    let config = RunConfig {
        languages: vec![
            LanguageConfig {
                name: spec.language_a.clone(),
                embeddings: rel(&files.embeddings_a),
                lexicon: rel(&files.lexicon_a),
                max_vocab: None,
            },
            LanguageConfig {
                name: spec.language_b.clone(),
                embeddings: rel(&files.embeddings_b),
                lexicon: rel(&files.lexicon_b),
                max_vocab: None,
            },
        ],
        dimensions: vec![spec.dimension.clone()],
        pairs: None,
        preprocessing: PreprocessingConfig::default(),
        parameters: Parameters::default(),
        seed: spec.seed,
        output: PathBuf::from("results"),
    };
    let path = out.join("run_config.json");
    write_json(&path, &config)?;
    Ok((path, config))
}
