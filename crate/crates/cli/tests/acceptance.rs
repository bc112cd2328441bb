//! Acceptance suite. Runs every criterion in turn, prints one PASS/FAIL
//! line each, and exits non-zero if any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Deserialize;
use serde_json::{json, Value};
use xssd_cli::RunConfig;
use xssd_core::difference::cluster_metrics;
use xssd_core::inference::fisher_interval;
use xssd_core::seed::derive_index;
use xssd_core::{
    alignment_test, bootstrap_interval, closed_form_pls1, cluster_pole, difference_gradient,
    difference_test, fit_pls, fit_pls_gradient, generate, join, EmbeddingSpace, Gradient,
    JoinedSample, Pole, SynthData, SynthSpec,
};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn core<T>(r: xssd_core::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn unit(v: &Array1<f64>) -> Array1<f64> {
    v / v.dot(v).sqrt()
}

/// Synthetic pair with a dominant nuisance direction for preprocessing to
/// remove, preprocessed and joined on the generated dimension.
fn prepared(spec: &SynthSpec) -> Result<(SynthData, JoinedSample, JoinedSample), String> {
    let data = core(generate(spec))?;
    let sa = core(join(
        &data.lexicon_a,
        &core(data.space_a.clone().preprocess())?,
        &spec.dimension,
        50,
    ))?;
    let sb = core(join(
        &data.lexicon_b,
        &core(data.space_b.clone().preprocess())?,
        &spec.dimension,
        50,
    ))?;
    Ok((data, sa, sb))
}

fn spec(d: usize, n: usize, angle: f64, noise: f64, seed: u64) -> SynthSpec {
    let mut s = SynthSpec::new(d, n, n, angle, noise, 3 * n, seed);
    s.anisotropy = 3.0;
    s
}

fn pls1_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = f64::INFINITY;
    for _ in 0..100 {
        let n = rng.random_range(5..=50);
        let d = rng.random_range(1..=10);
        let x = Array2::from_shape_fn((n, d), |_| normal(&mut rng));
        let b = Array1::from_shape_fn(d, |_| normal(&mut rng));
        let y: Vec<f64> = x
            .dot(&b)
            .iter()
            .map(|v| v + 0.5 * normal(&mut rng))
            .collect();
        let words = (0..n).map(|i| format!("w{i}")).collect();
        let sample = core(JoinedSample::new("a", "v", words, x, y))?;
        let closed = core(closed_form_pls1(&sample))?;
        let (nipals, _) = core(fit_pls_gradient(&sample, 1))?;
        worst = worst.min(closed.direction().dot(&nipals.direction()));
    }
    ensure(worst >= 1.0 - 1e-10, || format!("worst cosine {worst}"))?;
    Ok(format!(
        "worst cosine over 100 instances = 1 - {:.1e}",
        1.0 - worst
    ))
}

fn in_sample_r2(sample: &JoinedSample) -> Result<f64, String> {
    let model = core(fit_pls(sample.x.view(), &sample.y, 1))?;
    let pred = model.predict(sample.x.view());
    let mean = sample.y.iter().sum::<f64>() / sample.len() as f64;
    let ss_res: f64 = sample
        .y
        .iter()
        .zip(&pred)
        .map(|(y, p)| (y - p).powi(2))
        .sum();
    let ss_tot: f64 = sample.y.iter().map(|y| (y - mean).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

fn gradient_recovery() -> Check {
    let (data, sa, sb) = prepared(&spec(50, 2000, 0.0, 0.1, 21))?;
    let mut parts = Vec::new();
    for (sample, w) in [(&sa, &data.w_a), (&sb, &data.w_b)] {
        let g = core(closed_form_pls1(sample))?;
        let cos = g.direction().dot(&unit(w)).abs();
        let r2 = in_sample_r2(sample)?;
        ensure(cos >= 0.95 && r2 >= 0.9, || {
            format!("{}: |cos| = {cos:.4}, R² = {r2:.4}", sample.language)
        })?;
        parts.push(format!(
            "{}: |cos| = {cos:.4}, R² = {r2:.4}",
            sample.language
        ));
    }
    Ok(parts.join("; "))
}

fn shuffled(sample: &JoinedSample, rng: &mut ChaCha8Rng) -> JoinedSample {
    let mut out = sample.clone();
    out.y.shuffle(rng);
    out
}

fn alignment_power_and_floor() -> Check {
    let (_, sa, sb) = prepared(&spec(50, 2000, 0.0, 0.1, 21))?;
    let res = core(alignment_test(&sa, &sb, 199, 31))?;
    ensure(res.p_value == 1.0 / 200.0, || {
        format!("p_align = {}", res.p_value)
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let mut rejections = 0;
    for run in 0..200 {
        let (a, b) = (shuffled(&sa, &mut rng), shuffled(&sb, &mut rng));
        let p = core(alignment_test(&a, &b, 99, derive_index(33, run)))?.p_value;
        rejections += usize::from(p < 0.05);
    }
    let rate = rejections as f64 / 200.0;
    ensure((0.01..=0.10).contains(&rate), || {
        format!("null rejection rate {rate}")
    })?;
    Ok(format!("p_align = 1/200; null rejection rate {rate:.3}"))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn difference_behavior() -> Check {
    let (_, sa, sb) = prepared(&spec(50, 500, 90.0, 0.1, 41))?;
    let p90 = core(difference_test(&sa, &sb, 199, 42))?.p_value;
    ensure(p90 == 1.0 / 200.0, || format!("angle 90: p_diff = {p90}"))?;
    let mut high = 0;
    let mut null = Vec::new();
    let mut run_medians = Vec::new();
    for run in 0..50 {
        let (_, sa, sb) = prepared(&spec(50, 500, 0.0, 0.1, 1000 + run))?;
        let res = core(difference_test(&sa, &sb, 199, derive_index(43, run)))?;
        high += usize::from(res.p_value >= 0.5);
        run_medians.push(median(res.null_samples.clone()));
        null.extend(res.null_samples);
    }
    let null_median = median(null);
    let lowest = run_medians.iter().copied().fold(f64::INFINITY, f64::min);
    ensure(high >= 45, || {
        format!("angle 0: p_diff >= 0.5 in {high}/50 runs")
    })?;
    ensure(null_median >= 0.9, || format!("null median {null_median}"))?;
    Ok(format!(
        "angle 90: p_diff = 1/200; angle 0: p_diff >= 0.5 in {high}/50; null median {null_median:.4} (lowest per run {lowest:.4})"
    ))
}

fn bootstrap_bounds() -> Check {
    let (lo, hi) = fisher_interval(0.9, 0.1);
    let z = 0.9f64.atanh();
    let (olo, ohi) = ((z - 1.96 * 0.1).tanh(), (z + 1.96 * 0.1).tanh());
    ensure((lo - olo).abs() < 1e-12 && (hi - ohi).abs() < 1e-12, || {
        format!("[{lo}, {hi}] vs direct formula [{olo}, {ohi}]")
    })?;
    ensure(
        (lo - 0.8557).abs() <= 1e-3 && (hi - 0.9314).abs() <= 1e-3,
        || format!("[{lo:.4}, {hi:.4}] vs [0.8557, 0.9314]"),
    )?;
    let target = 30f64.to_radians().cos();
    let mut covered = 0;
    let mut endpoints_ok = true;
    for run in 0..200 {
        let (_, sa, sb) = prepared(&spec(50, 500, 30.0, 0.2, 2000 + run))?;
        let b = core(bootstrap_interval(&sa, &sb, 1000, derive_index(51, run)))?;
        covered += usize::from(b.ci_low <= target && target <= b.ci_high);
        endpoints_ok &= b.ci_low.abs() < 1.0 && b.ci_high.abs() < 1.0;
    }
    // identical samples put the observed cosine at exactly 1
    let (_, sa, _) = prepared(&spec(20, 300, 0.0, 0.0, 52))?;
    let same = core(bootstrap_interval(&sa, &sa, 200, 53))?;
    endpoints_ok &= same.ci_low.abs() < 1.0 && same.ci_high.abs() < 1.0;
    let rate = covered as f64 / 200.0;
    ensure(rate >= 0.88, || format!("coverage {rate}"))?;
    ensure(endpoints_ok, || "an interval endpoint reached ±1".into())?;
    Ok(format!(
        "CI(0.9, 0.1) = [{lo:.4}, {hi:.4}]; coverage of cos 30° = {rate:.3}; no endpoint at ±1"
    ))
}

fn affine_invariance() -> Check {
    let (_, sa, sb) = prepared(&spec(20, 300, 40.0, 0.3, 61))?;
    // labels on a dyadic grid, so that 10y + 3 is exact
    let grid = |s: &JoinedSample| s.map_labels(|v| (v * 1024.0).round() / 1024.0);
    let (sa, sb) = (grid(&sa), grid(&sb));
    let affine = |s: &JoinedSample| s.map_labels(|v| 10.0 * v + 3.0);
    let outputs = |a: &JoinedSample, b: &JoinedSample| -> Result<_, String> {
        Ok((
            core(alignment_test(a, b, 199, 62))?.p_value,
            core(difference_test(a, b, 199, 63))?.p_value,
            core(bootstrap_interval(a, b, 200, 64))?,
        ))
    };
    let (pa, pd, boot) = outputs(&sa, &sb)?;
    let mut worst = f64::INFINITY;
    for (a, b, which) in [
        (affine(&sa), sb.clone(), "a"),
        (sa.clone(), affine(&sb), "b"),
    ] {
        for (orig, moved) in [(&sa, &a), (&sb, &b)] {
            let c = core(closed_form_pls1(orig))?
                .direction()
                .dot(&core(closed_form_pls1(moved))?.direction());
            let k = core(fit_pls_gradient(orig, 3))?
                .0
                .direction()
                .dot(&core(fit_pls_gradient(moved, 3))?.0.direction());
            worst = worst.min(c).min(k);
        }
        let (qa, qd, b2) = outputs(&a, &b)?;
        ensure(qa == pa && qd == pd, || {
            format!("language {which}: p-values ({qa}, {qd}) vs ({pa}, {pd})")
        })?;
        ensure(
            b2.ci_low.to_bits() == boot.ci_low.to_bits()
                && b2.ci_high.to_bits() == boot.ci_high.to_bits(),
            || {
                format!(
                    "language {which}: CI [{}, {}] vs [{}, {}]",
                    b2.ci_low, b2.ci_high, boot.ci_low, boot.ci_high
                )
            },
        )?;
    }
    ensure(worst >= 1.0 - 1e-10, || format!("gradient cosine {worst}"))?;
    Ok(format!(
        "gradient cosine >= 1 - {:.1e}; p-values and CI bit-identical",
        (1.0 - worst).max(0.0)
    ))
}

fn clustering_oracle() -> Check {
    let mut s = spec(20, 300, 60.0, 0.1, 71);
    s.blobs = Some(Default::default());
    let data = core(generate(&s))?;
    let space_a = core(data.space_a.clone().preprocess())?;
    let space_b = core(data.space_b.clone().preprocess())?;
    let ga = core(closed_form_pls1(&core(join(
        &data.lexicon_a,
        &space_a,
        "valence",
        50,
    ))?))?;
    let gb = core(closed_form_pls1(&core(join(
        &data.lexicon_b,
        &space_b,
        "valence",
        50,
    ))?))?;
    let dg = core(difference_gradient(&ga, &gb))?;
    let planted: std::collections::HashMap<&str, usize> =
        data.blobs_a.iter().map(|(w, b)| (w.as_str(), *b)).collect();
    let blob_size = s.blobs.as_ref().unwrap().size;
    let mut lowest_silhouette = f64::INFINITY;
    for (pole, seed) in [(Pole::Positive, 72), (Pole::Negative, 73)] {
        let m = 3 * blob_size;
        let words = core(xssd_core::select_pole_candidates(&space_a, &dg, pole, m))?;
        let rep = core(cluster_pole(&words, &space_a, &dg, pole, 2, 10, seed))?;
        ensure(rep.k == 3, || {
            format!("{} pole: k = {}", pole.name(), rep.k)
        })?;
        ensure(rep.silhouette > 0.6, || {
            format!("{} pole: silhouette {}", pole.name(), rep.silhouette)
        })?;
        let mut seen = std::collections::HashSet::new();
        for c in &rep.clusters {
            let ids: std::collections::HashSet<Option<&usize>> =
                c.words.iter().map(|w| planted.get(w.as_str())).collect();
            let id = ids.iter().next().copied().flatten();
            ensure(
                ids.len() == 1 && id.is_some() && c.n == blob_size && seen.insert(*id.unwrap()),
                || {
                    format!(
                        "{} pole: cluster {:?} does not match a planted blob",
                        pole.name(),
                        c.words
                    )
                },
            )?;
        }
        lowest_silhouette = lowest_silhouette.min(rep.silhouette);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(74);
    let d = 8;
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let a = unit(&Array1::from_shape_fn(d, |_| normal(&mut rng)));
        let b = unit(&Array1::from_shape_fn(d, |_| normal(&mut rng)));
        let delta = &a - &b;
        let dg = core(difference_gradient(
            &core(Gradient::new("a", "v", a, 1))?,
            &core(Gradient::new("b", "v", b, 1))?,
        ))?;
        let n = rng.random_range(1..=20);
        let rows = Array2::from_shape_fn((n, d), |_| normal(&mut rng) + 0.5);
        let got = core(cluster_metrics(rows.view(), &dg))?;
        let (cos, coh) = brute_force_metrics(&rows, &delta);
        worst = worst
            .max((got.centroid_cos - cos).abs())
            .max((got.coherence - coh).abs());
    }
    ensure(worst <= 1e-12, || format!("metric deviation {worst:e}"))?;
    Ok(format!(
        "k = 3 on both poles, silhouette >= {lowest_silhouette:.3}, exact membership; metric deviation {worst:.1e}"
    ))
}

/// Centroid cosine against `delta` and mean pairwise cosine, by loops.
fn brute_force_metrics(rows: &Array2<f64>, delta: &Array1<f64>) -> (f64, f64) {
    let (n, d) = rows.dim();
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let mut centroid = vec![0.0; d];
    for i in 0..n {
        for j in 0..d {
            centroid[j] += rows[[i, j]] / n as f64;
        }
    }
    let delta = delta.to_vec();
    let cos =
        dot(&centroid, &delta) / (dot(&centroid, &centroid).sqrt() * dot(&delta, &delta).sqrt());
    if n == 1 {
        return (cos, 1.0);
    }
    let r: Vec<Vec<f64>> = rows.rows().into_iter().map(|r| r.to_vec()).collect();
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            sum += dot(&r[i], &r[j]) / (dot(&r[i], &r[i]).sqrt() * dot(&r[j], &r[j]).sqrt());
        }
    }
    (cos, sum / (n * (n - 1) / 2) as f64)
}

fn preprocessing() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(81);
    let (n, d) = (500, 30);
    let axis = unit(&Array1::from_shape_fn(d, |_| normal(&mut rng)));
    let x = Array2::from_shape_fn((n, d), |_| normal(&mut rng) + 0.3)
        + &Array2::from_shape_fn((n, 1), |_| 4.0 * normal(&mut rng))
            .dot(&axis.view().insert_axis(Axis(0)));
    let vocab = (0..n).map(|i| format!("w{i}")).collect();
    let normalized = core(core(EmbeddingSpace::new("a", vocab, x))?.l2_normalize())?;

    // oracle: power iteration on the explicit covariance matrix
    let v = normalized.vectors().to_owned();
    let centered = &v - &v.mean_axis(Axis(0)).unwrap();
    let cov = centered.t().dot(&centered) / n as f64;
    let mut u = Array1::from_elem(d, 1.0 / (d as f64).sqrt());
    for _ in 0..100_000 {
        let next = unit(&cov.dot(&u));
        let done = (&next - &u).iter().map(|e| e.abs()).fold(0.0, f64::max) < 1e-15;
        u = next;
        if done {
            break;
        }
    }

    let removed = core(normalized.clone().remove_first_component())?;
    let r = removed.vectors().to_owned();
    let rc = &r - &r.mean_axis(Axis(0)).unwrap();
    let along = rc.dot(&u).mapv(|p| p * p).sum();
    let total = rc.mapv(|e| e * e).sum();
    let ratio = along / total;
    ensure(ratio <= 1e-10, || {
        format!("residual variance fraction {ratio:e}")
    })?;

    let twice = core(normalized.clone().l2_normalize())?;
    let drift = (&twice.vectors() - &normalized.vectors())
        .iter()
        .map(|e| e.abs())
        .fold(0.0, f64::max);
    ensure(drift <= 1e-12, || {
        format!("l2 normalization drift {drift:e}")
    })?;
    Ok(format!(
        "residual variance fraction {ratio:.1e}; renormalization drift {drift:.1e}"
    ))
}

fn xssd(args: &[&str], threads: &str) -> Result<i32, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_xssd"))
        .args(args)
        .env("XSSD_THREADS", threads)
        .env("RUST_LOG", "error")
        .output()
        .map_err(|e| e.to_string())?;
    Ok(out.status.code().unwrap_or(-1))
}

fn json_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map(|it| it.filter_map(|e| e.ok().map(|e| e.path())).collect())
        .unwrap_or_default();
    files.retain(|p| p.extension().is_some_and(|e| e == "json"));
    files.sort();
    files
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec_path = dir.path().join("spec.json");
    let spec = json!({
        "d": 30, "n_a": 400, "n_b": 300, "angle_deg": 35.0, "noise_sigma": 0.3,
        "vocab_size": 1500, "seed": 91, "anisotropy": 3.0
    });
    std::fs::write(&spec_path, spec.to_string()).map_err(|e| e.to_string())?;
    let data = dir.path().join("data");
    xssd(
        &[
            "synth",
            "--config",
            spec_path.to_str().unwrap(),
            "--out",
            data.to_str().unwrap(),
        ],
        "1",
    )?;
    let cfg = data.join("run_config.json");
    let mut c: Value =
        serde_json::from_str(&std::fs::read_to_string(&cfg).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    c["parameters"]["n_permutations"] = json!(199);
    c["parameters"]["bootstrap_replicates"] = json!(300);
    std::fs::write(&cfg, c.to_string()).map_err(|e| e.to_string())?;

    let mut runs = Vec::new();
    for threads in ["1", "4"] {
        let out = dir.path().join(format!("threads{threads}"));
        let code = xssd(
            &[
                "compare",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
            ],
            threads,
        )?;
        ensure(code == 0 || code == 4 || code == 5, || {
            format!("compare exited {code}")
        })?;
        runs.push(out);
    }
    let (a, b) = (json_files(&runs[0]), json_files(&runs[1]));
    ensure(!a.is_empty() && a.len() == b.len(), || {
        format!("{} vs {} reports", a.len(), b.len())
    })?;
    for (fa, fb) in a.iter().zip(&b) {
        let (ba, bb) = (std::fs::read(fa).unwrap(), std::fs::read(fb).unwrap());
        ensure(fa.file_name() == fb.file_name() && ba == bb, || {
            format!("{} differs between thread counts", fa.display())
        })?;
    }
    Ok(format!(
        "{} JSON reports byte-identical with 1 and 4 threads",
        a.len()
    ))
}

#[derive(Deserialize)]
struct Expected {
    tolerance: Tolerance,
    fits: std::collections::BTreeMap<String, Vec<ExpectedFit>>,
    intervals: Vec<ExpectedInterval>,
}

#[derive(Deserialize)]
struct Tolerance {
    r_squared: f64,
    ci: f64,
}

#[derive(Deserialize)]
struct ExpectedFit {
    language: String,
    dimension: String,
    r_squared: f64,
}

#[derive(Deserialize)]
struct ExpectedInterval {
    language_a: String,
    language_b: String,
    dimension: String,
    ci: [f64; 2],
}

fn read_report(path: &Path) -> Result<Value, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn reproduction_recipe() -> Check {
    let recipe = Path::new(env!("CARGO_MANIFEST_DIR")).join("recipes/affective_norms");
    let expected: Expected = serde_json::from_str(
        &std::fs::read_to_string(recipe.join("expected.json")).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    ensure(
        expected.tolerance.r_squared == 0.05 && expected.tolerance.ci == 0.05,
        || "tolerances must be ±0.05".into(),
    )?;
    for model in ["multilingual", "monolingual"] {
        let cfg: RunConfig = serde_json::from_str(
            &std::fs::read_to_string(recipe.join(format!("{model}.json")))
                .map_err(|e| e.to_string())?,
        )
        .map_err(|e| format!("{model}.json: {e}"))?;
        let rows = expected.fits.get(model).map_or(0, Vec::len);
        ensure(cfg.languages.len() == 3 && rows == 8, || {
            format!("{model}: {rows} expected rows")
        })?;
    }
    ensure(expected.intervals.len() == 7, || {
        "expected 7 intervals".into()
    })?;

    let Ok(config) = std::env::var("XSSD_REAL_DATA_CONFIG") else {
        return Ok("recipe and expected values present; real-data run not requested (set XSSD_REAL_DATA_CONFIG)".into());
    };
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out_s = out.path().to_str().unwrap();
    for cmd in ["fit", "compare"] {
        let code = xssd(&[cmd, "--config", &config, "--out", out_s], "0")?;
        ensure(code != 2 && code != 3, || format!("{cmd} exited {code}"))?;
    }
    let tol = &expected.tolerance;
    for f in &expected.fits["multilingual"] {
        let r = read_report(
            &out.path()
                .join(format!("fit_{}_{}.json", f.language, f.dimension)),
        )?;
        let got = r["r_squared"].as_f64().unwrap_or(f64::NAN);
        ensure((got - f.r_squared).abs() <= tol.r_squared, || {
            format!(
                "{} {}: R² {got:.3} vs {}",
                f.language, f.dimension, f.r_squared
            )
        })?;
    }
    for e in &expected.intervals {
        let r = read_report(&out.path().join(format!(
            "compare_{}_{}_{}.json",
            e.language_a, e.language_b, e.dimension
        )))?;
        let ci = &r["bootstrap"]["ci"];
        let got = [
            ci[0].as_f64().unwrap_or(f64::NAN),
            ci[1].as_f64().unwrap_or(f64::NAN),
        ];
        ensure(
            (got[0] - e.ci[0]).abs() <= tol.ci && (got[1] - e.ci[1]).abs() <= tol.ci,
            || {
                format!(
                    "{}-{} {}: CI {got:?} vs {:?}",
                    e.language_a, e.language_b, e.dimension, e.ci
                )
            },
        )?;
    }
    Ok("real-data fits and intervals within ±0.05".into())
}

fn main() {
    let criteria: [(u32, &str, fn() -> Check, Duration); 10] = [
        (
            1,
            "PLS1 equivalence oracle",
            pls1_equivalence,
            Duration::from_secs(10),
        ),
        (
            2,
            "gradient recovery",
            gradient_recovery,
            Duration::from_secs(30),
        ),
        (
            3,
            "alignment-test power and floor",
            alignment_power_and_floor,
            Duration::from_secs(300),
        ),
        (
            4,
            "difference-test behavior",
            difference_behavior,
            Duration::from_secs(300),
        ),
        (
            5,
            "bootstrap arithmetic and bounds",
            bootstrap_bounds,
            Duration::from_secs(600),
        ),
        (
            6,
            "label-affine invariance",
            affine_invariance,
            Duration::MAX,
        ),
        (7, "clustering oracle", clustering_oracle, Duration::MAX),
        (8, "preprocessing", preprocessing, Duration::MAX),
        (
            9,
            "determinism across thread counts",
            determinism,
            Duration::MAX,
        ),
        (
            10,
            "published-results reproduction recipe",
            reproduction_recipe,
            Duration::MAX,
        ),
    ];
    let only: Option<u32> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (id, name, check, budget) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        let result = std::panic::catch_unwind(check)
            .unwrap_or_else(|_| Err("panicked".into()))
            .and_then(|detail| {
                let took = start.elapsed();
                if took > budget {
                    Err(format!("{detail}; took {took:.1?}, budget {budget:.0?}"))
                } else {
                    Ok(detail)
                }
            });
        let took = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS criterion {id} ({name}, {took:.1} s): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {id} ({name}, {took:.1} s): {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
