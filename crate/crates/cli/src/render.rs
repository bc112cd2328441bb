//! Plain-text renderings of the JSON reports.

use std::fmt::Write;
use std::path::Path;

use xssd_core::Pole;

use crate::error::{CliError, Result};
use crate::records::{ClusterRecord, CompareRecord, FitRecord};

/// Words listed per cluster in text output.
pub const WORDS_SHOWN: usize = 10;

/// One pole's clusters: `Cluster i (n=…, cos=…, coh.=…): w1, w2, …`.
pub fn cluster_text(record: &ClusterRecord) -> String {
    let (a, b) = (&record.language_a, &record.language_b);
    let leans = match record.pole {
        Pole::Positive => a,
        Pole::Negative => b,
    };
    let pole = match record.pole {
        Pole::Positive => "Positive",
        Pole::Negative => "Negative",
    };
    let mut s = String::new();
    let _ = writeln!(s, "{a} -- {b} difference, {}", record.dimension);
    let _ = writeln!(s, "Neighbours in {} vocabulary", record.vocabulary);
    let _ = writeln!(
        s,
        "{pole} pole (leans {leans}), k={}, silhouette={:.2}",
        record.report.k, record.report.silhouette
    );
    for (i, c) in record.report.clusters.iter().enumerate() {
        let words: Vec<&str> = c
            .words
            .iter()
            .take(WORDS_SHOWN)
            .map(String::as_str)
            .collect();
        let _ = writeln!(
            s,
            "  Cluster {i} (n={}, cos={:.2}, coh.={:.2}): {}",
            c.n,
            c.centroid_cos,
            c.coherence,
            words.join(", ")
        );
    }
    s
}

fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// Fit rows in the layout of a results table.
pub fn fit_table(rows: &[FitRecord]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<10} {:<12} {:>7} {:>3} {:>7} {:>10} {:>7}",
        "Language", "Dimension", "N", "K", "R2", "p-val", "r_pred"
    );
    for r in rows {
        let p = format!("{:.1e}{}", r.p_value, stars(r.p_value));
        let _ = writeln!(
            s,
            "{:<10} {:<12} {:>7} {:>3} {:>7.3} {:>10} {:>7.3}",
            r.language, r.dimension, r.n, r.k, r.r_squared, p, r.r_pred
        );
    }
    s
}

/// Test results per (pair, dimension).
pub fn compare_table(rows: &[CompareRecord]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<12} {:<12} {:>7} {:>18} {:>8} {:>8}  verdict",
        "Pair", "Dimension", "rho", "95% CI", "p_align", "p_diff"
    );
    for r in rows {
        let pair = format!("{} -- {}", r.language_a, r.language_b);
        let ci = format!("[{:.2}, {:.2}]", r.bootstrap.ci[0], r.bootstrap.ci[1]);
        let _ = writeln!(
            s,
            "{:<12} {:<12} {:>7.3} {:>18} {:>8.4} {:>8.4}  {}",
            pair,
            r.dimension,
            r.rho_observed,
            ci,
            r.alignment.p_value,
            r.difference.p_value,
            r.verdict.label()
        );
    }
    s
}

fn read_all<T: serde::de::DeserializeOwned>(dir: &Path, prefix: &str) -> Result<Vec<T>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|x| x == "json")
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with(prefix))
        })
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|path| {
            let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
            serde_json::from_str(&text).map_err(|source| CliError::Json { path, source })
        })
        .collect()
}

/// Summary of every report found in `dir`, also written to `report.txt`.
pub fn report(dir: &Path) -> Result<String> {
    if !dir.is_dir() {
        return Err(CliError::Validation(format!(
            "output directory {} does not exist",
            dir.display()
        )));
    }
    let fits: Vec<FitRecord> = read_all(dir, "fit_")?;
    let compares: Vec<CompareRecord> = read_all(dir, "compare_")?;
    let clusters: Vec<ClusterRecord> = read_all(dir, "cluster_")?;
    if fits.is_empty() && compares.is_empty() && clusters.is_empty() {
        return Err(CliError::Validation(format!(
            "no reports found in {}",
            dir.display()
        )));
    }
    let mut s = String::new();
    if !fits.is_empty() {
        let _ = writeln!(s, "Gradient fits\n\n{}", fit_table(&fits));
    }
    if !compares.is_empty() {
        let _ = writeln!(s, "Cross-language tests\n\n{}", compare_table(&compares));
    }
    if !clusters.is_empty() {
        let _ = writeln!(s, "Difference clusters\n");
        for c in &clusters {
            let _ = writeln!(s, "{}", cluster_text(c));
        }
    }
    let path = dir.join("report.txt");
    std::fs::write(&path, &s).map_err(|e| CliError::io(&path, e))?;
    Ok(s)
}
