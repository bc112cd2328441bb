//! JSON documents written per analysis unit, plus the run manifest.

use serde::{Deserialize, Serialize};
use xssd_core::inference::Histogram;
use xssd_core::{ClusterReport, Pole, Tail};

use crate::config::{ClusterGradient, Parameters, PreprocessingConfig};
use crate::error::{EXIT_NOT_ALIGNED, EXIT_NOT_DIFFERENT, EXIT_OK};

/// One fitted (language, dimension) row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub language: String,
    pub dimension: String,
    /// Lexicon words found in the embedding vocabulary.
    pub n: usize,
    pub dropped_oov: usize,
    pub k: usize,
    /// Mean held-out R² over the resampled splits.
    pub r_squared: f64,
    pub r_squared_in_sample: f64,
    pub r_pred: f64,
    pub t_statistic: f64,
    pub p_value: f64,
    pub cv_mse: Vec<f64>,
    pub cv_se: Vec<f64>,
    pub split_scores: Vec<f64>,
    pub gradient_file: String,
    pub seed: u64,
    pub preprocessing: PreprocessingConfig,
    pub parameters: Parameters,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PermutationSummary {
    pub rho_observed: f64,
    pub p_value: f64,
    pub n: usize,
    pub tail: Tail,
    pub seed: u64,
    pub null_histogram: Histogram,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub rho_observed: f64,
    pub sigma_z: f64,
    pub ci: [f64; 2],
    pub replicates: usize,
    pub seed: u64,
    pub replicate_histogram: Histogram,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    AlignedAndDifferent,
    AlignedNotDifferent,
    NotAligned,
}

impl Verdict {
    pub fn from_p_values(p_align: f64, p_diff: f64, alpha: f64) -> Self {
        if p_align >= alpha {
            Verdict::NotAligned
        } else if p_diff < alpha {
            Verdict::AlignedAndDifferent
        } else {
            Verdict::AlignedNotDifferent
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::AlignedAndDifferent => EXIT_OK,
            Verdict::AlignedNotDifferent => EXIT_NOT_DIFFERENT,
            Verdict::NotAligned => EXIT_NOT_ALIGNED,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Verdict::AlignedAndDifferent => "aligned & different",
            Verdict::AlignedNotDifferent => "aligned & not different",
            Verdict::NotAligned => "not aligned",
        }
    }
}

/// Lexicon composition of a compared pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairDiagnostics {
    pub n_a: usize,
    pub n_b: usize,
    pub dropped_oov_a: usize,
    pub dropped_oov_b: usize,
    /// Words spelled identically in both joined samples.
    pub shared_words: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRecord {
    pub language_a: String,
    pub language_b: String,
    pub dimension: String,
    /// Cosine of the single-component gradients used by every test.
    pub rho_observed: f64,
    /// Cosine of the gradients with K chosen by the one-SE rule.
    pub rho_selected_k: f64,
    pub k_a: usize,
    pub k_b: usize,
    pub alignment: PermutationSummary,
    pub difference: PermutationSummary,
    pub bootstrap: BootstrapSummary,
    pub verdict: Verdict,
    pub diagnostics: PairDiagnostics,
    pub seed: u64,
    pub preprocessing: PreprocessingConfig,
    pub parameters: Parameters,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterRecord {
    pub language_a: String,
    pub language_b: String,
    pub dimension: String,
    /// Language whose embedding vocabulary was clustered.
    pub vocabulary: String,
    pub pole: Pole,
    pub gradient: ClusterGradient,
    pub delta_norm: f64,
    pub cos_ab: f64,
    /// Difference-test p-value from the compare report, when one existed.
    pub p_difference: Option<f64>,
    pub forced: bool,
    pub candidates: usize,
    pub seed: u64,
    pub report: ClusterReport,
    pub parameters: Parameters,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitStatus {
    Ok,
    Skipped,
    Refused,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitEntry {
    pub unit: String,
    pub status: UnitStatus,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub files: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl UnitEntry {
    pub fn ok(unit: String, files: Vec<String>) -> Self {
        Self {
            unit,
            status: UnitStatus::Ok,
            files,
            verdict: None,
            message: None,
        }
    }

    pub fn with_status(unit: String, status: UnitStatus, message: String) -> Self {
        Self {
            unit,
            status,
            files: Vec::new(),
            verdict: None,
            message: Some(message),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub exit_code: i32,
    pub preprocessing: PreprocessingConfig,
    pub parameters: Parameters,
    pub units: Vec<UnitEntry>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_follows_both_p_values() {
        assert_eq!(
            Verdict::from_p_values(0.001, 0.001, 0.05),
            Verdict::AlignedAndDifferent
        );
        assert_eq!(
            Verdict::from_p_values(0.001, 0.5, 0.05),
            Verdict::AlignedNotDifferent
        );
        assert_eq!(
            Verdict::from_p_values(0.05, 0.001, 0.05),
            Verdict::NotAligned
        );
        assert_eq!(Verdict::NotAligned.exit_code(), 5);
        assert_eq!(
            serde_json::to_string(&Verdict::AlignedNotDifferent).unwrap(),
            "\"aligned_not_different\""
        );
    }
}
