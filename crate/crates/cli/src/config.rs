//! Run configuration: a JSON document naming each language's files, the
//! dimensions to analyze, and every test parameter.
//!
//! Relative paths are resolved against the directory holding the config.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use xssd_core::{difference, inference};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LanguageConfig {
    pub name: String,
    pub embeddings: PathBuf,
    pub lexicon: PathBuf,
    /// Read only the first `max_vocab` embedding rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_vocab: Option<usize>,
}

/// Which preprocessing steps the pipeline applies. A step switched off is
/// taken as already done upstream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessingConfig {
    pub l2_normalize: bool,
    pub remove_first_component: bool,
    /// Remove one principal direction estimated from all languages at once.
    pub joint_removal: bool,
}

impl Default for PreprocessingConfig {
    fn default() -> Self {
        Self {
            l2_normalize: true,
            remove_first_component: true,
            joint_removal: false,
        }
    }
}

/// Gradients whose difference is clustered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterGradient {
    /// Closed-form single component, as used by the tests.
    ClosedForm,
    /// Multi-component fit with K from the one-SE rule.
    Selected,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Parameters {
    pub n_permutations: usize,
    pub bootstrap_replicates: usize,
    pub splits: usize,
    pub test_fraction: f64,
    pub k_max: usize,
    pub folds: usize,
    pub candidates: usize,
    pub k_range: [usize; 2],
    pub alpha: f64,
    pub min_samples: usize,
    pub cluster_gradient: ClusterGradient,
    pub joint_clustering: bool,
}

impl Default for Parameters {
    fn default() -> Self {
        let fit = xssd_core::FitOptions::default();
        Self {
            n_permutations: 1000,
            bootstrap_replicates: 1000,
            splits: fit.splits,
            test_fraction: fit.test_fraction,
            k_max: fit.k_max,
            folds: fit.folds,
            candidates: difference::DEFAULT_CANDIDATES,
            k_range: [difference::DEFAULT_K_MIN, difference::DEFAULT_K_MAX],
            alpha: 0.05,
            min_samples: xssd_core::lexicon::DEFAULT_MIN_SAMPLES,
            cluster_gradient: ClusterGradient::ClosedForm,
            joint_clustering: false,
        }
    }
}

impl Parameters {
    pub fn fit_options(&self) -> xssd_core::FitOptions {
        xssd_core::FitOptions {
            k_max: self.k_max,
            folds: self.folds,
            splits: self.splits,
            test_fraction: self.test_fraction,
        }
    }

    fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(CliError::Validation(m.to_string()));
        if self.n_permutations == 0 {
            return fail("n_permutations must be positive");
        }
        if self.bootstrap_replicates < inference::MIN_BOOTSTRAP {
            return Err(CliError::Validation(format!(
                "bootstrap_replicates must be at least {}",
                inference::MIN_BOOTSTRAP
            )));
        }
        if self.splits < 2 {
            return fail("splits must be at least 2");
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return fail("test_fraction must lie strictly between 0 and 1");
        }
        if self.k_max == 0 || self.folds < 2 {
            return fail("k_max must be positive and folds at least 2");
        }
        if self.candidates < difference::MIN_CANDIDATES {
            return Err(CliError::Validation(format!(
                "candidates must be at least {}",
                difference::MIN_CANDIDATES
            )));
        }
        if self.k_range[0] < 2 || self.k_range[1] < self.k_range[0] {
            return fail("k_range must satisfy 2 <= low <= high");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return fail("alpha must lie strictly between 0 and 1");
        }
        if self.min_samples < 2 {
            return fail("min_samples must be at least 2");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub languages: Vec<LanguageConfig>,
    pub dimensions: Vec<String>,
    /// Language pairs to compare; every pair in config order when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<[String; 2]>>,
    #[serde(default)]
    pub preprocessing: PreprocessingConfig,
    #[serde(default)]
    pub parameters: Parameters,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

/// Names end up in output file names.
fn file_safe(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

fn default_output() -> PathBuf {
    PathBuf::from("xssd_out")
}

impl RunConfig {
    /// Reads a config and resolves its relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut config: RunConfig =
            serde_json::from_str(&text).map_err(|source| CliError::Json {
                path: path.to_path_buf(),
                source,
            })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for lang in &mut config.languages {
            lang.embeddings = base.join(&lang.embeddings);
            lang.lexicon = base.join(&lang.lexicon);
        }
        config.output = base.join(&config.output);
        config.dimensions = config
            .dimensions
            .iter()
            .map(|d| d.trim().to_lowercase())
            .collect();
        Ok(config)
    }

    pub fn language(&self, name: &str) -> Option<&LanguageConfig> {
        self.languages.iter().find(|l| l.name == name)
    }

    /// Pairs to compare, as indices into `languages`.
    pub fn pair_indices(&self) -> Vec<(usize, usize)> {
        let index = |n: &str| {
            self.languages
                .iter()
                .position(|l| l.name == n)
                .expect("validated")
        };
        match &self.pairs {
            Some(pairs) => pairs.iter().map(|[a, b]| (index(a), index(b))).collect(),
            None => {
                let n = self.languages.len();
                (0..n)
                    .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                    .collect()
            }
        }
    }

    /// Checks everything that can be checked before loading data.
    pub fn validate(&self, needs_pairs: bool) -> Result<()> {
        if self.languages.is_empty() {
            return Err(CliError::Validation("no languages configured".into()));
        }
        for (i, lang) in self.languages.iter().enumerate() {
            if !file_safe(&lang.name) {
                return Err(CliError::Validation(format!(
                    "language name {:?} must be non-empty ASCII letters, digits, '-' or '_'",
                    lang.name
                )));
            }
            if self.languages[..i].iter().any(|l| l.name == lang.name) {
                return Err(CliError::Validation(format!(
                    "language {:?} listed twice",
                    lang.name
                )));
            }
            for (what, path) in [("embeddings", &lang.embeddings), ("lexicon", &lang.lexicon)] {
                if !path.is_file() {
                    return Err(CliError::Validation(format!(
                        "{}: {what} file {} does not exist",
                        lang.name,
                        path.display()
                    )));
                }
            }
        }
        if self.dimensions.is_empty() {
            return Err(CliError::Validation("no dimensions configured".into()));
        }
        for (i, dim) in self.dimensions.iter().enumerate() {
            if !file_safe(dim) || self.dimensions[..i].contains(dim) {
                return Err(CliError::Validation(format!(
                    "dimension {dim:?} must be unique, non-empty ASCII letters, digits, '-' or '_'"
                )));
            }
        }
        if let Some(pairs) = &self.pairs {
            for [a, b] in pairs {
                if a == b || self.language(a).is_none() || self.language(b).is_none() {
                    return Err(CliError::Validation(format!(
                        "pair [{a}, {b}] must name two different configured languages"
                    )));
                }
            }
        }
        if needs_pairs && self.pair_indices().is_empty() {
            return Err(CliError::Validation(
                "comparisons need at least two languages".into(),
            ));
        }
        self.parameters.validate()
    }
}
