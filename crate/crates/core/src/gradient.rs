//! Supervised semantic gradients fit with a PLS backend.
//!
//! Two fitting routes exist. [`closed_form_pls1`] is the single-component
//! solution used by every resampling procedure: with `Z` the column-standardized
//! embeddings and `ỹ` the z-scored labels, `β_j = (Zᵀỹ)_j / s_j` and the
//! gradient is `β / ‖β‖`. [`fit_pls`] runs NIPALS deflation for `K`
//! components and is what gets reported per language, with `K` picked by the
//! one-standard-error rule ([`select_k`]) and significance from the corrected
//! resampled t-test ([`corrected_t_test`]).

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::lexicon::{zscore, zscore_with_moments, JoinedSample, Moments};
use crate::seed::replicate_rng;
use crate::stats;

/// Columns whose standard deviation falls at or below this abort the fit.
pub const STD_EPS: f64 = 1e-12;
/// Smallest norm of the unnormalized PLS1 coefficient vector.
pub const BETA_EPS: f64 = 1e-12;
/// Relative residual below which NIPALS stops extracting components.
pub const DEFLATION_EPS: f64 = 1e-12;

/// Column means and population standard deviations.
#[derive(Clone, Debug, PartialEq)]
pub struct StandardizationStats {
    pub means: Array1<f64>,
    pub stds: Array1<f64>,
}

impl StandardizationStats {
    pub fn of(x: ArrayView2<'_, f64>) -> Result<Self> {
        let rows: Vec<usize> = (0..x.nrows()).collect();
        rows_stats(x, &rows)
    }

    pub fn apply(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        (&x - &self.means) / &self.stds
    }
}

fn rows_stats(x: ArrayView2<'_, f64>, rows: &[usize]) -> Result<StandardizationStats> {
    let d = x.ncols();
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no rows to standardize".into()));
    }
    let n = rows.len() as f64;
    let mut means = Array1::<f64>::zeros(d);
    for &r in rows {
        means += &x.row(r);
    }
    means /= n;
    let mut var = Array1::<f64>::zeros(d);
    for &r in rows {
        for ((v, &xv), &m) in var.iter_mut().zip(x.row(r)).zip(&means) {
            *v += (xv - m) * (xv - m);
        }
    }
    let stds = var.mapv(|v| (v / n).sqrt());
    let bad: Vec<usize> = stds
        .iter()
        .enumerate()
        .filter(|(_, s)| !(**s > STD_EPS))
        .map(|(j, _)| j)
        .collect();
    if !bad.is_empty() {
        return Err(Error::ConstantColumns { columns: bad });
    }
    Ok(StandardizationStats { means, stds })
}

/// Column-standardize with population standard deviations.
pub fn standardize(x: ArrayView2<'_, f64>) -> Result<(Array2<f64>, StandardizationStats)> {
    let stats = StandardizationStats::of(x)?;
    Ok((stats.apply(x), stats))
}

/// Corrected resampled t-test summary for one fitted gradient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// Mean held-out R² against the train-mean baseline.
    pub r_squared: f64,
    /// R² of the full-data fit on its own training rows.
    pub r_squared_in_sample: f64,
    /// Mean held-out correlation between predicted and actual labels.
    pub r_pred: f64,
    pub p_value: f64,
    pub t_statistic: f64,
    pub splits: usize,
    pub test_fraction: f64,
    pub split_scores: Vec<f64>,
    pub split_r_pred: Vec<f64>,
}

/// Unit-norm direction in raw embedding coordinates.
#[derive(Clone, Debug)]
pub struct Gradient {
    pub language: String,
    pub dimension: String,
    direction: Array1<f64>,
    components: usize,
    pub fit: Option<FitReport>,
}

impl Gradient {
    /// Normalizes `direction`; fails if it has no length.
    pub fn new(
        language: impl Into<String>,
        dimension: impl Into<String>,
        direction: Array1<f64>,
        components: usize,
    ) -> Result<Self> {
        let norm = direction.dot(&direction).sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::DegenerateGradient);
        }
        Ok(Self {
            language: language.into(),
            dimension: dimension.into(),
            direction: direction / norm,
            components,
            fit: None,
        })
    }

    pub fn direction(&self) -> ArrayView1<'_, f64> {
        self.direction.view()
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn dim(&self) -> usize {
        self.direction.len()
    }

    pub fn with_fit(mut self, fit: FitReport) -> Self {
        self.fit = Some(fit);
        self
    }
}

/// Closed-form single-component direction on a subset of rows.
///
/// `labels[i]` belongs to row `rows[i]`; labels are z-scored here.
pub(crate) fn pls1_direction_rows(
    x: ArrayView2<'_, f64>,
    rows: &[usize],
    labels: &[f64],
) -> Result<Array1<f64>> {
    debug_assert_eq!(rows.len(), labels.len());
    let z = zscore(labels)?;
    let stats = rows_stats(x, rows)?;
    let mut cross = Array1::<f64>::zeros(x.ncols());
    for (&r, &zi) in rows.iter().zip(&z) {
        for ((c, &xv), &m) in cross.iter_mut().zip(x.row(r)).zip(&stats.means) {
            *c += (xv - m) * zi;
        }
    }
    finish_beta(cross, &stats.stds)
}

// cross_j = Σ (x_ij - x̄_j) ỹ_i = s_j (Zᵀỹ)_j, so β_j = cross_j / s_j².
fn finish_beta(mut cross: Array1<f64>, stds: &Array1<f64>) -> Result<Array1<f64>> {
    cross.zip_mut_with(stds, |c, s| *c /= s * s);
    let norm = cross.dot(&cross).sqrt();
    if !(norm > BETA_EPS) || !norm.is_finite() {
        return Err(Error::DegenerateGradient);
    }
    Ok(cross / norm)
}

/// Closed-form single-component PLS1 direction over all rows.
pub fn closed_form_direction(x: ArrayView2<'_, f64>, y: &[f64]) -> Result<Array1<f64>> {
    if x.nrows() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "{} rows but {} labels",
            x.nrows(),
            y.len()
        )));
    }
    let rows: Vec<usize> = (0..y.len()).collect();
    pls1_direction_rows(x, &rows, y)
}

/// K = 1 gradient for a joined sample.
pub fn closed_form_pls1(sample: &JoinedSample) -> Result<Gradient> {
    let dir = closed_form_direction(sample.x.view(), &sample.y)?;
    Gradient::new(&sample.language, &sample.dimension, dir, 1)
}

/// Closed-form PLS1 over a fixed matrix whose labels change between calls,
/// as in label-permutation tests.
pub(crate) struct Pls1Kernel {
    centered: Array2<f64>,
    stds: Array1<f64>,
}

impl Pls1Kernel {
    pub(crate) fn new(x: ArrayView2<'_, f64>) -> Result<Self> {
        let stats = StandardizationStats::of(x)?;
        Ok(Self {
            centered: &x - &stats.means,
            stds: stats.stds,
        })
    }

    /// Direction for labels that are already z-scored.
    pub(crate) fn direction(&self, z: &[f64]) -> Result<Array1<f64>> {
        let cross = self.centered.t().dot(&ArrayView1::from(z));
        finish_beta(cross, &self.stds)
    }
}

/// Fitted multi-component PLS1 regression.
#[derive(Clone, Debug)]
pub struct PlsModel {
    stats: StandardizationStats,
    y_moments: Moments,
    // regression coefficients on standardized inputs, in z-scored label units
    coef_z: Array1<f64>,
    components: usize,
}

impl PlsModel {
    pub fn components(&self) -> usize {
        self.components
    }

    /// Coefficients mapping raw embedding coordinates to raw labels.
    pub fn raw_coefficients(&self) -> Array1<f64> {
        &self.coef_z / &self.stats.stds * self.y_moments.std
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        let z = self.stats.apply(x);
        z.dot(&self.coef_z) * self.y_moments.std + self.y_moments.mean
    }

    /// Unit coefficient direction, oriented so its projections correlate
    /// non-negatively with the training labels.
    fn oriented_direction(&self, x: ArrayView2<'_, f64>, y: &[f64]) -> Result<Array1<f64>> {
        let raw = self.raw_coefficients();
        let norm = raw.dot(&raw).sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::DegenerateGradient);
        }
        let dir = raw / norm;
        let proj = x.dot(&dir);
        let cov = stats::pearson(proj.as_slice().expect("contiguous"), y);
        Ok(if cov < 0.0 { -dir } else { dir })
    }
}

/// NIPALS weights, loadings and label loadings for a run of components.
struct PlsPath {
    stats: StandardizationStats,
    y_moments: Moments,
    weights: Vec<Array1<f64>>,
    loadings: Vec<Array1<f64>>,
    y_loadings: Vec<f64>,
}

impl PlsPath {
    /// Extract up to `max_components`, stopping early once the deflated
    /// residual is exhausted.
    fn fit(x: ArrayView2<'_, f64>, y: &[f64], max_components: usize) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::InvalidArgument(format!(
                "{} rows but {} labels",
                x.nrows(),
                y.len()
            )));
        }
        let (mut e, stats) = standardize(x)?;
        let (z, y_moments) = zscore_with_moments(y)?;
        let mut f = Array1::from(z);
        let f0_norm = f.dot(&f).sqrt();
        let mut w0_norm = None;

        let mut path = Self {
            stats,
            y_moments,
            weights: Vec::new(),
            loadings: Vec::new(),
            y_loadings: Vec::new(),
        };
        for _ in 0..max_components {
            let mut w = e.t().dot(&f);
            let w_norm = w.dot(&w).sqrt();
            let w_ref = *w0_norm.get_or_insert(w_norm);
            let f_norm = f.dot(&f).sqrt();
            if !(w_norm > DEFLATION_EPS * w_ref.max(1.0)) || !(f_norm > DEFLATION_EPS * f0_norm) {
                break;
            }
            w /= w_norm;
            let t = e.dot(&w);
            let tt = t.dot(&t);
            if !(tt > 0.0) {
                break;
            }
            let p = e.t().dot(&t) / tt;
            let q = f.dot(&t) / tt;
            let t_col = t.view().insert_axis(Axis(1));
            let p_row = p.view().insert_axis(Axis(0));
            e -= &t_col.dot(&p_row);
            f.scaled_add(-q, &t);
            path.weights.push(w);
            path.loadings.push(p);
            path.y_loadings.push(q);
        }
        Ok(path)
    }

    fn len(&self) -> usize {
        self.weights.len()
    }

    /// Model using the first `k` components, `1 <= k <= len()`.
    fn model(&self, k: usize) -> PlsModel {
        assert!(k >= 1 && k <= self.len());
        // B = W (PᵀW)⁻¹ q; PᵀW is unit upper triangular for NIPALS.
        let mut r = Array2::<f64>::zeros((k, k));
        for i in 0..k {
            for j in 0..k {
                r[[i, j]] = self.loadings[i].dot(&self.weights[j]);
            }
        }
        let mut c = vec![0.0; k];
        for i in (0..k).rev() {
            let mut acc = self.y_loadings[i];
            for j in i + 1..k {
                acc -= r[[i, j]] * c[j];
            }
            c[i] = acc / r[[i, i]];
        }
        let mut coef_z = Array1::<f64>::zeros(self.stats.means.len());
        for (w, ci) in self.weights.iter().zip(&c) {
            coef_z.scaled_add(*ci, w);
        }
        PlsModel {
            stats: self.stats.clone(),
            y_moments: self.y_moments,
            coef_z,
            components: k,
        }
    }
}

fn max_components(n: usize, d: usize) -> usize {
    d.min(n.saturating_sub(1))
}

/// Iterative PLS1 with exactly `k` components.
pub fn fit_pls(x: ArrayView2<'_, f64>, y: &[f64], k: usize) -> Result<PlsModel> {
    let max = max_components(x.nrows(), x.ncols());
    if k == 0 || k > max {
        return Err(Error::InvalidComponents { requested: k, max });
    }
    let path = PlsPath::fit(x, y, k)?;
    if path.len() < k {
        return Err(Error::ComponentsExhausted {
            requested: k,
            achievable: path.len(),
        });
    }
    Ok(path.model(k))
}

/// `k`-component gradient for a joined sample, plus its predictor.
pub fn fit_pls_gradient(sample: &JoinedSample, k: usize) -> Result<(Gradient, PlsModel)> {
    let model = fit_pls(sample.x.view(), &sample.y, k)?;
    let dir = model.oriented_direction(sample.x.view(), &sample.y)?;
    let g = Gradient::new(&sample.language, &sample.dimension, dir, k)?;
    Ok((g, model))
}

/// Cross-validated error curve and the one-standard-error choice of K.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub k: usize,
    pub folds: usize,
    /// Mean held-out MSE for k = 1, 2, ...
    pub cv_mse: Vec<f64>,
    /// Standard error of each mean across folds.
    pub cv_se: Vec<f64>,
}

/// Smallest `k` whose CV error is within one standard error of the minimum.
pub fn select_k(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    k_max: usize,
    folds: usize,
    seed: u64,
) -> Result<KSelection> {
    let n = y.len();
    if k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be at least 1".into()));
    }
    if folds < 2 || folds > n {
        return Err(Error::InvalidArgument(format!(
            "cannot make {folds} folds from {n} rows"
        )));
    }
    if k_max == 1 {
        return Ok(KSelection {
            k: 1,
            folds,
            cv_mse: Vec::new(),
            cv_se: Vec::new(),
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut replicate_rng(seed, 0));
    let smallest_train = n - n.div_ceil(folds);
    let k_eff = k_max.min(max_components(smallest_train, x.ncols()));
    if k_eff == 0 {
        return Err(Error::InvalidComponents {
            requested: 1,
            max: 0,
        });
    }

    let per_fold: Vec<Vec<f64>> = (0..folds)
        .into_par_iter()
        .map(|fold| -> Result<Vec<f64>> {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|p| p % folds == fold);
            let test: Vec<usize> = test.into_iter().map(|p| order[p]).collect();
            let train: Vec<usize> = train.into_iter().map(|p| order[p]).collect();
            let x_train = x.select(Axis(0), &train);
            let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let x_test = x.select(Axis(0), &test);
            let y_test: Vec<f64> = test.iter().map(|&i| y[i]).collect();
            let path = PlsPath::fit(x_train.view(), &y_train, k_eff)?;
            if path.len() == 0 {
                return Err(Error::ComponentsExhausted {
                    requested: 1,
                    achievable: 0,
                });
            }
            Ok((1..=k_eff)
                .map(|k| {
                    let pred = path.model(k.min(path.len())).predict(x_test.view());
                    pred.iter()
                        .zip(&y_test)
                        .map(|(p, a)| (a - p).powi(2))
                        .sum::<f64>()
                        / y_test.len() as f64
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let cv_mse: Vec<f64> = (0..k_eff)
        .map(|k| stats::mean(&per_fold.iter().map(|f| f[k]).collect::<Vec<_>>()))
        .collect();
    let cv_se: Vec<f64> = (0..k_eff)
        .map(|k| {
            stats::sample_std(&per_fold.iter().map(|f| f[k]).collect::<Vec<_>>())
                / (folds as f64).sqrt()
        })
        .collect();
    let best = (0..k_eff).fold(0, |b, k| if cv_mse[k] < cv_mse[b] { k } else { b });
    let threshold = cv_mse[best] + cv_se[best];
    let k = (0..k_eff).find(|&k| cv_mse[k] <= threshold).unwrap_or(best) + 1;
    Ok(KSelection {
        k,
        folds,
        cv_mse,
        cv_se,
    })
}

/// Nadeau–Bengio corrected resampled t-test of held-out skill.
///
/// Each split fits `k` components on the training part and scores R² on the
/// test part against the training-label mean. The statistic divides the mean
/// skill by `sqrt(var · (1/J + n_test/n_train))` and the p-value is the upper
/// tail of Student's t with `J - 1` degrees of freedom.
pub fn corrected_t_test(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    k: usize,
    splits: usize,
    test_fraction: f64,
    seed: u64,
) -> Result<FitReport> {
    let n = y.len();
    if splits < 2 {
        return Err(Error::InvalidArgument(
            "the t-test needs at least two splits".into(),
        ));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    let n_test = ((n as f64 * test_fraction).round() as usize).max(2);
    if n_test + 2 > n {
        return Err(Error::InvalidArgument(format!(
            "{n} rows cannot be split with fraction {test_fraction}"
        )));
    }
    let n_train = n - n_test;

    let per_split: Vec<(f64, f64)> = (0..splits)
        .into_par_iter()
        .map(|j| {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut replicate_rng(seed, j as u64));
            let (test, train) = order.split_at(n_test);
            let x_train = x.select(Axis(0), train);
            let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let model = fit_pls(x_train.view(), &y_train, k).map_err(|e| Error::SplitFailed {
                split: j,
                source: Box::new(e),
            })?;
            let pred = model.predict(x.select(Axis(0), test).view());
            let pred = pred.as_slice().expect("contiguous");
            let y_test: Vec<f64> = test.iter().map(|&i| y[i]).collect();
            Ok((
                stats::r_squared(pred, &y_test, stats::mean(&y_train)),
                stats::pearson(pred, &y_test),
            ))
        })
        .collect::<Result<_>>()?;
    let (scores, r_preds): (Vec<f64>, Vec<f64>) = per_split.into_iter().unzip();

    let mean = stats::mean(&scores);
    let var = stats::sample_variance(&scores);
    let corrected = var * (1.0 / splits as f64 + n_test as f64 / n_train as f64);
    let (t, p) = if corrected > 0.0 {
        let t = mean / corrected.sqrt();
        let dist = StudentsT::new(0.0, 1.0, (splits - 1) as f64).expect("valid degrees of freedom");
        (t, dist.sf(t))
    } else if mean > 0.0 {
        (f64::INFINITY, 0.0)
    } else {
        (f64::NEG_INFINITY, 1.0)
    };

    let full = fit_pls(x, y, k)?;
    let fitted = full.predict(x);
    let in_sample = stats::r_squared(fitted.as_slice().expect("contiguous"), y, stats::mean(y));

    Ok(FitReport {
        r_squared: mean,
        r_squared_in_sample: in_sample,
        r_pred: stats::mean(&r_preds),
        p_value: p.clamp(1e-300, 1.0),
        t_statistic: t,
        splits,
        test_fraction,
        split_scores: scores,
        split_r_pred: r_preds,
    })
}

/// Settings for [`fit_gradient`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub k_max: usize,
    pub folds: usize,
    pub splits: usize,
    pub test_fraction: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            k_max: 10,
            folds: 5,
            splits: 30,
            test_fraction: 0.2,
        }
    }
}

/// Full reporting fit: K by the one-SE rule, PLS gradient, t-test.
#[derive(Clone, Debug)]
pub struct FittedGradient {
    pub gradient: Gradient,
    pub model: PlsModel,
    pub selection: KSelection,
}

pub fn fit_gradient(
    sample: &JoinedSample,
    options: &FitOptions,
    seed: u64,
) -> Result<FittedGradient> {
    let selection = select_k(
        sample.x.view(),
        &sample.y,
        options.k_max,
        options.folds,
        seed,
    )?;
    let (gradient, model) = fit_pls_gradient(sample, selection.k)?;
    let report = corrected_t_test(
        sample.x.view(),
        &sample.y,
        selection.k,
        options.splits,
        options.test_fraction,
        crate::seed::derive(seed, "t-test"),
    )?;
    Ok(FittedGradient {
        gradient: gradient.with_fit(report),
        model,
        selection,
    })
}
