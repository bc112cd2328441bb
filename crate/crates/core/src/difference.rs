//! Where two gradients disagree: the difference gradient `Δg = g_a − g_b`,
//! the vocabulary at either end of it, and silhouette-selected k-means
//! clusters of those words.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::gradient::Gradient;
use crate::seed::{derive_index, replicate_rng};

/// `‖Δg‖` at or below this means the gradients coincide.
pub const COINCIDENT_EPS: f64 = 1e-9;
pub const DEFAULT_CANDIDATES: usize = 250;
pub const MIN_CANDIDATES: usize = 10;
pub const DEFAULT_K_MIN: usize = 2;
pub const DEFAULT_K_MAX: usize = 10;
pub const KMEANS_RESTARTS: usize = 10;
pub const MAX_LLOYD_ITER: usize = 300;
/// Seedings tried per restart before an empty cluster is fatal.
pub const MAX_RESEEDS: usize = 5;

const NORM_EPS: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct DifferenceGradient {
    pub language_a: String,
    pub language_b: String,
    pub dimension: String,
    delta: Array1<f64>,
    delta_unit: Array1<f64>,
    /// Cosine between the two source gradients.
    pub cos_ab: f64,
}

impl DifferenceGradient {
    /// Raw, unnormalized `g_a − g_b`.
    pub fn delta(&self) -> ArrayView1<'_, f64> {
        self.delta.view()
    }

    pub fn delta_unit(&self) -> ArrayView1<'_, f64> {
        self.delta_unit.view()
    }

    pub fn norm(&self) -> f64 {
        self.delta.dot(&self.delta).sqrt()
    }

    pub fn dim(&self) -> usize {
        self.delta.len()
    }
}

pub fn difference_gradient(a: &Gradient, b: &Gradient) -> Result<DifferenceGradient> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let delta = &a.direction() - &b.direction();
    let norm = delta.dot(&delta).sqrt();
    if !(norm > COINCIDENT_EPS) {
        return Err(Error::CoincidentGradients { norm });
    }
    Ok(DifferenceGradient {
        language_a: a.language.clone(),
        language_b: b.language.clone(),
        dimension: a.dimension.clone(),
        delta_unit: &delta / norm,
        delta,
        cos_ab: a.direction().dot(&b.direction()).clamp(-1.0, 1.0),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pole {
    Positive,
    Negative,
}

impl Pole {
    pub fn sign(self) -> f64 {
        match self {
            Pole::Positive => 1.0,
            Pole::Negative => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Pole::Positive => "positive",
            Pole::Negative => "negative",
        }
    }
}

/// The `m` words projecting furthest toward `pole`, best first; ties keep
/// vocabulary order.
pub fn select_pole_candidates(
    space: &EmbeddingSpace,
    dg: &DifferenceGradient,
    pole: Pole,
    m: usize,
) -> Result<Vec<String>> {
    if !space.preprocessing().complete() {
        return Err(Error::NotPreprocessed {
            language: space.language().to_string(),
        });
    }
    if space.dim() != dg.dim() {
        return Err(Error::DimensionMismatch {
            left: space.dim(),
            right: dg.dim(),
        });
    }
    if m < MIN_CANDIDATES {
        return Err(Error::InvalidArgument(format!(
            "at least {MIN_CANDIDATES} pole candidates are required, got {m}"
        )));
    }
    if m > space.len() {
        return Err(Error::TooManyCandidates {
            requested: m,
            available: space.len(),
        });
    }
    let proj = projections(space.vectors(), dg, pole);
    let mut order: Vec<usize> = (0..space.len()).collect();
    order.sort_by(|&i, &j| proj[j].total_cmp(&proj[i]).then(i.cmp(&j)));
    Ok(order[..m]
        .iter()
        .map(|&i| space.vocab()[i].clone())
        .collect())
}

fn projections(rows: ArrayView2<'_, f64>, dg: &DifferenceGradient, pole: Pole) -> Array1<f64> {
    match pole {
        Pole::Positive => rows.dot(&dg.delta_unit),
        Pole::Negative => rows.dot(&-&dg.delta_unit),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterMetrics {
    pub centroid_cos: f64,
    pub coherence: f64,
}

/// Centroid cosine against `Δg` and mean pairwise cosine of the rows.
pub fn cluster_metrics(
    rows: ArrayView2<'_, f64>,
    dg: &DifferenceGradient,
) -> Result<ClusterMetrics> {
    let n = rows.nrows();
    if n == 0 {
        return Err(Error::InvalidArgument("cluster has no rows".into()));
    }
    if rows.ncols() != dg.dim() {
        return Err(Error::DimensionMismatch {
            left: rows.ncols(),
            right: dg.dim(),
        });
    }
    let centroid = rows.mean_axis(Axis(0)).expect("non-empty");
    let norm = centroid.dot(&centroid).sqrt();
    if !(norm > NORM_EPS) {
        return Err(Error::ZeroCentroid);
    }
    let centroid_cos = (centroid.dot(&dg.delta_unit) / norm).clamp(-1.0, 1.0);
    if n == 1 {
        return Ok(ClusterMetrics {
            centroid_cos,
            coherence: 1.0,
        });
    }
    let unit = unit_rows(rows)?;
    let (mut sum, mut lo, mut hi) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        for j in i + 1..n {
            let c = unit.row(i).dot(&unit.row(j)).clamp(-1.0, 1.0);
            sum += c;
            lo = lo.min(c);
            hi = hi.max(c);
        }
    }
    // Rounding in the mean can step just outside the range of its terms.
    let coherence = (sum / (n * (n - 1) / 2) as f64).clamp(lo, hi);
    Ok(ClusterMetrics {
        centroid_cos,
        coherence,
    })
}

fn unit_rows(rows: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let mut out = rows.to_owned();
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        let norm = row.dot(&row).sqrt();
        if !(norm > NORM_EPS) {
            return Err(Error::InvalidArgument(format!("row {i} has zero norm")));
        }
        row /= norm;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub n: usize,
    pub centroid_cos: f64,
    pub coherence: f64,
    /// Members ordered by projection toward the pole, strongest first.
    pub words: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub pole: Pole,
    pub vocabulary_source: String,
    pub k: usize,
    pub silhouette: f64,
    /// Sorted by `centroid_cos`, highest first.
    pub clusters: Vec<Cluster>,
}

/// Best-of-restarts k-means solution for one `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct KMeansFit {
    pub k: usize,
    pub assignment: Vec<usize>,
    pub centroids: Array2<f64>,
    /// Within-cluster sum of squared Euclidean distances.
    pub objective: f64,
    /// Objective reached by every restart that converged without empty clusters.
    pub restart_objectives: Vec<f64>,
}

/// K-means with farthest-first seeding, `restarts` seeded restarts, keeping
/// the lowest objective (earliest restart on ties).
pub fn kmeans(
    rows: ArrayView2<'_, f64>,
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<KMeansFit> {
    let n = rows.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "cannot form {k} clusters from {n} rows"
        )));
    }
    if restarts == 0 {
        return Err(Error::InvalidArgument(
            "k-means needs at least one restart".into(),
        ));
    }
    let runs: Vec<Result<(Vec<usize>, Array2<f64>, f64)>> = (0..restarts)
        .into_par_iter()
        .map(|r| kmeans_once(rows, k, &mut replicate_rng(seed, r as u64)))
        .collect();
    let mut best: Option<(Vec<usize>, Array2<f64>, f64)> = None;
    let mut objectives = Vec::new();
    let mut first_err = None;
    for run in runs {
        match run {
            Ok(fit) => {
                objectives.push(fit.2);
                if best.as_ref().is_none_or(|b| fit.2 < b.2) {
                    best = Some(fit);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match best {
        Some((assignment, centroids, objective)) => Ok(KMeansFit {
            k,
            assignment,
            centroids,
            objective,
            restart_objectives: objectives,
        }),
        None => Err(first_err.expect("at least one restart ran")),
    }
}

fn kmeans_once(
    rows: ArrayView2<'_, f64>,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<usize>, Array2<f64>, f64)> {
    for _ in 0..MAX_RESEEDS {
        let start = rng.random_range(0..rows.nrows());
        let centers = farthest_first(rows, k, start);
        if let Some(fit) = lloyd(rows, centers) {
            return Ok(fit);
        }
    }
    Err(Error::EmptyCluster {
        attempts: MAX_RESEEDS,
    })
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn farthest_first(rows: ArrayView2<'_, f64>, k: usize, start: usize) -> Array2<f64> {
    let n = rows.nrows();
    let mut centers = Array2::zeros((k, rows.ncols()));
    centers.row_mut(0).assign(&rows.row(start));
    let mut nearest: Vec<f64> = (0..n)
        .map(|i| sq_dist(rows.row(i), rows.row(start)))
        .collect();
    for c in 1..k {
        let next = (0..n).fold(0, |b, i| if nearest[i] > nearest[b] { i } else { b });
        centers.row_mut(c).assign(&rows.row(next));
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(sq_dist(rows.row(i), rows.row(next)));
        }
    }
    centers
}

fn nearest_center(row: ArrayView1<'_, f64>, centers: &Array2<f64>) -> (usize, f64) {
    centers
        .rows()
        .into_iter()
        .map(|c| sq_dist(row, c))
        .enumerate()
        .fold(
            (0, f64::INFINITY),
            |b, (i, d)| if d < b.1 { (i, d) } else { b },
        )
}

/// Lloyd iterations to an assignment fixpoint; `None` if a cluster empties.
fn lloyd(
    rows: ArrayView2<'_, f64>,
    mut centers: Array2<f64>,
) -> Option<(Vec<usize>, Array2<f64>, f64)> {
    let (n, k) = (rows.nrows(), centers.nrows());
    let mut assignment = vec![usize::MAX; n];
    for _ in 0..MAX_LLOYD_ITER {
        let next: Vec<usize> = (0..n)
            .map(|i| nearest_center(rows.row(i), &centers).0)
            .collect();
        if next == assignment {
            break;
        }
        assignment = next;
        let mut sums = Array2::<f64>::zeros(centers.dim());
        let mut counts = vec![0usize; k];
        for (i, &c) in assignment.iter().enumerate() {
            let mut s = sums.row_mut(c);
            s += &rows.row(i);
            counts[c] += 1;
        }
        if counts.contains(&0) {
            return None;
        }
        for (mut s, &c) in sums.rows_mut().into_iter().zip(&counts) {
            s /= c as f64;
        }
        centers = sums;
    }
    let objective = (0..n)
        .map(|i| sq_dist(rows.row(i), centers.row(assignment[i])))
        .sum();
    Some((assignment, centers, objective))
}

fn distance_matrix(rows: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = rows.nrows();
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let v = sq_dist(rows.row(i), rows.row(j)).sqrt();
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    d
}

/// Mean silhouette for a precomputed distance matrix. Singleton clusters
/// contribute zero.
fn silhouette(dist: &Array2<f64>, assignment: &[usize], k: usize) -> f64 {
    let n = assignment.len();
    let mut sizes = vec![0usize; k];
    for &c in assignment {
        sizes[c] += 1;
    }
    let mut total = 0.0;
    for i in 0..n {
        let own = assignment[i];
        if sizes[own] < 2 {
            continue;
        }
        let mut sums = vec![0.0; k];
        for j in 0..n {
            sums[assignment[j]] += dist[[i, j]];
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let scale = a.max(b);
        if scale > 0.0 && scale.is_finite() {
            total += (b - a) / scale;
        }
    }
    total / n as f64
}

/// Silhouette-selected clustering of unit rows.
struct Selection {
    k: usize,
    silhouette: f64,
    assignment: Vec<usize>,
}

fn select_clustering(
    unit: ArrayView2<'_, f64>,
    k_min: usize,
    k_max: usize,
    seed: u64,
) -> Result<Selection> {
    let n = unit.nrows();
    if k_min < 2 || k_max < k_min {
        return Err(Error::InvalidArgument(format!(
            "invalid cluster range [{k_min}, {k_max}]"
        )));
    }
    if n < k_min + 1 {
        return Err(Error::InvalidArgument(format!(
            "{n} candidates cannot be split into {k_min} clusters with a defined silhouette"
        )));
    }
    let first = unit.row(0);
    if unit
        .rows()
        .into_iter()
        .all(|r| sq_dist(r, first) <= NORM_EPS * NORM_EPS)
    {
        return Err(Error::DegenerateClusters);
    }
    let dist = distance_matrix(unit);
    let upper = k_max.min(n - 1);
    let fits: Vec<Option<Selection>> = (k_min..=upper)
        .into_par_iter()
        .map(
            |k| match kmeans(unit, k, KMEANS_RESTARTS, derive_index(seed, k as u64)) {
                Ok(fit) => Ok(Some(Selection {
                    k,
                    silhouette: silhouette(&dist, &fit.assignment, k),
                    assignment: fit.assignment,
                })),
                Err(Error::EmptyCluster { .. }) => {
                    log::debug!("k = {k}: every seeding left an empty cluster, skipping");
                    Ok(None)
                }
                Err(e) => Err(e),
            },
        )
        .collect::<Result<_>>()?;
    fits.into_iter()
        .flatten()
        .fold(None, |best: Option<Selection>, s| match best {
            Some(b) if b.silhouette >= s.silhouette => Some(b),
            _ => Some(s),
        })
        .ok_or(Error::DegenerateClusters)
}

fn candidate_rows(space: &EmbeddingSpace, words: &[String]) -> Result<Vec<usize>> {
    words
        .iter()
        .map(|w| {
            space.index_of(w).ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "'{w}' is not in the {} vocabulary",
                    space.language()
                ))
            })
        })
        .collect()
}

fn build_clusters(
    space: &EmbeddingSpace,
    rows: &[usize],
    assignment: &[usize],
    k: usize,
    dg: &DifferenceGradient,
    pole: Pole,
) -> Result<Vec<Cluster>> {
    let proj = projections(space.vectors(), dg, pole);
    let mut clusters = Vec::with_capacity(k);
    for c in 0..k {
        let mut members: Vec<usize> = rows
            .iter()
            .zip(assignment)
            .filter(|(_, &a)| a == c)
            .map(|(&r, _)| r)
            .collect();
        if members.is_empty() {
            continue;
        }
        members.sort_by(|&i, &j| proj[j].total_cmp(&proj[i]).then(i.cmp(&j)));
        let m = cluster_metrics(space.vectors().select(Axis(0), &members).view(), dg)?;
        clusters.push(Cluster {
            n: members.len(),
            centroid_cos: m.centroid_cos,
            coherence: m.coherence,
            words: members.iter().map(|&i| space.vocab()[i].clone()).collect(),
        });
    }
    clusters.sort_by(|a, b| b.centroid_cos.total_cmp(&a.centroid_cos));
    Ok(clusters)
}

/// Clusters one pole's candidate words with k chosen by mean silhouette.
pub fn cluster_pole(
    words: &[String],
    space: &EmbeddingSpace,
    dg: &DifferenceGradient,
    pole: Pole,
    k_min: usize,
    k_max: usize,
    seed: u64,
) -> Result<ClusterReport> {
    let rows = candidate_rows(space, words)?;
    let unit = unit_rows(space.vectors().select(Axis(0), &rows).view())?;
    let sel = select_clustering(unit.view(), k_min, k_max, seed)?;
    Ok(ClusterReport {
        pole,
        vocabulary_source: space.language().to_string(),
        k: sel.k,
        silhouette: sel.silhouette,
        clusters: build_clusters(space, &rows, &sel.assignment, sel.k, dg, pole)?,
    })
}

/// Single-pass alternative: clusters both poles' candidates together and
/// hands each cluster to the pole its centroid leans toward. A candidate may
/// then end up reported under the opposite pole.
pub fn cluster_poles_jointly(
    space: &EmbeddingSpace,
    dg: &DifferenceGradient,
    m: usize,
    k_min: usize,
    k_max: usize,
    seed: u64,
) -> Result<(ClusterReport, ClusterReport)> {
    let mut words = select_pole_candidates(space, dg, Pole::Positive, m)?;
    for w in select_pole_candidates(space, dg, Pole::Negative, m)? {
        if !words.contains(&w) {
            words.push(w);
        }
    }
    let rows = candidate_rows(space, &words)?;
    let unit = unit_rows(space.vectors().select(Axis(0), &rows).view())?;
    let sel = select_clustering(unit.view(), k_min, k_max, seed)?;
    let all = build_clusters(space, &rows, &sel.assignment, sel.k, dg, Pole::Positive)?;
    let (pos, mut neg): (Vec<Cluster>, Vec<Cluster>) =
        all.into_iter().partition(|c| c.centroid_cos >= 0.0);
    let proj = projections(space.vectors(), dg, Pole::Negative);
    for c in &mut neg {
        c.words.sort_by(|a, b| {
            let (i, j) = (space.index_of(a).unwrap(), space.index_of(b).unwrap());
            proj[j].total_cmp(&proj[i]).then(i.cmp(&j))
        });
    }
    let report = |pole, clusters: Vec<Cluster>| ClusterReport {
        pole,
        vocabulary_source: space.language().to_string(),
        k: clusters.len(),
        silhouette: sel.silhouette,
        clusters,
    };
    Ok((report(Pole::Positive, pos), report(Pole::Negative, neg)))
}
