//! Synthetic aligned embedding pairs with planted gradients.
//!
//! Both spaces share a pool of Gaussian "concept" vectors, whitened so the
//! pool's sample covariance is exactly the identity; language `a`
//! names concept `i` `a00017`-style and language `b` likewise, optionally with
//! independent alignment noise per space. Each lexicon samples concepts from
//! the pool and labels them `⟨x, w⟩ + noise` with its own true direction.
//! The two true directions lie in one plane at exactly the requested angle.
//!
//! Every emitted number is rounded to 9 significant digits first, so the
//! written files reload to the same values.

use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::lexicon::NormLexicon;
use crate::seed::derive;

/// Word clusters planted around both ends of the difference direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    /// Blobs per pole.
    pub per_pole: usize,
    /// Words per blob.
    pub size: usize,
    /// Per-coordinate spread around a unit-norm blob center.
    pub spread: f64,
    /// Sideways offset of each center from the pole axis.
    pub offset: f64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        Self {
            per_pole: 3,
            size: 20,
            spread: 0.01,
            offset: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub d: usize,
    pub n_a: usize,
    pub n_b: usize,
    pub angle_deg: f64,
    pub noise_sigma: f64,
    pub vocab_size: usize,
    pub seed: u64,
    #[serde(default = "default_language_a")]
    pub language_a: String,
    #[serde(default = "default_language_b")]
    pub language_b: String,
    #[serde(default = "default_dimension")]
    pub dimension: String,
    /// Fraction of the smaller lexicon's concepts also in the larger one.
    #[serde(default = "one")]
    pub lexicon_overlap: f64,
    /// Std of per-space Gaussian noise added to shared concept vectors.
    #[serde(default)]
    pub alignment_noise: f64,
    /// Extra std along a common direction orthogonal to the true gradients.
    #[serde(default)]
    pub anisotropy: f64,
    #[serde(default = "one")]
    pub label_scale: f64,
    #[serde(default)]
    pub label_shift: f64,
    #[serde(default)]
    pub blobs: Option<BlobSpec>,
}

fn default_language_a() -> String {
    "a".into()
}

fn default_language_b() -> String {
    "b".into()
}

fn default_dimension() -> String {
    "valence".into()
}

fn one() -> f64 {
    1.0
}

impl SynthSpec {
    /// Spec with every optional knob at its default.
    pub fn new(
        d: usize,
        n_a: usize,
        n_b: usize,
        angle_deg: f64,
        noise_sigma: f64,
        vocab_size: usize,
        seed: u64,
    ) -> Self {
        Self {
            d,
            n_a,
            n_b,
            angle_deg,
            noise_sigma,
            vocab_size,
            seed,
            language_a: default_language_a(),
            language_b: default_language_b(),
            dimension: default_dimension(),
            lexicon_overlap: 1.0,
            alignment_noise: 0.0,
            anisotropy: 0.0,
            label_scale: 1.0,
            label_shift: 0.0,
            blobs: None,
        }
    }

    fn shared_concepts(&self) -> usize {
        (self.lexicon_overlap * self.n_a.min(self.n_b) as f64).round() as usize
    }

    fn frame_size(&self) -> usize {
        2 + usize::from(self.anisotropy > 0.0) + self.blobs.as_ref().map_or(0, |b| 2 * b.per_pole)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.d < 2 {
            return bad(format!("d must be at least 2, got {}", self.d));
        }
        if !(0.0..=180.0).contains(&self.angle_deg) {
            return bad(format!(
                "angle_deg must lie in [0, 180], got {}",
                self.angle_deg
            ));
        }
        for (name, v) in [
            ("noise_sigma", self.noise_sigma),
            ("alignment_noise", self.alignment_noise),
            ("anisotropy", self.anisotropy),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!(
                    "{name} must be a finite non-negative number, got {v}"
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.lexicon_overlap) {
            return bad(format!(
                "lexicon_overlap must lie in [0, 1], got {}",
                self.lexicon_overlap
            ));
        }
        if self.label_scale == 0.0 || !self.label_scale.is_finite() || !self.label_shift.is_finite()
        {
            return bad("label_scale must be finite and non-zero, label_shift finite".into());
        }
        if self.n_a < 2 || self.n_b < 2 {
            return bad("each lexicon needs at least two words".into());
        }
        let needed = self.n_a + self.n_b - self.shared_concepts();
        if needed > self.vocab_size {
            return bad(format!(
                "lexicons need {needed} distinct concepts but vocab_size is {}",
                self.vocab_size
            ));
        }
        if self.language_a == self.language_b {
            return bad("the two languages need distinct names".into());
        }
        if let Some(b) = &self.blobs {
            if b.per_pole == 0 || b.size == 0 || !(b.spread >= 0.0) || !(b.offset > 0.0) {
                return bad(
                    "blobs need positive counts, a non-negative spread and a positive offset"
                        .into(),
                );
            }
            if self.angle_deg == 0.0 {
                return bad(
                    "blobs sit on the difference direction, which is undefined at angle 0".into(),
                );
            }
        }
        if self.vocab_size <= self.d {
            return bad(format!(
                "vocab_size must exceed d = {} so the pool can be whitened",
                self.d
            ));
        }
        if self.frame_size() > self.d {
            return bad(format!(
                "d = {} is too small for the requested planted directions",
                self.d
            ));
        }
        Ok(())
    }
}

/// Generated spaces and lexicons plus the planted ground truth.
#[derive(Clone, Debug)]
pub struct SynthData {
    pub spec: SynthSpec,
    pub space_a: EmbeddingSpace,
    pub lexicon_a: NormLexicon,
    pub space_b: EmbeddingSpace,
    pub lexicon_b: NormLexicon,
    pub w_a: Array1<f64>,
    pub w_b: Array1<f64>,
    /// Direction that carries the injected anisotropy, if any.
    pub common_direction: Option<Array1<f64>>,
    /// Planted blob words and their blob index; blobs `0..per_pole` sit on
    /// the positive pole, the rest on the negative one. Identical names are
    /// used in both spaces after the language prefix.
    pub blobs_a: Vec<(String, usize)>,
    pub blobs_b: Vec<(String, usize)>,
}

/// Serialized truth written next to generated files.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthTruth {
    pub spec: SynthSpec,
    pub w_a: Vec<f64>,
    pub w_b: Vec<f64>,
    pub cos_ab: f64,
    pub blobs_a: Vec<(String, usize)>,
    pub blobs_b: Vec<(String, usize)>,
}

/// Paths of files written by [`SynthData::write_to_dir`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthFiles {
    pub embeddings_a: PathBuf,
    pub lexicon_a: PathBuf,
    pub embeddings_b: PathBuf,
    pub lexicon_b: PathBuf,
    pub truth: PathBuf,
}

impl SynthData {
    pub fn truth(&self) -> SynthTruth {
        SynthTruth {
            spec: self.spec.clone(),
            w_a: self.w_a.to_vec(),
            w_b: self.w_b.to_vec(),
            cos_ab: self.w_a.dot(&self.w_b),
            blobs_a: self.blobs_a.clone(),
            blobs_b: self.blobs_b.clone(),
        }
    }

    pub fn write_to_dir(&self, dir: impl AsRef<Path>) -> Result<SynthFiles> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let (la, lb) = (&self.spec.language_a, &self.spec.language_b);
        let files = SynthFiles {
            embeddings_a: dir.join(format!("{la}.vec")),
            lexicon_a: dir.join(format!("{la}.csv")),
            embeddings_b: dir.join(format!("{lb}.vec")),
            lexicon_b: dir.join(format!("{lb}.csv")),
            truth: dir.join("truth.json"),
        };
        self.space_a.write_to_path(&files.embeddings_a)?;
        self.lexicon_a.write_to_path(&files.lexicon_a)?;
        self.space_b.write_to_path(&files.embeddings_b)?;
        self.lexicon_b.write_to_path(&files.lexicon_b)?;
        let json = serde_json::to_string_pretty(&self.truth())?;
        std::fs::write(&files.truth, json + "\n").map_err(|e| Error::io(&files.truth, e))?;
        Ok(files)
    }
}

/// Rounds to 9 significant digits.
pub fn round_sig9(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{v:.8e}").parse().expect("formatted float parses")
}

fn rng_for(seed: u64, part: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, part))
}

fn gaussian_vec(d: usize, rng: &mut ChaCha8Rng) -> Array1<f64> {
    Array1::from_shape_fn(d, |_| StandardNormal.sample(rng))
}

/// `(cos θ, sin θ)` with exact values at multiples of 90°.
fn cos_sin_deg(deg: f64) -> (f64, f64) {
    match deg {
        d if d == 0.0 => (1.0, 0.0),
        d if d == 90.0 => (0.0, 1.0),
        d if d == 180.0 => (-1.0, 0.0),
        d => {
            let r = d.to_radians();
            (r.cos(), r.sin())
        }
    }
}

/// Rotates coordinate pairs by 90°: `(x0, x1, x2, x3, …) ↦ (−x1, x0, −x3, x2, …)`.
/// The image is orthogonal to the input with every pairwise product
/// cancelling exactly. An odd trailing coordinate maps to zero.
fn quarter_turn(v: &Array1<f64>) -> Array1<f64> {
    let mut out = Array1::zeros(v.len());
    for p in 0..v.len() / 2 {
        out[2 * p] = -v[2 * p + 1];
        out[2 * p + 1] = v[2 * p];
    }
    out
}

/// Orthonormal directions orthogonal to every vector in `basis` (and to
/// each other), by Gram-Schmidt on Gaussian draws.
fn orthogonal_directions(
    basis: &[Array1<f64>],
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Array1<f64>> {
    let d = basis[0].len();
    let mut all: Vec<Array1<f64>> = basis.to_vec();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut v = gaussian_vec(d, rng);
        // Two passes keep the result orthogonal to rounding level.
        for _ in 0..2 {
            for b in &all {
                let c = v.dot(b) / b.dot(b);
                v.scaled_add(-c, b);
            }
        }
        let norm = v.dot(&v).sqrt();
        if norm > 1e-6 {
            v /= norm;
            all.push(v.clone());
            out.push(v);
        }
    }
    out
}

/// Centers the columns and orthogonalizes them (modified Gram-Schmidt, two
/// passes), scaled so each column has unit population variance.
fn whiten(mut g: Array2<f64>) -> Array2<f64> {
    let (n, d) = g.dim();
    let mean = g.mean_axis(ndarray::Axis(0)).expect("non-empty pool");
    g -= &mean;
    for j in 0..d {
        for _ in 0..2 {
            for k in 0..j {
                let c = g.column(j).dot(&g.column(k));
                let prev = g.column(k).to_owned();
                g.column_mut(j).scaled_add(-c, &prev);
            }
        }
        let norm = g.column(j).dot(&g.column(j)).sqrt();
        g.column_mut(j).mapv_inplace(|v| v / norm);
    }
    g * (n as f64).sqrt()
}

pub fn generate(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let d = spec.d;

    let mut frame_rng = rng_for(spec.seed, "frame");
    let mut w_a = gaussian_vec(d, &mut frame_rng);
    if d % 2 == 1 {
        w_a[d - 1] = 0.0;
    }
    w_a /= w_a.dot(&w_a).sqrt();
    let turned = quarter_turn(&w_a);
    let (c, s) = cos_sin_deg(spec.angle_deg);
    let w_b = &w_a * c + &turned * s;

    let extra = orthogonal_directions(
        &[w_a.clone(), turned.clone()],
        spec.frame_size() - 2,
        &mut frame_rng,
    );
    let mut extra = extra.into_iter();
    let common_direction = (spec.anisotropy > 0.0).then(|| extra.next().expect("frame sized"));

    let mut concept_rng = rng_for(spec.seed, "concepts");
    let mut concepts = whiten(Array2::from_shape_fn((spec.vocab_size, d), |_| {
        StandardNormal.sample(&mut concept_rng)
    }));
    if let Some(dir) = &common_direction {
        let mut aniso_rng = rng_for(spec.seed, "anisotropy");
        for mut row in concepts.rows_mut() {
            let g: f64 = StandardNormal.sample(&mut aniso_rng);
            row.scaled_add(spec.anisotropy * g, dir);
        }
    }

    let mut blob_rows = Vec::new();
    let mut blob_ids = Vec::new();
    if let Some(b) = &spec.blobs {
        let diff = &w_a - &w_b;
        let axis = &diff / diff.dot(&diff).sqrt();
        let offsets: Vec<Array1<f64>> = extra.by_ref().take(2 * b.per_pole).collect();
        let mut blob_rng = rng_for(spec.seed, "blobs");
        let scale = (d as f64).sqrt();
        for (id, offset) in offsets.iter().enumerate() {
            let pole = if id < b.per_pole { 1.0 } else { -1.0 };
            let mut center = &axis * pole + offset * b.offset;
            center /= center.dot(&center).sqrt();
            for _ in 0..b.size {
                let row = (&center + &(gaussian_vec(d, &mut blob_rng) * b.spread)) * scale;
                blob_rows.push(row);
                blob_ids.push(id);
            }
        }
    }

    let build_space = |lang: &str, part: &str| -> Result<(EmbeddingSpace, Vec<(String, usize)>)> {
        let mut rng = rng_for(spec.seed, part);
        let noise = spec.alignment_noise;
        let total = spec.vocab_size + blob_rows.len();
        let mut vectors = Array2::zeros((total, d));
        for (i, mut row) in vectors.rows_mut().into_iter().enumerate() {
            let base = if i < spec.vocab_size {
                concepts.row(i).to_owned()
            } else {
                blob_rows[i - spec.vocab_size].clone()
            };
            for (v, &b) in row.iter_mut().zip(&base) {
                let e: f64 = if noise > 0.0 {
                    StandardNormal.sample(&mut rng)
                } else {
                    0.0
                };
                *v = round_sig9(b + noise * e);
            }
        }
        let mut vocab: Vec<String> = (0..spec.vocab_size)
            .map(|i| concept_word(lang, i))
            .collect();
        let mut blobs = Vec::new();
        for (j, &id) in blob_ids.iter().enumerate() {
            let word = format!("{lang}blob{id}x{j:04}");
            vocab.push(word.clone());
            blobs.push((word, id));
        }
        Ok((EmbeddingSpace::new(lang, vocab, vectors)?, blobs))
    };
    let (space_a, blobs_a) = build_space(&spec.language_a, "align-a")?;
    let (space_b, blobs_b) = build_space(&spec.language_b, "align-b")?;

    let mut order: Vec<usize> = (0..spec.vocab_size).collect();
    order.shuffle(&mut rng_for(spec.seed, "lexicon"));
    let shared = spec.shared_concepts();
    let (big_is_a, small_n) = if spec.n_a >= spec.n_b {
        (true, spec.n_b)
    } else {
        (false, spec.n_a)
    };
    let big_n = spec.n_a.max(spec.n_b);
    let big: Vec<usize> = order[..big_n].to_vec();
    let mut small: Vec<usize> = order[..shared].to_vec();
    small.extend_from_slice(&order[big_n..big_n + (small_n - shared)]);
    let (mut rows_a, mut rows_b) = if big_is_a { (big, small) } else { (small, big) };
    rows_a.sort_unstable();
    rows_b.sort_unstable();

    let label = |space: &EmbeddingSpace,
                 rows: &[usize],
                 w: &Array1<f64>,
                 part: &str|
     -> Result<NormLexicon> {
        let mut rng = rng_for(spec.seed, part);
        let noise = Normal::new(0.0, spec.noise_sigma)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let entries: Vec<(String, Vec<f64>)> = rows
            .iter()
            .map(|&i| {
                let y = space.vectors().row(i).dot(w) + noise.sample(&mut rng);
                let y = round_sig9(spec.label_scale * y + spec.label_shift);
                (space.vocab()[i].clone(), vec![y])
            })
            .collect();
        NormLexicon::new(space.language(), vec![spec.dimension.clone()], entries)
    };
    let lexicon_a = label(&space_a, &rows_a, &w_a, "labels-a")?;
    let lexicon_b = label(&space_b, &rows_b, &w_b, "labels-b")?;

    Ok(SynthData {
        spec: spec.clone(),
        space_a,
        lexicon_a,
        space_b,
        lexicon_b,
        w_a,
        w_b,
        common_direction,
        blobs_a,
        blobs_b,
    })
}

fn concept_word(lang: &str, i: usize) -> String {
    format!("{lang}{i:05}")
}
