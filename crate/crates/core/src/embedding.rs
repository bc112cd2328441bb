//! Word-vector spaces: text-format loading, lookup, and the anisotropy
//! preprocessing applied before any gradient is fit.
//!
//! The text format is the GloVe/word2vec one: an optional `V d` header line,
//! then one `word f1 f2 ... fd` line per word.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Convergence tolerance on the change of the power-iteration direction.
pub const POWER_TOLERANCE: f64 = 1e-10;
const POWER_MAX_ITER: usize = 50_000;
const POWER_SEED: u64 = 0x5eed_0f_f1_c0;

/// Which preprocessing steps have been applied to a space.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Preprocessing {
    pub l2_normalized: bool,
    pub first_pc_removed: bool,
}

impl Preprocessing {
    pub fn complete(&self) -> bool {
        self.l2_normalized && self.first_pc_removed
    }
}

/// Vocabulary plus a dense `V x d` matrix, row `i` belonging to `vocab[i]`.
#[derive(Clone, Debug)]
pub struct EmbeddingSpace {
    language: String,
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Array2<f64>,
    preprocessing: Preprocessing,
}

impl EmbeddingSpace {
    pub fn new(
        language: impl Into<String>,
        vocab: Vec<String>,
        vectors: Array2<f64>,
    ) -> Result<Self> {
        if vocab.len() != vectors.nrows() {
            return Err(Error::InvalidArgument(format!(
                "{} words but {} vector rows",
                vocab.len(),
                vectors.nrows()
            )));
        }
        if vectors.ncols() < 2 {
            return Err(Error::InvalidArgument(format!(
                "embedding dimensionality must be at least 2, got {}",
                vectors.ncols()
            )));
        }
        let mut index = HashMap::with_capacity(vocab.len());
        for (i, word) in vocab.iter().enumerate() {
            if index.insert(word.clone(), i).is_some() {
                return Err(Error::DuplicateWord {
                    word: word.clone(),
                    line: i + 1,
                });
            }
        }
        Ok(Self {
            language: language.into(),
            vocab,
            index,
            vectors,
            preprocessing: Preprocessing::default(),
        })
    }

    /// Parse the text format. At most `max_vocab` rows are kept, in file order.
    pub fn read<R: BufRead>(
        reader: R,
        language: impl Into<String>,
        max_vocab: Option<usize>,
    ) -> Result<Self> {
        if max_vocab == Some(0) {
            return Err(Error::InvalidArgument("max_vocab must be positive".into()));
        }
        let limit = max_vocab.unwrap_or(usize::MAX);
        let mut vocab = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut data: Vec<f64> = Vec::new();
        let mut dim: Option<usize> = None;
        let mut first_content = true;

        for (lineno, line) in reader.lines().enumerate() {
            let lineno = lineno + 1;
            let line = line.map_err(|e| Error::Parse {
                line: lineno,
                message: e.to_string(),
            })?;
            let mut tokens = line.split_ascii_whitespace();
            let Some(word) = tokens.next() else { continue };
            let rest: Vec<&str> = tokens.collect();

            if first_content {
                first_content = false;
                if rest.len() == 1 {
                    if let (Ok(_), Ok(d)) = (word.parse::<usize>(), rest[0].parse::<usize>()) {
                        dim = Some(d);
                        continue;
                    }
                }
            }
            if vocab.len() >= limit {
                break;
            }

            let expected = *dim.get_or_insert(rest.len());
            if rest.len() != expected {
                return Err(Error::Dimensionality {
                    line: lineno,
                    expected,
                    found: rest.len(),
                });
            }
            if expected < 2 {
                return Err(Error::Dimensionality {
                    line: lineno,
                    expected: 2,
                    found: expected,
                });
            }
            if index.contains_key(word) {
                return Err(Error::DuplicateWord {
                    word: word.to_string(),
                    line: lineno,
                });
            }
            for tok in rest {
                let v: f64 = tok.parse().map_err(|_| Error::Parse {
                    line: lineno,
                    message: format!("cannot parse {tok:?} as a number"),
                })?;
                data.push(v);
            }
            index.insert(word.to_string(), vocab.len());
            vocab.push(word.to_string());
        }

        let d = dim.unwrap_or(0);
        if vocab.is_empty() {
            return Err(Error::InvalidArgument("no word vectors found".into()));
        }
        let vectors = Array2::from_shape_vec((vocab.len(), d), data).expect("row lengths checked");
        Ok(Self {
            language: language.into(),
            vocab,
            index,
            vectors,
            preprocessing: Preprocessing::default(),
        })
    }

    /// Write the text format with a `V d` header.
    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.len(), self.dim())?;
        for (word, row) in self.vocab.iter().zip(self.vectors.rows()) {
            write!(w, "{word}")?;
            for v in row {
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn write_to_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn vectors(&self) -> ArrayView2<'_, f64> {
        self.vectors.view()
    }

    pub fn preprocessing(&self) -> Preprocessing {
        self.preprocessing
    }

    /// Marks steps as already applied, for vectors saved after preprocessing.
    pub fn assume_preprocessed(mut self, preprocessing: Preprocessing) -> Self {
        self.preprocessing = preprocessing;
        self
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// Case-sensitive lookup; a miss is `None`.
    pub fn lookup(&self, word: &str) -> Option<ArrayView1<'_, f64>> {
        self.index_of(word).map(|i| self.vectors.row(i))
    }

    /// Scale every row to unit Euclidean norm.
    pub fn l2_normalize(mut self) -> Result<Self> {
        for (i, mut row) in self.vectors.rows_mut().into_iter().enumerate() {
            let norm = row.dot(&row).sqrt();
            if norm == 0.0 || !norm.is_finite() {
                return Err(Error::ZeroNorm {
                    word: self.vocab[i].clone(),
                });
            }
            row.mapv_inplace(|v| v / norm);
        }
        self.preprocessing.l2_normalized = true;
        Ok(self)
    }

    /// Project out the top principal direction of the mean-centered rows:
    /// `v <- v - <v - mu, u1> u1`.
    ///
    /// Rows are not renormalized here, so the `l2_normalized` flag is cleared;
    /// [`EmbeddingSpace::preprocess`] renormalizes afterwards.
    pub fn remove_first_component(mut self) -> Result<Self> {
        if self.len() < 2 {
            return Err(Error::InvalidArgument(
                "component removal needs at least two rows".into(),
            ));
        }
        let mean = self.vectors.mean_axis(Axis(0)).expect("non-empty");
        let centered = &self.vectors - &mean;
        let u = top_principal_direction(centered.view())?;
        project_out(&mut self.vectors, &mean, &u);
        self.preprocessing.first_pc_removed = true;
        self.preprocessing.l2_normalized = false;
        Ok(self)
    }

    /// Normalize, remove the first component, renormalize.
    pub fn preprocess(self) -> Result<Self> {
        self.l2_normalize()?
            .remove_first_component()?
            .l2_normalize()
    }
}

/// Load a word-vector text file.
pub fn load_embeddings(
    path: impl AsRef<Path>,
    language: &str,
    max_vocab: Option<usize>,
) -> Result<EmbeddingSpace> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    EmbeddingSpace::read(BufReader::new(file), language, max_vocab)
}

/// Remove one principal direction computed over the concatenation of all
/// spaces, using the pooled mean. Each space is then processed identically.
pub fn remove_first_component_jointly(spaces: Vec<EmbeddingSpace>) -> Result<Vec<EmbeddingSpace>> {
    let Some(first) = spaces.first() else {
        return Ok(spaces);
    };
    let d = first.dim();
    for s in &spaces {
        if s.dim() != d {
            return Err(Error::DimensionMismatch {
                left: d,
                right: s.dim(),
            });
        }
    }
    let total: usize = spaces.iter().map(EmbeddingSpace::len).sum();
    if total < 2 {
        return Err(Error::InvalidArgument(
            "component removal needs at least two rows".into(),
        ));
    }
    let views: Vec<_> = spaces.iter().map(|s| s.vectors.view()).collect();
    let stacked = ndarray::concatenate(Axis(0), &views).expect("equal widths");
    let mean = stacked.mean_axis(Axis(0)).expect("non-empty");
    let u = top_principal_direction((&stacked - &mean).view())?;
    Ok(spaces
        .into_iter()
        .map(|mut s| {
            project_out(&mut s.vectors, &mean, &u);
            s.preprocessing.first_pc_removed = true;
            s.preprocessing.l2_normalized = false;
            s
        })
        .collect())
}

fn project_out(vectors: &mut Array2<f64>, mean: &Array1<f64>, u: &Array1<f64>) {
    for mut row in vectors.rows_mut() {
        let coef: f64 = row
            .iter()
            .zip(mean)
            .zip(u)
            .map(|((v, m), ui)| (v - m) * ui)
            .sum();
        row.scaled_add(-coef, u);
    }
}

/// Unit top eigenvector of `centeredᵀ centered`, by power iteration from a
/// fixed-seed start.
pub fn top_principal_direction(centered: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
    let n = centered.nrows().max(1) as f64;
    let cov = centered.t().dot(&centered) / n;
    let trace: f64 = cov.diag().sum();
    if !(trace > 1e-24) {
        return Err(Error::DegenerateVariance);
    }

    let d = cov.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_SEED);
    let mut u: Array1<f64> = Array1::from_shape_fn(d, |_| rng.random_range(-1.0..1.0));
    u /= u.dot(&u).sqrt();

    for _ in 0..POWER_MAX_ITER {
        let mut next = cov.dot(&u);
        let norm = next.dot(&next).sqrt();
        if !(norm > 0.0) {
            return Err(Error::DegenerateVariance);
        }
        next /= norm;
        let delta = (&next - &u).dot(&(&next - &u)).sqrt();
        u = next;
        if delta < POWER_TOLERANCE {
            return Ok(u);
        }
    }
    log::warn!(
        "power iteration did not reach tolerance {POWER_TOLERANCE:e} in {POWER_MAX_ITER} steps; \
         top eigenvalue is nearly degenerate"
    );
    Ok(u)
}
