//! Rating lexicons and their join with an embedding space.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::compensated::DoubleDouble;
use ndarray::Array2;
use serde::Serialize;

use crate::embedding::EmbeddingSpace;
use crate::error::{Error, Result};

/// Default floor on joined sample size for real fits.
pub const DEFAULT_MIN_SAMPLES: usize = 50;

/// Per-language table of word scores on one or more affect dimensions.
#[derive(Clone, Debug)]
pub struct NormLexicon {
    language: String,
    dimensions: Vec<String>,
    words: Vec<String>,
    // row-major, words x dimensions
    scores: Vec<f64>,
    index: HashMap<String, usize>,
    duplicates_dropped: usize,
}

impl NormLexicon {
    /// Build from entries, lowercasing words and keeping the first
    /// occurrence of each.
    pub fn new(
        language: impl Into<String>,
        dimensions: Vec<String>,
        entries: impl IntoIterator<Item = (String, Vec<f64>)>,
    ) -> Result<Self> {
        if dimensions.is_empty() {
            return Err(Error::MissingHeader);
        }
        let dimensions: Vec<String> = dimensions
            .into_iter()
            .map(|d| d.trim().to_lowercase())
            .collect();
        let mut lex = Self {
            language: language.into(),
            dimensions,
            words: Vec::new(),
            scores: Vec::new(),
            index: HashMap::new(),
            duplicates_dropped: 0,
        };
        for (word, scores) in entries {
            lex.push(word, scores)?;
        }
        if lex.words.is_empty() {
            return Err(Error::EmptyLexicon);
        }
        Ok(lex)
    }

    fn push(&mut self, word: String, scores: Vec<f64>) -> Result<()> {
        if scores.len() != self.dimensions.len() {
            return Err(Error::InvalidArgument(format!(
                "word {word:?} has {} scores for {} dimensions",
                scores.len(),
                self.dimensions.len()
            )));
        }
        let word = word.trim().to_lowercase();
        if self.index.contains_key(&word) {
            log::warn!(
                "{}: duplicate lexicon word {word:?}; keeping the first entry",
                self.language
            );
            self.duplicates_dropped += 1;
            return Ok(());
        }
        self.index.insert(word.clone(), self.words.len());
        self.words.push(word);
        self.scores.extend(scores);
        Ok(())
    }

    /// Parse CSV with a `word,<dim1>[,<dim2>...]` header.
    pub fn read<R: Read>(reader: R, language: impl Into<String>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut records = rdr.records();
        let header = match records.next() {
            None => return Err(Error::EmptyLexicon),
            Some(h) => h?,
        };
        if header.len() < 2 || !header[0].eq_ignore_ascii_case("word") {
            return Err(Error::MissingHeader);
        }
        let dimensions: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut lex = Self {
            language: language.into(),
            dimensions: dimensions.iter().map(|d| d.to_lowercase()).collect(),
            words: Vec::new(),
            scores: Vec::new(),
            index: HashMap::new(),
            duplicates_dropped: 0,
        };
        for record in records {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            if record.iter().all(str::is_empty) {
                continue;
            }
            if record.len() != header.len() {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {} fields, found {}", header.len(), record.len()),
                });
            }
            let mut scores = Vec::with_capacity(dimensions.len());
            for (field, column) in record.iter().skip(1).zip(&dimensions) {
                match field.parse::<f64>() {
                    Ok(v) if v.is_finite() => scores.push(v),
                    _ => {
                        return Err(Error::NonNumericScore {
                            line,
                            column: column.clone(),
                            value: field.to_string(),
                        })
                    }
                }
            }
            lex.push(record[0].to_string(), scores)?;
        }
        if lex.words.is_empty() {
            return Err(Error::EmptyLexicon);
        }
        Ok(lex)
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["word".to_string()];
        header.extend(self.dimensions.iter().cloned());
        wtr.write_record(&header)?;
        let k = self.dimensions.len();
        for (i, word) in self.words.iter().enumerate() {
            let mut rec = vec![word.clone()];
            rec.extend(
                self.scores[i * k..(i + 1) * k]
                    .iter()
                    .map(|v| v.to_string()),
            );
            wtr.write_record(&rec)?;
        }
        wtr.flush().map_err(|e| Error::io("<lexicon>", e))?;
        Ok(())
    }

    pub fn write_to_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(file)
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn dimensions(&self) -> &[String] {
        &self.dimensions
    }

    pub fn has_dimension(&self, dimension: &str) -> bool {
        self.dimension_index(dimension).is_some()
    }

    fn dimension_index(&self, dimension: &str) -> Option<usize> {
        let dimension = dimension.to_lowercase();
        self.dimensions.iter().position(|d| *d == dimension)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn duplicates_dropped(&self) -> usize {
        self.duplicates_dropped
    }

    pub fn score(&self, word: &str, dimension: &str) -> Option<f64> {
        let j = self.dimension_index(dimension)?;
        let i = *self.index.get(&word.to_lowercase())?;
        Some(self.scores[i * self.dimensions.len() + j])
    }

    /// All scores for one dimension, in lexicon order.
    pub fn column(&self, dimension: &str) -> Result<Vec<f64>> {
        let j = self
            .dimension_index(dimension)
            .ok_or_else(|| Error::UnknownDimension(dimension.to_string()))?;
        let k = self.dimensions.len();
        Ok((0..self.words.len())
            .map(|i| self.scores[i * k + j])
            .collect())
    }
}

pub fn load_lexicon(path: impl AsRef<Path>, language: &str) -> Result<NormLexicon> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    NormLexicon::read(file, language)
}

/// Mean and population standard deviation used to z-score a sequence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub std: f64,
}

/// Z-score with the population standard deviation.
///
/// Intermediates are carried in double-double precision and each output is
/// rounded once, so any exactly representable affine relabeling `a*y + b`
/// with `a > 0` yields bit-identical output.
pub fn zscore(values: &[f64]) -> Result<Vec<f64>> {
    zscore_with_moments(values).map(|(z, _)| z)
}

pub fn zscore_with_moments(values: &[f64]) -> Result<(Vec<f64>, Moments)> {
    if values.len() < 2 {
        return Err(Error::ZeroVariance);
    }
    let n = DoubleDouble::from(values.len() as f64);
    let sum = values.iter().fold(DoubleDouble::ZERO, |acc, &v| acc + v);
    let mean = sum / n;
    let ss = values.iter().fold(DoubleDouble::ZERO, |acc, &v| {
        let dev = DoubleDouble::from(v) - mean;
        acc + dev * dev
    });
    let std = (ss / n).sqrt();
    let std_f = std.to_f64();
    if !(std_f > 1e-300) || !std_f.is_finite() || std_f <= 1e-12 * mean.to_f64().abs() {
        return Err(Error::ZeroVariance);
    }
    let z = values
        .iter()
        .map(|&v| ((DoubleDouble::from(v) - mean) / std).to_f64())
        .collect();
    Ok((
        z,
        Moments {
            mean: mean.to_f64(),
            std: std_f,
        },
    ))
}

/// Lexicon words present in an embedding space, with their vectors and labels.
#[derive(Clone, Debug, Serialize)]
pub struct JoinedSample {
    pub language: String,
    pub dimension: String,
    pub words: Vec<String>,
    #[serde(skip)]
    pub x: Array2<f64>,
    pub y: Vec<f64>,
    pub dropped_oov: usize,
}

impl JoinedSample {
    pub fn new(
        language: impl Into<String>,
        dimension: impl Into<String>,
        words: Vec<String>,
        x: Array2<f64>,
        y: Vec<f64>,
    ) -> Result<Self> {
        if x.nrows() != y.len() || words.len() != y.len() {
            return Err(Error::InvalidArgument(format!(
                "{} words, {} rows, {} labels",
                words.len(),
                x.nrows(),
                y.len()
            )));
        }
        Ok(Self {
            language: language.into(),
            dimension: dimension.into(),
            words,
            x,
            y,
            dropped_oov: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// Same sample with every label mapped through `f`.
    pub fn map_labels(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        out.y.iter_mut().for_each(|v| *v = f(*v));
        out
    }
}

/// Rows for exactly the lexicon words found in `space`, in lexicon order.
pub fn join(
    lexicon: &NormLexicon,
    space: &EmbeddingSpace,
    dimension: &str,
    min_samples: usize,
) -> Result<JoinedSample> {
    if !space.preprocessing().complete() {
        return Err(Error::NotPreprocessed {
            language: space.language().to_string(),
        });
    }
    let labels = lexicon.column(dimension)?;
    let mut words = Vec::new();
    let mut y = Vec::new();
    let mut data = Vec::new();
    for (word, label) in lexicon.words().iter().zip(labels) {
        if let Some(row) = space.lookup(word) {
            words.push(word.clone());
            y.push(label);
            data.extend(row.iter().copied());
        }
    }
    let n = words.len();
    let dropped_oov = lexicon.len() - n;
    if n < min_samples {
        return Err(Error::TooFewSamples {
            language: lexicon.language().to_string(),
            dimension: dimension.to_lowercase(),
            n,
            floor: min_samples,
        });
    }
    log::info!(
        "{}/{}: joined {n} words, {dropped_oov} out of vocabulary",
        lexicon.language(),
        dimension
    );
    Ok(JoinedSample {
        language: lexicon.language().to_string(),
        dimension: dimension.to_lowercase(),
        x: Array2::from_shape_vec((n, space.dim()), data).expect("row lengths match"),
        words,
        y,
        dropped_oov,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn reads_simple_csv() {
        let lex = NormLexicon::read("word,valence\nfoo,5.0\nbar,1.0".as_bytes(), "en").unwrap();
        assert_eq!(lex.len(), 2);
        assert_eq!(lex.dimensions(), ["valence"]);
        assert_eq!(lex.score("FOO", "Valence"), Some(5.0));
    }

    #[test]
    fn keeps_first_duplicate_after_lowercasing() {
        let lex = NormLexicon::read("word,valence\nfoo,5.0\nbar,1.0\nFoo,2.0\n".as_bytes(), "en")
            .unwrap();
        assert_eq!(lex.len(), 2);
        assert_eq!(lex.duplicates_dropped(), 1);
        assert_eq!(lex.score("foo", "valence"), Some(5.0));
    }

    #[test]
    fn non_numeric_score_names_the_row() {
        let err = NormLexicon::read("word,valence\nbar,1\nfoo,abc\n".as_bytes(), "en").unwrap_err();
        match err {
            Error::NonNumericScore { line, value, .. } => {
                assert_eq!(line, 3);
                assert_eq!(value, "abc");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_missing_header_and_empty_input() {
        assert!(matches!(
            NormLexicon::read("foo,1.0\n".as_bytes(), "en").unwrap_err(),
            Error::MissingHeader
        ));
        assert!(matches!(
            NormLexicon::read("".as_bytes(), "en").unwrap_err(),
            Error::EmptyLexicon
        ));
        assert!(matches!(
            NormLexicon::read("word,valence\n".as_bytes(), "en").unwrap_err(),
            Error::EmptyLexicon
        ));
    }

    #[test]
    fn zscore_three_points() {
        let z = zscore(&[1.0, 2.0, 3.0]).unwrap();
        let r = 1.5f64.sqrt();
        assert!((z[0] + r).abs() < 1e-12);
        assert_eq!(z[1], 0.0);
        assert!((z[2] - r).abs() < 1e-12);
    }

    #[test]
    fn zscore_rejects_constant_input() {
        assert!(matches!(
            zscore(&[5.0, 5.0, 5.0]).unwrap_err(),
            Error::ZeroVariance
        ));
        assert!(matches!(zscore(&[5.0]).unwrap_err(), Error::ZeroVariance));
    }

    #[test]
    fn zscore_is_exact_under_representable_affine_maps() {
        let y: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64 / 64.0).collect();
        let y2: Vec<f64> = y.iter().map(|v| 10.0 * v + 3.0).collect();
        assert_eq!(zscore(&y).unwrap(), zscore(&y2).unwrap());
    }

    fn preprocessed_space(words: &[&str]) -> EmbeddingSpace {
        let n = words.len();
        let x = Array2::from_shape_fn((n, 3), |(i, j)| {
            ((i * 7 + j * 3) % 5) as f64 + 0.5 * j as f64 + 1.0
        });
        EmbeddingSpace::new("en", words.iter().map(|w| w.to_string()).collect(), x)
            .unwrap()
            .preprocess()
            .unwrap()
    }

    #[test]
    fn join_counts_out_of_vocabulary_words() {
        let lex = NormLexicon::read("word,valence\nfoo,5.0\nbar,1.0".as_bytes(), "en").unwrap();
        let space = preprocessed_space(&["foo", "qux", "zap"]);
        let s = join(&lex, &space, "valence", 1).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.dropped_oov, 1);
        assert_eq!(s.x.row(0), space.lookup("foo").unwrap());
        assert!(matches!(
            join(&lex, &space, "valence", 2).unwrap_err(),
            Error::TooFewSamples { n: 1, floor: 2, .. }
        ));
    }

    #[test]
    fn join_full_overlap_keeps_lexicon_order() {
        let lex = NormLexicon::read("word,valence\nfoo,5.0\nbar,1.0".as_bytes(), "en").unwrap();
        let space = preprocessed_space(&["bar", "foo", "zap"]);
        let s = join(&lex, &space, "valence", 1).unwrap();
        assert_eq!(s.dropped_oov, 0);
        assert_eq!(s.words, ["foo", "bar"]);
        assert_eq!(s.y, [5.0, 1.0]);
        for (i, w) in s.words.iter().enumerate() {
            assert_eq!(s.x.row(i), space.lookup(w).unwrap());
        }
    }

    #[test]
    fn join_requires_preprocessing_and_known_dimension() {
        let lex = NormLexicon::read("word,valence\nfoo,5.0\nbar,1.0".as_bytes(), "en").unwrap();
        let raw = EmbeddingSpace::new(
            "en",
            vec!["foo".into(), "bar".into()],
            array![[1.0, 0.0], [0.0, 1.0]],
        )
        .unwrap();
        assert!(matches!(
            join(&lex, &raw, "valence", 1).unwrap_err(),
            Error::NotPreprocessed { .. }
        ));
        let space = preprocessed_space(&["foo", "bar", "zap"]);
        assert!(matches!(
            join(&lex, &space, "arousal", 1).unwrap_err(),
            Error::UnknownDimension(_)
        ));
    }

    #[test]
    fn csv_round_trip() {
        let lex = NormLexicon::read(
            "word,valence,arousal\nfoo,5.25,1\nbar,1.0,2.5".as_bytes(),
            "en",
        )
        .unwrap();
        let mut buf = Vec::new();
        lex.write(&mut buf).unwrap();
        let back = NormLexicon::read(buf.as_slice(), "en").unwrap();
        assert_eq!(back.words(), lex.words());
        assert_eq!(
            back.column("arousal").unwrap(),
            lex.column("arousal").unwrap()
        );
    }

    proptest! {
        #[test]
        fn zscore_has_zero_mean_unit_std(v in proptest::collection::vec(-1e3f64..1e3, 2..60)) {
            prop_assume!(v.iter().any(|x| (x - v[0]).abs() > 1e-3));
            let z = zscore(&v).unwrap();
            let n = z.len() as f64;
            let mean = z.iter().sum::<f64>() / n;
            let var = z.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!((var.sqrt() - 1.0).abs() < 1e-9);
            let again = zscore(&z).unwrap();
            for (a, b) in z.iter().zip(&again) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn zscore_affine_equivariance(
            v in proptest::collection::vec(-1e3f64..1e3, 2..60),
            a in prop_oneof![-50.0f64..-0.1, 0.1f64..50.0],
            b in -100.0f64..100.0,
        ) {
            prop_assume!(v.iter().any(|x| (x - v[0]).abs() > 1e-3));
            let z = zscore(&v).unwrap();
            let mapped: Vec<f64> = v.iter().map(|x| a * x + b).collect();
            let z2 = zscore(&mapped).unwrap();
            for (p, q) in z.iter().zip(&z2) {
                prop_assert!((a.signum() * p - q).abs() < 1e-9);
            }
        }
    }
}
