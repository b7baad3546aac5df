use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::tensor_core::stable_hash;

/// Fixed (non-learned) per-token vectors.
#[derive(Clone, Debug)]
pub enum EmbeddingProvider {
    /// Vectors drawn uniformly from `[-1, 1]` by a generator seeded with
    /// a hash of `(seed, token)`.
    Hashed { dim: usize, seed: u64 },
    /// Lookup table read from a `token v1 ... vd` text file. Unknown
    /// tokens map to the zero vector.
    File {
        dim: usize,
        table: HashMap<String, Vec<f32>>,
    },
}

impl EmbeddingProvider {
    pub fn hashed(dim: usize, seed: u64) -> Self {
        EmbeddingProvider::Hashed { dim, seed }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let reader = BufReader::new(File::open(path)?);
        let mut table = HashMap::new();
        let mut dim = None;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let mut fields = line.split_whitespace();
            let Some(token) = fields.next() else { continue };
            let parse_err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let values = fields
                .map(|f| f.parse::<f32>().map_err(|e| parse_err(format!("{f:?}: {e}"))))
                .collect::<Result<Vec<f32>>>()?;
            if values.is_empty() {
                return Err(parse_err(format!("token {token:?} has no values")));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(parse_err(format!("token {token:?} has non-finite values")));
            }
            match dim {
                None => dim = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(parse_err(format!("expected {d} values, got {}", values.len())))
                }
                Some(_) => {}
            }
            table.insert(token.to_string(), values);
        }
        let dim = dim.ok_or_else(|| Error::InvalidArgument(format!("{} has no vectors", path.display())))?;
        Ok(EmbeddingProvider::File { dim, table })
    }

    pub fn dim(&self) -> usize {
        match self {
            EmbeddingProvider::Hashed { dim, .. } | EmbeddingProvider::File { dim, .. } => *dim,
        }
    }

    pub fn vector(&self, token: &str) -> Vec<f32> {
        match self {
            EmbeddingProvider::Hashed { dim, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(*seed, token));
                (0..*dim).map(|_| rng.random_range(-1.0f32..=1.0)).collect()
            }
            EmbeddingProvider::File { dim, table } => {
                table.get(token).cloned().unwrap_or_else(|| vec![0.0; *dim])
            }
        }
    }
}

/// One row of width `provider.dim()` per token.
pub fn embed_tokens(doc: &Document, provider: &EmbeddingProvider) -> Array2<f64> {
    let dim = provider.dim();
    let mut out = Array2::zeros((doc.tokens.len(), dim));
    for (mut row, token) in out.rows_mut().into_iter().zip(&doc.tokens) {
        for (dst, v) in row.iter_mut().zip(provider.vector(token)) {
            *dst = f64::from(v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::small_doc;
    use std::io::Write;

    #[test]
    fn hashed_is_deterministic() {
        let p = EmbeddingProvider::hashed(8, 3);
        assert_eq!(p.vector("cat"), p.vector("cat"));
        assert_ne!(p.vector("cat"), p.vector("dog"));
        assert_ne!(p.vector("cat"), EmbeddingProvider::hashed(8, 4).vector("cat"));
        let mut doc = small_doc();
        doc.tokens[2] = "John".into();
        let e = embed_tokens(&doc, &p);
        assert_eq!(e.dim(), (6, 8));
        assert_eq!(e.row(0), e.row(2));
    }

    #[test]
    fn file_lookup_and_oov() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "John 0.1 -2.5 3.25").unwrap();
        writeln!(f, "Mary 1e-3 0 7").unwrap();
        let p = EmbeddingProvider::from_file(f.path()).unwrap();
        assert_eq!(p.dim(), 3);
        assert_eq!(p.vector("John"), vec![0.1f32, -2.5, 3.25]);
        assert_eq!(p.vector("nobody"), vec![0.0; 3]);
        let e = embed_tokens(&small_doc(), &p);
        assert_eq!(e[[2, 0]], f64::from(1e-3f32));
        assert_eq!(e.row(1).sum(), 0.0);
    }

    #[test]
    fn missing_or_ragged_file() {
        assert!(matches!(
            EmbeddingProvider::from_file("/nonexistent/vectors.txt"),
            Err(Error::Io(_))
        ));
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "a 1 2").unwrap();
        writeln!(f, "b 1").unwrap();
        assert!(matches!(
            EmbeddingProvider::from_file(f.path()),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
