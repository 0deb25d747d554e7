//! Pre-trained word vectors in the plain text layout `term v1 ... vD`.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            vectors: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn insert(&mut self, term: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "embedding has dimension {} but table dimension is {}",
                vector.len(),
                self.dim
            )));
        }
        self.vectors.insert(term.into(), vector);
        Ok(())
    }

    pub fn get(&self, term: &str) -> Option<&[f64]> {
        self.vectors.get(term).map(Vec::as_slice)
    }

    /// Terms in sorted order, for reproducible output.
    pub fn sorted_terms(&self) -> Vec<&str> {
        let mut terms: Vec<&str> = self.vectors.keys().map(String::as_str).collect();
        terms.sort_unstable();
        terms
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        for term in self.sorted_terms() {
            let values: Vec<String> = self.vectors[term].iter().map(|v| v.to_string()).collect();
            writeln!(w, "{term} {}", values.join(" ")).map_err(|e| Error::io("embeddings", e))?;
        }
        Ok(())
    }

    /// Reads `term v1 ... vD` lines. A leading word2vec `count dim` header
    /// line is skipped.
    pub fn read_text<R: BufRead>(reader: R, origin: &str) -> Result<Self> {
        let mut table: Option<EmbeddingTable> = None;
        for (i, line) in reader.lines().enumerate() {
            let loc = format!("{origin}:{}", i + 1);
            let line = line.map_err(|e| Error::io(origin, e))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if i == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
                continue;
            }
            let values = fields[1..]
                .iter()
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| Error::format(&loc, format!("`{v}` is not a number")))
                })
                .collect::<Result<Vec<f64>>>()?;
            if values.is_empty() {
                return Err(Error::format(&loc, "term without a vector"));
            }
            let t = table.get_or_insert_with(|| EmbeddingTable::new(values.len()));
            t.insert(fields[0], values)
                .map_err(|e| Error::format(&loc, e.to_string()))?;
        }
        table.ok_or_else(|| Error::format(origin, "no embeddings found"))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        EmbeddingTable::read_text(std::io::BufReader::new(file), &path.display().to_string())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_text(std::io::BufWriter::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut t = EmbeddingTable::new(2);
        t.insert("b", vec![0.5, -1.0]).unwrap();
        t.insert("a", vec![0.1, 2.0]).unwrap();
        let mut buf = Vec::new();
        t.write_text(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "a 0.1 2\nb 0.5 -1\n");
        assert_eq!(EmbeddingTable::read_text(buf.as_slice(), "e").unwrap(), t);
    }

    #[test]
    fn header_skipped_and_dims_checked() {
        let t = EmbeddingTable::read_text("2 3\nx 1 2 3\ny 4 5 6\n".as_bytes(), "e").unwrap();
        assert_eq!((t.len(), t.dim()), (2, 3));
        assert!(EmbeddingTable::read_text("x 1 2\ny 1\n".as_bytes(), "e").is_err());
    }
}
