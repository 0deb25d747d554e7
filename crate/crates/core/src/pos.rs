//! Term → part-of-speech distribution table over the 12 universal tags.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const POS_TAGS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PosTag {
    Noun,
    Verb,
    Adj,
    Adv,
    Pron,
    Det,
    Adp,
    Num,
    Conj,
    Prt,
    Punct,
    X,
}

impl PosTag {
    pub const ALL: [PosTag; POS_TAGS] = [
        PosTag::Noun,
        PosTag::Verb,
        PosTag::Adj,
        PosTag::Adv,
        PosTag::Pron,
        PosTag::Det,
        PosTag::Adp,
        PosTag::Num,
        PosTag::Conj,
        PosTag::Prt,
        PosTag::Punct,
        PosTag::X,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PosTag::Noun => "NOUN",
            PosTag::Verb => "VERB",
            PosTag::Adj => "ADJ",
            PosTag::Adv => "ADV",
            PosTag::Pron => "PRON",
            PosTag::Det => "DET",
            PosTag::Adp => "ADP",
            PosTag::Num => "NUM",
            PosTag::Conj => "CONJ",
            PosTag::Prt => "PRT",
            PosTag::Punct => "PUNCT",
            PosTag::X => "X",
        }
    }
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PosTag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        PosTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown POS tag `{s}`"))
    }
}

pub type PosVector = [f64; POS_TAGS];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PosTable {
    rows: BTreeMap<String, PosVector>,
}

impl PosTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a distribution after checking it sums to one.
    pub fn insert(&mut self, term: impl Into<String>, dist: PosVector) -> Result<()> {
        let term = term.into();
        let sum: f64 = dist.iter().sum();
        if dist.iter().any(|p| !p.is_finite() || *p < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "POS distribution for `{term}` must be non-negative and sum to 1 (sum {sum})"
            )));
        }
        self.rows.insert(term, dist);
        Ok(())
    }

    /// Normalizes raw tag counts into a distribution.
    pub fn insert_counts(&mut self, term: impl Into<String>, counts: &[(PosTag, f64)]) -> Result<()> {
        let total: f64 = counts.iter().map(|(_, c)| c).sum();
        if total <= 0.0 {
            return Err(Error::InvalidArgument("POS counts must be positive".into()));
        }
        let mut dist = [0.0; POS_TAGS];
        for (tag, c) in counts {
            dist[tag.index()] += c / total;
        }
        // absorb rounding so the row sums to one
        let drift = 1.0 - dist.iter().sum::<f64>();
        if let Some(max) = dist
            .iter_mut()
            .max_by(|a, b| a.total_cmp(b))
        {
            *max += drift;
        }
        self.insert(term, dist)
    }

    pub fn get(&self, term: &str) -> Option<&PosVector> {
        self.rows.get(term)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// The term's distribution; unknown terms put all mass on `X`.
    pub fn pos_vector(&self, term: &str) -> PosVector {
        self.rows.get(term).copied().unwrap_or_else(|| {
            let mut v = [0.0; POS_TAGS];
            v[PosTag::X.index()] = 1.0;
            v
        })
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        for (term, dist) in &self.rows {
            let cells: Vec<String> = PosTag::ALL
                .iter()
                .zip(dist)
                .filter(|(_, p)| **p > 0.0)
                .map(|(t, p)| format!("{t}:{p}"))
                .collect();
            writeln!(w, "{term}\t{}", cells.join(",")).map_err(|e| Error::io("pos table", e))?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(reader: R, origin: &str) -> Result<Self> {
        let mut table = PosTable::new();
        for (i, line) in reader.lines().enumerate() {
            let loc = format!("{origin}:{}", i + 1);
            let line = line.map_err(|e| Error::io(origin, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let (term, cells) = line
                .split_once('\t')
                .ok_or_else(|| Error::format(&loc, "expected `term<TAB>tag:prob[,tag:prob...]`"))?;
            let mut dist = [0.0; POS_TAGS];
            for cell in cells.split(',') {
                let (tag, p) = cell
                    .split_once(':')
                    .ok_or_else(|| Error::format(&loc, format!("malformed cell `{cell}`")))?;
                let tag: PosTag = tag.trim().parse().map_err(|e: String| Error::format(&loc, e))?;
                let p: f64 = p
                    .trim()
                    .parse()
                    .map_err(|_| Error::format(&loc, format!("bad probability `{p}`")))?;
                dist[tag.index()] += p;
            }
            table
                .insert(term, dist)
                .map_err(|e| Error::format(&loc, e.to_string()))?;
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        PosTable::read_tsv(std::io::BufReader::new(file), &path.display().to_string())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_tsv(std::io::BufWriter::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_normalize() {
        let mut t = PosTable::new();
        t.insert_counts("pack", &[(PosTag::Noun, 3.0), (PosTag::Verb, 1.0)]).unwrap();
        let v = t.pos_vector("pack");
        assert_eq!(v[PosTag::Noun.index()], 0.75);
        assert_eq!(v[PosTag::Verb.index()], 0.25);
        assert_eq!(v.iter().filter(|p| **p > 0.0).count(), 2);
    }

    #[test]
    fn oov_goes_to_x() {
        let v = PosTable::new().pos_vector("qzx");
        assert_eq!(v[PosTag::X.index()], 1.0);
        assert_eq!(v.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn tsv_round_trip_and_validation() {
        let mut t = PosTable::new();
        t.insert_counts("pack", &[(PosTag::Noun, 3.0), (PosTag::Verb, 1.0)]).unwrap();
        t.insert_counts("white", &[(PosTag::Adj, 1.0)]).unwrap();
        let mut buf = Vec::new();
        t.write_tsv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "pack\tNOUN:0.75,VERB:0.25\nwhite\tADJ:1\n");
        assert_eq!(PosTable::read_tsv(buf.as_slice(), "p").unwrap(), t);
        assert!(PosTable::read_tsv("a\tNOUN:0.5\n".as_bytes(), "p").is_err());
        assert!(PosTable::read_tsv("a\tFOO:1\n".as_bytes(), "p").is_err());
    }
}
