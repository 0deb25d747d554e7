//! Ranked candidate lists shared by every extraction method
//! (CSV `rank,term,frequency`).

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub rank: usize,
    pub term: String,
    pub frequency: u64,
}

/// Candidates sorted by frequency (descending) then term; ranks run 1..=len.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CandidateList {
    rows: Vec<Candidate>,
}

impl CandidateList {
    pub fn from_counts<I, S>(counts: I) -> Self
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        let mut merged: HashMap<String, u64> = HashMap::new();
        for (term, freq) in counts {
            *merged.entry(term.into()).or_insert(0) += freq;
        }
        let mut pairs: Vec<(String, u64)> = merged.into_iter().filter(|(_, f)| *f > 0).collect();
        pairs.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let rows = pairs
            .into_iter()
            .enumerate()
            .map(|(i, (term, frequency))| Candidate {
                rank: i + 1,
                term,
                frequency,
            })
            .collect();
        CandidateList { rows }
    }

    /// Each occurrence of a term counts once.
    pub fn from_terms<I, S>(terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        CandidateList::from_counts(terms.into_iter().map(|t| (t, 1)))
    }

    pub fn rows(&self) -> &[Candidate] {
        &self.rows
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.rows.iter().map(|c| c.term.as_str())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn frequency(&self, term: &str) -> Option<u64> {
        self.rows.iter().find(|c| c.term == term).map(|c| c.frequency)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.rows {
            w.serialize(row).map_err(csv_error("candidates"))?;
        }
        w.flush().map_err(|e| Error::io("candidates", e))
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn read_csv<R: Read>(reader: R, origin: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, row) in csv::Reader::from_reader(reader).deserialize().enumerate() {
            let row: Candidate =
                row.map_err(|e| Error::format(format!("{origin}:{}", i + 2), e.to_string()))?;
            rows.push(row);
        }
        let list = CandidateList { rows };
        list.check(origin)?;
        Ok(list)
    }

    fn check(&self, origin: &str) -> Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            if row.rank != i + 1 {
                return Err(Error::format(
                    format!("{origin}:{}", i + 2),
                    format!("rank {} breaks the contiguous 1..n sequence", row.rank),
                ));
            }
            if i > 0 && row.frequency > self.rows[i - 1].frequency {
                return Err(Error::format(
                    format!("{origin}:{}", i + 2),
                    "frequencies must be non-increasing",
                ));
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        CandidateList::read_csv(file, &path.display().to_string())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file)
    }
}

pub fn csv_error(origin: &str) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::format(origin, e.to_string())
}
