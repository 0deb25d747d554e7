//! Precision@n over manually labeled candidate lists and side-by-side
//! method comparison.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::candidates::{csv_error, CandidateList};
use crate::error::{Error, Result};

/// Depth evaluated by default.
pub const DEFAULT_MAX_N: usize = 500;

/// P: atomic and sellable. N: anything else.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    P,
    N,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::P => "P",
            Label::N => "N",
        })
    }
}

#[derive(Serialize, Deserialize)]
struct AnnotationRow {
    term: String,
    label: Label,
}

/// Term → P/N judgments (CSV `term,label`).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnnotationSet {
    labels: BTreeMap<String, Label>,
}

impl AnnotationSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, term: impl Into<String>, label: Label) {
        self.labels.insert(term.into(), label);
    }

    pub fn get(&self, term: &str) -> Option<Label> {
        self.labels.get(term).copied()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Label)> {
        self.labels.iter().map(|(t, l)| (t.as_str(), *l))
    }

    /// Terms labeled P.
    pub fn products(&self) -> impl Iterator<Item = &str> {
        self.iter().filter(|(_, l)| *l == Label::P).map(|(t, _)| t)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for (term, label) in &self.labels {
            w.serialize(AnnotationRow {
                term: term.clone(),
                label: *label,
            })
            .map_err(csv_error("annotations"))?;
        }
        w.flush().map_err(|e| Error::io("annotations", e))
    }

    pub fn read_csv<R: Read>(reader: R, origin: &str) -> Result<Self> {
        let mut set = AnnotationSet::new();
        for (i, row) in csv::Reader::from_reader(reader).deserialize().enumerate() {
            let row: AnnotationRow =
                row.map_err(|e| Error::format(format!("{origin}:{}", i + 2), e.to_string()))?;
            set.insert(row.term, row.label);
        }
        Ok(set)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        AnnotationSet::read_csv(file, &path.display().to_string())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file)
    }
}

impl<S: Into<String>> FromIterator<(S, Label)> for AnnotationSet {
    fn from_iter<T: IntoIterator<Item = (S, Label)>>(iter: T) -> Self {
        let mut set = AnnotationSet::new();
        for (t, l) in iter {
            set.insert(t, l);
        }
        set
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionPoint {
    pub n: usize,
    /// Number of P labels among the top `n`.
    pub hits: usize,
    pub precision: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PrecisionCurve {
    points: Vec<PrecisionPoint>,
}

impl PrecisionCurve {
    pub fn points(&self) -> &[PrecisionPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn at(&self, n: usize) -> Option<f64> {
        n.checked_sub(1)
            .and_then(|i| self.points.get(i))
            .map(|p| p.precision)
    }
}

/// Precision@n for n = 1..=min(max_n, |candidates|). Every evaluated
/// candidate must be annotated.
pub fn precision_at_n(
    candidates: &CandidateList,
    annotations: &AnnotationSet,
    max_n: usize,
) -> Result<PrecisionCurve> {
    let evaluated = &candidates.rows()[..candidates.len().min(max_n)];
    let missing: Vec<String> = evaluated
        .iter()
        .filter(|c| annotations.get(&c.term).is_none())
        .map(|c| c.term.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingAnnotation(missing));
    }
    let mut hits = 0;
    let points = evaluated
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if annotations.get(&c.term) == Some(Label::P) {
                hits += 1;
            }
            let n = i + 1;
            PrecisionPoint {
                n,
                hits,
                precision: hits as f64 / n as f64,
            }
        })
        .collect();
    Ok(PrecisionCurve { points })
}

/// Precision curves aligned by n. Shorter curves leave blanks.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub methods: Vec<String>,
    pub rows: Vec<(usize, Vec<Option<f64>>)>,
}

pub fn compare(curves: &[(String, PrecisionCurve)], max_n: usize) -> Result<ComparisonReport> {
    if curves.is_empty() {
        return Err(Error::InvalidArgument("compare needs at least one curve".into()));
    }
    let depth = curves.iter().map(|(_, c)| c.len()).max().unwrap_or(0).min(max_n);
    let rows = (1..=depth)
        .map(|n| (n, curves.iter().map(|(_, c)| c.at(n)).collect()))
        .collect();
    Ok(ComparisonReport {
        methods: curves.iter().map(|(m, _)| m.clone()).collect(),
        rows,
    })
}

impl ComparisonReport {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["n".to_owned()];
        header.extend(self.methods.iter().cloned());
        w.write_record(&header).map_err(csv_error("report"))?;
        for (n, values) in &self.rows {
            let mut record = vec![n.to_string()];
            record.extend(values.iter().map(|v| v.map(|p| p.to_string()).unwrap_or_default()));
            w.write_record(&record).map_err(csv_error("report"))?;
        }
        w.flush().map_err(|e| Error::io("report", e))
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}
