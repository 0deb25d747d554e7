//! Token-level product labels for the convolutional tagger
//! (TSV `category<TAB>tokens<TAB>labels`).

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledQuery {
    pub category: String,
    pub tokens: Vec<String>,
    /// `true` where the token is (part of) a product.
    pub labels: Vec<bool>,
}

impl LabeledQuery {
    pub fn new(category: &str, tokens: Vec<String>, labels: Vec<bool>) -> Result<Self> {
        if tokens.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} tokens but {} labels",
                tokens.len(),
                labels.len()
            )));
        }
        Ok(LabeledQuery {
            category: category.to_owned(),
            tokens,
            labels,
        })
    }
}

pub fn write_labeled<W: Write>(queries: &[LabeledQuery], mut w: W) -> Result<()> {
    for q in queries {
        let labels: Vec<&str> = q.labels.iter().map(|&l| if l { "1" } else { "0" }).collect();
        writeln!(w, "{}\t{}\t{}", q.category, q.tokens.join(" "), labels.join(" "))
            .map_err(|e| Error::io("labeled queries", e))?;
    }
    Ok(())
}

pub fn read_labeled<R: BufRead>(reader: R, origin: &str) -> Result<Vec<LabeledQuery>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let loc = format!("{origin}:{}", i + 1);
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::format(&loc, "expected `category<TAB>tokens<TAB>labels`"));
        }
        let tokens: Vec<String> = fields[1].split_whitespace().map(str::to_owned).collect();
        let labels = fields[2]
            .split_whitespace()
            .map(|l| match l {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(Error::format(&loc, format!("label `{other}` is not 0 or 1"))),
            })
            .collect::<Result<Vec<bool>>>()?;
        out.push(
            LabeledQuery::new(fields[0], tokens, labels)
                .map_err(|e| Error::format(&loc, e.to_string()))?,
        );
    }
    Ok(out)
}

pub fn load_labeled(path: impl AsRef<Path>) -> Result<Vec<LabeledQuery>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_labeled(std::io::BufReader::new(file), &path.display().to_string())
}
