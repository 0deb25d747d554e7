//! IOB product tags, span extraction, and the CoNLL-style training file
//! (`token<TAB>tag` per line, blank line between queries).

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum IobTag {
    O = 0,
    B = 1,
    I = 2,
}

impl IobTag {
    pub const ALL: [IobTag; 3] = [IobTag::O, IobTag::B, IobTag::I];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        IobTag::ALL.get(i).copied()
    }

    /// Whether `next` may follow `prev` (`None` = sequence start).
    pub fn allowed_after(prev: Option<IobTag>, next: IobTag) -> bool {
        !matches!((prev, next), (None | Some(IobTag::O), IobTag::I))
    }
}

impl fmt::Display for IobTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IobTag::O => "O",
            IobTag::B => "B-PRODUCT",
            IobTag::I => "I-PRODUCT",
        })
    }
}

impl FromStr for IobTag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "O" => Ok(IobTag::O),
            "B-PRODUCT" => Ok(IobTag::B),
            "I-PRODUCT" => Ok(IobTag::I),
            other => Err(format!("unknown IOB tag `{other}`")),
        }
    }
}

/// Tokens with a valid IOB tagging (I only after B or I).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IobSequence {
    tokens: Vec<String>,
    tags: Vec<IobTag>,
}

impl IobSequence {
    pub fn new(tokens: Vec<String>, tags: Vec<IobTag>) -> Result<Self> {
        if tokens.len() != tags.len() {
            return Err(Error::InvalidArgument(format!(
                "{} tokens but {} tags",
                tokens.len(),
                tags.len()
            )));
        }
        let mut prev = None;
        for (i, &t) in tags.iter().enumerate() {
            if !IobTag::allowed_after(prev, t) {
                return Err(Error::InvalidArgument(format!(
                    "I-PRODUCT at position {i} does not continue a product span"
                )));
            }
            prev = Some(t);
        }
        Ok(IobSequence { tokens, tags })
    }

    /// Tags the half-open token ranges as products, everything else O.
    pub fn from_spans(tokens: Vec<String>, spans: &[(usize, usize)]) -> Result<Self> {
        let mut tags = vec![IobTag::O; tokens.len()];
        for &(start, end) in spans {
            if start >= end || end > tokens.len() {
                return Err(Error::InvalidArgument(format!("bad span {start}..{end}")));
            }
            tags[start] = IobTag::B;
            for t in &mut tags[start + 1..end] {
                *t = IobTag::I;
            }
        }
        IobSequence::new(tokens, tags)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn tags(&self) -> &[IobTag] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Half-open ranges of each maximal `B I*` run.
    pub fn product_ranges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut open: Option<usize> = None;
        for (i, tag) in self.tags.iter().enumerate() {
            match tag {
                IobTag::B => {
                    if let Some(s) = open.take() {
                        out.push((s, i));
                    }
                    open = Some(i);
                }
                IobTag::I => {}
                IobTag::O => {
                    if let Some(s) = open.take() {
                        out.push((s, i));
                    }
                }
            }
        }
        if let Some(s) = open {
            out.push((s, self.tags.len()));
        }
        out
    }

    /// Product phrases, tokens joined by single spaces.
    pub fn product_spans(&self) -> Vec<String> {
        self.product_ranges()
            .into_iter()
            .map(|(s, e)| self.tokens[s..e].join(" "))
            .collect()
    }
}

pub fn extract_product_spans(tagged: &IobSequence) -> Vec<String> {
    tagged.product_spans()
}

pub fn write_iob<W: Write>(sequences: &[IobSequence], mut w: W) -> Result<()> {
    for (i, seq) in sequences.iter().enumerate() {
        if i > 0 {
            writeln!(w).map_err(|e| Error::io("iob", e))?;
        }
        for (tok, tag) in seq.tokens.iter().zip(&seq.tags) {
            writeln!(w, "{tok}\t{tag}").map_err(|e| Error::io("iob", e))?;
        }
    }
    Ok(())
}

pub fn read_iob<R: BufRead>(reader: R, origin: &str) -> Result<Vec<IobSequence>> {
    let mut out = Vec::new();
    let mut tokens = Vec::new();
    let mut tags = Vec::new();
    let mut start_line = 1;
    let flush = |tokens: &mut Vec<String>, tags: &mut Vec<IobTag>, line: usize, out: &mut Vec<IobSequence>| {
        if tokens.is_empty() {
            return Ok(());
        }
        let seq = IobSequence::new(std::mem::take(tokens), std::mem::take(tags))
            .map_err(|e| Error::format(format!("{origin}:{line}"), e.to_string()))?;
        out.push(seq);
        Ok(())
    };
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            flush(&mut tokens, &mut tags, start_line, &mut out)?;
            start_line = lineno + 1;
            continue;
        }
        let (tok, tag) = line
            .split_once('\t')
            .ok_or_else(|| Error::format(format!("{origin}:{lineno}"), "expected `token<TAB>tag`"))?;
        let tag: IobTag = tag
            .trim()
            .parse()
            .map_err(|e: String| Error::format(format!("{origin}:{lineno}"), e))?;
        tokens.push(tok.to_owned());
        tags.push(tag);
    }
    flush(&mut tokens, &mut tags, start_line, &mut out)?;
    Ok(out)
}

pub fn load_iob(path: impl AsRef<Path>) -> Result<Vec<IobSequence>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_iob(std::io::BufReader::new(file), &path.display().to_string())
}
