//! LIBSVM / SVMlight text format.
//!
//! ```text
//! +1 1:0.5 3:2      # indices are 1-based and strictly ascending
//! -1 2:1
//! ```
//!
//! Trailing `# ...` comments and `qid:` tokens are ignored.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use super::{Dataset, ProblemError, Sample, SparseVector};

/// Maps raw file labels onto `{-1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    pairs: Vec<(f64, f64)>,
}

impl Default for LabelMap {
    /// `+1 -> +1`, `-1 -> -1`, `2 -> -1` (covtype.binary uses `{1, 2}`).
    fn default() -> Self {
        LabelMap { pairs: vec![(1.0, 1.0), (-1.0, -1.0), (2.0, -1.0)] }
    }
}

impl LabelMap {
    pub fn new(pairs: Vec<(f64, f64)>) -> Result<Self, String> {
        if let Some((raw, to)) = pairs.iter().find(|(_, to)| *to != 1.0 && *to != -1.0) {
            return Err(format!("label {raw} maps to {to}, expected +1 or -1"));
        }
        Ok(LabelMap { pairs })
    }

    pub fn map(&self, raw: f64) -> Option<f64> {
        self.pairs.iter().find(|(from, _)| *from == raw).map(|(_, to)| *to)
    }
}

impl FromStr for LabelMap {
    type Err = String;

    /// `"1:+1,2:-1"`
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut pairs = Vec::new();
        for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (from, to) = item.split_once(':').ok_or_else(|| format!("`{item}` is not raw:mapped"))?;
            let parse = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("`{t}` is not a number"));
            pairs.push((parse(from)?, parse(to)?));
        }
        if pairs.is_empty() {
            return Err("empty label map".into());
        }
        LabelMap::new(pairs)
    }
}

impl std::fmt::Display for LabelMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let items: Vec<String> = self.pairs.iter().map(|(a, b)| format!("{a}:{b:+}")).collect();
        f.write_str(&items.join(","))
    }
}

#[derive(Debug, Clone, Default)]
pub struct LibsvmOptions {
    /// Feature dimension; inferred as `max index + 1` when absent.
    pub dim: Option<usize>,
    pub labels: LabelMap,
}

fn parse_line(line: &str, lineno: usize, labels: &LabelMap) -> Result<Option<Sample>, ProblemError> {
    let body = line.split('#').next().unwrap_or("").trim();
    if body.is_empty() {
        return Ok(None);
    }
    let err = |msg: String| ProblemError::Parse { line: lineno, msg };
    let mut tokens = body.split_whitespace();
    let label_tok = tokens.next().unwrap_or_default();
    let raw: f64 = label_tok.parse().map_err(|_| err(format!("bad label `{label_tok}`")))?;
    let label = labels.map(raw).ok_or_else(|| err(format!("label `{label_tok}` has no +1/-1 mapping")))?;

    let mut indices = Vec::new();
    let mut values = Vec::new();
    for tok in tokens {
        if tok.starts_with("qid:") {
            continue;
        }
        let (i, v) = tok.split_once(':').ok_or_else(|| err(format!("malformed feature `{tok}`")))?;
        let idx: u32 = i.parse().map_err(|_| err(format!("bad feature index `{i}`")))?;
        if idx == 0 {
            return Err(err("feature indices are 1-based, found 0".into()));
        }
        let val: f64 = v.parse().map_err(|_| err(format!("bad feature value `{v}`")))?;
        if !val.is_finite() {
            return Err(err(format!("non-finite feature value `{v}`")));
        }
        let zero_based = idx - 1;
        if indices.last().is_some_and(|&last| zero_based <= last) {
            return Err(err(format!("feature index {idx} is not ascending")));
        }
        indices.push(zero_based);
        values.push(val);
    }
    Ok(Some(Sample::new(SparseVector::new(indices, values), label)))
}

/// Parses a LIBSVM stream. Errors carry the 1-based line number.
pub fn parse_libsvm<R: BufRead>(reader: R, opts: &LibsvmOptions) -> Result<Dataset, ProblemError> {
    let mut samples = Vec::new();
    let mut max_index = None::<usize>;
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if let Some(s) = parse_line(&line, n + 1, &opts.labels)? {
            if let Some(i) = s.features.max_index() {
                if let Some(dim) = opts.dim {
                    if i >= dim {
                        return Err(ProblemError::Parse {
                            line: n + 1,
                            msg: format!("feature index {} exceeds dimension {dim}", i + 1),
                        });
                    }
                }
                max_index = Some(max_index.map_or(i, |m: usize| m.max(i)));
            }
            samples.push(s);
        }
    }
    if samples.is_empty() {
        return Err(ProblemError::Empty);
    }
    let dim = opts.dim.unwrap_or_else(|| max_index.map_or(0, |i| i + 1)).max(1);
    Ok(Dataset { samples, dim })
}

pub fn read_libsvm_file(path: &Path, opts: &LibsvmOptions) -> Result<Dataset, ProblemError> {
    parse_libsvm(BufReader::new(File::open(path)?), opts)
}
