use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::vector::SparseGradient;

pub type SparseRow = SparseGradient<f64>;

/// Exponent of the Zipf-like feature frequency law used by [`make_sparse_bow`].
pub const ZIPF_EXPONENT: f64 = 1.1;

/// Labelled sparse examples: `n` rows of dimension `p`, labels in `0..k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    rows: Vec<SparseRow>,
    labels: Vec<usize>,
    n_features: usize,
    n_classes: usize,
}

impl Dataset {
    pub fn new(rows: Vec<SparseRow>, labels: Vec<usize>, n_features: usize, n_classes: usize) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if rows.len() != labels.len() {
            return Err(Error::DimMismatch { expected: rows.len(), found: labels.len() });
        }
        if n_features == 0 || n_classes == 0 {
            return Err(Error::Range { field: "dataset", reason: "p and K must be positive".into() });
        }
        for row in &rows {
            if row.dim() != n_features {
                return Err(Error::DimMismatch { expected: n_features, found: row.dim() });
            }
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::Index { index: label, dim: n_classes });
        }
        Ok(Self { rows, labels, n_features, n_classes })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &SparseRow {
        &self.rows[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }
}

fn softmax_sample(scores: &[f64], rng: &mut SeededRng) -> usize {
    let top = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = scores.iter().map(|s| (s - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.uniform() * total;
    for (k, w) in weights.iter().enumerate() {
        if u < *w {
            return k;
        }
        u -= w;
    }
    scores.len() - 1
}

fn planted_labels(rows: &[SparseRow], n_classes: usize, weight_scale: f64, rng: &mut SeededRng) -> Vec<usize> {
    let p = rows[0].dim();
    let planted: Vec<f64> = (0..p * n_classes).map(|_| rng.normal() * weight_scale).collect();
    rows.iter()
        .map(|row| {
            let mut scores = vec![0.0; n_classes];
            for &(j, x) in row.entries() {
                for (k, s) in scores.iter_mut().enumerate() {
                    *s += x * planted[j * n_classes + k];
                }
            }
            softmax_sample(&scores, rng)
        })
        .collect()
}

/// Synthetic bag-of-words data. Each row has `round(density * p)` active binary features drawn
/// without replacement with probability proportional to `(rank + 1)^-1.1`, so low-index
/// features are common and high-index ones rare. Labels are sampled from the softmax of a
/// planted linear model with standard normal weights.
pub fn make_sparse_bow(n: usize, p: usize, n_classes: usize, density: f64, rng: &mut SeededRng) -> Result<Dataset> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::Range { field: "density", reason: "must lie in (0, 1]".into() });
    }
    let active = (density * p as f64).round() as usize;
    if active == 0 {
        return Err(Error::Range { field: "density", reason: "density * p must be at least 1".into() });
    }
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let log_weights: Vec<f64> = (0..p).map(|j| -ZIPF_EXPONENT * ((j + 1) as f64).ln()).collect();
    let mut rows = Vec::with_capacity(n);
    let mut keys: Vec<(f64, usize)> = Vec::with_capacity(p);
    for _ in 0..n {
        let mut chosen: Vec<usize> = if active == p {
            (0..p).collect()
        } else {
            // weighted sampling without replacement: keep the largest ln(u) / w
            keys.clear();
            keys.extend((0..p).map(|j| {
                let u = 1.0 - rng.uniform();
                (u.ln() * (-log_weights[j]).exp(), j)
            }));
            keys.select_nth_unstable_by(active - 1, |a, b| b.0.total_cmp(&a.0));
            keys[..active].iter().map(|&(_, j)| j).collect()
        };
        chosen.sort_unstable();
        let entries = chosen.into_iter().map(|j| (j, 1.0)).collect();
        rows.push(SparseRow::new(p, entries)?);
    }
    let labels = planted_labels(&rows, n_classes, 1.0, rng);
    Dataset::new(rows, labels, p, n_classes)
}

/// Dense, image-like data: features uniform in [0, 1), labels from a planted softmax model.
pub fn make_dense_planted(n: usize, p: usize, n_classes: usize, rng: &mut SeededRng) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let rows: Vec<SparseRow> = (0..n)
        .map(|_| SparseRow::new(p, (0..p).map(|j| (j, rng.uniform())).collect()))
        .collect::<Result<_>>()?;
    let labels = planted_labels(&rows, n_classes, 3.0 / (p as f64).sqrt(), rng);
    Dataset::new(rows, labels, p, n_classes)
}

/// Reads the sparse text format: an optional `#dim P` first line, then one example per line
/// as `label idx:val idx:val ...` with 1-based, strictly increasing indices separated by
/// single spaces.
pub fn read_sparse_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    parse_sparse_dataset(&text)
}

pub fn parse_sparse_dataset(text: &str) -> Result<Dataset> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    if body.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut lines = body.split('\n').enumerate().map(|(i, l)| (i + 1, l)).peekable();
    let mut declared_dim = None;
    if let Some((line_no, line)) = lines.peek().copied() {
        if let Some(rest) = line.strip_prefix("#dim ") {
            let dim = rest.parse::<usize>().ok().filter(|&d| d > 0).ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("invalid dimension directive `{line}`"),
            })?;
            declared_dim = Some(dim);
            lines.next();
        }
    }
    let parse_err = |line: usize, message: String| Error::Parse { line, message };
    let mut raw: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0usize;
    for (line_no, line) in lines {
        let mut fields = line.split(' ');
        let label_text = fields.next().unwrap_or("");
        let label = label_text
            .parse::<usize>()
            .map_err(|_| parse_err(line_no, format!("invalid label `{label_text}`")))?;
        let mut entries = Vec::new();
        let mut previous = 0usize;
        for field in fields {
            let (idx_text, val_text) = field
                .split_once(':')
                .ok_or_else(|| parse_err(line_no, format!("expected idx:val, found `{field}`")))?;
            let idx = idx_text
                .parse::<usize>()
                .map_err(|_| parse_err(line_no, format!("invalid index `{idx_text}`")))?;
            if idx < 1 {
                return Err(Error::Index { index: 0, dim: declared_dim.unwrap_or(max_index) });
            }
            if let Some(dim) = declared_dim {
                if idx > dim {
                    return Err(Error::Index { index: idx - 1, dim });
                }
            }
            if idx <= previous {
                return Err(parse_err(line_no, format!("index {idx} does not increase")));
            }
            previous = idx;
            let val = val_text
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(line_no, format!("invalid value `{val_text}`")))?;
            max_index = max_index.max(idx);
            entries.push((idx - 1, val));
        }
        raw.push(entries);
        labels.push(label);
    }
    if raw.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let dim = declared_dim.unwrap_or(max_index).max(1);
    let n_classes = labels.iter().max().map_or(1, |&l| l + 1);
    let rows = raw.into_iter().map(|e| SparseRow::new(dim, e)).collect::<Result<_>>()?;
    Dataset::new(rows, labels, dim, n_classes)
}

/// Writes `data` in the format read by [`parse_sparse_dataset`], including the `#dim` line.
pub fn write_sparse_dataset(data: &Dataset, mut out: impl Write) -> Result<()> {
    writeln!(out, "#dim {}", data.n_features())?;
    for (row, label) in data.rows().iter().zip(data.labels()) {
        write!(out, "{label}")?;
        for &(j, x) in row.entries() {
            write!(out, " {}:{}", j + 1, x)?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_line() {
        let d = parse_sparse_dataset("1 3:0.5 7:1.2\n").unwrap();
        assert_eq!(d.label(0), 1);
        assert_eq!(d.row(0).entries(), &[(2, 0.5), (6, 1.2)]);
        assert_eq!(d.n_features(), 7);
        assert_eq!(d.n_classes(), 2);
    }

    #[test]
    fn dim_directive_sets_dimension() {
        let d = parse_sparse_dataset("#dim 10\n0 1:1\n2\n").unwrap();
        assert_eq!(d.n_features(), 10);
        assert_eq!(d.len(), 2);
        assert_eq!(d.row(1).nnz(), 0);
        assert_eq!(d.n_classes(), 3);
        assert!(matches!(parse_sparse_dataset("#dim 2\n0 3:1\n"), Err(Error::Index { .. })));
    }

    #[test]
    fn empty_input_is_rejected() {
        assert_eq!(parse_sparse_dataset(""), Err(Error::EmptyDataset));
        assert_eq!(parse_sparse_dataset("#dim 4\n"), Err(Error::EmptyDataset));
    }

    #[test]
    fn bad_label_reports_line() {
        assert!(matches!(parse_sparse_dataset("x 1:1"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_sparse_dataset("0 1:1\n1 2:z\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_sparse_dataset("0 1:1  2:1\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_sparse_dataset("0 2:1 2:1\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn zero_index_is_an_index_error() {
        assert!(matches!(parse_sparse_dataset("0 0:1\n"), Err(Error::Index { index: 0, .. })));
    }

    #[test]
    fn write_then_read_round_trips() {
        let mut rng = SeededRng::new(3);
        let d = make_sparse_bow(30, 50, 3, 0.1, &mut rng).unwrap();
        let mut buf = Vec::new();
        write_sparse_dataset(&d, &mut buf).unwrap();
        let back = parse_sparse_dataset(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back.rows(), d.rows());
        assert_eq!(back.labels(), d.labels());
    }

    #[test]
    fn bow_rows_have_requested_nonzeros() {
        let mut rng = SeededRng::new(17);
        let d = make_sparse_bow(1000, 2000, 2, 0.005, &mut rng).unwrap();
        assert!(d.rows().iter().all(|r| r.nnz() == 10));
        let dense = make_sparse_bow(5, 40, 2, 1.0, &mut rng).unwrap();
        assert!(dense.rows().iter().all(|r| r.nnz() == 40));
    }

    #[test]
    fn bow_frequencies_are_skewed() {
        let mut rng = SeededRng::new(1);
        let d = make_sparse_bow(2000, 2000, 2, 0.005, &mut rng).unwrap();
        let mut counts = vec![0usize; 2000];
        for r in d.rows() {
            for &(j, _) in r.entries() {
                counts[j] += 1;
            }
        }
        let head: usize = counts[..20].iter().sum();
        let tail: usize = counts[1000..1020].iter().sum();
        assert!(head > 20 * tail.max(1), "head {head} tail {tail}");
    }

    #[test]
    fn bow_generation_is_deterministic() {
        let a = make_sparse_bow(50, 100, 3, 0.05, &mut SeededRng::new(8)).unwrap();
        let b = make_sparse_bow(50, 100, 3, 0.05, &mut SeededRng::new(8)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bow_rejects_tiny_density() {
        assert!(make_sparse_bow(10, 100, 2, 0.001, &mut SeededRng::new(0)).is_err());
    }
}
