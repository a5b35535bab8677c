//! Matrix data model and CSV ingestion.
//!
//! Raw series live in a [`RawSeriesMatrix`] (finite reals, labeled rows and
//! columns). Symbol matrices live in a [`DiscreteMatrix`], where column `j`
//! draws from an alphabet of size `k_j >= 2`. A [`ColumnSet`] names the
//! retained columns of a candidate test.
//!
//! The CSV dialect is deliberately small: comma-separated UTF-8, optional
//! single header row, first field of every record is the row label, decimal
//! point, no thousands separators and no quoting.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Real-valued `n x m` series matrix with unique row labels.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeriesMatrix {
    values: Vec<f64>, // row-major
    n_rows: usize,
    n_cols: usize,
    row_labels: Vec<String>,
    col_labels: Vec<String>,
}

impl RawSeriesMatrix {
    /// Validates shape, finiteness and label uniqueness.
    pub fn new(
        rows: Vec<Vec<f64>>,
        row_labels: Vec<String>,
        col_labels: Vec<String>,
    ) -> Result<Self> {
        let n_rows = rows.len();
        if n_rows == 0 {
            return Err(Error::EmptyInput("matrix has no rows".into()));
        }
        let n_cols = rows[0].len();
        if n_cols < 2 {
            return Err(Error::Shape(format!(
                "raw series need at least 2 columns, got {n_cols}"
            )));
        }
        if row_labels.len() != n_rows {
            return Err(Error::Shape(format!(
                "{} row labels for {} rows",
                row_labels.len(),
                n_rows
            )));
        }
        if col_labels.len() != n_cols {
            return Err(Error::Shape(format!(
                "{} column labels for {} columns",
                col_labels.len(),
                n_cols
            )));
        }
        check_unique_labels(&row_labels)?;
        let mut values = Vec::with_capacity(n_rows * n_cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::Shape(format!(
                    "row {:?} has {} cells, expected {}",
                    row_labels[i],
                    row.len(),
                    n_cols
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::Parse {
                        row: row_labels[i].clone(),
                        col: col_labels[j].clone(),
                        reason: format!("non-finite value {v}"),
                    });
                }
                values.push(v);
            }
        }
        Ok(Self {
            values,
            n_rows,
            n_cols,
            row_labels,
            col_labels,
        })
    }

    /// Convenience constructor with synthetic labels `r0..` / `t0..`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        Self::new(rows, auto_labels("r", n_rows), auto_labels("t", n_cols))
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.n_cols..(row + 1) * self.n_cols]
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[String] {
        &self.col_labels
    }
}

/// Symbol matrix with per-column alphabet sizes `k_j >= 2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscreteMatrix {
    symbols: Vec<u32>, // row-major
    n_rows: usize,
    n_cols: usize,
    alphabet_sizes: Vec<u32>,
    row_labels: Vec<String>,
    col_labels: Vec<String>,
}

impl DiscreteMatrix {
    /// Validates every cell against its column alphabet.
    pub fn new(
        rows: Vec<Vec<u32>>,
        alphabet_sizes: Vec<u32>,
        row_labels: Vec<String>,
        col_labels: Vec<String>,
    ) -> Result<Self> {
        let n_rows = rows.len();
        if n_rows == 0 {
            return Err(Error::EmptyInput("matrix has no rows".into()));
        }
        let n_cols = rows[0].len();
        if n_cols == 0 {
            return Err(Error::Shape("matrix has no columns".into()));
        }
        if alphabet_sizes.len() != n_cols {
            return Err(Error::Parameter(format!(
                "{} alphabet sizes for {} columns",
                alphabet_sizes.len(),
                n_cols
            )));
        }
        if row_labels.len() != n_rows || col_labels.len() != n_cols {
            return Err(Error::Shape("label count does not match matrix shape".into()));
        }
        check_unique_labels(&row_labels)?;
        for (j, &k) in alphabet_sizes.iter().enumerate() {
            if k < 2 {
                return Err(Error::Parameter(format!(
                    "alphabet size of column {:?} is {k}, need at least 2",
                    col_labels[j]
                )));
            }
        }
        let mut symbols = Vec::with_capacity(n_rows * n_cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::Shape(format!(
                    "row {:?} has {} cells, expected {}",
                    row_labels[i],
                    row.len(),
                    n_cols
                )));
            }
            for (j, &s) in row.iter().enumerate() {
                if s >= alphabet_sizes[j] {
                    return Err(Error::SymbolOutOfRange {
                        row: row_labels[i].clone(),
                        col: col_labels[j].clone(),
                        value: i64::from(s),
                        size: alphabet_sizes[j],
                    });
                }
                symbols.push(s);
            }
        }
        Ok(Self {
            symbols,
            n_rows,
            n_cols,
            alphabet_sizes,
            row_labels,
            col_labels,
        })
    }

    /// Constructor with synthetic labels; infers alphabet sizes as
    /// `max(column) + 1` clamped below at 2 when none are given.
    pub fn from_rows(rows: Vec<Vec<u32>>, alphabet_sizes: Option<Vec<u32>>) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let sizes = match alphabet_sizes {
            Some(sizes) => sizes,
            None => infer_alphabet_sizes(&rows, n_cols)?,
        };
        Self::new(rows, sizes, auto_labels("r", n_rows), auto_labels("c", n_cols))
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn symbol(&self, row: usize, col: usize) -> u32 {
        self.symbols[row * self.n_cols + col]
    }

    pub fn row(&self, row: usize) -> &[u32] {
        &self.symbols[row * self.n_cols..(row + 1) * self.n_cols]
    }

    pub fn alphabet_sizes(&self) -> &[u32] {
        &self.alphabet_sizes
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[String] {
        &self.col_labels
    }

    /// Serializes to the CSV dialect: one header row (empty corner field,
    /// then column labels), then `label,s0,s1,...` per row.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push(',');
        out.push_str(&self.col_labels.join(","));
        out.push('\n');
        for i in 0..self.n_rows {
            out.push_str(&self.row_labels[i]);
            for &s in self.row(i) {
                let _ = write!(out, ",{s}");
            }
            out.push('\n');
        }
        out
    }
}

fn infer_alphabet_sizes(rows: &[Vec<u32>], n_cols: usize) -> Result<Vec<u32>> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("matrix has no rows".into()));
    }
    let mut sizes = vec![2u32; n_cols];
    for row in rows {
        for (j, &s) in row.iter().enumerate().take(n_cols) {
            sizes[j] = sizes[j].max(s.saturating_add(1));
        }
    }
    Ok(sizes)
}

/// A strictly increasing set of column indices; the retained columns of a
/// candidate test. Its length is the test length `l`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ColumnSet(Vec<usize>);

impl ColumnSet {
    /// Sorts and deduplicates the given indices.
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        ColumnSet(indices)
    }

    pub fn empty() -> Self {
        ColumnSet(Vec::new())
    }

    /// All columns `0..m`.
    pub fn full(m: usize) -> Self {
        ColumnSet((0..m).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.binary_search(&index).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    /// Whether `self` is a subset of `other`.
    pub fn is_subset_of(&self, other: &ColumnSet) -> bool {
        self.0.iter().all(|&i| other.contains(i))
    }

    /// Errors unless every index is below `m`.
    pub fn validate(&self, m: usize) -> Result<()> {
        match self.0.last() {
            Some(&max) if max >= m => Err(Error::ColumnOutOfRange { index: max, m }),
            _ => Ok(()),
        }
    }
}

impl FromIterator<usize> for ColumnSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        ColumnSet::new(iter.into_iter().collect())
    }
}

fn auto_labels(prefix: &str, count: usize) -> Vec<String> {
    (0..count).map(|i| format!("{prefix}{i}")).collect()
}

fn check_unique_labels(labels: &[String]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for label in labels {
        if !seen.insert(label.as_str()) {
            return Err(Error::DuplicateRowLabel {
                label: label.clone(),
            });
        }
    }
    Ok(())
}

struct CsvRecords {
    col_labels: Option<Vec<String>>,
    /// (row label, raw cell strings)
    records: Vec<(String, Vec<String>)>,
}

fn read_csv_records(path: &Path, has_header: bool) -> Result<CsvRecords> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut lines = text
        .lines()
        .map(|l| l.trim_end_matches('\r'))
        .filter(|l| !l.trim().is_empty());

    let mut col_labels = None;
    if has_header {
        let header = lines
            .next()
            .ok_or_else(|| Error::EmptyInput(path.display().to_string()))?;
        // The corner field (header of the label column) is ignored.
        let fields: Vec<&str> = header.split(',').collect();
        col_labels = Some(fields[1..].iter().map(|s| s.trim().to_string()).collect());
    }

    let mut records = Vec::new();
    let mut width: Option<usize> = col_labels.as_ref().map(Vec::len);
    for line in lines {
        let mut fields = line.split(',');
        let label = fields.next().unwrap_or("").trim().to_string();
        let cells: Vec<String> = fields.map(|s| s.trim().to_string()).collect();
        match width {
            None => width = Some(cells.len()),
            Some(w) if w != cells.len() => {
                return Err(Error::Shape(format!(
                    "row {:?} has {} cells, expected {}",
                    label,
                    cells.len(),
                    w
                )));
            }
            Some(_) => {}
        }
        records.push((label, cells));
    }
    if records.is_empty() {
        return Err(Error::EmptyInput(path.display().to_string()));
    }
    Ok(CsvRecords {
        col_labels,
        records,
    })
}

/// Loads a real-valued series matrix. The first field of each record is the
/// row label; a header row, when present, supplies the column labels,
/// otherwise they default to `t0,t1,...`.
pub fn load_raw_csv(path: &Path, has_header: bool) -> Result<RawSeriesMatrix> {
    let parsed = read_csv_records(path, has_header)?;
    let n_cols = parsed.records[0].1.len();
    let col_labels = parsed
        .col_labels
        .unwrap_or_else(|| auto_labels("t", n_cols));
    let mut rows = Vec::with_capacity(parsed.records.len());
    let mut row_labels = Vec::with_capacity(parsed.records.len());
    for (label, cells) in parsed.records {
        let mut row = Vec::with_capacity(cells.len());
        for (j, cell) in cells.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: label.clone(),
                col: col_labels[j].clone(),
                reason: format!("{cell:?} is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: label.clone(),
                    col: col_labels[j].clone(),
                    reason: format!("{cell:?} is not finite"),
                });
            }
            row.push(v);
        }
        rows.push(row);
        row_labels.push(label);
    }
    RawSeriesMatrix::new(rows, row_labels, col_labels)
}

/// Loads a symbol matrix. When `alphabet_sizes` is omitted each column's
/// size is inferred as `max + 1`, clamped below at 2.
pub fn load_discrete_csv(
    path: &Path,
    has_header: bool,
    alphabet_sizes: Option<Vec<u32>>,
) -> Result<DiscreteMatrix> {
    let parsed = read_csv_records(path, has_header)?;
    let n_cols = parsed.records[0].1.len();
    let col_labels = parsed
        .col_labels
        .unwrap_or_else(|| auto_labels("c", n_cols));
    let mut rows = Vec::with_capacity(parsed.records.len());
    let mut row_labels = Vec::with_capacity(parsed.records.len());
    for (label, cells) in parsed.records {
        let mut row = Vec::with_capacity(cells.len());
        for (j, cell) in cells.iter().enumerate() {
            let v: i64 = cell.parse().map_err(|_| Error::Parse {
                row: label.clone(),
                col: col_labels[j].clone(),
                reason: format!("{cell:?} is not an integer"),
            })?;
            if v < 0 {
                return Err(Error::SymbolOutOfRange {
                    row: label.clone(),
                    col: col_labels[j].clone(),
                    value: v,
                    size: alphabet_sizes.as_ref().map_or(0, |s| s[j.min(s.len() - 1)]),
                });
            }
            row.push(u32::try_from(v).map_err(|_| Error::Parse {
                row: label.clone(),
                col: col_labels[j].clone(),
                reason: format!("{cell:?} exceeds the supported symbol range"),
            })?);
        }
        rows.push(row);
        row_labels.push(label);
    }
    let sizes = match alphabet_sizes {
        Some(sizes) => {
            if sizes.len() != n_cols {
                return Err(Error::Parameter(format!(
                    "{} alphabet sizes for {} columns",
                    sizes.len(),
                    n_cols
                )));
            }
            sizes
        }
        None => infer_alphabet_sizes(&rows, n_cols)?,
    };
    DiscreteMatrix::new(rows, sizes, row_labels, col_labels)
}

/// Writes a symbol matrix in the same dialect `load_discrete_csv` reads.
pub fn write_discrete_csv(matrix: &DiscreteMatrix, path: &Path) -> Result<()> {
    std::fs::write(path, matrix.to_csv_string()).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_raw_5x31() {
        let mut csv = String::new();
        for i in 0..5 {
            csv.push_str(&format!("asset{i}"));
            for j in 0..31 {
                csv.push_str(&format!(",{}", (i * 31 + j) as f64 * 0.5));
            }
            csv.push('\n');
        }
        let f = write_temp(&csv);
        let m = load_raw_csv(f.path(), false).unwrap();
        assert_eq!(m.n_rows(), 5);
        assert_eq!(m.n_cols(), 31);
        assert_eq!(m.col_labels()[0], "t0");
        assert_eq!(m.row_labels()[4], "asset4");
    }

    #[test]
    fn load_raw_minimal() {
        let f = write_temp("A,1.0,2.0\n");
        let m = load_raw_csv(f.path(), false).unwrap();
        assert_eq!(m.n_rows(), 1);
        assert_eq!(m.n_cols(), 2);
        assert_eq!(m.row_labels(), ["A".to_string()]);
        assert_eq!(m.value(0, 1), 2.0);
    }

    #[test]
    fn load_raw_rejects_nan() {
        let f = write_temp("A,1.0,NaN\n");
        let err = load_raw_csv(f.path(), false).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
    }

    #[test]
    fn load_raw_rejects_non_numeric() {
        let f = write_temp("A,1.0,abc\nB,2.0,3.0\n");
        let err = load_raw_csv(f.path(), false).unwrap_err();
        match err {
            Error::Parse { row, col, .. } => {
                assert_eq!(row, "A");
                assert_eq!(col, "t1");
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn load_raw_rejects_ragged() {
        let f = write_temp("A,1.0,2.0\nB,3.0\n");
        assert!(matches!(
            load_raw_csv(f.path(), false),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn load_raw_rejects_empty() {
        let f = write_temp("");
        assert!(matches!(
            load_raw_csv(f.path(), false),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn load_raw_rejects_duplicate_labels() {
        let f = write_temp("A,1.0,2.0\nA,3.0,4.0\n");
        assert!(matches!(
            load_raw_csv(f.path(), false),
            Err(Error::DuplicateRowLabel { .. })
        ));
    }

    #[test]
    fn load_raw_header_supplies_labels() {
        let f = write_temp("id,mon,tue\nA,1.0,2.0\n");
        let m = load_raw_csv(f.path(), true).unwrap();
        assert_eq!(m.col_labels(), ["mon".to_string(), "tue".to_string()]);
    }

    #[test]
    fn discrete_inference_rule() {
        let f = write_temp("a,0,1\nb,1,0\n");
        let m = load_discrete_csv(f.path(), false, None).unwrap();
        assert_eq!(m.alphabet_sizes(), [2, 2]);
    }

    #[test]
    fn discrete_inference_clamps_constant_column_to_two() {
        let f = write_temp("a,0,2\nb,0,2\n");
        let m = load_discrete_csv(f.path(), false, None).unwrap();
        assert_eq!(m.alphabet_sizes(), [2, 3]);
    }

    #[test]
    fn discrete_declared_sizes_range_error() {
        let f = write_temp("a,0,2\n");
        let err = load_discrete_csv(f.path(), false, Some(vec![2, 2])).unwrap_err();
        match err {
            Error::SymbolOutOfRange {
                col, value, size, ..
            } => {
                assert_eq!(col, "c1");
                assert_eq!(value, 2);
                assert_eq!(size, 2);
            }
            other => panic!("expected range error, got {other}"),
        }
    }

    #[test]
    fn discrete_negative_cell_is_range_error() {
        let f = write_temp("a,0,-1\n");
        assert!(matches!(
            load_discrete_csv(f.path(), false, None),
            Err(Error::SymbolOutOfRange { .. })
        ));
    }

    #[test]
    fn discrete_mixed_sizes() {
        let f = write_temp("a,0,1,2\nb,1,0,2\n");
        let m = load_discrete_csv(f.path(), false, Some(vec![2, 2, 3])).unwrap();
        assert_eq!(m.n_rows(), 2);
        assert_eq!(m.n_cols(), 3);
        assert_eq!(m.symbol(1, 2), 2);
    }

    #[test]
    fn discrete_csv_round_trip() {
        let m = DiscreteMatrix::from_rows(
            vec![vec![0, 1, 2], vec![1, 0, 2], vec![0, 0, 1]],
            Some(vec![2, 2, 3]),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        write_discrete_csv(&m, &path).unwrap();
        let back = load_discrete_csv(&path, true, Some(vec![2, 2, 3])).unwrap();
        assert_eq!(m, back);
    }

    proptest::proptest! {
        #[test]
        fn csv_round_trip_identity(
            rows in proptest::collection::vec(
                proptest::collection::vec(0u32..4, 1..8),
                1..8,
            ),
        ) {
            let width = rows[0].len();
            let rows: Vec<Vec<u32>> = rows
                .into_iter()
                .map(|mut r| { r.truncate(width); while r.len() < width { r.push(0); } r })
                .collect();
            let sizes = vec![4u32; width];
            let m = DiscreteMatrix::from_rows(rows, Some(sizes.clone())).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("rt.csv");
            write_discrete_csv(&m, &path).unwrap();
            let back = load_discrete_csv(&path, true, Some(sizes)).unwrap();
            proptest::prop_assert_eq!(m, back);
        }
    }

    #[test]
    fn column_set_normalizes() {
        let s = ColumnSet::new(vec![3, 1, 3, 0]);
        assert_eq!(s.indices(), &[0, 1, 3]);
        assert!(s.contains(1));
        assert!(!s.contains(2));
        assert!(s.validate(4).is_ok());
        assert!(matches!(
            s.validate(3),
            Err(Error::ColumnOutOfRange { index: 3, m: 3 })
        ));
    }

    #[test]
    fn column_set_subset() {
        let a = ColumnSet::new(vec![1, 3]);
        let b = ColumnSet::new(vec![0, 1, 3]);
        assert!(a.is_subset_of(&b));
        assert!(!b.is_subset_of(&a));
        assert!(ColumnSet::empty().is_subset_of(&a));
    }
}
