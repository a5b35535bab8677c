//! Discretization of raw series into symbol matrices.
//!
//! Both rules work on consecutive column differences within each row, so an
//! `n x m` input yields an `n x (m-1)` symbol matrix. [`discretize_sign`]
//! emits 1 where the next value is greater than or equal to the current one
//! (a non-negative return) and 0 otherwise. [`discretize_quantile`] bins the
//! differences into `k` levels by rank-based empirical quantiles, either over
//! the pooled difference matrix or per column.

use crate::error::{Error, Result};
use crate::matrix::{DiscreteMatrix, RawSeriesMatrix};

/// Binarizes by sign of change: cell `(i, j)` is 1 iff `raw[i][j+1] >= raw[i][j]`.
///
/// Ties map to 1. All output alphabets have size 2; output column `j` keeps
/// the label of input column `j + 1`.
pub fn discretize_sign(raw: &RawSeriesMatrix) -> Result<DiscreteMatrix> {
    let n = raw.n_rows();
    let m = raw.n_cols() - 1;
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let src = raw.row(i);
        rows.push(
            src.windows(2)
                .map(|w| u32::from(w[1] >= w[0]))
                .collect::<Vec<u32>>(),
        );
    }
    DiscreteMatrix::new(
        rows,
        vec![2; m],
        raw.row_labels().to_vec(),
        raw.col_labels()[1..].to_vec(),
    )
}

/// Bins consecutive differences into `levels` quantile classes.
///
/// Breakpoints sit at the empirical quantiles `1/k, ..., (k-1)/k` of the
/// difference population (pooled over the whole matrix, or per column when
/// `per_column` is set), using the nearest-rank rule
/// `breakpoint(r) = sorted[floor(r * len / k)]`. A difference `d` gets the
/// level `#(breakpoints <= d)`, which makes every interval left-closed and
/// right-open except the last, and is bit-reproducible.
pub fn discretize_quantile(
    raw: &RawSeriesMatrix,
    levels: u32,
    per_column: bool,
) -> Result<DiscreteMatrix> {
    if levels < 2 {
        return Err(Error::Parameter(format!(
            "quantile discretization needs at least 2 levels, got {levels}"
        )));
    }
    let n = raw.n_rows();
    let m = raw.n_cols() - 1;

    // diffs[i][j] = raw[i][j+1] - raw[i][j]
    let diffs: Vec<Vec<f64>> = (0..n)
        .map(|i| raw.row(i).windows(2).map(|w| w[1] - w[0]).collect())
        .collect();

    let mut rows = vec![vec![0u32; m]; n];
    if per_column {
        for j in 0..m {
            let column: Vec<f64> = (0..n).map(|i| diffs[i][j]).collect();
            let breaks = quantile_breakpoints(column, levels);
            for i in 0..n {
                rows[i][j] = assign_level(&breaks, diffs[i][j]);
            }
        }
    } else {
        let pooled: Vec<f64> = diffs.iter().flatten().copied().collect();
        let breaks = quantile_breakpoints(pooled, levels);
        for i in 0..n {
            for j in 0..m {
                rows[i][j] = assign_level(&breaks, diffs[i][j]);
            }
        }
    }

    DiscreteMatrix::new(
        rows,
        vec![levels; m],
        raw.row_labels().to_vec(),
        raw.col_labels()[1..].to_vec(),
    )
}

/// Nearest-rank breakpoints at quantiles `r/k` for `r = 1..k-1`.
fn quantile_breakpoints(mut values: Vec<f64>, k: u32) -> Vec<f64> {
    values.sort_unstable_by(f64::total_cmp);
    let len = values.len();
    (1..k as usize)
        .map(|r| values[r * len / k as usize])
        .collect()
}

fn assign_level(breakpoints: &[f64], value: f64) -> u32 {
    breakpoints.partition_point(|b| *b <= value) as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::RawSeriesMatrix;
    use proptest::prelude::*;

    fn raw(rows: Vec<Vec<f64>>) -> RawSeriesMatrix {
        RawSeriesMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn sign_5x31_gives_5x30_binary() {
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|i| (0..31).map(|j| ((i * 7 + j * 3) % 11) as f64).collect())
            .collect();
        let d = discretize_sign(&raw(rows)).unwrap();
        assert_eq!(d.n_rows(), 5);
        assert_eq!(d.n_cols(), 30);
        assert!(d.alphabet_sizes().iter().all(|&k| k == 2));
    }

    #[test]
    fn sign_case_rule_with_tie() {
        let d = discretize_sign(&raw(vec![vec![3.0, 3.5, 3.5, 2.0]])).unwrap();
        assert_eq!(d.row(0), &[1, 1, 0]);
    }

    #[test]
    fn sign_constant_row_is_all_ones() {
        let d = discretize_sign(&raw(vec![vec![7.0, 7.0, 7.0]])).unwrap();
        assert_eq!(d.row(0), &[1, 1]);
    }

    #[test]
    fn sign_keeps_labels() {
        let m = RawSeriesMatrix::new(
            vec![vec![1.0, 2.0, 1.0]],
            vec!["a".into()],
            vec!["d0".into(), "d1".into(), "d2".into()],
        )
        .unwrap();
        let d = discretize_sign(&m).unwrap();
        assert_eq!(d.col_labels(), ["d1".to_string(), "d2".to_string()]);
        assert_eq!(d.row_labels(), ["a".to_string()]);
    }

    #[test]
    fn quantile_median_split() {
        // Differences are [-1, -1, 1, 1].
        let d = discretize_quantile(&raw(vec![vec![0.0, -1.0, -2.0, -1.0, 0.0]]), 2, false)
            .unwrap();
        assert_eq!(d.row(0), &[0, 0, 1, 1]);
    }

    #[test]
    fn quantile_three_levels_nine_distinct_values() {
        // Row is the prefix-sum of differences 1..=9, so the differences are
        // exactly 1..=9. Breakpoints by nearest rank: sorted[3] = 4 and
        // sorted[6] = 7, so 1,2,3 -> 0; 4,5,6 -> 1; 7,8,9 -> 2.
        let row = vec![0.0, 1.0, 3.0, 6.0, 10.0, 15.0, 21.0, 28.0, 36.0, 45.0];
        let d = discretize_quantile(&raw(vec![row]), 3, false).unwrap();
        assert_eq!(d.row(0), &[0, 0, 0, 1, 1, 1, 2, 2, 2]);
        let mut counts = [0usize; 3];
        for &s in d.row(0) {
            counts[s as usize] += 1;
        }
        assert_eq!(counts, [3, 3, 3]);
    }

    #[test]
    fn quantile_per_column_uses_column_population() {
        // Column 0 differences: [0.0, 10.0]; column 1 differences: [5.0, -5.0].
        // Per-column median breakpoints are 10.0 and 5.0.
        let d = discretize_quantile(
            &raw(vec![vec![0.0, 0.0, 5.0], vec![0.0, 10.0, 5.0]]),
            2,
            true,
        )
        .unwrap();
        assert_eq!(d.row(0), &[0, 1]);
        assert_eq!(d.row(1), &[1, 0]);
    }

    #[test]
    fn quantile_two_levels_matches_sign_when_median_is_zero() {
        // Differences [-2, 0, 0, 3] have median breakpoint 0, so the k=2
        // quantile split coincides with the sign rule.
        let input = raw(vec![vec![2.0, 0.0, 0.0, 0.0, 3.0]]);
        let by_quantile = discretize_quantile(&input, 2, false).unwrap();
        let by_sign = discretize_sign(&input).unwrap();
        assert_eq!(by_quantile.row(0), by_sign.row(0));
        assert_eq!(by_quantile.row(0), &[0, 1, 1, 1]);
    }

    #[test]
    fn quantile_rejects_single_level() {
        let err = discretize_quantile(&raw(vec![vec![1.0, 2.0]]), 1, false).unwrap_err();
        assert!(matches!(err, Error::Parameter(_)));
    }

    proptest! {
        #[test]
        fn sign_invariant_under_increasing_transform(
            rows in proptest::collection::vec(
                proptest::collection::vec(-1e3f64..1e3, 2..12),
                1..6,
            ),
            scale in 0.1f64..10.0,
            shift in -100.0f64..100.0,
        ) {
            let width = rows[0].len();
            let rows: Vec<Vec<f64>> = rows
                .into_iter()
                .map(|mut r| { r.truncate(width); while r.len() < width { r.push(0.0); } r })
                .collect();
            let base = raw(rows.clone());
            let mapped = raw(rows
                .iter()
                .map(|r| r.iter().map(|&x| scale * x + shift).collect())
                .collect());
            let a = discretize_sign(&base).unwrap();
            let b = discretize_sign(&mapped).unwrap();
            for i in 0..a.n_rows() {
                prop_assert_eq!(a.row(i), b.row(i));
            }
        }

        #[test]
        fn quantile_levels_in_range_and_shape(
            rows in proptest::collection::vec(
                proptest::collection::vec(-50f64..50.0, 3..10),
                1..6,
            ),
            k in 2u32..6,
            per_column in proptest::bool::ANY,
        ) {
            let width = rows[0].len();
            let rows: Vec<Vec<f64>> = rows
                .into_iter()
                .map(|mut r| { r.truncate(width); while r.len() < width { r.push(0.0); } r })
                .collect();
            let base = raw(rows);
            let d = discretize_quantile(&base, k, per_column).unwrap();
            prop_assert_eq!(d.n_cols(), base.n_cols() - 1);
            prop_assert_eq!(d.n_rows(), base.n_rows());
            for i in 0..d.n_rows() {
                for &s in d.row(i) {
                    prop_assert!(s < k);
                }
            }
        }
    }
}
