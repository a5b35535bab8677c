//! Tests, dead-end tests, matching rows and clustering.
//!
//! A column set is a *test* when the row projections onto it are pairwise
//! distinct, and a *dead-end test* when additionally no proper subset is a
//! test. Tests are exactly the hitting sets of the pairwise discernibility
//! family (the columns where each row pair differs), so dead-end tests are
//! its inclusion-minimal hitting sets; enumeration walks that family with
//! critical-edge bookkeeping rather than scanning all `2^m` subsets.
//!
//! Column counts are limited only by memory (well beyond 1024 columns); the
//! search itself is single-threaded and fully deterministic apart from
//! wall-clock budget trips.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{ColumnSet, DiscreteMatrix};

/// Columns on which one unordered row pair differs.
#[derive(Debug, Clone)]
pub struct RowPairDiff {
    pub rows: (usize, usize),
    pub diff_columns: ColumnSet,
}

/// All pairwise difference sets plus their inclusion-minimal antichain.
#[derive(Debug, Clone)]
pub struct DiscernibilityFamily {
    pub pairs: Vec<RowPairDiff>,
    pub reduced: Vec<ColumnSet>,
}

/// Which budget stopped an enumeration, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BudgetHit {
    None,
    Count,
    Time,
}

/// Result of dead-end test enumeration.
#[derive(Debug, Clone)]
pub struct DeadEndTestReport {
    /// Ascending by size, then lexicographic by column indices.
    pub tests: Vec<ColumnSet>,
    /// Smallest found size; the global minimum when `exhausted`.
    pub min_length: Option<usize>,
    /// True iff the search space was provably explored in full.
    pub exhausted: bool,
    pub elapsed: Duration,
    pub budget_hit: BudgetHit,
}

/// Exact minimal test length, or the best bound proven before the budget ran
/// out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinTestLength {
    Exact(usize),
    LowerBound(usize),
}

impl MinTestLength {
    pub fn value(self) -> usize {
        match self {
            MinTestLength::Exact(v) | MinTestLength::LowerBound(v) => v,
        }
    }

    pub fn is_exact(self) -> bool {
        matches!(self, MinTestLength::Exact(_))
    }
}

/// Equivalence classes of rows under projection onto `defining_columns`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowPartition {
    /// Listed in order of first member; each cluster ascending.
    pub clusters: Vec<Vec<usize>>,
    pub defining_columns: ColumnSet,
}

/// Membership of a column across enumerated dead-end tests.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnImportance {
    pub column: usize,
    pub count: usize,
    pub frequency: f64,
}

/// True iff all row projections onto `cols` are pairwise distinct.
pub fn is_test(matrix: &DiscreteMatrix, cols: &ColumnSet) -> Result<bool> {
    cols.validate(matrix.n_cols())?;
    let mut seen = std::collections::HashSet::with_capacity(matrix.n_rows());
    for i in 0..matrix.n_rows() {
        let projection: Vec<u32> = cols.iter().map(|j| matrix.symbol(i, j)).collect();
        if !seen.insert(projection) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// True iff `cols` is a test and dropping any single column breaks it.
///
/// Single-column removal suffices because the test property is monotone in
/// the column set.
pub fn is_dead_end_test(matrix: &DiscreteMatrix, cols: &ColumnSet) -> Result<bool> {
    if !is_test(matrix, cols)? {
        return Ok(false);
    }
    for dropped in cols.iter() {
        let subset: ColumnSet = cols.iter().filter(|&j| j != dropped).collect();
        if is_test(matrix, &subset)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Computes the per-pair difference sets and their minimal antichain.
///
/// Errors with the full list of matching pairs when any two rows are
/// identical, since no test exists for such a matrix.
pub fn discernibility(matrix: &DiscreteMatrix) -> Result<DiscernibilityFamily> {
    let n = matrix.n_rows();
    if n < 2 {
        return Err(Error::Shape(format!(
            "discernibility needs at least 2 rows, got {n}"
        )));
    }
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    let mut matching = Vec::new();
    for i1 in 0..n {
        for i2 in i1 + 1..n {
            let diff: ColumnSet = (0..matrix.n_cols())
                .filter(|&j| matrix.symbol(i1, j) != matrix.symbol(i2, j))
                .collect();
            if diff.is_empty() {
                matching.push((
                    matrix.row_labels()[i1].clone(),
                    matrix.row_labels()[i2].clone(),
                ));
            }
            pairs.push(RowPairDiff {
                rows: (i1, i2),
                diff_columns: diff,
            });
        }
    }
    if !matching.is_empty() {
        return Err(Error::IndistinguishableRows { pairs: matching });
    }

    let reduced = minimal_antichain(pairs.iter().map(|p| &p.diff_columns));
    Ok(DiscernibilityFamily { pairs, reduced })
}

/// Keeps the inclusion-minimal sets, deduplicated, ordered by size then
/// lexicographically.
fn minimal_antichain<'a>(sets: impl Iterator<Item = &'a ColumnSet>) -> Vec<ColumnSet> {
    let mut sorted: Vec<ColumnSet> = sets.cloned().collect();
    sorted.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    sorted.dedup();
    let mut kept: Vec<ColumnSet> = Vec::new();
    for candidate in sorted {
        if !kept.iter().any(|k| k.is_subset_of(&candidate)) {
            kept.push(candidate);
        }
    }
    kept
}

/// Partitions rows by equality of their projections onto `cols`.
///
/// The empty set yields a single cluster; under all columns, clusters of
/// size at least 2 are groups of fully matching rows.
pub fn find_matching_row_groups(
    matrix: &DiscreteMatrix,
    cols: &ColumnSet,
) -> Result<RowPartition> {
    cols.validate(matrix.n_cols())?;
    let mut order: Vec<Vec<usize>> = Vec::new();
    let mut index: HashMap<Vec<u32>, usize> = HashMap::new();
    for i in 0..matrix.n_rows() {
        let key: Vec<u32> = cols.iter().map(|j| matrix.symbol(i, j)).collect();
        match index.get(&key) {
            Some(&c) => order[c].push(i),
            None => {
                index.insert(key, order.len());
                order.push(vec![i]);
            }
        }
    }
    Ok(RowPartition {
        clusters: order,
        defining_columns: cols.clone(),
    })
}

/// Counts dead-end test membership per column, sorted by count descending
/// then column ascending.
pub fn column_importance(report: &DeadEndTestReport, m: usize) -> Result<Vec<ColumnImportance>> {
    if report.tests.is_empty() {
        return Err(Error::EmptyReport);
    }
    let mut counts = vec![0usize; m];
    for test in &report.tests {
        for col in test.iter() {
            if col < m {
                counts[col] += 1;
            }
        }
    }
    let total = report.tests.len();
    let mut ranking: Vec<ColumnImportance> = counts
        .into_iter()
        .enumerate()
        .map(|(column, count)| ColumnImportance {
            column,
            count,
            frequency: count as f64 / total as f64,
        })
        .collect();
    ranking.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.column.cmp(&b.column)));
    Ok(ranking)
}

/// Smallest `r` such that the product of the `r` largest alphabet sizes
/// reaches `n`: no test shorter than this can separate `n` rows.
pub fn pigeonhole_lower_bound(alphabet_sizes: &[u32], n: usize) -> usize {
    let mut sizes: Vec<u64> = alphabet_sizes.iter().map(|&k| u64::from(k)).collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    let mut product: u128 = 1;
    for (count, &k) in sizes.iter().enumerate() {
        if product >= n as u128 {
            return count;
        }
        product = product.saturating_mul(u128::from(k));
    }
    if product >= n as u128 {
        sizes.len()
    } else {
        // More rows than distinct row values; no test of any length exists,
        // but the bound is still the full width.
        sizes.len()
    }
}

/// Enumerates every dead-end test within the given budgets.
///
/// Output order is deterministic (size ascending, then lexicographic).
/// `exhausted` is true only when the full search space was explored before
/// either budget tripped.
pub fn enumerate_dead_end_tests(
    matrix: &DiscreteMatrix,
    max_count: usize,
    time_budget: Duration,
) -> Result<DeadEndTestReport> {
    if max_count == 0 {
        return Err(Error::Parameter("max_count must be at least 1".into()));
    }
    if time_budget.is_zero() {
        return Err(Error::Parameter("time budget must be positive".into()));
    }
    let start = Instant::now();
    let family = discernibility(matrix)?;
    let mut search = HittingSetSearch::new(
        &family.reduced,
        matrix.n_cols(),
        Some(max_count),
        start.checked_add(time_budget),
        None,
    );
    search.run();
    let mut tests: Vec<ColumnSet> = search
        .results
        .into_iter()
        .map(ColumnSet::new)
        .collect();
    tests.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    let budget_hit = search.tripped.unwrap_or(BudgetHit::None);
    Ok(DeadEndTestReport {
        min_length: tests.iter().map(ColumnSet::len).min(),
        tests,
        exhausted: budget_hit == BudgetHit::None,
        elapsed: start.elapsed(),
        budget_hit,
    })
}

/// Exact minimal test length by iterative deepening from the pigeonhole
/// bound; returns the proven lower bound when the budget trips first.
pub fn min_test_length(matrix: &DiscreteMatrix, time_budget: Duration) -> Result<MinTestLength> {
    if time_budget.is_zero() {
        return Err(Error::Parameter("time budget must be positive".into()));
    }
    let start = Instant::now();
    let deadline = start.checked_add(time_budget);
    let family = discernibility(matrix)?;
    let m = matrix.n_cols();
    let mut depth = pigeonhole_lower_bound(matrix.alphabet_sizes(), matrix.n_rows()).max(1);
    loop {
        let mut search = HittingSetSearch::new(&family.reduced, m, Some(1), deadline, Some(depth));
        search.run();
        if !search.results.is_empty() {
            return Ok(MinTestLength::Exact(depth));
        }
        if search.tripped == Some(BudgetHit::Time) {
            return Ok(MinTestLength::LowerBound(depth));
        }
        // Depth level exhausted with no cover: the minimum exceeds `depth`.
        depth += 1;
        debug_assert!(depth <= m, "full column set is always a test here");
    }
}

/// Fixed-width bitset over column indices.
#[derive(Clone, PartialEq, Eq)]
struct Bitset {
    words: Vec<u64>,
}

impl Bitset {
    fn zeros(m: usize) -> Self {
        Bitset {
            words: vec![0; m.div_ceil(64)],
        }
    }

    fn from_column_set(set: &ColumnSet, m: usize) -> Self {
        let mut bits = Bitset::zeros(m);
        for i in set.iter() {
            bits.set(i);
        }
        bits
    }

    fn set(&mut self, i: usize) {
        self.words[i / 64] |= 1u64 << (i % 64);
    }

    fn clear(&mut self, i: usize) {
        self.words[i / 64] &= !(1u64 << (i % 64));
    }

    fn intersection_count(&self, other: &Bitset) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    fn intersection_ones(&self, other: &Bitset) -> Vec<usize> {
        let mut ones = Vec::new();
        for (w, (a, b)) in self.words.iter().zip(&other.words).enumerate() {
            let mut bits = a & b;
            while bits != 0 {
                let tz = bits.trailing_zeros() as usize;
                ones.push(w * 64 + tz);
                bits &= bits - 1;
            }
        }
        ones
    }
}

/// Minimal-hitting-set enumeration over an antichain of edges.
///
/// Maintains, per edge, how many chosen columns hit it and (via an XOR
/// accumulator) the unique hitter when exactly one does; a chosen column with
/// no critical edge can never extend to a minimal hitting set, which is the
/// branch-and-bound prune. Banning each branch column for its later siblings
/// makes every minimal hitting set appear exactly once.
struct HittingSetSearch {
    occurrence: Vec<Vec<usize>>,
    hit_count: Vec<u32>,
    hitter_xor: Vec<usize>,
    crit_count: Vec<u32>,
    chosen: Vec<usize>,
    cand: Bitset,
    uncovered: usize,
    results: Vec<Vec<usize>>,
    max_count: Option<usize>,
    deadline: Option<Instant>,
    depth_limit: Option<usize>,
    nodes: u64,
    tripped: Option<BudgetHit>,
    edge_sets: Vec<Bitset>,
}

impl HittingSetSearch {
    fn new(
        reduced: &[ColumnSet],
        m: usize,
        max_count: Option<usize>,
        deadline: Option<Instant>,
        depth_limit: Option<usize>,
    ) -> HittingSetSearch {
        let edge_sets: Vec<Bitset> = reduced
            .iter()
            .map(|set| Bitset::from_column_set(set, m))
            .collect();
        let mut occurrence = vec![Vec::new(); m];
        for (e, set) in reduced.iter().enumerate() {
            for col in set.iter() {
                occurrence[col].push(e);
            }
        }
        let mut cand = Bitset::zeros(m);
        for set in reduced {
            for col in set.iter() {
                cand.set(col);
            }
        }
        HittingSetSearch {
            occurrence,
            hit_count: vec![0; reduced.len()],
            hitter_xor: vec![0; reduced.len()],
            crit_count: vec![0; m],
            chosen: Vec::new(),
            cand,
            uncovered: reduced.len(),
            results: Vec::new(),
            max_count,
            deadline,
            depth_limit,
            nodes: 0,
            tripped: None,
            edge_sets,
        }
    }

    fn run(&mut self) {
        if self.uncovered == 0 {
            // n rows already distinct on the empty projection only when no
            // pair exists; with a validated family this means no edges.
            self.results.push(Vec::new());
            return;
        }
        self.search();
    }

    /// Adds `v`; returns false when some chosen column lost its last
    /// critical edge (no minimal hitting set extends this selection).
    fn add(&mut self, v: usize) -> bool {
        self.chosen.push(v);
        for idx in 0..self.occurrence[v].len() {
            let e = self.occurrence[v][idx];
            let old = self.hit_count[e];
            self.hit_count[e] = old + 1;
            match old {
                0 => {
                    self.uncovered -= 1;
                    self.hitter_xor[e] ^= v;
                    self.crit_count[v] += 1;
                }
                1 => {
                    self.crit_count[self.hitter_xor[e]] -= 1;
                    self.hitter_xor[e] ^= v;
                }
                _ => self.hitter_xor[e] ^= v,
            }
        }
        self.chosen.iter().all(|&u| self.crit_count[u] > 0)
    }

    fn remove(&mut self, v: usize) {
        for idx in 0..self.occurrence[v].len() {
            let e = self.occurrence[v][idx];
            let old = self.hit_count[e];
            self.hit_count[e] = old - 1;
            match old {
                1 => {
                    self.uncovered += 1;
                    self.crit_count[v] -= 1;
                    self.hitter_xor[e] ^= v;
                }
                2 => {
                    self.hitter_xor[e] ^= v;
                    self.crit_count[self.hitter_xor[e]] += 1;
                }
                _ => self.hitter_xor[e] ^= v,
            }
        }
        self.chosen.pop();
    }

    fn pick_uncovered_edge(&self) -> Option<(usize, Vec<usize>)> {
        let mut best: Option<(usize, usize)> = None;
        for e in 0..self.hit_count.len() {
            if self.hit_count[e] != 0 {
                continue;
            }
            let options = self.edge_sets[e].intersection_count(&self.cand);
            if best.is_none_or(|(_, b)| options < b) {
                best = Some((e, options));
                if options <= 1 {
                    break;
                }
            }
        }
        best.map(|(e, _)| (e, self.edge_sets[e].intersection_ones(&self.cand)))
    }

    fn search(&mut self) {
        self.nodes += 1;
        if self.nodes.is_multiple_of(256) {
            if let Some(deadline) = self.deadline {
                if Instant::now() >= deadline {
                    self.tripped = Some(BudgetHit::Time);
                    return;
                }
            }
        }
        if self.uncovered == 0 {
            let mut found = self.chosen.clone();
            found.sort_unstable();
            self.results.push(found);
            if let Some(cap) = self.max_count {
                if self.results.len() >= cap {
                    self.tripped = Some(BudgetHit::Count);
                }
            }
            return;
        }
        if let Some(limit) = self.depth_limit {
            if self.chosen.len() >= limit {
                return;
            }
        }
        let Some((_, branch_cols)) = self.pick_uncovered_edge() else {
            return;
        };
        let mut banned = Vec::with_capacity(branch_cols.len());
        for &v in &branch_cols {
            let viable = self.add(v);
            if viable {
                self.search();
            }
            self.remove(v);
            if self.tripped.is_some() {
                break;
            }
            self.cand.clear(v);
            banned.push(v);
        }
        for v in banned {
            self.cand.set(v);
        }
    }
}
