//! Closed-form probabilities for row matches and matching tests.
//!
//! All quantities assume entries drawn independently and uniformly from each
//! column's alphabet (the only model under which the closed forms hold).
//! Every result is carried in dual form: a log-space/float pair that stays
//! finite far beyond the range where `K = k_1 k_2 ... k_m` overflows, and an
//! optional exact rational computed with big integers, gated by documented
//! tractability thresholds.

use num::bigint::BigInt;
use num::rational::Ratio;
use num::{BigUint, One, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type BigRational = Ratio<BigInt>;

/// Largest `n * bits(K)` for which the exact row-match path is attempted.
pub const ROW_MATCH_EXACT_MAX_BITS: u64 = 1 << 17;
/// Exact matching-test path limits: columns and `(n-1) * bits(K)`.
pub const MATCHING_EXACT_MAX_M: usize = 1024;
pub const MATCHING_EXACT_MAX_BITS: u64 = 1 << 15;
/// The literal subset-sum oracle enumerates `2^m` subsets.
pub const ORACLE_MAX_M: usize = 20;

/// Row count plus per-column alphabet sizes; the parameter set of every
/// probability in this module.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlphabetProfile {
    sizes: Vec<u32>,
    n: u64,
}

impl AlphabetProfile {
    pub fn new(sizes: Vec<u32>, n: u64) -> Result<Self> {
        if n < 1 {
            return Err(Error::Parameter("row count n must be at least 1".into()));
        }
        if sizes.is_empty() {
            return Err(Error::Parameter("profile needs at least one column".into()));
        }
        if let Some(&k) = sizes.iter().find(|&&k| k < 2) {
            return Err(Error::Parameter(format!(
                "alphabet sizes must be at least 2, got {k}"
            )));
        }
        Ok(Self { sizes, n })
    }

    pub fn uniform(m: usize, k: u32, n: u64) -> Result<Self> {
        if m < 1 {
            return Err(Error::Parameter("column count m must be at least 1".into()));
        }
        Self::new(vec![k; m], n)
    }

    pub fn sizes(&self) -> &[u32] {
        &self.sizes
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn m(&self) -> usize {
        self.sizes.len()
    }

    /// `ln K = sum of ln k_j`, never materializing `K`.
    fn log_k_total(&self) -> f64 {
        let mut sum = NeumaierSum::new();
        for &k in &self.sizes {
            sum.add(f64::from(k).ln());
        }
        sum.value()
    }

    /// `Some(K)` when `K <= bound`, `None` when the product exceeds it.
    fn k_product_at_most(&self, bound: u64) -> Option<u64> {
        let mut product: u64 = 1;
        for &k in &self.sizes {
            product = product.checked_mul(u64::from(k))?;
            if product > bound {
                return None;
            }
        }
        Some(product)
    }

    fn k_product_big(&self) -> BigUint {
        let mut product = BigUint::one();
        for &k in &self.sizes {
            product *= BigUint::from(k);
        }
        product
    }
}

/// A probability in dual form: natural log (`-inf` encodes exactly 0), a
/// float in `[0, 1]`, and an optional exact rational.
#[derive(Debug, Clone)]
pub struct ProbabilityValue {
    pub log_value: f64,
    pub float_value: f64,
    pub exact: Option<BigRational>,
}

impl ProbabilityValue {
    fn zero(with_exact: bool) -> Self {
        Self {
            log_value: f64::NEG_INFINITY,
            float_value: 0.0,
            exact: with_exact.then(BigRational::zero),
        }
    }

    fn one(with_exact: bool) -> Self {
        Self {
            log_value: 0.0,
            float_value: 1.0,
            exact: with_exact.then(BigRational::one),
        }
    }
}

/// Probability that some two of `n` rows agree on all `m` columns when every
/// cell takes one of `k` values: `1 - K(K-1)...(K-n+1)/K^n` with `K = k^m`.
pub fn prob_row_match_uniform(n: u64, m: usize, k: u32, exact: bool) -> Result<ProbabilityValue> {
    let profile = AlphabetProfile::uniform(m, k, n)?;
    prob_row_match_profile(&profile, exact)
}

/// Row-match probability for per-column alphabet sizes, `K = k_1 k_2 ... k_m`.
///
/// The float path works entirely in log space; the exact path is attempted
/// only while `n * bits(K)` stays within [`ROW_MATCH_EXACT_MAX_BITS`].
pub fn prob_row_match_profile(profile: &AlphabetProfile, exact: bool) -> Result<ProbabilityValue> {
    let n = profile.n();
    if n == 1 {
        // No pair exists.
        return Ok(ProbabilityValue::zero(exact));
    }
    // Pigeonhole saturation: more rows than distinct row values.
    if let Some(k_product) = profile.k_product_at_most(n) {
        if k_product < n {
            return Ok(ProbabilityValue::one(exact));
        }
    }

    let log_k_total = profile.log_k_total();
    let mut sum = NeumaierSum::new();
    let mut rounded_to_one = false;
    for t in 1..n {
        // log1p(-t/K) via t/K = exp(ln t - ln K); underflow leaves the term 0.
        let ratio = ((t as f64).ln() - log_k_total).exp();
        if ratio >= 1.0 {
            // Only reachable by rounding when n is within 1 ulp of K; the
            // no-collision product is 0 at double precision.
            rounded_to_one = true;
            break;
        }
        sum.add((-ratio).ln_1p());
    }
    let s = if rounded_to_one {
        f64::NEG_INFINITY
    } else {
        sum.value().min(0.0)
    };
    let float_value = (-s.exp_m1()).clamp(0.0, 1.0);
    let log_value = if float_value > 0.0 {
        float_value.ln()
    } else {
        // Every t/K underflowed; first-order tail ln(n(n-1)/2) - ln K.
        (n as f64).ln() + ((n - 1) as f64).ln() - std::f64::consts::LN_2 - log_k_total
    };

    let exact_value = if exact {
        Some(row_match_exact(profile)?)
    } else {
        None
    };
    Ok(ProbabilityValue {
        log_value,
        float_value,
        exact: exact_value,
    })
}

fn row_match_exact(profile: &AlphabetProfile) -> Result<BigRational> {
    let n = profile.n();
    let k_product = profile.k_product_big();
    let bits = k_product.bits() * n;
    if bits > ROW_MATCH_EXACT_MAX_BITS {
        return Err(Error::ExactIntractable(format!(
            "row-match exact path needs n * bits(K) <= {ROW_MATCH_EXACT_MAX_BITS}, got {bits}"
        )));
    }
    let mut falling = BigUint::one();
    for t in 0..n {
        falling *= &k_product - BigUint::from(t);
    }
    let denom = k_product.pow(u32::try_from(n).expect("n bounded by the bits gate"));
    let num = &denom - falling;
    Ok(big_ratio(num, denom))
}

/// Probability that at least `l` of the `m` columns are non-constant across
/// the `n` rows.
///
/// Each column is independently non-constant with probability
/// `p_i = 1 - k_i^{-(n-1)}`, so the count of non-constant columns follows a
/// Poisson-binomial distribution whose upper tail this returns. Evaluated by
/// the O(m^2) convolution recurrence in compensated double precision; the
/// float tail cannot underflow for m <= 1022 because every `p_i >= 1/2`.
pub fn prob_matching_test(
    profile: &AlphabetProfile,
    l: usize,
    exact: bool,
) -> Result<ProbabilityValue> {
    let n = profile.n();
    let m = profile.m();
    if n == 1 {
        // Single row: every column is trivially constant.
        return Ok(if l == 0 {
            ProbabilityValue::one(exact)
        } else {
            ProbabilityValue::zero(exact)
        });
    }
    if l > m {
        return Ok(ProbabilityValue::zero(exact));
    }
    if l == 0 {
        return Ok(ProbabilityValue::one(exact));
    }

    let mut ps = Vec::with_capacity(m);
    let mut qs = Vec::with_capacity(m);
    let mut log_p_sum = NeumaierSum::new();
    for &k in profile.sizes() {
        let log_q = -((n - 1) as f64) * f64::from(k).ln();
        let q = log_q.exp();
        let p = (-log_q.exp_m1()).clamp(0.0, 1.0);
        qs.push(q);
        ps.push(p);
        log_p_sum.add(p.ln());
    }
    let float_value = poisson_binomial_tail(&ps, &qs, l);
    let log_value = if float_value > 0.0 {
        float_value.ln()
    } else if l == m {
        // Tail equals the product of all p_i; recover its log directly.
        log_p_sum.value()
    } else {
        f64::NEG_INFINITY
    };

    let exact_value = if exact {
        Some(matching_test_exact(profile, l)?)
    } else {
        None
    };
    Ok(ProbabilityValue {
        log_value,
        float_value,
        exact: exact_value,
    })
}

fn matching_test_exact(profile: &AlphabetProfile, l: usize) -> Result<BigRational> {
    let n = profile.n();
    let m = profile.m();
    let bits_estimate = profile
        .sizes()
        .iter()
        .map(|&k| u64::from(u32::BITS - k.leading_zeros()))
        .sum::<u64>()
        .saturating_mul(n - 1);
    if m > MATCHING_EXACT_MAX_M || bits_estimate > MATCHING_EXACT_MAX_BITS {
        return Err(Error::ExactIntractable(format!(
            "matching-test exact path needs m <= {MATCHING_EXACT_MAX_M} and \
             (n-1) * bits(K) <= {MATCHING_EXACT_MAX_BITS}, got m = {m}, bits = {bits_estimate}"
        )));
    }
    let exponent =
        u32::try_from(n - 1).map_err(|_| Error::Parameter(format!("n too large: {n}")))?;

    // Count-distribution numerators over the common denominator prod k_i^(n-1):
    // a constant column contributes weight 1, a non-constant one k_i^(n-1) - 1.
    let mut numerators = vec![BigUint::zero(); m + 1];
    numerators[0] = BigUint::one();
    let mut denom = BigUint::one();
    for (i, &k) in profile.sizes().iter().enumerate() {
        let k_pow = BigUint::from(k).pow(exponent);
        let weight = &k_pow - BigUint::one();
        denom *= &k_pow;
        for c in (0..=i + 1).rev() {
            let mut value = if c <= i {
                numerators[c].clone()
            } else {
                BigUint::zero()
            };
            if c >= 1 {
                value += &numerators[c - 1] * &weight;
            }
            numerators[c] = value;
        }
    }
    let tail: BigUint = numerators[l..].iter().sum();
    Ok(big_ratio(tail, denom))
}

/// Literal term-by-term subset sum `sum over |S| >= l of
/// prod_{i in S}(k_i^{n-1} - 1) / K^{n-1}` with big integers.
///
/// This is the slow, transparent oracle for [`prob_matching_test`]; it always
/// carries the exact rational and refuses more than [`ORACLE_MAX_M`] columns.
pub fn prob_matching_test_subset_oracle(
    profile: &AlphabetProfile,
    l: usize,
) -> Result<ProbabilityValue> {
    let n = profile.n();
    let m = profile.m();
    if m > ORACLE_MAX_M {
        return Err(Error::OracleRange {
            m,
            limit: ORACLE_MAX_M,
        });
    }
    if n < 2 {
        return Err(Error::Parameter(
            "subset-sum oracle requires at least 2 rows".into(),
        ));
    }
    let exponent =
        u32::try_from(n - 1).map_err(|_| Error::Parameter(format!("n too large: {n}")))?;
    let weights: Vec<BigUint> = profile
        .sizes()
        .iter()
        .map(|&k| BigUint::from(k).pow(exponent) - BigUint::one())
        .collect();

    let mut size_sums = vec![BigUint::zero(); m + 1];
    subset_products(&weights, 0, 0, BigUint::one(), &mut size_sums);
    let numerator: BigUint = size_sums[l.min(m + 1)..].iter().sum();
    let denominator = profile.k_product_big().pow(exponent);
    let exact = big_ratio(numerator, denominator);

    let float_value = ratio_to_f64(&exact);
    let log_value = if float_value > 0.0 {
        float_value.ln()
    } else if exact.is_zero() {
        f64::NEG_INFINITY
    } else {
        big_ln(&exact.numer().to_biguint().expect("non-negative"))
            - big_ln(&exact.denom().to_biguint().expect("positive"))
    };
    Ok(ProbabilityValue {
        log_value,
        float_value,
        exact: Some(exact),
    })
}

fn subset_products(
    weights: &[BigUint],
    index: usize,
    size: usize,
    product: BigUint,
    size_sums: &mut [BigUint],
) {
    if index == weights.len() {
        size_sums[size] += product;
        return;
    }
    subset_products(weights, index + 1, size, product.clone(), size_sums);
    let included = product * &weights[index];
    subset_products(weights, index + 1, size + 1, included, size_sums);
}

/// Probability that `n` independent uniform symbols over `k` values all
/// agree: `k^{-(n-1)}`. The per-column building block of the matching-test
/// formula.
pub fn prob_column_all_equal(k: u32, n: u64, exact: bool) -> Result<ProbabilityValue> {
    if k < 2 {
        return Err(Error::Parameter(format!(
            "alphabet size must be at least 2, got {k}"
        )));
    }
    if n < 1 {
        return Err(Error::Parameter("row count n must be at least 1".into()));
    }
    let log_value = -((n - 1) as f64) * f64::from(k).ln();
    let float_value = log_value.exp();
    let exact_value = if exact {
        let bits = u64::from(u32::BITS - k.leading_zeros()) * (n - 1);
        if bits > ROW_MATCH_EXACT_MAX_BITS {
            return Err(Error::ExactIntractable(format!(
                "column-constancy exact path needs (n-1) * bits(k) <= \
                 {ROW_MATCH_EXACT_MAX_BITS}, got {bits}"
            )));
        }
        let exponent =
            u32::try_from(n - 1).map_err(|_| Error::Parameter(format!("n too large: {n}")))?;
        Some(big_ratio(BigUint::one(), BigUint::from(k).pow(exponent)))
    } else {
        None
    };
    Ok(ProbabilityValue {
        log_value,
        float_value,
        exact: exact_value,
    })
}

/// Upper tail `P(X >= l)` of a Poisson-binomial count, by the in-place
/// convolution recurrence with error-free transformations. `qs[i]` must be
/// the independently computed `1 - ps[i]` so no accuracy is lost forming it.
pub(crate) fn poisson_binomial_tail(ps: &[f64], qs: &[f64], l: usize) -> f64 {
    let m = ps.len();
    if l > m {
        return 0.0;
    }
    if l == 0 {
        return 1.0;
    }
    let mut main = vec![0.0f64; m + 1];
    let mut comp = vec![0.0f64; m + 1];
    main[0] = 1.0;
    for i in 0..m {
        let (p, q) = (ps[i], qs[i]);
        for c in (0..=i + 1).rev() {
            let stay = if c <= i { main[c] } else { 0.0 };
            let promote = if c >= 1 { main[c - 1] } else { 0.0 };
            let (h1, e1) = two_prod(stay, q);
            let (h2, e2) = two_prod(promote, p);
            let (s, e3) = two_sum(h1, h2);
            let stay_comp = if c <= i { comp[c] } else { 0.0 };
            let promote_comp = if c >= 1 { comp[c - 1] } else { 0.0 };
            main[c] = s;
            comp[c] = stay_comp * q + promote_comp * p + (e1 + e2 + e3);
        }
    }
    let mut tail = NeumaierSum::new();
    for c in l..=m {
        tail.add(main[c]);
        tail.add(comp[c]);
    }
    tail.value().clamp(0.0, 1.0)
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let e = a.mul_add(b, -p);
    (p, e)
}

/// Neumaier-compensated accumulator.
pub(crate) struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub(crate) fn new() -> Self {
        Self { sum: 0.0, comp: 0.0 }
    }

    pub(crate) fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.comp += (self.sum - t) + value;
        } else {
            self.comp += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

fn big_ratio(num: BigUint, den: BigUint) -> BigRational {
    Ratio::new(BigInt::from(num), BigInt::from(den))
}

/// Accurate `f64` for a rational in `[0, 1]` via a 128-bit scaled quotient.
pub(crate) fn ratio_to_f64(r: &BigRational) -> f64 {
    if r.numer().is_zero() {
        return 0.0;
    }
    let num = r.numer().to_biguint().expect("probability is non-negative");
    let den = r.denom().to_biguint().expect("denominator is positive");
    let scaled: BigUint = (num << 128u32) / den;
    let f = scaled.to_f64().unwrap_or(f64::INFINITY);
    (f / 2f64.powi(128)).clamp(0.0, 1.0)
}

/// Natural log of a big unsigned integer (top bits plus a power-of-two shift).
pub(crate) fn big_ln(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 53 {
        return x.to_f64().expect("fits in f64").ln();
    }
    let shift = bits - 53;
    let top = (x >> shift).to_f64().expect("53 bits fit");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}
