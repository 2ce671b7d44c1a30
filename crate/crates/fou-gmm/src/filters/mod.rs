//! Vanishing-moment filters, their b-coefficient vectors, cross-covariance
//! coefficients and the moment-condition matrix B.
//!
//! A filter of order `l` annihilates polynomials of degree below `l`:
//! `sum_q a_q q^r = 0` for `r < l` and `sum_q a_q q^l != 0`. The b-vector
//! re-expresses the filtered variance as a combination of autocovariances:
//! `V(theta) = sum_k b_k rho(alpha k)`.

mod daubechies;

use crate::error::{FouGmmError, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterKind {
    FiniteDifference,
    Daubechies,
}

/// Numerical tolerance for the vanishing-moment checks, relative to the
/// magnitude of the summed terms.
const MOMENT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Filter {
    coeffs: Vec<f64>,
    order: usize,
    kind: FilterKind,
}

impl Filter {
    /// Builds a filter after verifying the vanishing-moment conditions for
    /// the claimed order.
    pub fn new(coeffs: Vec<f64>, order: usize, kind: FilterKind) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(FouGmmError::InvalidParams("empty filter".into()));
        }
        if order == 0 {
            let ok = coeffs[0] == 1.0 && coeffs[1..].iter().all(|&a| a == 0.0);
            if !ok {
                return Err(FouGmmError::InvalidParams(
                    "order-0 filter must be the unit coefficient".into(),
                ));
            }
            return Ok(Self { coeffs, order, kind });
        }
        for r in 0..order {
            let (sum, scale) = moment(&coeffs, r);
            if sum.abs() > MOMENT_TOL * scale.max(f64::MIN_POSITIVE) {
                return Err(FouGmmError::InvalidParams(format!(
                    "moment condition failed at power {r}: sum {sum:.3e} vs scale {scale:.3e}"
                )));
            }
        }
        // Genuinely nonzero order-l moments sit far above this (the smallest,
        // db10's, is ~5e-7 of its term scale) while true vanishing moments
        // cancel to ~1e-15.
        let (sum, scale) = moment(&coeffs, order);
        if sum.abs() <= 1e-8 * scale {
            return Err(FouGmmError::InvalidParams(format!(
                "moment of power {order} vanishes; order overstated"
            )));
        }
        Ok(Self { coeffs, order, kind })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn kind(&self) -> FilterKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Same filter zero-padded to `len` taps.
    fn padded_to(&self, len: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(len, 0.0);
        Self { coeffs, order: self.order, kind: self.kind }
    }
}

fn moment(coeffs: &[f64], power: usize) -> (f64, f64) {
    let mut sum = 0.0;
    let mut scale = 0.0;
    for (q, &a) in coeffs.iter().enumerate() {
        let term = a * (q as f64).powi(power as i32);
        sum += term;
        scale += term.abs();
    }
    (sum, scale)
}

/// The order-0 filter: a single unit coefficient.
pub fn order_zero_filter(padded_len: usize) -> Result<Filter> {
    if padded_len == 0 {
        return Err(FouGmmError::InvalidParams("padded_len must be >= 1".into()));
    }
    let mut coeffs = vec![0.0; padded_len];
    coeffs[0] = 1.0;
    Filter::new(coeffs, 0, FilterKind::FiniteDifference)
}

/// Finite-difference filter of the given order: `a_q = (-1)^q binom(order, q)`.
pub fn finite_difference_filter(order: usize, padded_len: usize) -> Result<Filter> {
    if order == 0 {
        return order_zero_filter(padded_len);
    }
    if padded_len < order + 1 {
        return Err(FouGmmError::InvalidParams(format!(
            "padded_len {padded_len} too short for order {order}"
        )));
    }
    let mut coeffs = vec![0.0; padded_len];
    let mut binom = 1.0_f64;
    for q in 0..=order {
        coeffs[q] = if q % 2 == 0 { binom } else { -binom };
        binom = binom * (order - q) as f64 / (q + 1) as f64;
    }
    Filter::new(coeffs, order, FilterKind::FiniteDifference)
}

/// Daubechies wavelet (high-pass) filter with the given number of vanishing
/// moments, orthonormal normalization (`sum a_q^2 = 1`).
pub fn daubechies_filter(vanishing_moments: usize) -> Result<Filter> {
    let coeffs = daubechies::wavelet_coefficients(vanishing_moments)?;
    Filter::new(coeffs, vanishing_moments, FilterKind::Daubechies)
}

/// The b-vector of a filter: `b_0 = sum a_q^2`, `b_k = 2 sum_j a_{k+j} a_j`.
pub fn b_coeffs(f: &Filter) -> Vec<f64> {
    let a = &f.coeffs;
    let m = a.len();
    let mut b = vec![0.0; m];
    b[0] = a.iter().map(|x| x * x).sum();
    for k in 1..m {
        b[k] = 2.0 * (0..m - k).map(|j| a[k + j] * a[j]).sum::<f64>();
    }
    b
}

/// Cross-covariance coefficient of two filtered series at integer lag `k`:
/// `gamma_ij(k) = sum_{q,q'} a_q^i a_{q'}^j rho(alpha |k - q + q'|)`.
///
/// `rho_at` evaluates the autocovariance at a nonnegative integer lag
/// (the caller owns the alpha scaling).
pub fn cross_covariance<F: Fn(usize) -> f64>(fi: &Filter, fj: &Filter, k: i64, rho_at: F) -> f64 {
    let mut sum = 0.0;
    for (q, &aq) in fi.coeffs.iter().enumerate() {
        if aq == 0.0 {
            continue;
        }
        for (qp, &aqp) in fj.coeffs.iter().enumerate() {
            if aqp == 0.0 {
                continue;
            }
            let lag = (k - q as i64 + qp as i64).unsigned_abs() as usize;
            sum += aq * aqp * rho_at(lag);
        }
    }
    sum
}

/// A bank of filters padded to a common length, with their b-vectors and the
/// stacked moment-condition matrix B. Immutable after construction.
#[derive(Debug, Clone)]
pub struct FilterBank {
    filters: Vec<Filter>,
    b_vectors: Vec<Vec<f64>>,
    b_matrix: DMatrix<f64>,
    rank: usize,
}

impl FilterBank {
    /// Builds a bank from filters, padding to the longest and checking that
    /// the rows of B are independent.
    pub fn new(filters: Vec<Filter>) -> Result<Self> {
        if filters.is_empty() {
            return Err(FouGmmError::InvalidParams("empty filter bank".into()));
        }
        let padded_len = filters.iter().map(Filter::len).max().unwrap();
        let filters: Vec<Filter> = filters.into_iter().map(|f| f.padded_to(padded_len)).collect();
        let b_vectors: Vec<Vec<f64>> = filters.iter().map(b_coeffs).collect();
        let b_matrix = DMatrix::from_fn(filters.len(), padded_len, |i, j| b_vectors[i][j]);
        let svd = b_matrix.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let rank = svd
            .singular_values
            .iter()
            .filter(|&&s| s > 1e-10 * smax)
            .count();
        if rank < filters.len() {
            return Err(FouGmmError::RankDeficient { rank, needed: filters.len() });
        }
        Ok(Self { filters, b_vectors, b_matrix, rank })
    }

    pub fn filters(&self) -> &[Filter] {
        &self.filters
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    /// Common padded tap count (the spec's L + 1).
    pub fn padded_len(&self) -> usize {
        self.b_matrix.ncols()
    }

    pub fn b_vector(&self, i: usize) -> &[f64] {
        &self.b_vectors[i]
    }

    pub fn b_matrix(&self) -> &DMatrix<f64> {
        &self.b_matrix
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn min_order(&self) -> usize {
        self.filters.iter().map(Filter::order).min().unwrap_or(0)
    }
}

/// Builds a bank of the given kind from a list of orders.
pub fn build_bank(orders: &[usize], kind: FilterKind) -> Result<FilterBank> {
    if orders.is_empty() {
        return Err(FouGmmError::InvalidParams("no filter orders given".into()));
    }
    let filters: Vec<Filter> = match kind {
        FilterKind::FiniteDifference => {
            let padded = orders.iter().map(|&l| l + 1).max().unwrap();
            orders
                .iter()
                .map(|&l| finite_difference_filter(l, padded))
                .collect::<Result<_>>()?
        }
        FilterKind::Daubechies => orders
            .iter()
            .map(|&l| if l == 0 { order_zero_filter(1) } else { daubechies_filter(l) })
            .collect::<Result<_>>()?,
    };
    FilterBank::new(filters)
}

/// The paper-style sequential bank: orders `1..=l_count`.
pub fn sequential_bank(l_count: usize, kind: FilterKind) -> Result<FilterBank> {
    let orders: Vec<usize> = (1..=l_count).collect();
    build_bank(&orders, kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn finite_difference_values() {
        let f1 = finite_difference_filter(1, 2).unwrap();
        assert_eq!(f1.coeffs(), &[1.0, -1.0]);
        let f2 = finite_difference_filter(2, 3).unwrap();
        assert_eq!(f2.coeffs(), &[1.0, -2.0, 1.0]);
        let f3 = finite_difference_filter(3, 4).unwrap();
        assert_eq!(f3.coeffs(), &[1.0, -3.0, 3.0, -1.0]);
        assert!(finite_difference_filter(3, 3).is_err());
    }

    #[test]
    fn order_zero_shape() {
        let f = order_zero_filter(4).unwrap();
        assert_eq!(f.coeffs(), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(f.order(), 0);
        assert_eq!(b_coeffs(&f), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn moment_conditions_enforced() {
        // (1, -1, 1) has a nonzero mean: not an order-1 filter.
        assert!(Filter::new(vec![1.0, -1.0, 1.0], 1, FilterKind::FiniteDifference).is_err());
        // Claiming order 2 for a first difference overstates it... the r=1
        // moment of (1,-1) is -1 != 0.
        assert!(Filter::new(vec![1.0, -1.0], 2, FilterKind::FiniteDifference).is_err());
    }

    #[test]
    fn daubechies_filters_satisfy_moments() {
        for n in 1..=10 {
            let f = daubechies_filter(n).unwrap();
            assert_eq!(f.order(), n);
            assert_eq!(f.len(), 2 * n);
            let energy: f64 = f.coeffs().iter().map(|a| a * a).sum();
            assert_relative_eq!(energy, 1.0, epsilon = 1e-9);
        }
        let haar = daubechies_filter(1).unwrap();
        assert_relative_eq!(haar.coeffs()[0], std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_relative_eq!(haar.coeffs()[1], -std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn b_vector_examples() {
        let f1 = finite_difference_filter(1, 2).unwrap();
        assert_eq!(b_coeffs(&f1), vec![2.0, -2.0]);
        let f2 = finite_difference_filter(2, 3).unwrap();
        assert_eq!(b_coeffs(&f2), vec![6.0, -8.0, 2.0]);
    }

    /// White-noise stub: rho(0) = 1, zero elsewhere.
    fn white_noise(lag: usize) -> f64 {
        if lag == 0 {
            1.0
        } else {
            0.0
        }
    }

    #[test]
    fn cross_covariance_white_noise() {
        let f = finite_difference_filter(1, 2).unwrap();
        assert_relative_eq!(cross_covariance(&f, &f, 0, white_noise), 2.0);
        assert_relative_eq!(cross_covariance(&f, &f, 1, white_noise), -1.0);
        assert_relative_eq!(cross_covariance(&f, &f, -1, white_noise), -1.0);
        for k in 2..6 {
            assert_eq!(cross_covariance(&f, &f, k, white_noise), 0.0);
            assert_eq!(cross_covariance(&f, &f, -k, white_noise), 0.0);
        }
    }

    #[test]
    fn cross_covariance_transpose_symmetry() {
        let fi = finite_difference_filter(1, 4).unwrap();
        let fj = finite_difference_filter(3, 4).unwrap();
        let rho = |lag: usize| 1.0 / (1.0 + lag as f64);
        for k in -6..=6 {
            let a = cross_covariance(&fi, &fj, k, rho);
            let b = cross_covariance(&fj, &fi, -k, rho);
            assert_relative_eq!(a, b, epsilon = 1e-13);
        }
    }

    #[test]
    fn v_from_b_equals_double_sum() {
        // sum_k b_k rho(k) == sum_{q,q'} a_q a_{q'} rho(|q - q'|), and both
        // equal gamma_ii(0).
        let rho = |lag: usize| (-0.3 * lag as f64).exp();
        for &order in &[1usize, 2, 3, 5] {
            let f = finite_difference_filter(order, order + 1).unwrap();
            let b = b_coeffs(&f);
            let via_b: f64 = b.iter().enumerate().map(|(k, &bk)| bk * rho(k)).sum();
            let mut direct = 0.0;
            for (q, &aq) in f.coeffs().iter().enumerate() {
                for (qp, &aqp) in f.coeffs().iter().enumerate() {
                    direct += aq * aqp * rho(q.abs_diff(qp));
                }
            }
            assert_relative_eq!(via_b, direct, max_relative = 1e-12);
            assert_relative_eq!(via_b, cross_covariance(&f, &f, 0, rho), max_relative = 1e-12);
        }
    }

    #[test]
    fn bank_rank_full_for_distinct_orders() {
        let bank = build_bank(&[1, 2, 3], FilterKind::FiniteDifference).unwrap();
        assert_eq!(bank.rank(), 3);
        assert_eq!(bank.padded_len(), 4);
        assert_eq!(bank.len(), 3);
        let seq = sequential_bank(7, FilterKind::FiniteDifference).unwrap();
        assert_eq!(seq.rank(), 7);
    }

    #[test]
    fn bank_rejects_repeated_filter() {
        let err = build_bank(&[1, 1, 1], FilterKind::FiniteDifference).unwrap_err();
        match err {
            FouGmmError::RankDeficient { rank, needed } => {
                assert_eq!(rank, 1);
                assert_eq!(needed, 3);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn single_order_zero_bank_is_valid() {
        let bank = build_bank(&[0], FilterKind::FiniteDifference).unwrap();
        assert_eq!(bank.rank(), 1);
        assert_eq!(bank.b_vector(0), &[1.0]);
    }

    #[test]
    fn daubechies_bank_pads_to_longest() {
        let bank = build_bank(&[1, 2, 3], FilterKind::Daubechies).unwrap();
        assert_eq!(bank.padded_len(), 6);
        assert_eq!(bank.filters()[0].len(), 6);
        assert_eq!(bank.rank(), 3);
    }

    proptest! {
        #[test]
        fn prop_moment_conditions_hold(order in 1usize..=8, extra in 0usize..4) {
            let f = finite_difference_filter(order, order + 1 + extra).unwrap();
            for r in 0..order {
                let (sum, scale) = super::moment(f.coeffs(), r);
                prop_assert!(sum.abs() <= 1e-10 * scale.max(1e-300));
            }
            let (sum, scale) = super::moment(f.coeffs(), order);
            prop_assert!(sum.abs() > 1e-6 * scale);
        }

        #[test]
        fn prop_gamma_symmetry(ka in -8i64..8, oi in 1usize..=4, oj in 1usize..=4) {
            let fi = finite_difference_filter(oi, 5).unwrap();
            let fj = finite_difference_filter(oj, 5).unwrap();
            let rho = |lag: usize| 1.0 / (1.0 + (lag * lag) as f64);
            let a = cross_covariance(&fi, &fj, ka, rho);
            let b = cross_covariance(&fj, &fi, -ka, rho);
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }
}
