//! Truncated Hermite chaos basis.
//!
//! Multi-indices are grouped by interaction degree (number of active
//! variables) and total degree, so that each group can be evaluated on its
//! own without materialising the full `N x P` polynomial matrix.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tensor degree vector `(a_1, ..., a_M)` of a multivariate Hermite polynomial.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex {
    degrees: Vec<u32>,
}

impl MultiIndex {
    pub fn new(degrees: Vec<u32>) -> Self {
        Self { degrees }
    }

    /// First-degree index on variable `k` of an `m`-dimensional input.
    pub fn unit(m: usize, k: usize) -> Self {
        let mut degrees = vec![0; m];
        degrees[k] = 1;
        Self { degrees }
    }

    pub fn from_support(m: usize, support: &[(usize, u32)]) -> Self {
        let mut degrees = vec![0; m];
        for &(k, d) in support {
            degrees[k] = d;
        }
        Self { degrees }
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn dim(&self) -> usize {
        self.degrees.len()
    }

    pub fn total_degree(&self) -> u32 {
        self.degrees.iter().sum()
    }

    /// Number of variables that appear in the polynomial.
    pub fn interaction_degree(&self) -> usize {
        self.degrees.iter().filter(|&&d| d > 0).count()
    }

    /// Nonzero entries as `(variable, degree)` pairs, ascending in variable.
    pub fn support(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.degrees
            .iter()
            .enumerate()
            .filter(|(_, &d)| d > 0)
            .map(|(k, &d)| (k, d))
    }

    pub fn involves(&self, k: usize) -> bool {
        self.degrees.get(k).is_some_and(|&d| d > 0)
    }

    pub fn group_key(&self) -> GroupKey {
        GroupKey {
            interaction: self.interaction_degree(),
            degree: self.total_degree() as usize,
        }
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, d) in self.degrees.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{d}")?;
        }
        write!(f, ")")
    }
}

/// Label of a basis group: interaction degree `i` and total degree `p`.
///
/// The `j`-th degree subblock of interaction degree `i` (`j = 1..=p_max-i+1`)
/// has total degree `p = i + j - 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupKey {
    pub interaction: usize,
    pub degree: usize,
}

impl GroupKey {
    pub fn new(interaction: usize, degree: usize) -> Self {
        Self {
            interaction,
            degree,
        }
    }

    /// One-based subblock position within its interaction degree.
    pub fn subblock(&self) -> usize {
        self.degree + 1 - self.interaction
    }
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.interaction, self.degree)
    }
}

/// Number of non-constant terms `C(M + p_max, p_max) - 1` of a total-degree basis.
pub fn count_basis(m: usize, p_max: usize) -> Result<usize> {
    if m == 0 || p_max == 0 {
        return Err(Error::input("count_basis requires M >= 1 and p_max >= 1"));
    }
    let mut c: u128 = 1;
    for k in 1..=p_max as u128 {
        // c * (m + k) / k is exactly C(m + k, k)
        c = c
            .checked_mul(m as u128 + k)
            .ok_or(Error::Overflow("basis cardinality"))?
            / k;
    }
    usize::try_from(c - 1).map_err(|_| Error::Overflow("basis cardinality"))
}

/// The basis split into disjoint `(interaction, degree)` groups.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisPartition {
    dim: usize,
    p_max: usize,
    groups: BTreeMap<GroupKey, Vec<MultiIndex>>,
}

impl BasisPartition {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn p_max(&self) -> usize {
        self.p_max
    }

    /// Group keys in partition order (interaction degree, then total degree).
    pub fn keys(&self) -> impl Iterator<Item = GroupKey> + '_ {
        self.groups.keys().copied()
    }

    pub fn group(&self, key: GroupKey) -> Option<&[MultiIndex]> {
        self.groups.get(&key).map(Vec::as_slice)
    }

    /// Keys `(i, i), (i, i+1), ..., (i, p_max)` of one interaction degree.
    pub fn keys_for_interaction(&self, interaction: usize) -> Vec<GroupKey> {
        self.groups
            .keys()
            .filter(|k| k.interaction == interaction)
            .copied()
            .collect()
    }

    /// Highest interaction degree that has a nonempty group.
    pub fn max_interaction(&self) -> usize {
        self.groups.keys().map(|k| k.interaction).max().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.groups.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All indices, concatenated in partition order.
    pub fn iter(&self) -> impl Iterator<Item = &MultiIndex> + '_ {
        self.groups.values().flatten()
    }
}

/// Enumerates every multi-index with `1 <= |a| <= p_max` and groups it.
///
/// Groups are ordered by key; within a group indices are in descending
/// lexicographic order of the degree vector, so `(1,0,..)` precedes `(0,1,..)`.
pub fn enumerate_partition(m: usize, p_max: usize) -> Result<BasisPartition> {
    let total = count_basis(m, p_max)?;
    let mut groups: BTreeMap<GroupKey, Vec<MultiIndex>> = BTreeMap::new();
    let mut current = vec![0u32; m];
    let mut sink = |alpha: &[u32]| {
        let idx = MultiIndex::new(alpha.to_vec());
        groups.entry(idx.group_key()).or_default().push(idx);
    };
    descend(&mut current, 0, p_max as u32, &mut sink);
    debug_assert_eq!(groups.values().map(Vec::len).sum::<usize>(), total);
    Ok(BasisPartition {
        dim: m,
        p_max,
        groups,
    })
}

// Depth-first walk that assigns the largest remaining degree first, which
// yields descending lexicographic order.
fn descend(current: &mut [u32], pos: usize, remaining: u32, sink: &mut impl FnMut(&[u32])) {
    if pos == current.len() {
        if current.iter().any(|&d| d > 0) {
            sink(current);
        }
        return;
    }
    for d in (0..=remaining).rev() {
        current[pos] = d;
        descend(current, pos + 1, remaining - d, sink);
    }
    current[pos] = 0;
}

/// Probabilists' Hermite polynomial `He_n(x)`.
pub fn hermite_eval(n: usize, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::input(format!("hermite_eval: non-finite argument {x}")));
    }
    Ok(hermite_unchecked(n, x))
}

#[inline]
pub(crate) fn hermite_unchecked(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Fills `out[d] = He_d(x)` for `d = 0..out.len()`.
#[inline]
pub(crate) fn hermite_fill(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = x;
    }
    for k in 1..out.len().saturating_sub(1) {
        out[k + 1] = x * out[k] - k as f64 * out[k - 1];
    }
}

/// Multivariate Hermite polynomial `prod_k He_{a_k}(xi_k)`.
pub fn eval_multi(alpha: &MultiIndex, xi: &[f64]) -> Result<f64> {
    if alpha.dim() != xi.len() {
        return Err(Error::DimensionMismatch {
            expected: alpha.dim(),
            got: xi.len(),
        });
    }
    let mut value = 1.0;
    for (k, d) in alpha.support() {
        value *= hermite_eval(d as usize, xi[k])?;
    }
    Ok(value)
}

/// `E[Psi_a^2] = prod_k a_k!` for standard Gaussian inputs.
pub fn norm_sq(alpha: &MultiIndex) -> Result<f64> {
    let mut value = 1.0f64;
    for (_, d) in alpha.support() {
        for f in 2..=d {
            value *= f as f64;
        }
    }
    if !value.is_finite() {
        return Err(Error::Overflow("polynomial norm"));
    }
    Ok(value)
}

/// Per-sample table of `He_d(xi_{n,k})` for `d <= p_max`.
#[derive(Clone, Debug)]
pub struct HermiteTable {
    n: usize,
    m: usize,
    stride: usize,
    values: Vec<f64>,
}

impl HermiteTable {
    pub fn new(xi: &DMatrix<f64>, p_max: usize) -> Result<Self> {
        let (n, m) = xi.shape();
        if let Some(bad) = xi.iter().find(|v| !v.is_finite()) {
            return Err(Error::input(format!("non-finite design entry {bad}")));
        }
        let stride = p_max + 1;
        let mut values = vec![0.0; n * m * stride];
        for row in 0..n {
            for k in 0..m {
                let off = (row * m + k) * stride;
                hermite_fill(xi[(row, k)], &mut values[off..off + stride]);
            }
        }
        Ok(Self {
            n,
            m,
            stride,
            values,
        })
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn p_max(&self) -> usize {
        self.stride - 1
    }

    #[inline]
    pub fn value(&self, row: usize, var: usize, degree: u32) -> f64 {
        self.values[(row * self.m + var) * self.stride + degree as usize]
    }

    #[inline]
    pub fn eval(&self, row: usize, alpha: &MultiIndex) -> f64 {
        alpha
            .support()
            .map(|(k, d)| self.value(row, k, d))
            .product()
    }
}

/// Centered polynomial evaluations of one basis group.
#[derive(Clone, Debug)]
pub struct CenteredBlock {
    pub key: GroupKey,
    /// `N x K` matrix whose columns have zero empirical mean.
    pub values: DMatrix<f64>,
    /// Training means subtracted from each column.
    pub column_means: DVector<f64>,
    pub indices: Vec<MultiIndex>,
}

impl CenteredBlock {
    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }
}

/// Evaluates and centers the group `key` on the sample matrix `xi` (`N x M`).
pub fn build_block(partition: &BasisPartition, key: GroupKey, xi: &DMatrix<f64>) -> Result<CenteredBlock> {
    if xi.ncols() != partition.dim() {
        return Err(Error::DimensionMismatch {
            expected: partition.dim(),
            got: xi.ncols(),
        });
    }
    let table = HermiteTable::new(xi, key.degree)?;
    build_block_from_table(partition, key, &table)
}

/// Same as [`build_block`] but reuses a precomputed Hermite table.
pub fn build_block_from_table(
    partition: &BasisPartition,
    key: GroupKey,
    table: &HermiteTable,
) -> Result<CenteredBlock> {
    let group = partition
        .group(key)
        .filter(|g| !g.is_empty())
        .ok_or(Error::EmptyGroup {
            interaction: key.interaction,
            degree: key.degree,
        })?;
    let n = table.nrows();
    if n < 2 {
        return Err(Error::input(format!("a centered block needs N >= 2 samples, got {n}")));
    }
    if table.dim() != partition.dim() {
        return Err(Error::DimensionMismatch {
            expected: partition.dim(),
            got: table.dim(),
        });
    }
    if table.p_max() < key.degree {
        return Err(Error::input("Hermite table degree is below the block degree"));
    }
    let k = group.len();
    let mut values = DMatrix::zeros(n, k);
    let mut means = DVector::zeros(k);
    for (j, alpha) in group.iter().enumerate() {
        let mut col = values.column_mut(j);
        for row in 0..n {
            col[row] = table.eval(row, alpha);
        }
        let mean = col.sum() / n as f64;
        col.add_scalar_mut(-mean);
        means[j] = mean;
    }
    Ok(CenteredBlock {
        key,
        values,
        column_means: means,
        indices: group.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn count_basis_values() {
        assert_eq!(count_basis(40, 3).unwrap(), 12340);
        assert_eq!(count_basis(40, 2).unwrap(), 860);
        assert_eq!(count_basis(1, 1).unwrap(), 1);
        assert!(count_basis(0, 3).is_err());
    }

    #[test]
    fn count_basis_overflow_is_reported() {
        assert!(matches!(count_basis(usize::MAX / 2, 40), Err(Error::Overflow(_))));
    }

    #[test]
    fn small_partition_groups() {
        let part = enumerate_partition(3, 2).unwrap();
        let sizes: Vec<_> = part.keys().map(|k| (k, part.group(k).unwrap().len())).collect();
        assert_eq!(
            sizes,
            vec![(GroupKey::new(1, 1), 3), (GroupKey::new(1, 2), 3), (GroupKey::new(2, 2), 3)]
        );
        assert_eq!(part.len(), 9);
        let first = part.group(GroupKey::new(1, 1)).unwrap();
        assert_eq!(first[0].degrees(), &[1, 0, 0]);
        assert_eq!(first[2].degrees(), &[0, 0, 1]);

        let lin = enumerate_partition(2, 1).unwrap();
        assert_eq!(lin.keys().collect::<Vec<_>>(), vec![GroupKey::new(1, 1)]);
        assert_eq!(lin.len(), 2);
    }

    #[test]
    fn beam_sized_univariate_count() {
        let part = enumerate_partition(40, 3).unwrap();
        let univariate: usize = part
            .keys_for_interaction(1)
            .iter()
            .map(|&k| part.group(k).unwrap().len())
            .sum();
        assert_eq!(univariate, 120);
        assert_eq!(part.len(), 12340);
        assert_eq!(part.group(GroupKey::new(3, 3)).unwrap().len(), 9880);
    }

    #[test]
    fn hermite_values() {
        assert_eq!(hermite_eval(0, 7.3).unwrap(), 1.0);
        assert!((hermite_eval(2, 2.0).unwrap() - 3.0).abs() < 1e-15);
        assert!((hermite_eval(3, 1.0).unwrap() + 2.0).abs() < 1e-15);
        assert!(hermite_eval(2, f64::NAN).is_err());
    }

    #[test]
    fn multi_eval_and_norms() {
        let a = MultiIndex::new(vec![1, 1, 0]);
        assert!((eval_multi(&a, &[2.0, 3.0, 0.5]).unwrap() - 6.0).abs() < 1e-15);
        let b = MultiIndex::new(vec![2, 0, 0]);
        assert!((eval_multi(&b, &[0.0, 1.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        let u = MultiIndex::unit(4, 2);
        assert_eq!(eval_multi(&u, &[9.0, 9.0, 0.25, 9.0]).unwrap(), 0.25);
        assert!(eval_multi(&a, &[1.0]).is_err());

        assert_eq!(norm_sq(&MultiIndex::new(vec![1, 0])).unwrap(), 1.0);
        assert_eq!(norm_sq(&MultiIndex::new(vec![2, 1, 0])).unwrap(), 2.0);
        assert_eq!(norm_sq(&MultiIndex::new(vec![3, 0])).unwrap(), 6.0);
        assert!(norm_sq(&MultiIndex::new(vec![200])).is_err());
    }

    #[test]
    fn block_errors() {
        let part = enumerate_partition(2, 2).unwrap();
        let xi = DMatrix::from_row_slice(1, 2, &[0.1, 0.2]);
        assert!(build_block(&part, GroupKey::new(1, 1), &xi).is_err());
        let xi = DMatrix::from_row_slice(2, 2, &[0.1, 0.2, 0.3, 0.4]);
        assert!(matches!(
            build_block(&part, GroupKey::new(3, 3), &xi),
            Err(Error::EmptyGroup { .. })
        ));
    }

    #[test]
    fn zero_column_centers_to_zero() {
        let part = enumerate_partition(2, 1).unwrap();
        let xi = DMatrix::from_row_slice(3, 2, &[0.0, 1.0, 0.0, -2.0, 0.0, 0.5]);
        let block = build_block(&part, GroupKey::new(1, 1), &xi).unwrap();
        assert!(block.values.column(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bilinear_block_is_product_minus_mean() {
        let part = enumerate_partition(2, 2).unwrap();
        let xi = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -1.0, 0.5, 3.0, -2.0]);
        let block = build_block(&part, GroupKey::new(2, 2), &xi).unwrap();
        assert_eq!(block.ncols(), 1);
        let raw = [2.0, -0.5, -6.0];
        let mean = raw.iter().sum::<f64>() / 3.0;
        for r in 0..3 {
            assert!((block.values[(r, 0)] - (raw[r] - mean)).abs() < 1e-14);
        }
        assert!((block.column_means[0] - mean).abs() < 1e-15);
    }
}
