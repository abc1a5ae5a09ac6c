use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::pce::PceModel;
use crate::basis::{build_block_from_table, BasisPartition, HermiteTable, MultiIndex};
use crate::error::{Error, Result};

/// 4 GiB.
pub const DEFAULT_MEMORY_BUDGET: u64 = 4 << 30;

/// Relative singular value cutoff of the pseudo-inverse.
const PINV_RTOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OlsrOptions {
    /// Largest dense design matrix, in bytes, the fit may allocate.
    pub memory_budget: u64,
}

impl Default for OlsrOptions {
    fn default() -> Self {
        Self {
            memory_budget: DEFAULT_MEMORY_BUDGET,
        }
    }
}

/// Least-squares fit on the full basis.
#[derive(Clone, Debug)]
pub struct OlsrModel {
    pub pce: PceModel,
    /// Fewer samples than basis functions: the minimum-norm solution was taken.
    pub underdetermined: bool,
    /// Numerical rank of the centered design matrix.
    pub rank: usize,
    pub fitted: DVector<f64>,
}

/// Ordinary least squares via the SVD pseudo-inverse of the column-centered
/// design matrix (which is the same as fitting an explicit intercept).
pub fn olsr_fit(
    partition: &BasisPartition,
    xi: &DMatrix<f64>,
    f: &DVector<f64>,
    f_mean: f64,
    opts: &OlsrOptions,
) -> Result<OlsrModel> {
    let (n, m) = xi.shape();
    if m != partition.dim() {
        return Err(Error::DimensionMismatch {
            expected: partition.dim(),
            got: m,
        });
    }
    if f.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: f.len(),
        });
    }
    let p = partition.len();
    let required = (n as u128) * (p as u128) * 8;
    if required > opts.memory_budget as u128 {
        return Err(Error::Budget {
            required,
            limit: opts.memory_budget as u128,
        });
    }
    if p == 0 {
        return Err(Error::input("empty basis partition"));
    }

    let table = HermiteTable::new(xi, partition.p_max())?;
    let mut psi = DMatrix::zeros(n, p);
    let mut means = Vec::with_capacity(p);
    let mut alphas: Vec<MultiIndex> = Vec::with_capacity(p);
    let mut offset = 0;
    for key in partition.keys() {
        let block = build_block_from_table(partition, key, &table)?;
        psi.columns_mut(offset, block.ncols()).copy_from(&block.values);
        offset += block.ncols();
        means.extend(block.column_means.iter().copied());
        alphas.extend(block.indices);
    }

    let svd = psi.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let cutoff = PINV_RTOL * s_max;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    if rank == 0 {
        return Err(Error::Singular("design matrix has no nonzero singular value".into()));
    }
    let beta = svd
        .solve(f, cutoff)
        .map_err(|e| Error::Singular(e.to_string()))?;
    let fitted = (&psi * &beta).add_scalar(f_mean);

    let intercept = f_mean - beta.iter().zip(&means).map(|(b, m)| b * m).sum::<f64>();
    let terms = alphas.into_iter().zip(beta.iter().copied()).collect();
    Ok(OlsrModel {
        pce: PceModel::new(m, partition.p_max(), intercept, terms)?,
        underdetermined: n < p,
        rank,
        fitted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::enumerate_partition;
    use crate::doe::DesignOfExperiments;

    #[test]
    fn exact_polynomial_is_interpolated() {
        let mut doe = DesignOfExperiments::sobol(40, 2, 1, None).unwrap();
        doe.evaluate(|x| Ok(1.5 + x[0] * x[1] - 0.25 * (x[1] * x[1] - 1.0))).unwrap();
        let part = enumerate_partition(2, 3).unwrap();
        let fit = olsr_fit(&part, &doe.xi, &doe.f, doe.f_mean, &OlsrOptions::default()).unwrap();
        assert!(!fit.underdetermined);
        assert!((fit.pce.mean() - 1.5).abs() < 1e-10);
        let c = fit.pce.coefficient(&MultiIndex::new(vec![1, 1])).unwrap();
        assert!((c - 1.0).abs() < 1e-10);
        let c = fit.pce.coefficient(&MultiIndex::new(vec![0, 2])).unwrap();
        assert!((c + 0.25).abs() < 1e-10);
    }

    #[test]
    fn budget_is_enforced() {
        let doe = DesignOfExperiments::sobol(20, 3, 1, None).unwrap();
        let part = enumerate_partition(3, 2).unwrap();
        let err = olsr_fit(&part, &doe.xi, &doe.f, 0.0, &OlsrOptions { memory_budget: 100 }).unwrap_err();
        assert!(matches!(err, Error::Budget { .. }));
    }
}
