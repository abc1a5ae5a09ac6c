//! Hierarchical PLS regression over the basis partition, its back-substitution
//! into explicit chaos coefficients, and the ordinary least-squares baseline.
//!
//! The first-order hierarchy works inside one interaction degree `i`: every
//! degree subblock is regressed on the chained residual of the previous ones,
//! and the resulting scores are regressed on the interaction's initial
//! response for each prefix length `k`. The second-order hierarchy chains
//! these over interaction degrees and regresses the original response on the
//! concatenated second-level scores. In both cases the prefix minimizing the
//! corrected cross-validation error is kept.

mod olsr;
mod pce;

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{build_block_from_table, BasisPartition, GroupKey, HermiteTable, MultiIndex};
use crate::error::{Error, Result};
use crate::pls::{pls_fit, PlsBlockModel, PlsFit};

pub use olsr::{olsr_fit, OlsrModel, OlsrOptions, DEFAULT_MEMORY_BUDGET};
pub use pce::{PceEntry, PceFile, PceModel};

/// Tunables shared by every PLS fit in the hierarchy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Cap on components per block; `None` uses the PLS default.
    pub max_components: Option<usize>,
}

/// Level-one model of one degree subblock.
#[derive(Clone, Debug)]
pub struct SubblockFit {
    pub key: GroupKey,
    pub model: PlsBlockModel,
    pub eps_star: f64,
}

/// First-order hierarchy of a single interaction degree.
#[derive(Clone, Debug)]
pub struct FirstOrderFit {
    pub interaction: usize,
    /// Level-one fits of subblocks `1..=k_star`.
    pub level1: Vec<SubblockFit>,
    /// Level-two model on the concatenated level-one scores; `None` when
    /// `k_star = 1` and the first subblock's scores pass through.
    pub level2: Option<PlsBlockModel>,
    pub k_star: usize,
    /// Corrected error for every evaluated prefix `k = 1..=K`.
    pub eps_trace: Vec<f64>,
    /// Residual `F_[k_star]` handed to the next interaction degree.
    pub residual: DVector<f64>,
}

impl FirstOrderFit {
    pub fn eps_star(&self) -> f64 {
        self.eps_trace[self.k_star - 1]
    }

    /// Model whose scores form this interaction's second-level output.
    pub fn top(&self) -> &PlsBlockModel {
        self.level2.as_ref().unwrap_or(&self.level1[0].model)
    }

    /// Second-level scores `T_II`.
    pub fn scores(&self) -> &DMatrix<f64> {
        &self.top().t
    }

    /// Pushes coefficients on `T_II` down to the centered polynomial columns of
    /// each level-one subblock.
    fn propagate(&self, coeff: &DVector<f64>, out: &mut Vec<(GroupKey, DVector<f64>)>) -> Result<()> {
        match &self.level2 {
            None => {
                let sub = &self.level1[0];
                out.push((sub.key, sub.model.weight_map()? * coeff));
            }
            Some(l2) => {
                let on_t1 = l2.weight_map()? * coeff;
                let mut offset = 0;
                for sub in &self.level1 {
                    let h = sub.model.h();
                    let seg = on_t1.rows(offset, h).into_owned();
                    offset += h;
                    out.push((sub.key, sub.model.weight_map()? * seg));
                }
            }
        }
        Ok(())
    }
}

/// Column-wise concatenation; an empty list gives an `n x 0` matrix.
fn hconcat<'a>(n: usize, parts: impl IntoIterator<Item = &'a DMatrix<f64>>) -> DMatrix<f64> {
    let parts: Vec<&DMatrix<f64>> = parts.into_iter().collect();
    let width = parts.iter().map(|p| p.ncols()).sum();
    let mut out = DMatrix::zeros(n, width);
    let mut offset = 0;
    for p in parts {
        out.columns_mut(offset, p.ncols()).copy_from(p);
        offset += p.ncols();
    }
    out
}

/// Fit of centered response `f` on an already-centered score matrix.
fn fit_scores(t: &DMatrix<f64>, f: &DVector<f64>, opts: &FitOptions) -> Result<PlsFit> {
    pls_fit(t, f, DVector::zeros(t.ncols()), opts.max_components)
}

// Errors this small are rounding noise of an interpolating fit.
const EPS_FLOOR: f64 = 1e-12;

/// Index of the first minimum; errors below `EPS_FLOOR` count as equal.
fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] && values[best] > EPS_FLOOR {
            best = i;
        }
    }
    best
}

/// First-order hierarchical PLS of interaction degree `interaction`.
///
/// `keys` must be that interaction's subblocks in increasing degree order;
/// they are evaluated from `table` one at a time.
pub fn first_order_fit(
    partition: &BasisPartition,
    table: &HermiteTable,
    interaction: usize,
    f_ini: &DVector<f64>,
    opts: &FitOptions,
) -> Result<FirstOrderFit> {
    let keys = partition.keys_for_interaction(interaction);
    if keys.is_empty() {
        return Err(Error::EmptyGroup {
            interaction,
            degree: interaction,
        });
    }
    let mut level1: Vec<SubblockFit> = Vec::with_capacity(keys.len());
    let mut residuals: Vec<DVector<f64>> = Vec::with_capacity(keys.len());
    let mut f_cur = f_ini.clone();
    for &key in &keys {
        let block = build_block_from_table(partition, key, table)?;
        let fit = pls_fit(&block.values, &f_cur, block.column_means, opts.max_components)?;
        f_cur = fit.residual(&f_cur);
        let eps_star = fit.eps_star();
        level1.push(SubblockFit {
            key,
            model: fit.model,
            eps_star,
        });
        residuals.push(f_cur.clone());
    }

    let n = f_ini.len();
    let mut eps_trace = vec![level1[0].eps_star];
    let mut level2: Vec<Option<PlsBlockModel>> = vec![None];
    for k in 2..=keys.len() {
        if level1[k - 1].model.h() == 0 {
            // nothing new to regress on: inherit the previous prefix
            eps_trace.push(eps_trace[k - 2]);
            level2.push(level2[k - 2].clone());
            continue;
        }
        let t1 = hconcat(n, level1[..k].iter().map(|s| &s.model.t));
        let fit = fit_scores(&t1, f_ini, opts)?;
        eps_trace.push(fit.eps_star());
        level2.push(Some(fit.model));
    }

    let k_star = argmin(&eps_trace) + 1;
    level1.truncate(k_star);
    let mut top = level2.swap_remove(k_star - 1);
    if k_star == 1 {
        top = None;
    }
    // an inherited level-two model may cover fewer subblocks than k_star
    if let Some(l2) = &top {
        let width: usize = level1.iter().map(|s| s.model.h()).sum();
        if l2.n_predictors() != width {
            return Err(Error::input("level-two model does not match level-one scores"));
        }
    }
    Ok(FirstOrderFit {
        interaction,
        level1,
        level2: top,
        k_star,
        eps_trace,
        residual: residuals.swap_remove(k_star - 1),
    })
}

/// A fitted second-order hierarchical PLS surrogate.
#[derive(Clone, Debug)]
pub struct SohplsrModel {
    /// First-order fits of interactions `1..=i_star`.
    pub per_interaction: Vec<FirstOrderFit>,
    /// Level-three model on the concatenated `T_II`; `None` when `i_star = 1`.
    pub level3: Option<PlsBlockModel>,
    pub i_star: usize,
    /// Corrected error for every evaluated interaction prefix.
    pub eps_trace: Vec<f64>,
    /// First-order `k*` of every evaluated interaction degree.
    pub k_stars: Vec<usize>,
    /// Training predictions of the uncentered response.
    pub fitted: DVector<f64>,
    pub pce: PceModel,
}

impl SohplsrModel {
    pub fn eps_star(&self) -> f64 {
        self.eps_trace[self.i_star - 1]
    }

    /// `k*` of the selected interaction degrees.
    pub fn selected_k_stars(&self) -> &[usize] {
        &self.k_stars[..self.i_star]
    }

    /// Groups carrying nonzero support.
    pub fn selected_groups(&self) -> Vec<GroupKey> {
        self.per_interaction
            .iter()
            .flat_map(|fo| fo.level1.iter().map(|s| s.key))
            .collect()
    }
}

/// Second-order hierarchical PLS fit of the centered response `f` on the
/// design `xi` (`N x M`), followed by back-substitution to explicit
/// coefficients. `f_mean` is the mean that was removed from the response.
pub fn sohplsr_fit(
    partition: &BasisPartition,
    xi: &DMatrix<f64>,
    f: &DVector<f64>,
    f_mean: f64,
    opts: &FitOptions,
) -> Result<SohplsrModel> {
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
    if partition.is_empty() {
        return Err(Error::input("empty basis partition"));
    }
    let table = HermiteTable::new(xi, partition.p_max())?;
    let i_max = partition.max_interaction();

    let mut fits: Vec<FirstOrderFit> = Vec::with_capacity(i_max);
    let mut f_ini = f.clone();
    for i in 1..=i_max {
        let fo = first_order_fit(partition, &table, i, &f_ini, opts)?;
        f_ini = fo.residual.clone();
        fits.push(fo);
    }

    let mut eps_trace = vec![fits[0].eps_star()];
    let mut level3: Vec<Option<PlsBlockModel>> = vec![None];
    for i in 2..=i_max {
        if fits[i - 1].scores().ncols() == 0 {
            eps_trace.push(eps_trace[i - 2]);
            level3.push(level3[i - 2].clone());
            continue;
        }
        let t2 = hconcat(n, fits[..i].iter().map(|fo| fo.scores()));
        let fit = fit_scores(&t2, f, opts)?;
        eps_trace.push(fit.eps_star());
        level3.push(Some(fit.model));
    }

    let i_star = argmin(&eps_trace) + 1;
    let k_stars: Vec<usize> = fits.iter().map(|fo| fo.k_star).collect();
    fits.truncate(i_star);
    let top = if i_star == 1 {
        None
    } else {
        level3.swap_remove(i_star - 1)
    };

    let mut pieces = Vec::new();
    let fitted_centered = match &top {
        None => {
            let t = fits[0].top();
            fits[0].propagate(&t.b, &mut pieces)?;
            t.fitted()
        }
        Some(l3) => {
            let on_t2 = l3.weight_map()? * &l3.b;
            let mut offset = 0;
            for fo in &fits {
                let h = fo.scores().ncols();
                fo.propagate(&on_t2.rows(offset, h).into_owned(), &mut pieces)?;
                offset += h;
            }
            l3.fitted()
        }
    };

    let means: HashMap<GroupKey, &DVector<f64>> = fits
        .iter()
        .flat_map(|fo| fo.level1.iter().map(|s| (s.key, &s.model.col_means)))
        .collect();
    let mut intercept = f_mean;
    let mut terms: Vec<(MultiIndex, f64)> = Vec::new();
    for (key, coeffs) in pieces {
        let group = partition.group(key).ok_or(Error::EmptyGroup {
            interaction: key.interaction,
            degree: key.degree,
        })?;
        let col_means = means[&key];
        for ((alpha, &beta), &mean) in group.iter().zip(coeffs.iter()).zip(col_means.iter()) {
            intercept -= beta * mean;
            terms.push((alpha.clone(), beta));
        }
    }
    let pce = PceModel::new(m, partition.p_max(), intercept, terms)?;
    Ok(SohplsrModel {
        per_interaction: fits,
        level3: top,
        i_star,
        eps_trace,
        k_stars,
        fitted: fitted_centered.add_scalar(f_mean),
        pce,
    })
}
