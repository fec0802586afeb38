//! Dense diagonalization inside symmetry sectors and gap-ratio statistics.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::basis::{build_sector, ConstrainedBasis, SymmetrySector};
use crate::ops::SparseOperator;
use crate::{Error, Result, C64};

pub const DENSE_SECTOR_CAP: usize = 20_000;

#[derive(Clone, Debug, Serialize)]
pub struct SpectralData {
    pub k: usize,
    pub parity: i8,
    pub dim: usize,
    /// Ascending, in units of Ω.
    pub eigenvalues: Vec<f64>,
    /// Mean gap ratio, when at least three distinct levels exist.
    pub r: Option<f64>,
}

/// ⟨v_b|H|v_a⟩ over the sector basis. Real unless the momentum phases are complex.
pub fn sector_matrix(sector: &SymmetrySector, op: &SparseOperator) -> DMatrix<C64> {
    let n = sector.dim();
    let mut m = DMatrix::<C64>::zeros(n, n);
    for (a, v) in sector.vectors.iter().enumerate() {
        for &(c, amp) in v {
            for (cp, h) in op.row(c) {
                // H is symmetric, so row c holds H[c', c]
                if let Some((b, amp_b)) = sector.locate(cp) {
                    m[(b, a)] += amp_b.conj() * amp * (h * op.scale());
                }
            }
        }
    }
    m
}

fn is_real_sector(sector: &SymmetrySector, l: usize) -> bool {
    sector.k == 0 || 2 * sector.k == l
}

/// Eigenvalues of the sector block.
pub fn diagonalize_sector(basis: &ConstrainedBasis, sector: &SymmetrySector, op: &SparseOperator) -> Result<SpectralData> {
    check_sector(basis, sector, op)?;
    let m = sector_matrix(sector, op);
    let mut e: Vec<f64> = if sector.dim() == 0 {
        Vec::new()
    } else if is_real_sector(sector, basis.sites()) {
        m.map(|z| z.re).symmetric_eigenvalues().iter().copied().collect()
    } else {
        m.symmetric_eigenvalues().iter().copied().collect()
    };
    e.sort_by(f64::total_cmp);
    let r = r_statistic(&e).ok();
    Ok(SpectralData { k: sector.k, parity: sector.parity, dim: sector.dim(), eigenvalues: e, r })
}

/// Eigenpairs with eigenvectors lifted to the full basis (small systems).
pub fn sector_eigenpairs(
    basis: &ConstrainedBasis,
    sector: &SymmetrySector,
    op: &SparseOperator,
) -> Result<Vec<(f64, Vec<C64>)>> {
    check_sector(basis, sector, op)?;
    if sector.dim() == 0 {
        return Ok(Vec::new());
    }
    let eig = SymmetricEigen::new(sector_matrix(sector, op));
    Ok((0..sector.dim())
        .map(|k| {
            let coeffs: Vec<C64> = eig.eigenvectors.column(k).iter().copied().collect();
            (eig.eigenvalues[k], sector.lift(&coeffs, basis.len()))
        })
        .collect())
}

fn check_sector(basis: &ConstrainedBasis, sector: &SymmetrySector, op: &SparseOperator) -> Result<()> {
    use crate::ops::LinearOperator;
    if op.dim() != basis.len() {
        return Err(Error::DimensionMismatch { expected: basis.len(), got: op.dim() });
    }
    if sector.dim() > DENSE_SECTOR_CAP {
        return Err(Error::Capacity {
            what: "dense sector dimension",
            needed: sector.dim() as u128,
            limit: DENSE_SECTOR_CAP as u128,
        });
    }
    Ok(())
}

/// Every (k, parity) block, diagonalized in parallel.
pub fn all_sectors(basis: &ConstrainedBasis, op: &SparseOperator) -> Result<Vec<SpectralData>> {
    let labels: Vec<(usize, i8)> = (0..basis.sites()).flat_map(|k| [(k, 1i8), (k, -1i8)]).collect();
    labels
        .into_par_iter()
        .map(|(k, p)| {
            let s = build_sector(basis, k, p)?;
            diagonalize_sector(basis, &s, op)
        })
        .collect()
}

/// Merge levels closer than `1e-10 × spectral width`; keeps the first of each cluster.
pub fn collapse_degeneracies(sorted: &[f64]) -> Vec<f64> {
    let Some((&lo, &hi)) = sorted.first().zip(sorted.last()) else {
        return Vec::new();
    };
    let tol = 1e-10 * (hi - lo);
    let mut out: Vec<f64> = Vec::with_capacity(sorted.len());
    for &e in sorted {
        match out.last() {
            Some(&prev) if e - prev <= tol => {}
            _ => out.push(e),
        }
    }
    out
}

/// Mean of min(sₙ, sₙ₋₁)/max(sₙ, sₙ₋₁) over consecutive gaps of the collapsed spectrum.
pub fn r_statistic(eigenvalues: &[f64]) -> Result<f64> {
    let mut e = eigenvalues.to_vec();
    e.sort_by(f64::total_cmp);
    let e = collapse_degeneracies(&e);
    if e.len() < 3 {
        return Err(Error::InvalidArgument(format!("{} distinct levels; need at least 3", e.len())));
    }
    let gaps: Vec<f64> = e.windows(2).map(|w| w[1] - w[0]).collect();
    let sum: f64 = gaps.windows(2).map(|g| g[0].min(g[1]) / g[0].max(g[1])).sum();
    Ok(sum / (gaps.len() - 1) as f64)
}
