//! Constrained Hamiltonians and diagonal observables.
//!
//! Off-diagonal elements are real in the level basis, so operators keep real
//! values and act on complex vectors. Values are stored with Ω = 1; the
//! `scale` field carries Ω and is applied on every product.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::basis::{Boundary, ConstrainedBasis};
use crate::{Error, Result, C64};

/// Above this dimension `build_hamiltonian` returns a matrix-free applier.
pub const MATRIX_FREE_THRESHOLD: usize = 1_000_000;
const PAR_MIN_ROWS: usize = 1 << 14;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    pub omega: f64,
    /// Strength of the next-nearest Sᶻ dressing; spin-1/2 rings only.
    pub h: f64,
}

impl ModelParams {
    pub fn pxp(omega: f64) -> Self {
        Self { omega, h: 0.0 }
    }
    fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return Err(Error::InvalidArgument(format!("omega = {} must be positive", self.omega)));
        }
        if !self.h.is_finite() {
            return Err(Error::InvalidArgument("h must be finite".into()));
        }
        Ok(())
    }
}

pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    /// y = A x. Panics if buffer lengths differ from `dim`; `apply` checks.
    fn apply_into(&self, x: &[C64], y: &mut [C64]);
}

/// Real CSR matrix with an overall scale.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    scale: f64,
    pub hermitian: bool,
}

impl SparseOperator {
    pub fn from_rows(rows: Vec<Vec<(u32, f64)>>, scale: f64, hermitian: bool) -> Self {
        let dim = rows.len();
        let nnz = rows.iter().map(Vec::len).sum();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for mut r in rows {
            r.sort_by_key(|e| e.0);
            for (c, v) in r {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self { dim, row_ptr, cols, vals, scale, hermitian }
    }

    pub fn identity(dim: usize, scale: f64) -> Self {
        Self::from_rows((0..dim).map(|i| vec![(i as u32, 1.0)]).collect(), scale, true)
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Entries of row r in units of the scale.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.cols[a..b].iter().zip(&self.vals[a..b]).map(|(&c, &v)| (c as usize, v))
    }

    /// Element (r, c) including the scale.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        match self.cols[a..b].binary_search(&(c as u32)) {
            Ok(k) => self.vals[a + k] * self.scale,
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                m[(r, c)] += v * self.scale;
            }
        }
        m
    }

    /// max |A_rc − A_cr|.
    pub fn hermiticity_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                worst = worst.max((v * self.scale - self.get(c, r)).abs());
            }
        }
        worst
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|r| self.get(r, r)).collect()
    }
}

impl LinearOperator for SparseOperator {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        let row = |r: usize| -> C64 {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += x[self.cols[k] as usize] * self.vals[k];
            }
            acc * self.scale
        };
        if self.dim >= PAR_MIN_ROWS {
            y.par_iter_mut().enumerate().for_each(|(r, out)| *out = row(r));
        } else {
            y.iter_mut().enumerate().for_each(|(r, out)| *out = row(r));
        }
    }
}

/// Rows generated on the fly from the basis; same output as the explicit matrix.
pub struct MatrixFree<'a> {
    basis: &'a ConstrainedBasis,
    params: ModelParams,
}

impl<'a> MatrixFree<'a> {
    pub fn new(basis: &'a ConstrainedBasis, params: ModelParams) -> Result<Self> {
        check_model(basis, &params)?;
        Ok(Self { basis, params })
    }
}

impl LinearOperator for MatrixFree<'_> {
    fn dim(&self) -> usize {
        self.basis.len()
    }
    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.dim());
        assert_eq!(y.len(), self.dim());
        let hr = self.params.h / self.params.omega;
        let row = |r: usize| -> C64 {
            let mut acc = C64::new(0.0, 0.0);
            for_each_flip(self.basis, r, hr, |c, v| acc += x[c] * v);
            acc * self.params.omega
        };
        if self.dim() >= PAR_MIN_ROWS {
            y.par_iter_mut().enumerate().for_each(|(r, out)| *out = row(r));
        } else {
            y.iter_mut().enumerate().for_each(|(r, out)| *out = row(r));
        }
    }
}

/// Either storage form of a Hamiltonian.
pub enum Hamiltonian<'a> {
    Sparse(SparseOperator),
    MatrixFree(MatrixFree<'a>),
}

impl LinearOperator for Hamiltonian<'_> {
    fn dim(&self) -> usize {
        match self {
            Self::Sparse(a) => a.dim(),
            Self::MatrixFree(a) => a.dim(),
        }
    }
    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        match self {
            Self::Sparse(a) => a.apply_into(x, y),
            Self::MatrixFree(a) => a.apply_into(x, y),
        }
    }
}

/// ⟨n+1|Sˣ|n⟩ = ½√(s(s+1) − m(m+1)), m = n − s.
#[inline]
pub fn sx_ladder(two_s: u32, n: u8) -> f64 {
    let s = two_s as f64 / 2.0;
    let m = n as f64 - s;
    0.5 * (s * (s + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
}

fn check_model(basis: &ConstrainedBasis, p: &ModelParams) -> Result<()> {
    p.validate()?;
    if p.h != 0.0 {
        if basis.two_s() != 1 {
            return Err(Error::Unsupported("deformation is defined for spin 1/2 only".into()));
        }
        if basis.boundary() != Boundary::Periodic {
            return Err(Error::Unsupported("deformation is defined on periodic rings only".into()));
        }
        if basis.sites() < 4 {
            return Err(Error::Unsupported("deformation needs L >= 4 so that i±2 differ from i".into()));
        }
    }
    Ok(())
}

/// Calls `f(col, value)` for each nonzero of row `r` of H/Ω with deformation ratio `hr` = h/Ω.
#[inline]
fn for_each_flip(basis: &ConstrainedBasis, r: usize, hr: f64, mut f: impl FnMut(usize, f64)) {
    let l = basis.sites();
    let w = basis.word(r);
    let two_s = basis.two_s();
    let periodic = basis.boundary() == Boundary::Periodic;
    let s = basis.spin();
    for i in 0..l {
        let left = if i > 0 { Some(i - 1) } else if periodic { Some(l - 1) } else { None };
        let right = if i + 1 < l { Some(i + 1) } else if periodic { Some(0) } else { None };
        if left.is_some_and(|j| basis.digit(w, j) != 0) || right.is_some_and(|j| basis.digit(w, j) != 0) {
            continue;
        }
        // Sᶻ dressing on i±2, untouched by the flip at i
        let dress = if hr != 0.0 {
            let a = basis.digit(w, (i + 2) % l) as f64 - s;
            let b = basis.digit(w, (i + l - 2) % l) as f64 - s;
            1.0 + hr * (a + b)
        } else {
            1.0
        };
        let n = basis.digit(w, i);
        let p = basis.place(i);
        if (n as u32) < two_s {
            let c = basis.rank_word(w + p).expect("flip keeps admissibility");
            f(c, sx_ladder(two_s, n) * dress);
        }
        if n > 0 {
            let c = basis.rank_word(w - p).expect("flip keeps admissibility");
            f(c, sx_ladder(two_s, n - 1) * dress);
        }
    }
}

fn build_rows(basis: &ConstrainedBasis, params: ModelParams) -> Result<SparseOperator> {
    check_model(basis, &params)?;
    let hr = params.h / params.omega;
    let rows: Vec<Vec<(u32, f64)>> = (0..basis.len())
        .into_par_iter()
        .map(|r| {
            let mut row = Vec::new();
            for_each_flip(basis, r, hr, |c, v| row.push((c as u32, v)));
            row
        })
        .collect();
    Ok(SparseOperator::from_rows(rows, params.omega, true))
}

/// Ω Σᵢ Pᵢ₋₁ Sˣᵢ Pᵢ₊₁ on the constrained space.
pub fn build_pxp(basis: &ConstrainedBasis, params: ModelParams) -> Result<SparseOperator> {
    if params.h != 0.0 {
        return Err(Error::InvalidArgument("build_pxp takes h = 0; use build_deformed".into()));
    }
    build_rows(basis, params)
}

/// PXP plus h Σᵢ Pᵢ₋₁Sˣᵢ Pᵢ₊₁ (Sᶻᵢ₊₂ + Sᶻᵢ₋₂), periodic wraparound on all offsets.
pub fn build_deformed(basis: &ConstrainedBasis, params: ModelParams) -> Result<SparseOperator> {
    if basis.two_s() != 1 {
        return Err(Error::Unsupported("deformation is defined for spin 1/2 only".into()));
    }
    build_rows(basis, params)
}

/// Explicit CSR below `MATRIX_FREE_THRESHOLD`, matrix-free above.
pub fn build_hamiltonian(basis: &ConstrainedBasis, params: ModelParams) -> Result<Hamiltonian<'_>> {
    if basis.len() > MATRIX_FREE_THRESHOLD {
        Ok(Hamiltonian::MatrixFree(MatrixFree::new(basis, params)?))
    } else {
        Ok(Hamiltonian::Sparse(build_rows(basis, params)?))
    }
}

/// Diagonal Sᶻ at `site`: entries nᵢ − s.
pub fn local_sz(basis: &ConstrainedBasis, site: usize) -> Result<SparseOperator> {
    if site >= basis.sites() {
        return Err(Error::InvalidArgument(format!("site {site} >= L = {}", basis.sites())));
    }
    let s = basis.spin();
    let rows = basis
        .packed()
        .iter()
        .enumerate()
        .map(|(r, &w)| vec![(r as u32, basis.digit(w, site) as f64 - s)])
        .collect();
    Ok(SparseOperator::from_rows(rows, 1.0, true))
}

/// Per-site ⟨Sᶻᵢ⟩ for every site in one pass over the amplitudes.
pub fn sz_profile(basis: &ConstrainedBasis, psi: &[C64]) -> Vec<f64> {
    let l = basis.sites();
    let s = basis.spin();
    let mut out = vec![0.0; l];
    for (r, a) in psi.iter().enumerate() {
        let p = a.norm_sqr();
        if p == 0.0 {
            continue;
        }
        let w = basis.word(r);
        for (i, o) in out.iter_mut().enumerate() {
            *o += p * (basis.digit(w, i) as f64 - s);
        }
    }
    out
}

/// y = A x with dimension checks.
pub fn apply(op: &dyn LinearOperator, x: &[C64]) -> Result<Vec<C64>> {
    if x.len() != op.dim() {
        return Err(Error::DimensionMismatch { expected: op.dim(), got: x.len() });
    }
    let mut y = vec![C64::new(0.0, 0.0); x.len()];
    op.apply_into(x, &mut y);
    Ok(y)
}

/// ⟨x|A|x⟩.
pub fn expectation(op: &dyn LinearOperator, x: &[C64]) -> Result<C64> {
    let y = apply(op, x)?;
    Ok(x.iter().zip(&y).map(|(a, b)| a.conj() * b).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;

    fn ring(l: usize, two_s: u32) -> ConstrainedBasis {
        ConstrainedBasis::new(l, two_s, Boundary::Periodic).unwrap()
    }

    #[test]
    fn two_site_elements() {
        let b = ring(2, 1);
        let h = build_pxp(&b, ModelParams::pxp(1.0)).unwrap().to_dense();
        // order: 00, 01, 10
        assert_eq!(h[(0, 1)], 0.5);
        assert_eq!(h[(0, 2)], 0.5);
        assert_eq!(h[(1, 2)], 0.0);
        assert_eq!(h.iter().filter(|v| **v != 0.0).count(), 4);
    }

    #[test]
    fn ladder_elements() {
        // spin 1: ⟨1|Sx|0⟩ = 1/√2
        assert!((sx_ladder(2, 0) - 0.5f64.sqrt()).abs() < 1e-15);
        // spin 1/2: 1/2
        assert_eq!(sx_ladder(1, 0), 0.5);
        // spin 2: ⟨1|Sx|0⟩ = 1, ⟨2|Sx|1⟩ = √6/2
        assert!((sx_ladder(4, 0) - 1.0).abs() < 1e-15);
        assert!((sx_ladder(4, 1) - 1.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn traceless_and_hermitian() {
        for (l, two_s) in [(6, 1), (7, 2), (5, 4)] {
            let h = build_pxp(&ring(l, two_s), ModelParams::pxp(1.3)).unwrap();
            assert_eq!(h.diagonal().iter().sum::<f64>(), 0.0);
            assert!(h.hermiticity_residual() < 1e-14);
        }
    }

    #[test]
    fn spectrum_symmetric() {
        let h = build_pxp(&ring(6, 1), ModelParams::pxp(1.0)).unwrap().to_dense();
        let mut e: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        let n = e.len();
        for i in 0..n {
            assert!((e[i] + e[n - 1 - i]).abs() < 1e-10);
        }
    }

    #[test]
    fn deformed_at_zero_is_bit_identical() {
        let b = ring(8, 1);
        let a = build_pxp(&b, ModelParams::pxp(1.0)).unwrap();
        let d = build_deformed(&b, ModelParams { omega: 1.0, h: 0.0 }).unwrap();
        assert_eq!(a, d);
    }

    #[test]
    fn deformed_properties() {
        let b = ring(8, 1);
        let d = build_deformed(&b, ModelParams { omega: 1.0, h: 0.1 }).unwrap();
        assert!(d.hermiticity_residual() < 1e-14);
        let z2 = b.rank(&[0, 1, 0, 1, 0, 1, 0, 1]).unwrap();
        assert_eq!(d.get(z2, z2), 0.0);
        assert!(build_deformed(&ring(6, 2), ModelParams { omega: 1.0, h: 0.1 }).is_err());
        assert!(build_pxp(&b, ModelParams { omega: 1.0, h: 0.1 }).is_err());
    }

    #[test]
    fn deformed_matches_explicit_products() {
        // Dense oracle in the unconstrained 2^L space: build each term as an explicit
        // product of single-site matrices and compress onto the admissible configs.
        let l = 6;
        let h = 0.23;
        let b = ring(l, 1);
        let dim = 1usize << l;
        let bit = |x: usize, i: usize| (x >> (l - 1 - i)) & 1;
        let mut full = vec![vec![0.0f64; dim]; dim];
        for x in 0..dim {
            for i in 0..l {
                let (lft, rgt) = ((i + l - 1) % l, (i + 1) % l);
                if bit(x, lft) == 1 || bit(x, rgt) == 1 {
                    continue;
                }
                let y = x ^ (1 << (l - 1 - i));
                let sz = |j: usize| bit(x, j) as f64 - 0.5;
                full[y][x] += 0.5 + h * 0.5 * (sz((i + 2) % l) + sz((i + l - 2) % l));
            }
        }
        let d = build_deformed(&b, ModelParams { omega: 1.0, h }).unwrap();
        for r in 0..b.len() {
            for c in 0..b.len() {
                let (xr, xc) = (b.word(r) as usize, b.word(c) as usize);
                assert!((d.get(r, c) - full[xr][xc]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn commutes_with_translation_and_inversion() {
        for (l, two_s, h) in [(8, 1, 0.0), (8, 1, 0.17), (6, 2, 0.0)] {
            let b = ring(l, two_s);
            let op = build_rows(&b, ModelParams { omega: 1.0, h }).unwrap();
            for r in 0..b.len() {
                for (c, v) in op.row(r) {
                    let tr = b.rank_word(b.translate(b.word(r))).unwrap();
                    let tc = b.rank_word(b.translate(b.word(c))).unwrap();
                    assert_eq!(op.get(tr, tc), v);
                    let ir = b.rank_word(b.invert(b.word(r))).unwrap();
                    let ic = b.rank_word(b.invert(b.word(c))).unwrap();
                    assert!((op.get(ir, ic) - v).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn particle_hole_anticommutes() {
        let b = ring(10, 1);
        let op = build_pxp(&b, ModelParams::pxp(1.0)).unwrap();
        let parity = |w: u64| b.unpack(w).iter().map(|&n| n as u32).sum::<u32>() % 2;
        for r in 0..b.len() {
            for (c, _) in op.row(r) {
                assert_ne!(parity(b.word(r)), parity(b.word(c)));
            }
        }
    }

    #[test]
    fn local_sz_values() {
        let b = ring(4, 1);
        let z = local_sz(&b, 1).unwrap();
        assert_eq!(z.get(0, 0), -0.5);
        let z2 = b.rank(&[0, 1, 0, 1]).unwrap();
        assert_eq!(z.get(z2, z2), 0.5);
        assert!(local_sz(&b, 4).is_err());
    }

    #[test]
    fn uniform_superposition_total_sz() {
        // Brute force over all 16 bitstrings; the admissible ones carry 8 excitations.
        let b = ring(4, 1);
        let mut total = 0.0;
        let mut count = 0.0;
        for x in 0u32..16 {
            let lv: Vec<u8> = (0..4).map(|i| ((x >> (3 - i)) & 1) as u8).collect();
            if crate::basis::admissible(&lv, Boundary::Periodic) {
                count += 1.0;
                total += lv.iter().map(|&n| n as f64 - 0.5).sum::<f64>();
            }
        }
        let oracle = total / count;
        assert!((oracle + 6.0 / 7.0).abs() < 1e-15);
        let psi = vec![C64::new(1.0 / 7f64.sqrt(), 0.0); 7];
        let sum: f64 = (0..4).map(|i| expectation(&local_sz(&b, i).unwrap(), &psi).unwrap().re).sum();
        assert!((sum - oracle).abs() < 1e-14);
    }

    #[test]
    fn matrix_free_matches_sparse() {
        let b = ring(12, 2);
        let p = ModelParams::pxp(0.7);
        let sp = build_pxp(&b, p).unwrap();
        let mf = MatrixFree::new(&b, p).unwrap();
        let x: Vec<C64> = (0..b.len()).map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect();
        let y1 = apply(&sp, &x).unwrap();
        let y2 = apply(&mf, &x).unwrap();
        let err = y1.iter().zip(&y2).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-13);
        let b1 = ring(10, 1);
        let p = ModelParams { omega: 1.0, h: 0.31 };
        let d = build_deformed(&b1, p).unwrap();
        let x: Vec<C64> = (0..b1.len()).map(|i| C64::new((i as f64).cos(), 0.3)).collect();
        let e = apply(&d, &x).unwrap().iter().zip(&apply(&MatrixFree::new(&b1, p).unwrap(), &x).unwrap()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(e < 1e-13);
    }

    #[test]
    fn eigenvector_residual() {
        let b = ring(6, 1);
        let h = build_pxp(&b, ModelParams::pxp(1.0)).unwrap();
        let eig = SymmetricEigen::new(h.to_dense());
        for k in 0..b.len() {
            let v: Vec<C64> = eig.eigenvectors.column(k).iter().map(|&a| C64::new(a, 0.0)).collect();
            let hv = apply(&h, &v).unwrap();
            let res = hv.iter().zip(&v).map(|(a, b)| (a - b * eig.eigenvalues[k]).norm()).fold(0.0, f64::max);
            assert!(res < 1e-10);
        }
        assert!(apply(&h, &[C64::new(1.0, 0.0)]).is_err());
    }

    #[test]
    fn scaled_identity() {
        let id = SparseOperator::identity(5, 2.5);
        let x: Vec<C64> = (0..5).map(|i| C64::new(i as f64, -1.0)).collect();
        let y = apply(&id, &x).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert_eq!(a * 2.5, *b);
        }
    }
}
