//! Exact quench dynamics on the constrained space.
//!
//! Sublattice convention used throughout the crate: the "e" sublattice is the
//! set of odd 0-based sites (1, 3, 5, ...), so |ℤ₂⟩ = 0101… has the e sites
//! fully excited and |ℤ₂′⟩ = 1010… the "o" sites.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::basis::{Boundary, ConstrainedBasis};
use crate::ops::{apply, sz_profile, LinearOperator, SparseOperator};
use crate::{Error, Result, C64};

pub type StateVector = Vec<C64>;

/// Dimension up to which `DenseEvolver` is offered as an oracle.
pub const DENSE_EXPM_MAX: usize = 4000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Pattern {
    AllZero,
    /// Maximal level on odd 0-based sites.
    Z2,
    /// Maximal level on even 0-based sites.
    Z2Prime,
    Custom(Vec<u8>),
}

pub fn pattern_levels(basis: &ConstrainedBasis, pattern: &Pattern) -> Result<Vec<u8>> {
    let l = basis.sites();
    let top = basis.two_s() as u8;
    let alt = |odd: bool| -> Result<Vec<u8>> {
        if basis.boundary() == Boundary::Periodic && l % 2 == 1 {
            return Err(Error::InvalidArgument("Néel pattern needs an even ring".into()));
        }
        Ok((0..l).map(|i| if (i % 2 == 1) == odd { top } else { 0 }).collect())
    };
    match pattern {
        Pattern::AllZero => Ok(vec![0; l]),
        Pattern::Z2 => alt(true),
        Pattern::Z2Prime => alt(false),
        Pattern::Custom(v) => Ok(v.clone()),
    }
}

/// Unit vector on a product configuration.
pub fn product_state(basis: &ConstrainedBasis, pattern: &Pattern) -> Result<StateVector> {
    let levels = pattern_levels(basis, pattern)?;
    if levels.len() != basis.sites() {
        return Err(Error::DimensionMismatch { expected: basis.sites(), got: levels.len() });
    }
    if !basis.is_admissible(&levels) {
        return Err(Error::InvalidArgument("pattern violates the blockade".into()));
    }
    let idx = basis.rank(&levels)?;
    let mut psi = vec![C64::new(0.0, 0.0); basis.len()];
    psi[idx] = C64::new(1.0, 0.0);
    Ok(psi)
}

pub fn norm(x: &[C64]) -> f64 {
    x.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

pub fn inner(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

#[derive(Clone, Copy, Debug)]
pub struct KrylovParams {
    pub subspace: usize,
    /// Target bound on the per-step error estimate.
    pub tol: f64,
}

impl Default for KrylovParams {
    fn default() -> Self {
        Self { subspace: 30, tol: 1e-10 }
    }
}

/// ψ(dt) = exp(−i H dt) ψ by Lanczos steps with full reorthogonalization.
pub fn evolve(op: &dyn LinearOperator, psi: &[C64], dt: f64) -> Result<StateVector> {
    evolve_with(op, psi, dt, KrylovParams::default())
}

pub fn evolve_with(op: &dyn LinearOperator, psi: &[C64], dt: f64, kp: KrylovParams) -> Result<StateVector> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt = {dt} must be positive")));
    }
    if psi.len() != op.dim() {
        return Err(Error::DimensionMismatch { expected: op.dim(), got: psi.len() });
    }
    let mut state = psi.to_vec();
    let mut remaining = dt;
    let mut tau_guess = dt;
    while remaining > 0.0 {
        let (tau, next) = krylov_step(op, &state, remaining.min(2.0 * tau_guess), kp)?;
        state = next;
        remaining -= tau;
        if remaining < 1e-14 * dt {
            break;
        }
        tau_guess = tau;
    }
    Ok(state)
}

/// One Lanczos subspace; returns the largest accepted step ≤ `tau_max` and the propagated vector.
fn krylov_step(op: &dyn LinearOperator, v0: &[C64], tau_max: f64, kp: KrylovParams) -> Result<(f64, StateVector)> {
    let n = v0.len();
    let beta0 = norm(v0);
    if beta0 == 0.0 {
        return Ok((tau_max, v0.to_vec()));
    }
    let m_max = kp.subspace.min(n).max(1);
    let mut basis: Vec<StateVector> = vec![v0.iter().map(|a| a / beta0).collect()];
    let mut alpha = Vec::with_capacity(m_max);
    let mut beta: Vec<f64> = Vec::with_capacity(m_max);
    let mut w = vec![C64::new(0.0, 0.0); n];
    let mut exact = false;
    let mut beta_last = 0.0;
    for j in 0..m_max {
        op.apply_into(&basis[j], &mut w);
        let a = inner(&basis[j], &w).re;
        alpha.push(a);
        // full reorthogonalization, applied twice
        for _ in 0..2 {
            for q in &basis {
                let c = inner(q, &w);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
        let b = norm(&w);
        if b < 1e-12 * alpha.iter().fold(1.0f64, |acc, x| acc.max(x.abs())) {
            exact = true;
            break;
        }
        if j + 1 == m_max {
            beta_last = b;
            break;
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let coeffs = |tau: f64| -> Vec<C64> {
        // exp(−iτT) e₁ = V exp(−iτΛ) Vᵀ e₁
        let mut c = vec![C64::new(0.0, 0.0); m];
        for k in 0..m {
            let f = C64::from_polar(1.0, -tau * eig.eigenvalues[k]) * eig.eigenvectors[(0, k)];
            for (i, ci) in c.iter_mut().enumerate() {
                *ci += f * eig.eigenvectors[(i, k)];
            }
        }
        c
    };
    let mut tau = tau_max;
    let c = loop {
        let c = coeffs(tau);
        let err = if exact { 0.0 } else { beta0 * beta_last * c[m - 1].norm() };
        if err <= kp.tol {
            break c;
        }
        tau *= 0.5;
        if tau < 1e-12 * tau_max.max(1.0) {
            return Err(Error::NoConvergence(format!(
                "Krylov step shrank below {tau:.3e} with residual estimate {err:.3e}"
            )));
        }
    };
    let mut out = vec![C64::new(0.0, 0.0); n];
    for (q, &cq) in basis.iter().zip(&c) {
        let f = cq * beta0;
        for (o, qi) in out.iter_mut().zip(q) {
            *o += f * qi;
        }
    }
    Ok((tau, out))
}

/// Full eigendecomposition for exact exp(−iHt); oracle for small spaces.
pub struct DenseEvolver {
    values: DVector<f64>,
    vectors: DMatrix<f64>,
}

impl DenseEvolver {
    pub fn new(op: &SparseOperator) -> Result<Self> {
        let n = op.dim();
        if n > DENSE_EXPM_MAX {
            return Err(Error::Capacity { what: "dense expm dimension", needed: n as u128, limit: DENSE_EXPM_MAX as u128 });
        }
        let e = SymmetricEigen::new(op.to_dense());
        Ok(Self { values: e.eigenvalues, vectors: e.eigenvectors })
    }

    pub fn evolve(&self, psi: &[C64], t: f64) -> StateVector {
        let n = psi.len();
        let mut out = vec![C64::new(0.0, 0.0); n];
        for k in 0..n {
            let col = self.vectors.column(k);
            let proj: C64 = col.iter().zip(psi).map(|(v, a)| a * *v).sum();
            let f = proj * C64::from_polar(1.0, -self.values[k] * t);
            for (o, v) in out.iter_mut().zip(col.iter()) {
                *o += f * *v;
            }
        }
        out
    }
}

/// Entanglement entropy in bits of the contiguous ring region starting at
/// `start` with `len` sites, from the spectrum of the reduced density matrix.
pub fn entanglement_entropy(basis: &ConstrainedBasis, psi: &[C64], start: usize, len: usize) -> Result<f64> {
    let l = basis.sites();
    if len == 0 || len >= l {
        return Err(Error::InvalidArgument(format!("region of {len} sites on L = {l}")));
    }
    if psi.len() != basis.len() {
        return Err(Error::DimensionMismatch { expected: basis.len(), got: psi.len() });
    }
    let (rows, ma, mb) = bipartition(basis, psi, start, len);
    let probs = schmidt_probabilities(&rows, ma, mb);
    Ok(entropy_bits(&probs))
}

/// Bipartition matrix entries (row, col, amplitude) with segment counts.
/// Row indexes admissible configurations of the region, col those of the complement.
pub fn bipartition(basis: &ConstrainedBasis, psi: &[C64], start: usize, len: usize) -> (Vec<(usize, usize, C64)>, usize, usize) {
    let l = basis.sites();
    let d = basis.levels();
    let mut ia: HashMap<u64, usize> = HashMap::new();
    let mut ib: HashMap<u64, usize> = HashMap::new();
    let mut entries = Vec::with_capacity(psi.len());
    for (r, &a) in psi.iter().enumerate() {
        let w = basis.word(r);
        let (mut wa, mut wb) = (0u64, 0u64);
        for k in 0..l {
            let n = basis.digit(w, (start + k) % l) as u64;
            if k < len {
                wa = wa * d + n;
            } else {
                wb = wb * d + n;
            }
        }
        let na = ia.len();
        let x = *ia.entry(wa).or_insert(na);
        let nb = ib.len();
        let y = *ib.entry(wb).or_insert(nb);
        if a != C64::new(0.0, 0.0) {
            entries.push((x, y, a));
        }
    }
    (entries, ia.len(), ib.len())
}

fn schmidt_probabilities(entries: &[(usize, usize, C64)], ma: usize, mb: usize) -> Vec<f64> {
    // reduce on the smaller side
    let swap = mb < ma;
    let (m, k) = if swap { (mb, ma) } else { (ma, mb) };
    let mut mat = DMatrix::<C64>::zeros(m, k);
    for &(x, y, a) in entries {
        if swap {
            mat[(y, x)] += a.conj();
        } else {
            mat[(x, y)] += a;
        }
    }
    let rho = &mat * mat.adjoint();
    let e = SymmetricEigen::new(rho);
    e.eigenvalues.iter().map(|&p| p.max(0.0)).collect()
}

pub fn entropy_bits(probs: &[f64]) -> f64 {
    let total: f64 = probs.iter().sum();
    let s: f64 = probs
        .iter()
        .filter(|&&p| p > 1e-300)
        .map(|&p| {
            let q = p / total;
            -q * q.log2()
        })
        .sum();
    s.max(0.0)
}

#[derive(Clone, Debug, Serialize)]
pub struct QuenchSeries {
    pub sites: usize,
    pub t: Vec<f64>,
    /// sz[k][i] = ⟨Sᶻᵢ⟩ at time t[k].
    pub sz: Vec<Vec<f64>>,
    pub fidelity: Vec<f64>,
    /// Half ring [0, L/2).
    pub ee_half: Vec<f64>,
    /// Site 0.
    pub ee_one: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct QuenchOptions {
    pub t_max: f64,
    pub dt_out: f64,
    pub entropies: bool,
    pub krylov: KrylovParams,
}

impl QuenchOptions {
    pub fn new(t_max: f64, dt_out: f64) -> Self {
        Self { t_max, dt_out, entropies: true, krylov: KrylovParams::default() }
    }
}

pub fn quench_series(
    basis: &ConstrainedBasis,
    op: &dyn LinearOperator,
    psi0: &[C64],
    opts: QuenchOptions,
) -> Result<QuenchSeries> {
    if !(opts.dt_out > 0.0) || !(opts.t_max >= 0.0) {
        return Err(Error::InvalidArgument("need dt_out > 0 and t_max >= 0".into()));
    }
    let steps = (opts.t_max / opts.dt_out + 1e-9).floor() as usize;
    let l = basis.sites();
    let mut out = QuenchSeries {
        sites: l,
        t: Vec::with_capacity(steps + 1),
        sz: Vec::with_capacity(steps + 1),
        fidelity: Vec::with_capacity(steps + 1),
        ee_half: Vec::new(),
        ee_one: Vec::new(),
    };
    let mut psi = psi0.to_vec();
    for k in 0..=steps {
        if k > 0 {
            psi = evolve_with(op, &psi, opts.dt_out, opts.krylov)?;
        }
        out.t.push(k as f64 * opts.dt_out);
        out.sz.push(sz_profile(basis, &psi));
        out.fidelity.push(inner(psi0, &psi).norm_sqr().min(1.0));
        if opts.entropies {
            out.ee_half.push(entanglement_entropy(basis, &psi, 0, l / 2)?);
            out.ee_one.push(entanglement_entropy(basis, &psi, 0, 1)?);
        }
    }
    Ok(out)
}

impl QuenchSeries {
    /// Site-averaged ⟨Sᶻ⟩ averaged over samples with t in [t0, t1].
    pub fn time_average_sz(&self, t0: f64, t1: f64) -> f64 {
        let (mut acc, mut n) = (0.0, 0usize);
        for (t, row) in self.t.iter().zip(&self.sz) {
            if *t >= t0 - 1e-12 && *t <= t1 + 1e-12 {
                acc += row.iter().sum::<f64>() / row.len() as f64;
                n += 1;
            }
        }
        acc / n.max(1) as f64
    }

    /// Sublattice averages (odd 0-based sites, even 0-based sites) per sample.
    pub fn sublattice_sz(&self) -> Vec<(f64, f64)> {
        self.sz
            .iter()
            .map(|row| {
                let mean = |odd: bool| {
                    let v: Vec<f64> = row.iter().enumerate().filter(|(i, _)| (i % 2 == 1) == odd).map(|(_, x)| *x).collect();
                    v.iter().sum::<f64>() / v.len().max(1) as f64
                };
                (mean(true), mean(false))
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t");
        for i in 0..self.sites {
            s.push_str(&format!(",sz_site_{i}"));
        }
        s.push_str(",fidelity,ee_half,ee_one\n");
        for k in 0..self.t.len() {
            s.push_str(&fmt_sci(self.t[k]));
            for v in &self.sz[k] {
                s.push(',');
                s.push_str(&fmt_sci(*v));
            }
            s.push(',');
            s.push_str(&fmt_sci(self.fidelity[k]));
            for col in [&self.ee_half, &self.ee_one] {
                s.push(',');
                s.push_str(&col.get(k).map(|v| fmt_sci(*v)).unwrap_or_default());
            }
            s.push('\n');
        }
        s
    }
}

/// 17 significant digits, scientific notation.
pub fn fmt_sci(x: f64) -> String {
    format!("{x:.16e}")
}

/// Local maxima of a sampled series above `floor`, refined by a parabola through
/// the three samples around each peak. Returns (time, value).
pub fn local_maxima(t: &[f64], y: &[f64], floor: f64) -> Vec<(f64, f64)> {
    local_extrema(t, y, |a, b| a > b).into_iter().filter(|p| p.1 > floor).collect()
}

pub fn local_minima(t: &[f64], y: &[f64]) -> Vec<(f64, f64)> {
    local_extrema(t, y, |a, b| a < b)
}

fn local_extrema(t: &[f64], y: &[f64], better: impl Fn(f64, f64) -> bool) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for k in 1..y.len().saturating_sub(1) {
        if better(y[k], y[k - 1]) && !better(y[k + 1], y[k]) && y[k] != y[k + 1] {
            let h = t[k + 1] - t[k];
            let denom = y[k - 1] - 2.0 * y[k] + y[k + 1];
            let (dt, val) = if denom.abs() > 0.0 {
                let d = 0.5 * (y[k - 1] - y[k + 1]) / denom;
                (d * h, y[k] - 0.25 * (y[k - 1] - y[k + 1]) * d)
            } else {
                (0.0, y[k])
            };
            out.push((t[k] + dt, val));
        }
    }
    out
}

/// Energy ⟨ψ|H|ψ⟩ (real part).
pub fn energy(op: &dyn LinearOperator, psi: &[C64]) -> Result<f64> {
    Ok(inner(psi, &apply(op, psi)?).re)
}
