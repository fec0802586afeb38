//! The bond-dimension-2 variational manifold.
//!
//! Single-site coherent state: |θ,φ⟩ = Σₙ √C(2s,n) cos^{2s−n}(θ/2) (−i e^{iφ} sin(θ/2))ⁿ |n⟩,
//! so x = ⟨0|θ,φ⟩ = cos^{2s}(θ/2). The site tensor is
//!
//! ```text
//!   A = [ P|θ,φ⟩   Q|θ,φ⟩ ]
//!       [ |0⟩       0     ]
//! ```
//!
//! and the state is Tr(A₁⋯A_L). Its squared norm on a ring is exactly
//! 1 + Π(xⱼ² − 1), which reduces to 1 + Π(−sin²(θⱼ/2)) for spin 1/2.

use nalgebra::{Matrix2, Matrix4, Vector4};

use crate::basis::{Boundary, ConstrainedBasis};
use crate::dynamics::StateVector;
use crate::{Error, Result, C64};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

pub fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Level amplitudes of the coherent state.
pub fn coherent(theta: f64, phi: f64, two_s: u32) -> Vec<C64> {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let b = C64::new(0.0, -1.0) * C64::from_polar(1.0, phi) * s;
    (0..=two_s)
        .map(|n| b.powi(n as i32) * (binomial(two_s, n).sqrt() * c.powi((two_s - n) as i32)))
        .collect()
}

/// ∂/∂θ of `coherent`.
pub fn coherent_dtheta(theta: f64, phi: f64, two_s: u32) -> Vec<C64> {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let ph = C64::new(0.0, -1.0) * C64::from_polar(1.0, phi);
    (0..=two_s)
        .map(|n| {
            let a = (two_s - n) as i32;
            let n = n as i32;
            // d/dθ cos^a sin^n = ½(n cos^{a+1} sin^{n−1} − a cos^{a−1} sin^{n+1})
            let t1 = if n > 0 { n as f64 * c.powi(a + 1) * s.powi(n - 1) } else { 0.0 };
            let t2 = if a > 0 { a as f64 * c.powi(a - 1) * s.powi(n + 1) } else { 0.0 };
            ph.powi(n) * (0.5 * binomial(two_s, n as u32).sqrt() * (t1 - t2))
        })
        .collect()
}

/// x = ⟨0|θ,φ⟩.
pub fn overlap_x(theta: f64, two_s: u32) -> f64 {
    (theta / 2.0).cos().powi(two_s as i32)
}

/// The 2×2 bond matrix selected by physical level n.
#[inline]
fn bond_matrix(v: &[C64], n: u8) -> Matrix2<C64> {
    if n == 0 {
        Matrix2::new(v[0], ZERO, ONE, ZERO)
    } else {
        Matrix2::new(ZERO, v[n as usize], ZERO, ZERO)
    }
}

/// Bond matrix of ∂A/∂θ; the |0⟩ entry of the lower row is constant.
#[inline]
fn bond_matrix_d(dv: &[C64], n: u8) -> Matrix2<C64> {
    if n == 0 {
        Matrix2::new(dv[0], ZERO, ZERO, ZERO)
    } else {
        Matrix2::new(ZERO, dv[n as usize], ZERO, ZERO)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoherentAngles {
    pub vartheta: Vec<f64>,
    pub varphi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaugeAngles {
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
}

impl GaugeAngles {
    /// Two-site pattern repeated over L sites: e on odd 0-based sites, o on even.
    pub fn two_site(l: usize, theta_e: f64, theta_o: f64, phi_e: f64, phi_o: f64) -> Self {
        let theta = (0..l).map(|i| if i % 2 == 1 { theta_e } else { theta_o }).collect();
        let phi = (0..l).map(|i| if i % 2 == 1 { phi_e } else { phi_o }).collect();
        Self { theta, phi }
    }

    /// Exact squared norm 1 + Π(xⱼ² − 1) of the unnormalized MPS.
    pub fn norm_formula(&self, two_s: u32) -> f64 {
        1.0 + self.theta.iter().map(|&t| overlap_x(t, two_s).powi(2) - 1.0).product::<f64>()
    }
}

fn check_ring(basis: &ConstrainedBasis, n: usize) -> Result<()> {
    if basis.boundary() != Boundary::Periodic {
        return Err(Error::Unsupported("matrix-product states here are defined on rings".into()));
    }
    if n != basis.sites() {
        return Err(Error::DimensionMismatch { expected: basis.sites(), got: n });
    }
    Ok(())
}

/// Normalized 𝒫 ⊗ᵢ|ϑᵢ,ϕᵢ⟩.
pub fn gutzwiller_state(basis: &ConstrainedBasis, angles: &CoherentAngles) -> Result<StateVector> {
    let l = basis.sites();
    if angles.vartheta.len() != l || angles.varphi.len() != l {
        return Err(Error::DimensionMismatch { expected: l, got: angles.vartheta.len() });
    }
    let sites: Vec<Vec<C64>> = (0..l).map(|i| coherent(angles.vartheta[i], angles.varphi[i], basis.two_s())).collect();
    let mut psi: Vec<C64> = basis
        .packed()
        .iter()
        .map(|&w| (0..l).fold(ONE, |acc, i| acc * sites[i][basis.digit(w, i) as usize]))
        .collect();
    normalize(&mut psi)?;
    Ok(psi)
}

pub fn normalize(psi: &mut [C64]) -> Result<()> {
    let n = crate::dynamics::norm(psi);
    if !(n > 1e-12) {
        return Err(Error::Degenerate("state has zero norm".into()));
    }
    psi.iter_mut().for_each(|a| *a /= n);
    Ok(())
}

/// Unnormalized Tr(A₁⋯A_L) amplitudes.
pub fn mps_dense(basis: &ConstrainedBasis, g: &GaugeAngles) -> Result<StateVector> {
    check_ring(basis, g.theta.len())?;
    let l = basis.sites();
    let sites: Vec<Vec<C64>> = (0..l).map(|i| coherent(g.theta[i], g.phi[i], basis.two_s())).collect();
    Ok(basis
        .packed()
        .iter()
        .map(|&w| {
            let m = (0..l).fold(Matrix2::identity(), |acc, i| acc * bond_matrix(&sites[i], basis.digit(w, i)));
            m.trace()
        })
        .collect())
}

/// Amplitudes and their θ-derivatives summed over the sites where `mask` is set.
pub fn mps_tangent(basis: &ConstrainedBasis, g: &GaugeAngles, mask: &[bool]) -> Result<(StateVector, StateVector)> {
    check_ring(basis, g.theta.len())?;
    let l = basis.sites();
    let two_s = basis.two_s();
    let v: Vec<Vec<C64>> = (0..l).map(|i| coherent(g.theta[i], g.phi[i], two_s)).collect();
    let dv: Vec<Vec<C64>> = (0..l).map(|i| coherent_dtheta(g.theta[i], g.phi[i], two_s)).collect();
    let mut amp = Vec::with_capacity(basis.len());
    let mut der = Vec::with_capacity(basis.len());
    for &w in basis.packed() {
        let mut p = Matrix2::<C64>::identity();
        let mut d = Matrix2::<C64>::zeros();
        for i in 0..l {
            let n = basis.digit(w, i);
            let m = bond_matrix(&v[i], n);
            d = if mask[i] { d * m + p * bond_matrix_d(&dv[i], n) } else { d * m };
            p *= m;
        }
        amp.push(p.trace());
        der.push(d.trace());
    }
    Ok((amp, der))
}

#[derive(Clone, Debug)]
pub struct GaugeMap {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub c: Vec<f64>,
    pub sweeps: usize,
}

/// Solve Gᵢ = 1 + Fᵢ/Gᵢ₊₁ with periodic closure by cyclic fixed-point sweeps.
pub fn continued_fraction(f: &[f64]) -> Result<(Vec<f64>, usize)> {
    let l = f.len();
    let mut g: Vec<f64> = f.iter().map(|x| 1.0 + x).collect();
    for sweep in 1..=100_000 {
        let mut delta = 0.0f64;
        for i in (0..l).rev() {
            let new = 1.0 + f[i] / g[(i + 1) % l];
            delta = delta.max((new - g[i]).abs() / new);
            g[i] = new;
        }
        if delta < 1e-14 {
            return Ok((g, sweep));
        }
    }
    Err(Error::NoConvergence("continued fraction did not settle in 1e5 sweeps".into()))
}

/// Positive root of the two-site closure G = 1 + F/G′, G′ = 1 + F′/G.
pub fn two_site_fraction(f: f64, fp: f64) -> (f64, f64) {
    let b = 1.0 + f - fp;
    let g = 0.5 * (b + (b * b + 4.0 * fp).sqrt());
    (g, g + fp - f)
}

/// Gutzwiller angles (ϑ, ϕ) to normalized-MPS angles (θ, φ); spin 1/2.
pub fn gauge_map(angles: &CoherentAngles) -> Result<(GaugeAngles, GaugeMap)> {
    let l = angles.vartheta.len();
    let a: Vec<f64> = angles.vartheta.iter().map(|t| (t / 2.0).cos()).collect();
    let b: Vec<C64> = (0..l)
        .map(|i| C64::new(0.0, -1.0) * C64::from_polar(1.0, angles.varphi[i]) * (angles.vartheta[i] / 2.0).sin())
        .collect();
    if a.iter().any(|x| x.abs() < 1e-12) {
        return Err(Error::Degenerate("cos(ϑ/2) = 0 on some site".into()));
    }
    let f: Vec<f64> = (0..l).map(|i| b[i].norm_sqr() / (a[i] * a[i])).collect();
    let (g, sweeps) = continued_fraction(&f)?;
    let c: Vec<f64> = (0..l).map(|i| g[i].sqrt() * a[i].abs()).collect();
    let mut theta = Vec::with_capacity(l);
    let mut phi = Vec::with_capacity(l);
    for i in 0..l {
        let j = (i + 1) % l;
        let cos_half = a[i] / c[i];
        let z = b[i] * (a[j] / (c[i] * c[j]));
        let sin_half = z.norm();
        theta.push(2.0 * sin_half.atan2(cos_half));
        // z = −i e^{iφ} sin(θ/2)
        phi.push(if sin_half > 0.0 { (C64::new(0.0, 1.0) * z).arg() } else { 0.0 });
    }
    Ok((GaugeAngles { theta, phi }, GaugeMap { f, g, c, sweeps }))
}

/// Single-site transfer matrix Σₙ Aₙ ⊗ Āₙ with closed-form eigendata.
///
/// Index order (a, a′) → 2a + a′. With x = cos^{2s}(θ/2):
/// T = [[x², 0, 0, 1−x²], [x, 0, 0, 0], [x, 0, 0, 0], [1, 0, 0, 0]],
/// eigenvalues (1, x² − 1, 0, 0).
#[derive(Clone, Debug)]
pub struct TransferMatrix {
    pub t: Matrix4<C64>,
    pub x: f64,
    pub eigenvalues: [f64; 4],
    pub right: [Vector4<f64>; 4],
    pub left: [Vector4<f64>; 4],
}

/// Σₙ A[a][b]ₙ conj(A[a′][b′]ₙ) assembled from the site tensor.
pub fn transfer_from_tensor(theta: f64, phi: f64, two_s: u32) -> Matrix4<C64> {
    let v = coherent(theta, phi, two_s);
    let mut t = Matrix4::<C64>::zeros();
    for n in 0..=two_s as u8 {
        let m = bond_matrix(&v, n);
        for (a, ap, b, bp) in itertools4() {
            t[(2 * a + ap, 2 * b + bp)] += m[(a, b)] * m[(ap, bp)].conj();
        }
    }
    t
}

fn itertools4() -> impl Iterator<Item = (usize, usize, usize, usize)> {
    (0..16).map(|k| (k >> 3 & 1, k >> 2 & 1, k >> 1 & 1, k & 1))
}

pub fn transfer_matrix(theta: f64, phi: f64, two_s: u32) -> Result<TransferMatrix> {
    let x = overlap_x(theta, two_s);
    let x2 = x * x;
    if x2 < 1e-12 {
        return Err(Error::Degenerate(format!(
            "θ = {theta}: subleading eigenvalue x² − 1 reaches modulus 1"
        )));
    }
    let _ = phi; // the transfer matrix does not depend on φ
    let mut t = Matrix4::<C64>::zeros();
    t[(0, 0)] = C64::new(x2, 0.0);
    t[(0, 3)] = C64::new(1.0 - x2, 0.0);
    t[(1, 0)] = C64::new(x, 0.0);
    t[(2, 0)] = C64::new(x, 0.0);
    t[(3, 0)] = ONE;
    let n = 2.0 - x2;
    Ok(TransferMatrix {
        t,
        x,
        eigenvalues: [1.0, x2 - 1.0, 0.0, 0.0],
        right: [
            Vector4::new(1.0, x, x, 1.0),
            Vector4::new(x2 - 1.0, x, x, 1.0),
            Vector4::new(0.0, 1.0, 0.0, 0.0),
            Vector4::new(0.0, 0.0, 1.0, 0.0),
        ],
        left: [
            Vector4::new(1.0, 0.0, 0.0, 1.0 - x2) / n,
            Vector4::new(-1.0, 0.0, 0.0, 1.0) / n,
            Vector4::new(0.0, 1.0, 0.0, -x),
            Vector4::new(0.0, 0.0, 1.0, -x),
        ],
    })
}

/// Quadrature measure weight μ(θ) = (α + β cos θ)/(2π) on [0, 2π]².
pub fn measure_density(theta: f64) -> f64 {
    let sq5 = 5f64.sqrt();
    let pi = std::f64::consts::PI;
    let alpha = (2.0 + sq5) / ((3.0 + sq5) * pi);
    let beta = 2.0 / ((3.0 + sq5) * pi);
    (alpha + beta * theta.cos()) / (2.0 * pi)
}

pub fn golden_ratio() -> f64 {
    0.5 * (1.0 + 5f64.sqrt())
}

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// 𝔸[(a,a′),(b,b′)] as 2×2 operators (rows n, cols n′): ∫∫ μ A[a][b] A[a′][b′]†; spin 1/2.
pub type OperatorBlocks = [[Matrix2<C64>; 4]; 4];

pub fn measure_quadrature(n_theta: usize, n_phi: usize) -> OperatorBlocks {
    let (xs, ws) = gauss_legendre(n_theta);
    let pi = std::f64::consts::PI;
    let mut out = [[Matrix2::<C64>::zeros(); 4]; 4];
    for (xg, wg) in xs.iter().zip(&ws) {
        let theta = pi * (xg + 1.0);
        let wt = pi * wg * measure_density(theta);
        for k in 0..n_phi {
            let phi = 2.0 * pi * k as f64 / n_phi as f64;
            let w = wt * 2.0 * pi / n_phi as f64;
            let v = coherent(theta, phi, 1);
            // kets of A[a][b] in the 2-level basis
            let ket = |a: usize, b: usize| -> [C64; 2] {
                match (a, b) {
                    (0, 0) => [v[0], ZERO],
                    (0, 1) => [ZERO, v[1]],
                    (1, 0) => [ONE, ZERO],
                    _ => [ZERO, ZERO],
                }
            };
            for (a, ap, b, bp) in itertools4() {
                let (u, r) = (ket(a, b), ket(ap, bp));
                let blk = &mut out[2 * a + ap][2 * b + bp];
                for n in 0..2 {
                    for np in 0..2 {
                        blk[(n, np)] += u[n] * r[np].conj() * w;
                    }
                }
            }
        }
    }
    out
}

/// The closed-form golden-ratio block matrix.
pub fn golden_blocks() -> OperatorBlocks {
    let g = golden_ratio();
    let p = Matrix2::new(ONE, ZERO, ZERO, ZERO);
    let q = Matrix2::new(ZERO, ZERO, ZERO, ONE);
    let mut out = [[Matrix2::<C64>::zeros(); 4]; 4];
    out[0][0] = p;
    out[0][3] = q / C64::new(g, 0.0);
    out[3][0] = p * C64::new(g, 0.0);
    out
}

pub fn blocks_deviation(a: &OperatorBlocks, b: &OperatorBlocks) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..4 {
        for j in 0..4 {
            worst = worst.max((a[i][j] - b[i][j]).iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
    }
    worst
}

/// max |⟨c|∫Πμ |ψ⟩⟨ψ| |c′⟩ − 𝒫_{cc′}| over the unconstrained 2^L space of a spin-1/2 ring.
pub fn identity_resolution_check(basis: &ConstrainedBasis) -> Result<f64> {
    identity_resolution_with(basis, 64, 64)
}

pub fn identity_resolution_with(basis: &ConstrainedBasis, n_theta: usize, n_phi: usize) -> Result<f64> {
    if basis.two_s() != 1 {
        return Err(Error::Unsupported("the measure is constructed for spin 1/2".into()));
    }
    let l = basis.sites();
    if l > 10 || basis.boundary() != Boundary::Periodic {
        return Err(Error::Unsupported("identity check needs a periodic ring with L <= 10".into()));
    }
    let blocks = measure_quadrature(n_theta, n_phi);
    // scalar 4×4 transfer for each (n, n′)
    let mut tr = [[Matrix4::<C64>::zeros(); 2]; 2];
    for (n, row) in tr.iter_mut().enumerate() {
        for (np, m) in row.iter_mut().enumerate() {
            for i in 0..4 {
                for j in 0..4 {
                    m[(i, j)] = blocks[i][j][(n, np)];
                }
            }
        }
    }
    let dim = 1usize << l;
    let mut worst = 0.0f64;
    for c in 0..dim {
        let lv: Vec<u8> = (0..l).map(|i| ((c >> (l - 1 - i)) & 1) as u8).collect();
        let ok = crate::basis::admissible(&lv, Boundary::Periodic);
        for cp in 0..dim {
            let m = (0..l).fold(Matrix4::<C64>::identity(), |acc, i| {
                acc * tr[(c >> (l - 1 - i)) & 1][(cp >> (l - 1 - i)) & 1]
            });
            let target = if c == cp && ok { 1.0 } else { 0.0 };
            worst = worst.max((m.trace() - target).norm());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::inner;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ring(l: usize, two_s: u32) -> ConstrainedBasis {
        ConstrainedBasis::new(l, two_s, Boundary::Periodic).unwrap()
    }

    #[test]
    fn coherent_is_normalized_rotation() {
        for two_s in 1..=4 {
            for &(t, p) in &[(0.3, 0.0), (2.1, 0.7), (-1.2, 3.0)] {
                let v = coherent(t, p, two_s);
                let n: f64 = v.iter().map(|a| a.norm_sqr()).sum();
                assert!((n - 1.0).abs() < 1e-14);
                assert!((v[0].re - overlap_x(t, two_s)).abs() < 1e-15);
                let h = 1e-6;
                let (a, b) = (coherent(t + h, p, two_s), coherent(t - h, p, two_s));
                for (k, d) in coherent_dtheta(t, p, two_s).iter().enumerate() {
                    assert!((d - (a[k] - b[k]) / (2.0 * h)).norm() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn gutzwiller_trivial_cases() {
        let b = ring(4, 1);
        let psi = gutzwiller_state(&b, &CoherentAngles { vartheta: vec![0.0; 4], varphi: vec![0.0; 4] }).unwrap();
        assert!((psi[0] - ONE).norm() < 1e-15);
        let mut t = vec![0.0; 4];
        t[0] = std::f64::consts::PI;
        let psi = gutzwiller_state(&b, &CoherentAngles { vartheta: t, varphi: vec![0.0; 4] }).unwrap();
        assert!((psi[b.rank(&[1, 0, 0, 0]).unwrap()].norm() - 1.0).abs() < 1e-15);
        let pi = std::f64::consts::PI;
        let odd = ring(5, 1);
        assert!(gutzwiller_state(&odd, &CoherentAngles { vartheta: vec![pi; 5], varphi: vec![0.0; 5] }).is_err());
    }

    #[test]
    fn gutzwiller_matches_projected_product() {
        // Dense oracle: full 2^L product state, zero every entry with an excited pair.
        let l = 8;
        let b = ring(l, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let vt: Vec<f64> = (0..l).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let vp: Vec<f64> = (0..l).map(|_| rng.gen_range(0.0..6.0)).collect();
        let mut full = vec![ONE; 1 << l];
        for (x, amp) in full.iter_mut().enumerate() {
            for i in 0..l {
                let n = (x >> (l - 1 - i)) & 1;
                *amp *= coherent(vt[i], vp[i], 1)[n];
            }
            let lv: Vec<u8> = (0..l).map(|i| ((x >> (l - 1 - i)) & 1) as u8).collect();
            if !crate::basis::admissible(&lv, Boundary::Periodic) {
                *amp = ZERO;
            }
        }
        let nf: f64 = full.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let psi = gutzwiller_state(&b, &CoherentAngles { vartheta: vt, varphi: vp }).unwrap();
        for (r, &w) in b.packed().iter().enumerate() {
            assert!((psi[r] - full[w as usize] / nf).norm() < 1e-12);
        }
    }

    #[test]
    fn mps_special_points() {
        let b = ring(6, 2);
        let zero = mps_dense(&b, &GaugeAngles::two_site(6, 0.0, 0.0, 0.0, 0.0)).unwrap();
        assert!((zero[0] - ONE).norm() < 1e-15);
        assert!((zero.iter().map(|a| a.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-15);
        let pi = std::f64::consts::PI;
        for two_s in 1..=4 {
            let b = ring(6, two_s);
            let z2 = mps_dense(&b, &GaugeAngles::two_site(6, pi, 0.0, 0.0, 0.0)).unwrap();
            let top = two_s as u8;
            let idx = b.rank(&[0, top, 0, top, 0, top]).unwrap();
            for (r, a) in z2.iter().enumerate() {
                if r == idx {
                    assert!((a.norm() - 1.0).abs() < 1e-12);
                } else {
                    assert!(a.norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn norm_identity_general_spin() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for two_s in 1..=3 {
            for l in [4usize, 5, 7] {
                let b = ring(l, two_s);
                for _ in 0..5 {
                    let g = GaugeAngles {
                        theta: (0..l).map(|_| rng.gen_range(-6.0..6.0)).collect(),
                        phi: (0..l).map(|_| rng.gen_range(-6.0..6.0)).collect(),
                    };
                    let n: f64 = mps_dense(&b, &g).unwrap().iter().map(|a| a.norm_sqr()).sum();
                    assert!((n - g.norm_formula(two_s)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn two_site_fraction_matches_iteration() {
        for &(f, fp) in &[(0.3, 2.0), (5.0, 0.01), (1.0, 1.0)] {
            let (g, gp) = two_site_fraction(f, fp);
            let (it, _) = continued_fraction(&[f, fp, f, fp]).unwrap();
            assert!((it[0] - g).abs() < 1e-12 && (it[1] - gp).abs() < 1e-12);
        }
        let (it, _) = continued_fraction(&[0.0; 5]).unwrap();
        assert!(it.iter().all(|&g| g == 1.0));
    }

    #[test]
    fn gauge_map_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = ring(8, 1);
        for _ in 0..20 {
            let ca = CoherentAngles {
                vartheta: (0..8).map(|_| rng.gen_range(-2.8..2.8)).collect(),
                varphi: (0..8).map(|_| rng.gen_range(0.0..6.3)).collect(),
            };
            let (g, map) = gauge_map(&ca).unwrap();
            for i in 0..8 {
                let res = map.g[i] - 1.0 - map.f[i] / map.g[(i + 1) % 8];
                assert!(res.abs() < 1e-12 && map.g[i] >= 1.0);
            }
            let gz = gutzwiller_state(&b, &ca).unwrap();
            let mut m = mps_dense(&b, &g).unwrap();
            normalize(&mut m).unwrap();
            assert!((inner(&gz, &m).norm() - 1.0).abs() < 1e-10);
        }
        let (g, _) = gauge_map(&CoherentAngles { vartheta: vec![0.0; 4], varphi: vec![0.0; 4] }).unwrap();
        assert!(g.theta.iter().chain(&g.phi).all(|&t| t == 0.0));
    }

    #[test]
    fn transfer_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for two_s in 1..=4 {
            for _ in 0..10 {
                let th: f64 = rng.gen_range(-3.0..3.0);
                let tm = transfer_matrix(th, rng.gen_range(0.0..6.0), two_s).unwrap();
                let phi = rng.gen_range(0.0..6.0);
                assert_eq!(tm.t, transfer_matrix(th, phi, two_s).unwrap().t);
                assert!((tm.t - transfer_from_tensor(th, phi, two_s)).norm() < 1e-15);
                let tr = tm.t.map(|z| z.re);
                assert!(tm.t.iter().all(|z| z.im == 0.0));
                for k in 0..4 {
                    assert!((tr * tm.right[k] - tm.right[k] * tm.eigenvalues[k]).norm() < 1e-14);
                    assert!((tr.transpose() * tm.left[k] - tm.left[k] * tm.eigenvalues[k]).norm() < 1e-14);
                    for j in 0..4 {
                        let want = if j == k { 1.0 } else { 0.0 };
                        assert!((tm.left[k].dot(&tm.right[j]) - want).abs() < 1e-12);
                    }
                }
                assert!(tm.eigenvalues[1].abs() < 1.0);
                // closed-form spectrum against an independent eigensolve
                let mut ev: Vec<f64> = tr.complex_eigenvalues().iter().map(|z| z.re).collect();
                let mut cf = tm.eigenvalues.to_vec();
                ev.sort_by(f64::total_cmp);
                cf.sort_by(f64::total_cmp);
                for (a, b) in ev.iter().zip(&cf) {
                    assert!((a - b).abs() < 1e-7);
                }
            }
        }
        let t0 = transfer_matrix(0.0, 0.0, 1).unwrap();
        assert_eq!(t0.eigenvalues, [1.0, 0.0, 0.0, 0.0]);
        let s = transfer_matrix(1.1, 0.0, 1).unwrap();
        assert!((s.eigenvalues[1] + (0.55f64).sin().powi(2)).abs() < 1e-15);
        assert!(transfer_matrix(std::f64::consts::PI, 0.0, 1).is_err());
    }

    #[test]
    fn two_site_leading_eigenvalues() {
        let (to, te) = (0.7, 2.2);
        for two_s in 1..=2 {
            let a = transfer_from_tensor(to, 0.0, two_s) * transfer_from_tensor(te, 0.0, two_s);
            let mut ev: Vec<f64> = a.map(|z| z.re).complex_eigenvalues().iter().map(|z| z.re).collect();
            ev.sort_by(|x, y| y.abs().total_cmp(&x.abs()));
            let (xo, xe) = (overlap_x(to, two_s), overlap_x(te, two_s));
            assert!((ev[0] - 1.0).abs() < 1e-12);
            assert!((ev[1] - (xo * xo - 1.0) * (xe * xe - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn gauss_legendre_exactness() {
        let (x, w) = gauss_legendre(10);
        let integ = |p: i32| x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum::<f64>();
        for p in 0..20 {
            let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
            assert!((integ(p) - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn golden_measure() {
        let q = measure_quadrature(64, 64);
        assert!(blocks_deviation(&q, &golden_blocks()) < 1e-10);
        assert!((q[3][0][(0, 0)].re - golden_ratio()).abs() < 1e-12);
        // total measure per site = 2πα
        let (x, w) = gauss_legendre(64);
        let pi = std::f64::consts::PI;
        let total: f64 = x.iter().zip(&w).map(|(x, w)| pi * w * measure_density(pi * (x + 1.0)) * 2.0 * pi).sum();
        assert!((total - golden_ratio()).abs() < 1e-12);
    }

    #[test]
    fn identity_resolution() {
        for l in [2usize, 4] {
            let dev = identity_resolution_check(&ring(l, 1)).unwrap();
            assert!(dev < 1e-8, "L={l}: {dev}");
        }
        let coarse = identity_resolution_with(&ring(4, 1), 2, 2).unwrap();
        let mid = identity_resolution_with(&ring(4, 1), 3, 4).unwrap();
        let fine = identity_resolution_with(&ring(4, 1), 64, 64).unwrap();
        assert!(coarse > mid && mid > fine, "{coarse} {mid} {fine}");
        assert!(identity_resolution_check(&ring(4, 2)).is_err());
    }
}
