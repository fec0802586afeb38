//! Infinite-temperature references in the constrained space.
//!
//! Every value comes from counting admissible configurations with the
//! one-site transfer matrix T (T[a][b] = 0 iff a and b are both excited).
//! Its Perron vector is v = (λ, 1, …, 1) with λ² = λ + 2s, so a window's
//! weight is v_first · v_last in the thermodynamic limit.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::dynamics::entropy_bits;
use crate::{Error, Result};

/// Golden ratio, the s = 1/2 occupation ratio.
pub const PHI_G: f64 = 1.618_033_988_749_894_8;

/// Perron eigenvalue (1 + √(1+8s))/2 of the one-site transfer matrix.
pub fn perron(two_s: u32) -> f64 {
    0.5 * (1.0 + (1.0 + 4.0 * two_s as f64).sqrt())
}

/// r = (1 + √(1+8s))/(4s).
pub fn occupation_ratio(two_s: u32) -> f64 {
    perron(two_s) / two_s as f64
}

fn check(two_s: u32) -> Result<()> {
    if two_s == 0 || two_s > 62 {
        return Err(Error::InvalidArgument(format!("2s = {two_s} outside 1..=62")));
    }
    Ok(())
}

/// −s(−1 + 4s + √(1+8s))/(1 + 8s + √(1+8s)).
pub fn thermal_sz(two_s: u32) -> f64 {
    let s = two_s as f64 / 2.0;
    let q = (1.0 + 8.0 * s).sqrt();
    -s * (-1.0 + 4.0 * s + q) / (1.0 + 8.0 * s + q)
}

/// Diagonal of ρ₁ in the level basis |0⟩ … |2s⟩.
///
/// Each excited level carries weight 1/(2s(1+r)) relative to |0⟩, i.e. 1/λ².
pub fn rho_one_diag(two_s: u32) -> Vec<f64> {
    let r = occupation_ratio(two_s);
    let w = 1.0 / (two_s as f64 * (1.0 + r));
    let z = (2.0 + r) / (1.0 + r);
    std::iter::once(1.0 / z).chain(std::iter::repeat(w / z).take(two_s as usize)).collect()
}

pub fn rho_one(two_s: u32) -> DMatrix<f64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_vec(rho_one_diag(two_s)))
}

/// −Tr ρ₁ log₂ ρ₁.
pub fn entropy_one(two_s: u32) -> f64 {
    entropy_bits(&rho_one_diag(two_s))
}

/// Diagonal weights of the three-site reduced density matrix, keyed by (a, b, c).
///
/// Zero-weight patterns (adjacent excitations) are omitted.
pub fn rho_three(two_s: u32) -> Vec<([u8; 3], f64)> {
    let lam = perron(two_s);
    let v = |a: u8| if a == 0 { lam } else { 1.0 };
    let d = two_s as u8;
    let mut out = Vec::new();
    for a in 0..=d {
        for b in 0..=d {
            for c in 0..=d {
                if (a > 0 && b > 0) || (b > 0 && c > 0) {
                    continue;
                }
                out.push(([a, b, c], v(a) * v(c)));
            }
        }
    }
    let z: f64 = out.iter().map(|(_, w)| w).sum();
    out.iter_mut().for_each(|(_, w)| *w /= z);
    out
}

/// Same, as a dense (2s+1)³ matrix in the lexicographic product basis.
pub fn rho_three_matrix(two_s: u32) -> DMatrix<f64> {
    let d = two_s as usize + 1;
    let mut m = DMatrix::zeros(d * d * d, d * d * d);
    for ([a, b, c], w) in rho_three(two_s) {
        let i = (a as usize * d + b as usize) * d + c as usize;
        m[(i, i)] = w;
    }
    m
}

/// Exact number of ring configurations of length `l` that show `pattern` on
/// sites 0..pattern.len(); counted with transfer-matrix powers.
pub fn ring_pattern_count(l: usize, two_s: u32, pattern: &[u8]) -> Result<u128> {
    check(two_s)?;
    let k = pattern.len();
    if k == 0 || l < k + 1 {
        return Err(Error::InvalidArgument(format!("need a ring longer than the pattern ({l} ≤ {k})")));
    }
    if pattern.iter().any(|&a| a as u32 > two_s) {
        return Err(Error::InvalidArgument("pattern level exceeds 2s".into()));
    }
    if pattern.windows(2).any(|w| w[0] > 0 && w[1] > 0) {
        return Ok(0);
    }
    // paths of l − k + 1 steps from the last pattern site round to the first
    let d = two_s as usize + 1;
    let mut row = vec![0u128; d];
    row[pattern[k - 1] as usize] = 1;
    for _ in 0..(l - k + 1) {
        let total: u128 = row.iter().sum();
        let zero = row[0];
        let next: Vec<u128> = (0..d).map(|b| if b == 0 { total } else { zero }).collect();
        if next.iter().any(|&x| x > u128::MAX / (2 * d as u128)) {
            return Err(Error::Capacity { what: "ring pattern count", needed: u128::MAX, limit: u128::MAX });
        }
        row = next;
    }
    Ok(row[pattern[0] as usize])
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThermalReference {
    pub two_s: u32,
    pub r: f64,
    pub sz_inf: f64,
    /// Diagonal of ρ₁.
    pub rho1: Vec<f64>,
    /// Bits.
    pub s1: f64,
}

impl ThermalReference {
    pub fn new(two_s: u32) -> Result<Self> {
        check(two_s)?;
        Ok(Self {
            two_s,
            r: occupation_ratio(two_s),
            sz_inf: thermal_sz(two_s),
            rho1: rho_one_diag(two_s),
            s1: entropy_one(two_s),
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Out {
            s: f64,
            r: f64,
            sz_inf: f64,
            #[serde(rename = "S1")]
            s1: f64,
        }
        serde_json::to_value(Out { s: self.two_s as f64 / 2.0, r: self.r, sz_inf: self.sz_inf, s1: self.s1 })
            .expect("plain struct serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute-force tally over every spin-1/2 ring word: (configs with site 0 down, with site 0 up).
    fn brute_ring(l: usize, pattern: &[u8]) -> u64 {
        let mask = (1u64 << l) - 1;
        (0..1u64 << l)
            .filter(|&w| w & (((w << 1) | (w >> (l - 1))) & mask) == 0)
            .filter(|&w| pattern.iter().enumerate().all(|(i, &a)| (w >> i) & 1 == a as u64))
            .count() as u64
    }

    #[test]
    fn paper_values() {
        assert!((thermal_sz(1) + 0.223607).abs() < 1e-6);
        assert!((thermal_sz(1) + 0.5 * PHI_G / (2.0 + PHI_G)).abs() < 1e-15);
        assert!((thermal_sz(2) + 0.5).abs() < 1e-15);
        assert!((thermal_sz(4) + 1.053).abs() < 5e-4);
        assert!((entropy_one(1) - 0.8505).abs() < 5e-4);
        assert!((occupation_ratio(1) - PHI_G).abs() < 1e-15);
    }

    #[test]
    fn spin_half_rho_one_closed_form() {
        let z = (2.0 + PHI_G) / (1.0 + PHI_G);
        let d = rho_one_diag(1);
        assert!((d[0] - 1.0 / z).abs() < 1e-15);
        assert!((d[1] - 1.0 / ((1.0 + PHI_G) * z)).abs() < 1e-15);
    }

    #[test]
    fn rho_one_reproduces_sz() {
        for two_s in 1..=8 {
            let d = rho_one_diag(two_s);
            let sz: f64 = d.iter().enumerate().map(|(n, p)| p * (n as f64 - two_s as f64 / 2.0)).sum();
            assert!((sz - thermal_sz(two_s)).abs() < 1e-13, "{two_s}");
        }
    }

    #[test]
    fn spin_one_entropy() {
        // ρ₁ = diag(2/3, 1/6, 1/6)
        let want = -(2.0 / 3.0) * (2.0f64 / 3.0).log2() - 2.0 * (1.0 / 6.0) * (1.0f64 / 6.0).log2();
        assert!((entropy_one(2) - want).abs() < 1e-14);
        assert!((entropy_one(2) - 1.2516291673878228).abs() < 1e-13);
    }

    #[test]
    fn frequency_ratio_at_l24() {
        let zero = brute_ring(24, &[0]) as f64;
        let one = brute_ring(24, &[1]) as f64;
        assert!(((zero / one) / (1.0 + PHI_G) - 1.0).abs() < 5e-3);
    }

    #[test]
    fn transfer_counts_match_enumeration() {
        for l in [8, 13, 20] {
            for pat in [&[0u8][..], &[1], &[0, 0, 0], &[1, 0, 1], &[0, 1, 0], &[1, 1]] {
                assert_eq!(ring_pattern_count(l, 1, pat).unwrap(), brute_ring(l, pat) as u128, "{l} {pat:?}");
            }
        }
    }

    #[test]
    fn three_site_weights_from_ring_counts() {
        // w(000)/w(101) on rings L = 20…30 converges to λ² = 1 + φ_g
        let ratio = |l| ring_pattern_count(l, 1, &[0, 0, 0]).unwrap() as f64 / ring_pattern_count(l, 1, &[1, 0, 1]).unwrap() as f64;
        let rs: Vec<f64> = (20..=30).map(ratio).collect();
        let last = rs[rs.len() - 1];
        assert!((rs[rs.len() - 2] - last).abs() < 1e-8);
        let w = rho_three(1);
        let get = |p: [u8; 3]| w.iter().find(|(q, _)| *q == p).unwrap().1;
        assert!((get([0, 0, 0]) / get([1, 0, 1]) - last).abs() < 1e-8);
        // and against the L = 24 brute force
        let brute = brute_ring(24, &[0, 0, 0]) as f64 / brute_ring(24, &[1, 0, 1]) as f64;
        assert!((brute / last - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rho_three_marginal_is_rho_one() {
        for two_s in [1, 2, 4] {
            let d = two_s as usize + 1;
            let mut marg = vec![0.0; d];
            for ([a, _, _], w) in rho_three(two_s) {
                marg[a as usize] += w;
            }
            for (m, r) in marg.iter().zip(rho_one_diag(two_s)) {
                assert!((m - r).abs() < 1e-12);
            }
            // the middle site too
            let mut mid = vec![0.0; d];
            for ([_, b, _], w) in rho_three(two_s) {
                mid[b as usize] += w;
            }
            for (m, r) in mid.iter().zip(rho_one_diag(two_s)) {
                assert!((m - r).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rho_three_support_and_trace() {
        let m = rho_three_matrix(1);
        assert!((m.trace() - 1.0).abs() < 1e-14);
        // |110⟩ and |011⟩ and |111⟩ carry nothing
        for i in [0b110, 0b011, 0b111] {
            assert_eq!(m[(i, i)], 0.0);
        }
        assert!(m.symmetric_eigenvalues().iter().all(|&e| e >= 0.0));
    }

    #[test]
    fn json_shape() {
        let j = ThermalReference::new(1).unwrap().to_json();
        assert_eq!(j["s"], 0.5);
        assert!(j.get("S1").is_some() && j.get("sz_inf").is_some() && j.get("r").is_some());
        assert!(ThermalReference::new(0).is_err());
    }

    proptest! {
        #[test]
        fn reference_invariants(two_s in 1u32..=40) {
            let t = ThermalReference::new(two_s).unwrap();
            let tr: f64 = t.rho1.iter().sum();
            prop_assert!((tr - 1.0).abs() < 1e-13);
            prop_assert!(t.rho1.iter().all(|&p| p >= 0.0));
            prop_assert!(t.sz_inf < 0.0 && t.sz_inf > -(two_s as f64) / 2.0);
            prop_assert!(t.s1 < ((two_s + 1) as f64).log2());
        }
    }
}
