//! Blockaded configuration spaces of spin-s rings and chains.
//!
//! A configuration is a string of levels n_i in 0..=2s. Two neighbouring sites
//! may not both be excited (n > 0). Configurations are packed base-(2s+1)
//! with site 0 as the most significant digit, so numeric order of the packed
//! words equals lexicographic order of the digit strings.

use std::collections::HashMap;

use serde::Serialize;

use crate::{Error, Result, C64};

/// Default refusal threshold on basis dimension.
pub const DEFAULT_DIM_CAP: usize = 50_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Open,
}

/// Sorted list of admissible configurations with rank/unrank.
#[derive(Clone, Debug)]
pub struct ConstrainedBasis {
    l: usize,
    two_s: u32,
    boundary: Boundary,
    configs: Vec<u64>,
    // pow[i] = d^(L-1-i), the place value of site i.
    pow: Vec<u64>,
}

/// Count admissible strings from the (2s+1)-state adjacency matrix:
/// trace(M^L) for rings, 1ᵀ M^(L-1) 1 for chains. Saturates instead of overflowing.
pub fn transfer_count(l: usize, two_s: u32, boundary: Boundary) -> u128 {
    let d = two_s as usize + 1;
    let m: Vec<Vec<u128>> =
        (0..d).map(|a| (0..d).map(|b| u128::from(a == 0 || b == 0)).collect()).collect();
    let mul = |x: &Vec<Vec<u128>>, y: &Vec<Vec<u128>>| -> Vec<Vec<u128>> {
        (0..d)
            .map(|a| {
                (0..d)
                    .map(|b| (0..d).fold(0u128, |acc, c| acc.saturating_add(x[a][c].saturating_mul(y[c][b]))))
                    .collect()
            })
            .collect()
    };
    let steps = match boundary {
        Boundary::Periodic => l,
        Boundary::Open => l.saturating_sub(1),
    };
    let mut p: Vec<Vec<u128>> = (0..d).map(|a| (0..d).map(|b| u128::from(a == b)).collect()).collect();
    for _ in 0..steps {
        p = mul(&p, &m);
    }
    match boundary {
        Boundary::Periodic => (0..d).fold(0u128, |acc, a| acc.saturating_add(p[a][a])),
        Boundary::Open => p.iter().flatten().fold(0u128, |acc, &v| acc.saturating_add(v)),
    }
}

impl ConstrainedBasis {
    pub fn new(l: usize, two_s: u32, boundary: Boundary) -> Result<Self> {
        Self::with_cap(l, two_s, boundary, DEFAULT_DIM_CAP)
    }

    pub fn with_cap(l: usize, two_s: u32, boundary: Boundary, cap: usize) -> Result<Self> {
        if l < 2 {
            return Err(Error::InvalidArgument(format!("L = {l} < 2")));
        }
        if two_s < 1 {
            return Err(Error::InvalidArgument("two_s must be >= 1".into()));
        }
        let d = two_s as u64 + 1;
        let bits = (l as f64) * (d as f64).log2();
        if bits >= 63.0 {
            return Err(Error::Capacity { what: "packed word bits", needed: bits.ceil() as u128, limit: 63 });
        }
        let expected = transfer_count(l, two_s, boundary);
        if expected > cap as u128 {
            return Err(Error::Capacity { what: "basis dimension", needed: expected, limit: cap as u128 });
        }
        let mut pow = vec![1u64; l];
        for i in (0..l.saturating_sub(1)).rev() {
            pow[i] = pow[i + 1] * d;
        }
        let mut configs = Vec::with_capacity(expected as usize);
        let mut digits = vec![0u8; l];
        enumerate(0, 0, &mut digits, two_s as u8, boundary, &pow, &mut configs);
        if configs.len() as u128 != expected {
            return Err(Error::InvalidArgument(format!(
                "enumeration produced {} configs, transfer count {}",
                configs.len(),
                expected
            )));
        }
        Ok(Self { l, two_s, boundary, configs, pow })
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }
    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }
    pub fn sites(&self) -> usize {
        self.l
    }
    pub fn two_s(&self) -> u32 {
        self.two_s
    }
    pub fn spin(&self) -> f64 {
        self.two_s as f64 / 2.0
    }
    pub fn boundary(&self) -> Boundary {
        self.boundary
    }
    pub fn levels(&self) -> u64 {
        self.two_s as u64 + 1
    }
    pub fn packed(&self) -> &[u64] {
        &self.configs
    }
    /// Packed word of the config at `idx`.
    pub fn word(&self, idx: usize) -> u64 {
        self.configs[idx]
    }
    /// Place value of site i.
    pub fn place(&self, site: usize) -> u64 {
        self.pow[site]
    }

    #[inline]
    pub fn digit(&self, word: u64, site: usize) -> u8 {
        ((word / self.pow[site]) % self.levels()) as u8
    }

    pub fn unpack(&self, word: u64) -> Vec<u8> {
        (0..self.l).map(|i| self.digit(word, i)).collect()
    }

    pub fn pack(&self, levels: &[u8]) -> Result<u64> {
        if levels.len() != self.l {
            return Err(Error::DimensionMismatch { expected: self.l, got: levels.len() });
        }
        let mut w = 0u64;
        for (i, &n) in levels.iter().enumerate() {
            if n as u32 > self.two_s {
                return Err(Error::InvalidArgument(format!("level {n} at site {i} exceeds 2s")));
            }
            w += n as u64 * self.pow[i];
        }
        Ok(w)
    }

    pub fn is_admissible(&self, levels: &[u8]) -> bool {
        admissible(levels, self.boundary)
    }

    pub fn rank_word(&self, word: u64) -> Option<usize> {
        self.configs.binary_search(&word).ok()
    }

    pub fn rank(&self, levels: &[u8]) -> Result<usize> {
        let w = self.pack(levels)?;
        self.rank_word(w).ok_or(Error::NotFound)
    }

    pub fn unrank(&self, idx: usize) -> Result<Vec<u8>> {
        self.configs
            .get(idx)
            .map(|&w| self.unpack(w))
            .ok_or(Error::InvalidArgument(format!("ordinal {idx} >= dimension {}", self.len())))
    }

    /// One-site translation: site i moves to site i+1 (mod L).
    #[inline]
    pub fn translate(&self, word: u64) -> u64 {
        let d = self.levels();
        word / d + (word % d) * self.pow[0]
    }

    /// Inversion i -> L-1-i.
    #[inline]
    pub fn invert(&self, word: u64) -> u64 {
        let d = self.levels();
        let mut w = word;
        let mut out = 0u64;
        for _ in 0..self.l {
            out = out * d + w % d;
            w /= d;
        }
        out
    }

    /// Digit string, one character per site.
    pub fn to_digit_string(&self, word: u64) -> String {
        self.unpack(word).iter().map(|&n| char::from_digit(n as u32, 10).unwrap_or('?')).collect()
    }
}

fn enumerate(
    site: usize,
    word: u64,
    digits: &mut [u8],
    max: u8,
    boundary: Boundary,
    pow: &[u64],
    out: &mut Vec<u64>,
) {
    let l = digits.len();
    if site == l {
        out.push(word);
        return;
    }
    let left_excited = site > 0 && digits[site - 1] > 0;
    let wraps = boundary == Boundary::Periodic && site == l - 1 && l > 1;
    let first_excited = wraps && digits[0] > 0;
    for n in 0..=max {
        if n > 0 && (left_excited || first_excited) {
            break;
        }
        digits[site] = n;
        enumerate(site + 1, word + n as u64 * pow[site], digits, max, boundary, pow, out);
    }
    digits[site] = 0;
}

pub fn admissible(levels: &[u8], boundary: Boundary) -> bool {
    let l = levels.len();
    let bonds = match boundary {
        Boundary::Periodic if l > 1 => l,
        _ => l.saturating_sub(1),
    };
    (0..bonds).all(|i| levels[i] == 0 || levels[(i + 1) % l] == 0)
}

/// Momentum / inversion block of a periodic basis.
///
/// Inversion is only a good quantum number alongside momentum for k = 0 and
/// k = L/2. For other k the parity label is not used: parity +1 selects the
/// plain momentum-k block and parity -1 is empty, so that the union over all
/// (k, parity) still partitions the space exactly once.
#[derive(Clone, Debug)]
pub struct SymmetrySector {
    pub k: usize,
    pub parity: i8,
    pub uses_inversion: bool,
    /// Packed representative of each sector basis vector.
    pub representatives: Vec<u64>,
    /// Normalized sector basis vectors as (full-basis index, amplitude).
    pub vectors: Vec<Vec<(usize, C64)>>,
    owner: Vec<u32>,
    coef: Vec<C64>,
}

const NO_OWNER: u32 = u32::MAX;

impl SymmetrySector {
    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    /// Sector index and amplitude ⟨v_a|c⟩* for full-basis index c, if c lies in a kept orbit.
    #[inline]
    pub fn locate(&self, idx: usize) -> Option<(usize, C64)> {
        let o = self.owner[idx];
        (o != NO_OWNER).then(|| (o as usize, self.coef[idx]))
    }

    /// Embed a sector vector into the full basis.
    pub fn lift(&self, coeffs: &[C64], full_dim: usize) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); full_dim];
        for (a, v) in self.vectors.iter().enumerate() {
            for &(i, amp) in v {
                out[i] += coeffs[a] * amp;
            }
        }
        out
    }
}

pub fn build_sector(basis: &ConstrainedBasis, k: usize, parity: i8) -> Result<SymmetrySector> {
    if basis.boundary() != Boundary::Periodic {
        return Err(Error::Unsupported("symmetry sectors need a periodic ring".into()));
    }
    if parity != 1 && parity != -1 {
        return Err(Error::InvalidArgument(format!("parity {parity} not in {{+1, -1}}")));
    }
    let l = basis.sites();
    let k = k % l;
    let uses_inversion = k == 0 || 2 * k == l;
    let dim = basis.len();
    let mut sector = SymmetrySector {
        k,
        parity,
        uses_inversion,
        representatives: Vec::new(),
        vectors: Vec::new(),
        owner: vec![NO_OWNER; dim],
        coef: vec![C64::new(0.0, 0.0); dim],
    };
    if !uses_inversion && parity == -1 {
        return Ok(sector);
    }
    let phase = |j: usize| C64::from_polar(1.0, -2.0 * std::f64::consts::PI * (k * j % l) as f64 / l as f64);
    for &w in basis.packed() {
        // representative = smallest word in the orbit
        let mut t = w;
        let mut is_rep = true;
        for _ in 1..l {
            t = basis.translate(t);
            if t < w {
                is_rep = false;
                break;
            }
        }
        if is_rep && uses_inversion {
            let mut t = basis.invert(w);
            for _ in 0..l {
                if t < w {
                    is_rep = false;
                    break;
                }
                t = basis.translate(t);
            }
        }
        if !is_rep {
            continue;
        }
        let mut acc: HashMap<u64, C64> = HashMap::new();
        let mut t = w;
        for j in 0..l {
            *acc.entry(t).or_default() += phase(j);
            t = basis.translate(t);
        }
        if uses_inversion {
            let mut t = basis.invert(w);
            for j in 0..l {
                *acc.entry(t).or_default() += phase(j) * parity as f64;
                t = basis.translate(t);
            }
        }
        let norm2: f64 = acc.values().map(|a| a.norm_sqr()).sum();
        if norm2 < 1e-12 {
            continue;
        }
        let inv = 1.0 / norm2.sqrt();
        let mut v: Vec<(usize, C64)> = acc
            .into_iter()
            .filter(|(_, a)| a.norm_sqr() > 1e-28)
            .map(|(c, a)| (basis.rank_word(c).expect("orbit stays admissible"), a * inv))
            .collect();
        v.sort_by_key(|e| e.0);
        let a = sector.vectors.len() as u32;
        for &(i, amp) in &v {
            sector.owner[i] = a;
            sector.coef[i] = amp;
        }
        sector.representatives.push(w);
        sector.vectors.push(v);
    }
    Ok(sector)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(l: usize, two_s: u32, b: Boundary) -> usize {
        let d = two_s as usize + 1;
        (0..d.pow(l as u32))
            .filter(|&x| {
                let lv: Vec<u8> = (0..l).map(|i| ((x / d.pow((l - 1 - i) as u32)) % d) as u8).collect();
                admissible(&lv, b)
            })
            .count()
    }

    #[test]
    fn small_dimensions() {
        assert_eq!(ConstrainedBasis::new(2, 1, Boundary::Periodic).unwrap().len(), 3);
        assert_eq!(ConstrainedBasis::new(4, 1, Boundary::Periodic).unwrap().len(), 7);
        assert_eq!(ConstrainedBasis::new(2, 2, Boundary::Periodic).unwrap().len(), 5);
        assert_eq!(ConstrainedBasis::new(3, 1, Boundary::Open).unwrap().len(), 5);
    }

    #[test]
    fn matches_brute_force() {
        for two_s in 1..=4 {
            for l in 2..=8 {
                for b in [Boundary::Periodic, Boundary::Open] {
                    let basis = ConstrainedBasis::new(l, two_s, b).unwrap();
                    assert_eq!(basis.len(), brute(l, two_s, b), "L={l} 2s={two_s} {b:?}");
                }
            }
        }
    }

    #[test]
    fn lucas_recursion() {
        let d: Vec<usize> =
            (2..=20).map(|l| ConstrainedBasis::new(l, 1, Boundary::Periodic).unwrap().len()).collect();
        assert_eq!((d[0], d[1]), (3, 4));
        for i in 2..d.len() {
            assert_eq!(d[i], d[i - 1] + d[i - 2]);
        }
    }

    #[test]
    fn rejects_short_and_oversized() {
        assert!(matches!(ConstrainedBasis::new(1, 1, Boundary::Periodic), Err(Error::InvalidArgument(_))));
        assert!(matches!(
            ConstrainedBasis::with_cap(30, 1, Boundary::Periodic, 1000),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn rank_conventions() {
        let b = ConstrainedBasis::new(2, 1, Boundary::Periodic).unwrap();
        assert_eq!(b.rank(&[0, 0]).unwrap(), 0);
        assert!(matches!(b.rank(&[1, 1]), Err(Error::NotFound)));
        let strings: Vec<String> = b.packed().iter().map(|&w| b.to_digit_string(w)).collect();
        assert_eq!(strings, ["00", "01", "10"]);
    }

    #[test]
    fn translation_and_inversion_words() {
        let b = ConstrainedBasis::new(5, 2, Boundary::Periodic).unwrap();
        for &w in b.packed() {
            let lv = b.unpack(w);
            let t = b.unpack(b.translate(w));
            let r = b.unpack(b.invert(w));
            for i in 0..5 {
                assert_eq!(t[(i + 1) % 5], lv[i]);
                assert_eq!(r[4 - i], lv[i]);
            }
            assert!(b.rank_word(b.translate(w)).is_some());
            assert!(b.rank_word(b.invert(w)).is_some());
        }
    }

    fn total_sector_dim(l: usize, two_s: u32) -> usize {
        let b = ConstrainedBasis::new(l, two_s, Boundary::Periodic).unwrap();
        (0..l)
            .flat_map(|k| [1i8, -1].map(|p| build_sector(&b, k, p).unwrap().dim()))
            .sum()
    }

    #[test]
    fn sectors_partition_the_space() {
        assert_eq!(total_sector_dim(4, 1), 7);
        for (l, two_s) in [(6, 1), (7, 1), (8, 1), (9, 1), (10, 1), (6, 2), (5, 4)] {
            let b = ConstrainedBasis::new(l, two_s, Boundary::Periodic).unwrap();
            assert_eq!(total_sector_dim(l, two_s), b.len(), "L={l} 2s={two_s}");
        }
    }

    #[test]
    fn all_zero_only_in_fully_symmetric_sector() {
        let b = ConstrainedBasis::new(6, 1, Boundary::Periodic).unwrap();
        for k in 0..6 {
            for p in [1i8, -1] {
                let s = build_sector(&b, k, p).unwrap();
                let has = s.locate(0).is_some();
                assert_eq!(has, k == 0 && p == 1, "k={k} p={p}");
            }
        }
    }

    /// Projector oracle: dimension of the (k=0, P=+1) subspace is the trace of
    /// the group-averaged projector built from explicit permutation matrices.
    #[test]
    fn k0_even_sector_matches_projector_trace() {
        for l in [4usize, 6, 8] {
            let b = ConstrainedBasis::new(l, 1, Boundary::Periodic).unwrap();
            let n = b.len();
            let mut trace = 0.0;
            for i in 0..n {
                let mut w = b.word(i);
                let mut wi = b.invert(w);
                for _ in 0..l {
                    if w == b.word(i) {
                        trace += 1.0;
                    }
                    if wi == b.word(i) {
                        trace += 1.0;
                    }
                    w = b.translate(w);
                    wi = b.translate(wi);
                }
            }
            trace /= 2.0 * l as f64;
            let s = build_sector(&b, 0, 1).unwrap();
            assert_eq!(s.dim() as f64, trace.round(), "L={l}");
        }
    }

    #[test]
    fn open_boundary_sectors_unsupported() {
        let b = ConstrainedBasis::new(4, 1, Boundary::Open).unwrap();
        assert!(matches!(build_sector(&b, 0, 1), Err(Error::Unsupported(_))));
    }
}
