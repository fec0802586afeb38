//! Numeric thermodynamic-limit densities of the two-site uniform MPS.
//!
//! Sites alternate o (even) and e (odd); cell c holds sites 2c and 2c+1.
//! Every density is a sum of transfer-matrix channels. Far-separated pairs
//! are summed exactly with the reduced resolvent Σₖ Eᵏ(1 − |r)(l|), which
//! exists because the cell transfer matrix has spectrum
//! {1, (x_o²−1)(x_e²−1), 0, 0}.

use nalgebra::{DMatrix, Matrix4, Vector4};

use crate::ops::sx_ladder;
use crate::varmps::{coherent, coherent_dtheta};
use crate::{Error, Result, C64};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Hamiltonian whose densities are evaluated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Model {
    /// Ω Σ P Sˣ P.
    Pxp { omega: f64 },
    /// Ω Σ P Sˣ P + h Σ P Sˣ P (Sᶻᵢ₊₂ + Sᶻᵢ₋₂).
    Deformed { omega: f64, h: f64 },
}

/// One-site operators that terms are built from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum SiteOp {
    Id = 0,
    /// |0⟩⟨0|.
    P0 = 1,
    Sx = 2,
    Sz = 3,
}

const N_OPS: usize = 4;

/// A product of one-site operators, sorted by site offset.
#[derive(Clone, Debug)]
pub struct Term {
    pub coef: f64,
    pub ops: Vec<(isize, SiteOp)>,
}

pub fn spin_x(two_s: u32) -> DMatrix<C64> {
    let d = two_s as usize + 1;
    let mut m = DMatrix::zeros(d, d);
    for n in 0..two_s as usize {
        let v = C64::from(sx_ladder(two_s, n as u8));
        m[(n + 1, n)] = v;
        m[(n, n + 1)] = v;
    }
    m
}

pub fn spin_z(two_s: u32) -> DMatrix<C64> {
    let d = two_s as usize + 1;
    DMatrix::from_fn(d, d, |a, b| if a == b { C64::from(a as f64 - two_s as f64 / 2.0) } else { ZERO })
}

fn site_op(op: SiteOp, two_s: u32) -> DMatrix<C64> {
    let d = two_s as usize + 1;
    match op {
        SiteOp::Id => DMatrix::identity(d, d),
        SiteOp::P0 => DMatrix::from_fn(d, d, |a, b| if a == 0 && b == 0 { ONE } else { ZERO }),
        SiteOp::Sx => spin_x(two_s),
        SiteOp::Sz => spin_z(two_s),
    }
}

/// Hamiltonian terms centred on site 0.
pub fn model_terms(model: Model, two_s: u32) -> Result<Vec<Term>> {
    use SiteOp::*;
    let pxp = |coef: f64| Term { coef, ops: vec![(-1, P0), (0, Sx), (1, P0)] };
    match model {
        Model::Pxp { omega } => Ok(vec![pxp(omega)]),
        Model::Deformed { omega, h } => {
            if two_s != 1 {
                return Err(Error::Unsupported("deformation is defined for spin 1/2 only".into()));
            }
            let mut right = pxp(h);
            right.ops.push((2, Sz));
            let mut left = pxp(h);
            left.ops.insert(0, (-2, Sz));
            Ok(vec![pxp(omega), right, left])
        }
    }
}

/// One site's contribution to a channel: the operator is bra_op · ket_op,
/// and either tensor may be replaced by its θ-derivative.
#[derive(Clone, Copy, Debug)]
struct Slot {
    bra_op: SiteOp,
    ket_op: SiteOp,
    bra_d: bool,
    ket_d: bool,
}

impl Slot {
    fn key(&self, parity: usize) -> usize {
        let k = (parity * N_OPS + self.bra_op as usize) * N_OPS + self.ket_op as usize;
        (k * 2 + self.bra_d as usize) * 2 + self.ket_d as usize
    }
}

const N_KEYS: usize = 2 * N_OPS * N_OPS * 4;

/// Sorted by site.
type Insertion = Vec<(isize, Slot)>;

fn plain(t: &Term, k: isize) -> Insertion {
    t.ops
        .iter()
        .map(|&(s, o)| (s + k, Slot { bra_op: SiteOp::Id, ket_op: o, bra_d: false, ket_d: false }))
        .collect()
}

/// `a` acts towards the bra, `b` towards the ket. Each side holds at most
/// one non-identity operator per site.
fn merge(a: &Insertion, b: &Insertion) -> Insertion {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some(&(sa, x)), Some(&(sb, y))) if sa == sb => {
                debug_assert!(x.bra_op == SiteOp::Id && y.bra_op == SiteOp::Id && !x.ket_d && !y.bra_d);
                out.push((sa, Slot { bra_op: x.ket_op, ket_op: y.ket_op, bra_d: x.bra_d, ket_d: y.ket_d }));
                i += 1;
                j += 1;
            }
            (Some(&(sa, x)), Some(&(sb, _))) if sa < sb => {
                out.push((sa, x));
                i += 1;
            }
            (Some(&(sa, x)), None) => {
                out.push((sa, x));
                i += 1;
            }
            (_, Some(&(sb, y))) => {
                out.push((sb, y));
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    out
}

fn shift(ins: &Insertion, k: isize) -> Insertion {
    ins.iter().map(|&(s, v)| (s + k, v)).collect()
}

fn cell_of(site: isize) -> isize {
    site.div_euclid(2)
}

fn site_span(ins: &Insertion) -> (isize, isize) {
    (ins.first().expect("non-empty insertion").0, ins.last().expect("non-empty insertion").0)
}

/// The two-site uniform MPS at (θ_o, θ_e, φ_o, φ_e) with its dominant transfer eigenvectors.
#[derive(Clone, Debug)]
pub struct UniformMps {
    two_s: u32,
    /// Level amplitudes and θ-derivatives, index 0 = o, 1 = e.
    v: [Vec<C64>; 2],
    dv: [Vec<C64>; 2],
    ops: [DMatrix<C64>; N_OPS],
    /// Every slot channel, indexed by `Slot::key`.
    channels: Vec<Matrix4<C64>>,
    e: Matrix4<C64>,
    l: Vector4<C64>,
    r: Vector4<C64>,
    resolvent: Matrix4<C64>,
}

impl UniformMps {
    pub fn new(theta_e: f64, theta_o: f64, phi_e: f64, phi_o: f64, two_s: u32) -> Result<Self> {
        let v = [coherent(theta_o, phi_o, two_s), coherent(theta_e, phi_e, two_s)];
        let dv = [coherent_dtheta(theta_o, phi_o, two_s), coherent_dtheta(theta_e, phi_e, two_s)];
        let ops = [SiteOp::Id, SiteOp::P0, SiteOp::Sx, SiteOp::Sz].map(|o| site_op(o, two_s));
        let mut u = Self {
            two_s,
            v,
            dv,
            ops,
            channels: Vec::new(),
            e: Matrix4::identity(),
            l: Vector4::zeros(),
            r: Vector4::zeros(),
            resolvent: Matrix4::zeros(),
        };
        u.channels = (0..N_KEYS).map(|key| u.build_channel(key)).collect();
        u.e = u.site(0) * u.site(1);
        let x2 = |t: f64| (t / 2.0).cos().powi(2 * two_s as i32);
        let lam2 = (x2(theta_o) - 1.0) * (x2(theta_e) - 1.0);
        if lam2.abs() > 1.0 - 1e-9 {
            return Err(Error::Degenerate("dominant transfer eigenvalue is not separated".into()));
        }
        let a = u.e - Matrix4::identity();
        u.r = null_vector(&a);
        u.l = null_vector(&a.transpose());
        let n = (u.l.transpose() * u.r)[(0, 0)];
        if n.norm() < 1e-14 {
            return Err(Error::Degenerate("dominant transfer eigenvectors are orthogonal".into()));
        }
        u.l /= n;
        let rl = u.r * u.l.transpose();
        let q = Matrix4::identity() - rl;
        // Σₖ Eᵏ Q = (1 − EQ + |r)(l|)⁻¹ Q
        let inv = (Matrix4::identity() - u.e * q + rl)
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("resolvent is singular".into()))?;
        u.resolvent = inv * q;
        Ok(u)
    }

    pub fn two_s(&self) -> u32 {
        self.two_s
    }

    /// Cell transfer matrix; its dominant eigenvalue is exactly 1.
    pub fn transfer(&self) -> &Matrix4<C64> {
        &self.e
    }

    fn site(&self, parity: usize) -> Matrix4<C64> {
        let id = Slot { bra_op: SiteOp::Id, ket_op: SiteOp::Id, bra_d: false, ket_d: false };
        self.channels[id.key(parity)]
    }

    fn bond(&self, parity: usize, deriv: bool, n: usize) -> [[C64; 2]; 2] {
        let amp = if deriv { self.dv[parity][n] } else { self.v[parity][n] };
        if n == 0 {
            [[amp, ZERO], [if deriv { ZERO } else { ONE }, ZERO]]
        } else {
            [[ZERO, amp], [ZERO, ZERO]]
        }
    }

    /// E[(a,a'),(b,b')] = Σ_{m,n} conj(X^m[a',b']) O[m,n] Y^n[a,b].
    fn build_channel(&self, key: usize) -> Matrix4<C64> {
        let ket_d = key % 2 == 1;
        let bra_d = (key / 2) % 2 == 1;
        let ket_op = (key / 4) % N_OPS;
        let bra_op = (key / (4 * N_OPS)) % N_OPS;
        let parity = key / (4 * N_OPS * N_OPS);
        let op = &self.ops[bra_op] * &self.ops[ket_op];
        let d = self.two_s as usize + 1;
        let mut out = Matrix4::zeros();
        for m in 0..d {
            let x = self.bond(parity, bra_d, m);
            for n in 0..d {
                let o = op[(m, n)];
                if o == ZERO {
                    continue;
                }
                let y = self.bond(parity, ket_d, n);
                for a in 0..2 {
                    for ap in 0..2 {
                        for b in 0..2 {
                            for bp in 0..2 {
                                out[(2 * a + ap, 2 * b + bp)] += x[ap][bp].conj() * o * y[a][b];
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Product of channels over cells c0..=c1; `ins` must be sorted.
    fn window(&self, ins: &Insertion, c0: isize, c1: isize) -> Matrix4<C64> {
        let mut m = Matrix4::identity();
        let mut it = ins.iter().peekable();
        for c in c0..=c1 {
            for p in 0..2 {
                let site = 2 * c + p as isize;
                while it.peek().is_some_and(|(s, _)| *s < site) {
                    it.next();
                }
                m *= match it.peek() {
                    Some((s, slot)) if *s == site => self.channels[slot.key(p)],
                    _ => self.site(p),
                };
            }
        }
        m
    }

    fn span(ins: &Insertion) -> (isize, isize) {
        let (lo, hi) = site_span(ins);
        (cell_of(lo), cell_of(hi))
    }

    fn expect(&self, ins: &Insertion) -> C64 {
        let (c0, c1) = Self::span(ins);
        (self.l.transpose() * self.window(ins, c0, c1) * self.r)[(0, 0)]
    }

    /// Σ_j [⟨X Y_j⟩ − ⟨X⟩⟨Y_j⟩] over all translates Y_j = shift(Y, 2c + p), every cell c and both parities p ∈ `parities`.
    ///
    /// Shifts whose cells overlap or touch X are contracted directly; the
    /// rest are summed in closed form with the resolvent.
    fn correlation_sum(&self, x: &Insertion, y: &Insertion, parities: &[isize]) -> C64 {
        let ex = self.expect(x);
        let (xa, xb) = Self::span(x);
        let (ylo, yhi) = site_span(y);
        let mx = self.window(x, xa, xb);
        let mut tot = ZERO;
        for &p in parities {
            // translation by one cell leaves ⟨Y⟩ unchanged
            let ey = self.expect(&shift(y, p));
            // right tail starts at the first k ≡ p with Y's cells beyond X's, past a free cell
            let mut kr = p;
            while cell_of(ylo + kr) <= xb + 1 {
                kr += 2;
            }
            while cell_of(ylo + kr - 2) > xb + 1 {
                kr -= 2;
            }
            let mut kl = p;
            while cell_of(yhi + kl) >= xa - 1 {
                kl -= 2;
            }
            while cell_of(yhi + kl + 2) < xa - 1 {
                kl += 2;
            }
            let mut k = kl + 2;
            while k < kr {
                tot += self.expect(&merge(x, &shift(y, k))) - ex * ey;
                k += 2;
            }
            let yk = shift(y, kr);
            let (ya, yb) = Self::span(&yk);
            let gap = (ya - xb - 1) as u32;
            let my = self.window(&yk, ya, yb);
            tot += (self.l.transpose() * mx * self.e.pow(gap) * self.resolvent * my * self.r)[(0, 0)];
            let yk = shift(y, kl);
            let (ya, yb) = Self::span(&yk);
            let gap = (xa - yb - 1) as u32;
            let my = self.window(&yk, ya, yb);
            tot += (self.l.transpose() * my * self.e.pow(gap) * self.resolvent * mx * self.r)[(0, 0)];
        }
        tot
    }
}

/// Unit vector spanning the (numerically) one-dimensional kernel of `a`.
fn null_vector(a: &Matrix4<C64>) -> Vector4<C64> {
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let k = (0..4).min_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j])).unwrap_or(3);
    v_t.row(k).transpose().map(|z| z.conj())
}

/// Per-site densities of one model at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Densities {
    /// ⟨H⟩/L.
    pub energy: f64,
    /// ⟨(H − ⟨H⟩)²⟩/L.
    pub h2: f64,
}

/// Energy and connected ⟨H²⟩ densities.
pub fn umps_density(u: &UniformMps, model: Model) -> Result<Densities> {
    let terms = model_terms(model, u.two_s)?;
    let mut energy = ZERO;
    let mut h2 = ZERO;
    for i in 0..2isize {
        for ti in &terms {
            let xi = plain(ti, i);
            energy += u.expect(&xi) * ti.coef;
            for tj in &terms {
                h2 += u.correlation_sum(&xi, &plain(tj, 0), &[0, 1]) * (ti.coef * tj.coef);
            }
        }
    }
    Ok(Densities { energy: energy.re / 2.0, h2: h2.re / 2.0 })
}

/// Per-cell projected Gram matrix [[G_oo, G_oe], [G_eo, G_ee]] of the θ-tangent vectors.
pub fn umps_gram(u: &UniformMps) -> [[f64; 2]; 2] {
    let id = SiteOp::Id;
    let mut g = [[0.0; 2]; 2];
    for p in 0..2 {
        let bra: Insertion = vec![(p as isize, Slot { bra_op: id, ket_op: id, bra_d: true, ket_d: false })];
        for q in 0..2 {
            let ket: Insertion = vec![(0, Slot { bra_op: id, ket_op: id, bra_d: false, ket_d: true })];
            g[p][q] = u.correlation_sum(&bra, &ket, &[q as isize]).re;
        }
    }
    g
}
