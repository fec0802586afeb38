//! Thermodynamic-limit flow on the two-angle manifold (φ = 0).
//!
//! θ_e sits on odd 0-based sites, θ_o on even ones, so |ℤ₂⟩ = 0101… is
//! (θ_e, θ_o) = (π, 0). With c = cos(θ/2), x = c^{2s}:
//!
//! ```text
//!   θ̇_e = Ω f(θ_e, θ_o),   f(x, y) = [c_y(1 − c_x^{4s−2}) + c_x^{4s−2} c_y^{2s+1} + 2s s_x c_x^{6s−1} s_y] / c_y
//! ```
//!
//! For half-integer s the chart is 4π-periodic (c changes sign under θ → θ + 2π
//! and f is odd in it); for integer s it is 2π-periodic.

pub mod umps;

use nalgebra::{Matrix2, Vector2};
use serde::Serialize;

use crate::basis::{Boundary, ConstrainedBasis};
use crate::ops::{apply, build_deformed, build_pxp, ModelParams};
use crate::varmps::{mps_tangent, overlap_x, GaugeAngles};
use crate::{Error, Result, C64};

pub use umps::{umps_density, umps_gram, Densities, Model, UniformMps};

use std::f64::consts::PI;

/// |cos(θ/2)| below this puts a point on a chart singular line.
pub const SINGULAR_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AnglePoint {
    pub theta_e: f64,
    pub theta_o: f64,
    pub phi_e: f64,
    pub phi_o: f64,
}

impl AnglePoint {
    pub const Z2: AnglePoint = AnglePoint::new(PI, 0.0);
    pub const Z2_PRIME: AnglePoint = AnglePoint::new(0.0, -PI);
    pub const POLARIZED: AnglePoint = AnglePoint::new(0.0, 0.0);

    pub const fn new(theta_e: f64, theta_o: f64) -> Self {
        Self { theta_e, theta_o, phi_e: 0.0, phi_o: 0.0 }
    }

    pub fn with_phases(mut self, phi_e: f64, phi_o: f64) -> Self {
        self.phi_e = phi_e;
        self.phi_o = phi_o;
        self
    }

    pub fn swapped(self) -> Self {
        Self { theta_e: self.theta_o, theta_o: self.theta_e, phi_e: self.phi_o, phi_o: self.phi_e }
    }

    /// Both angles wrapped into [−P/2, P/2), P = `chart_period(two_s)`.
    pub fn wrapped(self, two_s: u32) -> Self {
        let p = chart_period(two_s);
        let w = |t: f64| (t + p / 2.0).rem_euclid(p) - p / 2.0;
        Self { theta_e: w(self.theta_e), theta_o: w(self.theta_o), ..self }
    }
}

pub fn chart_period(two_s: u32) -> f64 {
    if two_s % 2 == 1 {
        4.0 * PI
    } else {
        2.0 * PI
    }
}

/// f(x, y) in units of Ω; `None` on a singular line away from a corner.
///
/// Corner rule: at c_y = 0, s_x = 0 the limit along either axis vanishes.
pub fn rate(x: f64, y: f64, two_s: u32) -> Option<f64> {
    let (sx, cx) = (x / 2.0).sin_cos();
    let (sy, cy) = (y / 2.0).sin_cos();
    if cy.abs() < SINGULAR_TOL {
        return if sx.abs() < SINGULAR_TOL { Some(0.0) } else { None };
    }
    let t = two_s as i32;
    let a = cx.powi(2 * t - 2);
    Some((cy * (1.0 - a) + a * cy.powi(t + 1) + two_s as f64 * sx * cx.powi(3 * t - 1) * sy) / cy)
}

/// Spin-1/2 rate with the next-nearest dressing, Ω-part and h-part separately.
fn rate_deformed_parts(x: f64, y: f64) -> Option<(f64, f64)> {
    let (sx, cx) = (x / 2.0).sin_cos();
    let (sy, cy) = (y / 2.0).sin_cos();
    if cy.abs() < SINGULAR_TOL {
        return if sx.abs() < SINGULAR_TOL { Some((0.0, 0.0)) } else { None };
    }
    let a = (cy * cy + cx * cx * sx * sy) / cy;
    let b = (x.cos() * cy * cy + cx * cx * y.cos() * sx * sy) / cy;
    Some((a, b))
}

fn singular(p: &AnglePoint) -> Error {
    Error::Singular(format!("velocity diverges at (θ_e, θ_o) = ({}, {})", p.theta_e, p.theta_o))
}

/// (θ̇_e, θ̇_o) of the unperturbed flow.
pub fn eom_rhs(p: &AnglePoint, two_s: u32, omega: f64) -> Result<(f64, f64)> {
    match (rate(p.theta_e, p.theta_o, two_s), rate(p.theta_o, p.theta_e, two_s)) {
        (Some(a), Some(b)) => Ok((omega * a, omega * b)),
        _ => Err(singular(p)),
    }
}

/// Spin-1/2 flow with the dressing h Σ P Sˣ P (Sᶻᵢ₊₂ + Sᶻᵢ₋₂) in the equations of motion.
///
/// At (0, 0) both components equal Ω + h.
pub fn eom_rhs_deformed(p: &AnglePoint, omega: f64, h: f64) -> Result<(f64, f64)> {
    match (rate_deformed_parts(p.theta_e, p.theta_o), rate_deformed_parts(p.theta_o, p.theta_e)) {
        (Some((a, b)), Some((c, d))) => Ok((omega * a + h * b, omega * c + h * d)),
        _ => Err(singular(p)),
    }
}

/// |x_o|² + |x_e|² − |x_o|²|x_e|².
pub fn metric_denominator(p: &AnglePoint, two_s: u32) -> f64 {
    let (xo2, xe2) = (overlap_x(p.theta_o, two_s).powi(2), overlap_x(p.theta_e, two_s).powi(2));
    xo2 + xe2 - xo2 * xe2
}

fn check_denominator(p: &AnglePoint, two_s: u32) -> Result<f64> {
    let d = metric_denominator(p, two_s);
    if d < 1e-14 {
        return Err(Error::Degenerate("metric degenerates where both angles sit at π".into()));
    }
    Ok(d)
}

/// Per-cell Gram diagonal; the off-diagonal entries vanish.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Gram {
    pub oo: f64,
    pub ee: f64,
}

/// G_oo = (s/2) x_e²/D, G_ee = (s/2) x_o²/D per two-site cell.
pub fn gram_diag(p: &AnglePoint, two_s: u32) -> Result<Gram> {
    let d = check_denominator(p, two_s)?;
    let s = two_s as f64 / 2.0;
    Ok(Gram {
        oo: 0.5 * s * overlap_x(p.theta_e, two_s).powi(2) / d,
        ee: 0.5 * s * overlap_x(p.theta_o, two_s).powi(2) / d,
    })
}

/// s sin(θ/2) cos^{2s−1}(θ/2), the magnitude of ⟨0|Sˣ|θ⟩.
fn y_amp(theta: f64, two_s: u32) -> f64 {
    let (sn, c) = (theta / 2.0).sin_cos();
    0.5 * two_s as f64 * sn * c.powi(two_s as i32 - 1)
}

/// ⟨0|(Sˣ)²|θ⟩ − x s/2 = −½ s(2s−1) cos^{2s−2}(θ/2) sin²(θ/2).
fn z_amp(theta: f64, two_s: u32) -> f64 {
    let (sn, c) = (theta / 2.0).sin_cos();
    let s = two_s as f64 / 2.0;
    -0.5 * s * (two_s as f64 - 1.0) * c.powi(two_s as i32 - 2) * sn * sn
}

/// ⟨H⟩/L at general phases.
///
/// 2E·D/Ω = ⟨Sˣ⟩_o x_e² + 2 Im⟨0|Sˣ|θ_o⟩ x_o x_e²(x_e − 1) + (e ↔ o); for spin 1/2 the
/// two o-terms collapse to cos(θ_o/2)cos³(θ_e/2) sin(θ_o/2) sin φ_o.
pub fn energy(p: &AnglePoint, two_s: u32, omega: f64) -> Result<f64> {
    let d = check_denominator(p, two_s)?;
    let s = two_s as f64 / 2.0;
    let part = |t: f64, ph: f64, tp: f64| {
        let (x, xp) = (overlap_x(t, two_s), overlap_x(tp, two_s));
        let sx = s * t.sin() * ph.sin();
        let y = y_amp(t, two_s) * ph.sin();
        sx * xp * xp + 2.0 * y * x * xp * xp * (xp - 1.0)
    };
    let n = part(p.theta_o, p.phi_o, p.theta_e) + part(p.theta_e, p.phi_e, p.theta_o);
    Ok(0.5 * omega * n / d)
}

/// ⟨H²⟩/L at φ = 0.
pub fn h_squared(p: &AnglePoint, two_s: u32, omega: f64) -> Result<f64> {
    let d = check_denominator(p, two_s)?;
    let s = two_s as f64 / 2.0;
    let (xo, xe) = (overlap_x(p.theta_o, two_s), overlap_x(p.theta_e, two_s));
    let (yo, ye) = (y_amp(p.theta_o, two_s), y_amp(p.theta_e, two_s));
    let (zo, ze) = (z_amp(p.theta_o, two_s), z_amp(p.theta_e, two_s));
    let (xo2, xe2) = (xo * xo, xe * xe);
    let num = 0.25 * s * (xo2 + xe2 - 2.0 * xo2 * xe2 + xo2 * xe2 * xe2 + xo2 * xo2 * xe2)
        + 2.0 * yo * ye * xo2 * xe2
        + xo * xe2 * (xe - 1.0) * zo
        + xe * xo2 * (xo - 1.0) * ze;
    Ok(omega * omega * num / d)
}

/// (1/L) θ̇ᵀGθ̇ for the given velocities.
pub fn tangent_norm_sq(p: &AnglePoint, two_s: u32, v: (f64, f64)) -> Result<f64> {
    let g = gram_diag(p, two_s)?;
    Ok(0.5 * (g.ee * v.0 * v.0 + g.oo * v.1 * v.1))
}

/// Which flow the angles follow.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FlowModel {
    pub two_s: u32,
    pub omega: f64,
    /// Dressing strength in the equations of motion; spin 1/2 only.
    pub h: f64,
}

impl FlowModel {
    pub fn pxp(two_s: u32, omega: f64) -> Self {
        Self { two_s, omega, h: 0.0 }
    }

    pub fn deformed(omega: f64, h: f64) -> Self {
        Self { two_s: 1, omega, h }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::InvalidArgument(format!("omega = {} must be positive", self.omega)));
        }
        if !(1..=16).contains(&self.two_s) {
            return Err(Error::InvalidArgument(format!("2s = {} out of range", self.two_s)));
        }
        if self.h != 0.0 && self.two_s != 1 {
            return Err(Error::Unsupported("deformation is defined for spin 1/2 only".into()));
        }
        Ok(())
    }

    pub fn velocity(&self, p: &AnglePoint) -> Result<(f64, f64)> {
        if self.h == 0.0 {
            eom_rhs(p, self.two_s, self.omega)
        } else {
            eom_rhs_deformed(p, self.omega, self.h)
        }
    }

    /// Hamiltonian whose TDVP flow is `velocity`. The dressing enters with the
    /// opposite sign: these equations are generated by the Sᶻ-dressed chain at −h.
    pub fn hamiltonian(&self) -> Model {
        if self.h == 0.0 {
            Model::Pxp { omega: self.omega }
        } else {
            Model::Deformed { omega: self.omega, h: -self.h }
        }
    }

    /// ⟨H²⟩/L: closed form at h = 0, channel evaluator otherwise.
    pub fn h_squared(&self, p: &AnglePoint) -> Result<f64> {
        if self.h == 0.0 {
            h_squared(p, self.two_s, self.omega)
        } else {
            let u = UniformMps::new(p.theta_e, p.theta_o, 0.0, 0.0, 1)?;
            Ok(umps_density(&u, self.hamiltonian())?.h2)
        }
    }

    /// γ² before clamping; tiny negative values are rounding.
    pub fn gamma_sq_raw(&self, p: &AnglePoint) -> Result<f64> {
        let v = self.velocity(p)?;
        Ok(self.h_squared(p)? - tangent_norm_sq(p, self.two_s, v)?)
    }

    pub fn gamma(&self, p: &AnglePoint) -> Result<f64> {
        Ok(self.gamma_sq_raw(p)?.max(0.0).sqrt())
    }

    pub fn sample(&self, p: &AnglePoint) -> FlowSample {
        match self.velocity(p) {
            Ok(v) => FlowSample { point: *p, velocity: Some(v), gamma: self.gamma(p).ok(), singular: false },
            Err(_) => FlowSample { point: *p, velocity: None, gamma: None, singular: true },
        }
    }
}

/// γ = √max(0, ⟨H²⟩/L − θ̇ᵀGθ̇/L) of the unperturbed flow.
pub fn gamma(p: &AnglePoint, two_s: u32, omega: f64) -> Result<f64> {
    FlowModel::pxp(two_s, omega).gamma(p)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FlowSample {
    pub point: AnglePoint,
    pub velocity: Option<(f64, f64)>,
    pub gamma: Option<f64>,
    pub singular: bool,
}

fn sin2_half(t: f64) -> f64 {
    (t / 2.0).sin().powi(2)
}

/// Kᵢ of the spin-1/2 chain Lagrangian on a ring; the wrap-around product is dropped.
pub fn k_factor(theta: &[f64], i: usize) -> f64 {
    let l = theta.len();
    let inv = |j: usize| 1.0 / (1.0 + sin2_half(theta[j % l]));
    let mut k = inv(i);
    // j = i − d; the product runs over the d − 1 sites strictly between j and i
    let mut prod = 1.0;
    for d in 1..l {
        let j = (i + l - d) % l;
        k += (inv(j) - inv(j + 1)) * prod;
        prod *= -sin2_half(theta[j]);
    }
    k
}

/// Fᵢ, with ⟨ψ|∂_{φᵢ}ψ⟩ = i sin²(θᵢ/2) Fᵢ / (1 + sin²(θᵢ/2)).
pub fn f_factor(theta: &[f64], i: usize) -> f64 {
    let l = theta.len();
    let s2 = |j: usize| sin2_half(theta[j % l]);
    let mut f = 1.0;
    let mut prod = 1.0;
    for d in 1..l {
        let j = (i + l - d) % l;
        f -= (s2(j) - s2(j + 1)) / (1.0 + s2(j)) * (1.0 + s2(i)) / (1.0 + s2(j + 1)) * prod;
        prod *= -s2(j);
    }
    f - (0..l).filter(|&j| j != i).map(|j| -s2(j)).product::<f64>()
}

/// Σᵢ Kᵢ (sin²(θᵢ/2) φ̇ᵢ + (Ω/2) cos(θᵢ₊₁/2) sin θᵢ sin φᵢ), spin 1/2.
pub fn lagrangian(theta: &[f64], phi: &[f64], phi_dot: &[f64], omega: f64) -> Result<f64> {
    let l = theta.len();
    if phi.len() != l || phi_dot.len() != l {
        return Err(Error::DimensionMismatch { expected: l, got: phi.len().min(phi_dot.len()) });
    }
    Ok((0..l)
        .map(|i| {
            let kin = sin2_half(theta[i]) * phi_dot[i];
            let pot = 0.5 * omega * (theta[(i + 1) % l] / 2.0).cos() * theta[i].sin() * phi[i].sin();
            k_factor(theta, i) * (kin + pot)
        })
        .sum())
}

/// Two-site K for the sublattice at `theta`, partner `partner`.
pub fn k_two_site(theta: f64, partner: f64) -> f64 {
    (partner / 2.0).cos().powi(2) / (1.0 - sin2_half(theta) * sin2_half(partner))
}

/// Lagrangian per two-site cell, spin 1/2.
pub fn lagrangian_two_site(p: &AnglePoint, phi_dot_e: f64, phi_dot_o: f64, omega: f64) -> f64 {
    let term = |t: f64, tp: f64, ph: f64, phd: f64| {
        k_two_site(t, tp) * (sin2_half(t) * phd + 0.5 * omega * (tp / 2.0).cos() * t.sin() * ph.sin())
    };
    term(p.theta_e, p.theta_o, p.phi_e, phi_dot_e) + term(p.theta_o, p.theta_e, p.phi_o, phi_dot_o)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FixedPointKind {
    Saddle,
    Center,
    Node,
    Focus,
    /// Vanishing Jacobian: linearization says nothing.
    Degenerate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FixedPoint {
    pub point: AnglePoint,
    /// Jacobian eigenvalues as (re, im).
    pub eigenvalues: [(f64, f64); 2],
    pub kind: FixedPointKind,
    /// True when the point lies on a chart singular line and is a limit of the flow.
    pub chart_singular: bool,
}

const JAC_STEP: f64 = 1e-6;

/// Central-difference Jacobian in the frame u = (θ_e + θ_o)/√2, v = (θ_e − θ_o)/√2.
///
/// The frame does not change eigenvalues of a smooth field. At the
/// spin-1/2 point (π, π) the field is only homogeneous of degree one, and
/// differencing along the rotated axes is what exposes its saddle.
pub fn jacobian(model: &FlowModel, p: &AnglePoint) -> Result<Matrix2<f64>> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let rot = Matrix2::new(r, r, r, -r);
    let mut j = Matrix2::zeros();
    for col in 0..2 {
        let dir = rot.column(col);
        let at = |sgn: f64| {
            let q = AnglePoint::new(p.theta_e + sgn * JAC_STEP * dir[0], p.theta_o + sgn * JAC_STEP * dir[1]);
            model.velocity(&q).map(|(a, b)| rot * Vector2::new(a, b))
        };
        let d = (at(1.0)? - at(-1.0)?) / (2.0 * JAC_STEP);
        j.set_column(col, &d);
    }
    Ok(j)
}

fn classify(j: &Matrix2<f64>) -> ([(f64, f64); 2], FixedPointKind) {
    let tr = j.trace();
    let det = j.determinant();
    let disc = tr * tr / 4.0 - det;
    if j.iter().all(|x| x.abs() < 1e-8) {
        return ([(tr / 2.0, 0.0); 2], FixedPointKind::Degenerate);
    }
    if disc >= 0.0 {
        let (a, b) = (tr / 2.0 - disc.sqrt(), tr / 2.0 + disc.sqrt());
        let kind = if a * b < 0.0 { FixedPointKind::Saddle } else { FixedPointKind::Node };
        ([(a, 0.0), (b, 0.0)], kind)
    } else {
        let im = (-disc).sqrt();
        let kind = if tr.abs() < 1e-6 * im { FixedPointKind::Center } else { FixedPointKind::Focus };
        ([(tr / 2.0, -im), (tr / 2.0, im)], kind)
    }
}

/// Zeros of the flow from a damped Newton search over a seed grid, plus
/// chart-singular points where the velocity vanishes linearly.
pub fn fixed_points(model: &FlowModel) -> Result<Vec<FixedPoint>> {
    model.validate()?;
    let period = chart_period(model.two_s);
    let mut found: Vec<FixedPoint> = Vec::new();
    let push = |fp: FixedPoint, found: &mut Vec<FixedPoint>| {
        let same = |a: &FixedPoint| {
            let d = |x: f64, y: f64| {
                let t = (x - y).rem_euclid(period);
                t.min(period - t)
            };
            d(a.point.theta_e, fp.point.theta_e) < 1e-6 && d(a.point.theta_o, fp.point.theta_o) < 1e-6
        };
        if !found.iter().any(same) {
            found.push(fp);
        }
    };
    let n = 24;
    for a in 0..n {
        for b in 0..n {
            let seed = AnglePoint::new(
                -period / 2.0 + (a as f64 + 0.5) * period / n as f64,
                -period / 2.0 + (b as f64 + 0.5) * period / n as f64,
            );
            // roots hugging a singular line are artefacts of the field's
            // higher-order vanishing there; those lines are probed separately below
            let off_line = |p: &AnglePoint| (p.theta_e / 2.0).cos().abs().min((p.theta_o / 2.0).cos().abs()) > 1e-3;
            if let Some(p) = newton(model, seed).filter(off_line) {
                if let Ok(j) = jacobian(model, &p) {
                    let (eigenvalues, kind) = classify(&j);
                    push(FixedPoint { point: p.wrapped(model.two_s), eigenvalues, kind, chart_singular: false }, &mut found);
                }
            }
        }
    }
    // doubly singular chart points (both cosines zero)
    let half = period / 2.0;
    for te in [-PI, PI].into_iter().filter(|&t| t < half) {
        for to in [-PI, PI].into_iter().filter(|&t| t < half) {
            let p = AnglePoint::new(te, to);
            if vanishes_linearly(model, &p) {
                if let Ok(j) = jacobian(model, &p) {
                    let (eigenvalues, kind) = classify(&j);
                    push(FixedPoint { point: p, eigenvalues, kind, chart_singular: true }, &mut found);
                }
            }
        }
    }
    Ok(found)
}

/// |v| ≤ 10ρ on small circles around `p`, sampled off the coordinate axes.
fn vanishes_linearly(model: &FlowModel, p: &AnglePoint) -> bool {
    [1e-4, 1e-5].iter().all(|&rho| {
        (0..8).all(|k| {
            let a = (k as f64 + 0.5) * PI / 4.0;
            let q = AnglePoint::new(p.theta_e + rho * a.cos(), p.theta_o + rho * a.sin());
            model.velocity(&q).is_ok_and(|(x, y)| x.hypot(y) < 10.0 * rho)
        })
    })
}

fn newton(model: &FlowModel, seed: AnglePoint) -> Option<AnglePoint> {
    let mut p = seed;
    let res = |p: &AnglePoint| model.velocity(p).ok().map(|(a, b)| Vector2::new(a, b));
    let mut r = res(&p)?;
    for _ in 0..100 {
        if r.norm() < 1e-12 {
            return Some(p);
        }
        // plain-frame Jacobian for the step
        let mut j = Matrix2::zeros();
        for col in 0..2 {
            let mut hi = p;
            let mut lo = p;
            if col == 0 {
                hi.theta_e += JAC_STEP;
                lo.theta_e -= JAC_STEP;
            } else {
                hi.theta_o += JAC_STEP;
                lo.theta_o -= JAC_STEP;
            }
            j.set_column(col, &((res(&hi)? - res(&lo)?) / (2.0 * JAC_STEP)));
        }
        let step = j.lu().solve(&(-r))?;
        let mut lambda = 1.0;
        loop {
            let q = AnglePoint::new(p.theta_e + lambda * step[0], p.theta_o + lambda * step[1]);
            if let Some(rq) = res(&q) {
                if rq.norm() < r.norm() {
                    p = q;
                    r = rq;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-8 {
                return None;
            }
        }
    }
    (r.norm() < 1e-10).then_some(p)
}

/// Finite-ring quantities of the normalized two-site MPS, for cross-checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FiniteTangent {
    pub sites: usize,
    /// ⟨∂ψ̂|∂ψ̂⟩ per cell for the o and e directions.
    pub gram: Gram,
    pub energy: f64,
    /// ⟨H²⟩/L.
    pub h2: f64,
    /// ‖(−iH − θ̇·∂)ψ̂‖/√L with θ̇ from the closed-form flow.
    pub gamma: f64,
    /// (θ̇_e, θ̇_o) solving the projected equations G θ̇ = Re⟨∂ψ̂|−iHψ̂⟩ on the ring.
    pub projected_velocity: (f64, f64),
    /// Residual with the ring's own projected velocity: the leakage of the finite-L flow.
    pub gamma_projected: f64,
}

/// Dense tangent-space evaluation on an L-site ring.
pub fn finite_tangent(l: usize, p: &AnglePoint, model: &FlowModel) -> Result<FiniteTangent> {
    model.validate()?;
    if l % 2 != 0 {
        return Err(Error::InvalidArgument("two-site cells need even L".into()));
    }
    let basis = ConstrainedBasis::new(l, model.two_s, Boundary::Periodic)?;
    let params = ModelParams { omega: model.omega, h: 0.0 };
    let h = match model.hamiltonian() {
        Model::Pxp { .. } => build_pxp(&basis, params)?,
        Model::Deformed { omega, h } => build_deformed(&basis, ModelParams { omega, h })?,
    };
    let g = GaugeAngles::two_site(l, p.theta_e, p.theta_o, p.phi_e, p.phi_o);
    let odd: Vec<bool> = (0..l).map(|i| i % 2 == 1).collect();
    let even: Vec<bool> = odd.iter().map(|b| !b).collect();
    let (psi, d_e) = mps_tangent(&basis, &g, &odd)?;
    let (_, d_o) = mps_tangent(&basis, &g, &even)?;
    let nrm = crate::dynamics::norm(&psi);
    if nrm < 1e-12 {
        return Err(Error::Degenerate("state has zero norm".into()));
    }
    let psi: Vec<C64> = psi.iter().map(|a| a / nrm).collect();
    // tangent of the normalized state, with the overlap on ψ̂ removed
    let project = |d: Vec<C64>| -> Vec<C64> {
        let d: Vec<C64> = d.iter().map(|a| a / nrm).collect();
        let ov = crate::dynamics::inner(&psi, &d);
        d.iter().zip(&psi).map(|(a, b)| a - b * ov).collect()
    };
    let (te, to) = (project(d_e), project(d_o));
    let cells = l as f64 / 2.0;
    let gram = Gram {
        oo: crate::dynamics::inner(&to, &to).re / cells,
        ee: crate::dynamics::inner(&te, &te).re / cells,
    };
    let hpsi = apply(&h, &psi)?;
    let energy = crate::dynamics::inner(&psi, &hpsi).re;
    let h2 = crate::dynamics::inner(&hpsi, &hpsi).re;
    let i = C64::new(0.0, 1.0);
    let mhpsi: Vec<C64> = hpsi.iter().map(|a| -i * a).collect();
    let re = |a: &[C64], b: &[C64]| crate::dynamics::inner(a, b).re;
    let gm = Matrix2::new(re(&te, &te), re(&te, &to), re(&to, &te), re(&to, &to));
    let rhs = Vector2::new(re(&te, &mhpsi), re(&to, &mhpsi));
    let pv = gm.lu().solve(&rhs).ok_or_else(|| Error::Degenerate("tangent vectors are dependent".into()))?;
    let (ve, vo) = model.velocity(p)?;
    let r: Vec<C64> = (0..psi.len()).map(|k| -i * hpsi[k] - te[k] * ve - to[k] * vo).collect();
    let rp: Vec<C64> = (0..psi.len()).map(|k| -i * hpsi[k] - te[k] * pv[0] - to[k] * pv[1]).collect();
    Ok(FiniteTangent {
        sites: l,
        gram,
        energy: energy / l as f64,
        h2: h2 / l as f64,
        gamma: crate::dynamics::norm(&r) / (l as f64).sqrt(),
        projected_velocity: (pv[0], pv[1]),
        gamma_projected: crate::dynamics::norm(&rp) / (l as f64).sqrt(),
    })
}

/// Intercept of the least-squares line y = a + b/L.
pub fn extrapolate_inverse_l(ls: &[usize], ys: &[f64]) -> f64 {
    let n = ls.len() as f64;
    let xs: Vec<f64> = ls.iter().map(|&l| 1.0 / l as f64).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    my - sxy / sxx * mx
}
