//! Oracle suites shared by the `verify` command and the acceptance harness.
//!
//! Each suite compares two independent routes to the same number and
//! reports the worst deviation against a pinned tolerance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::basis::{Boundary, ConstrainedBasis};
use crate::dynamics::inner;
use crate::flow::{
    energy, finite_tangent, gamma, gram_diag, h_squared, umps_density, umps_gram, AnglePoint, FlowModel, Model,
    UniformMps,
};
use crate::orbit::{find_orbit, sample_half_orbit, OrbitOptions};
use crate::varmps::{gauge_map, gutzwiller_state, identity_resolution_check, mps_dense, normalize, CoherentAngles, GaugeAngles};
use crate::Result;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    /// Worst deviation seen.
    pub worst: f64,
    pub tol: f64,
    pub samples: usize,
    pub pass: bool,
}

impl Check {
    fn new(name: impl Into<String>, worst: f64, tol: f64, samples: usize) -> Self {
        Self { name: name.into(), worst, tol, samples, pass: worst <= tol }
    }
}

fn ring(l: usize, two_s: u32) -> Result<ConstrainedBasis> {
    ConstrainedBasis::new(l, two_s, Boundary::Periodic)
}

/// ‖MPS‖² from dense contraction against 1 + Π(xⱼ² − 1), random angles, rings up to `l_max`.
pub fn norm_identity(draws: usize, l_max: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let bases: Vec<ConstrainedBasis> = (3..=l_max).map(|l| ring(l, 1)).collect::<Result<_>>()?;
    for k in 0..draws {
        let b = &bases[k % bases.len()];
        let l = b.sites();
        let g = GaugeAngles {
            theta: (0..l).map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI)).collect(),
            phi: (0..l).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect(),
        };
        let dense: f64 = mps_dense(b, &g)?.iter().map(|a| a.norm_sqr()).sum();
        worst = worst.max((dense - g.norm_formula(1)).abs());
    }
    Ok(Check::new(format!("norm identity, L <= {l_max}"), worst, 1e-12, draws))
}

/// |⟨Gutzwiller|normalized MPS(gauge angles)⟩| = 1 on random spin-1/2 rings.
pub fn gauge_round_trip(draws: usize, l: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = ring(l, 1)?;
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let ca = CoherentAngles {
            vartheta: (0..l).map(|_| rng.gen_range(-2.9..2.9)).collect(),
            varphi: (0..l).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect(),
        };
        let (g, _) = gauge_map(&ca)?;
        let gz = gutzwiller_state(&b, &ca)?;
        let mut m = mps_dense(&b, &g)?;
        normalize(&mut m)?;
        worst = worst.max((inner(&gz, &m).norm() - 1.0).abs());
    }
    Ok(Check::new(format!("gauge round trip, L = {l}"), worst, 1e-10, draws))
}

/// Golden-measure resolution of the projector on spin-1/2 rings.
pub fn identity_resolution(ls: &[usize]) -> Result<Check> {
    let mut worst = 0.0f64;
    for &l in ls {
        worst = worst.max(identity_resolution_check(&ring(l, 1)?)?);
    }
    Ok(Check::new(format!("identity resolution, L in {ls:?}"), worst, 1e-8, ls.len()))
}

/// A uniform random point, redrawn inside the bands |cos(θ/2)| < 0.15 around
/// the singular lines where θ̇ diverges.
fn random_point(rng: &mut ChaCha8Rng, with_phases: bool) -> AnglePoint {
    use std::f64::consts::PI;
    loop {
        let p = AnglePoint::new(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
        let p = if with_phases { p.with_phases(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI)) } else { p };
        let c = |t: f64| (t / 2.0).cos().abs();
        if c(p.theta_e).min(c(p.theta_o)) > 0.15 {
            return p;
        }
    }
}

/// Closed-form energy, Gram and ⟨H²⟩ against the transfer-channel evaluator.
pub fn closed_forms_vs_channels(points: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for k in 0..points {
        let two_s = [1, 2, 3, 4][k % 4];
        let p = random_point(&mut rng, true);
        let u = UniformMps::new(p.theta_e, p.theta_o, p.phi_e, p.phi_o, two_s)?;
        let d = umps_density(&u, Model::Pxp { omega: 1.0 })?;
        worst = worst.max((d.energy - energy(&p, two_s, 1.0)?).abs());
        let q = AnglePoint::new(p.theta_e, p.theta_o);
        let u0 = UniformMps::new(q.theta_e, q.theta_o, 0.0, 0.0, two_s)?;
        let d0 = umps_density(&u0, Model::Pxp { omega: 1.0 })?;
        worst = worst.max((d0.h2 - h_squared(&q, two_s, 1.0)?).abs());
        let g = umps_gram(&u0);
        let gc = gram_diag(&q, two_s)?;
        worst = worst.max((g[0][0] - gc.oo).abs()).max((g[1][1] - gc.ee).abs()).max(g[0][1].abs()).max(g[1][0].abs());
    }
    Ok(Check::new("closed forms vs channel evaluator", worst, 1e-10, points))
}

/// Intercept of a least-squares fit y = a + b/L.
pub fn extrapolate_inverse_l(ls: &[usize], ys: &[f64]) -> f64 {
    crate::flow::extrapolate_inverse_l(ls, ys)
}

#[derive(Clone, Debug, Serialize)]
pub struct GammaComparison {
    pub point: AnglePoint,
    pub closed: f64,
    pub finite: Vec<f64>,
    pub extrapolated: f64,
}

/// Closed-form γ against dense rings of the given sizes, extrapolated in 1/L.
///
/// The ring value is the residual left by the ring's own projected velocity,
/// so nothing on the brute-force side comes from the closed forms.
/// Passes when |γ_∞ − γ| ≤ max(rel·γ, floor).
pub fn gamma_brute_force(
    name: &str,
    model: &FlowModel,
    points: &[AnglePoint],
    ls: &[usize],
    rel: f64,
    floor: f64,
) -> Result<(Check, Vec<GammaComparison>)> {
    let mut rows = Vec::with_capacity(points.len());
    let mut worst = 0.0f64;
    for p in points {
        let closed = gamma(p, model.two_s, model.omega)?;
        let finite: Vec<f64> = ls.iter().map(|&l| finite_tangent(l, p, model).map(|t| t.gamma_projected)).collect::<Result<_>>()?;
        let extrapolated = extrapolate_inverse_l(ls, &finite);
        // measured in units of the pass band
        worst = worst.max((extrapolated - closed).abs() / (rel * closed).max(floor));
        rows.push(GammaComparison { point: *p, closed, finite, extrapolated });
    }
    Ok((Check::new(name, worst, 1.0, points.len()), rows))
}

pub fn random_flow_points(n: usize, seed: u64) -> Vec<AnglePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_point(&mut rng, false)).collect()
}

/// `n` points evenly spaced in time along the spin-1/2 ℤ₂ orbit, corners excluded.
pub fn orbit_points(n: usize) -> Result<Vec<AnglePoint>> {
    let res = find_orbit(&FlowModel::pxp(1, 1.0), &OrbitOptions::default())?;
    let s = sample_half_orbit(&res, n + 1);
    Ok(s[1..=n].iter().map(|x| x.point).collect())
}

/// The oracle suite run by `verify`; `quick` trims sizes and draw counts and
/// keeps only the orbit samples for γ, since random points near (π, π) need
/// rings beyond reach to converge.
pub fn suite(quick: bool) -> Result<Vec<Check>> {
    let model = FlowModel::pxp(1, 1.0);
    let (draws, ls, npts): (usize, &[usize], usize) = if quick { (20, &[12, 16, 20], 4) } else { (100, &[16, 20, 24], 20) };
    let mut out = vec![
        norm_identity(draws, 12, 1)?,
        gauge_round_trip(if quick { 5 } else { 20 }, 8, 2)?,
        identity_resolution(if quick { &[2, 4] } else { &[2, 4, 6, 8] })?,
        closed_forms_vs_channels(if quick { 12 } else { 50 }, 3)?,
    ];
    if !quick {
        out.push(gamma_brute_force("γ brute force, random points", &model, &random_flow_points(npts, 4), ls, 0.01, 1e-4)?.0);
    }
    out.push(gamma_brute_force("γ brute force, orbit samples", &model, &orbit_points(npts)?, ls, 0.01, 1e-4)?.0);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_oracles_pass() {
        for c in [
            norm_identity(10, 8, 9).unwrap(),
            gauge_round_trip(3, 6, 9).unwrap(),
            identity_resolution(&[2, 4]).unwrap(),
            closed_forms_vs_channels(8, 9).unwrap(),
        ] {
            assert!(c.pass, "{c:?}");
        }
    }

    #[test]
    fn gamma_oracle_on_a_few_points() {
        let model = FlowModel::pxp(1, 1.0);
        let (c, rows) = gamma_brute_force("t", &model, &orbit_points(3).unwrap(), &[12, 14, 16], 0.01, 1e-4).unwrap();
        assert!(c.pass, "{rows:?}");
        // a well-gapped random point converges as well
        let p = [AnglePoint::new(0.9, -1.2)];
        assert!(gamma_brute_force("t", &model, &p, &[12, 14, 16], 0.01, 1e-4).unwrap().0.pass);
    }
}
