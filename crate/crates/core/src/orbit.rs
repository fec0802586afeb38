//! Periodic orbits of the two-angle flow and their leakage integrals.
//!
//! The ℤ₂ orbit runs corner to corner through coordinate singularities of the
//! chart, so it is found by two-sided shooting: a forward leg leaves
//! C₁ = (π, 0) along its corner velocity, a backward leg leaves C₂ (the image
//! of |ℤ₂′⟩) backwards in time, and both stop on the perpendicular bisector
//! of C₁C₂. The legs make up half a period; the other half is the same path
//! with the sublattices exchanged.

pub mod ode;

use rayon::prelude::*;
use serde::Serialize;

use crate::flow::{AnglePoint, FlowModel, FlowSample};
use crate::{Error, Result};
use ode::{integrate, integrate_knots, OdeOptions, OdeStats, Solution};

use std::f64::consts::PI;

/// Absolute floor for the leg quadratures; keeps refinement off the noise in γ near γ = 0.
const QUAD_ATOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OrbitOptions {
    pub rtol: f64,
    /// Corner-bridging radius.
    pub delta_c: f64,
    /// Give up on a leg after this time, in units of 1/Ω.
    pub t_max: f64,
    pub quad_rtol: f64,
    /// Also rerun at δ_c ∈ {1e−4, 1e−5, 1e−6}.
    pub sensitivity: bool,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, delta_c: 1e-5, t_max: 50.0, quad_rtol: 1e-10, sensitivity: false }
    }
}

/// First corner, the |ℤ₂⟩ point.
pub const C1: AnglePoint = AnglePoint::new(PI, 0.0);

/// The |ℤ₂′⟩ corner reached after half a period, in the chart of `two_s`.
pub fn second_corner(two_s: u32) -> AnglePoint {
    if two_s % 2 == 1 {
        AnglePoint::new(2.0 * PI, -PI)
    } else {
        AnglePoint::new(2.0 * PI, PI)
    }
}

fn to_point(y: &[f64; 2]) -> AnglePoint {
    AnglePoint::new(y[0], y[1])
}

/// The two legs of a half period.
#[derive(Clone, Debug)]
pub struct HalfOrbit {
    pub model: FlowModel,
    pub delta_c: f64,
    /// Forward leg, t from δ/|v₁| (C₁ at t = 0) to the bisector.
    pub forward: Solution<2>,
    /// Backward leg, t from −δ/|v₂| (C₂ at t = 0) back to the bisector.
    pub backward: Solution<2>,
    pub corners: [AnglePoint; 2],
}

impl HalfOrbit {
    /// Duration of the half period.
    pub fn half_period(&self) -> f64 {
        self.forward.t_end - self.backward.t_end
    }

    /// Distance between the legs on the bisector.
    pub fn closure(&self) -> f64 {
        let (a, b) = (self.forward.y_end, self.backward.y_end);
        (a[0] - b[0]).hypot(a[1] - b[1])
    }

    /// Position at time t ∈ [0, T/2] measured from C₁; corner balls are straight segments.
    pub fn at(&self, t: f64) -> AnglePoint {
        let f0 = self.forward.t_start;
        let tf = self.forward.t_end;
        if t < f0 {
            let a = self.corners[0];
            let b = to_point(&self.forward.eval(f0));
            return lerp(&a, &b, t / f0);
        }
        if t <= tf {
            return to_point(&self.forward.eval(t));
        }
        let tau = self.backward.t_end + (t - tf);
        let b0 = self.backward.t_start;
        if tau <= b0 {
            return to_point(&self.backward.eval(tau));
        }
        let a = to_point(&self.backward.eval(b0));
        lerp(&a, &self.corners[1], (tau - b0) / -b0)
    }

    /// ∫ g over the half period: quadrature on both legs' step knots plus
    /// trapezoids across the two corner balls.
    pub fn integral<const M: usize>(&self, g: &(dyn Fn(&AnglePoint) -> [f64; M] + Sync), rtol: f64) -> [f64; M] {
        let mut out = self.integral_legs(g, rtol);
        let f0 = self.forward.t_start;
        let b0 = -self.backward.t_start;
        let (a1, b1) = (g(&self.corners[0]), g(&to_point(&self.forward.eval(f0))));
        let (a2, b2) = (g(&self.corners[1]), g(&to_point(&self.backward.eval(-b0))));
        for m in 0..M {
            out[m] += 0.5 * f0 * (a1[m] + b1[m]) + 0.5 * b0 * (a2[m] + b2[m]);
        }
        out
    }

    /// ∫ g over the legs only, both corner balls excluded.
    pub fn integral_legs<const M: usize>(&self, g: &(dyn Fn(&AnglePoint) -> [f64; M] + Sync), rtol: f64) -> [f64; M] {
        let fw = integrate_knots(|t| g(&to_point(&self.forward.eval(t))), &self.forward.knots(), rtol, QUAD_ATOL);
        let mut kb = self.backward.knots();
        kb.reverse();
        let bw = integrate_knots(|t| g(&to_point(&self.backward.eval(t))), &kb, rtol, QUAD_ATOL);
        std::array::from_fn(|m| fw[m] + bw[m])
    }

    pub fn stats(&self) -> OdeStats {
        let (a, b) = (self.forward.stats, self.backward.stats);
        OdeStats {
            accepted: a.accepted + b.accepted,
            rejected: a.rejected + b.rejected,
            evaluations: a.evaluations + b.evaluations,
        }
    }
}

fn lerp(a: &AnglePoint, b: &AnglePoint, s: f64) -> AnglePoint {
    AnglePoint::new(a.theta_e + s * (b.theta_e - a.theta_e), a.theta_o + s * (b.theta_o - a.theta_o))
}

/// Shoots both legs with corner radius `delta`.
pub fn shoot(model: &FlowModel, delta: f64, opts: &OrbitOptions) -> Result<HalfOrbit> {
    model.validate()?;
    let c1 = C1;
    let c2 = second_corner(model.two_s);
    let n = {
        let (dx, dy) = (c2.theta_e - c1.theta_e, c2.theta_o - c1.theta_o);
        let r = dx.hypot(dy);
        [dx / r, dy / r]
    };
    let mid = [(c1.theta_e + c2.theta_e) / 2.0, (c1.theta_o + c2.theta_o) / 2.0];
    let bisector = move |y: &[f64; 2]| (y[0] - mid[0]) * n[0] + (y[1] - mid[1]) * n[1];
    let rhs = |_: f64, y: &[f64; 2]| model.velocity(&to_point(y)).map(|(a, b)| [a, b]);
    let ode = OdeOptions { rtol: opts.rtol, atol: opts.rtol * 1e-2, ..Default::default() };
    let t_max = opts.t_max / model.omega;

    let depart = |c: &AnglePoint, sign: f64| -> Result<([f64; 2], f64)> {
        let (a, b) = model.velocity(c)?;
        let sp = a.hypot(b);
        if sp < 1e-12 {
            return Err(Error::NoOrbit("corner velocity vanishes".into()));
        }
        Ok(([c.theta_e + sign * delta * a / sp, c.theta_o + sign * delta * b / sp], delta / sp))
    };
    let (y1, t1) = depart(&c1, 1.0)?;
    let forward = integrate(rhs, t1, y1, t_max, ode, Some(&bisector))?;
    if !forward.event {
        return Err(Error::NoOrbit(format!("forward leg did not reach the bisector within t = {t_max}")));
    }
    let (y2, t2) = depart(&c2, -1.0)?;
    let backward = integrate(rhs, -t2, y2, -t_max, ode, Some(&bisector))?;
    if !backward.event {
        return Err(Error::NoOrbit(format!("backward leg did not reach the bisector within t = {t_max}")));
    }
    Ok(HalfOrbit { model: *model, delta_c: delta, forward, backward, corners: [c1, c2] })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SensitivityRow {
    pub delta_c: f64,
    pub period: f64,
    pub eps_c: f64,
    pub f_c: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OrbitResult {
    pub model: FlowModel,
    /// Period in units of 1/Ω (Ω as given in the model).
    pub period: f64,
    pub eps_c: f64,
    pub f_c: f64,
    pub closure: f64,
    pub delta_c: f64,
    /// Along-flow and transverse Floquet multipliers.
    pub monodromy_eigs: [f64; 2],
    pub sensitivity: Vec<SensitivityRow>,
    pub stats: OdeStats,
    #[serde(skip)]
    pub half: HalfOrbit,
}

impl OrbitResult {
    pub fn period_over_2pi(&self) -> f64 {
        self.period * self.model.omega / (2.0 * PI)
    }
}

fn gamma_fn(model: &FlowModel) -> impl Fn(&AnglePoint) -> f64 + Sync + '_ {
    move |p| model.gamma_sq_raw(p).map(|g| g.max(0.0).sqrt()).unwrap_or(f64::NAN)
}

/// (ε_C, F_C) = (∮γ dt, ∮γ² dt), twice the half-period integrals.
pub fn orbit_error(half: &HalfOrbit, quad_rtol: f64) -> Result<(f64, f64)> {
    let m = half.model;
    let g = move |p: &AnglePoint| {
        let g2 = m.gamma_sq_raw(p).map(|g| g.max(0.0)).unwrap_or(f64::NAN);
        [g2.sqrt(), g2]
    };
    let [eps, f] = half.integral(&g, quad_rtol).map(|v| 2.0 * v);
    if !(eps.is_finite() && f.is_finite()) {
        return Err(Error::Singular("γ undefined somewhere on the orbit".into()));
    }
    Ok((eps, f))
}

/// ∂θ̇_e/∂θ_e + ∂θ̇_o/∂θ_o by central differences.
pub fn divergence(model: &FlowModel, p: &AnglePoint) -> Result<f64> {
    let h = 1e-6;
    let (a, _) = model.velocity(&AnglePoint::new(p.theta_e + h, p.theta_o))?;
    let (b, _) = model.velocity(&AnglePoint::new(p.theta_e - h, p.theta_o))?;
    let (_, c) = model.velocity(&AnglePoint::new(p.theta_e, p.theta_o + h))?;
    let (_, d) = model.velocity(&AnglePoint::new(p.theta_e, p.theta_o - h))?;
    Ok((a - b + c - d) / (2.0 * h))
}

/// Floquet multipliers [1, exp(PV∮ div F dt)].
///
/// For a planar autonomous flow the product of the multipliers is
/// exp(∮ div F dt) and one of them is 1. The divergence has 1/t poles of
/// opposite sign on either side of each corner; excluding equal balls on both
/// sides takes the principal value.
pub fn monodromy(half: &HalfOrbit, quad_rtol: f64) -> Result<[f64; 2]> {
    let m = half.model;
    let g = move |p: &AnglePoint| [divergence(&m, p).unwrap_or(f64::NAN)];
    let pv = 2.0 * half.integral_legs(&g, quad_rtol)[0];
    if !pv.is_finite() {
        return Err(Error::Singular("divergence undefined on the orbit".into()));
    }
    Ok([1.0, pv.exp()])
}

/// Locates the ℤ₂ orbit and evaluates its period, leakage and stability.
pub fn find_orbit(model: &FlowModel, opts: &OrbitOptions) -> Result<OrbitResult> {
    let half = shoot(model, opts.delta_c, opts)?;
    let (eps_c, f_c) = orbit_error(&half, opts.quad_rtol)?;
    let monodromy_eigs = monodromy(&half, opts.quad_rtol)?;
    let mut sensitivity = Vec::new();
    if opts.sensitivity {
        for d in [1e-4, 1e-5, 1e-6] {
            let h = shoot(model, d, opts)?;
            let (e, f) = orbit_error(&h, opts.quad_rtol)?;
            sensitivity.push(SensitivityRow { delta_c: d, period: 2.0 * h.half_period(), eps_c: e, f_c: f });
        }
    }
    Ok(OrbitResult {
        model: *model,
        period: 2.0 * half.half_period(),
        eps_c,
        f_c,
        closure: half.closure(),
        delta_c: opts.delta_c,
        monodromy_eigs,
        sensitivity,
        stats: half.stats(),
        half,
    })
}

/// f(θ, θ) on the symmetric line, regular through θ = π.
pub fn diagonal_rate(theta: f64, two_s: u32) -> f64 {
    let (sn, c) = (theta / 2.0).sin_cos();
    let t = two_s as i32;
    1.0 - c.powi(2 * t - 2) + c.powi(3 * t - 2) * (1.0 + two_s as f64 * sn * sn)
}

/// γ² on the symmetric line with the common x² cancelled, regular through θ = π.
pub fn diagonal_gamma_sq(theta: f64, two_s: u32) -> f64 {
    let (sn, c) = (theta / 2.0).sin_cos();
    let s = two_s as f64 / 2.0;
    let t = two_s as i32;
    let x = c.powi(t);
    let x2 = x * x;
    let y = s * sn * c.powi(t - 1);
    let z = -0.5 * s * (two_s as f64 - 1.0) * c.powi(t - 2) * sn * sn;
    let f = diagonal_rate(theta, two_s);
    let h2 = (0.5 * s * (1.0 - x2 + x2 * x2) + 2.0 * y * y * x2 + 2.0 * x * (x - 1.0) * z) / (2.0 - x2);
    h2 - 0.5 * s * f * f / (2.0 - x2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DiagonalOrbit {
    pub two_s: u32,
    pub omega: f64,
    pub period: f64,
    pub eps: f64,
    pub f: f64,
}

/// The orbit through |𝟎⟩ = (0, 0), which stays on θ_e = θ_o and closes at (2π, 2π).
///
/// For half-integer s the rate vanishes at θ = π (the saddle) and no orbit exists.
pub fn polarized_orbit(two_s: u32, omega: f64) -> Result<DiagonalOrbit> {
    FlowModel::pxp(two_s, omega).validate()?;
    if two_s % 2 == 1 {
        return Err(Error::NoOrbit("the symmetric line ends in the saddle at (π, π)".into()));
    }
    let knots = [0.0, PI / 2.0, PI, 1.5 * PI, 2.0 * PI];
    let (rtol, atol) = (1e-12, 1e-14);
    let [dt, eps, f] = integrate_knots(
        |t| {
            let (r, g2) = (diagonal_rate(t, two_s), diagonal_gamma_sq(t, two_s).max(0.0));
            [1.0 / r, g2.sqrt() / r, g2 / r]
        },
        &knots,
        rtol,
        atol,
    );
    let (period, f) = (dt / omega, omega * f);
    Ok(DiagonalOrbit { two_s, omega, period, eps, f })
}

/// Integrates the flow from `start` for `t_max`.
pub fn trajectory(model: &FlowModel, start: &AnglePoint, t_max: f64, rtol: f64) -> Result<Solution<2>> {
    model.validate()?;
    let rhs = |_: f64, y: &[f64; 2]| model.velocity(&to_point(y)).map(|(a, b)| [a, b]);
    let ode = OdeOptions { rtol, atol: rtol * 1e-2, ..Default::default() };
    integrate(rhs, 0.0, [start.theta_e, start.theta_o], t_max, ode, None)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub point: AnglePoint,
    pub gamma: f64,
}

/// `n` + 1 equally spaced samples of the half period C₁ → C₂.
pub fn sample_half_orbit(res: &OrbitResult, n: usize) -> Vec<TrajectorySample> {
    let th = res.half.half_period();
    let g = gamma_fn(&res.model);
    (0..=n)
        .map(|k| {
            let t = th * k as f64 / n as f64;
            let point = res.half.at(t);
            TrajectorySample { t, point, gamma: g(&point) }
        })
        .collect()
}

pub fn trajectory_csv(samples: &[TrajectorySample]) -> String {
    use crate::dynamics::fmt_sci;
    let mut out = String::from("t,theta_e,theta_o,gamma\n");
    for s in samples {
        out += &format!("{},{},{},{}\n", fmt_sci(s.t), fmt_sci(s.point.theta_e), fmt_sci(s.point.theta_o), fmt_sci(s.gamma));
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanRow {
    pub h: f64,
    pub period: Option<f64>,
    pub eps_c: Option<f64>,
    pub f_c: Option<f64>,
    pub closure: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanResult {
    pub omega: f64,
    pub rows: Vec<ScanRow>,
    /// Grid minimiser of F_C refined by a parabola through its neighbours.
    pub argmin_f: Option<f64>,
    pub argmin_eps: Option<f64>,
}

/// Orbit metrics of the dressed spin-1/2 flow over a grid of h.
pub fn scan_h(omega: f64, hs: &[f64], opts: &OrbitOptions) -> ScanResult {
    let rows: Vec<ScanRow> = hs
        .par_iter()
        .map(|&h| {
            let model = FlowModel::deformed(omega, h);
            let o = OrbitOptions { sensitivity: false, ..*opts };
            match shoot(&model, o.delta_c, &o).and_then(|half| Ok((orbit_error(&half, o.quad_rtol)?, half))) {
                Ok(((e, f), half)) => ScanRow {
                    h,
                    period: Some(2.0 * half.half_period()),
                    eps_c: Some(e),
                    f_c: Some(f),
                    closure: Some(half.closure()),
                    error: None,
                },
                Err(err) => ScanRow { h, period: None, eps_c: None, f_c: None, closure: None, error: Some(err.to_string()) },
            }
        })
        .collect();
    let argmin_f = refined_argmin(&rows, |r| r.f_c);
    let argmin_eps = refined_argmin(&rows, |r| r.eps_c);
    ScanResult { omega, rows, argmin_f, argmin_eps }
}

fn refined_argmin(rows: &[ScanRow], key: impl Fn(&ScanRow) -> Option<f64>) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows.iter().filter_map(|r| key(r).map(|v| (r.h, v))).collect();
    let (i, _) = pts.iter().enumerate().min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))?;
    if i == 0 || i + 1 == pts.len() {
        return Some(pts[i].0);
    }
    let ((x0, y0), (x1, y1), (x2, y2)) = (pts[i - 1], pts[i], pts[i + 1]);
    let den = (x0 - x1) * (x0 - x2) * (x1 - x2);
    let a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / den;
    let b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / den;
    if a > 0.0 {
        Some((-b / (2.0 * a)).clamp(x0, x2))
    } else {
        Some(x1)
    }
}

/// FlowSample at every node of an n × n grid over [−π, π)², θ_e slowest.
pub fn flow_grid(model: &FlowModel, n: usize) -> Result<Vec<FlowSample>> {
    model.validate()?;
    if n < 2 {
        return Err(Error::InvalidArgument("grid needs n >= 2".into()));
    }
    let node = |k: usize| -PI + 2.0 * PI * k as f64 / n as f64;
    Ok((0..n * n)
        .into_par_iter()
        .map(|k| model.sample(&AnglePoint::new(node(k / n), node(k % n))))
        .collect())
}

pub fn flow_grid_csv(samples: &[FlowSample]) -> String {
    use crate::dynamics::fmt_sci;
    let mut out = String::from("theta_e,theta_o,dtheta_e,dtheta_o,gamma,singular_flag\n");
    let nan = f64::NAN;
    for s in samples {
        let (a, b) = s.velocity.unwrap_or((nan, nan));
        out += &format!(
            "{},{},{},{},{},{}\n",
            fmt_sci(s.point.theta_e),
            fmt_sci(s.point.theta_o),
            fmt_sci(a),
            fmt_sci(b),
            fmt_sci(s.gamma.unwrap_or(nan)),
            u8::from(s.singular)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{fixed_points, gamma, FixedPointKind};

    #[test]
    fn spin_half_orbit() {
        let r = find_orbit(&FlowModel::pxp(1, 1.0), &OrbitOptions::default()).unwrap();
        assert!((r.period_over_2pi() - 1.534190).abs() < 1e-5, "{}", r.period_over_2pi());
        assert!((r.eps_c - 0.17464).abs() < 1e-4, "{}", r.eps_c);
        assert!((r.f_c - 0.005212).abs() < 1e-5, "{}", r.f_c);
        assert!(r.closure < 1e-6, "{}", r.closure);
    }

    #[test]
    fn omega_rescales_time_only() {
        let a = find_orbit(&FlowModel::pxp(2, 1.0), &OrbitOptions::default()).unwrap();
        let b = find_orbit(&FlowModel::pxp(2, 2.5), &OrbitOptions::default()).unwrap();
        assert!((a.period - 2.5 * b.period).abs() < 1e-8 * a.period);
        assert!((a.eps_c - b.eps_c).abs() < 1e-8);
        // γ² scales as Ω² and dt as 1/Ω
        assert!((2.5 * a.f_c - b.f_c).abs() < 1e-8);
    }

    #[test]
    fn half_orbit_is_continuous() {
        let r = find_orbit(&FlowModel::pxp(1, 1.0), &OrbitOptions::default()).unwrap();
        let s = sample_half_orbit(&r, 2000);
        assert!((s[0].point.theta_e - PI).abs() < 1e-15);
        let last = s.last().unwrap().point;
        assert!((last.theta_e - 2.0 * PI).abs() < 1e-12 && (last.theta_o + PI).abs() < 1e-12);
        for w in s.windows(2) {
            let d = (w[1].point.theta_e - w[0].point.theta_e).hypot(w[1].point.theta_o - w[0].point.theta_o);
            assert!(d < 0.01);
        }
    }

    #[test]
    fn polarized_orbits() {
        let a = polarized_orbit(2, 1.0).unwrap();
        assert!((a.period - 6.30790).abs() < 1e-4 && (a.eps - 1.17069).abs() < 1e-4, "{a:?}");
        let b = polarized_orbit(4, 1.0).unwrap();
        assert!((b.period - 6.19574).abs() < 1e-4 && (b.eps - 1.14618).abs() < 1e-4, "{b:?}");
        assert!(polarized_orbit(1, 1.0).is_err());
        // the flow itself returns to (2π, 2π) after one period
        let sol = trajectory(&FlowModel::pxp(2, 1.0), &AnglePoint::POLARIZED, a.period, 1e-11).unwrap();
        assert!((sol.y_end[0] - 2.0 * PI).abs() < 1e-7 && (sol.y_end[1] - 2.0 * PI).abs() < 1e-7);
    }

    #[test]
    fn diagonal_forms_agree_off_the_saddle() {
        for two_s in [1, 2, 4] {
            for t in [0.3, 1.4, 2.2, 4.0] {
                let p = AnglePoint::new(t, t);
                let (v, _) = crate::flow::eom_rhs(&p, two_s, 1.0).unwrap();
                assert!((v - diagonal_rate(t, two_s)).abs() < 1e-13);
                let g = gamma(&p, two_s, 1.0).unwrap();
                assert!((g * g - diagonal_gamma_sq(t, two_s).max(0.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spin_half_polarized_flow_ends_in_the_saddle() {
        let sol = trajectory(&FlowModel::pxp(1, 1.0), &AnglePoint::POLARIZED, 20.0, 1e-10).unwrap();
        let fps = fixed_points(&FlowModel::pxp(1, 1.0)).unwrap();
        let sad = fps.iter().find(|f| f.kind == FixedPointKind::Saddle).unwrap();
        let d = (sol.y_end[0] - sad.point.theta_e.abs()).hypot(sol.y_end[1] - sad.point.theta_o.abs());
        assert!(d < 1e-7, "{:?}", sol.y_end);
    }

    #[test]
    fn grid_symmetries() {
        let n = 16;
        let g = flow_grid(&FlowModel::pxp(1, 1.0), n).unwrap();
        let at = |a: usize, b: usize| &g[a * n + b];
        for a in 1..n {
            for b in 1..n {
                let (p, q) = (at(a, b), at(b, a));
                assert_eq!(p.singular, q.singular);
                if let (Some(u), Some(v)) = (p.velocity, q.velocity) {
                    assert!((u.0 - v.1).abs() < 1e-12 && (u.1 - v.0).abs() < 1e-12);
                }
                let r = at(n - a, n - b);
                if let (Some(u), Some(v)) = (p.velocity, r.velocity) {
                    assert!((u.0 - v.0).abs() < 1e-9 && (u.1 - v.1).abs() < 1e-9);
                }
            }
        }
        assert!(g.iter().filter(|s| s.singular).count() > 0);
        assert!(g.iter().all(|s| s.gamma.map_or(true, |x| x >= 0.0)));
    }

    #[test]
    fn argmin_refinement() {
        let rows: Vec<ScanRow> = [0.0, 0.1, 0.2, 0.3]
            .iter()
            .map(|&h: &f64| ScanRow {
                h,
                period: None,
                eps_c: None,
                f_c: Some((h - 0.13).powi(2)),
                closure: None,
                error: None,
            })
            .collect();
        assert!((refined_argmin(&rows, |r| r.f_c).unwrap() - 0.13).abs() < 1e-12);
    }
}
