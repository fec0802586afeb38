//! Dormand–Prince 5(4) with continuous output and a terminal event.

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// First trial step magnitude; 0 picks one from the initial slope.
    pub h0: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, h0: 0.0, max_steps: 1_000_000 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// One accepted step with its quartic interpolant.
#[derive(Clone, Debug)]
pub struct Step<const N: usize> {
    pub t0: f64,
    pub h: f64,
    r: [[f64; N]; 5],
}

impl<const N: usize> Step<N> {
    fn eval(&self, t: f64) -> [f64; N] {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        std::array::from_fn(|i| {
            let r = &self.r;
            r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])))
        })
    }

    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }
}

#[derive(Clone, Debug)]
pub struct Solution<const N: usize> {
    pub steps: Vec<Step<N>>,
    pub t_start: f64,
    pub t_end: f64,
    pub y_end: [f64; N],
    pub stats: OdeStats,
    /// Set when the terminal event fired; `t_end`, `y_end` then sit on it.
    pub event: bool,
}

impl<const N: usize> Solution<N> {
    /// Continuous output; `t` is clamped into the integrated range.
    pub fn eval(&self, t: f64) -> [f64; N] {
        let fwd = self.t_end >= self.t_start;
        let key = |s: &Step<N>| if fwd { s.t1() } else { -s.t1() };
        let tk = if fwd { t } else { -t };
        let i = self.steps.partition_point(|s| key(s) < tk).min(self.steps.len().saturating_sub(1));
        match self.steps.get(i) {
            Some(s) => s.eval(t),
            None => self.y_end,
        }
    }

    /// Step boundaries from start to end, with the final one moved onto the event.
    pub fn knots(&self) -> Vec<f64> {
        let mut k: Vec<f64> = std::iter::once(self.t_start).chain(self.steps.iter().map(|s| s.t1())).collect();
        if let Some(last) = k.last_mut() {
            *last = self.t_end;
        }
        k
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth minus embedded fourth order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Integrates y' = f(t, y) from `t0` towards `t1` (either direction).
///
/// `rhs` may fail (a singular line); the step is then rejected and shrunk.
/// When `event` is given, integration stops at the first sign change of
/// event(y) after the start, located on the interpolant to 1e−14.
pub fn integrate<const N: usize>(
    mut rhs: impl FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    opts: OdeOptions,
    event: Option<&dyn Fn(&[f64; N]) -> f64>,
) -> Result<Solution<N>> {
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let mut stats = OdeStats::default();
    let mut t = t0;
    let mut y = y0;
    let mut k1 = rhs(t, &y)?;
    stats.evaluations += 1;
    let scale = |a: &[f64; N], b: &[f64; N], i: usize| opts.atol + opts.rtol * a[i].abs().max(b[i].abs());
    let mut h = if opts.h0 > 0.0 {
        opts.h0
    } else {
        let yn = (0..N).map(|i| (y[i] / scale(&y, &y, i)).powi(2)).sum::<f64>().sqrt();
        let fnorm = (0..N).map(|i| (k1[i] / scale(&y, &y, i)).powi(2)).sum::<f64>().sqrt();
        if yn < 1e-5 || fnorm < 1e-5 {
            1e-6
        } else {
            (0.01 * yn / fnorm).min((t1 - t0).abs())
        }
    } * dir;
    let mut steps: Vec<Step<N>> = Vec::new();
    let mut g_prev = event.map(|g| g(&y));
    let mut err_prev = 1e-4f64;
    while (t1 - t) * dir > 0.0 {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::NoConvergence(format!("step budget exhausted at t = {t}")));
        }
        if (t + h - t1) * dir > 0.0 {
            h = t1 - t;
        }
        if h.abs() < 1e-14 * t.abs().max(1.0) {
            return Err(Error::NoConvergence(format!("step size underflow at t = {t}, y = {y:?}")));
        }
        let mut k = [[0.0; N]; 7];
        k[0] = k1;
        let mut ok = true;
        for s in 1..7 {
            let ys: [f64; N] = std::array::from_fn(|i| y[i] + h * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>());
            stats.evaluations += 1;
            match rhs(t + C[s] * h, &ys) {
                Ok(v) if v.iter().all(|x| x.is_finite()) => k[s] = v,
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            stats.rejected += 1;
            h *= 0.25;
            continue;
        }
        let ynew: [f64; N] = std::array::from_fn(|i| y[i] + h * (0..6).map(|j| A[6][j] * k[j][i]).sum::<f64>());
        let err = ((0..N)
            .map(|i| {
                let e = h * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>();
                (e / scale(&y, &ynew, i)).powi(2)
            })
            .sum::<f64>()
            / N as f64)
            .sqrt();
        if err > 1.0 {
            stats.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).max(0.2);
            continue;
        }
        stats.accepted += 1;
        let mut r = [[0.0; N]; 5];
        for i in 0..N {
            let dy = ynew[i] - y[i];
            let bspl = h * k[0][i] - dy;
            r[0][i] = y[i];
            r[1][i] = dy;
            r[2][i] = bspl;
            r[3][i] = dy - h * k[6][i] - bspl;
            r[4][i] = h * (0..7).map(|j| D[j] * k[j][i]).sum::<f64>();
        }
        let step = Step { t0: t, h, r };
        if let (Some(g), Some(gp)) = (event, g_prev) {
            let gn = g(&ynew);
            if gp != 0.0 && gp.signum() != gn.signum() {
                let te = bisect_event(&step, g, gp);
                let ye = step.eval(te);
                steps.push(step);
                return Ok(Solution { steps, t_start: t0, t_end: te, y_end: ye, stats, event: true });
            }
            g_prev = Some(gn);
        }
        steps.push(step);
        t += h;
        y = ynew;
        k1 = k[6];
        // PI controller
        let fac = 0.9 * err.max(1e-10).powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0);
        err_prev = err.max(1e-4);
        h *= fac.clamp(0.2, 10.0);
    }
    Ok(Solution { steps, t_start: t0, t_end: t, y_end: y, stats, event: false })
}

fn bisect_event<const N: usize>(step: &Step<N>, g: &dyn Fn(&[f64; N]) -> f64, g0: f64) -> f64 {
    let (mut a, mut b) = (step.t0, step.t1());
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (b - a).abs() < 1e-14 * m.abs().max(1.0) {
            break;
        }
        if g(&step.eval(m)).signum() == g0.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

const GK_X: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const GK_W: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const G_W: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Kronrod-15 values and |K15 − G7| on [a, b] for an M-component integrand.
pub fn gk15<const M: usize>(f: &mut impl FnMut(f64) -> [f64; M], a: f64, b: f64) -> ([f64; M], [f64; M]) {
    let (c, hw) = (0.5 * (a + b), 0.5 * (b - a));
    let f0 = f(c);
    let mut k: [f64; M] = std::array::from_fn(|m| GK_W[7] * f0[m]);
    let mut g: [f64; M] = std::array::from_fn(|m| G_W[3] * f0[m]);
    for j in 0..7 {
        let (fa, fb) = (f(c - hw * GK_X[j]), f(c + hw * GK_X[j]));
        for m in 0..M {
            k[m] += GK_W[j] * (fa[m] + fb[m]);
            if j % 2 == 1 {
                g[m] += G_W[j / 2] * (fa[m] + fb[m]);
            }
        }
    }
    (std::array::from_fn(|m| k[m] * hw), std::array::from_fn(|m| ((k[m] - g[m]) * hw).abs()))
}

/// Panels beyond which global refinement gives up and returns its best estimate.
const MAX_PANELS: usize = 50_000;

/// Globally adaptive Gauss–Kronrod over consecutive knots (e.g. RK step boundaries).
///
/// The panel with the largest weighted error is bisected until, for every
/// component, the summed error estimate is below max(rtol·|total|, atol).
pub fn integrate_knots<const M: usize>(mut f: impl FnMut(f64) -> [f64; M], knots: &[f64], rtol: f64, atol: f64) -> [f64; M] {
    struct Panel<const M: usize> {
        a: f64,
        b: f64,
        v: [f64; M],
        e: [f64; M],
    }
    let mut panels: Vec<Panel<M>> = knots
        .windows(2)
        .map(|w| {
            let (v, e) = gk15(&mut f, w[0], w[1]);
            Panel { a: w[0], b: w[1], v, e }
        })
        .collect();
    let sum = |ps: &[Panel<M>], val: bool| -> [f64; M] {
        std::array::from_fn(|m| ps.iter().map(|p| if val { p.v[m] } else { p.e[m] }).sum())
    };
    let total = sum(&panels, true);
    let scale: [f64; M] = std::array::from_fn(|m| (rtol * total[m].abs()).max(atol));
    let weigh = |e: &[f64; M]| Ordered((0..M).map(|m| e[m] / scale[m]).fold(0.0, f64::max));
    let mut heap: std::collections::BinaryHeap<(Ordered, usize)> =
        panels.iter().enumerate().map(|(i, p)| (weigh(&p.e), i)).collect();
    let mut err = sum(&panels, false);
    while panels.len() < MAX_PANELS && (0..M).any(|m| !(err[m] <= scale[m])) {
        let Some((_, i)) = heap.pop() else { break };
        let (a, b) = (panels[i].a, panels[i].b);
        let mid = 0.5 * (a + b);
        if mid <= a.min(b) || mid >= a.max(b) {
            continue;
        }
        let (v1, e1) = gk15(&mut f, a, mid);
        let (v2, e2) = gk15(&mut f, mid, b);
        for m in 0..M {
            err[m] += e1[m] + e2[m] - panels[i].e[m];
        }
        heap.push((weigh(&e1), i));
        heap.push((weigh(&e2), panels.len()));
        panels[i] = Panel { a, b: mid, v: v1, e: e1 };
        panels.push(Panel { a: mid, b, v: v2, e: e2 });
    }
    sum(&panels, true)
}

/// Total order on f64 for the refinement heap; NaN ranks as infinitely bad.
#[derive(PartialEq, PartialOrd)]
struct Ordered(f64);

impl Eq for Ordered {}

impl Ord for Ordered {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        let k = |x: f64| if x.is_nan() { f64::INFINITY } else { x };
        k(self.0).total_cmp(&k(other.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_rhs_is_exact() {
        let sol = integrate(|_, _| Ok([2.0, -1.0]), 0.0, [1.0, 1.0], 3.0, OdeOptions::default(), None).unwrap();
        assert!((sol.y_end[0] - 7.0).abs() < 1e-13 && (sol.y_end[1] + 2.0).abs() < 1e-13);
        let mid = sol.eval(1.234);
        assert!((mid[0] - 3.468).abs() < 1e-13);
    }

    #[test]
    fn harmonic_oscillator_and_dense_output() {
        let opts = OdeOptions { rtol: 1e-11, atol: 1e-13, ..Default::default() };
        let sol = integrate(|_, y| Ok([y[1], -y[0]]), 0.0, [0.0, 1.0], 10.0, opts, None).unwrap();
        assert!((sol.y_end[0] - 10f64.sin()).abs() < 1e-9);
        for k in 0..100 {
            let t = 0.1 * k as f64 + 0.037;
            assert!((sol.eval(t)[0] - t.sin()).abs() < 1e-8, "{t}");
        }
        let back = integrate(|_, y| Ok([y[1], -y[0]]), 10.0, sol.y_end, 0.0, opts, None).unwrap();
        assert!(back.y_end[0].abs() < 1e-8 && (back.y_end[1] - 1.0).abs() < 1e-8);
        assert!((back.eval(5.0)[0] - 5f64.sin()).abs() < 1e-8);
    }

    #[test]
    fn event_is_located() {
        let g = |y: &[f64; 2]| y[0] - 0.5;
        let sol = integrate(|_, y| Ok([y[1], -y[0]]), 0.0, [0.0, 1.0], 10.0, OdeOptions::default(), Some(&g)).unwrap();
        assert!(sol.event);
        assert!((sol.t_end - std::f64::consts::FRAC_PI_6).abs() < 1e-10);
    }

    #[test]
    fn tolerance_convergence() {
        let run = |rtol: f64| {
            let opts = OdeOptions { rtol, atol: rtol * 1e-2, ..Default::default() };
            integrate(|_, y| Ok([y[0] * (1.0 - y[0])]), 0.0, [0.1], 5.0, opts, None).unwrap().y_end[0]
        };
        let exact = 1.0 / (1.0 + 9.0 * (-5f64).exp());
        for tol in [1e-8, 1e-10] {
            assert!((run(tol) - run(tol / 2.0)).abs() < 10.0 * tol);
            assert!((run(tol) - exact).abs() < 10.0 * tol);
        }
    }

    #[test]
    fn dense_midpoints_agree_with_fine_solves() {
        let f = |_: f64, y: &[f64; 2]| Ok([y[1], -y[0].sin()]);
        let tol = 1e-9;
        let sol = integrate(f, 0.0, [2.5, 0.0], 8.0, OdeOptions { rtol: tol, atol: tol, ..Default::default() }, None).unwrap();
        let fine = OdeOptions { rtol: 1e-13, atol: 1e-14, ..Default::default() };
        for s in sol.steps.iter().step_by(5) {
            let m = s.t0 + 0.5 * s.h;
            let from = sol.eval(s.t0);
            let r = integrate(f, s.t0, from, m, fine, None).unwrap().y_end;
            let d = sol.eval(m);
            assert!((r[0] - d[0]).abs() < 10.0 * tol * (1.0 + r[0].abs()));
        }
    }

    #[test]
    fn quadrature_on_knots() {
        let [v, w] = integrate_knots(|x| [x.sqrt(), x * x], &[0.0, 0.5, 1.0], 1e-12, 1e-14);
        assert!((v - 2.0 / 3.0).abs() < 1e-11 && (w - 1.0 / 3.0).abs() < 1e-14);
    }
}
