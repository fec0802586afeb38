//! Command-line driver. Every command writes one artifact (CSV or JSON) to
//! `--out` or stdout; diagnostics go to stderr.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 usage error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use scarlab::basis::{build_sector, transfer_count, Boundary, ConstrainedBasis};
use scarlab::dynamics::{fmt_sci, product_state, quench_series, Pattern, QuenchOptions};
use scarlab::flow::{fixed_points, FlowModel};
use scarlab::ops::{build_deformed, build_hamiltonian, build_pxp, ModelParams, SparseOperator};
use scarlab::orbit::{
    find_orbit, flow_grid, flow_grid_csv, polarized_orbit, sample_half_orbit, scan_h, trajectory_csv, OrbitOptions,
};
use scarlab::spectral::{all_sectors, diagonalize_sector};
use scarlab::thermal::ThermalReference;
use scarlab::Error;

/// Environment variable holding the worker-thread count.
const THREADS_VAR: &str = "SCARLAB_THREADS";

#[derive(Parser, Debug)]
#[command(name = "scarlab", version, about = "Constrained spin-s rings: exact dynamics, spectra and the two-angle variational flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BoundaryArg {
    Periodic,
    Open,
}

impl From<BoundaryArg> for Boundary {
    fn from(b: BoundaryArg) -> Self {
        match b {
            BoundaryArg::Periodic => Boundary::Periodic,
            BoundaryArg::Open => Boundary::Open,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StateArg {
    /// All sites in level 0.
    Zero,
    /// Top level on odd sites.
    Z2,
    /// Top level on even sites.
    Z2prime,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OrbitArg {
    /// Through the Néel corners.
    Z2,
    /// Along the symmetric line from (0, 0); integer s only.
    Zero,
}

/// Spin as "1/2", "1", "3/2", "2", … mapped to 2s.
fn parse_spin(s: &str) -> Result<u32, String> {
    let two_s = match s.split_once('/') {
        Some((num, "2")) => num.trim().parse::<u32>().map_err(|e| e.to_string())?,
        Some(_) => return Err(format!("spin '{s}' must be an integer or k/2")),
        None => 2 * s.trim().parse::<u32>().map_err(|e| e.to_string())?,
    };
    if two_s == 0 || two_s > 16 {
        return Err(format!("spin '{s}' outside 1/2..=8"));
    }
    Ok(two_s)
}

fn spin_label(two_s: u32) -> String {
    if two_s % 2 == 0 {
        format!("{}", two_s / 2)
    } else {
        format!("{two_s}/2")
    }
}

#[derive(clap::Args, Debug, Clone)]
struct Output {
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dimension of the constrained space and its symmetry sectors.
    Basis {
        #[arg(long = "L")]
        l: usize,
        /// Spin: 1/2, 1, 3/2, 2, …
        #[arg(long, value_parser = parse_spin, default_value = "1/2")]
        s: u32,
        #[arg(long, value_enum, default_value = "periodic")]
        boundary: BoundaryArg,
        /// Also list (k, parity) sector dimensions (periodic only).
        #[arg(long)]
        sectors: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Exact evolution of a product state; CSV of ⟨Sᶻᵢ⟩, fidelity and entropies.
    Quench {
        #[arg(long = "L")]
        l: usize,
        #[arg(long, value_parser = parse_spin, default_value = "1/2")]
        s: u32,
        #[arg(long, value_enum, default_value = "z2")]
        state: StateArg,
        #[arg(long, value_enum, default_value = "periodic")]
        boundary: BoundaryArg,
        #[arg(long, default_value_t = 1.0)]
        omega: f64,
        /// Next-nearest Sᶻ dressing (spin 1/2 only).
        #[arg(long, default_value_t = 0.0)]
        h: f64,
        #[arg(long, default_value_t = 20.0)]
        t_max: f64,
        #[arg(long, default_value_t = 0.05)]
        dt: f64,
        /// Skip the entanglement columns.
        #[arg(long)]
        no_entropy: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Eigenvalues in one (k, parity) sector, or in all of them.
    Spectrum {
        #[arg(long = "L")]
        l: usize,
        #[arg(long, value_parser = parse_spin, default_value = "1/2")]
        s: u32,
        #[arg(long, default_value_t = 1.0)]
        omega: f64,
        #[arg(long, default_value_t = 0.0)]
        h: f64,
        /// Momentum index; all sectors when omitted together with --parity.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        parity: Option<i8>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[command(flatten)]
        output: Output,
    },
    /// Mean gap ratio in one sector.
    Rstat {
        #[arg(long = "L")]
        l: usize,
        #[arg(long, value_parser = parse_spin, default_value = "1/2")]
        s: u32,
        #[arg(long, default_value_t = 0)]
        k: usize,
        #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
        parity: i8,
        #[arg(long, default_value_t = 1.0)]
        omega: f64,
        #[arg(long, default_value_t = 0.0)]
        h: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Velocity field and leakage on an n × n grid over [−π, π)², or the fixed points.
    Flow {
        #[arg(long, value_parser = parse_spin, default_value = "1/2")]
        s: u32,
        #[arg(long, default_value_t = 1.0)]
        omega: f64,
        #[arg(long, default_value_t = 0.0)]
        h: f64,
        #[arg(long, default_value_t = 64)]
        n: usize,
        /// Emit the fixed points as JSON instead of the grid.
        #[arg(long)]
        fixed_points: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Periodic orbit: period, integrated leakage, stability.
    Orbit {
        #[arg(long, value_parser = parse_spin, default_value = "1/2")]
        s: u32,
        #[arg(long, default_value_t = 1.0)]
        omega: f64,
        #[arg(long, default_value_t = 0.0)]
        h: f64,
        #[arg(long, value_enum, default_value = "z2")]
        orbit: OrbitArg,
        #[arg(long, default_value_t = 1e-10)]
        rtol: f64,
        /// Corner-bridging radius.
        #[arg(long, default_value_t = 1e-5)]
        delta_c: f64,
        /// Repeat at δ_c = 1e−4, 1e−5, 1e−6.
        #[arg(long)]
        sensitivity: bool,
        /// Write the half orbit as CSV here.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Orbit metrics of the dressed spin-1/2 flow over h ∈ [h_min, h_max].
    ScanH {
        #[arg(long, default_value_t = 1.0)]
        omega: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        h_min: f64,
        #[arg(long, default_value_t = 0.1)]
        h_max: f64,
        #[arg(long, default_value_t = 40)]
        n: usize,
        #[arg(long, default_value_t = 1e-10)]
        rtol: f64,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[command(flatten)]
        output: Output,
    },
    /// Infinite-temperature references.
    Thermal {
        #[arg(long, value_parser = parse_spin, default_value = "1/2")]
        s: u32,
        #[command(flatten)]
        output: Output,
    },
    /// Oracle suites: norm identity, gauge round trip, identity resolution, closed forms, γ brute force.
    Verify {
        #[arg(long)]
        quick: bool,
        #[command(flatten)]
        output: Output,
    },
}

/// A failure mapped to its exit code.
struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidArgument(_) | Error::Unsupported(_) => 2,
            _ => 1,
        };
        Failure { code, msg: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: 1, msg: e.to_string() }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure { code: 2, msg: msg.into() }
}

fn emit(output: &Output, body: &str) -> Result<(), Failure> {
    match &output.out {
        Some(p) => std::fs::write(p, body)?,
        None => print!("{body}"),
    }
    Ok(())
}

fn emit_json(output: &Output, v: &serde_json::Value) -> Result<(), Failure> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Failure { code: 1, msg: e.to_string() })?;
    s.push('\n');
    emit(output, &s)
}

fn params(omega: f64, h: f64) -> Result<ModelParams, Failure> {
    if !(omega > 0.0 && omega.is_finite()) || !h.is_finite() {
        return Err(usage("need omega > 0 and finite h"));
    }
    Ok(ModelParams { omega, h })
}

fn sparse_hamiltonian(basis: &ConstrainedBasis, p: ModelParams) -> Result<SparseOperator, Failure> {
    Ok(if p.h != 0.0 { build_deformed(basis, p)? } else { build_pxp(basis, p)? })
}

fn flow_model(two_s: u32, omega: f64, h: f64) -> Result<FlowModel, Failure> {
    let m = if h != 0.0 { FlowModel::deformed(omega, h) } else { FlowModel::pxp(two_s, omega) };
    if h != 0.0 && two_s != 1 {
        return Err(usage("the dressing h is defined for spin 1/2 only"));
    }
    m.validate()?;
    Ok(m)
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Basis { l, s, boundary, sectors, output } => {
            let b = ConstrainedBasis::new(l, s, boundary.into())?;
            let mut v = json!({
                "L": l,
                "s": spin_label(s),
                "two_s": s,
                "boundary": format!("{boundary:?}").to_lowercase(),
                "dim": b.len(),
                "transfer_count": transfer_count(l, s, boundary.into()),
            });
            if sectors {
                let labels: Vec<(usize, i8)> = (0..l).flat_map(|k| [(k, 1i8), (k, -1)]).collect();
                let dims: Vec<serde_json::Value> = labels
                    .par_iter()
                    .map(|&(k, p)| build_sector(&b, k, p).map(|sec| json!({"k": k, "parity": p, "dim": sec.dim()})))
                    .collect::<scarlab::Result<_>>()?;
                v["sectors"] = serde_json::Value::Array(dims);
            }
            emit_json(&output, &v)
        }
        Command::Quench { l, s, state, boundary, omega, h, t_max, dt, no_entropy, output } => {
            let b = ConstrainedBasis::new(l, s, boundary.into())?;
            let h_op = build_hamiltonian(&b, params(omega, h)?)?;
            let pattern = match state {
                StateArg::Zero => Pattern::AllZero,
                StateArg::Z2 => Pattern::Z2,
                StateArg::Z2prime => Pattern::Z2Prime,
            };
            let psi = product_state(&b, &pattern)?;
            let mut opts = QuenchOptions::new(t_max, dt);
            opts.entropies = !no_entropy;
            let series = quench_series(&b, &h_op, &psi, opts)?;
            emit(&output, &series.to_csv())
        }
        Command::Spectrum { l, s, omega, h, k, parity, format, output } => {
            let b = ConstrainedBasis::new(l, s, Boundary::Periodic)?;
            let op = sparse_hamiltonian(&b, params(omega, h)?)?;
            let data = match (k, parity) {
                (None, None) => all_sectors(&b, &op)?,
                (Some(k), Some(p)) => vec![diagonalize_sector(&b, &build_sector(&b, k, p)?, &op)?],
                _ => return Err(usage("give both --k and --parity, or neither")),
            };
            match format {
                Format::Json => emit_json(&output, &serde_json::to_value(&data).expect("serializable")),
                Format::Csv => {
                    let mut out = String::from("k,parity,energy\n");
                    for d in &data {
                        for e in &d.eigenvalues {
                            out += &format!("{},{},{}\n", d.k, d.parity, fmt_sci(*e));
                        }
                    }
                    emit(&output, &out)
                }
            }
        }
        Command::Rstat { l, s, k, parity, omega, h, output } => {
            let b = ConstrainedBasis::new(l, s, Boundary::Periodic)?;
            let op = sparse_hamiltonian(&b, params(omega, h)?)?;
            let d = diagonalize_sector(&b, &build_sector(&b, k, parity)?, &op)?;
            let r = d.r.ok_or_else(|| Failure { code: 1, msg: "fewer than three distinct levels".into() })?;
            emit_json(&output, &json!({"L": l, "s": spin_label(s), "k": k, "parity": parity, "dim": d.dim, "r": r}))
        }
        Command::Flow { s, omega, h, n, fixed_points: fp, output } => {
            let m = flow_model(s, omega, h)?;
            if fp {
                let pts = fixed_points(&m)?;
                emit_json(&output, &serde_json::to_value(&pts).expect("serializable"))
            } else {
                emit(&output, &flow_grid_csv(&flow_grid(&m, n)?))
            }
        }
        Command::Orbit { s, omega, h, orbit, rtol, delta_c, sensitivity, trajectory, samples, output } => {
            match orbit {
                OrbitArg::Zero => {
                    if h != 0.0 {
                        return Err(usage("the |0⟩ orbit is computed for the undressed flow"));
                    }
                    let d = polarized_orbit(s, omega)?;
                    emit_json(
                        &output,
                        &json!({
                            "s": spin_label(s),
                            "omega": omega,
                            "orbit": "zero",
                            "period": d.period,
                            "period_over_2pi": d.period * omega / (2.0 * std::f64::consts::PI),
                            "eps_c": d.eps,
                            "f_c": d.f,
                        }),
                    )
                }
                OrbitArg::Z2 => {
                    let m = flow_model(s, omega, h)?;
                    if !(rtol > 0.0 && delta_c > 0.0) {
                        return Err(usage("need rtol > 0 and delta_c > 0"));
                    }
                    let opts = OrbitOptions { rtol, delta_c, sensitivity, ..Default::default() };
                    let res = find_orbit(&m, &opts)?;
                    if let Some(path) = trajectory {
                        std::fs::write(path, trajectory_csv(&sample_half_orbit(&res, samples.max(2))))?;
                    }
                    emit_json(
                        &output,
                        &json!({
                            "s": spin_label(s),
                            "omega": omega,
                            "h": h,
                            "orbit": "z2",
                            "period": res.period,
                            "period_over_2pi": res.period_over_2pi(),
                            "eps_c": res.eps_c,
                            "f_c": res.f_c,
                            "closure": res.closure,
                            "delta_c": res.delta_c,
                            "monodromy_eigs": res.monodromy_eigs,
                            "sensitivity": res.sensitivity,
                            "stats": res.stats,
                        }),
                    )
                }
            }
        }
        Command::ScanH { omega, h_min, h_max, n, rtol, format, output } => {
            if n < 3 || !(h_max > h_min) {
                return Err(usage("need n >= 3 and h_max > h_min"));
            }
            let hs: Vec<f64> = (0..n).map(|k| h_min + (h_max - h_min) * k as f64 / (n - 1) as f64).collect();
            let opts = OrbitOptions { rtol, ..Default::default() };
            let res = scan_h(omega, &hs, &opts);
            match format {
                Format::Json => emit_json(&output, &serde_json::to_value(&res).expect("serializable")),
                Format::Csv => {
                    let f = |x: Option<f64>| x.map(fmt_sci).unwrap_or_default();
                    let mut out = String::from("h,period,eps_c,f_c,closure\n");
                    for r in &res.rows {
                        out += &format!("{},{},{},{},{}\n", fmt_sci(r.h), f(r.period), f(r.eps_c), f(r.f_c), f(r.closure));
                    }
                    emit(&output, &out)
                }
            }
        }
        Command::Thermal { s, output } => emit_json(&output, &ThermalReference::new(s)?.to_json()),
        Command::Verify { quick, output } => {
            let checks = scarlab::checks::suite(quick)?;
            let mut out = String::new();
            for c in &checks {
                out += &format!(
                    "{} {} (worst {:.3e}, tol {:.1e}, n = {})\n",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.worst,
                    c.tol,
                    c.samples
                );
            }
            emit(&output, &out)?;
            match checks.iter().filter(|c| !c.pass).count() {
                0 => Ok(()),
                n => Err(Failure { code: 1, msg: format!("{n} oracle check(s) failed") }),
            }
        }
    }
}

fn init_threads() -> Result<(), Failure> {
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v.parse().map_err(|_| usage(format!("{THREADS_VAR} must be a positive integer")))?;
        if n == 0 {
            return Err(usage(format!("{THREADS_VAR} must be a positive integer")));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure { code: 1, msg: e.to_string() })?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match init_threads().and_then(|_| run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
