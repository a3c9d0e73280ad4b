//! The five subcommands. Each returns its result data so it can be checked
//! without going through files.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{Format, Method, RunConfig, Setup};
use super::output::{num, write_csv, write_json, Provenance, Table};
use super::CliError;
use crate::analysis::{
    convergence_study, default_reference, degeneracy_gaps, extract_boundary_data, fit_connection_matrix,
    AnalysisError, BoundaryData, ConvergenceTable, FitReport, FitWindows, Probe,
};
use crate::connmat::{compose, decompose_general, ConnectionMatrix, FactorBranch};
use crate::exact::{self, BoxSystem, Interaction};
use crate::fdsolve::{self, sturm_count};
use crate::mat2::Mat2;
use crate::potential::{smear, RenormalizedFamily, UniformGrid};

/// Shared command-line context.
#[derive(Debug, Clone, Default)]
pub struct Context {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub format: Option<Format>,
    pub quiet: bool,
}

impl Context {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn format_or(&self, fallback: Option<Format>) -> Format {
        self.format.or(fallback).unwrap_or(Format::Csv)
    }
}

fn solver_error(e: impl ToString) -> CliError {
    CliError::Solver(e.to_string())
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn config_json(config: &RunConfig) -> Value {
    serde_json::to_value(config).unwrap_or(Value::Null)
}

// ---------------------------------------------------------------- spectrum

/// Eigenvalues and (optionally) sampled eigenfunctions of a configured box.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumResult {
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub x: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub psi: Vec<Vec<f64>>,
    /// Analytic boundary data; exact method only.
    #[serde(skip)]
    pub boundary: Vec<BoundaryData>,
}

pub fn solve(setup: &Setup, with_states: bool) -> Result<SpectrumResult, CliError> {
    let solver = setup.solver();
    let [lo, hi] = solver.energy_window;
    let tol = solver.tolerance;
    match setup.method() {
        Method::Exact => {
            let sys = setup.exact_system().map_err(CliError::Solver)?;
            let spec = exact::eigenvalues(&sys, (lo, hi), solver.max_states, tol).map_err(solver_error)?;
            let mut out = SpectrumResult {
                eigenvalues: spec.eigenvalues.clone(),
                residuals: spec.residuals.clone(),
                x: Vec::new(),
                psi: Vec::new(),
                boundary: Vec::new(),
            };
            if with_states {
                let grid = setup.grid().map_err(CliError::Solver)?;
                out.x = grid.points();
                for &e in &spec.eigenvalues {
                    let ef = exact::eigenfunction(&sys, e, &grid, tol).map_err(solver_error)?;
                    out.psi.push(ef.psi);
                    out.boundary.push(ef.boundary);
                }
            }
            Ok(out)
        }
        Method::Fd => {
            let op = setup.fd_operator().map_err(CliError::Solver)?;
            let available = op.size() - sturm_count(&op, lo);
            let m = solver.max_states.min(available);
            let values: Vec<f64> = if m == 0 {
                Vec::new()
            } else {
                fdsolve::eigenvalues_above(&op, lo, m, tol)
                    .map_err(solver_error)?
                    .into_iter()
                    .filter(|&e| e < hi)
                    .collect()
            };
            let pairs = fdsolve::eigenpairs(&op, &values, tol).map_err(solver_error)?;
            Ok(SpectrumResult {
                eigenvalues: values,
                residuals: pairs.iter().map(|p| p.residual).collect(),
                x: if with_states { op.points() } else { Vec::new() },
                psi: if with_states {
                    pairs.into_iter().map(|p| p.vector).collect()
                } else {
                    Vec::new()
                },
                boundary: Vec::new(),
            })
        }
    }
}

fn solver_meta(setup: &Setup) -> Value {
    let s = setup.solver();
    json!({
        "method": match s.method { Method::Exact => "exact", Method::Fd => "fd" },
        "tolerance": s.tolerance,
        "grid_points": s.grid_points,
        "energy_window": s.energy_window,
    })
}

pub fn cmd_spectrum(ctx: &Context, config: &Path) -> Result<SpectrumResult, CliError> {
    let cfg = RunConfig::load(config).map_err(|e| CliError::Config(e.to_string()))?;
    let setup = cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let format = ctx.format_or(setup.config.output.format);
    let result = solve(&setup, setup.solver().wavefunctions)?;
    let prov = Provenance::new("spectrum", ctx.seed, solver_meta(&setup), config_json(&setup.config));
    let default_name = match format {
        Format::Csv => "spectrum.csv",
        Format::Json => "spectrum.json",
    };
    let path = ctx
        .out
        .clone()
        .or_else(|| setup.config.output.path.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(default_name));
    match format {
        Format::Json => {
            let bundle = json!({ "provenance": prov, "result": result });
            write_json(&path, &bundle).map_err(|e| io_error(&path, e))?;
        }
        Format::Csv => {
            let mut t = Table::new(&["index", "energy", "residual"]);
            for (i, (e, r)) in result.eigenvalues.iter().zip(&result.residuals).enumerate() {
                t.push(vec![(i + 1).to_string(), num(*e), num(*r)]);
            }
            write_csv(&path, &t, &prov).map_err(|e| io_error(&path, e))?;
            if !result.psi.is_empty() {
                let states = sibling(&path, "_states");
                let mut header = vec!["x".to_string()];
                header.extend((1..=result.psi.len()).map(|i| format!("psi_{i}")));
                let mut t = Table {
                    header,
                    rows: Vec::new(),
                };
                for (j, &x) in result.x.iter().enumerate() {
                    let mut row = vec![num(x)];
                    row.extend(result.psi.iter().map(|p| num(p[j])));
                    t.push(row);
                }
                write_csv(&states, &t, &prov).map_err(|e| io_error(&states, e))?;
            }
        }
    }
    ctx.say(format!(
        "{} eigenvalue(s) written to {}",
        result.eigenvalues.len(),
        path.display()
    ));
    Ok(result)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

// ---------------------------------------------------------------- fig1

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fig1Params {
    pub c: f64,
    pub length: f64,
    pub a: f64,
    pub s: f64,
    pub n: usize,
}

impl Default for Fig1Params {
    fn default() -> Self {
        Fig1Params {
            c: 5.0,
            length: 10.0,
            a: 0.333,
            s: 0.012,
            n: 8191,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig1State {
    pub index: usize,
    pub fd: f64,
    pub exact_train: f64,
    pub reference_limit: f64,
    /// Boundary data of the finite-difference state at the outer spikes.
    pub boundary: BoundaryData,
    pub k: f64,
    pub scale: f64,
    /// `|ψ₊ - ψ₋ - 2cψ'₋| / scale`.
    pub jump: f64,
    /// Central-difference `|ψ'(0)| / (k·scale)`.
    pub center_slope: f64,
    #[serde(skip)]
    pub psi_fd: Vec<f64>,
    #[serde(skip)]
    pub psi_limit: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig1Data {
    pub params: Fig1Params,
    pub states: Vec<Fig1State>,
    #[serde(skip)]
    pub x: Vec<f64>,
    #[serde(skip)]
    pub potential: Vec<f64>,
}

const FIG1_STATES: usize = 4;
const FIG1_TOL: f64 = 1e-12;

pub fn fig1_data(p: &Fig1Params) -> Result<Fig1Data, CliError> {
    let family = RenormalizedFamily::Epsilon { c: p.c };
    let train = family.at(p.a).map_err(|e| CliError::Config(e.to_string()))?;
    let grid = UniformGrid::box_interior(p.length, p.n).map_err(|e| CliError::Config(e.to_string()))?;
    let pot = smear(&train, p.s, &grid).map_err(|e| CliError::Config(e.to_string()))?;
    let op = fdsolve::discretize(Some(&pot), p.length, p.n).map_err(solver_error)?;
    let fd = fdsolve::eigenvalues_above(&op, 0.0, FIG1_STATES, FIG1_TOL).map_err(solver_error)?;
    let pairs = fdsolve::eigenpairs(&op, &fd, FIG1_TOL).map_err(solver_error)?;

    let window = (0.0, fd[FIG1_STATES - 1].max(1.0) * 2.0);
    let train_sys = BoxSystem::dirichlet(p.length, Interaction::Train(train.clone())).map_err(solver_error)?;
    let exact_train = exact::eigenvalues(&train_sys, window, FIG1_STATES, FIG1_TOL).map_err(solver_error)?;
    let limit_sys = BoxSystem::dirichlet(
        p.length,
        Interaction::Point {
            matrix: family.target().map_err(|e| CliError::Config(e.to_string()))?,
            position: 0.0,
        },
    )
    .map_err(solver_error)?;
    let limit = exact::eigenvalues(&limit_sys, window, FIG1_STATES, FIG1_TOL).map_err(solver_error)?;
    if exact_train.len() < FIG1_STATES || limit.len() < FIG1_STATES {
        return Err(CliError::Solver("exact solver found fewer than four states".into()));
    }

    let x = grid.points();
    let h = grid.spacing;
    let windows = FitWindows::defaults(0.0, train.half_extent(), p.s, p.length);
    let mut states = Vec::with_capacity(FIG1_STATES);
    for (i, pair) in pairs.into_iter().enumerate() {
        let k = (2.0 * pair.value).sqrt();
        let boundary = extract_boundary_data(&x, &pair.vector, k, &windows).map_err(solver_error)?;
        let scale = boundary.scale(k);
        let ef = exact::eigenfunction(&limit_sys, limit.eigenvalues[i], &grid, FIG1_TOL).map_err(solver_error)?;
        let overlap: f64 = ef.psi.iter().zip(&pair.vector).map(|(a, b)| a * b).sum();
        let sign = if overlap < 0.0 { -1.0 } else { 1.0 };
        let psi_limit = ef.psi.iter().map(|v| sign * v).collect();
        states.push(Fig1State {
            index: i + 1,
            fd: pair.value,
            exact_train: exact_train.eigenvalues[i],
            reference_limit: limit.eigenvalues[i],
            boundary,
            k,
            scale,
            jump: boundary.epsilon_jump_residual(p.c) / scale,
            center_slope: center_slope(&pair.vector, h) / (k * scale),
            psi_fd: pair.vector,
            psi_limit,
        });
    }
    Ok(Fig1Data {
        params: *p,
        states,
        x,
        potential: pot.values,
    })
}

/// `|ψ'|` at the box center by central differences.
fn center_slope(psi: &[f64], h: f64) -> f64 {
    let n = psi.len();
    if n % 2 == 1 {
        let c = n / 2;
        ((psi[c + 1] - psi[c - 1]) / (2.0 * h)).abs()
    } else {
        ((psi[n / 2] - psi[n / 2 - 1]) / h).abs()
    }
}

pub fn cmd_fig1(ctx: &Context, p: &Fig1Params) -> Result<Fig1Data, CliError> {
    let data = fig1_data(p)?;
    let dir = ctx.out.clone().unwrap_or_else(|| PathBuf::from("fig1"));
    let solver = json!({ "method": "fd+exact", "tolerance": FIG1_TOL, "grid_points": p.n });
    let prov = Provenance::new("fig1", ctx.seed, solver, serde_json::to_value(p).unwrap_or(Value::Null));
    let write = |name: &str, t: &Table| {
        let path = dir.join(name);
        write_csv(&path, t, &prov).map_err(|e| io_error(&path, e))
    };

    let fd: Vec<f64> = data.states.iter().map(|s| s.fd).collect();
    let tr: Vec<f64> = data.states.iter().map(|s| s.exact_train).collect();
    let lim: Vec<f64> = data.states.iter().map(|s| s.reference_limit).collect();
    let gaps: Vec<_> = degeneracy_gaps(&fd)
        .into_iter()
        .zip(degeneracy_gaps(&tr))
        .zip(degeneracy_gaps(&lim))
        .map(|(((pair, g1), (_, g2)), (_, g3))| (pair, g1, g2, g3))
        .collect();

    if ctx.format == Some(Format::Json) {
        let path = dir.join("fig1.json");
        let states: Vec<Value> = data
            .states
            .iter()
            .map(|s| json!({ "summary": s, "psi_fd": s.psi_fd, "psi_limit": s.psi_limit }))
            .collect();
        let bundle = json!({
            "provenance": prov,
            "x": data.x,
            "potential": data.potential,
            "states": states,
            "gaps": gaps.iter().map(|g| json!({"pair": g.0, "fd": g.1, "exact_train": g.2, "reference_limit": g.3})).collect::<Vec<_>>(),
        });
        write_json(&path, &bundle).map_err(|e| io_error(&path, e))?;
    } else {
        let mut t = Table::new(&["index", "fd", "exact_train", "reference_limit"]);
        for s in &data.states {
            t.push(vec![s.index.to_string(), num(s.fd), num(s.exact_train), num(s.reference_limit)]);
        }
        write("eigenvalues.csv", &t)?;

        for s in &data.states {
            let mut t = Table::new(&["x", "psi_fd", "psi_limit"]);
            for (j, &x) in data.x.iter().enumerate() {
                t.push_numbers(&[x, s.psi_fd[j], s.psi_limit[j]]);
            }
            write(&format!("state{}.csv", s.index), &t)?;
        }

        let mut full = Table::new(&["x", "v"]);
        let mut zoom = Table::new(&["x", "v"]);
        let reach = 2.0 * p.a;
        for (&x, &v) in data.x.iter().zip(&data.potential) {
            full.push_numbers(&[x, v]);
            if x.abs() <= reach {
                zoom.push_numbers(&[x, v]);
            }
        }
        write("potential.csv", &full)?;
        write("potential_zoom.csv", &zoom)?;

        let mut t = Table::new(&["pair", "fd", "exact_train", "reference_limit"]);
        for (pair, g1, g2, g3) in &gaps {
            t.push(vec![pair.to_string(), num(*g1), num(*g2), num(*g3)]);
        }
        write("gaps.csv", &t)?;

        let mut t = Table::new(&[
            "index",
            "k",
            "psi_minus",
            "dpsi_minus",
            "psi_plus",
            "dpsi_plus",
            "scale",
            "jump",
            "center_slope",
        ]);
        for s in &data.states {
            let b = &s.boundary;
            t.push(vec![
                s.index.to_string(),
                num(s.k),
                num(b.psi_minus),
                num(b.dpsi_minus),
                num(b.psi_plus),
                num(b.dpsi_plus),
                num(s.scale),
                num(s.jump),
                num(s.center_slope),
            ]);
        }
        write("boundary.csv", &t)?;
    }
    for s in &data.states {
        ctx.say(format!(
            "E{} fd={:.6} train={:.6} limit={:.6}",
            s.index, s.fd, s.exact_train, s.reference_limit
        ));
    }
    Ok(data)
}

// ---------------------------------------------------------------- converge

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergeArgs {
    pub family: String,
    pub separations: Vec<f64>,
    pub probe: String,
    pub length: f64,
    pub window: (f64, f64),
    pub tolerance: f64,
}

pub fn parse_probe(spec: &str, length: f64, window: (f64, f64), tol: f64) -> Result<Probe, String> {
    let (kind, value) = spec
        .split_once(':')
        .ok_or_else(|| format!("probe {spec:?}: expected eigenvalue:N or transfer:E"))?;
    match kind.trim() {
        "eigenvalue" => {
            let index: usize = value
                .trim()
                .parse()
                .map_err(|_| format!("probe {spec:?}: bad eigenvalue index"))?;
            if index == 0 {
                return Err("probe: eigenvalue index starts at 1".into());
            }
            Ok(Probe::Eigenvalue {
                index,
                length,
                window,
                tol,
            })
        }
        "transfer" => {
            let energy: f64 = value.trim().parse().map_err(|_| format!("probe {spec:?}: bad energy"))?;
            if !energy.is_finite() {
                return Err("probe: energy must be finite".into());
            }
            Ok(Probe::TransferEntries { energy })
        }
        other => Err(format!("unknown probe kind {other:?} (eigenvalue, transfer)")),
    }
}

pub fn cmd_converge(ctx: &Context, args: &ConvergeArgs) -> Result<ConvergenceTable, CliError> {
    let family = super::config::parse_family(&args.family).map_err(|m| CliError::Config(format!("--family: {m}")))?;
    let probe = parse_probe(&args.probe, args.length, args.window, args.tolerance)
        .map_err(|m| CliError::Config(format!("--probe: {m}")))?;
    let reference = default_reference(&family, &probe).map_err(analysis_error)?;
    let table = convergence_study(&family, &args.separations, &reference, &probe).map_err(analysis_error)?;

    let format = ctx.format_or(None);
    let path = ctx.out.clone().unwrap_or_else(|| {
        PathBuf::from(match format {
            Format::Csv => "converge.csv",
            Format::Json => "converge.json",
        })
    });
    let prov = Provenance::new(
        "converge",
        ctx.seed,
        json!({ "method": "exact", "tolerance": args.tolerance }),
        json!({
            "family": args.family,
            "a": args.separations,
            "probe": args.probe,
            "length": args.length,
            "window": [args.window.0, args.window.1],
        }),
    );
    match format {
        Format::Json => {
            let bundle = json!({ "provenance": prov, "table": table, "monotone": table.is_monotone() });
            write_json(&path, &bundle).map_err(|e| io_error(&path, e))?;
        }
        Format::Csv => {
            let mut t = Table::new(&["a", "observable", "reference", "abs_error", "rel_error"]);
            for r in &table.rows {
                t.push_numbers(&[r.a, r.observable, r.reference, r.abs_error, r.rel_error]);
            }
            t.push(vec![
                "monotone".into(),
                table.is_monotone().to_string(),
                String::new(),
                String::new(),
                String::new(),
            ]);
            write_csv(&path, &t, &prov).map_err(|e| io_error(&path, e))?;
        }
    }
    for r in &table.rows {
        ctx.say(format!("a={} abs_error={:.3e} rel_error={:.3e}", r.a, r.abs_error, r.rel_error));
    }
    ctx.say(format!("monotone: {}", table.is_monotone()));
    Ok(table)
}

fn analysis_error(e: AnalysisError) -> CliError {
    match e {
        AnalysisError::InvalidSeparations => CliError::Config(format!("--a: {e}")),
        AnalysisError::ReferenceMismatch => CliError::Config(format!("--probe: {e}")),
        AnalysisError::Potential(p) => CliError::Config(format!("--family: {p}")),
        AnalysisError::DegenerateInputs => CliError::Degenerate(format!("{e}")),
        other => CliError::Solver(other.to_string()),
    }
}

// ---------------------------------------------------------------- verify

pub const VERIFY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchReport {
    pub branch: &'static str,
    pub trials: usize,
    pub max_error: f64,
    /// Parameters `(α, β, γ, δ)` of the worst case.
    pub worst: [f64; 4],
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PinnedReport {
    pub parameters: [f64; 4],
    pub matrix: [[f64; 2]; 2],
    pub expected: [[f64; 2]; 2],
    pub matrix_error: f64,
    pub product_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub trials: usize,
    pub tolerance: f64,
    pub branches: Vec<BranchReport>,
    /// Relative associativity error of composition, `(AB)C` against `A(BC)`.
    pub composition: BranchReport,
    pub pinned: PinnedReport,
    pub pass: bool,
}

fn magnitude(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let m = rng.random_range(lo..hi);
    if rng.random_bool(0.5) {
        -m
    } else {
        m
    }
}

/// A random unit-determinant matrix that falls in `branch`.
pub fn random_connection(rng: &mut ChaCha8Rng, branch: FactorBranch) -> ConnectionMatrix {
    let (alpha, beta, gamma, delta) = match branch {
        FactorBranch::DeltaNonzero | FactorBranch::Identity => {
            let alpha = rng.random_range(-3.0..3.0);
            let gamma = rng.random_range(-3.0..3.0);
            let delta = magnitude(rng, 0.1, 3.0);
            (alpha, (alpha * gamma - 1.0) / delta, gamma, delta)
        }
        FactorBranch::BetaNonzero => {
            let alpha = magnitude(rng, 0.2, 3.0);
            (alpha, magnitude(rng, 0.1, 3.0), 1.0 / alpha, 0.0)
        }
        FactorBranch::Diagonal { alpha_negative } => {
            let m = rng.random_range(0.2..5.0);
            let alpha = if alpha_negative { -m } else { m };
            (alpha, 0.0, 1.0 / alpha, 0.0)
        }
    };
    ConnectionMatrix::make_connection(alpha, beta, gamma, delta).expect("unit determinant by construction")
}

fn branch_suite(rng: &mut ChaCha8Rng, name: &'static str, branch: FactorBranch, trials: usize) -> BranchReport {
    let mut worst = (0.0, [0.0; 4]);
    for _ in 0..trials {
        let t = random_connection(rng, branch);
        let f = decompose_general(&t);
        let err = if f.branch == branch {
            f.product().max_abs_diff(&t.matrix())
        } else {
            f64::INFINITY
        };
        if !(err <= worst.0) {
            worst = (err, t.parameters());
        }
    }
    BranchReport {
        branch: name,
        trials,
        max_error: worst.0,
        worst: worst.1,
        pass: worst.0 < VERIFY_TOL,
    }
}

pub fn verify_report(seed: u64, trials: usize) -> VerifyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let branches = vec![
        branch_suite(&mut rng, "delta_nonzero", FactorBranch::DeltaNonzero, trials),
        branch_suite(&mut rng, "beta_nonzero", FactorBranch::BetaNonzero, trials),
        branch_suite(
            &mut rng,
            "diagonal_alpha_negative",
            FactorBranch::Diagonal { alpha_negative: true },
            trials,
        ),
        branch_suite(
            &mut rng,
            "diagonal_alpha_positive",
            FactorBranch::Diagonal { alpha_negative: false },
            trials,
        ),
    ];

    let mut worst = (0.0, [0.0; 4]);
    for _ in 0..trials {
        let a = random_connection(&mut rng, FactorBranch::DeltaNonzero);
        let b = random_connection(&mut rng, FactorBranch::BetaNonzero);
        let c = random_connection(&mut rng, FactorBranch::Diagonal { alpha_negative: true });
        let left = compose(&compose(&a, &b), &c).matrix();
        let right = compose(&a, &compose(&b, &c)).matrix();
        let expected = c.matrix() * b.matrix() * a.matrix();
        let scale = expected.max_abs().max(1.0);
        let err = left.max_abs_diff(&right).max(left.max_abs_diff(&expected)) / scale;
        if !(err <= worst.0) {
            worst = (err, a.parameters());
        }
    }
    let composition = BranchReport {
        branch: "composition",
        trials,
        max_error: worst.0,
        worst: worst.1,
        pass: worst.0 < VERIFY_TOL,
    };

    let parameters = [-2.0, 1.0, -1.0, 1.0];
    let expected = [[2.0, -1.0], [-1.0, 1.0]];
    let pinned = match ConnectionMatrix::make_connection(-2.0, 1.0, -1.0, 1.0) {
        Ok(t) => {
            let matrix_error = t.matrix().max_abs_diff(&Mat2(expected));
            let product_error = decompose_general(&t).product().max_abs_diff(&t.matrix());
            PinnedReport {
                parameters,
                matrix: t.matrix().0,
                expected,
                matrix_error,
                product_error,
                pass: matrix_error < VERIFY_TOL && product_error < VERIFY_TOL,
            }
        }
        Err(_) => PinnedReport {
            parameters,
            matrix: [[f64::NAN; 2]; 2],
            expected,
            matrix_error: f64::INFINITY,
            product_error: f64::INFINITY,
            pass: false,
        },
    };
    let pass = branches.iter().all(|b| b.pass) && composition.pass && pinned.pass;
    VerifyReport {
        seed,
        trials,
        tolerance: VERIFY_TOL,
        branches,
        composition,
        pinned,
        pass,
    }
}

pub fn cmd_verify(ctx: &Context, trials: usize) -> Result<VerifyReport, CliError> {
    if trials == 0 {
        return Err(CliError::Config("--trials: must be at least 1".into()));
    }
    let seed = ctx.seed.unwrap_or(1);
    let report = verify_report(seed, trials);
    let path = ctx.out.clone().unwrap_or_else(|| PathBuf::from("verify.json"));
    let prov = Provenance::new(
        "verify",
        Some(seed),
        json!({ "tolerance": VERIFY_TOL }),
        json!({ "trials": trials }),
    );
    write_json(&path, &json!({ "provenance": prov, "report": report })).map_err(|e| io_error(&path, e))?;
    for b in report.branches.iter().chain([&report.composition]) {
        ctx.say(format!(
            "{:<24} max_error={:.3e} {}",
            b.branch,
            b.max_error,
            if b.pass { "ok" } else { "FAIL" }
        ));
    }
    ctx.say(format!(
        "pinned (-2,1,-1,1)       error={:.3e} {}",
        report.pinned.matrix_error.max(report.pinned.product_error),
        if report.pinned.pass { "ok" } else { "FAIL" }
    ));
    if !report.pass {
        return Err(CliError::Property(format!(
            "identity check exceeded {VERIFY_TOL:e}; see {}",
            path.display()
        )));
    }
    Ok(report)
}

// ---------------------------------------------------------------- extract

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtractResult {
    pub eigenvalues: Vec<f64>,
    pub boundary: Vec<BoundaryData>,
    pub fit: FitReport,
    pub parameters: [f64; 4],
    pub target: Option<[[f64; 2]; 2]>,
    pub target_parameters: Option<[f64; 4]>,
    pub deviations: Option<[[f64; 2]; 2]>,
    /// Elementwise `|fitted - target| / |target|` over `(α, β, γ, δ)`.
    pub parameter_rel_deviations: Option<[f64; 4]>,
}

pub fn extract(setup: &Setup, states: usize) -> Result<ExtractResult, CliError> {
    if states < 2 {
        return Err(CliError::Config("--states: need at least 2".into()));
    }
    let mut setup = setup.clone();
    setup.config.solver.max_states = states;
    let solved = solve(&setup, true)?;
    if solved.eigenvalues.len() < states {
        return Err(CliError::Solver(format!(
            "found {} states in the energy window, need {states}",
            solved.eigenvalues.len()
        )));
    }
    let boundary = match setup.method() {
        Method::Exact => solved.boundary.clone(),
        Method::Fd => {
            let (x0, edge) = setup.defect_geometry();
            let w = FitWindows::defaults(x0, edge, setup.config.interaction.s, setup.length());
            solved
                .eigenvalues
                .iter()
                .zip(&solved.psi)
                .map(|(&e, psi)| {
                    if e <= 0.0 {
                        return Err(CliError::Solver(format!("cannot fit a state with E = {e} <= 0")));
                    }
                    extract_boundary_data(&solved.x, psi, (2.0 * e).sqrt(), &w).map_err(analysis_error)
                })
                .collect::<Result<Vec<_>, _>>()?
        }
    };
    let fit = fit_connection_matrix(&boundary).map_err(|e| match e {
        AnalysisError::DegenerateInputs => CliError::Degenerate(format!("{e}; increase --states")),
        other => analysis_error(other),
    })?;
    let target = setup.target();
    let parameters = fit.parameters();
    let deviations = target.map(|t| {
        let d = fit.matrix().0;
        let m = t.matrix().0;
        [[d[0][0] - m[0][0], d[0][1] - m[0][1]], [d[1][0] - m[1][0], d[1][1] - m[1][1]]]
    });
    let parameter_rel_deviations = target.map(|t| {
        let want = t.parameters();
        let mut out = [0.0; 4];
        for i in 0..4 {
            let d = (parameters[i] - want[i]).abs();
            out[i] = if want[i] != 0.0 { d / want[i].abs() } else { d };
        }
        out
    });
    Ok(ExtractResult {
        eigenvalues: solved.eigenvalues,
        boundary,
        fit,
        parameters,
        target: target.map(|t| t.matrix().0),
        target_parameters: target.map(|t| t.parameters()),
        deviations,
        parameter_rel_deviations,
    })
}

pub fn cmd_extract(ctx: &Context, config: &Path, states: usize) -> Result<ExtractResult, CliError> {
    let cfg = RunConfig::load(config).map_err(|e| CliError::Config(e.to_string()))?;
    let setup = cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let result = extract(&setup, states)?;
    let path = ctx
        .out
        .clone()
        .or_else(|| setup.config.output.path.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("extract.json"));
    let prov = Provenance::new("extract", ctx.seed, solver_meta(&setup), config_json(&setup.config));
    write_json(&path, &json!({ "provenance": prov, "result": result })).map_err(|e| io_error(&path, e))?;
    let [a, b, g, d] = result.parameters;
    ctx.say(format!(
        "fitted alpha={a:.6} beta={b:.6} gamma={g:.6} delta={d:.6} residual={:.2e} |det-1|={:.2e}",
        result.fit.residual, result.fit.det_deviation
    ));
    Ok(result)
}
