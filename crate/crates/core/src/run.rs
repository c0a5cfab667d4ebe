//! End-to-end pipeline: classical oracle, history build, solve, block
//! extraction, moment measurement and CSV emission.

use std::fs::{self, File};
use std::io::Write;
use std::path::Path;

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::chemistry::{find_equilibria, Equilibrium, Stability};
use crate::config::{RunConfig, SolverMode};
use crate::error::{Result, ResultExt};
use crate::fokker_planck::{
    assemble_transport_operator, build_grid, evolve_classical, grid_mean_variance, init_beta,
    write_trajectory_csv, CompositionGrid, DiscretePdf, TransportOperator,
};
use crate::history_state::{
    assemble_history_system, condition_estimate, solve_ideal, HistoryLinearSystem,
};
use crate::moment_meas::{
    compile_phase_unitary, compile_zstrings, fit_beta, gate_count, phase_profile,
    walsh_coefficients, BlockSelection, CountMode, MomentEstimator, ProgramMode, Readout,
};
use crate::qlsa::hhl_solve;
use crate::qsim::{prepare_real, QuantumState};

/// Denominator floor for relative errors.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-12;

/// Solver diagnostics, one row of `run_summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSummary {
    pub mode: SolverMode,
    pub n_system: usize,
    pub clock: Option<usize>,
    pub t0: Option<f64>,
    pub c: Option<f64>,
    pub success_prob: Option<f64>,
    pub fidelity: Option<f64>,
    pub kappa: Option<f64>,
}

impl SolverSummary {
    pub fn empty(cfg: &RunConfig) -> Self {
        Self {
            mode: cfg.solver,
            n_system: cfg.n_t_qubits + cfg.n_phi_qubits,
            clock: None,
            t0: None,
            c: None,
            success_prob: None,
            fidelity: None,
            kappa: None,
        }
    }
}

/// Mean and variance in one time block from every route.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockRow {
    pub time: f64,
    pub exact: (f64, f64),
    /// One entry per configured order.
    pub approx: Vec<(f64, f64)>,
    pub oracle: (f64, f64),
}

/// Relative errors averaged over time blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSummary {
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateCountRow {
    pub n: usize,
    pub exact: u128,
    pub approx: Vec<u128>,
}

/// Compiled CNOT/Rz tallies next to the closed-form counts.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledCountRow {
    pub n: usize,
    pub exact_cnot: usize,
    pub exact_rz: usize,
    pub exact_formula: u128,
    /// Compiled `(cnot, rz)`, absent when the order exceeds the register,
    /// and the formula count, per order.
    pub approx: Vec<(Option<(usize, usize)>, u128)>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub config: RunConfig,
    pub grid: CompositionGrid,
    pub equilibria: Vec<Equilibrium>,
    pub oracle_trajectory: Vec<DiscretePdf>,
    pub solver_blocks: Vec<DiscretePdf>,
    pub summary: SolverSummary,
    pub rows: Vec<BlockRow>,
    /// Errors of each order against the exact-operator measurement.
    pub errors_vs_exact: Vec<ErrorSummary>,
    /// Errors of each order, then of the exact operator, against the oracle.
    pub errors_vs_oracle: Vec<ErrorSummary>,
    pub gate_counts: Vec<GateCountRow>,
    pub compiled_counts: Vec<CompiledCountRow>,
}

impl RunReport {
    /// Largest stable drift root.
    pub fn stable_root(&self) -> Option<f64> {
        self.equilibria
            .iter()
            .filter(|e| e.stability == Stability::Stable)
            .map(|e| e.location)
            .reduce(f64::max)
    }
}

pub fn relative_error(x: f64, oracle: f64) -> f64 {
    (x - oracle).abs() / oracle.abs().max(RELATIVE_ERROR_FLOOR)
}

fn averaged_errors(pairs: impl Iterator<Item = ((f64, f64), (f64, f64))>) -> ErrorSummary {
    let (mut sm, mut sv, mut k) = (0.0, 0.0, 0usize);
    for ((m, v), (mo, vo)) in pairs {
        sm += relative_error(m, mo);
        sv += relative_error(v, vo);
        k += 1;
    }
    ErrorSummary {
        mean: sm / k as f64,
        variance: sv / k as f64,
    }
}

/// Transport operator, initial PDF and history system for a config.
pub fn build_problem(
    cfg: &RunConfig,
) -> Result<(
    CompositionGrid,
    DiscretePdf,
    TransportOperator,
    HistoryLinearSystem,
)> {
    let grid = build_grid(cfg.n_phi_qubits)?;
    let op = assemble_transport_operator(&grid, &cfg.psr())?;
    let f0 = init_beta(&grid, cfg.beta_a, cfg.beta_b)?;
    let sys = assemble_history_system(&op, &f0, cfg.dt, cfg.n_t_qubits)?;
    Ok((grid, f0, op, sys))
}

/// Solver output as a history-state vector plus diagnostics. Classical mode
/// loads the backward-Euler trajectory `classical` directly.
pub fn solve(
    cfg: &RunConfig,
    sys: &HistoryLinearSystem,
    classical: &[DiscretePdf],
) -> Result<(QuantumState, SolverSummary)> {
    let mut summary = SolverSummary::empty(cfg);
    summary.kappa = Some(condition_estimate(sys).context("condition estimate")?.kappa);
    let state = match cfg.solver {
        SolverMode::Classical => {
            let flat: Vec<f64> = classical
                .iter()
                .flat_map(|f| f.values.iter().copied())
                .collect();
            prepare_real(&flat)?
        }
        SolverMode::Ideal => {
            summary.fidelity = Some(1.0);
            prepare_real(&solve_ideal(sys)?.values)?
        }
        SolverMode::Hhl => {
            let r = hhl_solve(sys, &cfg.hhl()).context("HHL solve")?;
            summary.clock = Some(r.clock_qubits);
            summary.t0 = Some(r.t0);
            summary.c = Some(r.c);
            summary.success_prob = Some(r.success_probability);
            summary.fidelity = Some(r.fidelity_vs_reference);
            r.solution_state
        }
    };
    Ok((state, summary))
}

/// Per-block PDFs of a history-state vector, each rescaled to unit integral.
pub fn state_blocks(state: &QuantumState, n_cells: usize) -> Result<Vec<DiscretePdf>> {
    state
        .real_parts()
        .chunks(n_cells)
        .map(|c| DiscretePdf::new(c.to_vec(), 1.0 / n_cells as f64).normalized())
        .collect()
}

pub fn gate_count_table(n_max: usize, orders: &[usize]) -> Result<Vec<GateCountRow>> {
    (1..=n_max)
        .map(|n| {
            Ok(GateCountRow {
                n,
                exact: gate_count(n, CountMode::Exact)?,
                approx: orders
                    .iter()
                    .map(|&m| gate_count(n, CountMode::Approx(m)))
                    .collect::<Result<_>>()?,
            })
        })
        .collect()
}

/// Write the closed-form gate-count table as CSV.
pub fn emit_gate_count_table<W: Write>(out: W, n_max: usize, orders: &[usize]) -> Result<()> {
    let rows = gate_count_table(n_max, orders)?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["n".to_string(), "exact_count".to_string()];
    header.extend(orders.iter().map(|m| format!("approx_m{m}")));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.n.to_string(), r.exact.to_string()];
        rec.extend(r.approx.iter().map(u128::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Compile `q = phi` programs for every register size up to `n_max` and
/// tally the gates.
///
/// The exact program's Z-string coefficients come from the Walsh-Hadamard
/// transform of the phases, which coincides with the expansion of the
/// interpolating polynomial and stays cheap beyond five qubits. Orders that
/// do not fit on a register are not compiled.
pub fn compiled_count_table(n_max: usize, orders: &[usize]) -> Result<Vec<CompiledCountRow>> {
    let mut rows = Vec::new();
    for n in 1..=n_max {
        let cells = 1usize << n;
        let q: Vec<f64> = (0..cells)
            .map(|j| (j as f64 + 0.5) / cells as f64)
            .collect();
        let profile = phase_profile(&q, "phi")?;
        let exact = compile_zstrings(&walsh_coefficients(&profile.theta)?)?;
        let mut approx = Vec::new();
        for &m in orders {
            let formula = gate_count(n, CountMode::Approx(m))?;
            if m >= cells {
                approx.push((None, formula));
                continue;
            }
            let prog = compile_phase_unitary(&fit_beta(&profile, m)?, ProgramMode::Approx(m), n)?;
            approx.push((Some((prog.cnot_count(), prog.rz_count())), formula));
        }
        rows.push(CompiledCountRow {
            n,
            exact_cnot: exact.count("cnot"),
            exact_rz: exact.count("rz"),
            exact_formula: gate_count(n, CountMode::Exact)?,
            approx,
        });
    }
    Ok(rows)
}

fn write_compiled_counts(path: &Path, rows: &[CompiledCountRow], orders: &[usize]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = [
        "n",
        "exact_cnot",
        "exact_rz",
        "exact_compiled",
        "exact_formula",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for m in orders {
        header.extend([
            format!("approx_m{m}_cnot"),
            format!("approx_m{m}_rz"),
            format!("approx_m{m}_compiled"),
            format!("approx_m{m}_formula"),
        ]);
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.n.to_string(),
            r.exact_cnot.to_string(),
            r.exact_rz.to_string(),
            (r.exact_cnot + r.exact_rz).to_string(),
            r.exact_formula.to_string(),
        ];
        for &(compiled, f) in &r.approx {
            match compiled {
                Some((c, z)) => {
                    rec.extend([c.to_string(), z.to_string(), (c + z).to_string()]);
                }
                None => rec.extend([String::new(), String::new(), String::new()]),
            }
            rec.push(f.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Write `run_summary.csv` with a trailing status column.
pub fn write_run_summary(path: &Path, summary: &SolverSummary, status: &str) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "mode",
        "n_system",
        "clock",
        "t0",
        "c",
        "success_prob",
        "fidelity",
        "kappa",
        "status",
    ])?;
    w.write_record([
        summary.mode.as_str().to_string(),
        summary.n_system.to_string(),
        summary.clock.map(|c| c.to_string()).unwrap_or_default(),
        opt(summary.t0),
        opt(summary.c),
        opt(summary.success_prob),
        opt(summary.fidelity),
        opt(summary.kappa),
        status.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

/// Measure mean and variance of every block with the exact program and each
/// configured order.
pub fn measure_blocks(
    cfg: &RunConfig,
    grid: &CompositionGrid,
    state: &QuantumState,
    oracle: &[DiscretePdf],
) -> Result<Vec<BlockRow>> {
    let readout = if cfg.shots == 0 {
        Readout::Exact
    } else {
        Readout::Shots(cfg.shots)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let exact = MomentEstimator::new(&grid.centers, ProgramMode::Exact)?;
    let approx: Vec<MomentEstimator> = cfg
        .orders
        .iter()
        .map(|&m| MomentEstimator::new(&grid.centers, ProgramMode::Approx(m)))
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(cfg.n_blocks());
    for k in 0..cfg.n_blocks() {
        let sel = Some(BlockSelection {
            time_qubits: cfg.n_t_qubits,
            block: k,
        });
        let mut measure = |est: &MomentEstimator| {
            est.block_moments(state, sel, readout, &mut rng)
                .map(|m| (m.mean, m.variance))
                .context(format!("block {k}, {} program", est.mode))
        };
        let e = measure(&exact)?;
        let a = approx
            .iter()
            .map(&mut measure)
            .collect::<Result<Vec<_>>>()?;
        rows.push(BlockRow {
            time: k as f64 * cfg.dt,
            exact: e,
            approx: a,
            oracle: grid_mean_variance(&oracle[k], grid),
        });
    }
    Ok(rows)
}

/// Write `moments.csv`, one row per time block.
pub fn write_moments(path: &Path, rows: &[BlockRow], orders: &[usize]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["time".to_string(), "mean_exact".into(), "var_exact".into()];
    for m in orders {
        header.extend([format!("mean_m{m}"), format!("var_m{m}")]);
    }
    header.extend(["mean_oracle".to_string(), "var_oracle".to_string()]);
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.time.to_string(),
            r.exact.0.to_string(),
            r.exact.1.to_string(),
        ];
        for (m, v) in &r.approx {
            rec.extend([m.to_string(), v.to_string()]);
        }
        rec.extend([r.oracle.0.to_string(), r.oracle.1.to_string()]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn run_stages(cfg: &RunConfig, summary: &mut SolverSummary) -> Result<RunReport> {
    let out = &cfg.output_dir;
    let (grid, f0, op, sys) = build_problem(cfg).context("building the problem")?;
    let equilibria = find_equilibria(&cfg.psr(), 1e-12)?;
    let oracle = evolve_classical(&f0, &op, cfg.dt, cfg.n_steps()).context("classical oracle")?;
    info!(
        "history system: N = {}, nnz = {}, {} blocks",
        sys.dim(),
        sys.nnz(),
        sys.n_blocks()
    );

    let (state, s) = solve(cfg, &sys, &oracle)?;
    *summary = s;
    let blocks = state_blocks(&state, grid.n_cells).context("block extraction")?;
    write_trajectory_csv(
        File::create(out.join("pdf_evolution.csv"))?,
        &grid,
        &blocks,
        cfg.dt,
    )?;

    let rows = if cfg.measure {
        let rows = measure_blocks(cfg, &grid, &state, &oracle)?;
        write_moments(&out.join("moments.csv"), &rows, &cfg.orders)?;
        rows
    } else {
        Vec::new()
    };
    let errors_vs_exact = (0..cfg.orders.len())
        .map(|i| averaged_errors(rows.iter().map(|r| (r.approx[i], r.exact))))
        .collect();
    let mut errors_vs_oracle: Vec<ErrorSummary> = (0..cfg.orders.len())
        .map(|i| averaged_errors(rows.iter().map(|r| (r.approx[i], r.oracle))))
        .collect();
    errors_vs_oracle.push(averaged_errors(rows.iter().map(|r| (r.exact, r.oracle))));

    emit_gate_count_table(
        File::create(out.join("gate_counts.csv"))?,
        cfg.gate_count_n_max,
        &cfg.orders,
    )?;
    let gate_counts = gate_count_table(cfg.gate_count_n_max, &cfg.orders)?;
    let compiled_counts = compiled_count_table(cfg.compiled_count_n_max, &cfg.orders)?;
    write_compiled_counts(
        &out.join("gate_counts_compiled.csv"),
        &compiled_counts,
        &cfg.orders,
    )?;

    Ok(RunReport {
        config: cfg.clone(),
        grid,
        equilibria,
        oracle_trajectory: oracle,
        solver_blocks: blocks,
        summary: summary.clone(),
        rows,
        errors_vs_exact,
        errors_vs_oracle,
        gate_counts,
        compiled_counts,
    })
}

/// Run every stage and write all outputs into `cfg.output_dir`.
/// `run_summary.csv` is written even when a stage fails.
pub fn run_end_to_end(cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.output_dir)?;
    let mut summary = SolverSummary::empty(cfg);
    let result = run_stages(cfg, &mut summary);
    let status = match &result {
        Ok(_) => "ok".to_string(),
        Err(e) => format!("error: {e}"),
    };
    let written = write_run_summary(&cfg.output_dir.join("run_summary.csv"), &summary, &status);
    let report = result?;
    written?;
    Ok(report)
}
