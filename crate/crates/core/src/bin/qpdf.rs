use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info};
use rayon::prelude::*;

use qpdf::config::{RunConfig, SolverMode};
use qpdf::fokker_planck::{evolve_classical, write_trajectory_csv};
use qpdf::history_state::condition_estimate;
use qpdf::run::{
    build_problem, compiled_count_table, emit_gate_count_table, measure_blocks, run_end_to_end,
    solve, write_moments, write_run_summary, RunReport, SolverSummary,
};
use qpdf::{chemistry, Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "qpdf",
    version,
    about = "History-state PDF transport and moment measurement"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Flat TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set dt=0.1`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl Common {
    fn load(&self, mode: Option<SolverMode>) -> Result<RunConfig> {
        let mut overrides = self.overrides.clone();
        if let Some(m) = mode {
            overrides.push(format!("solver=\"{}\"", m.as_str()));
        }
        if let Some(d) = &self.out_dir {
            overrides.push(format!("output_dir={:?}", d.display().to_string()));
        }
        let cfg = RunConfig::load(self.config.as_deref(), &overrides)?;
        fs::create_dir_all(&cfg.output_dir)?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// March the backward-Euler scheme and write pdf_evolution.csv.
    EvolveClassical(Common),
    /// Assemble the history system and write it in coordinate format.
    BuildHistory(Common),
    /// Solve the history system and write solution.csv.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<SolverMode>,
    },
    /// Solve, then measure block means and variances into moments.csv.
    Measure {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<SolverMode>,
    },
    /// Write closed-form and compiled gate-count tables.
    GateCount(Common),
    /// Run the whole pipeline from a configuration file.
    EndToEnd {
        #[command(flatten)]
        common: Common,
    },
    /// Run the pipeline once per value of one configuration key, in parallel.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Key to vary.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
}

fn parse_mode(s: &str) -> std::result::Result<SolverMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::EvolveClassical(common) => evolve(&common.load(None)?),
        Command::BuildHistory(common) => build_history(&common.load(None)?),
        Command::Solve { common, mode } => solve_only(&common.load(mode)?),
        Command::Measure { common, mode } => measure(&common.load(mode)?),
        Command::GateCount(common) => gate_counts(&common.load(None)?),
        Command::EndToEnd { common } => {
            if common.config.is_none() {
                return Err(Error::Config("end-to-end requires --config <path>".into()));
            }
            let report = run_end_to_end(&common.load(None)?)?;
            print_report(&report);
            Ok(())
        }
        Command::Sweep {
            common,
            param,
            values,
        } => sweep(&common, &param, &values),
    }
}

fn evolve(cfg: &RunConfig) -> Result<()> {
    let (grid, f0, op, _) = build_problem(cfg)?;
    let traj = evolve_classical(&f0, &op, cfg.dt, cfg.n_steps())?;
    let path = cfg.output_dir.join("pdf_evolution.csv");
    write_trajectory_csv(BufWriter::new(File::create(&path)?), &grid, &traj, cfg.dt)?;
    for e in chemistry::find_equilibria(&cfg.psr(), 1e-12)? {
        info!(
            "equilibrium at phi = {:.10} ({:?})",
            e.location, e.stability
        );
    }
    let peak = traj
        .last()
        .map(|f| grid.centers[f.peak_cell()])
        .unwrap_or(f64::NAN);
    info!("final peak at phi = {peak:.6}; wrote {}", path.display());
    Ok(())
}

fn build_history(cfg: &RunConfig) -> Result<()> {
    let (_, _, _, sys) = build_problem(cfg)?;
    sys.write_matrix(BufWriter::new(File::create(
        cfg.output_dir.join("history_matrix.txt"),
    )?))?;
    sys.write_rhs(BufWriter::new(File::create(
        cfg.output_dir.join("history_rhs.txt"),
    )?))?;
    let cond = condition_estimate(&sys)?;
    println!(
        "N = {}, nnz = {}, density = {:.3e}, max row nnz = {}, kappa ~ {:.4e}",
        sys.dim(),
        sys.nnz(),
        sys.density(),
        sys.max_row_nnz(),
        cond.kappa
    );
    Ok(())
}

fn solve_only(cfg: &RunConfig) -> Result<()> {
    let (_, f0, op, sys) = build_problem(cfg)?;
    let traj = evolve_classical(&f0, &op, cfg.dt, cfg.n_steps())?;
    let summary_path = cfg.output_dir.join("run_summary.csv");
    match solve(cfg, &sys, &traj) {
        Ok((state, summary)) => {
            let mut w = csv::Writer::from_path(cfg.output_dir.join("solution.csv"))?;
            w.write_record(["index", "value"])?;
            for (i, v) in state.real_parts().iter().enumerate() {
                w.write_record([i.to_string(), v.to_string()])?;
            }
            w.flush()?;
            write_run_summary(&summary_path, &summary, "ok")?;
            info!("{:?}", summary);
            Ok(())
        }
        Err(e) => {
            let mut summary = SolverSummary::empty(cfg);
            summary.clock = (cfg.solver == SolverMode::Hhl).then_some(cfg.clock_qubits);
            write_run_summary(&summary_path, &summary, &format!("error: {e}"))?;
            Err(e)
        }
    }
}

fn measure(cfg: &RunConfig) -> Result<()> {
    let (grid, f0, op, sys) = build_problem(cfg)?;
    let traj = evolve_classical(&f0, &op, cfg.dt, cfg.n_steps())?;
    let (state, _) = solve(cfg, &sys, &traj)?;
    let rows = measure_blocks(cfg, &grid, &state, &traj)?;
    write_moments(&cfg.output_dir.join("moments.csv"), &rows, &cfg.orders)?;
    info!("measured {} blocks", rows.len());
    Ok(())
}

fn gate_counts(cfg: &RunConfig) -> Result<()> {
    emit_gate_count_table(
        BufWriter::new(File::create(cfg.output_dir.join("gate_counts.csv"))?),
        cfg.gate_count_n_max,
        &cfg.orders,
    )?;
    for r in compiled_count_table(cfg.compiled_count_n_max, &cfg.orders)? {
        println!(
            "n = {:2}: exact compiled {} (cnot {}, rz {}) vs formula {}",
            r.n,
            r.exact_cnot + r.exact_rz,
            r.exact_cnot,
            r.exact_rz,
            r.exact_formula
        );
    }
    Ok(())
}

fn sweep(common: &Common, param: &str, values: &[String]) -> Result<()> {
    let base = common.load(None)?;
    let configs: Vec<RunConfig> = values
        .iter()
        .map(|v| {
            let mut overrides = common.overrides.clone();
            overrides.push(format!("{param}={v}"));
            let dir = base.output_dir.join(format!("{param}={v}"));
            overrides.push(format!("output_dir={:?}", dir.display().to_string()));
            RunConfig::load(common.config.as_deref(), &overrides)
        })
        .collect::<Result<_>>()?;
    let results: Vec<(String, Result<RunReport>)> = configs
        .par_iter()
        .zip(values)
        .map(|(cfg, v)| (v.clone(), run_end_to_end(cfg)))
        .collect();
    let mut first_error = None;
    for (v, r) in results {
        match r {
            Ok(report) => {
                println!("{param} = {v}");
                print_report(&report);
            }
            Err(e) => {
                error!("{param} = {v}: {e}");
                first_error.get_or_insert(e);
            }
        }
    }
    first_error.map_or(Ok(()), Err)
}

fn print_report(report: &RunReport) {
    let s = &report.summary;
    println!(
        "solver {}: fidelity {:?}, success probability {:?}, kappa {:?}",
        s.mode.as_str(),
        s.fidelity,
        s.success_prob,
        s.kappa
    );
    for (m, e) in report.config.orders.iter().zip(&report.errors_vs_exact) {
        println!(
            "m = {m}: averaged relative error vs exact operator: mean {:.4}%, variance {:.4}%",
            100.0 * e.mean,
            100.0 * e.variance
        );
    }
    if let Some(e) = report.errors_vs_oracle.last() {
        println!(
            "exact operator vs oracle: mean {:.3e}, variance {:.3e}",
            e.mean, e.variance
        );
    }
    println!("outputs in {}", report.config.output_dir.display());
}
