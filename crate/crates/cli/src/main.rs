//! Command-line front end: geometry validation, cell solves, effective
//! data, thin-domain solves, measure checks and full convergence studies.
//!
//! Exit codes: 0 success, 1 a numerical check failed, 2 a solver or
//! runtime error, 64 a configuration or usage error.

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use thinhomog_core::cell::{solve_cell_problem, CellCache};
use thinhomog_core::epssolve::{eps_resolution, solve_eps_problem};
use thinhomog_core::expr::parse;
use thinhomog_core::limit1d::InterpolatedEffectiveData;
use thinhomog_core::measure::measure_convergence_study;
use thinhomog_core::study::{run_study, StudyConfig};
use thinhomog_core::Error;

#[derive(Parser)]
#[command(
    name = "thinhomog",
    about = "Homogenization toolkit for thin channels with rapidly oscillating boundaries",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the geometry and coefficient hypotheses on sample grids.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 8)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Solve the cell problems at one axis position.
    Cell {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        x1: f64,
        #[arg(long)]
        n1: Option<usize>,
        #[arg(long)]
        n2: Option<usize>,
        /// Emit the result as JSON instead of plain text.
        #[arg(long)]
        json: bool,
    },
    /// Tabulate the effective coefficients and solve the limit problem.
    Effective {
        #[arg(long)]
        config: PathBuf,
        /// Interpolation degree for the effective profile.
        #[arg(long, default_value_t = 16)]
        degree: usize,
        #[arg(long, default_value_t = 1024)]
        elements: usize,
        /// Write `x1,a_eff,c_bar,box_measure,u` samples to this CSV file.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Solve the full problem at a fixed thickness parameter.
    SolveEps {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 16)]
        per_period: usize,
        #[arg(long, default_value_t = 16)]
        n2: usize,
        /// Write `x1,local_average` samples to this CSV file.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check convergence of the scaled measure against its limit.
    VerifyMeasure {
        #[arg(long)]
        config: PathBuf,
        /// Test function of `x1` (and optionally `x2`).
        #[arg(long, default_value = "(1 + x2^2) * (1 - x1^2)")]
        phi: String,
    },
    /// Run the full convergence study from the configuration.
    Study {
        #[arg(long)]
        config: PathBuf,
        /// Directory for study.csv, study.json and per-metric tables.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(check_passed) => {
            if check_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Config(_) | Error::Syntax { .. } | Error::UnknownIdentifier { .. } => 64,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}

fn run(command: Command) -> thinhomog_core::Result<bool> {
    match command {
        Command::Validate {
            config,
            samples,
            seed,
        } => {
            let cfg = StudyConfig::from_path(&config)?;
            let model = cfg.build_model()?;
            let report = thinhomog_core::validate(&model, samples, seed);
            println!("periodic_in_y1: {}", report.periodic_in_y1);
            println!("nondegenerate_zero_set: {}", report.nondegenerate_zero_set);
            println!("axis_inside: {}", report.axis_inside);
            println!("single_component: {}", report.single_component);
            for m in &report.messages {
                println!("note: {m}");
            }
            let coeffs_ok = match cfg.build_coefficients().and_then(|c| {
                c.validate(&model, samples, seed)?;
                Ok(())
            }) {
                Ok(()) => true,
                Err(e) => {
                    println!("coefficients: {e}");
                    false
                }
            };
            println!("coefficients_ok: {coeffs_ok}");
            Ok(report.all_pass() && coeffs_ok)
        }
        Command::Cell {
            config,
            x1,
            n1,
            n2,
            json,
        } => {
            let cfg = StudyConfig::from_path(&config)?;
            let model = cfg.build_model()?;
            let coeffs = cfg.build_coefficients()?;
            let sol = solve_cell_problem(
                &model,
                &coeffs,
                x1,
                n1.unwrap_or(cfg.study.cell_n1),
                n2.unwrap_or(cfg.study.cell_n2),
            )?;
            if json {
                let out = serde_json::json!({
                    "x1": sol.x1,
                    "a_eff": sol.a_eff,
                    "a_eff_matrix": sol.a_eff_matrix,
                    "c_bar": sol.c_bar,
                    "box_measure": sol.box_measure,
                    "iterations": sol.iterations,
                });
                println!("{}", serde_json::to_string_pretty(&out).unwrap());
            } else {
                println!("x1 = {}", sol.x1);
                println!(
                    "A_eff = [[{:.12e}, {:.12e}], [{:.12e}, {:.12e}]]",
                    sol.a_eff_matrix[0][0],
                    sol.a_eff_matrix[0][1],
                    sol.a_eff_matrix[1][0],
                    sol.a_eff_matrix[1][1]
                );
                println!("a_eff = {:.12e}", sol.a_eff);
                println!("c_bar = {:.12e}", sol.c_bar);
                println!("box_measure = {:.12e}", sol.box_measure);
                println!("cg_iterations = {}", sol.iterations[0]);
            }
            Ok(true)
        }
        Command::Effective {
            config,
            degree,
            elements,
            output,
        } => {
            let cfg = StudyConfig::from_path(&config)?;
            let model = cfg.build_model()?;
            let coeffs = cfg.build_coefficients()?;
            let cache = CellCache::new();
            let interp = InterpolatedEffectiveData::build(
                &model,
                &coeffs,
                degree,
                cfg.study.cell_n1,
                cfg.study.cell_n2,
                &cache,
            )?;
            let limit = interp.solve(&coeffs, model.half_length, elements)?;
            let l = model.half_length;
            let mut csv = String::from("x1,a_eff,c_bar,box_measure,u\n");
            for i in 0..=128 {
                let x1 = -l + 2.0 * l * i as f64 / 128.0;
                csv.push_str(&format!(
                    "{},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                    x1,
                    interp.a_eff.eval(x1),
                    interp.c_bar.eval(x1),
                    interp.box_measure.eval(x1),
                    limit.evaluate(x1)
                ));
            }
            match output {
                Some(path) => std::fs::write(path, csv)?,
                None => print!("{csv}"),
            }
            Ok(true)
        }
        Command::SolveEps {
            config,
            eps,
            per_period,
            n2,
            output,
        } => {
            let cfg = StudyConfig::from_path(&config)?;
            let model = cfg.build_model()?;
            let coeffs = cfg.build_coefficients()?;
            let (n1, n2) = eps_resolution(model.half_length, eps, per_period, n2)?;
            let sol = solve_eps_problem(&model, &coeffs, eps, n1, n2)?;
            let norms = sol.scaled_norms(&model)?;
            println!("eps = {eps}, mesh = {n1} x {n2}, cg_iterations = {}", sol.iterations);
            println!("l2_norm = {:.12e}", norms.l2);
            println!("h1_seminorm = {:.12e}", norms.h1_semi);
            let l = model.half_length;
            let mut csv = String::from("x1,local_average\n");
            for i in 0..=256 {
                let x1 = -l + 2.0 * l * i as f64 / 256.0;
                csv.push_str(&format!("{},{:.12e}\n", x1, sol.local_average(x1)));
            }
            match output {
                Some(path) => std::fs::write(path, csv)?,
                None => {}
            }
            Ok(true)
        }
        Command::VerifyMeasure { config, phi } => {
            let cfg = StudyConfig::from_path(&config)?;
            let model = cfg.build_model()?;
            let phi = parse(&phi)?;
            let rows = measure_convergence_study(&phi, &model, &cfg.study.eps, 16, 8)?;
            println!("eps,value,gap");
            for r in &rows {
                println!("{},{:.12e},{:.12e}", r.eps, r.value, r.gap);
            }
            let ok = rows.len() < 2 || rows.last().unwrap().gap <= 0.6 * rows[0].gap;
            println!("gap_decays: {ok}");
            Ok(ok)
        }
        Command::Study { config, output_dir } => {
            let cfg = StudyConfig::from_path(&config)?;
            let report = run_study(&cfg)?;
            print!("{}", report.to_csv());
            println!("measure_gap_decays: {}", report.decay.measure_gap);
            println!("l2_error_decays: {}", report.decay.l2_error);
            println!("flux_residual_decays: {}", report.decay.flux_residual);
            println!("avg_gap_decays: {}", report.decay.avg_gap);
            println!("apriori_norm_bounded: {}", report.decay.apriori_norm);
            println!("all_pass: {}", report.all_pass);
            if let Some(dir) = output_dir {
                report.write_to_dir(&dir)?;
            }
            Ok(report.all_pass)
        }
    }
}
