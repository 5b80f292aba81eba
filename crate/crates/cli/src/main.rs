use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lcvx::analysis::CaseKind;
use lcvx::longhorizon::{self, BisectionOptions};
use lcvx::model;
use lcvx_cli::report::Branch;
use lcvx_cli::{emit_outputs, load_scenario, parse_scenario, run_pipeline, scenario, sweep_n, CliError, Overrides, RunReport, Scenario};

#[derive(Parser)]
#[command(name = "lcvx", version, about = "Lossless convexification of minimum-magnitude control problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check controllability, boundary rows and interior feasibility.
    Validate(Common),
    /// Run the full pipeline and write the report files.
    Solve(Common),
    /// Run only the switching-time search.
    Bisect(Common),
    /// Run one of the bundled examples and compare with its known outcome.
    Reproduce {
        example: Example,
        #[command(flatten)]
        flags: Flags,
    },
    /// Repeat the pipeline over several horizon lengths.
    #[command(name = "sweep-n", alias = "sweep-N")]
    SweepN {
        #[command(flatten)]
        common: Common,
        /// Comma-separated horizon lengths.
        #[arg(long, value_delimiter = ',', default_values_t = [10, 30, 50, 100, 300, 500])]
        ns: Vec<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Example {
    Example1,
    Example2,
    Example3,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Args)]
struct Flags {
    /// Output directory for report.json, trajectory.csv and plotdata.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Half-width of the perturbation cube.
    #[arg(long = "eps-q")]
    eps_q: Option<f64>,
    /// Bisection resolution in seconds.
    #[arg(long = "eps-t")]
    eps_t: Option<f64>,
    /// Validity tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

impl Flags {
    fn overrides(&self) -> Overrides {
        Overrides { seed: self.seed, eps_q: self.eps_q, eps_t: self.eps_t, tol_v: self.tol }
    }
}

fn load(common: &Common) -> Result<Scenario, CliError> {
    let mut s = load_scenario(&common.scenario)?;
    common.flags.overrides().apply(&mut s);
    Ok(s)
}

fn finish(report: &RunReport, out: Option<&Path>) -> Result<i32, CliError> {
    println!("{}", report.summary());
    if let Some(dir) = out {
        emit_outputs(report, dir)?;
        println!("  outputs written to {}", dir.display());
    }
    Ok(report.exit_code())
}

fn validate(common: &Common) -> Result<i32, CliError> {
    let s = load(common)?;
    let (report, _) = model::validate(&s.problem()?, &s.solver)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(if report.passed() { 0 } else { 4 })
}

fn bisect(common: &Common) -> Result<i32, CliError> {
    let s = load(common)?;
    let setup = s.two_phase()?;
    let opts = BisectionOptions {
        eps_t: s.long_horizon.eps_t,
        early_stop: s.long_horizon.early_stop,
        tol_c: s.analysis.tol_c,
        ..BisectionOptions::default()
    };
    let trace = longhorizon::bisection_search(&setup, &s.solver, &opts)?;
    let (post, _, _) = longhorizon::post_bisection_quality(&setup, &trace, None, &s.solver, s.analysis.tol_v)?;
    let out = serde_json::json!({ "bisection": trace, "post_bisection": post });
    let text = serde_json::to_string_pretty(&out)? + "\n";
    print!("{text}");
    if let Some(dir) = &common.flags.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("bisection.json"), text)?;
    }
    Ok(0)
}

/// Checks a bundled example against its known outcome; returns the lines to print.
fn expectations(example: Example, r: &RunReport) -> Vec<(String, bool)> {
    let n_x1 = r.bound;
    match example {
        Example::Example1 => vec![
            ("full-horizon case NORMAL".into(), r.initial_classification.map(|c| c.kind) == Some(CaseKind::Normal)),
            (format!("violating nodes {} <= {n_x1} (expected about 1)", r.violation_count), r.violation_count <= n_x1),
            ("no perturbation needed".into(), r.branch == Some(Branch::Normal)),
        ],
        Example::Example2 => {
            let before = r.initial_violation_count.unwrap_or(0);
            vec![
                (format!("unperturbed violating nodes {before} >= 3"), before >= 3),
                ("perturbation branch taken".into(), r.branch == Some(Branch::NormalPerturbed)),
                (format!("perturbed violating nodes {} <= {n_x1}", r.violation_count), r.violation_count <= n_x1),
            ]
        }
        Example::Example3 => {
            let t = r.bisection.as_ref().map(|b| b.t_s_star);
            vec![
                (
                    "full-horizon case LONG_HORIZON".into(),
                    r.initial_classification.map(|c| c.kind) == Some(CaseKind::LongHorizon),
                ),
                (format!("switching time {t:?} within [90, 110] (expected about 98.4)"), t.is_some_and(|t| (90.0..=110.0).contains(&t))),
                (format!("violating nodes {} <= {n_x1}", r.violation_count), r.violation_count <= n_x1),
            ]
        }
    }
}

fn reproduce(example: Example, flags: &Flags) -> Result<i32, CliError> {
    let name = match example {
        Example::Example1 => "example1",
        Example::Example2 => "example2",
        Example::Example3 => "example3",
    };
    let mut s = parse_scenario(scenario::bundled(name).expect("bundled scenario"))?;
    flags.overrides().apply(&mut s);
    let report = run_pipeline(&s);
    let code = finish(&report, flags.out.as_deref())?;
    let mut all = true;
    for (line, ok) in expectations(example, &report) {
        all &= ok;
        println!("  [{}] {line}", if ok { "ok" } else { "MISMATCH" });
    }
    println!("  known outcome reproduced: {}", if all { "yes" } else { "no" });
    Ok(code)
}

fn sweep(common: &Common, ns: &[usize]) -> Result<i32, CliError> {
    let s = load(common)?;
    let results = sweep_n(&s, ns);
    println!("{:>6} {:>20} {:>10} {:>12} {:>12} {:>14}", "N", "status", "violating", "deviation", "bound", "objective");
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4e}"));
    let mut code = 0;
    for (row, report) in &results {
        println!(
            "{:>6} {:>20} {:>10} {:>12} {:>12} {:>14}",
            row.n,
            format!("{:?}", row.status),
            row.violation_count,
            fmt(row.deviation),
            fmt(row.bound),
            fmt(row.objective)
        );
        if report.exit_code() != 0 && code == 0 {
            code = report.exit_code();
        }
        if let Some(dir) = &common.flags.out {
            emit_outputs(report, &dir.join(format!("N{}", row.n)))?;
        }
    }
    if let Some(dir) = &common.flags.out {
        let rows: Vec<_> = results.iter().map(|(r, _)| r).collect();
        std::fs::write(dir.join("sweep.json"), serde_json::to_string_pretty(&rows)? + "\n")?;
    }
    Ok(code)
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate(c) => validate(c),
        Command::Solve(c) => load(c).and_then(|s| finish(&run_pipeline(&s), c.flags.out.as_deref())),
        Command::Bisect(c) => bisect(c),
        Command::Reproduce { example, flags } => reproduce(*example, flags),
        Command::SweepN { common, ns } => sweep(common, ns),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
