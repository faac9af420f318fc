use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use branchsite::app::pipeline::{artifacts, compute, render_report, write_artifacts, Run, RunReport, Until};
use branchsite::app::{fixture, load_project};
use branchsite::mclp::{
    coverage_curve, improve_swap, solve_exact, solve_greedy, CurveMethod, ExactOptions, InstanceFile, DEFAULT_EXACT_CAP,
};
use branchsite::{Error, Result};

/// Bank-branch site selection: weighting, suitability overlay, candidate
/// extraction and maximal covering location.
#[derive(Parser)]
#[command(name = "branchsite", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Project configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for fixture generation.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Exact,
    Greedy,
    #[value(name = "greedy-swap")]
    GreedySwap,
}

#[derive(Subcommand)]
enum Command {
    /// Derive criterion weights and consistency ratios from the comparison matrices.
    Weights,
    /// Rasterize every criterion and combine them into the score surface.
    Score,
    /// Extract, tier and merge candidate sites.
    Candidates,
    /// Solve an MCLP instance file.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        /// Number of sites to open.
        #[arg(long, conflicts_with = "p_max")]
        p: Option<usize>,
        /// Solve p = 1..=p_max and report the coverage curve.
        #[arg(long)]
        p_max: Option<usize>,
        #[arg(long, value_enum, default_value = "exact")]
        method: Method,
        /// Run the exact solver above its candidate cap.
        #[arg(long)]
        allow_large: bool,
        #[arg(long, default_value_t = DEFAULT_EXACT_CAP)]
        exact_cap: usize,
    },
    /// Run every stage and write all artifacts.
    Pipeline,
    /// Re-render coverage.csv, candidates.geojson and solution.json from report.json.
    Report {
        /// Report to render; defaults to `<out>/report.json`.
        #[arg(long)]
        from: Option<PathBuf>,
    },
    /// Generate the bundled synthetic fixture.
    Fixture,
}

fn need<'a>(v: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    v.as_deref().ok_or_else(|| Error::config(flag, format!("--{flag} is required for this command")))
}

fn print_weights(run: &Run) {
    println!("{:<24} {:>10}", "criterion", "weight");
    for w in &run.report.weights {
        println!("{:<24} {:>10.6}", w.criterion, w.weight);
    }
    println!();
    println!("{:<16} {:>3} {:>12} {:>10} {:>6}", "matrix", "n", "lambda_max", "CR", "gate");
    for g in &run.report.gates {
        let status = if g.passed { "pass" } else { "fail" };
        println!("{:<16} {:>3} {:>12.6} {:>10.6} {:>6}", g.node, g.n, g.lambda_max, g.cr, status);
    }
}

fn print_curve(report: &RunReport) {
    if report.extraction_empty {
        println!("no cell qualified as a candidate site; nothing to solve");
        return;
    }
    if let Some(curve) = &report.curve {
        println!("{:>3}  {:<40} {:>10}", "p", "selected", "covering %");
        for pt in &curve.points {
            println!("{:>3}  {:<40} {:>10}", pt.p, pt.selected.join(", "), pt.coverage_pct);
        }
    }
}

fn stage(g: &Global, until: Until) -> Result<()> {
    let project = load_project(need(&g.config, "config")?)?;
    let run = compute(&project, until)?;
    match until {
        Until::Weights => print_weights(&run),
        Until::Score => {
            if let Some(s) = &run.report.score {
                println!(
                    "{} study cells, {} with a positive score, max {}",
                    s.study_cells, s.positive_cells, s.max
                );
            }
        }
        Until::Candidates => {
            for c in &run.report.candidates {
                let tier = c.tier.map_or("-".to_string(), |t| format!("{t:?}").to_lowercase());
                println!("{:<6} {:>12.6} {:<9} {}", c.id, c.score, format!("{:?}", c.origin).to_lowercase(), tier);
            }
        }
        Until::Solve => print_curve(&run.report),
    }
    if let Some(out) = &g.out {
        write_artifacts(out, &artifacts(&run), until == Until::Solve)?;
    }
    Ok(())
}

fn solve(g: &Global, instance: &Path, p: Option<usize>, p_max: Option<usize>, method: Method, opts: ExactOptions) -> Result<()> {
    let text = std::fs::read_to_string(instance).map_err(|e| Error::io(instance, e))?;
    let inst = InstanceFile::from_json(&text)?.into_instance()?;
    let body = match (p, p_max) {
        (_, Some(p_max)) => {
            let curve_method = match method {
                Method::Exact => CurveMethod::Exact,
                Method::Greedy | Method::GreedySwap => CurveMethod::GreedySwap,
            };
            serde_json::to_value(coverage_curve(&inst, p_max, curve_method, opts)?)
        }
        (p, None) => {
            let p = p.unwrap_or(1);
            let sol = match method {
                Method::Exact => solve_exact(&inst, p, opts)?,
                Method::Greedy => solve_greedy(&inst, p)?,
                Method::GreedySwap => improve_swap(&inst, &solve_greedy(&inst, p)?),
            };
            serde_json::to_value(sol)
        }
    }
    .expect("solution serializes");
    let mut text = serde_json::to_string_pretty(&body).expect("solution serializes");
    text.push('\n');
    print!("{text}");
    if let Some(out) = &g.out {
        write_artifacts(out, &[(PathBuf::from("solution.json"), text)].into_iter().collect(), false)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::Weights => stage(g, Until::Weights),
        Command::Score => stage(g, Until::Score),
        Command::Candidates => stage(g, Until::Candidates),
        Command::Pipeline => {
            need(&g.out, "out")?;
            stage(g, Until::Solve)
        }
        Command::Solve { instance, p, p_max, method, allow_large, exact_cap } => {
            solve(g, &instance, p, p_max, method, ExactOptions { cap: exact_cap, allow_large })
        }
        Command::Report { from } => {
            let out = need(&g.out, "out")?;
            let path = from.unwrap_or_else(|| out.join("report.json"));
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let report = RunReport::from_json(&text)?;
            print_curve(&report);
            write_artifacts(out, &render_report(&report), false)
        }
        Command::Fixture => {
            let out = need(&g.out, "out")?;
            let seed = g.seed.unwrap_or(fixture::DEFAULT_SEED);
            let s = fixture::generate(seed, out)?;
            println!(
                "wrote {} (seed {seed}, attempt {}): {} candidates, radius {} m",
                out.display(),
                s.attempts,
                s.candidates,
                s.radius
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
