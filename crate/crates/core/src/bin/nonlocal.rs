use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use nonlocal_core::analysis::{rearrange, Check, Verifier, CHECKS};
use nonlocal_core::config::RunConfig;
use nonlocal_core::domain::{Domain, GridFunction, Shape};
use nonlocal_core::forms::FormMatrix;
use nonlocal_core::linalg::project_mean_zero;
use nonlocal_core::output::{csv_string, emit, grid_function_csv, read_grid_function, Field};
use nonlocal_core::rng::{stream, uniform_interior};
use nonlocal_core::solve::{
    critical_exponent, pohozaev_check, smoothing_report, solve_sublinear, DirichletSolver, NeumannSystem,
    SolveReport,
};
use nonlocal_core::spectral::{berezin_bound, dirichlet_eigen};
use nonlocal_core::suite::{self, SuiteConfig};
use nonlocal_core::{Error, Result};

#[derive(Parser)]
#[command(name = "nonlocal", version, about = "Weakly singular nonlocal operators: assembly, spectra, solvers, checks")]
struct Cli {
    /// Run configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Number of random functions (verify) or samples per criterion (report).
    #[arg(long, global = true)]
    seeds: Option<usize>,
    /// Number of eigenpairs.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Comma-separated check names.
    #[arg(long, global = true)]
    check: Option<String>,
    /// Comma-separated cell sizes for a refinement study.
    #[arg(long = "h-sweep", global = true, value_delimiter = ',')]
    h_sweep: Option<Vec<f64>>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Kernel diagnostics.
    Kernel {
        #[command(subcommand)]
        what: KernelCmd,
    },
    /// Assemble the discrete form and write it in binary form.
    Assemble,
    /// Inspect an assembled form.
    Form {
        #[command(subcommand)]
        what: FormCmd,
    },
    /// Lowest Dirichlet eigenvalues, or the Berezin-type lower bound.
    Eigen { mode: Option<EigenMode> },
    /// Run inequality checks on seeded random functions.
    Verify,
    /// Solve a boundary value problem.
    Solve {
        #[command(subcommand)]
        what: SolveCmd,
    },
    /// J-perimeter of a subset: `a,b` (interval) or `cx,cy,r` (disk).
    Perimeter {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        set: Vec<f64>,
    },
    /// Decreasing rearrangement of a grid function onto the ball grid.
    Rearrange {
        #[arg(long)]
        f: PathBuf,
    },
    /// Run the acceptance suite and write one JSON report.
    Report,
}

#[derive(Subcommand)]
enum KernelCmd {
    /// M, l and the multiplier at 1/r on a logarithmic radius grid.
    Table,
    /// Scaling exponent and critical power.
    Sigma,
}

#[derive(Subcommand)]
enum FormCmd {
    /// Sizes, exterior mass range and tail uncertainty.
    Info {
        /// Binary form file; assembled from the config when absent.
        #[arg(long)]
        form: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum EigenMode {
    Berezin,
}

#[derive(Subcommand)]
enum SolveCmd {
    /// Zero exterior data; f = 1 when no source file is given.
    Dirichlet {
        #[arg(long)]
        f: Option<PathBuf>,
    },
    /// Prescribed exterior data on the shell.
    Nonhom {
        #[arg(long)]
        f: Option<PathBuf>,
        /// Exterior data with `region = shell` rows.
        #[arg(long)]
        g: PathBuf,
    },
    /// u = f(u) with the power source from the config, from two starts.
    Sublinear,
    /// Mean-zero Neumann problem; the source must integrate to zero.
    Neumann {
        #[arg(long)]
        f: Option<PathBuf>,
    },
    /// Pohozaev inequality for a solution of the sublinear problem.
    Pohozaev {
        /// Candidate solution; the sublinear solution when absent.
        #[arg(long)]
        u: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::parse(&std::fs::read_to_string(p)?),
        None => RunConfig::parse(""),
    }
}

fn read_function(domain: &Domain, path: &Path) -> Result<GridFunction> {
    read_grid_function(domain, &std::fs::read_to_string(path)?)
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| Error::Format(e.to_string()))
}

#[derive(Serialize)]
struct SolveSummary {
    residual: f64,
    iterations: usize,
    p: f64,
    u_norm: f64,
    f_norm: f64,
    u_lorentz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    extra: Option<serde_json::Value>,
}

fn summary(r: &SolveReport, extra: Option<serde_json::Value>) -> SolveSummary {
    SolveSummary {
        residual: r.residual,
        iterations: r.iterations,
        p: r.p,
        u_norm: r.u_norm,
        f_norm: r.f_norm,
        u_lorentz: r.u_lorentz,
        extra,
    }
}

/// Solution CSV to `--out` and the JSON report beside it; JSON only on
/// standard output otherwise.
fn emit_solution(out: Option<&Path>, domain: &Domain, r: &SolveReport, extra: Option<serde_json::Value>, shell: bool) -> Result<()> {
    let csv = grid_function_csv(domain, &r.solution, shell)?;
    let js = to_json(&summary(r, extra))?;
    match out {
        Some(p) => {
            emit(Some(p), &csv)?;
            emit(Some(&p.with_extension("json")), &js)
        }
        None => emit(None, &js),
    }
}

fn sweep_or(cfg: &RunConfig, sweep: &Option<Vec<f64>>) -> Vec<RunConfig> {
    match sweep {
        Some(hs) => hs.iter().map(|&h| cfg.with_h(h)).collect(),
        None => vec![cfg.clone()],
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(cli.config.as_deref())?;
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Kernel { what: KernelCmd::Table } => {
            let k = &cfg.kernel;
            let rho = k.rho();
            let mut rows = Vec::new();
            for j in 0..=24 {
                let r = rho * 10f64.powf(-(j as f64) / 4.0);
                let mut xi = vec![0.0; k.dimension];
                xi[0] = 1.0 / r;
                rows.push(vec![
                    Field::Num(r),
                    Field::Num(k.mass_m(r)?),
                    Field::Num(k.near_profile(r)),
                    Field::Num(k.multiplier(&xi)?),
                ]);
            }
            emit(out, &csv_string(&["r", "M", "ell", "m_at_1_over_r"], &rows)?)
        }
        Command::Kernel { what: KernelCmd::Sigma } => {
            let s = cfg.kernel.scaling_sigma()?;
            let p_star = critical_exponent(&cfg.kernel).map(|(_, p)| p).ok();
            emit(out, &to_json(&json!({ "sigma": s.sigma, "lambdas": s.lambdas, "gammas": s.gammas, "p_star": p_star }))?)
        }
        Command::Assemble => {
            let d = cfg.domain()?;
            let f = FormMatrix::assemble(&d, &cfg.kernel)?;
            let path = out.map(Path::to_path_buf).unwrap_or_else(|| Path::new(&cfg.output_dir).join("form.bin"));
            let mut buf = Vec::new();
            f.write_binary(&mut buf)?;
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(&path, buf)?;
            emit(None, &to_json(&json!({ "path": path, "n_interior": d.n_interior(), "n_shell": d.n_shell() }))?)
        }
        Command::Form { what: FormCmd::Info { form } } => {
            let f = match form {
                Some(p) => FormMatrix::read_binary(std::fs::File::open(p)?)?,
                None => FormMatrix::assemble(&cfg.domain()?, &cfg.kernel)?,
            };
            let lmax = f.lambda.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let unc = f.tail_uncertainty.iter().copied().fold(0.0, f64::max);
            emit(
                out,
                &to_json(&json!({
                    "dimension": f.domain.dimension,
                    "h": f.domain.h,
                    "n_interior": f.n_interior(),
                    "n_shell": f.n_shell(),
                    "measure": f.domain.measure(),
                    "poincare_constant": f.poincare_constant(),
                    "lambda_max": lmax,
                    "tail_corrected": f.tail_corrected,
                    "tail_uncertainty_max": unc,
                }))?,
            )
        }
        Command::Eigen { mode: None } => {
            let k = cli.k.unwrap_or(5);
            let mut rows = Vec::new();
            for c in sweep_or(&cfg, &cli.h_sweep) {
                let d = c.domain()?;
                let f = FormMatrix::assemble(&d, &c.kernel)?;
                let dec = dirichlet_eigen(&f, k.min(d.n_interior()))?;
                for (j, l) in dec.eigenvalues.iter().enumerate() {
                    rows.push(vec![Field::Num(c.h), Field::from(j + 1), Field::Num(*l)]);
                }
            }
            emit(out, &csv_string(&["h", "j", "lambda"], &rows)?)
        }
        Command::Eigen { mode: Some(EigenMode::Berezin) } => {
            let d = cfg.domain()?;
            let f = FormMatrix::assemble(&d, &cfg.kernel)?;
            let l1 = dirichlet_eigen(&f, 1)?.eigenvalues[0];
            let b = berezin_bound(&cfg.kernel, d.measure())?;
            emit(
                out,
                &to_json(&json!({
                    "lambda1": l1,
                    "bound": b.bound,
                    "t_star": b.t_star,
                    "condition_ok": b.condition_ok,
                    "samples": b.samples,
                    "pass": l1 >= b.bound * (1.0 - 1e-3),
                }))?,
            )
        }
        Command::Verify => {
            let names: Vec<String> = match &cli.check {
                Some(s) => s.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
                None if !cfg.verify.checks.is_empty() => cfg.verify.checks.clone(),
                None => CHECKS.iter().map(|c| c.name().to_string()).collect(),
            };
            let checks: Vec<Check> = names.iter().map(|n| Check::from_name(n)).collect::<Result<_>>()?;
            let seeds = cli.seeds.unwrap_or(cfg.verify.seeds);
            let d = cfg.domain()?;
            let f = FormMatrix::assemble(&d, &cfg.kernel)?;
            let mut rows = Vec::new();
            for c in checks {
                let v = Verifier::new(&f, c)?.with_exponent(cfg.verify.p);
                for s in 0..seeds {
                    let u = uniform_interior(&d, &mut stream(cfg.verify.seed, c.name(), s as u64));
                    let r = v.evaluate(&u)?;
                    rows.push(vec![
                        Field::from(c.name()),
                        Field::from(s),
                        Field::Num(r.lhs),
                        Field::Num(r.rhs),
                        Field::Num(r.ratio),
                        Field::from(r.pass),
                    ]);
                }
            }
            emit(out, &csv_string(&["check", "seed", "lhs", "rhs", "ratio", "pass"], &rows)?)
        }
        Command::Solve { what } => solve(&cli, &cfg, what, out),
        Command::Perimeter { set } => {
            let mut rows = Vec::new();
            for c in sweep_or(&cfg, &cli.h_sweep) {
                let shape = match (c.kernel.dimension, set.as_slice()) {
                    (1, [a, b]) => Shape::Interval { a: *a, b: *b },
                    (2, [cx, cy, r]) => Shape::Cells {
                        dimension: 2,
                        h: c.h,
                        cells: disk_cells(&c.domain()?, [*cx, *cy], *r),
                    },
                    _ => return Err(Error::Domain("--set takes a,b in 1D or cx,cy,r in 2D".into())),
                };
                let f = FormMatrix::assemble(&c.domain()?, &c.kernel)?;
                rows.push(vec![Field::Num(c.h), Field::Num(f.j_perimeter(&shape)?)]);
            }
            emit(out, &csv_string(&["h", "perimeter"], &rows)?)
        }
        Command::Rearrange { f } => {
            let d = cfg.domain()?;
            let u = read_function(&d, f)?;
            let r = rearrange(&d, &u)?;
            emit(out, &grid_function_csv(&r.ball.domain, &r.values, false)?)
        }
        Command::Report => {
            let sc = SuiteConfig {
                seed: cfg.verify.seed,
                samples: cli.seeds.unwrap_or(SuiteConfig::default().samples),
            };
            emit(out, &to_json(&suite::report(&sc))?)
        }
    }
}

fn disk_cells(d: &Domain, c: [f64; 2], r: f64) -> Vec<[i64; 2]> {
    d.interior
        .iter()
        .filter(|cell| (cell.center[0] - c[0]).powi(2) + (cell.center[1] - c[1]).powi(2) < r * r)
        .map(|cell| [(cell.center[0] / d.h).floor() as i64, (cell.center[1] / d.h).floor() as i64])
        .collect()
}

fn solve(cli: &Cli, cfg: &RunConfig, what: &SolveCmd, out: Option<&Path>) -> Result<()> {
    match what {
        SolveCmd::Dirichlet { f } if cli.h_sweep.is_some() => {
            if f.is_some() {
                return Err(Error::Domain("--h-sweep uses f = 1; drop --f".into()));
            }
            let mut rows = Vec::new();
            for c in sweep_or(cfg, &cli.h_sweep) {
                let d = c.domain()?;
                let form = FormMatrix::assemble(&d, &c.kernel)?;
                let src = GridFunction::from_interior(&d, vec![1.0; d.n_interior()])?;
                let u = DirichletSolver::new(&form, c.solver).solve(&src)?.solution;
                let ball = nonlocal_core::analysis::BallGrid::matching(&d)?;
                let w = nonlocal_core::analysis::LorentzWeight::from_kernel(&c.kernel, &ball);
                for p in [2.0, 4.0] {
                    let s = smoothing_report(&d, &u, &src, p, &w)?;
                    rows.push(vec![Field::Num(c.h), Field::Num(p), Field::Num(s.lp), Field::Num(s.lorentz)]);
                }
            }
            emit(out, &csv_string(&["h", "p", "lp_ratio", "lorentz_ratio"], &rows)?)
        }
        SolveCmd::Dirichlet { f } => {
            let d = cfg.domain()?;
            let src = match f {
                Some(p) => read_function(&d, p)?,
                None => GridFunction::from_interior(&d, vec![1.0; d.n_interior()])?,
            };
            let form = FormMatrix::assemble(&d, &cfg.kernel)?;
            let r = DirichletSolver::new(&form, cfg.solver).solve(&src)?;
            emit_solution(out, &d, &r, None, false)
        }
        SolveCmd::Nonhom { f, g } => {
            let d = cfg.domain()?;
            let src = match f {
                Some(p) => read_function(&d, p)?,
                None => GridFunction::zeros(&d),
            };
            let g = read_function(&d, g)?;
            let form = FormMatrix::assemble(&d, &cfg.kernel)?;
            let r = DirichletSolver::new(&form, cfg.solver).solve_nonhom(&src, &g)?;
            emit_solution(out, &d, &r, None, true)
        }
        SolveCmd::Sublinear => {
            let d = cfg.domain()?;
            let form = FormMatrix::assemble(&d, &cfg.kernel)?;
            let r = solve_sublinear(&form, &cfg.source, cfg.solver)?;
            let extra = json!({
                "iterations_from_above": r.iterations_from_above,
                "start_gap": r.start_gap,
                "monotone_from_below": r.monotone_from_below,
            });
            emit_solution(out, &d, &r.report, Some(extra), false)
        }
        SolveCmd::Neumann { f } => {
            let d = cfg.domain()?;
            let src = match f {
                Some(p) => read_function(&d, p)?,
                None => {
                    let mut g = GridFunction::from_fn_interior(&d, |x| x[0]);
                    project_mean_zero(&mut g.interior);
                    g
                }
            };
            let form = FormMatrix::assemble(&d, &cfg.kernel)?;
            let r = NeumannSystem::new(&form).solve(&src, cfg.solver)?;
            emit_solution(out, &d, &r, None, true)
        }
        SolveCmd::Pohozaev { u } => {
            let d = cfg.domain()?;
            let form = FormMatrix::assemble(&d, &cfg.kernel)?;
            let sol = match u {
                Some(p) => read_function(&d, p)?,
                None => solve_sublinear(&form, &cfg.source, cfg.solver)?.report.solution,
            };
            let r = pohozaev_check(&form, &sol, &cfg.source)?;
            emit(
                out,
                &format!(
                    "lhs = {:.16e}\nrhs = {:.16e}\np_star = {:.16e}\npass = {}\n",
                    r.lhs, r.rhs, r.p_star, r.pass
                ),
            )
        }
    }
}

fn main() -> ExitCode {
    if let Some(n) = std::env::var("NONLOCAL_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config { .. } | Error::UnknownCheck { .. } => 2,
                _ => 1,
            })
        }
    }
}
