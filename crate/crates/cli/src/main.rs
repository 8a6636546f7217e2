//! `sils` — command-line front end for the sils-core laboratory.
//!
//! Exit codes: 0 success, 1 usage / input / file errors, 2 numeric failures.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use sils_core::baselines::{self, BaselineParams, Method};
use sils_core::certificates::{
    self, check_cor_low_coherence, check_thm_general, check_thm_sparse, check_thm_sparse_recovery,
    check_thm_stochastic, model2_default_choice, model2_theta_decomposition, StochasticParams,
};
use sils_core::exact::solve_exact;
use sils_core::experiments::{run_experiment, ExperimentConfig};
use sils_core::generators::{generate, ModelSpec};
use sils_core::hardness::{reduce_x3c, X3cInstance};
use sils_core::instance::{parse_instance, parse_vector, write_instance, GroundTruth};
use sils_core::linalg::{self, Vector};
use sils_core::sdp::{extract_rank_one, solve_sdp, SolverParams};
use sils_core::{Result, SilsError, SilsInstance, SparseSignVector};

#[derive(Parser, Debug)]
#[command(name = "sils", version, about = "Sparse integer least squares laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TheoremArg {
    A,
    B,
    C,
    D,
    E,
    F,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Lasso,
    Dantzig,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw an instance from Model 1, 2 or 3.
    Generate {
        #[arg(long)]
        model: u8,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        sigma: usize,
        /// Noise level ϱ.
        #[arg(long, default_value_t = 0.0)]
        rho: f64,
        /// Model 2 constants c, c′, c″.
        #[arg(long)]
        c: Option<f64>,
        #[arg(long)]
        cp: Option<f64>,
        #[arg(long)]
        cpp: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the SDP relaxation by ADMM.
    Solve {
        #[arg(long = "in")]
        input: PathBuf,
        /// Solver settings (key = value lines).
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also emit the rank-one rounded x (or "none").
        #[arg(long)]
        round: bool,
    },
    /// Brute-force optimum by enumeration.
    Exact {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a family of sufficient conditions (A–E) or search for a dual certificate (F).
    Certify {
        #[arg(long = "in")]
        input: PathBuf,
        /// Vector file with entries in {-1, 0, 1}, or "truth" for the sign pattern of z*.
        #[arg(long, default_value = "truth")]
        xstar: String,
        #[arg(long, value_enum)]
        theorem: TheoremArg,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Restrict the grid to one δ (repeatable).
        #[arg(long)]
        delta: Vec<f64>,
        /// Restrict the grid to these μ₂ values (repeatable).
        #[arg(long)]
        mu2: Vec<f64>,
        /// Δ for the low-coherence conditions.
        #[arg(long = "big-delta", default_value_t = 0.1)]
        big_delta: f64,
        /// Concentration constant of the Model 2 decomposition.
        #[arg(long, default_value_t = 1.0)]
        c8: f64,
    },
    /// Lasso or Dantzig selector.
    Baseline {
        #[arg(long, value_enum)]
        method: MethodArg,
        /// A number, "cv" or "paper-rule".
        #[arg(long)]
        param: String,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Noise level for the Dantzig paper rule (defaults to the instance's).
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Reduce an exact-cover-by-3-sets instance to SILS.
    #[command(name = "reduce-x3c")]
    ReduceX3c {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a configured experiment and write its CSV.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        SilsError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)
            .map_err(|e| SilsError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", p.display())))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load(path: &Path) -> Result<(SilsInstance, Option<GroundTruth>)> {
    parse_instance(&read(path)?)
}

fn fmt_x(x: &SparseSignVector) -> String {
    x.entries().iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

fn fmt_vec(v: &Vector) -> String {
    v.iter().map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(" ")
}

fn truth_or_err(truth: &Option<GroundTruth>) -> Result<&GroundTruth> {
    truth
        .as_ref()
        .ok_or_else(|| SilsError::InvalidParam("instance file carries no ground truth (#z_star section)".into()))
}

fn x_star_for(arg: &str, inst: &SilsInstance, truth: &Option<GroundTruth>) -> Result<SparseSignVector> {
    let x = if arg == "truth" {
        let z = &truth_or_err(truth)?.z_star;
        let mut x = vec![0i8; z.len()];
        for i in sils_core::instance::top_sigma(z, inst.sigma) {
            x[i] = z[i].signum() as i8;
        }
        SparseSignVector::new(x)?
    } else {
        let v = parse_vector(&read(Path::new(arg))?)?;
        if v.iter().any(|&t| t != 0.0 && t.abs() != 1.0) {
            return Err(SilsError::InvalidParam("x* entries must be -1, 0 or 1".into()));
        }
        SparseSignVector::from_reals(v.as_slice())?
    };
    if x.len() != inst.d() {
        return Err(SilsError::Dimension(format!("x* has {} entries, instance has d = {}", x.len(), inst.d())));
    }
    if x.nnz() != inst.sigma {
        return Err(SilsError::InvalidParam(format!("‖x*‖₀ = {} but σ = {}", x.nnz(), inst.sigma)));
    }
    Ok(x)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { model, n, d, sigma, rho, c, cp, cpp, seed, out } => {
            let mut spec = ModelSpec::new(model, n, d, sigma, rho, seed);
            if let Some(v) = c {
                spec.c = v;
            }
            if let Some(v) = cp {
                spec.c_prime = v;
            }
            if let Some(v) = cpp {
                spec.c_dprime = v;
            }
            let (inst, truth) = generate(&spec)?;
            emit(out.as_deref(), &write_instance(&inst, Some(&truth)))
        }
        Command::Solve { input, params, out, round } => {
            let (inst, _) = load(&input)?;
            let p = match params {
                Some(path) => SolverParams::parse_config(&read(&path)?)?,
                None => SolverParams::default(),
            };
            let sol = solve_sdp(&inst, &p)?;
            let mut text = format!(
                "status {:?}\nobjective {:.16e}\niterations {}\nprimal_residual {:.6e}\ndual_residual {:.6e}\n",
                sol.status, sol.objective, sol.iterations, sol.primal_residual, sol.dual_residual
            );
            if round {
                match extract_rank_one(&sol.w, &inst, sol.objective, &p) {
                    Some(x) => text.push_str(&format!("x {}\n", fmt_x(&x))),
                    None => text.push_str("x none\n"),
                }
            }
            text.push_str(&format!("W {}\n", sol.w.nrows()));
            for row in sol.w.row_iter() {
                text.push_str(&fmt_vec(&row.transpose()));
                text.push('\n');
            }
            emit(out.as_deref(), &text)
        }
        Command::Exact { input, out } => {
            let (inst, _) = load(&input)?;
            let r = solve_exact(&inst, 1e-9)?;
            let text = format!(
                "best_value {:.16e}\nunique {}\nsecond_best_value {:.16e}\ncandidates {}\nx {}\n",
                r.best_value,
                r.unique,
                r.second_best_value,
                r.candidates,
                fmt_x(&r.best_x)
            );
            emit(out.as_deref(), &text)
        }
        Command::Certify { input, xstar, theorem, report, delta, mu2, big_delta, c8 } => {
            let (inst, truth) = load(&input)?;
            let x = x_star_for(&xstar, &inst, &truth)?;
            let mu2s = (!mu2.is_empty()).then_some(mu2.as_slice());
            let text = match theorem {
                TheoremArg::A => check_thm_sparse(&inst, &x, &delta, mu2s)?.render(),
                TheoremArg::B => check_thm_general(&inst, &x, &delta, mu2s)?.render(),
                TheoremArg::C => check_cor_low_coherence(&inst, &x, big_delta, &delta, mu2s)?.render(),
                TheoremArg::D => {
                    let t = truth_or_err(&truth)?;
                    let cov = t.cov.as_ref().ok_or_else(|| {
                        SilsError::InvalidParam("population check needs a #cov section".into())
                    })?;
                    let s = x.support();
                    let lam = linalg::lambda_min(&linalg::sub_matrix(cov, &s, &s))?;
                    let dlt = delta.first().copied().unwrap_or(0.5);
                    let mut p = StochasticParams::new(inst.n(), inst.d(), t.noise_param, dlt, 0.0);
                    p.mu2_hat = mu2
                        .first()
                        .copied()
                        .unwrap_or(-lam - p.c1 * p.l * (inst.sigma as f64 / inst.n() as f64).sqrt() + dlt);
                    check_thm_stochastic(cov, &t.z_star, &x, inst.sigma, &p)?.render()
                }
                TheoremArg::E => {
                    let t = truth_or_err(&truth)?;
                    if t.split.is_some() {
                        let (d0, m0) = model2_default_choice(&inst, t)?;
                        let dlt = delta.first().copied().unwrap_or(d0);
                        let m2 = mu2.first().copied().unwrap_or(m0);
                        match model2_theta_decomposition(&inst, t, dlt, m2, c8) {
                            Ok(dec) => {
                                let rep = check_thm_sparse_recovery(
                                    &inst,
                                    t,
                                    &[dlt],
                                    Some(&[m2]),
                                    Some((&dec.theta1, &dec.theta2)),
                                )?;
                                format!("{}{}", dec.render(), rep.render())
                            }
                            Err(e) => format!(
                                "model-2 decomposition unavailable: {e}\n{}",
                                check_thm_sparse_recovery(&inst, t, &delta, mu2s, None)?.render()
                            ),
                        }
                    } else {
                        check_thm_sparse_recovery(&inst, t, &delta, mu2s, None)?.render()
                    }
                }
                TheoremArg::F => {
                    let (rep, cert) = certificates::search_certificate(&inst, &x, &delta, mu2s)?;
                    let mut text = rep.render();
                    if let Some((_, c)) = cert {
                        text.push_str(&format!("nu {:.10e}\nmu3 {:.10e}\n", c.nu, c.dual.mu3_star));
                    }
                    text
                }
            };
            emit(report.as_deref(), &text)
        }
        Command::Baseline { method, param, input, out, rho, folds, seed } => {
            let (inst, truth) = load(&input)?;
            let m = match method {
                MethodArg::Lasso => Method::Lasso,
                MethodArg::Dantzig => Method::Dantzig,
            };
            let bp = BaselineParams::default();
            let res = match param.as_str() {
                "cv" => {
                    let grid = match m {
                        Method::Lasso => baselines::lasso_cv_grid(&inst.m, &inst.b),
                        Method::Dantzig => baselines::dantzig_cv_grid(&inst.m, &inst.b),
                    };
                    baselines::cross_validate(&inst.m, &inst.b, m, &grid, folds, seed, &bp)?
                }
                "paper-rule" => {
                    let p = match m {
                        Method::Lasso => baselines::lasso_paper_lambda(inst.n(), inst.d()),
                        Method::Dantzig => {
                            let r = match rho {
                                Some(r) => r,
                                None => truth_or_err(&truth)?.noise_param,
                            };
                            baselines::dantzig_paper_eta(r, inst.d())
                        }
                    };
                    baselines::fit(&inst.m, &inst.b, m, p, &bp)?
                }
                v => {
                    let p: f64 = v
                        .parse()
                        .map_err(|_| SilsError::InvalidParam(format!("--param must be a number, cv or paper-rule, got '{v}'")))?;
                    baselines::fit(&inst.m, &inst.b, m, p, &bp)?
                }
            };
            let mut text = format!(
                "parameter {:.16e}\nobjective_or_l1 {:.16e}\nkkt_violation {:.6e}\nconstraint_residual {:.6e}\n",
                res.parameter, res.objective_or_l1, res.kkt_violation, res.constraint_residual
            );
            if let Some(trace) = &res.cv_trace {
                for (p, e) in trace {
                    text.push_str(&format!("cv {p:.10e} {e:.10e}\n"));
                }
            }
            text.push_str(&format!("z {}\n", fmt_vec(&res.z)));
            emit(out.as_deref(), &text)
        }
        Command::ReduceX3c { input, out } => {
            let x3c = X3cInstance::parse(&read(&input)?)?;
            emit(out.as_deref(), &write_instance(&reduce_x3c(&x3c)?, None))
        }
        Command::Experiment { config, out } => {
            let cfg = ExperimentConfig::parse(&read(&config)?)?;
            let result = run_experiment(&cfg)?;
            let target = out.or_else(|| cfg.output.as_ref().map(PathBuf::from));
            emit(target.as_deref(), &result.csv)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 2 } else { 1 })
        }
    }
}
