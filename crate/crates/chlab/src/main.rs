//! Command-line driver: simulations, the asymptotic building blocks, and
//! the one-call cross-validation, all emitting deterministic artifacts.
//!
//! Exit codes: 0 success, 1 configuration/environment, 2 simulation,
//! 3 asymptotic construction, 4 cross-validation.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use chlab::annular;
use chlab::composite;
use chlab::config::{ConfigError, RunConfig};
use chlab::io::{self, IoError};
use chlab::model::DEFAULT_M0;
use chlab::pipeline::{self, PipelineError, ReproduceOverrides};
use chlab::touchdown;

#[derive(Parser)]
#[command(
    name = "chlab",
    version,
    about = "Degenerate Cahn-Hilliard laboratory: long-time radial simulation and matched-asymptotic reconstruction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write its artifact set.
    Simulate(SimulateArgs),
    /// Print the exact rational decay exponents for a mobility exponent.
    Exponents {
        #[arg(long)]
        n: f64,
    },
    /// Solve the stationary annular equilibrium.
    Annular {
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        /// Conserved mass (defaults to the mass of the default initial data).
        #[arg(long, allow_negative_numbers = true, default_value_t = DEFAULT_M0)]
        m0: f64,
        /// Write the profile CSV into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the self-similar touchdown profile.
    Touchdown {
        #[arg(long)]
        n: f64,
        #[arg(long, default_value_t = touchdown::DEFAULT_HALF_WIDTH)]
        half_width: f64,
        #[arg(long, default_value_t = touchdown::DEFAULT_INTERVALS)]
        intervals: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the composite long-time approximation on a radial grid.
    Composite {
        #[arg(long)]
        n: f64,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = DEFAULT_M0)]
        m0: f64,
        /// Evaluation time(s); repeatable.
        #[arg(long = "time", required = true)]
        times: Vec<f64>,
        /// Radial sample count.
        #[arg(long, default_value_t = 2000)]
        cells: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate, extract exponents, rebuild asymptotically, cross-validate.
    Reproduce(ReproduceArgs),
}

#[derive(Parser)]
struct SimulateArgs {
    /// TOML run configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long = "grid-N")]
    grid_n: Option<usize>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Artifact output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Parser)]
struct ReproduceArgs {
    #[arg(long)]
    n: f64,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long = "grid-N")]
    grid_n: Option<usize>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Also write the summary JSON into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Stage::All)]
    stage: Stage,
}

#[derive(Clone, Copy, ValueEnum)]
enum Stage {
    /// Full chain: simulate, extract, reconstruct, compare.
    All,
    /// Simulation and artifacts only.
    Simulate,
    /// Asymptotic reconstruction only (no simulation).
    Asymptotics,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version are successful exits; anything else is a usage
            // (configuration) error.
            if e.use_stderr() {
                let _ = e.print();
                std::process::exit(1);
            }
            let _ = e.print();
            return;
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

/// SHA-256 over the canonical JSON of a parameter set, for artifact
/// headers of outputs not produced by a full `RunConfig`.
fn params_hash<T: Serialize>(params: &T) -> String {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_string(params).expect("serializable").as_bytes());
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        write!(hex, "{byte:02x}").expect("string write");
    }
    hex
}

fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    fs::write(path, text).map_err(|source| {
        PipelineError::Io(IoError::Write {
            path: path.display().to_string(),
            source,
        })
    })
}

fn ensure_dir(dir: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(|source| {
        PipelineError::Io(IoError::Write {
            path: dir.display().to_string(),
            source,
        })
    })
}

fn print_json<T: Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("serializable summary")
    );
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Exponents { n } => {
            let e = composite::exponents(n)?;
            #[derive(Serialize)]
            struct Out {
                n: f64,
                alpha: f64,
                beta: f64,
                gamma: f64,
                alpha_rational: String,
                beta_rational: String,
                gamma_rational: String,
            }
            print_json(&Out {
                n,
                alpha: e.alpha_f64(),
                beta: e.beta_f64(),
                gamma: e.gamma_f64(),
                alpha_rational: e.alpha.to_string(),
                beta_rational: e.beta.to_string(),
                gamma_rational: e.gamma.to_string(),
            });
            Ok(())
        }
        Command::Annular { eps, m0, out } => cmd_annular(eps, m0, out),
        Command::Touchdown {
            n,
            half_width,
            intervals,
            out,
        } => cmd_touchdown(n, half_width, intervals, out),
        Command::Composite {
            n,
            eps,
            m0,
            times,
            cells,
            out,
        } => cmd_composite(n, eps, m0, &times, cells, out),
        Command::Reproduce(args) => cmd_reproduce(args),
    }
}

fn build_config(
    config: Option<&Path>,
    n: Option<f64>,
    eps: Option<f64>,
    grid_n: Option<usize>,
    t_end: Option<f64>,
) -> Result<RunConfig, PipelineError> {
    let mut cfg = match config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(n) = n {
        cfg.model.n = n;
    }
    if let Some(eps) = eps {
        cfg.model.epsilon = eps;
    }
    if let Some(cells) = grid_n {
        cfg.grid.cells = cells;
    }
    if let Some(t_end) = t_end {
        cfg.run.t_end = t_end;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), PipelineError> {
    let cfg = build_config(
        args.config.as_deref(),
        args.n,
        args.eps,
        args.grid_n,
        args.t_end,
    )?;
    let artifacts = pipeline::run_simulation(&cfg)?;
    let manifest = pipeline::write_artifacts(&artifacts, &args.out)?;
    #[derive(Serialize)]
    struct Out<'a> {
        config_hash: &'a str,
        t_final: f64,
        diagnostics_rows: usize,
        snapshots: usize,
        touchdown: Option<chlab::solver::TouchdownEvent>,
        out_dir: String,
    }
    print_json(&Out {
        config_hash: &manifest.config_hash,
        t_final: manifest.t_final,
        diagnostics_rows: manifest.diagnostics_rows,
        snapshots: manifest.snapshot_files.len(),
        touchdown: manifest.touchdown,
        out_dir: args.out.display().to_string(),
    });
    Ok(())
}

fn cmd_annular(eps: f64, m0: f64, out: Option<PathBuf>) -> Result<(), PipelineError> {
    if !(eps > 0.0) || !(-0.5..0.5).contains(&m0) {
        return Err(ConfigError::Invalid {
            reason: format!("need eps > 0 and m0 in (-1/2, 1/2), got eps = {eps}, m0 = {m0}"),
        }
        .into());
    }
    let sol = annular::solve_annular(eps, m0, 1e-10)?;
    #[derive(Serialize)]
    struct Params {
        eps: f64,
        m0: f64,
    }
    #[derive(Serialize)]
    struct Out {
        eps: f64,
        m0: f64,
        r_star: f64,
        mu0: f64,
        b2: f64,
        u_wall: f64,
    }
    print_json(&Out {
        eps,
        m0,
        r_star: sol.r_star,
        mu0: sol.mu0,
        b2: sol.taylor_coefficient_b2(),
        u_wall: *sol.u_star.last().unwrap(),
    });
    if let Some(dir) = out {
        ensure_dir(&dir)?;
        let hash = params_hash(&Params { eps, m0 });
        let mut text = format!("# chlab artifact v{} config_sha256={hash}\n", io::ARTIFACT_VERSION);
        text.push_str("r,u,w,s\n");
        for i in 0..sol.r.len() {
            writeln!(
                text,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                sol.r[i], sol.u_star[i], sol.w[i], sol.s[i]
            )
            .expect("string write");
        }
        write_text(&dir.join("annular_profile.csv"), &text)?;
    }
    Ok(())
}

fn cmd_touchdown(
    n: f64,
    half_width: f64,
    intervals: usize,
    out: Option<PathBuf>,
) -> Result<(), PipelineError> {
    let profile = touchdown::solve_phi0_with(n, half_width, half_width, intervals, 1e-10)?;
    #[derive(Serialize)]
    struct Params {
        n: f64,
        half_width: f64,
        intervals: usize,
    }
    #[derive(Serialize)]
    struct Out {
        n: f64,
        y_min: f64,
        phi_min: f64,
        kappa: f64,
        kappa_far: f64,
        a_plus: f64,
        truncation: f64,
        residual: f64,
    }
    print_json(&Out {
        n,
        y_min: profile.y_min,
        phi_min: profile.phi_min,
        kappa: profile.kappa,
        kappa_far: profile.kappa_far,
        a_plus: profile.a_plus,
        truncation: profile.truncation,
        residual: profile.residual_norm(),
    });
    if let Some(dir) = out {
        ensure_dir(&dir)?;
        let hash = params_hash(&Params {
            n,
            half_width,
            intervals,
        });
        let mut text = format!("# chlab artifact v{} config_sha256={hash}\n", io::ARTIFACT_VERSION);
        text.push_str("y,phi0,dphi0,d2phi0\n");
        for i in 0..profile.mesh.len() {
            writeln!(
                text,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                profile.mesh[i], profile.phi0[i], profile.dphi0[i], profile.d2phi0[i]
            )
            .expect("string write");
        }
        write_text(&dir.join("touchdown_profile.csv"), &text)?;
    }
    Ok(())
}

fn cmd_composite(
    n: f64,
    eps: f64,
    m0: f64,
    times: &[f64],
    cells: usize,
    out: Option<PathBuf>,
) -> Result<(), PipelineError> {
    if times.iter().any(|&t| !(t > 0.0 && t.is_finite())) || cells < 2 {
        return Err(ConfigError::Invalid {
            reason: "times must be positive and cells >= 2".into(),
        }
        .into());
    }
    let ann = annular::solve_annular(eps, m0, 1e-10)?;
    let inner = touchdown::solve_phi0(n, touchdown::DEFAULT_HALF_WIDTH, 1e-10)?;
    let model = composite::composite_model(&ann, &inner)?;
    let mc = &model.constants;
    #[derive(Serialize)]
    struct Params<'a> {
        n: f64,
        eps: f64,
        m0: f64,
        times: &'a [f64],
        cells: usize,
    }
    #[derive(Serialize)]
    struct Out {
        n: f64,
        r_star: f64,
        mu0: f64,
        b2: f64,
        kappa: f64,
        c2: f64,
        a1: f64,
        flux_j: f64,
        scale_c: f64,
        scale_d: f64,
    }
    print_json(&Out {
        n,
        r_star: mc.r_star,
        mu0: mc.mu0,
        b2: mc.b2,
        kappa: mc.kappa,
        c2: mc.c2,
        a1: mc.a1,
        flux_j: mc.flux_j,
        scale_c: mc.scale_c,
        scale_d: mc.scale_d,
    });
    if let Some(dir) = out {
        ensure_dir(&dir)?;
        let hash = params_hash(&Params {
            n,
            eps,
            m0,
            times,
            cells,
        });
        for (idx, &t) in times.iter().enumerate() {
            let mut text =
                format!("# chlab artifact v{} config_sha256={hash}\n", io::ARTIFACT_VERSION);
            writeln!(text, "# t = {t:.16e}").expect("string write");
            text.push_str("r,v\n");
            for i in 0..=cells {
                let r = i as f64 / cells as f64;
                writeln!(text, "{:.16e},{:.16e}", r, model.eval(t, r)).expect("string write");
            }
            write_text(&dir.join(format!("composite_{idx:03}.csv")), &text)?;
        }
    }
    Ok(())
}

fn cmd_reproduce(args: ReproduceArgs) -> Result<(), PipelineError> {
    match args.stage {
        Stage::Simulate => {
            let mut cfg = RunConfig::default();
            cfg.model.n = args.n;
            if let Some(eps) = args.eps {
                cfg.model.epsilon = eps;
            }
            if let Some(cells) = args.grid_n {
                cfg.grid.cells = cells;
            }
            cfg.run.t_end = args.t_end.unwrap_or_else(|| pipeline::default_horizon(args.n));
            cfg.validate()?;
            let artifacts = pipeline::run_simulation(&cfg)?;
            match &args.out {
                Some(dir) => {
                    let manifest = pipeline::write_artifacts(&artifacts, dir)?;
                    print_json(&manifest);
                }
                None => {
                    #[derive(Serialize)]
                    struct Out {
                        t_final: f64,
                        diagnostics_rows: usize,
                        touchdown: Option<chlab::solver::TouchdownEvent>,
                    }
                    print_json(&Out {
                        t_final: artifacts.final_state.time,
                        diagnostics_rows: artifacts.diagnostics.len(),
                        touchdown: artifacts.touchdown,
                    });
                }
            }
            Ok(())
        }
        Stage::Asymptotics => {
            let eps = args.eps.unwrap_or(0.1);
            let ann = annular::solve_annular(eps, DEFAULT_M0, 1e-10)?;
            let inner = touchdown::solve_phi0(args.n, touchdown::DEFAULT_HALF_WIDTH, 1e-10)?;
            let model = composite::composite_model(&ann, &inner)?;
            let mc = &model.constants;
            #[derive(Serialize)]
            struct Out {
                n: f64,
                eps: f64,
                r_star: f64,
                mu0: f64,
                b2: f64,
                y_min: f64,
                phi_min: f64,
                kappa: f64,
                kappa_far: f64,
                c2: f64,
                a1: f64,
                flux_j: f64,
                scale_c: f64,
                scale_d: f64,
                matching_identity_rel_residual: f64,
            }
            print_json(&Out {
                n: args.n,
                eps,
                r_star: mc.r_star,
                mu0: mc.mu0,
                b2: mc.b2,
                y_min: inner.y_min,
                phi_min: inner.phi_min,
                kappa: inner.kappa,
                kappa_far: inner.kappa_far,
                c2: mc.c2,
                a1: mc.a1,
                flux_j: mc.flux_j,
                scale_c: mc.scale_c,
                scale_d: mc.scale_d,
                matching_identity_rel_residual: (2.0 * mc.b2
                    - mc.kappa * mc.scale_c / (mc.scale_d * mc.scale_d))
                    .abs()
                    / (2.0 * mc.b2),
            });
            Ok(())
        }
        Stage::All => {
            let summary = pipeline::reproduce(
                args.n,
                ReproduceOverrides {
                    cells: args.grid_n,
                    t_end: args.t_end,
                    epsilon: args.eps,
                },
            )?;
            print_json(&summary);
            if let Some(dir) = &args.out {
                ensure_dir(dir)?;
                let mut text =
                    serde_json::to_string_pretty(&summary).expect("serializable summary");
                text.push('\n');
                write_text(&dir.join("reproduce_summary.json"), &text)?;
            }
            // Cross-validation gate: the measured plateau exponents must
            // exist and sit near the exact rationals.
            if let Some(note) = &summary.extraction_note {
                return Err(PipelineError::Validation {
                    reason: format!("exponent plateaus not developed: {note}"),
                });
            }
            let (ah, bh) = (summary.alpha_hat.unwrap(), summary.beta_hat.unwrap());
            if (ah - summary.alpha_exact).abs() > 0.05 || (bh - summary.beta_exact).abs() > 0.05 {
                return Err(PipelineError::Validation {
                    reason: format!(
                        "measured exponents ({ah:.4}, {bh:.4}) deviate from exact ({:.4}, {:.4})",
                        summary.alpha_exact, summary.beta_exact
                    ),
                });
            }
            Ok(())
        }
    }
}
