//! Command-line interface: model validation, solving, characteristic
//! diagnostics, finite-time stability checks, and inverse source recovery.
//!
//! Exit codes: 0 success / no counterexample; 1 counterexample found;
//! 2 usage error or validation refusal.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use hyperprop::characteristics::{trace, TraceOptions};
use hyperprop::exprlang;
use hyperprop::fts::{check_c0, check_c00, estimate_topt, FtsOptions, Outcome, ToptResult};
use hyperprop::inverse::{reconstruct_state, recover_source, InverseOptions, InverseProblem};
use hyperprop::model::ModelFile;
use hyperprop::pifield::{sample_ch, InitialData};
use hyperprop::presets;
use hyperprop::qcalc::{QContext, QcOptions, StabilizationOptions};
use hyperprop::solver::{residuals, solve_marching, solve_qpower, SolveOptions};
use hyperprop::system::SystemSpec;

const EXIT_HELP: &str = "Exit codes:\n  0  success / no counterexample\n  1  counterexample found\n  2  usage error or validation refusal\n\nThread count: set RAYON_NUM_THREADS to override the worker pool size.";

#[derive(Parser)]
#[command(
    name = "hyperprop",
    version,
    about = "Propagation-operator calculus for 1D hyperbolic boundary-value problems",
    after_help = EXIT_HELP
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct GridArgs {
    /// Space cells of the solver grid.
    #[arg(long, default_value_t = 128)]
    nx: usize,
    /// Time cells; defaults to ceil(T * nx), which aligns unit-speed
    /// characteristics with grid nodes.
    #[arg(long)]
    nt: Option<usize>,
    /// Proceed even when validation reports failures.
    #[arg(long)]
    force: bool,
}

impl GridArgs {
    fn qc(&self) -> QcOptions {
        QcOptions {
            nx: self.nx,
            nt: self.nt,
            override_validation: self.force,
            ..QcOptions::default()
        }
    }
}

#[derive(Args, Clone)]
struct TrialArgs {
    /// Number of seeded witness fields.
    #[arg(long, default_value_t = 64)]
    trials: usize,
    /// Slice-vanishing tolerance.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Base RNG seed; trial i uses seed + i.
    #[arg(long, default_value_t = 0xc0de)]
    seed: u64,
    /// Cosine modes per axis in the sampled fields.
    #[arg(long, default_value_t = 4)]
    modes: usize,
    /// Target sup-norm of the sampled fields.
    #[arg(long, default_value_t = 1.0)]
    amplitude: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Qpower,
    Marching,
}

#[derive(Clone, Copy, ValueEnum)]
enum CriterionArg {
    C0,
    C00,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExampleName {
    #[value(name = "sec3-2")]
    Sec32,
    #[value(name = "sec3-3")]
    Sec33,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Baseline,
    Suf2,
    Suf1,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sampled structural checks on a model file.
    #[command(after_help = EXIT_HELP)]
    Validate {
        #[arg(long)]
        model: PathBuf,
    },
    /// Solve the initial-boundary value problem and write the field as CSV.
    #[command(after_help = EXIT_HELP)]
    Solve {
        #[arg(long)]
        model: PathBuf,
        /// Initial data: comma-separated expressions in x, one per component.
        #[arg(long)]
        phi: String,
        /// Time horizon.
        #[arg(long = "T")]
        t_horizon: f64,
        #[command(flatten)]
        grid: GridArgs,
        /// Solution path to use.
        #[arg(long, value_enum, default_value_t = Method::Qpower)]
        method: Method,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Trace one characteristic back to its exit; emits the path as CSV.
    #[command(after_help = EXIT_HELP)]
    Trace {
        #[arg(long)]
        model: PathBuf,
        /// Component index, 1-based.
        #[arg(long)]
        j: usize,
        #[arg(long)]
        x: f64,
        #[arg(long)]
        t: f64,
        /// RK4 step in xi.
        #[arg(long, default_value_t = 1.0 / 1024.0)]
        step: f64,
    },
    /// Apply Q-powers to a seeded compatible field; emits per-iterate
    /// sup-norms as CSV.
    #[command(after_help = EXIT_HELP)]
    Qpower {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long = "T")]
        t_horizon: f64,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        modes: usize,
        #[arg(long, default_value_t = 1.0)]
        amplitude: f64,
        /// Optional CSV path for the final iterate.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the slice-vanishing stability criterion on sampled fields.
    #[command(after_help = EXIT_HELP)]
    FtsCheck {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "T")]
        t_horizon: f64,
        /// Power to apply: an integer or `auto` (stabilization index).
        #[arg(long, default_value = "auto")]
        k: String,
        #[arg(long, value_enum, default_value_t = CriterionArg::C0)]
        criterion: CriterionArg,
        /// Number of repeated slices for the autonomous criterion.
        #[arg(long, default_value_t = 3)]
        kmax: usize,
        #[command(flatten)]
        trials: TrialArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Bracket the optimal stabilization time by bisection.
    #[command(after_help = EXIT_HELP)]
    Topt {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "Tmax")]
        t_max: f64,
        #[arg(long, default_value_t = 0.05)]
        bisect_tol: f64,
        #[command(flatten)]
        trials: TrialArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Recover the source of du/dt = Au + f from u(0) and u(r).
    #[command(after_help = EXIT_HELP)]
    Inverse {
        #[arg(long)]
        model: PathBuf,
        /// u(0): comma-separated expressions in x, or @file.csv with samples.
        #[arg(long)]
        u0: String,
        /// u(r): same format as --u0.
        #[arg(long)]
        ur: String,
        /// Optional analytic derivative of u(0).
        #[arg(long)]
        u0_deriv: Option<String>,
        /// Optional analytic derivative of u(r).
        #[arg(long)]
        ur_deriv: Option<String>,
        #[arg(long)]
        r: f64,
        /// Output CSV path for the recovered source.
        #[arg(long)]
        out: PathBuf,
        /// Optional CSV path for a reconstructed state slice.
        #[arg(long)]
        state_out: Option<PathBuf>,
        /// Time of the reconstructed slice (defaults to r).
        #[arg(long)]
        state_time: Option<f64>,
        /// Space cells.
        #[arg(long, default_value_t = 100)]
        nx: usize,
    },
    /// Run a bundled example problem.
    #[command(after_help = EXIT_HELP)]
    Example {
        #[arg(long, value_enum)]
        name: ExampleName,
        #[arg(long, value_enum, default_value_t = VariantArg::Suf2)]
        variant: VariantArg,
    },
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn load_spec(path: &std::path::Path) -> anyhow::Result<SystemSpec> {
    let model = ModelFile::load(path).with_context(|| format!("loading {}", path.display()))?;
    Ok(model.to_spec()?)
}

/// Split on commas at parenthesis depth zero, so expressions may contain
/// function calls.
fn split_top_level(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '(' => {
                depth += 1;
                cur.push(c);
            }
            ')' => {
                depth -= 1;
                cur.push(c);
            }
            ',' if depth == 0 => {
                out.push(cur.trim().to_string());
                cur.clear();
            }
            _ => cur.push(c),
        }
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

fn parse_initial_data(arg: &str, n: usize) -> anyhow::Result<InitialData> {
    if let Some(path) = arg.strip_prefix('@') {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with('x')) {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .with_context(|| format!("{path}:{}", lineno + 1))?;
            if vals.len() != n + 1 {
                bail!("{path}:{}: expected x plus {n} values", lineno + 1);
            }
            rows.push(vals[1..].to_vec());
        }
        if rows.len() < 2 {
            bail!("{path}: need at least two sample rows");
        }
        let comps: Vec<Vec<f64>> = (0..n)
            .map(|j| rows.iter().map(|r| r[j]).collect())
            .collect();
        return Ok(InitialData::from_samples(comps));
    }
    let parts = split_top_level(arg);
    if parts.len() != n {
        bail!(
            "expected {n} comma-separated expressions, got {}",
            parts.len()
        );
    }
    let exprs = parts
        .iter()
        .map(|p| exprlang::parse(p, &["x"]))
        .collect::<hyperprop::Result<Vec<_>>>()?;
    Ok(InitialData::from_exprs(exprs))
}

fn samples_to_csv(header: &str, rows: &[Vec<f64>], nx: usize) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for ix in 0..=nx {
        let x = ix as f64 / nx as f64;
        out.push_str(&format!("{x}"));
        for comp in rows {
            out.push_str(&format!(",{}", comp[ix]));
        }
        out.push('\n');
    }
    out
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Validate { model } => {
            let spec = load_spec(&model)?;
            let report = spec.validate();
            print!("{report}");
            if report.passed() {
                println!("validation passed");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("validation failed");
                Ok(ExitCode::from(2))
            }
        }
        Command::Solve {
            model,
            phi,
            t_horizon,
            grid,
            method,
            out,
        } => {
            let spec = load_spec(&model)?;
            let phi = parse_initial_data(&phi, spec.n())?;
            let opts = SolveOptions {
                qc: grid.qc(),
                stab: StabilizationOptions::default(),
            };
            let field = match method {
                Method::Qpower => solve_qpower(&spec, &phi, t_horizon, &opts)?,
                Method::Marching => solve_marching(&spec, &phi, t_horizon, &opts)?,
            };
            let report = residuals(&spec, &field, &phi, 2, &opts)?;
            print!("{report}");
            std::fs::write(&out, field.to_csv())?;
            println!("field written to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Trace {
            model,
            j,
            x,
            t,
            step,
        } => {
            let spec = load_spec(&model)?;
            if j == 0 || j > spec.n() {
                bail!("component index must be in 1..={}", spec.n());
            }
            let exit = trace(
                &spec,
                j - 1,
                x,
                t,
                TraceOptions {
                    step,
                    ..TraceOptions::default()
                },
            )?;
            println!(
                "# exit: kind={:?} x_exit={} tau={} weight={}",
                exit.kind, exit.x_exit, exit.tau, exit.weight
            );
            println!("xi,omega");
            for p in &exit.path {
                println!("{},{}", p.xi, p.omega);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Qpower {
            model,
            k,
            t_horizon,
            grid,
            seed,
            modes,
            amplitude,
            out,
        } => {
            let spec = load_spec(&model)?;
            let ctx = QContext::new(&spec, InitialData::zero(spec.n()), t_horizon, grid.qc())?;
            let w = sample_ch(&spec, t_horizon, ctx.nx(), ctx.nt(), seed, modes, amplitude)?;
            let phi = InitialData::from_field_bottom(&w);
            let (field, sups) = ctx.q_power_diagnostics(&w, k, &phi)?;
            let mut header = String::from("iter");
            for j in 1..=spec.n() {
                header.push_str(&format!(",sup_u{j}"));
            }
            println!("{header}");
            for (i, row) in sups.iter().enumerate() {
                let mut line = format!("{}", i + 1);
                for v in row {
                    line.push_str(&format!(",{v}"));
                }
                println!("{line}");
            }
            if let Some(path) = out {
                std::fs::write(&path, field.to_csv())?;
                println!("# final iterate written to {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::FtsCheck {
            model,
            t_horizon,
            k,
            criterion,
            kmax,
            trials,
            grid,
        } => {
            let spec = load_spec(&model)?;
            let k = match k.as_str() {
                "auto" => None,
                other => Some(
                    other
                        .parse::<usize>()
                        .map_err(|_| anyhow!("--k takes an integer or `auto`"))?,
                ),
            };
            let opts = FtsOptions {
                trials: trials.trials,
                tol: trials.tol,
                seed: trials.seed,
                k,
                modes: trials.modes,
                amplitude: trials.amplitude,
                qc: grid.qc(),
                stab: StabilizationOptions::default(),
            };
            let verdict = match criterion {
                CriterionArg::C0 => check_c0(&spec, t_horizon, &opts)?,
                CriterionArg::C00 => check_c00(&spec, t_horizon, k, kmax, &opts)?,
            };
            println!("{verdict}");
            match verdict.outcome {
                Outcome::NoCounterexample => Ok(ExitCode::SUCCESS),
                Outcome::Counterexample(_) => Ok(ExitCode::from(1)),
            }
        }
        Command::Topt {
            model,
            t_max,
            bisect_tol,
            trials,
            grid,
        } => {
            let spec = load_spec(&model)?;
            let opts = FtsOptions {
                trials: trials.trials,
                tol: trials.tol,
                seed: trials.seed,
                k: None,
                modes: trials.modes,
                amplitude: trials.amplitude,
                qc: grid.qc(),
                stab: StabilizationOptions::default(),
            };
            match estimate_topt(&spec, t_max, bisect_tol, &opts)? {
                ToptResult::Bracket(b) => {
                    println!(
                        "optimal stabilization time in [{}, {}] ({} probes)",
                        b.lo,
                        b.hi,
                        b.probes.len()
                    );
                    Ok(ExitCode::SUCCESS)
                }
                ToptResult::NoCertificate { t_max } => {
                    println!("no certificate at or below T = {t_max} (counterexample found)");
                    Ok(ExitCode::from(1))
                }
            }
        }
        Command::Inverse {
            model,
            u0,
            ur,
            u0_deriv,
            ur_deriv,
            r,
            out,
            state_out,
            state_time,
            nx,
        } => {
            let spec = load_spec(&model)?;
            let n = spec.n();
            let u0 = parse_initial_data(&u0, n)?;
            let ur = parse_initial_data(&ur, n)?;
            let u0_deriv = u0_deriv.map(|s| parse_initial_data(&s, n)).transpose()?;
            let ur_deriv = ur_deriv.map(|s| parse_initial_data(&s, n)).transpose()?;
            let opts = InverseOptions {
                qc: QcOptions {
                    nx,
                    ..QcOptions::default()
                },
                ..InverseOptions::default()
            };
            let problem = InverseProblem::new(spec.clone(), r, u0, ur.clone(), u0_deriv, ur_deriv)?;
            let rec = recover_source(&problem, &opts)?;
            println!(
                "branch: {}",
                if rec.summed_branch {
                    "r < T (semigroup sum)"
                } else {
                    "r >= T (generator only)"
                }
            );
            println!(
                "nilpotency time bracket: [{}, {}] (used T = {})",
                rec.bracket.0, rec.bracket.1, rec.t_used
            );
            println!("semigroup terms n0 = {}", rec.n0);

            let mut header = String::from("x");
            for j in 1..=n {
                header.push_str(&format!(",f{j}"));
            }
            std::fs::write(&out, samples_to_csv(&header, &rec.f, nx))?;
            println!("source written to {}", out.display());

            let t_slice = state_time.unwrap_or(r);
            let f_data = InitialData::from_samples(rec.f.clone());
            let state = reconstruct_state(&problem, &f_data, t_slice, &opts)?;
            if t_slice == r {
                let target = ur.sample(nx)?;
                let mut worst = 0.0f64;
                for j in 0..n {
                    for ix in 0..=nx {
                        worst = worst.max((state[j][ix] - target[j][ix]).abs());
                    }
                }
                println!("endpoint residual sup|u(r) - ur| = {worst:.3e}");
            }
            if let Some(path) = state_out {
                let mut header = String::from("x");
                for j in 1..=n {
                    header.push_str(&format!(",u{j}"));
                }
                std::fs::write(&path, samples_to_csv(&header, &state, nx))?;
                println!("state at t = {t_slice} written to {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Example { name, variant } => run_example(name, variant),
    }
}

fn run_example(name: ExampleName, variant: VariantArg) -> anyhow::Result<ExitCode> {
    match name {
        ExampleName::Sec32 => {
            let variant = match variant {
                VariantArg::Baseline => presets::SineVariant::Baseline,
                VariantArg::Suf2 => presets::SineVariant::ZeroBoth,
                VariantArg::Suf1 => presets::SineVariant::ZeroS,
            };
            let preset = presets::sine_feedback(variant);
            println!("example {}: {}", preset.name, preset.description);
            let spec = preset.spec()?;
            let report = spec.validate();
            print!("{report}");
            match variant {
                presets::SineVariant::Baseline => println!(
                    "baseline reflections never switch off; probing (C0) at T = {} (expected to fail)",
                    preset.t_check
                ),
                presets::SineVariant::ZeroBoth => println!(
                    "both reflections vanish on [1, 2.5]; (C0) should hold with k = 1 at T = {}",
                    preset.t_check
                ),
                presets::SineVariant::ZeroS => println!(
                    "one reflection vanishes on [1, 3.2]; (C0) should hold with k = 2 at T = {}",
                    preset.t_check
                ),
            }
            let opts = FtsOptions {
                trials: 32,
                k: preset.k_check,
                ..FtsOptions::default()
            };
            let verdict = check_c0(&spec, preset.t_check, &opts)?;
            println!("{verdict}");
            match verdict.outcome {
                Outcome::NoCounterexample => Ok(ExitCode::SUCCESS),
                Outcome::Counterexample(_) => Ok(ExitCode::from(1)),
            }
        }
        ExampleName::Sec33 => {
            let preset = presets::driven_feedback();
            println!("example {}: {}", preset.name, preset.description);
            let spec = preset.spec()?;
            let report = spec.validate();
            print!("{report}");
            println!("the homogeneity check fails by design: h(t, 0) = (g(t), 0) != 0 for t > 4");

            // Every sampled field has a vanishing second-power slice at t = 3.
            let qc = QcOptions {
                nx: 96,
                override_validation: true,
                ..QcOptions::default()
            };
            let ctx = QContext::new(&spec, InitialData::zero(2), 3.0, qc)?;
            let mut worst = 0.0f64;
            for seed in 0..16 {
                let w = sample_ch(&spec, 3.0, ctx.nx(), ctx.nt(), seed, 4, 1.0)?;
                let phi = InitialData::from_field_bottom(&w);
                let v = ctx.q_power_with(&w, 2, &phi)?;
                for j in 0..2 {
                    for ix in 0..=ctx.nx() {
                        worst = worst.max(v.node(j, ix, ctx.nt()).abs());
                    }
                }
            }
            println!("max |[Q^2 w](x, 3)| over 16 sampled fields: {worst:.3e}");

            let opts = SolveOptions {
                qc: QcOptions {
                    nx: 96,
                    override_validation: true,
                    ..QcOptions::default()
                },
                stab: StabilizationOptions::default(),
            };
            let u = solve_marching(&spec, &InitialData::zero(2), 6.0, &opts)?;
            let at5 = u.slice_sup(5.0);
            println!("yet the driven solution from zero data has sup |u(., 5)| = {at5:.3}");
            println!(
                "slice vanishing does not imply stabilization here: the criterion needs h(t, 0) = 0"
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}
