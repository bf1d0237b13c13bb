use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;

use fano_ep::ep::{analytic_ep, numeric_ep, EpGuess, ExceptionalPoint};
use fano_ep::experiment::{run_experiment, ExperimentSpec, Scenario};
use fano_ep::fit::{fit_multistart, FitOptions, FitResult, ModelKind};
use fano_ep::io;
use fano_ep::model::{sample_curve, Channel, Coupling, OscillatorParams};
use fano_ep::spectral::{char_poly, resonance_poles, QuarticPoly};
use fano_ep::{Error, Result};

#[derive(Parser)]
#[command(
    name = "fano-ep",
    version,
    about = "Exceptional points and Fano fits of two coupled oscillators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Locate an exceptional point.
    #[command(subcommand)]
    Ep(EpCommand),
    /// Sample a cross section to CSV.
    Xsec(XsecArgs),
    /// Print the four roots of det D.
    Poles(PolesArgs),
    /// Fit a Fano family to a CSV curve.
    Fit(FitArgs),
    /// Rerun a reference table or figure.
    Reproduce(ReproduceArgs),
}

#[derive(Subcommand)]
enum EpCommand {
    /// Closed form for undamped oscillators.
    Analytic {
        #[arg(long)]
        omega1: f64,
        #[arg(long)]
        omega2: f64,
        #[arg(long)]
        json: bool,
    },
    /// Newton iteration from a starting guess.
    Numeric {
        #[command(flatten)]
        osc: OscArgs,
        #[arg(long)]
        f0: f64,
        #[arg(long)]
        g0: f64,
        #[arg(long)]
        wr0: f64,
        #[arg(long, allow_hyphen_values = true)]
        wi0: f64,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct OscArgs {
    #[arg(long)]
    omega1: f64,
    #[arg(long)]
    omega2: f64,
    #[arg(long, default_value_t = 0.0)]
    k1: f64,
    #[arg(long, default_value_t = 0.0)]
    k2: f64,
}

impl OscArgs {
    fn params(&self) -> Result<OscillatorParams> {
        OscillatorParams::new(self.omega1, self.omega2, self.k1, self.k2)
    }
}

#[derive(Args)]
struct CouplingArgs {
    #[arg(long, allow_hyphen_values = true)]
    f: f64,
    #[arg(long, allow_hyphen_values = true)]
    g: f64,
}

#[derive(Args)]
struct XsecArgs {
    #[command(flatten)]
    osc: OscArgs,
    #[command(flatten)]
    coupling: CouplingArgs,
    /// 11, 22, 12, 21, anti or eff.
    #[arg(long, default_value = "11")]
    channel: Channel,
    #[arg(long, allow_hyphen_values = true)]
    from: f64,
    #[arg(long, allow_hyphen_values = true)]
    to: f64,
    #[arg(long)]
    points: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PolesArgs {
    #[command(flatten)]
    osc: OscArgs,
    #[command(flatten)]
    coupling: CouplingArgs,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct FitArgs {
    /// single, double, energy-dep or simplified.
    model: ModelKind,
    #[arg(long)]
    input: PathBuf,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_hyphen_values = true)]
    window: Option<Vec<f64>>,
    /// Seed poles as RE,IM; repeatable.
    #[arg(long = "pole", value_parser = parse_complex, allow_hyphen_values = true)]
    poles: Vec<Complex64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = FitOptions::default().multistart)]
    multistart: usize,
    #[arg(long, default_value_t = FitOptions::default().max_iterations)]
    max_iterations: usize,
    /// Keep the phase of the energy dependent form at pi.
    #[arg(long)]
    hold_delta: bool,
    #[arg(long)]
    report: PathBuf,
    /// Also write omega,sigma,fit.
    #[arg(long)]
    curve_out: Option<PathBuf>,
}

#[derive(Args)]
struct ReproduceArgs {
    scenario: Scenario,
    #[arg(long)]
    outdir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    channel: Option<Channel>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_hyphen_values = true)]
    window: Option<Vec<f64>>,
}

fn parse_complex(s: &str) -> std::result::Result<Complex64, String> {
    let (re, im) = s
        .split_once(',')
        .ok_or_else(|| format!("expected RE,IM, got '{s}'"))?;
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("'{v}': {e}"));
    Ok(Complex64::new(parse(re)?, parse(im)?))
}

fn window(v: &Option<Vec<f64>>) -> Option<(f64, f64)> {
    v.as_ref().map(|w| (w[0], w[1]))
}

#[derive(Serialize)]
struct EpOutput {
    f: f64,
    g: f64,
    omega_re: f64,
    omega_im: f64,
    residual: f64,
    iterations: usize,
}

fn print_ep(ep: &ExceptionalPoint, json: bool) -> Result<()> {
    if json {
        let out = EpOutput {
            f: ep.f,
            g: ep.g,
            omega_re: ep.omega.re,
            omega_im: ep.omega.im,
            residual: ep.residual,
            iterations: ep.iterations,
        };
        print!("{}", io::to_json(&out)?);
    } else {
        println!("f_EP     = {:.6}", ep.f);
        println!("g_EP     = {:.6}", ep.g);
        println!("omega_EP = {:.6} {:+.6}i", ep.omega.re, ep.omega.im);
        println!("residual = {:.3e}", ep.residual);
    }
    Ok(())
}

#[derive(Serialize)]
struct PolesOutput {
    poles: Vec<[f64; 2]>,
    residuals: Vec<f64>,
}

#[derive(Serialize)]
struct FitReport<'a> {
    input: String,
    window: Option<(f64, f64)>,
    points: usize,
    seed: u64,
    version: &'static str,
    #[serde(flatten)]
    result: &'a FitResult,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ep(EpCommand::Analytic {
            omega1,
            omega2,
            json,
        }) => {
            OscillatorParams::undamped(omega1, omega2)?;
            print_ep(&analytic_ep(omega1, omega2), json)
        }
        Command::Ep(EpCommand::Numeric {
            osc,
            f0,
            g0,
            wr0,
            wi0,
            json,
        }) => {
            let ep = numeric_ep(
                &osc.params()?,
                EpGuess {
                    f: f0,
                    g: g0,
                    omega: Complex64::new(wr0, wi0),
                },
            )?;
            print_ep(&ep, json)
        }
        Command::Xsec(a) => {
            let c = Coupling::new(a.coupling.f, a.coupling.g)?;
            let curve = sample_curve(&a.osc.params()?, &c, (a.from, a.to), a.points, a.channel)?;
            io::write_curve_file(&a.out, &curve, None)
        }
        Command::Poles(a) => {
            let p = a.osc.params()?;
            let c = Coupling::new(a.coupling.f, a.coupling.g)?;
            let poly = char_poly(&p, &c);
            let roots = resonance_poles(&p, &c);
            let residuals: Vec<f64> = roots
                .iter()
                .map(|&r| poly.eval(r).norm() / QuarticPoly::residual_scale(r))
                .collect();
            if a.json {
                let out = PolesOutput {
                    poles: roots.iter().map(|r| [r.re, r.im]).collect(),
                    residuals,
                };
                print!("{}", io::to_json(&out)?);
            } else {
                for r in roots {
                    println!("{:.12} {:+.12}i", r.re, r.im);
                }
            }
            Ok(())
        }
        Command::Fit(a) => {
            let mut curve = io::read_curve_file(&a.input, Channel::default())?;
            let win = window(&a.window);
            if let Some((lo, hi)) = win {
                if !(lo < hi) {
                    return Err(Error::InvalidWindow {
                        lo,
                        hi,
                        points: curve.len(),
                    });
                }
                curve = curve.restrict(lo, hi)?;
            }
            let opts = FitOptions {
                seed: a.seed,
                multistart: a.multistart,
                max_iterations: a.max_iterations,
                hold_delta: a.hold_delta,
                ..FitOptions::default()
            };
            if opts.multistart == 0 || opts.max_iterations == 0 {
                return Err(Error::InvalidParameter(
                    "multistart and max-iterations must be at least 1".into(),
                ));
            }
            let poles = (!a.poles.is_empty()).then_some(a.poles.as_slice());
            let res = fit_multistart(a.model, &curve, poles, &opts)?;
            let report = FitReport {
                input: a.input.display().to_string(),
                window: win,
                points: curve.len(),
                seed: a.seed,
                version: env!("CARGO_PKG_VERSION"),
                result: &res,
            };
            io::write_json_file(&a.report, &report)?;
            if let Some(path) = &a.curve_out {
                let fit: Vec<f64> = curve
                    .energies()
                    .iter()
                    .map(|&e| res.params.eval(e))
                    .collect();
                io::write_curve_file(path, &curve, Some(&fit))?;
            }
            Ok(())
        }
        Command::Reproduce(a) => {
            let mut spec = ExperimentSpec::preset(a.scenario)?;
            spec.seed = a.seed;
            if let Some(ch) = a.channel {
                spec.channel = ch;
            }
            if let Some(n) = a.points {
                spec.points = n;
            }
            spec.window = window(&a.window);
            let out = run_experiment(&spec)?;
            out.write(&a.outdir)?;
            for case in &out.report.cases {
                println!(
                    "{} {} rms={:.3e}",
                    case.label,
                    if case.pass { "pass" } else { "FAIL" },
                    case.rms.unwrap_or(0.0)
                );
            }
            for t in &out.report.trends {
                println!("{} {}", t.name, if t.pass { "pass" } else { "FAIL" });
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
