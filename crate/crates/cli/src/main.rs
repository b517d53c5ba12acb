//! Command-line front end for the amplification toolkit.
//!
//! Verbs: `run` one exact protocol instance, `verify` the simulator against
//! the closed forms over a parameter grid, `sweep` analytic curves into CSV,
//! `sample` Monte Carlo estimates, and `preset` for the bundled figure
//! datasets.
//!
//! Exit codes: 0 success, 1 verification violation, 2 invalid parameters or
//! I/O failure.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use wnla::protocol::run_nla_with_element;
use wnla::{
    bs50, curve, eta_prime, gain, run_nla, sample_run, success_prob, Amplitude, DetectionPattern,
    Port, ProtocolConfig, ProtocolOutcome, Quantity, TwoModeElement, MAX_MODES,
};

/// Tolerance for simulator-versus-formula agreement in `verify`.
const VERIFY_TOL: f64 = 1e-12;

#[derive(Parser)]
#[command(
    name = "wnla",
    version,
    about = "Exact simulator and analytics for noiseless amplification of single-photon W states"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one exact protocol instance and print its figures of merit.
    Run(RunArgs),
    /// Check the simulator against the closed forms over a parameter grid.
    Verify(VerifyArgs),
    /// Tabulate curves over the transmission and write them as CSV.
    Sweep(SweepArgs),
    /// Estimate the figures of merit by Monte Carlo sampling.
    Sample(SampleArgs),
    /// Write one of the bundled figure datasets as CSV.
    Preset(PresetArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Number of spatial modes sharing the photon.
    #[arg(long)]
    n: u32,
    /// Single-photon weight of the input state, in [0, 1].
    #[arg(long)]
    eta: f64,
    /// Transmission of every variable splitter, in [0, 1].
    #[arg(long)]
    t: f64,
    /// Output rendering.
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args)]
struct VerifyArgs {
    /// Largest mode count included in the grid (2..=16).
    #[arg(long, default_value_t = 5)]
    n_max: u32,
    /// Replace the balanced splitter by a deliberately broken element; the
    /// verification must then fail. Self-test hook.
    #[arg(long, hide = true)]
    inject_bs_sign_flip: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// Quantity to tabulate.
    #[arg(long, value_enum)]
    quantity: QuantityArg,
    /// Mode counts, comma separated.
    #[arg(long = "n", value_delimiter = ',', default_value = "3")]
    ns: Vec<u32>,
    /// Single-photon weights, comma separated.
    #[arg(long = "eta", value_delimiter = ',', required = true)]
    etas: Vec<f64>,
    /// Number of interior transmission steps: t = k/(steps+1), k = 1..=steps.
    #[arg(long, default_value_t = 99)]
    steps: u32,
    /// Also emit the t = 0 and t = 1 rows, flagged as limits.
    #[arg(long)]
    include_limits: bool,
    /// Add full-simulation rows next to the analytic ones.
    #[arg(long)]
    cross_check: bool,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    /// Number of spatial modes sharing the photon.
    #[arg(long)]
    n: u32,
    /// Single-photon weight of the input state, in [0, 1].
    #[arg(long)]
    eta: f64,
    /// Transmission of every variable splitter, in [0, 1].
    #[arg(long)]
    t: f64,
    /// Number of protocol shots to draw.
    #[arg(long, default_value_t = 100_000)]
    shots: u64,
    /// Random stream seed; equal seeds give byte-identical reports.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PresetArgs {
    /// Which bundled dataset to write.
    #[arg(value_enum)]
    figure: Figure,
    /// Add full-simulation rows next to the analytic ones.
    #[arg(long)]
    cross_check: bool,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum QuantityArg {
    /// Gain G.
    Gain,
    /// Success probability P.
    SuccessProb,
}

impl From<QuantityArg> for Quantity {
    fn from(q: QuantityArg) -> Self {
        match q {
            QuantityArg::Gain => Quantity::Gain,
            QuantityArg::SuccessProb => Quantity::SuccessProb,
        }
    }
}

/// The bundled figure datasets.
///
/// All four sweep t over the 99-point grid k/100. fig3 tabulates the gain at
/// n = 3 for four single-photon weights; fig4 and fig5 tabulate the success
/// probability for n = 3..6 at eta = 0.2 and eta = 0.8; fig6 tabulates the
/// success probability at n = 3 for the same four weights as fig3.
#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Figure {
    Fig3,
    Fig4,
    Fig5,
    Fig6,
}

/// How a command run goes wrong, mapped to the exit code.
enum Failure {
    /// Bad parameters or I/O: exit code 2.
    Invalid(String),
    /// A verified guarantee does not hold: exit code 1.
    Violation(String),
}

impl From<wnla::Error> for Failure {
    fn from(e: wnla::Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Violation(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run(args) => cmd_run(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Sample(args) => cmd_sample(args),
        Command::Preset(args) => cmd_preset(args),
    }
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let cfg = ProtocolConfig::new(args.n, args.eta, args.t)?;
    let out = run_nla(&cfg)?;
    match args.format {
        Format::Json => println!("{}", out.to_json()),
        Format::Text => print_outcome(&out),
    }
    Ok(())
}

fn print_outcome(out: &ProtocolOutcome) {
    println!("n = {}  eta = {}  t = {}", out.n, out.eta, out.t);
    println!("eta'      = {:.12}", out.eta_prime);
    println!("P_success = {:.12}", out.success_prob);
    let limit = if out.gain_is_limit {
        " (boundary limit)"
    } else {
        ""
    };
    println!("gain      = {:.12}{limit}", out.gain);
    // The closed form settles the G > 1 question exactly even where the
    // simulated gain sits within an ulp of the threshold.
    let amplifying = wnla::is_amplifying(out.eta, out.t).unwrap_or(out.gain > 1.0);
    println!("amplifying (G > 1): {amplifying}");
    println!();
    println!("pattern  probability     fidelity");
    for record in &out.per_pattern {
        println!(
            "{:<8} {:<15.12} {:.12}",
            pattern_label(&record.pattern),
            record.prob,
            record.fidelity_to_w
        );
    }
}

/// Renders an accepted pattern as one +/- character per detector pair.
fn pattern_label(pattern: &DetectionPattern) -> String {
    match pattern.ports() {
        Some(ports) => ports
            .iter()
            .map(|p| match p {
                Port::Plus => '+',
                Port::Minus => '-',
            })
            .collect(),
        None => "?".repeat(pattern.num_pairs()),
    }
}

fn cmd_verify(args: VerifyArgs) -> Result<(), Failure> {
    if !(2..=MAX_MODES).contains(&args.n_max) {
        return Err(Failure::Invalid(format!(
            "--n-max must lie in 2..={MAX_MODES}, got {}",
            args.n_max
        )));
    }
    let element = if args.inject_bs_sign_flip {
        // Kill the interference sign. A flipped-but-unitary splitter only
        // relabels the detector ports, which no figure of merit can see; to
        // give the check teeth the injected element must break unitarity.
        let r = Amplitude::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        TwoModeElement::new_unchecked([[r, r], [r, r]])
    } else {
        bs50()
    };

    let etas = [0.1, 0.3, 0.5, 0.7, 0.9];
    let ts: Vec<f64> = (0..10).map(|j| f64::from(2 * j + 1) / 20.0).collect();

    let mut max_dev_ep = 0.0f64;
    let mut max_dev_p = 0.0f64;
    let mut max_dev_g = 0.0f64;
    let mut max_gain_spread = 0.0f64;
    let mut max_dev_uniform = 0.0f64;
    let mut min_fidelity = 1.0f64;

    let fail = |n: u32, eta: f64, t: f64, what: String| {
        Failure::Violation(format!("at (n={n}, eta={eta}, t={t}): {what}"))
    };

    for &eta in &etas {
        for &t in &ts {
            let mut gains: Vec<f64> = Vec::new();
            for n in 2..=args.n_max {
                let cfg = ProtocolConfig::new(n, eta, t)?;
                let out = run_nla_with_element(&cfg, &element)
                    .map_err(|e| fail(n, eta, t, format!("simulator error: {e}")))?;

                let dev_ep = (out.eta_prime - eta_prime(eta, t, n)?).abs();
                let dev_p = (out.success_prob - success_prob(eta, t, n)?).abs();
                let dev_g = (out.gain - gain(eta, t)?.value).abs();
                if dev_ep > VERIFY_TOL || dev_p > VERIFY_TOL || dev_g > VERIFY_TOL {
                    return Err(fail(
                        n,
                        eta,
                        t,
                        format!(
                            "|d eta'| = {dev_ep:.3e}, |dP| = {dev_p:.3e}, |dG| = {dev_g:.3e} \
                             (tolerance {VERIFY_TOL:.0e})"
                        ),
                    ));
                }
                if (out.gain > 1.0) != (t < 0.5) {
                    return Err(fail(
                        n,
                        eta,
                        t,
                        format!(
                            "G = {} on the wrong side of the t = 1/2 threshold",
                            out.gain
                        ),
                    ));
                }

                let uniform = out.success_prob / out.per_pattern.len() as f64;
                for record in &out.per_pattern {
                    let dev = (record.prob - uniform).abs();
                    if dev > VERIFY_TOL {
                        return Err(fail(
                            n,
                            eta,
                            t,
                            format!(
                                "pattern {} has probability {} against the uniform {}",
                                pattern_label(&record.pattern),
                                record.prob,
                                uniform
                            ),
                        ));
                    }
                    if record.fidelity_to_w < 1.0 - VERIFY_TOL {
                        return Err(fail(
                            n,
                            eta,
                            t,
                            format!(
                                "pattern {} heralds fidelity {}",
                                pattern_label(&record.pattern),
                                record.fidelity_to_w
                            ),
                        ));
                    }
                    max_dev_uniform = max_dev_uniform.max(dev);
                    min_fidelity = min_fidelity.min(record.fidelity_to_w);
                }

                max_dev_ep = max_dev_ep.max(dev_ep);
                max_dev_p = max_dev_p.max(dev_p);
                max_dev_g = max_dev_g.max(dev_g);
                gains.push(out.gain);
            }
            let lo = gains.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi - lo > VERIFY_TOL {
                return Err(fail(
                    args.n_max,
                    eta,
                    t,
                    format!(
                        "gain spreads by {:.3e} across n = 2..={}",
                        hi - lo,
                        args.n_max
                    ),
                ));
            }
            max_gain_spread = max_gain_spread.max(hi - lo);
        }
    }

    println!(
        "grid: n = 2..={}, eta in {{0.1, 0.3, 0.5, 0.7, 0.9}}, t in {{0.05, 0.15, ..., 0.95}}",
        args.n_max
    );
    println!("max |sim eta' - formula|     = {max_dev_ep:.3e}");
    println!("max |sim P - formula|        = {max_dev_p:.3e}");
    println!("max |sim G - formula|        = {max_dev_g:.3e}");
    println!("max gain spread across n     = {max_gain_spread:.3e}");
    println!("max |pattern prob - P/2^n|   = {max_dev_uniform:.3e}");
    println!("min corrected fidelity       = {min_fidelity:.15}");
    println!("all checks passed (tolerance {VERIFY_TOL:.0e})");
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), Failure> {
    if args.steps < 2 {
        return Err(Failure::Invalid(format!(
            "--steps must be at least 2, got {}",
            args.steps
        )));
    }
    if args.ns.is_empty() || args.etas.is_empty() {
        return Err(Failure::Invalid("--n and --eta must be non-empty".into()));
    }
    let csv = render_csv(
        args.quantity.into(),
        &args.ns,
        &args.etas,
        args.steps,
        args.include_limits,
        args.cross_check,
    )?;
    write_output(args.out.as_deref(), &csv)
}

fn cmd_preset(args: PresetArgs) -> Result<(), Failure> {
    let (quantity, ns, etas): (Quantity, &[u32], &[f64]) = match args.figure {
        Figure::Fig3 => (Quantity::Gain, &[3], &[0.2, 0.4, 0.6, 0.8]),
        Figure::Fig4 => (Quantity::SuccessProb, &[3, 4, 5, 6], &[0.2]),
        Figure::Fig5 => (Quantity::SuccessProb, &[3, 4, 5, 6], &[0.8]),
        Figure::Fig6 => (Quantity::SuccessProb, &[3], &[0.2, 0.4, 0.6, 0.8]),
    };
    let csv = render_csv(quantity, ns, etas, 99, false, args.cross_check)?;
    write_output(args.out.as_deref(), &csv)
}

/// Tabulates `quantity` over t for every (n, eta) combination.
///
/// Interior grid: t = k/(steps+1) for k = 1..=steps; `include_limits` adds
/// the closed-square endpoints. Rows carry the quantity name, suffixed
/// `_limit` on boundary-limit rows and `_sim` on full-simulation cross-check
/// rows (emitted right after their analytic row; limits are not simulated).
fn render_csv(
    quantity: Quantity,
    ns: &[u32],
    etas: &[f64],
    steps: u32,
    include_limits: bool,
    cross_check: bool,
) -> Result<String, Failure> {
    let mut ts = Vec::with_capacity(steps as usize + 2);
    if include_limits {
        ts.push(0.0);
    }
    ts.extend((1..=steps).map(|k| f64::from(k) / f64::from(steps + 1)));
    if include_limits {
        ts.push(1.0);
    }

    let mut csv = String::from("t,value,quantity,n,eta\n");
    for &n in ns {
        for &eta in etas {
            for point in curve(quantity, n, eta, &ts)? {
                let suffix = if point.is_limit { "_limit" } else { "" };
                writeln!(
                    csv,
                    "{},{:.11e},{}{suffix},{n},{eta}",
                    point.t,
                    point.value,
                    quantity.name()
                )
                .expect("writing to a string cannot fail");
                if cross_check && !point.is_limit {
                    let out = run_nla(&ProtocolConfig::new(n, eta, point.t)?)?;
                    let value = match quantity {
                        Quantity::Gain => out.gain,
                        Quantity::SuccessProb => out.success_prob,
                    };
                    writeln!(
                        csv,
                        "{},{value:.11e},{}_sim,{n},{eta}",
                        point.t,
                        quantity.name()
                    )
                    .expect("writing to a string cannot fail");
                }
            }
        }
    }
    Ok(csv)
}

fn write_output(path: Option<&std::path::Path>, content: &str) -> Result<(), Failure> {
    match path {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| Failure::Invalid(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn cmd_sample(args: SampleArgs) -> Result<(), Failure> {
    let cfg = ProtocolConfig::new(args.n, args.eta, args.t)?;
    let est = sample_run(&cfg, args.shots, args.seed)?;

    let p = success_prob(args.eta, args.t, args.n)?;
    let ep = eta_prime(args.eta, args.t, args.n)?;
    let g = gain(args.eta, args.t)?;

    println!(
        "n = {}  eta = {}  t = {}  shots = {}  seed = {}",
        est.n, est.eta, est.t, est.shots, est.seed
    );
    println!(
        "accepted = {} of {}  (signal carried: {})",
        est.accepted, est.shots, est.signal_accepted
    );
    println!("{}", estimate_line("P", est.p_hat, est.p_se, p));
    println!(
        "{}",
        estimate_line("eta'", est.eta_prime_hat, est.eta_prime_se, ep)
    );
    match (est.gain_hat, est.gain_se) {
        (Some(hat), Some(se)) => println!("{}", estimate_line("G", hat, se, g.value)),
        _ => println!("G-hat    : undefined (eta = 0)"),
    }
    Ok(())
}

/// One estimate row: value, standard error, and z-score against the exact
/// analytic value (blank when the standard error vanishes).
fn estimate_line(name: &str, hat: f64, se: f64, exact: f64) -> String {
    let z = if se > 0.0 {
        format!("{:+.3}", (hat - exact) / se)
    } else {
        "n/a".to_string()
    };
    let label = format!("{name}-hat");
    format!("{label:<8} = {hat:.9}  se = {se:.3e}  exact = {exact:.9}  z = {z}")
}
