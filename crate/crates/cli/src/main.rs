use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cvshadow::bounds::{homodyne_t, pnr_t, HomodyneConstants};
use cvshadow::displaced::BeyondCutoff;
use cvshadow::fock::{DensityMatrixFile, Parity, StateKind, StateSpec, WignerGridSpec};
use cvshadow::harness::{
    run_reconstruction, run_scaling, simulate_records, ExperimentConfig, Joint, OutputPaths, ProtocolSpec,
    ReconstructionRequest, SimulationSpec, Source,
};
use cvshadow::oracles::{completeness_suite, duality_suite, parity_suite, OracleCheck};
use num_complex::Complex64 as C64;

const EXIT_VALIDATION: u8 = 2;
const EXIT_CENSORED: u8 = 3;

#[derive(Parser)]
#[command(name = "cvshadow", version, about = "Classical shadows of bosonic modes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write simulated measurement records as CSV.
    Simulate(SimulateArgs),
    /// Records or a simulation in; density matrix, Wigner grid and report out.
    Reconstruct(ReconstructArgs),
    /// Minimum shadow size per cutoff and the fitted exponent.
    Scaling(ScalingArgs),
    /// Analytic sample-size bounds as CSV.
    Bounds(BoundsArgs),
    /// Run the numerical oracle suites.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolKind {
    Homodyne,
    Pnr,
    Parity,
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    Keep,
    Discard,
}

#[derive(Args)]
struct ProtocolArgs {
    #[arg(long, value_enum, default_value = "homodyne")]
    protocol: ProtocolKind,
    /// PNR ordering parameter, |r| < 1.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    r: f64,
    /// Displacement disk radius; defaults to √(4N).
    #[arg(long)]
    alpha_max: Option<f64>,
    /// Treatment of photon counts ≥ N; defaults to keep for r ≥ 0.
    #[arg(long, value_enum)]
    beyond_cutoff: Option<Policy>,
}

impl ProtocolArgs {
    fn spec(&self) -> ProtocolSpec {
        match self.protocol {
            ProtocolKind::Homodyne => ProtocolSpec::Homodyne,
            ProtocolKind::Parity => ProtocolSpec::Parity {
                alpha_max: self.alpha_max,
            },
            ProtocolKind::Pnr => ProtocolSpec::Pnr {
                r: self.r,
                alpha_max: self.alpha_max,
                beyond_cutoff: self.beyond_cutoff.map(|p| match p {
                    Policy::Keep => BeyondCutoff::Keep,
                    Policy::Discard => BeyondCutoff::Discard,
                }),
            },
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum JointArg {
    Product,
    EntangledCat,
    Full,
}

#[derive(Args)]
struct StateArgs {
    /// vacuum | fock:N | coherent:RE[,IM] | cat:RE[,IM][,even|odd] |
    /// random:SEED | file:PATH (density-matrix JSON)
    #[arg(long)]
    state: String,
    /// Fock levels used to represent the state.
    #[arg(long, default_value_t = 40)]
    state_cutoff: usize,
    #[arg(long, default_value_t = 1)]
    modes: usize,
    #[arg(long, value_enum, default_value = "product")]
    joint: JointArg,
}

impl StateArgs {
    fn simulation(&self, samples: usize, seed: u64) -> Result<SimulationSpec> {
        Ok(SimulationSpec {
            state: parse_state(&self.state, self.state_cutoff)?,
            modes: self.modes,
            joint: match self.joint {
                JointArg::Product => Joint::Product,
                JointArg::EntangledCat => Joint::EntangledCat,
                JointArg::Full => Joint::Full,
            },
            samples,
            seed,
        })
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    state: StateArgs,
    #[command(flatten)]
    protocol: ProtocolArgs,
    /// Cutoff N; sets the default disk radius for PNR.
    #[arg(long, default_value_t = 8)]
    cutoff: usize,
    #[arg(long)]
    samples: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct ReconstructArgs {
    /// Record file; omit to simulate with --state.
    #[arg(long, conflicts_with = "state")]
    records: Option<PathBuf>,
    #[arg(long)]
    state: Option<String>,
    #[arg(long, default_value_t = 40)]
    state_cutoff: usize,
    #[arg(long, default_value_t = 1)]
    modes: usize,
    #[arg(long, value_enum, default_value = "product")]
    joint: JointArg,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    protocol: ProtocolArgs,
    #[arg(long)]
    cutoff: usize,
    /// Reference state for the reported error (same syntax as --state).
    #[arg(long)]
    reference: Option<String>,
    #[arg(long)]
    density_out: Option<PathBuf>,
    #[arg(long)]
    wigner_out: Option<PathBuf>,
    #[arg(long)]
    report_out: Option<PathBuf>,
    /// Half-width of the square Wigner grid.
    #[arg(long)]
    wigner_half: Option<f64>,
    #[arg(long, default_value_t = 81)]
    wigner_points: usize,
}

#[derive(Args)]
struct ScalingArgs {
    /// ExperimentConfig as TOML or JSON.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    t_min: Option<u64>,
    #[arg(long)]
    t_max: Option<u64>,
    #[arg(long)]
    growth: Option<f64>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    protocol: ProtocolArgs,
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,6")]
    n_list: Vec<usize>,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 1.0)]
    c1: f64,
    #[arg(long, default_value_t = 1.0)]
    c2: f64,
    #[arg(long, default_value_t = 1.0)]
    c3: f64,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Largest cutoff for the completeness oracle.
    #[arg(long, default_value_t = 6)]
    completeness_max_n: usize,
    /// Largest cutoff for the duality oracle.
    #[arg(long, default_value_t = 4)]
    duality_max_n: usize,
    /// Write the checks as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

fn parse_state(text: &str, cutoff: usize) -> Result<StateSpec> {
    let (kind, rest) = text.split_once(':').unwrap_or((text, ""));
    let nums = || -> Result<Vec<f64>> {
        rest.split(',')
            .filter(|s| !s.is_empty() && *s != "even" && *s != "odd")
            .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad number {s:?} in state {text:?}")))
            .collect()
    };
    let amp = || -> Result<C64> {
        let v = nums()?;
        match v.as_slice() {
            [re] => Ok(C64::new(*re, 0.0)),
            [re, im] => Ok(C64::new(*re, *im)),
            _ => bail!("state {text:?} needs an amplitude RE[,IM]"),
        }
    };
    Ok(match kind {
        "vacuum" => StateSpec::vacuum(cutoff),
        "fock" => StateSpec::fock(rest.parse().with_context(|| format!("bad photon number in {text:?}"))?, cutoff),
        "coherent" => StateSpec::coherent(amp()?, cutoff),
        "cat" => {
            let parity = if rest.ends_with("odd") { Parity::Odd } else { Parity::Even };
            StateSpec::cat(amp()?, parity, cutoff)
        }
        "random" => StateSpec::random_pure(rest.parse().with_context(|| format!("bad seed in {text:?}"))?, cutoff),
        "file" => {
            let body = std::fs::read_to_string(rest).with_context(|| format!("reading {rest}"))?;
            let matrix: DensityMatrixFile = serde_json::from_str(&body).with_context(|| format!("parsing {rest}"))?;
            let dim = matrix.dim;
            StateSpec::new(StateKind::Custom { matrix }, dim)
        }
        _ => bail!("unknown state {text:?}"),
    })
}

fn simulate(a: SimulateArgs) -> Result<ExitCode> {
    let spec = a.state.simulation(a.samples, a.seed)?;
    let set = simulate_records(&spec, &a.protocol.spec(), a.cutoff)?;
    set.write(&a.out)?;
    eprintln!("wrote {} records to {}", set.len(), a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn reconstruct(a: ReconstructArgs) -> Result<ExitCode> {
    let source = match (&a.records, &a.state) {
        (Some(path), _) => Source::Records { path: path.clone() },
        (None, Some(state)) => {
            let samples = a.samples.context("--samples is required when simulating")?;
            let st = StateArgs {
                state: state.clone(),
                state_cutoff: a.state_cutoff,
                modes: a.modes,
                joint: a.joint,
            };
            Source::Simulate(st.simulation(samples, a.seed)?)
        }
        (None, None) => bail!("give either --records or --state"),
    };
    let reference = match &a.reference {
        Some(r) => Some(cvshadow::fock::make_state(&parse_state(r, a.state_cutoff)?)?),
        None => None,
    };
    let req = ReconstructionRequest {
        source,
        protocol: a.protocol.spec(),
        n: a.cutoff,
        reference,
        wigner_grid: a.wigner_half.map(|h| WignerGridSpec::square(h, a.wigner_points)),
        outputs: OutputPaths {
            density: a.density_out,
            wigner: a.wigner_out,
            report: a.report_out.clone(),
        },
    };
    let (_, report) = run_reconstruction(&req)?;
    if a.report_out.is_none() {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else if let Some(e) = report.error_inf {
        eprintln!("infinity-norm error {e:.4}");
    }
    Ok(ExitCode::SUCCESS)
}

fn scaling(a: ScalingArgs) -> Result<ExitCode> {
    let mut cfg = ExperimentConfig::from_path(&a.config)?;
    cfg.root_seed = a.seed;
    if let Some(v) = a.n_list {
        cfg.n_list = v;
    }
    if let Some(v) = a.epsilon {
        cfg.epsilon = v;
    }
    if let Some(v) = a.delta {
        cfg.delta = v;
    }
    if let Some(v) = a.trials {
        cfg.trials_per_t = v;
    }
    if let Some(v) = a.t_min {
        cfg.t_search.t_min = v;
    }
    if let Some(v) = a.t_max {
        cfg.t_search.t_max = v;
    }
    if let Some(v) = a.growth {
        cfg.t_search.growth = v;
    }
    let report = run_scaling(&cfg)?;
    match &a.out {
        Some(p) => report.write_json(p)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    for r in &report.results {
        match r.min_t {
            Some(t) => eprintln!("N={} min T={} ({:?})", r.n, t, r.status),
            None => eprintln!("N={} censored at T_max={}", r.n, cfg.t_search.t_max),
        }
    }
    if let Some(f) = &report.fit {
        eprintln!("exponent p = {:.3} ± {:.3}", f.p, f.p_stderr);
    }
    Ok(if report.censored() {
        ExitCode::from(EXIT_CENSORED)
    } else {
        ExitCode::SUCCESS
    })
}

fn bounds(a: BoundsArgs) -> Result<ExitCode> {
    let spec = a.protocol.spec();
    let c = HomodyneConstants {
        c1: a.c1,
        c2: a.c2,
        c3: a.c3,
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["protocol", "N", "epsilon", "delta", "T_bound"])?;
    for &n in &a.n_list {
        let t = match spec.resolve(n)? {
            cvshadow::multimode::Protocol::Homodyne => homodyne_t(a.epsilon, a.delta, n, &c)?,
            cvshadow::multimode::Protocol::Pnr(p) => pnr_t(a.epsilon, a.delta, n, p.r, p.area())?,
        };
        w.write_record([
            spec.name().to_string(),
            n.to_string(),
            a.epsilon.to_string(),
            a.delta.to_string(),
            t.to_string(),
        ])?;
    }
    let bytes = w.into_inner()?;
    write_or_print(a.out.as_deref(), &bytes)?;
    Ok(ExitCode::SUCCESS)
}

fn write_or_print(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{}", String::from_utf8_lossy(bytes));
            Ok(())
        }
    }
}

fn validate(a: ValidateArgs) -> Result<ExitCode> {
    let mut checks: Vec<OracleCheck> = Vec::new();
    checks.extend(completeness_suite(a.completeness_max_n, 1e-3)?);
    checks.extend(duality_suite(a.duality_max_n, 0.02)?);
    checks.extend(parity_suite(1e-8)?);
    for c in &checks {
        println!(
            "{} {:<28} deviation {:.3e} (tolerance {:.0e})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.deviation,
            c.tolerance
        );
    }
    if let Some(p) = &a.json {
        std::fs::write(p, serde_json::to_string_pretty(&checks)?).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(if checks.iter().all(|c| c.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VALIDATION)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Reconstruct(a) => reconstruct(a),
        Command::Scaling(a) => scaling(a),
        Command::Bounds(a) => bounds(a),
        Command::Validate(a) => validate(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
