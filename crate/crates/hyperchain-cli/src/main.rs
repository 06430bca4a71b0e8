//! Command-line front end: parses network files, dispatches the analyses,
//! generates instances, and exports reports and trajectories.
//!
//! Exit codes: 0 for success — including findings such as blow-up or a
//! negative permanence verdict — 1 for internal errors, 2 for usage and parse
//! errors.  Every error path prints a single `error: ...` line to stderr.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use hyperchain::dynamics::{integrate, IntegrateOptions, Mode, Termination};
use hyperchain::io;
use hyperchain::networks;
use hyperchain::permanence::{
    implication_audit_with, numeric_permanence_test, AuditConfig, AuditReport, PermanenceOptions,
};
use hyperchain::report::{analyze, AnalysisConfig, AnalysisReport, PermanenceReport, SimulationReport};
use hyperchain::HyperchainSystem;
use nalgebra::DVector;

#[derive(Parser)]
#[command(
    name = "hyperchain",
    version,
    about = "Analyze, simulate, and generate catalytic influence networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Write the primary output to this path instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for every random choice the command makes.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Cap the worker thread count (default: one per CPU).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output format: reports default to json, generated networks to text.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

impl Cli {
    fn report_format(&self) -> Format {
        self.format.unwrap_or(Format::Json)
    }

    fn network_format(&self) -> Format {
        self.format.unwrap_or(Format::Text)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Full structural, equilibrium, and stability report for one network.
    Analyze {
        /// Network file (text or JSON layout).
        file: PathBuf,
        /// Also run the numeric permanence battery.
        #[arg(long)]
        permanence: bool,
        /// Random trials in the permanence battery.
        #[arg(long)]
        trials: Option<usize>,
        /// Integration horizon for the permanence battery.
        #[arg(long)]
        t_end: Option<f64>,
    },
    /// Integrate one trajectory and export it as CSV plus a JSON sidecar.
    Simulate {
        /// Network file (text or JSON layout).
        file: PathBuf,
        /// Which vector field to integrate.
        #[arg(long, value_enum)]
        mode: SimMode,
        /// Comma-separated initial state; defaults to the uniform simplex
        /// point in relative mode and to all ones in absolute mode.
        #[arg(long)]
        x0: Option<String>,
        /// Integration horizon.
        #[arg(long, default_value_t = 100.0)]
        t_end: f64,
        /// Rescale the initial state onto the simplex (relative mode).
        #[arg(long)]
        normalize: bool,
    },
    /// Numeric permanence verdict for one network.
    Permanence {
        /// Network file (text or JSON layout).
        file: PathBuf,
        /// Random trials beyond the face battery.
        #[arg(long)]
        trials: Option<usize>,
        /// Integration horizon per trial.
        #[arg(long)]
        t_end: Option<f64>,
        /// Late-window fraction of the horizon used for the verdict.
        #[arg(long)]
        window_fraction: Option<f64>,
        /// Inward offset for boundary-face starting points.
        #[arg(long)]
        offset: Option<f64>,
        /// Floor above which a trial counts as persistent.
        #[arg(long)]
        pass_delta: Option<f64>,
        /// Floor below which a decaying trial counts as collapsing.
        #[arg(long)]
        fail_delta: Option<f64>,
    },
    /// Generate a network file.
    Gen {
        /// Family to generate.
        #[arg(long = "type", value_enum)]
        kind: GenKind,
        /// Species count (cycle, hamiltonian-plus-chords, random).
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// Extra chord edges (hamiltonian-plus-chords).
        #[arg(long, default_value_t = 1)]
        chords: usize,
        /// Edge probability (random).
        #[arg(long, default_value_t = 0.4)]
        edge_prob: f64,
        /// Lower rate bound for randomly drawn rates.
        #[arg(long, default_value_t = 0.5)]
        rate_lo: f64,
        /// Upper rate bound for randomly drawn rates.
        #[arg(long, default_value_t = 2.0)]
        rate_hi: f64,
        /// Chord rate of the five-species example.
        #[arg(long, default_value_t = 0.5)]
        k3: f64,
        /// Cycle-closing rate of the five-species example.
        #[arg(long, default_value_t = 2.0)]
        k5: f64,
    },
    /// Cross-check the structural implication lattice on sampled networks.
    Audit {
        /// Smallest species count sampled.
        #[arg(long, default_value_t = 2)]
        n_min: usize,
        /// Largest species count sampled.
        #[arg(long, default_value_t = 5)]
        n_max: usize,
        /// Number of random samples (reference instances are added on top).
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// Write each violation as a network file plus metadata here.
        #[arg(long)]
        dump_dir: Option<PathBuf>,
        /// Self-test hook: record one fabricated violation.
        #[arg(long, hide = true)]
        force_violation: bool,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SimMode {
    /// Absolute concentrations (unbounded growth possible).
    Abs,
    /// Relative concentrations on the simplex.
    Rel,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GenKind {
    /// Single directed cycle through all species, rates 1.
    Cycle,
    /// Random Hamiltonian cycle plus chord edges.
    HamiltonianPlusChords,
    /// Random graph with random rates.
    Random,
    /// The five-species network with tunable rates k3 and k5.
    ExampleFive,
    /// The six-species reference network with its fixed rate labels.
    ExampleSix,
}

/// An error that already knows its exit code.
enum CliError {
    /// Bad input from the user: exit 2.
    Usage(String),
    /// The tool itself failed: exit 1.
    Internal(String),
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    fn internal(msg: impl Into<String>) -> Self {
        CliError::Internal(msg.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads >= 1 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Analyze { file, permanence, trials, t_end } => {
            cmd_analyze(cli, file, *permanence, *trials, *t_end)
        }
        Command::Simulate { file, mode, x0, t_end, normalize } => {
            cmd_simulate(cli, file, *mode, x0.as_deref(), *t_end, *normalize)
        }
        Command::Permanence { file, trials, t_end, window_fraction, offset, pass_delta, fail_delta } => {
            let tweaks = PermanenceTweaks {
                trials: *trials,
                t_end: *t_end,
                window_fraction: *window_fraction,
                offset: *offset,
                pass_delta: *pass_delta,
                fail_delta: *fail_delta,
            };
            cmd_permanence(cli, file, &tweaks)
        }
        Command::Gen { kind, n, chords, edge_prob, rate_lo, rate_hi, k3, k5 } => {
            let params = GenParams {
                kind: *kind,
                n: *n,
                chords: *chords,
                edge_prob: *edge_prob,
                rate_lo: *rate_lo,
                rate_hi: *rate_hi,
                k3: *k3,
                k5: *k5,
            };
            cmd_gen(cli, &params)
        }
        Command::Audit { n_min, n_max, samples, dump_dir, force_violation } => {
            cmd_audit(cli, *n_min, *n_max, *samples, dump_dir.as_deref(), *force_violation)
        }
    }
}

/// Reads and parses a network file, returning the system together with the
/// hex digest of the raw bytes for provenance.
fn load_network(path: &Path) -> Result<(HyperchainSystem, String), CliError> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let digest: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
    let text = String::from_utf8(bytes)
        .map_err(|_| CliError::usage(format!("{} is not valid UTF-8", path.display())))?;
    let sys = io::parse_network(&text)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    Ok((sys, digest))
}

/// Prints to stdout, treating a closed pipe as a normal early exit.
fn print_out(content: &str) -> Result<(), CliError> {
    use std::io::Write;
    let mut stdout = std::io::stdout().lock();
    match writeln!(stdout, "{content}") {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        Err(e) => Err(CliError::internal(format!("cannot write to stdout: {e}"))),
    }
}

/// Writes the primary output to `--out` or stdout.
fn emit(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, content)
            .map_err(|e| CliError::internal(format!("cannot write {}: {e}", path.display()))),
        None => print_out(content),
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value)
        .map_err(|e| CliError::internal(format!("serialization failed: {e}")))
}

fn permanence_options(
    seed: Option<u64>,
    trials: Option<usize>,
    t_end: Option<f64>,
) -> PermanenceOptions {
    let mut opts = PermanenceOptions { seed: seed.unwrap_or(0), ..PermanenceOptions::default() };
    if let Some(trials) = trials {
        opts.random_trials = trials;
    }
    if let Some(t_end) = t_end {
        opts.t_end = t_end;
    }
    opts
}

fn cmd_analyze(
    cli: &Cli,
    file: &Path,
    permanence: bool,
    trials: Option<usize>,
    t_end: Option<f64>,
) -> Result<(), CliError> {
    let (sys, digest) = load_network(file)?;
    let config = AnalysisConfig {
        input_sha256: Some(digest),
        seed: cli.seed,
        permanence: permanence.then(|| permanence_options(cli.seed, trials, t_end)),
    };
    let report = analyze(&sys, &config);
    if report.graph_profile.is_rooted {
        eprintln!(
            "warning: rooted network (initial nodes: {:?}); no positive equilibrium can exist",
            report.graph_profile.initial_nodes
        );
    }
    let rendered = match cli.report_format() {
        Format::Json => to_json(&report)?,
        Format::Text => render_analysis(&report),
    };
    emit(cli.out.as_deref(), &rendered)
}

fn cmd_simulate(
    cli: &Cli,
    file: &Path,
    mode: SimMode,
    x0: Option<&str>,
    t_end: f64,
    normalize: bool,
) -> Result<(), CliError> {
    let (sys, _) = load_network(file)?;
    let n = sys.n();
    let mode = match mode {
        SimMode::Abs => Mode::Absolute,
        SimMode::Rel => Mode::Relative,
    };
    let mut x0 = match x0 {
        Some(text) => parse_state(text, n)?,
        None => match mode {
            Mode::Relative => DVector::from_element(n, 1.0 / n as f64),
            Mode::Absolute => DVector::from_element(n, 1.0),
        },
    };
    if normalize {
        let total = x0.sum();
        if total <= 0.0 {
            return Err(CliError::usage("cannot normalize a zero initial state"));
        }
        x0 /= total;
    }
    let trajectory = integrate(&sys, mode, &x0, t_end, &IntegrateOptions::default())
        .map_err(|e| CliError::usage(format!("simulation rejected: {e}")))?;

    if let Some(out) = cli.out.as_deref() {
        let csv_path = out.to_path_buf();
        let sidecar_path = out.with_extension("json");
        fs::write(&csv_path, io::trajectory_to_csv(&trajectory))
            .map_err(|e| CliError::internal(format!("cannot write {}: {e}", csv_path.display())))?;
        fs::write(&sidecar_path, io::trajectory_sidecar_json(&trajectory)).map_err(|e| {
            CliError::internal(format!("cannot write {}: {e}", sidecar_path.display()))
        })?;
    }
    let summary = SimulationReport::from_trajectory(&trajectory);
    let rendered = match cli.report_format() {
        Format::Json => to_json(&summary)?,
        Format::Text => render_simulation(&summary),
    };
    match cli.out.as_deref() {
        Some(_) => print_out(&rendered),
        None => print_out(&format!("{}\n{rendered}", io::trajectory_to_csv(&trajectory).trim_end())),
    }
}

struct PermanenceTweaks {
    trials: Option<usize>,
    t_end: Option<f64>,
    window_fraction: Option<f64>,
    offset: Option<f64>,
    pass_delta: Option<f64>,
    fail_delta: Option<f64>,
}

fn cmd_permanence(cli: &Cli, file: &Path, tweaks: &PermanenceTweaks) -> Result<(), CliError> {
    let (sys, _) = load_network(file)?;
    let mut opts = permanence_options(cli.seed, tweaks.trials, tweaks.t_end);
    if let Some(v) = tweaks.window_fraction {
        opts.window_fraction = v;
    }
    if let Some(v) = tweaks.offset {
        opts.boundary_offset = v;
    }
    if let Some(v) = tweaks.pass_delta {
        opts.pass_delta = v;
    }
    if let Some(v) = tweaks.fail_delta {
        opts.fail_delta = v;
    }
    let verdict = numeric_permanence_test(&sys, &opts);
    let report = PermanenceReport::from(&verdict);
    let rendered = match cli.report_format() {
        Format::Json => to_json(&report)?,
        Format::Text => render_permanence(&report),
    };
    emit(cli.out.as_deref(), &rendered)
}

struct GenParams {
    kind: GenKind,
    n: usize,
    chords: usize,
    edge_prob: f64,
    rate_lo: f64,
    rate_hi: f64,
    k3: f64,
    k5: f64,
}

fn cmd_gen(cli: &Cli, params: &GenParams) -> Result<(), CliError> {
    let seed = cli.seed.unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if params.n == 0 {
        return Err(CliError::usage("--n must be at least 1"));
    }
    let sys = match params.kind {
        GenKind::Cycle => {
            if params.n < 2 {
                return Err(CliError::usage("--type cycle needs --n of at least 2"));
            }
            networks::hypercycle(params.n)
        }
        GenKind::HamiltonianPlusChords => {
            if params.n < 2 {
                return Err(CliError::usage(
                    "--type hamiltonian-plus-chords needs --n of at least 2",
                ));
            }
            check_rate_range(params)?;
            let h = networks::hamiltonian_with_chords(&mut rng, params.n, params.chords);
            networks::random_rates(&mut rng, &h, params.rate_lo, params.rate_hi)
        }
        GenKind::Random => {
            check_rate_range(params)?;
            if !(0.0..=1.0).contains(&params.edge_prob) {
                return Err(CliError::usage("--edge-prob must be within [0, 1]"));
            }
            let h = networks::random_hyperchain(&mut rng, params.n, params.edge_prob);
            networks::random_rates(&mut rng, &h, params.rate_lo, params.rate_hi)
        }
        GenKind::ExampleFive => networks::five_species(params.k3, params.k5)
            .map_err(|e| CliError::usage(format!("bad five-species rates: {e}")))?,
        GenKind::ExampleSix => networks::six_species(),
    };
    let rendered = match cli.network_format() {
        Format::Json => io::network_to_json(&sys),
        Format::Text => io::network_to_text(&sys).trim_end().to_string(),
    };
    emit(cli.out.as_deref(), &rendered)
}

fn check_rate_range(params: &GenParams) -> Result<(), CliError> {
    if !(params.rate_lo > 0.0 && params.rate_hi >= params.rate_lo) {
        return Err(CliError::usage("rate bounds must satisfy 0 < rate-lo <= rate-hi"));
    }
    Ok(())
}

fn cmd_audit(
    cli: &Cli,
    n_min: usize,
    n_max: usize,
    samples: usize,
    dump_dir: Option<&Path>,
    force_violation: bool,
) -> Result<(), CliError> {
    if !(2 <= n_min && n_min <= n_max && n_max <= 6) {
        return Err(CliError::usage("audit sizes must satisfy 2 <= n-min <= n-max <= 6"));
    }
    if samples == 0 {
        return Err(CliError::usage("--samples must be at least 1"));
    }
    let mut config = AuditConfig::new(n_min, n_max, samples, cli.seed.unwrap_or(0));
    config.debug_force_violation = force_violation;
    let report = implication_audit_with(&config);

    if let Some(dir) = dump_dir {
        dump_violations(dir, &report)?;
    }
    let rendered = match cli.report_format() {
        Format::Json => to_json(&report)?,
        Format::Text => render_audit(&report),
    };
    emit(cli.out.as_deref(), &rendered)
}

/// Writes one network file and one metadata file per violation.
fn dump_violations(dir: &Path, report: &AuditReport) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::internal(format!("cannot create {}: {e}", dir.display())))?;
    for (i, violation) in report.violations.iter().enumerate() {
        let network_path = dir.join(format!("violation_{i:03}.hyperchain"));
        fs::write(&network_path, &violation.network).map_err(|e| {
            CliError::internal(format!("cannot write {}: {e}", network_path.display()))
        })?;
        let meta_path = dir.join(format!("violation_{i:03}.json"));
        fs::write(&meta_path, to_json(violation)?).map_err(|e| {
            CliError::internal(format!("cannot write {}: {e}", meta_path.display()))
        })?;
    }
    Ok(())
}

fn parse_state(text: &str, n: usize) -> Result<DVector<f64>, CliError> {
    let values: Vec<f64> = text
        .split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|_| CliError::usage(format!("cannot parse '{}' as a number", part.trim())))
        })
        .collect::<Result<_, _>>()?;
    if values.len() != n {
        return Err(CliError::usage(format!(
            "initial state has {} components but the network has {n} species",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(CliError::usage("initial state components must be finite and nonnegative"));
    }
    Ok(DVector::from_vec(values))
}

fn join_floats(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

fn render_analysis(report: &AnalysisReport) -> String {
    use hyperchain::report::EquilibriumReport;

    let p = &report.graph_profile;
    let mut out = String::new();
    let _ = writeln!(out, "species: {}", p.n);
    let _ = writeln!(out, "edges: {}", p.edge_count);
    let _ = writeln!(out, "rooted: {}", yes_no(p.is_rooted));
    let _ = writeln!(out, "strongly connected: {}", yes_no(p.strongly_connected));
    let _ = writeln!(out, "acyclic: {}", yes_no(p.acyclic));
    let _ = writeln!(out, "cycle graph: {}", yes_no(p.is_cycle_graph));
    let _ = writeln!(out, "spanning linear subgraph: {}", yes_no(p.has_spanning_linear_subgraph));
    let _ = writeln!(
        out,
        "hamiltonian: {}",
        match p.hamiltonian {
            Some(true) => "yes",
            Some(false) => "no",
            None => "undecided",
        }
    );
    match &report.equilibria.classification {
        EquilibriumReport::Empty => {
            let _ = writeln!(out, "positive equilibria: none");
        }
        EquilibriumReport::Unique { point } => {
            let _ = writeln!(out, "positive equilibria: unique");
            let _ = writeln!(out, "  point: {}", join_floats(point));
        }
        EquilibriumReport::Continuum { base, dimension, .. } => {
            let _ = writeln!(out, "positive equilibria: continuum (dimension {dimension})");
            let _ = writeln!(out, "  base: {}", join_floats(base));
        }
    }
    if let Some(interior) = &report.interior_stability {
        let _ = writeln!(out, "interior stability: {:?}", interior.classification);
        let _ = writeln!(out, "  lambda1: {}", interior.lambda1);
    }
    if let Some(faces) = &report.boundary_equilibria {
        let _ = writeln!(out, "boundary faces analyzed: {}", faces.len());
    }
    let _ = writeln!(out, "boundary equilibria classified: {}", report.boundary_stability.len());
    if let Some(perm) = &report.permanence {
        out.push_str(&render_permanence(perm));
        out.push('\n');
    }
    out.trim_end().to_string()
}

fn render_permanence(report: &PermanenceReport) -> String {
    use hyperchain::report::WitnessReport;

    let mut out = String::new();
    let _ = writeln!(out, "permanence: {}", report.outcome);
    if let Some(delta) = report.delta_estimate {
        let _ = writeln!(out, "  late-window floor: {delta:e}");
    }
    let _ = writeln!(out, "  trials: {}", report.trials);
    match &report.witness {
        Some(WitnessReport::NotStronglyConnected { from, to }) => {
            let _ = writeln!(out, "  witness: no directed path from species {from} to {to}");
        }
        Some(WitnessReport::NoPositiveEquilibrium { .. }) => {
            let _ = writeln!(out, "  witness: no positive equilibrium exists");
        }
        Some(WitnessReport::CollapsingTrajectory { early_min, late_min, .. }) => {
            let _ = writeln!(
                out,
                "  witness: collapsing trajectory (floor {early_min:e} -> {late_min:e})"
            );
        }
        None => {}
    }
    out.trim_end().to_string()
}

fn render_simulation(report: &SimulationReport) -> String {
    let mut out = String::new();
    let termination = match &report.termination {
        Termination::Completed => "completed".to_string(),
        Termination::Converged { time } => format!("converged at t = {time}"),
        Termination::BlowUp { time_estimate } => {
            format!("blow-up, time estimate {time_estimate}")
        }
        Termination::StepFailure { time, reason } => {
            format!("step failure at t = {time}: {reason}")
        }
    };
    let _ = writeln!(out, "termination: {termination}");
    let _ = writeln!(out, "final time: {}", report.final_time);
    let _ = writeln!(out, "final state: {}", join_floats(&report.final_state));
    let _ = writeln!(out, "steps: {}", report.steps);
    out.trim_end().to_string()
}

fn render_audit(report: &AuditReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "audit: n in {}..={}, {} samples, seed {}",
        report.n_lo, report.n_hi, report.samples, report.seed
    );
    for tally in &report.tallies {
        let _ = writeln!(
            out,
            "  {:?}: checked {}, passed {}, violated {}, inconclusive {}",
            tally.implication, tally.checked, tally.passed, tally.violated, tally.inconclusive
        );
    }
    let _ = writeln!(
        out,
        "  reachability corroboration: {}/{} (soft)",
        report.soft.corroborated, report.soft.checked
    );
    let _ = writeln!(out, "violations: {}", report.violations.len());
    for violation in &report.violations {
        let _ = writeln!(
            out,
            "  {:?} on sample {} (n = {}): {}",
            violation.implication, violation.sample_index, violation.n, violation.detail
        );
    }
    out.trim_end().to_string()
}

fn yes_no(value: bool) -> &'static str {
    if value {
        "yes"
    } else {
        "no"
    }
}
