//! `hexkey`: characterize, generate, score and evaluate keyboards from the shell.

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use hexkey_core::charact::import_log;
use hexkey_core::corpus::{ingest_phrases, phrases, BUILTIN_PHRASES};
use hexkey_core::eval::{compute_metrics, simulate_transcription};
use hexkey_core::fitts::generic_model;
use hexkey_core::layout::{fitts_digraph_energy, flip_vertical, generate_layout, qwerty_layout};
use hexkey_core::qap::{brute_force, solve_faq, InstanceDoc};
use hexkey_core::{
    build_grid, default_grid, DigraphMatrix, DirectionalFittsModel, EvalReport, FaqParams, KeyboardLayout, LayoutKind,
    QapInstance, SimulatedUser,
};

#[derive(Parser)]
#[command(name = "hexkey", version, about = "Ability-based hexagonal keyboard personalization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a directional movement model from a simulated user or a recorded session log
    Characterize(CharacterizeArgs),
    /// Place the 27 symbols on a honeycomb grid
    Generate(GenerateArgs),
    /// Expected movement time per keystroke of a layout
    Energy(EnergyArgs),
    /// Simulate transcription on one or more layouts and report text-entry metrics
    Evaluate(EvaluateArgs),
    /// Exact solvers for checking the heuristics
    Oracle {
        #[command(subcommand)]
        which: OracleCommand,
    },
    /// Run the HTTP service used by the web UI
    Serve(ServeArgs),
}

#[derive(Args)]
struct CharacterizeArgs {
    /// Simulated user description (JSON)
    #[arg(long, conflicts_with = "replay", required_unless_present = "replay")]
    simulate: Option<PathBuf>,
    /// Session log to replay (NDJSON)
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Session seed for a simulated run
    #[arg(long, required_unless_present = "replay")]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Also write the simulated session's log here
    #[arg(long, requires = "simulate")]
    log_out: Option<PathBuf>,
}

#[derive(Args)]
struct SolverArgs {
    /// Frank-Wolfe restarts
    #[arg(long, default_value_t = FaqParams::default().restarts)]
    restarts: usize,
    #[arg(long, default_value_t = FaqParams::default().max_iters)]
    max_iters: usize,
    #[arg(long, default_value_t = FaqParams::default().tol)]
    tol: f64,
}

impl SolverArgs {
    fn params(&self, seed: u64) -> FaqParams {
        FaqParams {
            restarts: self.restarts,
            max_iters: self.max_iters,
            tol: self.tol,
            seed,
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    /// personalized, generic or qwerty
    #[arg(long)]
    kind: LayoutKind,
    /// Movement model (required for personalized)
    #[arg(long)]
    model: Option<PathBuf>,
    /// Phrase file, one phrase per line, or `builtin`
    #[arg(long, default_value = "builtin")]
    corpus: String,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Mirror the layout top to bottom
    #[arg(long)]
    flip: bool,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct EnergyArgs {
    #[arg(long)]
    layout: PathBuf,
    #[arg(long, default_value = "builtin")]
    corpus: String,
    /// Movement model; the population constants when omitted
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Comma-separated layout files
    #[arg(long, value_delimiter = ',', required = true)]
    layouts: Vec<PathBuf>,
    #[arg(long)]
    user: PathBuf,
    /// Prompt file, one phrase per line, or `builtin`
    #[arg(long, default_value = "builtin")]
    prompts: String,
    /// CSV report
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Compare the heuristic QAP solver with exhaustive search
    Qap {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long)]
    data_dir: PathBuf,
    /// Bind address; use 0.0.0.0 to accept other devices on the LAN
    #[arg(long, default_value = "127.0.0.1")]
    host: std::net::IpAddr,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Characterize(a) => characterize(a),
        Command::Generate(a) => generate(a),
        Command::Energy(a) => energy(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Oracle {
            which: OracleCommand::Qap { instance, seed, solver },
        } => oracle_qap(&instance, &solver.params(seed)),
        Command::Serve(a) => serve(a),
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Writes next to the destination and renames, so a failed run leaves nothing behind.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut builder = tempfile::Builder::new();
    // plain output files, not the temp-file default of owner-only
    #[cfg(unix)]
    builder.permissions(std::os::unix::fs::PermissionsExt::from_mode(0o666));
    let mut tmp = builder
        .tempfile_in(dir)
        .with_context(|| format!("creating a file in {}", dir.display()))?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn load_corpus(spec: &str) -> Result<DigraphMatrix> {
    Ok(ingest_phrases(load_phrases(spec)?))
}

fn load_phrases(spec: &str) -> Result<Vec<String>> {
    if spec == "builtin" {
        Ok(phrases(BUILTIN_PHRASES))
    } else {
        Ok(phrases(&read(Path::new(spec))?))
    }
}

fn load_model(path: &Path) -> Result<DirectionalFittsModel> {
    DirectionalFittsModel::from_json(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn load_layout(path: &Path) -> Result<KeyboardLayout> {
    KeyboardLayout::from_json(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn characterize(a: CharacterizeArgs) -> Result<()> {
    let session = match (&a.simulate, &a.replay) {
        (Some(user), None) => {
            let user: SimulatedUser =
                serde_json::from_str(&read(user)?).with_context(|| format!("parsing {}", user.display()))?;
            user.characterize(&default_grid(), a.seed.expect("required by clap"))?
        }
        (None, Some(log)) => import_log(&read(log)?).with_context(|| format!("replaying {}", log.display()))?,
        _ => unreachable!("clap enforces exactly one source"),
    };
    if let Err(e) = session.next_target() {
        log::warn!("{e}");
    }
    let model = session.fit()?;
    if let Some(path) = &a.log_out {
        write_atomic(path, session.export_log().as_bytes())?;
    }
    write_atomic(&a.out, model.to_json().as_bytes())?;
    let fitted = model.bins.iter().filter(|b| b.fitted).count();
    eprintln!("{} targets presented, {fitted}/16 bins fitted", session.presented());
    Ok(())
}

fn generate(a: GenerateArgs) -> Result<()> {
    let model = a.model.as_deref().map(load_model).transpose()?;
    let key_width = model.as_ref().map_or(default_grid().key_width(), |m| m.key_width);
    let layout = match a.kind {
        LayoutKind::Qwerty => qwerty_layout(key_width)?,
        kind => {
            if kind == LayoutKind::Personalized && model.is_none() {
                bail!("--kind personalized needs --model");
            }
            let grid = build_grid(9, 9, key_width)?;
            generate_layout(
                kind,
                model.as_ref(),
                &load_corpus(&a.corpus)?,
                &grid,
                &a.solver.params(a.seed),
            )?
        }
    };
    let layout = if a.flip { flip_vertical(&layout) } else { layout };
    write_atomic(&a.out, layout.to_json().as_bytes())
}

fn energy(a: EnergyArgs) -> Result<()> {
    let layout = load_layout(&a.layout)?;
    let model = match &a.model {
        Some(p) => load_model(p)?,
        None => generic_model(layout.grid().key_width()),
    };
    let e = fitts_digraph_energy(&layout, &load_corpus(&a.corpus)?, &model)?;
    println!("{e:.9}");
    Ok(())
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let user: SimulatedUser =
        serde_json::from_str(&read(&a.user)?).with_context(|| format!("parsing {}", a.user.display()))?;
    let prompts = load_phrases(&a.prompts)?;
    let mut reports: Vec<EvalReport> = Vec::new();
    for path in &a.layouts {
        let layout = load_layout(path)?;
        let trials = simulate_transcription(&user, &layout, &prompts)?;
        reports.push(compute_metrics(&trials, &stem(path), &stem(&a.user))?);
    }

    let mut csv = csv::Writer::from_writer(Vec::new());
    for r in &reports {
        csv.serialize(r)?;
    }
    write_atomic(&a.out, &csv.into_inner().map_err(|e| e.into_error())?)?;

    let width = reports.iter().map(|r| r.layout.len()).max().unwrap_or(0).max(6);
    println!(
        "{:width$}  {:>7}  {:>6}  {:>6}  {:>8}",
        "layout", "acc %", "wpm", "wpm*", "itr"
    );
    for r in &reports {
        println!(
            "{:width$}  {:>7.2}  {:>6.2}  {:>6.2}  {:>8.2}",
            r.layout, r.accuracy_pct, r.wpm, r.wpm_star, r.itr_bits_per_min
        );
    }
    Ok(())
}

fn oracle_qap(path: &Path, params: &FaqParams) -> Result<()> {
    let doc: InstanceDoc = serde_json::from_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    let instance = QapInstance::from_doc(&doc)?;
    let faq = solve_faq(&instance, params)?;
    let exact = brute_force(&instance)?;
    println!("faq objective = {}", faq.objective);
    println!("brute-force objective = {}", exact.objective);
    let gap = (faq.objective - exact.objective) / exact.objective.abs().max(f64::MIN_POSITIVE);
    println!("relative gap = {gap:.6}");
    if faq.objective < exact.objective - 1e-9 * exact.objective.abs().max(1.0) {
        bail!("heuristic beat the exhaustive optimum; the oracle is broken");
    }
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let addr = SocketAddr::new(a.host, a.port);
    tokio::runtime::Runtime::new()?.block_on(hexkey_service::serve(addr, a.data_dir))
}
