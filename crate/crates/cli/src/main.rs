//! Operator CLI over the lectern engine.
//!
//! Exit codes are stable for scripting: 0 success, 2 input/parse error,
//! 3 state/contract error, 64 usage.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use lectern_engine::adapter::{HttpAdapter, LlmAdapter, MockAdapter};
use lectern_engine::ingest::IngestOptions;
use lectern_engine::model::stable_hash64;
use lectern_engine::quiz::{grounding_from_descriptor, Difficulty};
use lectern_engine::retrieval::{chunk_document, search, ChunkOptions, Embedder, HashEmbedder, VectorStore};
use lectern_engine::simulate::SimMode;
use lectern_engine::{
    allocate_questions, allocate_random, build_report, generate_quiz, label_samples, parse_gaze_csv, simulate,
    AttentionProfile, AttentionReport, EngineConfig, LectureDescriptor,
};
use lectern_service::{QuizDocument, ServiceConfig, ServiceState};

#[derive(Parser)]
#[command(name = "lectern", version, about = "Gaze analytics and adaptive quizzes for section-structured lectures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the attention report for one gaze log.
    Analyze {
        /// Lecture descriptor JSON (timeline, section texts, AOIs).
        #[arg(long)]
        lecture: PathBuf,
        /// Gaze CSV (labeled or geometric layout).
        #[arg(long)]
        gaze: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Session id stamped into the report; defaults to a content hash.
        #[arg(long)]
        session: Option<String>,
        /// Engine-config overrides (JSON).
        #[arg(long)]
        engine: Option<PathBuf>,
        /// Re-sort rows whose timestamps went backwards.
        #[arg(long)]
        sort: bool,
    },
    /// Build a quiz plan from a report and generate questions.
    Quiz {
        /// Attention report produced by `analyze` or the service.
        #[arg(long)]
        report: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Seed for random mode; defaults to a hash of the session id.
        #[arg(long)]
        seed: Option<u64>,
        /// `mock` or the base URL of a generation adapter.
        #[arg(long, default_value = "mock")]
        adapter: String,
        /// Lecture descriptor (grounding text source).
        #[arg(long)]
        lecture: PathBuf,
        /// Directory receiving quiz_plan.json and quiz.json.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long, value_enum, default_value_t = DifficultyArg::Medium)]
        difficulty: DifficultyArg,
        #[arg(long)]
        engine: Option<PathBuf>,
    },
    /// Generate a synthetic gaze CSV from an attention profile.
    Simulate {
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        lecture: PathBuf,
        #[arg(long, value_enum)]
        mode: SimModeArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the HTTP session service.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Knowledge-base utilities.
    Kb {
        #[command(subcommand)]
        command: KbCommand,
    },
}

#[derive(Subcommand)]
enum KbCommand {
    /// Chunk and embed every .txt/.md document in a directory.
    Build {
        #[arg(long)]
        docs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        target_tokens: usize,
        #[arg(long, default_value_t = 40)]
        overlap_tokens: usize,
    },
    /// Rank stored chunks against a query.
    Search {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        query: String,
        #[arg(short = 'k', default_value_t = 5)]
        k: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Attentive,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimModeArg {
    Labeled,
    Geometric,
}

#[derive(Clone, Copy, ValueEnum)]
enum DifficultyArg {
    Easy,
    Medium,
    Hard,
}

impl From<DifficultyArg> for Difficulty {
    fn from(d: DifficultyArg) -> Self {
        match d {
            DifficultyArg::Easy => Difficulty::Easy,
            DifficultyArg::Medium => Difficulty::Medium,
            DifficultyArg::Hard => Difficulty::Hard,
        }
    }
}

/// Input/parse failures exit 2; state/contract failures exit 3.
enum CliError {
    Input(String),
    Contract(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Contract(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Contract(m) => m,
        }
    }
}

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn contract(e: impl std::fmt::Display) -> CliError {
    CliError::Contract(e.to_string())
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| input(format!("{}: {e}", parent.display())))?;
        }
    }
    std::fs::write(path, bytes).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn load_descriptor(path: &Path) -> Result<LectureDescriptor, CliError> {
    LectureDescriptor::from_json(&read_file(path)?).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn load_engine(path: &Option<PathBuf>) -> Result<EngineConfig, CliError> {
    match path {
        Some(path) => EngineConfig::from_json(&read_file(path)?).map_err(input),
        None => Ok(EngineConfig::default()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let usage_ok = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if usage_ok { ExitCode::SUCCESS } else { ExitCode::from(64) };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Analyze { lecture, gaze, out, session, engine, sort } => {
            analyze(&lecture, &gaze, out.as_deref(), session, &engine, sort)
        }
        Command::Quiz { report, mode, seed, adapter, lecture, out_dir, difficulty, engine } => {
            quiz(QuizArgs { report, mode, seed, adapter, lecture, out_dir, difficulty, engine })
        }
        Command::Simulate { profile, lecture, mode, out } => run_simulate(&profile, &lecture, mode, &out),
        Command::Serve { config } => serve(&config),
        Command::Kb { command } => match command {
            KbCommand::Build { docs, out, target_tokens, overlap_tokens } => {
                kb_build(&docs, &out, target_tokens, overlap_tokens)
            }
            KbCommand::Search { kb, query, k } => kb_search(&kb, &query, k),
        },
    }
}

fn analyze(
    lecture: &Path,
    gaze: &Path,
    out: Option<&Path>,
    session: Option<String>,
    engine: &Option<PathBuf>,
    sort: bool,
) -> Result<(), CliError> {
    let descriptor = load_descriptor(lecture)?;
    let config = load_engine(engine)?;
    let csv = read_bytes(gaze)?;
    let session_id = session.unwrap_or_else(|| format!("trace-{:016x}", stable_hash64(&csv)));

    let (samples, stats) = parse_gaze_csv(&csv, IngestOptions { sort }).map_err(input)?;
    let aois = descriptor.aoi_set();
    let labeled = label_samples(&samples, &aois).map_err(input)?;
    let learning = aois.learning_labels().into_iter().collect();
    let report = build_report(&session_id, &labeled, &descriptor.timeline(), &learning, &config).map_err(input)?;

    let canonical = report.to_canonical_json();
    match out {
        Some(path) => {
            write_file(path, canonical.as_bytes())?;
            eprintln!(
                "analyzed {} rows ({} invalid, max gap {} ms) -> {}",
                stats.rows,
                stats.invalid_samples,
                stats.max_gap_ms,
                path.display()
            );
        }
        None => print!("{canonical}"),
    }
    Ok(())
}

struct QuizArgs {
    report: PathBuf,
    mode: ModeArg,
    seed: Option<u64>,
    adapter: String,
    lecture: PathBuf,
    out_dir: PathBuf,
    difficulty: DifficultyArg,
    engine: Option<PathBuf>,
}

fn quiz(args: QuizArgs) -> Result<(), CliError> {
    let report = AttentionReport::from_json(&read_file(&args.report)?)
        .map_err(|e| input(format!("{}: {e}", args.report.display())))?;
    let descriptor = load_descriptor(&args.lecture)?;
    if descriptor.lecture_id != report.lecture_id {
        return Err(contract(format!(
            "report is for lecture {:?}, descriptor is {:?}",
            report.lecture_id, descriptor.lecture_id
        )));
    }
    let config = load_engine(&args.engine)?;

    let plan = match args.mode {
        ModeArg::Attentive => allocate_questions(&report, &config).map_err(contract)?,
        ModeArg::Random => {
            let seed = args.seed.unwrap_or_else(|| stable_hash64(report.session_id.as_bytes()));
            allocate_random(&report.session_id, &descriptor.timeline(), &config, seed)
        }
    }
    .with_difficulty(args.difficulty.into());

    let adapter: Box<dyn LlmAdapter> = if args.adapter == "mock" {
        Box::new(MockAdapter)
    } else {
        Box::new(HttpAdapter::from_base_url(&args.adapter))
    };

    let grounding = grounding_from_descriptor(&plan, &descriptor);
    let items = generate_quiz(&plan, &descriptor, &grounding, adapter.as_ref()).map_err(contract)?;

    let document = QuizDocument {
        session_id: plan.session_id.clone(),
        lecture_id: descriptor.lecture_id.clone(),
        mode: plan.mode,
        difficulty: plan.difficulty,
        total: plan.total,
        items,
    };
    write_file(&args.out_dir.join("quiz_plan.json"), plan.to_json().as_bytes())?;
    write_file(
        &args.out_dir.join("quiz.json"),
        &serde_json::to_vec_pretty(&document).expect("document serialization is infallible"),
    )?;
    eprintln!(
        "wrote {} and {}",
        args.out_dir.join("quiz_plan.json").display(),
        args.out_dir.join("quiz.json").display()
    );
    Ok(())
}

fn run_simulate(profile: &Path, lecture: &Path, mode: SimModeArg, out: &Path) -> Result<(), CliError> {
    let profile = AttentionProfile::from_json(&read_file(profile)?).map_err(input)?;
    let descriptor = load_descriptor(lecture)?;
    let mode = match mode {
        SimModeArg::Labeled => SimMode::Labeled,
        SimModeArg::Geometric => SimMode::Geometric,
    };
    let csv = simulate(&profile, &descriptor.timeline(), &descriptor.aoi_set(), mode).map_err(contract)?;
    write_file(out, csv.as_bytes())?;
    eprintln!("wrote {} ({} rows)", out.display(), csv.lines().count().saturating_sub(1));
    Ok(())
}

fn serve(config_path: &Path) -> Result<(), CliError> {
    let config = ServiceConfig::from_json(&read_file(config_path)?)
        .map_err(|e| input(format!("{}: {e}", config_path.display())))?;
    let state = std::sync::Arc::new(ServiceState::from_config(&config).map_err(contract)?);
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| contract(format!("runtime: {e}")))?;
    runtime
        .block_on(lectern_service::run(state, &config.listen_addr))
        .map_err(|e| contract(format!("serve: {e}")))
}

fn kb_build(docs: &Path, out: &Path, target_tokens: usize, overlap_tokens: usize) -> Result<(), CliError> {
    let embedder = HashEmbedder::default();
    let mut store = VectorStore::new(embedder.dimension());
    let mut paths: Vec<PathBuf> = std::fs::read_dir(docs)
        .map_err(|e| input(format!("{}: {e}", docs.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("txt") | Some("md")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(input(format!("{}: no .txt or .md documents", docs.display())));
    }
    for path in &paths {
        let doc_id = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let text = read_file(path)?;
        let options = ChunkOptions { target_tokens, overlap_tokens, section_index: None };
        let chunks = chunk_document(&doc_id, &text, options).map_err(input)?;
        for mut chunk in chunks {
            chunk.embedding = embedder.embed(&chunk.text).map_err(contract)?;
            store.insert(chunk).map_err(input)?;
        }
    }
    write_file(out, store.to_json().as_bytes())?;
    eprintln!("indexed {} chunks from {} documents -> {}", store.len(), paths.len(), out.display());
    Ok(())
}

fn kb_search(kb: &Path, query: &str, k: usize) -> Result<(), CliError> {
    let store = VectorStore::from_json(&read_file(kb)?).map_err(|e| input(format!("{}: {e}", kb.display())))?;
    let embedder = HashEmbedder::new(store.dimension());
    let hits = search(query, &store, &embedder, k.max(1)).map_err(contract)?;
    for (rank, hit) in hits.iter().enumerate() {
        let excerpt: String = hit.chunk.text.chars().take(80).collect();
        println!("{:2}. {}  score={:.4}  {}", rank + 1, hit.chunk.id, hit.score, excerpt);
    }
    Ok(())
}
