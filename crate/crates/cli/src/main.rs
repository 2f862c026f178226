use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use kbqa_core::dialog::DialogError;
use kbqa_core::model::validate;
use kbqa_core::store::{compute_stats, read_documents};
use kbqa_core::{AskRequest, AskResponse, Engine, EngineConfig, RankWeights, SnapshotStore, Status};
use kbqa_server::ServerConfig;

mod render;

const EXIT_DOMAIN: u8 = 1;
const EXIT_ENV: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "kbqa", version, about = "Knowledge-base question answering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a knowledge-base directory and list violations.
    Validate {
        #[arg(env = "KBQA_KB_DIR")]
        kb_dir: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Print size and compression statistics.
    Stats {
        #[arg(env = "KBQA_KB_DIR")]
        kb_dir: PathBuf,
        /// Size of the legacy QA corpus; defaults to the value in meta.json.
        #[arg(long)]
        qa_count: Option<u64>,
        #[arg(long)]
        json: bool,
    },
    /// Answer one question.
    Ask {
        #[arg(env = "KBQA_KB_DIR")]
        kb_dir: PathBuf,
        question: String,
        #[command(flatten)]
        engine: EngineArgs,
        /// Include ranked graphs and scores.
        #[arg(long)]
        debug: bool,
        #[arg(long)]
        json: bool,
    },
    /// Ask questions read line by line from standard input in one session.
    Repl {
        #[arg(env = "KBQA_KB_DIR")]
        kb_dir: PathBuf,
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long)]
        json: bool,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(env = "KBQA_KB_DIR")]
        kb_dir: PathBuf,
        #[arg(long, env = "KBQA_PORT", default_value_t = kbqa_server::DEFAULT_PORT)]
        port: u16,
        #[arg(long, env = "KBQA_WEIGHTS")]
        weights: Option<PathBuf>,
        #[arg(long)]
        locale: Option<String>,
    },
}

#[derive(Debug, Args)]
struct EngineArgs {
    /// JSON file of ranking weights keyed by feature name.
    #[arg(long, env = "KBQA_WEIGHTS")]
    weights: Option<PathBuf>,
    /// Template locale for explanations and recommendations.
    #[arg(long)]
    locale: Option<String>,
}

/// A failure that maps to an exit code, reported on standard error.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn env(message: impl ToString) -> Self {
        Self {
            code: EXIT_ENV,
            message: message.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match run(cli.command, &mut out) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            let _ = out.flush();
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command, out: &mut impl Write) -> Result<u8, Failure> {
    match command {
        Command::Validate { kb_dir, json } => {
            let docs = read_documents(&kb_dir).map_err(Failure::env)?;
            let violations = validate(&docs);
            if json {
                emit_json(out, &violations)?;
            } else {
                for v in &violations {
                    writeln!(out, "{v}").map_err(Failure::env)?;
                }
                writeln!(out, "{} violations", violations.len()).map_err(Failure::env)?;
            }
            Ok(if violations.is_empty() { 0 } else { EXIT_DOMAIN })
        }
        Command::Stats { kb_dir, qa_count, json } => {
            let store = SnapshotStore::open(&kb_dir).map_err(Failure::env)?;
            let kb = store.load().expect("opened store has a snapshot");
            let qa_count = qa_count
                .or(kb.documents().meta.qa_count)
                .ok_or_else(|| Failure::env("--qa-count is required: meta.json has no qa_count"))?;
            let stats = compute_stats(kb.model(), qa_count);
            if json {
                emit_json(out, &stats)?;
            } else {
                write!(out, "{stats}").map_err(Failure::env)?;
            }
            Ok(0)
        }
        Command::Ask {
            kb_dir,
            question,
            engine,
            debug,
            json,
        } => {
            let engine = open_engine(&kb_dir, &engine)?;
            let req = AskRequest {
                debug,
                ..AskRequest::new(question)
            };
            let response = engine.ask(&req).map_err(dialog_failure)?;
            print_response(out, &engine, &response, json)?;
            Ok(exit_for(&response))
        }
        Command::Repl { kb_dir, engine, json } => {
            let engine = open_engine(&kb_dir, &engine)?;
            repl(&engine, io::stdin().lock(), out, json)?;
            Ok(0)
        }
        Command::Serve {
            kb_dir,
            port,
            weights,
            locale,
        } => {
            let mut config = ServerConfig::from_env(Some(kb_dir), Some(port), weights).map_err(Failure::env)?;
            if let Some(locale) = locale {
                config.engine.locale = locale;
            }
            let runtime = tokio::runtime::Runtime::new().map_err(Failure::env)?;
            eprintln!("listening on port {}", config.port);
            runtime.block_on(kbqa_server::serve(config)).map_err(Failure::env)?;
            Ok(0)
        }
    }
}

fn open_engine(kb_dir: &Path, args: &EngineArgs) -> Result<Engine, Failure> {
    let weights = match &args.weights {
        Some(path) => RankWeights::from_json_file(path).map_err(Failure::env)?,
        None => RankWeights::default(),
    };
    let mut config = EngineConfig::default();
    if let Some(locale) = &args.locale {
        config.locale = locale.clone();
    }
    let store = SnapshotStore::open(kb_dir).map_err(Failure::env)?;
    Engine::new(Arc::new(store), weights, config).map_err(Failure::env)
}

fn dialog_failure(e: DialogError) -> Failure {
    let code = match e {
        DialogError::EmptyQuestion => EXIT_DOMAIN,
        _ => EXIT_ENV,
    };
    Failure {
        code,
        message: e.to_string(),
    }
}

fn exit_for(response: &AskResponse) -> u8 {
    match response.status {
        Status::Answered | Status::Recommended => 0,
        Status::NoMatch => EXIT_DOMAIN,
    }
}

fn emit_json<T: serde::Serialize + ?Sized>(out: &mut impl Write, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(Failure::env)?;
    writeln!(out, "{text}").map_err(Failure::env)
}

fn print_response(out: &mut impl Write, engine: &Engine, response: &AskResponse, json: bool) -> Result<(), Failure> {
    if json {
        return emit_json(out, response);
    }
    let kb = engine.store().load().expect("engine store is loaded");
    let text = render::response(response, &kb, engine.pipeline().templates);
    out.write_all(text.as_bytes()).map_err(Failure::env)
}

fn repl(engine: &Engine, input: impl BufRead, out: &mut impl Write, json: bool) -> Result<(), Failure> {
    const SESSION: &str = "repl";
    for line in input.lines() {
        let line = line.map_err(Failure::env)?;
        let question = line.trim();
        if question.is_empty() {
            continue;
        }
        if matches!(question, "exit" | "quit") {
            break;
        }
        let req = AskRequest {
            session_id: Some(SESSION.into()),
            ..AskRequest::new(question)
        };
        match engine.ask(&req) {
            Ok(response) => print_response(out, engine, &response, json)?,
            Err(e) => writeln!(out, "error: {e}").map_err(Failure::env)?,
        }
        writeln!(out).map_err(Failure::env)?;
        out.flush().map_err(Failure::env)?;
    }
    Ok(())
}
