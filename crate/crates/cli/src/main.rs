//! `lazyseq run` plays a program directory into an event log;
//! `lazyseq serve` runs it as a live session behind the HTTP API.

use std::fs::File;
use std::io::{self, BufRead, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::mpsc;
use std::thread;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use lazyseq_core::engine::Budget;
use lazyseq_core::store::{load_dir, LoadError, ProgramState};
use lazyseq_core::stream::{Control, ExecutionMode, LogSink, Machine, NoObserver, Outcome, Player, RunConfig};
use lazyseq_server::{Session, SessionConfig};

#[derive(Parser)]
#[command(name = "lazyseq", version, about = "Lazy live-coding music interpreter")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Realtime,
    Slow,
    Step,
}

#[derive(Subcommand)]
enum Command {
    /// Play a program directory and write its event log.
    Run {
        dir: PathBuf,
        #[arg(long, value_enum, default_value = "slow")]
        mode: Mode,
        /// Pause after every element in slow mode, in milliseconds.
        #[arg(long, default_value_t = 0)]
        slow_pause: u64,
        /// Stop after this many elements.
        #[arg(long)]
        max_elements: Option<u64>,
        /// Reduction steps allowed per element.
        #[arg(long, default_value_t = Budget::DEFAULT_STEPS)]
        budget: u64,
        /// Event log destination; `-` is standard output.
        #[arg(long, default_value = "-")]
        log: String,
    },
    /// Run a program as a live session with the HTTP API and web client.
    Serve {
        dir: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "0.0.0.0")]
        host: String,
        /// Conductor token expected in the X-Conductor-Token header.
        #[arg(long, env = "LAZYSEQ_TOKEN", hide_env_values = true)]
        token: Option<String>,
        #[arg(long, value_enum, default_value = "realtime")]
        mode: Mode,
        #[arg(long, default_value_t = 500)]
        slow_pause: u64,
        #[arg(long, default_value_t = Budget::DEFAULT_STEPS)]
        budget: u64,
        /// Event log destination; `-` is standard output.
        #[arg(long)]
        log: Option<String>,
        /// Directory of the built web client.
        #[arg(long)]
        ui: Option<PathBuf>,
    },
}

fn execution_mode(mode: Mode, slow_pause: u64) -> ExecutionMode {
    match mode {
        Mode::Realtime => ExecutionMode::Realtime,
        Mode::Slow => ExecutionMode::SlowMotion { pause_ms: slow_pause },
        Mode::Step => ExecutionMode::SingleStep,
    }
}

fn open_log(target: &str) -> io::Result<Box<dyn Write + Send>> {
    Ok(match target {
        "-" => Box::new(io::stdout()),
        path => Box::new(BufWriter::new(File::create(path)?)),
    })
}

fn load(dir: &Path) -> Result<ProgramState, ExitCode> {
    load_dir(dir).map_err(|err| {
        match err {
            LoadError::Io { .. } => eprintln!("error: {err}"),
            LoadError::Diagnostics(diags) => {
                for diag in diags {
                    eprintln!("{diag}");
                }
            }
        }
        ExitCode::from(1)
    })
}

/// Deep terms recurse deeply; the main thread's stack is too small.
const RUN_STACK: usize = 256 * 1024 * 1024;

fn run(dir: &Path, mode: ExecutionMode, max_elements: Option<u64>, budget: u64, log: &str) -> ExitCode {
    let state = match load(dir) {
        Ok(state) => state,
        Err(code) => return code,
    };
    let out = match open_log(log) {
        Ok(out) => out,
        Err(err) => {
            eprintln!("error: cannot open log {log}: {err}");
            return ExitCode::from(1);
        }
    };
    let (tx, rx) = mpsc::channel();
    if mode == ExecutionMode::SingleStep {
        // every line on standard input is one step
        thread::spawn(move || {
            for _ in io::stdin().lock().lines().map_while(Result::ok) {
                if tx.send(Control::Step).is_err() {
                    break;
                }
            }
        });
    } else {
        // the loop never waits for commands in these modes
        std::mem::forget(tx);
    }
    let machine = Machine::new(state.rules().clone(), Budget::new(budget)).without_trace();
    let config = RunConfig {
        max_elements,
        exit_on_error: true,
        exit_on_finish: true,
    };
    let player = thread::Builder::new().stack_size(RUN_STACK).spawn(move || {
        let mut sink = LogSink::new(out);
        let (_, outcome) = Player::new(machine, mode, rx, &mut sink, &mut NoObserver, config).run();
        let _ = sink.into_inner().flush();
        outcome
    });
    let outcome = match player.map(|handle| handle.join()) {
        Ok(Ok(outcome)) => outcome,
        _ => {
            eprintln!("error: the run loop crashed");
            return ExitCode::from(2);
        }
    };
    match outcome {
        Outcome::Finished | Outcome::ElementCap | Outcome::Stopped | Outcome::Disconnected => ExitCode::SUCCESS,
        Outcome::Errored(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
        Outcome::SinkFailed(err) => {
            eprintln!("error: cannot write the event log: {err}");
            ExitCode::from(1)
        }
    }
}

async fn serve(addr: SocketAddr, state: ProgramState, config: SessionConfig) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .with_context(|| format!("cannot listen on {addr}"))?;
    if config.token.is_none() {
        tracing::warn!("no conductor token set; control and full-module edits are disabled");
    }
    let session = Session::start(state, config).context("cannot start the run loop")?;
    eprintln!("serving on http://{}", listener.local_addr()?);
    let interrupt = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    lazyseq_server::serve(listener, &session, interrupt).await?;
    session.shutdown();
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            dir,
            mode,
            slow_pause,
            max_elements,
            budget,
            log,
        } => run(&dir, execution_mode(mode, slow_pause), max_elements, budget, &log),
        Command::Serve {
            dir,
            port,
            host,
            token,
            mode,
            slow_pause,
            budget,
            log,
            ui,
        } => {
            tracing_subscriber::fmt()
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
                )
                .with_writer(io::stderr)
                .init();
            let state = match load(&dir) {
                Ok(state) => state,
                Err(code) => return code,
            };
            let addr: SocketAddr = match format!("{host}:{port}").parse() {
                Ok(addr) => addr,
                Err(err) => {
                    eprintln!("error: bad address {host}:{port}: {err}");
                    return ExitCode::from(1);
                }
            };
            let log = match log.as_deref().map(open_log).transpose() {
                Ok(log) => log,
                Err(err) => {
                    eprintln!("error: cannot open log: {err}");
                    return ExitCode::from(1);
                }
            };
            let config = SessionConfig {
                mode: execution_mode(mode, slow_pause),
                slow_pause_ms: slow_pause,
                budget: Budget::new(budget),
                token,
                ui_dir: ui,
                log,
            };
            let runtime = match tokio::runtime::Runtime::new() {
                Ok(runtime) => runtime,
                Err(err) => {
                    eprintln!("error: {err}");
                    return ExitCode::from(1);
                }
            };
            match runtime.block_on(serve(addr, state, config)) {
                Ok(()) => ExitCode::SUCCESS,
                Err(err) => {
                    eprintln!("error: {err:#}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
