//! The session service: one running program, its modules, and the HTTP
//! API that lets a conductor and participants edit and steer it.
//!
//! Endpoints:
//!
//! | method | path | who |
//! |---|---|---|
//! | GET | `/api/modules` | anyone |
//! | GET | `/api/modules/{name}` | anyone |
//! | POST | `/api/modules/{name}/editable` | anyone |
//! | PUT | `/api/modules/{name}` | conductor |
//! | POST | `/api/control` | conductor |
//! | GET | `/api/snapshot` | anyone |
//! | GET | `/api/feed` | anyone, server-sent events |
//!
//! The conductor proves itself with the `X-Conductor-Token` header.

use std::io::{self, Write};
use std::path::PathBuf;
use std::sync::mpsc::{self, Sender};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};

use lazyseq_core::engine::Budget;
use lazyseq_core::highlight::HighlightSet;
use lazyseq_core::store::ProgramState;
use lazyseq_core::stream::{
    Control, ExecutionMode, LogSink, Machine, OutputEvent, Outcome, Player, RunConfig, Sink,
};
use tokio::sync::watch;

mod routes;
mod snapshot;

pub use routes::TOKEN_HEADER;
pub use snapshot::{Feed, Snapshot, RECENT_EVENTS, RENDER_DEPTH};

use snapshot::{snapshot_of, Publisher};

pub struct SessionConfig {
    pub mode: ExecutionMode,
    /// Pause used when a client switches to slow motion without naming one.
    pub slow_pause_ms: u64,
    pub budget: Budget,
    /// Conductor token. Without one, conductor requests are refused.
    pub token: Option<String>,
    /// Directory of the web client's static files.
    pub ui_dir: Option<PathBuf>,
    /// Where the event log goes, if anywhere.
    pub log: Option<Box<dyn Write + Send>>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            mode: ExecutionMode::Realtime,
            slow_pause_ms: 500,
            budget: Budget::default(),
            token: None,
            ui_dir: None,
            log: None,
        }
    }
}

/// State shared by the request handlers.
pub(crate) struct Hub {
    pub(crate) store: Mutex<ProgramState>,
    pub(crate) control: Mutex<Sender<Control>>,
    /// Mode as last requested, for validating step commands.
    pub(crate) mode: Mutex<ExecutionMode>,
    pub(crate) slow_pause_ms: u64,
    pub(crate) token: Option<String>,
    pub(crate) ui_dir: Option<PathBuf>,
    pub(crate) feed: Arc<Feed>,
    pub(crate) stopped: watch::Receiver<bool>,
}

impl Hub {
    pub(crate) fn send(&self, control: Control) {
        // a closed loop only happens after stop; nothing is left to steer
        let _ = self.control.lock().unwrap().send(control);
    }
}

/// A running session: the run loop on its own thread plus what the HTTP
/// layer needs to reach it.
pub struct Session {
    hub: Arc<Hub>,
    thread: Option<JoinHandle<Outcome>>,
}

struct LogTee {
    log: Option<LogSink<Box<dyn Write + Send>>>,
}

impl Sink for LogTee {
    fn deliver(&mut self, event: &OutputEvent) -> io::Result<()> {
        match &mut self.log {
            Some(log) => log.deliver(event),
            None => Ok(()),
        }
    }
}

/// The run loop recurses on deep terms.
const LOOP_STACK: usize = 64 * 1024 * 1024;

impl Session {
    pub fn start(state: ProgramState, config: SessionConfig) -> io::Result<Session> {
        let machine = Machine::new(state.rules().clone(), config.budget);
        let first = snapshot_of(&machine, config.mode, 0, &HighlightSet::default(), &Default::default());
        let feed = Arc::new(Feed::new(first));
        let (tx, rx) = mpsc::channel();
        let (stopped_tx, stopped) = watch::channel(false);
        let mut publisher = Publisher::new(feed.clone());
        let mut sink = LogTee {
            log: config.log.map(LogSink::new),
        };
        let mode = config.mode;
        let thread = thread::Builder::new()
            .name("run-loop".into())
            .stack_size(LOOP_STACK)
            .spawn(move || {
                let run = RunConfig::default();
                let (_, outcome) = Player::new(machine, mode, rx, &mut sink, &mut publisher, run).run();
                let _ = stopped_tx.send(true);
                outcome
            })?;
        Ok(Session {
            hub: Arc::new(Hub {
                store: Mutex::new(state),
                control: Mutex::new(tx),
                mode: Mutex::new(config.mode),
                slow_pause_ms: config.slow_pause_ms,
                token: config.token,
                ui_dir: config.ui_dir,
                feed,
                stopped,
            }),
            thread: Some(thread),
        })
    }

    pub fn router(&self) -> axum::Router {
        routes::router(self.hub.clone())
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.hub.feed.latest()
    }

    pub fn feed(&self) -> Arc<Feed> {
        self.hub.feed.clone()
    }

    /// Resolves once the run loop has ended, after a stop command.
    pub fn stopped(&self) -> impl std::future::Future<Output = ()> + Send + 'static {
        let mut stopped = self.hub.stopped.clone();
        async move {
            let _ = stopped.wait_for(|s| *s).await;
        }
    }

    /// Stops the run loop and waits for it.
    pub fn shutdown(mut self) -> Option<Outcome> {
        self.hub.send(Control::Stop);
        self.thread.take()?.join().ok()
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        if self.thread.is_some() {
            self.hub.send(Control::Stop);
        }
    }
}

/// Serves `session` on `listener` until the run loop stops or `shutdown`
/// resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    session: &Session,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> io::Result<()> {
    let stopped = session.stopped();
    axum::serve(listener, session.router())
        .with_graceful_shutdown(async move {
            tokio::select! {
                _ = stopped => {}
                _ = shutdown => {}
            }
        })
        .await
}
