use std::error::Error;
use std::fmt;
use std::panic::{self, AssertUnwindSafe};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use super::{socket, Outbox, Rank, WorkerCtx, DEFAULT_TIMEOUT};

type BoxError = Box<dyn Error + Send + Sync + 'static>;

/// How workers of one launch reach each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    /// Worker threads exchanging messages through in-memory queues.
    #[default]
    InProc,
    /// Worker threads exchanging framed messages over loopback TCP.
    Socket,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::InProc => "inproc",
            Backend::Socket => "socket",
        })
    }
}

impl FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inproc" => Ok(Backend::InProc),
            "socket" => Ok(Backend::Socket),
            other => Err(format!(
                "unknown backend `{other}` (expected inproc|socket)"
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LaunchOptions {
    pub timeout: Duration,
}

impl Default for LaunchOptions {
    fn default() -> Self {
        Self {
            timeout: DEFAULT_TIMEOUT,
        }
    }
}

impl LaunchOptions {
    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LaunchError {
    #[error("world_size must be ≥ 1")]
    InvalidWorldSize,
    #[error("backend setup failed for rank {rank}: {source}")]
    Setup {
        rank: Rank,
        #[source]
        source: std::io::Error,
    },
    #[error("worker {rank} failed: {source}{}", also_failed_note(.also_failed))]
    Worker {
        rank: Rank,
        #[source]
        source: BoxError,
        also_failed: Vec<Rank>,
    },
    #[error("worker {rank} panicked: {message}{}", also_failed_note(.also_failed))]
    Panicked {
        rank: Rank,
        message: String,
        also_failed: Vec<Rank>,
    },
}

fn also_failed_note(ranks: &[Rank]) -> String {
    if ranks.is_empty() {
        String::new()
    } else {
        format!(" (ranks {ranks:?} also failed)")
    }
}

enum Outcome<T> {
    Done(T),
    Failed(BoxError),
    Panicked(String),
}

/// Runs `program` on `world_size` workers and returns their results in rank
/// order.
///
/// Returns once every worker has finished. If any worker fails, the others
/// are told to abort their pending receives and the first failure (in time)
/// is reported, together with the ranks that failed after it.
pub fn launch<T, E, F>(
    world_size: usize,
    backend: Backend,
    options: &LaunchOptions,
    program: F,
) -> Result<Vec<T>, LaunchError>
where
    T: Send,
    E: Into<BoxError>,
    F: Fn(&mut WorkerCtx) -> Result<T, E> + Sync,
{
    if world_size == 0 {
        return Err(LaunchError::InvalidWorldSize);
    }
    let abort = Arc::new(AtomicBool::new(false));
    let first_failure = AtomicUsize::new(usize::MAX);

    let (senders, receivers): (Vec<_>, Vec<_>) = (0..world_size).map(|_| mpsc::channel()).unzip();

    thread::scope(|scope| {
        let outboxes: Vec<Outbox> = match backend {
            Backend::InProc => (0..world_size)
                .map(|_| Outbox::InProc(senders.clone()))
                .collect(),
            Backend::Socket => socket::connect_mesh(scope, &senders)?,
        };
        // Socket readers own their own sender clones.
        drop(senders);

        let program = &program;
        let abort_ref = &abort;
        let first_failure = &first_failure;
        let handles: Vec<_> = receivers
            .into_iter()
            .zip(outboxes)
            .enumerate()
            .map(|(rank, (inbox, outbox))| {
                let mut ctx = WorkerCtx::new(
                    rank,
                    world_size,
                    options.timeout,
                    inbox,
                    outbox,
                    Arc::clone(abort_ref),
                );
                scope.spawn(move || {
                    let result = panic::catch_unwind(AssertUnwindSafe(|| program(&mut ctx)));
                    let outcome = match result {
                        Ok(Ok(v)) => Outcome::Done(v),
                        Ok(Err(e)) => Outcome::Failed(e.into()),
                        Err(p) => Outcome::Panicked(panic_message(p.as_ref())),
                    };
                    if !matches!(outcome, Outcome::Done(_)) {
                        let _ = first_failure.compare_exchange(
                            usize::MAX,
                            rank,
                            Ordering::SeqCst,
                            Ordering::SeqCst,
                        );
                        abort_ref.store(true, Ordering::SeqCst);
                    }
                    // Keep the endpoint alive until the launch is joined so
                    // late messages to a finished worker are not send errors.
                    (outcome, ctx)
                })
            })
            .collect();

        let mut outcomes: Vec<Outcome<T>> = Vec::with_capacity(world_size);
        let mut endpoints = Vec::with_capacity(world_size);
        for h in handles {
            let (outcome, ctx) = h.join().expect("worker panics are caught");
            outcomes.push(outcome);
            endpoints.push(ctx);
        }
        // Closing the endpoints ends the socket reader threads.
        drop(endpoints);

        let first = first_failure.load(Ordering::SeqCst);
        if first == usize::MAX {
            return Ok(outcomes
                .into_iter()
                .map(|o| match o {
                    Outcome::Done(v) => v,
                    _ => unreachable!(),
                })
                .collect());
        }
        let also_failed: Vec<Rank> = outcomes
            .iter()
            .enumerate()
            .filter(|(r, o)| *r != first && !matches!(o, Outcome::Done(_)))
            .map(|(r, _)| r)
            .collect();
        match outcomes.swap_remove(first) {
            Outcome::Failed(source) => Err(LaunchError::Worker {
                rank: first,
                source,
                also_failed,
            }),
            Outcome::Panicked(message) => Err(LaunchError::Panicked {
                rank: first,
                message,
                also_failed,
            }),
            Outcome::Done(_) => unreachable!(),
        }
    })
}

fn panic_message(p: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "non-string panic payload".to_string()
    }
}
