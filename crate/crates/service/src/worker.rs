//! Background evaluation. The store is the durable queue; the channel only
//! wakes workers, so ids lost in a crash are recovered from the store on
//! the next start.

use std::collections::HashSet;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use tokio::sync::{mpsc, Semaphore};

use crate::api::{router, AppState};
use crate::config::LoadedConfig;
use crate::error::ServiceError;
use crate::service::BenchmarkService;

const PURGE_INTERVAL: Duration = Duration::from_secs(3600);

#[derive(Clone)]
pub struct WorkerPool {
    tx: mpsc::UnboundedSender<String>,
}

impl WorkerPool {
    /// Spawns the dispatcher on the current runtime; at most `workers`
    /// evaluations run at once and never two for the same submission.
    pub fn start(service: Arc<BenchmarkService>, workers: usize) -> Self {
        let (tx, mut rx) = mpsc::unbounded_channel::<String>();
        let permits = Arc::new(Semaphore::new(workers.max(1)));
        let in_flight = Arc::new(Mutex::new(HashSet::<String>::new()));
        tokio::spawn(async move {
            while let Some(id) = rx.recv().await {
                if !in_flight.lock().expect("in-flight set").insert(id.clone()) {
                    continue;
                }
                let permit = permits.clone().acquire_owned().await.expect("semaphore open");
                let service = service.clone();
                let in_flight = in_flight.clone();
                tokio::spawn(async move {
                    let job = {
                        let (service, id) = (service.clone(), id.clone());
                        tokio::task::spawn_blocking(move || service.process(&id))
                    };
                    match job.await {
                        Ok(Ok(_)) => {}
                        Ok(Err(e)) => tracing::error!(submission = %id, error = %e, "processing failed"),
                        Err(_) => {
                            tracing::error!(submission = %id, "evaluation panicked");
                            let (service, id) = (service.clone(), id.clone());
                            let _ = tokio::task::spawn_blocking(move || service.abandon(&id, "internal evaluation failure")).await;
                        }
                    }
                    in_flight.lock().expect("in-flight set").remove(&id);
                    drop(permit);
                });
            }
        });
        Self { tx }
    }

    pub fn enqueue(&self, id: impl Into<String>) {
        // A closed channel means shutdown; recovery picks the id up later.
        let _ = self.tx.send(id.into());
    }
}

/// Opens the service, requeues unfinished work and starts workers and the
/// retention sweep. Must run inside a tokio runtime.
pub fn start(config: LoadedConfig) -> Result<AppState, ServiceError> {
    let workers = config.config.workers;
    let service = Arc::new(BenchmarkService::open(config)?);
    let pending = service.recover()?;
    let pool = WorkerPool::start(service.clone(), workers);
    for id in pending {
        pool.enqueue(id);
    }
    if service.config().config.retention_days.is_some() {
        let service = service.clone();
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(PURGE_INTERVAL);
            loop {
                tick.tick().await;
                let s = service.clone();
                if let Ok(Err(e)) = tokio::task::spawn_blocking(move || s.purge_expired_now()).await {
                    tracing::error!(error = %e, "retention sweep failed");
                }
            }
        });
    }
    Ok(AppState { service, pool })
}

/// Serves the API on `addr` until ctrl-c.
pub async fn serve(config: LoadedConfig, addr: SocketAddr) -> Result<(), ServiceError> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    serve_listener(config, listener).await
}

pub async fn serve_listener(config: LoadedConfig, listener: tokio::net::TcpListener) -> Result<(), ServiceError> {
    let app = router(start(config)?);
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
