//! HTTP master that owns evolutionary runs and farms fitness evaluation out
//! to remote clients.

pub mod algorithm;
pub mod allowlist;
pub mod error;
pub mod farm;
pub mod http;
pub mod journal;
pub mod logging;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use tokio::sync::oneshot;
use tokio::task::JoinHandle;

pub use allowlist::Allowlist;
pub use error::{FarmError, Result};
pub use farm::{Farm, FarmOptions};
pub use logging::{LogMode, LogSink, RequestLog};

pub struct ServerConfig {
    pub listen: SocketAddr,
    pub farm: FarmOptions,
    pub assets_dir: Option<PathBuf>,
    /// Reload algorithms from the journal directory before serving.
    pub recover: bool,
    pub reaper_interval: Duration,
}

impl ServerConfig {
    /// Ephemeral loopback port, default farm options.
    pub fn local() -> Self {
        ServerConfig {
            listen: SocketAddr::from(([127, 0, 0, 1], 0)),
            farm: FarmOptions::default(),
            assets_dir: None,
            recover: false,
            reaper_interval: Duration::from_secs(1),
        }
    }
}

/// A server running on the current tokio runtime.
pub struct RunningServer {
    pub addr: SocketAddr,
    pub farm: Arc<Farm>,
    shutdown: Option<oneshot::Sender<()>>,
    task: JoinHandle<std::io::Result<()>>,
    reaper: JoinHandle<()>,
}

impl RunningServer {
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Stops accepting connections and waits for in-flight requests.
    pub async fn stop(mut self) -> std::io::Result<()> {
        self.reaper.abort();
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        match (&mut self.task).await {
            Ok(result) => result,
            Err(e) => Err(std::io::Error::other(e)),
        }
    }
}

pub async fn spawn(config: ServerConfig) -> Result<RunningServer> {
    let farm = Arc::new(if config.recover {
        Farm::recover(config.farm)?
    } else {
        Farm::new(config.farm)
    });
    let listener = tokio::net::TcpListener::bind(config.listen).await?;
    let addr = listener.local_addr()?;
    let app = http::router(farm.clone(), config.assets_dir);
    let (tx, rx) = oneshot::channel::<()>();
    let task = tokio::spawn(async move {
        axum::serve(listener, app.into_make_service_with_connect_info::<SocketAddr>())
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await
    });
    let reaper = farm.spawn_reaper(config.reaper_interval);
    Ok(RunningServer {
        addr,
        farm,
        shutdown: Some(tx),
        task,
        reaper,
    })
}
