//! Worker pool and per-role provider connections.

use std::sync::Arc;
use std::time::Duration;

use anicurate_core::providers::{Endpoint, ModelProvider, ReferenceProvider, RemoteOptions, RemoteProvider};
use rayon::prelude::*;

use crate::config::{PipelineConfig, Role};
use crate::error::{CliError, Result};

/// A rayon pool sized by the `workers` setting.
pub struct Workers {
    pool: rayon::ThreadPool,
    size: usize,
}

impl Workers {
    pub fn new(size: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(size)
            .thread_name(|i| format!("worker-{i}"))
            .build()
            .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
        Ok(Self { pool, size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Map `f` over `items` in parallel; results keep input order.
    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        self.pool.install(|| items.par_iter().map(f).collect())
    }
}

/// Providers for one role. Remote endpoints get one connection per worker
/// thread so requests from different workers never queue on each other.
pub enum RoleProvider {
    Local(Arc<dyn ModelProvider>),
    Remote(Vec<RemoteProvider>),
}

impl RoleProvider {
    pub fn get(&self) -> &dyn ModelProvider {
        match self {
            RoleProvider::Local(p) => p.as_ref(),
            RoleProvider::Remote(conns) => {
                let slot = rayon::current_thread_index().unwrap_or(0) % conns.len();
                &conns[slot]
            }
        }
    }
}

pub fn remote_options(config: &PipelineConfig) -> RemoteOptions {
    RemoteOptions {
        timeout: Duration::from_secs_f64(config.providers.timeout_secs),
        retries: config.providers.retries,
    }
}

pub fn connect(endpoint: Endpoint, options: &RemoteOptions, workers: usize) -> Result<RoleProvider> {
    if endpoint == Endpoint::Reference {
        return Ok(RoleProvider::Local(Arc::new(ReferenceProvider::default())));
    }
    let conns = (0..workers.max(1))
        .map(|_| RemoteProvider::new(endpoint.clone(), options.clone()))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(RoleProvider::Remote(conns))
}

/// Every configured role, resolved once per command.
pub struct Providers {
    pub caption: RoleProvider,
    pub embed: RoleProvider,
    pub image: RoleProvider,
    pub regression: RoleProvider,
    pub character: RoleProvider,
    pub smoothness: Option<RoleProvider>,
}

impl Providers {
    pub fn from_config(config: &PipelineConfig, workers: usize) -> Result<Self> {
        let options = remote_options(config);
        let role = |r: Role| -> Result<Option<RoleProvider>> {
            match config.providers.endpoint(r)? {
                Some(e) => {
                    log::debug!("provider {}: {e}", r.key());
                    connect(e, &options, workers).map(Some)
                }
                None => Ok(None),
            }
        };
        let required = |r: Role| -> Result<RoleProvider> {
            role(r)?.ok_or_else(|| CliError::Config(format!("providers.{} is not set", r.key())))
        };
        Ok(Self {
            caption: required(Role::Caption)?,
            embed: required(Role::Embed)?,
            image: required(Role::Image)?,
            regression: required(Role::Regression)?,
            character: required(Role::Character)?,
            smoothness: role(Role::Smoothness)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_keeps_order_for_any_pool_size() {
        let items: Vec<u64> = (0..200).collect();
        let one = Workers::new(1).unwrap().map(&items, |x| x * x);
        let many = Workers::new(4).unwrap().map(&items, |x| x * x);
        assert_eq!(one, many);
        assert_eq!(one[199], 199 * 199);
    }

    #[test]
    fn reference_roles_resolve_in_process() {
        let p = Providers::from_config(&PipelineConfig::default(), 2).unwrap();
        assert!(matches!(p.caption, RoleProvider::Local(_)));
        assert!(p.smoothness.is_none());
        assert_eq!(p.embed.get().embed_text("x").unwrap().dim(), p.embed.get().embed_text("y").unwrap().dim());
    }
}
