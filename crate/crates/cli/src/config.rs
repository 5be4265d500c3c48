//! TOML configuration. Every key is optional; command-line flags override
//! the file. Secrets are never read from here: the chat backend takes the
//! name of an environment variable holding the API key.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use decompcheck::alignment::{ContextLimits, PromptTemplate, TemplateSet, TokenEstimator};
use decompcheck::backends::{
    Backend, ChatBackend, ChatConfig, Duplicates, GenerationParams, LexicalBackend, LexicalThresholds,
    PredictionStore, ReplayBackend, RetryPolicy, DEFAULT_API_KEY_ENV,
};
use decompcheck::ingest::SCHEMA_VERSION;
use serde::Deserialize;

use crate::error::{CliError, CliResult, Exit, OrExit};

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub dataset: Option<PathBuf>,
    pub schema_version: Option<String>,
    pub run: RunConfig,
    pub templates: TemplatePaths,
    pub context: ContextConfig,
    pub backend: BackendConfig,
    pub stats: StatsConfig,
    /// Directory that relative paths in the file are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seeds: Option<Vec<u64>>,
    pub cache: Option<PathBuf>,
    pub lenient_parse: bool,
    pub max_calls: Option<usize>,
    pub max_in_flight: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemplatePaths {
    pub vanilla: Option<PathBuf>,
    pub sre: Option<PathBuf>,
    pub sae: Option<PathBuf>,
    pub abl_sre: Option<PathBuf>,
    pub abl_sae: Option<PathBuf>,
    pub subclaim: Option<PathBuf>,
    pub decompose: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContextConfig {
    pub sae_limit: usize,
    pub sre_limit: usize,
    pub chars_per_token: f64,
}

impl Default for ContextConfig {
    fn default() -> Self {
        let limits = ContextLimits::default();
        Self {
            sae_limit: limits.sae,
            sre_limit: limits.sre,
            chars_per_token: TokenEstimator::default().chars_per_token,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Lexical,
    Replay,
    Chat,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub tag: Option<String>,
    /// Prediction store answered from by the replay backend.
    pub store: Option<PathBuf>,
    pub support_threshold: Option<f64>,
    pub refute_threshold: Option<f64>,
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the API key.
    pub api_key_env: Option<String>,
    pub max_in_flight: Option<usize>,
    pub min_interval_ms: Option<u64>,
    pub timeout_s: Option<u64>,
    pub params: GenerationParams,
    pub retry: RetryPolicy,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub n_resamples: usize,
    pub bootstrap_seed: u64,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            n_resamples: 1000,
            bootstrap_seed: 0,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).or_exit(Exit::Usage, format!("reading config {}", path.display()))?;
        let mut config: Config = toml::from_str(&text).or_exit(Exit::Usage, format!("parsing config {}", path.display()))?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(config)
    }

    /// Resolves a path from the config file against the file's directory.
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn schema_version(&self) -> &str {
        self.schema_version.as_deref().unwrap_or(SCHEMA_VERSION)
    }

    fn template(&self, path: &Option<PathBuf>, default: fn() -> PromptTemplate) -> CliResult<PromptTemplate> {
        match path {
            Some(p) => {
                let p = self.resolve(p);
                PromptTemplate::load(&p).or_exit(Exit::Usage, format!("loading template {}", p.display()))
            }
            None => Ok(default()),
        }
    }

    pub fn template_set(&self) -> CliResult<TemplateSet> {
        let d = TemplateSet::default();
        let t = &self.templates;
        Ok(TemplateSet {
            vanilla: self.template(&t.vanilla, PromptTemplate::default_vanilla)?,
            sre: self.template(&t.sre, PromptTemplate::default_sre)?,
            sae: self.template(&t.sae, PromptTemplate::default_sae)?,
            abl_sre: match &t.abl_sre {
                Some(_) => self.template(&t.abl_sre, PromptTemplate::default_sre)?,
                None => d.abl_sre,
            },
            abl_sae: match &t.abl_sae {
                Some(_) => self.template(&t.abl_sae, PromptTemplate::default_sre)?,
                None => d.abl_sae,
            },
        })
    }

    pub fn subclaim_template(&self) -> CliResult<PromptTemplate> {
        self.template(&self.templates.subclaim, PromptTemplate::default_subclaim)
    }

    pub fn decompose_template(&self) -> CliResult<PromptTemplate> {
        self.template(&self.templates.decompose, PromptTemplate::default_decompose)
    }

    pub fn limits(&self) -> ContextLimits {
        ContextLimits {
            sae: self.context.sae_limit,
            sre: self.context.sre_limit,
        }
    }

    pub fn estimator(&self) -> CliResult<TokenEstimator> {
        let c = self.context.chars_per_token;
        if !(c.is_finite() && c > 0.0) {
            return Err(CliError::usage(anyhow::anyhow!("chars_per_token must be positive, got {c}")));
        }
        Ok(TokenEstimator { chars_per_token: c })
    }

    pub fn build_backend(&self) -> CliResult<Arc<dyn Backend>> {
        let b = &self.backend;
        match b.kind {
            BackendKind::Lexical => {
                let d = LexicalThresholds::default();
                let th = LexicalThresholds {
                    support: b.support_threshold.unwrap_or(d.support),
                    refute: b.refute_threshold.unwrap_or(d.refute),
                };
                let backend = LexicalBackend::new(th)?;
                Ok(match &b.tag {
                    Some(tag) => Arc::new(backend.with_tag(tag.clone())),
                    None => Arc::new(backend),
                })
            }
            BackendKind::Replay => {
                let path = b
                    .store
                    .as_ref()
                    .ok_or_else(|| CliError::usage(anyhow::anyhow!("replay backend needs backend.store or --store")))?;
                let path = self.resolve(path);
                let store = PredictionStore::load(&path, Duplicates::Reject)?;
                let tag = b.tag.clone().unwrap_or_else(|| "replay".into());
                Ok(Arc::new(ReplayBackend::new(tag, Arc::new(store))))
            }
            BackendKind::Chat => {
                let endpoint = b
                    .endpoint
                    .clone()
                    .ok_or_else(|| CliError::usage(anyhow::anyhow!("chat backend needs backend.endpoint or --endpoint")))?;
                let mut config = ChatConfig::new(endpoint);
                if let Some(tag) = &b.tag {
                    config.tag = tag.clone();
                }
                config.retry = b.retry;
                if let Some(n) = b.max_in_flight {
                    config.max_in_flight = n;
                }
                if let Some(ms) = b.min_interval_ms {
                    config.min_interval = Duration::from_millis(ms);
                }
                if let Some(s) = b.timeout_s {
                    config.timeout = Duration::from_secs(s);
                }
                let env = b.api_key_env.as_deref().unwrap_or(DEFAULT_API_KEY_ENV);
                Ok(Arc::new(ChatBackend::new(config, b.params.clone(), env)?))
            }
        }
    }
}
