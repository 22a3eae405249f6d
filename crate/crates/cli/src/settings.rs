//! Configuration resolution: flags over environment over file over defaults.

use std::path::{Path, PathBuf};

use apf_core::synthbench::{BandSpec, CorruptionKind};
use apf_gateway::client::ENV_API_BASE;
use apf_gateway::ProviderConfig;
use apf_pipeline::PipelineConfig;
use serde::{Deserialize, Serialize};

use crate::args::{GlobalArgs, ProviderKind};
use crate::error::CliError;

pub const ENV_SEED: &str = "APF_SEED";
pub const ENV_PROVIDER: &str = "APF_PROVIDER";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderSettings {
    pub kind: ProviderKind,
    pub corrupt_p: f64,
    pub corruption: CorruptionKind,
    pub noise_k: usize,
    pub http: ProviderConfig,
}

impl Default for ProviderSettings {
    fn default() -> Self {
        ProviderSettings {
            kind: ProviderKind::MockFaithful,
            corrupt_p: 0.3,
            corruption: CorruptionKind::FlipComparator,
            noise_k: 1,
            http: ProviderConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct FileConfig {
    #[serde(flatten)]
    pipeline: PipelineConfig,
    provider: ProviderSettings,
    /// Band layout file (TOML or JSON), relative to the config file.
    band_spec: Option<PathBuf>,
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub pipeline: PipelineConfig,
    pub provider: ProviderSettings,
    pub out: PathBuf,
    pub force: bool,
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn load_band_spec(path: &Path) -> Result<BandSpec, CliError> {
    let text = read_text(path)?;
    let spec: BandSpec = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
    } else {
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
    };
    spec.validate()
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    Ok(spec)
}

fn parse_env<T: std::str::FromStr>(
    name: &str,
    lookup: &impl Fn(&str) -> Option<String>,
) -> Result<Option<T>, CliError> {
    lookup(name)
        .map(|v| {
            v.parse()
                .map_err(|_| CliError::Usage(format!("{name}={v:?} is not valid")))
        })
        .transpose()
}

/// Merges defaults, the config file, environment variables and flags.
pub fn resolve(args: &GlobalArgs, env: impl Fn(&str) -> Option<String>) -> Result<Settings, CliError> {
    let mut file = match &args.config {
        Some(path) => {
            let text = read_text(path)?;
            let mut file: FileConfig =
                toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            if let Some(spec) = &file.band_spec {
                let spec_path = path.parent().unwrap_or(Path::new(".")).join(spec);
                file.pipeline.bands = load_band_spec(&spec_path)?;
            }
            file
        }
        None => FileConfig::default(),
    };

    if let Some(base) = env(ENV_API_BASE) {
        file.provider.http.endpoint = base;
    }
    if let Some(seed) = parse_env(ENV_SEED, &env)? {
        file.pipeline.seed = seed;
    }
    if let Some(kind) = env(ENV_PROVIDER) {
        file.provider.kind = <ProviderKind as clap::ValueEnum>::from_str(&kind, false)
            .map_err(|_| CliError::Usage(format!("{ENV_PROVIDER}={kind:?} is not a provider")))?;
    }

    let mut pipeline = file.pipeline;
    let mut provider = file.provider;
    if let Some(v) = args.seed {
        pipeline.seed = v;
    }
    if let Some(v) = args.threshold {
        pipeline.threshold = v;
    }
    if let Some(v) = args.alpha {
        pipeline.alpha = v;
    }
    if let Some(v) = args.variants {
        pipeline.variants = v;
    }
    if let Some(v) = args.samples {
        pipeline.samples = v;
    }
    if let Some(v) = args.sets {
        pipeline.n_sets = v;
    }
    if let Some(v) = args.provider {
        provider.kind = v;
    }
    if let Some(v) = args.corrupt_p {
        provider.corrupt_p = v;
    }
    if let Some(v) = args.noise_k {
        provider.noise_k = v;
    }
    pipeline.validate()?;
    if !(0.0..=1.0).contains(&provider.corrupt_p) {
        return Err(CliError::Usage("corrupt_p must lie in [0, 1]".into()));
    }
    if provider.kind == ProviderKind::Http {
        provider.http.validate()?;
    }
    Ok(Settings {
        pipeline,
        provider,
        out: args.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("out")),
        force: args.force,
    })
}
