//! Config-file loading and backend resolution.
//!
//! Values come from the TOML file first, then command-line flags, then the
//! `PDD_ENDPOINT` / `PDD_MODEL` environment variables.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use pdd_core::backends::HttpProtocol;
use pdd_core::{BackendConfig, BackendKind, Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Contents of `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub format: Option<Format>,
    pub quiet: Option<bool>,
    pub out_dir: Option<PathBuf>,
    pub backend: Option<BackendConfig>,
    /// Second model for `smaller_ref`.
    pub reference: Option<BackendConfig>,
    pub unlearned: Option<BackendConfig>,
    pub original: Option<BackendConfig>,
    pub k: Option<f64>,
    pub band: Option<f64>,
    pub fpr_caps: Option<Vec<f64>>,
    pub buckets: Option<Vec<usize>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let src = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        toml::from_str(&src).map_err(|e| Error::ConfigInvalid(format!("{}: {e}", path.display())))
    }
}

fn parse_protocol(s: &str) -> std::result::Result<HttpProtocol, String> {
    match s {
        "native" => Ok(HttpProtocol::Native),
        "echo-completion" => Ok(HttpProtocol::EchoCompletion),
        other => Err(format!("unknown protocol {other:?} (native | echo-completion)")),
    }
}

/// Flags describing the primary scoring backend.
#[derive(Debug, Clone, Default, Args)]
pub struct BackendArgs {
    /// file | http | bigram (inferred from --train / --logprobs / --endpoint when omitted)
    #[arg(long)]
    pub backend: Option<BackendKind>,
    /// Training corpus for the bigram backend, one document per line.
    #[arg(long, value_name = "PATH")]
    pub train: Option<PathBuf>,
    /// Precomputed log-probabilities for the file backend (JSON lines).
    #[arg(long, value_name = "PATH")]
    pub logprobs: Option<PathBuf>,
    #[arg(long, value_name = "URL")]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// native | echo-completion
    #[arg(long, value_parser = parse_protocol)]
    pub protocol: Option<HttpProtocol>,
    #[arg(long)]
    pub max_parallel: Option<usize>,
    #[arg(long)]
    pub retry_limit: Option<u32>,
    /// Per-request timeout in seconds.
    #[arg(long)]
    pub timeout: Option<f64>,
    /// Add-alpha smoothing constant of the bigram backend.
    #[arg(long)]
    pub alpha: Option<f64>,
}

impl BackendArgs {
    fn inferred_kind(&self) -> Option<BackendKind> {
        self.backend.or(if self.train.is_some() {
            Some(BackendKind::Bigram)
        } else if self.logprobs.is_some() {
            Some(BackendKind::File)
        } else if self.endpoint.is_some() {
            Some(BackendKind::Http)
        } else {
            None
        })
    }

    /// Merges flags over `base` and applies the environment through `env`.
    pub fn resolve(&self, base: Option<&BackendConfig>, env: impl Fn(&str) -> Option<String>) -> Result<BackendConfig> {
        if self.train.is_some() && self.logprobs.is_some() {
            return Err(Error::ConfigInvalid(
                "--train and --logprobs are mutually exclusive".into(),
            ));
        }
        let mut cfg = match (base, self.inferred_kind()) {
            (Some(b), Some(kind)) if b.kind != kind => BackendConfig::new(kind),
            (Some(b), _) => b.clone(),
            (None, Some(kind)) => BackendConfig::new(kind),
            (None, None) => {
                return Err(Error::ConfigInvalid(
                    "no backend configured: pass --backend, --train, --logprobs or --endpoint".into(),
                ))
            }
        };
        if let Some(p) = self.train.as_ref().or(self.logprobs.as_ref()) {
            cfg.path = Some(p.clone());
        }
        if let Some(e) = &self.endpoint {
            cfg.endpoint = Some(e.clone());
        }
        if let Some(m) = &self.model {
            cfg.model_name = Some(m.clone());
        }
        if let Some(p) = self.protocol {
            cfg.protocol = p;
        }
        if let Some(n) = self.max_parallel {
            cfg.max_parallel = n;
        }
        if let Some(n) = self.retry_limit {
            cfg.retry_limit = n;
        }
        if let Some(t) = self.timeout {
            cfg.timeout_secs = t;
        }
        if let Some(a) = self.alpha {
            cfg.alpha = a;
        }
        if cfg.kind == BackendKind::Http {
            cfg.apply_env_with(env);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses `bigram:PATH`, `file:PATH` or `http:URL` into a backend config.
pub fn parse_backend_spec(spec: &str, model: Option<&str>) -> Result<BackendConfig> {
    let (kind, value) = spec
        .split_once(':')
        .ok_or_else(|| Error::ConfigInvalid(format!("backend spec {spec:?} is not KIND:VALUE")))?;
    let kind: BackendKind = kind.parse()?;
    let mut cfg = BackendConfig::new(kind);
    match kind {
        BackendKind::Http => {
            cfg.endpoint = Some(value.to_string());
            cfg.model_name = model.map(str::to_string);
        }
        _ => cfg.path = Some(PathBuf::from(value)),
    }
    cfg.validate()?;
    Ok(cfg)
}

/// A secondary backend: the flag spec wins over the config-file table.
pub fn resolve_role(
    role: &str,
    spec: Option<&str>,
    model: Option<&str>,
    from_file: Option<&BackendConfig>,
) -> Result<BackendConfig> {
    match (spec, from_file) {
        (Some(s), _) => parse_backend_spec(s, model),
        (None, Some(cfg)) => {
            let mut cfg = cfg.clone();
            if let Some(m) = model {
                cfg.model_name = Some(m.to_string());
            }
            cfg.validate()?;
            Ok(cfg)
        }
        (None, None) => Err(Error::ConfigInvalid(format!(
            "the {role} backend is required (--{role} KIND:VALUE or a [{role}] config table)"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_and_env_overrides_flags() {
        let base = BackendConfig::from_toml_str(
            "[backend]\nkind = \"http\"\nendpoint = \"http://file/\"\nmodel_name = \"m0\"\nmax_parallel = 2\n",
        )
        .unwrap();
        let args = BackendArgs {
            endpoint: Some("http://flag/".into()),
            max_parallel: Some(6),
            ..Default::default()
        };
        let none = |_: &str| None;
        let cfg = args.resolve(Some(&base), none).unwrap();
        assert_eq!(cfg.endpoint.as_deref(), Some("http://flag/"));
        assert_eq!(cfg.model_name.as_deref(), Some("m0"));
        assert_eq!(cfg.max_parallel, 6);

        let env = |k: &str| (k == "PDD_ENDPOINT").then(|| "http://env/".to_string());
        let cfg = args.resolve(Some(&base), env).unwrap();
        assert_eq!(cfg.endpoint.as_deref(), Some("http://env/"));
    }

    #[test]
    fn kind_is_inferred_from_paths() {
        let args = BackendArgs {
            train: Some("corpus.txt".into()),
            ..Default::default()
        };
        let cfg = args.resolve(None, |_| None).unwrap();
        assert_eq!(cfg.kind, BackendKind::Bigram);
        assert!(BackendArgs::default().resolve(None, |_| None).is_err());
    }

    #[test]
    fn env_does_not_leak_into_local_backends() {
        let args = BackendArgs {
            logprobs: Some("lp.jsonl".into()),
            ..Default::default()
        };
        let env = |_: &str| Some("http://env/".to_string());
        assert!(args.resolve(None, env).unwrap().endpoint.is_none());
    }

    #[test]
    fn backend_specs() {
        let cfg = parse_backend_spec("http:http://host:8000/score", Some("m")).unwrap();
        assert_eq!(cfg.endpoint.as_deref(), Some("http://host:8000/score"));
        assert_eq!(
            parse_backend_spec("file:a.jsonl", None).unwrap().kind,
            BackendKind::File
        );
        assert!(parse_backend_spec("gpu:x", None).is_err());
        assert!(parse_backend_spec("nocolon", None).is_err());
    }
}
