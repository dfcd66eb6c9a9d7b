//! Settings overlay: environment, then `tslforge.json`, then flags.

use std::path::Path;

use serde::Deserialize;

pub const DEFAULT_CONFIG: &str = "tslforge.json";

/// Keys accepted in the config file. Credentials are env-only.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub model: Option<String>,
    pub base_url: Option<String>,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    pub k: Option<usize>,
    pub trials: Option<u32>,
    pub parallel: Option<usize>,
    pub rate_limit: Option<u32>,
    pub lasso_cap: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

/// Resolved settings below the flag layer; flags are applied at use sites.
pub type Settings = FileConfig;

impl Settings {
    pub fn from_env() -> Self {
        let var = |k| std::env::var(k).ok().filter(|v: &String| !v.is_empty());
        FileConfig {
            model: var(tslforge::llm::ENV_MODEL),
            base_url: var(tslforge::llm::ENV_BASE_URL),
            ..FileConfig::default()
        }
    }

    /// Values present in `file` win over `self`.
    pub fn overlay(self, file: FileConfig) -> Self {
        FileConfig {
            model: file.model.or(self.model),
            base_url: file.base_url.or(self.base_url),
            temperature: file.temperature.or(self.temperature),
            max_tokens: file.max_tokens.or(self.max_tokens),
            k: file.k.or(self.k),
            trials: file.trials.or(self.trials),
            parallel: file.parallel.or(self.parallel),
            rate_limit: file.rate_limit.or(self.rate_limit),
            lasso_cap: file.lasso_cap.or(self.lasso_cap),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_overrides_env() {
        let env = FileConfig { model: Some("env".into()), base_url: Some("http://env".into()), ..Default::default() };
        let file = FileConfig { model: Some("file".into()), ..Default::default() };
        let s = env.overlay(file);
        assert_eq!(s.model.as_deref(), Some("file"));
        assert_eq!(s.base_url.as_deref(), Some("http://env"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"api_key":"x"}"#).unwrap();
        assert!(FileConfig::load(&p).is_err());
        std::fs::write(&p, r#"{"k":3,"model":"m"}"#).unwrap();
        assert_eq!(FileConfig::load(&p).unwrap().k, Some(3));
    }
}
