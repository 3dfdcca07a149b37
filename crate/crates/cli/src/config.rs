use std::path::{Path, PathBuf};

use convexpath::sequential::RunConfig;
use serde::Deserialize;

pub const CONFIG_ENV: &str = "CONVEXPATH_CONFIG";

/// Settings file. Every field is optional; flags win over the file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub run: RunConfig,
}

pub fn load(explicit: Option<&Path>) -> Result<FileConfig, String> {
    let path: Option<PathBuf> = match explicit {
        Some(p) => Some(p.to_path_buf()),
        None => std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from),
    };
    let Some(path) = path else { return Ok(FileConfig::default()) };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_tables_keep_defaults() {
        let c: FileConfig = toml::from_str("[run]\nepsilon = 0.05\n[run.solver]\nmax_iter = 80\n").unwrap();
        assert_eq!(c.run.epsilon, 0.05);
        assert_eq!(c.run.solver.max_iter, 80);
        assert_eq!(c.run.max_iterations, RunConfig::default().max_iterations);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<FileConfig>("[runn]\nepsilon = 1\n").is_err());
    }
}
