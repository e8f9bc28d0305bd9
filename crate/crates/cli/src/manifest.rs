//! Flat `key=value` files: run manifests and the optional config file.
//!
//! A manifest lists the command, every effective parameter under its flag
//! name, the seed, the tool version, the wall-clock duration and the files
//! written. Because parameters use flag names, a manifest doubles as a
//! config file: `ptw <command> --config run.manifest` replays the run.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

/// Keys that describe a run rather than parameterize it.
pub const META_KEYS: [&str; 5] = ["command", "tool_version", "wall_clock_seconds", "outputs", "master_seed"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues(pub Vec<(String, String)>);

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut out = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key=value, got `{line}`", n + 1))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(Self(out))
    }

    pub fn read(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.0.push((key.into(), value.to_string()));
    }
}

#[derive(Debug, Clone)]
pub struct RunManifest {
    pub command: String,
    pub params: KeyValues,
    pub master_seed: Option<u64>,
    pub duration: Duration,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn render(&self) -> String {
        let mut kv = KeyValues::default();
        kv.push("command", &self.command);
        kv.push("tool_version", env!("CARGO_PKG_VERSION"));
        if let Some(seed) = self.master_seed {
            kv.push("master_seed", seed);
        }
        kv.0.extend(self.params.0.iter().cloned());
        kv.push("wall_clock_seconds", format!("{:.3}", self.duration.as_secs_f64()));
        let outputs: Vec<String> = self.outputs.iter().map(|p| p.display().to_string()).collect();
        kv.push("outputs", outputs.join(","));
        kv.0.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        fs::write(path, self.render())
    }
}

/// `<out>.manifest` next to the primary output.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest");
    PathBuf::from(name)
}

/// Turns config entries into command-line flags, skipping keys the user
/// already passed on the command line.
pub fn config_to_args(config: &KeyValues, command: &str, user_args: &[String]) -> Result<Vec<String>, String> {
    if let Some(c) = config.get("command") {
        if c != command {
            return Err(format!("config was written for `{c}`, not `{command}`"));
        }
    }
    let given: Vec<&str> = user_args
        .iter()
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a))
        .collect();
    let style_given = given.iter().any(|g| matches!(*g, "alpha" | "a" | "b" | "c"));

    let mut out = Vec::new();
    for (key, value) in &config.0 {
        let key = key.as_str();
        if META_KEYS.contains(&key) || key == "config" || given.contains(&key) {
            continue;
        }
        if style_given && matches!(key, "alpha" | "a" | "b" | "c") {
            continue;
        }
        match value.as_str() {
            "true" => out.push(format!("--{key}")),
            "false" => {}
            _ => out.push(format!("--{key}={value}")),
        }
    }
    Ok(out)
}
