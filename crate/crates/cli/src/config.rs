//! Flat key=value run configuration: file parsing, defaults, and the
//! resolution order command line > config file > environment > defaults.

use std::fmt;

/// Fully resolved options for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: String,
    pub dim: u32,
    pub phi: Option<f64>,
    pub length: Option<f64>,
    pub xi: Option<f64>,
    pub grid: Option<usize>,
    pub images: usize,
    pub r: Option<f64>,
    pub kappa: Option<f64>,
    pub samples: Option<usize>,
    /// 0 means all available cores.
    pub threads: usize,
    pub out: Option<String>,
    pub snapshots: bool,
}

/// Values taken from a config file; everything optional.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FileConfig {
    pub command: Option<String>,
    pub dim: Option<u32>,
    pub phi: Option<f64>,
    pub length: Option<f64>,
    pub xi: Option<f64>,
    pub grid: Option<usize>,
    pub images: Option<usize>,
    pub r: Option<f64>,
    pub kappa: Option<f64>,
    pub samples: Option<usize>,
    pub threads: Option<usize>,
    pub out: Option<String>,
    pub snapshots: Option<bool>,
}

/// Values given on the command line; everything optional.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub dim: Option<u32>,
    pub phi: Option<f64>,
    pub length: Option<f64>,
    pub xi: Option<f64>,
    pub grid: Option<usize>,
    pub images: Option<usize>,
    pub r: Option<f64>,
    pub kappa: Option<f64>,
    pub samples: Option<usize>,
    pub threads: Option<usize>,
    pub out: Option<String>,
    pub snapshots: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    BadLine(String),
    UnknownKey(String),
    BadValue { key: String, expected: &'static str },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::BadLine(line) => write!(f, "config line is not key=value: `{line}`"),
            ConfigError::UnknownKey(key) => write!(f, "unknown config key `{key}`"),
            ConfigError::BadValue { key, expected } => {
                write!(f, "config key `{key}` expects {expected}")
            }
        }
    }
}

impl std::error::Error for ConfigError {}

fn parse_num(key: &str, value: &str) -> Result<f64, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue { key: key.into(), expected: "a number" })
}

fn parse_int<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue { key: key.into(), expected: "an integer" })
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(ConfigError::BadValue { key: key.into(), expected: "true or false" }),
    }
}

/// Parses a flat key=value file. `#` starts a comment; blank lines are
/// skipped; unknown keys are rejected.
pub fn parse_config(text: &str) -> Result<FileConfig, ConfigError> {
    let mut out = FileConfig::default();
    for raw in text.lines() {
        let line = match raw.split_once('#') {
            Some((before, _)) => before.trim(),
            None => raw.trim(),
        };
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::BadLine(line.to_string()))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "command" => out.command = Some(value.to_string()),
            "dim" => out.dim = Some(parse_int(key, value)?),
            "phi" => out.phi = Some(parse_num(key, value)?),
            "length" => out.length = Some(parse_num(key, value)?),
            "xi" => out.xi = Some(parse_num(key, value)?),
            "grid" => out.grid = Some(parse_int(key, value)?),
            "images" => out.images = Some(parse_int(key, value)?),
            "r" => out.r = Some(parse_num(key, value)?),
            "kappa" => out.kappa = Some(parse_num(key, value)?),
            "samples" => out.samples = Some(parse_int(key, value)?),
            "threads" => out.threads = Some(parse_int(key, value)?),
            "out" => out.out = Some(value.to_string()),
            "snapshots" => out.snapshots = Some(parse_bool(key, value)?),
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
    }
    Ok(out)
}

/// Merges command line over config file over environment over defaults.
/// The subcommand name always comes from the command line.
pub fn resolve(command: &str, flags: &Overrides, file: &FileConfig) -> RunConfig {
    let env_threads = std::env::var("CHB_THREADS").ok().and_then(|s| s.parse().ok());
    RunConfig {
        command: command.to_string(),
        dim: flags.dim.or(file.dim).unwrap_or(2),
        phi: flags.phi.or(file.phi),
        length: flags.length.or(file.length),
        xi: flags.xi.or(file.xi),
        grid: flags.grid.or(file.grid),
        images: flags.images.or(file.images).unwrap_or(32),
        r: flags.r.or(file.r),
        kappa: flags.kappa.or(file.kappa),
        samples: flags.samples.or(file.samples),
        threads: flags.threads.or(file.threads).or(env_threads).unwrap_or(0),
        out: flags.out.clone().or_else(|| file.out.clone()),
        snapshots: flags.snapshots || file.snapshots.unwrap_or(false),
    }
}

impl RunConfig {
    /// Textual form that `parse_config` reads back losslessly.
    #[allow(dead_code)]
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut push = |k: &str, v: String| {
            s.push_str(k);
            s.push('=');
            s.push_str(&v);
            s.push('\n');
        };
        push("command", self.command.clone());
        push("dim", self.dim.to_string());
        if let Some(v) = self.phi {
            push("phi", format!("{v}"));
        }
        if let Some(v) = self.length {
            push("length", format!("{v}"));
        }
        if let Some(v) = self.xi {
            push("xi", format!("{v}"));
        }
        if let Some(v) = self.grid {
            push("grid", v.to_string());
        }
        push("images", self.images.to_string());
        if let Some(v) = self.r {
            push("r", format!("{v}"));
        }
        if let Some(v) = self.kappa {
            push("kappa", format!("{v}"));
        }
        if let Some(v) = self.samples {
            push("samples", v.to_string());
        }
        push("threads", self.threads.to_string());
        if let Some(v) = &self.out {
            push("out", v.clone());
        }
        push("snapshots", self.snapshots.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let file = parse_config("").unwrap();
        let cfg = resolve("constants", &Overrides::default(), &file);
        assert_eq!(cfg.dim, 2);
        assert_eq!(cfg.images, 32);
        assert_eq!(cfg.phi, None);
        assert!(!cfg.snapshots);
    }

    #[test]
    fn comments_and_blanks_are_skipped() {
        let text = "# run setup\n\nphi = 0.1  # excess fraction\nlength=400\ndim=2\n";
        let file = parse_config(text).unwrap();
        assert_eq!(file.phi, Some(0.1));
        assert_eq!(file.length, Some(400.0));
        assert_eq!(file.dim, Some(2));
    }

    #[test]
    fn file_parameters_give_expected_xi() {
        let file = parse_config("phi=0.1\nlength=400\ndim=2").unwrap();
        let cfg = resolve("path", &Overrides::default(), &file);
        let d = chb_core::params::Dim::new(cfg.dim).unwrap();
        let params =
            chb_core::params::ModelParams::new(d, cfg.length.unwrap(), cfg.phi.unwrap()).unwrap();
        assert!((params.xi() - 5.428835233189812).abs() < 1e-10);
    }

    #[test]
    fn flags_override_file() {
        let file = parse_config("phi=0.2\ngrid=64").unwrap();
        let flags = Overrides { phi: Some(0.3), ..Overrides::default() };
        let cfg = resolve("path", &flags, &file);
        assert_eq!(cfg.phi, Some(0.3));
        assert_eq!(cfg.grid, Some(64));
    }

    #[test]
    fn bad_values_name_key_and_type() {
        match parse_config("phi=abc") {
            Err(ConfigError::BadValue { key, expected }) => {
                assert_eq!(key, "phi");
                assert_eq!(expected, "a number");
            }
            other => panic!("expected BadValue, got {other:?}"),
        }
        match parse_config("grid=1.5") {
            Err(ConfigError::BadValue { expected, .. }) => assert_eq!(expected, "an integer"),
            other => panic!("expected BadValue, got {other:?}"),
        }
        match parse_config("snapshots=yes") {
            Err(ConfigError::BadValue { expected, .. }) => assert_eq!(expected, "true or false"),
            other => panic!("expected BadValue, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        match parse_config("phii=0.1") {
            Err(ConfigError::UnknownKey(k)) => assert_eq!(k, "phii"),
            other => panic!("expected UnknownKey, got {other:?}"),
        }
    }

    #[test]
    fn config_round_trips_losslessly() {
        let cfg = RunConfig {
            command: "path".into(),
            dim: 3,
            phi: Some(0.1),
            length: Some(400.0),
            xi: None,
            grid: Some(96),
            images: 24,
            r: Some(1.0541),
            kappa: Some(0.4641588833612779),
            samples: None,
            threads: 4,
            out: Some("run/out".into()),
            snapshots: true,
        };
        let file = parse_config(&cfg.to_text()).unwrap();
        let back = resolve(file.command.as_deref().unwrap(), &Overrides::default(), &file);
        assert_eq!(back, cfg);
    }
}
