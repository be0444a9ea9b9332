//! Flat `key = value` experiment configs merged with command-line flags.
//!
//! Every command declares its keys up front. A key may come from a flag, from
//! the config file or from its default; flags win. Each resolved value keeps
//! where it came from so errors can point at it and the echoed config can say
//! which source won.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use reservoir_hydro::{Error as CoreError, Profile};

use crate::error::CliError;

#[derive(Debug, Clone, Copy)]
pub struct Key {
    pub name: &'static str,
    pub default: Option<&'static str>,
    pub help: &'static str,
}

const fn key(name: &'static str, default: Option<&'static str>, help: &'static str) -> Key {
    Key { name, default, help }
}

const OUT: Key = key("out", Some("out"), "output directory");
const SEED: Key = key("seed", Some("1"), "experiment seed");
const MODEL: Key = key("model", None, "rw or sep");
const THETA: Key = key("theta", None, "reservoir slowdown exponent");
const ALPHA: Key = key("alpha", Some("1"), "reservoir release constant");
const PROFILE: Key = key("profile", None, "initial density, e.g. cos(0.5,0.25,1)");
const METHOD: Key = key("method", Some("particlewise"), "walk simulation: event or particlewise");
const PDE: [Key; 4] = [
    key("pde.backend", Some("spectral"), "solver for limiting densities: spectral or fd"),
    key("pde.K", Some("128"), "spectral modes"),
    key("pde.nx", Some("512"), "grid intervals"),
    key("pde.dt", Some("1e-5"), "time step"),
];

pub const COMMANDS: [&str; 9] = [
    "simulate",
    "oracle",
    "solve",
    "verify-local-eq",
    "verify-hydro",
    "verify-stationarity",
    "equivalence",
    "entropy",
    "sweep",
];

pub fn about(command: &str) -> &'static str {
    match command {
        "simulate" => "simulate replicas and write mean occupations and the reservoir trace",
        "oracle" => "exact Poisson parameters of independent walks started from the product measure",
        "solve" => "solve a limiting boundary-value problem",
        "verify-local-eq" => "window laws against product measures at the limiting density",
        "verify-hydro" => "hydrodynamic deviation ladder over N",
        "verify-stationarity" => "single-site marginals started from a reversible measure",
        "equivalence" => "L2 distance between two PDE solutions",
        "entropy" => "relative entropy of the initial measure against its bound",
        "sweep" => "run a command over listed theta and N values",
        _ => "",
    }
}

/// Keys accepted by `command`, in echo order.
pub fn keys(command: &str) -> Vec<Key> {
    let mut k = match command {
        "simulate" => vec![
            MODEL,
            key("N", None, "lattice size"),
            THETA,
            ALPHA,
            PROFILE,
            key("times", Some("0.1"), "sample times, comma separated"),
            key("replicas", Some("1"), "independent runs averaged in the output"),
            SEED,
            key("method", Some("event"), "walk simulation: event or particlewise"),
            key("eps", Some("auto"), "block width of the boundary estimate; auto is max(0.05, 1/N)"),
        ],
        "oracle" => vec![
            key("N", None, "lattice size"),
            THETA,
            ALPHA,
            PROFILE,
            key("times", Some("0.1"), "times, comma separated"),
        ],
        "solve" => vec![
            key("bc", None, "boundary condition"),
            ALPHA,
            PROFILE,
            key("M", None, "conserved mass, a number or auto"),
            key("T", Some("1"), "horizon"),
            key("backend", Some("spectral"), "spectral or fd"),
            key("K", Some("128"), "spectral modes"),
            key("nx", Some("512"), "grid intervals"),
            key("dt", Some("1e-5"), "time step"),
            key("outputs", Some("100"), "output intervals over [0,T]"),
            key("wentzell", Some("one-sided"), "finite-difference Wentzell stencil: one-sided or finite-volume"),
        ],
        "verify-local-eq" => {
            let mut v = vec![
                MODEL,
                key("N", Some("128"), "lattice size"),
                THETA,
                ALPHA,
                PROFILE,
                key("t", Some("0.1"), "time"),
                key("u", Some("0.25,0.5,0.75"), "window centres"),
                key("k", Some("1"), "window half width"),
                key("replicas", Some("20000"), "replicas"),
                SEED,
                METHOD,
                key("ladder", None, "N values for the oracle gap ladder (independent walks)"),
                key("threshold.local_tv", Some("0.03"), "TV bound"),
                key("threshold.correlation_factor", Some("4"), "correlation bound in units of 1/sqrt(replicas)"),
                key("threshold.oracle_gap", Some("0.02"), "final oracle gap bound"),
            ];
            v.extend(PDE);
            v
        }
        "verify-hydro" => {
            let mut v = vec![
                MODEL,
                THETA,
                ALPHA,
                PROFILE,
                key("t", Some("0.2"), "time"),
                key("ladder", Some("64,128,256,512"), "N values"),
                key("replicas", Some("10000"), "replicas per N"),
                SEED,
                METHOD,
                key("H", Some("auto"), "test functions separated by ';', or auto"),
                key("threshold.hydro_deviation", Some("0.02"), "final deviation bound"),
            ];
            v.extend(PDE);
            v
        }
        "verify-stationarity" => vec![
            MODEL,
            key("N", Some("32"), "lattice size"),
            THETA,
            ALPHA,
            key("level", None, "reversible level: lambda (rw) or p (sep)"),
            key("t", Some("0.1"), "time"),
            key("replicas", Some("20000"), "replicas"),
            SEED,
            METHOD,
            key("perturb", Some("0"), "shift added to the initial bulk parameters"),
            key("threshold.stationarity_tv", Some("0.02"), "TV bound"),
        ],
        "equivalence" => vec![
            key("left", None, "bc:backend"),
            key("right", None, "bc:backend"),
            ALPHA,
            PROFILE,
            key("M", Some("auto"), "conserved mass, a number or auto"),
            key("T", Some("1"), "horizon"),
            key("K", Some("128"), "spectral modes"),
            key("nx", Some("512"), "grid intervals"),
            key("dt", Some("1e-5"), "time step"),
            key("tol", Some("1e-3"), "L2 bound"),
        ],
        "entropy" => vec![
            key("N", Some("100,1000,10000"), "lattice sizes"),
            THETA,
            ALPHA,
            PROFILE,
            key("p", Some("auto"), "reference level, or auto for p/(1-p) = gamma(0)"),
        ],
        "sweep" => {
            let mut v = vec![
                key("command", None, "command to run at every point"),
                key("thetas", None, "theta values"),
                key("Ns", None, "N values"),
            ];
            for c in SWEEPABLE {
                for k in keys(c) {
                    if !v.iter().any(|x| x.name == k.name) && k.name != "out" {
                        v.push(Key { default: None, ..k });
                    }
                }
            }
            v
        }
        _ => Vec::new(),
    };
    if command != "sweep" || !k.iter().any(|x| x.name == "out") {
        k.push(OUT);
    }
    k
}

/// Commands that have a `theta` key and so can be swept.
pub const SWEEPABLE: [&str; 6] = ["simulate", "oracle", "verify-local-eq", "verify-hydro", "verify-stationarity", "entropy"];

#[derive(Debug, Clone, PartialEq)]
pub enum Origin {
    Flag,
    File { path: PathBuf, line: usize, col: usize },
    Default,
    Sweep,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Flag => f.write_str("flag"),
            Origin::File { path, line, col } => write!(f, "{}:{line}:{col}", path.display()),
            Origin::Default => f.write_str("default"),
            Origin::Sweep => f.write_str("sweep point"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Setting {
    pub value: String,
    pub origin: Origin,
    /// A file entry that the flag replaced.
    pub overrides: Option<Origin>,
}

/// One entry of a config file.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
    pub key_col: usize,
    pub value_col: usize,
}

/// Parses `key = value` lines. `#` starts a comment at the beginning of a
/// line or after whitespace; blank lines are ignored.
pub fn parse_config(text: &str, path: &Path) -> Result<Vec<Entry>, CliError> {
    let at = |line: usize, col: usize, msg: String| CliError::input_at(msg, Origin::File { path: path.into(), line, col });
    let mut out: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = strip_comment(raw);
        if body.trim().is_empty() {
            continue;
        }
        let Some(eq) = body.find('=') else {
            let col = body.len() - body.trim_start().len() + 1;
            return Err(at(line, col, "expected 'key = value'".into()));
        };
        let key_part = &body[..eq];
        let key = key_part.trim();
        let key_col = key_part.len() - key_part.trim_start().len() + 1;
        if key.is_empty() {
            return Err(at(line, eq + 1, "missing key before '='".into()));
        }
        if let Some(bad) = key.char_indices().find(|(_, c)| !(c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))) {
            return Err(at(line, key_col + bad.0, format!("invalid character '{}' in key", bad.1)));
        }
        let value_part = &body[eq + 1..];
        let value = value_part.trim();
        let value_col = eq + 2 + (value_part.len() - value_part.trim_start().len());
        if value.is_empty() {
            return Err(at(line, value_col, format!("missing value for '{key}'")));
        }
        if let Some(prev) = out.iter().find(|e| e.key == key) {
            return Err(at(line, key_col, format!("duplicate key '{key}' (first set on line {})", prev.line)));
        }
        out.push(Entry { key: key.into(), value: value.into(), line, key_col, value_col });
    }
    Ok(out)
}

fn strip_comment(line: &str) -> &str {
    let bytes = line.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        if b == b'#' && (i == 0 || bytes[i - 1].is_ascii_whitespace()) {
            return &line[..i];
        }
    }
    line
}

/// Resolved settings for one command.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub command: String,
    pub keys: Vec<Key>,
    pub settings: BTreeMap<String, Setting>,
    pub config_path: Option<PathBuf>,
}

impl Resolved {
    /// Merges flags over file entries over defaults. Unknown file keys are errors.
    pub fn merge(
        command: &str,
        flags: &[(String, String)],
        file: Option<(&Path, Vec<Entry>)>,
    ) -> Result<Self, CliError> {
        let keys = keys(command);
        let mut settings = BTreeMap::new();
        let mut config_path = None;
        if let Some((path, entries)) = file {
            config_path = Some(path.to_path_buf());
            for e in entries {
                if !keys.iter().any(|k| k.name == e.key) {
                    return Err(CliError::input_at(
                        format!("unknown key '{}' for {command}", e.key),
                        Origin::File { path: path.into(), line: e.line, col: e.key_col },
                    ));
                }
                let origin = Origin::File { path: path.into(), line: e.line, col: e.value_col };
                settings.insert(e.key, Setting { value: e.value, origin, overrides: None });
            }
        }
        for (k, v) in flags {
            let prev = settings.remove(k).map(|s: Setting| s.origin);
            settings.insert(k.clone(), Setting { value: v.clone(), origin: Origin::Flag, overrides: prev });
        }
        for k in &keys {
            if let Some(d) = k.default {
                settings
                    .entry(k.name.to_string())
                    .or_insert(Setting { value: d.into(), origin: Origin::Default, overrides: None });
            }
        }
        Ok(Resolved { command: command.into(), keys, settings, config_path })
    }

    pub fn set(&mut self, key: &str, value: String, origin: Origin) {
        self.settings.insert(key.into(), Setting { value, origin, overrides: None });
    }

    pub fn has(&self, key: &str) -> bool {
        self.settings.contains_key(key)
    }

    pub fn setting(&self, key: &str) -> Result<&Setting, CliError> {
        self.settings.get(key).ok_or_else(|| CliError::input(format!("missing required key '{key}' (flag --{key})")))
    }

    pub fn str(&self, key: &str) -> Result<&str, CliError> {
        Ok(&self.setting(key)?.value)
    }

    pub fn opt_str(&self, key: &str) -> Option<&str> {
        self.settings.get(key).map(|s| s.value.as_str())
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: fmt::Display,
    {
        let s = self.setting(key)?;
        s.value.parse::<T>().map_err(|e| bad_value(key, s, e))
    }

    pub fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: fmt::Display,
    {
        if self.has(key) {
            self.parse(key).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, CliError>
    where
        T::Err: fmt::Display,
    {
        let s = self.setting(key)?;
        let out = s
            .value
            .split(',')
            .map(|part| part.trim().parse::<T>().map_err(|e| bad_value(key, s, e)))
            .collect::<Result<Vec<T>, _>>()?;
        if out.is_empty() {
            return Err(bad_value(key, s, "empty list"));
        }
        Ok(out)
    }

    /// A profile expression; parse positions are mapped into the source.
    pub fn profile(&self, key: &str) -> Result<Profile, CliError> {
        let s = self.setting(key)?;
        profile_from(&s.value, key, s)
    }

    /// Echo of the resolved config with one provenance comment per line.
    pub fn echo(&self) -> String {
        let mut out = format!("# resolved configuration for `{}`\n", self.command);
        if let Some(p) = &self.config_path {
            out.push_str(&format!("# config file: {}\n", p.display()));
        }
        for k in &self.keys {
            let Some(s) = self.settings.get(k.name) else { continue };
            let mut note = s.origin.to_string();
            if let Some(o) = &s.overrides {
                note.push_str(&format!(", overrides {o}"));
            }
            out.push_str(&format!("{} = {}  # {note}\n", k.name, s.value));
        }
        out
    }
}

pub fn profile_from(text: &str, key: &str, s: &Setting) -> Result<Profile, CliError> {
    Profile::parse(text).map_err(|e| match e {
        CoreError::Parse { pos, msg } => {
            let origin = match &s.origin {
                Origin::File { path, line, col } => Origin::File { path: path.clone(), line: *line, col: col + pos - 1 },
                o => o.clone(),
            };
            CliError::Input { message: format!("{key}: {msg}"), origin: Some(origin), position: Some(pos) }
        }
        other => CliError::from(other),
    })
}

fn bad_value(key: &str, s: &Setting, e: impl fmt::Display) -> CliError {
    CliError::input_at(format!("invalid value '{}' for {key}: {e}", s.value), s.origin.clone())
}
