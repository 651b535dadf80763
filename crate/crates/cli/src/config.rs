use std::fmt;
use std::path::{Path, PathBuf};

use toml::{Table, Value};
use xychain::model::RangeMode;
use xychain::scenarios::{ScenarioConfig, ScenarioKind};

/// A problem with the command line or the configuration file.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<xychain::Error> for ConfigError {
    fn from(e: xychain::Error) -> Self {
        ConfigError(e.to_string())
    }
}

/// Settings given on the command line; they take precedence over the file.
#[derive(Debug, Default)]
pub struct Overrides {
    pub scenario: Option<ScenarioKind>,
    pub ideal: bool,
    pub range: Option<RangeMode>,
    pub seed: Option<u64>,
    /// `key.path=value` pairs.
    pub set: Vec<String>,
}

#[derive(Debug)]
pub struct Resolved {
    pub config: ScenarioConfig,
    pub source: Option<PathBuf>,
}

struct FileLayer {
    table: Table,
    /// Error of parsing the file on its own; it carries line and column,
    /// but may only complain about fields the defaults fill in.
    typed_error: Option<String>,
}

fn read_file(path: &Path) -> Result<FileLayer, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    let table = toml::from_str::<Table>(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    let typed_error = toml::from_str::<ScenarioConfig>(&text).err().map(|e| format!("{}: {e}", path.display()));
    Ok(FileLayer { table, typed_error })
}

fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Parses `raw` as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_owned()))
}

fn set_path(root: &mut Table, path: &str, value: Value) -> Result<(), ConfigError> {
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.trim().is_empty()) {
        return Err(ConfigError(format!("malformed override key {path:?}")));
    }
    let (last, parents) = keys.split_last().expect("split yields at least one key");
    let mut table = root;
    for k in parents {
        let entry = table.entry(k.to_string()).or_insert_with(|| Value::Table(Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError(format!("override {path:?}: {k:?} is not a table")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

fn range_name(r: RangeMode) -> &'static str {
    match r {
        RangeMode::Full => "full",
        RangeMode::NearestNeighbor => "nearest_neighbor",
    }
}

/// Defaults, then the file, then `--set`, then the dedicated flags.
pub fn resolve(file: Option<&Path>, overrides: &Overrides) -> Result<Resolved, ConfigError> {
    let mut root = Table::try_from(ScenarioConfig::default()).expect("defaults serialize");
    let mut file_error = None;
    if let Some(p) = file {
        let layer = read_file(p)?;
        merge(&mut root, layer.table);
        file_error = layer.typed_error;
    }
    for item in &overrides.set {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("override {item:?} must have the form key.path=value")))?;
        set_path(&mut root, key.trim(), parse_value(raw.trim()))?;
    }
    if let Some(kind) = overrides.scenario {
        root.insert("scenario".into(), Value::String(kind.name().into()));
    }
    if let Some(seed) = overrides.seed {
        let seed = i64::try_from(seed).map_err(|_| ConfigError(format!("seed {seed} exceeds the TOML integer range")))?;
        root.insert("seed".into(), Value::Integer(seed));
    }

    let kind = match root.get("scenario") {
        Some(Value::String(s)) => Some(s.parse::<ScenarioKind>()?),
        Some(other) => return Err(ConfigError(format!("scenario must be a string, got {other}"))),
        None => None,
    };
    if overrides.ideal || overrides.range.is_some() {
        let kind = kind.ok_or_else(|| ConfigError("--ideal and --range need a scenario".into()))?;
        if overrides.ideal {
            if !kind.has_ideal_mode() {
                return Err(ConfigError(format!("scenario {kind} has no ideal mode")));
            }
            set_path(&mut root, &format!("{}.ideal", kind.section()), Value::Boolean(true))?;
        }
        if let Some(r) = overrides.range {
            if !kind.has_range() {
                return Err(ConfigError(format!("scenario {kind} has no range setting")));
            }
            set_path(&mut root, &format!("{}.range", kind.section()), Value::String(range_name(r).into()))?;
        }
    }

    let config: ScenarioConfig = Value::Table(root)
        .try_into()
        .map_err(|e: toml::de::Error| {
            ConfigError(file_error.unwrap_or_else(|| format!("invalid configuration after overrides: {}", e.message())))
        })?;
    config.validate()?;
    Ok(Resolved { config, source: file.map(Path::to_path_buf) })
}
