//! Config loading, built-in files and output formatting.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::{build_system, DeviceConfig, SystemModel};
use crate::protocol::{DeviceRef, Scenario};

/// Devices shipped with the crate, addressable by name.
pub const BUILTIN_DEVICES: &[(&str, &str)] = &[
    ("device_table_s1", include_str!("../scenarios/device_table_s1.toml")),
    ("device_protocol", include_str!("../scenarios/device_protocol.toml")),
];

/// Scenarios shipped with the crate, addressable by name.
pub const BUILTIN_SCENARIOS: &[(&str, &str)] = &[
    ("full_reset_83ns", include_str!("../scenarios/full_reset_83ns.json")),
    ("chevron_qc", include_str!("../scenarios/chevron_qc.json")),
    ("qc_adiabatic_benchmark", include_str!("../scenarios/qc_adiabatic_benchmark.json")),
];

/// Floats in artifacts: 17 significant digits, round-trip exact.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x:.16e}")
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|source| Error::Io {
                path: dir.display().to_string(),
                source,
            })?;
        }
    }
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_device(text: &str, origin: &str, toml: bool) -> Result<DeviceConfig> {
    let parsed = if toml {
        DeviceConfig::from_toml(text)
    } else {
        DeviceConfig::from_json(text)
    };
    parsed.map_err(|message| Error::Config {
        path: origin.to_string(),
        message,
    })
}

/// Reads a JSON or TOML (by extension) device description.
pub fn read_device_config(path: &Path) -> Result<DeviceConfig> {
    let text = read_text(path)?;
    let toml = path.extension().map_or(false, |e| e.eq_ignore_ascii_case("toml"));
    parse_device(&text, &path.display().to_string(), toml)
}

/// Loads and validates a device file.
pub fn load_device_config(path: &Path) -> Result<SystemModel> {
    let config = read_device_config(path)?;
    build_system(&config).map_err(|e| Error::Config {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Device by built-in name or file path; relative paths resolve against
/// `base` when given.
pub fn resolve_device_name(name: &str, base: Option<&Path>) -> Result<(DeviceConfig, String)> {
    if let Some((_, text)) = BUILTIN_DEVICES.iter().find(|(n, _)| *n == name) {
        return Ok((parse_device(text, name, true)?, format!("builtin:{name}")));
    }
    let mut path = PathBuf::from(name);
    if path.is_relative() {
        if let Some(b) = base {
            let candidate = b.join(&path);
            if candidate.exists() {
                path = candidate;
            }
        }
    }
    Ok((read_device_config(&path)?, path.display().to_string()))
}

pub fn resolve_device(device: &DeviceRef, base: Option<&Path>) -> Result<(DeviceConfig, String)> {
    match device {
        DeviceRef::Named(name) => resolve_device_name(name, base),
        DeviceRef::Inline(cfg) => Ok((cfg.clone(), "inline".to_string())),
    }
}

/// Scenario by built-in name or file path. Returns the scenario and the
/// directory relative device paths resolve against.
pub fn load_scenario(name: &str) -> Result<(Scenario, Option<PathBuf>, String)> {
    if let Some((_, text)) = BUILTIN_SCENARIOS.iter().find(|(n, _)| *n == name) {
        let s = serde_json::from_str(text).map_err(|e| Error::Config {
            path: name.to_string(),
            message: e.to_string(),
        })?;
        return Ok((s, None, format!("builtin:{name}")));
    }
    let path = Path::new(name);
    let text = read_text(path)?;
    let s = serde_json::from_str(&text).map_err(|e| Error::Config {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok((s, path.parent().map(Path::to_path_buf), path.display().to_string()))
}

/// Built-in scenario text, for embedding and tests.
pub fn builtin_scenario(name: &str) -> Option<&'static str> {
    BUILTIN_SCENARIOS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-12, 5.176] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(f64::NAN), "NaN");
    }

    #[test]
    fn builtin_devices_parse() {
        for (name, _) in BUILTIN_DEVICES {
            let (cfg, _) = resolve_device_name(name, None).unwrap();
            build_system(&cfg).unwrap();
        }
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_device_config(Path::new("/nonexistent/dev.toml")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dev.toml"));
    }
}
