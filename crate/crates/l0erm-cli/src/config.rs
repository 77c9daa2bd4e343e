//! Experiment configuration files: TOML mirroring
//! [`l0erm::experiment::ExperimentConfig`], with the generator section
//! reduced to `variant` and `p` — the variant's canonical slope, noise
//! scale, and correlation are filled in unless the file overrides them.
//!
//! ```toml
//! n_train = 100
//! n_valid = 5000
//! repetitions = 100
//! seed = 7
//! methods = ["l0erm", "lasso_opt", "lasso_1se"]
//!
//! [dgp]
//! variant = "i"
//! p = 10
//!
//! [tuning]
//! rule = "heuristic"
//! ```
//!
//! Top-level keys must precede the `[dgp]` table — TOML scopes keys to
//! the most recent header — and misplaced keys are rejected loudly.

use std::path::Path;

use l0erm::dgp::{DgpSpec, DgpVariant};
use l0erm::experiment::ExperimentConfig;

use crate::CliError;

pub fn load_experiment_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_experiment_config(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn parse_experiment_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let mut value: toml::Value =
        toml::from_str(text).map_err(|e| CliError::Usage(e.to_string()))?;
    fill_dgp_defaults(&mut value);
    let config: ExperimentConfig = value
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Usage(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Insert the variant's canonical parameters for any the file omits.
/// Malformed sections are left alone for deserialization to name.
fn fill_dgp_defaults(root: &mut toml::Value) {
    let Some(dgp) = root.get_mut("dgp").and_then(|d| d.as_table_mut()) else {
        return;
    };
    let Some(variant) = dgp.get("variant").and_then(|v| v.as_str()) else {
        return;
    };
    let Some(p) = dgp.get("p").and_then(|v| v.as_integer()) else {
        return;
    };
    let Ok(p) = usize::try_from(p) else { return };
    let spec = match variant {
        "i" => DgpSpec::variant_i(p),
        "ii" => DgpSpec::variant_ii(p),
        _ => return,
    };
    debug_assert!(matches!(spec.variant, DgpVariant::I | DgpVariant::Ii));
    for (key, default) in [
        ("theta2_star", spec.theta2_star),
        ("base_scale", spec.base_scale),
        ("covariance_rho", spec.covariance_rho),
    ] {
        dgp.entry(key).or_insert(toml::Value::Float(default));
    }
}
