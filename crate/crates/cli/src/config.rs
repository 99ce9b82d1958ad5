//! Run configuration: a TOML file plus `--set key=value` overrides, parsed
//! strictly (unknown keys are errors).

use std::path::{Path, PathBuf};

use gsqg_core::contour::{Domain, ShapeSpec};
use gsqg_core::multiplier::MultiplierKind;
use gsqg_core::scenario::ScenarioConfig;
use gsqg_core::velocity::RegionSet;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: Option<PathBuf>,
    pub multiplier: Option<MultiplierKind>,
    pub kernel: Option<KernelSpec>,
    pub geometry: Option<GeometrySpec>,
    pub integrator: Option<IntegratorSpec>,
    pub probe: Option<ProbeSpec>,
    pub scenario: Option<ScenarioConfig>,
    pub check: Option<CheckSpec>,
    pub bounds: Option<BoundsSpec>,
    pub pi_scan: Option<PiScanSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelSource {
    /// closed form when the multiplier has one, quadrature table otherwise
    Auto,
    ClosedForm,
    Quadrature,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelSpec {
    pub source: KernelSource,
    pub rho_min: f64,
    pub rho_max: f64,
    pub points: usize,
    pub tol: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec { source: KernelSource::Auto, rho_min: 1e-8, rho_max: 10.0, points: 121, tol: 1e-8 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchSpec {
    pub shape: ShapeSpec,
    #[serde(default = "one")]
    pub strength: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Ω₀ and its mirror from the [scenario] section
    ScenarioOmega0,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    #[serde(default = "whole_plane")]
    pub domain: Domain,
    #[serde(default = "default_m")]
    pub m: usize,
    /// add the reflection x₁ → −x₁ of every patch with opposite strength
    #[serde(default)]
    pub mirror: bool,
    #[serde(default)]
    pub patches: Vec<PatchSpec>,
    pub preset: Option<Preset>,
}

fn whole_plane() -> Domain {
    Domain::WholePlane
}

fn default_m() -> usize {
    256
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSpec {
    /// largest step; the CFL limit caps it further
    pub dt: f64,
    pub cfl_factor: f64,
    pub t_end: f64,
    pub output_every: usize,
    pub reparam_every: usize,
    /// reparametrize off-cadence once the residual exceeds this
    pub reparam_residual: f64,
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        IntegratorSpec {
            dt: 1e-3,
            cfl_factor: 0.5,
            t_end: 1.0,
            output_every: 10,
            reparam_every: 16,
            reparam_residual: gsqg_core::contour::REPARAM_RESIDUAL,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    #[serde(default = "half_plane")]
    pub domain: Domain,
    pub region: RegionSet,
    pub points: Vec<[f64; 2]>,
    #[serde(default = "probe_tol")]
    pub tol: f64,
}

fn half_plane() -> Domain {
    Domain::HalfPlane
}

fn probe_tol() -> f64 {
    1e-10
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckSpec {
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_points: usize,
    pub osgood_lower: f64,
    pub osgood_cap: f64,
}

impl Default for CheckSpec {
    fn default() -> Self {
        CheckSpec { grid_min: 1e-3, grid_max: 1e8, grid_points: 67, osgood_lower: 2.0, osgood_cap: 1e12 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsSpec {
    /// probes per wedge
    pub probes: usize,
    /// start of the audited probe sequence; the fit always uses offset 0
    pub offset: usize,
    /// density for the audit; defaults to the unit square block
    pub theta: Option<RegionSet>,
}

impl Default for BoundsSpec {
    fn default() -> Self {
        BoundsSpec { probes: 50, offset: 1000, theta: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PiScanSpec {
    pub points: usize,
}

impl Default for PiScanSpec {
    fn default() -> Self {
        PiScanSpec { points: 64 }
    }
}

/// The parsed configuration and the canonical text it was built from.
pub struct Loaded {
    pub config: RunConfig,
    pub canonical: String,
    pub sha256: String,
}

fn top_level_key(k: &str) -> bool {
    matches!(
        k,
        "output_dir" | "multiplier" | "kernel" | "geometry" | "integrator" | "probe" | "scenario" | "check" | "bounds" | "pi_scan"
    )
}

fn parse_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap(),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Applies `key=value`. Dotted keys address nested tables; a bare key that
/// is not a top-level entry belongs to [scenario].
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), String> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| format!("override `{spec}` is not key=value"))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(format!("override `{spec}` has an empty key"));
    }
    let path: Vec<&str> = if key.contains('.') || top_level_key(key) {
        key.split('.').collect()
    } else {
        vec!["scenario", key]
    };
    let mut cur = table;
    for part in &path[..path.len() - 1] {
        let entry = cur.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| format!("override `{key}`: `{part}` is not a table"))?;
    }
    cur.insert(path[path.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

/// Serde accepts stray keys next to a unit variant such as `euler`, so
/// compare the input keys with what the parsed value serializes to.
fn check_multiplier_keys(raw: Option<&toml::Value>, parsed: Option<&MultiplierKind>) -> Result<(), String> {
    let (Some(toml::Value::Table(raw)), Some(parsed)) = (raw, parsed) else { return Ok(()) };
    let back = toml::Value::try_from(parsed).map_err(|e| e.to_string())?;
    let known = back.as_table().map(|t| t.keys().cloned().collect::<Vec<_>>()).unwrap_or_default();
    match raw.keys().find(|k| !known.contains(k)) {
        Some(k) => Err(format!("unknown field `{k}` for multiplier kind `{}`", raw["kind"].as_str().unwrap_or("?"))),
        None => Ok(()),
    }
}

pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Loaded, String> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?;
            text.parse::<toml::Table>().map_err(|e| format!("{}: {}", p.display(), e.message()))?
        }
        None => toml::Table::new(),
    };
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let canonical = toml::to_string(&table).map_err(|e| e.to_string())?;
    let raw_multiplier = table.get("multiplier").cloned();
    let config: RunConfig = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| e.message().to_string())?;
    check_multiplier_keys(raw_multiplier.as_ref(), config.multiplier.as_ref())?;
    let sha256 = hex::encode(Sha256::digest(canonical.as_bytes()));
    Ok(Loaded { config, canonical, sha256 })
}
