//! Scenario files: MHz/ns/degree configuration, presets, overrides and the
//! mapping onto [`SystemConfig`].

mod presets;
mod run;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::atom::{rb87_d2_scheme, three_level_lambda, Rb87Options, ThreeLevelOptions};
use crate::dynamics::{PulseProfile, PulseShape, SolverOptions, SystemConfig};
use crate::error::{Error, Result};
use crate::polarization::{AtomicPolarization, EigenmodeOrientation};
use crate::MHZ;

pub use presets::{preset, preset_names, DEFAULT_PRESET};
pub use run::{run, run_sweep, RunManifest, RunOutcome, RunSummary, SweepOutcome, SweepRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub system: SystemSpec,
    pub solver: SolverSpec,
    pub outputs: OutputSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

/// Where the eigenmode pair sits relative to Raman resonance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CavityTuning {
    /// Eigenmodes at ±Δ_P/2 around resonance.
    Centered,
    /// Eigenmode X on resonance.
    XOnResonance,
    /// Eigenmode Y on resonance.
    YOnResonance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub g_mhz: f64,
    pub kappa_mhz: f64,
    pub gamma_mhz: f64,
    pub delta_p_mhz: f64,
    pub omega_l_mhz: f64,
    pub cavity_tuning: CavityTuning,
    /// Extra shift of both eigenmodes on top of `cavity_tuning`.
    pub cavity_center_detuning_mhz: f64,
    pub fock_truncation: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_level: Option<String>,
    pub orientation: OrientationSpec,
    pub pulse: PulseSpec,
    pub scheme: SchemeSpec,
}

/// Cavity→lab eigenmode orientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrientationSpec {
    pub alpha: f64,
    pub phi1_deg: f64,
    pub phi2_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSpec {
    pub peak_rabi_mhz: f64,
    pub duration_ns: f64,
    pub shape: PulseShape,
    pub detuning_mhz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SchemeSpec {
    ThreeLevel {
        one_photon_detuning_mhz: f64,
    },
    Rb87D2 {
        photon: AtomicPolarization,
        zeeman_splitting_mhz: f64,
        raman_offset_mhz: f64,
        dark_branching: f64,
        #[serde(default)]
        level_energies_mhz: BTreeMap<String, f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub rtol: f64,
    pub atol: f64,
    /// Simulated time after the pulse ends (ns).
    pub tail_ns: f64,
    /// Minimum samples per Δ_P beat period.
    pub samples_per_beat: usize,
    pub min_samples: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            tail_ns: 500.0,
            samples_per_beat: 40,
            min_samples: 801,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisBasis {
    /// H/V.
    Linear,
    /// +/−.
    Circular,
    /// D/A.
    Diagonal,
    /// Cavity eigenmodes X/Y.
    Cavity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoutingSpec {
    pub start_deg: f64,
    pub stop_deg: f64,
    pub step_deg: f64,
    /// Also compute the curve with birefringence removed.
    pub compare_without_birefringence: bool,
}

impl RoutingSpec {
    pub fn angles(&self) -> Vec<f64> {
        let n = ((self.stop_deg - self.start_deg) / self.step_deg + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.start_deg + self.step_deg * i as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Analyser wavepackets at these QWP angles (degrees).
    pub qwp_angles_deg: Vec<f64>,
    /// Time-resolved flux in these polarisation bases.
    pub bases: Vec<AnalysisBasis>,
    /// Extract the beat frequency in this basis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oscillation_basis: Option<AnalysisBasis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub routing: Option<RoutingSpec>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            qwp_angles_deg: Vec::new(),
            bases: vec![AnalysisBasis::Linear, AnalysisBasis::Circular],
            oscillation_basis: None,
            routing: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Dotted path of a numeric field, e.g. `system.delta_p_mhz`.
    pub parameter: String,
    pub values: Vec<f64>,
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be positive, got {v}")))
    }
}

fn non_negative(path: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be non-negative, got {v}")))
    }
}

fn finite(path: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be finite, got {v}")))
    }
}

impl Scenario {
    /// Field-level checks, reported by dotted path.
    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::config("name", "must not be empty"));
        }
        let s = &self.system;
        non_negative("system.g_mhz", s.g_mhz)?;
        non_negative("system.kappa_mhz", s.kappa_mhz)?;
        non_negative("system.gamma_mhz", s.gamma_mhz)?;
        finite("system.delta_p_mhz", s.delta_p_mhz)?;
        finite("system.omega_l_mhz", s.omega_l_mhz)?;
        finite("system.cavity_center_detuning_mhz", s.cavity_center_detuning_mhz)?;
        if s.fock_truncation < 2 {
            return Err(Error::config("system.fock_truncation", "must be at least 2"));
        }
        if !(0.0..=1.0).contains(&s.orientation.alpha) {
            return Err(Error::config(
                "system.orientation.alpha",
                format!("must lie in [0, 1], got {}", s.orientation.alpha),
            ));
        }
        finite("system.orientation.phi1_deg", s.orientation.phi1_deg)?;
        finite("system.orientation.phi2_deg", s.orientation.phi2_deg)?;
        finite("system.pulse.peak_rabi_mhz", s.pulse.peak_rabi_mhz)?;
        positive("system.pulse.duration_ns", s.pulse.duration_ns)?;
        finite("system.pulse.detuning_mhz", s.pulse.detuning_mhz)?;
        match &s.scheme {
            SchemeSpec::ThreeLevel {
                one_photon_detuning_mhz,
            } => finite("system.scheme.one_photon_detuning_mhz", *one_photon_detuning_mhz)?,
            SchemeSpec::Rb87D2 {
                zeeman_splitting_mhz,
                raman_offset_mhz,
                dark_branching,
                level_energies_mhz,
                ..
            } => {
                non_negative("system.scheme.zeeman_splitting_mhz", *zeeman_splitting_mhz)?;
                finite("system.scheme.raman_offset_mhz", *raman_offset_mhz)?;
                if !(0.0..=1.0).contains(dark_branching) {
                    return Err(Error::config(
                        "system.scheme.dark_branching",
                        format!("must lie in [0, 1], got {dark_branching}"),
                    ));
                }
                for (k, v) in level_energies_mhz {
                    finite(&format!("system.scheme.level_energies_mhz.{k}"), *v)?;
                }
            }
        }
        let sv = &self.solver;
        positive("solver.rtol", sv.rtol)?;
        positive("solver.atol", sv.atol)?;
        non_negative("solver.tail_ns", sv.tail_ns)?;
        if sv.samples_per_beat < 4 {
            return Err(Error::config("solver.samples_per_beat", "must be at least 4"));
        }
        if sv.min_samples < 3 {
            return Err(Error::config("solver.min_samples", "must be at least 3"));
        }
        for (i, a) in self.outputs.qwp_angles_deg.iter().enumerate() {
            finite(&format!("outputs.qwp_angles_deg[{i}]"), *a)?;
        }
        if let Some(r) = &self.outputs.routing {
            finite("outputs.routing.start_deg", r.start_deg)?;
            finite("outputs.routing.stop_deg", r.stop_deg)?;
            positive("outputs.routing.step_deg", r.step_deg)?;
            if r.stop_deg < r.start_deg {
                return Err(Error::config("outputs.routing.stop_deg", "must not be below start_deg"));
            }
        }
        if let Some(sw) = &self.sweep {
            if sw.values.is_empty() {
                return Err(Error::config("sweep.values", "must not be empty"));
            }
            for (i, v) in sw.values.iter().enumerate() {
                finite(&format!("sweep.values[{i}]"), *v)?;
            }
            let base = toml::Value::try_from(self).map_err(|e| Error::config("sweep", e.to_string()))?;
            match lookup(&base, &sw.parameter) {
                Some(toml::Value::Float(_)) | Some(toml::Value::Integer(_)) | Some(toml::Value::Array(_)) => {}
                Some(_) => return Err(Error::config("sweep.parameter", format!("`{}` is not numeric", sw.parameter))),
                None => {
                    return Err(Error::config(
                        "sweep.parameter",
                        format!("`{}` does not name a field", sw.parameter),
                    ))
                }
            }
        }
        // scheme-level consistency (levels, strengths) surfaces here
        self.system_config().map(|_| ())
    }

    pub fn orientation(&self) -> Result<EigenmodeOrientation> {
        let o = &self.system.orientation;
        EigenmodeOrientation::from_degrees(o.alpha, o.phi1_deg, o.phi2_deg)
            .map_err(|e| Error::config("system.orientation", e.to_string()))
    }

    /// Internal (rad/s, s) configuration.
    pub fn system_config(&self) -> Result<SystemConfig> {
        let s = &self.system;
        let gamma = s.gamma_mhz * MHZ;
        let scheme = match &s.scheme {
            SchemeSpec::ThreeLevel {
                one_photon_detuning_mhz,
            } => three_level_lambda(ThreeLevelOptions {
                one_photon_detuning: one_photon_detuning_mhz * MHZ,
                gamma,
            }),
            SchemeSpec::Rb87D2 {
                photon,
                zeeman_splitting_mhz,
                raman_offset_mhz,
                dark_branching,
                level_energies_mhz,
            } => rb87_d2_scheme(&Rb87Options {
                zeeman_ground_splitting: zeeman_splitting_mhz * MHZ,
                excited_shifts: level_energies_mhz.iter().map(|(k, v)| (k.clone(), v * MHZ)).collect(),
                raman_offset: raman_offset_mhz * MHZ,
                gamma,
                dark_branching: *dark_branching,
                photon: *photon,
            }),
        }
        .map_err(|e| Error::config("system.scheme", e.to_string()))?;
        let scheme = match &s.initial_level {
            Some(l) => scheme
                .with_initial_level(l)
                .map_err(|e| Error::config("system.initial_level", e.to_string()))?,
            None => scheme,
        };
        let delta_p = s.delta_p_mhz * MHZ;
        let placement = match s.cavity_tuning {
            CavityTuning::Centered => 0.0,
            CavityTuning::XOnResonance => -delta_p / 2.0,
            CavityTuning::YOnResonance => delta_p / 2.0,
        };
        let cfg = SystemConfig {
            g: s.g_mhz * MHZ,
            kappa: s.kappa_mhz * MHZ,
            gamma,
            delta_p,
            omega_l: s.omega_l_mhz * MHZ,
            cavity_orientation: self.orientation()?,
            cavity_center_detuning: placement + s.cavity_center_detuning_mhz * MHZ,
            pulse: PulseProfile {
                peak_rabi: s.pulse.peak_rabi_mhz * MHZ,
                duration: s.pulse.duration_ns * 1e-9,
                shape: s.pulse.shape,
                detuning: s.pulse.detuning_mhz * MHZ,
            },
            scheme,
            fock_truncation: s.fock_truncation,
        };
        cfg.validate().map_err(|e| Error::config("system", e.to_string()))?;
        Ok(cfg)
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            rtol: self.solver.rtol,
            atol: self.solver.atol,
            ..SolverOptions::default()
        }
    }

    /// Sample grid over the pulse plus the configured tail.
    pub fn time_grid(&self) -> Vec<f64> {
        let span = (self.system.pulse.duration_ns + self.solver.tail_ns) * 1e-9;
        let n = crate::dynamics::samples_for(
            span,
            self.system.delta_p_mhz * MHZ,
            self.solver.samples_per_beat,
            self.solver.min_samples,
        );
        crate::dynamics::sample_grid(0.0, span, n)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("", e.to_string()))
    }

    /// SHA-256 of the canonical TOML serialisation.
    pub fn config_hash(&self) -> Result<String> {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    /// Copy with the dotted `path` set to `value`. An array target becomes `[value]`.
    pub fn with_parameter(&self, path: &str, value: f64) -> Result<Scenario> {
        let mut v = toml::Value::try_from(self).map_err(|e| Error::config(path, e.to_string()))?;
        let slot = lookup_mut(&mut v, path).ok_or_else(|| Error::config(path, "no such field"))?;
        *slot = match slot {
            toml::Value::Integer(_) if value.fract() == 0.0 => toml::Value::Integer(value as i64),
            toml::Value::Integer(_) => return Err(Error::config(path, format!("expects an integer, got {value}"))),
            toml::Value::Float(_) => toml::Value::Float(value),
            toml::Value::Array(_) => toml::Value::Array(vec![toml::Value::Float(value)]),
            _ => return Err(Error::config(path, "is not numeric")),
        };
        let mut out = from_value(v)?;
        out.sweep = None;
        out.validate()?;
        Ok(out)
    }
}

fn lookup<'a>(v: &'a toml::Value, path: &str) -> Option<&'a toml::Value> {
    path.split('.').try_fold(v, |cur, key| cur.as_table()?.get(key))
}

fn lookup_mut<'a>(v: &'a mut toml::Value, path: &str) -> Option<&'a mut toml::Value> {
    path.split('.').try_fold(v, |cur, key| cur.as_table_mut()?.get_mut(key))
}

fn from_value(v: toml::Value) -> Result<Scenario> {
    serde_path_to_error::deserialize::<_, Scenario>(v).map_err(|e| {
        let path = e.path().to_string();
        Error::config(if path == "." { String::new() } else { path }, e.inner().to_string())
    })
}

/// Recursive table merge. A table whose `kind` changes is replaced whole.
fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            let kind_changed = matches!((b.get("kind"), o.get("kind")), (Some(x), Some(y)) if x != y);
            if kind_changed {
                *b = o;
                return;
            }
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Parses `key=value`; the value is read as a TOML literal, else as a string.
fn parse_override(s: &str) -> Result<(String, toml::Value)> {
    let (key, raw) = s
        .split_once('=')
        .ok_or_else(|| Error::config(s, "override must look like key=value"))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(Error::config(s, "override key is empty"));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

fn set_path(root: &mut toml::Value, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let leaf = parts.pop().expect("split yields at least one part");
    let mut cur = root;
    for p in parts {
        let table = cur
            .as_table_mut()
            .ok_or_else(|| Error::config(key, format!("`{p}` is not inside a table")))?;
        cur = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    let table = cur
        .as_table_mut()
        .ok_or_else(|| Error::config(key, "parent is not a table"))?;
    table.insert(leaf.to_string(), value);
    Ok(())
}

/// Resolves a scenario from a preset, an optional TOML document and
/// `key=value` overrides, in that order. A top-level `preset` key in the
/// document picks the base preset unless `preset` is given.
pub fn parse_scenario(text: Option<&str>, preset_name: Option<&str>, overrides: &[String]) -> Result<Scenario> {
    let mut user = match text {
        Some(t) => toml::from_str::<toml::Table>(t).map_err(|e| Error::config("", e.to_string()))?,
        None => toml::Table::new(),
    };
    let file_preset = match user.remove("preset") {
        Some(toml::Value::String(s)) => Some(s),
        Some(_) => return Err(Error::config("preset", "must be a string")),
        None => None,
    };
    let name = preset_name.map(str::to_string).or(file_preset).unwrap_or_else(|| DEFAULT_PRESET.into());
    let base = preset(&name).ok_or_else(|| {
        Error::config(
            "preset",
            format!("unknown preset `{name}`; available: {}", preset_names().join(", ")),
        )
    })?;
    let mut value = toml::Value::try_from(&base).map_err(|e| Error::config("", e.to_string()))?;
    merge(&mut value, toml::Value::Table(user));
    for o in overrides {
        let (k, v) = parse_override(o)?;
        let mut patch = toml::Value::Table(toml::Table::new());
        set_path(&mut patch, &k, v)?;
        merge(&mut value, patch);
    }
    let scenario = from_value(value)?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn load_config(path: Option<&Path>, preset_name: Option<&str>, overrides: &[String]) -> Result<Scenario> {
    let text = match path {
        Some(p) => Some(std::fs::read_to_string(p).map_err(|e| Error::config(p.display().to_string(), e.to_string()))?),
        None => None,
    };
    parse_scenario(text.as_deref(), preset_name, overrides)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_the_experimental_defaults() {
        let s = parse_scenario(Some(""), None, &[]).unwrap();
        assert_eq!(s.system.g_mhz, 4.77);
        assert_eq!(s.system.kappa_mhz, 1.77);
        assert_eq!(s.system.gamma_mhz, 3.03);
        assert_eq!(s.system.delta_p_mhz, 3.471);
        assert_eq!(
            s.system.orientation,
            OrientationSpec {
                alpha: 0.888,
                phi1_deg: 115.1,
                phi2_deg: -40.1
            }
        );
    }

    #[test]
    fn negative_kappa_names_the_field() {
        let err = parse_scenario(Some("[system]\nkappa_mhz = -1.0\n"), None, &[]).unwrap_err();
        match err {
            Error::Config { path, .. } => assert_eq!(path, "system.kappa_mhz"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_path() {
        let err = parse_scenario(Some("[system]\nkapa_mhz = 1.0\n"), None, &[]).unwrap_err();
        assert!(err.is_config_error());
        assert!(err.to_string().contains("kapa_mhz"), "{err}");
        let err = parse_scenario(None, None, &["system.pulse.bogus=1".into()]).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn overrides_and_scheme_switch() {
        let s = parse_scenario(
            None,
            Some("experiment"),
            &["system.delta_p_mhz=4".into(), "system.pulse.shape=sin4_amplitude".into()],
        )
        .unwrap();
        assert_eq!(s.system.delta_p_mhz, 4.0);
        assert_eq!(s.system.pulse.shape, PulseShape::Sin4Amplitude);
        let doc = "[system.scheme]\nkind = \"three_level\"\none_photon_detuning_mhz = 0.0\n";
        let s = parse_scenario(Some(doc), None, &["system.gamma_mhz=0".into()]).unwrap();
        assert!(matches!(s.system.scheme, SchemeSpec::ThreeLevel { .. }));
    }

    #[test]
    fn round_trip_is_idempotent() {
        for name in preset_names() {
            let s = preset(name).unwrap();
            let text = s.to_toml().unwrap();
            let back = parse_scenario(Some(&text), Some(name), &[]).unwrap();
            assert_eq!(back, s, "{name}");
            assert_eq!(back.to_toml().unwrap(), text);
            assert_eq!(back.config_hash().unwrap(), s.config_hash().unwrap());
        }
    }

    #[test]
    fn fig4a_20mhz_preset() {
        let s = parse_scenario(None, Some("fig4a_20MHz"), &[]).unwrap();
        assert!(matches!(s.system.scheme, SchemeSpec::ThreeLevel { .. }));
        assert_eq!(s.system.delta_p_mhz, 20.0);
        assert_eq!(s.system.pulse.peak_rabi_mhz, 2.0);
        assert_eq!(s.system.pulse.duration_ns, 1000.0);
        assert_eq!(s.system.orientation.alpha, 1.0);
    }

    #[test]
    fn with_parameter_targets_numbers_and_arrays() {
        let s = preset("fig3").unwrap();
        let t = s.with_parameter("system.delta_p_mhz", 7.0).unwrap();
        assert_eq!(t.system.delta_p_mhz, 7.0);
        let t = s.with_parameter("outputs.qwp_angles_deg", 10.0).unwrap();
        assert_eq!(t.outputs.qwp_angles_deg, vec![10.0]);
        assert!(s.with_parameter("system.nope", 1.0).is_err());
        assert!(s.with_parameter("system.fock_truncation", 2.5).is_err());
    }
}
