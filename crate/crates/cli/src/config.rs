//! Experiment configuration: a single structured-text (TOML) file with
//! `system`, `control`, `coder`, `sim`, `sweep` and `output` blocks.
//!
//! Unknown keys are rejected everywhere, so a config file documents exactly
//! the experiment that ran. `--set block.key=value` overrides individual
//! entries after parsing; the default configuration reproduces the reference
//! Chua experiment, with the coder range floored at `M_inf = 1e-6` so the
//! quantizer stays effective over arbitrarily long horizons.

use crate::CliError;
use ratesync_core::codec::CoderConfig;
use ratesync_core::lurie::{LurieSystem, Nonlinearity};
use ratesync_core::sim::SimConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemBlock,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub control: Option<ControlBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coder: Option<CoderBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputBlock>,
}

/// Either Chua parameters `(p, q)` or explicit matrices `(a, b, c)`; the
/// piecewise-linear nonlinearity slopes apply to both spellings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    pub m0: f64,
    pub m1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlBlock {
    #[serde(rename = "K")]
    pub gain: f64,
    pub eta: f64,
    /// Defaults to `eta / 2` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_prime: Option<f64>,
    /// Envelope seed; defaults to `sqrt(e0' P e0 / 2)` from the sim block's
    /// initial condition.
    #[serde(rename = "W0", skip_serializing_if = "Option::is_none")]
    pub w0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoderBlock {
    #[serde(rename = "M0")]
    pub m0: f64,
    /// Fixed decay factor; mutually exclusive with `rho_rule`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    /// The only supported rule is `"exp(-eta*Ts)"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_rule: Option<String>,
    #[serde(rename = "M_inf", default)]
    pub m_inf: f64,
    #[serde(rename = "Ts")]
    pub ts: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimBlock {
    pub x0: Vec<f64>,
    pub z0: Vec<f64>,
    pub t_fin: f64,
    /// Defaults to `Ts/20`, tightened to at most 2 ms.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Defaults to one row per sampling instant.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record_stride: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub rates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub emit_svg: Option<bool>,
}

impl Default for ExperimentConfig {
    /// The reference Chua experiment: `simulate` with no arguments reproduces
    /// the R = 25 bit/s synchronization run.
    fn default() -> Self {
        ExperimentConfig {
            system: SystemBlock {
                p: Some(10.0),
                q: Some(15.6),
                m0: 0.33,
                m1: 0.945,
                a: None,
                b: None,
                c: None,
            },
            control: Some(ControlBlock {
                gain: 10.0,
                eta: 0.3,
                eta_prime: None,
                w0: None,
            }),
            coder: Some(CoderBlock {
                m0: 5.0,
                rho: None,
                rho_rule: Some("exp(-eta*Ts)".to_string()),
                m_inf: 1e-6,
                ts: 0.04,
            }),
            sim: Some(SimBlock {
                x0: vec![3.0, -1.0, 0.3],
                z0: vec![0.0, 0.0, 0.0],
                t_fin: 1000.0,
                dt: None,
                record_stride: None,
            }),
            sweep: Some(SweepBlock {
                rates: (0..17).map(|i| 10.0 + 2.5 * i as f64).collect(),
            }),
            output: Some(OutputBlock {
                dir: None,
                emit_svg: None,
            }),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String, CliError> {
        toml::to_string_pretty(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Apply `block.key=value` overrides on the TOML representation and
    /// re-validate.
    pub fn with_overrides(&self, sets: &[String]) -> Result<Self, CliError> {
        if sets.is_empty() {
            return Ok(self.clone());
        }
        let text = self.to_toml_string()?;
        let mut value: toml::Value =
            toml::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
        for set in sets {
            let (path, raw) = set.split_once('=').ok_or_else(|| {
                CliError::Config(format!("--set expects block.key=value, got `{set}`"))
            })?;
            let parsed = parse_toml_scalar(raw.trim());
            let mut cursor = &mut value;
            let segments: Vec<&str> = path.trim().split('.').collect();
            if segments.len() < 2 {
                return Err(CliError::Config(format!(
                    "--set path must name a block and a key, got `{path}`"
                )));
            }
            for seg in &segments[..segments.len() - 1] {
                let table = cursor.as_table_mut().ok_or_else(|| {
                    CliError::Config(format!("`{seg}` in `{path}` is not a table"))
                })?;
                cursor = table
                    .entry(seg.to_string())
                    .or_insert(toml::Value::Table(Default::default()));
            }
            let table = cursor.as_table_mut().ok_or_else(|| {
                CliError::Config(format!("`{path}` does not point into a table"))
            })?;
            table.insert(segments[segments.len() - 1].to_string(), parsed);
        }
        let merged: ExperimentConfig = value
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        merged.validate()?;
        Ok(merged)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let s = &self.system;
        let chua_spelling = s.p.is_some() || s.q.is_some();
        let explicit_spelling = s.a.is_some() || s.b.is_some() || s.c.is_some();
        if chua_spelling && explicit_spelling {
            return Err(CliError::Config(
                "system block must use either (p, q) or explicit (a, b, c), not both".into(),
            ));
        }
        if chua_spelling && (s.p.is_none() || s.q.is_none()) {
            return Err(CliError::Config("system block needs both p and q".into()));
        }
        if explicit_spelling && (s.a.is_none() || s.b.is_none() || s.c.is_none()) {
            return Err(CliError::Config(
                "system block needs all of a, b and c for the explicit spelling".into(),
            ));
        }
        if !chua_spelling && !explicit_spelling {
            return Err(CliError::Config(
                "system block must provide (p, q) or (a, b, c)".into(),
            ));
        }
        if let Some(coder) = &self.coder {
            match (&coder.rho, &coder.rho_rule) {
                (Some(_), Some(_)) => {
                    return Err(CliError::Config(
                        "coder block must set exactly one of rho and rho_rule, not both".into(),
                    ))
                }
                (None, None) => {
                    return Err(CliError::Config(
                        "coder block must set rho or rho_rule".into(),
                    ))
                }
                (None, Some(rule)) if rule != "exp(-eta*Ts)" => {
                    return Err(CliError::Config(format!(
                        "unknown rho_rule `{rule}`; the supported rule is \"exp(-eta*Ts)\""
                    )));
                }
                _ => {}
            }
        }
        // Re-validate the referenced core types eagerly so a bad file fails
        // at load time with a field-level message.
        self.build_system()?;
        if self.coder.is_some() && self.control.is_some() {
            self.build_coder()?;
        }
        if self.sim.is_some() && self.coder.is_some() && self.control.is_some() {
            self.build_sim_config()?;
        }
        Ok(())
    }

    pub fn build_system(&self) -> Result<LurieSystem, CliError> {
        let s = &self.system;
        let phi = Nonlinearity::piecewise_linear(s.m0, s.m1).map_err(CliError::from)?;
        if let (Some(p), Some(q)) = (s.p, s.q) {
            return LurieSystem::chua(p, q, s.m0, s.m1).map_err(CliError::from);
        }
        let a = s.a.as_ref().unwrap();
        let b = s.b.as_ref().unwrap();
        let c = s.c.as_ref().unwrap();
        let n = a.len();
        if a.iter().any(|row| row.len() != n) {
            return Err(CliError::Config("system.a must be square".into()));
        }
        let flat: Vec<f64> = a.iter().flatten().copied().collect();
        LurieSystem::new(
            nalgebra_matrix(n, &flat),
            nalgebra_vector(b),
            nalgebra_row(c),
            phi,
        )
        .map_err(CliError::from)
    }

    pub fn control(&self) -> Result<&ControlBlock, CliError> {
        self.control
            .as_ref()
            .ok_or_else(|| CliError::Config("this command needs a [control] block".into()))
    }

    pub fn coder_block(&self) -> Result<&CoderBlock, CliError> {
        self.coder
            .as_ref()
            .ok_or_else(|| CliError::Config("this command needs a [coder] block".into()))
    }

    pub fn sim_block(&self) -> Result<&SimBlock, CliError> {
        self.sim
            .as_ref()
            .ok_or_else(|| CliError::Config("this command needs a [sim] block".into()))
    }

    pub fn eta_prime(&self) -> Result<f64, CliError> {
        let control = self.control()?;
        Ok(control.eta_prime.unwrap_or(control.eta / 2.0))
    }

    /// Resolve the coder block; `rho_rule = "exp(-eta*Ts)"` needs the control
    /// block's `eta`.
    pub fn build_coder(&self) -> Result<CoderConfig, CliError> {
        let coder = self.coder_block()?;
        let rho = match (coder.rho, &coder.rho_rule) {
            (Some(rho), None) => rho,
            (None, Some(_)) => {
                let control = self.control()?;
                (-control.eta * coder.ts).exp()
            }
            _ => unreachable!("validated at load"),
        };
        CoderConfig::new(coder.m0, rho, coder.m_inf, coder.ts).map_err(CliError::from)
    }

    pub fn build_sim_config(&self) -> Result<SimConfig, CliError> {
        let sys = self.build_system()?;
        let control = self.control()?;
        let coder = self.build_coder()?;
        let sim = self.sim_block()?;
        let dt = sim.dt.unwrap_or_else(|| SimConfig::default_dt(coder.ts));
        let record_stride = sim
            .record_stride
            .unwrap_or_else(|| (coder.ts / dt).round().max(1.0) as usize);
        let cfg = SimConfig {
            sys,
            gain: control.gain,
            coder,
            x0: sim.x0.clone(),
            z0: sim.z0.clone(),
            t_fin: sim.t_fin,
            dt,
            record_stride,
        };
        cfg.validate().map_err(CliError::from)?;
        Ok(cfg)
    }

    pub fn output_dir(&self) -> &str {
        self.output
            .as_ref()
            .and_then(|o| o.dir.as_deref())
            .unwrap_or("out")
    }

    pub fn emit_svg(&self) -> bool {
        self.output
            .as_ref()
            .and_then(|o| o.emit_svg)
            .unwrap_or(false)
    }
}

fn parse_toml_scalar(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Value>(&doc) {
        Ok(toml::Value::Table(mut t)) => t.remove("v").expect("key v exists"),
        _ => toml::Value::String(raw.to_string()),
    }
}

fn nalgebra_matrix(n: usize, flat: &[f64]) -> ratesync_core::nalgebra::DMatrix<f64> {
    ratesync_core::nalgebra::DMatrix::from_row_slice(n, flat.len() / n.max(1), flat)
}

fn nalgebra_vector(v: &[f64]) -> ratesync_core::nalgebra::DVector<f64> {
    ratesync_core::nalgebra::DVector::from_column_slice(v)
}

fn nalgebra_row(v: &[f64]) -> ratesync_core::nalgebra::RowDVector<f64> {
    ratesync_core::nalgebra::RowDVector::from_row_slice(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_roundtrip_is_idempotent() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml_string().unwrap();
        let reparsed = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(cfg, reparsed);
        // serialize(parse(serialize(x))) == serialize(x)
        assert_eq!(text, reparsed.to_toml_string().unwrap());
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut text = ExperimentConfig::default().to_toml_string().unwrap();
        text.push_str("\n[extra]\nfoo = 1\n");
        assert!(ExperimentConfig::parse(&text).is_err());
        let bad_key = "[system]\np = 10.0\nq = 15.6\nm0 = 0.33\nm1 = 0.945\ntypo = 1\n";
        assert!(ExperimentConfig::parse(bad_key).is_err());
    }

    #[test]
    fn system_spellings_are_exclusive() {
        let both = r#"
[system]
p = 10.0
q = 15.6
m0 = 0.33
m1 = 0.945
a = [[-10.0, 10.0, 0.0], [1.0, -1.0, 1.0], [0.0, -15.6, 0.0]]
b = [10.0, 0.0, 0.0]
c = [1.0, 0.0, 0.0]
"#;
        assert!(ExperimentConfig::parse(both).is_err());
        let neither = "[system]\nm0 = 0.33\nm1 = 0.945\n";
        assert!(ExperimentConfig::parse(neither).is_err());
    }

    #[test]
    fn explicit_matrices_match_chua_spelling() {
        let explicit = r#"
[system]
m0 = 0.33
m1 = 0.945
a = [[-10.0, 10.0, 0.0], [1.0, -1.0, 1.0], [0.0, -15.6, 0.0]]
b = [10.0, 0.0, 0.0]
c = [1.0, 0.0, 0.0]
"#;
        let cfg = ExperimentConfig::parse(explicit).unwrap();
        let sys = cfg.build_system().unwrap();
        let chua = LurieSystem::chua(10.0, 15.6, 0.33, 0.945).unwrap();
        assert_eq!(sys, chua);
    }

    #[test]
    fn negative_p_rejected_at_load() {
        let text = "[system]\np = -1.0\nq = 15.6\nm0 = 0.33\nm1 = 0.945\n";
        assert!(ExperimentConfig::parse(text).is_err());
    }

    #[test]
    fn rho_rule_resolution() {
        let cfg = ExperimentConfig::default();
        let coder = cfg.build_coder().unwrap();
        assert_eq!(coder.rho, (-0.3f64 * 0.04).exp());
        // Explicit rho wins when the rule is absent.
        let over = cfg
            .with_overrides(&["coder.rho=0.97".into(), "coder.rho_rule=\"unset\"".into()]);
        assert!(over.is_err(), "both rho and rho_rule must be rejected");
    }

    #[test]
    fn overrides_apply_and_validate() {
        let cfg = ExperimentConfig::default();
        let over = cfg
            .with_overrides(&[
                "coder.Ts=0.02".into(),
                "sim.t_fin=50.0".into(),
                "control.K=12.5".into(),
                "sim.x0=[1.0, 2.0, 3.0]".into(),
            ])
            .unwrap();
        assert_eq!(over.coder.as_ref().unwrap().ts, 0.02);
        assert_eq!(over.sim.as_ref().unwrap().t_fin, 50.0);
        assert_eq!(over.control.as_ref().unwrap().gain, 12.5);
        assert_eq!(over.sim.as_ref().unwrap().x0, vec![1.0, 2.0, 3.0]);
        // Unknown key through --set is still rejected.
        assert!(cfg.with_overrides(&["coder.bogus=1".into()]).is_err());
        assert!(cfg.with_overrides(&["justakey=1".into()]).is_err());
    }

    #[test]
    fn default_sim_grid() {
        let cfg = ExperimentConfig::default();
        let sim = cfg.build_sim_config().unwrap();
        assert_eq!(sim.dt, SimConfig::default_dt(0.04));
        assert_eq!(sim.record_stride, 20);
        assert_eq!(sim.gain, 10.0);
    }
}
