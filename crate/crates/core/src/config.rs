//! Run configuration shared by the command-line tools.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::driver::{ModelCorrection, ReconParams};
use crate::error::{Error, Result};
use crate::geometry::{build_disk_mesh, Mesh};
use crate::oracle::OracleCase;
use crate::order::DeltaPolicy;
use crate::shape::ShapeParams;

/// Part of the circle where currents are applied and voltages measured.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GammaSpec {
    Full,
    /// Polar angles in `[start, end)`, radians.
    Arc { start: f64, end: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub case: OracleCase,
    pub n_max: usize,
    pub tolerance: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { case: OracleCase::Homogeneous { conductivity: 1.0 }, n_max: 8, tolerance: 1e-2 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub phantom: Option<String>,
    pub data: Option<String>,
    /// Directory with ground-truth layer files, enables the metrics file.
    pub truth: Option<String>,
    pub output: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub radius: f64,
    pub h_recon: f64,
    /// Defaults to `h_recon / 2`.
    pub h_sim: Option<f64>,
    pub gamma: GammaSpec,
    pub m: usize,
    pub c0: f64,
    pub tau: f64,
    pub noise_eps: f64,
    pub seed: u64,
    pub delta: DeltaPolicy,
    pub tol_t: f64,
    pub max_layers: usize,
    pub shape: ShapeParams,
    pub correction: ModelCorrection,
    pub threads: Option<usize>,
    pub oracle: OracleConfig,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        let recon = ReconParams::default();
        Self {
            radius: 1.0,
            h_recon: 0.03,
            h_sim: None,
            gamma: GammaSpec::Full,
            m: 16,
            c0: 1.0,
            tau: 0.2,
            noise_eps: 0.0,
            seed: 0,
            delta: recon.delta,
            tol_t: recon.tol_t,
            max_layers: recon.max_layers,
            shape: recon.shape,
            correction: recon.correction,
            threads: None,
            oracle: OracleConfig::default(),
            paths: Paths::default(),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    /// Parses a JSON config, applies `key.path=value` overrides and validates.
    pub fn load(text: Option<&str>, overrides: &[(String, String)]) -> Result<Self> {
        let mut value: Value = match text {
            Some(t) => serde_json::from_str(t).map_err(|e| Error::Parse(format!("config: {e}")))?,
            None => Value::Object(Default::default()),
        };
        for (key, raw) in overrides {
            set_path(&mut value, key, raw)?;
        }
        let config: Self = serde_json::from_value(value).map_err(|e| Error::InvalidArgument(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        positive("radius", self.radius)?;
        positive("h_recon", self.h_recon)?;
        positive("c0", self.c0)?;
        positive("tau", self.tau)?;
        positive("tol_t", self.tol_t)?;
        if self.h_recon >= self.radius {
            return Err(Error::InvalidArgument(format!("h_recon {} must be below the radius {}", self.h_recon, self.radius)));
        }
        if let Some(h) = self.h_sim {
            positive("h_sim", h)?;
            if h > 0.5 * self.h_recon * (1.0 + 1e-9) {
                return Err(Error::InvalidArgument(format!("h_sim {h} must be at most h_recon/2 = {}", 0.5 * self.h_recon)));
            }
        }
        if self.m == 0 || self.max_layers == 0 || self.shape.directions == 0 || self.threads == Some(0) {
            return Err(Error::InvalidArgument("m, max_layers, shape.directions and threads must be at least 1".into()));
        }
        if !(self.noise_eps >= 0.0 && self.noise_eps.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise_eps must be nonnegative, got {}", self.noise_eps)));
        }
        let d = &self.delta;
        if [d.noise_factor, d.mesh_factor, d.exact_factor].iter().any(|f| !(*f >= 0.0 && f.is_finite())) {
            return Err(Error::InvalidArgument("delta factors must be nonnegative".into()));
        }
        if self.shape.bite_radii.is_empty() || self.shape.bite_radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::InvalidArgument("shape.bite_radii must be a nonempty list of positive numbers".into()));
        }
        if let GammaSpec::Arc { start, end } = self.gamma {
            if !(end > start && end - start <= 2.0 * PI) {
                return Err(Error::InvalidArgument(format!("gamma arc [{start}, {end}) is empty or wraps")));
            }
        }
        positive("oracle.tolerance", self.oracle.tolerance)?;
        Ok(())
    }

    pub fn recon_params(&self) -> ReconParams {
        ReconParams {
            delta: self.delta,
            noise_eps: self.noise_eps,
            tol_t: self.tol_t,
            max_layers: self.max_layers,
            shape: self.shape.clone(),
            correction: self.correction,
        }
    }

    pub fn recon_mesh(&self) -> Result<Mesh> {
        let mesh = build_disk_mesh(self.radius, self.h_recon)?;
        match self.gamma {
            GammaSpec::Full => Ok(mesh),
            GammaSpec::Arc { start, end } => mesh.with_gamma_arc(start, end),
        }
    }

    /// Uniform refinements of the reconstruction mesh until `h_sim` is met.
    pub fn sim_mesh(&self, recon: &Mesh) -> Result<Mesh> {
        let target = self.h_sim.unwrap_or(0.5 * self.h_recon);
        let mut mesh = recon.refine()?;
        while mesh.h() > target * (1.0 + 1e-9) {
            mesh = mesh.refine()?;
        }
        Ok(mesh)
    }

    /// The config as echoed into summaries: everything except the output
    /// location, so that reruns into another directory hash identically.
    pub fn echo(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(paths) = v.get_mut("paths").and_then(Value::as_object_mut) {
            paths.remove("output");
        }
        v
    }
}

/// Sets `a.b.c` in a JSON object; the value is parsed as JSON when possible
/// and taken as a string otherwise.
fn set_path(root: &mut Value, key: &str, raw: &str) -> Result<()> {
    let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(Error::InvalidArgument(format!("bad override key `{key}`")));
        }
        let obj = match node {
            Value::Object(o) => o,
            Value::Null => {
                *node = Value::Object(Default::default());
                node.as_object_mut().unwrap()
            }
            _ => return Err(Error::InvalidArgument(format!("override `{key}`: `{part}` is not inside an object"))),
        };
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), parsed);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert(Value::Null);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_reach_nested_fields() {
        let text = r#"{"m": 8, "shape": {"directions": 2}}"#;
        let o = vec![
            ("shape.bite_radii".to_string(), "[0.5]".to_string()),
            ("delta.exact_factor".to_string(), "1e-7".to_string()),
            ("paths.output".to_string(), "out dir".to_string()),
        ];
        let c = RunConfig::load(Some(text), &o).unwrap();
        assert_eq!(c.m, 8);
        assert_eq!(c.shape.directions, 2);
        assert_eq!(c.shape.bite_radii, vec![0.5]);
        assert_eq!(c.delta.exact_factor, 1e-7);
        assert_eq!(c.paths.output.as_deref(), Some("out dir"));
        assert!(c.echo()["paths"].get("output").is_none());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::load(Some(r#"{"tau": 0}"#), &[]).is_err());
        assert!(RunConfig::load(Some(r#"{"h_sim": 0.02}"#), &[]).is_err());
        assert!(RunConfig::load(Some(r#"{"nonsense": 1}"#), &[]).is_err());
        assert!(matches!(RunConfig::load(Some("{"), &[]), Err(Error::Parse(_))));
        let o = vec![("m.x".to_string(), "1".to_string())];
        assert!(RunConfig::load(None, &o).is_err());
    }

    #[test]
    fn round_trips_through_json() {
        let c = RunConfig { gamma: GammaSpec::Arc { start: 0.0, end: PI }, ..Default::default() };
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(RunConfig::load(Some(&text), &[]).unwrap(), c);
    }
}
