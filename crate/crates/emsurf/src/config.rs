//! Run configuration: a strict TOML schema describing frequency, cell
//! templates, array layout, excitation, solver settings, and outputs.
//! Unknown keys anywhere in the document are rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};

/// Top-level run configuration.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Operating frequency, Hz.
    pub frequency_hz: f64,
    /// Cell templates, referenced by index from `layout.templates`.
    #[serde(rename = "template")]
    pub templates: Vec<TemplateConfig>,
    pub layout: LayoutConfig,
    pub excitation: ExcitationConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    pub output: OutputConfig,
}

/// A unit-cell template: either inline parametric geometry or a mesh file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateConfig {
    pub id: String,
    /// Path to a text mesh file (exclusive with the parametric fields).
    pub mesh_file: Option<PathBuf>,
    /// Relative permittivity per interior region / layer, bottom-up.
    pub permittivities: Vec<f64>,
    pub width: Option<f64>,
    pub layer_heights: Option<Vec<f64>>,
    pub patch_width: Option<f64>,
    pub mesh_length_patch: Option<f64>,
    pub mesh_length_box: Option<f64>,
    pub grounded: Option<bool>,
    /// Geometric refinement levels toward the cell's outer edges (0 = none).
    pub rim_grading: Option<usize>,
}

impl TemplateConfig {
    /// Parametric fields, if this template is inline.
    pub fn parametric(&self) -> Result<crate::mesh::UnitCellParams> {
        if self.mesh_file.is_some() {
            return Err(Error::Config(format!(
                "template '{}' is mesh-file based, not parametric",
                self.id
            )));
        }
        let req = |name: &str| {
            Error::Config(format!("template '{}' is missing required field '{name}'", self.id))
        };
        Ok(crate::mesh::UnitCellParams {
            width: self.width.ok_or_else(|| req("width"))?,
            layer_heights: self.layer_heights.clone().ok_or_else(|| req("layer_heights"))?,
            permittivities: self.permittivities.clone(),
            patch_width: self.patch_width.unwrap_or(0.0),
            mesh_length_patch: self.mesh_length_patch.or(self.mesh_length_box).ok_or_else(|| req("mesh_length_patch"))?,
            mesh_length_box: self.mesh_length_box.ok_or_else(|| req("mesh_length_box"))?,
            grounded: self.grounded.unwrap_or(false),
            rim_grading: self.rim_grading.unwrap_or(0),
        })
    }

    fn validate(&self) -> Result<()> {
        if self.permittivities.is_empty() {
            return Err(Error::Config(format!(
                "template '{}' must list at least one permittivity",
                self.id
            )));
        }
        let parametric_given = self.width.is_some()
            || self.layer_heights.is_some()
            || self.patch_width.is_some()
            || self.mesh_length_patch.is_some()
            || self.mesh_length_box.is_some()
            || self.grounded.is_some()
            || self.rim_grading.is_some();
        match (&self.mesh_file, parametric_given) {
            (Some(_), true) => Err(Error::Config(format!(
                "template '{}' mixes mesh_file with parametric fields",
                self.id
            ))),
            (None, false) => Err(Error::Config(format!(
                "template '{}' must give either mesh_file or parametric geometry",
                self.id
            ))),
            (None, true) => self.parametric().map(|_| ()),
            (Some(_), false) => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutConfig {
    pub period_x: f64,
    pub period_y: f64,
    pub count_x: usize,
    pub count_y: usize,
    /// Template index per cell, row-major with x fastest; a single entry is
    /// broadcast to every cell.
    pub templates: Vec<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExcitationConfig {
    /// "plane_wave" or "dipole".
    pub kind: String,
    /// Plane wave: E-field amplitude vector, V/m.
    pub e0: Option<[f64; 3]>,
    /// Plane wave: propagation direction (any nonzero vector).
    pub direction: Option<[f64; 3]>,
    /// Dipole: current moment I*l, A·m.
    pub moment: Option<[f64; 3]>,
    /// Dipole: position, meters (must lie outside every cell box).
    pub position: Option<[f64; 3]>,
}

impl ExcitationConfig {
    fn validate(&self) -> Result<()> {
        match self.kind.as_str() {
            "plane_wave" => {
                if self.e0.is_none() || self.direction.is_none() {
                    return Err(Error::Config(
                        "plane_wave excitation requires 'e0' and 'direction'".into(),
                    ));
                }
                if self.moment.is_some() || self.position.is_some() {
                    return Err(Error::Config(
                        "plane_wave excitation does not take 'moment'/'position'".into(),
                    ));
                }
            }
            "dipole" => {
                if self.moment.is_none() || self.position.is_none() {
                    return Err(Error::Config(
                        "dipole excitation requires 'moment' and 'position'".into(),
                    ));
                }
                if self.e0.is_some() || self.direction.is_some() {
                    return Err(Error::Config(
                        "dipole excitation does not take 'e0'/'direction'".into(),
                    ));
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown excitation kind '{other}' (expected 'plane_wave' or 'dipole')"
                )))
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Near-field preconditioner radius, meters; default lambda0 / 8.
    pub delta_nf: Option<f64>,
    pub tolerance: f64,
    pub restart: usize,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { delta_nf: None, tolerance: 1e-4, restart: 100, max_iterations: 1000 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory for the report and CSV cuts (created if absent).
    pub directory: PathBuf,
    /// Cut planes phi, degrees.
    #[serde(default = "default_cuts")]
    pub cuts_phi_deg: Vec<f64>,
    /// Theta samples per cut over [0, 180] degrees.
    #[serde(default = "default_theta_samples")]
    pub theta_samples: usize,
}

fn default_cuts() -> Vec<f64> {
    vec![0.0, 45.0, 90.0]
}

fn default_theta_samples() -> usize {
    181
}

impl RunConfig {
    /// Parse and validate a TOML document.
    pub fn from_str(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read, parse, and validate a config file; relative mesh paths are
    /// resolved against the config file's directory.
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = RunConfig::from_str(&text)?;
        if let Some(dir) = path.parent() {
            for t in &mut cfg.templates {
                if let Some(mf) = &t.mesh_file {
                    if mf.is_relative() {
                        t.mesh_file = Some(dir.join(mf));
                    }
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.frequency_hz > 0.0 && self.frequency_hz.is_finite()) {
            return Err(Error::Config("frequency_hz must be positive".into()));
        }
        if self.templates.is_empty() {
            return Err(Error::Config("at least one template is required".into()));
        }
        for t in &self.templates {
            t.validate()?;
        }
        let l = &self.layout;
        if l.count_x == 0 || l.count_y == 0 {
            return Err(Error::Config("layout counts must be positive".into()));
        }
        if !(l.period_x > 0.0 && l.period_y > 0.0) {
            return Err(Error::Config("layout periods must be positive".into()));
        }
        let cells = l.count_x * l.count_y;
        if l.templates.len() != 1 && l.templates.len() != cells {
            return Err(Error::Config(format!(
                "layout.templates must have 1 or {cells} entries, found {}",
                l.templates.len()
            )));
        }
        for &t in &l.templates {
            if t >= self.templates.len() {
                return Err(Error::Config(format!(
                    "layout references template index {t}, but only {} templates are defined",
                    self.templates.len()
                )));
            }
        }
        self.excitation.validate()?;
        let s = &self.solver;
        if let Some(d) = s.delta_nf {
            if !(d > 0.0) {
                return Err(Error::Config("solver.delta_nf must be positive".into()));
            }
        }
        if !(s.tolerance > 0.0 && s.tolerance < 1.0) {
            return Err(Error::Config("solver.tolerance must lie in (0, 1)".into()));
        }
        if s.restart == 0 || s.max_iterations == 0 {
            return Err(Error::Config("solver.restart and max_iterations must be positive".into()));
        }
        if self.output.theta_samples < 2 {
            return Err(Error::Config("output.theta_samples must be at least 2".into()));
        }
        if self.output.cuts_phi_deg.is_empty() {
            return Err(Error::Config("output.cuts_phi_deg must not be empty".into()));
        }
        Ok(())
    }

    /// Per-cell template index list (broadcasting a single entry).
    pub fn template_map(&self) -> Vec<usize> {
        let cells = self.layout.count_x * self.layout.count_y;
        if self.layout.templates.len() == 1 {
            vec![self.layout.templates[0]; cells]
        } else {
            self.layout.templates.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_config() -> String {
        r#"
            frequency_hz = 9.6e9

            [[template]]
            id = "patch"
            permittivities = [3.66, 1.0]
            width = 13.5e-3
            layer_heights = [0.762e-3, 1.238e-3]
            patch_width = 5.4e-3
            mesh_length_patch = 2.7e-3
            mesh_length_box = 4.5e-3
            grounded = true

            [layout]
            period_x = 13.5e-3
            period_y = 13.5e-3
            count_x = 2
            count_y = 2
            templates = [0]

            [excitation]
            kind = "plane_wave"
            e0 = [1.0, 0.0, 0.0]
            direction = [0.0, 0.0, -1.0]

            [output]
            directory = "out"
        "#
        .to_string()
    }

    #[test]
    fn valid_config_parses_with_defaults() {
        let cfg = RunConfig::from_str(&base_config()).unwrap();
        assert_eq!(cfg.layout.count_x, 2);
        assert_eq!(cfg.solver.tolerance, 1e-4);
        assert_eq!(cfg.solver.restart, 100);
        assert_eq!(cfg.output.cuts_phi_deg, vec![0.0, 45.0, 90.0]);
        assert_eq!(cfg.output.theta_samples, 181);
        assert_eq!(cfg.template_map(), vec![0, 0, 0, 0]);
        let params = cfg.templates[0].parametric().unwrap();
        assert!(params.grounded);
        assert_eq!(params.permittivities, vec![3.66, 1.0]);
    }

    #[test]
    fn unknown_keys_are_rejected_everywhere() {
        for (needle, inject) in [
            ("frequency_hz = 9.6e9", "frequency_hz = 9.6e9\nbogus_key = 1"),
            ("period_x = 13.5e-3", "period_x = 13.5e-3\nperiod_z = 1.0"),
            ("kind = \"plane_wave\"", "kind = \"plane_wave\"\nwavefront = 3"),
            ("directory = \"out\"", "directory = \"out\"\nformat = \"csv\""),
            ("id = \"patch\"", "id = \"patch\"\ncolour = \"red\""),
        ] {
            let text = base_config().replace(needle, inject);
            assert!(RunConfig::from_str(&text).is_err(), "accepted unknown key in: {inject}");
        }
    }

    #[test]
    fn semantic_validation_catches_bad_references() {
        let text = base_config().replace("templates = [0]", "templates = [1]");
        assert!(RunConfig::from_str(&text).is_err());
        let text = base_config().replace("templates = [0]", "templates = [0, 0, 0]");
        assert!(RunConfig::from_str(&text).is_err());
        let text = base_config().replace("count_x = 2", "count_x = 0");
        assert!(RunConfig::from_str(&text).is_err());
        let text = base_config().replace("kind = \"plane_wave\"", "kind = \"waveguide\"");
        assert!(RunConfig::from_str(&text).is_err());
    }

    #[test]
    fn excitation_field_cross_checks() {
        let text = base_config().replace("e0 = [1.0, 0.0, 0.0]", "moment = [1.0, 0.0, 0.0]");
        assert!(RunConfig::from_str(&text).is_err());
        let dipole = base_config()
            .replace(
                "kind = \"plane_wave\"\n            e0 = [1.0, 0.0, 0.0]\n            direction = [0.0, 0.0, -1.0]",
                "kind = \"dipole\"\n            moment = [0.0, 0.0, 1.0]\n            position = [0.0, 0.0, 0.1]",
            );
        RunConfig::from_str(&dipole).unwrap();
    }

    #[test]
    fn template_shape_rules() {
        // Mixing mesh_file with parametric fields is rejected.
        let text = base_config().replace("id = \"patch\"", "id = \"patch\"\nmesh_file = \"a.emesh\"");
        assert!(RunConfig::from_str(&text).is_err());
        // A bare mesh_file template is fine.
        let text = base_config().replace(
            r#"id = "patch"
            permittivities = [3.66, 1.0]
            width = 13.5e-3
            layer_heights = [0.762e-3, 1.238e-3]
            patch_width = 5.4e-3
            mesh_length_patch = 2.7e-3
            mesh_length_box = 4.5e-3
            grounded = true"#,
            r#"id = "patch"
            permittivities = [3.66, 1.0]
            mesh_file = "cell.emesh""#,
        );
        let cfg = RunConfig::from_str(&text).unwrap();
        assert!(cfg.templates[0].mesh_file.is_some());
        assert!(cfg.templates[0].parametric().is_err());
    }
}
