use std::path::PathBuf;

use fblab_core::solver::{EpsSchedule, NehariOptions, SolveOptions};
use fblab_core::verification::Thresholds;
use fblab_core::{Grid, NonlinearityModel, RegularizedFunctional};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainConfig {
    Box {
        nx: usize,
        ny: usize,
        x_range: [f64; 2],
        y_range: [f64; 2],
    },
    Disk {
        n: usize,
        radius: f64,
    },
    Radial {
        dim: u32,
        radius: f64,
        n: usize,
    },
}

impl DomainConfig {
    pub fn grid(&self) -> Result<Grid, CliError> {
        let grid = match *self {
            DomainConfig::Box {
                nx,
                ny,
                x_range,
                y_range,
            } => Grid::rect(nx, ny, x_range, y_range),
            DomainConfig::Disk { n, radius } => Grid::disk(n, radius),
            DomainConfig::Radial { dim, radius, n } => Grid::radial(dim, radius, n),
        };
        grid.map_err(|e| CliError::Config(e.to_string()))
    }
}

/// ε schedule: explicit `values`, or `start_cells·h` down to `end_cells·h`
/// by factors of `ratio`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub start_cells: f64,
    pub end_cells: f64,
    pub ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            start_cells: 8.0,
            end_cells: 2.0,
            ratio: 0.5,
            values: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Mountain pass gradient tolerance; defaults to `1e-6 |Ω|^½`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mountain_pass_tol: Option<f64>,
    pub max_sweeps: usize,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Also minimize `J` on the Nehari manifold and report the level gap.
    pub nehari: bool,
    /// Random direction pairs for the gradient consistency check.
    pub gradient_pairs: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mountain_pass_tol: None,
            max_sweeps: 20_000,
            newton_tol: 1e-10,
            newton_max_iter: 100,
            nehari: false,
            gradient_pairs: 20,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    /// Output directory; `--out` overrides it. Not part of the config hash.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

/// One parameter axis: `parameter` is a dotted key of this config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: String,
    pub values: Vec<toml::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub domain: DomainConfig,
    pub model: NonlinearityModel,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub verify: Thresholds,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

fn default_name() -> String {
    "run".into()
}

/// A validated configuration with everything needed to compute.
#[derive(Debug, Clone)]
pub struct Setup {
    pub config: RunConfig,
    pub grid: Grid,
    pub solve: SolveOptions,
    pub nehari: Option<NehariOptions>,
    pub hash: String,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// SHA-256 of the canonical JSON form, without the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.run.out = None;
        let json = serde_json::to_string(&c).expect("config serializes to JSON");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn schedule(&self, grid: &Grid) -> Result<EpsSchedule, CliError> {
        let s = &self.schedule;
        let h = grid.h();
        let schedule = match &s.values {
            Some(v) => EpsSchedule::new(v.clone()),
            None => EpsSchedule::geometric(s.start_cells * h, s.end_cells * h, s.ratio),
        };
        schedule.map_err(|e| CliError::Config(e.to_string()))
    }

    /// Checks every precondition that can be checked before computing.
    pub fn validate(self) -> Result<Setup, CliError> {
        let config = |e: String| CliError::Config(e);
        let grid = self.domain.grid()?;
        self.model.validate().map_err(|e| config(e.to_string()))?;
        let schedule = self.schedule(&grid)?;
        RegularizedFunctional::new(&grid, &self.model, schedule.values()[0]).map_err(|e| config(e.to_string()))?;
        let t = &self.verify;
        let positive = [
            ("fb_median", t.fb_median),
            ("nondegeneracy_c_min", t.nondegeneracy_c_min),
            ("r0_cells", t.r0_cells),
            ("variational_ratio", t.variational_ratio),
            ("lipschitz_growth", t.lipschitz_growth),
            ("harmonic_tol", t.harmonic_tol),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(config(format!("verify.{name} must be positive")));
        }
        if !(t.density_c_min > 0.0 && t.density_c_min < 0.5) {
            return Err(config("verify.density_c_min must lie in (0, 0.5)".into()));
        }
        let s = &self.solver;
        if !(s.newton_tol > 0.0) || s.newton_max_iter == 0 || s.max_sweeps == 0 {
            return Err(config("solver tolerances and iteration limits must be positive".into()));
        }
        if s.mountain_pass_tol.is_some_and(|v| !(v > 0.0)) {
            return Err(config("solver.mountain_pass_tol must be positive".into()));
        }
        if let Some(sw) = &self.sweep {
            if sw.values.is_empty() {
                return Err(config("sweep.values is empty".into()));
            }
        }

        let mut solve = SolveOptions::for_grid(&grid).map_err(|e| config(e.to_string()))?;
        solve.schedule = schedule;
        if let Some(tol) = s.mountain_pass_tol {
            solve.mountain_pass.tol = tol;
            solve.handoff_tol = solve.handoff_tol.max(tol);
        }
        solve.mountain_pass.max_sweeps = s.max_sweeps;
        solve.newton.tol = s.newton_tol;
        solve.newton.max_iter = s.newton_max_iter;
        let nehari = s.nehari.then(|| NehariOptions::for_grid(&grid));
        let hash = self.hash();
        Ok(Setup {
            config: self,
            grid,
            solve,
            nehari,
            hash,
        })
    }

    /// Copy of this config with the dotted key `path` set to `value`.
    pub fn with_parameter(&self, path: &str, value: &toml::Value) -> Result<RunConfig, CliError> {
        let mut doc = toml::Value::try_from(self).map_err(|e| CliError::Config(e.to_string()))?;
        let mut slot = &mut doc;
        for key in path.split('.') {
            slot = slot
                .get_mut(key)
                .ok_or_else(|| CliError::Config(format!("sweep parameter '{path}' is not a key of the config")))?;
        }
        *slot = value.clone();
        let mut c: RunConfig = doc.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        c.sweep = None;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[domain]
kind = "box"
nx = 33
ny = 33
x_range = [-1.0, 1.0]
y_range = [-1.0, 1.0]

[model]
variant = "pure_power"
p = 4.0
"#;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = RunConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(c.schedule, ScheduleConfig::default());
        assert_eq!(c.verify, Thresholds::default());
        let s = c.validate().unwrap();
        let h = s.grid.h();
        assert_eq!(s.solve.schedule.values(), &[8.0 * h, 4.0 * h, 2.0 * h]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = format!("{MINIMAL}\n[solver]\nnewton_tolerance = 1e-9\n");
        assert!(matches!(RunConfig::from_toml_str(&bad), Err(CliError::Config(_))));
        let bad = MINIMAL.replace("p = 4.0", "p = 4.0\nq = 1.0");
        assert!(matches!(RunConfig::from_toml_str(&bad), Err(CliError::Config(_))));
    }

    #[test]
    fn invalid_parameters_fail_validation() {
        let c = RunConfig::from_toml_str(&MINIMAL.replace("p = 4.0", "p = 2.0")).unwrap();
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
        let c = RunConfig::from_toml_str(&MINIMAL.replace("nx = 33", "nx = 5")).unwrap();
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn hash_ignores_the_output_directory_only() {
        let a = RunConfig::from_toml_str(MINIMAL).unwrap();
        let mut b = a.clone();
        b.run.out = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.run.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn toml_round_trip() {
        let a = RunConfig::from_toml_str(MINIMAL).unwrap();
        let b = RunConfig::from_toml_str(&a.to_toml_string()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn parameter_override_by_dotted_key() {
        let a = RunConfig::from_toml_str(MINIMAL).unwrap();
        let b = a.with_parameter("model.p", &toml::Value::Float(5.0)).unwrap();
        assert_eq!(b.model, NonlinearityModel::PurePower { p: 5.0 });
        let c = a.with_parameter("domain.nx", &toml::Value::Integer(65)).unwrap();
        assert!(matches!(c.domain, DomainConfig::Box { nx: 65, ny: 33, .. }));
        assert!(a.with_parameter("model.kappa", &toml::Value::Float(1.0)).is_err());
    }
}
