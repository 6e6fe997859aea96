//! Run configuration, structured reports, and field serialization.
//!
//! Fields go to CSV with header `r,theta,value`, row-major over grid nodes
//! (radius outer, angle inner), with shortest round-trip decimal formatting.
//! Grid metadata travels in a JSON sidecar {n_r, n_theta, L}.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ansatz::FourierSeries;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::PolarGrid;
use crate::matter::GaussianSpec;
use crate::solver::Tolerances;

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct GridConfig {
    pub n_r: usize,
    pub n_theta: usize,
    #[serde(default = "default_map_scale", rename = "L")]
    pub map_scale: f64,
}

fn default_map_scale() -> f64 {
    4.0
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n_r: 256,
            n_theta: 64,
            map_scale: 4.0,
        }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<PolarGrid> {
        PolarGrid::new(self.n_r, self.n_theta, self.map_scale)
    }
}

/// Source specification: either the built-in Gaussian wave-map family or
/// field files produced by an earlier run.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SourceSpec {
    Gaussian { components: Vec<GaussianSpec> },
    File { paths: SourcePaths },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SourcePaths {
    pub p1: String,
    pub p2: String,
    pub q_dot: String,
    pub q_grad: String,
}

impl Default for SourceSpec {
    fn default() -> Self {
        SourceSpec::Gaussian { components: vec![] }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct AngularConfig {
    #[serde(default)]
    pub btilde: FourierSeries,
    #[serde(default)]
    pub b_big: FourierSeries,
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    #[default]
    Solve,
    Verify,
    Sweep,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct ToleranceConfig {
    #[serde(default = "default_fp_tol")]
    pub fixed_point_tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_fp_tol() -> f64 {
    1e-10
}

fn default_max_iter() -> usize {
    50
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig {
            fixed_point_tol: default_fp_tol(),
            max_iter: default_max_iter(),
        }
    }
}

impl From<ToleranceConfig> for Tolerances {
    fn from(c: ToleranceConfig) -> Self {
        Tolerances {
            fixed_point_tol: c.fixed_point_tol,
            max_iter: c.max_iter,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct SweepConfig {
    pub amplitudes: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RunConfig {
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub mode: RunMode,
    #[serde(default)]
    pub source: SourceSpec,
    #[serde(default)]
    pub angular: AngularConfig,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

fn default_delta() -> f64 {
    -0.5
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            grid: GridConfig::default(),
            delta: default_delta(),
            mode: RunMode::default(),
            source: SourceSpec::default(),
            angular: AngularConfig::default(),
            tolerances: ToleranceConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.delta <= -1.0 || self.delta >= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "delta must lie strictly inside (-1, 0), got {}",
                self.delta
            )));
        }
        if !(self.tolerances.fixed_point_tol > 0.0) {
            return Err(Error::InvalidConfig(
                "fixed_point_tol must be positive".into(),
            ));
        }
        if self.tolerances.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be positive".into()));
        }
        if self.mode == RunMode::Sweep {
            let a = &self.sweep.amplitudes;
            if a.is_empty() {
                return Err(Error::InvalidConfig(
                    "sweep mode requires sweep.amplitudes".into(),
                ));
            }
            if a.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::InvalidConfig(
                    "sweep amplitudes must be positive".into(),
                ));
            }
            let mut sorted = a.clone();
            sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidConfig(
                    "sweep amplitudes must be distinct".into(),
                ));
            }
            if !matches!(self.source, SourceSpec::Gaussian { .. }) {
                return Err(Error::InvalidConfig(
                    "sweep mode requires the gaussian source family".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Grid metadata sidecar.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct GridMeta {
    pub n_r: usize,
    pub n_theta: usize,
    #[serde(rename = "L")]
    pub map_scale: f64,
}

impl GridMeta {
    pub fn of(grid: &PolarGrid) -> Self {
        GridMeta {
            n_r: grid.n_r(),
            n_theta: grid.n_theta(),
            map_scale: grid.map_scale(),
        }
    }
}

/// Write a field as CSV (`r,theta,value`, row-major over nodes).
pub fn write_field_csv(path: &Path, field: &ScalarField) -> Result<()> {
    let grid = field.grid();
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "r,theta,value")?;
    let nt = grid.n_theta();
    for (j, &r) in grid.r_nodes().iter().enumerate() {
        for (k, &theta) in grid.theta_nodes().iter().enumerate() {
            writeln!(w, "{},{},{}", r, theta, field.values()[j * nt + k])?;
        }
    }
    Ok(())
}

/// Write the grid sidecar next to the field files.
pub fn write_grid_sidecar(path: &Path, grid: &PolarGrid) -> Result<()> {
    let meta = GridMeta::of(grid);
    std::fs::write(path, serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

/// Read a field written by `write_field_csv` back onto a matching grid.
pub fn read_field_csv(path: &Path, grid: &PolarGrid) -> Result<ScalarField> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut values = Vec::with_capacity(grid.len());
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line.trim() != "r,theta,value" {
                return Err(Error::InvalidConfig(format!(
                    "unexpected CSV header {line:?}"
                )));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let value = line
            .rsplit(',')
            .next()
            .and_then(|v| v.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::InvalidConfig(format!("bad CSV row {i}: {line:?}")))?;
        values.push(value);
    }
    if values.len() != grid.len() {
        return Err(Error::GridMismatch("CSV row count"));
    }
    ScalarField::from_values(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matter::MatterComponent;

    #[test]
    fn config_round_trip_is_identity() {
        let cfg = RunConfig {
            grid: GridConfig {
                n_r: 128,
                n_theta: 32,
                map_scale: 4.0,
            },
            delta: -0.4,
            mode: RunMode::Sweep,
            source: SourceSpec::Gaussian {
                components: vec![GaussianSpec {
                    which: MatterComponent::GammaDot,
                    amplitude: 0.05,
                    center: (0.5, 0.0),
                    width: 1.0,
                }],
            },
            angular: AngularConfig {
                btilde: FourierSeries {
                    cos: vec![0.01],
                    sin: vec![],
                },
                b_big: FourierSeries::zero(),
            },
            tolerances: ToleranceConfig::default(),
            sweep: SweepConfig {
                amplitudes: vec![0.02, 0.04, 0.08],
            },
        };
        let text = cfg.to_json();
        let back = RunConfig::from_json(&text).unwrap();
        assert_eq!(back, cfg);
        // And serialization is deterministic.
        assert_eq!(text, back.to_json());
    }

    #[test]
    fn config_rejects_bad_delta() {
        let text = r#"{"delta": 0.5}"#;
        assert!(RunConfig::from_json(text).is_err());
        let text = r#"{"delta": -1.0}"#;
        assert!(RunConfig::from_json(text).is_err());
    }

    #[test]
    fn config_rejects_bad_sweep() {
        let text = r#"{"mode": "sweep", "sweep": {"amplitudes": [0.1, 0.1]}}"#;
        assert!(RunConfig::from_json(text).is_err());
        let text = r#"{"mode": "sweep", "sweep": {"amplitudes": [-0.1]}}"#;
        assert!(RunConfig::from_json(text).is_err());
    }

    #[test]
    fn field_csv_round_trip() {
        let g = PolarGrid::new(32, 8, 4.0).unwrap();
        let f = ScalarField::from_fn(&g, |r, th| (-(r * r)).exp() * (1.0 + th.sin() / 3.0))
            .unwrap();
        let dir = std::env::temp_dir().join("deficit-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("field.csv");
        write_field_csv(&path, &f).unwrap();
        let back = read_field_csv(&path, &g).unwrap();
        for (a, b) in f.values().iter().zip(back.values()) {
            assert_eq!(a, b, "round trip must be bit exact");
        }
        write_grid_sidecar(&dir.join("grid.json"), &g).unwrap();
        let meta: GridMeta =
            serde_json::from_str(&std::fs::read_to_string(dir.join("grid.json")).unwrap())
                .unwrap();
        assert_eq!(meta, GridMeta::of(&g));
    }
}
