//! Flat key=value experiment configuration.
//!
//! One `key = value` pair per line with dotted keys, `#` comments and blank
//! lines allowed. Unknown and duplicate keys are rejected with their line
//! number so experiment logs stay diffable and typos fail loudly.

use std::collections::BTreeSet;
use std::path::PathBuf;

use eqr::flatness::FlatCurve;
use eqr::geometry::Vec3;
use eqr::lqr::WeightSet;
use eqr::simulator::{ControllerKind, InitialOffset, SimConfig};
use eqr::vehicle::Params;

#[derive(Debug)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(line) => write!(f, "config line {line}: {}", self.message),
            None => write!(f, "config: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line: Some(line),
        message: message.into(),
    }
}

/// All experiment knobs with their defaults. Every field maps to one dotted
/// key; see [`ExperimentConfig::KEY_HELP`] for the full table.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mass: f64,
    pub gravity: f64,
    pub trajectory_kind: String,
    pub hover_position: Vec3,
    pub t_final: f64,
    pub trajectory_dt: f64,
    pub gains_dt: f64,
    pub sim_dt: f64,
    pub controller: ControllerKind,
    pub init_theta: f64,
    pub init_phi: f64,
    pub init_v_offset: Vec3,
    pub init_x_offset: Vec3,
    pub f_diag: [f64; 9],
    pub q_diag: [f64; 9],
    pub s_diag: [f64; 4],
    pub sweep_n_theta: usize,
    pub sweep_n_phi: usize,
    pub sweep_clip: f64,
    pub output_dir: PathBuf,
    pub dump_trajectory: bool,
    pub dump_gains: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mass: 1.2,
            gravity: 9.81,
            trajectory_kind: "helix".into(),
            hover_position: Vec3::zeros(),
            t_final: 10.0,
            trajectory_dt: 1e-3,
            gains_dt: 1e-3,
            sim_dt: 1e-3,
            controller: ControllerKind::Eqr,
            init_theta: 0.0,
            init_phi: 0.0,
            init_v_offset: Vec3::zeros(),
            init_x_offset: Vec3::zeros(),
            f_diag: [1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 0.1, 0.1, 0.1],
            q_diag: [1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 0.1, 0.1, 0.1],
            s_diag: [0.5, 0.5, 0.5, 0.5],
            sweep_n_theta: 41,
            sweep_n_phi: 41,
            sweep_clip: 10.0,
            output_dir: PathBuf::from("out"),
            dump_trajectory: false,
            dump_gains: false,
        }
    }
}

impl ExperimentConfig {
    /// Key table printed in `--help`; kept in sync with [`Self::apply`].
    pub const KEY_HELP: &'static str = "\
Configuration keys (flat key = value file, '#' comments, SI units):
  plant.mass             vehicle mass [kg]                      (default 1.2)
  plant.gravity          gravitational acceleration [m/s^2]     (default 9.81)
  trajectory.kind        helix | hover                          (default helix)
  trajectory.hover_position  hover point x,y,z [m]              (default 0,0,0)
  trajectory.t_final     horizon [s]                            (default 10)
  trajectory.dt          desired-trajectory grid step [s]       (default 0.001)
  gains.dt               gain/Riccati grid step [s]             (default 0.001)
  sim.dt                 plant integration step [s]             (default 0.001)
  sim.controller         eqr | plqr                             (default eqr)
  init.theta             initial bearing polar angle [rad]      (default 0)
  init.phi               initial bearing azimuth [rad]          (default 0)
  init.v_offset          initial velocity offset x,y,z [m/s]    (default 0,0,0)
  init.x_offset          initial position offset x,y,z [m]      (default 0,0,0)
  weights.f              terminal weight diagonal (9 values)    (default 1,1,1,2,2,2,0.1,0.1,0.1)
  weights.q              running weight diagonal (9 values)     (default 1,1,1,2,2,2,0.1,0.1,0.1)
  weights.s              input weight diagonal (4 values)       (default 0.5,0.5,0.5,0.5)
  sweep.n_theta          sweep grid rows over [0, pi]           (default 41)
  sweep.n_phi            sweep grid columns over [0, 2*pi)      (default 41)
  sweep.clip             RMSE clip for the heatmap scaling      (default 10)
  output.dir             output directory                       (default out)
  dump.trajectory        also write trajectory.csv in lift      (default false)
  dump.gains             also write gains.csv in run            (default false)";

    /// Parses a config file body on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ExperimentConfig::default();
        let mut seen = BTreeSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(line_no, format!("expected 'key = value', got '{raw}'")))?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(err(line_no, format!("duplicate key '{key}'")));
            }
            cfg.apply(key, value, line_no)?;
        }
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        let bad = |what: &str| err(line, format!("invalid {what} for '{key}': '{value}'"));
        let parse_f64 =
            |what: &str| -> Result<f64, ConfigError> { value.parse().map_err(|_| bad(what)) };
        let parse_usize =
            |what: &str| -> Result<usize, ConfigError> { value.parse().map_err(|_| bad(what)) };
        let parse_bool = || -> Result<bool, ConfigError> {
            match value {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                _ => Err(bad("boolean")),
            }
        };
        let parse_list = |n: usize| -> Result<Vec<f64>, ConfigError> {
            let parts: Result<Vec<f64>, _> =
                value.split(',').map(|p| p.trim().parse::<f64>()).collect();
            match parts {
                Ok(list) if list.len() == n => Ok(list),
                _ => Err(bad(&format!("list of {n} numbers"))),
            }
        };
        let parse_vec3 = || -> Result<Vec3, ConfigError> {
            let list = parse_list(3)?;
            Ok(Vec3::new(list[0], list[1], list[2]))
        };

        match key {
            "plant.mass" => self.mass = parse_f64("number")?,
            "plant.gravity" => self.gravity = parse_f64("number")?,
            "trajectory.kind" => match value {
                "helix" | "hover" => self.trajectory_kind = value.into(),
                _ => return Err(bad("trajectory kind (helix | hover)")),
            },
            "trajectory.hover_position" => self.hover_position = parse_vec3()?,
            "trajectory.t_final" => self.t_final = parse_f64("number")?,
            "trajectory.dt" => self.trajectory_dt = parse_f64("number")?,
            "gains.dt" => self.gains_dt = parse_f64("number")?,
            "sim.dt" => self.sim_dt = parse_f64("number")?,
            "sim.controller" => match value {
                "eqr" => self.controller = ControllerKind::Eqr,
                "plqr" => self.controller = ControllerKind::Plqr,
                _ => return Err(bad("controller (eqr | plqr)")),
            },
            "init.theta" => self.init_theta = parse_f64("number")?,
            "init.phi" => self.init_phi = parse_f64("number")?,
            "init.v_offset" => self.init_v_offset = parse_vec3()?,
            "init.x_offset" => self.init_x_offset = parse_vec3()?,
            "weights.f" => self.f_diag = parse_list(9)?.try_into().unwrap(),
            "weights.q" => self.q_diag = parse_list(9)?.try_into().unwrap(),
            "weights.s" => self.s_diag = parse_list(4)?.try_into().unwrap(),
            "sweep.n_theta" => self.sweep_n_theta = parse_usize("integer")?,
            "sweep.n_phi" => self.sweep_n_phi = parse_usize("integer")?,
            "sweep.clip" => self.sweep_clip = parse_f64("number")?,
            "output.dir" => self.output_dir = PathBuf::from(value),
            "dump.trajectory" => self.dump_trajectory = parse_bool()?,
            "dump.gains" => self.dump_gains = parse_bool()?,
            _ => return Err(err(line, format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn params(&self) -> Params {
        Params {
            mass: self.mass,
            gravity: self.gravity,
        }
    }

    pub fn curve(&self) -> FlatCurve {
        match self.trajectory_kind.as_str() {
            "hover" => FlatCurve::Hover {
                position: self.hover_position,
            },
            _ => FlatCurve::Helix,
        }
    }

    pub fn weights(&self) -> Result<WeightSet, ConfigError> {
        WeightSet::diagonal(self.f_diag, self.q_diag, self.s_diag).map_err(|e| ConfigError {
            line: None,
            message: e.to_string(),
        })
    }

    pub fn initial_offset(&self) -> InitialOffset {
        InitialOffset {
            theta: self.init_theta,
            phi: self.init_phi,
            v_offset: self.init_v_offset,
            x_offset: self.init_x_offset,
        }
    }

    pub fn sim_config(&self) -> Result<SimConfig, ConfigError> {
        Ok(SimConfig {
            curve: self.curve(),
            t_final: self.t_final,
            dt_plant: self.sim_dt,
            dt_gain: self.gains_dt,
            controller: self.controller,
            init: self.initial_offset(),
            params: self.params(),
            weights: self.weights()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = ExperimentConfig::parse("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.mass, 1.2);
        assert_eq!(cfg.sweep_n_theta, 41);
    }

    #[test]
    fn parses_keys_comments_and_whitespace() {
        let text = "\n# comment\nplant.mass = 2.5   # trailing comment\nsim.controller=plqr\nweights.s = 1, 1, 1, 1\ninit.x_offset = 0.5, -1, 2\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.mass, 2.5);
        assert_eq!(cfg.controller, ControllerKind::Plqr);
        assert_eq!(cfg.s_diag, [1.0, 1.0, 1.0, 1.0]);
        assert_eq!(cfg.init_x_offset, Vec3::new(0.5, -1.0, 2.0));
    }

    #[test]
    fn rejects_unknown_key_with_line_number() {
        let out = ExperimentConfig::parse("plant.mass = 1\nplant.masss = 2\n");
        let e = out.unwrap_err();
        assert_eq!(e.line, Some(2));
        assert!(e.message.contains("unknown key"));
    }

    #[test]
    fn rejects_duplicates_and_bad_values() {
        let dup = ExperimentConfig::parse("plant.mass = 1\nplant.mass = 2\n").unwrap_err();
        assert_eq!(dup.line, Some(2));
        assert!(dup.message.contains("duplicate"));

        let bad = ExperimentConfig::parse("plant.mass = heavy\n").unwrap_err();
        assert_eq!(bad.line, Some(1));

        let short = ExperimentConfig::parse("weights.f = 1,2,3\n").unwrap_err();
        assert!(short.message.contains("list of 9"));

        let noeq = ExperimentConfig::parse("plant.mass 1.5\n").unwrap_err();
        assert!(noeq.message.contains("key = value"));
    }

    #[test]
    fn weight_validation_surfaces() {
        let cfg =
            ExperimentConfig::parse("weights.s = 0, 0.5, 0.5, 0.5\n").unwrap();
        assert!(cfg.weights().is_err());
    }
}
