//! Scenario configuration: the TOML schema, the preset library, validation,
//! and seeded initial-state sampling.

use std::f64::consts::{FRAC_PI_3, SQRT_2};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis;
use crate::error::{Error, Result};
use crate::fw;
use crate::laws::{AngleProfile, ControlLaw, NoiseModel};
use crate::vecgeom::Vector;
use crate::world::{self, AgentState, BeaconField, MotionProfile, Trajectory, EPS_GUARD};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentModel {
    Single,
    Double,
}

/// How the initial position is chosen. Random variants are reproducible:
/// they draw from a ChaCha8 stream seeded with the scenario seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartSpec {
    Explicit(Vector),
    RandomInBox { min: Vector, max: Vector },
    /// Uniform in the safe ball around the initial optimum.
    RandomInBall,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub model: AgentModel,
    pub start: StartSpec,
    /// Initial velocity; double-integrator only, defaults to zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<Vector>,
}

fn default_dt() -> f64 {
    1e-3
}

fn default_stride() -> usize {
    10
}

fn noise_is_absent(n: &NoiseModel) -> bool {
    n.theta.is_empty() && n.axis.is_none()
}

/// A complete, self-describing run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub dimension: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub horizon: f64,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
    pub agent: AgentConfig,
    pub beacons: BeaconField,
    pub law: ControlLaw,
    #[serde(default, skip_serializing_if = "noise_is_absent")]
    pub noise: NoiseModel,
}

impl Scenario {
    /// Full validation: schema consistency first, then the physical
    /// requirements the guidance theory presumes.
    pub fn validate(&self) -> Result<()> {
        if self.dimension != 2 && self.dimension != 3 {
            return Err(Error::Schema(format!(
                "dimension must be 2 or 3, got {}",
                self.dimension
            )));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Schema(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::Schema(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if self.record_stride == 0 {
            return Err(Error::Schema("record_stride must be at least 1".into()));
        }

        self.beacons.validate()?;
        if self.beacons.dim() != self.dimension {
            return Err(Error::Schema(format!(
                "beacons are {}-dimensional but the scenario declares dimension {}",
                self.beacons.dim(),
                self.dimension
            )));
        }

        // interior-minimum condition at t = 0
        let report = fw::existence_check(&self.beacons.positions, &self.beacons.weights)
            .map_err(|e| Error::Physics(e.to_string()))?;
        if !report.interior_minimum {
            let worst = report
                .margins
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap();
            return Err(Error::Physics(format!(
                "no interior optimum: the optimality margin at beacon {} is {:.6} (must be \
                 positive at every beacon)",
                worst.0, worst.1
            )));
        }

        // law/model compatibility
        let wants_double = self.law.is_double_integrator();
        match (wants_double, self.agent.model) {
            (true, AgentModel::Single) => {
                return Err(Error::Schema(format!(
                    "law `{}` drives a double integrator but the agent model is `single`",
                    self.law.label()
                )));
            }
            (false, AgentModel::Double) => {
                return Err(Error::Schema(format!(
                    "law `{}` drives a single integrator but the agent model is `double`",
                    self.law.label()
                )));
            }
            _ => {}
        }
        if self.agent.model == AgentModel::Single && self.agent.velocity.is_some() {
            return Err(Error::Schema(
                "initial velocity is only meaningful for the double-integrator model".into(),
            ));
        }
        if let Some(v) = &self.agent.velocity {
            if v.dim() != self.dimension {
                return Err(Error::Schema("initial velocity has the wrong dimension".into()));
            }
        }

        self.law.validate().map_err(Error::Physics)?;

        // motion-profile compatibility and gain-vs-bound requirements
        match &self.law {
            ControlLaw::Gradient | ControlLaw::FiniteTime { .. } | ControlLaw::PdDi { .. } => {
                if !self.beacons.motion.is_stationary() {
                    return Err(Error::Physics(format!(
                        "law `{}` assumes stationary beacons",
                        self.law.label()
                    )));
                }
            }
            ControlLaw::AdaptiveConstVelSi { .. } | ControlLaw::AdaptiveConstVelDi { .. } => {
                if matches!(self.beacons.motion, MotionProfile::SinusoidVel { .. }) {
                    return Err(Error::Physics(format!(
                        "law `{}` estimates a constant beacon velocity; the configured motion \
                         is time-varying",
                        self.law.label()
                    )));
                }
            }
            ControlLaw::SmcKnownBoundSi { beta, .. } => {
                let eta = self.beacons.effective_eta();
                if *beta <= eta {
                    return Err(Error::Physics(format!(
                        "sliding gain beta={beta} must exceed the velocity bound eta={eta}"
                    )));
                }
            }
            ControlLaw::SmcDi { beta, .. } => {
                let accel = self.beacons.motion.accel_bound();
                if *beta <= accel {
                    return Err(Error::Physics(format!(
                        "sliding gain beta={beta} must exceed the beacon acceleration bound \
                         {accel}"
                    )));
                }
            }
            ControlLaw::AdaptiveSmcSi { .. } => {}
        }

        // noise shape
        if !self.noise.theta.is_empty() && self.noise.theta.len() != self.beacons.len() {
            return Err(Error::Schema(format!(
                "noise model has {} angle profiles for {} beacons",
                self.noise.theta.len(),
                self.beacons.len()
            )));
        }
        if let Some(axis) = &self.noise.axis {
            if self.dimension == 3 && axis.normalized().is_none() {
                return Err(Error::Schema("noise rotation axis must be nonzero".into()));
            }
        }

        // start-spec shape
        match &self.agent.start {
            StartSpec::Explicit(p) => {
                if p.dim() != self.dimension {
                    return Err(Error::Schema("start position has the wrong dimension".into()));
                }
            }
            StartSpec::RandomInBox { min, max } => {
                if min.dim() != self.dimension || max.dim() != self.dimension {
                    return Err(Error::Schema("start box has the wrong dimension".into()));
                }
                if (0..self.dimension).any(|k| min[k] >= max[k]) {
                    return Err(Error::Schema("start box is empty".into()));
                }
            }
            StartSpec::RandomInBall => {}
        }
        Ok(())
    }

    /// Samples the initial agent state from the scenario seed.
    pub fn initial_state(&self) -> Result<AgentState> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let dim = self.dimension;
        let p = match &self.agent.start {
            StartSpec::Explicit(p) => *p,
            StartSpec::RandomInBox { min, max } => {
                let mut comps = [0.0; 3];
                for k in 0..dim {
                    let u: f64 = rng.random();
                    comps[k] = min[k] + (max[k] - min[k]) * u;
                }
                Vector::new(&comps[..dim])
            }
            StartSpec::RandomInBall => {
                let gt = analysis::GroundTruth::for_field(&self.beacons)?;
                let r = gt.ball_radius;
                loop {
                    let mut comps = [0.0; 3];
                    let mut nsq = 0.0;
                    for c in comps.iter_mut().take(dim) {
                        let u: f64 = rng.random();
                        *c = 2.0 * u - 1.0;
                        nsq += *c * *c;
                    }
                    if nsq <= 1.0 {
                        break gt.pstar0 + Vector::new(&comps[..dim]) * r;
                    }
                }
            }
        };
        let min_dist = self
            .beacons
            .positions
            .iter()
            .map(|b| p.dist(b))
            .fold(f64::INFINITY, f64::min);
        if min_dist <= EPS_GUARD {
            return Err(Error::Physics(format!(
                "initial position {p} starts within the collision guard of a beacon \
                 (distance {min_dist:.6})"
            )));
        }
        let v = match self.agent.model {
            AgentModel::Single => None,
            AgentModel::Double => Some(self.agent.velocity.unwrap_or_else(|| Vector::zero(dim))),
        };
        Ok(AgentState {
            p,
            v,
            controller: self.law.initial_state(dim),
            t: 0.0,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Schema(e.to_string()))
    }
}

/// Parses and validates a scenario document.
///
/// Syntax problems, schema mismatches, and physical violations surface as
/// three distinct error variants.
pub fn from_toml_str(text: &str) -> Result<Scenario> {
    let scenario = parse_without_validation(text)?;
    scenario.validate()?;
    Ok(scenario)
}

fn parse_without_validation(text: &str) -> Result<Scenario> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
    toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Schema(e.to_string()))
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_toml_str(&text)
}

pub fn save_scenario(scenario: &Scenario, path: &Path) -> Result<()> {
    std::fs::write(path, scenario.to_toml()?).map_err(|e| Error::io(path, e))
}

/// A finished run: the trajectory and its certificate evaluation.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub report: analysis::CertificateReport,
}

/// Validates, simulates, and evaluates a scenario.
pub fn run_scenario(scenario: &Scenario) -> Result<RunOutput> {
    scenario.validate()?;
    let trajectory = world::simulate(scenario)?;
    let report = analysis::evaluate(&trajectory, scenario)?;
    Ok(RunOutput { trajectory, report })
}

fn hexagon() -> Vec<Vector> {
    [[1., 1.], [0., 2.], [-1., 1.], [-1., -1.], [0., -2.], [1., -1.]]
        .iter()
        .map(|c| Vector::new(c))
        .collect()
}

fn cube() -> Vec<Vector> {
    let mut out = Vec::with_capacity(8);
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                out.push(Vector::xyz(sx, sy, sz));
            }
        }
    }
    out
}

/// The Simulation-1 bearing-error profiles: two constant offsets and two
/// sinusoid pairs.
fn sim1_noise() -> NoiseModel {
    let pattern = [
        AngleProfile::Constant { value: FRAC_PI_3 },
        AngleProfile::Sinusoid { amp: 1.0, freq: 1.0 },
        AngleProfile::Sinusoid { amp: 1.25, freq: 1.0 },
    ];
    NoiseModel {
        theta: (0..6).map(|i| pattern[i % 3].clone()).collect(),
        axis: None,
    }
}

fn sim1c_motion() -> MotionProfile {
    let c = 1.0 / SQRT_2;
    MotionProfile::SinusoidVel {
        offset: Vector::xy(c, c),
        amp: Vector::xy(-c, c),
        freq: 2.0,
        phase: vec![0.0, 0.0],
    }
}

fn sim1_base(name: &str, law: ControlLaw, motion: MotionProfile) -> Scenario {
    Scenario {
        name: name.to_string(),
        dimension: 2,
        seed: 1,
        dt: 1e-3,
        horizon: 10.0,
        record_stride: 10,
        agent: AgentConfig {
            model: AgentModel::Single,
            start: StartSpec::RandomInBox {
                min: Vector::xy(-3.0, -3.0),
                max: Vector::xy(3.0, 3.0),
            },
            velocity: None,
        },
        beacons: BeaconField {
            positions: hexagon(),
            weights: vec![1.0; 6],
            motion,
            eta: None,
        },
        law,
        noise: NoiseModel::none(),
    }
}

fn sim2_base(name: &str, law: ControlLaw, motion: MotionProfile) -> Scenario {
    Scenario {
        name: name.to_string(),
        dimension: 3,
        seed: 1,
        dt: 1e-3,
        horizon: 25.0,
        record_stride: 10,
        agent: AgentConfig {
            model: AgentModel::Double,
            start: StartSpec::Explicit(Vector::xyz(5.0, 5.0, -3.0)),
            velocity: None,
        },
        beacons: BeaconField {
            positions: cube(),
            weights: vec![1.0; 8],
            motion,
            eta: None,
        },
        law,
        noise: NoiseModel::none(),
    }
}

pub const PRESET_NAMES: [&str; 9] = [
    "sim1a-gradient",
    "sim1a-noisy",
    "sim1a-finite",
    "sim1b",
    "sim1c-smc",
    "sim1c-adaptive",
    "sim2a",
    "sim2b",
    "sim2c",
];

/// The shipped scenario presets.
pub fn preset(name: &str) -> Option<Scenario> {
    let sc = match name {
        "sim1a-gradient" => sim1_base("sim1a-gradient", ControlLaw::Gradient, MotionProfile::Stationary),
        "sim1a-noisy" => {
            let mut sc = sim1_base("sim1a-noisy", ControlLaw::Gradient, MotionProfile::Stationary);
            sc.noise = sim1_noise();
            sc.horizon = 15.0;
            sc
        }
        "sim1a-finite" => {
            let mut sc = sim1_base(
                "sim1a-finite",
                ControlLaw::FiniteTime { exponent: 0.3 },
                MotionProfile::Stationary,
            );
            // the signed-power law needs a fine step to resolve settling
            sc.agent.start = StartSpec::RandomInBall;
            sc.dt = 2e-5;
            sc.record_stride = 500;
            sc
        }
        "sim1b" => sim1_base(
            "sim1b",
            ControlLaw::AdaptiveConstVelSi { k: 1.0 },
            MotionProfile::ConstantVel {
                velocity: Vector::xy(0.5, 0.8),
            },
        ),
        "sim1c-smc" => {
            let mut sc = sim1_base(
                "sim1c-smc",
                ControlLaw::SmcKnownBoundSi {
                    k: 1.0,
                    beta: 2.0,
                    phi: 1e-3,
                },
                sim1c_motion(),
            );
            sc.beacons.eta = Some(SQRT_2);
            sc.dt = 1e-4;
            sc.record_stride = 100;
            sc
        }
        "sim1c-adaptive" => {
            let mut sc = sim1_base(
                "sim1c-adaptive",
                ControlLaw::AdaptiveSmcSi {
                    k: 1.0,
                    k_beta: 2.0,
                    tau_beta: 0.1,
                    beta0: 1.0,
                    phi: 1e-3,
                },
                sim1c_motion(),
            );
            sc.beacons.eta = Some(SQRT_2);
            sc.agent.start = StartSpec::RandomInBall;
            sc.dt = 1e-4;
            sc.record_stride = 100;
            sc
        }
        "sim2a" => {
            let mut sc = sim2_base("sim2a", ControlLaw::PdDi { k: 1.0 }, MotionProfile::Stationary);
            sc.agent.start = StartSpec::RandomInBox {
                min: Vector::xyz(-5.0, -5.0, -5.0),
                max: Vector::xyz(5.0, 5.0, 5.0),
            };
            sc.horizon = 15.0;
            sc
        }
        "sim2b" => sim2_base(
            "sim2b",
            ControlLaw::AdaptiveConstVelDi { k1: 1.0, k2: 1.0 },
            MotionProfile::ConstantVel {
                velocity: Vector::xyz(0.5, 0.3, 0.4),
            },
        ),
        "sim2c" => {
            let mut sc = sim2_base(
                "sim2c",
                ControlLaw::SmcDi {
                    beta: 1.0,
                    phi: 1e-3,
                },
                MotionProfile::SinusoidVel {
                    offset: Vector::xyz(0.0, 1.0, 0.0),
                    amp: Vector::xyz(1.0, 0.0, 0.0),
                    freq: 0.5,
                    phase: vec![0.0, 0.0, 0.0],
                },
            );
            sc.agent.start = StartSpec::Explicit(Vector::xyz(-4.0, 4.0, 3.0));
            sc.dt = 1e-4;
            sc.record_stride = 100;
            sc
        }
        _ => return None,
    };
    Some(sc)
}

/// Resolves a CLI argument to a scenario: a preset name first, then a path.
pub fn resolve(input: &str) -> Result<Scenario> {
    if let Some(sc) = preset(input) {
        return Ok(sc);
    }
    let path = Path::new(input);
    if path.exists() {
        return load_scenario(path);
    }
    Err(Error::Schema(format!(
        "unknown scenario `{input}`: not a preset ({}) and no such file",
        PRESET_NAMES.join(", ")
    )))
}

/// Like [`resolve`], but skips the physical validation so diagnostic
/// commands can inspect fields that would be rejected (e.g. a field whose
/// optimum falls on a beacon).
pub fn resolve_lenient(input: &str) -> Result<Scenario> {
    if let Some(sc) = preset(input) {
        return Ok(sc);
    }
    let path = Path::new(input);
    if path.exists() {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        return parse_without_validation(&text);
    }
    Err(Error::Schema(format!(
        "unknown scenario `{input}`: not a preset ({}) and no such file",
        PRESET_NAMES.join(", ")
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_validate() {
        for name in PRESET_NAMES {
            let sc = preset(name).unwrap_or_else(|| panic!("missing preset {name}"));
            sc.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(sc.name, name);
        }
    }

    #[test]
    fn preset_values_match_published_setups() {
        let sc = preset("sim1a-gradient").unwrap();
        assert_eq!(sc.beacons.positions[0].as_slice(), &[1.0, 1.0]);
        assert_eq!(sc.beacons.positions[4].as_slice(), &[0.0, -2.0]);
        assert_eq!(sc.beacons.weights, vec![1.0; 6]);

        let sc = preset("sim1b").unwrap();
        match &sc.beacons.motion {
            MotionProfile::ConstantVel { velocity } => {
                assert_eq!(velocity.as_slice(), &[0.5, 0.8])
            }
            other => panic!("unexpected motion {other:?}"),
        }
        assert_eq!(sc.law, ControlLaw::AdaptiveConstVelSi { k: 1.0 });

        let sc = preset("sim2b").unwrap();
        assert_eq!(
            sc.agent.start,
            StartSpec::Explicit(Vector::xyz(5.0, 5.0, -3.0))
        );
        assert_eq!(sc.law, ControlLaw::AdaptiveConstVelDi { k1: 1.0, k2: 1.0 });

        let sc = preset("sim1c-adaptive").unwrap();
        assert_eq!(
            sc.law,
            ControlLaw::AdaptiveSmcSi {
                k: 1.0,
                k_beta: 2.0,
                tau_beta: 0.1,
                beta0: 1.0,
                phi: 1e-3
            }
        );

        let sc = preset("sim2c").unwrap();
        assert_eq!(sc.law, ControlLaw::SmcDi { beta: 1.0, phi: 1e-3 });
    }

    #[test]
    fn toml_round_trip_preserves_scenarios() {
        for name in PRESET_NAMES {
            let sc = preset(name).unwrap();
            let text = sc.to_toml().unwrap();
            let back = from_toml_str(&text).unwrap_or_else(|e| panic!("{name}: {e}\n{text}"));
            assert_eq!(sc, back, "round trip changed {name}");
        }
    }

    #[test]
    fn parse_schema_and_physics_errors_are_distinct() {
        // unparseable document
        assert!(matches!(
            from_toml_str("definitely not toml = ["),
            Err(Error::Parse(_))
        ));

        // parseable but schema-invalid
        assert!(matches!(
            from_toml_str("name = \"x\"\n"),
            Err(Error::Schema(_))
        ));

        // schema-valid but collinear beacons
        let mut sc = preset("sim1a-gradient").unwrap();
        sc.beacons.positions = vec![
            Vector::xy(0.0, 0.0),
            Vector::xy(1.0, 0.0),
            Vector::xy(2.0, 0.0),
            Vector::xy(3.0, 0.0),
            Vector::xy(4.0, 0.0),
            Vector::xy(5.0, 0.0),
        ];
        let text = sc.to_toml().unwrap();
        assert!(matches!(from_toml_str(&text), Err(Error::Physics(_))));
    }

    #[test]
    fn beta_must_exceed_velocity_bound() {
        let mut sc = preset("sim1c-smc").unwrap();
        sc.law = ControlLaw::SmcKnownBoundSi {
            k: 1.0,
            beta: 1.0,
            phi: 1e-3,
        };
        assert!(matches!(sc.validate(), Err(Error::Physics(_))));
    }

    #[test]
    fn relative_velocity_law_checks_accel_bound() {
        let mut sc = preset("sim2c").unwrap();
        sc.law = ControlLaw::SmcDi {
            beta: 0.4,
            phi: 1e-3,
        };
        // acceleration bound of the preset profile is 0.5
        assert!(matches!(sc.validate(), Err(Error::Physics(_))));
    }

    #[test]
    fn law_model_mismatch_is_schema_error() {
        let mut sc = preset("sim1a-gradient").unwrap();
        sc.agent.model = AgentModel::Double;
        assert!(matches!(sc.validate(), Err(Error::Schema(_))));
    }

    #[test]
    fn seeded_starts_are_reproducible() {
        let sc = preset("sim1a-finite").unwrap();
        let a = sc.initial_state().unwrap();
        let b = sc.initial_state().unwrap();
        assert_eq!(a.p, b.p);
        let mut sc2 = sc.clone();
        sc2.seed = 2;
        let c = sc2.initial_state().unwrap();
        assert_ne!(a.p, c.p);
    }

    #[test]
    fn ball_starts_stay_inside_safe_ball() {
        let sc = preset("sim1a-finite").unwrap();
        let gt = analysis::GroundTruth::for_field(&sc.beacons).unwrap();
        for seed in 0..50 {
            let mut sc2 = sc.clone();
            sc2.seed = seed;
            let st = sc2.initial_state().unwrap();
            assert!(st.p.dist(&gt.pstar0) < gt.ball_radius);
        }
    }
}
