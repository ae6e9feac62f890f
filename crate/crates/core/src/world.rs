//! Beacon motion, agent dynamics, the fixed-step simulation loop, and the
//! collision guard.
//!
//! The loop advances the coupled (position, velocity, controller-state) ODE
//! with classical fourth-order Runge-Kutta for smooth right-hand sides and
//! falls back to explicit Euler when a law carries an exact sign term.
//! Bearings are re-sampled at every integrator stage.

use serde::{Deserialize, Serialize};

use crate::analysis;
use crate::error::{Error, Result};
use crate::fw;
use crate::laws::{ControlLaw, ControllerState, Measurement, NoiseModel, StateDerivative};
use crate::scenario::{AgentModel, Scenario};
use crate::vecgeom::{bearing, objective, Bearing, Vector};

/// Minimum allowed agent-beacon distance; crossing it ends the run.
pub const EPS_GUARD: f64 = 1e-3;

/// Shared motion of the whole beacon set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MotionProfile {
    Stationary,
    ConstantVel {
        velocity: Vector,
    },
    /// `v*(t) = offset + amp ∘ sin(freq·t + phase)`, componentwise.
    SinusoidVel {
        offset: Vector,
        amp: Vector,
        freq: f64,
        phase: Vec<f64>,
    },
}

impl MotionProfile {
    pub fn is_stationary(&self) -> bool {
        matches!(self, MotionProfile::Stationary)
    }

    /// Common beacon velocity at time `t`.
    pub fn velocity(&self, t: f64, dim: usize) -> Vector {
        match self {
            MotionProfile::Stationary => Vector::zero(dim),
            MotionProfile::ConstantVel { velocity } => *velocity,
            MotionProfile::SinusoidVel {
                offset,
                amp,
                freq,
                phase,
            } => {
                let mut v = *offset;
                for k in 0..dim {
                    v = v.scaled_add((freq * t + phase[k]).sin() * amp[k], &unit(dim, k));
                }
                v
            }
        }
    }

    /// Closed-form `∫₀ᵗ v*(τ) dτ`.
    pub fn displacement(&self, t: f64, dim: usize) -> Vector {
        match self {
            MotionProfile::Stationary => Vector::zero(dim),
            MotionProfile::ConstantVel { velocity } => *velocity * t,
            MotionProfile::SinusoidVel {
                offset,
                amp,
                freq,
                phase,
            } => {
                let mut d = *offset * t;
                for k in 0..dim {
                    let s = (phase[k].cos() - (freq * t + phase[k]).cos()) / freq;
                    d = d.scaled_add(s * amp[k], &unit(dim, k));
                }
                d
            }
        }
    }

    /// Exact `sup_t ‖v*(t)‖_∞`, the bound the fixed-gain sliding law needs.
    pub fn velocity_bound(&self) -> f64 {
        match self {
            MotionProfile::Stationary => 0.0,
            MotionProfile::ConstantVel { velocity } => velocity.norm_linf(),
            MotionProfile::SinusoidVel { offset, amp, .. } => (0..offset.dim())
                .map(|k| offset[k].abs() + amp[k].abs())
                .fold(0.0, f64::max),
        }
    }

    /// Exact `sup_t ‖v̇*(t)‖_∞`, the bound the relative-velocity sliding
    /// law needs.
    pub fn accel_bound(&self) -> f64 {
        match self {
            MotionProfile::Stationary | MotionProfile::ConstantVel { .. } => 0.0,
            MotionProfile::SinusoidVel { amp, freq, .. } => freq.abs() * amp.norm_linf(),
        }
    }
}

fn unit(dim: usize, k: usize) -> Vector {
    let mut c = [0.0; 3];
    c[k] = 1.0;
    Vector::new(&c[..dim])
}

/// Positions, weights, and the shared motion of the beacon set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeaconField {
    pub positions: Vec<Vector>,
    pub weights: Vec<f64>,
    pub motion: MotionProfile,
    /// Declared velocity bound; defaults to the exact bound of `motion`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

impl BeaconField {
    pub fn stationary(positions: Vec<Vector>, weights: Vec<f64>) -> Self {
        BeaconField {
            positions,
            weights,
            motion: MotionProfile::Stationary,
            eta: None,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.positions[0].dim()
    }

    /// Declared or derived `sup_t ‖v*(t)‖_∞`.
    pub fn effective_eta(&self) -> f64 {
        self.eta.unwrap_or_else(|| self.motion.velocity_bound())
    }

    /// Structural validation; the optimality-margin check lives with the
    /// scenario validation because it needs the solver.
    pub fn validate(&self) -> Result<()> {
        let n = self.positions.len();
        if n < 3 {
            return Err(Error::Physics(format!("need at least 3 beacons, got {n}")));
        }
        let dim = self.positions[0].dim();
        if self.positions.iter().any(|p| p.dim() != dim) {
            return Err(Error::Schema("beacon positions mix dimensions".into()));
        }
        if self.weights.len() != n {
            return Err(Error::Schema(format!(
                "{} weights for {n} beacons",
                self.weights.len()
            )));
        }
        if self.weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::Physics("beacon weights must be positive".into()));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if self.positions[i].dist(&self.positions[j]) < 1e-9 {
                    return Err(Error::Physics(format!("beacons {i} and {j} are duplicates")));
                }
            }
        }
        if self.collinear() {
            return Err(Error::Physics(
                "beacon positions are collinear; the weighted distance sum has no unique \
                 interior minimum"
                    .into(),
            ));
        }
        match &self.motion {
            MotionProfile::SinusoidVel {
                offset,
                amp,
                freq,
                phase,
            } => {
                if offset.dim() != dim || amp.dim() != dim || phase.len() != dim {
                    return Err(Error::Schema(
                        "motion profile dimension does not match the beacons".into(),
                    ));
                }
                if *freq <= 0.0 {
                    return Err(Error::Physics("sinusoid frequency must be positive".into()));
                }
                if let Some(eta) = self.eta {
                    if eta + 1e-12 < self.motion.velocity_bound() {
                        return Err(Error::Physics(format!(
                            "declared velocity bound eta={eta} is below the profile's actual \
                             bound {}",
                            self.motion.velocity_bound()
                        )));
                    }
                }
            }
            MotionProfile::ConstantVel { velocity } => {
                if velocity.dim() != dim {
                    return Err(Error::Schema(
                        "motion profile dimension does not match the beacons".into(),
                    ));
                }
            }
            MotionProfile::Stationary => {}
        }
        Ok(())
    }

    /// Rank of the centered position matrix is below 2 when all beacons sit
    /// on one line (or one point).
    fn collinear(&self) -> bool {
        let n = self.positions.len() as f64;
        let mut mean = Vector::zero(self.dim());
        for p in &self.positions {
            mean = mean.scaled_add(1.0 / n, p);
        }
        // second moment matrix; rank >= 2 iff two nonzero eigenvalues
        let mut m = crate::vecgeom::Matrix::zero(self.dim());
        for p in &self.positions {
            let c = *p - mean;
            m.add_scaled(1.0, &crate::vecgeom::Matrix::outer(&c));
        }
        let eigs = m.sym_eigenvalues();
        let scale = eigs.last().copied().unwrap_or(0.0).max(1e-30);
        let rank = eigs.iter().filter(|e| **e > 1e-12 * scale).count();
        rank < 2
    }

    /// Beacon positions and their common velocity at time `t`.
    pub fn state_at(&self, t: f64) -> (Vec<Vector>, Vector) {
        let dim = self.dim();
        let shift = self.motion.displacement(t, dim);
        (
            self.positions.iter().map(|p| *p + shift).collect(),
            self.motion.velocity(t, dim),
        )
    }

    pub fn positions_at(&self, t: f64) -> Vec<Vector> {
        self.state_at(t).0
    }
}

/// Ground-truth optimum trajectory: solved once at `t = 0` and advected by
/// the shared beacon velocity.
pub fn moving_optimum(field: &BeaconField, t: f64) -> Result<Vector> {
    let sol = fw::weiszfeld_default(&field.positions, &field.weights);
    if !sol.converged {
        return Err(Error::Solver(format!(
            "reference solve did not converge (residual {})",
            sol.residual
        )));
    }
    Ok(sol.point + field.motion.displacement(t, field.dim()))
}

/// Agent state plus controller internals at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentState {
    pub p: Vector,
    /// Present iff the agent is a double integrator.
    pub v: Option<Vector>,
    pub controller: ControllerState,
    pub t: f64,
}

/// One recorded trajectory sample with its diagnostics.
#[derive(Clone, Debug)]
pub struct Sample {
    pub t: f64,
    pub p: Vector,
    pub v: Option<Vector>,
    pub u: Vector,
    pub v_hat: Option<Vector>,
    pub beta: Option<f64>,
    pub q: Option<Vector>,
    /// Tracking error `p - p*(t)`.
    pub delta: Vector,
    /// Objective value at `p`.
    pub f: f64,
    /// Certificate function value for the active law's theorem.
    pub lyap: f64,
    pub min_dist: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Collision {
    pub time: f64,
    pub beacon: usize,
}

/// Time-indexed record of a run.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub dim: usize,
    pub dt: f64,
    pub record_stride: usize,
    pub samples: Vec<Sample>,
    /// Set when the run terminated on the collision guard.
    pub collision: Option<Collision>,
}

impl Trajectory {
    pub fn final_sample(&self) -> &Sample {
        self.samples.last().expect("trajectory has samples")
    }

    pub fn delta_norms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.samples.iter().map(|s| (s.t, s.delta.norm()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Integrator {
    Rk4,
    Euler,
}

impl Integrator {
    /// Policy: Runge-Kutta for smooth right-hand sides, Euler once a law
    /// carries an exact (discontinuous) sign term.
    pub fn for_law(law: &ControlLaw) -> Integrator {
        if law.is_discontinuous() {
            Integrator::Euler
        } else {
            Integrator::Rk4
        }
    }
}

/// Flattened ODE state the integrator advances.
#[derive(Clone)]
struct OdeState {
    p: Vector,
    v: Option<Vector>,
    ctrl: ControllerState,
}

#[derive(Clone)]
struct OdeDeriv {
    dp: Vector,
    dv: Option<Vector>,
    dctrl: StateDerivative,
}

fn add_scaled(s: &OdeState, d: &OdeDeriv, h: f64) -> OdeState {
    OdeState {
        p: s.p.scaled_add(h, &d.dp),
        v: s.v.map(|v| v.scaled_add(h, d.dv.as_ref().expect("dv present for DI"))),
        ctrl: ControllerState {
            v_hat: s
                .ctrl
                .v_hat
                .map(|x| x.scaled_add(h, d.dctrl.v_hat.as_ref().expect("v_hat derivative"))),
            beta: s.ctrl.beta.map(|b| b + h * d.dctrl.beta.expect("beta derivative")),
            q: s
                .ctrl
                .q
                .map(|x| x.scaled_add(h, d.dctrl.q.as_ref().expect("q derivative"))),
        },
    }
}

/// Per-stage evaluation context shared by `step` and `simulate`.
pub(crate) struct Plant<'a> {
    pub field: &'a BeaconField,
    pub law: &'a ControlLaw,
    pub noise: &'a NoiseModel,
    pub model: AgentModel,
}

/// Control input, state derivative, and nearest-beacon info at one stage.
struct StageEval {
    deriv: OdeDeriv,
    u: Vector,
    min_dist: f64,
    nearest: usize,
}

impl Plant<'_> {
    fn measurement(&self, p: &Vector, v: Option<&Vector>, t: f64) -> (Measurement, f64, usize) {
        let (positions, v_star) = self.field.state_at(t);
        let mut min_dist = f64::INFINITY;
        let mut nearest = 0;
        let bearings: Vec<Bearing> = positions
            .iter()
            .enumerate()
            .map(|(i, pi)| {
                let d = p.dist(pi);
                if d < min_dist {
                    min_dist = d;
                    nearest = i;
                }
                self.noise.apply(i, &bearing(p, pi), t)
            })
            .collect();
        let meas = Measurement {
            bearings,
            own_velocity: if self.model == AgentModel::Double {
                v.copied()
            } else {
                None
            },
            relative_velocity: if self.law.needs_relative_velocity() {
                Some(*v.expect("relative velocity needs own velocity") - v_star)
            } else {
                None
            },
            time: t,
        };
        (meas, min_dist, nearest)
    }

    fn eval(&self, s: &OdeState, t: f64) -> StageEval {
        let (meas, min_dist, nearest) = self.measurement(&s.p, s.v.as_ref(), t);
        let out = self.law.eval(&meas, &s.ctrl, &self.field.weights);
        let deriv = match self.model {
            AgentModel::Single => OdeDeriv {
                dp: out.u,
                dv: None,
                dctrl: out.dstate.clone(),
            },
            AgentModel::Double => OdeDeriv {
                dp: s.v.expect("double integrator has velocity"),
                dv: Some(out.u),
                dctrl: out.dstate.clone(),
            },
        };
        StageEval {
            deriv,
            u: out.u,
            min_dist,
            nearest,
        }
    }
}

/// Outcome of one integration step.
#[derive(Clone, Debug)]
pub enum StepOutcome {
    Ok(AgentState),
    Collision(Collision),
}

/// Advances the agent one step of `dt`. Bearings are re-sampled at every
/// stage, and the collision guard is checked at every stage as well.
pub fn step(
    state: &AgentState,
    law: &ControlLaw,
    field: &BeaconField,
    noise: &NoiseModel,
    model: AgentModel,
    dt: f64,
    integrator: Integrator,
) -> StepOutcome {
    let plant = Plant {
        field,
        law,
        noise,
        model,
    };
    step_inner(&plant, state, dt, integrator)
}

fn step_inner(plant: &Plant, state: &AgentState, dt: f64, integrator: Integrator) -> StepOutcome {
    let s0 = OdeState {
        p: state.p,
        v: state.v,
        ctrl: state.controller.clone(),
    };
    let t = state.t;

    let guard = |e: &StageEval, at: f64| -> Option<Collision> {
        (e.min_dist < EPS_GUARD).then_some(Collision {
            time: at,
            beacon: e.nearest,
        })
    };

    let next = match integrator {
        Integrator::Euler => {
            let e1 = plant.eval(&s0, t);
            if let Some(c) = guard(&e1, t) {
                return StepOutcome::Collision(c);
            }
            add_scaled(&s0, &e1.deriv, dt)
        }
        Integrator::Rk4 => {
            let e1 = plant.eval(&s0, t);
            if let Some(c) = guard(&e1, t) {
                return StepOutcome::Collision(c);
            }
            let s2 = add_scaled(&s0, &e1.deriv, dt / 2.0);
            let e2 = plant.eval(&s2, t + dt / 2.0);
            if let Some(c) = guard(&e2, t + dt / 2.0) {
                return StepOutcome::Collision(c);
            }
            let s3 = add_scaled(&s0, &e2.deriv, dt / 2.0);
            let e3 = plant.eval(&s3, t + dt / 2.0);
            if let Some(c) = guard(&e3, t + dt / 2.0) {
                return StepOutcome::Collision(c);
            }
            let s4 = add_scaled(&s0, &e3.deriv, dt);
            let e4 = plant.eval(&s4, t + dt);
            if let Some(c) = guard(&e4, t + dt) {
                return StepOutcome::Collision(c);
            }
            // y + (k1 + 2 k2 + 2 k3 + k4) dt / 6
            let mut acc = s0.clone();
            acc = add_scaled(&acc, &e1.deriv, dt / 6.0);
            acc = add_scaled(&acc, &e2.deriv, dt / 3.0);
            acc = add_scaled(&acc, &e3.deriv, dt / 3.0);
            acc = add_scaled(&acc, &e4.deriv, dt / 6.0);
            acc
        }
    };

    StepOutcome::Ok(AgentState {
        p: next.p,
        v: next.v,
        controller: next.ctrl,
        t: t + dt,
    })
}

/// Runs a validated scenario to its horizon (or to the collision guard),
/// recording diagnostics every `record_stride` steps.
pub fn simulate(scenario: &Scenario) -> Result<Trajectory> {
    let field = &scenario.beacons;
    let law = &scenario.law;
    let plant = Plant {
        field,
        law,
        noise: &scenario.noise,
        model: scenario.agent.model,
    };
    let integrator = Integrator::for_law(law);
    let gt = analysis::GroundTruth::new(scenario)?;
    let theorem = analysis::theorem_for(law, !scenario.noise.is_none());

    let start = scenario.initial_state()?;
    let dt = scenario.dt;
    let nsteps = (scenario.horizon / dt).round().max(0.0) as usize;
    let stride = scenario.record_stride.max(1);

    let mut samples = Vec::with_capacity(nsteps / stride + 2);
    let mut collision = None;
    let mut state = start;

    for k in 0..=nsteps {
        // diagnostics at the current state
        let s0 = OdeState {
            p: state.p,
            v: state.v,
            ctrl: state.controller.clone(),
        };
        let eval = plant.eval(&s0, state.t);
        if k % stride == 0 || k == nsteps {
            samples.push(make_sample(scenario, &gt, theorem, &state, &eval));
        }
        if k == nsteps {
            break;
        }
        match step_inner(&plant, &state, dt, integrator) {
            StepOutcome::Ok(next) => state = next,
            StepOutcome::Collision(c) => {
                if samples.last().map(|s: &Sample| s.t) != Some(state.t) {
                    samples.push(make_sample(scenario, &gt, theorem, &state, &eval));
                }
                collision = Some(c);
                break;
            }
        }
    }

    Ok(Trajectory {
        dim: field.dim(),
        dt,
        record_stride: stride,
        samples,
        collision,
    })
}

fn make_sample(
    scenario: &Scenario,
    gt: &analysis::GroundTruth,
    theorem: analysis::Certificate,
    state: &AgentState,
    eval: &StageEval,
) -> Sample {
    let field = &scenario.beacons;
    let positions = field.positions_at(state.t);
    let p_star = gt.optimum_at(field, state.t);
    Sample {
        t: state.t,
        p: state.p,
        v: state.v,
        u: eval.u,
        v_hat: state.controller.v_hat,
        beta: state.controller.beta,
        q: state.controller.q,
        delta: state.p - p_star,
        f: objective(&state.p, &positions, &field.weights),
        lyap: analysis::lyap_value(theorem, state, scenario, gt),
        min_dist: eval.min_dist,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario;

    #[test]
    fn stationary_profile_is_constant() {
        let f = scenario::preset("sim1a-gradient").unwrap().beacons;
        let (p0, v0) = f.state_at(0.0);
        let (p1, v1) = f.state_at(7.5);
        assert_eq!(p0, p1);
        assert_eq!(v0.norm(), 0.0);
        assert_eq!(v1.norm(), 0.0);
    }

    #[test]
    fn constant_profile_shifts_linearly() {
        let f = scenario::preset("sim1b").unwrap().beacons;
        let (p10, v) = f.state_at(10.0);
        assert_eq!(v.as_slice(), &[0.5, 0.8]);
        let expect = f.positions[0] + Vector::xy(5.0, 8.0);
        assert!((p10[0] - expect).norm() < 1e-12);
    }

    #[test]
    fn sinusoid_profile_matches_closed_forms() {
        let f = scenario::preset("sim1c-smc").unwrap().beacons;
        let r2 = 2.0f64.sqrt();
        for t in [0.0, 0.3, 1.7, 9.9] {
            let v = f.motion.velocity(t, 2);
            assert!((v[0] - (1.0 - (2.0 * t).sin()) / r2).abs() < 1e-12);
            assert!((v[1] - (1.0 + (2.0 * t).sin()) / r2).abs() < 1e-12);
        }
        // velocity bound is sqrt(2) per component
        assert!((f.motion.velocity_bound() - r2).abs() < 1e-12);
    }

    #[test]
    fn sim2c_displacement_closed_form() {
        let f = scenario::preset("sim2c").unwrap().beacons;
        for t in [0.0, 1.0, 12.5] {
            let d = f.motion.displacement(t, 3);
            assert!((d[0] - 2.0 * (1.0 - (t / 2.0).cos())).abs() < 1e-12);
            assert!((d[1] - t).abs() < 1e-12);
            assert_eq!(d[2], 0.0);
        }
        assert!((f.motion.accel_bound() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn moving_optimum_advects_hexagon_center() {
        let f = scenario::preset("sim1b").unwrap().beacons;
        let p = moving_optimum(&f, 10.0).unwrap();
        assert!((p - Vector::xy(5.0, 8.0)).norm() < 1e-8);
    }

    #[test]
    fn collinear_field_rejected() {
        let f = BeaconField::stationary(
            vec![Vector::xy(0., 0.), Vector::xy(1., 0.), Vector::xy(2., 0.)],
            vec![1.0; 3],
        );
        assert!(matches!(f.validate(), Err(Error::Physics(_))));
    }

    #[test]
    fn equilibrium_start_stays_put() {
        let sc = scenario::preset("sim1a-gradient").unwrap();
        let state = AgentState {
            p: Vector::xy(0.0, 0.0),
            v: None,
            controller: ControllerState::default(),
            t: 0.0,
        };
        let out = step(
            &state,
            &sc.law,
            &sc.beacons,
            &sc.noise,
            AgentModel::Single,
            0.1,
            Integrator::Rk4,
        );
        match out {
            StepOutcome::Ok(next) => assert!(next.p.norm() < 1e-12),
            StepOutcome::Collision(_) => panic!("no collision expected"),
        }
    }

    #[test]
    fn single_euler_step_is_p_plus_dt_wsum() {
        let sc = scenario::preset("sim1a-gradient").unwrap();
        let p0 = Vector::xy(2.0, 0.0);
        let state = AgentState {
            p: p0,
            v: None,
            controller: ControllerState::default(),
            t: 0.0,
        };
        let out = step(
            &state,
            &sc.law,
            &sc.beacons,
            &sc.noise,
            AgentModel::Single,
            0.1,
            Integrator::Euler,
        );
        let ws = crate::laws::wsum(
            &sc.beacons
                .positions
                .iter()
                .map(|b| bearing(&p0, b))
                .collect::<Vec<_>>(),
            &sc.beacons.weights,
        );
        match out {
            StepOutcome::Ok(next) => {
                assert!((next.p - (p0 + ws * 0.1)).norm() < 1e-15);
                assert_eq!(next.t, 0.1);
            }
            StepOutcome::Collision(_) => panic!("no collision expected"),
        }
    }

    #[test]
    fn collision_guard_fires_next_to_a_beacon() {
        let sc = scenario::preset("sim1a-gradient").unwrap();
        let state = AgentState {
            p: Vector::xy(1.0, 1.0 - 0.5 * EPS_GUARD),
            v: None,
            controller: ControllerState::default(),
            t: 0.0,
        };
        let out = step(
            &state,
            &sc.law,
            &sc.beacons,
            &sc.noise,
            AgentModel::Single,
            0.001,
            Integrator::Rk4,
        );
        match out {
            StepOutcome::Collision(c) => assert_eq!(c.beacon, 0),
            StepOutcome::Ok(_) => panic!("guard should fire"),
        }
    }
}
