//! Symplectic midpoint integration of the constrained equations of motion.
//!
//! One step solves, for `x = (q̌_{k+1}, λ_s)`,
//!
//! ```text
//! −h p̌_k + Ḿ(q_{k+1} − q_k) − (h²/2) F̌_{k+1/2} − Ǎᵀ(q_k) λ_s = 0
//! Φ̌(q_{k+1}) = 0
//! ```
//!
//! by Newton–Raphson, where `λ_s = (h²/2) λ` is the scaled multiplier, and
//! then updates the momentum explicitly:
//!
//! ```text
//! p̌_{k+1} = Ḿ(q_{k+1} − q_k)/h + (h/2) F̌_{k+1/2} + Ǎᵀ(q_{k+1}) λ_s / h.
//! ```
//!
//! Forces are evaluated at `q_{k+1/2} = (q_k + q_{k+1})/2`,
//! `q̇_{k+1/2} = (q_{k+1} − q_k)/h` and `t_{k+1/2}`. Prescribed coordinates
//! are set from their motion laws at `t_{k+1}` before the solve.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::forces::{CableState, DerivativeForm, Structure};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Timestep `h` in seconds.
    pub h: f64,
    /// Maximum Newton iterations per step.
    pub max_iterations: usize,
    /// Tolerance on `‖Res‖∞`.
    pub tol: f64,
    pub derivative_form: DerivativeForm,
    /// Retry a step that fails after a slack/taut switch as two half steps.
    pub substep_on_chatter: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            h: 1e-3,
            max_iterations: 30,
            tol: 1e-12,
            derivative_form: DerivativeForm::Exact,
            substep_on_chatter: true,
        }
    }
}

impl SolverSettings {
    pub fn with_step(h: f64) -> Self {
        SolverSettings {
            h,
            ..Default::default()
        }
    }
}

/// State at one time point.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub t: f64,
    /// All coordinates.
    pub q: DVector<f64>,
    /// Generalized momenta of the free coordinates.
    pub p: DVector<f64>,
    /// All velocities (free ones recovered from `p`, prescribed ones exact).
    pub qdot: DVector<f64>,
}

/// Diagnostics of one accepted step.
#[derive(Debug, Clone, Default)]
pub struct StepReport {
    pub iterations: usize,
    pub residual: f64,
    pub substepped: bool,
    /// Scaled multipliers `λ_s` of the last (sub)step.
    pub scaled_multipliers: DVector<f64>,
}

/// The integrator for one structure.
#[derive(Debug, Clone)]
pub struct Integrator<'a> {
    structure: &'a Structure,
    settings: SolverSettings,
    free_mass: DMatrix<f64>,
    coupling_mass: DMatrix<f64>,
    /// `Ḿ = ĚᵀM`.
    free_rows: DMatrix<f64>,
    mass_factor: Cholesky<f64, Dyn>,
}

impl<'a> Integrator<'a> {
    pub fn new(structure: &'a Structure, settings: SolverSettings) -> Result<Self> {
        if !(settings.h > 0.0 && settings.tol > 0.0) {
            return Err(Error::Scenario(
                "timestep and tolerance must be positive".into(),
            ));
        }
        let topo = structure.topology();
        let free_mass = topo.free_mass();
        let mass_factor = free_mass.clone().cholesky().ok_or(Error::IndefiniteMass)?;
        let m = topo.mass_matrix();
        let free_rows = DMatrix::from_fn(topo.n_free(), topo.n(), |i, j| m[(topo.free_indices()[i], j)]);
        Ok(Integrator {
            structure,
            settings,
            free_mass,
            coupling_mass: topo.coupling_mass(),
            free_rows,
            mass_factor,
        })
    }

    pub fn settings(&self) -> &SolverSettings {
        &self.settings
    }

    pub fn structure(&self) -> &Structure {
        self.structure
    }

    /// Initial state from coordinates and velocities; prescribed entries are
    /// overwritten by their motion laws at `t`. Returns the state and
    /// `‖Φ̌̇‖∞`, the violation of velocity-level consistency (which is
    /// reported, not corrected).
    pub fn initial_state(
        &self,
        q0: &DVector<f64>,
        qdot0: &DVector<f64>,
        t: f64,
    ) -> Result<(SystemState, f64)> {
        let topo = self.structure.topology();
        if q0.len() != topo.n() || qdot0.len() != topo.n() {
            return Err(Error::DimensionMismatch {
                expected: topo.n(),
                got: q0.len().min(qdot0.len()),
                context: "initial state",
            });
        }
        let [qp, vp, _] = topo.prescribed_motion(t);
        let mut q = q0.clone();
        let mut qdot = qdot0.clone();
        topo.scatter_prescribed(&mut q, &qp);
        topo.scatter_prescribed(&mut qdot, &vp);
        let p = &self.free_rows * &qdot;
        // Φ̌ is quadratic, so the central difference is exact.
        let speed = qdot.amax();
        let drift = if speed == 0.0 || topo.n_constraints() == 0 {
            0.0
        } else {
            let eps = 1e-3 / speed;
            let d = (topo.constraints(&(&q + &qdot * eps)) - topo.constraints(&(&q - &qdot * eps)))
                / (2.0 * eps);
            linalg::inf_norm(&d)
        };
        Ok((SystemState { t, q, p, qdot }, drift))
    }

    /// Free velocities from momenta: `q̌̇ = M̌⁻¹(p̌ − M̄ q̃̇)`.
    pub fn recover_velocity(&self, p: &DVector<f64>, prescribed_velocity: &DVector<f64>) -> DVector<f64> {
        let rhs = p - &self.coupling_mass * prescribed_velocity;
        self.mass_factor.solve(&rhs)
    }

    /// The Newton residual and Jacobian at a trial `q_{k+1}` and `λ_s`.
    pub fn residual_and_jacobian(
        &self,
        state: &SystemState,
        h: f64,
        q_next: &DVector<f64>,
        lambda: &DVector<f64>,
    ) -> Result<(DVector<f64>, DMatrix<f64>, Vec<CableState>)> {
        let s = self.structure;
        let topo = s.topology();
        let nf = topo.n_free();
        let nc = topo.n_constraints();
        let dq = q_next - &state.q;
        let q_mid = (&state.q + q_next) * 0.5;
        let v_mid = &dq / h;
        let t_mid = state.t + 0.5 * h;
        let (force, states) = s.force(&q_mid, &v_mid, t_mid)?;
        let a_k = topo.constraint_jacobian(&state.q);
        let h2 = 0.5 * h * h;

        let mut res = DVector::zeros(nf + nc);
        let top = -&state.p * h + &self.free_rows * &dq - &force * h2 - a_k.tr_mul(lambda);
        res.rows_mut(0, nf).copy_from(&top);
        res.rows_mut(nf, nc).copy_from(&topo.constraints(q_next));

        let (kq, kv) = s.tension_derivatives(&states, self.settings.derivative_form);
        let mut jac = DMatrix::zeros(nf + nc, nf + nc);
        let dfdq = kq * 0.5 + kv * (1.0 / h);
        jac.view_mut((0, 0), (nf, nf))
            .copy_from(&(&self.free_mass - dfdq * h2));
        jac.view_mut((0, nf), (nf, nc)).copy_from(&(-a_k.transpose()));
        jac.view_mut((nf, 0), (nc, nf))
            .copy_from(&topo.constraint_jacobian(q_next));
        Ok((res, jac, states))
    }

    /// Advances `state` by one step of size `settings.h`.
    pub fn step(&self, state: &SystemState) -> Result<(SystemState, StepReport)> {
        match self.step_with(state, self.settings.h) {
            Ok(r) => Ok(r),
            Err((err, switched)) => {
                if !(switched && self.settings.substep_on_chatter) {
                    return Err(err);
                }
                let half = 0.5 * self.settings.h;
                let (mid, r1) = self.step_with(state, half).map_err(|e| e.0)?;
                let (end, r2) = self.step_with(&mid, half).map_err(|e| e.0)?;
                Ok((
                    end,
                    StepReport {
                        iterations: r1.iterations + r2.iterations,
                        residual: r1.residual.max(r2.residual),
                        substepped: true,
                        scaled_multipliers: r2.scaled_multipliers,
                    },
                ))
            }
        }
    }

    /// One step of size `h`. On failure also reports whether any cable
    /// changed its slack status during the iteration.
    fn step_with(
        &self,
        state: &SystemState,
        h: f64,
    ) -> std::result::Result<(SystemState, StepReport), (Error, bool)> {
        let topo = self.structure.topology();
        let nf = topo.n_free();
        let nc = topo.n_constraints();
        let t_next = state.t + h;
        let [qp, vp, _] = topo.prescribed_motion(t_next);

        let mut q_next = state.q.clone();
        topo.scatter_prescribed(&mut q_next, &qp);
        let mut lambda = DVector::zeros(nc);
        let mut pattern: Option<Vec<bool>> = None;
        let mut switched = false;
        let mut residual = f64::INFINITY;

        for iter in 0..=self.settings.max_iterations {
            let (res, jac, states) = self
                .residual_and_jacobian(state, h, &q_next, &lambda)
                .map_err(|e| (e, switched))?;
            let slack: Vec<bool> = states.iter().map(|c| c.slack).collect();
            if let Some(prev) = &pattern {
                switched |= *prev != slack;
            }
            pattern = Some(slack);
            residual = linalg::inf_norm(&res);
            if residual <= self.settings.tol {
                let next = self.finish(state, h, q_next, &lambda, &vp).map_err(|e| (e, switched))?;
                return Ok((
                    next,
                    StepReport {
                        iterations: iter,
                        residual,
                        substepped: false,
                        scaled_multipliers: lambda,
                    },
                ));
            }
            if iter == self.settings.max_iterations {
                break;
            }
            let lu = jac.lu();
            let dx = match lu.solve(&(-&res)) {
                Some(dx) if dx.iter().all(|v| v.is_finite()) => dx,
                _ => {
                    let u = lu.u();
                    let d = u.diagonal().map(f64::abs);
                    let rcond = d.min() / d.max().max(f64::MIN_POSITIVE);
                    return Err((Error::SingularJacobian { rcond }, switched));
                }
            };
            let qf = topo.gather_free(&q_next) + dx.rows(0, nf);
            topo.scatter_free(&mut q_next, &qf);
            lambda += dx.rows(nf, nc);
        }
        Err((
            Error::NonConvergence {
                iterations: self.settings.max_iterations,
                residual,
            },
            switched,
        ))
    }

    fn finish(
        &self,
        state: &SystemState,
        h: f64,
        q_next: DVector<f64>,
        lambda: &DVector<f64>,
        prescribed_velocity: &DVector<f64>,
    ) -> Result<SystemState> {
        let s = self.structure;
        let topo = s.topology();
        let dq = &q_next - &state.q;
        let q_mid = (&state.q + &q_next) * 0.5;
        let (force, _) = s.force(&q_mid, &(&dq / h), state.t + 0.5 * h)?;
        let a_next = topo.constraint_jacobian(&q_next);
        let p = &self.free_rows * &dq / h + force * (0.5 * h) + a_next.tr_mul(lambda) / h;
        let vf = self.recover_velocity(&p, prescribed_velocity);
        let mut qdot = DVector::zeros(topo.n());
        topo.scatter_free(&mut qdot, &vf);
        topo.scatter_prescribed(&mut qdot, prescribed_velocity);
        Ok(SystemState {
            t: state.t + h,
            q: q_next,
            p,
            qdot,
        })
    }

    /// Integrates for `duration` seconds, recording every `record_every`-th
    /// step (and the first and last). `observer` sees every accepted state.
    pub fn simulate_with<F>(
        &self,
        initial: SystemState,
        duration: f64,
        record_every: usize,
        mut observer: F,
    ) -> Trajectory
    where
        F: FnMut(&SystemState),
    {
        let s = self.structure;
        let topo = s.topology();
        let steps = (duration / self.settings.h).round() as usize;
        let every = record_every.max(1);
        let mut traj = Trajectory::default();
        let mut state = initial;
        let t0 = state.t;
        let mut prev_slack: Option<Vec<bool>> = None;
        traj.max_constraint_violation = linalg::inf_norm(&topo.constraints(&state.q));
        if let Err(e) = traj.record(s, &state, &mut prev_slack) {
            traj.failure = Some(e);
            return traj;
        }
        observer(&state);
        for k in 0..steps {
            match self.step(&state) {
                Ok((next, report)) => {
                    state = next;
                    // Keep grid times free of accumulated round-off.
                    state.t = t0 + (k + 1) as f64 * self.settings.h;
                    traj.steps += 1;
                    traj.newton_iterations += report.iterations;
                    if report.substepped {
                        traj.substeps += 1;
                    }
                    let phi = linalg::inf_norm(&topo.constraints(&state.q));
                    traj.max_constraint_violation = traj.max_constraint_violation.max(phi);
                    observer(&state);
                    let record = (k + 1) % every == 0 || k + 1 == steps;
                    let slack_change = traj.track_slack(s, &state, &mut prev_slack);
                    if let Err(e) = slack_change {
                        traj.failure = Some(e);
                        break;
                    }
                    if record {
                        if let Err(e) = traj.record(s, &state, &mut None) {
                            traj.failure = Some(e);
                            break;
                        }
                    }
                }
                Err(e) => {
                    traj.failure = Some(e);
                    break;
                }
            }
        }
        traj.final_state = Some(state);
        traj
    }

    pub fn simulate(&self, initial: SystemState, duration: f64, record_every: usize) -> Trajectory {
        self.simulate_with(initial, duration, record_every, |_| {})
    }
}

/// A cable changing between slack and taut at an accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct SlackEvent {
    pub t: f64,
    pub cable: usize,
    pub slack: bool,
}

/// A sampled trajectory.
#[derive(Debug, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub q: Vec<DVector<f64>>,
    pub qdot: Vec<DVector<f64>>,
    pub energy: Vec<f64>,
    pub cable_lengths: Vec<Vec<f64>>,
    pub tensions: Vec<Vec<f64>>,
    pub slack: Vec<Vec<bool>>,
    pub slack_events: Vec<SlackEvent>,
    pub steps: usize,
    pub newton_iterations: usize,
    pub substeps: usize,
    /// Largest `‖Φ̌‖∞` over all accepted steps.
    pub max_constraint_violation: f64,
    pub final_state: Option<SystemState>,
    /// Set when a step failed; the trajectory holds everything before it.
    pub failure: Option<Error>,
}

impl Trajectory {
    fn record(
        &mut self,
        s: &Structure,
        state: &SystemState,
        prev_slack: &mut Option<Vec<bool>>,
    ) -> Result<()> {
        let cables = s.cable_states(&state.q, &state.qdot, state.t)?;
        self.times.push(state.t);
        self.q.push(state.q.clone());
        self.qdot.push(state.qdot.clone());
        self.energy.push(s.energy(&state.q, &state.qdot, state.t));
        self.cable_lengths.push(cables.iter().map(|c| c.length).collect());
        self.tensions.push(cables.iter().map(|c| c.tension).collect());
        let slack: Vec<bool> = cables.iter().map(|c| c.slack).collect();
        if prev_slack.is_none() {
            *prev_slack = Some(slack.clone());
        }
        self.slack.push(slack);
        Ok(())
    }

    fn track_slack(
        &mut self,
        s: &Structure,
        state: &SystemState,
        prev: &mut Option<Vec<bool>>,
    ) -> Result<()> {
        if s.cables.is_empty() {
            return Ok(());
        }
        let cables = s.cable_states(&state.q, &state.qdot, state.t)?;
        let now: Vec<bool> = cables.iter().map(|c| c.slack).collect();
        if let Some(before) = prev.as_ref() {
            for (j, (&a, &b)) in before.iter().zip(&now).enumerate() {
                if a != b {
                    self.slack_events.push(SlackEvent {
                        t: state.t,
                        cable: j,
                        slack: b,
                    });
                }
            }
        }
        *prev = Some(now);
        Ok(())
    }

    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{Motion, Slot, TopologyBuilder};
    use crate::forces::{LoadSet, PointLoad};
    use crate::assembly::Attachment;
    use crate::members::{MemberTemplate, Tag};
    use std::sync::Arc;

    fn falling_bar() -> Structure {
        let tpl = Arc::new(MemberTemplate::bar(Tag::Rr, 2, 2.0, 1.0, 2.0 / 12.0).unwrap());
        let mut b = TopologyBuilder::new(2);
        let q = DVector::from_vec(vec![0.0, 0.0, 1.0, 0.0]);
        let bar = b.add_member("bar", tpl.clone(), &q, vec![Slot::New, Slot::New]).unwrap();
        let topo = b.build().unwrap();
        let mut loads = LoadSet::none(2);
        loads.point_loads.push(PointLoad {
            at: Attachment::Member {
                member: bar,
                point: tpl.mass_center().clone(),
            },
            force: DVector::from_vec(vec![0.3, -1.1]),
        });
        Structure::new(topo, vec![], loads).unwrap()
    }

    #[test]
    fn constant_force_motion_is_exact() {
        let s = falling_bar();
        let int = Integrator::new(&s, SolverSettings::with_step(0.01)).unwrap();
        let q0 = s.topology().reference_configuration();
        let v = DVector::from_vec(vec![0.5, 0.2, 0.5, 0.2]);
        let (mut st, drift) = int.initial_state(&q0, &v, 0.0).unwrap();
        assert!(drift < 1e-12);
        let acc = [0.3 / 2.0, -1.1 / 2.0];
        for _ in 0..50 {
            st = int.step(&st).unwrap().0;
        }
        let t = st.t;
        for node in 0..2 {
            for d in 0..2 {
                let exact = q0[node * 2 + d] + v[d] * t + 0.5 * acc[d] * t * t;
                let err = (st.q[node * 2 + d] - exact).abs();
                assert!(err < 1e-12 * (1.0 + exact.abs()), "{err:e}");
            }
        }
    }

    #[test]
    fn pendulum_stays_on_constraint_and_conserves_energy() {
        let tpl = Arc::new(MemberTemplate::bar(Tag::Rr, 2, 1.0, 1.0, 1.0 / 12.0).unwrap());
        let mut b = TopologyBuilder::new(2);
        let q = DVector::from_vec(vec![0.0, 0.0, 1.0, 0.0]);
        b.add_member("bar", tpl, &q, vec![Slot::Prescribed(Motion::Fixed), Slot::New])
            .unwrap();
        let s = Structure::new(b.build().unwrap(), vec![], LoadSet::gravity(2, 9.8)).unwrap();
        let int = Integrator::new(&s, SolverSettings::with_step(1e-3)).unwrap();
        let (st, _) = int.initial_state(&q, &DVector::zeros(4), 0.0).unwrap();
        let traj = int.simulate(st, 2.0, 10);
        assert!(traj.completed(), "{:?}", traj.failure);
        assert!(traj.max_constraint_violation <= 1e-10);
        let e0 = traj.energy[0];
        let worst = traj.energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-3 * 4.9, "energy error {worst}");
    }

    #[test]
    fn reversing_momentum_retraces_the_path() {
        let tpl = Arc::new(MemberTemplate::bar(Tag::Rr, 2, 1.0, 1.0, 1.0 / 12.0).unwrap());
        let mut b = TopologyBuilder::new(2);
        let q = DVector::from_vec(vec![0.0, 0.0, 1.0, 0.0]);
        b.add_member("bar", tpl, &q, vec![Slot::Prescribed(Motion::Fixed), Slot::New])
            .unwrap();
        let s = Structure::new(b.build().unwrap(), vec![], LoadSet::gravity(2, 9.8)).unwrap();
        let int = Integrator::new(&s, SolverSettings::with_step(1e-3)).unwrap();
        let (mut st, _) = int.initial_state(&q, &DVector::zeros(4), 0.0).unwrap();
        for _ in 0..300 {
            st = int.step(&st).unwrap().0;
        }
        st.p = -st.p;
        st.qdot = -st.qdot;
        for _ in 0..300 {
            st = int.step(&st).unwrap().0;
        }
        assert!((st.q - q).amax() < 1e-8);
    }
}
