//! Static equilibrium: residuals, multiplier recovery and inverse statics.
//!
//! With `q̇ = 0` the equations of motion reduce to
//!
//! ```text
//! −F̌(q) − Ǎᵀ(q) λ = 0,    Φ̌(q) = 0.
//! ```
//!
//! Projecting the first equation onto the nullspace basis `Ň` of `Ǎ`
//! eliminates `λ`, and because the tension force is linear in the force
//! densities `γ_j = f_j / l_j` the result is a linear system in `γ`, or, via
//! `γ_j = κ_j(l_j − μ_j)/l_j`, in the rest lengths `μ`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::forces::{DerivativeForm, Structure};
use crate::linalg::{self, least_squares};

/// Relative tolerance for consistency of the inverse-statics systems.
pub const CONSISTENCY_TOL: f64 = 1e-8;

/// An equilibrium together with the quantities that hold it.
#[derive(Debug, Clone)]
pub struct StaticState {
    pub q: DVector<f64>,
    pub lambda: DVector<f64>,
    pub gamma: DVector<f64>,
    pub rest_lengths: DVector<f64>,
    /// `‖−F̌ − Ǎᵀλ‖∞` at `q`.
    pub residual_norm: f64,
}

/// `(−F̌ − Ǎᵀλ, Φ̌)` at rest.
pub fn static_residual(
    s: &Structure,
    q: &DVector<f64>,
    lambda: &DVector<f64>,
    t: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let topo = s.topology();
    let zero = DVector::zeros(topo.n());
    let (f, _) = s.force(q, &zero, t)?;
    let a = topo.constraint_jacobian(q);
    Ok((-f - a.transpose() * lambda, topo.constraints(q)))
}

/// Multipliers from `Ǎᵀλ = −F̌`, i.e. `λ = −(ǍǍᵀ)⁻¹ǍF̌`; a minimum-norm
/// least-squares solve is used so that redundant constraints are tolerated.
pub fn multipliers(s: &Structure, q: &DVector<f64>, force: &DVector<f64>) -> DVector<f64> {
    let a = s.topology().constraint_jacobian(q);
    least_squares(&a.transpose(), &(-force)).solution
}

/// Rest-state static equilibrium of the current cable set at `q`: recovers
/// `λ` and reports the residual.
pub fn equilibrium_state(s: &Structure, q: &DVector<f64>, t: f64) -> Result<StaticState> {
    let topo = s.topology();
    let zero = DVector::zeros(topo.n());
    let (f, states) = s.force(q, &zero, t)?;
    let lambda = multipliers(s, q, &f);
    let (eq, _) = static_residual(s, q, &lambda, t)?;
    Ok(StaticState {
        q: q.clone(),
        lambda,
        gamma: DVector::from_iterator(states.len(), states.iter().map(|c| c.density())),
        rest_lengths: DVector::from_iterator(states.len(), states.iter().map(|c| c.rest_length)),
        residual_norm: linalg::inf_norm(&eq),
    })
}

/// Result of the force-density inverse statics.
#[derive(Debug, Clone)]
pub struct ForceDensitySolution {
    /// Minimum-norm particular solution.
    pub gamma: DVector<f64>,
    /// Rank of the coefficient matrix `ŇᵀĚᵀ⊕(Jᵀl)`.
    pub rank: usize,
    /// Basis of the homogeneous solutions (self-stress states).
    pub self_stress: DMatrix<f64>,
    pub residual: f64,
    /// Cables whose particular density is negative.
    pub negative: Vec<usize>,
    pub lambda: DVector<f64>,
}

impl ForceDensitySolution {
    /// Dimension of the solution set.
    pub fn solution_dimension(&self) -> usize {
        self.self_stress.ncols()
    }
}

fn projected_loads(s: &Structure, n: &DMatrix<f64>) -> DVector<f64> {
    n.tr_mul(s.load_force())
}

/// Solves `Ňᵀ Ěᵀ⊕(Jᵀl) γ = Ňᵀ(Ǧ + F̌^ex)` in the least-squares sense.
pub fn inverse_statics_force_densities(s: &Structure, q: &DVector<f64>) -> Result<ForceDensitySolution> {
    let topo = s.topology();
    let (n, _) = topo.nullspace(q);
    let coeff = n.tr_mul(&s.density_matrix(q));
    let rhs = -projected_loads(s, &n);
    let ls = least_squares(&coeff, &rhs);
    let scale = rhs.norm().max(linalg::max_abs(&coeff) * ls.solution.norm());
    if ls.residual > CONSISTENCY_TOL * scale.max(f64::MIN_POSITIVE) && ls.residual > 1e-14 {
        return Err(Error::Inconsistent {
            residual: ls.residual,
        });
    }
    let (self_stress, rank) = linalg::nullspace(&coeff);
    let gamma = ls.solution;
    let scale = linalg::inf_norm(&gamma).max(f64::MIN_POSITIVE);
    let negative = (0..gamma.len())
        .filter(|&j| gamma[j] < -1e-12 * scale)
        .collect();
    let force = s.density_matrix(q) * &gamma + s.load_force();
    let lambda = multipliers(s, q, &force);
    Ok(ForceDensitySolution {
        gamma,
        rank,
        self_stress,
        residual: ls.residual,
        negative,
        lambda,
    })
}

/// The rest-length system `B μ = b` at `q`.
#[derive(Debug, Clone)]
pub struct RestLengthSystem {
    pub b_matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub lengths: DVector<f64>,
}

impl RestLengthSystem {
    pub fn rank(&self) -> usize {
        linalg::rank(&self.b_matrix)
    }
}

/// Column `j` of `B` is `ŇᵀĚᵀJ_jᵀ κ_j l̂_j`; `b = B l − Ňᵀ(Ǧ + F̌^ex)`.
pub fn rest_length_system(s: &Structure, q: &DVector<f64>) -> Result<RestLengthSystem> {
    let topo = s.topology();
    let (n, _) = topo.nullspace(q);
    let zero = DVector::zeros(topo.n());
    let states = s.cable_states(q, &zero, 0.0)?;
    let d = s.density_matrix(q);
    let mut b = DMatrix::zeros(n.ncols(), s.cables.len());
    let mut lengths = DVector::zeros(s.cables.len());
    for (j, (cable, st)) in s.cables.iter().zip(&states).enumerate() {
        // The density column is −ĚᵀJᵀ l̂ l.
        let col = n.tr_mul(&d.column(j).into_owned()) * (-cable.spec.stiffness / st.length);
        b.set_column(j, &col);
        lengths[j] = st.length;
    }
    let rhs = &b * &lengths - projected_loads(s, &n);
    Ok(RestLengthSystem {
        b_matrix: b,
        rhs,
        lengths,
    })
}

/// Result of the rest-length inverse statics.
#[derive(Debug, Clone)]
pub struct RestLengthSolution {
    pub rest_lengths: DVector<f64>,
    pub gamma: DVector<f64>,
    /// Rank of the full matrix `B`.
    pub rank: usize,
    pub residual: f64,
    pub lambda: DVector<f64>,
}

/// Solves `Bμ = b` with the rest lengths in `fixed` substituted as knowns.
///
/// Fails if the remaining unknowns are not determined uniquely, if the
/// system is inconsistent, or if a slacking cable would end up slack.
pub fn inverse_statics_rest_lengths(
    s: &Structure,
    q: &DVector<f64>,
    fixed: &[(usize, f64)],
) -> Result<RestLengthSolution> {
    let sys = rest_length_system(s, q)?;
    let nc = s.cables.len();
    let mut known: Vec<Option<f64>> = vec![None; nc];
    for &(j, mu) in fixed {
        if j >= nc {
            return Err(Error::DimensionMismatch {
                expected: nc,
                got: j,
                context: "fixed rest-length index",
            });
        }
        known[j] = Some(mu);
    }
    let unknown: Vec<usize> = (0..nc).filter(|&j| known[j].is_none()).collect();
    let mut rhs = sys.rhs.clone();
    for (j, mu) in known.iter().enumerate() {
        if let Some(mu) = mu {
            rhs -= sys.b_matrix.column(j) * *mu;
        }
    }
    let reduced = DMatrix::from_fn(sys.b_matrix.nrows(), unknown.len(), |i, k| {
        sys.b_matrix[(i, unknown[k])]
    });
    let ls = least_squares(&reduced, &rhs);
    if ls.rank < unknown.len() {
        return Err(Error::Underdetermined {
            dimension: unknown.len() - ls.rank,
        });
    }
    let scale = sys.rhs.norm() + (&sys.b_matrix * &sys.lengths).norm();
    if ls.residual > CONSISTENCY_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Inconsistent {
            residual: ls.residual,
        });
    }
    let mut mu = DVector::zeros(nc);
    for j in 0..nc {
        mu[j] = known[j].unwrap_or(0.0);
    }
    for (k, &j) in unknown.iter().enumerate() {
        mu[j] = ls.solution[k];
    }
    let slack: Vec<String> = (0..nc)
        .filter(|&j| s.cables[j].spec.slacking && !(sys.lengths[j] > mu[j]))
        .map(|j| s.cables[j].spec.name.clone())
        .collect();
    if !slack.is_empty() {
        return Err(Error::SlackCables(slack));
    }
    let gamma = DVector::from_fn(nc, |j, _| {
        s.cables[j].spec.stiffness * (sys.lengths[j] - mu[j]) / sys.lengths[j]
    });
    let force = s.density_matrix(q) * &gamma + s.load_force();
    let lambda = multipliers(s, q, &force);
    Ok(RestLengthSolution {
        rest_lengths: mu,
        gamma,
        rank: sys.rank(),
        residual: ls.residual,
        lambda,
    })
}

/// Settings of [`refine_equilibrium`].
#[derive(Debug, Clone, Copy)]
pub struct RefineSettings {
    pub max_iterations: usize,
    pub tol: f64,
}

impl Default for RefineSettings {
    fn default() -> Self {
        RefineSettings {
            max_iterations: 50,
            tol: 1e-10,
        }
    }
}

/// Damped Newton refinement of an equilibrium near `q0`, keeping rest
/// lengths fixed. This is a local solver; it needs a good initial guess.
pub fn refine_equilibrium(
    s: &Structure,
    q0: &DVector<f64>,
    t: f64,
    settings: RefineSettings,
) -> Result<StaticState> {
    let topo = s.topology();
    let nf = topo.n_free();
    let nc = topo.n_constraints();
    let zero = DVector::zeros(topo.n());
    let mut q = q0.clone();
    topo.apply_prescribed(&mut q, t);
    let (f0, _) = s.force(&q, &zero, t)?;
    let mut lambda = multipliers(s, &q, &f0);

    let residual = |q: &DVector<f64>, lambda: &DVector<f64>| -> Result<DVector<f64>> {
        let (eq, cst) = static_residual(s, q, lambda, t)?;
        let mut r = DVector::zeros(nf + nc);
        r.rows_mut(0, nf).copy_from(&eq);
        r.rows_mut(nf, nc).copy_from(&cst);
        Ok(r)
    };

    let mut r = residual(&q, &lambda)?;
    let mut norm = linalg::inf_norm(&r);
    for _ in 0..settings.max_iterations {
        if norm <= settings.tol {
            let states = s.cable_states(&q, &zero, t)?;
            return Ok(StaticState {
                gamma: DVector::from_iterator(states.len(), states.iter().map(|c| c.density())),
                rest_lengths: DVector::from_iterator(
                    states.len(),
                    states.iter().map(|c| c.rest_length),
                ),
                q,
                lambda,
                residual_norm: norm,
            });
        }
        let states = s.cable_states(&q, &zero, t)?;
        let (kq, _) = s.tension_derivatives(&states, DerivativeForm::Exact);
        let a = topo.constraint_jacobian(&q);
        let mut jac = DMatrix::zeros(nf + nc, nf + nc);
        jac.view_mut((0, 0), (nf, nf))
            .copy_from(&(-kq - topo.constraint_hessian_sum(&lambda)));
        jac.view_mut((0, nf), (nf, nc)).copy_from(&(-a.transpose()));
        jac.view_mut((nf, 0), (nc, nf)).copy_from(&a);
        let step = least_squares(&jac, &(-&r)).solution;
        let mut alpha = 1.0;
        loop {
            let mut qn = q.clone();
            let qf = topo.gather_free(&q) + step.rows(0, nf) * alpha;
            topo.scatter_free(&mut qn, &qf);
            let ln = &lambda + step.rows(nf, nc) * alpha;
            let rn = residual(&qn, &ln)?;
            let nn = linalg::inf_norm(&rn);
            if nn < norm || alpha < 1e-6 {
                q = qn;
                lambda = ln;
                r = rn;
                norm = nn;
                break;
            }
            alpha *= 0.5;
        }
    }
    Err(Error::NonConvergence {
        iterations: settings.max_iterations,
        residual: norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{Attachment, Motion, Slot, TopologyBuilder};
    use crate::forces::{CableSpec, LoadSet};
    use crate::members::{LocalPoint, MemberTemplate, Tag};
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn hanging_bar(anchor_y: f64) -> Structure {
        // A horizontal bar pinned at the origin, held at its tip by a
        // vertical cable to an anchor.
        let mut b = TopologyBuilder::new(2);
        let anchor = b.add_prescribed_point("anchor", &[1.0, anchor_y], Motion::Fixed).unwrap();
        let tpl = Arc::new(MemberTemplate::bar(Tag::Rr, 2, 1.0, 1.0, 1.0 / 12.0).unwrap());
        let q = DVector::from_vec(vec![0.0, 0.0, 1.0, 0.0]);
        let bar = b
            .add_member("bar", tpl, &q, vec![Slot::Prescribed(Motion::Fixed), Slot::New])
            .unwrap();
        let topo = b.build().unwrap();
        let cable = CableSpec::new(
            "c",
            Attachment::Member {
                member: bar,
                point: LocalPoint::new(&[1.0]),
            },
            Attachment::Node(anchor),
            100.0,
            0.0,
            0.5,
        );
        Structure::new(topo, vec![cable], LoadSet::gravity(2, 9.8)).unwrap()
    }

    #[test]
    fn single_cable_holding_weight() {
        // Moment balance about the pin: κ(l − μ) = m g / 2.
        let s = hanging_bar(1.0);
        let q = s.topology().reference_configuration();
        let sol = inverse_statics_rest_lengths(&s, &q, &[]).unwrap();
        assert_relative_eq!(sol.rest_lengths[0], 1.0 - 4.9 / 100.0, epsilon = 1e-12);
        let (eq, cst) = static_residual(&s, &q, &sol.lambda, 0.0).unwrap();
        assert!(eq.amax() > 1e-3, "cable still has the old rest length");
        assert!(cst.amax() < 1e-15);
    }

    #[test]
    fn force_density_round_trip() {
        let s = hanging_bar(1.0);
        let q = s.topology().reference_configuration();
        let sol = inverse_statics_force_densities(&s, &q).unwrap();
        assert_eq!(sol.solution_dimension(), 0);
        assert_relative_eq!(sol.gamma[0], 4.9, epsilon = 1e-12);
        let force = s.density_matrix(&q) * &sol.gamma + s.load_force();
        let a = s.topology().constraint_jacobian(&q);
        let eq = -force - a.transpose() * &sol.lambda;
        assert!(eq.amax() < 1e-12);
    }

    #[test]
    fn slack_result_is_rejected() {
        // An anchor below the tip would need a compressed cable.
        let s = hanging_bar(-1.0);
        let q = s.topology().reference_configuration();
        assert!(matches!(
            inverse_statics_rest_lengths(&s, &q, &[]),
            Err(Error::SlackCables(_))
        ));
        // With the only rest length fixed nothing is left to absorb the load.
        let s = hanging_bar(1.0);
        assert!(matches!(
            inverse_statics_rest_lengths(&s, &q, &[(0, 0.5)]),
            Err(Error::Inconsistent { .. })
        ));
    }

    #[test]
    fn refinement_keeps_an_equilibrium() {
        let mut s = hanging_bar(1.0);
        let q = s.topology().reference_configuration();
        let mu = inverse_statics_rest_lengths(&s, &q, &[]).unwrap().rest_lengths[0];
        s.cables[0].spec.rest_length = crate::forces::RestLength::Constant(mu);
        let st = refine_equilibrium(&s, &q, 0.0, RefineSettings::default()).unwrap();
        assert!((st.q - q).amax() < 1e-10);
    }
}
