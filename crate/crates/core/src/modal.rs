//! Linearization about a static equilibrium and modal analysis.
//!
//! Perturbations `δq̌ = Ň ξ` stay on the linearized constraint manifold, and
//! the reduced equations read `𝓜ξ̈ + 𝓒ξ̇ + 𝓚ξ = 0` with
//!
//! ```text
//! 𝓜 = ŇᵀM̌Ň,  𝓒 = Ňᵀ(−∂F̌/∂q̌̇)Ň,  𝓚 = Ňᵀ(−∂F̌/∂q̌ − ∂(Ǎᵀλ)/∂q̌)Ň.
//! ```

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forces::{DerivativeForm, Structure};
use crate::linalg;
use crate::statics::{static_residual, StaticState};

/// Relative equilibrium tolerance required before linearizing.
pub const EQUILIBRIUM_TOL: f64 = 1e-8;

/// Relative gap below which two frequencies form a multiplet.
pub const DUPLICATE_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct LinearizedModel {
    pub mass: DMatrix<f64>,
    pub damping: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    /// The nullspace basis `Ň`.
    pub basis: DMatrix<f64>,
    pub q: DVector<f64>,
    pub lambda: DVector<f64>,
}

impl LinearizedModel {
    pub fn dof(&self) -> usize {
        self.basis.ncols()
    }

    /// `‖𝓚 − 𝓚ᵀ‖ / ‖𝓚‖`.
    pub fn stiffness_asymmetry(&self) -> f64 {
        let n = self.stiffness.norm();
        if n == 0.0 {
            return 0.0;
        }
        (&self.stiffness - self.stiffness.transpose()).norm() / n
    }
}

/// Builds the reduced-basis matrices at an equilibrium.
pub fn linearize(s: &Structure, state: &StaticState, t: f64) -> Result<LinearizedModel> {
    let topo = s.topology();
    let q = &state.q;
    let (eq, cst) = static_residual(s, q, &state.lambda, t)?;
    let zero = DVector::zeros(topo.n());
    let states = s.cable_states(q, &zero, t)?;
    let scale = 1.0 + linalg::inf_norm(s.load_force()) + s.tension_force(&states).amax();
    let defect = linalg::inf_norm(&eq).max(linalg::inf_norm(&cst));
    if defect > EQUILIBRIUM_TOL * scale {
        return Err(Error::NotInEquilibrium { residual: defect });
    }
    let (basis, _) = topo.nullspace(q);
    let (kq, kv) = s.tension_derivatives(&states, DerivativeForm::Exact);
    let tangent = -kq - topo.constraint_hessian_sum(&state.lambda);
    let mass = basis.tr_mul(&(topo.free_mass() * &basis));
    let damping = basis.tr_mul(&(-kv * &basis));
    let stiffness = basis.tr_mul(&(tangent * &basis));
    Ok(LinearizedModel {
        mass,
        damping,
        stiffness,
        basis,
        q: q.clone(),
        lambda: state.lambda.clone(),
    })
}

/// Solution of `𝓚ξ = ω²𝓜ξ`.
#[derive(Debug, Clone)]
pub struct ModeSet {
    /// `ω²` in ascending order; negative values signal instability.
    pub eigenvalues: Vec<f64>,
    /// Mass-normalized reduced shapes `ξ̂` as columns.
    pub shapes: DMatrix<f64>,
}

impl ModeSet {
    /// Frequencies `ω/2π` in Hz. An unstable mode (`ω² < 0`) is reported as
    /// the negative of its imaginary frequency magnitude.
    pub fn frequencies(&self) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .map(|&w2| w2.signum() * w2.abs().sqrt() / (2.0 * std::f64::consts::PI))
            .collect()
    }

    pub fn is_stable(&self) -> bool {
        self.eigenvalues.iter().all(|&w| w >= 0.0)
    }

    /// Frequencies with multiplets collapsed to one entry each.
    pub fn distinct_frequencies(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for f in self.frequencies() {
            match out.last() {
                Some(&prev) if (f - prev).abs() <= DUPLICATE_TOL * f.abs().max(prev.abs()) => {}
                _ => out.push(f),
            }
        }
        out
    }

    /// Multiplicity of each distinct frequency.
    pub fn multiplicities(&self) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        let freqs = self.frequencies();
        for (i, f) in freqs.iter().enumerate() {
            if i > 0 && (f - freqs[i - 1]).abs() <= DUPLICATE_TOL * f.abs().max(freqs[i - 1].abs()) {
                *out.last_mut().unwrap() += 1;
            } else {
                out.push(1);
            }
        }
        out
    }

    /// Mode shape `r` lifted to natural coordinates: `q_e + Ě Ň ξ̂ · scale`.
    pub fn shape_in_natural(
        &self,
        s: &Structure,
        model: &LinearizedModel,
        r: usize,
        scale: f64,
    ) -> DVector<f64> {
        let dq = &model.basis * self.shapes.column(r) * scale;
        let topo = s.topology();
        let mut q = model.q.clone();
        let qf = topo.gather_free(&q) + dq;
        topo.scatter_free(&mut q, &qf);
        q
    }
}

/// Solves the undamped generalized eigenproblem through a Cholesky reduction.
pub fn solve_modes(model: &LinearizedModel) -> Result<ModeSet> {
    let r = model.dof();
    if r == 0 {
        return Ok(ModeSet {
            eigenvalues: Vec::new(),
            shapes: DMatrix::zeros(0, 0),
        });
    }
    let chol = model.mass.clone().cholesky().ok_or(Error::IndefiniteMass)?;
    let l = chol.l();
    let k = 0.5 * (&model.stiffness + model.stiffness.transpose());
    // A = L⁻¹ K L⁻ᵀ
    let linv_k = l
        .solve_lower_triangular(&k)
        .ok_or(Error::IndefiniteMass)?;
    let a = l
        .solve_lower_triangular(&linv_k.transpose())
        .ok_or(Error::IndefiniteMass)?;
    let a = 0.5 * (&a + a.transpose());
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let lt = l.transpose();
    let mut shapes = DMatrix::zeros(r, r);
    let mut eigenvalues = Vec::with_capacity(r);
    for (c, &i) in order.iter().enumerate() {
        eigenvalues.push(eig.eigenvalues[i]);
        let y = eig.eigenvectors.column(i).into_owned();
        let xi = lt
            .solve_upper_triangular(&y)
            .ok_or(Error::IndefiniteMass)?;
        shapes.set_column(c, &xi);
    }
    Ok(ModeSet {
        eigenvalues,
        shapes,
    })
}

/// Linearizes and solves in one call.
pub fn modal_analysis(s: &Structure, state: &StaticState, t: f64) -> Result<(LinearizedModel, ModeSet)> {
    let model = linearize(s, state, t)?;
    let modes = solve_modes(&model)?;
    Ok((model, modes))
}

/// Evaluates `eval` on every grid point, in parallel on `jobs` threads
/// (`0` lets the thread pool decide). Results keep the grid order.
pub fn frequency_sweep<P, F>(points: &[P], jobs: usize, eval: F) -> Vec<Result<ModeSet>>
where
    P: Sync,
    F: Fn(&P) -> Result<ModeSet> + Sync + Send,
{
    if jobs == 1 {
        return points.iter().map(&eval).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build();
    match pool {
        Ok(pool) => pool.install(|| points.par_iter().map(&eval).collect()),
        Err(_) => points.iter().map(&eval).collect(),
    }
}
