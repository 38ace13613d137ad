//! Generalized forces on the free coordinates: gravity, point loads and cable
//! tensions, with the analytic partial derivatives of the tension force.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::assembly::{Attachment, MemberId, PointTerms, SystemTopology};
use crate::error::{Error, Result};

/// Lengths below this are treated as coincident cable endpoints.
pub const MIN_CABLE_LENGTH: f64 = 1e-12;

/// Rest length of a cable, possibly a function of time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RestLength {
    Constant(f64),
    /// `μ(t) = (1 − τ(t))·start + τ(t)·end` with `τ` rising linearly from 0 to
    /// 1 over `[0, duration]` and staying at 1 afterwards.
    Actuated { start: f64, end: f64, duration: f64 },
}

impl RestLength {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            RestLength::Constant(mu) => mu,
            RestLength::Actuated { start, end, duration } => {
                let tau = actuation_coefficient(t, duration);
                (1.0 - tau) * start + tau * end
            }
        }
    }
}

/// Piecewise-linear actuation coefficient `τ(t)`.
pub fn actuation_coefficient(t: f64, duration: f64) -> f64 {
    if duration <= 0.0 {
        return if t >= 0.0 { 1.0 } else { 0.0 };
    }
    (t / duration).clamp(0.0, 1.0)
}

/// A cable between two attachments.
#[derive(Debug, Clone)]
pub struct CableSpec {
    pub name: String,
    pub from: Attachment,
    pub to: Attachment,
    /// `κ` in N/m.
    pub stiffness: f64,
    /// `η` in N·s/m.
    pub damping: f64,
    pub rest_length: RestLength,
    /// When false the member behaves as a linear spring that also carries
    /// compression.
    pub slacking: bool,
}

impl CableSpec {
    pub fn new(
        name: impl Into<String>,
        from: Attachment,
        to: Attachment,
        stiffness: f64,
        damping: f64,
        rest_length: f64,
    ) -> Self {
        CableSpec {
            name: name.into(),
            from,
            to,
            stiffness,
            damping,
            rest_length: RestLength::Constant(rest_length),
            slacking: true,
        }
    }

    /// Tension `f` and slack flag for a length `l` and rate `l̇` at rest
    /// length `mu`.
    pub fn tension(&self, l: f64, ldot: f64, mu: f64) -> (f64, bool) {
        let f = self.stiffness * (l - mu) + self.damping * ldot;
        if !self.slacking {
            return (f, false);
        }
        if f >= 0.0 && l >= mu {
            (f, false)
        } else {
            (0.0, true)
        }
    }
}

/// Kinematic and force state of one cable.
#[derive(Debug, Clone, PartialEq)]
pub struct CableState {
    pub length: f64,
    pub rate: f64,
    /// Unit vector from the `from` end to the `to` end.
    pub direction: DVector<f64>,
    /// `J q̇`, the relative velocity of the two ends.
    pub relative_velocity: DVector<f64>,
    pub rest_length: f64,
    pub tension: f64,
    pub slack: bool,
}

impl CableState {
    /// Force density `γ = f / l`.
    pub fn density(&self) -> f64 {
        self.tension / self.length
    }
}

/// A cable compiled against a topology: `J_j` as sparse node weights.
#[derive(Debug, Clone)]
pub struct Cable {
    pub spec: CableSpec,
    terms: PointTerms,
}

impl Cable {
    pub fn terms(&self) -> &PointTerms {
        &self.terms
    }

    /// Dense `m × n` connection matrix `J_j`.
    pub fn connection_matrix(&self, topo: &SystemTopology) -> DMatrix<f64> {
        let m = topo.dim();
        let mut j = DMatrix::zeros(m, topo.n());
        for (id, w) in &self.terms {
            for d in 0..m {
                j[(d, id.0 * m + d)] += w;
            }
        }
        j
    }
}

/// A concentrated force at an attachment.
#[derive(Debug, Clone)]
pub struct PointLoad {
    pub at: Attachment,
    pub force: DVector<f64>,
}

/// External loads.
#[derive(Debug, Clone)]
pub struct LoadSet {
    /// Gravitational acceleration vector in m/s².
    pub gravity: DVector<f64>,
    pub point_loads: Vec<PointLoad>,
}

/// Default gravitational acceleration.
pub const STANDARD_GRAVITY: f64 = 9.8;

impl LoadSet {
    pub fn none(dim: usize) -> Self {
        LoadSet {
            gravity: DVector::zeros(dim),
            point_loads: Vec::new(),
        }
    }

    /// Gravity of magnitude `g` along the negative last axis.
    pub fn gravity(dim: usize, g: f64) -> Self {
        let mut gravity = DVector::zeros(dim);
        gravity[dim - 1] = -g;
        LoadSet {
            gravity,
            point_loads: Vec::new(),
        }
    }
}

/// Which formula to use for `∂Q̌/∂q̌` of damped cables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeForm {
    /// Exact derivative including the tangential-velocity term of the damping
    /// force.
    #[default]
    Exact,
    /// `β I + (κ − β) l̂l̂ᵀ` with `β = η l̇ / l + κ(l − μ)/l`. Coincides with the
    /// exact form when `η = 0` or the relative velocity is along the cable.
    Simplified,
}

/// Topology, cables and loads: everything needed to evaluate forces.
#[derive(Debug, Clone)]
pub struct Structure {
    pub topology: SystemTopology,
    pub cables: Vec<Cable>,
    pub loads: LoadSet,
    load_force: DVector<f64>,
}

impl Structure {
    pub fn new(topology: SystemTopology, cables: Vec<CableSpec>, loads: LoadSet) -> Result<Self> {
        let m = topology.dim();
        if loads.gravity.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: loads.gravity.len(),
                context: "gravity vector",
            });
        }
        let mut compiled = Vec::with_capacity(cables.len());
        for spec in cables {
            if !(spec.stiffness >= 0.0 && spec.damping >= 0.0) {
                return Err(Error::Topology(format!(
                    "cable `{}` needs non-negative stiffness and damping",
                    spec.name
                )));
            }
            let mut terms = topology.point_terms(&spec.to)?;
            for (id, w) in topology.point_terms(&spec.from)? {
                match terms.iter_mut().find(|(o, _)| *o == id) {
                    Some(e) => e.1 -= w,
                    None => terms.push((id, -w)),
                }
            }
            terms.retain(|(_, w)| *w != 0.0);
            compiled.push(Cable { spec, terms });
        }
        let mut load_force = DVector::zeros(topology.n_free());
        for (i, member) in topology.members().iter().enumerate() {
            let at = Attachment::Member {
                member: MemberId(i),
                point: member.template.mass_center().clone(),
            };
            let f = &loads.gravity * member.template.mass();
            add_point_force(&topology, &topology.point_terms(&at)?, &f, &mut load_force);
        }
        for load in &loads.point_loads {
            if load.force.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: load.force.len(),
                    context: "point load",
                });
            }
            add_point_force(&topology, &topology.point_terms(&load.at)?, &load.force, &mut load_force);
        }
        Ok(Structure {
            topology,
            cables: compiled,
            loads,
            load_force,
        })
    }

    pub fn topology(&self) -> &SystemTopology {
        &self.topology
    }

    pub fn cable_index(&self, name: &str) -> Option<usize> {
        self.cables.iter().position(|c| c.spec.name == name)
    }

    /// `J_j q`, the vector from the `from` end to the `to` end.
    pub fn cable_vector(&self, j: usize, q: &DVector<f64>) -> DVector<f64> {
        self.topology.eval_terms(&self.cables[j].terms, q)
    }

    /// Lengths, rates and tensions of all cables at `(q, q̇, t)`.
    pub fn cable_states(
        &self,
        q: &DVector<f64>,
        qdot: &DVector<f64>,
        t: f64,
    ) -> Result<Vec<CableState>> {
        self.cables
            .iter()
            .map(|cable| {
                let x = self.topology.eval_terms(&cable.terms, q);
                let v = self.topology.eval_terms(&cable.terms, qdot);
                let l = x.norm();
                if !(l >= MIN_CABLE_LENGTH) {
                    return Err(Error::DegenerateCable {
                        cable: cable.spec.name.clone(),
                        length: l,
                    });
                }
                let dir = x / l;
                let ldot = dir.dot(&v);
                let mu = cable.spec.rest_length.at(t);
                let (f, slack) = cable.spec.tension(l, ldot, mu);
                Ok(CableState {
                    length: l,
                    rate: ldot,
                    direction: dir,
                    relative_velocity: v,
                    rest_length: mu,
                    tension: f,
                    slack,
                })
            })
            .collect()
    }

    /// Generalized tension force `Q̌ = −Σ Ěᵀ J_jᵀ f_j l̂_j`.
    pub fn tension_force(&self, states: &[CableState]) -> DVector<f64> {
        let mut out = DVector::zeros(self.topology.n_free());
        for (cable, s) in self.cables.iter().zip(states) {
            if s.tension != 0.0 {
                add_point_force(&self.topology, &cable.terms, &(&s.direction * -s.tension), &mut out);
            }
        }
        out
    }

    /// The `ň × n_cables` matrix `−Ěᵀ ⊕_j (J_jᵀ l_j)`; multiplying it by the
    /// force densities gives the generalized tension force.
    pub fn density_matrix(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.topology.n_free(), self.cables.len());
        for (j, cable) in self.cables.iter().enumerate() {
            let x = self.topology.eval_terms(&cable.terms, q);
            let mut col = DVector::zeros(self.topology.n_free());
            add_point_force(&self.topology, &cable.terms, &(-x), &mut col);
            out.set_column(j, &col);
        }
        out
    }

    /// Constant generalized force of gravity and point loads.
    pub fn load_force(&self) -> &DVector<f64> {
        &self.load_force
    }

    /// Total generalized force `F̌ = Q̌ + Ǧ + F̌^ex` and the cable states.
    pub fn force(
        &self,
        q: &DVector<f64>,
        qdot: &DVector<f64>,
        t: f64,
    ) -> Result<(DVector<f64>, Vec<CableState>)> {
        let states = self.cable_states(q, qdot, t)?;
        let f = self.tension_force(&states) + &self.load_force;
        Ok((f, states))
    }

    /// `(∂Q̌/∂q̌, ∂Q̌/∂q̌̇)` for the given cable states. Slack cables contribute
    /// nothing.
    pub fn tension_derivatives(
        &self,
        states: &[CableState],
        form: DerivativeForm,
    ) -> (DMatrix<f64>, DMatrix<f64>) {
        let m = self.topology.dim();
        let nf = self.topology.n_free();
        let mut kq = DMatrix::zeros(nf, nf);
        let mut kv = DMatrix::zeros(nf, nf);
        for (cable, s) in self.cables.iter().zip(states) {
            if s.slack {
                continue;
            }
            let (kappa, eta) = (cable.spec.stiffness, cable.spec.damping);
            let l = s.length;
            let u = &s.direction;
            let uu = u * u.transpose();
            let proj = DMatrix::identity(m, m) - &uu;
            let block = match form {
                DerivativeForm::Exact => {
                    let tangential = &s.relative_velocity - u * s.rate;
                    &uu * kappa + &proj * (s.tension / l) + u * tangential.transpose() * (eta / l)
                }
                DerivativeForm::Simplified => {
                    let beta = eta * s.rate / l + kappa * (l - s.rest_length) / l;
                    &uu * kappa + &proj * beta
                }
            };
            let vblock = &uu * eta;
            add_block(&self.topology, &cable.terms, &block, -1.0, &mut kq);
            if eta != 0.0 {
                add_block(&self.topology, &cable.terms, &vblock, -1.0, &mut kv);
            }
        }
        (kq, kv)
    }

    /// Gravitational potential plus elastic energy of taut cables.
    pub fn potential_energy(&self, q: &DVector<f64>, t: f64) -> f64 {
        let topo = &self.topology;
        let mut v = 0.0;
        for (i, member) in topo.members().iter().enumerate() {
            let rg = topo.mass_center(MemberId(i), q);
            v -= member.template.mass() * self.loads.gravity.dot(&rg);
        }
        for load in &self.loads.point_loads {
            if let Ok(r) = topo.position(&load.at, q) {
                v -= load.force.dot(&r);
            }
        }
        for cable in &self.cables {
            let l = topo.eval_terms(&cable.terms, q).norm();
            let mu = cable.spec.rest_length.at(t);
            if l >= mu || !cable.spec.slacking {
                v += 0.5 * cable.spec.stiffness * (l - mu).powi(2);
            }
        }
        v
    }

    /// Kinetic plus potential energy.
    pub fn energy(&self, q: &DVector<f64>, qdot: &DVector<f64>, t: f64) -> f64 {
        self.topology.kinetic_energy(qdot) + self.potential_energy(q, t)
    }
}

/// Adds `Ěᵀ Jᵀ f` for a point force `f` at a sparse point map.
fn add_point_force(topo: &SystemTopology, terms: &PointTerms, f: &DVector<f64>, out: &mut DVector<f64>) {
    let m = topo.dim();
    for (id, w) in terms {
        for d in 0..m {
            if let Some(i) = topo.free_index(id.0 * m + d) {
                out[i] += w * f[d];
            }
        }
    }
}

/// Adds `scale · Ěᵀ Jᵀ B J Ě`.
fn add_block(
    topo: &SystemTopology,
    terms: &PointTerms,
    block: &DMatrix<f64>,
    scale: f64,
    out: &mut DMatrix<f64>,
) {
    let m = topo.dim();
    for (a, wa) in terms {
        for (b, wb) in terms {
            let s = scale * wa * wb;
            for i in 0..m {
                let Some(fi) = topo.free_index(a.0 * m + i) else {
                    continue;
                };
                for k in 0..m {
                    if let Some(fk) = topo.free_index(b.0 * m + k) {
                        out[(fi, fk)] += s * block[(i, k)];
                    }
                }
            }
        }
    }
}
