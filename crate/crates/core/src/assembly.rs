//! Assembling members into a system.
//!
//! The global coordinate vector `q` is a stack of `m`-dimensional *nodes*.
//! Every member slot maps onto one node; pin and ball joints are expressed by
//! letting members share point nodes, or by explicit point-coincidence joints
//! between attachments. A node is either free or prescribed, which splits `q`
//! into `q̌` (free) and `q̃` (prescribed). Ground anchors are plain prescribed
//! point nodes that no member owns.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::members::{LocalPoint, MemberTemplate};

/// Identifier of a node (an `m`-block of the global coordinates).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

/// Identifier of a member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MemberId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Point,
    Vector,
}

/// User-supplied time law for a prescribed node. Returns the displacement
/// from the node's reference value and its first two time derivatives.
pub trait PrescribedMotion: Send + Sync {
    fn eval(&self, t: f64, dim: usize) -> [DVector<f64>; 3];
}

/// Time law of a prescribed node relative to its reference value.
#[derive(Clone)]
pub enum Motion {
    Fixed,
    /// `amplitude · sin(2π·frequency·t) · axis`.
    Sinusoid {
        amplitude: f64,
        frequency: f64,
        axis: Vec<f64>,
    },
    Custom(Arc<dyn PrescribedMotion>),
}

impl fmt::Debug for Motion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Motion::Fixed => f.write_str("Fixed"),
            Motion::Sinusoid {
                amplitude,
                frequency,
                axis,
            } => f
                .debug_struct("Sinusoid")
                .field("amplitude", amplitude)
                .field("frequency", frequency)
                .field("axis", axis)
                .finish(),
            Motion::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl Motion {
    /// Displacement, velocity and acceleration at time `t`.
    pub fn eval(&self, t: f64, dim: usize) -> [DVector<f64>; 3] {
        match self {
            Motion::Fixed => [DVector::zeros(dim), DVector::zeros(dim), DVector::zeros(dim)],
            Motion::Sinusoid {
                amplitude,
                frequency,
                axis,
            } => {
                let w = 2.0 * std::f64::consts::PI * frequency;
                let dir = DVector::from_fn(dim, |i, _| axis.get(i).copied().unwrap_or(0.0));
                let (s, c) = (w * t).sin_cos();
                [
                    &dir * (amplitude * s),
                    &dir * (amplitude * w * c),
                    &dir * (-amplitude * w * w * s),
                ]
            }
            Motion::Custom(m) => m.eval(t, dim),
        }
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, Motion::Fixed)
    }
}

#[derive(Debug, Clone)]
pub struct Node {
    pub name: String,
    pub kind: NodeKind,
    pub reference: DVector<f64>,
    pub motion: Option<Motion>,
}

impl Node {
    pub fn is_prescribed(&self) -> bool {
        self.motion.is_some()
    }
}

#[derive(Debug, Clone)]
pub struct Member {
    pub name: String,
    pub template: Arc<MemberTemplate>,
    /// Node of every native slot.
    pub nodes: Vec<NodeId>,
}

/// A point of the structure: a point fixed on a member or a point node.
#[derive(Debug, Clone, PartialEq)]
pub enum Attachment {
    Member { member: MemberId, point: LocalPoint },
    Node(NodeId),
}

/// Point-coincidence joint between two attachments.
#[derive(Debug, Clone)]
pub struct Joint {
    pub a: Attachment,
    pub b: Attachment,
}

/// How a member slot is connected when the member is added.
#[derive(Debug, Clone)]
pub enum Slot {
    /// A fresh free node initialised from the placement.
    New,
    /// A fresh prescribed node initialised from the placement.
    Prescribed(Motion),
    /// An existing node; its value must match the placement.
    Shared(NodeId),
}

/// Sparse linear map from node values to a point: `r = Σ w·q_node`.
pub type PointTerms = Vec<(NodeId, f64)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    Intrinsic { member: MemberId, row: usize },
    Extrinsic { joint: usize, axis: usize },
}

/// Builder for [`SystemTopology`].
#[derive(Debug, Clone)]
pub struct TopologyBuilder {
    dim: usize,
    nodes: Vec<Node>,
    members: Vec<Member>,
    joints: Vec<Joint>,
}

const MATCH_TOL: f64 = 1e-9;

impl TopologyBuilder {
    pub fn new(dim: usize) -> Self {
        TopologyBuilder {
            dim,
            nodes: Vec::new(),
            members: Vec::new(),
            joints: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn push_node(
        &mut self,
        name: String,
        kind: NodeKind,
        value: DVector<f64>,
        motion: Option<Motion>,
    ) -> Result<NodeId> {
        if value.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: value.len(),
                context: "node value",
            });
        }
        self.nodes.push(Node {
            name,
            kind,
            reference: value,
            motion,
        });
        Ok(NodeId(self.nodes.len() - 1))
    }

    /// A node of either kind; `motion` makes it prescribed.
    pub fn add_node(
        &mut self,
        name: impl Into<String>,
        kind: NodeKind,
        value: &[f64],
        motion: Option<Motion>,
    ) -> Result<NodeId> {
        self.push_node(name.into(), kind, DVector::from_column_slice(value), motion)
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.name == name).map(NodeId)
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(id.0)
    }

    /// A free point node not owned by any member yet.
    pub fn add_point(&mut self, name: impl Into<String>, value: &[f64]) -> Result<NodeId> {
        self.push_node(name.into(), NodeKind::Point, DVector::from_column_slice(value), None)
    }

    /// A prescribed point, typically a ground anchor.
    pub fn add_prescribed_point(
        &mut self,
        name: impl Into<String>,
        value: &[f64],
        motion: Motion,
    ) -> Result<NodeId> {
        self.push_node(
            name.into(),
            NodeKind::Point,
            DVector::from_column_slice(value),
            Some(motion),
        )
    }

    /// Adds a member placed at native coordinates `q`, connecting its slots.
    pub fn add_member(
        &mut self,
        name: impl Into<String>,
        template: Arc<MemberTemplate>,
        q: &DVector<f64>,
        slots: Vec<Slot>,
    ) -> Result<MemberId> {
        let name = name.into();
        if template.dim() != self.dim {
            return Err(Error::Topology(format!(
                "member `{name}` is {}D in a {}D system",
                template.dim(),
                self.dim
            )));
        }
        if q.len() != template.ncoords() {
            return Err(Error::DimensionMismatch {
                expected: template.ncoords(),
                got: q.len(),
                context: "member placement",
            });
        }
        if slots.len() != template.slots() {
            return Err(Error::DimensionMismatch {
                expected: template.slots(),
                got: slots.len(),
                context: "member slot bindings",
            });
        }
        let m = self.dim;
        let tag = template.tag();
        let mut nodes = Vec::with_capacity(slots.len());
        for (k, slot) in slots.into_iter().enumerate() {
            let kind = if tag.is_point_slot(k) {
                NodeKind::Point
            } else {
                NodeKind::Vector
            };
            let value = q.rows(k * m, m).into_owned();
            let id = match slot {
                Slot::New => self.push_node(format!("{name}.{k}"), kind, value, None)?,
                Slot::Prescribed(motion) => {
                    self.push_node(format!("{name}.{k}"), kind, value, Some(motion))?
                }
                Slot::Shared(id) => {
                    let node = self.nodes.get(id.0).ok_or_else(|| {
                        Error::Topology(format!("member `{name}` refers to unknown node {}", id.0))
                    })?;
                    if node.kind != kind {
                        return Err(Error::Topology(format!(
                            "member `{name}` slot {k} is a {kind:?} but node `{}` is a {:?}",
                            node.name, node.kind
                        )));
                    }
                    let scale = 1.0 + value.norm().max(node.reference.norm());
                    if (&node.reference - &value).norm() > MATCH_TOL * scale {
                        return Err(Error::Topology(format!(
                            "member `{name}` slot {k} does not coincide with shared node `{}`",
                            node.name
                        )));
                    }
                    id
                }
            };
            if nodes.contains(&id) {
                return Err(Error::Topology(format!(
                    "member `{name}` binds node `{}` to two slots",
                    self.nodes[id.0].name
                )));
            }
            nodes.push(id);
        }
        self.members.push(Member {
            name,
            template,
            nodes,
        });
        Ok(MemberId(self.members.len() - 1))
    }

    pub fn add_joint(&mut self, a: Attachment, b: Attachment) -> Result<usize> {
        self.joints.push(Joint { a, b });
        Ok(self.joints.len() - 1)
    }

    /// Node bound to a member slot.
    pub fn member_node(&self, member: MemberId, slot: usize) -> Option<NodeId> {
        self.members.get(member.0)?.nodes.get(slot).copied()
    }

    pub fn build(self) -> Result<SystemTopology> {
        SystemTopology::new(self.dim, self.nodes, self.members, self.joints)
    }
}

#[derive(Debug, Clone)]
struct IntrinsicRow {
    member: usize,
    row: usize,
}

/// The assembled structure.
#[derive(Debug, Clone)]
pub struct SystemTopology {
    dim: usize,
    nodes: Vec<Node>,
    members: Vec<Member>,
    joints: Vec<Joint>,
    joint_terms: Vec<PointTerms>,
    free: Vec<usize>,
    prescribed: Vec<usize>,
    free_index: Vec<Option<usize>>,
    intrinsic: Vec<IntrinsicRow>,
    extrinsic: Vec<(usize, usize)>,
    kinds: Vec<ConstraintKind>,
    mass: DMatrix<f64>,
}

impl SystemTopology {
    fn new(dim: usize, nodes: Vec<Node>, members: Vec<Member>, joints: Vec<Joint>) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Topology(format!("systems live in 2D or 3D, not {dim}D")));
        }
        let n = nodes.len() * dim;
        let mut free = Vec::new();
        let mut prescribed = Vec::new();
        let mut free_index = vec![None; n];
        for (b, node) in nodes.iter().enumerate() {
            for d in 0..dim {
                let g = b * dim + d;
                if node.is_prescribed() {
                    prescribed.push(g);
                } else {
                    free_index[g] = Some(free.len());
                    free.push(g);
                }
            }
        }

        let mut topo = SystemTopology {
            dim,
            nodes,
            members,
            joints,
            joint_terms: Vec::new(),
            free,
            prescribed,
            free_index,
            intrinsic: Vec::new(),
            extrinsic: Vec::new(),
            kinds: Vec::new(),
            mass: DMatrix::zeros(n, n),
        };

        let mut joint_terms = Vec::with_capacity(topo.joints.len());
        for joint in &topo.joints {
            let mut terms = topo.point_terms(&joint.a)?;
            for (id, w) in topo.point_terms(&joint.b)? {
                terms.push((id, -w));
            }
            joint_terms.push(merge_terms(terms));
        }
        topo.joint_terms = joint_terms;

        // Constraints without free coordinates are dropped.
        for (i, member) in topo.members.iter().enumerate() {
            for row in 0..member.template.num_constraints() {
                let touches_free = member
                    .template
                    .constraint_slots(row)
                    .iter()
                    .any(|&k| !topo.nodes[member.nodes[k].0].is_prescribed());
                if touches_free {
                    topo.intrinsic.push(IntrinsicRow { member: i, row });
                    topo.kinds.push(ConstraintKind::Intrinsic {
                        member: MemberId(i),
                        row,
                    });
                }
            }
        }
        for (j, terms) in topo.joint_terms.iter().enumerate() {
            if terms.iter().any(|(id, _)| !topo.nodes[id.0].is_prescribed()) {
                for axis in 0..dim {
                    topo.extrinsic.push((j, axis));
                    topo.kinds.push(ConstraintKind::Extrinsic { joint: j, axis });
                }
            }
        }

        let mut mass = DMatrix::zeros(n, n);
        for member in &topo.members {
            let sm = member.template.slot_mass();
            for (k, a) in member.nodes.iter().enumerate() {
                for (l, b) in member.nodes.iter().enumerate() {
                    let v = sm[(k, l)];
                    if v != 0.0 {
                        for d in 0..dim {
                            mass[(a.0 * dim + d, b.0 * dim + d)] += v;
                        }
                    }
                }
            }
        }
        topo.mass = mass;
        Ok(topo)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Total number of coordinates `n`.
    pub fn n(&self) -> usize {
        self.nodes.len() * self.dim
    }

    /// Number of free coordinates `ň`.
    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    /// Number of prescribed coordinates `ñ`.
    pub fn n_prescribed(&self) -> usize {
        self.prescribed.len()
    }

    /// Number of retained constraints `n_Φ`.
    pub fn n_constraints(&self) -> usize {
        self.kinds.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn member(&self, id: MemberId) -> &Member {
        &self.members[id.0]
    }

    pub fn member_by_name(&self, name: &str) -> Option<MemberId> {
        self.members.iter().position(|m| m.name == name).map(MemberId)
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|m| m.name == name).map(NodeId)
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn constraint_kinds(&self) -> &[ConstraintKind] {
        &self.kinds
    }

    /// Global indices of the free coordinates (`Ě` as an index list).
    pub fn free_indices(&self) -> &[usize] {
        &self.free
    }

    /// Global indices of the prescribed coordinates (`Ẽ` as an index list).
    pub fn prescribed_indices(&self) -> &[usize] {
        &self.prescribed
    }

    /// Position of global coordinate `g` among the free coordinates.
    pub fn free_index(&self, g: usize) -> Option<usize> {
        self.free_index[g]
    }

    /// Global coordinates of the reference configuration.
    pub fn reference_configuration(&self) -> DVector<f64> {
        let m = self.dim;
        let mut q = DVector::zeros(self.n());
        for (b, node) in self.nodes.iter().enumerate() {
            q.rows_mut(b * m, m).copy_from(&node.reference);
        }
        q
    }

    /// Prescribed values `(q̃, q̃̇, q̃̈)` at time `t`.
    pub fn prescribed_motion(&self, t: f64) -> [DVector<f64>; 3] {
        let m = self.dim;
        let np = self.n_prescribed();
        let mut out = [DVector::zeros(np), DVector::zeros(np), DVector::zeros(np)];
        let mut i = 0;
        for node in &self.nodes {
            if let Some(motion) = &node.motion {
                let [d, v, a] = motion.eval(t, m);
                for k in 0..m {
                    out[0][i + k] = node.reference[k] + d[k];
                    out[1][i + k] = v[k];
                    out[2][i + k] = a[k];
                }
                i += m;
            }
        }
        out
    }

    /// Overwrites the prescribed entries of `q` with their values at time `t`.
    pub fn apply_prescribed(&self, q: &mut DVector<f64>, t: f64) {
        let [qp, _, _] = self.prescribed_motion(t);
        self.scatter_prescribed(q, &qp);
    }

    pub fn gather_free(&self, q: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.free.len(), self.free.iter().map(|&g| q[g]))
    }

    pub fn gather_prescribed(&self, q: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.prescribed.len(), self.prescribed.iter().map(|&g| q[g]))
    }

    pub fn scatter_free(&self, q: &mut DVector<f64>, qf: &DVector<f64>) {
        for (i, &g) in self.free.iter().enumerate() {
            q[g] = qf[i];
        }
    }

    pub fn scatter_prescribed(&self, q: &mut DVector<f64>, qp: &DVector<f64>) {
        for (i, &g) in self.prescribed.iter().enumerate() {
            q[g] = qp[i];
        }
    }

    /// Native coordinates of one member.
    pub fn member_coords(&self, id: MemberId, q: &DVector<f64>) -> DVector<f64> {
        let m = self.dim;
        let member = &self.members[id.0];
        let mut out = DVector::zeros(member.nodes.len() * m);
        for (k, node) in member.nodes.iter().enumerate() {
            out.rows_mut(k * m, m).copy_from(&q.rows(node.0 * m, m));
        }
        out
    }

    /// Sparse node weights of an attachment.
    pub fn point_terms(&self, at: &Attachment) -> Result<PointTerms> {
        match at {
            Attachment::Node(id) => {
                let node = self
                    .nodes
                    .get(id.0)
                    .ok_or_else(|| Error::Topology(format!("unknown node {}", id.0)))?;
                if node.kind != NodeKind::Point {
                    return Err(Error::Topology(format!(
                        "node `{}` is a base vector, not a point",
                        node.name
                    )));
                }
                Ok(vec![(*id, 1.0)])
            }
            Attachment::Member { member, point } => {
                let mem = self
                    .members
                    .get(member.0)
                    .ok_or_else(|| Error::Topology(format!("unknown member {}", member.0)))?;
                let w = mem.template.point_weights(point)?;
                Ok(merge_terms(
                    mem.nodes
                        .iter()
                        .zip(w.iter())
                        .filter(|(_, w)| **w != 0.0)
                        .map(|(n, w)| (*n, *w))
                        .collect(),
                ))
            }
        }
    }

    /// Evaluates a sparse point map.
    pub fn eval_terms(&self, terms: &[(NodeId, f64)], q: &DVector<f64>) -> DVector<f64> {
        let m = self.dim;
        let mut r = DVector::zeros(m);
        for (id, w) in terms {
            r += q.rows(id.0 * m, m) * *w;
        }
        r
    }

    pub fn position(&self, at: &Attachment, q: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.eval_terms(&self.point_terms(at)?, q))
    }

    /// Mass centre of a member.
    pub fn mass_center(&self, id: MemberId, q: &DVector<f64>) -> DVector<f64> {
        let member = &self.members[id.0];
        let at = Attachment::Member {
            member: id,
            point: member.template.mass_center().clone(),
        };
        self.position(&at, q).expect("mass centre attachment is valid")
    }

    /// Stacked extrinsic residuals of all joints (including dropped ones).
    pub fn extrinsic_constraints(&self, q: &DVector<f64>) -> DVector<f64> {
        let m = self.dim;
        let mut out = DVector::zeros(self.joints.len() * m);
        for (j, terms) in self.joint_terms.iter().enumerate() {
            out.rows_mut(j * m, m).copy_from(&self.eval_terms(terms, q));
        }
        out
    }

    /// Retained constraint residual `Φ̌(q)`.
    pub fn constraints(&self, q: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n_constraints());
        let mut cache: Option<(usize, DVector<f64>)> = None;
        for (i, row) in self.intrinsic.iter().enumerate() {
            if cache.as_ref().map(|c| c.0) != Some(row.member) {
                let member = &self.members[row.member];
                let qm = self.member_coords(MemberId(row.member), q);
                let phi = member
                    .template
                    .intrinsic_constraints(&qm)
                    .expect("member coordinates have the template size");
                cache = Some((row.member, phi));
            }
            out[i] = cache.as_ref().unwrap().1[row.row];
        }
        let off = self.intrinsic.len();
        for (i, &(j, axis)) in self.extrinsic.iter().enumerate() {
            let terms = &self.joint_terms[j];
            out[off + i] = terms
                .iter()
                .map(|(id, w)| w * q[id.0 * self.dim + axis])
                .sum();
        }
        out
    }

    /// `Ǎ(q) = ∂Φ̌/∂q̌`.
    pub fn constraint_jacobian(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let m = self.dim;
        let mut jac = DMatrix::zeros(self.n_constraints(), self.n_free());
        let mut cache: Option<(usize, DMatrix<f64>)> = None;
        for (i, row) in self.intrinsic.iter().enumerate() {
            let member = &self.members[row.member];
            if cache.as_ref().map(|c| c.0) != Some(row.member) {
                let qm = self.member_coords(MemberId(row.member), q);
                let j = member
                    .template
                    .intrinsic_jacobian(&qm)
                    .expect("member coordinates have the template size");
                cache = Some((row.member, j));
            }
            let jm = &cache.as_ref().unwrap().1;
            for (k, node) in member.nodes.iter().enumerate() {
                for d in 0..m {
                    if let Some(f) = self.free_index[node.0 * m + d] {
                        jac[(i, f)] += jm[(row.row, k * m + d)];
                    }
                }
            }
        }
        let off = self.intrinsic.len();
        for (i, &(j, axis)) in self.extrinsic.iter().enumerate() {
            for (id, w) in &self.joint_terms[j] {
                if let Some(f) = self.free_index[id.0 * m + axis] {
                    jac[(off + i, f)] += w;
                }
            }
        }
        jac
    }

    /// `Σ_i λ_i ∂²Φ̌_i/∂q̌²`, i.e. `∂(Ǎᵀλ)/∂q̌`. Extrinsic constraints are
    /// linear and contribute nothing.
    pub fn constraint_hessian_sum(&self, lambda: &DVector<f64>) -> DMatrix<f64> {
        let m = self.dim;
        let nf = self.n_free();
        let mut out = DMatrix::zeros(nf, nf);
        for (i, row) in self.intrinsic.iter().enumerate() {
            let li = lambda[i];
            if li == 0.0 {
                continue;
            }
            let member = &self.members[row.member];
            let h = member.template.slot_hessian(row.row);
            for (k, a) in member.nodes.iter().enumerate() {
                for (l, b) in member.nodes.iter().enumerate() {
                    let v = h[(k, l)];
                    if v == 0.0 {
                        continue;
                    }
                    for d in 0..m {
                        if let (Some(fa), Some(fb)) =
                            (self.free_index[a.0 * m + d], self.free_index[b.0 * m + d])
                        {
                            out[(fa, fb)] += li * v;
                        }
                    }
                }
            }
        }
        out
    }

    /// The constant system mass matrix `M` (all coordinates).
    pub fn mass_matrix(&self) -> &DMatrix<f64> {
        &self.mass
    }

    /// `M̌ = ĚᵀMĚ`.
    pub fn free_mass(&self) -> DMatrix<f64> {
        select(&self.mass, &self.free, &self.free)
    }

    /// `M̄ = ĚᵀMẼ`.
    pub fn coupling_mass(&self) -> DMatrix<f64> {
        select(&self.mass, &self.free, &self.prescribed)
    }

    /// Nullspace basis `Ň` of `Ǎ(q)` and the rank of `Ǎ`.
    pub fn nullspace(&self, q: &DVector<f64>) -> (DMatrix<f64>, usize) {
        linalg::nullspace(&self.constraint_jacobian(q))
    }

    /// Degrees of freedom `ň − rank Ǎ(q)`.
    pub fn dof(&self, q: &DVector<f64>) -> usize {
        self.n_free() - linalg::rank(&self.constraint_jacobian(q))
    }

    pub fn kinetic_energy(&self, qdot: &DVector<f64>) -> f64 {
        0.5 * qdot.dot(&(&self.mass * qdot))
    }

    pub fn total_mass(&self) -> f64 {
        self.members.iter().map(|m| m.template.mass()).sum()
    }
}

fn select(a: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

fn merge_terms(terms: Vec<(NodeId, f64)>) -> PointTerms {
    let mut out: PointTerms = Vec::with_capacity(terms.len());
    for (id, w) in terms {
        match out.iter_mut().find(|(o, _)| *o == id) {
            Some(entry) => entry.1 += w,
            None => out.push((id, w)),
        }
    }
    out.retain(|(_, w)| *w != 0.0);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::members::{rotation_2d, Tag};

    fn bar3(len: f64) -> Arc<MemberTemplate> {
        Arc::new(MemberTemplate::bar(Tag::Ru, 3, 1.0, len, len * len / 12.0).unwrap())
    }

    #[test]
    fn single_free_bar_has_five_dof() {
        let tpl = bar3(1.0);
        let mut b = TopologyBuilder::new(3);
        let q = tpl.place(&DMatrix::identity(3, 3), &DVector::zeros(3));
        b.add_member("bar", tpl, &q, vec![Slot::New, Slot::New]).unwrap();
        let topo = b.build().unwrap();
        assert_eq!(topo.n(), 6);
        assert_eq!(topo.n_constraints(), 1);
        assert_eq!(topo.dof(&topo.reference_configuration()), 5);
    }

    #[test]
    fn fully_prescribed_bar_contributes_no_constraint() {
        let tpl = Arc::new(MemberTemplate::bar(Tag::Rr, 2, 1.0, 1.0, 1.0 / 12.0).unwrap());
        let mut b = TopologyBuilder::new(2);
        let q = tpl.place(&DMatrix::identity(2, 2), &DVector::zeros(2));
        b.add_member(
            "ground",
            tpl,
            &q,
            vec![Slot::Prescribed(Motion::Fixed), Slot::Prescribed(Motion::Fixed)],
        )
        .unwrap();
        let topo = b.build().unwrap();
        assert_eq!(topo.n_free(), 0);
        assert_eq!(topo.n_constraints(), 0);
    }

    #[test]
    fn shared_nodes_must_coincide_and_match_kind() {
        let tpl = Arc::new(MemberTemplate::bar(Tag::Rr, 2, 1.0, 1.0, 1.0 / 12.0).unwrap());
        let mut b = TopologyBuilder::new(2);
        let q1 = tpl.place(&DMatrix::identity(2, 2), &DVector::zeros(2));
        let m1 = b
            .add_member("a", tpl.clone(), &q1, vec![Slot::New, Slot::New])
            .unwrap();
        let tip = b.member_node(m1, 1).unwrap();
        let q2 = tpl.place(&rotation_2d(0.5), &DVector::from_vec(vec![3.0, 0.0]));
        let err = b.add_member("b", tpl.clone(), &q2, vec![Slot::Shared(tip), Slot::New]);
        assert!(matches!(err, Err(Error::Topology(_))));

        let ru = Arc::new(MemberTemplate::bar(Tag::Ru, 2, 1.0, 1.0, 1.0 / 12.0).unwrap());
        let q3 = DVector::from_vec(vec![0.5, 0.0, 1.0, 0.0]);
        let err = b.add_member("c", ru, &q3, vec![Slot::Shared(tip), Slot::Shared(tip)]);
        assert!(err.is_err());
    }

    #[test]
    fn extrinsic_joint_residual_and_constant_jacobian() {
        let tpl = Arc::new(MemberTemplate::bar(Tag::Rr, 2, 1.0, 1.0, 1.0 / 12.0).unwrap());
        let mut b = TopologyBuilder::new(2);
        let q1 = DVector::from_vec(vec![0.0, 0.0, 1.0, 0.0]);
        let q2 = DVector::from_vec(vec![1.0, 0.1, 1.0, 1.1]);
        let a = b.add_member("a", tpl.clone(), &q1, vec![Slot::New, Slot::New]).unwrap();
        let c = b.add_member("b", tpl, &q2, vec![Slot::New, Slot::New]).unwrap();
        b.add_joint(
            Attachment::Member {
                member: c,
                point: LocalPoint::new(&[0.0]),
            },
            Attachment::Member {
                member: a,
                point: LocalPoint::new(&[1.0]),
            },
        )
        .unwrap();
        let topo = b.build().unwrap();
        let q = topo.reference_configuration();
        let ex = topo.extrinsic_constraints(&q);
        assert!((ex - DVector::from_vec(vec![0.0, 0.1])).norm() < 1e-15);
        let j0 = topo.constraint_jacobian(&q);
        let j1 = topo.constraint_jacobian(&(&q * 1.7));
        let rows = topo.n_constraints();
        assert_eq!(j0.rows(rows - 2, 2), j1.rows(rows - 2, 2));
    }

    #[test]
    fn gather_scatter_round_trip() {
        let tpl = bar3(2.0);
        let mut b = TopologyBuilder::new(3);
        b.add_prescribed_point("anchor", &[0.0, 0.0, 5.0], Motion::Fixed).unwrap();
        let q = tpl.place(&DMatrix::identity(3, 3), &DVector::zeros(3));
        b.add_member("bar", tpl, &q, vec![Slot::Prescribed(Motion::Fixed), Slot::New])
            .unwrap();
        let topo = b.build().unwrap();
        let q = topo.reference_configuration();
        let mut r = DVector::zeros(topo.n());
        topo.scatter_free(&mut r, &topo.gather_free(&q));
        topo.scatter_prescribed(&mut r, &topo.gather_prescribed(&q));
        assert_eq!(r, q);
        assert_eq!(topo.n_free() + topo.n_prescribed(), topo.n());
    }

    #[test]
    fn sinusoid_motion_derivatives() {
        let m = Motion::Sinusoid {
            amplitude: 0.01,
            frequency: 3.0,
            axis: vec![1.0, 0.0],
        };
        let t = 0.123;
        let h = 1e-6;
        let [x, v, a] = m.eval(t, 2);
        let [xp, vp, _] = m.eval(t + h, 2);
        let [xm, vm, _] = m.eval(t - h, 2);
        assert!(((&xp - &xm) / (2.0 * h) - &v).norm() < 1e-8);
        assert!(((&vp - &vm) / (2.0 * h) - &a).norm() < 1e-5);
        assert_eq!(x[1], 0.0);
    }
}
