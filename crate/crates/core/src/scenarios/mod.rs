//! Scenario files.
//!
//! A scenario is a TOML document describing nodes, rigid members, joints,
//! cables, loads and solver settings. Every dimensional quantity carries its
//! unit in the key name (`mass_kg`, `position_m`, `stiffness_n_per_m`, ...),
//! and a bare key such as `mass = 1.0` is rejected.
//!
//! ```
//! use tensegrity::scenarios::parse_scenario;
//!
//! let text = r#"
//! name = "pendulum"
//! dimension = 2
//!
//! [[nodes]]
//! name = "pivot"
//! position_m = [0.0, 0.0]
//! motion = { type = "fixed" }
//!
//! [[members]]
//! name = "bar"
//! tag = "RR"
//! mass_kg = 0.5
//! inertia = { bar_kg_m2 = 0.0016666666666666668 }
//! points_m = [[0.0, 0.0], [0.2, 0.0]]
//! slots = ["pivot", "tip"]
//! "#;
//! let parsed = parse_scenario(text).unwrap();
//! let model = parsed.scenario.build().unwrap();
//! assert_eq!(model.structure.topology().dof(&model.q0), 1);
//! assert!(parsed.defaulted.iter().any(|d| d.starts_with("gravity_m_per_s2")));
//! ```

pub mod builtin;

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::assembly::{Attachment, MemberId, Motion, NodeKind, Slot, TopologyBuilder};
use crate::error::{Error, Result};
use crate::forces::{
    CableSpec, DerivativeForm, LoadSet, PointLoad, RestLength, Structure, STANDARD_GRAVITY,
};
use crate::integrator::SolverSettings;
use crate::members::{CoordType, Inertia, LocalPoint, MemberTemplate, Tag};
use crate::statics::{
    equilibrium_state, inverse_statics_rest_lengths, refine_equilibrium, RefineSettings, StaticState,
};

pub use builtin::{builtin, BuiltinParams, Example2Setup, Example3Stage, BUILTINS};

fn default_gravity() -> f64 {
    STANDARD_GRAVITY
}

fn yes() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub dimension: usize,
    /// Magnitude of gravity, acting along the negative last axis.
    #[serde(default = "default_gravity")]
    pub gravity_m_per_s2: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outputs: Vec<Output>,
    #[serde(default)]
    pub settings: Settings,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<NodeSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub members: Vec<MemberSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub joints: Vec<JointSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cables: Vec<CableEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub point_loads: Vec<PointLoadSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Output {
    Simulate,
    Modal,
    InverseStatics,
    Sweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Settings {
    pub timestep_s: f64,
    pub duration_s: f64,
    /// Newton tolerance on the infinity norm of the step residual.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Keep every n-th step in the recorded trajectory.
    pub record_every: usize,
    pub derivative: DerivativeForm,
    pub substep_on_chatter: bool,
}

impl Default for Settings {
    fn default() -> Self {
        let s = SolverSettings::default();
        Settings {
            timestep_s: s.h,
            duration_s: 1.0,
            tolerance: s.tol,
            max_iterations: s.max_iterations,
            record_every: 1,
            derivative: s.derivative_form,
            substep_on_chatter: s.substep_on_chatter,
        }
    }
}

impl Settings {
    pub fn solver(&self) -> SolverSettings {
        SolverSettings {
            h: self.timestep_s,
            max_iterations: self.max_iterations,
            tol: self.tolerance,
            derivative_form: self.derivative,
            substep_on_chatter: self.substep_on_chatter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MotionSpec {
    Fixed,
    /// `amplitude · sin(2π·frequency·t)` along `axis`.
    Sinusoid {
        amplitude_m: f64,
        frequency_hz: f64,
        axis: Vec<f64>,
    },
}

impl MotionSpec {
    pub fn to_motion(&self) -> Motion {
        match self {
            MotionSpec::Fixed => Motion::Fixed,
            MotionSpec::Sinusoid {
                amplitude_m,
                frequency_hz,
                axis,
            } => Motion::Sinusoid {
                amplitude: *amplitude_m,
                frequency: *frequency_hz,
                axis: axis.clone(),
            },
        }
    }
}

/// A named point node. Nodes with a motion are prescribed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub name: String,
    pub position_m: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motion: Option<MotionSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InertiaSpec {
    PrincipalKgM2([f64; 3]),
    PlanarKgM2([f64; 2]),
    PolarKgM2(f64),
    BarKgM2(f64),
}

impl InertiaSpec {
    fn to_inertia(self) -> Inertia {
        match self {
            InertiaSpec::PrincipalKgM2(i) => Inertia::Principal(i),
            InertiaSpec::PlanarKgM2(i) => Inertia::PlanarSecondMoments(i),
            InertiaSpec::PolarKgM2(i) => Inertia::Polar(i),
            InertiaSpec::BarKgM2(i) => Inertia::Bar(i),
        }
    }
}

/// A rigid member placed in its reference configuration.
///
/// `points_m` lists one world point per slot: the basic point first, then for
/// a point slot the point itself and for a vector slot the point the vector
/// reaches from the basic point. `slots` names the node bound to each slot;
/// an empty name creates an anonymous node and an unknown name creates a new
/// node that later members may share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberSpec {
    pub name: String,
    pub tag: Tag,
    pub mass_kg: f64,
    pub inertia: InertiaSpec,
    pub points_m: Vec<Vec<f64>>,
    /// Required for bodies. Bars default to the midpoint of their two points.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass_center_m: Option<Vec<f64>>,
    /// Principal axes of a body as world vectors. Defaults to the world axes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axes: Option<Vec<Vec<f64>>>,
    pub slots: Vec<String>,
}

/// A point given by a node name, or by a member and either a world position
/// in the reference configuration or the affine coefficients of the point.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttachSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub member: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position_m: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<f64>>,
}

impl AttachSpec {
    pub fn node(name: &str) -> Self {
        AttachSpec {
            node: Some(name.into()),
            ..Default::default()
        }
    }

    pub fn on_member(member: &str, position_m: &[f64]) -> Self {
        AttachSpec {
            member: Some(member.into()),
            position_m: Some(position_m.to_vec()),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSpec {
    pub a: AttachSpec,
    pub b: AttachSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RestSpec {
    LengthM(f64),
    /// A fraction of the reference length.
    Ratio(f64),
    /// Linear actuation from `start_m` to `end_m` over `duration_s`.
    Actuated {
        start_m: f64,
        end_m: f64,
        duration_s: f64,
    },
    /// Solved by inverse statics in the reference configuration, with all
    /// other rest lengths held.
    Solve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CableEntry {
    pub name: String,
    pub from: AttachSpec,
    pub to: AttachSpec,
    pub stiffness_n_per_m: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub damping_n_s_per_m: f64,
    pub rest: RestSpec,
    /// A non-slacking cable acts as a two-sided spring.
    #[serde(default = "yes", skip_serializing_if = "is_true")]
    pub slacking: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointLoadSpec {
    pub at: AttachSpec,
    pub force_n: Vec<f64>,
}

/// A parsed scenario and the keys that were filled in from defaults.
#[derive(Debug, Clone)]
pub struct Parsed {
    pub scenario: Scenario,
    pub defaulted: Vec<String>,
}

/// Quantities that must carry a unit suffix when given as numbers.
const UNIT_KEYS: &[(&str, &str)] = &[
    ("mass", "mass_kg"),
    ("length", "length_m"),
    ("rest_length", "rest = { length_m = ... }"),
    ("position", "position_m"),
    ("points", "points_m"),
    ("mass_center", "mass_center_m"),
    ("stiffness", "stiffness_n_per_m"),
    ("damping", "damping_n_s_per_m"),
    ("gravity", "gravity_m_per_s2"),
    ("timestep", "timestep_s"),
    ("dt", "timestep_s"),
    ("duration", "duration_s"),
    ("amplitude", "amplitude_m"),
    ("frequency", "frequency_hz"),
    ("force", "force_n"),
    ("start", "start_m"),
    ("end", "end_m"),
    ("principal", "principal_kg_m2"),
    ("planar", "planar_kg_m2"),
    ("polar", "polar_kg_m2"),
    ("bar", "bar_kg_m2"),
];

fn is_numeric(v: &toml::Value) -> bool {
    match v {
        toml::Value::Integer(_) | toml::Value::Float(_) => true,
        toml::Value::Array(a) => a.iter().all(is_numeric) && !a.is_empty(),
        _ => false,
    }
}

fn check_units(v: &toml::Value, path: &str) -> Result<()> {
    match v {
        toml::Value::Table(t) => {
            for (k, child) in t {
                if is_numeric(child) {
                    if let Some((_, hint)) = UNIT_KEYS.iter().find(|(bare, _)| bare == k) {
                        return Err(Error::Scenario(format!(
                            "`{path}{k}` has no unit; write `{hint}`"
                        )));
                    }
                }
                check_units(child, &format!("{path}{k}."))?;
            }
        }
        toml::Value::Array(a) => {
            for (i, child) in a.iter().enumerate() {
                check_units(child, &format!("{}[{i}].", path.trim_end_matches('.')))?;
            }
        }
        _ => {}
    }
    Ok(())
}

fn defaulted_keys(raw: &toml::Table, sc: &Scenario) -> Vec<String> {
    let mut out = Vec::new();
    if !raw.contains_key("gravity_m_per_s2") {
        out.push(format!("gravity_m_per_s2 = {}", sc.gravity_m_per_s2));
    }
    let settings = raw.get("settings").and_then(|v| v.as_table());
    let s = &sc.settings;
    let fields = [
        ("timestep_s", s.timestep_s.to_string()),
        ("duration_s", s.duration_s.to_string()),
        ("tolerance", s.tolerance.to_string()),
        ("max_iterations", s.max_iterations.to_string()),
        ("record_every", s.record_every.to_string()),
        ("derivative", format!("{:?}", s.derivative).to_lowercase()),
        ("substep_on_chatter", s.substep_on_chatter.to_string()),
    ];
    for (k, v) in fields {
        if !settings.is_some_and(|t| t.contains_key(k)) {
            out.push(format!("settings.{k} = {v}"));
        }
    }
    if let Some(cables) = raw.get("cables").and_then(|v| v.as_array()) {
        for (c, spec) in cables.iter().zip(&sc.cables) {
            let Some(t) = c.as_table() else { continue };
            if !t.contains_key("damping_n_s_per_m") {
                out.push(format!("cables.{}.damping_n_s_per_m = 0", spec.name));
            }
            if !t.contains_key("slacking") {
                out.push(format!("cables.{}.slacking = true", spec.name));
            }
        }
    }
    out
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Parsed> {
    let raw: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Scenario(e.to_string()))?;
    check_units(&toml::Value::Table(raw.clone()), "")?;
    let scenario: Scenario = raw
        .clone()
        .try_into()
        .map_err(|e: toml::de::Error| Error::Scenario(e.to_string()))?;
    scenario.validate()?;
    let defaulted = defaulted_keys(&raw, &scenario);
    Ok(Parsed {
        scenario,
        defaulted,
    })
}

/// A scenario turned into solver inputs.
#[derive(Debug, Clone)]
pub struct Model {
    pub structure: Structure,
    /// Reference configuration, the initial state of simulations.
    pub q0: DVector<f64>,
    pub settings: SolverSettings,
    pub duration: f64,
    pub record_every: usize,
}

impl Model {
    pub fn member(&self, name: &str) -> Result<MemberId> {
        self.structure
            .topology()
            .member_by_name(name)
            .ok_or_else(|| Error::Scenario(format!("no member `{name}`")))
    }

    /// Static equilibrium at `t = 0`. The reference configuration is used as
    /// is when it balances; otherwise it seeds a Newton refinement.
    pub fn equilibrium(&self) -> Result<StaticState> {
        let s = &self.structure;
        let st = equilibrium_state(s, &self.q0, 0.0)?;
        let zero = DVector::zeros(self.q0.len());
        let states = s.cable_states(&self.q0, &zero, 0.0)?;
        let scale = 1.0 + s.load_force().amax() + s.tension_force(&states).amax();
        if st.residual_norm <= 1e-10 * scale {
            return Ok(st);
        }
        refine_equilibrium(s, &self.q0, 0.0, RefineSettings::default())
    }
}

struct Frame {
    id: MemberId,
    template: Arc<MemberTemplate>,
    rotation: DMatrix<f64>,
    center: DVector<f64>,
}

fn vec_of(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

/// Orthonormal frame whose first axis points along `dir`.
fn axis_frame(dir: &DVector<f64>) -> DMatrix<f64> {
    let m = dir.len();
    let e = dir.normalize();
    if m == 2 {
        return DMatrix::from_row_slice(2, 2, &[e[0], -e[1], e[1], e[0]]);
    }
    let k = (0..3)
        .min_by(|&a, &b| e[a].abs().total_cmp(&e[b].abs()))
        .unwrap_or(0);
    let mut t = DVector::zeros(3);
    t[k] = 1.0;
    let t = (&t - &e * e.dot(&t)).normalize();
    let b = e.cross(&t);
    DMatrix::from_columns(&[e, t, b])
}

impl Scenario {
    /// Serializes to TOML; `parse_scenario` reads it back unchanged.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Scenario(e.to_string()))
    }

    pub fn cable_index(&self, name: &str) -> Option<usize> {
        self.cables.iter().position(|c| c.name == name)
    }

    /// Checks names, references and dimensions without assembling anything.
    pub fn validate(&self) -> Result<()> {
        let m = self.dimension;
        let bad = |msg: String| Err(Error::Scenario(msg));
        if m != 2 && m != 3 {
            return bad(format!("dimension must be 2 or 3, got {m}"));
        }
        let check_len = |what: &str, v: &[f64]| -> Result<()> {
            if v.len() != m {
                return bad(format!("{what} has {} components, expected {m}", v.len()));
            }
            Ok(())
        };
        let mut nodes: HashSet<&str> = HashSet::new();
        for n in &self.nodes {
            if n.name.is_empty() || !nodes.insert(&n.name) {
                return bad(format!("node name `{}` is empty or repeated", n.name));
            }
            check_len(&format!("node `{}`", n.name), &n.position_m)?;
            if let Some(MotionSpec::Sinusoid { axis, .. }) = &n.motion {
                check_len(&format!("motion axis of node `{}`", n.name), axis)?;
            }
        }
        let mut members: HashMap<&str, &MemberSpec> = HashMap::new();
        for mb in &self.members {
            if members.insert(&mb.name, mb).is_some() {
                return bad(format!("member name `{}` is repeated", mb.name));
            }
            CoordType::new(mb.tag, m)?;
            let s = mb.tag.slots();
            if mb.points_m.len() != s || mb.slots.len() != s {
                return bad(format!(
                    "member `{}` ({}) needs {s} points and {s} slots",
                    mb.name, mb.tag
                ));
            }
            for p in &mb.points_m {
                check_len(&format!("point of member `{}`", mb.name), p)?;
            }
            match (&mb.mass_center_m, mb.tag.is_bar()) {
                (Some(c), _) => check_len(&format!("mass centre of `{}`", mb.name), c)?,
                (None, false) => return bad(format!("body `{}` needs mass_center_m", mb.name)),
                _ => {}
            }
            if let Some(axes) = &mb.axes {
                if mb.tag.is_bar() {
                    return bad(format!("bar `{}` takes no axes", mb.name));
                }
                if axes.len() != m {
                    return bad(format!("member `{}` needs {m} axes", mb.name));
                }
                for a in axes {
                    check_len(&format!("axis of `{}`", mb.name), a)?;
                }
            }
            for (k, slot) in mb.slots.iter().enumerate() {
                if !slot.is_empty() && !mb.tag.is_point_slot(k) && nodes.contains(slot.as_str()) {
                    return bad(format!(
                        "member `{}` binds point node `{slot}` to vector slot {k}",
                        mb.name
                    ));
                }
            }
            nodes.extend(mb.slots.iter().filter(|s| !s.is_empty()).map(String::as_str));
        }
        let check_attach = |what: &str, a: &AttachSpec| -> Result<()> {
            match (&a.node, &a.member, &a.position_m, &a.coeffs) {
                (Some(n), None, None, None) => {
                    if !nodes.contains(n.as_str()) {
                        return bad(format!("{what} refers to unknown node `{n}`"));
                    }
                }
                (None, Some(mb), p, c) if p.is_some() != c.is_some() => {
                    let Some(spec) = members.get(mb.as_str()) else {
                        return bad(format!("{what} refers to unknown member `{mb}`"));
                    };
                    if let Some(p) = p {
                        check_len(what, p)?;
                    }
                    if let Some(c) = c {
                        if c.len() != spec.tag.base_vectors() {
                            return bad(format!(
                                "{what} needs {} coefficients",
                                spec.tag.base_vectors()
                            ));
                        }
                    }
                }
                _ => {
                    return bad(format!(
                        "{what} must give either `node`, or `member` with one of `position_m` and `coeffs`"
                    ))
                }
            }
            Ok(())
        };
        for (i, j) in self.joints.iter().enumerate() {
            check_attach(&format!("joint {i}"), &j.a)?;
            check_attach(&format!("joint {i}"), &j.b)?;
        }
        let mut cables = HashSet::new();
        for c in &self.cables {
            if !cables.insert(&c.name) {
                return bad(format!("cable name `{}` is repeated", c.name));
            }
            check_attach(&format!("cable `{}`", c.name), &c.from)?;
            check_attach(&format!("cable `{}`", c.name), &c.to)?;
            if !(c.stiffness_n_per_m >= 0.0 && c.damping_n_s_per_m >= 0.0) {
                return bad(format!("cable `{}` has negative stiffness or damping", c.name));
            }
            let ok = match c.rest {
                RestSpec::LengthM(mu) => mu >= 0.0,
                RestSpec::Ratio(r) => r >= 0.0,
                RestSpec::Actuated {
                    start_m,
                    end_m,
                    duration_s,
                } => start_m >= 0.0 && end_m >= 0.0 && duration_s > 0.0,
                RestSpec::Solve => true,
            };
            if !ok {
                return bad(format!("cable `{}` has an invalid rest length", c.name));
            }
        }
        for (i, l) in self.point_loads.iter().enumerate() {
            check_attach(&format!("point load {i}"), &l.at)?;
            check_len(&format!("point load {i}"), &l.force_n)?;
        }
        let s = &self.settings;
        if !(s.timestep_s > 0.0 && s.duration_s >= 0.0 && s.tolerance > 0.0)
            || s.max_iterations == 0
            || s.record_every == 0
        {
            return bad("settings need positive timestep, tolerance, iterations and record_every".into());
        }
        Ok(())
    }

    /// Assembles the structure. Rest lengths marked `solve` are found by
    /// inverse statics in the reference configuration.
    pub fn build(&self) -> Result<Model> {
        self.validate()?;
        let m = self.dimension;
        let mut b = TopologyBuilder::new(m);
        for n in &self.nodes {
            b.add_node(&n.name, NodeKind::Point, &n.position_m, n.motion.as_ref().map(MotionSpec::to_motion))?;
        }
        let mut frames: HashMap<String, Frame> = HashMap::new();
        for mb in &self.members {
            let frame = self.place_member(&mut b, mb)?;
            frames.insert(mb.name.clone(), frame);
        }
        let resolve = |b: &TopologyBuilder, a: &AttachSpec| -> Result<Attachment> {
            if let Some(n) = &a.node {
                let id = b
                    .node_by_name(n)
                    .ok_or_else(|| Error::Scenario(format!("unknown node `{n}`")))?;
                return Ok(Attachment::Node(id));
            }
            let name = a.member.as_deref().unwrap_or_default();
            let f = frames
                .get(name)
                .ok_or_else(|| Error::Scenario(format!("unknown member `{name}`")))?;
            let point = match (&a.position_m, &a.coeffs) {
                (Some(p), _) => {
                    let local = f.rotation.tr_mul(&(vec_of(p) - &f.center));
                    f.template.local_coeffs(&local)?
                }
                (None, Some(c)) => LocalPoint::new(c),
                (None, None) => unreachable!("validated"),
            };
            Ok(Attachment::Member { member: f.id, point })
        };
        for j in &self.joints {
            let (a, c) = (resolve(&b, &j.a)?, resolve(&b, &j.b)?);
            b.add_joint(a, c)?;
        }
        let mut cable_specs = Vec::with_capacity(self.cables.len());
        let mut ratios = Vec::new();
        for (j, c) in self.cables.iter().enumerate() {
            let from = resolve(&b, &c.from)?;
            let to = resolve(&b, &c.to)?;
            let mut spec = CableSpec::new(&c.name, from, to, c.stiffness_n_per_m, c.damping_n_s_per_m, 0.0);
            spec.slacking = c.slacking;
            spec.rest_length = match c.rest {
                RestSpec::LengthM(mu) => RestLength::Constant(mu),
                RestSpec::Actuated {
                    start_m,
                    end_m,
                    duration_s,
                } => RestLength::Actuated {
                    start: start_m,
                    end: end_m,
                    duration: duration_s,
                },
                RestSpec::Ratio(r) => {
                    ratios.push((j, r));
                    RestLength::Constant(0.0)
                }
                RestSpec::Solve => RestLength::Constant(0.0),
            };
            cable_specs.push(spec);
        }
        let mut loads = LoadSet::gravity(m, self.gravity_m_per_s2);
        for l in &self.point_loads {
            loads.point_loads.push(PointLoad {
                at: resolve(&b, &l.at)?,
                force: vec_of(&l.force_n),
            });
        }
        let topo = b.build()?;
        let mut q0 = topo.reference_configuration();
        topo.apply_prescribed(&mut q0, 0.0);
        let mut structure = Structure::new(topo, cable_specs, loads)?;
        if !ratios.is_empty() {
            for (j, r) in ratios {
                let l = structure.cable_vector(j, &q0).norm();
                structure.cables[j].spec.rest_length = RestLength::Constant(r * l);
            }
        }
        let unknown: Vec<usize> = (0..self.cables.len())
            .filter(|&j| self.cables[j].rest == RestSpec::Solve)
            .collect();
        if !unknown.is_empty() {
            let fixed: Vec<(usize, f64)> = (0..self.cables.len())
                .filter(|j| !unknown.contains(j))
                .map(|j| (j, structure.cables[j].spec.rest_length.at(0.0)))
                .collect();
            let sol = inverse_statics_rest_lengths(&structure, &q0, &fixed)?;
            for j in unknown {
                structure.cables[j].spec.rest_length = RestLength::Constant(sol.rest_lengths[j]);
            }
        }
        Ok(Model {
            structure,
            q0,
            settings: self.settings.solver(),
            duration: self.settings.duration_s,
            record_every: self.settings.record_every,
        })
    }

    fn place_member(&self, b: &mut TopologyBuilder, mb: &MemberSpec) -> Result<Frame> {
        let m = self.dimension;
        let points: Vec<DVector<f64>> = mb.points_m.iter().map(|p| vec_of(p)).collect();
        let ct = CoordType::new(mb.tag, m)?;
        let center = match &mb.mass_center_m {
            Some(c) => vec_of(c),
            None => (&points[0] + &points[1]) * 0.5,
        };
        let rotation = if mb.tag.is_bar() {
            axis_frame(&(&points[1] - &points[0]))
        } else {
            match &mb.axes {
                Some(axes) => {
                    let r = DMatrix::from_columns(&axes.iter().map(|a| vec_of(a)).collect::<Vec<_>>());
                    let defect = (r.tr_mul(&r) - DMatrix::identity(m, m)).amax();
                    if defect > 1e-9 {
                        return Err(Error::Scenario(format!(
                            "axes of `{}` are not orthonormal",
                            mb.name
                        )));
                    }
                    r
                }
                None => DMatrix::identity(m, m),
            }
        };
        let local: Vec<DVector<f64>> = points
            .iter()
            .map(|p| rotation.tr_mul(&(p - &center)))
            .collect();
        let template = Arc::new(MemberTemplate::from_frame_points(
            ct,
            mb.mass_kg,
            &local,
            mb.inertia.to_inertia(),
        )?);
        let q = template.place(&rotation, &center);
        let mut slots = Vec::with_capacity(mb.slots.len());
        for (k, name) in mb.slots.iter().enumerate() {
            if name.is_empty() {
                slots.push(Slot::New);
                continue;
            }
            let id = match b.node_by_name(name) {
                Some(id) => id,
                None => {
                    let kind = if mb.tag.is_point_slot(k) {
                        NodeKind::Point
                    } else {
                        NodeKind::Vector
                    };
                    let value: Vec<f64> = q.rows(k * m, m).iter().copied().collect();
                    b.add_node(name, kind, &value, None)?
                }
            };
            slots.push(Slot::Shared(id));
        }
        let id = b.add_member(&mb.name, template.clone(), &q, slots)?;
        Ok(Frame {
            id,
            template,
            rotation,
            center,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pendulum_text() -> &'static str {
        r#"
name = "hanging bar"
dimension = 2
gravity_m_per_s2 = 9.8

[settings]
timestep_s = 0.001
duration_s = 0.5

[[nodes]]
name = "pivot"
position_m = [0.0, 0.0]
motion = { type = "fixed" }

[[nodes]]
name = "anchor"
position_m = [1.0, 1.0]
motion = { type = "sinusoid", amplitude_m = 0.01, frequency_hz = 2.0, axis = [1.0, 0.0] }

[[members]]
name = "bar"
tag = "RR"
mass_kg = 10.0
inertia = { bar_kg_m2 = 0.8333333333333334 }
points_m = [[0.0, 0.0], [1.0, 0.0]]
slots = ["pivot", "tip"]

[[cables]]
name = "stay"
from = { node = "tip" }
to = { node = "anchor" }
stiffness_n_per_m = 100.0
rest = "solve"
"#
    }

    #[test]
    fn parses_and_builds() {
        let p = parse_scenario(pendulum_text()).unwrap();
        assert!(p.defaulted.contains(&"cables.stay.slacking = true".to_string()));
        assert!(!p.defaulted.iter().any(|d| d.starts_with("gravity")));
        let model = p.scenario.build().unwrap();
        let topo = model.structure.topology();
        assert_eq!(topo.dof(&model.q0), 1);
        assert_eq!(topo.n_prescribed(), 4);
        // Moment balance about the pivot: f·1 = m g / 2 with l = 1.
        let mu = model.structure.cables[0].spec.rest_length.at(0.0);
        assert_relative_eq!(mu, 1.0 - 49.0 / 100.0, max_relative = 1e-12);
    }

    #[test]
    fn round_trip() {
        let sc = parse_scenario(pendulum_text()).unwrap().scenario;
        let text = sc.to_toml().unwrap();
        assert_eq!(parse_scenario(&text).unwrap().scenario, sc);
    }

    #[test]
    fn bare_units_are_rejected() {
        let text = pendulum_text().replace("mass_kg = 10.0", "mass = 10.0");
        let err = parse_scenario(&text).unwrap_err().to_string();
        assert!(err.contains("mass_kg"), "{err}");
        let text = pendulum_text().replace("timestep_s", "timestep");
        assert!(parse_scenario(&text).unwrap_err().to_string().contains("timestep_s"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = pendulum_text().replace("stiffness_n_per_m = 100.0", "stiffness_n_per_m = 100.0\ncolour = \"red\"");
        assert!(parse_scenario(&text).is_err());
    }

    #[test]
    fn dangling_references_are_rejected() {
        let text = pendulum_text().replace("to = { node = \"anchor\" }", "to = { node = \"nowhere\" }");
        let err = parse_scenario(&text).unwrap_err().to_string();
        assert!(err.contains("nowhere"), "{err}");
        let text = pendulum_text().replace("from = { node = \"tip\" }", "from = { member = \"beam\", position_m = [1.0, 0.0] }");
        assert!(parse_scenario(&text).is_err());
    }

    #[test]
    fn empty_cable_list_is_a_pure_multibody_scenario() {
        let end = pendulum_text().find("[[cables]]").unwrap();
        let p = parse_scenario(&pendulum_text()[..end]).unwrap();
        assert!(p.scenario.cables.is_empty());
        let model = p.scenario.build().unwrap();
        assert_eq!(model.structure.cables.len(), 0);
    }

    #[test]
    fn member_attachment_by_position() {
        let text = pendulum_text().replace(
            "from = { node = \"tip\" }",
            "from = { member = \"bar\", position_m = [0.5, 0.0] }",
        );
        let model = parse_scenario(&text).unwrap().scenario.build().unwrap();
        let mu = model.structure.cables[0].spec.rest_length.at(0.0);
        // Half the lever arm doubles the tension.
        let l = (0.25f64 + 1.0).sqrt();
        let f = 49.0 * 2.0 * l / 1.0;
        assert_relative_eq!(mu, l - f / 100.0, max_relative = 1e-10);
    }

    #[test]
    fn bar_frame_is_orthonormal() {
        let r = axis_frame(&vec_of(&[0.3, -0.2, 0.9]));
        assert!((r.tr_mul(&r) - DMatrix::identity(3, 3)).amax() < 1e-15);
        assert_relative_eq!(r.column(0).dot(&vec_of(&[0.3, -0.2, 0.9]).normalize()), 1.0);
    }
}
