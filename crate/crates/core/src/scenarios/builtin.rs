//! Built-in reference models: a planar double pendulum, a planar Class-3
//! tower, and a spatial tower stacking a deployable prism with tetrahedral
//! modules.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use super::{
    AttachSpec, CableEntry, InertiaSpec, JointSpec, MemberSpec, MotionSpec, NodeSpec, RestSpec,
    Scenario, Settings,
};
use crate::error::{Error, Result};
use crate::forces::STANDARD_GRAVITY;
use crate::members::Tag;

/// Parameters shared by the builtins. Unused fields are ignored.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BuiltinParams {
    pub gravity_m_per_s2: Option<f64>,
    /// Rest-length ratio of the essential cables of `example2`.
    pub alpha: Option<f64>,
    /// Rest-length ratio of the auxiliary cables of `example2`.
    pub beta: Option<f64>,
    pub setup: Option<Example2Setup>,
    pub stage: Option<Example3Stage>,
    /// Ground shaking frequency of `example3`; `None` keeps the ground still.
    pub seismic_hz: Option<f64>,
    /// Deployment duration of `example3`.
    pub deploy_s: Option<f64>,
}

pub const BUILTINS: &[&str] = &["example1", "example2", "example3"];

pub fn builtin(name: &str, p: &BuiltinParams) -> Result<Scenario> {
    match name {
        "example1" => Ok(example1(p.gravity_m_per_s2.unwrap_or(STANDARD_GRAVITY))),
        "example2" => example2(
            p.alpha.unwrap_or(0.95),
            p.beta.unwrap_or(0.998),
            p.setup.unwrap_or_default(),
            p.gravity_m_per_s2,
        ),
        "example3" => example3(
            p.stage.unwrap_or_default(),
            p.seismic_hz,
            p.deploy_s.unwrap_or(10.0),
            p.gravity_m_per_s2.unwrap_or(STANDARD_GRAVITY),
        ),
        _ => Err(Error::Scenario(format!(
            "unknown builtin `{name}`; expected one of {}",
            BUILTINS.join(", ")
        ))),
    }
}

fn attach_node(name: &str) -> AttachSpec {
    AttachSpec::node(name)
}

fn cable(name: String, from: AttachSpec, to: AttachSpec, k: f64, eta: f64, rest: RestSpec) -> CableEntry {
    CableEntry {
        name,
        from,
        to,
        stiffness_n_per_m: k,
        damping_n_s_per_m: eta,
        rest,
        slacking: true,
    }
}

fn fixed(name: &str, p: [f64; 2]) -> NodeSpec {
    NodeSpec {
        name: name.into(),
        position_m: p.to_vec(),
        motion: Some(MotionSpec::Fixed),
    }
}

pub mod example1_data {
    pub const BAR_MASS: f64 = 0.026934977798;
    pub const BAR_INERTIA: f64 = 1.1222907415833337e-5;
    pub const BAR_LENGTH: f64 = 0.07071067811865477;
    pub const TRIANGLE_MASS: f64 = 0.1271425597;
    pub const TRIANGLE_INERTIA: f64 = 7.063475538888889e-5;
    pub const TRIANGLE_HEIGHT: f64 = 0.05;
}

/// Double pendulum: a bar hinged to the ground and an isosceles right
/// triangle hinged to the free end of the bar at one end of its hypotenuse.
/// Both start horizontal, at rest, with the triangle's right angle below the
/// hypotenuse.
pub fn example1(g: f64) -> Scenario {
    use example1_data::*;
    let l = BAR_LENGTH;
    let hh = TRIANGLE_HEIGHT;
    let p = [l, 0.0];
    let q = [l + 2.0 * hh, 0.0];
    let apex = [l + hh, -hh];
    Scenario {
        name: "example1".into(),
        description: "planar double pendulum: bar and right-triangle plate".into(),
        dimension: 2,
        gravity_m_per_s2: g,
        outputs: vec![super::Output::Simulate],
        settings: Settings {
            timestep_s: 1e-3,
            duration_s: 4.0,
            ..Default::default()
        },
        nodes: vec![fixed("pivot", [0.0, 0.0])],
        members: vec![
            MemberSpec {
                name: "bar".into(),
                tag: Tag::Rr,
                mass_kg: BAR_MASS,
                inertia: InertiaSpec::BarKgM2(BAR_INERTIA),
                points_m: vec![vec![0.0, 0.0], p.to_vec()],
                mass_center_m: None,
                axes: None,
                slots: vec!["pivot".into(), "hinge".into()],
            },
            MemberSpec {
                name: "triangle".into(),
                tag: Tag::Rrv,
                mass_kg: TRIANGLE_MASS,
                inertia: InertiaSpec::PolarKgM2(TRIANGLE_INERTIA),
                points_m: vec![p.to_vec(), q.to_vec(), apex.to_vec()],
                mass_center_m: Some(vec![l + hh, -hh / 3.0]),
                axes: None,
                slots: vec!["hinge".into(), "tip".into(), String::new()],
            },
        ],
        joints: vec![],
        cables: vec![],
        point_loads: vec![],
    }
}

/// Cable setups of the planar tower.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Example2Setup {
    /// No gravity, still ground, undamped slacking cables; the prestressed
    /// reference state used for modal analysis.
    #[default]
    Static,
    /// Undamped, non-slacking springs under gravity and ground shaking.
    Un,
    /// Damped, non-slacking springs.
    Dn,
    /// Undamped slacking cables.
    Us,
    /// As `Us`, with the auxiliary anchors held still.
    UsAux,
}

impl FromStr for Example2Setup {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "STATIC" => Ok(Example2Setup::Static),
            "UN" => Ok(Example2Setup::Un),
            "DN" => Ok(Example2Setup::Dn),
            "US" => Ok(Example2Setup::Us),
            "US-AUX" | "US_AUX" | "USAUX" => Ok(Example2Setup::UsAux),
            _ => Err(Error::Scenario(format!(
                "unknown setup `{s}`; expected static, UN, DN, US or US-AUX"
            ))),
        }
    }
}

impl fmt::Display for Example2Setup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Example2Setup::Static => "static",
            Example2Setup::Un => "UN",
            Example2Setup::Dn => "DN",
            Example2Setup::Us => "US",
            Example2Setup::UsAux => "US-AUX",
        })
    }
}

pub mod example2_data {
    pub const BAR_MASS: f64 = 0.026934977798;
    pub const BAR_INERTIA: f64 = 2.244581483166667e-5;
    pub const BAR_LENGTH: f64 = 0.1;
    pub const TRIANGLE_MASS: f64 = 0.1271425597;
    pub const TRIANGLE_INERTIA: f64 = 7.063475538888889e-5;
    pub const TRIANGLE_HEIGHT: f64 = 0.05;
    pub const STIFFNESS: f64 = 100.0;
    pub const DAMPING: f64 = 0.1;
    /// Right auxiliary anchor; the left one is its mirror image.
    pub const ANCHOR: [f64; 2] = [0.2, 0.0357];
    pub const SEISMIC_AMPLITUDE: f64 = 0.01;
    pub const SEISMIC_HZ: f64 = 3.0;
}

/// Free choices in the planar tower's layout: which way each of triangles
/// 3, 5 and 7 points (`true` = apex up) and where the right auxiliary anchor
/// sits (the left one mirrors it).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TowerLayout {
    pub apex_up: [bool; 3],
    pub anchor_m: [f64; 2],
}

impl Default for TowerLayout {
    fn default() -> Self {
        TowerLayout {
            apex_up: [true; 3],
            anchor_m: example2_data::ANCHOR,
        }
    }
}

/// Planar three-level tower of four bars and three triangles.
///
/// Bars 1 and 2 stand on ground hinges and carry the hypotenuse tips of
/// triangle 3. Bar 4 rises from the apex of triangle 3 to the apex of
/// triangle 5, where bar 6 starts; bar 6 carries triangle 7 by its apex. Two
/// crossed cables brace each level, two vertical cables join the tips of
/// consecutive triangles, and two auxiliary cables tie the tips of triangle 5
/// to ground anchors. Cables 1 and 2 are the auxiliary ones.
pub fn example2(alpha: f64, beta: f64, setup: Example2Setup, g: Option<f64>) -> Result<Scenario> {
    example2_with_layout(alpha, beta, setup, g, &TowerLayout::default())
}

pub fn example2_with_layout(
    alpha: f64,
    beta: f64,
    setup: Example2Setup,
    g: Option<f64>,
    layout: &TowerLayout,
) -> Result<Scenario> {
    use example2_data::*;
    if !(alpha > 0.0 && alpha <= 1.0 && beta > 0.0 && beta <= 1.0) {
        return Err(Error::Scenario(format!(
            "rest-length ratios must lie in (0, 1], got alpha = {alpha}, beta = {beta}"
        )));
    }
    let w = TRIANGLE_HEIGHT;
    let l = BAR_LENGTH;
    let dir = |up: bool| if up { 1.0 } else { -1.0 };
    let g1 = [-w, 0.0];
    let g2 = [w, 0.0];
    let a1 = [-w, l];
    let a2 = [w, l];
    let c3 = [0.0, l + dir(layout.apex_up[0]) * w];
    let c5 = [0.0, c3[1] + l];
    let b1 = [-w, c5[1] - dir(layout.apex_up[1]) * w];
    let b2 = [w, b1[1]];
    let c7 = [0.0, c5[1] + l];
    let d1 = [-w, c7[1] - dir(layout.apex_up[2]) * w];
    let d2 = [w, d1[1]];
    let [anchor_x, anchor_y] = layout.anchor_m;

    let dynamic = setup != Example2Setup::Static;
    let shake = |ground: bool| {
        if dynamic && ground {
            MotionSpec::Sinusoid {
                amplitude_m: SEISMIC_AMPLITUDE,
                frequency_hz: SEISMIC_HZ,
                axis: vec![1.0, 0.0],
            }
        } else {
            MotionSpec::Fixed
        }
    };
    let node = |name: &str, p: [f64; 2], ground: bool| NodeSpec {
        name: name.into(),
        position_m: p.to_vec(),
        motion: Some(shake(ground)),
    };
    let anchors_move = setup != Example2Setup::UsAux;
    let nodes = vec![
        node("r1i", g1, true),
        node("r2i", g2, true),
        node("r01", [-anchor_x, anchor_y], anchors_move),
        node("r02", [anchor_x, anchor_y], anchors_move),
    ];
    let bar = |name: &str, a: [f64; 2], b: [f64; 2], slots: [&str; 2]| MemberSpec {
        name: name.into(),
        tag: Tag::Rr,
        mass_kg: BAR_MASS,
        inertia: InertiaSpec::BarKgM2(BAR_INERTIA),
        points_m: vec![a.to_vec(), b.to_vec()],
        mass_center_m: None,
        axes: None,
        slots: slots.iter().map(|s| s.to_string()).collect(),
    };
    let triangle = |name: &str, tag: Tag, pts: [[f64; 2]; 3], slots: [&str; 3]| {
        let cx = (pts[0][0] + pts[1][0] + pts[2][0]) / 3.0;
        let cy = (pts[0][1] + pts[1][1] + pts[2][1]) / 3.0;
        MemberSpec {
            name: name.into(),
            tag,
            mass_kg: TRIANGLE_MASS,
            inertia: InertiaSpec::PolarKgM2(TRIANGLE_INERTIA),
            points_m: pts.iter().map(|p| p.to_vec()).collect(),
            mass_center_m: Some(vec![cx, cy]),
            axes: None,
            slots: slots.iter().map(|s| s.to_string()).collect(),
        }
    };
    let members = vec![
        bar("bar1", g1, a1, ["r1i", "r1j"]),
        bar("bar2", g2, a2, ["r2i", "r2j"]),
        triangle("tri3", Tag::Ruv, [a1, a2, c3], ["r1j", "", ""]),
        bar("bar4", c3, c5, ["r4i", "r5i"]),
        triangle("tri5", Tag::Rrv, [c5, b1, b2], ["r5i", "r5j", ""]),
        bar("bar6", c5, c7, ["r5i", "r7i"]),
        triangle("tri7", Tag::Rrr, [c7, d1, d2], ["r7i", "r7j", "r7k"]),
    ];
    let joints = vec![
        JointSpec {
            a: attach_node("r2j"),
            b: AttachSpec::on_member("tri3", &a2),
        },
        JointSpec {
            a: attach_node("r4i"),
            b: AttachSpec::on_member("tri3", &c3),
        },
    ];
    let (eta, slacking) = match setup {
        Example2Setup::Un => (0.0, false),
        Example2Setup::Dn => (DAMPING, false),
        _ => (0.0, true),
    };
    let at5 = |p: [f64; 2]| AttachSpec::on_member("tri5", &p);
    let ends: [(AttachSpec, AttachSpec); 12] = [
        (attach_node("r01"), at5(b1)),
        (attach_node("r02"), at5(b2)),
        (attach_node("r1i"), attach_node("r2j")),
        (attach_node("r2i"), attach_node("r1j")),
        (attach_node("r1j"), at5(b1)),
        (attach_node("r2j"), at5(b2)),
        (attach_node("r1j"), at5(b2)),
        (attach_node("r2j"), at5(b1)),
        (at5(b1), attach_node("r7j")),
        (at5(b2), attach_node("r7k")),
        (at5(b1), attach_node("r7k")),
        (at5(b2), attach_node("r7j")),
    ];
    let cables = ends
        .into_iter()
        .enumerate()
        .map(|(i, (from, to))| {
            let ratio = if i < 2 { beta } else { alpha };
            let mut c = cable(format!("c{}", i + 1), from, to, STIFFNESS, eta, RestSpec::Ratio(ratio));
            c.slacking = slacking;
            c
        })
        .collect();
    let gravity = if dynamic { g.unwrap_or(STANDARD_GRAVITY) } else { g.unwrap_or(0.0) };
    Ok(Scenario {
        name: "example2".into(),
        description: format!("planar Class-3 tower, setup {setup}, alpha {alpha}, beta {beta}"),
        dimension: 2,
        gravity_m_per_s2: gravity,
        outputs: vec![if dynamic { super::Output::Simulate } else { super::Output::Modal }],
        settings: Settings {
            timestep_s: 1e-3,
            duration_s: 2.0,
            ..Default::default()
        },
        nodes,
        members,
        joints,
        cables,
        point_loads: vec![],
    })
}

/// Configurations of the spatial tower.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Example3Stage {
    #[default]
    Initial,
    Target,
    /// Starts in the initial equilibrium and moves the prism cables' rest
    /// lengths to their target values.
    Deploy,
}

impl FromStr for Example3Stage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "initial" => Ok(Example3Stage::Initial),
            "target" => Ok(Example3Stage::Target),
            "deploy" => Ok(Example3Stage::Deploy),
            _ => Err(Error::Scenario(format!(
                "unknown stage `{s}`; expected initial, target or deploy"
            ))),
        }
    }
}

impl fmt::Display for Example3Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Example3Stage::Initial => "initial",
            Example3Stage::Target => "target",
            Example3Stage::Deploy => "deploy",
        })
    }
}

pub mod example3_data {
    pub const BAR_MASS: f64 = 0.08;
    pub const BAR_INERTIA: f64 = 0.00032266666666666663;
    pub const BAR_LENGTH: f64 = 0.22;
    pub const TET_MASS: f64 = 0.2999233976;
    pub const TET_CENTER_HEIGHT: f64 = 0.01482294206269047;
    pub const TET_MOMENTS: [f64; 3] = [7.6639282053e-4, 7.6638139752e-4, 1.2464720496e-3];
    pub const TET_RADIUS: f64 = 0.1;
    pub const TET_HEIGHT: f64 = 0.07071067811865477;
    pub const PRISM_STIFFNESS: f64 = 1000.0;
    pub const STIFFNESS: f64 = 500.0;
    pub const DAMPING: f64 = 2.0;
    pub const DISTANCE: f64 = 0.03535533905932738;
    pub const R1: f64 = 0.1;
    /// `(h, r2)` of the initial and target configurations.
    pub const INITIAL: (f64, f64) = (0.07071067811865477, 0.11);
    pub const TARGET: (f64, f64) = (0.14142135623730953, 0.07);
    /// Rest lengths held fixed when solving for the others.
    pub const INNER_REST: f64 = 0.03;
    pub const JOINT_REST: f64 = 0.1;
    pub const SEISMIC_AMPLITUDE: f64 = 0.01;
}

fn ring(r: f64, angle: f64, z: f64) -> [f64; 3] {
    [r * angle.cos(), r * angle.sin(), z]
}

/// Spatial tower: a two-stage prism of six bars topped by tetrahedron 7,
/// then a Class-1 module (tetrahedra 7 and 8 held apart by cables), a Class-2
/// module (tetrahedra 8 and 9 joined apex to apex) and a second Class-1
/// module (tetrahedra 9 and 10).
///
/// Cables 1-9 belong to the prism, 10-12 and 22-24 are the outer cables of the
/// Class-1 modules (apex to the other tetrahedron's base), 13-15 and 19-21 the
/// vertical inner ones, and 16-18 join the bases of tetrahedra 8 and 9.
fn example3_geometry(h: f64, r2: f64, seismic_hz: Option<f64>, g: f64) -> Scenario {
    use example3_data::*;
    let big_h = TET_HEIGHT;
    let d = DISTANCE;
    let r1 = R1;
    let l = BAR_LENGTH;
    let twist = ((r1 * r1 + r2 * r2 - (l * l - h * h)) / (2.0 * r1 * r2)).acos();
    let third = 2.0 * PI / 3.0;
    let ground: Vec<[f64; 3]> = (0..3).map(|k| ring(r1, third * k as f64, 0.0)).collect();
    let middle: Vec<[f64; 3]> = (0..3).map(|k| ring(r2, third * k as f64 + twist, h)).collect();
    let top: Vec<[f64; 3]> = (0..3).map(|k| ring(r1, third * k as f64 + 2.0 * twist, 2.0 * h)).collect();
    let phase = 2.0 * twist;
    let base = |z: f64| -> Vec<[f64; 3]> { (0..3).map(|k| ring(TET_RADIUS, third * k as f64 + phase, z)).collect() };

    let z7 = 2.0 * h;
    let apex7 = [0.0, 0.0, z7 + big_h];
    let z8 = z7 + big_h - d;
    let apex8 = [0.0, 0.0, z8 + big_h];
    let z9 = apex8[2] + big_h;
    let z10 = z9 + big_h - d;
    let apex10 = [0.0, 0.0, z10 - big_h];
    let (b7, b8, b9, b10) = (top.clone(), base(z8), base(z9), base(z10));

    let gname = |k: usize| format!("g{k}");
    let mname = |k: usize| format!("m{k}");
    let tname = |k: usize| format!("t{k}");
    let motion = match seismic_hz {
        Some(nu) => MotionSpec::Sinusoid {
            amplitude_m: SEISMIC_AMPLITUDE,
            frequency_hz: nu,
            axis: vec![1.0, 0.0, 0.0],
        },
        None => MotionSpec::Fixed,
    };
    let nodes = (0..3)
        .map(|k| NodeSpec {
            name: gname(k),
            position_m: ground[k].to_vec(),
            motion: Some(motion.clone()),
        })
        .collect();

    let mut members = Vec::new();
    let levels = [(&ground, &middle, "g", "m"), (&middle, &top, "m", "t")];
    for (i, (from, to, lo, hi)) in levels.into_iter().enumerate() {
        for k in 0..3 {
            members.push(MemberSpec {
                name: format!("bar{}", 3 * i + k + 1),
                tag: Tag::Rr,
                mass_kg: BAR_MASS,
                inertia: InertiaSpec::BarKgM2(BAR_INERTIA),
                points_m: vec![from[k].to_vec(), to[k].to_vec()],
                mass_center_m: None,
                axes: None,
                slots: vec![format!("{lo}{k}"), format!("{hi}{k}")],
            });
        }
    }
    let tet = |name: &str, tag: Tag, base: &[[f64; 3]], apex: [f64; 3], up: bool, points: Vec<[f64; 3]>, slots: [&str; 4]| {
        let s = if up { 1.0 } else { -1.0 };
        let zb = base[0][2];
        let e1 = [phase.cos(), phase.sin(), 0.0];
        let e3 = [0.0, 0.0, s];
        let e2 = [-s * phase.sin(), s * phase.cos(), 0.0];
        debug_assert!((apex[2] - zb - s * TET_HEIGHT).abs() < 1e-12);
        MemberSpec {
            name: name.into(),
            tag,
            mass_kg: TET_MASS,
            inertia: InertiaSpec::PrincipalKgM2(TET_MOMENTS),
            points_m: points.iter().map(|p| p.to_vec()).collect(),
            mass_center_m: Some(vec![0.0, 0.0, zb + s * TET_CENTER_HEIGHT]),
            axes: Some(vec![e1.to_vec(), e2.to_vec(), e3.to_vec()]),
            slots: slots.iter().map(|s| s.to_string()).collect(),
        }
    };
    members.push(tet("tet7", Tag::Rrrr, &b7, apex7, true, vec![b7[0], b7[1], b7[2], apex7], ["t0", "t1", "t2", "apex7"]));
    members.push(tet("tet8", Tag::Rrrw, &b8, apex8, true, vec![apex8, b8[0], b8[1], b8[2]], ["apex8", "r8j", "r8k", ""]));
    members.push(tet("tet9", Tag::Rrvw, &b9, apex8, false, vec![apex8, b9[0], b9[1], b9[2]], ["apex8", "r9j", "", ""]));
    members.push(tet("tet10", Tag::Ruvw, &b10, apex10, false, vec![apex10, b10[0], b10[1], b10[2]], ["r10i", "", "", ""]));

    let on = |m: &str, p: [f64; 3]| AttachSpec::on_member(m, &p);
    let mut cables = Vec::new();
    let mut push = |from: AttachSpec, to: AttachSpec, k: f64, rest: RestSpec| {
        let n = cables.len() + 1;
        cables.push(cable(format!("c{n}"), from, to, k, DAMPING, rest));
    };
    for k in 0..3 {
        push(attach_node(&gname(k)), attach_node(&mname((k + 2) % 3)), PRISM_STIFFNESS, RestSpec::Solve);
    }
    for k in 0..3 {
        push(attach_node(&mname(k)), attach_node(&mname((k + 1) % 3)), PRISM_STIFFNESS, RestSpec::Solve);
    }
    for k in 0..3 {
        push(attach_node(&mname(k)), attach_node(&tname((k + 2) % 3)), PRISM_STIFFNESS, RestSpec::Solve);
    }
    for p in &b8 {
        push(on("tet7", apex7), on("tet8", *p), STIFFNESS, RestSpec::Solve);
    }
    for k in 0..3 {
        push(on("tet7", b7[k]), on("tet8", b8[k]), STIFFNESS, RestSpec::LengthM(INNER_REST));
    }
    for k in 0..3 {
        push(on("tet8", b8[k]), on("tet9", b9[k]), STIFFNESS, RestSpec::LengthM(JOINT_REST));
    }
    for k in 0..3 {
        push(on("tet9", b9[k]), on("tet10", b10[k]), STIFFNESS, RestSpec::LengthM(INNER_REST));
    }
    for p in &b9 {
        push(on("tet10", apex10), on("tet9", *p), STIFFNESS, RestSpec::Solve);
    }

    Scenario {
        name: "example3".into(),
        description: String::new(),
        dimension: 3,
        gravity_m_per_s2: g,
        outputs: vec![],
        settings: Settings {
            timestep_s: 1e-3,
            duration_s: 15.0,
            record_every: 10,
            ..Default::default()
        },
        nodes,
        members,
        joints: vec![],
        cables,
        point_loads: vec![],
    }
}

/// Number of actuated prism cables in `example3`.
pub const EXAMPLE3_ACTUATED: usize = 9;

pub fn example3(stage: Example3Stage, seismic_hz: Option<f64>, deploy_s: f64, g: f64) -> Result<Scenario> {
    use example3_data::*;
    let ground = match seismic_hz {
        Some(nu) => format!(", ground shaking at {nu} Hz"),
        None => String::new(),
    };
    match stage {
        Example3Stage::Initial | Example3Stage::Target => {
            let (h, r2) = if stage == Example3Stage::Initial { INITIAL } else { TARGET };
            let mut sc = example3_geometry(h, r2, seismic_hz, g);
            sc.description = format!("spatial deployable tower, {stage} equilibrium{ground}");
            sc.outputs = vec![super::Output::Modal, super::Output::InverseStatics];
            Ok(sc)
        }
        Example3Stage::Deploy => {
            if !(deploy_s > 0.0) {
                return Err(Error::Scenario(format!("deployment duration must be positive, got {deploy_s}")));
            }
            let start = example3_geometry(INITIAL.0, INITIAL.1, None, g).build()?;
            let end = example3_geometry(TARGET.0, TARGET.1, None, g).build()?;
            let mut sc = example3_geometry(INITIAL.0, INITIAL.1, seismic_hz, g);
            for (j, c) in sc.cables.iter_mut().enumerate() {
                let mu0 = start.structure.cables[j].spec.rest_length.at(0.0);
                let mu1 = end.structure.cables[j].spec.rest_length.at(0.0);
                c.rest = if j < EXAMPLE3_ACTUATED {
                    RestSpec::Actuated {
                        start_m: mu0,
                        end_m: mu1,
                        duration_s: deploy_s,
                    }
                } else {
                    RestSpec::LengthM(mu0)
                };
            }
            sc.description = format!("spatial deployable tower, deployment over {deploy_s} s{ground}");
            sc.outputs = vec![super::Output::Simulate];
            sc.settings.duration_s = 20.0;
            Ok(sc)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_builtin_validates_and_round_trips() {
        for name in BUILTINS {
            let sc = builtin(name, &BuiltinParams::default()).unwrap();
            sc.validate().unwrap();
            let text = sc.to_toml().unwrap();
            assert_eq!(super::super::parse_scenario(&text).unwrap().scenario, sc, "{name}");
        }
    }

    #[test]
    fn unknown_builtin_is_an_error() {
        assert!(builtin("example4", &BuiltinParams::default()).is_err());
    }

    #[test]
    fn setup_and_stage_names() {
        for s in ["static", "UN", "DN", "US", "US-AUX"] {
            let v: Example2Setup = s.parse().unwrap();
            assert_eq!(v.to_string().to_uppercase(), s.to_uppercase());
        }
        assert_eq!("target".parse::<Example3Stage>().unwrap(), Example3Stage::Target);
        assert!("sideways".parse::<Example3Stage>().is_err());
    }

    #[test]
    fn double_pendulum_shape() {
        let m = example1(9.8).build().unwrap();
        let topo = m.structure.topology();
        assert_eq!(topo.dof(&m.q0), 2);
        assert_eq!(topo.n_constraints(), 1 + 3);
    }

    #[test]
    fn tower_has_five_dof() {
        let m = example2(0.9, 0.9, Example2Setup::Static, None).unwrap().build().unwrap();
        assert_eq!(m.structure.topology().dof(&m.q0), 5);
        assert_eq!(m.structure.cables.len(), 12);
    }

    #[test]
    fn spatial_tower_counts() {
        let m = example3(Example3Stage::Initial, None, 10.0, 9.8).unwrap().build().unwrap();
        let topo = m.structure.topology();
        assert_eq!(topo.n(), 63);
        assert_eq!(topo.n_free(), 54);
        assert_eq!(topo.n_constraints(), 30);
        assert_eq!(topo.dof(&m.q0), 24);
    }
}
