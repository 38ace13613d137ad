//! CSV writers. Numbers use `{:.16e}`, which round-trips every `f64`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DVector;
use tensegrity::integrator::Trajectory;
use tensegrity::modal::{LinearizedModel, ModeSet};
use tensegrity::scenarios::Model;

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct Csv {
    w: BufWriter<File>,
}

impl Csv {
    pub fn create(path: &Path, header: &[&str]) -> std::io::Result<Self> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "{}", header.join(","))?;
        Ok(Csv { w })
    }

    pub fn row(&mut self, fields: &[String]) -> std::io::Result<()> {
        writeln!(self.w, "{}", fields.join(","))
    }

    pub fn row_mixed(&mut self, text: &[String], values: &[f64]) -> std::io::Result<()> {
        let mut fields = text.to_vec();
        fields.extend(values.iter().map(|&v| num(v)));
        self.row(&fields)
    }

    pub fn finish(mut self) -> std::io::Result<()> {
        self.w.flush()
    }
}

/// `node.x`, `node.y`, ... for every global coordinate.
fn coordinate_labels(model: &Model) -> Vec<String> {
    let topo = model.structure.topology();
    let axes = ["x", "y", "z"];
    topo.nodes()
        .iter()
        .flat_map(|n| (0..topo.dim()).map(move |d| format!("{}.{}", n.name, axes[d])))
        .collect()
}

pub fn write_trajectory(path: &Path, model: &Model, traj: &Trajectory) -> std::io::Result<()> {
    let s = &model.structure;
    let topo = s.topology();
    let labels = coordinate_labels(model);
    let mut header = vec!["t".to_string()];
    header.extend(labels.iter().map(|l| format!("q:{l}")));
    header.extend(topo.free_indices().iter().map(|&i| format!("v:{}", labels[i])));
    for c in &s.cables {
        header.push(format!("l:{}", c.spec.name));
    }
    for c in &s.cables {
        header.push(format!("f:{}", c.spec.name));
    }
    for c in &s.cables {
        header.push(format!("slack:{}", c.spec.name));
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut w = Csv::create(path, &header)?;
    for k in 0..traj.times.len() {
        let mut fields = vec![num(traj.times[k])];
        fields.extend(traj.q[k].iter().map(|&v| num(v)));
        fields.extend(topo.free_indices().iter().map(|&i| num(traj.qdot[k][i])));
        fields.extend(traj.cable_lengths[k].iter().map(|&v| num(v)));
        fields.extend(traj.tensions[k].iter().map(|&v| num(v)));
        fields.extend(traj.slack[k].iter().map(|&b| if b { "1" } else { "0" }.to_string()));
        w.row(&fields)?;
    }
    w.finish()
}

pub fn write_energy(path: &Path, model: &Model, traj: &Trajectory) -> std::io::Result<()> {
    let s = &model.structure;
    let mut w = Csv::create(path, &["t", "kinetic_j", "potential_j", "total_j"])?;
    for k in 0..traj.times.len() {
        let t = traj.times[k];
        let kin = s.topology().kinetic_energy(&traj.qdot[k]);
        let pot = s.potential_energy(&traj.q[k], t);
        w.row_mixed(&[], &[t, kin, pot, kin + pot])?;
    }
    w.finish()
}

pub fn write_slack_events(path: &Path, model: &Model, traj: &Trajectory) -> std::io::Result<()> {
    let mut w = Csv::create(path, &["t", "cable", "name", "state"])?;
    for e in &traj.slack_events {
        let state = if e.slack { "slack" } else { "taut" };
        w.row(&[
            num(e.t),
            (e.cable + 1).to_string(),
            model.structure.cables[e.cable].spec.name.clone(),
            state.into(),
        ])?;
    }
    w.finish()
}

/// One row per global coordinate: the equilibrium value and each
/// mass-normalized mode shape (zero on prescribed coordinates).
pub fn write_modes(path: &Path, model: &Model, lin: &LinearizedModel, modes: &ModeSet) -> std::io::Result<()> {
    let topo = model.structure.topology();
    let labels = coordinate_labels(model);
    let r = modes.eigenvalues.len();
    let mut header = vec!["coordinate".to_string(), "equilibrium".to_string()];
    header.extend((1..=r).map(|k| format!("mode{k}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut w = Csv::create(path, &header)?;
    let free_shapes = &lin.basis * &modes.shapes;
    let n = lin.q.len();
    let mut columns: Vec<DVector<f64>> = Vec::with_capacity(r);
    for k in 0..r {
        let mut full = DVector::zeros(n);
        topo.scatter_free(&mut full, &free_shapes.column(k).into_owned());
        columns.push(full);
    }
    for i in 0..n {
        let mut values = vec![lin.q[i]];
        values.extend(columns.iter().map(|c| c[i]));
        w.row_mixed(&[labels[i].clone()], &values)?;
    }
    w.finish()
}
