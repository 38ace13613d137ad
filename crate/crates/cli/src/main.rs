//! `tensegrity`: run simulations, modal analyses, inverse statics and
//! parameter sweeps on scenario files or the built-in examples.

mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use tensegrity::integrator::Integrator;
use tensegrity::modal::{frequency_sweep, modal_analysis, ModeSet};
use tensegrity::scenarios::builtin::BUILTINS;
use tensegrity::scenarios::{
    builtin, parse_scenario, BuiltinParams, Example2Setup, Example3Stage, Model, RestSpec, Scenario,
};
use tensegrity::statics::{inverse_statics_rest_lengths, rest_length_system};
use tensegrity::Error;

use output::Csv;

/// Exit codes. Stable; documented in the guide.
mod exit {
    pub const IO: u8 = 1;
    pub const PARSE: u8 = 2;
    pub const PRECONDITION: u8 = 3;
    pub const SOLVER: u8 = 4;
}

const OUT_ENV: &str = "TENSEGRITY_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "tensegrity", version, about = "Tensegrity statics, modal analysis and dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate the equations of motion; writes trajectory.csv, energy.csv
    /// and slack_events.csv.
    Simulate(Common),
    /// Natural frequencies and mode shapes at the static equilibrium; writes
    /// frequencies.csv and modes.csv.
    Modal(Common),
    /// Rest lengths holding the reference configuration; writes
    /// restlengths.csv.
    InverseStatics(Common),
    /// Natural frequencies over a parameter grid; writes grid.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = SweepParam::AlphaBeta)]
        param: SweepParam,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long, default_value_t = 32)]
        points: usize,
        /// Worker threads; 0 lets the pool decide.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Print degrees of freedom, rank of the rest-length matrix, slack cables
    /// and constraint residual of the reference configuration.
    Check(Common),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum SweepParam {
    /// `--alpha` and `--beta` together (example2).
    AlphaBeta,
    Alpha,
    Beta,
    Gravity,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Built-in name (example1, example2, example3) or path to a TOML file.
    scenario: String,
    /// Timestep in seconds.
    #[arg(long)]
    dt: Option<f64>,
    /// Simulated time in seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// Newton tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Gravity in m/s².
    #[arg(long)]
    gravity: Option<f64>,
    /// Keep every n-th step in trajectory.csv.
    #[arg(long)]
    record_every: Option<usize>,
    /// example2: rest-length ratio of cables 3 to 12.
    #[arg(long)]
    alpha: Option<f64>,
    /// example2: rest-length ratio of cables 1 and 2.
    #[arg(long)]
    beta: Option<f64>,
    /// example2: static, UN, DN, US or US-AUX.
    #[arg(long)]
    setup: Option<Example2Setup>,
    /// example3: initial, target or deploy.
    #[arg(long)]
    stage: Option<Example3Stage>,
    /// example3: ground shaking frequency in Hz.
    #[arg(long)]
    nu: Option<f64>,
    /// example3: deployment duration in seconds.
    #[arg(long)]
    td: Option<f64>,
    /// Output directory.
    #[arg(long, short, env = OUT_ENV, default_value = "tensegrity-out")]
    out: PathBuf,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NonConvergence { .. } | Error::SingularJacobian { .. } => exit::SOLVER,
            Error::Io(_) => exit::IO,
            _ => exit::PRECONDITION,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new(exit::IO, e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Simulate(c) => simulate(&c),
        Command::Modal(c) => modal(&c),
        Command::InverseStatics(c) => inverse_statics(&c),
        Command::Sweep {
            common,
            param,
            from,
            to,
            points,
            jobs,
        } => sweep(&common, param, from, to, points, jobs),
        Command::Check(c) => check(&c),
    }
}

fn is_builtin(name: &str) -> bool {
    BUILTINS.contains(&name)
}

/// Loads the scenario and applies the overrides.
fn load(c: &Common) -> Result<Scenario, Failure> {
    let mut scenario = if is_builtin(&c.scenario) {
        let params = BuiltinParams {
            gravity_m_per_s2: c.gravity,
            alpha: c.alpha,
            beta: c.beta,
            setup: c.setup,
            stage: c.stage,
            seismic_hz: c.nu,
            deploy_s: c.td,
        };
        let unused: Vec<&str> = match c.scenario.as_str() {
            "example1" => vec!["alpha", "beta", "setup", "stage", "nu", "td"],
            "example2" => vec!["stage", "nu", "td"],
            _ => vec!["alpha", "beta", "setup"],
        };
        reject_unused(c, &unused)?;
        builtin(&c.scenario, &params).map_err(|e| Failure::new(exit::PARSE, e.to_string()))?
    } else {
        reject_unused(c, &["alpha", "beta", "setup", "stage", "nu", "td"])?;
        let text = std::fs::read_to_string(&c.scenario)
            .map_err(|e| Failure::new(exit::IO, format!("{}: {e}", c.scenario)))?;
        let parsed = parse_scenario(&text).map_err(|e| Failure::new(exit::PARSE, e.to_string()))?;
        if !parsed.defaulted.is_empty() {
            eprintln!("defaulted: {}", parsed.defaulted.join(", "));
        }
        let mut s = parsed.scenario;
        if let Some(g) = c.gravity {
            s.gravity_m_per_s2 = g;
        }
        s
    };
    let st = &mut scenario.settings;
    if let Some(v) = c.dt {
        st.timestep_s = v;
    }
    if let Some(v) = c.duration {
        st.duration_s = v;
    }
    if let Some(v) = c.tol {
        st.tolerance = v;
    }
    if let Some(v) = c.max_iter {
        st.max_iterations = v;
    }
    if let Some(v) = c.record_every {
        st.record_every = v;
    }
    scenario
        .validate()
        .map_err(|e| Failure::new(exit::PARSE, e.to_string()))?;
    Ok(scenario)
}

fn reject_unused(c: &Common, names: &[&str]) -> Outcome {
    let given = |n: &str| match n {
        "alpha" => c.alpha.is_some(),
        "beta" => c.beta.is_some(),
        "setup" => c.setup.is_some(),
        "stage" => c.stage.is_some(),
        "nu" => c.nu.is_some(),
        "td" => c.td.is_some(),
        _ => false,
    };
    match names.iter().find(|n| given(n)) {
        Some(n) => Err(Failure::new(
            exit::PARSE,
            format!("--{n} does not apply to scenario `{}`", c.scenario),
        )),
        None => Ok(()),
    }
}

fn build(s: &Scenario) -> Result<Model, Failure> {
    Ok(s.build()?)
}

fn out_dir(c: &Common) -> Result<PathBuf, Failure> {
    std::fs::create_dir_all(&c.out)?;
    Ok(c.out.clone())
}

fn simulate(c: &Common) -> Outcome {
    let scenario = load(c)?;
    let model = build(&scenario)?;
    let dir = out_dir(c)?;
    let integ = Integrator::new(&model.structure, model.settings)?;
    let n = model.q0.len();
    let (init, drift) = integ.initial_state(&model.q0, &DVector::zeros(n), 0.0)?;
    if drift > 1e-9 {
        eprintln!("warning: initial velocities violate the velocity constraints by {drift:.3e}");
    }
    let duration = model.duration;
    let mut next_report = 1.0;
    let traj = integ.simulate_with(init, duration, model.record_every, |state| {
        if state.t + 1e-9 >= next_report {
            eprintln!("t = {:.0} s / {duration} s", state.t);
            next_report += 1.0;
        }
    });
    output::write_trajectory(&dir.join("trajectory.csv"), &model, &traj)?;
    output::write_energy(&dir.join("energy.csv"), &model, &traj)?;
    output::write_slack_events(&dir.join("slack_events.csv"), &model, &traj)?;
    eprintln!(
        "{} steps, {} slack events, max |Φ| {:.3e}; wrote {}",
        traj.steps,
        traj.slack_events.len(),
        traj.max_constraint_violation,
        dir.display()
    );
    match traj.failure {
        Some(e) => {
            let t = traj.final_state.as_ref().map_or(0.0, |s| s.t);
            Err(Failure::new(exit::SOLVER, format!("step failed after t = {t}: {e}")))
        }
        None => Ok(()),
    }
}

fn modal(c: &Common) -> Outcome {
    let scenario = load(c)?;
    let model = build(&scenario)?;
    let dir = out_dir(c)?;
    let eq = model.equilibrium()?;
    let (lin, modes) = modal_analysis(&model.structure, &eq, 0.0)?;
    let mut f = Csv::create(&dir.join("frequencies.csv"), &["mode", "omega2_rad2_per_s2", "frequency_hz"])?;
    for (r, (w2, hz)) in modes.eigenvalues.iter().zip(modes.frequencies()).enumerate() {
        f.row_mixed(&[(r + 1).to_string()], &[*w2, hz])?;
    }
    f.finish()?;
    output::write_modes(&dir.join("modes.csv"), &model, &lin, &modes)?;
    if !modes.is_stable() {
        eprintln!("warning: the equilibrium is unstable (negative ω²)");
    }
    let shown: Vec<String> = modes.frequencies().iter().take(6).map(|f| format!("{f:.6}")).collect();
    eprintln!("lowest frequencies [Hz]: {}", shown.join(", "));
    Ok(())
}

fn inverse_statics(c: &Common) -> Outcome {
    let scenario = load(c)?;
    let model = build(&scenario)?;
    let dir = out_dir(c)?;
    let s = &model.structure;
    let fixed: Vec<(usize, f64)> = scenario
        .cables
        .iter()
        .enumerate()
        .filter(|(_, cab)| !matches!(cab.rest, RestSpec::Solve))
        .map(|(j, _)| (j, s.cables[j].spec.rest_length.at(0.0)))
        .collect();
    let sol = inverse_statics_rest_lengths(s, &model.q0, &fixed)?;
    let lengths: Vec<f64> = (0..s.cables.len())
        .map(|j| s.cable_vector(j, &model.q0).norm())
        .collect();
    let mut w = Csv::create(
        &dir.join("restlengths.csv"),
        &["cable", "name", "length_m", "rest_length_m", "force_density_n_per_m", "tension_n", "solved"],
    )?;
    for (j, cab) in s.cables.iter().enumerate() {
        let l = lengths[j];
        let gamma = sol.gamma[j];
        let solved = matches!(scenario.cables[j].rest, RestSpec::Solve);
        let mut row = vec![(j + 1).to_string(), cab.spec.name.clone()];
        row.extend([l, sol.rest_lengths[j], gamma, gamma * l].map(output::num));
        row.push(if solved { "1" } else { "0" }.into());
        w.row(&row)?;
    }
    w.finish()?;
    eprintln!(
        "rank(B): {}, least-squares residual {:.3e}; wrote {}",
        sol.rank,
        sol.residual,
        dir.join("restlengths.csv").display()
    );
    Ok(())
}

fn sweep(c: &Common, param: SweepParam, from: f64, to: f64, points: usize, jobs: usize) -> Outcome {
    if points == 0 {
        return Err(Failure::new(exit::PARSE, "--points must be positive"));
    }
    let builtin_only = matches!(param, SweepParam::AlphaBeta | SweepParam::Alpha | SweepParam::Beta);
    if builtin_only && c.scenario != "example2" {
        return Err(Failure::new(
            exit::PARSE,
            format!("--param {param:?} needs scenario example2"),
        ));
    }
    // Validate the base scenario once before fanning out.
    load(c)?;
    let dir = out_dir(c)?;
    let grid: Vec<f64> = (0..points)
        .map(|i| {
            if points == 1 {
                from
            } else {
                from + (to - from) * i as f64 / (points - 1) as f64
            }
        })
        .collect();
    let eval = |v: &f64| -> tensegrity::Result<ModeSet> {
        let mut cc = c.clone();
        match param {
            SweepParam::AlphaBeta => {
                cc.alpha = Some(*v);
                cc.beta = Some(*v);
            }
            SweepParam::Alpha => cc.alpha = Some(*v),
            SweepParam::Beta => cc.beta = Some(*v),
            SweepParam::Gravity => cc.gravity = Some(*v),
        }
        let scenario = load(&cc).map_err(|f| Error::Scenario(f.message))?;
        let model = scenario.build()?;
        let eq = model.equilibrium()?;
        Ok(modal_analysis(&model.structure, &eq, 0.0)?.1)
    };
    let results = frequency_sweep(&grid, jobs, eval);
    let width = results
        .iter()
        .filter_map(|r| r.as_ref().ok())
        .map(|m| m.eigenvalues.len())
        .max()
        .unwrap_or(0);
    let name = match param {
        SweepParam::AlphaBeta => "alpha_beta",
        SweepParam::Alpha => "alpha",
        SweepParam::Beta => "beta",
        SweepParam::Gravity => "gravity_m_per_s2",
    };
    let mut header: Vec<String> = vec![name.into(), "status".into()];
    header.extend((1..=width).map(|r| format!("f{r}_hz")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut w = Csv::create(&dir.join("grid.csv"), &header)?;
    let mut failed = 0;
    for (v, r) in grid.iter().zip(&results) {
        match r {
            Ok(m) => {
                let status = if m.is_stable() { "stable" } else { "unstable" };
                let mut f = m.frequencies();
                f.resize(width, f64::NAN);
                w.row_mixed(&[output::num(*v), status.into()], &f)?;
            }
            Err(e) => {
                failed += 1;
                eprintln!("{name} = {v}: {e}");
                w.row_mixed(&[output::num(*v), "failed".into()], &vec![f64::NAN; width])?;
            }
        }
    }
    w.finish()?;
    eprintln!("{} grid points, {failed} failed; wrote {}", grid.len(), dir.join("grid.csv").display());
    if failed == grid.len() {
        return Err(Failure::new(exit::SOLVER, "every grid point failed"));
    }
    Ok(())
}

fn check(c: &Common) -> Outcome {
    let scenario = load(c)?;
    let model = build(&scenario)?;
    let s = &model.structure;
    let topo = s.topology();
    let q = &model.q0;
    let dof = topo.dof(q);
    let rank = rest_length_system(s, q)?.rank();
    let states = s.cable_states(q, &DVector::zeros(q.len()), 0.0)?;
    let slack: Vec<&str> = states
        .iter()
        .zip(&s.cables)
        .filter(|(st, _)| st.slack)
        .map(|(_, cab)| cab.spec.name.as_str())
        .collect();
    let phi = tensegrity::linalg::inf_norm(&topo.constraints(q));
    println!("DoF: {dof}, rank(B): {rank}, slack cables: {}", slack.len());
    println!(
        "coordinates: {} ({} free, {} prescribed), constraints: {}, members: {}, cables: {}",
        topo.n(),
        topo.n_free(),
        topo.n_prescribed(),
        topo.n_constraints(),
        topo.members().len(),
        s.cables.len()
    );
    println!("max |Φ|: {phi:.3e}");
    if !slack.is_empty() {
        println!("slack: {}", slack.join(", "));
    }
    if let Ok(eq) = model.equilibrium() {
        println!("static residual: {:.3e}", eq.residual_norm);
    }
    Ok(())
}
