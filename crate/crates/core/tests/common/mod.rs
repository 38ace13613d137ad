//! Oracles and helpers shared by the integration tests.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rustfft::{num_complex::Complex, FftPlanner};
use tensegrity::forces::Structure;
use tensegrity::scenarios::builtin::{example1_data, Example2Setup};
use tensegrity::scenarios::{builtin, BuiltinParams, Model};

pub fn model(name: &str, p: &BuiltinParams) -> Model {
    builtin(name, p).unwrap().build().unwrap()
}

pub fn example2_model(alpha: f64, beta: f64, setup: Example2Setup) -> Model {
    let p = BuiltinParams {
        alpha: Some(alpha),
        beta: Some(beta),
        setup: Some(setup),
        ..Default::default()
    };
    model("example2", &p)
}

/// Value of the node called `name` in `q`.
pub fn node(model: &Model, q: &DVector<f64>, name: &str) -> DVector<f64> {
    let topo = model.structure.topology();
    let id = topo.node_by_name(name).unwrap();
    let m = topo.dim();
    q.rows(id.0 * m, m).into_owned()
}

/// `(θ₁, θ₂)`: angle of the bar and of the triangle's hypotenuse.
pub fn pendulum_angles(model: &Model, q: &DVector<f64>) -> (f64, f64) {
    let p = node(model, q, "pivot");
    let h = node(model, q, "hinge");
    let t = node(model, q, "tip");
    let a = &h - &p;
    let b = &t - &h;
    (a[1].atan2(a[0]), b[1].atan2(b[0]))
}

/// Two-angle Lagrangian of the double pendulum.
pub struct PendulumOde {
    m1: f64,
    m2: f64,
    i1: f64,
    i2: f64,
    l: f64,
    d: f64,
    phi0: f64,
    g: f64,
}

impl PendulumOde {
    pub fn new(g: f64) -> Self {
        use example1_data::*;
        // Mass centre of the triangle seen from the hinge, hypotenuse along x.
        let (dx, dy): (f64, f64) = (0.05, -TRIANGLE_HEIGHT / 3.0);
        PendulumOde {
            m1: BAR_MASS,
            m2: TRIANGLE_MASS,
            i1: BAR_INERTIA,
            i2: TRIANGLE_INERTIA,
            l: BAR_LENGTH,
            d: dx.hypot(dy),
            phi0: dy.atan2(dx),
            g,
        }
    }

    /// `y = (θ₁, θ₂, θ̇₁, θ̇₂)`.
    pub fn rhs(&self, y: &[f64; 4]) -> [f64; 4] {
        let PendulumOde {
            m1,
            m2,
            i1,
            i2,
            l,
            d,
            phi0,
            g,
        } = *self;
        let (t1, t2, w1, w2) = (y[0], y[1], y[2], y[3]);
        let psi = t2 + phi0;
        let delta = psi - t1;
        let k = m2 * l * d;
        let m11 = i1 + m1 * l * l / 4.0 + m2 * l * l;
        let m22 = i2 + m2 * d * d;
        let m12 = k * delta.cos();
        let r1 = k * delta.sin() * w2 * w2 - (m1 * l / 2.0 + m2 * l) * g * t1.cos();
        let r2 = -k * delta.sin() * w1 * w1 - m2 * g * d * psi.cos();
        let det = m11 * m22 - m12 * m12;
        [w1, w2, (m22 * r1 - m12 * r2) / det, (m11 * r2 - m12 * r1) / det]
    }

    /// Potential energy of the hanging equilibrium, the lowest possible.
    pub fn min_potential(&self) -> f64 {
        -self.g * ((self.m1 * self.l / 2.0 + self.m2 * self.l) + self.m2 * self.d)
    }

    pub fn energy(&self, y: &[f64; 4]) -> f64 {
        let (t1, t2, w1, w2) = (y[0], y[1], y[2], y[3]);
        let psi = t2 + self.phi0;
        let k = self.m2 * self.l * self.d;
        let m11 = self.i1 + self.m1 * self.l * self.l / 4.0 + self.m2 * self.l * self.l;
        let m22 = self.i2 + self.m2 * self.d * self.d;
        let m12 = k * (psi - t1).cos();
        let t = 0.5 * (m11 * w1 * w1 + 2.0 * m12 * w1 * w2 + m22 * w2 * w2);
        let v = self.g * ((self.m1 * self.l / 2.0 + self.m2 * self.l) * t1.sin() + self.m2 * self.d * psi.sin());
        t + v
    }
}

/// Dormand–Prince 5(4) with step-size control, steps capped at `h_max` and
/// landing exactly on every output time.
pub fn dopri5<F>(f: F, y0: [f64; 4], outputs: &[f64], h_max: f64, tol: f64) -> Vec<[f64; 4]>
where
    F: Fn(&[f64; 4]) -> [f64; 4],
{
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let mut out = Vec::with_capacity(outputs.len());
    let mut t = 0.0;
    let mut y = y0;
    let mut h = h_max;
    for &target in outputs {
        while target - t > 1e-15 {
            let step = h.min(h_max).min(target - t);
            let mut k = [[0.0; 4]; 7];
            for s in 0..7 {
                let mut ys = y;
                for (j, kj) in k.iter().enumerate().take(s) {
                    for i in 0..4 {
                        ys[i] += step * A[s][j] * kj[i];
                    }
                }
                k[s] = f(&ys);
            }
            let mut y5 = y;
            let mut err: f64 = 0.0;
            for i in 0..4 {
                let (mut d5, mut d4) = (0.0, 0.0);
                for s in 0..7 {
                    d5 += B5[s] * k[s][i];
                    d4 += B4[s] * k[s][i];
                }
                y5[i] += step * d5;
                let sc = tol * (1.0 + y[i].abs().max(y5[i].abs()));
                err = err.max((step * (d5 - d4)).abs() / sc);
            }
            if err <= 1.0 {
                t += step;
                y = y5;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = step * factor;
        }
        t = target;
        out.push(y);
    }
    out
}

/// Frequency of the largest spectral peak of a uniformly sampled signal,
/// refined by a parabola through the log magnitudes around the peak bin.
pub fn fft_peak(signal: &[f64], dt: f64) -> f64 {
    let n = signal.len();
    let mean = signal.iter().sum::<f64>() / n as f64;
    let padded = (8 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); padded];
    for (i, &x) in signal.iter().enumerate() {
        let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos();
        buf[i] = Complex::new((x - mean) * w, 0.0);
    }
    FftPlanner::new().plan_fft_forward(padded).process(&mut buf);
    let mag: Vec<f64> = buf[..padded / 2].iter().map(|c| c.norm()).collect();
    let k = (1..mag.len() - 1).max_by(|&a, &b| mag[a].total_cmp(&mag[b])).unwrap();
    let (a, b, c) = (mag[k - 1].ln(), mag[k].ln(), mag[k + 1].ln());
    let shift = 0.5 * (a - c) / (a - 2.0 * b + c);
    (k as f64 + shift) / (padded as f64 * dt)
}

/// Central differences of the cable force `Q̌` with respect to the free
/// coordinates and free velocities.
pub fn tension_jacobians_fd(
    s: &Structure,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let topo = s.topology();
    let free = topo.free_indices().to_vec();
    let nf = free.len();
    let force = |q: &DVector<f64>, v: &DVector<f64>| s.tension_force(&s.cable_states(q, v, 0.0).unwrap());
    let mut kq = DMatrix::zeros(nf, nf);
    let mut kv = DMatrix::zeros(nf, nf);
    for (c, &g) in free.iter().enumerate() {
        let hq = 1e-6 * (1.0 + q[g].abs());
        let (mut qp, mut qm) = (q.clone(), q.clone());
        qp[g] += hq;
        qm[g] -= hq;
        kq.set_column(c, &((force(&qp, qdot) - force(&qm, qdot)) / (2.0 * hq)));
        let hv = 1e-6 * (1.0 + qdot[g].abs());
        let (mut vp, mut vm) = (qdot.clone(), qdot.clone());
        vp[g] += hv;
        vm[g] -= hv;
        kv.set_column(c, &((force(q, &vp) - force(q, &vm)) / (2.0 * hv)));
    }
    (kq, kv)
}

/// `max|a − b| / max|b|`, or the absolute gap when `b` vanishes.
pub fn rel_gap(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let gap = (a - b).amax();
    let scale = b.amax();
    if scale == 0.0 {
        gap
    } else {
        gap / scale
    }
}
