//! Rigid members described by natural coordinates.
//!
//! A member's coordinates are a stack of `m`-dimensional *slots*. The first
//! slot is always a basic point; the remaining slots are either further basic
//! points or base vectors depending on the [`Tag`]. The *standard* tags
//! (`RUVW`, `RUV`, `RU`) hold one point followed by base vectors only; every
//! other tag converts to its standard counterpart through a constant matrix
//! `Y ⊗ I_m` that replaces each extra point `r_k` by the vector `r_k − r_i`.
//!
//! Everything that maps coordinates to positions is constant in the
//! coordinates, so the mass matrix is constant and the intrinsic constraints
//! are quadratic.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, kron_identity, PINV_CUTOFF};

/// Which combination of basic points (R) and base vectors (U, V, W) forms the
/// coordinate vector of a member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Tag {
    Ruvw,
    Rrvw,
    Rrrw,
    Rrrr,
    Ruv,
    Rrv,
    Rrr,
    Ru,
    Rr,
}

impl Tag {
    pub const ALL: [Tag; 9] = [
        Tag::Ruvw,
        Tag::Rrvw,
        Tag::Rrrw,
        Tag::Rrrr,
        Tag::Ruv,
        Tag::Rrv,
        Tag::Rrr,
        Tag::Ru,
        Tag::Rr,
    ];

    /// Number of `m`-dimensional slots.
    pub fn slots(self) -> usize {
        match self {
            Tag::Ruvw | Tag::Rrvw | Tag::Rrrw | Tag::Rrrr => 4,
            Tag::Ruv | Tag::Rrv | Tag::Rrr => 3,
            Tag::Ru | Tag::Rr => 2,
        }
    }

    /// Number of leading slots that hold basic points.
    pub fn point_slots(self) -> usize {
        match self {
            Tag::Ruvw | Tag::Ruv | Tag::Ru => 1,
            Tag::Rrvw | Tag::Rrv | Tag::Rr => 2,
            Tag::Rrrw | Tag::Rrr => 3,
            Tag::Rrrr => 4,
        }
    }

    pub fn is_point_slot(self, slot: usize) -> bool {
        slot < self.point_slots()
    }

    pub fn is_standard(self) -> bool {
        self.point_slots() == 1
    }

    pub fn is_bar(self) -> bool {
        matches!(self, Tag::Ru | Tag::Rr)
    }

    /// Spatial dimension fixed by the tag; `None` for bars.
    pub fn fixed_dim(self) -> Option<usize> {
        match self.slots() {
            4 => Some(3),
            3 => Some(2),
            _ => None,
        }
    }

    /// Number of base vectors of the standard form (1, 2 or 3).
    pub fn base_vectors(self) -> usize {
        self.slots() - 1
    }

    /// The `slots × slots` conversion matrix `Y` (before the Kronecker
    /// product with `I_m`).
    pub fn slot_conversion(self) -> DMatrix<f64> {
        let s = self.slots();
        let mut y = DMatrix::identity(s, s);
        for k in 1..self.point_slots() {
            y[(k, 0)] = -1.0;
        }
        y
    }

    pub fn name(self) -> &'static str {
        match self {
            Tag::Ruvw => "RUVW",
            Tag::Rrvw => "RRVW",
            Tag::Rrrw => "RRRW",
            Tag::Rrrr => "RRRR",
            Tag::Ruv => "RUV",
            Tag::Rrv => "RRV",
            Tag::Rrr => "RRR",
            Tag::Ru => "RU",
            Tag::Rr => "RR",
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Tag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Tag::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidTemplate(format!("unknown coordinate tag `{s}`")))
    }
}

/// A tag together with the spatial dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CoordType {
    tag: Tag,
    dim: usize,
}

impl CoordType {
    pub fn new(tag: Tag, dim: usize) -> Result<Self> {
        match tag.fixed_dim() {
            Some(d) if d != dim => Err(Error::InvalidTemplate(format!(
                "{tag} describes a {d}D body, not {dim}D"
            ))),
            None if dim != 2 && dim != 3 => Err(Error::InvalidTemplate(format!(
                "bars live in 2D or 3D, not {dim}D"
            ))),
            _ => Ok(CoordType { tag, dim }),
        }
    }

    pub fn tag(&self) -> Tag {
        self.tag
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ncoords(&self) -> usize {
        self.tag.slots() * self.dim
    }

    /// `Y_tag ⊗ I_m`; the identity for standard tags.
    pub fn conversion_matrix(&self) -> DMatrix<f64> {
        kron_identity(&self.tag.slot_conversion(), self.dim)
    }

    /// Converts a native coordinate vector to the standard form.
    pub fn to_standard(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        if q.len() != self.ncoords() {
            return Err(Error::DimensionMismatch {
                expected: self.ncoords(),
                got: q.len(),
                context: "member coordinate vector",
            });
        }
        if self.tag.is_standard() {
            return Ok(q.clone());
        }
        let m = self.dim;
        let mut out = q.clone();
        for k in 1..self.tag.point_slots() {
            for d in 0..m {
                out[k * m + d] -= q[d];
            }
        }
        Ok(out)
    }
}

/// Affine coordinates of a point fixed on a member: `r = r_i + Σ c_k x_k`
/// where `x_k` are the standard base vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalPoint {
    pub coeffs: DVector<f64>,
}

impl LocalPoint {
    pub fn new(coeffs: &[f64]) -> Self {
        LocalPoint {
            coeffs: DVector::from_column_slice(coeffs),
        }
    }

    /// The first basic point.
    pub fn origin(base_vectors: usize) -> Self {
        LocalPoint {
            coeffs: DVector::zeros(base_vectors),
        }
    }
}

/// Inertia data expressed in the mass-centred principal local frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Inertia {
    /// Principal moments of inertia `(I_x, I_y, I_z)` of a 3D body.
    Principal([f64; 3]),
    /// Principal second moments `(∫ρx², ∫ρy²)` of a 2D body.
    PlanarSecondMoments([f64; 2]),
    /// Polar moment `I_z` of a 2D body, split evenly between the two axes.
    /// Kinetic energy of rigid motions only depends on the sum.
    Polar(f64),
    /// Second moment `∫ρx̄²` of a bar along its axis (for a thin uniform bar
    /// this is the transverse moment of inertia about the mass centre).
    Bar(f64),
}

/// Immutable description of one rigid member.
#[derive(Debug, Clone)]
pub struct MemberTemplate {
    coord_type: CoordType,
    mass: f64,
    local_basic_point: DVector<f64>,
    local_base: DMatrix<f64>,
    local_base_pinv: DMatrix<f64>,
    second_moments: DMatrix<f64>,
    reference_products: DMatrix<f64>,
    slot_conversion: DMatrix<f64>,
    slot_mass_std: DMatrix<f64>,
    slot_mass: DMatrix<f64>,
    mass_center: LocalPoint,
}

/// Index pairs `(a, b)` of standard base vectors whose products are held
/// fixed: `uu, vv, ww, vw, uw, uv` and the 2D and bar subsets.
fn constraint_pairs(base_vectors: usize) -> &'static [(usize, usize)] {
    match base_vectors {
        3 => &[(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)],
        2 => &[(0, 0), (1, 1), (0, 1)],
        _ => &[(0, 0)],
    }
}

impl MemberTemplate {
    /// Builds a template from local geometry.
    ///
    /// `local_basic_point` is `r̄_i` and the columns of `local_base` are the
    /// standard base vectors `ū, v̄, w̄`, all relative to the mass centre and
    /// along principal axes.
    pub fn new(
        coord_type: CoordType,
        mass: f64,
        local_basic_point: DVector<f64>,
        local_base: DMatrix<f64>,
        inertia: Inertia,
    ) -> Result<Self> {
        let m = coord_type.dim();
        let tag = coord_type.tag();
        let p = tag.base_vectors();
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::InvalidTemplate(format!(
                "mass must be positive, got {mass}"
            )));
        }
        if local_basic_point.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: local_basic_point.len(),
                context: "local basic point",
            });
        }
        if local_base.shape() != (m, p) {
            return Err(Error::DimensionMismatch {
                expected: m * p,
                got: local_base.len(),
                context: "local base matrix",
            });
        }

        if tag.is_bar() {
            let u = local_base.column(0);
            let len = u.norm();
            if !(len > 0.0) {
                return Err(Error::InvalidTemplate("bar has zero length".into()));
            }
            let off_axis = u.rows(1, m - 1).norm() + local_basic_point.rows(1, m - 1).norm();
            if off_axis > 1e-12 * len {
                return Err(Error::InvalidTemplate(
                    "bar axis and basic point must lie on the local x axis".into(),
                ));
            }
        } else {
            let scale: f64 = local_base.column_iter().map(|c| c.norm()).product();
            let det = local_base.determinant();
            if !(det.abs() >= 1e-10 * scale) || scale == 0.0 {
                return Err(Error::InvalidTemplate(
                    "base vectors are coplanar or colinear".into(),
                ));
            }
        }

        let second_moments = second_moments(tag, m, inertia)?;

        let pinv = linalg::pinv(&local_base, PINV_CUTOFF);
        let ri = &local_basic_point;
        let first = -(&pinv * ri) * mass;
        let mut second = &pinv * (&second_moments + ri * ri.transpose() * mass) * pinv.transpose();
        symmetrize(&mut second);

        let s = p + 1;
        let mut slot_mass_std = DMatrix::zeros(s, s);
        slot_mass_std[(0, 0)] = mass;
        for a in 0..p {
            slot_mass_std[(0, a + 1)] = first[a];
            slot_mass_std[(a + 1, 0)] = first[a];
            for b in 0..p {
                slot_mass_std[(a + 1, b + 1)] = second[(a, b)];
            }
        }
        let y = tag.slot_conversion();
        let mut slot_mass = y.transpose() * &slot_mass_std * &y;
        symmetrize(&mut slot_mass);

        let reference_products = local_base.transpose() * &local_base;
        let mass_center = LocalPoint {
            coeffs: -(&pinv * ri),
        };

        Ok(MemberTemplate {
            coord_type,
            mass,
            local_basic_point,
            local_base,
            local_base_pinv: pinv,
            second_moments,
            reference_products,
            slot_conversion: y,
            slot_mass_std,
            slot_mass,
            mass_center,
        })
    }

    /// A straight bar of the given length whose mass centre is its midpoint:
    /// `r̄_i = (−L/2, 0, …)`, `ū = (L, 0, …)`.
    pub fn bar(tag: Tag, dim: usize, mass: f64, length: f64, second_moment: f64) -> Result<Self> {
        if !tag.is_bar() {
            return Err(Error::InvalidTemplate(format!("{tag} is not a bar tag")));
        }
        let ct = CoordType::new(tag, dim)?;
        let mut ri = DVector::zeros(dim);
        ri[0] = -0.5 * length;
        let mut u = DMatrix::zeros(dim, 1);
        u[(0, 0)] = length;
        MemberTemplate::new(ct, mass, ri, u, Inertia::Bar(second_moment))
    }

    /// Builds a body template from the local positions of its slot anchors:
    /// the basic point first, then for every further slot either the point
    /// itself or the tip `r̄_i + x̄_k` of the base vector.
    pub fn from_frame_points(
        coord_type: CoordType,
        mass: f64,
        frame_points: &[DVector<f64>],
        inertia: Inertia,
    ) -> Result<Self> {
        let s = coord_type.tag().slots();
        if frame_points.len() != s {
            return Err(Error::DimensionMismatch {
                expected: s,
                got: frame_points.len(),
                context: "frame points",
            });
        }
        let m = coord_type.dim();
        let ri = frame_points[0].clone();
        let mut base = DMatrix::zeros(m, s - 1);
        for k in 1..s {
            if frame_points[k].len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: frame_points[k].len(),
                    context: "frame point",
                });
            }
            base.set_column(k - 1, &(&frame_points[k] - &ri));
        }
        MemberTemplate::new(coord_type, mass, ri, base, inertia)
    }

    pub fn coord_type(&self) -> CoordType {
        self.coord_type
    }

    pub fn tag(&self) -> Tag {
        self.coord_type.tag()
    }

    pub fn dim(&self) -> usize {
        self.coord_type.dim()
    }

    pub fn ncoords(&self) -> usize {
        self.coord_type.ncoords()
    }

    pub fn slots(&self) -> usize {
        self.tag().slots()
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn local_basic_point(&self) -> &DVector<f64> {
        &self.local_basic_point
    }

    pub fn local_base(&self) -> &DMatrix<f64> {
        &self.local_base
    }

    /// `J̄ = ∫ρ r̄ r̄ᵀ dΩ` in the local frame.
    pub fn second_moments(&self) -> &DMatrix<f64> {
        &self.second_moments
    }

    /// Gram matrix `X̄ᵀX̄` of the local base vectors.
    pub fn reference_products(&self) -> &DMatrix<f64> {
        &self.reference_products
    }

    pub fn mass_center(&self) -> &LocalPoint {
        &self.mass_center
    }

    pub fn conversion_matrix(&self) -> DMatrix<f64> {
        self.coord_type.conversion_matrix()
    }

    /// Slot-level conversion matrix `Y` (without `⊗ I_m`).
    pub fn slot_conversion(&self) -> &DMatrix<f64> {
        &self.slot_conversion
    }

    pub fn to_standard(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        self.coord_type.to_standard(q)
    }

    fn check_point(&self, pt: &LocalPoint) -> Result<()> {
        let p = self.tag().base_vectors();
        if pt.coeffs.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: pt.coeffs.len(),
                context: "local point coefficients",
            });
        }
        Ok(())
    }

    /// Weights `w` of the native slots such that `r = Σ_k w_k q_k`, i.e. the
    /// row vector `[1, cᵀ] Y`.
    pub fn point_weights(&self, pt: &LocalPoint) -> Result<DVector<f64>> {
        self.check_point(pt)?;
        let s = self.slots();
        let mut std = DVector::zeros(s);
        std[0] = 1.0;
        std.rows_mut(1, s - 1).copy_from(&pt.coeffs);
        Ok(self.slot_conversion.tr_mul(&std))
    }

    /// The constant `m × ncoords` matrix `C` with `r = C q`.
    pub fn point_transform(&self, pt: &LocalPoint) -> Result<DMatrix<f64>> {
        let w = self.point_weights(pt)?;
        Ok(kron_identity(&DMatrix::from_row_slice(1, w.len(), w.as_slice()), self.dim()))
    }

    /// Affine coefficients of a local position: `c = X̄⁺(r̄ − r̄_i)`.
    pub fn local_coeffs(&self, local_position: &DVector<f64>) -> Result<LocalPoint> {
        if local_position.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: local_position.len(),
                context: "local position",
            });
        }
        Ok(LocalPoint {
            coeffs: &self.local_base_pinv * (local_position - &self.local_basic_point),
        })
    }

    /// Global position of a local point for native coordinates `q`.
    pub fn position(&self, q: &DVector<f64>, pt: &LocalPoint) -> Result<DVector<f64>> {
        let w = self.point_weights(pt)?;
        let m = self.dim();
        let mut r = DVector::zeros(m);
        for (k, wk) in w.iter().enumerate() {
            if *wk != 0.0 {
                r += q.rows(k * m, m) * *wk;
            }
        }
        Ok(r)
    }

    /// Local positions of the slot anchors (points, or vectors for vector slots).
    pub fn local_slot_values(&self) -> Vec<DVector<f64>> {
        let tag = self.tag();
        let mut out = vec![self.local_basic_point.clone()];
        for k in 1..tag.slots() {
            let x = self.local_base.column(k - 1).into_owned();
            if tag.is_point_slot(k) {
                out.push(&self.local_basic_point + x);
            } else {
                out.push(x);
            }
        }
        out
    }

    /// Native coordinates of the member placed rigidly: the local frame origin
    /// (mass centre) at `origin`, rotated by `rotation`.
    pub fn place(&self, rotation: &DMatrix<f64>, origin: &DVector<f64>) -> DVector<f64> {
        let m = self.dim();
        let tag = self.tag();
        let mut q = DVector::zeros(self.ncoords());
        for (k, local) in self.local_slot_values().into_iter().enumerate() {
            let mut g = rotation * local;
            if tag.is_point_slot(k) {
                g += origin;
            }
            q.rows_mut(k * m, m).copy_from(&g);
        }
        q
    }

    fn std_vector(&self, q: &DVector<f64>, a: usize) -> DVector<f64> {
        let m = self.dim();
        let row = self.slot_conversion.row(a + 1);
        let mut x = DVector::zeros(m);
        for (k, y) in row.iter().enumerate() {
            if *y != 0.0 {
                x += q.rows(k * m, m) * *y;
            }
        }
        x
    }

    pub fn num_constraints(&self) -> usize {
        constraint_pairs(self.tag().base_vectors()).len()
    }

    /// Pairs `(a, b)` of standard base vectors constrained by each row.
    pub fn constraint_pairs(&self) -> &'static [(usize, usize)] {
        constraint_pairs(self.tag().base_vectors())
    }

    /// Native slots that enter constraint row `row`.
    pub fn constraint_slots(&self, row: usize) -> Vec<usize> {
        let (a, b) = self.constraint_pairs()[row];
        (0..self.slots())
            .filter(|&k| {
                self.slot_conversion[(a + 1, k)] != 0.0 || self.slot_conversion[(b + 1, k)] != 0.0
            })
            .collect()
    }

    /// Intrinsic constraint residual `x_aᵀx_b − x̄_aᵀx̄_b` per row.
    pub fn intrinsic_constraints(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_coords(q)?;
        let p = self.tag().base_vectors();
        let xs: Vec<_> = (0..p).map(|a| self.std_vector(q, a)).collect();
        Ok(DVector::from_iterator(
            self.num_constraints(),
            self.constraint_pairs()
                .iter()
                .map(|&(a, b)| xs[a].dot(&xs[b]) - self.reference_products[(a, b)]),
        ))
    }

    /// `∂Φ/∂q` in native coordinates.
    pub fn intrinsic_jacobian(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_coords(q)?;
        let m = self.dim();
        let p = self.tag().base_vectors();
        let xs: Vec<_> = (0..p).map(|a| self.std_vector(q, a)).collect();
        let y = &self.slot_conversion;
        let mut jac = DMatrix::zeros(self.num_constraints(), self.ncoords());
        for (row, &(a, b)) in self.constraint_pairs().iter().enumerate() {
            for k in 0..self.slots() {
                let ya = y[(a + 1, k)];
                let yb = y[(b + 1, k)];
                if ya == 0.0 && yb == 0.0 {
                    continue;
                }
                for d in 0..m {
                    jac[(row, k * m + d)] = ya * xs[b][d] + yb * xs[a][d];
                }
            }
        }
        Ok(jac)
    }

    /// Constant Hessians `∂²Φ_row/∂q²` in native coordinates, one per row.
    pub fn constraint_hessians(&self) -> Vec<DMatrix<f64>> {
        (0..self.num_constraints())
            .map(|row| kron_identity(&self.slot_hessian(row), self.dim()))
            .collect()
    }

    /// Slot-level Hessian of constraint row `row` (the full Hessian is this
    /// matrix `⊗ I_m`).
    pub fn slot_hessian(&self, row: usize) -> DMatrix<f64> {
        let s = self.slots();
        let y = &self.slot_conversion;
        let (a, b) = self.constraint_pairs()[row];
        DMatrix::from_fn(s, s, |k, l| {
            y[(a + 1, k)] * y[(b + 1, l)] + y[(b + 1, k)] * y[(a + 1, l)]
        })
    }

    /// Slot-level mass matrix in the native tag (before `⊗ I_m`).
    pub fn slot_mass(&self) -> &DMatrix<f64> {
        &self.slot_mass
    }

    /// Slot-level mass matrix of the standard form.
    pub fn slot_mass_std(&self) -> &DMatrix<f64> {
        &self.slot_mass_std
    }

    /// The constant mass matrix `Yᵀ M_std Y` in native coordinates.
    pub fn mass_matrix(&self) -> DMatrix<f64> {
        kron_identity(&self.slot_mass, self.dim())
    }

    pub fn kinetic_energy(&self, qdot: &DVector<f64>) -> Result<f64> {
        self.check_coords(qdot)?;
        Ok(0.5 * qdot.dot(&(self.mass_matrix() * qdot)))
    }

    fn check_coords(&self, q: &DVector<f64>) -> Result<()> {
        if q.len() != self.ncoords() {
            return Err(Error::DimensionMismatch {
                expected: self.ncoords(),
                got: q.len(),
                context: "member coordinate vector",
            });
        }
        Ok(())
    }
}

fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

fn second_moments(tag: Tag, m: usize, inertia: Inertia) -> Result<DMatrix<f64>> {
    let nonneg = |vals: &[f64], what: &str| -> Result<()> {
        let scale = vals.iter().fold(0.0_f64, |a, v| a + v.abs());
        if vals.iter().any(|v| !v.is_finite() || *v < -1e-12 * scale) {
            return Err(Error::InvalidTemplate(format!("{what} is not positive semidefinite")));
        }
        Ok(())
    };
    match (inertia, tag.is_bar(), m) {
        (Inertia::Principal([ix, iy, iz]), false, 3) => {
            let d = [(iy + iz - ix) / 2.0, (ix + iz - iy) / 2.0, (ix + iy - iz) / 2.0];
            nonneg(&[ix, iy, iz], "principal inertia")?;
            nonneg(&d, "inertia (triangle inequality violated)")?;
            Ok(DMatrix::from_diagonal(&DVector::from_iterator(3, d.iter().map(|v| v.max(0.0)))))
        }
        (Inertia::PlanarSecondMoments([jx, jy]), false, 2) => {
            nonneg(&[jx, jy], "planar second moments")?;
            Ok(DMatrix::from_diagonal(&DVector::from_vec(vec![jx, jy])))
        }
        (Inertia::Polar(iz), false, 2) => {
            nonneg(&[iz], "polar moment")?;
            Ok(DMatrix::from_diagonal_element(2, 2, iz / 2.0))
        }
        (Inertia::Bar(s), true, _) => {
            nonneg(&[s], "bar second moment")?;
            let mut j = DMatrix::zeros(m, m);
            j[(0, 0)] = s;
            Ok(j)
        }
        (other, _, _) => Err(Error::InvalidTemplate(format!(
            "inertia {other:?} does not fit a {m}D {}",
            if tag.is_bar() { "bar" } else { "body" }
        ))),
    }
}

/// Rotation matrix of a planar angle.
pub fn rotation_2d(angle: f64) -> DMatrix<f64> {
    let (s, c) = angle.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn unit_body_2d(tag: Tag) -> MemberTemplate {
        MemberTemplate::new(
            CoordType::new(tag, 2).unwrap(),
            1.0,
            v(&[0.0, 0.0]),
            DMatrix::identity(2, 2),
            Inertia::PlanarSecondMoments([0.2, 0.3]),
        )
        .unwrap()
    }

    #[test]
    fn ncoords_follow_the_polymorphism_table() {
        for (tag, dim, n) in [
            (Tag::Ruvw, 3, 12),
            (Tag::Rrrr, 3, 12),
            (Tag::Ruv, 2, 6),
            (Tag::Rrr, 2, 6),
            (Tag::Ru, 3, 6),
            (Tag::Rr, 2, 4),
        ] {
            assert_eq!(CoordType::new(tag, dim).unwrap().ncoords(), n);
        }
        assert!(CoordType::new(Tag::Ruvw, 2).is_err());
        assert!(CoordType::new(Tag::Rrv, 3).is_err());
        assert!(CoordType::new(Tag::Rr, 4).is_err());
    }

    #[test]
    fn conversion_matrices() {
        let rr = CoordType::new(Tag::Rr, 2).unwrap().conversion_matrix();
        let expected = kron_identity(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 1.0]), 2);
        assert_eq!(rr, expected);

        let ruvw = CoordType::new(Tag::Ruvw, 3).unwrap().conversion_matrix();
        assert_eq!(ruvw, DMatrix::identity(12, 12));

        let rrrr = CoordType::new(Tag::Rrrr, 3).unwrap().conversion_matrix();
        let y = DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 0.0, 0.0, 0.0, //
                -1.0, 1.0, 0.0, 0.0, //
                -1.0, 0.0, 1.0, 0.0, //
                -1.0, 0.0, 0.0, 1.0,
            ],
        );
        assert_eq!(rrrr, kron_identity(&y, 3));
    }

    #[test]
    fn to_standard_examples() {
        let rr = CoordType::new(Tag::Rr, 2).unwrap();
        assert_eq!(
            rr.to_standard(&v(&[0.0, 0.0, 1.0, 0.0])).unwrap(),
            v(&[0.0, 0.0, 1.0, 0.0])
        );
        let rrr = CoordType::new(Tag::Rrr, 2).unwrap();
        assert_eq!(
            rrr.to_standard(&v(&[0.0, 0.0, 1.0, 0.0, 0.0, 1.0])).unwrap(),
            v(&[0.0, 0.0, 1.0, 0.0, 0.0, 1.0])
        );
        let rrvw = CoordType::new(Tag::Rrvw, 3).unwrap();
        let q = v(&[1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(
            rrvw.to_standard(&q).unwrap(),
            v(&[1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0])
        );
        assert!(matches!(
            rrvw.to_standard(&v(&[1.0])),
            Err(Error::DimensionMismatch { .. })
        ));
        // Matches the explicit matrix product.
        let y = rrvw.conversion_matrix();
        assert_eq!(&y * &q, rrvw.to_standard(&q).unwrap());
    }

    #[test]
    fn point_transform_examples() {
        let body = unit_body_2d(Tag::Ruv);
        let q = v(&[1.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        let c = body.point_transform(&LocalPoint::new(&[2.0, 3.0])).unwrap();
        assert_eq!(c * &q, v(&[3.0, 3.0]));
        let c0 = body.point_transform(&LocalPoint::origin(2)).unwrap();
        assert_eq!(c0 * &q, v(&[1.0, 0.0]));

        let bar = MemberTemplate::bar(Tag::Ru, 3, 1.0, 2.0, 1.0 / 3.0).unwrap();
        let q = v(&[0.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
        let c = bar.point_transform(&LocalPoint::new(&[0.5])).unwrap();
        assert_eq!(c * q, v(&[1.0, 0.0, 0.0]));
    }

    #[test]
    fn point_transform_of_nonstandard_tag_is_c_std_times_y() {
        let body = unit_body_2d(Tag::Rrr);
        let pt = LocalPoint::new(&[0.25, -0.5]);
        let c = body.point_transform(&pt).unwrap();
        let std = kron_identity(&DMatrix::from_row_slice(1, 3, &[1.0, 0.25, -0.5]), 2);
        assert_eq!(c, std * body.conversion_matrix());
    }

    #[test]
    fn local_coeffs_examples() {
        let body = unit_body_2d(Tag::Ruv);
        assert_eq!(body.local_coeffs(&v(&[0.3, 0.7])).unwrap().coeffs, v(&[0.3, 0.7]));
        assert_eq!(body.local_coeffs(&v(&[0.0, 0.0])).unwrap().coeffs, v(&[0.0, 0.0]));
        let bar = MemberTemplate::bar(Tag::Ru, 3, 1.0, 1.5, 0.1).unwrap();
        let c = bar.local_coeffs(&v(&[0.75, 0.0, 0.0])).unwrap();
        assert_relative_eq!(c.coeffs[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn intrinsic_constraint_examples() {
        let bar = MemberTemplate::new(
            CoordType::new(Tag::Ru, 3).unwrap(),
            1.0,
            v(&[-0.5, 0.0, 0.0]),
            DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]),
            Inertia::Bar(1.0 / 12.0),
        )
        .unwrap();
        let q = v(&[0.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
        assert_eq!(bar.intrinsic_constraints(&q).unwrap(), v(&[3.0]));

        let body = unit_body_2d(Tag::Ruv);
        let q = v(&[0.0, 0.0, 1.0, 0.0, 1.0, 1.0]);
        assert_eq!(body.intrinsic_constraints(&q).unwrap(), v(&[0.0, 1.0, 1.0]));
    }

    #[test]
    fn intrinsic_jacobian_examples() {
        let bar = MemberTemplate::bar(Tag::Ru, 3, 1.0, 1.0, 1.0 / 12.0).unwrap();
        let q = v(&[0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let j = bar.intrinsic_jacobian(&q).unwrap();
        assert_eq!(j, DMatrix::from_row_slice(1, 6, &[0.0, 0.0, 0.0, 2.0, 0.0, 0.0]));

        let body = unit_body_2d(Tag::Ruv);
        let q = v(&[5.0, 6.0, 1.0, 2.0, 3.0, 4.0]);
        let j = body.intrinsic_jacobian(&q).unwrap();
        // uᵀv row: vᵀ in the u columns and uᵀ in the v columns.
        assert_eq!(j.row(2).into_owned().as_slice(), &[0.0, 0.0, 3.0, 4.0, 1.0, 2.0]);
    }

    #[test]
    fn rigid_placements_satisfy_constraints_for_every_tag() {
        for tag in Tag::ALL {
            let dim = tag.fixed_dim().unwrap_or(3);
            let tpl = sample_template(tag, dim);
            let rot = sample_rotation(dim, 0.7);
            let origin = DVector::from_fn(dim, |i, _| 0.3 * i as f64 - 0.2);
            let q = tpl.place(&rot, &origin);
            let phi = tpl.intrinsic_constraints(&q).unwrap();
            assert!(phi.amax() < 1e-12, "{tag}: {phi}");
        }
    }

    #[test]
    fn invalid_templates_are_rejected() {
        assert!(MemberTemplate::bar(Tag::Rr, 2, 1.0, 0.0, 0.0).is_err());
        assert!(MemberTemplate::bar(Tag::Rr, 2, -1.0, 1.0, 0.0).is_err());
        let flat = DMatrix::from_column_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0]);
        let err = MemberTemplate::new(
            CoordType::new(Tag::Ruvw, 3).unwrap(),
            1.0,
            v(&[0.0, 0.0, 0.0]),
            flat,
            Inertia::Principal([1.0, 1.0, 1.0]),
        );
        assert!(matches!(err, Err(Error::InvalidTemplate(_))));
        let bad_inertia = MemberTemplate::new(
            CoordType::new(Tag::Ruvw, 3).unwrap(),
            1.0,
            v(&[0.0, 0.0, 0.0]),
            DMatrix::identity(3, 3),
            Inertia::Principal([1.0, 1.0, 3.0]),
        );
        assert!(bad_inertia.is_err());
        let wrong_kind = MemberTemplate::new(
            CoordType::new(Tag::Ruv, 2).unwrap(),
            1.0,
            v(&[0.0, 0.0]),
            DMatrix::identity(2, 2),
            Inertia::Principal([1.0, 1.0, 1.0]),
        );
        assert!(wrong_kind.is_err());
    }

    #[test]
    fn mass_matrix_is_exactly_symmetric() {
        for tag in Tag::ALL {
            let dim = tag.fixed_dim().unwrap_or(2);
            let m = sample_template(tag, dim).mass_matrix();
            assert_eq!(m, m.transpose(), "{tag}");
        }
    }

    #[test]
    fn centred_2d_body_mass_matrix_is_diagonal() {
        let body = unit_body_2d(Tag::Ruv);
        let expected = kron_identity(&DMatrix::from_diagonal(&v(&[1.0, 0.2, 0.3])), 2);
        assert_relative_eq!(body.mass_matrix(), expected, epsilon = 1e-15);
    }

    #[test]
    fn constraint_hessians_match_jacobian_differences() {
        let tpl = sample_template(Tag::Rrvw, 3);
        let q = tpl.place(&sample_rotation(3, 0.4), &v(&[0.1, 0.2, 0.3]));
        let dq = DVector::from_fn(12, |i, _| ((i * 7 % 5) as f64 - 2.0) * 0.1);
        let j0 = tpl.intrinsic_jacobian(&q).unwrap();
        let j1 = tpl.intrinsic_jacobian(&(&q + &dq)).unwrap();
        for (row, h) in tpl.constraint_hessians().iter().enumerate() {
            let lhs = (j1.row(row) - j0.row(row)).transpose();
            assert_relative_eq!(lhs, h * &dq, epsilon = 1e-12);
        }
    }

    pub(crate) fn sample_template(tag: Tag, dim: usize) -> MemberTemplate {
        let ct = CoordType::new(tag, dim).unwrap();
        if tag.is_bar() {
            return MemberTemplate::bar(tag, dim, 0.8, 1.3, 0.8 * 1.3 * 1.3 / 12.0).unwrap();
        }
        let ri = DVector::from_fn(dim, |i, _| -0.2 + 0.1 * i as f64);
        let base = if dim == 3 {
            DMatrix::from_column_slice(3, 3, &[0.5, 0.1, 0.0, -0.1, 0.6, 0.2, 0.05, 0.0, 0.4])
        } else {
            DMatrix::from_column_slice(2, 2, &[0.5, 0.1, -0.2, 0.6])
        };
        let inertia = if dim == 3 {
            Inertia::Principal([0.03, 0.04, 0.05])
        } else {
            Inertia::PlanarSecondMoments([0.02, 0.03])
        };
        MemberTemplate::new(ct, 1.7, ri, base, inertia).unwrap()
    }

    pub(crate) fn sample_rotation(dim: usize, angle: f64) -> DMatrix<f64> {
        if dim == 2 {
            return rotation_2d(angle);
        }
        let axis = nalgebra::Vector3::new(0.3, -0.5, 0.8).normalize();
        let r = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
        DMatrix::from_column_slice(3, 3, r.matrix().as_slice())
    }
}
