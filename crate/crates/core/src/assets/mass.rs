use crate::assets::{AssetError, TriangleMesh};
use crate::math::{Mat3, Vec3};

/// Rigid mass properties of a closed solid. The inertia tensor is taken
/// about the center of mass, in the mesh frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MassProperties {
    pub mass: f64,
    pub volume: f64,
    pub center_of_mass: Vec3,
    pub inertia_tensor: Mat3,
}

impl MassProperties {
    /// Eigenvalues of the inertia tensor, ascending.
    pub fn principal_moments(&self) -> [f64; 3] {
        let eig = self.inertia_tensor.symmetric_eigen();
        let mut ev = [eig.eigenvalues[0], eig.eigenvalues[1], eig.eigenvalues[2]];
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Tensor of a body rotated by `r`: `R I Rᵀ`.
    pub fn rotated_inertia(&self, r: &Mat3) -> Mat3 {
        r * self.inertia_tensor * r.transpose()
    }
}

/// Integral of `x xᵀ` over the unit-corner tetrahedron (0, e1, e2, e3).
fn canonical_covariance() -> Mat3 {
    Mat3::new(2.0, 1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 1.0, 2.0) / 120.0
}

/// Volume, center of mass and inertia of a closed, outward-wound mesh of
/// uniform density `mass / volume`, by summing signed tetrahedra spanned
/// from the origin by each triangle.
pub fn mass_properties(mesh: &TriangleMesh, mass: f64) -> Result<MassProperties, AssetError> {
    if !(mass > 0.0) {
        return Err(AssetError::InvalidMass(mass));
    }
    if mesh.triangles.is_empty() {
        return Err(AssetError::EmptyMesh);
    }
    let canon = canonical_covariance();
    let mut volume = 0.0;
    let mut first_moment = Vec3::zeros();
    let mut covariance = Mat3::zeros();
    for tri in 0..mesh.triangles.len() {
        let [a, b, c] = mesh.corners(tri);
        let basis = Mat3::from_columns(&[a, b, c]);
        let det = basis.determinant();
        volume += det / 6.0;
        first_moment += (a + b + c) * (det / 24.0);
        covariance += basis * canon * basis.transpose() * det;
    }
    if !(volume > 0.0) {
        return Err(AssetError::InvalidWinding { signed_volume: volume });
    }
    let com = first_moment / volume;
    let central = covariance - com * com.transpose() * volume;
    let density = mass / volume;
    let mut inertia = (Mat3::identity() * central.trace() - central) * density;
    // Exact symmetry; the sums above only differ by rounding.
    inertia = (inertia + inertia.transpose()) * 0.5;
    Ok(MassProperties { mass, volume, center_of_mass: com, inertia_tensor: inertia })
}
