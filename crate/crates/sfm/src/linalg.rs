use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Right singular vector of the smallest singular value, with the singular
/// values in descending order. Rows are zero-padded up to a square system
/// so the full right basis is available.
pub fn null_vector(a: &DMatrix<f64>) -> (DVector<f64>, DVector<f64>) {
    let cols = a.ncols();
    let padded;
    let m = if a.nrows() < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (a.nrows(), cols)).copy_from(a);
        padded = p;
        &padded
    } else {
        a
    };
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    (v_t.row(cols - 1).transpose(), svd.singular_values)
}

/// Closest rotation in Frobenius norm (determinant +1).
pub fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (u, v_t) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    u * d * v_t
}

/// Angle in radians between two rotation matrices.
pub fn rotation_angle_between(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let r = a * b.transpose();
    let v = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    v.norm().atan2(r.trace() - 1.0)
}

/// Angle in radians between two vectors.
pub fn vector_angle(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let c = a.cross(b).norm();
    c.atan2(a.dot(b))
}
