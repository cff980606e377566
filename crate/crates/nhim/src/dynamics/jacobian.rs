//! Central finite-difference Jacobians of maps and fields.

use nalgebra::DMatrix;

use super::{DiscreteMap, VectorField};

/// Base step for central differences; scaled by `1 + |x|` so the stencil
/// stays well conditioned away from the origin.
const FD_STEP: f64 = 1e-6;

fn fd_jacobian(dim: usize, x: &[f64], mut eval: impl FnMut(&[f64], &mut [f64])) -> DMatrix<f64> {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let h = FD_STEP * (1.0 + norm);
    let mut jac = DMatrix::zeros(dim, dim);
    let mut xp = x.to_vec();
    let mut fp = vec![0.0; dim];
    let mut fm = vec![0.0; dim];
    for j in 0..dim {
        let orig = xp[j];
        xp[j] = orig + h;
        eval(&xp, &mut fp);
        xp[j] = orig - h;
        eval(&xp, &mut fm);
        xp[j] = orig;
        for i in 0..dim {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    jac
}

/// Spatial Jacobian of the map at `(t, x)`, holding `t` fixed.
pub fn map_jacobian(map: &DiscreteMap, t: f64, x: &[f64]) -> DMatrix<f64> {
    fd_jacobian(map.dimension(), x, |y, out| map.eval(t, y, out))
}

/// Spatial Jacobian of the field at `(t, x)`, holding `t` fixed.
pub fn field_jacobian(field: &VectorField, t: f64, x: &[f64]) -> DMatrix<f64> {
    fd_jacobian(field.dimension(), x, |y, out| field.eval(t, y, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quadratic_map_jacobian_matches_closed_form() {
        let f = DiscreteMap::new(2, -1.0, |_, x, out| {
            out[0] = x[0] * x[0] + 3.0 * x[1];
            out[1] = x[0] * x[1];
        });
        let j = map_jacobian(&f, 0.0, &[1.5, -2.0]);
        assert_abs_diff_eq!(j[(0, 0)], 3.0, epsilon = 1e-8);
        assert_abs_diff_eq!(j[(0, 1)], 3.0, epsilon = 1e-8);
        assert_abs_diff_eq!(j[(1, 0)], -2.0, epsilon = 1e-8);
        assert_abs_diff_eq!(j[(1, 1)], 1.5, epsilon = 1e-8);
    }

    #[test]
    fn field_jacobian_sees_time_dependence_only_through_t() {
        let v = VectorField::new(1, -1.0, |t, x, out| out[0] = t * x[0]);
        let j = field_jacobian(&v, 4.0, &[2.0]);
        assert_abs_diff_eq!(j[(0, 0)], 4.0, epsilon = 1e-7);
    }
}
