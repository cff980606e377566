//! Invariant splittings along a trapped set and their expansion rates.
//!
//! A splitting stores, at sampled base points, orthonormal bases of the
//! tangent directions along the trapped set and of the unstable and stable
//! normal directions. Rates are extracted from the linearized map expressed
//! in these frames; the inequalities between them are exactly the order-`r`
//! normal-hyperbolicity conditions that license the graph transform.

use nalgebra::DMatrix;
use serde::Serialize;

use super::{map_jacobian, DiscreteMap, DynamicsError};

/// Orthonormality defect tolerated within each basis block.
const ORTHONORMAL_TOL: f64 = 1e-8;
/// Lower bound on the smallest singular value of the combined frame; below
/// this the three blocks are treated as degenerate (non-transversal).
const MIN_COMBINED_SINGULAR_VALUE: f64 = 1e-8;
/// Largest admissible off-diagonal block entry when the linearized map is
/// expressed in the splitting frames.
const LEAKAGE_TOL: f64 = 1e-6;

/// Frame of an invariant splitting at one base point. Column counts give the
/// dimensions of the tangent, unstable, and stable blocks; each block must
/// have orthonormal columns.
#[derive(Debug, Clone)]
pub struct SplittingFrame {
    pub base_point: Vec<f64>,
    pub tangent: DMatrix<f64>,
    pub unstable: DMatrix<f64>,
    pub stable: DMatrix<f64>,
}

impl SplittingFrame {
    /// All three blocks side by side, an `ambient x ambient` matrix.
    pub fn combined(&self) -> DMatrix<f64> {
        let n = self.base_point.len();
        let mut m = DMatrix::zeros(n, n);
        let mut col = 0;
        for block in [&self.tangent, &self.unstable, &self.stable] {
            for j in 0..block.ncols() {
                m.set_column(col, &block.column(j));
                col += 1;
            }
        }
        m
    }
}

/// Splitting `T Gamma (+) N^u (+) N^s` sampled at finitely many base points.
#[derive(Debug, Clone)]
pub struct Splitting {
    frames: Vec<SplittingFrame>,
    dim_tangent: usize,
    dim_unstable: usize,
    dim_stable: usize,
}

impl Splitting {
    pub fn new(frames: Vec<SplittingFrame>) -> Result<Self, DynamicsError> {
        let first = frames
            .first()
            .ok_or_else(|| DynamicsError::InvalidSplitting("no base points".into()))?;
        let ambient = first.base_point.len();
        let dims = (
            first.tangent.ncols(),
            first.unstable.ncols(),
            first.stable.ncols(),
        );
        if dims.0 + dims.1 + dims.2 != ambient {
            return Err(DynamicsError::InvalidSplitting(format!(
                "block dimensions {}+{}+{} do not fill ambient dimension {ambient}",
                dims.0, dims.1, dims.2
            )));
        }
        for (idx, frame) in frames.iter().enumerate() {
            if frame.base_point.len() != ambient
                || frame.tangent.ncols() != dims.0
                || frame.unstable.ncols() != dims.1
                || frame.stable.ncols() != dims.2
            {
                return Err(DynamicsError::InvalidSplitting(format!(
                    "frame {idx} disagrees with frame 0 on dimensions"
                )));
            }
            for (name, block) in [
                ("tangent", &frame.tangent),
                ("unstable", &frame.unstable),
                ("stable", &frame.stable),
            ] {
                if block.nrows() != ambient {
                    return Err(DynamicsError::InvalidSplitting(format!(
                        "frame {idx} {name} block has wrong row count"
                    )));
                }
                if block.ncols() == 0 {
                    continue;
                }
                let gram = block.transpose() * block;
                let defect = (&gram - DMatrix::identity(gram.nrows(), gram.ncols())).abs().max();
                if defect > ORTHONORMAL_TOL {
                    return Err(DynamicsError::InvalidSplitting(format!(
                        "frame {idx} {name} block is not orthonormal (defect {defect:.3e})"
                    )));
                }
            }
            let sv = frame.combined().svd(false, false).singular_values;
            let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
            if smin <= MIN_COMBINED_SINGULAR_VALUE {
                return Err(DynamicsError::InvalidSplitting(format!(
                    "frame {idx} blocks are nearly degenerate (min singular value {smin:.3e})"
                )));
            }
        }
        Ok(Self {
            frames,
            dim_tangent: dims.0,
            dim_unstable: dims.1,
            dim_stable: dims.2,
        })
    }

    pub fn frames(&self) -> &[SplittingFrame] {
        &self.frames
    }

    pub fn dim_tangent(&self) -> usize {
        self.dim_tangent
    }

    pub fn dim_unstable(&self) -> usize {
        self.dim_unstable
    }

    pub fn dim_stable(&self) -> usize {
        self.dim_stable
    }
}

/// Expansion and contraction rates of a map relative to a splitting.
///
/// `gamma_min`/`gamma_max` bound the singular values of the tangent block
/// (both 1 when the trapped set is zero-dimensional), `lambda` is the least
/// expansion on the unstable block, `nu` the largest contraction factor on
/// the stable block.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HyperbolicityRates {
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub lambda: f64,
    pub nu: f64,
}

fn block_singular_range(m: &DMatrix<f64>) -> (f64, f64) {
    if m.ncols() == 0 {
        return (f64::INFINITY, 0.0);
    }
    let sv = m.clone().svd(false, false).singular_values;
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for s in sv.iter() {
        lo = lo.min(*s);
        hi = hi.max(*s);
    }
    (lo, hi)
}

/// Rates of `map` (evaluated at time `t`) in the frames of `splitting`.
///
/// Each base point's linearization is expressed from its own frame into the
/// frame at the base point nearest its image. Off-diagonal block entries
/// beyond the invariance tolerance fail with `SplittingNotInvariant`.
pub fn splitting_rates(
    map: &DiscreteMap,
    splitting: &Splitting,
    t: f64,
) -> Result<HyperbolicityRates, DynamicsError> {
    let (dt, du, ds) = (
        splitting.dim_tangent(),
        splitting.dim_unstable(),
        splitting.dim_stable(),
    );
    let n = dt + du + ds;
    let mut gamma_min = f64::INFINITY;
    let mut gamma_max: f64 = 0.0;
    let mut lambda = f64::INFINITY;
    let mut nu: f64 = 0.0;
    let mut worst_leakage: f64 = 0.0;

    for frame in splitting.frames() {
        let a = map_jacobian(map, t, &frame.base_point);
        let image = map.eval_vec(t, &frame.base_point);
        let target = splitting
            .frames()
            .iter()
            .min_by(|f1, f2| {
                let d1: f64 = f1
                    .base_point
                    .iter()
                    .zip(&image)
                    .map(|(p, q)| (p - q) * (p - q))
                    .sum();
                let d2: f64 = f2
                    .base_point
                    .iter()
                    .zip(&image)
                    .map(|(p, q)| (p - q) * (p - q))
                    .sum();
                d1.partial_cmp(&d2).unwrap()
            })
            .unwrap();

        let c_source = frame.combined();
        let c_target = target.combined();
        let rhs = &a * &c_source;
        let m = c_target
            .lu()
            .solve(&rhs)
            .ok_or_else(|| DynamicsError::InvalidSplitting("frame is singular".into()))?;

        let ranges = [(0, dt), (dt, du), (dt + du, ds)];
        for (bi, &(ri, rn)) in ranges.iter().enumerate() {
            for (bj, &(cj, cn)) in ranges.iter().enumerate() {
                if rn == 0 || cn == 0 {
                    continue;
                }
                let block = m.view((ri, cj), (rn, cn));
                if bi == bj {
                    let owned = block.clone_owned();
                    let (lo, hi) = block_singular_range(&owned);
                    match bi {
                        0 => {
                            gamma_min = gamma_min.min(lo);
                            gamma_max = gamma_max.max(hi);
                        }
                        1 => lambda = lambda.min(lo),
                        _ => nu = nu.max(hi),
                    }
                } else {
                    worst_leakage = worst_leakage.max(block.abs().max());
                }
            }
        }
        let _ = n;
    }

    if worst_leakage > LEAKAGE_TOL {
        return Err(DynamicsError::SplittingNotInvariant {
            leakage: worst_leakage,
        });
    }
    if dt == 0 {
        gamma_min = 1.0;
        gamma_max = 1.0;
    }
    Ok(HyperbolicityRates {
        gamma_min,
        gamma_max,
        lambda,
        nu,
    })
}

/// Verifies `r`-normal hyperbolicity of `map` relative to `splitting`:
/// the unstable block must dominate the `k`-th power of the largest tangent
/// rate and the stable block must be dominated by the `k`-th power of the
/// smallest, for every `0 <= k <= r`.
pub fn check_normal_hyperbolicity(
    map: &DiscreteMap,
    splitting: &Splitting,
    r: usize,
    t: f64,
) -> Result<HyperbolicityRates, DynamicsError> {
    let rates = splitting_rates(map, splitting, t)?;
    rate_inequalities(&rates, r)?;
    Ok(rates)
}

fn rate_inequalities(rates: &HyperbolicityRates, r: usize) -> Result<(), DynamicsError> {
    for k in 0..=r {
        let up = rates.gamma_max.powi(k as i32);
        let down = rates.gamma_min.powi(k as i32);
        if rates.lambda <= up {
            return Err(DynamicsError::NotHyperbolic {
                order: k,
                detail: format!(
                    "unstable expansion {:.6} does not dominate tangent rate {up:.6}",
                    rates.lambda
                ),
            });
        }
        if rates.nu >= down {
            return Err(DynamicsError::NotHyperbolic {
                order: k,
                detail: format!(
                    "stable contraction {:.6} is not dominated by tangent rate {down:.6}",
                    rates.nu
                ),
            });
        }
    }
    Ok(())
}

/// Eventual variant: searches for the smallest `n <= n_max` such that the
/// `n`-fold composed map satisfies the order-`r` inequalities, returning the
/// rates of that composition together with `n`.
pub fn check_eventual_normal_hyperbolicity(
    map: &DiscreteMap,
    splitting: &Splitting,
    r: usize,
    t: f64,
    n_max: usize,
) -> Result<(HyperbolicityRates, usize), DynamicsError> {
    let mut last_err = None;
    for n in 1..=n_max {
        let composed = map.iterate(n);
        match splitting_rates(&composed, splitting, t)
            .and_then(|rates| rate_inequalities(&rates, r).map(|_| rates))
        {
            Ok(rates) => return Ok((rates, n)),
            Err(e @ DynamicsError::SplittingNotInvariant { .. }) => return Err(e),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or(DynamicsError::NotHyperbolic {
        order: 0,
        detail: "n_max = 0".into(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn axis_frame(base: Vec<f64>, dt: usize, du: usize, ds: usize) -> SplittingFrame {
        let n = base.len();
        let id = DMatrix::<f64>::identity(n, n);
        SplittingFrame {
            base_point: base,
            tangent: id.columns(0, dt).clone_owned(),
            unstable: id.columns(dt, du).clone_owned(),
            stable: id.columns(dt + du, ds).clone_owned(),
        }
    }

    #[test]
    fn diagonal_saddle_rates() {
        let f = DiscreteMap::new(2, -1.0, |_, x, out| {
            out[0] = 2.0 * x[0];
            out[1] = 0.5 * x[1];
        });
        let s = Splitting::new(vec![axis_frame(vec![0.0, 0.0], 0, 1, 1)]).unwrap();
        let rates = check_normal_hyperbolicity(&f, &s, 3, 0.0).unwrap();
        assert_abs_diff_eq!(rates.lambda, 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(rates.nu, 0.5, epsilon = 1e-6);
        assert_eq!(rates.gamma_min, 1.0);
        assert_eq!(rates.gamma_max, 1.0);
    }

    #[test]
    fn tangent_growth_limits_the_order() {
        let f = DiscreteMap::new(3, -1.0, |_, x, out| {
            out[0] = 1.2 * x[0];
            out[1] = 3.0 * x[1];
            out[2] = x[2] / 3.0;
        });
        let s = Splitting::new(vec![axis_frame(vec![0.0; 3], 1, 1, 1)]).unwrap();
        // 3 > 1.2^k holds through k = 6 and fails at k = 7.
        assert!(check_normal_hyperbolicity(&f, &s, 6, 0.0).is_ok());
        let err = check_normal_hyperbolicity(&f, &s, 7, 0.0).unwrap_err();
        assert!(matches!(err, DynamicsError::NotHyperbolic { order: 7, .. }));
    }

    #[test]
    fn rotation_leaks_between_blocks() {
        let f = DiscreteMap::new(2, -1.0, |_, x, out| {
            let (c, s) = (0.6_f64, 0.8_f64);
            out[0] = 2.0 * (c * x[0] - s * x[1]);
            out[1] = 0.5 * (s * x[0] + c * x[1]);
        });
        let s = Splitting::new(vec![axis_frame(vec![0.0, 0.0], 0, 1, 1)]).unwrap();
        assert!(matches!(
            splitting_rates(&f, &s, 0.0),
            Err(DynamicsError::SplittingNotInvariant { .. })
        ));
    }

    #[test]
    fn degenerate_frames_are_rejected() {
        let mut frame = axis_frame(vec![0.0, 0.0], 0, 1, 1);
        // Stable direction nearly parallel to the unstable one.
        frame.stable = DMatrix::from_column_slice(2, 1, &[1.0, 1e-9]);
        assert!(matches!(
            Splitting::new(vec![frame]),
            Err(DynamicsError::InvalidSplitting(_))
        ));
    }

    #[test]
    fn non_orthonormal_block_is_rejected() {
        let mut frame = axis_frame(vec![0.0, 0.0], 0, 1, 1);
        frame.unstable = DMatrix::from_column_slice(2, 1, &[2.0, 0.0]);
        assert!(matches!(
            Splitting::new(vec![frame]),
            Err(DynamicsError::InvalidSplitting(_))
        ));
    }

    #[test]
    fn transient_stable_growth_needs_composition() {
        // The stable block is non-normal: a single step inflates vectors by
        // roughly 5 even though the asymptotic rate is 0.1.
        let f = DiscreteMap::new(3, -1.0, |_, x, out| {
            out[0] = 3.0 * x[0];
            out[1] = 0.1 * x[1] + 5.0 * x[2];
            out[2] = 0.1 * x[2];
        });
        let s = Splitting::new(vec![axis_frame(vec![0.0; 3], 0, 1, 2)]).unwrap();
        assert!(check_normal_hyperbolicity(&f, &s, 1, 0.0).is_err());
        let (rates, n) = check_eventual_normal_hyperbolicity(&f, &s, 1, 0.0, 8).unwrap();
        assert_eq!(n, 3);
        assert!(rates.nu < 1.0);
        assert!(rates.lambda > 1.0);
    }
}
