//! Forward finite-time Lyapunov exponent from the final flow map.

use crate::advect::{GridSpec, TrajectoryEnsemble};
use crate::error::{Error, Result};
use crate::scalar_field::ScalarField;

/// Final positions `Phi(x_j) = x_j(t_n)` for every grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowMapGrid {
    pub grid: GridSpec,
    pub t0: f64,
    pub t1: f64,
    positions: Vec<[f64; 2]>,
}

impl FlowMapGrid {
    pub fn new(grid: GridSpec, t0: f64, t1: f64, positions: Vec<[f64; 2]>) -> Result<Self> {
        if positions.len() != grid.node_count() {
            return Err(Error::Shape(format!(
                "{} flow map entries for {} nodes",
                positions.len(),
                grid.node_count()
            )));
        }
        if positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("flow map contains non-finite entries".into()));
        }
        Ok(Self { grid, t0, t1, positions })
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    fn at(&self, i: usize, j: usize) -> [f64; 2] {
        self.positions[self.grid.index(i, j)]
    }
}

pub fn flow_map_from_ensemble(e: &TrajectoryEnsemble) -> Result<FlowMapGrid> {
    if e.dim() != 2 {
        return Err(Error::Shape(format!("flow map needs planar trajectories, got d = {}", e.dim())));
    }
    let last = e.steps();
    let positions = (0..e.len())
        .map(|j| {
            let p = e.position(j, last);
            [p[0], p[1]]
        })
        .collect();
    FlowMapGrid::new(*e.grid(), e.time().t0, e.time().t_end(), positions)
}

/// Derivative along one axis at sample `k` of `n + 1` equally spaced samples.
/// Central in the interior, second-order one-sided at the ends.
fn diff(sample: impl Fn(usize) -> [f64; 2], k: usize, n: usize, h: f64) -> [f64; 2] {
    let combine = |c: [(usize, f64); 3], denom: f64| {
        let mut out = [0.0; 2];
        for (idx, w) in c {
            let v = sample(idx);
            out[0] += w * v[0];
            out[1] += w * v[1];
        }
        [out[0] / denom, out[1] / denom]
    };
    if k == 0 {
        combine([(0, -3.0), (1, 4.0), (2, -1.0)], 2.0 * h)
    } else if k == n {
        combine([(n, 3.0), (n - 1, -4.0), (n - 2, 1.0)], 2.0 * h)
    } else {
        let a = sample(k + 1);
        let b = sample(k - 1);
        [(a[0] - b[0]) / (2.0 * h), (a[1] - b[1]) / (2.0 * h)]
    }
}

/// Finite-difference Jacobian of the flow map at `node`: `out[r][c] = d Phi_r / d x_c`.
pub fn deformation_gradient(fm: &FlowMapGrid, node: usize) -> Result<[[f64; 2]; 2]> {
    let g = &fm.grid;
    if g.nx < 2 || g.ny < 2 {
        return Err(Error::InvalidSpec("finite differencing needs at least 3 nodes per axis".into()));
    }
    if node >= g.node_count() {
        return Err(Error::Shape(format!("node {node} outside grid of {}", g.node_count())));
    }
    let (i, j) = (node % g.cols(), node / g.cols());
    let ddx = diff(|ii| fm.at(ii, j), i, g.nx, g.dx());
    let ddy = diff(|jj| fm.at(i, jj), j, g.ny, g.dy());
    Ok([[ddx[0], ddy[0]], [ddx[1], ddy[1]]])
}

/// Cauchy-Green tensor `F^T F` as `(c11, c12, c22)`.
pub fn cauchy_green(f: &[[f64; 2]; 2]) -> (f64, f64, f64) {
    let c11 = f[0][0] * f[0][0] + f[1][0] * f[1][0];
    let c12 = f[0][0] * f[0][1] + f[1][0] * f[1][1];
    let c22 = f[0][1] * f[0][1] + f[1][1] * f[1][1];
    (c11, c12, c22)
}

/// Eigenvalues `(min, max)` of the symmetric matrix `[[a, b], [b, c]]`.
pub fn symmetric_eigenvalues(a: f64, b: f64, c: f64) -> (f64, f64) {
    let mean = 0.5 * (a + c);
    let half_diff = 0.5 * (a - c);
    let r = half_diff.hypot(b);
    let hi = mean + r;
    // det / hi avoids cancellation in the small eigenvalue
    let lo = if hi != 0.0 { (a * c - b * b) / hi } else { mean - r };
    (lo, hi)
}

/// FTLE `ln(sqrt(lambda_max)) / |T|` at every node, `T = t_n - t_0`.
pub fn ftle_field(fm: &FlowMapGrid) -> Result<ScalarField> {
    let horizon = (fm.t1 - fm.t0).abs();
    if horizon == 0.0 {
        return Err(Error::InvalidSpec("FTLE needs a nonzero integration time".into()));
    }
    let values = (0..fm.grid.node_count())
        .map(|node| {
            let f = deformation_gradient(fm, node)?;
            let (a, b, c) = cauchy_green(&f);
            let (_, lmax) = symmetric_eigenvalues(a, b, c);
            Ok(Some(0.5 * lmax.ln() / horizon))
        })
        .collect::<Result<Vec<_>>>()?;
    ScalarField::new(fm.grid, "ftle", fm.t0, fm.t1, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::advect::{build_ensemble, TimeSpec};
    use crate::fields::{DoubleGyre, LinearSaddle, Uniform};
    use std::f64::consts::E;

    fn map_grid(f: impl Fn(f64, f64) -> [f64; 2], g: GridSpec, t1: f64) -> FlowMapGrid {
        let pos = (0..g.node_count())
            .map(|n| {
                let [x, y] = g.node(n);
                f(x, y)
            })
            .collect();
        FlowMapGrid::new(g, 0.0, t1, pos).unwrap()
    }

    fn grid() -> GridSpec {
        GridSpec::new(-1.0, 1.0, -1.0, 1.0, 0.125, 0.25).unwrap()
    }

    #[test]
    fn identity_map() {
        let fm = map_grid(|x, y| [x, y], grid(), 2.0);
        for n in 0..fm.grid.node_count() {
            let f = deformation_gradient(&fm, n).unwrap();
            for (r, row) in f.iter().enumerate() {
                for (c, v) in row.iter().enumerate() {
                    let expect = if r == c { 1.0 } else { 0.0 };
                    assert!((v - expect).abs() < 1e-12, "node {n}: {f:?}");
                }
            }
        }
        let s = ftle_field(&fm).unwrap();
        assert!(s.finite().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn affine_map_recovered_exactly() {
        let a = [[1.5, -0.25], [0.75, 2.0]];
        let fm = map_grid(|x, y| [a[0][0] * x + a[0][1] * y + 0.3, a[1][0] * x + a[1][1] * y - 1.1], grid(), 1.0);
        for n in 0..fm.grid.node_count() {
            let f = deformation_gradient(&fm, n).unwrap();
            for r in 0..2 {
                for c in 0..2 {
                    assert!((f[r][c] - a[r][c]).abs() < 1e-12, "node {n}: {f:?}");
                }
            }
        }
    }

    #[test]
    fn rigid_translation_has_zero_ftle() {
        let fm = map_grid(|x, y| [x + 0.7, y - 0.2], grid(), 1.0);
        let s = ftle_field(&fm).unwrap();
        assert!(s.finite().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn zero_horizon_rejected() {
        let fm = map_grid(|x, y| [x, y], grid(), 0.0);
        assert!(ftle_field(&fm).is_err());
    }

    #[test]
    fn too_small_grid_rejected() {
        let g = GridSpec::new(0.0, 1.0, 0.0, 1.0, 1.0, 0.5).unwrap();
        let fm = map_grid(|x, y| [x, y], g, 1.0);
        assert!(deformation_gradient(&fm, 0).is_err());
    }

    #[test]
    fn eigenvalues_closed_form() {
        let (lo, hi) = symmetric_eigenvalues(2.0, 1.0, 2.0);
        assert!((lo - 1.0).abs() < 1e-15 && (hi - 3.0).abs() < 1e-15);
        let (lo, hi) = symmetric_eigenvalues(E * E, 0.0, 1.0 / (E * E));
        assert!((hi - E * E).abs() < 1e-14);
        assert!((lo - 1.0 / (E * E)).abs() < 1e-15);
    }

    #[test]
    fn flow_maps_from_ensembles() {
        let g = GridSpec::new(-1.0, 1.0, -1.0, 1.0, 0.25, 0.25).unwrap();
        let ts = TimeSpec::new(0.0, 0.01, 100).unwrap();

        let e = build_ensemble(&Uniform { velocity: [1.0, 0.0] }, &g, &ts).unwrap();
        let fm = flow_map_from_ensemble(&e).unwrap();
        for (n, p) in fm.positions().iter().enumerate() {
            let [x, y] = g.node(n);
            assert!((p[0] - (x + 1.0)).abs() < 1e-12 && p[1] == y);
        }

        let e = build_ensemble(&Uniform::default(), &g, &ts).unwrap();
        let fm = flow_map_from_ensemble(&e).unwrap();
        for (n, p) in fm.positions().iter().enumerate() {
            assert_eq!(*p, g.node(n));
        }

        let e = build_ensemble(&LinearSaddle, &g, &ts).unwrap();
        let fm = flow_map_from_ensemble(&e).unwrap();
        for (n, p) in fm.positions().iter().enumerate() {
            let [x, y] = g.node(n);
            assert!((p[0] - E * x).abs() < 1e-8 && (p[1] - y / E).abs() < 1e-8);
        }
        for n in 0..g.node_count() {
            let f = deformation_gradient(&fm, n).unwrap();
            assert!((f[0][0] - E).abs() < 1e-4 && (f[1][1] - 1.0 / E).abs() < 1e-4);
            assert!(f[0][1].abs() < 1e-4 && f[1][0].abs() < 1e-4);
        }
        let s = ftle_field(&fm).unwrap();
        assert!(s.finite().all(|v| (v - 1.0).abs() < 1e-3));
    }

    #[test]
    fn double_gyre_tensor_properties() {
        let g = GridSpec::new(0.0, 2.0, 0.0, 1.0, 1.0 / 32.0, 1.0 / 32.0).unwrap();
        let ts = TimeSpec::new(0.0, 0.1, 150).unwrap();
        let e = build_ensemble(&DoubleGyre::default(), &g, &ts).unwrap();
        let fm = flow_map_from_ensemble(&e).unwrap();
        for n in 0..g.node_count() {
            let f = deformation_gradient(&fm, n).unwrap();
            let (a, b, c) = cauchy_green(&f);
            let (lo, _) = symmetric_eigenvalues(a, b, c);
            assert!(lo >= -1e-12, "negative Cauchy-Green eigenvalue {lo} at {n}");
        }
        let s = ftle_field(&fm).unwrap();
        for i in 1..g.nx {
            for j in 1..g.ny {
                let v = s.get(i, j).unwrap();
                assert!(v >= -1e-6, "ftle {v} at ({i}, {j})");
            }
        }
    }
}
