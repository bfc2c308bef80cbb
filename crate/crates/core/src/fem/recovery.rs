//! Recovered nodal gradients, element Hessians and the tangential derivative
//! v₁ = τ·∇u.
//!
//! Plain area-weighted averaging of element gradients is only first-order
//! consistent on unstructured patches, which leaves O(1) errors in the
//! Hessian. Fitting a quadratic to the nodal values of each patch reproduces
//! quadratics exactly, so their Hessians come out exact.

use rayon::prelude::*;

use super::{shape_gradients, tri_points, FemSolution};
use crate::error::{Error, Result};
use crate::geometry::GeometryCtx;
use crate::mesh::Mesh;

#[derive(Debug, Clone)]
pub struct Recovery {
    pub hessian: Vec<[[f64; 2]; 2]>,
    /// τ·∇u_h at each node; `None` at the tip, where τ is undefined, and on
    /// the top and bottom of the box, which lie outside the open cylinder
    /// where the level function is set up.
    pub v1: Vec<Option<f64>>,
}

/// Node neighbor lists through triangles, optionally of one region only.
fn adjacency(mesh: &Mesh, region: Option<u8>) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); mesh.nodes.len()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        if region.is_some_and(|r| mesh.regions[t] != r) {
            continue;
        }
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    adj[tri[i]].push(tri[j]);
                }
            }
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    adj
}

/// Gradient at node `i` of the least-squares quadratic through the values on
/// `patch` (which includes `i`). `None` if the fit is ill-posed.
fn quadratic_fit_gradient(nodes: &[[f64; 2]], u: &[f64], i: usize, patch: &[usize]) -> Option<[f64; 2]> {
    if patch.len() < 6 {
        return None;
    }
    let c = nodes[i];
    let h = patch.iter().map(|&j| (nodes[j][0] - c[0]).hypot(nodes[j][1] - c[1])).fold(0.0, f64::max);
    if !(h > 0.0) {
        return None;
    }
    let mut ata = [[0.0; 6]; 6];
    let mut atb = [0.0; 6];
    for &j in patch {
        let (x, y) = ((nodes[j][0] - c[0]) / h, (nodes[j][1] - c[1]) / h);
        let row = [1.0, x, y, x * x, x * y, y * y];
        for r in 0..6 {
            atb[r] += row[r] * u[j];
            for s in 0..6 {
                ata[r][s] += row[r] * row[s];
            }
        }
    }
    let coef = solve6(ata, atb)?;
    Some([coef[1] / h, coef[2] / h])
}

/// Gaussian elimination with partial pivoting; `None` when nearly singular.
fn solve6(mut a: [[f64; 6]; 6], mut b: [f64; 6]) -> Option<[f64; 6]> {
    let scale = (0..6).map(|i| a[i][i]).fold(0.0, f64::max);
    for k in 0..6 {
        let p = (k..6).max_by(|&x, &y| a[x][k].abs().total_cmp(&a[y][k].abs()))?;
        if !(a[p][k].abs() > 1e-10 * scale) {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for r in k + 1..6 {
            let f = a[r][k] / a[k][k];
            for s in k..6 {
                a[r][s] -= f * a[k][s];
            }
            b[r] -= f * b[k];
        }
    }
    let mut x = [0.0; 6];
    for k in (0..6).rev() {
        let s: f64 = (k + 1..6).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    Some(x)
}

fn area_average(mesh: &Mesh, grads: &[[f64; 2]], region: Option<u8>, i: usize) -> [f64; 2] {
    let (mut acc, mut w) = ([0.0; 2], 0.0);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        if region.is_some_and(|r| mesh.regions[t] != r) || !tri.contains(&i) {
            continue;
        }
        let a = mesh.area(t);
        acc[0] += a * grads[t][0];
        acc[1] += a * grads[t][1];
        w += a;
    }
    if w > 0.0 {
        [acc[0] / w, acc[1] / w]
    } else {
        acc
    }
}

/// Nodal gradients from quadratic fits over one-ring patches (two-ring when
/// the one-ring is too small), restricted to one region if asked. Nodes with
/// an ill-posed fit fall back to the area-weighted element average.
fn nodal_gradients(mesh: &Mesh, u: &[f64], grads: &[[f64; 2]], region: Option<u8>) -> Vec<[f64; 2]> {
    let adj = adjacency(mesh, region);
    (0..mesh.nodes.len())
        .into_par_iter()
        .map(|i| {
            if adj[i].is_empty() {
                return [0.0; 2];
            }
            let mut patch = adj[i].clone();
            patch.push(i);
            if let Some(g) = (patch.len() >= 10).then(|| quadratic_fit_gradient(&mesh.nodes, u, i, &patch)).flatten() {
                return g;
            }
            for &j in &adj[i] {
                patch.extend_from_slice(&adj[j]);
            }
            patch.sort_unstable();
            patch.dedup();
            quadratic_fit_gradient(&mesh.nodes, u, i, &patch).unwrap_or_else(|| area_average(mesh, grads, region, i))
        })
        .collect()
}

/// Nodal gradients over full patches, and per-element Hessians built from
/// nodal gradients recovered within each region.
pub(super) fn recover(mesh: &Mesh, u: &[f64], grads: &[[f64; 2]]) -> (Vec<[f64; 2]>, Vec<[[f64; 2]; 2]>) {
    let all = nodal_gradients(mesh, u, grads, None);
    let per_region = [nodal_gradients(mesh, u, grads, Some(1)), nodal_gradients(mesh, u, grads, Some(2))];
    let hess = (0..mesh.triangles.len())
        .map(|t| {
            let (g, _) = shape_gradients(tri_points(mesh, t));
            let nodal = &per_region[mesh.regions[t] as usize - 1];
            let mut h = [[0.0; 2]; 2];
            for (i, &node) in mesh.triangles[t].iter().enumerate() {
                for k in 0..2 {
                    for l in 0..2 {
                        h[k][l] += nodal[node][k] * g[i][l];
                    }
                }
            }
            let off = 0.5 * (h[0][1] + h[1][0]);
            [[h[0][0], off], [off, h[1][1]]]
        })
        .collect();
    (all, hess)
}

pub fn recover_derivatives(sol: &FemSolution, ctx: &GeometryCtx) -> Result<Recovery> {
    if ctx.dim() != 2 {
        return Err(Error::UnsupportedDimension(ctx.dim()));
    }
    let mesh = &sol.mesh;
    let v1 = mesh
        .nodes
        .iter()
        .enumerate()
        .map(|(i, x)| {
            if i == mesh.tip {
                return Ok(None);
            }
            if !(x[1].abs() < ctx.top()) {
                return Ok(None);
            }
            let tau = ctx.tau_field(x, 0.0)?.tau;
            let g = sol.recovered_gradient[i];
            Ok(Some(tau[0] * g[0] + tau[1] * g[1]))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Recovery { hessian: sol.recovered_hessian.clone(), v1 })
}
