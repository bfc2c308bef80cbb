//! Piecewise-linear finite elements for the transmission problem
//! `−div(κ∇u) = f` in Ω₁ ∪ Ω₂ with flux jump `[[−κ∇u]]·ν = Q` on the
//! interface S and Dirichlet data on the box boundary.
//!
//! Jumps are taken as (trace from Ω₂) − (trace from Ω₁) with ν pointing into
//! Ω₂. Integrating by parts region by region gives
//! `∫ κ∇u·∇φ = ∫ fφ + ∫_S Qφ`, so the interface term enters the load with a
//! plus sign.

mod cases;
mod recovery;

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{project_to_interface, Mesh};
use crate::numerics::cholesky::{nested_dissection, SparseCholesky};
use crate::numerics::quad::{GaussLegendre, TRI_DEG2, TRI_DEG4};
use crate::numerics::sparse::{pcg, Csr};

pub use cases::{manufactured_case, Case, ExactSolution, Manufactured};
pub use recovery::{recover_derivatives, Recovery};


/// Conductivity of one region: a scalar or a symmetric 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Kappa {
    Scalar(f64),
    Matrix([[f64; 2]; 2]),
}

impl Kappa {
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        match *self {
            Kappa::Scalar(k) => [[k, 0.0], [0.0, k]],
            Kappa::Matrix(m) => m,
        }
    }

    /// Smallest and largest eigenvalue.
    pub fn eigen_range(&self) -> (f64, f64) {
        let [[a, b], [_, d]] = self.matrix();
        let mid = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        (mid - rad, mid + rad)
    }

    fn validate(&self) -> Result<()> {
        let m = self.matrix();
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Config("κ has non-finite entries".into()));
        }
        if (m[0][1] - m[1][0]).abs() > 1e-12 * (m[0][1].abs() + m[1][0].abs() + 1.0) {
            return Err(Error::Config("κ must be symmetric".into()));
        }
        if !(self.eigen_range().0 > 0.0) {
            return Err(Error::Config("κ must be positive definite".into()));
        }
        Ok(())
    }

    fn apply(&self, g: [f64; 2]) -> [f64; 2] {
        let m = self.matrix();
        [m[0][0] * g[0] + m[0][1] * g[1], m[1][0] * g[0] + m[1][1] * g[1]]
    }
}

/// Bulk source, evaluated at a point with the region tag of its element.
pub type BulkFn = Arc<dyn Fn([f64; 2], u8) -> f64 + Send + Sync>;
/// Function of a point (on S for the interface source, on ∂Ω for Dirichlet data).
pub type PointFn = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct FemProblem {
    pub mesh: Arc<Mesh>,
    /// κ in Ω₁ and Ω₂.
    pub kappa: [Kappa; 2],
    pub f: BulkFn,
    pub q: PointFn,
    pub dirichlet: PointFn,
}

impl std::fmt::Debug for FemProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FemProblem")
            .field("nodes", &self.mesh.nodes.len())
            .field("triangles", &self.mesh.triangles.len())
            .field("kappa", &self.kappa)
            .finish_non_exhaustive()
    }
}

impl FemProblem {
    /// Problem with zero sources and zero boundary data.
    pub fn new(mesh: Arc<Mesh>, kappa1: Kappa, kappa2: Kappa) -> Result<Self> {
        kappa1.validate()?;
        kappa2.validate()?;
        let zero: PointFn = Arc::new(|_| 0.0);
        Ok(Self { mesh, kappa: [kappa1, kappa2], f: Arc::new(|_, _| 0.0), q: zero.clone(), dirichlet: zero })
    }

    pub fn with_source(mut self, f: impl Fn([f64; 2], u8) -> f64 + Send + Sync + 'static) -> Self {
        self.f = Arc::new(f);
        self
    }

    pub fn with_interface_source(mut self, q: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static) -> Self {
        self.q = Arc::new(q);
        self
    }

    pub fn with_dirichlet(mut self, g: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static) -> Self {
        self.dirichlet = Arc::new(g);
        self
    }

    /// (k₀, k₁): extreme eigenvalues of κ over both regions.
    pub fn ellipticity(&self) -> (f64, f64) {
        let (a, b) = self.kappa[0].eigen_range();
        let (c, d) = self.kappa[1].eigen_range();
        (a.min(c), b.max(d))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub unknowns: usize,
    pub iterations: usize,
    pub relative_residual: f64,
    /// Euclidean norm of the assembled residual over interior basis functions,
    /// recomputed after the solve.
    pub galerkin_residual: f64,
    /// Euclidean norm of the reduced load vector.
    pub load_norm: f64,
}

#[derive(Debug, Clone)]
pub struct FemSolution {
    pub mesh: Arc<Mesh>,
    pub kappa: [Kappa; 2],
    pub nodal_values: Vec<f64>,
    /// Constant gradient of u_h on each triangle.
    pub element_gradients: Vec<[f64; 2]>,
    /// Nodal gradient from a least-squares quadratic fit over each node's patch.
    pub recovered_gradient: Vec<[f64; 2]>,
    /// Symmetrized gradient of the recovered gradient, per triangle. The
    /// nodal gradients feeding it are recovered within the triangle's region
    /// so the coefficient jump does not leak into the Hessian.
    pub recovered_hessian: Vec<[[f64; 2]; 2]>,
    /// Assembled load `∫ fφᵢ + ∫_S Qφᵢ` for every node.
    pub load: Vec<f64>,
    pub stats: SolveStats,
}

/// Gradients of the barycentric coordinates and the area.
pub(crate) fn shape_gradients(p: [[f64; 2]; 3]) -> ([[f64; 2]; 3], f64) {
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
        g[i] = [(a[1] - b[1]) / det, (b[0] - a[0]) / det];
    }
    (g, 0.5 * det)
}

fn point(p: [[f64; 2]; 3], l: [f64; 3]) -> [f64; 2] {
    [
        l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
        l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
    ]
}

fn tri_points(mesh: &Mesh, t: usize) -> [[f64; 2]; 3] {
    mesh.triangles[t].map(|i| mesh.nodes[i])
}

struct Local {
    k: [[f64; 3]; 3],
    b: [f64; 3],
}

fn local_system(p: &FemProblem, t: usize) -> Local {
    let mesh = &p.mesh;
    let pts = tri_points(mesh, t);
    let region = mesh.regions[t];
    let kappa = p.kappa[region as usize - 1];
    let (g, area) = shape_gradients(pts);
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        let kg = kappa.apply(g[i]);
        for j in 0..3 {
            k[i][j] = area * (kg[0] * g[j][0] + kg[1] * g[j][1]);
        }
    }
    let mut b = [0.0; 3];
    for &(l1, l2, l3, w) in TRI_DEG2 {
        let l = [l1, l2, l3];
        let fv = (p.f)(point(pts, l), region);
        for i in 0..3 {
            b[i] += area * w * fv * l[i];
        }
    }
    Local { k, b }
}

/// Assemble the P1 system, eliminate Dirichlet rows and solve to relative
/// residual `tol`. The solve is a sparse Cholesky factorization used inside
/// conjugate gradients, so the residual is checked rather than assumed; the
/// thin cusp cap makes the matrix too ill-conditioned for cheap
/// preconditioners.
pub fn assemble_and_solve(p: &FemProblem, tol: f64) -> Result<FemSolution> {
    if !(tol > 0.0 && tol <= 1e-4) {
        return Err(Error::Config(format!("solver tolerance {tol} outside (0, 1e-4]")));
    }
    p.kappa[0].validate()?;
    p.kappa[1].validate()?;
    let mesh = &p.mesh;
    let n = mesh.nodes.len();
    if mesh.regions.len() != mesh.triangles.len() {
        return Err(Error::Assembly("mesh lacks region tags".into()));
    }
    let locals: Vec<Local> = (0..mesh.triangles.len()).into_par_iter().map(|t| local_system(p, t)).collect();

    let mut load = vec![0.0; n];
    for (t, loc) in locals.iter().enumerate() {
        for (i, &node) in mesh.triangles[t].iter().enumerate() {
            load[node] += loc.b[i];
        }
    }
    let profile = mesh.profile_fn()?;
    let seg = GaussLegendre::cached(3);
    for e in &mesh.interface_edges {
        let (a, b) = (mesh.nodes[e[0]], mesh.nodes[e[1]]);
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        for (&t, &w) in seg.nodes.iter().zip(&seg.weights) {
            // Map [-1, 1] to [0, 1].
            let (s, w) = (0.5 * (t + 1.0), 0.5 * w);
            let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
            let qv = (p.q)(project_to_interface(&profile, mesh.top, x));
            load[e[0]] += len * w * qv * (1.0 - s);
            load[e[1]] += len * w * qv * s;
        }
    }

    let mut fixed = vec![false; n];
    for &i in &mesh.boundary_nodes {
        fixed[i] = true;
    }
    let mut u = vec![0.0; n];
    for i in 0..n {
        if fixed[i] {
            u[i] = (p.dirichlet)(mesh.nodes[i]);
        }
    }
    let mut index = vec![usize::MAX; n];
    let mut free = Vec::new();
    for i in 0..n {
        if !fixed[i] {
            index[i] = free.len();
            free.push(i);
        }
    }
    let m = free.len();
    let mut rhs: Vec<f64> = free.iter().map(|&i| load[i]).collect();
    let mut trip = Vec::with_capacity(9 * mesh.triangles.len());
    for (t, loc) in locals.iter().enumerate() {
        let tri = mesh.triangles[t];
        for i in 0..3 {
            let ri = index[tri[i]];
            if ri == usize::MAX {
                continue;
            }
            for j in 0..3 {
                let cj = index[tri[j]];
                if cj == usize::MAX {
                    rhs[ri] -= loc.k[i][j] * u[tri[j]];
                } else {
                    trip.push((ri, cj, loc.k[i][j]));
                }
            }
        }
    }
    let a = Csr::from_triplets(m, trip);
    let mut x = vec![0.0; m];
    let coords: Vec<[f64; 2]> = free.iter().map(|&i| mesh.nodes[i]).collect();
    let cg_stats = SparseCholesky::new(&a, nested_dissection(&a, &coords))
        .and_then(|chol| pcg(&a, &rhs, &mut x, tol, 50, &chol))
        .map_err(|e| match e {
        Error::Solver(msg) => Error::Assembly(format!("system is singular or indefinite: {msg}")),
        other => other,
    })?;
    let mut ax = vec![0.0; m];
    a.mul(&x, &mut ax);
    let galerkin_residual = ax.iter().zip(&rhs).map(|(l, r)| (l - r) * (l - r)).sum::<f64>().sqrt();
    let load_norm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    for (k, &i) in free.iter().enumerate() {
        u[i] = x[k];
    }

    let stats = SolveStats {
        unknowns: m,
        iterations: cg_stats.iterations,
        relative_residual: cg_stats.relative_residual,
        galerkin_residual,
        load_norm,
    };
    let element_gradients = element_gradients(mesh, &u);
    let (recovered_gradient, recovered_hessian) = recovery::recover(mesh, &u, &element_gradients);
    Ok(FemSolution {
        mesh: p.mesh.clone(),
        kappa: p.kappa,
        nodal_values: u,
        element_gradients,
        recovered_gradient,
        recovered_hessian,
        load,
        stats,
    })
}

fn element_gradients(mesh: &Mesh, u: &[f64]) -> Vec<[f64; 2]> {
    (0..mesh.triangles.len())
        .map(|t| {
            let (g, _) = shape_gradients(tri_points(mesh, t));
            let tri = mesh.triangles[t];
            let mut out = [0.0; 2];
            for i in 0..3 {
                out[0] += u[tri[i]] * g[i][0];
                out[1] += u[tri[i]] * g[i][1];
            }
            out
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorNorms {
    pub l2: f64,
    pub h1_semi: f64,
}

/// L² and H¹-seminorm errors by the degree-4 rule on every triangle.
pub fn error_norms(
    sol: &FemSolution,
    u: &(dyn Fn([f64; 2]) -> f64 + Sync),
    grad: &(dyn Fn([f64; 2]) -> [f64; 2] + Sync),
) -> ErrorNorms {
    let mesh = &sol.mesh;
    let (l2, h1) = (0..mesh.triangles.len())
        .into_par_iter()
        .map(|t| {
            let pts = tri_points(mesh, t);
            let tri = mesh.triangles[t];
            let area = mesh.area(t);
            let gh = sol.element_gradients[t];
            let (mut a, mut b) = (0.0, 0.0);
            for &(l1, l2, l3, w) in TRI_DEG4 {
                let l = [l1, l2, l3];
                let x = point(pts, l);
                let uh: f64 = (0..3).map(|i| l[i] * sol.nodal_values[tri[i]]).sum();
                let ge = grad(x);
                a += w * (uh - u(x)).powi(2);
                b += w * ((gh[0] - ge[0]).powi(2) + (gh[1] - ge[1]).powi(2));
            }
            (area * a, area * b)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0, 0.0), |acc, v| (acc.0 + v.0, acc.1 + v.1));
    ErrorNorms { l2: l2.sqrt(), h1_semi: h1.sqrt() }
}

impl FemSolution {
    /// Wrap given nodal values (an interpolant, say) so the recovery and
    /// norm routines apply to them. Load and solver statistics are zero.
    pub fn from_nodal_values(mesh: Arc<Mesh>, kappa: [Kappa; 2], values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.nodes.len() {
            return Err(Error::Config(format!("{} nodal values for {} nodes", values.len(), mesh.nodes.len())));
        }
        let element_gradients = element_gradients(&mesh, &values);
        let (recovered_gradient, recovered_hessian) = recovery::recover(&mesh, &values, &element_gradients);
        let n = values.len();
        Ok(Self {
            mesh,
            kappa,
            nodal_values: values,
            element_gradients,
            recovered_gradient,
            recovered_hessian,
            load: vec![0.0; n],
            stats: SolveStats { unknowns: 0, iterations: 0, relative_residual: 0.0, galerkin_residual: 0.0, load_norm: 0.0 },
        })
    }

    /// u_h at a point of triangle `t` given by barycentric coordinates.
    pub fn value_at(&self, t: usize, l: [f64; 3]) -> f64 {
        let tri = self.mesh.triangles[t];
        (0..3).map(|i| l[i] * self.nodal_values[tri[i]]).sum()
    }

    /// ‖∇u_h‖²_{L²}.
    pub fn gradient_norm_sq(&self) -> f64 {
        self.element_gradients
            .iter()
            .enumerate()
            .map(|(t, g)| self.mesh.area(t) * (g[0] * g[0] + g[1] * g[1]))
            .sum()
    }

    /// The discrete load applied to u_h: `∫ f u_h + ∫_S Q u_h`.
    pub fn load_pairing(&self) -> f64 {
        self.load.iter().zip(&self.nodal_values).map(|(b, u)| b * u).sum()
    }

    /// Edge-wise flux jump `(−κ₂∇u₂ + κ₁∇u₁)·ν` on interface edges, with ν
    /// the unit chord normal pointing into Ω₂.
    pub fn interface_flux_jumps(&self) -> Result<Vec<FluxJump>> {
        let mesh = &self.mesh;
        let edges = mesh.edge_map();
        let mut out = Vec::with_capacity(mesh.interface_edges.len());
        for e in &mesh.interface_edges {
            let ts = edges.get(e).ok_or_else(|| Error::Assembly(format!("interface edge {e:?} is not a mesh edge")))?;
            let (t1, t2) = match ts.as_slice() {
                [a, b] if mesh.regions[*a] == 1 && mesh.regions[*b] == 2 => (*a, *b),
                [a, b] if mesh.regions[*a] == 2 && mesh.regions[*b] == 1 => (*b, *a),
                _ => return Err(Error::Assembly(format!("interface edge {e:?} does not separate the regions"))),
            };
            let (a, b) = (mesh.nodes[e[0]], mesh.nodes[e[1]]);
            let len = (b[0] - a[0]).hypot(b[1] - a[1]);
            let mut nu = [-(b[1] - a[1]) / len, (b[0] - a[0]) / len];
            let c2 = mesh.centroid(t2);
            if nu[0] * (c2[0] - a[0]) + nu[1] * (c2[1] - a[1]) < 0.0 {
                nu = [-nu[0], -nu[1]];
            }
            let f1 = self.kappa[0].apply(self.element_gradients[t1]);
            let f2 = self.kappa[1].apply(self.element_gradients[t2]);
            let jump = -(f2[0] - f1[0]) * nu[0] - (f2[1] - f1[1]) * nu[1];
            out.push(FluxJump { edge: *e, midpoint: [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])], length: len, jump });
        }
        Ok(out)
    }

    /// CSV with columns node_id, x, y, u, gx, gy (recovered gradient).
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "node_id,x,y,u,gx,gy")?;
        for (i, p) in self.mesh.nodes.iter().enumerate() {
            let g = self.recovered_gradient[i];
            writeln!(w, "{i},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", p[0], p[1], self.nodal_values[i], g[0], g[1])?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxJump {
    pub edge: [usize; 2],
    pub midpoint: [f64; 2],
    pub length: f64,
    pub jump: f64,
}
