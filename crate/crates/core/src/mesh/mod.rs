//! Interface-fitted, geometrically graded triangulations of the planar
//! cylinder `|x₁| < R, |x₂| < σ(R)` split by the curve `x₂ = σ(|x₁|)`.
//!
//! Boundary and interface nodes are placed by marching chords of the local
//! target size, the interior is seeded with graded polar rings, and the result
//! is a constrained Delaunay triangulation refined for angle quality. Points
//! that refinement inserts on interface chords are moved onto the curve.

mod io;
mod refine;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use spade::{ConstrainedDelaunayTriangulation, Point2, Triangulation};

use crate::error::{Error, Result};
use crate::numerics::roots::brent;
use crate::profiles::{Profile, ProfileSpec};

pub use io::{read_mesh, write_mesh};
use refine::{Refiner, VKind};

/// Relative tolerance for the on-graph and region checks.
pub const GRAPH_TOL: f64 = 1e-12;
/// Angle targeted by Delaunay refinement.
const REFINE_ANGLE_DEG: f64 = 25.0;
/// Shape-regularity bound checked by [`Mesh::validate`].
pub const MIN_ANGLE_DEG: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grading {
    pub h0: f64,
    pub beta: f64,
    pub levels: usize,
}

impl Grading {
    /// Target edge length at distance `r` from the tip.
    pub fn size_at(&self, r: f64, r0: f64) -> f64 {
        let floor = self.beta.powi(self.levels as i32);
        self.h0 * (r / r0).clamp(floor, 1.0)
    }

    pub fn min_size(&self) -> f64 {
        self.h0 * self.beta.powi(self.levels as i32)
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    /// Counter-clockwise node triples.
    pub triangles: Vec<[usize; 3]>,
    /// Region tag per triangle: 1 below the interface, 2 above.
    pub regions: Vec<u8>,
    pub interface_edges: Vec<[usize; 2]>,
    pub boundary_nodes: Vec<usize>,
    pub grading: Grading,
    pub profile: ProfileSpec,
    /// Half-width R of the box and its half-height σ(R).
    pub radius: f64,
    pub top: f64,
    /// Index of the node at the origin.
    pub tip: usize,
    /// Height of the cusp cap: region-2 triangles below it sit in a strip
    /// narrower than the smallest target size. Zero when there is no cap.
    pub cap_height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshReport {
    pub nodes: usize,
    pub triangles: usize,
    pub min_angle_deg: f64,
    /// Minimum angle over triangles outside the thin cusp cap.
    pub min_angle_regular_deg: f64,
    /// Region-2 triangles inside the cusp cap, where the strip is narrower
    /// than the smallest target size and no good triangulation exists.
    pub cusp_cap_triangles: usize,
    pub max_interface_offset: f64,
    pub area: f64,
    pub region_areas: [f64; 2],
    /// Inner radius R₀β^L of the innermost grading ring.
    pub innermost_ring: f64,
}

/// Triangles grouped by centroid radius.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnulusPartition {
    /// Centroid radius ≥ radii[0].
    pub outer: Vec<usize>,
    /// `rings[k]`: radii[k+1] ≤ r < radii[k].
    pub rings: Vec<Vec<usize>>,
    /// Centroid radius < last radius.
    pub inner: Vec<usize>,
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn norm(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

pub(crate) fn signed_area(p: [f64; 2], q: [f64; 2], r: [f64; 2]) -> f64 {
    0.5 * cross(sub(q, p), sub(r, p))
}

/// Interior angles of a triangle in degrees.
pub fn angles_deg(p: [[f64; 2]; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for i in 0..3 {
        let a = sub(p[(i + 1) % 3], p[i]);
        let b = sub(p[(i + 2) % 3], p[i]);
        let c = (a[0] * b[0] + a[1] * b[1]) / (norm(a) * norm(b));
        out[i] = c.clamp(-1.0, 1.0).acos().to_degrees();
    }
    out
}

/// Closest-in-direction point of the interface: vertical projection where the
/// curve is flat, horizontal where it is steep.
pub(crate) fn project_to_interface(profile: &Profile, top: f64, p: [f64; 2]) -> [f64; 2] {
    let x = p[0].abs();
    if x == 0.0 {
        return [0.0, 0.0];
    }
    let s = p[0].signum();
    let ds = profile.eval_unchecked(x).dsigma;
    if ds.abs() <= 1.0 {
        [p[0], profile.sigma(x)]
    } else {
        [s * interface_abscissa(profile, p[1].clamp(0.0, top)), p[1]]
    }
}

/// σ⁻¹(z), kept strictly positive for z > 0 where it underflows.
fn interface_abscissa(profile: &Profile, z: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    profile.invert_unchecked(z).max(f64::MIN_POSITIVE)
}

/// Parameters along a path, spaced by chords of the local target size.
fn march(a: f64, b: f64, point: &dyn Fn(f64) -> [f64; 2], size: &dyn Fn([f64; 2]) -> f64) -> Result<Vec<f64>> {
    let mut ts = vec![a];
    let end = point(b);
    loop {
        let t = *ts.last().expect("nonempty");
        let p = point(t);
        let h = size(p);
        if norm(sub(end, p)) <= 1.2 * h {
            break;
        }
        let next = brent(|s| norm(sub(point(s), p)) - h, t, b, 1e-13)
            .map_err(|e| Error::Meshing(format!("chord placement failed: {e}")))?;
        ts.push(next);
        if ts.len() > 1_000_000 {
            return Err(Error::Meshing("too many boundary nodes".into()));
        }
    }
    let last = *ts.last().expect("nonempty");
    if ts.len() > 1 && norm(sub(end, point(last))) < 0.4 * size(point(last)) {
        ts.pop();
    }
    ts.push(b);
    Ok(ts)
}

struct Builder {
    profile: Profile,
    grading: Grading,
    radius: f64,
    top: f64,
}

impl Builder {
    fn size(&self, p: [f64; 2]) -> f64 {
        self.grading.size_at(norm(p), self.radius)
    }

    /// Approximate distance from p to the interface curve.
    fn curve_distance(&self, p: [f64; 2]) -> f64 {
        let x = p[0].abs();
        let dv = (p[1] - self.profile.sigma(x)).abs();
        let dh = if p[1] <= 0.0 {
            f64::INFINITY
        } else if p[1] >= self.top {
            (x - self.radius).abs().max(p[1] - self.top)
        } else {
            (x - self.profile.invert_unchecked(p[1])).abs()
        };
        if dh.is_infinite() {
            return dv.min(norm(p));
        }
        let d = dv * dh / dv.hypot(dh).max(f64::MIN_POSITIVE);
        d.min(norm(p))
    }

    /// Boundary and interface polylines, plus the height of the cusp cap lid
    /// (0 when there is no cap).
    fn outline(&self) -> Result<(Vec<[f64; 2]>, Vec<[usize; 2]>, f64)> {
        let (r, t) = (self.radius, self.top);
        let size = |p: [f64; 2]| self.size(p);
        let mut pts: Vec<[f64; 2]> = Vec::new();
        let mut edges = Vec::new();
        let push_path = |path: &[[f64; 2]], pts: &mut Vec<[f64; 2]>, edges: &mut Vec<[usize; 2]>| {
            // Paths share endpoints; reuse an existing node when coincident.
            let mut prev: Option<usize> = None;
            for p in path {
                let idx = pts.iter().position(|q| q == p).unwrap_or_else(|| {
                    pts.push(*p);
                    pts.len() - 1
                });
                if let Some(a) = prev {
                    edges.push([a, idx]);
                }
                prev = Some(idx);
            }
        };
        // Branches are marched in height so that steep cusps stay resolved.
        let prof = &self.profile;
        let branch = |z: f64| [interface_abscissa(prof, z), z];
        let zs = march(0.0, t, &branch, &size)?;
        let mut right: Vec<[f64; 2]> = zs.iter().map(|&z| branch(z)).collect();
        *right.last_mut().expect("nonempty") = [r, t];
        let left: Vec<[f64; 2]> = right.iter().map(|p| [-p[0], p[1]]).collect();
        push_path(&right, &mut pts, &mut edges);
        push_path(&left, &mut pts, &mut edges);
        let segs: [([f64; 2], [f64; 2]); 4] =
            [([-r, t], [r, t]), ([r, t], [r, -t]), ([r, -t], [-r, -t]), ([-r, -t], [-r, t])];
        for (a, b) in segs {
            let line = |s: f64| [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
            let ts = march(0.0, 1.0, &line, &size)?;
            let path: Vec<[f64; 2]> =
                ts.iter().map(|&s| if s == 0.0 { a } else if s == 1.0 { b } else { line(s) }).collect();
            push_path(&path, &mut pts, &mut edges);
        }
        // Where Ω₂ is narrower than the smallest target size no well-shaped
        // triangle fits; a lid closes that cap off from refinement.
        let cap = right.iter().position(|p| 2.0 * p[0] >= self.grading.min_size()).filter(|&k| k > 1 && k + 1 < right.len());
        let mut cap_height = 0.0;
        if let Some(k) = cap {
            let ia = pts.iter().position(|q| q == &left[k]).expect("left node");
            let ib = pts.iter().position(|q| q == &right[k]).expect("right node");
            edges.push([ia, ib]);
            cap_height = right[k][1];
        }
        Ok((pts, edges, cap_height))
    }

    /// Graded polar rings of interior seed points.
    fn seeds(&self) -> Vec<[f64; 2]> {
        let (r, t) = (self.radius, self.top);
        let r_max = r.hypot(t);
        let mut out = Vec::new();
        let mut rho = 0.0;
        let mut ring = 0usize;
        loop {
            let h = self.grading.size_at(rho, r);
            rho += 0.866 * h;
            if rho >= r_max {
                break;
            }
            let h = self.grading.size_at(rho, r);
            let n = ((2.0 * std::f64::consts::PI * rho / h).ceil() as usize).max(6);
            let offset = if ring.is_multiple_of(2) { 0.0 } else { 0.5 };
            for k in 0..n {
                let a = 2.0 * std::f64::consts::PI * (k as f64 + offset) / n as f64;
                let p = [rho * a.cos(), rho * a.sin()];
                let margin = 0.5 * h;
                if p[0].abs() > r - margin || p[1].abs() > t - margin {
                    continue;
                }
                if self.curve_distance(p) < margin {
                    continue;
                }
                out.push(p);
            }
            ring += 1;
        }
        out
    }
}

/// Build the graded, interface-fitted mesh.
pub fn build_graded_mesh(spec: &ProfileSpec, h0: f64, beta: f64, levels: usize) -> Result<Mesh> {
    let profile = spec.build()?;
    let radius = profile.regular_radius();
    let top = profile.sigma(radius);
    if !(h0 > 0.0 && h0 < radius / 4.0) {
        return Err(Error::Config(format!("h0={h0} must lie in (0, R0/4) with R0={radius}")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Config(format!("beta={beta} outside (0,1)")));
    }
    if levels > 40 {
        return Err(Error::Config(format!("levels={levels} exceeds 40")));
    }
    if !(top > h0) {
        return Err(Error::Meshing(format!("σ(R0)={top} is too small for h0={h0}")));
    }
    let grading = Grading { h0, beta, levels };
    let b = Builder { profile, grading, radius, top };
    let hmin = grading.min_size();
    let z_floor = b.profile.sigma(1e-300 * radius);
    if hmin < 4.0 * z_floor {
        return Err(Error::Meshing(format!(
            "interface is numerically vertical below height {z_floor:.3e}; raise h0·beta^levels={hmin:.3e}"
        )));
    }
    let (mut pts, edges, cap_height) = b.outline()?;
    let mut kinds: Vec<VKind> = pts
        .iter()
        .map(|p| {
            let on_curve = (p[1] - b.profile.sigma(p[0].abs())).abs() <= GRAPH_TOL * radius;
            if on_curve { VKind::Interface } else { VKind::Boundary }
        })
        .collect();
    let seeds = b.seeds();
    kinds.extend(std::iter::repeat_n(VKind::Interior, seeds.len()));
    pts.extend(seeds);

    let vertices: Vec<Point2<f64>> = pts.iter().map(|p| Point2::new(p[0], p[1])).collect();
    let cdt = ConstrainedDelaunayTriangulation::<Point2<f64>>::bulk_load_cdt(vertices, edges)
        .map_err(|e| Error::Meshing(format!("triangulation failed: {e:?}")))?;
    let mut refiner = Refiner {
        cdt,
        kinds,
        profile: &b.profile,
        grading,
        radius,
        top,
        cap_height,
        min_angle_deg: REFINE_ANGLE_DEG,
        min_area: 0.05 * hmin * hmin,
        max_vertices: 50 * pts.len() + 100_000,
    };
    refiner.run()?;
    let interface_edges = refiner.interface_edges();
    let cdt = refiner.cdt;
    let nodes: Vec<[f64; 2]> = cdt.vertices().map(|v| [v.position().x, v.position().y]).collect();
    let triangles: Vec<[usize; 3]> =
        cdt.inner_faces().map(|f| f.vertices().map(|v| v.fix().index())).collect();
    let tip = nodes
        .iter()
        .position(|p| p[0] == 0.0 && p[1] == 0.0)
        .ok_or_else(|| Error::Meshing("tip node missing".into()))?;
    let mut mesh = Mesh {
        nodes,
        triangles,
        regions: Vec::new(),
        interface_edges,
        boundary_nodes: Vec::new(),
        grading,
        profile: spec.clone(),
        radius,
        top,
        tip,
        cap_height,
    };
    mesh.finish()?;
    Ok(mesh)
}

impl Mesh {
    /// Recompute boundary nodes and region tags, and fix orientation.
    fn finish(&mut self) -> Result<()> {
        for t in &mut self.triangles {
            let p = t.map(|i| self.nodes[i]);
            if signed_area(p[0], p[1], p[2]) < 0.0 {
                t.swap(1, 2);
            }
        }
        let (r, top) = (self.radius, self.top);
        let on = |v: f64, w: f64| (v.abs() - w).abs() <= GRAPH_TOL * r;
        self.boundary_nodes =
            (0..self.nodes.len()).filter(|&i| on(self.nodes[i][0], r) || on(self.nodes[i][1], top)).collect();
        self.regions = self.flood_regions()?;
        Ok(())
    }

    /// Edge → adjacent triangles.
    pub fn edge_map(&self) -> HashMap<[usize; 2], Vec<usize>> {
        let mut map: HashMap<[usize; 2], Vec<usize>> = HashMap::with_capacity(3 * self.triangles.len() / 2 + 8);
        for (ti, t) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                map.entry([a.min(b), a.max(b)]).or_default().push(ti);
            }
        }
        map
    }

    fn flood_regions(&self) -> Result<Vec<u8>> {
        let seed_pt = [0.0, 0.5 * self.top];
        let seed = self
            .triangles
            .iter()
            .position(|t| {
                let p = t.map(|i| self.nodes[i]);
                (0..3).all(|k| signed_area(p[k], p[(k + 1) % 3], seed_pt) >= 0.0)
            })
            .ok_or_else(|| Error::Meshing("no triangle contains the region-2 seed".into()))?;
        let iface: std::collections::HashSet<[usize; 2]> = self.interface_edges.iter().copied().collect();
        let edges = self.edge_map();
        let mut regions = vec![1u8; self.triangles.len()];
        regions[seed] = 2;
        let mut stack = vec![seed];
        while let Some(ti) = stack.pop() {
            let t = self.triangles[ti];
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                let key = [a.min(b), a.max(b)];
                if iface.contains(&key) {
                    continue;
                }
                for &nb in &edges[&key] {
                    if regions[nb] == 1 {
                        regions[nb] = 2;
                        stack.push(nb);
                    }
                }
            }
        }
        Ok(regions)
    }

    pub fn area(&self, ti: usize) -> f64 {
        let p = self.triangles[ti].map(|i| self.nodes[i]);
        signed_area(p[0], p[1], p[2])
    }

    pub fn centroid(&self, ti: usize) -> [f64; 2] {
        let p = self.triangles[ti].map(|i| self.nodes[i]);
        [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0]
    }

    pub fn profile_fn(&self) -> Result<Profile> {
        self.profile.build()
    }

    /// Check the structural invariants and report quality measures.
    pub fn validate(&self) -> Result<MeshReport> {
        let profile = self.profile.build()?;
        let tol = GRAPH_TOL * self.radius;
        let n = self.nodes.len();
        if self.regions.len() != self.triangles.len() {
            return Err(Error::Meshing("region tags do not match triangles".into()));
        }
        for t in &self.triangles {
            if t.iter().any(|&i| i >= n) || t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::Meshing(format!("malformed triangle {t:?}")));
            }
        }
        let mut max_offset: f64 = 0.0;
        for e in &self.interface_edges {
            for &i in e {
                let p = self.nodes[i];
                max_offset = max_offset.max((p[1] - profile.sigma(p[0].abs())).abs());
            }
        }
        if max_offset > tol {
            return Err(Error::Meshing(format!("interface node off the graph by {max_offset:e}")));
        }
        for (ti, t) in self.triangles.iter().enumerate() {
            let region = self.regions[ti];
            let z_max = t.iter().map(|&i| self.nodes[i][1]).fold(f64::NEG_INFINITY, f64::max);
            if region == 2 && z_max <= self.cap_height {
                // The lid-closed cap only approximates the cusp strip.
                continue;
            }
            for &i in t {
                let p = self.nodes[i];
                let gap = p[1] - profile.sigma(p[0].abs());
                let bad = if region == 1 { gap > tol } else { gap < -tol };
                if bad {
                    return Err(Error::Meshing(format!("triangle {ti} (region {region}) crosses the interface")));
                }
            }
        }
        // Conformity: every edge has one or two triangles, one only on ∂Ω.
        let edges = self.edge_map();
        let on_bdry: Vec<bool> = {
            let mut v = vec![false; n];
            for &i in &self.boundary_nodes {
                v[i] = true;
            }
            v
        };
        for (e, ts) in &edges {
            match ts.len() {
                2 => {}
                1 if on_bdry[e[0]] && on_bdry[e[1]] => {}
                k => return Err(Error::Meshing(format!("edge {e:?} has {k} adjacent triangles"))),
            }
        }
        let euler = n as i64 - edges.len() as i64 + self.triangles.len() as i64;
        if euler != 1 {
            return Err(Error::Meshing(format!("Euler characteristic {euler} (hanging or unused nodes)")));
        }
        let mut area = 0.0;
        let mut region_areas = [0.0; 2];
        let mut min_angle = f64::INFINITY;
        let mut min_regular = f64::INFINITY;
        let mut cap = 0;
        for ti in 0..self.triangles.len() {
            let a = self.area(ti);
            if !(a > 0.0) {
                return Err(Error::Meshing(format!("triangle {ti} is inverted or degenerate")));
            }
            area += a;
            region_areas[self.regions[ti] as usize - 1] += a;
            let p = self.triangles[ti].map(|i| self.nodes[i]);
            let m = angles_deg(p).into_iter().fold(f64::INFINITY, f64::min);
            min_angle = min_angle.min(m);
            let z_max = p.iter().map(|q| q[1]).fold(f64::NEG_INFINITY, f64::max);
            let in_cap = self.regions[ti] == 2 && z_max <= self.cap_height;
            if in_cap {
                cap += 1;
            } else {
                min_regular = min_regular.min(m);
            }
        }
        Ok(MeshReport {
            nodes: n,
            triangles: self.triangles.len(),
            min_angle_deg: min_angle,
            min_angle_regular_deg: min_regular,
            cusp_cap_triangles: cap,
            max_interface_offset: max_offset,
            area,
            region_areas,
            innermost_ring: self.radius * self.grading.beta.powi(self.grading.levels as i32),
        })
    }

    /// Group triangles by centroid radius against a decreasing radius list.
    pub fn annulus_partition(&self, radii: &[f64]) -> Result<AnnulusPartition> {
        if radii.is_empty() {
            return Err(crate::error::domain("empty radius list"));
        }
        if radii.windows(2).any(|w| !(w[1] < w[0])) || !(radii[radii.len() - 1] > 0.0) {
            return Err(crate::error::domain("radii must be positive and strictly decreasing"));
        }
        let mut part = AnnulusPartition { outer: Vec::new(), rings: vec![Vec::new(); radii.len() - 1], inner: Vec::new() };
        for ti in 0..self.triangles.len() {
            let r = norm(self.centroid(ti));
            if r >= radii[0] {
                part.outer.push(ti);
            } else if r < radii[radii.len() - 1] {
                part.inner.push(ti);
            } else {
                let k = radii.iter().rposition(|&q| r < q).expect("r below radii[0]");
                part.rings[k].push(ti);
            }
        }
        Ok(part)
    }

    /// Red refinement: every triangle split into four; interface midpoints
    /// are moved onto the curve.
    pub fn refine_uniform(&self) -> Result<Mesh> {
        let profile = self.profile.build()?;
        let iface: std::collections::HashSet<[usize; 2]> = self.interface_edges.iter().copied().collect();
        let mut nodes = self.nodes.clone();
        let mut mid: HashMap<[usize; 2], usize> = HashMap::new();
        // `region` is 0 for cap triangles, which keep plain midpoints.
        let mut midpoint = |a: usize, b: usize, region: u8, nodes: &mut Vec<[f64; 2]>| -> usize {
            let key = [a.min(b), a.max(b)];
            *mid.entry(key).or_insert_with(|| {
                let (p, q) = (nodes[a], nodes[b]);
                let mut m = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
                if iface.contains(&key) {
                    m = project_to_interface(&profile, self.top, m);
                } else {
                    // Chords across the thin cusp cap can leave the strip;
                    // pull such midpoints back onto the curve.
                    let gap = m[1] - profile.sigma(m[0].abs());
                    if (region == 2 && gap < 0.0) || (region == 1 && gap > 0.0) {
                        m = project_to_interface(&profile, self.top, m);
                    }
                }
                nodes.push(m);
                nodes.len() - 1
            })
        };
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        let mut regions = Vec::with_capacity(4 * self.triangles.len());
        for (ti, t) in self.triangles.iter().enumerate() {
            let [a, b, c] = *t;
            let z_max = t.iter().map(|&i| nodes[i][1]).fold(f64::NEG_INFINITY, f64::max);
            let r = if self.regions[ti] == 2 && z_max <= self.cap_height { 0 } else { self.regions[ti] };
            let ab = midpoint(a, b, r, &mut nodes);
            let bc = midpoint(b, c, r, &mut nodes);
            let ca = midpoint(c, a, r, &mut nodes);
            triangles.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
            regions.extend([self.regions[ti]; 4]);
        }
        let mut interface_edges = Vec::with_capacity(2 * self.interface_edges.len());
        for e in &self.interface_edges {
            let m = mid[e];
            interface_edges.push([e[0].min(m), e[0].max(m)]);
            interface_edges.push([e[1].min(m), e[1].max(m)]);
        }
        interface_edges.sort_unstable();
        let mut out = Mesh {
            nodes,
            triangles,
            regions: Vec::new(),
            interface_edges,
            boundary_nodes: Vec::new(),
            grading: self.grading,
            profile: self.profile.clone(),
            radius: self.radius,
            top: self.top,
            tip: self.tip,
            cap_height: self.cap_height,
        };
        out.finish()?;
        // Keep the inherited tags; flood fill must agree with them.
        if out.regions != regions {
            return Err(Error::Meshing("refined region tags disagree with parent tags".into()));
        }
        Ok(out)
    }

    /// |Ω| of the box.
    pub fn box_area(&self) -> f64 {
        4.0 * self.radius * self.top
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cone_mesh_is_valid() {
        let m = build_graded_mesh(&ProfileSpec::power(1.0, 1.0), 0.2, 0.5, 8).unwrap();
        let r = m.validate().unwrap();
        assert!(r.min_angle_deg >= MIN_ANGLE_DEG, "{r:?}");
        assert!((r.area - 4.0).abs() < 1e-6 * 4.0);
        assert!((r.region_areas[1] - 1.0).abs() < 1e-9);
        for e in &m.interface_edges {
            for &i in e {
                assert!((m.nodes[i][1] - m.nodes[i][0].abs()).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn cusp_mesh_is_valid() {
        let m = build_graded_mesh(&ProfileSpec::power(0.5, 1.0), 0.2, 0.5, 8).unwrap();
        let r = m.validate().unwrap();
        assert!(r.min_angle_regular_deg >= MIN_ANGLE_DEG, "{r:?}");
        assert!((r.area - 4.0).abs() < 1e-12);
        // Ω₂ area ∫_{-1}^{1} (1 − √|x|) dx = 2/3, approached under refinement.
        let e0 = (r.region_areas[1] - 2.0 / 3.0).abs();
        let e1 = (m.refine_uniform().unwrap().validate().unwrap().region_areas[1] - 2.0 / 3.0).abs();
        assert!(e0 < 2e-3 && e1 < 0.5 * e0, "{e0} {e1}");
        assert!((r.innermost_ring - 0.5f64.powi(8)).abs() < 1e-15);
    }

    #[test]
    fn uniform_count_and_partition() {
        let m = build_graded_mesh(&ProfileSpec::power(1.0, 1.0), 0.2, 0.5, 0).unwrap();
        let expect = 4.0 / (0.2 * 0.2) * 2.0;
        let n = m.triangles.len() as f64;
        assert!(n > expect / 2.0 && n < expect * 2.0, "{n} vs {expect}");
        let p = m.annulus_partition(&[0.5]).unwrap();
        assert_eq!(p.outer.len() + p.inner.len(), m.triangles.len());
        let p = m.annulus_partition(&[0.5, 1e-9]).unwrap();
        assert!(p.inner.is_empty());
    }

    #[test]
    fn red_refinement_keeps_invariants() {
        let m = build_graded_mesh(&ProfileSpec::power(0.5, 1.0), 0.2, 0.5, 4).unwrap();
        let f = m.refine_uniform().unwrap();
        assert_eq!(f.triangles.len(), 4 * m.triangles.len());
        let r = f.validate().unwrap();
        assert!(r.max_interface_offset <= 1e-12);
    }
}
