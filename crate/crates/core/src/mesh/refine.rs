//! Delaunay refinement with a size field on top of spade's constrained
//! triangulation. Interface segments are split at points of the curve, and
//! the cusp cap is left alone.

use std::collections::HashSet;

use spade::handles::{FixedUndirectedEdgeHandle, FixedVertexHandle};
use spade::{ConstrainedDelaunayTriangulation, Point2, PositionInTriangulation, Triangulation};

use super::{angles_deg, Grading};
use crate::error::{Error, Result};
use crate::numerics::roots::brent;
use crate::profiles::Profile;

pub(crate) type Cdt = ConstrainedDelaunayTriangulation<Point2<f64>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum VKind {
    Interior,
    Boundary,
    Interface,
    Lid,
}

pub(crate) struct Refiner<'a> {
    pub cdt: Cdt,
    pub kinds: Vec<VKind>,
    pub profile: &'a Profile,
    pub grading: Grading,
    pub radius: f64,
    pub top: f64,
    pub cap_height: f64,
    pub min_angle_deg: f64,
    pub min_area: f64,
    pub max_vertices: usize,
}

fn pos(p: Point2<f64>) -> [f64; 2] {
    [p.x, p.y]
}

fn inside_diametral(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    // Angle apb obtuse ⇔ p strictly inside the circle on diameter ab.
    let u = [a[0] - p[0], a[1] - p[1]];
    let v = [b[0] - p[0], b[1] - p[1]];
    let dot = u[0] * v[0] + u[1] * v[1];
    dot < -1e-12 * (u[0].hypot(u[1]) * v[0].hypot(v[1]))
}

impl Refiner<'_> {
    fn kind(&self, v: FixedVertexHandle) -> VKind {
        self.kinds[v.index()]
    }

    fn p(&self, v: FixedVertexHandle) -> [f64; 2] {
        pos(self.cdt.vertex(v).position())
    }

    /// Region-2 face inside the cusp cap.
    fn is_cap(&self, vs: [FixedVertexHandle; 3]) -> bool {
        if self.cap_height <= 0.0 {
            return false;
        }
        let mut neg = false;
        let mut posx = false;
        let mut lid = false;
        for v in vs {
            let p = self.p(v);
            match self.kind(v) {
                VKind::Interface if p[1] <= self.cap_height => {}
                VKind::Lid => lid = true,
                _ => return false,
            }
            if p[0] < 0.0 {
                neg = true;
            } else if p[0] > 0.0 {
                posx = true;
            } else {
                neg = true;
                posx = true;
            }
        }
        lid || (neg && posx)
    }

    fn seg_kind(&self, a: FixedVertexHandle, b: FixedVertexHandle) -> VKind {
        let (ka, kb) = (self.kind(a), self.kind(b));
        if ka == VKind::Lid || kb == VKind::Lid {
            return VKind::Lid;
        }
        let (pa, pb) = (self.p(a), self.p(b));
        if pa[1] == self.cap_height && pb[1] == self.cap_height && self.cap_height > 0.0 {
            return VKind::Lid;
        }
        if ka == VKind::Interface && kb == VKind::Interface {
            // Corners are interface nodes too; a box side joins two points
            // on a common side line.
            let same_side = (pa[0] == pb[0] && pa[0].abs() == self.radius)
                || (pa[1] == pb[1] && pa[1].abs() == self.top);
            if !same_side {
                return VKind::Interface;
            }
        }
        VKind::Boundary
    }

    fn split_point(&self, a: [f64; 2], b: [f64; 2], kind: VKind) -> [f64; 2] {
        let m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        match kind {
            VKind::Interface => {
                let s = if a[0] + b[0] >= 0.0 { 1.0 } else { -1.0 };
                let steep = self.profile.eval_unchecked(m[0].abs().max(f64::MIN_POSITIVE)).dsigma.abs() > 1.0;
                if steep || m[0] == 0.0 {
                    let z = m[1];
                    [s * super::interface_abscissa(self.profile, z), z]
                } else {
                    [m[0], self.profile.sigma(m[0].abs())]
                }
            }
            VKind::Lid => [m[0], a[1]],
            _ => m,
        }
    }

    fn insert(&mut self, p: [f64; 2], kind: VKind) -> Result<FixedVertexHandle> {
        let h = self
            .cdt
            .insert(Point2::new(p[0], p[1]))
            .map_err(|e| Error::Meshing(format!("vertex insertion failed: {e:?}")))?;
        if h.index() == self.kinds.len() {
            self.kinds.push(kind);
        }
        Ok(h)
    }

    fn split_segment(&mut self, e: FixedUndirectedEdgeHandle) -> Result<bool> {
        let [a, b] = self.cdt.undirected_edge(e).vertices().map(|v| v.fix());
        if !self.cdt.is_constraint_edge(e) {
            return Ok(false);
        }
        let kind = self.seg_kind(a, b);
        let (pa, pb) = (self.p(a), self.p(b));
        let len = (pa[0] - pb[0]).hypot(pa[1] - pb[1]);
        if len < 1e-3 * self.grading.min_size() {
            return Ok(false);
        }
        let m = match self.sharp_corner_end(pa, pb) {
            Some((c, far)) => self.shell_point(c, far, len, kind),
            None => self.split_point(pa, pb, kind),
        };
        if m == pa || m == pb {
            return Ok(false);
        }
        self.cdt.remove_constraint_edge(e);
        let vk = match kind {
            VKind::Interface => VKind::Interface,
            VKind::Lid => VKind::Lid,
            _ => VKind::Boundary,
        };
        let v = self.insert(m, vk)?;
        let ok1 = !self.cdt.try_add_constraint(a, v).is_empty();
        let ok2 = !self.cdt.try_add_constraint(v, b).is_empty();
        if !(ok1 && ok2) {
            return Err(Error::Meshing("could not restore a split constraint".into()));
        }
        Ok(true)
    }

    /// The endpoints ordered (corner, other) if the segment touches one of the
    /// corners where the interface meets the top of the box at an acute angle.
    fn sharp_corner_end(&self, a: [f64; 2], b: [f64; 2]) -> Option<([f64; 2], [f64; 2])> {
        let is_corner = |p: [f64; 2]| p[1] == self.top && p[0].abs() == self.radius;
        if is_corner(a) {
            Some((a, b))
        } else if is_corner(b) {
            Some((b, a))
        } else {
            None
        }
    }

    /// Concentric-shell split: the point at distance 2^k from the corner
    /// closest to half the segment length. Both segments at the corner then
    /// share split radii and stop encroaching on each other.
    fn shell_point(&self, corner: [f64; 2], far: [f64; 2], len: f64, kind: VKind) -> [f64; 2] {
        let d = 2f64.powi((0.5 * len).log2().round() as i32);
        let d = if d >= 0.75 * len || d <= 0.25 * len { 0.5 * len } else { d };
        if kind != VKind::Interface {
            let t = d / len;
            return [corner[0] + t * (far[0] - corner[0]), corner[1] + t * (far[1] - corner[1])];
        }
        // The curve is flat near the corner (σ' bounded there), so step in x.
        let s = corner[0].signum();
        let at = |x: f64| [s * x, self.profile.sigma(x)];
        let dist = |x: f64| {
            let p = at(x);
            (p[0] - corner[0]).hypot(p[1] - corner[1]) - d
        };
        let (x0, x1) = (far[0].abs(), corner[0].abs());
        match brent(dist, x0.min(x1), x0.max(x1), 1e-14) {
            Ok(x) => at(x),
            Err(_) => self.split_point(corner, far, kind),
        }
    }

    /// Constraint edges encroached by an opposite vertex of a non-cap face.
    fn encroached(&self) -> Vec<FixedUndirectedEdgeHandle> {
        let mut out = Vec::new();
        for e in self.cdt.undirected_edges() {
            if !e.is_constraint_edge() {
                continue;
            }
            let [a, b] = e.positions().map(pos);
            let d = e.as_directed();
            for side in [d, d.rev()] {
                let Some(face) = side.face().as_inner() else { continue };
                let vs = face.vertices().map(|v| v.fix());
                if self.is_cap(vs) {
                    continue;
                }
                if let Some(opp) = side.opposite_position() {
                    if inside_diametral(a, b, pos(opp)) {
                        out.push(e.fix());
                        break;
                    }
                }
            }
        }
        out
    }

    fn bad_faces(&self) -> Vec<[FixedVertexHandle; 3]> {
        let min_area = self.min_area;
        let mut out = Vec::new();
        for f in self.cdt.inner_faces() {
            let vs = f.vertices().map(|v| v.fix());
            if self.is_cap(vs) || f.area() < min_area {
                continue;
            }
            let p = vs.map(|v| self.p(v));
            let ang = angles_deg(p);
            let (k, amin) = ang.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, a)| if *a < acc.1 { (i, *a) } else { acc });
            let (_, r2) = f.circumcircle();
            let c = [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0];
            let h = self.grading.size_at(c[0].hypot(c[1]), self.radius);
            let too_big = r2.sqrt() > 1.1 * h / 3f64.sqrt();
            let skinny = amin < self.min_angle_deg;
            if !(too_big || skinny) {
                continue;
            }
            if skinny && !too_big {
                // An acute angle between two constraints cannot be improved.
                let apex = vs[k];
                let o1 = vs[(k + 1) % 3];
                let o2 = vs[(k + 2) % 3];
                if self.is_constraint(apex, o1) && self.is_constraint(apex, o2) {
                    continue;
                }
            }
            out.push(vs);
        }
        out
    }

    fn is_constraint(&self, a: FixedVertexHandle, b: FixedVertexHandle) -> bool {
        self.cdt.get_edge_from_neighbors(a, b).is_some_and(|e| e.is_constraint_edge())
    }

    fn face_of(&self, vs: [FixedVertexHandle; 3]) -> Option<spade::handles::FixedFaceHandle<spade::handles::InnerTag>> {
        let e = self.cdt.get_edge_from_neighbors(vs[0], vs[1])?;
        for side in [e, e.rev()] {
            if let Some(f) = side.face().as_inner() {
                let fv = f.vertices().map(|v| v.fix());
                if fv.contains(&vs[2]) {
                    return Some(f.fix());
                }
            }
        }
        None
    }

    /// Constraint edges on the Delaunay cavity of `c` that `c` encroaches.
    fn cavity_encroachment(
        &self,
        start: spade::handles::FixedFaceHandle<spade::handles::InnerTag>,
        c: [f64; 2],
    ) -> Vec<FixedUndirectedEdgeHandle> {
        let mut seen = HashSet::new();
        let mut stack = vec![start];
        let mut hits = Vec::new();
        seen.insert(start);
        while let Some(f) = stack.pop() {
            let face = self.cdt.face(f);
            for e in face.adjacent_edges() {
                if e.is_constraint_edge() {
                    let [a, b] = e.positions().map(pos);
                    if inside_diametral(a, b, c) {
                        hits.push(e.as_undirected().fix());
                    }
                    continue;
                }
                if let Some(nb) = e.rev().face().as_inner() {
                    if seen.contains(&nb.fix()) {
                        continue;
                    }
                    let (cc, r2) = nb.circumcircle();
                    let d2 = (cc.x - c[0]).powi(2) + (cc.y - c[1]).powi(2);
                    if d2 < r2 {
                        seen.insert(nb.fix());
                        stack.push(nb.fix());
                    }
                }
            }
        }
        hits
    }

    fn in_box(&self, c: [f64; 2]) -> bool {
        c[0].abs() < self.radius && c[1].abs() < self.top
    }

    pub fn run(&mut self) -> Result<()> {
        for _pass in 0..10_000 {
            // Segments first: keeps the triangulation conforming Delaunay.
            loop {
                let enc = self.encroached();
                if enc.is_empty() {
                    break;
                }
                let mut any = false;
                for e in enc {
                    any |= self.split_segment(e)?;
                }
                if !any {
                    break;
                }
                self.check_budget()?;
            }
            let bad = self.bad_faces();
            if bad.is_empty() {
                return Ok(());
            }
            let mut progress = false;
            for vs in bad {
                let Some(f) = self.face_of(vs) else { continue };
                let face = self.cdt.face(f);
                let cc = pos(face.circumcenter());
                let longest_constraint = || -> Option<FixedUndirectedEdgeHandle> {
                    face.adjacent_edges().into_iter()
                        .filter(|e| e.is_constraint_edge())
                        .max_by(|a, b| a.length_2().total_cmp(&b.length_2()))
                        .map(|e| e.as_undirected().fix())
                };
                if !self.in_box(cc) {
                    if let Some(e) = longest_constraint() {
                        progress |= self.split_segment(e)?;
                    }
                    continue;
                }
                let located = self.cdt.locate(Point2::new(cc[0], cc[1]));
                let target = match located {
                    PositionInTriangulation::OnFace(t) => t,
                    PositionInTriangulation::OnEdge(e) => {
                        let ue = self.cdt.directed_edge(e).as_undirected().fix();
                        if self.cdt.is_constraint_edge(ue) {
                            progress |= self.split_segment(ue)?;
                            continue;
                        }
                        match self.cdt.directed_edge(e).face().as_inner() {
                            Some(t) => t.fix(),
                            None => continue,
                        }
                    }
                    _ => continue,
                };
                if self.is_cap(self.cdt.face(target).vertices().map(|v| v.fix())) {
                    if let Some(e) = longest_constraint() {
                        progress |= self.split_segment(e)?;
                    }
                    continue;
                }
                let hits = self.cavity_encroachment(target, cc);
                if hits.is_empty() {
                    self.insert(cc, VKind::Interior)?;
                    progress = true;
                } else {
                    for e in hits {
                        progress |= self.split_segment(e)?;
                    }
                }
                self.check_budget()?;
            }
            if !progress {
                return Ok(());
            }
        }
        Err(Error::Meshing("refinement did not settle".into()))
    }

    fn check_budget(&self) -> Result<()> {
        if self.cdt.num_vertices() > self.max_vertices {
            return Err(Error::Meshing(format!("refinement exceeded {} vertices", self.max_vertices)));
        }
        Ok(())
    }

    /// Constraint edges grouped as interface edges (index pairs).
    pub fn interface_edges(&self) -> Vec<[usize; 2]> {
        let mut out: Vec<[usize; 2]> = self
            .cdt
            .undirected_edges()
            .filter(|e| e.is_constraint_edge())
            .filter_map(|e| {
                let [a, b] = e.vertices().map(|v| v.fix());
                (self.seg_kind(a, b) == VKind::Interface).then(|| [a.index().min(b.index()), a.index().max(b.index())])
            })
            .collect();
        out.sort_unstable();
        out
    }
}
