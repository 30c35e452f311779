//! Boundary mesh of a plate solid.
//!
//! Every cut is prismatic, so the solid is a stack of 2.5-D slabs. The
//! plan view is split into a planar arrangement of all cut outlines; each
//! arrangement face carries one material interval `[b, t]`. Faces give the
//! top and bottom caps and every arrangement edge with different intervals
//! on its two sides gives a vertical wall. Walls are split at every height
//! used around their end vertices so the result has no T-junctions.

use std::collections::{BTreeSet, HashMap, HashSet};

use thiserror::Error;

use super::solid::{Cut, CutSpan, Solid};
use crate::geometry::{point_in_polygon, signed_area2, Point2, Rect, Vec2};
use crate::mesh::Mesh;

const SNAP: f64 = 1e-7;
const ON_SEGMENT: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshingError {
    #[error("plate solid has a non-positive thickness")]
    Thickness,
    #[error("arrangement face could not be triangulated")]
    Triangulation,
}

struct Arrangement {
    verts: Vec<Point2>,
    edges: Vec<(usize, usize)>,
}

/// Vertex pool snapping points within `SNAP` of each other.
struct Snapper {
    verts: Vec<Point2>,
    grid: HashMap<(i64, i64), Vec<usize>>,
}

impl Snapper {
    fn new() -> Self {
        Snapper {
            verts: Vec::new(),
            grid: HashMap::new(),
        }
    }

    fn key(p: Point2) -> (i64, i64) {
        ((p.x / SNAP).floor() as i64, (p.y / SNAP).floor() as i64)
    }

    fn id(&mut self, p: Point2) -> usize {
        let (kx, ky) = Self::key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = self.grid.get(&(kx + dx, ky + dy)) {
                    for &i in ids {
                        if self.verts[i].distance(p) <= SNAP {
                            return i;
                        }
                    }
                }
            }
        }
        let i = self.verts.len();
        self.verts.push(p);
        self.grid.entry((kx, ky)).or_default().push(i);
        i
    }
}

/// Splits all segments at mutual intersections and touching endpoints.
fn build_arrangement(segments: &[(Point2, Point2)]) -> Arrangement {
    let n = segments.len();
    let mut bounds = Rect::bounding(&[]);
    let mut total_len = 0.0;
    for (a, b) in segments {
        bounds = bounds.union(&Rect::bounding(&[*a, *b]));
        total_len += a.distance(*b);
    }
    let cell = (total_len / n.max(1) as f64 * 2.0).max(1e-3);
    let cell_of = |v: f64, lo: f64| ((v - lo) / cell).floor() as i64;
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, (a, b)) in segments.iter().enumerate() {
        let r = Rect::bounding(&[*a, *b]);
        for cx in cell_of(r.min.x - ON_SEGMENT, bounds.min.x)..=cell_of(r.max.x + ON_SEGMENT, bounds.min.x) {
            for cy in cell_of(r.min.y - ON_SEGMENT, bounds.min.y)..=cell_of(r.max.y + ON_SEGMENT, bounds.min.y) {
                grid.entry((cx, cy)).or_default().push(i);
            }
        }
    }
    // split parameters per segment
    let mut splits: Vec<Vec<(f64, Point2)>> = segments.iter().map(|(a, b)| vec![(0.0, *a), (1.0, *b)]).collect();
    let mut tested = HashSet::new();
    for ids in grid.values() {
        for (k, &i) in ids.iter().enumerate() {
            for &j in &ids[k + 1..] {
                let key = (i.min(j), i.max(j));
                if i == j || !tested.insert(key) {
                    continue;
                }
                intersect_pair(segments, key.0, key.1, &mut splits);
            }
        }
    }
    let mut snap = Snapper::new();
    let mut edges = HashSet::new();
    for s in &mut splits {
        s.sort_by(|x, y| {
            x.0.total_cmp(&y.0)
                .then(x.1.x.total_cmp(&y.1.x))
                .then(x.1.y.total_cmp(&y.1.y))
        });
        let ids: Vec<usize> = s.iter().map(|(_, p)| snap.id(*p)).collect();
        for w in ids.windows(2) {
            if w[0] != w[1] {
                edges.insert((w[0].min(w[1]), w[0].max(w[1])));
            }
        }
    }
    let mut edges: Vec<(usize, usize)> = edges.into_iter().collect();
    edges.sort_unstable();
    Arrangement { verts: snap.verts, edges }
}

fn on_segment(p: Point2, a: Point2, b: Point2) -> Option<f64> {
    let d = b - a;
    let l2 = d.dot(d);
    if l2 == 0.0 {
        return None;
    }
    let t = (p - a).dot(d) / l2;
    if t <= 0.0 || t >= 1.0 {
        return None;
    }
    let q = a + d * t;
    (q.distance(p) <= ON_SEGMENT).then_some(t)
}

fn intersect_pair(segs: &[(Point2, Point2)], i: usize, j: usize, splits: &mut [Vec<(f64, Point2)>]) {
    let (p, p2) = segs[i];
    let (q, q2) = segs[j];
    let (r, s) = (p2 - p, q2 - q);
    // endpoints lying on the other segment
    for (pt, on, other) in [(q, i, (p, p2)), (q2, i, (p, p2)), (p, j, (q, q2)), (p2, j, (q, q2))] {
        if let Some(t) = on_segment(pt, other.0, other.1) {
            splits[on].push((t, pt));
        }
    }
    let den = r.cross(s);
    if den.abs() <= 1e-12 * r.norm() * s.norm() {
        return;
    }
    let t = (q - p).cross(s) / den;
    let u = (q - p).cross(r) / den;
    let eps_t = ON_SEGMENT / r.norm();
    let eps_u = ON_SEGMENT / s.norm();
    if t > eps_t && t < 1.0 - eps_t && u > eps_u && u < 1.0 - eps_u {
        let x = p + r * t;
        splits[i].push((t, x));
        splits[j].push((u, x));
    }
}

/// Face cycles of the arrangement: half-edge loops with the face on the
/// left.
struct Faces {
    /// Vertex loops, one per cycle.
    cycles: Vec<Vec<usize>>,
    /// Cycle to the left of each directed edge `(u, v)`.
    left: HashMap<(usize, usize), usize>,
}

fn trace_faces(arr: &Arrangement) -> Faces {
    let nv = arr.verts.len();
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for &(a, b) in &arr.edges {
        out[a].push(b);
        out[b].push(a);
    }
    for (v, list) in out.iter_mut().enumerate() {
        let o = arr.verts[v];
        list.sort_by(|&x, &y| {
            let dx = arr.verts[x] - o;
            let dy = arr.verts[y] - o;
            dx.y.atan2(dx.x).total_cmp(&dy.y.atan2(dy.x))
        });
    }
    let pos: Vec<HashMap<usize, usize>> = out
        .iter()
        .map(|l| l.iter().enumerate().map(|(k, &w)| (w, k)).collect())
        .collect();
    let mut left = HashMap::new();
    let mut cycles = Vec::new();
    for &(a, b) in &arr.edges {
        for start in [(a, b), (b, a)] {
            if left.contains_key(&start) {
                continue;
            }
            let c = cycles.len();
            let mut cyc = Vec::new();
            let mut e = start;
            loop {
                left.insert(e, c);
                cyc.push(e.0);
                let (u, v) = e;
                // next edge: clockwise neighbour of the twin around v
                let k = pos[v][&u];
                let deg = out[v].len();
                let w = out[v][(k + deg - 1) % deg];
                e = (v, w);
                if e == start {
                    break;
                }
            }
            cycles.push(cyc);
        }
    }
    Faces { cycles, left }
}

fn coords(arr: &Arrangement, cyc: &[usize]) -> Vec<Point2> {
    cyc.iter().map(|&i| arr.verts[i]).collect()
}

/// Removes spikes (`a, b, a`) left by dangling edges.
fn remove_spikes(mut poly: Vec<usize>) -> Vec<usize> {
    loop {
        let n = poly.len();
        if n < 3 {
            return poly;
        }
        let hit = (0..n).find(|&i| poly[(i + n - 1) % n] == poly[(i + 1) % n]);
        match hit {
            Some(i) => {
                let j = (i + 1) % n;
                let (hi, lo) = (i.max(j), i.min(j));
                poly.remove(hi);
                poly.remove(lo);
            }
            None => return poly,
        }
    }
}

fn in_triangle_closed(p: Point2, a: Point2, b: Point2, c: Point2) -> bool {
    let d1 = (b - a).cross(p - a);
    let d2 = (c - b).cross(p - b);
    let d3 = (a - c).cross(p - c);
    d1 >= -1e-15 && d2 >= -1e-15 && d3 >= -1e-15
}

/// Ear clipping of a simple counter-clockwise polygon given by vertex ids.
/// Vertices touching the candidate ear (including on its boundary)
/// invalidate it; repeated ids of pinch vertices are skipped.
pub fn triangulate(verts: &[Point2], poly: &[usize]) -> Option<Vec<[usize; 3]>> {
    let mut idx = remove_spikes(poly.to_vec());
    let mut tris = Vec::new();
    let mut guard = 0usize;
    let mut i = 0usize;
    while idx.len() > 3 {
        let n = idx.len();
        let mut found = None;
        for step in 0..n {
            let k = (i + step) % n;
            let (a, b, c) = (idx[(k + n - 1) % n], idx[k], idx[(k + 1) % n]);
            let (pa, pb, pc) = (verts[a], verts[b], verts[c]);
            if (pb - pa).cross(pc - pb) <= 1e-14 {
                continue;
            }
            let blocked = idx.iter().any(|&m| {
                m != a && m != b && m != c && {
                    let pm = verts[m];
                    in_triangle_closed(pm, pa, pb, pc)
                }
            });
            if !blocked {
                found = Some(k);
                break;
            }
        }
        let k = match found {
            Some(k) => k,
            None => {
                // Only degenerate ears are left; clip the flattest convex-or-straight vertex.
                guard += 1;
                if guard > n {
                    return None;
                }
                (0..n)
                    .filter(|&k| {
                        let (a, b, c) = (verts[idx[(k + n - 1) % n]], verts[idx[k]], verts[idx[(k + 1) % n]]);
                        (b - a).cross(c - b) >= -1e-12
                    })
                    .max_by(|&x, &y| {
                        let f = |k: usize| {
                            let (a, b, c) = (verts[idx[(k + n - 1) % n]], verts[idx[k]], verts[idx[(k + 1) % n]]);
                            (b - a).cross(c - b)
                        };
                        f(x).total_cmp(&f(y))
                    })?
            }
        };
        tris.push([idx[(k + n - 1) % n], idx[k], idx[(k + 1) % n]]);
        idx.remove(k);
        idx = remove_spikes(idx);
        i = if k == 0 { 0 } else { k - 1 };
    }
    if idx.len() == 3 {
        tris.push([idx[0], idx[1], idx[2]]);
    }
    Some(tris)
}

/// Material interval `[b, t]` at a plan point, `None` where cut through.
fn material_at(p: Point2, cuts: &[Cut], boxes: &[Rect], dz: f64) -> Option<(f64, f64)> {
    let (mut b, mut t) = (0.0_f64, dz);
    for (c, bb) in cuts.iter().zip(boxes) {
        if !bb.contains(p, 0.0) || !point_in_polygon(p, &c.polygon) {
            continue;
        }
        match c.span {
            CutSpan::Through => return None,
            CutSpan::Top(d) => t = t.min(dz - d),
            CutSpan::Bottom(d) => b = b.max(d),
        }
    }
    (t - b > 1e-9).then_some((b, t))
}

/// Horizontal construction lines through every cut, clipped to the outline.
/// They tie every outline into one connected arrangement so no face has
/// holes.
fn construction_lines(outline: &Rect, cuts: &[Cut]) -> Vec<(Point2, Point2)> {
    let mut ys = BTreeSet::new();
    for c in cuts {
        let y = c.polygon.iter().map(|p| p.y).sum::<f64>() / c.polygon.len() as f64;
        if y > outline.min.y && y < outline.max.y {
            ys.insert(y.to_bits());
        }
    }
    ys.into_iter()
        .map(|y| {
            let y = f64::from_bits(y);
            (Vec2::new(outline.min.x, y), Vec2::new(outline.max.x, y))
        })
        .collect()
}

/// Builds a closed, consistently oriented triangle mesh of `solid`.
pub fn mesh_solid(solid: &Solid) -> Result<Mesh, MeshingError> {
    if !(solid.dz > 0.0) {
        return Err(MeshingError::Thickness);
    }
    let dz = solid.dz;
    let outline = solid.outline;
    let cuts = solid.cuts();
    let boxes: Vec<Rect> = cuts.iter().map(|c| Rect::bounding(&c.polygon)).collect();

    let mut segs = Vec::new();
    let oc = outline.corners();
    for k in 0..4 {
        segs.push((oc[k], oc[(k + 1) % 4]));
    }
    for c in &cuts {
        let n = c.polygon.len();
        for k in 0..n {
            segs.push((c.polygon[k], c.polygon[(k + 1) % n]));
        }
    }
    segs.extend(construction_lines(&outline, &cuts));
    let arr = build_arrangement(&segs);
    let faces = trace_faces(&arr);

    // material and triangulation per positive cycle inside the outline
    let nc = faces.cycles.len();
    let mut material: Vec<Option<(f64, f64)>> = vec![None; nc];
    let mut tris: Vec<Vec<[usize; 3]>> = vec![Vec::new(); nc];
    for (c, cyc) in faces.cycles.iter().enumerate() {
        let pts = coords(&arr, cyc);
        if signed_area2(&pts) <= 0.0 {
            continue;
        }
        let t = triangulate(&arr.verts, cyc).ok_or(MeshingError::Triangulation)?;
        let best = t.iter().max_by(|x, y| tri_area(&arr.verts, x).total_cmp(&tri_area(&arr.verts, y)));
        let Some(best) = best else { continue };
        let sample = (arr.verts[best[0]] + arr.verts[best[1]] + arr.verts[best[2]]) * (1.0 / 3.0);
        if !outline.contains(sample, 0.0) {
            continue;
        }
        material[c] = material_at(sample, &cuts, &boxes, dz);
        tris[c] = t;
    }

    // heights used around each vertex
    let mut zset: Vec<BTreeSet<u64>> = vec![BTreeSet::new(); arr.verts.len()];
    for (c, cyc) in faces.cycles.iter().enumerate() {
        if let Some((b, t)) = material[c] {
            for &v in cyc {
                zset[v].insert(b.to_bits());
                zset[v].insert(t.to_bits());
            }
        }
    }

    let mut mesh = Mesh::default();
    let mut ids: HashMap<(usize, u64), u32> = HashMap::new();
    let mut vid = |mesh: &mut Mesh, v: usize, z: f64| -> u32 {
        *ids.entry((v, z.to_bits())).or_insert_with(|| {
            let p = arr.verts[v];
            mesh.add_vertex([p.x, p.y, z])
        })
    };

    for c in 0..nc {
        let Some((b, t)) = material[c] else { continue };
        for tri in &tris[c] {
            let top = [vid(&mut mesh, tri[0], t), vid(&mut mesh, tri[1], t), vid(&mut mesh, tri[2], t)];
            mesh.triangles.push(top);
            let bot = [vid(&mut mesh, tri[0], b), vid(&mut mesh, tri[2], b), vid(&mut mesh, tri[1], b)];
            mesh.triangles.push(bot);
        }
    }

    let directed = arr.edges.iter().flat_map(|&(a, b)| [(a, b), (b, a)]);
    for (u, v) in directed {
        let lc = faces.left[&(u, v)];
        let rc = faces.left[&(v, u)];
        let il = material[lc];
        let ir = material[rc];
        for (z0, z1) in interval_difference(il, ir) {
            let zu: Vec<f64> = column(&zset[u], z0, z1);
            let zv: Vec<f64> = column(&zset[v], z0, z1);
            let (mut i, mut j) = (0, 0);
            while i + 1 < zu.len() || j + 1 < zv.len() {
                let advance_u = j + 1 >= zv.len() || (i + 1 < zu.len() && zu[i + 1] <= zv[j + 1]);
                if advance_u {
                    let tri = [vid(&mut mesh, u, zu[i]), vid(&mut mesh, v, zv[j]), vid(&mut mesh, u, zu[i + 1])];
                    mesh.triangles.push(tri);
                    i += 1;
                } else {
                    let tri = [vid(&mut mesh, u, zu[i]), vid(&mut mesh, v, zv[j]), vid(&mut mesh, v, zv[j + 1])];
                    mesh.triangles.push(tri);
                    j += 1;
                }
            }
        }
    }
    Ok(mesh)
}

fn tri_area(verts: &[Point2], t: &[usize; 3]) -> f64 {
    (verts[t[1]] - verts[t[0]]).cross(verts[t[2]] - verts[t[0]]) / 2.0
}

/// Heights of a vertex column between `z0` and `z1`, inclusive.
fn column(z: &BTreeSet<u64>, z0: f64, z1: f64) -> Vec<f64> {
    let mut v: Vec<f64> = z.iter().map(|b| f64::from_bits(*b)).filter(|h| *h > z0 && *h < z1).collect();
    v.sort_by(f64::total_cmp);
    v.insert(0, z0);
    v.push(z1);
    v
}

/// `l \ r` as a list of intervals.
fn interval_difference(l: Option<(f64, f64)>, r: Option<(f64, f64)>) -> Vec<(f64, f64)> {
    let Some((lb, lt)) = l else { return vec![] };
    let Some((rb, rt)) = r else { return vec![(lb, lt)] };
    let mut out = Vec::new();
    if rb > lb {
        out.push((lb, rb.min(lt)));
    }
    if rt < lt {
        out.push((rt.max(lb), lt));
    }
    out.retain(|(a, b)| b - a > 0.0);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_triangulates_into_two() {
        let v = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        let t = triangulate(&v, &[0, 1, 2, 3]).unwrap();
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn collinear_vertices_are_kept() {
        let v = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(2.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        let t = triangulate(&v, &[0, 1, 2, 3, 4]).unwrap();
        assert_eq!(t.len(), 3);
        let area: f64 = t.iter().map(|t| tri_area(&v, t)).sum();
        assert!((area - 2.0).abs() < 1e-12);
        assert!(t.iter().all(|t| tri_area(&v, t) > 0.0));
    }

    #[test]
    fn interval_differences() {
        assert_eq!(interval_difference(Some((0.0, 10.0)), Some((3.0, 6.0))), vec![(0.0, 3.0), (6.0, 10.0)]);
        assert_eq!(interval_difference(Some((0.0, 10.0)), None), vec![(0.0, 10.0)]);
        assert!(interval_difference(Some((0.0, 5.0)), Some((0.0, 10.0))).is_empty());
    }

    #[test]
    fn plain_block_is_a_box() {
        let s = Solid::new(Rect::from_size(10.0, 5.0), 2.0);
        let m = mesh_solid(&s).unwrap();
        assert!(m.edge_report().is_watertight());
        assert_eq!(m.euler_characteristic(), 2);
        assert!((m.volume() - 100.0).abs() < 1e-9);
    }
}
