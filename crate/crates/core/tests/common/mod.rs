//! Independent oracles and fixtures shared by the integration tests.
//! The oracles never call the library's own geometry, collision or optics
//! routines; they work from first principles. Fixtures drive the library.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::PathBuf;

use beamplan::baseplate::{Cut, CutSpan, Plate};
use beamplan::components::{Catalog, Shape};
use beamplan::diagnostics::{Diagnostic, Severity};
use beamplan::geometry::{Heading, Point2, Pose};
use beamplan::layout::{compile, load_document, Scene};

pub const INCH: f64 = 25.4;
/// Overlap depth at or below which shapes only touch.
pub const TOUCH_TOL: f64 = 1e-6;

pub fn layouts_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("layouts")
}

pub fn compile_layout(file: &str) -> Scene {
    let (doc, cat) = load_document(&layouts_dir().join(file), &Catalog::bundled()).expect("layout loads");
    compile(&doc, &cat)
}

pub fn compile_text(text: &str) -> Scene {
    let doc = beamplan::layout::parse_document(text).expect("document parses");
    compile(&doc, &Catalog::bundled())
}

// ---------------------------------------------------------------------
// Planar geometry from scratch.

type P = (f64, f64);

fn pt(p: Point2) -> P {
    (p.x, p.y)
}

fn sub(a: P, b: P) -> P {
    (a.0 - b.0, a.1 - b.1)
}

fn cross(o: P, a: P, b: P) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn dist(a: P, b: P) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Convex hull by Andrew's monotone chain, counter-clockwise, with
/// collinear points dropped.
pub fn convex_hull(points: &[P]) -> Vec<P> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<P> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<P> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Distance from `p` to the segment `a`-`b`.
pub fn seg_dist(p: P, a: P, b: P) -> f64 {
    let (dx, dy) = sub(b, a);
    let l2 = dx * dx + dy * dy;
    if l2 == 0.0 {
        return dist(p, a);
    }
    let t = (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / l2).clamp(0.0, 1.0);
    dist(p, (a.0 + t * dx, a.1 + t * dy))
}

/// Signed distance from `p` to the boundary of a convex point set:
/// positive outside, negative inside.
pub fn signed_distance(p: P, poly: &[P]) -> f64 {
    let hull = convex_hull(poly);
    let n = hull.len();
    let edge_min = (0..n)
        .map(|i| seg_dist(p, hull[i], hull[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min);
    let inside = n >= 3 && (0..n).all(|i| cross(hull[i], hull[(i + 1) % n], p) > 0.0);
    if inside {
        -edge_min
    } else {
        edge_min
    }
}

/// Penetration depth of two convex point sets: the distance from the
/// origin to the boundary of their Minkowski difference when the origin
/// lies inside it, otherwise zero.
pub fn penetration_depth(a: &[P], b: &[P]) -> f64 {
    let diff: Vec<P> = a.iter().flat_map(|&p| b.iter().map(move |&q| sub(p, q))).collect();
    let hull = convex_hull(&diff);
    let n = hull.len();
    if n < 3 {
        return 0.0;
    }
    let mut depth = f64::INFINITY;
    for i in 0..n {
        let (p, q) = (hull[i], hull[(i + 1) % n]);
        // Distance from the origin to the edge's supporting line, positive
        // when the origin is on the inner side.
        let c = cross(p, q, (0.0, 0.0)) / dist(p, q);
        depth = depth.min(c);
    }
    depth.max(0.0)
}

fn poly_points(s: &[Point2]) -> Vec<P> {
    s.iter().map(|p| pt(*p)).collect()
}

/// Overlap depth of two outlines.
pub fn shape_depth(a: &Shape, b: &Shape) -> f64 {
    match (a, b) {
        (Shape::Polygon(p), Shape::Polygon(q)) => penetration_depth(&poly_points(p), &poly_points(q)),
        (Shape::Polygon(p), Shape::Disc { center, radius }) | (Shape::Disc { center, radius }, Shape::Polygon(p)) => {
            radius - signed_distance(pt(*center), &poly_points(p))
        }
        (Shape::Disc { center: c1, radius: r1 }, Shape::Disc { center: c2, radius: r2 }) => {
            r1 + r2 - dist(pt(*c1), pt(*c2))
        }
    }
}

/// Overlap depth of a segment with an outline.
pub fn segment_depth(a: Point2, b: Point2, s: &Shape) -> f64 {
    match s {
        Shape::Polygon(p) => penetration_depth(&[pt(a), pt(b)], &poly_points(p)),
        Shape::Disc { center, radius } => radius - seg_dist(pt(*center), pt(a), pt(b)),
    }
}

fn inside_box(s: &Shape, lo: P, hi: P, tol: f64) -> bool {
    let ok = |p: P| p.0 >= lo.0 - tol && p.0 <= hi.0 + tol && p.1 >= lo.1 - tol && p.1 <= hi.1 + tol;
    match s {
        Shape::Polygon(p) => p.iter().all(|q| ok(pt(*q))),
        Shape::Disc { center, radius } => {
            let c = pt(*center);
            ok((c.0 - radius, c.1 - radius)) && ok((c.0 + radius, c.1 + radius))
        }
    }
}

/// Area of a simple polygon (shoelace).
pub fn area(poly: &[P]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| poly[i].0 * poly[(i + 1) % n].1 - poly[(i + 1) % n].0 * poly[i].1)
        .sum::<f64>()
        / 2.0
}

/// Sutherland-Hodgman clip of `subject` by the convex counter-clockwise
/// polygon `clip`.
pub fn clip_convex(subject: &[P], clip: &[P]) -> Vec<P> {
    let mut out = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        let (a, b) = (clip[i], clip[(i + 1) % n]);
        let input = std::mem::take(&mut out);
        if input.is_empty() {
            break;
        }
        let m = input.len();
        for j in 0..m {
            let (p, q) = (input[j], input[(j + 1) % m]);
            let (sp, sq) = (cross(a, b, p), cross(a, b, q));
            if sp >= 0.0 {
                out.push(p);
            }
            if (sp >= 0.0) != (sq >= 0.0) {
                let t = sp / (sp - sq);
                out.push((p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1)));
            }
        }
    }
    out
}

/// Area shared by two convex polygons.
pub fn overlap_area(a: &[Point2], b: &[Point2]) -> f64 {
    let (mut a, mut b) = (poly_points(a), poly_points(b));
    if area(&a) < 0.0 {
        a.reverse();
    }
    if area(&b) < 0.0 {
        b.reverse();
    }
    area(&clip_convex(&a, &b)).abs()
}

// ---------------------------------------------------------------------
// Brute-force collision oracle.

/// (severity, code, subject) triple identifying a diagnostic.
pub type DiagKey = (Severity, String, String);

pub fn keys(diags: &[Diagnostic]) -> Vec<DiagKey> {
    diags.iter().map(|d| (d.severity, d.code.clone(), d.subject.clone())).collect()
}

/// Every element pair, every beam segment against every foreign part and
/// every part against the machinable outline, with no broad phase.
pub fn collision_oracle(plate: &Plate) -> BTreeSet<DiagKey> {
    let mut out = BTreeSet::new();
    let els = &plate.elements;
    for i in 0..els.len() {
        for j in i + 1..els.len() {
            let hit = els[i]
                .outlines()
                .iter()
                .any(|a| els[j].outlines().iter().any(|b| shape_depth(a, b) > TOUCH_TOL));
            if hit {
                let (a, b) = if els[i].name <= els[j].name {
                    (&els[i].name, &els[j].name)
                } else {
                    (&els[j].name, &els[i].name)
                };
                out.insert((Severity::Error, "collide.footprint".to_string(), format!("{a} & {b}")));
            }
        }
    }
    let reach = plate.dx + plate.dy;
    for tree in &plate.trees {
        for beam in tree.beams.values() {
            for seg in &beam.segments {
                let a = seg.origin;
                let b = seg.end_or(reach);
                if dist(pt(a), pt(b)) <= TOUCH_TOL {
                    continue;
                }
                for e in els {
                    if seg.start_element.as_deref() == Some(e.name.as_str())
                        || seg.end_element.as_deref() == Some(e.name.as_str())
                    {
                        continue;
                    }
                    if e.outlines().iter().any(|s| segment_depth(a, b, s) > TOUCH_TOL) {
                        out.insert((
                            Severity::Error,
                            "collide.beam".to_string(),
                            format!("{}:{}|{}", tree.source, seg.index, e.name),
                        ));
                    }
                }
            }
        }
    }
    let g = plate.gap;
    for e in els {
        if e.outlines().iter().any(|s| !inside_box(s, (g, g), (plate.dx - g, plate.dy - g), 1e-9)) {
            out.insert((Severity::Warning, "collide.edge".to_string(), e.name.clone()));
        }
    }
    out
}

// ---------------------------------------------------------------------
// Mesh topology from raw STL bytes.

#[derive(Debug)]
pub struct StlTopology {
    pub triangles: usize,
    pub vertices: usize,
    pub edges: usize,
    /// Undirected edges not used by exactly two triangles.
    pub non_manifold: usize,
    /// Directed edges used twice, or whose reverse is missing.
    pub misoriented: usize,
    pub signed_volume: f64,
}

impl StlTopology {
    pub fn euler(&self) -> i64 {
        self.vertices as i64 - self.edges as i64 + self.triangles as i64
    }
}

/// Parses binary STL and welds vertices with identical coordinates.
pub fn stl_topology(bytes: &[u8]) -> StlTopology {
    assert!(bytes.len() >= 84, "STL shorter than its header");
    let n = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
    assert_eq!(bytes.len(), 84 + 50 * n, "STL length disagrees with its triangle count");
    let mut ids: HashMap<[u32; 3], usize> = HashMap::new();
    let mut coords: Vec<[f64; 3]> = Vec::new();
    let mut tris = Vec::with_capacity(n);
    for t in 0..n {
        let rec = &bytes[84 + 50 * t..84 + 50 * (t + 1)];
        let mut v = [0usize; 3];
        for (k, slot) in v.iter_mut().enumerate() {
            let off = 12 + 12 * k;
            let bits = [0, 1, 2].map(|c| u32::from_le_bytes(rec[off + 4 * c..off + 4 * c + 4].try_into().unwrap()));
            let next = ids.len();
            *slot = *ids.entry(bits).or_insert_with(|| {
                coords.push(bits.map(|b| f32::from_bits(b) as f64));
                next
            });
        }
        tris.push(v);
    }
    let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
    let mut undirected: HashMap<(usize, usize), usize> = HashMap::new();
    let mut vol = 0.0;
    for v in &tris {
        for k in 0..3 {
            let (a, b) = (v[k], v[(k + 1) % 3]);
            *directed.entry((a, b)).or_default() += 1;
            *undirected.entry((a.min(b), a.max(b))).or_default() += 1;
        }
        let [a, b, c] = v.map(|i| coords[i]);
        vol += (a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
            + a[2] * (b[0] * c[1] - b[1] * c[0]))
            / 6.0;
    }
    let misoriented = directed
        .iter()
        .filter(|(&(a, b), &c)| c != 1 || directed.get(&(b, a)) != Some(&1))
        .count();
    StlTopology {
        triangles: n,
        vertices: coords.len(),
        edges: undirected.len(),
        non_manifold: undirected.values().filter(|&&c| c != 2).count(),
        misoriented,
        signed_volume: vol,
    }
}

// ---------------------------------------------------------------------
// Genus of a drilled block.

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }
    fn find(&mut self, i: usize) -> usize {
        if self.0[i] != i {
            let r = self.find(self.0[i]);
            self.0[i] = r;
        }
        self.0[i]
    }
    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        self.0[a] = b;
    }
}

/// Number of handles in a `dx` x `dy` block (plan rectangle `lo`-`hi`)
/// pierced by `cuts`: through passages are grouped by positive-area
/// overlap, and a group counts once unless it breaks out of the outline.
/// Partial-depth cuts leave material above or below and add no handles,
/// except where a top and a bottom cut meet.
pub fn genus_oracle(cuts: &[Cut], lo: Point2, hi: Point2, dz: f64) -> usize {
    let mut passages: Vec<Vec<Point2>> = cuts
        .iter()
        .filter(|c| c.span == CutSpan::Through)
        .map(|c| c.polygon.clone())
        .collect();
    for t in cuts {
        for b in cuts {
            if let (CutSpan::Top(dt), CutSpan::Bottom(db)) = (t.span, b.span) {
                if dt + db >= dz && overlap_area(&t.polygon, &b.polygon) > 1e-9 {
                    passages.push(t.polygon.clone());
                }
            }
        }
    }
    let n = passages.len();
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        for j in i + 1..n {
            if overlap_area(&passages[i], &passages[j]) > 1e-9 {
                uf.union(i, j);
            }
        }
    }
    let breaks_out = |poly: &[Point2]| {
        poly.iter()
            .any(|p| p.x <= lo.x + 1e-9 || p.x >= hi.x - 1e-9 || p.y <= lo.y + 1e-9 || p.y >= hi.y - 1e-9)
    };
    let mut open = BTreeSet::new();
    let mut roots = BTreeSet::new();
    for i in 0..n {
        let r = uf.find(i);
        roots.insert(r);
        if breaks_out(&passages[i]) {
            open.insert(r);
        }
    }
    roots.difference(&open).count()
}

// ---------------------------------------------------------------------
// Paraxial ABCD matrices.

pub type Abcd = [[f64; 2]; 2];

pub fn free_space(d: f64) -> Abcd {
    [[1.0, d], [0.0, 1.0]]
}

pub fn thin_lens(f: f64) -> Abcd {
    [[1.0, 0.0], [-1.0 / f, 1.0]]
}

pub fn mat_mul(a: Abcd, b: Abcd) -> Abcd {
    let mut m = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    m
}

pub fn apply(m: Abcd, ray: (f64, f64)) -> (f64, f64) {
    (m[0][0] * ray.0 + m[0][1] * ray.1, m[1][0] * ray.0 + m[1][1] * ray.1)
}

// ---------------------------------------------------------------------
// Fixed-point arcsine.

/// arcsin(num/den) from its Maclaurin series in 1e-30 fixed point.
/// Requires |num/den| <= 0.9 so the series converges quickly.
pub fn asin_fixed_point(num: i128, den: i128) -> f64 {
    assert!(den > 0 && num.abs() * 10 <= den * 9);
    const ONE: i128 = 1_000_000_000_000_000_000_000_000_000;
    let x = num * ONE / den;
    // term_n = (2n)! / (4^n (n!)^2) x^(2n+1); series adds term_n / (2n+1).
    let mut term = x;
    let mut sum = 0i128;
    let mut n: i128 = 0;
    while term != 0 {
        sum += term / (2 * n + 1);
        term = term * num / den * num / den;
        term = term * (2 * n + 1) / (2 * n + 2);
        n += 1;
    }
    sum as f64 / ONE as f64
}

// ---------------------------------------------------------------------
// Fixtures.

pub fn catalog_ids_with_optics(cat: &Catalog) -> Vec<String> {
    cat.components()
        .filter(|c| cat.get(&c.id).map(|s| s.behavior.is_some()).unwrap_or(false))
        .map(|c| c.id.clone())
        .collect()
}

pub fn pose(x: f64, y: f64, deg: f64) -> Pose {
    Pose::new(Point2::new(x, y), Heading::from_degrees(deg))
}

/// Sum of BOM quantities per component id (before any variant suffix).
pub fn bom_totals(csv: &str) -> BTreeMap<String, u64> {
    let mut out = BTreeMap::new();
    let mut rd = csv::Reader::from_reader(csv.as_bytes());
    for rec in rd.records() {
        let rec = rec.unwrap();
        let id = rec[0].split('[').next().unwrap().to_string();
        *out.entry(id).or_default() += rec[2].parse::<u64>().unwrap();
    }
    out
}

// ---------------------------------------------------------------------
// Random plates for the collision oracle.

use beamplan::beam::TraceLimits;
use proptest::prelude::*;

pub const SCENE_DX: f64 = 200.0;
pub const SCENE_DY: f64 = 150.0;

#[derive(Debug, Clone)]
pub struct SceneSpec {
    /// (component index, x, y, heading in degrees)
    pub parts: Vec<(usize, f64, f64, f64)>,
    /// (x, y, heading in degrees)
    pub sources: Vec<(f64, f64, f64)>,
}

/// Up to 20 parts anywhere on (or hanging off) the plate and up to three
/// beam sources. Half the headings are grid-aligned so beams meet
/// mirrors square-on as they do in real layouts.
pub fn scene_strategy(components: usize) -> impl Strategy<Value = SceneSpec> {
    let angle = prop_oneof![(0..8u32).prop_map(|k| k as f64 * 45.0), 0.0..360.0f64];
    let part = (0..components, -10.0..SCENE_DX + 10.0, -10.0..SCENE_DY + 10.0, angle.clone());
    let source = (0.0..SCENE_DX, 0.0..SCENE_DY, angle);
    (prop::collection::vec(part, 0..=20), prop::collection::vec(source, 0..=3))
        .prop_map(|(parts, sources)| SceneSpec { parts, sources })
}

pub fn all_component_ids(cat: &Catalog) -> Vec<String> {
    cat.components().map(|c| c.id.clone()).collect()
}

/// Places the parts, registers the sources and traces.
pub fn build_scene(spec: &SceneSpec, cat: &Catalog, ids: &[String]) -> Plate {
    let mut plate = Plate::new("p", SCENE_DX, SCENE_DY, 12.7, INCH / 8.0, 12.7, Pose::identity()).unwrap();
    let empty = BTreeMap::new();
    for (k, &(c, x, y, deg)) in spec.parts.iter().enumerate() {
        let comp = cat.resolve(&ids[c], &empty, None, &empty).unwrap();
        plate.add_part(&format!("e{k:02}"), None, comp, pose(x, y, deg)).unwrap();
    }
    for (k, &(x, y, deg)) in spec.sources.iter().enumerate() {
        plate.add_beam_path(&format!("s{k}"), x, y, Heading::from_degrees(deg), 1.0).unwrap();
    }
    plate.trace(780.0, TraceLimits::default());
    plate
}

// ---------------------------------------------------------------------
// Random splitter trees.

use beamplan::beam::{
    child_indices, trace, BeamFate, BeamIndex, BeamTree, ElementSpec, OpticalBehavior, OpticalElement, Orientation,
    PlacementConstraint, SourceSpec, TraceSpec,
};
use beamplan::geometry::{Cardinal, Rect, Turn};

/// Builds a splitter tree driven by `bytes`: nodes are expanded breadth
/// first, each byte deciding whether the node splits, which way the
/// reflection turns and how far along the beam the splitter sits.
/// Returns the trace input and the indices meant to branch.
pub fn splitter_tree(bytes: &[u8]) -> (TraceSpec, BTreeSet<BeamIndex>) {
    let mut elements = Vec::new();
    let mut internal = BTreeSet::new();
    let mut queue = std::collections::VecDeque::from([(BeamIndex(1), Cardinal::Right)]);
    let mut k = 0;
    while let Some((index, dir)) = queue.pop_front() {
        if bytes.is_empty() || internal.len() >= 24 {
            break;
        }
        let b = bytes[k % bytes.len()];
        k += 1;
        let depth = 63 - index.0.leading_zeros();
        if depth >= 6 || (index.0 != 1 && b & 1 == 0) {
            continue;
        }
        let to = if b & 2 == 0 { dir.rot90() } else { dir.rot90().reversed() };
        elements.push(ElementSpec {
            name: format!("bs{}", index.0),
            source: "laser".into(),
            index,
            constraint: Some(PlacementConstraint::Distance(5.0 + (b >> 2) as f64)),
            orientation: Orientation::Turn(Turn::new(dir, to).unwrap()),
            behavior: OpticalBehavior::Splitter,
            aperture: 4.0,
        });
        internal.insert(index);
        queue.push_back((BeamIndex(index.0 << 1), dir));
        queue.push_back((BeamIndex(index.0 << 1 | 1), to));
    }
    let spec = TraceSpec {
        sources: vec![SourceSpec {
            name: "laser".into(),
            origin: Point2::new(0.0, 0.0),
            heading: Heading::from_degrees(0.0),
            drill_width: 1.0,
        }],
        elements,
        fixed: Vec::new(),
        bounds: Some(Rect::new(Point2::new(-2000.0, -2000.0), Point2::new(2000.0, 2000.0))),
        wavelength_nm: 780.0,
        limits: TraceLimits::default(),
    };
    (spec, internal)
}

/// Index uniqueness, prefix property and the child rule on one tree.
pub fn check_index_laws(tree: &BeamTree) -> Result<(), String> {
    let mut seen = BTreeSet::new();
    for (key, beam) in &tree.beams {
        if beam.index != *key {
            return Err(format!("beam stored under {key} carries {}", beam.index));
        }
        if !seen.insert(format!("{}", beam.index)) {
            return Err(format!("index {key} repeated"));
        }
        if beam.segments.iter().any(|s| s.index != *key) {
            return Err(format!("segment of {key} carries another index"));
        }
        let bits = format!("{:b}", key.0);
        if key.0 != 1 {
            let parent_bits = &bits[..bits.len() - 1];
            let parent = BeamIndex(u64::from_str_radix(parent_bits, 2).unwrap());
            match tree.beams.get(&parent) {
                Some(p) if matches!(p.fate, BeamFate::Branched { .. }) => {}
                _ => return Err(format!("{key} has no branched parent {parent}")),
            }
            for len in 1..bits.len() {
                let ancestor = BeamIndex(u64::from_str_radix(&bits[..len], 2).unwrap());
                if !tree.beams.contains_key(&ancestor) {
                    return Err(format!("prefix {ancestor} of {key} is not a beam"));
                }
            }
        }
        if let BeamFate::Branched { .. } = beam.fate {
            let kids: Vec<u64> = tree
                .beams
                .keys()
                .filter(|c| c.0 > 1 && c.0 / 2 == key.0)
                .map(|c| c.0)
                .collect();
            if kids != vec![2 * key.0, 2 * key.0 + 1] {
                return Err(format!("{key} branched into {kids:?}"));
            }
            let rule: Vec<u64> = child_indices(*key, &OpticalBehavior::Splitter).iter().map(|c| c.0).collect();
            if rule != kids {
                return Err(format!("child_indices({key}) = {rule:?}"));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------
// Scenario fixtures shared by the unit and acceptance tests.

/// Traces a fan of parallel rays through a thin lens at x = 50.
pub fn lens_fan(f: f64) -> Vec<(f64, Point2, Heading)> {
    let sources = (0..11)
        .map(|k| SourceSpec {
            name: format!("r{k}"),
            origin: Point2::new(0.0, k as f64 - 5.0),
            heading: Heading::from_degrees(0.0),
            drill_width: 1.0,
        })
        .collect();
    let lens = OpticalElement {
        name: "lens".into(),
        pose: Pose::new(Point2::new(50.0, 0.0), Heading::from_degrees(0.0)),
        normal: Heading::from_degrees(0.0),
        behavior: OpticalBehavior::ThinLens { focal_length: f },
        aperture: 25.0,
    };
    let spec = TraceSpec {
        sources,
        elements: vec![],
        fixed: vec![lens],
        bounds: Some(Rect::new(Point2::new(-10.0, -100.0), Point2::new(500.0, 100.0))),
        wavelength_nm: 780.0,
        limits: TraceLimits::default(),
    };
    let out = trace(&spec);
    assert!(out.issues.is_empty());
    out.trees
        .iter()
        .map(|t| {
            let after = t.segments().find(|s| s.start_element.as_deref() == Some("lens")).expect("ray passes the lens");
            (t.origin.y, after.origin, after.heading)
        })
        .collect()
}

/// Input into the AOM and the returning twice-diffracted beam of the
/// double-pass template, with the AOM's drive frequency.
pub fn double_pass(deflection: f64) -> ((Point2, Heading), (Point2, Heading, f64), f64) {
    let scene = compile_text(&format!(
        "table dx=20 dy=10\nplate doublepass at (1, 1, 0) deflection={deflection:?}\n"
    ));
    let plate = &scene.plates[0];
    let Some(OpticalBehavior::Aom { rf_frequency, .. }) = plate.element("aom").unwrap().behavior() else {
        panic!("aom behaviour")
    };
    let tree = plate.tree("input").unwrap();
    let inp = tree.segments().find(|s| s.end_element.as_deref() == Some("aom") && s.index == BeamIndex(0b11)).unwrap();
    let out = tree.beams[&BeamIndex(0b1111)].segments.first().unwrap();
    assert_eq!(out.start_element.as_deref(), Some("aom"));
    ((inp.origin, inp.heading), (out.origin, out.heading, out.frequency_offset), *rf_frequency)
}

/// Positions of layout-distance-constrained elements relative to their
/// beam's entry point.
pub fn distance_positions(scene: &Scene) -> BTreeMap<String, (f64, f64)> {
    let p = &scene.plates[0];
    p.elements
        .iter()
        .filter_map(|e| {
            let pl = e.placement.as_ref()?;
            if pl.from_role || !matches!(pl.constraint, PlacementConstraint::Distance(_)) {
                return None;
            }
            let entry = p.sources.iter().find(|s| s.name == pl.source)?.origin;
            Some((e.name.clone(), (e.pose.position.x - entry.x, e.pose.position.y - entry.y)))
        })
        .collect()
}

