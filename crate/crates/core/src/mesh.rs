//! Indexed triangle meshes with STL encoding and topology checks.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("STL data is truncated ({0} bytes)")]
    Truncated(usize),
    #[error("STL declares {declared} triangles but holds {actual} bytes")]
    CountMismatch { declared: u32, actual: usize },
    #[error("malformed ASCII STL: {0}")]
    Ascii(String),
    #[error("mesh is not watertight: {open} open edges, {over} over-shared edges, {flipped} inconsistently oriented edges")]
    NotManifold { open: usize, over: usize, flipped: usize },
    #[error("mesh has no triangles")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Mesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[u32; 3]>,
}

/// Edge-use statistics of a mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EdgeReport {
    pub edges: usize,
    /// Edges used by exactly one triangle.
    pub open: usize,
    /// Edges used by more than two triangles.
    pub over: usize,
    /// Edges whose two uses run in the same direction.
    pub flipped: usize,
}

impl EdgeReport {
    pub fn is_watertight(&self) -> bool {
        self.open == 0 && self.over == 0 && self.flipped == 0
    }
}

impl Mesh {
    pub fn add_vertex(&mut self, p: [f64; 3]) -> u32 {
        self.vertices.push(p);
        (self.vertices.len() - 1) as u32
    }

    pub fn edge_report(&self) -> EdgeReport {
        let mut uses: BTreeMap<(u32, u32), (u32, u32)> = BTreeMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                let e = uses.entry((a.min(b), a.max(b))).or_default();
                if a < b {
                    e.0 += 1;
                } else {
                    e.1 += 1;
                }
            }
        }
        let mut r = EdgeReport {
            edges: uses.len(),
            ..Default::default()
        };
        for (fwd, back) in uses.values() {
            match fwd + back {
                1 => r.open += 1,
                2 if *fwd == 1 => {}
                2 => r.flipped += 1,
                _ => r.over += 1,
            }
        }
        r
    }

    /// V − E + F over the vertices actually referenced.
    pub fn euler_characteristic(&self) -> i64 {
        let mut used = vec![false; self.vertices.len()];
        for t in &self.triangles {
            for &v in t {
                used[v as usize] = true;
            }
        }
        let v = used.iter().filter(|u| **u).count() as i64;
        v - self.edge_report().edges as i64 + self.triangles.len() as i64
    }

    /// Signed enclosed volume (positive for outward-facing triangles).
    pub fn volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| self.vertices[i as usize]);
                (a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
                    + a[2] * (b[0] * c[1] - b[1] * c[0]))
                    / 6.0
            })
            .sum()
    }

    /// Triangles with (near) zero area.
    pub fn degenerate_count(&self, tol: f64) -> usize {
        self.triangles
            .iter()
            .filter(|t| triangle_area(t.map(|i| self.vertices[i as usize])) <= tol)
            .count()
    }

    pub fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    }

    /// Binary STL bytes.
    pub fn to_stl(&self, header: &str) -> Vec<u8> {
        let mut out = Vec::with_capacity(84 + 50 * self.triangles.len());
        let mut h = [0u8; 80];
        let hb = header.as_bytes();
        h[..hb.len().min(80)].copy_from_slice(&hb[..hb.len().min(80)]);
        out.extend_from_slice(&h);
        out.extend_from_slice(&(self.triangles.len() as u32).to_le_bytes());
        for t in &self.triangles {
            let [a, b, c] = t.map(|i| self.vertices[i as usize]);
            let n = normal(a, b, c);
            for v in [n, a, b, c] {
                for k in v {
                    out.extend_from_slice(&(k as f32).to_le_bytes());
                }
            }
            out.extend_from_slice(&0u16.to_le_bytes());
        }
        out
    }

    /// Reads binary or ASCII STL, welding identical vertices.
    pub fn from_stl(bytes: &[u8]) -> Result<Mesh, MeshError> {
        if bytes.starts_with(b"solid") {
            if let Ok(text) = std::str::from_utf8(bytes) {
                if text.contains("facet") || bytes.len() < 84 {
                    return Mesh::from_ascii_stl(text);
                }
            }
        }
        if bytes.len() < 84 {
            return Err(MeshError::Truncated(bytes.len()));
        }
        let n = u32::from_le_bytes(bytes[80..84].try_into().expect("4 bytes"));
        if bytes.len() != 84 + 50 * n as usize {
            return Err(MeshError::CountMismatch {
                declared: n,
                actual: bytes.len(),
            });
        }
        let mut w = Welder::default();
        for i in 0..n as usize {
            let base = 84 + 50 * i + 12;
            let mut tri = [0u32; 3];
            for (k, slot) in tri.iter_mut().enumerate() {
                let mut p = [0.0; 3];
                for (j, c) in p.iter_mut().enumerate() {
                    let o = base + 12 * k + 4 * j;
                    *c = f32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as f64;
                }
                *slot = w.vertex(p);
            }
            w.mesh.triangles.push(tri);
        }
        Ok(w.mesh)
    }

    fn from_ascii_stl(text: &str) -> Result<Mesh, MeshError> {
        let mut w = Welder::default();
        let mut pending = Vec::new();
        for line in text.lines() {
            let mut it = line.split_whitespace();
            if it.next() == Some("vertex") {
                let coords: Vec<f64> = it
                    .map(|s| s.parse::<f64>().map_err(|_| MeshError::Ascii(line.trim().to_string())))
                    .collect::<Result<_, _>>()?;
                if coords.len() != 3 {
                    return Err(MeshError::Ascii(line.trim().to_string()));
                }
                pending.push(w.vertex([coords[0], coords[1], coords[2]]));
                if pending.len() == 3 {
                    w.mesh.triangles.push([pending[0], pending[1], pending[2]]);
                    pending.clear();
                }
            }
        }
        if !pending.is_empty() {
            return Err(MeshError::Ascii("dangling vertices".into()));
        }
        Ok(w.mesh)
    }

    /// Extrudes a simple counter-clockwise convex polygon from `z0` to `z1`.
    pub fn extrude_convex(poly: &[[f64; 2]], z0: f64, z1: f64) -> Mesh {
        let mut m = Mesh::default();
        let n = poly.len() as u32;
        for p in poly {
            m.add_vertex([p[0], p[1], z0]);
        }
        for p in poly {
            m.add_vertex([p[0], p[1], z1]);
        }
        for i in 1..n - 1 {
            m.triangles.push([0, i + 1, i]);
            m.triangles.push([n, n + i, n + i + 1]);
        }
        for i in 0..n {
            let j = (i + 1) % n;
            m.triangles.push([i, j, n + j]);
            m.triangles.push([i, n + j, n + i]);
        }
        m
    }
}

#[derive(Default)]
struct Welder {
    mesh: Mesh,
    index: BTreeMap<[u64; 3], u32>,
}

impl Welder {
    fn vertex(&mut self, p: [f64; 3]) -> u32 {
        let key = p.map(|c| (c + 0.0).to_bits());
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        let i = self.mesh.add_vertex(p);
        self.index.insert(key, i);
        i
    }
}

fn normal(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> [f64; 3] {
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let n = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
    let l = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    if l == 0.0 {
        [0.0; 3]
    } else {
        n.map(|k| k / l)
    }
}

fn triangle_area(t: [[f64; 3]; 3]) -> f64 {
    let n = {
        let [a, b, c] = t;
        let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
        [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]]
    };
    0.5 * (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_is_watertight_with_unit_volume() {
        let m = Mesh::extrude_convex(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], 0.0, 1.0);
        assert!(m.edge_report().is_watertight());
        assert_eq!(m.euler_characteristic(), 2);
        assert!((m.volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stl_round_trip() {
        let m = Mesh::extrude_convex(&[[0.0, 0.0], [2.0, 0.0], [1.0, 1.0]], 0.0, 0.5);
        let bytes = m.to_stl("test");
        assert_eq!(bytes.len(), 84 + 50 * m.triangles.len());
        let back = Mesh::from_stl(&bytes).unwrap();
        assert_eq!(back.triangles.len(), m.triangles.len());
        assert!(back.edge_report().is_watertight());
    }
}
