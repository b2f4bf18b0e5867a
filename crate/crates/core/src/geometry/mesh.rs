//! Triangle meshes: OFF/OBJ ingestion, icosphere generation, topology
//! checks, and the cotangent Laplacian with lumped mass.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Csr;
use crate::tolerances::DEGENERATE_AREA;

pub type Vec3 = [f64; 3];

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot3(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: Vec3) -> f64 {
    dot3(a, a).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
}

/// Topological summary of a closed mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Topology {
    pub vertices: usize,
    pub edges: usize,
    pub faces: usize,
    pub euler: i32,
}

/// Cotangent stiffness and lumped mass of a mesh.
#[derive(Debug, Clone)]
pub struct CotanOperator {
    /// Symmetric stiffness S with Δ̂ = M⁻¹S (negative semidefinite).
    pub stiffness: Csr,
    pub mass: Vec<f64>,
    /// Edges whose cotangent weight came out negative.
    pub negative_weights: usize,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidInput(format!("triangle {t} references a missing vertex")));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::DegenerateTriangle { index: t, area: 0.0 });
            }
        }
        if vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite vertex coordinate".into()));
        }
        Ok(TriMesh { vertices, triangles })
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
        0.5 * norm(cross(sub(b, a), sub(c, a)))
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Checks that every edge lies in exactly two consistently oriented
    /// triangles and returns V, E, F and χ = V − E + F.
    pub fn topology(&self) -> Result<Topology> {
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let e = (tri[k], tri[(k + 1) % 3]);
                if let Some(prev) = directed.insert(e, t) {
                    return Err(Error::NotClosedManifold(format!(
                        "directed edge {:?} used by triangles {prev} and {t} (inconsistent orientation or non-manifold edge)",
                        e
                    )));
                }
            }
        }
        for &(a, b) in directed.keys() {
            if !directed.contains_key(&(b, a)) {
                return Err(Error::NotClosedManifold(format!("edge ({a}, {b}) is a boundary edge")));
            }
        }
        let mut used = vec![false; self.vertices.len()];
        self.triangles.iter().flatten().for_each(|&v| used[v] = true);
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(Error::NotClosedManifold(format!("vertex {v} belongs to no triangle")));
        }
        let v = self.vertices.len();
        let e = directed.len() / 2;
        let f = self.triangles.len();
        Ok(Topology { vertices: v, edges: e, faces: f, euler: v as i32 - e as i32 + f as i32 })
    }

    /// Rejects triangles whose area falls below a fraction of the mean.
    pub fn check_nondegenerate(&self) -> Result<()> {
        let mean = self.area() / self.triangles.len() as f64;
        for t in 0..self.triangles.len() {
            let a = self.triangle_area(t);
            if !(a > DEGENERATE_AREA * mean) {
                return Err(Error::DegenerateTriangle { index: t, area: a });
            }
        }
        Ok(())
    }

    pub fn cotan_operator(&self) -> CotanOperator {
        let n = self.vertices.len();
        let mut trip = Vec::with_capacity(self.triangles.len() * 9);
        let mut mass = vec![0.0; n];
        let mut weights: HashMap<(usize, usize), f64> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            let area = self.triangle_area(t);
            for k in 0..3 {
                let i = tri[k];
                let j = tri[(k + 1) % 3];
                let o = tri[(k + 2) % 3];
                let u = sub(self.vertices[i], self.vertices[o]);
                let v = sub(self.vertices[j], self.vertices[o]);
                let cot = dot3(u, v) / norm(cross(u, v));
                let w = 0.5 * cot;
                *weights.entry((i.min(j), i.max(j))).or_insert(0.0) += w;
                mass[i] += area / 3.0;
            }
        }
        let mut negative = 0;
        for (&(i, j), &w) in &weights {
            if w < 0.0 {
                negative += 1;
            }
            trip.push((i, j, w));
            trip.push((j, i, w));
            trip.push((i, i, -w));
            trip.push((j, j, -w));
        }
        CotanOperator { stiffness: Csr::from_triplets(n, n, trip), mass, negative_weights: negative }
    }

    /// Gradients of the hat functions of each triangle (embedded).
    pub fn hat_gradients(&self) -> Vec<[Vec3; 3]> {
        (0..self.triangles.len())
            .map(|t| {
                let tri = self.triangles[t];
                let p = tri.map(|i| self.vertices[i]);
                let nrm = cross(sub(p[1], p[0]), sub(p[2], p[0]));
                let twice_area = norm(nrm);
                let nvec = nrm.map(|c| c / twice_area);
                let mut g = [[0.0; 3]; 3];
                for k in 0..3 {
                    // edge opposite vertex k, oriented counter-clockwise
                    let e = sub(p[(k + 2) % 3], p[(k + 1) % 3]);
                    g[k] = cross(nvec, e).map(|c| c / twice_area);
                }
                g
            })
            .collect()
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()) {
            Some(ref e) if e == "off" => parse_off(&text),
            Some(ref e) if e == "obj" => parse_obj(&text),
            _ => Err(Error::InvalidInput(format!("unknown mesh format: {}", path.display()))),
        }
    }

    pub fn to_off(&self) -> String {
        let mut s = format!("OFF\n{} {} 0\n", self.vertices.len(), self.triangles.len());
        for v in &self.vertices {
            s.push_str(&format!("{} {} {}\n", v[0], v[1], v[2]));
        }
        for t in &self.triangles {
            s.push_str(&format!("3 {} {} {}\n", t[0], t[1], t[2]));
        }
        s
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::MeshParse { line, message: message.into() }
}

fn parse_f64(tok: Option<&str>, line: usize) -> Result<f64> {
    tok.ok_or_else(|| parse_err(line, "missing number"))?
        .parse::<f64>()
        .map_err(|e| parse_err(line, e.to_string()))
}

fn parse_usize(tok: Option<&str>, line: usize) -> Result<usize> {
    tok.ok_or_else(|| parse_err(line, "missing index"))?
        .parse::<usize>()
        .map_err(|e| parse_err(line, e.to_string()))
}

pub fn parse_off(text: &str) -> Result<TriMesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (ln, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let mut counts_line = None;
    if header.starts_with("OFF") {
        let rest = header[3..].trim();
        if !rest.is_empty() {
            counts_line = Some((ln, rest.to_string()));
        }
    } else {
        return Err(parse_err(ln, "missing OFF header"));
    }
    let (ln, counts) = match counts_line {
        Some(c) => c,
        None => {
            let (l, c) = lines.next().ok_or_else(|| parse_err(ln, "missing counts"))?;
            (l, c.to_string())
        }
    };
    let mut it = counts.split_whitespace();
    let nv = parse_usize(it.next(), ln)?;
    let nf = parse_usize(it.next(), ln)?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (l, s) = lines.next().ok_or_else(|| parse_err(ln, "truncated vertex list"))?;
        let mut t = s.split_whitespace();
        vertices.push([parse_f64(t.next(), l)?, parse_f64(t.next(), l)?, parse_f64(t.next(), l)?]);
    }
    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (l, s) = lines.next().ok_or_else(|| parse_err(ln, "truncated face list"))?;
        let mut t = s.split_whitespace();
        let k = parse_usize(t.next(), l)?;
        if k != 3 {
            return Err(parse_err(l, format!("face with {k} vertices; only triangles are supported")));
        }
        triangles.push([parse_usize(t.next(), l)?, parse_usize(t.next(), l)?, parse_usize(t.next(), l)?]);
    }
    TriMesh::new(vertices, triangles)
}

pub fn parse_obj(text: &str) -> Result<TriMesh> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let l = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut t = line.split_whitespace();
        match t.next() {
            Some("v") => vertices.push([parse_f64(t.next(), l)?, parse_f64(t.next(), l)?, parse_f64(t.next(), l)?]),
            Some("f") => {
                let idx: Vec<&str> = t.collect();
                if idx.len() != 3 {
                    return Err(parse_err(l, format!("face with {} vertices; only triangles are supported", idx.len())));
                }
                let mut tri = [0usize; 3];
                for (k, tok) in idx.iter().enumerate() {
                    let first = tok.split('/').next().unwrap_or("");
                    let v: i64 = first.parse().map_err(|_| parse_err(l, format!("bad index {tok}")))?;
                    let resolved = if v > 0 { v - 1 } else { vertices.len() as i64 + v };
                    if resolved < 0 {
                        return Err(parse_err(l, format!("index {v} out of range")));
                    }
                    tri[k] = resolved as usize;
                }
                triangles.push(tri);
            }
            _ => {}
        }
    }
    TriMesh::new(vertices, triangles)
}

/// Unit icosphere obtained by `level` rounds of 4-to-1 subdivision.
pub fn icosphere(level: usize) -> TriMesh {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut v: Vec<Vec3> = vec![
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ];
    let unit = |p: Vec3| {
        let n = norm(p);
        p.map(|c| c / n)
    };
    v = v.into_iter().map(unit).collect();
    let mut f: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut nf = Vec::with_capacity(f.len() * 4);
        let mut midpoint = |a: usize, b: usize, v: &mut Vec<Vec3>| -> usize {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let p = unit([
                    0.5 * (v[a][0] + v[b][0]),
                    0.5 * (v[a][1] + v[b][1]),
                    0.5 * (v[a][2] + v[b][2]),
                ]);
                v.push(p);
                v.len() - 1
            })
        };
        for &[a, b, c] in &f {
            let ab = midpoint(a, b, &mut v);
            let bc = midpoint(b, c, &mut v);
            let ca = midpoint(c, a, &mut v);
            nf.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        f = nf;
    }
    TriMesh { vertices: v, triangles: f }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_topology() {
        for level in 0..3 {
            let m = icosphere(level);
            let t = m.topology().unwrap();
            assert_eq!(t.euler, 2);
            assert_eq!(t.vertices, 10 * 4usize.pow(level as u32) + 2);
        }
    }

    #[test]
    fn off_roundtrip() {
        let m = icosphere(1);
        let back = parse_off(&m.to_off()).unwrap();
        assert_eq!(back.triangles, m.triangles);
        assert_eq!(back.vertices.len(), m.vertices.len());
    }

    #[test]
    fn obj_parse_with_slashes_and_quads_rejected() {
        let obj = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1/1 2/2 3/3\nf 1 3 4\nf 1 4 2\nf 2 4 3\n";
        let m = parse_obj(obj).unwrap();
        assert_eq!(m.topology().unwrap().euler, 2);
        let quad = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
        assert!(matches!(parse_obj(quad), Err(Error::MeshParse { line: 5, .. })));
    }

    #[test]
    fn open_mesh_rejected() {
        let m = TriMesh::new(vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], vec![[0, 1, 2]]).unwrap();
        assert!(matches!(m.topology(), Err(Error::NotClosedManifold(_))));
    }

    #[test]
    fn degenerate_triangle_named() {
        let mut m = icosphere(1);
        let [a, b, _] = m.triangles[5];
        let mid = [
            0.5 * (m.vertices[a][0] + m.vertices[b][0]),
            0.5 * (m.vertices[a][1] + m.vertices[b][1]),
            0.5 * (m.vertices[a][2] + m.vertices[b][2]),
        ];
        let c = m.triangles[5][2];
        m.vertices[c] = mid;
        match m.check_nondegenerate() {
            Err(Error::DegenerateTriangle { index, .. }) => assert_eq!(m.triangles[index].contains(&c), true),
            other => panic!("expected degenerate triangle error, got {other:?}"),
        }
    }
}
