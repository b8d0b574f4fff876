//! Triangulations of the unit square with tagged boundary parts.
//!
//! The boundary splits into three parts: Gamma1 carries the homogeneous
//! Dirichlet condition, Gamma2 the prescribed flux, Gamma3 the nonsmooth
//! (or Dirichlet-limit) condition. The structured generator alternates cell
//! diagonals so the diagonals of neighbouring cells form crosses; any
//! globally linear function is represented exactly by P1 elements on it.

use crate::error::{Error, Result};
use std::collections::HashMap;
use std::io::{BufRead, Write};

/// Boundary part labels, encoded 1..3 in mesh files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    Gamma1,
    Gamma2,
    Gamma3,
}

impl BoundaryTag {
    pub fn as_u8(self) -> u8 {
        match self {
            BoundaryTag::Gamma1 => 1,
            BoundaryTag::Gamma2 => 2,
            BoundaryTag::Gamma3 => 3,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            1 => Some(BoundaryTag::Gamma1),
            2 => Some(BoundaryTag::Gamma2),
            3 => Some(BoundaryTag::Gamma3),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    /// Endpoint vertex indices.
    pub v: [usize; 2],
    pub tag: BoundaryTag,
}

/// Assignment of tags to the four sides of the unit square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaggingScheme {
    pub left: BoundaryTag,
    pub right: BoundaryTag,
    pub bottom: BoundaryTag,
    pub top: BoundaryTag,
}

impl Default for TaggingScheme {
    /// Dirichlet wall at x = 0, nonsmooth side at x = 1, flux on y = 0 and y = 1.
    fn default() -> Self {
        TaggingScheme {
            left: BoundaryTag::Gamma1,
            right: BoundaryTag::Gamma3,
            bottom: BoundaryTag::Gamma2,
            top: BoundaryTag::Gamma2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mesh2D {
    pub vertices: Vec<[f64; 2]>,
    /// Counterclockwise vertex index triples.
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    /// Maximum edge length.
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeshDefect {
    NonPositiveArea { triangle: usize },
    NonconformingEdge { edge: (usize, usize) },
    MissingBoundaryEdge { edge: (usize, usize) },
    SpuriousBoundaryEdge { index: usize },
    DuplicateBoundaryEdge { index: usize },
    MissingTag { tag: BoundaryTag },
    UnusedVertex { vertex: usize },
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub defects: Vec<MeshDefect>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.defects.is_empty()
    }
}

impl Mesh2D {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Signed area of triangle `t`; positive for counterclockwise orientation.
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let pa = self.vertices[a];
        let pb = self.vertices[b];
        let pc = self.vertices[c];
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    pub fn max_edge_length(&self) -> f64 {
        let mut h = 0.0f64;
        for t in &self.triangles {
            for k in 0..3 {
                let p = self.vertices[t[k]];
                let q = self.vertices[t[(k + 1) % 3]];
                h = h.max(((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt());
            }
        }
        h
    }

    /// Vertices lying on edges with the given tag, sorted ascending.
    pub fn tagged_vertices(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .boundary_edges
            .iter()
            .filter(|e| e.tag == tag)
            .flat_map(|e| e.v)
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn validate(&self) -> ValidationReport {
        let mut defects = Vec::new();
        for t in 0..self.triangles.len() {
            if self.signed_area(t) <= 0.0 {
                defects.push(MeshDefect::NonPositiveArea { triangle: t });
            }
        }
        // undirected edge incidence counts
        let mut incidence: HashMap<(usize, usize), usize> = HashMap::new();
        let mut used = vec![false; self.vertices.len()];
        for tri in &self.triangles {
            for k in 0..3 {
                used[tri[k]] = true;
                let key = edge_key(tri[k], tri[(k + 1) % 3]);
                *incidence.entry(key).or_insert(0) += 1;
            }
        }
        let mut nonconforming: Vec<(usize, usize)> =
            incidence.iter().filter(|(_, &c)| c > 2).map(|(&e, _)| e).collect();
        nonconforming.sort_unstable();
        for e in nonconforming {
            defects.push(MeshDefect::NonconformingEdge { edge: e });
        }
        let mut listed: HashMap<(usize, usize), usize> = HashMap::new();
        for (idx, be) in self.boundary_edges.iter().enumerate() {
            let key = edge_key(be.v[0], be.v[1]);
            if listed.insert(key, idx).is_some() {
                defects.push(MeshDefect::DuplicateBoundaryEdge { index: idx });
            } else if incidence.get(&key) != Some(&1) {
                defects.push(MeshDefect::SpuriousBoundaryEdge { index: idx });
            }
        }
        let mut missing: Vec<(usize, usize)> = incidence
            .iter()
            .filter(|(e, &c)| c == 1 && !listed.contains_key(e))
            .map(|(&e, _)| e)
            .collect();
        missing.sort_unstable();
        for e in missing {
            defects.push(MeshDefect::MissingBoundaryEdge { edge: e });
        }
        for tag in [BoundaryTag::Gamma1, BoundaryTag::Gamma2, BoundaryTag::Gamma3] {
            if !self.boundary_edges.iter().any(|e| e.tag == tag) {
                defects.push(MeshDefect::MissingTag { tag });
            }
        }
        for (v, &u) in used.iter().enumerate() {
            if !u {
                defects.push(MeshDefect::UnusedVertex { vertex: v });
            }
        }
        ValidationReport { defects }
    }
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Structured triangulation of [0,1]^2 with `n` cells per side, each cell
/// split along a diagonal whose direction alternates checkerboard-fashion.
pub fn generate_unit_square(n: usize, tagging: TaggingScheme) -> Result<Mesh2D> {
    if n == 0 {
        return Err(Error::InvalidParameter("subdivision count must be at least 1".into()));
    }
    let np = n + 1;
    let idx = |i: usize, j: usize| j * np + i;
    let mut vertices = Vec::with_capacity(np * np);
    for j in 0..np {
        for i in 0..np {
            vertices.push([i as f64 / n as f64, j as f64 / n as f64]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let v00 = idx(i, j);
            let v10 = idx(i + 1, j);
            let v01 = idx(i, j + 1);
            let v11 = idx(i + 1, j + 1);
            if (i + j) % 2 == 0 {
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            } else {
                triangles.push([v00, v10, v01]);
                triangles.push([v10, v11, v01]);
            }
        }
    }
    let mut boundary_edges = Vec::with_capacity(4 * n);
    for i in 0..n {
        boundary_edges.push(BoundaryEdge { v: [idx(i, 0), idx(i + 1, 0)], tag: tagging.bottom });
    }
    for j in 0..n {
        boundary_edges.push(BoundaryEdge { v: [idx(n, j), idx(n, j + 1)], tag: tagging.right });
    }
    for i in 0..n {
        boundary_edges.push(BoundaryEdge { v: [idx(i, n), idx(i + 1, n)], tag: tagging.top });
    }
    for j in 0..n {
        boundary_edges.push(BoundaryEdge { v: [idx(0, j), idx(0, j + 1)], tag: tagging.left });
    }
    let mut mesh = Mesh2D { vertices, triangles, boundary_edges, h: 0.0 };
    mesh.h = mesh.max_edge_length();
    Ok(mesh)
}

/// Split every triangle into four via edge midpoints. Boundary tags are
/// inherited by the two halves of each boundary edge; h halves.
pub fn refine_uniform(mesh: &Mesh2D) -> Mesh2D {
    let mut vertices = mesh.vertices.clone();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut mid = |a: usize, b: usize, vertices: &mut Vec<[f64; 2]>| -> usize {
        let key = edge_key(a, b);
        *midpoint.entry(key).or_insert_with(|| {
            let pa = vertices[a];
            let pb = vertices[b];
            vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
            vertices.len() - 1
        })
    };
    let mut triangles = Vec::with_capacity(4 * mesh.triangles.len());
    for &[a, b, c] in &mesh.triangles {
        let mab = mid(a, b, &mut vertices);
        let mbc = mid(b, c, &mut vertices);
        let mca = mid(c, a, &mut vertices);
        triangles.push([a, mab, mca]);
        triangles.push([b, mbc, mab]);
        triangles.push([c, mca, mbc]);
        triangles.push([mab, mbc, mca]);
    }
    let mut boundary_edges = Vec::with_capacity(2 * mesh.boundary_edges.len());
    for be in &mesh.boundary_edges {
        let m = mid(be.v[0], be.v[1], &mut vertices);
        boundary_edges.push(BoundaryEdge { v: [be.v[0], m], tag: be.tag });
        boundary_edges.push(BoundaryEdge { v: [m, be.v[1]], tag: be.tag });
    }
    let mut out = Mesh2D { vertices, triangles, boundary_edges, h: 0.0 };
    out.h = out.max_edge_length();
    out
}

/// Write the `mesh2d v1` plain-text format.
pub fn write_mesh(mesh: &Mesh2D, w: &mut impl Write) -> Result<()> {
    writeln!(w, "mesh2d v1")?;
    writeln!(w, "vertices {}", mesh.vertices.len())?;
    for v in &mesh.vertices {
        writeln!(w, "{} {}", v[0], v[1])?;
    }
    writeln!(w, "triangles {}", mesh.triangles.len())?;
    for t in &mesh.triangles {
        writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(w, "boundary {}", mesh.boundary_edges.len())?;
    for e in &mesh.boundary_edges {
        writeln!(w, "{} {} {}", e.v[0], e.v[1], e.tag.as_u8())?;
    }
    Ok(())
}

/// Read the `mesh2d v1` format; h is recomputed from the geometry.
pub fn read_mesh(r: &mut impl BufRead) -> Result<Mesh2D> {
    let mut lines = r.lines().enumerate();
    let mut next_line = |expect: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((i, Ok(s))) => Ok((i + 1, s)),
            Some((i, Err(e))) => Err(Error::MeshFormat { line: i + 1, msg: e.to_string() }),
            None => Err(Error::MeshFormat { line: 0, msg: format!("unexpected end of file, expected {expect}") }),
        }
    };
    let (line, header) = next_line("header")?;
    if header.trim() != "mesh2d v1" {
        return Err(Error::MeshFormat { line, msg: format!("expected 'mesh2d v1', got '{}'", header.trim()) });
    }
    let parse_count = |line: usize, s: &str, kw: &str| -> Result<usize> {
        let mut parts = s.split_whitespace();
        match (parts.next(), parts.next(), parts.next()) {
            (Some(k), Some(c), None) if k == kw => c
                .parse()
                .map_err(|_| Error::MeshFormat { line, msg: format!("bad {kw} count '{c}'") }),
            _ => Err(Error::MeshFormat { line, msg: format!("expected '{kw} <count>'") }),
        }
    };
    let (line, s) = next_line("vertices header")?;
    let nv = parse_count(line, &s, "vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, s) = next_line("vertex line")?;
        let nums: Vec<&str> = s.split_whitespace().collect();
        if nums.len() != 2 {
            return Err(Error::MeshFormat { line, msg: "expected 'x y'".into() });
        }
        let x: f64 = nums[0].parse().map_err(|_| Error::MeshFormat { line, msg: format!("bad coordinate '{}'", nums[0]) })?;
        let y: f64 = nums[1].parse().map_err(|_| Error::MeshFormat { line, msg: format!("bad coordinate '{}'", nums[1]) })?;
        vertices.push([x, y]);
    }
    let (line, s) = next_line("triangles header")?;
    let nt = parse_count(line, &s, "triangles")?;
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (line, s) = next_line("triangle line")?;
        let nums: Vec<&str> = s.split_whitespace().collect();
        if nums.len() != 3 {
            return Err(Error::MeshFormat { line, msg: "expected 'i j k'".into() });
        }
        let mut t = [0usize; 3];
        for (slot, tok) in t.iter_mut().zip(&nums) {
            *slot = tok.parse().map_err(|_| Error::MeshFormat { line, msg: format!("bad index '{tok}'") })?;
            if *slot >= nv {
                return Err(Error::MeshFormat { line, msg: format!("vertex index {slot} out of range") });
            }
        }
        triangles.push(t);
    }
    let (line, s) = next_line("boundary header")?;
    let nb = parse_count(line, &s, "boundary")?;
    let mut boundary_edges = Vec::with_capacity(nb);
    for _ in 0..nb {
        let (line, s) = next_line("boundary line")?;
        let nums: Vec<&str> = s.split_whitespace().collect();
        if nums.len() != 3 {
            return Err(Error::MeshFormat { line, msg: "expected 'i j tag'".into() });
        }
        let a: usize = nums[0].parse().map_err(|_| Error::MeshFormat { line, msg: format!("bad index '{}'", nums[0]) })?;
        let b: usize = nums[1].parse().map_err(|_| Error::MeshFormat { line, msg: format!("bad index '{}'", nums[1]) })?;
        if a >= nv || b >= nv {
            return Err(Error::MeshFormat { line, msg: "boundary vertex index out of range".into() });
        }
        let tag_num: u8 = nums[2].parse().map_err(|_| Error::MeshFormat { line, msg: format!("bad tag '{}'", nums[2]) })?;
        let tag = BoundaryTag::from_u8(tag_num)
            .ok_or(Error::MeshFormat { line, msg: format!("tag must be 1, 2 or 3, got {tag_num}") })?;
        boundary_edges.push(BoundaryEdge { v: [a, b], tag });
    }
    if let Some((i, _)) = lines.next() {
        return Err(Error::MeshFormat { line: i + 1, msg: "trailing content after boundary block".into() });
    }
    let mut mesh = Mesh2D { vertices, triangles, boundary_edges, h: 0.0 };
    mesh.h = mesh.max_edge_length();
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::BufReader;

    #[test]
    fn n2_counts_and_areas() {
        let m = generate_unit_square(2, TaggingScheme::default()).unwrap();
        assert_eq!(m.n_vertices(), 9);
        assert_eq!(m.n_triangles(), 8);
        assert_eq!(m.boundary_edges.len(), 8);
        for tag in [BoundaryTag::Gamma1, BoundaryTag::Gamma3] {
            assert_eq!(m.boundary_edges.iter().filter(|e| e.tag == tag).count(), 2);
        }
        assert_eq!(m.boundary_edges.iter().filter(|e| e.tag == BoundaryTag::Gamma2).count(), 4);
        for t in 0..m.n_triangles() {
            assert!((m.signed_area(t) - 0.125).abs() < 1e-15);
        }
    }

    #[test]
    fn counts_follow_structured_formulas() {
        for n in 1..=8 {
            let m = generate_unit_square(n, TaggingScheme::default()).unwrap();
            assert_eq!(m.n_vertices(), (n + 1) * (n + 1));
            assert_eq!(m.n_triangles(), 2 * n * n);
            let total: f64 = (0..m.n_triangles()).map(|t| m.signed_area(t)).sum();
            assert!((total - 1.0).abs() < 1e-12);
            assert!(m.validate().is_valid());
        }
    }

    #[test]
    fn n4_mesh_width_and_gamma2_edges() {
        let m = generate_unit_square(4, TaggingScheme::default()).unwrap();
        assert!((m.h - 2.0f64.sqrt() / 4.0).abs() < 1e-15);
        assert_eq!(m.boundary_edges.iter().filter(|e| e.tag == BoundaryTag::Gamma2).count(), 8);
    }

    #[test]
    fn zero_subdivisions_rejected() {
        assert!(generate_unit_square(0, TaggingScheme::default()).is_err());
    }

    #[test]
    fn refinement_quadruples_triangles_and_halves_h() {
        let m = generate_unit_square(2, TaggingScheme::default()).unwrap();
        let r = refine_uniform(&m);
        assert_eq!(r.n_triangles(), 32);
        assert!((r.h - 0.5 * m.h).abs() < 1e-15);
        assert_eq!(r.boundary_edges.len(), 2 * m.boundary_edges.len());
        for tag in [BoundaryTag::Gamma1, BoundaryTag::Gamma2, BoundaryTag::Gamma3] {
            let before = m.boundary_edges.iter().filter(|e| e.tag == tag).count();
            let after = r.boundary_edges.iter().filter(|e| e.tag == tag).count();
            assert_eq!(after, 2 * before);
        }
        assert!(r.validate().is_valid());
        let total: f64 = (0..r.n_triangles()).map(|t| r.signed_area(t)).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn clockwise_triangle_is_reported_by_index() {
        let mut m = generate_unit_square(2, TaggingScheme::default()).unwrap();
        m.triangles[3].swap(0, 1);
        let report = m.validate();
        assert!(report.defects.contains(&MeshDefect::NonPositiveArea { triangle: 3 }));
    }

    #[test]
    fn missing_boundary_edge_is_a_coverage_defect() {
        let mut m = generate_unit_square(2, TaggingScheme::default()).unwrap();
        let removed = m.boundary_edges.pop().unwrap();
        let report = m.validate();
        let key = if removed.v[0] < removed.v[1] {
            (removed.v[0], removed.v[1])
        } else {
            (removed.v[1], removed.v[0])
        };
        assert!(report.defects.contains(&MeshDefect::MissingBoundaryEdge { edge: key }));
    }

    #[test]
    fn duplicate_boundary_edge_is_flagged() {
        let mut m = generate_unit_square(2, TaggingScheme::default()).unwrap();
        let dup = m.boundary_edges[0];
        m.boundary_edges.push(dup);
        let report = m.validate();
        let idx = m.boundary_edges.len() - 1;
        assert!(report.defects.contains(&MeshDefect::DuplicateBoundaryEdge { index: idx }));
    }

    #[test]
    fn file_format_round_trips() {
        let m = generate_unit_square(3, TaggingScheme::default()).unwrap();
        let mut buf = Vec::new();
        write_mesh(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("mesh2d v1\nvertices 16\n"));
        let back = read_mesh(&mut BufReader::new(&buf[..])).unwrap();
        assert_eq!(back.vertices, m.vertices);
        assert_eq!(back.triangles, m.triangles);
        assert_eq!(back.boundary_edges, m.boundary_edges);
        assert_eq!(back.h, m.h);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "mesh2d v1\nvertices 2\n0 0\n1 oops\n";
        let err = read_mesh(&mut BufReader::new(text.as_bytes())).unwrap_err();
        match err {
            Error::MeshFormat { line, .. } => assert_eq!(line, 4),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn bad_tag_rejected() {
        let text = "mesh2d v1\nvertices 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 2\nboundary 1\n0 1 7\n";
        let err = read_mesh(&mut BufReader::new(text.as_bytes())).unwrap_err();
        match err {
            Error::MeshFormat { line, msg } => {
                assert_eq!(line, 9);
                assert!(msg.contains("tag"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }
}
