//! Conforming triangulations of polygonal domains.
//!
//! Every triangle is stored counterclockwise with vertex 0 opposite its
//! refinement edge, so that local edge `i` (the edge opposite vertex `i`) of
//! triangle `t` is `cell_faces[t][i]` and local edge 0 is the edge bisected
//! by newest-vertex bisection.

use std::collections::HashMap;
use std::fmt;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

const GEOMETRY_TOL: f64 = 1e-14;

/// Classification of a face of the triangulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum FaceLabel {
    Interior,
    Dirichlet,
    Neumann,
}

impl FaceLabel {
    pub fn code(self) -> char {
        match self {
            FaceLabel::Interior => 'I',
            FaceLabel::Dirichlet => 'D',
            FaceLabel::Neumann => 'N',
        }
    }

    fn from_code(c: &str) -> Option<Self> {
        match c {
            "I" => Some(FaceLabel::Interior),
            "D" => Some(FaceLabel::Dirichlet),
            "N" => Some(FaceLabel::Neumann),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

/// Classifies boundary edges by their midpoint.
#[derive(Clone)]
pub enum BoundarySpec {
    AllDirichlet,
    Predicate(Arc<dyn Fn(Point) -> BoundaryKind + Send + Sync>),
}

impl BoundarySpec {
    pub fn predicate<F>(f: F) -> Self
    where
        F: Fn(Point) -> BoundaryKind + Send + Sync + 'static,
    {
        BoundarySpec::Predicate(Arc::new(f))
    }

    /// Dirichlet on the two edges meeting at the re-entrant corner of the
    /// L-shape, `{0} x [-1, 0]` and `[0, 1] x {0}`; Neumann elsewhere.
    pub fn reentrant_corner_dirichlet() -> Self {
        const TOL: f64 = 1e-12;
        Self::predicate(|[x, y]| {
            let on_vertical = x.abs() <= TOL && (-1.0 - TOL..=TOL).contains(&y);
            let on_horizontal = y.abs() <= TOL && (-TOL..=1.0 + TOL).contains(&x);
            if on_vertical || on_horizontal {
                BoundaryKind::Dirichlet
            } else {
                BoundaryKind::Neumann
            }
        })
    }

    pub fn classify(&self, midpoint: Point) -> BoundaryKind {
        match self {
            BoundarySpec::AllDirichlet => BoundaryKind::Dirichlet,
            BoundarySpec::Predicate(f) => f(midpoint),
        }
    }
}

impl fmt::Debug for BoundarySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundarySpec::AllDirichlet => f.write_str("AllDirichlet"),
            BoundarySpec::Predicate(_) => f.write_str("Predicate(..)"),
        }
    }
}

/// A face stored once with a fixed orientation: `normal` points out of
/// `plus` (the lower-index adjacent cell).
#[derive(Clone, Debug)]
pub struct Face {
    /// Endpoints, lower vertex index first. Face parameterizations start here.
    pub vertices: [usize; 2],
    pub plus: usize,
    pub minus: Option<usize>,
    pub normal: Point,
    pub diameter: f64,
    pub label: FaceLabel,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.minus.is_none()
    }

    /// Faces carrying a jump penalty and a weak Dirichlet condition.
    pub fn is_penalized(&self) -> bool {
        self.label != FaceLabel::Neumann
    }

    /// +1 if `cell` is the plus side, -1 if it is the minus side.
    pub fn orientation(&self, cell: usize) -> f64 {
        if cell == self.plus {
            1.0
        } else {
            debug_assert_eq!(self.minus, Some(cell));
            -1.0
        }
    }

    pub fn neighbor(&self, cell: usize) -> Option<usize> {
        if cell == self.plus {
            self.minus
        } else {
            Some(self.plus)
        }
    }
}

#[derive(Clone, Debug)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub faces: Vec<Face>,
    /// `cell_faces[t][i]` is the face opposite local vertex `i`.
    pub cell_faces: Vec<[usize; 3]>,
    pub diameters: Vec<f64>,
    pub areas: Vec<f64>,
    pub generation: Vec<u32>,
    /// Index of the parent triangle in the mesh this one was refined from.
    pub parent: Vec<usize>,
    boundary: BoundarySpec,
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn dist(a: Point, b: Point) -> f64 {
    let d = sub(a, b);
    d[0].hypot(d[1])
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    let u = sub(b, a);
    let v = sub(c, a);
    0.5 * (u[0] * v[1] - u[1] * v[0])
}

fn midpoint(a: Point, b: Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

impl Mesh {
    /// Builds a mesh from raw triangles. Each triangle is reordered to be
    /// counterclockwise with vertex 0 opposite its longest edge.
    pub fn from_triangles(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary: BoundarySpec,
    ) -> Result<Self> {
        let mut normalized = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::Config(format!("triangle {t} references a missing vertex")));
            }
            let [a, b, c] = *tri;
            let mut tri = if signed_area(vertices[a], vertices[b], vertices[c]) < 0.0 {
                [a, c, b]
            } else {
                [a, b, c]
            };
            let edge = |i: usize| dist(vertices[tri[(i + 1) % 3]], vertices[tri[(i + 2) % 3]]);
            let longest = (0..3)
                .max_by(|&i, &j| edge(i).partial_cmp(&edge(j)).unwrap().then(j.cmp(&i)))
                .unwrap();
            tri.rotate_left(longest);
            normalized.push(tri);
        }
        let n = normalized.len();
        Self::assemble(vertices, normalized, vec![0; n], (0..n).collect(), boundary)
    }

    fn assemble(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        generation: Vec<u32>,
        parent: Vec<usize>,
        boundary: BoundarySpec,
    ) -> Result<Self> {
        let mut areas = Vec::with_capacity(triangles.len());
        let mut diameters = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let [a, b, c] = tri.map(|v| vertices[v]);
            let area = signed_area(a, b, c);
            let scale = dist(a, b).max(dist(b, c)).max(dist(c, a));
            if area <= GEOMETRY_TOL * scale * scale {
                return Err(Error::Config(format!("triangle {t} has non-positive area {area:e}")));
            }
            areas.push(area);
            diameters.push(scale);
        }

        let mut faces: Vec<Face> = Vec::new();
        let mut cell_faces = vec![[usize::MAX; 3]; triangles.len()];
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(2 * triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            for i in 0..3 {
                let from = tri[(i + 1) % 3];
                let to = tri[(i + 2) % 3];
                let key = (from.min(to), from.max(to));
                match lookup.get(&key) {
                    Some(&f) => {
                        let face = &mut faces[f];
                        if face.minus.is_some() {
                            return Err(Error::Config(format!(
                                "edge ({}, {}) is shared by more than two triangles",
                                key.0, key.1
                            )));
                        }
                        face.minus = Some(t);
                        face.label = FaceLabel::Interior;
                        cell_faces[t][i] = f;
                    }
                    None => {
                        let d = sub(vertices[to], vertices[from]);
                        let len = d[0].hypot(d[1]);
                        faces.push(Face {
                            vertices: [key.0, key.1],
                            plus: t,
                            minus: None,
                            normal: [d[1] / len, -d[0] / len],
                            diameter: len,
                            label: FaceLabel::Dirichlet,
                        });
                        lookup.insert(key, faces.len() - 1);
                        cell_faces[t][i] = faces.len() - 1;
                    }
                }
            }
        }
        for face in faces.iter_mut().filter(|f| f.minus.is_none()) {
            let mid = midpoint(vertices[face.vertices[0]], vertices[face.vertices[1]]);
            face.label = match boundary.classify(mid) {
                BoundaryKind::Dirichlet => FaceLabel::Dirichlet,
                BoundaryKind::Neumann => FaceLabel::Neumann,
            };
        }

        Ok(Mesh {
            vertices,
            triangles,
            faces,
            cell_faces,
            diameters,
            areas,
            generation,
            parent,
            boundary,
        })
    }

    pub fn num_cells(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn boundary_spec(&self) -> &BoundarySpec {
        &self.boundary
    }

    pub fn cell_vertices(&self, cell: usize) -> [Point; 3] {
        self.triangles[cell].map(|v| self.vertices[v])
    }

    pub fn centroid(&self, cell: usize) -> Point {
        let [a, b, c] = self.cell_vertices(cell);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn face_points(&self, face: usize) -> [Point; 2] {
        self.faces[face].vertices.map(|v| self.vertices[v])
    }

    pub fn face_midpoint(&self, face: usize) -> Point {
        let [a, b] = self.face_points(face);
        midpoint(a, b)
    }

    /// Maps a reference point of the unit triangle to the physical cell.
    pub fn map_to_cell(&self, cell: usize, xi: Point) -> Point {
        let [a, b, c] = self.cell_vertices(cell);
        [
            a[0] + xi[0] * (b[0] - a[0]) + xi[1] * (c[0] - a[0]),
            a[1] + xi[0] * (b[1] - a[1]) + xi[1] * (c[1] - a[1]),
        ]
    }

    /// Physical point at arc-length fraction `t` in `[0, 1]` from the face's
    /// lower-index vertex.
    pub fn map_to_face(&self, face: usize, t: f64) -> Point {
        let [a, b] = self.face_points(face);
        [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
    }

    /// Arc-length fraction of `x` along `face`, or an error if `x` is off the face.
    pub fn face_parameter(&self, face: usize, x: Point) -> Result<f64> {
        let [a, b] = self.face_points(face);
        let d = sub(b, a);
        let len2 = d[0] * d[0] + d[1] * d[1];
        let r = sub(x, a);
        let t = (r[0] * d[0] + r[1] * d[1]) / len2;
        let off = (r[0] * d[1] - r[1] * d[0]).abs() / len2.sqrt();
        let tol = 1e-12 * (1.0 + len2.sqrt());
        if off > tol || t < -tol || t > 1.0 + tol {
            return Err(Error::PointNotOnFace { face, x: x[0], y: x[1] });
        }
        Ok(t.clamp(0.0, 1.0))
    }

    pub fn h_max(&self) -> f64 {
        self.diameters.iter().copied().fold(0.0, f64::max)
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn num_edges(&self) -> usize {
        self.faces.len()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.faces.len() as i64 + self.triangles.len() as i64
    }

    /// Smallest interior angle over all triangles, in radians.
    pub fn min_angle(&self) -> f64 {
        let mut min = f64::INFINITY;
        for cell in 0..self.num_cells() {
            let p = self.cell_vertices(cell);
            for i in 0..3 {
                let u = sub(p[(i + 1) % 3], p[i]);
                let v = sub(p[(i + 2) % 3], p[i]);
                let cos = (u[0] * v[0] + u[1] * v[1]) / (u[0].hypot(u[1]) * v[0].hypot(v[1]));
                min = min.min(cos.clamp(-1.0, 1.0).acos());
            }
        }
        min
    }

    /// Number of faces whose midpoint coincides with a mesh vertex.
    pub fn hanging_nodes(&self) -> usize {
        let key = |p: Point| ((p[0] * 1e9).round() as i64, (p[1] * 1e9).round() as i64);
        let vertex_keys: std::collections::HashSet<_> = self.vertices.iter().map(|&p| key(p)).collect();
        (0..self.num_faces())
            .filter(|&f| vertex_keys.contains(&key(self.face_midpoint(f))))
            .count()
    }

    /// Local index (0..3) of `face` within `cell`.
    pub fn local_face_index(&self, cell: usize, face: usize) -> usize {
        self.cell_faces[cell].iter().position(|&f| f == face).expect("face not on cell")
    }

    /// Neighbours sharing a face with `cell` (at most three).
    pub fn neighbors(&self, cell: usize) -> impl Iterator<Item = usize> + '_ {
        self.cell_faces[cell].iter().filter_map(move |&f| match self.faces[f].minus {
            Some(m) if m == cell => Some(self.faces[f].plus),
            Some(m) if self.faces[f].plus == cell => Some(m),
            _ => None,
        })
    }

    /// Refines the marked cells by newest-vertex bisection with conforming
    /// closure. Marking every cell triggers red refinement instead.
    pub fn refine(&self, marked: &[usize]) -> Result<Mesh> {
        if let Some(&bad) = marked.iter().find(|&&t| t >= self.num_cells()) {
            return Err(Error::Config(format!("marked cell {bad} does not exist")));
        }
        if marked.is_empty() {
            let mut mesh = self.clone();
            mesh.parent = (0..self.num_cells()).collect();
            return Ok(mesh);
        }
        let mut is_marked = vec![false; self.num_cells()];
        for &t in marked {
            is_marked[t] = true;
        }
        if is_marked.iter().all(|&m| m) {
            self.refine_red()
        } else {
            self.refine_bisection(&is_marked)
        }
    }

    pub fn refine_uniform(&self) -> Result<Mesh> {
        self.refine_red()
    }

    fn midpoint_vertices(&self, split: &[bool]) -> (Vec<Point>, Vec<usize>) {
        let mut vertices = self.vertices.clone();
        let mut mid = vec![usize::MAX; self.num_faces()];
        for (f, &s) in split.iter().enumerate() {
            if s {
                mid[f] = vertices.len();
                vertices.push(self.face_midpoint(f));
            }
        }
        (vertices, mid)
    }

    fn refine_red(&self) -> Result<Mesh> {
        let (vertices, mid) = self.midpoint_vertices(&vec![true; self.num_faces()]);
        let mut triangles = Vec::with_capacity(4 * self.num_cells());
        let mut generation = Vec::with_capacity(4 * self.num_cells());
        let mut parent = Vec::with_capacity(4 * self.num_cells());
        for (t, &[a, b, c]) in self.triangles.iter().enumerate() {
            let [f0, f1, f2] = self.cell_faces[t];
            let (bc, ca, ab) = (mid[f0], mid[f1], mid[f2]);
            // Every child keeps the edge parallel to the parent's refinement edge.
            for child in [[a, ab, ca], [ab, b, bc], [ca, bc, c], [bc, ca, ab]] {
                triangles.push(child);
                generation.push(self.generation[t] + 2);
                parent.push(t);
            }
        }
        Mesh::assemble(vertices, triangles, generation, parent, self.boundary.clone())
    }

    fn refine_bisection(&self, is_marked: &[bool]) -> Result<Mesh> {
        let mut split = vec![false; self.num_faces()];
        for (t, &m) in is_marked.iter().enumerate() {
            if m {
                split[self.cell_faces[t][0]] = true;
            }
        }
        // Closure: a triangle with any split edge must split its refinement edge.
        loop {
            let mut changed = false;
            for faces in &self.cell_faces {
                if !split[faces[0]] && (split[faces[1]] || split[faces[2]]) {
                    split[faces[0]] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let (vertices, mid) = self.midpoint_vertices(&split);
        let mut triangles = Vec::with_capacity(self.num_cells() * 2);
        let mut generation = Vec::with_capacity(self.num_cells() * 2);
        let mut parent = Vec::with_capacity(self.num_cells() * 2);
        let mut push = |tri: [usize; 3], g: u32, p: usize| {
            triangles.push(tri);
            generation.push(g);
            parent.push(p);
        };
        for (t, &[a, b, c]) in self.triangles.iter().enumerate() {
            let [f0, f1, f2] = self.cell_faces[t];
            let g = self.generation[t];
            if !split[f0] {
                push([a, b, c], g, t);
                continue;
            }
            let m = mid[f0];
            // [m, a, b] has refinement edge (a, b) = f2; [m, c, a] has (c, a) = f1.
            if split[f2] {
                let m2 = mid[f2];
                push([m2, m, a], g + 2, t);
                push([m2, b, m], g + 2, t);
            } else {
                push([m, a, b], g + 1, t);
            }
            if split[f1] {
                let m1 = mid[f1];
                push([m1, m, c], g + 2, t);
                push([m1, a, m], g + 2, t);
            } else {
                push([m, c, a], g + 1, t);
            }
        }
        Mesh::assemble(vertices, triangles, generation, parent, self.boundary.clone())
    }

    /// Plain-text dump: a header line, then vertices, triangles and faces,
    /// one per line. Optional per-cell scalars follow as `cell_data <name>`.
    pub fn to_text(&self, cell_data: Option<(&str, &[f64])>) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "vertices {} / triangles {} / faces {}",
            self.vertices.len(),
            self.triangles.len(),
            self.faces.len()
        );
        for p in &self.vertices {
            let _ = writeln!(out, "{:.17e} {:.17e}", p[0], p[1]);
        }
        for t in &self.triangles {
            let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
        }
        for f in &self.faces {
            let minus = f.minus.map_or(-1, |m| m as i64);
            let _ = writeln!(
                out,
                "{} {} {} {} {}",
                f.vertices[0],
                f.vertices[1],
                f.plus,
                minus,
                f.label.code()
            );
        }
        if let Some((name, values)) = cell_data {
            let _ = writeln!(out, "cell_data {name}");
            for v in values {
                let _ = writeln!(out, "{v:.17e}");
            }
        }
        out
    }

    /// Parses the output of [`Mesh::to_text`]. Face labels are taken from
    /// the file; the boundary predicate is rebuilt from them.
    pub fn from_text(text: &str) -> Result<Mesh> {
        let bad = |msg: &str| Error::Config(format!("mesh text: {msg}"));
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty input"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 8 || fields[0] != "vertices" || fields[3] != "triangles" || fields[6] != "faces" {
            return Err(bad("malformed header"));
        }
        let parse = |s: &str| s.parse::<usize>().map_err(|_| bad("bad count"));
        let (nv, nt, nf) = (parse(fields[1])?, parse(fields[4])?, parse(fields[7])?);
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let l = lines.next().ok_or_else(|| bad("missing vertex"))?;
            let c: Vec<f64> = l.split_whitespace().filter_map(|s| s.parse().ok()).collect();
            if c.len() != 2 {
                return Err(bad("bad vertex line"));
            }
            vertices.push([c[0], c[1]]);
        }
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let l = lines.next().ok_or_else(|| bad("missing triangle"))?;
            let c: Vec<usize> = l.split_whitespace().filter_map(|s| s.parse().ok()).collect();
            if c.len() != 3 {
                return Err(bad("bad triangle line"));
            }
            triangles.push([c[0], c[1], c[2]]);
        }
        let mut labels = HashMap::new();
        for _ in 0..nf {
            let l = lines.next().ok_or_else(|| bad("missing face"))?;
            let c: Vec<&str> = l.split_whitespace().collect();
            if c.len() != 5 {
                return Err(bad("bad face line"));
            }
            let label = FaceLabel::from_code(c[4]).ok_or_else(|| bad("bad face label"))?;
            let a: usize = c[0].parse().map_err(|_| bad("bad face vertex"))?;
            let b: usize = c[1].parse().map_err(|_| bad("bad face vertex"))?;
            if a >= nv || b >= nv {
                return Err(bad("face references a missing vertex"));
            }
            let m = midpoint(vertices[a], vertices[b]);
            labels.insert(((m[0] * 1e12).round() as i64, (m[1] * 1e12).round() as i64), label);
        }
        let boundary = BoundarySpec::predicate(move |p| {
            match labels.get(&((p[0] * 1e12).round() as i64, (p[1] * 1e12).round() as i64)) {
                Some(FaceLabel::Neumann) => BoundaryKind::Neumann,
                _ => BoundaryKind::Dirichlet,
            }
        });
        let n = triangles.len();
        Mesh::assemble(vertices, triangles, vec![0; n], (0..n).collect(), boundary)
    }
}

/// The 6-triangle initial triangulation of `(-1,1)^2 \ [0,1) x (-1,0]`.
/// All diagonals pass through the re-entrant corner.
pub fn initial_lshape(boundary: BoundarySpec) -> Mesh {
    let vertices = vec![
        [-1.0, -1.0],
        [0.0, -1.0],
        [-1.0, 0.0],
        [0.0, 0.0],
        [1.0, 0.0],
        [-1.0, 1.0],
        [0.0, 1.0],
        [1.0, 1.0],
    ];
    let triangles = vec![[1, 3, 0], [2, 0, 3], [2, 3, 5], [6, 5, 3], [4, 7, 3], [6, 3, 7]];
    Mesh::from_triangles(vertices, triangles, boundary).expect("valid initial L-shape")
}

/// Unit square `(0,1)^2` split into `n x n` squares, each cut into two
/// triangles along the main diagonal.
pub fn unit_square(n: usize, boundary: BoundarySpec) -> Mesh {
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 / n as f64, j as f64 / n as f64]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            triangles.push([idx(i + 1, j), idx(i + 1, j + 1), idx(i, j)]);
            triangles.push([idx(i, j + 1), idx(i, j), idx(i + 1, j + 1)]);
        }
    }
    Mesh::from_triangles(vertices, triangles, boundary).expect("valid unit square")
}
