//! Structured quadrilateral meshes: generation, notching, validation and a
//! plain-text file format.
//!
//! File format (`pfrac-mesh v1`), whitespace separated, `#` starts a comment:
//!
//! ```text
//! pfrac-mesh v1
//! nodes N
//! x y            (N lines)
//! elements M
//! n0 n1 n2 n3    (M lines, counter-clockwise)
//! facets K
//! n0 n1 tag      (K lines)
//! nodeset name count
//! i0 i1 ...      (count indices)
//! ```

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

pub const MESH_HEADER: &str = "pfrac-mesh v1";

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("invalid mesh dimensions: {0}")]
    InvalidDimensions(String),
    #[error("{what} {item} references node {node}, but the mesh has {num_nodes} nodes")]
    IndexOutOfRange { what: &'static str, item: usize, node: usize, num_nodes: usize },
    #[error("element {element} is inverted or degenerate (Jacobian determinant {det:e} at corner {corner})")]
    InvertedElement { element: usize, corner: usize, det: f64 },
    #[error("facet {facet} ({a}, {b}) is not an edge of any element")]
    DanglingFacet { facet: usize, a: usize, b: usize },
    #[error("notch {0}")]
    InvalidNotch(String),
    #[error("unknown boundary tag or node set '{0}'")]
    UnknownTag(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    pub nodes: [usize; 2],
    pub tag: String,
}

/// Validated mesh of 4-node quadrilaterals. Every instance has passed the
/// index-range, Jacobian and facet checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<[f64; 2]>,
    elements: Vec<[usize; 4]>,
    facets: Vec<Facet>,
    node_sets: BTreeMap<String, Vec<usize>>,
}

fn corner_det(p: &[[f64; 2]; 4], c: usize) -> f64 {
    let o = p[c];
    let a = p[(c + 1) % 4];
    let b = p[(c + 3) % 4];
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

impl Mesh {
    pub fn new(
        nodes: Vec<[f64; 2]>,
        elements: Vec<[usize; 4]>,
        facets: Vec<Facet>,
        node_sets: BTreeMap<String, Vec<usize>>,
    ) -> Result<Mesh, MeshError> {
        let mesh = Mesh { nodes, elements, facets, node_sets };
        mesh.validate()?;
        Ok(mesh)
    }

    fn validate(&self) -> Result<(), MeshError> {
        let n = self.nodes.len();
        if n == 0 || self.elements.is_empty() {
            return Err(MeshError::InvalidDimensions("mesh has no nodes or no elements".into()));
        }
        if let Some(i) = self.nodes.iter().position(|p| !(p[0].is_finite() && p[1].is_finite())) {
            return Err(MeshError::InvalidDimensions(format!("node {i} has non-finite coordinates")));
        }
        let check = |what: &'static str, item: usize, node: usize| {
            if node >= n {
                Err(MeshError::IndexOutOfRange { what, item, node, num_nodes: n })
            } else {
                Ok(())
            }
        };
        for (e, conn) in self.elements.iter().enumerate() {
            for &node in conn {
                check("element", e, node)?;
            }
        }
        for (f, facet) in self.facets.iter().enumerate() {
            for &node in &facet.nodes {
                check("facet", f, node)?;
            }
        }
        for (s, set) in self.node_sets.values().enumerate() {
            for &node in set {
                check("node set", s, node)?;
            }
        }
        for e in 0..self.elements.len() {
            let p = self.element_coords(e);
            for c in 0..4 {
                let det = corner_det(&p, c);
                if !(det > 0.0) {
                    return Err(MeshError::InvertedElement { element: e, corner: c, det });
                }
            }
        }
        let edges: HashSet<(usize, usize)> = self
            .elements
            .iter()
            .flat_map(|c| (0..4).map(move |i| ordered(c[i], c[(i + 1) % 4])))
            .collect();
        for (f, facet) in self.facets.iter().enumerate() {
            let [a, b] = facet.nodes;
            if !edges.contains(&ordered(a, b)) {
                return Err(MeshError::DanglingFacet { facet: f, a, b });
            }
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn elements(&self) -> &[[usize; 4]] {
        &self.elements
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn node_sets(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.node_sets
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn element_coords(&self, e: usize) -> [[f64; 2]; 4] {
        self.elements[e].map(|n| self.nodes[n])
    }

    pub fn facets_with_tag<'a>(&'a self, tag: &'a str) -> impl Iterator<Item = &'a Facet> + 'a {
        self.facets.iter().filter(move |f| f.tag == tag)
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.node_sets.contains_key(tag) || self.facets.iter().any(|f| f.tag == tag)
    }

    /// Nodes addressed by `tag`: the node set of that name if present,
    /// otherwise the nodes of facets carrying the tag. Sorted, unique.
    pub fn nodes_of_tag(&self, tag: &str) -> Result<Vec<usize>, MeshError> {
        let mut out: Vec<usize> = if let Some(set) = self.node_sets.get(tag) {
            set.clone()
        } else {
            let v: Vec<usize> = self.facets_with_tag(tag).flat_map(|f| f.nodes).collect();
            if v.is_empty() {
                return Err(MeshError::UnknownTag(tag.to_string()));
            }
            v
        };
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    pub fn with_node_set(mut self, name: &str, nodes: Vec<usize>) -> Result<Mesh, MeshError> {
        self.node_sets.insert(name.to_string(), nodes);
        self.validate()?;
        Ok(self)
    }

    /// `(min, max)` corners of the bounding box.
    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.nodes {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    pub fn element_area(&self, e: usize) -> f64 {
        let p = self.element_coords(e);
        0.5 * (0..4)
            .map(|i| {
                let (a, b) = (p[i], p[(i + 1) % 4]);
                a[0] * b[1] - b[0] * a[1]
            })
            .sum::<f64>()
    }

    pub fn area(&self) -> f64 {
        (0..self.num_elements()).map(|e| self.element_area(e)).sum()
    }

    /// Whether `x` lies in the closure of some element (convex quads).
    pub fn contains_point(&self, x: [f64; 2], tol: f64) -> bool {
        (0..self.num_elements()).any(|e| {
            let p = self.element_coords(e);
            (0..4).all(|i| {
                let (a, b) = (p[i], p[(i + 1) % 4]);
                let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
                let cross = (b[0] - a[0]) * (x[1] - a[1]) - (b[1] - a[1]) * (x[0] - a[0]);
                cross >= -tol * len
            })
        })
    }

    /// Nodes on edges owned by exactly one element.
    pub fn boundary_nodes(&self) -> HashSet<usize> {
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for c in &self.elements {
            for i in 0..4 {
                *count.entry(ordered(c[i], c[(i + 1) % 4])).or_default() += 1;
            }
        }
        count
            .into_iter()
            .filter(|(_, k)| *k == 1)
            .flat_map(|((a, b), _)| [a, b])
            .collect()
    }

    /// Smallest element edge length.
    pub fn min_edge_length(&self) -> f64 {
        let mut h = f64::INFINITY;
        for e in 0..self.num_elements() {
            let p = self.element_coords(e);
            for i in 0..4 {
                let (a, b) = (p[i], p[(i + 1) % 4]);
                h = h.min(((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt());
            }
        }
        h
    }
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Uniform `nx × ny` grid on `[0, width] × [0, height]`.
///
/// Boundary facets are tagged `left`, `right`, `bottom`, `top`; node sets of
/// the same names exist, plus single-node sets `corner_bl`, `corner_br`,
/// `corner_tl`, `corner_tr`.
pub fn generate_rect(width: f64, height: f64, nx: usize, ny: usize) -> Result<Mesh, MeshError> {
    if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
        return Err(MeshError::InvalidDimensions(format!(
            "width and height must be positive, got {width} x {height}"
        )));
    }
    if nx == 0 || ny == 0 {
        return Err(MeshError::InvalidDimensions(format!(
            "element counts must be at least 1, got {nx} x {ny}"
        )));
    }
    let xs: Vec<f64> = (0..=nx).map(|i| width * i as f64 / nx as f64).collect();
    let ys: Vec<f64> = (0..=ny).map(|j| height * j as f64 / ny as f64).collect();
    generate_tensor_grid(&xs, &ys)
}

/// Tensor-product grid through the given strictly increasing coordinate
/// lines. Node `(i, j)` has index `j * xs.len() + i`.
pub fn generate_tensor_grid(xs: &[f64], ys: &[f64]) -> Result<Mesh, MeshError> {
    if xs.len() < 2 || ys.len() < 2 {
        return Err(MeshError::InvalidDimensions("need at least two grid lines per axis".into()));
    }
    let increasing = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
    if !increasing(xs) || !increasing(ys) {
        return Err(MeshError::InvalidDimensions("grid lines must be strictly increasing".into()));
    }
    let (nx, ny) = (xs.len() - 1, ys.len() - 1);
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for &y in ys {
        for &x in xs {
            nodes.push([x, y]);
        }
    }
    let mut elements = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            elements.push([id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let mut facets = Vec::new();
    for i in 0..nx {
        facets.push(Facet { nodes: [id(i, 0), id(i + 1, 0)], tag: "bottom".into() });
    }
    for j in 0..ny {
        facets.push(Facet { nodes: [id(nx, j), id(nx, j + 1)], tag: "right".into() });
    }
    for i in (0..nx).rev() {
        facets.push(Facet { nodes: [id(i + 1, ny), id(i, ny)], tag: "top".into() });
    }
    for j in (0..ny).rev() {
        facets.push(Facet { nodes: [id(0, j + 1), id(0, j)], tag: "left".into() });
    }
    let mut node_sets = BTreeMap::new();
    node_sets.insert("bottom".to_string(), (0..=nx).map(|i| id(i, 0)).collect());
    node_sets.insert("top".to_string(), (0..=nx).map(|i| id(i, ny)).collect());
    node_sets.insert("left".to_string(), (0..=ny).map(|j| id(0, j)).collect());
    node_sets.insert("right".to_string(), (0..=ny).map(|j| id(nx, j)).collect());
    node_sets.insert("corner_bl".to_string(), vec![id(0, 0)]);
    node_sets.insert("corner_br".to_string(), vec![id(nx, 0)]);
    node_sets.insert("corner_tl".to_string(), vec![id(0, ny)]);
    node_sets.insert("corner_tr".to_string(), vec![id(nx, ny)]);
    Mesh::new(nodes, elements, facets, node_sets)
}

/// `n` intervals on `[0, length]` whose sizes grow geometrically by `ratio`
/// away from 0.
pub fn geometric_lines(length: f64, n: usize, ratio: f64) -> Vec<f64> {
    let sizes: Vec<f64> = (0..n).map(|k| ratio.powi(k as i32)).collect();
    let total: f64 = sizes.iter().sum();
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for s in &sizes[..n - 1] {
        acc += s;
        out.push(length * acc / total);
    }
    out.push(length);
    out
}

/// `n` intervals on `[0, length]`: uniform spacing close to `h` on
/// `[lo, hi]`, geometric growth from that spacing towards both ends.
pub fn refined_lines(length: f64, n: usize, lo: f64, hi: f64, h: f64) -> Result<Vec<f64>, MeshError> {
    let bad = |msg: String| Err(MeshError::InvalidDimensions(msg));
    if !(0.0 <= lo && lo < hi && hi <= length && h > 0.0) {
        return bad(format!("refinement zone [{lo}, {hi}] with spacing {h} does not fit in [0, {length}]"));
    }
    let n_fine = ((hi - lo) / h).ceil() as usize;
    let sides = [lo, length - hi];
    let needed = sides.iter().filter(|&&l| l > 0.0).count();
    if n_fine + needed > n {
        return bad(format!("{n} intervals cannot hold {n_fine} fine intervals plus the graded parts"));
    }
    let hf = (hi - lo) / n_fine as f64;
    let rest = n - n_fine;
    let weights: Vec<f64> = sides.iter().map(|&l| if l > 0.0 { (1.0 + l / hf).ln() } else { 0.0 }).collect();
    let wsum: f64 = weights.iter().sum();
    let mut counts = [0usize; 2];
    if wsum > 0.0 {
        for i in 0..2 {
            if sides[i] > 0.0 {
                counts[i] = ((rest as f64 * weights[i] / wsum).round() as usize).max(1);
            }
        }
        // fix rounding so that the counts add up
        while counts[0] + counts[1] > rest {
            let i = if counts[0] >= counts[1] { 0 } else { 1 };
            counts[i] -= 1;
        }
        while counts[0] + counts[1] < rest {
            let i = if weights[0] >= weights[1] { 0 } else { 1 };
            counts[i] += 1;
        }
    } else if rest > 0 {
        return bad("refinement zone covers the whole interval; use uniform lines".into());
    }
    // growth ratio r with hf·(r + r² + … + rᵐ) = side length
    let graded = |side: f64, m: usize| -> Vec<f64> {
        let total = |r: f64| (1..=m).map(|k| hf * r.powi(k as i32)).sum::<f64>();
        let (mut a, mut b) = (1e-3_f64, 1e3_f64);
        for _ in 0..200 {
            let c = (a * b).sqrt();
            if total(c) < side {
                a = c;
            } else {
                b = c;
            }
        }
        geometric_lines(side, m, (a * b).sqrt())
    };
    let mut out = Vec::with_capacity(n + 1);
    if counts[0] > 0 {
        let left = graded(lo, counts[0]);
        out.extend(left.iter().rev().map(|x| lo - x));
        out.pop();
    }
    out.extend((0..=n_fine).map(|k| if k == n_fine { hi } else { lo + hf * k as f64 }));
    if counts[1] > 0 {
        let right = graded(length - hi, counts[1]);
        out.extend(right[1..].iter().map(|x| hi + x));
    }
    if let Some(first) = out.first_mut() {
        *first = 0.0;
    }
    if let Some(last) = out.last_mut() {
        *last = length;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NotchMode {
    /// Initial phase field `v₀ = 0` on nodes within `half_width` of the
    /// notch segment.
    PhaseField { half_width: f64 },
    /// Geometric cut: nodes on the segment are duplicated, except interior
    /// crack tips.
    Slit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NotchSpec {
    pub tip: [f64; 2],
    /// Direction from the notch mouth towards the tip.
    pub direction: [f64; 2],
    pub length: f64,
    pub mode: NotchMode,
}

impl NotchSpec {
    fn unit_direction(&self) -> Result<[f64; 2], MeshError> {
        let n = (self.direction[0].powi(2) + self.direction[1].powi(2)).sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(MeshError::InvalidNotch("direction must be a nonzero vector".into()));
        }
        Ok([self.direction[0] / n, self.direction[1] / n])
    }

    pub fn start(&self) -> Result<[f64; 2], MeshError> {
        let d = self.unit_direction()?;
        Ok([self.tip[0] - self.length * d[0], self.tip[1] - self.length * d[1]])
    }

    /// Phase-field bands narrower than `2 eps` cannot hold a regularized crack.
    pub fn band_too_narrow(&self, eps: f64) -> bool {
        match self.mode {
            NotchMode::PhaseField { half_width } => 2.0 * half_width < 2.0 * eps,
            NotchMode::Slit => false,
        }
    }

    pub fn distance(&self, x: [f64; 2]) -> Result<f64, MeshError> {
        Ok(segment_distance(x, self.start()?, self.tip))
    }
}

fn segment_distance(x: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ax = [x[0] - a[0], x[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 { ((ax[0] * ab[0] + ax[1] * ab[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let p = [a[0] + t * ab[0], a[1] + t * ab[1]];
    ((x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2)).sqrt()
}

#[derive(Debug, Clone)]
pub struct NotchedMesh {
    pub mesh: Mesh,
    /// Initial phase field, one value per node of `mesh`.
    pub v0: Vec<f64>,
}

/// Inserts a notch, either as a zero band of the initial phase field or as
/// a geometric slit. `eps` (if given) is only used for the band-width warning.
pub fn apply_notch(mesh: &Mesh, spec: &NotchSpec, eps: Option<f64>) -> Result<NotchedMesh, MeshError> {
    if !(spec.length >= 0.0 && spec.length.is_finite()) {
        return Err(MeshError::InvalidNotch(format!("length must be non-negative, got {}", spec.length)));
    }
    let start = spec.start()?;
    let (lo, hi) = mesh.bounding_box();
    let diag = ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt();
    let tol = 1e-9 * diag;
    for (name, p) in [("tip", spec.tip), ("mouth", start)] {
        if !mesh.contains_point(p, tol) {
            return Err(MeshError::InvalidNotch(format!(
                "{name} ({}, {}) lies outside the domain",
                p[0], p[1]
            )));
        }
    }
    if let Some(eps) = eps {
        if spec.band_too_narrow(eps) {
            log::warn!("notch band is narrower than 2*eps = {}", 2.0 * eps);
        }
    }
    match spec.mode {
        NotchMode::PhaseField { half_width } => {
            let v0 = mesh
                .nodes()
                .iter()
                .map(|&x| if segment_distance(x, start, spec.tip) <= half_width + tol { 0.0 } else { 1.0 })
                .collect();
            Ok(NotchedMesh { mesh: mesh.clone(), v0 })
        }
        NotchMode::Slit => slit(mesh, start, spec.tip, tol),
    }
}

fn slit(mesh: &Mesh, start: [f64; 2], tip: [f64; 2], tol: f64) -> Result<NotchedMesh, MeshError> {
    let d = [tip[0] - start[0], tip[1] - start[1]];
    let normal = [-d[1], d[0]];
    let boundary = mesh.boundary_nodes();
    let near = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt() <= tol;

    let on_cut: Vec<usize> = (0..mesh.num_nodes())
        .filter(|&i| segment_distance(mesh.nodes[i], start, tip) <= tol)
        .collect();
    let on_cut_set: HashSet<usize> = on_cut.iter().copied().collect();

    let mut nodes = mesh.nodes.clone();
    let mut duplicate: HashMap<usize, usize> = HashMap::new();
    for &i in &on_cut {
        let x = mesh.nodes[i];
        let is_endpoint = near(x, start) || near(x, tip);
        if is_endpoint && !boundary.contains(&i) {
            continue; // interior crack tip stays shared
        }
        duplicate.insert(i, nodes.len());
        nodes.push(x);
    }
    if duplicate.is_empty() {
        return Ok(NotchedMesh { mesh: mesh.clone(), v0: vec![1.0; mesh.num_nodes()] });
    }

    let mut elements = mesh.elements.clone();
    for (e, conn) in elements.iter_mut().enumerate() {
        if !conn.iter().any(|n| duplicate.contains_key(n)) {
            continue;
        }
        let p = mesh.element_coords(e);
        let c = [p.iter().map(|q| q[0]).sum::<f64>() / 4.0, p.iter().map(|q| q[1]).sum::<f64>() / 4.0];
        let side = (c[0] - start[0]) * normal[0] + (c[1] - start[1]) * normal[1];
        if side > 0.0 {
            for n in conn.iter_mut() {
                if let Some(&dup) = duplicate.get(n) {
                    *n = dup;
                }
            }
        }
    }

    let edges: HashSet<(usize, usize)> = elements
        .iter()
        .flat_map(|c| (0..4).map(move |i| ordered(c[i], c[(i + 1) % 4])))
        .collect();
    let remap = |n: usize| duplicate.get(&n).copied().unwrap_or(n);
    let mut facets = Vec::with_capacity(mesh.facets.len());
    for f in &mesh.facets {
        let [a, b] = f.nodes;
        let candidates = [[a, b], [remap(a), b], [a, remap(b)], [remap(a), remap(b)]];
        let nodes = candidates
            .into_iter()
            .find(|[x, y]| edges.contains(&ordered(*x, *y)))
            .unwrap_or([a, b]);
        facets.push(Facet { nodes, tag: f.tag.clone() });
    }
    // crack faces
    for conn in &mesh.elements {
        for i in 0..4 {
            let (a, b) = (conn[i], conn[(i + 1) % 4]);
            if on_cut_set.contains(&a) && on_cut_set.contains(&b) && (a < b) {
                let lower = [a, b];
                let upper = [remap(a), remap(b)];
                for face in [lower, upper] {
                    if edges.contains(&ordered(face[0], face[1]))
                        && !facets.iter().any(|f| f.tag == "notch" && ordered(f.nodes[0], f.nodes[1]) == ordered(face[0], face[1]))
                    {
                        facets.push(Facet { nodes: face, tag: "notch".into() });
                    }
                }
            }
        }
    }
    let mut node_sets = mesh.node_sets.clone();
    for set in node_sets.values_mut() {
        let extra: Vec<usize> = set.iter().filter_map(|n| duplicate.get(n).copied()).collect();
        set.extend(extra);
    }
    let n = nodes.len();
    let mesh = Mesh::new(nodes, elements, facets, node_sets)?;
    Ok(NotchedMesh { mesh, v0: vec![1.0; n] })
}

/// Serializes in the `pfrac-mesh v1` format. Output is deterministic.
pub fn mesh_to_string(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{MESH_HEADER}");
    let _ = writeln!(s, "nodes {}", mesh.nodes.len());
    for p in &mesh.nodes {
        let _ = writeln!(s, "{} {}", p[0], p[1]);
    }
    let _ = writeln!(s, "elements {}", mesh.elements.len());
    for c in &mesh.elements {
        let _ = writeln!(s, "{} {} {} {}", c[0], c[1], c[2], c[3]);
    }
    let _ = writeln!(s, "facets {}", mesh.facets.len());
    for f in &mesh.facets {
        let _ = writeln!(s, "{} {} {}", f.nodes[0], f.nodes[1], f.tag);
    }
    for (name, set) in &mesh.node_sets {
        let _ = writeln!(s, "nodeset {} {}", name, set.len());
        let line: Vec<String> = set.iter().map(|i| i.to_string()).collect();
        let _ = writeln!(s, "{}", line.join(" "));
    }
    s
}

pub fn export_mesh(mesh: &Mesh, path: &Path) -> Result<(), MeshError> {
    crate::io::write_atomic(path, mesh_to_string(mesh).as_bytes())
        .map_err(|source| MeshError::Io { path: path.display().to_string(), source })
}

pub fn import_mesh(path: &Path) -> Result<Mesh, MeshError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| MeshError::Io { path: path.display().to_string(), source })?;
    parse_mesh(&text)
}

struct Tokens<'a> {
    items: Vec<(usize, &'a str)>,
    pos: usize,
    last_line: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let mut items = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let content = line.split('#').next().unwrap_or("");
            for tok in content.split_whitespace() {
                items.push((i + 1, tok));
            }
        }
        let last_line = text.lines().count().max(1);
        Tokens { items, pos: 0, last_line }
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str), MeshError> {
        let t = self.items.get(self.pos).copied().ok_or_else(|| MeshError::Parse {
            line: self.last_line,
            msg: format!("unexpected end of file, expected {what}"),
        })?;
        self.pos += 1;
        Ok(t)
    }

    fn peek(&self) -> Option<(usize, &'a str)> {
        self.items.get(self.pos).copied()
    }

    fn keyword(&mut self, kw: &str) -> Result<(), MeshError> {
        let (line, t) = self.next(kw)?;
        if t != kw {
            return Err(MeshError::Parse { line, msg: format!("expected '{kw}', found '{t}'") });
        }
        Ok(())
    }

    fn parse<T: std::str::FromStr>(&mut self, what: &str) -> Result<T, MeshError> {
        let (line, t) = self.next(what)?;
        t.parse()
            .map_err(|_| MeshError::Parse { line, msg: format!("invalid {what} '{t}'") })
    }
}

pub fn parse_mesh(text: &str) -> Result<Mesh, MeshError> {
    let mut tk = Tokens::new(text);
    let (line, a) = tk.next("header")?;
    let (_, b) = tk.next("header version")?;
    if format!("{a} {b}") != MESH_HEADER {
        return Err(MeshError::Parse { line, msg: format!("expected header '{MESH_HEADER}'") });
    }
    tk.keyword("nodes")?;
    let n: usize = tk.parse("node count")?;
    let mut nodes = Vec::with_capacity(n);
    for _ in 0..n {
        nodes.push([tk.parse("x coordinate")?, tk.parse("y coordinate")?]);
    }
    tk.keyword("elements")?;
    let m: usize = tk.parse("element count")?;
    let mut elements = Vec::with_capacity(m);
    for _ in 0..m {
        elements.push([
            tk.parse("node index")?,
            tk.parse("node index")?,
            tk.parse("node index")?,
            tk.parse("node index")?,
        ]);
    }
    tk.keyword("facets")?;
    let k: usize = tk.parse("facet count")?;
    let mut facets = Vec::with_capacity(k);
    for _ in 0..k {
        let a = tk.parse("node index")?;
        let b = tk.parse("node index")?;
        let (_, tag) = tk.next("facet tag")?;
        facets.push(Facet { nodes: [a, b], tag: tag.to_string() });
    }
    let mut node_sets = BTreeMap::new();
    while tk.peek().is_some() {
        tk.keyword("nodeset")?;
        let (_, name) = tk.next("node set name")?;
        let count: usize = tk.parse("node set size")?;
        let mut set = Vec::with_capacity(count);
        for _ in 0..count {
            set.push(tk.parse("node index")?);
        }
        node_sets.insert(name.to_string(), set);
    }
    Mesh::new(nodes, elements, facets, node_sets)
}
