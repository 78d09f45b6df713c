//! Bounded open sets and the quadrature rules that realize every L² inner
//! product in the crate.
//!
//! Two shapes are supported: N-dimensional boxes `(0, L_1) × … × (0, L_N)`
//! and simple planar polygons. Boxes carry a cell-centered (midpoint)
//! tensor rule; polygons carry the uniform lattice of spacing `h` restricted
//! to the strict interior, each node weighted by `h²`. Both rules only place
//! nodes strictly inside the set, where Dirichlet eigenfunctions are nonzero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_NODES_PER_AXIS: usize = 64;

/// Relative distance (in units of `h`) below which a lattice point counts as
/// lying on a polygon edge.
const EDGE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Box { lengths: Vec<f64> },
    Polygon2d { vertices: Vec<[f64; 2]> },
}

/// Regular grid structure behind a quadrature rule, needed to assemble
/// finite-difference stencils.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    /// Grid spacing per axis.
    pub spacing: Vec<f64>,
    /// Number of lattice slots per axis (slot indices run `0..extent`).
    pub extent: Vec<usize>,
    /// Multi-index of every quadrature node, in node order.
    pub indices: Vec<Vec<usize>>,
}

impl Lattice {
    /// Maps each lattice slot to its node, if the slot is interior.
    pub fn slot_map(&self) -> Vec<Option<usize>> {
        let total: usize = self.extent.iter().product();
        let mut map = vec![None; total];
        for (node, idx) in self.indices.iter().enumerate() {
            map[self.flat(idx)] = Some(node);
        }
        map
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.extent)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    shape: Shape,
    dim: usize,
    /// Node coordinates, `dim` values per node.
    nodes: Vec<f64>,
    weights: Vec<f64>,
    lattice: Option<Lattice>,
    nodes_per_axis: Option<usize>,
    h: Option<f64>,
}

impl Domain {
    pub fn make_box(lengths: &[f64]) -> Result<Self> {
        Self::make_box_with_resolution(lengths, DEFAULT_NODES_PER_AXIS)
    }

    /// Box with a midpoint rule of `nodes_per_axis` cells along every axis.
    pub fn make_box_with_resolution(lengths: &[f64], nodes_per_axis: usize) -> Result<Self> {
        validate_box(lengths)?;
        if nodes_per_axis == 0 {
            return Err(Error::InvalidDomain("nodes_per_axis must be at least 1".into()));
        }
        let dim = lengths.len();
        let n = nodes_per_axis;
        let spacing: Vec<f64> = lengths.iter().map(|l| l / n as f64).collect();
        let cell_volume: f64 = spacing.iter().product();
        let count = n.pow(dim as u32);
        let mut nodes = Vec::with_capacity(count * dim);
        for idx in MultiIndex::new(vec![n; dim]) {
            for (axis, &i) in idx.iter().enumerate() {
                nodes.push((i as f64 + 0.5) * spacing[axis]);
            }
        }
        Ok(Self {
            shape: Shape::Box {
                lengths: lengths.to_vec(),
            },
            dim,
            nodes,
            weights: vec![cell_volume; count],
            lattice: None,
            nodes_per_axis: Some(n),
            h: None,
        })
    }

    /// Uniform lattice of spacing `h` anchored at the bounding-box minimum,
    /// keeping the points strictly inside the polygon.
    pub fn make_polygon2d(vertices: &[[f64; 2]], h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidDomain(format!("grid spacing must be positive, got {h}")));
        }
        let vertices = validate_polygon(vertices)?;
        let (min, max) = bounding_box(&vertices);
        let min_side = (max[0] - min[0]).min(max[1] - min[1]);
        if h >= 0.5 * min_side {
            return Err(Error::InvalidDomain(format!(
                "grid spacing {h} must be smaller than half the smallest bounding-box side ({min_side})"
            )));
        }
        let (points, indices, extent) = lattice_points(&vertices, h);
        if points.len() < 4 {
            return Err(Error::InvalidDomain(format!(
                "grid spacing {h} leaves only {} interior nodes (need at least 4)",
                points.len()
            )));
        }
        let count = points.len();
        Ok(Self {
            shape: Shape::Polygon2d { vertices },
            dim: 2,
            nodes: points.into_iter().flatten().collect(),
            weights: vec![h * h; count],
            lattice: Some(Lattice {
                spacing: vec![h, h],
                extent: extent.to_vec(),
                indices: indices.into_iter().map(|i| i.to_vec()).collect(),
            }),
            nodes_per_axis: None,
            h: Some(h),
        })
    }

    /// The vertex-centered finite-difference grid for this domain.
    ///
    /// Polygons already live on a lattice and are returned unchanged. A box
    /// with `n` cells per axis becomes the `(n - 1)^N` interior vertices of the
    /// uniform grid of spacing `L_i / n`, weighted by the cell volume.
    pub fn to_lattice(&self) -> Result<Self> {
        match &self.shape {
            Shape::Polygon2d { .. } => Ok(self.clone()),
            Shape::Box { lengths } => {
                let n = self.nodes_per_axis.unwrap_or(DEFAULT_NODES_PER_AXIS);
                if n < 2 {
                    return Err(Error::InvalidDomain(
                        "a box lattice needs at least 2 cells per axis".into(),
                    ));
                }
                let spacing: Vec<f64> = lengths.iter().map(|l| l / n as f64).collect();
                let cell_volume: f64 = spacing.iter().product();
                let extent = vec![n + 1; self.dim];
                let mut nodes = Vec::new();
                let mut indices = Vec::new();
                for idx in MultiIndex::new(vec![n - 1; self.dim]) {
                    let slot: Vec<usize> = idx.iter().map(|i| i + 1).collect();
                    for (axis, &i) in slot.iter().enumerate() {
                        nodes.push(i as f64 * spacing[axis]);
                    }
                    indices.push(slot);
                }
                let count = indices.len();
                Ok(Self {
                    shape: self.shape.clone(),
                    dim: self.dim,
                    nodes,
                    weights: vec![cell_volume; count],
                    lattice: Some(Lattice {
                        spacing,
                        extent,
                        indices,
                    }),
                    nodes_per_axis: Some(n),
                    h: None,
                })
            }
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node_count(&self) -> usize {
        self.weights.len()
    }

    pub fn node(&self, q: usize) -> &[f64] {
        &self.nodes[q * self.dim..(q + 1) * self.dim]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> {
        self.nodes.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn lattice(&self) -> Option<&Lattice> {
        self.lattice.as_ref()
    }

    pub fn nodes_per_axis(&self) -> Option<usize> {
        self.nodes_per_axis
    }

    pub fn grid_spacing(&self) -> Option<f64> {
        self.h
    }

    /// Σ w_q · sample_q.
    pub fn integrate(&self, samples: &[f64]) -> Result<f64> {
        if samples.len() != self.weights.len() {
            return Err(Error::LengthMismatch {
                expected: self.weights.len(),
                actual: samples.len(),
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(samples)
            .map(|(w, s)| w * s)
            .sum())
    }

    /// Samples `f` at every node.
    pub fn sample(&self, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
        self.nodes().map(&mut f).collect()
    }

    /// Exact Lebesgue measure |Ω|.
    pub fn measure(&self) -> f64 {
        match &self.shape {
            Shape::Box { lengths } => lengths.iter().product(),
            Shape::Polygon2d { vertices } => signed_area(vertices).abs(),
        }
    }

    /// Σ w_q, the quadrature's approximation of |Ω|.
    pub fn quadrature_measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn centroid(&self) -> Vec<f64> {
        match &self.shape {
            Shape::Box { lengths } => lengths.iter().map(|l| 0.5 * l).collect(),
            Shape::Polygon2d { vertices } => {
                let area = signed_area(vertices);
                let (mut cx, mut cy) = (0.0, 0.0);
                for (p, q) in edges(vertices) {
                    let cross = p[0] * q[1] - q[0] * p[1];
                    cx += (p[0] + q[0]) * cross;
                    cy += (p[1] + q[1]) * cross;
                }
                vec![cx / (6.0 * area), cy / (6.0 * area)]
            }
        }
    }

    /// Index of the quadrature node closest to `point` (lowest index on ties).
    pub fn nearest_node(&self, point: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (q, x) in self.nodes().enumerate() {
            let d: f64 = x.iter().zip(point).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.1 {
                best = (q, d);
            }
        }
        best.0
    }

    /// Boxes are always convex; polygons are checked by edge turn direction.
    pub fn is_convex(&self) -> bool {
        match &self.shape {
            Shape::Box { .. } => true,
            Shape::Polygon2d { vertices } => {
                let n = vertices.len();
                (0..n).all(|i| {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    let c = vertices[(i + 2) % n];
                    cross(a, b, c) >= 0.0
                })
            }
        }
    }
}

/// Lattice points (spacing `h`, anchored at the bounding-box minimum) that lie
/// strictly inside the polygon. Performs no resolution checks.
pub fn interior_lattice_points(vertices: &[[f64; 2]], h: f64) -> Vec<[f64; 2]> {
    lattice_points(vertices, h).0
}

fn lattice_points(vertices: &[[f64; 2]], h: f64) -> (Vec<[f64; 2]>, Vec<[usize; 2]>, [usize; 2]) {
    let (min, max) = bounding_box(vertices);
    let nx = ((max[0] - min[0]) / h).ceil() as usize + 1;
    let ny = ((max[1] - min[1]) / h).ceil() as usize + 1;
    let tol = EDGE_TOLERANCE * h;
    let mut points = Vec::new();
    let mut indices = Vec::new();
    for j in 1..ny {
        for i in 1..nx {
            let p = [min[0] + i as f64 * h, min[1] + j as f64 * h];
            if strictly_inside(vertices, p, tol) {
                points.push(p);
                indices.push([i, j]);
            }
        }
    }
    (points, indices, [nx + 1, ny + 1])
}

fn strictly_inside(vertices: &[[f64; 2]], p: [f64; 2], tol: f64) -> bool {
    if edges(vertices).any(|(a, b)| segment_distance(a, b, p) <= tol) {
        return false;
    }
    let mut inside = false;
    for (a, b) in edges(vertices) {
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn validate_box(lengths: &[f64]) -> Result<()> {
    if lengths.is_empty() {
        return Err(Error::InvalidDomain("box needs at least one axis".into()));
    }
    if let Some(l) = lengths.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(Error::InvalidDomain(format!("box lengths must be positive, got {l}")));
    }
    Ok(())
}

/// Checks simplicity and returns the vertices in counterclockwise order.
fn validate_polygon(vertices: &[[f64; 2]]) -> Result<Vec<[f64; 2]>> {
    let n = vertices.len();
    if n < 3 {
        return Err(Error::InvalidDomain(format!("polygon needs at least 3 vertices, got {n}")));
    }
    if vertices.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::InvalidDomain("polygon vertices must be finite".into()));
    }
    let area = signed_area(vertices);
    if area.abs() <= f64::EPSILON {
        return Err(Error::InvalidDomain("polygon has zero area".into()));
    }
    for i in 0..n {
        let (a, b) = (vertices[i], vertices[(i + 1) % n]);
        if a == b {
            return Err(Error::InvalidDomain(format!("repeated vertex at index {i}")));
        }
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            let (c, d) = (vertices[j], vertices[(j + 1) % n]);
            if adjacent {
                // Adjacent edges share one endpoint; they may only meet there.
                let shared = if j == i + 1 { b } else { a };
                let (other_a, other_b) = if j == i + 1 { (a, d) } else { (b, c) };
                if cross(other_a, shared, other_b) == 0.0
                    && dot_sub(other_a, shared, other_b) > 0.0
                {
                    return Err(Error::InvalidDomain(format!(
                        "edges {i} and {j} fold back on each other"
                    )));
                }
            } else if segments_intersect(a, b, c, d) {
                return Err(Error::InvalidDomain(format!(
                    "polygon is self-intersecting (edges {i} and {j})"
                )));
            }
        }
    }
    let mut out = vertices.to_vec();
    if area < 0.0 {
        out.reverse();
    }
    Ok(out)
}

fn edges(vertices: &[[f64; 2]]) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
    let n = vertices.len();
    (0..n).map(move |i| (vertices[i], vertices[(i + 1) % n]))
}

fn signed_area(vertices: &[[f64; 2]]) -> f64 {
    0.5 * edges(vertices)
        .map(|(p, q)| p[0] * q[1] - q[0] * p[1])
        .sum::<f64>()
}

fn bounding_box(vertices: &[[f64; 2]]) -> ([f64; 2], [f64; 2]) {
    let mut min = [f64::INFINITY; 2];
    let mut max = [f64::NEG_INFINITY; 2];
    for v in vertices {
        for k in 0..2 {
            min[k] = min[k].min(v[k]);
            max[k] = max[k].max(v[k]);
        }
    }
    (min, max)
}

/// z-component of (b - a) × (c - b).
fn cross(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
}

/// (a - s) · (b - s).
fn dot_sub(a: [f64; 2], s: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - s[0]) * (b[0] - s[0]) + (a[1] - s[1]) * (b[1] - s[1])
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

fn segments_intersect(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let (o1, o2) = (orient(a, b, c), orient(a, b, d));
    let (o3, o4) = (orient(c, d, a), orient(c, d, b));
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

fn segment_distance(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0);
    let dx = ap[0] - t * ab[0];
    let dy = ap[1] - t * ab[1];
    (dx * dx + dy * dy).sqrt()
}

/// Row-major iteration over `0..extent[0] × … × 0..extent[N-1]`.
pub(crate) struct MultiIndex {
    extent: Vec<usize>,
    current: Option<Vec<usize>>,
}

impl MultiIndex {
    pub(crate) fn new(extent: Vec<usize>) -> Self {
        let current = if extent.iter().all(|&n| n > 0) {
            Some(vec![0; extent.len()])
        } else {
            None
        };
        Self { extent, current }
    }
}

impl Iterator for MultiIndex {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let cur = self.current.as_mut().unwrap();
        let mut axis = cur.len();
        loop {
            if axis == 0 {
                self.current = None;
                break;
            }
            axis -= 1;
            cur[axis] += 1;
            if cur[axis] < self.extent[axis] {
                break;
            }
            cur[axis] = 0;
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const UNIT_SQUARE: [[f64; 2]; 4] = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];

    #[test]
    fn box_measure_is_exact_for_constants() {
        let d = Domain::make_box(&[PI, PI]).unwrap();
        assert_eq!(d.node_count(), 64 * 64);
        assert!((d.quadrature_measure() - PI * PI).abs() < 1e-12);
        let ones = vec![1.0; d.node_count()];
        assert!((d.integrate(&ones).unwrap() - PI * PI).abs() < 1e-12);

        let line = Domain::make_box(&[PI]).unwrap();
        assert!((line.measure() - PI).abs() < 1e-15);
    }

    #[test]
    fn first_mode_has_unit_norm() {
        let d = Domain::make_box(&[PI, PI]).unwrap();
        let e1 = d.sample(|x| 2.0 / PI * x[0].sin() * x[1].sin());
        let sq: Vec<f64> = e1.iter().map(|v| v * v).collect();
        assert!((d.integrate(&sq).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn sine_integral_on_interval() {
        let d = Domain::make_box(&[PI]).unwrap();
        let s = d.sample(|x| x[0].sin());
        assert!((d.integrate(&s).unwrap() - 2.0).abs() < 1e-3);
        assert_eq!(d.integrate(&vec![0.0; 64]).unwrap(), 0.0);
    }

    #[test]
    fn integrate_rejects_wrong_length() {
        let d = Domain::make_box(&[1.0]).unwrap();
        assert!(matches!(
            d.integrate(&[1.0, 2.0]),
            Err(Error::LengthMismatch { expected: 64, actual: 2 })
        ));
    }

    #[test]
    fn box_rejects_bad_lengths() {
        assert!(Domain::make_box(&[]).is_err());
        assert!(Domain::make_box(&[1.0, 0.0]).is_err());
        assert!(Domain::make_box(&[-1.0]).is_err());
    }

    #[test]
    fn midpoint_rule_is_second_order() {
        let exact = 4.0;
        let errs: Vec<f64> = [16, 32, 64]
            .iter()
            .map(|&n| {
                let d = Domain::make_box_with_resolution(&[PI, PI], n).unwrap();
                let f = d.sample(|x| x[0].sin() * x[1].sin());
                (d.integrate(&f).unwrap() - exact).abs()
            })
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn unit_square_lattice_has_81_nodes() {
        let d = Domain::make_polygon2d(&UNIT_SQUARE, 0.1).unwrap();
        // 9 × 9 interior lattice points; the boundary row x = 1 is excluded.
        assert_eq!(d.node_count(), 81);
        assert!((d.quadrature_measure() - 0.81).abs() < 1e-12);
        assert!(d.is_convex());
    }

    #[test]
    fn triangle_lattice_matches_integer_scan() {
        let tri = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        for m in [4usize, 8, 10, 20] {
            let h = 1.0 / m as f64;
            // (i/m, j/m) is strictly inside iff i, j ≥ 1 and i + j < m.
            let expected = (1..m)
                .flat_map(|i| (1..m).map(move |j| (i, j)))
                .filter(|(i, j)| i + j < m)
                .count();
            assert_eq!(interior_lattice_points(&tri, h).len(), expected, "m = {m}");
        }
        assert_eq!(interior_lattice_points(&tri, 0.25).len(), 3);
        assert!(matches!(
            Domain::make_polygon2d(&tri, 0.25),
            Err(Error::InvalidDomain(_))
        ));
    }

    #[test]
    fn coarse_spacing_is_rejected() {
        assert!(Domain::make_polygon2d(&UNIT_SQUARE, 1.0).is_err());
        assert!(Domain::make_polygon2d(&UNIT_SQUARE, 0.5).is_err());
    }

    #[test]
    fn self_intersection_is_rejected() {
        let bowtie = [[0.0, 0.0], [3.0, 2.0], [3.0, 0.0], [0.0, 1.0]];
        let err = Domain::make_polygon2d(&bowtie, 0.05).unwrap_err();
        assert!(err.to_string().contains("self-intersecting"), "{err}");
        assert!(Domain::make_polygon2d(&[[0.0, 0.0], [1.0, 0.0]], 0.1).is_err());
    }

    #[test]
    fn clockwise_input_is_normalized() {
        let mut cw = UNIT_SQUARE.to_vec();
        cw.reverse();
        let a = Domain::make_polygon2d(&cw, 0.1).unwrap();
        let b = Domain::make_polygon2d(&UNIT_SQUARE, 0.1).unwrap();
        assert_eq!(a.nodes, b.nodes);
        let Shape::Polygon2d { vertices } = a.shape() else { unreachable!() };
        assert!(signed_area(vertices) > 0.0);
    }

    #[test]
    fn l_shape_is_not_convex() {
        let l = [[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]];
        let d = Domain::make_polygon2d(&l, 0.1).unwrap();
        assert!(!d.is_convex());
        assert!((d.measure() - 3.0).abs() < 1e-12);
        let c = d.centroid();
        assert!((c[0] - 5.0 / 6.0).abs() < 1e-12 && (c[1] - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn box_lattice_is_vertex_centered() {
        let d = Domain::make_box_with_resolution(&[PI], 8).unwrap();
        let lat = d.to_lattice().unwrap();
        assert_eq!(lat.node_count(), 7);
        assert!((lat.node(0)[0] - PI / 8.0).abs() < 1e-15);
        assert_eq!(lat.lattice().unwrap().indices[0], vec![1]);
    }

    #[test]
    fn multi_index_is_row_major() {
        let v: Vec<_> = MultiIndex::new(vec![2, 3]).collect();
        assert_eq!(v.len(), 6);
        assert_eq!(v[1], vec![0, 1]);
        assert_eq!(v[3], vec![1, 0]);
        assert_eq!(MultiIndex::new(vec![0, 3]).count(), 0);
    }
}
