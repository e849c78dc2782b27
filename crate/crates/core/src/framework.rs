//! Framework representation, validation, and the constraint map.
//!
//! A framework couples combinatorics (which joints are connected) with
//! geometry (rest coordinates, rest lengths, pin flags). The configuration
//! of the free joints is a single stacked vector ordered by vertex
//! declaration order and then by axis, which fixes the column layout of the
//! rigidity matrix and the file format in one place.
//!
//! Validation is strict about combinatorial defects and about pins. The pin
//! test asks a precise question: is there a nonzero infinitesimal rigid-body
//! motion of the ambient space that vanishes at every pinned joint? Such a
//! motion survives into the rigidity-matrix nullspace (restricted to free
//! coordinates) and would make every subsequent rigidity verdict about
//! rigid-body bookkeeping instead of structure, so the framework is
//! rejected. Note that this is deliberately weaker than asking whether some
//! restricted rigid motion lies in the nullspace: a straight chain with
//! pinned ends has the free restriction of a translation in its nullspace,
//! yet its pins kill every actual rigid motion and the framework is fine.

use std::collections::HashMap;
use std::fmt;
use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::RigidityError;
use crate::linalg;
use crate::tol;

/// Serialized form of a framework: the on-disk JSON schema.
///
/// Unknown keys are rejected so that typos in input files fail loudly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameworkSpec {
    /// Ambient dimension, 2 or 3.
    pub dimension: usize,
    /// Joints in declaration order.
    pub vertices: Vec<VertexSpec>,
    /// Bars between joints.
    pub edges: Vec<EdgeSpec>,
}

/// One joint in the serialized schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexSpec {
    pub id: String,
    pub coords: Vec<f64>,
    pub pinned: bool,
}

/// One bar in the serialized schema. A missing length defaults to the
/// distance between the rest coordinates of the endpoints.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub u: String,
    pub v: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
}

/// A single validation defect. Each variant renders as one diagnostic line.
#[derive(Debug, Clone, Error)]
pub enum ValidationIssue {
    #[error("schema: {message}")]
    Schema { message: String },
    #[error("dimension must be 2 or 3, got {dimension}")]
    BadDimension { dimension: usize },
    #[error("vertex {id}: expected {expected} coordinates, got {got}")]
    CoordsDimension {
        id: String,
        expected: usize,
        got: usize,
    },
    #[error("duplicate vertex id {id}")]
    DuplicateVertexId { id: String },
    #[error("edge {u}-{v}: unknown vertex {missing}")]
    UnknownEndpoint { u: String, v: String, missing: String },
    #[error("edge {id}-{id}: endpoints must be distinct")]
    SelfLoop { id: String },
    #[error("duplicate edge {u}-{v}")]
    DuplicateEdge { u: String, v: String },
    #[error("edge {u}-{v}: rest length must be positive, got {length}{origin}")]
    NonpositiveLength {
        u: String,
        v: String,
        length: f64,
        origin: &'static str,
    },
    #[error("insufficient pins: {detail}")]
    InsufficientPins { detail: String },
}

/// All defects found while validating one framework description.
#[derive(Debug, Clone, Error)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

/// One joint of a validated framework.
#[derive(Debug, Clone)]
pub struct Vertex {
    pub id: String,
    pub rest: DVector<f64>,
    pub pinned: bool,
}

/// One bar of a validated framework, endpoints stored as vertex indices.
#[derive(Debug, Clone)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub rest_length: f64,
    /// Whether the length was given explicitly rather than defaulted.
    pub explicit: bool,
}

/// Stacked free-joint coordinates, ordered by vertex declaration order and
/// then by axis. Construct through [`Framework::configuration`] or
/// [`Framework::rest_configuration`] so the length is always right.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    values: DVector<f64>,
}

impl Configuration {
    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn into_values(self) -> DVector<f64> {
        self.values
    }
}

impl Deref for Configuration {
    type Target = DVector<f64>;

    fn deref(&self) -> &DVector<f64> {
        &self.values
    }
}

/// A validated pinned bar-and-joint framework.
#[derive(Debug, Clone)]
pub struct Framework {
    dimension: usize,
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    /// Per-vertex slot in the free-coordinate vector, None for pinned.
    free_slot: Vec<Option<usize>>,
    free_count: usize,
}

impl Framework {
    /// Validates a description and builds the framework. On success also
    /// returns human-readable warnings (currently only the prestress note
    /// for explicit lengths that do not match the rest geometry).
    pub fn from_spec(spec: &FrameworkSpec) -> Result<(Self, Vec<String>), ValidationReport> {
        let mut issues = Vec::new();

        if spec.dimension != 2 && spec.dimension != 3 {
            return Err(ValidationReport {
                issues: vec![ValidationIssue::BadDimension {
                    dimension: spec.dimension,
                }],
            });
        }
        let d = spec.dimension;

        let mut index: HashMap<&str, usize> = HashMap::new();
        for (i, v) in spec.vertices.iter().enumerate() {
            if index.insert(v.id.as_str(), i).is_some() {
                issues.push(ValidationIssue::DuplicateVertexId { id: v.id.clone() });
            }
            if v.coords.len() != d {
                issues.push(ValidationIssue::CoordsDimension {
                    id: v.id.clone(),
                    expected: d,
                    got: v.coords.len(),
                });
            }
        }

        let mut edges = Vec::with_capacity(spec.edges.len());
        let mut seen_pairs: HashMap<(usize, usize), ()> = HashMap::new();
        for e in &spec.edges {
            let ui = index.get(e.u.as_str()).copied();
            let vi = index.get(e.v.as_str()).copied();
            let (ui, vi) = match (ui, vi) {
                (Some(a), Some(b)) => (a, b),
                (missing_u, _) => {
                    let missing = if missing_u.is_none() { &e.u } else { &e.v };
                    issues.push(ValidationIssue::UnknownEndpoint {
                        u: e.u.clone(),
                        v: e.v.clone(),
                        missing: missing.clone(),
                    });
                    continue;
                }
            };
            if ui == vi {
                issues.push(ValidationIssue::SelfLoop { id: e.u.clone() });
                continue;
            }
            let key = (ui.min(vi), ui.max(vi));
            if seen_pairs.insert(key, ()).is_some() {
                issues.push(ValidationIssue::DuplicateEdge {
                    u: e.u.clone(),
                    v: e.v.clone(),
                });
                continue;
            }
            let (length, explicit, origin) = match e.length {
                Some(l) => (l, true, ""),
                None => {
                    // A defaulted length needs both coordinate lists intact.
                    if spec.vertices[ui].coords.len() != d
                        || spec.vertices[vi].coords.len() != d
                    {
                        continue;
                    }
                    let dist = spec.vertices[ui]
                        .coords
                        .iter()
                        .zip(&spec.vertices[vi].coords)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    (dist, false, " (defaulted from coordinates)")
                }
            };
            // The negated form also catches a NaN length.
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(length > 0.0) {
                issues.push(ValidationIssue::NonpositiveLength {
                    u: e.u.clone(),
                    v: e.v.clone(),
                    length,
                    origin,
                });
                continue;
            }
            edges.push(Edge {
                u: ui,
                v: vi,
                rest_length: length,
                explicit,
            });
        }

        let pinned_count = spec.vertices.iter().filter(|v| v.pinned).count();
        if pinned_count == 0 {
            issues.push(ValidationIssue::InsufficientPins {
                detail: "no pinned vertices".to_string(),
            });
        }

        if !issues.is_empty() {
            return Err(ValidationReport { issues });
        }

        let vertices: Vec<Vertex> = spec
            .vertices
            .iter()
            .map(|v| Vertex {
                id: v.id.clone(),
                rest: DVector::from_vec(v.coords.clone()),
                pinned: v.pinned,
            })
            .collect();

        let mut free_slot = Vec::with_capacity(vertices.len());
        let mut free_count = 0;
        for v in &vertices {
            if v.pinned {
                free_slot.push(None);
            } else {
                free_slot.push(Some(free_count));
                free_count += 1;
            }
        }

        let framework = Framework {
            dimension: d,
            vertices,
            edges,
            free_slot,
            free_count,
        };

        if let Some(issue) = framework.pin_leak() {
            return Err(ValidationReport {
                issues: vec![issue],
            });
        }

        let mut warnings = Vec::new();
        if framework.edges.iter().any(|e| e.explicit) {
            let rest = framework.rest_configuration();
            let defect = framework
                .squared_elongation(&rest)
                .expect("rest configuration is always dimensioned correctly")
                .amax();
            if defect > tol::PRESTRESS_WARN {
                warnings.push(format!(
                    "prestressed rest state: worst squared elongation {defect:.3e} \
                     exceeds {:.0e}",
                    tol::PRESTRESS_WARN
                ));
            }
        }

        Ok((framework, warnings))
    }

    /// Parses and validates the JSON schema in one step.
    pub fn from_json(text: &str) -> Result<(Self, Vec<String>), ValidationReport> {
        let spec: FrameworkSpec = serde_json::from_str(text).map_err(|e| ValidationReport {
            issues: vec![ValidationIssue::Schema {
                message: e.to_string(),
            }],
        })?;
        Self::from_spec(&spec)
    }

    /// Serializable description. Defaulted lengths stay implicit so a
    /// round trip through JSON re-derives them from the coordinates.
    pub fn to_spec(&self) -> FrameworkSpec {
        FrameworkSpec {
            dimension: self.dimension,
            vertices: self
                .vertices
                .iter()
                .map(|v| VertexSpec {
                    id: v.id.clone(),
                    coords: v.rest.iter().copied().collect(),
                    pinned: v.pinned,
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeSpec {
                    u: self.vertices[e.u].id.clone(),
                    v: self.vertices[e.v].id.clone(),
                    length: e.explicit.then_some(e.rest_length),
                })
                .collect(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Number of free coordinates, the length of every [`Configuration`].
    pub fn free_coord_count(&self) -> usize {
        self.dimension * self.free_count
    }

    pub fn free_vertex_count(&self) -> usize {
        self.free_count
    }

    pub fn pinned_vertex_count(&self) -> usize {
        self.vertices.len() - self.free_count
    }

    /// Index of a vertex by id, if present.
    pub fn vertex_index(&self, id: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v.id == id)
    }

    /// Free slot of a vertex, None when pinned.
    pub fn free_slot(&self, vertex: usize) -> Option<usize> {
        self.free_slot[vertex]
    }

    /// Human-readable label "u-v" for an edge, used in diagnostics.
    pub fn edge_label(&self, e: usize) -> String {
        let edge = &self.edges[e];
        format!(
            "{}-{}",
            self.vertices[edge.u].id, self.vertices[edge.v].id
        )
    }

    /// Smallest squared rest length, the reference for projection basins.
    pub fn min_rest_length_sq(&self) -> f64 {
        self.edges
            .iter()
            .map(|e| e.rest_length * e.rest_length)
            .fold(f64::INFINITY, f64::min)
    }

    /// Wraps a raw vector as a configuration after checking its length.
    pub fn configuration(&self, values: DVector<f64>) -> Result<Configuration, RigidityError> {
        if values.len() != self.free_coord_count() {
            return Err(RigidityError::DimensionMismatch {
                expected: self.free_coord_count(),
                got: values.len(),
            });
        }
        Ok(Configuration { values })
    }

    /// The rest configuration: free-vertex rest coordinates, stacked.
    pub fn rest_configuration(&self) -> Configuration {
        let mut values = DVector::zeros(self.free_coord_count());
        for (vi, v) in self.vertices.iter().enumerate() {
            if let Some(slot) = self.free_slot[vi] {
                values
                    .rows_mut(slot * self.dimension, self.dimension)
                    .copy_from(&v.rest);
            }
        }
        Configuration { values }
    }

    /// Scale reference `1 + ||X0||^2` used by the relative tolerances.
    pub fn configuration_scale(&self) -> f64 {
        let rest = self.rest_configuration();
        1.0 + rest.values.norm_squared()
    }

    /// Embeds a configuration into full per-vertex coordinates, pinned
    /// vertices held at rest.
    pub fn embed(&self, x: &Configuration) -> DVector<f64> {
        let d = self.dimension;
        let mut full = DVector::zeros(d * self.vertices.len());
        for (vi, v) in self.vertices.iter().enumerate() {
            match self.free_slot[vi] {
                Some(slot) => full
                    .rows_mut(vi * d, d)
                    .copy_from(&x.values.rows(slot * d, d)),
                None => full.rows_mut(vi * d, d).copy_from(&v.rest),
            }
        }
        full
    }

    /// Embeds a free-coordinate derivative (velocity, or any higher Taylor
    /// coefficient) into full coordinates with zeros at pinned vertices.
    pub fn embed_derivative(&self, x: &DVector<f64>) -> DVector<f64> {
        let d = self.dimension;
        let mut full = DVector::zeros(d * self.vertices.len());
        for vi in 0..self.vertices.len() {
            if let Some(slot) = self.free_slot[vi] {
                full.rows_mut(vi * d, d).copy_from(&x.rows(slot * d, d));
            }
        }
        full
    }

    /// Restricts full per-vertex coordinates back to the free slots.
    pub fn restrict(&self, full: &DVector<f64>) -> Configuration {
        let d = self.dimension;
        let mut values = DVector::zeros(self.free_coord_count());
        for vi in 0..self.vertices.len() {
            if let Some(slot) = self.free_slot[vi] {
                values
                    .rows_mut(slot * d, d)
                    .copy_from(&full.rows(vi * d, d));
            }
        }
        Configuration { values }
    }

    fn check_len(&self, x: &Configuration) -> Result<(), RigidityError> {
        if x.values.len() != self.free_coord_count() {
            return Err(RigidityError::DimensionMismatch {
                expected: self.free_coord_count(),
                got: x.values.len(),
            });
        }
        Ok(())
    }

    /// Per-edge squared elongation: |x_u - x_v|^2 - l^2.
    pub fn squared_elongation(&self, x: &Configuration) -> Result<DVector<f64>, RigidityError> {
        self.check_len(x)?;
        let full = self.embed(x);
        let d = self.dimension;
        let mut out = DVector::zeros(self.edges.len());
        for (ei, e) in self.edges.iter().enumerate() {
            let delta = full.rows(e.u * d, d) - full.rows(e.v * d, d);
            out[ei] = delta.norm_squared() - e.rest_length * e.rest_length;
        }
        Ok(out)
    }

    /// Per-edge linear elongation: |x_u - x_v| - l. The squared form equals
    /// (|x_u - x_v| + l) times this, which keeps the two measures
    /// interchangeable for order estimation.
    pub fn linear_elongation(&self, x: &Configuration) -> Result<DVector<f64>, RigidityError> {
        self.check_len(x)?;
        let full = self.embed(x);
        let d = self.dimension;
        let mut out = DVector::zeros(self.edges.len());
        for (ei, e) in self.edges.iter().enumerate() {
            let delta = full.rows(e.u * d, d) - full.rows(e.v * d, d);
            out[ei] = delta.norm() - e.rest_length;
        }
        Ok(out)
    }

    /// Jacobian of the squared-elongation map: row e carries
    /// 2(x_u - x_v)^T in u's free columns and the negative in v's.
    pub fn rigidity_matrix(&self, x: &Configuration) -> Result<DMatrix<f64>, RigidityError> {
        self.check_len(x)?;
        let full = self.embed(x);
        let d = self.dimension;
        let mut m = DMatrix::zeros(self.edges.len(), self.free_coord_count());
        for (ei, e) in self.edges.iter().enumerate() {
            let delta = full.rows(e.u * d, d) - full.rows(e.v * d, d);
            if let Some(slot) = self.free_slot[e.u] {
                for k in 0..d {
                    m[(ei, slot * d + k)] += 2.0 * delta[k];
                }
            }
            if let Some(slot) = self.free_slot[e.v] {
                for k in 0..d {
                    m[(ei, slot * d + k)] -= 2.0 * delta[k];
                }
            }
        }
        Ok(m)
    }

    /// Basis of infinitesimal rigid-body motions of the ambient space,
    /// expressed over full per-vertex coordinates: d translations plus
    /// rotations about the vertex centroid (one in the plane, three in
    /// space).
    fn rigid_motion_generators(&self) -> DMatrix<f64> {
        let d = self.dimension;
        let nv = self.vertices.len();
        let n_rot = if d == 2 { 1 } else { 3 };
        let mut gens = DMatrix::zeros(d * nv, d + n_rot);

        for (vi, _) in self.vertices.iter().enumerate() {
            for axis in 0..d {
                gens[(vi * d + axis, axis)] = 1.0;
            }
        }

        let mut centroid = DVector::zeros(d);
        for v in &self.vertices {
            centroid += &v.rest;
        }
        centroid /= nv as f64;

        for (vi, v) in self.vertices.iter().enumerate() {
            let r = &v.rest - &centroid;
            if d == 2 {
                gens[(vi * d, d)] = -r[1];
                gens[(vi * d + 1, d)] = r[0];
            } else {
                // Rotations about the three coordinate axes: omega x r.
                let pairs = [(1usize, 2usize), (2, 0), (0, 1)];
                for (k, (i, j)) in pairs.iter().enumerate() {
                    gens[(vi * d + i, d + k)] = -r[*j];
                    gens[(vi * d + j, d + k)] = r[*i];
                }
            }
        }
        gens
    }

    /// Looks for a nonzero rigid-body motion that vanishes at every pinned
    /// vertex. Its free restriction necessarily sits in the rigidity-matrix
    /// nullspace, so the pins fail to anchor the structure.
    fn pin_leak(&self) -> Option<ValidationIssue> {
        let d = self.dimension;
        let gens = self.rigid_motion_generators();

        let pinned_rows: Vec<usize> = self
            .vertices
            .iter()
            .enumerate()
            .filter(|(_, v)| v.pinned)
            .flat_map(|(vi, _)| (0..d).map(move |k| vi * d + k))
            .collect();
        let mut pinned_block = DMatrix::zeros(pinned_rows.len(), gens.ncols());
        for (r, &row) in pinned_rows.iter().enumerate() {
            pinned_block.row_mut(r).copy_from(&gens.row(row));
        }

        let kernel = linalg::right_nullspace(&pinned_block);
        if kernel.is_empty() {
            return None;
        }

        let rest = self.rest_configuration();
        let matrix = self
            .rigidity_matrix(&rest)
            .expect("rest configuration is always dimensioned correctly");

        for kappa in kernel {
            let motion = &gens * &kappa;
            let free = self.restrict(&motion);
            let norm = free.values.norm();
            if norm <= 1e-12 * motion.norm().max(1.0) {
                continue;
            }
            let unit = &free.values / norm;
            let residual = (&matrix * unit).norm();
            if residual < tol::PIN_MOTION_REL {
                return Some(ValidationIssue::InsufficientPins {
                    detail: format!(
                        "a rigid-body motion vanishing at all pins moves the free \
                         vertices (rigidity residual {residual:.3e})"
                    ),
                });
            }
        }
        None
    }
}
