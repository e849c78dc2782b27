//! The double-Watt linkage: a framework whose configuration space has a
//! genuine cusp, together with closed-form degenerate flexes along both of
//! its branches.
//!
//! One Watt linkage consists of two pinned pivots, two cranks of equal
//! length meeting the coupler bar at its ends, and a tracer vertex at the
//! coupler midpoint held by two half-bars. At the configuration where both
//! crank radii are horizontal the tracer sits at the bottom of its famous
//! flat spot: its velocity is vertical and its path is locally a quartic-
//! flat curve. Joining two mirror-image copies by a horizontal bar between
//! the two tracers produces the double-Watt linkage. Each tracer is also
//! braced to an outrigger vertex so the only first-order motions left are
//! the two crank drives; the connecting bar then forces the drives to
//! synchronize at second order in two distinct ways, and the configuration
//! space acquires a cusp: two analytic motion branches meeting at the
//! straight-line configuration with equal tangents.
//!
//! Everything here is expansion bookkeeping. A vertex moving on a circle of
//! radius rho about a fixed pivot, starting where the radius points along
//! sigma times the x-axis with purely vertical leading motion, has jets
//! determined by the circle equation: writing the vertical components of
//! X^(2)..X^(6) as a, b, c, d, e, the horizontal components are forced to
//! 0, 0, -3 sigma a^2 / rho, -10 sigma a b / rho and
//! -(15 a c + 10 b^2) sigma / rho. Carrying those jets through the coupler
//! and connecting bars yields the compatibility relations implemented in
//! [`solve_cusp_flexes_with_b`]; the key one couples the two sides through
//! the connecting bar of length L as 9 L a^3 + (b_bar - b)^2 = 0, which has
//! two solutions for b_bar exactly when a < 0. Those are the two branches.

use nalgebra::{DMatrix, DVector, Vector2};

use crate::error::RigidityError;
use crate::flex::{binomial, verify_flex, FlexSequence};
use crate::framework::{EdgeSpec, Framework, FrameworkSpec, VertexSpec};
use crate::linalg::{least_squares_residual, right_nullspace};
use crate::path::{polynomial_path, project_to_manifold, trace_mechanism, PathRecord, PathSamples};
use crate::tol;

/// Which of the two motion branches through the cusp to select.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `b_bar = b + sqrt(-9 L a^3)`: the right tracer tilts upward first.
    Plus,
    /// `b_bar = b - sqrt(-9 L a^3)`: the right tracer tilts downward first.
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Branch::Plus => write!(f, "plus"),
            Branch::Minus => write!(f, "minus"),
        }
    }
}

fn watt_spec(mirror_x: f64, braced: bool) -> FrameworkSpec {
    let left: Vec<(&str, [f64; 2], bool)> = {
        let mut v = vec![
            ("o1", [-1.0, 0.0], true),
            ("o2", [2.0, 1.0], true),
            ("p1", [0.0, 0.0], false),
            ("p2", [1.0, 1.0], false),
            ("q", [0.5, 0.5], false),
        ];
        if braced {
            v.push(("r", [0.0, 1.0], false));
        }
        v
    };
    let mut vertices = Vec::new();
    for (id, [x, y], pinned) in &left {
        vertices.push(VertexSpec {
            id: (*id).to_string(),
            coords: vec![*x, *y],
            pinned: *pinned,
        });
    }
    for (id, [x, y], pinned) in &left {
        vertices.push(VertexSpec {
            id: format!("{id}m"),
            coords: vec![2.0 * mirror_x - x, *y],
            pinned: *pinned,
        });
    }
    let mut side_edges: Vec<(&str, &str)> = vec![
        ("o1", "p1"),
        ("o2", "p2"),
        ("p1", "p2"),
        ("p1", "q"),
        ("q", "p2"),
    ];
    if braced {
        side_edges.extend([("p1", "r"), ("p2", "r"), ("q", "r")]);
    }
    let mut edges = Vec::new();
    for (u, v) in &side_edges {
        edges.push(EdgeSpec {
            u: (*u).to_string(),
            v: (*v).to_string(),
            length: None,
        });
    }
    for (u, v) in &side_edges {
        edges.push(EdgeSpec {
            u: format!("{u}m"),
            v: format!("{v}m"),
            length: None,
        });
    }
    edges.push(EdgeSpec {
        u: "q".to_string(),
        v: "qm".to_string(),
        length: None,
    });
    FrameworkSpec {
        dimension: 2,
        vertices,
        edges,
    }
}

fn build(spec: &FrameworkSpec) -> Framework {
    let (framework, warnings) = Framework::from_spec(spec).expect("double-Watt spec must validate");
    assert!(warnings.is_empty(), "double-Watt warnings: {warnings:?}");
    framework
}

/// The braced double-Watt linkage with a connecting bar of length 4.
///
/// Twelve vertices, four of them pinned, seventeen bars. At the straight
/// configuration the first-order flex space is two-dimensional (one crank
/// drive per side) and the configuration space has a cusp.
pub fn make_double_watt() -> Framework {
    build(&watt_spec(2.5, true))
}

/// The braced double-Watt with a unit-length connecting bar.
///
/// Obtained by mirroring closer in; some mirror vertices land on top of
/// left-side vertices, which is geometrically harmless since no bar
/// degenerates. The branch relation then reads 9 a^3 + (b_bar - b)^2 = 0.
pub fn make_double_watt_unit() -> Framework {
    build(&watt_spec(1.0, true))
}

/// The double-Watt without the outrigger bracing.
///
/// Kept as a foil: each tracer can then also slide perpendicular to its
/// coupler at first order, so the flex space is three-dimensional and the
/// cusp sits inside a larger first-order motion space. The bracing in
/// [`make_double_watt`] removes exactly those slides.
pub fn make_double_watt_unbraced() -> Framework {
    build(&watt_spec(2.5, false))
}

/// Jets of orders 1..6 for a vertex moving on a circle of radius `radius`
/// about a fixed pivot, at the point where the radius points along
/// `orientation` times the positive x-axis.
///
/// `y_components` are the vertical components (a, b, c, d, e) of
/// X^(2)..X^(6); the first-order jet is zero (the motion is degenerate) and
/// the horizontal components are the unique values keeping the vertex on
/// the circle through order six.
pub fn circle_flex_components(
    radius: f64,
    orientation: f64,
    y_components: [f64; 5],
) -> Result<Vec<Vector2<f64>>, RigidityError> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(RigidityError::InvalidArgument {
            what: format!("circle radius must be positive and finite, got {radius}"),
        });
    }
    if orientation != 1.0 && orientation != -1.0 {
        return Err(RigidityError::InvalidArgument {
            what: format!("orientation must be +1 or -1, got {orientation}"),
        });
    }
    let [a, b, c, d, e] = y_components;
    let s = orientation;
    Ok(vec![
        Vector2::new(0.0, 0.0),
        Vector2::new(0.0, a),
        Vector2::new(0.0, b),
        Vector2::new(-3.0 * s * a * a / radius, c),
        Vector2::new(-10.0 * s * a * b / radius, d),
        Vector2::new(-s * (15.0 * a * c + 10.0 * b * b) / radius, e),
    ])
}

/// A degenerate order-six flex of the double-Watt along one cusp branch,
/// together with the expansion parameters it was built from.
///
/// Vertical jet components follow the naming of the expansion: on the left
/// side the tracer accelerates with `a`, jerks with `b`, and the two crank
/// vertices split the higher orders as `c1/c2`, `d1/d2`, `e1/e2`; barred
/// fields are the mirror side.
#[derive(Debug, Clone)]
pub struct DegenerateFlexSolution {
    pub a: f64,
    pub b: f64,
    pub c1: f64,
    pub c2: f64,
    pub d1: f64,
    pub d2: f64,
    pub e1: f64,
    pub e2: f64,
    pub a_bar: f64,
    pub b_bar: f64,
    pub c1_bar: f64,
    pub c2_bar: f64,
    pub d1_bar: f64,
    pub d2_bar: f64,
    pub e1_bar: f64,
    pub e2_bar: f64,
    /// Which sign was taken in `b_bar = b + sign * sqrt(-9 L a^3)`.
    pub branch: Branch,
    /// Rest length L of the connecting bar.
    pub connector_length: f64,
    /// The assembled flex: X^(1) = 0, X^(2)..X^(6) over free coordinates.
    pub flex: FlexSequence,
}

struct WattIds {
    cranks: [(usize, usize); 4],
    q: usize,
    qm: usize,
    r: Option<usize>,
    rm: Option<usize>,
}

fn lookup(f: &Framework, id: &str) -> Result<usize, RigidityError> {
    f.vertex_index(id).ok_or_else(|| RigidityError::InvalidArgument {
        what: format!("vertex '{id}' not found; not a double-Watt framework"),
    })
}

fn watt_ids(f: &Framework) -> Result<WattIds, RigidityError> {
    if f.dimension() != 2 {
        return Err(RigidityError::InvalidArgument {
            what: "the double-Watt analysis is planar".to_string(),
        });
    }
    let pair = |p: &str, o: &str| -> Result<(usize, usize), RigidityError> {
        Ok((lookup(f, p)?, lookup(f, o)?))
    };
    Ok(WattIds {
        cranks: [
            pair("p1", "o1")?,
            pair("p2", "o2")?,
            pair("p1m", "o1m")?,
            pair("p2m", "o2m")?,
        ],
        q: lookup(f, "q")?,
        qm: lookup(f, "qm")?,
        r: f.vertex_index("r"),
        rm: f.vertex_index("rm"),
    })
}

fn rest2(f: &Framework, vertex: usize) -> Vector2<f64> {
    let r = &f.vertices()[vertex].rest;
    Vector2::new(r[0], r[1])
}

/// Orientation and radius of a crank whose rest radius must be horizontal.
fn crank_geometry(f: &Framework, p: usize, o: usize) -> Result<(f64, f64), RigidityError> {
    let delta = rest2(f, p) - rest2(f, o);
    if delta.y.abs() > 1e-12 * (1.0 + delta.norm()) {
        return Err(RigidityError::InvalidArgument {
            what: format!(
                "crank radius {}-{} is not horizontal at rest",
                f.vertices()[p].id,
                f.vertices()[o].id
            ),
        });
    }
    Ok((delta.x.signum(), delta.x.abs()))
}

/// Jets (orders 1..6) of a vertex attached by bars to carriers with known
/// jets, solved level by level from the bar constraints.
fn attached_jets(
    rest_vertex: Vector2<f64>,
    carriers: &[(Vector2<f64>, &[Vector2<f64>])],
) -> Result<Vec<Vector2<f64>>, RigidityError> {
    let order = carriers
        .iter()
        .map(|(_, jets)| jets.len())
        .min()
        .unwrap_or(0);
    let mut jets: Vec<Vector2<f64>> = Vec::with_capacity(order);
    for k in 1..=order {
        let mut matrix = DMatrix::zeros(carriers.len(), 2);
        let mut rhs = DVector::zeros(carriers.len());
        for (row, (rest_w, w_jets)) in carriers.iter().enumerate() {
            let delta0 = rest_vertex - rest_w;
            matrix[(row, 0)] = 2.0 * delta0.x;
            matrix[(row, 1)] = 2.0 * delta0.y;
            // 2 delta0 . X_r^(k) = 2 delta0 . X_w^(k)
            //   - sum_{j=1}^{k-1} binom(k, j) delta^(j) . delta^(k-j)
            let mut value = 2.0 * delta0.dot(&w_jets[k - 1]);
            for j in 1..k {
                let dj = jets[j - 1] - w_jets[j - 1];
                let dk = jets[k - j - 1] - w_jets[k - j - 1];
                value -= binomial(k, j) * dj.dot(&dk);
            }
            rhs[row] = value;
        }
        let (solution, residual) = least_squares_residual(&matrix, &rhs);
        if residual > tol::FEASIBILITY_REL * (1.0 + rhs.norm()) {
            return Err(RigidityError::InvalidFlex {
                reason: format!(
                    "bracing bars admit no consistent level-{k} jet \
                     (residual {residual:.3e})"
                ),
            });
        }
        jets.push(Vector2::new(solution[0], solution[1]));
    }
    Ok(jets)
}

fn set_vertex(
    f: &Framework,
    target: &mut DVector<f64>,
    vertex: usize,
    value: Vector2<f64>,
) -> Result<(), RigidityError> {
    let slot = f.free_slot(vertex).ok_or_else(|| RigidityError::InvalidArgument {
        what: format!("vertex '{}' is pinned", f.vertices()[vertex].id),
    })?;
    target[2 * slot] = value.x;
    target[2 * slot + 1] = value.y;
    Ok(())
}

/// Solve the cusp compatibility relations with the free jerk parameter
/// left at its symmetric default `b = 0`.
pub fn solve_cusp_flexes(
    f: &Framework,
    a: f64,
    branch: Branch,
) -> Result<DegenerateFlexSolution, RigidityError> {
    solve_cusp_flexes_with_b(f, a, 0.0, branch)
}

/// Build the order-six degenerate flex of the double-Watt along one branch.
///
/// `a < 0` is the shared vertical acceleration of the tracers (both flat
/// spots open downward, so a motion must drop) and `b` the left tracer's
/// jerk. All remaining jet components follow from the bar constraints:
/// both coupler endpoints share a and b, their higher vertical components
/// split symmetrically, the mirror side copies a, and the connecting bar
/// fixes the mirror jerk through `9 L a^3 + (b_bar - b)^2 = 0`, whose two
/// roots are the two branches. The result is checked against every bar
/// before it is returned.
pub fn solve_cusp_flexes_with_b(
    f: &Framework,
    a: f64,
    b: f64,
    branch: Branch,
) -> Result<DegenerateFlexSolution, RigidityError> {
    // The negated form also rejects NaN, which `a >= 0.0` would let through.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(a < 0.0) {
        return Err(RigidityError::RequiresNegativeA { a });
    }
    if !b.is_finite() {
        return Err(RigidityError::InvalidArgument {
            what: format!("jerk parameter must be finite, got {b}"),
        });
    }
    let ids = watt_ids(f)?;

    // The tracers must sit at their coupler midpoints at rest; the whole
    // expansion leans on the half-bars being half the coupler.
    for (q, p1, p2) in [
        (ids.q, ids.cranks[0].0, ids.cranks[1].0),
        (ids.qm, ids.cranks[2].0, ids.cranks[3].0),
    ] {
        let midpoint = (rest2(f, p1) + rest2(f, p2)) / 2.0;
        if (rest2(f, q) - midpoint).norm() > 1e-12 {
            return Err(RigidityError::InvalidArgument {
                what: format!(
                    "tracer '{}' is not the midpoint of its coupler",
                    f.vertices()[q].id
                ),
            });
        }
    }

    let connector = rest2(f, ids.qm) - rest2(f, ids.q);
    if connector.y.abs() > 1e-12 * (1.0 + connector.norm()) || connector.x <= 0.0 {
        return Err(RigidityError::InvalidArgument {
            what: "the connecting bar must run horizontally from q to qm".to_string(),
        });
    }
    let length = connector.x;

    let discriminant = -9.0 * length * a * a * a;
    let b_bar = b + branch.sign() * discriminant.sqrt();
    let a_bar = a;

    let (c1, c2) = (3.0 * a * a, -3.0 * a * a);
    let (d1, d2) = (10.0 * a * b, -10.0 * a * b);
    let (e1, e2) = (10.0 * b * b, -10.0 * b * b);
    let (c1_bar, c2_bar) = (3.0 * a_bar * a_bar, -3.0 * a_bar * a_bar);
    let (d1_bar, d2_bar) = (10.0 * a_bar * b_bar, -10.0 * a_bar * b_bar);
    let (e1_bar, e2_bar) = (10.0 * b_bar * b_bar, -10.0 * b_bar * b_bar);

    let crank_jets = |pair: (usize, usize), y: [f64; 5]| -> Result<Vec<Vector2<f64>>, RigidityError> {
        let (orientation, radius) = crank_geometry(f, pair.0, pair.1)?;
        circle_flex_components(radius, orientation, y)
    };
    let p1_jets = crank_jets(ids.cranks[0], [a, b, c1, d1, e1])?;
    let p2_jets = crank_jets(ids.cranks[1], [a, b, c2, d2, e2])?;
    let p1m_jets = crank_jets(ids.cranks[2], [a_bar, b_bar, c1_bar, d1_bar, e1_bar])?;
    let p2m_jets = crank_jets(ids.cranks[3], [a_bar, b_bar, c2_bar, d2_bar, e2_bar])?;

    let average = |u: &[Vector2<f64>], v: &[Vector2<f64>]| -> Vec<Vector2<f64>> {
        u.iter().zip(v).map(|(a, b)| (a + b) / 2.0).collect()
    };
    let q_jets = average(&p1_jets, &p2_jets);
    let qm_jets = average(&p1m_jets, &p2m_jets);

    let r_jets = match ids.r {
        Some(r) => Some(attached_jets(
            rest2(f, r),
            &[
                (rest2(f, ids.cranks[0].0), &p1_jets),
                (rest2(f, ids.cranks[1].0), &p2_jets),
                (rest2(f, ids.q), &q_jets),
            ],
        )?),
        None => None,
    };
    let rm_jets = match ids.rm {
        Some(rm) => Some(attached_jets(
            rest2(f, rm),
            &[
                (rest2(f, ids.cranks[2].0), &p1m_jets),
                (rest2(f, ids.cranks[3].0), &p2m_jets),
                (rest2(f, ids.qm), &qm_jets),
            ],
        )?),
        None => None,
    };

    let mut derivatives = Vec::with_capacity(6);
    for k in 1..=6usize {
        let mut level = DVector::zeros(f.free_coord_count());
        set_vertex(f, &mut level, ids.cranks[0].0, p1_jets[k - 1])?;
        set_vertex(f, &mut level, ids.cranks[1].0, p2_jets[k - 1])?;
        set_vertex(f, &mut level, ids.q, q_jets[k - 1])?;
        set_vertex(f, &mut level, ids.cranks[2].0, p1m_jets[k - 1])?;
        set_vertex(f, &mut level, ids.cranks[3].0, p2m_jets[k - 1])?;
        set_vertex(f, &mut level, ids.qm, qm_jets[k - 1])?;
        if let (Some(r), Some(jets)) = (ids.r, &r_jets) {
            set_vertex(f, &mut level, r, jets[k - 1])?;
        }
        if let (Some(rm), Some(jets)) = (ids.rm, &rm_jets) {
            set_vertex(f, &mut level, rm, jets[k - 1])?;
        }
        derivatives.push(level);
    }
    let flex = FlexSequence::new(1, derivatives)?;

    let x0 = f.rest_configuration();
    let (ok, residuals) = verify_flex(f, &x0, &flex, 6)?;
    if !ok {
        let worst = residuals.iter().cloned().fold(0.0, f64::max);
        return Err(RigidityError::InvalidFlex {
            reason: format!(
                "constructed jets violate a bar constraint (worst residual {worst:.3e}); \
                 the framework is not in the cusp configuration"
            ),
        });
    }

    Ok(DegenerateFlexSolution {
        a,
        b,
        c1,
        c2,
        d1,
        d2,
        e1,
        e2,
        a_bar,
        b_bar,
        c1_bar,
        c2_bar,
        d1_bar,
        d2_bar,
        e1_bar,
        e2_bar,
        branch,
        connector_length: length,
        flex,
    })
}

/// Named residuals of the expansion relations, read back from a flex.
///
/// Every entry should be at rounding level for a flex produced by
/// [`solve_cusp_flexes_with_b`]; feeding a perturbed flex shows which
/// relation breaks and by how much.
#[derive(Debug, Clone)]
pub struct WattRelationReport {
    /// (relation name, absolute residual) pairs.
    pub relations: Vec<(String, f64)>,
    /// Expected and observed horizontal order-six component of the left
    /// tracer (the -45 a^3 term that survives averaging).
    pub q6_x: (f64, f64),
    /// Same for the mirror tracer, with opposite sign.
    pub q6_x_bar: (f64, f64),
    /// Whether the flex satisfies every bar constraint through order six.
    pub flex_ok: bool,
    /// Worst-edge constraint residual per level 1..6.
    pub flex_residuals: Vec<f64>,
    /// Largest relation residual.
    pub max_relation_residual: f64,
}

/// Check the expansion relations of a double-Watt flex by reading the jets
/// back off the flex sequence.
pub fn verify_watt_relations(
    f: &Framework,
    flex: &FlexSequence,
) -> Result<WattRelationReport, RigidityError> {
    if flex.order() < 6 {
        return Err(RigidityError::LevelOutOfRange {
            k: 6,
            max: flex.order(),
        });
    }
    let ids = watt_ids(f)?;
    let jet = |vertex: usize, order: usize| -> Result<Vector2<f64>, RigidityError> {
        let slot = f
            .free_slot(vertex)
            .ok_or_else(|| RigidityError::InvalidArgument {
                what: format!("vertex '{}' is pinned", f.vertices()[vertex].id),
            })?;
        let d = flex.derivative(order);
        Ok(Vector2::new(d[2 * slot], d[2 * slot + 1]))
    };

    // Per-side result: the shared acceleration a, the shared jerk b, and
    // the five named coupler relations with their residuals.
    type SideCheck = (f64, f64, [(String, f64); 5]);
    let side = |p1: usize, p2: usize, label: &str| -> Result<SideCheck, RigidityError> {
        let (a1, a2) = (jet(p1, 2)?.y, jet(p2, 2)?.y);
        let (b1, b2) = (jet(p1, 3)?.y, jet(p2, 3)?.y);
        let (c1, c2) = (jet(p1, 4)?.y, jet(p2, 4)?.y);
        let (d1, d2) = (jet(p1, 5)?.y, jet(p2, 5)?.y);
        let (e1, e2) = (jet(p1, 6)?.y, jet(p2, 6)?.y);
        let a = (a1 + a2) / 2.0;
        let b = (b1 + b2) / 2.0;
        let relations = [
            (format!("{label} coupler level 2: a1 - a2"), (a1 - a2).abs()),
            (format!("{label} coupler level 3: b1 - b2"), (b1 - b2).abs()),
            (
                format!("{label} coupler level 4: c1 - c2 - 6a^2"),
                (c1 - c2 - 6.0 * a * a).abs(),
            ),
            (
                format!("{label} coupler level 5: d1 - d2 - 20ab"),
                (d1 - d2 - 20.0 * a * b).abs(),
            ),
            (
                format!("{label} coupler level 6: e1 - e2 - 15a(c1 + c2) - 20b^2"),
                (e1 - e2 - 15.0 * a * (c1 + c2) - 20.0 * b * b).abs(),
            ),
        ];
        Ok((a, b, relations))
    };

    let (a, b, left) = side(ids.cranks[0].0, ids.cranks[1].0, "left")?;
    let (a_bar, b_bar, right) = side(ids.cranks[2].0, ids.cranks[3].0, "mirror")?;
    let length = (rest2(f, ids.qm) - rest2(f, ids.q)).x;

    let mut relations: Vec<(String, f64)> = left.into_iter().chain(right).collect();
    relations.push((
        "connecting bar level 4: a - a_bar".to_string(),
        (a - a_bar).abs(),
    ));
    relations.push((
        "connecting bar level 6: 9 L a^3 + (b_bar - b)^2".to_string(),
        (9.0 * length * a * a * a + (b_bar - b) * (b_bar - b)).abs(),
    ));

    let q6_expected = -45.0 * a * a * a;
    let q6_actual = jet(ids.q, 6)?.x;
    let q6_bar_expected = 45.0 * a_bar * a_bar * a_bar;
    let q6_bar_actual = jet(ids.qm, 6)?.x;
    relations.push((
        "left tracer order 6 horizontal: q6_x + 45 a^3".to_string(),
        (q6_actual - q6_expected).abs(),
    ));
    relations.push((
        "mirror tracer order 6 horizontal: q6_x - 45 a^3".to_string(),
        (q6_bar_actual - q6_bar_expected).abs(),
    ));

    let x0 = f.rest_configuration();
    let (flex_ok, flex_residuals) = verify_flex(f, &x0, flex, 6)?;
    let max_relation_residual = relations.iter().map(|(_, r)| *r).fold(0.0, f64::max);

    Ok(WattRelationReport {
        relations,
        q6_x: (q6_expected, q6_actual),
        q6_x_bar: (q6_bar_expected, q6_bar_actual),
        flex_ok,
        flex_residuals,
        max_relation_residual,
    })
}

/// Trace one cusp branch numerically.
///
/// The polynomial path of the branch flex is evaluated at `t0`, projected
/// onto the constraint manifold (away from the cusp point the linkage is a
/// regular one-degree-of-freedom mechanism, so projection and continuation
/// are well posed), and traced outward for `count` steps of length `h`. The
/// cusp configuration itself is prepended so the samples document the whole
/// branch from its singular point.
pub fn trace_branch(
    f: &Framework,
    solution: &DegenerateFlexSolution,
    t0: f64,
    h: f64,
    count: usize,
) -> Result<PathSamples, RigidityError> {
    if !(t0 > 0.0 && t0.is_finite()) {
        return Err(RigidityError::InvalidArgument {
            what: format!("seed parameter t0 must be positive and finite, got {t0}"),
        });
    }
    let x0 = f.rest_configuration();
    let path = polynomial_path(&x0, &solution.flex)?;
    let guess = f.configuration(path.eval(t0))?;
    let (seed, _) = project_to_manifold(f, &guess)?;

    let outward = seed.values() - x0.values();
    let r = f.rigidity_matrix(&seed)?;
    let basis = right_nullspace(&r);
    let mut best: Option<(f64, &DVector<f64>)> = None;
    for vector in &basis {
        let dot = vector.dot(&outward);
        if best.is_none_or(|(b, _)| dot.abs() > b.abs()) {
            best = Some((dot, vector));
        }
    }
    let Some((dot, vector)) = best else {
        return Err(RigidityError::NoFlexDirection);
    };
    let direction = if dot < 0.0 { -vector } else { vector.clone() };

    let traced = trace_mechanism(f, &seed, &direction, h, count)?;
    let chord = outward.norm();
    let mut records = Vec::with_capacity(traced.records.len() + 1);
    records.push(PathRecord {
        t: 0.0,
        config: x0.values().clone(),
        s: 0.0,
        elongations: f.squared_elongation(&x0)?,
    });
    for record in traced.records {
        records.push(PathRecord {
            t: t0 + record.t,
            config: record.config,
            s: chord + record.s,
            elongations: record.elongations,
        });
    }
    Ok(PathSamples {
        records,
        truncated: traced.truncated,
    })
}
