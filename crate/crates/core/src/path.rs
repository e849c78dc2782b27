//! Polynomial path evaluation, arclength bookkeeping, projection onto the
//! constraint manifold, and numerical continuation of mechanism paths.
//!
//! A flex sequence gives a formal Taylor jet; [`polynomial_path`] turns it
//! into an evaluable curve t -> X0 + sum_k X^(k) t^k / k!. Paths produced
//! either that way or by [`trace_mechanism`] are reported as [`PathSamples`]:
//! a list of records carrying the parameter value, cumulative chordal
//! arclength, the free configuration, and the squared elongations there.
//!
//! Projection uses Gauss-Newton with minimum-norm steps, so points near the
//! manifold are pulled (approximately) along the normal space and tangential
//! drift stays small. The tracer is a predictor-corrector scheme: step along
//! a unit tangent from the first-order flex space, project back, then pick
//! the nullspace direction at the new point that best continues the motion.

use nalgebra::DVector;

use crate::error::RigidityError;
use crate::flex::FlexSequence;
use crate::framework::{Configuration, Framework};
use crate::linalg::{min_norm_solve, right_nullspace, sigma_max};
use crate::tol;

/// Evaluable truncated power series for a configuration path.
///
/// Produced by [`polynomial_path`]. Coordinates are the free coordinates of
/// the framework the jet came from; pinned vertices do not move.
#[derive(Debug, Clone)]
pub struct PolynomialPath {
    base: DVector<f64>,
    derivatives: Vec<DVector<f64>>,
}

impl PolynomialPath {
    /// Evaluate the path at parameter `t`.
    pub fn eval(&self, t: f64) -> DVector<f64> {
        let mut out = self.base.clone();
        // t^k / k! built incrementally to avoid overflowing factorials.
        let mut coeff = 1.0;
        for (i, deriv) in self.derivatives.iter().enumerate() {
            let k = (i + 1) as f64;
            coeff *= t / k;
            out.axpy(coeff, deriv, 1.0);
        }
        out
    }

    /// Highest derivative order carried by the path.
    pub fn order(&self) -> usize {
        self.derivatives.len()
    }
}

/// Build the truncated Taylor path `X0 + sum_k X^(k) t^k / k!` from a flex
/// sequence based at `x0`.
pub fn polynomial_path(x0: &Configuration, flex: &FlexSequence) -> Result<PolynomialPath, RigidityError> {
    let n = x0.values().len();
    for deriv in flex.derivatives() {
        if deriv.len() != n {
            return Err(RigidityError::DimensionMismatch {
                expected: n,
                got: deriv.len(),
            });
        }
    }
    Ok(PolynomialPath {
        base: x0.values().clone(),
        derivatives: flex.derivatives().to_vec(),
    })
}

/// Cumulative chordal arclength of a polygonal chain of configurations.
///
/// Returns one value per input point, starting at zero. Fewer than two
/// points is an error; repeated points are fine and contribute zero length.
pub fn arclength(points: &[DVector<f64>]) -> Result<Vec<f64>, RigidityError> {
    if points.len() < 2 {
        return Err(RigidityError::TooFewSamples {
            needed: 2,
            got: points.len(),
        });
    }
    let mut out = Vec::with_capacity(points.len());
    let mut s = 0.0;
    out.push(0.0);
    for pair in points.windows(2) {
        s += (&pair[1] - &pair[0]).norm();
        out.push(s);
    }
    Ok(out)
}

/// One sampled point on a configuration path.
#[derive(Debug, Clone)]
pub struct PathRecord {
    /// Path parameter (Taylor parameter or accumulated step length target).
    pub t: f64,
    /// Free coordinates at this point.
    pub config: DVector<f64>,
    /// Cumulative chordal arclength from the first record.
    pub s: f64,
    /// Squared elongations of every edge at this point.
    pub elongations: DVector<f64>,
}

/// A sampled configuration path plus a truncation flag.
#[derive(Debug, Clone)]
pub struct PathSamples {
    /// Sampled points in path order.
    pub records: Vec<PathRecord>,
    /// True when tracing stopped early because no acceptable step was found.
    pub truncated: bool,
}

impl PathSamples {
    /// Assemble samples from bare configurations, computing arclength and
    /// elongations. `ts` must match `configs` in length.
    pub fn from_configurations(
        f: &Framework,
        ts: &[f64],
        configs: Vec<DVector<f64>>,
    ) -> Result<Self, RigidityError> {
        if ts.len() != configs.len() {
            return Err(RigidityError::DimensionMismatch {
                expected: ts.len(),
                got: configs.len(),
            });
        }
        let s_values = if configs.len() >= 2 {
            arclength(&configs)?
        } else {
            vec![0.0; configs.len()]
        };
        let mut records = Vec::with_capacity(configs.len());
        for ((t, s), values) in ts.iter().zip(s_values).zip(configs) {
            let config = f.configuration(values)?;
            let elongations = f.squared_elongation(&config)?;
            records.push(PathRecord {
                t: *t,
                config: config.into_values(),
                s,
                elongations,
            });
        }
        Ok(PathSamples {
            records,
            truncated: false,
        })
    }

    /// Largest absolute squared elongation over the whole path.
    pub fn max_abs_elongation(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.elongations.amax())
            .fold(0.0, f64::max)
    }

    /// Arclength of the final record (zero for an empty path).
    pub fn total_arclength(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.s)
    }

    /// Write the path as CSV: header `t,s,max_abs_D` followed by one column
    /// per coordinate of every vertex (pinned ones included, they just stay
    /// put). Floats use full round-trip precision.
    pub fn write_csv(&self, f: &Framework, out: &mut impl std::io::Write) -> std::io::Result<()> {
        let axes = ["x", "y", "z"];
        let mut header = String::from("t,s,max_abs_D");
        for vertex in f.vertices() {
            for axis in axes.iter().take(f.dimension()) {
                header.push(',');
                header.push_str(&vertex.id);
                header.push('.');
                header.push_str(axis);
            }
        }
        writeln!(out, "{header}")?;
        for record in &self.records {
            let config = f
                .configuration(record.config.clone())
                .expect("records carry configurations of their own framework");
            let full = f.embed(&config);
            write!(
                out,
                "{:.16e},{:.16e},{:.16e}",
                record.t,
                record.s,
                record.elongations.amax()
            )?;
            for value in full.iter() {
                write!(out, ",{value:.16e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Sample the polynomial path of a flex sequence at the given parameter
/// values.
///
/// Arclength is computed on a refinement of the sample grid: each interval
/// between consecutive `ts` is cut into `refine` pieces (at least one) and
/// the chord lengths of the refined polygon are accumulated, so the reported
/// `s` tracks the curve rather than the coarse polygon.
pub fn sample_polynomial(
    f: &Framework,
    x0: &Configuration,
    flex: &FlexSequence,
    ts: &[f64],
    refine: usize,
) -> Result<PathSamples, RigidityError> {
    if ts.is_empty() {
        return Err(RigidityError::TooFewSamples { needed: 1, got: 0 });
    }
    let path = polynomial_path(x0, flex)?;
    let refine = refine.max(1);
    let mut records = Vec::with_capacity(ts.len());
    let mut s = 0.0;
    let mut prev_t = ts[0];
    let mut prev_point = path.eval(prev_t);
    for (i, &t) in ts.iter().enumerate() {
        if i > 0 {
            let mut last = prev_point.clone();
            for j in 1..=refine {
                let tj = prev_t + (t - prev_t) * (j as f64) / (refine as f64);
                let point = path.eval(tj);
                s += (&point - &last).norm();
                last = point;
            }
            prev_point = last;
            prev_t = t;
        }
        let config = f.configuration(prev_point.clone())?;
        let elongations = f.squared_elongation(&config)?;
        records.push(PathRecord {
            t,
            config: prev_point.clone(),
            s,
            elongations,
        });
    }
    Ok(PathSamples {
        records,
        truncated: false,
    })
}

/// Gauss-Newton projection of a nearby configuration onto the constraint
/// manifold `D(X) = 0`.
///
/// Returns the projected configuration and the number of iterations used
/// (zero when the input already satisfies the target tolerance). Inputs
/// whose worst squared elongation exceeds a basin bound proportional to the
/// squared minimum rest length are rejected outright, because convergence to
/// the nearest manifold point is then not trustworthy.
pub fn project_to_manifold(
    f: &Framework,
    guess: &Configuration,
) -> Result<(Configuration, usize), RigidityError> {
    let scale = f.configuration_scale();
    let target = tol::PROJECTION_TARGET_REL * scale;
    let accept = tol::PROJECTION_REL * scale;
    let basin = tol::BASIN_FACTOR * f.min_rest_length_sq();

    let mut x = guess.clone();
    let mut d = f.squared_elongation(&x)?;
    let mut residual = d.amax();
    if residual > basin {
        return Err(RigidityError::OutsideBasin {
            residual,
            bound: basin,
        });
    }
    const MAX_ITERATIONS: usize = 50;
    for iteration in 0..=MAX_ITERATIONS {
        if residual <= target {
            return Ok((x, iteration));
        }
        if iteration == MAX_ITERATIONS {
            break;
        }
        let r = f.rigidity_matrix(&x)?;
        let step = min_norm_solve(&r, &(-&d));
        x = f.configuration(x.values() + step)?;
        d = f.squared_elongation(&x)?;
        residual = d.amax();
    }
    if residual <= accept {
        Ok((x, MAX_ITERATIONS))
    } else {
        Err(RigidityError::ProjectionDiverged {
            iterations: MAX_ITERATIONS,
            residual,
        })
    }
}

/// Trace a mechanism path by predictor-corrector continuation.
///
/// `direction` must lie in the first-order flex space at `start` (checked
/// against the rigidity matrix). Each step walks `h` along the current unit
/// tangent and projects back to the manifold; on failure the step is halved,
/// up to six times. A step that collapses back to the previous point (the
/// projected point moved less than five percent of the attempted step) also
/// counts as a failure, which is what terminates branches that run into
/// singularities they cannot pass. When no acceptable step remains the path
/// is returned with `truncated = true` rather than as an error.
pub fn trace_mechanism(
    f: &Framework,
    start: &Configuration,
    direction: &DVector<f64>,
    h: f64,
    count: usize,
) -> Result<PathSamples, RigidityError> {
    if !h.is_finite() || h <= 0.0 {
        return Err(RigidityError::InvalidArgument {
            what: format!("step length must be positive and finite, got {h}"),
        });
    }
    if direction.len() != f.free_coord_count() {
        return Err(RigidityError::DimensionMismatch {
            expected: f.free_coord_count(),
            got: direction.len(),
        });
    }
    let dir_norm = direction.norm();
    if dir_norm == 0.0 {
        return Err(RigidityError::NoFlexDirection);
    }
    let mut tangent = direction / dir_norm;

    // Make sure the starting point itself sits on the manifold; a start
    // produced by parsing user coordinates can carry rounding residue.
    let (start, _) = project_to_manifold(f, start)?;
    let r0 = f.rigidity_matrix(&start)?;
    let sigma = sigma_max(&r0);
    let dir_residual = (&r0 * &tangent).norm();
    if sigma > 0.0 && dir_residual > tol::DIRECTION_REL * sigma {
        return Err(RigidityError::DirectionNotFlex {
            residual: dir_residual / sigma,
        });
    }

    let scale = f.configuration_scale();
    let basin = tol::BASIN_FACTOR * f.min_rest_length_sq();
    let step_ok = tol::TRACE_RESIDUAL_REL * scale;

    let mut records = Vec::with_capacity(count + 1);
    records.push(PathRecord {
        t: 0.0,
        config: start.values().clone(),
        s: 0.0,
        elongations: f.squared_elongation(&start)?,
    });
    let mut x = start;
    let mut t = 0.0;
    let mut s = 0.0;
    let mut truncated = false;

    'steps: for _ in 0..count {
        let mut accepted: Option<(Configuration, f64)> = None;
        for halving in 0..=6 {
            let h_try = h / f64::powi(2.0, halving);
            let predictor = f.configuration(x.values() + h_try * &tangent)?;
            if f.squared_elongation(&predictor)?.amax() > basin {
                continue;
            }
            let Ok((y, _)) = project_to_manifold(f, &predictor) else {
                continue;
            };
            let advance = (y.values() - x.values()).norm();
            if advance < 0.05 * h_try {
                // The corrector fell back onto the previous point: the
                // predicted direction leaves the reachable set here.
                continue;
            }
            if f.squared_elongation(&y)?.amax() > step_ok {
                continue;
            }
            accepted = Some((y, h_try));
            break;
        }
        let Some((y, h_used)) = accepted else {
            truncated = true;
            break 'steps;
        };
        s += (y.values() - x.values()).norm();
        t += h_used;
        records.push(PathRecord {
            t,
            config: y.values().clone(),
            s,
            elongations: f.squared_elongation(&y)?,
        });
        // Continue along whichever nullspace direction best matches the
        // previous tangent, sign-aligned so the walk does not double back.
        let r = f.rigidity_matrix(&y)?;
        let basis = right_nullspace(&r);
        let mut best: Option<(f64, &DVector<f64>)> = None;
        for vector in &basis {
            let dot = vector.dot(&tangent);
            if best.is_none_or(|(b, _)| dot.abs() > b.abs()) {
                best = Some((dot, vector));
            }
        }
        let Some((dot, vector)) = best else {
            // The path ran into a point with no first-order motion at all.
            truncated = true;
            x = y;
            break 'steps;
        };
        tangent = if dot < 0.0 { -vector } else { vector.clone() };
        x = y;
    }
    let _ = x;
    Ok(PathSamples { records, truncated })
}
