//! Empirical order estimation from elongation profiles.
//!
//! Given samples of a configuration path, the elongation magnitudes are
//! reduced to a profile of worst-edge values against arclength. Fitting a
//! line to the log-log profile estimates the exponent alpha in
//! `max_e |D_e| ~ s^alpha`; comparing alpha against a claimed flex order n
//! says whether the observed decay is consistent with the claim (flexes of
//! order n keep elongations at or below s^(n+1) asymptotically, so a fitted
//! slope clearly above n witnesses the claim, as does dropping below the
//! numerical noise floor entirely).

use crate::error::RigidityError;
use crate::framework::Framework;
use crate::path::PathSamples;
use crate::tol;

/// Which elongation measure a fit runs on.
///
/// `Squared` is `D_e = |x_u - x_v|^2 - l^2`, `Linear` is
/// `d_e = |x_u - x_v| - l`. Near the rest configuration they differ by the
/// smooth nonzero factor `|x_u - x_v| + l`, so fitted orders agree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    Squared,
    Linear,
}

/// One profile entry at a fixed arclength.
#[derive(Debug, Clone)]
pub struct ProfilePoint {
    /// Cumulative arclength from the path start.
    pub s: f64,
    /// Worst absolute squared elongation over all edges.
    pub max_squared: f64,
    /// Worst absolute linear elongation over all edges.
    pub max_linear: f64,
    /// Absolute squared elongation per edge, in framework edge order.
    pub per_edge_squared: Vec<f64>,
}

/// Elongation magnitudes along a path, ready for log-log fitting.
#[derive(Debug, Clone)]
pub struct ElongationProfile {
    points: Vec<ProfilePoint>,
    scale: f64,
    edge_labels: Vec<String>,
}

impl ElongationProfile {
    /// Reduce path samples to a profile.
    ///
    /// The initial point (arclength zero) is dropped since it has no place
    /// on a log axis, and samples that fail to advance the arclength are
    /// deduplicated. At least two distinct moving samples must remain.
    pub fn from_samples(f: &Framework, samples: &PathSamples) -> Result<Self, RigidityError> {
        let mut points = Vec::new();
        let mut last_s = 0.0;
        for record in &samples.records {
            if record.s <= last_s {
                continue;
            }
            let config = f.configuration(record.config.clone())?;
            let linear = f.linear_elongation(&config)?;
            points.push(ProfilePoint {
                s: record.s,
                max_squared: record.elongations.amax(),
                max_linear: linear.amax(),
                per_edge_squared: record.elongations.iter().map(|d| d.abs()).collect(),
            });
            last_s = record.s;
        }
        if points.len() < 2 {
            return Err(RigidityError::DegenerateProfile {
                reason: format!(
                    "only {} distinct moving sample(s); need at least 2",
                    points.len()
                ),
            });
        }
        Ok(ElongationProfile {
            points,
            scale: f.configuration_scale(),
            edge_labels: (0..f.edges().len()).map(|e| f.edge_label(e)).collect(),
        })
    }

    /// Build an exact power-law profile `value = s^alpha` for testing the
    /// fitting pipeline end to end.
    pub fn synthetic(alpha: f64, s_values: &[f64]) -> Result<Self, RigidityError> {
        let mut points = Vec::new();
        let mut last_s = 0.0;
        for &s in s_values {
            // The negated form also drops a NaN sample.
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(s > last_s) {
                continue;
            }
            let value = s.powf(alpha);
            points.push(ProfilePoint {
                s,
                max_squared: value,
                max_linear: value,
                per_edge_squared: vec![value],
            });
            last_s = s;
        }
        if points.len() < 2 {
            return Err(RigidityError::DegenerateProfile {
                reason: "synthetic profile needs at least 2 increasing positive s".into(),
            });
        }
        Ok(ElongationProfile {
            points,
            scale: 1.0,
            edge_labels: vec!["synthetic".into()],
        })
    }

    /// Profile entries in increasing arclength order.
    pub fn points(&self) -> &[ProfilePoint] {
        &self.points
    }

    /// Configuration scale used for the noise floor.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Edge labels matching the per-edge columns.
    pub fn edge_labels(&self) -> &[String] {
        &self.edge_labels
    }
}

/// Result of a log-log order fit.
///
/// When too few samples rise above the numerical noise floor the fit is
/// withheld (`slope`, `fit_window`, `r_squared` are `None`) and `floor_hit`
/// is set instead: the path moved while its elongations stayed at rounding
/// level, which is itself the strongest possible witness of flexibility.
#[derive(Debug, Clone)]
pub struct OrderEstimate {
    /// Fitted log-log slope, when a fit was possible.
    pub slope: Option<f64>,
    /// Arclength range `(s_low, s_high)` the fit used.
    pub fit_window: Option<(f64, f64)>,
    /// Coefficient of determination of the fit.
    pub r_squared: Option<f64>,
    /// True when fewer than eight samples exceeded the noise floor.
    pub floor_hit: bool,
    /// Per-edge slopes over the same window (squared measure), `None` for
    /// edges without enough above-floor samples there.
    pub per_edge: Vec<Option<f64>>,
    /// Number of samples above the noise floor.
    pub usable_points: usize,
}

/// Minimum samples above the floor before a fit is attempted, and minimum
/// samples per edge before a per-edge slope is reported.
const MIN_FIT_POINTS: usize = 8;
const MIN_EDGE_POINTS: usize = 4;

fn log_log_slope(points: &[(f64, f64)]) -> Result<(f64, f64), RigidityError> {
    let n = points.len() as f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    for (x, y) in points {
        sx += x;
        sy += y;
    }
    let (mx, my) = (sx / n, sy / n);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in points {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return Err(RigidityError::DegenerateFit);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (x, y) in points {
        let fit = slope * x + intercept;
        ss_res += (y - fit) * (y - fit);
        ss_tot += (y - my) * (y - my);
    }
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok((slope, r_squared))
}

/// Fit the decay exponent of the worst-edge elongation against arclength.
///
/// Samples below the noise floor (`NOISE_FLOOR_REL` times the configuration
/// scale) are excluded. The fit window starts as the lowest decade of usable
/// arclengths and widens a decade at a time until it holds at least eight
/// samples, so the estimate leans on the asymptotic end of the data without
/// starving itself on sparse profiles.
pub fn fit_order(
    profile: &ElongationProfile,
    measure: Measure,
) -> Result<OrderEstimate, RigidityError> {
    let floor = tol::NOISE_FLOOR_REL * profile.scale;
    let edge_count = profile.edge_labels.len();
    let usable: Vec<&ProfilePoint> = profile
        .points
        .iter()
        .filter(|p| {
            let value = match measure {
                Measure::Squared => p.max_squared,
                Measure::Linear => p.max_linear,
            };
            value > floor
        })
        .collect();
    if usable.len() < MIN_FIT_POINTS {
        return Ok(OrderEstimate {
            slope: None,
            fit_window: None,
            r_squared: None,
            floor_hit: true,
            per_edge: vec![None; edge_count],
            usable_points: usable.len(),
        });
    }

    let s_low = usable[0].s;
    let mut decades = 1;
    let window = loop {
        let s_high = s_low * 10f64.powi(decades);
        let candidate: Vec<&ProfilePoint> =
            usable.iter().copied().filter(|p| p.s <= s_high).collect();
        if candidate.len() >= MIN_FIT_POINTS || candidate.len() == usable.len() {
            break candidate;
        }
        decades += 1;
    };

    let fit_points: Vec<(f64, f64)> = window
        .iter()
        .map(|p| {
            let value = match measure {
                Measure::Squared => p.max_squared,
                Measure::Linear => p.max_linear,
            };
            (p.s.log10(), value.log10())
        })
        .collect();
    let (slope, r_squared) = log_log_slope(&fit_points)?;
    let fit_window = (
        window.first().map(|p| p.s).unwrap_or(s_low),
        window.last().map(|p| p.s).unwrap_or(s_low),
    );

    let per_edge = (0..edge_count)
        .map(|e| {
            let edge_points: Vec<(f64, f64)> = window
                .iter()
                .filter(|p| p.per_edge_squared[e] > floor)
                .map(|p| (p.s.log10(), p.per_edge_squared[e].log10()))
                .collect();
            if edge_points.len() < MIN_EDGE_POINTS {
                None
            } else {
                log_log_slope(&edge_points).ok().map(|(slope, _)| slope)
            }
        })
        .collect();

    Ok(OrderEstimate {
        slope: Some(slope),
        fit_window: Some(fit_window),
        r_squared: Some(r_squared),
        floor_hit: false,
        per_edge,
        usable_points: usable.len(),
    })
}

/// Verdict of comparing a fitted order against a claimed flex order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    /// The profile decays faster than order n motion requires, or vanished
    /// into the noise floor: the path witnesses an order n flex.
    WitnessesFlexibility,
    /// The decay is no faster than s^(n + margin); nothing is certified.
    DoesNotWitness,
}

/// Compare a fitted slope against claimed flex order `n`.
///
/// A flex of order n admits paths with elongations of size o(s^n), so a
/// slope above `n + CLASSIFY_MARGIN` (or a profile lost below the noise
/// floor) counts as a witness. The margin absorbs fitting noise; everything
/// else is a conservative "does not witness".
pub fn classify(estimate: &OrderEstimate, n: usize) -> Result<Classification, RigidityError> {
    if n < 1 {
        return Err(RigidityError::OrderOutOfRange { n });
    }
    if estimate.floor_hit {
        return Ok(Classification::WitnessesFlexibility);
    }
    match estimate.slope {
        Some(alpha) if alpha > n as f64 + tol::CLASSIFY_MARGIN => {
            Ok(Classification::WitnessesFlexibility)
        }
        _ => Ok(Classification::DoesNotWitness),
    }
}
