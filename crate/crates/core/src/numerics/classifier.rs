//! Linear discrimination of single-shot IQ clouds.
//!
//! The discriminator rotates the IQ plane so the line between the class
//! means falls on the in-phase axis, then thresholds the rotated I
//! coordinate. The threshold maximizes the assignment fidelity
//! `F = 1 - (P(err|0) + P(err|1)) / 2` over midpoints of adjacent sorted
//! projections.

use crate::platform::ClassifierParams;

#[derive(Debug, Clone)]
pub struct TrainedClassifier {
    pub params: ClassifierParams,
    /// Set when the class means coincide and no separation axis exists.
    pub degenerate: bool,
}

/// Rotated in-phase coordinate of a point.
fn project(point: (f64, f64), angle: f64) -> f64 {
    point.0 * angle.cos() - point.1 * angle.sin()
}

fn mean(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let (mut i, mut q) = (0.0, 0.0);
    for p in points {
        i += p.0;
        q += p.1;
    }
    (i / n, q / n)
}

/// Train on labelled shot clouds for the ground and excited state.
///
/// Requires at least two points per class. When the class means are closer
/// than 1e-12 the result is flagged degenerate with fidelity 0.5 and the
/// threshold at the common mean.
pub fn train_linear_discriminant(
    shots0: &[(f64, f64)],
    shots1: &[(f64, f64)],
) -> TrainedClassifier {
    assert!(
        shots0.len() >= 2 && shots1.len() >= 2,
        "need at least 2 shots per class"
    );
    let m0 = mean(shots0);
    let m1 = mean(shots1);
    let di = m1.0 - m0.0;
    let dq = m1.1 - m0.1;
    if (di * di + dq * dq).sqrt() < 1e-12 {
        return TrainedClassifier {
            params: ClassifierParams {
                angle_rad: 0.0,
                threshold: m0.0,
                assignment_fidelity: 0.5,
            },
            degenerate: true,
        };
    }
    let angle = -dq.atan2(di);

    // Projections carry their class label; class 1 lands at higher values.
    let mut projections: Vec<(f64, u8)> = shots0
        .iter()
        .map(|&p| (project(p, angle), 0u8))
        .chain(shots1.iter().map(|&p| (project(p, angle), 1u8)))
        .collect();
    projections.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let n0 = shots0.len() as f64;
    let n1 = shots1.len() as f64;
    // Sweep thresholds between adjacent projections. With the threshold
    // after index k, bits are 1 for projections > threshold: errors are
    // class-1 points at or below k plus class-0 points above k.
    let total0: f64 = n0;
    let mut below0 = 0.0;
    let mut below1 = 0.0;
    let mut best_fidelity = -1.0;
    let mut best_threshold = 0.0;
    for k in 0..projections.len() - 1 {
        match projections[k].1 {
            0 => below0 += 1.0,
            _ => below1 += 1.0,
        }
        if projections[k + 1].0 == projections[k].0 {
            continue;
        }
        let err0 = (total0 - below0) / n0;
        let err1 = below1 / n1;
        let fidelity = 1.0 - 0.5 * (err0 + err1);
        if fidelity > best_fidelity {
            best_fidelity = fidelity;
            best_threshold = 0.5 * (projections[k].0 + projections[k + 1].0);
        }
    }
    if best_fidelity < 0.0 {
        // All projections coincide.
        return TrainedClassifier {
            params: ClassifierParams {
                angle_rad: crate::numerics::wrap_phase(angle),
                threshold: projections[0].0,
                assignment_fidelity: 0.5,
            },
            degenerate: true,
        };
    }

    TrainedClassifier {
        params: ClassifierParams {
            angle_rad: crate::numerics::wrap_phase(angle),
            threshold: best_threshold,
            assignment_fidelity: best_fidelity,
        },
        degenerate: false,
    }
}

/// Classify shots: bit 1 iff the rotated-I projection exceeds the threshold
/// (strict, so a point exactly at the threshold reads 0).
pub fn classify(shots: &[(f64, f64)], params: &ClassifierParams) -> Vec<u8> {
    shots
        .iter()
        .map(|&p| u8::from(project(p, params.angle_rad) > params.threshold))
        .collect()
}
