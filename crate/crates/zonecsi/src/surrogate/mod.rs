//! Learned stand-ins for ray tracing: a convolutional existence classifier,
//! six bagged regression-tree ensembles for path parameters, and a one-step
//! feed-forward baseline that regresses everything jointly.
//!
//! Every candidate path (one LoS slot plus one slot per plane, per location)
//! is described by 15 features: BS x,y,z; UT x,y,z; and the first three
//! vertices of the reflecting plane. LoS slots have no plane, so their plane
//! block repeats the BS coordinates, keeping the width fixed.

pub mod cnn;
pub mod ffnn;
pub mod trees;

use crate::error::{Error, Result};
use crate::geom::Point3;
use crate::raytrace::{PathKind, PathRecord};
use crate::scene::{Plane, Scene};
use crate::seed::rng_for;
use serde::{Deserialize, Serialize};

pub use cnn::{train_classifier, ClassifierModel, ClassifierSpec, FocalVariant};
pub use ffnn::{train_one_step, OneStepModel, OneStepSpec};
pub use trees::{train_regressors, Ensemble, EnsembleSpec, RegressorSet};

/// Regression target order used everywhere: angles, power, delay.
pub const TARGET_NAMES: [&str; 6] = ["aaod", "eaod", "aaoa", "eaoa", "rss", "delay"];

pub type FeatureVector = [f64; 15];

/// One candidate path slot with its geometry features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidatePath {
    pub ut_index: usize,
    pub kind: PathKind,
    pub plane_id: Option<usize>,
    pub features: FeatureVector,
}

/// A candidate path with its traced ground truth. Targets of non-existent
/// paths are all zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledPath {
    pub candidate: CandidatePath,
    pub existent: bool,
    pub targets: [f64; 6],
}

/// Concatenates BS, UT, and the plane's first three vertices; a missing
/// plane (the LoS slot) repeats the BS coordinates.
pub fn extract_features(bs: Point3, ut: Point3, plane: Option<&Plane>) -> FeatureVector {
    let mut f = [0.0f64; 15];
    let (v1, v2, v3) = match plane {
        Some(p) => (p.vertices[0], p.vertices[1], p.vertices[2]),
        None => (bs, bs, bs),
    };
    for (i, p) in [bs, ut, v1, v2, v3].into_iter().enumerate() {
        f[3 * i] = p.x;
        f[3 * i + 1] = p.y;
        f[3 * i + 2] = p.z;
    }
    f
}

/// Pairs every traced record with its feature vector. Records must use the
/// location-major slot order produced by the tracer (LoS, then one slot per
/// plane).
pub fn build_dataset(
    scene: &Scene,
    locations: &[Point3],
    records: &[PathRecord],
) -> Result<Vec<LabeledPath>> {
    let slots = 1 + scene.planes.len();
    if records.len() != slots * locations.len() {
        return Err(Error::InvalidArgument(format!(
            "{} records do not fill {} locations x {} slots",
            records.len(),
            locations.len(),
            slots
        )));
    }
    let mut out = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        let ut = r.ut_index;
        if ut != i / slots {
            return Err(Error::InvalidArgument(format!(
                "record {i} is for location {ut}, expected location-major order"
            )));
        }
        let plane = match (r.kind, r.plane_id) {
            (PathKind::Los, None) => None,
            (PathKind::Refl, Some(p)) if p < scene.planes.len() => Some(&scene.planes[p]),
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "record {i} has inconsistent kind/plane ({:?}, {:?})",
                    r.kind, r.plane_id
                )))
            }
        };
        let features = extract_features(scene.bs_position, locations[ut], plane);
        let targets = if r.existent {
            [r.aaod, r.eaod, r.aaoa, r.eaoa, r.rss_dbm, r.delay_s]
        } else {
            [0.0; 6]
        };
        out.push(LabeledPath {
            candidate: CandidatePath {
                ut_index: ut,
                kind: r.kind,
                plane_id: r.plane_id,
                features,
            },
            existent: r.existent,
            targets,
        });
    }
    Ok(out)
}

/// Every candidate slot of every location, in the tracer's location-major
/// order (LoS first, then one slot per plane), featurized but unlabeled.
pub fn candidate_paths(scene: &Scene, locations: &[Point3]) -> Vec<CandidatePath> {
    let mut out = Vec::with_capacity(locations.len() * (1 + scene.planes.len()));
    for (i, ut) in locations.iter().enumerate() {
        out.push(CandidatePath {
            ut_index: i,
            kind: PathKind::Los,
            plane_id: None,
            features: extract_features(scene.bs_position, *ut, None),
        });
        for (p, plane) in scene.planes.iter().enumerate() {
            out.push(CandidatePath {
                ut_index: i,
                kind: PathKind::Refl,
                plane_id: Some(p),
                features: extract_features(scene.bs_position, *ut, Some(plane)),
            });
        }
    }
    out
}

/// Splits location indices 0..k into train/test. Train size is
/// round(ratio * k) clamped to [1, k-1]; the draw is seeded and both halves
/// come back sorted.
pub fn split_locations(k: usize, ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 locations to split, got {k}"
        )));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split ratio must be in (0,1), got {ratio}"
        )));
    }
    let n_train = ((ratio * k as f64).round() as usize).clamp(1, k - 1);
    let mut order: Vec<usize> = (0..k).collect();
    use rand::seq::SliceRandom;
    order.shuffle(&mut rng_for(seed, "split"));
    let mut train: Vec<usize> = order[..n_train].to_vec();
    let mut test: Vec<usize> = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Focal loss over both entries of a probability pair, as the training
/// objective is stated: -sum_v (1-p_v)^gamma alpha_v ln(p_v) with
/// alpha_0 = 1 - alpha_1. Probabilities are clamped at 1e-12.
pub fn focal_loss(p: [f64; 2], gamma: f64, alpha1: f64) -> f64 {
    let alpha = [1.0 - alpha1, alpha1];
    let mut loss = 0.0;
    for v in 0..2 {
        let pv = p[v].max(1e-12);
        loss += (1.0 - pv).powf(gamma) * alpha[v] * (-pv.ln());
    }
    loss
}

/// Single-term focal loss of the true class: (1-p_t)^gamma alpha_t (-ln p_t).
pub fn focal_loss_true_class(p_true: f64, gamma: f64, alpha_true: f64) -> f64 {
    let pv = p_true.max(1e-12);
    (1.0 - pv).powf(gamma) * alpha_true * (-pv.ln())
}

/// Confusion counts with the derived agreement measures. Ratios with a zero
/// denominator are NaN, never silently zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub kappa: f64,
}

/// Computes precision, recall, F-score, and Cohen's kappa from predicted and
/// true existence flags. Each ratio is a single division of integer-exact
/// numerator and denominator.
pub fn classification_metrics(predicted: &[bool], truth: &[bool]) -> Result<ClassificationMetrics> {
    if predicted.len() != truth.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions vs {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0u64, 0u64, 0u64, 0u64);
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(metrics_from_counts(tp, fp, tn, fn_))
}

pub fn metrics_from_counts(tp: u64, fp: u64, tn: u64, fn_: u64) -> ClassificationMetrics {
    let ratio = |num: u64, den: u64| {
        if den == 0 {
            f64::NAN
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f_score = ratio(2 * tp, 2 * tp + fp + fn_);
    // kappa = (p0 - pe) / (1 - pe) with p0, pe over n; multiplying through
    // by n^2 keeps both sides integer until the final division.
    let (tp, fp, tn, fn_128) = (tp as i128, fp as i128, tn as i128, fn_ as i128);
    let n = tp + fp + tn + fn_128;
    let agree_n2 = n * (tp + tn);
    let chance_n2 = (tp + fp) * (tp + fn_128) + (fn_128 + tn) * (fp + tn);
    let kappa = if n == 0 || n * n == chance_n2 {
        f64::NAN
    } else {
        (agree_n2 - chance_n2) as f64 / (n * n - chance_n2) as f64
    };
    ClassificationMetrics {
        tp: tp as u64,
        fp: fp as u64,
        tn: tn as u64,
        fn_: fn_ as u64,
        precision,
        recall,
        f_score,
        kappa,
    }
}

/// Two-step inference: the classifier gates each candidate, the ensembles
/// fill in parameters for paths ruled existent. Gated-off candidates get the
/// non-existent encoding (zero angles, rss -inf).
pub fn predict_paths(
    classifier: &ClassifierModel,
    regressors: &RegressorSet,
    candidates: &[CandidatePath],
) -> Vec<PathRecord> {
    candidates
        .iter()
        .map(|c| {
            let p = classifier.predict_proba(&c.features);
            if p[1] > p[0] {
                let y = regressors.predict(&c.features);
                PathRecord {
                    ut_index: c.ut_index,
                    kind: c.kind,
                    plane_id: c.plane_id,
                    aaod: y[0],
                    eaod: y[1],
                    aaoa: y[2],
                    eaoa: y[3],
                    rss_dbm: y[4],
                    delay_s: y[5],
                    existent: true,
                }
            } else {
                PathRecord::non_existent(c.ut_index, c.kind, c.plane_id)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn features_concatenate_in_order() {
        let bs = Point3::new(0.0, 0.0, 4.0);
        let ut = Point3::new(1.0, 2.0, 1.0);
        let plane = Plane {
            object_tag: None,
            material_id: "m".into(),
            vertices: vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
                Point3::new(1.0, 1.0, 0.0),
            ],
        };
        let f = extract_features(bs, ut, Some(&plane));
        assert_eq!(
            f,
            [0.0, 0.0, 4.0, 1.0, 2.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]
        );
        // LoS slot: plane block repeats the BS coordinates.
        let g = extract_features(bs, ut, None);
        assert_eq!(
            g,
            [0.0, 0.0, 4.0, 1.0, 2.0, 1.0, 0.0, 0.0, 4.0, 0.0, 0.0, 4.0, 0.0, 0.0, 4.0]
        );
        assert_eq!(g, extract_features(bs, ut, None));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let (train, test) = split_locations(10, 0.7, 42).unwrap();
        assert_eq!(train.len(), 7);
        assert_eq!(test.len(), 3);
        let (t2, s2) = split_locations(10, 0.7, 42).unwrap();
        assert_eq!(train, t2);
        assert_eq!(test, s2);
        let mut all: Vec<usize> = train.iter().chain(test.iter()).cloned().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert!(split_locations(1, 0.5, 0).is_err());
        // Extreme ratios still leave both sides non-empty.
        let (t, s) = split_locations(5, 0.999, 0).unwrap();
        assert_eq!((t.len(), s.len()), (4, 1));
    }

    #[test]
    fn focal_loss_hand_value() {
        let loss = focal_loss([0.1, 0.9], 2.0, 0.32);
        let expect = 0.81 * 0.68 * (-(0.1f64).ln()) + 0.01 * 0.32 * (-(0.9f64).ln());
        assert!((loss - expect).abs() < 1e-12);
        assert!((loss - 1.2686).abs() < 1e-4);
    }

    #[test]
    fn focal_loss_gamma_zero_is_half_cross_entropy() {
        for i in 1..100 {
            let p1 = i as f64 / 100.0;
            let p = [1.0 - p1, p1];
            let ce = -(p[0].ln()) - p[1].ln();
            assert!((focal_loss(p, 0.0, 0.5) - 0.5 * ce).abs() < 1e-10);
        }
    }

    #[test]
    fn focal_loss_clamps_zero_probability() {
        let loss = focal_loss([0.0, 1.0], 2.0, 0.5);
        assert!(loss.is_finite());
        assert!((loss - 0.5 * (-(1e-12f64).ln())).abs() < 1e-6);
    }

    #[test]
    fn kappa_worked_example_is_exact() {
        let m = metrics_from_counts(40, 20, 30, 10);
        assert_eq!(m.kappa, 0.4);
        assert_eq!(m.precision, 40.0 / 60.0);
        assert_eq!(m.recall, 0.8);
        assert!((m.f_score - 80.0 / 110.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_agreement_and_degenerate_cases() {
        let m = metrics_from_counts(50, 0, 50, 0);
        assert_eq!(m.kappa, 1.0);
        assert_eq!(m.precision, 1.0);
        assert_eq!(m.recall, 1.0);
        assert_eq!(m.f_score, 1.0);
        // All predicted negative on an imbalanced set: accuracy high, kappa 0.
        let m = metrics_from_counts(0, 0, 980, 20);
        assert!(m.precision.is_nan());
        assert_eq!(m.kappa, 0.0);
        // Single-class truth and prediction: chance agreement is total.
        let m = metrics_from_counts(10, 0, 0, 0);
        assert!(m.kappa.is_nan());
    }

    #[test]
    fn kappa_matches_brute_force_probability_form() {
        use rand::Rng;
        let mut rng = rng_for(31, "kappa");
        for _ in 0..50 {
            let (tp, fp, tn, fn_) = (
                rng.gen_range(0..200u64),
                rng.gen_range(0..200u64),
                rng.gen_range(0..200u64),
                rng.gen_range(1..200u64),
            );
            let m = metrics_from_counts(tp, fp, tn, fn_);
            let n = (tp + fp + tn + fn_) as f64;
            let p0 = (tp + tn) as f64 / n;
            let pe = ((tp + fp) as f64 * (tp + fn_) as f64
                + (fn_ + tn) as f64 * (fp + tn) as f64)
                / (n * n);
            if (1.0 - pe).abs() > 1e-12 {
                assert!((m.kappa - (p0 - pe) / (1.0 - pe)).abs() < 1e-12);
            }
        }
    }
}
