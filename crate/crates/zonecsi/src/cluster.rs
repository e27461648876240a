//! RSS-weighted fuzzy c-means over multipath parameter vectors.
//!
//! Each existent path is the 5-vector [aaod, eaod, aaoa, eaoa, delay]. The
//! four angle coordinates live on a 2-pi circle, so distances wrap; delay is
//! plain Euclidean. Path weights are linear received powers (milliwatts),
//! entering centroid updates only; memberships are weight-free because the
//! per-path weight cancels inside the membership minimizer.
//!
//! The recorded objective is the weighted functional
//! `J = sum_l sum_j P_l u_lj^m E_lj^2`, which both update steps minimize
//! alternately, making the history provably non-increasing. Angular centroid
//! means are taken over branch-aligned coordinates (each angle re-expressed
//! within pi of the current centroid); for compact clusters this is exactly
//! the plain weighted mean, and it keeps the mean a descent step when a
//! cluster straddles the -pi/pi seam.

use crate::error::{Error, Result};
use crate::raytrace::PathRecord;
use crate::seed::rng_for;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const TWO_PI: f64 = 2.0 * PI;

/// Per-path feature vector [aaod, eaod, aaoa, eaoa, delay_s].
pub type FeatureVec = [f64; 5];
/// Cluster centroid in the same coordinates.
pub type Centroid = [f64; 5];

/// Deviation folded to [-pi, pi): `mod(|delta| + pi, 2 pi) - pi`.
fn wrapped_deviation(delta: f64) -> f64 {
    ((delta.abs() + PI).rem_euclid(TWO_PI)) - PI
}

/// Nearest-branch signed wrap: `delta - 2 pi round(delta / 2 pi)`.
fn wrap_signed(delta: f64) -> f64 {
    delta - TWO_PI * (delta / TWO_PI).round()
}

/// Periodic distance: wrap the four angle deviations, keep delay linear.
pub fn angular_distance(a: &FeatureVec, b: &FeatureVec) -> f64 {
    let mut acc = 0.0;
    for i in 0..4 {
        let w = wrapped_deviation(a[i] - b[i]);
        acc += w * w;
    }
    let dd = a[4] - b[4];
    (acc + dd * dd).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FcmConfig {
    pub cluster_count: usize,
    /// Fuzzifier m > 1.
    pub fuzzifier: f64,
    /// Stop once the objective decrease falls below this.
    pub epsilon: f64,
    pub max_iterations: usize,
    pub rng_seed: u64,
}

impl Default for FcmConfig {
    fn default() -> Self {
        FcmConfig {
            cluster_count: 2,
            fuzzifier: 2.0,
            epsilon: 1e-6,
            max_iterations: 500,
            rng_seed: 0,
        }
    }
}

impl FcmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cluster_count == 0 {
            return Err(Error::InvalidConfig("cluster count must be >= 1".into()));
        }
        if !(self.fuzzifier > 1.0) {
            return Err(Error::InvalidConfig(format!(
                "fuzzifier must be > 1, got {}",
                self.fuzzifier
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// Row-stochastic membership matrix: `get(path, cluster)`, rows sum to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipMatrix {
    n_paths: usize,
    n_clusters: usize,
    data: Vec<f64>,
}

impl MembershipMatrix {
    /// Builds a matrix from per-path rows. Rows must share one non-zero
    /// length and each must sum to 1 within 1e-9.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_clusters = rows.first().map(|r| r.len()).unwrap_or(0);
        if n_clusters == 0 {
            return Err(Error::InvalidArgument(
                "membership matrix needs at least one path and cluster".into(),
            ));
        }
        let mut data = Vec::with_capacity(rows.len() * n_clusters);
        for (l, row) in rows.iter().enumerate() {
            if row.len() != n_clusters {
                return Err(Error::InvalidArgument(format!(
                    "membership row {l} has {} entries, expected {n_clusters}",
                    row.len()
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "membership row {l} sums to {sum}, expected 1"
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(MembershipMatrix {
            n_paths: rows.len(),
            n_clusters,
            data,
        })
    }

    fn zeros(n_paths: usize, n_clusters: usize) -> Self {
        MembershipMatrix {
            n_paths,
            n_clusters,
            data: vec![0.0; n_paths * n_clusters],
        }
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn get(&self, path: usize, cluster: usize) -> f64 {
        self.data[path * self.n_clusters + cluster]
    }

    pub fn row(&self, path: usize) -> &[f64] {
        &self.data[path * self.n_clusters..(path + 1) * self.n_clusters]
    }

    fn row_mut(&mut self, path: usize) -> &mut [f64] {
        &mut self.data[path * self.n_clusters..(path + 1) * self.n_clusters]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcmFit {
    pub memberships: MembershipMatrix,
    pub centroids: Vec<Centroid>,
    /// Weighted objective after each completed iteration.
    pub objective_history: Vec<f64>,
}

fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Feature vectors and linear-power weights of existent paths.
fn features_and_weights(paths: &[PathRecord]) -> Result<(Vec<FeatureVec>, Vec<f64>)> {
    let mut feats = Vec::with_capacity(paths.len());
    let mut weights = Vec::with_capacity(paths.len());
    for (i, p) in paths.iter().enumerate() {
        if !p.existent {
            return Err(Error::InvalidArgument(format!(
                "path {i} is non-existent; clustering expects existent paths only"
            )));
        }
        if !p.rss_dbm.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "path {i} has non-finite RSS {}",
                p.rss_dbm
            )));
        }
        feats.push(p.features());
        weights.push(dbm_to_mw(p.rss_dbm));
    }
    Ok((feats, weights))
}

fn update_memberships(
    feats: &[FeatureVec],
    centroids: &[Centroid],
    fuzzifier: f64,
    u: &mut MembershipMatrix,
) {
    let p = 2.0 / (fuzzifier - 1.0);
    let c = centroids.len();
    let mut dist = vec![0.0f64; c];
    for (l, x) in feats.iter().enumerate() {
        let mut min_d = f64::INFINITY;
        for (j, v) in centroids.iter().enumerate() {
            dist[j] = angular_distance(x, v);
            min_d = min_d.min(dist[j]);
        }
        let row = u.row_mut(l);
        if min_d == 0.0 {
            // Path coincides with a centroid: full membership to the first
            // zero-distance cluster.
            let first = dist.iter().position(|d| *d == 0.0).unwrap();
            for (j, slot) in row.iter_mut().enumerate() {
                *slot = if j == first { 1.0 } else { 0.0 };
            }
            continue;
        }
        let mut sum = 0.0;
        for (j, slot) in row.iter_mut().enumerate() {
            let r = (min_d / dist[j]).powf(p);
            *slot = r;
            sum += r;
        }
        for slot in row.iter_mut() {
            *slot /= sum;
        }
    }
}

fn update_centroids(
    feats: &[FeatureVec],
    weights: &[f64],
    u: &MembershipMatrix,
    fuzzifier: f64,
    centroids: &mut [Centroid],
) {
    for (j, v) in centroids.iter_mut().enumerate() {
        let mut num = [0.0f64; 5];
        let mut den = 0.0f64;
        for (l, x) in feats.iter().enumerate() {
            let coeff = weights[l] * u.get(l, j).powf(fuzzifier);
            den += coeff;
            for i in 0..4 {
                // Branch-align the angle to within pi of the current centroid.
                num[i] += coeff * (v[i] + wrap_signed(x[i] - v[i]));
            }
            num[4] += coeff * x[4];
        }
        if den > 0.0 {
            for i in 0..5 {
                v[i] = num[i] / den;
            }
        }
        // A cluster with zero weighted mass keeps its previous centroid.
    }
}

fn weighted_objective(
    feats: &[FeatureVec],
    weights: &[f64],
    u: &MembershipMatrix,
    centroids: &[Centroid],
    fuzzifier: f64,
) -> f64 {
    let mut j_total = 0.0;
    for (l, x) in feats.iter().enumerate() {
        for (j, v) in centroids.iter().enumerate() {
            let e = angular_distance(x, v);
            j_total += weights[l] * u.get(l, j).powf(fuzzifier) * e * e;
        }
    }
    j_total
}

/// Fits fuzzy c-means. Centroids initialize from `cluster_count` distinct
/// path indices drawn without replacement from the seeded stream; iteration
/// stops when the objective decrease drops below `epsilon` or after
/// `max_iterations`. Deterministic for a fixed seed.
pub fn fcm_fit(paths: &[PathRecord], cfg: &FcmConfig) -> Result<FcmFit> {
    cfg.validate()?;
    let (feats, weights) = features_and_weights(paths)?;
    if feats.len() < cfg.cluster_count {
        return Err(Error::InvalidArgument(format!(
            "{} paths cannot seed {} clusters",
            feats.len(),
            cfg.cluster_count
        )));
    }
    let mut rng = rng_for(cfg.rng_seed, "fcm-init");
    let picks = rand::seq::index::sample(&mut rng, feats.len(), cfg.cluster_count);
    let mut centroids: Vec<Centroid> = picks.iter().map(|i| feats[i]).collect();
    let mut u = MembershipMatrix::zeros(feats.len(), cfg.cluster_count);
    let mut history = Vec::new();

    for _ in 0..cfg.max_iterations {
        update_memberships(&feats, &centroids, cfg.fuzzifier, &mut u);
        update_centroids(&feats, &weights, &u, cfg.fuzzifier, &mut centroids);
        let j_now = weighted_objective(&feats, &weights, &u, &centroids, cfg.fuzzifier);
        let done = history
            .last()
            .map(|prev: &f64| (prev - j_now).abs() < cfg.epsilon)
            .unwrap_or(false);
        history.push(j_now);
        debug_assert!(
            history.len() < 2 || j_now <= history[history.len() - 2] + 1e-9,
            "objective rose: {} -> {}",
            history[history.len() - 2],
            j_now
        );
        if done {
            break;
        }
    }
    Ok(FcmFit {
        memberships: u,
        centroids,
        objective_history: history,
    })
}

// ── Validity indices ────────────────────────────────────────────────────────

/// Partition scores of one fitted candidate. `pc` rewards crispness (1 is
/// crisp), `pe` penalizes entropy (0 is crisp), `sc`, `s` and `xb` reward
/// compact, well-separated clusters (smaller is better).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub cluster_count: usize,
    pub pc: f64,
    pub pe: f64,
    pub sc: f64,
    pub s: f64,
    pub xb: f64,
}

/// Mean squared membership: 1 for a crisp partition, 1/c for a uniform one.
pub fn partition_coefficient(u: &MembershipMatrix) -> f64 {
    let mut pc = 0.0;
    for l in 0..u.n_paths() {
        for val in u.row(l) {
            pc += val * val;
        }
    }
    pc / u.n_paths() as f64
}

/// Mean membership entropy (natural log, 0 ln 0 = 0): 0 for a crisp
/// partition, ln c for a uniform one.
pub fn partition_entropy(u: &MembershipMatrix) -> f64 {
    let mut pe = 0.0;
    for l in 0..u.n_paths() {
        for val in u.row(l) {
            if *val > 0.0 {
                pe += val * val.ln();
            }
        }
    }
    -pe / u.n_paths() as f64
}

/// Hard assignment: argmax membership per path, ties to the lowest index.
pub fn hard_assign(u: &MembershipMatrix) -> Vec<usize> {
    (0..u.n_paths())
        .map(|l| {
            let row = u.row(l);
            let mut best = 0usize;
            for (j, val) in row.iter().enumerate() {
                if *val > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Evaluates the five validity indices for a fit, using the same periodic
/// distance as the fit itself. Signals a degenerate partition when two
/// centroids coincide or a cluster has no hard-assigned member.
pub fn validity_indices(
    paths: &[PathRecord],
    fit: &FcmFit,
    fuzzifier: f64,
) -> Result<ValidityReport> {
    let (feats, _) = features_and_weights(paths)?;
    let u = &fit.memberships;
    let c = fit.centroids.len();
    let n = feats.len() as f64;
    if u.n_paths() != feats.len() || u.n_clusters() != c {
        return Err(Error::InvalidArgument(
            "membership matrix does not match path set".into(),
        ));
    }

    let mut min_sep2 = f64::INFINITY;
    for j in 0..c {
        for q in (j + 1)..c {
            let d = angular_distance(&fit.centroids[j], &fit.centroids[q]);
            min_sep2 = min_sep2.min(d * d);
        }
    }
    if c > 1 && min_sep2 == 0.0 {
        return Err(Error::DegeneratePartition(
            "two centroids coincide".into(),
        ));
    }

    let counts = {
        let assign = hard_assign(u);
        let mut counts = vec![0usize; c];
        for a in assign {
            counts[a] += 1;
        }
        counts
    };
    if counts.iter().any(|&k| k == 0) {
        return Err(Error::DegeneratePartition(
            "a cluster has no hard-assigned path".into(),
        ));
    }

    let pc = partition_coefficient(u);
    let pe = partition_entropy(u);
    let mut fuzzy_within = 0.0; // sum u^m E^2
    let mut square_within = 0.0; // sum u^2 E^2
    let mut per_cluster_within = vec![0.0f64; c];
    for (l, x) in feats.iter().enumerate() {
        for j in 0..c {
            let val = u.get(l, j);
            let e = angular_distance(x, &fit.centroids[j]);
            let um = val.powf(fuzzifier);
            fuzzy_within += um * e * e;
            square_within += val * val * e * e;
            per_cluster_within[j] += um * e * e;
        }
    }

    let mut sc = 0.0;
    for j in 0..c {
        let mut sep_sum = 0.0;
        for q in 0..c {
            let d = angular_distance(&fit.centroids[q], &fit.centroids[j]);
            sep_sum += d * d;
        }
        if sep_sum == 0.0 {
            return Err(Error::DegeneratePartition(
                "zero total centroid separation".into(),
            ));
        }
        sc += per_cluster_within[j] / (counts[j] as f64 * sep_sum);
    }

    let (s, xb) = if c == 1 {
        (f64::NAN, f64::NAN)
    } else {
        (
            fuzzy_within / (n * min_sep2),
            square_within / (n * min_sep2),
        )
    };

    Ok(ValidityReport {
        cluster_count: c,
        pc,
        pe,
        sc,
        s,
        xb,
    })
}

// ── Cluster-count selection ─────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub cluster_count: usize,
    /// None when the candidate fit produced a degenerate partition.
    pub report: Option<ValidityReport>,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    pub best_c: usize,
    pub candidates: Vec<CandidateScore>,
}

/// Deterministic fit for one candidate count under a selection scan: the
/// candidate seed is derived from the base seed and the count, so re-fitting
/// the winning count reproduces the scan's fit bit for bit.
pub fn fit_for_count(paths: &[PathRecord], base: &FcmConfig, count: usize) -> Result<FcmFit> {
    let cfg = FcmConfig {
        cluster_count: count,
        rng_seed: crate::seed::subseed(base.rng_seed, &format!("fcm:c={count}")),
        ..*base
    };
    fcm_fit(paths, &cfg)
}

/// Scans candidate counts 2..=c_max, scores the five validity indices after
/// min-max normalization across candidates (constant columns normalize to a
/// neutral 0.5), and picks the count with the best combined score
/// `pc_n + (1-pe_n) + (1-sc_n) + (1-s_n) + (1-xb_n)`; ties go to the smaller
/// count. Degenerate candidates are reported but not scored unless nothing
/// else is available.
pub fn select_cluster_count(
    paths: &[PathRecord],
    c_max: usize,
    base: &FcmConfig,
) -> Result<SelectionOutcome> {
    if c_max < 2 {
        return Err(Error::InvalidArgument(format!(
            "c_max must be at least 2, got {c_max}"
        )));
    }
    let top = c_max.min(paths.len());
    if top < 2 {
        return Err(Error::InvalidArgument(format!(
            "{} paths cannot support a 2-cluster candidate",
            paths.len()
        )));
    }
    let mut candidates = Vec::new();
    for c in 2..=top {
        let fit = fit_for_count(paths, base, c)?;
        let report = match validity_indices(paths, &fit, base.fuzzifier) {
            Ok(r) => Some(r),
            Err(Error::DegeneratePartition(msg)) => {
                log::warn!("candidate c={c} degenerate: {msg}");
                None
            }
            Err(e) => return Err(e),
        };
        candidates.push(CandidateScore {
            cluster_count: c,
            report,
            score: None,
        });
    }

    let scored: Vec<usize> = candidates
        .iter()
        .enumerate()
        .filter(|(_, cand)| {
            cand.report
                .map(|r| {
                    r.pc.is_finite()
                        && r.pe.is_finite()
                        && r.sc.is_finite()
                        && r.s.is_finite()
                        && r.xb.is_finite()
                })
                .unwrap_or(false)
        })
        .map(|(i, _)| i)
        .collect();

    if scored.is_empty() {
        log::warn!("every candidate count is degenerate; falling back to c=2");
        return Ok(SelectionOutcome {
            best_c: candidates[0].cluster_count,
            candidates,
        });
    }

    let column = |f: fn(&ValidityReport) -> f64| -> Vec<f64> {
        scored
            .iter()
            .map(|&i| f(candidates[i].report.as_ref().unwrap()))
            .collect()
    };
    let normalize = |vals: &[f64]| -> Vec<f64> {
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        vals.iter()
            .map(|v| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 })
            .collect()
    };
    let pc_n = normalize(&column(|r| r.pc));
    let pe_n = normalize(&column(|r| r.pe));
    let sc_n = normalize(&column(|r| r.sc));
    let s_n = normalize(&column(|r| r.s));
    let xb_n = normalize(&column(|r| r.xb));

    let mut best_idx = scored[0];
    let mut best_score = f64::NEG_INFINITY;
    for (k, &i) in scored.iter().enumerate() {
        let score = pc_n[k] + (1.0 - pe_n[k]) + (1.0 - sc_n[k]) + (1.0 - s_n[k]) + (1.0 - xb_n[k]);
        candidates[i].score = Some(score);
        if score > best_score {
            best_score = score;
            best_idx = i;
        }
    }
    Ok(SelectionOutcome {
        best_c: candidates[best_idx].cluster_count,
        candidates,
    })
}

/// Writes the candidate table as CSV (`c,pc,pe,sc,s,xb,score`); degenerate
/// candidates serialize their indices as NaN.
pub fn write_validity_csv(path: &std::path::Path, outcome: &SelectionOutcome) -> Result<()> {
    let file =
        std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(["c", "pc", "pe", "sc", "s", "xb", "score"])?;
    for cand in &outcome.candidates {
        let r = cand.report.unwrap_or(ValidityReport {
            cluster_count: cand.cluster_count,
            pc: f64::NAN,
            pe: f64::NAN,
            sc: f64::NAN,
            s: f64::NAN,
            xb: f64::NAN,
        });
        w.write_record(&[
            cand.cluster_count.to_string(),
            r.pc.to_string(),
            r.pe.to_string(),
            r.sc.to_string(),
            r.s.to_string(),
            r.xb.to_string(),
            cand.score.map(|s| s.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}


#[cfg(test)]
mod prop_tests {
    use super::tests::path;
    use super::*;
    use proptest::prelude::*;

    fn arb_paths() -> impl Strategy<Value = Vec<PathRecord>> {
        prop::collection::vec(
            (
                -PI..PI,
                -1.5f64..1.5,
                -PI..PI,
                -1.5f64..1.5,
                0.0f64..1e-7,
                -90.0f64..-30.0,
            ),
            10..60,
        )
        .prop_map(|rows| {
            rows.into_iter()
                .map(|(a, b, c, d, t, rss)| path([a, b, c, d, t], rss))
                .collect()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn rows_sum_to_one_and_objective_never_rises(
            paths in arb_paths(),
            c in 2usize..5,
            seed in 0u64..1_000_000,
        ) {
            let cfg = FcmConfig { cluster_count: c, rng_seed: seed, ..FcmConfig::default() };
            let fit = fcm_fit(&paths, &cfg).unwrap();
            for l in 0..paths.len() {
                let sum: f64 = fit.memberships.row(l).iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-9);
            }
            for w in fit.objective_history.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9);
            }
        }

        #[test]
        fn angle_shift_by_full_turns_changes_nothing(
            paths in arb_paths(),
            turns in -2i32..3,
            coord in 0usize..4,
            seed in 0u64..1_000_000,
        ) {
            let cfg = FcmConfig { cluster_count: 3, rng_seed: seed, ..FcmConfig::default() };
            let base = fcm_fit(&paths, &cfg).unwrap();
            let shifted: Vec<PathRecord> = paths.iter().map(|p| {
                let mut f = p.features();
                f[coord] += turns as f64 * TWO_PI;
                let mut q = *p;
                q.aaod = f[0];
                q.eaod = f[1];
                q.aaoa = f[2];
                q.eaoa = f[3];
                q
            }).collect();
            let moved = fcm_fit(&shifted, &cfg).unwrap();
            prop_assert_eq!(base.objective_history.len(), moved.objective_history.len());
            for (a, b) in base.objective_history.iter().zip(&moved.objective_history) {
                prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
            }
        }

        #[test]
        fn constant_weight_scaling_leaves_centroid_update_unchanged(
            paths in arb_paths(),
            scale in 1e-3f64..1e3,
            seed in 0u64..1_000_000,
        ) {
            // The weights normalize out of a single centroid update step.
            let cfg = FcmConfig { cluster_count: 3, rng_seed: seed, ..FcmConfig::default() };
            let fit = fcm_fit(&paths, &cfg).unwrap();
            let (feats, weights) = features_and_weights(&paths).unwrap();
            let scaled: Vec<f64> = weights.iter().map(|w| w * scale).collect();
            let mut base = fit.centroids.clone();
            let mut boosted = fit.centroids.clone();
            update_centroids(&feats, &weights, &fit.memberships, cfg.fuzzifier, &mut base);
            update_centroids(&feats, &scaled, &fit.memberships, cfg.fuzzifier, &mut boosted);
            for (a, b) in base.iter().zip(&boosted) {
                for i in 0..5 {
                    prop_assert!((a[i] - b[i]).abs() <= 1e-12 * a[i].abs().max(1.0));
                }
            }
        }

        #[test]
        fn validity_invariant_under_cluster_relabeling(
            paths in arb_paths(),
            seed in 0u64..1_000_000,
        ) {
            let cfg = FcmConfig { cluster_count: 3, rng_seed: seed, ..FcmConfig::default() };
            let fit = fcm_fit(&paths, &cfg).unwrap();
            let Ok(base) = validity_indices(&paths, &fit, cfg.fuzzifier) else {
                return Ok(()); // degenerate draw; nothing to compare
            };
            // Rotate cluster labels by one.
            let c = fit.centroids.len();
            let mut rotated = fit.clone();
            rotated.centroids.rotate_left(1);
            let mut data = Vec::with_capacity(paths.len() * c);
            for l in 0..paths.len() {
                for j in 0..c {
                    data.push(fit.memberships.get(l, (j + 1) % c));
                }
            }
            rotated.memberships = MembershipMatrix { n_paths: paths.len(), n_clusters: c, data };
            let perm = validity_indices(&paths, &rotated, cfg.fuzzifier).unwrap();
            prop_assert!((base.pc - perm.pc).abs() < 1e-12);
            prop_assert!((base.pe - perm.pe).abs() < 1e-12);
            prop_assert!((base.sc - perm.sc).abs() < 1e-9);
            prop_assert!((base.s - perm.s).abs() < 1e-9);
            prop_assert!((base.xb - perm.xb).abs() < 1e-9);
        }
    }
}
