//! Bagged variance-reduction regression trees, one ensemble per path
//! parameter.
//!
//! Trees split on the 12 location-dependent features only (the three BS
//! coordinates are constant per scene and excluded). Training data is put
//! into a canonical order first, so predictions do not depend on the order
//! the caller assembled the rows in. Each tree sees a seeded bootstrap
//! resample and each node considers a seeded subset of candidate features.

use crate::error::{Error, Result};
use crate::seed::rng_for;
use crate::surrogate::{LabeledPath, TARGET_NAMES};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Feature indices trees may split on: everything but the BS block.
pub const ALLOWED_FEATURES: [usize; 12] = [3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleSpec {
    pub n_trees: usize,
    pub min_leaf_size: usize,
    /// Candidate features drawn per node, at most 12.
    pub predictors_to_sample: usize,
    /// Bootstrap draw per tree; None uses the training-set size.
    pub bootstrap_size: Option<usize>,
    pub cv_folds: usize,
    pub rng_seed: u64,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        EnsembleSpec {
            n_trees: 40,
            min_leaf_size: 3,
            predictors_to_sample: 8,
            bootstrap_size: None,
            cv_folds: 5,
            rng_seed: 0,
        }
    }
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidConfig("need at least one tree".into()));
        }
        if self.min_leaf_size == 0 {
            return Err(Error::InvalidConfig("min_leaf_size must be >= 1".into()));
        }
        if !(1..=ALLOWED_FEATURES.len()).contains(&self.predictors_to_sample) {
            return Err(Error::InvalidConfig(format!(
                "predictors_to_sample must be in 1..=12, got {}",
                self.predictors_to_sample
            )));
        }
        if self.cv_folds < 2 {
            return Err(Error::InvalidConfig("cv_folds must be >= 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    fn predict(&self, x: &[f64; 15]) -> f64 {
        match self {
            Node::Leaf(v) => *v,
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if x[*feature] <= *threshold {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
        }
    }

    fn collect_features(&self, out: &mut BTreeSet<usize>) {
        if let Node::Split {
            feature,
            left,
            right,
            ..
        } = self
        {
            out.insert(*feature);
            left.collect_features(out);
            right.collect_features(out);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub trees: Vec<Node>,
}

impl Ensemble {
    /// Bagged prediction: plain mean of the member trees.
    pub fn predict(&self, x: &[f64; 15]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn tree_predictions(&self, x: &[f64; 15]) -> Vec<f64> {
        self.trees.iter().map(|t| t.predict(x)).collect()
    }

    /// Every feature index any member splits on.
    pub fn features_used(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for t in &self.trees {
            t.collect_features(&mut out);
        }
        out
    }
}

/// Six ensembles in target order plus their cross-validated RMSE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorSet {
    pub spec: EnsembleSpec,
    pub ensembles: Vec<Ensemble>,
    pub cv_rmse: Vec<f64>,
}

impl RegressorSet {
    pub fn predict(&self, x: &[f64; 15]) -> [f64; 6] {
        let mut out = [0.0f64; 6];
        for (o, e) in out.iter_mut().zip(&self.ensembles) {
            *o = e.predict(x);
        }
        out
    }
}

struct TreeBuilder<'a> {
    xs: &'a [[f64; 15]],
    ys: &'a [f64],
    min_leaf: usize,
    k_features: usize,
}

impl TreeBuilder<'_> {
    fn build(&self, idx: &mut [usize], rng: &mut ChaCha8Rng) -> Node {
        let n = idx.len();
        let mean = idx.iter().map(|&i| self.ys[i]).sum::<f64>() / n as f64;
        if n < 2 * self.min_leaf {
            return Node::Leaf(mean);
        }
        let spread = idx
            .iter()
            .map(|&i| (self.ys[i] - mean).abs())
            .fold(0.0, f64::max);
        if spread == 0.0 {
            return Node::Leaf(mean);
        }
        let candidates = rand::seq::index::sample(rng, ALLOWED_FEATURES.len(), self.k_features);
        let mut best: Option<(f64, usize, f64)> = None; // (sse, feature, threshold)
        for c in candidates.iter() {
            let feature = ALLOWED_FEATURES[c];
            idx.sort_unstable_by(|&a, &b| self.xs[a][feature].total_cmp(&self.xs[b][feature]));
            // Prefix sums let every split's SSE come from two closed forms.
            let mut sum = 0.0;
            let mut sum2 = 0.0;
            let totals: Vec<(f64, f64)> = idx
                .iter()
                .map(|&i| {
                    sum += self.ys[i];
                    sum2 += self.ys[i] * self.ys[i];
                    (sum, sum2)
                })
                .collect();
            let (total, total2) = totals[n - 1];
            for split in self.min_leaf..=(n - self.min_leaf) {
                let lo = self.xs[idx[split - 1]][feature];
                let hi = self.xs[idx[split]][feature];
                if lo == hi {
                    continue;
                }
                let (ls, ls2) = totals[split - 1];
                let (rs, rs2) = (total - ls, total2 - ls2);
                let sse = (ls2 - ls * ls / split as f64)
                    + (rs2 - rs * rs / (n - split) as f64);
                if best.map(|(b, _, _)| sse < b).unwrap_or(true) {
                    best = Some((sse, feature, 0.5 * (lo + hi)));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            return Node::Leaf(mean);
        };
        idx.sort_unstable_by(|&a, &b| self.xs[a][feature].total_cmp(&self.xs[b][feature]));
        let split = idx.partition_point(|&i| self.xs[i][feature] <= threshold);
        let (left_idx, right_idx) = idx.split_at_mut(split);
        let left = self.build(left_idx, rng);
        let right = self.build(right_idx, rng);
        Node::Split {
            feature,
            threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}

fn train_ensemble(
    xs: &[[f64; 15]],
    ys: &[f64],
    spec: &EnsembleSpec,
    seed_label: &str,
) -> Ensemble {
    let n = xs.len();
    let n_boot = spec.bootstrap_size.unwrap_or(n);
    let builder = TreeBuilder {
        xs,
        ys,
        min_leaf: spec.min_leaf_size,
        k_features: spec.predictors_to_sample,
    };
    let trees: Vec<Node> = (0..spec.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for(spec.rng_seed, &format!("{seed_label}:tree={t}"));
            let mut idx: Vec<usize> = (0..n_boot).map(|_| rng.gen_range(0..n)).collect();
            builder.build(&mut idx, &mut rng)
        })
        .collect();
    Ensemble { trees }
}

/// Trains one bagged ensemble per target on the existent paths and reports
/// each target's pooled cross-validation RMSE.
pub fn train_regressors(samples: &[LabeledPath], spec: &EnsembleSpec) -> Result<RegressorSet> {
    spec.validate()?;
    let mut rows: Vec<(&[f64; 15], [f64; 6])> = samples
        .iter()
        .filter(|s| s.existent)
        .map(|s| (&s.candidate.features, s.targets))
        .collect();
    if rows.len() < spec.cv_folds.max(2) {
        return Err(Error::InvalidArgument(format!(
            "{} existent paths are too few for {}-fold validation",
            rows.len(),
            spec.cv_folds
        )));
    }
    // Canonical order: training must not depend on caller row order.
    rows.sort_unstable_by(|a, b| {
        let fa = a.0.iter().chain(a.1.iter());
        let fb = b.0.iter().chain(b.1.iter());
        fa.zip(fb)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let xs: Vec<[f64; 15]> = rows.iter().map(|r| *r.0).collect();
    let n = xs.len();

    let results: Vec<(Ensemble, f64)> = (0..6)
        .into_par_iter()
        .map(|t| {
            let name = TARGET_NAMES[t];
            let ys: Vec<f64> = rows.iter().map(|r| r.1[t]).collect();
            let ensemble = train_ensemble(&xs, &ys, spec, &format!("trees:{name}"));

            // Pooled k-fold RMSE with a seeded fold shuffle.
            let mut order: Vec<usize> = (0..n).collect();
            use rand::seq::SliceRandom;
            order.shuffle(&mut rng_for(spec.rng_seed, &format!("trees-cv:{name}")));
            let fold_of: Vec<usize> = {
                let mut f = vec![0usize; n];
                for (pos, &i) in order.iter().enumerate() {
                    f[i] = pos % spec.cv_folds;
                }
                f
            };
            let mut sq_err = 0.0;
            for fold in 0..spec.cv_folds {
                let train_idx: Vec<usize> = (0..n).filter(|&i| fold_of[i] != fold).collect();
                let fx: Vec<[f64; 15]> = train_idx.iter().map(|&i| xs[i]).collect();
                let fy: Vec<f64> = train_idx.iter().map(|&i| ys[i]).collect();
                let model = train_ensemble(&fx, &fy, spec, &format!("trees-cv:{name}:fold={fold}"));
                for i in (0..n).filter(|&i| fold_of[i] == fold) {
                    let d = model.predict(&xs[i]) - ys[i];
                    sq_err += d * d;
                }
            }
            (ensemble, (sq_err / n as f64).sqrt())
        })
        .collect();

    let (ensembles, cv_rmse) = results.into_iter().unzip();
    Ok(RegressorSet {
        spec: *spec,
        ensembles,
        cv_rmse,
    })
}

pub fn save_regressors(path: &std::path::Path, set: &RegressorSet) -> Result<()> {
    let mut text = serde_json::to_string_pretty(set)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_regressors(path: &std::path::Path) -> Result<RegressorSet> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(serde_json::from_str(&text)?)
}
