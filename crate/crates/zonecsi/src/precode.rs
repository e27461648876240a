//! Hybrid precoding evaluation on zone CSI.
//!
//! A user's channel vector is synthesized from its zone's cluster
//! parameters: each cluster contributes seeded paths whose departure
//! angles are drawn uniformly inside mean +/- spread and whose complex
//! gains are CN(0, 1/N_L), all weighted by the cluster's normalized
//! linear power. The analog stage is a block beamformer of unit-modulus
//! steering columns aimed across each group's angle supports; the
//! baseband stage is zero-forcing on the effective channel with equal
//! per-user power. A fully digital zero-forcing baseline runs on the
//! same channel realizations for comparison.
//!
//! Conventions used throughout: the array is an `rows x cols` URA in the
//! xy-plane indexed row-major, azimuth is measured in that plane,
//! elevation from it, so the phase of element (m, n) at spacing d is
//! 2*pi*d*(m*cos(el)*cos(az) + n*cos(el)*sin(az)). Channel matrices hold
//! one UNCONJUGATED channel vector per row, so the effective channel is
//! the plain product H*F and the SINR numerator is |h^T F b|^2.

use crate::error::{Error, Result};
use crate::seed::rng_for;
use crate::zones::ClusterParams;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::f64::consts::TAU;

/// Relative condition-number limit beyond which zero-forcing refuses to
/// invert the effective channel.
pub const CONDITION_LIMIT: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArraySpec {
    pub rows: usize,
    pub cols: usize,
    /// Element spacing in wavelengths.
    pub element_spacing: f64,
}

impl Default for ArraySpec {
    fn default() -> Self {
        ArraySpec {
            rows: 16,
            cols: 16,
            element_spacing: 0.5,
        }
    }
}

impl ArraySpec {
    pub fn size(&self) -> usize {
        self.rows * self.cols
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidConfig("array needs rows, cols >= 1".into()));
        }
        if !(self.element_spacing > 0.0) {
            return Err(Error::InvalidConfig("element spacing must be > 0".into()));
        }
        Ok(())
    }
}

/// Departure-side cluster summary used for channel synthesis and
/// beamforming; arrival angles play no role at the BS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterCsi {
    pub mean_aaod: f64,
    pub mean_eaod: f64,
    pub spread_aaod: f64,
    pub spread_eaod: f64,
    pub mean_power_dbm: f64,
}

impl From<&ClusterParams> for ClusterCsi {
    fn from(p: &ClusterParams) -> Self {
        ClusterCsi {
            mean_aaod: p.mean_aaod,
            mean_eaod: p.mean_eaod,
            spread_aaod: p.spread_aaod,
            spread_eaod: p.spread_eaod,
            mean_power_dbm: p.mean_power,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedCluster {
    pub csi: ClusterCsi,
    /// Linear average cluster power; the synthesis weight sqrt(P_j).
    pub avg_power: f64,
}

/// Converts a zone's cluster set into synthesis weights: linear mean
/// cluster power, normalized to sum to one per user.
pub fn cluster_powers(group: &[ClusterParams]) -> Result<Vec<WeightedCluster>> {
    if group.is_empty() {
        return Err(Error::InvalidArgument("group has no clusters".into()));
    }
    let linear: Vec<f64> = group
        .iter()
        .map(|p| 10f64.powf(p.mean_power / 10.0))
        .collect();
    let total: f64 = linear.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::InvalidArgument(
            "cluster powers must be finite dBm values".into(),
        ));
    }
    Ok(group
        .iter()
        .zip(linear)
        .map(|(p, l)| WeightedCluster {
            csi: ClusterCsi::from(p),
            avg_power: l / total,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    pub clusters: Vec<WeightedCluster>,
    /// Paths per cluster L; the total path count is clusters * L.
    pub paths_per_cluster: usize,
    /// Noise power, linear.
    pub noise_power: f64,
    /// Total transmit power, linear.
    pub total_power: f64,
    /// Diagnostic hook: fix every path gain to 1 instead of CN(0, 1/N_L).
    #[serde(default)]
    pub unit_gains: bool,
    pub rng_seed: u64,
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clusters.is_empty() {
            return Err(Error::InvalidConfig("need at least one cluster".into()));
        }
        if self
            .clusters
            .iter()
            .any(|c| !(c.avg_power >= 0.0) || !c.avg_power.is_finite())
        {
            return Err(Error::InvalidConfig(
                "cluster powers must be finite and >= 0".into(),
            ));
        }
        if self.paths_per_cluster == 0 {
            return Err(Error::InvalidConfig("paths_per_cluster must be >= 1".into()));
        }
        if !(self.noise_power > 0.0) || !(self.total_power > 0.0) {
            return Err(Error::InvalidConfig(
                "noise and total power must be > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Chain and user allocation across active groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridConfig {
    pub chains_per_group: Vec<usize>,
    pub users_per_group: Vec<usize>,
}

impl HybridConfig {
    pub fn n_rf(&self) -> usize {
        self.chains_per_group.iter().sum()
    }

    pub fn k_a(&self) -> usize {
        self.users_per_group.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.chains_per_group.is_empty()
            || self.chains_per_group.len() != self.users_per_group.len()
        {
            return Err(Error::InvalidConfig(
                "chains_per_group and users_per_group must be equal-length and non-empty".into(),
            ));
        }
        if self.chains_per_group.iter().any(|&c| c == 0) {
            return Err(Error::InvalidConfig("every group needs >= 1 chain".into()));
        }
        if self.users_per_group.iter().any(|&u| u == 0) {
            return Err(Error::InvalidConfig("every group needs >= 1 user".into()));
        }
        if self.k_a() > self.n_rf() {
            return Err(Error::InvalidConfig(format!(
                "{} users exceed {} RF chains",
                self.k_a(),
                self.n_rf()
            )));
        }
        Ok(())
    }

    /// Group index of each user, user-major in group order.
    pub fn user_groups(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.k_a());
        for (g, &u) in self.users_per_group.iter().enumerate() {
            out.extend(std::iter::repeat(g).take(u));
        }
        out
    }
}

/// Array response for a departure direction. Entries are unit-modulus;
/// element (m, n) carries phase 2*pi*d*(m*cos(el)*cos(az) + n*cos(el)*sin(az)).
pub fn steering_vector(aaod: f64, eaod: f64, array: &ArraySpec) -> Vec<Complex64> {
    let u = eaod.cos() * aaod.cos();
    let v = eaod.cos() * aaod.sin();
    let step = TAU * array.element_spacing;
    let mut out = Vec::with_capacity(array.size());
    for m in 0..array.rows {
        for n in 0..array.cols {
            let phase = step * (m as f64 * u + n as f64 * v);
            out.push(Complex64::new(phase.cos(), phase.sin()));
        }
    }
    out
}

/// One draw of CN(0, variance) via Box-Muller.
fn complex_gaussian(rng: &mut ChaCha8Rng, variance: f64) -> Complex64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..TAU);
    let r = (-variance * u1.ln()).sqrt();
    Complex64::new(r * u2.cos(), r * u2.sin())
}

/// Uniform draw on mean +/- spread; a zero spread pins the value exactly.
fn draw_angle(rng: &mut ChaCha8Rng, mean: f64, spread: f64) -> f64 {
    if spread > 0.0 {
        rng.gen_range(mean - spread..=mean + spread)
    } else {
        mean
    }
}

/// Synthesizes one user's channel vector. Draw order is fixed per path:
/// azimuth, elevation, then the complex gain, cluster-major, so a given
/// (seed, label) pair always produces the same vector.
pub fn synthesize_channel(
    cfg: &SynthesisConfig,
    array: &ArraySpec,
    label: &str,
) -> Result<Vec<Complex64>> {
    cfg.validate()?;
    array.validate()?;
    let mut rng = rng_for(cfg.rng_seed, label);
    let n_total = cfg.clusters.len() * cfg.paths_per_cluster;
    let gain_var = 1.0 / n_total as f64;
    let mut h = vec![Complex64::new(0.0, 0.0); array.size()];
    for cluster in &cfg.clusters {
        let amp = cluster.avg_power.sqrt();
        for _ in 0..cfg.paths_per_cluster {
            let aaod = draw_angle(&mut rng, cluster.csi.mean_aaod, cluster.csi.spread_aaod);
            let eaod = draw_angle(&mut rng, cluster.csi.mean_eaod, cluster.csi.spread_eaod);
            let g = if cfg.unit_gains {
                Complex64::new(1.0, 0.0)
            } else {
                complex_gaussian(&mut rng, gain_var)
            };
            let coeff = g * amp;
            let phi = steering_vector(aaod, eaod, array);
            for (hv, pv) in h.iter_mut().zip(phi.iter()) {
                *hv += coeff * pv;
            }
        }
    }
    Ok(h)
}

/// Angle samples for one group: each cluster's mean first, then extras
/// evenly spaced across mean +/- spread, allocated round-robin. Exact
/// duplicate pairs are nudged by a tenth of the spread so distinct
/// chains get distinct columns whenever the spread allows it.
fn group_angles(group: &[ClusterCsi], chains: usize) -> Vec<(f64, f64)> {
    let n = group.len();
    let mut counts = vec![0usize; n];
    for i in 0..chains {
        counts[i % n] += 1;
    }
    let mut samples = Vec::with_capacity(chains);
    let mut seen: BTreeSet<(u64, u64)> = BTreeSet::new();
    for (c, csi) in group.iter().enumerate() {
        let total = counts[c];
        if total == 0 {
            continue;
        }
        for i in 0..total {
            let (mut az, mut el) = if i == 0 {
                (csi.mean_aaod, csi.mean_eaod)
            } else {
                let t = 2.0 * i as f64 / total as f64 - 1.0;
                (
                    csi.mean_aaod + t * csi.spread_aaod,
                    csi.mean_eaod + t * csi.spread_eaod,
                )
            };
            let mut bump = 1.0;
            while !seen.insert((az.to_bits(), el.to_bits())) {
                if csi.spread_aaod == 0.0 && csi.spread_eaod == 0.0 {
                    break; // nothing to spread across; accept the duplicate
                }
                az += bump * csi.spread_aaod / 10.0;
                el += bump * csi.spread_eaod / 10.0;
                bump += 1.0;
            }
            samples.push((az, el));
        }
    }
    samples
}

/// Analog beamformer: per group, `chains_per_group[g]` unit-norm steering
/// columns at angles sampled across that group's cluster supports, laid
/// out block by block. Every entry has modulus 1/sqrt(M).
pub fn rf_beamformer(
    groups: &[Vec<ClusterCsi>],
    chains_per_group: &[usize],
    array: &ArraySpec,
) -> Result<DMatrix<Complex64>> {
    array.validate()?;
    if groups.is_empty() || groups.len() != chains_per_group.len() {
        return Err(Error::InvalidArgument(
            "need one cluster set per group".into(),
        ));
    }
    if groups.iter().any(|g| g.is_empty()) {
        return Err(Error::InvalidArgument("every group needs >= 1 cluster".into()));
    }
    if chains_per_group.iter().any(|&c| c == 0) {
        return Err(Error::InvalidArgument("every group needs >= 1 chain".into()));
    }
    let m = array.size();
    let n_rf: usize = chains_per_group.iter().sum();
    let norm = 1.0 / (m as f64).sqrt();
    let mut f = DMatrix::<Complex64>::zeros(m, n_rf);
    let mut col = 0;
    for (group, &chains) in groups.iter().zip(chains_per_group) {
        for (az, el) in group_angles(group, chains) {
            let phi = steering_vector(az, el, array);
            for (i, pv) in phi.iter().enumerate() {
                f[(i, col)] = pv * norm;
            }
            col += 1;
        }
    }
    Ok(f)
}

/// Zero-forcing baseband precoder on the effective channel `eff = H*F`,
/// scaled so every user radiates exactly `total_power / K_a` through the
/// analog stage: ||F b_k||^2 = P_T / K_a.
pub fn bb_precoder(
    eff: &DMatrix<Complex64>,
    rf: &DMatrix<Complex64>,
    total_power: f64,
) -> Result<DMatrix<Complex64>> {
    let k_a = eff.nrows();
    if k_a == 0 || eff.ncols() < k_a {
        return Err(Error::InvalidArgument(format!(
            "effective channel {}x{} cannot be zero-forced",
            k_a,
            eff.ncols()
        )));
    }
    if rf.ncols() != eff.ncols() {
        return Err(Error::InvalidArgument(
            "analog stage and effective channel disagree on chain count".into(),
        ));
    }
    if !(total_power > 0.0) {
        return Err(Error::InvalidArgument("total power must be > 0".into()));
    }
    let svd = eff.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    if !(s_min > 0.0) {
        return Err(Error::IllConditioned(f64::INFINITY));
    }
    let cond = s_max / s_min;
    if cond > CONDITION_LIMIT {
        return Err(Error::IllConditioned(cond));
    }
    // Pseudo-inverse of a full-row-rank matrix is H^H (H H^H)^-1.
    let mut b = svd
        .pseudo_inverse(0.0)
        .map_err(|e| Error::InvalidArgument(format!("pseudo-inverse failed: {e}")))?;
    let per_user = total_power / k_a as f64;
    for k in 0..k_a {
        let through = rf * b.column(k);
        let norm = through.norm();
        if !(norm > 0.0) {
            return Err(Error::IllConditioned(f64::INFINITY));
        }
        let scale = Complex64::new(per_user.sqrt() / norm, 0.0);
        for v in b.column_mut(k).iter_mut() {
            *v *= scale;
        }
    }
    Ok(b)
}

/// Per-user SINR: |h_k^T F b_k|^2 over interference from all other
/// users' columns plus noise. Rows of `h` are unconjugated channel
/// vectors.
pub fn sinr(
    h: &DMatrix<Complex64>,
    f: &DMatrix<Complex64>,
    b: &DMatrix<Complex64>,
    noise_power: f64,
) -> Result<Vec<f64>> {
    if h.ncols() != f.nrows() || f.ncols() != b.nrows() || b.ncols() != h.nrows() {
        return Err(Error::InvalidArgument(format!(
            "shape mismatch: H {}x{}, F {}x{}, B {}x{}",
            h.nrows(),
            h.ncols(),
            f.nrows(),
            f.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    if !(noise_power > 0.0) {
        return Err(Error::InvalidArgument("noise power must be > 0".into()));
    }
    let p = h * f * b;
    let k_a = h.nrows();
    let mut out = Vec::with_capacity(k_a);
    for k in 0..k_a {
        let signal = p[(k, k)].norm_sqr();
        let mut interference = 0.0;
        for i in 0..k_a {
            if i != k {
                interference += p[(k, i)].norm_sqr();
            }
        }
        out.push(signal / (interference + noise_power));
    }
    Ok(out)
}

/// Mean over realizations of the per-realization sum of log2(1 + SINR).
/// Empty input yields NaN.
pub fn sum_rate(sinrs_per_realization: &[Vec<f64>]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for realization in sinrs_per_realization {
        let rate: f64 = realization.iter().map(|s| (1.0 + s).log2()).sum();
        let y = rate - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum / sinrs_per_realization.len() as f64
}

/// Percent of per-chain CSI no longer needed when only N_RF of M chains
/// require estimates. Requires n_rf <= m.
pub fn csi_overhead_reduction(m: usize, n_rf: usize) -> f64 {
    100.0 * (1.0 - n_rf as f64 / m as f64)
}

/// Fully digital zero-forcing reference: same rule and power
/// normalization as the hybrid baseband stage with the analog stage
/// replaced by identity. Returns the realization's sum rate.
pub fn fdp_baseline(h: &DMatrix<Complex64>, total_power: f64, noise_power: f64) -> Result<f64> {
    let id = DMatrix::<Complex64>::identity(h.ncols(), h.ncols());
    let b = bb_precoder(h, &id, total_power)?;
    let s = sinr(h, &id, &b, noise_power)?;
    Ok(s.iter().map(|v| (1.0 + v).log2()).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub array: ArraySpec,
    pub hybrid: HybridConfig,
    /// Cluster parameters per active group, in group order.
    pub group_csi: Vec<Vec<ClusterParams>>,
    /// Transmit power grid, dBm.
    pub p_t_dbm: Vec<f64>,
    pub noise_dbm: f64,
    pub paths_per_cluster: usize,
    pub n_realizations: usize,
    pub rng_seed: u64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.array.validate()?;
        self.hybrid.validate()?;
        if self.group_csi.len() != self.hybrid.chains_per_group.len() {
            return Err(Error::InvalidConfig(
                "group_csi must match the group count".into(),
            ));
        }
        if self.p_t_dbm.is_empty() {
            return Err(Error::InvalidConfig("empty transmit power grid".into()));
        }
        if self.paths_per_cluster == 0 {
            return Err(Error::InvalidConfig("paths_per_cluster must be >= 1".into()));
        }
        if self.n_realizations == 0 {
            return Err(Error::InvalidConfig("n_realizations must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p_t_dbm: f64,
    pub k_a: usize,
    pub scheme: String,
    pub mean_rate: f64,
    pub std_rate: f64,
    pub n_realizations: usize,
}

fn dbm_to_linear(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Hybrid and digital sum rates of one channel realization at each grid
/// power. The channel is shared: both schemes see the same H.
fn realization_rates(
    cfg: &SweepConfig,
    f: &DMatrix<Complex64>,
    id: &DMatrix<Complex64>,
    powers: &[Vec<WeightedCluster>],
    user_group: &[usize],
    p_linear: &[f64],
    noise: f64,
    r: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = cfg.array.size();
    let k_a = user_group.len();
    let mut h = DMatrix::<Complex64>::zeros(k_a, m);
    for (k, &g) in user_group.iter().enumerate() {
        let syn = SynthesisConfig {
            clusters: powers[g].clone(),
            paths_per_cluster: cfg.paths_per_cluster,
            noise_power: noise,
            total_power: 1.0,
            unit_gains: false,
            rng_seed: cfg.rng_seed,
        };
        let row = synthesize_channel(&syn, &cfg.array, &format!("mc:{r}:user:{k}"))?;
        for (i, v) in row.into_iter().enumerate() {
            h[(k, i)] = v;
        }
    }
    let eff = &h * f;
    let mut hybrid = Vec::with_capacity(p_linear.len());
    let mut digital = Vec::with_capacity(p_linear.len());
    for &p_t in p_linear {
        let b = bb_precoder(&eff, f, p_t)?;
        let s = sinr(&h, f, &b, noise)?;
        hybrid.push(s.iter().map(|v| (1.0 + v).log2()).sum());
        let bd = bb_precoder(&h, id, p_t)?;
        let sd = sinr(&h, id, &bd, noise)?;
        digital.push(sd.iter().map(|v| (1.0 + v).log2()).sum());
    }
    Ok((hybrid, digital))
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    let mean = sum / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Paired per-realization sum rates (hybrid, digital) at one transmit
/// power, deterministic under the sweep seed.
pub fn paired_rates(cfg: &SweepConfig, p_t_dbm: f64) -> Result<Vec<(f64, f64)>> {
    cfg.validate()?;
    let groups: Vec<Vec<ClusterCsi>> = cfg
        .group_csi
        .iter()
        .map(|g| g.iter().map(ClusterCsi::from).collect())
        .collect();
    let f = rf_beamformer(&groups, &cfg.hybrid.chains_per_group, &cfg.array)?;
    let id = DMatrix::<Complex64>::identity(cfg.array.size(), cfg.array.size());
    let powers: Vec<Vec<WeightedCluster>> = cfg
        .group_csi
        .iter()
        .map(|g| cluster_powers(g))
        .collect::<Result<_>>()?;
    let user_group = cfg.hybrid.user_groups();
    let p_linear = [dbm_to_linear(p_t_dbm)];
    let noise = dbm_to_linear(cfg.noise_dbm);
    let per: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..cfg.n_realizations)
        .into_par_iter()
        .map(|r| realization_rates(cfg, &f, &id, &powers, &user_group, &p_linear, noise, r))
        .collect();
    per.into_iter()
        .map(|r| r.map(|(h, d)| (h[0], d[0])))
        .collect()
}

/// Monte Carlo sum-rate sweep over the transmit power grid for both the
/// hybrid scheme and the fully digital reference, on shared channels.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let groups: Vec<Vec<ClusterCsi>> = cfg
        .group_csi
        .iter()
        .map(|g| g.iter().map(ClusterCsi::from).collect())
        .collect();
    let f = rf_beamformer(&groups, &cfg.hybrid.chains_per_group, &cfg.array)?;
    let id = DMatrix::<Complex64>::identity(cfg.array.size(), cfg.array.size());
    let powers: Vec<Vec<WeightedCluster>> = cfg
        .group_csi
        .iter()
        .map(|g| cluster_powers(g))
        .collect::<Result<_>>()?;
    let user_group = cfg.hybrid.user_groups();
    let p_linear: Vec<f64> = cfg.p_t_dbm.iter().map(|&p| dbm_to_linear(p)).collect();
    let noise = dbm_to_linear(cfg.noise_dbm);
    let per: Vec<(Vec<f64>, Vec<f64>)> = (0..cfg.n_realizations)
        .into_par_iter()
        .map(|r| realization_rates(cfg, &f, &id, &powers, &user_group, &p_linear, noise, r))
        .collect::<Result<_>>()?;
    let k_a = user_group.len();
    let mut rows = Vec::with_capacity(2 * cfg.p_t_dbm.len());
    for (pi, &p_dbm) in cfg.p_t_dbm.iter().enumerate() {
        for (scheme, pick) in [
            ("abhp", 0usize),
            ("fdp", 1usize),
        ] {
            let rates: Vec<f64> = per
                .iter()
                .map(|(h, d)| if pick == 0 { h[pi] } else { d[pi] })
                .collect();
            let (mean, std) = mean_std(&rates);
            rows.push(SweepRow {
                p_t_dbm: p_dbm,
                k_a,
                scheme: scheme.to_string(),
                mean_rate: mean,
                std_rate: std,
                n_realizations: cfg.n_realizations,
            });
        }
    }
    Ok(rows)
}

/// CSV with one row per (power, scheme) pair.
pub fn write_sweep_csv(path: &std::path::Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(Error::from)?;
    w.write_record(["P_T_dBm", "K_a", "scheme", "mean_rate", "std_rate", "n_realizations"])?;
    for r in rows {
        w.write_record([
            r.p_t_dbm.to_string(),
            r.k_a.to_string(),
            r.scheme.clone(),
            r.mean_rate.to_string(),
            r.std_rate.to_string(),
            r.n_realizations.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}
