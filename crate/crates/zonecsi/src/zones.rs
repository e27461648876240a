//! Hard clusters, cluster parameter statistics, path pruning, cluster
//! regions, and the zone partition of feasible locations.
//!
//! Power statistics are unweighted over dBm values; angle and delay
//! statistics weight each path by its linear received power. Pruning walks
//! paths off a cluster farthest-first and keeps the last state whose twelve
//! parameters all hold at least 95% of the benchmark magnitudes.

use crate::cluster::{angular_distance, MembershipMatrix};
use crate::error::{Error, Result};
use crate::geom::Point3;
use crate::raytrace::PathRecord;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

pub use crate::cluster::hard_assign;

/// Means and spreads of one cluster: four angles (rad), delay (s), power
/// (dBm mean, dB spread). Spreads are population standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub mean_aaod: f64,
    pub mean_eaod: f64,
    pub mean_aaoa: f64,
    pub mean_eaoa: f64,
    pub mean_delay: f64,
    pub mean_power: f64,
    pub spread_aaod: f64,
    pub spread_eaod: f64,
    pub spread_aaoa: f64,
    pub spread_eaoa: f64,
    pub spread_delay: f64,
    pub spread_power: f64,
}

impl ClusterParams {
    /// All twelve parameters in declaration order.
    pub fn as_array(&self) -> [f64; 12] {
        [
            self.mean_aaod,
            self.mean_eaod,
            self.mean_aaoa,
            self.mean_eaoa,
            self.mean_delay,
            self.mean_power,
            self.spread_aaod,
            self.spread_eaod,
            self.spread_aaoa,
            self.spread_eaoa,
            self.spread_delay,
            self.spread_power,
        ]
    }

    /// The five coordinate means, in path feature order.
    pub fn center(&self) -> [f64; 5] {
        [
            self.mean_aaod,
            self.mean_eaod,
            self.mean_aaoa,
            self.mean_eaoa,
            self.mean_delay,
        ]
    }
}

fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Computes cluster statistics: unweighted dBm power mean and spread,
/// power-weighted angle and delay means and spreads.
pub fn cluster_params(paths: &[PathRecord]) -> Result<ClusterParams> {
    if paths.is_empty() {
        return Err(Error::InvalidArgument(
            "cluster statistics need at least one path".into(),
        ));
    }
    if let Some(p) = paths.iter().find(|p| !p.existent) {
        return Err(Error::InvalidArgument(format!(
            "non-existent path at location {} in cluster statistics",
            p.ut_index
        )));
    }
    let n = paths.len() as f64;
    let total_w: f64 = paths.iter().map(|p| dbm_to_mw(p.rss_dbm)).sum();
    // Accumulate about the first path so identical inputs give exact means
    // and exactly zero spreads.
    let f0 = paths[0].features();
    let mut wmean = f0;
    for p in paths {
        let u = dbm_to_mw(p.rss_dbm) / total_w;
        let f = p.features();
        for i in 0..5 {
            wmean[i] += u * (f[i] - f0[i]);
        }
    }
    let mut wvar = [0.0f64; 5];
    for p in paths {
        let u = dbm_to_mw(p.rss_dbm) / total_w;
        let f = p.features();
        for i in 0..5 {
            let d = f[i] - wmean[i];
            wvar[i] += u * d * d;
        }
    }
    let p0 = paths[0].rss_dbm;
    let mean_power = p0 + paths.iter().map(|p| p.rss_dbm - p0).sum::<f64>() / n;
    let var_power = paths
        .iter()
        .map(|p| {
            let d = p.rss_dbm - mean_power;
            d * d
        })
        .sum::<f64>()
        / n;
    Ok(ClusterParams {
        mean_aaod: wmean[0],
        mean_eaod: wmean[1],
        mean_aaoa: wmean[2],
        mean_eaoa: wmean[3],
        mean_delay: wmean[4],
        mean_power,
        spread_aaod: wvar[0].sqrt(),
        spread_eaod: wvar[1].sqrt(),
        spread_aaoa: wvar[2].sqrt(),
        spread_eaoa: wvar[3].sqrt(),
        spread_delay: wvar[4].sqrt(),
        spread_power: var_power.sqrt(),
    })
}

/// Every parameter must keep at least 95% of the benchmark magnitude; a
/// zero benchmark entry always passes.
fn passes_benchmark(params: &ClusterParams, benchmark: &ClusterParams) -> bool {
    params
        .as_array()
        .iter()
        .zip(benchmark.as_array().iter())
        .all(|(p, b)| *b == 0.0 || p.abs() >= 0.95 * b.abs())
}

/// Iteratively removes the path farthest from the cluster's current
/// parameter means (periodic distance, recomputed every round) while all
/// twelve parameters stay within 95% of the benchmark magnitudes, never
/// dropping below two paths. Returns the last passing state.
pub fn prune_cluster(
    paths: &[PathRecord],
    benchmark: &ClusterParams,
) -> Result<(Vec<PathRecord>, ClusterParams)> {
    if paths.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "pruning needs at least 2 paths, got {}",
            paths.len()
        )));
    }
    let mut kept: Vec<PathRecord> = paths.to_vec();
    let mut params = cluster_params(&kept)?;
    while kept.len() > 2 {
        let center = params.center();
        let mut far = 0usize;
        let mut far_d = f64::NEG_INFINITY;
        for (i, p) in kept.iter().enumerate() {
            let d = angular_distance(&p.features(), &center);
            if d > far_d {
                far_d = d;
                far = i;
            }
        }
        let mut candidate = kept.clone();
        candidate.remove(far);
        let cand_params = cluster_params(&candidate)?;
        if !passes_benchmark(&cand_params, benchmark) {
            break;
        }
        kept = candidate;
        params = cand_params;
    }
    Ok((kept, params))
}

/// The locations a cluster covers, split by membership confidence. A
/// location is deterministic when at least one of its paths in the cluster
/// reaches the membership threshold, otherwise fuzzy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRegion {
    pub cluster_id: usize,
    pub deterministic_locations: BTreeSet<usize>,
    pub fuzzy_locations: BTreeSet<usize>,
}

impl ClusterRegion {
    /// All locations covered by this cluster.
    pub fn support(&self) -> BTreeSet<usize> {
        self.deterministic_locations
            .union(&self.fuzzy_locations)
            .cloned()
            .collect()
    }
}

pub const DEFAULT_MEMBERSHIP_THRESHOLD: f64 = 0.6;

/// Builds per-cluster regions from hard assignments and memberships.
pub fn cluster_regions(
    assignment: &[usize],
    u: &MembershipMatrix,
    paths: &[PathRecord],
    threshold: f64,
) -> Result<Vec<ClusterRegion>> {
    if assignment.len() != paths.len() || u.n_paths() != paths.len() {
        return Err(Error::InvalidArgument(
            "assignment, memberships, and paths must align".into(),
        ));
    }
    let c = u.n_clusters();
    // Per cluster, the best membership seen at each covered location.
    let mut best: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); c];
    for (l, p) in paths.iter().enumerate() {
        if !p.existent {
            continue;
        }
        let j = assignment[l];
        let m = u.get(l, j);
        let entry = best[j].entry(p.ut_index).or_insert(f64::NEG_INFINITY);
        if m > *entry {
            *entry = m;
        }
    }
    Ok(best
        .into_iter()
        .enumerate()
        .map(|(j, locs)| {
            let mut det = BTreeSet::new();
            let mut fuzzy = BTreeSet::new();
            for (loc, m) in locs {
                if m >= threshold {
                    det.insert(loc);
                } else {
                    fuzzy.insert(loc);
                }
            }
            ClusterRegion {
                cluster_id: j,
                deterministic_locations: det,
                fuzzy_locations: fuzzy,
            }
        })
        .collect())
}

/// One zone: all locations sharing the same exact set of covering clusters.
/// Zone 0 is the block zone (locations with no existent path); its cluster
/// group and CSI are empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UTZone {
    pub zone_id: usize,
    pub cluster_group: Vec<usize>,
    pub locations: BTreeSet<usize>,
    pub group_csi: Vec<ClusterParams>,
}

/// Partitions `n_locations` feasible locations into zones keyed by the
/// exact cluster set of each location's existent paths. Zone 0 is always
/// the block zone; the rest are numbered in cluster-group order.
pub fn form_zones(
    n_locations: usize,
    assignment: &[usize],
    paths: &[PathRecord],
    params: &[ClusterParams],
) -> Result<Vec<UTZone>> {
    if assignment.len() != paths.len() {
        return Err(Error::InvalidArgument(
            "assignment and paths must align".into(),
        ));
    }
    let mut groups: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for (l, p) in paths.iter().enumerate() {
        if !p.existent {
            continue;
        }
        if p.ut_index >= n_locations {
            return Err(Error::InvalidArgument(format!(
                "path references location {} outside the {} feasible locations",
                p.ut_index, n_locations
            )));
        }
        if assignment[l] >= params.len() {
            return Err(Error::InvalidArgument(format!(
                "path assigned to cluster {} but only {} parameter sets given",
                assignment[l],
                params.len()
            )));
        }
        groups.entry(p.ut_index).or_default().insert(assignment[l]);
    }

    let mut by_group: BTreeMap<Vec<usize>, BTreeSet<usize>> = BTreeMap::new();
    let mut blocked = BTreeSet::new();
    for loc in 0..n_locations {
        match groups.get(&loc) {
            Some(set) => {
                let key: Vec<usize> = set.iter().cloned().collect();
                by_group.entry(key).or_default().insert(loc);
            }
            None => {
                blocked.insert(loc);
            }
        }
    }

    let mut zones = vec![UTZone {
        zone_id: 0,
        cluster_group: Vec::new(),
        locations: blocked,
        group_csi: Vec::new(),
    }];
    for (idx, (group, locations)) in by_group.into_iter().enumerate() {
        let group_csi = group.iter().map(|&j| params[j]).collect();
        zones.push(UTZone {
            zone_id: idx + 1,
            cluster_group: group,
            locations,
            group_csi,
        });
    }
    Ok(zones)
}

/// Zone id of every location, by index. Fails if the zones do not cover
/// each location exactly once.
pub fn zone_lookup(n_locations: usize, zones: &[UTZone]) -> Result<Vec<usize>> {
    let mut lookup = vec![usize::MAX; n_locations];
    for z in zones {
        for &loc in &z.locations {
            if loc >= n_locations {
                return Err(Error::InvalidArgument(format!(
                    "zone {} lists location {} outside 0..{}",
                    z.zone_id, loc, n_locations
                )));
            }
            if lookup[loc] != usize::MAX {
                return Err(Error::InvalidArgument(format!(
                    "location {loc} appears in two zones"
                )));
            }
            lookup[loc] = z.zone_id;
        }
    }
    if let Some(loc) = lookup.iter().position(|&z| z == usize::MAX) {
        return Err(Error::InvalidArgument(format!(
            "location {loc} not covered by any zone"
        )));
    }
    Ok(lookup)
}

/// Writes the zone list as pretty JSON.
pub fn write_zone_map(path: &std::path::Path, zones: &[UTZone]) -> Result<()> {
    let mut text = serde_json::to_string_pretty(zones)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_zone_map(path: &std::path::Path) -> Result<Vec<UTZone>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes `x,y,z,zone_id` rows for plotting the zone partition.
pub fn write_zone_locations_csv(
    path: &std::path::Path,
    locations: &[Point3],
    zones: &[UTZone],
) -> Result<()> {
    let lookup = zone_lookup(locations.len(), zones)?;
    let file =
        std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(["x", "y", "z", "zone_id"])?;
    for (loc, zid) in locations.iter().zip(lookup) {
        w.write_record(&[
            loc.x.to_string(),
            loc.y.to_string(),
            loc.z.to_string(),
            zid.to_string(),
        ])?;
    }
    w.flush()
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{fcm_fit, FcmConfig};
    use crate::raytrace::PathKind;

    fn path_at(loc: usize, params: [f64; 5], rss_dbm: f64) -> PathRecord {
        PathRecord {
            ut_index: loc,
            kind: PathKind::Refl,
            plane_id: Some(0),
            aaod: params[0],
            eaod: params[1],
            aaoa: params[2],
            eaoa: params[3],
            delay_s: params[4],
            rss_dbm,
            existent: true,
        }
    }

    #[test]
    fn hard_assignment_takes_argmax_with_low_tie() {
        let paths = vec![
            path_at(0, [0.9, 0.4, -1.1, 0.1, 2.0e-9], -38.0),
            path_at(0, [-2.0, -0.5, 2.0, -0.2, 8.0e-9], -45.0),
            path_at(1, [0.95, 0.45, -1.05, 0.15, 2.1e-9], -39.0),
        ];
        let fit = fcm_fit(&paths, &FcmConfig::default()).unwrap();
        let assign = hard_assign(&fit.memberships);
        for (l, a) in assign.iter().enumerate() {
            let row = fit.memberships.row(l);
            // Brute-force argmax with ties to the lowest index.
            let mut best = 0;
            for j in 1..row.len() {
                if row[j] > row[best] {
                    best = j;
                }
            }
            assert_eq!(*a, best);
        }
    }

    #[test]
    fn single_path_params_are_exact() {
        let p = path_at(3, [0.7, -0.2, 1.1, 0.4, 5.0e-9], -43.5);
        let c = cluster_params(&[p]).unwrap();
        assert_eq!(c.mean_aaod, 0.7);
        assert_eq!(c.mean_eaod, -0.2);
        assert_eq!(c.mean_aaoa, 1.1);
        assert_eq!(c.mean_eaoa, 0.4);
        assert_eq!(c.mean_delay, 5.0e-9);
        assert_eq!(c.mean_power, -43.5);
        for s in &c.as_array()[6..] {
            assert_eq!(*s, 0.0);
        }
    }

    #[test]
    fn equal_weight_pair_splits_evenly() {
        let a = path_at(0, [0.0, 0.0, 0.0, 0.0, 0.0], -40.0);
        let b = path_at(1, [1.0, 0.0, 0.0, 0.0, 0.0], -40.0);
        let c = cluster_params(&[a, b]).unwrap();
        assert!((c.mean_aaod - 0.5).abs() < 1e-15);
        assert!((c.spread_aaod - 0.5).abs() < 1e-15);
    }

    #[test]
    fn two_to_one_weights_match_hand_computation() {
        // Linear weights 2 mW and 1 mW; aaod 0 and 0.9 rad.
        let heavy = path_at(0, [0.0, 0.0, 0.0, 0.0, 0.0], 10.0 * 2f64.log10());
        let light = path_at(1, [0.9, 0.0, 0.0, 0.0, 0.0], 0.0);
        let c = cluster_params(&[heavy, light]).unwrap();
        assert!((c.mean_aaod - 0.3).abs() < 1e-12);
        assert!((c.spread_aaod - 0.18f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn equal_weights_reduce_to_unweighted_statistics() {
        use rand::Rng;
        let mut rng = crate::seed::rng_for(21, "params");
        let paths: Vec<PathRecord> = (0..17)
            .map(|i| {
                path_at(
                    i,
                    [
                        rng.gen_range(-3.0..3.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-3.0..3.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(0.0..1e-7),
                    ],
                    -47.0,
                )
            })
            .collect();
        let c = cluster_params(&paths).unwrap();
        let n = paths.len() as f64;
        for i in 0..5 {
            let mean: f64 = paths.iter().map(|p| p.features()[i]).sum::<f64>() / n;
            let var: f64 = paths
                .iter()
                .map(|p| {
                    let d = p.features()[i] - mean;
                    d * d
                })
                .sum::<f64>()
                / n;
            let got = c.as_array();
            assert!((got[i] - mean).abs() < 1e-12, "mean {i}");
            assert!((got[6 + i] - var.sqrt()).abs() < 1e-12, "spread {i}");
        }
    }

    #[test]
    fn pruning_identical_paths_stops_at_two() {
        let p = path_at(0, [0.7, -0.2, 1.1, 0.4, 5.0e-9], -30.0);
        let paths = vec![p; 6];
        let benchmark = cluster_params(&paths).unwrap();
        let (kept, params) = prune_cluster(&paths, &benchmark).unwrap();
        assert_eq!(kept.len(), 2);
        assert_eq!(params.as_array(), benchmark.as_array());
    }

    /// Nine patterned paths plus one outlier shifted in all four angles.
    /// The offsets are sized so the outlier is farthest, its removal keeps
    /// every parameter above 95% of the benchmark, and any further removal
    /// violates the rule.
    fn pruning_fixture() -> Vec<PathRecord> {
        let d = 0.02;
        let dt = 1.0e-9;
        let dp = 0.25;
        let base = [0.5, 0.3, -0.8, 0.25];
        let aaod = [2., -2., 1., -1., 1., -1., 0., 0., 0.];
        let eaod = [0., 1., 2., -2., -1., 1., -1., 0., 0.];
        let aaoa = [1., 0., -1., 1., 2., -2., 0., -1., 0.];
        let eaoa = [0., -1., 0., 1., -1., 0., 2., -2., 1.];
        let delay = [-2., 0., 1., 0., -1., 1., -1., 0., 2.];
        let power = [0., 2., -2., -1., 1., 0., 1., -1., 0.];
        let mut paths: Vec<PathRecord> = (0..9)
            .map(|i| {
                path_at(
                    i,
                    [
                        base[0] + aaod[i] * d,
                        base[1] + eaod[i] * d,
                        base[2] + aaoa[i] * d,
                        base[3] + eaoa[i] * d,
                        20e-9 + delay[i] * dt,
                    ],
                    -40.0 + power[i] * dp,
                )
            })
            .collect();
        let a = 1.52 * d;
        paths.push(path_at(
            9,
            [base[0] + a, base[1] + a, base[2] + a, base[3] + a, 20e-9],
            -40.0,
        ));
        paths
    }

    #[test]
    fn pruning_removes_exactly_the_outlier() {
        let paths = pruning_fixture();
        let benchmark = cluster_params(&paths).unwrap();
        let (kept, params) = prune_cluster(&paths, &benchmark).unwrap();
        assert_eq!(kept.len(), 9);
        assert!(kept.iter().all(|p| p.ut_index != 9), "outlier must go");
        let expect = cluster_params(&paths[..9]).unwrap();
        for (a, b) in params.as_array().iter().zip(expect.as_array().iter()) {
            assert_eq!(a, b);
        }
        assert!(super::passes_benchmark(&params, &benchmark));
    }

    #[test]
    fn pruning_never_returns_failing_or_tiny_state() {
        use rand::Rng;
        let mut rng = crate::seed::rng_for(22, "prune");
        for trial in 0..50 {
            let n = rng.gen_range(2..40);
            let paths: Vec<PathRecord> = (0..n)
                .map(|i| {
                    path_at(
                        i,
                        [
                            rng.gen_range(-3.0..3.0),
                            rng.gen_range(-1.0..1.0),
                            rng.gen_range(-3.0..3.0),
                            rng.gen_range(-1.0..1.0),
                            rng.gen_range(0.0..1e-7),
                        ],
                        rng.gen_range(-70.0..-30.0),
                    )
                })
                .collect();
            let benchmark = cluster_params(&paths).unwrap();
            let (kept, params) = prune_cluster(&paths, &benchmark).unwrap();
            assert!(kept.len() >= 2, "trial {trial}");
            assert!(kept.len() <= paths.len());
            assert!(
                kept.len() == paths.len() || super::passes_benchmark(&params, &benchmark),
                "trial {trial}: returned params violate the 95% rule"
            );
        }
    }

    #[test]
    fn regions_split_on_membership_threshold() {
        let paths = vec![
            path_at(0, [0.0; 5], -40.0),
            path_at(1, [0.0; 5], -40.0),
            path_at(2, [0.0; 5], -40.0),
        ];
        let u = MembershipMatrix::from_rows(&[
            vec![0.95, 0.05],
            vec![0.55, 0.45],
            vec![0.3, 0.7],
        ])
        .unwrap();
        let assignment = hard_assign(&u);
        let regions = cluster_regions(&assignment, &u, &paths, 0.6).unwrap();
        assert!(regions[0].deterministic_locations.contains(&0));
        assert!(regions[0].fuzzy_locations.contains(&1));
        assert!(regions[1].deterministic_locations.contains(&2));
        for r in &regions {
            assert!(r
                .deterministic_locations
                .intersection(&r.fuzzy_locations)
                .next()
                .is_none());
        }
    }

    #[test]
    fn regions_may_overlap_across_clusters() {
        // One location with paths assigned to two different clusters.
        let paths = vec![
            path_at(5, [1.0, 0.5, -1.0, 0.2, 2.0e-9], -40.0),
            path_at(5, [-2.0, -0.5, 2.0, -0.2, 8.0e-9], -45.0),
        ];
        let fit = fcm_fit(&paths, &FcmConfig::default()).unwrap();
        let assignment = hard_assign(&fit.memberships);
        let regions = cluster_regions(
            &assignment,
            &fit.memberships,
            &paths,
            DEFAULT_MEMBERSHIP_THRESHOLD,
        )
        .unwrap();
        assert!(regions[0].support().contains(&5));
        assert!(regions[1].support().contains(&5));
    }

    #[test]
    fn zones_group_by_exact_cluster_set() {
        // Locations: 0 -> {0}, 1 -> {0,1}, 2 -> {1}, 3 -> {1,0}, 4 -> blocked.
        let paths = vec![
            path_at(0, [0.0; 5], -40.0),
            path_at(1, [0.0; 5], -40.0),
            path_at(1, [0.0; 5], -41.0),
            path_at(2, [0.0; 5], -42.0),
            path_at(3, [0.0; 5], -43.0),
            path_at(3, [0.0; 5], -44.0),
        ];
        let assignment = vec![0, 0, 1, 1, 1, 0];
        let p = cluster_params(&paths[..1]).unwrap();
        let zones = form_zones(5, &assignment, &paths, &[p, p]).unwrap();
        assert_eq!(zones[0].zone_id, 0);
        assert_eq!(zones[0].locations, BTreeSet::from([4]));
        let find = |group: &[usize]| {
            zones
                .iter()
                .find(|z| z.cluster_group == group)
                .unwrap_or_else(|| panic!("no zone for {group:?}"))
        };
        assert_eq!(find(&[0]).locations, BTreeSet::from([0]));
        assert_eq!(find(&[0, 1]).locations, BTreeSet::from([1, 3]));
        assert_eq!(find(&[1]).locations, BTreeSet::from([2]));
        assert_eq!(find(&[0, 1]).group_csi.len(), 2);
        let lookup = zone_lookup(5, &zones).unwrap();
        assert_eq!(lookup.len(), 5);
        assert_eq!(lookup[1], lookup[3]);
        assert_ne!(lookup[0], lookup[2]);
    }

    #[test]
    fn zones_partition_every_location() {
        use rand::Rng;
        let mut rng = crate::seed::rng_for(23, "zones");
        for _ in 0..20 {
            let n_loc = rng.gen_range(5..60);
            let n_paths = rng.gen_range(0..120);
            let c = rng.gen_range(1..6);
            let paths: Vec<PathRecord> = (0..n_paths)
                .map(|_| path_at(rng.gen_range(0..n_loc), [0.0; 5], -40.0))
                .collect();
            let assignment: Vec<usize> = (0..n_paths).map(|_| rng.gen_range(0..c)).collect();
            let p = ClusterParams {
                mean_aaod: 0.0,
                mean_eaod: 0.0,
                mean_aaoa: 0.0,
                mean_eaoa: 0.0,
                mean_delay: 0.0,
                mean_power: -40.0,
                spread_aaod: 0.0,
                spread_eaod: 0.0,
                spread_aaoa: 0.0,
                spread_eaoa: 0.0,
                spread_delay: 0.0,
                spread_power: 0.0,
            };
            let zones = form_zones(n_loc, &assignment, &paths, &vec![p; c]).unwrap();
            // Exactly one zone per location; exercised by zone_lookup.
            let lookup = zone_lookup(n_loc, &zones).unwrap();
            // Blocked locations and only they map to zone 0.
            let mut linked = BTreeSet::new();
            for path in &paths {
                linked.insert(path.ut_index);
            }
            for (loc, zid) in lookup.iter().enumerate() {
                assert_eq!(*zid == 0, !linked.contains(&loc));
            }
        }
    }

    #[test]
    fn zone_map_round_trips_through_json() {
        let paths = vec![path_at(0, [0.1, 0.2, 0.3, 0.4, 5e-9], -40.0)];
        let p = cluster_params(&paths).unwrap();
        let zones = form_zones(2, &[0], &paths, &[p]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("zones.json");
        write_zone_map(&file, &zones).unwrap();
        let back = read_zone_map(&file).unwrap();
        assert_eq!(zones, back);
    }
}
