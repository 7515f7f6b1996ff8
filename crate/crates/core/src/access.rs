//! Sub-6GHz access channel: path loss, shadowing, estimate quality,
//! user-centric AP clustering, and uplink SINR/rate.

use ndarray::Array2;
use rand_distr::StandardNormal;

use crate::config::{InterferenceForm, NetworkConfig};
use crate::topology::Topology;

/// Hata-style intercept of the three-slope model, `f` in MHz, heights in m.
pub fn path_loss_intercept(carrier_mhz: f64, ap_height: f64, user_height: f64) -> f64 {
    let lf = carrier_mhz.log10();
    46.3 + 33.9 * lf - 13.82 * ap_height.log10() - (1.11 * lf - 0.7) * user_height + 1.56 * lf - 0.8
}

/// Three-slope path loss in dB (a negative number: it is a gain).
///
/// `distance` is in meters; the model itself works in km.
pub fn path_loss_db(distance: f64, config: &NetworkConfig) -> f64 {
    let l = path_loss_intercept(config.carrier_mhz, config.ap_height, config.user_height);
    let d = distance / 1000.0;
    let d0 = config.breakpoint_near / 1000.0;
    let d1 = config.breakpoint_far / 1000.0;
    if d > d1 {
        -l - 35.0 * d.log10()
    } else if d > d0 {
        -l - 10.0 * (d1.powf(1.5) * d * d).log10()
    } else {
        -l - 10.0 * (d1.powf(1.5) * d0 * d0).log10()
    }
}

/// Correlated shadowing coefficients, `users x aps`.
///
/// Each AP and each user draws one standard normal; the coefficient for a
/// pair mixes them with weights `sqrt(delta)` and `sqrt(1 - delta)`.
pub fn draw_shadowing<R: rand::Rng + ?Sized>(rng: &mut R, users: usize, aps: usize, correlation: f64) -> Array2<f64> {
    let ap_terms: Vec<f64> = (0..aps).map(|_| rng.sample(StandardNormal)).collect();
    let user_terms: Vec<f64> = (0..users).map(|_| rng.sample(StandardNormal)).collect();
    let (wa, wu) = (correlation.sqrt(), (1.0 - correlation).sqrt());
    Array2::from_shape_fn((users, aps), |(m, n)| wa * ap_terms[n] + wu * user_terms[m])
}

pub fn large_scale_fading(path_loss_db: f64, shadow_std_db: f64, shadow: f64) -> f64 {
    10f64.powf(path_loss_db / 10.0) * 10f64.powf(shadow_std_db * shadow / 10.0)
}

/// Variance of the MMSE channel estimate with orthogonal pilots.
pub fn estimate_variance(pilot_len: f64, pilot_power: f64, beta: f64, noise: f64) -> f64 {
    let snr = pilot_len * pilot_power;
    let denom = snr * beta + noise;
    if denom == 0.0 {
        return 0.0;
    }
    snr * beta * beta / denom
}

/// User-to-AP association: each user's cluster and each AP's served users.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clusters {
    /// Per user, the serving APs ordered by decreasing channel quality.
    pub per_user: Vec<Vec<usize>>,
    /// Per AP, the users it serves (ascending).
    pub served_by: Vec<Vec<usize>>,
}

/// Select the `size` best APs per user by `quality` (ties: smaller AP index).
pub fn form_clusters(quality: &Array2<f64>, size: usize) -> Clusters {
    let (users, aps) = quality.dim();
    assert!(size <= aps, "cluster size {size} exceeds AP count {aps}");
    let per_user: Vec<Vec<usize>> = (0..users)
        .map(|m| {
            let row = quality.row(m);
            let mut idx: Vec<usize> = (0..aps).collect();
            if size < aps {
                idx.select_nth_unstable_by(size, |&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
                idx.truncate(size);
            }
            idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
            idx
        })
        .collect();
    let mut served_by = vec![Vec::new(); aps];
    for (m, cluster) in per_user.iter().enumerate() {
        for &n in cluster {
            served_by[n].push(m);
        }
    }
    Clusters { per_user, served_by }
}

/// Uplink transmit power per user, each an element of the power ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAssignment(pub Vec<f64>);

impl PowerAssignment {
    pub fn from_levels(indices: &[usize], levels: &[f64]) -> Self {
        Self(indices.iter().map(|&i| levels[i]).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccessChannelState {
    pub path_loss_db: Array2<f64>,
    pub shadow: Array2<f64>,
    /// Large-scale fading (linear).
    pub beta: Array2<f64>,
    /// Channel-estimate variance (linear).
    pub estimate_var: Array2<f64>,
    pub clusters: Clusters,
}

impl AccessChannelState {
    pub fn build(config: &NetworkConfig, topology: &Topology, shadow: Array2<f64>) -> Self {
        let path_loss_db = topology.dist_ua.mapv(|d| path_loss_db(d, config));
        let beta = ndarray::Zip::from(&path_loss_db)
            .and(&shadow)
            .map_collect(|&pl, &mu| large_scale_fading(pl, config.shadow_std_db, mu));
        let tau_p = config.pilot_length() as f64;
        let noise = config.access_noise();
        let estimate_var = beta.mapv(|b| estimate_variance(tau_p, config.max_power, b, noise));
        let clusters = form_clusters(&estimate_var, config.effective_cluster_size());
        Self {
            path_loss_db,
            shadow,
            beta,
            estimate_var,
            clusters,
        }
    }

    /// State from explicit gain matrices (path loss and shadow left zero).
    pub fn from_gains(beta: Array2<f64>, estimate_var: Array2<f64>, cluster_size: usize) -> Self {
        let clusters = form_clusters(&estimate_var, cluster_size);
        Self {
            path_loss_db: Array2::zeros(beta.dim()),
            shadow: Array2::zeros(beta.dim()),
            beta,
            estimate_var,
            clusters,
        }
    }

    pub fn users(&self) -> usize {
        self.beta.nrows()
    }
}

/// Uplink SINR of user `m` under MRC over its cluster.
pub fn uplink_sinr(
    m: usize,
    powers: &PowerAssignment,
    state: &AccessChannelState,
    antennas: usize,
    noise: f64,
    form: InterferenceForm,
) -> f64 {
    let p = powers.as_slice();
    if p[m] <= 0.0 {
        return 0.0;
    }
    let theta = &state.estimate_var;
    let beta = &state.beta;
    let cluster = &state.clusters.per_user[m];
    let quality: f64 = cluster.iter().map(|&n| theta[[m, n]]).sum();
    if quality <= 0.0 {
        return 0.0;
    }
    let interference: f64 = (0..state.users())
        .filter(|&i| i != m)
        .map(|i| match form {
            InterferenceForm::Corrected => p[i] * cluster.iter().map(|&n| theta[[m, n]] * beta[[i, n]]).sum::<f64>(),
            InterferenceForm::Literal => state.clusters.per_user[i]
                .iter()
                .map(|&n| theta[[i, n]] * beta[[i, n]])
                .sum::<f64>(),
        })
        .sum();
    antennas as f64 * p[m] * quality * quality / (interference + noise * quality)
}

pub fn uplink_sinrs(
    powers: &PowerAssignment,
    state: &AccessChannelState,
    antennas: usize,
    noise: f64,
    form: InterferenceForm,
) -> Vec<f64> {
    (0..state.users())
        .map(|m| uplink_sinr(m, powers, state, antennas, noise, form))
        .collect()
}

/// Shannon rate in bits/s.
pub fn shannon_rate(sinr: f64, bandwidth: f64) -> f64 {
    bandwidth * (1.0 + sinr).log2()
}

pub fn uplink_rate(sinr: f64, bandwidth: f64) -> f64 {
    shannon_rate(sinr, bandwidth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng as _, SeedableRng};

    fn cfg() -> NetworkConfig {
        NetworkConfig::default()
    }

    #[test]
    fn path_loss_flat_below_first_breakpoint() {
        let c = cfg();
        assert_eq!(path_loss_db(0.0, &c), path_loss_db(3.0, &c));
        assert_eq!(path_loss_db(9.9, &c), path_loss_db(0.5, &c));
    }

    #[test]
    fn path_loss_continuous_at_breakpoints() {
        let c = cfg();
        let l = path_loss_intercept(c.carrier_mhz, c.ap_height, c.user_height);
        let (d0, d1) = (c.breakpoint_near / 1e3, c.breakpoint_far / 1e3);
        // branch values evaluated at the breakpoints themselves
        let near_mid = -l - 10.0 * (d1.powf(1.5) * d0 * d0).log10();
        let far_mid = -l - 10.0 * (d1.powf(1.5) * d1 * d1).log10();
        let far_outer = -l - 35.0 * d1.log10();
        assert_eq!(path_loss_db(c.breakpoint_near, &c), near_mid);
        assert!((far_mid - far_outer).abs() < 1e-12);
        let eps = 1e-9;
        assert!((path_loss_db(c.breakpoint_far + eps, &c) - path_loss_db(c.breakpoint_far, &c)).abs() < 1e-6);
        assert!((path_loss_db(c.breakpoint_near + eps, &c) - path_loss_db(c.breakpoint_near, &c)).abs() < 1e-6);
    }

    #[test]
    fn path_loss_golden_fifty_meters() {
        // Hand evaluation: L = 140.6609842694927, PL = -L - 35 log10(0.05)
        let c = cfg();
        let l = path_loss_intercept(1900.0, 15.0, 1.65);
        assert!((l - 140.6609842694927).abs() < 1e-9);
        assert!((path_loss_db(50.0, &c) - (-95.12493442125336)).abs() < 1e-9);
    }

    #[test]
    fn shadowing_extremes() {
        let mut rng = crate::seed::Rng::seed_from_u64(3);
        let mu = draw_shadowing(&mut rng, 4, 5, 1.0);
        for n in 0..5 {
            assert!(mu.column(n).iter().all(|&v| v == mu[[0, n]]));
        }
        let mu = draw_shadowing(&mut rng, 4, 5, 0.0);
        for m in 0..4 {
            assert!(mu.row(m).iter().all(|&v| v == mu[[m, 0]]));
        }
    }

    #[test]
    fn shadowing_unit_variance() {
        let mut rng = crate::seed::Rng::seed_from_u64(11);
        // many independent small matrices so both components are well sampled
        let mut acc = Vec::with_capacity(200_000);
        for _ in 0..20_000 {
            acc.extend(draw_shadowing(&mut rng, 2, 5, 0.5).iter().copied());
        }
        let n = acc.len() as f64;
        let mean = acc.iter().sum::<f64>() / n;
        let var = acc.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn fading_direct_values() {
        assert_eq!(large_scale_fading(-80.0, 8.0, 0.0), 10f64.powf(-8.0));
        let b = large_scale_fading(-100.0, 8.0, 1.25);
        assert!((b / 1e-9 - 1.0).abs() < 1e-12);
        let (up, down) = (large_scale_fading(-90.0, 8.0, 0.7), large_scale_fading(-90.0, 8.0, -0.7));
        assert!(((up * down).sqrt() / 1e-9 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn estimate_variance_cases() {
        assert_eq!(estimate_variance(5.0, 0.1, 2e-9, 0.0), 2e-9);
        assert_eq!(estimate_variance(5.0, 0.0, 2e-9, 1e-13), 0.0);
        assert_eq!(estimate_variance(1.0, 1.0, 1.0, 1.0), 0.5);
    }

    #[test]
    fn full_clusters_and_dominant_ap() {
        let q = array![[1.0, 5.0, 2.0], [3.0, 9.0, 3.0]];
        let cl = form_clusters(&q, 3);
        assert!(cl.per_user.iter().all(|c| c.len() == 3));
        assert!(cl.per_user.iter().all(|c| c[0] == 1));
        // tie between AP 0 and AP 2 for user 1 goes to the smaller index
        assert_eq!(cl.per_user[1], vec![1, 0, 2]);
        assert_eq!(cl.served_by[1], vec![0, 1]);
    }

    fn sort_reference(q: &Array2<f64>, size: usize) -> Vec<Vec<usize>> {
        q.rows()
            .into_iter()
            .map(|row| {
                let mut all: Vec<(f64, usize)> = row.iter().copied().zip(0..).collect();
                // stable sort on descending value keeps ascending index for ties
                all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
                all.into_iter().take(size).map(|(_, n)| n).collect()
            })
            .collect()
    }

    #[test]
    fn clusters_match_full_sort() {
        let mut rng = crate::seed::Rng::seed_from_u64(5);
        let q = Array2::from_shape_fn((5, 8), |_| rng.gen::<f64>());
        assert_eq!(form_clusters(&q, 3).per_user, sort_reference(&q, 3));
    }

    fn two_user_state() -> AccessChannelState {
        let beta = array![[4e-9, 1e-10], [2e-10, 3e-9]];
        let theta = array![[3e-9, 5e-11], [1e-10, 2e-9]];
        AccessChannelState::from_gains(beta, theta, 1)
    }

    #[test]
    fn sinr_two_user_hand_instance() {
        let st = two_user_state();
        let p = PowerAssignment(vec![0.1, 0.05]);
        let noise = 1e-13;
        // user 0 served by AP 0: 4 * 0.1 * (3e-9)^2 / (0.05 * 3e-9 * 2e-10 + 1e-13 * 3e-9)
        let expect0 = 4.0 * 0.1 * 9e-18 / (0.05 * 3e-9 * 2e-10 + 1e-13 * 3e-9);
        // user 1 served by AP 1: 4 * 0.05 * (2e-9)^2 / (0.1 * 2e-9 * 1e-10 + 1e-13 * 2e-9)
        let expect1 = 4.0 * 0.05 * 4e-18 / (0.1 * 2e-9 * 1e-10 + 1e-13 * 2e-9);
        let got = uplink_sinrs(&p, &st, 4, noise, InterferenceForm::Corrected);
        assert!((got[0] / expect0 - 1.0).abs() < 1e-12);
        assert!((got[1] / expect1 - 1.0).abs() < 1e-12);
        // 3.6e-18 / 3.03e-20 and 8e-19 / 2.02e-20
        assert!((got[0] - 118.811_881_188_118_8).abs() < 1e-9);
        assert!((got[1] - 39.603_960_396_039_6).abs() < 1e-9);
    }

    #[test]
    fn sinr_single_user_noise_limited() {
        let st = AccessChannelState::from_gains(array![[2e-9, 1e-9]], array![[1.5e-9, 0.5e-9]], 2);
        let p = PowerAssignment(vec![0.08]);
        let got = uplink_sinr(0, &p, &st, 2, 1e-13, InterferenceForm::Corrected);
        let expect = 2.0 * 0.08 * 2e-9 / 1e-13;
        assert!((got / expect - 1.0).abs() < 1e-12);
        let zero = PowerAssignment(vec![0.0]);
        assert_eq!(uplink_sinr(0, &zero, &st, 2, 1e-13, InterferenceForm::Corrected), 0.0);
    }

    #[test]
    fn rates() {
        assert_eq!(uplink_rate(0.0, 20e6), 0.0);
        assert_eq!(uplink_rate(1.0, 20e6), 2e7);
        assert_eq!(uplink_rate(3.0, 20e6), 4e7);
    }

    proptest! {
        #[test]
        fn path_loss_non_increasing(a in 0.0f64..2000.0, b in 0.0f64..2000.0) {
            let c = NetworkConfig::default();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(path_loss_db(hi, &c) <= path_loss_db(lo, &c) + 1e-12);
        }

        #[test]
        fn estimate_below_gain(beta in 1e-14f64..1e-6, noise in 1e-15f64..1e-11, p in 1e-3f64..1.0) {
            let v = estimate_variance(10.0, p, beta, noise);
            prop_assert!(v > 0.0 && v < beta);
        }

        #[test]
        fn sinr_monotone_in_powers(seed in 0u64..500, own in 0.0f64..0.1, other in 0.0f64..0.1, bump in 0.0f64..0.05) {
            let mut rng = crate::seed::Rng::seed_from_u64(seed);
            let beta = Array2::from_shape_fn((3, 6), |_| 10f64.powf(rng.gen_range(-11.0..-8.0)));
            let theta = beta.mapv(|b| estimate_variance(3.0, 0.1, b, 1e-13));
            let st = AccessChannelState::from_gains(beta, theta, 2);
            let base = PowerAssignment(vec![own, other, other]);
            let s0 = uplink_sinr(0, &base, &st, 4, 1e-13, InterferenceForm::Corrected);
            let more_own = PowerAssignment(vec![own + bump, other, other]);
            let more_other = PowerAssignment(vec![own, other + bump, other]);
            prop_assert!(uplink_sinr(0, &more_own, &st, 4, 1e-13, InterferenceForm::Corrected) >= s0);
            prop_assert!(uplink_sinr(0, &more_other, &st, 4, 1e-13, InterferenceForm::Corrected) <= s0);
        }

        #[test]
        fn clusters_match_sort(seed in 0u64..1000, size in 1usize..8) {
            let mut rng = crate::seed::Rng::seed_from_u64(seed);
            // coarse values so ties actually happen
            let q = Array2::from_shape_fn((6, 8), |_| (rng.gen_range(0..5)) as f64);
            let cl = form_clusters(&q, size);
            prop_assert_eq!(&cl.per_user, &sort_reference(&q, size));
            for (n, users) in cl.served_by.iter().enumerate() {
                for m in 0..6 {
                    prop_assert_eq!(users.contains(&m), cl.per_user[m].contains(&n));
                }
            }
        }
    }

    #[test]
    fn larger_cluster_helps_without_interference() {
        let beta = array![[3e-9, 2e-9, 1e-9]];
        let theta = beta.mapv(|b| estimate_variance(1.0, 0.1, b, 1e-13));
        let p = PowerAssignment(vec![0.1]);
        let mut prev = 0.0;
        for size in 1..=3 {
            let st = AccessChannelState::from_gains(beta.clone(), theta.clone(), size);
            let s = uplink_sinr(0, &p, &st, 4, 1e-13, InterferenceForm::Corrected);
            assert!(s >= prev);
            prev = s;
        }
    }
}
