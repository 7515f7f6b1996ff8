//! mmWave AP-to-CPU fronthaul: blockage, sectored antenna gains, SINR, rate.

use std::f64::consts::PI;

use ndarray::Array2;

use crate::access::shannon_rate;
use crate::config::NetworkConfig;

/// Probability that a link of length `distance` (m) is line-of-sight.
pub fn los_probability(distance: f64, blockage_density: f64) -> f64 {
    (-blockage_density * distance).exp()
}

/// Probabilities of the main-main, main-side, and side-side gain patterns.
pub fn gain_pattern_probabilities(beamwidth: f64) -> [f64; 3] {
    let main = beamwidth / (2.0 * PI);
    let side = (2.0 * PI - beamwidth) / (2.0 * PI);
    [main * main, 2.0 * main * side, side * side]
}

/// Antenna gain of a link. Aligned (serving) links always get main-lobe
/// gain at both ends; other links draw one of the three patterns.
pub fn sample_gain<R: rand::Rng + ?Sized>(
    aligned: bool,
    beamwidth: f64,
    main_gain: f64,
    side_gain: f64,
    rng: &mut R,
) -> f64 {
    if aligned {
        return main_gain * main_gain;
    }
    let [p_mm, p_ms, _] = gain_pattern_probabilities(beamwidth);
    let u: f64 = rng.gen();
    if u < p_mm {
        main_gain * main_gain
    } else if u < p_mm + p_ms {
        main_gain * side_gain
    } else {
        side_gain * side_gain
    }
}

/// Per-slot fronthaul state, all matrices `aps x cpus`.
#[derive(Debug, Clone, PartialEq)]
pub struct FronthaulState {
    pub los: Array2<bool>,
    /// Unaligned gain of AP `i` toward CPU `k`, used for interference.
    pub gain: Array2<f64>,
    pub exponent: Array2<f64>,
    pub active: Array2<bool>,
    /// Gain on an active link toward its own CPU.
    pub serving_gain: f64,
}

impl FronthaulState {
    /// Sample blockage and interference gains for every AP-CPU pair.
    pub fn sample<R: rand::Rng + ?Sized>(config: &NetworkConfig, dist_ak: &Array2<f64>, rng: &mut R) -> Self {
        let dim = dist_ak.dim();
        let mut los = Array2::from_elem(dim, false);
        let mut gain = Array2::zeros(dim);
        for (&d, (l, g)) in dist_ak.iter().zip(los.iter_mut().zip(gain.iter_mut())) {
            *l = rng.gen::<f64>() < los_probability(d, config.blockage_density);
            *g = sample_gain(false, config.beamwidth_rad, config.main_lobe_gain, config.side_lobe_gain, rng);
        }
        let exponent = los.mapv(|l| if l { config.los_exponent } else { config.nlos_exponent });
        Self {
            los,
            gain,
            exponent,
            active: Array2::from_elem(dim, false),
            serving_gain: config.main_lobe_gain * config.main_lobe_gain,
        }
    }

    pub fn with_active(mut self, active: Array2<bool>) -> Self {
        assert_eq!(active.dim(), self.los.dim());
        self.active = active;
        self
    }
}

/// Distance attenuation with a 1 m reference distance.
fn attenuation(distance: f64, exponent: f64) -> f64 {
    distance.max(1.0).powf(-exponent)
}

/// SINR at CPU `k` of the link from AP `n`; `None` if the link is inactive.
pub fn fronthaul_sinr(n: usize, k: usize, state: &FronthaulState, dist_ak: &Array2<f64>, power: f64, noise: f64) -> Option<f64> {
    if !state.active[[n, k]] {
        return None;
    }
    let signal = power * state.serving_gain * attenuation(dist_ak[[n, k]], state.exponent[[n, k]]);
    let mut interference = 0.0;
    for ((i, j), &on) in state.active.indexed_iter() {
        if on && (i, j) != (n, k) {
            interference += power * state.gain[[i, k]] * attenuation(dist_ak[[i, k]], state.exponent[[i, k]]);
        }
    }
    Some(signal / (interference + noise))
}

pub fn fronthaul_rate(sinr: f64, bandwidth: f64) -> f64 {
    shannon_rate(sinr, bandwidth)
}

/// Rates of all active links (0 for inactive ones).
pub fn fronthaul_rates(state: &FronthaulState, dist_ak: &Array2<f64>, config: &NetworkConfig) -> Array2<f64> {
    let noise = config.fronthaul_noise();
    Array2::from_shape_fn(dist_ak.dim(), |(n, k)| {
        fronthaul_sinr(n, k, state, dist_ak, config.fronthaul_power, noise)
            .map_or(0.0, |z| fronthaul_rate(z, config.fronthaul_bandwidth))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;

    fn fixed_state() -> (FronthaulState, Array2<f64>) {
        // 3 APs, 2 CPUs
        let dist = array![[100.0, 400.0], [250.0, 150.0], [300.0, 300.0]];
        let los = array![[true, false], [true, true], [false, true]];
        let gain = array![[1.0, 0.01], [100.0, 1.0], [0.01, 1.0]];
        let exponent = los.mapv(|l| if l { 2.5 } else { 4.0 });
        let active = array![[true, false], [false, true], [true, true]];
        let st = FronthaulState {
            los,
            gain,
            exponent,
            active,
            serving_gain: 100.0,
        };
        (st, dist)
    }

    #[test]
    fn los_probability_values() {
        assert_eq!(los_probability(0.0, 6e-4), 1.0);
        assert!((los_probability(1000.0, 6e-4) - 0.548_811_636_094_026_4).abs() < 1e-12);
        let p = los_probability(321.0, 6e-4);
        assert_eq!(p + (1.0 - p), 1.0);
    }

    #[test]
    fn pattern_probabilities_sum_to_one() {
        let p = gain_pattern_probabilities(PI / 6.0);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((p[0] - 1.0 / 144.0).abs() < 1e-15);
        assert_eq!(gain_pattern_probabilities(2.0 * PI), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn aligned_gain_is_main_squared() {
        let mut rng = crate::seed::Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(sample_gain(true, PI / 6.0, 10.0, 0.1, &mut rng), 100.0);
            assert_eq!(sample_gain(false, 2.0 * PI, 10.0, 0.1, &mut rng), 100.0);
        }
    }

    #[test]
    fn single_link_is_interference_free() {
        let (mut st, dist) = fixed_state();
        st.active = array![[true, false], [false, false], [false, false]];
        let z = fronthaul_sinr(0, 0, &st, &dist, 1.0, 1e-12).unwrap();
        assert_eq!(z, 100.0 * 100f64.powf(-2.5) / 1e-12);
        assert!(fronthaul_sinr(1, 1, &st, &dist, 1.0, 1e-12).is_none());
    }

    #[test]
    fn hand_evaluated_three_by_two() {
        let (st, dist) = fixed_state();
        let noise = 1e-12;
        // victim (0,0): interferers (2,0) and (2,1) via AP 2 -> CPU 0 (NLoS, gain 0.01),
        // (1,1) via AP 1 -> CPU 0 (LoS, gain 100)
        let i_ap2 = 0.01 * 300f64.powf(-4.0);
        let i_ap1 = 100.0 * 250f64.powf(-2.5);
        let z00 = 100.0 * 100f64.powf(-2.5) / (2.0 * i_ap2 + i_ap1 + noise);
        // victim (1,1): interferers (0,0) via AP0->CPU1 (NLoS, 0.01), (2,0) and (2,1) via AP2->CPU1 (LoS, 1)
        let z11 = 100.0 * 150f64.powf(-2.5) / (0.01 * 400f64.powf(-4.0) + 2.0 * 300f64.powf(-2.5) + noise);
        // victim (2,0): interferers (0,0) AP0->CPU0 (LoS, 1), (1,1) AP1->CPU0 (100), (2,1) AP2->CPU0 (0.01, NLoS)
        let z20 = 100.0 * 300f64.powf(-4.0) / (100f64.powf(-2.5) + 100.0 * 250f64.powf(-2.5) + 0.01 * 300f64.powf(-4.0) + noise);
        for (n, k, want) in [(0, 0, z00), (1, 1, z11), (2, 0, z20)] {
            let got = fronthaul_sinr(n, k, &st, &dist, 1.0, noise).unwrap();
            assert!((got / want - 1.0).abs() < 1e-9, "({n},{k}) {got} vs {want}");
        }
        // the batched rate path agrees with the direct SINR
        let mut cfg = NetworkConfig::default();
        cfg.fronthaul_power = 1.0;
        cfg.noise_psd_dbm_hz = 10.0 * (noise * 1e3 / cfg.fronthaul_bandwidth).log10();
        let rates = fronthaul_rates(&st, &dist, &cfg);
        for (n, k) in [(0, 0), (1, 1), (2, 0), (2, 1)] {
            let z = fronthaul_sinr(n, k, &st, &dist, 1.0, cfg.fronthaul_noise()).unwrap();
            assert!((rates[[n, k]] / fronthaul_rate(z, cfg.fronthaul_bandwidth) - 1.0).abs() < 1e-9);
        }
        assert_eq!(rates[[0, 1]], 0.0);
    }

    #[test]
    fn symmetric_victims_see_equal_interference() {
        let dist = array![[200.0], [200.0]];
        let st = FronthaulState {
            los: array![[true], [true]],
            gain: array![[1.0], [1.0]],
            exponent: array![[2.5], [2.5]],
            active: array![[true], [true]],
            serving_gain: 100.0,
        };
        let a = fronthaul_sinr(0, 0, &st, &dist, 1.0, 1e-12).unwrap();
        let b = fronthaul_sinr(1, 0, &st, &dist, 1.0, 1e-12).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn extra_interferer_strictly_lowers_sinr() {
        let (mut st, dist) = fixed_state();
        st.active = array![[true, false], [false, false], [false, false]];
        let mut prev = fronthaul_sinr(0, 0, &st, &dist, 1.0, 1e-12).unwrap();
        for (i, j) in [(1, 1), (2, 0), (2, 1), (1, 0)] {
            st.active[[i, j]] = true;
            let z = fronthaul_sinr(0, 0, &st, &dist, 1.0, 1e-12).unwrap();
            assert!(z < prev);
            prev = z;
        }
    }

    #[test]
    fn rates_values() {
        assert_eq!(fronthaul_rate(0.0, 1e9), 0.0);
        assert_eq!(fronthaul_rate(1.0, 1e9), 1e9);
        assert_eq!(fronthaul_rate(7.0, 1e9), 3e9);
    }
}
