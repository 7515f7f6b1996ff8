//! Per-user delay composition and the per-slot deadline.

use ndarray::Array2;

use crate::access::Clusters;
use crate::config::NetworkConfig;

/// Binary offloading decision: each user offloads to at most one CPU.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OffloadDecision {
    targets: Vec<Option<usize>>,
    cpus: usize,
}

impl OffloadDecision {
    pub fn new(targets: Vec<Option<usize>>, cpus: usize) -> Self {
        assert!(
            targets.iter().flatten().all(|&k| k < cpus),
            "offload target out of range"
        );
        Self { targets, cpus }
    }

    pub fn all_local(users: usize, cpus: usize) -> Self {
        Self::new(vec![None; users], cpus)
    }

    /// Build from an `users x cpus` 0/1 matrix; `None` if a row sums above 1.
    pub fn from_matrix(omega: &Array2<u8>) -> Option<Self> {
        let mut targets = Vec::with_capacity(omega.nrows());
        for row in omega.rows() {
            let ones: Vec<usize> = row.iter().enumerate().filter(|(_, &v)| v != 0).map(|(k, _)| k).collect();
            match ones.as_slice() {
                [] => targets.push(None),
                [k] => targets.push(Some(*k)),
                _ => return None,
            }
        }
        Some(Self::new(targets, omega.ncols()))
    }

    pub fn matrix(&self) -> Array2<u8> {
        let mut omega = Array2::zeros((self.targets.len(), self.cpus));
        for (m, t) in self.targets.iter().enumerate() {
            if let Some(k) = t {
                omega[[m, *k]] = 1;
            }
        }
        omega
    }

    pub fn target(&self, user: usize) -> Option<usize> {
        self.targets[user]
    }

    pub fn targets(&self) -> &[Option<usize>] {
        &self.targets
    }

    pub fn users(&self) -> usize {
        self.targets.len()
    }

    pub fn cpus(&self) -> usize {
        self.cpus
    }

    pub fn offloaders(&self, cpu: usize) -> impl Iterator<Item = usize> + '_ {
        self.targets
            .iter()
            .enumerate()
            .filter(move |(_, t)| **t == Some(cpu))
            .map(|(m, _)| m)
    }
}

/// One slot's tasks.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskBatch {
    pub size_bits: Vec<f64>,
    /// CPU cycles per bit.
    pub density: Vec<f64>,
}

impl TaskBatch {
    pub fn draw<R: rand::Rng + ?Sized>(config: &NetworkConfig, rng: &mut R) -> Self {
        let mut size_bits = Vec::with_capacity(config.users);
        let mut density = Vec::with_capacity(config.users);
        for _ in 0..config.users {
            size_bits.push(config.task_size_bits.sample(rng));
            density.push(config.task_density.sample(rng));
        }
        Self { size_bits, density }
    }

    /// Required CPU cycles of user `m`'s task.
    pub fn workload(&self, m: usize) -> f64 {
        self.size_bits[m] * self.density[m]
    }

    pub fn users(&self) -> usize {
        self.size_bits.len()
    }
}

/// Delay components of one user for one slot (seconds).
///
/// Components of a dropped task are truncated at the deadline; `raw_total`
/// keeps the untruncated value (possibly infinite).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayBreakdown {
    pub local: f64,
    pub access: f64,
    pub fronthaul: f64,
    pub edge: f64,
    pub raw_total: f64,
    pub total: f64,
    pub dropped: bool,
}

/// Fronthaul links carrying traffic: AP `n` to CPU `k` whenever some user
/// offloading to `k` has `n` in its cluster.
pub fn active_links(decision: &OffloadDecision, clusters: &Clusters, aps: usize) -> Array2<bool> {
    let mut g = Array2::from_elem((aps, decision.cpus()), false);
    for (m, t) in decision.targets().iter().enumerate() {
        if let Some(k) = *t {
            for &n in &clusters.per_user[m] {
                g[[n, k]] = true;
            }
        }
    }
    g
}

/// Inputs for composing per-user delays in one slot.
#[derive(Debug, Clone, Copy)]
pub struct DelayInputs<'a> {
    pub decision: &'a OffloadDecision,
    pub tasks: &'a TaskBatch,
    pub clusters: &'a Clusters,
    /// per-user uplink rate (bits/s)
    pub uplink_rates: &'a [f64],
    /// aps x cpus fronthaul rate (bits/s); `None` removes the fronthaul stage
    pub fronthaul_rates: Option<&'a Array2<f64>>,
    /// per-user edge cycles/s (0 for local users)
    pub allocation: &'a [f64],
    pub local_capacity: &'a [f64],
    pub deadline: f64,
}

/// Access-plus-fronthaul delay of user `m` offloading to CPU `k`.
pub fn transfer_delay(m: usize, k: usize, inputs: &DelayInputs<'_>) -> (f64, f64) {
    let d = inputs.tasks.size_bits[m];
    let access = d / inputs.uplink_rates[m];
    let fronthaul = match inputs.fronthaul_rates {
        Some(rf) => inputs.clusters.per_user[m]
            .iter()
            .map(|&n| d / rf[[n, k]])
            .fold(0.0, f64::max),
        None => 0.0,
    };
    (access, fronthaul)
}

pub fn compute_delays(inputs: &DelayInputs<'_>) -> Vec<DelayBreakdown> {
    let tau = inputs.deadline;
    (0..inputs.decision.users())
        .map(|m| {
            let work = inputs.tasks.workload(m);
            let (mut local, mut access, mut fronthaul, mut edge) = (0.0, 0.0, 0.0, 0.0);
            match inputs.decision.target(m) {
                None => local = work / inputs.local_capacity[m],
                Some(k) => {
                    (access, fronthaul) = transfer_delay(m, k, inputs);
                    edge = work / inputs.allocation[m];
                }
            }
            let raw = if inputs.decision.target(m).is_some() {
                access + fronthaul + edge
            } else {
                local
            };
            // NaN (0/0) counts as a miss
            let dropped = !(raw <= tau);
            DelayBreakdown {
                local: local.min(tau),
                access: access.min(tau),
                fronthaul: fronthaul.min(tau),
                edge: edge.min(tau),
                raw_total: raw,
                total: if dropped { tau } else { raw },
                dropped,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::access::form_clusters;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn clusters_of(per_user: Vec<Vec<usize>>, aps: usize) -> Clusters {
        let mut served_by = vec![Vec::new(); aps];
        for (m, c) in per_user.iter().enumerate() {
            for &n in c {
                served_by[n].push(m);
            }
        }
        Clusters { per_user, served_by }
    }

    #[test]
    fn matrix_round_trip_and_row_check() {
        let d = OffloadDecision::new(vec![None, Some(1), Some(0)], 2);
        assert_eq!(OffloadDecision::from_matrix(&d.matrix()).unwrap(), d);
        assert!(OffloadDecision::from_matrix(&array![[1u8, 1u8]]).is_none());
    }

    #[test]
    fn all_local_has_no_active_links() {
        let cl = form_clusters(&array![[1.0, 2.0, 3.0], [3.0, 2.0, 1.0]], 2);
        let g = active_links(&OffloadDecision::all_local(2, 2), &cl, 3);
        assert!(g.iter().all(|&v| !v));
    }

    #[test]
    fn single_offloader_links() {
        let cl = clusters_of(vec![vec![2, 5]], 6);
        let g = active_links(&OffloadDecision::new(vec![Some(1)], 3), &cl, 6);
        for ((n, k), &on) in g.indexed_iter() {
            assert_eq!(on, (n, k) == (2, 1) || (n, k) == (5, 1));
        }
    }

    #[test]
    fn links_match_triple_loop() {
        let mut rng = crate::seed::Rng::seed_from_u64(17);
        for _ in 0..50 {
            let (users, aps, cpus) = (6, 9, 3);
            let q = Array2::from_shape_fn((users, aps), |_| rng.gen::<f64>());
            let cl = form_clusters(&q, 3);
            let targets: Vec<Option<usize>> = (0..users)
                .map(|_| match rng.gen_range(0..=cpus) {
                    0 => None,
                    k => Some(k - 1),
                })
                .collect();
            let dec = OffloadDecision::new(targets, cpus);
            let omega = dec.matrix();
            let g = active_links(&dec, &cl, aps);
            for n in 0..aps {
                for k in 0..cpus {
                    let mut want = false;
                    for m in 0..users {
                        if omega[[m, k]] == 1 && cl.per_user[m].contains(&n) {
                            want = true;
                        }
                    }
                    assert_eq!(g[[n, k]], want);
                }
            }
        }
    }

    #[test]
    fn local_task_misses_deadline() {
        let dec = OffloadDecision::all_local(1, 1);
        let tasks = TaskBatch {
            size_bits: vec![8e5],
            density: vec![1000.0],
        };
        let cl = clusters_of(vec![vec![0]], 1);
        let out = compute_delays(&DelayInputs {
            decision: &dec,
            tasks: &tasks,
            clusters: &cl,
            uplink_rates: &[0.0],
            fronthaul_rates: None,
            allocation: &[0.0],
            local_capacity: &[4e9],
            deadline: 0.1,
        });
        assert!((out[0].raw_total - 0.2).abs() < 1e-15);
        assert!(out[0].dropped);
        assert_eq!(out[0].total, 0.1);
    }

    #[test]
    fn slowest_cluster_ap_sets_fronthaul_delay() {
        let dec = OffloadDecision::new(vec![Some(0)], 1);
        let tasks = TaskBatch {
            size_bits: vec![1e6],
            density: vec![500.0],
        };
        let cl = clusters_of(vec![vec![0, 1]], 2);
        let rf = array![[1e8], [1e9]];
        let inputs = DelayInputs {
            decision: &dec,
            tasks: &tasks,
            clusters: &cl,
            uplink_rates: &[1e9],
            fronthaul_rates: Some(&rf),
            allocation: &[1e10],
            local_capacity: &[3e9],
            deadline: 0.1,
        };
        let out = compute_delays(&inputs)[0];
        assert!((out.fronthaul - 0.01).abs() < 1e-15);
        assert_eq!(out.local, 0.0);
        assert!((out.total - (1e-3 + 0.01 + 0.05)).abs() < 1e-15);
        // permuting rates within the cluster leaves the result unchanged
        let rf2 = array![[1e9], [1e8]];
        let out2 = compute_delays(&DelayInputs {
            fronthaul_rates: Some(&rf2),
            ..inputs
        })[0];
        assert_eq!(out.fronthaul, out2.fronthaul);
    }

    #[test]
    fn fast_links_reduce_to_processing_time() {
        let dec = OffloadDecision::new(vec![Some(0)], 1);
        let tasks = TaskBatch {
            size_bits: vec![5e5],
            density: vec![800.0],
        };
        let cl = clusters_of(vec![vec![0]], 1);
        let rf = array![[f64::INFINITY]];
        let out = compute_delays(&DelayInputs {
            decision: &dec,
            tasks: &tasks,
            clusters: &cl,
            uplink_rates: &[f64::INFINITY],
            fronthaul_rates: Some(&rf),
            allocation: &[1.5e10],
            local_capacity: &[3e9],
            deadline: 0.1,
        })[0];
        assert_eq!(out.total, 5e5 * 800.0 / 1.5e10);
    }

    #[test]
    fn zero_rate_offload_is_a_drop() {
        let dec = OffloadDecision::new(vec![Some(0)], 1);
        let tasks = TaskBatch {
            size_bits: vec![5e5],
            density: vec![800.0],
        };
        let cl = clusters_of(vec![vec![0]], 1);
        let out = compute_delays(&DelayInputs {
            decision: &dec,
            tasks: &tasks,
            clusters: &cl,
            uplink_rates: &[0.0],
            fronthaul_rates: None,
            allocation: &[1e10],
            local_capacity: &[3e9],
            deadline: 0.1,
        })[0];
        assert!(out.dropped);
        assert_eq!(out.total, 0.1);
        assert_eq!(out.access, 0.1);
    }

    proptest! {
        #[test]
        fn recorded_delay_within_deadline(
            d in 1e5f64..1e6, rho in 100.0f64..1500.0, ra in 0.0f64..1e9,
            rf in 1e6f64..1e10, c in 1e8f64..2e10, cl_cap in 1e9f64..5e9, offload in any::<bool>(),
        ) {
            let dec = OffloadDecision::new(vec![offload.then_some(0)], 1);
            let tasks = TaskBatch { size_bits: vec![d], density: vec![rho] };
            let cl = clusters_of(vec![vec![0]], 1);
            let rfm = array![[rf]];
            let out = compute_delays(&DelayInputs {
                decision: &dec, tasks: &tasks, clusters: &cl, uplink_rates: &[ra],
                fronthaul_rates: Some(&rfm), allocation: &[c], local_capacity: &[cl_cap], deadline: 0.1,
            })[0];
            prop_assert!(out.total <= 0.1);
            prop_assert_eq!(out.dropped, !(out.raw_total <= 0.1));
            let off = out.access + out.fronthaul + out.edge;
            prop_assert!((out.local == 0.0) != (off == 0.0));
        }
    }
}
