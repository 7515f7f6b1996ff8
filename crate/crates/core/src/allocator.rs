//! Per-CPU computing-resource allocation.
//!
//! Given the offloaders of one CPU, each with workload `W` (cycles) and a
//! fixed transfer delay `A` (s), choose cycles/s `c` minimizing
//! `sum W / c` subject to `sum c = C`, `c >= W / (tau - A)` and `c <= C`.
//! The stationarity condition gives `c(nu) = clamp(sqrt(W / nu), lo, C)`;
//! the dual variable `nu` is found by bisection on the capacity equality.

use crate::error::{Error, Result};

/// Guard on the remaining-time denominator of the deadline bound (s).
pub const DEADLINE_EPS: f64 = 1e-6;
const BISECTION_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationInstance {
    /// Required cycles per offloader.
    pub workload: Vec<f64>,
    /// Access plus fronthaul delay per offloader (s).
    pub transfer_delay: Vec<f64>,
    pub capacity: f64,
    pub deadline: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Allocation {
    /// Cycles/s per offloader, in instance order.
    pub cycles: Vec<f64>,
    /// Offloaders whose deadline cannot be met by this allocation.
    pub infeasible: Vec<usize>,
}

impl AllocationInstance {
    pub fn len(&self) -> usize {
        self.workload.len()
    }

    pub fn is_empty(&self) -> bool {
        self.workload.is_empty()
    }

    /// Deadline-driven lower bound per user; users that already exhausted
    /// the slot in transfer get no bound.
    pub fn lower_bounds(&self) -> Vec<f64> {
        self.workload
            .iter()
            .zip(&self.transfer_delay)
            .map(|(&w, &a)| {
                if a >= self.deadline {
                    0.0
                } else {
                    w / (self.deadline - a).max(DEADLINE_EPS)
                }
            })
            .collect()
    }

    pub fn objective(&self, cycles: &[f64]) -> f64 {
        self.workload.iter().zip(cycles).map(|(&w, &c)| w / c).sum()
    }

    fn misses(&self, cycles: &[f64]) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| !(self.transfer_delay[i] + self.workload[i] / cycles[i] <= self.deadline))
            .collect()
    }
}

fn clamped_sum(workload: &[f64], lo: &[f64], hi: f64, nu: f64) -> f64 {
    workload.iter().zip(lo).map(|(&w, &l)| (w / nu).sqrt().clamp(l, hi)).sum()
}

/// Optimal allocation for one CPU.
pub fn allocate(instance: &AllocationInstance) -> Allocation {
    let n = instance.len();
    if n == 0 {
        return Allocation::default();
    }
    let cap = instance.capacity;
    let w = &instance.workload;
    if n == 1 {
        let cycles = vec![cap];
        return Allocation {
            infeasible: instance.misses(&cycles),
            cycles,
        };
    }

    let lo = instance.lower_bounds();
    let lo_sum: f64 = lo.iter().sum();
    if lo_sum > cap {
        // deadlines cannot all hold: unconstrained optimum over full capacity
        let root_sum: f64 = w.iter().map(|x| x.sqrt()).sum();
        let cycles: Vec<f64> = w.iter().map(|x| cap * x.sqrt() / root_sum).collect();
        return Allocation {
            infeasible: instance.misses(&cycles),
            cycles,
        };
    }

    // sum c(nu) is non-increasing in nu; bracket the root in log space
    let w_max = w.iter().cloned().fold(0.0, f64::max);
    let w_min = w.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut nu_lo = w_min / (cap * cap) * 0.25;
    let mut nu_hi = w_max / (lo.iter().cloned().fold(f64::INFINITY, f64::min).max(cap / (4.0 * n as f64))).powi(2);
    while clamped_sum(w, &lo, cap, nu_lo) < cap {
        nu_lo *= 0.25;
    }
    while clamped_sum(w, &lo, cap, nu_hi) > cap {
        nu_hi *= 4.0;
    }
    let mut nu = (nu_lo * nu_hi).sqrt();
    for _ in 0..200 {
        nu = (nu_lo * nu_hi).sqrt();
        let s = clamped_sum(w, &lo, cap, nu);
        if ((s - cap) / cap).abs() < BISECTION_REL_TOL * 1e-3 || nu_hi / nu_lo - 1.0 < 1e-15 {
            break;
        }
        if s > cap {
            nu_lo = nu;
        } else {
            nu_hi = nu;
        }
    }
    let mut cycles: Vec<f64> = w.iter().zip(&lo).map(|(&wi, &l)| (wi / nu).sqrt().clamp(l, cap)).collect();

    // hand the residual to users strictly inside their bounds so the
    // capacity equality holds without breaking any bound
    let free: Vec<usize> = (0..n).filter(|&i| cycles[i] > lo[i] && cycles[i] < cap).collect();
    let residual = cap - cycles.iter().sum::<f64>();
    if !free.is_empty() && residual != 0.0 {
        let free_total: f64 = free.iter().map(|&i| cycles[i]).sum();
        for &i in &free {
            cycles[i] = (cycles[i] + residual * cycles[i] / free_total).clamp(lo[i], cap);
        }
    }
    Allocation {
        infeasible: instance.misses(&cycles),
        cycles,
    }
}

/// Largest instance the grid oracle accepts.
pub const ORACLE_MAX_USERS: usize = 4;

/// Exhaustive search over the feasible simplex, refined by repeated zooming
/// around the incumbent. Independent of the stationarity conditions; meant
/// as a test oracle.
///
/// Points are `c = lo + x * (C - sum lo)` with `x` on the unit simplex, so
/// every candidate satisfies the capacity equality and both bounds. When
/// the deadline bounds are jointly infeasible the search runs without them.
pub fn brute_force_allocate(instance: &AllocationInstance, grid_resolution: usize) -> Result<Vec<f64>> {
    let n = instance.len();
    if n > ORACLE_MAX_USERS {
        return Err(Error::OracleTooLarge {
            users: n,
            max: ORACLE_MAX_USERS,
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let cap = instance.capacity;
    let mut lo = instance.lower_bounds();
    if lo.iter().sum::<f64>() > cap {
        lo = vec![0.0; n];
    }
    let slack = cap - lo.iter().sum::<f64>();
    let to_cycles = |x: &[f64]| -> Vec<f64> { lo.iter().zip(x).map(|(&l, &xi)| l + xi * slack).collect() };
    let eval = |x: &[f64]| -> f64 {
        let c = to_cycles(x);
        if c.iter().any(|&v| v <= 0.0) {
            f64::INFINITY
        } else {
            instance.objective(&c)
        }
    };
    if n == 1 {
        return Ok(vec![cap]);
    }

    let res = grid_resolution.max(2);
    let dims = n - 1;
    let mut center = vec![1.0 / n as f64; dims];
    let mut half_width = 1.0;
    let mut best_x: Vec<f64> = {
        let mut x = center.clone();
        x.push(1.0 - center.iter().sum::<f64>());
        x
    };
    let mut best = eval(&best_x);

    for _level in 0..60 {
        let mut idx = vec![0usize; dims];
        loop {
            let mut x: Vec<f64> = (0..dims)
                .map(|d| center[d] - half_width + 2.0 * half_width * idx[d] as f64 / res as f64)
                .collect();
            let head: f64 = x.iter().sum();
            if x.iter().all(|&v| v >= 0.0) && head <= 1.0 {
                x.push(1.0 - head);
                let f = eval(&x);
                if f < best {
                    best = f;
                    best_x = x;
                }
            }
            // odometer increment
            let mut d = 0;
            loop {
                if d == dims {
                    break;
                }
                idx[d] += 1;
                if idx[d] <= res {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
            if d == dims {
                break;
            }
        }
        center = best_x[..dims].to_vec();
        half_width *= 4.0 / res as f64;
        if half_width < 1e-13 {
            break;
        }
    }
    Ok(to_cycles(&best_x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn inst(workload: Vec<f64>, transfer: Vec<f64>, capacity: f64) -> AllocationInstance {
        AllocationInstance {
            workload,
            transfer_delay: transfer,
            capacity,
            deadline: 0.1,
        }
    }

    #[test]
    fn empty_instance() {
        let a = allocate(&inst(vec![], vec![], 1e10));
        assert!(a.cycles.is_empty() && a.infeasible.is_empty());
    }

    #[test]
    fn symmetric_split() {
        let a = allocate(&inst(vec![1e8, 1e8], vec![0.0, 0.0], 1e10));
        assert!((a.cycles[0] / 5e9 - 1.0).abs() < 1e-12);
        assert!((a.cycles[1] / 5e9 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn square_root_proportional() {
        let a = allocate(&inst(vec![4e8, 1e8], vec![0.0, 0.0], 1.2e10));
        assert!((a.cycles[0] / 1.2e10 - 2.0 / 3.0).abs() < 1e-9);
        assert!((a.cycles[0] / a.cycles[1] - 2.0).abs() < 1e-9);
        let oracle = brute_force_allocate(&inst(vec![4e8, 1e8], vec![0.0, 0.0], 1.2e10), 20).unwrap();
        assert!((oracle[0] / 1.2e10 - 2.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn single_user_takes_everything() {
        let a = allocate(&inst(vec![3e8], vec![0.02], 1.3e10));
        assert_eq!(a.cycles, vec![1.3e10]);
        assert!(a.infeasible.is_empty());
    }

    #[test]
    fn exhausted_transfer_reported_immediately() {
        let a = allocate(&inst(vec![3e8, 2e8], vec![0.1, 0.01], 1e10));
        assert_eq!(a.infeasible, vec![0]);
        assert!(a.cycles.iter().all(|&c| c > 0.0));
    }

    #[test]
    fn binding_lower_bound_is_clamped() {
        // user 2 has little time left: bound 2e8 / 0.02 = 1e10 dominates its sqrt share
        let i = inst(vec![4e8, 4e8, 2e8], vec![0.0, 0.0, 0.08], 2e10);
        let a = allocate(&i);
        let lo = i.lower_bounds();
        assert!((a.cycles[2] - lo[2]).abs() / lo[2] < 1e-9);
        assert!((a.cycles[0] - 5e9).abs() / 5e9 < 1e-9);
        let oracle = brute_force_allocate(&i, 20).unwrap();
        assert!((i.objective(&oracle) / i.objective(&a.cycles) - 1.0).abs() < 1e-6);
        assert!((oracle[2] - lo[2]).abs() / lo[2] < 1e-4);
    }

    #[test]
    fn infeasible_deadlines_fall_back_to_sqrt_split() {
        let i = inst(vec![9e8, 9e8, 9e8], vec![0.05, 0.05, 0.05], 1e10);
        let a = allocate(&i);
        assert!((a.cycles.iter().sum::<f64>() - 1e10).abs() < 1e-3);
        assert_eq!(a.infeasible, vec![0, 1, 2]);
    }

    #[test]
    fn oracle_rejects_large_instances() {
        let i = inst(vec![1e8; 5], vec![0.0; 5], 1e10);
        assert!(matches!(brute_force_allocate(&i, 10), Err(Error::OracleTooLarge { .. })));
    }

    #[test]
    fn oracle_symmetric_optimum() {
        let i = inst(vec![2e8; 3], vec![0.01; 3], 1.5e10);
        let c = brute_force_allocate(&i, 12).unwrap();
        for v in &c {
            assert!((v / 5e9 - 1.0).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn constraints_hold(
            w in prop::collection::vec(2e8f64..8e8, 2..8),
            a in prop::collection::vec(0.0f64..0.09, 8),
            cap in 1e10f64..2e10,
        ) {
            let n = w.len();
            let i = inst(w, a[..n].to_vec(), cap);
            let out = allocate(&i);
            let total: f64 = out.cycles.iter().sum();
            prop_assert!((total / cap - 1.0).abs() < 1e-6);
            prop_assert!(out.cycles.iter().all(|&c| c > 0.0 && c <= cap));
            if i.lower_bounds().iter().sum::<f64>() <= cap {
                for (c, l) in out.cycles.iter().zip(i.lower_bounds()) {
                    prop_assert!(*c >= l);
                }
            }
        }

        #[test]
        fn unbound_users_follow_sqrt_ratio(w in prop::collection::vec(1e6f64..1e7, 2..6)) {
            let n = w.len();
            let i = inst(w.clone(), vec![0.0; n], 1e10);
            let out = allocate(&i);
            for a in 0..n {
                for b in 0..n {
                    prop_assert!((out.cycles[a] / out.cycles[b] - (w[a] / w[b]).sqrt()).abs() < 1e-6);
                }
            }
        }

        #[test]
        fn larger_workload_never_gets_less(
            w in prop::collection::vec(2e8f64..8e8, 2..6),
            a in prop::collection::vec(0.0f64..0.05, 6),
            bump in 1.0f64..2.0,
        ) {
            let n = w.len();
            let mut w2 = w.clone();
            w2[0] *= bump;
            // keep both instances deadline-feasible; the fallback is a different regime
            let need: f64 = inst(w2.clone(), a[..n].to_vec(), 1.0).lower_bounds().iter().sum();
            let cap = need.max(1.5e10) * 1.1;
            let base = inst(w.clone(), a[..n].to_vec(), cap);
            let more = inst(w2, a[..n].to_vec(), cap);
            prop_assert!(allocate(&more).cycles[0] >= allocate(&base).cycles[0] * (1.0 - 1e-9));
        }
    }
}
