//! Terminal rounding of the relaxed sensing schedule.

use serde::Serialize;

use crate::state::SensingSchedule;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepairEntry {
    pub target: usize,
    pub slot: usize,
    pub relaxed: f64,
    pub reason: &'static str,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RoundingReport {
    /// `max |alpha - round(alpha)|` of the input.
    pub gap_before: f64,
    /// Entries whose rounded value was overridden by a repair.
    pub repairs: Vec<RepairEntry>,
}

/// Thresholds at 0.5, then enforces at most one target per slot (keeping
/// the largest relaxed value) and at most `n_s_max` slots per target
/// (keeping the largest relaxed values).
pub fn round_schedule(relaxed: &SensingSchedule, n_s_max: usize) -> (SensingSchedule, RoundingReport) {
    let e_count = relaxed.n_targets();
    let n_slots = relaxed.alpha.first().map_or(0, |r| r.len());
    let mut out = SensingSchedule::zeros(e_count, n_slots);
    let mut report = RoundingReport { gap_before: relaxed.binary_gap(), repairs: Vec::new() };
    for e in 0..e_count {
        for n in 0..n_slots {
            if relaxed.alpha[e][n] >= 0.5 {
                out.alpha[e][n] = 1.0;
            }
        }
    }
    for n in 0..n_slots {
        let on: Vec<usize> = (0..e_count).filter(|e| out.alpha[*e][n] == 1.0).collect();
        if on.len() > 1 {
            // ties resolve to the lower target index
            let keep = on.iter().copied().fold(on[0], |b, e| if relaxed.alpha[e][n] > relaxed.alpha[b][n] { e } else { b });
            for e in on {
                if e != keep {
                    out.alpha[e][n] = 0.0;
                    report.repairs.push(RepairEntry { target: e, slot: n, relaxed: relaxed.alpha[e][n], reason: "one target per slot" });
                }
            }
        }
    }
    for e in 0..e_count {
        let mut on: Vec<usize> = (0..n_slots).filter(|n| out.alpha[e][*n] == 1.0).collect();
        if on.len() > n_s_max {
            on.sort_by(|a, b| relaxed.alpha[e][*b].total_cmp(&relaxed.alpha[e][*a]).then(a.cmp(b)));
            for n in on.into_iter().skip(n_s_max) {
                out.alpha[e][n] = 0.0;
                report.repairs.push(RepairEntry { target: e, slot: n, relaxed: relaxed.alpha[e][n], reason: "sensing-slot budget" });
            }
        }
    }
    (out, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn binary_feasible_is_unchanged() {
        let s = SensingSchedule { alpha: vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]] };
        let (r, rep) = round_schedule(&s, 2);
        assert_eq!(r, s);
        assert!(rep.repairs.is_empty());
        assert_eq!(rep.gap_before, 0.0);
    }

    #[test]
    fn one_target_per_slot_repair() {
        let s = SensingSchedule { alpha: vec![vec![0.6], vec![0.7]] };
        let (r, rep) = round_schedule(&s, 5);
        assert_eq!(r.alpha, vec![vec![0.0], vec![1.0]]);
        assert_eq!(rep.repairs.len(), 1);
        assert_eq!(rep.repairs[0].target, 0);
    }

    #[test]
    fn slot_budget_repair_keeps_largest() {
        let s = SensingSchedule { alpha: vec![vec![0.9, 0.6, 0.99, 0.7]] };
        let (r, rep) = round_schedule(&s, 2);
        assert_eq!(r.alpha, vec![vec![1.0, 0.0, 1.0, 0.0]]);
        assert_eq!(rep.repairs.len(), 2);
    }

    proptest! {
        #[test]
        fn output_is_binary_and_feasible(vals in proptest::collection::vec(0.0f64..1.0, 12), cap in 1usize..4) {
            let s = SensingSchedule { alpha: vec![vals[..6].to_vec(), vals[6..].to_vec()] };
            let (r, _) = round_schedule(&s, cap);
            prop_assert!(r.is_binary());
            for n in 0..6 {
                prop_assert!(r.slot_sum(n) <= 1.0);
            }
            for e in 0..2 {
                prop_assert!(r.target_sum(e) <= cap as f64);
                for n in 0..6 {
                    if r.alpha[e][n] == 1.0 {
                        prop_assert!(s.alpha[e][n] >= 0.5);
                    }
                }
            }
        }
    }
}
