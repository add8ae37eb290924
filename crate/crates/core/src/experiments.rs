//! Experiment plans: the cross product of workloads, variants, working-set
//! fractions and seeds, run in parallel on the host with results in plan
//! order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::report::SimReport;
use crate::workloads::{run_workload, Variant, WorkloadConfig, WorkloadKind};

/// Replace the LLC capacity for some variants, keeping the input sized by
/// the original LLC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlcOverride {
    pub bytes: usize,
    pub variants: Vec<Variant>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub base: SimConfig,
    /// Everything not varied by the plan (workload parameters, cadence).
    pub template: WorkloadConfig,
    pub workloads: Vec<WorkloadKind>,
    pub variants: Vec<Variant>,
    pub fractions: Vec<f64>,
    pub seeds: Vec<u64>,
    pub llc_override: Option<LlcOverride>,
}

impl ExperimentPlan {
    pub fn new(base: SimConfig, template: WorkloadConfig) -> Self {
        Self {
            base,
            template,
            workloads: Vec::new(),
            variants: Vec::new(),
            fractions: Vec::new(),
            seeds: Vec::new(),
            llc_override: None,
        }
    }

    /// Every run of the plan, ordered by workload, fraction, seed, variant.
    pub fn runs(&self) -> Vec<(SimConfig, WorkloadConfig)> {
        let mut out = Vec::new();
        for &kind in &self.workloads {
            for &fraction in &self.fractions {
                for &seed in &self.seeds {
                    for &variant in &self.variants {
                        let mut cfg = self.base.clone();
                        let mut wl = self.template.clone();
                        wl.kind = kind;
                        wl.variant = variant;
                        wl.ws_fraction = fraction;
                        wl.seed = seed;
                        if let Some(o) = self.llc_override.as_ref().filter(|o| o.variants.contains(&variant)) {
                            wl.ws_base_bytes
                                .get_or_insert(self.base.cache.llc.capacity_bytes as u64);
                            cfg.cache.llc.capacity_bytes = o.bytes;
                        }
                        out.push((cfg, wl));
                    }
                }
            }
        }
        out
    }

    pub fn run(&self) -> Vec<SimReport> {
        self.runs().par_iter().map(|(cfg, wl)| run_workload(cfg, wl)).collect()
    }
}

/// Every run finished and agreed with its oracle.
pub fn all_passed(reports: &[SimReport]) -> bool {
    reports.iter().all(SimReport::passed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::csv_string;

    fn plan() -> ExperimentPlan {
        let mut p = ExperimentPlan::new(SimConfig::scaled(), WorkloadConfig::new(WorkloadKind::Kv, Variant::Fgl));
        p.workloads = vec![WorkloadKind::Kv];
        p.variants = Variant::ALL.to_vec();
        p.fractions = vec![0.25];
        p.seeds = vec![1];
        p.template.keys = Some(256);
        p
    }

    #[test]
    fn kv_plan_rows() {
        let rs = plan().run();
        assert_eq!(rs.len(), 3);
        assert!(all_passed(&rs));
        assert_eq!(csv_string(&rs).unwrap().lines().count(), 4);
    }

    #[test]
    fn empty_plan() {
        let mut p = plan();
        p.workloads.clear();
        let rs = p.run();
        assert!(rs.is_empty() && all_passed(&rs));
        assert_eq!(csv_string(&rs).unwrap().lines().count(), 1);
    }

    #[test]
    fn llc_override_applies_to_listed_variants() {
        let mut p = plan();
        p.llc_override = Some(LlcOverride {
            bytes: 128 << 10,
            variants: vec![Variant::Ccache],
        });
        let runs = p.runs();
        for (cfg, wl) in &runs {
            let want = if wl.variant == Variant::Ccache {
                128 << 10
            } else {
                256 << 10
            };
            assert_eq!(cfg.cache.llc.capacity_bytes, want);
            assert_eq!(wl.ws_bytes(cfg), 64 << 10);
        }
    }
}
