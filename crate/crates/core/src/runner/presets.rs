//! Named experiment setups. Each preset expands to one or more runs; sweeps
//! write every run to its own sub-directory.

use crate::engine::ParticipationSchedule;
use crate::partition::{PartitionKind, SizeRounding};

#[derive(Debug, Clone, PartialEq)]
pub struct PresetRun {
    pub label: String,
    pub num_clients: usize,
    pub kind: PartitionKind,
    pub global_epochs: usize,
    pub schedule: Option<ParticipationSchedule>,
}

impl PresetRun {
    pub fn single(
        num_clients: usize,
        kind: PartitionKind,
        global_epochs: usize,
        schedule: Option<ParticipationSchedule>,
    ) -> Self {
        PresetRun {
            label: String::new(),
            num_clients,
            kind,
            global_epochs,
            schedule,
        }
    }

    fn labeled(self, label: impl Into<String>) -> Self {
        PresetRun {
            label: label.into(),
            ..self
        }
    }
}

pub struct Preset {
    pub name: &'static str,
    /// Research questions and experiments the preset reproduces.
    pub covers: &'static [&'static str],
    pub description: &'static str,
    pub runs: fn() -> Vec<PresetRun>,
    /// Use all five sources for the default synthetic corpus.
    pub all_sources: bool,
    pub check_traffic: bool,
}

const EPOCHS: usize = 45;

fn size_var(var_pct: u32) -> PartitionKind {
    PartitionKind::SizeVar {
        var_pct,
        rounding: SizeRounding::Conserve,
    }
}

fn balanced(k: usize) -> PresetRun {
    PresetRun::single(k, PartitionKind::Balanced, EPOCHS, None)
}

fn scaling() -> Vec<PresetRun> {
    [2, 5, 10]
        .into_iter()
        .map(|k| balanced(k).labeled(format!("k{k}")))
        .collect()
}

fn exp1() -> Vec<PresetRun> {
    let schedule =
        ParticipationSchedule::from_phases([(0, 15, vec![1, 2, 3, 4]), (15, 30, vec![5])]);
    vec![PresetRun::single(5, size_var(80), 30, Some(schedule))]
}

fn exp2() -> Vec<PresetRun> {
    let schedule = ParticipationSchedule::from_phases([
        (0, 10, vec![1]),
        (10, 20, vec![1, 2]),
        (20, 30, vec![1, 2, 3]),
        (30, 40, vec![1, 2, 3, 4]),
        (40, 51, vec![1, 2, 3, 4, 5]),
    ]);
    vec![PresetRun::single(
        5,
        PartitionKind::Balanced,
        51,
        Some(schedule),
    )]
}

fn exp3() -> Vec<PresetRun> {
    let handoff =
        ParticipationSchedule::from_phases([(0, 20, vec![2, 3, 4, 5]), (20, 50, vec![1])]);
    let solo = ParticipationSchedule::from_phases([(0, 50, vec![1])]);
    vec![
        PresetRun::single(5, size_var(80), 50, Some(handoff)).labeled("federated"),
        PresetRun::single(5, size_var(80), 50, Some(solo)).labeled("baseline"),
    ]
}

fn var_sweep() -> Vec<PresetRun> {
    [0, 10, 20, 50, 80]
        .into_iter()
        .map(|v| PresetRun::single(5, size_var(v), EPOCHS, None).labeled(format!("var{v}")))
        .collect()
}

fn pl_ratio() -> Vec<PresetRun> {
    let ratios = vec![(10, 90), (30, 70), (50, 50), (70, 30), (50, 50)];
    vec![PresetRun::single(
        5,
        PartitionKind::PlRatio {
            ratios,
            client_size: None,
        },
        EPOCHS,
        None,
    )]
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "rq1-cl",
        covers: &["RQ1"],
        description: "centralized baseline: one client holding the whole corpus",
        runs: || vec![balanced(1)],
        all_sources: false,
        check_traffic: false,
    },
    Preset {
        name: "rq1-k2",
        covers: &["RQ1"],
        description: "FedAvg over 2 balanced clients",
        runs: || vec![balanced(2)],
        all_sources: false,
        check_traffic: false,
    },
    Preset {
        name: "rq1-k5",
        covers: &["RQ1"],
        description: "FedAvg over 5 balanced clients",
        runs: || vec![balanced(5)],
        all_sources: false,
        check_traffic: false,
    },
    Preset {
        name: "rq1-k10",
        covers: &["RQ1"],
        description: "FedAvg over 10 balanced clients",
        runs: || vec![balanced(10)],
        all_sources: false,
        check_traffic: false,
    },
    Preset {
        name: "rq2-scaling",
        covers: &["RQ2"],
        description: "balanced FedAvg with 2, 5 and 10 clients over the same corpus",
        runs: scaling,
        all_sources: false,
        check_traffic: false,
    },
    Preset {
        name: "rq3-overhead",
        covers: &["RQ3"],
        description: "per-client per-epoch traffic for 2, 5 and 10 clients; fails unless constant",
        runs: scaling,
        all_sources: false,
        check_traffic: true,
    },
    Preset {
        name: "exp1",
        covers: &["RQ4", "Exp1"],
        description: "clients 1-4 train for 15 epochs, then client 5 continues alone (var 80)",
        runs: exp1,
        all_sources: false,
        check_traffic: false,
    },
    Preset {
        name: "exp2",
        covers: &["RQ4", "Exp2"],
        description: "clients join one at a time every 10 epochs",
        runs: exp2,
        all_sources: false,
        check_traffic: false,
    },
    Preset {
        name: "exp3",
        covers: &["RQ4", "Exp3"],
        description: "clients 2-5 train for 20 epochs, then client 1 continues alone; plus client 1 solo from scratch",
        runs: exp3,
        all_sources: false,
        check_traffic: false,
    },
    Preset {
        name: "rq5-var-k5",
        covers: &["RQ5"],
        description: "size asymmetry var in {0, 10, 20, 50, 80} over 5 clients",
        runs: var_sweep,
        all_sources: false,
        check_traffic: false,
    },
    Preset {
        name: "rq5-plratio-k5",
        covers: &["RQ5"],
        description: "per-client phishing:legitimate mixes 10:90, 30:70, 50:50, 70:30, 50:50",
        runs: pl_ratio,
        all_sources: false,
        check_traffic: false,
    },
    Preset {
        name: "rq6-persource",
        covers: &["RQ6"],
        description: "five clients, one corpus source each",
        runs: || vec![PresetRun::single(5, PartitionKind::PerSource, EPOCHS, None)],
        all_sources: true,
        check_traffic: false,
    },
];

pub fn find_preset(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.name).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn coverage() {
        let covered: BTreeSet<&str> = PRESETS
            .iter()
            .flat_map(|p| p.covers.iter().copied())
            .collect();
        for want in [
            "RQ1", "RQ2", "RQ3", "RQ4", "RQ5", "RQ6", "Exp1", "Exp2", "Exp3",
        ] {
            assert!(covered.contains(want), "{want} has no preset");
        }
    }

    #[test]
    fn schedules_and_partitions_valid() {
        for p in PRESETS {
            let runs = (p.runs)();
            assert!(!runs.is_empty());
            let labels: BTreeSet<&str> = runs.iter().map(|r| r.label.as_str()).collect();
            assert_eq!(labels.len(), runs.len(), "{}", p.name);
            for r in &runs {
                let schedule = r
                    .schedule
                    .clone()
                    .unwrap_or_else(|| ParticipationSchedule::all(r.num_clients, r.global_epochs));
                schedule.validate(r.num_clients, r.global_epochs).unwrap();
                crate::partition::PartitionSpec::new(r.kind.clone(), r.num_clients)
                    .validate()
                    .unwrap();
            }
        }
    }

    #[test]
    fn experiment_schedules() {
        let e1 = &exp1()[0];
        let s = e1.schedule.as_ref().unwrap();
        assert_eq!(
            s.active(14).unwrap().iter().copied().collect::<Vec<_>>(),
            vec![1, 2, 3, 4]
        );
        assert_eq!(
            s.active(29).unwrap().iter().copied().collect::<Vec<_>>(),
            vec![5]
        );
        let e2 = &exp2()[0];
        let s = e2.schedule.as_ref().unwrap();
        assert_eq!(s.active(9).unwrap().len(), 1);
        assert_eq!(s.active(10).unwrap().len(), 2);
        assert_eq!(s.active(50).unwrap().len(), 5);
        assert_eq!(exp3().len(), 2);
    }
}
