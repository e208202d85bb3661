//! The two reference sweeps and their ordinal pass/fail checks.

use serde::{Deserialize, Serialize};

use super::chart::bar_chart_svg;
use super::experiment::{CellSpec, ExperimentResults, ExperimentSpec};
use super::train::Method;
use crate::beacons::{Placement, ABLATION_SIGMAS};
use crate::worlds::EnvKind;

pub const FIG3_REPS: usize = 20;
pub const FIG4_REPS: usize = 15;
pub const NUM_DEMOS: usize = 10;
/// Relative slack (of the reference mean) allowed between adjacent levels.
pub const TIE_TOLERANCE: f64 = 0.02;
/// Fraction of paired repetitions RECON-P must win against the baseline.
pub const WIN_FRACTION: f64 = 0.75;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Figure {
    Fig3,
    Fig4,
}

impl std::str::FromStr for Figure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fig3" => Ok(Figure::Fig3),
            "fig4" => Ok(Figure::Fig4),
            _ => Err(format!("unknown figure {s:?} (expected fig3 or fig4)")),
        }
    }
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
        }
    }

    pub fn default_reps(self) -> usize {
        match self {
            Figure::Fig3 => FIG3_REPS,
            Figure::Fig4 => FIG4_REPS,
        }
    }

    /// Full-budget spec; `smoke` shrinks training and evaluation so a run
    /// finishes in well under a few minutes.
    pub fn spec(self, reps: usize, base_seed: u64, smoke: bool) -> ExperimentSpec {
        let mut spec = match self {
            Figure::Fig3 => fig3_spec(reps, base_seed),
            Figure::Fig4 => fig4_spec(reps, base_seed),
        };
        if smoke {
            spec.budget.epochs = match self {
                Figure::Fig3 => 200,
                Figure::Fig4 => 10,
            };
            spec.eval_configs = 20;
            spec.play_samples = 100;
        }
        spec
    }

    pub fn check(self, results: &ExperimentResults) -> Vec<CriterionCheck> {
        match self {
            Figure::Fig3 => check_fig3(results),
            Figure::Fig4 => check_fig4(results),
        }
    }

    /// `(file stem, svg)` pairs for the figure's charts.
    pub fn charts(self, results: &ExperimentResults) -> Vec<(String, String)> {
        let all: Vec<usize> = (0..results.spec.cells.len()).collect();
        match self {
            Figure::Fig3 => vec![(
                "fig3".into(),
                bar_chart_svg(
                    "Static 2D: final distance to target (lower is better)",
                    "final distance",
                    &results.bars(&all),
                ),
            )],
            Figure::Fig4 => {
                let noisy = |c: &CellSpec| c.method != Method::Baseline && c.sigma > 0.0;
                let placements: Vec<usize> = all.iter().copied().filter(|&i| !noisy(&results.spec.cells[i])).collect();
                let noise: Vec<usize> = all
                    .iter()
                    .copied()
                    .filter(|&i| {
                        let c = &results.spec.cells[i];
                        c.method == Method::Baseline || c.placement == Placement::Exact
                    })
                    .collect();
                vec![
                    (
                        "fig4_placement".into(),
                        bar_chart_svg(
                            "Dynamic 2D: reward by beacon placement (higher is better)",
                            "reward",
                            &results.bars(&placements),
                        ),
                    ),
                    (
                        "fig4_noise".into(),
                        bar_chart_svg(
                            "Dynamic 2D: reward of Exact beacons under noise",
                            "reward",
                            &results.bars(&noise),
                        ),
                    ),
                ]
            }
        }
    }
}

/// Baseline plus RECON-P and RECON-D with and without play data on the
/// static world.
pub fn fig3_spec(reps: usize, base_seed: u64) -> ExperimentSpec {
    let mut spec = ExperimentSpec::new("fig3", EnvKind::Static2d);
    spec.reps = reps;
    spec.base_seed = base_seed;
    spec.cells = vec![CellSpec::baseline(NUM_DEMOS)];
    for method in [Method::ReconP, Method::ReconD] {
        for play in [false, true] {
            spec.cells.push(CellSpec::recon(method, play, Placement::Exact, 0.0, NUM_DEMOS));
        }
    }
    spec
}

/// Baseline, every placement scheme, and noisy Exact beacons on the
/// dynamic world, all with position beacons and no play data.
pub fn fig4_spec(reps: usize, base_seed: u64) -> ExperimentSpec {
    let mut spec = ExperimentSpec::new("fig4", EnvKind::Dynamic2d);
    spec.reps = reps;
    spec.base_seed = base_seed;
    spec.cells = vec![CellSpec::baseline(NUM_DEMOS)];
    for placement in Placement::ALL {
        spec.cells.push(CellSpec::recon(Method::ReconP, false, placement, 0.0, NUM_DEMOS));
    }
    for sigma in ABLATION_SIGMAS {
        spec.cells.push(CellSpec::recon(Method::ReconP, false, Placement::Exact, sigma, NUM_DEMOS));
    }
    spec
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionCheck {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CriterionCheck {
    pub fn line(&self) -> String {
        format!(
            "{} criterion {}: {} ({})",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail
        )
    }
}

fn mean_of(results: &ExperimentResults, pred: impl Fn(&CellSpec) -> bool) -> Option<(usize, f64)> {
    let cell = results.find_cell(pred)?;
    let s = results.cell_summary(cell);
    s.mean.is_finite().then_some((cell, s.mean))
}

fn beacon_free_check(results: &ExperimentResults) -> CriterionCheck {
    let calls = results.total_eval_beacon_calls();
    let evaluated = results.runs.iter().filter(|r| r.is_ok()).count();
    CriterionCheck {
        id: 7,
        name: format!("beacon-free evaluation ({})", results.spec.name),
        passed: calls == 0 && evaluated > 0,
        detail: format!("{calls} beacon measurements across {evaluated} evaluated runs"),
    }
}

fn is_cell(method: Method, play: bool) -> impl Fn(&CellSpec) -> bool {
    move |c| c.method == method && c.play == play && c.sigma == 0.0
}

pub fn check_fig3(results: &ExperimentResults) -> Vec<CriterionCheck> {
    let base = mean_of(results, is_cell(Method::Baseline, false));
    let p_noplay = mean_of(results, is_cell(Method::ReconP, false));
    let d_play = mean_of(results, is_cell(Method::ReconD, true));

    let c1 = match (base, p_noplay) {
        (Some((bc, bm)), Some((pc, pm))) => {
            let b = results.paired_values(bc);
            let p = results.paired_values(pc);
            let wins = b
                .iter()
                .zip(&p)
                .filter(|(b, p)| matches!((b, p), (Some(b), Some(p)) if p < b))
                .count();
            let needed = (WIN_FRACTION * results.spec.reps as f64).ceil() as usize;
            CriterionCheck {
                id: 1,
                name: "RECON-P (no play) beats the baseline on static 2D".into(),
                passed: wins >= needed && pm < bm,
                detail: format!(
                    "wins {wins}/{} (need {needed}); mean {pm:.4} vs baseline {bm:.4}",
                    results.spec.reps
                ),
            }
        }
        _ => missing(1, "RECON-P (no play) beats the baseline on static 2D"),
    };
    let c2 = match (base, d_play) {
        (Some((_, bm)), Some((_, dm))) => CriterionCheck {
            id: 2,
            name: "RECON-D with play data beats the baseline".into(),
            passed: dm < bm,
            detail: format!("mean {dm:.4} vs baseline {bm:.4}"),
        },
        _ => missing(2, "RECON-D with play data beats the baseline"),
    };
    vec![c1, c2, beacon_free_check(results)]
}

fn missing(id: u32, name: &str) -> CriterionCheck {
    CriterionCheck {
        id,
        name: name.into(),
        passed: false,
        detail: "required cells are missing or failed".into(),
    }
}

/// `a > b`, or a tie within `TIE_TOLERANCE * reference`.
fn above(a: f64, b: f64, reference: f64) -> bool {
    a > b - TIE_TOLERANCE * reference.abs()
}

pub fn check_fig4(results: &ExperimentResults) -> Vec<CriterionCheck> {
    let placement = |p: Placement, sigma: f32| {
        move |c: &CellSpec| c.method == Method::ReconP && !c.play && c.placement == p && c.sigma == sigma
    };
    let base = mean_of(results, is_cell(Method::Baseline, false)).map(|x| x.1);
    let exact = mean_of(results, placement(Placement::Exact, 0.0)).map(|x| x.1);
    let partial = mean_of(results, placement(Placement::Partial, 0.0)).map(|x| x.1);
    let other = mean_of(results, placement(Placement::Other, 0.0)).map(|x| x.1);
    let random = mean_of(results, placement(Placement::Random, 0.0)).map(|x| x.1);

    let c3 = match (exact, partial, other, base, random) {
        (Some(e), Some(p), Some(o), Some(b), Some(r)) => {
            let pairs = [
                ("exact>partial", e, p),
                ("exact>other", e, o),
                ("partial>baseline", p, b),
                ("other>baseline", o, b),
                ("baseline>random", b, r),
            ];
            let failed: Vec<&str> = pairs.iter().filter(|(_, a, b)| !above(*a, *b, e)).map(|x| x.0).collect();
            CriterionCheck {
                id: 3,
                name: "placement ordering exact > {partial, other} > baseline > random".into(),
                passed: failed.is_empty(),
                detail: format!(
                    "exact {e:.4}, partial {p:.4}, other {o:.4}, baseline {b:.4}, random {r:.4}{}",
                    if failed.is_empty() { String::new() } else { format!("; violated: {}", failed.join(", ")) }
                ),
            }
        }
        _ => missing(3, "placement ordering exact > {partial, other} > baseline > random"),
    };

    let levels: Vec<Option<f64>> = std::iter::once(0.0)
        .chain(ABLATION_SIGMAS)
        .map(|s| mean_of(results, placement(Placement::Exact, s)).map(|x| x.1))
        .collect();
    let c4 = match (levels.iter().copied().collect::<Option<Vec<f64>>>(), base) {
        (Some(levels), Some(b)) => {
            let monotone = levels.windows(2).all(|w| w[1] <= w[0] + TIE_TOLERANCE * w[0].abs());
            let beats = levels[1] > b;
            let shown: Vec<String> = levels.iter().map(|v| format!("{v:.4}")).collect();
            CriterionCheck {
                id: 4,
                name: "reward non-increasing in noise; exact at sigma 2.5 beats the baseline".into(),
                passed: monotone && beats,
                detail: format!(
                    "sigma 0/2.5/4.5/6.5: {}; baseline {b:.4}; monotone {monotone}, beats baseline {beats}",
                    shown.join("/")
                ),
            }
        }
        _ => missing(4, "reward non-increasing in noise; exact at sigma 2.5 beats the baseline"),
    };
    vec![c3, c4, beacon_free_check(results)]
}
