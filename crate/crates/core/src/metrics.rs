//! Detection, landing and batch statistics.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::PixelRect;
use crate::scene::SurfaceClass;
use crate::trace::{EpisodeSummary, Outcome, RankingTrial};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no data to aggregate")]
    EmptyInput,
    #[error("malformed rectangle {0:?}")]
    MalformedRect(PixelRect),
}

/// Intersection over union of two half-open pixel rectangles. Two empty
/// rectangles score 0.
pub fn jaccard(a: &PixelRect, b: &PixelRect) -> Result<f64, MetricsError> {
    for r in [a, b] {
        if !r.is_well_formed() {
            return Err(MetricsError::MalformedRect(*r));
        }
    }
    let inter = a.intersect(b).map_or(0, |r| r.area());
    let union = a.area() + b.area() - inter;
    if union == 0 {
        return Ok(0.0);
    }
    Ok(inter as f64 / union as f64)
}

pub fn landing_distance(target: (f64, f64), touchdown: (f64, f64)) -> f64 {
    (target.0 - touchdown.0).hypot(target.1 - touchdown.1)
}

/// Percentage of rankings whose first choice is the correct candidate.
pub fn judge_success_rate(trials: &[RankingTrial]) -> Result<f64, MetricsError> {
    if trials.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let hits = trials
        .iter()
        .filter(|t| t.correct.is_some() && t.chosen == t.correct)
        .count();
    Ok(100.0 * hits as f64 / trials.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub schema_version: u32,
    pub episodes: usize,
    pub outcomes: BTreeMap<Outcome, usize>,
    /// Episodes per number of rounds used.
    pub rounds_histogram: BTreeMap<u32, usize>,
    /// Episodes per touchdown surface class.
    pub surface_histogram: BTreeMap<SurfaceClass, usize>,
    pub mean_rounds: f64,
    /// Percentage of episodes ending in a safe landing.
    pub safe_rate_pct: f64,
    pub mean_landing_distance: Option<f64>,
    pub max_landing_distance: Option<f64>,
    pub mean_ji: Option<f64>,
    pub judge_success_rate_pct: Option<f64>,
    pub degraded_episodes: usize,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

pub fn aggregate(episodes: &[EpisodeSummary]) -> Result<Aggregate, MetricsError> {
    if episodes.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut outcomes = BTreeMap::new();
    let mut rounds_histogram = BTreeMap::new();
    let mut surface_histogram = BTreeMap::new();
    for e in episodes {
        *surface_histogram
            .entry(e.classification.surface_class)
            .or_insert(0) += 1;
        *outcomes.entry(e.outcome).or_insert(0) += 1;
        *rounds_histogram.entry(e.rounds_used).or_insert(0) += 1;
    }
    let distances: Vec<f64> = episodes.iter().filter_map(|e| e.landing_distance).collect();
    let ji: Vec<f64> = episodes.iter().flat_map(|e| e.ji.iter().copied()).collect();
    let trials: Vec<RankingTrial> = episodes
        .iter()
        .flat_map(|e| e.rankings.iter().cloned())
        .collect();
    let n = episodes.len() as f64;
    Ok(Aggregate {
        schema_version: REPORT_SCHEMA_VERSION,
        episodes: episodes.len(),
        mean_rounds: episodes
            .iter()
            .map(|e| f64::from(e.rounds_used))
            .sum::<f64>()
            / n,
        safe_rate_pct: 100.0 * outcomes.get(&Outcome::LandedSafe).copied().unwrap_or(0) as f64 / n,
        outcomes,
        rounds_histogram,
        surface_histogram,
        mean_landing_distance: mean(&distances),
        max_landing_distance: distances.iter().copied().reduce(f64::max),
        mean_ji: mean(&ji),
        judge_success_rate_pct: judge_success_rate(&trials).ok(),
        degraded_episodes: episodes.iter().filter(|e| e.backend_degraded).count(),
    })
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| format!("{v:.4}"))
}

/// One row per episode.
pub fn episodes_csv(episodes: &[EpisodeSummary]) -> String {
    let mut out = String::from(
        "scenario,seed,backend,outcome,rounds_used,final_tick,final_north,final_east,surface,landing_distance,mean_ji\n",
    );
    for e in episodes {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{:.4},{:.4},{},{},{}",
            e.scenario,
            e.seed,
            e.backend,
            e.outcome.name(),
            e.rounds_used,
            e.final_tick,
            e.final_pose.north,
            e.final_pose.east,
            e.classification.surface_class,
            opt(e.landing_distance),
            opt(mean(&e.ji)),
        );
    }
    out
}

/// Launch-to-touchdown vectors, one per episode, for plotting.
pub fn arrows_csv(episodes: &[EpisodeSummary]) -> String {
    let mut out = String::from("seed,launch_north,launch_east,final_north,final_east,outcome\n");
    for e in episodes {
        let _ = writeln!(
            out,
            "{},{:.4},{:.4},{:.4},{:.4},{}",
            e.seed,
            e.launch.north,
            e.launch.east,
            e.final_pose.north,
            e.final_pose.east,
            e.outcome.name()
        );
    }
    out
}

pub fn summary_text(agg: &Aggregate) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "episodes: {}", agg.episodes);
    for (outcome, count) in &agg.outcomes {
        let _ = writeln!(out, "  {:<24} {count}", outcome.name());
    }
    let _ = writeln!(out, "safe landings: {:.1}%", agg.safe_rate_pct);
    let _ = writeln!(out, "mean rounds: {:.2}", agg.mean_rounds);
    let _ = writeln!(out, "rounds histogram:");
    for (rounds, count) in &agg.rounds_histogram {
        let _ = writeln!(out, "  {rounds:>3} {count}");
    }
    let show = |x: Option<f64>| x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}"));
    let _ = writeln!(out, "touchdown surfaces:");
    for (class, count) in &agg.surface_histogram {
        let _ = writeln!(out, "  {:<24} {count}", class.name());
    }
    let _ = writeln!(
        out,
        "mean landing distance (m): {}",
        show(agg.mean_landing_distance)
    );
    let _ = writeln!(
        out,
        "max landing distance (m): {}",
        show(agg.max_landing_distance)
    );
    let _ = writeln!(out, "mean top-candidate JI: {}", show(agg.mean_ji));
    let _ = writeln!(
        out,
        "judge success rate (%): {}",
        show(agg.judge_success_rate_pct)
    );
    let _ = writeln!(
        out,
        "episodes with backend errors: {}",
        agg.degraded_episodes
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rect(u0: u32, v0: u32, u1: u32, v1: u32) -> PixelRect {
        PixelRect::new(u0, v0, u1, v1)
    }

    #[test]
    fn jaccard_examples() {
        assert_eq!(
            jaccard(&rect(0, 0, 10, 10), &rect(0, 0, 10, 10)).unwrap(),
            1.0
        );
        assert_eq!(
            jaccard(&rect(0, 0, 10, 10), &rect(10, 0, 20, 10)).unwrap(),
            0.0
        );
        assert!(
            (jaccard(&rect(0, 0, 10, 10), &rect(5, 0, 15, 10)).unwrap() - 50.0 / 150.0).abs()
                < 1e-12
        );
        assert_eq!(jaccard(&rect(3, 3, 3, 3), &rect(4, 4, 4, 4)).unwrap(), 0.0);
    }

    #[test]
    fn jaccard_rejects_inverted_rects() {
        let bad = PixelRect {
            u_min: 5,
            v_min: 0,
            u_max: 2,
            v_max: 4,
        };
        assert_eq!(
            jaccard(&bad, &rect(0, 0, 1, 1)),
            Err(MetricsError::MalformedRect(bad))
        );
    }

    #[test]
    fn success_rate() {
        let t = |chosen, correct| RankingTrial {
            round: 1,
            chosen,
            correct,
        };
        assert_eq!(judge_success_rate(&[]), Err(MetricsError::EmptyInput));
        let r = judge_success_rate(&[
            t(Some(0), Some(0)),
            t(Some(1), Some(0)),
            t(None, Some(2)),
            t(Some(2), Some(2)),
        ])
        .unwrap();
        assert_eq!(r, 50.0);
        let mut twenty: Vec<RankingTrial> = (0..20).map(|_| t(Some(1), Some(0))).collect();
        for trial in twenty.iter_mut().take(4) {
            trial.chosen = Some(0);
        }
        assert_eq!(judge_success_rate(&twenty).unwrap(), 20.0);
    }

    #[test]
    fn landing_distance_is_planar_euclidean() {
        assert_eq!(landing_distance((0.0, 0.0), (3.0, 4.0)), 5.0);
    }

    fn summary(seed: u64, outcome: Outcome, rounds: u32, class: SurfaceClass) -> EpisodeSummary {
        use crate::scene::LandingClassification;
        use crate::sensor::Pose;
        let safe = outcome == Outcome::LandedSafe;
        EpisodeSummary {
            scenario: "s".into(),
            seed,
            backend: "oracle".into(),
            outcome,
            rounds_used: rounds,
            launch: Pose::new(0.0, 0.0, 40.0, 0.0),
            final_pose: Pose::new(1.0, 1.0, 0.0, 0.0),
            final_tick: 10,
            classification: LandingClassification {
                surface_class: class,
                safe,
                flat: true,
                hazard_free: true,
                agent_free: true,
                benign_surface: safe,
                elevation_spread: 0.0,
            },
            landing_distance: safe.then_some(0.5),
            ji: vec![0.9],
            rankings: Vec::new(),
            rounds: Vec::new(),
            backend_degraded: false,
        }
    }

    #[test]
    fn fifteen_of_twenty_is_seventy_five_percent() {
        let eps: Vec<_> = (0..20)
            .map(|i| {
                if i < 15 {
                    summary(i, Outcome::LandedSafe, 2, SurfaceClass::Rooftop)
                } else {
                    summary(i, Outcome::TimeoutForcedLanding, 10, SurfaceClass::Road)
                }
            })
            .collect();
        let agg = aggregate(&eps).unwrap();
        assert_eq!(agg.safe_rate_pct, 75.0);
        assert_eq!(agg.rounds_histogram[&2], 15);
        assert_eq!(agg.surface_histogram[&SurfaceClass::Road], 5);
        assert_eq!(aggregate(&[]), Err(MetricsError::EmptyInput));
    }

    #[test]
    fn reaggregating_the_report_rows_is_stable() {
        let eps: Vec<_> = (0..6)
            .map(|i| {
                summary(
                    i,
                    Outcome::LandedSafe,
                    2 + i as u32 % 3,
                    SurfaceClass::Ground,
                )
            })
            .collect();
        let agg = aggregate(&eps).unwrap();
        let json = serde_json::to_string(&agg).unwrap();
        let back: Aggregate = serde_json::from_str(&json).unwrap();
        assert_eq!(back, agg);
        assert_eq!(aggregate(&eps).unwrap(), agg);
        assert_eq!(agg.mean_rounds, 3.0);
    }

    fn arb_rect() -> impl Strategy<Value = PixelRect> {
        (0u32..50, 0u32..50, 0u32..30, 0u32..30).prop_map(|(u, v, w, h)| rect(u, v, u + w, v + h))
    }

    fn pixel_count_oracle(a: &PixelRect, b: &PixelRect) -> f64 {
        let (mut inter, mut union) = (0u64, 0u64);
        for v in 0..80 {
            for u in 0..80 {
                let (x, y) = (a.contains(u, v), b.contains(u, v));
                inter += u64::from(x && y);
                union += u64::from(x || y);
            }
        }
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    proptest! {
        #[test]
        fn jaccard_matches_pixel_counting(a in arb_rect(), b in arb_rect()) {
            let j = jaccard(&a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&j));
            prop_assert!((j - jaccard(&b, &a).unwrap()).abs() < 1e-15);
            prop_assert!((j - pixel_count_oracle(&a, &b)).abs() < 1e-12);
            if !a.is_empty() {
                prop_assert_eq!(jaccard(&a, &a).unwrap(), 1.0);
            }
        }

        #[test]
        fn landing_distance_is_a_metric(p in (-50.0f64..50.0, -50.0f64..50.0), q in (-50.0f64..50.0, -50.0f64..50.0), r in (-50.0f64..50.0, -50.0f64..50.0)) {
            prop_assert!(landing_distance(p, q) >= 0.0);
            prop_assert_eq!(landing_distance(p, q), landing_distance(q, p));
            prop_assert!(landing_distance(p, r) <= landing_distance(p, q) + landing_distance(q, r) + 1e-9);
        }

        #[test]
        fn histograms_count_every_episode(outcomes in proptest::collection::vec((0u8..3, 1u32..=10), 1..40)) {
            let eps: Vec<_> = outcomes
                .iter()
                .enumerate()
                .map(|(i, &(o, rounds))| {
                    let outcome = [Outcome::LandedSafe, Outcome::LandedUnsafe, Outcome::TimeoutForcedLanding][o as usize];
                    summary(i as u64, outcome, rounds, SurfaceClass::ALL[o as usize])
                })
                .collect();
            let agg = aggregate(&eps).unwrap();
            prop_assert_eq!(agg.outcomes.values().sum::<usize>(), eps.len());
            prop_assert_eq!(agg.rounds_histogram.values().sum::<usize>(), eps.len());
            prop_assert_eq!(agg.surface_histogram.values().sum::<usize>(), eps.len());
        }
    }
}
