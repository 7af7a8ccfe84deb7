//! Episode traces as line-delimited JSON.
//!
//! A trace opens with a header echoing the resolved run configuration and
//! closes with a summary. The summary is a pure function of the records
//! before it ([`summarize`]), which is what makes [`replay`] possible without
//! re-running the simulator or the judge.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::PointFrd;
use crate::grid::PixelRect;
use crate::judge::{ImageMeta, Stage, VerdictPayload};
use crate::scene::LandingClassification;
use crate::sensor::Pose;
use crate::surface::{CandidateOrigin, Quadrant};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FramePurpose {
    Survey,
    Closeup,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateInfo {
    pub bbox: PixelRect,
    pub crop_rect: PixelRect,
    pub area_px: u64,
    pub origin: CandidateOrigin,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub quadrant: Option<Quadrant>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ReplyOutcome {
    Verdict { payload: VerdictPayload },
    Error { message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RoundAction {
    Descended { altitude: f64 },
    Landed,
    Rejected,
    FallbackMove,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    LandedSafe,
    LandedUnsafe,
    TimeoutForcedLanding,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::LandedSafe => "landed_safe",
            Outcome::LandedUnsafe => "landed_unsafe",
            Outcome::TimeoutForcedLanding => "timeout_forced_landing",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TraceRecord {
    Header {
        schema_version: u32,
        scenario: String,
        seed: u64,
        backend: String,
        launch: Pose,
        config: serde_json::Value,
    },
    Alert {
        tick: u64,
        reason: String,
    },
    Frame {
        round: u32,
        tick: u64,
        purpose: FramePurpose,
        pose: Pose,
        rangefinder: f64,
    },
    Detection {
        round: u32,
        tick: u64,
        grad_threshold: f64,
        fallback: bool,
        candidates: Vec<CandidateInfo>,
        /// Footprint of the marked ground-truth surface in this frame.
        #[serde(skip_serializing_if = "Option::is_none", default)]
        gt_bbox: Option<PixelRect>,
        /// Jaccard index of the top candidate against `gt_bbox`.
        #[serde(skip_serializing_if = "Option::is_none", default)]
        ji_top: Option<f64>,
        /// Candidate covering most of the marked surface.
        #[serde(skip_serializing_if = "Option::is_none", default)]
        gt_candidate: Option<usize>,
    },
    JudgeRequest {
        round: u32,
        tick: u64,
        stage: Stage,
        system_prompt: String,
        user_prompt: String,
        images: Vec<ImageMeta>,
    },
    JudgeReply {
        round: u32,
        tick: u64,
        stage: Stage,
        backend_id: String,
        latency_ms: u64,
        outcome: ReplyOutcome,
        /// Reply text exactly as received, when there was one.
        #[serde(skip_serializing_if = "Option::is_none", default)]
        raw: Option<String>,
        /// Planar ground point at the image centre, for confirmations.
        #[serde(skip_serializing_if = "Option::is_none", default)]
        ground_point: Option<(f64, f64)>,
    },
    Target {
        round: u32,
        tick: u64,
        candidate: usize,
        pixel: (u32, u32),
        point_frd: PointFrd,
        commanded: (f64, f64),
        ground_truth: (f64, f64),
    },
    Move {
        round: u32,
        tick_start: u64,
        tick_end: u64,
        from: Pose,
        to: Pose,
        commanded: (f64, f64),
        fallback: bool,
    },
    Descend {
        round: u32,
        tick_start: u64,
        tick_end: u64,
        from: Pose,
        to: Pose,
        rangefinder: f64,
    },
    RoundEnd {
        round: u32,
        tick: u64,
        action: RoundAction,
        reason: String,
    },
    Touchdown {
        round: u32,
        tick_start: u64,
        tick: u64,
        from: Pose,
        pose: Pose,
        forced: bool,
        classification: LandingClassification,
    },
    Summary(EpisodeSummary),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingTrial {
    pub round: u32,
    pub chosen: Option<usize>,
    pub correct: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundOutcome {
    pub round: u32,
    pub action: RoundAction,
    pub candidates: usize,
    pub fallback: bool,
    pub ranking: Option<Vec<usize>>,
    pub confirmations: Vec<bool>,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub scenario: String,
    pub seed: u64,
    pub backend: String,
    pub outcome: Outcome,
    pub rounds_used: u32,
    pub launch: Pose,
    pub final_pose: Pose,
    pub final_tick: u64,
    pub classification: LandingClassification,
    /// Distance from touchdown to the last chosen target's true ground point.
    pub landing_distance: Option<f64>,
    pub ji: Vec<f64>,
    pub rankings: Vec<RankingTrial>,
    pub rounds: Vec<RoundOutcome>,
    /// Some judge call failed with a transport error.
    pub backend_degraded: bool,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace is empty")]
    Empty,
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("trace schema version {found} is not supported (expected {SCHEMA_VERSION})")]
    SchemaVersion { found: u32 },
    #[error("trace is inconsistent: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Folds records (without a trailing summary) into the episode summary.
pub fn summarize(records: &[TraceRecord]) -> Result<EpisodeSummary, TraceError> {
    let (scenario, seed, backend, launch) = match records.first() {
        Some(TraceRecord::Header {
            scenario,
            seed,
            backend,
            launch,
            ..
        }) => (scenario.clone(), *seed, backend.clone(), *launch),
        _ => {
            return Err(TraceError::Inconsistent(
                "first record is not a header".into(),
            ))
        }
    };
    let mut rounds: Vec<RoundOutcome> = Vec::new();
    let mut current = RoundOutcome {
        round: 0,
        action: RoundAction::Rejected,
        candidates: 0,
        fallback: false,
        ranking: None,
        confirmations: Vec::new(),
        reason: String::new(),
    };
    let mut ji = Vec::new();
    let mut rankings = Vec::new();
    let mut gt_candidate = None;
    let mut last_target: Option<(f64, f64)> = None;
    let mut touchdown = None;
    let mut degraded = false;
    let mut max_round = 0;

    for rec in records {
        match rec {
            TraceRecord::Detection {
                round,
                candidates,
                fallback,
                ji_top,
                gt_candidate: gt,
                ..
            } => {
                current.round = *round;
                current.candidates = candidates.len();
                current.fallback = *fallback;
                ji.extend(ji_top);
                gt_candidate = *gt;
            }
            TraceRecord::JudgeReply { round, outcome, .. } => match outcome {
                ReplyOutcome::Verdict {
                    payload: VerdictPayload::Ranking(r),
                } => {
                    current.ranking = Some(r.clone());
                    if gt_candidate.is_some() {
                        rankings.push(RankingTrial {
                            round: *round,
                            chosen: r.first().copied(),
                            correct: gt_candidate,
                        });
                    }
                }
                ReplyOutcome::Verdict {
                    payload: VerdictPayload::Confirmation(c),
                } => current.confirmations.push(*c),
                ReplyOutcome::Error { message } => {
                    degraded |= message.starts_with("judge backend unavailable");
                }
            },
            TraceRecord::Target { ground_truth, .. } => last_target = Some(*ground_truth),
            TraceRecord::RoundEnd {
                round,
                action,
                reason,
                ..
            } => {
                current.round = *round;
                current.action = *action;
                current.reason = reason.clone();
                max_round = max_round.max(*round);
                rounds.push(std::mem::replace(
                    &mut current,
                    RoundOutcome {
                        round: 0,
                        action: RoundAction::Rejected,
                        candidates: 0,
                        fallback: false,
                        ranking: None,
                        confirmations: Vec::new(),
                        reason: String::new(),
                    },
                ));
                gt_candidate = None;
            }
            TraceRecord::Touchdown {
                tick,
                pose,
                forced,
                classification,
                ..
            } => touchdown = Some((*tick, *pose, *forced, classification.clone())),
            _ => {}
        }
    }
    let (final_tick, final_pose, forced, classification) =
        touchdown.ok_or_else(|| TraceError::Inconsistent("no touchdown record".into()))?;
    let outcome = if forced {
        Outcome::TimeoutForcedLanding
    } else if classification.safe {
        Outcome::LandedSafe
    } else {
        Outcome::LandedUnsafe
    };
    let landing_distance = if forced {
        None
    } else {
        last_target.map(|(n, e)| {
            crate::metrics::landing_distance((n, e), (final_pose.north, final_pose.east))
        })
    };
    Ok(EpisodeSummary {
        scenario,
        seed,
        backend,
        outcome,
        rounds_used: max_round,
        launch,
        final_pose,
        final_tick,
        classification,
        landing_distance,
        ji,
        rankings,
        rounds,
        backend_degraded: degraded,
    })
}

pub fn write_trace(records: &[TraceRecord], mut out: impl Write) -> std::io::Result<()> {
    for rec in records {
        serde_json::to_writer(&mut out, rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn to_jsonl(records: &[TraceRecord]) -> String {
    let mut buf = Vec::new();
    write_trace(records, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

/// Parses a trace, checking the schema version on the header.
pub fn read_trace(input: impl BufRead) -> Result<Vec<TraceRecord>, TraceError> {
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 {
            let v: serde_json::Value =
                serde_json::from_str(&line).map_err(|e| TraceError::Malformed {
                    line: 1,
                    message: e.to_string(),
                })?;
            if let Some(found) = v.get("schema_version").and_then(|s| s.as_u64()) {
                if found != u64::from(SCHEMA_VERSION) {
                    return Err(TraceError::SchemaVersion {
                        found: found as u32,
                    });
                }
            }
        }
        let rec: TraceRecord = serde_json::from_str(&line).map_err(|e| TraceError::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?;
        records.push(rec);
    }
    if records.is_empty() {
        return Err(TraceError::Empty);
    }
    Ok(records)
}

/// Result of replaying a trace.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplayReport {
    pub summary: EpisodeSummary,
    /// The summary stored in the trace equals the recomputed one.
    pub summary_matches: bool,
    /// Consistency problems; empty for a healthy trace.
    pub violations: Vec<String>,
}

impl ReplayReport {
    pub fn is_clean(&self) -> bool {
        self.summary_matches && self.violations.is_empty()
    }
}

fn same_pose(a: &Pose, b: &Pose) -> bool {
    a == b
}

/// Re-derives the summary and checks round ordering, the pose chain and the
/// landing gate (every unforced touchdown follows a confirmation in its round).
pub fn replay(records: &[TraceRecord]) -> Result<ReplayReport, TraceError> {
    let (body, stored) = match records.split_last() {
        Some((TraceRecord::Summary(s), body)) => (body, Some(s)),
        _ => (records, None),
    };
    if !matches!(body.first(), Some(TraceRecord::Header { schema_version, .. }) if *schema_version == SCHEMA_VERSION)
    {
        return Err(TraceError::Inconsistent(
            "trace does not start with a current header".into(),
        ));
    }
    let summary = summarize(body)?;
    let mut violations = Vec::new();
    let TraceRecord::Header { launch, .. } = &body[0] else {
        unreachable!("checked above")
    };
    let mut pose = *launch;
    let mut last_round = 0;
    let mut round_open = false;
    let mut confirmed_in_round = false;
    let mut last_tick = 0;
    for (i, rec) in body.iter().enumerate().skip(1) {
        let line = i + 1;
        let round = match rec {
            TraceRecord::Frame { round, .. }
            | TraceRecord::Detection { round, .. }
            | TraceRecord::JudgeRequest { round, .. }
            | TraceRecord::JudgeReply { round, .. }
            | TraceRecord::Target { round, .. }
            | TraceRecord::Move { round, .. }
            | TraceRecord::Descend { round, .. }
            | TraceRecord::RoundEnd { round, .. }
            | TraceRecord::Touchdown { round, .. } => Some(*round),
            _ => None,
        };
        if let Some(r) = round {
            if !round_open
                && r != last_round + 1
                && !matches!(rec, TraceRecord::Touchdown { forced: true, .. })
            {
                violations.push(format!(
                    "line {line}: round {r} does not follow round {last_round}"
                ));
            }
            if !round_open && r == last_round + 1 {
                round_open = true;
                confirmed_in_round = false;
                last_round = r;
            } else if round_open && r != last_round {
                violations.push(format!(
                    "line {line}: record for round {r} inside round {last_round}"
                ));
            }
        }
        match rec {
            TraceRecord::Frame { pose: p, tick, .. } => {
                if !same_pose(p, &pose) {
                    violations.push(format!(
                        "line {line}: frame pose does not match the vehicle pose"
                    ));
                }
                if *tick < last_tick {
                    violations.push(format!("line {line}: time runs backwards"));
                }
                last_tick = *tick;
            }
            TraceRecord::Move {
                from,
                to,
                tick_start,
                tick_end,
                ..
            }
            | TraceRecord::Descend {
                from,
                to,
                tick_start,
                tick_end,
                ..
            } => {
                if !same_pose(from, &pose) {
                    violations.push(format!(
                        "line {line}: motion does not start at the vehicle pose"
                    ));
                }
                if to.altitude() > from.altitude() {
                    violations.push(format!("line {line}: vehicle climbs"));
                }
                if tick_end < tick_start || *tick_start < last_tick {
                    violations.push(format!("line {line}: motion ticks are out of order"));
                }
                last_tick = *tick_end;
                pose = *to;
            }
            TraceRecord::JudgeReply {
                stage: Stage::Confirmation,
                outcome,
                ..
            } => {
                confirmed_in_round = matches!(
                    outcome,
                    ReplyOutcome::Verdict {
                        payload: VerdictPayload::Confirmation(true)
                    }
                );
            }
            TraceRecord::RoundEnd { round, action, .. } => {
                if *action == RoundAction::Landed && !confirmed_in_round {
                    violations.push(format!(
                        "line {line}: round {round} lands without a confirmation"
                    ));
                }
                round_open = false;
            }
            TraceRecord::Touchdown {
                from,
                pose: p,
                forced,
                round,
                ..
            } => {
                if !same_pose(from, &pose) {
                    violations.push(format!(
                        "line {line}: touchdown does not start at the vehicle pose"
                    ));
                }
                if !forced && !confirmed_in_round {
                    violations.push(format!(
                        "line {line}: landing in round {round} was not confirmed"
                    ));
                }
                if (p.north, p.east) != (pose.north, pose.east) {
                    violations.push(format!("line {line}: touchdown moved horizontally"));
                }
                pose = *p;
            }
            _ => {}
        }
    }
    Ok(ReplayReport {
        summary_matches: stored == Some(&summary),
        summary,
        violations,
    })
}
