//! Closed-loop recovery: observe, rank, approach, confirm and descend.
//!
//! Each round starts with a survey frame. Candidates are ranked by the judge
//! and the vehicle flies to the ground point under the winner's box centre.
//! It then alternates close-up confirmations with descents to `k` times the
//! measured range. A confirmation at or below the landing threshold lands the
//! vehicle; reaching the threshold by descending ends the round so the next
//! one re-surveys from low altitude. Any rejection or judge failure ends the
//! round in place. When the round budget runs out the vehicle lands straight
//! down wherever it is.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{build_table, frd_to_ned, lookup};
use crate::judge::{
    build_confirmation_request, build_ranking_request, JudgeBackend, JudgeContext, JudgeError,
    JudgeRequest, JudgeVerdict,
};
use crate::metrics::jaccard;
use crate::scene::{
    classify_touchdown, CellIndex, LandingClassification, SceneError, SceneModel,
    DEFAULT_CLEARANCE_RADIUS_M,
};
use crate::sensor::{render_frame, Face, Pose, SensorFrame, SensorRig};
use crate::surface::{
    closeup, detect, quadrant_fallback, CandidateOrigin, CandidateSurface, Detection,
    DetectorConfig, Quadrant, SurfaceError,
};
use crate::trace::{
    summarize, CandidateInfo, EpisodeSummary, FramePurpose, ReplyOutcome, RoundAction, TraceError,
    TraceRecord, SCHEMA_VERSION,
};

/// Scene marker naming a cell of the roof a correct judge should pick.
pub const GROUND_TRUTH_MARKER: &str = "ground_truth";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    /// Descent factor: each confirmed descent goes to `k` times the range.
    pub k: f64,
    pub max_rounds: u32,
    /// Range at or below which a confirmation lands the vehicle.
    pub landing_threshold_m: f64,
    /// Metres per tick.
    pub horizontal_speed: f64,
    pub vertical_speed: f64,
    /// Ticks each judge call takes.
    pub judge_ticks: u64,
    /// Standard deviation of positioning error per horizontal axis.
    pub position_noise_m: f64,
    pub clearance_radius_m: f64,
    /// Required height above terrain along a horizontal transit.
    pub obstacle_margin_m: f64,
    /// After an empty ranking, rank the quadrants and drift toward the best.
    pub explore_on_empty: bool,
    pub detector: DetectorConfig,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            k: 0.5,
            max_rounds: 10,
            landing_threshold_m: 5.0,
            horizontal_speed: 5.0,
            vertical_speed: 5.0,
            judge_ticks: 1,
            position_noise_m: 0.2,
            clearance_radius_m: DEFAULT_CLEARANCE_RADIUS_M,
            obstacle_margin_m: 2.0,
            explore_on_empty: false,
            detector: DetectorConfig::default(),
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlannerError> {
        let bad = |m: &str| Err(PlannerError::InvalidConfig(m.to_string()));
        if !(self.k > 0.0 && self.k < 1.0) {
            return bad("k must lie strictly between 0 and 1");
        }
        if self.max_rounds == 0 {
            return bad("max_rounds must be positive");
        }
        if !(self.landing_threshold_m > 0.0) {
            return bad("landing threshold must be positive");
        }
        if !(self.horizontal_speed > 0.0 && self.vertical_speed > 0.0) {
            return bad("speeds must be positive");
        }
        if !(self.position_noise_m >= 0.0)
            || !(self.clearance_radius_m >= 0.0)
            || !(self.obstacle_margin_m >= 0.0)
        {
            return bad("noise, clearance and margin must be non-negative");
        }
        if !(self.detector.grad_threshold > 0.0) || !(self.detector.min_area_fraction >= 0.0) {
            return bad("detector threshold must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DescendAction {
    LandNow,
    /// Descend until the range reads this value.
    DescendTo(f64),
}

/// Next vertical step from a confirmed position at `rangefinder` metres.
pub fn descend_step(
    rangefinder: f64,
    k: f64,
    threshold: f64,
) -> Result<DescendAction, PlannerError> {
    if !(rangefinder.is_finite() && rangefinder > 0.0) {
        return Err(PlannerError::InvalidConfig(format!(
            "range {rangefinder} is not positive"
        )));
    }
    if !(k > 0.0 && k < 1.0) {
        return Err(PlannerError::InvalidConfig(format!(
            "descent factor {k} is not in (0, 1)"
        )));
    }
    Ok(if rangefinder <= threshold {
        DescendAction::LandNow
    } else {
        DescendAction::DescendTo(k * rangefinder)
    })
}

/// Per-episode identity written to the trace header.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeSpec {
    pub scenario: String,
    pub seed: u64,
    pub alert: String,
    pub config: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeResult {
    pub summary: EpisodeSummary,
    /// Full trace, ending with the summary record.
    pub records: Vec<TraceRecord>,
}

impl EpisodeResult {
    pub fn touchdown(&self) -> Option<(&Pose, &LandingClassification)> {
        self.records.iter().rev().find_map(|r| match r {
            TraceRecord::Touchdown {
                pose,
                classification,
                ..
            } => Some((pose, classification)),
            _ => None,
        })
    }
}

struct Episode<'a> {
    scene: &'a SceneModel,
    rig: &'a SensorRig,
    cfg: &'a PlannerConfig,
    judge: &'a mut dyn JudgeBackend,
    pose: Pose,
    tick: u64,
    rng: ChaCha8Rng,
    records: Vec<TraceRecord>,
    gt_cells: BTreeSet<CellIndex>,
}

fn ticks_for(distance: f64, speed: f64) -> u64 {
    (distance / speed).ceil().max(0.0) as u64
}

impl Episode<'_> {
    fn observe(&mut self, round: u32, purpose: FramePurpose) -> Result<SensorFrame, PlannerError> {
        let frame = render_frame(self.scene, &self.pose, self.rig, self.tick)?;
        self.records.push(TraceRecord::Frame {
            round,
            tick: self.tick,
            purpose,
            pose: self.pose,
            rangefinder: frame.rangefinder,
        });
        Ok(frame)
    }

    fn record_detection(&mut self, round: u32, frame: &SensorFrame, det: &Detection) {
        let gt_bbox = (!self.gt_cells.is_empty())
            .then(|| frame.footprint_bbox(&self.gt_cells))
            .flatten();
        let (mut ji_top, mut gt_candidate) = (None, None);
        if let (Some(gt), false) = (gt_bbox, det.fallback) {
            ji_top = det
                .candidates
                .first()
                .and_then(|c| jaccard(&c.bbox, &gt).ok());
            let hits: Vec<usize> = det
                .candidates
                .iter()
                .map(|c| {
                    c.pixels()
                        .filter(|&(u, v)| {
                            let px = frame.raster.get(u as usize, v as usize);
                            px.face == Face::Top
                                && px.cell.is_some_and(|cell| self.gt_cells.contains(&cell))
                        })
                        .count()
                })
                .collect();
            gt_candidate = (0..hits.len())
                .filter(|&i| hits[i] > 0)
                .max_by_key(|&i| (hits[i], usize::MAX - i));
        }
        self.records.push(TraceRecord::Detection {
            round,
            tick: frame.tick,
            grad_threshold: det.threshold,
            fallback: det.fallback,
            candidates: det
                .candidates
                .iter()
                .map(|c| CandidateInfo {
                    bbox: c.bbox,
                    crop_rect: c.crop_rect,
                    area_px: c.area_px,
                    origin: c.origin,
                    quadrant: c.quadrant,
                })
                .collect(),
            gt_bbox,
            ji_top,
            gt_candidate,
        });
    }

    fn ask(
        &mut self,
        round: u32,
        request: JudgeRequest,
        frame: &SensorFrame,
        candidates: &[CandidateSurface],
        ground_point: Option<(f64, f64)>,
    ) -> Result<JudgeVerdict, JudgeError> {
        self.records.push(TraceRecord::JudgeRequest {
            round,
            tick: self.tick,
            stage: request.stage,
            system_prompt: request.system_prompt.clone(),
            user_prompt: request.user_prompt.clone(),
            images: request.image_meta(),
        });
        let ctx = JudgeContext {
            scene: self.scene,
            frame,
            tick: frame.tick,
            candidates,
            clearance_radius: self.cfg.clearance_radius_m,
        };
        let result = self.judge.judge(&request, &ctx);
        self.tick += self.cfg.judge_ticks;
        let (outcome, raw, latency_ms) = match &result {
            Ok(v) => (
                ReplyOutcome::Verdict {
                    payload: v.payload.clone(),
                },
                Some(v.rationale.clone()),
                v.latency_ms,
            ),
            Err(e) => (
                ReplyOutcome::Error {
                    message: e.to_string(),
                },
                match e {
                    JudgeError::Parse(p) => Some(p.raw.clone()),
                    _ => None,
                },
                0,
            ),
        };
        self.records.push(TraceRecord::JudgeReply {
            round,
            tick: self.tick,
            stage: request.stage,
            backend_id: self.judge.id(),
            latency_ms,
            outcome,
            raw,
            ground_point,
        });
        result
    }

    fn end(&mut self, round: u32, action: RoundAction, reason: impl Into<String>) -> bool {
        let reason = reason.into();
        log::debug!("round {round}: {action:?} ({reason})");
        self.records.push(TraceRecord::RoundEnd {
            round,
            tick: self.tick,
            action,
            reason,
        });
        action == RoundAction::Landed
    }

    /// Highest terrain along the straight segment between two planar points.
    fn terrain_along(&self, from: (f64, f64), to: (f64, f64)) -> f64 {
        let len = (to.0 - from.0).hypot(to.1 - from.1);
        let steps = (len / (self.scene.cell_size * 0.5)).ceil().max(1.0) as u32;
        (0..=steps)
            .filter_map(|i| {
                let t = f64::from(i) / f64::from(steps);
                let (n, e) = (from.0 + t * (to.0 - from.0), from.1 + t * (to.1 - from.1));
                self.scene
                    .cell_at(n, e)
                    .map(|c| self.scene.cell(c).elevation)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn clamp_to_map(&self, (n, e): (f64, f64)) -> (f64, f64) {
        let b = self.scene.bounds();
        let eps = 1e-6;
        (
            n.clamp(b.north_min, b.north_max - eps),
            e.clamp(b.east_min, b.east_max - eps),
        )
    }

    fn fly_to(&mut self, round: u32, commanded: (f64, f64), fallback: bool) {
        let from = self.pose;
        let dist = (commanded.0 - from.north).hypot(commanded.1 - from.east);
        let noise = self.cfg.position_noise_m;
        let dn: f64 = StandardNormal.sample(&mut self.rng);
        let de: f64 = StandardNormal.sample(&mut self.rng);
        let (n, e) = self.clamp_to_map((commanded.0 + noise * dn, commanded.1 + noise * de));
        let tick_start = self.tick;
        self.tick += ticks_for(dist, self.cfg.horizontal_speed);
        self.pose = Pose {
            north: n,
            east: e,
            ..from
        };
        self.records.push(TraceRecord::Move {
            round,
            tick_start,
            tick_end: self.tick,
            from,
            to: self.pose,
            commanded,
            fallback,
        });
    }

    fn obstructed(&self, to: (f64, f64)) -> bool {
        self.terrain_along((self.pose.north, self.pose.east), to) + self.cfg.obstacle_margin_m
            >= self.pose.altitude()
    }

    fn touchdown(
        &mut self,
        round: u32,
        forced: bool,
    ) -> Result<LandingClassification, PlannerError> {
        let from = self.pose;
        let cell = self
            .scene
            .cell_at(from.north, from.east)
            .ok_or(SceneError::OutOfBounds {
                north: from.north,
                east: from.east,
            })?;
        let ground = self.scene.cell(cell).elevation;
        let tick_start = self.tick;
        self.tick += ticks_for(from.altitude() - ground, self.cfg.vertical_speed).max(1);
        self.pose = from.with_altitude(ground);
        let classification = classify_touchdown(
            self.scene,
            from.north,
            from.east,
            self.tick,
            self.cfg.clearance_radius_m,
        )?;
        self.records.push(TraceRecord::Touchdown {
            round,
            tick_start,
            tick: self.tick,
            from,
            pose: self.pose,
            forced,
            classification: classification.clone(),
        });
        Ok(classification)
    }

    /// Drifts half a footprint toward the centre of `quadrant`.
    fn explore(&mut self, round: u32, frame: &SensorFrame, cand: &CandidateSurface) -> bool {
        let k = &frame.intrinsics;
        let (u, v) = cand.bbox.center_pixel();
        let (du, dv) = (f64::from(u) + 0.5 - k.cx, f64::from(v) + 0.5 - k.cy);
        let norm = du.hypot(dv);
        let quadrant = cand.quadrant.map_or("?", |q| match q {
            Quadrant::Nw => "NW",
            Quadrant::Ne => "NE",
            Quadrant::Sw => "SW",
            Quadrant::Se => "SE",
        });
        if norm == 0.0 {
            return self.end(round, RoundAction::Rejected, "quadrant has no direction");
        }
        let step = 0.5 * k.footprint_m(frame.rangefinder);
        let dir = crate::geometry::PointFrd {
            x: dv / norm * step,
            y: du / norm * step,
            z: 0.0,
        };
        let (dn, de) = frd_to_ned(&dir, self.pose.yaw);
        let target = self.clamp_to_map((self.pose.north + dn, self.pose.east + de));
        if self.obstructed(target) {
            return self.end(
                round,
                RoundAction::Rejected,
                format!("path toward {quadrant} is obstructed"),
            );
        }
        self.fly_to(round, target, true);
        self.end(
            round,
            RoundAction::FallbackMove,
            format!("no flat surface found; moved toward {quadrant}"),
        )
    }

    fn round(&mut self, round: u32) -> Result<bool, PlannerError> {
        let frame = self.observe(round, FramePurpose::Survey)?;
        let det = detect(&frame, &self.cfg.detector)?;
        self.record_detection(round, &frame, &det);
        let verdict = build_ranking_request(&det.candidates, round)
            .and_then(|req| self.ask(round, req, &frame, &det.candidates, None));
        let ranking = match verdict {
            Ok(v) => match v.ranking() {
                Some(r) => r.to_vec(),
                None => {
                    return Ok(self.end(
                        round,
                        RoundAction::Rejected,
                        "judge answered the wrong question",
                    ))
                }
            },
            Err(e) => {
                return Ok(self.end(round, RoundAction::Rejected, format!("ranking failed: {e}")))
            }
        };
        let Some(&best) = ranking.first() else {
            if self.cfg.explore_on_empty && !det.fallback {
                let quads = quadrant_fallback(&frame, self.cfg.detector.context);
                let verdict = build_ranking_request(&quads, round)
                    .and_then(|req| self.ask(round, req, &frame, &quads, None));
                if let Some(&q) = verdict
                    .ok()
                    .as_ref()
                    .and_then(|v| v.ranking())
                    .and_then(|r| r.first())
                {
                    return Ok(self.explore(round, &frame, &quads[q]));
                }
            }
            return Ok(self.end(
                round,
                RoundAction::Rejected,
                "no candidate judged acceptable",
            ));
        };
        let chosen = &det.candidates[best];
        if chosen.origin == CandidateOrigin::QuadrantFallback {
            return Ok(self.explore(round, &frame, chosen));
        }
        self.approach(round, &frame, best, chosen)
    }

    fn approach(
        &mut self,
        round: u32,
        frame: &SensorFrame,
        index: usize,
        chosen: &CandidateSurface,
    ) -> Result<bool, PlannerError> {
        let pixel = chosen.bbox.center_pixel();
        let point = build_table(&frame.point_cloud, &frame.intrinsics)
            .ok()
            .and_then(|table| lookup(&table, pixel));
        let Some(point) = point else {
            return Ok(self.end(
                round,
                RoundAction::Rejected,
                "no depth near the target pixel",
            ));
        };
        let (dn, de) = frd_to_ned(&point, self.pose.yaw);
        let commanded = (self.pose.north + dn, self.pose.east + de);
        let (gn, ge, _) = frame.world_point(pixel.0, pixel.1);
        self.records.push(TraceRecord::Target {
            round,
            tick: self.tick,
            candidate: index,
            pixel,
            point_frd: point,
            commanded,
            ground_truth: (gn, ge),
        });
        if !self.scene.contains_point(commanded.0, commanded.1) {
            return Ok(self.end(round, RoundAction::Rejected, "target lies outside the map"));
        }
        if self.obstructed(commanded) {
            return Ok(self.end(
                round,
                RoundAction::Rejected,
                "path to the target is obstructed",
            ));
        }
        self.fly_to(round, commanded, false);

        let (w, h) = (chosen.bbox.width(), chosen.bbox.height());
        loop {
            let frame = self.observe(round, FramePurpose::Closeup)?;
            let view = closeup(&frame, w, h);
            let (cu, cv) = view.bbox.center_pixel();
            let (gn, ge, _) = frame.world_point(cu, cv);
            let request = build_confirmation_request(&view, round);
            match self.ask(
                round,
                request,
                &frame,
                std::slice::from_ref(&view),
                Some((gn, ge)),
            ) {
                Ok(v) if v.confirmed() => {}
                Ok(_) => {
                    return Ok(self.end(
                        round,
                        RoundAction::Rejected,
                        "approach cancelled at close range",
                    ))
                }
                Err(e) => {
                    return Ok(self.end(
                        round,
                        RoundAction::Rejected,
                        format!("confirmation failed: {e}"),
                    ))
                }
            }
            match descend_step(frame.rangefinder, self.cfg.k, self.cfg.landing_threshold_m)? {
                DescendAction::LandNow => {
                    let c = self.touchdown(round, false)?;
                    return Ok(self.end(round, RoundAction::Landed, c.reason()));
                }
                DescendAction::DescendTo(range) => {
                    let from = self.pose;
                    let drop = frame.rangefinder - range;
                    let tick_start = self.tick;
                    self.tick += ticks_for(drop, self.cfg.vertical_speed);
                    self.pose = from.with_altitude(from.altitude() - drop);
                    self.records.push(TraceRecord::Descend {
                        round,
                        tick_start,
                        tick_end: self.tick,
                        from,
                        to: self.pose,
                        rangefinder: range,
                    });
                    if range <= self.cfg.landing_threshold_m {
                        let altitude = self.pose.altitude();
                        return Ok(self.end(
                            round,
                            RoundAction::Descended { altitude },
                            format!("descended to {range:.1} m above the surface"),
                        ));
                    }
                }
            }
        }
    }
}

/// Flies one recovery episode from `launch` and returns its trace.
pub fn run_episode(
    scene: &SceneModel,
    launch: Pose,
    rig: &SensorRig,
    judge: &mut dyn JudgeBackend,
    cfg: &PlannerConfig,
    spec: &EpisodeSpec,
) -> Result<EpisodeResult, PlannerError> {
    cfg.validate()?;
    rig.intrinsics
        .validate()
        .map_err(|e| PlannerError::InvalidConfig(e.to_string()))?;
    let launch_cell = scene
        .cell_at(launch.north, launch.east)
        .ok_or(SceneError::OutOfBounds {
            north: launch.north,
            east: launch.east,
        })?;
    let surface = scene.cell(launch_cell).elevation;
    if launch.altitude() <= surface + cfg.landing_threshold_m {
        return Err(PlannerError::InvalidConfig(format!(
            "launch altitude {:.1} m is too close to the {surface:.1} m surface below",
            launch.altitude()
        )));
    }
    let gt_cells = scene
        .markers
        .get(GROUND_TRUTH_MARKER)
        .map(|&seed| scene.plateau(seed).into_iter().collect())
        .unwrap_or_default();
    let mut ep = Episode {
        scene,
        rig,
        cfg,
        pose: launch,
        tick: 0,
        rng: ChaCha8Rng::seed_from_u64(spec.seed ^ 0x6a09_e667_f3bc_c908),
        records: vec![
            TraceRecord::Header {
                schema_version: SCHEMA_VERSION,
                scenario: spec.scenario.clone(),
                seed: spec.seed,
                backend: judge.id(),
                launch,
                config: spec.config.clone(),
            },
            TraceRecord::Alert {
                tick: 0,
                reason: spec.alert.clone(),
            },
        ],
        judge,
        gt_cells,
    };
    let mut landed = false;
    for round in 1..=cfg.max_rounds {
        if ep.round(round)? {
            landed = true;
            break;
        }
    }
    if !landed {
        log::info!(
            "{}: no confirmed landing after {} rounds, landing in place",
            spec.scenario,
            cfg.max_rounds
        );
        ep.touchdown(cfg.max_rounds, true)?;
    }
    let mut records = ep.records;
    let summary = summarize(&records)?;
    records.push(TraceRecord::Summary(summary.clone()));
    Ok(EpisodeResult { summary, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CameraIntrinsics;
    use crate::judge::oracle::{OracleConfig, OracleJudge};
    use crate::judge::DenyAllJudge;
    use crate::scene::SurfaceClass;
    use crate::sensor::DepthNoiseConfig;
    use crate::trace::{replay, Outcome};
    use proptest::prelude::*;

    fn spec() -> EpisodeSpec {
        EpisodeSpec {
            scenario: "test".into(),
            seed: 1,
            alert: "test alert".into(),
            config: serde_json::Value::Null,
        }
    }

    fn rig() -> SensorRig {
        SensorRig::new(
            CameraIntrinsics::centered(110.0, 128).unwrap(),
            DepthNoiseConfig::none(),
        )
    }

    /// Rough terrain around one clear 20 m roof.
    fn roof_scene() -> SceneModel {
        let mut s = SceneModel::uniform("roof", 80, 80, 1.0, SurfaceClass::Vegetation, 0.0);
        for r in 0..80u32 {
            for c in 0..80u32 {
                let h = f64::from((r * 7 + c * 13) % 5) * 0.8;
                *s.cell_mut(CellIndex::new(r, c)) = crate::scene::Cell {
                    class: SurfaceClass::Vegetation,
                    elevation: h,
                };
            }
        }
        s.fill(30..=51, 40..=61, SurfaceClass::Rooftop, 12.0);
        s.markers
            .insert(GROUND_TRUTH_MARKER.into(), CellIndex::new(40, 50));
        s
    }

    #[test]
    fn descend_step_examples() {
        assert_eq!(
            descend_step(40.0, 0.5, 5.0).unwrap(),
            DescendAction::DescendTo(20.0)
        );
        assert_eq!(descend_step(5.0, 0.5, 5.0).unwrap(), DescendAction::LandNow);
        assert_eq!(descend_step(4.9, 0.5, 5.0).unwrap(), DescendAction::LandNow);
        assert!(descend_step(0.0, 0.5, 5.0).is_err());
        assert!(descend_step(10.0, 1.0, 5.0).is_err());
    }

    #[test]
    fn descent_sequence_from_forty_metres() {
        let mut rf = 40.0;
        let mut confirmations = 0;
        loop {
            confirmations += 1;
            match descend_step(rf, 0.5, 5.0).unwrap() {
                DescendAction::LandNow => break,
                DescendAction::DescendTo(next) => rf = next,
            }
        }
        assert_eq!(confirmations, 4);
        assert_eq!(rf, 5.0);
    }

    #[test]
    fn config_validation() {
        assert!(PlannerConfig::default().validate().is_ok());
        let bad = PlannerConfig {
            k: 1.5,
            ..PlannerConfig::default()
        };
        assert!(matches!(
            bad.validate(),
            Err(PlannerError::InvalidConfig(_))
        ));
    }

    #[test]
    fn oracle_lands_on_the_roof() {
        let scene = roof_scene();
        let mut judge = OracleJudge::new(OracleConfig::default());
        let launch = Pose::new(50.0, 40.0, 45.0, 0.3);
        let res = run_episode(
            &scene,
            launch,
            &rig(),
            &mut judge,
            &PlannerConfig::default(),
            &spec(),
        )
        .unwrap();
        assert_eq!(
            res.summary.outcome,
            Outcome::LandedSafe,
            "{:#?}",
            res.summary.rounds
        );
        assert_eq!(
            res.summary.classification.surface_class,
            SurfaceClass::Rooftop
        );
        assert!(res.summary.landing_distance.unwrap() < 2.0);
        let report = replay(&res.records).unwrap();
        assert!(report.is_clean(), "{:?}", report.violations);
    }

    #[test]
    fn deny_all_times_out_in_place() {
        let scene = roof_scene();
        let launch = Pose::new(50.0, 40.0, 45.0, 0.0);
        let cfg = PlannerConfig {
            max_rounds: 3,
            ..PlannerConfig::default()
        };
        let res = run_episode(&scene, launch, &rig(), &mut DenyAllJudge, &cfg, &spec()).unwrap();
        assert_eq!(res.summary.outcome, Outcome::TimeoutForcedLanding);
        assert_eq!(res.summary.rounds_used, 3);
        assert!(res
            .summary
            .rounds
            .iter()
            .all(|r| r.action == RoundAction::Rejected));
        assert!(replay(&res.records).unwrap().is_clean());
    }

    #[test]
    fn low_launch_is_rejected() {
        let scene = roof_scene();
        let launch = Pose::new(40.0, 50.0, 14.0, 0.0);
        let err = run_episode(
            &scene,
            launch,
            &rig(),
            &mut DenyAllJudge,
            &PlannerConfig::default(),
            &spec(),
        );
        assert!(matches!(err, Err(PlannerError::InvalidConfig(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn descend_never_climbs_and_terminates(rf in 0.1f64..500.0, k in 0.05f64..0.95) {
            let mut rf = rf;
            for _ in 0..200 {
                match descend_step(rf, k, 5.0).unwrap() {
                    DescendAction::LandNow => return Ok(()),
                    DescendAction::DescendTo(next) => {
                        prop_assert!(next < rf);
                        rf = next;
                    }
                }
            }
            prop_assert!(false, "did not reach the threshold");
        }
    }
}
