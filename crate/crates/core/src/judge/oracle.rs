//! Ground-truth judge.
//!
//! Each candidate is assessed against the scene: the surface region (the
//! detected component with its holes filled) must show no obstacle, water,
//! vehicle or person, and a touchdown at the box centre must
//! classify as safe. Safe candidates rank by flat area. Roads, piers and
//! surfaces with traffic elsewhere on them are excluded unless
//! `tolerate_roads` is set, in which case those with a clear touchdown rank
//! below every safe candidate.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{
    parse_verdict, JudgeBackend, JudgeContext, JudgeError, JudgeRequest, JudgeVerdict, Stage,
};
use crate::grid::Grid;
use crate::scene::{classify_touchdown, LandingClassification, SceneModel, SurfaceClass};
use crate::sensor::{Face, SensorFrame};
use crate::surface::{CandidateOrigin, CandidateSurface};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Accept hazard-free roads and piers as a last resort.
    pub tolerate_roads: bool,
    /// Touchdowns must also stay clear of agents for this many ticks after
    /// the frame, covering the time until the vehicle is down.
    #[serde(default)]
    pub lookahead_ticks: u64,
}

#[derive(Clone, Debug, Default)]
pub struct OracleJudge {
    pub config: OracleConfig,
}

impl OracleJudge {
    pub fn new(config: OracleConfig) -> Self {
        Self { config }
    }
}

/// Safety tier of a candidate; higher is better, `Excluded` is never ranked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SafetyTier {
    Excluded = 0,
    Tolerated = 1,
    Safe = 2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Assessment {
    pub tier: SafetyTier,
    /// Ranking weight: flat area for detected candidates, count of benign
    /// pixels for quadrants.
    pub score: u64,
    pub reason: String,
}

/// Candidate indices ordered by (tier desc, score desc, index asc), with
/// excluded candidates dropped.
pub fn oracle_order(scores: &[(SafetyTier, u64)]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len())
        .filter(|&i| scores[i].0 != SafetyTier::Excluded)
        .collect();
    idx.sort_by(|&a, &b| {
        scores[b]
            .0
            .cmp(&scores[a].0)
            .then(scores[b].1.cmp(&scores[a].1))
            .then(a.cmp(&b))
    });
    idx
}

/// Component mask with enclosed holes filled in.
fn filled(mask: &Grid<bool>) -> Grid<bool> {
    let (w, h) = (mask.width(), mask.height());
    let mut outside = Grid::filled(w, h, false);
    let mut queue = VecDeque::new();
    for v in 0..h {
        for u in 0..w {
            if (u == 0 || v == 0 || u + 1 == w || v + 1 == h) && !mask.get(u, v) {
                outside.set(u, v, true);
                queue.push_back((u, v));
            }
        }
    }
    while let Some((u, v)) = queue.pop_front() {
        let mut push = |x: usize, y: usize| {
            if !mask.get(x, y) && !outside.get(x, y) {
                outside.set(x, y, true);
                queue.push_back((x, y));
            }
        };
        if u > 0 {
            push(u - 1, v);
        }
        if u + 1 < w {
            push(u + 1, v);
        }
        if v > 0 {
            push(u, v - 1);
        }
        if v + 1 < h {
            push(u, v + 1);
        }
    }
    outside.map(|o| !o)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum RegionHazard {
    Clear,
    Agents,
    Static,
}

fn region_hazard(frame: &SensorFrame, cand: &CandidateSurface) -> RegionHazard {
    let region = filled(&cand.mask);
    let b = cand.bbox;
    let mut found = RegionHazard::Clear;
    for v in b.v_min..b.v_max {
        for u in b.u_min..b.u_max {
            if !region.get((u - b.u_min) as usize, (v - b.v_min) as usize) {
                continue;
            }
            let px = frame.raster.get(u as usize, v as usize);
            // Parapets bound a roof; the touchdown check covers edges nearby.
            if px.class.is_hazard() && px.class != SurfaceClass::WallEdge {
                return RegionHazard::Static;
            }
            if px.occupied() {
                found = RegionHazard::Agents;
            }
        }
    }
    found
}

fn touchdown_at_center(
    scene: &SceneModel,
    frame: &SensorFrame,
    cand: &CandidateSurface,
    tick: u64,
    lookahead: u64,
    clearance: f64,
) -> Option<LandingClassification> {
    let (u, v) = cand.bbox.center_pixel();
    let (north, east, _) = frame.world_point(u, v);
    let first = classify_touchdown(scene, north, east, tick, clearance).ok()?;
    for t in tick + 1..=tick + lookahead {
        let later = classify_touchdown(scene, north, east, t, clearance).ok()?;
        if !later.agent_free {
            return Some(later);
        }
    }
    Some(first)
}

fn tier_of(c: &LandingClassification, cfg: &OracleConfig) -> SafetyTier {
    if c.safe {
        SafetyTier::Safe
    } else if cfg.tolerate_roads && c.clear_of_hazards() && !c.benign_surface {
        SafetyTier::Tolerated
    } else {
        SafetyTier::Excluded
    }
}

fn check_bounds(frame: &SensorFrame, cand: &CandidateSurface) -> Result<(), JudgeError> {
    let b = cand.bbox;
    if b.is_empty() || b.u_max > frame.intrinsics.width || b.v_max > frame.intrinsics.height {
        return Err(JudgeError::Unmappable(format!(
            "box {b:?} is not inside the frame"
        )));
    }
    if (cand.mask.width(), cand.mask.height()) != (b.width() as usize, b.height() as usize) {
        return Err(JudgeError::Unmappable(
            "component mask does not match its box".into(),
        ));
    }
    Ok(())
}

/// Ground-truth assessment of one candidate.
pub fn assess(
    ctx: &JudgeContext<'_>,
    cand: &CandidateSurface,
    cfg: &OracleConfig,
) -> Result<Assessment, JudgeError> {
    check_bounds(ctx.frame, cand)?;
    if cand.origin == CandidateOrigin::QuadrantFallback {
        let benign = cand
            .pixels()
            .filter(|&(u, v)| {
                let px = ctx.frame.raster.get(u as usize, v as usize);
                px.face == Face::Top
                    && !px.occupied()
                    && !px.class.is_hazard()
                    && !px.class.is_traffic_or_pier()
            })
            .count() as u64;
        return Ok(Assessment {
            tier: SafetyTier::Tolerated,
            score: benign,
            reason: format!("{benign} px of open, benign surface"),
        });
    }
    let hazard = region_hazard(ctx.frame, cand);
    if hazard == RegionHazard::Static {
        return Ok(Assessment {
            tier: SafetyTier::Excluded,
            score: cand.area_px,
            reason: "obstructions, edges or water on the surface".into(),
        });
    }
    let Some(c) = touchdown_at_center(
        ctx.scene,
        ctx.frame,
        cand,
        ctx.tick,
        cfg.lookahead_ticks,
        ctx.clearance_radius,
    ) else {
        return Ok(Assessment {
            tier: SafetyTier::Excluded,
            score: cand.area_px,
            reason: "outside the mapped area".into(),
        });
    };
    let tier = tier_of(&c, cfg);
    if hazard == RegionHazard::Agents {
        // Traffic elsewhere on the surface demotes it to a last resort.
        let tier = if cfg.tolerate_roads && c.clear_of_hazards() {
            SafetyTier::Tolerated
        } else {
            SafetyTier::Excluded
        };
        return Ok(Assessment {
            tier,
            score: cand.area_px,
            reason: "vehicles or people on the surface".into(),
        });
    }
    Ok(Assessment {
        tier,
        score: cand.area_px,
        reason: c.reason(),
    })
}

fn ranking_reply(assessments: &[Assessment], order: &[usize]) -> String {
    let line = if assessments.len() == 1 && order.len() == 1 {
        format!("Sole option: candidate 0, {}.", assessments[0].reason)
    } else {
        assessments
            .iter()
            .enumerate()
            .map(|(i, a)| match a.tier {
                SafetyTier::Excluded => format!("Candidate {i}: rejected, {}.", a.reason),
                _ => format!("Candidate {i}: {}, {} px.", a.reason, a.score),
            })
            .collect::<Vec<_>>()
            .join(" ")
    };
    format!("{line}\n**Final Ranking**: {order:?}")
}

impl JudgeBackend for OracleJudge {
    fn id(&self) -> String {
        if self.config.tolerate_roads {
            "oracle-tolerant".into()
        } else {
            "oracle".into()
        }
    }

    fn judge(
        &mut self,
        request: &JudgeRequest,
        ctx: &JudgeContext<'_>,
    ) -> Result<JudgeVerdict, JudgeError> {
        if ctx.candidates.len() != request.images.len() {
            return Err(JudgeError::Unmappable(format!(
                "{} images but {} candidates in context",
                request.images.len(),
                ctx.candidates.len()
            )));
        }
        let reply = match request.stage {
            Stage::Ranking => {
                let assessments = ctx
                    .candidates
                    .iter()
                    .map(|c| assess(ctx, c, &self.config))
                    .collect::<Result<Vec<_>, _>>()?;
                let scores: Vec<(SafetyTier, u64)> =
                    assessments.iter().map(|a| (a.tier, a.score)).collect();
                ranking_reply(&assessments, &oracle_order(&scores))
            }
            Stage::Confirmation => {
                let cand = &ctx.candidates[0];
                check_bounds(ctx.frame, cand)?;
                let c = touchdown_at_center(
                    ctx.scene,
                    ctx.frame,
                    cand,
                    ctx.tick,
                    self.config.lookahead_ticks,
                    ctx.clearance_radius,
                )
                .ok_or_else(|| {
                    JudgeError::Unmappable("close-up centre is outside the scene".into())
                })?;
                let confirm = tier_of(&c, &self.config) != SafetyTier::Excluded;
                format!(
                    "Close-up: {}.\n**Final Decision**: [{}]",
                    c.reason(),
                    u8::from(confirm)
                )
            }
        };
        let payload = parse_verdict(request.stage, &reply, request.images.len())?;
        Ok(JudgeVerdict {
            payload,
            rationale: reply,
            latency_ms: 0,
            backend_id: self.id(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CameraIntrinsics;
    use crate::judge::{build_confirmation_request, build_ranking_request, VerdictPayload};
    use crate::scene::{AgentKind, CellIndex, DynamicAgent, SurfaceClass};
    use crate::sensor::{render_frame, DepthNoiseConfig, Pose, SensorRig};
    use crate::surface::{closeup, detect, DetectorConfig};
    use proptest::prelude::*;

    fn rig() -> SensorRig {
        SensorRig::new(
            CameraIntrinsics::centered(110.0, 128).unwrap(),
            DepthNoiseConfig::none(),
        )
    }

    /// Clear roof to the north-west, HVAC-covered roof to the south-east.
    fn two_roofs() -> SceneModel {
        let mut s = SceneModel::uniform("two", 80, 80, 1.0, SurfaceClass::Vegetation, 0.0);
        for row in 0..80 {
            for col in 0..80 {
                s.cell_mut(CellIndex::new(row, col)).elevation =
                    f64::from((row * 7 + col * 13) % 5) * 0.8;
            }
        }
        s.fill(42..=63, 18..=39, SurfaceClass::WallEdge, 18.6);
        s.fill(43..=62, 19..=38, SurfaceClass::Rooftop, 18.0);
        s.fill(16..=37, 42..=63, SurfaceClass::WallEdge, 16.6);
        s.fill(17..=36, 43..=62, SurfaceClass::Rooftop, 16.0);
        for r in (18..36).step_by(5) {
            for c in (44..62).step_by(5) {
                s.fill(r..=r + 1, c..=c + 1, SurfaceClass::RooftopObstacle, 17.5);
            }
        }
        s
    }

    fn ctx<'a>(
        scene: &'a SceneModel,
        frame: &'a SensorFrame,
        cands: &'a [CandidateSurface],
    ) -> JudgeContext<'a> {
        JudgeContext {
            scene,
            frame,
            tick: frame.tick,
            candidates: cands,
            clearance_radius: 2.0,
        }
    }

    #[test]
    fn clear_roof_beats_cluttered_roof() {
        let scene = two_roofs();
        let frame = render_frame(&scene, &Pose::new(40.0, 40.0, 45.0, 0.0), &rig(), 0).unwrap();
        let det = detect(&frame, &DetectorConfig::default()).unwrap();
        assert!(!det.fallback);
        let req = build_ranking_request(&det.candidates, 0).unwrap();
        let v = OracleJudge::default()
            .judge(&req, &ctx(&scene, &frame, &det.candidates))
            .unwrap();
        let top = v.ranking().unwrap()[0];
        let (u, vv) = det.candidates[top].bbox.center_pixel();
        let cell = frame.raster.get(u as usize, vv as usize).cell.unwrap();
        assert!(
            (43..=62).contains(&cell.row) && (19..=38).contains(&cell.col),
            "{cell:?}"
        );
        for &i in v.ranking().unwrap() {
            let (u, vv) = det.candidates[i].bbox.center_pixel();
            let (n, e, _) = frame.world_point(u, vv);
            assert!(classify_touchdown(&scene, n, e, 0, 2.0).unwrap().safe);
        }
    }

    #[test]
    fn occupied_road_is_denied() {
        let mut scene = SceneModel::uniform("road", 40, 40, 1.0, SurfaceClass::Road, 0.0);
        scene.agents.push(DynamicAgent {
            kind: AgentKind::Vehicle,
            path: vec![CellIndex::new(20, 20), CellIndex::new(20, 21)],
            speed: 1.0,
            footprint: 1,
            offset: 0.0,
        });
        let frame = render_frame(&scene, &Pose::new(20.5, 20.5, 10.0, 0.0), &rig(), 0).unwrap();
        let c = [closeup(&frame, 30, 30)];
        let req = build_confirmation_request(&c[0], 1);
        for tolerate_roads in [false, true] {
            let v = OracleJudge::new(OracleConfig {
                tolerate_roads,
                ..Default::default()
            })
            .judge(&req, &ctx(&scene, &frame, &c))
            .unwrap();
            assert_eq!(v.payload, VerdictPayload::Confirmation(false));
        }
        // An empty road is acceptable only to the tolerant oracle.
        scene.agents.clear();
        let frame = render_frame(&scene, &Pose::new(20.5, 20.5, 10.0, 0.0), &rig(), 0).unwrap();
        let c = [closeup(&frame, 30, 30)];
        let strict = OracleJudge::default()
            .judge(&req, &ctx(&scene, &frame, &c))
            .unwrap();
        let tolerant = OracleJudge::new(OracleConfig {
            tolerate_roads: true,
            ..Default::default()
        })
        .judge(&req, &ctx(&scene, &frame, &c))
        .unwrap();
        assert!(!strict.confirmed() && tolerant.confirmed());
    }

    #[test]
    fn sole_safe_candidate_is_named() {
        let scene = SceneModel::uniform("roof", 60, 60, 1.0, SurfaceClass::Rooftop, 10.0);
        let frame = render_frame(&scene, &Pose::new(30.0, 30.0, 40.0, 0.0), &rig(), 0).unwrap();
        let det = detect(&frame, &DetectorConfig::default()).unwrap();
        assert_eq!(det.candidates.len(), 1);
        let req = build_ranking_request(&det.candidates, 0).unwrap();
        let v = OracleJudge::default()
            .judge(&req, &ctx(&scene, &frame, &det.candidates))
            .unwrap();
        assert_eq!(v.payload, VerdictPayload::Ranking(vec![0]));
        assert!(v.rationale.starts_with("Sole option"));
        assert_eq!(v.rationale.lines().count(), 2);
    }

    #[test]
    fn holes_are_filled() {
        let mask = Grid::from_fn(5, 5, |u, v| !(u == 2 && v == 2));
        assert!(filled(&mask).as_slice().iter().all(|b| *b));
        let notch = Grid::from_fn(5, 5, |u, v| !(u == 2 && v == 0));
        assert!(!filled(&notch).get(2, 0));
    }

    proptest! {
        #[test]
        fn top_choice_is_scale_invariant(
            raw in proptest::collection::vec((0u8..3, 1u64..10_000), 1..6),
            factor in 1u64..50,
        ) {
            let tier = |t: u8| match t { 0 => SafetyTier::Excluded, 1 => SafetyTier::Tolerated, _ => SafetyTier::Safe };
            let a: Vec<(SafetyTier, u64)> = raw.iter().map(|&(t, s)| (tier(t), s)).collect();
            let b: Vec<(SafetyTier, u64)> = raw.iter().map(|&(t, s)| (tier(t), s * factor)).collect();
            prop_assert_eq!(oracle_order(&a).first().copied(), oracle_order(&b).first().copied());
        }
    }
}
