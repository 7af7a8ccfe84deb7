//! Two-stage semantic judging of candidate surfaces.
//!
//! A ranking request orders up to five candidate crops; a confirmation
//! request accepts or cancels the final approach from one close-up. Backends
//! implement [`JudgeBackend`]: [`oracle::OracleJudge`] reads the ground truth,
//! [`remote::RemoteJudge`] talks to a chat-completion endpoint.

pub mod oracle;
pub mod parse;
pub mod prompts;
pub mod remote;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::SceneModel;
use crate::sensor::{RgbImage, SensorFrame};
use crate::surface::{CandidateSurface, MAX_CANDIDATES};

pub use parse::{parse_verdict, ParseError, ParseErrorKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ranking,
    Confirmation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JudgeRequest {
    pub stage: Stage,
    pub system_prompt: String,
    pub user_prompt: String,
    pub images: Vec<RgbImage>,
    pub round_index: u32,
}

/// Image facts recorded in traces in place of the pixels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageMeta {
    pub width: u32,
    pub height: u32,
    pub sha256: String,
}

impl JudgeRequest {
    pub fn image_meta(&self) -> Vec<ImageMeta> {
        self.images
            .iter()
            .map(|img| ImageMeta {
                width: img.width,
                height: img.height,
                sha256: img.sha256_hex(),
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictPayload {
    /// Candidate indices, best first. May omit candidates.
    Ranking(Vec<usize>),
    Confirmation(bool),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub payload: VerdictPayload,
    /// Full reply text.
    pub rationale: String,
    pub latency_ms: u64,
    pub backend_id: String,
}

impl JudgeVerdict {
    pub fn ranking(&self) -> Option<&[usize]> {
        match &self.payload {
            VerdictPayload::Ranking(r) => Some(r),
            VerdictPayload::Confirmation(_) => None,
        }
    }

    pub fn confirmed(&self) -> bool {
        matches!(self.payload, VerdictPayload::Confirmation(true))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JudgeError {
    #[error("invalid request: {0}")]
    Precondition(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("judge backend unavailable: {0}")]
    Unavailable(String),
    #[error("candidate cannot be mapped to the scene: {0}")]
    Unmappable(String),
}

/// Ground truth handed to backends that may use it. Remote backends ignore it.
pub struct JudgeContext<'a> {
    pub scene: &'a SceneModel,
    pub frame: &'a SensorFrame,
    pub tick: u64,
    pub candidates: &'a [CandidateSurface],
    pub clearance_radius: f64,
}

pub trait JudgeBackend: Send {
    fn id(&self) -> String;
    fn judge(
        &mut self,
        request: &JudgeRequest,
        ctx: &JudgeContext<'_>,
    ) -> Result<JudgeVerdict, JudgeError>;
}

pub fn build_ranking_request(
    candidates: &[CandidateSurface],
    round: u32,
) -> Result<JudgeRequest, JudgeError> {
    if candidates.is_empty() || candidates.len() > MAX_CANDIDATES {
        return Err(JudgeError::Precondition(format!(
            "ranking needs 1 to {MAX_CANDIDATES} candidates, got {}",
            candidates.len()
        )));
    }
    Ok(JudgeRequest {
        stage: Stage::Ranking,
        system_prompt: prompts::SYSTEM.to_string(),
        user_prompt: prompts::ranking_prompt(candidates.len()),
        images: candidates.iter().map(|c| c.crop.clone()).collect(),
        round_index: round,
    })
}

pub fn build_confirmation_request(closeup: &CandidateSurface, round: u32) -> JudgeRequest {
    JudgeRequest {
        stage: Stage::Confirmation,
        system_prompt: prompts::SYSTEM.to_string(),
        user_prompt: prompts::CONFIRMATION.to_string(),
        images: vec![closeup.crop.clone()],
        round_index: round,
    }
}

/// Backend that denies every confirmation and ranks candidates in order.
/// Useful for exercising the timeout path.
#[derive(Clone, Debug, Default)]
pub struct DenyAllJudge;

impl JudgeBackend for DenyAllJudge {
    fn id(&self) -> String {
        "deny-all".into()
    }

    fn judge(
        &mut self,
        request: &JudgeRequest,
        _ctx: &JudgeContext<'_>,
    ) -> Result<JudgeVerdict, JudgeError> {
        let payload = match request.stage {
            Stage::Ranking => VerdictPayload::Ranking((0..request.images.len()).collect()),
            Stage::Confirmation => VerdictPayload::Confirmation(false),
        };
        Ok(JudgeVerdict {
            payload,
            rationale: "Denied unconditionally.".into(),
            latency_ms: 0,
            backend_id: self.id(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CameraIntrinsics;
    use crate::scene::SurfaceClass;
    use crate::sensor::{render_frame, DepthNoiseConfig, Pose, SensorRig};
    use crate::surface::{closeup, quadrant_fallback, ContextLevel};

    fn candidates(n: usize) -> Vec<CandidateSurface> {
        let scene = SceneModel::uniform("flat", 64, 64, 1.0, SurfaceClass::Ground, 0.0);
        let rig = SensorRig::new(
            CameraIntrinsics::centered(40.0, 32).unwrap(),
            DepthNoiseConfig::none(),
        );
        let frame = render_frame(&scene, &Pose::new(32.0, 32.0, 30.0, 0.0), &rig, 0).unwrap();
        let mut out = quadrant_fallback(&frame, ContextLevel::Cropped);
        out.extend(quadrant_fallback(&frame, ContextLevel::Cropped));
        out.truncate(n);
        out
    }

    #[test]
    fn ranking_request_carries_images_in_order() {
        let c = candidates(3);
        let r = build_ranking_request(&c, 2).unwrap();
        assert_eq!(r.stage, Stage::Ranking);
        assert_eq!(r.images.len(), 3);
        assert_eq!(r.images[1], c[1].crop);
        assert_eq!(r.round_index, 2);
        assert_eq!(
            build_ranking_request(&candidates(5), 0)
                .unwrap()
                .images
                .len(),
            5
        );
    }

    #[test]
    fn ranking_request_rejects_bad_counts() {
        assert!(matches!(
            build_ranking_request(&candidates(6), 0),
            Err(JudgeError::Precondition(_))
        ));
        assert!(matches!(
            build_ranking_request(&[], 0),
            Err(JudgeError::Precondition(_))
        ));
    }

    #[test]
    fn confirmation_request_is_deterministic() {
        let scene = SceneModel::uniform("flat", 64, 64, 1.0, SurfaceClass::Rooftop, 5.0);
        let rig = SensorRig::new(
            CameraIntrinsics::centered(40.0, 32).unwrap(),
            DepthNoiseConfig::none(),
        );
        let frame = render_frame(&scene, &Pose::new(32.0, 32.0, 30.0, 0.0), &rig, 0).unwrap();
        let c = closeup(&frame, 10, 10);
        let a = build_confirmation_request(&c, 4);
        let b = build_confirmation_request(&c, 4);
        assert_eq!(a, b);
        assert_eq!(a.images.len(), 1);
        assert_eq!(a.round_index, 4);
        assert_eq!(a.user_prompt, prompts::CONFIRMATION);
    }
}
