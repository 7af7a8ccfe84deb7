//! Extraction of the final index array from free-text judge replies.
//!
//! Replies usually reason step by step and may quote several lists along the
//! way; the answer is the last bracketed integer array in the text.

use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Stage, VerdictPayload};

static ARRAY: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\[\s*(-?\d+(?:\s*,\s*-?\d+)*)?\s*,?\s*\]").expect("valid regex"));

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParseErrorKind {
    EmptyText,
    NoArray,
    OutOfRange { index: i64, n_images: usize },
    Duplicate { index: i64 },
    NonBinary { found: String },
    Empty,
}

#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("unparseable judge reply ({kind:?})")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    /// The reply exactly as received.
    pub raw: String,
}

fn fail(kind: ParseErrorKind, raw: &str) -> ParseError {
    ParseError {
        kind,
        raw: raw.to_string(),
    }
}

/// Parses a reply for `stage`. Rankings must hold unique indices below
/// `n_images` and may be partial; confirmations must be exactly `[0]` or `[1]`.
pub fn parse_verdict(
    stage: Stage,
    reply: &str,
    n_images: usize,
) -> Result<VerdictPayload, ParseError> {
    if reply.trim().is_empty() {
        return Err(fail(ParseErrorKind::EmptyText, reply));
    }
    let caps = ARRAY
        .captures_iter(reply)
        .last()
        .ok_or_else(|| fail(ParseErrorKind::NoArray, reply))?;
    let values: Vec<i64> = match caps.get(1) {
        None => Vec::new(),
        Some(body) => body
            .as_str()
            .split(',')
            .map(|t| t.trim().parse::<i64>())
            .collect::<Result<_, _>>()
            // Digit runs too long for i64 cannot be valid indices.
            .map_err(|_| {
                fail(
                    ParseErrorKind::OutOfRange {
                        index: i64::MAX,
                        n_images,
                    },
                    reply,
                )
            })?,
    };
    match stage {
        Stage::Ranking => {
            let mut seen = BTreeSet::new();
            for &v in &values {
                if v < 0 || v as u64 >= n_images as u64 {
                    return Err(fail(
                        ParseErrorKind::OutOfRange { index: v, n_images },
                        reply,
                    ));
                }
                if !seen.insert(v) {
                    return Err(fail(ParseErrorKind::Duplicate { index: v }, reply));
                }
            }
            Ok(VerdictPayload::Ranking(
                values.into_iter().map(|v| v as usize).collect(),
            ))
        }
        Stage::Confirmation => match values.as_slice() {
            [] => Err(fail(ParseErrorKind::Empty, reply)),
            [0] => Ok(VerdictPayload::Confirmation(false)),
            [1] => Ok(VerdictPayload::Confirmation(true)),
            other => Err(fail(
                ParseErrorKind::NonBinary {
                    found: format!("{other:?}"),
                },
                reply,
            )),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn direct_ranking() {
        assert_eq!(
            parse_verdict(Stage::Ranking, "...**Final Ranking**: [1, 0]", 2).unwrap(),
            VerdictPayload::Ranking(vec![1, 0])
        );
    }

    #[test]
    fn last_array_wins() {
        let text = "Initially I thought [0,1] but on reflection, final: [1,0]";
        assert_eq!(
            parse_verdict(Stage::Ranking, text, 2).unwrap(),
            VerdictPayload::Ranking(vec![1, 0])
        );
    }

    #[test]
    fn ranking_errors() {
        let e = parse_verdict(Stage::Ranking, "[3]", 2).unwrap_err();
        assert_eq!(
            e.kind,
            ParseErrorKind::OutOfRange {
                index: 3,
                n_images: 2
            }
        );
        let e = parse_verdict(Stage::Ranking, "Final Ranking: [0, 0, 1]", 3).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Duplicate { index: 0 });
        assert_eq!(e.raw, "Final Ranking: [0, 0, 1]");
        let e = parse_verdict(Stage::Ranking, "no list here", 3).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::NoArray);
        let e = parse_verdict(Stage::Ranking, "  \n", 3).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::EmptyText);
        let e = parse_verdict(Stage::Ranking, "[-1]", 3).unwrap_err();
        assert!(matches!(
            e.kind,
            ParseErrorKind::OutOfRange { index: -1, .. }
        ));
    }

    #[test]
    fn partial_and_empty_rankings_are_allowed() {
        assert_eq!(
            parse_verdict(Stage::Ranking, "[2]", 3).unwrap(),
            VerdictPayload::Ranking(vec![2])
        );
        assert_eq!(
            parse_verdict(Stage::Ranking, "none: []", 3).unwrap(),
            VerdictPayload::Ranking(vec![])
        );
    }

    #[test]
    fn confirmations() {
        assert_eq!(
            parse_verdict(Stage::Confirmation, "output the indices array: [1]", 1).unwrap(),
            VerdictPayload::Confirmation(true)
        );
        assert_eq!(
            parse_verdict(Stage::Confirmation, "**Final Decision**: [0]", 1).unwrap(),
            VerdictPayload::Confirmation(false)
        );
        assert!(matches!(
            parse_verdict(Stage::Confirmation, "[2]", 1)
                .unwrap_err()
                .kind,
            ParseErrorKind::NonBinary { .. }
        ));
        assert!(matches!(
            parse_verdict(Stage::Confirmation, "[1, 0]", 1)
                .unwrap_err()
                .kind,
            ParseErrorKind::NonBinary { .. }
        ));
        assert_eq!(
            parse_verdict(Stage::Confirmation, "[]", 1)
                .unwrap_err()
                .kind,
            ParseErrorKind::Empty
        );
    }

    #[test]
    fn ignores_bracketed_prose() {
        let text = "[Image 0] looks fine. [see note]\nFinal Ranking: [ 0 ,\n 1 ]";
        assert_eq!(
            parse_verdict(Stage::Ranking, text, 2).unwrap(),
            VerdictPayload::Ranking(vec![0, 1])
        );
        assert_eq!(
            parse_verdict(Stage::Ranking, "[99999999999999999999999]", 2)
                .unwrap_err()
                .kind,
            ParseErrorKind::OutOfRange {
                index: i64::MAX,
                n_images: 2
            }
        );
    }

    proptest! {
        #[test]
        fn never_panics(text in ".{0,200}", n in 0usize..6) {
            let _ = parse_verdict(Stage::Ranking, &text, n);
            let _ = parse_verdict(Stage::Confirmation, &text, n);
        }

        #[test]
        fn valid_rankings_round_trip(perm in Just((0usize..5).collect::<Vec<_>>()).prop_shuffle(), keep in 1usize..=5) {
            let ranking: Vec<usize> = perm.into_iter().take(keep).collect();
            let text = format!("Reasoning [4, 4] ...\n**Final Ranking**: {ranking:?}");
            prop_assert_eq!(parse_verdict(Stage::Ranking, &text, 5).unwrap(), VerdictPayload::Ranking(ranking));
        }
    }
}
