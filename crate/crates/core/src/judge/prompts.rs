//! Prompt texts, stored verbatim under `prompts/`.

pub const SYSTEM: &str = include_str!("../../prompts/system.txt");
pub const RANKING: &str = include_str!("../../prompts/ranking.txt");
pub const CONFIRMATION: &str = include_str!("../../prompts/confirmation.txt");

/// Ranking prompt for `n` candidates. The text already allows fewer than
/// five images, so it is sent unchanged for every count.
pub fn ranking_prompt(_n: usize) -> String {
    RANKING.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use sha2::{Digest, Sha256};

    fn sha(s: &str) -> String {
        Sha256::digest(s.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    #[test]
    fn golden_prompts_are_unchanged() {
        assert_eq!(
            sha(SYSTEM),
            "3914ad0cb20d8964bf6a0f2b14e9d900bde7e80ddbd11b339375022ce8d6d231"
        );
        assert_eq!(
            sha(RANKING),
            "f56dab8bee84931608d4630d5d7599ea562f35680ffc8ed0c35af649da6d317a"
        );
        assert_eq!(
            sha(CONFIRMATION),
            "55d2d42a160c29dc71b19e31227baa11c195d67ca2324f3e5ae81bd1c258dfa5"
        );
    }

    #[test]
    fn rendered_ranking_prompt_is_the_golden_text() {
        for n in 1..=5 {
            assert_eq!(ranking_prompt(n), RANKING);
        }
    }

    #[test]
    fn prompts_keep_their_output_contracts() {
        assert!(SYSTEM.starts_with("##Safe Drone Landing Assistant"));
        assert!(RANKING.contains("**Final Ranking**"));
        assert!(CONFIRMATION.contains("1 in the indices array to confirm or 0 to cancel"));
    }
}
