//! Parsing `Veracity: X.` verdict lines out of free-form model output.

use thiserror::Error;

use crate::model::{ClaimLabel2, VeracityLabel3};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no verdict found in output: {excerpt:?}")]
pub struct NoVerdict {
    pub excerpt: String,
}

const MARKER: &str = "veracity:";

fn excerpt(raw: &str) -> String {
    let tail: String = raw.chars().rev().take(80).collect::<Vec<_>>().into_iter().rev().collect();
    tail
}

/// Finds the last `Veracity:` marker (case-insensitive, not glued to a longer
/// word such as `sub-claim-veracity:`) and returns the token after it with a
/// trailing period and markdown emphasis stripped.
fn last_verdict_token(raw: &str) -> Option<String> {
    let lower = raw.to_lowercase();
    if lower.len() != raw.len() {
        // lowercase changed byte offsets; fall back to an ASCII-only fold
        return last_verdict_token(&raw.chars().map(|c| if c.is_ascii() { c } else { '?' }).collect::<String>());
    }
    let mut found = None;
    let mut from = 0;
    while let Some(pos) = lower[from..].find(MARKER) {
        let at = from + pos;
        let prev = lower[..at].chars().next_back();
        let standalone = !matches!(prev, Some(c) if c.is_alphanumeric() || c == '-' || c == '_');
        if standalone {
            found = Some(at);
        }
        from = at + MARKER.len();
    }
    let at = found?;
    let rest = raw[at + MARKER.len()..].trim_start();
    let token = rest.split_whitespace().next().unwrap_or("");
    let token = token.trim_matches('*').trim_end_matches('.').trim_matches('*');
    Some(token.to_ascii_uppercase())
}

pub fn parse_claim_verdict(raw: &str) -> Result<ClaimLabel2, NoVerdict> {
    match last_verdict_token(raw).as_deref() {
        Some("T") => Ok(ClaimLabel2::T),
        Some("F") => Ok(ClaimLabel2::F),
        _ => Err(NoVerdict { excerpt: excerpt(raw) }),
    }
}

pub fn parse_subclaim_verdict(raw: &str) -> Result<VeracityLabel3, NoVerdict> {
    match last_verdict_token(raw).as_deref() {
        Some("T") => Ok(VeracityLabel3::T),
        Some("F") => Ok(VeracityLabel3::F),
        Some("U") => Ok(VeracityLabel3::U),
        _ => Err(NoVerdict { excerpt: excerpt(raw) }),
    }
}

/// The canonical verdict line, e.g. `Veracity: T.`
pub fn format_verdict(label: impl Into<VeracityLabel3>) -> String {
    format!("Veracity: {}.", label.into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn journalist_output() {
        assert_eq!(
            parse_claim_verdict("<|journalist|> consistent evidence.\nVeracity: T."),
            Ok(ClaimLabel2::T)
        );
        assert_eq!(parse_claim_verdict("Veracity: F"), Ok(ClaimLabel2::F));
        assert_eq!(parse_claim_verdict("veracity:f."), Ok(ClaimLabel2::F));
        assert_eq!(parse_claim_verdict("Veracity: **T**"), Ok(ClaimLabel2::T));
    }

    #[test]
    fn missing_or_malformed_verdict() {
        assert!(parse_claim_verdict("I think it is true").is_err());
        assert!(parse_claim_verdict("Veracity: True").is_err());
        assert!(parse_claim_verdict("Veracity: T/F.").is_err());
        assert!(parse_claim_verdict("Veracity: U.").is_err());
        assert!(parse_subclaim_verdict("").is_err());
        assert!(parse_subclaim_verdict("Veracity:").is_err());
    }

    #[test]
    fn subclaim_labels() {
        assert_eq!(parse_subclaim_verdict("Veracity: U."), Ok(VeracityLabel3::U));
        assert_eq!(
            parse_subclaim_verdict("... Veracity: T. Recheck: Veracity: F."),
            Ok(VeracityLabel3::F)
        );
    }

    #[test]
    fn embedded_marker_ignored() {
        let raw = "Veracity: T.\nsee sub-claim-veracity: F and preveracity: F";
        assert_eq!(parse_subclaim_verdict(raw), Ok(VeracityLabel3::T));
    }

    #[test]
    fn last_marker_wins_even_if_malformed() {
        assert!(parse_claim_verdict("Veracity: T. Final answer -> Veracity: maybe").is_err());
    }

    #[test]
    fn non_ascii_text_around_verdict() {
        assert_eq!(parse_claim_verdict("Düsseldorf İstanbul.\nVeracity: F."), Ok(ClaimLabel2::F));
    }

    proptest! {
        #[test]
        fn parse_inverts_format(prefix in "[ -~\n]{0,60}", l in 0usize..3) {
            let label = VeracityLabel3::ALL[l];
            let raw = format!("{prefix}\n{}", format_verdict(label));
            prop_assert_eq!(parse_subclaim_verdict(&raw), Ok(label));
            if let Some(c) = label.to_claim_label() {
                prop_assert_eq!(parse_claim_verdict(&format_verdict(c)), Ok(c));
            }
        }
    }
}
