use crate::model::Claim;
use crate::text;

/// Maps text to a verb count. Implementations must be deterministic.
pub trait VerbCounter {
    fn count_verbs(&self, text: &str) -> usize;
}

impl<F: Fn(&str) -> usize> VerbCounter for F {
    fn count_verbs(&self, text: &str) -> usize {
        self(text)
    }
}

/// Lexicon plus `-ed`/`-ing` suffix heuristic, see [`text::heuristic_verb_count`].
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicVerbCounter;

impl VerbCounter for HeuristicVerbCounter {
    fn count_verbs(&self, text: &str) -> usize {
        text::heuristic_verb_count(text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComplexityThresholds {
    pub min_sentences: usize,
    pub min_verbs: usize,
}

impl Default for ComplexityThresholds {
    fn default() -> Self {
        Self {
            min_sentences: 2,
            min_verbs: 3,
        }
    }
}

/// Keeps claims with at least `min_sentences` sentences and `min_verbs`
/// verbs. Both bounds are inclusive; input order is preserved.
pub fn complexity_filter<'a>(
    claims: impl IntoIterator<Item = &'a Claim>,
    thresholds: ComplexityThresholds,
    verb_counter: &dyn VerbCounter,
) -> Vec<&'a Claim> {
    claims
        .into_iter()
        .filter(|c| {
            text::sentence_count(&c.text) >= thresholds.min_sentences
                && verb_counter.count_verbs(&c.text) >= thresholds.min_verbs
        })
        .collect()
}
