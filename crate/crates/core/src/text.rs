//! Sentence splitting, tokenization and the verb heuristic.
//!
//! Everything here is dependency-free and deterministic; counts only need to
//! be reproducible, not linguistically exact.

/// Splits on `.`, `!` or `?` followed by whitespace or end of text.
/// Returns trimmed, non-empty sentences in order.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '!' | '?') {
            let boundary = match chars.peek() {
                None => true,
                Some(&(_, next)) => next.is_whitespace(),
            };
            if boundary {
                let end = i + c.len_utf8();
                let s = text[start..end].trim();
                if !s.is_empty() {
                    out.push(s);
                }
                start = end;
            }
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail);
    }
    out
}

pub fn sentence_count(text: &str) -> usize {
    split_sentences(text).len()
}

/// Lowercased word tokens. Apostrophes inside words are kept (`isn't`), curly
/// apostrophes are normalized.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        let c = if c == '\u{2019}' { '\'' } else { c };
        if c.is_alphanumeric() || (c == '\'' && !cur.is_empty()) {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            tokens.push(std::mem::take(&mut cur).trim_end_matches('\'').to_string());
        }
    }
    if !cur.is_empty() {
        tokens.push(cur.trim_end_matches('\'').to_string());
    }
    tokens
}

const CLOSED_CLASS: &[&str] = &[
    "a", "an", "the", "and", "or", "but", "if", "then", "than", "that", "this", "these", "those",
    "of", "in", "on", "at", "to", "for", "from", "by", "with", "about", "as", "into", "over",
    "after", "before", "during", "under", "between", "through", "up", "down", "out", "off",
    "he", "she", "it", "they", "we", "you", "i", "him", "her", "them", "us", "me", "his", "its",
    "their", "our", "your", "my", "who", "whom", "which", "what", "when", "where", "why", "how",
    "not", "no", "so", "very", "all", "some", "any", "each", "every", "many", "much", "more",
    "most", "other", "such", "only", "also", "just", "there", "here", "now", "today",
    "morning", "evening", "nothing", "thing", "something", "anything", "king", "ring", "wing",
    "spring", "string", "ceiling", "building", "red", "bed", "shed", "hundred", "need", "seed",
    "speed", "feed", "breed", "deed", "weed", "sled", "wed", "bred", "fled",
];

const COMMON_VERBS: &[&str] = &[
    "is", "are", "was", "were", "be", "been", "being", "am", "has", "have", "had", "do", "does",
    "did", "will", "would", "shall", "should", "can", "could", "may", "might", "must", "said",
    "says", "say", "told", "tell", "tells", "made", "make", "makes", "took", "take", "takes",
    "went", "go", "goes", "gone", "came", "come", "comes", "got", "get", "gets", "saw", "see",
    "sees", "seen", "knew", "know", "knows", "known", "thought", "think", "found", "find",
    "finds", "gave", "give", "gives", "given", "left", "leave", "held", "hold", "holds", "kept",
    "keep", "ran", "run", "runs", "shot", "shoot", "hit", "killed", "kill", "kills", "died",
    "die", "dies", "fell", "fall", "falls", "crashed", "crash", "crashes", "confirmed",
    "confirm", "confirms", "reported", "report", "reports", "claimed", "claim", "claims",
    "announced", "announce", "announces", "stated", "states", "lost", "lose", "won", "win",
    "flew", "fly", "flies", "became", "become", "becomes", "began", "begin", "begins", "brought",
    "bring", "brings", "met", "meet", "meets", "paid", "pay", "pays", "sent", "send", "sends",
    "stood", "stand", "stands", "wrote", "write", "writes", "written", "led", "lead", "leads",
];

/// Counts verbs with a small lexicon plus `-ed`/`-ing` inflections,
/// excluding closed-class words.
pub fn heuristic_verb_count(text: &str) -> usize {
    tokenize(text)
        .iter()
        .filter(|t| is_probable_verb(t))
        .count()
}

fn is_probable_verb(token: &str) -> bool {
    if CLOSED_CLASS.contains(&token) {
        return false;
    }
    if COMMON_VERBS.contains(&token) {
        return true;
    }
    if !token.chars().all(char::is_alphabetic) {
        return false;
    }
    let n = token.chars().count();
    (n > 4 && token.ends_with("ing")) || (n > 3 && token.ends_with("ed"))
}

/// Grammatical negation cues. The parity of their count in a sentence is its
/// polarity for the lexical verifier.
pub const NEGATION_CUES: &[&str] = &[
    "not", "no", "never", "none", "nobody", "nothing", "neither", "nor", "without", "cannot",
    "isn't", "aren't", "wasn't", "weren't", "don't", "doesn't", "didn't", "won't", "wouldn't",
    "can't", "couldn't", "shouldn't", "hasn't", "haven't", "hadn't", "mustn't", "ain't",
];

const STOPWORDS: &[&str] = &[
    "a", "an", "the", "and", "or", "but", "of", "in", "on", "at", "to", "for", "from", "by",
    "with", "as", "is", "are", "was", "were", "be", "been", "being", "it", "its", "this", "that",
    "these", "those", "has", "have", "had", "do", "does", "did", "will", "would", "there",
    "their", "they", "he", "she", "his", "her", "we", "our", "you", "your", "i", "so", "than",
    "then", "into", "about", "s",
];

pub fn is_negation(token: &str) -> bool {
    NEGATION_CUES.contains(&token)
}

/// Tokens that carry content: not stopwords, not negation cues.
pub fn content_words(text: &str) -> Vec<String> {
    let mut words: Vec<String> = tokenize(text)
        .into_iter()
        .filter(|t| !STOPWORDS.contains(&t.as_str()) && !is_negation(t))
        .collect();
    words.sort();
    words.dedup();
    words
}

pub fn negation_count(text: &str) -> usize {
    tokenize(text).iter().filter(|t| is_negation(t)).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sentences_split_on_terminal_punctuation() {
        assert_eq!(split_sentences("One. Two! Three?"), vec!["One.", "Two!", "Three?"]);
        assert_eq!(split_sentences("No terminal"), vec!["No terminal"]);
        assert_eq!(split_sentences("Pi is 3.14 today. Yes."), vec!["Pi is 3.14 today.", "Yes."]);
        assert_eq!(sentence_count(""), 0);
        assert_eq!(sentence_count("   "), 0);
    }

    #[test]
    fn tokens_keep_contractions() {
        assert_eq!(tokenize("It isn’t TRUE, ok?"), vec!["it", "isn't", "true", "ok"]);
    }

    #[test]
    fn verbs_counted_conservatively() {
        assert_eq!(heuristic_verb_count("The plane crashed and police confirmed it."), 2);
        assert_eq!(heuristic_verb_count("Red bed in the morning"), 0);
        assert_eq!(heuristic_verb_count("Gunmen were shooting"), 2);
    }

    #[test]
    fn negation_excluded_from_content() {
        assert_eq!(content_words("The plane did not crash"), vec!["crash", "plane"]);
        assert_eq!(negation_count("It did not, never happen"), 2);
    }
}
