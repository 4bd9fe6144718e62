//! Code-point offset helpers and a plain word tokenizer.
//!
//! Every offset in the toolkit is a half-open `[start, end)` range of
//! Unicode scalar values, never bytes.

/// Byte index of the `char_idx`-th code point (or `text.len()` at the end).
fn byte_index(text: &str, char_idx: usize) -> Option<usize> {
    if char_idx == 0 {
        return Some(0);
    }
    let mut count = 0;
    for (byte, _) in text.char_indices() {
        if count == char_idx {
            return Some(byte);
        }
        count += 1;
    }
    (count == char_idx).then_some(text.len())
}

pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

pub fn slice_chars(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let from = byte_index(text, start)?;
    let to = byte_index(text, end)?;
    Some(&text[from..to])
}

/// Replaces `[start, end)` with `replacement`.
pub fn splice_chars(text: &str, start: usize, end: usize, replacement: &str) -> Option<String> {
    if start > end {
        return None;
    }
    let from = byte_index(text, start)?;
    let to = byte_index(text, end)?;
    let mut out = String::with_capacity(text.len() + replacement.len());
    out.push_str(&text[..from]);
    out.push_str(replacement);
    out.push_str(&text[to..]);
    Some(out)
}

/// A word-level token with code-point offsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordToken {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\'' || c == '’' || c == '-' || c == ':' || c == '.'
}

/// Splits on whitespace, then peels punctuation off word edges.
///
/// Internal apostrophes, hyphens, colons and periods stay attached so
/// `9:45`, `p.m` and `I'm` survive as one token; a trailing period is split
/// off unless the token is a single letter abbreviation chain (`p.m.`).
pub fn word_tokens(text: &str) -> Vec<WordToken> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let chunk_start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        split_chunk(&chars, chunk_start, i, &mut tokens);
    }
    tokens
}

fn split_chunk(chars: &[char], start: usize, end: usize, out: &mut Vec<WordToken>) {
    let mut lo = start;
    let mut hi = end;
    let mut trailing = Vec::new();
    while lo < hi && !chars[lo].is_alphanumeric() {
        out.push(token(chars, lo, lo + 1));
        lo += 1;
    }
    while hi > lo && !chars[hi - 1].is_alphanumeric() {
        // Keep the final period of abbreviations like `p.m.`
        if chars[hi - 1] == '.' && is_abbreviation(&chars[lo..hi]) {
            break;
        }
        trailing.push(token(chars, hi - 1, hi));
        hi -= 1;
    }
    if lo < hi {
        let mut seg = lo;
        for j in lo..hi {
            if !is_word_char(chars[j]) {
                if seg < j {
                    out.push(token(chars, seg, j));
                }
                out.push(token(chars, j, j + 1));
                seg = j + 1;
            }
        }
        if seg < hi {
            out.push(token(chars, seg, hi));
        }
    }
    out.extend(trailing.into_iter().rev());
}

fn is_abbreviation(chars: &[char]) -> bool {
    // x.y. pattern: alternating single letters and periods
    chars.len() >= 4
        && chars.iter().enumerate().all(|(i, c)| if i % 2 == 0 { c.is_alphabetic() } else { *c == '.' })
}

fn token(chars: &[char], start: usize, end: usize) -> WordToken {
    WordToken { text: chars[start..end].iter().collect(), start, end }
}

/// Whether the word sequence of `needle` occurs contiguously in `haystack`
/// (case-insensitive, token-aligned).
pub fn contains_phrase(haystack: &str, needle: &str) -> bool {
    let hay: Vec<String> = word_tokens(haystack).into_iter().map(|t| t.text.to_lowercase()).collect();
    let pat: Vec<String> = word_tokens(needle).into_iter().map(|t| t.text.to_lowercase()).collect();
    if pat.is_empty() {
        return false;
    }
    hay.windows(pat.len()).any(|w| w == pat.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn words(text: &str) -> Vec<String> {
        word_tokens(text).into_iter().map(|t| t.text).collect()
    }

    #[test]
    fn tokenizes_punctuation() {
        assert_eq!(words("Lucas is waiting at the airport."), ["Lucas", "is", "waiting", "at", "the", "airport", "."]);
        assert_eq!(words("Where r u? I’m here"), ["Where", "r", "u", "?", "I’m", "here"]);
        assert_eq!(words("at 9:45 p.m. today"), ["at", "9:45", "p.m.", "today"]);
        assert_eq!(words("(hello), world!"), ["(", "hello", ")", ",", "world", "!"]);
        assert!(words("   ").is_empty());
    }

    #[test]
    fn offsets_are_code_points() {
        let text = "Zoë bought crêpes.";
        for t in word_tokens(text) {
            assert_eq!(slice_chars(text, t.start, t.end).unwrap(), t.text);
        }
        assert_eq!(splice_chars(text, 0, 3, "Ann").unwrap(), "Ann bought crêpes.");
        assert_eq!(slice_chars(text, 4, 100), None);
    }

    #[test]
    fn phrase_containment_is_token_aligned() {
        assert!(contains_phrase("I'm waiting at the airport.", "the Airport"));
        assert!(!contains_phrase("the theatre", "he"));
    }

    proptest! {
        #[test]
        fn splice_then_slice(text in "\\PC{0,30}", a in 0usize..35, b in 0usize..35, rep in "\\PC{0,5}") {
            let (start, end) = if a <= b { (a, b) } else { (b, a) };
            let len = char_len(&text);
            match splice_chars(&text, start, end, &rep) {
                Some(out) => {
                    prop_assert!(end <= len);
                    prop_assert_eq!(slice_chars(&out, start, start + char_len(&rep)).unwrap(), rep.as_str());
                    prop_assert_eq!(char_len(&out), len - (end - start) + char_len(&rep));
                }
                None => prop_assert!(end > len),
            }
        }

        #[test]
        fn token_offsets_slice_back(text in "[a-zA-Z ,.'?!:0-9]{0,60}") {
            for t in word_tokens(&text) {
                prop_assert_eq!(slice_chars(&text, t.start, t.end).unwrap(), t.text.as_str());
            }
        }
    }
}
