//! Deterministic rule-based English annotator.
//!
//! Closed-class lexicons, suffix rules and the verb morphology tables give
//! universal POS tags; noun chunks are `DET? (ADJ|NUM)* (NOUN|PROPN)+` runs
//! plus personal pronouns; entities are proper-noun runs classified by small
//! gazetteers; SRL frames attach the nearest left noun phrase as subject and
//! label right-hand phrases by their preposition.

use super::{morph, Annotation, AnalysisError, AnnotatorProvider, ChunkSpan, EntitySpan, RoleSpan, SrlFrame, Token};
use crate::text;

const DETERMINERS: &[&str] = &[
    "a", "all", "an", "another", "any", "both", "each", "either", "every", "its", "my", "neither",
    "our", "some", "the", "their", "your", "his",
];
const DEMONSTRATIVES: &[&str] = &["her", "that", "these", "this", "those", "no", "what", "which"];
const PRONOUNS: &[&str] = &[
    "anybody", "anyone", "anything", "everybody", "everyone", "everything", "he", "herself",
    "him", "himself", "i", "it", "itself", "me", "mine", "myself", "nobody", "nothing", "ours",
    "ourselves", "she", "somebody", "someone", "something", "them", "themselves", "they", "us",
    "we", "who", "whom", "you", "yours", "yourself", "yourselves",
];
const PERSONAL: &[&str] = &[
    "he", "her", "herself", "him", "himself", "i", "it", "itself", "me", "myself", "ourselves",
    "she", "them", "themselves", "these", "they", "this", "those", "that", "us", "we", "you",
    "yourself", "yourselves",
];
const PREPOSITIONS: &[&str] = &[
    "about", "across", "after", "against", "around", "at", "before", "behind", "between", "by",
    "during", "for", "from", "in", "inside", "into", "near", "of", "off", "on", "onto", "outside",
    "over", "per", "through", "till", "toward", "towards", "under", "until", "via", "with",
    "within", "without",
];
const LOCATIVE_PREPS: &[&str] = &[
    "across", "around", "at", "behind", "between", "in", "inside", "near", "on", "outside", "over",
    "through", "under", "within",
];
const MODALS: &[&str] = &[
    "can", "could", "may", "might", "must", "shall", "should", "will", "would", "'ll", "’ll", "'d",
    "’d", "ca", "wo",
];
const BE_HAVE_DO: &[&str] = &[
    "am", "are", "be", "been", "being", "is", "was", "were", "'m", "’m", "'re", "’re", "'ve", "’ve",
    "have", "has", "had", "do", "does", "did",
];
const BE_FORMS: &[&str] = &["am", "are", "be", "been", "being", "is", "was", "were", "'m", "’m", "'re", "’re", "'s", "’s"];
const CCONJ: &[&str] = &["and", "but", "nor", "or"];
pub(crate) const CAUSAL_MARKERS: &[&str] = &["as", "because", "cos", "cuz", "since"];
const SCONJ: &[&str] = &[
    "although", "as", "because", "cos", "cuz", "if", "since", "so", "though", "unless", "when",
    "whether", "while",
];
const ADVERBS: &[&str] = &[
    "again", "ago", "almost", "already", "also", "always", "anyway", "away", "back", "definitely",
    "even", "ever", "finally", "hence", "here", "how", "however", "instead", "just", "later",
    "maybe", "never", "now", "often", "once", "only", "probably", "quite", "rather", "really",
    "sometimes", "soon", "still", "then", "there", "therefore", "thus", "today", "together",
    "tomorrow", "tonight", "too", "usually", "very", "where", "why", "yesterday", "yet",
];
const TEMPORAL: &[&str] = &[
    "afternoon", "evening", "later", "morning", "night", "now", "soon", "today", "tomorrow",
    "tonight", "week", "weekend", "month", "year", "yesterday",
];
const WEEKDAYS_MONTHS: &[&str] = &[
    "monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday", "january",
    "february", "march", "april", "may", "june", "july", "august", "september", "october",
    "november", "december", "christmas", "easter",
];
const INTERJECTIONS: &[&str] = &[
    "bye", "hello", "hey", "hi", "lol", "oh", "ok", "okay", "omg", "please", "thanks", "wow",
    "yeah", "yes",
];
const ADJECTIVES: &[&str] = &[
    "available", "bad", "best", "better", "big", "bloody", "busy", "cheap", "cold", "cool",
    "different", "early", "easy", "excited", "expensive", "favorite", "favourite", "few", "final",
    "fine", "first", "free", "full", "good", "great", "happy", "hard", "high", "hot", "huge",
    "important", "interesting", "last", "late", "little", "local", "long", "low", "lucky", "main",
    "many", "more", "most", "much", "new", "next", "nice", "old", "other", "own", "possible",
    "ready", "real", "right", "sad", "same", "second", "several", "short", "small", "sorry",
    "special", "sure", "third", "tired", "warm", "whole", "worse", "worst", "wrong", "young",
];
const NOT_LY_ADVERBS: &[&str] = &[
    "ally", "apply", "belly", "family", "fly", "friendly", "holy", "jelly", "likely", "lively",
    "lonely", "lovely", "reply", "silly", "supply", "ugly", "july",
];
const NUMBER_WORDS: &[&str] = &[
    "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven",
    "twelve", "twenty", "thirty", "forty", "fifty", "hundred", "thousand", "million",
];
const PLACES: &[&str] = &[
    "africa", "amsterdam", "asia", "australia", "barcelona", "berlin", "boston", "brazil",
    "california", "canada", "chicago", "china", "dublin", "england", "europe", "florida",
    "france", "germany", "india", "ireland", "italy", "japan", "lisbon", "london", "los angeles",
    "madrid", "melbourne", "mexico", "new york", "paris", "poland", "prague", "rome", "scotland",
    "spain", "sydney", "texas", "tokyo", "uk", "usa", "vienna", "warsaw",
];
const ORG_WORDS: &[&str] = &[
    "airlines", "amazon", "bank", "club", "college", "company", "corp", "facebook", "google",
    "group", "hospital", "ikea", "inc", "ltd", "microsoft", "netflix", "uber", "university",
];

fn has(list: &[&str], w: &str) -> bool {
    list.contains(&w)
}

#[derive(Debug, Clone)]
struct Tok {
    text: String,
    lower: String,
    start: usize,
    end: usize,
    tag: &'static str,
}

fn is_punct(s: &str) -> bool {
    !s.chars().any(char::is_alphanumeric)
}

fn is_number(s: &str) -> bool {
    s.chars().next().is_some_and(|c| c.is_ascii_digit()) || has(NUMBER_WORDS, s)
}

fn is_time(s: &str) -> bool {
    s.contains(':') && s.chars().next().is_some_and(|c| c.is_ascii_digit())
}

/// Splits `I'm`, `don't`, `Lucas's` into word + clitic.
fn split_clitics(tokens: Vec<text::WordToken>) -> Vec<text::WordToken> {
    const CLITICS: &[&str] = &["m", "re", "s", "ve", "ll", "d"];
    let mut out = Vec::with_capacity(tokens.len());
    for t in tokens {
        let chars: Vec<char> = t.text.chars().collect();
        let lower = t.text.to_lowercase();
        if let Some(pos) = lower.find("n't").or_else(|| lower.find("n’t")).filter(|&p| p > 0) {
            let cut = lower[..pos].chars().count();
            if cut + 3 == chars.len() {
                let (a, b) = chars.split_at(cut);
                out.push(text::WordToken { text: a.iter().collect(), start: t.start, end: t.start + cut });
                out.push(text::WordToken { text: b.iter().collect(), start: t.start + cut, end: t.end });
                continue;
            }
        }
        let apos = chars.iter().position(|&c| c == '\'' || c == '’');
        match apos {
            Some(p) if p > 0 && CLITICS.contains(&chars[p + 1..].iter().collect::<String>().to_lowercase().as_str()) => {
                out.push(text::WordToken { text: chars[..p].iter().collect(), start: t.start, end: t.start + p });
                out.push(text::WordToken { text: chars[p..].iter().collect(), start: t.start + p, end: t.end });
            }
            _ => out.push(t),
        }
    }
    out
}

fn is_closed(w: &str) -> bool {
    [DETERMINERS, DEMONSTRATIVES, PRONOUNS, PREPOSITIONS, MODALS, BE_HAVE_DO, CCONJ, SCONJ, ADVERBS, INTERJECTIONS]
        .iter()
        .any(|l| has(l, w))
        || w == "to"
        || w == "not"
        || w == "n't"
        || w == "n’t"
        || is_punct(w)
        || is_number(w)
}

fn is_adjective(w: &str) -> bool {
    has(ADJECTIVES, w)
        || (w.len() > 5
            && ["ful", "ous", "ive", "able", "ible", "ical", "less", "ish"].iter().any(|s| w.ends_with(s)))
}

fn is_ly_adverb(w: &str) -> bool {
    w.len() > 4 && w.ends_with("ly") && !has(NOT_LY_ADVERBS, w)
}

fn verbish(w: &str) -> bool {
    morph::is_known_lemma(&morph::lemmatize(w))
}

fn sentence_initial(toks: &[Tok], i: usize) -> bool {
    i == 0 || matches!(toks[i - 1].text.as_str(), "." | "!" | "?" | "\"" | "“" | ":" | "(")
}

fn tag_tokens(toks: &mut [Tok]) {
    let n = toks.len();
    // Closed classes first.
    for i in 0..n {
        let w = toks[i].lower.clone();
        let next_open = i + 1 < n && !is_closed(&toks[i + 1].lower) && toks[i + 1].lower.chars().all(char::is_alphabetic);
        toks[i].tag = if is_punct(&w) {
            "PUNCT"
        } else if is_number(&w) {
            "NUM"
        } else if w == "'s" || w == "’s" {
            ""
        } else if w == "not" || w == "n't" || w == "n’t" {
            "PART"
        } else if has(DEMONSTRATIVES, &w) {
            if next_open { "DET" } else if w == "no" { "INTJ" } else { "PRON" }
        } else if has(DETERMINERS, &w) {
            "DET"
        } else if w == "there" {
            if i + 1 < n && has(BE_FORMS, &toks[i + 1].lower) { "PRON" } else { "ADV" }
        } else if has(PRONOUNS, &w) {
            "PRON"
        } else if w == "to" {
            let base_verb_next = i + 1 < n
                && verbish(&toks[i + 1].lower)
                && morph::verb_form(&toks[i + 1].lower) == morph::VerbForm::Base
                && !is_closed(&toks[i + 1].lower);
            if base_verb_next { "PART" } else { "ADP" }
        } else if has(PREPOSITIONS, &w) {
            "ADP"
        } else if has(MODALS, &w) || has(BE_HAVE_DO, &w) {
            "AUX"
        } else if has(CCONJ, &w) {
            "CCONJ"
        } else if has(SCONJ, &w) {
            "SCONJ"
        } else if has(ADVERBS, &w) {
            "ADV"
        } else if has(INTERJECTIONS, &w) {
            "INTJ"
        } else {
            ""
        };
    }
    // Open classes, left to right.
    for i in 0..n {
        if toks[i].lower == "'s" || toks[i].lower == "’s" {
            let after_nominal = i > 0 && matches!(toks[i - 1].tag, "NOUN" | "PROPN");
            toks[i].tag = if after_nominal { "PART" } else { "AUX" };
            continue;
        }
        if !toks[i].tag.is_empty() {
            continue;
        }
        let w = toks[i].lower.clone();
        let capitalized = toks[i].text.chars().next().is_some_and(char::is_uppercase);
        let prev = if i > 0 { toks[i - 1].tag } else { "" };
        let nominal_context = matches!(prev, "DET" | "ADJ" | "NUM") || (prev == "PART" && has(&["'s", "’s"], &toks[i - 1].lower));
        let known_open = verbish(&w) || is_adjective(&w) || is_ly_adverb(&w) || has(WEEKDAYS_MONTHS, &w);
        toks[i].tag = if capitalized && (!sentence_initial(toks, i) || !known_open || has(WEEKDAYS_MONTHS, &w)) {
            "PROPN"
        } else if nominal_context {
            if is_adjective(&w) { "ADJ" } else { "NOUN" }
        } else if verbish(&w) && !w.contains('-') {
            "VERB"
        } else if is_adjective(&w) {
            "ADJ"
        } else if is_ly_adverb(&w) {
            "ADV"
        } else {
            "NOUN"
        };
    }
    // be/have/do: auxiliary when a verb follows shortly, otherwise have/do are main verbs.
    for i in 0..n {
        if toks[i].tag != "AUX" || has(MODALS, &toks[i].lower) || has(BE_FORMS, &toks[i].lower) {
            continue;
        }
        let verb_follows = toks[i + 1..]
            .iter()
            .take(3)
            .take_while(|t| matches!(t.tag, "ADV" | "PART" | "PRON" | "VERB" | "AUX"))
            .any(|t| t.tag == "VERB");
        if !verb_follows {
            toks[i].tag = "VERB";
        }
    }
}

fn noun_chunks(toks: &[Tok]) -> Vec<(usize, usize)> {
    let n = toks.len();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let t = &toks[i];
        if t.tag == "PRON" && has(PERSONAL, &t.lower) {
            out.push((i, i + 1));
            i += 1;
            continue;
        }
        if matches!(t.tag, "DET" | "ADJ" | "NUM" | "NOUN" | "PROPN") {
            let mut j = i;
            if toks[j].tag == "DET" {
                j += 1;
            }
            while j < n && matches!(toks[j].tag, "ADJ" | "NUM") {
                j += 1;
            }
            let head_start = j;
            while j < n && matches!(toks[j].tag, "NOUN" | "PROPN") {
                j += 1;
            }
            if j > head_start {
                out.push((i, j));
                i = j;
                continue;
            }
        }
        i += 1;
    }
    out
}

fn time_suffix_len(toks: &[Tok], i: usize) -> usize {
    let w = |k: usize| toks.get(k).map(|t| t.lower.as_str()).unwrap_or("");
    match w(i) {
        "pm" | "am" | "p.m." | "a.m." | "p.m" | "a.m" => 1,
        "p" | "a" if w(i + 1) == "." && w(i + 2) == "m" => {
            if w(i + 3) == "." { 4 } else { 3 }
        }
        _ => 0,
    }
}

/// (start token, end token, label)
fn entities(toks: &[Tok]) -> Vec<(usize, usize, String)> {
    let n = toks.len();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let t = &toks[i];
        if t.tag == "PROPN" {
            let mut j = i;
            while j < n && toks[j].tag == "PROPN" {
                j += 1;
            }
            let phrase: Vec<&str> = toks[i..j].iter().map(|t| t.lower.as_str()).collect();
            let phrase = phrase.join(" ");
            let label = if has(PLACES, &phrase) {
                "GPE"
            } else if toks[i..j].iter().all(|t| has(WEEKDAYS_MONTHS, &t.lower)) {
                "DATE"
            } else if toks[i..j].iter().any(|t| has(ORG_WORDS, &t.lower)) {
                "ORG"
            } else {
                "PERSON"
            };
            out.push((i, j, label.to_string()));
            i = j;
            continue;
        }
        if t.tag == "NUM" {
            let suffix = time_suffix_len(toks, i + 1);
            let label = if is_time(&t.lower) || suffix > 0 { "TIME" } else { "CARDINAL" };
            out.push((i, i + 1 + suffix, label.to_string()));
            i += 1 + suffix;
            continue;
        }
        if matches!(t.lower.as_str(), "today" | "tomorrow" | "yesterday") {
            out.push((i, i + 1, "DATE".into()));
        } else if t.lower == "tonight" {
            out.push((i, i + 1, "TIME".into()));
        } else if matches!(t.lower.as_str(), "next" | "last" | "this")
            && toks.get(i + 1).is_some_and(|n| matches!(n.lower.as_str(), "week" | "month" | "year" | "weekend"))
        {
            out.push((i, i + 2, "DATE".into()));
            i += 2;
            continue;
        }
        i += 1;
    }
    out
}

fn is_boundary(t: &Tok) -> bool {
    matches!(t.tag, "CCONJ" | "SCONJ")
        || (t.tag == "PUNCT" && matches!(t.text.as_str(), "," | ";" | ":" | "." | "!" | "?" | "(" | ")" | "\u{2014}"))
        || matches!(t.lower.as_str(), "who" | "which")
}

struct Phrases<'a> {
    chunks: &'a [(usize, usize)],
    ents: &'a [(usize, usize, String)],
}

impl Phrases<'_> {
    /// Widest noun chunk or entity covering token `i`.
    fn covering(&self, i: usize) -> (usize, usize) {
        let mut best = (i, i + 1);
        let ents = self.ents.iter().map(|(s, e, _)| (*s, *e));
        for (s, e) in self.chunks.iter().copied().chain(ents) {
            if s <= i && i < e && e - s > best.1 - best.0 {
                best = (s, e);
            }
        }
        best
    }

    fn temporal(&self, toks: &[Tok], s: usize, e: usize) -> bool {
        self.ents.iter().any(|(es, ee, l)| *es <= s && e <= *ee && (l == "DATE" || l == "TIME"))
            || self.ents.iter().any(|(es, ee, l)| s <= *es && *ee <= e && (l == "DATE" || l == "TIME"))
            || toks[s..e].last().is_some_and(|t| has(TEMPORAL, &t.lower) || has(WEEKDAYS_MONTHS, &t.lower))
    }
}

fn frames(toks: &[Tok], phrases: &Phrases<'_>) -> Vec<Vec<(String, usize, usize)>> {
    let n = toks.len();
    let mut out = Vec::new();
    for v in 0..n {
        if toks[v].tag != "VERB" {
            continue;
        }
        let clause_start = (0..v).rev().find(|&k| is_boundary(&toks[k])).map_or(0, |k| k + 1);
        let clause_end = (v + 1..n).find(|&k| is_boundary(&toks[k])).unwrap_or(n);
        let mut args: Vec<(String, usize, usize)> = vec![("V".into(), v, v + 1)];

        let passive = {
            let mut k = v;
            while k > clause_start && matches!(toks[k - 1].tag, "ADV" | "PART") {
                k -= 1;
            }
            k > clause_start
                && toks[k - 1].tag == "AUX"
                && has(BE_FORMS, &toks[k - 1].lower)
                && matches!(morph::verb_form(&toks[v].lower), morph::VerbForm::Past | morph::VerbForm::PastParticiple)
        };

        // Left side: pre-verbal adverbs, then the nearest noun phrase.
        let mut k = v;
        let mut subject_taken = false;
        while k > clause_start {
            k -= 1;
            let t = &toks[k];
            match t.tag {
                "ADV" => {
                    let role = if has(TEMPORAL, &t.lower) { "ARGM-TMP" } else { "ARGM-ADV" };
                    args.push((role.into(), k, k + 1));
                }
                "PART" if t.lower != "to" => args.push(("ARGM-NEG".into(), k, k + 1)),
                "NOUN" | "PROPN" | "PRON" | "NUM" if !subject_taken => {
                    let (s, e) = phrases.covering(k);
                    let role = if phrases.temporal(toks, s, e) {
                        "ARGM-TMP"
                    } else {
                        subject_taken = true;
                        if passive { "ARG1" } else { "ARG0" }
                    };
                    args.push((role.into(), s, e));
                    k = s;
                }
                _ => {}
            }
        }

        // Right side.
        let mut i = v + 1;
        let mut objects = if passive { 1 } else { 0 };
        let core_role = |objects: usize| format!("ARG{}", (objects + 1).min(5));
        let mut arg2_taken = false;
        while i < clause_end {
            let t = &toks[i];
            match t.tag {
                "ADP" => {
                    let obj_start = i + 1;
                    if obj_start < clause_end && matches!(toks[obj_start].tag, "DET" | "ADJ" | "NUM" | "NOUN" | "PROPN" | "PRON") {
                        let (_, e) = phrases.covering(obj_start);
                        let e = e.min(clause_end).max(obj_start + 1);
                        let role = if phrases.temporal(toks, obj_start, e) {
                            "ARGM-TMP".to_string()
                        } else if has(LOCATIVE_PREPS, &t.lower) {
                            "ARGM-LOC".to_string()
                        } else if !arg2_taken {
                            arg2_taken = true;
                            "ARG2".to_string()
                        } else {
                            "ARGM-ADV".to_string()
                        };
                        args.push((role, i, e));
                        i = e;
                        continue;
                    }
                }
                "PART" if t.lower == "to" => {
                    let role = if objects == 0 { core_role(objects) } else { "ARGM-PRP".into() };
                    args.push((role, i, clause_end));
                    break;
                }
                "PART" => args.push(("ARGM-NEG".into(), i, i + 1)),
                "ADV" => {
                    let role = if has(TEMPORAL, &t.lower) {
                        "ARGM-TMP"
                    } else if matches!(t.lower.as_str(), "here" | "there") {
                        "ARGM-LOC"
                    } else {
                        "ARGM-ADV"
                    };
                    args.push((role.into(), i, i + 1));
                }
                "DET" | "ADJ" | "NUM" | "NOUN" | "PROPN" | "PRON" => {
                    let (_, e) = phrases.covering(i);
                    let e = e.min(clause_end).max(i + 1);
                    let role = if phrases.temporal(toks, i, e) {
                        "ARGM-TMP".to_string()
                    } else {
                        let r = core_role(objects);
                        objects += 1;
                        r
                    };
                    args.push((role, i, e));
                    i = e;
                    continue;
                }
                "VERB" => {
                    if objects == 0 {
                        args.push((core_role(objects), i, clause_end));
                    }
                    break;
                }
                _ => {}
            }
            i += 1;
        }

        if clause_end < n && has(CAUSAL_MARKERS, &toks[clause_end].lower) && toks[clause_end].tag == "SCONJ" {
            let stop = (clause_end + 1..n)
                .find(|&k| matches!(toks[k].text.as_str(), "." | "!" | "?"))
                .unwrap_or(n);
            if stop > clause_end + 1 {
                args.push(("ARGM-CAU".into(), clause_end, stop));
            }
        }
        out.push(args);
    }
    out
}

/// Rule-based annotator requiring no external models.
#[derive(Debug, Default, Clone)]
pub struct HeuristicProvider;

impl HeuristicProvider {
    pub fn new() -> Self {
        HeuristicProvider
    }
}

impl AnnotatorProvider for HeuristicProvider {
    fn name(&self) -> &str {
        "heuristic"
    }

    fn annotate(&self, input: &str) -> Result<Annotation, AnalysisError> {
        let mut toks: Vec<Tok> = split_clitics(text::word_tokens(input))
            .into_iter()
            .map(|t| Tok { lower: t.text.to_lowercase(), text: t.text, start: t.start, end: t.end, tag: "" })
            .collect();
        tag_tokens(&mut toks);
        let chunks = noun_chunks(&toks);
        let ents = entities(&toks);
        let phrases = Phrases { chunks: &chunks, ents: &ents };
        let frame_spans = frames(&toks, &phrases);

        let span = |s: usize, e: usize| (toks[s].start, toks[e - 1].end);
        let tokens = toks
            .iter()
            .map(|t| Token {
                text: t.text.clone(),
                start: t.start,
                end: t.end,
                lemma: matches!(t.tag, "VERB" | "AUX").then(|| morph::lemmatize(&t.text)),
            })
            .collect();
        Ok(Annotation {
            tokens,
            pos: toks.iter().map(|t| t.tag.to_string()).collect(),
            entities: ents
                .iter()
                .map(|(s, e, label)| {
                    let (start, end) = span(*s, *e);
                    EntitySpan { start, end, label: label.clone() }
                })
                .collect(),
            noun_chunks: chunks
                .iter()
                .map(|&(s, e)| {
                    let (start, end) = span(s, e);
                    ChunkSpan { start, end }
                })
                .collect(),
            srl_frames: frame_spans
                .into_iter()
                .map(|args| SrlFrame {
                    args: args
                        .into_iter()
                        .map(|(role, s, e)| {
                            let (start, end) = span(s, e);
                            RoleSpan { role, start, end }
                        })
                        .collect(),
                })
                .collect(),
        })
    }
}
