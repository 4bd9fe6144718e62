//! English verb morphology: form detection, lemmatization and re-inflection.

use std::collections::HashMap;
use std::sync::OnceLock;

/// Morphological form of a verb token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VerbForm {
    Base,
    ThirdSingular,
    Past,
    PastParticiple,
    PresentParticiple,
}

/// (base, past, past participle)
const IRREGULAR: &[(&str, &str, &str)] = &[
    ("arise", "arose", "arisen"),
    ("awake", "awoke", "awoken"),
    ("bear", "bore", "borne"),
    ("beat", "beat", "beaten"),
    ("become", "became", "become"),
    ("begin", "began", "begun"),
    ("bend", "bent", "bent"),
    ("bet", "bet", "bet"),
    ("bind", "bound", "bound"),
    ("bite", "bit", "bitten"),
    ("bleed", "bled", "bled"),
    ("blow", "blew", "blown"),
    ("break", "broke", "broken"),
    ("breed", "bred", "bred"),
    ("bring", "brought", "brought"),
    ("build", "built", "built"),
    ("burst", "burst", "burst"),
    ("buy", "bought", "bought"),
    ("cast", "cast", "cast"),
    ("catch", "caught", "caught"),
    ("choose", "chose", "chosen"),
    ("cling", "clung", "clung"),
    ("come", "came", "come"),
    ("cost", "cost", "cost"),
    ("creep", "crept", "crept"),
    ("cut", "cut", "cut"),
    ("deal", "dealt", "dealt"),
    ("dig", "dug", "dug"),
    ("do", "did", "done"),
    ("draw", "drew", "drawn"),
    ("drink", "drank", "drunk"),
    ("drive", "drove", "driven"),
    ("eat", "ate", "eaten"),
    ("fall", "fell", "fallen"),
    ("feed", "fed", "fed"),
    ("feel", "felt", "felt"),
    ("fight", "fought", "fought"),
    ("find", "found", "found"),
    ("flee", "fled", "fled"),
    ("fly", "flew", "flown"),
    ("forbid", "forbade", "forbidden"),
    ("forget", "forgot", "forgotten"),
    ("forgive", "forgave", "forgiven"),
    ("freeze", "froze", "frozen"),
    ("get", "got", "got"),
    ("give", "gave", "given"),
    ("go", "went", "gone"),
    ("grind", "ground", "ground"),
    ("grow", "grew", "grown"),
    ("hang", "hung", "hung"),
    ("have", "had", "had"),
    ("hear", "heard", "heard"),
    ("hide", "hid", "hidden"),
    ("hit", "hit", "hit"),
    ("hold", "held", "held"),
    ("hurt", "hurt", "hurt"),
    ("keep", "kept", "kept"),
    ("kneel", "knelt", "knelt"),
    ("know", "knew", "known"),
    ("lay", "laid", "laid"),
    ("lead", "led", "led"),
    ("leave", "left", "left"),
    ("lend", "lent", "lent"),
    ("let", "let", "let"),
    ("light", "lit", "lit"),
    ("lose", "lost", "lost"),
    ("make", "made", "made"),
    ("mean", "meant", "meant"),
    ("meet", "met", "met"),
    ("mistake", "mistook", "mistaken"),
    ("overcome", "overcame", "overcome"),
    ("pay", "paid", "paid"),
    ("put", "put", "put"),
    ("quit", "quit", "quit"),
    ("read", "read", "read"),
    ("ride", "rode", "ridden"),
    ("ring", "rang", "rung"),
    ("rise", "rose", "risen"),
    ("run", "ran", "run"),
    ("say", "said", "said"),
    ("see", "saw", "seen"),
    ("seek", "sought", "sought"),
    ("sell", "sold", "sold"),
    ("send", "sent", "sent"),
    ("set", "set", "set"),
    ("shake", "shook", "shaken"),
    ("shine", "shone", "shone"),
    ("shoot", "shot", "shot"),
    ("show", "showed", "shown"),
    ("shrink", "shrank", "shrunk"),
    ("shut", "shut", "shut"),
    ("sing", "sang", "sung"),
    ("sink", "sank", "sunk"),
    ("sit", "sat", "sat"),
    ("sleep", "slept", "slept"),
    ("slide", "slid", "slid"),
    ("speak", "spoke", "spoken"),
    ("spend", "spent", "spent"),
    ("spin", "spun", "spun"),
    ("split", "split", "split"),
    ("spread", "spread", "spread"),
    ("stand", "stood", "stood"),
    ("steal", "stole", "stolen"),
    ("stick", "stuck", "stuck"),
    ("sting", "stung", "stung"),
    ("strike", "struck", "struck"),
    ("swear", "swore", "sworn"),
    ("sweep", "swept", "swept"),
    ("swim", "swam", "swum"),
    ("swing", "swung", "swung"),
    ("take", "took", "taken"),
    ("teach", "taught", "taught"),
    ("tear", "tore", "torn"),
    ("tell", "told", "told"),
    ("think", "thought", "thought"),
    ("throw", "threw", "thrown"),
    ("understand", "understood", "understood"),
    ("upset", "upset", "upset"),
    ("wake", "woke", "woken"),
    ("wear", "wore", "worn"),
    ("weep", "wept", "wept"),
    ("win", "won", "won"),
    ("wind", "wound", "wound"),
    ("withdraw", "withdrew", "withdrawn"),
    ("write", "wrote", "written"),
];

/// Common regular verbs, used to disambiguate lemma candidates.
const REGULAR: &[&str] = &[
    "accept", "add", "admit", "agree", "allow", "answer", "appear", "apply", "argue", "arrange",
    "arrive", "ask", "attend", "avoid", "bake", "belong", "blame", "book", "borrow", "bother",
    "call", "cancel", "care", "carry", "celebrate", "change", "charge", "chat", "check", "clean",
    "close", "collect", "commit", "compare", "complain", "complete", "confirm", "consider",
    "contact", "continue", "control", "cook", "copy", "count", "cover", "cry", "dance", "decide",
    "delay", "deliver", "describe", "design", "die", "discuss", "dress", "drop", "email", "end",
    "enjoy", "explain", "fail", "fill", "finish", "fix", "follow", "help", "hope", "hurry",
    "improve", "include", "introduce", "invite", "join", "joke", "jump", "kill", "kiss", "laugh",
    "learn", "lie", "like", "listen", "live", "look", "love", "manage", "marry", "mention",
    "message", "miss", "move", "need", "offer", "open", "order", "organise", "organize", "own",
    "paint", "park", "pass", "phone", "pick", "plan", "play", "post", "prefer", "prepare",
    "present", "print", "produce", "promise", "propose", "provide", "pull", "push", "reach",
    "realise", "realize", "receive", "recommend", "refer", "refuse", "regret", "relax",
    "remember", "remind", "rent", "repair", "reply", "report", "request", "rest", "return",
    "review", "save", "schedule", "search", "seem", "serve", "share", "shop", "sign", "smile",
    "solve", "sound", "start", "stay", "stop", "study", "suggest", "support", "suppose",
    "surprise", "talk", "taste", "text", "thank", "tie", "touch", "travel", "try", "turn",
    "type", "use", "visit", "vote", "wait", "walk", "want", "warn", "wash", "watch", "wish",
    "wonder", "work", "worry",
];

struct Tables {
    /// inflected (or base) form -> base
    lemma_of: HashMap<&'static str, &'static str>,
    by_base: HashMap<&'static str, (&'static str, &'static str)>,
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let mut lemma_of = HashMap::new();
        let mut by_base = HashMap::new();
        for &(base, past, pp) in IRREGULAR {
            by_base.insert(base, (past, pp));
            lemma_of.insert(base, base);
            lemma_of.entry(past).or_insert(base);
            lemma_of.entry(pp).or_insert(base);
        }
        for (form, base) in [
            ("is", "be"), ("am", "be"), ("are", "be"), ("was", "be"), ("were", "be"),
            ("been", "be"), ("being", "be"), ("be", "be"), ("has", "have"), ("does", "do"),
            ("goes", "go"), ("'s", "be"), ("’s", "be"), ("'m", "be"), ("’m", "be"),
            ("'re", "be"), ("’re", "be"), ("'ve", "have"), ("’ve", "have"),
        ] {
            lemma_of.insert(form, base);
        }
        Tables { lemma_of, by_base }
    })
}

/// Whether `word` is a known base-form verb.
pub fn is_known_lemma(word: &str) -> bool {
    let w = word.to_lowercase();
    w == "be" || tables().by_base.contains_key(w.as_str()) || REGULAR.binary_search(&w.as_str()).is_ok()
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

fn syllables(word: &str) -> usize {
    let mut count = 0;
    let mut prev_vowel = false;
    for c in word.chars() {
        let v = is_vowel(c) || (c == 'y' && count > 0);
        if v && !prev_vowel {
            count += 1;
        }
        prev_vowel = v;
    }
    count
}

/// Regular verbs whose final consonant doubles although they are polysyllabic.
const DOUBLING_STRESSED: &[&str] = &[
    "admit", "commit", "compel", "control", "occur", "omit", "patrol", "permit", "prefer",
    "refer", "regret", "submit", "transfer",
];

fn doubles_final_consonant(base: &str) -> bool {
    let chars: Vec<char> = base.chars().collect();
    let n = chars.len();
    if n < 3 {
        return false;
    }
    let (c1, v, c2) = (chars[n - 3], chars[n - 2], chars[n - 1]);
    let cvc = !is_vowel(c1) && is_vowel(v) && !is_vowel(c2) && !matches!(c2, 'w' | 'x' | 'y');
    // `qu` acts as a consonant cluster
    let cvc = cvc && !(c1 == 'u' && n >= 4 && chars[n - 4] == 'q');
    cvc && (syllables(base) == 1 || DOUBLING_STRESSED.contains(&base))
}

fn ends_consonant_y(base: &str) -> bool {
    let chars: Vec<char> = base.chars().collect();
    chars.len() >= 2 && chars[chars.len() - 1] == 'y' && !is_vowel(chars[chars.len() - 2])
}

/// Inflects a base form.
pub fn inflect(lemma: &str, form: VerbForm) -> String {
    let base = lemma.to_lowercase();
    if base == "be" {
        return match form {
            VerbForm::Base => "be",
            VerbForm::ThirdSingular => "is",
            VerbForm::Past => "was",
            VerbForm::PastParticiple => "been",
            VerbForm::PresentParticiple => "being",
        }
        .to_string();
    }
    let irregular = tables().by_base.get(base.as_str()).copied();
    match form {
        VerbForm::Base => base,
        VerbForm::ThirdSingular => match base.as_str() {
            "have" => "has".into(),
            "do" => "does".into(),
            "go" => "goes".into(),
            _ => third_singular(&base),
        },
        VerbForm::Past => irregular.map(|(past, _)| past.to_string()).unwrap_or_else(|| regular_past(&base)),
        VerbForm::PastParticiple => irregular.map(|(_, pp)| pp.to_string()).unwrap_or_else(|| regular_past(&base)),
        VerbForm::PresentParticiple => present_participle(&base),
    }
}

fn third_singular(base: &str) -> String {
    if ends_consonant_y(base) {
        format!("{}ies", &base[..base.len() - 1])
    } else if ["s", "x", "z", "ch", "sh", "o"].iter().any(|s| base.ends_with(s)) {
        format!("{base}es")
    } else {
        format!("{base}s")
    }
}

fn regular_past(base: &str) -> String {
    if base.ends_with('e') {
        format!("{base}d")
    } else if ends_consonant_y(base) {
        format!("{}ied", &base[..base.len() - 1])
    } else if doubles_final_consonant(base) {
        format!("{base}{}ed", base.chars().last().unwrap_or_default())
    } else {
        format!("{base}ed")
    }
}

fn present_participle(base: &str) -> String {
    if base.ends_with("ie") {
        format!("{}ying", &base[..base.len() - 2])
    } else if base.ends_with('e') && !["ee", "oe", "ye"].iter().any(|s| base.ends_with(s)) && base.len() > 2 {
        format!("{}ing", &base[..base.len() - 1])
    } else if doubles_final_consonant(base) {
        format!("{base}{}ing", base.chars().last().unwrap_or_default())
    } else {
        format!("{base}ing")
    }
}

fn undouble(stem: &str) -> Option<String> {
    let chars: Vec<char> = stem.chars().collect();
    let n = chars.len();
    (n >= 2 && chars[n - 1] == chars[n - 2] && !is_vowel(chars[n - 1]) && !matches!(chars[n - 1], 'l' | 's' | 'z' | 'f'))
        .then(|| chars[..n - 1].iter().collect())
}

fn pick(candidates: &[String], fallback: String) -> String {
    candidates.iter().find(|c| is_known_lemma(c)).cloned().unwrap_or(fallback)
}

fn looks_e_dropped(stem: &str) -> bool {
    // mak(ing) -> make, hop(ing) -> hope
    let chars: Vec<char> = stem.chars().collect();
    let n = chars.len();
    n >= 2
        && !is_vowel(chars[n - 1])
        && !matches!(chars[n - 1], 'w' | 'x' | 'y')
        && is_vowel(chars[n - 2])
        && (n < 3 || !is_vowel(chars[n - 3]))
        && syllables(stem) == 1
}

/// Base form of a verb token.
pub fn lemmatize(word: &str) -> String {
    let w = word.to_lowercase();
    if let Some(base) = tables().lemma_of.get(w.as_str()) {
        return base.to_string();
    }
    if is_known_lemma(&w) {
        return w;
    }
    if let Some(stem) = w.strip_suffix("ing").filter(|s| s.len() >= 2) {
        let mut cands = vec![stem.to_string(), format!("{stem}e")];
        if let Some(u) = undouble(stem) {
            cands.insert(0, u);
        }
        if let Some(s) = stem.strip_suffix('y') {
            cands.push(format!("{s}ie"));
        }
        let fallback = undouble(stem)
            .unwrap_or_else(|| if looks_e_dropped(stem) { format!("{stem}e") } else { stem.to_string() });
        return pick(&cands, fallback);
    }
    if let Some(stem) = w.strip_suffix("ied").filter(|s| s.len() >= 2) {
        return format!("{stem}y");
    }
    if let Some(stem) = w.strip_suffix("ed").filter(|s| s.len() >= 2) {
        let mut cands = vec![format!("{stem}e"), stem.to_string()];
        if let Some(u) = undouble(stem) {
            cands.insert(0, u);
        }
        let fallback = undouble(stem)
            .unwrap_or_else(|| if looks_e_dropped(stem) { format!("{stem}e") } else { stem.to_string() });
        return pick(&cands, fallback);
    }
    if let Some(stem) = w.strip_suffix("ies").filter(|s| s.len() >= 2) {
        return format!("{stem}y");
    }
    if w.ends_with('s') && !w.ends_with("ss") && w.len() > 2 {
        let plain = w[..w.len() - 1].to_string();
        let es = w.strip_suffix("es").map(str::to_string);
        let mut cands = vec![plain.clone()];
        if let Some(es) = &es {
            cands.push(es.clone());
        }
        let fallback = match es {
            Some(es) if ["s", "x", "z", "ch", "sh", "o"].iter().any(|s| es.ends_with(s)) => es,
            _ => plain,
        };
        return pick(&cands, fallback);
    }
    w
}

/// Detects the form of an inflected verb token.
pub fn verb_form(word: &str) -> VerbForm {
    let w = word.to_lowercase();
    match w.as_str() {
        "is" | "has" | "does" | "goes" | "'s" | "’s" => return VerbForm::ThirdSingular,
        "am" | "are" | "be" | "'m" | "’m" | "'re" | "’re" => return VerbForm::Base,
        "was" | "were" => return VerbForm::Past,
        "been" => return VerbForm::PastParticiple,
        "being" => return VerbForm::PresentParticiple,
        _ => {}
    }
    if tables().by_base.contains_key(w.as_str()) || REGULAR.binary_search(&w.as_str()).is_ok() {
        return VerbForm::Base;
    }
    for &(base, past, pp) in IRREGULAR {
        if w == past {
            return VerbForm::Past;
        }
        if w == pp && pp != base {
            return VerbForm::PastParticiple;
        }
    }
    if w.ends_with("ing") && w.len() > 4 {
        VerbForm::PresentParticiple
    } else if w.ends_with("ed") && w.len() > 3 {
        VerbForm::Past
    } else if w.ends_with('s') && !w.ends_with("ss") && w.len() > 2 {
        VerbForm::ThirdSingular
    } else {
        VerbForm::Base
    }
}

/// Outcome of re-inflecting a lemma; `flagged` marks the unchanged fallback.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inflection {
    pub text: String,
    pub flagged: bool,
}

/// Inflects `target_lemma` to the morphological form of `source_verb`.
pub fn try_match_verb_form(source_verb: &str, target_lemma: &str) -> Inflection {
    let inflectable = |s: &str| !s.is_empty() && s.chars().all(|c| c.is_alphabetic() || c == '-');
    if !inflectable(target_lemma) || !inflectable(source_verb.trim_start_matches(['\'', '’'])) {
        return Inflection { text: target_lemma.to_string(), flagged: true };
    }
    Inflection { text: inflect(target_lemma, verb_form(source_verb)), flagged: false }
}

pub fn match_verb_form(source_verb: &str, target_lemma: &str) -> String {
    try_match_verb_form(source_verb, target_lemma).text
}
