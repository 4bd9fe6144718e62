mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{fixture_corpus, heuristic, splice, airport_provider};
use dialfact::corruptor::{
    corrupt, generate_training_set, CorruptError, ReplacementPools, ReplacementScope, CAUSE_MARKERS, RESULT_MARKERS,
};
use dialfact::lingo::PRONOUNS;
use dialfact::{ErrorClass, Verifiability};

fn airport_dialogue() -> dialfact::Dialogue {
    fixture_corpus().examples.iter().find(|e| e.dialogue.id == "samsum-01").unwrap().dialogue.as_ref().clone()
}

#[test]
fn running_example_entity_swap() {
    let corpus = fixture_corpus();
    let provider = airport_provider();
    let pools = ReplacementPools::build(&corpus, &provider).unwrap();
    let d = airport_dialogue();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let c = corrupt("Lucas is waiting at the airport.", &d, &pools, ErrorClass::EntE, ReplacementScope::SameDialogue, &provider, &mut rng)
        .unwrap();
    // The only other person in the conversation.
    assert_eq!(c.corrupted, "Vanessa is waiting at the airport.");
    assert_eq!(c.replaced_span.text, "Lucas");
    assert_eq!(c.verifiability, Some(Verifiability::Intrinsic));

    let wide = corrupt("Lucas is waiting at the airport.", &d, &pools, ErrorClass::EntE, ReplacementScope::CorpusWide, &provider, &mut rng)
        .unwrap();
    assert!(!d.mentions(&wide.replacement), "{}", wide.replacement);
    assert_eq!(wide.verifiability, Some(Verifiability::Extrinsic));
}

#[test]
fn running_example_discourse_classes() {
    let corpus = fixture_corpus();
    let provider = airport_provider();
    let pools = ReplacementPools::build(&corpus, &provider).unwrap();
    let d = airport_dialogue();
    let mut rng = ChaCha8Rng::seed_from_u64(2);

    let s = "Vanessa is trying to get another ticket for themselves.";
    let c = corrupt(s, &d, &pools, ErrorClass::CorefE, ReplacementScope::CorpusWide, &provider, &mut rng).unwrap();
    assert_eq!(c.replaced_span.text, "themselves");
    assert!(PRONOUNS.contains(&c.replacement.to_lowercase().as_str()));
    assert_eq!((c.verifiability, c.replacement_scope), (None, None));

    let s = "Vanessa will book the flight to New York at 9:45 pm because students are returning from holidays.";
    let c = corrupt(s, &d, &pools, ErrorClass::LinkE, ReplacementScope::SameDialogue, &provider, &mut rng).unwrap();
    assert!(CAUSE_MARKERS.contains(&c.replaced_span.text.as_str()));
    assert!(RESULT_MARKERS.contains(&c.replacement.as_str()));
    assert_eq!(c.corrupted, splice(s, c.replaced_span.start, c.replaced_span.end, &c.replacement));

    let err = corrupt("Lucas is waiting at the airport.", &d, &pools, ErrorClass::LinkE, ReplacementScope::SameDialogue, &provider, &mut rng)
        .unwrap_err();
    assert!(matches!(err, CorruptError::NoReplaceableUnit(ErrorClass::LinkE)));
    let err = corrupt("x", &d, &pools, ErrorClass::NoError, ReplacementScope::SameDialogue, &provider, &mut rng).unwrap_err();
    assert!(matches!(err, CorruptError::NotAnError));
}

#[test]
fn circumstance_swap_keeps_the_modifier_role() {
    let corpus = fixture_corpus();
    let provider = airport_provider();
    let pools = ReplacementPools::build(&corpus, &provider).unwrap();
    let d = airport_dialogue();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s = "Vanessa will book the flight to New York at 9:45 pm because students are returning from holidays.";
    let c = corrupt(s, &d, &pools, ErrorClass::CirE, ReplacementScope::CorpusWide, &provider, &mut rng).unwrap();
    let ann = dialfact::lingo::analyze(&provider, s).unwrap();
    let role = dialfact::lingo::role_for_span(&ann.srl_frames, c.replaced_span.start, c.replaced_span.end);
    assert!(role.as_str().contains("ARGM"), "{role:?}");
    let own = pools.own(&d.id);
    assert!(own.is_none_or(|inv| !inv.modifiers.iter().any(|(_, t)| t == &c.replacement)));
}

#[test]
fn small_request_splits_scopes_evenly() {
    let corpus = fixture_corpus();
    let set = generate_training_set(&corpus, &heuristic(), 4, 11).unwrap();
    assert_eq!(set.positives.len(), corpus.len());
    for class in [ErrorClass::EntE, ErrorClass::PredE, ErrorClass::CirE] {
        let of: Vec<_> = set.negatives.iter().filter(|n| n.example.label == class).collect();
        assert_eq!(of.len(), 4);
        let same = of.iter().filter(|n| n.example.replacement_scope == Some(ReplacementScope::SameDialogue)).count();
        assert_eq!(same, 2, "{class}");
    }
}
