use kbqa_core::graph::{passes_threshold, similarity};
use kbqa_core::model::{BuiltinType, ClassDef, KbDocuments, KnowledgeModel, PropertyChain, PropertyDef, ValueTypeSpec};
use kbqa_core::understanding::{LexicalClassifier, MaskedQuestion, NgramProfile, PropertyClassifier};
use proptest::prelude::*;

const PIECES: &[&str] = &[
    "<E>",
    "的",
    "怎么",
    "参加",
    "报名",
    "收费",
    "规则",
    "是什么",
    "能不能",
    "一起",
    "使用",
    "多少",
];

fn utterance() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(PIECES), 1..6).prop_map(|v| v.concat())
}

fn model_with(triggers: &[Vec<String>]) -> KnowledgeModel {
    let properties: Vec<PropertyDef> = triggers
        .iter()
        .enumerate()
        .map(|(i, t)| PropertyDef {
            id: format!("p{i:02}").into(),
            name: format!("名{i}"),
            domain_class: "c".into(),
            parent: None,
            range: Some(ValueTypeSpec::Simple {
                builtin: BuiltinType::Text,
            }),
            infer_domain: false,
            infer_range: false,
            trigger_utterances: t.clone(),
        })
        .collect();
    KnowledgeModel::new(KbDocuments {
        classes: vec![ClassDef {
            id: "c".into(),
            name: "c".into(),
            root_property_ids: properties.iter().map(|p| p.id.clone()).collect(),
        }],
        properties,
        ..Default::default()
    })
    .unwrap()
}

fn masked(text: &str) -> MaskedQuestion {
    MaskedQuestion {
        text: text.to_owned(),
        mention_order: vec![0; text.matches("<E>").count()],
    }
}

/// Plain recursive edit distance over scalars, no memoization.
fn edit_distance(a: &[char], b: &[char]) -> usize {
    match (a.split_first(), b.split_first()) {
        (None, _) => b.len(),
        (_, None) => a.len(),
        (Some((x, ra)), Some((y, rb))) => {
            let sub = edit_distance(ra, rb) + usize::from(x != y);
            sub.min(edit_distance(ra, b) + 1).min(edit_distance(a, rb) + 1)
        }
    }
}

proptest! {
    #[test]
    fn classify_is_deterministic_and_bounded(
        triggers in prop::collection::vec(prop::collection::vec(utterance(), 1..4), 1..6),
        question in utterance(),
    ) {
        let model = model_with(&triggers);
        let chains = model.all_chains();
        let q = masked(&question);
        let a = LexicalClassifier.classify(&q, &chains, &model).unwrap();
        let b = LexicalClassifier.classify(&q, &chains, &model).unwrap();
        prop_assert_eq!(&a, &b);
        for s in &a {
            prop_assert!((0.0..=1.0).contains(&s.score));
        }
        for pair in a.windows(2) {
            prop_assert!(pair[0].score > pair[1].score
                || (pair[0].score == pair[1].score && pair[0].property_chain.key() < pair[1].property_chain.key()));
        }
    }

    #[test]
    fn duplicating_an_utterance_changes_nothing(
        triggers in prop::collection::vec(prop::collection::vec(utterance(), 1..4), 1..6),
        question in utterance(),
        pick in any::<prop::sample::Index>(),
    ) {
        let model = model_with(&triggers);
        let chains = model.all_chains();
        let before = LexicalClassifier.classify(&masked(&question), &chains, &model).unwrap();
        let mut more = triggers.clone();
        let i = pick.index(more.len());
        let dup = more[i][0].clone();
        more[i].push(dup);
        let model = model_with(&more);
        let after = LexicalClassifier.classify(&masked(&question), &chains, &model).unwrap();
        prop_assert_eq!(before, after);
    }

    #[test]
    fn verbatim_trigger_scores_one(
        triggers in prop::collection::vec(prop::collection::vec(utterance(), 1..4), 1..6),
        pick in any::<prop::sample::Index>(),
    ) {
        let model = model_with(&triggers);
        let i = pick.index(triggers.len());
        let chain = PropertyChain(vec![format!("p{i:02}").as_str().into()]);
        let score = LexicalClassifier.chain_score(&triggers[i][0], &chain, &model);
        prop_assert_eq!(score, 1.0);
    }

    #[test]
    fn similarity_matches_exhaustive_edit_distance(
        a in prop::collection::vec(prop::sample::select(&['优', '惠', '券', 'a', 'b'][..]), 0..6),
        b in prop::collection::vec(prop::sample::select(&['优', '惠', '券', 'a', 'b'][..]), 0..6),
    ) {
        let sa: String = a.iter().collect();
        let sb: String = b.iter().collect();
        let longest = a.len().max(b.len());
        let expected = if longest == 0 { 1.0 } else { 1.0 - edit_distance(&a, &b) as f64 / longest as f64 };
        prop_assert!((similarity(&sa, &sb) - expected).abs() < 1e-12);
    }
}

#[test]
fn one_edit_in_five_chars_passes_default_threshold() {
    assert!(passes_threshold(similarity("天猫旗舰店", "天猫旗航店"), 0.8));
    assert!(!passes_threshold(similarity("三星级", "三新级"), 0.8));
}

#[test]
fn nearest_utterance_oracle_on_shuffled_paraphrases() {
    // 50 chains with 5 utterances each over disjoint vocabularies; queries
    // are token shuffles of a held-out utterance.
    let vocab: Vec<char> = ('\u{4e00}'..='\u{5fff}').collect();
    let mut triggers = Vec::new();
    let mut held_out = Vec::new();
    for c in 0..50 {
        let base = &vocab[c * 12..c * 12 + 12];
        let utts: Vec<String> = (0..6)
            .map(|u| (0..6).map(|k| base[(u + k * 5) % 12]).collect::<String>())
            .collect();
        held_out.push(utts[5].clone());
        triggers.push(utts[..5].to_vec());
    }
    let model = model_with(&triggers);
    let chains = model.all_chains();
    for (c, h) in held_out.iter().enumerate() {
        let mut tokens: Vec<char> = h.chars().collect();
        let n = tokens.len();
        tokens.rotate_left(c % n);
        let query: String = tokens.into_iter().collect();
        let top = &LexicalClassifier.classify(&masked(&query), &chains, &model).unwrap()[0];
        let profile = NgramProfile::of(&query);
        let oracle = (0..50)
            .max_by(|&x, &y| {
                let best = |i: usize| {
                    triggers[i]
                        .iter()
                        .map(|u| profile.cosine(&NgramProfile::of(u)))
                        .fold(0.0, f64::max)
                };
                best(x).total_cmp(&best(y)).then(y.cmp(&x))
            })
            .unwrap();
        assert_eq!(top.property_chain.leaf().as_str(), format!("p{oracle:02}"));
    }
}
