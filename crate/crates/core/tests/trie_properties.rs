use std::collections::HashSet;

use kbqa_core::store::{fold_char, MentionIndex, MentionTarget};
use kbqa_core::understanding::{mask, unmask, Mention, MASK_TOKEN};
use proptest::prelude::*;

const ALPHABET: &[char] = &['a', 'b', 'A', 'B', 'x', '优', '惠', '券', '单', '品', '宝', ' ', '的'];

fn folded(s: &str) -> String {
    s.chars().map(fold_char).collect()
}

fn target(i: usize) -> MentionTarget {
    MentionTarget::Entity {
        entity_id: format!("e{i}").into(),
    }
}

fn word(max: usize) -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(ALPHABET), 1..=max).prop_map(|v| v.into_iter().collect())
}

/// Quadratic scan: at each char boundary try every end, keep the longest
/// slice whose folded form is a stored key.
fn oracle(keys: &HashSet<String>, text: &str) -> Vec<(usize, usize)> {
    let bounds: Vec<usize> = text.char_indices().map(|(i, _)| i).chain([text.len()]).collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i + 1 < bounds.len() {
        let start = bounds[i];
        let best = (i + 1..bounds.len())
            .rev()
            .find(|&j| keys.contains(&folded(&text[start..bounds[j]])));
        match best {
            Some(j) => {
                out.push((start, bounds[j]));
                i = j;
            }
            None => i += 1,
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn leftmost_longest_matches_quadratic_oracle(
        keys in prop::collection::vec(word(4), 0..8),
        text in word(24),
    ) {
        let mut index = MentionIndex::new();
        for (i, k) in keys.iter().enumerate() {
            index.insert(k, target(i));
        }
        let folded_keys: HashSet<String> = keys.iter().map(|k| folded(k)).collect();
        let got: Vec<(usize, usize)> = index.find_all(&text).iter().map(|m| (m.start, m.end)).collect();
        prop_assert_eq!(got, oracle(&folded_keys, &text));
    }

    #[test]
    fn membership_equals_hash_set(keys in prop::collection::vec(word(5), 0..30), probe in word(5)) {
        let mut index = MentionIndex::new();
        for (i, k) in keys.iter().enumerate() {
            index.insert(k, target(i));
        }
        let folded_keys: HashSet<String> = keys.iter().map(|k| folded(k)).collect();
        prop_assert_eq!(index.get(&probe).is_some(), folded_keys.contains(&folded(&probe)));
        prop_assert_eq!(index.len(), folded_keys.len());
        for k in &keys {
            let m = index.longest_match_at(k, 0).unwrap();
            prop_assert_eq!(m.end, k.len());
        }
    }

    #[test]
    fn masking_round_trips(keys in prop::collection::vec(word(3), 1..5), text in word(20)) {
        prop_assume!(!text.contains(MASK_TOKEN));
        let mut index = MentionIndex::new();
        for (i, k) in keys.iter().enumerate() {
            index.insert(k, target(i));
        }
        let mentions: Vec<Mention> = index
            .find_all(&text)
            .into_iter()
            .map(|m| Mention {
                surface: text[m.start..m.end].to_owned(),
                byte_span: (m.start, m.end),
                targets: m.targets.to_vec(),
            })
            .collect();
        let masked = mask(&text, &mentions).unwrap();
        prop_assert_eq!(masked.text.matches(MASK_TOKEN).count(), masked.mention_order.len());
        prop_assert_eq!(unmask(&masked, &mentions), text.clone());
        // Bytes outside mentions survive in order.
        let mut outside = String::new();
        let mut cursor = 0;
        for m in &mentions {
            outside.push_str(&text[cursor..m.byte_span.0]);
            cursor = m.byte_span.1;
        }
        outside.push_str(&text[cursor..]);
        prop_assert_eq!(masked.text.replace(MASK_TOKEN, ""), outside);
    }
}

#[test]
fn empty_index_matches_nothing() {
    let index = MentionIndex::new();
    assert!(index.find_all("优惠券").is_empty());
    assert!(index.get("").is_none());
}

#[test]
fn latin_matching_ignores_case() {
    let mut index = MentionIndex::new();
    index.insert("Store-Bao", target(0));
    let found = index.find_all("what is STORE-BAO");
    assert_eq!(found.len(), 1);
    assert_eq!((found[0].start, found[0].end), (8, 17));
}
