use kbqa_core::store::{regulation_compression, resolution_rate, ExactRatio, SessionRecord};
use num_rational::Ratio;
use proptest::prelude::*;

fn session() -> impl Strategy<Value = SessionRecord> {
    (any::<u32>(), any::<bool>(), any::<bool>(), any::<bool>()).prop_map(|(id, d, n, s)| SessionRecord {
        session_id: format!("s{id}"),
        disliked: d,
        no_answer: n,
        requested_staff: s,
    })
}

proptest! {
    #[test]
    fn resolution_rate_matches_counting(sessions in prop::collection::vec(session(), 1..1000)) {
        let mut unsolved = 0u64;
        for s in &sessions {
            if s.disliked || s.no_answer || s.requested_staff {
                unsolved += 1;
            }
        }
        let total = sessions.len() as u64;
        let rr = resolution_rate(&sessions).unwrap();
        prop_assert_eq!(rr.as_ratio(), Ratio::new(total - unsolved, total));
    }

    #[test]
    fn regulation_arithmetic_matches_recomputation(kinds in prop::collection::vec(0u64..1000, 1..20)) {
        let mut sum = 0;
        for k in &kinds {
            sum += k;
        }
        let n = kinds.len() as u64;
        prop_assert_eq!(regulation_compression(&kinds, None).unwrap(), (sum * sum, 1 + n * n + sum));
    }

    #[test]
    fn ratio_times_denominator_is_exact(num in 0u64..1_000_000, den in 1u64..10_000) {
        let r = ExactRatio::new(num, den).unwrap();
        prop_assert_eq!(r.as_ratio() * Ratio::from_integer(den), Ratio::from_integer(num));
    }

    #[test]
    fn half_up_rounding_matches_integer_oracle(num in 0u64..1_000_000, den in 1u64..10_000) {
        let scaled = num as u128 * 100;
        let q = scaled / den as u128;
        let rem = scaled % den as u128;
        let cents = if rem * 2 >= den as u128 { q + 1 } else { q };
        let expected = format!("{}.{:02}", cents / 100, cents % 100);
        prop_assert_eq!(ExactRatio::new(num, den).unwrap().rounded(2), expected);
    }
}

#[test]
fn empty_sessions_are_rejected() {
    assert!(resolution_rate(&[]).is_err());
    assert!(regulation_compression(&[], None).is_err());
}

#[test]
fn ten_sessions_one_unsolved() {
    let mut sessions: Vec<SessionRecord> = (0..10)
        .map(|i| SessionRecord {
            session_id: i.to_string(),
            disliked: false,
            no_answer: false,
            requested_staff: false,
        })
        .collect();
    sessions[3].requested_staff = true;
    assert_eq!(resolution_rate(&sessions).unwrap().to_f64(), 0.9);
    for s in &mut sessions {
        s.disliked = true;
    }
    assert_eq!(resolution_rate(&sessions).unwrap().to_f64(), 0.0);
}
