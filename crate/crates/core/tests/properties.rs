use proptest::prelude::*;
use weaklabel::baselines::{average_signal, major_vote};
use weaklabel::evaluation::roc_auc;
use weaklabel::label_model::{posterior, LabelModelParams};
use weaklabel::signal_store::{load_corpus, save_corpus};
use weaklabel::training::{filter_labels, train, TrainConfig, TrainingItem, TrainingSet};
use weaklabel::unification::{compute_thresholds, map_signal, unify_corpus};
use weaklabel::{Corpus, QuantileConfig, SampleRecord, Vote};

fn vote() -> impl Strategy<Value = Vote> {
    prop_oneof![Just(Vote::Neg), Just(Vote::Pos), Just(Vote::Abstain)]
}

fn rank(v: Vote) -> u8 {
    match v {
        Vote::Neg => 0,
        Vote::Abstain => 1,
        Vote::Pos => 2,
    }
}

fn masses() -> impl Strategy<Value = QuantileConfig> {
    (0.01f64..0.99, 0.01f64..0.99).prop_map(|(p, n)| QuantileConfig::new(p, n).unwrap())
}

fn params(k: usize) -> impl Strategy<Value = LabelModelParams> {
    (
        prop::collection::vec(0.01f64..0.99, k),
        prop::collection::vec(0.01f64..0.99, k),
        0.05f64..0.95,
    )
        .prop_map(|(a, b, p)| LabelModelParams::new(a, b, p).unwrap())
}

fn record(i: usize, k: usize) -> impl Strategy<Value = SampleRecord> {
    (
        prop::collection::vec(prop::option::weighted(0.8, 0.0f64..=1.0), k),
        prop::option::of(0u8..=1),
        prop::option::of("[a-z]{1,6}"),
        prop::option::of(("[a-z ]{0,20}", "[a-z ]{0,20}")),
    )
        .prop_map(move |(scores, gold, dataset, text)| {
            let mut r = SampleRecord::new(format!("r{i}"));
            // first record declares every source so the round trip keeps the order
            for (s, v) in scores.into_iter().enumerate() {
                match v {
                    Some(v) => r = r.with_score(format!("m{s}"), v),
                    None if i == 0 => r = r.with_score(format!("m{s}"), 0.5),
                    None => {}
                }
            }
            r.gold = gold;
            r.dataset = dataset;
            if let Some((p, h)) = text {
                r = r.with_text(p, h);
            }
            r
        })
}

fn corpus() -> impl Strategy<Value = Corpus> {
    (1usize..4, 1usize..12)
        .prop_flat_map(|(k, n)| (0..n).map(|i| record(i, k)).collect::<Vec<_>>())
        .prop_map(|records| Corpus::new(records).unwrap())
}

fn both_classes() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    (2usize..60)
        .prop_flat_map(|n| {
            (
                prop::collection::vec((0u32..15).prop_map(|x| x as f64 / 15.0), n),
                prop::collection::vec(0u8..=1, n),
            )
        })
        .prop_map(|(s, mut g)| {
            g[0] = 0;
            g[1] = 1;
            (s, g)
        })
}

fn training_set() -> impl Strategy<Value = TrainingSet> {
    (1usize..4, 1usize..20)
        .prop_flat_map(|(d, n)| {
            prop::collection::vec((prop::collection::vec(-2.0f64..2.0, d), 0.0f64..=1.0), n)
        })
        .prop_map(|rows| {
            let items = rows
                .into_iter()
                .enumerate()
                .map(|(i, (features, p_pos))| TrainingItem {
                    id: format!("t{i}"),
                    features,
                    p_pos,
                })
                .collect();
            TrainingSet::new(items).unwrap()
        })
}

proptest! {
    #[test]
    fn store_round_trip(c in corpus()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        save_corpus(&c, &path).unwrap();
        prop_assert_eq!(load_corpus(&path).unwrap(), c);
    }

    #[test]
    fn mapping_is_monotone(scores in prop::collection::vec(0.0f64..1.0, 1..50), cfg in masses()) {
        let th = compute_thresholds(&scores, &cfg).unwrap();
        let mut sorted = scores.clone();
        sorted.sort_by(f64::total_cmp);
        let votes: Vec<u8> = sorted.iter().map(|&s| rank(map_signal(Some(s), &th))).collect();
        prop_assert!(votes.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn mapping_is_rank_invariant(scores in prop::collection::vec(-5.0f64..5.0, 1..50), cfg in masses()) {
        let votes = |s: &[f64]| {
            let th = compute_thresholds(s, &cfg).unwrap();
            s.iter().map(|&x| map_signal(Some(x), &th)).collect::<Vec<_>>()
        };
        let shifted: Vec<f64> = scores.iter().map(|x| x.exp() + 3.0).collect();
        prop_assert_eq!(votes(&scores), votes(&shifted));
    }

    #[test]
    fn unification_is_deterministic(c in corpus(), cfg in masses()) {
        match (unify_corpus(&c, &cfg), unify_corpus(&c, &cfg)) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "runs disagree"),
        }
    }

    #[test]
    fn posterior_is_a_probability((p, votes) in (1usize..6).prop_flat_map(|k| (params(k), prop::collection::vec(vote(), k)))) {
        let q = posterior(&votes, &p);
        prop_assert!((0.0..=1.0).contains(&q));
    }

    #[test]
    fn posterior_is_permutation_equivariant(
        (p, votes, perm) in (1usize..6).prop_flat_map(|k| (
            params(k),
            prop::collection::vec(vote(), k),
            Just((0..k).collect::<Vec<_>>()).prop_shuffle(),
        ))
    ) {
        let pick = |xs: &[f64]| perm.iter().map(|&i| xs[i]).collect::<Vec<_>>();
        let permuted = LabelModelParams::new(pick(&p.alpha), pick(&p.beta), p.prior_pos).unwrap();
        let pv: Vec<Vote> = perm.iter().map(|&i| votes[i]).collect();
        prop_assert!((posterior(&votes, &p) - posterior(&pv, &permuted)).abs() < 1e-12);
    }

    #[test]
    fn posterior_label_swap((p, votes) in (1usize..6).prop_flat_map(|k| (params(k), prop::collection::vec(vote(), k)))) {
        let flipped: Vec<Vote> = votes
            .iter()
            .map(|v| match v {
                Vote::Pos => Vote::Neg,
                Vote::Neg => Vote::Pos,
                Vote::Abstain => Vote::Abstain,
            })
            .collect();
        let swapped = LabelModelParams::new(p.alpha.clone(), p.beta.clone(), 1.0 - p.prior_pos).unwrap();
        prop_assert!((posterior(&votes, &p) + posterior(&flipped, &swapped) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn average_is_bounded_and_order_free(mut xs in prop::collection::vec(0.0f64..=1.0, 1..20)) {
        let a = average_signal(&xs).unwrap();
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(a >= lo - 1e-12 && a <= hi + 1e-12);
        xs.reverse();
        prop_assert!((average_signal(&xs).unwrap() - a).abs() < 1e-12);
    }

    #[test]
    fn majority_ignores_abstains(votes in prop::collection::vec(vote(), 0..10), extra in 0usize..5, at in any::<prop::sample::Index>()) {
        let mut padded = votes.clone();
        for _ in 0..extra {
            let pos = at.index(padded.len() + 1);
            padded.insert(pos, Vote::Abstain);
        }
        prop_assert_eq!(major_vote(&votes), major_vote(&padded));
    }

    #[test]
    fn filter_keeps_only_confident(labels in prop::collection::vec(0.0f64..=1.0, 1..60), cfg in masses()) {
        let f = filter_labels(&labels, &cfg).unwrap();
        for &i in &f.kept {
            prop_assert!(map_signal(Some(labels[i]), &f.thresholds) != Vote::Abstain);
        }
        let dropped = labels.len() - f.kept.len();
        let abstaining = labels.iter().filter(|&&p| map_signal(Some(p), &f.thresholds) == Vote::Abstain).count();
        prop_assert_eq!(dropped, abstaining);
    }

    #[test]
    fn mirrored_training_mirrors_weights(set in training_set()) {
        let mirrored = TrainingSet::new(
            set.items()
                .iter()
                .map(|it| TrainingItem {
                    id: it.id.clone(),
                    features: it.features.iter().map(|x| -x).collect(),
                    p_pos: 1.0 - it.p_pos,
                })
                .collect(),
        )
        .unwrap();
        let cfg = TrainConfig { lr: 0.05, epochs: 50, seed: 0 };
        let (a, _) = train(&set, &cfg).unwrap();
        let (b, _) = train(&mirrored, &cfg).unwrap();
        for (x, y) in a.weights.iter().zip(&b.weights) {
            prop_assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
        prop_assert!((a.bias + b.bias).abs() < 1e-9);
    }

    #[test]
    fn duplicated_set_with_half_step_matches(set in training_set()) {
        let doubled = TrainingSet::new(set.items().iter().chain(set.items()).cloned().collect()).unwrap();
        let (a, ta) = train(&set, &TrainConfig { lr: 0.05, epochs: 40, seed: 0 }).unwrap();
        let (b, tb) = train(&doubled, &TrainConfig { lr: 0.025, epochs: 40, seed: 0 }).unwrap();
        for (x, y) in a.weights.iter().zip(&b.weights).chain([(&a.bias, &b.bias)]) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        for (x, y) in ta.iter().zip(&tb) {
            prop_assert!((2.0 * x - y).abs() < 1e-9 * y.abs().max(1.0));
        }
    }

    #[test]
    fn auc_ignores_monotone_transforms((scores, gold) in both_classes()) {
        let a = roc_auc(&scores, &gold).unwrap();
        let t: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 10.0).collect();
        prop_assert_eq!(roc_auc(&t, &gold).unwrap(), a);
    }

    #[test]
    fn auc_complement((scores, gold) in both_classes()) {
        let a = roc_auc(&scores, &gold).unwrap();
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        let flipped: Vec<u8> = gold.iter().map(|g| 1 - g).collect();
        prop_assert!((roc_auc(&neg, &gold).unwrap() - (1.0 - a)).abs() < 1e-12);
        prop_assert!((roc_auc(&scores, &flipped).unwrap() - (1.0 - a)).abs() < 1e-12);
    }
}
