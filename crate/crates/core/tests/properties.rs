use std::collections::HashSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fuzzkb::eval::rank_filtered;
use fuzzkb::fuzzy::TNormKind;
use fuzzkb::kb::{split_abox, EntityId, Vocab};
use fuzzkb::model::{checkpoint_bytes, checkpoint_from_bytes, init_params, ModelConfig};
use fuzzkb::query::{answer_entities, parse_query, random_query, render_query, Query, QueryType};
use fuzzkb::synth::{synthetic_kb, SynthConfig};

fn vocab() -> Vocab {
    Vocab::new(
        (0..20).map(|i| format!("ent {i}")).collect(),
        vec!["C".into()],
        (0..4).map(|i| format!("r\"{i}")).collect(),
    )
    .unwrap()
}

fn qtype() -> impl Strategy<Value = QueryType> {
    proptest::sample::select(QueryType::ALL.to_vec())
}

fn tnorm() -> impl Strategy<Value = TNormKind> {
    proptest::sample::select(TNormKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn render_then_parse_is_identity(t in qtype(), seed in any::<u64>()) {
        let v = vocab();
        let q = random_query(t, 20, 4, &mut ChaCha8Rng::seed_from_u64(seed));
        let text = render_query(&q, &v);
        prop_assert_eq!(parse_query(&text, &v).unwrap(), q.clone());
        prop_assert_eq!(QueryType::classify(&q), Some(t));
        let neg = Query::negate(q.clone());
        prop_assert_eq!(parse_query(&render_query(&neg, &v), &v).unwrap(), neg);
    }

    #[test]
    fn rank_lies_within_bounds(scores in prop::collection::vec(-5i32..5, 2..30), pick in any::<prop::sample::Index>()) {
        let scores: Vec<f64> = scores.into_iter().map(f64::from).collect();
        let target = pick.index(scores.len());
        let r = rank_filtered(&scores, target, &HashSet::new()).unwrap();
        let above = scores.iter().filter(|&&s| s > scores[target]).count() as f64;
        let ties = scores.iter().filter(|&&s| s == scores[target]).count() as f64;
        prop_assert!(r >= 1.0 && r <= scores.len() as f64);
        prop_assert_eq!(r, above + (ties + 1.0) / 2.0);
        // filtering every other candidate leaves rank 1
        let others: HashSet<usize> = (0..scores.len()).filter(|&i| i != target).collect();
        prop_assert_eq!(rank_filtered(&scores, target, &others).unwrap(), 1.0);
    }

    #[test]
    fn checkpoint_round_trip(dim in 1usize..9, t in tnorm(), seed in any::<u64>()) {
        let cfg = ModelConfig { dim, tnorm: t, ..ModelConfig::default() };
        let p = init_params(7, 3, 2, cfg, seed).unwrap();
        let bytes = checkpoint_bytes(&p);
        let back = checkpoint_from_bytes(&bytes).unwrap();
        // tensors are stored as f32, so a second trip is exact
        prop_assert_eq!(checkpoint_bytes(&back), bytes.clone());
        prop_assert_eq!(back.config, p.config);
        for ((_, a), (_, b)) in back.tensors().into_iter().zip(p.tensors()) {
            prop_assert!(a.iter().zip(b).all(|(x, y)| *x == *y as f32 as f64));
        }
        prop_assert!(checkpoint_from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn memberships_stay_in_unit_interval(t in qtype(), nt in tnorm(), seed in any::<u64>()) {
        let cfg = ModelConfig { dim: 5, tnorm: nt, ..ModelConfig::default() };
        let p = init_params(20, 3, 4, cfg, seed).unwrap();
        let q = random_query(t, 20, 4, &mut ChaCha8Rng::seed_from_u64(seed ^ 1));
        let fs = p.query_fuzzy_set(&q).unwrap();
        prop_assert!(fs.memberships().iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn split_partitions_triples(seed in any::<u64>(), frac in 0.5f64..0.95) {
        let kb = synthetic_kb(&SynthConfig { concepts: 4, block_size: 6, chains: 1, seed: 1, ..SynthConfig::default() }).unwrap();
        let s = split_abox(&kb, frac, seed).unwrap();
        let (tr, va, te) = (&s.train.abox_ee, &s.valid, &s.test);
        prop_assert_eq!(tr.len() + va.len() + te.len(), kb.abox_ee.len());
        prop_assert!(va.iter().chain(te.iter()).all(|t| !tr.contains(t)));
        prop_assert!(va.iter().all(|t| !te.contains(t)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn negation_is_complement(t in qtype(), seed in any::<u64>()) {
        let kb = synthetic_kb(&SynthConfig { concepts: 4, block_size: 5, chains: 1, seed: 2, ..SynthConfig::default() }).unwrap();
        let n = kb.num_entities();
        let q = random_query(t, n, kb.num_relations(), &mut ChaCha8Rng::seed_from_u64(seed));
        let pos = answer_entities(&kb, &q);
        let neg = answer_entities(&kb, &Query::negate(q));
        prop_assert_eq!(pos.len() + neg.len(), n);
        prop_assert!(pos.iter().all(|e: &EntityId| !neg.contains(e)));
    }
}
