mod common;

use std::collections::BTreeSet;

use astxform::dsl::TransformationProgram;
use astxform::ranking::{rank, score_program, Weights};
use common::programs::{principle_holds, random_program, PRINCIPLES};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn scaled(w: &Weights, c: f64) -> Weights {
    Weights {
        w_ref: w.w_ref * c,
        w_const: w.w_const * c,
        w_ctx: w.w_ctx * c,
        w_len: w.w_len * c,
    }
}

#[test]
fn mutations_rank_below_originals() {
    let mut rng = StdRng::seed_from_u64(5);
    let w = Weights::default();
    for principle in PRINCIPLES {
        for trial in 0..300 {
            assert!(principle_holds(&mut rng, principle, &w), "{principle:?} trial {trial}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn ranking_is_scale_covariant(seed in any::<u64>(), c in 0.01f64..100.0) {
        let mut rng = StdRng::seed_from_u64(seed);
        let programs: Vec<TransformationProgram> = (0..8).map(|_| random_program(&mut rng)).collect();
        let w = Weights::default();
        let a: Vec<String> = rank(programs.clone(), &w).iter().map(TransformationProgram::to_json).collect();
        let b: Vec<String> = rank(programs, &scaled(&w, c)).iter().map(TransformationProgram::to_json).collect();
        prop_assert!(a == b, "order changed under scale {}", c);
    }

    #[test]
    fn ranking_is_a_permutation_sorted_by_score(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let programs: Vec<TransformationProgram> = (0..8).map(|_| random_program(&mut rng)).collect();
        let w = Weights::default();
        let ranked = rank(programs.clone(), &w);
        let before: BTreeSet<String> = programs.iter().map(TransformationProgram::to_json).collect();
        let after: BTreeSet<String> = ranked.iter().map(TransformationProgram::to_json).collect();
        prop_assert!(before == after);
        for pair in ranked.windows(2) {
            prop_assert!(score_program(&pair[0], &w).total >= score_program(&pair[1], &w).total);
        }
    }
}
