mod common;

use common::*;
use core_selftrain::abstraction::candidate_to_label_function;
use core_selftrain::dsl::{
    canonicalize, evaluate, parse_label_function, print_label_function, ApiRegistry, LabelFunction, Origin, PredicateCall,
};
use proptest::prelude::*;

fn arg() -> impl Strategy<Value = String> {
    prop_oneof![any::<String>(), "[a-z \"\\\\'\n]{0,10}"]
}

proptest! {
    #[test]
    fn print_then_parse_is_identity(a in arg(), b in arg(), c in arg(), pick in 0usize..4) {
        let reg = ApiRegistry::builtin();
        let guards = match pick {
            0 => vec![PredicateCall::new("validate_click_action", [a])],
            1 => vec![PredicateCall::new("validate_type_action", [a, b]), PredicateCall::new("validate_stop_action", [c])],
            2 => vec![PredicateCall::new("validate_click_or_hover_action", ["hover".to_string(), b, a])],
            _ => vec![PredicateCall::new("validate_navigate", [a]), PredicateCall::new("validate_item_in_wishlist", [c])],
        };
        let lf = LabelFunction::new(guards, Origin::Expert).unwrap();
        let text = print_label_function(&lf);
        let back = parse_label_function(&text, &reg).unwrap();
        prop_assert_eq!(&back, &lf);
        prop_assert_eq!(print_label_function(&back), text);
    }

    #[test]
    fn canonicalize_is_idempotent(seed in any::<u64>()) {
        use rand::SeedableRng;
        let reg = ApiRegistry::builtin();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let once = canonicalize(&fuzz_lf(&mut rng, &reg));
        prop_assert_eq!(canonicalize(&once), once);
    }
}

#[test]
fn fuzzed_round_trip() {
    check_dsl(500, 99).unwrap();
}

#[test]
fn case_studies_parse_and_pass() {
    let reg = ApiRegistry::builtin();
    for (name, code, traj) in case_studies() {
        let lf = candidate_to_label_function(code, &reg).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(evaluate(&lf, &traj, &reg).unwrap().passed, "{name}");
        let mut truncated = traj.clone();
        truncated.steps.pop();
        assert!(!evaluate(&lf, &truncated, &reg).unwrap().passed, "{name} passes without its key step");
    }
}

#[test]
fn case_study_type_action_uses_keyword_argument() {
    let reg = ApiRegistry::builtin();
    let (_, code, _) = case_studies().into_iter().find(|(n, _, _)| *n == "aw-1").unwrap();
    let lf = candidate_to_label_function(code, &reg).unwrap();
    assert_eq!(
        print_label_function(&lf),
        "fn verify(trajectory):\n  require validate_type_action(\"Clock\",\"Search apps, web and more\")\n"
    );
}

#[test]
fn rejects_unknown_api_and_bad_arity() {
    let reg = ApiRegistry::builtin();
    assert!(parse_label_function("fn verify(trajectory):\n  require validate_teleport(\"x\")\n", &reg).is_err());
    assert!(parse_label_function("fn verify(trajectory):\n  require validate_click_action()\n", &reg).is_err());
    assert!(parse_label_function("fn verify(trajectory):\n", &reg).is_err());
}
