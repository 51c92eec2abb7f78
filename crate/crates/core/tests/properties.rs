use std::collections::BTreeMap;

use futamix_core::bta::{analyze, analyze_with, check_congruence, BindingTime, Division};
use futamix_core::gen::{random_division, random_program, random_static_store, random_tuple, seeded};
use futamix_core::interp::run;
use futamix_core::lang::{canonicalize, decode_program, encode_program, parse_program, print_program};
use futamix_core::mix::{specialize, SpecializeOptions, StaticStore};
use futamix_core::value::{parse_datum, print_datum, Int, Value};
use num_bigint::BigInt;
use proptest::prelude::*;

fn datum() -> impl Strategy<Value = Value> {
    let leaf = prop_oneof![
        any::<i64>().prop_map(Value::int),
        (any::<i64>(), any::<i64>()).prop_map(|(a, b)| Value::Int(Int::from_big(BigInt::from(a) * BigInt::from(b) * 7919))),
        "[a-z][a-z0-9_?!]{0,6}".prop_map(|s| Value::sym(&s)),
        prop_oneof![Just("+"), Just("-"), Just("<="), Just(":="), Just("a.1")].prop_map(Value::sym),
    ];
    leaf.prop_recursive(4, 64, 6, |inner| prop::collection::vec(inner, 0..6).prop_map(Value::list))
}

fn static_set(d: &Division) -> Vec<String> {
    d.static_vars().map(|x| x.to_string()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn datum_round_trip(v in datum()) {
        let text = print_datum(&v);
        prop_assert_eq!(parse_datum(&text).unwrap(), v.clone());
        // Printing is canonical.
        prop_assert_eq!(print_datum(&parse_datum(&text).unwrap()), text);
    }

    #[test]
    fn program_round_trips(seed in any::<u64>()) {
        let p = random_program(&mut seeded(seed));
        prop_assert_eq!(parse_program(&print_program(&p)).unwrap(), p.clone());
        prop_assert_eq!(decode_program(&encode_program(&p)).unwrap(), p);
    }

    #[test]
    fn canonicalize_is_idempotent_and_preserves_runs(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let p = random_program(&mut rng);
        let c = canonicalize(&p);
        prop_assert_eq!(canonicalize(&c), c.clone());
        for _ in 0..4 {
            let t = random_tuple(&mut rng, 3);
            // Error locations name labels, which canonicalization renames.
            match (run(&p, &t, 100_000), run(&c, &t, 100_000)) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
                (Err(e), Err(f)) => prop_assert_eq!(e.kind, f.kind),
                (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
            }
        }
    }

    #[test]
    fn bta_is_monotone(seed in any::<u64>(), mask_a in 0u8..8, mask_b in 0u8..8) {
        let p = random_program(&mut seeded(seed));
        let classes = |mask: u8| -> BTreeMap<_, _> {
            p.params.iter().enumerate().map(|(i, x)| {
                let bt = if mask & (1 << i) != 0 { BindingTime::Static } else { BindingTime::Dynamic };
                (x.clone(), bt)
            }).collect()
        };
        let small = analyze(&p, &classes(mask_a & mask_b));
        let large = analyze(&p, &classes(mask_a));
        prop_assert!(check_congruence(&p, &small).is_empty());
        for x in static_set(&small) {
            prop_assert!(static_set(&large).contains(&x), "{} static with fewer static params only", x);
        }
    }

    #[test]
    fn specialization_is_sound(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let p = random_program(&mut rng);
        let d = random_division(&mut rng, &p);
        let vs0 = random_static_store(&mut rng, &p, &d);
        let opts = SpecializeOptions { block_budget: 2_000, ..SpecializeOptions::default() };
        if let Ok(r) = specialize(&p, &d, &vs0, &opts) {
            prop_assert_eq!(canonicalize(&r), r.clone());
            for _ in 0..8 {
                let dynamic = random_tuple(&mut rng, r.params.len());
                let mut next = dynamic.iter();
                let full: Vec<Value> = p.params.iter()
                    .map(|x| vs0.get(x).cloned().unwrap_or_else(|| next.next().unwrap().clone()))
                    .collect();
                match (run(&p, &full, 1_000_000), run(&r, &dynamic, 1_000_000)) {
                    (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
                    (Err(e), Err(f)) => prop_assert_eq!(e.kind, f.kind),
                    (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
                }
            }
        }
    }

    #[test]
    fn all_dynamic_residual_is_no_larger_than_the_source(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let p = random_program(&mut rng);
        let d = analyze_with(&p, &BTreeMap::new(), &p.variables());
        let opts = SpecializeOptions { compress_gotos: false, ..Default::default() };
        let r = specialize(&p, &d, &StaticStore::new(), &opts).unwrap();
        prop_assert_eq!(r.params.clone(), p.params.clone());
        // Only jumps on constant conditions can be decided early.
        prop_assert!(r.blocks.len() <= canonicalize(&p).blocks.len());
        for _ in 0..4 {
            let t = random_tuple(&mut rng, 3);
            match (run(&p, &t, 100_000), run(&r, &t, 100_000)) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
                (Err(e), Err(f)) => prop_assert_eq!(e.kind, f.kind),
                (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
            }
        }
    }
}
