//! proptest strategies for terms, formulas and specs.
#![allow(dead_code)]

use proptest::prelude::*;
use tslforge::syntax::{Formula, FunctionTerm, Ident, PredicateTerm};
use tslforge::TslSpec;

const NAMES: &[&str] = &["ball", "p", "q", "moveLeft", "leftmost", "x1", "speed_2", "Xs", "Fx", "Up"];

pub fn ident() -> impl Strategy<Value = Ident> {
    prop::sample::select(NAMES).prop_map(|s| Ident::new(s).unwrap())
}

pub fn term() -> impl Strategy<Value = FunctionTerm> {
    ident().prop_map(FunctionTerm::signal).prop_recursive(3, 12, 3, |inner| {
        (ident(), prop::collection::vec(inner, 1..=3)).prop_map(|(f, args)| FunctionTerm::apply(f, args))
    })
}

pub fn predicate_term() -> impl Strategy<Value = PredicateTerm> {
    (ident(), prop::collection::vec(term(), 0..=2)).prop_map(|(p, args)| PredicateTerm::new(p, args))
}

fn combine(leaf: BoxedStrategy<Formula>, depth: u32) -> BoxedStrategy<Formula> {
    leaf.prop_recursive(depth, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            inner.clone().prop_map(Formula::next),
            inner.clone().prop_map(Formula::finally),
            inner.clone().prop_map(Formula::globally),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::or(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::implies(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::until(a, b)),
            (inner.clone(), inner).prop_map(|(a, b)| Formula::weak_until(a, b)),
        ]
    })
    .boxed()
}

/// Arbitrary formulas over the full term language.
pub fn formula() -> BoxedStrategy<Formula> {
    let leaf = prop_oneof![
        predicate_term().prop_map(Formula::pred),
        (ident(), term()).prop_map(|(c, t)| Formula::update(c, t)),
    ]
    .boxed();
    combine(leaf, 5)
}

/// Formulas over the 0-ary predicates `p` and `q`.
pub fn formula_pq(depth: u32) -> BoxedStrategy<Formula> {
    let leaf = prop::sample::select(vec!["p", "q"])
        .prop_map(|n| Formula::pred(PredicateTerm::new(Ident::new(n).unwrap(), vec![])))
        .boxed();
    combine(leaf, depth)
}

/// Formulas over `p`, `q` and the updates of cell `c` to `f c` or `c`.
pub fn formula_with_updates(depth: u32) -> BoxedStrategy<Formula> {
    let c = || Ident::new("c").unwrap();
    let leaf = prop_oneof![
        prop::sample::select(vec!["p", "q"])
            .prop_map(|n| Formula::pred(PredicateTerm::new(Ident::new(n).unwrap(), vec![]))),
        prop::bool::ANY.prop_map(move |apply| {
            let value = match apply {
                true => FunctionTerm::apply(Ident::new("f").unwrap(), vec![FunctionTerm::signal(c())]),
                false => FunctionTerm::signal(c()),
            };
            Formula::update(c(), value)
        }),
    ]
    .boxed();
    combine(leaf, depth)
}

/// Until-free formulas (boolean connectives and `X` only) over `p` and `q`.
pub fn formula_until_free() -> BoxedStrategy<Formula> {
    let leaf = prop::sample::select(vec!["p", "q"])
        .prop_map(|n| Formula::pred(PredicateTerm::new(Ident::new(n).unwrap(), vec![])))
        .boxed();
    leaf.prop_recursive(5, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            inner.clone().prop_map(Formula::next),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::or(a, b)),
            (inner.clone(), inner).prop_map(|(a, b)| Formula::implies(a, b)),
        ]
    })
    .boxed()
}

pub fn spec() -> impl Strategy<Value = TslSpec> {
    (prop::collection::vec(formula(), 0..3), prop::collection::vec(formula(), 0..3))
        .prop_map(|(a, g)| TslSpec::new(a, g))
}
