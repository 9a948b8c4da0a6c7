//! Index-backed queries checked against linear scans written here.

mod support;

use std::collections::{BTreeMap, BTreeSet};

use chrono::{TimeZone, Utc};
use newswatch_core::channels::{evaluate, ChannelExpr};
use newswatch_core::store::{CubeFilter, Dim, SearchQuery, NO_CATEGORY};
use newswatch_core::synthetic::{random_channel_expr, random_store, rng};
use newswatch_core::{ArticleId, CountryCode, Store};
use proptest::prelude::*;
use rand::Rng;
use support::{random_query, scan, scan_search};

#[test]
fn search_matches_linear_scan() {
    let store = random_store(11, 1000);
    let mut r = rng(12);
    let mut nonempty = 0;
    for _ in 0..200 {
        let q = random_query(&mut r);
        let got: Vec<ArticleId> = store.search(&q).iter().map(|r| r.id).collect();
        let want = scan_search(&store, &q);
        assert_eq!(got, want, "query {q:?}");
        nonempty += usize::from(!want.is_empty());
    }
    assert!(nonempty > 50, "too few informative queries: {nonempty}");
}

#[test]
fn search_terms_are_case_insensitive() {
    let store = random_store(3, 200);
    let lower = store.search(&SearchQuery::terms("storm"));
    let upper = store.search(&SearchQuery::terms("STORM"));
    assert_eq!(lower, upper);
}

#[test]
fn channel_algebra_matches_scan() {
    let store = random_store(21, 1000);
    let mut r = rng(22);
    let clock = Utc.with_ymd_and_hms(2024, 1, 20, 0, 0, 0).unwrap();
    for i in 0..300 {
        let expr = random_channel_expr(&mut r, 4);
        let c = (i % 2 == 0).then_some(clock);
        assert_eq!(evaluate(&expr, &store, c).unwrap(), scan(&expr, &store, c), "{expr:?}");
    }
}

fn leaf(r: &mut impl Rng) -> ChannelExpr {
    random_channel_expr(r, 1)
}

fn set(expr: &ChannelExpr, store: &Store) -> BTreeSet<ArticleId> {
    evaluate(expr, store, None).unwrap().into_iter().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn union_and_intersection_laws(seed in any::<u64>()) {
        let store = random_store(5, 300);
        let mut r = rng(seed);
        let (a, b, c) = (leaf(&mut r), leaf(&mut r), leaf(&mut r));
        let u = |of: Vec<ChannelExpr>| ChannelExpr::Union { of };
        let i = |of: Vec<ChannelExpr>| ChannelExpr::Intersection { of };
        // commutativity, idempotence, distributivity, absorption
        prop_assert_eq!(set(&u(vec![a.clone(), b.clone()]), &store), set(&u(vec![b.clone(), a.clone()]), &store));
        prop_assert_eq!(set(&i(vec![a.clone(), b.clone()]), &store), set(&i(vec![b.clone(), a.clone()]), &store));
        prop_assert_eq!(set(&u(vec![a.clone(), a.clone()]), &store), set(&a, &store));
        prop_assert_eq!(set(&i(vec![a.clone(), a.clone()]), &store), set(&a, &store));
        prop_assert_eq!(
            set(&i(vec![a.clone(), u(vec![b.clone(), c.clone()])]), &store),
            set(&u(vec![i(vec![a.clone(), b.clone()]), i(vec![a.clone(), c.clone()])]), &store)
        );
        prop_assert_eq!(set(&u(vec![a.clone(), i(vec![a.clone(), b.clone()])]), &store), set(&a, &store));
        // union is a superset, intersection a subset
        let (sa, sb) = (set(&a, &store), set(&b, &store));
        prop_assert!(set(&i(vec![a.clone(), b.clone()]), &store).is_subset(&sa));
        prop_assert!(sa.is_subset(&set(&u(vec![a.clone(), b.clone()]), &store)));
        prop_assert_eq!(set(&u(vec![a.clone(), b.clone()]), &store), sa.union(&sb).copied().collect::<BTreeSet<_>>());
    }

    #[test]
    fn channel_json_round_trips(seed in any::<u64>()) {
        let mut r = rng(seed);
        let e = random_channel_expr(&mut r, 4);
        let json = serde_json::to_string(&e).unwrap();
        prop_assert_eq!(ChannelExpr::from_json(&json).unwrap(), e);
    }

    #[test]
    fn cube_marginals_match_records(seed in 0u64..1000) {
        let store = random_store(seed, 150);
        // incidences per (country, category), from the records directly
        let mut cells: BTreeMap<(CountryCode, String), u64> = BTreeMap::new();
        let mut daily: BTreeMap<chrono::NaiveDate, u64> = BTreeMap::new();
        for r in store.records() {
            let countries: Vec<CountryCode> = if r.countries_about.is_empty() {
                vec![r.country_of_source]
            } else {
                r.countries_about.iter().copied().collect()
            };
            let cats: Vec<String> = if r.categories.is_empty() {
                vec![NO_CATEGORY.to_string()]
            } else {
                r.categories.iter().cloned().collect()
            };
            for c in &countries {
                for k in &cats {
                    *cells.entry((*c, k.clone())).or_insert(0) += 1;
                    *daily.entry(r.published_at.date_naive()).or_insert(0) += 1;
                }
            }
        }
        let rows = store.counts(&CubeFilter::default(), &[Dim::Country, Dim::Category]);
        let got: BTreeMap<(CountryCode, String), u64> =
            rows.iter().map(|r| ((r.country.unwrap(), r.category.clone().unwrap()), r.count)).collect();
        prop_assert_eq!(&got, &cells);
        // marginal over categories
        let by_country = store.counts(&CubeFilter::default(), &[Dim::Country]);
        for row in by_country {
            let c = row.country.unwrap();
            let sum: u64 = cells.iter().filter(|((k, _), _)| *k == c).map(|(_, n)| n).sum();
            prop_assert_eq!(row.count, sum);
        }
        // day marginal equals the global daily series
        for row in store.counts(&CubeFilter::default(), &[Dim::Day]) {
            let d = row.day.unwrap();
            prop_assert_eq!(row.count, daily[&d]);
            prop_assert_eq!(store.cube().global(d), daily[&d]);
        }
    }
}
