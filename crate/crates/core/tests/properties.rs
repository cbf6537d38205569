use chartrel::lct::{normalize_numeric, parse_lct, serialize_lct, Cell, LctTable};
use chartrel::scrm::{image_iou, MatchMode, Scorer, ToleranceLevel};
use chartrel::triplet::{
    canonical_key, from_str, parse_str, permute, serialize_str, to_str, transpose, StrFormat, Triplet, TripletSet,
};
use proptest::prelude::*;

/// Field text that exercises quoting: commas, quotes, line breaks, "/n",
/// padding and non-ASCII.
fn field() -> impl Strategy<Value = String> {
    prop_oneof![
        "[A-Za-z0-9 ]{0,6}",
        "[a-c,\"\n\r/ é]{0,6}",
        "-?[0-9]{1,4}(\\.[0-9]{1,2})?%?",
        Just("/n".to_string()),
        Just("none".to_string()),
    ]
}

fn table() -> impl Strategy<Value = LctTable> {
    (1usize..5, 1usize..5).prop_flat_map(|(n, m)| {
        (
            proptest::collection::vec(field(), m),
            proptest::collection::vec(field(), n),
            proptest::collection::vec(proptest::collection::vec(field().prop_map(Cell::new), m), n),
        )
            .prop_map(|(cols, rows, vals)| LctTable::new(cols, rows, vals).unwrap())
    })
}

fn perms(n: usize, m: usize) -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    (Just((0..n).collect::<Vec<_>>()).prop_shuffle(), Just((0..m).collect::<Vec<_>>()).prop_shuffle())
}

/// Tables whose row and column entities are distinct, in shuffled order.
fn grid_table() -> impl Strategy<Value = LctTable> {
    (proptest::collection::btree_set("[a-z]{1,4}", 1..5), proptest::collection::btree_set("[A-Z]{1,4}", 1..5))
        .prop_flat_map(|(rows, cols)| {
            let (n, m) = (rows.len(), cols.len());
            let cell = "[0-9]{1,3}|x[a-z]{0,2}".prop_map(Cell::new);
            let vals = proptest::collection::vec(proptest::collection::vec(cell, m), n);
            (Just(rows), Just(cols), vals, perms(n, m))
        })
        .prop_map(|(rows, cols, vals, (rp, cp))| {
            let t = LctTable::new(cols.into_iter().collect(), rows.into_iter().collect(), vals).unwrap();
            permute(&t, &rp, &cp).unwrap()
        })
}

fn table_with_perms() -> impl Strategy<Value = (LctTable, Vec<usize>, Vec<usize>)> {
    table().prop_flat_map(|t| {
        let (n, m) = (t.height(), t.width());
        (Just(t), perms(n, m)).prop_map(|(t, (r, c))| (t, r, c))
    })
}

/// Small triplet sets drawn from a tiny vocabulary so that near-misses are
/// common.
fn small_set() -> impl Strategy<Value = TripletSet> {
    let ent = prop_oneof![
        Just("Sales"),
        Just("sales"),
        Just("Sale"),
        Just("Q1"),
        Just("Q 1"),
        Just("Q2"),
        Just("Total revenue"),
    ];
    let val = prop_oneof![
        Just("10"),
        Just("10.4"),
        Just("10.8"),
        Just("9.6"),
        Just("0"),
        Just("n/a"),
        Just("N/A "),
        Just("yes"),
    ];
    proptest::collection::vec((ent.clone(), ent, val), 0..6)
        .prop_map(|v| v.into_iter().map(|(r, c, x)| Triplet::new(r, c, x).unwrap()).collect())
}

/// Loop-based expansion written independently of `to_str`.
fn expand_swapped(t: &LctTable) -> Vec<(String, String, String)> {
    let mut out = Vec::new();
    for m in 0..t.width() {
        for n in 0..t.height() {
            out.push((t.col_entities()[m].clone(), t.row_entities()[n].clone(), t.values()[n][m].raw().to_string()));
        }
    }
    out.sort();
    out
}

fn as_tuples(set: &TripletSet) -> Vec<(String, String, String)> {
    let mut v: Vec<_> =
        set.iter().map(|t| (t.row_entity.clone(), t.col_entity.clone(), t.value.raw().to_string())).collect();
    v.sort();
    v
}

/// Largest number of disjoint compatible pairs, by trying every injection of
/// the smaller side into the larger.
fn brute_force_matching(compat: &[Vec<bool>]) -> usize {
    fn go(i: usize, compat: &[Vec<bool>], used: &mut Vec<bool>) -> usize {
        if i == compat.len() {
            return 0;
        }
        let mut best = go(i + 1, compat, used);
        for j in 0..used.len() {
            if compat[i][j] && !used[j] {
                used[j] = true;
                best = best.max(1 + go(i + 1, compat, used));
                used[j] = false;
            }
        }
        best
    }
    let q = compat.first().map_or(0, Vec::len);
    go(0, compat, &mut vec![false; q])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn lct_round_trip(t in table()) {
        let text = serialize_lct(&t);
        prop_assert_eq!(parse_lct(&text).unwrap(), t);
    }

    #[test]
    fn lct_parse_is_total(text in "[a-z,\"\n/ ]{0,40}") {
        // any outcome is fine as long as it is a value, not a panic
        let _ = parse_lct(&text);
    }

    #[test]
    fn numeric_canonical_idempotent(raw in "[-+$€ ]{0,2}[0-9,]{1,8}(\\.[0-9]{0,3})?%?") {
        if let Some(x) = normalize_numeric(&raw) {
            prop_assert_eq!(normalize_numeric(&x.to_string()), Some(x));
        }
    }

    #[test]
    fn expansion_size_and_transpose((t, _, _) in table_with_perms()) {
        let set = to_str(&t);
        prop_assert_eq!(set.len(), t.width() * t.height());
        prop_assert_eq!(as_tuples(&to_str(&transpose(&t))), expand_swapped(&t));
        prop_assert_eq!(transpose(&transpose(&t)), t.clone());
        let keys = |s: &TripletSet| {
            let mut v: Vec<String> = s.iter().map(Triplet::canonical_key).collect();
            v.sort();
            v
        };
        prop_assert_eq!(keys(&to_str(&transpose(&t))), keys(&set));
    }

    #[test]
    fn permutation_preserves_multiset((t, rp, cp) in table_with_perms()) {
        prop_assert_eq!(to_str(&permute(&t, &rp, &cp).unwrap()), to_str(&t));
    }

    #[test]
    fn grid_round_trip(t in grid_table()) {
        let set = to_str(&t);
        let back = from_str(&set).unwrap();
        // canonical order is lexicographic
        let mut rows = t.row_entities().to_vec();
        rows.sort();
        let mut cols = t.col_entities().to_vec();
        cols.sort();
        prop_assert_eq!(back.row_entities(), &rows[..]);
        prop_assert_eq!(back.col_entities(), &cols[..]);
        prop_assert_eq!(to_str(&back), set);
    }

    #[test]
    fn str_serializations_round_trip(t in table()) {
        // text and JSONL require non-blank entities
        let set: TripletSet = to_str(&t)
            .iter()
            .filter(|x| !x.row_entity.trim().is_empty() && !x.col_entity.trim().is_empty())
            .cloned()
            .collect();
        for format in [StrFormat::Text, StrFormat::Jsonl] {
            let text = serialize_str(&set, format);
            let back: TripletSet = parse_str(&text, format).unwrap().try_into().unwrap();
            prop_assert_eq!(&back, &set);
        }
    }

    #[test]
    fn canonical_key_order_free(a in "[A-Za-z ]{1,6}", b in "[A-Za-z ]{1,6}") {
        prop_assert_eq!(canonical_key(&[&a, &b]), canonical_key(&[&b, &a]));
    }

    #[test]
    fn tolerance_monotone(pred in small_set(), gt in small_set()) {
        for mode in [MatchMode::Matched, MatchMode::PaperLiteral] {
            let s = Scorer::new(mode).image_scores(&pred, &gt, &ToleranceLevel::standard());
            prop_assert!(s[0].matched <= s[1].matched && s[1].matched <= s[2].matched);
        }
    }

    #[test]
    fn matched_mode_bounds(pred in small_set(), gt in small_set()) {
        let table = Scorer::default().pair_table(&pred, &gt);
        for tol in ToleranceLevel::standard() {
            let s = table.score(&tol, MatchMode::Matched);
            prop_assert!(s.matched <= s.p.min(s.q));
            prop_assert!((0.0..=1.0).contains(&s.iou));
            let compat: Vec<Vec<bool>> = (0..pred.len())
                .map(|i| (0..gt.len()).map(|j| table.judgment(i, j, &tol).l).collect())
                .collect();
            prop_assert_eq!(s.matched, brute_force_matching(&compat));
        }
    }

    #[test]
    fn self_score_is_perfect(s in small_set()) {
        for tol in ToleranceLevel::standard() {
            prop_assert_eq!(image_iou(&s, &s, &tol, MatchMode::Matched).iou, 1.0);
        }
    }

    #[test]
    fn scores_invariant_under_transforms((t, rp, cp) in table_with_perms(), (g, _, _) in table_with_perms()) {
        let gt = to_str(&g);
        for mode in [MatchMode::Matched, MatchMode::PaperLiteral] {
            let scorer = Scorer::new(mode);
            let tiers = ToleranceLevel::standard();
            let base = scorer.image_scores(&to_str(&t), &gt, &tiers);
            let transposed = scorer.image_scores(&to_str(&transpose(&t)), &gt, &tiers);
            let permuted = scorer.image_scores(&to_str(&permute(&t, &rp, &cp).unwrap()), &gt, &tiers);
            let flipped = scorer.image_scores(&gt, &to_str(&transpose(&t)), &tiers);
            let flipped_base = scorer.image_scores(&gt, &to_str(&t), &tiers);
            for k in 0..3 {
                prop_assert_eq!(base[k].iou.to_bits(), transposed[k].iou.to_bits());
                prop_assert_eq!(base[k].iou.to_bits(), permuted[k].iou.to_bits());
                prop_assert_eq!(flipped[k].iou.to_bits(), flipped_base[k].iou.to_bits());
            }
        }
    }
}
