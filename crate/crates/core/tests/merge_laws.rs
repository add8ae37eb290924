//! Algebraic properties of the merge-function catalog.

use ccache_sim::line::{f64_word, Line, WORDS_PER_LINE};
use ccache_sim::merge::apply_lines;
use ccache_sim::MergeSpec;
use proptest::prelude::*;

/// Merge each core's (source, update) pair into `mem` in the given order.
fn merge_all(spec: &MergeSpec, mem: Line, updates: &[(Line, Line)], order: &[usize]) -> Line {
    let mut f = spec.instantiate().unwrap();
    order.iter().fold(mem, |m, &i| {
        apply_lines(&mut f, &updates[i].0, &updates[i].1, &m).unwrap()
    })
}

fn line() -> impl Strategy<Value = Line> {
    prop::array::uniform8(any::<u64>())
}

/// Updates produced by commutative ops on a shared starting copy.
fn updates(src: Line, deltas: Vec<Line>, op: fn(u64, u64) -> u64) -> Vec<(Line, Line)> {
    deltas
        .into_iter()
        .map(|d| {
            let mut u = src;
            for i in 0..WORDS_PER_LINE {
                u[i] = op(src[i], d[i]);
            }
            (src, u)
        })
        .collect()
}

fn case() -> impl Strategy<Value = (Line, Vec<Line>, Vec<usize>)> {
    (line(), prop::collection::vec(line(), 1..6)).prop_flat_map(|(mem, ds)| {
        let n = ds.len();
        (Just(mem), Just(ds), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn add_diff_is_order_independent((mem, ds, perm) in case()) {
        let ups = updates(mem, ds, u64::wrapping_add);
        let id: Vec<usize> = (0..ups.len()).collect();
        let a = merge_all(&MergeSpec::AddDiff, mem, &ups, &id);
        prop_assert_eq!(a, merge_all(&MergeSpec::AddDiff, mem, &ups, &perm));
        // And equals applying every delta directly.
        let mut want = mem;
        for (s, u) in &ups {
            for i in 0..WORDS_PER_LINE {
                want[i] = want[i].wrapping_add(u[i].wrapping_sub(s[i]));
            }
        }
        prop_assert_eq!(a, want);
    }

    #[test]
    fn or_and_min_are_order_independent((mem, ds, perm) in case()) {
        let id: Vec<usize> = (0..ds.len()).collect();
        let ors = updates(mem, ds.clone(), |a, b| a | b);
        prop_assert_eq!(merge_all(&MergeSpec::OrMerge, mem, &ors, &id), merge_all(&MergeSpec::OrMerge, mem, &ors, &perm));
        let mins = updates(mem, ds, |a, b| (a as i64).min(b as i64) as u64);
        prop_assert_eq!(merge_all(&MergeSpec::MinMerge, mem, &mins, &id), merge_all(&MergeSpec::MinMerge, mem, &mins, &perm));
    }

    #[test]
    fn float_add_is_order_independent_on_exact_values(
        base in prop::array::uniform8(-1000i32..1000),
        ds in prop::collection::vec(prop::array::uniform8(-1000i32..1000), 1..6),
        seed in any::<u64>(),
    ) {
        // Small integers keep every partial sum exact in f64.
        let mem: Line = base.map(|x| f64_word(x as f64));
        let ups: Vec<(Line, Line)> = ds
            .iter()
            .map(|d| {
                let mut u = mem;
                for i in 0..WORDS_PER_LINE {
                    u[i] = f64_word((base[i] + d[i]) as f64);
                }
                (mem, u)
            })
            .collect();
        let id: Vec<usize> = (0..ups.len()).collect();
        let mut perm = id.clone();
        perm.rotate_left(seed as usize % ups.len());
        prop_assert_eq!(
            merge_all(&MergeSpec::VecAddFloat, mem, &ups, &id),
            merge_all(&MergeSpec::VecAddFloat, mem, &ups, &perm)
        );
    }

    #[test]
    fn unchanged_update_is_identity(mem in line(), src in line()) {
        for spec in [MergeSpec::AddDiff, MergeSpec::VecAddFloat] {
            prop_assert_eq!(merge_all(&spec, mem, &[(src, src)], &[0]), mem);
        }
    }
}
