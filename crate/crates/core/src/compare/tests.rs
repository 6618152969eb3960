use num_bigint::BigInt;
use num_rational::Ratio;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

type Q = Ratio<BigInt>;

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("T{i}")).collect()
}

fn part(labels: &[usize]) -> Clustering {
    Clustering::from_labels(names(labels.len()), labels.to_vec()).unwrap()
}

/// Pair-counting form: a = same/same, b = diff/diff, c and d mixed.
fn ari_by_pairs(x: &[usize], y: &[usize]) -> f64 {
    let n = x.len();
    let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in (i + 1)..n {
            match (x[i] == x[j], y[i] == y[j]) {
                (true, true) => a += 1.0,
                (false, false) => b += 1.0,
                (true, false) => c += 1.0,
                (false, true) => d += 1.0,
            }
        }
    }
    let total = a + b + c + d;
    let expected = (a + c) * (a + d) / total;
    let max = ((a + c) + (a + d)) / 2.0;
    if max == expected {
        return if c == 0.0 && d == 0.0 { 1.0 } else { 0.0 };
    }
    (a - expected) / (max - expected)
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..(1 << n))
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|i| m & (1 << i) != 0).collect())
        .collect()
}

#[test]
fn contingency_examples() {
    let y = part(&[0, 0, 0, 1, 1, 1]);
    let y2 = part(&[0, 0, 1, 0, 1, 1]);
    let t = contingency_table(&y, &y2).unwrap();
    assert_eq!(t.m, vec![vec![2, 1], vec![1, 2]]);
    assert_eq!(t.row_sums, vec![3, 3]);
    assert_eq!(t.col_sums, vec![3, 3]);
    assert_eq!(t.total, 6);

    let same = contingency_table(&y, &y).unwrap();
    assert_eq!(same.m, vec![vec![3, 0], vec![0, 3]]);

    let t = contingency_table(&part(&[0; 4]), &part(&[0, 1, 2, 3])).unwrap();
    assert_eq!(t.m, vec![vec![1, 1, 1, 1]]);
}

#[test]
fn contingency_rejects_other_tickers() {
    let a = part(&[0, 1]);
    let b = Clustering::from_labels(vec!["X".into(), "Y".into()], vec![0, 1]).unwrap();
    assert!(contingency_table(&a, &b).is_err());
}

#[test]
fn ari_examples() {
    let y = part(&[0, 0, 0, 1, 1, 1]);
    let y2 = part(&[0, 0, 1, 0, 1, 1]);
    let exact: Q = adjusted_rand_index_as(&y, &y2).unwrap();
    assert_eq!(exact, Q::new(BigInt::from(-1), BigInt::from(9)));
    assert!((adjusted_rand_index(&y, &y2).unwrap() + 1.0 / 9.0).abs() < 1e-12);
    assert_eq!(adjusted_rand_index(&y, &y).unwrap(), 1.0);
    assert_eq!(
        adjusted_rand_index(&part(&[0; 4]), &part(&[0, 1, 2, 3])).unwrap(),
        0.0
    );
}

#[test]
fn ari_degenerate_denominator() {
    let singles = part(&[0, 1, 2, 3]);
    assert_eq!(adjusted_rand_index(&singles, &singles).unwrap(), 1.0);
    let one = part(&[0; 4]);
    assert_eq!(adjusted_rand_index(&one, &one).unwrap(), 1.0);
    assert!(adjusted_rand_index(&part(&[0]), &part(&[0])).is_err());
}

#[test]
fn ari_matches_pair_counting_exhaustively_small() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..500 {
        let n = rng.random_range(2..=8);
        let kx = rng.random_range(1..=n);
        let ky = rng.random_range(1..=n);
        let x: Vec<usize> = (0..n).map(|_| rng.random_range(0..kx)).collect();
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..ky)).collect();
        let got = adjusted_rand_index(&part(&x), &part(&y)).unwrap();
        assert!((got - ari_by_pairs(&x, &y)).abs() < 1e-12, "{x:?} {y:?}");
    }
}

#[test]
fn ari_null_mean_near_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x: Vec<usize> = (0..60).map(|i| i % 6).collect();
    let y: Vec<usize> = (0..60).map(|i| i / 12).collect();
    let px = part(&x);
    let mut total = 0.0;
    for _ in 0..1000 {
        let mut shuffled = y.clone();
        shuffled.shuffle(&mut rng);
        total += adjusted_rand_index(&px, &part(&shuffled)).unwrap();
    }
    assert!((total / 1000.0).abs() < 0.02);
}

#[test]
fn hypergeometric_examples() {
    assert_eq!(hypergeometric_pvalue(10, 3, 4, 0).unwrap(), 1.0);
    let pmf: Q = hypergeometric_pmf_as(10, 3, 4, 3).unwrap();
    assert_eq!(pmf, Q::new(BigInt::from(4), BigInt::from(120)));
    assert!((hypergeometric_pmf(10, 3, 4, 3).unwrap() - 4.0 / 120.0).abs() < 1e-14);
    assert!((hypergeometric_pvalue(10, 3, 4, 3).unwrap() - 4.0 / 120.0).abs() < 1e-14);
}

#[test]
fn hypergeometric_rejects_infeasible() {
    assert!(hypergeometric_pvalue(10, 3, 4, 4).is_err());
    assert!(hypergeometric_pmf(10, 8, 8, 5).is_err());
    assert_eq!(hypergeometric_pvalue(10, 8, 8, 5).unwrap(), 1.0);
    assert!(hypergeometric_pmf(5, 6, 1, 0).is_err());
}

#[test]
fn pmf_matches_subset_enumeration() {
    for n in 1..=12usize {
        for size_cand in 0..=n {
            let cand: Vec<usize> = (0..size_cand).collect();
            for size_ref in 0..=n {
                let all = subsets(n, size_ref);
                let total = all.len();
                let lo = (size_ref + size_cand).saturating_sub(n);
                for k in lo..=size_ref.min(size_cand) {
                    let hits = all
                        .iter()
                        .filter(|s| s.iter().filter(|v| cand.contains(v)).count() == k)
                        .count();
                    let want = Q::new(BigInt::from(hits), BigInt::from(total));
                    let got: Q = hypergeometric_pmf_as(
                        n as u64,
                        size_ref as u64,
                        size_cand as u64,
                        k as u64,
                    )
                    .unwrap();
                    assert_eq!(got, want, "N={n} ref={size_ref} cand={size_cand} k={k}");
                }
            }
        }
    }
}

#[test]
fn tail_survives_large_n() {
    use num_traits::ToPrimitive;
    for k in [5u64, 12, 30, 35] {
        let exact: Q = (k..=35)
            .map(|x| hypergeometric_pmf_as::<Q>(342, 40, 35, x).unwrap())
            .fold(Q::from_integer(BigInt::from(0)), |a, b| a + b);
        let want = exact.to_f64().unwrap();
        let got = hypergeometric_pvalue(342, 40, 35, k).unwrap();
        assert!(got > 0.0);
        assert!(((got - want) / want).abs() < 1e-9, "k={k} {got} {want}");
    }
}

#[test]
fn match_examples() {
    let labels: Vec<usize> = (0..50).map(|i| i / 5).collect();
    let cands = part(&labels);
    let r = match_similar_clusters(&[10, 11, 12, 13, 14], &cands, 0.01, 10, TestStatistic::Tail)
        .unwrap();
    assert_eq!(r.selected, Some(2));
    assert_eq!(r.selected_size(), 5);
    assert_eq!(
        r.selected_members(&cands),
        vec!["T10", "T11", "T12", "T13", "T14"]
    );
    assert!(r.tests[2].p_value < 0.001);

    let cands = part(&[0, 0, 0, 1, 1, 1, 2, 2, 2, 2]);
    let r = match_similar_clusters(&[0, 1, 2], &cands, 0.01, 3, TestStatistic::Tail).unwrap();
    assert_eq!((r.tests[1].overlap, r.tests[1].p_value), (0, 1.0));
    assert_eq!((r.tests[2].overlap, r.tests[2].p_value), (0, 1.0));

    let no = part(&[0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2]);
    let r = match_similar_clusters(&[5], &no, 0.01, 3, TestStatistic::Tail).unwrap();
    assert_eq!(r.selected, None);
    assert_eq!(r.selected_size(), 0);
}

#[test]
fn match_picks_largest() {
    let mut labels = vec![0usize; 7];
    labels.extend(vec![1; 4]);
    labels.extend(vec![2; 49]);
    let cands = part(&labels);
    let reference: Vec<usize> = (0..11).collect();
    let r = match_similar_clusters(&reference, &cands, 0.01, 3, TestStatistic::Tail).unwrap();
    assert!(r.tests[0].matched && r.tests[1].matched);
    assert_eq!(r.selected, Some(0));
}

#[test]
fn match_rejects_bad_input() {
    let c = part(&[0, 1]);
    assert!(match_similar_clusters(&[], &c, 0.01, 1, TestStatistic::Tail).is_err());
    assert!(match_similar_clusters(&[0], &c, 1.5, 1, TestStatistic::Tail).is_err());
    assert!(match_similar_clusters(&[0], &c, 0.01, 0, TestStatistic::Tail).is_err());
}

#[test]
fn point_mass_mode_uses_pmf() {
    let labels: Vec<usize> = (0..20).map(|i| i / 10).collect();
    let cands = part(&labels);
    let r =
        match_similar_clusters(&[0, 1, 2, 3], &cands, 0.5, 1, TestStatistic::PointMass).unwrap();
    assert!((r.tests[0].p_value - hypergeometric_pmf(20, 4, 10, 4).unwrap()).abs() < 1e-15);
}

proptest! {
    #[test]
    fn ari_symmetric_and_relabel_invariant(
        x in prop::collection::vec(0usize..5, 2..40),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<usize> = x.iter().map(|_| rng.random_range(0..4)).collect();
        let (px, py) = (part(&x), part(&y));
        let ab: Q = adjusted_rand_index_as(&px, &py).unwrap();
        let ba: Q = adjusted_rand_index_as(&py, &px).unwrap();
        prop_assert_eq!(ab.clone(), ba);
        let mut perm: Vec<usize> = (0..5).collect();
        perm.shuffle(&mut rng);
        let renamed: Vec<usize> = x.iter().map(|&l| perm[l] + 7).collect();
        let again: Q = adjusted_rand_index_as(&part(&renamed), &py).unwrap();
        prop_assert_eq!(ab.clone(), again);
        prop_assert!(ab <= Q::from_integer(BigInt::from(1)));
        let self_sim: Q = adjusted_rand_index_as(&px, &px).unwrap();
        prop_assert_eq!(self_sim, Q::from_integer(BigInt::from(1)));
    }

    #[test]
    fn pvalue_monotone_in_k(n in 1u64..300, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let size_ref = (a * n as f64) as u64;
        let size_cand = (b * n as f64) as u64;
        let lo = (size_ref + size_cand).saturating_sub(n);
        let hi = size_ref.min(size_cand);
        let mut prev = 1.0 + 1e-12;
        let mut mass = 0.0;
        for k in lo..=hi {
            let p = hypergeometric_pvalue(n, size_ref, size_cand, k).unwrap();
            prop_assert!(p <= prev + 1e-12);
            prev = p;
            mass += hypergeometric_pmf(n, size_ref, size_cand, k).unwrap();
        }
        prop_assert!((mass - 1.0).abs() < 1e-12);
    }
}
