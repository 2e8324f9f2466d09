mod common;

use common::*;
use kinship_core::classify::NaiveBayes;
use kinship_core::kinship::{joint_prob_indexed, log_lr, pair_likelihood, LrCalculator};
use kinship_core::simulate::{IndexedProfile, RelationshipTheta};
use kinship_core::{joint_genotype_prob, Genotype, Statistic};
use num_rational::Ratio;
use proptest::prelude::*;

// brute-force enumeration over ordered alleles and IBD copy events
const PC_PER_SUBPOP: [f64; 4] = [950.5118175002406, 967.6859476854751, 993.3321603076924, 569.1701476011181];
const PC_POOLED: f64 = 742.761260830053;
const SB_PER_SUBPOP: [f64; 4] = [566.6924125734306, 635.0678539223019, 672.7867207761423, 411.38223928027094];
const SB_POOLED: f64 = 505.5448174375068;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn check_example(theta: RelationshipTheta, per: [f64; 4], pooled: f64) {
    let table = example_table();
    let a = IndexedProfile::resolve(&x1(), &table).unwrap();
    let b = IndexedProfile::resolve(&x2(), &table).unwrap();
    let set = LrCalculator::new(&table)
        .compute(&a, &b, &theta, &NaiveBayes::new(&table))
        .unwrap();
    for (got, want) in set.per_subpop_lr().iter().zip(per) {
        assert!(rel(*got, want) < 1e-9, "{got} vs {want}");
    }
    let avg: f64 = PRIORS.iter().zip(per).map(|(p, l)| p * l).sum();
    assert!(rel(set.lr(Statistic::Laf), pooled) < 1e-9);
    assert!(rel(set.lr(Statistic::Avg), avg) < 1e-9);
    assert!(rel(set.lr(Statistic::Max), per[2]) < 1e-9);
    assert!(rel(set.lr(Statistic::Min), per[3]) < 1e-9);
    assert_eq!(set.class_index, 3);
    assert!(rel(set.lr(Statistic::Class), per[3]) < 1e-9);
}

#[test]
fn example_pair_parent_child_statistics() {
    check_example(RelationshipTheta::parent_child(), PC_PER_SUBPOP, PC_POOLED);
}

#[test]
fn example_pair_full_sibling_statistics() {
    check_example(RelationshipTheta::full_sibling(), SB_PER_SUBPOP, SB_POOLED);
}

#[test]
fn labelled_and_indexed_forms_agree() {
    let table = example_table();
    let theta = RelationshipTheta::full_sibling();
    let g1 = Genotype::parse("15", "17").unwrap();
    let g2 = Genotype::parse("17", "15").unwrap();
    let p = joint_genotype_prob(&g1, &g2, &theta, table.locus(1).distribution(2)).unwrap();
    let i = |a: &str| table.locus(1).allele_index(&a.parse().unwrap()).unwrap() as u16;
    let q = joint_prob_indexed([i("15"), i("17")], [i("15"), i("17")], &theta, table.locus(1).freqs(2));
    assert_eq!(p, q);
    assert!(joint_genotype_prob(&Genotype::parse("8", "15").unwrap(), &g2, &theta, table.locus(1).distribution(0)).is_err());
}

#[test]
fn exact_rational_normalization() {
    let r = |n, d| Ratio::<i64>::new(n, d);
    let freqs = [r(1, 2), r(1, 3), r(1, 12), r(1, 12)];
    let thetas = [
        RelationshipTheta::new(r(1, 1), r(0, 1), r(0, 1)).unwrap(),
        RelationshipTheta::new(r(0, 1), r(1, 1), r(0, 1)).unwrap(),
        RelationshipTheta::new(r(1, 4), r(1, 2), r(1, 4)).unwrap(),
        RelationshipTheta::new(r(1, 8), r(5, 8), r(1, 4)).unwrap(),
    ];
    let gs = unordered_genotypes(4);
    for theta in &thetas {
        let mut total = r(0, 1);
        for &g1 in &gs {
            for &g2 in &gs {
                let p = joint_prob_indexed(g1, g2, theta, &freqs);
                assert_eq!(p, joint_prob_indexed(g2, g1, theta, &freqs));
                total += p;
            }
        }
        assert_eq!(total, r(1, 1));
    }
}

fn freq_vector() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, 2..=6).prop_map(normalize)
}

fn theta_strategy() -> impl Strategy<Value = RelationshipTheta> {
    prop::collection::vec(0.0f64..1.0, 3).prop_map(|v| {
        let v = normalize(v.into_iter().map(|x| x + 1e-3).collect());
        RelationshipTheta::new(v[0], v[1], 1.0 - v[0] - v[1]).unwrap()
    })
}

proptest! {
    #[test]
    fn joint_probabilities_sum_to_one(freqs in freq_vector(), theta in theta_strategy()) {
        let gs = unordered_genotypes(freqs.len() as u16);
        let total: f64 = gs.iter()
            .flat_map(|&a| gs.iter().map(move |&b| (a, b)))
            .map(|(a, b)| joint_prob_indexed(a, b, &theta, &freqs))
            .sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn joint_probability_is_symmetric(freqs in freq_vector(), theta in theta_strategy(), i in 0usize..100, j in 0usize..100) {
        let gs = unordered_genotypes(freqs.len() as u16);
        let (a, b) = (gs[i % gs.len()], gs[j % gs.len()]);
        let p = joint_prob_indexed(a, b, &theta, &freqs);
        let q = joint_prob_indexed(b, a, &theta, &freqs);
        prop_assert!((p - q).abs() <= 1e-15 * p.max(1e-300));
    }

    #[test]
    fn joint_probability_is_linear_in_theta(
        freqs in freq_vector(),
        ta in theta_strategy(),
        tb in theta_strategy(),
        alpha in 0.0f64..=1.0,
        i in 0usize..100,
        j in 0usize..100,
    ) {
        let gs = unordered_genotypes(freqs.len() as u16);
        let (a, b) = (gs[i % gs.len()], gs[j % gs.len()]);
        let mixed = RelationshipTheta::mix(alpha, &ta, &tb);
        let lhs = joint_prob_indexed(a, b, &mixed, &freqs);
        let rhs = alpha * joint_prob_indexed(a, b, &ta, &freqs)
            + (1.0 - alpha) * joint_prob_indexed(a, b, &tb, &freqs);
        prop_assert!((lhs - rhs).abs() < 1e-14);
    }

    #[test]
    fn log_space_matches_direct_product(
        freqs in prop::collection::vec(freq_vector(), 1..8),
        picks in prop::collection::vec((0usize..100, 0usize..100), 8),
        theta in theta_strategy(),
    ) {
        let loci: Vec<_> = freqs.iter().enumerate().map(|(l, f)| {
            let rows = f.iter().enumerate()
                .map(|(i, &p)| (format!("{}", i + 1).parse().unwrap(), vec![p]))
                .collect();
            kinship_core::freqdata::LocusTable::new(format!("L{l}"), rows).unwrap()
        }).collect();
        let table = kinship_core::freqdata::AlleleFrequencyTable::new(vec!["S".into()], loci, vec![1.0]).unwrap();
        let (mut g1, mut g2) = (Vec::new(), Vec::new());
        let mut direct = 1.0;
        let mut direct_h0 = 1.0;
        for (l, f) in freqs.iter().enumerate() {
            let gs = unordered_genotypes(f.len() as u16);
            let (a, b) = (gs[picks[l].0 % gs.len()], gs[picks[l].1 % gs.len()]);
            direct *= joint_prob_indexed(a, b, &theta, f);
            direct_h0 *= joint_prob_indexed(a, b, &RelationshipTheta::unrelated(), f);
            g1.push(a);
            g2.push(b);
        }
        let (x1, x2) = (IndexedProfile::from_indices(g1), IndexedProfile::from_indices(g2));
        let ll = pair_likelihood(&x1, &x2, &theta, &table, 0);
        if direct > 0.0 {
            prop_assert!((ll - direct.ln()).abs() < 1e-10 * direct.ln().abs().max(1.0));
            let lr = log_lr(&x1, &x2, &theta, &table, 0).unwrap();
            prop_assert!((lr - (direct / direct_h0).ln()).abs() < 1e-9);
        } else {
            prop_assert_eq!(ll, f64::NEG_INFINITY);
        }
    }
}

fn pair_posterior(priors: &[f64]) -> Vec<f64> {
    let table = example_table().with_priors(priors.to_vec()).unwrap();
    let a = IndexedProfile::resolve(&x1(), &table).unwrap();
    let b = IndexedProfile::resolve(&x2(), &table).unwrap();
    NaiveBayes::new(&table).classify_pair(&a, &b).1.probs
}

#[test]
fn example_pair_posterior_under_stated_priors() {
    // P(Ai) P(X1|Ai) P(X2|Ai), normalized, evaluated independently
    let want = [0.039292292687421834, 0.05830726419494341, 0.09867708921552608, 0.8037233539021087];
    for (g, w) in pair_posterior(&PRIORS).iter().zip(want) {
        assert!((g - w).abs() < 1e-12);
    }
}

#[test]
fn example_pair_posterior_with_unit_weight_on_first_subpopulation() {
    // weights (1.0, 0.2, 0.3, 0.4) reproduce the commonly quoted
    // (0.2903, 0.0431, 0.0729, 0.5938)
    let w = [1.0, 0.2, 0.3, 0.4];
    let s: f64 = w.iter().sum();
    let priors: Vec<f64> = w.iter().map(|x| x / s).collect();
    for (g, q) in pair_posterior(&priors).iter().zip([0.2903, 0.0431, 0.0729, 0.5938]) {
        assert!((g - q).abs() < 5e-5, "{g} vs {q}");
    }
}
