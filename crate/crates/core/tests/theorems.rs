//! Structural properties of the accuracy and discrimination coefficients on
//! graphs where the answer is known.

mod common;

use common::*;
use fairsel::coefficients::{coefficient_table, discrimination_terms, ScoringProblem};
use fairsel::prob::{JointDistribution, SubsetKey};
use fairsel::synth::{make_fixture, stand_in_model, FixtureKind};
use fairsel::Execution;

const EXEC: Execution = Execution::Parallel;

#[test]
fn accuracy_vanishes_exactly_when_no_parent_of_y_is_removed() {
    let mut models = Vec::new();
    for kind in FixtureKind::ALL {
        for n in 2..=4 {
            for seed in 0..3 {
                models.push(make_fixture(kind, n, seed).unwrap());
            }
        }
    }
    models.extend((0..3).map(stand_in_model));
    for model in &models {
        let prob = model_problem(model);
        let parents = key_of(&label_parents(model));
        let table = coefficient_table(&prob, EXEC).unwrap();
        for key in SubsetKey::all(prob.n()) {
            let acc = table.acc(key).unwrap();
            if key.bits() & parents.bits() == 0 {
                assert!(acc.abs() <= 1e-9, "v_acc({key}) = {acc} without a parent");
            } else {
                assert!(acc > 1e-6, "v_acc({key}) = {acc} with a parent");
            }
        }
    }
}

#[test]
fn both_coefficients_are_monotone_and_non_negative() {
    let mut rng = rng(31);
    for case in 0..12 {
        let cards = if case % 3 == 0 { vec![2, 3, 2] } else { vec![2, 2, 2] };
        let dist = random_joint(&mut rng, axy_schema(2, &cards, 2));
        let table = coefficient_table(&problem(&dist), EXEC).unwrap();
        for small in SubsetKey::all(3) {
            let (acc, disc) = (table.acc(small).unwrap(), table.disc(small).unwrap());
            assert!(acc >= -1e-8 && disc >= -1e-8, "negative at {small}");
            for big in SubsetKey::all(3).filter(|b| small.is_subset_of(*b)) {
                assert!(table.acc(big).unwrap() >= acc - 1e-8, "v_acc {small} > {big}");
                assert!(table.disc(big).unwrap() >= disc - 1e-8, "v_d {small} > {big}");
            }
        }
    }
}

/// Joint over `(A, X1, X2, Y)`, all binary, from a weight function.
fn joint_from(f: impl Fn(usize, usize, usize, usize) -> f64) -> JointDistribution {
    let mut w = Vec::with_capacity(16);
    for a in 0..2 {
        for x1 in 0..2 {
            for x2 in 0..2 {
                for y in 0..2 {
                    w.push(f(a, x1, x2, y));
                }
            }
        }
    }
    JointDistribution::from_weights(axy_schema(2, &[2, 2], 2), w).unwrap()
}

#[test]
fn discrimination_vanishes_under_each_independence() {
    let mut rng = rng(5);
    for _ in 0..5 {
        let p1 = random_dist(&mut rng, 2);
        let py = random_dist(&mut rng, 2);
        let pa = random_dist(&mut rng, 2);
        let t3: Vec<Vec<f64>> = (0..4).map(|_| random_dist(&mut rng, 2)).collect();
        let t8: Vec<Vec<f64>> = (0..8).map(|_| random_dist(&mut rng, 2)).collect();
        let x2 = |a: usize, x1: usize, y: usize, v: usize| t8[a * 4 + x1 * 2 + y][v];
        let patterns = [
            // X1 independent of Y
            joint_from(|a, x1, v, y| p1[x1] * py[y] * t3[x1 * 2 + y][a] * x2(a, x1, y, v)),
            // X1 independent of A
            joint_from(|a, x1, v, y| pa[a] * p1[x1] * t3[a * 2 + x1][y] * x2(a, x1, y, v)),
            // X1 independent of A given Y
            joint_from(|a, x1, v, y| py[y] * t3[y][a] * t3[2 + y][x1] * x2(a, x1, y, v)),
        ];
        for (i, dist) in patterns.iter().enumerate() {
            let prob = problem(dist);
            let d = discrimination_terms(&prob, SubsetKey::singleton(0)).unwrap();
            assert!(d.value.abs() <= 1e-9, "pattern {i}: v_d = {}", d.value);
        }
    }
    for seed in 0..3 {
        let model = make_fixture(FixtureKind::IndependentFeature, 3, seed).unwrap();
        let prob = model_problem(&model);
        let d = discrimination_terms(&prob, SubsetKey::singleton(2)).unwrap();
        assert!(d.value.abs() <= 1e-9, "isolated feature: v_d = {}", d.value);
    }
}

fn product_formula(prob: &ScoringProblem, key: SubsetKey) -> f64 {
    let d = prob.dist();
    let a = [0];
    let y = [prob.n() + 1];
    let s: Vec<usize> = key.iter().map(|i| i + 1).collect();
    let i_ya = d.mutual_info_axes(&y, &a).unwrap();
    let i_sa = d.mutual_info_axes(&s, &a).unwrap();
    let i_sa_y = d.cond_mutual_info_axes(&s, &a, &y).unwrap();
    i_ya * i_sa * i_sa_y
}

#[test]
fn path_discriminatory_sets_follow_the_product_formula() {
    for n in 2..=4 {
        for seed in 0..3 {
            let model = make_fixture(FixtureKind::PathBlocking, n, seed).unwrap();
            let prob = model_problem(&model);
            let table = coefficient_table(&prob, EXEC).unwrap();
            let d = prob.dist();
            let mut blocking = 0;
            for key in SubsetKey::all(n).filter(|k| !k.is_empty()) {
                let s: Vec<usize> = key.iter().map(|i| i + 1).collect();
                let leak = d.cond_mutual_info_axes(&[0], &[n + 1], &s).unwrap();
                if leak > 1e-12 {
                    continue;
                }
                blocking += 1;
                let got = table.disc(key).unwrap();
                let want = product_formula(&prob, key);
                assert!((got - want).abs() <= 1e-8, "n={n} seed={seed} {key}: {got} vs {want}");
            }
            assert!(blocking >= 1);

            let k = key_of(&protected_children(&model));
            assert_eq!(k, key_of(&[0, 1]));
            let best = table.disc(k).unwrap();
            for key in SubsetKey::all(n) {
                assert!(best >= table.disc(key).unwrap() - 1e-8, "n={n} seed={seed}: v_d({key}) beats K");
            }
        }
    }
}
