use mortrisk::explain::{shapley_exact, shapley_sampled, tree_shapley, BackgroundSet, Players, TreeEnsemble};
use mortrisk::models::{train_forest, train_mlp, Classifier, ForestConfig, MlpConfig};
use mortrisk::preprocess::FeatureMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const P: usize = 6;

fn data(n: usize, seed: u64) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..P).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()).collect();
    let labels: Vec<u8> = rows
        .iter()
        .map(|r| u8::from(1.5 * r[0] - r[1] + r[2] * r[3] + 0.4 * rng.random::<f64>() > 0.2))
        .collect();
    FeatureMatrix::from_rows(&rows, &labels).unwrap()
}

/// Interventional value of a coalition given as a column mask.
fn value<C: Classifier + ?Sized>(model: &C, x: &[f64], bg: &[Vec<f64>], on: &[bool]) -> f64 {
    bg.iter()
        .map(|b| {
            let h: Vec<f64> = (0..x.len()).map(|j| if on[j] { x[j] } else { b[j] }).collect();
            model.predict_row(&h)
        })
        .sum::<f64>()
        / bg.len() as f64
}

/// Shapley values as the average marginal contribution over all p! orderings.
fn permutation_oracle<C: Classifier + ?Sized>(model: &C, x: &[f64], bg: &[Vec<f64>]) -> Vec<f64> {
    fn permutations(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if k == items.len() {
            out.push(items.clone());
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            permutations(items, k + 1, out);
            items.swap(k, i);
        }
    }
    let p = x.len();
    let mut perms = Vec::new();
    permutations(&mut (0..p).collect(), 0, &mut perms);
    let mut phi = vec![0.0; p];
    for order in &perms {
        let mut on = vec![false; p];
        let mut prev = value(model, x, bg, &on);
        for &j in order {
            on[j] = true;
            let v = value(model, x, bg, &on);
            phi[j] += v - prev;
            prev = v;
        }
    }
    phi.iter().map(|v| v / perms.len() as f64).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn exact_matches_the_permutation_definition() {
    let m = data(300, 1);
    let mlp = train_mlp(
        &m,
        &MlpConfig {
            hidden: vec![8],
            epochs: 30,
            learning_rate: 1e-2,
            seed: 2,
            ..MlpConfig::default()
        },
    )
    .unwrap();
    let bg = BackgroundSet::sample(&m, 12, 3);
    let players = Players::singletons(P);
    for i in 0..3 {
        let x = m.row(100 + i);
        let exact = shapley_exact(&mlp, x, &bg, &players).unwrap();
        let oracle = permutation_oracle(&mlp, x, &bg.rows);
        assert!(max_abs_diff(&exact.phi, &oracle) < 1e-12);
        assert!(exact.efficiency_gap() < 1e-9);
    }
}

#[test]
fn sampled_converges_to_exact_for_forest_and_mlp() {
    let m = data(400, 5);
    let forest = train_forest(
        &m,
        &ForestConfig {
            n_trees: 20,
            max_depth: 3,
            seed: 9,
            ..ForestConfig::default()
        },
    )
    .unwrap();
    let mlp = train_mlp(
        &m,
        &MlpConfig {
            hidden: vec![8],
            epochs: 30,
            learning_rate: 1e-2,
            seed: 4,
            ..MlpConfig::default()
        },
    )
    .unwrap();
    let bg = BackgroundSet::sample(&m, 30, 1);
    let players = Players::singletons(P);
    let models: [&dyn Classifier; 2] = [&forest, &mlp];
    for model in models {
        for i in 0..10u64 {
            let x = m.row(i as usize * 17);
            let exact = shapley_exact(model, x, &bg, &players).unwrap();
            let est = shapley_sampled(model, x, &bg, &players, 2000, i).unwrap();
            let gap = max_abs_diff(&exact.phi, &est.phi);
            assert!(gap <= 0.01, "instance {i}: {gap}");
            assert!((est.base_value - exact.base_value).abs() < 1e-12);
            // Every permutation telescopes, so efficiency holds exactly.
            assert!(est.efficiency_gap() < 1e-9);
        }
    }
}

#[test]
fn axioms_on_a_known_function() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut rows: Vec<Vec<f64>> = (0..15).map(|_| (0..P).map(|_| rng.random::<f64>()).collect()).collect();
    // Players 0 and 1 are interchangeable only if the background is too.
    for r in &mut rows {
        r[1] = r[0];
    }
    let bg = BackgroundSet::from_rows(rows);
    let players = Players::singletons(P);
    // Symmetric in x0/x1, ignores x5.
    let f = |x: &[f64]| x[0] * x[1] + (x[0] + x[1]) * x[2] + x[3].powi(2) - 0.5 * x[4];
    let g = |x: &[f64]| (x[2] - x[3]).abs() + x[0] * x[4];
    let (fm, gm) = ((P, f), (P, g));
    let combo = (P, move |x: &[f64]| 2.0 * f(x) - 3.0 * g(x));
    let mut x: Vec<f64> = (0..P).map(|_| rng.random::<f64>()).collect();
    x[1] = x[0];
    let a = shapley_exact(&fm, &x, &bg, &players).unwrap();
    assert!(a.efficiency_gap() <= 1e-9);
    assert!(a.phi[5].abs() <= 1e-12, "dummy {}", a.phi[5]);
    assert!((a.phi[0] - a.phi[1]).abs() <= 1e-12, "symmetry");
    let b = shapley_exact(&gm, &x, &bg, &players).unwrap();
    let c = shapley_exact(&combo, &x, &bg, &players).unwrap();
    for j in 0..P {
        assert!((c.phi[j] - (2.0 * a.phi[j] - 3.0 * b.phi[j])).abs() <= 1e-12, "linearity {j}");
    }
}

#[test]
fn grouped_players_move_together() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let bg = BackgroundSet::from_rows((0..10).map(|_| (0..4).map(|_| rng.random::<f64>()).collect()).collect());
    let f = (4, |x: &[f64]| x[0] * x[1] + x[2] - x[3]);
    let players = Players {
        names: vec!["ab".into(), "c".into(), "d".into()],
        groups: vec![vec![0, 1], vec![2], vec![3]],
    };
    let x = [0.3, 0.9, 0.1, 0.4];
    let a = shapley_exact(&f, &x, &bg, &players).unwrap();
    assert_eq!(a.phi.len(), 3);
    assert!(a.efficiency_gap() <= 1e-9);
    // Additive parts get their own marginal contributions exactly.
    let mean = |j: usize| bg.rows.iter().map(|r| r[j]).sum::<f64>() / bg.len() as f64;
    assert!((a.phi[1] - (x[2] - mean(2))).abs() < 1e-12);
    assert!((a.phi[2] + (x[3] - mean(3))).abs() < 1e-12);
}

#[test]
fn tree_values_are_efficient_and_ignore_unused_columns() {
    let m = data(300, 8);
    let forest = train_forest(
        &m,
        &ForestConfig {
            n_trees: 20,
            max_depth: 3,
            seed: 1,
            ..ForestConfig::default()
        },
    )
    .unwrap();
    let used: std::collections::BTreeSet<usize> = forest
        .trees
        .iter()
        .flat_map(|t| t.nodes.iter())
        .filter_map(|n| match n {
            mortrisk::models::TreeNode::Split { column, .. } => Some(*column),
            _ => None,
        })
        .collect();
    let mut idx: Vec<usize> = (0..m.n_rows()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(0));
    for &i in idx.iter().take(25) {
        let a = tree_shapley(TreeEnsemble::Forest(&forest), m.row(i)).unwrap();
        assert!(a.efficiency_gap() <= 1e-9);
        for j in 0..P {
            if !used.contains(&j) {
                assert_eq!(a.phi[j], 0.0);
            }
        }
    }
}
