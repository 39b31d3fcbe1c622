use mortrisk::preprocess::{ColumnKind, ColumnMeta, FeatureMatrix};
use mortrisk::resample::{smote_nc_traced, SmoteConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two continuous columns and one three-level categorical block.
fn mixed_matrix(n_pos: usize, n_neg: usize, seed: u64) -> FeatureMatrix {
    let mut cols: Vec<ColumnMeta> = (0..2)
        .map(|j| ColumnMeta {
            name: format!("c{j}"),
            source: format!("c{j}"),
            source_index: j,
            kind: ColumnKind::Continuous,
        })
        .collect();
    for cat in ["A", "B", "C"] {
        cols.push(ColumnMeta {
            name: format!("g={cat}"),
            source: "g".into(),
            source_index: 2,
            kind: ColumnKind::Indicator { category: cat.into() },
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n_pos + n_neg {
        let y = u8::from(i < n_pos);
        let shift = if y == 1 { 1.0 } else { 0.0 };
        data.push(rng.random::<f64>() + shift);
        data.push(rng.random::<f64>() * 2.0);
        let c = rng.random_range(0..3);
        data.extend((0..3).map(|k| if k == c { 1.0 } else { 0.0 }));
        labels.push(y);
    }
    FeatureMatrix::new(cols, data, labels).unwrap()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn population_sd(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

#[test]
fn minority_is_topped_up_to_an_exact_balance() {
    let m = mixed_matrix(76, 924, 1);
    let out = smote_nc_traced(&m, &SmoteConfig::with_seed(3)).unwrap();
    assert_eq!(out.matrix.positives(), 924);
    assert_eq!(out.matrix.n_rows() - out.matrix.positives(), 924);
    assert_eq!(out.provenance.len(), 924 - 76);
    // Original rows are kept verbatim and first.
    for i in 0..m.n_rows() {
        assert_eq!(out.matrix.row(i), m.row(i));
    }
}

#[test]
fn synthetic_rows_follow_their_provenance() {
    let m = mixed_matrix(40, 200, 7);
    let out = smote_nc_traced(&m, &SmoteConfig::with_seed(11)).unwrap();
    let minority: Vec<usize> = (0..m.n_rows()).filter(|&i| m.label(i) == 1).collect();
    // Independent neighbor search with the SMOTE-NC distance.
    let sds: Vec<f64> = (0..2)
        .map(|j| population_sd(&minority.iter().map(|&i| m.get(i, j)).collect::<Vec<_>>()))
        .collect();
    let med2 = median(sds).powi(2);
    let cat = |i: usize| (2..5).position(|j| m.get(i, j) == 1.0).unwrap();
    let dist = |a: usize, b: usize| {
        (0..2).map(|j| (m.get(a, j) - m.get(b, j)).powi(2)).sum::<f64>() + if cat(a) != cat(b) { med2 } else { 0.0 }
    };
    for p in &out.provenance {
        let row = out.matrix.row(p.row);
        assert!((0.0..1.0).contains(&p.delta));
        // One δ drives every continuous column.
        for j in 0..2 {
            let expect = m.get(p.parent, j) + p.delta * (m.get(p.neighbor, j) - m.get(p.parent, j));
            assert!((row[j] - expect).abs() <= 1e-9);
        }
        let mut others: Vec<usize> = minority.iter().copied().filter(|&b| b != p.parent).collect();
        others.sort_by(|&a, &b| dist(p.parent, a).total_cmp(&dist(p.parent, b)).then(a.cmp(&b)));
        assert_eq!(p.neighbors, others[..5].to_vec());
        assert!(p.neighbors.contains(&p.neighbor));
        // Categorical value is the neighbors' mode, lowest category on ties.
        let mut votes = [0usize; 3];
        for &n in &p.neighbors {
            votes[cat(n)] += 1;
        }
        let top = *votes.iter().max().unwrap();
        let mode = votes.iter().position(|&v| v == top).unwrap();
        assert_eq!(&row[2..5], &[0, 1, 2].map(|k| if k == mode { 1.0 } else { 0.0 }));
        assert_eq!(p.mode_counts[0], votes.to_vec());
    }
}

#[test]
fn resampling_is_seeded() {
    let m = mixed_matrix(20, 80, 2);
    let a = smote_nc_traced(&m, &SmoteConfig::with_seed(5)).unwrap();
    let b = smote_nc_traced(&m, &SmoteConfig::with_seed(5)).unwrap();
    let c = smote_nc_traced(&m, &SmoteConfig::with_seed(6)).unwrap();
    assert_eq!(a.matrix, b.matrix);
    assert_ne!(a.matrix, c.matrix);
}
