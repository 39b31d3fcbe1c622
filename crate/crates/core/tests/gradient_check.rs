use mortrisk::models::{param_count, MlpModel};
use mortrisk::preprocess::FeatureMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn backprop_matches_central_differences_on_5_4_1() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let rows: Vec<Vec<f64>> = (0..40).map(|_| (0..5).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()).collect();
    let labels: Vec<u8> = (0..40).map(|i| u8::from(i % 3 == 0)).collect();
    let m = FeatureMatrix::from_rows(&rows, &labels).unwrap();
    let mut net = MlpModel::init(vec![5, 4, 1], 1e-3, 7).unwrap();
    assert_eq!(net.params.len(), param_count(&[5, 4, 1]));
    assert_eq!(net.params.len(), 5 * 4 + 4 + 4 + 1);
    let analytic = net.gradient(&m);
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for k in 0..net.params.len() {
        let orig = net.params[k];
        net.params[k] = orig + eps;
        let up = net.loss(&m);
        net.params[k] = orig - eps;
        let down = net.loss(&m);
        net.params[k] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let rel = (numeric - analytic[k]).abs() / numeric.abs().max(analytic[k].abs()).max(1e-8);
        worst = worst.max(rel);
    }
    assert!(worst < 1e-4, "worst relative error {worst}");
}
