mod common;

use common::random_matrix;
use latent_bias::hyperplane::{abs_cos, fit_joint_hyperplanes, known_basis_excluding, JointFitConfig};
use latent_bias::numgrad::{dot, qr_thin, Matrix};

fn planted_labels(z: &Matrix, normals: &[Vec<f64>], offsets: &[f64]) -> Vec<Vec<u8>> {
    normals
        .iter()
        .zip(offsets)
        .map(|(w, o)| (0..z.rows()).map(|i| u8::from(dot(z.row(i), w) + o >= 0.0)).collect())
        .collect()
}

#[test]
fn axis_planes_are_recovered() {
    for seed in 0..3 {
        let z = random_matrix(1000, 2, seed, "axes");
        let normals = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let labels = planted_labels(&z, &normals, &[0.0, 0.0]);
        let names = vec!["a".to_string(), "b".to_string()];
        let fit = fit_joint_hyperplanes(&z, &labels, &names, &JointFitConfig { seed, ..Default::default() }).unwrap();
        for (j, w) in normals.iter().enumerate() {
            let c = abs_cos(&fit.basis.q().column(j), w).unwrap();
            assert!(c > 0.99, "seed {seed} column {j}: {c} {:?} loss {}", fit.accuracy, fit.final_loss);
        }
        assert!(fit.accuracy.iter().all(|a| *a > 0.95), "{:?}", fit.accuracy);
    }
}

#[test]
fn random_orthonormal_basis_is_recovered() {
    let (planted, _) = qr_thin(&random_matrix(10, 4, 7, "planted")).unwrap();
    let normals = planted.columns();
    let offsets = [0.3, -0.2, 0.0, 0.5];
    let z = random_matrix(2000, 10, 8, "latents");
    let labels = planted_labels(&z, &normals, &offsets);
    let names: Vec<String> = (0..4).map(|j| format!("f{j}")).collect();
    let fit = fit_joint_hyperplanes(&z, &labels, &names, &JointFitConfig { seed: 1, ..Default::default() }).unwrap();
    let q = fit.basis.q();
    for (j, w) in normals.iter().enumerate() {
        assert!(abs_cos(&q.column(j), w).unwrap() > 0.95, "column {j}");
        // offsets keep their sign relative to the recovered normal
        if offsets[j] != 0.0 {
            let sign = dot(&q.column(j), w).signum();
            assert_eq!((fit.basis.offsets()[j] * sign).signum(), offsets[j].signum(), "offset {j}");
        }
    }
    // returned normals are orthonormal
    let gram = q.t_matmul(q).unwrap();
    for a in 0..4 {
        for b in 0..4 {
            let expect = if a == b { 1.0 } else { 0.0 };
            assert!((gram.get(a, b) - expect).abs() < 1e-10);
        }
    }
}

#[test]
fn excluding_an_attribute_reorthogonalizes_the_rest() {
    let w = random_matrix(6, 3, 3, "w");
    let names: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
    let basis = known_basis_excluding(&w, &[1.0, 2.0, 3.0], &names, 1).unwrap();
    assert_eq!(basis.names(), ["x", "z"]);
    assert_eq!(basis.offsets(), [1.0, 3.0]);
    let (direct, _) = qr_thin(&w.remove_column(1).unwrap()).unwrap();
    assert_eq!(basis.q(), &direct);
    assert!(abs_cos(&basis.q().column(0), &w.column(0)).unwrap() > 1.0 - 1e-12);
    assert!(known_basis_excluding(&w, &[0.0; 3], &names, 3).is_err());
}

#[test]
fn single_class_labels_are_degenerate() {
    let z = random_matrix(50, 3, 1, "z");
    let labels = vec![vec![1u8; 50]];
    let err = fit_joint_hyperplanes(&z, &labels, &["only".to_string()], &JointFitConfig::default()).unwrap_err();
    assert!(err.is_numerical(), "{err}");
    assert!(err.to_string().contains("only"));
}
