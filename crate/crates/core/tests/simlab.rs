use nalgebra::DMatrix;
use proptest::prelude::*;
use robprec::simlab::{
    contaminate_bernoulli, contaminate_fixed, gen_banded, gen_dense, gen_scattered, generate, row_contamination_prob,
    sample_gaussian,
};
use robprec::{Contamination, Family, PdMatrix, Scenario};

fn eigs(m: &DMatrix<f64>) -> (f64, f64) {
    let e = m.clone().symmetric_eigen().eigenvalues;
    (e.min(), e.max())
}

#[test]
fn generators_match_definitions() {
    let b = gen_banded(3).unwrap();
    let want = DMatrix::from_row_slice(3, 3, &[1.0, 0.6, 0.36, 0.6, 1.0, 0.6, 0.36, 0.6, 1.0]);
    assert!((b.as_matrix() - want).abs().max() < 1e-15);
    for p in [2, 10, 50, 200] {
        assert!(eigs(gen_banded(p).unwrap().as_matrix()).0 > 0.0);
        let d = gen_dense(p).unwrap();
        let (lo, hi) = eigs(d.as_matrix());
        assert!((lo - 0.5).abs() < 1e-10);
        assert!((hi - (1.0 + 0.5 * (p as f64 - 1.0))).abs() < 1e-10);
    }
    assert_eq!(gen_dense(2).unwrap().as_matrix(), &DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]));
}

#[test]
fn scattered_condition_and_density() {
    let mut density = 0.0;
    for seed in 0..20 {
        let t = gen_scattered(60, 60.0, seed).unwrap();
        let m = t.as_matrix();
        let (lo, hi) = eigs(m);
        // Standardizing divides by the constant diagonal, so the condition
        // number is unchanged.
        assert!((hi / lo - 60.0).abs() <= 1e-6 * 60.0);
        assert!((0..60).all(|i| m[(i, i)] == 1.0));
        assert_eq!(m, &m.transpose());
        let nz = (0..60).flat_map(|i| ((i + 1)..60).map(move |j| (i, j))).filter(|&(i, j)| m[(i, j)] != 0.0).count();
        density += nz as f64 / 1770.0 / 20.0;
    }
    assert!((density - 0.1).abs() <= 0.02, "{density}");
}

#[test]
fn gaussian_sampling_recovers_covariance() {
    let theta = gen_banded(5).unwrap();
    let sigma = theta.inverse().unwrap();
    let s = sample_gaussian(&theta, 100_000, 1).unwrap().classical_covariance();
    assert!((s.as_matrix() - sigma.as_matrix()).abs().max() < 0.05);

    let id = PdMatrix::new(DMatrix::identity(4, 4)).unwrap();
    let x = sample_gaussian(&id, 10_000, 2).unwrap();
    let c = x.classical_covariance();
    assert!((0..4).all(|j| (c.as_matrix()[(j, j)] - 1.0).abs() < 0.05));
    assert_eq!(x, sample_gaussian(&id, 10_000, 2).unwrap());
}

#[test]
fn fixed_contamination_counts_and_mask() {
    let theta = gen_banded(6).unwrap();
    let x = sample_gaussian(&theta, 100, 3).unwrap();
    let none = contaminate_fixed(&x, 0, 10.0, 10.0, 4).unwrap();
    assert_eq!(none.data, x);
    assert_eq!(none.mask.total(), 0);

    let c = contaminate_fixed(&x, 25, 10.0, 10.0, 4).unwrap();
    for j in 0..6 {
        assert_eq!(c.mask.column_count(j), 25);
    }
    assert!(contaminate_fixed(&x, 101, 10.0, 10.0, 4).is_err());
}

#[test]
fn row_probability_closed_form() {
    assert!((row_contamination_prob(0.1, 30).unwrap() - 0.957_608_841_724_783_8).abs() < 1e-12);
    assert_eq!(row_contamination_prob(0.0, 30).unwrap(), 0.0);
    assert!((1.0 - row_contamination_prob(0.03, 30).unwrap() - 0.401).abs() < 1e-3);
}

#[test]
fn empirical_clean_row_fractions() {
    let id = PdMatrix::new(DMatrix::identity(30, 30)).unwrap();
    let (mut fixed_touched, mut bern_clean, reps) = (0.0, 0.0, 200);
    for r in 0..reps {
        let x = sample_gaussian(&id, 100, 1000 + r).unwrap();
        let f = contaminate_fixed(&x, 10, 10.0, 10.0, 5000 + r).unwrap();
        fixed_touched += 1.0 - f.mask.clean_rows() as f64 / 100.0;
        let b = contaminate_bernoulli(&x, 0.1, 10.0, 10.0, 9000 + r).unwrap();
        bern_clean += b.mask.clean_rows() as f64 / 100.0;
    }
    let (touched, clean) = (100.0 * fixed_touched / reps as f64, 100.0 * bern_clean / reps as f64);
    assert!((touched - 95.76).abs() <= 3.0, "{touched}");
    assert!((clean - 4.24).abs() <= 2.0, "{clean}");
}

#[test]
fn bernoulli_density() {
    let id = PdMatrix::new(DMatrix::identity(100, 100)).unwrap();
    let x = sample_gaussian(&id, 100, 6).unwrap();
    assert_eq!(contaminate_bernoulli(&x, 0.0, 10.0, 10.0, 1).unwrap().data, x);
    for eps in [0.02, 0.1, 0.25] {
        let mean = (0..100)
            .map(|r| contaminate_bernoulli(&x, eps, 10.0, 10.0, r).unwrap().mask.total() as f64 / 1e4)
            .sum::<f64>()
            / 100.0;
        assert!((mean - eps).abs() <= 0.01, "{eps}: {mean}");
    }
}

fn scenario_strategy() -> impl Strategy<Value = Scenario> {
    (
        prop_oneof![Just(Family::Banded), Just(Family::Scattered), Just(Family::Dense)],
        3usize..12,
        20usize..60,
        any::<u64>(),
        any::<bool>(),
        0usize..10,
    )
        .prop_map(|(family, p, n, seed, bern, k)| {
            let mut s = Scenario::new(family, p, n);
            s.seed = seed;
            s.contamination = if bern {
                Contamination::Bernoulli(k as f64 / 20.0)
            } else {
                Contamination::Fixed(k)
            };
            s
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generate_is_deterministic_and_mask_consistent(s in scenario_strategy()) {
        let a = generate(&s).unwrap();
        let b = generate(&s).unwrap();
        prop_assert_eq!(&a.data, &b.data);
        prop_assert_eq!(&a.mask, &b.mask);
        prop_assert_eq!(a.theta_true.as_matrix(), b.theta_true.as_matrix());

        let clean = generate(&Scenario { contamination: Contamination::Fixed(0), ..s.clone() }).unwrap();
        for i in 0..s.n {
            for j in 0..s.p {
                let changed = a.data.as_matrix()[(i, j)] != clean.data.as_matrix()[(i, j)];
                prop_assert_eq!(changed, a.mask.get(i, j), "cell ({}, {})", i, j);
            }
        }
        if let Contamination::Fixed(k) = s.contamination {
            for j in 0..s.p {
                prop_assert_eq!(a.mask.column_count(j), k);
            }
        }
        let t = a.theta_true.as_matrix();
        prop_assert!((0..s.p).all(|i| (t[(i, i)] - 1.0).abs() < 1e-15));
        prop_assert_eq!(t, &t.transpose());
        prop_assert!(eigs(t).0 > 0.0);
    }
}
