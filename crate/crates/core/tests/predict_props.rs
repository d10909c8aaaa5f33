use claimlot::lottery::top_k;
use claimlot::metrics::utility;
use claimlot::predict::{
    conformal_pvalues, ingest_csv, split, synthetic, train, BootstrapEnsemble, Matrix, ModelSpec,
    Standardizer,
};
use claimlot::{ClaimProfile, RandomSource};
use proptest::prelude::*;

fn rows(n: usize, d: usize, rng: &mut RandomSource) -> Matrix {
    let data: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.unit() * 4.0 - 2.0).collect()).collect();
    Matrix::from_rows(&data).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn p_values_lie_in_the_unit_interval(seed in any::<u64>(), n_cal in 1usize..80) {
        let mut rng = RandomSource::new(seed, 0);
        let (tr, cal, pool) = (rows(30, 3, &mut rng), rows(n_cal, 3, &mut rng), rows(25, 3, &mut rng));
        let s = conformal_pvalues(&tr, &cal, &pool, 0.2, 0, &mut rng).unwrap();
        let floor = 1.0 / (n_cal + 1) as f64;
        for &p in &s.p_values {
            prop_assert!(p >= floor && p <= 1.0);
        }
    }

    #[test]
    fn calibration_order_does_not_matter(seed in any::<u64>()) {
        let mut rng = RandomSource::new(seed, 1);
        let (tr, cal, pool) = (rows(20, 2, &mut rng), rows(40, 2, &mut rng), rows(15, 2, &mut rng));
        let mut idx: Vec<usize> = (0..cal.rows()).collect();
        rng.shuffle(&mut idx);
        let shuffled = cal.select(&idx);
        let a = conformal_pvalues(&tr, &cal, &pool, 0.1, 0, &mut RandomSource::new(0, 0)).unwrap();
        let b = conformal_pvalues(&tr, &shuffled, &pool, 0.1, 0, &mut RandomSource::new(0, 0)).unwrap();
        prop_assert_eq!(a.p_values, b.p_values);
    }

    #[test]
    fn votes_ignore_member_order(
        members in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 12), 2..9),
        t in 0.0f64..1.0,
        k in 1usize..12,
    ) {
        let a = BootstrapEnsemble::from_members(members.clone()).unwrap();
        let mut rev = members;
        rev.reverse();
        let b = BootstrapEnsemble::from_members(rev).unwrap();
        prop_assert_eq!(a.vote_fractions_above(t), b.vote_fractions_above(t));
        prop_assert_eq!(a.vote_fractions_top_k(k), b.vote_fractions_top_k(k));
    }
}

#[test]
fn synthetic_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    let data = synthetic::generate(300, 4);
    synthetic::write_csv(&data, std::fs::File::create(&path).unwrap()).unwrap();
    let ds = ingest_csv(&path, &synthetic::schema()).unwrap();
    assert_eq!(ds.len(), 300);
    assert_eq!(ds.labels, data.iter().map(|r| r.label).collect::<Vec<_>>());
    // 4 numeric plus two 4-level one-hot blocks.
    assert_eq!(ds.features.cols(), 12);
}

#[test]
fn top_k_by_logistic_scores_beats_the_base_rate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    synthetic::write_csv(&synthetic::generate(2000, 9), std::fs::File::create(&path).unwrap()).unwrap();
    let ds = ingest_csv(&path, &synthetic::schema()).unwrap();
    let sp = split(ds.len(), 0.8, 0, 3).unwrap();
    let (xtr, xte) = (ds.features.select(&sp.train), ds.features.select(&sp.test));
    let st = Standardizer::fit(&xtr, &ds.numeric_columns);
    let (xtr, xte) = (st.apply(&xtr), st.apply(&xte));
    let ytr: Vec<u8> = sp.train.iter().map(|&i| ds.labels[i]).collect();
    let yte: Vec<u8> = sp.test.iter().map(|&i| ds.labels[i]).collect();
    let spec = ModelSpec::logistic();
    let model = train(&spec, &xtr, &ytr, &RandomSource::new(3, 0)).unwrap();
    let scores = model.predict_scores(&xte);
    let k = xte.rows() / 4;
    let r = top_k(&ClaimProfile::new(scores).unwrap(), k).unwrap();
    let u = utility(&r, Some(&yte), k).unwrap();
    let base = yte.iter().map(|&y| y as f64).sum::<f64>() / yte.len() as f64;
    assert!(u > base + 0.1, "utility {u} base {base}");
}
