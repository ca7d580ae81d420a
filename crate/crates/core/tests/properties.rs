use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use varthresh::dataio::{self, Preprocessing, Report, ReportFormat};
use varthresh::thresholding::{hard_threshold, penalty_value, support_at_threshold};
use varthresh::{build_empirical_path, fit_ols, select_threshold, Dataset, PenaltySpec};

fn dataset(max_n: usize, max_p: usize) -> impl Strategy<Value = Dataset> {
    (4..max_n, 1..max_p).prop_flat_map(|(n, p)| {
        (
            prop::collection::vec(-10.0..10.0f64, n * p),
            prop::collection::vec(-10.0..10.0f64, n),
        )
            .prop_map(move |(x, y)| {
                Dataset::new(
                    DMatrix::from_row_slice(n, p, &x),
                    DVector::from_vec(y),
                    (0..p).map(|j| format!("c{j}")).collect(),
                )
                .unwrap()
            })
    })
}

fn coefficients() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), -5.0..5.0f64], 1..12)
}

proptest! {
    #[test]
    fn support_and_excluded_partition_columns(beta in coefficients(), delta in 1e-3..5.0f64) {
        let (excluded, support) = support_at_threshold(&beta, delta);
        let mut all: Vec<usize> = excluded.iter().chain(support.indices()).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..beta.len()).collect::<Vec<_>>());
        let bar = hard_threshold(&beta, delta);
        for j in 0..beta.len() {
            if excluded.contains(&j) {
                prop_assert!(beta[j].abs() <= delta && bar[j] == 0.0);
            } else {
                prop_assert!(beta[j].abs() > delta && bar[j] == beta[j]);
            }
        }
    }

    #[test]
    fn penalty_is_homogeneous(c in 0.01..10.0f64, r in 0.05..2.0f64, delta in 1e-3..10.0f64, n in 2usize..100_000) {
        let base = penalty_value(delta, n, PenaltySpec::new(c, r).unwrap()).unwrap();
        let doubled_c = penalty_value(delta, n, PenaltySpec::new(2.0 * c, r).unwrap()).unwrap();
        let shrunk = penalty_value(delta / 2f64.powf(1.0 / r), n, PenaltySpec::new(c, r).unwrap()).unwrap();
        assert_relative_eq!(doubled_c, 2.0 * base, max_relative = 1e-12);
        assert_relative_eq!(shrunk, 2.0 * base, max_relative = 1e-12);
    }

    #[test]
    fn penalty_spec_text_round_trip(c in 1e-4..100.0f64, r in 1e-4..5.0f64) {
        let spec = PenaltySpec::new(c, r).unwrap();
        let back: PenaltySpec = spec.to_string().parse().unwrap();
        prop_assert_eq!(spec, back);
    }

    #[test]
    fn csv_round_trip_is_exact(data in dataset(12, 5)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        dataio::write_dataset_csv(&data, &path, "target").unwrap();
        let back = dataio::load_csv(&path, "target", &[]).unwrap();
        prop_assert_eq!(back, data);
    }

    #[test]
    fn standardized_columns_have_unit_scale(data in dataset(30, 5)) {
        let opts = Preprocessing::default();
        if let Ok(std) = dataio::preprocess(&data, &opts) {
            let n = std.n() as f64;
            let mut cols: Vec<Vec<f64>> = std.design().column_iter().map(|c| c.iter().copied().collect()).collect();
            cols.push(std.response().as_slice().to_vec());
            for col in cols {
                let mean = col.iter().sum::<f64>() / n;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
                prop_assert!(mean.abs() < 1e-10);
                prop_assert!((var - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn selection_json_round_trip(data in dataset(30, 6)) {
        let beta = fit_ols(&data);
        prop_assume!(beta.values.iter().any(|b| b.abs() > 0.0));
        let path = build_empirical_path(&beta).unwrap();
        let sel = select_threshold(&data, &beta, &path, PenaltySpec::new(0.75, 0.4).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("s.json");
        dataio::write_report(Report::Selection(&sel), &file, ReportFormat::Json).unwrap();
        prop_assert_eq!(dataio::read_selection_json(&file).unwrap(), sel);
    }
}
