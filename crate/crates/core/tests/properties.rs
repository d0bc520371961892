// SPDX-License-Identifier: Apache-2.0

use proptest::prelude::*;

use privdecay::bounds::{laplace_tail, utility_delta, NoiseProfile};
use privdecay::extensions::Histogram;
use privdecay::harness::{parse_records, write_records, OutputFormat, RunRecord};
use privdecay::{
    AllWindowSum, DecaySpec, DyadicTree, ExactOracle, ExponentialSum, Mechanism, Noise,
    PolynomialSum, RandomSource, RunningSum, WindowSum,
};

fn unit_stream(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..=1.0, 1..max)
}

fn naive(xs: &[f64], j: usize, w: usize) -> f64 {
    xs[j.saturating_sub(w)..j].iter().sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prefix_decomposition_tiles_exactly(k in 0u32..12, u_frac in 0.0f64..1.0) {
        let hi = 1u64 << k;
        let tree = DyadicTree::new(1, hi).unwrap();
        let u = 1 + ((hi - 1) as f64 * u_frac) as u64;
        let parts: Vec<_> = tree.decompose_prefix(u).unwrap().collect();
        let mut next = 1;
        for iv in &parts {
            prop_assert_eq!(iv.l, next);
            prop_assert!(iv.len().is_power_of_two());
            prop_assert_eq!((iv.l - 1) % iv.len(), 0);
            next = iv.u + 1;
        }
        prop_assert_eq!(next, u + 1);
        prop_assert_eq!(parts.len() as u32, u.count_ones());
    }

    #[test]
    fn window_matches_oracle(xs in unit_stream(300), k in 0u32..7) {
        let w = 1u64 << k;
        let mut m = WindowSum::new(w, 1.0, Noise::disabled()).unwrap();
        for j in 1..=xs.len() {
            let y = m.push(xs[j - 1]).unwrap();
            prop_assert!((y - naive(&xs, j, w as usize)).abs() < 1e-9);
        }
    }

    #[test]
    fn exponential_matches_oracle(xs in unit_stream(300), alpha in 0.67f64..0.999) {
        let mut m = ExponentialSum::new(alpha, 1.0, Noise::disabled()).unwrap();
        let mut f = 0.0;
        for &x in &xs {
            f = alpha * f + x;
            prop_assert!((m.push(x).unwrap() - f).abs() < 1e-9);
        }
    }

    #[test]
    fn running_matches_oracle(xs in unit_stream(300)) {
        let mut m = RunningSum::new(1.0, Noise::disabled()).unwrap();
        let mut f = 0.0;
        for &x in &xs {
            f += x;
            prop_assert!((m.push(x).unwrap() - f).abs() < 1e-9);
        }
    }

    #[test]
    fn polynomial_sandwich(xs in unit_stream(200), c in 1.1f64..4.0, beta in 0.1f64..0.9) {
        let mut m = PolynomialSum::new(c, beta, 1.0, Noise::disabled()).unwrap();
        let mut o = ExactOracle::new(DecaySpec::Polynomial { c, beta }).unwrap();
        for &x in &xs {
            let (y, f) = (m.push(x).unwrap(), o.push(x).unwrap());
            prop_assert!(y >= (1.0 - beta) * f - 1e-9 && y <= f + 1e-9, "y={} f={}", y, f);
        }
    }

    #[test]
    fn allwindow_answers_any_window(xs in unit_stream(200), queries in prop::collection::vec((0.0f64..1.0, 1u64..400), 1..20)) {
        let mut m = AllWindowSum::new(1.0, 2.0, Noise::disabled()).unwrap();
        for &x in &xs {
            m.update(x).unwrap();
        }
        for (jf, w) in queries {
            let j = 1 + ((xs.len() - 1) as f64 * jf) as usize;
            let y = m.query(j as u64, w).unwrap();
            prop_assert!((y - naive(&xs, j, w as usize)).abs() < 1e-9);
        }
    }

    #[test]
    fn window_composition_reads_only_the_past(k in 0u32..6, i in 1u64..200) {
        let w = 1u64 << k;
        let mut m = WindowSum::new(w, 1.0, Noise::disabled()).unwrap();
        for _ in 0..i {
            m.push(1.0).unwrap();
        }
        for term in m.composition(i).unwrap() {
            prop_assert!(term.interval.u <= i);
        }
    }

    #[test]
    fn tail_bound_decreases_in_t(scales in prop::collection::vec(0.1f64..5.0, 1..6), t in 0.1f64..3.0, frac in 0.05f64..0.99) {
        let p = NoiseProfile::new(scales).unwrap();
        let lam = frac * p.lambda_limit();
        let a = laplace_tail(&p, t, lam).unwrap();
        let b = laplace_tail(&p, t + 0.5, lam).unwrap();
        prop_assert!(b <= a + 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn delta_decreases_in_gamma(scales in prop::collection::vec(0.1f64..5.0, 1..6), g in 0.001f64..0.4) {
        let p = NoiseProfile::new(scales).unwrap();
        let tight = utility_delta(&p, g).unwrap();
        let loose = utility_delta(&p, g * 2.0).unwrap();
        prop_assert!(loose <= tight + 1e-12);
        prop_assert!(tight > 0.0);
    }

    #[test]
    fn records_round_trip(rows in prop::collection::vec((any::<f64>().prop_filter("finite", |v| v.is_finite()), prop::option::of(0.0f64..1e6)), 0..30)) {
        let records: Vec<RunRecord> = rows
            .iter()
            .enumerate()
            .map(|(i, &(e, x))| RunRecord {
                t: i as u64 + 1,
                key: None,
                estimate: e,
                exact: x.map(|_| x.unwrap()),
                abs_error: x.map(|x| (e - x).abs()),
            })
            .collect();
        // Columns are shared by every row, so exact is all-or-nothing.
        let uniform: Vec<RunRecord> = if records.iter().all(|r| r.exact.is_some()) {
            records.clone()
        } else {
            records.iter().cloned().map(|r| RunRecord { exact: None, abs_error: None, ..r }).collect()
        };
        for format in [OutputFormat::Csv, OutputFormat::Ndjson] {
            let text = write_records(&uniform, format).unwrap();
            prop_assert_eq!(&parse_records(&text, format).unwrap(), &uniform);
        }
    }

    #[test]
    fn histogram_partitions_stream(items in prop::collection::vec((0u8..6, 0.0f64..=1.0), 1..200)) {
        let mut h = Histogram::new(|n| WindowSum::new(8, 1.0, n), Noise::disabled());
        let mut per_key: std::collections::HashMap<u8, Vec<f64>> = Default::default();
        for &(k, x) in &items {
            h.push(&[k], x).unwrap();
            per_key.entry(k).or_default().push(x);
        }
        prop_assert_eq!(h.len(), per_key.len());
        for (k, xs) in per_key {
            prop_assert_eq!(h.get(&[k]).unwrap().steps(), xs.len() as u64);
            let exact = naive(&xs, xs.len(), 8);
            prop_assert!((h.estimate(&[k]).unwrap() - exact).abs() < 1e-9);
        }
    }

    #[test]
    fn noise_is_frozen_per_seed(seed in any::<u64>(), xs in unit_stream(100)) {
        let run = || {
            let mut m = WindowSum::new(16, 1.0, Noise::laplace(RandomSource::new(seed))).unwrap();
            xs.iter().map(|&x| m.push(x).unwrap()).collect::<Vec<_>>()
        };
        prop_assert_eq!(run(), run());
    }
}
