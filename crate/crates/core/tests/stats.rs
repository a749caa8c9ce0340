use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_distr::Distribution;
use rand_chacha::ChaCha8Rng;
use tinyjam_core::stats::{anova_oneway, kde2d};

/// Sums of squares by explicit double loops over every observation.
fn brute_force_f(groups: &[Vec<f64>]) -> f64 {
    let mut n = 0usize;
    let mut total = 0.0;
    for g in groups {
        for v in g {
            n += 1;
            total += v;
        }
    }
    let grand = total / n as f64;
    let mut ssb = 0.0;
    let mut ssw = 0.0;
    for g in groups {
        let mut s = 0.0;
        for v in g {
            s += v;
        }
        let m = s / g.len() as f64;
        for v in g {
            ssb += (m - grand) * (m - grand);
            ssw += (v - m) * (v - m);
        }
    }
    let k = groups.len() as f64;
    (ssb / (k - 1.0)) / (ssw / (n as f64 - k))
}

proptest! {
    #[test]
    fn anova_matches_brute_force(groups in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 2..9), 2..6)) {
        let labels: Vec<String> = (0..groups.len()).map(|i| i.to_string()).collect();
        let r = anova_oneway(&labels, &groups).unwrap();
        let expected = brute_force_f(&groups);
        prop_assert!((r.f - expected).abs() <= 1e-9 * expected.abs().max(1e-12), "{} vs {}", r.f, expected);
        prop_assert!(r.f >= 0.0);
        prop_assert!((0.0..=1.0).contains(&r.p_value));
        prop_assert_eq!(r.df_between, groups.len() - 1);
        prop_assert_eq!(r.df_within, groups.iter().map(Vec::len).sum::<usize>() - groups.len());
    }
}

fn gaussian_cloud(rng: &mut ChaCha8Rng, n: usize, cx: f64, cy: f64, sigma: f64) -> Vec<(f64, f64)> {
    let normal = rand_distr::Normal::new(0.0, sigma).unwrap();
    (0..n)
        .map(|_| (cx + normal.sample(rng), cy + normal.sample(rng)))
        .collect()
}

#[test]
fn kde_mass_and_positivity() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pts = gaussian_cloud(&mut rng, 2000, 0.5, 0.45, 0.06);
    let g = kde2d(&pts, 100).unwrap();
    assert!(g.densities.iter().all(|d| *d >= 0.0));
    let mass = g.mass();
    assert!((0.99..=1.01).contains(&mass), "{mass}");
}

#[test]
fn kde_of_uniform_points_is_flat_inside() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let pts: Vec<(f64, f64)> = (0..10_000).map(|_| (rng.random(), rng.random())).collect();
    let g = kde2d(&pts, 100).unwrap();
    let margin = (3.0 * g.bandwidth[0].max(g.bandwidth[1]) * 100.0).ceil() as usize;
    let inner: Vec<f64> = (margin..100 - margin)
        .flat_map(|r| (margin..100 - margin).map(move |c| (c, r)))
        .map(|(c, r)| g.at(c, r))
        .collect();
    let max = inner.iter().copied().fold(f64::MIN, f64::max);
    let min = inner.iter().copied().fold(f64::MAX, f64::min);
    assert!(max / min < 1.5, "ratio {}", max / min);
}

#[test]
fn kde_separates_two_clusters() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut pts = gaussian_cloud(&mut rng, 500, 0.2, 0.2, 0.04);
    pts.extend(gaussian_cloud(&mut rng, 500, 0.8, 0.8, 0.04));
    let g = kde2d(&pts, 100).unwrap();
    let maxima = g.local_maxima();
    assert_eq!(maxima.len(), 2, "{maxima:?}");
    for (c, r) in maxima {
        assert!((c as i64 - r as i64).abs() <= 2, "({c}, {r}) off the diagonal");
    }
}
