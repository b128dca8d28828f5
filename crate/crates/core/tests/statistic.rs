use elspec::bandwidth::{BandwidthSet, SetScheme};
use elspec::bootstrap::{critical_value, p_value};
use elspec::el::{el_ratio, hull_cap, l_n, lsel_ratio, n_of_h_data, n_of_h_grid, n_of_h_prepared, GridSpec, Variant};
use elspec::kernel::{local_linear_weights, ParamMatrix, PathIndex};
use elspec::model::presets::{MONTHLY, VASICEK_0};
use elspec::model::{fit_mle, sample_stationary, simulate_path, DiffusionModel, ObservedPath};
use elspec::numerics::stream;
use elspec::study::{preset, Scale};
use proptest::prelude::*;

fn vasicek_path(n: usize, seed: u64, rep: u64) -> ObservedPath {
    let model = DiffusionModel::vasicek();
    let theta = model.params(&VASICEK_0).unwrap();
    let mut rng = stream(seed, &[rep]);
    let x0 = sample_stationary(&model, &theta, &mut rng).unwrap();
    simulate_path(&model, &theta, n, MONTHLY, x0, &mut rng).unwrap()
}

fn middle_bandwidth(n: usize) -> f64 {
    match preset("vasicek-table1", n, Scale::Desk, 1).unwrap().rule {
        elspec::bootstrap::BandwidthRule::Fixed(set) => set.values()[set.len() / 2],
        _ => unreachable!("fixed preset"),
    }
}

proptest! {
    #[test]
    fn l_n_ignores_order_and_grows_with_each_n(
        mut per_h in prop::collection::vec((0.005f64..0.1, 0.0f64..5.0), 1..8),
        k in 0usize..8,
        bump in 0.0f64..3.0,
    ) {
        let base = l_n(&per_h).unwrap();
        let mut rev = per_h.clone();
        rev.reverse();
        prop_assert_eq!(l_n(&rev).unwrap(), base);
        let k = k % per_h.len();
        per_h[k].1 += bump;
        prop_assert!(l_n(&per_h).unwrap() >= base);
    }

    #[test]
    fn p_value_falls_as_the_observation_grows(
        reps in prop::collection::vec(-5.0f64..5.0, 99..200),
        a in -6.0f64..6.0,
        d in 0.0f64..3.0,
    ) {
        let lo = p_value(a, &reps).unwrap();
        let hi = p_value(a + d, &reps).unwrap();
        prop_assert!(hi <= lo);
        prop_assert!(lo > 0.0 && lo <= 1.0);
    }

    #[test]
    fn rejection_matches_p_value_rule(
        mut reps in prop::collection::vec(-5.0f64..5.0, 99..300),
        obs in -6.0f64..6.0,
    ) {
        reps.sort_by(f64::total_cmp);
        let b = reps.len() as f64;
        let crit = critical_value(&reps, 0.05);
        let p = p_value(obs, &reps).unwrap();
        if obs >= crit {
            prop_assert!(p <= 1.0 - ((b * 0.95).floor()) / (b + 1.0) + 1e-12);
        }
    }

    #[test]
    fn local_linear_reproduces_lines(
        xs in prop::collection::vec(0.0f64..1.0, 8..40),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        y in 0.3f64..0.7,
    ) {
        if let Ok(w) = local_linear_weights(&xs, 0.5, y) {
            let fit: f64 = w.iter().zip(&xs).map(|(w, x)| w * (a + b * x)).sum();
            prop_assert!((fit - (a + b * y)).abs() <= 1e-8 * (1.0 + a.abs() + b.abs()));
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn bandwidth_sets_are_geometric(anchor in 0.001f64..0.5, j in 1usize..10, a in 0.5f64..0.99) {
        for scheme in [SetScheme::CvLowerRange, SetScheme::RefThirdSmallest] {
            let set = BandwidthSet::build(anchor, scheme, j, a).unwrap();
            prop_assert_eq!(set.len(), j);
            let v = set.values();
            prop_assert!(v.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(v.windows(2).all(|w| ((w[0] / w[1]) - a).abs() < 1e-12));
            prop_assert!(v.iter().any(|h| ((h - anchor) / anchor).abs() < 1e-12));
        }
    }
}

#[test]
fn null_mean_of_n_h_near_one() {
    let model = DiffusionModel::vasicek();
    let design = preset("vasicek-table1", 250, Scale::Desk, 1).unwrap();
    let h = middle_bandwidth(250);
    let reps = 200;
    let mut total = 0.0;
    for rep in 0..reps {
        let path = vasicek_path(250, 7, rep);
        let fit = fit_mle(&model, &path).unwrap();
        let n = n_of_h_grid(&path, h, &fit.theta_hat, &model, &design.settings.region, GridSpec::default(), Variant::Lsel)
            .unwrap();
        assert!(n >= 0.0);
        total += n;
    }
    let mean = total / reps as f64;
    assert!((0.5..=2.0).contains(&mean), "mean N(h) over {reps} null paths at h = {h}: {mean}");
}

#[test]
fn data_average_tracks_density_weighted_integral() {
    let model = DiffusionModel::vasicek();
    let region = preset("vasicek-table1", 500, Scale::Desk, 1).unwrap().settings.region;
    let h = middle_bandwidth(500);
    let (mut data_sum, mut grid_sum) = (0.0, 0.0);
    for rep in 0..10 {
        let path = vasicek_path(500, 11, rep);
        let fit = fit_mle(&model, &path).unwrap();
        data_sum += n_of_h_data(&path, h, &fit.theta_hat, &model, &region, Variant::Lsel).unwrap();

        let index = PathIndex::new(path.values());
        let p = ParamMatrix::from_model(&model, &fit.theta_hat, path.values(), MONTHLY).unwrap();
        let cells = region.grid(40, 40).unwrap();
        let mass: Vec<f64> = cells.iter().map(|c| index.joint_hat(c.x, c.y, h) * c.area).collect();
        let total: f64 = mass.iter().sum();
        let points: Vec<(f64, f64, f64)> = cells.iter().zip(&mass).map(|(c, m)| (c.x, c.y, m / total)).collect();
        grid_sum += n_of_h_prepared(&index, &p, h, &points, Variant::Lsel).n_h;
    }
    let rel = (data_sum - grid_sum).abs() / grid_sum;
    assert!(rel <= 0.25, "data average {data_sum} vs density-weighted grid {grid_sum}");
}

#[test]
fn data_average_is_zero_without_pairs_in_region() {
    let model = DiffusionModel::vasicek();
    let path = vasicek_path(200, 3, 0);
    let theta = model.params(&VASICEK_0).unwrap();
    let far = elspec::region::Region::new(10.0, 11.0, -0.1, 0.1).unwrap();
    assert_eq!(n_of_h_data(&path, 0.02, &theta, &model, &far, Variant::Lsel).unwrap(), 0.0);
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        for &k in &idx[i..=j] {
            r[k] = (i + j) as f64 / 2.0;
        }
        i = j + 1;
    }
    r
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn el_and_lsel_rank_grid_points_alike() {
    let model = DiffusionModel::vasicek();
    let region = preset("vasicek-table1", 250, Scale::Desk, 1).unwrap().settings.region;
    let path = vasicek_path(250, 5, 0);
    let fit = fit_mle(&model, &path).unwrap();
    let h = middle_bandwidth(250);
    let index = PathIndex::new(path.values());
    let p = ParamMatrix::from_model(&model, &fit.theta_hat, path.values(), MONTHLY).unwrap();
    let cap = hull_cap(path.n());
    let (mut el, mut ls) = (Vec::new(), Vec::new());
    let mut w = Vec::new();
    for c in region.grid(20, 20).unwrap() {
        let (target, _) = index.p_tilde_joint(c.x, c.y, h, &p, &mut w);
        el.push(el_ratio(path.values(), h, target, c.x, c.y).map_or(cap, |r| r.ratio));
        ls.push(lsel_ratio(path.values(), h, target, c.x, c.y));
    }
    let rho = pearson(&ranks(&el), &ranks(&ls));
    assert!(rho >= 0.9, "Spearman correlation {rho}");
}
