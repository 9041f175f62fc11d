use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xfvar::distribution::{empirical_quantile, normal_quantile};
use xfvar::fit::{
    fit_additive, fit_hetero_gaussian, fit_model, fit_quantile_grid, Column, DagConfig, DagNode,
    Dataset, FitConfig, FitError, FitMethod,
};
use xfvar::pickfreeze::EstimatorConfig;
use xfvar::scm::{Mechanism, ParentFn, ScmModel};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(r: &mut ChaCha8Rng) -> f64 {
    normal_quantile(r.gen_range(1e-12..1.0 - 1e-12))
}

fn sign(r: &mut ChaCha8Rng) -> f64 {
    if r.gen_bool(0.5) {
        1.0
    } else {
        -1.0
    }
}

fn dataset(cols: Vec<(&str, Vec<f64>)>) -> Dataset {
    let (names, columns): (Vec<String>, Vec<Column>) = cols
        .into_iter()
        .map(|(n, v)| (n.to_string(), Column::Numeric(v)))
        .unzip();
    Dataset::new(names, columns).unwrap()
}

fn dag(nodes: &[(&str, &[&str])], outcome: &str) -> DagConfig {
    DagConfig {
        nodes: nodes
            .iter()
            .map(|(n, p)| DagNode {
                name: n.to_string(),
                parents: p.iter().map(|s| s.to_string()).collect(),
            })
            .collect(),
        outcome: outcome.to_string(),
        categorical: Vec::new(),
    }
}

fn three_level(r: &mut ChaCha8Rng) -> f64 {
    r.gen_range(0..3) as f64
}

fn table(p: &ParentFn) -> &xfvar::scm::CellTable<f64> {
    match p {
        ParentFn::Table(t) => t,
        ParentFn::Formula(_) => panic!("expected a table"),
    }
}

#[test]
fn additive_recovers_cell_means() {
    let mut r = rng(1);
    let x: Vec<f64> = (0..10_000).map(|_| three_level(&mut r)).collect();
    let y: Vec<f64> = x.iter().map(|x| 2.0 * x + r.gen_range(-1.0..1.0)).collect();
    let ds = dataset(vec![("X", x), ("Y", y)]);
    let m = fit_additive(&ds, "Y", &["X"], &FitConfig::default()).unwrap();
    let Mechanism::AdditiveNoise {
        mean,
        out_of_fold,
        residuals,
    } = &m
    else {
        panic!()
    };
    assert!(*out_of_fold);
    assert_eq!(residuals.len(), 10_000);
    for x in [0.0, 1.0, 2.0] {
        let g = mean.eval(&[x]).unwrap();
        assert!((g - 2.0 * x).abs() <= 0.05, "ĝ({x}) = {g}");
    }
    assert_eq!(table(mean).cells().len(), 3);
}

#[test]
fn hetero_gaussian_recovers_scale() {
    let mut r = rng(2);
    let x: Vec<f64> = (0..100_000).map(|_| three_level(&mut r)).collect();
    let y: Vec<f64> = x.iter().map(|x| x + (1.0 + x) * normal(&mut r)).collect();
    let ds = dataset(vec![("X", x), ("Y", y)]);
    let m = fit_hetero_gaussian(&ds, "Y", &["X"], &FitConfig::default()).unwrap();
    let Mechanism::HeteroGaussian { sd, .. } = &m else {
        panic!()
    };
    for x in [0.0, 1.0, 2.0] {
        let ratio = sd.eval(&[x]).unwrap() / (1.0 + x);
        assert!((0.95..=1.05).contains(&ratio), "σ̂({x})/(1+x) = {ratio}");
    }
}

fn shifted_pairs(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut r = rng(seed);
    let w1: Vec<f64> = (0..n).map(|_| sign(&mut r)).collect();
    let w2 = w1.iter().map(|w| w + sign(&mut r)).collect();
    (w1, w2)
}

#[test]
fn quantile_grid_on_discrete_support() {
    let (w1, w2) = shifted_pairs(100_000, 3);
    let ds = dataset(vec![("W1", w1), ("W2", w2)]);
    let m = fit_quantile_grid(&ds, "W2", &["W1"], &FitConfig::default()).unwrap();
    for w in [-1.0, 1.0] {
        assert_eq!(m.sample(0.25, &[w]), Ok(w - 1.0));
        assert_eq!(m.sample(0.75, &[w]), Ok(w + 1.0));
    }
    let Mechanism::QuantileTable(t) = &m else {
        panic!()
    };
    for (_, g) in t.cells() {
        assert!(g.values().windows(2).all(|p| p[0] <= p[1]));
    }
}

#[test]
fn comonotone_identification_from_observables() {
    let (w1, w2) = shifted_pairs(50_000, 4);
    let y = w2.clone();
    let ds = dataset(vec![("W1", w1), ("W2", w2), ("Y", y)]);
    let chain = dag(&[("W1", &[]), ("W2", &["W1"]), ("Y", &["W2"])], "Y");
    let model = fit_model(&ds, &chain, &FitConfig::default()).unwrap();
    let est = model
        .counterfactual_total(1, &EstimatorConfig::new(100_000, 5))
        .unwrap();
    assert!((est.value - 0.5).abs() <= 0.05, "{est:?}");
}

#[test]
fn missing_column_rejected() {
    let ds = dataset(vec![("A", vec![1.0; 30]), ("Y", vec![1.0; 30])]);
    let g = dag(&[("A", &[]), ("B", &["A"]), ("Y", &["B"])], "Y");
    assert_eq!(
        fit_model(&ds, &g, &FitConfig::default()),
        Err(FitError::MissingColumn("B".into()))
    );
}

/// Sex and race roots, education from both, log income from all three.
fn income_like(n: usize, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let races = ["Amer-Indian", "Asian", "Black", "Other", "White"];
    let race_cum = [0.08, 0.2, 0.35, 0.45, 1.0];
    let levels = [9.0, 12.0, 14.0, 16.0, 18.0, 20.0];
    let (mut sex, mut race, mut edu, mut inc) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for _ in 0..n {
        let s = if r.gen_bool(0.48) { "Female" } else { "Male" };
        let u: f64 = r.gen();
        let ri = race_cum.iter().position(|c| u <= *c).unwrap_or(4);
        let shift = 0.4 * ri as f64 + if s == "Male" { 0.3 } else { 0.0 };
        // Higher shift moves mass up while every level keeps probability ≥ 0.06.
        let a = 1.0 / (1.0 + 0.3 * shift);
        let e = levels[((r.gen::<f64>().powf(a) * 6.0) as usize).min(5)];
        let y = 9.0
            + 0.08 * e
            + if s == "Male" { 0.3 } else { 0.0 }
            + 0.05 * ri as f64
            + 0.5 * normal(&mut r);
        sex.push(s);
        race.push(races[ri]);
        edu.push(e);
        inc.push(y);
    }
    Dataset::new(
        vec![
            "sex".into(),
            "race".into(),
            "education".into(),
            "log_income".into(),
        ],
        vec![
            Column::categorical(&sex),
            Column::categorical(&race),
            Column::Numeric(edu),
            Column::Numeric(inc),
        ],
    )
    .unwrap()
}

fn income_dag() -> DagConfig {
    let mut d = dag(
        &[
            ("sex", &[]),
            ("race", &[]),
            ("education", &["sex", "race"]),
            ("log_income", &["sex", "race", "education"]),
        ],
        "log_income",
    );
    d.categorical = vec!["sex".into(), "race".into()];
    d
}

#[test]
fn income_pipeline_stays_in_range() {
    let ds = income_like(20_000, 6);
    let model = fit_model(&ds, &income_dag(), &FitConfig::default()).unwrap();
    assert_eq!(
        model.labels(0),
        Some(&["Female".to_string(), "Male".to_string()][..])
    );
    let observed = ds.column("log_income").unwrap().values();
    let lo = observed.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = observed.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for i in 0..2000 {
        let v = model.forward_sample(&model.sample_noise(7, i)).unwrap();
        assert!((lo..=hi).contains(&v[3]), "{}", v[3]);
        assert!([9.0, 12.0, 14.0, 16.0, 18.0, 20.0].contains(&v[2]));
    }
    let xi = model
        .estimate_counterfactual_measure(&EstimatorConfig::new(20_000, 8), false)
        .unwrap();
    assert!((xi.total_mass() - 1.0).abs() < 0.1);
}

fn simulate(model: &ScmModel, n: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..n as u64)
        .map(|i| model.forward_sample(&model.sample_noise(seed, i)).unwrap())
        .collect()
}

#[test]
fn refitting_a_sample_reproduces_cell_quantiles() {
    let mut r = rng(9);
    let n = 20_000;
    let x: Vec<f64> = (0..n)
        .map(|_| if r.gen_bool(0.5) { 1.0 } else { 0.0 })
        .collect();
    let y: Vec<f64> = x.iter().map(|x| x + (1.0 + x) * normal(&mut r)).collect();
    let ds = dataset(vec![("X", x.clone()), ("Y", y.clone())]);
    let g = dag(&[("X", &[]), ("Y", &["X"])], "Y");
    let cfg = FitConfig::default();
    let model = fit_model(&ds, &g, &cfg).unwrap();
    let rows = simulate(&model, n, 10);
    let ds2 = dataset(vec![
        ("X", rows.iter().map(|v| v[0]).collect()),
        ("Y", rows.iter().map(|v| v[1]).collect()),
    ]);
    let refit = fit_quantile_grid(&ds2, "Y", &["X"], &cfg).unwrap();
    for cell in [0.0, 1.0] {
        let mut orig: Vec<f64> = x
            .iter()
            .zip(&y)
            .filter(|(a, _)| **a == cell)
            .map(|(_, b)| *b)
            .collect();
        orig.sort_by(f64::total_cmp);
        let m = orig.len() as f64;
        for &tau in &cfg.levels {
            // Rank band of two binomial standard deviations for each of the
            // two samples involved.
            let band = 2.0 * 2.0 * (m * tau * (1.0 - tau)).sqrt() + 1.0;
            let lo = empirical_quantile(&orig, ((m * tau - band) / m).max(0.0));
            let hi = empirical_quantile(&orig, ((m * tau + band) / m).min(1.0));
            let v = refit.sample(tau, &[cell]).unwrap();
            assert!(
                lo <= v && v <= hi,
                "cell {cell} τ {tau}: {v} not in [{lo}, {hi}]"
            );
        }
    }
}

#[test]
fn additive_fit_underestimates_heteroskedastic_total() {
    let mut r = rng(11);
    let x: Vec<f64> = (0..30_000).map(|_| three_level(&mut r)).collect();
    let y: Vec<f64> = x
        .iter()
        .map(|x| 0.5 * x + (1.0 + x) * normal(&mut r))
        .collect();
    let ds = dataset(vec![("X", x), ("Y", y)]);
    let g = dag(&[("X", &[]), ("Y", &["X"])], "Y");
    let est = EstimatorConfig::new(50_000, 12);
    let xi = |method| {
        let cfg = FitConfig {
            method,
            ..FitConfig::default()
        };
        fit_model(&ds, &g, &cfg)
            .unwrap()
            .counterfactual_total(1, &est)
            .unwrap()
    };
    let additive = xi(FitMethod::AdditiveEmpirical);
    let grid = xi(FitMethod::QuantileGrid);
    assert!(
        additive.value + 3.0 * (additive.stderr + grid.stderr) < grid.value,
        "{additive:?} {grid:?}"
    );
}
