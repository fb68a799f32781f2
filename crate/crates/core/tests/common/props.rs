//! Property checks shared by the `properties` and `acceptance` targets. Each
//! check runs `CASES` deterministic random cases.

#![allow(dead_code)]

use proptest::collection::vec;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use tkrr::aggregate::{aew_weights, hyper_sparse_aggregate, prepare_candidates, sa_tkrr_from_stage};
use tkrr::datasets::{read_dataset_csv, write_dataset_csv, Standardizer};
use tkrr::harness::{results_csv, run_sweep_with, ExperimentConfig, Method};
use tkrr::kernel::rkhs_norm_diff;
use tkrr::seed::derive_seed;
use tkrr::synthetic::{gen_scenario, gen_test, gen_true_function, Example, ScenarioSeeds, SimSpec};
use tkrr::transfer::{fit_ah_tkrr, fit_pooled};
use tkrr::{
    fit_krr, gram_matrix, spd_solve, AggregationParams, Dataset, Execution, KernelConfig, LambdaSchedule,
    Matrix, Phi, Predictor, RepresenterFunction, SourceCollection,
};

pub const CASES: u32 = 100;

pub type Check = fn() -> Result<(), String>;

pub const ALL: &[(&str, Check)] = &[
    ("gram_symmetric_psd", gram_symmetric_psd),
    ("spd_solve_residual", spd_solve_residual),
    ("rkhs_symmetry_triangle", rkhs_symmetry_triangle),
    ("representer_permutation", representer_permutation),
    ("krr_stationarity", krr_stationarity),
    ("krr_norm_monotone_in_lambda", krr_norm_monotone_in_lambda),
    ("krr_interpolation_limit", krr_interpolation_limit),
    ("krr_deterministic", krr_deterministic),
    ("transfer_additivity", transfer_additivity),
    ("transfer_order_invariance", transfer_order_invariance),
    ("transfer_degenerate", transfer_degenerate),
    ("pooled_stationarity", pooled_stationarity),
    ("survivors_contain_best", survivors_contain_best),
    ("aggregation_optimality", aggregation_optimality),
    ("weight_bounds", weight_bounds),
    ("aggregate_deterministic", aggregate_deterministic),
    ("default_sizes", default_sizes),
    ("monotone_similarity", monotone_similarity),
    ("generators_pure", generators_pure),
    ("csv_round_trip", csv_round_trip),
    ("standardized_moments", standardized_moments),
    ("standardize_no_leakage", standardize_no_leakage),
    ("sweep_deterministic", sweep_deterministic),
    ("seed_derivation", seed_derivation),
];

fn run<S: Strategy>(strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    let config = Config { cases: CASES, failure_persistence: None, ..Config::default() };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn check<T, E: std::fmt::Display>(r: std::result::Result<T, E>) -> Result<T, TestCaseError> {
    r.map_err(|e| TestCaseError::fail(e.to_string()))
}

/// `n` points in dimension `d` with coordinates in `[-lim, lim]`.
fn points(n: std::ops::RangeInclusive<usize>, d: usize, lim: f64) -> impl Strategy<Value = Matrix> {
    n.prop_flat_map(move |n| vec(-lim..lim, n * d)).prop_map(move |v| Matrix::new(v.len() / d, d, v).unwrap())
}

fn dataset(n: std::ops::RangeInclusive<usize>, d: usize) -> impl Strategy<Value = Dataset> {
    points(n, d, 2.0).prop_flat_map(|x| {
        let n = x.rows();
        vec(-3.0..3.0f64, n).prop_map(move |y| Dataset::new(x.clone(), y).unwrap())
    })
}

fn function(d: usize) -> impl Strategy<Value = RepresenterFunction> {
    points(1..=6, d, 2.0).prop_flat_map(|a| {
        let n = a.rows();
        vec(-2.0..2.0f64, n)
            .prop_map(move |c| RepresenterFunction::new(a.clone(), c, KernelConfig::default()).unwrap())
    })
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn stationarity_residual(x: &Matrix, y: &[f64], beta: &[f64], lambda: f64) -> f64 {
    let k = gram_matrix(&KernelConfig::default(), x, x).unwrap();
    let kb = k.mul_vec(beta).unwrap();
    let shift = y.len() as f64 * lambda;
    kb.iter().zip(beta).zip(y).map(|((a, b), yi)| (a + shift * b - yi).abs()).fold(0.0, f64::max)
}

pub fn gram_symmetric_psd() -> Result<(), String> {
    let s = (1usize..=3, 0.3..3.0f64).prop_flat_map(|(d, bw)| (points(1..=15, d, 2.0), Just(bw)));
    run(s, |(x, bw)| {
        let cfg = check(KernelConfig::gaussian(bw))?;
        let k = check(gram_matrix(&cfg, &x, &x))?;
        let n = k.rows();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(k.get(i, j), k.get(j, i));
            }
        }
        let m = faer::Mat::from_fn(n, n, |i, j| k.get(i, j));
        let eig = check(m.self_adjoint_eigenvalues(faer::Side::Lower).map_err(|e| format!("{e:?}")))?;
        prop_assert!(eig.iter().all(|&e| e >= -1e-10), "eigenvalues {eig:?}");
        Ok(())
    })
}

pub fn spd_solve_residual() -> Result<(), String> {
    let s = (points(1..=20, 2, 2.0), 0.01..2.0f64).prop_flat_map(|(x, shift)| {
        let n = x.rows();
        (Just(x), Just(shift), vec(-10.0..10.0f64, n))
    });
    run(s, |(x, shift, b)| {
        let k = gram_matrix(&KernelConfig::default(), &x, &x).unwrap();
        let n = k.rows();
        let a = Matrix::from_fn(n, n, |i, j| k.get(i, j) + if i == j { shift } else { 0.0 });
        let z = check(spd_solve(&a, &b))?;
        let az = a.mul_vec(&z).unwrap();
        let r = az.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        prop_assert!(r <= 1e-8 * (1.0 + sup_norm(&b)), "residual {r}");
        Ok(())
    })
}

pub fn rkhs_symmetry_triangle() -> Result<(), String> {
    let s = (1usize..=3).prop_flat_map(|d| (function(d), function(d), function(d)));
    run(s, |(f, g, h)| {
        let fg = check(rkhs_norm_diff(&f, &g))?;
        let gf = check(rkhs_norm_diff(&g, &f))?;
        let gh = check(rkhs_norm_diff(&g, &h))?;
        let fh = check(rkhs_norm_diff(&f, &h))?;
        prop_assert!(fg >= 0.0);
        prop_assert!((fg - gf).abs() <= 1e-12 * (1.0 + fg), "{fg} vs {gf}");
        prop_assert!(fh <= fg + gh + 1e-8, "{fh} > {fg} + {gh}");
        Ok(())
    })
}

pub fn representer_permutation() -> Result<(), String> {
    let s = (1usize..=3).prop_flat_map(|d| (function(d), points(1..=5, d, 2.0))).prop_flat_map(|(f, x)| {
        let n = f.coefficients().len();
        (Just(f), Just(x), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
    });
    run(s, |(f, x, perm)| {
        let anchors = f.anchors().select_rows(&perm);
        let coef: Vec<f64> = perm.iter().map(|&i| f.coefficients()[i]).collect();
        let g = RepresenterFunction::new(anchors, coef, *f.kernel()).unwrap();
        let a = check(f.eval_many(&x))?;
        let b = check(g.eval_many(&x))?;
        for (p, q) in a.iter().zip(&b) {
            prop_assert!((p - q).abs() <= 1e-12, "{p} vs {q}");
        }
        Ok(())
    })
}

pub fn krr_stationarity() -> Result<(), String> {
    let s = (1usize..=3).prop_flat_map(|d| (dataset(1..=25, d), -6.0..0.0f64));
    run(s, |(data, log_l)| {
        let lambda = 10f64.powf(log_l);
        let m = check(fit_krr(&data, lambda, &KernelConfig::default()))?;
        let r = stationarity_residual(&data.x, &data.y, m.coefficients(), lambda);
        prop_assert!(r <= 1e-8 * (1.0 + sup_norm(&data.y)), "residual {r}");
        Ok(())
    })
}

pub fn krr_norm_monotone_in_lambda() -> Result<(), String> {
    let s = (1usize..=3).prop_flat_map(|d| dataset(2..=20, d));
    run(s, |data| {
        let cfg = KernelConfig::default();
        let mut prev = f64::INFINITY;
        for e in [-4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0] {
            let m = check(fit_krr(&data, 10f64.powf(e), &cfg))?;
            let norm = m.function.norm_squared();
            prop_assert!(norm <= prev * (1.0 + 1e-9) + 1e-12, "norm {norm} after {prev} at 1e{e}");
            prev = norm;
        }
        Ok(())
    })
}

pub fn krr_interpolation_limit() -> Result<(), String> {
    let s = (1usize..=8).prop_flat_map(|n| (vec(0.0..0.5f64, n), vec(-3.0..3.0f64, n)));
    run(s, |(jitter, y)| {
        let xs: Vec<f64> = jitter.iter().enumerate().map(|(i, j)| 2.5 * i as f64 + j).collect();
        let data = Dataset::new(Matrix::column(&xs), y.clone()).unwrap();
        let m = check(fit_krr(&data, 1e-10, &KernelConfig::default()))?;
        let p = check(m.predict(&data.x))?;
        for (a, b) in p.iter().zip(&y) {
            prop_assert!((a - b).abs() <= 1e-4, "{a} vs {b}");
        }
        Ok(())
    })
}

pub fn krr_deterministic() -> Result<(), String> {
    let s = (1usize..=3).prop_flat_map(|d| (dataset(1..=25, d), -4.0..0.0f64));
    run(s, |(data, log_l)| {
        let cfg = KernelConfig::default();
        let a = check(fit_krr(&data, 10f64.powf(log_l), &cfg))?;
        let b = check(fit_krr(&data, 10f64.powf(log_l), &cfg))?;
        prop_assert_eq!(a.coefficients(), b.coefficients());
        Ok(())
    })
}

fn transfer_case() -> impl Strategy<Value = (Dataset, Vec<Dataset>, f64, f64, Matrix)> {
    (1usize..=2).prop_flat_map(|d| {
        (dataset(2..=10, d), vec(dataset(1..=8, d), 1..=3), 0.05..1.0f64, 0.05..1.0f64, points(1..=6, d, 2.0))
    })
}

pub fn transfer_additivity() -> Result<(), String> {
    run(transfer_case(), |(target, sources, l1, l2, x)| {
        let set: Vec<usize> = (0..sources.len()).collect();
        let coll = SourceCollection::new(&sources, &set).unwrap();
        let m = check(fit_ah_tkrr(&target, &coll, l1, l2, &KernelConfig::default()))?;
        let f = check(m.predict(&x))?;
        let p = check(m.pooled.predict(&x))?;
        let d = check(m.debias.predict(&x))?;
        for i in 0..f.len() {
            prop_assert_eq!(f[i].to_bits(), (p[i] + d[i]).to_bits());
        }
        Ok(())
    })
}

pub fn transfer_order_invariance() -> Result<(), String> {
    let s = transfer_case().prop_flat_map(|(t, s, l1, l2, x)| {
        let m = s.len();
        (Just((t, s, l1, l2, x)), Just((0..m).collect::<Vec<_>>()).prop_shuffle())
    });
    run(s, |((target, sources, l1, _, x), perm)| {
        let cfg = KernelConfig::default();
        let ident: Vec<usize> = (0..sources.len()).collect();
        let a = check(fit_pooled(&target, &SourceCollection::new(&sources, &ident).unwrap(), l1, &cfg))?;
        let b = check(fit_pooled(&target, &SourceCollection::new(&sources, &perm).unwrap(), l1, &cfg))?;
        let mut offsets = vec![target.n()];
        for s in &sources {
            offsets.push(offsets.last().unwrap() + s.n());
        }
        let mut mapped = b.coefficients()[..target.n()].to_vec();
        let mut pos_in_b = vec![0usize; sources.len()];
        let mut off = target.n();
        for &k in &perm {
            pos_in_b[k] = off;
            off += sources[k].n();
        }
        for (k, s) in sources.iter().enumerate() {
            mapped.extend_from_slice(&b.coefficients()[pos_in_b[k]..pos_in_b[k] + s.n()]);
        }
        for (p, q) in a.coefficients().iter().zip(&mapped) {
            prop_assert!((p - q).abs() <= 1e-9 * (1.0 + p.abs()), "{p} vs {q}");
        }
        let pa = check(a.predict(&x))?;
        let pb = check(b.predict(&x))?;
        for (p, q) in pa.iter().zip(&pb) {
            prop_assert!((p - q).abs() <= 1e-12, "{p} vs {q}");
        }
        Ok(())
    })
}

pub fn transfer_degenerate() -> Result<(), String> {
    run(transfer_case(), |(target, sources, l1, _, _)| {
        let cfg = KernelConfig::default();
        let pooled = check(fit_pooled(&target, &SourceCollection::none(&sources), l1, &cfg))?;
        let plain = check(fit_krr(&target, l1, &cfg))?;
        prop_assert_eq!(pooled.coefficients(), plain.coefficients());
        Ok(())
    })
}

pub fn pooled_stationarity() -> Result<(), String> {
    let s = (1usize..=2).prop_flat_map(|d| (dataset(2..=10, d), vec(dataset(1..=8, d), 1..=3), -6.0..0.0f64));
    run(s, |(target, sources, log_l)| {
        let lambda = 10f64.powf(log_l);
        let set: Vec<usize> = (0..sources.len()).collect();
        let coll = SourceCollection::new(&sources, &set).unwrap();
        let m = check(fit_pooled(&target, &coll, lambda, &KernelConfig::default()))?;
        let pool = coll.pooled_with(&target).unwrap();
        let r = stationarity_residual(&pool.x, &pool.y, m.coefficients(), lambda);
        prop_assert!(r <= 1e-8 * (1.0 + sup_norm(&pool.y)), "residual {r}");
        Ok(())
    })
}

/// Predicts `values[x[0]]`; the data rows carry their own index.
#[derive(Debug)]
struct Lookup(Vec<f64>);

impl Predictor for Lookup {
    fn predict(&self, x: &Matrix) -> tkrr::Result<Vec<f64>> {
        Ok(x.row_iter().map(|r| self.0[r[0] as usize]).collect())
    }
}

fn aggregation_case() -> impl Strategy<Value = (Vec<Lookup>, Dataset, AggregationParams)> {
    (4usize..=40, 1usize..=8, 0.1..3.0f64, prop::option::of(0.01..1.0f64), any::<u64>()).prop_flat_map(
        |(n, k, c, phi, seed)| {
            (vec(vec(-2.0..2.0f64, n), k), vec(-2.0..2.0f64, n)).prop_map(move |(cands, y)| {
                let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
                let t2 = Dataset::new(Matrix::column(&x), y).unwrap();
                let params = AggregationParams {
                    c,
                    phi: phi.map_or(Phi::Auto, Phi::Value),
                    split_seed: seed,
                    ..AggregationParams::default()
                };
                (cands.into_iter().map(Lookup).collect(), t2, params)
            })
        },
    )
}

pub fn survivors_contain_best() -> Result<(), String> {
    run(aggregation_case(), |(cands, t2, params)| {
        let sel = check(hyper_sparse_aggregate(&cands, &t2, &params))?;
        prop_assert!(!sel.survivors.is_empty());
        prop_assert!(sel.survivors.contains(&sel.best_t21));
        let min = sel.t21_risks.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(sel.t21_risks[sel.best_t21], min);
        Ok(())
    })
}

pub fn aggregation_optimality() -> Result<(), String> {
    run(aggregation_case(), |(cands, t2, params)| {
        let sel = check(hyper_sparse_aggregate(&cands, &t2, &params))?;
        let min = sel.survivors.iter().map(|&l| sel.t22_risks[l]).fold(f64::INFINITY, f64::min);
        prop_assert!(sel.risk <= min + 1e-10, "{} > {min}", sel.risk);
        prop_assert!(sel.survivors.contains(&sel.idx_a) && sel.survivors.contains(&sel.idx_b));
        Ok(())
    })
}

pub fn weight_bounds() -> Result<(), String> {
    let s = (aggregation_case(), -3.0..6.0f64);
    run(s, |((cands, t2, params), log_t)| {
        let sel = check(hyper_sparse_aggregate(&cands, &t2, &params))?;
        prop_assert!((0.0..=1.0).contains(&sel.weight));
        let w = check(aew_weights(&cands, &t2, 10f64.powf(log_t)))?;
        prop_assert!(w.iter().all(|&v| v >= 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        Ok(())
    })
}

pub fn aggregate_deterministic() -> Result<(), String> {
    let s =
        (1usize..=2).prop_flat_map(|d| (dataset(8..=24, d), vec(dataset(4..=16, d), 1..=4), any::<u64>()));
    run(s, |(target, sources, seed)| {
        let params = AggregationParams { split_seed: seed, ..AggregationParams::default() };
        let sched = LambdaSchedule::default();
        let cfg = KernelConfig::default();
        let fit = |exec: Execution| {
            let stage = prepare_candidates(&target, &sources, &params, &sched, &cfg, exec)?;
            sa_tkrr_from_stage(stage, &target, &sources, &params, &sched, &cfg, exec)
        };
        let a = check(fit(Execution::Sequential))?;
        let b = check(fit(Execution::Parallel))?;
        let c = check(fit(Execution::Parallel))?;
        prop_assert_eq!(&a.selection, &b.selection);
        prop_assert_eq!(&b.selection, &c.selection);
        let pa = check(a.predict(&target.x))?;
        prop_assert_eq!(&pa, &check(b.predict(&target.x))?);
        prop_assert_eq!(&pa, &check(c.predict(&target.x))?);
        Ok(())
    })
}

const EXAMPLES: [Example; 5] = [Example::Ex1, Example::Ex2, Example::Ex3, Example::Ex2Mod, Example::Ex3Mod];

pub fn default_sizes() -> Result<(), String> {
    run(0usize..EXAMPLES.len(), |i| {
        let e = EXAMPLES[i];
        let spec = SimSpec::new(e);
        let want = if e == Example::Ex1 { (200, 150) } else { (600, 300) };
        prop_assert_eq!((spec.n0(), spec.n_k()), want);
        Ok(())
    })
}

pub fn monotone_similarity() -> Result<(), String> {
    let grid: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
    let sup = move |s: f64| {
        let f0 = gen_true_function(Example::Ex1, 0.0);
        let fs = gen_true_function(Example::Ex1, s);
        grid.iter().map(|&x| (fs.eval(&[x]) - f0.eval(&[x])).abs()).fold(0.0, f64::max)
    };
    run((0.0..=0.45f64, 0.0..=0.45f64), move |(a, b)| {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(sup(lo) <= sup(hi) + 1e-12, "sup at {lo} exceeds sup at {hi}");
        Ok(())
    })
}

pub fn generators_pure() -> Result<(), String> {
    let s = (0usize..EXAMPLES.len(), 0.0..0.39f64, 0usize..=3, any::<u64>(), any::<u64>());
    run(s, |(i, s, m, data, shift)| {
        let mut spec = SimSpec::new(EXAMPLES[i]);
        spec.s = s;
        spec.m = m;
        spec.n0 = Some(7);
        spec.n_k = Some(5);
        spec.n_te = 9;
        let seeds = ScenarioSeeds { data, shift };
        let a = check(gen_scenario(&spec, seeds))?;
        let b = check(gen_scenario(&spec, seeds))?;
        prop_assert_eq!(&a.target, &b.target);
        prop_assert_eq!(&a.sources, &b.sources);
        prop_assert_eq!(&a.shifts, &b.shifts);
        prop_assert_eq!(gen_test(&spec, &a.target_fn, data), gen_test(&spec, &b.target_fn, data));
        Ok(())
    })
}

fn any_finite() -> impl Strategy<Value = f64> {
    prop_oneof![any::<f64>().prop_filter("finite", |v| v.is_finite()), -1e3..1e3f64, Just(0.0), Just(-0.0)]
}

pub fn csv_round_trip() -> Result<(), String> {
    let s = (1usize..=4, 1usize..=12)
        .prop_flat_map(|(d, n)| (Just(d), vec(any_finite(), n * d), vec(any_finite(), n)));
    run(s, |(d, xs, y)| {
        let data = Dataset::new(Matrix::new(y.len(), d, xs).unwrap(), y).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        check(write_dataset_csv(&data, &p))?;
        let back = check(read_dataset_csv(&p))?;
        prop_assert_eq!(back.x.as_slice().len(), data.x.as_slice().len());
        for (a, b) in back.x.as_slice().iter().chain(&back.y).zip(data.x.as_slice().iter().chain(&data.y)) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
        Ok(())
    })
}

fn raw_features() -> impl Strategy<Value = Matrix> {
    (1usize..=4, 3usize..=50, -100.0..100.0f64, 0.01..100.0f64).prop_flat_map(|(d, n, loc, spread)| {
        vec(-1.0..1.0f64, n * d).prop_map(move |v| {
            let v = v.into_iter().map(|u| loc + spread * u).collect();
            Matrix::new(n, d, v).unwrap()
        })
    })
}

fn column_sd(x: &Matrix, j: usize) -> (f64, f64) {
    let n = x.rows() as f64;
    let mean = x.row_iter().map(|r| r[j]).sum::<f64>() / n;
    let var = x.row_iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn standardized_moments() -> Result<(), String> {
    run(raw_features(), |x| {
        let st = check(Standardizer::fit(&x))?;
        let z = check(st.apply(&x))?;
        for j in 0..x.cols() {
            if column_sd(&x, j).1 < 1e-9 {
                continue;
            }
            let (m, sd) = column_sd(&z, j);
            prop_assert!(m.abs() <= 1e-10, "mean {m}");
            prop_assert!((sd - 1.0).abs() <= 1e-10, "sd {sd}");
        }
        Ok(())
    })
}

pub fn standardize_no_leakage() -> Result<(), String> {
    run((raw_features(), 1.0..50.0f64), |(train, offset)| {
        let test = Matrix::from_fn(train.rows(), train.cols(), |i, j| train.get(i, j) + offset);
        let st = check(Standardizer::fit(&train))?;
        let zt = check(st.apply(&test))?;
        for i in 0..test.rows() {
            for j in 0..test.cols() {
                let want = (test.get(i, j) - st.mean[j]) / st.scale[j];
                prop_assert_eq!(zt.get(i, j), want);
            }
        }
        let refit = check(Standardizer::fit(&train))?;
        prop_assert_eq!(&refit.mean, &st.mean);
        Ok(())
    })
}

fn tiny_config(seed: u64, methods: &[&str]) -> ExperimentConfig {
    let names: Vec<String> = methods.iter().map(|m| format!("\"{m}\"")).collect();
    ExperimentConfig::from_json(&format!(
        r#"{{"scenario": {{"synthetic": {{"example": "ex1", "m": 2, "n0": 12, "n_k": 8, "n_te": 16}}}},
            "methods": [{}], "sweep": {{"parameter": "s", "values": [0.1, 0.4]}},
            "replications": 2, "seed": {seed}}}"#,
        names.join(", ")
    ))
    .unwrap()
}

const ALL_METHODS: [&str; 6] = ["KRR", "AhTKRR", "AhTKRR_WD", "Pooled_TKRR", "SA_TKRR", "AEW_TKRR"];

pub fn sweep_deterministic() -> Result<(), String> {
    run(any::<u64>(), |seed| {
        let cfg = tiny_config(seed, &ALL_METHODS);
        let seq = results_csv(&check(run_sweep_with(&cfg, Execution::Sequential))?);
        for threads in [1, 3] {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let par = pool.install(|| run_sweep_with(&cfg, Execution::Parallel));
            prop_assert_eq!(&seq, &results_csv(&check(par)?));
        }
        Ok(())
    })
}

pub fn seed_derivation() -> Result<(), String> {
    run((any::<u64>(), 0usize..ALL_METHODS.len()), |(seed, pick)| {
        let full = check(run_sweep_with(&tiny_config(seed, &ALL_METHODS), Execution::Sequential))?;
        let one = check(run_sweep_with(&tiny_config(seed, &[ALL_METHODS[pick]]), Execution::Sequential))?;
        let method: Method = ALL_METHODS[pick].parse().unwrap();
        let subset: Vec<_> = full.iter().filter(|r| r.method == method).cloned().collect();
        prop_assert_eq!(results_csv(&subset), results_csv(&one));
        for r in &full {
            prop_assert_eq!(r.seed, derive_seed(seed, r.value_index as u64, r.replication as u64));
        }
        Ok(())
    })
}
