//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Pass criterion numbers to run a subset:
//! `cargo test --release --test acceptance -- 4 6`.

mod common;

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use common::{jittered, kl, monte_carlo_kl, toy_config, toy_series};
use deepstate::cli::{run_command, Invocation, Verb};
use deepstate::eval::{
    crps_gaussian, crps_sample, rolling_window_evaluate, ModelForecaster, SeasonalNaive, Standardizer,
};
use deepstate::forecast::{monte_carlo_forecast, ExogenousSpec, ForecastOptions};
use deepstate::model::{init_params, ModelConfig, ModelParams};
use deepstate::tensor::{finite_diff_check_many, Tensor};
use deepstate::train::{elbo_sgvb, kl_diag_gaussian_value, train_from, FrozenNoise, TrainConfig, WindowBatch};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn standardized(x: Vec<f64>, u: Vec<f64>, len: usize, d: usize, fit_rows: usize) -> (Tensor, Tensor) {
    let x = Tensor::matrix(len, 1, x).unwrap();
    let u = Tensor::matrix(len, d, u).unwrap();
    let sx = Standardizer::fit(&x.slice_rows(0, fit_rows).unwrap()).unwrap();
    let su = Standardizer::fit(&u.slice_rows(0, fit_rows).unwrap()).unwrap();
    (sx.transform(&x).unwrap(), su.transform(&u).unwrap())
}

fn fit(model: &ModelConfig, x: &Tensor, u: &Tensor, config: &TrainConfig) -> ModelParams {
    train_from(init_params(model, config.seed).unwrap(), x, u, config, |_, _| Ok(()))
        .unwrap()
        .params
}

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..3 {
        let p = jittered(&toy_config(), seed);
        let (x, u) = toy_series(8, 1, 2, 50 + seed);
        let batch = WindowBatch::single(&x, &u).unwrap();
        let noise = FrozenNoise::sample(ChaCha8Rng::seed_from_u64(seed), 8, 2, 2).unwrap();
        let tensors: Vec<Tensor> = p.tensors().into_iter().cloned().collect();
        let err = finite_diff_check_many(
            |tape, vars| {
                let mut it = vars.iter();
                let w = p.weights.map(|_| *it.next().unwrap());
                Ok(elbo_sgvb(tape, &w, &p.config, &batch, 2, &mut noise.clone())?.loss)
            },
            &tensors,
            1e-6,
        )
        .unwrap();
        worst = worst.max(err);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst < 1e-4 && secs < 30.0, format!("max relative error {worst:.2e} (< 1e-4), {secs:.1}s (< 30s)"))
}

fn kl_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for case in 0..20 {
        let mut draw = |lo: f64, hi: f64| -> Vec<f64> { (0..3).map(|_| rng.random_range(lo..hi)).collect() };
        let (mq, sq, mp, sp) = (draw(-1.0, 1.0), draw(0.5, 2.0), draw(-1.0, 1.0), draw(0.5, 2.0));
        let v = |x: &[f64]| Tensor::vector(x.to_vec());
        let exact = kl_diag_gaussian_value(&v(&mq), &v(&sq), &v(&mp), &v(&sp)).unwrap();
        assert!((exact - kl(&mq, &sq, &mp, &sp)).abs() < 1e-12);
        let mc = monte_carlo_kl(&mq, &sq, &mp, &sp, 1_000_000, 100 + case);
        worst = worst.max((mc - exact).abs() / exact);
    }
    outcome(worst < 0.01, format!("20 pairs, 1e6 draws, max relative gap {:.3}% (< 1%)", worst * 100.0))
}

/// `int (F(y) - 1{y >= truth})^2 dy` for a step CDF, summed segment by segment.
fn crps_integral_empirical(sorted: &[f64], truth: f64) -> f64 {
    let n = sorted.len() as f64;
    let mut knots: Vec<f64> = sorted.to_vec();
    knots.push(truth);
    knots.sort_by(f64::total_cmp);
    let mut total = 0.0;
    let mut below = 0usize;
    for w in knots.windows(2) {
        while below < sorted.len() && sorted[below] <= w[0] {
            below += 1;
        }
        let f = below as f64 / n;
        let step = if w[0] >= truth { 1.0 } else { 0.0 };
        total += (f - step).powi(2) * (w[1] - w[0]);
    }
    total
}

/// Composite Simpson on each side of the truth.
fn crps_integral_gaussian(mean: f64, std: f64, truth: f64) -> f64 {
    let cdf = |y: f64| 0.5 * (1.0 + libm::erf((y - mean) / (std * std::f64::consts::SQRT_2)));
    let simpson = |a: f64, b: f64, f: &dyn Fn(f64) -> f64| {
        let n = 20_000;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    };
    let (lo, hi) = (mean.min(truth) - 12.0 * std, mean.max(truth) + 12.0 * std);
    simpson(lo, truth, &|y| cdf(y).powi(2)) + simpson(truth, hi, &|y| (1.0 - cdf(y)).powi(2))
}

/// One draw from each of `n` equal-probability strata of `N(mean, std)`.
fn stratified_normal(mean: f64, std: f64, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let dist = statrs::distribution::Normal::new(mean, std).unwrap();
    (0..n)
        .map(|i| {
            let p = (i as f64 + rng.random::<f64>()) / n as f64;
            statrs::distribution::ContinuousCDF::inverse_cdf(&dist, p.clamp(1e-300, 1.0 - 1e-16))
        })
        .collect()
}

fn crps_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut sample_gap, mut closed_gap, mut empirical_gap, mut iid_gap): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..10 {
        let mean = rng.random_range(-3.0..3.0);
        let std = rng.random_range(0.2..3.0);
        let truth = mean + 1.5 * std * normal(&mut rng);
        let dist = Normal::new(mean, std).unwrap();
        let iid: Vec<f64> = (0..100_000).map(|_| dist.sample(&mut rng)).collect();
        let mut draws = stratified_normal(mean, std, 100_000, &mut rng);
        let sample = crps_sample(&draws, truth).unwrap();
        let closed = crps_gaussian(mean, std, truth).unwrap();
        iid_gap = iid_gap.max((crps_sample(&iid, truth).unwrap() - closed).abs() / closed);
        draws.sort_by(f64::total_cmp);
        let integral_closed = crps_integral_gaussian(mean, std, truth);
        let integral_sample = crps_integral_empirical(&draws, truth);
        sample_gap = sample_gap.max((sample - closed).abs() / closed);
        closed_gap = closed_gap.max((closed - integral_closed).abs() / integral_closed);
        empirical_gap = empirical_gap.max((sample - integral_sample).abs() / integral_sample);
    }
    outcome(
        sample_gap < 0.005 && closed_gap < 1e-3 && empirical_gap < 1e-3,
        format!(
            "stratified sample vs closed {:.3}% (< 0.5%; iid draws {:.3}%), closed vs integral {closed_gap:.1e}, sample vs integral {empirical_gap:.1e} (< 1e-3)",
            sample_gap * 100.0,
            iid_gap * 100.0
        ),
    )
}

/// Three AR(1) drivers enter the target; three white-noise columns do not.
fn ard_series(seed: u64, len: usize) -> (Tensor, Tensor) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coef = [1.0, -0.8, 0.6];
    let mut drivers = [0.0; 3];
    let (mut x, mut u) = (Vec::new(), Vec::new());
    for _ in 0..len {
        let mut row = [0.0; 6];
        for i in 0..3 {
            drivers[i] = 0.8 * drivers[i] + 0.6 * normal(&mut rng);
            row[i] = drivers[i];
        }
        for v in &mut row[3..] {
            *v = normal(&mut rng);
        }
        x.push((0..3).map(|i| coef[i] * row[i]).sum::<f64>() + 0.3 * normal(&mut rng));
        u.extend_from_slice(&row);
    }
    standardized(x, u, len, 6, len)
}

fn ard_selection() -> Outcome {
    let start = Instant::now();
    let model = ModelConfig { latent_dim: 2, hidden_dim: 8, mlp_dim: 8, ..ModelConfig::new(1, 6) };
    let mut ratios = Vec::new();
    for seed in 0..3 {
        let (x, u) = ard_series(seed, 2000);
        let config = TrainConfig {
            window: 48,
            batch_size: 4,
            iterations: 2000,
            learning_rate: 0.005,
            samples: 1,
            seed,
            ..TrainConfig::default()
        };
        let w = fit(&model, &x, &u, &config).relevance().unwrap().unwrap();
        let informative = w[..3].iter().sum::<f64>() / 3.0;
        let noise = w[3..].iter().sum::<f64>() / 3.0;
        ratios.push(noise / informative);
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = ratios.iter().all(|r| *r < 0.5) && secs < 300.0;
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.3}")).collect();
    outcome(pass, format!("noise/informative weight ratios [{}] (< 0.5 on 3/3), {secs:.1}s (< 300s)", shown.join(", ")))
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let rank = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        for (k, &i) in idx.iter().enumerate() {
            r[i] = k as f64;
        }
        r
    };
    let (ra, rb) = (rank(a), rank(b));
    let n = a.len() as f64;
    let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

fn horizon_std(samples: &Tensor) -> Vec<f64> {
    let (s, tau) = (samples.shape()[0], samples.shape()[1]);
    (0..tau)
        .map(|t| {
            let v: Vec<f64> = (0..s).map(|i| samples.values()[i * tau + t]).collect();
            let m = v.iter().sum::<f64>() / s as f64;
            (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (s - 1) as f64).sqrt()
        })
        .collect()
}

fn uncertainty_growth() -> Outcome {
    let (len, horizon) = (1000, 48);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut level = 0.0;
    let mut x = Vec::new();
    let mut u = Vec::new();
    for _ in 0..len + horizon {
        level += normal(&mut rng);
        x.push(level);
        u.push(normal(&mut rng));
    }
    let (x, u) = standardized(x, u, len + horizon, 1, len);
    let (x_hist, u_hist) = (x.slice_rows(0, len).unwrap(), u.slice_rows(0, len).unwrap());
    let model = ModelConfig { latent_dim: 2, hidden_dim: 8, mlp_dim: 8, ..ModelConfig::new(1, 1) };
    let config = TrainConfig {
        window: 48,
        batch_size: 4,
        iterations: 600,
        learning_rate: 0.005,
        samples: 1,
        seed: 5,
        ..TrainConfig::default()
    };
    let params = fit(&model, &x_hist, &u_hist, &config);
    let spec = ExogenousSpec::known(&u.slice_rows(len, len + horizon).unwrap()).unwrap();
    let options = ForecastOptions { trials: 1000, seed: 5, ..ForecastOptions::default() };
    let result = monte_carlo_forecast(&params, &x_hist, &u_hist, &spec, &options).unwrap();
    let std = horizon_std(&result.samples);
    let steps: Vec<f64> = (1..=horizon).map(|t| t as f64).collect();
    let rho = spearman(&steps, &std);
    outcome(
        rho > 0.9,
        format!("Spearman rho {rho:.3} (> 0.9) over 48 steps, std {:.3} -> {:.3}", std[0], std[horizon - 1]),
    )
}

const PERIOD: usize = 24;
const SKILL_LEN: usize = 2000;
const SKILL_HORIZON: usize = 24;
const SKILL_WINDOWS: usize = 4;

/// Daily cycle plus an AR(1) driver; exogenous columns are the driver and
/// the cycle's sine and cosine.
fn seasonal_series(seed: u64) -> (Tensor, Tensor) {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
    let mut driver = 0.0;
    let (mut x, mut u) = (Vec::new(), Vec::new());
    for t in 0..SKILL_LEN {
        let phase = 2.0 * std::f64::consts::PI * (t % PERIOD) as f64 / PERIOD as f64;
        driver = 0.9 * driver + 0.5 * normal(&mut rng);
        x.push(2.0 * phase.sin() + 0.8 * (2.0 * phase).cos() + driver + 0.3 * normal(&mut rng));
        u.extend_from_slice(&[driver, phase.sin(), phase.cos()]);
    }
    let train_end = SKILL_LEN - SKILL_HORIZON * SKILL_WINDOWS;
    standardized(x, u, SKILL_LEN, 3, train_end)
}

fn skill_model(seed: u64) -> (ModelParams, Tensor, Tensor) {
    let (x, u) = seasonal_series(seed);
    let train_end = SKILL_LEN - SKILL_HORIZON * SKILL_WINDOWS;
    let model = ModelConfig { latent_dim: 2, hidden_dim: 12, mlp_dim: 12, ..ModelConfig::new(1, 3) };
    let config = TrainConfig {
        window: 72,
        batch_size: 4,
        iterations: 800,
        learning_rate: 0.005,
        samples: 1,
        seed,
        ..TrainConfig::default()
    };
    let params = fit(&model, &x.slice_rows(0, train_end).unwrap(), &u.slice_rows(0, train_end).unwrap(), &config);
    (params, x, u)
}

fn forecast_skill(models: &[(ModelParams, Tensor, Tensor)], start: Instant) -> Outcome {
    let train_end = SKILL_LEN - SKILL_HORIZON * SKILL_WINDOWS;
    let mut improvements = Vec::new();
    for (seed, (params, x, u)) in models.iter().enumerate() {
        let options = ForecastOptions { trials: 500, seed: seed as u64, ..ForecastOptions::default() };
        let model = ModelForecaster::known(params, options);
        let baseline = SeasonalNaive { period: PERIOD, trials: 500, seed: seed as u64 };
        let m = rolling_window_evaluate(&model, x, u, train_end, SKILL_HORIZON, SKILL_WINDOWS).unwrap();
        let b = rolling_window_evaluate(&baseline, x, u, train_end, SKILL_HORIZON, SKILL_WINDOWS).unwrap();
        improvements.push(1.0 - m.mean() / b.mean());
    }
    let secs = start.elapsed().as_secs_f64();
    let wins = improvements.iter().filter(|i| **i >= 0.10).count();
    let shown: Vec<String> = improvements.iter().map(|i| format!("{:.1}%", i * 100.0)).collect();
    outcome(
        wins >= 2 && secs < 300.0,
        format!("CRPS improvement over seasonal naive [{}], {wins}/3 seeds >= 10%, {secs:.1}s (< 300s)", shown.join(", ")),
    )
}

fn exogenous_uncertainty(models: &[(ModelParams, Tensor, Tensor)]) -> Outcome {
    let (params, x, u) = &models[0];
    let origin = SKILL_LEN - SKILL_HORIZON;
    let (x_hist, u_hist) = (x.slice_rows(0, origin).unwrap(), u.slice_rows(0, origin).unwrap());
    let future = u.slice_rows(origin, SKILL_LEN).unwrap();
    let options = ForecastOptions { trials: 1000, seed: 11, ..ForecastOptions::default() };
    let variance = |spec: &ExogenousSpec| {
        let r = monte_carlo_forecast(params, &x_hist, &u_hist, spec, &options).unwrap();
        horizon_std(&r.samples)[SKILL_HORIZON - 1].powi(2)
    };
    let known = variance(&ExogenousSpec::known(&future).unwrap());
    let uncertain = variance(&ExogenousSpec::with_linear_uncertainty(&future, &[0], 1.0).unwrap());
    outcome(
        uncertain > known,
        format!("final-step variance {uncertain:.4} with driver std 0 -> 1 vs {known:.4} known"),
    )
}

fn run_cli(verb: Verb, config: &Path, out: &Path) {
    let inv = Invocation { out: Some(out.to_path_buf()), ..Invocation::new(verb, config) };
    run_command(&inv, &mut std::io::sink()).unwrap();
}

fn determinism() -> Outcome {
    let demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo");
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::copy(demo.join("series.csv"), d.join("series.csv")).unwrap();
    let text = std::fs::read_to_string(demo.join("config.toml")).unwrap();
    let parallel = d.join("parallel.toml");
    let sequential = d.join("sequential.toml");
    std::fs::write(&parallel, &text).unwrap();
    std::fs::write(&sequential, text.replace("parallel = true", "parallel = false")).unwrap();

    let (a, b) = (d.join("a"), d.join("b"));
    run_cli(Verb::Train, &parallel, &a);
    run_cli(Verb::Train, &parallel, &b);
    let mut files: Vec<String> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    let same = |name: &str, x: &Path, y: &Path| std::fs::read(x.join(name)).unwrap() == std::fs::read(y.join(name)).unwrap();
    let train_same = files.iter().all(|f| same(f, &a, &b));

    run_cli(Verb::Forecast, &parallel, &a);
    let ckpt = a.join("checkpoint.json");
    let inv = Invocation {
        out: Some(b.clone()),
        checkpoint: Some(ckpt),
        ..Invocation::new(Verb::Forecast, &sequential)
    };
    run_command(&inv, &mut std::io::sink()).unwrap();
    let forecast_same = same("forecast.csv", &a, &b);
    outcome(
        train_same && forecast_same && files.contains(&"loss.csv".to_string()),
        format!(
            "train artifacts {} ({}), parallel vs sequential forecast.csv {}",
            if train_same { "identical" } else { "differ" },
            files.join(" "),
            if forecast_same { "identical" } else { "differ" }
        ),
    )
}

fn main() -> ExitCode {
    let suite_start = Instant::now();
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |n: usize| selected.is_empty() || selected.contains(&n);
    let mut failures = 0;
    let mut report = |n: usize, name: &str, run: &mut dyn FnMut() -> Outcome| {
        if !wanted(n) {
            return;
        }
        let t = Instant::now();
        let o = run();
        if !o.pass {
            failures += 1;
        }
        println!(
            "{} {n}. {name}: {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
    };

    report(1, "gradient suite", &mut gradient_suite);
    report(2, "KL oracle", &mut kl_oracle);
    report(3, "CRPS oracle", &mut crps_oracle);
    report(4, "ARD selection", &mut ard_selection);
    report(5, "uncertainty growth", &mut uncertainty_growth);
    let mut models = Vec::new();
    if wanted(6) || wanted(7) {
        let start = Instant::now();
        models = (0..3).map(skill_model).collect();
        report(6, "forecast skill", &mut || forecast_skill(&models, start));
    }
    report(7, "exogenous uncertainty effect", &mut || exogenous_uncertainty(&models));
    report(8, "determinism", &mut determinism);
    if selected.is_empty() {
        let secs = suite_start.elapsed().as_secs_f64();
        report(9, "suite runtime", &mut || outcome(secs < 900.0, format!("{secs:.1}s (< 900s)")));
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
