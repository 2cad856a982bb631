//! Browser bindings: moment-method comparison, the SURE curve and a small
//! synthetic training run. Every export returns a JSON string.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::{json, Value};
use shygamp::input::{laplace_denoise, sure_objective, sure_tune_lambda};
use shygamp::output::{
    moments_bruteforce, spa_moments_gm, spa_moments_is, spa_moments_ni, spa_moments_ts, GmLikCache, MomentResult,
};
use shygamp::synth::{calibrate_variance, expected_error, gen_dataset, gen_means};
use shygamp::{Mode, TrainOptions};
use wasm_bindgen::prelude::*;
use web_time::Instant;

fn timed(f: impl Fn() -> shygamp::Result<MomentResult>, repeats: usize) -> (shygamp::Result<MomentResult>, f64) {
    let start = Instant::now();
    let mut res = f();
    for _ in 1..repeats {
        res = f();
    }
    (res, start.elapsed().as_secs_f64() * 1e6 / repeats as f64)
}

/// Posterior score moments from every method at `p̂ = offset·e₁`, `q_p = qp·I`.
pub fn compare_moments(d: usize, qp: f64, label: usize, offset: f64) -> Result<Value, String> {
    if !(2..=5).contains(&d) || label >= d || !(qp > 0.0) {
        return Err("need 2 <= D <= 5, label < D and qp > 0".into());
    }
    let mut p = vec![0.0; d];
    p[0] = offset;
    let q = vec![qp; d];
    let approx = GmLikCache::global().get(d, 2).map_err(|e| e.to_string())?;
    let runs: Vec<(&str, Box<dyn Fn() -> shygamp::Result<MomentResult>>, usize)> = vec![
        ("reference", Box::new(|| moments_bruteforce(label, &p, &q, 21, 6.0)), 1),
        ("gm", Box::new(|| spa_moments_gm(label, &p, &q, &approx, 7)), 20),
        ("is", Box::new(|| spa_moments_is(label, &p, &q, 1500, 1)), 5),
        ("ni", Box::new(|| spa_moments_ni(label, &p, &q, 7, 4.0)), 5),
        ("ts", Box::new(|| spa_moments_ts(label, &p, &q)), 50),
    ];
    let rows: Vec<Value> = runs
        .iter()
        .map(|(name, f, repeats)| {
            let (res, micros) = timed(f, *repeats);
            match res {
                Ok(r) => json!({"method": name, "z_hat": r.z_hat, "q_z": r.q_z, "micros": micros}),
                Err(e) => json!({"method": name, "error": e.to_string(), "micros": micros}),
            }
        })
        .collect();
    Ok(json!({"p_hat": p, "q_p": qp, "label": label, "methods": rows}))
}

/// SURE objective against the true soft-threshold error for a sparse signal
/// observed in Gaussian noise of variance `q_r`.
pub fn sure_curve(n: usize, sparsity: f64, signal_var: f64, q_r: f64, seed: u64) -> Result<Value, String> {
    if n < 10 || !(0.0..=1.0).contains(&sparsity) || !(signal_var > 0.0 && q_r > 0.0) {
        return Err("need n >= 10, sparsity in [0, 1] and positive variances".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..n)
        .map(|_| {
            let active = rng.random::<f64>() < sparsity;
            let g: f64 = rng.sample(StandardNormal);
            if active {
                signal_var.sqrt() * g
            } else {
                0.0
            }
        })
        .collect();
    let r: Vec<f64> = x.iter().map(|xi| xi + q_r.sqrt() * rng.sample::<f64, _>(StandardNormal)).collect();
    let fit = sure_tune_lambda(&r, q_r, 3).map_err(|e| e.to_string())?;
    let r_mat = ndarray::Array2::from_shape_vec((n, 1), r).expect("column");
    let top = fit.lambda_max.max(1e-9);
    let grid: Vec<f64> = (0..=80).map(|i| top * i as f64 / 80.0).collect();
    let mut sure = Vec::with_capacity(grid.len());
    let mut mse = Vec::with_capacity(grid.len());
    for &lambda in &grid {
        sure.push(q_r + sure_objective(lambda, &fit.gm, q_r));
        let (est, _) = laplace_denoise(&r_mat, q_r, lambda);
        mse.push(est.iter().zip(&x).map(|(e, xi)| (e - xi).powi(2)).sum::<f64>() / n as f64);
    }
    let mixture: Vec<Value> = fit.gm.components().map(|(w, m, v)| json!({"weight": w, "mean": m, "var": v})).collect();
    Ok(json!({
        "lambda": grid,
        "sure": sure,
        "mse": mse,
        "tuned": fit.lambda,
        "lambda_max": fit.lambda_max,
        "mixture": mixture,
    }))
}

/// Trains on matched synthetic data and reports the run.
pub fn train_synthetic(m: usize, n: usize, k: usize, d: usize, ber: f64, mode: &str, seed: u64) -> Result<Value, String> {
    let mode: Mode = mode.parse().map_err(|e: shygamp::Error| e.to_string())?;
    let err = |e: shygamp::Error| e.to_string();
    let mut model = gen_means(n, k, d, false, seed).map_err(err)?;
    let cal = calibrate_variance(&mut model, ber, 20_000, seed.wrapping_add(1)).map_err(err)?;
    let data = gen_dataset(&model, m, seed.wrapping_add(2)).map_err(err)?;
    let mut opts = TrainOptions::for_mode(mode);
    opts.config.seed = seed;
    let start = Instant::now();
    let res = shygamp::train(&data, &opts).map_err(err)?;
    let seconds = start.elapsed().as_secs_f64();
    let est = expected_error(&res.weights, &model, 50_000, seed.wrapping_add(3)).map_err(err)?;
    let w = res.weights.as_array();
    let energy: Vec<f64> = w.rows().into_iter().map(|row| row.iter().map(|v| v * v).sum()).collect();
    let support: Vec<usize> = (0..n).filter(|&i| energy[i] > 0.0).collect();
    let sparsity = res.weights.sparsity().ok();
    Ok(json!({
        "iterations": res.iterations_run,
        "converged": res.converged,
        "seconds": seconds,
        "error": est.error,
        "error_se": est.standard_error,
        "bayes_error": cal.bayes_error,
        "l0": shygamp::model::l0(&res.weights),
        "k99": sparsity.map(|s| s.k99),
        "relative_change": res.trace.iter().map(|t| t.relative_change).collect::<Vec<_>>(),
        "row_energy": energy,
        "support": support,
        "true_support": (0..k).collect::<Vec<_>>(),
    }))
}

fn to_js(v: Result<Value, String>) -> Result<String, JsValue> {
    v.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = compareMoments)]
pub fn compare_moments_js(d: usize, qp: f64, label: usize, offset: f64) -> Result<String, JsValue> {
    to_js(compare_moments(d, qp, label, offset))
}

#[wasm_bindgen(js_name = sureCurve)]
pub fn sure_curve_js(n: usize, sparsity: f64, signal_var: f64, q_r: f64, seed: u32) -> Result<String, JsValue> {
    to_js(sure_curve(n, sparsity, signal_var, q_r, seed as u64))
}

#[wasm_bindgen(js_name = trainSynthetic)]
pub fn train_synthetic_js(m: usize, n: usize, k: usize, d: usize, ber: f64, mode: &str, seed: u32) -> Result<String, JsValue> {
    to_js(train_synthetic(m, n, k, d, ber, mode, seed as u64))
}
