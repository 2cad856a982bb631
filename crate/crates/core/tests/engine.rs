use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use shygamp::gamp::{GampConfig, Mode, Tuner};
use shygamp::input::{BernoulliGaussian, BgPrior};
use shygamp::output::{softmax, GmLikCache, MomentMethod, SumProduct};
use shygamp::synth::{calibrate_variance, expected_error, gen_dataset, gen_means, ClassModel};
use shygamp::{train, Dataset, TrainOptions};

fn matched_set() -> (ClassModel, Dataset) {
    let mut model = gen_means(500, 10, 4, false, 1).unwrap();
    let cal = calibrate_variance(&mut model, 0.10, 100_000, 2).unwrap();
    assert!((cal.bayes_error - 0.10).abs() < 0.005);
    let ds = gen_dataset(&model, 300, 3).unwrap();
    (model, ds)
}

#[test]
fn min_sum_with_sure_converges_on_matched_data() {
    let (model, ds) = matched_set();
    let res = train(&ds, &TrainOptions::for_mode(Mode::MinSum)).unwrap();
    assert!(res.converged, "last change {:?}", res.trace.last().map(|r| r.relative_change));
    assert!(res.iterations_run <= 200);
    let err = expected_error(&res.weights, &model, 200_000, 4).unwrap();
    assert!(err.error < 0.40, "{err:?}");
}

#[test]
fn sum_product_with_sampling_converges_on_matched_data() {
    let (model, ds) = matched_set();
    let mut opts = TrainOptions::for_mode(Mode::SumProduct);
    opts.config.moment_method = MomentMethod::Is;
    let res = train(&ds, &opts).unwrap();
    assert!(res.converged, "last change {:?}", res.trace.last().map(|r| r.relative_change));
    let err = expected_error(&res.weights, &model, 200_000, 4).unwrap();
    assert!(err.error < 0.40, "{err:?}");
}

#[test]
fn sum_product_with_mixture_reaches_low_error() {
    let (model, ds) = matched_set();
    let res = train(&ds, &TrainOptions::for_mode(Mode::SumProduct)).unwrap();
    let err = expected_error(&res.weights, &model, 200_000, 4).unwrap();
    assert!(err.error < 0.40, "{err:?}");
}

/// Labels drawn from the soft-max model itself with i.i.d. Gaussian features:
/// the spread of `r̂ − X` should track `q_r`.
#[test]
fn variance_tracks_error_on_a_true_glm() {
    let (n, m, d) = (200, 1000, 4);
    let (beta, var) = (0.1, 10.0_f64);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = Array2::from_shape_fn((m, n), |_| rng.sample::<f64, _>(StandardNormal) / (n as f64).sqrt());
    let x = Array2::from_shape_fn((n, d), |_| {
        if rng.random::<f64>() < beta {
            var.sqrt() * rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        }
    });
    let z = a.dot(&x);
    let labels = (0..m)
        .map(|i| {
            let p = softmax(z.row(i).as_slice().unwrap());
            let u: f64 = rng.random();
            let mut acc = 0.0;
            p.iter().position(|pk| {
                acc += pk;
                u < acc
            })
            .unwrap_or(d - 1)
        })
        .collect();
    let ds = Dataset::dense(a, labels, d).unwrap();
    let cfg = GampConfig { mode: Mode::SumProduct, tuner: Tuner::Fixed, damping: 1.0, ..GampConfig::default() };
    let mut input = BernoulliGaussian::new(BgPrior::new(vec![beta; d], vec![0.0; d], vec![var; d]).unwrap(), false);
    let output = SumProduct::new(MomentMethod::Gm, Some(GmLikCache::global().get(d, 2).unwrap()));
    let mut last = None;
    let res = shygamp::run_with_observer(&ds, &cfg, &mut input, &output, &mut |s, _| {
        let emp = (&s.r_hat - &x).iter().map(|v| v * v).sum::<f64>() / (n * d) as f64;
        last = Some(emp / s.q_r);
    })
    .unwrap();
    assert!(res.converged);
    let ratio = last.unwrap();
    assert!((0.8..1.25).contains(&ratio), "{ratio}");
    let mse = (res.weights.as_array() - &x).iter().map(|v| v * v).sum::<f64>();
    assert!(mse < 0.5 * x.iter().map(|v| v * v).sum::<f64>());
}
