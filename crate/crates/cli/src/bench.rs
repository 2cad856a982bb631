//! `moments-bench`: accuracy and cost of the sum-product moment methods.

use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use shygamp::output::{
    moments_bruteforce, softmax, spa_moments_gm, spa_moments_is, spa_moments_ni, spa_moments_ts, GmLikCache, MomentMethod,
    MomentResult,
};

use crate::common::{emit, usage, CliError, CliResult};

#[derive(Args, Debug)]
pub struct BenchCmd {
    /// Classes.
    #[arg(long = "D", default_value_t = 4)]
    pub d: usize,
    /// Isotropic message variances to test.
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.1,1,4")]
    pub qp: Vec<f64>,
    /// Label/score draws per variance.
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, value_delimiter = ',', default_value = "gm,is,ni,ts")]
    pub methods: Vec<MomentMethod>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2)]
    pub gm_components: usize,
    /// Outer quadrature nodes of the mixture method.
    #[arg(long, default_value_t = 7)]
    pub gm_points: usize,
    #[arg(long, default_value_t = 1500)]
    pub is_samples: usize,
    #[arg(long, default_value_t = 7)]
    pub ni_points: usize,
    #[arg(long, default_value_t = 4.0)]
    pub ni_radius: f64,
    /// Per-dimension nodes of the dense reference grid (D ≤ 5 only; 0 skips it).
    #[arg(long, default_value_t = 21)]
    pub oracle_points: usize,
    /// Table destination [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// One draw: label from the soft-max of a score drawn around `p̂`.
struct Draw {
    y: usize,
    z: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64
}

pub fn bench(cmd: &BenchCmd) -> CliResult<()> {
    if cmd.d < 2 || cmd.trials == 0 || cmd.methods.is_empty() {
        return usage("moments-bench needs D >= 2, at least one trial and one method");
    }
    if cmd.qp.iter().any(|&q| !(q > 0.0 && q.is_finite())) {
        return usage("--qp values must be positive");
    }
    let d = cmd.d;
    let mut p_hat = vec![0.0; d];
    p_hat[0] = 1.0;
    let approx = if cmd.methods.iter().any(|m| matches!(m, MomentMethod::Gm)) {
        Some(GmLikCache::global().get(d, cmd.gm_components)?)
    } else {
        None
    };
    let use_oracle = d <= 5 && cmd.oracle_points >= 2;

    let mut table = csv::Writer::from_writer(vec![]);
    let header = ["method", "qp", "mse", "normalized_mse", "oracle_mse", "trivial_mse", "us_per_call", "failures"];
    table.write_record(header).map_err(|e| CliError::Runtime(e.to_string()))?;
    for (qi, &qp) in cmd.qp.iter().enumerate() {
        let q = vec![qp; d];
        let mut rng = ChaCha8Rng::seed_from_u64(cmd.seed.wrapping_add(qi as u64));
        let draws: Vec<Draw> = (0..cmd.trials)
            .map(|_| {
                let z: Vec<f64> = p_hat.iter().map(|p| p + qp.sqrt() * rng.sample::<f64, _>(StandardNormal)).collect();
                let probs = softmax(&z);
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let y = probs
                    .iter()
                    .position(|pk| {
                        acc += pk;
                        u < acc
                    })
                    .unwrap_or(d - 1);
                Draw { y, z }
            })
            .collect();
        let trivial = draws.iter().map(|dr| sq_dist(&p_hat, &dr.z)).sum::<f64>() / draws.len() as f64;
        let oracle = if use_oracle {
            let mut total = 0.0;
            for dr in &draws {
                let res = moments_bruteforce(dr.y, &p_hat, &q, cmd.oracle_points, 6.0)?;
                total += sq_dist(&res.z_hat, &dr.z);
            }
            Some(total / draws.len() as f64)
        } else {
            None
        };

        for &method in &cmd.methods {
            let mut total = 0.0;
            let mut failures = 0usize;
            let start = Instant::now();
            for (i, dr) in draws.iter().enumerate() {
                let res: shygamp::Result<MomentResult> = match method {
                    MomentMethod::Gm => spa_moments_gm(dr.y, &p_hat, &q, approx.as_ref().expect("fitted"), cmd.gm_points),
                    MomentMethod::Is => spa_moments_is(dr.y, &p_hat, &q, cmd.is_samples, cmd.seed.wrapping_add(i as u64)),
                    MomentMethod::Ni => spa_moments_ni(dr.y, &p_hat, &q, cmd.ni_points, cmd.ni_radius),
                    MomentMethod::Ts => spa_moments_ts(dr.y, &p_hat, &q),
                };
                match res {
                    Ok(r) => total += sq_dist(&r.z_hat, &dr.z),
                    Err(shygamp::Error::MethodBreakdown(_)) => failures += 1,
                    Err(e) => return Err(e.into()),
                }
            }
            let us = start.elapsed().as_secs_f64() * 1e6 / draws.len() as f64;
            let ok = draws.len() - failures;
            let mse = if ok > 0 { total / ok as f64 } else { f64::NAN };
            table
                .write_record([
                    method.to_string(),
                    qp.to_string(),
                    mse.to_string(),
                    (mse / trivial).to_string(),
                    oracle.map(|o| o.to_string()).unwrap_or_default(),
                    trivial.to_string(),
                    format!("{us:.2}"),
                    failures.to_string(),
                ])
                .map_err(|e| CliError::Runtime(e.to_string()))?;
        }
    }
    let bytes = table.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
    emit(cmd.out.as_deref(), &String::from_utf8_lossy(&bytes))
}
