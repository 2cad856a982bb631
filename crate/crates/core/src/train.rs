//! Convenience assembly of denoisers for the common training setups.

use crate::error::{Error, Result};
use crate::gamp::{run_with_observer, GampConfig, GampState, IterationRecord, Mode, TrainResult, Tuner};
use crate::input::{BernoulliGaussian, BgPrior, InputDenoiser, Laplacian};
use crate::model::Dataset;
use crate::output::{GmLikCache, MinSum, MomentMethod, OutputDenoiser, SumProduct};

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub config: GampConfig,
    /// Fixed or initial soft-threshold scale; defaults to a scale matched to
    /// the feature energy.
    pub lambda: Option<f64>,
    pub sure_components: usize,
    pub gm_components: usize,
    pub max_newton_iters: usize,
}

impl TrainOptions {
    /// Default pairing: min-sum with SURE, sum-product with EM.
    pub fn for_mode(mode: Mode) -> Self {
        let tuner = match mode {
            Mode::MinSum => Tuner::Sure,
            Mode::SumProduct => Tuner::Em,
        };
        Self {
            config: GampConfig { mode, tuner, ..GampConfig::default() },
            lambda: None,
            sure_components: 3,
            gm_components: 2,
            max_newton_iters: 50,
        }
    }

    /// Checks the options without touching any data.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if let Some(l) = self.lambda {
            if self.config.mode == Mode::SumProduct {
                return Err(Error::InvalidInput("lambda applies to the min-sum (Laplacian) mode only".into()));
            }
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::InvalidInput(format!("lambda must be positive, got {l}")));
            }
        }
        if self.gm_components == 0 || self.sure_components == 0 {
            return Err(Error::InvalidInput("mixture component counts must be at least 1".into()));
        }
        Ok(())
    }
}

pub fn input_denoiser(dataset: &Dataset, opts: &TrainOptions) -> Result<Box<dyn InputDenoiser>> {
    let (m, n, d) = (dataset.num_samples(), dataset.num_features(), dataset.num_classes());
    let frob = dataset.frobenius_sq();
    Ok(match (opts.config.mode, opts.config.tuner) {
        (Mode::MinSum, tuner) => {
            let lambda = match opts.lambda {
                Some(l) if !(l > 0.0 && l.is_finite()) => {
                    return Err(Error::InvalidInput(format!("lambda must be positive, got {l}")))
                }
                Some(l) => l,
                None => Laplacian::scale_matched_lambda(d, m, frob).max(f64::MIN_POSITIVE),
            };
            match tuner {
                Tuner::Sure => Box::new(Laplacian::sure(lambda, opts.sure_components)?),
                _ => Box::new(Laplacian::fixed(lambda)?),
            }
        }
        (Mode::SumProduct, tuner) => {
            if opts.lambda.is_some() {
                return Err(Error::InvalidInput("lambda applies to the min-sum (Laplacian) mode only".into()));
            }
            Box::new(BernoulliGaussian::new(BgPrior::initial(d, m, n, frob), tuner == Tuner::Em))
        }
    })
}

pub fn output_denoiser(dataset: &Dataset, opts: &TrainOptions, cache: &GmLikCache) -> Result<Box<dyn OutputDenoiser>> {
    Ok(match opts.config.mode {
        Mode::MinSum => Box::new(MinSum { max_newton_iters: opts.max_newton_iters }),
        Mode::SumProduct => {
            let approx = match opts.config.moment_method {
                MomentMethod::Gm | MomentMethod::Ts => Some(cache.get(dataset.num_classes(), opts.gm_components)?),
                _ => None,
            };
            Box::new(SumProduct::new(opts.config.moment_method, approx))
        }
    })
}

/// Builds both denoisers and runs the engine.
pub fn train(dataset: &Dataset, opts: &TrainOptions) -> Result<TrainResult> {
    train_with_observer(dataset, opts, GmLikCache::global(), &mut |_, _| {})
}

pub fn train_with_observer(
    dataset: &Dataset,
    opts: &TrainOptions,
    cache: &GmLikCache,
    observer: &mut dyn FnMut(&GampState, &IterationRecord),
) -> Result<TrainResult> {
    opts.validate()?;
    let mut input = input_denoiser(dataset, opts)?;
    let output = output_denoiser(dataset, opts, cache)?;
    run_with_observer(dataset, &opts.config, input.as_mut(), output.as_ref(), observer)
}
