use aberrasim_core::inn::{
    encode_condition, load_weights, save_weights, ConditionalInn, Init, InnConfig, Tensor3,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{display, file_sha256, Output};
use crate::args::{InitArg, InnArgs};
use crate::error::{CliError, Result};

/// Stream of the configuration seed used for the test image, apart from the
/// streams that initialize the network.
const INPUT_STREAM: u64 = 3;

#[derive(Debug, Serialize)]
struct RoundTripReport {
    k: usize,
    seed: u64,
    distance_mm: f64,
    condition: String,
    size: usize,
    channels: usize,
    max_error: f64,
    forward_inverse_error: f64,
    inverse_forward_error: f64,
    log_det: f64,
    weights: Option<String>,
    weights_sha256: Option<String>,
}

pub fn run(args: &InnArgs, out: &Output) -> Result<()> {
    if args.size == 0 || !args.size.is_multiple_of(2) {
        return Err(CliError::Invalid(format!(
            "--size {} must be even and positive",
            args.size
        )));
    }
    let net: ConditionalInn<f32> = match &args.weights {
        Some(path) => load_weights(path)?,
        None => ConditionalInn::new(InnConfig {
            k: args.k,
            seed: args.seed,
            init: match args.init {
                InitArg::Random => Init::Random,
                InitArg::Zero => Init::Zero,
            },
            ..InnConfig::default()
        })?,
    };
    let channels = net.config.channels;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    rng.set_stream(INPUT_STREAM);
    let x = Tensor3::<f32>::from_fn(channels, args.size, args.size, |_, _, _| {
        rng.random::<f32>()
    });
    let h = encode_condition(args.distance)?;

    let (y, log_det) = net.forward_blocks(&x, &h)?;
    let z = net.inverse_blocks(&x, &h)?;
    if !(log_det.is_finite() && y.data.iter().chain(&z.data).all(|v| v.is_finite())) {
        return Err(CliError::Numeric(
            "block chain produced non-finite values".into(),
        ));
    }
    let forward_inverse_error = net.inverse_blocks(&y, &h)?.max_abs_diff(&x);
    let inverse_forward_error = net.forward_blocks(&z, &h)?.0.max_abs_diff(&x);

    if let Some(path) = &args.save_weights {
        save_weights(path, &net)?;
    }
    let weights = args.save_weights.as_ref().or(args.weights.as_ref());
    let report = RoundTripReport {
        k: net.config.k,
        seed: args.seed,
        distance_mm: args.distance,
        condition: h.to_string(),
        size: args.size,
        channels,
        max_error: forward_inverse_error.max(inverse_forward_error),
        forward_inverse_error,
        inverse_forward_error,
        log_det,
        weights: weights.map(|p| display(p)),
        weights_sha256: weights.map(|p| file_sha256(p)).transpose()?,
    };
    out.emit(&report, || {
        format!(
            "k = {}: max round-trip error {:.3e} (log|det J| = {:.4})",
            report.k, report.max_error, report.log_det
        )
    })
}
