//! Lorentz-norm evaluation of sample sets supplied as CSV.

use crate::config::ExperimentConfig;
use crate::csvio::{read_samples, Csv};
use crate::{CliError, CliResult};
use pqlab_core::rearrangement::{lorentz_n1, lp_norm_from_profile, rearrange, WeightedSamples};

pub fn run(cfg: &ExperimentConfig) -> CliResult<Csv> {
    let path = cfg
        .input
        .as_ref()
        .ok_or_else(|| CliError::Config("lorentz needs input = <csv path>".into()))?;
    let pairs = read_samples(path)?;
    let samples = WeightedSamples::new(pairs)?;
    let profile = rearrange(&samples);
    let mut csv = Csv::new(&["n", "total_measure", "l1", "l2", "lorentz_n1"]);
    csv.push(vec![
        cfg.n as f64,
        profile.total_measure(),
        lp_norm_from_profile(&profile, 1.0),
        lp_norm_from_profile(&profile, 2.0).sqrt(),
        lorentz_n1(&profile, cfg.n),
    ]);
    Ok(csv)
}
