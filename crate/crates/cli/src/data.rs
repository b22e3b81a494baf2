//! Loading and generating the dataset of a run.

use serde_json::{json, Value};

use hkmedian::datasets::{
    gen_line_instance, gen_random_points, gen_rhst_adversarial, gen_well_clusterable, load_csv, min_max_scale,
    CsvOptions, PointDistribution,
};
use hkmedian::stream::{stream, TAG_DATA};
use hkmedian::{Dataset, Partition};

use crate::config::{GeneratorParams, GeneratorSpec, Settings};
use crate::fail::CliResult;

pub struct Input {
    pub dataset: Dataset,
    /// Known clusters, for the clusterable generator.
    pub truth: Option<Partition>,
    /// Generator-specific extras for the sidecar.
    pub extra: Value,
}

pub fn generate(spec: &GeneratorSpec, seed: u64) -> CliResult<Input> {
    let mut rng = stream(seed, &[TAG_DATA]);
    let mut random = |n, d, law| -> CliResult<Input> {
        Ok(Input {
            dataset: gen_random_points(n, d, law, &mut rng)?,
            truth: None,
            extra: Value::Null,
        })
    };
    match spec.0 {
        GeneratorParams::Uniform { n, d, side } => random(n, d, PointDistribution::UniformBox { side }),
        GeneratorParams::Gaussian { n, d, std } => random(n, d, PointDistribution::Gaussian { std }),
        GeneratorParams::Mixture {
            n,
            d,
            clusters,
            spread,
            side,
        } => random(n, d, PointDistribution::Mixture { clusters, spread, side }),
        GeneratorParams::Line { n, d1 } => Ok(Input {
            dataset: gen_line_instance(n, d1)?,
            truth: None,
            extra: Value::Null,
        }),
        GeneratorParams::Adversarial { n } => {
            let inst = gen_rhst_adversarial(n)?;
            Ok(Input {
                extra: json!({ "cells": inst.cells }),
                dataset: inst.dataset,
                truth: None,
            })
        }
        GeneratorParams::Clusterable { m, size, separation } => {
            let (dataset, truth) = gen_well_clusterable(m, size, separation, &mut stream(seed, &[TAG_DATA]))?;
            Ok(Input {
                extra: json!({ "clusters": truth.blocks() }),
                dataset,
                truth: Some(truth),
            })
        }
    }
}

/// The dataset described by resolved settings.
pub fn load(s: &Settings) -> CliResult<Input> {
    let scale = s.scale.unwrap_or(false);
    let input = match (&s.input, &s.generator) {
        (Some(path), _) => Input {
            dataset: load_csv(
                path,
                CsvOptions {
                    has_header: s.header.unwrap_or(false),
                    delimiter: s.delimiter.unwrap_or(',') as u8,
                    min_max_scale: scale,
                },
            )?,
            truth: None,
            extra: Value::Null,
        },
        (None, Some(spec)) => {
            let mut input = generate(spec, s.seed())?;
            if scale {
                input.dataset = min_max_scale(&input.dataset);
                input.dataset.ensure_distinct()?;
            }
            input
        }
        (None, None) => unreachable!("resolve requires a data source"),
    };
    Ok(input)
}
