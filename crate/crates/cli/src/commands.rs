use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use snowflake_embed::dimension::{
    default_quasidoubling_grid, default_scale_grid, default_spectrum_grid, estimate_assouad_spectrum,
    estimate_minkowski, estimate_quasidoubling_constant, DimensionEstimate, QuasidoublingEstimate, Witness,
};
use snowflake_embed::embedding::{build_embedding, BuildOptions, Threshold};
use snowflake_embed::generators::{gen_space, GeneratorSpec};
use snowflake_embed::io::{
    coords_csv, pairs_csv, read_json, read_space_with_origin, write_json, write_text, EmbeddingFile, SpaceFile,
    VectorDump, SCHEMA_VERSION,
};
use snowflake_embed::metric_space::ValidateOptions;
use snowflake_embed::nets::build_hierarchy;
use snowflake_embed::params::{
    derive_practical, derive_strict, EmbeddingParams, Mode, PracticalInputs, StrictInputs, TauInputs,
};
use snowflake_embed::verify::report_for_fingerprint;
use snowflake_embed::MetricSpace;

use crate::args::*;
use crate::manifest::RunConfig;
use crate::CliError;

/// `params` artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub schema: u32,
    pub params: EmbeddingParams,
    /// Present when `C` was estimated from the space.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quasidoubling: Option<QuasidoublingEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleRow {
    pub radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimsRecord {
    pub what: DimWhat,
    pub value: f64,
    pub residual: Option<f64>,
    pub scales: Vec<ScaleRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witnesses: Option<Vec<Witness>>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub what: DimWhat,
    pub reason: String,
}

/// `dims` artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimsFile {
    pub schema: u32,
    pub theta: f64,
    pub delta: f64,
    pub normalized: bool,
    /// Covers use centers in the space itself.
    pub intrinsic_covers: bool,
    pub estimates: Vec<DimsRecord>,
    pub skipped: Vec<Skipped>,
}

struct StageOutput {
    outputs: Vec<PathBuf>,
    summary: Value,
    /// Set when the stage wrote its artifacts but must still exit nonzero.
    failure: Option<String>,
}

impl StageOutput {
    fn ok(outputs: Vec<PathBuf>, summary: Value) -> Self {
        Self {
            outputs,
            summary,
            failure: None,
        }
    }
}

pub(crate) fn dispatch(config: &RunConfig) -> Result<String, CliError> {
    let out = match &config.command {
        Command::Gen(a) => gen(config, a)?,
        Command::Dims(a) => dims(config, a)?,
        Command::Params(a) => params(config, a)?,
        Command::Nets(a) => nets(config, a)?,
        Command::Embed(a) => embed(config, a)?,
        Command::Verify(a) => verify(config, a)?,
        Command::Pipeline(a) => pipeline(config, a)?,
        Command::Replay(_) => return Err(CliError::Usage("a manifest cannot record a replay".into())),
    };
    let manifest = config.write_manifest(out.outputs.clone())?;
    if let Some(message) = out.failure {
        return Err(CliError::BoundsFailed(message));
    }
    Ok(json!({
        "subcommand": config.command.name(),
        "outputs": out.outputs,
        "manifest": manifest,
        "summary": out.summary,
    })
    .to_string())
}

fn load_space(path: &Path) -> Result<(MetricSpace, Option<GeneratorSpec>), CliError> {
    Ok(read_space_with_origin(path, ValidateOptions::default())?)
}

/// The space rescaled to diameter 1/2, and the factor applied.
fn normalized(raw: &MetricSpace) -> Result<(MetricSpace, f64), CliError> {
    Ok(raw.normalize_diameter()?)
}

fn gen(config: &RunConfig, a: &GenArgs) -> Result<StageOutput, CliError> {
    let spec = a.generator.spec();
    let space: MetricSpace = gen_space(&spec)?;
    let path = config.output(&a.output);
    write_json(&path, &SpaceFile::generated(&space, &spec))?;
    info!("generated {} points", space.len());
    Ok(StageOutput::ok(
        vec![path],
        json!({ "points": space.len(), "diameter": space.diameter() }),
    ))
}

fn estimate_record(what: DimWhat, e: DimensionEstimate) -> DimsRecord {
    DimsRecord {
        what,
        value: e.value,
        residual: Some(e.fit_residual),
        scales: e
            .scales_used
            .into_iter()
            .map(|(radius, count)| ScaleRow {
                radius,
                lambda: None,
                count,
            })
            .collect(),
        witnesses: None,
        warnings: Vec::new(),
    }
}

fn quasidoubling_record(q: QuasidoublingEstimate) -> DimsRecord {
    DimsRecord {
        what: DimWhat::Quasidoubling,
        value: q.constant,
        residual: None,
        scales: q
            .witnesses
            .iter()
            .map(|w| ScaleRow {
                radius: w.radius,
                lambda: Some(w.lambda),
                count: w.cover_size,
            })
            .collect(),
        witnesses: Some(q.witnesses),
        warnings: q.warnings,
    }
}

fn dims(config: &RunConfig, a: &DimsArgs) -> Result<StageOutput, CliError> {
    let (raw, _) = load_space(&a.input)?;
    let space = if a.no_normalize { raw } else { normalized(&raw)?.0 };
    let wanted: Vec<DimWhat> = match a.what {
        DimWhat::All => vec![DimWhat::Minkowski, DimWhat::Spectrum, DimWhat::Quasidoubling],
        w => vec![w],
    };
    let mut estimates = Vec::new();
    let mut skipped = Vec::new();
    for what in wanted {
        let result = match what {
            DimWhat::Minkowski => {
                let grid = a.scales.clone().unwrap_or_else(|| default_scale_grid(&space));
                estimate_minkowski(&space, &grid).map(|e| estimate_record(what, e))
            }
            DimWhat::Spectrum => {
                let grid = a
                    .scales
                    .clone()
                    .unwrap_or_else(|| default_spectrum_grid(&space, a.theta));
                estimate_assouad_spectrum(&space, a.theta, &grid).map(|e| estimate_record(what, e))
            }
            DimWhat::Quasidoubling | DimWhat::All => {
                estimate_quasidoubling_constant(&space, a.theta, a.delta, &default_quasidoubling_grid())
                    .map(quasidoubling_record)
            }
        };
        match result {
            Ok(r) => {
                for w in &r.warnings {
                    warn!("{w}");
                }
                estimates.push(r);
            }
            // A single requested estimate must succeed; `all` reports what it could not do.
            Err(e) if a.what != DimWhat::All => return Err(e.into()),
            Err(e) => {
                warn!("{what:?} skipped: {e}");
                skipped.push(Skipped {
                    what,
                    reason: e.to_string(),
                });
            }
        }
    }
    let file = DimsFile {
        schema: SCHEMA_VERSION,
        theta: a.theta,
        delta: a.delta,
        normalized: !a.no_normalize,
        intrinsic_covers: true,
        estimates,
        skipped,
    };
    let path = config.output(&a.output);
    write_json(&path, &file)?;
    let summary: Vec<Value> = file
        .estimates
        .iter()
        .map(|r| json!({ "what": r.what, "value": r.value }))
        .collect();
    Ok(StageOutput::ok(vec![path], Value::Array(summary)))
}

/// Derives parameters from flags, fitting levels to `space` (already normalized) when given.
fn derive_params(
    p: &ParamArgs,
    space: Option<&MetricSpace>,
) -> Result<(EmbeddingParams, Option<QuasidoublingEstimate>), CliError> {
    let diameter = space.map_or(p.diameter, |s| s.diameter());
    let (c, estimate) = match (p.c, space) {
        (Some(c), _) => (c, None),
        (None, Some(s)) => {
            let q = estimate_quasidoubling_constant(s, p.theta, p.delta, &default_quasidoubling_grid())?;
            for w in &q.warnings {
                warn!("{w}");
            }
            info!("estimated C = {}", q.constant);
            (q.constant, Some(q))
        }
        (None, None) => {
            return Err(CliError::Usage(
                "--C is required when no space is given with --input".into(),
            ))
        }
    };
    let mut params = match Mode::from(p.mode) {
        Mode::Strict => {
            if p.tau.is_some() || p.colors.is_some() || p.dimension.is_some() {
                return Err(CliError::Usage(
                    "--tau, --colors and --dimension apply to practical mode only".into(),
                ));
            }
            let mut tau = TauInputs::new(p.epsilon, p.theta, p.delta, c);
            tau.log_base = p.log_base.into();
            derive_strict(&StrictInputs {
                tau,
                n: p.n,
                diameter,
                grid_step: p.tau_step,
                budget_cap: p.budget_cap,
            })?
        }
        Mode::Practical => {
            let tau = p
                .tau
                .ok_or_else(|| CliError::Usage("practical mode needs --tau".into()))?;
            derive_practical(&PracticalInputs {
                epsilon: p.epsilon,
                theta: p.theta,
                delta: p.delta,
                c,
                tau,
                n: p.n,
                colors: p.colors,
                dimension: p.dimension,
                diameter,
                budget_cap: p.budget_cap,
            })?
        }
    };
    params.log_base = p.log_base.into();
    Ok((params, estimate))
}

fn warn_redundant_levels(space: &MetricSpace, params: &EmbeddingParams) {
    if let Some(min) = space.min_positive_distance() {
        let below: Vec<i32> = params.levels().filter(|&k| params.radius(k) < min).collect();
        if below.len() > 1 {
            warn!(
                "levels {:?} lie below the smallest distance {min}; all but the first repeat the same net",
                below
            );
        }
    }
}

fn params(config: &RunConfig, a: &ParamsArgs) -> Result<StageOutput, CliError> {
    let space = match &a.input {
        Some(p) => Some(normalized(&load_space(p)?.0)?.0),
        None => None,
    };
    let (params, quasidoubling) = derive_params(&a.params, space.as_ref())?;
    let file = ParamsFile {
        schema: SCHEMA_VERSION,
        params,
        quasidoubling,
    };
    let path = config.output(&a.output);
    write_json(&path, &file)?;
    Ok(StageOutput::ok(vec![path], serde_json::to_value(&file.params).expect("params serialize")))
}

fn read_params(path: &Path) -> Result<EmbeddingParams, CliError> {
    Ok(read_json::<ParamsFile>(path)?.params)
}

fn nets(config: &RunConfig, a: &NetsArgs) -> Result<StageOutput, CliError> {
    let (space, _) = normalized(&load_space(&a.input)?.0)?;
    let params = read_params(&a.params)?;
    warn_redundant_levels(&space, &params);
    let hierarchy = build_hierarchy(&space, &params, a.net_order.into())?;
    let path = config.output(&a.output);
    write_json(&path, &hierarchy.to_record())?;
    Ok(StageOutput::ok(
        vec![path],
        json!({ "levels": hierarchy.levels.len(), "colors": hierarchy.colors }),
    ))
}

fn embed(config: &RunConfig, a: &EmbedArgs) -> Result<StageOutput, CliError> {
    let (raw, generator) = load_space(&a.input)?;
    let (space, scale) = normalized(&raw)?;
    let params = match &a.params {
        Some(p) => read_params(p)?,
        None => derive_params(&a.param_flags, Some(&space))?.0,
    };
    warn_redundant_levels(&space, &params);
    let options = BuildOptions {
        threshold: if a.build.surrogate_threshold {
            Threshold::Surrogate
        } else {
            Threshold::Direct
        },
        net_order: a.build.net_order.into(),
    };
    let mut embedding = build_embedding(&space, &params, options)?;
    embedding.metadata.seed = generator.map(|g| g.seed);
    embedding.metadata.normalization_scale = Some(scale);
    if embedding.metadata.budget_grown {
        warn!("practical mode grew the color budget to {}", embedding.params.colors);
    }

    let path = config.output(&a.output);
    write_json(&path, &EmbeddingFile::from_embedding(&embedding))?;
    let mut outputs = vec![path];
    if a.build.dump_vectors {
        let p = config.output(Path::new("vectors.json"));
        write_json(&p, &VectorDump::from_embedding(&embedding))?;
        outputs.push(p);
    }
    if a.build.coords_csv {
        let p = config.output(Path::new("embedding.csv"));
        write_text(&p, &coords_csv(space.labels(), &embedding.coords))?;
        outputs.push(p);
    }
    Ok(StageOutput::ok(
        outputs,
        json!({
            "dimension": embedding.dimension(),
            "colors": embedding.params.colors,
            "colors_used": embedding.metadata.colors_used,
            "tau": embedding.params.tau,
            "n0": embedding.params.n0,
            "n": embedding.params.n,
        }),
    ))
}

fn verify(config: &RunConfig, a: &VerifyArgs) -> Result<StageOutput, CliError> {
    let (raw, _) = load_space(&a.input)?;
    let file: EmbeddingFile = read_json(&a.embedding)?;
    let space = if file.metadata.normalization_scale.is_some() {
        normalized(&raw)?.0
    } else {
        raw
    };
    let report = report_for_fingerprint(&space, &file.metadata.space_fingerprint, &file.coords, &file.params)?;
    let path = config.output(&a.output);
    write_json(&path, &report)?;
    let mut outputs = vec![path];
    if a.pairs_csv {
        let p = config.output(Path::new("pairs.csv"));
        write_text(&p, &pairs_csv(&report))?;
        outputs.push(p);
    }
    if !report.pass {
        warn!(
            "bounds fail: upper {} (witness {:?}), lower {} (witness {:?})",
            report.upper_pass, report.upper_witness, report.lower_pass, report.lower_witness
        );
    }
    let failure = (a.require_pass && !report.pass).then(|| {
        format!(
            "Hölder bounds fail: worst upper ratio {:?} vs {}, worst lower ratio {:?} vs {}",
            report.worst_upper, report.upper_constant, report.worst_lower, report.lower_constant
        )
    });
    Ok(StageOutput {
        outputs,
        summary: json!({
            "pass": report.pass,
            "certifies_theorem_bounds": report.certifies_theorem_bounds,
            "worst_upper": report.worst_upper,
            "upper_constant": report.upper_constant,
            "worst_lower": report.worst_lower,
            "lower_constant": report.lower_constant,
        }),
        failure,
    })
}

fn pipeline(config: &RunConfig, a: &PipelineArgs) -> Result<StageOutput, CliError> {
    let space = config.output(Path::new("space.json"));
    let params_path = config.output(Path::new("params.json"));
    let embedding = config.output(Path::new("embedding.json"));
    let mut outputs = Vec::new();
    let mut run = |stage: StageOutput| {
        outputs.extend(stage.outputs);
        (stage.summary, stage.failure)
    };
    run(gen(
        config,
        &GenArgs {
            generator: a.generator.clone(),
            output: "space.json".into(),
        },
    )?);
    run(dims(
        config,
        &DimsArgs {
            input: space.clone(),
            what: DimWhat::All,
            theta: a.params.theta,
            delta: a.params.delta,
            scales: None,
            no_normalize: false,
            output: "dims.json".into(),
        },
    )?);
    run(params(
        config,
        &ParamsArgs {
            params: a.params.clone(),
            input: Some(space.clone()),
            output: "params.json".into(),
        },
    )?);
    run(nets(
        config,
        &NetsArgs {
            input: space.clone(),
            params: params_path.clone(),
            net_order: a.build.net_order,
            output: "nets.json".into(),
        },
    )?);
    run(embed(
        config,
        &EmbedArgs {
            input: space.clone(),
            params: Some(params_path),
            param_flags: a.params.clone(),
            build: a.build.clone(),
            output: "embedding.json".into(),
        },
    )?);
    let (summary, failure) = run(verify(
        config,
        &VerifyArgs {
            input: space,
            embedding,
            pairs_csv: a.pairs_csv,
            require_pass: a.require_pass,
            output: "report.json".into(),
        },
    )?);
    Ok(StageOutput {
        outputs,
        summary,
        failure,
    })
}
