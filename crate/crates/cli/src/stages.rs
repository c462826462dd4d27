//! One function per pipeline stage.

use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde_json::json;

use sctsa_core::complexity::{read_profiles_csv, repetition_seed, trajectory, write_profiles_csv, write_trajectory_csv};
use sctsa_core::data::{bootstrap_rows, groups, read_expression, write_expression};
use sctsa_core::embed::write_embedding_csv;
use sctsa_core::homology::{betti_curve, betti_features, filtered_complex_from_distances, reduce_persistence, BettiFeatures};
use sctsa_core::lineage::{feature_table_from_betti, feature_table_from_profiles, hierarchical_cluster, FeatureTable};
use sctsa_core::mapper::mapper;
use sctsa_core::synth::generate;
use sctsa_core::{
    classical_mds, complexity_by_group, correlation_distance, euclidean_distances, load_expression, pca,
    ColumnSchema, DistanceMatrix, EmbedMethod, Embedding, ExpressionMatrix, FiltrationSource, GridSpec, GroupBy,
};

use crate::artifact::{json_bytes, write_atomic, RunManifest, StageRecord, StageWriter, SCHEMA_VERSION};
use crate::config::{FeatureSource, RunConfig};
use crate::CliError;

pub const EXPRESSION: &str = "ingest/expression.csv";
pub const DISTANCE: &str = "ingest/distance.bin";
pub const PROFILES: &str = "complexity/profiles.csv";
pub const BETTI_FEATURES: &str = "barcode/features.csv";

/// Run `body`, then record its digests and timing under `key`.
fn stage<F>(cfg: &RunConfig, key: &str, body: F) -> Result<(), CliError>
where
    F: FnOnce(&mut StageWriter) -> Result<(), CliError>,
{
    let run = cfg.out_dir();
    let started = Instant::now();
    let mut w = StageWriter::new(&run);
    body(&mut w)?;
    let mut manifest = RunManifest::load(&run)?.unwrap_or_default();
    manifest.stages.insert(
        key.to_string(),
        StageRecord {
            config: cfg.snapshot(),
            inputs: w.inputs,
            outputs: w.outputs,
            wall_clock_s: started.elapsed().as_secs_f64(),
        },
    );
    manifest.save(&run)?;
    Ok(())
}

/// Read an upstream artifact, naming the stage that should have written it.
pub fn upstream(w: &mut StageWriter, rel: &str) -> Result<Vec<u8>, CliError> {
    w.read(rel).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => {
            let stage = rel.split('/').next().unwrap_or(rel);
            CliError::Missing(vec![format!("{stage} ({rel})")])
        }
        _ => e.into(),
    })
}

fn csv_bytes<F>(f: F) -> Result<Vec<u8>, CliError>
where
    F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> csv::Result<()>,
{
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        f(&mut w).map_err(|e| CliError::Other(e.into()))?;
        w.flush()?;
    }
    Ok(buf)
}

pub fn load_cells(w: &mut StageWriter, stage: &str) -> Result<ExpressionMatrix, CliError> {
    let bytes = upstream(w, EXPRESSION)?;
    read_expression(bytes.as_slice(), b',', &ColumnSchema::default(), Path::new(EXPRESSION))
        .map_err(CliError::in_stage(stage))
}

pub fn load_distance(w: &mut StageWriter, stage: &str) -> Result<DistanceMatrix, CliError> {
    let bytes = upstream(w, DISTANCE)?;
    DistanceMatrix::read_binary(bytes.as_slice(), Path::new(DISTANCE)).map_err(CliError::in_stage(stage))
}

fn embed_cells(
    method: EmbedMethod,
    dim: usize,
    m: &ExpressionMatrix,
    d: &DistanceMatrix,
) -> sctsa_core::Result<Embedding> {
    match method {
        EmbedMethod::Mds => classical_mds(d, dim),
        EmbedMethod::Pca => pca(m, dim),
    }
}

pub fn cmd_synth(cfg: &RunConfig, output: Option<&Path>) -> Result<(), CliError> {
    let m = generate(&cfg.synth).map_err(CliError::in_stage("synth"))?;
    let mut buf = Vec::new();
    write_expression(&m, &mut buf).map_err(CliError::in_stage("synth"))?;
    match output {
        Some(p) => Ok(write_atomic(p, &buf)?),
        None => stage(cfg, "synth", |w| Ok(w.write("synth/expression.csv", &buf)?)),
    }
}

pub fn cmd_ingest(cfg: &RunConfig) -> Result<(), CliError> {
    let path: PathBuf = cfg
        .input
        .path
        .clone()
        .ok_or_else(|| CliError::Config("input.path is required (--input)".into()))?;
    if !path.is_file() {
        return Err(CliError::Data(format!("ingest: input file {} not found", path.display())));
    }
    let at = CliError::in_stage("ingest");
    stage(cfg, "ingest", |w| {
        let m = load_expression(&path, &cfg.schema()).map_err(&at)?;
        w.external(&path)?;
        let mut buf = Vec::new();
        write_expression(&m, &mut buf).map_err(&at)?;
        w.write(EXPRESSION, &buf)?;
        let d = correlation_distance(&m, cfg.input.correlation).map_err(&at)?;
        let mut bin = Vec::new();
        d.write_binary(&mut bin).map_err(&at)?;
        w.write(DISTANCE, &bin)?;
        if cfg.input.distance_csv {
            let mut text = Vec::new();
            d.write_csv(&mut text).map_err(&at)?;
            w.write("ingest/distance.csv", &text)?;
        }
        let sizes = |by| {
            groups(&m, by)
                .into_iter()
                .map(|g| json!({"label": g.label, "size": g.rows.len()}))
                .collect::<Vec<_>>()
        };
        let summary = json!({
            "schema_version": SCHEMA_VERSION,
            "cells": m.n_cells(),
            "genes": m.n_genes(),
            "correlation": cfg.input.correlation,
            "timestamps": sizes(GroupBy::Timestamp),
            "cell_types": sizes(GroupBy::CellType),
        });
        w.write("ingest/summary.json", &json_bytes(&summary))?;
        Ok(())
    })
}

pub fn cmd_embed(cfg: &RunConfig) -> Result<(), CliError> {
    let at = CliError::in_stage("embed");
    stage(cfg, "embed", |w| {
        let m = load_cells(w, "embed")?;
        let d = load_distance(w, "embed")?;
        let e = embed_cells(cfg.embed.method, cfg.embed.dim, &m, &d).map_err(&at)?;
        let mut buf = Vec::new();
        write_embedding_csv(&e, m.cell_ids(), m.timestamps(), m.cell_types(), &mut buf).map_err(&at)?;
        w.write("embed/embedding.csv", &buf)?;
        let summary = json!({
            "schema_version": SCHEMA_VERSION,
            "method": e.method,
            "dim": e.dim(),
            "spectrum": e.spectrum,
            "source_hash": e.source_hash,
        });
        w.write("embed/summary.json", &json_bytes(&summary))?;
        Ok(())
    })
}

pub fn cmd_complexity(cfg: &RunConfig) -> Result<(), CliError> {
    let at = CliError::in_stage("complexity");
    stage(cfg, "complexity", |w| {
        let m = load_cells(w, "complexity")?;
        let run = complexity_by_group(&m, &cfg.complexity_config()).map_err(&at)?;
        let mut buf = Vec::new();
        write_profiles_csv(&run.profiles, &mut buf).map_err(&at)?;
        w.write(PROFILES, &buf)?;
        let heat = sctsa_core::complexity::heatmap_json(&run.profiles);
        w.write("complexity/heatmap.json", &json_bytes(&heat))?;
        let [x, y] = cfg.complexity.trajectory;
        let mut buf = Vec::new();
        write_trajectory_csv(&trajectory(&run.profiles, x, y), x, y, &mut buf).map_err(&at)?;
        w.write("complexity/trajectory.csv", &buf)?;
        Ok(())
    })
}

struct GroupBarcode {
    label: String,
    m: usize,
    intervals: Vec<sctsa_core::homology::Interval>,
    grid: Vec<f64>,
    betti: Vec<Vec<u64>>,
    features: Vec<BettiFeatures>,
}

/// Vietoris-Rips barcodes of one bootstrap draw per group. The draw is the
/// one complexity repetition 0 uses when the sample sizes agree.
pub fn cmd_barcode(cfg: &RunConfig) -> Result<(), CliError> {
    let at = CliError::in_stage("barcode");
    stage(cfg, "barcode", |w| {
        let m = load_cells(w, "barcode")?;
        let c = &cfg.complexity;
        let b = &cfg.barcode;
        let draws = bootstrap_rows(&m, c.group_by, b.m_points, repetition_seed(cfg.seed, 0), c.sampling)
            .map_err(&at)?;
        let hmax = b.homology_max_dim;
        let results = draws
            .into_par_iter()
            .map(|(label, rows)| {
                let sample = m.select(&rows);
                let corr = correlation_distance(&sample, cfg.input.correlation)?;
                let filtrated = match cfg.filtration.source {
                    FiltrationSource::Raw => corr,
                    FiltrationSource::Embedding => {
                        euclidean_distances(&embed_cells(cfg.embed.method, cfg.embed.dim, &sample, &corr)?)
                    }
                };
                let fp = GridSpec::Uniform(cfg.filtration.grid).params(&filtrated, cfg.filtration.tau, hmax + 1)?;
                let fc = filtered_complex_from_distances(&filtrated, sample.timestamps(), &fp, hmax, b.budget)?;
                let bc = reduce_persistence(&fc);
                let curve = betti_curve(&bc, fp.grid(), hmax);
                Ok(GroupBarcode {
                    m: rows.len(),
                    label,
                    features: betti_features(&curve),
                    intervals: bc.intervals,
                    grid: curve.grid,
                    betti: curve.betti,
                })
            })
            .collect::<sctsa_core::Result<Vec<_>>>()
            .map_err(&at)?;

        let bars = csv_bytes(|out| {
            out.write_record(["group", "dim", "birth", "death"])?;
            for g in &results {
                for i in &g.intervals {
                    let death = if i.death.is_infinite() { "inf".to_string() } else { i.death.to_string() };
                    out.write_record([g.label.clone(), i.dim.to_string(), i.birth.to_string(), death])?;
                }
            }
            Ok(())
        })?;
        w.write("barcode/barcodes.csv", &bars)?;
        let betti = csv_bytes(|out| {
            out.write_record(["group", "dim", "step", "epsilon", "betti"])?;
            for g in &results {
                for (k, row) in g.betti.iter().enumerate() {
                    for (s, v) in row.iter().enumerate() {
                        out.write_record([g.label.clone(), k.to_string(), s.to_string(), g.grid[s].to_string(), v.to_string()])?;
                    }
                }
            }
            Ok(())
        })?;
        w.write("barcode/betti.csv", &betti)?;
        let feats = csv_bytes(|out| {
            out.write_record(["group", "dim", "integral", "max", "last"])?;
            for g in &results {
                for (k, f) in g.features.iter().enumerate() {
                    out.write_record([g.label.clone(), k.to_string(), f.integral.to_string(), f.max.to_string(), f.last.to_string()])?;
                }
            }
            Ok(())
        })?;
        w.write(BETTI_FEATURES, &feats)?;
        let doc = json!({
            "schema_version": SCHEMA_VERSION,
            "homology_max_dim": hmax,
            "groups": results.iter().map(|g| json!({
                "group": g.label,
                "m": g.m,
                "intervals": sctsa_core::homology::Barcode { intervals: g.intervals.clone() }.to_json()["intervals"],
            })).collect::<Vec<_>>(),
        });
        w.write("barcode/barcodes.json", &json_bytes(&doc))?;
        Ok(())
    })
}

/// Run-relative directory of the mapper graph for the configured tau.
pub fn mapper_dir(cfg: &RunConfig) -> String {
    format!("mapper/tau_{}", cfg.mapper.tau)
}

pub fn cmd_mapper(cfg: &RunConfig) -> Result<(), CliError> {
    let at = CliError::in_stage("mapper");
    let dir = mapper_dir(cfg);
    stage(cfg, &dir, |w| {
        let m = load_cells(w, "mapper")?;
        let corr = load_distance(w, "mapper")?;
        let lens = embed_cells(cfg.mapper.lens, cfg.embed.dim, &m, &corr).map_err(&at)?;
        let d = match cfg.mapper.distances {
            FiltrationSource::Embedding => euclidean_distances(&lens),
            FiltrationSource::Raw => corr,
        };
        let g = mapper(&lens, &d, m.timestamps(), &cfg.mapper_config()).map_err(&at)?;
        let ts = m.timestamps();
        w.write(&format!("{dir}/graph.json"), &json_bytes(&g.to_json(m.cell_ids(), ts)))?;
        w.write(&format!("{dir}/graph.dot"), g.to_dot(ts).as_bytes())?;
        let mut buf = Vec::new();
        g.write_nodes_csv(ts, &mut buf).map_err(&at)?;
        w.write(&format!("{dir}/nodes.csv"), &buf)?;
        let mut buf = Vec::new();
        g.write_edges_csv(&mut buf).map_err(&at)?;
        w.write(&format!("{dir}/edges.csv"), &buf)?;
        Ok(())
    })
}

/// `(labels, per-label features)` from the barcode stage's feature table.
pub fn read_betti_features(bytes: &[u8]) -> Result<(Vec<String>, Vec<Vec<BettiFeatures>>), CliError> {
    let bad = |msg: String| CliError::Data(format!("{BETTI_FEATURES}: {msg}"));
    let mut labels: Vec<String> = Vec::new();
    let mut feats: Vec<Vec<BettiFeatures>> = Vec::new();
    for rec in csv::Reader::from_reader(bytes).records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |i: usize| rec.get(i).and_then(|v| v.parse::<f64>().ok()).ok_or_else(|| bad(format!("bad field {i}")));
        let f = BettiFeatures {
            integral: num(2)?,
            max: num(3)? as u64,
            last: num(4)? as u64,
        };
        if labels.last().map(String::as_str) != Some(&rec[0]) {
            labels.push(rec[0].to_string());
            feats.push(Vec::new());
        }
        feats.last_mut().expect("pushed above").push(f);
    }
    Ok((labels, feats))
}

fn table_csv(t: &FeatureTable) -> Result<Vec<u8>, CliError> {
    csv_bytes(|out| {
        let mut header = vec!["group".to_string()];
        header.extend(t.columns.iter().cloned());
        out.write_record(&header)?;
        for r in 0..t.n_rows() {
            let mut rec = vec![t.rows[r].clone()];
            rec.extend(t.row(r).iter().map(|v| v.map_or_else(|| "NA".to_string(), |x| x.to_string())));
            out.write_record(&rec)?;
        }
        Ok(())
    })
}

pub fn cmd_lineage(cfg: &RunConfig) -> Result<(), CliError> {
    let at = CliError::in_stage("lineage");
    stage(cfg, "lineage", |w| {
        let l = &cfg.lineage;
        let table = match l.features {
            FeatureSource::Complexity => {
                let bytes = upstream(w, PROFILES)?;
                let profiles = read_profiles_csv(bytes.as_slice(), Path::new(PROFILES)).map_err(&at)?;
                feature_table_from_profiles(&profiles, l.standardize).map_err(&at)?
            }
            FeatureSource::Betti => {
                let (labels, feats) = read_betti_features(&upstream(w, BETTI_FEATURES)?)?;
                feature_table_from_betti(&labels, &feats, l.standardize).map_err(&at)?
            }
        };
        let dg = hierarchical_cluster(&table, l.linkage, l.metric).map_err(&at)?;
        w.write("lineage/features.csv", &table_csv(&table)?)?;
        w.write("lineage/dendrogram.nwk", dg.to_newick().as_bytes())?;
        let mut buf = Vec::new();
        dg.write_merges_csv(&mut buf).map_err(&at)?;
        w.write("lineage/merges.csv", &buf)?;
        let heat = sctsa_core::lineage::heatmap_json(&table, &dg);
        w.write("lineage/heatmap.json", &json_bytes(&heat))?;
        Ok(())
    })
}
