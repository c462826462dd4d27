//! Consolidated summary of a finished run.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use sctsa_core::complexity::{group_labels, mean_sc, read_profiles_csv};

use crate::artifact::{digest_file, json_bytes, RunManifest, StageRecord, StageWriter, SCHEMA_VERSION};
use crate::config::RunConfig;
use crate::stages::PROFILES;
use crate::CliError;

/// Files each stage must have left behind.
pub const REQUIRED: [(&str, &[&str]); 6] = [
    ("ingest", &["ingest/expression.csv", "ingest/distance.bin"]),
    ("embed", &["embed/embedding.csv"]),
    ("complexity", &["complexity/profiles.csv", "complexity/heatmap.json"]),
    ("barcode", &["barcode/barcodes.csv", "barcode/features.csv"]),
    ("mapper", &[]),
    ("lineage", &["lineage/merges.csv", "lineage/dendrogram.nwk"]),
];

/// `mapper/tau_*` directories holding a graph, sorted.
pub fn mapper_runs(run: &Path) -> Vec<String> {
    let mut out: Vec<String> = fs::read_dir(run.join("mapper"))
        .into_iter()
        .flatten()
        .flatten()
        .filter(|e| e.path().join("graph.json").is_file())
        .filter_map(|e| e.file_name().to_str().map(|n| format!("mapper/{n}")))
        .collect();
    out.sort();
    out
}

/// Stages whose artifacts or manifest records are absent.
pub fn missing_stages(run: &Path, manifest: Option<&RunManifest>) -> Vec<String> {
    let recorded = |key: &str| manifest.is_some_and(|m| m.stages.contains_key(key));
    let mut missing = Vec::new();
    for (stage, files) in REQUIRED {
        let ok = if stage == "mapper" {
            let runs = mapper_runs(run);
            !runs.is_empty() && runs.iter().all(|r| recorded(r))
        } else {
            recorded(stage) && files.iter().all(|f| run.join(f).is_file())
        };
        if !ok {
            missing.push(stage.to_string());
        }
    }
    missing
}

fn parse_err(rel: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("report: {rel}: {e}"))
}

fn read_json(run: &Path, rel: &str) -> Result<Value, CliError> {
    let bytes = fs::read(run.join(rel))?;
    serde_json::from_slice(&bytes).map_err(|e| parse_err(rel, e))
}

fn complexity_summary(run: &Path) -> Result<Value, CliError> {
    let bytes = fs::read(run.join(PROFILES))?;
    let profiles = read_profiles_csv(bytes.as_slice(), Path::new(PROFILES)).map_err(|e| parse_err(PROFILES, e))?;
    let max_dim = profiles.first().map_or(0, |p| p.max_dim());
    let groups = group_labels(&profiles);
    let values: Vec<Vec<Option<f64>>> = groups
        .iter()
        .map(|g| (1..=max_dim).map(|n| mean_sc(&profiles, g, n)).collect())
        .collect();
    Ok(json!({
        "rows": groups,
        "columns": (1..=max_dim).map(|n| format!("SC_{n}")).collect::<Vec<_>>(),
        "values": values,
        "repetitions": profiles.iter().map(|p| p.repetition + 1).max().unwrap_or(0),
    }))
}

fn barcode_summary(run: &Path) -> Result<Value, CliError> {
    let rel = "barcode/barcodes.csv";
    let bytes = fs::read(run.join(rel))?;
    // (group order, dim) -> (intervals, essential, max finite persistence)
    let mut order: Vec<String> = Vec::new();
    let mut stats: BTreeMap<(usize, usize), (usize, usize, f64)> = BTreeMap::new();
    for rec in csv::Reader::from_reader(bytes.as_slice()).records() {
        let rec = rec.map_err(|e| parse_err(rel, e))?;
        if order.last().map(String::as_str) != Some(&rec[0]) {
            order.push(rec[0].to_string());
        }
        let g = order.len() - 1;
        let dim: usize = rec[1].parse().map_err(|e| parse_err(rel, e))?;
        let birth: f64 = rec[2].parse().map_err(|e| parse_err(rel, e))?;
        let s = stats.entry((g, dim)).or_insert((0, 0, 0.0));
        s.0 += 1;
        if &rec[3] == "inf" {
            s.1 += 1;
        } else {
            let death: f64 = rec[3].parse().map_err(|e| parse_err(rel, e))?;
            s.2 = s.2.max(death - birth);
        }
    }
    Ok(Value::Array(
        stats
            .into_iter()
            .map(|((g, dim), (n, ess, pers))| {
                json!({"group": order[g], "dim": dim, "intervals": n, "essential": ess, "max_persistence": pers})
            })
            .collect(),
    ))
}

fn mapper_summary(run: &Path, dir: &str) -> Result<Value, CliError> {
    let rel = format!("{dir}/graph.json");
    let g = read_json(run, &rel)?;
    let bad = || parse_err(&rel, "unexpected layout");
    let nodes = g["nodes"].as_array().ok_or_else(bad)?;
    let links = g["links"].as_array().ok_or_else(bad)?;
    let span = |n: &Value| -> Option<(u64, u64)> { Some((n["time_min"].as_u64()?, n["time_max"].as_u64()?)) };
    let spans: Vec<(u64, u64)> = nodes.iter().map(span).collect::<Option<_>>().ok_or_else(bad)?;
    let mut parent: Vec<usize> = (0..nodes.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut max_edge_span = 0;
    for l in links {
        let (a, b) = (l["source"].as_u64().ok_or_else(bad)? as usize, l["target"].as_u64().ok_or_else(bad)? as usize);
        if a >= spans.len() || b >= spans.len() {
            return Err(bad());
        }
        max_edge_span = max_edge_span.max(spans[a].1.max(spans[b].1) - spans[a].0.min(spans[b].0));
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        parent[ra.max(rb)] = ra.min(rb);
    }
    let components = (0..nodes.len()).filter(|&i| find(&mut parent, i) == i).count();
    Ok(json!({
        "graph": dir,
        "tau": g["tau"],
        "nodes": nodes.len(),
        "edges": links.len(),
        "components": components,
        "max_node_span": spans.iter().map(|s| s.1 - s.0).max().unwrap_or(0),
        "max_edge_span": max_edge_span,
    }))
}

fn lineage_summary(run: &Path) -> Result<Value, CliError> {
    let heat = read_json(run, "lineage/heatmap.json")?;
    let newick = fs::read_to_string(run.join("lineage/dendrogram.nwk"))?;
    let merges = fs::read(run.join("lineage/merges.csv"))?;
    let n_merges = csv::Reader::from_reader(merges.as_slice()).records().count();
    Ok(json!({
        "leaf_order": heat["rows"],
        "features": heat["columns"],
        "merges": n_merges,
        "newick": newick.trim_end(),
    }))
}

fn fmt_sc(v: &Value) -> String {
    v.as_f64().map_or_else(|| "NA".to_string(), |x| format!("{x:.3}"))
}

fn text_summary(doc: &Value) -> String {
    let mut t = String::new();
    let _ = writeln!(t, "sctsa {} run report", doc["version"].as_str().unwrap_or(""));
    let c = &doc["complexity"];
    let _ = writeln!(t, "\nNormalized simplicial complexity (mean over repetitions)");
    let cols: Vec<&str> = c["columns"].as_array().into_iter().flatten().filter_map(Value::as_str).collect();
    let _ = writeln!(t, "{:<12} {}", "group", cols.iter().map(|c| format!("{c:>7}")).collect::<String>());
    for (g, row) in c["rows"].as_array().into_iter().flatten().zip(c["values"].as_array().into_iter().flatten()) {
        let cells: String = row.as_array().into_iter().flatten().map(|v| format!("{:>7}", fmt_sc(v))).collect();
        let _ = writeln!(t, "{:<12} {cells}", g.as_str().unwrap_or(""));
    }
    let _ = writeln!(t, "\nBarcodes");
    for b in doc["barcode"].as_array().into_iter().flatten() {
        let _ = writeln!(
            t,
            "  group {:<8} H{}: {} intervals, {} essential, max persistence {:.4}",
            b["group"].as_str().unwrap_or(""),
            b["dim"],
            b["intervals"],
            b["essential"],
            b["max_persistence"].as_f64().unwrap_or(0.0)
        );
    }
    let _ = writeln!(t, "\nMapper graphs");
    for m in doc["mapper"].as_array().into_iter().flatten() {
        let _ = writeln!(
            t,
            "  tau {}: {} nodes, {} edges, {} components, max node span {}, max edge span {}",
            m["tau"].as_str().map_or_else(|| m["tau"].to_string(), str::to_string),
            m["nodes"],
            m["edges"],
            m["components"],
            m["max_node_span"],
            m["max_edge_span"]
        );
    }
    let l = &doc["lineage"];
    let _ = writeln!(t, "\nLineage: {} merges", l["merges"]);
    let _ = writeln!(t, "  {}", l["newick"].as_str().unwrap_or(""));
    t
}

pub fn cmd_report(cfg: &RunConfig) -> Result<(), CliError> {
    let run = cfg.out_dir();
    let manifest = RunManifest::load(&run)?;
    let missing = missing_stages(&run, manifest.as_ref());
    if !missing.is_empty() {
        return Err(CliError::Missing(missing));
    }
    let mut manifest = manifest.expect("no stage is missing");
    let mut digests = BTreeMap::new();
    let mut mismatched = Vec::new();
    for (key, rec) in manifest.stages.iter().filter(|(k, _)| k.as_str() != "report" && k.as_str() != "synth") {
        for (rel, want) in &rec.outputs {
            match digest_file(&run.join(rel)) {
                Ok(got) if &got == want => {
                    digests.insert(rel.clone(), got);
                }
                _ => mismatched.push(format!("{key}: {rel}")),
            }
        }
    }
    if !mismatched.is_empty() {
        return Err(CliError::Data(format!(
            "report: artifacts differ from the manifest: {}",
            mismatched.join(", ")
        )));
    }
    let mappers = mapper_runs(&run)
        .iter()
        .map(|d| mapper_summary(&run, d))
        .collect::<Result<Vec<_>, _>>()?;
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "tool": manifest.tool,
        "version": manifest.version,
        "digests": digests,
        "complexity": complexity_summary(&run)?,
        "barcode": barcode_summary(&run)?,
        "mapper": mappers,
        "lineage": lineage_summary(&run)?,
    });
    let started = std::time::Instant::now();
    let mut w = StageWriter::new(&run);
    w.write("report/report.json", &json_bytes(&doc))?;
    w.write("report/report.txt", text_summary(&doc).as_bytes())?;
    manifest.stages.insert(
        "report".into(),
        StageRecord {
            config: cfg.snapshot(),
            inputs: doc["digests"]
                .as_object()
                .expect("built above")
                .iter()
                .map(|(k, v)| (k.clone(), v.as_str().unwrap_or("").to_string()))
                .collect(),
            outputs: w.outputs,
            wall_clock_s: started.elapsed().as_secs_f64(),
        },
    );
    manifest.save(&run)?;
    Ok(())
}
