use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::ops::ControlFlow;
use std::path::Path;

use anyhow::{Context, Result};
use log::info;
use spanrefine::corpus::{generate_synthetic, load_cluster_records, load_documents, save_documents, ClusterRecord};
use spanrefine::metrics::{ConllReport, CorpusScorer};
use spanrefine::model::{CorefModel, PreparedDoc};
use spanrefine::training::{fit, load_checkpoint, save_checkpoint};
use thiserror::Error;

use crate::config::RunConfig;

/// Input files that parse but do not line up with each other.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("gold and predicted files disagree on documents; missing from predictions: [{}]; missing from gold: [{}]", .missing_pred.join(", "), .missing_gold.join(", "))]
    MismatchedDocs {
        missing_pred: Vec<String>,
        missing_gold: Vec<String>,
    },
    #[error("duplicate doc_id {0} in {1}")]
    DuplicateDoc(String, String),
    #[error("document {0} not found in {1}")]
    UnknownDoc(String, String),
}

fn load_model(config: &RunConfig) -> Result<CorefModel> {
    let path = config.path("checkpoint")?;
    let params = load_checkpoint(&path).with_context(|| format!("loading checkpoint {}", path.display()))?;
    let embeddings = config.embedding_source()?.load().context("loading embeddings")?;
    let model = CorefModel::from_params(config.model_config()?, embeddings, params)
        .with_context(|| format!("checkpoint {} does not match the configured model", path.display()))?;
    Ok(model)
}

fn prepare_all(model: &CorefModel, docs: &[spanrefine::corpus::Document]) -> Result<Vec<PreparedDoc>> {
    docs.iter()
        .map(|d| model.prepare(d).with_context(|| format!("document {}", d.doc_id)))
        .collect()
}

pub fn train(config: &RunConfig) -> Result<()> {
    let train_path = config.path("train_data")?;
    let checkpoint = config.path("checkpoint")?;
    let model_config = config.model_config()?;
    let train_config = config.train_config()?;
    let embeddings = config.embedding_source()?.load().context("loading embeddings")?;

    let train_docs = load_documents(&train_path).with_context(|| format!("reading {}", train_path.display()))?;
    let dev_docs = match config.optional_path("dev_data") {
        Some(p) => Some(load_documents(&p).with_context(|| format!("reading {}", p.display()))?),
        None => None,
    };

    let mut model = CorefModel::new(model_config, embeddings, train_config.seed)?;
    let train_prep = prepare_all(&model, &train_docs)?;
    let dev_prep = match &dev_docs {
        Some(d) => prepare_all(&model, d)?,
        None => train_prep.clone(),
    };
    info!(
        "training on {} documents, scoring on {} {} documents",
        train_prep.len(),
        dev_prep.len(),
        if dev_docs.is_some() { "dev" } else { "training" }
    );

    fit(&mut model, &train_prep, Some(&dev_prep), &train_config, |s| {
        let f1 = s.report.map_or(0.0, |r| r.average_f1);
        println!("epoch {} loss {:.6} dev_conll_f1 {:.4}", s.epoch, s.loss, f1);
        ControlFlow::Continue(())
    })?;
    save_checkpoint(&model.params, &checkpoint)
        .with_context(|| format!("writing checkpoint {}", checkpoint.display()))?;
    info!("wrote {}", checkpoint.display());
    Ok(())
}

pub fn predict(config: &RunConfig) -> Result<()> {
    let input = config.path("input")?;
    let output = config.path("output")?;
    let model = load_model(config)?;
    let docs = load_documents(&input).with_context(|| format!("reading {}", input.display()))?;
    let mut out = BufWriter::new(File::create(&output).with_context(|| format!("creating {}", output.display()))?);
    for doc in &docs {
        let prep = model.prepare(doc).with_context(|| format!("document {}", doc.doc_id))?;
        let clusters = model.predict(&prep).with_context(|| format!("document {}", doc.doc_id))?;
        let record = ClusterRecord {
            doc_id: doc.doc_id.clone(),
            clusters: clusters.clusters,
        };
        writeln!(out, "{}", serde_json::to_string(&record)?)?;
    }
    out.flush()?;
    info!("wrote predictions for {} documents to {}", docs.len(), output.display());
    Ok(())
}

fn index_records(records: Vec<ClusterRecord>, path: &Path) -> Result<std::collections::BTreeMap<String, ClusterRecord>> {
    let mut map = std::collections::BTreeMap::new();
    for r in records {
        if map.contains_key(&r.doc_id) {
            return Err(DataError::DuplicateDoc(r.doc_id, path.display().to_string()).into());
        }
        map.insert(r.doc_id.clone(), r);
    }
    Ok(map)
}

pub fn format_report(r: &ConllReport) -> String {
    let mut s = String::new();
    for (name, m) in [("MUC", r.muc), ("B3", r.b_cubed), ("CEAF_phi4", r.ceaf_phi4)] {
        s.push_str(&format!(
            "{name:<10} P {:.4}  R {:.4}  F1 {:.4}\n",
            m.precision, m.recall, m.f1
        ));
    }
    s.push_str(&format!("CoNLL avg F1 {:.4}\n", r.average_f1));
    s
}

pub fn score(config: &RunConfig) -> Result<()> {
    let gold_path = config.path("gold")?;
    let pred_path = config.path("pred")?;
    let gold = index_records(
        load_cluster_records(&gold_path).with_context(|| format!("reading {}", gold_path.display()))?,
        &gold_path,
    )?;
    let pred = index_records(
        load_cluster_records(&pred_path).with_context(|| format!("reading {}", pred_path.display()))?,
        &pred_path,
    )?;
    let gold_ids: BTreeSet<&String> = gold.keys().collect();
    let pred_ids: BTreeSet<&String> = pred.keys().collect();
    if gold_ids != pred_ids {
        return Err(DataError::MismatchedDocs {
            missing_pred: gold_ids.difference(&pred_ids).map(|s| s.to_string()).collect(),
            missing_gold: pred_ids.difference(&gold_ids).map(|s| s.to_string()).collect(),
        }
        .into());
    }
    let mut scorer = CorpusScorer::new();
    for (id, g) in &gold {
        scorer
            .add(&g.clusters, &pred[id].clusters)
            .with_context(|| format!("document {id}"))?;
    }
    print!("{}", format_report(&scorer.report()));
    Ok(())
}

pub fn inspect(config: &RunConfig) -> Result<()> {
    let input = config.path("input")?;
    let doc_id = config.raw("doc_id");
    if doc_id.is_empty() {
        return Err(crate::config::ConfigError::Missing("doc_id").into());
    }
    let k: usize = config.get("top_k")?;
    let model = load_model(config)?;
    let docs = load_documents(&input).with_context(|| format!("reading {}", input.display()))?;
    let doc = docs
        .iter()
        .find(|d| d.doc_id == doc_id)
        .ok_or_else(|| DataError::UnknownDoc(doc_id.to_string(), input.display().to_string()))?;
    let prep = model.prepare(doc)?;
    for row in model.inspect(&prep, k)? {
        let cluster = row.cluster.map_or_else(|| "-".to_string(), |c| c.to_string());
        println!("mention {} {:?} cluster {cluster}", row.span, doc.span_text(row.span));
        for (span, weight) in row.top {
            println!("  {span} {:?} {weight:.4}", doc.span_text(span));
        }
    }
    Ok(())
}

pub fn gen(config: &RunConfig) -> Result<()> {
    let output = config.path("output")?;
    let seed: u64 = config.get("seed")?;
    let docs = generate_synthetic(&config.synthetic_config()?, seed)?;
    save_documents(&output, &docs).with_context(|| format!("writing {}", output.display()))?;
    info!("wrote {} documents to {}", docs.len(), output.display());
    Ok(())
}
