use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use recgan::codec::{encode_matrix, read_coded, write_coded, CodedDataset};
use recgan::eval::{metrics_row, null_seed, null_trials, report as build_report, NullResult, SegmentRow};
use recgan::gan::{build_model, load_checkpoint, save_checkpoint, train as train_gan, TrainingSet};
use recgan::ingest::{
    build_catalog, build_matrices, parse_events, read_pairs, segment_counts, segment_visitors, write_pairs, Catalog,
};
use recgan::recgen::{
    binarize, decode_realization, read_realizations, sample_segment, subsample, write_realizations,
    RecommendationSet,
};
use recgan::synth::generate;

use crate::config::{Format, RunConfig};
use crate::CliError;

pub const INTERACTIONS: &str = "interactions.txt";
pub const CODED: &str = "coded.rgc";
pub const MODEL: &str = "model.rgan";
pub const HISTORY: &str = "history.jsonl";
pub const CHECKPOINTS: &str = "checkpoints";
pub const SAMPLES: &str = "samples.rgc";
pub const REALIZATIONS: &str = "realizations.txt";
pub const METRICS: &str = "metrics.jsonl";
pub const NULL: &str = "null.jsonl";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TEXT: &str = "report.txt";
pub const SYNTH_TRUTH: &str = "synth_truth.json";

const SAMPLE_STAGE: u64 = 1;
const DECODE_STAGE: u64 = 2;
const NULL_STAGE: u64 = 3;

fn input(path: &Path, producer: &str) -> Result<BufReader<File>, CliError> {
    if !path.is_file() {
        return Err(CliError::validation(format!(
            "missing input {} (produced by `{producer}`)",
            path.display()
        )));
    }
    Ok(BufReader::new(File::open(path)?))
}

/// Writes through a temporary file so a failed command leaves no partial artifact.
fn output(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> Result<(), CliError>) -> Result<(), CliError> {
    let tmp = PathBuf::from(format!("{}.tmp", path.display()));
    let mut w = BufWriter::new(File::create(&tmp)?);
    write(&mut w)?;
    w.flush()?;
    drop(w);
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn catalog(cfg: &RunConfig) -> Result<Catalog, CliError> {
    Ok(build_catalog(input(&cfg.catalog, "synth")?)?)
}

pub fn synth(cfg: &RunConfig) -> Result<(), CliError> {
    let out = generate(&cfg.synth)?;
    for p in [&cfg.events, &cfg.catalog] {
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(&cfg.events, out.events_csv())?;
    std::fs::write(&cfg.catalog, out.catalog_csv())?;
    let truth = serde_json::to_string_pretty(&out.truth).expect("truth serializes");
    std::fs::write(cfg.artifact(SYNTH_TRUTH), truth + "\n")?;
    eprintln!(
        "synth: {} events, {} visitors, {} categories x {} items",
        out.events.len(),
        cfg.synth.n_segments * cfg.synth.visitors_per_segment,
        cfg.synth.n_categories,
        cfg.synth.items_per_category
    );
    Ok(())
}

pub fn ingest(cfg: &RunConfig) -> Result<(), CliError> {
    let log = parse_events(input(&cfg.events, "synth")?)?;
    let catalog = catalog(cfg)?;
    let segments = segment_visitors(&log, &cfg.bin_edges)?;
    let built = build_matrices(&log, &catalog, cfg.scheme, &segments)?;
    output(&cfg.artifact(INTERACTIONS), |w| Ok(write_pairs(w, &built.pairs)?))?;
    eprintln!(
        "ingest: {} events ({} malformed lines skipped), visitors per segment {:?}, {} {} pairs, {} events with unknown items",
        log.len(),
        log.skipped,
        segment_counts(&segments),
        built.pairs.len(),
        cfg.scheme,
        built.skipped_unknown
    );
    Ok(())
}

pub fn encode(cfg: &RunConfig) -> Result<(), CliError> {
    let pairs = read_pairs(input(&cfg.artifact(INTERACTIONS), "ingest")?)?;
    let catalog = catalog(cfg)?;
    let mut data = CodedDataset::new(catalog.n_categories(), cfg.codec.width, catalog.fingerprint());
    for p in &pairs {
        let (first, second) = encode_matrix(p, &catalog, &cfg.codec)?;
        data.push(p.segment, first, second)?;
    }
    output(&cfg.artifact(CODED), |w| Ok(write_coded(w, &data)?))?;
    eprintln!(
        "encode: {} pairs as {} x {} bit matrices",
        data.len(),
        data.rows,
        data.width
    );
    Ok(())
}

pub fn train(cfg: &RunConfig) -> Result<(), CliError> {
    let data = read_coded(input(&cfg.artifact(CODED), "encode")?)?;
    let mut gan_cfg = cfg.gan.clone();
    gan_cfg.rows = data.rows;
    gan_cfg.width = data.width;
    let mut model = build_model(&gan_cfg)?;
    let history = train_gan(&mut model, &TrainingSet::from_coded(&data), Some(&cfg.artifact(CHECKPOINTS)))?;
    output(&cfg.artifact(MODEL), |w| Ok(save_checkpoint(w, &model)?))?;
    output(&cfg.artifact(HISTORY), |w| {
        for s in &history {
            writeln!(w, "{}", serde_json::to_string(s).expect("stats serialize"))?;
        }
        Ok(())
    })?;
    let steps: usize = history.iter().map(|s| s.steps).sum();
    match history.last() {
        Some(last) => eprintln!(
            "train: {} epochs, {steps} steps; last epoch D accuracy {:.3}/{:.3}, D loss {:.4}, G loss {:.4}",
            history.len(),
            last.d_accuracy[0],
            last.d_accuracy[1],
            last.d_loss,
            last.g_loss
        ),
        None => eprintln!("train: no epochs run"),
    }
    Ok(())
}

pub fn sample(cfg: &RunConfig) -> Result<(), CliError> {
    let model = load_checkpoint(input(&cfg.artifact(MODEL), "train")?)?;
    let catalog = catalog(cfg)?;
    let m = &model.config;
    if m.rows != catalog.n_categories() {
        return Err(CliError::validation(format!(
            "model has {} rows but the catalog has {} categories",
            m.rows,
            catalog.n_categories()
        )));
    }
    let segments = cfg.segments.clone().unwrap_or_else(|| (0..m.n_segments).collect());
    let hash = catalog.fingerprint();
    let mut data = CodedDataset::new(m.rows, m.width, hash);
    for &y in &segments {
        let raw = sample_segment(&model, y, cfg.n_realizations, cfg.stage_seed(SAMPLE_STAGE))?;
        for (v, b) in &raw {
            data.push(y, binarize(v, cfg.threshold, hash), binarize(b, cfg.threshold, hash))?;
        }
    }
    output(&cfg.artifact(SAMPLES), |w| Ok(write_coded(w, &data)?))?;
    eprintln!(
        "sample: {} realizations for segments {segments:?}",
        data.len()
    );
    Ok(())
}

pub fn decode(cfg: &RunConfig) -> Result<(), CliError> {
    let data = read_coded(input(&cfg.artifact(SAMPLES), "sample")?)?;
    let catalog = catalog(cfg)?;
    if data.catalog_hash != catalog.fingerprint() {
        return Err(CliError::validation(format!(
            "{SAMPLES} was produced for a different catalog"
        )));
    }
    if data.width != cfg.codec.width {
        return Err(CliError::validation(format!(
            "{SAMPLES} has code width {} but codec.width is {}",
            data.width, cfg.codec.width
        )));
    }
    let mut by_segment: BTreeMap<usize, Vec<&recgan::codec::CodedRecord>> = BTreeMap::new();
    for r in &data.records {
        by_segment.entry(r.segment).or_default().push(r);
    }
    let mut sets = Vec::new();
    for (y, records) in by_segment {
        let kept = subsample(&records, cfg.subsample, cfg.stage_seed(DECODE_STAGE) ^ y as u64)?;
        let decoded: Vec<RecommendationSet> = kept
            .par_iter()
            .map(|r| decode_realization(&r.first, &r.second, y, &catalog, &cfg.codec))
            .collect::<recgan::Result<_>>()?;
        sets.extend(decoded);
    }
    output(&cfg.artifact(REALIZATIONS), |w| Ok(write_realizations(w, &sets, &catalog)?))?;
    eprintln!("decode: {} realizations", sets.len());
    Ok(())
}

fn realizations_by_segment(cfg: &RunConfig) -> Result<(Catalog, BTreeMap<usize, Vec<RecommendationSet>>), CliError> {
    let reader = input(&cfg.artifact(REALIZATIONS), "decode")?;
    let catalog = catalog(cfg)?;
    let sets = read_realizations(reader, &catalog)?;
    let mut by_segment: BTreeMap<usize, Vec<RecommendationSet>> = BTreeMap::new();
    for s in sets {
        by_segment.entry(s.segment).or_default().push(s);
    }
    if by_segment.is_empty() {
        return Err(CliError::validation(format!("{REALIZATIONS} is empty")));
    }
    Ok((catalog, by_segment))
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    output(path, |w| {
        for r in rows {
            writeln!(w, "{}", serde_json::to_string(r).expect("rows serialize"))?;
        }
        Ok(())
    })
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path, producer: &str) -> Result<Vec<T>, CliError> {
    let text = std::io::read_to_string(input(path, producer)?)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| CliError::validation(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

pub fn eval(cfg: &RunConfig) -> Result<(), CliError> {
    let (catalog, by_segment) = realizations_by_segment(cfg)?;
    let rows: Vec<SegmentRow> = by_segment
        .iter()
        .map(|(&y, sets)| metrics_row(y, sets, &catalog))
        .collect::<recgan::Result<_>>()?;
    write_jsonl(&cfg.artifact(METRICS), &rows)?;
    for r in &rows {
        eprintln!(
            "eval: segment {} CVR {:.3}{} J_c {:.2}{}",
            r.segment,
            r.cvr,
            if r.cvr_undefined { " (undefined)" } else { "" },
            r.jc,
            if r.jc_undefined { " (undefined)" } else { "" }
        );
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct NullRecord {
    segment: usize,
    #[serde(flatten)]
    result: NullResult,
}

pub fn nulltest(cfg: &RunConfig) -> Result<(), CliError> {
    let (catalog, by_segment) = realizations_by_segment(cfg)?;
    let records: Vec<NullRecord> = by_segment
        .iter()
        .map(|(&y, sets)| {
            let (dv, db) = recgan::eval::density(sets, &catalog);
            let seed = null_seed(cfg.stage_seed(NULL_STAGE), y);
            Ok(NullRecord {
                segment: y,
                result: null_trials(dv, db, &catalog, cfg.null_trials, seed)?,
            })
        })
        .collect::<recgan::Result<_>>()?;
    write_jsonl(&cfg.artifact(NULL), &records)?;
    for r in &records {
        eprintln!(
            "nulltest: segment {} CVR_rn {:.4} J_c_rn {:.2} over {} trials",
            r.segment, r.result.cvr.percent, r.result.jaccard.percent, r.result.trials
        );
    }
    Ok(())
}

pub fn report(cfg: &RunConfig) -> Result<(), CliError> {
    let rows: Vec<SegmentRow> = read_jsonl(&cfg.artifact(METRICS), "eval")?;
    let nulls: BTreeMap<usize, NullResult> = read_jsonl::<NullRecord>(&cfg.artifact(NULL), "nulltest")?
        .into_iter()
        .map(|r| (r.segment, r.result))
        .collect();
    let rows = rows
        .into_iter()
        .map(|r| match nulls.get(&r.segment) {
            Some(n) => Ok(r.with_null(n)),
            None => Err(CliError::validation(format!(
                "{NULL} has no trials for segment {}; rerun `nulltest`",
                r.segment
            ))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let report = build_report(rows)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    let text = report.to_text();
    std::fs::write(cfg.artifact(REPORT_JSON), &json)?;
    std::fs::write(cfg.artifact(REPORT_TEXT), &text)?;
    match cfg.format {
        Format::Text => print!("{text}"),
        Format::Json => print!("{json}"),
    }
    Ok(())
}
