//! One function per subcommand. Each reads its inputs, writes its outputs
//! under the output directory and returns an error only when fatal.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use riskvol::embeddings::EmbeddingTable;
use riskvol::evaluation::{
    align, drift_matrix, run_experiment, sector_coefficient_report, yearly_feature_matrices, EvalReport,
    ExperimentData, ExperimentSpec, FirstYear, FusionMode, LexiconMode, Split,
};
use riskvol::features::Scheme;
use riskvol::filings::{process_filing, read_corpus, read_manifest, write_corpus, FilingError, RawFiling, Sector, TokenizedDoc};
use riskvol::lexicon::Lexicon;
use riskvol::market::{log_returns, read_labels, write_labels, LabelRecord, MarketError, PriceSeries};

use crate::config::{Config, Preset};

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const LABELS_FILE: &str = "labels.csv";

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn out_path(cfg: &Config, name: &str) -> PathBuf {
    cfg.paths.output_dir.join(name)
}

fn load_corpus(cfg: &Config) -> Result<Vec<TokenizedDoc>> {
    let path = out_path(cfg, CORPUS_FILE);
    let file = File::open(&path).with_context(|| format!("opening {} (run `ingest` first)", path.display()))?;
    Ok(read_corpus(BufReader::new(file))?)
}

fn load_labels(cfg: &Config) -> Result<Vec<LabelRecord>> {
    let path = out_path(cfg, LABELS_FILE);
    let file = File::open(&path).with_context(|| format!("opening {} (run `labels` first)", path.display()))?;
    Ok(read_labels(BufReader::new(file))?)
}

fn load_lexicon(cfg: &Config) -> Result<Lexicon> {
    let path = cfg.require("lexicon", &cfg.paths.lexicon)?;
    Lexicon::load(path, &cfg.categories()?).with_context(|| format!("loading lexicon {}", path.display()))
}

fn load_embeddings(cfg: &Config) -> Result<EmbeddingTable> {
    match &cfg.paths.embeddings {
        Some(path) => EmbeddingTable::load(path).with_context(|| format!("loading embeddings {}", path.display())),
        None => {
            warn!("no embeddings configured; extended weighting and expansion are no-ops");
            Ok(EmbeddingTable::default())
        }
    }
}

/// Lexicon as the configured mode sees it.
fn effective_lexicon(cfg: &Config, lexicon: &Lexicon, table: &EmbeddingTable) -> Lexicon {
    match cfg.experiment.lexicon_mode {
        LexiconMode::Lex => lexicon.clone(),
        LexiconMode::LexExt => lexicon.expand(table, cfg.experiment.expansion),
    }
}

pub fn ingest(cfg: &Config) -> Result<()> {
    let manifest = cfg.require("manifest", &cfg.paths.manifest)?;
    let entries = read_manifest(manifest).with_context(|| format!("reading manifest {}", manifest.display()))?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let min_tokens = cfg.engine.min_section_tokens;

    let results: Vec<Result<TokenizedDoc, FilingError>> = entries
        .par_iter()
        .map(|e| {
            let path = if e.path.is_relative() { base.join(&e.path) } else { e.path.clone() };
            let body = fs::read_to_string(&path)?;
            let raw = RawFiling {
                doc_id: e.doc_id.clone(),
                company_id: e.company_id.clone(),
                issue_date: e.issue_date,
                sector: e.sector,
                body,
            };
            process_filing(&raw, min_tokens)
        })
        .collect();

    let mut docs = Vec::new();
    let mut drops: Vec<(String, String)> = Vec::new();
    let (mut no_section, mut empty_section, mut other) = (0usize, 0usize, 0usize);
    for (entry, result) in entries.iter().zip(results) {
        match result {
            Ok(doc) => docs.push(doc),
            Err(e) => {
                match e {
                    FilingError::NoSectionFound => no_section += 1,
                    FilingError::EmptySection { .. } => empty_section += 1,
                    _ => other += 1,
                }
                warn!("dropping {}: {e}", entry.doc_id);
                drops.push((entry.doc_id.clone(), e.to_string()));
            }
        }
    }

    let mut w = create(&out_path(cfg, CORPUS_FILE))?;
    write_corpus(&mut w, &docs)?;
    w.flush()?;

    let mut log = format!(
        "filings\t{}\nkept\t{}\nNoSectionFound\t{no_section}\nEmptySection\t{empty_section}\nother\t{other}\n",
        entries.len(),
        docs.len()
    );
    for (id, reason) in &drops {
        log.push_str(&format!("drop\t{id}\t{reason}\n"));
    }
    write_text(&out_path(cfg, "ingest_log.tsv"), &log)?;
    info!("ingest: kept {} of {} filings", docs.len(), entries.len());
    Ok(())
}

pub fn labels(cfg: &Config) -> Result<()> {
    let prices_dir = cfg.require("prices_dir", &cfg.paths.prices_dir)?;
    let docs = load_corpus(cfg)?;
    let mut companies: Vec<&str> = docs.iter().map(|d| d.company_id.as_str()).collect();
    companies.sort_unstable();
    companies.dedup();

    let returns: HashMap<&str, Result<_, MarketError>> = companies
        .par_iter()
        .map(|&c| {
            let series = PriceSeries::load(c, &prices_dir.join(format!("{c}.csv"))).and_then(|s| log_returns(&s));
            (c, series)
        })
        .collect();

    let min_obs = cfg.engine.garch_min_observations;
    let computed: Vec<(LabelRecord, Vec<String>)> = docs
        .par_iter()
        .map(|d| match &returns[d.company_id.as_str()] {
            Ok(r) => {
                let (rec, problems) = LabelRecord::compute(&d.doc_id, d.sector, d.issue_date, r, min_obs);
                (rec, problems.iter().map(ToString::to_string).collect())
            }
            Err(e) => (
                LabelRecord {
                    doc_id: d.doc_id.clone(),
                    sector: d.sector,
                    y: [None; riskvol::market::HORIZONS],
                    current_volatility: None,
                    garch: None,
                },
                vec![e.to_string()],
            ),
        })
        .collect();

    let mut log = String::new();
    let mut complete = 0;
    for (rec, problems) in &computed {
        if rec.y.iter().all(Option::is_some) {
            complete += 1;
        }
        for p in problems {
            log.push_str(&format!("{}\t{p}\n", rec.doc_id));
        }
    }
    let records: Vec<LabelRecord> = computed.into_iter().map(|(r, _)| r).collect();
    let mut w = create(&out_path(cfg, LABELS_FILE))?;
    write_labels(&mut w, &records)?;
    w.flush()?;
    write_text(
        &out_path(cfg, "labels_log.tsv"),
        &format!("reports\t{}\ncomplete\t{complete}\n{log}", records.len()),
    )?;
    info!("labels: {complete} of {} reports have all horizons", records.len());
    Ok(())
}

fn experiment_data(cfg: &Config) -> Result<ExperimentData> {
    Ok(ExperimentData::new(
        load_corpus(cfg)?,
        load_labels(cfg)?,
        load_lexicon(cfg)?,
        load_embeddings(cfg)?,
    ))
}

fn slug(name: &str) -> String {
    let mut out = String::new();
    for c in name.replace('^', "hat").chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    out.trim_matches('_').to_string()
}

fn fmt_metric(fy: Option<FirstYear>, pick: fn(FirstYear) -> f64) -> String {
    fy.map(|f| format!("{:.4}", pick(f))).unwrap_or_else(|| "-".into())
}

fn write_report(dir: &Path, stem: &str, report: &EvalReport) -> Result<()> {
    write_text(&dir.join(format!("{stem}.json")), &report.to_json())?;
    write_text(&dir.join(format!("{stem}.txt")), &format!("{}\n", report.to_table()))
}

pub fn evaluate(cfg: &Config) -> Result<()> {
    let data = experiment_data(cfg)?;
    let base = cfg.spec()?;
    let reports_dir = out_path(cfg, "reports");
    match cfg.experiment.preset {
        Preset::Single => {
            let report = run_experiment(&base, &data).with_context(|| format!("experiment {}", base.name()))?;
            write_report(&reports_dir, &slug(&report.name), &report)?;
            write_text(&out_path(cfg, "summary.txt"), &format!("{}\n", report.to_table()))?;
        }
        Preset::Grid => {
            let mut rows = vec![vec![
                "scheme".to_string(),
                "text_r2".into(),
                "text_mse".into(),
                "text+market_r2".into(),
                "text+market_mse".into(),
            ]];
            for extended in [false, true] {
                for scheme in Scheme::ALL {
                    let weighting = cfg.weighting(scheme, extended);
                    let mut row = vec![weighting.label()];
                    for fusion in [FusionMode::TextOnly, FusionMode::Stacking] {
                        let spec = ExperimentSpec {
                            weighting,
                            fusion,
                            ..base.clone()
                        };
                        match run_experiment(&spec, &data) {
                            Ok(report) => {
                                write_report(&reports_dir, &slug(&report.name), &report)?;
                                row.push(fmt_metric(report.first_year, |f| f.r2));
                                row.push(fmt_metric(report.first_year, |f| f.mse));
                            }
                            Err(e) => {
                                warn!("{} failed: {e}", spec.name());
                                row.push("failed".into());
                                row.push("failed".into());
                            }
                        }
                    }
                    rows.push(row);
                }
            }
            write_text(&out_path(cfg, "summary.txt"), &align(&rows))?;
        }
    }
    info!("evaluate: wrote {}", out_path(cfg, "summary.txt").display());
    Ok(())
}

pub fn drift(cfg: &Config) -> Result<()> {
    let docs = load_corpus(cfg)?;
    let table = load_embeddings(cfg)?;
    let lexicon = effective_lexicon(cfg, &load_lexicon(cfg)?, &table);
    let weighting = cfg.spec()?.weighting;
    let yearly = yearly_feature_matrices(&docs, &lexicon, &weighting, &table, None)?;
    let matrices: Vec<_> = yearly.iter().map(|(_, m)| m.clone()).collect();
    let sims = drift_matrix(&matrices)?;

    let mut csv = String::from("year");
    for (y, _) in &yearly {
        csv.push_str(&format!(",{y}"));
    }
    csv.push('\n');
    for ((y, _), row) in yearly.iter().zip(&sims) {
        csv.push_str(&y.to_string());
        for v in row {
            csv.push_str(&format!(",{v}"));
        }
        csv.push('\n');
    }
    write_text(&out_path(cfg, "drift.csv"), &csv)?;
    info!("drift: {} years", yearly.len());
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
enum Outcome {
    Scored(FirstYear),
    /// The configured horizons do not cover the first year.
    Unscored,
    Failed(String),
}

impl Outcome {
    fn from_first_year(fy: Option<FirstYear>) -> Self {
        fy.map_or(Outcome::Unscored, Outcome::Scored)
    }

    fn cell(&self, pick: fn(FirstYear) -> f64) -> String {
        match self {
            Outcome::Scored(f) => format!("{:.4}", pick(*f)),
            Outcome::Unscored => "-".into(),
            Outcome::Failed(_) => "failed".into(),
        }
    }
}

#[derive(Debug, Serialize)]
struct SectorRow {
    sector: Sector,
    docs: usize,
    general: Outcome,
    specific: Outcome,
    agnostic: Outcome,
    top_terms: Vec<(String, f64)>,
}

fn outcome(result: Result<EvalReport, riskvol::evaluation::EvalError>, what: &str) -> Outcome {
    match result {
        Ok(r) => Outcome::from_first_year(r.first_year),
        Err(e) => {
            warn!("{what} failed: {e}");
            Outcome::Failed(e.to_string())
        }
    }
}

pub fn sectors(cfg: &Config) -> Result<()> {
    let data = experiment_data(cfg)?;
    let base = cfg.spec()?;
    let (k, seed) = (cfg.experiment.folds, cfg.seeds.cv);
    let lexicon = effective_lexicon(cfg, &data.lexicon, &data.embeddings);
    let targets: HashMap<String, f64> = data
        .labels
        .values()
        .filter_map(|r| r.first_year().map(|y| (r.doc_id.clone(), y)))
        .collect();

    let mut counts: HashMap<Sector, usize> = HashMap::new();
    for d in &data.docs {
        *counts.entry(d.sector).or_default() += 1;
    }
    let present: Vec<Sector> = Sector::ALL.into_iter().filter(|s| counts.contains_key(s)).collect();
    if present.is_empty() {
        bail!("corpus has no reports");
    }
    let (kept, skipped): (Vec<Sector>, Vec<Sector>) =
        present.into_iter().partition(|s| counts[s] >= cfg.sectors.min_docs);
    for s in &skipped {
        warn!("skipping sector {s}: {} reports, minimum {}", counts[s], cfg.sectors.min_docs);
    }

    let general = run_experiment(
        &ExperimentSpec {
            split: Split::KFold { k, seed },
            per_sector: true,
            ..base.clone()
        },
        &data,
    );
    if let Err(e) = &general {
        warn!("general model failed: {e}");
    }

    let mut rows = Vec::new();
    for sector in kept {
        let general = match &general {
            Ok(r) => Outcome::from_first_year(
                r.per_sector.iter().find(|m| m.sector == sector).and_then(|m| m.first_year),
            ),
            Err(e) => Outcome::Failed(e.to_string()),
        };
        let specific = outcome(
            run_experiment(
                &ExperimentSpec {
                    split: Split::SectorSpecific { sector, k, seed },
                    ..base.clone()
                },
                &data,
            ),
            &format!("{sector} sector-specific"),
        );
        let agnostic = outcome(
            run_experiment(
                &ExperimentSpec {
                    split: Split::SectorAgnostic {
                        sector,
                        k,
                        seed,
                        sample_seed: cfg.seeds.sampling,
                    },
                    ..base.clone()
                },
                &data,
            ),
            &format!("{sector} sector-agnostic"),
        );
        let top_terms = match sector_coefficient_report(
            &data.docs,
            &targets,
            &lexicon,
            &base.weighting,
            &data.embeddings,
            Some(sector),
        ) {
            Ok(mut terms) => {
                terms.truncate(cfg.sectors.top_terms);
                terms
            }
            Err(e) => {
                warn!("{sector} coefficients failed: {e}");
                Vec::new()
            }
        };
        rows.push(SectorRow {
            sector,
            docs: counts[&sector],
            general,
            specific,
            agnostic,
            top_terms,
        });
    }

    let mut table = vec![vec![
        "sector".to_string(),
        "docs".into(),
        "general_r2".into(),
        "specific_r2".into(),
        "agnostic_r2".into(),
        "general_mse".into(),
        "specific_mse".into(),
        "agnostic_mse".into(),
    ]];
    let mut coefficients = String::from("sector,rank,term,coefficient\n");
    for r in &rows {
        let mut line = vec![r.sector.code().to_string(), r.docs.to_string()];
        for pick in [|f: FirstYear| f.r2, |f: FirstYear| f.mse] {
            for o in [&r.general, &r.specific, &r.agnostic] {
                line.push(o.cell(pick));
            }
        }
        table.push(line);
        for (rank, (term, c)) in r.top_terms.iter().enumerate() {
            coefficients.push_str(&format!("{},{},{term},{c}\n", r.sector.code(), rank + 1));
        }
    }
    let mut text = align(&table);
    for s in &skipped {
        text.push_str(&format!("skipped {} ({} reports)\n", s.code(), counts[s]));
    }
    write_text(&out_path(cfg, "sectors.txt"), &text)?;
    write_text(&out_path(cfg, "sectors.json"), &serde_json::to_string_pretty(&rows)?)?;
    write_text(&out_path(cfg, "coefficients.csv"), &coefficients)?;
    info!("sectors: {} analysed, {} skipped", rows.len(), skipped.len());
    Ok(())
}
