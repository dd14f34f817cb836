//! End-to-end evaluation: features, reduction, per-horizon learners, scoring.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{mse, r_squared};
use super::report::{EvalReport, HorizonMetrics, PredictionRecord, SectorMetrics};
use super::splits::{kfold_assignment, sector_agnostic_split, temporal_split};
use super::EvalError;
use crate::embeddings::EmbeddingTable;
use crate::features::{build_with_cache, CorpusStats, FeatureMatrix, NeighborCache, PcaModel, WeightingSpec};
use crate::filings::{Sector, TokenizedDoc};
use crate::fusion::{early_fusion, stacking_train, Standardizer};
use crate::learning::{mkl_train, Kernel, SvrModel, SvrParams};
use crate::lexicon::Lexicon;
use crate::market::{filter_outliers, LabelRecord, MarketFeatures, HORIZONS};

/// Neighbors added per keyword in expanded mode.
pub const DEFAULT_EXPANSION: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LexiconMode {
    Lex,
    LexExt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    TextOnly,
    MarketOnly,
    Early,
    Stacking,
    Mkl,
    GarchOnly,
}

impl FusionMode {
    pub const ALL: [FusionMode; 6] = [
        FusionMode::TextOnly,
        FusionMode::MarketOnly,
        FusionMode::Early,
        FusionMode::Stacking,
        FusionMode::Mkl,
        FusionMode::GarchOnly,
    ];

    fn uses_text(self) -> bool {
        !matches!(self, FusionMode::MarketOnly | FusionMode::GarchOnly)
    }

    fn uses_market(self) -> bool {
        self != FusionMode::TextOnly
    }

    pub fn name(self) -> &'static str {
        match self {
            FusionMode::TextOnly => "text_only",
            FusionMode::MarketOnly => "market_only",
            FusionMode::Early => "early",
            FusionMode::Stacking => "stacking",
            FusionMode::Mkl => "mkl",
            FusionMode::GarchOnly => "garch_only",
        }
    }
}

impl fmt::Display for FusionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FusionMode {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FusionMode::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| EvalError::InvalidSpec(format!("unknown fusion mode {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlierScope {
    /// Filter each horizon's labels over all usable reports before splitting.
    Global,
    /// Thresholds from training-fold labels; outlying training reports are
    /// dropped, test reports are scored regardless.
    TrainFold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Split {
    KFold { k: usize, seed: u64 },
    Temporal { test_year: i32 },
    SectorSpecific { sector: Sector, k: usize, seed: u64 },
    SectorAgnostic { sector: Sector, k: usize, seed: u64, sample_seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub weighting: WeightingSpec,
    pub lexicon_mode: LexiconMode,
    pub expansion: usize,
    pub pca_dims: usize,
    pub fusion: FusionMode,
    /// 1-based quarter indices.
    pub horizons: Vec<usize>,
    pub split: Split,
    pub outlier_scope: OutlierScope,
    pub svr: SvrParams,
    pub stacking_seed: u64,
    /// Also report metrics per sector of the test reports.
    pub per_sector: bool,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), EvalError> {
        self.weighting
            .validate()
            .map_err(|e| EvalError::InvalidSpec(e.to_string()))?;
        if self.pca_dims == 0 {
            return Err(EvalError::InvalidSpec("pca_dims must be at least 1".into()));
        }
        if self.horizons.is_empty() {
            return Err(EvalError::InvalidSpec("no horizons requested".into()));
        }
        if let Some(h) = self.horizons.iter().find(|h| !(1..=HORIZONS).contains(*h)) {
            return Err(EvalError::InvalidSpec(format!("horizon {h} outside 1..={HORIZONS}")));
        }
        Ok(())
    }

    /// Short human-readable name, e.g. `BM25^ stacking`.
    pub fn name(&self) -> String {
        let lex = match self.lexicon_mode {
            LexiconMode::Lex => "",
            LexiconMode::LexExt => " ext",
        };
        format!("{}{} {}", self.weighting.label(), lex, self.fusion)
    }
}

/// Everything an experiment reads, already loaded.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub docs: Vec<TokenizedDoc>,
    pub labels: HashMap<String, LabelRecord>,
    pub lexicon: Lexicon,
    pub embeddings: EmbeddingTable,
}

impl ExperimentData {
    pub fn new(docs: Vec<TokenizedDoc>, labels: Vec<LabelRecord>, lexicon: Lexicon, embeddings: EmbeddingTable) -> Self {
        let mut docs = docs;
        docs.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        ExperimentData {
            docs,
            labels: labels.into_iter().map(|r| (r.doc_id.clone(), r)).collect(),
            lexicon,
            embeddings,
        }
    }

    fn label(&self, id: &str, horizon: usize) -> Option<f64> {
        self.labels.get(id).and_then(|r| r.y[horizon - 1])
    }

    fn market(&self, id: &str) -> Option<MarketFeatures> {
        self.labels.get(id).and_then(LabelRecord::market_features)
    }
}

struct Fold {
    train: Vec<String>,
    test: Vec<String>,
}

fn folds_for(spec: &ExperimentSpec, docs: &[TokenizedDoc]) -> Result<Vec<Fold>, EvalError> {
    let ids = |filter: &dyn Fn(&TokenizedDoc) -> bool| -> Vec<String> {
        docs.iter().filter(|d| filter(d)).map(|d| d.doc_id.clone()).collect()
    };
    let kfold = |ids: Vec<String>, k: usize, seed: u64| -> Result<Vec<Fold>, EvalError> {
        let parts = kfold_assignment(&ids, k, seed)?;
        Ok((0..k)
            .map(|f| Fold {
                train: (0..k).filter(|&g| g != f).flat_map(|g| parts[g].clone()).collect(),
                test: parts[f].clone(),
            })
            .collect())
    };
    match spec.split {
        Split::KFold { k, seed } => kfold(ids(&|_| true), k, seed),
        Split::Temporal { test_year } => {
            let (train, test) = temporal_split(docs, test_year)?;
            Ok(vec![Fold { train, test }])
        }
        Split::SectorSpecific { sector, k, seed } => kfold(ids(&|d| d.sector == sector), k, seed),
        Split::SectorAgnostic {
            sector,
            k,
            seed,
            sample_seed,
        } => {
            let sector_folds = kfold(ids(&|d| d.sector == sector), k, seed)?;
            sector_folds
                .into_iter()
                .enumerate()
                .map(|(f, fold)| {
                    let test_ids: BTreeSet<String> = fold.test.iter().cloned().collect();
                    let train = sector_agnostic_split(docs, sector, &test_ids, sample_seed.wrapping_add(f as u64))?;
                    Ok(Fold { train, test: fold.test })
                })
                .collect()
        }
    }
}

/// Out-of-fold predictions of one fold for one horizon.
struct HorizonOutput {
    records: Vec<PredictionRecord>,
}

struct FoldInputs<'a> {
    spec: &'a ExperimentSpec,
    data: &'a ExperimentData,
    lexicon: &'a Lexicon,
    cache: &'a NeighborCache,
    /// Usable reports per horizon after global outlier filtering.
    allowed: &'a BTreeMap<usize, BTreeSet<String>>,
}

fn standardized(scaler: &Standardizer, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, EvalError> {
    rows.iter()
        .map(|r| scaler.apply(r).map_err(|e| EvalError::stage("standardize", e)))
        .collect()
}

fn matrix_of(ids: &[String], names: &[&str], rows: Vec<Vec<f64>>) -> Result<FeatureMatrix, EvalError> {
    FeatureMatrix::from_rows(ids.to_vec(), names.iter().map(|s| s.to_string()).collect(), rows)
        .map_err(|e| EvalError::stage("market features", e))
}

fn train_svr(x: &[Vec<f64>], y: &[f64], params: &SvrParams) -> Result<SvrModel, EvalError> {
    SvrModel::train(x, y, Kernel::rbf_scaled(x), params).map_err(|e| EvalError::stage("svr", e))
}

fn run_fold(inp: &FoldInputs<'_>, fold_index: usize, fold: &Fold) -> Result<Vec<HorizonOutput>, EvalError> {
    let spec = inp.spec;
    let data = inp.data;
    let doc_index: HashMap<&str, &TokenizedDoc> = data.docs.iter().map(|d| (d.doc_id.as_str(), d)).collect();
    let needs_market = spec.fusion.uses_market();
    let has_inputs = |id: &str| !needs_market || data.market(id).is_some();

    let train_docs: Vec<TokenizedDoc> = fold
        .train
        .iter()
        .filter(|id| has_inputs(id))
        .map(|id| doc_index[id.as_str()].clone())
        .collect();
    let test_docs: Vec<TokenizedDoc> = fold
        .test
        .iter()
        .filter(|id| has_inputs(id))
        .map(|id| doc_index[id.as_str()].clone())
        .collect();
    if train_docs.is_empty() || test_docs.is_empty() {
        return Err(EvalError::EmptySide(format!("fold {fold_index} has no usable reports")));
    }

    // text features: corpus statistics and PCA use training reports only
    let (text_train, text_test) = if spec.fusion.uses_text() {
        let stats = CorpusStats::build(&train_docs).map_err(|e| EvalError::stage("corpus stats", e))?;
        let train_m = build_with_cache(&train_docs, inp.lexicon, &spec.weighting, &stats, inp.cache)
            .map_err(|e| EvalError::stage("features", e))?;
        let test_m = build_with_cache(&test_docs, inp.lexicon, &spec.weighting, &stats, inp.cache)
            .map_err(|e| EvalError::stage("features", e))?;
        let dims = spec.pca_dims.min(train_m.rows()).min(train_m.cols());
        if dims < spec.pca_dims {
            log::info!("fold {fold_index}: PCA reduced to {dims} components");
        }
        let pca = PcaModel::fit(&train_m, dims).map_err(|e| EvalError::stage("pca", e))?;
        (
            Some(pca.transform(&train_m).map_err(|e| EvalError::stage("pca", e))?),
            Some(pca.transform(&test_m).map_err(|e| EvalError::stage("pca", e))?),
        )
    } else {
        (None, None)
    };
    let market_rows = |docs: &[TokenizedDoc]| -> Vec<Vec<f64>> {
        docs.iter()
            .map(|d| data.market(&d.doc_id).map(|m| m.to_vec()).unwrap_or_default())
            .collect()
    };
    let (market_train, market_test) = (market_rows(&train_docs), market_rows(&test_docs));

    spec.horizons
        .par_iter()
        .map(|&h| {
            let allowed = &inp.allowed[&h];
            let mut train_rows: Vec<usize> = (0..train_docs.len())
                .filter(|&i| allowed.contains(&train_docs[i].doc_id))
                .collect();
            let test_rows: Vec<usize> = (0..test_docs.len())
                .filter(|&i| match spec.outlier_scope {
                    OutlierScope::Global => allowed.contains(&test_docs[i].doc_id),
                    OutlierScope::TrainFold => data.label(&test_docs[i].doc_id, h).is_some(),
                })
                .collect();
            if spec.outlier_scope == OutlierScope::TrainFold && train_rows.len() >= 2 {
                let y: Vec<f64> = train_rows
                    .iter()
                    .map(|&i| data.label(&train_docs[i].doc_id, h).expect("allowed rows have labels"))
                    .collect();
                let kept = filter_outliers(&y).map_err(|e| EvalError::stage("outliers", e))?;
                train_rows = kept.into_iter().map(|k| train_rows[k]).collect();
            }
            if train_rows.len() < 2 || test_rows.is_empty() {
                return Err(EvalError::EmptySide(format!(
                    "fold {fold_index}, horizon {h}: {} training and {} test reports",
                    train_rows.len(),
                    test_rows.len()
                )));
            }
            let y_train: Vec<f64> = train_rows
                .iter()
                .map(|&i| data.label(&train_docs[i].doc_id, h).expect("allowed rows have labels"))
                .collect();
            let pick = |rows: &[usize], m: &FeatureMatrix| -> Vec<Vec<f64>> { rows.iter().map(|&i| m.row(i).to_vec()).collect() };
            let pick_vec = |rows: &[usize], m: &[Vec<f64>]| -> Vec<Vec<f64>> { rows.iter().map(|&i| m[i].clone()).collect() };

            let predictions: Vec<f64> = match spec.fusion {
                FusionMode::GarchOnly => test_rows
                    .iter()
                    .map(|&i| data.market(&test_docs[i].doc_id).expect("market inputs present").garch_forecast)
                    .collect(),
                FusionMode::TextOnly => {
                    let (tr, te) = (text_train.as_ref().unwrap(), text_test.as_ref().unwrap());
                    let model = train_svr(&pick(&train_rows, tr), &y_train, &spec.svr)?;
                    model.predict_rows(&pick(&test_rows, te)).map_err(|e| EvalError::stage("svr", e))?
                }
                FusionMode::MarketOnly => {
                    let raw = pick_vec(&train_rows, &market_train);
                    let scaler = Standardizer::fit(&raw);
                    let model = train_svr(&standardized(&scaler, &raw)?, &y_train, &spec.svr)?;
                    let xt = standardized(&scaler, &pick_vec(&test_rows, &market_test))?;
                    model.predict_rows(&xt).map_err(|e| EvalError::stage("svr", e))?
                }
                FusionMode::Early | FusionMode::Mkl => {
                    let (tr, te) = (text_train.as_ref().unwrap(), text_test.as_ref().unwrap());
                    let raw = pick_vec(&train_rows, &market_train);
                    let scaler = Standardizer::fit(&raw);
                    let ids_tr: Vec<String> = train_rows.iter().map(|&i| train_docs[i].doc_id.clone()).collect();
                    let ids_te: Vec<String> = test_rows.iter().map(|&i| test_docs[i].doc_id.clone()).collect();
                    let t_tr = tr.select_rows(&train_rows);
                    let t_te = te.select_rows(&test_rows);
                    let m_tr = matrix_of(&ids_tr, &MarketFeatures::NAMES, standardized(&scaler, &raw)?)?;
                    let m_te = matrix_of(
                        &ids_te,
                        &MarketFeatures::NAMES,
                        standardized(&scaler, &pick_vec(&test_rows, &market_test))?,
                    )?;
                    let x_tr = early_fusion(&t_tr, &m_tr).map_err(|e| EvalError::stage("fusion", e))?.row_vecs();
                    let x_te = early_fusion(&t_te, &m_te).map_err(|e| EvalError::stage("fusion", e))?.row_vecs();
                    if spec.fusion == FusionMode::Early {
                        let model = train_svr(&x_tr, &y_train, &spec.svr)?;
                        model.predict_rows(&x_te).map_err(|e| EvalError::stage("svr", e))?
                    } else {
                        let p = t_tr.cols();
                        let text_rows: Vec<Vec<f64>> = t_tr.row_vecs();
                        let market_std: Vec<Vec<f64>> = m_tr.row_vecs();
                        let blocks = vec![
                            (Kernel::rbf_scaled(&text_rows), 0..p),
                            (Kernel::rbf_scaled(&market_std), p..p + MarketFeatures::NAMES.len()),
                        ];
                        let model = mkl_train(&x_tr, &blocks, &y_train, &spec.svr).map_err(|e| EvalError::stage("mkl", e))?;
                        x_te.iter()
                            .map(|r| model.predict(r).map_err(|e| EvalError::stage("mkl", e)))
                            .collect::<Result<_, _>>()?
                    }
                }
                FusionMode::Stacking => {
                    let (tr, te) = (text_train.as_ref().unwrap(), text_test.as_ref().unwrap());
                    let ids_tr: Vec<String> = train_rows.iter().map(|&i| train_docs[i].doc_id.clone()).collect();
                    let m_tr = matrix_of(&ids_tr, &MarketFeatures::NAMES, pick_vec(&train_rows, &market_train))?;
                    let model = stacking_train(&tr.select_rows(&train_rows), &m_tr, &y_train, spec.stacking_seed, &spec.svr)
                        .map_err(|e| EvalError::stage("stacking", e))?;
                    test_rows
                        .iter()
                        .map(|&i| model.predict(te.row(i), &market_test[i]).map_err(|e| EvalError::stage("stacking", e)))
                        .collect::<Result<_, _>>()?
                }
            };
            let records = test_rows
                .iter()
                .zip(predictions)
                .map(|(&i, prediction)| PredictionRecord {
                    doc_id: test_docs[i].doc_id.clone(),
                    sector: test_docs[i].sector,
                    horizon: h,
                    fold: fold_index,
                    prediction,
                    label: data.label(&test_docs[i].doc_id, h).expect("scored rows have labels"),
                })
                .collect();
            Ok(HorizonOutput { records })
        })
        .collect()
}

fn horizon_metrics(h: usize, records: &[&PredictionRecord], folds: usize) -> Result<HorizonMetrics, EvalError> {
    let pred: Vec<f64> = records.iter().map(|r| r.prediction).collect();
    let labels: Vec<f64> = records.iter().map(|r| r.label).collect();
    let pooled = r_squared(&pred, &labels)?;
    let pooled_mse = mse(&pred, &labels)?;
    let mut fold_r2 = Vec::new();
    let mut fold_mse = Vec::new();
    let mut degenerate_folds = 0;
    for f in 0..folds {
        let (p, l): (Vec<f64>, Vec<f64>) = records.iter().filter(|r| r.fold == f).map(|r| (r.prediction, r.label)).unzip();
        if p.len() < 2 {
            continue;
        }
        let r2 = r_squared(&p, &l)?;
        degenerate_folds += usize::from(r2.degenerate);
        fold_r2.push(r2.value);
        fold_mse.push(mse(&p, &l)?);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (r2, mse_value) = if fold_r2.is_empty() {
        (pooled.value, pooled_mse)
    } else {
        (mean(&fold_r2), mean(&fold_mse))
    };
    Ok(HorizonMetrics {
        horizon: h,
        n: records.len(),
        r2,
        mse: mse_value,
        degenerate_folds,
        pooled_r2: pooled.value,
        pooled_mse,
        fold_r2,
        fold_mse,
    })
}

pub fn run_experiment(spec: &ExperimentSpec, data: &ExperimentData) -> Result<EvalReport, EvalError> {
    spec.validate()?;
    let lexicon = match spec.lexicon_mode {
        LexiconMode::Lex => data.lexicon.clone(),
        LexiconMode::LexExt => data.lexicon.expand(&data.embeddings, spec.expansion),
    };
    let cache = if spec.weighting.extended && spec.fusion.uses_text() {
        NeighborCache::build(&lexicon, &data.embeddings, spec.weighting.similarity_threshold)
    } else {
        NeighborCache::default()
    };

    let needs_market = spec.fusion.uses_market();
    let mut allowed = BTreeMap::new();
    for &h in &spec.horizons {
        let usable: Vec<&str> = data
            .docs
            .iter()
            .map(|d| d.doc_id.as_str())
            .filter(|id| data.label(id, h).is_some() && (!needs_market || data.market(id).is_some()))
            .collect();
        let set: BTreeSet<String> = match spec.outlier_scope {
            OutlierScope::Global if usable.len() >= 2 => {
                let y: Vec<f64> = usable.iter().map(|id| data.label(id, h).unwrap()).collect();
                let kept = filter_outliers(&y).map_err(|e| EvalError::stage("outliers", e))?;
                kept.into_iter().map(|i| usable[i].to_string()).collect()
            }
            _ => usable.iter().map(|s| s.to_string()).collect(),
        };
        allowed.insert(h, set);
    }

    let folds = folds_for(spec, &data.docs)?;
    let inputs = FoldInputs {
        spec,
        data,
        lexicon: &lexicon,
        cache: &cache,
        allowed: &allowed,
    };
    let mut records = Vec::new();
    for (f, fold) in folds.iter().enumerate() {
        for out in run_fold(&inputs, f, fold)? {
            records.extend(out.records);
        }
    }
    records.sort_by(|a, b| a.horizon.cmp(&b.horizon).then_with(|| a.doc_id.cmp(&b.doc_id)));

    let mut horizons = Vec::new();
    for &h in &spec.horizons {
        let rs: Vec<&PredictionRecord> = records.iter().filter(|r| r.horizon == h).collect();
        horizons.push(horizon_metrics(h, &rs, folds.len())?);
    }
    let mut per_sector = Vec::new();
    if spec.per_sector {
        let sectors: BTreeSet<Sector> = records.iter().map(|r| r.sector).collect();
        for s in sectors {
            let mut hs = Vec::new();
            for &h in &spec.horizons {
                let rs: Vec<&PredictionRecord> = records.iter().filter(|r| r.horizon == h && r.sector == s).collect();
                if !rs.is_empty() {
                    hs.push(horizon_metrics(h, &rs, folds.len())?);
                }
            }
            per_sector.push(SectorMetrics::new(s, hs));
        }
    }
    Ok(EvalReport::new(spec.name(), spec.clone(), horizons, per_sector, records))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::features::Scheme;
    use crate::lexicon::Category;
    use chrono::NaiveDate;
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, Normal};

    pub(crate) const DRIVERS: [&str; 5] = ["loss", "debt", "risk", "gain", "fraud"];

    /// Reports whose labels are linear in the counts of five driver terms.
    pub(crate) fn planted(n: usize, seed: u64) -> ExperimentData {
        planted_scaled(n, seed, 1.0)
    }

    pub(crate) fn planted_scaled(n: usize, seed: u64, scale: f64) -> ExperimentData {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let weights = [0.3, -0.2, 0.25, -0.15, 0.1];
        let mut docs = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let mut tokens = vec!["filler".to_string(); rng.random_range(50..80)];
            let mut signal = -4.0;
            for (t, w) in DRIVERS.iter().zip(weights) {
                let c = rng.random_range(0..8usize);
                signal += scale * w * c as f64;
                tokens.extend(std::iter::repeat_n(t.to_string(), c));
            }
            let id = format!("doc{i:04}");
            let sector = Sector::ALL[i % 3];
            let y = std::array::from_fn(|_| Some(signal + noise.sample(&mut rng)));
            labels.push(LabelRecord {
                doc_id: id.clone(),
                sector,
                y,
                current_volatility: Some(signal + noise.sample(&mut rng)),
                garch: Some(-4.0 + noise.sample(&mut rng)),
            });
            docs.push(TokenizedDoc {
                doc_id: id,
                company_id: format!("c{i}"),
                issue_date: NaiveDate::from_ymd_opt(2012 + (i % 4) as i32, 3, 1).unwrap(),
                sector,
                tokens,
            });
        }
        let lexicon = Lexicon::from_pairs(&DRIVERS.map(|t| (t, Category::Negative))).unwrap();
        ExperimentData::new(docs, labels, lexicon, EmbeddingTable::default())
    }

    pub(crate) fn spec(fusion: FusionMode, split: Split) -> ExperimentSpec {
        ExperimentSpec {
            weighting: WeightingSpec::new(Scheme::Tc, false),
            lexicon_mode: LexiconMode::Lex,
            expansion: DEFAULT_EXPANSION,
            pca_dims: 50,
            fusion,
            horizons: vec![1, 2],
            split,
            outlier_scope: OutlierScope::Global,
            svr: SvrParams::default(),
            stacking_seed: 3,
            per_sector: false,
        }
    }

    #[test]
    fn every_report_tested_once() {
        let data = planted(60, 1);
        let report = run_experiment(&spec(FusionMode::TextOnly, Split::KFold { k: 5, seed: 2 }), &data).unwrap();
        for h in [1, 2] {
            let ids: Vec<&str> = report.predictions.iter().filter(|r| r.horizon == h).map(|r| r.doc_id.as_str()).collect();
            let unique: BTreeSet<&str> = ids.iter().copied().collect();
            assert_eq!(ids.len(), unique.len());
            assert_eq!(unique.len(), report.horizons[h - 1].n);
        }
        assert!(report.horizons[0].r2 > 0.5, "{:?}", report.horizons[0]);
    }

    #[test]
    fn garch_only_uses_the_forecast() {
        let data = planted(40, 2);
        let report = run_experiment(&spec(FusionMode::GarchOnly, Split::KFold { k: 4, seed: 1 }), &data).unwrap();
        for r in &report.predictions {
            assert_eq!(r.prediction, data.labels[&r.doc_id].garch.unwrap());
        }
    }

    #[test]
    fn all_fusion_modes_run_deterministically() {
        let data = planted(50, 3);
        for mode in FusionMode::ALL {
            let s = spec(mode, Split::KFold { k: 3, seed: 5 });
            let a = run_experiment(&s, &data).unwrap();
            let b = run_experiment(&s, &data).unwrap();
            assert_eq!(a.to_json(), b.to_json(), "{mode}");
        }
    }

    #[test]
    fn temporal_and_sector_splits() {
        let data = planted(80, 4);
        let r = run_experiment(&spec(FusionMode::TextOnly, Split::Temporal { test_year: 2014 }), &data).unwrap();
        assert!(r
            .predictions
            .iter()
            .all(|p| data.docs.iter().find(|d| d.doc_id == p.doc_id).unwrap().issue_date.format("%Y").to_string() == "2014"));
        let sector = Sector::ALL[0];
        let specific = run_experiment(&spec(FusionMode::TextOnly, Split::SectorSpecific { sector, k: 3, seed: 1 }), &data).unwrap();
        let agnostic = run_experiment(
            &spec(FusionMode::TextOnly, Split::SectorAgnostic { sector, k: 3, seed: 1, sample_seed: 9 }),
            &data,
        )
        .unwrap();
        let tested = |r: &EvalReport| -> BTreeSet<String> { r.predictions.iter().map(|p| p.doc_id.clone()).collect() };
        assert_eq!(tested(&specific), tested(&agnostic));
        assert!(specific.predictions.iter().all(|p| p.sector == sector));
    }

    #[test]
    fn test_fold_does_not_leak() {
        // changing a test report's tokens must not change predictions for the others
        let data = planted(40, 5);
        let s = spec(FusionMode::TextOnly, Split::KFold { k: 4, seed: 3 });
        let base = run_experiment(&s, &data).unwrap();
        let victim = base.predictions[0].clone();
        let mut altered = data.clone();
        let d = altered.docs.iter_mut().find(|d| d.doc_id == victim.doc_id).unwrap();
        d.tokens.extend(std::iter::repeat_n("loss".to_string(), 50));
        let after = run_experiment(&s, &altered).unwrap();
        for (a, b) in base.predictions.iter().zip(&after.predictions) {
            if a.fold == victim.fold && a.doc_id != victim.doc_id {
                assert_eq!(a.prediction.to_bits(), b.prediction.to_bits());
            }
        }
    }

    #[test]
    fn first_year_is_mean_of_quarters() {
        let data = planted(40, 6);
        let mut s = spec(FusionMode::TextOnly, Split::KFold { k: 4, seed: 3 });
        s.horizons = vec![1, 2, 3, 4];
        let r = run_experiment(&s, &data).unwrap();
        let fy = r.first_year.unwrap();
        let mean_r2 = r.horizons.iter().map(|h| h.r2).sum::<f64>() / 4.0;
        assert_eq!(fy.r2, mean_r2);
        assert!(fy.mse >= 0.0);
    }

    #[test]
    fn invalid_specs() {
        let data = planted(20, 7);
        let mut s = spec(FusionMode::TextOnly, Split::KFold { k: 4, seed: 3 });
        s.horizons = vec![9];
        assert!(matches!(run_experiment(&s, &data), Err(EvalError::InvalidSpec(_))));
        s.horizons.clear();
        assert!(run_experiment(&s, &data).is_err());
        assert_eq!("mkl".parse::<FusionMode>().unwrap(), FusionMode::Mkl);
    }
}
