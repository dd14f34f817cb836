//! TOML configuration with dotted-key overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use riskvol::evaluation::{ExperimentSpec, FusionMode, LexiconMode, OutlierScope, Split, DEFAULT_EXPANSION};
use riskvol::features::{Scheme, WeightingSpec, DEFAULT_BM25_B, DEFAULT_BM25_K, DEFAULT_SIMILARITY_THRESHOLD};
use riskvol::filings::{Sector, DEFAULT_MIN_SECTION_TOKENS};
use riskvol::learning::SvrParams;
use riskvol::lexicon::Category;
use riskvol::market::garch::DEFAULT_MIN_OBSERVATIONS;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub paths: Paths,
    #[serde(default)]
    pub experiment: Experiment,
    pub seeds: Seeds,
    #[serde(default)]
    pub engine: Engine,
    #[serde(default)]
    pub model: Model,
    #[serde(default)]
    pub sectors: Sectors,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub manifest: Option<PathBuf>,
    pub prices_dir: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Single,
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    Kfold,
    Temporal,
    SectorSpecific,
    SectorAgnostic,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Experiment {
    pub preset: Preset,
    pub scheme: String,
    pub extended: bool,
    pub lexicon_mode: LexiconMode,
    pub expansion: usize,
    pub categories: Vec<String>,
    pub pca_dims: usize,
    pub fusion: String,
    pub horizons: Vec<usize>,
    pub split: SplitKind,
    pub folds: usize,
    pub test_year: Option<i32>,
    pub sector: Option<String>,
    pub per_sector: bool,
    pub bm25_k: f64,
    pub bm25_b: f64,
    pub similarity_threshold: f64,
}

impl Default for Experiment {
    fn default() -> Self {
        Experiment {
            preset: Preset::Single,
            scheme: "bm25".into(),
            extended: true,
            lexicon_mode: LexiconMode::LexExt,
            expansion: DEFAULT_EXPANSION,
            categories: vec!["positive".into(), "negative".into(), "uncertainty".into()],
            pca_dims: riskvol::features::DEFAULT_COMPONENTS,
            fusion: "stacking".into(),
            horizons: (1..=8).collect(),
            split: SplitKind::Kfold,
            folds: 5,
            test_year: None,
            sector: None,
            per_sector: false,
            bm25_k: DEFAULT_BM25_K,
            bm25_b: DEFAULT_BM25_B,
            similarity_threshold: DEFAULT_SIMILARITY_THRESHOLD,
        }
    }
}

/// Every random choice draws from one of these; none has a default.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub cv: u64,
    pub stacking: u64,
    pub sampling: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Engine {
    pub idf_literal: bool,
    pub unaveraged_loss: bool,
    pub outlier_scope: OutlierScope,
    pub min_section_tokens: usize,
    pub garch_min_observations: usize,
}

impl Default for Engine {
    fn default() -> Self {
        Engine {
            idf_literal: false,
            unaveraged_loss: false,
            outlier_scope: OutlierScope::Global,
            min_section_tokens: DEFAULT_MIN_SECTION_TOKENS,
            garch_min_observations: DEFAULT_MIN_OBSERVATIONS,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Model {
    pub c: f64,
    pub epsilon: f64,
}

impl Default for Model {
    fn default() -> Self {
        let p = SvrParams::default();
        Model {
            c: p.c,
            epsilon: p.epsilon,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Sectors {
    /// Sectors with fewer reports are skipped.
    pub min_docs: usize,
    pub top_terms: usize,
}

impl Default for Sectors {
    fn default() -> Self {
        Sectors {
            min_docs: 20,
            top_terms: 10,
        }
    }
}

/// Parse an override value as TOML, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn apply_override(root: &mut toml::Table, assignment: &str) -> Result<()> {
    let Some((key, value)) = assignment.split_once('=') else {
        bail!("override {assignment:?} is not KEY=VALUE");
    };
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!("override key {key:?} is malformed");
    }
    let mut table = root;
    for part in &parts[..parts.len() - 1] {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = match entry {
            toml::Value::Table(t) => t,
            _ => bail!("override key {key:?}: {part} is not a table"),
        };
    }
    table.insert(parts[parts.len() - 1].to_string(), parse_value(value.trim()));
    Ok(())
}

impl Config {
    /// Load `path`, apply overrides, and resolve relative paths against the
    /// config file's directory.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text, overrides, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn parse(text: &str, overrides: &[String], base: &Path) -> Result<Self> {
        let mut root: toml::Table = text.parse().context("parsing config")?;
        for o in overrides {
            apply_override(&mut root, o)?;
        }
        let mut cfg: Config = toml::Value::Table(root).try_into().context("validating config")?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut cfg.paths.manifest,
            &mut cfg.paths.prices_dir,
            &mut cfg.paths.lexicon,
            &mut cfg.paths.embeddings,
        ]
        .into_iter()
        .flatten()
        {
            resolve(p);
        }
        resolve(&mut cfg.paths.output_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("manifest", &self.paths.manifest),
            ("prices_dir", &self.paths.prices_dir),
            ("lexicon", &self.paths.lexicon),
            ("embeddings", &self.paths.embeddings),
        ] {
            if let Some(p) = p {
                if !p.exists() {
                    bail!("paths.{name} = {} does not exist", p.display());
                }
            }
        }
        self.scheme()?;
        self.fusion()?;
        self.split()?;
        self.categories()?;
        Ok(())
    }

    pub fn require<'a>(&self, name: &str, p: &'a Option<PathBuf>) -> Result<&'a Path> {
        p.as_deref().with_context(|| format!("paths.{name} is required for this command"))
    }

    fn scheme(&self) -> Result<Scheme> {
        self.experiment
            .scheme
            .parse()
            .map_err(|e| anyhow::anyhow!("experiment.scheme: {e}"))
    }

    fn fusion(&self) -> Result<FusionMode> {
        Ok(self.experiment.fusion.parse()?)
    }

    pub fn categories(&self) -> Result<Vec<Category>> {
        self.experiment
            .categories
            .iter()
            .map(|c| c.parse().map_err(|e| anyhow::anyhow!("experiment.categories: {e}")))
            .collect()
    }

    fn sector(&self) -> Result<Sector> {
        let code = self
            .experiment
            .sector
            .as_deref()
            .context("experiment.sector is required for sector splits")?;
        Ok(code.parse()?)
    }

    pub fn split(&self) -> Result<Split> {
        let e = &self.experiment;
        Ok(match e.split {
            SplitKind::Kfold => Split::KFold {
                k: e.folds,
                seed: self.seeds.cv,
            },
            SplitKind::Temporal => Split::Temporal {
                test_year: e.test_year.context("experiment.test_year is required for temporal splits")?,
            },
            SplitKind::SectorSpecific => Split::SectorSpecific {
                sector: self.sector()?,
                k: e.folds,
                seed: self.seeds.cv,
            },
            SplitKind::SectorAgnostic => Split::SectorAgnostic {
                sector: self.sector()?,
                k: e.folds,
                seed: self.seeds.cv,
                sample_seed: self.seeds.sampling,
            },
        })
    }

    pub fn weighting(&self, scheme: Scheme, extended: bool) -> WeightingSpec {
        WeightingSpec {
            scheme,
            extended,
            k: self.experiment.bm25_k,
            b: self.experiment.bm25_b,
            similarity_threshold: self.experiment.similarity_threshold,
            idf_literal: self.engine.idf_literal,
        }
    }

    pub fn svr(&self) -> SvrParams {
        SvrParams {
            c: self.model.c,
            epsilon: self.model.epsilon,
            unaveraged_loss: self.engine.unaveraged_loss,
            ..SvrParams::default()
        }
    }

    /// Experiment built from the configured scalar settings.
    pub fn spec(&self) -> Result<ExperimentSpec> {
        Ok(ExperimentSpec {
            weighting: self.weighting(self.scheme()?, self.experiment.extended),
            lexicon_mode: self.experiment.lexicon_mode,
            expansion: self.experiment.expansion,
            pca_dims: self.experiment.pca_dims,
            fusion: self.fusion()?,
            horizons: self.experiment.horizons.clone(),
            split: self.split()?,
            outlier_scope: self.engine.outlier_scope,
            svr: self.svr(),
            stacking_seed: self.seeds.stacking,
            per_sector: self.experiment.per_sector,
        })
    }
}
