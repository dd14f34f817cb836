//! Synthetic on-disk inputs for driving the binary.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chrono::{Datelike, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

pub const FILLER: [&str; 8] = ["company", "market", "product", "customer", "operation", "service", "report", "year"];

pub struct Fixture {
    pub root: PathBuf,
    pub config: PathBuf,
    pub docs: usize,
}

fn business_days(from: NaiveDate, to: NaiveDate) -> Vec<NaiveDate> {
    from.iter_days()
        .take_while(|d| *d <= to)
        .filter(|d| d.weekday().num_days_from_monday() < 5)
        .collect()
}

fn risk_text(rng: &mut ChaCha8Rng, drivers: &[(&str, usize)]) -> String {
    let mut words: Vec<&str> = Vec::new();
    for &(w, n) in drivers {
        words.extend(std::iter::repeat_n(w, n));
    }
    for _ in 0..120 {
        words.push(FILLER[rng.random_range(0..FILLER.len())]);
    }
    for i in (1..words.len()).rev() {
        let j = rng.random_range(0..=i);
        words.swap(i, j);
    }
    let mut text = String::new();
    for chunk in words.chunks(12) {
        let _ = writeln!(text, "<p>{}.</p>", chunk.join(" "));
    }
    text
}

fn filing_html(risk: &str, with_section: bool) -> String {
    let mut html = String::from("<html><body>\n<p>Table of Contents</p>\n<p>Item 1. Business 3</p>\n");
    if with_section {
        html.push_str("<p>Item 1A. Risk Factors 9</p>\n");
    }
    html.push_str("<p>Item 1B. Unresolved Staff Comments 20</p>\n<p>Item 2. Properties 21</p>\n");
    html.push_str("<p>Item 1. Business</p>\n");
    for _ in 0..80 {
        html.push_str("<p>We design and sell products to customers across many markets every year.</p>\n");
    }
    if with_section {
        html.push_str("<p>Item 1A. Risk Factors</p>\n");
        html.push_str(risk);
    }
    html.push_str("<p>Item 1B. Unresolved Staff Comments</p>\n<p>None.</p>\n<p>Item 2. Properties</p>\n<p>Offices.</p>\n</body></html>\n");
    html
}

impl Fixture {
    /// `companies` companies alternating between finance and technology,
    /// each filing in 2012, 2013 and 2014. The first company's 2013 filing
    /// lacks a Risk Factors section. Finance volatility is driven by "loss",
    /// technology volatility by "gain".
    pub fn write(root: &Path, companies: usize, seed: u64) -> Fixture {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let filings = root.join("filings");
        let prices = root.join("prices");
        fs::create_dir_all(&filings).unwrap();
        fs::create_dir_all(&prices).unwrap();
        let days = business_days(NaiveDate::from_ymd_opt(2010, 1, 1).unwrap(), NaiveDate::from_ymd_opt(2017, 6, 30).unwrap());
        let mut manifest = String::from("doc_id,company_id,issue_date,sector,path\n");
        let mut docs = 0;
        for c in 0..companies {
            let company = format!("c{c:02}");
            let (sector, driver) = if c % 2 == 0 { ("fin", "loss") } else { ("tech", "gain") };
            // one volatility level per company and year
            let mut levels: BTreeMap<i32, f64> = BTreeMap::new();
            for year in 2010..=2017 {
                levels.insert(year, rng.random_range(0.008..0.03));
            }
            let mut price = 50.0f64;
            let mut series = String::from("date,adjusted_close\n");
            for d in &days {
                let z: f64 = Normal::new(0.0, levels[&d.year()]).unwrap().sample(&mut rng);
                price *= z.exp();
                let _ = writeln!(series, "{d},{price:.6}");
            }
            fs::write(prices.join(format!("{company}.csv")), series).unwrap();
            for year in 2012..=2014 {
                let doc_id = format!("{company}-{year}");
                let level = levels[&(year + 1)];
                let count = (1.0 + (level - 0.008) / 0.022 * 12.0).round() as usize;
                let other = if driver == "loss" { "gain" } else { "loss" };
                let drivers = [(driver, count), (other, rng.random_range(1..4)), ("risk", rng.random_range(1..6))];
                let text = risk_text(&mut rng, &drivers);
                let with_section = !(c == 0 && year == 2013);
                let path = format!("filings/{doc_id}.html");
                fs::write(root.join(&path), filing_html(&text, with_section)).unwrap();
                let _ = writeln!(manifest, "{doc_id},{company},{year}-03-01,{sector},{path}");
                if with_section {
                    docs += 1;
                }
            }
        }
        fs::write(root.join("manifest.csv"), manifest).unwrap();
        fs::write(
            root.join("lexicon.csv"),
            "word,category\nloss,negative\ngain,positive\nrisk,uncertainty\nfraud,negative\nvolatile,uncertainty\n",
        )
        .unwrap();
        fs::write(
            root.join("embeddings.txt"),
            "7 3\nloss 1 0 0\ndeficit 0.95 0.05 0\ngain 0 1 0\nprofit 0.1 0.9 0\nrisk 0 0.1 1\nhazard 0 0.2 0.9\ncompani 0.3 0.3 0.3\n",
        )
        .unwrap();
        let config = root.join("riskvol.toml");
        fs::write(
            &config,
            r#"[paths]
manifest = "manifest.csv"
prices_dir = "prices"
lexicon = "lexicon.csv"
embeddings = "embeddings.txt"
output_dir = "out"

[experiment]
scheme = "tc"
extended = false
lexicon_mode = "lex"
pca_dims = 10
fusion = "stacking"
horizons = [1, 2, 3, 4]
folds = 3

[seeds]
cv = 7
stacking = 11
sampling = 13

[sectors]
min_docs = 6
top_terms = 3
"#,
        )
        .unwrap();
        Fixture {
            root: root.to_path_buf(),
            config,
            docs,
        }
    }

    pub fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_riskvol"))
            .args(args)
            .arg("--config")
            .arg(&self.config)
            .env("RUST_LOG", "warn")
            .output()
            .expect("binary runs")
    }

    pub fn run_ok(&self, args: &[&str]) {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

/// SHA-256 of every file under `dir`, keyed by relative path.
pub fn hash_tree(dir: &Path) -> BTreeMap<String, String> {
    fn walk(base: &Path, dir: &Path, out: &mut BTreeMap<String, String>) {
        let mut entries: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                let digest = Sha256::digest(fs::read(&p).unwrap());
                let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
                out.insert(p.strip_prefix(base).unwrap().display().to_string(), hex);
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}
