//! Fold assignment, temporal splits and sector-agnostic sampling.

use std::collections::BTreeSet;

use chrono::Datelike;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::EvalError;
use crate::filings::{Sector, TokenizedDoc};

/// Partition ids into `k` folds: sort, seeded shuffle, deal round-robin.
/// Each fold is returned sorted.
pub fn kfold_assignment(doc_ids: &[String], k: usize, seed: u64) -> Result<Vec<Vec<String>>, EvalError> {
    let mut ids = doc_ids.to_vec();
    ids.sort();
    ids.dedup();
    if k < 2 || k > ids.len() {
        return Err(EvalError::InvalidSpec(format!(
            "cannot split {} documents into {k} folds",
            ids.len()
        )));
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::new(); k];
    for (i, id) in ids.into_iter().enumerate() {
        folds[i % k].push(id);
    }
    folds.iter_mut().for_each(|f| f.sort());
    Ok(folds)
}

/// Train on reports issued before `test_year`, test on that year.
pub fn temporal_split(docs: &[TokenizedDoc], test_year: i32) -> Result<(Vec<String>, Vec<String>), EvalError> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for d in docs {
        let year = d.issue_date.year();
        if year < test_year {
            train.push(d.doc_id.clone());
        } else if year == test_year {
            test.push(d.doc_id.clone());
        }
    }
    if train.is_empty() {
        return Err(EvalError::EmptySide(format!("no reports before {test_year}")));
    }
    if test.is_empty() {
        return Err(EvalError::EmptySide(format!("no reports in {test_year}")));
    }
    train.sort();
    test.sort();
    Ok((train, test))
}

/// Seeded sample, from all reports outside `test_ids`, of the same size as
/// the sector's training set (the sector's reports outside `test_ids`).
pub fn sector_agnostic_split(
    docs: &[TokenizedDoc],
    sector: Sector,
    test_ids: &BTreeSet<String>,
    seed: u64,
) -> Result<Vec<String>, EvalError> {
    if !docs.iter().any(|d| d.sector == sector) {
        return Err(EvalError::UnknownSector(sector.code().to_string()));
    }
    let size = docs
        .iter()
        .filter(|d| d.sector == sector && !test_ids.contains(&d.doc_id))
        .count();
    let mut pool: Vec<String> = docs
        .iter()
        .filter(|d| !test_ids.contains(&d.doc_id))
        .map(|d| d.doc_id.clone())
        .collect();
    pool.sort();
    pool.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    pool.truncate(size);
    pool.sort();
    Ok(pool)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    pub(crate) fn doc(id: &str, year: i32, sector: Sector) -> TokenizedDoc {
        TokenizedDoc {
            doc_id: id.into(),
            company_id: id.into(),
            issue_date: NaiveDate::from_ymd_opt(year, 3, 1).unwrap(),
            sector,
            tokens: vec!["risk".into()],
        }
    }

    #[test]
    fn folds_partition_and_ignore_order() {
        let ids: Vec<String> = (0..23).map(|i| format!("d{i}")).collect();
        let folds = kfold_assignment(&ids, 5, 7).unwrap();
        let all: BTreeSet<&String> = folds.iter().flatten().collect();
        assert_eq!(all.len(), 23);
        assert_eq!(folds.iter().map(Vec::len).sum::<usize>(), 23);
        assert!(folds.iter().all(|f| f.len() == 4 || f.len() == 5));
        let mut rev = ids.clone();
        rev.reverse();
        assert_eq!(kfold_assignment(&rev, 5, 7).unwrap(), folds);
        assert_ne!(kfold_assignment(&ids, 5, 8).unwrap(), folds);
        assert!(kfold_assignment(&ids[..3], 5, 7).is_err());
    }

    #[test]
    fn temporal_examples() {
        let docs: Vec<TokenizedDoc> = (2012..=2015)
            .flat_map(|y| (0..3).map(move |i| doc(&format!("{y}-{i}"), y, Sector::Energy)))
            .collect();
        let (train, test) = temporal_split(&docs, 2013).unwrap();
        assert!(train.iter().all(|id| id.starts_with("2012")));
        assert_eq!(train.len(), 3);
        assert!(test.iter().all(|id| id.starts_with("2013")));
        let (train, test) = temporal_split(&docs, 2015).unwrap();
        assert_eq!(train.len() + test.len(), 12);
        assert!(matches!(temporal_split(&docs, 2016), Err(EvalError::EmptySide(_))));
        assert!(matches!(temporal_split(&docs, 2012), Err(EvalError::EmptySide(_))));
    }

    #[test]
    fn agnostic_sample_size_and_prevalence() {
        let docs: Vec<TokenizedDoc> = (0..200)
            .map(|i| doc(&format!("d{i:03}"), 2013, if i % 4 == 0 { Sector::Finance } else { Sector::Technology }))
            .collect();
        let test: BTreeSet<String> = docs
            .iter()
            .filter(|d| d.sector == Sector::Finance)
            .take(10)
            .map(|d| d.doc_id.clone())
            .collect();
        let a = sector_agnostic_split(&docs, Sector::Finance, &test, 3).unwrap();
        assert_eq!(a.len(), 40);
        assert_eq!(a, sector_agnostic_split(&docs, Sector::Finance, &test, 3).unwrap());
        assert!(a.iter().all(|id| !test.contains(id)));

        // in-sector share of the candidate pool is 40/190
        let mut hits = 0usize;
        for seed in 0..100 {
            let s = sector_agnostic_split(&docs, Sector::Finance, &test, seed).unwrap();
            hits += s.iter().filter(|id| id[1..].parse::<usize>().unwrap() % 4 == 0).count();
        }
        let p = 40.0 / 190.0;
        let trials = 100.0 * 40.0;
        let freq = hits as f64 / trials;
        assert!((freq - p).abs() < 4.0 * (p * (1.0 - p) / trials).sqrt(), "{freq} vs {p}");
        assert!(matches!(
            sector_agnostic_split(&docs, Sector::Energy, &test, 1),
            Err(EvalError::UnknownSector(_))
        ));
    }
}
