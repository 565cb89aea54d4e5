//! Choosing the number of basis functions: k-fold cross-validation and the
//! small-sample corrected AIC.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMethod {
    Cv,
    Caic,
    Fixed,
}

impl fmt::Display for SelectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionMethod::Cv => "cv",
            SelectionMethod::Caic => "caic",
            SelectionMethod::Fixed => "fixed",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub chosen_k: usize,
    /// `(K, score)`; `None` marks an ineligible candidate.
    pub scores: Vec<(usize, Option<f64>)>,
    pub method: SelectionMethod,
}

impl SelectionResult {
    pub fn fixed(k: usize) -> Self {
        SelectionResult {
            chosen_k: k,
            scores: Vec::new(),
            method: SelectionMethod::Fixed,
        }
    }

    /// Picks the smallest finite score; ties go to the smallest K.
    fn argmin(method: SelectionMethod, mut scores: Vec<(usize, Option<f64>)>) -> Result<Self> {
        scores.sort_by_key(|(k, _)| *k);
        let mut best: Option<(usize, f64)> = None;
        for &(k, score) in &scores {
            if let Some(s) = score.filter(|s| s.is_finite()) {
                if best.is_none_or(|(_, b)| s < b) {
                    best = Some((k, s));
                }
            }
        }
        let (chosen_k, _) = best.ok_or(Error::NoViableCandidate)?;
        Ok(SelectionResult {
            chosen_k,
            scores,
            method,
        })
    }
}

/// Seeded shuffle of `0..n` cut into `folds` nearly equal parts; the first
/// `n % folds` folds carry the extra element.
pub fn kfold_split(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::invalid(format!("need at least 2 folds, got {folds}")));
    }
    if n < folds {
        return Err(Error::invalid(format!("{n} samples cannot fill {folds} folds")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let base = n / folds;
    let extra = n % folds;
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        out.push(idx[start..start + len].to_vec());
        start += len;
    }
    Ok(out)
}

/// Mean held-out loss per candidate, minimised over candidates.
///
/// `fit_eval(train, test, k)` returns the test loss of a model with `k` basis
/// functions fitted on `train`. Non-finite losses make the candidate
/// ineligible. Folds are evaluated in parallel but combined by index.
pub fn cv_select<F>(
    candidates: &[usize],
    n: usize,
    folds: usize,
    seed: u64,
    fit_eval: F,
) -> Result<SelectionResult>
where
    F: Fn(&[usize], &[usize], usize) -> Result<f64> + Sync,
{
    if candidates.is_empty() {
        return Err(Error::invalid("no candidates to select from"));
    }
    let split = kfold_split(n, folds, seed)?;
    let pairs: Vec<(Vec<usize>, &[usize])> = split
        .iter()
        .enumerate()
        .map(|(f, test)| {
            let train = split
                .iter()
                .enumerate()
                .filter(|(g, _)| *g != f)
                .flat_map(|(_, fold)| fold.iter().copied())
                .collect();
            (train, test.as_slice())
        })
        .collect();

    let scores = candidates
        .par_iter()
        .map(|&k| {
            let losses = pairs
                .iter()
                .map(|(train, test)| fit_eval(train, test, k))
                .collect::<Result<Vec<f64>>>()?;
            let mean = losses.iter().sum::<f64>() / losses.len() as f64;
            Ok((k, mean.is_finite().then_some(mean)))
        })
        .collect::<Result<Vec<_>>>()?;
    SelectionResult::argmin(SelectionMethod::Cv, scores)
}

/// Corrected AIC for Gaussian errors with additive constants dropped:
/// `n ln(rss/n) + 2k + 2k(k+1)/(n-k-1)`.
///
/// Returns `None` (ineligible) when `n - k - 1 <= 0` or `rss <= 0`.
pub fn caic_score(rss: f64, n: usize, k_params: usize) -> Result<Option<f64>> {
    if rss.is_nan() || rss < 0.0 {
        return Err(Error::invalid(format!("residual sum of squares {rss} is negative")));
    }
    if n == 0 {
        return Err(Error::invalid("cAIC needs n >= 1"));
    }
    if n <= k_params + 1 || rss == 0.0 || !rss.is_finite() {
        return Ok(None);
    }
    let (n, k) = (n as f64, k_params as f64);
    Ok(Some(n * (rss / n).ln() + 2.0 * k + 2.0 * k * (k + 1.0) / (n - k - 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaicCandidate {
    pub k: usize,
    pub rss: f64,
    pub k_params: usize,
    pub n: usize,
}

pub fn caic_select(candidates: &[CaicCandidate]) -> Result<SelectionResult> {
    if candidates.is_empty() {
        return Err(Error::invalid("no candidates to select from"));
    }
    let scores = candidates
        .iter()
        .map(|c| Ok((c.k, caic_score(c.rss, c.n, c.k_params)?)))
        .collect::<Result<Vec<_>>>()?;
    SelectionResult::argmin(SelectionMethod::Caic, scores)
}
