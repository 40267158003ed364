//! Macro-F1 over the two verdict classes and label-balanced sampling.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{EvalError, LabeledClaim};
use crate::graph::Verdict;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

pub fn class_counts(golds: &[Verdict], preds: &[Verdict], class: Verdict) -> ClassCounts {
    let mut c = ClassCounts::default();
    for (g, p) in golds.iter().zip(preds) {
        match (*g == class, *p == class) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (true, false) => c.fn_ += 1,
            (false, false) => {}
        }
    }
    c
}

/// Unweighted mean of per-class F1 over Supported and Refuted. A class that
/// appears in neither vector is left out of the mean; a class that is only
/// predicted scores 0.
pub fn macro_f1<T: Scalar>(golds: &[Verdict], preds: &[Verdict]) -> Result<T, EvalError> {
    if golds.len() != preds.len() {
        return Err(EvalError::LengthMismatch {
            golds: golds.len(),
            preds: preds.len(),
        });
    }
    if golds.is_empty() {
        return Err(EvalError::NoPredictions);
    }
    let mut sum = T::zero();
    let mut classes = 0;
    for class in [Verdict::Supported, Verdict::Refuted] {
        let c = class_counts(golds, preds, class);
        let denom = 2 * c.tp + c.fp + c.fn_;
        if denom == 0 {
            continue;
        }
        sum = sum + T::from_count(2 * c.tp) / T::from_count(denom);
        classes += 1;
    }
    Ok(sum / T::from_count(classes))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub claims: Vec<LabeledClaim>,
    pub warnings: Vec<String>,
}

/// Draws `n` claims with Supported and Refuted counts differing by at most
/// one, filling from the other label when one runs short. Selected claims
/// keep their input order.
pub fn balanced_sample(claims: &[LabeledClaim], n: usize, seed: u64) -> Sample {
    let mut warnings = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut supported: Vec<usize> = (0..claims.len()).filter(|&i| claims[i].gold == Verdict::Supported).collect();
    let mut refuted: Vec<usize> = (0..claims.len()).filter(|&i| claims[i].gold == Verdict::Refuted).collect();
    supported.shuffle(&mut rng);
    refuted.shuffle(&mut rng);

    if claims.len() < n {
        warnings.push(format!("only {} claims available, {n} requested; taking all", claims.len()));
    }
    let mut want_s = n.div_ceil(2);
    let mut want_r = n / 2;
    if supported.len() < want_s {
        want_r = (n - supported.len()).min(refuted.len());
        want_s = supported.len();
    } else if refuted.len() < want_r {
        want_s = (n - refuted.len()).min(supported.len());
        want_r = refuted.len();
    }
    if want_s.abs_diff(want_r) > 1 && claims.len() >= n {
        warnings.push(format!(
            "label imbalance: {want_s} supported / {want_r} refuted (not enough of one label)"
        ));
    }
    let mut picked: Vec<usize> = supported[..want_s].iter().chain(&refuted[..want_r]).copied().collect();
    picked.sort_unstable();
    for w in &warnings {
        log::warn!("{w}");
    }
    Sample {
        claims: picked.into_iter().map(|i| claims[i].clone()).collect(),
        warnings,
    }
}
