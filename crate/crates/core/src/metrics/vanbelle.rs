//! Vanbelle–Albert agreement between an isolated rater and a rater group.

use super::{agreeing_counts, check_lengths, Partition};
use crate::error::{Error, Result};

const DEGENERATE_TOL: f64 = 1e-12;

/// Kappa from the theoretical agreement and the category marginals of the
/// isolated rater (`p_rater`) and the group (`p_group`).
///
/// When the maximum attainable agreement equals chance agreement the ratio is
/// undefined; the index is then 1 for perfect agreement and 0 otherwise.
fn kappa(pi_t: f64, p_rater: &[f64], p_group: &[f64]) -> f64 {
    let pi_e: f64 = p_rater.iter().zip(p_group).map(|(r, g)| r * g).sum();
    let pi_m: f64 = p_rater.iter().zip(p_group).map(|(r, g)| r.min(*g)).sum();
    if (pi_m - pi_e).abs() <= DEGENERATE_TOL {
        return if pi_t >= 1.0 - DEGENERATE_TOL { 1.0 } else { 0.0 };
    }
    (pi_t - pi_e) / (pi_m - pi_e)
}

/// Vanbelle kappa over arbitrary categorical items.
///
/// `prediction[i]` is the isolated rater's category for item `i`;
/// `group[m][i]` is member `m`'s category for the same item. Categories are
/// `0..categories`.
pub fn vanbelle_categorical<L: AsRef<[usize]>>(
    prediction: &[usize],
    group: &[L],
    categories: usize,
) -> Result<f64> {
    if prediction.is_empty() || group.is_empty() {
        return Err(Error::Data("vanbelle needs at least one item and one rater".into()));
    }
    let items = prediction.len() as f64;
    let members = group.len() as f64;
    let mut rater_counts = vec![0usize; categories];
    let mut group_counts = vec![0usize; categories];
    let mut matches = 0usize;
    for &c in prediction {
        rater_counts[c] += 1;
    }
    for member in group {
        let member = member.as_ref();
        if member.len() != prediction.len() {
            return Err(crate::error::shape_err(
                "vanbelle_categorical",
                format!("member has {} items, expected {}", member.len(), prediction.len()),
            ));
        }
        for (&c, &p) in member.iter().zip(prediction) {
            group_counts[c] += 1;
            matches += usize::from(c == p);
        }
    }
    let pi_t = matches as f64 / (items * members);
    let p_rater: Vec<f64> = rater_counts.iter().map(|&c| c as f64 / items).collect();
    let p_group: Vec<f64> = group_counts.iter().map(|&c| c as f64 / (items * members)).collect();
    Ok(kappa(pi_t, &p_rater, &p_group))
}

/// Vanbelle kappa of a predicted clustering against a rater group.
///
/// Items are the N(N−1)/2 unordered point pairs with categories
/// {same cluster, different cluster}; computed from contingency counts.
pub fn vanbelle<L: AsRef<[u32]>>(prediction: &[u32], group: &[L]) -> Result<f64> {
    let n = prediction.len();
    if n < 2 {
        return Err(Error::Data(format!("vanbelle needs at least 2 points, got {n}")));
    }
    if group.is_empty() {
        return Err(Error::Data("vanbelle needs at least 1 annotation".into()));
    }
    check_lengths("vanbelle", n, group)?;
    let pairs = (n * (n - 1) / 2) as f64;
    let pred = Partition::new(prediction);
    let p_same_rater = pred.same_pairs() as f64 / pairs;

    let mut agree_pairs = 0usize;
    let mut same_pairs = 0usize;
    for labels in group {
        let member = Partition::new(labels.as_ref());
        same_pairs += member.same_pairs();
        // Ordered agreements include the diagonal; strip it and halve.
        let ordered: usize = agreeing_counts(&pred, &member).iter().sum();
        agree_pairs += (ordered - n) / 2;
    }
    let members = group.len() as f64;
    let pi_t = agree_pairs as f64 / (pairs * members);
    let p_same_group = same_pairs as f64 / (pairs * members);
    Ok(kappa(
        pi_t,
        &[p_same_rater, 1.0 - p_same_rater],
        &[p_same_group, 1.0 - p_same_group],
    ))
}
