//! Correlation screening of variable pairs.

use serde::{Deserialize, Serialize};

use crate::data::{pearson_correlation, PanelDataset};
use crate::error::{Error, Result};

/// A variable pair that passed the correlation and sample-size thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCandidate {
    pub a: String,
    pub b: String,
    pub rho: f64,
    pub n: usize,
}

/// Screening result plus the diagnostics tally of skipped pairs.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PreselectOutcome {
    /// Pairs with |rho| > tau and n >= n_min, sorted by |rho| descending,
    /// ties broken lexicographically. Each unordered pair appears once,
    /// with a < b.
    pub pairs: Vec<PairCandidate>,
    /// Unordered pairs examined.
    pub evaluated: usize,
    /// Pairs skipped because alignment or the correlation itself failed
    /// (no overlap, constant column, too few rows).
    pub skipped: usize,
}

/// Enumerate unordered variable pairs whose absolute correlation exceeds
/// `tau` over at least `n_min` complete cases.
pub fn preselect(d: &PanelDataset, tau: f64, n_min: usize) -> Result<PreselectOutcome> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Config(format!("preselect tau must lie in (0, 1), got {tau}")));
    }
    let names: Vec<&str> = d.variable_names().collect();
    let mut out = PreselectOutcome::default();
    for i in 0..names.len() {
        for j in (i + 1)..names.len() {
            out.evaluated += 1;
            let aligned = match d.align_pair(names[i], names[j]) {
                Ok(s) => s,
                Err(Error::EmptyOverlap { .. }) => {
                    out.skipped += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let rho = match pearson_correlation(&aligned) {
                Ok(r) => r,
                Err(Error::ZeroVariance(_)) | Err(Error::InsufficientData(_)) => {
                    out.skipped += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            if rho.abs() > tau && aligned.n() >= n_min {
                out.pairs.push(PairCandidate {
                    a: names[i].to_string(),
                    b: names[j].to_string(),
                    rho,
                    n: aligned.n(),
                });
            }
        }
    }
    out.pairs.sort_by(|p, q| {
        q.rho
            .abs()
            .partial_cmp(&p.rho.abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| (&p.a, &p.b).cmp(&(&q.a, &q.b)))
    });
    Ok(out)
}
