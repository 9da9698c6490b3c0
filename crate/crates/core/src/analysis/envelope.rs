//! Storage/download tradeoff of centralized (coordinated) uncoded placement
//! when the data center also answers queries.

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::ratio::{frac, Rational};

use super::capacity_classical;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CentralizedEnvelope {
    corners: Vec<(Rational, Rational)>,
    hull: Vec<(Rational, Rational)>,
}

/// Corner points `(t/N, 1 + 1/(t+1) + ... + 1/(t+1)^(K-1))` for `t = 0..=N`
/// and their lower convex envelope.
pub fn centralized_envelope(files: usize, databases: usize) -> Result<CentralizedEnvelope> {
    if databases == 0 {
        return Err(Error::InvalidArgument(
            "centralized envelope needs N >= 1".into(),
        ));
    }
    let corners: Vec<(Rational, Rational)> = (0..=databases)
        .map(|t| {
            (
                frac(t as i64, databases as i64),
                capacity_classical(files, t + 1),
            )
        })
        .collect();

    // Monotone-chain lower hull; corners are already sorted by storage.
    let mut hull: Vec<(Rational, Rational)> = Vec::new();
    for p in &corners {
        while hull.len() >= 2 {
            let a = &hull[hull.len() - 2];
            let b = &hull[hull.len() - 1];
            let cross = (&b.0 - &a.0) * (&p.1 - &a.1) - (&b.1 - &a.1) * (&p.0 - &a.0);
            if cross <= Rational::zero() {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p.clone());
    }
    Ok(CentralizedEnvelope { corners, hull })
}

impl CentralizedEnvelope {
    pub fn corners(&self) -> &[(Rational, Rational)] {
        &self.corners
    }

    pub fn hull(&self) -> &[(Rational, Rational)] {
        &self.hull
    }

    /// Piecewise-linear interpolation on the hull at storage ratio `mu`.
    pub fn evaluate(&self, mu: &Rational) -> Result<Rational> {
        if *mu < Rational::zero() || *mu > Rational::one() {
            return Err(Error::InvalidArgument(format!(
                "storage ratio {mu} outside [0, 1]"
            )));
        }
        for w in self.hull.windows(2) {
            let (x0, y0) = &w[0];
            let (x1, y1) = &w[1];
            if mu >= x0 && mu <= x1 {
                return Ok(y0 + (y1 - y0) * (mu - x0) / (x1 - x0));
            }
        }
        // Single-point hull cannot occur for N >= 1.
        Ok(self.hull[0].1.clone())
    }
}
