use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::PredictionSet;

/// Model error on retained samples as the most uncertain ones are dropped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscardCurve {
    pub fractions: Vec<f64>,
    pub errors: Vec<f64>,
    /// Monotonicity fraction.
    pub mf: f64,
    /// Discard improvement.
    pub di: f64,
}

/// Ten fractions `0.0, 0.1, ..., 0.9`.
pub fn default_fractions() -> Vec<f64> {
    (0..10).map(|i| i as f64 / 10.0).collect()
}

/// Share of consecutive steps where the error does not increase.
pub fn monotonicity_fraction(errors: &[f64]) -> f64 {
    let steps = errors.len() - 1;
    errors.windows(2).filter(|w| w[0] >= w[1]).count() as f64 / steps as f64
}

/// Mean signed decrease of the error per step.
pub fn discard_improvement(errors: &[f64]) -> f64 {
    let steps = errors.len() - 1;
    errors.windows(2).map(|w| w[0] - w[1]).sum::<f64>() / steps as f64
}

impl DiscardCurve {
    pub fn from_errors(fractions: Vec<f64>, errors: Vec<f64>) -> Result<Self> {
        if fractions.len() != errors.len() {
            return Err(Error::invalid_input("one error per discard fraction expected"));
        }
        if errors.len() < 2 {
            return Err(Error::invalid_input("the discard test needs at least two fractions"));
        }
        let mf = monotonicity_fraction(&errors);
        let di = discard_improvement(&errors);
        Ok(Self {
            fractions,
            errors,
            mf,
            di,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("fraction,error\n");
        for (f, e) in self.fractions.iter().zip(&self.errors) {
            out.push_str(&format!("{f},{e}\n"));
        }
        out
    }
}

fn validate_fractions(fractions: &[f64]) -> Result<()> {
    if fractions.iter().any(|f| !(0.0..1.0).contains(f)) {
        return Err(Error::invalid_config("discard fractions must lie in [0, 1)"));
    }
    if fractions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid_config("discard fractions must be strictly increasing"));
    }
    Ok(())
}

/// Drops `ceil(q * N)` samples of highest uncertainty for each fraction `q`
/// (equal uncertainties leave in ascending sample order) and records the
/// mean loss of the rest. Every fraction discards from the full set; the
/// ordering is fixed, so this equals removing successive batches.
pub fn discard_curve(uncertainty: &[f64], losses: &[f64], fractions: &[f64]) -> Result<DiscardCurve> {
    if uncertainty.is_empty() {
        return Err(Error::invalid_input("empty predictions"));
    }
    if uncertainty.len() != losses.len() {
        return Err(Error::invalid_input("one loss per uncertainty expected"));
    }
    validate_fractions(fractions)?;
    let n = uncertainty.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| uncertainty[b].total_cmp(&uncertainty[a]).then(a.cmp(&b)));
    let mut errors = Vec::with_capacity(fractions.len());
    for &q in fractions {
        // Guard against q * n landing a hair above an integer.
        let dropped = ((q * n as f64) - 1e-9).ceil().max(0.0) as usize;
        if dropped >= n {
            return Err(Error::invalid_input(format!("fraction {q} discards every sample")));
        }
        let kept = &order[dropped..];
        errors.push(kept.iter().map(|&i| losses[i]).sum::<f64>() / kept.len() as f64);
    }
    DiscardCurve::from_errors(fractions.to_vec(), errors)
}

pub fn discard_test(preds: &PredictionSet, fractions: &[f64]) -> Result<DiscardCurve> {
    discard_curve(&preds.uncertainty, &preds.losses, fractions)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mf_and_di_examples() {
        assert!((monotonicity_fraction(&[1.0, 0.9, 0.95, 0.7]) - 2.0 / 3.0).abs() < 1e-15);
        assert!((discard_improvement(&[1.0, 0.8, 0.6]) - 0.2).abs() < 1e-15);
        assert_eq!(monotonicity_fraction(&[3.0, 2.0, 1.0]), 1.0);
        assert_eq!(monotonicity_fraction(&[1.0, 2.0, 3.0]), 0.0);
    }

    #[test]
    fn default_has_ten_fractions() {
        let f = default_fractions();
        assert_eq!(f.len(), 10);
        assert_eq!(f[0], 0.0);
        assert_eq!(f[9], 0.9);
    }

    #[test]
    fn fraction_zero_is_the_mean_loss() {
        let losses = [0.3, 0.1, 0.7, 0.2];
        let c = discard_curve(&[0.5, 0.2, 0.9, 0.1], &losses, &[0.0, 0.5]).unwrap();
        assert!((c.errors[0] - 1.3 / 4.0).abs() < 1e-15);
        assert!((c.errors[1] - 0.15).abs() < 1e-15);
    }

    #[test]
    fn ties_leave_in_index_order() {
        // Dropping one of two tied samples removes index 0 first.
        let c = discard_curve(&[1.0, 1.0, 0.0], &[5.0, 1.0, 1.0], &[0.0, 0.3]).unwrap();
        assert_eq!(c.errors[1], 1.0);
    }

    #[test]
    fn loss_as_uncertainty_is_perfectly_monotone() {
        let losses: Vec<f64> = (0..37).map(|i| ((i * 7919) % 101) as f64 / 13.0).collect();
        let c = discard_curve(&losses, &losses, &default_fractions()).unwrap();
        assert_eq!(c.mf, 1.0);
        assert!(c.di > 0.0);
    }

    #[test]
    fn errors_for_invalid_requests() {
        assert!(discard_curve(&[], &[], &[0.0, 0.5]).is_err());
        assert!(discard_curve(&[0.1], &[0.1], &[0.0, 0.5]).is_err());
        assert!(discard_curve(&[0.1, 0.2], &[0.1, 0.2], &[0.5, 0.2]).is_err());
        assert!(discard_curve(&[0.1, 0.2], &[0.1, 0.2], &[0.0, 1.0]).is_err());
        assert!(discard_curve(&[0.1, 0.2], &[0.1, 0.2], &[0.0]).is_err());
    }
}
