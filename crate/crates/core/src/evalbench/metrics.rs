//! Error metrics and the speedup formulas.

use crate::error::{Result, VenomError};
use crate::timing::TimingLedger;

fn check(op: &'static str, pred: &[f64], truth: &[f64]) -> Result<()> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(VenomError::Dimension { op, left: vec![pred.len()], right: vec![truth.len()] });
    }
    Ok(())
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check("rmse", pred, truth)?;
    let s: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((s / pred.len() as f64).sqrt())
}

pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check("mae", pred, truth)?;
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64)
}

/// `t_op / (t_sim_op + t_vec + t_sim + t_pred)`.
pub fn speedup(ledger: &TimingLedger) -> Result<f64> {
    let denom = ledger.t_sim_op + ledger.t_vec + ledger.t_sim + ledger.t_pred;
    if !(denom > 0.0) {
        return Err(VenomError::Contract("speedup denominator is zero".into()));
    }
    Ok(ledger.t_op / denom)
}

/// Speedup over several operators sharing one lake vectorization, which is
/// counted once: `sum t_op / (sum (t_sim_op + t_sim + t_pred) + t_vec)`.
pub fn amortized_speedup(ledgers: &[TimingLedger]) -> Result<f64> {
    let first = ledgers.first().ok_or_else(|| VenomError::EmptyInput("no ledgers to amortize".into()))?;
    if ledgers.iter().any(|l| l.t_vec != first.t_vec) {
        return Err(VenomError::Contract("amortized ledgers must share one t_vec".into()));
    }
    let t_op: f64 = ledgers.iter().map(|l| l.t_op).sum();
    let denom = ledgers.iter().map(|l| l.t_sim_op + l.t_sim + l.t_pred).sum::<f64>() + first.t_vec;
    if !(denom > 0.0) {
        return Err(VenomError::Contract("amortized speedup denominator is zero".into()));
    }
    Ok(t_op / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ledger(t_op: f64, t_sim_op: f64, t_vec: f64, t_sim: f64, t_pred: f64) -> TimingLedger {
        TimingLedger { t_op, t_sim_op, t_vec, t_sim, t_pred, n_operators_amortized: 1 }
    }

    #[test]
    fn metric_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 4.0]).unwrap(), 2f64.sqrt());
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 4.0]).unwrap(), 1.0);
        assert_eq!(mae(&[-1.0, -2.0], &[-1.0, -4.0]).unwrap(), 1.0);
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(mae(&[], &[]).is_err());
    }

    #[test]
    fn speedup_examples() {
        assert_eq!(speedup(&ledger(100.0, 40.0, 5.0, 3.0, 2.0)).unwrap(), 2.0);
        assert_eq!(speedup(&ledger(7.0, 7.0, 0.0, 0.0, 0.0)).unwrap(), 1.0);
        assert_eq!(speedup(&ledger(200.0, 80.0, 10.0, 6.0, 4.0)).unwrap(), 2.0);
        assert!(speedup(&ledger(1.0, 0.0, 0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn amortized_examples() {
        let l = ledger(100.0, 40.0, 5.0, 3.0, 2.0);
        assert_eq!(amortized_speedup(&[l]).unwrap(), speedup(&l).unwrap());
        assert!(amortized_speedup(&[l, l]).unwrap() > speedup(&l).unwrap());
        let a = ledger(10.0, 2.0, 0.0, 1.0, 1.0);
        let b = ledger(30.0, 5.0, 0.0, 0.5, 0.5);
        assert_eq!(amortized_speedup(&[a, b]).unwrap(), 40.0 / 10.0);
        assert!(amortized_speedup(&[a, l]).is_err());
        assert!(amortized_speedup(&[]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn rmse_dominates_mae(pairs in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..40)) {
            let (p, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let r = rmse(&p, &t).unwrap();
            let m = mae(&p, &t).unwrap();
            prop_assert!(r >= m * (1.0 - 1e-12));
            prop_assert!(m >= 0.0);
        }
    }
}
