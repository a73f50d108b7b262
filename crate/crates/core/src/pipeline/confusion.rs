use serde::{Deserialize, Serialize};

use super::sequence::RiskSequence;
use crate::cluster::RiskLabel;
use crate::error::{Error, Result};

/// Per-state counts, rows = predicted class, columns = actual class, both in
/// `RiskLabel::ALL` order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 4]; 4],
}

impl ConfusionMatrix {
    pub fn add(&mut self, predicted: RiskLabel, actual: RiskLabel) {
        self.counts[predicted.index()][actual.index()] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..4).map(|i| self.counts[i][i]).sum()
    }

    /// Trace over total; 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        let n = self.total();
        if n == 0 {
            0.0
        } else {
            self.correct() as f64 / n as f64
        }
    }

    /// Count of states predicted as each class.
    pub fn row_sums(&self) -> [u64; 4] {
        self.counts.map(|r| r.iter().sum())
    }

    /// Count of states actually in each class.
    pub fn col_sums(&self) -> [u64; 4] {
        std::array::from_fn(|j| self.counts.iter().map(|r| r[j]).sum())
    }

    pub fn precision(&self, label: RiskLabel) -> Option<f64> {
        let i = label.index();
        let n = self.row_sums()[i];
        (n > 0).then(|| self.counts[i][i] as f64 / n as f64)
    }

    pub fn recall(&self, label: RiskLabel) -> Option<f64> {
        let i = label.index();
        let n = self.col_sums()[i];
        (n > 0).then(|| self.counts[i][i] as f64 / n as f64)
    }

    /// Share of the states actually in `label` that were predicted as
    /// something else.
    pub fn miss_rate(&self, label: RiskLabel) -> Option<f64> {
        self.recall(label).map(|r| 1.0 - r)
    }
}

/// Counts aligned predicted and actual sequences state by state.
pub fn confusion(predicted: &[RiskSequence], actual: &[RiskSequence]) -> Result<ConfusionMatrix> {
    if predicted.len() != actual.len() {
        return Err(Error::invalid(format!(
            "{} predicted sequences for {} actual ones",
            predicted.len(),
            actual.len()
        )));
    }
    let mut m = ConfusionMatrix::default();
    for (p, a) in predicted.iter().zip(actual) {
        if p.id != a.id || p.t != a.t || p.labels.len() != a.labels.len() {
            return Err(Error::invalid(format!(
                "misaligned sequences ({}, t={}) vs ({}, t={})",
                p.id, p.t, a.id, a.t
            )));
        }
        for (&lp, &la) in p.labels.iter().zip(&a.labels) {
            m.add(lp, la);
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(id: &str, t: usize, labels: &[RiskLabel]) -> RiskSequence {
        RiskSequence {
            id: id.into(),
            t,
            labels: labels.to_vec(),
        }
    }

    #[test]
    fn perfect_prediction_is_diagonal() {
        use RiskLabel::*;
        let s = vec![seq("a", 4, &[Dangerous, Alert, Alert]), seq("b", 4, &[JointlySafe, IndependentlySafe, Dangerous])];
        let m = confusion(&s, &s).unwrap();
        assert_eq!(m.total(), 6);
        assert_eq!(m.accuracy(), 1.0);
        assert_eq!(m.row_sums(), m.col_sums());
        assert_eq!(m.col_sums(), [1, 1, 2, 2]);
    }

    #[test]
    fn marginals_and_rates() {
        use RiskLabel::*;
        let p = vec![seq("a", 5, &[Dangerous, Dangerous, Alert, JointlySafe])];
        let a = vec![seq("a", 5, &[Dangerous, Alert, Alert, Dangerous])];
        let m = confusion(&p, &a).unwrap();
        assert_eq!(m.accuracy(), 0.5);
        assert_eq!(m.col_sums()[Dangerous.index()], 2);
        assert_eq!(m.row_sums()[Dangerous.index()], 2);
        assert_eq!(m.counts[JointlySafe.index()][Dangerous.index()], 1);
        assert_eq!(m.miss_rate(Dangerous), Some(0.5));
        assert_eq!(m.precision(Alert), Some(1.0));
        assert_eq!(m.recall(IndependentlySafe), None);
    }

    #[test]
    fn misaligned_rejected() {
        use RiskLabel::*;
        let p = vec![seq("a", 5, &[Dangerous])];
        assert!(confusion(&p, &[seq("a", 6, &[Dangerous])]).is_err());
        assert!(confusion(&p, &[seq("b", 5, &[Dangerous])]).is_err());
        assert!(confusion(&p, &[]).is_err());
    }
}
