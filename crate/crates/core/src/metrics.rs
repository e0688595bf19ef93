//! Scoring estimated graphs against the truth.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{EdgeSet, PathResult};

/// Confusion counts plus derived precision and recall.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Score {
    pub hamming: usize,
    pub precision: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// Nothing was predicted, so precision was set to 1 by convention.
    pub precision_degenerate: bool,
    /// The truth is empty, so recall was set to 1 by convention.
    pub recall_degenerate: bool,
}

fn same_p(est: &EdgeSet, truth: &EdgeSet) -> Result<()> {
    if est.p() != truth.p() {
        return Err(Error::parameter(format!(
            "edge sets over different node counts ({} vs {})",
            est.p(),
            truth.p()
        )));
    }
    Ok(())
}

/// Size of the symmetric difference.
pub fn hamming(est: &EdgeSet, truth: &EdgeSet) -> Result<usize> {
    same_p(est, truth)?;
    Ok(est.difference_len(truth) + truth.difference_len(est))
}

pub fn precision_recall(est: &EdgeSet, truth: &EdgeSet) -> Result<Score> {
    same_p(est, truth)?;
    let tp = est.intersection_len(truth);
    let fp = est.len() - tp;
    let fn_ = truth.len() - tp;
    let (precision, precision_degenerate) = if tp + fp > 0 {
        (tp as f64 / (tp + fp) as f64, false)
    } else {
        (1.0, true)
    };
    let (recall, recall_degenerate) = if tp + fn_ > 0 {
        (tp as f64 / (tp + fn_) as f64, false)
    } else {
        (1.0, true)
    };
    Ok(Score {
        hamming: fp + fn_,
        precision,
        recall,
        tp,
        fp,
        fn_,
        precision_degenerate,
        recall_degenerate,
    })
}

/// Grid index minimizing the Hamming distance to `truth`. Ties go to the
/// largest tuning value, i.e. the sparser end of the path.
pub fn oracle_select(path: &PathResult, truth: &EdgeSet) -> Result<(usize, Score)> {
    if path.is_empty() {
        return Err(Error::parameter("cannot select from an empty path"));
    }
    let mut best: Option<(usize, Score)> = None;
    for (idx, est) in path.edge_sets().iter().enumerate() {
        let score = precision_recall(est, truth)?;
        if best.is_none_or(|(_, b)| score.hamming <= b.hamming) {
            best = Some((idx, score));
        }
    }
    Ok(best.expect("non-empty path"))
}

impl Score {
    /// `hamming,precision,recall,tp,fp,fn`.
    pub fn csv_record(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.hamming, self.precision, self.recall, self.tp, self.fp, self.fn_
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn es(p: usize, pairs: &[(usize, usize)]) -> EdgeSet {
        EdgeSet::from_pairs(p, pairs.iter().copied()).unwrap()
    }

    #[test]
    fn hamming_examples() {
        let t = es(4, &[(0, 1), (1, 2)]);
        assert_eq!(hamming(&t, &t).unwrap(), 0);
        assert_eq!(hamming(&es(4, &[(0, 1)]), &es(4, &[(0, 2)])).unwrap(), 2);
        assert_eq!(hamming(&es(4, &[]), &t).unwrap(), 2);
        assert!(hamming(&es(3, &[]), &t).is_err());
    }

    #[test]
    fn precision_recall_conventions() {
        let t = es(4, &[(0, 1), (1, 2)]);
        let s = precision_recall(&t, &t).unwrap();
        assert_eq!((s.precision, s.recall), (1.0, 1.0));
        assert!(!s.precision_degenerate);
        let s = precision_recall(&es(4, &[]), &t).unwrap();
        assert_eq!((s.precision, s.recall), (1.0, 0.0));
        assert!(s.precision_degenerate);
        let s = precision_recall(&t, &es(4, &[])).unwrap();
        assert_eq!((s.precision, s.recall), (0.0, 1.0));
        assert!(s.recall_degenerate);
        let s = precision_recall(&es(4, &[(0, 1), (2, 3)]), &t).unwrap();
        assert_eq!((s.tp, s.fp, s.fn_, s.hamming), (1, 1, 1, 2));
        assert_eq!(s.csv_record(), "2,0.5,0.5,1,1,1");
    }

    #[test]
    fn oracle_finds_truth_and_breaks_ties_sparse() {
        let t = es(4, &[(0, 1)]);
        let path = PathResult::new(
            vec![0.1, 0.2, 0.3],
            vec![es(4, &[(0, 1), (2, 3)]), t.clone(), es(4, &[])],
            "x",
        )
        .unwrap();
        assert_eq!(oracle_select(&path, &t).unwrap().0, 1);
        let flat = PathResult::new(vec![0.1, 0.2, 0.3], vec![t.clone(), t.clone(), t.clone()], "x").unwrap();
        assert_eq!(oracle_select(&flat, &t).unwrap(), (2, precision_recall(&t, &t).unwrap()));
        let empty = PathResult::new(vec![], vec![], "x").unwrap();
        assert!(oracle_select(&empty, &t).is_err());
    }

    fn arb_triple() -> impl Strategy<Value = (EdgeSet, EdgeSet, EdgeSet)> {
        (2usize..10).prop_flat_map(|p| {
            let m = p * (p - 1) / 2;
            let set = move || proptest::collection::vec(any::<bool>(), m).prop_map(move |bits| to_set(p, &bits));
            (set(), set(), set())
        })
    }

    fn to_set(p: usize, bits: &[bool]) -> EdgeSet {
        let pairs = (0..p).flat_map(|i| (i + 1..p).map(move |j| (i, j)));
        EdgeSet::from_pairs(p, pairs.zip(bits).filter(|(_, &b)| b).map(|(e, _)| e)).unwrap()
    }

    proptest! {
        #[test]
        fn hamming_is_a_metric((a, b, c) in arb_triple()) {
            let ab = hamming(&a, &b).unwrap();
            prop_assert_eq!(ab, hamming(&b, &a).unwrap());
            prop_assert_eq!(ab == 0, a == b);
            prop_assert!(hamming(&a, &c).unwrap() <= ab + hamming(&b, &c).unwrap());
            let s = precision_recall(&a, &b).unwrap();
            prop_assert_eq!(s.hamming, s.fp + s.fn_);
            prop_assert_eq!(s.hamming, a.len() + b.len() - 2 * s.tp);
        }
    }
}
