use crate::error::{Error, Result};
use crate::graph::Graph;

/// Operating characteristics of one score vector at one threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct OcRow {
    pub threshold: f64,
    pub n_listed: usize,
    /// Fraction of listed vertices that are truly null (0 for an empty list).
    pub empirical_fdr: f64,
    /// Fraction of non-null vertices that are listed (0 if there are none).
    pub tpr: f64,
    /// Mean score over the list, for scores that are local fdrs.
    pub controlled_fdr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatingCharacteristics {
    pub rows: Vec<OcRow>,
}

/// Lists `{v : score_v <= c}` for each threshold and scores them against
/// the truth. `lfdr_scores` adds the controlled FDR of each list.
pub fn evaluate(truth_null: &[bool], scores: &[f64], thresholds: &[f64], lfdr_scores: bool) -> Result<OperatingCharacteristics> {
    if truth_null.len() != scores.len() {
        return Err(Error::invalid(format!(
            "truth has {} entries but scores have {}",
            truth_null.len(),
            scores.len()
        )));
    }
    let non_null = truth_null.iter().filter(|&&b| !b).count();
    let rows = thresholds
        .iter()
        .map(|&c| {
            let (mut listed, mut false_pos, mut sum) = (0usize, 0usize, 0.0);
            for (&s, &null) in scores.iter().zip(truth_null) {
                if s <= c {
                    listed += 1;
                    false_pos += null as usize;
                    sum += s;
                }
            }
            let true_pos = listed - false_pos;
            OcRow {
                threshold: c,
                n_listed: listed,
                empirical_fdr: if listed == 0 { 0.0 } else { false_pos as f64 / listed as f64 },
                tpr: if non_null == 0 { 0.0 } else { true_pos as f64 / non_null as f64 },
                controlled_fdr: (lfdr_scores && listed > 0).then(|| sum / listed as f64),
            }
        })
        .collect();
    Ok(OperatingCharacteristics { rows })
}

/// True positive rate of the longest score-ranked list whose empirical FDR
/// is at most `target`. Lists are cut only between distinct scores.
pub fn tpr_at_empirical_fdr(truth_null: &[bool], scores: &[f64], target: f64) -> Result<f64> {
    if truth_null.len() != scores.len() {
        return Err(Error::invalid("truth and scores differ in length"));
    }
    let non_null = truth_null.iter().filter(|&&b| !b).count();
    if non_null == 0 {
        return Ok(0.0);
    }
    let mut order: Vec<usize> = (0..scores.len()).filter(|&i| !scores[i].is_nan()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let (mut best, mut listed, mut false_pos) = (0usize, 0usize, 0usize);
    for (k, &i) in order.iter().enumerate() {
        listed += 1;
        false_pos += truth_null[i] as usize;
        let cut = k + 1 == order.len() || scores[order[k + 1]] != scores[i];
        if cut && false_pos as f64 <= target * listed as f64 {
            best = listed - false_pos;
        }
    }
    Ok(best as f64 / non_null as f64)
}

/// Sizes of the connected components formed by the listed vertices,
/// largest first.
pub fn discovery_clusters(g: &Graph, listed: &[usize]) -> Result<Vec<usize>> {
    g.component_sizes(listed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_scores() {
        let truth = [true, false, true, false];
        let scores = [1.0, 0.0, 1.0, 0.0];
        let oc = evaluate(&truth, &scores, &[0.5], false).unwrap();
        assert_eq!(oc.rows[0].empirical_fdr, 0.0);
        assert_eq!(oc.rows[0].tpr, 1.0);
        assert_eq!(oc.rows[0].controlled_fdr, None);
    }

    #[test]
    fn all_null_list() {
        let oc = evaluate(&[true, true], &[0.01, 0.5], &[0.1], true).unwrap();
        assert_eq!(oc.rows[0].empirical_fdr, 1.0);
        assert_eq!(oc.rows[0].tpr, 0.0);
        assert_eq!(oc.rows[0].controlled_fdr, Some(0.01));
    }

    #[test]
    fn five_vertex_hand_count() {
        // listed at 0.3: vertices 0, 1, 3; vertex 1 is null; non-nulls are 0, 3, 4
        let truth = [false, true, true, false, false];
        let scores = [0.1, 0.2, 0.9, 0.3, 0.6];
        let r = &evaluate(&truth, &scores, &[0.3], true).unwrap().rows[0];
        assert_eq!(r.n_listed, 3);
        assert!((r.empirical_fdr - 1.0 / 3.0).abs() < 1e-15);
        assert!((r.tpr - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.controlled_fdr.unwrap() - 0.2).abs() < 1e-15);
        assert!(evaluate(&truth, &scores[..4], &[0.3], true).is_err());
    }

    #[test]
    fn matched_fdr_tpr() {
        let truth = [false, false, true, false, true];
        let scores = [0.1, 0.2, 0.3, 0.4, 0.5];
        // prefixes: 0/1, 0/2, 1/3, 1/4, 2/5
        assert!((tpr_at_empirical_fdr(&truth, &scores, 0.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((tpr_at_empirical_fdr(&truth, &scores, 0.25).unwrap() - 1.0).abs() < 1e-15);
        // ties at 0.2 cannot be split
        let tied = [0.1, 0.2, 0.2, 0.4, 0.5];
        assert!((tpr_at_empirical_fdr(&truth, &tied, 0.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn cluster_sizes() {
        let g = Graph::path(5);
        assert!(discovery_clusters(&g, &[]).unwrap().is_empty());
        assert_eq!(discovery_clusters(&g, &[0, 1, 3]).unwrap(), vec![2, 1]);
        assert_eq!(discovery_clusters(&g, &[0, 1, 2, 3, 4]).unwrap(), vec![5]);
    }
}
