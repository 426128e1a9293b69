use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrontierStatus {
    Efficient,
    /// Another arm is at least as effective and at most as costly (or an
    /// identical arm has a lower index).
    Dominated,
    /// A mix of two other arms is better value.
    ExtendedDominated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    /// Per arm, in arm order.
    pub status: Vec<FrontierStatus>,
    /// Efficient arms by increasing effectiveness.
    pub arms: Vec<usize>,
    /// ICER between consecutive frontier arms; strictly increasing.
    pub icers: Vec<f64>,
}

fn dominates(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 >= b.0 && a.1 <= b.1 && (a.0 > b.0 || a.1 < b.1)
}

/// Efficiency frontier of arms given by `(mean effect, mean cost)`.
pub fn efficiency_frontier(points: &[(f64, f64)]) -> Frontier {
    let n = points.len();
    let mut status = vec![FrontierStatus::Efficient; n];
    for i in 0..n {
        let beaten = (0..n).any(|j| {
            j != i && (dominates(points[j], points[i]) || (points[j] == points[i] && j < i))
        });
        if beaten {
            status[i] = FrontierStatus::Dominated;
        }
    }

    let mut order: Vec<usize> = (0..n).filter(|&i| status[i] == FrontierStatus::Efficient).collect();
    order.sort_by(|&a, &b| points[a].0.total_cmp(&points[b].0).then(a.cmp(&b)));
    let icer = |a: usize, b: usize| (points[b].1 - points[a].1) / (points[b].0 - points[a].0);

    let mut stack: Vec<usize> = Vec::new();
    for &arm in &order {
        while stack.len() >= 2 {
            let (p, q) = (stack[stack.len() - 2], stack[stack.len() - 1]);
            if icer(p, q) >= icer(q, arm) {
                status[q] = FrontierStatus::ExtendedDominated;
                stack.pop();
            } else {
                break;
            }
        }
        stack.push(arm);
    }
    let icers = stack.windows(2).map(|w| icer(w[0], w[1])).collect();
    Frontier {
        status,
        arms: stack,
        icers,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use FrontierStatus::*;

    #[test]
    fn strict_dominance() {
        let f = efficiency_frontier(&[(1.0, 10.0), (2.0, 5.0)]);
        assert_eq!(f.status, vec![Dominated, Efficient]);
        assert_eq!(f.arms, vec![1]);
        assert!(f.icers.is_empty());
    }

    #[test]
    fn extended_dominance_and_collinear() {
        // B lies above the segment A-C
        let f = efficiency_frontier(&[(0.0, 0.0), (1.0, 30.0), (2.0, 40.0)]);
        assert_eq!(f.status, vec![Efficient, ExtendedDominated, Efficient]);
        assert_eq!(f.icers, vec![20.0]);
        let f = efficiency_frontier(&[(0.0, 0.0), (1.0, 10.0), (2.0, 20.0)]);
        assert_eq!(f.status[1], ExtendedDominated);
        let f = efficiency_frontier(&[(0.0, 0.0), (1.0, 5.0), (2.0, 20.0)]);
        assert_eq!(f.arms, vec![0, 1, 2]);
        assert_eq!(f.icers, vec![5.0, 15.0]);
    }

    #[test]
    fn duplicates_keep_lowest_index() {
        let f = efficiency_frontier(&[(1.0, 1.0), (1.0, 1.0), (2.0, 3.0)]);
        assert_eq!(f.status, vec![Efficient, Dominated, Efficient]);
    }
}
