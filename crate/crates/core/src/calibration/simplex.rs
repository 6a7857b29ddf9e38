//! Integer-composition grids on the probability simplex and extremal searches over them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{ProbVector, RejectionCost};

/// Points `(k_1/m, …, k_K/m)` with non-negative integers summing to `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimplexGrid {
    classes: usize,
    resolution: usize,
}

impl SimplexGrid {
    pub fn new(classes: usize, resolution: usize) -> Result<Self> {
        if classes < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 classes, got {classes}")));
        }
        if resolution < 2 * classes {
            return Err(Error::InvalidArgument(format!(
                "grid resolution {resolution} below 2K = {}",
                2 * classes
            )));
        }
        Ok(SimplexGrid { classes, resolution })
    }

    /// 40 steps for up to four classes, 20 up to eight, `2K` beyond.
    pub fn default_for(classes: usize) -> Result<Self> {
        let m = match classes {
            0..=4 => 40,
            5..=8 => 20,
            k => 2 * k,
        };
        SimplexGrid::new(classes, m)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Visits every composition in lexicographic order.
    pub fn for_each(&self, mut f: impl FnMut(&[usize])) {
        let k = self.classes;
        let m = self.resolution;
        let mut parts = vec![0usize; k];
        parts[k - 1] = m;
        loop {
            f(&parts);
            // advance: find the rightmost non-last slot that can take one more unit
            let mut i = k - 1;
            loop {
                if i == 0 {
                    return;
                }
                i -= 1;
                let used: usize = parts[..=i].iter().sum();
                if used < m {
                    parts[i] += 1;
                    for p in parts.iter_mut().take(k - 1).skip(i + 1) {
                        *p = 0;
                    }
                    let used: usize = parts[..k - 1].iter().sum();
                    parts[k - 1] = m - used;
                    break;
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        // C(m + K - 1, K - 1)
        let n = self.resolution + self.classes - 1;
        let r = self.classes - 1;
        (0..r).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn to_prob(&self, parts: &[usize]) -> ProbVector {
        let m = self.resolution as f64;
        ProbVector::new(parts.iter().map(|&p| p as f64 / m).collect()).expect("composition lies on the simplex")
    }
}

/// Region of the simplex relative to the acceptance threshold `1 − c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    /// `max η ≥ 1 − c`
    AtLeast,
    /// `max η = 1 − c`
    Equal,
    /// `max η ≤ 1 − c`
    AtMost,
}

impl Constraint {
    pub const TOL: f64 = 1e-9;

    pub fn holds(self, eta: &[f64], c: RejectionCost) -> bool {
        let top = crate::numeric::max_value(eta);
        let t = c.threshold();
        match self {
            Constraint::AtLeast => top >= t - Self::TOL,
            Constraint::Equal => (top - t).abs() <= Self::TOL,
            Constraint::AtMost => top <= t + Self::TOL,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Constraint::AtLeast => ">=",
            Constraint::Equal => "=",
            Constraint::AtMost => "<=",
        }
    }
}

/// The two boundary points where pairwise losses attain their extremes:
/// one class at `1 − c` with the rest spread evenly, and one class at `1 − c`
/// with a single runner-up at `c`.
pub fn structured_candidates(classes: usize, c: RejectionCost) -> Vec<ProbVector> {
    let cv = c.value();
    let mut spread = vec![cv / (classes - 1) as f64; classes];
    spread[0] = 1.0 - cv;
    let mut pair = vec![0.0; classes];
    pair[0] = 1.0 - cv;
    pair[1] = cv;
    let mut out = vec![ProbVector::normalized(spread).expect("positive")];
    if classes > 2 {
        out.push(ProbVector::normalized(pair).expect("positive"));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extremes {
    pub sup: f64,
    pub inf: f64,
    pub argsup: ProbVector,
    pub arginf: ProbVector,
    /// Number of points searched.
    pub points: usize,
}

/// Feasible grid points followed by the structured candidates.
pub fn feasible_points(grid: &SimplexGrid, constraint: Constraint, c: RejectionCost) -> Vec<ProbVector> {
    let mut pts = Vec::new();
    grid.for_each(|parts| {
        let eta = grid.to_prob(parts);
        if constraint.holds(&eta, c) {
            pts.push(eta);
        }
    });
    pts.extend(
        structured_candidates(grid.classes(), c)
            .into_iter()
            .filter(|e| constraint.holds(e, c)),
    );
    pts
}

/// Extremes of `f` over the points. Evaluation runs in parallel; the
/// reduction keeps the first maximizer and minimizer in point order.
pub fn extremes_over<F>(points: &[ProbVector], f: F) -> Result<Extremes>
where
    F: Fn(&ProbVector) -> Result<f64> + Sync,
{
    if points.is_empty() {
        return Err(Error::EmptyFeasibleSet);
    }
    let values: Vec<f64> = points.par_iter().map(&f).collect::<Result<_>>()?;
    let (mut isup, mut iinf) = (0, 0);
    for (i, &v) in values.iter().enumerate() {
        if v > values[isup] {
            isup = i;
        }
        if v < values[iinf] {
            iinf = i;
        }
    }
    Ok(Extremes {
        sup: values[isup],
        inf: values[iinf],
        argsup: points[isup].clone(),
        arginf: points[iinf].clone(),
        points: points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_enumerates_all_compositions() {
        let g = SimplexGrid::new(3, 6).unwrap();
        let mut seen = Vec::new();
        g.for_each(|p| {
            assert_eq!(p.iter().sum::<usize>(), 6);
            seen.push(p.to_vec());
        });
        assert_eq!(seen.len(), 28);
        assert_eq!(g.len(), 28);
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 28);
        assert_eq!(SimplexGrid::new(8, 20).unwrap().len(), 888_030);
    }

    #[test]
    fn resolution_lower_bound() {
        assert!(SimplexGrid::new(4, 7).is_err());
        assert!(SimplexGrid::new(4, 8).is_ok());
        assert_eq!(SimplexGrid::default_for(3).unwrap().resolution(), 40);
        assert_eq!(SimplexGrid::default_for(8).unwrap().resolution(), 20);
    }

    #[test]
    fn candidates_sit_on_the_boundary() {
        let c = RejectionCost::new(0.2).unwrap();
        let cands = structured_candidates(8, c);
        assert_eq!(cands.len(), 2);
        for e in &cands {
            assert!(Constraint::Equal.holds(e, c));
        }
        assert!((cands[0][3] - 0.2 / 7.0).abs() < 1e-15);
        assert_eq!(structured_candidates(2, c).len(), 1);
    }

    #[test]
    fn extremes_tie_break_first() {
        let pts = vec![ProbVector::uniform(2), ProbVector::uniform(2)];
        let ex = extremes_over(&pts, |_| Ok(1.0)).unwrap();
        assert_eq!((ex.sup, ex.inf), (1.0, 1.0));
        assert!(matches!(extremes_over(&[], |_| Ok(0.0)), Err(Error::EmptyFeasibleSet)));
    }
}
