//! Sequential maxmin landmarks and the lazy witness complex LW(nu).
//!
//! Landmark pair `(a, b)` is joined at threshold `t` when some witness `x`
//! (any data point, landmarks included) has
//! `max(d(a, x), d(b, x)) <= t + m_nu(x)`, where `m_nu(x)` is the distance
//! from `x` to its `nu`-th nearest landmark and `m_0 = 0`.

use rand::Rng;

use super::{check_timestamps, EdgeFiltration, FiltrationParams, SimplexCountCurve};
use crate::data::DistanceMatrix;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    /// Point indices in selection order.
    pub indices: Vec<usize>,
    pub nu: usize,
    /// For every point, its distance to the `nu`-th nearest landmark.
    pub m_nu: Vec<f64>,
    /// Distance from each landmark to its predecessors at selection time;
    /// infinite for the first.
    pub radii: Vec<f64>,
}

impl LandmarkSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Maxmin selection with a seeded uniform first landmark.
pub fn maxmin_landmarks(d: &DistanceMatrix, m: usize, nu: usize, seed: u64) -> Result<LandmarkSet> {
    if d.is_empty() {
        return Err(Error::invalid("cannot pick landmarks from an empty matrix"));
    }
    let first = seed::rng(seed).random_range(0..d.len());
    maxmin_landmarks_from(d, first, m, nu)
}

/// Maxmin selection starting from `first`. Ties go to the lowest index.
pub fn maxmin_landmarks_from(d: &DistanceMatrix, first: usize, m: usize, nu: usize) -> Result<LandmarkSet> {
    let n = d.len();
    if m == 0 || m > n {
        return Err(Error::invalid(format!("landmark count {m} must lie in 1..={n}")));
    }
    if first >= n {
        return Err(Error::invalid(format!("first landmark {first} out of range")));
    }
    if nu > m {
        return Err(Error::invalid(format!("nu = {nu} exceeds the {m} landmarks")));
    }
    let mut chosen = vec![false; n];
    let mut nearest: Vec<f64> = d.row(first).to_vec();
    let mut indices = vec![first];
    let mut radii = vec![f64::INFINITY];
    chosen[first] = true;
    while indices.len() < m {
        let mut best = usize::MAX;
        for x in 0..n {
            if !chosen[x] && (best == usize::MAX || nearest[x] > nearest[best]) {
                best = x;
            }
        }
        chosen[best] = true;
        radii.push(nearest[best]);
        indices.push(best);
        for x in 0..n {
            nearest[x] = nearest[x].min(d.get(best, x));
        }
    }
    let m_nu = (0..n)
        .map(|x| {
            if nu == 0 {
                return 0.0;
            }
            let mut to_landmarks: Vec<f64> = indices.iter().map(|&l| d.get(l, x)).collect();
            let (_, kth, _) = to_landmarks.select_nth_unstable_by(nu - 1, f64::total_cmp);
            *kth
        })
        .collect();
    Ok(LandmarkSet {
        indices,
        nu,
        m_nu,
        radii,
    })
}

/// Birth of every landmark pair, indexed by landmark position. Pairs the
/// time limit forbids are omitted.
pub fn lazy_witness_edge_births(
    d: &DistanceMatrix,
    lm: &LandmarkSet,
    timestamps: &[u32],
    tau: super::Tau,
) -> Result<EdgeFiltration> {
    check_timestamps(d.len(), timestamps, tau)?;
    if lm.m_nu.len() != d.len() {
        return Err(Error::invalid("landmark set was built for a different matrix"));
    }
    let m = lm.len();
    let mut births = vec![f64::INFINITY; m * m];
    for x in 0..d.len() {
        let slack = lm.m_nu[x];
        let reach: Vec<f64> = lm.indices.iter().map(|&l| d.get(l, x)).collect();
        for a in 0..m {
            for b in (a + 1)..m {
                let v = reach[a].max(reach[b]) - slack;
                if v < births[a * m + b] {
                    births[a * m + b] = v;
                }
            }
        }
    }
    let mut edges = Vec::with_capacity(m * m.saturating_sub(1) / 2);
    for a in 0..m {
        for b in (a + 1)..m {
            let (la, lb) = (lm.indices[a], lm.indices[b]);
            if tau == super::Tau::Infinite || tau.admits(timestamps[la], timestamps[lb]) {
                edges.push((births[a * m + b].max(0.0), a, b));
            }
        }
    }
    Ok(EdgeFiltration::from_edges(m, edges))
}

/// Count curve of the lazy witness complex on the landmarks.
pub fn lazy_witness_curve(
    d: &DistanceMatrix,
    lm: &LandmarkSet,
    fp: &FiltrationParams,
    timestamps: &[u32],
) -> Result<SimplexCountCurve> {
    Ok(lazy_witness_edge_births(d, lm, timestamps, fp.tau)?.count_curve(fp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::Tau;

    fn line(n: usize) -> DistanceMatrix {
        DistanceMatrix::from_fn(n, |i, j| (j - i) as f64).unwrap()
    }

    #[test]
    fn all_points_when_m_is_n() {
        let d = line(7);
        for seed in 0..5 {
            let lm = maxmin_landmarks(&d, 7, 2, seed).unwrap();
            let mut idx = lm.indices.clone();
            idx.sort();
            assert_eq!(idx, (0..7).collect::<Vec<_>>());
        }
        assert!(maxmin_landmarks(&d, 8, 0, 0).is_err());
    }

    #[test]
    fn endpoint_follows_first() {
        let lm = maxmin_landmarks_from(&line(11), 0, 3, 1).unwrap();
        assert_eq!(lm.indices[..2], [0, 10]);
        // Midpoint next; both 4 and 6 are not better than 5.
        assert_eq!(lm.indices[2], 5);
        assert_eq!(lm.radii[1..], [10.0, 5.0]);
    }

    #[test]
    fn m_nu_values() {
        let lm = maxmin_landmarks_from(&line(5), 0, 2, 2).unwrap();
        // Landmarks 0 and 4; second-nearest landmark of each point.
        assert_eq!(lm.m_nu, vec![4.0, 3.0, 2.0, 3.0, 4.0]);
        let lm1 = maxmin_landmarks_from(&line(5), 0, 2, 1).unwrap();
        assert_eq!(lm1.m_nu, vec![0.0, 1.0, 2.0, 1.0, 0.0]);
    }

    #[test]
    fn single_equidistant_witness() {
        // Landmarks 0 and 1 at distance 3; witness 2 sits at r = 2 from both.
        let d = DistanceMatrix::from_upper(3, &[3.0, 2.0, 2.0]).unwrap();
        let nu0 = maxmin_landmarks_from(&d, 0, 2, 0).unwrap();
        let e = lazy_witness_edge_births(&d, &nu0, &[], Tau::Infinite).unwrap();
        assert_eq!(e.birth(0, 1), 2.0);
        // nu = 2: m_2(witness) = r' = 2, so the witness joins them at max(r - r', 0).
        let nu2 = maxmin_landmarks_from(&d, 0, 2, 2).unwrap();
        assert_eq!(nu2.m_nu[2], 2.0);
        let e = lazy_witness_edge_births(&d, &nu2, &[], Tau::Infinite).unwrap();
        assert_eq!(e.birth(0, 1), 0.0);
    }

    #[test]
    fn time_limit_removes_pairs() {
        let d = line(4);
        let lm = maxmin_landmarks_from(&d, 0, 4, 0).unwrap();
        let e = lazy_witness_edge_births(&d, &lm, &[0, 5, 0, 5], Tau::Finite(1)).unwrap();
        // Landmark order is 0, 3, 1, 2; only equal-time pairs survive.
        assert_eq!(e.edges().len(), 2);
    }
}
