//! Scores for retrieved components against the true sources.
//!
//! Both scores pair every source column `s^j` with one retrieved column
//! `z^{π(j)}` through an optimal assignment; `π` is what the report stores.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Result, WicaError};
use crate::stats::{pearson_corr_views, spearman_corr_views};

/// Relative slack used when deciding that two assignment totals tie.
const TIE_TOLERANCE: f64 = 1e-12;

fn check_shapes(z: &Dataset, s: &Dataset) -> Result<()> {
    if z.nrows() != s.nrows() || z.ncols() != s.ncols() {
        return Err(WicaError::Dimension(format!(
            "retrieved is {}x{}, sources are {}x{}",
            z.nrows(),
            z.ncols(),
            s.nrows(),
            s.ncols()
        )));
    }
    Ok(())
}

/// Entry (j, k) is `1 − |spearman(z^j, s^k)|`.
pub fn spearman_distance_matrix(z: &Dataset, s: &Dataset) -> Result<Array2<f64>> {
    check_shapes(z, s)?;
    Ok(spearman_corr_views(z.view(), s.view())?.mapv(|r| 1.0 - r.abs()))
}

/// Minimum-cost perfect matching of rows to columns. `perm[j]` is the
/// column assigned to row `j`; among optimal matchings the
/// lexicographically smallest `perm` is returned.
pub fn solve_assignment(cost: ArrayView2<'_, f64>) -> Result<(Vec<usize>, f64)> {
    let (n, m) = cost.dim();
    if n != m {
        return Err(WicaError::Dimension(format!("assignment needs a square cost matrix, got {n}x{m}")));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(WicaError::InvalidParameter("assignment cost has non-finite entries".into()));
    }
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }
    let rows: Vec<usize> = (0..n).collect();
    let mut cols: Vec<usize> = (0..n).collect();
    let (_, best) = hungarian(cost, &rows, &cols);
    let slack = TIE_TOLERANCE * best.abs().max(1.0);

    // Fix rows in order, taking the smallest column that still admits an
    // optimal completion of the remaining subproblem.
    let mut perm = Vec::with_capacity(n);
    let mut fixed = 0.0;
    for j in 0..n {
        let rest: Vec<usize> = (j + 1..n).collect();
        let mut chosen = None;
        for (idx, &c) in cols.iter().enumerate() {
            let others: Vec<usize> = cols.iter().copied().filter(|&k| k != c).collect();
            let (_, sub) = hungarian(cost, &rest, &others);
            if fixed + cost[(j, c)] + sub <= best + slack {
                chosen = Some(idx);
                break;
            }
        }
        // The optimum is always completable, so some column qualifies; fall
        // back to the cheapest one in case rounding hides it.
        let idx = chosen.unwrap_or_else(|| {
            (0..cols.len())
                .min_by(|&a, &b| cost[(j, cols[a])].total_cmp(&cost[(j, cols[b])]))
                .expect("non-empty")
        });
        let c = cols.remove(idx);
        fixed += cost[(j, c)];
        perm.push(c);
    }
    let total = perm.iter().enumerate().map(|(j, &k)| cost[(j, k)]).sum();
    Ok((perm, total))
}

/// Hungarian method with row/column potentials on the submatrix
/// `cost[rows, cols]` (equal lengths). Returns the column position matched
/// to each row position and the optimal total.
fn hungarian(cost: ArrayView2<'_, f64>, rows: &[usize], cols: &[usize]) -> (Vec<usize>, f64) {
    let n = rows.len();
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    let a = |i: usize, j: usize| cost[(rows[i - 1], cols[j - 1])];
    // 1-indexed; index 0 is the virtual root
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = a(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        assign[p[j] - 1] = j - 1;
    }
    let total = assign.iter().enumerate().map(|(i, &j)| a(i + 1, j + 1)).sum();
    (assign, total)
}

/// OTS = 1 − optimal mean Spearman distance, with `π[j]` the retrieved
/// column matched to source `j`.
pub fn ots(z: &Dataset, s: &Dataset) -> Result<(f64, Vec<usize>)> {
    let m = spearman_distance_matrix(z, s)?;
    Ok(ots_from_distance(&m))
}

fn ots_from_distance(m: &Array2<f64>) -> (f64, Vec<usize>) {
    let d = m.nrows();
    let (perm, total) = solve_assignment(m.t()).expect("square finite matrix");
    ((1.0 - total / d as f64).clamp(0.0, 1.0), perm)
}

/// Assignment-maximized mean |Pearson| between matched columns.
pub fn max_corr(z: &Dataset, s: &Dataset) -> Result<(f64, Vec<usize>)> {
    check_shapes(z, s)?;
    let r = pearson_corr_views(z.view(), s.view())?;
    Ok(max_corr_from_pearson(&r))
}

fn max_corr_from_pearson(r: &Array2<f64>) -> (f64, Vec<usize>) {
    let d = r.nrows();
    let cost = r.t().mapv(|x| 1.0 - x.abs());
    let (perm, _) = solve_assignment(cost.view()).expect("square finite matrix");
    let mean = perm.iter().enumerate().map(|(j, &k)| r[(k, j)].abs()).sum::<f64>() / d as f64;
    (mean.clamp(0.0, 1.0), perm)
}

/// Both scores, their assignments and the underlying correlation matrices.
/// Matrix entry (j, k) relates retrieved column j to source column k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub ots: f64,
    pub max_corr: f64,
    pub assignment_ots: Vec<usize>,
    pub assignment_max_corr: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spearman_matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pearson_matrix: Option<Vec<Vec<f64>>>,
}

impl ScoreReport {
    /// OTS recomputed from the stored Spearman matrix and assignment.
    pub fn recomputed_ots(&self) -> Option<f64> {
        let m = self.spearman_matrix.as_ref()?;
        let d = self.assignment_ots.len();
        let cost: f64 = self
            .assignment_ots
            .iter()
            .enumerate()
            .map(|(j, &k)| 1.0 - m[k][j].abs())
            .sum();
        Some(1.0 - cost / d as f64)
    }

    pub fn without_matrices(mut self) -> Self {
        self.spearman_matrix = None;
        self.pearson_matrix = None;
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn to_rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

pub fn score(z: &Dataset, s: &Dataset) -> Result<ScoreReport> {
    check_shapes(z, s)?;
    let spearman = spearman_corr_views(z.view(), s.view())?;
    let pearson = pearson_corr_views(z.view(), s.view())?;
    let (ots, assignment_ots) = ots_from_distance(&spearman.mapv(|r| 1.0 - r.abs()));
    let (max_corr, assignment_max_corr) = max_corr_from_pearson(&pearson);
    Ok(ScoreReport {
        ots,
        max_corr,
        assignment_ots,
        assignment_max_corr,
        spearman_matrix: Some(to_rows(&spearman)),
        pearson_matrix: Some(to_rows(&pearson)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::stats::spearman_corr;
    use ndarray::array;
    use proptest::prelude::*;
    use wica_oracles::assignment::{brute_assignment, brute_assignment_tol, brute_max_mean_abs};

    fn random(rng: &mut RngStream, n: usize, d: usize) -> Dataset {
        Dataset::new(Array2::from_shape_fn((n, d), |_| rng.normal())).unwrap()
    }

    fn rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
        to_rows(m)
    }

    #[test]
    fn trivial_assignments() {
        let c = array![[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]];
        assert_eq!(solve_assignment(c.view()).unwrap(), (vec![0, 1, 2], 0.0));
        let c = array![[0.0, 1.0], [1.0, 0.0]];
        assert_eq!(solve_assignment(c.view()).unwrap(), (vec![0, 1], 0.0));
        let c = array![[5.0, 1.0], [1.0, 5.0]];
        assert_eq!(solve_assignment(c.view()).unwrap(), (vec![1, 0], 2.0));
    }

    #[test]
    fn rejects_bad_costs() {
        assert!(matches!(solve_assignment(Array2::<f64>::zeros((2, 3)).view()), Err(WicaError::Dimension(_))));
        assert!(solve_assignment(array![[0.0, f64::NAN], [1.0, 0.0]].view()).is_err());
    }

    #[test]
    fn ties_take_lexicographically_smallest() {
        let c = Array2::<f64>::ones((4, 4));
        assert_eq!(solve_assignment(c.view()).unwrap().0, vec![0, 1, 2, 3]);
        let c = array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        // (1,0,2)? costs 0+0+1; (1,2,0) and (2,0,1) cost 0
        assert_eq!(solve_assignment(c.view()).unwrap(), (vec![1, 2, 0], 0.0));
    }

    #[test]
    fn matches_exhaustive_search_random() {
        let mut rng = RngStream::new(31);
        for _ in 0..50 {
            let c = Array2::from_shape_fn((6, 6), |_| rng.uniform());
            let (p, t) = solve_assignment(c.view()).unwrap();
            let (bp, bt) = brute_assignment(&rows(&c)).unwrap();
            assert_eq!(p, bp);
            assert!((t - bt).abs() <= 1e-12);
        }
    }

    #[test]
    fn matches_exhaustive_search_with_ties() {
        let mut rng = RngStream::new(32);
        for _ in 0..50 {
            let c = Array2::from_shape_fn((6, 6), |_| rng.below(3) as f64);
            let (p, t) = solve_assignment(c.view()).unwrap();
            let (bp, bt) = brute_assignment_tol(&rows(&c), 1e-12).unwrap();
            assert_eq!(p, bp);
            assert_eq!(t, bt);
        }
    }

    #[test]
    fn distance_matrix_properties() {
        let mut rng = RngStream::new(3);
        let s = random(&mut rng, 100, 3);
        let m = spearman_distance_matrix(&s, &s).unwrap();
        for j in 0..3 {
            assert!(m[(j, j)].abs() < 1e-12);
        }
        let z = random(&mut rng, 100, 3);
        let m = spearman_distance_matrix(&z, &s).unwrap();
        for j in 0..3 {
            for k in 0..3 {
                let want = 1.0 - spearman_corr(z.column(j), s.column(k)).unwrap().abs();
                assert!((m[(j, k)] - want).abs() <= 1e-12);
                assert!((0.0..=1.0).contains(&m[(j, k)]));
            }
        }
        let e = Dataset::new(s.values().mapv(f64::exp)).unwrap();
        let m = spearman_distance_matrix(&e, &s).unwrap();
        assert!(m[(1, 1)].abs() < 1e-12);
        let c = Dataset::new(array![[1.0, 1.0], [1.0, 2.0], [1.0, 3.0]]).unwrap();
        assert!(matches!(
            spearman_distance_matrix(&c, &c),
            Err(WicaError::DegenerateColumn { column: 0, .. })
        ));
    }

    #[test]
    fn ots_identities() {
        let mut rng = RngStream::new(5);
        let s = random(&mut rng, 1000, 4);
        assert_eq!(ots(&s, &s).unwrap(), (1.0, vec![0, 1, 2, 3]));
        let perm = [2usize, 0, 3, 1];
        let z = Array2::from_shape_fn((1000, 4), |(i, j)| {
            let v = s.values()[(i, perm[j])];
            match j {
                0 => v.exp(),
                1 => -v.powi(3),
                2 => 2.0 * v + 7.0,
                _ => -(v.atan()),
            }
        });
        let (score, assign) = ots(&Dataset::new(z).unwrap(), &s).unwrap();
        assert!((score - 1.0).abs() <= 1e-12);
        // source k sits in retrieved column perm⁻¹(k)
        for (k, &j) in assign.iter().enumerate() {
            assert_eq!(perm[j], k);
        }
    }

    #[test]
    fn ots_null_below_bound() {
        let mut rng = RngStream::new(6);
        for _ in 0..5 {
            let z = random(&mut rng, 1000, 4);
            let s = random(&mut rng, 1000, 4);
            assert!(ots(&z, &s).unwrap().0 < 0.25);
        }
    }

    #[test]
    fn max_corr_identities_and_oracle() {
        let mut rng = RngStream::new(7);
        let s = random(&mut rng, 200, 2);
        assert!((max_corr(&s, &s).unwrap().0 - 1.0).abs() < 1e-12);
        let z = Array2::from_shape_fn((200, 2), |(i, j)| -s.values()[(i, 1 - j)]);
        let (v, p) = max_corr(&Dataset::new(z).unwrap(), &s).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        assert_eq!(p, vec![1, 0]);
        for d in 2..=6 {
            let z = random(&mut rng, 300, d);
            let s = random(&mut rng, 300, d);
            let r = pearson_corr_matrix_rows(&z, &s);
            let want = brute_max_mean_abs(&r).unwrap();
            assert!((max_corr(&z, &s).unwrap().0 - want).abs() < 1e-12);
        }
    }

    fn pearson_corr_matrix_rows(z: &Dataset, s: &Dataset) -> Vec<Vec<f64>> {
        rows(&crate::stats::pearson_corr_matrix(z, s).unwrap())
    }

    #[test]
    fn score_report_is_consistent() {
        let mut rng = RngStream::new(8);
        let s = random(&mut rng, 300, 3);
        let r = score(&s, &s).unwrap();
        assert_eq!((r.ots, r.max_corr), (1.0, 1.0));
        assert_eq!(r.assignment_ots, vec![0, 1, 2]);
        assert_eq!(r.assignment_max_corr, vec![0, 1, 2]);
        let z = random(&mut rng, 300, 3);
        let r = score(&z, &s).unwrap();
        assert!((r.recomputed_ots().unwrap() - r.ots).abs() <= 1e-12);
        let back: ScoreReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
        let short = r.clone().without_matrices().to_json();
        assert!(!short.contains("spearman_matrix"));
        assert!(score(&z, &random(&mut rng, 299, 3)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn assignment_beats_identity(seed in 0u64..10_000, d in 1usize..9) {
            let mut rng = RngStream::new(seed);
            let c = Array2::from_shape_fn((d, d), |_| rng.normal());
            let (p, t) = solve_assignment(c.view()).unwrap();
            let identity: f64 = (0..d).map(|j| c[(j, j)]).sum();
            prop_assert!(t <= identity + 1e-12);
            let mut sorted = p.clone();
            sorted.sort_unstable();
            prop_assert_eq!(sorted, (0..d).collect::<Vec<_>>());
        }

        #[test]
        fn scores_invariant_under_permutation_and_affine(seed in 0u64..10_000) {
            let mut rng = RngStream::new(seed);
            let z = random(&mut rng, 80, 3);
            let s = random(&mut rng, 80, 3);
            let base = score(&z, &s).unwrap();
            prop_assert!((0.0..=1.0).contains(&base.ots) && (0.0..=1.0).contains(&base.max_corr));
            let perm = [1usize, 2, 0];
            let zp = Array2::from_shape_fn((80, 3), |(i, j)| -3.0 * z.values()[(i, perm[j])] + 1.5);
            let moved = score(&Dataset::new(zp).unwrap(), &s).unwrap();
            prop_assert!((moved.ots - base.ots).abs() <= 1e-12);
            prop_assert!((moved.max_corr - base.max_corr).abs() <= 1e-10);
            let zm = Dataset::new(z.values().mapv(|v| v.powi(3) + v)).unwrap();
            prop_assert!((ots(&zm, &s).unwrap().0 - base.ots).abs() <= 1e-12);
        }
    }
}
