/// Maximum-weight injective assignment of rows to columns (the optimal
/// speaker mapping), solved exactly by the Hungarian algorithm with
/// potentials and shortest augmenting paths.
///
/// Returns, per row, the assigned column (if any) and the total weight.
/// Zero-weight pairs are left unassigned in the returned map since they
/// contribute nothing.
pub fn hungarian_max(weights: &[Vec<i64>]) -> (Vec<Option<usize>>, i64) {
    let rows = weights.len();
    let cols = weights.first().map_or(0, |r| r.len());
    if rows == 0 || cols == 0 {
        return (vec![None; rows], 0);
    }
    if rows > cols {
        // Solve the transpose and invert the assignment.
        let t: Vec<Vec<i64>> = (0..cols)
            .map(|c| (0..rows).map(|r| weights[r][c]).collect())
            .collect();
        let (col_to_row, total) = hungarian_max(&t);
        let mut row_to_col = vec![None; rows];
        for (c, r) in col_to_row.iter().enumerate() {
            if let Some(r) = r {
                row_to_col[*r] = Some(c);
            }
        }
        return (row_to_col, total);
    }

    // Minimize cost = -weight; 1-based arrays per the classic formulation.
    const INF: i64 = i64::MAX / 4;
    let n = rows;
    let m = cols;
    let cost = |i: usize, j: usize| -weights[i - 1][j - 1];
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; m + 1];
    let mut matched_row = vec![0usize; m + 1]; // column j -> row
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![INF; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = INF;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![None; rows];
    let mut total = 0i64;
    for j in 1..=m {
        let r = matched_row[j];
        if r > 0 && weights[r - 1][j - 1] > 0 {
            row_to_col[r - 1] = Some(j - 1);
            total += weights[r - 1][j - 1];
        }
    }
    (row_to_col, total)
}

/// Exhaustive maximum over all injective row-to-column maps. Exponential;
/// the test oracle for [`hungarian_max`] and the engine behind the scoring
/// module's brute-force mapping operation.
pub fn brute_force_max(weights: &[Vec<i64>]) -> (Vec<Option<usize>>, i64) {
    let rows = weights.len();
    let cols = weights.first().map_or(0, |r| r.len());
    let mut best_total = 0i64;
    let mut best: Vec<Option<usize>> = vec![None; rows];
    let mut current: Vec<Option<usize>> = vec![None; rows];
    let mut used = vec![false; cols];

    fn recurse(
        weights: &[Vec<i64>],
        row: usize,
        total: i64,
        current: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        best_total: &mut i64,
        best: &mut Vec<Option<usize>>,
    ) {
        if row == weights.len() {
            if total > *best_total {
                *best_total = total;
                best.clone_from(current);
            }
            return;
        }
        // Leave this row unmapped.
        current[row] = None;
        recurse(weights, row + 1, total, current, used, best_total, best);
        for c in 0..used.len() {
            if used[c] || weights[row][c] == 0 {
                continue;
            }
            used[c] = true;
            current[row] = Some(c);
            recurse(
                weights,
                row + 1,
                total + weights[row][c],
                current,
                used,
                best_total,
                best,
            );
            current[row] = None;
            used[c] = false;
        }
    }

    recurse(
        weights,
        0,
        0,
        &mut current,
        &mut used,
        &mut best_total,
        &mut best,
    );
    (best, best_total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_pair_maps_directly() {
        let (map, total) = hungarian_max(&[vec![7]]);
        assert_eq!(map, vec![Some(0)]);
        assert_eq!(total, 7);
    }

    #[test]
    fn zero_matrix_leaves_everything_unmapped() {
        let (map, total) = hungarian_max(&[vec![0, 0], vec![0, 0]]);
        assert_eq!(map, vec![None, None]);
        assert_eq!(total, 0);
        let (bmap, btotal) = brute_force_max(&[vec![0, 0], vec![0, 0]]);
        assert_eq!(btotal, 0);
        assert_eq!(bmap, vec![None, None]);
    }

    #[test]
    fn three_by_three_agrees_with_brute_force() {
        let w = vec![vec![5, 9, 1], vec![10, 3, 2], vec![8, 7, 4]];
        let (_, h) = hungarian_max(&w);
        let (_, b) = brute_force_max(&w);
        assert_eq!(h, b);
        assert_eq!(h, 9 + 10 + 4);
    }

    #[test]
    fn rectangular_both_orientations() {
        let wide = vec![vec![3, 0, 6, 1]];
        let (map, total) = hungarian_max(&wide);
        assert_eq!(map, vec![Some(2)]);
        assert_eq!(total, 6);

        let tall = vec![vec![3], vec![8], vec![2]];
        let (map, total) = hungarian_max(&tall);
        assert_eq!(map, vec![None, Some(0), None]);
        assert_eq!(total, 8);
    }

    proptest! {
        #[test]
        fn hungarian_total_matches_brute_force(
            rows in 1usize..6,
            cols in 1usize..6,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let w: Vec<Vec<i64>> = (0..rows)
                .map(|_| (0..cols).map(|_| rng.gen_range(0..1000)).collect())
                .collect();
            let (hmap, htotal) = hungarian_max(&w);
            let (_, btotal) = brute_force_max(&w);
            prop_assert_eq!(htotal, btotal);
            // The returned map must be injective and sum to the total.
            let mut seen = std::collections::HashSet::new();
            let mut sum = 0i64;
            for (r, c) in hmap.iter().enumerate() {
                if let Some(c) = c {
                    prop_assert!(seen.insert(*c));
                    sum += w[r][*c];
                }
            }
            prop_assert_eq!(sum, htotal);
        }
    }
}
