//! Lloyd's k-means with k-means++ seeding, used to initialize GANMM
//! pre-training.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numeric::mat::{squared_distance, Mat};
use crate::scalar::Real;

const MAX_ITERS: usize = 300;

#[derive(Clone, Debug)]
pub struct KmeansResult<F> {
    pub labels: Vec<usize>,
    pub centroids: Mat<F>,
    pub inertia: F,
}

/// Best-inertia clustering over `restarts` independent k-means++ starts.
/// Deterministic for a given (seed, restarts); assignment ties break toward
/// the lower centroid index and restart ties toward the earlier restart.
pub fn kmeans<F: Real>(
    points: &Mat<F>,
    k: usize,
    seed: u64,
    restarts: usize,
) -> Result<KmeansResult<F>> {
    let n = points.rows();
    if k == 0 || k > n {
        return Err(Error::Invalid(format!(
            "k must be in 1..={n} (number of points), got {k}"
        )));
    }
    if restarts == 0 {
        return Err(Error::Invalid("restarts must be at least 1".into()));
    }
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KmeansResult<F>> = None;
    for _ in 0..restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(master.gen());
        let run = lloyd(points, k, &mut rng);
        if best.as_ref().map_or(true, |b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn lloyd<F: Real>(points: &Mat<F>, k: usize, rng: &mut ChaCha8Rng) -> KmeansResult<F> {
    let n = points.rows();
    let d = points.cols();
    let mut centroids = plus_plus_init(points, k, rng);
    let mut labels = vec![usize::MAX; n];

    for _ in 0..MAX_ITERS {
        let new_labels: Vec<usize> = (0..n)
            .map(|i| nearest_centroid(points.row(i), &centroids))
            .collect();
        let changed = new_labels != labels;
        labels = new_labels;

        // Means per cluster.
        let mut sums: Mat<F> = Mat::zeros(k, d);
        let mut counts = vec![0usize; k];
        for (i, &c) in labels.iter().enumerate() {
            counts[c] += 1;
            for (s, &v) in sums.row_mut(c).iter_mut().zip(points.row(i)) {
                *s += v;
            }
        }
        let mut reseeded = false;
        let mut taken: Vec<usize> = Vec::new();
        for c in 0..k {
            if counts[c] == 0 {
                // Re-seed an empty cluster with the point farthest from its
                // own centroid, skipping points already taken this round.
                let far = (0..n)
                    .filter(|i| !taken.contains(i))
                    .max_by(|&a, &b| {
                        let da = squared_distance(points.row(a), centroids.row(labels[a]));
                        let db = squared_distance(points.row(b), centroids.row(labels[b]));
                        da.partial_cmp(&db)
                            .expect("finite distances")
                            .then(b.cmp(&a)) // ties toward the lower index
                    })
                    .expect("nonempty dataset");
                taken.push(far);
                centroids.row_mut(c).copy_from_slice(points.row(far));
                reseeded = true;
            } else {
                let inv = F::of(1.0 / counts[c] as f64);
                for (dst, &s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s * inv;
                }
            }
        }

        if !changed && !reseeded {
            break;
        }
    }

    let inertia = labels
        .iter()
        .enumerate()
        .map(|(i, &c)| squared_distance(points.row(i), centroids.row(c)))
        .sum();
    KmeansResult {
        labels,
        centroids,
        inertia,
    }
}

fn nearest_centroid<F: Real>(point: &[F], centroids: &Mat<F>) -> usize {
    let mut best = 0;
    let mut best_d = squared_distance(point, centroids.row(0));
    for c in 1..centroids.rows() {
        let d = squared_distance(point, centroids.row(c));
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

/// k-means++ seeding: first centroid uniform, each next drawn with
/// probability proportional to the squared distance to the nearest chosen
/// centroid.
fn plus_plus_init<F: Real>(points: &Mat<F>, k: usize, rng: &mut ChaCha8Rng) -> Mat<F> {
    let n = points.rows();
    let d = points.cols();
    let mut centroids = Mat::zeros(k, d);
    let first = rng.gen_range(0..n);
    centroids.row_mut(0).copy_from_slice(points.row(first));

    let mut dist2: Vec<F> = (0..n)
        .map(|i| squared_distance(points.row(i), centroids.row(0)))
        .collect();
    for c in 1..k {
        let total: F = dist2.iter().copied().sum();
        let chosen = if total > F::zero() {
            let mut target = F::of(rng.gen_range(0.0..1.0)) * total;
            let mut pick = n - 1;
            for (i, &w) in dist2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target = target - w;
            }
            pick
        } else {
            // All points coincide with chosen centroids.
            rng.gen_range(0..n)
        };
        centroids.row_mut(c).copy_from_slice(points.row(chosen));
        for (i, slot) in dist2.iter_mut().enumerate() {
            let dnew = squared_distance(points.row(i), centroids.row(c));
            if dnew < *slot {
                *slot = dnew;
            }
        }
    }
    centroids
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn two_clouds(seed: u64, n_per: usize, dist: f64, radius: f64) -> (Mat<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        for i in 0..2 * n_per {
            let cloud = i / n_per;
            let cx = cloud as f64 * dist;
            rows.push(vec![
                cx + rng.gen_range(-radius..radius),
                rng.gen_range(-radius..radius),
            ]);
            truth.push(cloud);
        }
        (Mat::from_rows(&rows).unwrap(), truth)
    }

    #[test]
    fn k1_returns_global_mean() {
        let points = Mat::from_rows(&[vec![0.0, 0.0], vec![2.0, 2.0], vec![4.0, -2.0]]).unwrap();
        let r = kmeans(&points, 1, 7, 3).unwrap();
        assert_eq!(r.labels, vec![0, 0, 0]);
        assert_abs_diff_eq!(r.centroids.get(0, 0), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.centroids.get(0, 1), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn separated_clouds_split_exactly() {
        let (points, truth) = two_clouds(3, 5, 10.0, 0.1);
        let r = kmeans(&points, 2, 11, 10).unwrap();
        // Brute force over all 2-partitions of 10 points agrees with the
        // cloud split as the inertia minimizer; check against truth up to
        // label swap.
        let brute = brute_force_best_two_partition(&points);
        let matches_truth = |labels: &[usize]| {
            let direct = labels == truth;
            let flipped: Vec<usize> = labels.iter().map(|&l| 1 - l).collect();
            direct || flipped == truth
        };
        assert!(matches_truth(&brute), "oracle should split the clouds");
        assert!(matches_truth(&r.labels), "kmeans should split the clouds");
        assert_abs_diff_eq!(r.inertia, partition_inertia(&points, &brute), epsilon = 1e-9);
    }

    fn partition_inertia(points: &Mat<f64>, labels: &[usize]) -> f64 {
        let d = points.cols();
        let mut sums = vec![vec![0.0; d]; 2];
        let mut counts = [0usize; 2];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (s, &v) in sums[l].iter_mut().zip(points.row(i)) {
                *s += v;
            }
        }
        let mut inertia = 0.0;
        for (i, &l) in labels.iter().enumerate() {
            if counts[l] == 0 {
                continue;
            }
            for (j, &v) in points.row(i).iter().enumerate() {
                let c = sums[l][j] / counts[l] as f64;
                inertia += (v - c) * (v - c);
            }
        }
        inertia
    }

    fn brute_force_best_two_partition(points: &Mat<f64>) -> Vec<usize> {
        let n = points.rows();
        assert!(n <= 16);
        let mut best = (f64::INFINITY, vec![0; n]);
        for mask in 0..(1u32 << n) {
            let labels: Vec<usize> = (0..n).map(|i| ((mask >> i) & 1) as usize).collect();
            let inertia = partition_inertia(points, &labels);
            if inertia < best.0 {
                best = (inertia, labels);
            }
        }
        best.1
    }

    #[test]
    fn duplicated_dataset_keeps_centroids() {
        let (points, _) = two_clouds(5, 6, 8.0, 0.2);
        let doubled_rows: Vec<Vec<f64>> = points
            .row_iter()
            .chain(points.row_iter())
            .map(|r| r.to_vec())
            .collect();
        let doubled = Mat::from_rows(&doubled_rows).unwrap();
        let a = kmeans(&points, 2, 17, 10).unwrap();
        let b = kmeans(&doubled, 2, 23, 10).unwrap();
        // Compare centroid sets with tolerance, order-insensitive.
        let mut found = 0;
        for i in 0..2 {
            for j in 0..2 {
                if squared_distance(a.centroids.row(i), b.centroids.row(j)) < 1e-9 {
                    found += 1;
                }
            }
        }
        assert_eq!(found, 2, "duplicating every point must not move centroids");
        assert_abs_diff_eq!(b.inertia, 2.0 * a.inertia, epsilon = 1e-9);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let (points, _) = two_clouds(9, 8, 4.0, 0.5);
        let a = kmeans(&points, 3, 41, 5).unwrap();
        let b = kmeans(&points, 3, 41, 5).unwrap();
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.centroids, b.centroids);
        assert_eq!(a.inertia, b.inertia);
    }

    #[test]
    fn k_greater_than_n_rejected() {
        let points = Mat::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(kmeans(&points, 3, 1, 1).is_err());
    }

    #[test]
    fn more_clusters_than_distinct_points_still_terminates() {
        let points =
            Mat::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0], vec![1.0, 1.0], vec![1.0, 1.0]])
                .unwrap();
        let r = kmeans(&points, 2, 2, 2).unwrap();
        assert_eq!(r.labels.len(), 4);
        assert_abs_diff_eq!(r.inertia, 0.0, epsilon = 1e-12);
    }
}
