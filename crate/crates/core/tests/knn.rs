use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vosprop_core::knn::{KnnIndex, Neighbor};
use vosprop_core::KnnParams;

fn unit_points(n: usize, dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n * dim);
    for _ in 0..n {
        let p: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        data.extend(p.iter().map(|x| x / norm));
    }
    data
}

/// Brute force over raw coordinates, sorted by (distance, id).
fn scan(
    data: &[f64],
    dim: usize,
    frames: &[usize],
    q: usize,
    k: usize,
    window: usize,
) -> Vec<Neighbor> {
    let qp = &data[q * dim..(q + 1) * dim];
    let mut all: Vec<Neighbor> = (0..frames.len())
        .filter(|&j| j != q && frames[j].abs_diff(frames[q]) <= window)
        .map(|j| Neighbor {
            id: j,
            dist: data[j * dim..(j + 1) * dim]
                .iter()
                .zip(qp)
                .map(|(a, b)| (a - b) * (a - b))
                .sum(),
        })
        .collect();
    all.sort_by(|a, b| a.dist.total_cmp(&b.dist).then(a.id.cmp(&b.id)));
    all.truncate(k);
    all
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exact_mode_is_a_linear_scan(
        n in 2usize..300,
        dim in 1usize..8,
        seed in any::<u64>(),
        k in 1usize..20,
        window in 0usize..4,
    ) {
        let data = unit_points(n, dim, seed);
        let frames: Vec<usize> = (0..n).map(|i| i % 6).collect();
        let params = KnnParams { exact: true, ..KnnParams::default() };
        let index = KnnIndex::new(dim, data.clone(), frames.clone(), params, seed).unwrap();
        for q in (0..n).step_by(7) {
            let want = scan(&data, dim, &frames, q, k, window);
            prop_assert_eq!(index.query(q, k, window).unwrap(), want.clone());
            prop_assert_eq!(index.query_exact(q, k, window).unwrap(), want);
        }
    }

    #[test]
    fn forest_results_are_valid_neighbours(
        n in 2usize..400,
        seed in any::<u64>(),
        window in 0usize..3,
    ) {
        let dim = 6;
        let data = unit_points(n, dim, seed);
        let frames: Vec<usize> = (0..n).map(|i| i % 5).collect();
        let params = KnnParams { trees: 2, leaf_size: 4, checks: 32, exact: false };
        let index = KnnIndex::new(dim, data.clone(), frames.clone(), params, seed).unwrap();
        for q in (0..n).step_by(11) {
            let got = index.query(q, 10, window).unwrap();
            let all = scan(&data, dim, &frames, q, usize::MAX, window);
            prop_assert_eq!(got.len(), all.len().min(10));
            prop_assert!(got.windows(2).all(|w| (w[0].dist, w[0].id) <= (w[1].dist, w[1].id)));
            for nb in &got {
                prop_assert!(nb.id != q && frames[nb.id].abs_diff(frames[q]) <= window);
                let d: f64 = (0..dim).map(|c| (data[nb.id * dim + c] - data[q * dim + c]).powi(2)).sum();
                prop_assert_eq!(nb.dist, d);
            }
        }
    }
}

#[test]
fn budget_covering_the_window_is_exact() {
    let (n, dim) = (600, 5);
    let data = unit_points(n, dim, 3);
    let frames: Vec<usize> = (0..n).map(|i| i / 20).collect();
    // A window of 2 frames holds at most 100 points.
    let params = KnnParams {
        trees: 2,
        leaf_size: 8,
        checks: 100,
        exact: false,
    };
    let index = KnnIndex::new(dim, data.clone(), frames.clone(), params, 9).unwrap();
    for q in [0, 59, 300, 599] {
        assert_eq!(
            index.query(q, 30, 2).unwrap(),
            scan(&data, dim, &frames, q, 30, 2)
        );
    }
}

#[test]
fn default_forest_recall_at_40() {
    let (n, dim, k) = (10_000, 59, 40);
    let data = unit_points(n, dim, 2024);
    let frames = vec![0; n];
    let index = KnnIndex::new(dim, data, frames, KnnParams::default(), 1).unwrap();
    let mut searcher = index.searcher();
    let mut hits = 0;
    let queries: Vec<usize> = (0..n).step_by(50).collect();
    for &q in &queries {
        let want = index.query_exact(q, k, 0).unwrap();
        let got = searcher.query(q, k, 0).unwrap();
        hits += got
            .iter()
            .filter(|g| want.iter().any(|w| w.id == g.id))
            .count();
    }
    let recall = hits as f64 / (queries.len() * k) as f64;
    assert!(recall >= 0.9, "recall@40 = {recall}");
}
