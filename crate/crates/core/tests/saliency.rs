use proptest::prelude::*;
use vosprop_core::saliency::{
    barrier_from_seeds, barrier_two_pass, build_flow_mst, cluster_boundary_flow, flow_edge_weight,
    grid_edges, kmeans, min_barrier_distance, BoundarySpec, SpanningTree,
};
use vosprop_core::{FlowDirection, FlowField};

fn field(w: usize, h: usize, v: Vec<[f32; 2]>) -> FlowField {
    FlowField::new(w, h, FlowDirection::Forward, v).unwrap()
}

/// Random flow fields: a few constant blobs on noise, quantized so that ties occur.
fn flow_field() -> impl Strategy<Value = FlowField> {
    (2usize..=32, 2usize..=32).prop_flat_map(|(w, h)| {
        prop::collection::vec((-8i32..=8, -8i32..=8), w * h).prop_map(move |v| {
            field(
                w,
                h,
                v.into_iter()
                    .map(|(a, b)| [a as f32 * 0.25, b as f32 * 0.25])
                    .collect(),
            )
        })
    })
}

fn children(tree: &SpanningTree) -> Vec<Vec<(usize, f64)>> {
    let n = tree.parent.len();
    let mut adj = vec![Vec::new(); n];
    for p in 0..n {
        if p != tree.root {
            let q = tree.parent[p];
            adj[p].push((q, tree.edge_weight[p]));
            adj[q].push((p, tree.edge_weight[p]));
        }
    }
    adj
}

/// Barrier distance by recursive search from every seed over the tree.
fn barrier_oracle(tree: &SpanningTree, seeds: &[usize]) -> Vec<f64> {
    fn visit(adj: &[Vec<(usize, f64)>], p: usize, from: usize, hi: f64, lo: f64, best: &mut [f64]) {
        for &(q, w) in &adj[p] {
            if q != from {
                let (h, l) = (hi.max(w), lo.min(w));
                best[q] = best[q].min(h - l);
                visit(adj, q, p, h, l, best);
            }
        }
    }
    let adj = children(tree);
    let mut best = vec![f64::INFINITY; adj.len()];
    for &s in seeds {
        best[s] = 0.0;
        visit(
            &adj,
            s,
            usize::MAX,
            f64::NEG_INFINITY,
            f64::INFINITY,
            &mut best,
        );
    }
    best
}

fn is_spanning_tree(n: usize, edges: &[(usize, usize)]) -> bool {
    if edges.len() + 1 != n {
        return false;
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        if p[x] == x {
            x
        } else {
            let r = find(p, p[x]);
            p[x] = r;
            r
        }
    }
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra == rb {
            return false;
        }
        parent[ra] = rb;
    }
    true
}

fn edge_weights(flow: &FlowField) -> Vec<(usize, usize, f64)> {
    let w = flow.width();
    grid_edges(flow.width(), flow.height())
        .into_iter()
        .map(|(p, q)| {
            (
                p,
                q,
                flow_edge_weight(flow.at(p % w, p / w), flow.at(q % w, q / w)),
            )
        })
        .collect()
}

/// Prim's algorithm on the grid graph, O(n^2).
fn prim_weight(flow: &FlowField) -> f64 {
    let n = flow.width() * flow.height();
    let mut adj = vec![Vec::new(); n];
    for (p, q, w) in edge_weights(flow) {
        adj[p].push((q, w));
        adj[q].push((p, w));
    }
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    dist[0] = 0.0;
    let mut total = 0.0;
    for _ in 0..n {
        let u = (0..n)
            .filter(|&i| !done[i])
            .min_by(|&a, &b| dist[a].total_cmp(&dist[b]))
            .unwrap();
        done[u] = true;
        total += dist[u];
        for &(v, w) in &adj[u] {
            if !done[v] && w < dist[v] {
                dist[v] = w;
            }
        }
    }
    total
}

fn tree_edges(tree: &SpanningTree) -> Vec<(usize, usize)> {
    (0..tree.parent.len())
        .filter(|&p| p != tree.root)
        .map(|p| (p, tree.parent[p]))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn exact_barrier_matches_search_oracle(flow in flow_field()) {
        let tree = build_flow_mst(&flow);
        let (w, h) = flow.dims();
        let band = BoundarySpec::new(1);
        let got = min_barrier_distance(&tree, band).unwrap();
        let want = barrier_oracle(&tree, &band.pixels(w, h));
        for (a, b) in got.values().iter().zip(&want) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn kruskal_matches_prim(flow in flow_field()) {
        let tree = build_flow_mst(&flow);
        prop_assert!(is_spanning_tree(tree.parent.len(), &tree_edges(&tree)));
        prop_assert!((tree.total_weight() - prim_weight(&flow)).abs() <= 1e-9);
    }

    #[test]
    fn more_seeds_never_raise_the_barrier(
        flow in flow_field(),
        picks in prop::collection::vec(any::<prop::sample::Index>(), 1..8),
        extra in prop::collection::vec(any::<prop::sample::Index>(), 1..8),
    ) {
        let tree = build_flow_mst(&flow);
        let n = tree.parent.len();
        let seeds: Vec<usize> = picks.iter().map(|i| i.index(n)).collect();
        let mut more = seeds.clone();
        more.extend(extra.iter().map(|i| i.index(n)));
        let a = barrier_from_seeds(&tree, &seeds);
        let b = barrier_from_seeds(&tree, &more);
        prop_assert!(a.iter().zip(&b).all(|(x, y)| y <= x));
        prop_assert!(seeds.iter().all(|&s| a[s] == 0.0));
    }

    #[test]
    fn two_pass_never_undercuts_exact(flow in flow_field()) {
        let tree = build_flow_mst(&flow);
        let (w, h) = flow.dims();
        let seeds = BoundarySpec::new(1).pixels(w, h);
        let exact = barrier_from_seeds(&tree, &seeds);
        let approx = barrier_two_pass(&tree, &seeds);
        // Each two-pass value is the barrier of some real seed path.
        prop_assert!(exact.iter().zip(&approx).all(|(e, a)| *a >= e - 1e-12));
    }
}

#[test]
fn kruskal_is_minimal_on_3x3_by_enumeration() {
    let mut rng = 12345u64;
    for _ in 0..20 {
        let v: Vec<[f32; 2]> = (0..9)
            .map(|_| {
                rng = rng
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                [((rng >> 33) % 7) as f32, ((rng >> 45) % 5) as f32]
            })
            .collect();
        let flow = field(3, 3, v);
        let edges = edge_weights(&flow);
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << edges.len()) {
            if mask.count_ones() != 8 {
                continue;
            }
            let chosen: Vec<_> = (0..edges.len()).filter(|&i| mask >> i & 1 == 1).collect();
            let pairs: Vec<_> = chosen.iter().map(|&i| (edges[i].0, edges[i].1)).collect();
            if is_spanning_tree(9, &pairs) {
                best = best.min(chosen.iter().map(|&i| edges[i].2).sum());
            }
        }
        assert_eq!(build_flow_mst(&flow).total_weight(), best);
    }
}

#[test]
fn barrier_of_a_step() {
    // Left half still, right half moving: the barrier across the step is the jump.
    let v = (0..6 * 4)
        .map(|p| if p % 6 >= 3 { [3.0, 0.0] } else { [0.0, 0.0] })
        .collect();
    let tree = build_flow_mst(&field(6, 4, v));
    let d = barrier_from_seeds(&tree, &[0]);
    for (p, &x) in d.iter().enumerate() {
        assert_eq!(x, if p % 6 >= 3 { 3.0 } else { 0.0 });
    }
}

#[test]
fn two_pass_error_is_small_on_blob_fields() {
    let mut rel = Vec::new();
    for seed in 0..40u64 {
        let (w, h) = (32, 32);
        let mut s = seed.wrapping_mul(0x9e3779b97f4a7c15) | 1;
        let mut next = || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s % 10_000) as f64 / 10_000.0
        };
        let (cx, cy, r) = (8.0 + 16.0 * next(), 8.0 + 16.0 * next(), 4.0 + 6.0 * next());
        let m = [4.0 * next() - 2.0, 4.0 * next() - 2.0];
        let v = (0..w * h)
            .map(|p| {
                let (x, y) = ((p % w) as f64, (p / w) as f64);
                let inside = (x - cx).powi(2) + (y - cy).powi(2) <= r * r;
                let base = if inside { m } else { [0.0, 0.0] };
                [
                    (base[0] + 0.3 * next()) as f32,
                    (base[1] + 0.3 * next()) as f32,
                ]
            })
            .collect();
        let tree = build_flow_mst(&field(w, h, v));
        let seeds = BoundarySpec::new(1).pixels(w, h);
        let exact = barrier_from_seeds(&tree, &seeds);
        let approx = barrier_two_pass(&tree, &seeds);
        for (e, a) in exact.iter().zip(&approx) {
            if *e > 0.0 {
                rel.push((a - e).abs() / e);
            }
        }
    }
    let mean = rel.iter().sum::<f64>() / rel.len() as f64;
    assert!(mean <= 0.05, "mean relative error {mean}");
}

#[test]
fn kmeans_finds_separated_groups() {
    let mut pts = Vec::new();
    for (cx, cy) in [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)] {
        for i in 0..30 {
            let t = i as f64 * 0.7;
            pts.push([cx + 0.3 * t.sin(), cy + 0.3 * t.cos()]);
        }
    }
    let (centers, counts) = kmeans(&pts, 3, 7);
    let mut sorted: Vec<_> = centers
        .iter()
        .map(|c| [c[0].round(), c[1].round()])
        .collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(sorted, vec![[0.0, 0.0], [0.0, 10.0], [10.0, 0.0]]);
    assert_eq!(counts, vec![30, 30, 30]);

    let (one, n) = kmeans(&pts, 1, 0);
    let mean = pts
        .iter()
        .fold([0.0, 0.0], |a, p| [a[0] + p[0] / 90.0, a[1] + p[1] / 90.0]);
    assert!((one[0][0] - mean[0]).abs() < 1e-12 && (one[0][1] - mean[1]).abs() < 1e-12);
    assert_eq!(n, vec![90]);

    let (same, n) = kmeans(&[[1.0, 2.0]; 5], 3, 0);
    assert_eq!((same, n), (vec![[1.0, 2.0]], vec![5]));
}

#[test]
fn constant_boundary_flow_is_one_cluster() {
    let flow = FlowField::constant(20, 20, FlowDirection::Forward, [1.5, -0.5]).unwrap();
    let c = cluster_boundary_flow(&flow, BoundarySpec::new(3), 3, 1.0 / 6.0, 0).unwrap();
    assert_eq!(c.centers, vec![[1.5, -0.5]]);
    assert_eq!(c.assignment_fractions, vec![1.0]);
}
