//! Property tests for the scoring, ranking, selection and clustering rules.

use std::collections::BTreeSet;

use lpselect_core::analytics::tau_counts;
use lpselect_core::selector::bucket_sizes;
use lpselect_core::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn trace(id: &str, ppl: Vec<f64>) -> PerplexityTrace {
    PerplexityTrace::new(id, ppl).unwrap()
}

/// O(n^2) concordant-minus-discordant and tie counts.
fn brute_counts<T: Ord>(a: &[T], b: &[T]) -> (i64, u64, u64) {
    let (mut score, mut ties_a, mut ties_b) = (0i64, 0u64, 0u64);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            let (x, y) = (a[i].cmp(&a[j]), b[i].cmp(&b[j]));
            ties_a += u64::from(x.is_eq());
            ties_b += u64::from(y.is_eq());
            if !x.is_eq() && !y.is_eq() {
                score += if x == y { 1 } else { -1 };
            }
        }
    }
    (score, ties_a, ties_b)
}

fn ppl_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1.0f64..1000.0, 2..8)
}

proptest! {
    #[test]
    fn lp_sums_to_one_over_epochs(ppl in ppl_strategy()) {
        let t = trace("x", ppl.clone());
        prop_assume!((ppl[0] - ppl[ppl.len() - 1]).abs() > 1e-3);
        let sum: f64 = (1..ppl.len()).map(|i| lp_exact(&t, i, 1e-9).unwrap().value).sum();
        prop_assert!((sum - 1.0).abs() < 1e-9, "sum {sum}");
    }

    #[test]
    fn lp_exact_is_scale_invariant(ppl in ppl_strategy(), c in 0.01f64..100.0) {
        prop_assume!((ppl[0] - ppl[ppl.len() - 1]).abs() > 1e-3);
        let a = trace("x", ppl.clone());
        let b = trace("x", ppl.iter().map(|p| p * c).collect());
        for i in 1..ppl.len() {
            let (va, vb) = (lp_exact(&a, i, 1e-9).unwrap().value, lp_exact(&b, i, 1e-9).unwrap().value);
            prop_assert!((va - vb).abs() < 1e-9);
        }
    }

    #[test]
    fn lp_app_ranking_survives_common_scale(traces in prop::collection::vec(ppl_strategy(), 2..30), c in 0.01f64..100.0) {
        let mk = |scale: f64| -> Vec<ScoreRecord> {
            traces.iter().enumerate()
                .map(|(i, p)| lp_approx(&trace(&format!("t{i:03}"), p.iter().map(|x| x * scale).collect()), 1).unwrap())
                .collect()
        };
        // values can differ in the last ulp after scaling, so compare with ties collapsed
        let a = mk(1.0);
        let b = mk(c);
        let ra = rank_ascending(&a).unwrap();
        let rb = rank_ascending(&b).unwrap();
        let value_of = |s: &[ScoreRecord], id: &str| s.iter().find(|r| r.id == id).unwrap().value;
        for (x, y) in ra.iter().zip(&rb) {
            if x != y {
                prop_assert!((value_of(&a, x) - value_of(&a, y)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ranking_is_a_stable_permutation(values in prop::collection::vec(-2.0f64..2.0, 1..60)) {
        let scores: Vec<ScoreRecord> = values.iter().enumerate()
            .map(|(i, v)| ScoreRecord { id: format!("s{i:03}"), metric: Metric::Lp, epoch: 1, value: *v, degenerate: false })
            .collect();
        let rank = rank_ascending(&scores).unwrap();
        let ids: BTreeSet<&String> = rank.iter().collect();
        prop_assert_eq!(ids.len(), scores.len());
        let mut reversed = scores.clone();
        reversed.reverse();
        prop_assert_eq!(&rank, &rank_ascending(&reversed).unwrap());
        let value = |id: &str| scores.iter().find(|s| s.id == id).unwrap().value;
        for w in rank.windows(2) {
            let (a, b) = (value(&w[0]), value(&w[1]));
            prop_assert!(a < b || (a == b && w[0] < w[1]));
        }
    }

    #[test]
    fn fast_tau_counts_match_brute_force(pairs in prop::collection::vec((0u8..6, 0u8..6), 2..80)) {
        let a: Vec<u8> = pairs.iter().map(|p| p.0).collect();
        let b: Vec<u8> = pairs.iter().map(|p| p.1).collect();
        let fast = tau_counts(&a, &b);
        let (score, ties_a, ties_b) = brute_counts(&a, &b);
        prop_assert_eq!(fast.score(), score);
        prop_assert_eq!(fast.ties_a, ties_a);
        prop_assert_eq!(fast.ties_b, ties_b);
    }

    #[test]
    fn buckets_partition_each_cluster(sizes in prop::collection::vec(1usize..60, 1..8)) {
        let mut ranking = Vec::new();
        let mut clusters = Vec::new();
        for (c, &m) in sizes.iter().enumerate() {
            for j in 0..m {
                let id = format!("c{c}-{j:03}");
                ranking.push(id.clone());
                clusters.push(ClusterAssignment { id, cluster: c });
            }
        }
        let grouped = ClusterRanking::new(&ranking, &clusters).unwrap();
        let p = partition_buckets(&grouped, &SelectionParams::bucket(Bucket::Low));
        let total = p.low.len() + p.mid.len() + p.high.len();
        prop_assert_eq!(total, ranking.len());
        let all: BTreeSet<&String> = p.low.ids.iter().chain(&p.mid.ids).chain(&p.high.ids).collect();
        prop_assert_eq!(all.len(), ranking.len());
        for &m in &sizes {
            let [l, mi, h] = bucket_sizes(m);
            prop_assert_eq!(l + mi + h, m);
            prop_assert!(l >= mi && mi >= h && l - h <= 1);
        }
    }

    #[test]
    fn clust_rand_matches_topk_sizes(sizes in prop::collection::vec(1usize..40, 1..6), f in 1.0f64..100.0, seed in any::<u64>()) {
        let mut ranking = Vec::new();
        let mut clusters = Vec::new();
        for (c, &m) in sizes.iter().enumerate() {
            for j in 0..m {
                let id = format!("c{c}-{j:03}");
                ranking.push(id.clone());
                clusters.push(ClusterAssignment { id, cluster: c });
            }
        }
        let grouped = ClusterRanking::new(&ranking, &clusters).unwrap();
        let top = select_topk_low(&grouped, &SelectionParams::topk_low(f)).unwrap();
        let rand = select_clust_rand(&clusters, &SelectionParams::clust_rand(f, seed), seed).unwrap();
        prop_assert_eq!(top.len(), rand.len());
        prop_assert!(rand.validate().is_ok());
        prop_assert_eq!(rand, select_clust_rand(&clusters, &SelectionParams::clust_rand(f, seed), seed).unwrap());
    }

    #[test]
    fn kmeans_inertia_never_increases(seed in any::<u64>(), n in 10usize..80, k in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<EmbeddingRecord> = (0..n)
            .map(|i| EmbeddingRecord { id: format!("p{i:03}"), vec: (0..4).map(|_| rng.random::<f64>() - 0.5).collect() })
            .collect();
        let cfg = ClusterConfig { k: ClusterCount::Fixed(k), seed, ..Default::default() };
        let r = kmeans(&points, &cfg).unwrap();
        for w in r.inertia_history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12, "{:?}", r.inertia_history);
        }
        assert_nearest(&points, &r);
    }
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter().map(|x| x / n).collect()
    } else {
        v.to_vec()
    }
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn assert_nearest(points: &[EmbeddingRecord], r: &KMeansResult) {
    for (p, a) in points.iter().zip(&r.assignments) {
        assert_eq!(p.id, a.id);
        let x = normalized(&p.vec);
        let own = sq(&x, &r.centroids[a.cluster]);
        let best = r.centroids.iter().map(|c| sq(&x, c)).fold(f64::INFINITY, f64::min);
        assert!(own <= best + 1e-12, "{} is not assigned to its nearest centroid", p.id);
    }
}

#[test]
fn recovers_separated_blobs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let centers: [[f64; 4]; 4] =
        [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]];
    let noise = Normal::new(0.0, 0.05).unwrap();
    let mut points = Vec::new();
    let mut truth = Vec::new();
    for i in 0..800 {
        let c = i % 4;
        let vec = centers[c].iter().map(|m| m + noise.sample(&mut rng)).collect();
        points.push(EmbeddingRecord { id: format!("p{i:04}"), vec });
        truth.push(c);
    }
    let r = kmeans(&points, &ClusterConfig { k: ClusterCount::Fixed(4), seed: 3, ..Default::default() }).unwrap();
    assert!(r.converged);
    // majority label per found cluster
    let mut agree = 0;
    for found in 0..r.k() {
        let mut counts = [0usize; 4];
        for (a, t) in r.assignments.iter().zip(&truth) {
            if a.cluster == found {
                counts[*t] += 1;
            }
        }
        agree += counts.iter().max().unwrap();
    }
    assert!(agree as f64 / points.len() as f64 >= 0.99, "recovered {agree}/800");
}

#[test]
fn auto_cluster_count_matches_fifty_per_cluster() {
    assert_eq!(auto_cluster_count(15_000, 50), 300);
    assert_eq!(auto_cluster_count(10, 50), 1);
}

#[test]
fn synthetic_populations_rank_as_labelled() {
    let set = synth_traces(&SynthSpec { n_easy: 50, n_hard: 10, n_noisy: 5, seed: 2, ..Default::default() });
    let scores: Vec<ScoreRecord> = set.traces.iter().map(|t| lp_exact(t, 1, 1e-9).unwrap()).collect();
    let rank = rank_ascending(&scores).unwrap();
    assert!(rank[..15].iter().all(|id| !id.starts_with("easy")), "{:?}", &rank[..15]);
}

#[test]
fn trainer_is_reproducible() {
    let corpus: Vec<SampleRecord> = (0..30)
        .map(|i| SampleRecord::new(format!("r{i:02}"), format!("Echo number {i}."), "", format!("{i}{i}{i}")))
        .collect();
    let cfg = TrainerConfig { epochs: 2, hidden_dim: 8, embed_dim: 4, seed: 5, ..Default::default() };
    let a = train_and_trace(&corpus, &cfg).unwrap();
    let b = train_and_trace(&corpus, &cfg).unwrap();
    assert_eq!(a.traces, b.traces);
    for t in &a.traces {
        assert!((t.initial() - 258.0).abs() < 1e-6);
        assert_eq!(t.epochs(), 2);
    }
}
