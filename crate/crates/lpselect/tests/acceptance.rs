//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any fails.
//!
//! Runs with `cargo test -p lpselect --test acceptance`; output is printed
//! without `--nocapture` because this target has no libtest harness.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use lpselect_core::analytics::{kendall_tau, kendall_tau_values, random_iou_baseline};
use lpselect_core::selector::bucket_sizes;
use lpselect_core::trainer::{planted_corpus, Difficulty, PlantedSpec};
use lpselect_core::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

// ---------------------------------------------------------------------------
// 1. formula oracle

fn formula_oracle() -> Outcome {
    let t = |ppl: &[f64]| PerplexityTrace::new("t", ppl.to_vec()).unwrap();
    let exact_cases: [(&[f64], f64, bool); 4] = [
        (&[100.0, 40.0, 20.0, 10.0], 60.0 / 90.0, false),
        (&[50.0, 10.0, 10.0, 10.0], 1.0, false),
        (&[50.0, 50.0, 20.0, 10.0], 0.0, false),
        (&[30.0, 30.0, 30.0, 30.0], 1.0, true),
    ];
    for (ppl, want, degenerate) in exact_cases {
        let s = lp_exact(&t(ppl), 1, 1e-9).map_err(|e| e.to_string())?;
        check((s.value - want).abs() <= 1e-12 && s.degenerate == degenerate, format!("lp {ppl:?} -> {s:?}"))?;
    }
    let approx_cases: [(&[f64], f64); 3] = [(&[100.0, 40.0], 0.6), (&[100.0, 100.0], 0.0), (&[100.0, 120.0], -0.2)];
    for (ppl, want) in approx_cases {
        let s = lp_approx(&t(ppl), 1).map_err(|e| e.to_string())?;
        check((s.value - want).abs() <= 1e-12, format!("lp_app {ppl:?} -> {}", s.value))?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < 1000 {
        let n = rng.random_range(1..=10);
        let ppl: Vec<f64> = (0..=n).map(|_| rng.random_range(1.0..500.0)).collect();
        if (ppl[0] - ppl[n]).abs() < 1e-6 {
            continue;
        }
        let tr = t(&ppl);
        let sum: f64 = (1..=n).map(|i| lp_exact(&tr, i, 1e-9).unwrap().value).sum();
        worst = worst.max((sum - 1.0).abs());
        done += 1;
    }
    check(worst <= 1e-9, format!("telescoping error {worst:e}"))?;
    Ok(format!("7 tabulated cases exact to 1e-12; 1000 traces sum to 1 (max err {worst:.1e})"))
}

// ---------------------------------------------------------------------------
// 2. rank statistic oracle

fn brute_tau(a: &[String], b: &[String]) -> f64 {
    let pos: HashMap<&String, usize> = b.iter().enumerate().map(|(i, id)| (id, i)).collect();
    let p: Vec<usize> = a.iter().map(|id| pos[id]).collect();
    let mut score = 0i64;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            score += if p[i] < p[j] { 1 } else { -1 };
        }
    }
    let pairs = (p.len() * (p.len() - 1) / 2) as f64;
    score as f64 / pairs
}

fn rank_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for trial in 0..200 {
        let n = rng.random_range(2..=500);
        let a: Vec<String> = (0..n).map(|i| format!("x{i:03}")).collect();
        let mut b = a.clone();
        b.shuffle(&mut rng);
        let fast = kendall_tau(&a, &b).map_err(|e| e.to_string())?;
        let slow = brute_tau(&a, &b);
        check(fast == slow, format!("trial {trial} n={n}: fast {fast} brute {slow}"))?;
    }
    let a: Vec<String> = (0..100).map(|i| format!("x{i:03}")).collect();
    let rev: Vec<String> = a.iter().rev().cloned().collect();
    check(kendall_tau(&a, &a).unwrap() == 1.0, "identity")?;
    check(kendall_tau(&a, &rev).unwrap() == -1.0, "reversal")?;
    Ok("200 random permutations (n <= 500) equal brute force exactly; identity 1, reversal -1".into())
}

// ---------------------------------------------------------------------------
// 3. partition invariants

fn partition_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut clusters = Vec::new();
    let mut ranking = Vec::new();
    let mut sizes = Vec::new();
    for c in 0..500 {
        let m = rng.random_range(1..=100);
        sizes.push(m);
        for j in 0..m {
            let id = format!("c{c:03}-{j:03}");
            clusters.push(ClusterAssignment { id: id.clone(), cluster: c });
            ranking.push(id);
        }
    }
    ranking.shuffle(&mut rng);
    let grouped = ClusterRanking::new(&ranking, &clusters).map_err(|e| e.to_string())?;
    let parts = partition_buckets(&grouped, &SelectionParams::bucket(Bucket::Low));

    let label: HashMap<&str, Bucket> =
        Bucket::ALL.iter().flat_map(|b| parts.get(*b).ids.iter().map(move |id| (id.as_str(), *b))).collect();
    let total = parts.low.len() + parts.mid.len() + parts.high.len();
    check(label.len() == total, "buckets overlap")?;
    check(total == ranking.len(), "buckets are not exhaustive")?;

    // walk each cluster in rank order: labels must run Low.. Mid.. High..
    let cluster_of: HashMap<&str, usize> = clusters.iter().map(|a| (a.id.as_str(), a.cluster)).collect();
    let mut seq: BTreeMap<usize, Vec<Bucket>> = BTreeMap::new();
    for id in &ranking {
        seq.entry(cluster_of[id.as_str()]).or_default().push(label[id.as_str()]);
    }
    for (c, labels) in &seq {
        check(labels.windows(2).all(|w| w[0] <= w[1]), format!("cluster {c} buckets not rank-contiguous"))?;
        let count = |b| labels.iter().filter(|x| **x == b).count();
        let got = [count(Bucket::Low), count(Bucket::Mid), count(Bucket::High)];
        let m = sizes[*c];
        let (q, r) = (m / 3, m % 3);
        let want = [q + usize::from(r >= 1), q + usize::from(r >= 2), q];
        check(got == want && got == bucket_sizes(m), format!("cluster {c} (size {m}) sizes {got:?}"))?;
    }
    Ok(format!("500 clusters, {total} ids: disjoint, exhaustive, balanced low-first, contiguous"))
}

// ---------------------------------------------------------------------------
// 4. clustering invariants

fn normalized(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn clustering_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut runs = 0;
    for (n, d, k) in [(1000, 16, 20), (500, 8, 7), (300, 32, 3)] {
        let points: Vec<EmbeddingRecord> = (0..n)
            .map(|i| EmbeddingRecord {
                id: format!("p{i:04}"),
                vec: (0..d).map(|_| rng.random::<f64>() - 0.5).collect(),
            })
            .collect();
        for seed in 0..3 {
            let r = kmeans(&points, &ClusterConfig { k: ClusterCount::Fixed(k), seed, ..Default::default() })
                .map_err(|e| e.to_string())?;
            check(
                r.inertia_history.windows(2).all(|w| w[1] <= w[0] + 1e-12),
                format!("inertia increased: {:?}", r.inertia_history),
            )?;
            for (p, a) in points.iter().zip(&r.assignments) {
                let x = normalized(&p.vec);
                let own = sq(&x, &r.centroids[a.cluster]);
                let best = r.centroids.iter().map(|c| sq(&x, c)).fold(f64::INFINITY, f64::min);
                check(own <= best + 1e-12, format!("{} not at nearest centroid", p.id))?;
            }
            runs += 1;
        }
    }

    let noise = Normal::new(0.0, 0.05).unwrap();
    let mut points = Vec::new();
    let mut truth = Vec::new();
    for i in 0..2000 {
        let c = i % 4;
        let mut v = [0.0; 8];
        v[2 * c] = 1.0;
        let vec = v.iter().map(|m| m + noise.sample(&mut rng)).collect();
        points.push(EmbeddingRecord { id: format!("b{i:04}"), vec });
        truth.push(c);
    }
    let r = kmeans(&points, &ClusterConfig { k: ClusterCount::Fixed(4), seed: 7, ..Default::default() })
        .map_err(|e| e.to_string())?;
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
    let recovery = agree as f64 / points.len() as f64;
    check(recovery >= 0.99, format!("blob recovery {recovery:.4}"))?;
    let auto = auto_cluster_count(15_000, 50);
    check(auto == 300, format!("auto cluster count {auto}"))?;
    Ok(format!("{runs} runs monotone + nearest-centroid; blob recovery {:.1}%; auto k = {auto}", recovery * 100.0))
}

// ---------------------------------------------------------------------------
// 5-7. planted corpus, reference trainer at two sizes

struct Planted {
    labels: HashMap<String, Difficulty>,
    scores_64: Vec<ScoreRecord>,
    scores_16: Vec<ScoreRecord>,
    train_64: Duration,
    train_16: Duration,
}

fn lp1(set: &TraceSet) -> Vec<ScoreRecord> {
    set.traces.iter().map(|t| lp_exact(t, 1, 1e-9).unwrap()).collect()
}

fn train_planted() -> Planted {
    let corpus = planted_corpus(&PlantedSpec { n: 2000, hard_fraction: 0.1, noisy_fraction: 0.0, seed: 0 });
    let records: Vec<SampleRecord> = corpus.iter().map(|p| p.record.clone()).collect();
    let labels = corpus.iter().map(|p| (p.record.id.clone(), p.difficulty)).collect();
    let run = |hidden_dim| {
        let start = Instant::now();
        let set = train_and_trace(&records, &TrainerConfig { hidden_dim, ..Default::default() }).unwrap();
        (lp1(&set), start.elapsed())
    };
    let (scores_64, train_64) = run(64);
    let (scores_16, train_16) = run(16);
    Planted { labels, scores_64, scores_16, train_64, train_16 }
}

fn top_fraction(scores: &[ScoreRecord], percent: f64) -> Vec<String> {
    let ranking = ClusterRanking::single(rank_ascending(scores).unwrap());
    select_topk_low(&ranking, &SelectionParams::topk_low(percent)).unwrap().ids
}

fn planted_recovery(p: &Planted) -> Outcome {
    let picked = top_fraction(&p.scores_64, 10.0);
    let n_hard = p.labels.values().filter(|d| **d == Difficulty::Hard).count();
    let hits = picked.iter().filter(|id| p.labels[*id] == Difficulty::Hard).count();
    let recall = hits as f64 / n_hard as f64;
    let mean = |d| {
        let v: Vec<f64> = p.scores_64.iter().filter(|s| p.labels[&s.id] == d).map(|s| s.value).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let (easy, hard) = (mean(Difficulty::Easy), mean(Difficulty::Hard));
    check(recall >= 0.70, format!("recovered {hits}/{n_hard} planted-hard ids"))?;
    check(easy > hard, format!("mean LP(1) easy {easy:.4} <= hard {hard:.4}"))?;
    check(p.train_64 < Duration::from_secs(120), format!("training took {:?}", p.train_64))?;
    Ok(format!(
        "2000 samples: top-10% holds {hits}/{n_hard} hard ({:.1}%); mean LP(1) easy {easy:.3} > hard {hard:.3}; trained in {:.1}s",
        recall * 100.0,
        p.train_64.as_secs_f64()
    ))
}

fn transfer(p: &Planted) -> Outcome {
    let by_id: HashMap<&str, f64> = p.scores_16.iter().map(|s| (s.id.as_str(), s.value)).collect();
    let a: Vec<f64> = p.scores_64.iter().map(|s| s.value).collect();
    let b: Vec<f64> = p.scores_64.iter().map(|s| by_id[s.id.as_str()]).collect();
    let tau = kendall_tau_values(&a, &b).map_err(|e| e.to_string())?;
    let iou33 = iou(&top_fraction(&p.scores_64, 33.0), &top_fraction(&p.scores_16, 33.0)).unwrap();
    let baseline = random_iou_baseline(0.33);
    let both = p.train_64 + p.train_16;
    check(tau > 0.0, format!("kendall tau {tau}"))?;
    check(iou33 >= baseline + 0.1, format!("iou@33% {iou33:.3} vs random {baseline:.3}"))?;
    check(both < Duration::from_secs(240), format!("training took {both:?}"))?;
    Ok(format!(
        "hidden 16 vs 64: tau {tau:.3}; iou@33% {iou33:.3} >= random {baseline:.3} + 0.1; trained in {:.1}s",
        both.as_secs_f64()
    ))
}

fn iou_monotone(p: &Planted) -> Outcome {
    let at = |f| iou(&top_fraction(&p.scores_64, f), &top_fraction(&p.scores_16, f)).unwrap();
    let (i1, i10, i33) = (at(1.0), at(10.0), at(33.0));
    check(i33 >= i10 && i10 >= i1, format!("iou 1% {i1:.3}, 10% {i10:.3}, 33% {i33:.3}"))?;
    Ok(format!("iou 1% {i1:.3} <= 10% {i10:.3} <= 33% {i33:.3}"))
}

// ---------------------------------------------------------------------------
// 8. determinism through the command line

fn lp_select(dir: &Path, threads: &str, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_lp-select"))
        .current_dir(dir)
        .env_remove("SOURCE_DATE_EPOCH")
        .env_remove("LP_SELECT_THREADS")
        .args(["--seed", "9", "--threads", threads])
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("lp-select {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)))
    }
}

fn run_pipeline(dir: &Path, threads: &str) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let steps: &[&[&str]] = &[
        &[
            "synth",
            "--easy",
            "120",
            "--hard",
            "20",
            "--noisy",
            "10",
            "--out",
            "synth.jsonl",
            "--corpus-out",
            "corpus.jsonl",
        ],
        &[
            "train-ref",
            "--corpus",
            "corpus.jsonl",
            "--epochs",
            "2",
            "--hidden-dim",
            "8",
            "--out",
            "traces.jsonl",
            "--meta-out",
            "train_meta.json",
        ],
        &["score", "--traces", "traces.jsonl", "--corpus", "corpus.jsonl", "--out", "scores.jsonl"],
        &["score", "--traces", "synth.jsonl", "--metric", "lp-app", "--out", "synth_scores.jsonl"],
        &["rank", "--scores", "scores.jsonl", "--out", "ranked.jsonl"],
        &["embed", "--corpus", "corpus.jsonl", "--dim", "64", "--out", "emb.jsonl"],
        &[
            "cluster",
            "--embeddings",
            "emb.jsonl",
            "--k",
            "5",
            "--out",
            "clusters.jsonl",
            "--meta-out",
            "cluster_meta.json",
        ],
        &[
            "select",
            "--scores",
            "scores.jsonl",
            "--clusters",
            "clusters.jsonl",
            "--corpus",
            "corpus.jsonl",
            "--mode",
            "topk-low",
            "--fraction",
            "20",
            "--created-at",
            "0",
            "--out",
            "topk.json",
            "--subset-out",
            "subset.jsonl",
        ],
        &[
            "select",
            "--scores",
            "scores.jsonl",
            "--clusters",
            "clusters.jsonl",
            "--corpus",
            "corpus.jsonl",
            "--mode",
            "clust-rand",
            "--fraction",
            "20",
            "--created-at",
            "0",
            "--out",
            "rand.json",
        ],
        &[
            "select",
            "--scores",
            "scores.jsonl",
            "--clusters",
            "clusters.jsonl",
            "--corpus",
            "corpus.jsonl",
            "--mode",
            "bucket",
            "--bucket",
            "mid",
            "--created-at",
            "0",
            "--out",
            "mid.json",
        ],
        &[
            "partition",
            "--scores",
            "scores.jsonl",
            "--clusters",
            "clusters.jsonl",
            "--corpus",
            "corpus.jsonl",
            "--created-at",
            "0",
            "--out",
            "buckets",
        ],
        &["compare", "--rank-a", "scores.jsonl", "--rank-b", "synth_scores.jsonl", "--out", "compare.json"],
        &["compare", "--set-a", "topk.json", "--set-b", "rand.json", "--out", "set_iou.json"],
        &[
            "stats",
            "--manifest",
            "topk.json",
            "--corpus",
            "corpus.jsonl",
            "--clusters",
            "clusters.jsonl",
            "--out",
            "stats.json",
        ],
    ];
    for args in steps {
        lp_select(dir, threads, args)?;
    }
    let mut files = BTreeMap::new();
    for entry in walk(dir) {
        let rel = entry.strip_prefix(dir).unwrap().display().to_string();
        files.insert(rel, std::fs::read(&entry).map_err(|e| e.to_string())?);
    }
    Ok(files)
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

fn determinism() -> Outcome {
    let dirs: Vec<tempfile::TempDir> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let a = run_pipeline(dirs[0].path(), "1")?;
    let b = run_pipeline(dirs[1].path(), "1")?;
    let c = run_pipeline(dirs[2].path(), "4")?;
    check(a.len() >= 17, format!("pipeline produced only {} files", a.len()))?;
    for (name, other) in [("repeat", &b), ("--threads 4", &c)] {
        check(
            a.keys().collect::<BTreeSet<_>>() == other.keys().collect::<BTreeSet<_>>(),
            format!("{name}: different file sets"),
        )?;
        if let Some(f) = a.keys().find(|k| a[*k] != other[*k]) {
            return Err(format!("{name}: {f} differs"));
        }
    }
    Ok(format!("{} output files of 14 stages byte-identical across repeat and --threads 1/4", a.len()))
}

// ---------------------------------------------------------------------------

fn main() {
    let mut results: Vec<(u32, &str, Option<Duration>, Outcome, Duration)> = Vec::new();
    let mut timed = |id, name, bound: Option<Duration>, f: &dyn Fn() -> Outcome| {
        let start = Instant::now();
        let outcome = f();
        results.push((id, name, bound, outcome, start.elapsed()));
    };
    timed(1, "formula oracle", Some(Duration::from_secs(1)), &formula_oracle);
    timed(2, "rank-statistic oracle", Some(Duration::from_secs(10)), &rank_oracle);
    timed(3, "partition invariants", Some(Duration::from_secs(1)), &partition_invariants);
    timed(4, "clustering invariants", Some(Duration::from_secs(5)), &clustering_invariants);
    let planted = train_planted();
    timed(5, "planted-difficulty recovery", None, &|| planted_recovery(&planted));
    timed(6, "hardness transfer across model sizes", None, &|| transfer(&planted));
    timed(7, "iou grows with selected fraction", None, &|| iou_monotone(&planted));
    timed(8, "determinism", None, &determinism);

    let mut failed = 0;
    for (id, name, bound, outcome, elapsed) in &results {
        let outcome = match (outcome, bound) {
            (Ok(_), Some(b)) if elapsed > b => Err(format!("took {elapsed:?}, limit {b:?}")),
            (o, _) => o.clone(),
        };
        match outcome {
            Ok(detail) => println!("PASS  criterion {id}: {name} — {detail} [{:.2}s]", elapsed.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("FAIL  criterion {id}: {name} — {why} [{:.2}s]", elapsed.as_secs_f64());
            }
        }
    }
    println!("acceptance: {}/{} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
