use densefeed_core::bench::{
    bench_iterate, row_checksum, run_adaptive, run_benchmark, run_static, tv_distance, BenchConfig, CorpusConfig,
    SyntheticCorpus,
};
use densefeed_core::store::{SparseMatrixStore, StoreWriter};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn iterate_checksum_matches_dense_rows_on_a_sample() {
    let dir = tempfile::tempdir().unwrap();
    let n_rows = 100_000u64;
    let n_cols = 64u64;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut dense: Vec<Vec<f32>> = Vec::with_capacity(n_rows as usize);
    let mut w = StoreWriter::create(dir.path(), n_cols, false).unwrap();
    for _ in 0..n_rows {
        let mut row = vec![0.0f32; n_cols as usize];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for c in 0..n_cols {
            if rng.random_bool(0.05) {
                let v = rng.random_range(1..20) as f32;
                row[c as usize] = v;
                cols.push(c);
                vals.push(v);
            }
        }
        w.push_row(&cols, &vals).unwrap();
        dense.push(row);
    }
    w.finish().unwrap();

    let report = bench_iterate(dir.path(), 2).unwrap();
    assert_eq!(report.epochs.len(), 2);
    assert!(report.rows_per_sec > 0.0);
    assert_eq!(report, report.clone());
    assert_eq!(bench_iterate(dir.path(), 1).unwrap().checksum, report.checksum);

    // per-row hashes recomputed from the dense copy on a 1% sample
    let store = SparseMatrixStore::open(dir.path()).unwrap();
    for r in (0..n_rows).step_by(100) {
        let d = &dense[r as usize];
        let cols: Vec<u64> = (0..n_cols).filter(|&c| d[c as usize] != 0.0).collect();
        let vals: Vec<f32> = cols.iter().map(|&c| d[c as usize]).collect();
        let row = store.get_row(r).unwrap();
        assert_eq!(row_checksum(r, row.cols, row.vals), row_checksum(r, &cols, &vals));
    }
    let total = (0..n_rows).fold(0u64, |acc, r| {
        let d = &dense[r as usize];
        let cols: Vec<u64> = (0..n_cols).filter(|&c| d[c as usize] != 0.0).collect();
        let vals: Vec<f32> = cols.iter().map(|&c| d[c as usize]).collect();
        acc.wrapping_add(row_checksum(r, &cols, &vals))
    });
    assert_eq!(report.checksum, Some(total));
}

#[test]
fn static_drops_large_sizes_under_a_tight_budget() {
    let mut sizes = vec![1u64; 500];
    sizes.extend(vec![100u64; 10]);
    let corpus = SyntheticCorpus::from_sizes(sizes, 4).unwrap();
    let model = |x: &[f64]| x[1] + 4.0 * x[0];
    let r = run_static(&corpus, 8, &model, 20_000.0, 10, 1).unwrap();
    let big = r.size_histogram.get(&100).copied().unwrap_or(0);
    assert!((big as f64) / (r.emitted as f64) < 0.001, "{big}");
    assert_eq!(r.emitted + r.skipped, 10 * 510);
}

#[test]
fn adaptive_leans_toward_the_dominant_mode() {
    let mut sizes = vec![10u64; 900];
    sizes.extend(vec![60u64; 100]);
    let corpus = SyntheticCorpus::from_sizes(sizes, 1).unwrap();
    let model = |x: &[f64]| x[1];
    let r = run_adaptive(&corpus, 1, &model, 3600.0, 10, 2).unwrap();
    let share = r.size_histogram[&10] as f64 / r.emitted as f64;
    assert!(share > 0.9, "{share}");
    assert!(tv_distance(&r.size_histogram, &corpus.histogram()) > 0.0);
}

#[test]
fn reference_config_file_matches_built_in() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/reference_corpus.json");
    assert_eq!(CorpusConfig::load(&path).unwrap(), CorpusConfig::reference());
}

#[test]
fn every_strategy_conserves_samples_on_a_small_lognormal_corpus() {
    let mut cfg = CorpusConfig::reference();
    cfg.n_samples = 2_000;
    let corpus = SyntheticCorpus::generate(&cfg).unwrap();
    let bench = BenchConfig { epochs: 3, ..BenchConfig::reference() };
    let out = run_benchmark(&corpus, &bench).unwrap();
    for r in &out.reports {
        assert_eq!(r.emitted + r.skipped, 3 * 2_000, "{}", r.strategy);
        assert_eq!(r.padding.rows.len() as u64, r.batches);
    }
}
