use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use densefeed_core::bench::{bench_iterate, run_benchmark, write_report, BenchConfig, CorpusConfig, SyntheticCorpus};
use densefeed_core::shard::{write_shards, Sample};
use densefeed_core::store::{build_store, MetaValue, SparseMatrixStore};
use densefeed_core::tokenizer::{compute_gene_stats, rank_encode, GeneStats};
use densefeed_core::Error;

/// Sparse stores, tokenization, shards and batching benchmarks.
#[derive(Parser)]
#[command(name = "densefeed", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a store from a Matrix Market coordinate file.
    Convert {
        mtx: PathBuf,
        out: PathBuf,
        /// Tab-separated row metadata with a header line.
        #[arg(long)]
        meta: Option<PathBuf>,
        /// Replace a non-empty output directory.
        #[arg(long)]
        overwrite: bool,
        /// Skip computing per-gene medians for tokenization.
        #[arg(long)]
        no_gene_stats: bool,
    },
    /// Print a store's header, or one row.
    Inspect {
        store: PathBuf,
        /// Check every row and metadata column, not just file sizes.
        #[arg(long)]
        deep: bool,
        #[arg(long)]
        row: Option<u64>,
        /// Print the row's rank-order tokens instead of its entries.
        #[arg(long, requires = "row")]
        tokens: bool,
        #[arg(long, default_value_t = 2048)]
        max_len: usize,
    },
    /// Compute and save per-gene medians into the store directory.
    GeneStats { store: PathBuf },
    /// Pack a flat directory of `<key>.<ext>` files into tar shards.
    Shard {
        dir: PathBuf,
        out: PathBuf,
        #[arg(long)]
        max_per_shard: u64,
        #[arg(long)]
        overwrite: bool,
    },
    /// Time full passes over a store's rows.
    BenchIterate {
        store: PathBuf,
        #[arg(long, default_value_t = 1)]
        epochs: u64,
    },
    /// Compare static, adaptive and bucketed batching on a synthetic corpus.
    BenchBatching {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        budget: f64,
        #[arg(long)]
        max_width: u64,
        #[arg(long)]
        min_count: usize,
        #[arg(long, default_value_t = 10)]
        epochs: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write whitespace-separated .dat files.
        #[arg(long)]
        gnuplot: bool,
        #[arg(long, default_value_t = 8)]
        static_batch_size: usize,
        #[arg(long, default_value_t = 16)]
        adaptive_group_width: u64,
        #[arg(long, default_value_t = densefeed_core::sizeaware::DEFAULT_SAFETY_MARGIN)]
        safety_margin: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<Error>() {
            return err.exit_code() as u8;
        }
        if cause.is::<std::io::Error>() {
            return 3;
        }
    }
    2
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn meta_json(v: MetaValue<'_>) -> Value {
    match v {
        MetaValue::Str(s) => json!(s),
        MetaValue::Float(f) => json!(f),
        MetaValue::Int(i) => json!(i),
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Convert { mtx, out, meta, overwrite, no_gene_stats } => {
            let report = build_store(&mtx, meta.as_deref(), &out, overwrite)?;
            if !no_gene_stats {
                let store = SparseMatrixStore::open(&out)?;
                compute_gene_stats(&store)?.save(&out)?;
            }
            print_json(&serde_json::to_value(&report)?);
        }
        Command::Inspect { store, deep, row, tokens, max_len } => {
            let s = SparseMatrixStore::open(&store)?;
            let deep_report = if deep { Some(s.validate_deep()?) } else { None };
            match row {
                None => {
                    let mut v = serde_json::to_value(s.header())?;
                    if let Some(r) = deep_report {
                        v["deep"] = serde_json::to_value(r)?;
                    }
                    print_json(&v);
                }
                Some(r) => {
                    let slice = s.get_row(r)?;
                    if tokens {
                        let stats = if GeneStats::exists_in(&store) {
                            GeneStats::load(&store)?
                        } else {
                            compute_gene_stats(&s)?
                        };
                        if stats.n_cols() != s.n_cols() {
                            return Err(Error::Corruption(format!(
                                "gene stats cover {} genes, store has {}",
                                stats.n_cols(),
                                s.n_cols()
                            ))
                            .into());
                        }
                        println!("{}", serde_json::to_string(&rank_encode(&slice, &stats, max_len).tokens)?);
                    } else {
                        let mut metadata = serde_json::Map::new();
                        for col in s.metadata_columns() {
                            metadata.insert(col.name.clone(), meta_json(s.get_metadata(&col.name, r)?));
                        }
                        print_json(&json!({
                            "row": r,
                            "cols": slice.cols,
                            "vals": slice.vals,
                            "metadata": metadata,
                        }));
                    }
                }
            }
        }
        Command::GeneStats { store } => {
            let s = SparseMatrixStore::open(&store)?;
            let stats = compute_gene_stats(&s)?;
            stats.save(&store)?;
            println!("wrote gene stats for {} genes", stats.n_cols());
        }
        Command::Shard { dir, out, max_per_shard, overwrite } => {
            let samples = collect_samples(&dir)?;
            let set = write_shards(samples, &out, max_per_shard, overwrite)?;
            print_json(&serde_json::to_value(set.manifest())?);
        }
        Command::BenchIterate { store, epochs } => {
            let report = bench_iterate(&store, epochs)?;
            print_json(&serde_json::to_value(&report)?);
        }
        Command::BenchBatching {
            corpus,
            budget,
            max_width,
            min_count,
            epochs,
            seed,
            out,
            gnuplot,
            static_batch_size,
            adaptive_group_width,
            safety_margin,
        } => {
            let cfg = CorpusConfig::load(&corpus)?;
            let corpus = SyntheticCorpus::generate(&cfg)?;
            let bench = BenchConfig {
                budget,
                max_width,
                min_count,
                epochs,
                seed,
                static_batch_size,
                adaptive_group_width,
                safety_margin,
            };
            let outcome = run_benchmark(&corpus, &bench)?;
            write_report(&out, &outcome, gnuplot)?;
            println!(
                "{:<10} {:>9} {:>9} {:>8} {:>7} {:>8} {:>7} {:>10}",
                "strategy", "emitted", "skipped", "batches", "tv", "top10%", "modal", "med_pad"
            );
            for s in &outcome.summary.strategies {
                println!(
                    "{:<10} {:>9} {:>9} {:>8} {:>7.4} {:>8.4} {:>7.3} {:>10}",
                    s.strategy,
                    s.emitted,
                    s.skipped,
                    s.batches,
                    s.tv_distance,
                    s.top_decile_mass,
                    s.modal_ratio,
                    s.median_padding
                );
            }
            println!("report written to {}", out.display());
        }
    }
    Ok(())
}

/// Groups the regular files of a flat directory into samples by the name
/// part before the first `.`, in sorted key order.
fn collect_samples(dir: &Path) -> Result<Vec<Sample>> {
    let mut parts: BTreeMap<String, Vec<(String, PathBuf)>> = BTreeMap::new();
    let entries = fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))?;
    for entry in entries {
        let entry = entry.with_context(|| format!("reading {}", dir.display()))?;
        let path = entry.path();
        let name = entry.file_name().into_string().map_err(|n| anyhow::anyhow!("non-UTF-8 file name {n:?}"))?;
        if !entry.file_type()?.is_file() {
            bail!(Error::Validation(format!("{} is not a regular file", path.display())));
        }
        let Some((key, ext)) = name.split_once('.') else {
            bail!(Error::Validation(format!("file `{name}` is not named <key>.<ext>")));
        };
        parts.entry(key.to_owned()).or_default().push((ext.to_owned(), path));
    }
    let mut samples = Vec::with_capacity(parts.len());
    for (key, files) in parts {
        let mut sample = Sample::new(key)?;
        for (ext, path) in files {
            let data = fs::read(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
            sample = sample.with_part(ext, data)?;
        }
        samples.push(sample);
    }
    Ok(samples)
}
