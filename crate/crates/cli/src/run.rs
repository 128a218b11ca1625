use crate::config::ExperimentConfig;
use crate::error::{invalid, CliError};
use crate::table::Table;
use clap::ValueEnum;
use disjhh::sketches::{CountSketch, MisraGries};
use disjhh::sparse_recovery::SyndromeSketch;
use disjhh::stream::{FrequencyVector, StreamFile};
use disjhh::turnstile::BoundedTurnstileHH;
use serde_json::{json, Value};
use std::io::{BufReader, Read};
use std::path::Path;

/// Failure probability used when CountSketch is sized from `--eps`.
const COUNTSKETCH_FAILURE: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Algorithm {
    /// Misra–Gries over an insertion-only stream (needs S or eps)
    Mg,
    /// CountSketch heavy hitters (needs eps and seed; width/depth optional)
    Countsketch,
    /// Bounded-length turnstile heavy hitters (needs eps; L defaults to the stream length)
    TurnstileHh,
    /// Exact S-sparse recovery (needs S)
    SparseRecovery,
}

/// Reads a stream in either format, telling them apart by the binary magic.
pub fn read_stream(path: &Path) -> Result<StreamFile, CliError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| CliError::io(path, e))?;
    let parsed = if bytes.starts_with(b"DJS1") {
        StreamFile::read_binary(bytes.as_slice())
    } else {
        StreamFile::read_text(BufReader::new(bytes.as_slice()))
    };
    parsed.map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
}

fn item_table(alg: &str, stream: &StreamFile) -> Table {
    let mut t = Table::new(format!("run {alg}"), vec!["item", "estimate", "exact"]);
    t.param("universe", stream.header.universe);
    t.param("updates", stream.len());
    t
}

fn exact(f: &FrequencyVector, i: usize) -> Value {
    json!(f.get(i))
}

pub fn run(alg: Algorithm, cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let stream = read_stream(&cfg.input()?)?;
    let f = stream
        .final_vector()
        .map_err(|e| CliError::Format(e.to_string()))?;
    let universe = stream.header.universe;
    match alg {
        Algorithm::Mg => {
            let capacity = match (cfg.sparsity, cfg.eps) {
                (Some(s), _) => s,
                (None, Some(eps)) => (1.0 / eps).ceil() as usize,
                (None, None) => return Err(CliError::Missing("S (or eps)")),
            };
            let mut mg = MisraGries::new(capacity).map_err(invalid)?;
            for u in stream.updates() {
                if !u.is_insertion() {
                    return Err(CliError::Invalid(
                        "Misra–Gries needs an insertion-only stream".into(),
                    ));
                }
                mg.update(u.index() as u64);
            }
            let mut t = item_table("mg", &stream);
            t.param("capacity", capacity);
            for (item, est) in mg.sorted_counters() {
                t.push(vec![json!(item), json!(est), exact(&f, item as usize)]);
            }
            t.note("words", mg.words());
            t.note("error_bound", mg.error_bound());
            Ok(t)
        }
        Algorithm::Countsketch => {
            let eps = cfg.eps()?;
            let seed = cfg.seed()?;
            let mut cs = match (cfg.width, cfg.depth) {
                (Some(w), Some(d)) if w > 0 && d > 0 => CountSketch::new(w, d, seed),
                (None, None) => CountSketch::for_accuracy(eps, COUNTSKETCH_FAILURE, seed),
                _ => {
                    return Err(CliError::Config(
                        "width and depth must both be given and positive".into(),
                    ))
                }
            };
            for u in stream.updates() {
                cs.update(u.index() as u64, u.delta());
            }
            let mut t = item_table("countsketch", &stream);
            t.param("eps", eps);
            t.param("seed", seed);
            t.param("width", cs.width());
            t.param("depth", cs.depth());
            for item in cs.heavy_hitters(universe as u64, eps) {
                t.push(vec![
                    json!(item),
                    json!(cs.estimate(item)),
                    exact(&f, item as usize),
                ]);
            }
            t.note("words", cs.words());
            t.note("l2_estimate", cs.l2_estimate());
            t.note("l2_exact", f.l2());
            Ok(t)
        }
        Algorithm::TurnstileHh => {
            let eps = cfg.eps()?;
            let bound = cfg.length_bound.unwrap_or(stream.len() as u64).max(1);
            let strict = cfg.strict();
            let mut hh = match (cfg.sparsity, strict) {
                (Some(s), _) => BoundedTurnstileHH::with_capacity(universe, eps, bound, s),
                (None, true) => BoundedTurnstileHH::new(universe, eps, bound),
                (None, false) => BoundedTurnstileHH::for_linf(universe, eps, bound),
            }
            .map_err(invalid)?;
            for u in stream.updates() {
                hh.update(u.index(), u.delta()).map_err(invalid)?;
            }
            let mut t = item_table("turnstile-hh", &stream);
            t.param("eps", eps);
            t.param("L", bound);
            t.param("strict", strict);
            t.param("capacity", hh.capacity());
            if strict {
                let out = hh.query_strict().map_err(invalid)?;
                for i in &out.items {
                    t.push(vec![json!(i), json!(hh.estimate(*i)), exact(&f, *i)]);
                }
                t.note(
                    "branch",
                    serde_json::to_value(out.branch).expect("enum serializes"),
                );
            } else {
                let est = hh.query_linf();
                let mut worst = 0i64;
                for (&i, &v) in &est.values {
                    t.push(vec![json!(i), json!(v), exact(&f, i)]);
                }
                for i in 0..universe {
                    worst = worst.max((est.get(i) - f.get(i)).abs());
                }
                t.note(
                    "source",
                    serde_json::to_value(est.source).expect("enum serializes"),
                );
                t.note("error_bound", est.error_bound);
                t.note("max_abs_error", worst);
            }
            t.note("words", hh.words());
            t.note("words_bound", BoundedTurnstileHH::words_bound(bound, eps));
            t.note("l2_exact", f.l2());
            Ok(t)
        }
        Algorithm::SparseRecovery => {
            let s = cfg.sparsity()?;
            let mut sk = SyndromeSketch::new(universe, s).map_err(invalid)?;
            for u in stream.updates() {
                sk.update(u.index(), u.delta()).map_err(invalid)?;
            }
            let mut t = Table::new("run sparse-recovery", vec!["index", "value", "exact"]);
            t.param("universe", universe);
            t.param("updates", stream.len());
            t.param("S", s);
            match sk.decode() {
                Ok(y) => {
                    for &(i, v) in &y.entries {
                        t.push(vec![json!(i), json!(v), exact(&f, i)]);
                    }
                    t.note("decoded", true);
                    t.note("matches_exact", y.to_frequency_vector(universe) == f);
                }
                Err(e) => {
                    t.note("decoded", false);
                    t.note("failure", e.to_string());
                }
            }
            t.note("support_size", f.support().len());
            t.note("words", sk.words());
            Ok(t)
        }
    }
}
