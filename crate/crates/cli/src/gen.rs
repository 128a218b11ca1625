use crate::config::{ExperimentConfig, StreamFormat};
use crate::error::{invalid, CliError};
use clap::ValueEnum;
use disjhh::disj::{sample_eta, DisjInstance, Label};
use disjhh::lowrank::gen_lowrank_instance;
use disjhh::reductions::{
    fp_params, hh_params, powerlaw_params, to_fp_stream, to_hh_stream, to_powerlaw_stream,
};
use disjhh::stream::StreamFile;
use std::io::Write;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    /// DISJ instance as JSON (needs n, k, l or c, label, seed)
    Disj,
    /// Heavy-hitter reduction stream (needs n, p, eps, label, seed)
    HhStream,
    /// Power-law reduction stream (needs n, p, zeta, label, seed)
    Powerlaw,
    /// F_p reduction stream (needs n, p, label, seed)
    Fp,
    /// Low-rank row stream plus its sets as JSON (needs d, label, seed)
    Lowrank,
}

fn draw(n: usize, k: usize, l: usize, label: Label, seed: u64) -> Result<DisjInstance, CliError> {
    Ok(sample_eta(n, k, l, label.is_yes(), seed)
        .map_err(invalid)?
        .instance)
}

fn write_bytes(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, bytes).map_err(|e| CliError::io(path, e)),
        None => std::io::stdout()
            .lock()
            .write_all(bytes)
            .map_err(|e| CliError::io(Path::new("<stdout>"), e)),
    }
}

pub fn write_stream(
    file: &StreamFile,
    format: StreamFormat,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let mut bytes = Vec::new();
    match format {
        StreamFormat::Text => file
            .write_text(&mut bytes)
            .map_err(|e| CliError::Format(e.to_string()))?,
        StreamFormat::Binary => {
            if out.is_none() {
                return Err(CliError::Config("binary streams need --out".into()));
            }
            file.write_binary(&mut bytes).map_err(invalid)?
        }
    }
    write_bytes(out, &bytes)
}

fn to_json<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut text = serde_json::to_string_pretty(value).expect("values serialize");
    text.push('\n');
    text.into_bytes()
}

pub fn run(kind: GenKind, cfg: &ExperimentConfig) -> Result<(), CliError> {
    let seed = cfg.seed()?;
    let label = cfg.label()?;
    let out = cfg.out.as_deref();
    let format = cfg.format.unwrap_or(StreamFormat::Text);
    match kind {
        GenKind::Disj => {
            let k = cfg.k()?;
            let inst = draw(cfg.n()?, k, cfg.l_or_from_c(k)?, label, seed)?;
            write_bytes(out, &to_json(&inst))
        }
        GenKind::HhStream => {
            let (n, p, eps) = (cfg.n()?, cfg.p()?, cfg.eps()?);
            let (k, l) = hh_params(n, p, eps).map_err(invalid)?;
            let stream = to_hh_stream(&draw(n, k, l, label, seed)?, p, eps).map_err(invalid)?;
            write_stream(&stream.to_stream_file(), format, out)
        }
        GenKind::Powerlaw => {
            let (n, p, zeta) = (cfg.n()?, cfg.p()?, cfg.zeta()?);
            let (k, l) = powerlaw_params(n, p, zeta).map_err(invalid)?;
            let stream =
                to_powerlaw_stream(&draw(n, k, l, label, seed)?, p, zeta).map_err(invalid)?;
            write_stream(&stream.to_stream_file(), format, out)
        }
        GenKind::Fp => {
            let (n, p) = (cfg.n()?, cfg.p()?);
            let (k, l) = fp_params(n, p).map_err(invalid)?;
            let stream = to_fp_stream(&draw(n, k, l, label, seed)?, p).map_err(invalid)?;
            write_stream(&stream.to_stream_file(), format, out)
        }
        GenKind::Lowrank => {
            let inst = gen_lowrank_instance(cfg.d()?, label, seed).map_err(invalid)?;
            write_stream(&inst.to_stream_file(), format, out)?;
            match out {
                Some(path) => {
                    let sets = crate::table::mirror_path(path);
                    std::fs::write(&sets, to_json(&inst)).map_err(|e| CliError::io(&sets, e))
                }
                None => Ok(()),
            }
        }
    }
}
