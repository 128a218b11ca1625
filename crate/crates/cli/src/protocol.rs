use crate::config::ExperimentConfig;
use crate::error::{invalid, CliError};
use crate::table::Table;
use clap::ValueEnum;
use disjhh::disj::{sample_eta, DisjInstance, Label};
use disjhh::distributions::tv_distance;
use disjhh::protocol::{
    clean_simulate, deterministic_cost_bound, deterministic_disj_protocol,
    epsilon_publish_protocol, epsilon_publish_yes_failure, pigeonhole_promise_protocol,
    DisjProtocol, ProtocolSpec,
};
use rayon::prelude::*;
use serde_json::json;
use std::path::Path;

/// Most players for which clean-sim enumerates every input vector.
const MAX_CLEAN_PLAYERS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProtocolName {
    /// Round-robin publishing; exact on every promise instance
    Deterministic,
    /// Each player publishes a random eps-fraction of their set
    EpsPublish,
    /// Promise disjointness with l = k
    Pigeonhole,
    /// Clean simulation of one player of a table protocol (--input spec, --player)
    CleanSim,
}

struct Trial {
    label: Label,
    output: Label,
    bits: u64,
    max_player_bits: u64,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
}

pub fn run(name: ProtocolName, cfg: &ExperimentConfig) -> Result<Table, CliError> {
    if name == ProtocolName::CleanSim {
        return clean_sim(cfg);
    }
    let fixed: Option<DisjInstance> = cfg.input.as_deref().map(read_json).transpose()?;
    let (n, k) = match &fixed {
        Some(inst) => (inst.n(), inst.k()),
        None => (cfg.n()?, cfg.k()?),
    };
    let l = match (&fixed, name) {
        (Some(inst), _) => inst.l(),
        (None, ProtocolName::Pigeonhole) => k,
        (None, _) => cfg.l_or_from_c(k)?,
    };
    let randomized = fixed.is_none() || name == ProtocolName::EpsPublish;
    let seed = if randomized {
        cfg.seed()?
    } else {
        cfg.seed.unwrap_or(0)
    };
    let trials = match &fixed {
        Some(_) => cfg.trials.unwrap_or(1),
        None => cfg.trials()?,
    };

    let protocol: Box<dyn DisjProtocol + Sync> = match name {
        ProtocolName::Deterministic => {
            Box::new(deterministic_disj_protocol(n, k).map_err(invalid)?)
        }
        ProtocolName::EpsPublish => {
            Box::new(epsilon_publish_protocol(n, k, l, cfg.eps()?).map_err(invalid)?)
        }
        ProtocolName::Pigeonhole => Box::new(pigeonhole_promise_protocol(n, k).map_err(invalid)?),
        ProtocolName::CleanSim => unreachable!(),
    };

    let results: Vec<Trial> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let trial_seed = seed.wrapping_add(t as u64);
            let inst = match &fixed {
                Some(inst) => inst.clone(),
                None => {
                    let z = match cfg.label {
                        Some(label) => label.is_yes(),
                        None => t % 2 == 1,
                    };
                    sample_eta(n, k, l, z, trial_seed)
                        .map_err(invalid)?
                        .instance
                }
            };
            let run = protocol.run(&inst, trial_seed).map_err(invalid)?;
            Ok(Trial {
                label: inst.label(),
                output: run.output,
                bits: run.transcript.bit_cost,
                max_player_bits: run
                    .transcript
                    .bits_by_player(k)
                    .into_iter()
                    .max()
                    .unwrap_or(0),
            })
        })
        .collect::<Result<_, CliError>>()?;

    let mut t = Table::new(
        format!("protocol {}", protocol.name()),
        vec![
            "trial",
            "label",
            "output",
            "correct",
            "bits",
            "max_player_bits",
        ],
    );
    t.param("n", n);
    t.param("k", k);
    t.param("l", l);
    t.param("seed", seed);
    t.param("trials", trials);
    if let Some(eps) = cfg.eps.filter(|_| name == ProtocolName::EpsPublish) {
        t.param("eps", eps);
        t.note("yes_failure_bound", epsilon_publish_yes_failure(l, eps));
    }
    let mut errors = 0usize;
    for (i, r) in results.iter().enumerate() {
        let correct = r.label == r.output;
        errors += usize::from(!correct);
        t.push(vec![
            json!(i),
            json!(r.label),
            json!(r.output),
            json!(correct),
            json!(r.bits),
            json!(r.max_player_bits),
        ]);
    }
    let total_bits: u64 = results.iter().map(|r| r.bits).sum();
    t.note("errors", errors);
    t.note("error_rate", errors as f64 / trials as f64);
    t.note(
        "max_bits",
        results.iter().map(|r| r.bits).max().unwrap_or(0),
    );
    t.note("mean_bits", total_bits as f64 / trials as f64);
    t.note(
        "max_player_bits",
        results.iter().map(|r| r.max_player_bits).max().unwrap_or(0),
    );
    if name == ProtocolName::Deterministic {
        t.note("cost_bound", deterministic_cost_bound(n, k));
    }
    Ok(t)
}

fn clean_sim(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let path = cfg.input()?;
    let spec: ProtocolSpec = read_json(&path)?;
    let player = cfg.player.ok_or(CliError::Missing("player"))?;
    let players = spec.players();
    if players > MAX_CLEAN_PLAYERS {
        return Err(CliError::Invalid(format!(
            "{players} players exceed the enumeration limit {MAX_CLEAN_PLAYERS}"
        )));
    }
    let clean = clean_simulate(&spec, player).map_err(invalid)?;
    let mut t = Table::new(
        "protocol clean-sim",
        vec![
            "inputs",
            "tv_to_base",
            "observation_probability",
            "output_probability",
        ],
    );
    t.param("players", players);
    t.param("player", player);
    t.param("bit_cost", spec.bit_cost());
    let mut max_tv = 0.0f64;
    for mask in 0..(1usize << players) {
        let inputs: Vec<bool> = (0..players).map(|j| mask >> j & 1 == 1).collect();
        let base = spec.transcript_distribution(&inputs).map_err(invalid)?;
        let sim = clean.transcript_distribution(&inputs).map_err(invalid)?;
        let tv = tv_distance(&base, &sim);
        max_tv = max_tv.max(tv);
        let bits: String = inputs.iter().map(|&b| if b { '1' } else { '0' }).collect();
        t.push(vec![
            json!(bits),
            json!(tv),
            json!(clean
                .observation_probability_with(player, &inputs)
                .map_err(invalid)?),
            json!(spec.output_probability(&inputs).map_err(invalid)?),
        ]);
    }
    t.note("max_tv_to_base", max_tv);
    t.note(
        "observation_probability_at_zero",
        clean.observation_probability(player).map_err(invalid)?,
    );
    Ok(t)
}
