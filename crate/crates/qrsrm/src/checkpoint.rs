//! Agent checkpoints: the network file followed by the reference quantiles
//! `θ̃` and weights `μ̃`, each a little-endian `u64` count and that many
//! `f64` values. QR-CVaR agents store `θ̃ = [b₀]` and no weights.

use std::collections::BTreeMap;
use std::path::Path;

use qrsrm_core::network::QuantileNetwork;
use qrsrm_core::HFunction;

use crate::agent::{Agent, Algorithm};
use crate::error::{Error, Result};

/// What a checkpoint records besides the agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub env: String,
    pub env_params: BTreeMap<String, String>,
}

fn push_array(out: &mut Vec<u8>, values: &[f64]) {
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn read_array(bytes: &[u8], pos: &mut usize) -> Result<Vec<f64>> {
    let bad = || Error::Checkpoint("truncated reference arrays".into());
    let head = bytes.get(*pos..*pos + 8).ok_or_else(bad)?;
    let count = u64::from_le_bytes(head.try_into().expect("8 bytes")) as usize;
    *pos += 8;
    let end = count.checked_mul(8).and_then(|n| n.checked_add(*pos)).ok_or_else(bad)?;
    let body = bytes.get(*pos..end).ok_or_else(bad)?;
    *pos = end;
    Ok(body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}

fn header_safe(value: &str) -> Result<&str> {
    if value.contains([';', '=', '\n']) {
        Err(Error::Checkpoint(format!("`{value}` cannot be stored in a checkpoint header")))
    } else {
        Ok(value)
    }
}

pub fn to_bytes(agent: &Agent, provenance: &Provenance) -> Result<Vec<u8>> {
    let algo = agent.algorithm.to_string();
    let gamma = format!("{:?}", agent.gamma);
    let s_scale = format!("{:?}", agent.s_scale);
    let params: Vec<String> = provenance.env_params.iter().map(|(k, v)| format!("{k}:{v}")).collect();
    let params = params.join(",");
    let extras = [
        ("algo", header_safe(&algo)?),
        ("env", header_safe(&provenance.env)?),
        ("env_params", header_safe(&params)?),
        ("gamma", gamma.as_str()),
        ("s_scale", s_scale.as_str()),
    ];
    let mut out = Vec::new();
    agent.online.write_checkpoint(&extras, &mut out);
    match (&agent.algorithm, &agent.h) {
        (Algorithm::QrSrm(_), Some(h)) => {
            push_array(&mut out, h.ref_quantiles());
            push_array(&mut out, h.quantile_weights());
        }
        (Algorithm::QrCvar { .. }, _) => {
            push_array(&mut out, &[agent.b0]);
            push_array(&mut out, &[]);
        }
        _ => {
            push_array(&mut out, &[]);
            push_array(&mut out, &[]);
        }
    }
    Ok(out)
}

pub fn from_bytes(bytes: &[u8]) -> Result<(Agent, Provenance)> {
    let (online, extras, mut pos) = QuantileNetwork::read_checkpoint(bytes)?;
    let extras: BTreeMap<String, String> = extras.into_iter().collect();
    let field = |k: &str| extras.get(k).ok_or_else(|| Error::Checkpoint(format!("header lacks `{k}`")));
    let number = |k: &str| -> Result<f64> {
        field(k)?.parse().map_err(|_| Error::Checkpoint(format!("bad `{k}` in header")))
    };
    let algorithm: Algorithm = field("algo")?.parse()?;
    let gamma = number("gamma")?;
    let s_scale = number("s_scale")?;
    let mut env_params = BTreeMap::new();
    for pair in field("env_params")?.split(',').filter(|p| !p.is_empty()) {
        let (k, v) = pair.split_once(':').ok_or_else(|| Error::Checkpoint("bad env_params".into()))?;
        env_params.insert(k.to_string(), v.to_string());
    }
    let provenance = Provenance { env: field("env")?.clone(), env_params };
    let theta = read_array(bytes, &mut pos)?;
    let weights = read_array(bytes, &mut pos)?;
    if pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    let n = online.quantiles();
    let mut b0 = 0.0;
    let mut h = None;
    match &algorithm {
        Algorithm::QrSrm(spectrum) => {
            let (expected, masses) = spectrum.quantile_weights(n);
            if theta.len() != n || weights != expected {
                return Err(Error::Checkpoint("reference quantiles do not match the spectrum".into()));
            }
            h = Some(HFunction::from_parts(theta, weights, masses)?);
        }
        Algorithm::QrCvar { .. } => {
            b0 = *theta.first().ok_or_else(|| Error::Checkpoint("QR-CVaR checkpoint lacks b0".into()))?;
        }
        _ => {}
    }
    let agent = Agent { algorithm, online, h, b0, gamma, s_scale };
    Ok((agent, provenance))
}

pub fn save(path: &Path, agent: &Agent, provenance: &Provenance) -> Result<()> {
    std::fs::write(path, to_bytes(agent, provenance)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(Agent, Provenance)> {
    from_bytes(&std::fs::read(path)?)
}
