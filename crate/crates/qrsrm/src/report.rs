//! Per-step risk preferences of a trained QR-SRM agent along one episode.

use qrsrm_core::decompose::decompose;
use qrsrm_core::measure;
use qrsrm_core::{Error as CoreError, QuantileDistribution};

use crate::agent::{Agent, Algorithm};
use crate::env::{Env, Environment};
use crate::error::{Error, Result};

/// The preference in force at one step, before the action is taken.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceRow {
    pub t: usize,
    pub s: f64,
    pub c: f64,
    pub action: usize,
    pub reward: f64,
    /// `ξ`; zero when the estimated future return puts no mass below any threshold.
    pub xi: f64,
    /// The induced risk of the estimated future return.
    pub value: f64,
    /// `(level, weight)` per CVaR component; empty when degenerate.
    pub components: Vec<(f64, f64)>,
}

/// Runs one greedy episode on `env` (already seeded) and decomposes the
/// agent's objective at every visited state.
///
/// `G_t` is the sorted online row of the chosen action and `G_0` the agent's
/// reference quantiles `θ̃`. At `t = 0` the objective's own mixture is
/// reported.
pub fn trajectory_report(agent: &Agent, env: &mut Env) -> Result<Vec<PreferenceRow>> {
    let Algorithm::QrSrm(spectrum) = &agent.algorithm else {
        return Err(Error::Config("decomposition needs a QR-SRM checkpoint".into()));
    };
    let h = agent.h.as_ref().expect("QR-SRM agents carry a utility");
    let n = agent.quantiles();
    let mixture = spectrum.cvar_mixture(n);
    let g0 = QuantileDistribution::new(h.ref_quantiles().to_vec())?;
    let mut rows = Vec::new();
    let mut obs = env.reset();
    let mut aug = agent.start();
    loop {
        let (action, q) = agent.act(&obs.features, aug);
        let gt = QuantileDistribution::from_unsorted(q[action * n..(action + 1) * n].to_vec())?;
        let (xi, value, components) = if obs.t == 0 {
            let atoms = gt.to_discrete();
            let value = mixture.iter().map(|(a, w)| w * measure::cvar(&atoms, *a).unwrap_or(f64::NAN)).sum();
            (1.0, value, mixture.clone())
        } else {
            match decompose(&mixture, &g0, &gt, aug.s, aug.c) {
                Ok(d) => (d.xi, d.value, d.components),
                Err(CoreError::DegenerateDecomposition) => (0.0, f64::NAN, Vec::new()),
                Err(e) => return Err(e.into()),
            }
        };
        let step = env.step(action)?;
        rows.push(PreferenceRow { t: obs.t, s: aug.s, c: aug.c, action, reward: step.reward, xi, value, components });
        aug = aug.advance(step.reward, agent.gamma);
        if step.done {
            return Ok(rows);
        }
        obs = step.obs;
    }
}

pub fn write_report<W: std::io::Write>(out: W, rows: &[PreferenceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "s", "c", "action", "reward", "xi", "value", "levels", "weights"])?;
    let join = |f: &dyn Fn(&(f64, f64)) -> f64, comps: &[(f64, f64)]| {
        comps.iter().map(|c| format!("{:?}", f(c))).collect::<Vec<_>>().join(";")
    };
    for r in rows {
        let value = if r.value.is_finite() { format!("{:?}", r.value) } else { String::new() };
        w.write_record([
            r.t.to_string(),
            format!("{:?}", r.s),
            format!("{:?}", r.c),
            r.action.to_string(),
            format!("{:?}", r.reward),
            format!("{:?}", r.xi),
            value,
            join(&|c| c.0, &r.components),
            join(&|c| c.1, &r.components),
        ])?;
    }
    w.flush()?;
    Ok(())
}
