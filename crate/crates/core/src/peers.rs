//! Peer selection.

use alloc::vec::Vec;

use crate::config::PeerRule;
use crate::error::ModelError;

/// Peer sets as one sorted index list per agent.
pub type PeerSets = Vec<Vec<usize>>;

/// Every agent is a peer of every agent, itself included.
pub fn universal_peers(n_agents: usize) -> PeerSets {
    (0..n_agents).map(|_| (0..n_agents).collect()).collect()
}

/// `j` is a peer of `i` iff `|opinion_i - opinion_j| < epsilon`.
pub fn bounded_confidence_peers(opinions: &[Option<f64>], epsilon: f64) -> Result<PeerSets, ModelError> {
    let known: Vec<f64> = opinions
        .iter()
        .enumerate()
        .map(|(i, o)| {
            o.ok_or_else(|| ModelError::InvalidState(alloc::format!("agent {i} has no opinion yet")))
        })
        .collect::<Result<_, _>>()?;
    Ok(known
        .iter()
        .map(|&oi| {
            known
                .iter()
                .enumerate()
                .filter(|&(_, &oj)| libm::fabs(oi - oj) < epsilon)
                .map(|(j, _)| j)
                .collect()
        })
        .collect())
}

/// Peers of a single agent under `rule`, from the previous step's opinions.
pub fn peers_of(
    agent: usize,
    rule: PeerRule,
    previous_opinions: &[Option<f64>],
    epsilon: f64,
) -> Result<Vec<usize>, ModelError> {
    match rule {
        PeerRule::Universal => Ok((0..previous_opinions.len()).collect()),
        PeerRule::BoundedConfidence => {
            let own = previous_opinions[agent].ok_or_else(|| {
                ModelError::InvalidState(alloc::format!("agent {agent} has no opinion yet"))
            })?;
            previous_opinions
                .iter()
                .enumerate()
                .filter_map(|(j, o)| match o {
                    None => Some(Err(ModelError::InvalidState(alloc::format!(
                        "agent {j} has no opinion yet"
                    )))),
                    Some(oj) if libm::fabs(own - oj) < epsilon => Some(Ok(j)),
                    Some(_) => None,
                })
                .collect()
        }
    }
}
