//! Perspective updating: age-weighted contraction, re-insertion of the
//! agent's own fresh post, and expansion by one of three methods.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;

use crate::config::{ExpansionRule, SimulationConfig};
use crate::elicitation::elicit;
use crate::error::ModelError;
use crate::model::{Perspective, PostId, Step, Timeline, Topic};
use crate::oracle::{Oracle, OracleError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum UpdateError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Drop weight of an entry of the given age: `1 - rho^age`.
pub fn drop_weight(age: usize, rho: f64) -> f64 {
    1.0 - libm::pow(rho, age as f64)
}

/// Remove `k` entries, sampled without replacement with probability
/// proportional to [`drop_weight`]. When every remaining weight is zero the
/// draw is uniform. Survivors keep their order.
pub fn contract<R: Rng + ?Sized>(
    perspective: &Perspective,
    k: usize,
    rho: f64,
    now: Step,
    rng: &mut R,
) -> Result<Perspective, ModelError> {
    if k > perspective.len() {
        return Err(ModelError::InvalidInput(alloc::format!(
            "cannot drop {k} of {} posts",
            perspective.len()
        )));
    }
    let mut weights: Vec<f64> =
        perspective.entries().iter().map(|e| drop_weight(e.age(now), rho)).collect();
    let mut alive: Vec<bool> = alloc::vec![true; weights.len()];
    let mut dropped = Vec::with_capacity(k);
    for _ in 0..k {
        let total: f64 = weights.iter().zip(&alive).filter(|(_, a)| **a).map(|(w, _)| w).sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, w) in weights.iter().enumerate() {
                if !alive[i] || *w <= 0.0 {
                    continue;
                }
                pick = Some(i);
                if u < *w {
                    break;
                }
                u -= w;
            }
            pick.expect("positive total weight implies a candidate")
        } else {
            let candidates: Vec<usize> = (0..alive.len()).filter(|&i| alive[i]).collect();
            candidates[rng.random_range(0..candidates.len())]
        };
        alive[pick] = false;
        weights[pick] = 0.0;
        dropped.push(pick);
    }
    let mut out = perspective.clone();
    out.remove_positions(&dropped);
    Ok(out)
}

/// Union of the peers' posts minus the posts already held, ascending by id.
pub fn eligible_posts<'a>(
    held: &Perspective,
    peer_perspectives: impl IntoIterator<Item = &'a Perspective>,
) -> Vec<PostId> {
    let pool: BTreeSet<PostId> =
        peer_perspectives.into_iter().flat_map(|p| p.post_ids()).collect();
    pool.into_iter().filter(|id| !held.contains(*id)).collect()
}

/// One-sided relevance confirmation of a post that would move the opinion
/// to `with_post`.
///
/// Non-zero only when the post leaves the opinion on the same side of the
/// initial opinion as the previous one: `|o+ - o0|` if
/// `(o+ > o0) <=> (o_prev > o0)`, else 0.
pub fn confirmation(with_post: f64, initial: f64, previous: f64) -> f64 {
    if (with_post > initial) == (previous > initial) {
        libm::fabs(with_post - initial)
    } else {
        0.0
    }
}

/// Inputs for scoring candidates by confirmation.
pub struct ConfirmationContext<'a, O: ?Sized> {
    pub timeline: &'a Timeline,
    pub topic: &'a Topic,
    pub oracle: &'a O,
    pub initial_opinion: f64,
    pub previous_opinion: f64,
}

impl<O: Oracle + ?Sized> ConfirmationContext<'_, O> {
    /// Confirmation of appending `candidate` to `held`. Costs one elicitation.
    pub fn confirmation_of(&self, candidate: PostId, held: &Perspective) -> Result<f64, UpdateError> {
        let mut texts = held.texts(self.timeline)?;
        texts.push(self.timeline.text(candidate)?);
        let record = elicit(&texts, self.topic, self.oracle)?;
        Ok(confirmation(record.polarity, self.initial_opinion, self.previous_opinion))
    }
}

fn push_all(perspective: &mut Perspective, posts: &[PostId], now: Step) -> Result<(), ModelError> {
    for &p in posts {
        perspective.push(p, now)?;
    }
    Ok(())
}

/// Append `k` uniformly drawn candidates (all of them if fewer).
pub fn expand_random<R: Rng + ?Sized>(
    perspective: &mut Perspective,
    candidates: &[PostId],
    k: usize,
    now: Step,
    rng: &mut R,
) -> Result<(), ModelError> {
    let n = k.min(candidates.len());
    let picked: Vec<PostId> = index::sample(rng, candidates.len(), n).iter().map(|i| candidates[i]).collect();
    push_all(perspective, &picked, now)
}

/// Lazy confirmation bias: draw `k` candidates; keep them if all confirm,
/// otherwise draw `k` more and keep the `k` best-confirming of the whole
/// sample (earlier draws win ties). Returns the number of candidates scored.
pub fn expand_confirmation_lazy<R: Rng + ?Sized, O: Oracle + ?Sized>(
    perspective: &mut Perspective,
    candidates: &[PostId],
    k: usize,
    now: Step,
    rng: &mut R,
    ctx: &ConfirmationContext<'_, O>,
) -> Result<usize, UpdateError> {
    if k == 0 || candidates.is_empty() {
        return Ok(0);
    }
    let double = (2 * k).min(candidates.len());
    // one draw of up to 2k; the first k are the initial sample
    let order: Vec<PostId> = index::sample(rng, candidates.len(), double).iter().map(|i| candidates[i]).collect();
    let first = k.min(order.len());
    let held = perspective.clone();
    let mut scored: Vec<(PostId, f64)> = Vec::with_capacity(double);
    for &c in &order[..first] {
        scored.push((c, ctx.confirmation_of(c, &held)?));
    }
    if scored.iter().all(|(_, conf)| *conf > 0.0) {
        let picked: Vec<PostId> = scored.iter().map(|s| s.0).collect();
        push_all(perspective, &picked, now)?;
        return Ok(scored.len());
    }
    for &c in &order[first..] {
        scored.push((c, ctx.confirmation_of(c, &held)?));
    }
    let n_scored = scored.len();
    // stable sort keeps draw order among equal confirmations
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    let picked: Vec<PostId> = scored.iter().take(k).map(|s| s.0).collect();
    push_all(perspective, &picked, now)?;
    Ok(n_scored)
}

/// A peer as seen by the homophily rule.
#[derive(Debug, Clone, Copy)]
pub struct PeerView<'a> {
    pub index: usize,
    pub opinion: f64,
    pub perspective: &'a Perspective,
}

/// Homophily weight `(1 - |o_i - o_j|)^hpe`.
pub fn homophily_weight(own: f64, other: f64, hpe: f64) -> f64 {
    libm::pow(1.0 - libm::fabs(own - other), hpe)
}

/// Adopt `k` posts from a peer drawn with probability proportional to
/// [`homophily_weight`]; top up from further draws if that peer has too few
/// new posts. Never consults the oracle.
#[allow(clippy::too_many_arguments)]
pub fn expand_homophily<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    perspective: &mut Perspective,
    own_opinion: f64,
    peers: &[PeerView<'_>],
    k: usize,
    hpe: f64,
    now: Step,
    peer_rng: &mut R1,
    post_rng: &mut R2,
) -> Result<(), ModelError> {
    let mut remaining: Vec<&PeerView<'_>> = peers.iter().collect();
    let mut added = 0;
    while added < k && !remaining.is_empty() {
        let weights: Vec<f64> =
            remaining.iter().map(|p| homophily_weight(own_opinion, p.opinion, hpe)).collect();
        let total: f64 = weights.iter().sum();
        let chosen = if total > 0.0 && total.is_finite() {
            let mut u = peer_rng.random::<f64>() * total;
            let mut chosen = weights.iter().rposition(|w| *w > 0.0).unwrap_or(0);
            for (i, w) in weights.iter().enumerate() {
                if *w > 0.0 && u < *w {
                    chosen = i;
                    break;
                }
                u -= w;
            }
            chosen
        } else {
            peer_rng.random_range(0..remaining.len())
        };
        let peer = remaining.remove(chosen);
        let available: Vec<PostId> =
            peer.perspective.post_ids().filter(|id| !perspective.contains(*id)).collect();
        let n = (k - added).min(available.len());
        let picked: Vec<PostId> =
            index::sample(post_rng, available.len(), n).iter().map(|i| available[i]).collect();
        push_all(perspective, &picked, now)?;
        added += n;
    }
    Ok(())
}

/// Frozen previous-step state read by every update at step `now`.
pub struct UpdateInputs<'a, O: ?Sized> {
    pub now: Step,
    pub config: &'a SimulationConfig,
    pub topic: &'a Topic,
    pub timeline: &'a Timeline,
    pub oracle: &'a O,
    pub previous_perspectives: &'a [Perspective],
    pub previous_opinions: &'a [f64],
}

pub struct UpdateRngs<'a, R: ?Sized> {
    pub drop: &'a mut R,
    pub expand: &'a mut R,
    pub peer_draw: &'a mut R,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateOutcome {
    pub perspective: Perspective,
    /// Candidates scored by the confirmation rule.
    pub confirmation_scorings: usize,
}

/// Contract by the memory loss, re-insert the agent's post from the previous
/// step, then expand by the remaining count.
pub fn update_perspective<R: Rng + ?Sized, O: Oracle + ?Sized>(
    agent: usize,
    own_post: Option<PostId>,
    initial_opinion: f64,
    peers: &[usize],
    inputs: &UpdateInputs<'_, O>,
    rngs: UpdateRngs<'_, R>,
) -> Result<UpdateOutcome, UpdateError> {
    let config = inputs.config;
    let previous = &inputs.previous_perspectives[agent];
    let loss = config.memory_loss().min(previous.len());
    let mut next = contract(previous, loss, config.relevance_deprecation, inputs.now, rngs.drop)?;
    if let Some(post) = own_post {
        if !next.contains(post) && !next.is_full() {
            next.push(post, inputs.now)?;
        }
    }
    // equals the memory loss (minus the own post) unless a starved pool left
    // the perspective short at the previous step
    let k = next.free_slots();
    let mut scorings = 0;
    match config.expansion_rule {
        ExpansionRule::Random => {
            let pool = eligible_posts(&next, peers.iter().map(|&j| &inputs.previous_perspectives[j]));
            expand_random(&mut next, &pool, k, inputs.now, rngs.expand)?;
        }
        ExpansionRule::ConfirmationLazy => {
            let pool = eligible_posts(&next, peers.iter().map(|&j| &inputs.previous_perspectives[j]));
            let ctx = ConfirmationContext {
                timeline: inputs.timeline,
                topic: inputs.topic,
                oracle: inputs.oracle,
                initial_opinion,
                previous_opinion: inputs.previous_opinions[agent],
            };
            scorings = expand_confirmation_lazy(&mut next, &pool, k, inputs.now, rngs.expand, &ctx)?;
        }
        ExpansionRule::Homophily => {
            let views: Vec<PeerView<'_>> = peers
                .iter()
                .filter(|&&j| j != agent)
                .map(|&j| PeerView {
                    index: j,
                    opinion: inputs.previous_opinions[j],
                    perspective: &inputs.previous_perspectives[j],
                })
                .collect();
            expand_homophily(
                &mut next,
                inputs.previous_opinions[agent],
                &views,
                k,
                config.homophily_exponent,
                inputs.now,
                rngs.peer_draw,
                rngs.expand,
            )?;
        }
    }
    Ok(UpdateOutcome { perspective: next, confirmation_scorings: scorings })
}
