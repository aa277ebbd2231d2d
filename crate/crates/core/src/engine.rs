//! The main loop of one conversation.
//!
//! Burn-in steps seed perspectives from the corpus and elicit opinions. Every
//! later step, each agent selects peers from the previous step's opinions,
//! updates its perspective from the previous step's perspectives, maybe
//! authors a post, and is elicited. Agents only read frozen previous-step
//! state, so the per-agent work can run in any order or in parallel; posts
//! are appended afterwards in ascending agent order.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::config::SimulationConfig;
use crate::corpus::{seed_plans, Corpus};
use crate::elicitation::elicit_perspective;
use crate::error::{EngineError, ModelError};
use crate::generation::{compose_post, should_contribute};
use crate::model::{
    AgentState, AgentStepRecord, ConversationTrace, NewPost, OpinionRecord, Perspective, PostId,
    Step, StepRecord, Timeline, Topic,
};
use crate::oracle::{Oracle, OracleError};
use crate::peers::peers_of;
use crate::rng::{substream, Purpose};
use crate::update::{update_perspective, UpdateError, UpdateInputs, UpdateRngs};

/// Runs per-agent work for one step. Implementations may reorder or
/// parallelize, but must return results indexed by agent.
pub trait AgentExecutor {
    fn map<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send;
}

/// Ascending agent order on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl AgentExecutor for Sequential {
    fn map<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}

/// Processes agents in a fixed permutation (indices beyond `n` are skipped,
/// missing ones appended in ascending order).
#[derive(Debug, Clone, Default)]
pub struct Permuted(pub Vec<usize>);

impl AgentExecutor for Permuted {
    fn map<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        let mut order: Vec<usize> = self.0.iter().copied().filter(|&i| i < n).collect();
        for i in 0..n {
            if !order.contains(&i) {
                order.push(i);
            }
        }
        let mut slots: Vec<Option<R>> = (0..n).map(|_| None).collect();
        for i in order {
            slots[i] = Some(f(i));
        }
        slots.into_iter().map(|r| r.expect("every agent processed")).collect()
    }
}

/// A run that stopped early. The trace holds every completed step and is
/// marked incomplete.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub trace: Box<ConversationTrace>,
    pub error: EngineError,
}

impl core::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "run with seed {} aborted: {}", self.trace.seed, self.error)
    }
}

struct AgentOutput {
    perspective: Perspective,
    opinion: OpinionRecord,
    post: Option<NewPost>,
}

fn oracle_err(step: Step, agent: usize) -> impl Fn(OracleError) -> EngineError {
    move |source| EngineError::Oracle { step, agent, source }
}

fn model_err(step: Step, agent: usize) -> impl Fn(ModelError) -> EngineError {
    move |source| EngineError::Model { step, agent, source }
}

fn update_err(step: Step, agent: usize, e: UpdateError) -> EngineError {
    match e {
        UpdateError::Oracle(source) => EngineError::Oracle { step, agent, source },
        UpdateError::Model(source) => EngineError::Model { step, agent, source },
    }
}

struct Run<'a, O: ?Sized> {
    config: &'a SimulationConfig,
    topic: &'a Topic,
    oracle: &'a O,
    seed: u64,
    timeline: Timeline,
    agents: Vec<AgentState>,
    steps: Vec<StepRecord>,
}

impl<'a, O: Oracle + Sync + ?Sized> Run<'a, O> {
    fn into_trace(self, complete: bool) -> ConversationTrace {
        ConversationTrace {
            config: self.config.clone(),
            topic: self.topic.clone(),
            seed: self.seed,
            timeline: self.timeline,
            steps: self.steps,
            complete,
        }
    }

    fn record_step(&mut self, step: Step, contributed: &[Option<PostId>]) {
        let agents = self
            .agents
            .iter()
            .zip(contributed)
            .map(|(a, c)| AgentStepRecord {
                perspective: a.perspective.entries().to_vec(),
                opinion: *a.opinion_history.last().expect("elicited this step"),
                contributed: *c,
            })
            .collect();
        self.steps.push(StepRecord { step, agents });
    }

    fn burn_in_step<E: AgentExecutor>(
        &mut self,
        step: Step,
        plans: &[crate::corpus::SeedPlan],
        executor: &E,
    ) -> Result<(), EngineError> {
        self.timeline.advance_to(step).map_err(model_err(step, 0))?;
        for (agent, plan) in self.agents.iter_mut().zip(plans) {
            for idx in plan.at(step) {
                agent
                    .perspective
                    .push(PostId(idx as u32), step)
                    .map_err(model_err(step, agent.index))?;
            }
        }
        let (timeline, topic, oracle, agents) = (&self.timeline, self.topic, self.oracle, &self.agents);
        let records = executor.map(agents.len(), |i| {
            elicit_perspective(&agents[i].perspective, timeline, topic, oracle).map_err(oracle_err(step, i))
        });
        let records = records.into_iter().collect::<Result<Vec<_>, _>>()?;
        for (agent, record) in self.agents.iter_mut().zip(records) {
            agent.opinion_history.push(record);
            if step + 1 == self.config.burn_in {
                agent.initial_opinion = Some(record.polarity);
            }
        }
        let none = alloc::vec![None; self.agents.len()];
        self.record_step(step, &none);
        Ok(())
    }

    fn agent_step(
        &self,
        agent: usize,
        step: Step,
        previous_perspectives: &[Perspective],
        previous_opinions: &[f64],
        previous_known: &[Option<f64>],
    ) -> Result<AgentOutput, EngineError> {
        let config = self.config;
        let state = &self.agents[agent];
        let peers = peers_of(agent, config.peer_rule, previous_known, config.epsilon)
            .map_err(model_err(step, agent))?;
        let inputs = UpdateInputs {
            now: step,
            config,
            topic: self.topic,
            timeline: &self.timeline,
            oracle: self.oracle,
            previous_perspectives,
            previous_opinions,
        };
        let mut drop = substream(self.seed, agent, step, Purpose::Drop);
        let mut expand = substream(self.seed, agent, step, Purpose::Expand);
        let mut peer_draw = substream(self.seed, agent, step, Purpose::PeerDraw);
        let initial = state.initial_opinion.unwrap_or(previous_opinions[agent]);
        let outcome = update_perspective(
            agent,
            state.pending_own_post,
            initial,
            &peers,
            &inputs,
            UpdateRngs { drop: &mut drop, expand: &mut expand, peer_draw: &mut peer_draw },
        )
        .map_err(|e| update_err(step, agent, e))?;
        let perspective = outcome.perspective;

        let mut post = None;
        let mut coin = substream(self.seed, agent, step, Purpose::Contribute);
        if should_contribute(config.agent_type, config.contribution_probability, &mut coin) {
            let profile = config.agent_type.profile().expect("generating agents have a profile");
            let texts = perspective.texts(&self.timeline).map_err(model_err(step, agent))?;
            let mut decode = substream(self.seed, agent, step, Purpose::Decode);
            match compose_post(agent, &texts, self.topic, config.decoding(profile), self.oracle, &mut decode, step) {
                Ok(p) => post = Some(p),
                Err(OracleError::EmptyGeneration) => {
                    log::debug!("step {step}, agent {agent}: empty generation, contribution skipped");
                }
                Err(e) => return Err(oracle_err(step, agent)(e)),
            }
        }

        let opinion = elicit_perspective(&perspective, &self.timeline, self.topic, self.oracle)
            .map_err(oracle_err(step, agent))?;
        Ok(AgentOutput { perspective, opinion, post })
    }

    fn dynamic_step<E: AgentExecutor>(&mut self, step: Step, executor: &E) -> Result<(), EngineError> {
        self.timeline.advance_to(step).map_err(model_err(step, 0))?;
        let previous_perspectives: Vec<Perspective> =
            self.agents.iter().map(|a| a.perspective.clone()).collect();
        let previous_known: Vec<Option<f64>> = self.agents.iter().map(AgentState::last_opinion).collect();
        let previous_opinions: Vec<f64> = previous_known.iter().map(|o| o.unwrap_or(0.5)).collect();

        let this = &*self;
        let outputs = executor.map(this.agents.len(), |i| {
            this.agent_step(i, step, &previous_perspectives, &previous_opinions, &previous_known)
        });
        // report the failing agent with the lowest index
        let outputs = outputs.into_iter().collect::<Result<Vec<_>, _>>()?;

        let mut contributed = Vec::with_capacity(outputs.len());
        for (i, out) in outputs.into_iter().enumerate() {
            let id = match out.post {
                Some(p) => Some(self.timeline.append(p).map_err(model_err(step, i))?),
                None => None,
            };
            let agent = &mut self.agents[i];
            agent.perspective = out.perspective;
            agent.opinion_history.push(out.opinion);
            agent.pending_own_post = id;
            contributed.push(id);
        }
        self.record_step(step, &contributed);
        Ok(())
    }
}

/// Execute one conversation. Identical inputs give identical traces,
/// whatever executor is used.
pub fn run_conversation<O, E>(
    config: &SimulationConfig,
    topic: &Topic,
    corpus: &Corpus,
    oracle: &O,
    seed: u64,
    executor: &E,
) -> Result<ConversationTrace, RunFailure>
where
    O: Oracle + Sync + ?Sized,
    E: AgentExecutor,
{
    let mut run = Run {
        config,
        topic,
        oracle,
        seed,
        timeline: Timeline::new(),
        agents: (0..config.n_agents).map(|i| AgentState::new(i, config.perspective_capacity)).collect(),
        steps: Vec::new(),
    };
    let setup = (|| {
        config.validate()?;
        topic.validate().map_err(|e| e.within("topic"))?;
        let plans = seed_plans(corpus.len(), config, seed)?;
        let timeline = corpus.timeline().map_err(model_err(0, 0))?;
        Ok::<_, EngineError>((plans, timeline))
    })();
    let plans = match setup {
        Ok((plans, timeline)) => {
            run.timeline = timeline;
            plans
        }
        Err(error) => return Err(RunFailure { trace: Box::new(run.into_trace(false)), error }),
    };

    let burn_in_end = config.burn_in.min(config.t_max);
    for step in 0..burn_in_end {
        if let Err(error) = run.burn_in_step(step, &plans, executor) {
            return Err(RunFailure { trace: Box::new(run.into_trace(false)), error });
        }
    }
    for step in config.burn_in..config.t_max {
        if let Err(error) = run.dynamic_step(step, executor) {
            return Err(RunFailure { trace: Box::new(run.into_trace(false)), error });
        }
    }
    Ok(run.into_trace(true))
}
