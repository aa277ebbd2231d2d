//! Line-delimited JSON traces.
//!
//! A trace file starts with one `header` record, followed by one `post`
//! record per timeline post and one `step` record per simulated step. See
//! `docs/formats.md` for the field reference.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use agora_core::{
    AgentStepRecord, ConversationTrace, OpinionRecord, PerspectiveEntry, Post, PostId, SimulationConfig,
    Step, StepRecord, Timeline, Topic,
};
use serde::{Deserialize, Serialize};

pub const TRACE_FORMAT: &str = "agora-trace/1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Header {
    pub format: String,
    pub seed: u64,
    pub scenario: String,
    pub complete: bool,
    pub n_posts: usize,
    pub n_steps: usize,
    pub config: SimulationConfig,
    pub topic: Topic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentLine {
    /// `(post id, age)` pairs in perspective order.
    pub perspective: Vec<(PostId, usize)>,
    pub ppl_pro: f64,
    pub ppl_con: f64,
    pub polarity: f64,
    pub pertinence: f64,
    pub contributed: Option<PostId>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepLine {
    pub step: Step,
    pub agents: Vec<AgentLine>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Record {
    Header(Box<Header>),
    Post(Post),
    Step(StepLine),
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Corrupt { line: usize, message: String },
}

fn corrupt(line: usize, message: impl Into<String>) -> TraceError {
    TraceError::Corrupt { line, message: message.into() }
}

pub fn header_of(trace: &ConversationTrace) -> Header {
    Header {
        format: TRACE_FORMAT.to_string(),
        seed: trace.seed,
        scenario: trace.scenario_label(),
        complete: trace.complete,
        n_posts: trace.timeline.len(),
        n_steps: trace.steps.len(),
        config: trace.config.clone(),
        topic: trace.topic.clone(),
    }
}

fn step_line(step: &StepRecord) -> StepLine {
    StepLine {
        step: step.step,
        agents: step
            .agents
            .iter()
            .map(|a| AgentLine {
                perspective: a.perspective.iter().map(|e| (e.post, e.age(step.step))).collect(),
                ppl_pro: a.opinion.ppl_pro,
                ppl_con: a.opinion.ppl_con,
                polarity: a.opinion.polarity,
                pertinence: a.opinion.pertinence,
                contributed: a.contributed,
            })
            .collect(),
    }
}

pub fn write_trace(trace: &ConversationTrace, mut out: impl Write) -> std::io::Result<()> {
    let mut line = |record: &Record| -> std::io::Result<()> {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")
    };
    line(&Record::Header(Box::new(header_of(trace))))?;
    for post in trace.timeline.posts() {
        line(&Record::Post(post.clone()))?;
    }
    for step in &trace.steps {
        line(&Record::Step(step_line(step)))?;
    }
    Ok(())
}

pub fn trace_to_string(trace: &ConversationTrace) -> String {
    let mut buf = Vec::new();
    write_trace(trace, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("json is utf-8")
}

/// Write via a temporary sibling file so readers never see partial traces.
pub fn save_trace(trace: &ConversationTrace, path: &Path) -> std::io::Result<()> {
    let tmp = path.with_extension("jsonl.tmp");
    fs::write(&tmp, trace_to_string(trace))?;
    fs::rename(tmp, path)
}

pub fn read_trace(reader: impl Read) -> Result<ConversationTrace, TraceError> {
    let mut header: Option<Header> = None;
    let mut header_line = 0;
    let mut posts = Vec::new();
    let mut steps = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let n = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| corrupt(n, e.to_string()))?;
        match (record, &header) {
            (Record::Header(h), None) => {
                if h.format != TRACE_FORMAT {
                    return Err(corrupt(n, format!("unsupported format {:?}", h.format)));
                }
                header = Some(*h);
                header_line = n;
            }
            (Record::Header(_), Some(_)) => return Err(corrupt(n, "second header")),
            (_, None) => return Err(corrupt(n, "record before header")),
            (Record::Post(p), Some(_)) => {
                if !steps.is_empty() {
                    return Err(corrupt(n, "post after step records"));
                }
                posts.push(p);
            }
            (Record::Step(s), Some(_)) => steps.push((n, s)),
        }
    }
    let header = header.ok_or_else(|| corrupt(0, "missing header"))?;
    if posts.len() != header.n_posts || steps.len() != header.n_steps {
        return Err(corrupt(
            header_line,
            format!(
                "header announces {} posts and {} steps, found {} and {}",
                header.n_posts,
                header.n_steps,
                posts.len(),
                steps.len()
            ),
        ));
    }
    let mut timeline = Timeline::from_posts(posts).map_err(|e| corrupt(header_line, e.to_string()))?;
    if let Some((n, last)) = steps.last() {
        timeline.advance_to(last.step).map_err(|e| corrupt(*n, e.to_string()))?;
    }
    let n_agents = steps.first().map_or(0, |(_, s)| s.agents.len());
    let mut records = Vec::with_capacity(steps.len());
    for (expected, (n, s)) in steps.into_iter().enumerate() {
        if s.step != expected {
            return Err(corrupt(n, format!("expected step {expected}, found {}", s.step)));
        }
        if s.agents.len() != n_agents {
            return Err(corrupt(n, "agent count changes between steps"));
        }
        let mut agents = Vec::with_capacity(n_agents);
        for a in s.agents {
            let opinion = OpinionRecord {
                ppl_pro: a.ppl_pro,
                ppl_con: a.ppl_con,
                polarity: a.polarity,
                pertinence: a.pertinence,
            };
            if !opinion.is_consistent() {
                return Err(corrupt(n, "polarity or pertinence does not match the perplexities"));
            }
            let mut perspective = Vec::with_capacity(a.perspective.len());
            for (post, age) in a.perspective {
                let submitted = timeline
                    .get(post)
                    .ok_or_else(|| corrupt(n, format!("unknown post {post}")))?
                    .submitted_at;
                if age > s.step || submitted > s.step {
                    return Err(corrupt(n, format!("post {post} cannot be held at step {}", s.step)));
                }
                perspective.push(PerspectiveEntry { post, added_at: s.step - age });
            }
            agents.push(AgentStepRecord { perspective, opinion, contributed: a.contributed });
        }
        records.push(StepRecord { step: s.step, agents });
    }
    Ok(ConversationTrace {
        config: header.config,
        topic: header.topic,
        seed: header.seed,
        timeline,
        steps: records,
        complete: header.complete,
    })
}

pub fn load_trace(path: &Path) -> Result<ConversationTrace, TraceError> {
    read_trace(fs::File::open(path)?)
}
