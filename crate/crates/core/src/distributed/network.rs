//! Entities, messages, the in-process router and the locality audit.

use std::fmt;

use crate::error::{Error, Result};
use crate::instance::Instance;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Entity {
    /// Index into the placement's sources.
    Source(usize),
    Edge(usize),
    /// Index into the placement's learners.
    Learner(usize),
}

impl fmt::Display for Entity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Entity::Source(i) => write!(f, "source{i}"),
            Entity::Edge(i) => write!(f, "edge{i}"),
            Entity::Learner(i) => write!(f, "learner{i}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Source to learner, riding along with data.
    Downstream,
    /// Learner to source, as a control message.
    Upstream,
}

/// What an edge writes into a passing control message.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeReport {
    pub edge: usize,
    pub q: f64,
    pub capacity: f64,
    /// θ-norm over the member paths of the message's group crossing the
    /// edge, i.e. `(v_{s,t}^e)^{1/θ}`.
    pub group_norm: f64,
    /// `e^{g_e}` for the exp-penalty engine, `g_e` for the standard one.
    pub penalty: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    /// Allocated rate λ_p, announced to the path.
    Rate(f64),
    /// Current primal iterate v_p.
    Primal(f64),
    /// Gradient coordinate computed by the learner.
    Gradient(f64),
    /// Reports collected from traversed edges, plus an optional value
    /// written by the learner that originated the message.
    Collected { reports: Vec<EdgeReport>, learner_value: Option<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Message {
    pub path: usize,
    pub direction: Direction,
    pub origin: Entity,
    pub payload: Payload,
}

/// Delivers messages hop by hop along their own path only.
pub struct Router<'a> {
    inst: &'a Instance,
    pub sent: u64,
}

impl<'a> Router<'a> {
    pub fn new(inst: &'a Instance) -> Self {
        Router { inst, sent: 0 }
    }

    /// Entities visited after the origin, in traversal order.
    pub fn hops(&self, msg: &Message) -> Vec<Entity> {
        let p = &self.inst.paths.paths[msg.path];
        match msg.direction {
            Direction::Downstream => p.edges.iter().map(|&e| Entity::Edge(e)).chain([Entity::Learner(p.learner)]).collect(),
            Direction::Upstream => p.edges.iter().rev().map(|&e| Entity::Edge(e)).chain([Entity::Source(p.source)]).collect(),
        }
    }

    pub fn endpoint(&self, path: usize, direction: Direction) -> Entity {
        let p = &self.inst.paths.paths[path];
        match direction {
            Direction::Downstream => Entity::Learner(p.learner),
            Direction::Upstream => Entity::Source(p.source),
        }
    }

    pub fn count(&mut self) {
        self.sent += 1;
    }
}

/// One read of a datum owned by `owner`, obtained through a message on
/// `via` (or directly when reading own state).
#[derive(Clone, Debug, PartialEq)]
pub struct ReadRecord {
    pub round: usize,
    pub reader: Entity,
    pub owner: Entity,
    pub variable: &'static str,
    pub via: Option<usize>,
}

/// Checks every read against path adjacency as it happens.
#[derive(Clone, Debug, Default)]
pub struct LocalityAudit {
    pub reads: u64,
    pub violations: Vec<String>,
    /// Full log, kept only when requested.
    pub log: Option<Vec<ReadRecord>>,
}

impl LocalityAudit {
    pub fn with_log() -> Self {
        LocalityAudit { log: Some(Vec::new()), ..Default::default() }
    }

    pub fn record(&mut self, inst: &Instance, rec: ReadRecord) {
        self.reads += 1;
        let ok = rec.reader == rec.owner
            || rec.via.is_some_and(|p| p < inst.num_paths() && on_path(inst, p, rec.reader) && on_path(inst, p, rec.owner));
        if !ok {
            self.violations.push(format!(
                "round {}: {} read {} of {} via {:?}",
                rec.round, rec.reader, rec.variable, rec.owner, rec.via
            ));
        }
        if let Some(log) = &mut self.log {
            log.push(rec);
        }
    }

    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn check(&self) -> Result<()> {
        match self.violations.first() {
            None => Ok(()),
            Some(v) => Err(Error::Locality(format!("{} non-adjacent reads, first: {v}", self.violations.len()))),
        }
    }
}

pub fn on_path(inst: &Instance, path: usize, who: Entity) -> bool {
    let p = &inst.paths.paths[path];
    match who {
        Entity::Source(s) => p.source == s,
        Entity::Learner(l) => p.learner == l,
        Entity::Edge(e) => p.edges.contains(&e),
    }
}
