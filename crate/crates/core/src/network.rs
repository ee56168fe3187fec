//! Lockstep simulation of the two communication patterns: broadcast with a
//! barrier (Algorithm 1) and a directed ring (Algorithm 2).
//!
//! Users only see points that were delivered to their inbox over an edge of
//! the topology. The virtual coordinator of the broadcast pattern collects
//! the iterates, averages them in user order and redistributes the average.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::Point;
use crate::problem::ProblemInstance;
use crate::rng::TieBreaker;
use crate::schedule::StepSchedule;
use crate::solvers::{
    check_step_input, check_users_finite, finite_or_diverged, incremental_user_update, parallel_user_update,
    IterationState, UserStep,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Topology {
    Broadcast { users: usize },
    Ring { users: usize },
}

impl Topology {
    pub fn users(&self) -> usize {
        match *self {
            Topology::Broadcast { users } | Topology::Ring { users } => users,
        }
    }

    /// Ring successor of a 1-based user id; `succ(I) = 1`.
    pub fn succ(&self, user: usize) -> usize {
        user % self.users() + 1
    }

    /// Ring predecessor of a 1-based user id; `pred(1) = I`.
    pub fn pred(&self, user: usize) -> usize {
        if user == 1 {
            self.users()
        } else {
            user - 1
        }
    }

    /// Whether `reader` may receive data sent by `source`.
    pub fn has_edge(&self, source: Endpoint, reader: Endpoint) -> bool {
        match (*self, source, reader) {
            (_, Endpoint::All, _) | (_, _, Endpoint::All) => false,
            (Topology::Broadcast { .. }, Endpoint::User(_), _) => true,
            (Topology::Broadcast { .. }, Endpoint::Coordinator, Endpoint::User(_)) => true,
            (Topology::Ring { .. }, Endpoint::User(s), Endpoint::User(r)) => self.pred(r) == s,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    /// 1-based user id.
    User(usize),
    Coordinator,
    All,
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::User(i) => write!(f, "{i}"),
            Endpoint::Coordinator => f.write_str("coordinator"),
            Endpoint::All => f.write_str("ALL"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadKind {
    Iterate,
    Average,
}

impl fmt::Display for PayloadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PayloadKind::Iterate => "iterate",
            PayloadKind::Average => "average",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub n: usize,
    pub from: Endpoint,
    pub to: Endpoint,
    pub kind: PayloadKind,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MessageLog {
    pub entries: Vec<Message>,
}

impl MessageLog {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn round(&self, n: usize) -> impl Iterator<Item = &Message> {
        self.entries.iter().filter(move |m| m.n == n)
    }
}

/// A network of `I` users plus, for broadcast, a virtual coordinator.
#[derive(Debug, Clone)]
pub struct Network {
    topology: Topology,
    /// Latest point delivered to each receiver, keyed by sender.
    inboxes: BTreeMap<Endpoint, BTreeMap<Endpoint, Point>>,
    pub log: MessageLog,
}

impl Network {
    /// A network whose users hold `x0` as if it had arrived over their incoming edge.
    pub fn new(topology: Topology, x0: &Point) -> Result<Self> {
        let users = topology.users();
        if users == 0 {
            return Err(Error::InvalidInput("a network needs at least one user".into()));
        }
        let mut net = Network {
            topology,
            inboxes: BTreeMap::new(),
            log: MessageLog::default(),
        };
        match topology {
            Topology::Broadcast { .. } => {
                for i in 1..=users {
                    net.deliver(Endpoint::Coordinator, Endpoint::User(i), x0.clone());
                }
            }
            Topology::Ring { .. } => {
                net.deliver(Endpoint::User(users), Endpoint::User(1), x0.clone());
            }
        }
        Ok(net)
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    fn deliver(&mut self, from: Endpoint, to: Endpoint, p: Point) {
        self.inboxes.entry(to).or_default().insert(from, p);
    }

    fn send(&mut self, n: usize, from: Endpoint, to: Endpoint, kind: PayloadKind, p: &Point) {
        self.log.entries.push(Message { n, from, to, kind });
        match to {
            Endpoint::All => {
                if from != Endpoint::Coordinator {
                    self.deliver(from, Endpoint::Coordinator, p.clone());
                }
                for i in 1..=self.topology.users() {
                    self.deliver(from, Endpoint::User(i), p.clone());
                }
            }
            other => self.deliver(from, other, p.clone()),
        }
    }

    /// What `reader` last received from `source`. Reading across a non-edge
    /// is a topology violation.
    pub fn read(&self, reader: Endpoint, source: Endpoint) -> Result<&Point> {
        let allowed = match reader {
            Endpoint::Coordinator => {
                matches!(self.topology, Topology::Broadcast { .. }) && matches!(source, Endpoint::User(_))
            }
            _ => self.topology.has_edge(source, reader),
        };
        if !allowed {
            return Err(Error::TopologyViolation {
                reader: reader.to_string(),
                source_node: source.to_string(),
            });
        }
        self.inboxes
            .get(&reader)
            .and_then(|inbox| inbox.get(&source))
            .ok_or_else(|| Error::InvalidInput(format!("nothing delivered from {source} to {reader}")))
    }

    /// The shared iterate the next round starts from.
    pub fn current(&self) -> Result<Point> {
        match self.topology {
            Topology::Broadcast { .. } => self.read(Endpoint::User(1), Endpoint::Coordinator).cloned(),
            Topology::Ring { users } => self.read(Endpoint::User(1), Endpoint::User(users)).cloned(),
        }
    }

    /// Runs one lockstep round with the algorithm that matches the topology
    /// and returns the iteration together with the messages it sent.
    pub fn simulate_round(
        &mut self,
        inst: &ProblemInstance,
        n: usize,
        sched: &StepSchedule,
        projected: bool,
        ties: &mut [TieBreaker],
        fan_out: bool,
    ) -> Result<(IterationState, Vec<Message>)> {
        if self.topology.users() != inst.num_users() {
            return Err(Error::InvalidInput(format!(
                "topology has {} users, instance has {}",
                self.topology.users(),
                inst.num_users()
            )));
        }
        let lambda = sched.lambda(n);
        let before = self.log.len();
        let state = match self.topology {
            Topology::Broadcast { users } => {
                let inputs: Vec<Point> = (1..=users)
                    .map(|i| self.read(Endpoint::User(i), Endpoint::Coordinator).cloned())
                    .collect::<Result<_>>()?;
                check_step_input(inst, &inputs[0], ties)?;
                let work = |(i, tie): (usize, &mut TieBreaker)| {
                    parallel_user_update(inst, i, &inputs[i], lambda, tie, projected)
                };
                let steps: Vec<UserStep> = if fan_out {
                    ties.par_iter_mut().enumerate().map(work).collect::<Result<_>>()?
                } else {
                    ties.iter_mut().enumerate().map(work).collect::<Result<_>>()?
                };
                check_users_finite(&steps, n)?;
                for (i, s) in steps.iter().enumerate() {
                    self.send(n, Endpoint::User(i + 1), Endpoint::All, PayloadKind::Iterate, &s.output);
                }
                let received: Vec<Point> = (1..=users)
                    .map(|i| self.read(Endpoint::Coordinator, Endpoint::User(i)).cloned())
                    .collect::<Result<_>>()?;
                let next = finite_or_diverged(Point::mean(&received)?, n)?;
                self.send(n, Endpoint::Coordinator, Endpoint::All, PayloadKind::Average, &next);
                IterationState {
                    n,
                    x: inputs[0].clone(),
                    lambda,
                    users: steps,
                    sweep: Vec::new(),
                    next,
                }
            }
            Topology::Ring { users } => {
                let x_n = self.read(Endpoint::User(1), Endpoint::User(users))?.clone();
                check_step_input(inst, &x_n, ties)?;
                let mut steps = Vec::with_capacity(users);
                for (i, tie) in ties.iter_mut().enumerate() {
                    let me = i + 1;
                    let input = self.read(Endpoint::User(me), Endpoint::User(self.topology.pred(me)))?.clone();
                    let step = incremental_user_update(inst, i, &input, lambda, tie, projected)?;
                    self.send(
                        n,
                        Endpoint::User(me),
                        Endpoint::User(self.topology.succ(me)),
                        PayloadKind::Iterate,
                        &step.output,
                    );
                    steps.push(step);
                }
                check_users_finite(&steps, n)?;
                let next = finite_or_diverged(self.current()?, n)?;
                IterationState {
                    n,
                    x: x_n,
                    lambda,
                    users: steps,
                    sweep: Vec::new(),
                    next,
                }
            }
        };
        Ok((state, self.log.entries[before..].to_vec()))
    }
}
