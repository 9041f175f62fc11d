//! Directed acyclic graphs over named nodes.

use std::collections::HashMap;

use super::ScmError;
use crate::subset::{self, Mask, MAX_VARS};

/// Node names with parent lists; parents are indices into the name list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    names: Vec<String>,
    parents: Vec<Vec<usize>>,
}

impl Dag {
    /// Validates unique names and known parent references. Acyclicity is
    /// checked by [`Dag::topo_order`].
    pub fn new<S: AsRef<str>>(nodes: &[(S, Vec<S>)]) -> Result<Self, ScmError> {
        if nodes.is_empty() {
            return Err(ScmError::Graph("graph has no nodes".into()));
        }
        if nodes.len() > MAX_VARS {
            return Err(ScmError::Graph(format!(
                "{} nodes exceed the cap of {MAX_VARS}",
                nodes.len()
            )));
        }
        let mut index = HashMap::new();
        let mut names = Vec::with_capacity(nodes.len());
        for (i, (name, _)) in nodes.iter().enumerate() {
            let name = name.as_ref();
            if name.is_empty() {
                return Err(ScmError::Graph(format!("node {i} has an empty name")));
            }
            if index.insert(name.to_string(), i).is_some() {
                return Err(ScmError::Graph(format!("duplicate node `{name}`")));
            }
            names.push(name.to_string());
        }
        let mut parents = Vec::with_capacity(nodes.len());
        for (name, ps) in nodes {
            let mut list = Vec::with_capacity(ps.len());
            for p in ps {
                let p = p.as_ref();
                let j = *index
                    .get(p)
                    .ok_or_else(|| ScmError::UnknownNode(p.to_string()))?;
                if list.contains(&j) {
                    return Err(ScmError::Graph(format!(
                        "`{p}` listed twice as a parent of `{}`",
                        name.as_ref()
                    )));
                }
                list.push(j);
            }
            parents.push(list);
        }
        Ok(Self { names, parents })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn parents(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn index_of(&self, name: &str) -> Result<usize, ScmError> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| ScmError::UnknownNode(name.to_string()))
    }

    pub fn mask_of<S: AsRef<str>>(&self, names: &[S]) -> Result<Mask, ScmError> {
        names
            .iter()
            .try_fold(0, |m, n| Ok(m | (1 << self.index_of(n.as_ref())?)))
    }

    pub fn names_of(&self, mask: Mask) -> Vec<String> {
        subset::indices(mask)
            .map(|i| self.names[i].clone())
            .collect()
    }

    /// Kahn's algorithm; among ready nodes the earliest declared goes first.
    pub fn topo_order(&self) -> Result<Vec<usize>, ScmError> {
        let n = self.len();
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut children = vec![Vec::new(); n];
        for (c, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                children[p].push(c);
            }
        }
        let mut done = vec![false; n];
        let mut order = Vec::with_capacity(n);
        while let Some(next) = (0..n).find(|&i| !done[i] && indegree[i] == 0) {
            done[next] = true;
            order.push(next);
            for &c in &children[next] {
                indegree[c] -= 1;
            }
        }
        if order.len() == n {
            Ok(order)
        } else {
            Err(ScmError::Cycle(self.find_cycle(&done)))
        }
    }

    /// Walks parent links among unfinished nodes until one repeats; the cycle is
    /// listed along edge direction starting at its earliest declared node.
    fn find_cycle(&self, done: &[bool]) -> Vec<String> {
        let start = done.iter().position(|d| !d).unwrap_or(0);
        let mut path = vec![start];
        let mut cur = start;
        loop {
            let next = self.parents[cur]
                .iter()
                .copied()
                .find(|&p| !done[p])
                .unwrap_or(start);
            if let Some(at) = path.iter().position(|&v| v == next) {
                let mut cycle: Vec<usize> = path[at..].iter().rev().copied().collect();
                let first = (0..cycle.len()).min_by_key(|&i| cycle[i]).unwrap_or(0);
                cycle.rotate_left(first);
                cycle.push(cycle[0]);
                return cycle.into_iter().map(|v| self.names[v].clone()).collect();
            }
            path.push(next);
            cur = next;
        }
    }

    /// Smallest ancestral superset of `mask`.
    pub fn ancestral_mask(&self, mask: Mask) -> Mask {
        let mut closure = mask;
        let mut frontier: Vec<usize> = subset::indices(mask).collect();
        while let Some(v) = frontier.pop() {
            for &p in &self.parents[v] {
                if !subset::contains(closure, p) {
                    closure |= 1 << p;
                    frontier.push(p);
                }
            }
        }
        closure
    }

    /// Names of the smallest ancestral superset of `set`, in declaration order.
    pub fn ancestral_closure<S: AsRef<str>>(&self, set: &[S]) -> Result<Vec<String>, ScmError> {
        Ok(self.names_of(self.ancestral_mask(self.mask_of(set)?)))
    }
}
