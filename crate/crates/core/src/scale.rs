//! Rating scales: ordered states ending in an absorbing default, the withdrawal
//! token, letter-grade groupings of notched states and the investment-grade boundary.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_WITHDRAWAL: &str = "RW";

/// Largest letter group. Split letter grades have three notches.
pub const MAX_GROUP_SIZE: usize = 3;

const NOTCHED: [&str; 18] = [
    "Aaa", "Aa1", "Aa2", "Aa3", "A1", "A2", "A3", "Baa1", "Baa2", "Baa3", "Ba1", "Ba2", "Ba3",
    "B1", "B2", "B3", "Caa", "D",
];

const LETTERS: [(&str, &[&str]); 8] = [
    ("Aaa", &["Aaa"]),
    ("Aa", &["Aa1", "Aa2", "Aa3"]),
    ("A", &["A1", "A2", "A3"]),
    ("Baa", &["Baa1", "Baa2", "Baa3"]),
    ("Ba", &["Ba1", "Ba2", "Ba3"]),
    ("B", &["B1", "B2", "B3"]),
    ("Caa", &["Caa"]),
    ("D", &["D"]),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LetterGroup {
    pub name: String,
    pub members: Vec<usize>,
}

/// A state named in an event row: either a rating of the scale or a letter grade
/// whose notch is unobserved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StateRef {
    Rating(usize),
    Group(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatingScale {
    states: Vec<String>,
    withdrawal: String,
    groups: Vec<LetterGroup>,
    group_of: Vec<usize>,
    ig_boundary: Option<usize>,
    ids: Vec<usize>,
    index: HashMap<String, usize>,
    group_index: HashMap<String, usize>,
}

/// On-disk form of a rating scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScaleConfig {
    pub states: Vec<String>,
    #[serde(default = "default_withdrawal")]
    pub withdrawal: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub letter_groups: BTreeMap<String, Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ig_hy_boundary: Option<String>,
}

fn default_withdrawal() -> String {
    DEFAULT_WITHDRAWAL.to_string()
}

impl RatingScale {
    /// A scale whose letter groups are all singletons.
    pub fn new<S: AsRef<str>>(states: &[S]) -> Result<Self> {
        Self::build(
            states.iter().map(|s| s.as_ref().to_string()).collect(),
            DEFAULT_WITHDRAWAL.to_string(),
            Vec::new(),
            None,
        )
    }

    pub fn from_config(config: &ScaleConfig) -> Result<Self> {
        let states = config.states.clone();
        let lookup = |name: &str| {
            states
                .iter()
                .position(|s| s == name)
                .ok_or_else(|| Error::Scale(format!("unknown state {name:?}")))
        };
        let mut groups = Vec::with_capacity(config.letter_groups.len());
        for (name, members) in &config.letter_groups {
            let members = members
                .iter()
                .map(|m| lookup(m))
                .collect::<Result<Vec<_>>>()?;
            groups.push((name.clone(), members));
        }
        let boundary = config.ig_hy_boundary.as_deref().map(lookup).transpose()?;
        Self::build(states, config.withdrawal.clone(), groups, boundary)
    }

    pub fn to_config(&self) -> ScaleConfig {
        ScaleConfig {
            states: self.states.clone(),
            withdrawal: self.withdrawal.clone(),
            letter_groups: self
                .groups
                .iter()
                .filter(|g| !(g.members.len() == 1 && self.states[g.members[0]] == g.name))
                .map(|g| {
                    (
                        g.name.clone(),
                        g.members.iter().map(|&m| self.states[m].clone()).collect(),
                    )
                })
                .collect(),
            ig_hy_boundary: self.ig_boundary.map(|i| self.states[i].clone()),
        }
    }

    fn build(
        states: Vec<String>,
        withdrawal: String,
        explicit: Vec<(String, Vec<usize>)>,
        ig_boundary: Option<usize>,
    ) -> Result<Self> {
        if states.len() < 2 {
            return Err(Error::Scale(
                "need at least one non-default state and a default state".into(),
            ));
        }
        let mut index = HashMap::new();
        for (i, s) in states.iter().enumerate() {
            if s.trim().is_empty() {
                return Err(Error::Scale("empty state name".into()));
            }
            if index.insert(s.clone(), i).is_some() {
                return Err(Error::Scale(format!("duplicate state {s:?}")));
            }
        }
        if index.contains_key(&withdrawal) {
            return Err(Error::Scale(format!(
                "withdrawal token {withdrawal:?} collides with a state"
            )));
        }
        let default = states.len() - 1;
        if let Some(b) = ig_boundary {
            if b >= default {
                return Err(Error::Scale(
                    "investment-grade boundary must be a non-default state".into(),
                ));
            }
        }

        let mut group_of = vec![usize::MAX; states.len()];
        let mut raw: Vec<(String, Vec<usize>)> = Vec::new();
        for (name, mut members) in explicit {
            if members.is_empty() || members.len() > MAX_GROUP_SIZE {
                return Err(Error::Scale(format!(
                    "group {name:?} must have 1 to {MAX_GROUP_SIZE} members"
                )));
            }
            members.sort_unstable();
            if members.contains(&default) && members.len() > 1 {
                return Err(Error::Scale("default must form its own group".into()));
            }
            if let Some(&s) = index.get(&name) {
                if members != [s] {
                    return Err(Error::Scale(format!(
                        "group {name:?} shares its name with a state outside the group"
                    )));
                }
            }
            for &m in &members {
                if group_of[m] != usize::MAX {
                    return Err(Error::Scale(format!(
                        "state {:?} belongs to more than one group",
                        states[m]
                    )));
                }
                group_of[m] = raw.len();
            }
            raw.push((name, members));
        }
        for (i, s) in states.iter().enumerate() {
            if group_of[i] == usize::MAX {
                group_of[i] = raw.len();
                raw.push((s.clone(), vec![i]));
            }
        }

        // groups follow the order of their best member
        let mut order: Vec<usize> = (0..raw.len()).collect();
        order.sort_by_key(|&g| raw[g].1[0]);
        let mut remap = vec![0; raw.len()];
        for (new, &old) in order.iter().enumerate() {
            remap[old] = new;
        }
        let mut groups: Vec<LetterGroup> = Vec::with_capacity(raw.len());
        for &old in &order {
            let (name, members) = raw[old].clone();
            groups.push(LetterGroup { name, members });
        }
        for g in group_of.iter_mut() {
            *g = remap[*g];
        }
        let mut group_index = HashMap::new();
        for (i, g) in groups.iter().enumerate() {
            if group_index.insert(g.name.clone(), i).is_some() {
                return Err(Error::Scale(format!("duplicate group {:?}", g.name)));
            }
        }

        Ok(Self {
            ids: (0..states.len()).collect(),
            states,
            withdrawal,
            groups,
            group_of,
            ig_boundary,
            index,
            group_index,
        })
    }

    /// The 18-state notched scale with letter-grade groups and Baa3 as the
    /// worst investment-grade rating.
    pub fn notched() -> Self {
        let config = ScaleConfig {
            states: NOTCHED.iter().map(|s| s.to_string()).collect(),
            withdrawal: default_withdrawal(),
            letter_groups: LETTERS
                .iter()
                .map(|(g, m)| (g.to_string(), m.iter().map(|s| s.to_string()).collect()))
                .collect(),
            ig_hy_boundary: Some("Baa3".into()),
        };
        Self::from_config(&config).expect("built-in scale is valid")
    }

    /// The 8-state letter-grade scale.
    pub fn letter() -> Self {
        let states: Vec<&str> = LETTERS.iter().map(|(g, _)| *g).collect();
        let mut scale = Self::new(&states).expect("built-in scale is valid");
        scale.ig_boundary = Some(3);
        scale
    }

    pub fn with_withdrawal(mut self, token: impl Into<String>) -> Result<Self> {
        let token = token.into();
        if self.index.contains_key(&token) || self.group_index.contains_key(&token) {
            return Err(Error::Scale(format!(
                "withdrawal token {token:?} collides with a state"
            )));
        }
        self.withdrawal = token;
        Ok(self)
    }

    pub fn with_ig_boundary(mut self, boundary: usize) -> Result<Self> {
        if boundary >= self.default_index() {
            return Err(Error::Scale(
                "investment-grade boundary must be a non-default state".into(),
            ));
        }
        self.ig_boundary = Some(boundary);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn name(&self, i: usize) -> &str {
        &self.states[i]
    }

    pub fn default_index(&self) -> usize {
        self.states.len() - 1
    }

    pub fn withdrawal(&self) -> &str {
        &self.withdrawal
    }

    pub fn groups(&self) -> &[LetterGroup] {
        &self.groups
    }

    pub fn group(&self, g: usize) -> &LetterGroup {
        &self.groups[g]
    }

    pub fn group_of(&self, state: usize) -> usize {
        self.group_of[state]
    }

    pub fn ig_boundary(&self) -> Option<usize> {
        self.ig_boundary
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Resolves a name to a rating, falling back to a multi-notch letter group.
    pub fn resolve(&self, name: &str) -> Option<StateRef> {
        if let Some(i) = self.index_of(name) {
            return Some(StateRef::Rating(i));
        }
        self.group_index.get(name).map(|&g| {
            let members = &self.groups[g].members;
            if members.len() == 1 {
                StateRef::Rating(members[0])
            } else {
                StateRef::Group(g)
            }
        })
    }

    /// Notched states a reference may stand for.
    pub fn members(&self, state: StateRef) -> &[usize] {
        match state {
            StateRef::Rating(i) => std::slice::from_ref(&self.ids[i]),
            StateRef::Group(g) => &self.groups[g].members,
        }
    }

    pub fn label(&self, state: StateRef) -> &str {
        match state {
            StateRef::Rating(i) => &self.states[i],
            StateRef::Group(g) => &self.groups[g].name,
        }
    }

    pub fn same_states(&self, other: &RatingScale) -> bool {
        self.states == other.states
    }
}
