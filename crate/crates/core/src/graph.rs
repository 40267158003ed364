//! Claim graph data model.
//!
//! A claim is decomposed into `(head, relation, tail)` triplets. Entities the
//! claim only describes (for example "a 1964 Kannada film") are represented by
//! numbered placeholders until they are resolved against the knowledge base.
//! All operations are pure: they return a new graph and leave the input alone.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type TripletId = u32;
pub type PlaceholderId = u32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("entity text is empty")]
    EmptyEntity,
    #[error("triplet {0} has an empty relation")]
    EmptyRelation(TripletId),
    #[error("duplicate triplet id {0}")]
    DuplicateTriplet(TripletId),
    #[error("placeholder X_{0} is not referenced by any triplet")]
    UnknownPlaceholder(PlaceholderId),
    #[error("unknown triplet id {0}")]
    UnknownTriplet(TripletId),
}

/// A node of the claim graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Entity {
    Named(String),
    Placeholder(PlaceholderId),
}

impl Entity {
    /// Builds a named entity, trimming whitespace. Empty text is rejected.
    pub fn named(text: impl AsRef<str>) -> Result<Self, GraphError> {
        let t = text.as_ref().trim();
        if t.is_empty() {
            return Err(GraphError::EmptyEntity);
        }
        Ok(Entity::Named(t.to_string()))
    }

    pub fn placeholder_id(&self) -> Option<PlaceholderId> {
        match self {
            Entity::Placeholder(i) => Some(*i),
            Entity::Named(_) => None,
        }
    }

    pub fn text(&self) -> Option<&str> {
        match self {
            Entity::Named(t) => Some(t),
            Entity::Placeholder(_) => None,
        }
    }
}

impl fmt::Display for Entity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Entity::Named(t) => f.write_str(t),
            Entity::Placeholder(i) => write!(f, "X_{i}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Unverified,
    Verified,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triplet {
    pub id: TripletId,
    pub head: Entity,
    pub relation: String,
    pub tail: Entity,
    pub status: Status,
}

impl Triplet {
    pub fn new(
        id: TripletId,
        head: Entity,
        relation: impl Into<String>,
        tail: Entity,
    ) -> Result<Self, GraphError> {
        let relation = relation.into().trim().to_string();
        if relation.is_empty() {
            return Err(GraphError::EmptyRelation(id));
        }
        for e in [&head, &tail] {
            if let Entity::Named(t) = e {
                if t.trim().is_empty() {
                    return Err(GraphError::EmptyEntity);
                }
            }
        }
        Ok(Triplet {
            id,
            head,
            relation,
            tail,
            status: Status::Unverified,
        })
    }

    /// Placeholders referenced by this triplet, head first, deduplicated.
    pub fn placeholders(&self) -> impl Iterator<Item = PlaceholderId> + '_ {
        let head = self.head.placeholder_id();
        let tail = self.tail.placeholder_id().filter(|t| Some(*t) != head);
        head.into_iter().chain(tail)
    }

    pub fn mentions(&self, placeholder: PlaceholderId) -> bool {
        self.placeholders().any(|p| p == placeholder)
    }

    pub fn has_placeholder(&self) -> bool {
        self.placeholders().next().is_some()
    }

    /// `head || relation || tail`, with placeholders rendered as `X_i`.
    pub fn render(&self) -> String {
        format!("{} || {} || {}", self.head, self.relation, self.tail)
    }
}

/// Triplets sharing one ambiguous entity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripletGroup {
    pub placeholder: PlaceholderId,
    pub triplets: Vec<Triplet>,
}

impl TripletGroup {
    pub fn ids(&self) -> BTreeSet<TripletId> {
        self.triplets.iter().map(|t| t.id).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimGraph {
    pub claim: String,
    pub triplets: Vec<Triplet>,
    #[serde(default)]
    pub resolutions: BTreeMap<PlaceholderId, String>,
}

impl ClaimGraph {
    /// Validates id uniqueness and relation text; every triplet starts unverified.
    pub fn new(claim: impl Into<String>, triplets: Vec<Triplet>) -> Result<Self, GraphError> {
        let mut seen = HashSet::new();
        for t in &triplets {
            if !seen.insert(t.id) {
                return Err(GraphError::DuplicateTriplet(t.id));
            }
            if t.relation.trim().is_empty() {
                return Err(GraphError::EmptyRelation(t.id));
            }
        }
        Ok(ClaimGraph {
            claim: claim.into(),
            triplets,
            resolutions: BTreeMap::new(),
        })
    }

    pub fn empty(claim: impl Into<String>) -> Self {
        ClaimGraph {
            claim: claim.into(),
            triplets: Vec::new(),
            resolutions: BTreeMap::new(),
        }
    }

    pub fn triplet(&self, id: TripletId) -> Option<&Triplet> {
        self.triplets.iter().find(|t| t.id == id)
    }

    pub fn ids(&self) -> BTreeSet<TripletId> {
        self.triplets.iter().map(|t| t.id).collect()
    }

    /// Placeholder ids still referenced by some triplet.
    pub fn ambiguous_entities(&self) -> BTreeSet<PlaceholderId> {
        self.triplets.iter().flat_map(|t| t.placeholders()).collect()
    }

    /// One group per ambiguous entity in ascending id order. A triplet with
    /// two distinct placeholders joins both groups.
    pub fn group_triplets(&self) -> Vec<TripletGroup> {
        self.ambiguous_entities()
            .into_iter()
            .map(|p| self.group_for(p))
            .collect()
    }

    pub fn group_for(&self, placeholder: PlaceholderId) -> TripletGroup {
        TripletGroup {
            placeholder,
            triplets: self
                .triplets
                .iter()
                .filter(|t| t.mentions(placeholder))
                .cloned()
                .collect(),
        }
    }

    pub fn is_clarified(&self) -> bool {
        self.triplets.iter().all(|t| !t.has_placeholder())
    }

    /// Replaces every occurrence of `X_placeholder` with the named entity.
    pub fn resolve_placeholder(
        &self,
        placeholder: PlaceholderId,
        entity_text: &str,
    ) -> Result<ClaimGraph, GraphError> {
        let entity = Entity::named(entity_text)?;
        if !self.triplets.iter().any(|t| t.mentions(placeholder)) {
            return Err(GraphError::UnknownPlaceholder(placeholder));
        }
        let target = Entity::Placeholder(placeholder);
        let mut next = self.clone();
        for t in &mut next.triplets {
            if t.head == target {
                t.head = entity.clone();
            }
            if t.tail == target {
                t.tail = entity.clone();
            }
        }
        let text = entity.text().unwrap_or_default().to_string();
        next.resolutions.insert(placeholder, text);
        Ok(next)
    }

    /// Marks the listed triplets verified. Idempotent.
    pub fn mark_verified(&self, ids: &BTreeSet<TripletId>) -> Result<ClaimGraph, GraphError> {
        if let Some(missing) = ids.iter().find(|id| self.triplet(**id).is_none()) {
            return Err(GraphError::UnknownTriplet(*missing));
        }
        let mut next = self.clone();
        for t in &mut next.triplets {
            if ids.contains(&t.id) {
                t.status = Status::Verified;
            }
        }
        Ok(next)
    }

    pub fn verified_ids(&self) -> BTreeSet<TripletId> {
        self.triplets
            .iter()
            .filter(|t| t.status == Status::Verified)
            .map(|t| t.id)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Verdict {
    Supported,
    Refuted,
}

impl Verdict {
    /// Supported iff every result is true; an empty list is vacuously supported.
    pub fn aggregate<I: IntoIterator<Item = bool>>(results: I) -> Verdict {
        if results.into_iter().all(|ok| ok) {
            Verdict::Supported
        } else {
            Verdict::Refuted
        }
    }

    pub fn swap(self) -> Verdict {
        match self {
            Verdict::Supported => Verdict::Refuted,
            Verdict::Refuted => Verdict::Supported,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Supported => f.write_str("Supported"),
            Verdict::Refuted => f.write_str("Refuted"),
        }
    }
}
