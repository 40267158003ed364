//! Strict parsers for backend replies. Every parser returns either a fully
//! valid value or an error message; none of them panic.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::graph::{ClaimGraph, Entity, Triplet, TripletId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionProposal {
    pub rationale: String,
    pub triplet_ids: BTreeSet<TripletId>,
    pub question: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityAnswer {
    Found(String),
    NotFound,
}

/// Pulls the single JSON object out of a reply, tolerating code fences and
/// surrounding prose.
pub fn json_object(reply: &str) -> Result<serde_json::Map<String, Value>, String> {
    let start = reply.find('{').ok_or("no JSON object in reply")?;
    let end = reply.rfind('}').ok_or("no JSON object in reply")?;
    if end < start {
        return Err("no JSON object in reply".into());
    }
    match serde_json::from_str::<Value>(&reply[start..=end]) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err("reply is not a JSON object".into()),
        Err(e) => Err(format!("invalid JSON: {e}")),
    }
}

/// `X_1`, `X1`, `x_1`, `X_{1}` all name placeholder 1.
pub fn placeholder_id(surface: &str) -> Option<u32> {
    let s = surface.trim();
    let rest = s.strip_prefix('X').or_else(|| s.strip_prefix('x'))?;
    let rest = rest.strip_prefix('_').unwrap_or(rest);
    let rest = rest
        .strip_prefix('{')
        .and_then(|r| r.strip_suffix('}'))
        .unwrap_or(rest);
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    rest.parse().ok()
}

fn entity(v: &Value, field: &str, idx: usize) -> Result<Entity, String> {
    let text = match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        _ => return Err(format!("triplet {idx}: {field} must be a string")),
    };
    match placeholder_id(&text) {
        Some(i) => Ok(Entity::Placeholder(i)),
        None => Entity::named(&text).map_err(|_| format!("triplet {idx}: {field} is empty")),
    }
}

pub fn parse_graph(claim: &str, reply: &str) -> Result<ClaimGraph, String> {
    let obj = json_object(reply)?;
    let list = obj
        .get("triplets")
        .and_then(Value::as_array)
        .ok_or("missing \"triplets\" array")?;
    let mut triplets = Vec::with_capacity(list.len());
    let mut seen = HashSet::new();
    for (i, item) in list.iter().enumerate() {
        let t = item.as_object().ok_or_else(|| format!("triplet {i} is not an object"))?;
        let id = match t.get("id") {
            None | Some(Value::Null) => (i + 1) as u32,
            Some(v) => v
                .as_u64()
                .and_then(|n| u32::try_from(n).ok())
                .ok_or_else(|| format!("triplet {i}: id must be a non-negative integer"))?,
        };
        if !seen.insert(id) {
            return Err(format!("duplicate triplet id {id}"));
        }
        let head = entity(t.get("head").unwrap_or(&Value::Null), "head", i)?;
        let tail = entity(t.get("tail").unwrap_or(&Value::Null), "tail", i)?;
        let relation = t
            .get("relation")
            .and_then(Value::as_str)
            .ok_or_else(|| format!("triplet {i}: relation must be a string"))?;
        triplets.push(Triplet::new(id, head, relation, tail).map_err(|e| e.to_string())?);
    }
    ClaimGraph::new(claim, triplets).map_err(|e| e.to_string())
}

pub fn parse_proposal(reply: &str, allowed: &BTreeSet<TripletId>) -> Result<QuestionProposal, String> {
    let obj = json_object(reply)?;
    let question = obj
        .get("question")
        .and_then(Value::as_str)
        .map(str::trim)
        .filter(|q| !q.is_empty())
        .ok_or("missing or empty \"question\"")?
        .to_string();
    let rationale = obj
        .get("rationale")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .trim()
        .to_string();
    let ids = obj
        .get("triplet_ids")
        .and_then(Value::as_array)
        .ok_or("missing \"triplet_ids\" array")?;
    let mut triplet_ids = BTreeSet::new();
    for v in ids {
        let id = v
            .as_u64()
            .and_then(|n| u32::try_from(n).ok())
            .ok_or("triplet_ids must be integers")?;
        if !allowed.contains(&id) {
            return Err(format!("triplet id {id} is not in the group"));
        }
        triplet_ids.insert(id);
    }
    if triplet_ids.is_empty() {
        return Err("triplet_ids is empty".into());
    }
    Ok(QuestionProposal {
        rationale,
        triplet_ids,
        question,
    })
}

pub fn parse_entity(reply: &str) -> Result<EntityAnswer, String> {
    let obj = json_object(reply)?;
    match obj.get("entity") {
        Some(Value::Null) => Ok(EntityAnswer::NotFound),
        Some(Value::String(s)) => {
            let t = s.trim();
            if t.is_empty() || t.eq_ignore_ascii_case("none") || t.eq_ignore_ascii_case("null") {
                Ok(EntityAnswer::NotFound)
            } else {
                Ok(EntityAnswer::Found(t.to_string()))
            }
        }
        Some(_) => Err("\"entity\" must be a string or null".into()),
        None => Err("missing \"entity\"".into()),
    }
}

pub fn parse_support(reply: &str) -> Result<bool, String> {
    let obj = json_object(reply)?;
    match obj.get("supported") {
        Some(Value::Bool(b)) => Ok(*b),
        Some(Value::String(s)) if s.eq_ignore_ascii_case("true") => Ok(true),
        Some(Value::String(s)) if s.eq_ignore_ascii_case("false") => Ok(false),
        Some(_) => Err("\"supported\" must be a boolean".into()),
        None => Err("missing \"supported\"".into()),
    }
}

/// The sentence must mention both entity names (case-insensitive).
pub fn parse_subclaim(reply: &str, triplet: &Triplet) -> Result<String, String> {
    let obj = json_object(reply)?;
    let s = obj
        .get("subclaim")
        .and_then(Value::as_str)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .ok_or("missing or empty \"subclaim\"")?;
    let lower = s.to_lowercase();
    for e in [&triplet.head, &triplet.tail] {
        let name = e.text().ok_or("triplet still has a placeholder")?;
        if !lower.contains(&name.to_lowercase()) {
            return Err(format!("subclaim does not mention {name:?}"));
        }
    }
    Ok(s.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn placeholder_surface_forms() {
        for s in ["X_1", "X1", "x_1", " X_{1} "] {
            assert_eq!(placeholder_id(s), Some(1), "{s}");
        }
        for s in ["X", "Xavier", "X_1a", "X_", "1"] {
            assert_eq!(placeholder_id(s), None, "{s}");
        }
    }

    #[test]
    fn graph_from_fenced_reply() {
        let reply = "```json\n{\"triplets\": [{\"id\": 3, \"head\": \"X_2\", \"relation\": \"is based on the life of\", \"tail\": \"Purandara Dasa\"}, {\"head\": \"Purandara Dasa\", \"relation\": \"was born in\", \"tail\": 1484}]}\n```";
        let g = parse_graph("c", reply).unwrap();
        assert_eq!(g.triplets[0].head, Entity::Placeholder(2));
        assert_eq!(g.triplets[0].relation, "is based on the life of");
        assert_eq!(g.triplets[1].id, 2);
        assert_eq!(g.triplets[1].tail, Entity::Named("1484".into()));
    }

    #[test]
    fn graph_rejections() {
        assert!(parse_graph("c", "not json").is_err());
        assert!(parse_graph("c", "[1,2]").is_err());
        assert!(parse_graph("c", r#"{"triplets": [{"id": 1, "head": "A", "relation": "", "tail": "B"}]}"#).is_err());
        assert!(parse_graph("c", r#"{"triplets": [{"id": 1, "head": "A", "relation": "r", "tail": "B"}, {"id": 1, "head": "A", "relation": "r", "tail": "C"}]}"#).is_err());
        assert!(parse_graph("c", r#"{"triplets": [{"id": -1, "head": "A", "relation": "r", "tail": "B"}]}"#).is_err());
        assert!(parse_graph("c", r#"{"triplets": [{"id": 1, "head": " ", "relation": "r", "tail": "B"}]}"#).is_err());
        assert_eq!(parse_graph("c", r#"{"triplets": []}"#).unwrap().triplets.len(), 0);
    }

    #[test]
    fn proposal_subset_rule() {
        let allowed = BTreeSet::from([4]);
        let ok = parse_proposal(r#"{"rationale": "r", "triplet_ids": [4], "question": "Who?"}"#, &allowed).unwrap();
        assert_eq!(ok.triplet_ids, allowed);
        assert!(parse_proposal(r#"{"rationale": "r", "triplet_ids": [4, 5], "question": "Who?"}"#, &allowed).is_err());
        assert!(parse_proposal(r#"{"rationale": "r", "triplet_ids": [], "question": "Who?"}"#, &allowed).is_err());
        assert!(parse_proposal(r#"{"rationale": "r", "triplet_ids": [4], "question": " "}"#, &allowed).is_err());
    }

    #[test]
    fn entity_sentinels() {
        assert_eq!(parse_entity(r#"{"entity": null}"#).unwrap(), EntityAnswer::NotFound);
        assert_eq!(parse_entity(r#"{"entity": "None"}"#).unwrap(), EntityAnswer::NotFound);
        assert_eq!(
            parse_entity(r#"{"entity": " Navakoti Nrayana "}"#).unwrap(),
            EntityAnswer::Found("Navakoti Nrayana".into())
        );
        assert!(parse_entity(r#"{"entity": 3}"#).is_err());
        assert!(parse_entity(r#"{"answer": "x"}"#).is_err());
    }

    #[test]
    fn support_and_subclaim() {
        assert!(parse_support(r#"{"supported": true}"#).unwrap());
        assert!(!parse_support(r#"{"supported": "False"}"#).unwrap());
        assert!(parse_support(r#"{"supported": 1}"#).is_err());
        let t = Triplet::new(1, Entity::Named("Purandara Dasa".into()), "was born in", Entity::Named("1484".into())).unwrap();
        assert_eq!(
            parse_subclaim(r#"{"subclaim": "Purandara Dasa is the person who was born in 1484"}"#, &t).unwrap(),
            "Purandara Dasa is the person who was born in 1484"
        );
        assert!(parse_subclaim(r#"{"subclaim": "He was born in 1484"}"#, &t).is_err());
        assert!(parse_subclaim(r#"{"subclaim": ""}"#, &t).is_err());
    }

    proptest! {
        #[test]
        fn parsers_are_total(reply in ".{0,200}") {
            let allowed = BTreeSet::from([1, 2]);
            let t = Triplet::new(1, Entity::Named("A".into()), "r", Entity::Named("B".into())).unwrap();
            let _ = parse_graph("c", &reply);
            let _ = parse_proposal(&reply, &allowed);
            let _ = parse_entity(&reply);
            let _ = parse_support(&reply);
            let _ = parse_subclaim(&reply, &t);
        }

        #[test]
        fn parsers_are_total_on_json_shaped_input(
            body in r#"\{("(triplets|id|head|tail|relation|question|triplet_ids|entity|supported|subclaim)": ?(null|true|-?[0-9]{1,3}|"[a-zX_0-9 ]{0,8}"|\[[0-9, ]{0,6}\]|\{\}), ?){0,4}\}"#
        ) {
            let allowed = BTreeSet::from([1, 2]);
            if let Ok(p) = parse_proposal(&body, &allowed) {
                prop_assert!(!p.question.is_empty() && !p.triplet_ids.is_empty());
                prop_assert!(p.triplet_ids.is_subset(&allowed));
            }
            if let Ok(g) = parse_graph("c", &body) {
                prop_assert!(g.triplets.iter().all(|t| !t.relation.is_empty()));
            }
            let _ = parse_entity(&body);
            let _ = parse_support(&body);
        }
    }
}
