//! Auditable differences between two DocSpecs.
//!
//! Units are matched by id. Field changes inside a unit carry a JSON pointer
//! relative to the unit object (`/interaction/state/0/max`); document-level
//! fields use `unit: None` and a top-level pointer (`/topic`).

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use super::codec::{docspec_from_json, docspec_to_json, unit_to_json};
use super::model::DocSpec;
use crate::report::{pointer_token, ValidationReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum DiffEntry {
    UnitRemoved {
        id: String,
    },
    FieldChanged {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        unit: Option<String>,
        path: String,
        /// Expected prior value; omitted means "no precondition".
        #[serde(default, skip_serializing_if = "Option::is_none")]
        old: Option<Json>,
        /// Replacement value; omitted removes the field.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        new: Option<Json>,
    },
    UnitAdded {
        index: usize,
        unit: Json,
    },
    Reordered {
        order: Vec<String>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DocSpecDiff {
    pub entries: Vec<DiffEntry>,
}

impl DocSpecDiff {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn field_changes(&self) -> impl Iterator<Item = (&Option<String>, &str)> {
        self.entries.iter().filter_map(|e| match e {
            DiffEntry::FieldChanged { unit, path, .. } => Some((unit, path.as_str())),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ApplyError {
    #[error("unknown unit '{0}'")]
    UnknownUnit(String),
    #[error("unit '{0}' already exists")]
    DuplicateUnit(String),
    #[error("path {path} cannot be applied: {reason}")]
    BadPath { path: String, reason: String },
    #[error("stale change at {path}: expected {expected}, found {found}")]
    Stale {
        path: String,
        expected: Box<Json>,
        found: Box<Json>,
    },
    #[error("reorder list is not a permutation of the resulting units")]
    BadOrder,
    #[error("result does not decode: {0}")]
    Schema(ValidationReport),
}

/// Entries: removals, field changes, additions, then at most one reorder.
pub fn diff_docspec(old: &DocSpec, new: &DocSpec) -> DocSpecDiff {
    let mut entries = Vec::new();
    let old_ids: Vec<&str> = old.units.iter().map(|u| u.id.as_str()).collect();
    let new_ids: Vec<&str> = new.units.iter().map(|u| u.id.as_str()).collect();

    for id in &old_ids {
        if !new_ids.contains(id) {
            entries.push(DiffEntry::UnitRemoved { id: id.to_string() });
        }
    }

    let mut changes = Vec::new();
    if old.spec_version != new.spec_version {
        changes.push(("/spec_version".to_string(), Some(Json::from(old.spec_version.clone())), Some(Json::from(new.spec_version.clone()))));
    }
    if old.topic != new.topic {
        changes.push(("/topic".to_string(), Some(Json::from(old.topic.clone())), Some(Json::from(new.topic.clone()))));
    }
    for (path, o, n) in changes {
        entries.push(DiffEntry::FieldChanged {
            unit: None,
            path,
            old: o,
            new: n,
        });
    }

    for u in &old.units {
        if let Some(nu) = new.unit(&u.id) {
            let mut out = Vec::new();
            json_diff(&unit_to_json(u), &unit_to_json(nu), String::new(), &mut out);
            for (path, o, n) in out {
                entries.push(DiffEntry::FieldChanged {
                    unit: Some(u.id.clone()),
                    path,
                    old: o,
                    new: n,
                });
            }
        }
    }

    for (i, u) in new.units.iter().enumerate() {
        if !old_ids.contains(&u.id.as_str()) {
            entries.push(DiffEntry::UnitAdded {
                index: i,
                unit: unit_to_json(u),
            });
        }
    }

    let common_old: Vec<&str> = old_ids.iter().copied().filter(|id| new_ids.contains(id)).collect();
    let common_new: Vec<&str> = new_ids.iter().copied().filter(|id| old_ids.contains(id)).collect();
    if common_old != common_new {
        entries.push(DiffEntry::Reordered {
            order: new_ids.iter().map(|s| s.to_string()).collect(),
        });
    }
    DocSpecDiff { entries }
}

type Change = (String, Option<Json>, Option<Json>);

fn json_diff(old: &Json, new: &Json, path: String, out: &mut Vec<Change>) {
    if old == new {
        return;
    }
    match (old, new) {
        (Json::Object(a), Json::Object(b)) => {
            for (k, av) in a {
                let p = format!("{path}/{}", pointer_token(k));
                match b.get(k) {
                    Some(bv) => json_diff(av, bv, p, out),
                    None => out.push((p, Some(av.clone()), None)),
                }
            }
            for (k, bv) in b {
                if !a.contains_key(k) {
                    out.push((format!("{path}/{}", pointer_token(k)), None, Some(bv.clone())));
                }
            }
        }
        (Json::Array(a), Json::Array(b)) if a.len() == b.len() => {
            for (i, (av, bv)) in a.iter().zip(b).enumerate() {
                json_diff(av, bv, format!("{path}/{i}"), out);
            }
        }
        _ => out.push((path, Some(old.clone()), Some(new.clone()))),
    }
}

/// Applies `diff` to `old`. The result is decoded but not semantically
/// validated; callers re-run the validators.
pub fn apply_diff(old: &DocSpec, diff: &DocSpecDiff) -> Result<DocSpec, ApplyError> {
    let mut doc = docspec_to_json(old);
    let mut units: Vec<(String, Json)> = old
        .units
        .iter()
        .map(|u| (u.id.clone(), unit_to_json(u)))
        .collect();
    let mut added: Vec<(usize, String, Json)> = Vec::new();
    let mut order: Option<&Vec<String>> = None;

    for e in &diff.entries {
        match e {
            DiffEntry::UnitRemoved { id } => {
                let pos = units
                    .iter()
                    .position(|(uid, _)| uid == id)
                    .ok_or_else(|| ApplyError::UnknownUnit(id.clone()))?;
                units.remove(pos);
            }
            DiffEntry::FieldChanged {
                unit,
                path,
                old: expected,
                new,
            } => {
                let target = match unit {
                    None => &mut doc,
                    Some(id) => {
                        &mut units
                            .iter_mut()
                            .find(|(uid, _)| uid == id)
                            .ok_or_else(|| ApplyError::UnknownUnit(id.clone()))?
                            .1
                    }
                };
                if unit.is_none() && (path == "/units" || path.starts_with("/units/")) {
                    return Err(ApplyError::BadPath {
                        path: path.clone(),
                        reason: "units are changed through unit entries".into(),
                    });
                }
                set_pointer(target, path, expected.as_ref(), new.clone())?;
            }
            DiffEntry::UnitAdded { index, unit } => {
                let id = unit
                    .get("id")
                    .and_then(Json::as_str)
                    .ok_or_else(|| ApplyError::BadPath {
                        path: "/id".into(),
                        reason: "added unit has no string id".into(),
                    })?
                    .to_string();
                if units.iter().any(|(u, _)| *u == id) || added.iter().any(|(_, u, _)| *u == id) {
                    return Err(ApplyError::DuplicateUnit(id));
                }
                added.push((*index, id, unit.clone()));
            }
            DiffEntry::Reordered { order: o } => order = Some(o),
        }
    }

    added.sort_by_key(|(i, _, _)| *i);
    for (i, id, json) in added {
        let at = i.min(units.len());
        units.insert(at, (id, json));
    }
    if let Some(order) = order {
        if order.len() != units.len() {
            return Err(ApplyError::BadOrder);
        }
        let mut reordered = Vec::with_capacity(units.len());
        for id in order {
            let pos = units
                .iter()
                .position(|(u, _)| u == id)
                .ok_or(ApplyError::BadOrder)?;
            reordered.push(units.remove(pos));
        }
        units = reordered;
    }

    if let Json::Object(m) = &mut doc {
        m.insert(
            "units".into(),
            Json::Array(units.into_iter().map(|(_, j)| j).collect()),
        );
    }
    docspec_from_json(&doc).map_err(ApplyError::Schema)
}

fn unescape(tok: &str) -> String {
    tok.replace("~1", "/").replace("~0", "~")
}

fn set_pointer(
    root: &mut Json,
    path: &str,
    expected: Option<&Json>,
    new: Option<Json>,
) -> Result<(), ApplyError> {
    let bad = |reason: &str| ApplyError::BadPath {
        path: path.to_string(),
        reason: reason.to_string(),
    };
    if let Some(exp) = expected {
        let found = root.pointer(path).cloned().unwrap_or(Json::Null);
        if &found != exp {
            return Err(ApplyError::Stale {
                path: path.to_string(),
                expected: Box::new(exp.clone()),
                found: Box::new(found),
            });
        }
    }
    if path.is_empty() {
        return Err(bad("empty path"));
    }
    let Some(rest) = path.strip_prefix('/') else {
        return Err(bad("pointer must start with '/'"));
    };
    let tokens: Vec<String> = rest.split('/').map(unescape).collect();
    let (last, parents) = tokens.split_last().expect("non-empty split");
    let mut cur = root;
    for t in parents {
        cur = match cur {
            Json::Object(m) => m.get_mut(t).ok_or_else(|| bad("missing parent"))?,
            Json::Array(a) => {
                let i: usize = t.parse().map_err(|_| bad("array index expected"))?;
                a.get_mut(i).ok_or_else(|| bad("array index out of range"))?
            }
            _ => return Err(bad("parent is not a container")),
        };
    }
    match (cur, new) {
        (Json::Object(m), Some(v)) => {
            m.insert(last.clone(), v);
        }
        (Json::Object(m), None) => {
            m.shift_remove(last);
        }
        (Json::Array(a), Some(v)) => {
            let i: usize = last.parse().map_err(|_| bad("array index expected"))?;
            if i < a.len() {
                a[i] = v;
            } else if i == a.len() {
                a.push(v);
            } else {
                return Err(bad("array index out of range"));
            }
        }
        (Json::Array(_), None) => return Err(bad("array elements cannot be removed by index")),
        _ => return Err(bad("parent is not a container")),
    }
    Ok(())
}
