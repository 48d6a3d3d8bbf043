use std::collections::{BTreeSet, HashMap};
use std::fmt;

/// A cycle among derived variables; `path` starts and ends at the same name.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("dependency cycle {}", .path.join(" → "))]
pub struct CycleError {
    pub path: Vec<String>,
}

/// One derived variable and the names its formula references.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedNode {
    pub name: String,
    pub refs: BTreeSet<String>,
}

impl DerivedNode {
    pub fn new(name: impl Into<String>, refs: impl IntoIterator<Item = impl Into<String>>) -> Self {
        DerivedNode {
            name: name.into(),
            refs: refs.into_iter().map(Into::into).collect(),
        }
    }
}

impl fmt::Display for DerivedNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} <- {{", self.name)?;
        for (i, r) in self.refs.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            f.write_str(r)?;
        }
        f.write_str("}")
    }
}

/// Orders derived variables so each follows everything it references.
///
/// References to names that are not derived (controllables, unknowns) are
/// ignored. Ties go to the earlier declaration, so the result is stable.
pub fn dependency_order(nodes: &[DerivedNode]) -> Result<Vec<String>, CycleError> {
    let index: HashMap<&str, usize> = nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.name.as_str(), i))
        .collect();
    let deps: Vec<Vec<usize>> = nodes
        .iter()
        .map(|n| n.refs.iter().filter_map(|r| index.get(r.as_str()).copied()).collect())
        .collect();

    let mut emitted = vec![false; nodes.len()];
    let mut order = Vec::with_capacity(nodes.len());
    while order.len() < nodes.len() {
        let next = (0..nodes.len()).find(|&i| !emitted[i] && deps[i].iter().all(|&d| emitted[d]));
        match next {
            Some(i) => {
                emitted[i] = true;
                order.push(nodes[i].name.clone());
            }
            None => return Err(find_cycle(nodes, &deps, &emitted)),
        }
    }
    Ok(order)
}

fn find_cycle(nodes: &[DerivedNode], deps: &[Vec<usize>], emitted: &[bool]) -> CycleError {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        OnStack,
        Done,
    }
    fn dfs(
        v: usize,
        deps: &[Vec<usize>],
        marks: &mut [Mark],
        stack: &mut Vec<usize>,
    ) -> Option<Vec<usize>> {
        marks[v] = Mark::OnStack;
        stack.push(v);
        for &w in &deps[v] {
            match marks[w] {
                Mark::OnStack => {
                    let start = stack.iter().position(|&s| s == w).unwrap_or(0);
                    let mut cycle = stack[start..].to_vec();
                    cycle.push(w);
                    return Some(cycle);
                }
                Mark::New => {
                    if let Some(c) = dfs(w, deps, marks, stack) {
                        return Some(c);
                    }
                }
                Mark::Done => {}
            }
        }
        stack.pop();
        marks[v] = Mark::Done;
        None
    }

    let mut marks: Vec<Mark> = emitted
        .iter()
        .map(|&e| if e { Mark::Done } else { Mark::New })
        .collect();
    for start in 0..nodes.len() {
        if marks[start] != Mark::New {
            continue;
        }
        let mut stack = Vec::new();
        if let Some(cycle) = dfs(start, deps, &mut marks, &mut stack) {
            return CycleError {
                path: cycle.into_iter().map(|i| nodes[i].name.clone()).collect(),
            };
        }
    }
    unreachable!("stalled topological sort without a cycle")
}
