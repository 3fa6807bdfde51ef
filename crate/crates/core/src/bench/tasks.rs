use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    C1,
    C2,
    C3,
    C4,
    C5,
}

impl Category {
    pub const ALL: [Category; 5] = [Category::C1, Category::C2, Category::C3, Category::C4, Category::C5];

    pub fn as_str(&self) -> &'static str {
        match self {
            Category::C1 => "C1",
            Category::C2 => "C2",
            Category::C3 => "C3",
            Category::C4 => "C4",
            Category::C5 => "C5",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    F1,
    RougeL,
    EditSim,
    Judge,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskRecord {
    pub id: String,
    pub category: Category,
    pub task: String,
    pub input: String,
    pub references: Vec<String>,
    pub metric: Metric,
}

impl TaskRecord {
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::input("record id is empty"));
        }
        if self.task.is_empty() {
            return Err(Error::input(format!("record {}: task label is empty", self.id)));
        }
        if self.references.is_empty() {
            return Err(Error::input(format!("record {}: references must be nonempty", self.id)));
        }
        if self.metric == Metric::Judge && self.category != Category::C5 {
            return Err(Error::input(format!(
                "record {}: metric Judge is only valid for category C5, not {}",
                self.id, self.category
            )));
        }
        Ok(())
    }
}

/// Parses JSONL task records; blank lines are skipped.
pub fn parse_tasks(text: &str) -> Result<Vec<TaskRecord>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TaskRecord =
            serde_json::from_str(line).map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
        rec.validate().map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
        if !seen.insert(rec.id.clone()) {
            return Err(Error::Parse { line: line_no, message: format!("duplicate record id {:?}", rec.id) });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn load_tasks(path: &Path) -> Result<Vec<TaskRecord>> {
    parse_tasks(&std::fs::read_to_string(path)?)
}
