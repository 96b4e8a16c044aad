//! Task suites on disk: one JSON array of task documents per file.

use std::fs;
use std::path::Path;

use super::{CompositeTask, TaskError};

fn io_err(path: &Path, e: impl ToString) -> TaskError {
    TaskError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn to_json(tasks: &[CompositeTask]) -> String {
    let mut s = serde_json::to_string_pretty(tasks).expect("tasks serialize");
    s.push('\n');
    s
}

pub fn write_tasks(path: &Path, tasks: &[CompositeTask]) -> Result<(), TaskError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| io_err(path, e))?;
        }
    }
    fs::write(path, to_json(tasks)).map_err(|e| io_err(path, e))
}

/// Accepts either an array of tasks or a single task document.
pub fn read_tasks(path: &Path) -> Result<Vec<CompositeTask>, TaskError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_tasks(&text).map_err(|e| io_err(path, e))
}

pub fn parse_tasks(text: &str) -> Result<Vec<CompositeTask>, serde_json::Error> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    if value.is_array() {
        serde_json::from_value(value)
    } else {
        Ok(vec![serde_json::from_value(value)?])
    }
}
