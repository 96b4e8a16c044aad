//! Text renderings of a task: ticket, user instructions, markdown card.

use std::fmt::Write as _;

use serde_json::Value;

use super::CompositeTask;
use crate::world::Args;

pub fn render_ticket(task: &CompositeTask) -> String {
    task.ticket.clone()
}

fn indented(out: &mut String, body: &str) {
    for line in body.lines() {
        if line.is_empty() {
            out.push('\n');
        } else {
            let _ = writeln!(out, "    {line}");
        }
    }
}

/// Instructions handed to the simulated user.
pub fn render_user_instructions(task: &CompositeTask) -> String {
    let i = &task.user_scenario.instructions;
    let mut out = format!("Domain: {}\n", i.domain);
    out.push_str("Reason for call:\n");
    indented(&mut out, &i.reason_for_call);
    out.push_str("Known info:\n");
    indented(&mut out, &i.known_info);
    out.push_str("Unknown info:\n");
    if let Some(unknown) = &i.unknown_info {
        indented(&mut out, unknown);
    }
    out.push_str("Task instructions:\n");
    indented(&mut out, &i.task_instructions);
    if let Some(persona) = &task.user_scenario.persona {
        out.push_str("Persona:\n");
        indented(&mut out, persona);
    }
    out
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn write_args(out: &mut String, indent: &str, args: &Args) {
    if args.is_empty() {
        let _ = writeln!(out, "{indent}- **Arguments**: {{}}");
    } else {
        let _ = writeln!(out, "{indent}- **Arguments**:");
        for (k, v) in args {
            let _ = writeln!(out, "{indent}  - {k}: {}", scalar(v));
        }
    }
}

fn or_null(v: Option<&str>) -> &str {
    v.unwrap_or("null")
}

/// Human-readable card mirroring the task-file sections.
pub fn render_markdown(task: &CompositeTask) -> String {
    let mut out = String::new();
    let i = &task.user_scenario.instructions;
    let _ = writeln!(out, "# Task Details\n");
    let _ = writeln!(out, "## ID\n{}\n", task.id);
    let _ = writeln!(out, "## Description\n- **Purpose**: {}\n", task.description.purpose);
    let _ = writeln!(out, "## User Scenario");
    if let Some(p) = &task.user_scenario.persona {
        let _ = writeln!(out, "- **Persona**: {}", p.replace("\n\n", " "));
    }
    let _ = writeln!(out, "- **Instructions**:");
    let _ = writeln!(out, "  - **Domain**: {}", i.domain);
    let _ = writeln!(out, "  - **Reason for call**: {}", i.reason_for_call);
    let _ = writeln!(out, "  - **Known info**: {}", i.known_info);
    let _ = writeln!(out, "  - **Unknown info**: {}", or_null(i.unknown_info.as_deref()));
    let _ = writeln!(out, "  - **Task instructions**: {}\n", i.task_instructions);
    let _ = writeln!(out, "## Ticket\n{}\n", task.ticket);
    let _ = writeln!(out, "## Initial State");
    let data = task
        .initial_state
        .initialization_data
        .as_ref()
        .map(Value::to_string);
    let _ = writeln!(out, "- **Initialization Data**: {}", or_null(data.as_deref()));
    let _ = writeln!(out, "- **Initialization Actions**:");
    for (n, call) in task.init_actions().iter().enumerate() {
        let _ = writeln!(out, "  {}. **Action**: {}", n + 1, call.name);
        let _ = writeln!(out, "     - **Env Type**: {}", call.env);
        write_args(&mut out, "     ", &call.args);
    }
    let _ = writeln!(out, "\n## Evaluation Criteria\n### Actions");
    for (n, a) in task.expected_actions().iter().enumerate() {
        let _ = writeln!(out, "{}. **Action ID**: {}", n + 1, a.action_id);
        let _ = writeln!(out, "   - **Requestor**: {}", a.requestor);
        let _ = writeln!(out, "   - **Name**: {}", a.name);
        write_args(&mut out, "   ", &a.arguments);
        out.push('\n');
    }
    let _ = writeln!(out, "### Environment Assertions");
    for a in &task.evaluation.env_assertions {
        let _ = writeln!(out, "- **Env Type**: {}", a.env);
        let _ = writeln!(out, "- **Function**: {}", a.function);
        write_args(&mut out, "", &a.arguments);
        let _ = writeln!(out, "- **Assert Value**: {}", a.assert_value);
    }
    out
}
