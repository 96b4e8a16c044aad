//! Subtask groups and intent templates for the telecom task universe.

use serde_json::json;

use super::init::args;
use super::DOMAIN_NAME;
use crate::env::InitCall;
use crate::tasks::{
    AssertionCall, AtomicSubtask, Catalog, Intent, IntentSpec, ScenarioTemplate, SolutionCall,
    SubtaskGroup,
};
use crate::world::PlayerId::{Agent, User};

pub const CUSTOMER_ID: &str = "C1001";
pub const LINE_ID: &str = "L1002";
pub const USER_NAME: &str = "John Smith";
pub const USER_PHONE: &str = "555-123-2002";
pub const TRANSFER_SUMMARY: &str =
    "Customer disputes the overdue charge on bill B1003 and requests a human agent.";

/// A defect independent of the intent it is filed under.
struct Defect {
    id: &'static str,
    init: Vec<InitCall>,
    solution: Vec<SolutionCall>,
    extra_assertions: Vec<AssertionCall>,
    scenario_note: Option<&'static str>,
    ticket_note: Option<&'static str>,
}

impl Defect {
    fn new(id: &'static str, init: Vec<InitCall>, solution: Vec<SolutionCall>) -> Self {
        Defect {
            id,
            init,
            solution,
            extra_assertions: Vec::new(),
            scenario_note: None,
            ticket_note: None,
        }
    }

    fn note(mut self, scenario: &'static str) -> Self {
        self.scenario_note = Some(scenario);
        self
    }
}

fn user_init(name: &str) -> InitCall {
    InitCall::new(User, name)
}

fn agent_init(name: &str) -> InitCall {
    InitCall::new(Agent, name)
}

fn user_fix(name: &str) -> SolutionCall {
    SolutionCall::new(User, name)
}

fn agent_fix(name: &str) -> SolutionCall {
    SolutionCall::new(Agent, name)
        .arg("customer_id", CUSTOMER_ID)
        .arg("line_id", LINE_ID)
}

const ABROAD_NOTE: &str = "You are currently travelling abroad.";

/// (group id, members) in composition order.
fn service_groups() -> Vec<(&'static str, Vec<Defect>)> {
    vec![
        (
            "airplane_mode",
            vec![Defect::new(
                "airplane_mode_on",
                vec![user_init("turn_airplane_mode_on")],
                vec![user_fix("toggle_airplane_mode")],
            )],
        ),
        (
            "sim_card",
            vec![
                Defect::new(
                    "unseat_sim_card",
                    vec![user_init("unseat_sim_card")],
                    vec![user_fix("reseat_sim_card")],
                ),
                Defect::new(
                    "sim_card_missing",
                    vec![user_init("remove_sim_card")],
                    vec![user_fix("reseat_sim_card")],
                ),
                Defect::new(
                    "lock_sim_card_pin",
                    vec![user_init("lock_sim_card")],
                    vec![user_fix("unlock_sim_with_pin").arg("pin", "1234")],
                )
                .note("Your SIM PIN is 1234."),
            ],
        ),
        (
            "line_status",
            vec![Defect::new(
                "line_suspended",
                vec![agent_init("set_line_suspended").arg("line_id", LINE_ID)],
                vec![agent_fix("resume_line")],
            )],
        ),
        (
            "roaming",
            vec![Defect::new(
                "user_abroad_roaming_disabled",
                vec![
                    user_init("set_user_abroad"),
                    user_init("set_data_roaming").arg("enabled", true),
                    agent_init("set_line_roaming")
                        .arg("line_id", LINE_ID)
                        .arg("enabled", false),
                ],
                vec![agent_fix("enable_roaming")],
            )
            .note(ABROAD_NOTE)],
        ),
        (
            "network_mode",
            vec![Defect::new(
                "network_mode_2g_only",
                vec![user_init("set_network_mode").arg("mode", "2g_only")],
                vec![user_fix("set_network_mode_preference").arg("mode", "4g_5g_preferred")],
            )],
        ),
    ]
}

fn data_groups() -> Vec<(&'static str, Vec<Defect>)> {
    vec![
        (
            "mobile_data",
            vec![Defect::new(
                "mobile_data_off",
                vec![user_init("turn_mobile_data_off")],
                vec![user_fix("toggle_mobile_data")],
            )],
        ),
        (
            "data_roaming",
            vec![Defect::new(
                "data_roaming_off",
                vec![
                    user_init("set_user_abroad"),
                    user_init("set_data_roaming").arg("enabled", false),
                ],
                vec![user_fix("toggle_data_roaming")],
            )
            .note(ABROAD_NOTE)],
        ),
        (
            "data_usage",
            vec![Defect::new(
                "data_usage_exceeded",
                vec![agent_init("set_data_usage")
                    .arg("line_id", LINE_ID)
                    .arg("data_used_gb", 15.5)],
                vec![agent_fix("refuel_data").arg("gb", 2.0)],
            )
            .note("Buying 2.0 GB of extra data is acceptable to you; changing your plan is not.")],
        ),
        (
            "data_saver",
            vec![Defect::new(
                "data_saver_on",
                vec![user_init("turn_data_saver_on")],
                vec![user_fix("toggle_data_saver_mode")],
            )],
        ),
        (
            "vpn",
            vec![Defect::new(
                "vpn_connected",
                vec![user_init("connect_vpn")],
                vec![user_fix("disconnect_vpn")],
            )],
        ),
    ]
}

fn mms_groups() -> Vec<(&'static str, Vec<Defect>)> {
    vec![
        (
            "apn",
            vec![Defect::new(
                "bad_apn_mms_settings",
                vec![user_init("break_apn_mms_settings")],
                vec![user_fix("reset_apn_settings"), user_fix("reboot_phone")],
            )],
        ),
        (
            "wifi",
            vec![Defect::new(
                "connected_to_wifi",
                vec![user_init("connect_wifi_network").arg("network_name", "HomeNet")],
                vec![user_fix("toggle_wifi")],
            )
            .note("Your phone is connected to your home Wi-Fi network, HomeNet.")],
        ),
        (
            "sms_permission",
            vec![Defect::new(
                "sms_permission_revoked",
                vec![user_init("revoke_app_permission")
                    .arg("app_name", "messaging")
                    .arg("permission", "sms")],
                vec![user_fix("grant_app_permission")
                    .arg("app_name", "messaging")
                    .arg("permission", "sms")],
            )],
        ),
        (
            "storage_permission",
            vec![Defect::new(
                "storage_permission_revoked",
                vec![user_init("revoke_app_permission")
                    .arg("app_name", "messaging")
                    .arg("permission", "storage")],
                vec![user_fix("grant_app_permission")
                    .arg("app_name", "messaging")
                    .arg("permission", "storage")],
            )],
        ),
    ]
}

fn escalation_group() -> (&'static str, Vec<Defect>) {
    let mut d = Defect::new(
        "billing_dispute_transfer",
        vec![agent_init("set_bill_status")
            .arg("bill_id", "B1003")
            .arg("status", "Overdue")],
        vec![SolutionCall::new(Agent, "transfer_to_human").arg("summary", TRANSFER_SUMMARY)],
    )
    .note("You also think the overdue charge on your latest bill is wrong. Once your phone is working, ask to be handed over to a human agent about it.");
    d.ticket_note = Some("The user also disputes an overdue bill and wants to speak with a human agent.");
    d.extra_assertions = vec![AssertionCall::holds(
        Agent,
        "assert_transfer_occurred",
        Default::default(),
    )];
    ("escalation", vec![d])
}

fn goal(intent: Intent) -> AssertionCall {
    match intent {
        Intent::ServiceIssue => AssertionCall::holds(
            User,
            "assert_service_status",
            args([("expected_status", json!("connected"))]),
        ),
        Intent::MobileDataIssue => AssertionCall::holds(
            User,
            "assert_data_speed",
            args([("expected_speed", json!("excellent"))]),
        ),
        Intent::MmsIssue => AssertionCall::holds(User, "assert_mms_working", Default::default()),
    }
}

fn materialize(intent: Intent, groups: Vec<(&'static str, Vec<Defect>)>) -> Vec<SubtaskGroup> {
    groups
        .into_iter()
        .map(|(gid, members)| SubtaskGroup {
            group_id: gid.into(),
            members: members
                .into_iter()
                .map(|d| {
                    let mut assertions = vec![goal(intent)];
                    assertions.extend(d.extra_assertions);
                    AtomicSubtask {
                        id: d.id.into(),
                        intent,
                        group_id: gid.into(),
                        init_calls: d.init,
                        solution_calls: d.solution,
                        assertion_calls: assertions,
                        scenario_note: d.scenario_note.map(Into::into),
                        ticket_note: d.ticket_note.map(Into::into),
                    }
                })
                .collect(),
        })
        .collect()
}

const KNOWN_INFO: &str = "You are John Smith with phone number 555-123-2002.";

fn preamble() -> Vec<InitCall> {
    vec![user_init("set_user_info")
        .arg("name", USER_NAME)
        .arg("phone_number", USER_PHONE)]
}

fn template(intent: Intent) -> ScenarioTemplate {
    let (purpose, reason, unknown, instructions, ticket): (&str, &str, Option<&str>, &str, &str) = match intent {
        Intent::ServiceIssue => (
            "Test resolution path: No Service/Connection Issues.",
            "Your phone has been showing 'No Service' for the past few hours.",
            None,
            "If the agent suggests actions that don't immediately fix the issue, follow their guidance but express mild frustration after the first unsuccessful attempt. You will consider the issue resolved when the status bar shows that you have signal. If the tool call does not return updated status information, you might need to perform another tool call to get the updated status.",
            "The user is experiencing issues with their phone service. They are unable to make or receive calls, and the status bar shows 'No Service'. Customer name: John Smith, phone number: 555-123-2002. They will consider the issue resolved when the status bar shows that they have signal.",
        ),
        Intent::MobileDataIssue => (
            "Test resolution path: Mobile Data Issues.",
            "Mobile data on your phone has stopped working or has become very slow.",
            Some("You do not know your customer ID or which plan your line is on."),
            "Carry out the agent's troubleshooting steps one at a time and report what your phone shows after each one. The issue is resolved for you once a speed test reports excellent mobile data speed.",
            "The user reports that mobile data on their phone is not working or is very slow. Customer name: John Smith, phone number: 555-123-2002. They will consider the issue resolved when a speed test reports excellent mobile data speed.",
        ),
        Intent::MmsIssue => (
            "Test resolution path: MMS Issues.",
            "Picture messages (MMS) will not send from your phone.",
            Some("You do not know your customer ID or which plan your line is on."),
            "Carry out the agent's troubleshooting steps one at a time and report what your phone shows after each one. The issue is resolved for you once a test picture message sends successfully.",
            "The user cannot send MMS picture messages from their phone. Customer name: John Smith, phone number: 555-123-2002. They will consider the issue resolved when a picture message sends successfully.",
        ),
    };
    ScenarioTemplate {
        domain: DOMAIN_NAME.into(),
        purpose: purpose.into(),
        reason_for_call: reason.into(),
        known_info: KNOWN_INFO.into(),
        unknown_info: unknown.map(Into::into),
        task_instructions: instructions.into(),
        ticket: ticket.into(),
        preamble: preamble(),
    }
}

/// Group lists per intent. Every intent inherits the service groups, and
/// the escalation group always comes last.
pub fn catalog() -> Catalog {
    let mut intents = Vec::new();
    for (intent, max) in [
        (Intent::ServiceIssue, 5),
        (Intent::MobileDataIssue, 7),
        (Intent::MmsIssue, 9),
    ] {
        let mut groups = service_groups();
        match intent {
            Intent::ServiceIssue => {}
            Intent::MobileDataIssue => groups.extend(data_groups()),
            Intent::MmsIssue => {
                // throttling defects only affect speed, not MMS delivery
                groups.extend(
                    data_groups()
                        .into_iter()
                        .filter(|(g, _)| !matches!(*g, "data_saver" | "vpn")),
                );
                groups.extend(mms_groups());
            }
        }
        groups.push(escalation_group());
        intents.push(IntentSpec {
            intent,
            template: template(intent),
            groups: materialize(intent, groups),
            min_subtasks: 1,
            max_subtasks: max,
        });
    }
    Catalog {
        domain: DOMAIN_NAME.into(),
        intents,
    }
}

