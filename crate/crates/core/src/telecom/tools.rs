//! Agent (CRM) and user (handset) tool implementations and their specs.

use serde::Serialize;
use serde_json::{json, Value};

use super::db::{LineStatus, NetworkMode, Phone, Transfer, PERMISSIONS, TODAY};
use super::status::{
    derive_network_status, render_network_status, render_sim_status, render_speed_test,
    render_status_bar, sim_status, SimStatus,
};
use super::Telecom;
use crate::env::{ParamSpec, ParamType, ToolImpl, ToolKind, ToolRegistry, ToolSpec, World};
use crate::world::{Args, PlayerId};

type W = World<Telecom>;
type Out = Result<String, String>;

pub(crate) fn str_arg<'a>(args: &'a Args, key: &str) -> Result<&'a str, String> {
    args.get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| format!("missing string argument '{key}'"))
}

pub(crate) fn num_arg(args: &Args, key: &str) -> Result<f64, String> {
    args.get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| format!("missing numeric argument '{key}'"))
}

pub(crate) fn bool_arg(args: &Args, key: &str) -> Result<bool, String> {
    args.get(key)
        .and_then(Value::as_bool)
        .ok_or_else(|| format!("missing boolean argument '{key}'"))
}

/// JSON with four-space indentation.
pub fn pretty<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let fmt = serde_json::ser::PrettyFormatter::with_indent(b"    ");
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    value
        .serialize(&mut ser)
        .expect("domain records always serialize");
    String::from_utf8(buf).expect("serde_json emits utf-8")
}

/// Round to two decimals so repeated refuels do not accumulate float noise.
fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

// ---- agent read tools ----

fn get_customer_by_phone(w: &W, a: &Args) -> Out {
    let phone = str_arg(a, "phone_number")?;
    w.agent_db
        .customers
        .values()
        .find(|c| c.phone_number == phone)
        .map(pretty)
        .ok_or_else(|| format!("customer not found for phone number {phone}"))
}

fn get_customer_by_id(w: &W, a: &Args) -> Out {
    let id = str_arg(a, "customer_id")?;
    w.agent_db
        .customers
        .get(id)
        .map(pretty)
        .ok_or_else(|| format!("customer not found: {id}"))
}

fn get_customer_by_name_dob(w: &W, a: &Args) -> Out {
    let name = str_arg(a, "full_name")?;
    let dob = str_arg(a, "date_of_birth")?;
    w.agent_db
        .customers
        .values()
        .find(|c| c.full_name.eq_ignore_ascii_case(name) && c.date_of_birth == dob)
        .map(pretty)
        .ok_or_else(|| format!("customer not found for {name} born {dob}"))
}

fn get_details_by_id(w: &W, a: &Args) -> Out {
    let id = str_arg(a, "id")?;
    let db = &w.agent_db;
    let found = match id.chars().next() {
        Some('L') => db.lines.get(id).map(pretty),
        Some('D') => db.devices.get(id).map(pretty),
        Some('P') => db.plans.get(id).map(pretty),
        Some('B') => db.bills.get(id).map(pretty),
        Some('C') => db.customers.get(id).map(pretty),
        _ => return Err(format!("unrecognized id prefix: {id}")),
    };
    found.ok_or_else(|| format!("no record found for id {id}"))
}

fn get_bills_for_customer(w: &W, a: &Args) -> Out {
    let id = str_arg(a, "customer_id")?;
    let customer = w
        .agent_db
        .customers
        .get(id)
        .ok_or_else(|| format!("customer not found: {id}"))?;
    let bills: Vec<_> = customer
        .bill_ids
        .iter()
        .filter_map(|b| w.agent_db.bills.get(b))
        .collect();
    Ok(pretty(&bills))
}

fn get_data_usage(w: &W, a: &Args) -> Out {
    let id = str_arg(a, "line_id")?;
    let line = w
        .agent_db
        .lines
        .get(id)
        .ok_or_else(|| format!("line not found: {id}"))?;
    let plan = w
        .agent_db
        .plans
        .get(&line.plan_id)
        .ok_or_else(|| format!("plan not found: {}", line.plan_id))?;
    Ok(pretty(&json!({
        "line_id": line.line_id,
        "data_used_gb": line.data_used_gb,
        "data_limit_gb": plan.data_limit_gb,
        "data_refueling_gb": line.data_refueling_gb,
        "data_remaining_gb": round2(plan.data_limit_gb + line.data_refueling_gb - line.data_used_gb),
    })))
}

fn check_line_eligibility(w: &W, a: &Args) -> Out {
    let id = str_arg(a, "line_id")?;
    let action = str_arg(a, "action")?;
    let line = w
        .agent_db
        .lines
        .get(id)
        .ok_or_else(|| format!("line not found: {id}"))?;
    let (eligible, reason) = match action {
        "roaming" => (
            line.status == LineStatus::Active,
            "roaming can be changed on active lines",
        ),
        "refuel" => (
            line.status == LineStatus::Active,
            "data can be added to active lines, up to 10 GB per request",
        ),
        "resume" => (
            line.status == LineStatus::Suspended,
            "only suspended lines can be resumed",
        ),
        "suspend" => (
            line.status == LineStatus::Active,
            "only active lines can be suspended",
        ),
        other => return Err(format!("unknown action: {other}")),
    };
    Ok(format!(
        "Line {id} is {}eligible for {action} ({reason}; current status: {:?}).",
        if eligible { "" } else { "not " },
        line.status
    ))
}

// ---- agent write tools ----

fn set_roaming(w: &mut W, a: &Args, enabled: bool) -> Out {
    let customer = str_arg(a, "customer_id")?;
    let id = str_arg(a, "line_id")?;
    let line = w.agent_db.owned_line_mut(customer, id)?;
    if line.status != LineStatus::Active {
        return Err(format!("line {id} is not active"));
    }
    let verb = if enabled { "enabled" } else { "disabled" };
    if line.roaming_enabled == enabled {
        return Ok(format!("Roaming is already {verb} for line {id}."));
    }
    line.roaming_enabled = enabled;
    Ok(format!("Roaming {verb} for line {id}."))
}

fn enable_roaming(w: &mut W, a: &Args) -> Out {
    set_roaming(w, a, true)
}

fn disable_roaming(w: &mut W, a: &Args) -> Out {
    set_roaming(w, a, false)
}

fn refuel_data(w: &mut W, a: &Args) -> Out {
    let customer = str_arg(a, "customer_id")?;
    let id = str_arg(a, "line_id")?;
    let gb = num_arg(a, "gb")?;
    if gb > 10.0 {
        return Err("at most 10 GB can be added per request".into());
    }
    let line = w.agent_db.owned_line_mut(customer, id)?;
    if line.status != LineStatus::Active {
        return Err(format!("line {id} is not active"));
    }
    line.data_refueling_gb = round2(line.data_refueling_gb + gb);
    Ok(format!(
        "Added {gb} GB of data to line {id}. Total refueled this cycle: {} GB.",
        line.data_refueling_gb
    ))
}

fn suspend_line(w: &mut W, a: &Args) -> Out {
    let customer = str_arg(a, "customer_id")?;
    let id = str_arg(a, "line_id")?;
    let line = w.agent_db.owned_line_mut(customer, id)?;
    if line.status != LineStatus::Active {
        return Err(format!("line {id} is not active"));
    }
    line.status = LineStatus::Suspended;
    line.suspension_start_date = Some(TODAY.into());
    Ok(format!("Line {id} suspended as of {TODAY}."))
}

fn resume_line(w: &mut W, a: &Args) -> Out {
    let customer = str_arg(a, "customer_id")?;
    let id = str_arg(a, "line_id")?;
    let line = w.agent_db.owned_line_mut(customer, id)?;
    if line.status != LineStatus::Suspended {
        return Err(format!("line {id} is not suspended"));
    }
    line.status = LineStatus::Active;
    line.suspension_start_date = None;
    Ok(format!("Line {id} has been resumed and is now active."))
}

fn transfer_to_human(w: &mut W, a: &Args) -> Out {
    let summary = str_arg(a, "summary")?;
    w.agent_db.transfers.push(Transfer {
        summary: summary.into(),
        date: TODAY.into(),
    });
    Ok("Transfer successful. A human agent will take over this conversation.".into())
}

// ---- user read tools ----

fn status_of(w: &W) -> Result<super::status::NetworkStatus, String> {
    derive_network_status(&w.agent_db, &w.user_db)
}

fn get_network_status(w: &W, _: &Args) -> Out {
    Ok(render_network_status(&w.user_db, &status_of(w)?))
}

fn get_sim_status(w: &W, _: &Args) -> Out {
    Ok(render_sim_status(sim_status(&w.user_db)).into())
}

fn check_status_bar(w: &W, _: &Args) -> Out {
    Ok(render_status_bar(&w.user_db, &status_of(w)?))
}

fn run_speed_test(w: &W, _: &Args) -> Out {
    Ok(render_speed_test(&status_of(w)?))
}

fn get_data_usage_on_device(w: &W, _: &Args) -> Out {
    let line = w
        .agent_db
        .line_by_number(&w.user_db.user_phone_number)
        .ok_or("no usage data available")?;
    Ok(format!(
        "Mobile data used this cycle: {} GB.",
        line.data_used_gb
    ))
}

fn get_wifi_status(w: &W, _: &Args) -> Out {
    let p = &w.user_db;
    Ok(match (&p.wifi_radio, &p.wifi_network) {
        (false, _) => "Wi-Fi is OFF.".into(),
        (true, Some(name)) if p.wifi_connected => format!("Wi-Fi is ON and connected to {name}."),
        (true, _) => "Wi-Fi is ON but not connected to any network.".into(),
    })
}

fn get_apn_settings(w: &W, _: &Args) -> Out {
    let p = &w.user_db;
    let mmsc = if p.apn_mms_correct {
        "http://mms.carrier.example/mms"
    } else {
        "(not set)"
    };
    let mut out = format!("APN Name: carrier.internet\nMMSC URL: {mmsc}\nMMS Proxy: 10.0.0.200:8080");
    if p.apn_reset_pending {
        out.push_str("\nA reset to default settings is pending; restart the phone to apply it.");
    }
    Ok(out)
}

fn get_battery_level(w: &W, _: &Args) -> Out {
    Ok(format!("Battery level: {}%.", w.user_db.battery_percent))
}

fn can_send_mms_probe(w: &W, _: &Args) -> Out {
    Ok(if status_of(w)?.mms_working {
        "Test MMS sent successfully.".into()
    } else {
        "Test MMS failed to send.".into()
    })
}

fn get_device_info(w: &W, _: &Args) -> Out {
    let p = &w.user_db;
    Ok(format!(
        "Owner: {}\nPhone number: {}\nPowered on: {}",
        p.user_name,
        p.user_phone_number,
        if p.powered_on { "Yes" } else { "No" }
    ))
}

fn get_network_mode_preference(w: &W, _: &Args) -> Out {
    Ok(format!(
        "Preferred network mode: {}.",
        w.user_db.network_mode.as_str()
    ))
}

fn check_data_saver_status(w: &W, _: &Args) -> Out {
    Ok(format!(
        "Data Saver mode is {}.",
        if w.user_db.data_saver { "ON" } else { "OFF" }
    ))
}

fn check_vpn_status(w: &W, _: &Args) -> Out {
    Ok(if w.user_db.vpn_connected {
        "VPN is connected.".into()
    } else {
        "No VPN is connected.".into()
    })
}

fn get_app_permissions(w: &W, a: &Args) -> Out {
    let app = str_arg(a, "app_name")?;
    let perms = w
        .user_db
        .app_permissions
        .get(app)
        .ok_or_else(|| format!("app not installed: {app}"))?;
    if perms.is_empty() {
        Ok(format!("{app} has no permissions granted."))
    } else {
        let list: Vec<&str> = perms.iter().map(String::as_str).collect();
        Ok(format!("{app} permissions: {}.", list.join(", ")))
    }
}

fn get_roaming_status(w: &W, _: &Args) -> Out {
    let status = status_of(w)?;
    Ok(format!(
        "Currently roaming: {}. Data roaming setting: {}.",
        if status.roaming_active { "Yes" } else { "No" },
        if w.user_db.data_roaming_enabled { "ON" } else { "OFF" }
    ))
}

// ---- user write tools ----

/// Appends the post-state status bar to a user write tool's message.
fn with_bar(w: &W, message: &str) -> Out {
    let bar = render_status_bar(&w.user_db, &status_of(w)?);
    Ok(format!("{message}\n{bar}"))
}

fn phone(w: &mut W) -> &mut Phone {
    &mut w.user_db
}

fn toggle_airplane_mode(w: &mut W, _: &Args) -> Out {
    let p = phone(w);
    p.airplane_mode = !p.airplane_mode;
    let msg = format!("Airplane Mode is now {}.", if p.airplane_mode { "ON" } else { "OFF" });
    with_bar(w, &msg)
}

fn reseat_sim_card(w: &mut W, _: &Args) -> Out {
    let p = phone(w);
    p.sim.seated = true;
    p.sim.active = true;
    with_bar(w, "SIM card re-seated successfully.")
}

fn unlock_sim_with_pin(w: &mut W, a: &Args) -> Out {
    let pin = str_arg(a, "pin")?;
    let p = phone(w);
    if sim_status(p) != SimStatus::Locked {
        return with_bar(w, "The SIM card is not locked.");
    }
    if pin != p.sim.pin {
        return Err("incorrect PIN".into());
    }
    p.sim.lock_state = super::db::SimLock::Unlocked;
    with_bar(w, "SIM card unlocked.")
}

fn toggle_mobile_data(w: &mut W, _: &Args) -> Out {
    let p = phone(w);
    p.mobile_data_enabled = !p.mobile_data_enabled;
    let msg = format!("Mobile Data is now {}.", if p.mobile_data_enabled { "ON" } else { "OFF" });
    with_bar(w, &msg)
}

fn toggle_data_roaming(w: &mut W, _: &Args) -> Out {
    let p = phone(w);
    p.data_roaming_enabled = !p.data_roaming_enabled;
    let msg = format!(
        "Data Roaming is now {}.",
        if p.data_roaming_enabled { "ON" } else { "OFF" }
    );
    with_bar(w, &msg)
}

fn toggle_wifi(w: &mut W, _: &Args) -> Out {
    let p = phone(w);
    p.wifi_radio = !p.wifi_radio;
    if !p.wifi_radio {
        p.wifi_connected = false;
        p.wifi_network = None;
    }
    let msg = format!("Wi-Fi is now {}.", if p.wifi_radio { "ON" } else { "OFF" });
    with_bar(w, &msg)
}

fn reboot_phone(w: &mut W, _: &Args) -> Out {
    phone(w).restart();
    with_bar(w, "Phone restarted.")
}

fn reset_apn_settings(w: &mut W, _: &Args) -> Out {
    phone(w).apn_reset_pending = true;
    with_bar(
        w,
        "APN settings will be reset to default. Restart the phone to apply the change.",
    )
}

fn power_cycle(w: &mut W, _: &Args) -> Out {
    phone(w).restart();
    with_bar(w, "Phone powered off and back on.")
}

fn connect_wifi(w: &mut W, a: &Args) -> Out {
    let name = str_arg(a, "network_name")?.to_string();
    let p = phone(w);
    if !p.wifi_radio {
        return Err("Wi-Fi is off; turn it on first".into());
    }
    p.wifi_connected = true;
    let msg = format!("Connected to Wi-Fi network {name}.");
    p.wifi_network = Some(name);
    with_bar(w, &msg)
}

fn set_network_mode_preference(w: &mut W, a: &Args) -> Out {
    let mode = str_arg(a, "mode")?;
    let mode = NetworkMode::parse(mode).ok_or_else(|| format!("unknown network mode: {mode}"))?;
    phone(w).network_mode = mode;
    let msg = format!("Preferred network mode set to {}.", mode.as_str());
    with_bar(w, &msg)
}

fn toggle_data_saver_mode(w: &mut W, _: &Args) -> Out {
    let p = phone(w);
    p.data_saver = !p.data_saver;
    let msg = format!("Data Saver mode is now {}.", if p.data_saver { "ON" } else { "OFF" });
    with_bar(w, &msg)
}

fn disconnect_vpn(w: &mut W, _: &Args) -> Out {
    let p = phone(w);
    let msg = if p.vpn_connected {
        "VPN disconnected."
    } else {
        "No VPN was connected."
    };
    p.vpn_connected = false;
    with_bar(w, msg)
}

fn grant_app_permission(w: &mut W, a: &Args) -> Out {
    let app = str_arg(a, "app_name")?.to_string();
    let permission = str_arg(a, "permission")?.to_string();
    let perms = phone(w)
        .app_permissions
        .get_mut(&app)
        .ok_or_else(|| format!("app not installed: {app}"))?;
    perms.insert(permission.clone());
    with_bar(w, &format!("Granted {permission} permission to {app}."))
}

fn disconnect_wifi(w: &mut W, _: &Args) -> Out {
    let p = phone(w);
    let msg = if p.wifi_connected {
        "Disconnected from Wi-Fi."
    } else {
        "Wi-Fi was not connected."
    };
    p.wifi_connected = false;
    p.wifi_network = None;
    with_bar(w, msg)
}

fn spec(owner: PlayerId, kind: ToolKind, name: &str, doc: &str, params: Vec<ParamSpec>) -> ToolSpec {
    ToolSpec {
        name: name.into(),
        owner,
        kind,
        params,
        doc: doc.into(),
    }
}

fn s(name: &str, description: &str) -> ParamSpec {
    ParamSpec::required(name, ParamType::String, description)
}

fn one_of(name: &str, values: &[&str], description: &str) -> ParamSpec {
    ParamSpec::required(
        name,
        ParamType::Enum {
            values: values.iter().map(|v| v.to_string()).collect(),
        },
        description,
    )
}

pub(crate) fn registry() -> ToolRegistry<Telecom> {
    use PlayerId::{Agent, User};
    use ToolKind::{Read, Write};
    let cust_line = || vec![s("customer_id", "Customer id, e.g. C1001."), s("line_id", "Line id, e.g. L1001.")];

    let tools: Vec<(ToolSpec, ToolImpl<Telecom>)> = vec![
        (
            spec(Agent, Read, "get_customer_by_phone", "Look up a customer by their primary phone number.",
                vec![s("phone_number", "Phone number in the form 555-123-2002.")]),
            ToolImpl::Read(get_customer_by_phone),
        ),
        (
            spec(Agent, Read, "get_customer_by_id", "Look up a customer by customer id.",
                vec![s("customer_id", "Customer id, e.g. C1001.")]),
            ToolImpl::Read(get_customer_by_id),
        ),
        (
            spec(Agent, Read, "get_customer_by_name_dob", "Look up a customer by full name and date of birth.",
                vec![s("full_name", "Full name."), s("date_of_birth", "Date of birth, YYYY-MM-DD.")]),
            ToolImpl::Read(get_customer_by_name_dob),
        ),
        (
            spec(Agent, Read, "get_details_by_id", "Fetch a line (L...), device (D...), plan (P...), bill (B...) or customer (C...) record.",
                vec![s("id", "Record id.")]),
            ToolImpl::Read(get_details_by_id),
        ),
        (
            spec(Agent, Read, "get_bills_for_customer", "List a customer's bills.",
                vec![s("customer_id", "Customer id.")]),
            ToolImpl::Read(get_bills_for_customer),
        ),
        (
            spec(Agent, Read, "get_data_usage", "Data used, plan limit, refueled data and remaining data for a line.",
                vec![s("line_id", "Line id.")]),
            ToolImpl::Read(get_data_usage),
        ),
        (
            spec(Agent, Read, "check_line_eligibility", "Check whether an account action is allowed on a line.",
                vec![s("line_id", "Line id."), one_of("action", &["roaming", "refuel", "resume", "suspend"], "Action to check.")]),
            ToolImpl::Read(check_line_eligibility),
        ),
        (
            spec(Agent, Write, "enable_roaming", "Enable international roaming on a customer's line.", cust_line()),
            ToolImpl::Write(enable_roaming),
        ),
        (
            spec(Agent, Write, "disable_roaming", "Disable international roaming on a customer's line.", cust_line()),
            ToolImpl::Write(disable_roaming),
        ),
        (
            spec(Agent, Write, "refuel_data", "Add extra data for the current cycle to a customer's line.", {
                let mut p = cust_line();
                p.push(ParamSpec::required("gb", ParamType::PositiveNumber, "Gigabytes to add, at most 10."));
                p
            }),
            ToolImpl::Write(refuel_data),
        ),
        (
            spec(Agent, Write, "suspend_line", "Suspend an active line.", cust_line()),
            ToolImpl::Write(suspend_line),
        ),
        (
            spec(Agent, Write, "resume_line", "Resume a suspended line.", cust_line()),
            ToolImpl::Write(resume_line),
        ),
        (
            spec(Agent, Write, "transfer_to_human", "Hand the conversation over to a human agent.",
                vec![s("summary", "Short summary of the customer's issue.")]),
            ToolImpl::Write(transfer_to_human),
        ),
        (spec(User, Read, "get_network_status", "Show the phone's network panel.", vec![]), ToolImpl::Read(get_network_status)),
        (spec(User, Read, "get_sim_status", "Show the SIM card status.", vec![]), ToolImpl::Read(get_sim_status)),
        (spec(User, Read, "check_status_bar", "Look at the status bar.", vec![]), ToolImpl::Read(check_status_bar)),
        (spec(User, Read, "run_speed_test", "Run a mobile data speed test.", vec![]), ToolImpl::Read(run_speed_test)),
        (spec(User, Read, "get_data_usage_on_device", "Show data usage recorded on the phone.", vec![]), ToolImpl::Read(get_data_usage_on_device)),
        (spec(User, Read, "get_wifi_status", "Show Wi-Fi status.", vec![]), ToolImpl::Read(get_wifi_status)),
        (spec(User, Read, "get_apn_settings", "Show the access point (APN) settings.", vec![]), ToolImpl::Read(get_apn_settings)),
        (spec(User, Read, "get_battery_level", "Show the battery level.", vec![]), ToolImpl::Read(get_battery_level)),
        (spec(User, Read, "can_send_mms_probe", "Try sending a test picture message.", vec![]), ToolImpl::Read(can_send_mms_probe)),
        (spec(User, Read, "get_device_info", "Show owner and device information.", vec![]), ToolImpl::Read(get_device_info)),
        (spec(User, Read, "get_network_mode_preference", "Show the preferred network mode.", vec![]), ToolImpl::Read(get_network_mode_preference)),
        (spec(User, Read, "check_data_saver_status", "Show whether Data Saver is on.", vec![]), ToolImpl::Read(check_data_saver_status)),
        (spec(User, Read, "check_vpn_status", "Show whether a VPN is connected.", vec![]), ToolImpl::Read(check_vpn_status)),
        (
            spec(User, Read, "get_app_permissions", "List the permissions granted to an app.",
                vec![s("app_name", "App name, e.g. messaging.")]),
            ToolImpl::Read(get_app_permissions),
        ),
        (spec(User, Read, "get_roaming_status", "Show roaming state and the data roaming setting.", vec![]), ToolImpl::Read(get_roaming_status)),
        (spec(User, Write, "toggle_airplane_mode", "Turn Airplane Mode on or off.", vec![]), ToolImpl::Write(toggle_airplane_mode)),
        (spec(User, Write, "reseat_sim_card", "Remove and reinsert the SIM card.", vec![]), ToolImpl::Write(reseat_sim_card)),
        (
            spec(User, Write, "unlock_sim_with_pin", "Unlock a PIN-locked SIM card.", vec![s("pin", "SIM PIN.")]),
            ToolImpl::Write(unlock_sim_with_pin),
        ),
        (spec(User, Write, "toggle_mobile_data", "Turn Mobile Data on or off.", vec![]), ToolImpl::Write(toggle_mobile_data)),
        (spec(User, Write, "toggle_data_roaming", "Turn Data Roaming on or off.", vec![]), ToolImpl::Write(toggle_data_roaming)),
        (spec(User, Write, "toggle_wifi", "Turn the Wi-Fi radio on or off.", vec![]), ToolImpl::Write(toggle_wifi)),
        (spec(User, Write, "reboot_phone", "Restart the phone.", vec![]), ToolImpl::Write(reboot_phone)),
        (spec(User, Write, "reset_apn_settings", "Reset APN settings to default (applies after restart).", vec![]), ToolImpl::Write(reset_apn_settings)),
        (spec(User, Write, "power_cycle", "Power the phone off and on again.", vec![]), ToolImpl::Write(power_cycle)),
        (
            spec(User, Write, "connect_wifi", "Connect to a Wi-Fi network.", vec![s("network_name", "Network name.")]),
            ToolImpl::Write(connect_wifi),
        ),
        (
            spec(User, Write, "set_network_mode_preference", "Choose the preferred network mode.",
                vec![one_of("mode", &NetworkMode::NAMES, "Network mode.")]),
            ToolImpl::Write(set_network_mode_preference),
        ),
        (spec(User, Write, "toggle_data_saver_mode", "Turn Data Saver on or off.", vec![]), ToolImpl::Write(toggle_data_saver_mode)),
        (spec(User, Write, "disconnect_vpn", "Disconnect the active VPN.", vec![]), ToolImpl::Write(disconnect_vpn)),
        (
            spec(User, Write, "grant_app_permission", "Grant a permission to an app.",
                vec![s("app_name", "App name."), one_of("permission", &PERMISSIONS, "Permission.")]),
            ToolImpl::Write(grant_app_permission),
        ),
        (spec(User, Write, "disconnect_wifi", "Disconnect from the current Wi-Fi network.", vec![]), ToolImpl::Write(disconnect_wifi)),
    ];

    let mut registry = ToolRegistry::new();
    for (spec, imp) in tools {
        registry
            .register(spec, imp)
            .expect("telecom tool table is consistent");
    }
    registry
}
