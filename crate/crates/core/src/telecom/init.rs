//! Privileged setup functions and the assertion library.

use serde_json::Value;

use super::db::{BillStatus, LineStatus, NetworkMode, SimLock, TODAY};
use super::status::{derive_network_status, Connection, DataSpeed};
use super::tools::{bool_arg, num_arg, str_arg};
use super::Telecom;
use crate::env::{AssertionFn, InitFn, State, World};
use crate::world::{Args, PlayerId};

type W = World<Telecom>;
type R = Result<(), String>;

fn set_user_info(w: &mut W, a: &Args) -> R {
    w.user_db.user_name = str_arg(a, "name")?.into();
    w.user_db.user_phone_number = str_arg(a, "phone_number")?.into();
    Ok(())
}

fn turn_airplane_mode_on(w: &mut W, _: &Args) -> R {
    w.user_db.airplane_mode = true;
    Ok(())
}

/// The card stays in the tray but is no longer recognized until reseated.
fn unseat_sim_card(w: &mut W, _: &Args) -> R {
    w.user_db.sim.active = false;
    Ok(())
}

fn remove_sim_card(w: &mut W, _: &Args) -> R {
    w.user_db.sim.seated = false;
    Ok(())
}

fn lock_sim_card(w: &mut W, _: &Args) -> R {
    w.user_db.sim.lock_state = SimLock::PinLocked;
    Ok(())
}

fn set_user_abroad(w: &mut W, _: &Args) -> R {
    w.user_db.abroad = true;
    Ok(())
}

fn set_data_roaming(w: &mut W, a: &Args) -> R {
    w.user_db.data_roaming_enabled = bool_arg(a, "enabled")?;
    Ok(())
}

fn turn_mobile_data_off(w: &mut W, _: &Args) -> R {
    w.user_db.mobile_data_enabled = false;
    Ok(())
}

fn turn_data_saver_on(w: &mut W, _: &Args) -> R {
    w.user_db.data_saver = true;
    Ok(())
}

fn connect_vpn(w: &mut W, _: &Args) -> R {
    w.user_db.vpn_connected = true;
    Ok(())
}

fn break_apn_mms_settings(w: &mut W, _: &Args) -> R {
    w.user_db.apn_mms_correct = false;
    Ok(())
}

fn connect_wifi_network(w: &mut W, a: &Args) -> R {
    let name = str_arg(a, "network_name")?;
    w.user_db.wifi_radio = true;
    w.user_db.wifi_connected = true;
    w.user_db.wifi_network = Some(name.into());
    Ok(())
}

fn revoke_app_permission(w: &mut W, a: &Args) -> R {
    let app = str_arg(a, "app_name")?;
    let permission = str_arg(a, "permission")?;
    w.user_db
        .app_permissions
        .get_mut(app)
        .ok_or_else(|| format!("app not installed: {app}"))?
        .remove(permission);
    Ok(())
}

fn set_network_mode(w: &mut W, a: &Args) -> R {
    let mode = str_arg(a, "mode")?;
    w.user_db.network_mode =
        NetworkMode::parse(mode).ok_or_else(|| format!("unknown network mode: {mode}"))?;
    Ok(())
}

fn line_mut<'a>(w: &'a mut W, a: &Args) -> Result<&'a mut super::db::Line, String> {
    let id = str_arg(a, "line_id")?;
    w.agent_db
        .lines
        .get_mut(id)
        .ok_or_else(|| format!("line not found: {id}"))
}

fn set_line_suspended(w: &mut W, a: &Args) -> R {
    let line = line_mut(w, a)?;
    line.status = LineStatus::Suspended;
    line.suspension_start_date = Some(TODAY.into());
    Ok(())
}

fn set_line_roaming(w: &mut W, a: &Args) -> R {
    let enabled = bool_arg(a, "enabled")?;
    line_mut(w, a)?.roaming_enabled = enabled;
    Ok(())
}

fn set_data_usage(w: &mut W, a: &Args) -> R {
    let used = num_arg(a, "data_used_gb")?;
    if used < 0.0 {
        return Err("data_used_gb must be non-negative".into());
    }
    line_mut(w, a)?.data_used_gb = used;
    Ok(())
}

fn set_bill_status(w: &mut W, a: &Args) -> R {
    let id = str_arg(a, "bill_id")?;
    let status = str_arg(a, "status")?;
    let status = BillStatus::parse(status).ok_or_else(|| format!("unknown bill status: {status}"))?;
    w.agent_db
        .bills
        .get_mut(id)
        .ok_or_else(|| format!("bill not found: {id}"))?
        .status = status;
    Ok(())
}

pub(crate) fn init_function(env: PlayerId, name: &str) -> Option<InitFn<Telecom>> {
    let f: InitFn<Telecom> = match (env, name) {
        (PlayerId::User, "set_user_info") => set_user_info,
        (PlayerId::User, "turn_airplane_mode_on") => turn_airplane_mode_on,
        (PlayerId::User, "unseat_sim_card") => unseat_sim_card,
        (PlayerId::User, "remove_sim_card") => remove_sim_card,
        (PlayerId::User, "lock_sim_card") => lock_sim_card,
        (PlayerId::User, "set_user_abroad") => set_user_abroad,
        (PlayerId::User, "set_data_roaming") => set_data_roaming,
        (PlayerId::User, "turn_mobile_data_off") => turn_mobile_data_off,
        (PlayerId::User, "turn_data_saver_on") => turn_data_saver_on,
        (PlayerId::User, "connect_vpn") => connect_vpn,
        (PlayerId::User, "break_apn_mms_settings") => break_apn_mms_settings,
        (PlayerId::User, "connect_wifi_network") => connect_wifi_network,
        (PlayerId::User, "revoke_app_permission") => revoke_app_permission,
        (PlayerId::User, "set_network_mode") => set_network_mode,
        (PlayerId::Agent, "set_line_suspended") => set_line_suspended,
        (PlayerId::Agent, "set_line_roaming") => set_line_roaming,
        (PlayerId::Agent, "set_data_usage") => set_data_usage,
        (PlayerId::Agent, "set_bill_status") => set_bill_status,
        _ => return None,
    };
    Some(f)
}

type S = State<Telecom>;

fn assert_service_status(s: &S, a: &Args) -> Result<bool, String> {
    let raw = str_arg(a, "expected_status")?;
    let expected = Connection::parse(raw).ok_or_else(|| format!("unknown status: {raw}"))?;
    let status = derive_network_status(&s.world.agent_db, &s.world.user_db)?;
    Ok(status.cellular_connection == expected)
}

fn assert_data_speed(s: &S, a: &Args) -> Result<bool, String> {
    let raw = str_arg(a, "expected_speed")?;
    let expected = DataSpeed::parse(raw).ok_or_else(|| format!("unknown speed: {raw}"))?;
    let status = derive_network_status(&s.world.agent_db, &s.world.user_db)?;
    Ok(status.data_speed == expected)
}

fn assert_mms_working(s: &S, _: &Args) -> Result<bool, String> {
    Ok(derive_network_status(&s.world.agent_db, &s.world.user_db)?.mms_working)
}

fn assert_line_status(s: &S, a: &Args) -> Result<bool, String> {
    let id = str_arg(a, "line_id")?;
    let raw = str_arg(a, "expected_status")?;
    let expected = LineStatus::parse(raw).ok_or_else(|| format!("unknown line status: {raw}"))?;
    let line = s
        .world
        .agent_db
        .lines
        .get(id)
        .ok_or_else(|| format!("line not found: {id}"))?;
    Ok(line.status == expected)
}

/// True once the agent has successfully called `transfer_to_human`.
fn assert_transfer_occurred(s: &S, _: &Args) -> Result<bool, String> {
    Ok(s.history.iter().any(|e| {
        e.actor == PlayerId::Agent
            && e.tool_call().is_some_and(|c| c.name == "transfer_to_human")
            && e.observation.as_ref().is_some_and(|o| !o.is_error())
    }))
}

pub(crate) fn assertion(env: PlayerId, name: &str) -> Option<AssertionFn<Telecom>> {
    let f: AssertionFn<Telecom> = match (env, name) {
        (PlayerId::User, "assert_service_status") => assert_service_status,
        (PlayerId::User, "assert_data_speed") => assert_data_speed,
        (PlayerId::User, "assert_mms_working") => assert_mms_working,
        (PlayerId::Agent, "assert_line_status") => assert_line_status,
        (PlayerId::Agent, "assert_transfer_occurred") => assert_transfer_occurred,
        _ => return None,
    };
    Some(f)
}

/// Argument helper for building init and assertion calls.
pub fn args<const N: usize>(pairs: [(&str, Value); N]) -> Args {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}
