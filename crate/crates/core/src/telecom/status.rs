//! The handset's observable network state, derived from both databases.
//!
//! Every user-visible status (status bar, network panel, speed test, MMS
//! probe) and every assertion reads through [`derive_network_status`].

use serde::{Deserialize, Serialize};

use super::db::{CrmDb, LineStatus, NetworkMode, Phone, SimLock};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimStatus {
    Active,
    Missing,
    Invalid,
    Locked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Connection {
    Connected,
    NoService,
    Searching,
}

impl Connection {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "connected" => Some(Connection::Connected),
            "no_service" => Some(Connection::NoService),
            "searching" => Some(Connection::Searching),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signal {
    None,
    Poor,
    Fair,
    Good,
    Excellent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NetworkType {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "3G")]
    G3,
    #[serde(rename = "4G")]
    G4,
    #[serde(rename = "5G")]
    G5,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSpeed {
    None,
    Slow,
    Excellent,
}

impl DataSpeed {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(DataSpeed::None),
            "slow" => Some(DataSpeed::Slow),
            "excellent" => Some(DataSpeed::Excellent),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkStatus {
    pub sim_status: SimStatus,
    pub cellular_connection: Connection,
    pub signal: Signal,
    pub network_type: NetworkType,
    pub roaming_active: bool,
    pub data_remaining_gb: f64,
    pub data_working: bool,
    pub data_speed: DataSpeed,
    pub mms_working: bool,
}

pub fn sim_status(phone: &Phone) -> SimStatus {
    if !phone.sim.seated {
        SimStatus::Missing
    } else if phone.sim.lock_state == SimLock::PinLocked {
        SimStatus::Locked
    } else if !phone.sim.active {
        SimStatus::Invalid
    } else {
        SimStatus::Active
    }
}

/// Fails only when the handset's number is not a line in the CRM.
pub fn derive_network_status(crm: &CrmDb, phone: &Phone) -> Result<NetworkStatus, String> {
    let line = crm
        .line_by_number(&phone.user_phone_number)
        .ok_or_else(|| format!("no line found for phone number {}", phone.user_phone_number))?;
    let plan = crm
        .plans
        .get(&line.plan_id)
        .ok_or_else(|| format!("plan not found: {}", line.plan_id))?;

    let sim = sim_status(phone);
    let radio_up = phone.powered_on && !phone.airplane_mode && sim == SimStatus::Active;
    let connection = if !radio_up
        || line.status != LineStatus::Active
        || (phone.abroad && !line.roaming_enabled)
    {
        Connection::NoService
    } else if phone.network_mode == NetworkMode::Gsm {
        Connection::Searching
    } else {
        Connection::Connected
    };
    let connected = connection == Connection::Connected;

    let (signal, network_type) = if !connected {
        (Signal::None, NetworkType::None)
    } else if phone.network_mode == NetworkMode::Umts {
        (Signal::Fair, NetworkType::G3)
    } else if phone.abroad {
        (Signal::Good, NetworkType::G4)
    } else if phone.network_mode == NetworkMode::Lte {
        (Signal::Excellent, NetworkType::G4)
    } else {
        (Signal::Excellent, NetworkType::G5)
    };

    let roaming_active = phone.abroad && connected;
    let remaining = plan.data_limit_gb + line.data_refueling_gb - line.data_used_gb;
    let data_path =
        connected && phone.mobile_data_enabled && (!roaming_active || phone.data_roaming_enabled);
    let data_working = data_path && remaining > 0.0;
    let throttled = phone.data_saver || phone.vpn_connected || network_type == NetworkType::G3;
    let data_speed = if data_working && !throttled {
        DataSpeed::Excellent
    } else if data_path {
        DataSpeed::Slow
    } else {
        DataSpeed::None
    };
    let mms_working = data_working
        && phone.apn_mms_correct
        && plan.mms_included
        && !phone.wifi_connected
        && phone.has_permission("messaging", "sms")
        && phone.has_permission("messaging", "storage");

    Ok(NetworkStatus {
        sim_status: sim,
        cellular_connection: connection,
        signal,
        network_type,
        roaming_active,
        data_remaining_gb: remaining,
        data_working,
        data_speed,
        mms_working,
    })
}

fn on_off(b: bool) -> &'static str {
    if b {
        "ON"
    } else {
        "OFF"
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "Yes"
    } else {
        "No"
    }
}

fn snake<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        _ => String::new(),
    }
}

/// One-line status bar as the handset would draw it.
pub fn render_status_bar(phone: &Phone, status: &NetworkStatus) -> String {
    let mut parts: Vec<String> = Vec::new();
    if phone.airplane_mode {
        parts.push("[Airplane Mode]".into());
    }
    match (status.cellular_connection, status.signal) {
        (Connection::Searching, _) => parts.push("[Searching]".into()),
        (_, Signal::None) => parts.push("[No Signal]".into()),
        (_, signal) => {
            let (bars, label) = match signal {
                Signal::Poor => (1, "Poor"),
                Signal::Fair => (2, "Fair"),
                Signal::Good => (3, "Good"),
                _ => (4, "Excellent"),
            };
            parts.push(format!("[Signal {bars}] {label}"));
            parts.push(snake(&status.network_type));
            if status.roaming_active {
                parts.push("[Roaming]".into());
            }
            if status.data_working {
                parts.push("[Data] Enabled".into());
            } else if phone.mobile_data_enabled {
                parts.push("[Data] Unavailable".into());
            } else {
                parts.push("[Data] Disabled".into());
            }
        }
    }
    if phone.wifi_connected {
        if let Some(name) = &phone.wifi_network {
            parts.push(format!("[Wi-Fi] {name}"));
        }
    }
    if phone.vpn_connected {
        parts.push("[VPN]".into());
    }
    parts.push(format!("[Battery {}%]", phone.battery_percent));
    format!("Status Bar: {}", parts.join(" | "))
}

/// Multi-line network panel.
pub fn render_network_status(phone: &Phone, status: &NetworkStatus) -> String {
    [
        format!("Airplane Mode: {}", on_off(phone.airplane_mode)),
        format!("SIM Card Status: {}", snake(&status.sim_status)),
        format!("Cellular Connection: {}", snake(&status.cellular_connection)),
        format!("Cellular Signal: {}", snake(&status.signal)),
        format!("Cellular Network Type: {}", snake(&status.network_type)),
        format!("Mobile Data Allowed: {}", yes_no(phone.mobile_data_enabled)),
        format!("Roaming: {}", yes_no(status.roaming_active)),
        format!("Data Roaming Allowed: {}", yes_no(phone.data_roaming_enabled)),
        format!("Wi-Fi Radio: {}", on_off(phone.wifi_radio)),
        format!("Wi-Fi Connected: {}", yes_no(phone.wifi_connected)),
    ]
    .join("\n")
}

pub fn render_sim_status(status: SimStatus) -> &'static str {
    match status {
        SimStatus::Active => "Your SIM card is active and working.",
        SimStatus::Missing => "No SIM card detected in the phone.",
        SimStatus::Locked => "The SIM card is locked with a PIN code.",
        SimStatus::Invalid => "The SIM card is invalid or not recognized.",
    }
}

pub fn render_speed_test(status: &NetworkStatus) -> String {
    match status.data_speed {
        DataSpeed::Excellent => {
            "Speed test over mobile data: download 245.3 Mbps, upload 48.9 Mbps. Speed: excellent."
                .into()
        }
        DataSpeed::Slow => {
            "Speed test over mobile data: download 0.4 Mbps, upload 0.1 Mbps. Speed: slow.".into()
        }
        DataSpeed::None => "Speed test failed: no connection.".into(),
    }
}
