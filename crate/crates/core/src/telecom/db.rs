//! Record types for the carrier CRM (agent side) and the handset (user side).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

/// Fixed "today" for every date the domain writes.
pub const TODAY: &str = "2025-02-25";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Address {
    pub street: String,
    pub city: String,
    pub state: String,
    pub zip_code: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AccountStatus {
    Active,
    Suspended,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaymentMethod {
    pub method_type: String,
    pub account_number_last_4: String,
    pub expiration_date: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Customer {
    pub customer_id: String,
    pub full_name: String,
    pub date_of_birth: String,
    pub email: String,
    pub phone_number: String,
    pub address: Address,
    pub account_status: AccountStatus,
    pub payment_methods: Vec<PaymentMethod>,
    pub line_ids: Vec<String>,
    pub bill_ids: Vec<String>,
    pub created_at: String,
    pub last_extension_date: Option<String>,
    pub goodwill_credit_used_this_year: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LineStatus {
    Active,
    Suspended,
    Pending,
    Closed,
}

impl LineStatus {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "Active" => Some(LineStatus::Active),
            "Suspended" => Some(LineStatus::Suspended),
            "Pending" => Some(LineStatus::Pending),
            "Closed" => Some(LineStatus::Closed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub line_id: String,
    pub phone_number: String,
    pub status: LineStatus,
    pub plan_id: String,
    pub device_id: String,
    pub data_used_gb: f64,
    pub data_refueling_gb: f64,
    pub roaming_enabled: bool,
    pub contract_end_date: String,
    pub last_plan_change_date: String,
    pub last_sim_replacement_date: Option<String>,
    pub suspension_start_date: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Device {
    pub device_id: String,
    pub device_type: String,
    pub model: String,
    pub imei: String,
    pub is_esim_capable: bool,
    pub activated: bool,
    pub activation_date: Option<String>,
    pub last_esim_transfer_date: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub plan_id: String,
    pub name: String,
    pub data_limit_gb: f64,
    pub price: f64,
    pub mms_included: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BillStatus {
    Paid,
    Due,
    Overdue,
}

impl BillStatus {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "Paid" => Some(BillStatus::Paid),
            "Due" => Some(BillStatus::Due),
            "Overdue" => Some(BillStatus::Overdue),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bill {
    pub bill_id: String,
    pub customer_id: String,
    pub amount_due: f64,
    pub due_date: String,
    pub status: BillStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transfer {
    pub summary: String,
    pub date: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrmDb {
    pub customers: BTreeMap<String, Customer>,
    pub lines: BTreeMap<String, Line>,
    pub devices: BTreeMap<String, Device>,
    pub plans: BTreeMap<String, Plan>,
    pub bills: BTreeMap<String, Bill>,
    pub transfers: Vec<Transfer>,
}

impl CrmDb {
    pub fn line_by_number(&self, phone_number: &str) -> Option<&Line> {
        self.lines.values().find(|l| l.phone_number == phone_number)
    }

    /// The line, checked to belong to the customer.
    pub fn owned_line_mut(&mut self, customer_id: &str, line_id: &str) -> Result<&mut Line, String> {
        let customer = self
            .customers
            .get(customer_id)
            .ok_or_else(|| format!("customer not found: {customer_id}"))?;
        if !customer.line_ids.iter().any(|l| l == line_id) {
            return Err(format!("line {line_id} does not belong to customer {customer_id}"));
        }
        self.lines
            .get_mut(line_id)
            .ok_or_else(|| format!("line not found: {line_id}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimLock {
    Unlocked,
    PinLocked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sim {
    pub seated: bool,
    pub lock_state: SimLock,
    /// Cleared when the card is knocked loose; only a reseat sets it again.
    pub active: bool,
    pub pin: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NetworkMode {
    #[serde(rename = "4g_5g_preferred")]
    Auto,
    #[serde(rename = "4g_only")]
    Lte,
    #[serde(rename = "3g_only")]
    Umts,
    #[serde(rename = "2g_only")]
    Gsm,
}

impl NetworkMode {
    pub const NAMES: [&'static str; 4] = ["4g_5g_preferred", "4g_only", "3g_only", "2g_only"];

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "4g_5g_preferred" => Some(NetworkMode::Auto),
            "4g_only" => Some(NetworkMode::Lte),
            "3g_only" => Some(NetworkMode::Umts),
            "2g_only" => Some(NetworkMode::Gsm),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NetworkMode::Auto => "4g_5g_preferred",
            NetworkMode::Lte => "4g_only",
            NetworkMode::Umts => "3g_only",
            NetworkMode::Gsm => "2g_only",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phone {
    pub user_name: String,
    pub user_phone_number: String,
    pub airplane_mode: bool,
    pub sim: Sim,
    pub mobile_data_enabled: bool,
    pub data_roaming_enabled: bool,
    pub wifi_radio: bool,
    pub wifi_connected: bool,
    pub wifi_network: Option<String>,
    pub apn_mms_correct: bool,
    /// Set by an APN reset; takes effect on the next restart.
    pub apn_reset_pending: bool,
    pub abroad: bool,
    pub battery_percent: u8,
    pub powered_on: bool,
    pub network_mode: NetworkMode,
    pub data_saver: bool,
    pub vpn_connected: bool,
    pub app_permissions: BTreeMap<String, BTreeSet<String>>,
}

impl Phone {
    pub fn has_permission(&self, app: &str, permission: &str) -> bool {
        self.app_permissions
            .get(app)
            .is_some_and(|p| p.contains(permission))
    }

    /// Reboot semantics shared by the restart tools.
    pub fn restart(&mut self) {
        if self.apn_reset_pending {
            self.apn_mms_correct = true;
            self.apn_reset_pending = false;
        }
        self.powered_on = true;
    }
}

pub const PERMISSIONS: [&str; 4] = ["sms", "storage", "camera", "location"];
