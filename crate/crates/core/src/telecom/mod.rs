//! Mobile-carrier technical support: a CRM on the agent side and a mocked
//! handset on the user side, coupled through [`status::derive_network_status`].

pub mod catalog;
pub mod db;
pub mod init;
pub mod policy;
pub mod status;
pub mod tools;

use std::sync::{Arc, OnceLock};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::env::{AssertionFn, Domain, InitFn, ToolRegistry, World};
use crate::world::{PlayerId, WorldState};

use db::{CrmDb, Phone};

pub const DOMAIN_NAME: &str = "telecom";

/// Shipped seed fixture.
pub const SEED_JSON: &str = include_str!("../../data/telecom_seed.json");

#[derive(Deserialize)]
struct SeedFile {
    crm: CrmDb,
    phone: Phone,
}

pub struct Telecom {
    registry: ToolRegistry<Telecom>,
    seed: World<Telecom>,
}

impl Telecom {
    pub fn new() -> Self {
        let seed: SeedFile = serde_json::from_str(SEED_JSON).expect("shipped seed fixture parses");
        Telecom {
            registry: tools::registry(),
            seed: WorldState {
                agent_db: seed.crm,
                user_db: seed.phone,
            },
        }
    }

    /// Process-wide shared instance.
    pub fn shared() -> Arc<Telecom> {
        static SHARED: OnceLock<Arc<Telecom>> = OnceLock::new();
        Arc::clone(SHARED.get_or_init(|| Arc::new(Telecom::new())))
    }

    /// SHA-256 of the seed fixture bytes.
    pub fn fixture_digest() -> String {
        hex::encode(Sha256::digest(SEED_JSON.as_bytes()))
    }
}

impl Default for Telecom {
    fn default() -> Self {
        Self::new()
    }
}

impl Domain for Telecom {
    type AgentDb = CrmDb;
    type UserDb = Phone;

    fn name(&self) -> &str {
        DOMAIN_NAME
    }

    fn seed_world(&self) -> World<Self> {
        self.seed.clone()
    }

    fn tools(&self) -> &ToolRegistry<Self> {
        &self.registry
    }

    fn init_function(&self, env: PlayerId, name: &str) -> Option<InitFn<Self>> {
        init::init_function(env, name)
    }

    fn assertion(&self, env: PlayerId, name: &str) -> Option<AssertionFn<Self>> {
        init::assertion(env, name)
    }

    fn agent_policy(&self) -> String {
        policy::AGENT_POLICY.to_string()
    }
}
