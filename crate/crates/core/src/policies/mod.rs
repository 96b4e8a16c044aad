//! Built-in scripted policies and the chat-completion adapter.

pub mod llm;
mod scripted;

pub use llm::{ChatTransport, HttpTransport, LlmPolicy, LlmPolicyConfig, TransportError};
pub use scripted::{
    compliance_user, noisy_user, null_agent, oracle_agent, oracle_user, NullAgent, OracleAgent, ScriptedUser,
    NULL_AGENT_REPLY,
};

/// Byte offsets of `name` in `text` where it is not part of a longer
/// identifier.
pub fn mention_positions(text: &str, name: &str) -> Vec<usize> {
    let is_ident = |c: char| c.is_ascii_alphanumeric() || c == '_';
    text.match_indices(name)
        .filter(|(i, _)| {
            let before = text[..*i].chars().next_back();
            let after = text[i + name.len()..].chars().next();
            !before.is_some_and(is_ident) && !after.is_some_and(is_ident)
        })
        .map(|(i, _)| i)
        .collect()
}

pub fn mentions(text: &str, name: &str) -> bool {
    !mention_positions(text, name).is_empty()
}

/// The earliest tool name mentioned in `text`; on a tie the longer name.
pub fn first_mentioned<'a>(text: &str, names: impl IntoIterator<Item = &'a str>) -> Option<&'a str> {
    names
        .into_iter()
        .filter_map(|n| mention_positions(text, n).first().map(|&p| (p, std::cmp::Reverse(n.len()), n)))
        .min()
        .map(|(_, _, n)| n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identifier_boundaries() {
        assert!(mentions("please run `toggle_wifi` now", "toggle_wifi"));
        assert!(!mentions("run disconnect_wifi", "connect_wifi"));
        assert!(!mentions("run connect_wifi_network", "connect_wifi"));
        assert!(mentions("connect_wifi.", "connect_wifi"));
        assert!(!mentions("nothing here", "toggle_wifi"));
    }

    #[test]
    fn earliest_then_longest() {
        let names = ["toggle_wifi", "reboot_phone", "can_send_mms_probe"];
        assert_eq!(first_mentioned("reboot_phone then toggle_wifi", names), Some("reboot_phone"));
        assert_eq!(first_mentioned("nothing", names), None);
        assert_eq!(first_mentioned("try can_send_mms_probe", ["can_send_mms_probe", "can_send"]), Some("can_send_mms_probe"));
    }
}
