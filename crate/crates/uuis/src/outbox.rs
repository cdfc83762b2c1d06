//! Notification outbox standing in for outbound e-mail.

use serde::{Deserialize, Serialize};
use uuis_core::catalog::perm;
use uuis_core::{EntityId, EntityKind, EntityRef, Person, Timestamp, SYSTEM_ACTOR};

use crate::audit::action;
use crate::error::{Error, Result};
use crate::service::{Actor, Service};
use crate::storage::Record;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeliveryState {
    Queued,
    Delivered,
    Failed,
}

impl DeliveryState {
    pub fn as_str(self) -> &'static str {
        match self {
            DeliveryState::Queued => "queued",
            DeliveryState::Delivered => "delivered",
            DeliveryState::Failed => "failed",
        }
    }

    pub fn parse(s: &str) -> Option<DeliveryState> {
        match s {
            "queued" => Some(DeliveryState::Queued),
            "delivered" => Some(DeliveryState::Delivered),
            "failed" => Some(DeliveryState::Failed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutboxMessage {
    pub id: EntityId,
    pub recipient_id: EntityId,
    pub subject: String,
    pub body: String,
    pub created_at: Timestamp,
    pub delivery_state: DeliveryState,
    /// Record the message is about (borrowed item, rejected request).
    pub reference: Option<EntityRef>,
}

/// Delivers drained messages. The default transport just hands them back.
pub trait Mailer {
    fn deliver(&mut self, message: &OutboxMessage, recipient: Option<&Person>) -> std::result::Result<(), String>;
}

/// Collects messages in memory; used by `outbox-drain` to print them.
#[derive(Default)]
pub struct Collect(pub Vec<OutboxMessage>);

impl Mailer for Collect {
    fn deliver(&mut self, message: &OutboxMessage, _recipient: Option<&Person>) -> std::result::Result<(), String> {
        self.0.push(message.clone());
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DrainReport {
    pub delivered: usize,
    pub failed: usize,
}

impl Service {
    pub fn outbox_list(&self, actor: &Actor, state: Option<DeliveryState>) -> Result<Vec<OutboxMessage>> {
        actor.require(perm::SEE_AUDIT)?;
        self.read(|r| r.outbox(state))
    }

    /// Explicit notice from an administrator to one person.
    pub fn outbox_notice(&self, actor: &Actor, recipient: EntityId, subject: &str, body: &str) -> Result<EntityId> {
        actor.require(perm::EDIT_PERSON)?;
        if subject.trim().is_empty() {
            return Err(Error::MissingField("subject".into()));
        }
        self.write(|t| {
            let person: Person = t.get(recipient)?;
            actor.require_scope(person.org())?;
            let id = t.push_outbox(recipient, subject, body, None)?;
            t.audit(actor.id(), action::OUTBOX_NOTICE, &[person.entity_ref()], format!("message {id}"))?;
            Ok(id)
        })
    }

    /// Hands every queued message to `mailer` and records the outcome.
    pub fn outbox_drain(&self, mailer: &mut dyn Mailer) -> Result<DrainReport> {
        let queued = self.read(|r| r.outbox(Some(DeliveryState::Queued)))?;
        let mut report = DrainReport { delivered: 0, failed: 0 };
        if queued.is_empty() {
            return Ok(report);
        }
        self.write(|t| {
            let mut refs = Vec::new();
            for m in &queued {
                let person: Option<Person> = t.find(m.recipient_id)?;
                let state = match mailer.deliver(m, person.as_ref()) {
                    Ok(()) => {
                        report.delivered += 1;
                        DeliveryState::Delivered
                    }
                    Err(_) => {
                        report.failed += 1;
                        DeliveryState::Failed
                    }
                };
                t.set_outbox_state(m.id, state)?;
                refs.push(EntityRef::new(EntityKind::Person, m.recipient_id));
            }
            refs.sort();
            refs.dedup();
            let details = serde_json::json!({ "delivered": report.delivered, "failed": report.failed });
            t.audit(SYSTEM_ACTOR, action::OUTBOX_DRAIN, &refs, details.to_string())
        })?;
        Ok(report)
    }
}
