use super::Clinic;
use crate::auth::Permission;
use crate::billing::{Bill, BillStatus};
use crate::error::{Error, Result};
use crate::ids::BillId;
use crate::printing;
use crate::store::{AuditEvent, EntityRef};
use crate::workflow::PathologyStatus;

fn bill_ref(id: BillId) -> Option<EntityRef> {
    Some(EntityRef::new("bill", id.0))
}

impl Clinic {
    pub fn get_bill(&self, token: &str, bill_id: BillId) -> Result<Bill> {
        self.authorize(token, Permission::PrintBill)?;
        self.snapshot()
            .bills
            .get(&bill_id)
            .cloned()
            .ok_or_else(|| Error::not_found(bill_id))
    }

    pub fn hold_bill(&self, token: &str, bill_id: BillId) -> Result<Bill> {
        let actor = self.authorize(token, Permission::HoldBill)?;
        self.transact(|tx| {
            let now = tx.now();
            let bill = tx.bills.get_mut(&bill_id).ok_or_else(|| Error::not_found(bill_id))?;
            bill.transition(BillStatus::Held, now, actor.as_ref())?;
            let updated = bill.clone();
            tx.audit(AuditEvent::ok(actor.as_ref(), "bill.hold", bill_ref(bill_id)));
            Ok(updated)
        })
    }

    /// Releases a held bill. While the procedure's pathology result is still
    /// pending this needs `override_pending`, and the audit entry says so.
    pub fn unhold_bill(&self, token: &str, bill_id: BillId, override_pending: bool) -> Result<Bill> {
        let actor = self.authorize(token, Permission::HoldBill)?;
        self.transact(|tx| {
            let now = tx.now();
            let bill = tx.bills.get(&bill_id).ok_or_else(|| Error::not_found(bill_id))?;
            let pending = tx
                .procedures
                .get(&bill.procedure_id)
                .is_some_and(|p| p.pathology_status == PathologyStatus::Pending);
            if bill.status == BillStatus::Held && pending && !override_pending {
                return Err(Error::PathologyPending);
            }
            let bill = tx.bills.get_mut(&bill_id).expect("checked above");
            bill.transition(BillStatus::Generated, now, actor.as_ref())?;
            let updated = bill.clone();
            let event = if pending {
                AuditEvent::ok(actor.as_ref(), "bill.unhold_override", bill_ref(bill_id))
                    .with_detail("override: pathology pending")
            } else {
                AuditEvent::ok(actor.as_ref(), "bill.unhold", bill_ref(bill_id))
            };
            tx.audit(event);
            Ok(updated)
        })
    }

    /// Renders the printable bill and marks it ISSUED. Issued bills may be
    /// printed again; the text is the same each time.
    pub fn render_bill(&self, token: &str, bill_id: BillId) -> Result<String> {
        let actor = self.authorize(token, Permission::PrintBill)?;
        self.transact(|tx| {
            let now = tx.now();
            let bill = tx.bills.get(&bill_id).ok_or_else(|| Error::not_found(bill_id))?;
            if bill.status == BillStatus::Held {
                return Err(Error::BillHeld);
            }
            let procedure = tx
                .procedures
                .get(&bill.procedure_id)
                .ok_or_else(|| Error::not_found(bill.procedure_id))?;
            let patient = tx
                .records
                .get(&procedure.record_id)
                .and_then(|r| tx.patients.get(&r.patient_id))
                .ok_or_else(|| Error::not_found(procedure.record_id))?;
            let text = printing::render_bill(
                tx.active_centre(),
                patient,
                procedure,
                bill,
                &self.config.fee_schedule.currency,
            );
            let action = if bill.status == BillStatus::Generated {
                tx.bills
                    .get_mut(&bill_id)
                    .expect("checked above")
                    .transition(BillStatus::Issued, now, actor.as_ref())?;
                "bill.issue"
            } else {
                "bill.reprint"
            };
            tx.audit(AuditEvent::ok(actor.as_ref(), action, bill_ref(bill_id)));
            Ok(text)
        })
    }
}
