//! Plain-text bills, pathology request forms and management reports.
//!
//! Output depends only on the entities passed in, so repeated rendering of
//! the same data is byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write;

use chrono::NaiveDate;

use crate::auth::StaffAccount;
use crate::billing::{format_cents, Bill, BillStatus};
use crate::domain::{BodyView, Centre, Patient};
use crate::workflow::{Problem, Procedure, ProcedureKind};

const RULE: &str = "========================================";

pub fn centre_header(centre: Option<&Centre>) -> String {
    let mut out = String::new();
    out.push_str(RULE);
    out.push('\n');
    match centre {
        Some(c) => {
            out.push_str(&c.name);
            out.push('\n');
            for line in [&c.address, &c.contact] {
                if !line.is_empty() {
                    out.push_str(line);
                    out.push('\n');
                }
            }
        }
        None => out.push_str("(centre details not configured)\n"),
    }
    out.push_str(RULE);
    out.push('\n');
    out
}

fn demographics(out: &mut String, patient: &Patient) {
    let _ = writeln!(out, "Patient: {} (id {})", patient.name, patient.id.0);
    let _ = writeln!(out, "Date of birth: {}", patient.dob.format("%Y-%m-%d"));
    let _ = writeln!(out, "Sex: {}", patient.sex);
}

pub fn render_bill(
    centre: Option<&Centre>,
    patient: &Patient,
    procedure: &Procedure,
    bill: &Bill,
    currency: &str,
) -> String {
    let mut out = centre_header(centre);
    let _ = writeln!(out, "BILL {}", bill.id.0);
    let _ = writeln!(out, "Date: {}", bill.created_at.format("%Y-%m-%d"));
    let _ = writeln!(out, "Procedure: {} {}", procedure.id.0, procedure.kind);
    demographics(&mut out, patient);
    let _ = writeln!(out, "Address: {}", patient.address);
    let _ = writeln!(out, "Phone: {}", patient.phone);
    out.push('\n');
    for item in &bill.line_items {
        let _ = writeln!(
            out,
            "({}) {} {} {} \u{2014} {}",
            item.problem_id.0,
            item.kind,
            item.region,
            item.size_band.label(),
            format_cents(item.fee_cents)
        );
    }
    out.push('\n');
    let _ = writeln!(out, "Total ({currency}): {}", format_cents(bill.total_cents));
    out
}

fn view_label(view: BodyView) -> &'static str {
    match view {
        BodyView::Front => "FRONT",
        BodyView::Back => "BACK",
    }
}

/// `problems` in ascending id order.
pub fn render_pathology_form(
    centre: Option<&Centre>,
    patient: &Patient,
    clinician: &StaffAccount,
    procedure: &Procedure,
    problems: &[&Problem],
) -> String {
    let mut out = centre_header(centre);
    out.push_str("PATHOLOGY REQUEST FORM\n");
    demographics(&mut out, patient);
    let _ = writeln!(out, "Requesting clinician: {}", clinician.name);
    let _ = writeln!(out, "Procedure: {}", procedure.kind);
    out.push_str("Specimens:\n");
    for (i, p) in problems.iter().enumerate() {
        let _ = writeln!(
            out,
            "  {}. problem {} {} {} x={:.2} y={:.2} size={}mm",
            i + 1,
            p.id.0,
            view_label(p.location.view),
            p.location.region,
            p.location.x,
            p.location.y,
            p.size_mm
        );
    }
    let date = procedure
        .consent
        .as_ref()
        .map(|c| c.obtained_at)
        .unwrap_or(procedure.created_at);
    let _ = writeln!(out, "Date: {}", date.format("%Y-%m-%d"));
    let _ = writeln!(out, "Form: SCIS-F-{}", procedure.id.0);
    out
}

/// Aggregate counts for the management report. Carries no names or
/// clinical text.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ManagementStats {
    pub new_patients: usize,
    pub procedures_by_kind: BTreeMap<ProcedureKind, usize>,
    pub finalized_procedures: usize,
    pub bills_by_status: BTreeMap<BillStatus, (usize, i64)>,
    pub unallocated_reports: usize,
}

pub fn render_management_report(
    centre: Option<&Centre>,
    from: NaiveDate,
    to: NaiveDate,
    stats: &ManagementStats,
) -> String {
    let mut out = centre_header(centre);
    out.push_str("MANAGEMENT REPORT\n");
    let _ = writeln!(out, "Period: {} to {}", from.format("%Y-%m-%d"), to.format("%Y-%m-%d"));
    let _ = writeln!(out, "New patients: {}", stats.new_patients);
    out.push_str("Procedures by kind:\n");
    for (kind, n) in &stats.procedures_by_kind {
        let _ = writeln!(out, "  {kind}: {n}");
    }
    let _ = writeln!(out, "Finalized procedures: {}", stats.finalized_procedures);
    out.push_str("Bills by status:\n");
    for status in [BillStatus::Generated, BillStatus::Held, BillStatus::Issued] {
        let (count, cents) = stats.bills_by_status.get(&status).copied().unwrap_or((0, 0));
        let _ = writeln!(out, "  {status}: {count} bills, {}", format_cents(cents));
    }
    let _ = writeln!(out, "Unallocated pathology reports: {}", stats.unallocated_reports);
    out
}
