//! Fee schedules, bill computation, and the bill status gate.
//!
//! Every line item is
//! `round_half_up(base[kind] * region[region] * size[band] * factor)` in whole
//! cents, where `factor` is 1 for the first lesion (lowest problem id) and the
//! schedule's subsequent-lesion factor for every other lesion. Multipliers are
//! exact rationals, so the only rounding is the final one per line.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use num_rational::Ratio;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::domain::Region;
use crate::error::{Error, Result};
use crate::ids::{BillId, ProblemId, ProcedureId};
use crate::store::ActorRef;
use crate::workflow::{Problem, Procedure, ProcedureKind};

/// Exact non-negative rational multiplier, written as `"1.25"` or `"5/4"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Multiplier(Ratio<i64>);

impl Multiplier {
    pub fn new(numer: i64, denom: i64) -> Self {
        Self(Ratio::new(numer, denom))
    }

    pub fn one() -> Self {
        Self(Ratio::one())
    }

    pub fn ratio(self) -> Ratio<i64> {
        self.0
    }
}

impl FromStr for Multiplier {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        let bad = || format!("invalid multiplier {s:?}");
        if let Some((n, d)) = s.split_once('/') {
            let n: i64 = n.trim().parse().map_err(|_| bad())?;
            let d: i64 = d.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            return Ok(Self(Ratio::new(n, d)));
        }
        let (negative, magnitude) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let (int, frac) = magnitude.split_once('.').unwrap_or((magnitude, ""));
        let digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
        if (int.is_empty() && frac.is_empty()) || !digits(int) || !digits(frac) || frac.len() > 9 {
            return Err(bad());
        }
        let scale = 10i64.pow(frac.len() as u32);
        let int: i64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let frac: i64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let numer = int
            .checked_mul(scale)
            .and_then(|v| v.checked_add(frac))
            .ok_or_else(bad)?;
        Ok(Self(Ratio::new(if negative { -numer } else { numer }, scale)))
    }
}

impl fmt::Display for Multiplier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl Serialize for Multiplier {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Multiplier {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Int(i64),
        }
        match Raw::deserialize(d)? {
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::Int(i) => Ok(Self(Ratio::from_integer(i))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SizeBand {
    /// under 10 mm
    Small,
    /// 10 to 20 mm inclusive
    Medium,
    /// over 20 mm
    Large,
}

impl SizeBand {
    pub fn of(size_mm: u32) -> Self {
        match size_mm {
            0..=9 => SizeBand::Small,
            10..=20 => SizeBand::Medium,
            _ => SizeBand::Large,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SizeBand::Small => "SMALL",
            SizeBand::Medium => "MEDIUM",
            SizeBand::Large => "LARGE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeMultipliers {
    pub small: Multiplier,
    pub medium: Multiplier,
    pub large: Multiplier,
}

impl SizeMultipliers {
    pub fn get(&self, band: SizeBand) -> Multiplier {
        match band {
            SizeBand::Small => self.small,
            SizeBand::Medium => self.medium,
            SizeBand::Large => self.large,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeeSchedule {
    pub base_fee_cents: BTreeMap<ProcedureKind, i64>,
    pub region_multiplier: BTreeMap<Region, Multiplier>,
    pub size_multiplier: SizeMultipliers,
    pub subsequent_lesion_factor: Multiplier,
    #[serde(default = "default_currency")]
    pub currency: String,
}

fn default_currency() -> String {
    "AUD".to_owned()
}

impl Default for FeeSchedule {
    fn default() -> Self {
        let base_fee_cents = [
            (ProcedureKind::SHAVE_BIOPSY, 12_000),
            (ProcedureKind::PUNCH_BIOPSY, 11_000),
            (ProcedureKind::EXCISION, 25_000),
            (ProcedureKind::CRYOTHERAPY, 6_000),
        ]
        .into_iter()
        .map(|(k, v)| (ProcedureKind::new(k), v))
        .collect();
        let region_multiplier = Region::ALL
            .into_iter()
            .map(|r| {
                let m = match r {
                    Region::Face | Region::Head | Region::Neck => Multiplier::new(3, 2),
                    Region::HandL | Region::HandR | Region::FootL | Region::FootR => {
                        Multiplier::new(5, 4)
                    }
                    _ => Multiplier::one(),
                };
                (r, m)
            })
            .collect();
        Self {
            base_fee_cents,
            region_multiplier,
            size_multiplier: SizeMultipliers {
                small: Multiplier::one(),
                medium: Multiplier::new(6, 5),
                large: Multiplier::new(3, 2),
            },
            subsequent_lesion_factor: Multiplier::new(1, 2),
            currency: default_currency(),
        }
    }
}

impl FeeSchedule {
    /// Checks that the schedule is complete and its values are in range.
    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(Error::ConfigInvalid(m));
        if self.base_fee_cents.is_empty() {
            return invalid("fee schedule lists no procedure kinds".into());
        }
        for (kind, fee) in &self.base_fee_cents {
            if *fee <= 0 {
                return invalid(format!("base fee for {kind} must be positive"));
            }
        }
        for r in Region::ALL {
            match self.region_multiplier.get(&r) {
                None => return invalid(format!("no region multiplier for {r}")),
                Some(m) if m.0 < Ratio::zero() => {
                    return invalid(format!("negative multiplier for {r}"))
                }
                Some(_) => {}
            }
        }
        for band in [SizeBand::Small, SizeBand::Medium, SizeBand::Large] {
            if self.size_multiplier.get(band).0 < Ratio::zero() {
                return invalid(format!("negative size multiplier for {}", band.label()));
            }
        }
        let f = self.subsequent_lesion_factor.0;
        if f <= Ratio::zero() || f > Ratio::one() {
            return invalid("subsequent lesion factor must be in (0, 1]".into());
        }
        if self.currency.trim().is_empty() {
            return invalid("currency is empty".into());
        }
        Ok(())
    }

    pub fn catalogue(&self) -> impl Iterator<Item = &ProcedureKind> {
        self.base_fee_cents.keys()
    }

    pub fn offers(&self, kind: &ProcedureKind) -> bool {
        self.base_fee_cents.contains_key(kind)
    }
}

/// Rounds a non-negative rational to the nearest integer, halves upward.
pub fn round_half_up(value: Ratio<i128>) -> i128 {
    let (n, d) = (*value.numer(), *value.denom());
    (2 * n + d).div_euclid(2 * d)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineItem {
    pub problem_id: ProblemId,
    pub kind: ProcedureKind,
    pub region: Region,
    pub size_band: SizeBand,
    pub fee_cents: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Charges {
    pub line_items: Vec<LineItem>,
    pub total_cents: i64,
}

fn widen(m: Multiplier) -> Ratio<i128> {
    Ratio::new(i128::from(*m.0.numer()), i128::from(*m.0.denom()))
}

/// Prices a procedure. `problems` must contain every problem the procedure
/// references; items come out in ascending problem id.
pub fn compute_bill(procedure: &Procedure, problems: &[&Problem], schedule: &FeeSchedule) -> Result<Charges> {
    let base = *schedule
        .base_fee_cents
        .get(&procedure.kind)
        .ok_or_else(|| Error::UnknownKind(procedure.kind.to_string()))?;
    let mut ids = procedure.problem_ids.clone();
    ids.sort_unstable();
    let mut line_items = Vec::with_capacity(ids.len());
    for (i, id) in ids.iter().enumerate() {
        let problem = problems
            .iter()
            .find(|p| p.id == *id)
            .ok_or_else(|| Error::not_found(id))?;
        let region = problem.location.region;
        let region_m = *schedule
            .region_multiplier
            .get(&region)
            .ok_or_else(|| Error::UnknownRegion(region.to_string()))?;
        let band = SizeBand::of(problem.size_mm);
        let factor = if i == 0 {
            Multiplier::one()
        } else {
            schedule.subsequent_lesion_factor
        };
        let exact = Ratio::from_integer(i128::from(base))
            * widen(region_m)
            * widen(schedule.size_multiplier.get(band))
            * widen(factor);
        let fee = i64::try_from(round_half_up(exact))
            .map_err(|_| Error::ConfigInvalid("fee overflows".into()))?;
        line_items.push(LineItem {
            problem_id: *id,
            kind: procedure.kind.clone(),
            region,
            size_band: band,
            fee_cents: fee,
        });
    }
    let total_cents = line_items.iter().map(|l| l.fee_cents).sum();
    Ok(Charges {
        line_items,
        total_cents,
    })
}

/// `$D.CC`
pub fn format_cents(cents: i64) -> String {
    let sign = if cents < 0 { "-" } else { "" };
    let abs = cents.unsigned_abs();
    format!("{sign}${}.{:02}", abs / 100, abs % 100)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BillStatus {
    Generated,
    Held,
    Issued,
}

impl fmt::Display for BillStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BillStatus::Generated => "GENERATED",
            BillStatus::Held => "HELD",
            BillStatus::Issued => "ISSUED",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusChange {
    pub status: BillStatus,
    pub at: DateTime<Utc>,
    pub actor: ActorRef,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bill {
    pub id: BillId,
    pub procedure_id: ProcedureId,
    pub line_items: Vec<LineItem>,
    pub total_cents: i64,
    pub status: BillStatus,
    pub created_at: DateTime<Utc>,
    pub status_history: Vec<StatusChange>,
}

impl Bill {
    pub fn new(
        id: BillId,
        procedure_id: ProcedureId,
        charges: Charges,
        status: BillStatus,
        at: DateTime<Utc>,
        actor: ActorRef,
    ) -> Self {
        Self {
            id,
            procedure_id,
            line_items: charges.line_items,
            total_cents: charges.total_cents,
            status,
            created_at: at,
            status_history: vec![StatusChange { status, at, actor }],
        }
    }

    /// Applies a status change. Allowed moves: GENERATED <-> HELD and
    /// GENERATED -> ISSUED.
    pub fn transition(&mut self, to: BillStatus, at: DateTime<Utc>, actor: ActorRef) -> Result<()> {
        use BillStatus::*;
        let allowed = matches!(
            (self.status, to),
            (Generated, Held) | (Held, Generated) | (Generated, Issued)
        );
        if !allowed {
            return Err(Error::InvalidBillTransition {
                from: self.status.to_string(),
                to: to.to_string(),
            });
        }
        self.status = to;
        self.status_history.push(StatusChange { status: to, at, actor });
        Ok(())
    }

    pub fn totals_consistent(&self) -> bool {
        self.total_cents == self.line_items.iter().map(|l| l.fee_cents).sum::<i64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{BodyLocation, BodyView, LesionStatus};
    use crate::ids::{RecordId, StaffId, VisitId};
    use proptest::prelude::*;

    fn problem(id: u64, region: Region, size_mm: u32) -> Problem {
        Problem {
            id: ProblemId(id),
            visit_id: VisitId(1),
            location: BodyLocation::new(BodyView::Front, region, 0.5, 0.5).unwrap(),
            description: String::new(),
            size_mm,
            status: LesionStatus::Unassessed,
        }
    }

    fn procedure(kind: &str, problems: &[Problem]) -> Procedure {
        Procedure::draft(
            ProcedureId(99),
            RecordId(1),
            problems.iter().map(|p| p.id).collect(),
            ProcedureKind::new(kind),
            String::new(),
            false,
            StaffId(1),
            DateTime::<Utc>::UNIX_EPOCH,
        )
        .unwrap()
    }

    fn price(kind: &str, problems: &[Problem], schedule: &FeeSchedule) -> Result<Charges> {
        let refs: Vec<&Problem> = problems.iter().collect();
        compute_bill(&procedure(kind, problems), &refs, schedule)
    }

    #[test]
    fn worked_examples() {
        let s = FeeSchedule::default();
        let cryo = [
            problem(1, Region::Chest, 4),
            problem(2, Region::Chest, 5),
            problem(3, Region::Chest, 6),
        ];
        let c = price("CRYOTHERAPY", &cryo, &s).unwrap();
        let fees: Vec<i64> = c.line_items.iter().map(|l| l.fee_cents).collect();
        assert_eq!(fees, vec![6000, 3000, 3000]);
        assert_eq!(c.total_cents, 12000);

        let c = price("EXCISION", &[problem(1, Region::Face, 12)], &s).unwrap();
        assert_eq!(c.total_cents, 45000);
        assert_eq!(c.line_items[0].size_band, SizeBand::Medium);

        let c = price("SHAVE_BIOPSY", &[problem(1, Region::HandL, 8)], &s).unwrap();
        assert_eq!(c.total_cents, 15000);
    }

    #[test]
    fn first_lesion_is_lowest_id() {
        let s = FeeSchedule::default();
        let ps = [problem(8, Region::Chest, 4), problem(5, Region::Face, 4)];
        let c = price("CRYOTHERAPY", &ps, &s).unwrap();
        assert_eq!(c.line_items[0].problem_id, ProblemId(5));
        assert_eq!(c.line_items[0].fee_cents, 9000);
        assert_eq!(c.line_items[1].fee_cents, 3000);
    }

    #[test]
    fn rounding_is_half_up() {
        // 11000 * 5/4 * 3/2 * 1/2 = 10312.5
        let s = FeeSchedule::default();
        let ps = [problem(1, Region::Chest, 1), problem(2, Region::FootR, 30)];
        let c = price("PUNCH_BIOPSY", &ps, &s).unwrap();
        assert_eq!(c.line_items[1].fee_cents, 10313);
        assert_eq!(round_half_up(Ratio::new(5, 2)), 3);
        assert_eq!(round_half_up(Ratio::new(7, 3)), 2);
        assert_eq!(round_half_up(Ratio::new(8, 3)), 3);
    }

    #[test]
    fn size_bands() {
        assert_eq!(SizeBand::of(1), SizeBand::Small);
        assert_eq!(SizeBand::of(9), SizeBand::Small);
        assert_eq!(SizeBand::of(10), SizeBand::Medium);
        assert_eq!(SizeBand::of(20), SizeBand::Medium);
        assert_eq!(SizeBand::of(21), SizeBand::Large);
    }

    #[test]
    fn incomplete_schedule() {
        let mut s = FeeSchedule::default();
        s.region_multiplier.remove(&Region::Chest);
        assert_eq!(
            price("CRYOTHERAPY", &[problem(1, Region::Chest, 4)], &s),
            Err(Error::UnknownRegion("CHEST".into()))
        );
        assert!(matches!(s.validate(), Err(Error::ConfigInvalid(_))));
        assert_eq!(
            price("LASER", &[problem(1, Region::Face, 4)], &FeeSchedule::default()),
            Err(Error::UnknownKind("LASER".into()))
        );
    }

    #[test]
    fn schedule_validation() {
        assert!(FeeSchedule::default().validate().is_ok());
        let s = FeeSchedule {
            subsequent_lesion_factor: Multiplier::new(0, 1),
            ..FeeSchedule::default()
        };
        assert!(s.validate().is_err());
        let mut s = FeeSchedule::default();
        s.base_fee_cents.insert(ProcedureKind::new("FREE"), 0);
        assert!(s.validate().is_err());
    }

    #[test]
    fn multiplier_parsing() {
        assert_eq!("1.5".parse::<Multiplier>().unwrap(), Multiplier::new(3, 2));
        assert_eq!("5/4".parse::<Multiplier>().unwrap(), Multiplier::new(5, 4));
        assert_eq!("1".parse::<Multiplier>().unwrap(), Multiplier::one());
        assert_eq!(".5".parse::<Multiplier>().unwrap(), Multiplier::new(1, 2));
        assert_eq!("1.20".parse::<Multiplier>().unwrap(), Multiplier::new(6, 5));
        assert!("1/0".parse::<Multiplier>().is_err());
        assert!("abc".parse::<Multiplier>().is_err());
        assert!("1.2.3".parse::<Multiplier>().is_err());
        let json = serde_json::to_string(&FeeSchedule::default()).unwrap();
        let back: FeeSchedule = serde_json::from_str(&json).unwrap();
        assert_eq!(back, FeeSchedule::default());
    }

    #[test]
    fn money_formatting() {
        assert_eq!(format_cents(45000), "$450.00");
        assert_eq!(format_cents(5), "$0.05");
        assert_eq!(format_cents(10313), "$103.13");
    }

    #[test]
    fn bill_transitions() {
        let t = DateTime::<Utc>::UNIX_EPOCH;
        let charges = Charges {
            line_items: vec![],
            total_cents: 0,
        };
        let mut b = Bill::new(BillId(1), ProcedureId(2), charges, BillStatus::Generated, t, ActorRef::System);
        b.transition(BillStatus::Held, t, ActorRef::System).unwrap();
        assert!(b.transition(BillStatus::Held, t, ActorRef::System).is_err());
        assert!(b.transition(BillStatus::Issued, t, ActorRef::System).is_err());
        b.transition(BillStatus::Generated, t, ActorRef::System).unwrap();
        b.transition(BillStatus::Issued, t, ActorRef::System).unwrap();
        for to in [BillStatus::Generated, BillStatus::Held, BillStatus::Issued] {
            assert!(matches!(
                b.transition(to, t, ActorRef::System),
                Err(Error::InvalidBillTransition { .. })
            ));
        }
        assert_eq!(b.status_history.len(), 4);
    }

    fn region() -> impl Strategy<Value = Region> {
        (0usize..15).prop_map(|i| Region::ALL[i])
    }

    fn kind() -> impl Strategy<Value = &'static str> {
        prop_oneof![
            Just("SHAVE_BIOPSY"),
            Just("PUNCH_BIOPSY"),
            Just("EXCISION"),
            Just("CRYOTHERAPY")
        ]
    }

    proptest! {
        #[test]
        fn scaling_base_fees_scales_exact_items(
            k in 1i64..50,
            kind in kind(),
            lesions in prop::collection::vec((region(), 1u32..40), 1..6),
        ) {
            let problems: Vec<Problem> = lesions
                .iter()
                .enumerate()
                .map(|(i, (r, s))| problem(i as u64 + 1, *r, *s))
                .collect();
            let s = FeeSchedule::default();
            let mut scaled = s.clone();
            for fee in scaled.base_fee_cents.values_mut() {
                *fee *= k;
            }
            let a = price(kind, &problems, &s).unwrap();
            let b = price(kind, &problems, &scaled).unwrap();
            prop_assert_eq!(a.line_items.len(), problems.len());
            let base = s.base_fee_cents[&ProcedureKind::new(kind)];
            let mut all_exact = true;
            for (i, (x, y)) in a.line_items.iter().zip(&b.line_items).enumerate() {
                let factor = if i == 0 { Multiplier::one() } else { s.subsequent_lesion_factor };
                let exact = Ratio::from_integer(i128::from(base))
                    * widen(s.region_multiplier[&x.region])
                    * widen(s.size_multiplier.get(x.size_band))
                    * widen(factor);
                if exact.is_integer() {
                    prop_assert_eq!(y.fee_cents, k * x.fee_cents);
                } else {
                    all_exact = false;
                }
            }
            if all_exact {
                prop_assert_eq!(b.total_cents, k * a.total_cents);
            }
        }
    }
}
