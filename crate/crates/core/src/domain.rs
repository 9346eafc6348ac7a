//! Shared domain types and the validation and normalization rules for them.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ValidationIssue};
use crate::ids::{CentreId, PatientId};

/// Capitalizes each name token.
///
/// Whitespace is trimmed and internal runs collapse to a single space. Tokens
/// are split on space, hyphen and apostrophe; each is lowercased and then its
/// first letter uppercased. Separators are kept as they are.
pub fn normalize_person_name(raw: &str) -> Result<String> {
    let collapsed = raw.split_whitespace().collect::<Vec<_>>().join(" ");
    if collapsed.is_empty() {
        return Err(Error::EmptyName);
    }
    let mut out = String::with_capacity(collapsed.len());
    let mut token = String::new();
    for c in collapsed.chars() {
        if is_name_separator(c) {
            push_capitalized(&mut out, &token);
            token.clear();
            out.push(c);
        } else {
            token.push(c);
        }
    }
    push_capitalized(&mut out, &token);
    Ok(out)
}

fn is_name_separator(c: char) -> bool {
    matches!(c, ' ' | '-' | '\'')
}

fn push_capitalized(out: &mut String, token: &str) {
    let lower = token.to_lowercase();
    let mut chars = lower.chars();
    let Some(first) = chars.next() else {
        return;
    };
    out.push(title_char(first));
    out.extend(chars);
}

// Only uppercase when the mapping is one char wide and lowercases back to the
// same char; otherwise a second pass would produce a different string.
fn title_char(c: char) -> char {
    let mut upper = c.to_uppercase();
    match (upper.next(), upper.next()) {
        (Some(u), None) => {
            let mut back = u.to_lowercase();
            match (back.next(), back.next()) {
                (Some(l), None) if l == c => u,
                _ => c,
            }
        }
        _ => c,
    }
}

/// A person's given and family names, always stored normalized.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PersonName {
    given: String,
    family: String,
}

impl PersonName {
    pub fn new(given: &str, family: &str) -> Result<Self> {
        Ok(Self {
            given: normalize_person_name(given)?,
            family: normalize_person_name(family)?,
        })
    }

    pub fn given(&self) -> &str {
        &self.given
    }

    pub fn family(&self) -> &str {
        &self.family
    }
}

impl fmt::Display for PersonName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.given, self.family)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sex {
    F,
    M,
    X,
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Sex::F => "F",
            Sex::M => "M",
            Sex::X => "X",
        };
        f.write_str(s)
    }
}

/// Unvalidated patient details as they arrive from a form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientInput {
    pub given: String,
    pub family: String,
    pub dob: String,
    pub sex: Sex,
    #[serde(default)]
    pub address: String,
    #[serde(default)]
    pub phone: String,
    #[serde(default)]
    pub email: Option<String>,
    #[serde(default)]
    pub external_ref: Option<String>,
}

/// Patient details that passed [`validate_patient`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientDetails {
    pub name: PersonName,
    pub dob: NaiveDate,
    pub sex: Sex,
    pub address: String,
    pub phone: String,
    pub email: Option<String>,
    pub external_ref: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Patient {
    pub id: PatientId,
    pub name: PersonName,
    pub dob: NaiveDate,
    pub sex: Sex,
    pub address: String,
    pub phone: String,
    pub email: Option<String>,
    pub external_ref: Option<String>,
    pub created_at: DateTime<Utc>,
}

impl Patient {
    pub fn from_details(id: PatientId, details: PatientDetails, created_at: DateTime<Utc>) -> Self {
        Self {
            id,
            name: details.name,
            dob: details.dob,
            sex: details.sex,
            address: details.address,
            phone: details.phone,
            email: details.email,
            external_ref: details.external_ref,
            created_at,
        }
    }

    pub fn to_input(&self) -> PatientInput {
        PatientInput {
            given: self.name.given().to_owned(),
            family: self.name.family().to_owned(),
            dob: self.dob.format("%Y-%m-%d").to_string(),
            sex: self.sex,
            address: self.address.clone(),
            phone: self.phone.clone(),
            email: self.email.clone(),
            external_ref: self.external_ref.clone(),
        }
    }
}

/// Parses a strict `YYYY-MM-DD` calendar date.
pub fn parse_iso_date(s: &str) -> Option<NaiveDate> {
    let b = s.as_bytes();
    if b.len() != 10 || b[4] != b'-' || b[7] != b'-' {
        return None;
    }
    let digits_ok = b
        .iter()
        .enumerate()
        .all(|(i, c)| i == 4 || i == 7 || c.is_ascii_digit());
    if !digits_ok {
        return None;
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()
}

/// Structural email rule: one `@`, a non-empty local part, and a dotted domain
/// whose labels are all non-empty.
pub fn is_valid_email(email: &str) -> bool {
    let mut parts = email.split('@');
    let (Some(local), Some(domain), None) = (parts.next(), parts.next(), parts.next()) else {
        return false;
    };
    !local.is_empty() && domain.contains('.') && domain.split('.').all(|label| !label.is_empty())
}

/// Validates and normalizes patient details, reporting every failed field.
pub fn validate_patient(
    input: &PatientInput,
    today: NaiveDate,
) -> std::result::Result<PatientDetails, Vec<ValidationIssue>> {
    let mut issues = Vec::new();

    let given = normalize_person_name(&input.given);
    let family = normalize_person_name(&input.family);
    for part in [&given, &family] {
        if part.is_err() {
            issues.push(ValidationIssue::EmptyName);
        }
    }

    let dob = parse_iso_date(input.dob.trim());
    match dob {
        None => issues.push(ValidationIssue::BadDateFormat),
        Some(d) if d > today => issues.push(ValidationIssue::FutureDob),
        Some(_) => {}
    }

    let email = input
        .email
        .as_deref()
        .map(str::trim)
        .filter(|e| !e.is_empty())
        .map(str::to_owned);
    if let Some(e) = &email {
        if !is_valid_email(e) {
            issues.push(ValidationIssue::BadEmail);
        }
    }

    if !issues.is_empty() {
        return Err(issues);
    }
    Ok(PatientDetails {
        name: PersonName {
            given: given.expect("checked above"),
            family: family.expect("checked above"),
        },
        dob: dob.expect("checked above"),
        sex: input.sex,
        address: input.address.trim().to_owned(),
        phone: input.phone.trim().to_owned(),
        email,
        external_ref: input
            .external_ref
            .as_deref()
            .map(str::trim)
            .filter(|r| !r.is_empty())
            .map(str::to_owned),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DuplicateVerdict {
    None,
    Warning,
    Duplicate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicateCheck {
    pub verdict: DuplicateVerdict,
    /// Ids meeting the strongest triggered rule, ascending.
    pub matches: Vec<PatientId>,
}

/// Same name and date of birth is a duplicate; same family name and date of
/// birth is a warning.
pub fn detect_duplicate_patient<'a>(
    candidate: &PatientDetails,
    existing: impl IntoIterator<Item = &'a Patient>,
) -> DuplicateCheck {
    let mut hard = Vec::new();
    let mut soft = Vec::new();
    for p in existing {
        if p.dob != candidate.dob || p.name.family != candidate.name.family {
            continue;
        }
        if p.name.given == candidate.name.given {
            hard.push(p.id);
        } else {
            soft.push(p.id);
        }
    }
    let (verdict, mut matches) = if !hard.is_empty() {
        (DuplicateVerdict::Duplicate, hard)
    } else if !soft.is_empty() {
        (DuplicateVerdict::Warning, soft)
    } else {
        (DuplicateVerdict::None, Vec::new())
    };
    matches.sort_unstable();
    matches.dedup();
    DuplicateCheck { verdict, matches }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BodyView {
    Front,
    Back,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Region {
    Head,
    Face,
    Neck,
    Chest,
    Abdomen,
    BackUpper,
    BackLower,
    ArmL,
    ArmR,
    HandL,
    HandR,
    LegL,
    LegR,
    FootL,
    FootR,
}

impl Region {
    pub const ALL: [Region; 15] = [
        Region::Head,
        Region::Face,
        Region::Neck,
        Region::Chest,
        Region::Abdomen,
        Region::BackUpper,
        Region::BackLower,
        Region::ArmL,
        Region::ArmR,
        Region::HandL,
        Region::HandR,
        Region::LegL,
        Region::LegR,
        Region::FootL,
        Region::FootR,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Region::Head => "HEAD",
            Region::Face => "FACE",
            Region::Neck => "NECK",
            Region::Chest => "CHEST",
            Region::Abdomen => "ABDOMEN",
            Region::BackUpper => "BACK_UPPER",
            Region::BackLower => "BACK_LOWER",
            Region::ArmL => "ARM_L",
            Region::ArmR => "ARM_R",
            Region::HandL => "HAND_L",
            Region::HandR => "HAND_R",
            Region::LegL => "LEG_L",
            Region::LegR => "LEG_R",
            Region::FootL => "FOOT_L",
            Region::FootR => "FOOT_R",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// A point on the normalized front or back body chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyLocation {
    pub view: BodyView,
    pub region: Region,
    pub x: f64,
    pub y: f64,
}

impl BodyLocation {
    pub fn new(view: BodyView, region: Region, x: f64, y: f64) -> Result<Self> {
        let unit = 0.0..=1.0;
        if !unit.contains(&x) || !unit.contains(&y) {
            return Err(Error::BadLocation);
        }
        Ok(Self { view, region, x, y })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LesionStatus {
    #[default]
    Unassessed,
    Benign,
    Suspicious,
    ConfirmedMalignant,
    Treated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Colour {
    Grey,
    Green,
    Orange,
    Red,
    Blue,
}

impl LesionStatus {
    pub const ALL: [LesionStatus; 5] = [
        LesionStatus::Unassessed,
        LesionStatus::Benign,
        LesionStatus::Suspicious,
        LesionStatus::ConfirmedMalignant,
        LesionStatus::Treated,
    ];

    pub fn colour(self) -> Colour {
        match self {
            LesionStatus::Unassessed => Colour::Grey,
            LesionStatus::Benign => Colour::Green,
            LesionStatus::Suspicious => Colour::Orange,
            LesionStatus::ConfirmedMalignant => Colour::Red,
            LesionStatus::Treated => Colour::Blue,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CentreDetails {
    pub name: String,
    #[serde(default)]
    pub address: String,
    #[serde(default)]
    pub contact: String,
    #[serde(default)]
    pub connection_details: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Centre {
    pub id: CentreId,
    pub name: String,
    pub address: String,
    pub contact: String,
    pub connection_details: BTreeMap<String, String>,
    pub active: bool,
}
