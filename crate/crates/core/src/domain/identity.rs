//! Login identities, course codes and academic session labels.

use std::fmt;

use serde::{Deserialize, Serialize};

/// The three portals of the platform. Every account has exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Student,
    Lecturer,
    Registrar,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Student, Role::Lecturer, Role::Registrar];

    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Student => "student",
            Role::Lecturer => "lecturer",
            Role::Registrar => "registrar",
        }
    }

    fn identity_class(&self) -> IdentityClass {
        match self {
            Role::Student => IdentityClass::Matric,
            Role::Lecturer | Role::Registrar => IdentityClass::Staff,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum IdentityClass {
    Matric,
    Staff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum IdentityError {
    #[error("username does not match any identity pattern")]
    BadPattern,
    #[error("username belongs to a different identity class than the role")]
    WrongClass,
}

impl IdentityError {
    pub fn reason(&self) -> &'static str {
        match self {
            IdentityError::BadPattern => "bad_pattern",
            IdentityError::WrongClass => "wrong_class",
        }
    }
}

fn all_digits(s: &str, len: usize) -> bool {
    s.len() == len && s.bytes().all(|b| b.is_ascii_digit())
}

fn all_upper(s: &str, min: usize, max: usize) -> bool {
    (min..=max).contains(&s.len()) && s.bytes().all(|b| b.is_ascii_uppercase())
}

/// Institution code, two-digit entry year and four-digit serial, e.g. `BU/15/0421`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MatricNumber(String);

impl MatricNumber {
    pub fn parse(s: &str) -> Result<Self, IdentityError> {
        let mut parts = s.split('/');
        let ok = matches!(
            (parts.next(), parts.next(), parts.next(), parts.next()),
            (Some(inst), Some(year), Some(serial), None)
                if all_upper(inst, 2, 4) && all_digits(year, 2) && all_digits(serial, 4)
        );
        if ok {
            Ok(MatricNumber(s.to_owned()))
        } else {
            Err(IdentityError::BadPattern)
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for MatricNumber {
    type Error = IdentityError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        MatricNumber::parse(&value)
    }
}

impl From<MatricNumber> for String {
    fn from(m: MatricNumber) -> String {
        m.0
    }
}

/// Staff identity `STF/NNNN`, used by lecturers and registry staff.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct StaffId(String);

impl StaffId {
    pub fn parse(s: &str) -> Result<Self, IdentityError> {
        match s.strip_prefix("STF/") {
            Some(serial) if all_digits(serial, 4) => Ok(StaffId(s.to_owned())),
            _ => Err(IdentityError::BadPattern),
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for StaffId {
    type Error = IdentityError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        StaffId::parse(&value)
    }
}

impl From<StaffId> for String {
    fn from(s: StaffId) -> String {
        s.0
    }
}

fn classify(username: &str) -> Option<IdentityClass> {
    if MatricNumber::parse(username).is_ok() {
        Some(IdentityClass::Matric)
    } else if StaffId::parse(username).is_ok() {
        Some(IdentityClass::Staff)
    } else {
        None
    }
}

/// Checks that `username` is well formed for the identity class of `expected_role`.
pub fn validate_identity(username: &str, expected_role: Role) -> Result<(), IdentityError> {
    match classify(username) {
        None => Err(IdentityError::BadPattern),
        Some(class) if class == expected_role.identity_class() => Ok(()),
        Some(_) => Err(IdentityError::WrongClass),
    }
}

/// Three or four uppercase letters followed by three digits, e.g. `COS101`.
pub fn is_course_code(s: &str) -> bool {
    let split = s.len().saturating_sub(3);
    s.is_char_boundary(split) && all_upper(&s[..split], 3, 4) && all_digits(&s[split..], 3)
}

/// Academic session label `YYYY/YYYY` spanning consecutive years.
pub fn is_session_label(s: &str) -> bool {
    match s.split_once('/') {
        Some((a, b)) if all_digits(a, 4) && all_digits(b, 4) => {
            let (a, b): (u32, u32) = (a.parse().unwrap_or(0), b.parse().unwrap_or(0));
            b == a + 1
        }
        _ => false,
    }
}
