use std::fmt;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::time::Timestamp;

/// Opaque record identifier, `<kind prefix>-<zero padded counter>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Id(String);

impl Id {
    pub(crate) fn allocate(kind: Kind, n: u64) -> Id {
        Id(format!("{}-{:06}", kind.prefix(), n))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<String> for Id {
    fn from(s: String) -> Self {
        Id(s)
    }
}

impl From<&str> for Id {
    fn from(s: &str) -> Self {
        Id(s.to_owned())
    }
}

impl fmt::Display for Id {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

macro_rules! kinds {
    ($($variant:ident => $name:literal, $prefix:literal, [$($field:literal),* $(,)?];)*) => {
        /// Every entity kind the store knows about, in dump order.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum Kind {
            $($variant,)*
        }

        impl Kind {
            pub const ALL: &'static [Kind] = &[$(Kind::$variant,)*];

            pub fn as_str(&self) -> &'static str {
                match self {
                    $(Kind::$variant => $name,)*
                }
            }

            pub fn prefix(&self) -> &'static str {
                match self {
                    $(Kind::$variant => $prefix,)*
                }
            }

            /// Top-level body fields that queries may filter or sort on.
            pub fn fields(&self) -> &'static [&'static str] {
                match self {
                    $(Kind::$variant => &[$($field),*],)*
                }
            }
        }
    };
}

kinds! {
    User => "user", "usr", ["username", "password_digest", "full_name", "email", "phone", "role", "department_id", "is_library", "deleted"];
    Faculty => "faculty", "fac", ["name"];
    Department => "department", "dep", ["name", "faculty_id"];
    Course => "course", "crs", ["code", "title", "department_id", "lecturer_id", "session", "syllabus", "deleted"];
    Enrollment => "enrollment", "enr", ["student_id", "course_id", "course_code", "session", "registered_at"];
    Assessment => "assessment", "asm", ["course_id", "course_code", "kind", "title", "opens_at", "closes_at", "duration_limit", "questions", "points_total", "ca_weight"];
    Attempt => "attempt", "att", ["assessment_id", "course_id", "student_id", "started_at", "deadline", "submitted_at", "answers", "status", "auto_score"];
    Assignment => "assignment", "asg", ["course_id", "course_code", "title", "brief", "brief_content_id", "due_at", "max_score", "ca_weight"];
    Submission => "submission", "sub", ["assignment_id", "course_id", "student_id", "text", "content_id", "submitted_at", "score", "graded_by", "graded_at"];
    ContentItem => "content_item", "cnt", ["course_id", "owner_course", "kind", "filename", "media_type", "size_bytes", "sha256", "uploaded_by", "uploaded_at", "blob_ref"];
    DownloadEvent => "download_event", "dl", ["student_id", "content_id", "course_id", "downloaded_at"];
    Message => "message", "msg", ["from_user", "to_user", "subject", "body", "sent_at", "read"];
    Notice => "notice", "ntc", ["author_id", "author_role", "scope", "title", "body", "posted_at"];
    ChatMessage => "chat_message", "chat", ["room", "course_id", "seq", "author_id", "body", "posted_at"];
    TimetableEntry => "timetable_entry", "tt", ["course_id", "course_code", "date", "start", "end", "activity", "venue"];
    LibraryBook => "library_book", "book", ["title", "author", "isbn", "location", "copies_total"];
    SessionToken => "session_token", "ses", ["token_digest", "user_id", "role", "issued_at", "expires_at", "revoked"];
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UniqueKey {
    pub name: String,
    pub value: String,
}

impl UniqueKey {
    pub fn new(name: &str, value: impl Into<String>) -> Self {
        UniqueKey {
            name: name.to_owned(),
            value: value.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Reference {
    pub field: String,
    pub kind: Kind,
    pub id: Id,
}

impl Reference {
    pub fn new(field: &str, kind: Kind, id: &Id) -> Self {
        Reference {
            field: field.to_owned(),
            kind,
            id: id.clone(),
        }
    }
}

/// A typed entity that can live in the store.
pub trait Entity: Serialize + DeserializeOwned + Send + Sync + 'static {
    const KIND: Kind;

    fn unique_keys(&self) -> Vec<UniqueKey> {
        Vec::new()
    }

    fn references(&self) -> Vec<Reference> {
        Vec::new()
    }
}

/// One stored version of an entity. `keys` and `refs` are index metadata and
/// never part of the canonical body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub kind: Kind,
    pub id: Id,
    pub version: u64,
    pub created_at: Timestamp,
    pub updated_at: Timestamp,
    pub body: Value,
    #[serde(default)]
    pub keys: Vec<UniqueKey>,
    #[serde(default)]
    pub refs: Vec<Reference>,
}

/// Line format of `citadel dump`: fixed field order, body keys sorted.
#[derive(Debug, Serialize)]
pub(crate) struct DumpLine<'a> {
    pub schema: u32,
    pub kind: Kind,
    pub id: &'a Id,
    pub version: u64,
    pub created_at: Timestamp,
    pub updated_at: Timestamp,
    pub body: &'a Value,
}

/// A decoded entity together with its record metadata.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stored<T> {
    pub id: Id,
    pub version: u64,
    pub created_at: Timestamp,
    pub updated_at: Timestamp,
    #[serde(flatten)]
    pub value: T,
}

impl<T: Entity> Stored<T> {
    pub(crate) fn decode(record: &Arc<Record>) -> Result<Self, super::StoreError> {
        let value = serde_json::from_value(record.body.clone()).map_err(|e| {
            super::StoreError::Corrupt(format!("{} {}: {e}", record.kind, record.id))
        })?;
        Ok(Stored {
            id: record.id.clone(),
            version: record.version,
            created_at: record.created_at,
            updated_at: record.updated_at,
            value,
        })
    }
}

impl<T> std::ops::Deref for Stored<T> {
    type Target = T;

    fn deref(&self) -> &T {
        &self.value
    }
}
