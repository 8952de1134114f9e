//! Persisted entities and their uniqueness and reference declarations.

use serde::{Deserialize, Serialize};

use crate::domain::{Role, TimetableEntry};
use crate::store::{Entity, Id, Kind, Reference, UniqueKey};
use crate::time::Timestamp;

fn opt_ref(field: &str, kind: Kind, id: &Option<Id>) -> Option<Reference> {
    id.as_ref().map(|id| Reference::new(field, kind, id))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct User {
    pub username: String,
    pub password_digest: String,
    pub full_name: String,
    pub email: String,
    pub phone: String,
    pub role: Role,
    pub department_id: Option<Id>,
    /// Registry account acting for the library (notice author class).
    #[serde(default)]
    pub is_library: bool,
    #[serde(default)]
    pub deleted: bool,
}

impl Entity for User {
    const KIND: Kind = Kind::User;

    fn unique_keys(&self) -> Vec<UniqueKey> {
        vec![UniqueKey::new("username", &self.username)]
    }

    fn references(&self) -> Vec<Reference> {
        opt_ref("department_id", Kind::Department, &self.department_id)
            .into_iter()
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Faculty {
    pub name: String,
}

impl Entity for Faculty {
    const KIND: Kind = Kind::Faculty;

    fn unique_keys(&self) -> Vec<UniqueKey> {
        vec![UniqueKey::new("faculty_name", &self.name)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Department {
    pub name: String,
    pub faculty_id: Id,
}

impl Entity for Department {
    const KIND: Kind = Kind::Department;

    fn unique_keys(&self) -> Vec<UniqueKey> {
        vec![UniqueKey::new(
            "department_name",
            format!("{}|{}", self.faculty_id, self.name),
        )]
    }

    fn references(&self) -> Vec<Reference> {
        vec![Reference::new("faculty_id", Kind::Faculty, &self.faculty_id)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Course {
    pub code: String,
    pub title: String,
    pub department_id: Id,
    pub lecturer_id: Id,
    pub session: String,
    pub syllabus: Vec<String>,
    #[serde(default)]
    pub deleted: bool,
}

impl Entity for Course {
    const KIND: Kind = Kind::Course;

    fn unique_keys(&self) -> Vec<UniqueKey> {
        vec![UniqueKey::new(
            "code_session",
            format!("{}|{}", self.code, self.session),
        )]
    }

    fn references(&self) -> Vec<Reference> {
        vec![
            Reference::new("department_id", Kind::Department, &self.department_id),
            Reference::new("lecturer_id", Kind::User, &self.lecturer_id),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Enrollment {
    pub student_id: Id,
    pub course_id: Id,
    pub course_code: String,
    pub session: String,
    pub registered_at: Timestamp,
}

impl Entity for Enrollment {
    const KIND: Kind = Kind::Enrollment;

    fn unique_keys(&self) -> Vec<UniqueKey> {
        vec![UniqueKey::new(
            "student_course",
            format!("{}|{}", self.student_id, self.course_id),
        )]
    }

    fn references(&self) -> Vec<Reference> {
        vec![
            Reference::new("student_id", Kind::User, &self.student_id),
            Reference::new("course_id", Kind::Course, &self.course_id),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssessmentKind {
    Quiz,
    Exam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub prompt: String,
    pub options: Vec<String>,
    pub correct_index: usize,
    pub points: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assessment {
    pub course_id: Id,
    pub course_code: String,
    pub kind: AssessmentKind,
    pub title: String,
    pub opens_at: Timestamp,
    pub closes_at: Timestamp,
    /// Minutes from start; never longer than the window.
    pub duration_limit: Option<u32>,
    pub questions: Vec<Question>,
    pub points_total: f64,
    pub ca_weight: f64,
}

impl Entity for Assessment {
    const KIND: Kind = Kind::Assessment;

    fn references(&self) -> Vec<Reference> {
        vec![Reference::new("course_id", Kind::Course, &self.course_id)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttemptStatus {
    InProgress,
    Submitted,
    /// The deadline passed before a successful submit; scored from autosaved answers.
    Expired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub assessment_id: Id,
    pub course_id: Id,
    pub student_id: Id,
    pub started_at: Timestamp,
    /// min(closes_at, started_at + duration_limit), fixed at start.
    pub deadline: Timestamp,
    pub submitted_at: Option<Timestamp>,
    pub answers: Vec<Option<usize>>,
    pub status: AttemptStatus,
    pub auto_score: Option<f64>,
}

impl Entity for Attempt {
    const KIND: Kind = Kind::Attempt;

    fn unique_keys(&self) -> Vec<UniqueKey> {
        vec![UniqueKey::new(
            "student_assessment",
            format!("{}|{}", self.student_id, self.assessment_id),
        )]
    }

    fn references(&self) -> Vec<Reference> {
        vec![
            Reference::new("assessment_id", Kind::Assessment, &self.assessment_id),
            Reference::new("course_id", Kind::Course, &self.course_id),
            Reference::new("student_id", Kind::User, &self.student_id),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub course_id: Id,
    pub course_code: String,
    pub title: String,
    pub brief: String,
    pub brief_content_id: Option<Id>,
    pub due_at: Timestamp,
    pub max_score: f64,
    pub ca_weight: f64,
}

impl Entity for Assignment {
    const KIND: Kind = Kind::Assignment;

    fn references(&self) -> Vec<Reference> {
        let mut refs = vec![Reference::new("course_id", Kind::Course, &self.course_id)];
        refs.extend(opt_ref("brief_content_id", Kind::ContentItem, &self.brief_content_id));
        refs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub assignment_id: Id,
    pub course_id: Id,
    pub student_id: Id,
    pub text: Option<String>,
    pub content_id: Option<Id>,
    pub submitted_at: Timestamp,
    pub score: Option<f64>,
    pub graded_by: Option<Id>,
    pub graded_at: Option<Timestamp>,
}

impl Entity for Submission {
    const KIND: Kind = Kind::Submission;

    fn unique_keys(&self) -> Vec<UniqueKey> {
        vec![UniqueKey::new(
            "assignment_student",
            format!("{}|{}", self.assignment_id, self.student_id),
        )]
    }

    fn references(&self) -> Vec<Reference> {
        let mut refs = vec![
            Reference::new("assignment_id", Kind::Assignment, &self.assignment_id),
            Reference::new("course_id", Kind::Course, &self.course_id),
            Reference::new("student_id", Kind::User, &self.student_id),
        ];
        refs.extend(opt_ref("content_id", Kind::ContentItem, &self.content_id));
        refs.extend(opt_ref("graded_by", Kind::User, &self.graded_by));
        refs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContentKind {
    LectureMaterial,
    AssignmentBrief,
    Submission,
    GeneralDownload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentItem {
    pub course_id: Id,
    pub owner_course: String,
    pub kind: ContentKind,
    pub filename: String,
    pub media_type: String,
    pub size_bytes: u64,
    pub sha256: String,
    pub uploaded_by: Id,
    pub uploaded_at: Timestamp,
    pub blob_ref: String,
}

impl Entity for ContentItem {
    const KIND: Kind = Kind::ContentItem;

    fn references(&self) -> Vec<Reference> {
        vec![
            Reference::new("course_id", Kind::Course, &self.course_id),
            Reference::new("uploaded_by", Kind::User, &self.uploaded_by),
        ]
    }
}

/// First download of a content item by a student; later downloads do not add rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DownloadEvent {
    pub student_id: Id,
    pub content_id: Id,
    pub course_id: Id,
    pub downloaded_at: Timestamp,
}

impl Entity for DownloadEvent {
    const KIND: Kind = Kind::DownloadEvent;

    fn unique_keys(&self) -> Vec<UniqueKey> {
        vec![UniqueKey::new(
            "student_content",
            format!("{}|{}", self.student_id, self.content_id),
        )]
    }

    fn references(&self) -> Vec<Reference> {
        vec![
            Reference::new("student_id", Kind::User, &self.student_id),
            Reference::new("content_id", Kind::ContentItem, &self.content_id),
            Reference::new("course_id", Kind::Course, &self.course_id),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub from_user: Id,
    pub to_user: Id,
    pub subject: String,
    pub body: String,
    pub sent_at: Timestamp,
    pub read: bool,
}

impl Entity for Message {
    const KIND: Kind = Kind::Message;

    fn references(&self) -> Vec<Reference> {
        vec![
            Reference::new("from_user", Kind::User, &self.from_user),
            Reference::new("to_user", Kind::User, &self.to_user),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoticeAuthor {
    Lecturer,
    Registrar,
    Library,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NoticeScope {
    All,
    Department { department_id: Id },
    Course { course_id: Id, course_code: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Notice {
    pub author_id: Id,
    pub author_role: NoticeAuthor,
    pub scope: NoticeScope,
    pub title: String,
    pub body: String,
    pub posted_at: Timestamp,
}

impl Entity for Notice {
    const KIND: Kind = Kind::Notice;

    fn references(&self) -> Vec<Reference> {
        let mut refs = vec![Reference::new("author_id", Kind::User, &self.author_id)];
        match &self.scope {
            NoticeScope::All => {}
            NoticeScope::Department { department_id } => {
                refs.push(Reference::new("scope.department_id", Kind::Department, department_id))
            }
            NoticeScope::Course { course_id, .. } => {
                refs.push(Reference::new("scope.course_id", Kind::Course, course_id))
            }
        }
        refs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    /// Course code of the room.
    pub room: String,
    pub course_id: Id,
    pub seq: u64,
    pub author_id: Id,
    pub body: String,
    pub posted_at: Timestamp,
}

impl Entity for ChatMessage {
    const KIND: Kind = Kind::ChatMessage;

    fn unique_keys(&self) -> Vec<UniqueKey> {
        vec![UniqueKey::new(
            "room_seq",
            format!("{}#{}", self.course_id, self.seq),
        )]
    }

    fn references(&self) -> Vec<Reference> {
        vec![
            Reference::new("course_id", Kind::Course, &self.course_id),
            Reference::new("author_id", Kind::User, &self.author_id),
        ]
    }
}

impl Entity for TimetableEntry {
    const KIND: Kind = Kind::TimetableEntry;

    fn references(&self) -> Vec<Reference> {
        vec![Reference::new("course_id", Kind::Course, &self.course_id)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryBook {
    pub title: String,
    pub author: String,
    pub isbn: Option<String>,
    pub location: String,
    pub copies_total: u32,
}

impl Entity for LibraryBook {
    const KIND: Kind = Kind::LibraryBook;

    fn unique_keys(&self) -> Vec<UniqueKey> {
        vec![UniqueKey::new(
            "title_author_isbn",
            format!(
                "{}|{}|{}",
                self.title,
                self.author,
                self.isbn.as_deref().unwrap_or("")
            ),
        )]
    }
}

/// A login session. Only a digest of the bearer token is stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub token_digest: String,
    pub user_id: Id,
    pub role: Role,
    pub issued_at: Timestamp,
    pub expires_at: Timestamp,
    pub revoked: bool,
}

impl Entity for SessionRecord {
    const KIND: Kind = Kind::SessionToken;

    fn unique_keys(&self) -> Vec<UniqueKey> {
        vec![UniqueKey::new("token_digest", &self.token_digest)]
    }

    fn references(&self) -> Vec<Reference> {
        vec![Reference::new("user_id", Kind::User, &self.user_id)]
    }
}
