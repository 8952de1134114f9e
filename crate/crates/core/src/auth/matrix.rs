//! Static role/capability permission matrix. Anything not granted is denied.

use serde::{Deserialize, Serialize};

use crate::domain::Role;

macro_rules! capabilities {
    ($($variant:ident => $name:literal,)*) => {
        /// One capability per API endpoint.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum Capability {
            $($variant,)*
        }

        impl Capability {
            pub const ALL: &'static [Capability] = &[$(Capability::$variant,)*];

            pub fn as_str(&self) -> &'static str {
                match self {
                    $(Capability::$variant => $name,)*
                }
            }
        }
    };
}

capabilities! {
    Health => "health",
    Login => "login",
    Logout => "logout",
    ChangePassword => "change_password",
    CreateFaculty => "create_faculty",
    ListFaculties => "list_faculties",
    CreateDepartment => "create_department",
    ListDepartments => "list_departments",
    CreateUser => "create_user",
    ListUsers => "list_users",
    CreateCourse => "create_course",
    ListCourses => "list_courses",
    EnrollStudent => "enroll_student",
    MyCourses => "my_courses",
    SelfEnroll => "self_enroll",
    MyTimetable => "my_timetable",
    MyResults => "my_results",
    ViewClassmates => "view_classmates",
    ViewLecturers => "view_lecturers",
    UploadMaterial => "upload_material",
    ListMaterials => "list_materials",
    ViewMaterial => "view_material",
    DownloadContent => "download_content",
    SetSyllabus => "set_syllabus",
    ViewSyllabus => "view_syllabus",
    SearchLibrary => "search_library",
    AddBook => "add_book",
    UpdateBook => "update_book",
    RemoveBook => "remove_book",
    CreateTimetableEntry => "create_timetable_entry",
    UpdateTimetableEntry => "update_timetable_entry",
    RemoveTimetableEntry => "remove_timetable_entry",
    CreateAssessment => "create_assessment",
    ListAssessments => "list_assessments",
    ViewAssessment => "view_assessment",
    StartAttempt => "start_attempt",
    ViewAttempt => "view_attempt",
    SaveAnswers => "save_answers",
    SubmitAttempt => "submit_attempt",
    CreateAssignment => "create_assignment",
    ListAssignments => "list_assignments",
    SubmitAssignment => "submit_assignment",
    ListSubmissions => "list_submissions",
    GradeSubmission => "grade_submission",
    CourseResults => "course_results",
    SendMessage => "send_message",
    ListInbox => "list_inbox",
    MarkRead => "mark_read",
    PostNotice => "post_notice",
    ListNotices => "list_notices",
    ChatPost => "chat_post",
    ChatFetch => "chat_fetch",
    ReportJson => "report_json",
    ReportCsv => "report_csv",
}

impl Capability {
    /// Capabilities reachable without a session.
    pub fn is_public(&self) -> bool {
        matches!(self, Capability::Health | Capability::Login)
    }
}

const S: Role = Role::Student;
const L: Role = Role::Lecturer;
const R: Role = Role::Registrar;

/// Granted roles per capability. Public capabilities are listed with no roles.
const GRANTS: &[(Capability, &[Role])] = {
    use Capability::*;
    &[
        (Health, &[]),
        (Login, &[]),
        (Logout, &[S, L, R]),
        (ChangePassword, &[S, L, R]),
        (CreateFaculty, &[R]),
        (ListFaculties, &[S, L, R]),
        (CreateDepartment, &[R]),
        (ListDepartments, &[S, L, R]),
        (CreateUser, &[R]),
        (ListUsers, &[R]),
        (CreateCourse, &[R]),
        (ListCourses, &[S, L, R]),
        (EnrollStudent, &[R]),
        (MyCourses, &[S, L]),
        (SelfEnroll, &[S]),
        (MyTimetable, &[S, L]),
        (MyResults, &[S]),
        (ViewClassmates, &[S]),
        (ViewLecturers, &[S]),
        (UploadMaterial, &[L]),
        (ListMaterials, &[S, L]),
        (ViewMaterial, &[S, L]),
        (DownloadContent, &[S, L]),
        (SetSyllabus, &[L]),
        (ViewSyllabus, &[S, L]),
        (SearchLibrary, &[S, L, R]),
        (AddBook, &[R]),
        (UpdateBook, &[R]),
        (RemoveBook, &[R]),
        (CreateTimetableEntry, &[L, R]),
        (UpdateTimetableEntry, &[L, R]),
        (RemoveTimetableEntry, &[L, R]),
        (CreateAssessment, &[L]),
        (ListAssessments, &[S, L]),
        (ViewAssessment, &[S, L]),
        (StartAttempt, &[S]),
        (ViewAttempt, &[S, L]),
        (SaveAnswers, &[S]),
        (SubmitAttempt, &[S]),
        (CreateAssignment, &[L]),
        (ListAssignments, &[S, L]),
        (SubmitAssignment, &[S]),
        (ListSubmissions, &[L]),
        (GradeSubmission, &[L]),
        (CourseResults, &[L, R]),
        (SendMessage, &[S, L, R]),
        (ListInbox, &[S, L, R]),
        (MarkRead, &[S, L, R]),
        (PostNotice, &[L, R]),
        (ListNotices, &[S, L, R]),
        (ChatPost, &[S, L]),
        (ChatFetch, &[S, L]),
        (ReportJson, &[L, R]),
        (ReportCsv, &[L, R]),
    ]
};

/// Matrix lookup only; ownership is checked separately by [`super::authorize`].
pub fn permits(role: Role, cap: Capability) -> bool {
    GRANTS
        .iter()
        .find(|(c, _)| *c == cap)
        .is_some_and(|(_, roles)| roles.contains(&role))
}

/// The full matrix as (role, capability, allowed) triples.
pub fn matrix() -> Vec<(Role, Capability, bool)> {
    Role::ALL
        .iter()
        .flat_map(|r| Capability::ALL.iter().map(move |c| (*r, *c, permits(*r, *c))))
        .collect()
}

/// Every capability appears exactly once in the grant table.
pub fn check_matrix_total() -> Result<(), String> {
    for cap in Capability::ALL {
        let n = GRANTS.iter().filter(|(c, _)| c == cap).count();
        if n != 1 {
            return Err(format!("capability {} has {n} grant rows", cap.as_str()));
        }
    }
    Ok(())
}
