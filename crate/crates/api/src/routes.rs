//! The published endpoint table. Every route carries exactly one capability,
//! and the guard checks it before the handler parses anything.

use std::collections::{BTreeMap, HashSet};

use axum::extract::{Request, State};
use axum::http::{header, HeaderMap, Method};
use axum::middleware::{from_fn_with_state, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{on, MethodFilter, MethodRouter};
use citadel_core::auth::{check_matrix_total, permits, Capability};
use citadel_core::CoreError;

use crate::chat;
use crate::error::Failure;
use crate::handlers as h;
use crate::AppState;

#[derive(Debug, Clone)]
pub struct Route {
    pub method: Method,
    pub path: &'static str,
    pub capability: Capability,
}

macro_rules! routes {
    ($($method:ident $path:literal => $cap:ident,)*) => {
        pub fn route_table() -> Vec<Route> {
            vec![$(Route { method: Method::$method, path: $path, capability: Capability::$cap },)*]
        }
    };
}

routes! {
    GET "/api/health" => Health,
    POST "/api/login" => Login,
    POST "/api/logout" => Logout,
    POST "/api/password" => ChangePassword,

    POST "/api/faculties" => CreateFaculty,
    GET "/api/faculties" => ListFaculties,
    POST "/api/departments" => CreateDepartment,
    GET "/api/departments" => ListDepartments,
    POST "/api/users" => CreateUser,
    GET "/api/users" => ListUsers,
    POST "/api/courses" => CreateCourse,
    GET "/api/courses" => ListCourses,
    POST "/api/enrollments" => EnrollStudent,

    GET "/api/me/courses" => MyCourses,
    POST "/api/me/enrollments" => SelfEnroll,
    GET "/api/me/timetable" => MyTimetable,
    GET "/api/me/results" => MyResults,
    GET "/api/me/classmates" => ViewClassmates,
    GET "/api/me/lecturers" => ViewLecturers,

    POST "/api/courses/{code}/materials" => UploadMaterial,
    GET "/api/courses/{code}/materials" => ListMaterials,
    GET "/api/courses/{code}/materials/{id}" => ViewMaterial,
    GET "/api/content/{id}/download" => DownloadContent,
    PUT "/api/courses/{code}/syllabus" => SetSyllabus,
    GET "/api/courses/{code}/syllabus" => ViewSyllabus,
    GET "/api/library/books" => SearchLibrary,
    POST "/api/library/books" => AddBook,
    PUT "/api/library/books/{id}" => UpdateBook,
    DELETE "/api/library/books/{id}" => RemoveBook,
    POST "/api/timetable" => CreateTimetableEntry,
    PUT "/api/timetable/{id}" => UpdateTimetableEntry,
    DELETE "/api/timetable/{id}" => RemoveTimetableEntry,

    POST "/api/courses/{code}/assessments" => CreateAssessment,
    GET "/api/courses/{code}/assessments" => ListAssessments,
    GET "/api/assessments/{id}" => ViewAssessment,
    POST "/api/assessments/{id}/attempts" => StartAttempt,
    GET "/api/attempts/{id}" => ViewAttempt,
    PATCH "/api/attempts/{id}/answers" => SaveAnswers,
    POST "/api/attempts/{id}/submit" => SubmitAttempt,
    POST "/api/courses/{code}/assignments" => CreateAssignment,
    GET "/api/courses/{code}/assignments" => ListAssignments,
    POST "/api/assignments/{id}/submissions" => SubmitAssignment,
    GET "/api/assignments/{id}/submissions" => ListSubmissions,
    POST "/api/submissions/{id}/grade" => GradeSubmission,
    GET "/api/courses/{code}/results" => CourseResults,

    POST "/api/messages" => SendMessage,
    GET "/api/messages" => ListInbox,
    POST "/api/messages/{id}/read" => MarkRead,
    POST "/api/notices" => PostNotice,
    GET "/api/notices" => ListNotices,
    POST "/api/chat/{course}/messages" => ChatPost,
    GET "/api/chat/{course}/messages" => ChatFetch,

    GET "/api/courses/{code}/report.json" => ReportJson,
    GET "/api/courses/{code}/report.csv" => ReportCsv,
}

/// Every capability is served by exactly one route, no (method, path) pair
/// repeats, and the permission matrix covers every capability.
pub fn check_routes(routes: &[Route]) -> Result<(), String> {
    check_matrix_total()?;
    let mut seen = HashSet::new();
    for r in routes {
        if !seen.insert((r.method.clone(), r.path)) {
            return Err(format!("duplicate route {} {}", r.method, r.path));
        }
    }
    for cap in Capability::ALL {
        let n = routes.iter().filter(|r| r.capability == *cap).count();
        if n != 1 {
            return Err(format!("capability {} is served by {n} routes", cap.as_str()));
        }
    }
    Ok(())
}

fn handler(cap: Capability, filter: MethodFilter) -> MethodRouter<AppState> {
    use Capability::*;
    match cap {
        Health => on(filter, h::health),
        Login => on(filter, h::login),
        Logout => on(filter, h::logout),
        ChangePassword => on(filter, h::change_password),
        CreateFaculty => on(filter, h::create_faculty),
        ListFaculties => on(filter, h::list_faculties),
        CreateDepartment => on(filter, h::create_department),
        ListDepartments => on(filter, h::list_departments),
        CreateUser => on(filter, h::create_user),
        ListUsers => on(filter, h::list_users),
        CreateCourse => on(filter, h::create_course),
        ListCourses => on(filter, h::list_courses),
        EnrollStudent => on(filter, h::enroll_student),
        MyCourses => on(filter, h::my_courses),
        SelfEnroll => on(filter, h::self_enroll),
        MyTimetable => on(filter, h::my_timetable),
        MyResults => on(filter, h::my_results),
        ViewClassmates => on(filter, h::view_classmates),
        ViewLecturers => on(filter, h::view_lecturers),
        UploadMaterial => on(filter, h::upload_material),
        ListMaterials => on(filter, h::list_materials),
        ViewMaterial => on(filter, h::view_material),
        DownloadContent => on(filter, h::download_content),
        SetSyllabus => on(filter, h::set_syllabus),
        ViewSyllabus => on(filter, h::view_syllabus),
        SearchLibrary => on(filter, h::search_library),
        AddBook => on(filter, h::add_book),
        UpdateBook => on(filter, h::update_book),
        RemoveBook => on(filter, h::remove_book),
        CreateTimetableEntry => on(filter, h::create_timetable_entry),
        UpdateTimetableEntry => on(filter, h::update_timetable_entry),
        RemoveTimetableEntry => on(filter, h::remove_timetable_entry),
        CreateAssessment => on(filter, h::create_assessment),
        ListAssessments => on(filter, h::list_assessments),
        ViewAssessment => on(filter, h::view_assessment),
        StartAttempt => on(filter, h::start_attempt),
        ViewAttempt => on(filter, h::view_attempt),
        SaveAnswers => on(filter, h::save_answers),
        SubmitAttempt => on(filter, h::submit_attempt),
        CreateAssignment => on(filter, h::create_assignment),
        ListAssignments => on(filter, h::list_assignments),
        SubmitAssignment => on(filter, h::submit_assignment),
        ListSubmissions => on(filter, h::list_submissions),
        GradeSubmission => on(filter, h::grade_submission),
        CourseResults => on(filter, h::course_results),
        SendMessage => on(filter, h::send_message),
        ListInbox => on(filter, h::list_inbox),
        MarkRead => on(filter, h::mark_read),
        PostNotice => on(filter, h::post_notice),
        ListNotices => on(filter, h::list_notices),
        ChatPost => on(filter, h::chat_post),
        ChatFetch => on(filter, chat::chat_fetch),
        ReportJson => on(filter, h::report_json),
        ReportCsv => on(filter, h::report_csv),
    }
}

fn bearer(headers: &HeaderMap) -> Option<&str> {
    let v = headers.get(header::AUTHORIZATION)?.to_str().ok()?;
    let (scheme, token) = v.split_once(' ')?;
    scheme.eq_ignore_ascii_case("bearer").then(|| token.trim())
}

/// Authenticates the caller and checks the matrix for the route's capability.
/// Ownership checks happen in the service.
async fn guard(State((app, cap)): State<(AppState, Capability)>, mut req: Request, next: Next) -> Response {
    if !cap.is_public() {
        let principal = match bearer(req.headers()).map(|t| app.citadel.authenticate(t)) {
            Some(Ok(p)) => p,
            _ => return Failure(CoreError::Unauthenticated).into_response(),
        };
        if !permits(principal.role, cap) {
            return Failure(CoreError::Forbidden).into_response();
        }
        req.extensions_mut().insert(principal);
    }
    next.run(req).await
}

/// Method routers keyed by path, each method guarded by its capability.
pub(crate) fn method_routers(state: &AppState) -> Result<BTreeMap<&'static str, MethodRouter<AppState>>, String> {
    let routes = route_table();
    check_routes(&routes)?;
    let mut by_path: BTreeMap<&'static str, MethodRouter<AppState>> = BTreeMap::new();
    for r in routes {
        let filter = MethodFilter::try_from(r.method.clone()).map_err(|e| e.to_string())?;
        let mr = handler(r.capability, filter)
            .route_layer(from_fn_with_state((state.clone(), r.capability), guard));
        let merged = match by_path.remove(r.path) {
            Some(prev) => prev.merge(mr),
            None => mr,
        };
        by_path.insert(r.path, merged);
    }
    Ok(by_path)
}
