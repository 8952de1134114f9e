use std::collections::HashMap;

use axum::body::Body;
use axum::extract::{FromRequest, Multipart, Path, Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use chrono::NaiveDate;
use citadel_core::auth::{Capability, Principal};
use citadel_core::domain::Role;
use citadel_core::model::ContentKind;
use citadel_core::service::{
    AssessmentSpec, AssignmentInput, BookInput, EnrollmentRequest, MessageInput, NewCourse,
    NewDepartment, NewUser, NoticeInput, PageRequest, SubmissionInput, TimetableInput, Upload,
};
use citadel_core::store::Id;
use citadel_core::{Citadel, CoreError, CoreResult};
use serde::Deserialize;
use serde_json::json;

use crate::error::Failure;
use crate::extract::{multipart_error, Caller, JsonBody, Params};
use crate::AppState;

pub(crate) type Reply = Result<Response, Failure>;

/// Runs a service call on the blocking pool.
pub(crate) async fn run<T, F>(state: &AppState, f: F) -> Result<T, Failure>
where
    T: Send + 'static,
    F: FnOnce(&Citadel) -> CoreResult<T> + Send + 'static,
{
    let citadel = state.citadel.clone();
    tokio::task::spawn_blocking(move || f(&citadel))
        .await
        .map_err(|e| Failure(CoreError::Internal(format!("worker failed: {e}"))))?
        .map_err(Failure)
}

fn ok<T: serde::Serialize>(v: T) -> Reply {
    Ok(Json(v).into_response())
}

fn created<T: serde::Serialize>(v: T) -> Reply {
    Ok((StatusCode::CREATED, Json(v)).into_response())
}

fn no_content() -> Reply {
    Ok(StatusCode::NO_CONTENT.into_response())
}

pub async fn health() -> Reply {
    ok(json!({ "status": "ok" }))
}

// Accounts and registry.

#[derive(Deserialize)]
pub struct Credentials {
    username: String,
    password: String,
}

pub async fn login(State(s): State<AppState>, JsonBody(c): JsonBody<Credentials>) -> Reply {
    ok(run(&s, move |x| x.login(&c.username, &c.password)).await?)
}

pub async fn logout(State(s): State<AppState>, Caller(p): Caller) -> Reply {
    run(&s, move |x| x.logout(&p)).await?;
    no_content()
}

#[derive(Deserialize)]
pub struct PasswordChange {
    old_password: String,
    new_password: String,
}

pub async fn change_password(State(s): State<AppState>, Caller(p): Caller, JsonBody(b): JsonBody<PasswordChange>) -> Reply {
    run(&s, move |x| x.change_password(&p, &b.old_password, &b.new_password)).await?;
    no_content()
}

#[derive(Deserialize)]
pub struct Named {
    name: String,
}

pub async fn create_faculty(State(s): State<AppState>, Caller(p): Caller, JsonBody(b): JsonBody<Named>) -> Reply {
    created(run(&s, move |x| x.create_faculty(&p, &b.name)).await?)
}

pub async fn list_faculties(State(s): State<AppState>, Caller(p): Caller) -> Reply {
    ok(run(&s, move |x| x.list_faculties(&p)).await?)
}

pub async fn create_department(State(s): State<AppState>, Caller(p): Caller, JsonBody(b): JsonBody<NewDepartment>) -> Reply {
    created(run(&s, move |x| x.create_department(&p, b)).await?)
}

pub async fn list_departments(State(s): State<AppState>, Caller(p): Caller) -> Reply {
    ok(run(&s, move |x| x.list_departments(&p)).await?)
}

pub async fn create_user(State(s): State<AppState>, Caller(p): Caller, JsonBody(b): JsonBody<NewUser>) -> Reply {
    created(run(&s, move |x| x.create_user(&p, b)).await?)
}

#[derive(Deserialize)]
pub struct UsersQuery {
    role: Option<Role>,
    page: Option<usize>,
    per_page: Option<usize>,
}

pub async fn list_users(State(s): State<AppState>, Caller(p): Caller, Params(q): Params<UsersQuery>) -> Reply {
    let page = PageRequest { page: q.page, per_page: q.per_page };
    ok(run(&s, move |x| x.list_users(&p, q.role, page)).await?)
}

pub async fn create_course(State(s): State<AppState>, Caller(p): Caller, JsonBody(b): JsonBody<NewCourse>) -> Reply {
    created(run(&s, move |x| x.create_course(&p, b)).await?)
}

pub async fn list_courses(State(s): State<AppState>, Caller(p): Caller) -> Reply {
    ok(run(&s, move |x| x.list_courses(&p)).await?)
}

pub async fn enroll_student(State(s): State<AppState>, Caller(p): Caller, JsonBody(b): JsonBody<EnrollmentRequest>) -> Reply {
    created(run(&s, move |x| x.enroll(&p, b)).await?)
}

// Student pages.

#[derive(Deserialize)]
pub struct SelfEnrollment {
    course_code: String,
    #[serde(default)]
    session: Option<String>,
}

pub async fn self_enroll(State(s): State<AppState>, Caller(p): Caller, JsonBody(b): JsonBody<SelfEnrollment>) -> Reply {
    let req = EnrollmentRequest {
        course_code: b.course_code,
        session: b.session,
        ..Default::default()
    };
    created(run(&s, move |x| x.enroll(&p, req)).await?)
}

pub async fn my_courses(State(s): State<AppState>, Caller(p): Caller) -> Reply {
    ok(run(&s, move |x| x.my_courses(&p)).await?)
}

#[derive(Deserialize)]
pub struct DayQuery {
    date: Option<NaiveDate>,
}

pub async fn my_timetable(State(s): State<AppState>, Caller(p): Caller, Params(q): Params<DayQuery>) -> Reply {
    ok(run(&s, move |x| {
        let day = q.date.unwrap_or_else(|| x.now().date());
        x.my_timetable(&p, day)
    })
    .await?)
}

pub async fn my_results(State(s): State<AppState>, Caller(p): Caller) -> Reply {
    ok(run(&s, move |x| x.my_results(&p)).await?)
}

#[derive(Deserialize)]
pub struct CourseQuery {
    course: String,
}

pub async fn view_classmates(State(s): State<AppState>, Caller(p): Caller, Params(q): Params<CourseQuery>) -> Reply {
    ok(run(&s, move |x| x.classmates(&p, &q.course)).await?)
}

pub async fn view_lecturers(State(s): State<AppState>, Caller(p): Caller) -> Reply {
    ok(run(&s, move |x| x.my_lecturers(&p)).await?)
}

// Content.

/// Reads a multipart form: the `file` part plus any text fields.
async fn read_form(mut form: Multipart) -> Result<(Option<Upload>, HashMap<String, String>), Failure> {
    let mut file = None;
    let mut fields = HashMap::new();
    while let Some(field) = form.next_field().await.map_err(multipart_error)? {
        let name = field.name().unwrap_or_default().to_owned();
        if name == "file" {
            let filename = field.file_name().unwrap_or_default().to_owned();
            let media_type = field.content_type().map(str::to_owned);
            let bytes = field.bytes().await.map_err(multipart_error)?;
            file = Some(Upload {
                filename,
                media_type,
                bytes: bytes.to_vec(),
                ..Default::default()
            });
        } else {
            fields.insert(name, field.text().await.map_err(multipart_error)?);
        }
    }
    Ok((file, fields))
}

fn parse_kind(raw: &str) -> Result<ContentKind, Failure> {
    serde_json::from_value(serde_json::Value::String(raw.to_owned()))
        .map_err(|_| Failure(CoreError::BadRequest(format!("unknown content kind {raw}"))))
}

pub async fn upload_material(State(s): State<AppState>, Caller(p): Caller, Path(code): Path<String>, form: Multipart) -> Reply {
    let (file, fields) = read_form(form).await?;
    let mut upload = file.ok_or_else(|| Failure(CoreError::BadRequest("missing file part".into())))?;
    upload.kind = fields.get("kind").map(|k| parse_kind(k)).transpose()?;
    upload.sha256 = fields.get("sha256").cloned();
    created(run(&s, move |x| x.upload_material(&p, &code, upload)).await?)
}

pub async fn list_materials(State(s): State<AppState>, Caller(p): Caller, Path(code): Path<String>) -> Reply {
    ok(run(&s, move |x| x.list_materials(&p, &code)).await?)
}

pub async fn view_material(State(s): State<AppState>, Caller(p): Caller, Path((code, id)): Path<(String, Id)>) -> Reply {
    ok(run(&s, move |x| x.material(&p, &code, &id)).await?)
}

fn ascii_filename(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_graphic() && c != '"' && c != '\\' || c == ' ' { c } else { '_' })
        .collect()
}

pub async fn download_content(State(s): State<AppState>, Caller(p): Caller, Path(id): Path<Id>) -> Reply {
    let d = run(&s, move |x| x.download(&p, &id)).await?;
    let item = d.item;
    let mut resp = Response::new(Body::from(d.bytes));
    let h = resp.headers_mut();
    h.insert(header::CONTENT_LENGTH, HeaderValue::from(item.size_bytes));
    h.insert(
        header::CONTENT_TYPE,
        HeaderValue::from_str(&item.media_type)
            .unwrap_or(HeaderValue::from_static("application/octet-stream")),
    );
    if let Ok(v) = HeaderValue::from_str(&item.sha256) {
        h.insert("x-content-sha256", v);
    }
    if let Ok(v) = HeaderValue::from_str(&format!("attachment; filename=\"{}\"", ascii_filename(&item.filename))) {
        h.insert(header::CONTENT_DISPOSITION, v);
    }
    Ok(resp)
}

#[derive(Deserialize)]
pub struct Topics {
    topics: Vec<String>,
}

pub async fn set_syllabus(State(s): State<AppState>, Caller(p): Caller, Path(code): Path<String>, JsonBody(b): JsonBody<Topics>) -> Reply {
    let topics = run(&s, move |x| x.set_syllabus(&p, &code, b.topics)).await?;
    ok(json!({ "topics": topics }))
}

pub async fn view_syllabus(State(s): State<AppState>, Caller(p): Caller, Path(code): Path<String>) -> Reply {
    let topics = run(&s, move |x| x.view_syllabus(&p, &code)).await?;
    ok(json!({ "topics": topics }))
}

#[derive(Deserialize)]
pub struct LibraryQuery {
    #[serde(default)]
    q: String,
    page: Option<usize>,
    per_page: Option<usize>,
}

pub async fn search_library(State(s): State<AppState>, Caller(p): Caller, Params(q): Params<LibraryQuery>) -> Reply {
    let page = PageRequest { page: q.page, per_page: q.per_page };
    ok(run(&s, move |x| x.search_library(&p, &q.q, page)).await?)
}

pub async fn add_book(State(s): State<AppState>, Caller(p): Caller, JsonBody(b): JsonBody<BookInput>) -> Reply {
    created(run(&s, move |x| x.add_book(&p, b)).await?)
}

pub async fn update_book(State(s): State<AppState>, Caller(p): Caller, Path(id): Path<Id>, JsonBody(b): JsonBody<BookInput>) -> Reply {
    ok(run(&s, move |x| x.update_book(&p, &id, b)).await?)
}

pub async fn remove_book(State(s): State<AppState>, Caller(p): Caller, Path(id): Path<Id>) -> Reply {
    run(&s, move |x| x.remove_book(&p, &id)).await?;
    no_content()
}

pub async fn create_timetable_entry(State(s): State<AppState>, Caller(p): Caller, JsonBody(b): JsonBody<TimetableInput>) -> Reply {
    created(run(&s, move |x| x.create_timetable_entry(&p, b)).await?)
}

pub async fn update_timetable_entry(State(s): State<AppState>, Caller(p): Caller, Path(id): Path<Id>, JsonBody(b): JsonBody<TimetableInput>) -> Reply {
    ok(run(&s, move |x| x.update_timetable_entry(&p, &id, b)).await?)
}

pub async fn remove_timetable_entry(State(s): State<AppState>, Caller(p): Caller, Path(id): Path<Id>) -> Reply {
    run(&s, move |x| x.remove_timetable_entry(&p, &id)).await?;
    no_content()
}

// Assessment.

pub async fn create_assessment(State(s): State<AppState>, Caller(p): Caller, Path(code): Path<String>, JsonBody(b): JsonBody<AssessmentSpec>) -> Reply {
    created(run(&s, move |x| x.create_assessment(&p, &code, b)).await?)
}

pub async fn list_assessments(State(s): State<AppState>, Caller(p): Caller, Path(code): Path<String>) -> Reply {
    ok(run(&s, move |x| x.list_assessments(&p, &code)).await?)
}

pub async fn view_assessment(State(s): State<AppState>, Caller(p): Caller, Path(id): Path<Id>) -> Reply {
    ok(run(&s, move |x| x.assessment(&p, &id)).await?)
}

pub async fn start_attempt(State(s): State<AppState>, Caller(p): Caller, Path(id): Path<Id>) -> Reply {
    created(run(&s, move |x| x.start_attempt(&p, &id)).await?)
}

pub async fn view_attempt(State(s): State<AppState>, Caller(p): Caller, Path(id): Path<Id>) -> Reply {
    ok(run(&s, move |x| x.attempt(&p, &id)).await?)
}

#[derive(Deserialize)]
pub struct Answers {
    answers: Vec<Option<usize>>,
}

pub async fn save_answers(State(s): State<AppState>, Caller(p): Caller, Path(id): Path<Id>, JsonBody(b): JsonBody<Answers>) -> Reply {
    ok(run(&s, move |x| x.save_answers(&p, &id, b.answers)).await?)
}

#[derive(Deserialize)]
pub struct FinalAnswers {
    #[serde(default)]
    answers: Option<Vec<Option<usize>>>,
}

pub async fn submit_attempt(State(s): State<AppState>, Caller(p): Caller, Path(id): Path<Id>, JsonBody(b): JsonBody<FinalAnswers>) -> Reply {
    ok(run(&s, move |x| x.submit_attempt(&p, &id, b.answers)).await?)
}

pub async fn create_assignment(State(s): State<AppState>, Caller(p): Caller, Path(code): Path<String>, JsonBody(b): JsonBody<AssignmentInput>) -> Reply {
    created(run(&s, move |x| x.create_assignment(&p, &code, b)).await?)
}

pub async fn list_assignments(State(s): State<AppState>, Caller(p): Caller, Path(code): Path<String>) -> Reply {
    ok(run(&s, move |x| x.list_assignments(&p, &code)).await?)
}

#[derive(Deserialize)]
pub struct TextSubmission {
    text: Option<String>,
}

/// Accepts a multipart form (`text` and/or `file`) or a JSON `{"text": ...}`.
pub async fn submit_assignment(State(s): State<AppState>, Caller(p): Caller, Path(id): Path<Id>, req: Request) -> Reply {
    let is_form = req
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("multipart/form-data"));
    let input = if is_form {
        let form = Multipart::from_request(req, &s)
            .await
            .map_err(|r| Failure(CoreError::BadRequest(r.body_text())))?;
        let (file, mut fields) = read_form(form).await?;
        SubmissionInput { text: fields.remove("text"), file }
    } else {
        let JsonBody(b) = JsonBody::<TextSubmission>::from_request(req, &s).await?;
        SubmissionInput { text: b.text, file: None }
    };
    created(run(&s, move |x| x.submit_assignment(&p, &id, input)).await?)
}

pub async fn list_submissions(State(s): State<AppState>, Caller(p): Caller, Path(id): Path<Id>) -> Reply {
    ok(run(&s, move |x| x.list_submissions(&p, &id)).await?)
}

#[derive(Deserialize)]
pub struct Grade {
    score: f64,
}

pub async fn grade_submission(State(s): State<AppState>, Caller(p): Caller, Path(id): Path<Id>, JsonBody(b): JsonBody<Grade>) -> Reply {
    ok(run(&s, move |x| x.grade_submission(&p, &id, b.score)).await?)
}

pub async fn course_results(State(s): State<AppState>, Caller(p): Caller, Path(code): Path<String>) -> Reply {
    ok(run(&s, move |x| x.course_results(&p, &code)).await?)
}

// Collaboration.

pub async fn send_message(State(s): State<AppState>, Caller(p): Caller, JsonBody(b): JsonBody<MessageInput>) -> Reply {
    created(run(&s, move |x| x.send_message(&p, b)).await?)
}

pub async fn list_inbox(State(s): State<AppState>, Caller(p): Caller, Params(q): Params<PageRequest>) -> Reply {
    ok(run(&s, move |x| x.inbox(&p, q)).await?)
}

pub async fn mark_read(State(s): State<AppState>, Caller(p): Caller, Path(id): Path<Id>) -> Reply {
    ok(run(&s, move |x| x.mark_read(&p, &id)).await?)
}

pub async fn post_notice(State(s): State<AppState>, Caller(p): Caller, JsonBody(b): JsonBody<NoticeInput>) -> Reply {
    created(run(&s, move |x| x.post_notice(&p, b)).await?)
}

pub async fn list_notices(State(s): State<AppState>, Caller(p): Caller, Params(q): Params<PageRequest>) -> Reply {
    ok(run(&s, move |x| x.list_notices(&p, q)).await?)
}

#[derive(Deserialize)]
pub struct ChatBody {
    body: String,
}

pub async fn chat_post(State(s): State<AppState>, Caller(p): Caller, Path(course): Path<String>, JsonBody(b): JsonBody<ChatBody>) -> Reply {
    created(run(&s, move |x| x.chat_post(&p, &course, &b.body)).await?)
}

// Reports.

async fn report(s: AppState, p: Principal, code: String, cap: Capability) -> Result<citadel_core::report::ProgressReport, Failure> {
    run(&s, move |x| x.progress_report(&p, &code, cap)).await
}

pub async fn report_json(State(s): State<AppState>, Caller(p): Caller, Path(code): Path<String>) -> Reply {
    ok(report(s, p, code, Capability::ReportJson).await?)
}

pub async fn report_csv(State(s): State<AppState>, Caller(p): Caller, Path(code): Path<String>) -> Reply {
    let r = report(s, p, code, Capability::ReportCsv).await?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], r.to_csv()).into_response())
}
