//! Every (role, endpoint) pair of the route table against the running server.
//! Each role calls with resources it owns, so only the permission matrix can
//! turn a request away with `forbidden`.

use std::collections::HashMap;

use chrono::{SecondsFormat, Utc};
use citadel_api::route_table;
use citadel_core::auth::{permits, Capability};
use citadel_core::domain::Role;
use reqwest::Method;
use serde_json::{json, Value};

use crate::common::{self, Api, Resp, Server, REGISTRAR, REGISTRAR_PW};
use crate::support::err;
use crate::{ensure, Outcome};

const CODE: &str = "RBA101";
const PW: &str = "sweep-pass-123";
const LECTURER: &str = "STF/0500";
const STUDENT: &str = "BU/24/0001";

fn at(offset_secs: i64) -> String {
    (Utc::now() + chrono::Duration::seconds(offset_secs)).to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn id(v: &Value) -> String {
    v["id"].as_str().unwrap_or_default().to_owned()
}

/// Resources the sweep addresses, keyed by the capability whose path takes an id.
struct Fixture {
    tokens: HashMap<Role, String>,
    ids: HashMap<Capability, String>,
    inbox: HashMap<Role, String>,
}

fn setup(api: &Api) -> Fixture {
    let reg = api.login(REGISTRAR, REGISTRAR_PW);
    let fac = api.post("/api/faculties", &reg, json!({"name": "Sweep"})).expect(201, "faculty");
    let dept = id(&api
        .post("/api/departments", &reg, json!({"name": "Sweep Dept", "faculty_id": fac["id"]}))
        .expect(201, "department"));
    let user = |username: &str, role: &str| {
        id(&api
            .post(
                "/api/users",
                &reg,
                json!({"username": username, "password": PW, "full_name": username, "email": "", "phone": "",
                       "role": role, "department_id": dept}),
            )
            .expect(201, "user"))
    };
    let lect_id = user(LECTURER, "lecturer");
    let student_id = user(STUDENT, "student");
    let reg_id = api.get("/api/users?role=registrar", &reg).expect(200, "registrars")["items"][0]["id"]
        .as_str()
        .unwrap_or_default()
        .to_owned();
    api.post(
        "/api/courses",
        &reg,
        json!({"code": CODE, "title": "Sweep", "department_id": dept, "lecturer_id": lect_id, "session": "2024/2025"}),
    )
    .expect(201, "course");
    api.post("/api/enrollments", &reg, json!({"student_id": student_id, "course_code": CODE}))
        .expect(201, "enroll");
    let lect = api.login(LECTURER, PW);
    let student = api.login(STUDENT, PW);

    let material = id(&api
        .upload(&format!("/api/courses/{CODE}/materials"), &lect, "notes.txt", b"notes".to_vec(), &[])
        .expect(201, "material"));
    let question = json!({"prompt": "?", "options": ["a", "b"], "correct_index": 0, "points": 1.0});
    let quiz = id(&api
        .post(
            &format!("/api/courses/{CODE}/assessments"),
            &lect,
            json!({"kind": "quiz", "title": "Q", "opens_at": at(-60), "closes_at": at(7200),
                   "questions": [question], "ca_weight": 5.0}),
        )
        .expect(201, "quiz"));
    let attempt = id(&api
        .post(&format!("/api/assessments/{quiz}/attempts"), &student, json!({}))
        .expect(201, "attempt"));
    let assignment = id(&api
        .post(
            &format!("/api/courses/{CODE}/assignments"),
            &lect,
            json!({"title": "A", "due_at": at(7200), "max_score": 10.0, "ca_weight": 5.0}),
        )
        .expect(201, "assignment"));
    let submission = id(&api
        .post(&format!("/api/assignments/{assignment}/submissions"), &student, json!({"text": "done"}))
        .expect(201, "submission"));
    let book = id(&api
        .post("/api/library/books", &reg, json!({"title": "Sweeping", "author": "B. Room", "copies_total": 1}))
        .expect(201, "book"));
    let slot = id(&api
        .post(
            "/api/timetable",
            &reg,
            json!({"course_code": CODE, "date": "2024-10-07", "start": "09:00:00", "end": "11:00:00", "activity": "lecture"}),
        )
        .expect(201, "timetable"));
    let mut inbox = HashMap::new();
    for (from, to, role) in [(&reg, &student_id, Role::Student), (&reg, &lect_id, Role::Lecturer), (&lect, &reg_id, Role::Registrar)] {
        let m = api
            .post("/api/messages", from, json!({"to_user": to, "subject": "s", "body": "b"}))
            .expect(201, "message");
        inbox.insert(role, id(&m));
    }

    use Capability::*;
    let ids = HashMap::from([
        (ViewMaterial, material.clone()),
        (DownloadContent, material),
        (UpdateBook, book.clone()),
        (RemoveBook, book),
        (UpdateTimetableEntry, slot.clone()),
        (RemoveTimetableEntry, slot),
        (ViewAssessment, quiz.clone()),
        (StartAttempt, quiz),
        (ViewAttempt, attempt.clone()),
        (SaveAnswers, attempt.clone()),
        (SubmitAttempt, attempt),
        (SubmitAssignment, assignment.clone()),
        (ListSubmissions, assignment),
        (GradeSubmission, submission),
    ]);
    let tokens = HashMap::from([(Role::Registrar, reg), (Role::Lecturer, lect), (Role::Student, student)]);
    Fixture { tokens, ids, inbox }
}

fn username(role: Role) -> (&'static str, &'static str) {
    match role {
        Role::Registrar => (REGISTRAR, REGISTRAR_PW),
        Role::Lecturer => (LECTURER, PW),
        Role::Student => (STUDENT, PW),
    }
}

fn call(api: &Api, method: &Method, path: &str, token: Option<&str>) -> Resp {
    let body = (*method != Method::GET && *method != Method::DELETE).then(|| json!({}));
    api.call(method.clone(), path, token, body.as_ref())
}

pub fn run() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    common::bootstrap(dir.path());
    let server = Server::start(dir.path(), &[]);
    let api = server.api();
    let fx = setup(&api);

    let routes = route_table();
    ensure(routes.len() == Capability::ALL.len(), || {
        format!("{} routes for {} capabilities", routes.len(), Capability::ALL.len())
    })?;
    let mut deviations = Vec::new();
    let (mut allowed, mut forbidden, mut pairs) = (0, 0, 0);
    for r in &routes {
        for role in Role::ALL {
            let mut path = r.path.replace("{code}", CODE).replace("{course}", CODE);
            if path.contains("{id}") {
                let id = if r.capability == Capability::MarkRead {
                    fx.inbox.get(&role)
                } else {
                    fx.ids.get(&r.capability)
                };
                path = path.replace("{id}", id.ok_or_else(|| format!("no id for {}", r.capability.as_str()))?);
            }
            match r.capability {
                Capability::ViewClassmates => path.push_str(&format!("?course={CODE}")),
                Capability::ChatFetch => path.push_str("?wait=0"),
                _ => {}
            }
            let fresh;
            let token = if r.capability == Capability::Logout {
                let (u, p) = username(role);
                fresh = api.login(u, p);
                &fresh
            } else {
                &fx.tokens[&role]
            };
            let resp = call(&api, &r.method, &path, Some(token));
            let expect_allowed = r.capability.is_public() || permits(role, r.capability);
            let denied = resp.status == 403 && resp.code() == "forbidden";
            let ok = if expect_allowed {
                !denied && resp.status != 401 && resp.status < 500
            } else {
                denied
            };
            pairs += 1;
            if denied {
                forbidden += 1;
            } else {
                allowed += 1;
            }
            if !ok {
                deviations.push(format!(
                    "{} {} as {role}: expected {}, got {} {}",
                    r.method,
                    r.path,
                    if expect_allowed { "allowed" } else { "forbidden" },
                    resp.status,
                    resp.text()
                ));
            }
        }
    }

    let mut anonymous = 0;
    for r in &routes {
        let path = r.path.replace("{code}", CODE).replace("{course}", CODE).replace("{id}", "x-000001");
        let resp = call(&api, &r.method, &path, None);
        let ok = if r.capability.is_public() {
            resp.status != 401
        } else {
            resp.status == 401 && resp.code() == "unauthenticated"
        };
        anonymous += 1;
        if !ok {
            deviations.push(format!("{} {} anonymous: got {} {}", r.method, r.path, resp.status, resp.text()));
        }
    }
    server.terminate();
    ensure(deviations.is_empty(), || format!("{} deviations:\n  {}", deviations.len(), deviations.join("\n  ")))?;
    Ok(format!(
        "{pairs}/{pairs} (role, endpoint) pairs match the matrix ({allowed} allowed, {forbidden} forbidden); \
         {anonymous} anonymous calls answered per the public set"
    ))
}
