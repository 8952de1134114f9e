//! The whole term over HTTP only: registry setup, enrollment, teaching,
//! student work, grading, and the results and reports that follow.

use chrono::{SecondsFormat, Utc};
use serde_json::{json, Value};

use crate::common::{self, sha256_hex, Api, Server, REGISTRAR, REGISTRAR_PW};
use crate::oracle::close;
use crate::support::err;
use crate::{ensure, Outcome};

const CODE: &str = "SEN301";
const PW: &str = "scenario-pass-1";

fn at(offset_secs: i64) -> String {
    (Utc::now() + chrono::Duration::seconds(offset_secs)).to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn questions(n: usize, options: usize, points: f64) -> Value {
    (0..n)
        .map(|i| {
            json!({
                "prompt": format!("Question {}", i + 1),
                "options": (0..options).map(|o| format!("option {o}")).collect::<Vec<_>>(),
                "correct_index": i % options,
                "points": points,
            })
        })
        .collect()
}

fn user(api: &Api, reg: &str, username: &str, name: &str, role: &str, dept: &Value) -> String {
    let v = api
        .post(
            "/api/users",
            reg,
            json!({"username": username, "password": PW, "full_name": name,
                   "email": format!("{}@scenario.test", name.to_lowercase().replace(' ', ".")),
                   "phone": "08000000000", "role": role, "department_id": dept}),
        )
        .expect(201, &format!("create {username}"));
    v["id"].as_str().unwrap_or("").to_owned()
}

/// (ca, exam, total, letter) expected for each student.
const EXPECTED: [(&str, f64, f64, f64, &str); 3] = [
    ("BU/24/0001", 27.75, 35.0, 62.75, "B"),
    ("BU/24/0002", 10.0, 0.0, 10.0, "F"),
    ("BU/24/0003", 0.0, 0.0, 0.0, "F"),
];

fn check_grade(who: &str, v: &Value, ca: f64, exam: f64, total: f64, letter: &str) -> Result<(), String> {
    let f = |k: &str| v[k].as_f64().unwrap_or(f64::NAN);
    ensure(
        close(f("ca_score"), ca) && close(f("exam_score"), exam) && close(f("total"), total) && v["letter"] == letter,
        || format!("{who}: got {v}, expected ca {ca} exam {exam} total {total} {letter}"),
    )
}

pub fn run() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    common::bootstrap(dir.path());
    let server = Server::start(dir.path(), &["--self-enrollment", "true"]);
    let api = server.api();

    // Registry.
    let reg = api.login(REGISTRAR, REGISTRAR_PW);
    let fac = api.post("/api/faculties", &reg, json!({"name": "Engineering"})).expect(201, "faculty");
    let dept = api
        .post("/api/departments", &reg, json!({"name": "Software Engineering", "faculty_id": fac["id"]}))
        .expect(201, "department")["id"]
        .clone();
    let lecturer_id = user(&api, &reg, "STF/0500", "Lola Lecturer", "lecturer", &dept);
    let names = ["Student One", "Student Two", "Student Three"];
    let mut student_ids = Vec::new();
    for (i, name) in names.iter().enumerate() {
        student_ids.push(user(&api, &reg, &format!("BU/24/{:04}", i + 1), name, "student", &dept));
    }
    api.post(
        "/api/courses",
        &reg,
        json!({"code": CODE, "title": "Software Testing", "department_id": dept,
               "lecturer_id": lecturer_id, "session": "2024/2025"}),
    )
    .expect(201, "course");

    // Enrollment: one student registers, the registry registers the others.
    let s: Vec<String> = (1..=3).map(|i| api.login(&format!("BU/24/{i:04}"), PW)).collect();
    api.post("/api/me/enrollments", &s[0], json!({"course_code": CODE})).expect(201, "self enrollment");
    for i in 2..=3 {
        api.post("/api/enrollments", &reg, json!({"username": format!("BU/24/{i:04}"), "course_code": CODE}))
            .expect(201, "registry enrollment");
    }
    let mine = api.get("/api/me/courses", &s[0]).expect(200, "my courses");
    ensure(mine[0]["code"] == CODE, || format!("student courses {mine}"))?;

    // Teaching.
    let lect = api.login("STF/0500", PW);
    let notes = b"%PDF-1.4 lecture notes for week one".to_vec();
    let material = api
        .upload(&format!("/api/courses/{CODE}/materials"), &lect, "week1.pdf", notes.clone(), &[("kind", "lecture_material")])
        .expect(201, "upload material");
    let assignment = api
        .post(
            &format!("/api/courses/{CODE}/assignments"),
            &lect,
            json!({"title": "Test plan", "brief": "Write a test plan.", "due_at": at(3600), "max_score": 20.0, "ca_weight": 10.0}),
        )
        .expect(201, "assignment");
    let quiz = api
        .post(
            &format!("/api/courses/{CODE}/assessments"),
            &lect,
            json!({"kind": "quiz", "title": "Quiz 1", "opens_at": at(-60), "closes_at": at(3600),
                   "duration_limit": 30, "questions": questions(4, 4, 2.5), "ca_weight": 20.0}),
        )
        .expect(201, "quiz");
    let exam = api
        .post(
            &format!("/api/courses/{CODE}/assessments"),
            &lect,
            json!({"kind": "exam", "title": "Final", "opens_at": at(-60), "closes_at": at(3600),
                   "questions": questions(10, 2, 1.0)}),
        )
        .expect(201, "exam");
    api.post(
        "/api/notices",
        &lect,
        json!({"scope": {"type": "course", "course_code": CODE}, "title": "Welcome", "body": "Quiz 1 is open."}),
    )
    .expect(201, "notice");
    ensure(quiz["questions"][0].get("correct_index").is_some(), || "lecturer view lacks keys".into())?;

    // Student one: download, submit, quiz full marks, exam half.
    let listed = api.get(&format!("/api/courses/{CODE}/materials"), &s[0]).expect(200, "materials");
    ensure(listed.as_array().is_some_and(|a| a.len() == 1), || format!("materials {listed}"))?;
    let mid = material["id"].as_str().unwrap_or("");
    let d = api.get(&format!("/api/content/{mid}/download"), &s[0]);
    ensure(d.status == 200 && d.body == notes, || format!("download {}", d.status))?;
    ensure(sha256_hex(&d.body) == material["sha256"].as_str().unwrap_or(""), || "material digest".into())?;
    let aid = assignment["id"].as_str().unwrap_or("");
    api.upload(&format!("/api/assignments/{aid}/submissions"), &s[0], "plan.txt", b"my plan".to_vec(), &[("text", "see file")])
        .expect(201, "submission");
    let view = api.get(&format!("/api/assessments/{}", quiz["id"].as_str().unwrap_or("")), &s[0]).expect(200, "quiz view");
    ensure(view["questions"][0].get("correct_index").is_none(), || "student view leaks keys".into())?;
    let qa = api
        .post(&format!("/api/assessments/{}/attempts", quiz["id"].as_str().unwrap_or("")), &s[0], json!({}))
        .expect(201, "start quiz");
    let done = api
        .post(&format!("/api/attempts/{}/submit", qa["id"].as_str().unwrap_or("")), &s[0], json!({"answers": [0, 1, 2, 3]}))
        .expect(200, "submit quiz");
    ensure(done["auto_score"] == 10.0 && done["status"] == "submitted", || format!("quiz attempt {done}"))?;
    let ea = api
        .post(&format!("/api/assessments/{}/attempts", exam["id"].as_str().unwrap_or("")), &s[0], json!({}))
        .expect(201, "start exam");
    let half: Vec<usize> = (0..10).map(|i| if i < 5 { i % 2 } else { 1 - i % 2 }).collect();
    let done = api
        .post(&format!("/api/attempts/{}/submit", ea["id"].as_str().unwrap_or("")), &s[0], json!({"answers": half}))
        .expect(200, "submit exam");
    ensure(done["auto_score"] == 5.0, || format!("exam attempt {done}"))?;
    let again = api.post(&format!("/api/assessments/{}/attempts", quiz["id"].as_str().unwrap_or("")), &s[0], json!({}));
    ensure(again.status == 409 && again.code() == "already_attempted", || format!("second attempt {}", again.text()))?;

    // Student two: downloads twice, autosaves then submits the saved answers.
    for _ in 0..2 {
        let d = api.get(&format!("/api/content/{mid}/download"), &s[1]);
        ensure(d.status == 200, || format!("download {}", d.status))?;
    }
    let qa = api
        .post(&format!("/api/assessments/{}/attempts", quiz["id"].as_str().unwrap_or("")), &s[1], json!({}))
        .expect(201, "start quiz");
    let qa_id = qa["id"].as_str().unwrap_or("");
    api.call(
        reqwest::Method::PATCH,
        &format!("/api/attempts/{qa_id}/answers"),
        Some(&s[1]),
        Some(&json!({"answers": [0, 1, 0, null]})),
    )
    .expect(200, "autosave");
    let done = api.post(&format!("/api/attempts/{qa_id}/submit"), &s[1], json!({})).expect(200, "submit saved");
    ensure(done["auto_score"] == 5.0, || format!("saved answers scored {}", done["auto_score"]))?;

    // Student three: reads notices, classmates and lecturers, changes password.
    let notices = api.get("/api/notices", &s[2]).expect(200, "notices");
    ensure(notices["items"].as_array().is_some_and(|n| n.iter().any(|x| x["title"] == "Welcome")), || {
        format!("notices {notices}")
    })?;
    let mates = api.get(&format!("/api/me/classmates?course={CODE}"), &s[2]).expect(200, "classmates");
    ensure(mates.as_array().is_some_and(|m| m.len() == 2), || format!("classmates {mates}"))?;
    let lecturers = api.get("/api/me/lecturers", &s[2]).expect(200, "lecturers");
    ensure(lecturers[0]["staff_id"] == "STF/0500", || format!("lecturers {lecturers}"))?;
    api.post("/api/password", &s[2], json!({"old_password": PW, "new_password": "a-brand-new-pass"}))
        .expect(204, "change password");
    let s3 = api.login("BU/24/0003", "a-brand-new-pass");

    // Collaboration.
    api.post("/api/messages", &s[0], json!({"to_user": lecturer_id, "subject": "Quiz", "body": "Thanks!"}))
        .expect(201, "message");
    let inbox = api.get("/api/messages", &lect).expect(200, "inbox");
    ensure(inbox["unread"] == 1, || format!("inbox {inbox}"))?;
    api.post(&format!("/api/chat/{CODE}/messages"), &lect, json!({"body": "Office hours at 10"})).expect(201, "chat");
    api.post(&format!("/api/chat/{CODE}/messages"), &s[0], json!({"body": "See you there"})).expect(201, "chat");
    let chat = api.get(&format!("/api/chat/{CODE}/messages?after=0&wait=0"), &s3).expect(200, "chat fetch");
    ensure(chat["last_seq"] == 2, || format!("chat {chat}"))?;

    // Grading.
    let subs = api.get(&format!("/api/assignments/{aid}/submissions"), &lect).expect(200, "submissions");
    let subs = subs.as_array().ok_or("submissions not an array")?;
    ensure(subs.len() == 1, || format!("{} submissions", subs.len()))?;
    let content = subs[0]["content_id"].as_str().ok_or("submission without file")?;
    let f = api.get(&format!("/api/content/{content}/download"), &lect);
    ensure(f.status == 200 && f.body == b"my plan", || format!("submission download {}", f.status))?;
    api.post(&format!("/api/submissions/{}/grade", subs[0]["id"].as_str().unwrap_or("")), &lect, json!({"score": 15.5}))
        .expect(200, "grade");

    // Results and reports.
    for (i, (who, ca, exam, total, letter)) in EXPECTED.iter().enumerate() {
        let token = if i == 2 { &s3 } else { &s[i] };
        let r = api.get("/api/me/results", token).expect(200, "my results");
        ensure(r.as_array().is_some_and(|a| a.len() == 1), || format!("{who} results {r}"))?;
        check_grade(who, &r[0], *ca, *exam, *total, letter)?;
    }
    let results = api.get(&format!("/api/courses/{CODE}/results"), &lect).expect(200, "course results");
    for (i, (who, ca, exam, total, letter)) in EXPECTED.iter().enumerate() {
        check_grade(who, &results[i], *ca, *exam, *total, letter)?;
    }
    let report = api.get(&format!("/api/courses/{CODE}/report.json"), &reg).expect(200, "report");
    let progress = [(1, 1, 1), (1, 0, 1), (0, 0, 0)];
    for (i, (who, ca, exam, total, letter)) in EXPECTED.iter().enumerate() {
        let row = &report["rows"][i];
        let (dl, sub, quiz) = progress[i];
        ensure(
            row["matric"] == *who
                && row["materials_downloaded"] == dl
                && row["assignments_submitted"] == sub
                && row["assignments_total"] == 1
                && row["quizzes_taken"] == quiz
                && row["quizzes_total"] == 1,
            || format!("report row {row}"),
        )?;
        check_grade(who, row, *ca, *exam, *total, letter)?;
    }
    let csv = api.get(&format!("/api/courses/{CODE}/report.csv"), &lect);
    let want = "matric,name,materials_downloaded,assignments_submitted,assignments_total,quizzes_taken,quizzes_total,ca,exam,total,letter\n\
                BU/24/0001,Student One,1,1,1,1,1,27.75,35,62.75,B\n\
                BU/24/0002,Student Two,1,0,1,1,1,10,0,10,F\n\
                BU/24/0003,Student Three,0,0,1,0,1,0,0,0,F\n";
    ensure(csv.status == 200 && csv.text() == want, || format!("csv {}:\n{}", csv.status, csv.text()))?;

    // Sign out: the token stops working.
    api.call(reqwest::Method::POST, "/api/logout", Some(&s3), None).expect(204, "logout");
    let gone = api.get("/api/me/courses", &s3);
    ensure(gone.status == 401, || format!("token after logout: {}", gone.status))?;

    let status = server.terminate();
    ensure(status.success(), || format!("server exit {status}"))?;
    Ok("registry, enrollment, material, assignment, quiz, exam, notice, chat, message, grading; \
        results, course results, JSON and CSV reports match the scripted expectations"
        .into())
}
