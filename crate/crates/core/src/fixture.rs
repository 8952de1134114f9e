//! Named deterministic fixtures for demos and acceptance runs.
//!
//! Loading a fixture drives the ordinary service operations under a manual
//! clock and fixed random seeds, so two loads into equal stores produce equal
//! dumps.

use chrono::{Duration, NaiveDate, NaiveTime};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::auth::Principal;
use crate::domain::{Activity, Role};
use crate::error::{CoreError, CoreResult};
use crate::model::{AssessmentKind, ContentKind, Course, Question, User};
use crate::service::{
    AssessmentSpec, AssignmentInput, BookInput, Citadel, EnrollmentRequest, MessageInput,
    NewCourse, NewDepartment, NewUser, NoticeInput, ScopeInput, SubmissionInput, TimetableInput,
    Upload,
};
use crate::store::{Id, Order, Query, Read, Stored};
use crate::time::{ManualClock, Timestamp};

pub const FIXTURES: &[&str] = &["demo"];

/// Password of every account the demo fixture creates.
pub const DEMO_PASSWORD: &str = "citadel-demo-pass";
pub const DEMO_SESSION: &str = "2023/2024";
const DEMO_SEED: u64 = 0x00C1_7ADE;

/// Clock position the demo fixture starts from.
pub fn demo_epoch() -> Timestamp {
    Timestamp::ymd_hms(2024, 1, 8, 8, 0, 0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SeedSummary {
    pub fixture: String,
    pub already_present: bool,
    pub faculties: usize,
    pub departments: usize,
    pub lecturers: usize,
    pub students: usize,
    pub courses: usize,
}

const LECTURERS: &[(&str, &str, usize)] = &[
    ("STF/0101", "Adaeze Okonkwo", 0),
    ("STF/0102", "Babatunde Adeyemi", 0),
    ("STF/0103", "Chinwe Eze", 1),
    ("STF/0104", "Danladi Musa", 2),
];

/// (code, title, department index, lecturer index)
const COURSES: &[(&str, &str, usize, usize)] = &[
    ("COS101", "Introduction to Computer Science", 0, 0),
    ("COS201", "Data Structures", 0, 1),
    ("GST101", "Use of English", 0, 0),
    ("MTH101", "Elementary Mathematics I", 1, 2),
    ("MTH201", "Linear Algebra", 1, 2),
    ("ACC101", "Principles of Accounting", 2, 3),
];

const FIRST_NAMES: &[&str] = &[
    "Amaka", "Bola", "Chidi", "Dayo", "Emeka", "Funmi", "Gbenga", "Halima", "Ifeoma", "Jide",
    "Kemi", "Lanre", "Musa", "Ngozi", "Obinna", "Pelumi", "Rukayat", "Segun", "Tobi", "Uche",
];

const LAST_NAMES: &[&str] = &[
    "Abiodun", "Bello", "Chukwu", "Danjuma", "Effiong", "Fashola", "Garba", "Ibekwe", "Jimoh",
    "Kalu", "Lawal", "Nwosu", "Ogunleye", "Okafor", "Suleiman", "Usman",
];

const BOOKS: &[(&str, &str, Option<&str>, &str, i64)] = &[
    ("Algorithms Unlocked", "Thomas H. Cormen", Some("9780262518802"), "QA76 C67", 3),
    ("Introduction to Linear Algebra", "Gilbert Strang", Some("9780980232776"), "QA184 S77", 2),
    ("Frank Wood's Business Accounting", "Frank Wood", None, "HF5635 W86", 4),
    ("Things Fall Apart", "Chinua Achebe", Some("9780385474542"), "PR9387 A3", 5),
    ("The C Programming Language", "Brian W. Kernighan", Some("9780131103627"), "QA76.73 C15", 2),
];

struct Run<'a> {
    citadel: &'a Citadel,
    clock: &'a ManualClock,
    rng: ChaCha8Rng,
}

impl Run<'_> {
    fn tick(&mut self) {
        self.clock.advance(Duration::seconds(1));
    }

    fn at(&mut self, t: Timestamp) {
        self.clock.set(t);
    }

    fn user(&mut self, by: &Principal, username: &str, name: &str, role: Role, dept: &Id, i: usize) -> CoreResult<Id> {
        self.tick();
        let slug = name.to_lowercase().replace(' ', ".");
        Ok(self
            .citadel
            .create_user(
                by,
                NewUser {
                    username: username.into(),
                    password: DEMO_PASSWORD.into(),
                    full_name: name.into(),
                    email: format!("{slug}@citadel.example"),
                    phone: format!("+234 803 {:03} {:04}", 100 + i, 1000 + i * 7),
                    role,
                    department_id: Some(dept.clone()),
                    is_library: false,
                },
            )?
            .id)
    }

    fn questions(&mut self, n: usize, points: f64, topic: &str) -> Vec<Question> {
        (0..n)
            .map(|i| {
                let options = self.rng.gen_range(3..=5);
                Question {
                    prompt: format!("{topic}: question {}", i + 1),
                    options: (0..options).map(|o| format!("Option {}", (b'A' + o as u8) as char)).collect(),
                    correct_index: self.rng.gen_range(0..options),
                    points,
                }
            })
            .collect()
    }

    fn answers(&mut self, questions: &[Question], skill: f64) -> Vec<Option<usize>> {
        questions
            .iter()
            .map(|q| {
                let r: f64 = self.rng.gen();
                if r < skill {
                    Some(q.correct_index)
                } else if r < skill + 0.15 {
                    None
                } else {
                    Some(self.rng.gen_range(0..q.options.len()))
                }
            })
            .collect()
    }
}

fn first_registrar(citadel: &Citadel) -> CoreResult<Principal> {
    let regs: Vec<Stored<User>> = citadel.store().query(
        &Query::new()
            .eq("role", Role::Registrar)
            .eq("deleted", false)
            .sort("username", Order::Asc)
            .limit(1),
    )?;
    let reg = regs.first().ok_or_else(|| {
        CoreError::Validation("no registrar exists; run bootstrap first".into())
    })?;
    citadel.act_as(&reg.id)
}

/// Loads fixture `name`. A second load of the same fixture changes nothing.
pub fn seed(citadel: &Citadel, clock: &ManualClock, name: &str) -> CoreResult<SeedSummary> {
    if !FIXTURES.contains(&name) {
        return Err(CoreError::UnknownFixture(name.to_owned()));
    }
    let registrar = first_registrar(citadel)?;
    let present = citadel
        .store()
        .snapshot()
        .find_unique::<Course>("code_session", &format!("COS101|{DEMO_SESSION}"))
        .is_some();
    let mut summary = SeedSummary {
        fixture: name.to_owned(),
        already_present: present,
        faculties: 2,
        departments: 3,
        lecturers: LECTURERS.len(),
        students: 30,
        courses: COURSES.len(),
    };
    if present {
        return Ok(summary);
    }
    citadel.reseed_salts(DEMO_SEED);
    let mut run = Run {
        citadel,
        clock,
        rng: ChaCha8Rng::seed_from_u64(DEMO_SEED),
    };
    run.at(demo_epoch());
    demo(&mut run, &registrar)?;
    summary.already_present = false;
    Ok(summary)
}

fn demo(run: &mut Run<'_>, registrar: &Principal) -> CoreResult<()> {
    let c = run.citadel;

    // Registry.
    let science = c.create_faculty(registrar, "Science")?.id;
    run.tick();
    let management = c.create_faculty(registrar, "Management Sciences")?.id;
    let mut departments = Vec::new();
    for (name, faculty) in [
        ("Computer Science", &science),
        ("Mathematics", &science),
        ("Accounting", &management),
    ] {
        run.tick();
        departments.push(
            c.create_department(
                registrar,
                NewDepartment {
                    name: name.into(),
                    faculty_id: faculty.clone(),
                },
            )?
            .id,
        );
    }

    let mut lecturers = Vec::new();
    for (i, (username, name, dept)) in LECTURERS.iter().enumerate() {
        let id = run.user(registrar, username, name, Role::Lecturer, &departments[*dept], i)?;
        lecturers.push(c.act_as(&id)?);
    }

    let mut used = std::collections::BTreeSet::new();
    let mut students = Vec::new();
    for i in 0..30 {
        let name = loop {
            let first = FIRST_NAMES.choose(&mut run.rng).expect("non-empty");
            let last = LAST_NAMES.choose(&mut run.rng).expect("non-empty");
            let n = format!("{first} {last}");
            if used.insert(n.clone()) {
                break n;
            }
        };
        let dept = run.rng.gen_range(0..departments.len());
        let matric = format!("BU/23/{:04}", i + 1);
        let id = run.user(registrar, &matric, &name, Role::Student, &departments[dept], 10 + i)?;
        students.push((c.act_as(&id)?, dept));
    }

    let mut courses = Vec::new();
    for (code, title, dept, lecturer) in COURSES {
        run.tick();
        let course = c.create_course(
            registrar,
            NewCourse {
                code: (*code).into(),
                title: (*title).into(),
                department_id: departments[*dept].clone(),
                lecturer_id: lecturers[*lecturer].user_id.clone(),
                session: DEMO_SESSION.into(),
                syllabus: Vec::new(),
            },
        )?;
        courses.push((course, *lecturer));
    }

    // Enrollment: every student takes the general course, the courses of
    // their own department, and sometimes one elective.
    let mut enrolled: Vec<Vec<usize>> = vec![Vec::new(); courses.len()];
    for (si, (_, dept)) in students.iter().enumerate() {
        let mut picks: Vec<usize> = COURSES
            .iter()
            .enumerate()
            .filter(|(_, (code, _, d, _))| *code == "GST101" || *d == *dept)
            .map(|(i, _)| i)
            .collect();
        if run.rng.gen_bool(0.5) {
            let extra = run.rng.gen_range(0..COURSES.len());
            if !picks.contains(&extra) {
                picks.push(extra);
            }
        }
        picks.sort_unstable();
        for ci in picks {
            run.tick();
            c.enroll(
                registrar,
                EnrollmentRequest {
                    student_id: Some(students[si].0.user_id.clone()),
                    course_code: courses[ci].0.code.clone(),
                    ..Default::default()
                },
            )?;
            enrolled[ci].push(si);
        }
    }

    // Authoring.
    let quiz_opens = Timestamp::ymd_hms(2024, 1, 10, 9, 0, 0);
    let quiz_closes = Timestamp::ymd_hms(2024, 1, 12, 17, 0, 0);
    let exam_opens = Timestamp::ymd_hms(2024, 2, 1, 9, 0, 0);
    let exam_closes = Timestamp::ymd_hms(2024, 2, 1, 12, 0, 0);
    let due = Timestamp::ymd_hms(2024, 1, 20, 23, 59, 59);
    let mut quizzes = Vec::new();
    let mut exams = Vec::new();
    let mut assignments = Vec::new();
    let mut materials = Vec::new();
    for (course, li) in &courses {
        let lecturer = &lecturers[*li];
        let code = course.code.as_str();
        run.tick();
        c.set_syllabus(
            lecturer,
            code,
            (1..=4)
                .map(|w| format!("Week {w}: {} topic {w}", course.title))
                .collect(),
        )?;
        let mut items = Vec::new();
        for n in 1..=2 {
            run.tick();
            let len = run.rng.gen_range(2_000..20_000);
            let mut bytes = vec![0u8; len];
            run.rng.fill(bytes.as_mut_slice());
            let item = c.upload_material(
                lecturer,
                code,
                Upload {
                    filename: format!("{}-lecture-{n}.pdf", code.to_lowercase()),
                    media_type: Some("application/pdf".into()),
                    kind: Some(ContentKind::LectureMaterial),
                    bytes,
                    sha256: None,
                },
            )?;
            items.push(item.id);
        }
        run.tick();
        let brief = c.upload_material(
            lecturer,
            code,
            Upload {
                filename: format!("{}-assignment-1.txt", code.to_lowercase()),
                media_type: Some("text/plain".into()),
                kind: Some(ContentKind::AssignmentBrief),
                bytes: format!("Assignment 1 for {code}: answer all questions.\n").into_bytes(),
                sha256: None,
            },
        )?;
        items.push(brief.id.clone());
        materials.push(items);

        run.tick();
        let questions = run.questions(5, 2.0, code);
        quizzes.push(c.create_assessment(
            lecturer,
            code,
            AssessmentSpec {
                kind: AssessmentKind::Quiz,
                title: format!("{code} Quiz 1"),
                opens_at: quiz_opens,
                closes_at: quiz_closes,
                duration_limit: Some(30),
                questions,
                points_total: None,
                ca_weight: Some(15.0),
            },
        )?);
        run.tick();
        let questions = run.questions(10, 1.0, code);
        exams.push(c.create_assessment(
            lecturer,
            code,
            AssessmentSpec {
                kind: AssessmentKind::Exam,
                title: format!("{code} Examination"),
                opens_at: exam_opens,
                closes_at: exam_closes,
                duration_limit: Some(120),
                questions,
                points_total: None,
                ca_weight: None,
            },
        )?);
        run.tick();
        assignments.push(c.create_assignment(
            lecturer,
            code,
            AssignmentInput {
                title: format!("{code} Assignment 1"),
                brief: "See the attached brief.".into(),
                brief_content_id: Some(brief.id),
                due_at: due,
                max_score: 20.0,
                ca_weight: 15.0,
            },
        )?);

        for (day, start, end, activity, venue) in [
            (15, (8, 0), (10, 0), Activity::Lecture, "Lecture Theatre 1"),
            (11, (9, 0), (9, 30), Activity::Quiz, "Online"),
            (18, (14, 0), (15, 0), Activity::LiveSession, "Online"),
        ] {
            run.tick();
            let shift = (courses.iter().position(|(x, _)| x.id == course.id).unwrap_or(0)) as u32;
            c.create_timetable_entry(
                lecturer,
                TimetableInput {
                    course_code: code.into(),
                    session: None,
                    date: NaiveDate::from_ymd_opt(2024, 1, day).expect("valid day"),
                    start: NaiveTime::from_hms_opt(start.0 + shift % 3, start.1, 0).expect("valid time"),
                    end: NaiveTime::from_hms_opt(end.0 + shift % 3, end.1, 0).expect("valid time"),
                    activity,
                    venue: venue.into(),
                },
            )?;
        }
    }

    for (title, author, isbn, location, copies) in BOOKS {
        run.tick();
        c.add_book(
            registrar,
            BookInput {
                title: (*title).into(),
                author: (*author).into(),
                isbn: isbn.map(str::to_owned),
                location: (*location).into(),
                copies_total: *copies,
            },
        )?;
    }

    run.tick();
    c.post_notice(
        registrar,
        NoticeInput {
            scope: ScopeInput::All,
            title: "Welcome to the 2023/2024 session".into(),
            body: "Course registration closes on 19 January.".into(),
        },
    )?;
    run.tick();
    c.post_notice(
        registrar,
        NoticeInput {
            scope: ScopeInput::Department {
                department_id: departments[0].clone(),
            },
            title: "Computer Science departmental meeting".into(),
            body: "All staff and students, Friday 14:00.".into(),
        },
    )?;
    for (course, li) in &courses {
        run.tick();
        c.post_notice(
            &lecturers[*li],
            NoticeInput {
                scope: ScopeInput::Course {
                    course_code: course.code.clone(),
                    session: None,
                },
                title: format!("{} quiz reminder", course.code),
                body: "Quiz 1 opens on 10 January and lasts 30 minutes.".into(),
            },
        )?;
    }

    // Student activity: downloads before the quiz window.
    run.at(Timestamp::ymd_hms(2024, 1, 9, 10, 0, 0));
    for (ci, roster) in enrolled.iter().enumerate() {
        for &si in roster {
            for item in &materials[ci] {
                if run.rng.gen_bool(0.6) {
                    run.tick();
                    c.download(&students[si].0, item)?;
                }
            }
        }
    }

    // Quizzes: most submit, some leave the attempt running until it expires.
    run.at(Timestamp::ymd_hms(2024, 1, 10, 10, 0, 0));
    for (ci, roster) in enrolled.iter().enumerate() {
        let quiz = &quizzes[ci];
        let questions = stored_questions(c, &quiz.id)?;
        for &si in roster {
            if !run.rng.gen_bool(0.8) {
                continue;
            }
            let student = &students[si].0;
            run.tick();
            let attempt = c.start_attempt(student, &quiz.id)?;
            let skill = run.rng.gen_range(0.3..0.95);
            let answers = run.answers(&questions, skill);
            run.tick();
            c.save_answers(student, &attempt.id, answers)?;
            if run.rng.gen_bool(0.85) {
                run.tick();
                c.submit_attempt(student, &attempt.id, None)?;
            }
        }
    }

    // Assignments and grading.
    run.at(Timestamp::ymd_hms(2024, 1, 16, 12, 0, 0));
    let mut submissions = Vec::new();
    for (ci, roster) in enrolled.iter().enumerate() {
        for &si in roster {
            if !run.rng.gen_bool(0.7) {
                continue;
            }
            run.tick();
            let student = &students[si].0;
            let file = run.rng.gen_bool(0.5).then(|| Upload {
                filename: format!("{}-answers.txt", courses[ci].0.code.to_lowercase()),
                media_type: Some("text/plain".into()),
                kind: None,
                bytes: format!("Answers from student {} for {}\n", si + 1, courses[ci].0.code)
                    .into_bytes(),
                sha256: None,
            });
            let s = c.submit_assignment(
                student,
                &assignments[ci].id,
                SubmissionInput {
                    text: Some(format!("Submission by student {}", si + 1)),
                    file,
                },
            )?;
            submissions.push((ci, s.id));
        }
    }
    run.at(Timestamp::ymd_hms(2024, 1, 22, 9, 0, 0));
    for (ci, sub) in &submissions {
        if run.rng.gen_bool(0.8) {
            run.tick();
            let score = f64::from(run.rng.gen_range(16..=40u32)) / 2.0;
            c.grade_submission(&lecturers[courses[*ci].1], sub, score)?;
        }
    }

    // Examinations.
    run.at(Timestamp::ymd_hms(2024, 2, 1, 9, 30, 0));
    for (ci, roster) in enrolled.iter().enumerate() {
        let exam = &exams[ci];
        let questions = stored_questions(c, &exam.id)?;
        for &si in roster {
            if !run.rng.gen_bool(0.9) {
                continue;
            }
            let student = &students[si].0;
            run.tick();
            let attempt = c.start_attempt(student, &exam.id)?;
            let skill = run.rng.gen_range(0.35..0.95);
            let answers = run.answers(&questions, skill);
            run.tick();
            c.submit_attempt(student, &attempt.id, Some(answers))?;
        }
    }

    // Conversation.
    let cos101 = &courses[0].0;
    for (n, &si) in enrolled[0].iter().take(4).enumerate() {
        run.tick();
        c.chat_post(
            &students[si].0,
            &cos101.code,
            &format!("Has anyone started question {}?", n + 1),
        )?;
    }
    run.tick();
    c.chat_post(&lecturers[0], &cos101.code, "Office hours are Thursday 10:00.")?;
    if let Some(&si) = enrolled[0].first() {
        run.tick();
        c.send_message(
            &students[si].0,
            MessageInput {
                to_user: lecturers[0].user_id.clone(),
                subject: "Quiz 1".into(),
                body: "Could you explain question 3?".into(),
            },
        )?;
        run.tick();
        c.send_message(
            &lecturers[0],
            MessageInput {
                to_user: students[si].0.user_id.clone(),
                subject: "Re: Quiz 1".into(),
                body: "Come to office hours on Thursday.".into(),
            },
        )?;
    }
    Ok(())
}

fn stored_questions(c: &Citadel, assessment: &Id) -> CoreResult<Vec<Question>> {
    Ok(c
        .store()
        .get::<crate::model::Assessment>(assessment)?
        .value
        .questions)
}
