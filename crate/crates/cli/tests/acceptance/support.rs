//! In-process service setup shared by the criteria that drive the core
//! directly under a manual clock.

use std::fmt::Display;
use std::path::Path;
use std::sync::Arc;

use citadel_core::auth::{HashCost, Principal};
use citadel_core::blob::BlobStore;
use citadel_core::domain::Role;
use citadel_core::model::{AssessmentKind, Course, Question};
use citadel_core::service::{AssessmentSpec, EnrollmentRequest, NewCourse, NewDepartment, NewUser, Settings};
use citadel_core::store::{Id, Store, StoreOptions, Stored};
use citadel_core::time::{ManualClock, Timestamp};
use citadel_core::Citadel;

pub const PW: &str = "acceptance-pass";

pub fn err(e: impl Display) -> String {
    e.to_string()
}

pub fn settings() -> Settings {
    Settings {
        hash_cost: HashCost::light(),
        ..Settings::default()
    }
}

pub fn in_memory(clock: &Arc<ManualClock>) -> Citadel {
    Citadel::new(Store::in_memory(clock.clone()), Arc::new(BlobStore::in_memory()), settings())
}

pub fn on_disk(dir: &Path, clock: &Arc<ManualClock>) -> Result<Citadel, String> {
    let store = Store::open(dir, clock.clone(), StoreOptions { sync: false }).map_err(err)?;
    Ok(Citadel::new(store, Arc::new(BlobStore::in_memory()), settings()))
}

pub fn registrar(c: &Citadel) -> Result<Principal, String> {
    let u = c.bootstrap_registrar("STF/0001", PW, "Registrar").map_err(err)?;
    c.act_as(&u.id).map_err(err)
}

/// A registrar, one faculty and one department.
pub struct Campus<'a> {
    pub c: &'a Citadel,
    pub reg: Principal,
    pub dept: Id,
}

impl<'a> Campus<'a> {
    pub fn new(c: &'a Citadel) -> Result<Campus<'a>, String> {
        let reg = registrar(c)?;
        let fac = c.create_faculty(&reg, "Science").map_err(err)?.id;
        let dept = c
            .create_department(&reg, NewDepartment { name: "Computing".into(), faculty_id: fac })
            .map_err(err)?
            .id;
        Ok(Campus { c, reg, dept })
    }

    pub fn user(&self, username: &str, role: Role) -> Result<Principal, String> {
        let u = self.c.create_user(&self.reg, new_user(username, role, &self.dept)).map_err(err)?;
        self.c.act_as(&u.id).map_err(err)
    }

    pub fn course(&self, code: &str, lecturer: &Principal) -> Result<Stored<Course>, String> {
        self.c
            .create_course(
                &self.reg,
                NewCourse {
                    code: code.into(),
                    title: format!("{code} course"),
                    department_id: self.dept.clone(),
                    lecturer_id: lecturer.user_id.clone(),
                    session: "2023/2024".into(),
                    syllabus: vec![],
                },
            )
            .map_err(err)
    }

    pub fn enroll(&self, student: &Id, code: &str) -> Result<(), String> {
        enroll(self.c, &self.reg, student, code)
    }
}

pub fn new_user(username: &str, role: Role, dept: &Id) -> NewUser {
    NewUser {
        username: username.into(),
        password: PW.into(),
        full_name: format!("User {username}"),
        email: String::new(),
        phone: String::new(),
        role,
        department_id: Some(dept.clone()),
        is_library: false,
    }
}

pub fn enroll(c: &Citadel, reg: &Principal, student: &Id, code: &str) -> Result<(), String> {
    c.enroll(
        reg,
        EnrollmentRequest {
            student_id: Some(student.clone()),
            course_code: code.into(),
            ..Default::default()
        },
    )
    .map(|_| ())
    .map_err(err)
}

/// A quiz of `n` one-point questions with keys cycling through three options.
pub fn quiz(opens_at: Timestamp, closes_at: Timestamp, duration_limit: Option<u32>, n: usize, ca_weight: f64) -> AssessmentSpec {
    AssessmentSpec {
        kind: AssessmentKind::Quiz,
        title: "Timed quiz".into(),
        opens_at,
        closes_at,
        duration_limit,
        questions: (0..n)
            .map(|i| Question {
                prompt: format!("Question {}", i + 1),
                options: vec!["a".into(), "b".into(), "c".into()],
                correct_index: i % 3,
                points: 1.0,
            })
            .collect(),
        points_total: None,
        ca_weight: Some(ca_weight),
    }
}
