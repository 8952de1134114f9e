//! Application services. Every operation takes the calling [`Principal`],
//! checks the permission matrix plus ownership, and runs its writes in one
//! store transaction.

mod accounts;
mod assessment;
mod collab;
mod content;
mod learning;

use std::collections::HashMap;
use std::sync::Arc;

use chrono::Duration;
use parking_lot::Mutex;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use tokio::sync::watch;

pub use accounts::{EnrollmentRequest, LoginGrant, NewCourse, NewDepartment, NewUser, UserView};
pub use assessment::{
    score_answers, AssessmentSpec, AssessmentView, AssignmentInput, GradeResult, QuestionView,
    SubmissionInput,
};
pub(crate) use assessment::grade_result;
pub use collab::{InboxPage, MessageInput, NoticeInput, ScopeInput};
pub use content::{BookInput, Download, TimetableInput, Upload};
pub use learning::{ClassmateView, CourseView, LecturerView};

use crate::auth::{HashCost, LoginLimiter, PasswordHasher, Principal, ResourceContext};
use crate::blob::BlobStore;
use crate::config::Config;
use crate::domain::Role;
use crate::error::{CoreError, CoreResult};
use crate::model::{Course, Enrollment, User};
use crate::store::{Id, Query, Read, Store, Stored};
use crate::time::Timestamp;

pub const MAX_BODY_CHARS: usize = 10_000;

#[derive(Debug, Clone)]
pub struct Settings {
    pub session_ttl: Duration,
    pub max_upload_bytes: u64,
    pub self_enrollment: bool,
    pub hash_cost: HashCost,
}

impl Default for Settings {
    fn default() -> Self {
        Settings::from_config(&Config::default())
    }
}

impl Settings {
    pub fn from_config(config: &Config) -> Self {
        Settings {
            session_ttl: Duration::hours(i64::from(config.session_ttl_hours)),
            max_upload_bytes: config.max_upload_bytes(),
            self_enrollment: config.self_enrollment,
            hash_cost: HashCost::default(),
        }
    }
}

/// Requested page; `per_page` defaults to 25 and is capped at 100.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
pub struct PageRequest {
    pub page: Option<usize>,
    pub per_page: Option<usize>,
}

impl PageRequest {
    pub const DEFAULT_PER_PAGE: usize = 25;
    pub const MAX_PER_PAGE: usize = 100;

    pub fn resolve(&self) -> (usize, usize) {
        let page = self.page.unwrap_or(1).max(1);
        let per_page = self
            .per_page
            .unwrap_or(Self::DEFAULT_PER_PAGE)
            .clamp(1, Self::MAX_PER_PAGE);
        (page, per_page)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Paged<T> {
    pub items: Vec<T>,
    pub page: usize,
    pub per_page: usize,
    pub total: usize,
}

impl<T> Paged<T> {
    pub fn slice(all: Vec<T>, req: PageRequest) -> Paged<T> {
        let (page, per_page) = req.resolve();
        let total = all.len();
        let items = all
            .into_iter()
            .skip((page - 1).saturating_mul(per_page))
            .take(per_page)
            .collect();
        Paged {
            items,
            page,
            per_page,
            total,
        }
    }
}

/// The whole service: store, blobs, credentials and chat wake-ups.
pub struct Citadel {
    store: Store,
    blobs: Arc<BlobStore>,
    settings: Settings,
    hasher: PasswordHasher,
    limiter: LoginLimiter,
    salts: Mutex<ChaCha20Rng>,
    rooms: Mutex<HashMap<Id, watch::Sender<u64>>>,
}

impl std::fmt::Debug for Citadel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Citadel")
            .field("data_dir", &self.store.dir())
            .field("settings", &self.settings)
            .finish_non_exhaustive()
    }
}

impl Citadel {
    pub fn new(store: Store, blobs: Arc<BlobStore>, settings: Settings) -> Citadel {
        Citadel {
            hasher: PasswordHasher::new(settings.hash_cost),
            store,
            blobs,
            settings,
            limiter: LoginLimiter::default(),
            salts: Mutex::new(ChaCha20Rng::from_entropy()),
            rooms: Mutex::new(HashMap::new()),
        }
    }

    /// Makes subsequent password salts reproducible, for deterministic fixtures.
    pub fn reseed_salts(&self, seed: u64) {
        *self.salts.lock() = ChaCha20Rng::seed_from_u64(seed);
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn blobs(&self) -> &BlobStore {
        &self.blobs
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    pub fn now(&self) -> Timestamp {
        self.store.clock().now()
    }

    fn salt(&self) -> [u8; 16] {
        let mut salt = [0u8; 16];
        self.salts.lock().fill_bytes(&mut salt);
        salt
    }

    /// A principal for `user_id` without a login session. Used by trusted
    /// operator paths such as fixture loading.
    pub fn act_as(&self, user_id: &Id) -> CoreResult<Principal> {
        let user = live_user(&self.store.snapshot(), user_id)?;
        Ok(Principal {
            user_id: user.id.clone(),
            role: user.role,
            is_library: user.is_library,
            session_id: Id::from("operator"),
        })
    }

    /// Watch channel carrying the latest chat seq of a course room.
    pub fn chat_subscribe(&self, course_id: &Id) -> watch::Receiver<u64> {
        self.rooms
            .lock()
            .entry(course_id.clone())
            .or_insert_with(|| watch::channel(0).0)
            .subscribe()
    }

    fn chat_notify(&self, course_id: &Id, seq: u64) {
        if let Some(tx) = self.rooms.lock().get(course_id) {
            tx.send_replace(seq);
        }
    }
}

pub(crate) fn live_user(snap: &impl Read, id: &Id) -> CoreResult<Stored<User>> {
    match snap.get::<User>(id) {
        Ok(u) if !u.deleted => Ok(u),
        _ => Err(CoreError::not_found(format!("user {id}"))),
    }
}

/// Resolves a course code to its course in `session`, or in the latest
/// session offering it.
pub(crate) fn find_course(snap: &impl Read, code: &str, session: Option<&str>) -> CoreResult<Stored<Course>> {
    let mut q = Query::new().eq("code", code).eq("deleted", false);
    if let Some(s) = session {
        q = q.eq("session", s);
    }
    let mut found: Vec<Stored<Course>> = snap.query(&q)?;
    found.sort_by(|a, b| a.session.cmp(&b.session));
    found
        .pop()
        .ok_or_else(|| CoreError::not_found(format!("course {code}")))
}

pub(crate) fn live_course(snap: &impl Read, id: &Id) -> CoreResult<Stored<Course>> {
    match snap.get::<Course>(id) {
        Ok(c) if !c.deleted => Ok(c),
        _ => Err(CoreError::not_found(format!("course {id}"))),
    }
}

pub(crate) fn is_enrolled(snap: &impl Read, student_id: &Id, course_id: &Id) -> bool {
    snap.find_unique::<Enrollment>("student_course", &format!("{student_id}|{course_id}"))
        .is_some()
}

/// Enrolled student or teaching lecturer.
pub(crate) fn is_member(snap: &impl Read, p: &Principal, course: &Stored<Course>) -> bool {
    match p.role {
        Role::Student => is_enrolled(snap, &p.user_id, &course.id),
        Role::Lecturer => course.lecturer_id == p.user_id,
        Role::Registrar => false,
    }
}

pub(crate) fn course_ctx<'a>(snap: &impl Read, p: &Principal, course: &'a Stored<Course>) -> ResourceContext<'a> {
    ResourceContext::Course {
        lecturer_id: &course.lecturer_id,
        enrolled: p.role == Role::Student && is_enrolled(snap, &p.user_id, &course.id),
    }
}

pub(crate) fn non_empty(field: &str, value: &str) -> CoreResult<String> {
    let v = value.trim();
    if v.is_empty() {
        Err(CoreError::Validation(format!("{field} must not be empty")))
    } else {
        Ok(v.to_owned())
    }
}
