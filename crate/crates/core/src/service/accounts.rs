use serde::{Deserialize, Serialize};

use super::{find_course, live_user, non_empty, Citadel, PageRequest, Paged};
use crate::auth::{
    authorize, new_session_token, token_digest, Capability, Principal, ResourceContext,
    MIN_PASSWORD_LEN,
};
use crate::domain::{is_course_code, is_session_label, validate_identity, Role};
use crate::error::{CoreError, CoreResult};
use crate::model::{Course, Department, Enrollment, Faculty, SessionRecord, User};
use crate::store::{Id, Kind, Order, Query, Read, Stored};
use crate::time::Timestamp;

/// A user as shown over the API; never carries the password digest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserView {
    pub id: Id,
    pub username: String,
    pub full_name: String,
    pub email: String,
    pub phone: String,
    pub role: Role,
    pub department_id: Option<Id>,
    pub is_library: bool,
}

impl From<&Stored<User>> for UserView {
    fn from(u: &Stored<User>) -> Self {
        UserView {
            id: u.id.clone(),
            username: u.username.clone(),
            full_name: u.full_name.clone(),
            email: u.email.clone(),
            phone: u.phone.clone(),
            role: u.role,
            department_id: u.department_id.clone(),
            is_library: u.is_library,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LoginGrant {
    pub token: String,
    pub expires_at: Timestamp,
    pub user: UserView,
}

#[derive(Debug, Clone, Deserialize)]
pub struct NewUser {
    pub username: String,
    pub password: String,
    pub full_name: String,
    #[serde(default)]
    pub email: String,
    #[serde(default)]
    pub phone: String,
    pub role: Role,
    #[serde(default)]
    pub department_id: Option<Id>,
    #[serde(default)]
    pub is_library: bool,
}

#[derive(Debug, Clone, Deserialize)]
pub struct NewDepartment {
    pub name: String,
    pub faculty_id: Id,
}

#[derive(Debug, Clone, Deserialize)]
pub struct NewCourse {
    pub code: String,
    pub title: String,
    pub department_id: Id,
    pub lecturer_id: Id,
    pub session: String,
    #[serde(default)]
    pub syllabus: Vec<String>,
}

/// Registry enrollment names the student by id or username; self-enrollment
/// leaves both empty.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct EnrollmentRequest {
    #[serde(default)]
    pub student_id: Option<Id>,
    #[serde(default)]
    pub username: Option<String>,
    pub course_code: String,
    #[serde(default)]
    pub session: Option<String>,
}

fn check_password_policy(password: &str) -> CoreResult<()> {
    if password.chars().count() < MIN_PASSWORD_LEN {
        Err(CoreError::WeakPassword)
    } else {
        Ok(())
    }
}

fn identity_error(e: crate::domain::IdentityError) -> CoreError {
    CoreError::InvalidIdentity { reason: e.reason() }
}

impl Citadel {
    /// Creates the first registrar. Fails once any registrar exists.
    pub fn bootstrap_registrar(&self, username: &str, password: &str, full_name: &str) -> CoreResult<UserView> {
        validate_identity(username, Role::Registrar).map_err(identity_error)?;
        check_password_policy(password)?;
        let digest = self.hasher.hash(password, &self.salt());
        let user = User {
            username: username.to_owned(),
            password_digest: digest,
            full_name: full_name.trim().to_owned(),
            email: String::new(),
            phone: String::new(),
            role: Role::Registrar,
            department_id: None,
            is_library: false,
            deleted: false,
        };
        let id = self.store.atomically(|tx| -> CoreResult<Id> {
            if tx.count(Kind::User, &Query::new().eq("role", Role::Registrar))? > 0 {
                return Err(CoreError::AlreadyBootstrapped);
            }
            Ok(tx.insert(&user)?)
        })?;
        Ok(UserView::from(&self.store.get::<User>(&id)?))
    }

    /// Issues a session. Unknown users and wrong passwords fail identically.
    pub fn login(&self, username: &str, password: &str) -> CoreResult<LoginGrant> {
        let now = self.now();
        if !self.limiter.allows(username, now) {
            return Err(CoreError::RateLimited);
        }
        let user = self
            .store
            .snapshot()
            .find_unique::<User>("username", username)
            .filter(|u| !u.deleted);
        let verified = match &user {
            Some(u) => self.hasher.verify(password, &u.password_digest),
            None => {
                self.hasher.verify_decoy(password);
                false
            }
        };
        let user = match user {
            Some(u) if verified => u,
            _ => {
                self.limiter.record_failure(username, now);
                return Err(CoreError::Denied);
            }
        };
        self.limiter.clear(username);

        let token = new_session_token();
        let ttl = self.settings.session_ttl;
        let expires_at = self.store.atomically(|tx| -> CoreResult<Timestamp> {
            let issued_at = tx.now();
            let expires_at = issued_at + ttl;
            tx.insert(&SessionRecord {
                token_digest: token_digest(&token),
                user_id: user.id.clone(),
                role: user.role,
                issued_at,
                expires_at,
                revoked: false,
            })?;
            Ok(expires_at)
        })?;
        Ok(LoginGrant {
            token,
            expires_at,
            user: UserView::from(&user),
        })
    }

    pub fn authenticate(&self, token: &str) -> CoreResult<Principal> {
        let snap = self.store.snapshot();
        let session = snap
            .find_unique::<SessionRecord>("token_digest", &token_digest(token))
            .ok_or(CoreError::Unauthenticated)?;
        if session.revoked || self.now() >= session.expires_at {
            return Err(CoreError::Unauthenticated);
        }
        let user = live_user(&snap, &session.user_id).map_err(|_| CoreError::Unauthenticated)?;
        Ok(Principal {
            user_id: user.id.clone(),
            role: user.role,
            is_library: user.is_library,
            session_id: session.id.clone(),
        })
    }

    pub fn logout(&self, p: &Principal) -> CoreResult<()> {
        authorize(p, Capability::Logout, ResourceContext::Global)?;
        self.store.atomically(|tx| -> CoreResult<()> {
            if let Ok(mut s) = tx.get::<SessionRecord>(&p.session_id) {
                if !s.revoked {
                    s.value.revoked = true;
                    tx.update(&s.id, &s.value)?;
                }
            }
            Ok(())
        })
    }

    /// Replaces the password and revokes every session of the user.
    pub fn change_password(&self, p: &Principal, old: &str, new: &str) -> CoreResult<()> {
        authorize(p, Capability::ChangePassword, ResourceContext::Global)?;
        let user = live_user(&self.store.snapshot(), &p.user_id)?;
        if !self.hasher.verify(old, &user.password_digest) {
            return Err(CoreError::BadOldPassword);
        }
        check_password_policy(new)?;
        let digest = self.hasher.hash(new, &self.salt());
        self.store.atomically(|tx| -> CoreResult<()> {
            let mut user = tx.get::<User>(&p.user_id)?;
            user.value.password_digest = digest;
            tx.update(&user.id, &user.value)?;
            let live: Vec<Stored<SessionRecord>> = tx.query(
                &Query::new()
                    .eq("user_id", &p.user_id)
                    .eq("revoked", false),
            )?;
            for mut s in live {
                s.value.revoked = true;
                tx.update(&s.id, &s.value)?;
            }
            Ok(())
        })
    }

    pub fn create_faculty(&self, p: &Principal, name: &str) -> CoreResult<Stored<Faculty>> {
        authorize(p, Capability::CreateFaculty, ResourceContext::Global)?;
        let name = non_empty("name", name)?;
        let id = self.store.insert(&Faculty { name })?;
        Ok(self.store.get(&id)?)
    }

    pub fn list_faculties(&self, p: &Principal) -> CoreResult<Vec<Stored<Faculty>>> {
        authorize(p, Capability::ListFaculties, ResourceContext::Global)?;
        Ok(self
            .store
            .query(&Query::new().sort("name", Order::Asc))?)
    }

    pub fn create_department(&self, p: &Principal, input: NewDepartment) -> CoreResult<Stored<Department>> {
        authorize(p, Capability::CreateDepartment, ResourceContext::Global)?;
        let name = non_empty("name", &input.name)?;
        let id = self.store.insert(&Department {
            name,
            faculty_id: input.faculty_id,
        })?;
        Ok(self.store.get(&id)?)
    }

    pub fn list_departments(&self, p: &Principal) -> CoreResult<Vec<Stored<Department>>> {
        authorize(p, Capability::ListDepartments, ResourceContext::Global)?;
        Ok(self
            .store
            .query(&Query::new().sort("name", Order::Asc))?)
    }

    pub fn create_user(&self, p: &Principal, input: NewUser) -> CoreResult<UserView> {
        authorize(p, Capability::CreateUser, ResourceContext::Global)?;
        validate_identity(&input.username, input.role).map_err(identity_error)?;
        check_password_policy(&input.password)?;
        let full_name = non_empty("full_name", &input.full_name)?;
        if input.role != Role::Registrar && input.department_id.is_none() {
            return Err(CoreError::Validation(format!(
                "{} accounts require a department_id",
                input.role
            )));
        }
        if input.is_library && input.role != Role::Registrar {
            return Err(CoreError::Validation(
                "only registrar accounts may act for the library".into(),
            ));
        }
        let digest = self.hasher.hash(&input.password, &self.salt());
        let id = self.store.insert(&User {
            username: input.username,
            password_digest: digest,
            full_name,
            email: input.email.trim().to_owned(),
            phone: input.phone.trim().to_owned(),
            role: input.role,
            department_id: input.department_id,
            is_library: input.is_library,
            deleted: false,
        })?;
        Ok(UserView::from(&self.store.get::<User>(&id)?))
    }

    pub fn list_users(&self, p: &Principal, role: Option<Role>, page: PageRequest) -> CoreResult<Paged<UserView>> {
        authorize(p, Capability::ListUsers, ResourceContext::Global)?;
        let mut q = Query::new().eq("deleted", false).sort("username", Order::Asc);
        if let Some(r) = role {
            q = q.eq("role", r);
        }
        let users: Vec<Stored<User>> = self.store.query(&q)?;
        Ok(Paged::slice(users.iter().map(UserView::from).collect(), page))
    }

    pub fn create_course(&self, p: &Principal, input: NewCourse) -> CoreResult<Stored<Course>> {
        authorize(p, Capability::CreateCourse, ResourceContext::Global)?;
        if !is_course_code(&input.code) {
            return Err(CoreError::Validation(format!(
                "course code {:?} must be 3-4 capitals followed by 3 digits",
                input.code
            )));
        }
        if !is_session_label(&input.session) {
            return Err(CoreError::Validation(format!(
                "session {:?} must look like 2023/2024",
                input.session
            )));
        }
        let title = non_empty("title", &input.title)?;
        let id = self.store.atomically(|tx| -> CoreResult<Id> {
            match live_user(tx, &input.lecturer_id) {
                Ok(u) if u.role == Role::Lecturer => {}
                Ok(_) => {
                    return Err(CoreError::Validation(
                        "lecturer_id must refer to a lecturer".into(),
                    ))
                }
                Err(_) => {
                    return Err(CoreError::ReferentialViolation {
                        missing_ref: "lecturer_id".into(),
                    })
                }
            }
            Ok(tx.insert(&Course {
                code: input.code,
                title,
                department_id: input.department_id,
                lecturer_id: input.lecturer_id,
                session: input.session,
                syllabus: input.syllabus,
                deleted: false,
            })?)
        })?;
        Ok(self.store.get(&id)?)
    }

    /// Registry path: enroll a named student. Self path: enroll the caller.
    pub fn enroll(&self, p: &Principal, req: EnrollmentRequest) -> CoreResult<Stored<Enrollment>> {
        let snap = self.store.snapshot();
        let student = match p.role {
            Role::Student => {
                authorize(p, Capability::SelfEnroll, ResourceContext::Global)?;
                if !self.settings.self_enrollment {
                    return Err(CoreError::SelfEnrollmentDisabled);
                }
                live_user(&snap, &p.user_id)?
            }
            _ => {
                authorize(p, Capability::EnrollStudent, ResourceContext::Global)?;
                match (&req.student_id, &req.username) {
                    (Some(id), _) => live_user(&snap, id)?,
                    (None, Some(name)) => snap
                        .find_unique::<User>("username", name)
                        .filter(|u| !u.deleted)
                        .ok_or_else(|| CoreError::not_found(format!("user {name}")))?,
                    (None, None) => {
                        return Err(CoreError::Validation(
                            "student_id or username is required".into(),
                        ))
                    }
                }
            }
        };
        if student.role != Role::Student {
            return Err(CoreError::Validation("only students can be enrolled".into()));
        }
        let course = find_course(&snap, &req.course_code, req.session.as_deref())?;
        let id = self.store.atomically(|tx| -> CoreResult<Id> {
            Ok(tx.insert(&Enrollment {
                student_id: student.id.clone(),
                course_id: course.id.clone(),
                course_code: course.code.clone(),
                session: course.session.clone(),
                registered_at: tx.now(),
            })?)
        })?;
        Ok(self.store.get(&id)?)
    }
}
