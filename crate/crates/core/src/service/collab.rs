use serde::{Deserialize, Serialize};

use super::{find_course, is_enrolled, is_member, live_user, Citadel, PageRequest, Paged, MAX_BODY_CHARS};
use crate::auth::{authorize, Capability, Principal, ResourceContext};
use crate::domain::Role;
use crate::error::{CoreError, CoreResult};
use crate::model::{ChatMessage, Course, Department, Enrollment, Message, Notice, NoticeAuthor, NoticeScope, User};
use crate::store::{Id, Order, Query, Read, Stored};

/// Upper bound on messages returned by one chat fetch.
pub const CHAT_FETCH_LIMIT: usize = 500;

#[derive(Debug, Clone, Deserialize)]
pub struct MessageInput {
    pub to_user: Id,
    #[serde(default)]
    pub subject: String,
    pub body: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct InboxPage {
    pub items: Vec<Stored<Message>>,
    pub page: usize,
    pub per_page: usize,
    pub total: usize,
    pub unread: usize,
}

/// Notice target as a client names it; courses are named by code.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ScopeInput {
    All,
    Department {
        department_id: Id,
    },
    Course {
        course_code: String,
        #[serde(default)]
        session: Option<String>,
    },
}

#[derive(Debug, Clone, Deserialize)]
pub struct NoticeInput {
    pub scope: ScopeInput,
    pub title: String,
    #[serde(default)]
    pub body: String,
}

fn check_body(body: &str) -> CoreResult<()> {
    if body.chars().count() > MAX_BODY_CHARS {
        Err(CoreError::TooLong)
    } else {
        Ok(())
    }
}

fn course_ids_of_student(snap: &impl Read, student: &Id) -> CoreResult<Vec<Id>> {
    let e: Vec<Stored<Enrollment>> = snap.query(&Query::new().eq("student_id", student))?;
    Ok(e.into_iter().map(|e| e.value.course_id).collect())
}

/// Who may write to whom:
/// students to lecturers of their courses and to classmates;
/// lecturers to students enrolled in their courses and to any staff member;
/// registrars to anyone.
pub(crate) fn may_message(snap: &impl Read, from: &Stored<User>, to: &Stored<User>) -> CoreResult<bool> {
    if from.id == to.id {
        return Ok(false);
    }
    Ok(match (from.role, to.role) {
        (Role::Registrar, _) => true,
        (Role::Lecturer, Role::Lecturer | Role::Registrar) => true,
        (Role::Lecturer, Role::Student) => course_ids_of_student(snap, &to.id)?
            .iter()
            .filter_map(|c| snap.get::<Course>(c).ok())
            .any(|c| c.lecturer_id == from.id),
        (Role::Student, Role::Lecturer) => course_ids_of_student(snap, &from.id)?
            .iter()
            .filter_map(|c| snap.get::<Course>(c).ok())
            .any(|c| c.lecturer_id == to.id),
        (Role::Student, Role::Student) => {
            let mine = course_ids_of_student(snap, &from.id)?;
            mine.iter().any(|c| is_enrolled(snap, &to.id, c))
        }
        (Role::Student, Role::Registrar) => false,
    })
}

/// True iff `user` belongs to the notice's audience.
pub(crate) fn in_scope(snap: &impl Read, user: &Stored<User>, scope: &NoticeScope) -> bool {
    match scope {
        NoticeScope::All => true,
        NoticeScope::Department { department_id } => {
            user.department_id.as_ref() == Some(department_id)
        }
        NoticeScope::Course { course_id, .. } => match user.role {
            Role::Student => is_enrolled(snap, &user.id, course_id),
            Role::Lecturer => snap
                .get::<Course>(course_id)
                .is_ok_and(|c| c.lecturer_id == user.id),
            Role::Registrar => false,
        },
    }
}

impl Citadel {
    pub fn send_message(&self, p: &Principal, input: MessageInput) -> CoreResult<Stored<Message>> {
        authorize(p, Capability::SendMessage, ResourceContext::Global)?;
        check_body(&input.body)?;
        if input.body.trim().is_empty() {
            return Err(CoreError::Validation("body must not be empty".into()));
        }
        let snap = self.store.snapshot();
        let from = live_user(&snap, &p.user_id)?;
        let to = live_user(&snap, &input.to_user)?;
        if !may_message(&snap, &from, &to)? {
            return Err(CoreError::ForbiddenRecipient);
        }
        let id = self.store.atomically(|tx| -> CoreResult<Id> {
            Ok(tx.insert(&Message {
                from_user: from.id.clone(),
                to_user: to.id.clone(),
                subject: input.subject.trim().to_owned(),
                body: input.body,
                sent_at: tx.now(),
                read: false,
            })?)
        })?;
        Ok(self.store.get(&id)?)
    }

    /// Messages to the caller, newest first.
    pub fn inbox(&self, p: &Principal, page: PageRequest) -> CoreResult<InboxPage> {
        authorize(p, Capability::ListInbox, ResourceContext::Global)?;
        let all: Vec<Stored<Message>> = self.store.query(
            &Query::new()
                .eq("to_user", &p.user_id)
                .sort("sent_at", Order::Desc),
        )?;
        let unread = all.iter().filter(|m| !m.read).count();
        let paged = Paged::slice(all, page);
        Ok(InboxPage {
            items: paged.items,
            page: paged.page,
            per_page: paged.per_page,
            total: paged.total,
            unread,
        })
    }

    /// Idempotent; only the recipient may mark a message read.
    pub fn mark_read(&self, p: &Principal, id: &Id) -> CoreResult<Stored<Message>> {
        authorize(p, Capability::MarkRead, ResourceContext::Global)?;
        self.store.atomically(|tx| -> CoreResult<()> {
            let mut m = tx.get::<Message>(id)?;
            if m.to_user != p.user_id {
                return Err(CoreError::Forbidden);
            }
            if !m.read {
                m.value.read = true;
                tx.update(&m.id, &m.value)?;
            }
            Ok(())
        })?;
        Ok(self.store.get(id)?)
    }

    pub fn post_notice(&self, p: &Principal, input: NoticeInput) -> CoreResult<Stored<Notice>> {
        authorize(p, Capability::PostNotice, ResourceContext::Global)?;
        let title = super::non_empty("title", &input.title)?;
        check_body(&input.body)?;
        let snap = self.store.snapshot();
        let scope = match input.scope {
            ScopeInput::All => NoticeScope::All,
            ScopeInput::Department { department_id } => {
                snap.get::<Department>(&department_id)
                    .map_err(|_| CoreError::not_found(format!("department {department_id}")))?;
                NoticeScope::Department { department_id }
            }
            ScopeInput::Course {
                course_code,
                session,
            } => {
                let c = find_course(&snap, &course_code, session.as_deref())?;
                NoticeScope::Course {
                    course_id: c.id.clone(),
                    course_code: c.code.clone(),
                }
            }
        };
        let author_role = match p.role {
            Role::Lecturer => {
                let own = match &scope {
                    NoticeScope::Course { course_id, .. } => snap
                        .get::<Course>(course_id)
                        .is_ok_and(|c| c.lecturer_id == p.user_id),
                    _ => false,
                };
                if !own {
                    return Err(CoreError::ForbiddenScope);
                }
                NoticeAuthor::Lecturer
            }
            Role::Registrar if p.is_library => NoticeAuthor::Library,
            Role::Registrar => NoticeAuthor::Registrar,
            Role::Student => return Err(CoreError::Forbidden),
        };
        let id = self.store.atomically(|tx| -> CoreResult<Id> {
            Ok(tx.insert(&Notice {
                author_id: p.user_id.clone(),
                author_role,
                scope,
                title,
                body: input.body,
                posted_at: tx.now(),
            })?)
        })?;
        Ok(self.store.get(&id)?)
    }

    /// Notices whose scope includes the caller, newest first.
    pub fn list_notices(&self, p: &Principal, page: PageRequest) -> CoreResult<Paged<Stored<Notice>>> {
        authorize(p, Capability::ListNotices, ResourceContext::Global)?;
        let snap = self.store.snapshot();
        let me = live_user(&snap, &p.user_id)?;
        let mut all: Vec<Stored<Notice>> = snap.query(&Query::new())?;
        all.retain(|n| in_scope(&snap, &me, &n.scope));
        all.sort_by(|a, b| (b.posted_at, &b.id).cmp(&(a.posted_at, &a.id)));
        Ok(Paged::slice(all, page))
    }

    fn chat_room(&self, p: &Principal, cap: Capability, code: &str) -> CoreResult<Stored<Course>> {
        authorize(p, cap, ResourceContext::Global)?;
        let snap = self.store.snapshot();
        let course = find_course(&snap, code, None)?;
        if !is_member(&snap, p, &course) {
            return Err(CoreError::ForbiddenRoom);
        }
        Ok(course)
    }

    /// Appends to the room with the next dense seq.
    pub fn chat_post(&self, p: &Principal, code: &str, body: &str) -> CoreResult<Stored<ChatMessage>> {
        let course = self.chat_room(p, Capability::ChatPost, code)?;
        check_body(body)?;
        if body.trim().is_empty() {
            return Err(CoreError::Validation("body must not be empty".into()));
        }
        let (id, seq) = self.store.atomically(|tx| -> CoreResult<(Id, u64)> {
            let last: Vec<Stored<ChatMessage>> = tx.query(
                &Query::new()
                    .eq("course_id", &course.id)
                    .sort("seq", Order::Desc)
                    .limit(1),
            )?;
            let seq = last.first().map_or(0, |m| m.seq) + 1;
            let id = tx.insert(&ChatMessage {
                room: course.code.clone(),
                course_id: course.id.clone(),
                seq,
                author_id: p.user_id.clone(),
                body: body.to_owned(),
                posted_at: tx.now(),
            })?;
            Ok((id, seq))
        })?;
        self.chat_notify(&course.id, seq);
        Ok(self.store.get(&id)?)
    }

    /// Messages with seq greater than `after`, ascending, at most
    /// [`CHAT_FETCH_LIMIT`] of them. Returns the room id for long-polling.
    pub fn chat_fetch(&self, p: &Principal, code: &str, after: u64) -> CoreResult<(Id, Vec<Stored<ChatMessage>>)> {
        let course = self.chat_room(p, Capability::ChatFetch, code)?;
        let msgs = self.store.query(
            &Query::new()
                .eq("course_id", &course.id)
                .gt("seq", after)
                .sort("seq", Order::Asc)
                .limit(CHAT_FETCH_LIMIT),
        )?;
        Ok((course.id.clone(), msgs))
    }
}
