use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::Serialize;

use super::{course_ctx, find_course, live_user, Citadel};
use crate::auth::{authorize, Capability, Principal, ResourceContext};
use crate::domain::{timetable_for_day, Role, TimetableEntry};
use crate::error::CoreResult;
use crate::model::{Course, Enrollment, User};
use crate::store::{Id, Query, Read, Stored};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CourseView {
    pub id: Id,
    pub code: String,
    pub title: String,
    pub session: String,
    pub department_id: Id,
    pub lecturer_id: Id,
    pub lecturer_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassmateView {
    pub full_name: String,
    pub matric: String,
    pub email: String,
    pub phone: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LecturerView {
    pub id: Id,
    pub full_name: String,
    pub staff_id: String,
    pub email: String,
    pub courses: Vec<String>,
}

fn course_view(snap: &impl Read, c: &Stored<Course>) -> CourseView {
    let lecturer_name = snap
        .get::<User>(&c.lecturer_id)
        .map(|u| u.value.full_name)
        .unwrap_or_default();
    CourseView {
        id: c.id.clone(),
        code: c.code.clone(),
        title: c.title.clone(),
        session: c.session.clone(),
        department_id: c.department_id.clone(),
        lecturer_id: c.lecturer_id.clone(),
        lecturer_name,
    }
}

fn sort_courses(v: &mut [CourseView]) {
    v.sort_by(|a, b| (&a.code, &a.session).cmp(&(&b.code, &b.session)));
}

/// Courses a student is enrolled in or a lecturer teaches.
pub(crate) fn member_courses(snap: &impl Read, p: &Principal) -> CoreResult<Vec<Stored<Course>>> {
    let courses = match p.role {
        Role::Student => {
            let enrollments: Vec<Stored<Enrollment>> =
                snap.query(&Query::new().eq("student_id", &p.user_id))?;
            enrollments
                .iter()
                .filter_map(|e| snap.get::<Course>(&e.course_id).ok())
                .collect()
        }
        Role::Lecturer => snap.query(&Query::new().eq("lecturer_id", &p.user_id))?,
        Role::Registrar => Vec::new(),
    };
    Ok(courses.into_iter().filter(|c| !c.deleted).collect())
}

impl Citadel {
    pub fn list_courses(&self, p: &Principal) -> CoreResult<Vec<CourseView>> {
        authorize(p, Capability::ListCourses, ResourceContext::Global)?;
        let snap = self.store.snapshot();
        let courses: Vec<Stored<Course>> = snap.query(&Query::new().eq("deleted", false))?;
        let mut out: Vec<CourseView> = courses.iter().map(|c| course_view(&snap, c)).collect();
        sort_courses(&mut out);
        Ok(out)
    }

    pub fn my_courses(&self, p: &Principal) -> CoreResult<Vec<CourseView>> {
        authorize(p, Capability::MyCourses, ResourceContext::Global)?;
        let snap = self.store.snapshot();
        let mut out: Vec<CourseView> = member_courses(&snap, p)?
            .iter()
            .map(|c| course_view(&snap, c))
            .collect();
        sort_courses(&mut out);
        Ok(out)
    }

    pub fn my_timetable(&self, p: &Principal, day: NaiveDate) -> CoreResult<Vec<Stored<TimetableEntry>>> {
        authorize(p, Capability::MyTimetable, ResourceContext::Global)?;
        let snap = self.store.snapshot();
        let mine: BTreeSet<Id> = member_courses(&snap, p)?.into_iter().map(|c| c.id).collect();
        let entries: Vec<Stored<TimetableEntry>> = snap
            .query::<TimetableEntry>(&Query::new().eq("date", day))?
            .into_iter()
            .filter(|e| mine.contains(&e.course_id))
            .collect();
        let ordered = timetable_for_day(entries.iter().map(|e| &e.value), day);
        Ok(ordered
            .into_iter()
            .filter_map(|v| entries.iter().find(|e| std::ptr::eq(&e.value, v)).cloned())
            .collect())
    }

    /// Other students enrolled in `code`, by full name.
    pub fn classmates(&self, p: &Principal, code: &str) -> CoreResult<Vec<ClassmateView>> {
        let snap = self.store.snapshot();
        let course = find_course(&snap, code, None)?;
        authorize(p, Capability::ViewClassmates, course_ctx(&snap, p, &course))?;
        let enrollments: Vec<Stored<Enrollment>> =
            snap.query(&Query::new().eq("course_id", &course.id))?;
        let mut out: Vec<ClassmateView> = enrollments
            .iter()
            .filter(|e| e.student_id != p.user_id)
            .filter_map(|e| live_user(&snap, &e.student_id).ok())
            .map(|u| ClassmateView {
                full_name: u.full_name.clone(),
                matric: u.username.clone(),
                email: u.email.clone(),
                phone: u.phone.clone(),
            })
            .collect();
        out.sort_by(|a, b| (&a.full_name, &a.matric).cmp(&(&b.full_name, &b.matric)));
        Ok(out)
    }

    /// Distinct lecturers of the caller's enrolled courses.
    pub fn my_lecturers(&self, p: &Principal) -> CoreResult<Vec<LecturerView>> {
        authorize(p, Capability::ViewLecturers, ResourceContext::Global)?;
        let snap = self.store.snapshot();
        let mut by_lecturer: BTreeMap<Id, BTreeSet<String>> = BTreeMap::new();
        for c in member_courses(&snap, p)? {
            by_lecturer
                .entry(c.lecturer_id.clone())
                .or_default()
                .insert(c.code.clone());
        }
        let mut out = Vec::new();
        for (id, codes) in by_lecturer {
            let Ok(u) = live_user(&snap, &id) else { continue };
            out.push(LecturerView {
                id,
                full_name: u.full_name.clone(),
                staff_id: u.username.clone(),
                email: u.email.clone(),
                courses: codes.into_iter().collect(),
            });
        }
        out.sort_by(|a, b| (&a.full_name, &a.staff_id).cmp(&(&b.full_name, &b.staff_id)));
        Ok(out)
    }

    pub fn course_by_code(&self, code: &str) -> CoreResult<Stored<Course>> {
        find_course(&self.store.snapshot(), code, None)
    }

}
