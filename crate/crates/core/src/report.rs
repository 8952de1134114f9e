//! Course progress reports in JSON and CSV form.

use std::collections::HashSet;

use serde::Serialize;

use crate::auth::{authorize, Capability, Principal};
use crate::domain::Letter;
use crate::error::{CoreError, CoreResult};
use crate::model::{
    Assessment, AssessmentKind, Assignment, Attempt, ContentItem, ContentKind, DownloadEvent,
    Enrollment, User,
};
use crate::service::Citadel;
use crate::store::{Id, Query, Read, Stored};
use crate::time::Timestamp;

pub const CSV_HEADER: &str = "matric,name,materials_downloaded,assignments_submitted,assignments_total,quizzes_taken,quizzes_total,ca,exam,total,letter";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProgressRow {
    pub student_id: Id,
    pub matric: String,
    pub name: String,
    /// Distinct course items (other than submissions) the student downloaded.
    pub materials_downloaded: usize,
    pub assignments_submitted: usize,
    pub assignments_total: usize,
    /// Quizzes the student started.
    pub quizzes_taken: usize,
    pub quizzes_total: usize,
    pub ca_score: f64,
    pub exam_score: f64,
    pub total: f64,
    pub letter: Letter,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProgressReport {
    pub course_code: String,
    pub session: String,
    /// Commit time of the data the report was computed from.
    pub generated_at: Option<Timestamp>,
    pub rows: Vec<ProgressRow>,
}

impl ProgressReport {
    /// RFC 4180 quoting, LF line endings, rows in report order.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(CSV_HEADER.split(',')).expect("write to Vec");
        for r in &self.rows {
            w.write_record([
                r.matric.clone(),
                r.name.clone(),
                r.materials_downloaded.to_string(),
                r.assignments_submitted.to_string(),
                r.assignments_total.to_string(),
                r.quizzes_taken.to_string(),
                r.quizzes_total.to_string(),
                r.ca_score.to_string(),
                r.exam_score.to_string(),
                r.total.to_string(),
                r.letter.to_string(),
            ])
            .expect("write to Vec");
        }
        String::from_utf8(w.into_inner().expect("flush to Vec")).expect("csv output is UTF-8")
    }
}

impl Citadel {
    pub fn progress_report(&self, p: &Principal, code: &str, cap: Capability) -> CoreResult<ProgressReport> {
        if !matches!(cap, Capability::ReportJson | Capability::ReportCsv) {
            return Err(CoreError::Internal("not a report capability".into()));
        }
        let snap = self.store().snapshot();
        let course = crate::service::find_course(&snap, code, None)?;
        authorize(p, cap, crate::service::course_ctx(&snap, p, &course))?;
        let now = self.now();

        let by_course = Query::new().eq("course_id", &course.id);
        let enrollments: Vec<Stored<Enrollment>> = snap.query(&by_course)?;
        let assessments: Vec<Stored<Assessment>> = snap.query(&by_course)?;
        let quiz_ids: HashSet<&Id> = assessments
            .iter()
            .filter(|a| a.kind == AssessmentKind::Quiz)
            .map(|a| &a.id)
            .collect();
        let assignments: Vec<Stored<Assignment>> = snap.query(&by_course)?;
        let items: Vec<Stored<ContentItem>> = snap.query(&by_course)?;
        let material_ids: HashSet<&Id> = items
            .iter()
            .filter(|i| i.kind != ContentKind::Submission)
            .map(|i| &i.id)
            .collect();

        let mut rows = Vec::with_capacity(enrollments.len());
        for e in &enrollments {
            let student = snap.get::<User>(&e.student_id)?;
            let mine = by_course.clone().eq("student_id", &e.student_id);
            let downloads: Vec<Stored<DownloadEvent>> = snap.query(&mine)?;
            let attempts: Vec<Stored<Attempt>> = snap.query(&mine)?;
            let submissions = snap.count(crate::store::Kind::Submission, &mine)?;
            let grade = crate::service::grade_result(&snap, &course, &e.student_id, now)?;
            rows.push(ProgressRow {
                student_id: e.student_id.clone(),
                matric: student.username.clone(),
                name: student.full_name.clone(),
                materials_downloaded: downloads
                    .iter()
                    .filter(|d| material_ids.contains(&d.content_id))
                    .count(),
                assignments_submitted: submissions,
                assignments_total: assignments.len(),
                quizzes_taken: attempts
                    .iter()
                    .filter(|a| quiz_ids.contains(&a.assessment_id))
                    .count(),
                quizzes_total: quiz_ids.len(),
                ca_score: grade.ca_score,
                exam_score: grade.exam_score,
                total: grade.total,
                letter: grade.letter,
            });
        }
        rows.sort_by(|a, b| a.matric.cmp(&b.matric));
        Ok(ProgressReport {
            course_code: course.code.clone(),
            session: course.session.clone(),
            generated_at: snap.committed_at(),
            rows,
        })
    }
}
