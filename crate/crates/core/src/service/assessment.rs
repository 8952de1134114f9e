use chrono::Duration;
use serde::{Deserialize, Serialize};

use super::content::Upload;
use super::{course_ctx, find_course, is_enrolled, live_course, non_empty, Citadel};
use crate::auth::{authorize, Capability, Principal, ResourceContext};
use crate::domain::{compute_grade, window_state, Letter, Role, WindowState, CA_MAX, EXAM_MAX};
use crate::error::{CoreError, CoreResult};
use crate::model::{
    Assessment, AssessmentKind, Assignment, Attempt, AttemptStatus, ContentKind, Course,
    Enrollment, Question, Submission, User,
};
use crate::store::{Id, Order, Query, Read, StoreError, Stored};
use crate::time::Timestamp;

const MIN_OPTIONS: usize = 2;
const MAX_OPTIONS: usize = 6;
const POINTS_EPSILON: f64 = 1e-9;

/// Client-supplied assessment definition. `points_total` may be omitted; if
/// present it must equal the sum of question points.
#[derive(Debug, Clone, Deserialize)]
pub struct AssessmentSpec {
    pub kind: AssessmentKind,
    pub title: String,
    pub opens_at: Timestamp,
    pub closes_at: Timestamp,
    #[serde(default)]
    pub duration_limit: Option<u32>,
    pub questions: Vec<Question>,
    #[serde(default)]
    pub points_total: Option<f64>,
    #[serde(default)]
    pub ca_weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuestionView {
    pub prompt: String,
    pub options: Vec<String>,
    pub points: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correct_index: Option<usize>,
}

/// An assessment as seen by its audience. Students never see answer keys.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssessmentView {
    pub id: Id,
    pub course_code: String,
    pub kind: AssessmentKind,
    pub title: String,
    pub opens_at: Timestamp,
    pub closes_at: Timestamp,
    pub duration_limit: Option<u32>,
    pub points_total: f64,
    pub ca_weight: f64,
    pub state: WindowState,
    pub questions: Vec<QuestionView>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct AssignmentInput {
    pub title: String,
    #[serde(default)]
    pub brief: String,
    #[serde(default)]
    pub brief_content_id: Option<Id>,
    pub due_at: Timestamp,
    pub max_score: f64,
    #[serde(default)]
    pub ca_weight: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SubmissionInput {
    pub text: Option<String>,
    pub file: Option<Upload>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradeResult {
    pub student_id: Id,
    pub course_code: String,
    pub session: String,
    pub ca_score: f64,
    pub exam_score: f64,
    pub total: f64,
    pub letter: Letter,
    pub grade_point: f64,
}

/// Sum of points of the questions answered with the correct index.
pub fn score_answers(questions: &[Question], answers: &[Option<usize>]) -> f64 {
    questions
        .iter()
        .zip(answers)
        .filter(|(q, a)| **a == Some(q.correct_index))
        .map(|(q, _)| q.points)
        .sum()
}

fn check_shape(questions: &[Question], answers: &[Option<usize>]) -> CoreResult<()> {
    let fits = answers.len() == questions.len()
        && questions
            .iter()
            .zip(answers)
            .all(|(q, a)| a.is_none_or(|i| i < q.options.len()));
    if fits {
        Ok(())
    } else {
        Err(CoreError::AnswerShapeMismatch)
    }
}

fn validate_spec(spec: &AssessmentSpec) -> CoreResult<f64> {
    let bad = CoreError::invalid_spec;
    if spec.title.trim().is_empty() {
        return Err(bad("empty_title"));
    }
    if spec.opens_at >= spec.closes_at {
        return Err(bad("window_not_increasing"));
    }
    if spec.questions.is_empty() {
        return Err(bad("no_questions"));
    }
    for q in &spec.questions {
        if !(MIN_OPTIONS..=MAX_OPTIONS).contains(&q.options.len()) {
            return Err(bad("option_count"));
        }
        if q.correct_index >= q.options.len() {
            return Err(bad("correct_index_out_of_range"));
        }
        if !(q.points.is_finite() && q.points > 0.0) {
            return Err(bad("points_not_positive"));
        }
    }
    if let Some(minutes) = spec.duration_limit {
        let window = spec.closes_at - spec.opens_at;
        if minutes == 0 || Duration::minutes(i64::from(minutes)) > window {
            return Err(bad("duration_limit"));
        }
    }
    let total: f64 = spec.questions.iter().map(|q| q.points).sum();
    if let Some(claimed) = spec.points_total {
        if (claimed - total).abs() > POINTS_EPSILON {
            return Err(bad("points_total_mismatch"));
        }
    }
    match (spec.kind, spec.ca_weight) {
        (AssessmentKind::Exam, Some(w)) if w != 0.0 => return Err(bad("exam_has_ca_weight")),
        (AssessmentKind::Quiz, Some(w)) if !(w.is_finite() && (0.0..=CA_MAX).contains(&w)) => {
            return Err(bad("ca_weight_out_of_range"))
        }
        _ => {}
    }
    Ok(total)
}

/// Sum of CA weights already committed to a course's quizzes and assignments.
fn committed_ca(snap: &impl Read, course_id: &Id) -> CoreResult<f64> {
    let quizzes: Vec<Stored<Assessment>> = snap.query(
        &Query::new()
            .eq("course_id", course_id)
            .eq("kind", AssessmentKind::Quiz),
    )?;
    let assignments: Vec<Stored<Assignment>> =
        snap.query(&Query::new().eq("course_id", course_id))?;
    Ok(quizzes.iter().map(|a| a.ca_weight).sum::<f64>()
        + assignments.iter().map(|a| a.ca_weight).sum::<f64>())
}

fn check_budget(snap: &impl Read, course_id: &Id, extra: f64) -> CoreResult<()> {
    if committed_ca(snap, course_id)? + extra > CA_MAX + POINTS_EPSILON {
        Err(CoreError::invalid_spec("ca_budget_exceeded"))
    } else {
        Ok(())
    }
}

fn view(a: &Stored<Assessment>, now: Timestamp, with_key: bool) -> AssessmentView {
    AssessmentView {
        id: a.id.clone(),
        course_code: a.course_code.clone(),
        kind: a.kind,
        title: a.title.clone(),
        opens_at: a.opens_at,
        closes_at: a.closes_at,
        duration_limit: a.duration_limit,
        points_total: a.points_total,
        ca_weight: a.ca_weight,
        state: window_state(now, a.opens_at, a.closes_at).unwrap_or(WindowState::Closed),
        questions: a
            .questions
            .iter()
            .map(|q| QuestionView {
                prompt: q.prompt.clone(),
                options: q.options.clone(),
                points: q.points,
                correct_index: with_key.then_some(q.correct_index),
            })
            .collect(),
    }
}

/// Score an attempt counts for at `now`. Attempts left running past their
/// deadline count their autosaved answers.
fn effective_score(attempt: &Attempt, assessment: &Assessment, now: Timestamp) -> f64 {
    match attempt.status {
        AttemptStatus::Submitted | AttemptStatus::Expired => attempt.auto_score.unwrap_or(0.0),
        AttemptStatus::InProgress if now > attempt.deadline => {
            score_answers(&assessment.questions, &attempt.answers)
        }
        AttemptStatus::InProgress => 0.0,
    }
}

fn ratio(score: f64, out_of: f64) -> f64 {
    if out_of > 0.0 {
        score / out_of
    } else {
        0.0
    }
}

/// Gradebook row for one student in one course, computed from raw rows.
pub(crate) fn grade_result(snap: &impl Read, course: &Stored<Course>, student_id: &Id, now: Timestamp) -> CoreResult<GradeResult> {
    if !is_enrolled(snap, student_id, &course.id) {
        return Err(CoreError::NotEnrolled);
    }
    let assessments: Vec<Stored<Assessment>> =
        snap.query(&Query::new().eq("course_id", &course.id))?;
    let attempts: Vec<Stored<Attempt>> = snap.query(
        &Query::new()
            .eq("course_id", &course.id)
            .eq("student_id", student_id),
    )?;
    let mut ca = 0.0;
    let mut exam = 0.0;
    for a in &assessments {
        let Some(attempt) = attempts.iter().find(|t| t.assessment_id == a.id) else {
            continue;
        };
        let frac = ratio(effective_score(attempt, a, now), a.points_total);
        match a.kind {
            AssessmentKind::Quiz => ca += frac * a.ca_weight,
            AssessmentKind::Exam => exam = frac * EXAM_MAX,
        }
    }
    let assignments: Vec<Stored<Assignment>> =
        snap.query(&Query::new().eq("course_id", &course.id))?;
    let submissions: Vec<Stored<Submission>> = snap.query(
        &Query::new()
            .eq("course_id", &course.id)
            .eq("student_id", student_id),
    )?;
    for asg in &assignments {
        if let Some(score) = submissions
            .iter()
            .find(|s| s.assignment_id == asg.id)
            .and_then(|s| s.score)
        {
            ca += ratio(score, asg.max_score) * asg.ca_weight;
        }
    }
    let ca = ca.clamp(0.0, CA_MAX);
    let exam = exam.clamp(0.0, EXAM_MAX);
    let g = compute_grade(ca, exam).map_err(|e| CoreError::Internal(e.to_string()))?;
    Ok(GradeResult {
        student_id: student_id.clone(),
        course_code: course.code.clone(),
        session: course.session.clone(),
        ca_score: ca,
        exam_score: exam,
        total: g.total,
        letter: g.letter,
        grade_point: g.grade_point,
    })
}

enum Finish {
    Done(Stored<Attempt>),
    Expired,
}

impl Citadel {
    pub fn create_assessment(&self, p: &Principal, code: &str, spec: AssessmentSpec) -> CoreResult<AssessmentView> {
        let snap = self.store.snapshot();
        let course = find_course(&snap, code, None)?;
        authorize(p, Capability::CreateAssessment, course_ctx(&snap, p, &course))?;
        let points_total = validate_spec(&spec)?;
        let ca_weight = match spec.kind {
            AssessmentKind::Quiz => spec.ca_weight.unwrap_or(0.0),
            AssessmentKind::Exam => 0.0,
        };
        let assessment = Assessment {
            course_id: course.id.clone(),
            course_code: course.code.clone(),
            kind: spec.kind,
            title: spec.title.trim().to_owned(),
            opens_at: spec.opens_at,
            closes_at: spec.closes_at,
            duration_limit: spec.duration_limit,
            questions: spec.questions,
            points_total,
            ca_weight,
        };
        let id = self.store.atomically(|tx| -> CoreResult<Id> {
            match assessment.kind {
                AssessmentKind::Quiz => check_budget(tx, &course.id, ca_weight)?,
                AssessmentKind::Exam => {
                    let exams = tx.count(
                        crate::store::Kind::Assessment,
                        &Query::new()
                            .eq("course_id", &course.id)
                            .eq("kind", AssessmentKind::Exam),
                    )?;
                    if exams > 0 {
                        return Err(CoreError::invalid_spec("exam_exists"));
                    }
                }
            }
            Ok(tx.insert(&assessment)?)
        })?;
        let stored = self.store.get::<Assessment>(&id)?;
        Ok(view(&stored, self.now(), true))
    }

    pub fn list_assessments(&self, p: &Principal, code: &str) -> CoreResult<Vec<AssessmentView>> {
        let snap = self.store.snapshot();
        let course = find_course(&snap, code, None)?;
        authorize(p, Capability::ListAssessments, course_ctx(&snap, p, &course))?;
        let items: Vec<Stored<Assessment>> = snap.query(
            &Query::new()
                .eq("course_id", &course.id)
                .sort("opens_at", Order::Asc),
        )?;
        let now = self.now();
        let with_key = p.role != Role::Student;
        Ok(items.iter().map(|a| view(a, now, with_key)).collect())
    }

    pub fn assessment(&self, p: &Principal, id: &Id) -> CoreResult<AssessmentView> {
        let snap = self.store.snapshot();
        let a = snap.get::<Assessment>(id)?;
        let course = live_course(&snap, &a.course_id)?;
        authorize(p, Capability::ViewAssessment, course_ctx(&snap, p, &course))?;
        Ok(view(&a, self.now(), p.role != Role::Student))
    }

    pub fn start_attempt(&self, p: &Principal, assessment_id: &Id) -> CoreResult<Stored<Attempt>> {
        if !crate::auth::permits(p.role, Capability::StartAttempt) {
            return Err(CoreError::Forbidden);
        }
        let id = self.store.atomically(|tx| -> CoreResult<Id> {
            let a = tx.get::<Assessment>(assessment_id)?;
            if !is_enrolled(tx, &p.user_id, &a.course_id) {
                return Err(CoreError::NotEnrolled);
            }
            let now = tx.now();
            match window_state(now, a.opens_at, a.closes_at)
                .map_err(|e| CoreError::Internal(e.to_string()))?
            {
                WindowState::NotYetOpen => return Err(CoreError::WindowNotOpen),
                WindowState::Closed => return Err(CoreError::WindowClosed),
                WindowState::Open => {}
            }
            let deadline = match a.duration_limit {
                Some(m) => (now + Duration::minutes(i64::from(m))).min(a.closes_at),
                None => a.closes_at,
            };
            let attempt = Attempt {
                assessment_id: a.id.clone(),
                course_id: a.course_id.clone(),
                student_id: p.user_id.clone(),
                started_at: now,
                deadline,
                submitted_at: None,
                answers: vec![None; a.questions.len()],
                status: AttemptStatus::InProgress,
                auto_score: None,
            };
            tx.insert(&attempt).map_err(|e| match e {
                StoreError::ConstraintViolation { .. } => CoreError::AlreadyAttempted,
                other => other.into(),
            })
        })?;
        Ok(self.store.get(&id)?)
    }

    pub fn attempt(&self, p: &Principal, id: &Id) -> CoreResult<Stored<Attempt>> {
        let snap = self.store.snapshot();
        let attempt = snap.get::<Attempt>(id)?;
        match p.role {
            Role::Lecturer => {
                let course = live_course(&snap, &attempt.course_id)?;
                authorize(p, Capability::ViewAttempt, course_ctx(&snap, p, &course))?
            }
            _ => authorize(
                p,
                Capability::ViewAttempt,
                ResourceContext::OwnedBy(&attempt.student_id),
            )?,
        }
        Ok(attempt)
    }

    /// Runs `f` on an owned, in-progress attempt. Past the deadline the
    /// attempt is expired and scored from its saved answers instead, and the
    /// call fails with `deadline_passed` after that state is committed.
    fn finish<F>(&self, p: &Principal, cap: Capability, id: &Id, f: F) -> CoreResult<Stored<Attempt>>
    where
        F: FnOnce(&Assessment, &mut Attempt, Timestamp) -> CoreResult<()>,
    {
        if !crate::auth::permits(p.role, cap) {
            return Err(CoreError::Forbidden);
        }
        let outcome = self.store.atomically(|tx| -> CoreResult<Finish> {
            let mut attempt = tx.get::<Attempt>(id)?;
            authorize(p, cap, ResourceContext::OwnedBy(&attempt.student_id))?;
            if attempt.status != AttemptStatus::InProgress {
                return Err(CoreError::AlreadySubmitted);
            }
            let assessment = tx.get::<Assessment>(&attempt.assessment_id)?;
            let now = tx.now();
            if now > attempt.deadline {
                attempt.value.status = AttemptStatus::Expired;
                attempt.value.auto_score =
                    Some(score_answers(&assessment.questions, &attempt.answers));
                tx.update(&attempt.id, &attempt.value)?;
                return Ok(Finish::Expired);
            }
            f(&assessment, &mut attempt.value, now)?;
            tx.update(&attempt.id, &attempt.value)?;
            Ok(Finish::Done(attempt))
        })?;
        match outcome {
            Finish::Done(a) => Ok(self.store.get(&a.id)?),
            Finish::Expired => Err(CoreError::DeadlinePassed),
        }
    }

    /// Autosave: replaces the saved answer vector.
    pub fn save_answers(&self, p: &Principal, id: &Id, answers: Vec<Option<usize>>) -> CoreResult<Stored<Attempt>> {
        self.finish(p, Capability::SaveAnswers, id, |assessment, attempt, _| {
            check_shape(&assessment.questions, &answers)?;
            attempt.answers = answers;
            Ok(())
        })
    }

    /// Submits `answers`, or the saved answers when `None`, and scores them.
    pub fn submit_attempt(&self, p: &Principal, id: &Id, answers: Option<Vec<Option<usize>>>) -> CoreResult<Stored<Attempt>> {
        self.finish(p, Capability::SubmitAttempt, id, |assessment, attempt, now| {
            if let Some(answers) = answers {
                check_shape(&assessment.questions, &answers)?;
                attempt.answers = answers;
            }
            attempt.auto_score = Some(score_answers(&assessment.questions, &attempt.answers));
            attempt.submitted_at = Some(now);
            attempt.status = AttemptStatus::Submitted;
            Ok(())
        })
    }

    pub fn create_assignment(&self, p: &Principal, code: &str, input: AssignmentInput) -> CoreResult<Stored<Assignment>> {
        let snap = self.store.snapshot();
        let course = find_course(&snap, code, None)?;
        authorize(p, Capability::CreateAssignment, course_ctx(&snap, p, &course))?;
        let title = non_empty("title", &input.title)?;
        if !(input.max_score.is_finite() && input.max_score > 0.0) {
            return Err(CoreError::Validation("max_score must be positive".into()));
        }
        if !(input.ca_weight.is_finite() && (0.0..=CA_MAX).contains(&input.ca_weight)) {
            return Err(CoreError::invalid_spec("ca_weight_out_of_range"));
        }
        let assignment = Assignment {
            course_id: course.id.clone(),
            course_code: course.code.clone(),
            title,
            brief: input.brief,
            brief_content_id: input.brief_content_id,
            due_at: input.due_at,
            max_score: input.max_score,
            ca_weight: input.ca_weight,
        };
        let id = self.store.atomically(|tx| -> CoreResult<Id> {
            if let Some(cid) = &assignment.brief_content_id {
                let item = tx.get::<crate::model::ContentItem>(cid)?;
                if item.course_id != course.id {
                    return Err(CoreError::Validation(
                        "brief_content_id belongs to another course".into(),
                    ));
                }
            }
            check_budget(tx, &course.id, assignment.ca_weight)?;
            Ok(tx.insert(&assignment)?)
        })?;
        Ok(self.store.get(&id)?)
    }

    pub fn list_assignments(&self, p: &Principal, code: &str) -> CoreResult<Vec<Stored<Assignment>>> {
        let snap = self.store.snapshot();
        let course = find_course(&snap, code, None)?;
        authorize(p, Capability::ListAssignments, course_ctx(&snap, p, &course))?;
        Ok(snap.query(
            &Query::new()
                .eq("course_id", &course.id)
                .sort("due_at", Order::Asc),
        )?)
    }

    /// Creates or replaces the caller's submission while the assignment is open.
    pub fn submit_assignment(&self, p: &Principal, assignment_id: &Id, input: SubmissionInput) -> CoreResult<Stored<Submission>> {
        if !crate::auth::permits(p.role, Capability::SubmitAssignment) {
            return Err(CoreError::Forbidden);
        }
        let snap = self.store.snapshot();
        let assignment = snap.get::<Assignment>(assignment_id)?;
        let course = live_course(&snap, &assignment.course_id)?;
        if !is_enrolled(&snap, &p.user_id, &course.id) {
            return Err(CoreError::NotEnrolled);
        }
        if self.now() > assignment.due_at {
            return Err(CoreError::DeadlinePassed);
        }
        let text = input.text.filter(|t| !t.trim().is_empty());
        if text.is_none() && input.file.is_none() {
            return Err(CoreError::Validation("submission needs text or a file".into()));
        }
        if text.as_ref().is_some_and(|t| t.chars().count() > super::MAX_BODY_CHARS) {
            return Err(CoreError::TooLong);
        }
        let content_id = match input.file {
            Some(upload) => Some(
                self.store_content(&course, &p.user_id, ContentKind::Submission, upload)?
                    .id,
            ),
            None => None,
        };
        let id = self.store.atomically(|tx| -> CoreResult<Id> {
            let now = tx.now();
            if now > assignment.due_at {
                return Err(CoreError::DeadlinePassed);
            }
            let submission = Submission {
                assignment_id: assignment.id.clone(),
                course_id: course.id.clone(),
                student_id: p.user_id.clone(),
                text,
                content_id,
                submitted_at: now,
                score: None,
                graded_by: None,
                graded_at: None,
            };
            let key = format!("{}|{}", assignment.id, p.user_id);
            match tx.find_unique::<Submission>("assignment_student", &key) {
                Some(existing) => {
                    tx.update(&existing.id, &submission)?;
                    Ok(existing.id)
                }
                None => Ok(tx.insert(&submission)?),
            }
        })?;
        Ok(self.store.get(&id)?)
    }

    pub fn list_submissions(&self, p: &Principal, assignment_id: &Id) -> CoreResult<Vec<Stored<Submission>>> {
        let snap = self.store.snapshot();
        let assignment = snap.get::<Assignment>(assignment_id)?;
        let course = live_course(&snap, &assignment.course_id)?;
        authorize(p, Capability::ListSubmissions, course_ctx(&snap, p, &course))?;
        Ok(snap.query(
            &Query::new()
                .eq("assignment_id", assignment_id)
                .sort("student_id", Order::Asc),
        )?)
    }

    /// Sets the score; regrading overwrites. Scores move in half points.
    pub fn grade_submission(&self, p: &Principal, submission_id: &Id, score: f64) -> CoreResult<Stored<Submission>> {
        let snap = self.store.snapshot();
        let sub = snap.get::<Submission>(submission_id)?;
        let course = live_course(&snap, &sub.course_id)?;
        authorize(p, Capability::GradeSubmission, course_ctx(&snap, p, &course))?;
        self.store.atomically(|tx| -> CoreResult<()> {
            let mut sub = tx.get::<Submission>(submission_id)?;
            let assignment = tx.get::<Assignment>(&sub.assignment_id)?;
            if !(score.is_finite() && (0.0..=assignment.max_score).contains(&score)) {
                return Err(CoreError::OutOfRange);
            }
            if (score * 2.0).fract() != 0.0 {
                return Err(CoreError::Validation("scores move in steps of 0.5".into()));
            }
            sub.value.score = Some(score);
            sub.value.graded_by = Some(p.user_id.clone());
            sub.value.graded_at = Some(tx.now());
            tx.update(&sub.id, &sub.value)?;
            Ok(())
        })?;
        Ok(self.store.get(submission_id)?)
    }

    /// Gradebook row; read-only and repeatable.
    pub fn compute_result(&self, course_id: &Id, student_id: &Id) -> CoreResult<GradeResult> {
        let snap = self.store.snapshot();
        let course = live_course(&snap, course_id)?;
        grade_result(&snap, &course, student_id, self.now())
    }

    /// The caller's results, one per enrolled course, by course code.
    pub fn my_results(&self, p: &Principal) -> CoreResult<Vec<GradeResult>> {
        authorize(p, Capability::MyResults, ResourceContext::OwnedBy(&p.user_id))?;
        let snap = self.store.snapshot();
        let now = self.now();
        let enrollments: Vec<Stored<Enrollment>> =
            snap.query(&Query::new().eq("student_id", &p.user_id))?;
        let mut out = Vec::new();
        for e in enrollments {
            if let Ok(course) = live_course(&snap, &e.course_id) {
                out.push(grade_result(&snap, &course, &p.user_id, now)?);
            }
        }
        out.sort_by(|a, b| (&a.course_code, &a.session).cmp(&(&b.course_code, &b.session)));
        Ok(out)
    }

    /// One row per enrolled student, by matric number.
    pub fn course_results(&self, p: &Principal, code: &str) -> CoreResult<Vec<GradeResult>> {
        let snap = self.store.snapshot();
        let course = find_course(&snap, code, None)?;
        authorize(p, Capability::CourseResults, course_ctx(&snap, p, &course))?;
        let now = self.now();
        let enrollments: Vec<Stored<Enrollment>> =
            snap.query(&Query::new().eq("course_id", &course.id))?;
        let mut rows = Vec::new();
        for e in enrollments {
            let matric = snap
                .get::<User>(&e.student_id)
                .map(|u| u.value.username)
                .unwrap_or_default();
            rows.push((matric, grade_result(&snap, &course, &e.student_id, now)?));
        }
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(rows.into_iter().map(|(_, r)| r).collect())
    }
}
