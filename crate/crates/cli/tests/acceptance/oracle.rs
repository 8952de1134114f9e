//! Independent recomputation of grades and report rows from raw dump lines.
//! Nothing here calls into the service; it reads the JSON bodies directly.

use std::collections::{BTreeSet, HashMap};

use chrono::{DateTime, Utc};
use serde_json::Value;

/// Letter scale as published: lowest total for each letter, then points.
pub const SCALE: [(f64, &str, f64); 5] = [
    (70.0, "A", 5.0),
    (60.0, "B", 4.0),
    (50.0, "C", 3.0),
    (45.0, "D", 2.0),
    (40.0, "E", 1.0),
];

pub fn letter(total: f64) -> (&'static str, f64) {
    SCALE
        .iter()
        .find(|(min, _, _)| total >= *min)
        .map_or(("F", 0.0), |(_, l, p)| (*l, *p))
}

/// Dump rows grouped by kind; each value is the body with `id` added.
pub struct Rows {
    by_kind: HashMap<String, Vec<Value>>,
}

impl Rows {
    pub fn parse(dump: &str) -> Result<Rows, String> {
        let mut by_kind: HashMap<String, Vec<Value>> = HashMap::new();
        for (n, line) in dump.lines().enumerate() {
            let rec: Value = serde_json::from_str(line).map_err(|e| format!("dump line {}: {e}", n + 1))?;
            let kind = rec["kind"].as_str().ok_or("record without kind")?.to_owned();
            let mut body = rec["body"].clone();
            body["id"] = rec["id"].clone();
            by_kind.entry(kind).or_default().push(body);
        }
        Ok(Rows { by_kind })
    }

    pub fn of(&self, kind: &str) -> &[Value] {
        self.by_kind.get(kind).map_or(&[], Vec::as_slice)
    }

    pub fn by_id(&self, kind: &str, id: &str) -> Option<&Value> {
        self.of(kind).iter().find(|v| v["id"] == id)
    }

    fn where_eq(&self, kind: &str, pairs: &[(&str, &str)]) -> Vec<&Value> {
        self.of(kind)
            .iter()
            .filter(|v| pairs.iter().all(|(k, want)| v[*k].as_str() == Some(*want)))
            .collect()
    }
}

pub fn ts(v: &Value) -> DateTime<Utc> {
    DateTime::parse_from_rfc3339(v.as_str().expect("timestamp string"))
        .expect("RFC 3339 timestamp")
        .with_timezone(&Utc)
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("expected a number, got {v}"))
}

/// Brute-force rescoring: walk the questions and add the points of each one
/// whose answer equals its key.
pub fn rescore(questions: &Value, answers: &Value) -> f64 {
    let qs = questions.as_array().expect("questions array");
    let ans = answers.as_array().expect("answers array");
    let mut score = 0.0;
    for i in 0..qs.len() {
        let key = qs[i]["correct_index"].as_u64();
        let given = ans.get(i).and_then(Value::as_u64);
        if given.is_some() && given == key {
            score += num(&qs[i]["points"]);
        }
    }
    score
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expected {
    pub ca: f64,
    pub exam: f64,
    pub total: f64,
    pub letter: &'static str,
    pub grade_point: f64,
}

/// Score an attempt counts for at `now`: finished attempts by their saved
/// answers, unfinished ones only once their deadline has passed.
fn attempt_score(assessment: &Value, attempt: &Value, now: DateTime<Utc>) -> f64 {
    let finished = match attempt["status"].as_str() {
        Some("submitted" | "expired") => true,
        Some("in_progress") => now > ts(&attempt["deadline"]),
        other => panic!("unknown attempt status {other:?}"),
    };
    if finished {
        rescore(&assessment["questions"], &attempt["answers"])
    } else {
        0.0
    }
}

pub fn result(rows: &Rows, course_id: &str, student_id: &str, now: DateTime<Utc>) -> Expected {
    let mut ca = 0.0;
    let mut exam = 0.0;
    for asm in rows.where_eq("assessment", &[("course_id", course_id)]) {
        let id = asm["id"].as_str().unwrap();
        let Some(att) = rows
            .where_eq("attempt", &[("assessment_id", id), ("student_id", student_id)])
            .first()
            .copied()
        else {
            continue;
        };
        let total_points = num(&asm["points_total"]);
        let frac = if total_points > 0.0 {
            attempt_score(asm, att, now) / total_points
        } else {
            0.0
        };
        match asm["kind"].as_str() {
            Some("quiz") => ca += frac * num(&asm["ca_weight"]),
            Some("exam") => exam += frac * 70.0,
            other => panic!("unknown assessment kind {other:?}"),
        }
    }
    for asg in rows.where_eq("assignment", &[("course_id", course_id)]) {
        let id = asg["id"].as_str().unwrap();
        let graded = rows
            .where_eq("submission", &[("assignment_id", id), ("student_id", student_id)])
            .into_iter()
            .find_map(|s| s["score"].as_f64());
        if let Some(score) = graded {
            ca += score / num(&asg["max_score"]) * num(&asg["ca_weight"]);
        }
    }
    let ca = ca.clamp(0.0, 30.0);
    let exam = exam.clamp(0.0, 70.0);
    let total = ca + exam;
    let (letter, grade_point) = letter(total);
    Expected {
        ca,
        exam,
        total,
        letter,
        grade_point,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub matric: String,
    pub name: String,
    pub materials_downloaded: usize,
    pub assignments_submitted: usize,
    pub assignments_total: usize,
    pub quizzes_taken: usize,
    pub quizzes_total: usize,
    pub grade: Expected,
}

/// Progress rows for a course recounted from raw rows, ordered by matric.
pub fn report(rows: &Rows, course_id: &str, now: DateTime<Utc>) -> Vec<ReportRow> {
    let course = [("course_id", course_id)];
    let quizzes: BTreeSet<&str> = rows
        .where_eq("assessment", &course)
        .into_iter()
        .filter(|a| a["kind"] == "quiz")
        .map(|a| a["id"].as_str().unwrap())
        .collect();
    let materials: BTreeSet<&str> = rows
        .where_eq("content_item", &course)
        .into_iter()
        .filter(|c| c["kind"] != "submission")
        .map(|c| c["id"].as_str().unwrap())
        .collect();
    let assignments_total = rows.where_eq("assignment", &course).len();

    let mut out = Vec::new();
    for e in rows.where_eq("enrollment", &course) {
        let sid = e["student_id"].as_str().unwrap();
        let user = rows.by_id("user", sid).expect("enrolled user exists");
        let mine = [("course_id", course_id), ("student_id", sid)];
        let downloaded: BTreeSet<&str> = rows
            .where_eq("download_event", &mine)
            .into_iter()
            .filter_map(|d| d["content_id"].as_str())
            .filter(|c| materials.contains(c))
            .collect();
        let submitted: BTreeSet<&str> = rows
            .where_eq("submission", &mine)
            .into_iter()
            .filter_map(|s| s["assignment_id"].as_str())
            .collect();
        let taken: BTreeSet<&str> = rows
            .where_eq("attempt", &mine)
            .into_iter()
            .filter_map(|a| a["assessment_id"].as_str())
            .filter(|a| quizzes.contains(a))
            .collect();
        out.push(ReportRow {
            matric: user["username"].as_str().unwrap().to_owned(),
            name: user["full_name"].as_str().unwrap().to_owned(),
            materials_downloaded: downloaded.len(),
            assignments_submitted: submitted.len(),
            assignments_total,
            quizzes_taken: taken.len(),
            quizzes_total: quizzes.len(),
            grade: result(rows, course_id, sid, now),
        });
    }
    out.sort_by(|a, b| a.matric.cmp(&b.matric));
    out
}

pub fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9
}
