//! Auto-scoring and gradebook results against the brute-force oracle, on the
//! demo fixture plus a cohort of extra students with random answers.

use std::sync::Arc;

use chrono::Duration;
use citadel_core::domain::{compute_grade, Role};
use citadel_core::fixture;
use citadel_core::model::AssessmentKind;
use citadel_core::store::Id;
use citadel_core::time::{ManualClock, Timestamp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::oracle::{self, close, Rows};
use crate::support::{enroll, err, in_memory, new_user, registrar};
use crate::{ensure, Outcome};

const EXTRA_STUDENTS: usize = 100;

/// Totals on and around each letter boundary with the letter the scale gives.
const BOUNDARIES: [(f64, &str); 10] = [
    (39.99, "F"),
    (40.0, "E"),
    (44.0, "E"),
    (45.0, "D"),
    (49.0, "D"),
    (50.0, "C"),
    (59.0, "C"),
    (60.0, "B"),
    (69.0, "B"),
    (70.0, "A"),
];

fn random_answers(rng: &mut ChaCha8Rng, options: &[usize]) -> Vec<Option<usize>> {
    options
        .iter()
        .map(|&n| (!rng.gen_bool(0.15)).then(|| rng.gen_range(0..n)))
        .collect()
}

pub fn run() -> Outcome {
    let clock = Arc::new(ManualClock::new(fixture::demo_epoch()));
    let c = in_memory(&clock);
    let reg = registrar(&c)?;
    fixture::seed(&c, &clock, "demo").map_err(err)?;
    let courses = c.list_courses(&reg).map_err(err)?;
    let dept = c.list_departments(&reg).map_err(err)?[0].id.clone();

    let mut extra = Vec::new();
    for i in 1..=EXTRA_STUDENTS {
        let u = c.create_user(&reg, new_user(&format!("BU/24/{i:04}"), Role::Student, &dept)).map_err(err)?;
        for course in &courses {
            enroll(&c, &reg, &u.id, &course.code)?;
        }
        extra.push(c.act_as(&u.id).map_err(err)?);
    }

    // Every extra student answers every assessment at random; record what was sent.
    let mut rng = ChaCha8Rng::seed_from_u64(0x6EAD_E5);
    let mut sent: Vec<(Id, Id, Vec<Option<usize>>, f64)> = Vec::new();
    let mut quizzes = 0;
    for course in &courses {
        let lecturer = c.act_as(&course.lecturer_id).map_err(err)?;
        for asm in c.list_assessments(&lecturer, &course.code).map_err(err)? {
            quizzes += usize::from(asm.kind == AssessmentKind::Quiz);
            let options: Vec<usize> = asm.questions.iter().map(|q| q.options.len()).collect();
            clock.set(asm.opens_at + Duration::minutes(1));
            for (n, s) in extra.iter().enumerate() {
                let answers = match n {
                    0 => asm.questions.iter().map(|q| q.correct_index).collect(),
                    1 => vec![None; options.len()],
                    _ => random_answers(&mut rng, &options),
                };
                let a = c.start_attempt(s, &asm.id).map_err(err)?;
                let done = c.submit_attempt(s, &a.id, Some(answers.clone())).map_err(err)?;
                let score = done.auto_score.ok_or("submitted attempt without a score")?;
                sent.push((asm.id.clone(), a.id.clone(), answers, score));
            }
        }
    }

    let rows = Rows::parse(&c.store().dump_string())?;
    let mut score_mismatch = Vec::new();
    for (asm_id, attempt_id, answers, score) in &sent {
        let asm = rows.by_id("assessment", asm_id.as_str()).ok_or("assessment row missing")?;
        let want = oracle::rescore(&asm["questions"], &json!(answers));
        if *score != want {
            score_mismatch.push(format!("{attempt_id}: service {score}, oracle {want}"));
        }
    }
    ensure(score_mismatch.is_empty(), || {
        format!("{} auto scores disagree, first: {}", score_mismatch.len(), score_mismatch[0])
    })?;

    // Results for every enrollment, during the term and long after it.
    let mut compared = 0;
    let mut result_mismatch = Vec::new();
    for at in [Timestamp::ymd_hms(2024, 1, 11, 12, 0, 0), Timestamp::ymd_hms(2024, 6, 1, 0, 0, 0)] {
        clock.set(at);
        for e in rows.of("enrollment") {
            let (course_id, student_id) = (str_field(e, "course_id")?, str_field(e, "student_id")?);
            let got = c
                .compute_result(&Id::from(course_id), &Id::from(student_id))
                .map_err(err)?;
            let want = oracle::result(&rows, course_id, student_id, at.as_datetime());
            compared += 1;
            let same = close(got.ca_score, want.ca)
                && close(got.exam_score, want.exam)
                && close(got.total, want.total)
                && got.letter.as_str() == want.letter
                && got.grade_point == want.grade_point;
            if !same {
                result_mismatch.push(format!("{course_id}/{student_id} at {at}: service {got:?}, oracle {want:?}"));
            }
        }
    }
    ensure(result_mismatch.is_empty(), || {
        format!("{} results disagree, first: {}", result_mismatch.len(), result_mismatch[0])
    })?;

    for (total, letter) in BOUNDARIES {
        let ca = total.min(30.0);
        let g = compute_grade(ca, total - ca).map_err(err)?;
        ensure(g.letter.as_str() == letter && oracle::letter(total).0 == letter, || {
            format!("total {total} graded {}, scale says {letter}", g.letter.as_str())
        })?;
        ensure(g.grade_point == oracle::letter(total).1, || format!("total {total}: grade point {}", g.grade_point))?;
    }

    Ok(format!(
        "{} scored attempts ({EXTRA_STUDENTS} answer vectors on each of {quizzes} quizzes and {} exams) match the rescoring; \
         {compared} results within 1e-9; 10 boundary totals graded per the scale",
        sent.len(),
        sent.len() / EXTRA_STUDENTS - quizzes
    ))
}

fn str_field<'a>(v: &'a Value, k: &str) -> Result<&'a str, String> {
    v[k].as_str().ok_or_else(|| format!("row without {k}"))
}
