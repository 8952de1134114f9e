//! Fuzzed attempt timelines against the deadline invariant, checked both on
//! each call and on the records persisted to disk.

use std::sync::Arc;

use chrono::Duration;
use citadel_core::domain::Role;
use citadel_core::model::{Assessment, Attempt, AttemptStatus};
use citadel_core::store::{Query, Store, StoreOptions};
use citadel_core::time::{ManualClock, Timestamp};
use citadel_core::CoreError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::support::{err, on_disk, quiz, Campus};
use crate::{ensure, Outcome};

const TIMELINES: usize = 1000;
const CODE: &str = "TIM101";

/// Millisecond jitters tried around each anchor.
const JITTER_MS: [i64; 5] = [-1000, -1, 0, 1, 1000];

/// Either an anchor nudged by a small jitter or a uniform point in `[lo, hi]`.
fn pick(rng: &mut ChaCha8Rng, anchors: &[Timestamp], lo: Timestamp, hi: Timestamp) -> Timestamp {
    if rng.gen_bool(0.35) {
        let a = anchors[rng.gen_range(0..anchors.len())];
        a + Duration::milliseconds(JITTER_MS[rng.gen_range(0..JITTER_MS.len())])
    } else {
        let span = (hi - lo).num_milliseconds().max(0);
        lo + Duration::milliseconds(rng.gen_range(0..=span))
    }
}

fn expected_deadline(started: Timestamp, closes: Timestamp, limit: Option<u32>) -> Timestamp {
    match limit {
        Some(m) => closes.min(started + Duration::minutes(i64::from(m))),
        None => closes,
    }
}

#[derive(Default)]
struct Tally {
    started: usize,
    refused_start: usize,
    submitted: usize,
    late: usize,
}

pub fn run() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let base = Timestamp::ymd_hms(2024, 3, 4, 8, 0, 0);
    let clock = Arc::new(ManualClock::new(base - Duration::days(1)));
    let mut rng = ChaCha8Rng::seed_from_u64(0x0DEA_D11E);
    let mut wrong = Vec::new();
    let mut tally = Tally::default();
    {
        let c = on_disk(dir.path(), &clock)?;
        let campus = Campus::new(&c)?;
        let lect = campus.user("STF/0100", Role::Lecturer)?;
        campus.course(CODE, &lect)?;
        let mut students = Vec::new();
        for i in 1..=5 {
            let s = campus.user(&format!("BU/24/{i:04}"), Role::Student)?;
            campus.enroll(&s.user_id, CODE)?;
            students.push(s);
        }
        let student = &students[0];

        for i in 0..TIMELINES {
            let opens = base + Duration::hours(6 * i as i64);
            let window = rng.gen_range(2..=180u32);
            let closes = opens + Duration::minutes(i64::from(window));
            let limit = rng.gen_bool(0.6).then(|| rng.gen_range(1..=window));
            clock.set(opens - Duration::hours(1));
            let q = c
                .create_assessment(&lect, CODE, quiz(opens, closes, limit, 3, 0.0))
                .map_err(err)?;

            let start = pick(&mut rng, &[opens, closes], opens - Duration::minutes(10), closes + Duration::minutes(10));
            clock.set(start);
            let in_window = opens <= start && start <= closes;
            let attempt = match c.start_attempt(student, &q.id) {
                Ok(a) if in_window => a,
                Err(CoreError::WindowNotOpen | CoreError::WindowClosed) if !in_window => {
                    tally.refused_start += 1;
                    continue;
                }
                other => {
                    wrong.push(format!("timeline {i}: start at {start} in [{opens}, {closes}] gave {other:?}"));
                    continue;
                }
            };
            tally.started += 1;
            let deadline = expected_deadline(start, closes, limit);
            if attempt.deadline != deadline {
                wrong.push(format!("timeline {i}: deadline {} != {deadline}", attempt.deadline));
            }

            let mut now = start;
            if rng.gen_bool(0.5) {
                now = pick(&mut rng, &[deadline], start, deadline + Duration::minutes(2)).max(start);
                clock.set(now);
                let answers = (0..3).map(|_| Some(rng.gen_range(0..3))).collect();
                match c.save_answers(student, &attempt.id, answers) {
                    Ok(_) if now <= deadline => {}
                    Err(CoreError::DeadlinePassed) if now > deadline => {
                        tally.late += 1;
                        continue;
                    }
                    other => {
                        wrong.push(format!("timeline {i}: save at {now}, deadline {deadline}: {other:?}"));
                        continue;
                    }
                }
            }
            let anchors = [deadline, start + Duration::minutes(i64::from(limit.unwrap_or(window))), closes];
            let at = pick(&mut rng, &anchors, now, deadline + Duration::minutes(10)).max(now);
            clock.set(at);
            match c.submit_attempt(student, &attempt.id, None) {
                Ok(a) if at <= deadline => {
                    tally.submitted += 1;
                    if a.submitted_at != Some(at) {
                        wrong.push(format!("timeline {i}: submitted_at {:?} != {at}", a.submitted_at));
                    }
                }
                Err(CoreError::DeadlinePassed) if at > deadline => tally.late += 1,
                other => wrong.push(format!("timeline {i}: submit at {at}, deadline {deadline}: {other:?}")),
            }
        }

        boundary(&c, &clock, &lect, &students[1..], base - Duration::days(1))
            .map_err(|e| format!("boundary: {e}"))?;
    }

    // Reopen from disk and check every persisted attempt.
    let store = Store::open(dir.path(), clock.clone(), StoreOptions::default()).map_err(err)?;
    let attempts = store.query::<Attempt>(&Query::new()).map_err(err)?;
    let mut violations = Vec::new();
    for a in &attempts {
        let asm = store.get::<Assessment>(&a.assessment_id).map_err(err)?;
        let deadline = expected_deadline(a.started_at, asm.closes_at, asm.duration_limit);
        let started_ok = asm.opens_at <= a.started_at && a.started_at <= asm.closes_at;
        let submit_ok = match (a.status, a.submitted_at) {
            (AttemptStatus::Submitted, Some(t)) => a.started_at <= t && t <= deadline,
            (AttemptStatus::Expired | AttemptStatus::InProgress, None) => true,
            _ => false,
        };
        if !(started_ok && submit_ok && a.deadline == deadline) {
            violations.push(format!("{}: {:?}", a.id, a.value));
        }
    }
    ensure(wrong.is_empty(), || format!("{} call outcomes disagree, first: {}", wrong.len(), wrong[0]))?;
    ensure(violations.is_empty(), || {
        format!("{} persisted attempts violate the invariant, first: {}", violations.len(), violations[0])
    })?;
    ensure(attempts.len() == tally.started + 3, || {
        format!("{} attempts persisted, expected {}", attempts.len(), tally.started + 3)
    })?;
    Ok(format!(
        "{TIMELINES} timelines: {} started, {} refused at start, {} submitted, {} rejected late; \
         {} persisted attempts, 0 violations; closes_at accepted, closes_at+1s rejected",
        tally.started,
        tally.refused_start,
        tally.submitted,
        tally.late,
        attempts.len()
    ))
}

/// Submitting and starting exactly at `closes_at` succeed; one second later fails.
fn boundary(
    c: &citadel_core::Citadel,
    clock: &ManualClock,
    lect: &citadel_core::auth::Principal,
    s: &[citadel_core::auth::Principal],
    before: Timestamp,
) -> Result<(), String> {
    let opens = Timestamp::ymd_hms(2023, 6, 1, 9, 0, 0);
    let closes = opens + Duration::hours(1);
    clock.set(before.min(opens - Duration::hours(1)));
    let q = c.create_assessment(lect, CODE, quiz(opens, closes, None, 3, 0.0)).map_err(err)?;

    clock.set(opens + Duration::minutes(5));
    let a0 = c.start_attempt(&s[0], &q.id).map_err(err)?;
    let a1 = c.start_attempt(&s[1], &q.id).map_err(err)?;
    clock.set(closes);
    c.submit_attempt(&s[0], &a0.id, None)
        .map_err(|e| format!("submit at closes_at refused: {e}"))?;
    let late_start = c.start_attempt(&s[2], &q.id).map_err(|e| format!("start at closes_at refused: {e}"))?;
    clock.set(closes + Duration::seconds(1));
    match c.submit_attempt(&s[1], &a1.id, None) {
        Err(CoreError::DeadlinePassed) => {}
        other => return Err(format!("submit at closes_at+1s gave {other:?}")),
    }
    match c.start_attempt(&s[3], &q.id) {
        Err(CoreError::WindowClosed) => {}
        other => return Err(format!("start at closes_at+1s gave {other:?}")),
    }
    match c.submit_attempt(&s[2], &late_start.id, None) {
        Err(CoreError::DeadlinePassed) => Ok(()),
        other => Err(format!("attempt started at closes_at submitted late gave {other:?}")),
    }
}
