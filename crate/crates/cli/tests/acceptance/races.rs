//! Concurrent writers: duplicate registrations, chat sequence numbers over
//! HTTP, and the continuous-assessment budget under parallel quiz creation.

use std::sync::{Arc, Barrier};
use std::thread;

use chrono::Duration;
use citadel_core::auth::Principal;
use citadel_core::domain::Role;
use citadel_core::model::AssessmentKind;
use citadel_core::time::{ManualClock, Timestamp};
use citadel_core::{Citadel, CoreError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::common::{self, Server, DEMO_PW, REGISTRAR, REGISTRAR_PW};
use crate::support::{err, in_memory, new_user, quiz, Campus};
use crate::{ensure, Outcome};

const REGISTRATION_TRIALS: usize = 1000;
const POSTS_PER_CLIENT: usize = 100;
const BUDGET_TRIALS: usize = 50;
const BUDGET_WRITERS: usize = 8;

pub fn run() -> Outcome {
    let a = registrations()?;
    let b = chat_sequence()?;
    let c = ca_budget()?;
    Ok(format!("(a) {a}; (b) {b}; (c) {c}"))
}

fn registrations() -> Result<String, String> {
    let clock = Arc::new(ManualClock::new(Timestamp::ymd_hms(2024, 1, 8, 8, 0, 0)));
    let c = in_memory(&clock);
    let campus = Campus::new(&c)?;
    let (reg, dept) = (&campus.reg, &campus.dept);
    let mut bad = Vec::new();
    for trial in 0..REGISTRATION_TRIALS {
        let username = format!("BU/30/{:04}", trial + 1);
        let barrier = Barrier::new(2);
        let outcomes: Vec<_> = thread::scope(|s| {
            let handles: Vec<_> = (0..2)
                .map(|_| {
                    s.spawn(|| {
                        barrier.wait();
                        c.create_user(reg, new_user(&username, Role::Student, dept))
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("writer thread")).collect()
        });
        let ok = outcomes.iter().filter(|r| r.is_ok()).count();
        let dup = outcomes
            .iter()
            .filter(|r| matches!(r, Err(CoreError::ConstraintViolation { .. })))
            .count();
        if ok != 1 || dup != 1 {
            bad.push(format!("trial {trial}: {outcomes:?}"));
        }
    }
    ensure(bad.is_empty(), || format!("{} trials without exactly one success, first: {}", bad.len(), bad[0]))?;
    Ok(format!("{REGISTRATION_TRIALS} duplicate registration races, exactly one success each"))
}

fn chat_sequence() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(err)?;
    common::bootstrap(dir.path());
    common::seed(dir.path());
    let server = Server::start(dir.path(), &[]);
    let api = server.api();
    let reg = api.login(REGISTRAR, REGISTRAR_PW);
    let lecturers = api.get("/api/users?role=lecturer&per_page=100", &reg).expect(200, "list lecturers");
    let lecturer = &lecturers["items"][0];
    let dept = lecturer["department_id"].clone();
    api.post(
        "/api/courses",
        &reg,
        json!({"code": "RCE101", "title": "Race Room", "department_id": dept,
               "lecturer_id": lecturer["id"], "session": "2023/2024"}),
    )
    .expect(201, "create course");
    let posters = ["BU/23/0001", "BU/23/0002"];
    for p in posters {
        api.post("/api/enrollments", &reg, json!({"username": p, "course_code": "RCE101"}))
            .expect(201, "enroll");
    }
    let tokens: Vec<String> = posters.iter().map(|p| api.login(p, DEMO_PW)).collect();

    let barrier = Barrier::new(tokens.len());
    let failures: Vec<String> = thread::scope(|s| {
        let handles: Vec<_> = tokens
            .iter()
            .enumerate()
            .map(|(n, t)| {
                let (api, barrier) = (api.clone(), &barrier);
                s.spawn(move || {
                    barrier.wait();
                    let mut failures = Vec::new();
                    let mut last = 0;
                    for i in 0..POSTS_PER_CLIENT {
                        let r = api.post("/api/chat/RCE101/messages", t, json!({"body": format!("client {n} post {i}")}));
                        if r.status != 201 {
                            failures.push(format!("client {n} post {i}: {} {}", r.status, r.text()));
                            continue;
                        }
                        let seq = r.json()["seq"].as_u64().unwrap_or(0);
                        if seq <= last {
                            failures.push(format!("client {n}: seq {seq} after {last}"));
                        }
                        last = seq;
                    }
                    failures
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("poster thread")).collect()
    });
    ensure(failures.is_empty(), || format!("{} failed posts, first: {}", failures.len(), failures[0]))?;

    let page = api
        .get("/api/chat/RCE101/messages?after=0&wait=0", &tokens[0])
        .expect(200, "fetch chat");
    let seqs: Vec<u64> = page["messages"]
        .as_array()
        .ok_or("no messages array")?
        .iter()
        .map(|m| m["seq"].as_u64().unwrap_or(0))
        .collect();
    let total = (tokens.len() * POSTS_PER_CLIENT) as u64;
    let want: Vec<u64> = (1..=total).collect();
    ensure(seqs == want, || format!("sequence is not 1..{total}: got {} values, first {:?}", seqs.len(), &seqs[..seqs.len().min(5)]))?;
    ensure(page["last_seq"] == total, || format!("last_seq {}", page["last_seq"]))?;
    server.terminate();
    Ok(format!("2x{POSTS_PER_CLIENT} concurrent chat posts, seq exactly 1..{total}"))
}

fn ca_budget() -> Result<String, String> {
    let opens = Timestamp::ymd_hms(2024, 3, 1, 9, 0, 0);
    let clock = Arc::new(ManualClock::new(opens - Duration::days(1)));
    let c = in_memory(&clock);
    let campus = Campus::new(&c)?;
    let lect = campus.user("STF/0100", Role::Lecturer)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0xB0D6_E7);
    let mut refused = 0;
    let mut over = Vec::new();
    for trial in 0..BUDGET_TRIALS {
        let code = format!("BUD{trial:03}");
        campus.course(&code, &lect)?;
        let weights: Vec<f64> = (0..BUDGET_WRITERS)
            .map(|_| f64::from(rng.gen_range(2..=30u32)) / 2.0)
            .collect();
        let results = create_concurrently(&c, &lect, &code, opens, &weights);
        for r in &results {
            match r {
                Ok(()) => {}
                Err(CoreError::InvalidSpec { .. }) => refused += 1,
                Err(e) => return Err(format!("trial {trial}: unexpected error {e:?}")),
            }
        }
        let sum: f64 = c
            .list_assessments(&lect, &code)
            .map_err(err)?
            .iter()
            .filter(|a| a.kind == AssessmentKind::Quiz)
            .map(|a| a.ca_weight)
            .sum();
        if sum > 30.0 + 1e-9 {
            over.push(format!("trial {trial}: weights {weights:?} stored sum {sum}"));
        }
    }
    ensure(over.is_empty(), || format!("{} courses over budget, first: {}", over.len(), over[0]))?;
    ensure(refused > 0, || "no creation was ever refused; the race was not exercised".into())?;
    Ok(format!(
        "{BUDGET_TRIALS} trials of {BUDGET_WRITERS} parallel quiz creations, {refused} refused, no course above 30"
    ))
}

fn create_concurrently(c: &Citadel, lect: &Principal, code: &str, opens: Timestamp, weights: &[f64]) -> Vec<Result<(), CoreError>> {
    let barrier = Barrier::new(weights.len());
    thread::scope(|s| {
        let handles: Vec<_> = weights
            .iter()
            .map(|&w| {
                let barrier = &barrier;
                s.spawn(move || {
                    barrier.wait();
                    c.create_assessment(lect, code, quiz(opens, opens + Duration::hours(1), None, 3, w))
                        .map(|_| ())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("creator thread")).collect()
    })
}
