//! Course grading on the five-point scale.
//!
//! A course total is the continuous-assessment score (at most 30) plus the
//! examination score (at most 70). Letters are assigned from the total:
//!
//! | total    | letter | point |
//! |----------|--------|-------|
//! | 70 – 100 | A      | 5.0   |
//! | 60 – <70 | B      | 4.0   |
//! | 50 – <60 | C      | 3.0   |
//! | 45 – <50 | D      | 2.0   |
//! | 40 – <45 | E      | 1.0   |
//! | 0 – <40  | F      | 0.0   |

use std::fmt;

use serde::{Deserialize, Serialize};

pub const CA_MAX: f64 = 30.0;
pub const EXAM_MAX: f64 = 70.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Letter {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl Letter {
    pub fn grade_point(&self) -> f64 {
        match self {
            Letter::A => 5.0,
            Letter::B => 4.0,
            Letter::C => 3.0,
            Letter::D => 2.0,
            Letter::E => 1.0,
            Letter::F => 0.0,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Letter::A => "A",
            Letter::B => "B",
            Letter::C => "C",
            Letter::D => "D",
            Letter::E => "E",
            Letter::F => "F",
        }
    }

    pub fn for_total(total: f64) -> Letter {
        if total >= 70.0 {
            Letter::A
        } else if total >= 60.0 {
            Letter::B
        } else if total >= 50.0 {
            Letter::C
        } else if total >= 45.0 {
            Letter::D
        } else if total >= 40.0 {
            Letter::E
        } else {
            Letter::F
        }
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradeFragment {
    pub total: f64,
    pub letter: Letter,
    pub grade_point: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum GradeError {
    #[error("continuous assessment score {0} outside [0, 30]")]
    CaOutOfRange(f64),
    #[error("examination score {0} outside [0, 70]")]
    ExamOutOfRange(f64),
}

pub fn compute_grade(ca_score: f64, exam_score: f64) -> Result<GradeFragment, GradeError> {
    if !(0.0..=CA_MAX).contains(&ca_score) {
        return Err(GradeError::CaOutOfRange(ca_score));
    }
    if !(0.0..=EXAM_MAX).contains(&exam_score) {
        return Err(GradeError::ExamOutOfRange(exam_score));
    }
    let total = ca_score + exam_score;
    let letter = Letter::for_total(total);
    Ok(GradeFragment {
        total,
        letter,
        grade_point: letter.grade_point(),
    })
}
