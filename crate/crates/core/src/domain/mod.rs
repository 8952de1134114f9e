//! Pure domain rules: identity formats, grading, assessment windows and timetables.

pub mod grading;
pub mod identity;
pub mod timetable;
pub mod window;

pub use grading::{compute_grade, GradeError, GradeFragment, Letter, CA_MAX, EXAM_MAX};
pub use identity::{
    is_course_code, is_session_label, validate_identity, IdentityError, MatricNumber, Role, StaffId,
};
pub use timetable::{timetable_for_day, Activity, TimetableEntry};
pub use window::{window_state, InvalidWindow, WindowState};
