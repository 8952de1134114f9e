use chrono::{NaiveDate, NaiveTime};
use serde::{Deserialize, Serialize};

use crate::store::Id;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activity {
    Lecture,
    Quiz,
    Exam,
    LiveSession,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimetableEntry {
    pub course_id: Id,
    pub course_code: String,
    pub date: NaiveDate,
    pub start: NaiveTime,
    pub end: NaiveTime,
    pub activity: Activity,
    pub venue: String,
}

impl TimetableEntry {
    pub fn is_well_formed(&self) -> bool {
        self.start < self.end
    }
}

/// Entries falling on `day`, earliest start first, ties by course code.
pub fn timetable_for_day<'a, I>(entries: I, day: NaiveDate) -> Vec<&'a TimetableEntry>
where
    I: IntoIterator<Item = &'a TimetableEntry>,
{
    let mut out: Vec<_> = entries.into_iter().filter(|e| e.date == day).collect();
    out.sort_by(|a, b| a.start.cmp(&b.start).then_with(|| a.course_code.cmp(&b.course_code)));
    out
}
