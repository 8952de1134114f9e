use chrono::{NaiveDate, NaiveTime};
use serde::Deserialize;

use super::{course_ctx, find_course, live_course, non_empty, Citadel, PageRequest, Paged};
use crate::auth::{authorize, Capability, Principal, ResourceContext};
use crate::blob::sha256_hex;
use crate::domain::{Activity, Role, TimetableEntry};
use crate::error::{CoreError, CoreResult};
use crate::model::{ContentItem, ContentKind, Course, DownloadEvent, LibraryBook};
use crate::store::{Id, Kind, Query, Read, StoreError, Stored};

/// An uploaded file as received from a client.
#[derive(Debug, Clone, Default)]
pub struct Upload {
    pub filename: String,
    pub media_type: Option<String>,
    pub kind: Option<ContentKind>,
    pub bytes: Vec<u8>,
    /// Digest the client claims; verified against the received bytes.
    pub sha256: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Download {
    pub item: Stored<ContentItem>,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct BookInput {
    pub title: String,
    pub author: String,
    #[serde(default)]
    pub isbn: Option<String>,
    #[serde(default)]
    pub location: String,
    #[serde(default)]
    pub copies_total: i64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct TimetableInput {
    pub course_code: String,
    #[serde(default)]
    pub session: Option<String>,
    pub date: NaiveDate,
    pub start: NaiveTime,
    pub end: NaiveTime,
    pub activity: Activity,
    #[serde(default)]
    pub venue: String,
}

/// Keeps the last path component and drops control characters.
pub(crate) fn sanitize_filename(raw: &str) -> String {
    let base = raw.rsplit(['/', '\\']).next().unwrap_or("");
    let clean: String = base.chars().filter(|c| !c.is_control()).collect();
    let clean = clean.trim().trim_start_matches('.').to_owned();
    if clean.is_empty() {
        "upload.bin".to_owned()
    } else {
        clean
    }
}

/// Student submissions are visible only to their author and the course lecturer.
pub(crate) fn may_download(snap: &impl Read, p: &Principal, item: &ContentItem, course: &Stored<Course>) -> bool {
    if authorize(p, Capability::DownloadContent, course_ctx(snap, p, course)).is_err() {
        return false;
    }
    match item.kind {
        ContentKind::Submission => p.role == Role::Lecturer || item.uploaded_by == p.user_id,
        _ => true,
    }
}

fn book_from(input: BookInput) -> CoreResult<LibraryBook> {
    if input.copies_total < 0 {
        return Err(CoreError::Validation("copies_total must not be negative".into()));
    }
    let copies_total = u32::try_from(input.copies_total)
        .map_err(|_| CoreError::Validation("copies_total is too large".into()))?;
    Ok(LibraryBook {
        title: non_empty("title", &input.title)?,
        author: non_empty("author", &input.author)?,
        isbn: input
            .isbn
            .map(|s| s.trim().to_owned())
            .filter(|s| !s.is_empty()),
        location: input.location.trim().to_owned(),
        copies_total,
    })
}

fn duplicate_book(e: StoreError) -> CoreError {
    match e {
        StoreError::ConstraintViolation { .. } => CoreError::DuplicateBook,
        other => other.into(),
    }
}

impl Citadel {
    pub(crate) fn store_content(&self, course: &Stored<Course>, uploader: &Id, kind: ContentKind, upload: Upload) -> CoreResult<Stored<ContentItem>> {
        let size = upload.bytes.len() as u64;
        if size > self.settings.max_upload_bytes {
            return Err(CoreError::TooLarge);
        }
        let digest = sha256_hex(&upload.bytes);
        if let Some(claimed) = &upload.sha256 {
            if !claimed.trim().eq_ignore_ascii_case(&digest) {
                return Err(CoreError::ChecksumMismatch);
            }
        }
        let (blob_ref, _) = self
            .blobs
            .put(&upload.bytes)
            .map_err(|e| CoreError::Internal(format!("blob write: {e}")))?;
        let media_type = upload
            .media_type
            .map(|m| m.trim().to_owned())
            .filter(|m| !m.is_empty())
            .unwrap_or_else(|| "application/octet-stream".to_owned());
        let item = ContentItem {
            course_id: course.id.clone(),
            owner_course: course.code.clone(),
            kind,
            filename: sanitize_filename(&upload.filename),
            media_type,
            size_bytes: size,
            sha256: digest,
            uploaded_by: uploader.clone(),
            uploaded_at: self.now(),
            blob_ref,
        };
        let id = self.store.atomically(|tx| -> CoreResult<Id> {
            let mut item = item;
            item.uploaded_at = tx.now();
            Ok(tx.insert(&item)?)
        })?;
        Ok(self.store.get(&id)?)
    }

    pub fn upload_material(&self, p: &Principal, code: &str, upload: Upload) -> CoreResult<Stored<ContentItem>> {
        let snap = self.store.snapshot();
        let course = find_course(&snap, code, None)?;
        authorize(p, Capability::UploadMaterial, course_ctx(&snap, p, &course))?;
        let kind = upload.kind.unwrap_or(ContentKind::LectureMaterial);
        if kind == ContentKind::Submission {
            return Err(CoreError::Validation(
                "submissions are uploaded against an assignment".into(),
            ));
        }
        self.store_content(&course, &p.user_id, kind, upload)
    }

    /// Items of the course the caller may download, oldest first.
    pub fn list_materials(&self, p: &Principal, code: &str) -> CoreResult<Vec<Stored<ContentItem>>> {
        let snap = self.store.snapshot();
        let course = find_course(&snap, code, None)?;
        authorize(p, Capability::ListMaterials, course_ctx(&snap, p, &course))?;
        let mut items: Vec<Stored<ContentItem>> =
            snap.query(&Query::new().eq("course_id", &course.id))?;
        items.retain(|i| may_download(&snap, p, i, &course));
        items.sort_by(|a, b| (a.uploaded_at, &a.id).cmp(&(b.uploaded_at, &b.id)));
        Ok(items)
    }

    pub fn material(&self, p: &Principal, code: &str, id: &Id) -> CoreResult<Stored<ContentItem>> {
        let snap = self.store.snapshot();
        let course = find_course(&snap, code, None)?;
        authorize(p, Capability::ViewMaterial, course_ctx(&snap, p, &course))?;
        let item = snap
            .get::<ContentItem>(id)
            .ok()
            .filter(|i| i.course_id == course.id)
            .ok_or_else(|| CoreError::not_found(format!("content {id}")))?;
        if !may_download(&snap, p, &item, &course) {
            return Err(CoreError::Forbidden);
        }
        Ok(item)
    }

    /// Returns the bytes and records the first download by a student.
    pub fn download(&self, p: &Principal, id: &Id) -> CoreResult<Download> {
        let snap = self.store.snapshot();
        let item = snap.get::<ContentItem>(id)?;
        let course = live_course(&snap, &item.course_id)?;
        authorize(p, Capability::DownloadContent, course_ctx(&snap, p, &course))?;
        if !may_download(&snap, p, &item, &course) {
            return Err(CoreError::Forbidden);
        }
        let bytes = self
            .blobs
            .get(&item.blob_ref)
            .map_err(|e| CoreError::Internal(format!("blob read {}: {e}", item.blob_ref)))?;
        if sha256_hex(&bytes) != item.sha256 {
            return Err(CoreError::Internal(format!("blob {} is corrupt", item.blob_ref)));
        }
        if p.role == Role::Student {
            let key = format!("{}|{}", p.user_id, item.id);
            if snap.find_unique::<DownloadEvent>("student_content", &key).is_none() {
                self.store.atomically(|tx| -> CoreResult<()> {
                    if tx.find_unique::<DownloadEvent>("student_content", &key).is_none() {
                        tx.insert(&DownloadEvent {
                            student_id: p.user_id.clone(),
                            content_id: item.id.clone(),
                            course_id: course.id.clone(),
                            downloaded_at: tx.now(),
                        })?;
                    }
                    Ok(())
                })?;
            }
        }
        Ok(Download { item, bytes })
    }

    /// Replaces the syllabus wholesale.
    pub fn set_syllabus(&self, p: &Principal, code: &str, topics: Vec<String>) -> CoreResult<Vec<String>> {
        let snap = self.store.snapshot();
        let course = find_course(&snap, code, None)?;
        authorize(p, Capability::SetSyllabus, course_ctx(&snap, p, &course))?;
        let stored = self.store.atomically(|tx| -> CoreResult<Vec<String>> {
            let mut c = tx.get::<Course>(&course.id)?;
            c.value.syllabus = topics;
            tx.update(&c.id, &c.value)?;
            Ok(c.value.syllabus)
        })?;
        Ok(stored)
    }

    pub fn view_syllabus(&self, p: &Principal, code: &str) -> CoreResult<Vec<String>> {
        let snap = self.store.snapshot();
        let course = find_course(&snap, code, None)?;
        authorize(p, Capability::ViewSyllabus, course_ctx(&snap, p, &course))?;
        Ok(course.value.syllabus)
    }

    pub fn add_book(&self, p: &Principal, input: BookInput) -> CoreResult<Stored<LibraryBook>> {
        authorize(p, Capability::AddBook, ResourceContext::Global)?;
        let book = book_from(input)?;
        let id = self.store.insert(&book).map_err(duplicate_book)?;
        Ok(self.store.get(&id)?)
    }

    pub fn update_book(&self, p: &Principal, id: &Id, input: BookInput) -> CoreResult<Stored<LibraryBook>> {
        authorize(p, Capability::UpdateBook, ResourceContext::Global)?;
        let book = book_from(input)?;
        self.store.atomically(|tx| -> Result<(), StoreError> {
            tx.get::<LibraryBook>(id)?;
            tx.update(id, &book)?;
            Ok(())
        })
        .map_err(duplicate_book)?;
        Ok(self.store.get(id)?)
    }

    pub fn remove_book(&self, p: &Principal, id: &Id) -> CoreResult<()> {
        authorize(p, Capability::RemoveBook, ResourceContext::Global)?;
        Ok(self.store.atomically(|tx| tx.delete(Kind::LibraryBook, id))?)
    }

    /// Case-insensitive substring match on title or author, sorted by title.
    pub fn search_library(&self, p: &Principal, q: &str, page: PageRequest) -> CoreResult<Paged<Stored<LibraryBook>>> {
        authorize(p, Capability::SearchLibrary, ResourceContext::Global)?;
        let needle = q.trim().to_lowercase();
        let mut hits: Vec<Stored<LibraryBook>> = self
            .store
            .query::<LibraryBook>(&Query::new())?
            .into_iter()
            .filter(|b| {
                needle.is_empty()
                    || b.title.to_lowercase().contains(&needle)
                    || b.author.to_lowercase().contains(&needle)
            })
            .collect();
        hits.sort_by(|a, b| {
            (a.title.to_lowercase(), &a.title, &a.id).cmp(&(b.title.to_lowercase(), &b.title, &b.id))
        });
        Ok(Paged::slice(hits, page))
    }

    fn timetable_entry(&self, p: &Principal, cap: Capability, input: TimetableInput) -> CoreResult<TimetableEntry> {
        let snap = self.store.snapshot();
        let course = find_course(&snap, &input.course_code, input.session.as_deref())?;
        authorize(p, cap, course_ctx(&snap, p, &course))?;
        let entry = TimetableEntry {
            course_id: course.id.clone(),
            course_code: course.code.clone(),
            date: input.date,
            start: input.start,
            end: input.end,
            activity: input.activity,
            venue: input.venue.trim().to_owned(),
        };
        if !entry.is_well_formed() {
            return Err(CoreError::InvalidEntry("start must be before end".into()));
        }
        Ok(entry)
    }

    fn check_entry_owner(&self, p: &Principal, cap: Capability, id: &Id) -> CoreResult<()> {
        let snap = self.store.snapshot();
        let old = snap.get::<TimetableEntry>(id)?;
        let course = live_course(&snap, &old.course_id)?;
        authorize(p, cap, course_ctx(&snap, p, &course))
    }

    pub fn create_timetable_entry(&self, p: &Principal, input: TimetableInput) -> CoreResult<Stored<TimetableEntry>> {
        let entry = self.timetable_entry(p, Capability::CreateTimetableEntry, input)?;
        let id = self.store.insert(&entry)?;
        Ok(self.store.get(&id)?)
    }

    pub fn update_timetable_entry(&self, p: &Principal, id: &Id, input: TimetableInput) -> CoreResult<Stored<TimetableEntry>> {
        self.check_entry_owner(p, Capability::UpdateTimetableEntry, id)?;
        let entry = self.timetable_entry(p, Capability::UpdateTimetableEntry, input)?;
        self.store.update(id, &entry)?;
        Ok(self.store.get(id)?)
    }

    pub fn remove_timetable_entry(&self, p: &Principal, id: &Id) -> CoreResult<()> {
        self.check_entry_owner(p, Capability::RemoveTimetableEntry, id)?;
        Ok(self
            .store
            .atomically(|tx| tx.delete(Kind::TimetableEntry, id))?)
    }
}
