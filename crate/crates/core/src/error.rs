use crate::store::StoreError;

/// Failures surfaced to callers. Each variant maps to one stable machine code
/// and one HTTP status.
#[derive(Debug, thiserror::Error)]
pub enum CoreError {
    #[error("authentication required")]
    Unauthenticated,
    #[error("access denied")]
    Denied,
    #[error("too many failed logins; try again later")]
    RateLimited,
    #[error("old password does not verify")]
    BadOldPassword,
    #[error("new password must be at least 8 characters")]
    WeakPassword,
    #[error("forbidden")]
    Forbidden,
    #[error("recipient not permitted")]
    ForbiddenRecipient,
    #[error("notice scope not permitted")]
    ForbiddenScope,
    #[error("not a member of this chat room")]
    ForbiddenRoom,
    #[error("not enrolled in this course")]
    NotEnrolled,
    #[error("student self-registration is disabled")]
    SelfEnrollmentDisabled,
    #[error("{0} not found")]
    NotFound(String),
    #[error("{key_name} already exists")]
    ConstraintViolation { key_name: String },
    #[error("{missing_ref} refers to a missing entity")]
    ReferentialViolation { missing_ref: String },
    #[error("concurrent modification, retry")]
    Conflict,
    #[error("invalid identity: {reason}")]
    InvalidIdentity { reason: &'static str },
    #[error("invalid assessment: {reason}")]
    InvalidSpec { reason: String },
    #[error("invalid timetable entry: {0}")]
    InvalidEntry(String),
    #[error("{0}")]
    Validation(String),
    #[error("score out of range")]
    OutOfRange,
    #[error("assessment window has not opened")]
    WindowNotOpen,
    #[error("assessment window has closed")]
    WindowClosed,
    #[error("assessment already attempted")]
    AlreadyAttempted,
    #[error("submission deadline has passed")]
    DeadlinePassed,
    #[error("attempt already submitted")]
    AlreadySubmitted,
    #[error("answers do not match the question list")]
    AnswerShapeMismatch,
    #[error("body exceeds 10000 characters")]
    TooLong,
    #[error("upload exceeds the size limit")]
    TooLarge,
    #[error("uploaded bytes do not match the declared sha256")]
    ChecksumMismatch,
    #[error("book already catalogued")]
    DuplicateBook,
    #[error("a registrar already exists")]
    AlreadyBootstrapped,
    #[error("unknown fixture {0}")]
    UnknownFixture(String),
    #[error("unknown query field {0}")]
    UnknownField(String),
    #[error("malformed request: {0}")]
    BadRequest(String),
    #[error("method not allowed")]
    MethodNotAllowed,
    #[error("internal error: {0}")]
    Internal(String),
}

impl CoreError {
    /// Every code a client can observe.
    pub const CODES: &'static [&'static str] = &[
        "unauthenticated",
        "denied",
        "rate_limited",
        "bad_old",
        "weak_new",
        "forbidden",
        "forbidden_recipient",
        "forbidden_scope",
        "forbidden_room",
        "not_enrolled",
        "self_enrollment_disabled",
        "not_found",
        "constraint_violation",
        "referential_violation",
        "conflict",
        "invalid_identity",
        "invalid_spec",
        "invalid_entry",
        "validation_error",
        "out_of_range",
        "window_not_open",
        "window_closed",
        "already_attempted",
        "deadline_passed",
        "already_submitted",
        "answer_shape_mismatch",
        "too_long",
        "too_large",
        "checksum_mismatch",
        "duplicate_book",
        "already_bootstrapped",
        "unknown_fixture",
        "unknown_field",
        "bad_request",
        "method_not_allowed",
        "internal",
    ];

    pub fn code(&self) -> &'static str {
        use CoreError::*;
        match self {
            Unauthenticated => "unauthenticated",
            Denied => "denied",
            RateLimited => "rate_limited",
            BadOldPassword => "bad_old",
            WeakPassword => "weak_new",
            Forbidden => "forbidden",
            ForbiddenRecipient => "forbidden_recipient",
            ForbiddenScope => "forbidden_scope",
            ForbiddenRoom => "forbidden_room",
            NotEnrolled => "not_enrolled",
            SelfEnrollmentDisabled => "self_enrollment_disabled",
            NotFound(_) => "not_found",
            ConstraintViolation { .. } => "constraint_violation",
            ReferentialViolation { .. } => "referential_violation",
            Conflict => "conflict",
            InvalidIdentity { .. } => "invalid_identity",
            InvalidSpec { .. } => "invalid_spec",
            InvalidEntry(_) => "invalid_entry",
            Validation(_) => "validation_error",
            OutOfRange => "out_of_range",
            WindowNotOpen => "window_not_open",
            WindowClosed => "window_closed",
            AlreadyAttempted => "already_attempted",
            DeadlinePassed => "deadline_passed",
            AlreadySubmitted => "already_submitted",
            AnswerShapeMismatch => "answer_shape_mismatch",
            TooLong => "too_long",
            TooLarge => "too_large",
            ChecksumMismatch => "checksum_mismatch",
            DuplicateBook => "duplicate_book",
            AlreadyBootstrapped => "already_bootstrapped",
            UnknownFixture(_) => "unknown_fixture",
            UnknownField(_) => "unknown_field",
            BadRequest(_) => "bad_request",
            MethodNotAllowed => "method_not_allowed",
            Internal(_) => "internal",
        }
    }

    pub fn status(&self) -> u16 {
        use CoreError::*;
        match self {
            Unauthenticated | Denied => 401,
            RateLimited => 429,
            BadOldPassword | Forbidden | ForbiddenRecipient | ForbiddenScope | ForbiddenRoom
            | NotEnrolled | SelfEnrollmentDisabled => 403,
            NotFound(_) => 404,
            MethodNotAllowed => 405,
            ConstraintViolation { .. }
            | Conflict
            | WindowNotOpen
            | WindowClosed
            | AlreadyAttempted
            | DeadlinePassed
            | AlreadySubmitted
            | DuplicateBook
            | AlreadyBootstrapped => 409,
            TooLarge => 413,
            ReferentialViolation { .. }
            | InvalidIdentity { .. }
            | InvalidSpec { .. }
            | InvalidEntry(_)
            | Validation(_)
            | OutOfRange
            | WeakPassword
            | AnswerShapeMismatch
            | TooLong
            | ChecksumMismatch
            | UnknownFixture(_)
            | UnknownField(_) => 422,
            BadRequest(_) => 400,
            Internal(_) => 500,
        }
    }

    pub fn not_found(what: impl Into<String>) -> Self {
        CoreError::NotFound(what.into())
    }

    pub fn invalid_spec(reason: impl Into<String>) -> Self {
        CoreError::InvalidSpec {
            reason: reason.into(),
        }
    }
}

impl From<StoreError> for CoreError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound { kind, id } => CoreError::NotFound(format!("{kind} {id}")),
            StoreError::ConstraintViolation { key_name } => {
                CoreError::ConstraintViolation { key_name }
            }
            StoreError::ReferentialViolation { missing_ref } => {
                CoreError::ReferentialViolation { missing_ref }
            }
            StoreError::UnknownField { field, .. } => CoreError::UnknownField(field),
            StoreError::Conflict { .. } => CoreError::Conflict,
            other => CoreError::Internal(other.to_string()),
        }
    }
}

pub type CoreResult<T> = Result<T, CoreError>;
