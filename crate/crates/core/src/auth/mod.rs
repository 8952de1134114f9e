//! Authentication primitives and role-based authorization.

mod matrix;
mod password;
mod ratelimit;

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine as _;
use rand::rngs::OsRng;
use rand::RngCore;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub use matrix::{check_matrix_total, matrix, permits, Capability};
pub use password::{HashCost, PasswordHasher, MIN_PASSWORD_LEN};
pub use ratelimit::LoginLimiter;

use crate::domain::Role;
use crate::error::CoreError;
use crate::store::Id;

/// An authenticated caller.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Principal {
    pub user_id: Id,
    pub role: Role,
    pub is_library: bool,
    #[serde(skip)]
    pub session_id: Id,
}

/// What the caller is acting on, for ownership checks.
#[derive(Debug, Clone, Copy)]
pub enum ResourceContext<'a> {
    /// Not tied to any owned resource.
    Global,
    /// A course: its lecturer and whether the caller is enrolled.
    Course { lecturer_id: &'a Id, enrolled: bool },
    /// A record belonging to one user (attempt, result, submission, message).
    OwnedBy(&'a Id),
}

/// Matrix grant plus ownership. Registrars own every registry-level resource;
/// lecturers own the courses assigned to them; students own their own records
/// and may act on courses they are enrolled in.
pub fn authorize(principal: &Principal, cap: Capability, ctx: ResourceContext<'_>) -> Result<(), CoreError> {
    if !permits(principal.role, cap) {
        return Err(CoreError::Forbidden);
    }
    let owns = match ctx {
        ResourceContext::Global => true,
        ResourceContext::Course {
            lecturer_id,
            enrolled,
        } => match principal.role {
            Role::Registrar => true,
            Role::Lecturer => *lecturer_id == principal.user_id,
            Role::Student => enrolled,
        },
        ResourceContext::OwnedBy(owner) => {
            principal.role == Role::Registrar || *owner == principal.user_id
        }
    };
    if owns {
        Ok(())
    } else {
        Err(CoreError::Forbidden)
    }
}

/// 256 random bits from the OS generator, URL-safe base64 without padding.
pub fn new_session_token() -> String {
    let mut bytes = [0u8; 32];
    OsRng.fill_bytes(&mut bytes);
    URL_SAFE_NO_PAD.encode(bytes)
}

pub fn token_digest(token: &str) -> String {
    hex::encode(Sha256::digest(token.as_bytes()))
}
