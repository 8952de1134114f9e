//! Salted argon2id password digests in PHC string form.

use argon2::password_hash::{PasswordHash, PasswordHasher as _, PasswordVerifier as _, SaltString};
use argon2::{Algorithm, Argon2, Params, Version};

pub const MIN_PASSWORD_LEN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashCost {
    pub memory_kib: u32,
    pub iterations: u32,
}

impl HashCost {
    /// Cheap parameters for test suites that register thousands of accounts.
    pub const fn light() -> Self {
        HashCost {
            memory_kib: 1024,
            iterations: 1,
        }
    }
}

impl Default for HashCost {
    fn default() -> Self {
        HashCost {
            memory_kib: 19 * 1024,
            iterations: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PasswordHasher {
    argon: Argon2<'static>,
    decoy: String,
}

impl PasswordHasher {
    pub fn new(cost: HashCost) -> Self {
        let params = Params::new(cost.memory_kib, cost.iterations, 1, None)
            .expect("argon2 parameters within bounds");
        let argon = Argon2::new(Algorithm::Argon2id, Version::V0x13, params);
        let salt = SaltString::encode_b64(b"citadel-decoy-salt").expect("static salt");
        let decoy = argon
            .hash_password(b"decoy password", &salt)
            .expect("hashing with valid params")
            .to_string();
        PasswordHasher { argon, decoy }
    }

    pub fn hash(&self, password: &str, salt: &[u8; 16]) -> String {
        let salt = SaltString::encode_b64(salt).expect("16-byte salt encodes");
        self.argon
            .hash_password(password.as_bytes(), &salt)
            .expect("hashing with valid params")
            .to_string()
    }

    pub fn verify(&self, password: &str, digest: &str) -> bool {
        match PasswordHash::new(digest) {
            Ok(parsed) => self
                .argon
                .verify_password(password.as_bytes(), &parsed)
                .is_ok(),
            Err(_) => false,
        }
    }

    /// Burns the same work as a real verification, for unknown usernames.
    pub fn verify_decoy(&self, password: &str) {
        let _ = self.verify(password, &self.decoy);
    }
}
