//! Time-ordered, lexicographically sortable identifiers (ULIDs).

use std::fmt;
use std::sync::Mutex;

use rand::rngs::StdRng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use ulid::Generator;

use crate::clock::Timestamp;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                $name(s)
            }
        }
    };
}

id_type!(ComplaintId);
id_type!(CategoryId);
id_type!(SolutionId);
id_type!(RunId);
id_type!(MessageId);
id_type!(AnnotationId);

/// Monotonic ULID source. Seedable so tests get reproducible ids.
pub struct IdGen {
    inner: Mutex<(Generator, StdRng)>,
}

impl IdGen {
    pub fn new() -> Self {
        IdGen {
            inner: Mutex::new((Generator::new(), StdRng::from_os_rng())),
        }
    }

    pub fn seeded(seed: u64) -> Self {
        IdGen {
            inner: Mutex::new((Generator::new(), StdRng::seed_from_u64(seed))),
        }
    }

    /// Next id, strictly greater than every id this generator produced before.
    pub fn next(&self, at: Timestamp) -> String {
        let mut guard = self.inner.lock().unwrap_or_else(|p| p.into_inner());
        let (generator, rng) = &mut *guard;
        match generator.generate_from_datetime_with_source(at.system_time(), rng) {
            Ok(id) => id.to_string(),
            // 80 random bits exhausted within one millisecond; start over.
            Err(_) => {
                *generator = Generator::new();
                generator
                    .generate_from_datetime_with_source(at.system_time(), rng)
                    .map(|id| id.to_string())
                    .unwrap_or_default()
            }
        }
    }
}

impl Default for IdGen {
    fn default() -> Self {
        Self::new()
    }
}
