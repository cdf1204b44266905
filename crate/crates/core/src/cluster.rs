//! Placeholder; populated next.
