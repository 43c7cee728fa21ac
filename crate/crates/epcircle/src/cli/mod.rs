//! Configuration and command front end.
