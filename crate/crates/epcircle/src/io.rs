//! CSV and JSON schemas for emitted artifacts.
