//! Ground-truth scoring of analyzer reports.
