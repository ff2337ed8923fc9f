//! Bug templates, candidate matching, and the injection pipeline.
