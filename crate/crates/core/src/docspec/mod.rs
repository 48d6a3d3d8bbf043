//! DocSpec data model, canonical `.docspec.json` codec, validation and diffs.

mod codec;
mod colors;
mod diff;
mod model;
mod validate;

pub use codec::{
    canonical_number, docspec_from_json, docspec_to_json, interaction_from_json,
    interaction_to_json, parse_docspec, serialize_docspec, unit_from_json, unit_to_json,
};
pub use colors::is_css_color;
pub use diff::{apply_diff, diff_docspec, ApplyError, DiffEntry, DocSpecDiff};
pub use model::*;
pub use validate::{check_interaction_structure, is_supported_version, is_unit_id, validate_docspec};
