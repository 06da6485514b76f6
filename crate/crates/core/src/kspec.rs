//! Built-in class specifications, compiled into the library and also shipped
//! as files under `kspecs/` for CLI use.

use crate::classdef::{parse_spec, ClassSpec};

pub const EQUIV: &str = include_str!("../../../kspecs/equiv.kspec");
pub const EQUIV2: &str = include_str!("../../../kspecs/equiv2.kspec");
pub const TWO_EQ: &str = include_str!("../../../kspecs/two_eq.kspec");
pub const TWO_EQ_NESTED: &str = include_str!("../../../kspecs/two_eq_nested.kspec");
pub const PRS: &str = include_str!("../../../kspecs/prs.kspec");
pub const UNEVEN: &str = include_str!("../../../kspecs/uneven.kspec");
pub const NONORTH: &str = include_str!("../../../kspecs/nonorth.kspec");

pub const BUILTIN_NAMES: &[&str] = &[
    "equiv",
    "equiv2",
    "two_eq",
    "two_eq_nested",
    "prs",
    "uneven",
    "nonorth",
];

/// Parse a built-in spec by name.
pub fn builtin(name: &str) -> Option<ClassSpec> {
    let text = match name {
        "equiv" => EQUIV,
        "equiv2" => EQUIV2,
        "two_eq" => TWO_EQ,
        "two_eq_nested" => TWO_EQ_NESTED,
        "prs" => PRS,
        "uneven" => UNEVEN,
        "nonorth" => NONORTH,
        _ => return None,
    };
    Some(parse_spec(text).expect("built-in specs parse"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_builtins_parse() {
        for name in BUILTIN_NAMES {
            assert!(builtin(name).is_some(), "builtin {name} failed to parse");
        }
    }
}
