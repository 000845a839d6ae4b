//! Scenarios shipped with the tool.

const BUILTINS: &[(&str, &str)] = &[
    ("std_c1", include_str!("builtins/std_c1.json")),
    ("std_c2", include_str!("builtins/std_c2.json")),
    ("twisted_r4", include_str!("builtins/twisted_r4.json")),
];

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTINS.iter().map(|(n, _)| *n)
}

/// Source text of a builtin scenario.
pub fn builtin(name: &str) -> Option<&'static str> {
    BUILTINS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}
