//! Built-in experiment configurations; each acceptance-scale scenario is a
//! one-line command away.

pub const PRESET_NAMES: &[&str] = &["iid-pm1", "markov-indicator", "circle-cos", "coboundary"];

/// Independent fair coins with the +-1 observable.
pub const IID_PM1: &str = r#"
schema_version = 1

[space]
kind = "finite"
d = 2

[potential]
preset = "zero"

[observable]
preset = "plus-minus-one"

[run]
depth = 3
n = 2000
m = 50000
seed = 7

[output]
dir = "out-iid-pm1"
"#;

/// Two-state Markov chain with the state indicator observable.
pub const MARKOV_INDICATOR: &str = r#"
schema_version = 1

[space]
kind = "finite"
d = 2
weights = [1.0, 1.0]

[markov]
p = [[0.7, 0.3], [0.4, 0.6]]

[potential]
preset = "markov-log-j"

[observable]
preset = "indicator-one"

[run]
depth = 3
n = 2000
m = 50000
seed = 7

[output]
dir = "out-markov-indicator"
"#;

/// Circle rotation-symbol space with the cosine potential.
pub const CIRCLE_COS: &str = r#"
schema_version = 1

[space]
kind = "circle"
n_nodes = 256

[potential]
preset = "circle-cos"

[observable]
preset = "circle-cos"

[run]
depth = 2

[output]
dir = "out-circle-cos"
"#;

/// A direction coboundary to a constant: every variance route degenerates.
pub const COBOUNDARY: &str = r#"
schema_version = 1

[space]
kind = "finite"
d = 2

[potential]
preset = "zero"

[observable]
preset = "coboundary"

[run]
depth = 3
n = 2000
m = 50000
seed = 7

[output]
dir = "out-coboundary"
"#;

pub fn lookup(name: &str) -> Option<&'static str> {
    match name {
        "iid-pm1" => Some(IID_PM1),
        "markov-indicator" => Some(MARKOV_INDICATOR),
        "circle-cos" => Some(CIRCLE_COS),
        "coboundary" => Some(COBOUNDARY),
        _ => None,
    }
}
