//! Built-in scenarios. The four `row` entries are the reference example
//! table; the rest are supporting cases used by the test suites.

pub struct Entry {
    pub name: &'static str,
    pub row: bool,
    pub text: &'static str,
}

pub const ENTRIES: &[Entry] = &[
    Entry {
        name: "pillowcase-ex1",
        row: true,
        text: "\
[scenario]
title = kind A between dθ and p dθ + q dφ on pillowcases
target = s1

[symbols]
p = sqrt(2)
q = sqrt(3)

[orbifold Q1]
builtin = pillowcase

[orbifold Q2]
builtin = pillowcase

[form w1]
orbifold = Q1
linear = 1, 0
override = true

[form w2]
orbifold = Q2
linear = p, q
override = true

[surgery s1]
kind = A
left = w1
right = w2
left.region = w1.e
left.window = 0, 1/16
left.disk = 5/8, 5/8 ; 1/32
right.region = w2
right.window = 0, 1/16
right.disk = 5/8, 5/8 ; 1/32
levels = 1/64, 3/64

[expect]
transitive = true
leaves = mixed
harmonic = true
",
    },
    Entry {
        name: "equal-forms-ex2",
        row: true,
        text: "\
[scenario]
title = kind C between two copies of p dθ + q dφ
target = s1

[symbols]
p = sqrt(2)
q = sqrt(3)

[orbifold T1]
builtin = torus

[orbifold T2]
builtin = torus

[form w1]
orbifold = T1
linear = p, q

[form w2]
orbifold = T2
linear = p, q

[surgery s1]
kind = C
left = w1
right = w2
left.region = w1
left.window = 0, 1/16
right.region = w2
right.window = 0, 1/16
levels = 1/32, 1/32

[expect]
transitive = false
leaves = noncompact
compact_singular_components = 1
harmonic = false
",
    },
    Entry {
        name: "climbing-tube-ex3",
        row: true,
        text: "\
[scenario]
title = kind B between independent irrational forms
target = s1

[symbols]
p = sqrt(2)
q = sqrt(3)
p2 = sqrt(7)
q2 = sqrt(11)

[orbifold T1]
builtin = torus

[orbifold T2]
builtin = torus

[form w1]
orbifold = T1
linear = p, q

[form w2]
orbifold = T2
linear = p2, q2

[surgery s1]
kind = B
left = w1
right = w2
left.region = w1
left.window = 1/2, 9/16
right.region = w2
right.window = 0, 1/16
levels = 17/32, 1/32

[expect]
transitive = false
leaves = some-compact
harmonic = false
",
    },
    Entry {
        name: "long-tube-ex4",
        row: true,
        text: "\
[scenario]
title = kind A between ω and a·ω with disks crossing twice
target = s1

[symbols]
a = sqrt(5)

[orbifold Q1]
builtin = pillowcase

[orbifold Q2]
builtin = pillowcase

[form w1]
orbifold = Q1
linear = 89, 144
override = true

[form w2]
orbifold = Q2
linear = 89*a, 144*a
override = true

[surgery s1]
kind = A
left = w1
right = w2
left.region = w1.e
left.window = 0, 2
right.region = w2.e
right.window = 0, 2
levels = 0, 1/2 + 1/4*a

[expect]
transitive = true
leaves = noncompact
harmonic = true
",
    },
    Entry {
        name: "torus-slope-2-3",
        row: false,
        text: "\
[orbifold T]
builtin = torus

[form w]
orbifold = T
linear = 2, 3

[trace]
form = w
seed = 1/8, 1/8
step = 0.01
steps = 100000

[expect]
transitive = true
leaves = compact
harmonic = true
",
    },
    Entry {
        name: "torus-dtheta",
        row: false,
        text: "\
[orbifold T]
builtin = torus

[form w]
orbifold = T
linear = 1, 0

[expect]
transitive = true
leaves = compact
harmonic = true
",
    },
    Entry {
        name: "pillowcase-dtheta",
        row: false,
        text: "\
[orbifold Q]
builtin = pillowcase

[form w]
orbifold = Q
linear = 1, 0
override = true

[expect]
transitive = true
leaves = compact
harmonic = true
",
    },
    Entry {
        name: "torus-irrational",
        row: false,
        text: "\
[symbols]
p = sqrt(2)
q = sqrt(3)

[orbifold T]
builtin = torus

[form w]
orbifold = T
linear = p, q

[expect]
transitive = true
leaves = noncompact
harmonic = true
",
    },
    Entry {
        name: "compact-chain-b",
        row: false,
        text: "\
[orbifold T1]
builtin = torus

[orbifold T2]
builtin = torus

[form w1]
orbifold = T1
linear = 1, 0

[form w2]
orbifold = T2
linear = 2, 3

[surgery s1]
kind = B
left = w1
right = w2
left.region = w1.e
left.window = 1/2, 3/4
right.region = w2.e
right.window = 0, 1/4
levels = 5/8, 1/8

[expect]
transitive = false
leaves = compact
harmonic = false
",
    },
    Entry {
        name: "compact-pair-a",
        row: false,
        text: "\
[orbifold T1]
builtin = torus

[orbifold T2]
builtin = torus

[form w1]
orbifold = T1
linear = 1, 0

[form w2]
orbifold = T2
linear = 2, 3

[surgery s1]
kind = A
left = w1
right = w2
left.region = w1.e
left.window = 0, 1/4
right.region = w2.e
right.window = 0, 1/4
levels = 1/16, 1/8

[expect]
transitive = true
leaves = compact
harmonic = true
",
    },
    Entry {
        name: "double-surgery",
        row: false,
        text: "\
[scenario]
title = kind A followed by kind B
target = s2

[symbols]
p = sqrt(2)
q = sqrt(3)

[orbifold Q1]
builtin = pillowcase

[orbifold Q2]
builtin = pillowcase

[orbifold T3]
builtin = torus

[form w1]
orbifold = Q1
linear = 1, 0
override = true

[form w2]
orbifold = Q2
linear = p, q
override = true

[form w3]
orbifold = T3
linear = 1, 0

[surgery s1]
kind = A
left = w1
right = w2
left.region = w1.e
left.window = 0, 1/16
right.region = w2
right.window = 0, 1/16
levels = 1/64, 3/64

[surgery s2]
kind = B
left = s1
right = w3
left.region = w1.e/s1
left.window = 1/8, 3/16
right.region = w3.e
right.window = 0, 1/16
levels = 5/32, 1/32

[expect]
transitive = false
leaves = mixed
harmonic = false
",
    },
];

pub fn find(name: &str) -> Option<&'static Entry> {
    ENTRIES.iter().find(|e| e.name == name)
}

pub fn rows() -> impl Iterator<Item = &'static Entry> {
    ENTRIES.iter().filter(|e| e.row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::DEFAULT_PRECISION_CEILING;
    use crate::scenario::parse_scenario;

    #[test]
    fn every_entry_parses_builds_and_round_trips() {
        for e in ENTRIES {
            let sc = parse_scenario(e.text).unwrap_or_else(|err| panic!("{}: {err}", e.name));
            assert_eq!(parse_scenario(&sc.serialize()).unwrap(), sc, "{}", e.name);
            sc.target_model(DEFAULT_PRECISION_CEILING)
                .unwrap_or_else(|err| panic!("{}: {err}", e.name));
        }
    }

    #[test]
    fn first_row_has_two_pillowcases() {
        let sc = parse_scenario(find("pillowcase-ex1").unwrap().text).unwrap();
        assert_eq!(sc.orbifolds.len(), 2);
        assert!(sc.orbifolds.iter().all(|o| o.presentation.action.order() == 2));
        assert_eq!(sc.surgeries[0].kind, crate::forms::SurgeryKind::A);
    }
}
