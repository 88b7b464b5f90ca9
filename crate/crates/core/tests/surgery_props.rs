mod common;

use common::{q, scalar, table};
use foliage::catalog::{find, ENTRIES};
use foliage::forms::{ClosedForm, SurgeryKind};
use foliage::leaves::LeafKind;
use foliage::orbifold::OrbifoldPresentation;
use foliage::scalar::{Rational, SymScalar, SymbolTable, DEFAULT_PRECISION_CEILING};
use foliage::scenario::parse_scenario;
use foliage::surgery::{connected_sum, is_transitive, make_generic, DiskPlacement, FoliationModel, SurgerySpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn compact_singular_components(m: &FoliationModel) -> usize {
    m.catalog
        .iter()
        .filter(|l| l.kind.is_singular())
        .map(|l| l.components.iter().filter(|c| c.1).count())
        .sum()
}

fn random_form(rng: &mut ChaCha8Rng, t: &SymbolTable) -> (ClosedForm, bool) {
    if rng.gen_bool(0.5) {
        let (mut a, b) = (rng.gen_range(-3i64..=3), rng.gen_range(-3i64..=3));
        if a == 0 && b == 0 {
            a = 1;
        }
        (ClosedForm::linear(SymScalar::from_int(a), SymScalar::from_int(b)), true)
    } else {
        let a = scalar(t, &[(0, 1), (rng.gen_range(1i64..=3), 1)]);
        let b = scalar(t, &[(0, 1), (0, 1), (rng.gen_range(1i64..=3), 1)]);
        (ClosedForm::linear(a, b), false)
    }
}

fn window(rng: &mut ChaCha8Rng) -> (Rational, Rational) {
    let lo = q(rng.gen_range(0i64..=3), 16);
    let len = q(rng.gen_range(1i64..=3), 16);
    let hi = &lo + len;
    (lo, hi)
}

fn interior(w: &(Rational, Rational), num: i64) -> Rational {
    &w.0 + (&w.1 - &w.0) * q(num, 4)
}

fn place(name: &str, compact: bool, w: &(Rational, Rational)) -> DiskPlacement {
    DiskPlacement {
        region: if compact { format!("{name}.e") } else { name.to_string() },
        window: (SymScalar::rational(w.0.clone()), SymScalar::rational(w.1.clone())),
        disk: None,
    }
}

struct Trial {
    kind: SurgeryKind,
    inputs: (FoliationModel, FoliationModel),
    output: FoliationModel,
}

fn random_trials(kind: SurgeryKind, n: usize, seed: u64) -> Vec<Trial> {
    let t = table(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for _ in 0..n {
        let (f1, c1) = random_form(&mut rng, &t);
        let (f2, c2) = if kind == SurgeryKind::C && rng.gen_bool(0.7) {
            (f1.clone(), c1)
        } else {
            random_form(&mut rng, &t)
        };
        let o = || OrbifoldPresentation::torus();
        let l = FoliationModel::single("w1", o(), f1, &t).unwrap();
        let r = FoliationModel::single("w2", o(), f2, &t).unwrap();
        let (mut wl, wr) = (window(&mut rng), window(&mut rng));
        if kind == SurgeryKind::B {
            wl = (&wl.0 + q(1, 2), &wl.1 + q(1, 2));
        }
        let (x, y) = match kind {
            SurgeryKind::A => {
                let (a, b) = (interior(&wl, 1), interior(&wl, 2));
                if rng.gen_bool(0.5) {
                    (a, b)
                } else {
                    (b, a)
                }
            }
            SurgeryKind::B => (interior(&wl, rng.gen_range(1..=3)), interior(&wr, rng.gen_range(1..=3))),
            SurgeryKind::C => {
                let x = interior(&wl, 2);
                (x.clone(), x)
            }
        };
        let wr = if kind == SurgeryKind::B { wr } else { wl.clone() };
        let spec = SurgerySpec {
            name: "s".into(),
            kind,
            left: l.clone(),
            left_disk: place("w1", c1, &wl),
            right: r.clone(),
            right_disk: place("w2", c2, &wr),
            tube_levels: (SymScalar::rational(x), SymScalar::rational(y)),
        };
        if let Ok(m) = connected_sum(spec) {
            out.push(Trial {
                kind,
                inputs: (l, r),
                output: m,
            });
        }
    }
    out
}

#[test]
fn every_surgery_adds_two_index_one_zeros() {
    for kind in [SurgeryKind::A, SurgeryKind::B, SurgeryKind::C] {
        let trials = random_trials(kind, 120, 7 + kind as u64);
        assert!(trials.len() >= 20, "{kind}: only {} successful trials", trials.len());
        for tr in &trials {
            let before = tr.inputs.0.zeros().len() + tr.inputs.1.zeros().len();
            assert_eq!(tr.output.zeros().len(), before + 2);
            assert!(tr.output.zeros().iter().all(|z| z.index == 1 && z.isotropy_order == 1));
        }
    }
}

#[test]
fn kind_a_preserves_transitivity() {
    let trials = random_trials(SurgeryKind::A, 150, 11);
    assert!(trials.len() >= 20);
    for tr in &trials {
        assert!(is_transitive(&tr.inputs.0).unwrap() && is_transitive(&tr.inputs.1).unwrap());
        assert!(is_transitive(&tr.output).unwrap(), "{:?}", tr.output.structure.edges);
    }
    for e in ENTRIES {
        let sc = parse_scenario(e.text).unwrap();
        let models = sc.build(DEFAULT_PRECISION_CEILING).unwrap();
        for s in sc.surgeries.iter().filter(|s| s.kind == SurgeryKind::A) {
            if is_transitive(&models[&s.left]).unwrap() && is_transitive(&models[&s.right]).unwrap() {
                assert!(is_transitive(&models[&s.name]).unwrap(), "{}", e.name);
            }
        }
    }
}

#[test]
fn kind_b_creates_compact_families() {
    let trials = random_trials(SurgeryKind::B, 120, 13);
    assert!(trials.len() >= 20);
    for tr in &trials {
        let old: Vec<&str> = tr.inputs.0.catalog.iter().chain(&tr.inputs.1.catalog).map(|l| l.id.as_str()).collect();
        assert!(tr
            .output
            .catalog
            .iter()
            .any(|l| l.kind == LeafKind::CompactRegular && !old.contains(&l.id.as_str())));
        assert_eq!(tr.kind, SurgeryKind::B);
    }
}

#[test]
fn kind_c_creates_one_compact_singular_component() {
    let trials = random_trials(SurgeryKind::C, 120, 17);
    assert!(trials.len() >= 20);
    let mut noncompact_sides = 0;
    for tr in &trials {
        let leaf = tr.output.catalog.iter().find(|l| l.id == "singular:s.xy").unwrap();
        let tube: Vec<_> = leaf.components.iter().filter(|c| c.0.ends_with("#T")).collect();
        assert_eq!(tube.len(), 1);
        assert!(tube[0].1);
        let sides_compact = [&tr.inputs.0, &tr.inputs.1].map(|m| m.all_leaves_compact());
        for (tag, compact) in [("#L", sides_compact[0]), ("#R", sides_compact[1])] {
            let side: Vec<_> = leaf.components.iter().filter(|c| c.0.contains(tag)).collect();
            assert!(!side.is_empty());
            assert!(side.iter().all(|c| c.1 == compact));
        }
        if !sides_compact[0] && !sides_compact[1] {
            noncompact_sides += 1;
            let before = compact_singular_components(&tr.inputs.0) + compact_singular_components(&tr.inputs.1);
            assert_eq!(compact_singular_components(&tr.output), before + 1);
        }
    }
    assert!(noncompact_sides > 0);
}

#[test]
fn families_away_from_the_disk_survive() {
    let sc = parse_scenario(find("compact-pair-a").unwrap().text).unwrap();
    let s1 = sc.target_model(DEFAULT_PRECISION_CEILING).unwrap();
    let t = s1.table.clone();
    let w3 = FoliationModel::single("w3", OrbifoldPresentation::torus(), ClosedForm::linear(SymScalar::from_int(1), SymScalar::zero()), &t)
        .unwrap();
    let used = s1.structure.edge("w1.e/s1").unwrap().clone();
    let quarter = used.weight.scale(&q(1, 4));
    let lo = used.lo.clone() + quarter.clone();
    let hi = lo.clone() + quarter.clone();
    let level = lo.clone() + quarter.scale(&q(1, 2));
    let s2 = connected_sum(SurgerySpec {
        name: "s2".into(),
        kind: SurgeryKind::C,
        left: s1.clone(),
        left_disk: DiskPlacement {
            region: used.name.clone(),
            window: (lo.clone(), hi.clone()),
            disk: None,
        },
        right: w3,
        right_disk: DiskPlacement {
            region: "w3.e".into(),
            window: (lo, hi),
            disk: None,
        },
        tube_levels: (level.clone(), level),
    })
    .unwrap();
    let mut checked = 0;
    for e in s1.graph.edges.iter().filter(|e| e.family != used.name) {
        let after = s2.graph.family_edge(&e.family).expect("family kept");
        assert_eq!(after.weight, e.weight);
        checked += 1;
    }
    assert!(checked >= 2);
    assert!(s2.graph.family_edge(&used.name).is_none());
}

#[test]
fn transitivity_survives_positive_rescaling() {
    for e in ENTRIES {
        let sc = parse_scenario(e.text).unwrap();
        let base = is_transitive(&sc.target_model(DEFAULT_PRECISION_CEILING).unwrap()).unwrap();
        for c in [q(1, 3), q(2, 1), q(7, 5)] {
            let mut s = sc.clone();
            for f in &mut s.forms {
                f.form = f.form.scaled(&c);
            }
            for su in &mut s.surgeries {
                for p in [&mut su.left_place, &mut su.right_place] {
                    p.window = (p.window.0.scale(&c), p.window.1.scale(&c));
                }
                su.levels = (su.levels.0.scale(&c), su.levels.1.scale(&c));
            }
            let m = s.target_model(DEFAULT_PRECISION_CEILING).unwrap();
            assert_eq!(is_transitive(&m).unwrap(), base, "{} scaled by {c}", e.name);
        }
    }
}

#[test]
fn make_generic_keeps_zeros_and_periods() {
    for e in ENTRIES {
        let sc = parse_scenario(e.text).unwrap();
        for (name, m) in sc.build(DEFAULT_PRECISION_CEILING).unwrap() {
            let g = make_generic(&m).unwrap();
            assert_eq!(g.periods(), m.periods(), "{}:{name}", e.name);
            let key = |m: &FoliationModel| {
                m.zeros()
                    .iter()
                    .map(|z| (z.id.clone(), z.index, z.isotropy_order))
                    .collect::<Vec<_>>()
            };
            assert_eq!(key(&g), key(&m));
            let lattice = g.period_lattice();
            let levels: Vec<&SymScalar> = g.structure.singular.iter().map(|l| &l.level).collect();
            for i in 0..levels.len() {
                for j in i + 1..levels.len() {
                    assert!(!lattice.contains(&(levels[i].clone() - levels[j].clone())), "{}:{name}", e.name);
                }
            }
        }
    }
}

