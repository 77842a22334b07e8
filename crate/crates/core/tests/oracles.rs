// Independent re-derivations checked against the engine: integer interval
// placements stand in for the point algebra, textbook interval definitions
// stand in for the compiled schemas.

use std::collections::BTreeSet;

use tpoint_core::point::{enumerate_consistent_configurations, weak_orderings};
use tpoint_core::schema::{project, validate};
use tpoint_core::{builtin, convert, Assignment, ConsistencyMode, PointConfiguration, PointRelation, ValidationDomain};

use PointRelation::*;

/// Every placement of two proper intervals on four integer ticks.
fn placements() -> Vec<[i32; 4]> {
    let mut out = Vec::new();
    for s1 in 0..4 {
        for e1 in s1 + 1..4 {
            for s2 in 0..4 {
                for e2 in s2 + 1..4 {
                    out.push([s1, e1, s2, e2]);
                }
            }
        }
    }
    out
}

fn cmp(a: i32, b: i32) -> PointRelation {
    match a.cmp(&b) {
        std::cmp::Ordering::Less => Before,
        std::cmp::Ordering::Greater => After,
        std::cmp::Ordering::Equal => Equal,
    }
}

fn relations_of(p: [i32; 4]) -> [PointRelation; 4] {
    let [s1, e1, s2, e2] = p;
    [cmp(s1, s2), cmp(e1, e2), cmp(s1, e2), cmp(e1, s2)]
}

fn realized() -> BTreeSet<[usize; 4]> {
    placements().into_iter().map(|p| relations_of(p).map(|z| z.index())).collect()
}

fn oracle_consistent(c: [PointRelation; 4], realizable: bool) -> bool {
    let sat: Vec<[usize; 4]> = realized()
        .into_iter()
        .filter(|r| (0..4).all(|k| c[k] == Vague || r[k] == c[k].index()))
        .collect();
    if sat.is_empty() {
        return false;
    }
    !realizable
        || (0..4).filter(|&k| c[k] == Vague).all(|k| {
            sat.iter().any(|r| r[k] == Before.index()) && sat.iter().any(|r| r[k] == After.index())
        })
}

#[test]
fn thirteen_realizable_interval_configurations() {
    assert_eq!(realized().len(), 13);
    assert_eq!(weak_orderings().len(), 75);
}

#[test]
fn consistency_matches_placement_oracle() {
    for (mode, realizable) in [(ConsistencyMode::Satisfiable, false), (ConsistencyMode::RealizableVague, true)] {
        let expected: Vec<PointConfiguration> = (0..256)
            .map(PointConfiguration::from_index)
            .filter(|c| oracle_consistent(c.relations(), realizable))
            .collect();
        assert_eq!(enumerate_consistent_configurations(mode), expected, "{mode:?}");
        for c in &expected {
            assert!(c.is_consistent(mode));
        }
    }
}

#[test]
fn vague_free_consistent_configurations_are_the_interval_relations() {
    let got: BTreeSet<[usize; 4]> = enumerate_consistent_configurations(ConsistencyMode::Satisfiable)
        .into_iter()
        .filter(|c| !c.has_vague())
        .map(|c| c.relations().map(|z| z.index()))
        .collect();
    assert_eq!(got, realized());
}

fn allen_oracle(p: [i32; 4]) -> &'static str {
    let [s1, e1, s2, e2] = p;
    if e1 < s2 {
        "Before"
    } else if e2 < s1 {
        "After"
    } else if e1 == s2 {
        "Meets"
    } else if e2 == s1 {
        "MetBy"
    } else if s1 == s2 && e1 == e2 {
        "Equals"
    } else if s1 == s2 {
        if e1 < e2 {
            "Starts"
        } else {
            "StartedBy"
        }
    } else if e1 == e2 {
        if s1 > s2 {
            "Finishes"
        } else {
            "FinishedBy"
        }
    } else if s2 < s1 && e1 < e2 {
        "During"
    } else if s1 < s2 && e2 < e1 {
        "Contains"
    } else if s1 < s2 {
        "Overlaps"
    } else {
        "OverlappedBy"
    }
}

fn tbdense_oracle(p: [i32; 4]) -> &'static str {
    let [s1, e1, s2, e2] = p;
    if e1 <= s2 {
        "Before"
    } else if s1 >= e2 {
        "After"
    } else if s1 == s2 && e1 == e2 {
        "Simultaneous"
    } else if s1 <= s2 && e1 >= e2 {
        "Includes"
    } else if s2 <= s1 && e2 >= e1 {
        "Is_Included"
    } else {
        "Vague"
    }
}

fn matres_oracle(p: [i32; 4]) -> &'static str {
    match p[0].cmp(&p[2]) {
        std::cmp::Ordering::Less => "Before",
        std::cmp::Ordering::Greater => "After",
        std::cmp::Ordering::Equal => "Equal",
    }
}

#[test]
fn projections_match_interval_definitions() {
    for p in placements() {
        let c = PointConfiguration::from_intervals(p[0], p[1], p[2], p[3]).unwrap();
        assert_eq!(c.relations(), relations_of(p));
        assert_eq!(project(&c, builtin::allen13()), allen_oracle(p), "{p:?}");
        assert_eq!(project(&c, builtin::tbdense()), tbdense_oracle(p), "{p:?}");
        assert_eq!(project(&c, builtin::matres()), matres_oracle(p), "{p:?}");
    }
}

#[test]
fn allen_covers_all_thirteen() {
    let seen: BTreeSet<&str> = placements().into_iter().map(allen_oracle).collect();
    assert_eq!(seen.len(), 13);
    let names: BTreeSet<&str> = builtin::allen13().non_vague_names().iter().map(String::as_str).collect();
    assert_eq!(seen, names);
}

#[test]
fn builtins_validate_on_their_domains() {
    for s in builtin::all() {
        let r = validate(s, ValidationDomain::ConsistentOnly);
        assert!(r.is_ok(), "{}", r.summary());
    }
    assert!(validate(builtin::matres(), ValidationDomain::All256).is_ok());
}

#[test]
fn converter_is_total_and_unique_on_valid_domains() {
    for s in builtin::all() {
        for m in s.domain().assignments() {
            let c = convert(m, s);
            assert!(!c.ambiguous, "{} {:?}", s.name(), m);
            assert_eq!(c.matched.len(), 1);
        }
    }
    assert_eq!(Assignment::all().count(), 256);
}
