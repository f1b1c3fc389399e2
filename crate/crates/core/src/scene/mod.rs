//! Symbolic world model and the predicate engine used for goal checking.

mod ids;
mod predicate;
mod registry;
mod state;
mod validate;

use thiserror::Error;

pub use ids::{FixtureId, ObjectId, RegionId};
pub use predicate::{eval_predicate, eval_set, Predicate, PredicateSet};
pub use registry::{FixtureSpec, IdKind, ObjectSpec, RegionSpec, SceneRegistry};
pub use state::{Articulation, FixtureState, Location, Power, SceneState};
pub use validate::{validate_scene, ValidationReport, Violation};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SceneError {
    #[error("unknown id `{0}`")]
    UnknownId(String),
    #[error("predicate set must not be empty")]
    EmptyPredicateSet,
    #[error("duplicate id `{0}`")]
    Duplicate(String),
    #[error("registry parse error: {0}")]
    Parse(String),
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kitchen() -> (SceneRegistry, SceneState) {
        let reg = SceneRegistry::kitchen();
        let state = reg.initial_state();
        (reg, state)
    }

    #[test]
    fn at_region_reads_placement() {
        let (_, mut s) = kitchen();
        s.placements.insert("milk".into(), Location::AtRegion("coffee_table_top".into()));
        let p = Predicate::AtRegion("milk".into(), "coffee_table_top".into());
        assert!(eval_predicate(&s, &p).unwrap());
    }

    #[test]
    fn inside_closed_container_is_still_true() {
        let (_, mut s) = kitchen();
        let cab = FixtureId::from("cabinet_top_compartment");
        s.placements.insert("butter".into(), Location::InsideFixture(cab.clone()));
        assert!(s.fixtures[&cab].is_closed());
        assert!(eval_predicate(&s, &Predicate::Inside("butter".into(), cab)).unwrap());
    }

    #[test]
    fn gripper_predicates_exclusive() {
        let (_, s) = kitchen();
        assert!(eval_predicate(&s, &Predicate::GripperEmpty).unwrap());
        assert!(!eval_predicate(&s, &Predicate::Holding("milk".into())).unwrap());
    }

    #[test]
    fn unknown_ids_are_errors() {
        let (_, s) = kitchen();
        let err = eval_predicate(&s, &Predicate::Holding("unicorn".into())).unwrap_err();
        assert_eq!(err, SceneError::UnknownId("unicorn".into()));
        assert!(eval_predicate(&s, &Predicate::AtRegion("milk".into(), "moon".into())).is_err());
        assert!(eval_predicate(&s, &Predicate::Open("nowhere".into())).is_err());
    }

    #[test]
    fn set_is_conjunction() {
        let (_, mut s) = kitchen();
        let fridge = FixtureId::from("short_fridge");
        s.fixtures.get_mut(&fridge).unwrap().articulation = Articulation::Open;
        s.placements.insert("milk".into(), Location::AtRegion("dining_table_top".into()));
        let set = PredicateSet::new(vec![
            Predicate::Open(fridge.clone()),
            Predicate::AtRegion("milk".into(), "dining_table_top".into()),
        ])
        .unwrap();
        assert!(eval_set(&s, &set).unwrap());
        s.fixtures.get_mut(&fridge).unwrap().articulation = Articulation::Closed;
        assert!(!eval_set(&s, &set).unwrap());
    }

    #[test]
    fn empty_set_rejected() {
        assert_eq!(PredicateSet::new(vec![]), Err(SceneError::EmptyPredicateSet));
        let parsed: Result<PredicateSet, _> = serde_json::from_str("[]");
        assert!(parsed.is_err());
    }

    #[test]
    fn empty_container() {
        let (_, s) = kitchen();
        assert!(!eval_predicate(&s, &Predicate::EmptyContainer("short_fridge".into())).unwrap());
        assert!(eval_predicate(&s, &Predicate::EmptyContainer("microwave".into())).unwrap());
    }

    #[test]
    fn valid_kitchen_has_empty_report() {
        let (reg, s) = kitchen();
        assert!(validate_scene(&s, &reg).is_valid());
    }

    #[test]
    fn two_held_objects_is_one_violation() {
        let (reg, mut s) = kitchen();
        s.placements.insert("milk".into(), Location::InGripper);
        s.placements.insert("plate".into(), Location::InGripper);
        let report = validate_scene(&s, &reg);
        assert_eq!(report.violations.len(), 1);
        assert!(matches!(report.violations[0], Violation::MultipleHeld { .. }));
    }

    #[test]
    fn undeclared_region_is_one_violation() {
        let (reg, mut s) = kitchen();
        s.placements.insert("plate".into(), Location::AtRegion("garage_bench".into()));
        let report = validate_scene(&s, &reg);
        assert_eq!(report.violations.len(), 1);
        assert!(matches!(report.violations[0], Violation::UndeclaredLocation { .. }));
    }

    #[test]
    fn capacity_one_slot_overflow() {
        let (reg, mut s) = kitchen();
        s.placements.insert("bowl".into(), Location::InsideFixture("microwave".into()));
        s.placements.insert("mug".into(), Location::InsideFixture("microwave".into()));
        let report = validate_scene(&s, &reg);
        assert!(matches!(report.violations[..], [Violation::OverCapacity { capacity: 1, .. }]));
    }

    #[test]
    fn registry_parsing_is_strict() {
        let mut v: serde_json::Value = serde_json::from_str(&SceneRegistry::kitchen().to_json()).unwrap();
        v["surprise"] = serde_json::json!(1);
        assert!(SceneRegistry::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn registry_rejects_duplicate_ids() {
        let mut reg = SceneRegistry::kitchen();
        let dup = reg.objects[0].clone();
        reg.objects.push(dup);
        assert!(matches!(SceneRegistry::from_json(&reg.to_json()), Err(SceneError::Duplicate(_))));
    }
}
