use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{FixtureId, IdKind, Location, ObjectId, SceneRegistry};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionType {
    Pick,
    Place,
    Open,
    Close,
    Pour,
    Turn,
    Press,
    Push,
    Move,
    Store,
    Return,
    Wait,
}

impl ActionType {
    pub const ALL: [ActionType; 12] = [
        ActionType::Pick,
        ActionType::Place,
        ActionType::Open,
        ActionType::Close,
        ActionType::Pour,
        ActionType::Turn,
        ActionType::Press,
        ActionType::Push,
        ActionType::Move,
        ActionType::Store,
        ActionType::Return,
        ActionType::Wait,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActionType::Pick => "pick",
            ActionType::Place => "place",
            ActionType::Open => "open",
            ActionType::Close => "close",
            ActionType::Pour => "pour",
            ActionType::Turn => "turn",
            ActionType::Press => "press",
            ActionType::Push => "push",
            ActionType::Move => "move",
            ActionType::Store => "store",
            ActionType::Return => "return",
            ActionType::Wait => "wait",
        }
    }

    fn slots(self) -> Slots {
        use Need::*;
        match self {
            ActionType::Pick => Slots::new(Required, Forbidden, Bindable, Forbidden),
            ActionType::Place | ActionType::Return | ActionType::Store | ActionType::Pour => {
                Slots::new(Required, Forbidden, Forbidden, Bindable)
            }
            ActionType::Push => Slots::new(Required, Forbidden, Required, Required),
            ActionType::Open | ActionType::Close | ActionType::Turn | ActionType::Press => {
                Slots::new(Forbidden, Bindable, Forbidden, Forbidden)
            }
            ActionType::Move => Slots::new(Forbidden, Forbidden, Forbidden, Required),
            ActionType::Wait => Slots::new(Forbidden, Forbidden, Forbidden, Forbidden),
        }
    }

    /// Fixture-only actions: open, close, turn, press.
    pub fn targets_fixture(self) -> bool {
        matches!(self, ActionType::Open | ActionType::Close | ActionType::Turn | ActionType::Press)
    }
}

impl fmt::Display for ActionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActionType {
    type Err = ActionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActionType::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| ActionError::Parse(format!("unknown action `{s}`")))
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Need {
    Required,
    /// Required for execution but may be left open in a plan skeleton.
    Bindable,
    Forbidden,
}

struct Slots {
    object: Need,
    fixture: Need,
    source: Need,
    target: Need,
}

impl Slots {
    fn new(object: Need, fixture: Need, source: Need, target: Need) -> Self {
        Self { object, fixture, source, target }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ActionError {
    #[error("malformed {action}: {reason}")]
    Malformed { action: ActionType, reason: String },
    #[error("cannot parse step: {0}")]
    Parse(String),
}

fn malformed(action: ActionType, reason: impl Into<String>) -> ActionError {
    ActionError::Malformed { action, reason: reason.into() }
}

/// One executable primitive, and also the canonical tuple of a subgoal.
///
/// Field order is the comparison order used for plan matching.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrimitiveAction {
    pub action: ActionType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<ObjectId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<FixtureId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<Location>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Location>,
}

impl PrimitiveAction {
    pub fn new(action: ActionType) -> Self {
        Self { action, object: None, fixture: None, source: None, target: None }
    }

    pub fn with_object(mut self, o: impl Into<ObjectId>) -> Self {
        self.object = Some(o.into());
        self
    }

    pub fn with_fixture(mut self, f: impl Into<FixtureId>) -> Self {
        self.fixture = Some(f.into());
        self
    }

    pub fn with_source(mut self, l: Location) -> Self {
        self.source = Some(l);
        self
    }

    pub fn with_target(mut self, l: Location) -> Self {
        self.target = Some(l);
        self
    }

    pub fn pick(o: impl Into<ObjectId>, from: Location) -> Self {
        Self::new(ActionType::Pick).with_object(o).with_source(from)
    }

    pub fn place(o: impl Into<ObjectId>, to: Location) -> Self {
        Self::new(ActionType::Place).with_object(o).with_target(to)
    }

    pub fn store(o: impl Into<ObjectId>, into: impl Into<FixtureId>) -> Self {
        Self::new(ActionType::Store).with_object(o).with_target(Location::InsideFixture(into.into()))
    }

    pub fn open(f: impl Into<FixtureId>) -> Self {
        Self::new(ActionType::Open).with_fixture(f)
    }

    pub fn close(f: impl Into<FixtureId>) -> Self {
        Self::new(ActionType::Close).with_fixture(f)
    }

    pub fn move_to(l: Location) -> Self {
        Self::new(ActionType::Move).with_target(l)
    }

    /// Checks slot shapes. Bindable slots may be empty unless `bound` is set.
    pub fn check(&self, bound: bool) -> Result<(), ActionError> {
        let a = self.action;
        let slots = a.slots();
        let check = |need: Need, present: bool, name: &str| -> Result<(), ActionError> {
            match need {
                Need::Forbidden if present => Err(malformed(a, format!("unexpected {name}"))),
                Need::Required if !present => Err(malformed(a, format!("missing {name}"))),
                Need::Bindable if bound && !present => Err(malformed(a, format!("unbound {name}"))),
                _ => Ok(()),
            }
        };
        check(slots.object, self.object.is_some(), "object")?;
        check(slots.fixture, self.fixture.is_some(), "fixture")?;
        check(slots.source, self.source.is_some(), "source")?;
        check(slots.target, self.target.is_some(), "target")?;

        let gripper = |l: &Option<Location>| matches!(l, Some(Location::InGripper));
        if gripper(&self.source) || gripper(&self.target) {
            return Err(malformed(a, "gripper is not a placement"));
        }
        match a {
            ActionType::Store if self.target.as_ref().is_some_and(|t| t.fixture().is_none()) => {
                Err(malformed(a, "store target must be a container"))
            }
            ActionType::Pour if self.target.as_ref().is_some_and(|t| t.region().is_none()) => {
                Err(malformed(a, "pour target must be a region"))
            }
            ActionType::Push
                if self.source.as_ref().is_some_and(|t| t.region().is_none())
                    || self.target.as_ref().is_some_and(|t| t.region().is_none()) =>
            {
                Err(malformed(a, "push moves between regions"))
            }
            _ => Ok(()),
        }
    }

    pub fn is_bound(&self) -> bool {
        self.check(true).is_ok()
    }

    pub fn render(&self) -> String {
        let q = |o: &Option<Location>| o.as_ref().map_or("?".to_owned(), |l| l.to_string());
        let obj = self.object.as_ref().map_or("?".to_owned(), |o| o.to_string());
        let fx = self.fixture.as_ref().map_or("?".to_owned(), |f| f.to_string());
        match self.action {
            ActionType::Pick => match &self.source {
                Some(s) => format!("pick {obj} from {s}"),
                None => format!("pick {obj}"),
            },
            ActionType::Place => {
                let prep = if matches!(self.target, Some(Location::InsideFixture(_))) { "in" } else { "on" };
                format!("place {obj} {prep} {}", q(&self.target))
            }
            ActionType::Store => format!("store {obj} in {}", q(&self.target)),
            ActionType::Return => format!("return {obj} to {}", q(&self.target)),
            ActionType::Pour => format!("pour {obj} into {}", q(&self.target)),
            ActionType::Push => format!("push {obj} from {} to {}", q(&self.source), q(&self.target)),
            ActionType::Open | ActionType::Close | ActionType::Turn | ActionType::Press => {
                format!("{} {fx}", self.action)
            }
            ActionType::Move => format!("move to {}", q(&self.target)),
            ActionType::Wait => "wait".to_owned(),
        }
    }
}

impl fmt::Display for PrimitiveAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// A step-level instruction in a plan.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Subgoal {
    pub action: ActionType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<ObjectId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<FixtureId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<Location>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Location>,
    pub text: String,
}

impl Subgoal {
    pub fn from_action(a: PrimitiveAction) -> Self {
        let text = a.render();
        Self { action: a.action, object: a.object, fixture: a.fixture, source: a.source, target: a.target, text }
    }

    /// The canonical (action, object, fixture, source, target) tuple.
    pub fn canonical(&self) -> PrimitiveAction {
        PrimitiveAction {
            action: self.action,
            object: self.object.clone(),
            fixture: self.fixture.clone(),
            source: self.source.clone(),
            target: self.target.clone(),
        }
    }

    pub fn check(&self, bound: bool) -> Result<(), ActionError> {
        self.canonical().check(bound)
    }

    pub fn is_bound(&self) -> bool {
        self.canonical().is_bound()
    }

    /// Re-renders `text` from the canonical fields.
    pub fn rerender(&mut self) {
        self.text = self.canonical().render();
    }

    /// Parses the rendered step grammar, e.g. `pick milk from short_fridge`,
    /// `place plate on dining_table_top`, `open cabinet_top_compartment`.
    pub fn parse(text: &str, registry: &SceneRegistry) -> Result<Subgoal, ActionError> {
        let cleaned = text.trim().trim_end_matches(['.', ';']).to_lowercase();
        let words: Vec<&str> = cleaned.split_whitespace().filter(|w| !matches!(*w, "the" | "a" | "an")).collect();
        let (head, rest) = words.split_first().ok_or_else(|| ActionError::Parse("empty step".into()))?;
        let action: ActionType = head.parse()?;
        let mut a = PrimitiveAction::new(action);

        let location = |w: &str| -> Result<Option<Location>, ActionError> {
            if w == "?" {
                return Ok(None);
            }
            match registry.kind_of(w) {
                Some(IdKind::Region) => Ok(Some(Location::AtRegion(w.into()))),
                Some(IdKind::Fixture) => Ok(Some(Location::InsideFixture(w.into()))),
                _ => Err(ActionError::Parse(format!("`{w}` is not a location"))),
            }
        };

        let mut it = rest.iter().copied().peekable();
        if action.targets_fixture() {
            let f = it.next().ok_or_else(|| ActionError::Parse("missing fixture".into()))?;
            if f != "?" {
                if registry.kind_of(f) != Some(IdKind::Fixture) {
                    return Err(ActionError::Parse(format!("`{f}` is not a fixture")));
                }
                a.fixture = Some(f.into());
            }
        } else if !matches!(action, ActionType::Move | ActionType::Wait) {
            let o = it.next().ok_or_else(|| ActionError::Parse("missing object".into()))?;
            if registry.kind_of(o) != Some(IdKind::Object) {
                return Err(ActionError::Parse(format!("`{o}` is not an object")));
            }
            a.object = Some(o.into());
        }
        while let Some(w) = it.next() {
            let arg = it.next().ok_or_else(|| ActionError::Parse(format!("dangling `{w}`")))?;
            match w {
                "from" => a.source = location(arg)?,
                "on" | "in" | "into" | "to" | "onto" | "inside" => a.target = location(arg)?,
                _ => return Err(ActionError::Parse(format!("unexpected `{w}`"))),
            }
        }
        a.check(false)?;
        Ok(Subgoal { text: text.trim().to_owned(), ..Subgoal::from_action(a) })
    }
}

impl From<PrimitiveAction> for Subgoal {
    fn from(a: PrimitiveAction) -> Self {
        Subgoal::from_action(a)
    }
}
