use std::fmt;

/// `name id`, e.g. `cabinet 3`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label {
    pub name: String,
    pub id: u32,
}

impl Label {
    pub fn new(name: &str, id: u32) -> Self {
        Label {
            name: name.to_string(),
            id,
        }
    }

    /// Parse exactly two tokens: a lowercase name and a positive integer.
    pub fn from_tokens(name: &str, id: &str) -> Option<Self> {
        if name.is_empty() || !name.bytes().all(|b| b.is_ascii_lowercase()) {
            return None;
        }
        let id: u32 = id.parse().ok()?;
        Some(Label::new(name, id))
    }

    pub fn parse(s: &str) -> Option<Self> {
        let t: Vec<&str> = s.split_whitespace().collect();
        match t.as_slice() {
            [n, i] => Self::from_tokens(n, i),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.name, self.id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransformVerb {
    Heat,
    Cool,
    Clean,
}

impl TransformVerb {
    pub fn as_str(self) -> &'static str {
        match self {
            TransformVerb::Heat => "heat",
            TransformVerb::Cool => "cool",
            TransformVerb::Clean => "clean",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "heat" => Some(TransformVerb::Heat),
            "cool" => Some(TransformVerb::Cool),
            "clean" => Some(TransformVerb::Clean),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum HouseAction {
    GoTo(Label),
    Open(Label),
    Close(Label),
    Take(Label, Label),
    Put(Label, Label),
    Transform(TransformVerb, Label, Label),
    Use(Label),
}

/// The nine action verbs of the household grammar.
pub const VERBS: [&str; 9] = ["go to", "open", "close", "take", "put", "heat", "cool", "clean", "use"];

pub fn parse_action(s: &str) -> Option<HouseAction> {
    let t: Vec<&str> = s.split_whitespace().collect();
    let lab = Label::from_tokens;
    match t.as_slice() {
        ["go", "to", n, i] => Some(HouseAction::GoTo(lab(n, i)?)),
        ["open", n, i] => Some(HouseAction::Open(lab(n, i)?)),
        ["close", n, i] => Some(HouseAction::Close(lab(n, i)?)),
        ["take", o, oi, "from", r, ri] => Some(HouseAction::Take(lab(o, oi)?, lab(r, ri)?)),
        ["put", o, oi, "in/on", r, ri] => Some(HouseAction::Put(lab(o, oi)?, lab(r, ri)?)),
        [v, o, oi, "with", r, ri] => Some(HouseAction::Transform(
            TransformVerb::parse(v)?,
            lab(o, oi)?,
            lab(r, ri)?,
        )),
        ["use", o, oi] => Some(HouseAction::Use(lab(o, oi)?)),
        _ => None,
    }
}

impl fmt::Display for HouseAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HouseAction::GoTo(r) => write!(f, "go to {r}"),
            HouseAction::Open(r) => write!(f, "open {r}"),
            HouseAction::Close(r) => write!(f, "close {r}"),
            HouseAction::Take(o, r) => write!(f, "take {o} from {r}"),
            HouseAction::Put(o, r) => write!(f, "put {o} in/on {r}"),
            HouseAction::Transform(v, o, r) => write!(f, "{} {o} with {r}", v.as_str()),
            HouseAction::Use(o) => write!(f, "use {o}"),
        }
    }
}

/// Leading verb of an action line, tolerant of malformed arguments.
pub fn verb_of(s: &str) -> Option<&'static str> {
    let t = s.trim();
    VERBS.iter().copied().find(|v| {
        t == *v || t.starts_with(&format!("{v} "))
    })
}
