use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A set over the annotation alphabet `+ - * / # u n`.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ann(u8);

const SYMBOLS: [char; 7] = ['+', '-', '*', '/', '#', 'u', 'n'];

impl Ann {
    pub const EMPTY: Ann = Ann(0);
    /// candidate whose created elements are all new
    pub const PLUS: Ann = Ann(1);
    /// every created element deleted
    pub const MINUS: Ann = Ann(2);
    /// candidate reusing a formerly propagated element
    pub const STAR: Ann = Ann(4);
    /// match partially broken
    pub const SLASH: Ann = Ann(8);
    /// attribute condition violated by a change
    pub const HASH: Ann = Ann(16);
    /// opposite side of a candidate
    pub const U: Ann = Ann(32);
    /// filter NAC violated by an addition
    pub const N: Ann = Ann(64);

    pub fn contains(self, other: Ann) -> bool {
        self.0 & other.0 == other.0 && other.0 != 0
    }

    /// Whether any symbol of `other` is present.
    pub fn intersects(self, other: Ann) -> bool {
        self.0 & other.0 != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn symbols(self) -> Vec<String> {
        SYMBOLS.iter().enumerate().filter(|(i, _)| self.0 & (1 << i) != 0).map(|(_, c)| c.to_string()).collect()
    }

    /// Parses a string of symbols such as `"-/"`; `"{}"` and `""` are empty.
    pub fn parse(s: &str) -> Option<Ann> {
        let mut a = Ann::EMPTY;
        for c in s.chars().filter(|c| !matches!(c, '{' | '}' | ' ' | ',')) {
            let c = if c == '−' { '-' } else { c };
            let i = SYMBOLS.iter().position(|x| *x == c)?;
            a.0 |= 1 << i;
        }
        Some(a)
    }
}

impl std::ops::BitOr for Ann {
    type Output = Ann;
    fn bitor(self, rhs: Ann) -> Ann {
        Ann(self.0 | rhs.0)
    }
}

impl std::ops::BitOrAssign for Ann {
    fn bitor_assign(&mut self, rhs: Ann) {
        self.0 |= rhs.0;
    }
}

impl fmt::Display for Ann {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("{}");
        }
        f.write_str(&self.symbols().concat())
    }
}

impl fmt::Debug for Ann {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for Ann {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.symbols().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Ann {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v: Vec<String> = Vec::deserialize(d)?;
        Ann::parse(&v.concat()).ok_or_else(|| serde::de::Error::custom("unknown annotation symbol"))
    }
}
