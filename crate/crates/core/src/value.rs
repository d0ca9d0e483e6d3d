//! Dynamically typed property values carried by agents, patches, nodes, edges
//! and model parameters.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Div, DivAssign, Index, Mul, MulAssign, Neg, Sub, SubAssign};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A 2- or 3-component real vector.
#[derive(Clone, Copy, PartialEq)]
pub struct Vect {
    dim: u8,
    c: [f64; 3],
}

impl Vect {
    pub const fn new2(x: f64, y: f64) -> Self {
        Vect { dim: 2, c: [x, y, 0.0] }
    }

    pub const fn new3(x: f64, y: f64, z: f64) -> Self {
        Vect { dim: 3, c: [x, y, z] }
    }

    pub const fn zero(dim: usize) -> Self {
        Vect { dim: dim as u8, c: [0.0; 3] }
    }

    /// Builds a vector from a 2- or 3-element slice.
    pub fn from_slice(s: &[f64]) -> Result<Self> {
        match *s {
            [x, y] => Ok(Vect::new2(x, y)),
            [x, y, z] => Ok(Vect::new3(x, y, z)),
            _ => Err(Error::InvalidArgument(format!(
                "a Vect needs 2 or 3 components, got {}",
                s.len()
            ))),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn x(&self) -> f64 {
        self.c[0]
    }

    pub fn y(&self) -> f64 {
        self.c[1]
    }

    pub fn z(&self) -> f64 {
        self.c[2]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.c[..self.dim()]
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.c[..self.dim as usize]
    }

    pub fn dot(&self, other: &Vect) -> f64 {
        self.as_slice().iter().zip(other.as_slice()).map(|(a, b)| a * b).sum()
    }

    /// Euclidean norm.
    pub fn veclength(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_integral(&self) -> bool {
        self.as_slice().iter().all(|v| v.fract() == 0.0 && v.is_finite())
    }

    fn zip_with(self, rhs: Vect, f: impl Fn(f64, f64) -> f64) -> Vect {
        assert_eq!(self.dim, rhs.dim, "Vect dimension mismatch");
        let mut out = self;
        for i in 0..self.dim() {
            out.c[i] = f(self.c[i], rhs.c[i]);
        }
        out
    }

    fn map(self, f: impl Fn(f64) -> f64) -> Vect {
        let mut out = self;
        for i in 0..self.dim() {
            out.c[i] = f(self.c[i]);
        }
        out
    }
}

/// Free-function form of [`Vect::veclength`].
pub fn veclength(v: Vect) -> f64 {
    v.veclength()
}

impl fmt::Debug for Vect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Vect{:?}", self.as_slice())
    }
}

impl Index<usize> for Vect {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.as_slice()[i]
    }
}

impl Add for Vect {
    type Output = Vect;
    fn add(self, rhs: Vect) -> Vect {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for Vect {
    type Output = Vect;
    fn sub(self, rhs: Vect) -> Vect {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Neg for Vect {
    type Output = Vect;
    fn neg(self) -> Vect {
        self.map(|a| -a)
    }
}

impl Mul<f64> for Vect {
    type Output = Vect;
    fn mul(self, rhs: f64) -> Vect {
        self.map(|a| a * rhs)
    }
}

impl Div<f64> for Vect {
    type Output = Vect;
    fn div(self, rhs: f64) -> Vect {
        self.map(|a| a / rhs)
    }
}

impl AddAssign for Vect {
    fn add_assign(&mut self, rhs: Vect) {
        *self = *self + rhs;
    }
}

impl SubAssign for Vect {
    fn sub_assign(&mut self, rhs: Vect) {
        *self = *self - rhs;
    }
}

impl MulAssign<f64> for Vect {
    fn mul_assign(&mut self, rhs: f64) {
        *self = *self * rhs;
    }
}

impl DivAssign<f64> for Vect {
    fn div_assign(&mut self, rhs: f64) {
        *self = *self / rhs;
    }
}

impl Serialize for Vect {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.as_slice().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vect {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        Vect::from_slice(&v).map_err(serde::de::Error::custom)
    }
}

/// Fill color: either a well-known name or an explicit RGB triple.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Color {
    Named(String),
    Rgb(u8, u8, u8),
}

const NAMED_COLORS: &[(&str, [u8; 3])] = &[
    ("black", [0, 0, 0]),
    ("white", [255, 255, 255]),
    ("red", [220, 40, 40]),
    ("green", [40, 160, 60]),
    ("blue", [40, 80, 220]),
    ("yellow", [240, 200, 30]),
    ("orange", [245, 130, 30]),
    ("purple", [130, 60, 170]),
    ("cyan", [30, 190, 210]),
    ("magenta", [210, 50, 180]),
    ("gray", [128, 128, 128]),
    ("grey", [128, 128, 128]),
    ("brown", [140, 90, 40]),
    ("pink", [240, 150, 180]),
];

impl Color {
    /// A named color. Unknown names are rejected.
    pub fn named(name: &str) -> Result<Color> {
        if NAMED_COLORS.iter().any(|(n, _)| *n == name) {
            Ok(Color::Named(name.to_string()))
        } else {
            Err(Error::InvalidArgument(format!("unknown color name `{name}`")))
        }
    }

    pub fn black() -> Color {
        Color::Named("black".into())
    }

    pub fn white() -> Color {
        Color::Named("white".into())
    }

    pub fn rgb(&self) -> [u8; 3] {
        match self {
            Color::Rgb(r, g, b) => [*r, *g, *b],
            Color::Named(n) => NAMED_COLORS
                .iter()
                .find(|(name, _)| name == n)
                .map(|(_, c)| *c)
                .unwrap_or([128, 128, 128]),
        }
    }

    /// `#rrggbb`
    pub fn hex(&self) -> String {
        let [r, g, b] = self.rgb();
        format!("#{r:02x}{g:02x}{b:02x}")
    }

    /// Parses a color name or a `#rrggbb` string.
    pub fn parse(s: &str) -> Result<Color> {
        if let Some(hex) = s.strip_prefix('#') {
            if hex.len() == 6 {
                if let Ok(v) = u32::from_str_radix(hex, 16) {
                    return Ok(Color::Rgb((v >> 16) as u8, (v >> 8) as u8, v as u8));
                }
            }
            return Err(Error::InvalidArgument(format!("malformed color `{s}`")));
        }
        Color::named(s)
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Color::Named(n) => f.write_str(n),
            Color::Rgb(..) => f.write_str(&self.hex()),
        }
    }
}

impl Serialize for Color {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Color::Named(n) => s.serialize_str(n),
            Color::Rgb(r, g, b) => [*r, *g, *b].serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for Color {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Name(String),
            Rgb([u8; 3]),
        }
        match Repr::deserialize(d)? {
            Repr::Name(n) => Color::parse(&n).map_err(serde::de::Error::custom),
            Repr::Rgb([r, g, b]) => Ok(Color::Rgb(r, g, b)),
        }
    }
}

/// Tagged dynamic value.
///
/// Serialized externally tagged (`{"real": 0.3}`, `{"vect": [0.0, 0.0]}`) so
/// the variant survives a JSON round trip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropValue {
    Int(i64),
    Real(f64),
    Bool(bool),
    Label(String),
    Vect(Vect),
    Color(Color),
}

/// Discriminant of a [`PropValue`], used for type-stability checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropType {
    Int,
    Real,
    Bool,
    Label,
    Vect,
    Color,
}

impl fmt::Display for PropType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PropType::Int => "int",
            PropType::Real => "real",
            PropType::Bool => "bool",
            PropType::Label => "label",
            PropType::Vect => "vect",
            PropType::Color => "color",
        };
        f.write_str(s)
    }
}

impl PropValue {
    pub fn label(s: impl Into<String>) -> PropValue {
        PropValue::Label(s.into())
    }

    pub fn prop_type(&self) -> PropType {
        match self {
            PropValue::Int(_) => PropType::Int,
            PropValue::Real(_) => PropType::Real,
            PropValue::Bool(_) => PropType::Bool,
            PropValue::Label(_) => PropType::Label,
            PropValue::Vect(_) => PropType::Vect,
            PropValue::Color(_) => PropType::Color,
        }
    }

    /// Numeric view: ints and bools widen to reals.
    pub fn as_real(&self) -> Option<f64> {
        match self {
            PropValue::Int(v) => Some(*v as f64),
            PropValue::Real(v) => Some(*v),
            PropValue::Bool(b) => Some(if *b { 1.0 } else { 0.0 }),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            PropValue::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            PropValue::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_vect(&self) -> Option<Vect> {
        match self {
            PropValue::Vect(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_label(&self) -> Option<&str> {
        match self {
            PropValue::Label(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_color(&self) -> Option<&Color> {
        match self {
            PropValue::Color(c) => Some(c),
            _ => None,
        }
    }

    /// Parses `text` as a value of type `ty` (used for `k=v` overrides).
    pub fn parse_as(ty: PropType, text: &str) -> Result<PropValue> {
        let bad = || Error::InvalidArgument(format!("cannot parse `{text}` as {ty}"));
        let text = text.trim();
        Ok(match ty {
            PropType::Int => PropValue::Int(text.parse().map_err(|_| bad())?),
            PropType::Real => PropValue::Real(text.parse().map_err(|_| bad())?),
            PropType::Bool => PropValue::Bool(text.parse().map_err(|_| bad())?),
            PropType::Label => {
                if text.is_empty() {
                    return Err(bad());
                }
                PropValue::Label(text.to_string())
            }
            PropType::Vect => {
                let parts: std::result::Result<Vec<f64>, _> =
                    text.split(',').map(|p| p.trim().parse::<f64>()).collect();
                PropValue::Vect(Vect::from_slice(&parts.map_err(|_| bad())?)?)
            }
            PropType::Color => PropValue::Color(Color::parse(text)?),
        })
    }
}

impl fmt::Display for PropValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropValue::Int(v) => write!(f, "{v}"),
            PropValue::Real(v) => write!(f, "{v:?}"),
            PropValue::Bool(v) => write!(f, "{v}"),
            PropValue::Label(s) => f.write_str(s),
            PropValue::Vect(v) => write!(f, "{:?}", v.as_slice()),
            PropValue::Color(c) => write!(f, "{c}"),
        }
    }
}

impl From<i64> for PropValue {
    fn from(v: i64) -> Self {
        PropValue::Int(v)
    }
}

impl From<i32> for PropValue {
    fn from(v: i32) -> Self {
        PropValue::Int(v as i64)
    }
}

impl From<f64> for PropValue {
    fn from(v: f64) -> Self {
        PropValue::Real(v)
    }
}

impl From<bool> for PropValue {
    fn from(v: bool) -> Self {
        PropValue::Bool(v)
    }
}

impl From<&str> for PropValue {
    fn from(v: &str) -> Self {
        PropValue::Label(v.to_string())
    }
}

impl From<Vect> for PropValue {
    fn from(v: Vect) -> Self {
        PropValue::Vect(v)
    }
}

impl From<Color> for PropValue {
    fn from(v: Color) -> Self {
        PropValue::Color(v)
    }
}

/// Keys the engine gives meaning to.
pub mod reserved {
    pub const POS: &str = "pos";
    pub const VEL: &str = "vel";
    pub const SHAPE: &str = "shape";
    pub const ORIENTATION: &str = "orientation";
    pub const COLOR: &str = "color";
    pub const SIZE: &str = "size";

    pub const GRAPHICS: [&str; 4] = [SHAPE, ORIENTATION, COLOR, SIZE];
}

fn check_reserved(key: &str, value: &PropValue) -> Result<()> {
    use reserved::*;
    let expected = match key {
        POS | VEL => PropType::Vect,
        SHAPE => PropType::Label,
        COLOR => PropType::Color,
        ORIENTATION | SIZE => PropType::Real,
        _ => return Ok(()),
    };
    if value.prop_type() == expected {
        Ok(())
    } else {
        Err(Error::TypeChange {
            key: key.to_string(),
            from: expected,
            to: value.prop_type(),
        })
    }
}

/// Key → value table with type-stable writes.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PropTable(BTreeMap<String, PropValue>);

impl PropTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builder-style insert. Panics on a reserved-key type violation, so it is
    /// meant for literal defaults; use [`PropTable::set`] for fallible writes.
    pub fn with(mut self, key: &str, value: impl Into<PropValue>) -> Self {
        self.set(key, value).expect("invalid default property");
        self
    }

    pub fn get(&self, key: &str) -> Option<&PropValue> {
        self.0.get(key)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.0.contains_key(key)
    }

    /// Writes `key`. A key that already exists keeps its variant for life.
    pub fn set(&mut self, key: &str, value: impl Into<PropValue>) -> Result<()> {
        let value = value.into();
        check_reserved(key, &value)?;
        match self.0.get_mut(key) {
            Some(old) => {
                if old.prop_type() != value.prop_type() {
                    return Err(Error::TypeChange {
                        key: key.to_string(),
                        from: old.prop_type(),
                        to: value.prop_type(),
                    });
                }
                if let (PropValue::Vect(a), PropValue::Vect(b)) = (&*old, &value) {
                    if a.dim() != b.dim() {
                        return Err(Error::InvalidArgument(format!(
                            "`{key}` changes dimension from {} to {}",
                            a.dim(),
                            b.dim()
                        )));
                    }
                }
                *old = value;
            }
            None => {
                self.0.insert(key.to_string(), value);
            }
        }
        Ok(())
    }

    pub fn remove(&mut self, key: &str) -> Option<PropValue> {
        self.0.remove(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &PropValue)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn require(&self, key: &str) -> Result<&PropValue> {
        self.0.get(key).ok_or_else(|| Error::MissingProp(key.to_string()))
    }

    fn wrong(&self, key: &str, want: PropType) -> Error {
        Error::WrongType {
            key: key.to_string(),
            expected: want,
            found: self.0[key].prop_type(),
        }
    }

    /// Real value; ints widen.
    pub fn real(&self, key: &str) -> Result<f64> {
        match self.require(key)? {
            PropValue::Real(v) => Ok(*v),
            PropValue::Int(v) => Ok(*v as f64),
            _ => Err(self.wrong(key, PropType::Real)),
        }
    }

    pub fn int(&self, key: &str) -> Result<i64> {
        self.require(key)?.as_int().ok_or_else(|| self.wrong(key, PropType::Int))
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        self.require(key)?.as_bool().ok_or_else(|| self.wrong(key, PropType::Bool))
    }

    pub fn vect(&self, key: &str) -> Result<Vect> {
        self.require(key)?.as_vect().ok_or_else(|| self.wrong(key, PropType::Vect))
    }

    pub fn label(&self, key: &str) -> Result<&str> {
        match self.require(key)? {
            PropValue::Label(s) => Ok(s),
            _ => Err(self.wrong(key, PropType::Label)),
        }
    }

    pub fn color(&self, key: &str) -> Result<&Color> {
        match self.require(key)? {
            PropValue::Color(c) => Ok(c),
            _ => Err(self.wrong(key, PropType::Color)),
        }
    }
}

impl FromIterator<(String, PropValue)> for PropTable {
    fn from_iter<T: IntoIterator<Item = (String, PropValue)>>(iter: T) -> Self {
        PropTable(iter.into_iter().collect())
    }
}
