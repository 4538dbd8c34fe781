use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::geometry::GeometryKind;
use super::WarehouseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttrType {
    Text,
    Integer,
    Real,
    Boolean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    Boolean(bool),
    Integer(i64),
    Real(f64),
    Text(String),
}

impl AttrValue {
    pub fn attr_type(&self) -> AttrType {
        match self {
            AttrValue::Text(_) => AttrType::Text,
            AttrValue::Integer(_) => AttrType::Integer,
            AttrValue::Real(_) => AttrType::Real,
            AttrValue::Boolean(_) => AttrType::Boolean,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            AttrValue::Text(s) => serde_json::Value::String(s.clone()),
            AttrValue::Integer(i) => (*i).into(),
            AttrValue::Real(r) => serde_json::Number::from_f64(*r)
                .map(serde_json::Value::Number)
                .unwrap_or(serde_json::Value::Null),
            AttrValue::Boolean(b) => (*b).into(),
        }
    }
}

impl fmt::Display for AttrValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttrValue::Text(s) => f.write_str(s),
            AttrValue::Integer(i) => write!(f, "{i}"),
            AttrValue::Real(r) => write!(f, "{r}"),
            AttrValue::Boolean(b) => write!(f, "{b}"),
        }
    }
}

pub type Attributes = BTreeMap<String, AttrValue>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: AttrType,
    #[serde(default)]
    pub required: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ThemeGroup {
    #[serde(rename = "general-reference")]
    GeneralReference,
    #[serde(rename = "environment")]
    Environment,
    #[serde(rename = "climate")]
    Climate,
    #[serde(rename = "socio-economic")]
    SocioEconomic,
}

impl ThemeGroup {
    pub const ALL: [ThemeGroup; 4] = [
        ThemeGroup::GeneralReference,
        ThemeGroup::Environment,
        ThemeGroup::Climate,
        ThemeGroup::SocioEconomic,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ThemeGroup::GeneralReference => "general-reference",
            ThemeGroup::Environment => "environment",
            ThemeGroup::Climate => "climate",
            ThemeGroup::SocioEconomic => "socio-economic",
        }
    }
}

/// RGBA color written as `#rrggbb` or `#rrggbbaa`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Color(pub [u8; 4]);

impl TryFrom<String> for Color {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<Color> for String {
    fn from(c: Color) -> String {
        c.to_string()
    }
}

impl std::str::FromStr for Color {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let hex = s.strip_prefix('#').ok_or_else(|| format!("color '{s}' must start with '#'"))?;
        if !(hex.len() == 6 || hex.len() == 8) || !hex.is_ascii() {
            return Err(format!("color '{s}' must be #rrggbb or #rrggbbaa"));
        }
        let byte = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16).map_err(|_| format!("bad color '{s}'"));
        let alpha = if hex.len() == 8 { byte(6)? } else { 255 };
        Ok(Color([byte(0)?, byte(2)?, byte(4)?, alpha]))
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [r, g, b, a] = self.0;
        if a == 255 {
            write!(f, "#{r:02x}{g:02x}{b:02x}")
        } else {
            write!(f, "#{r:02x}{g:02x}{b:02x}{a:02x}")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Style {
    pub stroke: Color,
    pub stroke_width: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fill: Option<Color>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbol: Option<String>,
}

/// Point symbols understood by the renderer.
pub const POINT_SYMBOLS: [&str; 3] = ["circle", "square", "triangle"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub geometry_kind: GeometryKind,
    pub theme_group: ThemeGroup,
    #[serde(default)]
    pub attributes: Vec<AttributeSpec>,
    pub min_scale_denom: f64,
    pub max_scale_denom: f64,
    pub style: Style,
}

impl LayerSpec {
    pub fn validate(&self) -> Result<(), WarehouseError> {
        let bad = |why: String| Err(WarehouseError::InvalidLayerSpec(self.name.clone(), why));
        if self.name.trim().is_empty() {
            return bad("empty layer name".into());
        }
        if !(self.min_scale_denom > 0.0 && self.min_scale_denom <= self.max_scale_denom) {
            return bad(format!(
                "scale window [{}, {}] is not ordered",
                self.min_scale_denom, self.max_scale_denom
            ));
        }
        if !(self.style.stroke_width.is_finite() && self.style.stroke_width >= 0.0) {
            return bad("stroke width must be non-negative".into());
        }
        if let Some(sym) = &self.style.symbol {
            if !POINT_SYMBOLS.contains(&sym.as_str()) {
                return bad(format!("unknown point symbol '{sym}'"));
            }
        }
        let mut seen = BTreeSet::new();
        for a in &self.attributes {
            if !seen.insert(a.name.as_str()) {
                return bad(format!("duplicate attribute '{}'", a.name));
            }
        }
        Ok(())
    }

    pub fn attribute(&self, name: &str) -> Option<&AttributeSpec> {
        self.attributes.iter().find(|a| a.name == name)
    }

    /// Boundary-inclusive scale-window test.
    pub fn visible_at(&self, scale_denom: f64) -> bool {
        self.min_scale_denom <= scale_denom && scale_denom <= self.max_scale_denom
    }

    /// Checks that `attrs` conforms exactly to the schema.
    pub fn check_attributes(&self, attrs: &Attributes) -> Result<(), String> {
        for (name, value) in attrs {
            match self.attribute(name) {
                None => return Err(format!("attribute '{name}' is not in the schema")),
                Some(spec) if spec.kind != value.attr_type() => {
                    return Err(format!("attribute '{name}' should be {:?}", spec.kind))
                }
                _ => {}
            }
        }
        for spec in self.attributes.iter().filter(|a| a.required) {
            if !attrs.contains_key(&spec.name) {
                return Err(format!("required attribute '{}' is missing", spec.name));
            }
        }
        Ok(())
    }

    /// Coerces raw JSON properties onto the schema.
    ///
    /// Integers widen to reals where the schema asks for a real; nothing
    /// else converts. Properties outside the schema are dropped and counted;
    /// `null` counts as absent.
    pub fn coerce(&self, props: &serde_json::Map<String, serde_json::Value>) -> Result<(Attributes, usize), String> {
        use serde_json::Value;
        let mut out = Attributes::new();
        let mut dropped = 0;
        for (name, value) in props {
            let Some(spec) = self.attribute(name) else {
                dropped += 1;
                continue;
            };
            let coerced = match (spec.kind, value) {
                (_, Value::Null) => continue,
                (AttrType::Text, Value::String(s)) => AttrValue::Text(s.clone()),
                (AttrType::Boolean, Value::Bool(b)) => AttrValue::Boolean(*b),
                (AttrType::Integer, Value::Number(n)) if n.as_i64().is_some() => AttrValue::Integer(n.as_i64().unwrap_or_default()),
                (AttrType::Real, Value::Number(n)) => match n.as_f64() {
                    Some(f) if f.is_finite() => AttrValue::Real(f),
                    _ => return Err(format!("attribute '{name}' is not a finite number")),
                },
                (kind, v) => return Err(format!("attribute '{name}' expects {kind:?}, got {v}")),
            };
            out.insert(name.clone(), coerced);
        }
        for spec in self.attributes.iter().filter(|a| a.required) {
            if !out.contains_key(&spec.name) {
                return Err(format!("required attribute '{}' is missing", spec.name));
            }
        }
        Ok((out, dropped))
    }
}
