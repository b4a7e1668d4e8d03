//! JSON form of elements of the induced representation.
//!
//! ```json
//! {"schema":1,"shape":{"p":3,"deg":1,"r":[1]},
//!  "entries":[{"point":{"n":0,"form":"plus","param":[]},"value":[[[1],1]]}]}
//! ```
//!
//! Entries are sorted by coset point and each value lists the nonzero
//! coefficients against the monomial basis, labelled by exponent tuples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldCtx;
use crate::induced::InducedFn;
use crate::sl2::CosetPoint;
use crate::weights::WeightShape;

pub const FUNCTION_SCHEMA: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionJson {
    pub schema: u32,
    pub shape: ShapeJson,
    pub entries: Vec<EntryJson>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeJson {
    pub p: u32,
    pub deg: u32,
    pub r: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryJson {
    pub point: CosetPoint,
    pub value: Vec<(Vec<u32>, u32)>,
}

pub fn to_json(g: &InducedFn, shape: &WeightShape, f: &FieldCtx) -> FunctionJson {
    FunctionJson {
        schema: FUNCTION_SCHEMA,
        shape: ShapeJson { p: f.p(), deg: f.deg(), r: shape.r().to_vec() },
        entries: g.entries().map(|(p, v)| EntryJson { point: p.clone(), value: shape.to_pairs(v) }).collect(),
    }
}

/// Parses a function, checking it against the given field and weight.
pub fn from_json(j: &FunctionJson, shape: &WeightShape, f: &FieldCtx) -> Result<InducedFn> {
    if j.schema != FUNCTION_SCHEMA {
        return Err(Error::Parse(format!("unsupported function schema {}", j.schema)));
    }
    let js = &j.shape;
    if (js.p, js.deg) != (f.p(), f.deg()) || js.r != shape.r() {
        return Err(Error::Parse(format!(
            "function over (p, deg, r) = ({}, {}, {:?}) does not match ({}, {}, {:?})",
            js.p,
            js.deg,
            js.r,
            f.p(),
            f.deg(),
            shape.r()
        )));
    }
    let mut g = InducedFn::zero();
    for e in &j.entries {
        e.point.validate(f)?;
        g.add_at(e.point.clone(), &shape.from_pairs(&e.value, f)?, f);
    }
    Ok(g)
}

pub fn parse(text: &str, shape: &WeightShape, f: &FieldCtx) -> Result<InducedFn> {
    let j: FunctionJson = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    from_json(&j, shape, f)
}

/// Parses a function together with the field and weight it declares.
pub fn read(text: &str) -> Result<(FieldCtx, WeightShape, InducedFn)> {
    let j: FunctionJson = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let f = FieldCtx::new(j.shape.p, j.shape.deg)?;
    let shape = WeightShape::new(&f, j.shape.r.clone())?;
    let g = from_json(&j, &shape, &f)?;
    Ok((f, shape, g))
}

pub fn render(g: &InducedFn, shape: &WeightShape, f: &FieldCtx) -> String {
    serde_json::to_string(&to_json(g, shape, f)).expect("function JSON is serialisable")
}
