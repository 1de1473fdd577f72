//! Schemas, bags of records, databases and their JSON formats.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::error::{Error, Result};
use crate::value::{format_rational, parse_rational, ColType, Name, Value};

/// A record: one value per column.
pub type Record = Vec<Value>;

/// A column of a stored relation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ColType,
    #[serde(default = "default_true")]
    pub nullable: bool,
    #[serde(default)]
    pub key: bool,
}

fn default_true() -> bool {
    true
}

impl Column {
    pub fn new(name: &str, ty: ColType) -> Self {
        Column { name: name.to_string(), ty, nullable: true, key: false }
    }

    pub fn not_null(mut self) -> Self {
        self.nullable = false;
        self
    }

    pub fn key(mut self) -> Self {
        self.key = true;
        self
    }

    /// Key and NOT NULL columns never hold NULL.
    pub fn may_be_null(&self) -> bool {
        self.nullable && !self.key
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationSchema {
    pub columns: Vec<Column>,
}

impl RelationSchema {
    pub fn new(columns: Vec<Column>) -> Self {
        RelationSchema { columns }
    }

    /// Attribute labels of relation `rel`: `rel.column`.
    pub fn labels(&self, rel: &str) -> Vec<Name> {
        self.columns.iter().map(|c| Name::from(format!("{rel}.{}", c.name))).collect()
    }

    pub fn type_word(&self) -> Vec<ColType> {
        self.columns.iter().map(|c| c.ty).collect()
    }

    pub fn arity(&self) -> usize {
        self.columns.len()
    }
}

/// Named relation schemas.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub relations: BTreeMap<Name, RelationSchema>,
}

impl Serialize for Name {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Name {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d).map(Name::from)
    }
}

impl Schema {
    pub fn new() -> Self {
        Schema::default()
    }

    pub fn with(mut self, rel: &str, columns: Vec<Column>) -> Self {
        self.relations.insert(Name::new(rel), RelationSchema::new(columns));
        self
    }

    pub fn get(&self, rel: &str) -> Option<&RelationSchema> {
        self.relations.get(rel)
    }

    /// Labels of base relation `rel`, or `None` if it is not declared.
    pub fn labels(&self, rel: &str) -> Option<Vec<Name>> {
        self.get(rel).map(|r| r.labels(rel))
    }
}

/// A multiset of records with positive multiplicities.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Bag {
    entries: BTreeMap<Record, u64>,
}

impl Bag {
    pub fn new() -> Self {
        Bag::default()
    }

    pub fn from_records(records: impl IntoIterator<Item = Record>) -> Self {
        let mut b = Bag::new();
        for r in records {
            b.insert(r, 1).expect("multiplicity overflow");
        }
        b
    }

    pub fn insert(&mut self, record: Record, k: u64) -> Result<()> {
        if k == 0 {
            return Ok(());
        }
        let slot = self.entries.entry(record).or_insert(0);
        *slot = slot.checked_add(k).ok_or(Error::Overflow)?;
        Ok(())
    }

    pub fn multiplicity(&self, record: &[Value]) -> u64 {
        self.entries.get(record).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of distinct records.
    pub fn distinct_len(&self) -> usize {
        self.entries.len()
    }

    /// Total number of records counting multiplicities.
    pub fn cardinality(&self) -> u64 {
        self.entries.values().sum()
    }

    /// Records in canonical order with their multiplicities.
    pub fn iter(&self) -> impl Iterator<Item = (&Record, u64)> {
        self.entries.iter().map(|(r, k)| (r, *k))
    }

    pub fn union_all(&self, other: &Bag) -> Result<Bag> {
        let mut out = self.clone();
        for (r, k) in other.iter() {
            out.insert(r.clone(), k)?;
        }
        Ok(out)
    }

    pub fn intersect_all(&self, other: &Bag) -> Bag {
        let entries = self
            .entries
            .iter()
            .filter_map(|(r, k)| {
                let m = (*k).min(other.multiplicity(r));
                (m > 0).then(|| (r.clone(), m))
            })
            .collect();
        Bag { entries }
    }

    pub fn except_all(&self, other: &Bag) -> Bag {
        let entries = self
            .entries
            .iter()
            .filter_map(|(r, k)| {
                let m = k.saturating_sub(other.multiplicity(r));
                (m > 0).then(|| (r.clone(), m))
            })
            .collect();
        Bag { entries }
    }

    /// One copy of every record.
    pub fn distinct(&self) -> Bag {
        Bag { entries: self.entries.keys().map(|r| (r.clone(), 1)).collect() }
    }

    /// Whether some record holds NULL at `position`.
    pub fn has_null_at(&self, position: usize) -> bool {
        self.entries.keys().any(|r| r.get(position).is_some_and(Value::is_null))
    }

    pub fn has_null(&self) -> bool {
        self.entries.keys().any(|r| r.iter().any(Value::is_null))
    }

    /// Canonical text: one line per distinct record, sorted with NULL first and
    /// numbers before ordinary values, followed by ` x<multiplicity>` when above 1.
    pub fn canonical_text(&self) -> String {
        if self.entries.is_empty() {
            return "(empty)\n".to_string();
        }
        let mut s = String::new();
        for (r, k) in self.iter() {
            let cells: Vec<String> = r.iter().map(Value::to_string).collect();
            let _ = write!(s, "({})", cells.join(", "));
            if k > 1 {
                let _ = write!(s, " x{k}");
            }
            s.push('\n');
        }
        s
    }

    /// JSON rows with explicit multiplicities.
    pub fn to_json(&self) -> Json {
        Json::Array(
            self.iter()
                .map(|(r, k)| serde_json::json!({ "row": r.iter().map(cell_to_json).collect::<Vec<_>>(), "multiplicity": k }))
                .collect(),
        )
    }

    /// Inverse of [`Bag::to_json`]; numbers are recognised by the type word.
    pub fn from_json(json: &Json, types: &[ColType]) -> Result<Bag> {
        let rows = json.as_array().ok_or_else(|| Error::Database("bag must be a JSON array".into()))?;
        let mut bag = Bag::new();
        for row in rows {
            let cells = row.get("row").and_then(Json::as_array).ok_or_else(|| Error::Database("row without `row`".into()))?;
            let k = row.get("multiplicity").and_then(Json::as_u64).ok_or_else(|| Error::Database("row without `multiplicity`".into()))?;
            if cells.len() != types.len() {
                return Err(Error::Database("row arity differs from its type word".into()));
            }
            let rec = cells.iter().zip(types).map(|(c, t)| cell_from_json(c, *t)).collect::<Result<Record>>()?;
            bag.insert(rec, k)?;
        }
        Ok(bag)
    }
}

fn cell_to_json(v: &Value) -> Json {
    match v {
        Value::Null => Json::Null,
        Value::Num(r) => Json::String(format_rational(r)),
        Value::Ord(s) => Json::String(s.to_string()),
    }
}

fn cell_from_json(c: &Json, ty: ColType) -> Result<Value> {
    match (c, ty) {
        (Json::Null, _) => Ok(Value::Null),
        (Json::String(s), ColType::Ord) => Ok(Value::ord(s)),
        (Json::String(s), ColType::Num) => Ok(Value::Num(parse_rational(s)?)),
        (Json::Number(n), ColType::Num) => Ok(Value::Num(parse_rational(&n.to_string())?)),
        (other, _) => Err(Error::Database(format!("cell {other} does not fit a column of type {ty}"))),
    }
}

/// A database: a schema and one bag per relation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Database {
    pub schema: Schema,
    pub data: BTreeMap<Name, Bag>,
}

#[derive(Serialize, Deserialize)]
struct DatabaseFile {
    schema: BTreeMap<String, RelationSchema>,
    #[serde(default)]
    data: BTreeMap<String, Vec<Vec<Json>>>,
}

impl Database {
    /// Builds and validates a database.
    pub fn new(schema: Schema, data: BTreeMap<Name, Bag>) -> Result<Database> {
        let db = Database { schema, data };
        db.validate()?;
        Ok(db)
    }

    pub fn empty(schema: Schema) -> Database {
        let data = schema.relations.keys().map(|k| (k.clone(), Bag::new())).collect();
        Database { schema, data }
    }

    pub fn relation(&self, name: &str) -> Option<&Bag> {
        self.data.get(name)
    }

    /// Checks types, nullability, and key uniqueness.
    pub fn validate(&self) -> Result<()> {
        for name in self.data.keys() {
            if !self.schema.relations.contains_key(name) {
                return Err(Error::Database(format!("data for undeclared relation `{name}`")));
            }
        }
        for (name, rel) in &self.schema.relations {
            let mut seen_cols = BTreeSet::new();
            for c in &rel.columns {
                if !seen_cols.insert(&c.name) {
                    return Err(Error::Database(format!("duplicate column `{}` in `{name}`", c.name)));
                }
            }
            let Some(bag) = self.data.get(name) else { continue };
            let keys: Vec<usize> = rel.columns.iter().enumerate().filter(|(_, c)| c.key).map(|(i, _)| i).collect();
            let mut seen_keys = BTreeSet::new();
            for (r, k) in bag.iter() {
                if r.len() != rel.arity() {
                    return Err(Error::Database(format!("record of arity {} in `{name}` of arity {}", r.len(), rel.arity())));
                }
                for (v, c) in r.iter().zip(&rel.columns) {
                    match v.col_type() {
                        None if !c.may_be_null() => {
                            return Err(Error::Database(format!("NULL in non-nullable column `{name}.{}`", c.name)))
                        }
                        Some(t) if t != c.ty => {
                            return Err(Error::Database(format!("value {v} in column `{name}.{}` of type {}", c.name, c.ty)))
                        }
                        _ => {}
                    }
                }
                if !keys.is_empty() {
                    let key: Vec<&Value> = keys.iter().map(|&i| &r[i]).collect();
                    if k > 1 || !seen_keys.insert(key) {
                        return Err(Error::Database(format!("duplicate key in `{name}`")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Database> {
        let file: DatabaseFile = serde_json::from_str(text)?;
        let mut schema = Schema::new();
        for (name, rel) in file.schema {
            schema.relations.insert(Name::from(name), rel);
        }
        let mut data = BTreeMap::new();
        for name in schema.relations.keys() {
            data.insert(name.clone(), Bag::new());
        }
        for (name, rows) in file.data {
            let rel = schema.get(&name).ok_or_else(|| Error::Database(format!("data for undeclared relation `{name}`")))?;
            let types = rel.type_word();
            let mut bag = Bag::new();
            for row in rows {
                if row.len() != types.len() {
                    return Err(Error::Database(format!("row of arity {} in `{name}` of arity {}", row.len(), types.len())));
                }
                let rec = row.iter().zip(&types).map(|(c, t)| cell_from_json(c, *t)).collect::<Result<Record>>()?;
                bag.insert(rec, 1)?;
            }
            data.insert(Name::from(name), bag);
        }
        Database::new(schema, data)
    }

    /// Deterministic JSON rendering (relations sorted by name, rows in canonical order).
    pub fn to_json_string(&self) -> String {
        let mut data = BTreeMap::new();
        for (name, bag) in &self.data {
            let mut rows = Vec::new();
            for (r, k) in bag.iter() {
                for _ in 0..k {
                    rows.push(r.iter().map(cell_to_json).collect::<Vec<_>>());
                }
            }
            data.insert(name.to_string(), rows);
        }
        let file = DatabaseFile {
            schema: self.schema.relations.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
            data,
        };
        serde_json::to_string_pretty(&file).expect("database serializes")
    }

    /// True when no relation holds a NULL.
    pub fn is_null_free(&self) -> bool {
        self.data.values().all(|b| !b.has_null())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DB: &str = r#"{
      "schema": {"R": {"columns": [{"name": "A", "type": "num"}, {"name": "B", "type": "ord", "nullable": false}]}},
      "data": {"R": [["1", "x"], [null, "y"], ["1/2", "x"], ["1", "x"]]}
    }"#;

    #[test]
    fn json_round_trip() {
        let db = Database::from_json_str(DB).unwrap();
        let bag = db.relation("R").unwrap();
        assert_eq!(bag.cardinality(), 4);
        assert_eq!(bag.multiplicity(&[Value::int(1), Value::ord("x")]), 2);
        let again = Database::from_json_str(&db.to_json_string()).unwrap();
        assert_eq!(db, again);
        assert_eq!(bag.canonical_text(), "(NULL, \"y\")\n(0.5, \"x\")\n(1, \"x\") x2\n");
        let types = db.schema.get("R").unwrap().type_word();
        assert_eq!(&Bag::from_json(&bag.to_json(), &types).unwrap(), bag);
    }

    #[test]
    fn rejects_bad_data() {
        let bad_null = DB.replace("[null, \"y\"]", "[\"2\", null]");
        assert!(Database::from_json_str(&bad_null).is_err());
        let bad_type = DB.replace("[null, \"y\"]", "[\"y\", \"y\"]");
        assert!(Database::from_json_str(&bad_type).is_err());
        let key = r#"{"schema": {"K": {"columns": [{"name": "k", "type": "num", "key": true}]}}, "data": {"K": [["1"], ["1"]]}}"#;
        assert!(Database::from_json_str(key).is_err());
    }

    #[test]
    fn bag_operations() {
        let a = Bag::from_records([vec![Value::Null], vec![Value::Null], vec![Value::int(1)]]);
        let b = Bag::from_records([vec![Value::Null], vec![Value::int(2)]]);
        assert_eq!(a.intersect_all(&b), Bag::from_records([vec![Value::Null]]));
        assert_eq!(a.except_all(&b), Bag::from_records([vec![Value::Null], vec![Value::int(1)]]));
        assert_eq!(a.union_all(&b).unwrap().cardinality(), 5);
        assert_eq!(a.distinct().cardinality(), 2);
    }
}
