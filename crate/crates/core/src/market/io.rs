//! JSON instance format. Every number is a string `"p/q"` (or `"p"`);
//! budgets may be `"inf"`.

use serde_json::{json, Map, Value};

use super::{Buyer, Capacity, MarketInstance, Seller};
use crate::error::{Error, Result};
use crate::rational::{parse_rat, ExtRat, Rat};

fn object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| Error::parse(path, "expected an object"))
}

fn array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array()
        .ok_or_else(|| Error::parse(path, "expected an array"))
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value> {
    obj.get(key)
        .ok_or_else(|| Error::parse(format!("{path}.{key}"), "missing field"))
}

fn id(v: &Value, path: &str) -> Result<String> {
    match v {
        Value::String(s) if !s.is_empty() => Ok(s.clone()),
        Value::Number(n) if n.is_u64() || n.is_i64() => Ok(n.to_string()),
        _ => Err(Error::parse(
            path,
            "expected a non-empty string or integer id",
        )),
    }
}

fn rational(v: &Value, path: &str) -> Result<Rat> {
    let s = v
        .as_str()
        .ok_or_else(|| Error::parse(path, "expected a rational string such as \"3/2\""))?;
    parse_rat(s).map_err(|m| Error::parse(path, m))
}

fn ext_rational(v: &Value, path: &str) -> Result<ExtRat> {
    let s = v
        .as_str()
        .ok_or_else(|| Error::parse(path, "expected a rational string or \"inf\""))?;
    ExtRat::parse(s).map_err(|m| Error::parse(path, m))
}

fn rat_field(obj: &Map<String, Value>, key: &str, path: &str) -> Result<Rat> {
    rational(field(obj, key, path)?, &format!("{path}.{key}"))
}

fn capacity(v: &Value, path: &str) -> Result<Capacity> {
    let obj = object(v, path)?;
    let kind = field(obj, "kind", path)?
        .as_str()
        .ok_or_else(|| Error::parse(format!("{path}.kind"), "expected a string"))?;
    match kind {
        "rank" => Ok(Capacity::Rank {
            unit: rat_field(obj, "unit", path)?,
            cap: rat_field(obj, "cap", path)?,
        }),
        "additive" => {
            let caps_path = format!("{path}.caps");
            let caps = object(field(obj, "caps", path)?, &caps_path)?
                .iter()
                .map(|(k, v)| Ok((k.clone(), rational(v, &format!("{caps_path}.{k}"))?)))
                .collect::<Result<_>>()?;
            Ok(Capacity::Additive { caps })
        }
        "table" => {
            let values_path = format!("{path}.values");
            let values = array(field(obj, "values", path)?, &values_path)?
                .iter()
                .enumerate()
                .map(|(k, v)| rational(v, &format!("{values_path}[{k}]")))
                .collect::<Result<_>>()?;
            Ok(Capacity::Table { values })
        }
        other => Err(Error::parse(
            format!("{path}.kind"),
            format!("unknown capacity kind {other:?} (expected rank, additive or table)"),
        )),
    }
}

/// Reads an instance document. Semantic checks are left to
/// [`validate`](super::validate).
pub fn parse_instance(text: &str) -> Result<MarketInstance> {
    let doc: Value = serde_json::from_str(text).map_err(|e| {
        Error::parse(
            format!("line {} column {}", e.line(), e.column()),
            e.to_string(),
        )
    })?;
    let root = object(&doc, "$")?;

    let epsilon = match root.get("epsilon") {
        None | Some(Value::Null) => None,
        Some(v) => Some(rational(v, "$.epsilon")?),
    };

    let mut buyers = Vec::new();
    for (k, v) in array(field(root, "buyers", "$")?, "$.buyers")?
        .iter()
        .enumerate()
    {
        let path = format!("$.buyers[{k}]");
        let obj = object(v, &path)?;
        buyers.push(Buyer {
            id: id(field(obj, "id", &path)?, &format!("{path}.id"))?,
            valuation: rat_field(obj, "valuation", &path)?,
            bid: rat_field(obj, "bid", &path)?,
            budget: ext_rational(field(obj, "budget", &path)?, &format!("{path}.budget"))?,
        });
    }

    let mut sellers = Vec::new();
    for (k, v) in array(field(root, "sellers", "$")?, "$.sellers")?
        .iter()
        .enumerate()
    {
        let path = format!("$.sellers[{k}]");
        let obj = object(v, &path)?;
        let sample = match obj.get("sample") {
            None | Some(Value::Null) => None,
            Some(v) => Some(rational(v, &format!("{path}.sample"))?),
        };
        sellers.push(Seller {
            id: id(field(obj, "id", &path)?, &format!("{path}.id"))?,
            valuation: rat_field(obj, "valuation", &path)?,
            bid: rat_field(obj, "bid", &path)?,
            sample,
            capacity: capacity(field(obj, "capacity", &path)?, &format!("{path}.capacity"))?,
        });
    }

    let mut edges = Vec::new();
    for (k, v) in array(field(root, "edges", "$")?, "$.edges")?
        .iter()
        .enumerate()
    {
        let path = format!("$.edges[{k}]");
        match array(v, &path)?.as_slice() {
            [b, s] => edges.push((id(b, &format!("{path}[0]"))?, id(s, &format!("{path}[1]"))?)),
            _ => return Err(Error::parse(path, "expected a [buyer, seller] pair")),
        }
    }

    Ok(MarketInstance {
        epsilon,
        buyers,
        sellers,
        edges,
    })
}

pub(crate) fn capacity_json(c: &Capacity) -> Value {
    match c {
        Capacity::Rank { unit, cap } => json!({
            "kind": "rank",
            "unit": unit.to_string(),
            "cap": cap.to_string(),
        }),
        Capacity::Additive { caps } => {
            let map: Map<String, Value> = caps
                .iter()
                .map(|(b, v)| (b.clone(), Value::String(v.to_string())))
                .collect();
            json!({ "kind": "additive", "caps": map })
        }
        Capacity::Table { values } => json!({
            "kind": "table",
            "values": values.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
        }),
    }
}

pub(crate) fn instance_json(instance: &MarketInstance) -> Value {
    let mut root = Map::new();
    if let Some(eps) = &instance.epsilon {
        root.insert("epsilon".into(), Value::String(eps.to_string()));
    }
    root.insert(
        "buyers".into(),
        instance
            .buyers
            .iter()
            .map(|b| {
                json!({
                    "id": b.id,
                    "valuation": b.valuation.to_string(),
                    "bid": b.bid.to_string(),
                    "budget": b.budget.to_string(),
                })
            })
            .collect(),
    );
    root.insert(
        "sellers".into(),
        instance
            .sellers
            .iter()
            .map(|s| {
                let mut obj = Map::new();
                obj.insert("id".into(), Value::String(s.id.clone()));
                obj.insert("valuation".into(), Value::String(s.valuation.to_string()));
                obj.insert("bid".into(), Value::String(s.bid.to_string()));
                if let Some(sample) = &s.sample {
                    obj.insert("sample".into(), Value::String(sample.to_string()));
                }
                obj.insert("capacity".into(), capacity_json(&s.capacity));
                Value::Object(obj)
            })
            .collect(),
    );
    root.insert(
        "edges".into(),
        instance.edges.iter().map(|(b, s)| json!([b, s])).collect(),
    );
    Value::Object(root)
}

/// Canonical text: pretty-printed JSON in a fixed key order with a trailing
/// newline.
pub fn serialize_instance(instance: &MarketInstance) -> String {
    let mut text = serde_json::to_string_pretty(&instance_json(instance))
        .expect("instance documents are always serializable");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::tight_lw_instance;

    #[test]
    fn round_trip_is_identity() {
        let inst = tight_lw_instance();
        let text = serialize_instance(&inst);
        let back = parse_instance(&text).unwrap();
        assert_eq!(back, inst);
        assert_eq!(serialize_instance(&back), text);
    }

    #[test]
    fn minimal_document() {
        let text = r#"{"epsilon":"1","buyers":[{"id":"a","valuation":"2","bid":"2","budget":"5"}],
            "sellers":[{"id":"s","valuation":"1","bid":"1","capacity":{"kind":"rank","unit":"1","cap":"1"}}],
            "edges":[["a","s"]]}"#;
        let inst = parse_instance(text).unwrap();
        assert_eq!(inst.edges.len(), 1);
        assert_eq!(
            inst.buyers[0].budget,
            ExtRat::Finite(Rat::from_integer(5.into()))
        );
    }

    #[test]
    fn errors_carry_field_paths() {
        let text = r#"{"buyers":[{"id":"a","valuation":"x","bid":"2","budget":"5"}],"sellers":[],"edges":[]}"#;
        match parse_instance(text).unwrap_err() {
            Error::Parse { path, .. } => assert_eq!(path, "$.buyers[0].valuation"),
            other => panic!("unexpected error {other:?}"),
        }
        match parse_instance("{\n  \"buyers\": [,]\n}").unwrap_err() {
            Error::Parse { path, .. } => assert!(path.starts_with("line 2")),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn infinite_budget_parses() {
        let text = r#"{"buyers":[{"id":"a","valuation":"1","bid":"1","budget":"inf"}],"sellers":[],"edges":[]}"#;
        assert_eq!(
            parse_instance(text).unwrap().buyers[0].budget,
            ExtRat::PosInf
        );
    }
}
