//! Validator for the JSON Schema keywords used by the bundled schemas:
//! `type`, `properties`, `required`, `additionalProperties`, `items`,
//! `prefixItems`, `minItems`, `maxItems`, `minimum`, `exclusiveMinimum`,
//! `const`, `enum`, `oneOf` and local `$ref`s.

use serde_json::Value;

use crate::problem::SchemaError;

/// Validates `instance` against `schema`, reporting the first failure.
pub fn validate(schema: &Value, instance: &Value) -> Result<(), SchemaError> {
    Validator { root: schema }.check(schema, instance, "")
}

struct Validator<'a> {
    root: &'a Value,
}

fn fail(pointer: &str, message: impl Into<String>) -> Result<(), SchemaError> {
    Err(SchemaError {
        pointer: pointer.to_string(),
        message: message.into(),
    })
}

fn escape(key: &str) -> String {
    key.replace('~', "~0").replace('/', "~1")
}

fn type_matches(name: &str, v: &Value) -> bool {
    match name {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        "number" => v.is_number(),
        "integer" => v.is_i64() || v.is_u64() || v.as_f64().is_some_and(|x| x.fract() == 0.0),
        _ => false,
    }
}

impl<'a> Validator<'a> {
    fn resolve(&self, r: &str) -> &'a Value {
        let ptr = r.strip_prefix('#').expect("bundled schemas use local references");
        self.root.pointer(ptr).expect("bundled schema reference resolves")
    }

    fn check(&self, schema: &Value, v: &Value, at: &str) -> Result<(), SchemaError> {
        let Some(s) = schema.as_object() else {
            return Ok(());
        };
        if let Some(r) = s.get("$ref").and_then(Value::as_str) {
            self.check(self.resolve(r), v, at)?;
        }
        if let Some(t) = s.get("type") {
            let ok = match t {
                Value::String(name) => type_matches(name, v),
                Value::Array(names) => names.iter().filter_map(Value::as_str).any(|n| type_matches(n, v)),
                _ => true,
            };
            if !ok {
                return fail(at, format!("expected {t}, found {}", kind(v)));
            }
        }
        if let Some(c) = s.get("const") {
            if c != v {
                return fail(at, format!("expected {c}"));
            }
        }
        if let Some(Value::Array(opts)) = s.get("enum") {
            if !opts.contains(v) {
                return fail(at, format!("expected one of {}", Value::Array(opts.clone())));
            }
        }
        if let Some(x) = v.as_f64() {
            if let Some(m) = s.get("minimum").and_then(Value::as_f64) {
                if x < m {
                    return fail(at, format!("must be at least {m}"));
                }
            }
            if let Some(m) = s.get("exclusiveMinimum").and_then(Value::as_f64) {
                if x <= m {
                    return fail(at, format!("must be greater than {m}"));
                }
            }
        }
        if let Value::Array(items) = v {
            if let Some(n) = s.get("minItems").and_then(Value::as_u64) {
                if (items.len() as u64) < n {
                    return fail(at, format!("needs at least {n} items"));
                }
            }
            if let Some(n) = s.get("maxItems").and_then(Value::as_u64) {
                if items.len() as u64 > n {
                    return fail(at, format!("allows at most {n} items"));
                }
            }
            let prefix = s.get("prefixItems").and_then(Value::as_array);
            let np = prefix.map_or(0, Vec::len);
            for (i, item) in items.iter().enumerate() {
                let sub = match prefix.and_then(|p| p.get(i)) {
                    Some(p) => Some(p),
                    None if i >= np => s.get("items"),
                    None => None,
                };
                if let Some(sub) = sub {
                    self.check(sub, item, &format!("{at}/{i}"))?;
                }
            }
        }
        if let Value::Object(map) = v {
            if let Some(Value::Array(req)) = s.get("required") {
                for key in req.iter().filter_map(Value::as_str) {
                    if !map.contains_key(key) {
                        return fail(at, format!("missing required property \"{key}\""));
                    }
                }
            }
            let props = s.get("properties").and_then(Value::as_object);
            for (key, val) in map {
                let child = format!("{at}/{}", escape(key));
                match props.and_then(|p| p.get(key)) {
                    Some(sub) => self.check(sub, val, &child)?,
                    None => {
                        if s.get("additionalProperties") == Some(&Value::Bool(false)) {
                            return fail(&child, format!("unknown property \"{key}\""));
                        }
                    }
                }
            }
        }
        if let Some(Value::Array(alts)) = s.get("oneOf") {
            let mut errors = Vec::new();
            let mut passed = 0;
            for alt in alts {
                match self.check(alt, v, at) {
                    Ok(()) => passed += 1,
                    Err(e) => errors.push(e),
                }
            }
            if passed != 1 {
                if passed == 0 {
                    // the deepest error is the most informative one
                    let best = errors
                        .into_iter()
                        .max_by_key(|e| e.pointer.matches('/').count())
                        .expect("oneOf is non-empty");
                    if best.pointer != at {
                        return Err(best);
                    }
                    return fail(at, format!("matches none of the alternatives ({})", best.message));
                }
                return fail(at, "matches more than one alternative");
            }
        }
        Ok(())
    }
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}
