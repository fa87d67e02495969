//! `key=value` overrides for every environment, trainer and OSM setting.
//!
//! Keys are `env.<field>`, `trainer.<field>` or `osm.<field>`; a bare field
//! name is accepted when exactly one section has it. Values are read as JSON
//! when possible (`0.5`, `true`, `[128,128]`, `null`) and as strings otherwise.
//! `rollout_budget` also accepts a bare integer for a fixed budget.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::env::EnvConfig;
use crate::osm::OsmConfig;
use crate::ppo::TrainerConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub env: EnvConfig,
    pub trainer: TrainerConfig,
    pub osm: OsmConfig,
}

const SECTIONS: [&str; 3] = ["env", "trainer", "osm"];

fn fields<T: Serialize>(value: &T) -> Vec<String> {
    match serde_json::to_value(value) {
        Ok(Value::Object(map)) => map.keys().cloned().collect(),
        _ => Vec::new(),
    }
}

fn parse_value(field: &str, raw: &str) -> Value {
    let raw = raw.trim();
    if field == "rollout_budget" {
        if let Ok(t) = raw.parse::<u64>() {
            return serde_json::json!({ "fixed": t });
        }
    }
    let optional = matches!(field, "n_steps" | "occupancy_threshold" | "invalid_action_limit");
    if optional && ["auto", "none", "off"].iter().any(|w| raw.eq_ignore_ascii_case(w)) {
        return Value::Null;
    }
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

fn set_field<T: Serialize + DeserializeOwned>(target: &mut T, field: &str, raw: &str) -> Result<(), String> {
    let mut tree = serde_json::to_value(&*target).map_err(|e| e.to_string())?;
    let obj = tree.as_object_mut().ok_or("settings are not a key-value tree")?;
    if !obj.contains_key(field) {
        return Err(format!("unknown setting `{field}`"));
    }
    obj.insert(field.to_string(), parse_value(field, raw));
    *target = serde_json::from_value(tree).map_err(|e| format!("invalid value `{raw}` for `{field}`: {e}"))?;
    Ok(())
}

impl Settings {
    /// Applies one `key=value` override.
    pub fn apply(&mut self, assignment: &str) -> Result<(), String> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got `{assignment}`"))?;
        let key = key.trim();
        let (section, field) = match key.split_once('.') {
            Some((s, f)) => (s.to_string(), f.to_string()),
            None => {
                let owners: Vec<&str> = SECTIONS
                    .iter()
                    .copied()
                    .filter(|s| self.section_fields(s).iter().any(|f| f == key))
                    .collect();
                match owners.as_slice() {
                    [one] => (one.to_string(), key.to_string()),
                    [] => return Err(format!("unknown setting `{key}`")),
                    many => return Err(format!("ambiguous setting `{key}`; prefix one of {many:?}")),
                }
            }
        };
        let result = match section.as_str() {
            "env" => set_field(&mut self.env, &field, raw),
            "trainer" => set_field(&mut self.trainer, &field, raw),
            "osm" => set_field(&mut self.osm, &field, raw),
            other => Err(format!("unknown settings section `{other}` (expected env, trainer or osm)")),
        };
        result.map_err(|e| format!("{key}: {e}"))
    }

    fn section_fields(&self, section: &str) -> Vec<String> {
        match section {
            "env" => fields(&self.env),
            "trainer" => fields(&self.trainer),
            _ => fields(&self.osm),
        }
    }

    /// Applies a settings file: one `key = value` per line, `#` starts a comment.
    pub fn apply_file(&mut self, text: &str) -> Result<(), String> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            self.apply(line).map_err(|e| format!("line {}: {e}", i + 1))?;
        }
        Ok(())
    }
}
