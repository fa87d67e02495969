use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Instance, Time};

/// Where a [`Bounds`] value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundSource {
    Computed,
    File,
    Literature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Time,
    pub known_optimum: Option<Time>,
    pub source: BoundSource,
}

impl Bounds {
    pub fn computed(instance: &Instance) -> Self {
        Self {
            lower: lower_bound(instance),
            known_optimum: None,
            source: BoundSource::Computed,
        }
    }

    /// Relative optimality gap `(makespan - lower) / lower`.
    pub fn gap(&self, makespan: Time) -> f64 {
        (makespan as f64 - self.lower as f64) / self.lower as f64
    }
}

/// Classical two-part bound: the larger of the heaviest machine load and the
/// longest job.
pub fn lower_bound(instance: &Instance) -> Time {
    let machine = instance.machine_loads().into_iter().max().unwrap_or(0);
    let job = (0..instance.n_jobs())
        .map(|j| instance.job_load(j))
        .max()
        .unwrap_or(0);
    machine.max(job)
}

/// Published lower bounds keyed by canonical instance name.
#[derive(Debug, Clone, Default)]
pub struct LiteratureBounds {
    table: BTreeMap<String, Bounds>,
}

const BUNDLED: &str = include_str!("../../data/lower_bounds.csv");

impl LiteratureBounds {
    /// The table shipped with the crate.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED, BoundSource::Literature).expect("bundled bounds table is well formed")
    }

    /// Parses `name,lower_bound[,known_optimum]` rows; `#` starts a comment line.
    pub fn parse(text: &str, source: BoundSource) -> Result<Self, String> {
        let mut table = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = |what: &str| format!("bounds line {}: {what}", idx + 1);
            if fields.len() < 2 {
                return Err(bad("expected name,lower_bound[,known_optimum]"));
            }
            let lower: Time = fields[1].parse().map_err(|_| bad("invalid lower bound"))?;
            let known_optimum = match fields.get(2) {
                Some(s) if !s.is_empty() => Some(s.parse::<Time>().map_err(|_| bad("invalid optimum"))?),
                _ => None,
            };
            if known_optimum.is_some_and(|opt| opt < lower) {
                return Err(bad("lower bound exceeds known optimum"));
            }
            table.insert(
                canonical_name(fields[0]),
                Bounds {
                    lower,
                    known_optimum,
                    source,
                },
            );
        }
        Ok(Self { table })
    }

    pub fn get(&self, name: &str) -> Option<Bounds> {
        self.table.get(&canonical_name(name)).copied()
    }

    /// Literature bound when known, otherwise the computed one.
    pub fn resolve(&self, instance: &Instance) -> Bounds {
        self.get(instance.name())
            .unwrap_or_else(|| Bounds::computed(instance))
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

/// Lower-cased file stem: `data/TA01.txt` -> `ta01`.
pub fn canonical_name(name: &str) -> String {
    let stem = std::path::Path::new(name)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or(name);
    stem.to_ascii_lowercase()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::fixtures::worked;
    use crate::instance::parse_standard;

    #[test]
    fn worked_bound() {
        assert_eq!(lower_bound(&worked()), 51);
    }

    #[test]
    fn single_op_bound() {
        assert_eq!(lower_bound(&parse_standard("1 1\n0 5\n").unwrap()), 5);
    }

    #[test]
    fn bundled_table() {
        let table = LiteratureBounds::bundled();
        assert_eq!(table.get("ta41").unwrap().lower, 2005);
        assert_eq!(table.get("data/TA01.txt").unwrap().known_optimum, Some(1231));
        assert_eq!(table.get("ft06").unwrap().lower, 55);
        assert!(table.get("nope").is_none());
    }

    #[test]
    fn gap_arithmetic() {
        let b = Bounds {
            lower: 2005,
            known_optimum: None,
            source: BoundSource::Literature,
        };
        assert!((b.gap(2583) - 0.288279).abs() < 1e-6);
    }

    #[test]
    fn rejects_inconsistent_rows() {
        assert!(LiteratureBounds::parse("x,10,9\n", BoundSource::File).is_err());
        assert!(LiteratureBounds::parse("x\n", BoundSource::File).is_err());
    }
}
