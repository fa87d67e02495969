//! Comparison tables: one row per instance, one makespan and gap column per method.

use serde::{Deserialize, Serialize};

use crate::instance::{BoundSource, Time};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub instance: String,
    /// `(n_jobs, n_machines)`; `None` when the instance could not be loaded.
    pub size: Option<(usize, usize)>,
    /// One entry per method column; `None` marks an absent cell.
    pub makespans: Vec<Option<Time>>,
    pub lower_bound: Option<Time>,
    pub bound_source: Option<BoundSource>,
}

impl ComparisonRow {
    pub fn absent(instance: impl Into<String>, methods: usize) -> Self {
        Self {
            instance: instance.into(),
            size: None,
            makespans: vec![None; methods],
            lower_bound: None,
            bound_source: None,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.size.is_some() && self.makespans.iter().all(Option::is_some)
    }

    /// `(makespan - LB) / LB` per method, as a fraction.
    pub fn gaps(&self) -> Vec<Option<f64>> {
        self.makespans
            .iter()
            .map(|ms| match (ms, self.lower_bound) {
                (Some(ms), Some(lb)) if lb > 0 => Some(gap(*ms, lb)),
                _ => None,
            })
            .collect()
    }

    fn size_label(&self) -> String {
        self.size.map_or_else(|| "absent".to_string(), |(n, m)| format!("{n}x{m}"))
    }
}

pub fn gap(makespan: Time, lower_bound: Time) -> f64 {
    (makespan as f64 - lower_bound as f64) / lower_bound as f64
}

/// Gap as a percentage with one decimal, e.g. `28.8%`.
pub fn format_gap(gap: f64) -> String {
    format!("{:.1}%", gap * 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub methods: Vec<String>,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    fn cells(&self) -> (Vec<String>, Vec<Vec<String>>) {
        let mut header = vec!["instance".to_string(), "size".to_string()];
        header.extend(self.methods.iter().cloned());
        header.push("lb".to_string());
        header.extend(self.methods.iter().map(|m| format!("{m} gap")));
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut cells = vec![r.instance.clone(), r.size_label()];
                cells.extend(
                    r.makespans
                        .iter()
                        .map(|ms| ms.map_or_else(|| "absent".to_string(), |v| v.to_string())),
                );
                cells.push(r.lower_bound.map_or_else(|| "-".to_string(), |v| v.to_string()));
                cells.extend(r.gaps().into_iter().map(|g| g.map_or_else(|| "-".to_string(), format_gap)));
                cells
            })
            .collect();
        (header, rows)
    }

    /// Column-aligned text; the instance column is left-aligned, the rest right-aligned.
    pub fn to_text(&self) -> String {
        let (header, rows) = self.cells();
        let mut widths: Vec<usize> = header.iter().map(String::len).collect();
        for row in &rows {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let line = |cells: &[String]| {
            let parts: Vec<String> = cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, &w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            parts.join("  ").trim_end().to_string() + "\n"
        };
        let mut out = line(&header);
        let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
        out.push_str(&line(&rule));
        for row in &rows {
            out.push_str(&line(row));
        }
        out
    }

    /// Comma-separated form; absent cells are empty and flagged in `status`.
    pub fn to_csv(&self) -> String {
        let mut header = vec!["instance".to_string(), "n_jobs".to_string(), "n_machines".to_string()];
        header.extend(self.methods.iter().cloned());
        header.push("lower_bound".to_string());
        header.push("bound_source".to_string());
        header.extend(self.methods.iter().map(|m| format!("{m}_gap_pct")));
        header.push("status".to_string());
        let mut out = header.join(",") + "\n";
        for r in &self.rows {
            let mut cells = vec![r.instance.clone()];
            match r.size {
                Some((n, m)) => cells.extend([n.to_string(), m.to_string()]),
                None => cells.extend([String::new(), String::new()]),
            }
            cells.extend(r.makespans.iter().map(|ms| ms.map(|v| v.to_string()).unwrap_or_default()));
            cells.push(r.lower_bound.map(|v| v.to_string()).unwrap_or_default());
            cells.push(
                r.bound_source
                    .map(|s| serde_json::to_value(s).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default())
                    .unwrap_or_default(),
            );
            cells.extend(r.gaps().into_iter().map(|g| g.map(|g| format!("{:.4}", g * 100.0)).unwrap_or_default()));
            cells.push(if r.is_complete() { "ok" } else { "absent" }.to_string());
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(name: &str, ms: Vec<Option<Time>>, lb: Time) -> ComparisonRow {
        ComparisonRow {
            instance: name.into(),
            size: Some((30, 20)),
            makespans: ms,
            lower_bound: Some(lb),
            bound_source: Some(BoundSource::Literature),
        }
    }

    #[test]
    fn ta41_gap_rounds_to_one_decimal() {
        let r = row("ta41", vec![Some(2583)], 2005);
        assert_eq!(format_gap(r.gaps()[0].unwrap()), "28.8%");
    }

    #[test]
    fn text_and_csv_layout() {
        let t = ComparisonTable {
            methods: vec!["spt".into(), "mwkr".into()],
            rows: vec![
                row("la05", vec![Some(610), Some(597)], 593),
                ComparisonRow::absent("missing", 2),
            ],
        };
        let text = t.to_text();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("instance"));
        assert!(lines[0].contains("spt gap"));
        assert!(lines[2].contains("2.9%"), "{text}");
        assert!(lines[3].contains("absent"));
        let csv = t.to_csv();
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows[0], "instance,n_jobs,n_machines,spt,mwkr,lower_bound,bound_source,spt_gap_pct,mwkr_gap_pct,status");
        assert_eq!(rows[1], "la05,30,20,610,597,593,literature,2.8668,0.6745,ok");
        assert_eq!(rows[2], "missing,,,,,,,,,absent");
    }
}
