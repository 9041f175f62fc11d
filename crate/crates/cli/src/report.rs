//! Run reports: the measure with its derived tables, as JSON.

use std::fmt;

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use xfvar::algebra::{shapley_from_measure, ExplanationMeasure, Provenance};
use xfvar::subset::{self, Mask};

use crate::error::CliError;

/// Name-keyed values that keep their insertion order in JSON.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table(pub Vec<(String, f64)>);

impl Table {
    pub fn get(&self, key: &str) -> Option<f64> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }
}

impl Serialize for Table {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for Table {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Table;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map from names to numbers")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Table, A::Error> {
                let mut entries = Vec::new();
                while let Some((k, v)) = access.next_entry::<String, f64>()? {
                    entries.push((k, v));
                }
                Ok(Table(entries))
            }
        }
        d.deserialize_map(V)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub variables: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<String>,
    /// Atom masses keyed by the variables that are on.
    pub atoms: Table,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atom_stderr: Option<Table>,
    /// `ξ(∨_{k∈S} W_k)` for nonempty `S`.
    pub totals: Table,
    /// `ξ(∧_{k∈S} W_k)` for nonempty `S`.
    pub interactions: Table,
    pub shapley: Table,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Table>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Table>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub superset: Option<Table>,
    pub samples: Option<u64>,
    pub seed: Option<u64>,
    pub provenance: String,
    pub method: String,
    pub clipped: bool,
    pub warnings: Vec<String>,
}

fn keyed(names: &[String], values: &[f64], skip_empty: bool) -> Table {
    Table(
        values
            .iter()
            .enumerate()
            .filter(|(s, _)| !(skip_empty && *s == 0))
            .map(|(s, &v)| (subset::label(s as Mask, names), v))
            .collect(),
    )
}

impl RunReport {
    pub fn from_measure(m: &ExplanationMeasure<f64>, method: &str, warnings: Vec<String>) -> Self {
        let names = m.names().to_vec();
        let shapley = shapley_from_measure(m, true);
        let (samples, seed, provenance) = match m.provenance() {
            Provenance::Exact => (None, None, "exact"),
            Provenance::MonteCarlo { samples, seed } => (Some(samples), Some(seed), "monte_carlo"),
        };
        Self {
            atoms: keyed(&names, m.atoms(), false),
            atom_stderr: m.atom_stderr().map(|se| keyed(&names, se, false)),
            totals: keyed(&names, &m.totals(), true),
            interactions: keyed(&names, &m.interactions(), true),
            shapley: Table(
                names
                    .iter()
                    .cloned()
                    .zip(shapley.values.iter().copied())
                    .collect(),
            ),
            outcome: m.outcome().map(|i| names[i].clone()),
            variables: names,
            lower: None,
            upper: None,
            superset: None,
            samples,
            seed,
            provenance: provenance.to_string(),
            method: method.to_string(),
            clipped: m.is_clipped(),
            warnings,
        }
    }

    /// Rebuilds the measure from the atom table.
    pub fn measure(&self) -> Result<ExplanationMeasure<f64>, CliError> {
        let k = self.variables.len();
        if k == 0 || k > subset::MAX_VARS {
            return Err(CliError::input(format!("report lists {k} variables")));
        }
        let by_mask = |t: &Table, what: &str| -> Result<Vec<f64>, CliError> {
            let mut out = vec![f64::NAN; 1 << k];
            for (key, v) in &t.0 {
                let s = subset::parse_label(key, &self.variables).ok_or_else(|| {
                    CliError::input(format!("{what} key `{key}` does not name a subset"))
                })?;
                out[s as usize] = *v;
            }
            if out.iter().any(|v| v.is_nan()) {
                return Err(CliError::input(format!("{what} table is incomplete")));
            }
            Ok(out)
        };
        let provenance = match (self.provenance.as_str(), self.samples, self.seed) {
            ("exact", _, _) => Provenance::Exact,
            ("monte_carlo", Some(samples), Some(seed)) => Provenance::MonteCarlo { samples, seed },
            (p, _, _) => return Err(CliError::input(format!("unrecognized provenance `{p}`"))),
        };
        let mut m = ExplanationMeasure::new(
            self.variables.clone(),
            by_mask(&self.atoms, "atom")?,
            provenance,
        )
        .map_err(|e| CliError::input(e.to_string()))?;
        if let Some(se) = &self.atom_stderr {
            m = m
                .with_atom_stderr(by_mask(se, "atom_stderr")?)
                .map_err(|e| CliError::input(e.to_string()))?;
        }
        if let Some(o) = &self.outcome {
            let i = self.variables.iter().position(|v| v == o).ok_or_else(|| {
                CliError::input(format!("outcome `{o}` is not a listed variable"))
            })?;
            m = m
                .with_outcome(Some(i))
                .map_err(|e| CliError::input(e.to_string()))?;
        }
        Ok(m.with_clipped_flag(self.clipped))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::input(format!("malformed report: {e}")))
    }

    /// Aligned text table rounded to three decimals.
    pub fn to_table(&self) -> String {
        let has_se = self.atom_stderr.is_some();
        let width = self
            .atoms
            .0
            .iter()
            .map(|(k, _)| k.chars().count())
            .max()
            .unwrap_or(6)
            .max(6);
        let mut out = format!("{:<width$}  {:>8}", "subset", "atom");
        if has_se {
            out.push_str(&format!("  {:>8}", "stderr"));
        }
        out.push_str(&format!("  {:>8}  {:>8}\n", "total", "inter"));
        for (i, (key, atom)) in self.atoms.0.iter().enumerate() {
            out.push_str(&format!("{key:<width$}  {atom:>8.3}"));
            if let Some(se) = &self.atom_stderr {
                out.push_str(&format!("  {:>8.3}", se.0[i].1));
            }
            match (self.totals.get(key), self.interactions.get(key)) {
                (Some(t), Some(x)) => out.push_str(&format!("  {t:>8.3}  {x:>8.3}\n")),
                _ => out.push_str(&format!("  {:>8}  {:>8}\n", "-", "-")),
            }
        }
        out.push_str("\nshapley\n");
        for (name, v) in &self.shapley.0 {
            out.push_str(&format!("{name:<width$}  {v:>8.3}\n"));
        }
        for w in &self.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
        out
    }
}
