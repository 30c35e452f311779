//! Bill of materials: every optic and mount of every placed element,
//! aggregated by component.

use std::collections::{BTreeMap, BTreeSet};

use crate::components::ComponentSpec;
use crate::layout::Scene;

#[derive(Debug, Clone, PartialEq)]
pub struct BomRow {
    /// Catalog id, suffixed with its parameters when the scene uses the
    /// same id with different parameters.
    pub component_id: String,
    pub description: String,
    pub quantity: usize,
    pub plates: Vec<String>,
}

fn params_key(spec: &ComponentSpec) -> String {
    spec.params
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(",")
}

pub fn bom_rows(scene: &Scene) -> Vec<BomRow> {
    // (id, params) -> (description, quantity, plates)
    let mut groups: BTreeMap<(String, String), (String, usize, BTreeSet<String>)> = BTreeMap::new();
    for plate in &scene.plates {
        for e in &plate.elements {
            for part in e.component.parts() {
                let g = groups
                    .entry((part.id.clone(), params_key(part)))
                    .or_insert_with(|| (part.description.clone(), 0, BTreeSet::new()));
                g.1 += 1;
                g.2.insert(plate.name.clone());
            }
        }
    }
    let mut variants: BTreeMap<&str, usize> = BTreeMap::new();
    for (id, _) in groups.keys() {
        *variants.entry(id).or_default() += 1;
    }
    let mut rows: Vec<BomRow> = groups
        .iter()
        .map(|((id, params), (description, quantity, plates))| BomRow {
            component_id: if variants[id.as_str()] > 1 {
                format!("{id}[{params}]")
            } else {
                id.clone()
            },
            description: description.clone(),
            quantity: *quantity,
            plates: plates.iter().cloned().collect(),
        })
        .collect();
    rows.sort_by(|a, b| a.component_id.cmp(&b.component_id));
    rows
}

/// CSV with header `component_id,description,quantity,plate`; the plate
/// column lists every plate using the part, separated by `;`.
pub fn bom_csv(scene: &Scene) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["component_id", "description", "quantity", "plate"])
        .expect("in-memory write");
    for r in bom_rows(scene) {
        w.write_record([
            r.component_id.as_str(),
            r.description.as_str(),
            &r.quantity.to_string(),
            &r.plates.join(";"),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}
