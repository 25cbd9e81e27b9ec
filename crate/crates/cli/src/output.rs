use serde_json::Value;
use xgate_core::canonical;
use xgate_core::policy::{AccessibleNetwork, PermittedMethod, PermittedNetwork};

/// Column-aligned rows under a header.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        padded.join("  ").trim_end().to_owned()
    };
    let mut out = vec![line(header.to_vec())];
    out.extend(rows.iter().map(|r| line(r.iter().map(String::as_str).collect())));
    out.join("\n")
}

pub fn accessible_table(rows: &[AccessibleNetwork]) -> String {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.id.clone(), r.name.clone(), r.relay_address.clone()])
        .collect();
    table(&["ID", "NAME", "RELAY ADDRESS"], &rows)
}

pub fn permitted_table(rows: &[PermittedNetwork]) -> String {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.id.clone(), r.name.clone(), r.address.clone()])
        .collect();
    table(&["ID", "NAME", "ADDRESS"], &rows)
}

pub fn methods_table(rows: &[PermittedMethod]) -> String {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.id.clone(),
                r.network_id.clone(),
                r.contract_name.clone(),
                r.method_name.clone(),
                r.description.clone(),
            ]
        })
        .collect();
    table(&["ID", "NETWORK", "CONTRACT", "METHOD", "DESCRIPTION"], &rows)
}

/// What a command prints: a human rendering and its JSON form.
pub struct Output {
    pub human: String,
    pub json: Value,
}

impl Output {
    pub fn new(human: impl Into<String>, json: Value) -> Self {
        Self {
            human: human.into(),
            json,
        }
    }

    pub fn render(&self, json: bool) -> String {
        if json {
            canonical::value_to_json(&self.json)
        } else {
            self.human.clone()
        }
    }
}
