//! Tabular time series extracted from record tapes: per-entity records,
//! per-tick averages and predicate counts, with CSV/JSON export and SVG
//! line plots.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::AgentId;
use crate::error::{Error, Result};
use crate::record::{EntityClass, EntityKey, EntityTape, EntityView, RecordStore, Recorded};
use crate::value::{PropValue, Vect};

/// Per-entity snapshot → value.
pub type Probe<'a> = &'a dyn Fn(&EntityView<'_>) -> Result<PropValue>;
/// Per-entity snapshot → bool.
pub type Predicate<'a> = &'a dyn Fn(&EntityView<'_>) -> Result<bool>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Int(i64),
    Real(f64),
    Bool(bool),
    Text(String),
}

impl Scalar {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Scalar::Int(v) => Some(*v as f64),
            Scalar::Real(v) => Some(*v),
            Scalar::Bool(b) => Some(f64::from(u8::from(*b))),
            Scalar::Text(_) => None,
        }
    }

    fn to_csv_field(&self) -> String {
        match self {
            Scalar::Int(v) => v.to_string(),
            // `{:?}` is the shortest representation that parses back to the same bits
            Scalar::Real(v) => format!("{v:?}"),
            Scalar::Bool(b) => b.to_string(),
            Scalar::Text(s) => s.clone(),
        }
    }

    fn from_csv_field(s: &str) -> Option<Scalar> {
        if s.is_empty() {
            return None;
        }
        if let Ok(i) = s.parse::<i64>() {
            return Some(Scalar::Int(i));
        }
        if let Ok(f) = s.parse::<f64>() {
            return Some(Scalar::Real(f));
        }
        match s {
            "true" => Some(Scalar::Bool(true)),
            "false" => Some(Scalar::Bool(false)),
            _ => Some(Scalar::Text(s.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub values: Vec<Option<Scalar>>,
}

/// Named, equal-length columns; the first is always `tick`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableFrame {
    columns: Vec<Column>,
}

impl TableFrame {
    fn with_ticks(ticks: impl IntoIterator<Item = u64>) -> Self {
        TableFrame {
            columns: vec![Column {
                name: "tick".into(),
                values: ticks.into_iter().map(|t| Some(Scalar::Int(t as i64))).collect(),
            }],
        }
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Numeric view of a column; missing cells become NaN.
    pub fn f64_column(&self, name: &str) -> Option<Vec<f64>> {
        self.column(name).map(|c| {
            c.values
                .iter()
                .map(|v| v.as_ref().and_then(Scalar::as_f64).unwrap_or(f64::NAN))
                .collect()
        })
    }

    pub fn num_rows(&self) -> usize {
        self.columns.first().map(|c| c.values.len()).unwrap_or(0)
    }

    fn push_column(&mut self, name: String, values: Vec<Option<Scalar>>) {
        debug_assert_eq!(values.len(), self.num_rows());
        self.columns.push(Column { name, values });
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))
            .expect("in-memory write");
        for row in 0..self.num_rows() {
            w.write_record(self.columns.iter().map(|c| {
                c.values[row].as_ref().map(Scalar::to_csv_field).unwrap_or_default()
            }))
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8 fields")
    }

    pub fn from_csv(text: &str) -> Result<TableFrame> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let headers = r.headers().map_err(csv_err)?.clone();
        let mut columns: Vec<Column> = headers
            .iter()
            .map(|h| Column {
                name: h.to_string(),
                values: Vec::new(),
            })
            .collect();
        for rec in r.records() {
            let rec = rec.map_err(csv_err)?;
            for (col, field) in columns.iter_mut().zip(rec.iter()) {
                col.values.push(Scalar::from_csv_field(field));
            }
        }
        Ok(TableFrame { columns })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("frame serializes")
    }

    pub fn from_json(text: &str) -> Result<TableFrame> {
        Ok(serde_json::from_str(text)?)
    }
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse {
        line,
        msg: e.to_string(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

pub fn export_table(frame: &TableFrame, format: Format, path: &Path) -> Result<()> {
    let text = match format {
        Format::Csv => frame.to_csv(),
        Format::Json => frame.to_json(),
    };
    std::fs::write(path, text)?;
    Ok(())
}

fn scalar_of(v: &PropValue) -> Scalar {
    match v {
        PropValue::Int(i) => Scalar::Int(*i),
        PropValue::Real(r) => Scalar::Real(*r),
        PropValue::Bool(b) => Scalar::Bool(*b),
        PropValue::Label(s) => Scalar::Text(s.clone()),
        PropValue::Color(c) => Scalar::Text(c.to_string()),
        PropValue::Vect(_) => unreachable!("vectors are expanded"),
    }
}

const AXES: [&str; 3] = ["x", "y", "z"];

/// Appends columns for one series; vectors expand into `name_x`, `name_y`, ...
fn push_series(frame: &mut TableFrame, name: &str, values: Vec<Option<PropValue>>) {
    let dim = values.iter().flatten().find_map(|v| v.as_vect().map(|v| v.dim()));
    match dim {
        Some(d) => {
            for (c, axis) in AXES.iter().enumerate().take(d) {
                let col = values
                    .iter()
                    .map(|v| v.as_ref().and_then(PropValue::as_vect).map(|v| Scalar::Real(v[c])))
                    .collect();
                frame.push_column(format!("{name}_{axis}"), col);
            }
        }
        None => {
            let col = values.iter().map(|v| v.as_ref().map(scalar_of)).collect();
            frame.push_column(name.to_string(), col);
        }
    }
}

/// The recorded history of one entity, one row per tick it existed.
pub fn entity_data(rec: &impl Recorded, class: EntityClass, key: EntityKey) -> Result<TableFrame> {
    let records = rec.records();
    let tape = records
        .tape(class, key)
        .ok_or_else(|| Error::InvalidArgument(format!("no recorded {class} entity {key}")))?;
    if tape.series.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{class} entity {key} records no properties"
        )));
    }
    let ticks: Vec<u64> = (tape.start..=tape.end()).filter(|&t| tape.covers(t)).collect();
    let mut frame = TableFrame::with_ticks(ticks.iter().copied());
    for name in tape.keys_in_order() {
        let values = ticks.iter().map(|&t| tape.value(name, t).cloned()).collect();
        push_series(&mut frame, name, values);
    }
    Ok(frame)
}

pub fn get_agent_data(rec: &impl Recorded, id: AgentId) -> Result<TableFrame> {
    entity_data(rec, EntityClass::Agents, EntityKey::Id(id.0))
}

pub fn get_node_data(rec: &impl Recorded, node: u64) -> Result<TableFrame> {
    entity_data(rec, EntityClass::Nodes, EntityKey::Id(node))
}

/// `patch` is the 1-based linear patch index (x fastest).
pub fn get_patch_data(rec: &impl Recorded, patch: u64) -> Result<TableFrame> {
    entity_data(rec, EntityClass::Patches, EntityKey::Id(patch))
}

pub fn get_edge_data(rec: &impl Recorded, i: u64, j: u64) -> Result<TableFrame> {
    entity_data(rec, EntityClass::Edges, EntityKey::Edge(i.min(j), i.max(j)))
}

/// Every recorded entity of `class` in long form: one row per entity per
/// tick, keyed by `tick` and `id` (`i`, `j` for edges). Columns are the
/// union of recorded keys in first-seen order.
pub fn class_table(rec: &impl Recorded, class: EntityClass) -> Result<TableFrame> {
    let records = rec.records();
    all_ticks(records)?;
    let mut keys: Vec<&str> = Vec::new();
    for (_, tape) in records.tapes(class) {
        for k in tape.keys_in_order() {
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
    }
    let mut rows: Vec<(u64, EntityKey, &EntityTape)> = Vec::new();
    for t in 0..records.num_ticks() {
        rows.extend(records.views_at(class, t).map(|v| (t, v.key, v.tape)));
    }
    let mut frame = TableFrame::with_ticks(rows.iter().map(|r| r.0));
    let id_of = |k: &EntityKey, second: bool| match (k, second) {
        (EntityKey::Id(i), _) | (EntityKey::Edge(i, _), false) => Some(Scalar::Int(*i as i64)),
        (EntityKey::Edge(_, j), true) => Some(Scalar::Int(*j as i64)),
    };
    if class == EntityClass::Edges {
        frame.push_column("i".into(), rows.iter().map(|r| id_of(&r.1, false)).collect());
        frame.push_column("j".into(), rows.iter().map(|r| id_of(&r.1, true)).collect());
    } else {
        frame.push_column("id".into(), rows.iter().map(|r| id_of(&r.1, false)).collect());
    }
    for k in keys {
        let values = rows.iter().map(|(t, _, tape)| tape.value(k, *t).cloned()).collect();
        push_series(&mut frame, k, values);
    }
    Ok(frame)
}

/// One column per plot series, evaluated at every recorded tick.
pub fn plot_table(rec: &impl Recorded, plots: &[crate::probe::PlotSpec]) -> Result<TableFrame> {
    let records = rec.records();
    let ticks = all_ticks(records)?;
    let mut frame = TableFrame::with_ticks(ticks.clone());
    for p in plots {
        let mut values = Vec::with_capacity(ticks.end as usize);
        for t in ticks.clone() {
            let v = p.evaluate(records, t)?;
            values.push((!v.is_nan()).then_some(Scalar::Real(v)));
        }
        frame.push_column(p.label.clone(), values);
    }
    Ok(frame)
}

fn probe_err(tick: u64, key: EntityKey, e: Error) -> Error {
    Error::Probe {
        tick,
        id: key.to_string(),
        source: Box::new(e),
    }
}

/// Number of `class` entities alive at `tick` that satisfy `pred`.
pub fn count_at(records: &RecordStore, class: EntityClass, tick: u64, pred: Predicate<'_>) -> Result<usize> {
    records.check_tick(tick)?;
    let mut n = 0;
    for view in records.views_at(class, tick) {
        if pred(&view).map_err(|e| probe_err(tick, view.key, e))? {
            n += 1;
        }
    }
    Ok(n)
}

/// Mean of a probe over the entities alive at one tick.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Mean {
    /// No entity existed at that tick.
    Empty,
    Scalar(f64),
    Vect(Vect),
}

impl Mean {
    pub fn real_or_nan(self) -> f64 {
        match self {
            Mean::Scalar(v) => v,
            _ => f64::NAN,
        }
    }

    fn as_prop(self) -> Option<PropValue> {
        match self {
            Mean::Empty => None,
            Mean::Scalar(v) => Some(PropValue::Real(v)),
            Mean::Vect(v) => Some(PropValue::Vect(v)),
        }
    }
}

/// Arithmetic mean of `f` over the entities alive at `tick`; ints and bools
/// count as reals, vectors average componentwise.
pub fn mean_at(records: &RecordStore, class: EntityClass, tick: u64, f: Probe<'_>) -> Result<Mean> {
    records.check_tick(tick)?;
    let mut n = 0usize;
    let mut acc = Mean::Empty;
    for view in records.views_at(class, tick) {
        let v = f(&view).map_err(|e| probe_err(tick, view.key, e))?;
        let mismatch = || {
            probe_err(
                tick,
                view.key,
                Error::InvalidArgument(format!("cannot average {}", v.prop_type())),
            )
        };
        acc = match (acc, &v) {
            (Mean::Empty, PropValue::Vect(x)) => Mean::Vect(*x),
            (Mean::Vect(s), PropValue::Vect(x)) if s.dim() == x.dim() => Mean::Vect(s + *x),
            (Mean::Empty, _) => Mean::Scalar(v.as_real().ok_or_else(mismatch)?),
            (Mean::Scalar(s), _) => Mean::Scalar(s + v.as_real().ok_or_else(mismatch)?),
            _ => return Err(mismatch()),
        };
        n += 1;
    }
    Ok(match acc {
        Mean::Empty => Mean::Empty,
        Mean::Scalar(s) => Mean::Scalar(s / n as f64),
        Mean::Vect(s) => Mean::Vect(s / n as f64),
    })
}

fn check_labels(n: usize, labels: &[&str]) -> Result<()> {
    if n != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{n} functions but {} labels",
            labels.len()
        )));
    }
    Ok(())
}

fn all_ticks(records: &RecordStore) -> Result<std::ops::Range<u64>> {
    if records.num_ticks() == 0 {
        return Err(Error::NotInitialised);
    }
    Ok(0..records.num_ticks())
}

/// Per-tick means of each probe over the live entities of `class`.
pub fn avg_props(rec: &impl Recorded, class: EntityClass, fns: &[Probe<'_>], labels: &[&str]) -> Result<TableFrame> {
    check_labels(fns.len(), labels)?;
    let records = rec.records();
    let ticks = all_ticks(records)?;
    let mut frame = TableFrame::with_ticks(ticks.clone());
    for (f, label) in fns.iter().zip(labels) {
        let mut values = Vec::with_capacity(ticks.end as usize);
        for t in ticks.clone() {
            values.push(mean_at(records, class, t, *f)?.as_prop());
        }
        push_series(&mut frame, label, values);
    }
    Ok(frame)
}

/// Per-tick counts of live entities of `class` satisfying each predicate.
pub fn nums(rec: &impl Recorded, class: EntityClass, preds: &[Predicate<'_>], labels: &[&str]) -> Result<TableFrame> {
    check_labels(preds.len(), labels)?;
    let records = rec.records();
    let ticks = all_ticks(records)?;
    let mut frame = TableFrame::with_ticks(ticks.clone());
    for (p, label) in preds.iter().zip(labels) {
        let mut values = Vec::with_capacity(ticks.end as usize);
        for t in ticks.clone() {
            values.push(Some(Scalar::Int(count_at(records, class, t, *p)? as i64)));
        }
        frame.push_column(label.to_string(), values);
    }
    Ok(frame)
}

pub fn get_agents_avg_props(rec: &impl Recorded, fns: &[Probe<'_>], labels: &[&str]) -> Result<TableFrame> {
    avg_props(rec, EntityClass::Agents, fns, labels)
}

pub fn get_nodes_avg_props(rec: &impl Recorded, fns: &[Probe<'_>], labels: &[&str]) -> Result<TableFrame> {
    avg_props(rec, EntityClass::Nodes, fns, labels)
}

pub fn get_patches_avg_props(rec: &impl Recorded, fns: &[Probe<'_>], labels: &[&str]) -> Result<TableFrame> {
    avg_props(rec, EntityClass::Patches, fns, labels)
}

pub fn get_edges_avg_props(rec: &impl Recorded, fns: &[Probe<'_>], labels: &[&str]) -> Result<TableFrame> {
    avg_props(rec, EntityClass::Edges, fns, labels)
}

pub fn get_nums_agents(rec: &impl Recorded, preds: &[Predicate<'_>], labels: &[&str]) -> Result<TableFrame> {
    nums(rec, EntityClass::Agents, preds, labels)
}

pub fn get_nums_nodes(rec: &impl Recorded, preds: &[Predicate<'_>], labels: &[&str]) -> Result<TableFrame> {
    nums(rec, EntityClass::Nodes, preds, labels)
}

pub fn get_nums_patches(rec: &impl Recorded, preds: &[Predicate<'_>], labels: &[&str]) -> Result<TableFrame> {
    nums(rec, EntityClass::Patches, preds, labels)
}

/// Writes a standalone SVG line chart with one polyline per numeric
/// non-tick column.
pub fn plot_lines(frame: &TableFrame, path: &Path) -> Result<()> {
    std::fs::write(path, plot_svg(frame, "tick", ""))?;
    Ok(())
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

pub fn plot_svg(frame: &TableFrame, x_label: &str, y_label: &str) -> String {
    let (w, h) = (640.0, 400.0);
    let (ml, mr, mt, mb) = (64.0, 150.0, 20.0, 48.0);
    let ticks = frame.f64_column("tick").unwrap_or_default();
    let series: Vec<(&str, Vec<f64>)> = frame
        .columns()
        .iter()
        .skip(1)
        .filter(|c| c.values.iter().flatten().all(|v| v.as_f64().is_some()))
        .map(|c| (c.name.as_str(), frame.f64_column(&c.name).unwrap_or_default()))
        .collect();
    let finite = |v: &&f64| v.is_finite();
    let (x0, x1) = bounds(ticks.iter().filter(finite).copied());
    let (y0, y1) = bounds(series.iter().flat_map(|(_, v)| v.iter().filter(finite).copied()));
    let sx = |x: f64| ml + (x - x0) / (x1 - x0) * (w - ml - mr);
    let sy = |y: f64| h - mb - (y - y0) / (y1 - y0) * (h - mt - mb);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let (left, right, top, bottom) = (ml, w - mr, mt, h - mb);
    let _ = writeln!(
        s,
        r#"<path d="M{left} {top} V{bottom} H{right}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            sx(fx),
            bottom + 16.0,
            fmt_tick(fx)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            left - 6.0,
            sy(fy) + 4.0,
            fmt_tick(fy)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (left + right) / 2.0,
        h - 8.0,
        xml_escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(16 {:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
        (top + bottom) / 2.0,
        xml_escape(y_label)
    );
    for (k, (name, ys)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut d = String::new();
        let mut pen_down = false;
        for (x, y) in ticks.iter().zip(ys) {
            if x.is_finite() && y.is_finite() {
                let _ = write!(d, "{}{:.2} {:.2} ", if pen_down { "L" } else { "M" }, sx(*x), sy(*y));
                pen_down = true;
            } else {
                pen_down = false;
            }
        }
        let _ = writeln!(
            s,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            d.trim_end()
        );
        let ly = top + 10.0 + 18.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            right + 12.0,
            right + 32.0,
            right + 38.0,
            ly + 4.0,
            xml_escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn bounds(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in vals {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 1000.0 || v == v.trunc() {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

pub(crate) fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
