//! Frames and animations from recorded tapes.
//!
//! A frame is first reduced to a [`DrawList`] in world coordinates, which
//! is what the service streams, and then drawn either as SVG text or as a
//! raster for GIF output. World to canvas is a uniform scale with +y up.
//! 3D spaces are projected orthographically onto an axis pair and drawn
//! back to front. Graphs are drawn from the recorded node `pos` layout.

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tiny_skia::{FillRule, Paint, PathBuilder, Pixmap, Rect, Stroke, Transform};

use crate::datacollect::xml_escape;
use crate::error::{Error, Result};
use crate::model::{Model, SpaceInfo};
use crate::record::{EntityClass, EntityView, RecordStore, Recorded};
use crate::value::{reserved, Color, PropValue, Vect};

/// Axis pair shown for 3D spaces; the remaining axis is depth.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Projection {
    #[default]
    Xy,
    Xz,
    Yz,
}

impl Projection {
    fn axes(self) -> (usize, usize, usize) {
        match self {
            Projection::Xy => (0, 1, 2),
            Projection::Xz => (0, 2, 1),
            Projection::Yz => (1, 2, 0),
        }
    }
}

impl std::str::FromStr for Projection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xy" => Ok(Projection::Xy),
            "xz" => Ok(Projection::Xz),
            "yz" => Ok(Projection::Yz),
            _ => Err(Error::InvalidArgument(format!("projection must be xy, xz or yz, got `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ViewOpts {
    /// Multiplies every glyph size.
    pub agent_scale: f64,
    pub projection: Projection,
    /// Length in pixels of the longer canvas side.
    pub canvas: u32,
    /// Draws cell boundaries of grid spaces.
    pub show_grid: bool,
}

impl Default for ViewOpts {
    fn default() -> Self {
        ViewOpts {
            agent_scale: 1.0,
            projection: Projection::Xy,
            canvas: 400,
            show_grid: false,
        }
    }
}

/// One glyph in world coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrawEntity {
    pub id: u64,
    pub x: f64,
    pub y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    pub shape: String,
    /// `#rrggbb`.
    pub color: String,
    pub orientation: f64,
    /// Glyph extent in world units.
    pub size: f64,
}

/// A filled axis-aligned cell, used for recorded patch colours.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrawCell {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub color: String,
}

/// Everything needed to draw one tick, in world coordinates with the
/// origin at the bottom left of a `width` x `height` box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrawList {
    pub tick: u64,
    pub width: f64,
    pub height: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cells: Vec<DrawCell>,
    /// Line segments `[x1, y1, x2, y2]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<[f64; 4]>,
    pub entities: Vec<DrawEntity>,
    /// Cell-grid dimensions when `show_grid` applies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<(usize, usize)>,
}

const DEFAULT_AGENT_COLOR: [u8; 3] = [40, 80, 220];
const EDGE_COLOR: &str = "#9a9a9a";

fn hex_of(v: Option<&PropValue>, fallback: [u8; 3]) -> String {
    match v.and_then(PropValue::as_color) {
        Some(c) => c.hex(),
        None => Color::Rgb(fallback[0], fallback[1], fallback[2]).hex(),
    }
}

fn scalar_of(v: Option<&PropValue>) -> Option<f64> {
    v.and_then(PropValue::as_real)
}

fn glyph(view: &EntityView<'_>, x: f64, y: f64, base: f64, opts: &ViewOpts) -> DrawEntity {
    DrawEntity {
        id: view.id(),
        x,
        y,
        z: None,
        shape: view
            .get_or_appearance(reserved::SHAPE)
            .and_then(PropValue::as_label)
            .unwrap_or("circle")
            .to_string(),
        color: hex_of(view.get_or_appearance(reserved::COLOR), DEFAULT_AGENT_COLOR),
        orientation: scalar_of(view.get_or_appearance(reserved::ORIENTATION)).unwrap_or(0.0),
        size: base * scalar_of(view.get_or_appearance(reserved::SIZE)).unwrap_or(1.0) * opts.agent_scale,
    }
}

/// Builds the draw list of `tick`.
pub fn draw_list(rec: &impl Recorded, space: &SpaceInfo, tick: u64, opts: &ViewOpts) -> Result<DrawList> {
    let records = rec.records();
    records.check_tick(tick)?;
    match space {
        SpaceInfo::Spatial { size, .. } => spatial_list(records, size, tick, opts),
        SpaceInfo::Graph { .. } => graph_list(records, tick, opts),
    }
}

fn spatial_list(records: &RecordStore, size: &[usize], tick: u64, opts: &ViewOpts) -> Result<DrawList> {
    let (a, b, d) = if size.len() == 3 { opts.projection.axes() } else { (0, 1, 2) };
    let (width, height) = (size[a] as f64, size[b] as f64);
    let mut list = DrawList {
        tick,
        width,
        height,
        cells: Vec::new(),
        edges: Vec::new(),
        entities: Vec::new(),
        grid: opts.show_grid.then_some((size[a], size[b])),
    };
    if size.len() == 2 {
        for view in records.views_at(EntityClass::Patches, tick) {
            if let Some(c) = view.get_or_appearance(reserved::COLOR).and_then(PropValue::as_color) {
                let i = view.id() as usize - 1;
                list.cells.push(DrawCell {
                    x: (i % size[0]) as f64,
                    y: (i / size[0]) as f64,
                    w: 1.0,
                    h: 1.0,
                    color: c.hex(),
                });
            }
        }
    }
    let base = width.max(height) / 40.0;
    for view in records.views_at(EntityClass::Agents, tick) {
        let pos = match view.get(reserved::POS) {
            Ok(PropValue::Vect(v)) => *v,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "agent {} has no recorded `pos` at tick {tick}; record `pos` to render spatial models",
                    view.id()
                )))
            }
        };
        let grid = view.tape.kind.is_some_and(|k| k.is_grid());
        // grid cells are 1-based; draw at the cell centre
        let shift = if grid { 0.5 } else { 0.0 };
        let c = pos.as_slice();
        let base = if grid { 0.8 } else { base };
        let mut e = glyph(&view, c[a] - shift, c[b] - shift, base, opts);
        if c.len() == 3 {
            e.z = Some(c[d] - shift);
        }
        list.entities.push(e);
    }
    if size.len() == 3 {
        list.entities
            .sort_by(|p, q| p.z.unwrap_or(0.0).total_cmp(&q.z.unwrap_or(0.0)).then(p.id.cmp(&q.id)));
    }
    Ok(list)
}

fn graph_list(records: &RecordStore, tick: u64, opts: &ViewOpts) -> Result<DrawList> {
    let frame = records.topology_at(tick);
    let nodes: Vec<EntityView<'_>> = records.views_at(EntityClass::Nodes, tick).collect();
    let mut layout: std::collections::BTreeMap<u64, Vect> =
        frame.map(|f| f.layout.clone()).unwrap_or_default();
    let mut ids: Vec<u64> = nodes.iter().map(|v| v.id()).collect();
    if let Some(f) = frame {
        ids.extend(f.layout.keys());
        ids.extend(f.edges.iter().flat_map(|&(i, j)| [i, j]));
    }
    ids.sort_unstable();
    ids.dedup();
    // nodes without a stored position go on a unit circle
    let n = ids.len().max(1) as f64;
    for (k, id) in ids.iter().enumerate() {
        layout.entry(*id).or_insert_with(|| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / n;
            Vect::new2(0.5 + 0.5 * t.cos(), 0.5 + 0.5 * t.sin())
        });
    }
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in layout.values() {
        x0 = x0.min(p.x());
        y0 = y0.min(p.y());
        x1 = x1.max(p.x());
        y1 = y1.max(p.y());
    }
    if !x0.is_finite() {
        (x0, y0, x1, y1) = (0.0, 0.0, 1.0, 1.0);
    }
    let span = (x1 - x0).max(y1 - y0).max(1e-9);
    let pad = 0.05 * span;
    let (ox, oy) = (x0 - pad, y0 - pad);
    let at = |id: u64| {
        let p = layout[&id];
        (p.x() - ox, p.y() - oy)
    };
    let mut list = DrawList {
        tick,
        width: x1 - x0 + 2.0 * pad,
        height: y1 - y0 + 2.0 * pad,
        cells: Vec::new(),
        edges: Vec::new(),
        entities: Vec::new(),
        grid: None,
    };
    if let Some(f) = frame {
        for &(i, j) in &f.edges {
            let (p, q) = (at(i), at(j));
            list.edges.push([p.0, p.1, q.0, q.1]);
        }
    }
    let base = span / 60.0;
    for view in &nodes {
        let (x, y) = at(view.id());
        let mut e = glyph(view, x, y, base, opts);
        e.color = hex_of(view.get_or_appearance(reserved::COLOR), [0, 0, 0]);
        list.entities.push(e);
    }
    Ok(list)
}

/// Isosceles triangle pointing along the heading `(-sin θ, cos θ)`.
fn arrow_points(e: &DrawEntity) -> [(f64, f64); 3] {
    let (hx, hy) = (-e.orientation.sin(), e.orientation.cos());
    let (px, py) = (-hy, hx);
    let l = e.size;
    [
        (e.x + hx * l * 0.6, e.y + hy * l * 0.6),
        (e.x - hx * l * 0.4 + px * l * 0.3, e.y - hy * l * 0.4 + py * l * 0.3),
        (e.x - hx * l * 0.4 - px * l * 0.3, e.y - hy * l * 0.4 - py * l * 0.3),
    ]
}

struct Canvas {
    scale: f64,
    width: u32,
    height: u32,
    world_h: f64,
}

impl Canvas {
    fn new(list: &DrawList, opts: &ViewOpts) -> Canvas {
        let longest = list.width.max(list.height).max(1e-9);
        let scale = opts.canvas.max(1) as f64 / longest;
        Canvas {
            scale,
            width: ((list.width * scale).round() as u32).max(1),
            height: ((list.height * scale).round() as u32).max(1),
            world_h: list.height,
        }
    }

    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        (x * self.scale, (self.world_h - y) * self.scale)
    }
}

impl DrawList {
    /// Canvas size in pixels for `opts`.
    pub fn canvas_size(&self, opts: &ViewOpts) -> (u32, u32) {
        let c = Canvas::new(self, opts);
        (c.width, c.height)
    }

    /// Canvas position of a world point.
    pub fn to_canvas(&self, opts: &ViewOpts, x: f64, y: f64) -> (f64, f64) {
        Canvas::new(self, opts).map(x, y)
    }

    pub fn to_svg(&self, opts: &ViewOpts) -> String {
        let c = Canvas::new(self, opts);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
            w = c.width,
            h = c.height
        );
        let _ = writeln!(s, r#"<rect width="{}" height="{}" fill="white"/>"#, c.width, c.height);
        for cell in &self.cells {
            let (x, y) = c.map(cell.x, cell.y + cell.h);
            let _ = writeln!(
                s,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                cell.w * c.scale,
                cell.h * c.scale,
                xml_escape(&cell.color)
            );
        }
        if let Some((gx, gy)) = self.grid {
            let _ = write!(s, r##"<path stroke="#dddddd" fill="none" d=""##);
            for i in 0..=gx {
                let x = i as f64 * c.scale;
                let _ = write!(s, "M{x:.2} 0V{}", c.height);
            }
            for j in 0..=gy {
                let y = j as f64 * c.scale;
                let _ = write!(s, "M0 {y:.2}H{}", c.width);
            }
            let _ = writeln!(s, r#""/>"#);
        }
        for e in &self.edges {
            let (x1, y1) = c.map(e[0], e[1]);
            let (x2, y2) = c.map(e[2], e[3]);
            let _ = writeln!(
                s,
                r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{EDGE_COLOR}"/>"#
            );
        }
        for e in &self.entities {
            let color = xml_escape(&e.color);
            match e.shape.as_str() {
                "arrow" => {
                    let pts: Vec<String> = arrow_points(e)
                        .iter()
                        .map(|&(x, y)| {
                            let (x, y) = c.map(x, y);
                            format!("{x:.2},{y:.2}")
                        })
                        .collect();
                    let _ = writeln!(s, r#"<polygon points="{}" fill="{color}"/>"#, pts.join(" "));
                }
                "square" | "box" => {
                    let half = e.size / 2.0;
                    let (x, y) = c.map(e.x - half, e.y + half);
                    let side = e.size * c.scale;
                    let _ = writeln!(
                        s,
                        r##"<rect x="{x:.2}" y="{y:.2}" width="{side:.2}" height="{side:.2}" fill="{color}" stroke="#333333"/>"##
                    );
                }
                _ => {
                    let (x, y) = c.map(e.x, e.y);
                    let r = e.size / 2.0 * c.scale;
                    let _ = writeln!(
                        s,
                        r##"<circle cx="{x:.2}" cy="{y:.2}" r="{r:.2}" fill="{color}" stroke="#333333"/>"##
                    );
                }
            }
        }
        s.push_str("</svg>\n");
        s
    }

    /// Draws the list without anti-aliasing, so a frame holds only the
    /// colours it names.
    pub fn rasterize(&self, opts: &ViewOpts) -> Result<Raster> {
        let c = Canvas::new(self, opts);
        let mut pm = Pixmap::new(c.width, c.height)
            .ok_or_else(|| Error::InvalidArgument(format!("bad canvas size {}x{}", c.width, c.height)))?;
        pm.fill(tiny_skia::Color::WHITE);
        let paint = |hex: &str| {
            let [r, g, b] = Color::parse(hex).map(|c| c.rgb()).unwrap_or([0, 0, 0]);
            let mut p = Paint::default();
            p.set_color_rgba8(r, g, b, 255);
            p.anti_alias = false;
            p
        };
        let outline = paint("#333333");
        let stroke = Stroke {
            width: 1.0,
            ..Stroke::default()
        };
        let id = Transform::identity();
        for cell in &self.cells {
            let (x, y) = c.map(cell.x, cell.y + cell.h);
            if let Some(r) = Rect::from_xywh(x as f32, y as f32, (cell.w * c.scale) as f32, (cell.h * c.scale) as f32) {
                pm.fill_rect(r, &paint(&cell.color), id, None);
            }
        }
        if let Some((gx, gy)) = self.grid {
            let mut pb = PathBuilder::new();
            for i in 0..=gx {
                let x = (i as f64 * c.scale) as f32;
                pb.move_to(x, 0.0);
                pb.line_to(x, c.height as f32);
            }
            for j in 0..=gy {
                let y = (j as f64 * c.scale) as f32;
                pb.move_to(0.0, y);
                pb.line_to(c.width as f32, y);
            }
            if let Some(path) = pb.finish() {
                pm.stroke_path(&path, &paint("#dddddd"), &stroke, id, None);
            }
        }
        if !self.edges.is_empty() {
            let mut pb = PathBuilder::new();
            for e in &self.edges {
                let (x1, y1) = c.map(e[0], e[1]);
                let (x2, y2) = c.map(e[2], e[3]);
                pb.move_to(x1 as f32, y1 as f32);
                pb.line_to(x2 as f32, y2 as f32);
            }
            if let Some(path) = pb.finish() {
                pm.stroke_path(&path, &paint(EDGE_COLOR), &stroke, id, None);
            }
        }
        for e in &self.entities {
            let fill = paint(&e.color);
            match e.shape.as_str() {
                "arrow" => {
                    let mut pb = PathBuilder::new();
                    for (k, &(x, y)) in arrow_points(e).iter().enumerate() {
                        let (x, y) = c.map(x, y);
                        if k == 0 {
                            pb.move_to(x as f32, y as f32);
                        } else {
                            pb.line_to(x as f32, y as f32);
                        }
                    }
                    pb.close();
                    if let Some(path) = pb.finish() {
                        pm.fill_path(&path, &fill, FillRule::Winding, id, None);
                    }
                }
                "square" | "box" => {
                    let half = e.size / 2.0;
                    let (x, y) = c.map(e.x - half, e.y + half);
                    let side = (e.size * c.scale) as f32;
                    if let Some(r) = Rect::from_xywh(x as f32, y as f32, side, side) {
                        pm.fill_rect(r, &outline, id, None);
                        if let Some(inner) = Rect::from_xywh(x as f32 + 1.0, y as f32 + 1.0, side - 2.0, side - 2.0) {
                            pm.fill_rect(inner, &fill, id, None);
                        }
                    }
                }
                _ => {
                    let (x, y) = c.map(e.x, e.y);
                    let r = (e.size / 2.0 * c.scale) as f32;
                    if let Some(path) = PathBuilder::from_circle(x as f32, y as f32, r.max(1.0)) {
                        pm.fill_path(&path, &outline, FillRule::Winding, id, None);
                    }
                    if r > 1.5 {
                        if let Some(path) = PathBuilder::from_circle(x as f32, y as f32, r - 1.0) {
                            pm.fill_path(&path, &fill, FillRule::Winding, id, None);
                        }
                    }
                }
            }
        }
        Ok(Raster {
            width: c.width,
            height: c.height,
            rgba: pm.take(),
        })
    }
}

/// Opaque RGBA pixels, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Raster {
    pub width: u32,
    pub height: u32,
    pub rgba: Vec<u8>,
}

impl Raster {
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 4] {
        let i = ((y * self.width + x) * 4) as usize;
        [self.rgba[i], self.rgba[i + 1], self.rgba[i + 2], self.rgba[i + 3]]
    }
}

/// SVG of one recorded tick.
pub fn render_frame(rec: &impl Recorded, space: &SpaceInfo, tick: u64, opts: &ViewOpts) -> Result<String> {
    Ok(draw_list(rec, space, tick, opts)?.to_svg(opts))
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnimOpts {
    pub fps: u32,
    pub view: ViewOpts,
}

impl Default for AnimOpts {
    fn default() -> Self {
        AnimOpts {
            fps: 10,
            view: ViewOpts::default(),
        }
    }
}

fn gif_frame(raster: &Raster, delay: u16) -> Result<gif::Frame<'static>> {
    let (w, h) = (
        u16::try_from(raster.width).map_err(|_| Error::InvalidArgument("canvas too wide for GIF".into()))?,
        u16::try_from(raster.height).map_err(|_| Error::InvalidArgument("canvas too tall for GIF".into()))?,
    );
    let mut palette: Vec<[u8; 3]> = Vec::new();
    let mut index = std::collections::HashMap::new();
    let mut pixels = Vec::with_capacity((raster.width * raster.height) as usize);
    for px in raster.rgba.chunks_exact(4) {
        let rgb = [px[0], px[1], px[2]];
        let next = palette.len();
        let k = *index.entry(rgb).or_insert(next);
        if k == next {
            palette.push(rgb);
        }
        if palette.len() > 256 {
            let mut rgba = raster.rgba.clone();
            let mut f = gif::Frame::from_rgba_speed(w, h, &mut rgba, 10);
            f.delay = delay;
            return Ok(f);
        }
        pixels.push(k as u8);
    }
    let flat: Vec<u8> = palette.concat();
    let mut f = gif::Frame::from_palette_pixels(w, h, pixels, flat, None);
    f.delay = delay;
    Ok(f)
}

/// Writes an animated GIF with one frame per recorded tick.
pub fn animate_sim(rec: &impl Recorded, space: &SpaceInfo, path: &Path, opts: &AnimOpts) -> Result<u64> {
    let records = rec.records();
    if records.num_ticks() == 0 {
        return Err(Error::NotInitialised);
    }
    if opts.fps == 0 {
        return Err(Error::InvalidArgument("fps must be positive".into()));
    }
    let delay = (100.0 / opts.fps as f64).round().max(1.0) as u16;
    let first = draw_list(records, space, 0, &opts.view)?.rasterize(&opts.view)?;
    let file = BufWriter::new(File::create(path)?);
    let mut enc = gif::Encoder::new(file, first.width as u16, first.height as u16, &[])?;
    enc.set_repeat(gif::Repeat::Infinite)?;
    enc.write_frame(&gif_frame(&first, delay)?)?;
    for tick in 1..records.num_ticks() {
        let raster = draw_list(records, space, tick, &opts.view)?.rasterize(&opts.view)?;
        enc.write_frame(&gif_frame(&raster, delay)?)?;
    }
    Ok(records.num_ticks())
}

/// Writes `dir/NNNNN.svg` for every recorded tick.
pub fn write_frames(rec: &impl Recorded, space: &SpaceInfo, dir: &Path, view: &ViewOpts) -> Result<Vec<PathBuf>> {
    let records = rec.records();
    if records.num_ticks() == 0 {
        return Err(Error::NotInitialised);
    }
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for tick in 0..records.num_ticks() {
        let path = dir.join(format!("{tick:05}.svg"));
        std::fs::write(&path, render_frame(records, space, tick, view)?)?;
        out.push(path);
    }
    Ok(out)
}

impl Model {
    pub fn draw_list(&self, tick: u64, opts: &ViewOpts) -> Result<DrawList> {
        draw_list(self, &self.space_info(), tick, opts)
    }

    pub fn render_frame(&self, tick: u64, opts: &ViewOpts) -> Result<String> {
        render_frame(self, &self.space_info(), tick, opts)
    }

    pub fn animate_sim(&self, path: &Path, fps: u32) -> Result<u64> {
        animate_sim(
            self,
            &self.space_info(),
            path,
            &AnimOpts {
                fps,
                ..AnimOpts::default()
            },
        )
    }
}
