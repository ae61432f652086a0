//! Static SVG 1.1 output. Coordinates are printed with one decimal so the
//! same chart always yields the same bytes.

use alloc::string::String;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use super::environment::Arrow;
use super::palette::{self, class_color, intensity};
use super::{CMChartData, ChartData, ChartError, DebateBar, DebateChartData, EnvironmentChartData};
use crate::parser::EntityKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub width: i64,
    pub height: i64,
}

impl Default for Dims {
    fn default() -> Self {
        Dims { width: 800, height: 480 }
    }
}

struct Doc {
    out: String,
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Rounds to one decimal and drops `-0.0`.
fn n(v: f64) -> f64 {
    let r = libm::round(v * 10.0) / 10.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

impl Doc {
    fn new(d: Dims) -> Self {
        let mut out = String::new();
        let _ = write!(
            out,
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" \
             width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\">\n\
             <rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"{bg}\"/>\n",
            w = d.width,
            h = d.height,
            bg = palette::BACKGROUND
        );
        Doc { out }
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, extra: &str) {
        let _ = writeln!(
            self.out,
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"{fill}\"{extra}/>",
            n(x),
            n(y),
            n(w),
            n(h)
        );
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
        let _ = writeln!(
            self.out,
            "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"{stroke}\" stroke-width=\"{:.1}\"/>",
            n(x1),
            n(y1),
            n(x2),
            n(y2),
            n(width)
        );
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, size: u32, content: &str) {
        let _ = writeln!(
            self.out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"{anchor}\" font-size=\"{size}\" fill=\"{}\">{}</text>",
            n(x),
            n(y),
            palette::INK,
            escape(content)
        );
    }

    fn circle(&mut self, cx: f64, cy: f64, r: f64, fill: &str) {
        let _ = writeln!(self.out, "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"{:.1}\" fill=\"{fill}\"/>", n(cx), n(cy), n(r));
    }

    /// Small up or down triangle centred on (x, y).
    fn arrow(&mut self, x: f64, y: f64, arrow: Arrow) {
        let dy = match arrow {
            Arrow::Up => -5.0,
            Arrow::Down => 5.0,
            Arrow::None => return,
        };
        let _ = writeln!(
            self.out,
            "<path d=\"M {:.1} {:.1} L {:.1} {:.1} L {:.1} {:.1} Z\" fill=\"{}\"/>",
            n(x - 5.0),
            n(y - dy),
            n(x + 5.0),
            n(y - dy),
            n(x),
            n(y + dy),
            palette::INK
        );
    }

    fn legend(&mut self, x: f64, y: f64, entries: &[(&str, &str)]) {
        let mut cx = x;
        for (color, label) in entries {
            self.rect(cx, y - 10.0, 12.0, 12.0, color, "");
            self.text(cx + 16.0, y, "start", 11, label);
            cx += 24.0 + 7.0 * label.len() as f64;
        }
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

pub fn render_svg(chart: &ChartData, dims: Dims) -> Result<String, ChartError> {
    if dims.width <= 0 || dims.height <= 0 {
        return Err(ChartError::DegenerateDims { width: dims.width, height: dims.height });
    }
    Ok(match chart {
        ChartData::Debate(c) => debate(c, dims),
        ChartData::Environment(c) => environment(c, dims),
        ChartData::Cm(c) => cm(c, dims),
    })
}

fn debate(c: &DebateChartData, d: Dims) -> String {
    let (w, h) = (d.width as f64, d.height as f64);
    let mut doc = Doc::new(d);
    let _ = writeln!(
        doc.out,
        "<defs><pattern id=\"missing\" width=\"4\" height=\"4\" patternUnits=\"userSpaceOnUse\" \
         patternTransform=\"rotate(45)\"><line x1=\"0\" y1=\"0\" x2=\"0\" y2=\"4\" stroke=\"{}\" stroke-width=\"1.5\"/>\
         </pattern></defs>",
        palette::AXIS
    );
    let cx = w / 2.0;
    let half = (w / 2.0 - 40.0).max(1.0);
    let unit = half / 4.0;
    let (top, bottom) = (80.0, (h - 60.0).max(81.0));
    let band = (bottom - top) / c.rows.len().max(1) as f64;
    let bar_h = band * 0.45;

    doc.text(cx, 28.0, "middle", 16, "Causal Debate Chart");
    doc.text(cx - half / 2.0, 58.0, "middle", 13, &c.left_var);
    doc.text(cx + half / 2.0, 58.0, "middle", 13, &c.right_var);

    let draw = |doc: &mut Doc, bar: &DebateBar, y: f64, left: bool| match bar.score {
        Some(s) => {
            let len = f64::from(s) * unit;
            let x = if left { cx - len } else { cx };
            doc.rect(x, y, len, bar_h, class_color(bar.color), "");
        }
        None => {
            let x = if left { cx - 6.0 } else { cx };
            doc.rect(x, y, 6.0, bar_h, "url(#missing)", " class=\"missing\"");
        }
    };
    for (i, row) in c.rows.iter().enumerate() {
        let y0 = top + band * i as f64;
        doc.text(cx, y0 + 12.0, "middle", 11, &row.label);
        let y = y0 + 16.0;
        draw(&mut doc, &row.left, y, true);
        draw(&mut doc, &row.right, y, false);
    }

    doc.line(cx, top, cx, bottom, palette::AXIS, 1.0);
    doc.line(cx - half, bottom, cx + half, bottom, palette::AXIS, 1.0);
    for t in 0..=4 {
        let off = f64::from(t) * unit;
        let label = [b'0' + t as u8];
        let label = core::str::from_utf8(&label).unwrap_or("?");
        let xs: &[f64] = if t == 0 { &[cx] } else { &[cx - off, cx + off] };
        for &x in xs {
            doc.line(x, bottom, x, bottom + 4.0, palette::AXIS, 1.0);
            doc.text(x, bottom + 16.0, "middle", 10, label);
        }
    }
    let legend: alloc::vec::Vec<(&str, &str)> =
        c.legend.iter().map(|e| (class_color(e.class), e.label.as_str())).collect();
    doc.legend(40.0, h - 14.0, &legend);
    doc.finish()
}

fn environment(c: &EnvironmentChartData, d: Dims) -> String {
    let (w, h) = (d.width as f64, d.height as f64);
    let mut doc = Doc::new(d);
    let mid = h / 2.0;
    doc.text(w / 2.0, 28.0, "middle", 16, c.variant.title());

    let box_w = (w / 4.0).min(200.0);
    let ends = [(&c.cause, 20.0), (&c.effect, w - 20.0 - box_w)];
    for (e, x) in ends {
        doc.rect(x, mid - 20.0, box_w, 40.0, class_color(e.color), "");
        let label = match e.level {
            Some(l) => alloc::format!("{} {}", l.word(), e.name),
            None => e.name.clone(),
        };
        doc.text(x + box_w / 2.0, mid + 4.0, "middle", 12, &label);
    }
    doc.line(20.0 + box_w, mid, w - 20.0 - box_w, mid, palette::AXIS, 2.0);
    if let Some(r) = c.rating {
        doc.text(w / 2.0, mid - 6.0, "middle", 11, &alloc::format!("rating {r}"));
    }

    let rows = [
        (&c.mediators, "mediators", &palette::MEDIATOR, 60.0, mid - 50.0),
        (&c.confounders, "confounders", &palette::CONFOUNDER, mid + 50.0, h - 30.0),
    ];
    for (cards, title, colors, y0, y1) in rows {
        doc.text(20.0, y0 + 12.0, "start", 12, title);
        if cards.is_empty() {
            continue;
        }
        let card_h = 26.0;
        let y = (y0 + 20.0).min(y1 - card_h).max(y0);
        let slot = (w - 40.0) / cards.len() as f64;
        let card_w = (slot - 8.0).clamp(4.0, 200.0);
        for (i, card) in cards.iter().enumerate() {
            let x = 20.0 + slot * i as f64 + (slot - card_w) / 2.0;
            doc.rect(x, y, card_w, card_h, colors[intensity(card.strength)], "");
            doc.text(x + card_w / 2.0, y + 17.0, "middle", 11, &card.label);
            doc.arrow(x + card_w - 9.0, y + card_h / 2.0, card.arrow);
        }
    }
    doc.finish()
}

fn cm(c: &CMChartData, d: Dims) -> String {
    let (w, h) = (d.width as f64, d.height as f64);
    let mut doc = Doc::new(d);
    doc.text(w / 2.0, 28.0, "middle", 16, "Confounder/Mediator Chart");

    let (top, bottom) = (50.0, h - 40.0);
    let step = |count: usize| (bottom - top) / count.max(1) as f64;
    let q_step = step(c.questions.len());
    let e_step = step(c.centrality_rank.len());
    let q_w = (w * 0.35).min(280.0);
    let q_pos = |i: usize| top + q_step * (i as f64 + 0.5);
    let e_x = w - 200.0;
    let e_pos = |i: usize| top + e_step * (i as f64 + 0.5);

    let entity_row = |id: &str| c.centrality_rank.iter().position(|r| r == id);
    for link in &c.links {
        let (Some(qi), Some(ei)) = (c.questions.iter().position(|q| q.id == link.question), entity_row(&link.entity))
        else {
            continue;
        };
        let kind = c.entity(&link.entity).map(|e| e.kind);
        let color = match kind {
            Some(EntityKind::Confounder) => palette::CONFOUNDER[1],
            _ => palette::MEDIATOR[1],
        };
        doc.line(20.0 + q_w, q_pos(qi), e_x, e_pos(ei), color, f64::from(link.strength.clamp(1, 3)));
    }
    for (i, q) in c.questions.iter().enumerate() {
        let y = q_pos(i);
        doc.rect(20.0, y - 12.0, q_w, 24.0, palette::QUESTION, "");
        doc.text(20.0 + q_w / 2.0, y + 4.0, "middle", 10, &q.label);
    }
    for (i, id) in c.centrality_rank.iter().enumerate() {
        let Some(e) = c.entity(id) else { continue };
        let y = e_pos(i);
        let color = match e.kind {
            EntityKind::Mediator => palette::MEDIATOR[1],
            EntityKind::Confounder => palette::CONFOUNDER[1],
        };
        doc.circle(e_x, y, 8.0, color);
        doc.text(e_x + 14.0, y + 4.0, "start", 11, &e.label);
    }
    doc.legend(
        40.0,
        h - 14.0,
        &[(palette::MEDIATOR[1], "mediator"), (palette::CONFOUNDER[1], "confounder"), (palette::QUESTION, "question")],
    );
    doc.finish()
}
