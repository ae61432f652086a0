//! Chart colors. The web UI fetches [`Palette::standard`] from the API so both
//! renderers draw from the same table.

use serde::Serialize;

use super::ColorClass;

pub const GREY: &str = "#9e9e9e";
pub const RED: &str = "#d64545";
pub const BLUE: &str = "#4576d6";
/// Weak, medium, strong.
pub const MEDIATOR: [&str; 3] = ["#c8e6c9", "#66bb6a", "#2e7d32"];
pub const CONFOUNDER: [&str; 3] = ["#ffcdd2", "#ef5350", "#b71c1c"];
pub const QUESTION: &str = "#b3e5fc";
pub const INK: &str = "#212121";
pub const AXIS: &str = "#616161";
pub const BACKGROUND: &str = "#ffffff";

pub fn class_color(class: ColorClass) -> &'static str {
    match class {
        ColorClass::Grey => GREY,
        ColorClass::Red => RED,
        ColorClass::Blue => BLUE,
    }
}

/// 1-based strength to palette index, clamped.
pub fn intensity(strength: u8) -> usize {
    usize::from(strength.clamp(1, 3)) - 1
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Palette {
    pub grey: &'static str,
    pub red: &'static str,
    pub blue: &'static str,
    pub mediator: [&'static str; 3],
    pub confounder: [&'static str; 3],
    pub question: &'static str,
    pub ink: &'static str,
    pub axis: &'static str,
    pub background: &'static str,
}

impl Palette {
    pub fn standard() -> Self {
        Palette {
            grey: GREY,
            red: RED,
            blue: BLUE,
            mediator: MEDIATOR,
            confounder: CONFOUNDER,
            question: QUESTION,
            ink: INK,
            axis: AXIS,
            background: BACKGROUND,
        }
    }
}
