//! Minimal line-plot rendering for the metric curves.

use std::path::Path;

use anyhow::{Context, Result};

const WIDTH: u32 = 640;
const HEIGHT: u32 = 420;
const MARGIN: u32 = 40;

/// Draws `values` against their indices as a polyline with axes and saves a
/// grayscale PNG. `y_max` fixes the top of the axis (e.g. 100 for percents).
pub fn save_line_plot(values: &[f64], y_max: f64, path: &Path) -> Result<()> {
    let mut img = image::GrayImage::from_pixel(WIDTH, HEIGHT, image::Luma([255u8]));
    let x0 = MARGIN;
    let y0 = HEIGHT - MARGIN;
    let x1 = WIDTH - MARGIN / 2;
    let y1 = MARGIN / 2;
    draw_line(&mut img, x0, y0, x1, y0, 120); // x axis
    draw_line(&mut img, x0, y0, x0, y1, 120); // y axis

    if values.len() >= 2 && y_max > 0.0 {
        let span_x = (x1 - x0) as f64;
        let span_y = (y0 - y1) as f64;
        let to_px = |i: usize, v: f64| {
            let fx = i as f64 / (values.len() - 1) as f64;
            let fy = (v / y_max).clamp(0.0, 1.0);
            (
                x0 + (fx * span_x).round() as u32,
                y0 - (fy * span_y).round() as u32,
            )
        };
        for i in 1..values.len() {
            let (ax, ay) = to_px(i - 1, values[i - 1]);
            let (bx, by) = to_px(i, values[i]);
            draw_line(&mut img, ax, ay, bx, by, 0);
        }
    }
    img.save(path)
        .with_context(|| format!("writing plot {}", path.display()))
}

fn draw_line(img: &mut image::GrayImage, x0: u32, y0: u32, x1: u32, y1: u32, shade: u8) {
    let (mut x, mut y) = (x0 as i64, y0 as i64);
    let (x1, y1) = (x1 as i64, y1 as i64);
    let dx = (x1 - x).abs();
    let dy = -(y1 - y).abs();
    let sx = if x < x1 { 1 } else { -1 };
    let sy = if y < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
            img.put_pixel(x as u32, y as u32, image::Luma([shade]));
        }
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}
