//! PNG rendering of one echogram channel with box overlays.

use std::io::Cursor;

use echofinder_core::{BoundingBox, Echogram, Error as CoreError, Label, SvWindow};
use image::{ImageFormat, Rgb, RgbImage};

use crate::error::Result;

pub type Color = [u8; 3];

/// Ground-truth boxes.
pub const GREEN: Color = [0, 255, 0];
/// Regions classified as schools.
pub const RED: Color = [255, 0, 0];
/// Regions classified as background.
pub const BLACK: Color = [0, 0, 0];

/// Overlay color for a detection; unlabeled ROIs are drawn as candidates.
pub fn detection_color(label: Option<Label>) -> Color {
    match label {
        Some(Label::Background) => BLACK,
        _ => RED,
    }
}

/// Anchor points of the viridis colormap, evenly spaced on [0, 1].
const VIRIDIS: [Color; 9] = [
    [68, 1, 84],
    [71, 44, 122],
    [59, 81, 139],
    [44, 113, 142],
    [33, 144, 141],
    [39, 173, 129],
    [92, 200, 99],
    [170, 220, 50],
    [253, 231, 37],
];

/// Maps a value in [0, 1] to an RGB color by piecewise-linear interpolation
/// between the anchors.
pub fn colormap(v: f32) -> Color {
    let v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
    let pos = v * (VIRIDIS.len() - 1) as f32;
    let i = (pos.floor() as usize).min(VIRIDIS.len() - 2);
    let t = pos - i as f32;
    let (a, b) = (VIRIDIS[i], VIRIDIS[i + 1]);
    std::array::from_fn(|k| (a[k] as f32 + t * (b[k] as f32 - a[k] as f32)).round() as u8)
}

/// Renders `channel` through `window` and the colormap, then draws each
/// overlay as a 1-pixel outline clipped to the image.
pub fn render_image(e: &Echogram, channel: usize, window: SvWindow, overlays: &[(BoundingBox, Color)]) -> Result<RgbImage> {
    window.validate()?;
    let values = e.channel(channel).map_err(|_| CoreError::UnknownChannel(channel))?;
    let (w, h) = (e.width() as u32, e.height() as u32);
    let mut img = RgbImage::from_fn(w, h, |x, y| Rgb(colormap(window.apply(values[(y * w + x) as usize]))));
    for (b, color) in overlays {
        draw_outline(&mut img, b, *color);
    }
    Ok(img)
}

fn draw_outline(img: &mut RgbImage, b: &BoundingBox, color: Color) {
    let (w, h) = (img.width() as u64, img.height() as u64);
    let (x0, y0) = (b.x as u64, b.y as u64);
    let (x1, y1) = (b.right() - 1, b.bottom() - 1);
    let mut put = |x: u64, y: u64| {
        if x < w && y < h {
            img.put_pixel(x as u32, y as u32, Rgb(color));
        }
    };
    for x in x0..=x1.min(w.saturating_sub(1)) {
        put(x, y0);
        put(x, y1);
    }
    for y in y0..=y1.min(h.saturating_sub(1)) {
        put(x0, y);
        put(x1, y);
    }
}

/// Encodes [`render_image`] as PNG bytes.
pub fn render_png(e: &Echogram, channel: usize, window: SvWindow, overlays: &[(BoundingBox, Color)]) -> Result<Vec<u8>> {
    let img = render_image(e, channel, window, overlays)?;
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

#[cfg(test)]
mod tests {
    use super::*;
    use echofinder_core::EchogramMeta;

    fn constant(w: usize, h: usize, v: f32) -> Echogram {
        let meta = EchogramMeta {
            frequencies_khz: vec![125.0],
            depth_min_m: 0.0,
            depth_max_m: 10.0,
            start_epoch_s: 0,
            duration_s: 60.0,
        };
        Echogram::new(w, h, meta, vec![v; w * h]).unwrap()
    }

    #[test]
    fn colormap_endpoints() {
        assert_eq!(colormap(0.0), VIRIDIS[0]);
        assert_eq!(colormap(1.0), VIRIDIS[8]);
        assert_eq!(colormap(f32::NAN), VIRIDIS[0]);
    }

    #[test]
    fn dimensions_preserved() {
        let img = render_image(&constant(10, 10, -60.0), 0, SvWindow::default(), &[]).unwrap();
        assert_eq!(img.dimensions(), (10, 10));
    }

    #[test]
    fn constant_grid_single_color() {
        let img = render_image(&constant(7, 5, -60.0), 0, SvWindow::default(), &[]).unwrap();
        let first = *img.get_pixel(0, 0);
        assert!(img.pixels().all(|p| *p == first));
    }

    #[test]
    fn partially_out_of_frame_box_is_clipped() {
        let e = constant(10, 10, -90.0);
        let b = BoundingBox::new(6, 6, 8, 8).unwrap();
        let img = render_image(&e, 0, SvWindow::default(), &[(b, RED)]).unwrap();
        let red = img.pixels().filter(|p| p.0 == RED).count();
        // Only the top and left edges inside the frame: 4 + 4 - 1 pixels.
        assert_eq!(red, 7);
        assert_eq!(img.get_pixel(6, 6).0, RED);
        assert_eq!(img.get_pixel(9, 6).0, RED);
        assert_eq!(img.get_pixel(7, 7).0, colormap(0.0));
    }

    #[test]
    fn unknown_channel() {
        assert!(render_png(&constant(2, 2, -60.0), 1, SvWindow::default(), &[]).is_err());
    }

    #[test]
    fn png_signature() {
        let png = render_png(&constant(3, 2, -60.0), 0, SvWindow::default(), &[]).unwrap();
        assert_eq!(&png[..8], b"\x89PNG\r\n\x1a\n");
    }
}
