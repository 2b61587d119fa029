//! Color-wheel rendering of flow fields.

use crate::field::{FlowField, Image};

// Segment lengths of the color wheel: red-yellow, yellow-green, green-cyan,
// cyan-blue, blue-magenta, magenta-red.
const RY: usize = 15;
const YG: usize = 6;
const GC: usize = 4;
const CB: usize = 11;
const BM: usize = 13;
const MR: usize = 6;

fn color_wheel() -> Vec<[f64; 3]> {
    let mut wheel = Vec::with_capacity(RY + YG + GC + CB + BM + MR);
    for i in 0..RY {
        wheel.push([1.0, i as f64 / RY as f64, 0.0]);
    }
    for i in 0..YG {
        wheel.push([1.0 - i as f64 / YG as f64, 1.0, 0.0]);
    }
    for i in 0..GC {
        wheel.push([0.0, 1.0, i as f64 / GC as f64]);
    }
    for i in 0..CB {
        wheel.push([0.0, 1.0 - i as f64 / CB as f64, 1.0]);
    }
    for i in 0..BM {
        wheel.push([i as f64 / BM as f64, 0.0, 1.0]);
    }
    for i in 0..MR {
        wheel.push([1.0, 0.0, 1.0 - i as f64 / MR as f64]);
    }
    wheel
}

/// 99th-percentile flow magnitude, or 1 for an all-zero field.
pub fn auto_max_magnitude(flow: &FlowField) -> f64 {
    let mut mags: Vec<f64> = flow.as_slice().iter().map(|v| v[0].hypot(v[1])).collect();
    mags.sort_by(f64::total_cmp);
    let idx = ((mags.len() as f64 * 0.99).ceil() as usize).clamp(1, mags.len()) - 1;
    let m = mags[idx];
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

/// Hue encodes direction and saturation encodes magnitude relative to
/// `max_magnitude` (auto when `None`); zero flow is white and magnitudes
/// beyond the maximum are darkened.
pub fn flow_to_color(flow: &FlowField, max_magnitude: Option<f64>) -> Image {
    let max = max_magnitude.filter(|m| *m > 0.0).unwrap_or_else(|| auto_max_magnitude(flow));
    let wheel = color_wheel();
    let n = wheel.len();
    let data = flow
        .as_slice()
        .iter()
        .map(|&[u, v]| {
            let rad = u.hypot(v) / max;
            let angle = (-v).atan2(-u) / std::f64::consts::PI;
            let fk = (angle + 1.0) / 2.0 * (n - 1) as f64;
            let k0 = (fk.floor() as usize).min(n - 1);
            let k1 = (k0 + 1) % n;
            let f = fk - k0 as f64;
            std::array::from_fn(|ch| {
                let col = (1.0 - f) * wheel[k0][ch] + f * wheel[k1][ch];
                let col = if rad <= 1.0 { 1.0 - rad * (1.0 - col) } else { col * 0.75 };
                col.clamp(0.0, 1.0)
            })
        })
        .collect();
    Image::new(flow.height(), flow.width(), data).expect("channels clamped into range")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_flow_is_white() {
        let img = flow_to_color(&FlowField::zeros(3, 3), None);
        assert!(img.pixels().iter().all(|p| *p == [1.0; 3]));
    }

    #[test]
    fn constant_flow_is_constant_color() {
        let img = flow_to_color(&FlowField::constant(4, 5, [1.3, -0.4]), None);
        let first = img.get(0, 0);
        assert!(img.pixels().iter().all(|p| *p == first));
        assert_ne!(first, [1.0; 3]);
    }

    #[test]
    fn opposite_directions_differ() {
        let mut f = FlowField::zeros(1, 2);
        f.set(0, 0, [2.0, 0.0]);
        f.set(0, 1, [-2.0, 0.0]);
        let img = flow_to_color(&f, Some(2.0));
        let (a, b) = (img.get(0, 0), img.get(0, 1));
        let dist: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
        assert!(dist > 0.5, "{a:?} vs {b:?}");
    }

    #[test]
    fn channels_in_range() {
        let f = FlowField::from_fn(9, 9, |r, c| [(r as f64 - 4.0) * 3.0, (c as f64 - 4.0) * 2.0]).unwrap();
        for max in [None, Some(0.5), Some(100.0)] {
            let img = flow_to_color(&f, max);
            assert!(img.pixels().iter().flatten().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
