use serde::{Deserialize, Serialize};

use crate::bands::{BandValues, BAND_COUNT};
use crate::error::{Error, Result};
use crate::geometry::{Face, ShoeboxModel, Vec3};

/// Highest supported image-source order.
pub const MAX_ISM_ORDER: usize = 4;
/// Distances below this are treated as this for spreading loss.
pub const MIN_DISTANCE: f64 = 0.1;

/// A mirrored copy of the source on the rectangular-room image lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageSource {
    pub lattice_index: [i32; 3],
    pub order: usize,
    /// Position in box coordinates.
    pub position: Vec3,
    /// Product of the reflection amplitudes along the path, per band.
    pub amplitude: BandValues,
}

/// One specular arrival at the listener.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectionTap {
    pub delay: f64,
    pub amplitude: BandValues,
    /// Unit vector from the listener towards the (image) source.
    pub direction: Vec3,
}

/// Image coordinate along one axis of length `len` for lattice index `n`.
pub fn image_coordinate(n: i32, len: f64, source: f64) -> f64 {
    if n.rem_euclid(2) == 0 {
        n as f64 * len + source
    } else {
        (n + 1) as f64 * len - source
    }
}

/// Number of reflections off the (min, max) wall of an axis for index `n`.
pub fn reflection_counts(n: i32) -> (u32, u32) {
    let m = n.unsigned_abs();
    let (more, fewer) = ((m + 1) / 2, m / 2);
    if n >= 0 {
        (fewer, more)
    } else {
        (more, fewer)
    }
}

/// All images with order `1..=max_order`, sorted by order and then by
/// lattice index.
///
/// `source` is in box coordinates and must lie strictly inside the box.
/// `face_reflection` holds the per-band amplitude reflection coefficient of
/// each face, indexed by [`Face::id`].
pub fn compute_image_sources(
    shoebox: &ShoeboxModel,
    source: &Vec3,
    max_order: usize,
    face_reflection: &[BandValues; 6],
) -> Result<Vec<ImageSource>> {
    if max_order > MAX_ISM_ORDER {
        return Err(Error::OrderTooHigh(max_order));
    }
    let dims = shoebox.dimensions();
    if (0..3).any(|a| !(source[a] > 0.0 && source[a] < dims[a])) {
        return Err(Error::SourceOutsideRoom);
    }

    let n = max_order as i32;
    let mut images = Vec::new();
    for i in -n..=n {
        for j in -n..=n {
            for k in -n..=n {
                let order = (i.abs() + j.abs() + k.abs()) as usize;
                if order == 0 || order > max_order {
                    continue;
                }
                let idx = [i, j, k];
                let mut amplitude = [1.0; BAND_COUNT];
                let mut position = Vec3::zeros();
                for axis in 0..3 {
                    position[axis] = image_coordinate(idx[axis], dims[axis], source[axis]);
                    let (lo, hi) = reflection_counts(idx[axis]);
                    let min_face = Face::from_id(2 * axis).expect("axis face");
                    let max_face = Face::from_id(2 * axis + 1).expect("axis face");
                    for (b, a) in amplitude.iter_mut().enumerate() {
                        *a *= face_reflection[min_face.id()][b].powi(lo as i32)
                            * face_reflection[max_face.id()][b].powi(hi as i32);
                    }
                }
                images.push(ImageSource { lattice_index: idx, order, position, amplitude });
            }
        }
    }
    images.sort_by(|a, b| a.order.cmp(&b.order).then(a.lattice_index.cmp(&b.lattice_index)));
    Ok(images)
}

/// Converts images into taps at the listener (box coordinates). Returns no
/// taps when the listener is outside the box.
pub fn synthesize_early(
    images: &[ImageSource],
    listener: &Vec3,
    shoebox: &ShoeboxModel,
    reflection_gain: f64,
    speed_of_sound: f64,
) -> Vec<ReflectionTap> {
    if !shoebox.contains_box_point(listener) {
        return Vec::new();
    }
    images
        .iter()
        .map(|image| {
            let offset = image.position - listener;
            let distance = offset.norm();
            let spread = reflection_gain / distance.max(MIN_DISTANCE);
            let direction = if distance > 0.0 { offset / distance } else { Vec3::zeros() };
            ReflectionTap { delay: distance / speed_of_sound, amplitude: image.amplitude.map(|a| a * spread), direction }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn room() -> ShoeboxModel {
        ShoeboxModel::from_dimensions(Vec3::new(5.0, 4.0, 3.0)).unwrap()
    }

    #[test]
    fn first_order_mirrors_each_face() {
        let s = Vec3::new(1.0, 1.5, 2.0);
        let images = compute_image_sources(&room(), &s, 1, &[[0.9; 8]; 6]).unwrap();
        assert_eq!(images.len(), 6);
        let find = |idx: [i32; 3]| images.iter().find(|i| i.lattice_index == idx).unwrap().position;
        assert_relative_eq!(find([-1, 0, 0]), Vec3::new(-1.0, 1.5, 2.0));
        assert_relative_eq!(find([1, 0, 0]), Vec3::new(9.0, 1.5, 2.0));
        assert_relative_eq!(find([0, 0, 1]), Vec3::new(1.0, 1.5, 4.0));
        assert!(images.iter().all(|i| i.amplitude == [0.9; 8]));
    }

    #[test]
    fn counts_per_order() {
        let s = Vec3::new(1.0, 1.5, 2.0);
        for (order, count) in [(0, 0), (1, 6), (2, 24), (3, 62), (4, 128)] {
            assert_eq!(compute_image_sources(&room(), &s, order, &[[1.0; 8]; 6]).unwrap().len(), count);
        }
        assert_eq!(compute_image_sources(&room(), &s, 5, &[[1.0; 8]; 6]), Err(Error::OrderTooHigh(5)));
    }

    #[test]
    fn absorbing_room_has_silent_images() {
        let s = Vec3::new(1.0, 1.5, 2.0);
        let images = compute_image_sources(&room(), &s, 2, &[[0.0; 8]; 6]).unwrap();
        assert_eq!(images.len(), 24);
        assert!(images.iter().all(|i| i.amplitude == [0.0; 8]));
    }

    #[test]
    fn source_on_wall_is_rejected() {
        let s = Vec3::new(0.0, 1.5, 2.0);
        assert_eq!(compute_image_sources(&room(), &s, 1, &[[1.0; 8]; 6]), Err(Error::SourceOutsideRoom));
    }

    #[test]
    fn reflection_count_pattern() {
        assert_eq!(reflection_counts(0), (0, 0));
        assert_eq!(reflection_counts(1), (0, 1));
        assert_eq!(reflection_counts(-1), (1, 0));
        assert_eq!(reflection_counts(2), (1, 1));
        assert_eq!(reflection_counts(3), (1, 2));
        assert_eq!(reflection_counts(-3), (2, 1));
    }

    #[test]
    fn taps() {
        let image = ImageSource { lattice_index: [1, 0, 0], order: 1, position: Vec3::new(4.43, 1.0, 1.0), amplitude: [0.5; 8] };
        let listener = Vec3::new(1.0, 1.0, 1.0);
        let taps = synthesize_early(std::slice::from_ref(&image), &listener, &room(), 1.0, 343.0);
        assert_relative_eq!(taps[0].delay, 0.01, max_relative = 1e-12);
        assert_relative_eq!(taps[0].amplitude[0], 0.5 / 3.43, max_relative = 1e-12);
        assert_relative_eq!(taps[0].direction, Vec3::x(), epsilon = 1e-12);

        let silent = synthesize_early(std::slice::from_ref(&image), &listener, &room(), 0.0, 343.0);
        assert!(silent[0].amplitude.iter().all(|&a| a == 0.0));

        let outside = synthesize_early(&[image], &Vec3::new(-1.0, 1.0, 1.0), &room(), 1.0, 343.0);
        assert!(outside.is_empty());
    }
}
