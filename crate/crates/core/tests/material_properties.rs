use std::collections::BTreeMap;

use nalgebra::UnitQuaternion;
use proptest::prelude::*;
use roomsynth_core::geometry::{Face, Pose, ShoeboxModel, Vec3};
use roomsynth_core::material::{
    blend_absorption, project_face_coverage, update_profile, Intrinsics, MaterialClass, MaterialEntry,
    MaterialLibrary, MaterialObservation, SegmentationFrame, SurfaceMaterialProfile,
};

fn material() -> impl Strategy<Value = MaterialClass> {
    (0..MaterialClass::ALL.len()).prop_map(|i| MaterialClass::ALL[i])
}

fn observation(face: Face) -> impl Strategy<Value = MaterialObservation> {
    (material(), 0.0..=1.0f64, 0.0..=1.0f64).prop_map(move |(material, pixel_fraction, confidence)| {
        MaterialObservation { face, material, pixel_fraction, confidence, timestamp: 0.0, visible_pixels: 100.0 }
    })
}

fn ratios(profile: &SurfaceMaterialProfile) -> BTreeMap<MaterialClass, f64> {
    profile.entries.iter().map(|e| (e.material, e.area_ratio)).collect()
}

proptest! {
    #[test]
    fn blend_is_a_convex_combination(
        entries in prop::collection::vec((material(), 0.01..1.0f64, 0.01..1.0f64), 1..6),
    ) {
        let library = MaterialLibrary::builtin();
        let total: f64 = entries.iter().map(|e| e.1).sum();
        let profile = SurfaceMaterialProfile {
            face: Face::ZMin,
            entries: entries
                .iter()
                .map(|&(material, r, confidence)| MaterialEntry { material, area_ratio: r / total, confidence })
                .collect(),
            evidence: 1.0,
        };
        let blended = blend_absorption(&profile, &library).unwrap();
        for band in 0..8 {
            let values: Vec<f64> = entries.iter().map(|e| library.get(e.0).unwrap().values()[band]).collect();
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(blended.values()[band] >= lo - 1e-12 && blended.values()[band] <= hi + 1e-12);
        }
    }

    #[test]
    fn frame_order_does_not_matter(
        (frames, shuffled) in prop::collection::vec(prop::collection::vec(observation(Face::YMax), 1..4), 1..6)
            .prop_flat_map(|f| (Just(f.clone()), Just(f).prop_shuffle())),
    ) {
        let fold = |frames: &[Vec<MaterialObservation>]| {
            frames.iter().fold(SurfaceMaterialProfile::empty(Face::YMax), |p, obs| update_profile(&p, obs).unwrap())
        };
        let a = ratios(&fold(&frames));
        let b = ratios(&fold(&shuffled));
        prop_assert_eq!(a.len(), b.len());
        for (m, r) in &a {
            prop_assert!((r - b[m]).abs() < 1e-9);
        }
    }

    #[test]
    fn ratios_sum_to_one(frames in prop::collection::vec(prop::collection::vec(observation(Face::XMin), 0..5), 1..8)) {
        let mut profile = SurfaceMaterialProfile::empty(Face::XMin);
        for obs in &frames {
            profile = update_profile(&profile, obs).unwrap();
            if !profile.entries.is_empty() {
                prop_assert!((profile.area_ratio_sum() - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn projected_fractions_per_face_are_bounded(
        position in (0.3..3.7f64, 0.3..2.7f64, 0.3..2.2f64),
        yaw in -3.1..3.1f64,
        pitch in -1.2..1.2f64,
        labels in prop::collection::vec(prop::option::of(material()), 16 * 12),
    ) {
        let room = ShoeboxModel::from_dimensions(Vec3::new(4.0, 3.0, 2.5)).unwrap();
        let orientation = UnitQuaternion::from_euler_angles(pitch, 0.0, yaw);
        let camera = Pose { position: Vec3::new(position.0, position.1, position.2), orientation };
        let intrinsics = Intrinsics { fx: 10.0, fy: 10.0, cx: 8.0, cy: 6.0, width: 16, height: 12 };
        let seg = SegmentationFrame { width: 16, height: 12, labels, confidence: vec![0.9; 16 * 12] };
        let obs = project_face_coverage(&room, &camera, &intrinsics, &seg, 0.0).unwrap();
        for face in Face::ALL {
            let sum: f64 = obs.iter().filter(|o| o.face == face).map(|o| o.pixel_fraction).sum();
            prop_assert!(sum <= 1.0 + 1e-9);
        }
    }
}
