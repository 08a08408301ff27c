use proptest::prelude::*;
use roomsynth_core::bands::BandValues;
use roomsynth_core::context::{
    calibrate, params_for_scene, AcousticParameterVector, CalibrationDataset, CalibrationEntry, CalibrationGrid,
    FnModel, ParameterTable, RtModel, SceneType,
};
use roomsynth_core::geometry::{Face, ShoeboxModel, Vec3};
use roomsynth_core::material::SurfaceMaterialProfile;
use roomsynth_core::Result;

fn model(entry: &CalibrationEntry, p: &AcousticParameterVector) -> Result<BandValues> {
    let v = entry.shoebox.volume();
    Ok(std::array::from_fn(|b| {
        let x = b as f64 / 7.0;
        0.02 * v.cbrt() * p.rt_modulator * (1.0 + p.reverb_brightness * (x - 0.5))
            + 0.3 * p.reverb_gain * p.reflection_gain
            + 0.1 * (p.reflection_gain - x).powi(2)
    }))
}

fn axis(lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::btree_set(0..=20u32, 1..5)
        .prop_map(move |s| s.into_iter().map(|i| lo + (hi - lo) * i as f64 / 20.0).collect())
}

fn grid() -> impl Strategy<Value = CalibrationGrid> {
    (axis(0.0, 1.0), axis(0.5, 1.5), axis(-1.0, 1.0), axis(0.0, 1.0)).prop_map(|(g, m, b, r)| CalibrationGrid {
        reverb_gain: g,
        rt_modulator: m,
        reverb_brightness: b,
        reflection_gain: r,
    })
}

fn dataset() -> impl Strategy<Value = CalibrationDataset> {
    prop::collection::vec((0..5usize, 2.0..10.0f64, 0.1..2.0f64), 5..12).prop_map(|rows| {
        let mut entries: Vec<CalibrationEntry> = rows
            .iter()
            .map(|&(scene, size, gt)| entry(SceneType::ALL[scene], size, gt))
            .collect();
        for scene in SceneType::ALL {
            entries.push(entry(scene, 5.0, 0.6));
        }
        CalibrationDataset { entries }
    })
}

fn entry(scene_type: SceneType, size: f64, gt: f64) -> CalibrationEntry {
    CalibrationEntry {
        scene_type,
        shoebox: ShoeboxModel::from_dimensions(Vec3::new(size, size * 0.8, 2.7)).unwrap(),
        profiles: Face::ALL.iter().map(|&f| SurfaceMaterialProfile::empty(f)).collect(),
        listener: None,
        source: None,
        ground_truth_rt60: std::array::from_fn(|b| gt * (1.0 + 0.05 * b as f64)),
    }
}

fn scene_mae(data: &CalibrationDataset, scene: SceneType, p: &AcousticParameterVector) -> f64 {
    let m = FnModel(model);
    let errors: Vec<f64> = data
        .of_type(scene)
        .map(|e| {
            let prepared = m.prepare(e).unwrap();
            let est = m.band_rt60(&prepared, p).unwrap();
            est.iter().zip(&e.ground_truth_rt60).map(|(a, b)| (a - b).abs()).sum::<f64>() / 8.0
        })
        .collect();
    errors.iter().sum::<f64>() / errors.len() as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn selected_point_is_optimal_on_the_grid(data in dataset(), grid in grid()) {
        prop_assume!(grid.len() <= 500);
        let result = calibrate(&data, &grid, &FnModel(model)).unwrap();
        for scene in SceneType::ALL {
            let chosen = result.table.params_for_scene(scene);
            let best = result.mae[&scene];
            prop_assert!((scene_mae(&data, scene, &chosen) - best).abs() < 1e-12);
            for p in grid.points() {
                prop_assert!(best <= scene_mae(&data, scene, &p) + 1e-12);
            }
        }
    }

    #[test]
    fn calibration_is_deterministic(data in dataset(), grid in grid()) {
        let a = calibrate(&data, &grid, &FnModel(model)).unwrap();
        let b = calibrate(&data, &grid, &FnModel(model)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn lookup_leaves_the_table_unchanged(scene in 0..5usize) {
        let table = ParameterTable::default_table();
        let before = table.clone();
        let first = params_for_scene(SceneType::ALL[scene], &table);
        let second = params_for_scene(SceneType::ALL[scene], &table);
        prop_assert_eq!(first, second);
        prop_assert_eq!(table, before);
    }
}
