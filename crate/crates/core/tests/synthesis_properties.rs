use proptest::prelude::*;
use roomsynth_core::context::AcousticParameterVector;
use roomsynth_core::geometry::{ShoeboxModel, Vec3};
use roomsynth_core::material::AbsorptionSpectrum;
use roomsynth_core::metrics::{measure_rir, OctaveFilterBank};
use roomsynth_core::synthesis::{
    compose_rir, compute_image_sources, eyring_rt60, synthesize_early, DecayModel, DirectPath, LateComponent,
    ReflectionTap, RoomAcoustics, SynthesisConfig, Synthesizer,
};

fn room() -> impl Strategy<Value = ShoeboxModel> {
    (2.0..10.0f64, 2.0..10.0f64, 2.2..4.0f64)
        .prop_map(|(x, y, z)| ShoeboxModel::from_dimensions(Vec3::new(x, y, z)).unwrap())
}

fn interior(dims: Vec3) -> impl Strategy<Value = Vec3> {
    (0.05..0.95f64, 0.05..0.95f64, 0.05..0.95f64).prop_map(move |(a, b, c)| dims.component_mul(&Vec3::new(a, b, c)))
}

fn lattice_count(n: i32) -> usize {
    let mut count = 0;
    for i in -n..=n {
        for j in -n..=n {
            for k in -n..=n {
                let m = i.abs() + j.abs() + k.abs();
                if m > 0 && m <= n {
                    count += 1;
                }
            }
        }
    }
    count
}

fn early_energy(taps: &[ReflectionTap]) -> f64 {
    taps.iter().flat_map(|t| t.amplitude.iter()).map(|a| a * a).sum()
}

proptest! {
    #[test]
    fn image_count_matches_lattice(
        (shoebox, source) in room().prop_flat_map(|r| { let d = r.dimensions(); (Just(r), interior(d)) }),
    ) {
        for n in 1..=4 {
            let images = compute_image_sources(&shoebox, &source, n, &[[0.8; 8]; 6]).unwrap();
            prop_assert_eq!(images.len(), lattice_count(n as i32));
        }
    }

    #[test]
    fn eyring_decreases_with_absorption_and_grows_with_size(
        dims in (2.0..10.0f64, 2.0..10.0f64, 2.2..4.0f64),
        alpha in 0.05..0.85f64,
        step in 0.001..0.05f64,
        scale in 1.01..1.5f64,
    ) {
        let dims = Vec3::new(dims.0, dims.1, dims.2);
        let room = ShoeboxModel::from_dimensions(dims).unwrap();
        let bigger = ShoeboxModel::from_dimensions(dims * scale).unwrap();
        let faces = |a: f64| [AbsorptionSpectrum::flat(a).unwrap(); 6];
        let base = eyring_rt60(&room, &faces(alpha)).unwrap();
        let damped = eyring_rt60(&room, &faces(alpha + step)).unwrap();
        let scaled = eyring_rt60(&bigger, &faces(alpha)).unwrap();
        for b in 0..8 {
            prop_assert!(damped[b] < base[b]);
            prop_assert!(scaled[b] > base[b]);
        }
    }

    #[test]
    fn early_energy_does_not_grow_with_absorption(
        (shoebox, source, listener) in room().prop_flat_map(|r| { let d = r.dimensions(); (Just(r), interior(d), interior(d)) }),
        alphas in prop::array::uniform6(0.0..0.9f64),
        face in 0..6usize,
        band in 0..8usize,
        extra in 0.0..0.1f64,
    ) {
        let spectra = alphas.map(|a| AbsorptionSpectrum::flat(a).unwrap());
        let mut raised = spectra;
        let mut values = *raised[face].values();
        values[band] += extra;
        raised[face] = AbsorptionSpectrum::new(values).unwrap();
        let energy = |faces: &[AbsorptionSpectrum; 6]| {
            let refl = faces.map(|f| f.reflection_amplitudes());
            let images = compute_image_sources(&shoebox, &source, 2, &refl).unwrap();
            early_energy(&synthesize_early(&images, &listener, &shoebox, 1.0, 343.0))
        };
        prop_assert!(energy(&raised) <= energy(&spectra) * (1.0 + 1e-12));
    }

    #[test]
    fn late_part_is_linear_in_its_gain(
        late in prop::collection::vec(-0.01..0.01f64, 2000..4000),
        distance in 1.0..5.0f64,
    ) {
        let bank = OctaveFilterBank::new(48000.0).unwrap();
        let direct = DirectPath::between(&Vec3::new(distance, 0.0, 0.0), &Vec3::zeros(), 343.0);
        let taps = vec![ReflectionTap { delay: 0.02, amplitude: [0.2; 8], direction: Vec3::x() }];
        let compose = |g: f64| {
            let buffers = vec![late.iter().map(|v| v * g).collect()];
            compose_rir(&direct, &taps, &LateComponent { onset: 0.0, buffers }, &bank, 1).unwrap()
        };
        let (none, once, twice) = (compose(0.0), compose(1.0), compose(2.0));
        let energy = |r: &roomsynth_core::synthesis::RoomImpulseResponse| -> f64 {
            r.channels[0].iter().zip(&none.channels[0]).map(|(a, b)| (a - b).powi(2)).sum()
        };
        let (e1, e2) = (energy(&once), energy(&twice));
        prop_assert!((e2 / e1 - 4.0).abs() < 4e-6);
        for ((a, b), c) in twice.channels[0].iter().zip(&once.channels[0]).zip(&none.channels[0]) {
            prop_assert!(((a - c) - 2.0 * (b - c)).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn synthesized_decay_matches_target(
        dims in (3.0..9.0f64, 3.0..9.0f64, 2.4..3.5f64),
        base in 0.3..1.6f64,
        slope in -0.08..0.08f64,
        modulator in 0.8..1.2f64,
        brightness in -0.3..0.3f64,
        reflection_gain in 0.0..1.0f64,
        seed in any::<u64>(),
    ) {
        let dims = Vec3::new(dims.0, dims.1, dims.2);
        let room = RoomAcoustics::uniform(ShoeboxModel::from_dimensions(dims).unwrap(), AbsorptionSpectrum::flat(0.2).unwrap());
        let baseline = std::array::from_fn(|b| base * (1.0 + slope * (b as f64 - 4.0)));
        let params = AcousticParameterVector::new(1.5, modulator, brightness, reflection_gain).unwrap();
        let synth = Synthesizer::new(SynthesisConfig { seed, ..SynthesisConfig::default() }).unwrap();
        let (source, listener) = roomsynth_core::synthesis::default_positions(&dims);
        let out = synth.synthesize(&room, &source, &listener, &params, &DecayModel::Fixed(baseline)).unwrap();
        prop_assume!(out.rt60.iter().all(|t| (0.2..=2.0).contains(t)));
        let measured = measure_rir(&out.rir.channels[0], 48000.0).unwrap();
        for band in 2..=6 {
            let t = measured[band].rt60_seconds().unwrap();
            prop_assert!((t / out.rt60[band] - 1.0).abs() <= 0.10, "band {band}: {t} vs {}", out.rt60[band]);
        }
    }
}
