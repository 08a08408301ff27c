//! Scene types, their acoustic parameter vectors, and grid-search
//! calibration of those vectors against measured reverberation times.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bands::{BandValues, BAND_COUNT};
use crate::error::{Error, Result};
use crate::geometry::{ShoeboxModel, Vec3};
use crate::material::SurfaceMaterialProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneType {
    ConferenceRoom,
    LivingRoom,
    Bedroom,
    Outdoor,
    Other,
}

impl SceneType {
    pub const ALL: [SceneType; 5] =
        [SceneType::ConferenceRoom, SceneType::LivingRoom, SceneType::Bedroom, SceneType::Outdoor, SceneType::Other];

    pub fn label(self) -> &'static str {
        match self {
            SceneType::ConferenceRoom => "conference_room",
            SceneType::LivingRoom => "living_room",
            SceneType::Bedroom => "bedroom",
            SceneType::Outdoor => "outdoor",
            SceneType::Other => "other",
        }
    }
}

impl fmt::Display for SceneType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SceneType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.iter().copied().find(|t| t.label() == s).ok_or_else(|| Error::Parse(format!("unknown scene type `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcousticParameterVector {
    /// Late reverberation amplitude relative to a unit direct path.
    pub reverb_gain: f64,
    /// Multiplier on the baseline reverberation time.
    pub rt_modulator: f64,
    /// Spectral tilt of the reverberation time, in `[-1, 1]`.
    pub reverb_brightness: f64,
    /// Amplitude scale on early reflections.
    pub reflection_gain: f64,
}

impl AcousticParameterVector {
    pub fn new(reverb_gain: f64, rt_modulator: f64, reverb_brightness: f64, reflection_gain: f64) -> Result<Self> {
        let p = Self { reverb_gain, rt_modulator, reverb_brightness, reflection_gain };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.reverb_gain.is_finite()
            && self.reverb_gain >= 0.0
            && self.rt_modulator.is_finite()
            && self.rt_modulator > 0.0
            && (-1.0..=1.0).contains(&self.reverb_brightness)
            && self.reflection_gain.is_finite()
            && self.reflection_gain >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("acoustic parameters out of range: {self:?}")))
        }
    }

    /// Parameters that leave the baseline untouched.
    pub fn neutral() -> Self {
        Self { reverb_gain: 1.0, rt_modulator: 1.0, reverb_brightness: 0.0, reflection_gain: 1.0 }
    }

    /// Lexicographic tie-break order: reverb gain, modulator, absolute
    /// brightness, reflection gain, then signed brightness.
    fn tie_order(&self, other: &Self) -> std::cmp::Ordering {
        self.reverb_gain
            .total_cmp(&other.reverb_gain)
            .then(self.rt_modulator.total_cmp(&other.rt_modulator))
            .then(self.reverb_brightness.abs().total_cmp(&other.reverb_brightness.abs()))
            .then(self.reflection_gain.total_cmp(&other.reflection_gain))
            .then(self.reverb_brightness.total_cmp(&other.reverb_brightness))
    }
}

/// Parameter vector for every scene type.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterTable {
    entries: BTreeMap<SceneType, AcousticParameterVector>,
}

impl ParameterTable {
    pub fn new(entries: BTreeMap<SceneType, AcousticParameterVector>) -> Result<Self> {
        if let Some(missing) = SceneType::ALL.iter().find(|t| !entries.contains_key(t)) {
            return Err(Error::IncompleteTable(*missing));
        }
        for p in entries.values() {
            p.validate()?;
        }
        Ok(Self { entries })
    }

    /// Engineering defaults used before calibration.
    pub fn default_table() -> Self {
        let rows = [
            (SceneType::ConferenceRoom, 0.18, 1.0, 0.0, 0.9),
            (SceneType::LivingRoom, 0.15, 0.9, -0.1, 0.8),
            (SceneType::Bedroom, 0.10, 0.7, -0.2, 0.7),
            (SceneType::Outdoor, 0.0, 1.0, 0.0, 0.2),
            (SceneType::Other, 0.15, 1.0, 0.0, 0.8),
        ];
        let entries = rows
            .into_iter()
            .map(|(t, g, m, b, r)| {
                (t, AcousticParameterVector { reverb_gain: g, rt_modulator: m, reverb_brightness: b, reflection_gain: r })
            })
            .collect();
        Self { entries }
    }

    pub fn params_for_scene(&self, scene: SceneType) -> AcousticParameterVector {
        self.entries[&scene]
    }

    /// Parses rows `scene_type reverb_gain rt_modulator brightness
    /// reflection_gain`; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 5 {
                return Err(Error::Parse(format!("line {}: expected 5 fields, found {}", lineno + 1, fields.len())));
            }
            let scene: SceneType = fields[0].parse()?;
            let v: Vec<f64> = fields[1..]
                .iter()
                .map(|f| f.parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1))))
                .collect::<Result<_>>()?;
            let params = AcousticParameterVector::new(v[0], v[1], v[2], v[3])?;
            if entries.insert(scene, params).is_some() {
                return Err(Error::Parse(format!("line {}: duplicate scene type {scene}", lineno + 1)));
            }
        }
        Self::new(entries)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# scene_type\treverb_gain\trt_modulator\treverb_brightness\treflection_gain\n");
        for (scene, p) in &self.entries {
            out.push_str(&format!(
                "{scene}\t{}\t{}\t{}\t{}\n",
                p.reverb_gain, p.rt_modulator, p.reverb_brightness, p.reflection_gain
            ));
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = (SceneType, AcousticParameterVector)> + '_ {
        self.entries.iter().map(|(k, v)| (*k, *v))
    }
}

/// Free-function form of [`ParameterTable::params_for_scene`].
pub fn params_for_scene(scene: SceneType, table: &ParameterTable) -> AcousticParameterVector {
    table.params_for_scene(scene)
}

/// Candidate values for each parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationGrid {
    pub reverb_gain: Vec<f64>,
    pub rt_modulator: Vec<f64>,
    pub reverb_brightness: Vec<f64>,
    pub reflection_gain: Vec<f64>,
}

impl Default for CalibrationGrid {
    /// 7 x 11 x 5 x 5 = 1925 points.
    fn default() -> Self {
        Self {
            reverb_gain: (0..=6).map(|i| i as f64 * 0.05).map(round9).collect(),
            rt_modulator: (5..=15).map(|i| i as f64 / 10.0).collect(),
            reverb_brightness: (-2..=2).map(|i| i as f64 * 0.2).map(round9).collect(),
            reflection_gain: (1..=5).map(|i| i as f64 * 0.2).map(round9).collect(),
        }
    }
}

fn round9(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

impl CalibrationGrid {
    pub fn single(p: AcousticParameterVector) -> Self {
        Self {
            reverb_gain: vec![p.reverb_gain],
            rt_modulator: vec![p.rt_modulator],
            reverb_brightness: vec![p.reverb_brightness],
            reflection_gain: vec![p.reflection_gain],
        }
    }

    pub fn len(&self) -> usize {
        self.reverb_gain.len() * self.rt_modulator.len() * self.reverb_brightness.len() * self.reflection_gain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        let axes: [(&'static str, &Vec<f64>); 4] = [
            ("reverb_gain", &self.reverb_gain),
            ("rt_modulator", &self.rt_modulator),
            ("reverb_brightness", &self.reverb_brightness),
            ("reflection_gain", &self.reflection_gain),
        ];
        for (name, values) in axes {
            if values.is_empty() {
                return Err(Error::EmptyGrid(name));
            }
        }
        for p in self.points() {
            p.validate()?;
        }
        Ok(())
    }

    /// (rt_modulator, brightness) pairs; one synthesized late tail each.
    pub fn shapes(&self) -> Vec<(f64, f64)> {
        self.rt_modulator.iter().flat_map(|&m| self.reverb_brightness.iter().map(move |&b| (m, b))).collect()
    }

    /// (reverb_gain, reflection_gain) pairs; linear mixing levels.
    pub fn levels(&self) -> Vec<(f64, f64)> {
        self.reverb_gain.iter().flat_map(|&g| self.reflection_gain.iter().map(move |&r| (g, r))).collect()
    }

    pub fn points(&self) -> impl Iterator<Item = AcousticParameterVector> + '_ {
        self.shapes().into_iter().flat_map(move |(m, b)| {
            self.levels().into_iter().map(move |(g, r)| AcousticParameterVector {
                reverb_gain: g,
                rt_modulator: m,
                reverb_brightness: b,
                reflection_gain: r,
            })
        })
    }
}

/// One measured scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationEntry {
    pub scene_type: SceneType,
    pub shoebox: ShoeboxModel,
    /// One profile per face, indexed by face id.
    pub profiles: Vec<SurfaceMaterialProfile>,
    #[serde(default)]
    pub listener: Option<Vec3>,
    #[serde(default)]
    pub source: Option<Vec3>,
    pub ground_truth_rt60: BandValues,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CalibrationDataset {
    pub entries: Vec<CalibrationEntry>,
}

impl CalibrationDataset {
    pub fn validate(&self) -> Result<()> {
        for e in &self.entries {
            if e.ground_truth_rt60.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
                return Err(Error::DegenerateInput(format!("ground-truth RT60 must be positive for {}", e.scene_type)));
            }
            if e.profiles.len() != 6 {
                return Err(Error::DegenerateInput(format!("expected 6 face profiles, found {}", e.profiles.len())));
            }
            e.shoebox.validate()?;
        }
        Ok(())
    }

    pub fn of_type(&self, scene: SceneType) -> impl Iterator<Item = &CalibrationEntry> {
        self.entries.iter().filter(move |e| e.scene_type == scene)
    }
}

/// Forward model from a scene and a parameter vector to per-band RT60.
///
/// Grid points are visited one shape `(rt_modulator, brightness)` at a
/// time with all level pairs `(reverb_gain, reflection_gain)` at once, so
/// implementations can share work across levels.
pub trait RtModel: Sync {
    type Prepared: Send + Sync;

    fn prepare(&self, entry: &CalibrationEntry) -> Result<Self::Prepared>;

    fn band_rt60_levels(
        &self,
        prepared: &Self::Prepared,
        rt_modulator: f64,
        reverb_brightness: f64,
        levels: &[(f64, f64)],
    ) -> Result<Vec<BandValues>>;

    fn band_rt60(&self, prepared: &Self::Prepared, params: &AcousticParameterVector) -> Result<BandValues> {
        let out = self.band_rt60_levels(
            prepared,
            params.rt_modulator,
            params.reverb_brightness,
            &[(params.reverb_gain, params.reflection_gain)],
        )?;
        Ok(out[0])
    }
}

/// Adapts a closure `(entry, params) -> RT60` into an [`RtModel`].
pub struct FnModel<F>(pub F);

impl<F> RtModel for FnModel<F>
where
    F: Fn(&CalibrationEntry, &AcousticParameterVector) -> Result<BandValues> + Sync,
{
    type Prepared = CalibrationEntry;

    fn prepare(&self, entry: &CalibrationEntry) -> Result<CalibrationEntry> {
        Ok(entry.clone())
    }

    fn band_rt60_levels(
        &self,
        prepared: &CalibrationEntry,
        rt_modulator: f64,
        reverb_brightness: f64,
        levels: &[(f64, f64)],
    ) -> Result<Vec<BandValues>> {
        levels
            .iter()
            .map(|&(reverb_gain, reflection_gain)| {
                (self.0)(prepared, &AcousticParameterVector { reverb_gain, rt_modulator, reverb_brightness, reflection_gain })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub table: ParameterTable,
    /// Best mean absolute error per scene type, in seconds.
    pub mae: BTreeMap<SceneType, f64>,
}

fn mean_abs_error(est: &BandValues, gt: &BandValues) -> f64 {
    est.iter().zip(gt).map(|(e, g)| (e - g).abs()).sum::<f64>() / BAND_COUNT as f64
}

/// Grid search per scene type minimizing RT60 MAE over the scene type's
/// entries and all bands.
pub fn calibrate<M: RtModel>(dataset: &CalibrationDataset, grid: &CalibrationGrid, model: &M) -> Result<CalibrationResult> {
    grid.validate()?;
    dataset.validate()?;
    for scene in SceneType::ALL {
        if dataset.of_type(scene).next().is_none() {
            return Err(Error::EmptyDataset(scene));
        }
    }

    let prepared: Vec<M::Prepared> =
        dataset.entries.par_iter().map(|e| model.prepare(e)).collect::<Result<_>>()?;
    let shapes = grid.shapes();
    let levels = grid.levels();

    // errors[shape][scene][level], summed over that scene's entries.
    let errors: Vec<[Vec<f64>; 5]> = shapes
        .par_iter()
        .map(|&(modulator, brightness)| {
            let mut sums: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; levels.len()]);
            for (entry, prep) in dataset.entries.iter().zip(&prepared) {
                let rts = model.band_rt60_levels(prep, modulator, brightness, &levels)?;
                let slot = &mut sums[entry.scene_type as usize];
                for (acc, rt) in slot.iter_mut().zip(&rts) {
                    *acc += mean_abs_error(rt, &entry.ground_truth_rt60);
                }
            }
            Ok(sums)
        })
        .collect::<Result<_>>()?;

    let mut table = BTreeMap::new();
    let mut maes = BTreeMap::new();
    for scene in SceneType::ALL {
        let count = dataset.of_type(scene).count() as f64;
        let mut best: Option<(f64, AcousticParameterVector)> = None;
        for (si, &(m, b)) in shapes.iter().enumerate() {
            for (li, &(g, r)) in levels.iter().enumerate() {
                let mae = errors[si][scene as usize][li] / count;
                let candidate =
                    AcousticParameterVector { reverb_gain: g, rt_modulator: m, reverb_brightness: b, reflection_gain: r };
                let better = match &best {
                    None => true,
                    Some((best_mae, best_p)) => {
                        mae.total_cmp(best_mae).then_with(|| candidate.tie_order(best_p)).is_lt()
                    }
                };
                if better {
                    best = Some((mae, candidate));
                }
            }
        }
        let (mae, params) = best.expect("grid validated as non-empty");
        table.insert(scene, params);
        maes.insert(scene, mae);
    }
    Ok(CalibrationResult { table: ParameterTable { entries: table }, mae: maes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Face;

    fn entry(scene: SceneType, gt: f64) -> CalibrationEntry {
        CalibrationEntry {
            scene_type: scene,
            shoebox: ShoeboxModel::from_dimensions(Vec3::new(5.0, 4.0, 3.0)).unwrap(),
            profiles: Face::ALL.iter().map(|&f| SurfaceMaterialProfile::empty(f)).collect(),
            listener: None,
            source: None,
            ground_truth_rt60: [gt; 8],
        }
    }

    fn dataset() -> CalibrationDataset {
        CalibrationDataset { entries: SceneType::ALL.iter().enumerate().map(|(i, &s)| entry(s, 0.3 + 0.1 * i as f64)).collect() }
    }

    /// Each parameter drives its own bands, so every grid point is distinct.
    fn toy(_: &CalibrationEntry, p: &AcousticParameterVector) -> Result<BandValues> {
        let (g, m, b, r) = (p.reverb_gain, p.rt_modulator, p.reverb_brightness, p.reflection_gain);
        Ok([0.1 + g, m, 1.0 + b, r, g + m, m * r, 1.5 + b * g, 0.5])
    }

    #[test]
    fn default_table_lookup() {
        let table = ParameterTable::default_table();
        assert_eq!(table.params_for_scene(SceneType::Outdoor).reverb_gain, 0.0);
        let living = table.params_for_scene(SceneType::LivingRoom);
        assert_eq!(living, AcousticParameterVector::new(0.15, 0.9, -0.1, 0.8).unwrap());
        assert_eq!(ParameterTable::parse(&table.to_text()).unwrap(), table);
    }

    #[test]
    fn missing_scene_type_is_incomplete() {
        let text: String = ParameterTable::default_table()
            .to_text()
            .lines()
            .filter(|l| !l.starts_with("bedroom"))
            .map(|l| format!("{l}\n"))
            .collect();
        assert_eq!(ParameterTable::parse(&text), Err(Error::IncompleteTable(SceneType::Bedroom)));
    }

    #[test]
    fn default_grid_has_1925_points() {
        let grid = CalibrationGrid::default();
        assert_eq!(grid.len(), 1925);
        assert_eq!(grid.points().count(), 1925);
        assert_eq!(grid.reverb_gain[3], 0.15);
        assert_eq!(grid.rt_modulator[2], 0.7);
        assert_eq!(grid.reflection_gain[2], 0.6);
    }

    #[test]
    fn single_point_grid() {
        let p = AcousticParameterVector::new(0.1, 0.9, 0.2, 0.4).unwrap();
        let result = calibrate(&dataset(), &CalibrationGrid::single(p), &FnModel(toy)).unwrap();
        assert!(result.table.iter().all(|(_, v)| v == p));
    }

    #[test]
    fn planted_optimum_is_recovered() {
        let grid = CalibrationGrid::default();
        let planted = AcousticParameterVector::new(0.2, 1.3, -0.2, 0.6).unwrap();
        let mut data = dataset();
        for e in &mut data.entries {
            e.ground_truth_rt60 = toy(e, &planted).unwrap();
        }
        let result = calibrate(&data, &grid, &FnModel(toy)).unwrap();
        for scene in SceneType::ALL {
            assert_eq!(result.table.params_for_scene(scene), planted);
            assert_eq!(result.mae[&scene], 0.0);
        }
    }

    #[test]
    fn ties_prefer_the_smaller_vector() {
        let grid = CalibrationGrid {
            reverb_gain: vec![0.1],
            rt_modulator: vec![1.0],
            reverb_brightness: vec![0.4, -0.2, 0.2],
            reflection_gain: vec![0.5],
        };
        let flat = |_: &CalibrationEntry, _: &AcousticParameterVector| Ok([1.0; 8]);
        let result = calibrate(&dataset(), &grid, &FnModel(flat)).unwrap();
        assert_eq!(result.table.params_for_scene(SceneType::Bedroom).reverb_brightness, -0.2);
    }

    #[test]
    fn empty_inputs() {
        let mut grid = CalibrationGrid::default();
        grid.rt_modulator.clear();
        assert_eq!(calibrate(&dataset(), &grid, &FnModel(toy)), Err(Error::EmptyGrid("rt_modulator")));

        let mut data = dataset();
        data.entries.retain(|e| e.scene_type != SceneType::Outdoor);
        assert_eq!(
            calibrate(&data, &CalibrationGrid::default(), &FnModel(toy)),
            Err(Error::EmptyDataset(SceneType::Outdoor))
        );
    }
}
