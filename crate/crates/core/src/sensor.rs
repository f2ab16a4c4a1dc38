//! Seeded analytic stand-in for the physical sensor.
//!
//! For one settings combination the sensor is driven through 50 Input5 steps
//! in each of 4 categories. Signal grows log-linearly with Input5; SNR follows
//! `5·log10(signal)` except for a Gaussian dip (in log-signal space) between
//! roughly 3e3 and 1e4 AU whose depth depends smoothly on the settings.
//! Output3 is a positive polynomial in the normalized settings.

use std::cmp::Ordering;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::SampleRow;
use crate::par::Exec;
use crate::{Error, Result};

/// Input5 takes the integer values `0..INPUT5_STEPS`.
pub const INPUT5_STEPS: u32 = 50;
pub const INPUT5_MAX: u32 = INPUT5_STEPS - 1;
pub const CATEGORIES: usize = 4;
/// Rows (and curve points) produced by one settings combination.
pub const ROWS_PER_COMBINATION: usize = INPUT5_STEPS as usize * CATEGORIES;

pub const INPUT_NAMES: [&str; 5] = ["input1", "input2", "input3", "input4", "input6"];

/// One value for each tunable numeric input (Input1-4 and Input6).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettingsCombination {
    pub input1: f64,
    pub input2: f64,
    pub input3: f64,
    pub input4: f64,
    pub input6: f64,
}

impl SettingsCombination {
    pub fn from_array(v: [f64; 5]) -> Self {
        SettingsCombination {
            input1: v[0],
            input2: v[1],
            input3: v[2],
            input4: v[3],
            input6: v[4],
        }
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.input1, self.input2, self.input3, self.input4, self.input6]
    }

    /// Lexicographic order on (Input1, Input2, Input3, Input4, Input6).
    pub fn lex_cmp(&self, other: &Self) -> Ordering {
        self.to_array()
            .iter()
            .zip(other.to_array().iter())
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    }
}

/// Allowed values of the five tunable inputs. Combinations are the full
/// cartesian product of the raw lists, duplicates included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub values: [Vec<f64>; 5],
}

impl GridSpec {
    /// The factorial design of the original measurement campaign. Input6
    /// lists 3600 twice; the duplicate is kept so the product is 5^5.
    pub fn full_factorial() -> Self {
        GridSpec {
            values: [
                vec![418.0, 441.0, 464.0, 478.0, 510.0],
                vec![112.0, 120.0, 128.0, 136.0, 144.0],
                vec![400.0, 425.0, 450.0, 475.0, 500.0],
                vec![2850.0, 3050.0, 3250.0, 3450.0, 3650.0],
                vec![3200.0, 3400.0, 3600.0, 3600.0, 4000.0],
            ],
        }
    }

    /// Keeps `n` evenly spaced entries (by index) of every list of `self`,
    /// always including the first and last.
    pub fn subsample(&self, n: usize) -> Result<Self> {
        self.validate()?;
        let len = self.values[0].len();
        if n == 0 || n > len {
            return Err(Error::Config(format!(
                "cannot keep {n} of {len} values per input"
            )));
        }
        let pick = |list: &Vec<f64>| -> Vec<f64> {
            if n == 1 {
                return vec![list[0]];
            }
            (0..n)
                .map(|i| {
                    let idx = (i as f64 * (len - 1) as f64 / (n - 1) as f64).round() as usize;
                    list[idx]
                })
                .collect()
        };
        Ok(GridSpec {
            values: [
                pick(&self.values[0]),
                pick(&self.values[1]),
                pick(&self.values[2]),
                pick(&self.values[3]),
                pick(&self.values[4]),
            ],
        })
    }

    /// Grid for a `--scale` factor: `max(2, round(5·scale))` values per input,
    /// capped at the full list.
    pub fn scaled(scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale <= 1.0) {
            return Err(Error::Config(format!("scale must be in (0, 1], got {scale}")));
        }
        let full = Self::full_factorial();
        let n = ((5.0 * scale).round() as usize).clamp(2, 5);
        full.subsample(n)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.values[0].len();
        for (name, list) in INPUT_NAMES.iter().zip(self.values.iter()) {
            if list.is_empty() {
                return Err(Error::Config(format!("{name}: no values")));
            }
            if list.len() != n {
                return Err(Error::Config(format!(
                    "{name}: {} values, expected {n} like input1",
                    list.len()
                )));
            }
            if list.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("{name}: non-finite value")));
            }
            if list.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::Config(format!("{name}: values must be sorted")));
            }
        }
        Ok(())
    }

    pub fn combination_count(&self) -> usize {
        self.values.iter().map(Vec::len).product()
    }

    /// (min, max) of each input's list.
    pub fn bounds(&self) -> [(f64, f64); 5] {
        std::array::from_fn(|i| {
            let l = &self.values[i];
            (l[0], l[l.len() - 1])
        })
    }
}

/// Cartesian product of the grid lists, Input1 slowest, Input6 fastest.
pub fn enumerate_grid(spec: &GridSpec) -> Result<Vec<SettingsCombination>> {
    spec.validate()?;
    let v = &spec.values;
    let mut out = Vec::with_capacity(spec.combination_count());
    for &a in &v[0] {
        for &b in &v[1] {
            for &c in &v[2] {
                for &d in &v[3] {
                    for &e in &v[4] {
                        out.push(SettingsCombination::from_array([a, b, c, d, e]));
                    }
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorReading {
    pub signal: f64,
    pub snr: f64,
    pub output3: f64,
}

/// Signal law: `log10(signal) = offset + growth·input5`, both in decades.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SignalCoefficients {
    pub offset: f64,
    pub offset_per_category: f64,
    pub offset_input1: f64,
    pub growth: f64,
    pub growth_input2: f64,
    pub growth_input6: f64,
}

impl Default for SignalCoefficients {
    fn default() -> Self {
        SignalCoefficients {
            offset: 0.05,
            offset_per_category: 0.12,
            offset_input1: 0.10,
            growth: 0.085,
            growth_input2: 0.010,
            growth_input6: -0.003,
        }
    }
}

/// Dip depth in dB:
/// `depth · (floor + curvature·((u3 − optimum3)² + (u4 − optimum4)²) + slope1·u1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DipCoefficients {
    /// Dip center, AU.
    pub center: f64,
    /// Center shift in decades per unit of normalized Input6, around u6 = 0.5.
    pub center_shift_input6: f64,
    /// Gaussian standard deviation in decades of signal.
    pub width: f64,
    pub depth: f64,
    pub floor: f64,
    pub curvature: f64,
    pub optimum3: f64,
    pub optimum4: f64,
    pub slope1: f64,
}

impl Default for DipCoefficients {
    fn default() -> Self {
        DipCoefficients {
            center: 5500.0,
            center_shift_input6: 0.05,
            width: 0.15,
            depth: 5.0,
            floor: 0.4,
            curvature: 0.9,
            optimum3: 0.7,
            optimum4: 0.3,
            slope1: 0.15,
        }
    }
}

/// `base + c1·(u1 − optimum1)² + c2·u2 + c6·(1 − u6) + c34·u3·u4 + c5·input5/49`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Output3Coefficients {
    pub base: f64,
    pub input1: f64,
    pub optimum1: f64,
    pub input2: f64,
    pub input6: f64,
    pub input34: f64,
    pub input5: f64,
}

impl Default for Output3Coefficients {
    fn default() -> Self {
        Output3Coefficients {
            base: 2.0,
            input1: 0.8,
            optimum1: 0.4,
            input2: 0.6,
            input6: 0.5,
            input34: 0.3,
            input5: 0.2,
        }
    }
}

/// Complete parameterization of the synthetic sensor. Serialized as TOML so a
/// dataset can be regenerated from `(config, seed)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorGroundTruth {
    pub seed: u64,
    /// Standard deviation of additive Gaussian SNR noise, dB. Zero disables it.
    pub noise_db: f64,
    /// Range used to normalize each tunable input to [0, 1].
    pub input_min: [f64; 5],
    pub input_max: [f64; 5],
    pub signal: SignalCoefficients,
    pub dip: DipCoefficients,
    pub output3: Output3Coefficients,
}

impl Default for SensorGroundTruth {
    fn default() -> Self {
        let bounds = GridSpec::full_factorial().bounds();
        SensorGroundTruth {
            seed: 0,
            noise_db: 0.0,
            input_min: bounds.map(|b| b.0),
            input_max: bounds.map(|b| b.1),
            signal: SignalCoefficients::default(),
            dip: DipCoefficients::default(),
            output3: Output3Coefficients::default(),
        }
    }
}

impl SensorGroundTruth {
    pub fn with_seed(seed: u64) -> Self {
        SensorGroundTruth {
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..5 {
            if !(self.input_max[i] > self.input_min[i]) {
                return Err(Error::Config(format!(
                    "{}: input_max must exceed input_min",
                    INPUT_NAMES[i]
                )));
            }
        }
        if !(self.dip.width > 0.0) || !(self.dip.center > 0.0) {
            return Err(Error::Config("dip center and width must be positive".into()));
        }
        if !(self.noise_db >= 0.0) {
            return Err(Error::Config("noise_db must be >= 0".into()));
        }
        Ok(())
    }

    fn normalized(&self, s: &SettingsCombination) -> [f64; 5] {
        let v = s.to_array();
        std::array::from_fn(|i| (v[i] - self.input_min[i]) / (self.input_max[i] - self.input_min[i]))
    }

    /// Depth of the SNR dip for `s`, dB.
    pub fn dip_depth(&self, s: &SettingsCombination) -> f64 {
        let u = self.normalized(s);
        let d = &self.dip;
        d.depth
            * (d.floor
                + d.curvature * ((u[2] - d.optimum3).powi(2) + (u[3] - d.optimum4).powi(2))
                + d.slope1 * u[0])
    }

    /// log10 of the dip center (AU) for `s`.
    pub fn dip_center_log10(&self, s: &SettingsCombination) -> f64 {
        let u = self.normalized(s);
        self.dip.center.log10() + self.dip.center_shift_input6 * (u[4] - 0.5)
    }

    /// Dip term subtracted from the log-linear trend at `signal`.
    pub fn dip_profile(&self, s: &SettingsCombination, signal: f64) -> f64 {
        let x = (signal.log10() - self.dip_center_log10(s)) / self.dip.width;
        self.dip_depth(s) * (-0.5 * x * x).exp()
    }

    pub fn signal_log10(&self, s: &SettingsCombination, input5: u32, category: usize) -> f64 {
        let u = self.normalized(s);
        let c = &self.signal;
        let offset = c.offset + c.offset_per_category * category as f64 + c.offset_input1 * u[0];
        let growth = c.growth + c.growth_input2 * u[1] + c.growth_input6 * u[4];
        offset + growth * input5 as f64
    }

    pub fn output3_value(&self, s: &SettingsCombination, input5: u32) -> f64 {
        let u = self.normalized(s);
        let c = &self.output3;
        c.base
            + c.input1 * (u[0] - c.optimum1).powi(2)
            + c.input2 * u[1]
            + c.input6 * (1.0 - u[4])
            + c.input34 * u[2] * u[3]
            + c.input5 * input5 as f64 / INPUT5_MAX as f64
    }

    /// One sensor reading. Pure in `(self, s, input5, category)`.
    pub fn simulate(
        &self,
        s: &SettingsCombination,
        input5: u32,
        category: usize,
    ) -> Result<SensorReading> {
        if input5 > INPUT5_MAX {
            return Err(Error::Domain(format!("input5 = {input5} outside [0, {INPUT5_MAX}]")));
        }
        if category >= CATEGORIES {
            return Err(Error::Domain(format!(
                "category = {category} outside [0, {}]",
                CATEGORIES - 1
            )));
        }
        let signal = 10f64.powf(self.signal_log10(s, input5, category));
        let mut snr = 5.0 * signal.log10() - self.dip_profile(s, signal);
        if self.noise_db > 0.0 {
            snr += self.noise(s, input5, category);
        }
        Ok(SensorReading {
            signal,
            snr,
            output3: self.output3_value(s, input5),
        })
    }

    fn noise(&self, s: &SettingsCombination, input5: u32, category: usize) -> f64 {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        for v in s.to_array() {
            h.update(v.to_bits().to_le_bytes());
        }
        h.update(input5.to_le_bytes());
        h.update((category as u64).to_le_bytes());
        let digest = h.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        let mut rng = ChaCha8Rng::from_seed(seed);
        Normal::new(0.0, self.noise_db)
            .expect("noise_db validated non-negative")
            .sample(&mut rng)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("ground truth serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let truth: Self =
            toml::from_str(text).map_err(|e| Error::Config(format!("oracle config: {e}")))?;
        truth.validate()?;
        Ok(truth)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// The 200 rows of one combination: Input5 major, category minor.
    pub fn combination_rows(&self, s: &SettingsCombination) -> Vec<SampleRow> {
        let mut rows = Vec::with_capacity(ROWS_PER_COMBINATION);
        for input5 in 0..INPUT5_STEPS {
            for category in 0..CATEGORIES {
                let r = self
                    .simulate(s, input5, category)
                    .expect("input5 and category are in range");
                rows.push(SampleRow {
                    input1: s.input1,
                    input2: s.input2,
                    input3: s.input3,
                    input4: s.input4,
                    input5,
                    input6: s.input6,
                    category,
                    signal: r.signal,
                    snr: r.snr,
                    output3: r.output3,
                });
            }
        }
        rows
    }
}

/// Full factorial dataset: combination-major, then Input5, then category.
pub fn generate_dataset(
    truth: &SensorGroundTruth,
    spec: &GridSpec,
    exec: Exec,
) -> Result<Vec<SampleRow>> {
    truth.validate()?;
    let combos = enumerate_grid(spec)?;
    let blocks = exec.map(&combos, |s| truth.combination_rows(s));
    Ok(blocks.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single() -> GridSpec {
        GridSpec::full_factorial().subsample(1).unwrap()
    }

    #[test]
    fn full_factorial_enumeration() {
        let combos = enumerate_grid(&GridSpec::full_factorial()).unwrap();
        assert_eq!(combos.len(), 3125);
        assert_eq!(combos[0].to_array(), [418.0, 112.0, 400.0, 2850.0, 3200.0]);
        assert_eq!(combos[3124].to_array(), [510.0, 144.0, 500.0, 3650.0, 4000.0]);
        assert!(combos
            .windows(2)
            .all(|w| w[0].lex_cmp(&w[1]) != Ordering::Greater));
    }

    #[test]
    fn degenerate_grid() {
        assert_eq!(enumerate_grid(&single()).unwrap().len(), 1);
    }

    #[test]
    fn malformed_grid_rejected() {
        let mut spec = GridSpec::full_factorial();
        spec.values[2].pop();
        assert!(matches!(enumerate_grid(&spec), Err(Error::Config(_))));
        let mut spec = GridSpec::full_factorial();
        spec.values[0] = vec![];
        assert!(matches!(enumerate_grid(&spec), Err(Error::Config(_))));
    }

    #[test]
    fn scaled_grid_keeps_endpoints() {
        let g = GridSpec::scaled(0.2).unwrap();
        assert_eq!(g.values[0], vec![418.0, 510.0]);
        assert_eq!(g.values[4], vec![3200.0, 4000.0]);
        assert_eq!(GridSpec::scaled(1.0).unwrap(), GridSpec::full_factorial());
        assert!(GridSpec::scaled(0.0).is_err());
    }

    #[test]
    fn simulate_rejects_out_of_range() {
        let t = SensorGroundTruth::default();
        let s = enumerate_grid(&single()).unwrap()[0];
        assert!(matches!(t.simulate(&s, 50, 0), Err(Error::Domain(_))));
        assert!(matches!(t.simulate(&s, 0, 4), Err(Error::Domain(_))));
    }

    #[test]
    fn dip_center_reading_matches_closed_form() {
        let t = SensorGroundTruth::default();
        let s = SettingsCombination::from_array([430.0, 120.0, 485.0, 2900.0, 3525.0]);
        // A signal placed exactly at the dip center: gauss(0) = 1.
        let center = 10f64.powf(t.dip_center_log10(&s));
        let snr = 5.0 * center.log10() - t.dip_profile(&s, center);
        assert!((snr - (5.0 * center.log10() - t.dip_depth(&s))).abs() < 1e-12);
    }

    #[test]
    fn unit_signal_gives_zero_snr() {
        let mut t = SensorGroundTruth::default();
        t.signal.offset = 0.0;
        t.signal.offset_input1 = 0.0;
        let s = enumerate_grid(&single()).unwrap()[0];
        let r = t.simulate(&s, 0, 0).unwrap();
        assert_eq!(r.signal, 1.0);
        assert!(r.snr.abs() < 1e-9);
    }

    #[test]
    fn deterministic_with_noise() {
        let t = SensorGroundTruth {
            noise_db: 0.3,
            seed: 9,
            ..Default::default()
        };
        let s = enumerate_grid(&GridSpec::full_factorial()).unwrap()[77];
        assert_eq!(t.simulate(&s, 13, 2).unwrap(), t.simulate(&s, 13, 2).unwrap());
        let other = SensorGroundTruth { seed: 10, ..t.clone() };
        assert_ne!(t.simulate(&s, 13, 2).unwrap(), other.simulate(&s, 13, 2).unwrap());
    }

    #[test]
    fn small_dataset_sizes() {
        let t = SensorGroundTruth::default();
        assert_eq!(generate_dataset(&t, &single(), Exec::Sequential).unwrap().len(), 200);
        let two = GridSpec::full_factorial().subsample(2).unwrap();
        assert_eq!(generate_dataset(&t, &two, Exec::Sequential).unwrap().len(), 6400);
    }

    #[test]
    fn paper_like_ranges() {
        let t = SensorGroundTruth::default();
        let combos = enumerate_grid(&GridSpec::full_factorial()).unwrap();
        let depths: Vec<f64> = combos.iter().map(|s| t.dip_depth(s)).collect();
        let lo = depths.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = depths.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo > 1.0 && hi < 9.0 && hi - lo > 2.0, "{lo} {hi}");
        for s in &combos {
            let rows = t.combination_rows(s);
            assert!(rows.iter().all(|r| r.signal >= 1.0 && r.output3 > 0.0));
            let in_window = rows.iter().filter(|r| (3e3..=1e4).contains(&r.signal)).count();
            assert!(in_window >= 8, "{in_window}");
        }
    }

    #[test]
    fn toml_round_trip() {
        let t = SensorGroundTruth {
            seed: 42,
            noise_db: 0.25,
            ..Default::default()
        };
        assert_eq!(SensorGroundTruth::from_toml(&t.to_toml()).unwrap(), t);
        let partial = SensorGroundTruth::from_toml("seed = 5\n[dip]\ndepth = 6.0\n").unwrap();
        assert_eq!(partial.seed, 5);
        assert_eq!(partial.dip.depth, 6.0);
        assert_eq!(partial.dip.width, DipCoefficients::default().width);
    }
}
