//! Tabular rows, network encodings, partitioning and CSV I/O.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::sensor::{SettingsCombination, CATEGORIES, INPUT5_MAX};
use crate::{Error, Result};

pub const INPUT_DIM: usize = 10;
pub const OUTPUT_DIM: usize = 3;
pub const NUMERIC_INPUTS: usize = 6;

pub const CSV_HEADER: [&str; 10] = [
    "input1", "input2", "input3", "input4", "input5", "input6", "category", "signal", "snr",
    "output3",
];

pub const OUTPUT_NAMES: [&str; 3] = ["signal", "snr", "output3"];

/// One sensor experiment: six numeric inputs, the categorical input and the
/// three recorded outputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleRow {
    pub input1: f64,
    pub input2: f64,
    pub input3: f64,
    pub input4: f64,
    pub input5: u32,
    pub input6: f64,
    pub category: usize,
    pub signal: f64,
    pub snr: f64,
    pub output3: f64,
}

impl SampleRow {
    pub fn settings(&self) -> SettingsCombination {
        SettingsCombination {
            input1: self.input1,
            input2: self.input2,
            input3: self.input3,
            input4: self.input4,
            input6: self.input6,
        }
    }

    /// Numeric inputs in network order: Input1-4, Input5, Input6.
    pub fn numeric_inputs(&self) -> [f64; NUMERIC_INPUTS] {
        [
            self.input1,
            self.input2,
            self.input3,
            self.input4,
            self.input5 as f64,
            self.input6,
        ]
    }

    pub fn outputs(&self) -> [f64; OUTPUT_DIM] {
        [self.signal, self.snr, self.output3]
    }
}

/// Per-column maxima used to scale network inputs and targets into [0, 1].
/// The signal target is `log10(signal) / output_max[0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationSpec {
    pub input_max: [f64; NUMERIC_INPUTS],
    pub output_max: [f64; OUTPUT_DIM],
    pub log_base: f64,
}

impl NormalizationSpec {
    /// Maxima of `rows`, after the signal log transform.
    pub fn fit<'a, I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a SampleRow>,
    {
        let mut input_max = [f64::NEG_INFINITY; NUMERIC_INPUTS];
        let mut output_max = [f64::NEG_INFINITY; OUTPUT_DIM];
        let mut n = 0usize;
        for row in rows {
            if !(row.signal > 0.0) {
                return Err(Error::Domain(format!("signal {} is not positive", row.signal)));
            }
            for (m, v) in input_max.iter_mut().zip(row.numeric_inputs()) {
                *m = m.max(v);
            }
            let out = [row.signal.log10(), row.snr, row.output3];
            for (m, v) in output_max.iter_mut().zip(out) {
                *m = m.max(v);
            }
            n += 1;
        }
        if n == 0 {
            return Err(Error::Config("cannot fit normalization on an empty table".into()));
        }
        let spec = NormalizationSpec {
            input_max,
            output_max,
            log_base: 10.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_max.iter().chain(&self.output_max).any(|m| !(*m > 0.0 && m.is_finite())) {
            return Err(Error::Config(format!(
                "normalization maxima must be positive and finite: {:?} {:?}",
                self.input_max, self.output_max
            )));
        }
        if self.log_base != 10.0 {
            return Err(Error::Config(format!(
                "unsupported signal log base {}",
                self.log_base
            )));
        }
        Ok(())
    }

    /// Encodes one settings combination at a given Input5 step and category.
    pub fn encode_settings(
        &self,
        s: &SettingsCombination,
        input5: u32,
        category: usize,
    ) -> Result<[f64; INPUT_DIM]> {
        if category >= CATEGORIES {
            return Err(Error::Domain(format!("category {category} out of range")));
        }
        if input5 > INPUT5_MAX {
            return Err(Error::Domain(format!("input5 {input5} out of range")));
        }
        let numeric = [s.input1, s.input2, s.input3, s.input4, input5 as f64, s.input6];
        let mut out = [0.0; INPUT_DIM];
        for (i, (v, m)) in numeric.iter().zip(&self.input_max).enumerate() {
            if !(*v >= 0.0 && *v <= *m) {
                return Err(Error::Range(format!(
                    "{} = {v} outside [0, {m}]",
                    NUMERIC_INPUT_NAMES[i]
                )));
            }
            out[i] = v / m;
        }
        out[NUMERIC_INPUTS + category] = 1.0;
        Ok(out)
    }

    pub fn encode_inputs(&self, row: &SampleRow) -> Result<[f64; INPUT_DIM]> {
        self.encode_settings(&row.settings(), row.input5, row.category)
    }

    pub fn encode_outputs(&self, row: &SampleRow) -> Result<[f64; OUTPUT_DIM]> {
        if !(row.signal > 0.0) {
            return Err(Error::Domain(format!("signal {} is not positive", row.signal)));
        }
        Ok([
            row.signal.log10() / self.output_max[0],
            row.snr / self.output_max[1],
            row.output3 / self.output_max[2],
        ])
    }

    /// Inverse of [`encode_outputs`](Self::encode_outputs): `(signal, snr, output3)`.
    pub fn decode_outputs(&self, v: &[f64]) -> (f64, f64, f64) {
        (
            10f64.powf(v[0] * self.output_max[0]),
            v[1] * self.output_max[1],
            v[2] * self.output_max[2],
        )
    }
}

const NUMERIC_INPUT_NAMES: [&str; NUMERIC_INPUTS] =
    ["input1", "input2", "input3", "input4", "input5", "input6"];

/// Encoded inputs and targets for a set of rows, stored row-major.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EncodedTable {
    pub inputs: Vec<[f64; INPUT_DIM]>,
    pub targets: Vec<[f64; OUTPUT_DIM]>,
}

impl EncodedTable {
    pub fn encode<'a, I>(rows: I, norm: &NormalizationSpec) -> Result<Self>
    where
        I: IntoIterator<Item = &'a SampleRow>,
    {
        let mut t = EncodedTable::default();
        for row in rows {
            t.inputs.push(norm.encode_inputs(row)?);
            t.targets.push(norm.encode_outputs(row)?);
        }
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Partition {
    Train,
    Validation,
    Test,
}

pub const TRAIN_PERCENT: usize = 81;
pub const VALIDATION_PERCENT: usize = 9;
pub const TEST_PERCENT: usize = 10;

/// Seeded 81/9/10 partition of `0..n` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitAssignment {
    pub seed: u64,
    pub labels: Vec<Partition>,
}

impl SplitAssignment {
    pub fn indices(&self, which: Partition) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, p)| **p == which)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn count(&self, which: Partition) -> usize {
        self.labels.iter().filter(|p| **p == which).count()
    }

    pub fn select<'a>(
        &self,
        rows: &'a [SampleRow],
        which: Partition,
    ) -> impl Iterator<Item = &'a SampleRow> + 'a {
        let labels = self.labels.clone();
        rows.iter()
            .zip(labels)
            .filter(move |(_, p)| *p == which)
            .map(|(r, _)| r)
    }
}

/// Shuffles `0..n_rows` with `seed`, then gives the first ⌊0.81n⌋ positions to
/// training, the next ⌊0.09n⌋ to validation and the rest to test.
pub fn split(n_rows: usize, seed: u64) -> Result<SplitAssignment> {
    if n_rows < 10 {
        return Err(Error::Config(format!("need at least 10 rows to split, got {n_rows}")));
    }
    let n_train = n_rows * TRAIN_PERCENT / 100;
    let n_val = n_rows * VALIDATION_PERCENT / 100;
    let mut order: Vec<usize> = (0..n_rows).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut labels = vec![Partition::Test; n_rows];
    for (pos, &row) in order.iter().enumerate() {
        labels[row] = if pos < n_train {
            Partition::Train
        } else if pos < n_train + n_val {
            Partition::Validation
        } else {
            Partition::Test
        };
    }
    Ok(SplitAssignment { seed, labels })
}

/// Float with 17 significant digits.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv_to<W: Write>(rows: &[SampleRow], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            fmt_f64(r.input1),
            fmt_f64(r.input2),
            fmt_f64(r.input3),
            fmt_f64(r.input4),
            r.input5.to_string(),
            fmt_f64(r.input6),
            r.category.to_string(),
            fmt_f64(r.signal),
            fmt_f64(r.snr),
            fmt_f64(r.output3),
        ])?;
    }
    w.flush()
}

pub fn write_csv(rows: &[SampleRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(rows, std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn read_csv_from<R: Read>(input: R, path: &Path) -> Result<Vec<SampleRow>> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = rdr.records();
    match records.next() {
        None => return Err(parse_err(1, "missing header".into())),
        Some(Err(e)) => return Err(parse_err(1, e.to_string())),
        Some(Ok(h)) => {
            if h.iter().ne(CSV_HEADER.iter().copied()) {
                return Err(parse_err(
                    1,
                    format!("expected header {}", CSV_HEADER.join(",")),
                ));
            }
        }
    }
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != CSV_HEADER.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", CSV_HEADER.len(), rec.len()),
            ));
        }
        let f = |i: usize| -> Result<f64> {
            rec[i]
                .trim()
                .parse::<f64>()
                .map_err(|e| parse_err(line, format!("{}: {e}", CSV_HEADER[i])))
        };
        let u = |i: usize| -> Result<u64> {
            rec[i]
                .trim()
                .parse::<u64>()
                .map_err(|e| parse_err(line, format!("{}: {e}", CSV_HEADER[i])))
        };
        let row = SampleRow {
            input1: f(0)?,
            input2: f(1)?,
            input3: f(2)?,
            input4: f(3)?,
            input5: u(4)? as u32,
            input6: f(5)?,
            category: u(6)? as usize,
            signal: f(7)?,
            snr: f(8)?,
            output3: f(9)?,
        };
        if row.category >= CATEGORIES {
            return Err(parse_err(line, format!("category {} out of range", row.category)));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_csv(path: &Path) -> Result<Vec<SampleRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv_from(std::io::BufReader::new(file), path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(nums: [f64; 6], category: usize, outputs: [f64; 3]) -> SampleRow {
        SampleRow {
            input1: nums[0],
            input2: nums[1],
            input3: nums[2],
            input4: nums[3],
            input5: nums[4] as u32,
            input6: nums[5],
            category,
            signal: outputs[0],
            snr: outputs[1],
            output3: outputs[2],
        }
    }

    fn norm() -> NormalizationSpec {
        NormalizationSpec {
            input_max: [510.0, 144.0, 500.0, 3650.0, 49.0, 4000.0],
            output_max: [5.0, 25.0, 3.5],
            log_base: 10.0,
        }
    }

    #[test]
    fn encode_max_and_zero_rows() {
        let n = norm();
        let top = row([510.0, 144.0, 500.0, 3650.0, 49.0, 4000.0], 0, [1e5, 25.0, 3.5]);
        assert_eq!(
            n.encode_inputs(&top).unwrap(),
            [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(n.encode_outputs(&top).unwrap(), [1.0, 1.0, 1.0]);
        let zero = row([0.0; 6], 3, [1.0, 0.0, 1.0]);
        assert_eq!(
            n.encode_inputs(&zero).unwrap(),
            [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]
        );
        assert_eq!(n.encode_outputs(&zero).unwrap()[0], 0.0);
    }

    #[test]
    fn encode_half_and_errors() {
        let n = norm();
        let mut r = row([255.0, 1.0, 1.0, 1.0, 1.0, 1.0], 1, [10.0, 1.0, 1.0]);
        assert_eq!(n.encode_inputs(&r).unwrap()[0], 0.5);
        r.input3 = 501.0;
        assert!(matches!(n.encode_inputs(&r), Err(Error::Range(_))));
        r.input3 = 1.0;
        r.signal = 0.0;
        assert!(matches!(n.encode_outputs(&r), Err(Error::Domain(_))));
    }

    #[test]
    fn decode_edges() {
        let n = norm();
        assert_eq!(n.decode_outputs(&[0.0, 0.3, 0.2]).0, 1.0);
        assert_eq!(n.decode_outputs(&[1.0, 1.0, 1.0]), (1e5, 25.0, 3.5));
    }

    #[test]
    fn fit_has_exact_one_per_column() {
        let rows = vec![
            row([418.0, 112.0, 400.0, 2850.0, 0.0, 3200.0], 0, [2.0, 1.0, 2.1]),
            row([510.0, 144.0, 500.0, 3650.0, 49.0, 4000.0], 3, [1e4, 18.0, 2.9]),
        ];
        let n = NormalizationSpec::fit(&rows).unwrap();
        let enc = EncodedTable::encode(&rows, &n).unwrap();
        for col in 0..NUMERIC_INPUTS {
            assert!(enc.inputs.iter().any(|x| x[col] == 1.0));
        }
        for col in 0..OUTPUT_DIM {
            assert!(enc.targets.iter().any(|y| y[col] == 1.0));
        }
        assert!(NormalizationSpec::fit(&[]).is_err());
    }

    #[test]
    fn split_sizes() {
        let s = split(625_000, 1).unwrap();
        assert_eq!(s.count(Partition::Train), 506_250);
        assert_eq!(s.count(Partition::Validation), 56_250);
        assert_eq!(s.count(Partition::Test), 62_500);
        let s = split(100, 3).unwrap();
        assert_eq!(
            (s.count(Partition::Train), s.count(Partition::Validation), s.count(Partition::Test)),
            (81, 9, 10)
        );
        assert_eq!(split(100, 3).unwrap(), s);
        assert_ne!(split(100, 4).unwrap(), s);
        assert!(matches!(split(9, 0), Err(Error::Config(_))));
    }

    #[test]
    fn csv_header_only_and_bad_rows() {
        let p = Path::new("mem.csv");
        let header = format!("{}\n", CSV_HEADER.join(","));
        assert!(read_csv_from(header.as_bytes(), p).unwrap().is_empty());

        let bad = format!("{header}1,2,3,4,5,6,0,1,2,3\n1,2,3\n");
        match read_csv_from(bad.as_bytes(), p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let bad = format!("{header}1,2,3,4,5,6,0,x,2,3\n");
        match read_csv_from(bad.as_bytes(), p) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("signal"));
            }
            other => panic!("{other:?}"),
        }
    }

    fn arb_row() -> impl Strategy<Value = SampleRow> {
        (
            prop::array::uniform6(0.0..1.0f64),
            0usize..4,
            -6.0..6.0f64,
            -50.0..50.0f64,
            1e-3..10.0f64,
        )
            .prop_map(|(u, category, lsig, snr, o3)| {
                row(
                    [u[0] * 510.0, u[1] * 144.0, u[2] * 500.0, u[3] * 3650.0, (u[4] * 49.0).floor(), u[5] * 4000.0],
                    category,
                    [10f64.powf(lsig), snr, o3],
                )
            })
    }

    proptest! {
        #[test]
        fn csv_round_trip(rows in prop::collection::vec(arb_row(), 0..60)) {
            let mut buf = Vec::new();
            write_csv_to(&rows, &mut buf).unwrap();
            let back = read_csv_from(buf.as_slice(), Path::new("mem.csv")).unwrap();
            prop_assert_eq!(back, rows);
        }

        #[test]
        fn encode_decode_inverse(r in arb_row()) {
            let n = NormalizationSpec { output_max: [6.0, 50.0, 10.0], ..norm() };
            let (s, snr, o3) = n.decode_outputs(&n.encode_outputs(&r).unwrap());
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
            prop_assert!(rel(s, r.signal) < 1e-12);
            prop_assert!((snr - r.snr).abs() <= 1e-12 * r.snr.abs().max(1e-300));
            prop_assert!(rel(o3, r.output3) < 1e-12);
        }

        #[test]
        fn split_is_exhaustive_partition(n in 10usize..2000, seed in any::<u64>()) {
            let s = split(n, seed).unwrap();
            prop_assert_eq!(s.labels.len(), n);
            let (a, b, c) = (s.count(Partition::Train), s.count(Partition::Validation), s.count(Partition::Test));
            prop_assert_eq!(a + b + c, n);
            prop_assert_eq!(a, n * 81 / 100);
            prop_assert_eq!(b, n * 9 / 100);
            prop_assert!((c as f64 - 0.10 * n as f64).abs() <= 2.0);
        }
    }
}
