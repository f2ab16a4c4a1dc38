//! Signal/SNR curve analysis and the four selection criteria.
//!
//! * c1: MAE between the ideal SNR `5·log10(signal)` and the curve.
//! * c2: prominence of the SNR dip inside [3e3, 1e4] AU, measured below the
//!   line fitted to the low-signal part of the curve.
//! * c3: MAE between that fitted line (extrapolated) and the curve.
//! * c4: mean Output3 over the curve's rows.

use std::io::Write;
use std::path::Path;

use crate::dataset::fmt_f64;
use crate::sensor::SettingsCombination;
use crate::{Error, Result};

/// The line is fitted to points with signal strictly below this, AU.
pub const FIT_BOUND: f64 = 2e3;
/// Signal window searched for the dip, AU, inclusive.
pub const DIP_WINDOW: (f64, f64) = (3e3, 1e4);

/// `10·log10(√signal)`, i.e. `5·log10(signal)`, in dB.
pub fn ideal_snr(signal: f64) -> Result<f64> {
    if !(signal > 0.0) {
        return Err(Error::Domain(format!("signal {signal} is not positive")));
    }
    Ok(5.0 * signal.log10())
}

/// Points of one settings combination, sorted by ascending signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub settings: SettingsCombination,
    pub signal: Vec<f64>,
    pub snr: Vec<f64>,
    pub output3: Vec<f64>,
}

impl Curve {
    /// Builds a curve from `(signal, snr, output3)` points in any order.
    pub fn new(settings: SettingsCombination, mut points: Vec<(f64, f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Domain("curve has no points".into()));
        }
        if let Some(p) = points.iter().find(|p| !(p.0 > 0.0) || !p.1.is_finite() || !p.2.is_finite()) {
            return Err(Error::Domain(format!("invalid curve point {p:?}")));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Curve {
            settings,
            signal: points.iter().map(|p| p.0).collect(),
            snr: points.iter().map(|p| p.1).collect(),
            output3: points.iter().map(|p| p.2).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.signal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signal.is_empty()
    }

    /// `signal, snr_pred, snr_ideal, snr_line`
    pub fn write_csv_to<W: Write>(&self, line: Option<&FittedLine>, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["signal", "snr_pred", "snr_ideal", "snr_line"])?;
        for (s, snr) in self.signal.iter().zip(&self.snr) {
            w.write_record([
                fmt_f64(*s),
                fmt_f64(*snr),
                fmt_f64(5.0 * s.log10()),
                line.map(|l| fmt_f64(l.eval(*s))).unwrap_or_default(),
            ])?;
        }
        w.flush()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let line = fit_line(self).ok();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(line.as_ref(), std::io::BufWriter::new(f))
            .map_err(|e| Error::io(path, e))
    }
}

/// `snr = intercept + slope·log10(signal)`; slope in dB per decade.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FittedLine {
    pub slope: f64,
    pub intercept: f64,
    pub bound: f64,
}

impl FittedLine {
    pub fn eval(&self, signal: f64) -> f64 {
        self.intercept + self.slope * signal.log10()
    }
}

/// Ordinary least squares of SNR on log10(signal) over points below
/// [`FIT_BOUND`].
pub fn fit_line(curve: &Curve) -> Result<FittedLine> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = curve
        .signal
        .iter()
        .zip(&curve.snr)
        .filter(|(s, _)| **s < FIT_BOUND)
        .map(|(s, y)| (s.log10(), *y))
        .unzip();
    let n = xs.len();
    let fit_err = Error::Fit {
        bound: FIT_BOUND,
        found: n,
    };
    if n < 2 {
        return Err(fit_err);
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if !(sxx > 0.0) {
        return Err(fit_err);
    }
    let slope = sxy / sxx;
    Ok(FittedLine {
        slope,
        intercept: my - slope * mx,
        bound: FIT_BOUND,
    })
}

/// Largest drop of the curve below `line` among points whose signal lies in
/// `window` (inclusive), floored at 0. `None` if no point is in the window.
pub fn prominence(curve: &Curve, line: &FittedLine, window: (f64, f64)) -> Option<f64> {
    curve
        .signal
        .iter()
        .zip(&curve.snr)
        .filter(|(s, _)| **s >= window.0 && **s <= window.1)
        .map(|(s, y)| line.eval(*s) - y)
        .reduce(f64::max)
        .map(|d| d.max(0.0))
}

/// Mean absolute error.
pub fn mae(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Shape(format!("mae of series with lengths {} and {}", a.len(), b.len())));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriteriaValues {
    /// MAE ideal vs curve, dB.
    pub c1: f64,
    /// Dip prominence, dB; `None` when the curve has no point in the window.
    pub c2: Option<f64>,
    /// MAE fitted line vs curve, dB.
    pub c3: f64,
    /// Mean Output3.
    pub c4: f64,
}

impl CriteriaValues {
    /// Value of criterion `k` (0-based), if defined.
    pub fn get(&self, k: usize) -> Option<f64> {
        match k {
            0 => Some(self.c1),
            1 => self.c2,
            2 => Some(self.c3),
            3 => Some(self.c4),
            _ => None,
        }
    }
}

pub fn criteria(curve: &Curve) -> Result<CriteriaValues> {
    let ideal = curve.signal.iter().map(|s| ideal_snr(*s)).collect::<Result<Vec<_>>>()?;
    let line = fit_line(curve)?;
    let line_vals: Vec<f64> = curve.signal.iter().map(|s| line.eval(*s)).collect();
    Ok(CriteriaValues {
        c1: mae(&ideal, &curve.snr)?,
        c2: prominence(curve, &line, DIP_WINDOW),
        c3: mae(&line_vals, &curve.snr)?,
        c4: curve.output3.iter().sum::<f64>() / curve.len() as f64,
    })
}
