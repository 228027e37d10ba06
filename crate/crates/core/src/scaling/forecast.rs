//! Demand forecasters. Seasonal-naive is the reference model; anything that
//! implements [`Forecaster`] can be plugged into the meta-scaler.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecasterKind {
    SeasonalNaive,
    #[default]
    None,
}

/// Predicted requests/second, one value per future tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ForecastSeries(Vec<f64>);

impl ForecastSeries {
    pub fn new(values: Vec<f64>) -> Self {
        ForecastSeries(values.into_iter().map(|v| v.max(0.0)).collect())
    }

    pub fn zeros(horizon: usize) -> Self {
        ForecastSeries(vec![0.0; horizon])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Peak over the first `n` values.
    pub fn peak(&self, n: usize) -> f64 {
        self.0.iter().take(n).copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForecastWarning {
    /// Fewer observations than one season; fell back to persistence.
    InsufficientHistory { needed: usize, got: usize },
    /// No dominant period found in the history; fell back to persistence.
    NoSeasonDetected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub series: ForecastSeries,
    pub warning: Option<ForecastWarning>,
}

pub trait Forecaster {
    fn forecast(&self, history: &[f64], horizon: usize) -> Forecast;
}

/// Always predicts zero demand, reducing fusion to the reactive signal.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoForecast;

impl Forecaster for NoForecast {
    fn forecast(&self, _history: &[f64], horizon: usize) -> Forecast {
        Forecast {
            series: ForecastSeries::zeros(horizon),
            warning: None,
        }
    }
}

/// Repeats the observation one season earlier.
#[derive(Debug, Clone, Copy, Default)]
pub struct SeasonalNaive {
    /// Season length in ticks; `None` detects it from the history.
    pub season: Option<usize>,
}

impl SeasonalNaive {
    pub fn with_season(season: usize) -> Self {
        SeasonalNaive { season: Some(season) }
    }
}

impl Forecaster for SeasonalNaive {
    fn forecast(&self, history: &[f64], horizon: usize) -> Forecast {
        let season = match self.season {
            Some(m) => m.max(1),
            None => match detect_period(history) {
                Some(m) => m,
                None => {
                    return Forecast {
                        series: persistence(history, horizon),
                        warning: Some(ForecastWarning::NoSeasonDetected),
                    }
                }
            },
        };
        let n = history.len();
        if n < season {
            return Forecast {
                series: persistence(history, horizon),
                warning: Some(ForecastWarning::InsufficientHistory { needed: season, got: n }),
            };
        }
        let values = (1..=horizon)
            .map(|h| {
                let back = season * ((h - 1) / season + 1);
                history[n + h - 1 - back]
            })
            .collect();
        Forecast {
            series: ForecastSeries::new(values),
            warning: None,
        }
    }
}

/// Last observed value repeated; zeros for an empty history.
pub fn persistence(history: &[f64], horizon: usize) -> ForecastSeries {
    let last = history.last().copied().unwrap_or(0.0);
    ForecastSeries::new(vec![last; horizon])
}

/// Dominant period by autocorrelation.
///
/// Skips the initial decay of the ACF (up to its first local minimum) and
/// returns the lag with the highest correlation among lags up to `n / 2`,
/// provided that correlation exceeds 0.5.
pub fn detect_period(history: &[f64]) -> Option<usize> {
    let n = history.len();
    if n < 4 {
        return None;
    }
    let mean = history.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = history.iter().map(|v| v - mean).collect();
    let var: f64 = dev.iter().map(|d| d * d).sum();
    if var <= f64::EPSILON {
        return None;
    }
    let max_lag = n / 2;
    let acf: Vec<f64> = (0..=max_lag)
        .map(|lag| dev[lag..].iter().zip(&dev).map(|(a, b)| a * b).sum::<f64>() / var)
        .collect();
    let start = (1..max_lag).find(|&l| acf[l] <= acf[l + 1])?;
    let (lag, r) =
        acf.iter().enumerate().skip(start).fold(
            (0, f64::MIN),
            |best, (l, &r)| if r > best.1 + 1e-12 { (l, r) } else { best },
        );
    (lag > 0 && r > 0.5).then_some(lag)
}
