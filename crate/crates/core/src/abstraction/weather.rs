//! The rain/humidity model and its grid abstraction.
//!
//! The state is `(r, h)` with `r ∈ {0, 1}` (rain today) and `h ∈ [0, 1)`
//! (humidity). Tomorrow it rains with probability `1/4 + 3/4·h` if it rains
//! today and `3/4·h` otherwise. Given tomorrow's rain, tomorrow's humidity
//! is uniform on `[0, (1 + h)/2)` if it rains and on `[h/2, 1)` if not.

use serde::Serialize;

use super::quadrature::{integrate_1d, Quadrature};
use super::{build_abstract, ContinuousModel, Domain, Partition, Point};
use crate::error::{Error, Result};
use crate::lmc::{FiniteLmc, Observation};
use crate::ltl::{self, Formula};
use crate::traces::bisim_bound;

/// Two consecutive rainy days within the next three.
pub const TWO_RAINY_DAYS: &str = "((X rain) & (X X rain)) | ((X X rain) & (X X X rain))";

/// Quadrature tolerance for the analytic reference values.
pub const ANALYTIC_TOL: f64 = 1e-7;

#[derive(Clone, Debug)]
pub struct WeatherModel {
    domain: Domain,
    ap: Vec<String>,
}

impl Default for WeatherModel {
    fn default() -> Self {
        Self::new()
    }
}

impl WeatherModel {
    pub fn new() -> Self {
        WeatherModel {
            domain: Domain::new(vec![0.0], vec![1.0], 2).expect("static domain"),
            ap: vec!["rain".to_string()],
        }
    }

    pub fn rain_probability(r: usize, h: f64) -> f64 {
        if r == 1 {
            0.25 + 0.75 * h
        } else {
            0.75 * h
        }
    }

    /// Support of tomorrow's humidity given tomorrow's rain.
    pub fn humidity_support(h: f64, rain_next: usize) -> (f64, f64) {
        if rain_next == 1 {
            (0.0, (1.0 + h) / 2.0)
        } else {
            (h / 2.0, 1.0)
        }
    }
}

/// `weather_concrete()` in the functional style used elsewhere.
pub fn weather_concrete() -> WeatherModel {
    WeatherModel::new()
}

impl ContinuousModel for WeatherModel {
    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn ap(&self) -> &[String] {
        &self.ap
    }

    fn density(&self, from: &Point, to_mode: usize, to: &[f64]) -> f64 {
        let h = from.x[0];
        let p_rain = Self::rain_probability(from.mode, h);
        let p = if to_mode == 1 { p_rain } else { 1.0 - p_rain };
        let (a, b) = Self::humidity_support(h, to_mode);
        if a <= to[0] && to[0] < b {
            p / (b - a)
        } else {
            0.0
        }
    }

    fn label(&self, p: &Point) -> Observation {
        if p.mode == 1 {
            Observation::EMPTY.with(0)
        } else {
            Observation::EMPTY
        }
    }

    /// The humidity density jumps at the edges of its support.
    fn lipschitz(&self) -> f64 {
        f64::INFINITY
    }

    fn breakpoints(&self, from: &Point, to_mode: usize, _axis: usize) -> Vec<f64> {
        let (a, b) = Self::humidity_support(from.x[0], to_mode);
        vec![a, b]
    }
}

fn state_name(r: usize, h: usize) -> String {
    format!("r{r}h{h}")
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::domain("need at least one humidity cell"));
    }
    Ok(())
}

/// `N` equal humidity intervals for each rain value, represented by their
/// lowest humidity. Cell `(r, h)` has index `r·N + h` and name `r{r}h{h}`.
pub fn weather_partition(n: usize) -> Result<Partition> {
    check_n(n)?;
    let model = WeatherModel::new();
    let names = (0..2)
        .flat_map(|r| (0..n).map(move |h| state_name(r, h)))
        .collect();
    Partition::grid(model.domain(), &[n])?.with_names(names)
}

/// Abstraction of the weather model on [`weather_partition`], in closed
/// form.
pub fn weather_abstract(n: usize) -> Result<FiniteLmc> {
    check_n(n)?;
    let nf = n as f64;
    let size = 2 * n;
    let mut kernel = vec![0.0; size * size];
    for r0 in 0..2 {
        for h0 in 0..n {
            let h0f = h0 as f64;
            let p_rain = WeatherModel::rain_probability(r0, h0f / nf);
            let row = &mut kernel[(r0 * n + h0) * size..(r0 * n + h0 + 1) * size];
            for h1 in 0..n {
                let h1f = h1 as f64;
                let dry = 2.0 / (2.0 * nf - h0f) * (h1f + 1.0 - h0f / 2.0).clamp(0.0, 1.0);
                let wet = 2.0 / (nf + h0f) * ((nf + h0f) / 2.0 - h1f).clamp(0.0, 1.0);
                row[h1] = (1.0 - p_rain) * dry;
                row[n + h1] = p_rain * wet;
            }
        }
    }
    let names = (0..2)
        .flat_map(|r| (0..n).map(move |h| state_name(r, h)))
        .collect();
    let labels = (0..size)
        .map(|i| {
            if i >= n {
                Observation::EMPTY.with(0)
            } else {
                Observation::EMPTY
            }
        })
        .collect();
    Ok(FiniteLmc::from_raw(vec!["rain".to_string()], names, labels, kernel))
}

/// The same abstraction computed by quadrature.
pub fn weather_abstract_by_quadrature(n: usize, quadrature: Quadrature) -> Result<FiniteLmc> {
    build_abstract(&WeatherModel::new(), &weather_partition(n)?, quadrature)
}

/// Probability that the next `modes.len()` rain values from `from` are
/// exactly `modes`.
fn mode_path_probability(model: &WeatherModel, from: &Point, modes: &[usize], tol: f64) -> Result<f64> {
    let Some((&first, rest)) = modes.split_first() else {
        return Ok(1.0);
    };
    let (a, b) = WeatherModel::humidity_support(from.x[0], first);
    if rest.is_empty() {
        let p = WeatherModel::rain_probability(from.mode, from.x[0]);
        return Ok(if first == 1 { p } else { 1.0 - p });
    }
    let mut f = |y: f64| -> Result<f64> {
        let next = Point::new(first, vec![y]);
        Ok(model.density(from, first, &[y]) * mode_path_probability(model, &next, rest, tol)?)
    };
    integrate_1d(&mut f, a, b, &[], Quadrature::Adaptive { tol })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeatherAnalytic {
    /// `P[R1 = 1, R2 = 1]`.
    pub p11: f64,
    /// `P[R1 = 0, R2 = 1, R3 = 1]`.
    pub p011: f64,
    pub total: f64,
}

/// Reference probability of [`TWO_RAINY_DAYS`] from the concrete state
/// `(0, 0.5)`, by nested quadrature.
pub fn weather_analytic() -> Result<WeatherAnalytic> {
    let model = WeatherModel::new();
    let start = Point::new(0, vec![0.5]);
    let p11 = mode_path_probability(&model, &start, &[1, 1], ANALYTIC_TOL)?;
    let p011 = mode_path_probability(&model, &start, &[0, 1, 1], ANALYTIC_TOL)?;
    Ok(WeatherAnalytic {
        p11,
        p011,
        total: p11 + p011,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CaseStudy {
    pub n: usize,
    pub start: String,
    pub formula: String,
    pub horizon: usize,
    /// Abstraction precision `1/N`.
    pub eps: f64,
    pub abstract_probability: f64,
    /// `1 − (1 − 1/N)^horizon`.
    pub bound: f64,
    pub analytic: Option<WeatherAnalytic>,
    pub difference: Option<f64>,
    pub within_bound: Option<bool>,
}

/// Probability of [`TWO_RAINY_DAYS`] on `weather_abstract(n)` from the cell
/// of `(0, 0.5)`, optionally compared with the analytic value.
pub fn case_study(n: usize, analytic: bool) -> Result<CaseStudy> {
    let model = weather_abstract(n)?;
    let formula: Formula = TWO_RAINY_DAYS.parse()?;
    let start = state_name(0, n / 2);
    let s = model.state_index(&start)?;
    let abstract_probability = ltl::probability(&model, s, &formula)?;
    let eps = 1.0 / n as f64;
    let horizon = formula.horizon();
    let bound = bisim_bound(eps, horizon)?;
    let analytic = if analytic { Some(weather_analytic()?) } else { None };
    let difference = analytic.as_ref().map(|a| (abstract_probability - a.total).abs());
    Ok(CaseStudy {
        n,
        start,
        formula: TWO_RAINY_DAYS.to_string(),
        horizon,
        eps,
        abstract_probability,
        bound,
        within_bound: difference.map(|d| d <= bound),
        analytic,
        difference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::verify_partition;

    #[test]
    fn concrete_kernel_values() {
        assert_eq!(WeatherModel::rain_probability(1, 0.5), 0.625);
        assert_eq!(WeatherModel::rain_probability(0, 0.0), 0.0);
        assert_eq!(WeatherModel::humidity_support(0.5, 0), (0.25, 1.0));
        let m = weather_concrete();
        let from = Point::new(0, vec![0.5]);
        // 5/8 dry, spread over [0.25, 1)
        assert!((m.density(&from, 0, &[0.5]) - 0.625 / 0.75).abs() < 1e-15);
        assert_eq!(m.density(&from, 0, &[0.2]), 0.0);
    }

    #[test]
    fn closed_form_rows() {
        for n in [1, 4, 100, 1000] {
            let m = weather_abstract(n).unwrap();
            assert_eq!(m.len(), 2 * n);
            assert!(m.max_row_defect() <= 1e-9, "n = {n}");
        }
        let m = weather_abstract(1000).unwrap();
        let s = m.state_index("r1h500").unwrap();
        let p_rain: f64 = m.row(s)[1000..].iter().sum();
        assert!((p_rain - 0.625).abs() < 1e-12);
        assert_eq!(m.label_names(s), vec!["rain"]);
        assert!(m.label_names(m.state_index("r0h3").unwrap()).is_empty());
    }

    #[test]
    fn closed_form_matches_quadrature() {
        for n in [1, 4, 10, 37] {
            let closed = weather_abstract(n).unwrap();
            let quad = weather_abstract_by_quadrature(n, Quadrature::default()).unwrap();
            assert_eq!(closed.names(), quad.names());
            assert_eq!(closed.labels(), quad.labels());
            for i in 0..closed.len() {
                for j in 0..closed.len() {
                    let (a, b) = (closed.prob(i, j), quad.prob(i, j));
                    assert!((a - b).abs() <= 1e-9, "n={n} ({i},{j}): {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn analytic_values() {
        let a = weather_analytic().unwrap();
        assert!((a.p11 - 0.19921875).abs() < 1e-7, "{a:?}");
        assert!((a.p011 - 1365.0 / 8192.0).abs() < 1e-7, "{a:?}");
        assert!((a.total - 0.365845).abs() < 1e-5);
    }

    #[test]
    fn small_case_study_within_bound() {
        let c = case_study(10, true).unwrap();
        assert_eq!(c.start, "r0h5");
        assert_eq!(c.horizon, 3);
        assert_eq!(c.within_bound, Some(true), "{c:?}");
    }

    #[test]
    fn partition_meets_one_over_n() {
        let m = weather_concrete();
        let p = weather_partition(10).unwrap();
        let report = verify_partition(&m, &p, 0.1, 100, 5).unwrap();
        assert!(!report.violation, "{report:?}");
        assert!(report.max_distance <= 0.075 + 1e-6);
    }

    #[test]
    fn zero_cells_rejected() {
        assert!(weather_abstract(0).is_err());
        assert!(weather_partition(0).is_err());
    }
}
