//! Finite abstractions of continuous-state labelled Markov chains.
//!
//! A continuous model lives on a box in `d` dimensions, optionally crossed
//! with a finite set of discrete modes. Its kernel is given by a density in
//! the continuous target coordinates for each target mode. Partitioning the
//! state space into cells, choosing one representative per cell and
//! integrating the representative's density over every cell yields a finite
//! chain. When states sharing a cell have cell-aggregated kernels within
//! total variation ε, the abstraction is ε-bisimilar to the concrete model.

mod expr;
pub mod prism;
pub mod quadrature;
pub mod weather;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lmc::{FiniteLmc, Observation, RENORMALIZE_TOL, ROW_SUM_TOL};

pub use expr::{ExpressionModel, ExpressionModelDocument};
pub use quadrature::Quadrature;

/// `{0..discrete} × [lower, upper)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Domain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub discrete: usize,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, discrete: usize) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Dimension {
                expected: lower.len(),
                actual: upper.len(),
            });
        }
        if discrete == 0 {
            return Err(Error::domain("domain needs at least one discrete mode"));
        }
        for (a, b) in lower.iter().zip(&upper) {
            if !(a.is_finite() && b.is_finite()) {
                return Err(Error::domain("domain must be bounded"));
            }
            if a >= b {
                return Err(Error::domain(format!("empty axis [{a}, {b})")));
            }
        }
        Ok(Domain {
            lower,
            upper,
            discrete,
        })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Product of the counting measure on modes and Lebesgue measure.
    pub fn volume(&self) -> f64 {
        self.discrete as f64
            * self
                .lower
                .iter()
                .zip(&self.upper)
                .map(|(a, b)| b - a)
                .product::<f64>()
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.mode < self.discrete
            && p.x.len() == self.dim()
            && p.x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (a, b))| a <= x && x < b)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Point {
    pub mode: usize,
    pub x: Vec<f64>,
}

impl Point {
    pub fn new(mode: usize, x: Vec<f64>) -> Self {
        Point { mode, x }
    }
}

/// `{mode} × [lower, upper)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cell {
    pub mode: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Cell {
    pub fn contains(&self, p: &Point) -> bool {
        p.mode == self.mode
            && p.x.len() == self.lower.len()
            && p.x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (a, b))| a <= x && x < b)
    }

    /// Euclidean diameter of the continuous part.
    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    }

    pub fn volume(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| b - a)
            .product()
    }

    fn overlaps(&self, other: &Cell) -> bool {
        self.mode == other.mode
            && self
                .lower
                .iter()
                .zip(&self.upper)
                .zip(other.lower.iter().zip(&other.upper))
                .all(|((a0, b0), (a1, b1))| a0 < b1 && a1 < b0)
    }

    /// Point at the given fractions of each axis.
    fn at(&self, frac: &[f64]) -> Point {
        Point {
            mode: self.mode,
            x: self
                .lower
                .iter()
                .zip(&self.upper)
                .zip(frac)
                .map(|((a, b), f)| a + (b - a) * f)
                .collect(),
        }
    }
}

/// A finite disjoint cover of a domain by cells, with one representative
/// point and one name per cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Partition {
    cells: Vec<Cell>,
    representatives: Vec<Point>,
    names: Vec<String>,
}

impl Partition {
    /// Checks that cells are nonempty, lie in the domain, are pairwise
    /// disjoint and fill its volume, and that each representative lies in its
    /// cell.
    pub fn new(
        domain: &Domain,
        cells: Vec<Cell>,
        representatives: Vec<Point>,
        names: Vec<String>,
    ) -> Result<Self> {
        if representatives.len() != cells.len() || names.len() != cells.len() {
            return Err(Error::Dimension {
                expected: cells.len(),
                actual: representatives.len().min(names.len()),
            });
        }
        for (i, c) in cells.iter().enumerate() {
            if c.mode >= domain.discrete || c.lower.len() != domain.dim() || c.upper.len() != domain.dim() {
                return Err(Error::domain(format!("cell {i} is outside the domain")));
            }
            for (k, (a, b)) in c.lower.iter().zip(&c.upper).enumerate() {
                if a >= b {
                    return Err(Error::domain(format!("cell {i} is empty along axis {k}")));
                }
                if *a < domain.lower[k] || *b > domain.upper[k] {
                    return Err(Error::domain(format!("cell {i} leaves the domain along axis {k}")));
                }
            }
            if !c.contains(&representatives[i]) {
                return Err(Error::domain(format!("representative of cell {i} lies outside it")));
            }
        }
        for i in 0..cells.len() {
            for j in i + 1..cells.len() {
                if cells[i].overlaps(&cells[j]) {
                    return Err(Error::domain(format!("cells {i} and {j} overlap")));
                }
            }
        }
        let covered: f64 = cells.iter().map(Cell::volume).sum();
        let total = domain.volume();
        if (covered - total).abs() > 1e-9 * total.max(1.0) {
            return Err(Error::domain(format!(
                "cells cover volume {covered}, domain has {total}"
            )));
        }
        Ok(Partition {
            cells,
            representatives,
            names,
        })
    }

    /// Uniform grid with `per_axis[k]` cells along axis `k` in every mode.
    /// Cells are ordered mode-major, then row-major over the grid, and
    /// represented by their minimal corner.
    pub fn grid(domain: &Domain, per_axis: &[usize]) -> Result<Self> {
        if per_axis.len() != domain.dim() {
            return Err(Error::Dimension {
                expected: domain.dim(),
                actual: per_axis.len(),
            });
        }
        if per_axis.contains(&0) {
            return Err(Error::domain("grid needs at least one cell per axis"));
        }
        let per_mode: usize = per_axis.iter().product();
        let mut cells = Vec::with_capacity(per_mode * domain.discrete);
        let mut names = Vec::with_capacity(cells.capacity());
        for mode in 0..domain.discrete {
            for flat in 0..per_mode {
                let mut rest = flat;
                let mut idx = vec![0; per_axis.len()];
                for k in (0..per_axis.len()).rev() {
                    idx[k] = rest % per_axis[k];
                    rest /= per_axis[k];
                }
                let (lower, upper) = idx
                    .iter()
                    .enumerate()
                    .map(|(k, &i)| {
                        let (a, b) = (domain.lower[k], domain.upper[k]);
                        let n = per_axis[k] as f64;
                        let lo = a + (b - a) * i as f64 / n;
                        let hi = if i + 1 == per_axis[k] {
                            b
                        } else {
                            a + (b - a) * (i + 1) as f64 / n
                        };
                        (lo, hi)
                    })
                    .unzip();
                let tag: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
                names.push(format!("m{mode}_{}", tag.join("_")));
                cells.push(Cell { mode, lower, upper });
            }
        }
        let representatives = cells
            .iter()
            .map(|c| Point {
                mode: c.mode,
                x: c.lower.clone(),
            })
            .collect();
        // disjoint and covering by construction; skip the quadratic check
        Ok(Partition {
            cells,
            representatives,
            names,
        })
    }

    /// One zero-dimensional cell per mode of a domain without continuous axes.
    pub fn singletons(domain: &Domain, names: Vec<String>) -> Result<Self> {
        if domain.dim() != 0 {
            return Err(Error::domain("singleton partition needs a purely discrete domain"));
        }
        let cells: Vec<Cell> = (0..domain.discrete)
            .map(|mode| Cell {
                mode,
                lower: vec![],
                upper: vec![],
            })
            .collect();
        let reps = (0..domain.discrete).map(|m| Point::new(m, vec![])).collect();
        Partition::new(domain, cells, reps, names)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn representatives(&self) -> &[Point] {
        &self.representatives
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.cells.len() {
            return Err(Error::Dimension {
                expected: self.cells.len(),
                actual: names.len(),
            });
        }
        self.names = names;
        Ok(self)
    }

    /// Replace the representative of `cell`.
    pub fn set_representative(&mut self, cell: usize, point: Point) -> Result<()> {
        if !self.cells[cell].contains(&point) {
            return Err(Error::domain(format!("point is not inside cell {cell}")));
        }
        self.representatives[cell] = point;
        Ok(())
    }

    /// Index of the cell containing `p`.
    pub fn locate(&self, p: &Point) -> Option<usize> {
        self.cells.iter().position(|c| c.contains(p))
    }
}

/// A continuous-state labelled Markov chain.
pub trait ContinuousModel {
    fn domain(&self) -> &Domain;

    fn ap(&self) -> &[String];

    /// Transition density from `from` to mode `to_mode` at continuous
    /// coordinates `to`. For a domain without continuous axes this is the
    /// transition probability itself.
    fn density(&self, from: &Point, to_mode: usize, to: &[f64]) -> f64;

    fn label(&self, p: &Point) -> Observation;

    /// Uniform Lipschitz constant of the density in its source argument;
    /// infinite when the density is not Lipschitz.
    fn lipschitz(&self) -> f64;

    /// Coordinates along `axis` where the density from `from` into
    /// `to_mode` may jump. Quadrature splits there.
    fn breakpoints(&self, _from: &Point, _to_mode: usize, _axis: usize) -> Vec<f64> {
        Vec::new()
    }
}

/// Probability that one step from `from` lands in `cell`.
pub fn cell_mass<M: ContinuousModel + ?Sized>(
    model: &M,
    from: &Point,
    cell: &Cell,
    quadrature: Quadrature,
) -> Result<f64> {
    let bps: Vec<Vec<f64>> = (0..cell.lower.len())
        .map(|axis| model.breakpoints(from, cell.mode, axis))
        .collect();
    let mut f = |y: &[f64]| Ok(model.density(from, cell.mode, y));
    quadrature::integrate_box(&mut f, &cell.lower, &cell.upper, &bps, quadrature)
}

/// Kernel of `from` aggregated over the cells of `partition`.
pub fn aggregated_row<M: ContinuousModel + ?Sized>(
    model: &M,
    from: &Point,
    partition: &Partition,
    quadrature: Quadrature,
) -> Result<Vec<f64>> {
    partition
        .cells
        .iter()
        .map(|c| cell_mass(model, from, c, quadrature))
        .collect()
}

/// Total kernel mass from `from` over the whole domain (should be 1).
pub fn total_mass<M: ContinuousModel + ?Sized>(model: &M, from: &Point, quadrature: Quadrature) -> Result<f64> {
    let d = model.domain();
    (0..d.discrete)
        .map(|mode| {
            cell_mass(
                model,
                from,
                &Cell {
                    mode,
                    lower: d.lower.clone(),
                    upper: d.upper.clone(),
                },
                quadrature,
            )
        })
        .sum()
}

/// Largest deviation of the total kernel mass from 1 over `samples` random
/// source states.
pub fn normalization_defect<M: ContinuousModel + ?Sized>(model: &M, samples: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = model.domain();
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let p = Point {
            mode: rng.gen_range(0..d.discrete),
            x: d.lower.iter().zip(&d.upper).map(|(a, b)| rng.gen_range(*a..*b)).collect(),
        };
        worst = worst.max((total_mass(model, &p, Quadrature::default())? - 1.0).abs());
    }
    Ok(worst)
}

/// Grid spacing budget for a K-Lipschitz density.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LipschitzBudget {
    pub epsilon: f64,
    pub volume: f64,
    /// `2ε / (K λ)`; infinite when `K = 0`.
    pub max_diameter: f64,
}

impl LipschitzBudget {
    pub fn new(eps: f64, lipschitz: f64, volume: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::domain(format!("epsilon {eps} outside (0, 1]")));
        }
        if !(lipschitz >= 0.0) || lipschitz.is_infinite() {
            return Err(Error::domain(format!(
                "Lipschitz constant {lipschitz} must be finite and non-negative"
            )));
        }
        if !(volume.is_finite() && volume > 0.0) {
            return Err(Error::domain("domain volume must be finite and positive"));
        }
        let max_diameter = if lipschitz == 0.0 {
            f64::INFINITY
        } else {
            2.0 * eps / (lipschitz * volume)
        };
        Ok(LipschitzBudget {
            epsilon: eps,
            volume,
            max_diameter,
        })
    }
}

/// Uniform grid whose cells all have diameter at most `2ε / (K λ)`, so that
/// same-cell states have aggregated kernels within ε.
pub fn grid_partition<M: ContinuousModel + ?Sized>(model: &M, eps: f64) -> Result<(Partition, LipschitzBudget)> {
    let domain = model.domain();
    let budget = LipschitzBudget::new(eps, model.lipschitz(), domain.volume())?;
    let d = domain.dim();
    let per_axis: Vec<usize> = (0..d)
        .map(|k| {
            if budget.max_diameter.is_infinite() {
                return 1;
            }
            let len = domain.upper[k] - domain.lower[k];
            let raw = len * (d as f64).sqrt() / budget.max_diameter;
            // guard against raw landing a hair above an integer
            (raw * (1.0 - 1e-12)).ceil().max(1.0) as usize
        })
        .collect();
    let partition = Partition::grid(domain, &per_axis)?;
    if let Some(i) = partition
        .cells
        .iter()
        .position(|c| c.diameter() > budget.max_diameter * (1.0 + 1e-12))
    {
        return Err(Error::domain(format!(
            "cell {i} has diameter {} above the budget {}",
            partition.cells[i].diameter(),
            budget.max_diameter
        )));
    }
    Ok((partition, budget))
}

/// Fractions of each axis probed when checking label constancy.
const PROBE_FRACTIONS: [f64; 4] = [0.0, 0.25, 0.5, 0.999];

fn check_labels<M: ContinuousModel + ?Sized>(model: &M, partition: &Partition) -> Result<()> {
    for (i, cell) in partition.cells.iter().enumerate() {
        let want = model.label(&partition.representatives[i]);
        let d = cell.lower.len();
        let probes = PROBE_FRACTIONS.len().pow(d as u32);
        for flat in 0..probes {
            let mut rest = flat;
            let frac: Vec<f64> = (0..d)
                .map(|_| {
                    let f = PROBE_FRACTIONS[rest % PROBE_FRACTIONS.len()];
                    rest /= PROBE_FRACTIONS.len();
                    f
                })
                .collect();
            let p = cell.at(&frac);
            let got = model.label(&p);
            if got != want {
                return Err(Error::LabelsNotConstant {
                    cell: i,
                    detail: format!("{:?} at {:?} vs {:?} at the representative", got, p.x, want),
                });
            }
        }
    }
    Ok(())
}

/// The finite chain with one state per cell, re-rooted at the cell
/// representatives: entry `(i, j)` is the mass the representative of cell
/// `i` sends into cell `j`.
pub fn build_abstract<M: ContinuousModel + ?Sized>(
    model: &M,
    partition: &Partition,
    quadrature: Quadrature,
) -> Result<FiniteLmc> {
    check_labels(model, partition)?;
    let n = partition.len();
    let mut kernel = Vec::with_capacity(n * n);
    for (i, rep) in partition.representatives.iter().enumerate() {
        let mut row = aggregated_row(model, rep, partition, quadrature)?;
        let sum: f64 = row.iter().sum();
        let defect = (sum - 1.0).abs();
        if defect > RENORMALIZE_TOL || row.iter().any(|&v| v < 0.0) {
            return Err(Error::RowDefect { row: i, sum });
        }
        if defect > ROW_SUM_TOL {
            row.iter_mut().for_each(|v| *v /= sum);
        }
        kernel.extend(row);
    }
    let labels = partition
        .representatives
        .iter()
        .map(|p| model.label(p))
        .collect();
    Ok(FiniteLmc::from_raw(
        model.ap().to_vec(),
        partition.names.clone(),
        labels,
        kernel,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PartitionReport {
    pub pairs: usize,
    /// Largest half-L1 distance between same-cell aggregated kernels.
    pub max_distance: f64,
    pub worst_cell: Option<usize>,
    pub eps: f64,
    /// Allowance for integration error in the comparison with `eps`.
    pub tolerance: f64,
    pub violation: bool,
}

/// Sample pairs of states sharing a cell and report the largest total
/// variation between their cell-aggregated kernels.
pub fn verify_partition<M: ContinuousModel + ?Sized>(
    model: &M,
    partition: &Partition,
    eps: f64,
    samples: usize,
    seed: u64,
) -> Result<PartitionReport> {
    if samples == 0 {
        return Err(Error::domain("need at least one sample"));
    }
    check_labels(model, partition)?;
    let quadrature = Quadrature::default();
    let tolerance = quadrature.tolerance() * partition.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample_in = |cell: &Cell, rng: &mut ChaCha8Rng| {
        let frac: Vec<f64> = (0..cell.lower.len()).map(|_| rng.gen::<f64>()).collect();
        cell.at(&frac)
    };
    let mut report = PartitionReport {
        pairs: samples,
        max_distance: 0.0,
        worst_cell: None,
        eps,
        tolerance,
        violation: false,
    };
    for _ in 0..samples {
        let c = rng.gen_range(0..partition.len());
        let cell = &partition.cells[c];
        let p = sample_in(cell, &mut rng);
        let q = sample_in(cell, &mut rng);
        let rp = aggregated_row(model, &p, partition, quadrature)?;
        let rq = aggregated_row(model, &q, partition, quadrature)?;
        let tv = 0.5 * rp.iter().zip(&rq).map(|(a, b)| (a - b).abs()).sum::<f64>();
        if tv > report.max_distance || report.worst_cell.is_none() {
            report.max_distance = tv;
            report.worst_cell = Some(c);
        }
    }
    report.violation = report.max_distance > eps + tolerance;
    Ok(report)
}

/// A finite chain seen as a continuous model with no continuous axes.
#[derive(Clone, Debug)]
pub struct FiniteEmbedding {
    model: FiniteLmc,
    domain: Domain,
}

impl FiniteEmbedding {
    pub fn new(model: FiniteLmc) -> Self {
        let domain = Domain {
            lower: vec![],
            upper: vec![],
            discrete: model.len(),
        };
        FiniteEmbedding { model, domain }
    }

    pub fn singleton_partition(&self) -> Partition {
        Partition::singletons(&self.domain, self.model.names().to_vec())
            .expect("one cell per state")
    }
}

impl ContinuousModel for FiniteEmbedding {
    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn ap(&self) -> &[String] {
        self.model.ap()
    }

    fn density(&self, from: &Point, to_mode: usize, _to: &[f64]) -> f64 {
        self.model.prob(from.mode, to_mode)
    }

    fn label(&self, p: &Point) -> Observation {
        self.model.label(p.mode)
    }

    fn lipschitz(&self) -> f64 {
        0.0
    }
}
