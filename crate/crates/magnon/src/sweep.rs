//! Grid searches over chain length, Bloch angle, time, and field: maximal
//! fidelity versus length, the length-angle fidelity surface, per-site
//! fidelity traces for a long chain, and the optimized Bloch-averaged
//! fidelity versus length.
//!
//! Sweeps evaluate fidelities through the mode decomposition rather than by
//! rebuilding propagator matrices: a block-supported target reduces every
//! fidelity to a handful of per-mode overlap coefficients, so one time sample
//! costs O(N) (one magnon) or O(N^2) (two magnons). The same quantity is
//! computed by the general evolve/reduce path; the two routes agree to 1e-10
//! and the tests insist on it.

#![allow(clippy::needless_range_loop)]

use num_complex::Complex64;
use rayon::prelude::*;

use crate::chain::{ChainParams, ModeTable};
use crate::encoding::{
    logical_state, logical_state_on_block, BlochState, EncodingName, LogicalEncoding, Placement,
};
use crate::error::{Error, Result};
use crate::fidelity::{
    refine_quadratic, single_site_average_fidelity, vacuum_singlet_average_fidelity,
    FidelityTrace, DEFAULT_PEAK_PROMINENCE,
};
use crate::state::{Configuration, ExcitationState};

/// A uniform, ascending time grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    start: f64,
    step: f64,
    len: usize,
}

impl TimeGrid {
    pub fn new(start: f64, step: f64, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::InvalidGrid("time grid must be nonempty".into()));
        }
        if len > 1 && step <= 0.0 {
            return Err(Error::InvalidGrid("time step must be positive".into()));
        }
        Ok(TimeGrid { start, step, len })
    }

    /// Grid over `[0, t_max]` with the given step.
    pub fn span(t_max: f64, step: f64) -> Result<Self> {
        if step <= 0.0 || t_max < 0.0 {
            return Err(Error::InvalidGrid("time span needs t_max >= 0 and step > 0".into()));
        }
        let len = (t_max / step).round() as usize + 1;
        Self::new(0.0, step, len)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn at(&self, i: usize) -> f64 {
        self.start + self.step * i as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.at(i)).collect()
    }
}

/// Default time grid `[0, 100]`, step 0.05.
pub fn default_time_grid() -> TimeGrid {
    TimeGrid::span(100.0, 0.05).unwrap()
}

/// Default field grid `[0, 2]`, step 0.05.
pub fn default_field_grid() -> Vec<f64> {
    (0..=40).map(|i| i as f64 * 0.05).collect()
}

/// Default Bloch-angle grid `[0, pi]`, step `pi/60`.
pub fn default_theta_grid() -> Vec<f64> {
    (0..=60).map(|i| i as f64 * std::f64::consts::PI / 60.0).collect()
}

/// What to sweep: encodings, chain lengths, angle/time/field grids.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub encodings: Vec<LogicalEncoding>,
    pub chain_lengths: Vec<usize>,
    pub theta_grid: Vec<f64>,
    pub phi: f64,
    pub time_grid: TimeGrid,
    pub field_grid: Vec<f64>,
    pub h_field: f64,
    pub j_xy: f64,
    pub trace_sites: Vec<usize>,
    pub peak_prominence: f64,
}

impl SweepSpec {
    fn base(chain_lengths: Vec<usize>) -> Self {
        SweepSpec {
            encodings: Vec::new(),
            chain_lengths,
            theta_grid: vec![std::f64::consts::FRAC_PI_2],
            phi: 0.0,
            time_grid: default_time_grid(),
            field_grid: Vec::new(),
            h_field: 1.0,
            j_xy: 1.0,
            trace_sites: Vec::new(),
            peak_prominence: DEFAULT_PEAK_PROMINENCE,
        }
    }

    /// Encoding comparison at the equal superposition: `F_max` vs `N`.
    pub fn length_sweep(encodings: Vec<LogicalEncoding>, chain_lengths: Vec<usize>) -> Self {
        SweepSpec { encodings, ..Self::base(chain_lengths) }
    }

    /// The `(N, theta)` maximal-fidelity surface of the one-excitation
    /// three-qubit encoding.
    pub fn surface_sweep(chain_lengths: Vec<usize>) -> Self {
        SweepSpec {
            encodings: vec![LogicalEncoding::new(EncodingName::ThreeQubit1)],
            theta_grid: default_theta_grid(),
            ..Self::base(chain_lengths)
        }
    }

    /// Per-site fidelity traces of the vacuum-singlet `|1L>` on one chain.
    pub fn trace_sweep(n_sites: usize, trace_sites: Vec<usize>) -> Self {
        SweepSpec {
            encodings: vec![LogicalEncoding::new(EncodingName::VacuumSinglet)],
            theta_grid: vec![std::f64::consts::PI],
            trace_sites,
            ..Self::base(vec![n_sites])
        }
    }

    /// Bloch-averaged fidelity vs `N`, optimized over time and field.
    pub fn average_sweep(chain_lengths: Vec<usize>) -> Self {
        SweepSpec { field_grid: default_field_grid(), ..Self::base(chain_lengths) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.chain_lengths.is_empty() {
            return Err(Error::InvalidGrid("chain-length grid must be nonempty".into()));
        }
        if self.chain_lengths.windows(2).any(|w| w[0] >= w[1]) && self.chain_lengths.len() > 1 {
            return Err(Error::InvalidGrid("chain lengths must be ascending".into()));
        }
        if self.theta_grid.is_empty() {
            return Err(Error::InvalidGrid("theta grid must be nonempty".into()));
        }
        if self.theta_grid.windows(2).any(|w| w[0] >= w[1]) && self.theta_grid.len() > 1 {
            return Err(Error::InvalidGrid("theta grid must be ascending".into()));
        }
        if self.field_grid.windows(2).any(|w| w[0] >= w[1]) && self.field_grid.len() > 1 {
            return Err(Error::InvalidGrid("field grid must be ascending".into()));
        }
        if self.j_xy == 0.0 {
            return Err(Error::ZeroCoupling);
        }
        Ok(())
    }

    fn params(&self, n: usize) -> Result<ChainParams> {
        ChainParams::new(n, self.j_xy, 0.0, self.h_field)
    }
}

/// Values along one sweep axis.
#[derive(Debug, Clone, PartialEq)]
pub enum AxisValues {
    Numbers(Vec<f64>),
    Labels(Vec<String>),
}

impl AxisValues {
    pub fn len(&self) -> usize {
        match self {
            AxisValues::Numbers(v) => v.len(),
            AxisValues::Labels(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub name: String,
    pub values: AxisValues,
}

/// The located maximum at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArgmaxRecord {
    pub value: f64,
    pub t_star: f64,
    pub h_star: Option<f64>,
}

/// Row-major grid of argmax records over the named axes.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub axes: Vec<SweepAxis>,
    pub records: Vec<ArgmaxRecord>,
}

impl SweepResult {
    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.values.len()).collect()
    }

    pub fn record(&self, indices: &[usize]) -> &ArgmaxRecord {
        let shape = self.shape();
        assert_eq!(indices.len(), shape.len());
        let mut flat = 0usize;
        for (i, (&idx, &dim)) in indices.iter().zip(&shape).enumerate() {
            assert!(idx < dim, "index {idx} out of bounds for axis {i}");
            flat = flat * dim + idx;
        }
        &self.records[flat]
    }
}

fn pair_index(m1: usize, m2: usize, n: usize) -> usize {
    debug_assert!(m1 < m2 && m2 < n);
    m1 * (2 * n - m1 - 1) / 2 + (m2 - m1 - 1)
}

/// Per-mode overlap coefficients of one (initial state, block target) pair;
/// evaluates the transfer fidelity at any time from the mode phases alone.
struct TransferKernel<'a> {
    table: &'a ModeTable,
    block_sites: Vec<usize>,
    vac_term: Complex64,
    tau0_sq: f64,
    one_weight: f64,
    psi1_modes: Vec<Complex64>,
    c1: Vec<Complex64>,
    c2: Vec<Complex64>,
}

impl<'a> TransferKernel<'a> {
    fn new(
        table: &'a ModeTable,
        initial: &ExcitationState,
        target: &ExcitationState,
        block_sites: &[usize],
    ) -> Self {
        let n = table.n_sites();
        let mut psi1 = Vec::new();
        let mut tau1 = Vec::new();
        let mut psi2 = Vec::new();
        let mut tau2 = Vec::new();
        let mut psi0 = Complex64::new(0.0, 0.0);
        let mut tau0 = Complex64::new(0.0, 0.0);
        for (config, amp) in initial.iter() {
            match *config {
                Configuration::Vacuum => psi0 += amp,
                Configuration::Single(l) => psi1.push((l, *amp)),
                Configuration::Pair(a, b) => psi2.push((a, b, *amp)),
            }
        }
        for (config, amp) in target.iter() {
            match *config {
                Configuration::Vacuum => tau0 += amp,
                Configuration::Single(l) => tau1.push((l, *amp)),
                Configuration::Pair(a, b) => tau2.push((a, b, *amp)),
            }
        }
        let psi1_modes = table.project(&psi1);
        let tau1_modes = table.project(&tau1);
        let c1: Vec<Complex64> =
            tau1_modes.iter().zip(&psi1_modes).map(|(t, p)| t.conj() * p).collect();
        let one_weight: f64 = psi1.iter().map(|(_, a)| a.norm_sqr()).sum();

        let mut c2 = Vec::new();
        if !psi2.is_empty() {
            let sines = table.sines();
            let project_pairs = |entries: &[(usize, usize, Complex64)]| -> Vec<Complex64> {
                let mut modes = vec![Complex64::new(0.0, 0.0); n * (n - 1) / 2];
                for &(j1, j2, amp) in entries {
                    for m1 in 0..n {
                        let s11 = sines[[j1 - 1, m1]];
                        let s21 = sines[[j2 - 1, m1]];
                        for m2 in (m1 + 1)..n {
                            let det = s11 * sines[[j2 - 1, m2]] - sines[[j1 - 1, m2]] * s21;
                            modes[pair_index(m1, m2, n)] += amp * det;
                        }
                    }
                }
                modes
            };
            let psi2_modes = project_pairs(&psi2);
            let tau2_modes = project_pairs(&tau2);
            c2 = tau2_modes.iter().zip(&psi2_modes).map(|(t, p)| t.conj() * p).collect();
        }

        TransferKernel {
            table,
            block_sites: block_sites.to_vec(),
            vac_term: tau0.conj() * psi0,
            tau0_sq: tau0.norm_sqr(),
            one_weight,
            psi1_modes,
            c1,
            c2,
        }
    }

    /// Fidelity at the time encoded by `phases`.
    fn fidelity(&self, phases: &[Complex64]) -> f64 {
        let n = self.table.n_sites();
        let mut overlap = self.vac_term;
        for m in 0..n {
            overlap += self.c1[m] * phases[m];
        }
        if !self.c2.is_empty() {
            for m1 in 0..n {
                let p1 = phases[m1];
                for m2 in (m1 + 1)..n {
                    overlap += self.c2[pair_index(m1, m2, n)] * p1 * phases[m2];
                }
            }
        }
        let mut f_sq = overlap.norm_sqr();
        if self.tau0_sq > 0.0 && self.one_weight > 0.0 {
            // weight that leaked past the block still overlaps the target's
            // vacuum component
            let mut in_block = 0.0;
            for &site in &self.block_sites {
                in_block += self.table.amplitude_at(site, &self.psi1_modes, phases).norm_sqr();
            }
            f_sq += self.tau0_sq * (self.one_weight - in_block);
        }
        f_sq.clamp(0.0, 1.0).sqrt()
    }
}

/// Fidelity evaluator for one (initial, target) pair: per-mode overlap
/// coefficients where the sector structure admits them (sectors within
/// {0, 1}, or pure two-magnon), the evolve/reduce path otherwise (e.g. a
/// three-qubit gauge mixing one- and two-magnon content, whose leaked weight
/// interferes across sectors outside the block).
enum FidelityEvaluator<'a> {
    Spectral(TransferKernel<'a>),
    General {
        params: ChainParams,
        initial: ExcitationState,
        target: ExcitationState,
        block: Vec<usize>,
    },
}

impl FidelityEvaluator<'_> {
    fn fidelity(&self, table: &ModeTable, t: f64) -> Result<f64> {
        match self {
            FidelityEvaluator::Spectral(kernel) => Ok(kernel.fidelity(&table.phases(t))),
            FidelityEvaluator::General { params, initial, target, block } => {
                let evolved = crate::state::evolve(initial, params, t)?;
                crate::fidelity::fidelity(&evolved, target, block)
            }
        }
    }
}

fn sector_mask(state: &ExcitationState) -> u8 {
    let mut mask = 0u8;
    for (config, amp) in state.iter() {
        if amp.norm_sqr() > 0.0 {
            mask |= 1 << config.magnon_count();
        }
    }
    mask
}

fn kernel_for<'a>(
    params: &ChainParams,
    table: &'a ModeTable,
    encoding: &LogicalEncoding,
    bloch: &BlochState,
    block_end: usize,
    n: usize,
) -> Result<FidelityEvaluator<'a>> {
    let b = encoding.block_size();
    if block_end < b || block_end > n {
        return Err(Error::InvalidBlock(format!(
            "receiving block ending at {block_end} does not fit"
        )));
    }
    let first = block_end - b + 1;
    let initial = logical_state(encoding, bloch, Placement::Start, n)?;
    let target = logical_state_on_block(encoding, bloch, first, n)?;
    let block: Vec<usize> = (first..=block_end).collect();
    let mask = sector_mask(&initial) | sector_mask(&target);
    if mask & 0b100 == 0 || mask == 0b100 {
        Ok(FidelityEvaluator::Spectral(TransferKernel::new(table, &initial, &target, &block)))
    } else {
        Ok(FidelityEvaluator::General { params: *params, initial, target, block })
    }
}

/// Grid maximum with quadratic refinement; ties resolve to the earliest time.
fn max_over_time(series: &[f64], grid: &TimeGrid) -> ArgmaxRecord {
    let mut best = 0usize;
    for (i, &v) in series.iter().enumerate() {
        if v > series[best] {
            best = i;
        }
    }
    if best == 0 || best + 1 == series.len() {
        return ArgmaxRecord { value: series[best], t_star: grid.at(best), h_star: None };
    }
    let times = [grid.at(best - 1), grid.at(best), grid.at(best + 1)];
    let values = [series[best - 1], series[best], series[best + 1]];
    let (t, v) = refine_quadratic(&times, &values, 1);
    ArgmaxRecord { value: v.clamp(series[best], 1.0), t_star: t, h_star: None }
}

fn fidelity_series(
    evaluator: &FidelityEvaluator<'_>,
    table: &ModeTable,
    grid: &TimeGrid,
) -> Result<Vec<f64>> {
    (0..grid.len()).map(|i| evaluator.fidelity(table, grid.at(i))).collect()
}

/// Maximal fidelity over the time grid for each encoding and chain length,
/// at the Bloch angle of `spec.theta_grid[0]` (the equal superposition by
/// default).
pub fn max_fidelity_vs_length(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    if spec.encodings.is_empty() {
        return Err(Error::InvalidGrid("length sweep needs at least one encoding".into()));
    }
    let bloch = BlochState::new(spec.theta_grid[0], spec.phi)?;
    // fail fast on chains too short for any requested encoding
    for enc in &spec.encodings {
        for &n in &spec.chain_lengths {
            if n < enc.block_size() {
                return Err(Error::ChainTooShort { n_sites: n, block_size: enc.block_size() });
            }
        }
    }
    let tasks: Vec<(usize, usize)> = (0..spec.encodings.len())
        .flat_map(|e| (0..spec.chain_lengths.len()).map(move |i| (e, i)))
        .collect();
    let records: Vec<ArgmaxRecord> = tasks
        .par_iter()
        .map(|&(e, i)| {
            let n = spec.chain_lengths[i];
            let params = spec.params(n)?;
            let table = ModeTable::new(&params);
            let kernel = kernel_for(&params, &table, &spec.encodings[e], &bloch, n, n)?;
            let series = fidelity_series(&kernel, &table, &spec.time_grid)?;
            Ok(max_over_time(&series, &spec.time_grid))
        })
        .collect::<Result<_>>()?;
    Ok(SweepResult {
        axes: vec![
            SweepAxis {
                name: "encoding".into(),
                values: AxisValues::Labels(
                    spec.encodings.iter().map(|e| e.name().to_string()).collect(),
                ),
            },
            SweepAxis {
                name: "n".into(),
                values: AxisValues::Numbers(
                    spec.chain_lengths.iter().map(|&n| n as f64).collect(),
                ),
            },
        ],
        records,
    })
}

/// Maximal fidelity over the time grid on the `(N, theta)` grid for the
/// first encoding in the spec.
pub fn max_fidelity_surface(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let encoding = spec
        .encodings
        .first()
        .ok_or_else(|| Error::InvalidGrid("surface sweep needs an encoding".into()))?;
    for &n in &spec.chain_lengths {
        if n < encoding.block_size() {
            return Err(Error::ChainTooShort { n_sites: n, block_size: encoding.block_size() });
        }
    }
    let tasks: Vec<(usize, usize)> = (0..spec.chain_lengths.len())
        .flat_map(|i| (0..spec.theta_grid.len()).map(move |k| (i, k)))
        .collect();
    let records: Vec<ArgmaxRecord> = tasks
        .par_iter()
        .map(|&(i, k)| {
            let n = spec.chain_lengths[i];
            let params = spec.params(n)?;
            let table = ModeTable::new(&params);
            let bloch = BlochState::new(spec.theta_grid[k], spec.phi)?;
            let kernel = kernel_for(&params, &table, encoding, &bloch, n, n)?;
            let series = fidelity_series(&kernel, &table, &spec.time_grid)?;
            Ok(max_over_time(&series, &spec.time_grid))
        })
        .collect::<Result<_>>()?;
    Ok(SweepResult {
        axes: vec![
            SweepAxis {
                name: "n".into(),
                values: AxisValues::Numbers(
                    spec.chain_lengths.iter().map(|&n| n as f64).collect(),
                ),
            },
            SweepAxis {
                name: "theta".into(),
                values: AxisValues::Numbers(spec.theta_grid.clone()),
            },
        ],
        records,
    })
}

/// Bloch-averaged fidelity maximized over the time and field grids, for the
/// bare single-site scheme and the vacuum-singlet scheme.
pub fn avg_fidelity_vs_length(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    if spec.field_grid.is_empty() {
        return Err(Error::InvalidGrid("average sweep needs a field grid".into()));
    }
    for &n in &spec.chain_lengths {
        if n < 5 {
            return Err(Error::ChainTooShort { n_sites: n, block_size: 5 });
        }
    }
    let schemes = ["single-spin", "vacuum-singlet"];
    let tasks: Vec<(usize, usize)> = (0..schemes.len())
        .flat_map(|s| (0..spec.chain_lengths.len()).map(move |i| (s, i)))
        .collect();
    let records: Vec<ArgmaxRecord> = tasks
        .par_iter()
        .map(|&(s, i)| {
            let n = spec.chain_lengths[i];
            // field enters the one-magnon sector as exp(-2iht); factor it out
            // by tabulating at h = 0 and rotating per field sample
            let params = ChainParams::new(n, spec.j_xy, 0.0, 0.0)?;
            let table = ModeTable::new(&params);
            let s2 = std::f64::consts::FRAC_1_SQRT_2;
            let modes = if s == 0 {
                table.project(&[(1, Complex64::new(1.0, 0.0))])
            } else {
                table.project(&[
                    (3, Complex64::new(s2, 0.0)),
                    (1, Complex64::new(-s2, 0.0)),
                ])
            };
            let value_at = |t: f64, h: f64| -> f64 {
                let phases = table.phases(t);
                let rot = Complex64::from_polar(1.0, -2.0 * h * t);
                if s == 0 {
                    single_site_average_fidelity(rot * table.amplitude_at(n, &modes, &phases))
                } else {
                    let g = [
                        rot * table.amplitude_at(n - 2, &modes, &phases),
                        rot * table.amplitude_at(n - 1, &modes, &phases),
                        rot * table.amplitude_at(n, &modes, &phases),
                    ];
                    vacuum_singlet_average_fidelity(g)
                }
            };
            let mut best = (f64::NEG_INFINITY, 0usize, 0usize);
            for ti in 0..spec.time_grid.len() {
                let t = spec.time_grid.at(ti);
                let phases = table.phases(t);
                if s == 0 {
                    let f0 = table.amplitude_at(n, &modes, &phases);
                    for (hi, &h) in spec.field_grid.iter().enumerate() {
                        let v = single_site_average_fidelity(
                            Complex64::from_polar(1.0, -2.0 * h * t) * f0,
                        );
                        if v > best.0 {
                            best = (v, ti, hi);
                        }
                    }
                } else {
                    let g0 = [
                        table.amplitude_at(n - 2, &modes, &phases),
                        table.amplitude_at(n - 1, &modes, &phases),
                        table.amplitude_at(n, &modes, &phases),
                    ];
                    for (hi, &h) in spec.field_grid.iter().enumerate() {
                        let rot = Complex64::from_polar(1.0, -2.0 * h * t);
                        let v = vacuum_singlet_average_fidelity([
                            rot * g0[0],
                            rot * g0[1],
                            rot * g0[2],
                        ]);
                        if v > best.0 {
                            best = (v, ti, hi);
                        }
                    }
                }
            }
            let (_, ti, hi) = best;
            let h_star = spec.field_grid[hi];
            let record = if ti == 0 || ti + 1 == spec.time_grid.len() {
                ArgmaxRecord {
                    value: value_at(spec.time_grid.at(ti), h_star),
                    t_star: spec.time_grid.at(ti),
                    h_star: Some(h_star),
                }
            } else {
                let times = [
                    spec.time_grid.at(ti - 1),
                    spec.time_grid.at(ti),
                    spec.time_grid.at(ti + 1),
                ];
                let values = [
                    value_at(times[0], h_star),
                    value_at(times[1], h_star),
                    value_at(times[2], h_star),
                ];
                let (t, v) = refine_quadratic(&times, &values, 1);
                ArgmaxRecord {
                    value: v.clamp(values[1], 1.0),
                    t_star: t,
                    h_star: Some(h_star),
                }
            };
            Ok(record)
        })
        .collect::<Result<_>>()?;
    Ok(SweepResult {
        axes: vec![
            SweepAxis {
                name: "scheme".into(),
                values: AxisValues::Labels(schemes.iter().map(|s| s.to_string()).collect()),
            },
            SweepAxis {
                name: "n".into(),
                values: AxisValues::Numbers(
                    spec.chain_lengths.iter().map(|&n| n as f64).collect(),
                ),
            },
        ],
        records,
    })
}

/// Fidelity time trace of one encoded transfer, read at the block ending at
/// `block_end` (the chain end for `block_end = N`).
pub fn transfer_trace(
    params: &ChainParams,
    encoding: &LogicalEncoding,
    bloch: &BlochState,
    block_end: usize,
    grid: &TimeGrid,
    prominence: f64,
) -> Result<FidelityTrace> {
    params.validate()?;
    let table = ModeTable::new(params);
    let kernel = kernel_for(params, &table, encoding, bloch, block_end, params.n_sites)?;
    let values = fidelity_series(&kernel, &table, grid)?;
    Ok(FidelityTrace::new(grid.values(), values, prominence))
}

/// Bloch-averaged fidelity of the vacuum-singlet encoding over a time grid.
/// With a field grid, each time sample is maximized over it; the returned
/// pairs are `(F_av, h)`.
pub fn average_fidelity_series(
    params: &ChainParams,
    grid: &TimeGrid,
    field_grid: Option<&[f64]>,
) -> Result<Vec<(f64, f64)>> {
    params.validate()?;
    let n = params.n_sites;
    if n < 5 {
        return Err(Error::ChainTooShort { n_sites: n, block_size: 5 });
    }
    let zero_field = ChainParams::new(n, params.j_xy, 0.0, 0.0)?;
    let table = ModeTable::new(&zero_field);
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    let modes = table.project(&[
        (3, Complex64::new(s2, 0.0)),
        (1, Complex64::new(-s2, 0.0)),
    ]);
    let out = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let t = grid.at(i);
            let phases = table.phases(t);
            let g0 = [
                table.amplitude_at(n - 2, &modes, &phases),
                table.amplitude_at(n - 1, &modes, &phases),
                table.amplitude_at(n, &modes, &phases),
            ];
            let value = |h: f64| {
                let rot = Complex64::from_polar(1.0, -2.0 * h * t);
                vacuum_singlet_average_fidelity([rot * g0[0], rot * g0[1], rot * g0[2]])
            };
            match field_grid {
                None => (value(params.h_field), params.h_field),
                Some(hs) => {
                    let mut best = (f64::NEG_INFINITY, params.h_field);
                    for &h in hs {
                        let v = value(h);
                        if v > best.0 {
                            best = (v, h);
                        }
                    }
                    best
                }
            }
        })
        .collect();
    Ok(out)
}

/// Fidelity time traces of the vacuum-singlet `|1L>` read at blocks
/// `{i-2, i-1, i}` for each requested site `i`.
pub fn fidelity_site_traces(spec: &SweepSpec) -> Result<Vec<(usize, FidelityTrace)>> {
    spec.validate()?;
    let n = spec.chain_lengths[0];
    let encoding = LogicalEncoding::new(EncodingName::VacuumSinglet);
    if spec.trace_sites.is_empty() {
        return Err(Error::InvalidGrid("trace sweep needs at least one site".into()));
    }
    for &site in &spec.trace_sites {
        if site < encoding.block_size() || site > n {
            return Err(Error::InvalidBlock(format!(
                "trace site {site} needs a block of {} fitting a chain of {n}",
                encoding.block_size()
            )));
        }
    }
    let params = spec.params(n)?;
    let bloch = BlochState::one();
    let times = spec.time_grid.values();
    spec.trace_sites
        .par_iter()
        .map(|&site| {
            let table = ModeTable::new(&params);
            let kernel = kernel_for(&params, &table, &encoding, &bloch, site, n)?;
            let values = fidelity_series(&kernel, &table, &spec.time_grid)?;
            Ok((site, FidelityTrace::new(times.clone(), values, spec.peak_prominence)))
        })
        .collect()
}
