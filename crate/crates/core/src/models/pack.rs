//! Series-parallel pack of equivalent-circuit cells.
//!
//! The pack is `np` parallel strings, each `ns` cells in series. A string
//! lumps into an EMF `E_s` (sum of its cells' OCVs) behind a resistance
//! `R_s` (sum of cell and interconnect resistances). Every step:
//!
//! 1. cell OCVs are evaluated and summed per string;
//! 2. the terminal voltage `V` with `V * sum_s (V - E_s) / R_s = p` is found;
//! 3. every cell is advanced with its string current.
//!
//! The BMS clips the request using the highest-OCV cell when charging and the
//! lowest-OCV cell when discharging, scaled by the cell count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ecm::{limits_with_r, CellParams, EcmState};
use crate::models::ModelKind;
use crate::par;
use crate::storage::{
    clip_power, ParamValue, Parameterized, Storage, StorageResponse, StorageState,
};
use crate::units::{hours_of, CurrentA, DurationS, PowerW, Soc};

/// Default per-junction interconnect resistance.
pub const DEFAULT_R_INTERCONNECT_OHM: f64 = 0.001;

/// Packs with at least this many cells step in parallel under
/// [`Parallelism::Auto`].
pub const AUTO_PARALLEL_MIN_CELLS: usize = 4096;

const MAX_SOLVE_ITERATIONS: usize = 100;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parallelism {
    Sequential,
    Parallel,
    #[default]
    Auto,
}

impl Parallelism {
    fn enabled(self, cells: usize) -> bool {
        match self {
            Parallelism::Sequential => false,
            Parallelism::Parallel => true,
            Parallelism::Auto => cells >= AUTO_PARALLEL_MIN_CELLS,
        }
    }
}

/// Seeded cell-to-cell spread of initial SoC and internal resistance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Heterogeneity {
    /// Initial SoC offsets drawn uniformly from `[-soc_jitter, soc_jitter]`.
    #[serde(default)]
    pub soc_jitter: f64,
    /// Relative resistance offsets drawn uniformly from `[-r_jitter, r_jitter]`.
    #[serde(default)]
    pub r_jitter: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PackTopology {
    pub ns: usize,
    pub np: usize,
    pub r_interconnect_ohm: f64,
    pub heterogeneity: Option<Heterogeneity>,
}

impl PackTopology {
    pub fn uniform(ns: usize, np: usize, r_interconnect_ohm: f64) -> Self {
        Self {
            ns,
            np,
            r_interconnect_ohm,
            heterogeneity: None,
        }
    }

    pub fn num_cells(&self) -> usize {
        self.ns * self.np
    }

    pub fn validate(&self) -> Result<()> {
        if self.ns == 0 {
            return Err(Error::invalid("ns", "must be >= 1"));
        }
        if self.np == 0 {
            return Err(Error::invalid("np", "must be >= 1"));
        }
        if !(self.r_interconnect_ohm >= 0.0 && self.r_interconnect_ohm.is_finite()) {
            return Err(Error::invalid("r_interconnect_ohm", "must be finite and >= 0"));
        }
        if let Some(h) = self.heterogeneity {
            for (key, v) in [("soc_jitter", h.soc_jitter), ("r_jitter", h.r_jitter)] {
                if !(0.0..=0.2).contains(&v) {
                    return Err(Error::invalid(key, "must lie in [0, 0.2]"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PackParams {
    pub topology: PackTopology,
    pub cell: CellParams,
    pub initial_soc: Soc,
    pub parallelism: Parallelism,
}

impl PackParams {
    pub fn uniform(ns: usize, np: usize, initial_soc: Soc) -> Self {
        Self {
            topology: PackTopology::uniform(ns, np, DEFAULT_R_INTERCONNECT_OHM),
            cell: CellParams::default(),
            initial_soc,
            parallelism: Parallelism::Auto,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        self.cell.validate()
    }
}

/// Solved operating point of the string network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSolution {
    pub string_currents: Vec<f64>,
    pub terminal_v: f64,
    pub iterations: usize,
}

impl NetworkSolution {
    pub fn power(&self) -> f64 {
        self.terminal_v * self.string_currents.iter().sum::<f64>()
    }
}

/// Finds the terminal voltage at which parallel strings `(emf, resistance)`
/// absorb `p_pack` in total.
///
/// Safeguarded Newton on `f(V) = V * sum_s (V - E_s) / R_s - p`, falling back
/// to bisection whenever a step leaves the current bracket. The root lies on
/// the branch above the power minimum at `V = J / 2G`.
pub fn solve_network(emf: &[f64], resistance: &[f64], p_pack: PowerW) -> Result<NetworkSolution> {
    debug_assert_eq!(emf.len(), resistance.len());
    let p = p_pack.value();
    let (g, j) = emf
        .iter()
        .zip(resistance)
        .fold((0.0, 0.0), |(g, j), (e, r)| (g + 1.0 / r, j + e / r));
    let f = |v: f64| v * (g * v - j) - p;
    let df = |v: f64| 2.0 * g * v - j;
    let tol = 1e-9 * p.abs().max(1.0);

    let v_extremum = j / (2.0 * g);
    if f(v_extremum) > 0.0 {
        return Err(Error::PowerBelowMinimum {
            power_w: p,
            minimum_w: -j * j / (4.0 * g),
            ocv_v: j / g,
        });
    }
    let v_open = j / g;
    let (mut lo, mut hi) = if p >= 0.0 {
        (v_open, v_open + p / (g * v_open))
    } else {
        (v_extremum, v_open)
    };

    let mut v = v_open;
    let mut residual = f(v);
    let mut iterations = 0;
    while residual.abs() > tol {
        if iterations == MAX_SOLVE_ITERATIONS {
            return Err(Error::SolveDiverged {
                iterations,
                residual_w: residual,
            });
        }
        iterations += 1;
        if residual < 0.0 {
            lo = v;
        } else {
            hi = v;
        }
        let slope = df(v);
        let newton = v - residual / slope;
        v = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        residual = f(v);
    }

    Ok(NetworkSolution {
        string_currents: emf
            .iter()
            .zip(resistance)
            .map(|(e, r)| (v - e) / r)
            .collect(),
        terminal_v: v,
        iterations,
    })
}

/// Network solve from cell states: lumps each string and calls
/// [`solve_network`]. Returns per-string currents and the terminal voltage.
pub fn pack_solve(
    topology: &PackTopology,
    cell: &CellParams,
    cell_r: &[f64],
    cells: &[EcmState],
    p_pack: PowerW,
) -> Result<(Vec<CurrentA>, f64)> {
    let ns = topology.ns;
    let (emf, res): (Vec<f64>, Vec<f64>) = cells
        .chunks(ns)
        .zip(cell_r.chunks(ns))
        .map(|(string, rs)| {
            (
                string.iter().map(|c| c.ocv(cell)).sum::<f64>(),
                rs.iter().map(|r| r + topology.r_interconnect_ohm).sum::<f64>(),
            )
        })
        .unzip();
    let sol = solve_network(&emf, &res, p_pack)?;
    Ok((
        sol.string_currents.into_iter().map(CurrentA::raw).collect(),
        sol.terminal_v,
    ))
}

#[derive(Debug, Clone)]
pub struct PackBattery {
    params: PackParams,
    cells: Vec<EcmState>,
    cell_r: Vec<f64>,
    ocv: Vec<f64>,
    string_emf: Vec<f64>,
    string_r: Vec<f64>,
    string_currents: Vec<f64>,
    terminal_v: f64,
}

impl PackBattery {
    pub fn new(params: PackParams) -> Result<Self> {
        params.validate()?;
        let topo = params.topology;
        let n = topo.num_cells();
        let r0 = params.cell.r_internal_ohm;
        let soc0 = params.initial_soc.value();

        let (cells, cell_r) = match topo.heterogeneity {
            None => (
                vec![EcmState::at_soc(params.initial_soc, &params.cell); n],
                vec![r0; n],
            ),
            Some(h) => {
                let mut rng = ChaCha8Rng::seed_from_u64(h.seed);
                (0..n)
                    .map(|_| {
                        let ds = if h.soc_jitter > 0.0 {
                            rng.gen_range(-h.soc_jitter..=h.soc_jitter)
                        } else {
                            0.0
                        };
                        let dr = if h.r_jitter > 0.0 {
                            rng.gen_range(-h.r_jitter..=h.r_jitter)
                        } else {
                            0.0
                        };
                        (
                            EcmState::at_soc(Soc::saturating(soc0 + ds), &params.cell),
                            r0 * (1.0 + dr),
                        )
                    })
                    .unzip()
            }
        };

        let mut pack = Self {
            cells,
            cell_r,
            ocv: vec![0.0; n],
            string_emf: vec![0.0; topo.np],
            string_r: vec![0.0; topo.np],
            string_currents: vec![0.0; topo.np],
            terminal_v: 0.0,
            params,
        };
        pack.refresh_network();
        pack.terminal_v = pack.open_circuit_v();
        Ok(pack)
    }

    pub fn params(&self) -> &PackParams {
        &self.params
    }

    pub fn cells(&self) -> &[EcmState] {
        &self.cells
    }

    pub fn cell_resistances(&self) -> &[f64] {
        &self.cell_r
    }

    pub fn string_currents(&self) -> &[f64] {
        &self.string_currents
    }

    pub fn string_emfs(&self) -> &[f64] {
        &self.string_emf
    }

    pub fn terminal_v(&self) -> f64 {
        self.terminal_v
    }

    pub fn set_parallelism(&mut self, parallelism: Parallelism) {
        self.params.parallelism = parallelism;
    }

    fn parallel(&self) -> bool {
        self.params.parallelism.enabled(self.cells.len())
    }

    /// Re-evaluates cell OCVs and the lumped string EMFs and resistances.
    fn refresh_network(&mut self) {
        let ns = self.params.topology.ns;
        let parallel = self.parallel();
        let cell = &self.params.cell;
        let cells = &self.cells;
        par::for_each_chunk_mut(&mut self.ocv, ns, parallel, |s, out| {
            for (k, v) in out.iter_mut().enumerate() {
                *v = cells[s * ns + k].ocv(cell);
            }
        });
        let r_ic = self.params.topology.r_interconnect_ohm;
        for (s, (emf, res)) in self
            .string_emf
            .iter_mut()
            .zip(self.string_r.iter_mut())
            .enumerate()
        {
            let range = s * ns..(s + 1) * ns;
            *emf = self.ocv[range.clone()].iter().sum();
            *res = self.cell_r[range].iter().map(|r| r + r_ic).sum();
        }
    }

    fn open_circuit_v(&self) -> f64 {
        let (g, j) = self
            .string_emf
            .iter()
            .zip(&self.string_r)
            .fold((0.0, 0.0), |(g, j), (e, r)| (g + 1.0 / r, j + e / r));
        j / g
    }

    /// Limits from the extreme-OCV cells, scaled by the cell count. Requires
    /// fresh OCVs.
    fn limits_from_ocv(&self) -> (f64, f64) {
        let cell = &self.params.cell;
        let (mut i_hi, mut i_lo) = (0, 0);
        for (i, v) in self.ocv.iter().enumerate() {
            if *v > self.ocv[i_hi] {
                i_hi = i;
            }
            if *v < self.ocv[i_lo] {
                i_lo = i;
            }
        }
        let n = self.cells.len() as f64;
        let (_, hi) = limits_with_r(self.ocv[i_hi], self.cell_r[i_hi], cell);
        let (lo, _) = limits_with_r(self.ocv[i_lo], self.cell_r[i_lo], cell);
        (lo.value() * n, hi.value() * n)
    }

    /// `(p_min, p_max)` the pack BMS allows in its current state.
    pub fn pack_power_limits(&self) -> (PowerW, PowerW) {
        let (lo, hi) = self.limits_from_ocv();
        (PowerW::raw(lo), PowerW::raw(hi))
    }

    /// Shifts the terminal voltage back inside the window where no cell's
    /// coulomb counter would leave `[0, Q]` during a step of `hours`.
    fn clamp_to_charge_bounds(&self, v: f64, hours: f64) -> f64 {
        let ns = self.params.topology.ns;
        let q = self.params.cell.capacity_ah;
        let mut v_hi = f64::INFINITY;
        let mut v_lo = f64::NEG_INFINITY;
        for (s, string) in self.cells.chunks(ns).enumerate() {
            let (min_q, max_q) = string
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
                    (lo.min(c.charge_ah), hi.max(c.charge_ah))
                });
            let i_max = (q - max_q) / hours;
            let i_min = -min_q / hours;
            v_hi = v_hi.min(self.string_emf[s] + i_max * self.string_r[s]);
            v_lo = v_lo.max(self.string_emf[s] + i_min * self.string_r[s]);
        }
        if v > v_hi {
            v_hi
        } else if v < v_lo {
            v_lo
        } else {
            v
        }
    }

    fn zero_step(&mut self, duration: DurationS) -> StorageResponse {
        self.string_currents.iter_mut().for_each(|i| *i = 0.0);
        for (c, v) in self.cells.iter_mut().zip(&self.ocv) {
            c.last_current_a = 0.0;
            c.last_terminal_v = *v;
        }
        self.terminal_v = self.open_circuit_v();
        StorageResponse::constant(PowerW::ZERO, duration, self.soc())
    }

    /// Clip, solve the network, then advance every cell with its string
    /// current.
    pub fn pack_update(&mut self, requested: PowerW, duration: DurationS) -> Result<StorageResponse> {
        self.refresh_network();
        let (lo, hi) = self.limits_from_ocv();
        let target = clip_power(requested.value(), lo, hi);
        if target == 0.0 {
            // open contactor: no balancing currents at rest
            return Ok(self.zero_step(duration));
        }

        let solution = solve_network(&self.string_emf, &self.string_r, PowerW::raw(target))?;
        let h = hours_of(duration);
        let v = self.clamp_to_charge_bounds(solution.terminal_v, h);
        let applied = if v == solution.terminal_v {
            self.string_currents.copy_from_slice(&solution.string_currents);
            target
        } else {
            for (s, i) in self.string_currents.iter_mut().enumerate() {
                *i = (v - self.string_emf[s]) / self.string_r[s];
            }
            v * self.string_currents.iter().sum::<f64>()
        };
        self.terminal_v = v;

        let ns = self.params.topology.ns;
        let parallel = self.parallel();
        let q = self.params.cell.capacity_ah;
        let (ocv, cell_r, currents) = (&self.ocv, &self.cell_r, &self.string_currents);
        par::for_each_chunk_mut(&mut self.cells, ns, parallel, |s, string| {
            for (k, c) in string.iter_mut().enumerate() {
                let idx = s * ns + k;
                c.step_current(currents[s], h, ocv[idx], cell_r[idx], q);
            }
        });

        Ok(StorageResponse::constant(
            PowerW::raw(applied),
            duration,
            self.soc(),
        ))
    }

    fn mean_cell_soc(&self) -> f64 {
        let cell = &self.params.cell;
        let total: f64 = self.cells.iter().map(|c| c.soc(cell).value()).sum();
        total / self.cells.len() as f64
    }
}

impl Parameterized for PackBattery {
    fn set_parameter(&mut self, key: &str, value: ParamValue) -> Result<()> {
        match key {
            "r_interconnect_ohm" => {
                let v = value.number(key)?;
                let mut topo = self.params.topology;
                topo.r_interconnect_ohm = v;
                topo.validate()?;
                self.params.topology = topo;
                Ok(())
            }
            "r_internal_ohm" => {
                let old = self.params.cell.r_internal_ohm;
                self.params.cell.set(key, value)?;
                let scale = self.params.cell.r_internal_ohm / old;
                self.cell_r.iter_mut().for_each(|r| *r *= scale);
                Ok(())
            }
            _ if self.params.cell.set(key, value)? => Ok(()),
            _ => Err(Error::UnknownParameter(key.to_owned())),
        }
    }

    fn parameter(&self, key: &str) -> Result<ParamValue> {
        match key {
            "r_interconnect_ohm" => Ok(self.params.topology.r_interconnect_ohm.into()),
            _ => self
                .params
                .cell
                .get(key)
                .map(ParamValue::Number)
                .ok_or_else(|| Error::UnknownParameter(key.to_owned())),
        }
    }
}

impl Storage for PackBattery {
    fn model(&self) -> ModelKind {
        ModelKind::Pack
    }

    fn update(&mut self, requested: PowerW, duration: DurationS) -> Result<StorageResponse> {
        self.pack_update(requested, duration)
    }

    fn soc(&self) -> Soc {
        Soc::saturating(self.mean_cell_soc())
    }

    fn state(&self) -> StorageState {
        let (min_v, max_v) = self
            .cells
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
                (lo.min(c.last_terminal_v), hi.max(c.last_terminal_v))
            });
        StorageState::new()
            .with("min_cell_v", min_v)
            .with("max_cell_v", max_v)
            .with("cell_soc_mean", self.mean_cell_soc())
            .with("pack_terminal_v", self.terminal_v)
    }

    fn power_limits(&self, _duration: DurationS) -> (PowerW, PowerW) {
        let (lo, hi) = self.limits_from_ocv();
        (PowerW::raw(lo.min(0.0)), PowerW::raw(hi.max(0.0)))
    }
}
