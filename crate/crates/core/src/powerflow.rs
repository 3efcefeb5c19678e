//! Newton-Raphson AC power flow for the radial feeder, per-unit formulation.
//!
//! Bases: `S_base` equals the transformer rating; voltage bases follow the
//! transformer's nominal voltages per level, so the transformer has a 1:1
//! per-unit ratio. Lines use the π-equivalent with the cable's shunt
//! capacitance; the transformer contributes its short-circuit series
//! impedance plus a magnetizing shunt (iron-loss conductance from `pfe`,
//! admittance magnitude from `i0`) attached at the LV terminal.
//!
//! Sign conventions: injections are generator-positive. `p_ipf`/`q_ipf` is
//! the power leaving the feeder into the upstream MV grid at the slack bus
//! (export positive), and `p_loss <= 0` for dissipative networks, so that
//! `p_ipf = sum(p_der) + p_loss`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::grid::GridModel;

/// Convergence threshold on the largest bus power mismatch, per-unit.
pub const MISMATCH_TOL_PU: f64 = 1e-8;

/// Newton iteration cap (including the final polishing step).
pub const MAX_ITERATIONS: u32 = 30;

/// System frequency for the line shunt susceptance.
pub const FREQUENCY_HZ: f64 = 50.0;

/// Branches whose nameplate impedance is exactly zero (ideal transformer,
/// zero-length line) are treated as direct connections with this residual
/// series impedance. At flat voltage no current flows through them, so the
/// zero-injection fixed point stays exact.
const DIRECT_CONNECTION_Z_PU: f64 = 1e-8;

/// One sampled setpoint vector, kW/kvar per DER, generator-positive.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlScenario {
    pub scenario_id: u64,
    /// `(p_kw, q_kvar)` per DER, ordered by feeder node.
    pub setpoints: Vec<(f64, f64)>,
}

/// Solved state of one scenario.
#[derive(Debug, Clone, Serialize)]
pub struct PowerFlowResult {
    /// False when the iteration cap was hit; such results carry the last
    /// iterate and must be excluded from statistics.
    pub converged: bool,
    pub iterations: u32,
    /// Voltage magnitude per bus, per-unit (bus 0 = MV slack).
    pub v_mag: Vec<f64>,
    /// Voltage angle per bus, radians.
    pub v_ang: Vec<f64>,
    /// Loading per line segment, percent of thermal rating
    /// (max of both ends).
    pub line_loading_pct: Vec<f64>,
    /// Transformer loading, percent of rated apparent power
    /// (max of both sides).
    pub trafo_loading_pct: f64,
    /// Active interconnection power flow at the slack bus, kW,
    /// export-positive.
    pub p_ipf_kw: f64,
    /// Reactive interconnection power flow, kvar, export-positive.
    pub q_ipf_kvar: f64,
    /// Network active losses, kW, `<= 0` by convention.
    pub p_loss_kw: f64,
    /// Network reactive balance, kvar (negative when the network absorbs).
    pub q_loss_kvar: f64,
}

impl PowerFlowResult {
    /// Smallest voltage magnitude among LV buses (slack excluded).
    pub fn min_lv_voltage_pu(&self) -> f64 {
        self.v_mag[1..].iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest voltage magnitude among LV buses (slack excluded).
    pub fn max_lv_voltage_pu(&self) -> f64 {
        self.v_mag[1..]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest line loading, percent.
    pub fn max_line_loading_pct(&self) -> f64 {
        self.line_loading_pct
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PowerFlowError {
    #[error("scenario supplies {got} setpoints but the grid has {expected} DERs")]
    SetpointCountMismatch { expected: usize, got: usize },
    #[error("Jacobian is singular; grid parameters are degenerate")]
    SingularJacobian,
}

/// Aggregated setpoint box of all DERs: the theoretical envelope of the
/// interconnection power flow when losses are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AggregateLimits {
    pub p_min_kw: f64,
    pub p_max_kw: f64,
    pub q_min_kvar: f64,
    pub q_max_kvar: f64,
}

/// Sums the per-DER boxes into the aggregate rectangle.
pub fn aggregate_limits(grid: &GridModel) -> AggregateLimits {
    let p: f64 = grid.ders.iter().map(|d| d.p_inst_kw).sum();
    let q: f64 = grid.ders.iter().map(|d| d.s_max_kva).sum();
    AggregateLimits {
        p_min_kw: -p,
        p_max_kw: p,
        q_min_kvar: -q,
        q_max_kvar: q,
    }
}

#[derive(Debug, Clone, Copy)]
enum BranchKind {
    /// Thermal current rating and the kA base of its voltage level.
    Line { max_i_ka: f64, i_base_ka: f64 },
    /// Apparent-power rating, MVA.
    Trafo { s_rated_mva: f64 },
}

#[derive(Debug, Clone, Copy)]
struct Branch {
    from: usize,
    to: usize,
    y_series: Complex64,
    y_shunt_from: Complex64,
    y_shunt_to: Complex64,
    kind: BranchKind,
}

struct Network {
    ybus: DMatrix<Complex64>,
    branches: Vec<Branch>,
    /// System base power, MVA.
    s_base_mva: f64,
}

fn clamp_series_impedance(z: Complex64) -> Complex64 {
    if z.norm() < 1e-12 {
        Complex64::new(DIRECT_CONNECTION_Z_PU, 0.0)
    } else {
        z
    }
}

fn assemble(grid: &GridModel) -> Network {
    let spec = &grid.spec;
    let n = grid.n_buses();
    let s_base_mva = spec.trafo.s_rated_mva;
    let mut ybus = DMatrix::<Complex64>::zeros(n, n);
    let mut branches = Vec::with_capacity(n - 1);

    // Transformer between slack (0) and LV bus (1). Short-circuit impedance
    // in per-unit on the rated base, which equals the system base here.
    let z_t = {
        let z_mag = spec.trafo.vk_percent / 100.0;
        let r = spec.trafo.vkr_percent / 100.0;
        let x = (z_mag * z_mag - r * r).max(0.0).sqrt();
        clamp_series_impedance(Complex64::new(r, x))
    };
    // Magnetizing branch at the LV terminal: conductance carries the iron
    // losses, the admittance magnitude comes from the no-load current.
    let g_fe = spec.trafo.pfe_kw / (s_base_mva * 1000.0);
    let y_m_mag = spec.trafo.i0_percent / 100.0;
    let b_m = (y_m_mag * y_m_mag - g_fe * g_fe).max(0.0).sqrt();
    branches.push(Branch {
        from: 0,
        to: 1,
        y_series: 1.0 / z_t,
        y_shunt_from: Complex64::new(0.0, 0.0),
        y_shunt_to: Complex64::new(g_fe, -b_m),
        kind: BranchKind::Trafo {
            s_rated_mva: spec.trafo.s_rated_mva,
        },
    });

    // Feeder segments in per-unit on the LV voltage base.
    let z_base_lv = spec.trafo.v_lv_kv * spec.trafo.v_lv_kv / s_base_mva;
    let i_base_ka = s_base_mva / (3.0f64.sqrt() * spec.trafo.v_lv_kv);
    for seg in &grid.lines {
        let len_km = seg.length_m / 1000.0;
        let z = clamp_series_impedance(Complex64::new(
            spec.line.r_ohm_per_km * len_km / z_base_lv,
            spec.line.x_ohm_per_km * len_km / z_base_lv,
        ));
        let b_total = 2.0
            * std::f64::consts::PI
            * FREQUENCY_HZ
            * spec.line.c_nf_per_km
            * 1e-9
            * len_km
            * z_base_lv;
        let y_half = Complex64::new(0.0, b_total / 2.0);
        branches.push(Branch {
            from: seg.from_bus,
            to: seg.to_bus,
            y_series: 1.0 / z,
            y_shunt_from: y_half,
            y_shunt_to: y_half,
            kind: BranchKind::Line {
                max_i_ka: spec.line.max_i_ka,
                i_base_ka,
            },
        });
    }

    for b in &branches {
        ybus[(b.from, b.from)] += b.y_series + b.y_shunt_from;
        ybus[(b.to, b.to)] += b.y_series + b.y_shunt_to;
        ybus[(b.from, b.to)] -= b.y_series;
        ybus[(b.to, b.from)] -= b.y_series;
    }

    Network {
        ybus,
        branches,
        s_base_mva,
    }
}

/// Complex bus voltages from polar state.
fn complex_voltages(v_mag: &[f64], v_ang: &[f64]) -> Vec<Complex64> {
    v_mag
        .iter()
        .zip(v_ang)
        .map(|(&m, &a)| Complex64::from_polar(m, a))
        .collect()
}

/// Complex power injected into the network at every bus, per-unit.
fn injections(ybus: &DMatrix<Complex64>, v: &[Complex64]) -> Vec<Complex64> {
    let n = v.len();
    (0..n)
        .map(|i| {
            let mut current = Complex64::new(0.0, 0.0);
            for j in 0..n {
                current += ybus[(i, j)] * v[j];
            }
            v[i] * current.conj()
        })
        .collect()
}

/// Builds the polar-form Jacobian over the PQ buses and applies one Newton
/// update for the given mismatches.
fn newton_step(
    ybus: &DMatrix<Complex64>,
    pq: &[usize],
    v_mag: &mut [f64],
    v_ang: &mut [f64],
    dp: &[f64],
    dq: &[f64],
) -> Result<(), PowerFlowError> {
    let m = pq.len();
    let v = complex_voltages(v_mag, v_ang);
    let s = injections(ybus, &v);

    // [ dP/dθ  dP/dV ] [Δθ]   [ΔP]
    // [ dQ/dθ  dQ/dV ] [ΔV] = [ΔQ]
    let mut jac = DMatrix::<f64>::zeros(2 * m, 2 * m);
    for (r, &i) in pq.iter().enumerate() {
        let (p_i, q_i) = (s[i].re, s[i].im);
        let (g_ii, b_ii) = (ybus[(i, i)].re, ybus[(i, i)].im);
        for (c, &j) in pq.iter().enumerate() {
            if i == j {
                jac[(r, c)] = -q_i - b_ii * v_mag[i] * v_mag[i];
                jac[(r, m + c)] = p_i / v_mag[i] + g_ii * v_mag[i];
                jac[(m + r, c)] = p_i - g_ii * v_mag[i] * v_mag[i];
                jac[(m + r, m + c)] = q_i / v_mag[i] - b_ii * v_mag[i];
            } else {
                let theta_ij = v_ang[i] - v_ang[j];
                let (sin, cos) = theta_ij.sin_cos();
                let (g_ij, b_ij) = (ybus[(i, j)].re, ybus[(i, j)].im);
                let vi_vj = v_mag[i] * v_mag[j];
                jac[(r, c)] = vi_vj * (g_ij * sin - b_ij * cos);
                jac[(r, m + c)] = v_mag[i] * (g_ij * cos + b_ij * sin);
                jac[(m + r, c)] = -vi_vj * (g_ij * cos + b_ij * sin);
                jac[(m + r, m + c)] = v_mag[i] * (g_ij * sin - b_ij * cos);
            }
        }
    }

    let mut rhs = DVector::<f64>::zeros(2 * m);
    for r in 0..m {
        rhs[r] = dp[r];
        rhs[m + r] = dq[r];
    }
    let step = jac
        .lu()
        .solve(&rhs)
        .ok_or(PowerFlowError::SingularJacobian)?;
    for (r, &i) in pq.iter().enumerate() {
        v_ang[i] += step[r];
        v_mag[i] += step[m + r];
    }
    Ok(())
}

/// Solves the power flow for one scenario.
///
/// Non-convergence is not an `Err`: the result comes back flagged so the
/// caller can count and exclude it. Errors are reserved for structurally
/// invalid inputs and a degenerate Jacobian.
pub fn solve(
    grid: &GridModel,
    scenario: &ControlScenario,
) -> Result<PowerFlowResult, PowerFlowError> {
    if scenario.setpoints.len() != grid.ders.len() {
        return Err(PowerFlowError::SetpointCountMismatch {
            expected: grid.ders.len(),
            got: scenario.setpoints.len(),
        });
    }

    let net = assemble(grid);
    let n = grid.n_buses();
    let s_base_kw = net.s_base_mva * 1000.0;

    // Scheduled injections, per-unit, generator-positive. Bus 1 (transformer
    // LV bus) carries no DER.
    let mut p_spec = vec![0.0; n];
    let mut q_spec = vec![0.0; n];
    for (der, &(p_kw, q_kvar)) in grid.ders.iter().zip(&scenario.setpoints) {
        let bus = der.node_index + 1;
        p_spec[bus] = p_kw / s_base_kw;
        q_spec[bus] = q_kvar / s_base_kw;
    }

    // Flat start; slack voltage is held fixed throughout.
    let mut v_mag = vec![1.0; n];
    let mut v_ang = vec![0.0; n];
    v_mag[0] = grid.spec.slack_v_pu;

    let pq: Vec<usize> = (1..n).collect();
    let mismatch = |v_mag: &[f64], v_ang: &[f64]| -> (Vec<f64>, Vec<f64>, f64) {
        let v = complex_voltages(v_mag, v_ang);
        let s = injections(&net.ybus, &v);
        let mut dp = Vec::with_capacity(pq.len());
        let mut dq = Vec::with_capacity(pq.len());
        let mut worst = 0.0f64;
        for &i in &pq {
            let dpi = p_spec[i] - s[i].re;
            let dqi = q_spec[i] - s[i].im;
            worst = worst.max(dpi.abs()).max(dqi.abs());
            dp.push(dpi);
            dq.push(dqi);
        }
        (dp, dq, worst)
    };

    let (mut dp, mut dq, mut worst) = mismatch(&v_mag, &v_ang);
    let mut iterations = 0u32;
    let mut converged = worst < MISMATCH_TOL_PU;

    while !converged && iterations < MAX_ITERATIONS {
        newton_step(&net.ybus, &pq, &mut v_mag, &mut v_ang, &dp, &dq)?;
        iterations += 1;

        (dp, dq, worst) = mismatch(&v_mag, &v_ang);
        if !worst.is_finite() {
            break;
        }
        if worst < MISMATCH_TOL_PU {
            converged = true;
            // One polishing step: quadratic convergence drives the residual
            // to ~1e-15 pu, so the reported power balance closes far tighter
            // than the loop tolerance.
            if iterations < MAX_ITERATIONS && worst > 0.0 {
                newton_step(&net.ybus, &pq, &mut v_mag, &mut v_ang, &dp, &dq)?;
                iterations += 1;
            }
        }
    }

    let v = complex_voltages(&v_mag, &v_ang);
    let s = injections(&net.ybus, &v);

    // Branch flows for loadings.
    let mut line_loading_pct = Vec::new();
    let mut trafo_loading_pct = 0.0;
    for br in &net.branches {
        let i_from = br.y_series * (v[br.from] - v[br.to]) + br.y_shunt_from * v[br.from];
        let i_to = br.y_series * (v[br.to] - v[br.from]) + br.y_shunt_to * v[br.to];
        match br.kind {
            BranchKind::Line {
                max_i_ka,
                i_base_ka,
            } => {
                let worst_ka = i_from.norm().max(i_to.norm()) * i_base_ka;
                line_loading_pct.push(worst_ka / max_i_ka * 100.0);
            }
            BranchKind::Trafo { s_rated_mva } => {
                let s_from = (v[br.from] * i_from.conj()).norm();
                let s_to = (v[br.to] * i_to.conj()).norm();
                trafo_loading_pct = s_from.max(s_to) * net.s_base_mva / s_rated_mva * 100.0;
            }
        }
    }

    // Losses as total network absorption, computed from the solved voltages
    // alone; the power-balance identity downstream is then a real
    // consistency check rather than a tautology.
    let absorbed: Complex64 = s.iter().sum();
    Ok(PowerFlowResult {
        converged,
        iterations,
        v_mag,
        v_ang,
        line_loading_pct,
        trafo_loading_pct,
        p_ipf_kw: -s[0].re * s_base_kw,
        q_ipf_kvar: -s[0].im * s_base_kw,
        p_loss_kw: -absorbed.re * s_base_kw,
        q_loss_kvar: -absorbed.im * s_base_kw,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, FeederSpec};

    fn scenario(setpoints: Vec<(f64, f64)>) -> ControlScenario {
        ControlScenario {
            scenario_id: 0,
            setpoints,
        }
    }

    fn lossless_spec(n: usize) -> FeederSpec {
        let mut spec = FeederSpec::canonical(n);
        spec.line.r_ohm_per_km = 0.0;
        spec.line.x_ohm_per_km = 0.0;
        spec.line.c_nf_per_km = 0.0;
        spec.trafo.vk_percent = 0.0;
        spec.trafo.vkr_percent = 0.0;
        spec.trafo.pfe_kw = 0.0;
        spec.trafo.i0_percent = 0.0;
        spec
    }

    #[test]
    fn lossless_zero_injection_is_exactly_flat() {
        let grid = build_grid(&lossless_spec(3)).unwrap();
        let r = solve(&grid, &scenario(vec![(0.0, 0.0); 3])).unwrap();
        assert!(r.converged);
        assert!(r.iterations <= 2);
        assert!(r.v_mag.iter().all(|&v| v == 1.0));
        assert_eq!(r.p_ipf_kw, 0.0);
        assert_eq!(r.q_ipf_kvar, 0.0);
    }

    #[test]
    fn power_balance_closes() {
        let grid = build_grid(&FeederSpec::canonical(9)).unwrap();
        let p = grid.ders[0].p_inst_kw;
        let s = grid.ders[0].s_max_kva;
        let patterns: Vec<Vec<(f64, f64)>> = vec![
            vec![(p, 0.0); 9],
            vec![(-p, 0.0); 9],
            vec![(0.0, s); 9],
            vec![(p, -s); 9],
            (0..9).map(|j| (p * (j as f64 / 9.0), -s * 0.3)).collect(),
        ];
        for setpoints in patterns {
            let sum_p: f64 = setpoints.iter().map(|s| s.0).sum();
            let sum_q: f64 = setpoints.iter().map(|s| s.1).sum();
            let r = solve(&grid, &scenario(setpoints)).unwrap();
            assert!(r.converged);
            assert!(
                (r.p_ipf_kw - sum_p - r.p_loss_kw).abs() <= 1e-6,
                "active balance off by {}",
                (r.p_ipf_kw - sum_p - r.p_loss_kw).abs()
            );
            assert!(
                (r.q_ipf_kvar - sum_q - r.q_loss_kvar).abs() <= 1e-6,
                "reactive balance off by {}",
                (r.q_ipf_kvar - sum_q - r.q_loss_kvar).abs()
            );
        }
    }

    #[test]
    fn voltage_drops_monotonically_under_consumption() {
        let grid = build_grid(&FeederSpec::canonical(9)).unwrap();
        let p = grid.ders[0].p_inst_kw;
        let r = solve(&grid, &scenario(vec![(-p, 0.0); 9])).unwrap();
        assert!(r.converged);
        for w in r.v_mag[1..].windows(2) {
            assert!(w[0] >= w[1], "voltage must not rise along the feeder");
        }
        assert!(r.max_lv_voltage_pu() < 1.0);
    }

    #[test]
    fn losses_are_negative() {
        let grid = build_grid(&FeederSpec::canonical(3)).unwrap();
        let r = solve(&grid, &scenario(vec![(50.0, 10.0); 3])).unwrap();
        assert!(r.converged);
        assert!(r.p_loss_kw < 0.0);
        // Iron losses dissipate even at zero setpoints.
        let r0 = solve(&grid, &scenario(vec![(0.0, 0.0); 3])).unwrap();
        assert!(r0.p_loss_kw < 0.0);
    }

    #[test]
    fn full_export_raises_voltage_and_stays_below_injection() {
        let grid = build_grid(&FeederSpec::canonical(1)).unwrap();
        let r = solve(&grid, &scenario(vec![(200.0, 0.0)])).unwrap();
        assert!(r.converged);
        // Reference value from tools/make_powerflow_fixtures.py (two
        // independent solvers): 180.255281 kW after ~19.7 kW of losses.
        assert!((r.p_ipf_kw - 180.255281).abs() < 0.01);
        assert!(r.p_ipf_kw < 200.0);
        assert!(r.v_mag[2] > 1.0);
    }

    #[test]
    fn full_import_lowers_voltage_and_adds_losses() {
        let grid = build_grid(&FeederSpec::canonical(1)).unwrap();
        let r = solve(&grid, &scenario(vec![(-200.0, 0.0)])).unwrap();
        assert!(r.converged);
        assert!(r.v_mag[2] < 1.0);
        // Import plus losses: reference value -230.782986 kW.
        assert!(r.p_ipf_kw < -200.0);
        assert!((r.p_ipf_kw - -230.782986).abs() < 0.01);
    }

    #[test]
    fn extreme_corners_converge_within_cap() {
        for n in [1usize, 3, 9, 27] {
            let grid = build_grid(&FeederSpec::canonical(n)).unwrap();
            let p = grid.ders[0].p_inst_kw;
            let s = grid.ders[0].s_max_kva;
            for corner in [(p, s), (p, -s), (-p, s), (-p, -s)] {
                let r = solve(&grid, &scenario(vec![corner; n])).unwrap();
                assert!(r.converged, "corner {corner:?} on n={n}");
                assert!(r.iterations < MAX_ITERATIONS);
            }
        }
    }

    #[test]
    fn line_overload_detected_at_extremes() {
        let grid = build_grid(&FeederSpec::canonical(1)).unwrap();
        let r = solve(&grid, &scenario(vec![(200.0, 222.2)])).unwrap();
        assert!(r.converged);
        assert!(r.max_line_loading_pct() > 100.0);
        assert!(r.trafo_loading_pct > 50.0);
    }

    #[test]
    fn setpoint_count_mismatch_rejected() {
        let grid = build_grid(&FeederSpec::canonical(3)).unwrap();
        let err = solve(&grid, &scenario(vec![(0.0, 0.0)])).unwrap_err();
        assert_eq!(
            err,
            PowerFlowError::SetpointCountMismatch {
                expected: 3,
                got: 1
            }
        );
    }

    #[test]
    fn singular_linear_system_is_reported() {
        // Degenerate PQ system: duplicate bus indices collapse the Jacobian.
        let ybus = DMatrix::<Complex64>::zeros(3, 3);
        let mut v_mag = vec![1.0, 1.0, 1.0];
        let mut v_ang = vec![0.0, 0.0, 0.0];
        let err = newton_step(
            &ybus,
            &[1, 2],
            &mut v_mag,
            &mut v_ang,
            &[0.1, 0.1],
            &[0.0, 0.0],
        )
        .unwrap_err();
        assert_eq!(err, PowerFlowError::SingularJacobian);
    }

    #[test]
    fn aggregate_limits_examples() {
        for n in [1usize, 3, 9, 27] {
            let grid = build_grid(&FeederSpec::canonical(n)).unwrap();
            let lim = aggregate_limits(&grid);
            assert!((lim.p_max_kw - 200.0).abs() < 1e-9);
            assert!((lim.p_min_kw + 200.0).abs() < 1e-9);
            // Equal shares keep the aggregate q limit at total/cos_phi.
            assert!((lim.q_max_kvar - 200.0 / 0.9).abs() < 1e-9);
            assert_eq!(lim.q_min_kvar, -lim.q_max_kvar);
        }
    }

    #[test]
    fn direct_connection_limit_stays_flat() {
        // Ideal transformer and zero-impedance lines must not produce NaN.
        let grid = build_grid(&lossless_spec(1)).unwrap();
        let r = solve(&grid, &scenario(vec![(0.0, 0.0)])).unwrap();
        assert!(r.converged);
        assert!(r.v_mag.iter().all(|v| v.is_finite()));
    }
}
