//! Feasibility classification of solved scenarios.
//!
//! A scenario is checked against three constraint families: the voltage
//! band on all LV buses, thermal loading of the branches, and each unit's
//! inverter apparent-power circle. The grid-side verdict combines voltage
//! and loading; the full verdict adds the inverter circles.

use crate::grid::{FeederSpec, GridModel};
use crate::powerflow::{ControlScenario, PowerFlowResult};
use std::io::{self, Write};

/// Constraint thresholds applied to a solved scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintPolicy {
    pub v_min_pu: f64,
    pub v_max_pu: f64,
    /// Thermal limit in percent of the rated current.
    pub max_loading_pct: f64,
    /// When set, transformer loading joins the thermal check. It is
    /// reported either way but excluded from the verdict by default, since
    /// the aggregate working range is limited by the feeder itself.
    pub include_trafo_loading: bool,
}

impl ConstraintPolicy {
    pub fn from_spec(spec: &FeederSpec) -> Self {
        Self {
            v_min_pu: spec.v_min_pu,
            v_max_pu: spec.v_max_pu,
            max_loading_pct: 100.0,
            include_trafo_loading: false,
        }
    }
}

/// Verdict under grid constraints only (voltage band and thermal loading).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GridClass {
    Feasible,
    VoltageOnly,
    OverloadOnly,
    Both,
}

impl GridClass {
    pub fn as_str(self) -> &'static str {
        match self {
            GridClass::Feasible => "feasible",
            GridClass::VoltageOnly => "voltage_only",
            GridClass::OverloadOnly => "overload_only",
            GridClass::Both => "both",
        }
    }
}

/// Verdict under grid constraints plus inverter circles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FullClass {
    Feasible,
    GridOnly,
    InverterOnly,
    Both,
}

impl FullClass {
    pub fn as_str(self) -> &'static str {
        match self {
            FullClass::Feasible => "feasible",
            FullClass::GridOnly => "grid_only",
            FullClass::InverterOnly => "inverter_only",
            FullClass::Both => "both",
        }
    }
}

/// Outcome of the three constraint checks for one scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Classification {
    pub volt_ok: bool,
    pub line_ok: bool,
    pub inverter_ok: bool,
}

impl Classification {
    pub fn grid_ok(self) -> bool {
        self.volt_ok && self.line_ok
    }

    pub fn all_ok(self) -> bool {
        self.grid_ok() && self.inverter_ok
    }

    pub fn grid_class(self) -> GridClass {
        match (self.volt_ok, self.line_ok) {
            (true, true) => GridClass::Feasible,
            (false, true) => GridClass::VoltageOnly,
            (true, false) => GridClass::OverloadOnly,
            (false, false) => GridClass::Both,
        }
    }

    pub fn full_class(self) -> FullClass {
        match (self.grid_ok(), self.inverter_ok) {
            (true, true) => FullClass::Feasible,
            (false, true) => FullClass::GridOnly,
            (true, false) => FullClass::InverterOnly,
            (false, false) => FullClass::Both,
        }
    }
}

/// Classifies one solved scenario, or `None` when the solver did not
/// converge (such scenarios are tallied as unclassified).
pub fn classify(
    scenario: &ControlScenario,
    result: &PowerFlowResult,
    grid: &GridModel,
    policy: &ConstraintPolicy,
) -> Option<Classification> {
    if !result.converged {
        return None;
    }
    let volt_ok = result
        .v_mag
        .iter()
        .skip(1) // the slack bus holds the reference voltage
        .all(|&v| v >= policy.v_min_pu && v <= policy.v_max_pu);
    let mut line_ok = result
        .line_loading_pct
        .iter()
        .all(|&l| l <= policy.max_loading_pct);
    if policy.include_trafo_loading {
        line_ok = line_ok && result.trafo_loading_pct <= policy.max_loading_pct;
    }
    let inverter_ok = scenario
        .setpoints
        .iter()
        .zip(&grid.ders)
        .all(|(&(p, q), der)| p * p + q * q <= der.s_max_kva * der.s_max_kva);
    Some(Classification {
        volt_ok,
        line_ok,
        inverter_ok,
    })
}

/// One classified scenario, ready for export and plotting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifiedScenario {
    pub scenario_id: u64,
    pub p_ipf_kw: f64,
    pub q_ipf_kvar: f64,
    pub min_v_pu: f64,
    pub max_v_pu: f64,
    pub max_line_loading_pct: f64,
    /// `None` when the solver did not converge.
    pub classification: Option<Classification>,
}

/// Classifies scenario/result pairs index by index.
///
/// Panics if the two slices differ in length.
pub fn classify_batch(
    grid: &GridModel,
    policy: &ConstraintPolicy,
    scenarios: &[ControlScenario],
    results: &[PowerFlowResult],
) -> Vec<ClassifiedScenario> {
    assert_eq!(scenarios.len(), results.len());
    scenarios
        .iter()
        .zip(results)
        .map(|(scenario, result)| ClassifiedScenario {
            scenario_id: scenario.scenario_id,
            p_ipf_kw: result.p_ipf_kw,
            q_ipf_kvar: result.q_ipf_kvar,
            min_v_pu: result.min_lv_voltage_pu(),
            max_v_pu: result.max_lv_voltage_pu(),
            max_line_loading_pct: result.max_line_loading_pct(),
            classification: classify(scenario, result, grid, policy),
        })
        .collect()
}

/// Scenario counts per verdict.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassTally {
    pub total: usize,
    pub unclassified: usize,
    pub grid_feasible: usize,
    pub grid_voltage_only: usize,
    pub grid_overload_only: usize,
    pub grid_both: usize,
    pub full_feasible: usize,
    pub full_grid_only: usize,
    pub full_inverter_only: usize,
    pub full_both: usize,
    pub inverter_ok: usize,
}

impl ClassTally {
    pub fn from_rows(rows: &[ClassifiedScenario]) -> Self {
        let mut tally = Self {
            total: rows.len(),
            ..Self::default()
        };
        for row in rows {
            let Some(c) = row.classification else {
                tally.unclassified += 1;
                continue;
            };
            match c.grid_class() {
                GridClass::Feasible => tally.grid_feasible += 1,
                GridClass::VoltageOnly => tally.grid_voltage_only += 1,
                GridClass::OverloadOnly => tally.grid_overload_only += 1,
                GridClass::Both => tally.grid_both += 1,
            }
            match c.full_class() {
                FullClass::Feasible => tally.full_feasible += 1,
                FullClass::GridOnly => tally.full_grid_only += 1,
                FullClass::InverterOnly => tally.full_inverter_only += 1,
                FullClass::Both => tally.full_both += 1,
            }
            if c.inverter_ok {
                tally.inverter_ok += 1;
            }
        }
        tally
    }

    fn classified(&self) -> usize {
        self.total - self.unclassified
    }

    /// Fraction of classified scenarios passing the grid constraints.
    pub fn grid_feasible_rate(&self) -> f64 {
        rate(self.grid_feasible, self.classified())
    }

    /// Fraction of classified scenarios passing every constraint.
    pub fn full_feasible_rate(&self) -> f64 {
        rate(self.full_feasible, self.classified())
    }

    /// Fraction of classified scenarios whose units all respect their
    /// inverter circles.
    pub fn inverter_pass_rate(&self) -> f64 {
        rate(self.inverter_ok, self.classified())
    }
}

fn rate(count: usize, of: usize) -> f64 {
    if of == 0 {
        0.0
    } else {
        count as f64 / of as f64
    }
}

/// Writes classified scenarios as CSV:
/// `scenario_id, p_ipf_kw, q_ipf_kvar, min_v_pu, max_v_pu,
/// max_line_loading_pct, volt_ok, line_ok, inverter_ok, grid_class,
/// full_class`.
///
/// Unclassified (non-converged) rows carry `false` flags and the token
/// `unclassified` in both class columns.
pub fn write_classified_csv<W: Write>(w: &mut W, rows: &[ClassifiedScenario]) -> io::Result<()> {
    writeln!(
        w,
        "scenario_id,p_ipf_kw,q_ipf_kvar,min_v_pu,max_v_pu,max_line_loading_pct,\
         volt_ok,line_ok,inverter_ok,grid_class,full_class"
    )?;
    for row in rows {
        let (volt, line, inverter, grid_class, full_class) = match row.classification {
            Some(c) => (
                c.volt_ok,
                c.line_ok,
                c.inverter_ok,
                c.grid_class().as_str(),
                c.full_class().as_str(),
            ),
            None => (false, false, false, "unclassified", "unclassified"),
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            row.scenario_id,
            crate::numfmt::fmt_sig6(row.p_ipf_kw),
            crate::numfmt::fmt_sig6(row.q_ipf_kvar),
            crate::numfmt::fmt_sig6(row.min_v_pu),
            crate::numfmt::fmt_sig6(row.max_v_pu),
            crate::numfmt::fmt_sig6(row.max_line_loading_pct),
            volt,
            line,
            inverter,
            grid_class,
            full_class,
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::powerflow::solve;

    fn setup(n: usize) -> (GridModel, ConstraintPolicy) {
        let grid = build_grid(&FeederSpec::canonical(n)).unwrap();
        let policy = ConstraintPolicy::from_spec(&grid.spec);
        (grid, policy)
    }

    fn scenario(setpoints: Vec<(f64, f64)>) -> ControlScenario {
        ControlScenario {
            scenario_id: 0,
            setpoints,
        }
    }

    #[test]
    fn policy_defaults_follow_the_spec_band() {
        let (_, policy) = setup(3);
        assert_eq!(policy.v_min_pu, 0.9);
        assert_eq!(policy.v_max_pu, 1.1);
        assert_eq!(policy.max_loading_pct, 100.0);
        assert!(!policy.include_trafo_loading);
    }

    #[test]
    fn idle_feeder_is_fully_feasible() {
        let (grid, policy) = setup(3);
        let sc = scenario(vec![(0.0, 0.0); 3]);
        let result = solve(&grid, &sc).unwrap();
        let c = classify(&sc, &result, &grid, &policy).unwrap();
        assert!(c.volt_ok && c.line_ok && c.inverter_ok);
        assert_eq!(c.grid_class(), GridClass::Feasible);
        assert_eq!(c.full_class(), FullClass::Feasible);
    }

    #[test]
    fn deep_import_violates_voltage_and_loading() {
        let (grid, policy) = setup(1);
        let sc = scenario(vec![(-200.0, 0.0)]);
        let result = solve(&grid, &sc).unwrap();
        let c = classify(&sc, &result, &grid, &policy).unwrap();
        assert!(!c.volt_ok);
        assert!(!c.line_ok);
        assert!(c.inverter_ok);
        assert_eq!(c.grid_class(), GridClass::Both);
        assert_eq!(c.full_class(), FullClass::GridOnly);
    }

    #[test]
    fn single_circle_violation_flags_inverter_only() {
        let (grid, policy) = setup(9);
        let mut setpoints = vec![(0.0, 0.0); 9];
        // Inside the box, outside the circle: 22.2^2 + 24^2 > 24.7^2.
        setpoints[4] = (22.2, 24.0);
        let sc = scenario(setpoints);
        let result = solve(&grid, &sc).unwrap();
        let c = classify(&sc, &result, &grid, &policy).unwrap();
        assert!(c.volt_ok && c.line_ok);
        assert!(!c.inverter_ok);
        assert_eq!(c.grid_class(), GridClass::Feasible);
        assert_eq!(c.full_class(), FullClass::InverterOnly);
    }

    #[test]
    fn trafo_switch_tightens_the_thermal_check() {
        let (grid, mut policy) = setup(3);
        let sc = scenario(vec![(0.0, 0.0); 3]);
        let result = solve(&grid, &sc).unwrap();
        // An idle feeder leaves the lines unloaded, but the transformer
        // still carries its magnetizing demand.
        policy.max_loading_pct = 0.2;
        let c = classify(&sc, &result, &grid, &policy).unwrap();
        assert!(c.line_ok);
        policy.include_trafo_loading = true;
        let c = classify(&sc, &result, &grid, &policy).unwrap();
        assert!(!c.line_ok);
    }

    #[test]
    fn non_converged_results_stay_unclassified() {
        let (grid, policy) = setup(1);
        let sc = scenario(vec![(0.0, 0.0)]);
        let mut result = solve(&grid, &sc).unwrap();
        result.converged = false;
        assert_eq!(classify(&sc, &result, &grid, &policy), None);
        let rows = classify_batch(&grid, &policy, &[sc], &[result]);
        assert_eq!(rows[0].classification, None);
        let tally = ClassTally::from_rows(&rows);
        assert_eq!(tally.unclassified, 1);
        assert_eq!(tally.grid_feasible_rate(), 0.0);
    }

    #[test]
    fn tally_counts_every_verdict_once() {
        let (grid, policy) = setup(1);
        let cases = [
            (0.0, 0.0),      // feasible
            (-200.0, 0.0),   // voltage and overload
            (200.0, 222.0),  // circle violation (and overload)
            (100.0, -100.0), // feasible
        ];
        let scenarios: Vec<ControlScenario> = cases
            .iter()
            .enumerate()
            .map(|(i, &(p, q))| ControlScenario {
                scenario_id: i as u64,
                setpoints: vec![(p, q)],
            })
            .collect();
        let results: Vec<PowerFlowResult> =
            scenarios.iter().map(|s| solve(&grid, s).unwrap()).collect();
        let rows = classify_batch(&grid, &policy, &scenarios, &results);
        let tally = ClassTally::from_rows(&rows);
        assert_eq!(tally.total, 4);
        assert_eq!(tally.unclassified, 0);
        assert_eq!(tally.grid_feasible, 2);
        assert_eq!(tally.full_feasible, 2);
        assert_eq!(tally.inverter_ok, 3);
        assert!((tally.inverter_pass_rate() - 0.75).abs() < 1e-15);
        assert!((tally.grid_feasible_rate() - 0.5).abs() < 1e-15);
        // The verdict split is consistent: every classified scenario lands
        // in exactly one bucket of each scheme.
        assert_eq!(
            tally.grid_feasible + tally.grid_voltage_only + tally.grid_overload_only
                + tally.grid_both,
            4
        );
        assert_eq!(
            tally.full_feasible + tally.full_grid_only + tally.full_inverter_only
                + tally.full_both,
            4
        );
    }

    #[test]
    fn csv_rows_match_schema() {
        let rows = [ClassifiedScenario {
            scenario_id: 7,
            p_ipf_kw: 123.456789,
            q_ipf_kvar: -0.123456789,
            min_v_pu: 0.987654321,
            max_v_pu: 1.023456789,
            max_line_loading_pct: 101.23456,
            classification: Some(Classification {
                volt_ok: true,
                line_ok: false,
                inverter_ok: true,
            }),
        }];
        let mut buf = Vec::new();
        write_classified_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "scenario_id,p_ipf_kw,q_ipf_kvar,min_v_pu,max_v_pu,max_line_loading_pct,\
             volt_ok,line_ok,inverter_ok,grid_class,full_class"
        );
        assert_eq!(
            lines.next().unwrap(),
            "7,123.457,-0.123457,0.987654,1.02346,101.235,true,false,true,overload_only,grid_only"
        );
    }
}
