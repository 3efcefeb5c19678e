#!/usr/bin/env python3
"""Reference power-flow fixtures for the Rust solver's regression tests.

Two algorithmically independent solvers cross-validate every case before it
is written out:

  1. a Gauss fixed-point current-injection iteration
     V_pq <- Y_pp^-1 (conj(S_pq / V_pq) - Y_ps V_slack),
  2. scipy.optimize.root (hybrid trust-region quasi-Newton, numeric
     Jacobian) on the stacked real/imaginary power-mismatch equations.

Neither shares code, formulation (rectangular complex vs. the Rust side's
polar Newton with analytic Jacobian), or linear algebra with the Rust
implementation. Agreement across all three is the acceptance evidence.

Network model under test (same declared parameters as the Rust side):
radial chain MV-slack -> transformer -> N equally long cable segments, one
DER per node. Transformer: series impedance from vk/vkr on the rated base,
magnetizing shunt (pfe, i0) at the LV terminal. Lines: pi-equivalent with
shunt capacitance. S_base = transformer rating, V_base per voltage level.

Usage: python3 tools/make_powerflow_fixtures.py [--out DIR]
Writes pf_scenarios.csv, pf_expected.csv, pf_expected_vmag.csv.
"""

import argparse
import os

import numpy as np
from scipy import optimize

FREQ_HZ = 50.0
SEED = 20260817
N_SCENARIOS = 100

# Canonical feeder family.
TOTAL_P_KW = 200.0
AVG_DIST_M = 400.0
COS_PHI = 0.9
LINE = dict(r_ohm_per_km=0.208, x_ohm_per_km=0.080, c_nf_per_km=261.0)
TRAFO = dict(s_rated_mva=0.4, v_hv_kv=20.0, v_lv_kv=0.4, vk_percent=6.0,
             vkr_percent=1.425, pfe_kw=1.35, i0_percent=0.3375)


def build_ybus(n_nodes: int) -> np.ndarray:
    n_bus = n_nodes + 2
    y = np.zeros((n_bus, n_bus), dtype=complex)
    s_base = TRAFO["s_rated_mva"]

    # Transformer 0-1, per-unit on its own rating.
    r = TRAFO["vkr_percent"] / 100.0
    z_mag = TRAFO["vk_percent"] / 100.0
    x = np.sqrt(max(z_mag**2 - r**2, 0.0))
    y_t = 1.0 / complex(r, x)
    g_fe = TRAFO["pfe_kw"] / (s_base * 1000.0)
    y_m = TRAFO["i0_percent"] / 100.0
    b_m = np.sqrt(max(y_m**2 - g_fe**2, 0.0))
    y_mag = complex(g_fe, -b_m)
    y[0, 0] += y_t
    y[1, 1] += y_t + y_mag
    y[0, 1] -= y_t
    y[1, 0] -= y_t

    # Cable segments, per-unit on the LV base.
    z_base = TRAFO["v_lv_kv"] ** 2 / s_base
    seg_km = AVG_DIST_M * 2.0 / (n_nodes + 1) / 1000.0
    z_l = complex(LINE["r_ohm_per_km"], LINE["x_ohm_per_km"]) * seg_km / z_base
    y_l = 1.0 / z_l
    b_half = (2.0 * np.pi * FREQ_HZ * LINE["c_nf_per_km"] * 1e-9 * seg_km
              * z_base / 2.0)
    for k in range(n_nodes):
        f, t = k + 1, k + 2
        y[f, f] += y_l + 1j * b_half
        y[t, t] += y_l + 1j * b_half
        y[f, t] -= y_l
        y[t, f] -= y_l
    return y


def solve_fixed_point(ybus, s_pq_pu, v_slack=1.0, tol=1e-13, max_iter=500):
    """Gauss current-injection iteration on the PQ partition."""
    n = ybus.shape[0]
    y_pp = ybus[1:, 1:]
    y_ps = ybus[1:, :1]
    lu = np.linalg.inv(y_pp)  # tiny systems; explicit inverse is fine
    v_pq = np.ones(n - 1, dtype=complex)
    vs = np.array([v_slack], dtype=complex)
    for _ in range(max_iter):
        i_inj = np.conj(s_pq_pu / v_pq)
        v_new = lu @ (i_inj - (y_ps @ vs))
        delta = np.max(np.abs(v_new - v_pq))
        v_pq = v_new
        if delta < tol:
            break
    else:
        raise RuntimeError("fixed point did not converge")
    return np.concatenate(([v_slack], v_pq))


def solve_scipy_root(ybus, s_pq_pu, v_slack=1.0):
    """Independent cross-check: root-finding on power mismatches."""
    n = ybus.shape[0]

    def mismatch(x):
        v = np.concatenate(([v_slack],
                            x[: n - 1] + 1j * x[n - 1:]))
        s = v * np.conj(ybus @ v)
        d = s[1:] - s_pq_pu
        return np.concatenate((d.real, d.imag))

    x0 = np.concatenate((np.ones(n - 1), np.zeros(n - 1)))
    sol = optimize.root(mismatch, x0, method="hybr", tol=1e-13)
    assert sol.success, sol.message
    return np.concatenate(([v_slack],
                           sol.x[: n - 1] + 1j * sol.x[n - 1:]))


def slack_power_kw(ybus, v):
    s_base_kw = TRAFO["s_rated_mva"] * 1000.0
    s0 = v[0] * np.conj(ybus[0] @ v)
    return -s0.real * s_base_kw, -s0.imag * s_base_kw


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="crates/core/tests/fixtures")
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)

    s_base_kw = TRAFO["s_rated_mva"] * 1000.0
    rng = np.random.default_rng(SEED)

    scen_rows = ["feeder_n,scenario,der,p_kw,q_kvar"]
    exp_rows = ["feeder_n,scenario,p_ipf_kw,q_ipf_kvar"]
    vmag_rows = ["feeder_n,scenario,bus,v_mag_pu"]

    for n_nodes in (1, 3, 9, 27):
        ybus = build_ybus(n_nodes)
        p_inst = TOTAL_P_KW / n_nodes
        s_max = p_inst / COS_PHI
        for sc in range(N_SCENARIOS):
            p_kw = rng.uniform(-p_inst, p_inst, n_nodes)
            q_kvar = rng.uniform(-s_max, s_max, n_nodes)
            s_pq = np.zeros(n_nodes + 1, dtype=complex)
            s_pq[1:] = (p_kw + 1j * q_kvar) / s_base_kw

            v = solve_fixed_point(ybus, s_pq)
            v_check = solve_scipy_root(ybus, s_pq)
            assert np.max(np.abs(v - v_check)) < 1e-8, (n_nodes, sc)

            p_ipf, q_ipf = slack_power_kw(ybus, v)
            p_ipf_check, q_ipf_check = slack_power_kw(ybus, v_check)
            assert abs(p_ipf - p_ipf_check) < 1e-3

            for d in range(n_nodes):
                scen_rows.append(
                    f"{n_nodes},{sc},{d},{float(p_kw[d])!r},{float(q_kvar[d])!r}")
            exp_rows.append(f"{n_nodes},{sc},{float(p_ipf)!r},{float(q_ipf)!r}")
            for bus in range(n_nodes + 2):
                vmag_rows.append(
                    f"{n_nodes},{sc},{bus},{float(abs(v[bus]))!r}")

    for name, rows in [("pf_scenarios.csv", scen_rows),
                       ("pf_expected.csv", exp_rows),
                       ("pf_expected_vmag.csv", vmag_rows)]:
        path = os.path.join(args.out, name)
        with open(path, "w") as fh:
            fh.write("\n".join(rows) + "\n")
        print(f"wrote {path} ({len(rows) - 1} rows)")

    # Reference prints for spot debugging.
    for n_nodes, setpoint in [(1, (200.0, 0.0)), (1, (-200.0, 0.0))]:
        ybus = build_ybus(n_nodes)
        s_pq = np.zeros(n_nodes + 1, dtype=complex)
        s_pq[1] = complex(*setpoint) / s_base_kw
        v = solve_fixed_point(ybus, s_pq)
        p_ipf, q_ipf = slack_power_kw(ybus, v)
        print(f"n=1 setpoint {setpoint}: p_ipf={p_ipf:.6f} kW, "
              f"q_ipf={q_ipf:.6f} kvar, v={np.abs(v).round(8)}")


if __name__ == "__main__":
    main()
