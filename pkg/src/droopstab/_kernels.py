"""Numba kernels for the averaged time-domain model.

Fixed-step RK4 over the nonlinear averaged microgrid: boost power stage,
dual-loop PI control with the selected droop law, series RL feeder, bus
capacitor and constant power load.  Two topologies share one derivative:

  full  - converter -> line -> bus (CPL), optional bus current injection
  bench - converter alone feeding a DC current sink, optional terminal
          injection (used for converter impedance measurement)

The parameter vector layout is fixed by the P_* indices below; the state
vector is [i_l, v_cout, i_line, v_cbus, x_cc, x_v, x_occ, x_lpf].
"""

from __future__ import annotations

import numpy as np
from numba import njit

# Parameter vector indices.
P_E = 0
P_RSER = 1
P_L = 2
P_COUT = 3
P_VO = 4
P_RLINE = 5
P_LLINE = 6
P_CBUS = 7
P_PCPL = 8
P_KP_C = 9
P_KI_C = 10
P_KP_V = 11
P_KI_V = 12
P_KP_OCC = 13
P_KI_OCC = 14
P_DCOEF = 15
P_WLPF = 16
P_VCLAMP = 17
P_VSHED = 18
P_DMIN = 19
P_DMAX = 20
P_INJ_AMP = 21
P_INJ_W = 22
P_INJ_NODE = 23
P_INJ_TREF = 24
P_KIND = 25
P_TOPO = 26
P_ISINK = 27
NPARAM = 28

# Droop kind codes.
KIND_VI = 0
KIND_VP = 1
KIND_IV = 2
KIND_PV = 3

# Injection node codes.
NODE_NONE = 0
NODE_TERMINAL = 1
NODE_BUS = 2

# Topology codes.
TOPO_FULL = 0
TOPO_BENCH = 1

NSTATE = 8
DIVERGE_LIMIT = 1e6


@njit(cache=True)
def _cpl_current(v: float, p_cpl: float, v_clamp: float, v_shed: float) -> float:
    if v >= v_clamp:
        return p_cpl / v
    if v >= v_shed:
        return p_cpl / v_clamp
    return 0.0


@njit(cache=True)
def _deriv(x, t, p, dx):
    """Averaged-model state derivative; returns the applied duty cycle."""
    i_l = x[0]
    v_t = x[1]
    i_line = x[2]
    v_b = x[3]
    x_cc = x[4]
    x_v = x[5]
    x_occ = x[6]
    x_lpf = x[7]

    topo = int(p[P_TOPO])
    kind = int(p[P_KIND])
    v_o = p[P_VO]

    inj = 0.0
    if p[P_INJ_AMP] != 0.0:
        inj = p[P_INJ_AMP] * np.sin(p[P_INJ_W] * (t - p[P_INJ_TREF]))

    # Output current as sensed at the converter terminal.
    if topo == TOPO_BENCH:
        i_src_t = inj if int(p[P_INJ_NODE]) == NODE_TERMINAL else 0.0
        i_o = p[P_ISINK] - i_src_t
    else:
        i_o = i_line

    # Droop chain.  VI/VP low-pass the measured feedback variable before it
    # forms the voltage reference; IV/PV generate the outer current
    # reference from the droop law and low-pass the whole outer-loop error,
    # so the one filter state covers both the reference and the measured
    # output current.
    w_lpf = p[P_WLPF]
    e_v = 0.0
    e_occ = 0.0
    if kind == KIND_VI or kind == KIND_VP:
        if kind == KIND_VI:
            fb_raw = i_o
        else:
            fb_raw = v_t * i_o
        if w_lpf > 0.0:
            fb = x_lpf
            dx[7] = w_lpf * (fb_raw - x_lpf)
        else:
            fb = fb_raw
            dx[7] = 0.0
        v_ref = v_o - p[P_DCOEF] * fb
        e_v = v_ref - v_t
        i_l_ref = p[P_KP_V] * e_v + x_v
    else:
        if kind == KIND_IV:
            i0_ref = (v_o - v_t) / p[P_DCOEF]
        else:
            v_den = v_t if v_t > 0.05 * v_o else 0.05 * v_o
            i0_ref = (v_o - v_t) / (p[P_DCOEF] * v_den)
        e_raw = i0_ref - i_o
        if w_lpf > 0.0:
            e_occ = x_lpf
            dx[7] = w_lpf * (e_raw - x_lpf)
        else:
            e_occ = e_raw
            dx[7] = 0.0
        i_l_ref = p[P_KP_OCC] * e_occ + x_occ

    # Inner current loop with duty saturation.
    e_c = i_l_ref - i_l
    duty_raw = p[P_KP_C] * e_c + x_cc
    duty = duty_raw
    if duty > p[P_DMAX]:
        duty = p[P_DMAX]
    elif duty < p[P_DMIN]:
        duty = p[P_DMIN]

    # Conditional integration: freeze any integrator pushing further into
    # saturation while the duty is railed.
    sat_hi = duty_raw > p[P_DMAX]
    sat_lo = duty_raw < p[P_DMIN]
    if (sat_hi and e_c > 0.0) or (sat_lo and e_c < 0.0):
        dx[4] = 0.0
    else:
        dx[4] = p[P_KI_C] * e_c
    if kind == KIND_VI or kind == KIND_VP:
        if (sat_hi and e_v > 0.0) or (sat_lo and e_v < 0.0):
            dx[5] = 0.0
        else:
            dx[5] = p[P_KI_V] * e_v
        dx[6] = 0.0
    else:
        if (sat_hi and e_occ > 0.0) or (sat_lo and e_occ < 0.0):
            dx[6] = 0.0
        else:
            dx[6] = p[P_KI_OCC] * e_occ
        dx[5] = 0.0

    # Power stage.
    dx[0] = (p[P_E] - i_l * p[P_RSER] - (1.0 - duty) * v_t) / p[P_L]
    if topo == TOPO_BENCH:
        dx[1] = ((1.0 - duty) * i_l - i_o) / p[P_COUT]
        dx[2] = 0.0
        dx[3] = 0.0
    else:
        dx[1] = ((1.0 - duty) * i_l - i_line) / p[P_COUT]
        dx[2] = (v_t - i_line * p[P_RLINE] - v_b) / p[P_LLINE]
        i_src_b = inj if int(p[P_INJ_NODE]) == NODE_BUS else 0.0
        i_cpl = _cpl_current(v_b, p[P_PCPL], p[P_VCLAMP], p[P_VSHED])
        dx[3] = (i_line - i_cpl + i_src_b) / p[P_CBUS]
    return duty


@njit(cache=True)
def _rk4_step(x, t, dt, p, k1, k2, k3, k4, xt):
    """One RK4 step in place; returns the duty applied at the step start."""
    duty = _deriv(x, t, p, k1)
    for i in range(NSTATE):
        xt[i] = x[i] + 0.5 * dt * k1[i]
    _deriv(xt, t + 0.5 * dt, p, k2)
    for i in range(NSTATE):
        xt[i] = x[i] + 0.5 * dt * k2[i]
    _deriv(xt, t + 0.5 * dt, p, k3)
    for i in range(NSTATE):
        xt[i] = x[i] + dt * k3[i]
    _deriv(xt, t + dt, p, k4)
    for i in range(NSTATE):
        x[i] += dt * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0
    return duty


@njit(cache=True)
def _diverged(x) -> bool:
    for i in range(NSTATE):
        if not np.isfinite(x[i]) or abs(x[i]) > DIVERGE_LIMIT:
            return True
    return False


@njit(cache=True)
def run_record(x, p, t0, dt, n_steps, decim, rec_t, rec_x, rec_duty, rec_p, idx, record_first):
    """Integrate n_steps, recording every decim-th sample.

    Returns (next_record_index, steps_done, diverged).
    """
    k1 = np.empty(NSTATE)
    k2 = np.empty(NSTATE)
    k3 = np.empty(NSTATE)
    k4 = np.empty(NSTATE)
    xt = np.empty(NSTATE)
    dxp = np.empty(NSTATE)
    if record_first:
        duty0 = _deriv(x, t0, p, dxp)
        rec_t[idx] = t0
        for i in range(NSTATE):
            rec_x[idx, i] = x[i]
        rec_duty[idx] = duty0
        rec_p[idx] = p[P_PCPL]
        idx += 1
    for n in range(n_steps):
        t = t0 + n * dt
        duty = _rk4_step(x, t, dt, p, k1, k2, k3, k4, xt)
        if _diverged(x):
            return idx, n + 1, True
        if (n + 1) % decim == 0:
            rec_t[idx] = t + dt
            for i in range(NSTATE):
                rec_x[idx, i] = x[i]
            rec_duty[idx] = duty
            rec_p[idx] = p[P_PCPL]
            idx += 1
    return idx, n_steps, False


@njit(cache=True)
def run_measure(x, p, t0, dt, n_steps, node_state):
    """Integrate while accumulating single-bin correlation sums.

    node_state selects the measured voltage (state index 1 or 3).  Returns
    (sums, diverged) with sums = [Svc, Svs, Sv, Sic, Sis, Si, Sc, Ss, T].
    The correlation phase is referenced to the injection start time so the
    injected current phasor is consistent across segments.
    """
    k1 = np.empty(NSTATE)
    k2 = np.empty(NSTATE)
    k3 = np.empty(NSTATE)
    k4 = np.empty(NSTATE)
    xt = np.empty(NSTATE)
    sums = np.zeros(9)
    w = p[P_INJ_W]
    tref = p[P_INJ_TREF]
    for n in range(n_steps):
        t = t0 + n * dt
        tau = t - tref
        c = np.cos(w * tau)
        s = np.sin(w * tau)
        v = x[node_state]
        i_src = p[P_INJ_AMP] * np.sin(w * tau)
        sums[0] += v * c * dt
        sums[1] += v * s * dt
        sums[2] += v * dt
        sums[3] += i_src * c * dt
        sums[4] += i_src * s * dt
        sums[5] += i_src * dt
        sums[6] += c * dt
        sums[7] += s * dt
        sums[8] += dt
        _rk4_step(x, t, dt, p, k1, k2, k3, k4, xt)
        if _diverged(x):
            return sums, True
    return sums, False


@njit(cache=True)
def run_rlc_measure(v_src, r, l, c, r_load, amp, w, x, t0, dt, n_settle, n_skip, n_meas):
    """Reference passive-network measurement: V source -> RL -> C || R_load.

    Independent of the converter kernels except for the correlation recipe;
    used to validate the injection/extraction machinery against closed-form
    impedance.  Returns the same sums layout as run_measure.
    """
    i_line = x[0]
    v_bus = x[1]
    sums = np.zeros(9)
    n_total = n_settle + n_skip + n_meas
    for n in range(n_total):
        t = t0 + n * dt
        inj_on = n >= n_settle
        tau = t - (t0 + n_settle * dt)
        i_src = amp * np.sin(w * tau) if inj_on else 0.0
        if n >= n_settle + n_skip:
            cw = np.cos(w * tau)
            sw = np.sin(w * tau)
            sums[0] += v_bus * cw * dt
            sums[1] += v_bus * sw * dt
            sums[2] += v_bus * dt
            sums[3] += i_src * cw * dt
            sums[4] += i_src * sw * dt
            sums[5] += i_src * dt
            sums[6] += cw * dt
            sums[7] += sw * dt
            sums[8] += dt
        # RK4 on the two-state linear network.
        k1i = (v_src - i_line * r - v_bus) / l
        k1v = (i_line - v_bus / r_load + i_src) / c
        i2 = i_line + 0.5 * dt * k1i
        v2 = v_bus + 0.5 * dt * k1v
        th = t + 0.5 * dt
        i_srch = amp * np.sin(w * (th - (t0 + n_settle * dt))) if inj_on else 0.0
        k2i = (v_src - i2 * r - v2) / l
        k2v = (i2 - v2 / r_load + i_srch) / c
        i3 = i_line + 0.5 * dt * k2i
        v3 = v_bus + 0.5 * dt * k2v
        k3i = (v_src - i3 * r - v3) / l
        k3v = (i3 - v3 / r_load + i_srch) / c
        i4 = i_line + dt * k3i
        v4 = v_bus + dt * k3v
        tf_ = t + dt
        i_srcf = amp * np.sin(w * (tf_ - (t0 + n_settle * dt))) if inj_on else 0.0
        k4i = (v_src - i4 * r - v4) / l
        k4v = (i4 - v4 / r_load + i_srcf) / c
        i_line += dt * (k1i + 2.0 * k2i + 2.0 * k3i + k4i) / 6.0
        v_bus += dt * (k1v + 2.0 * k2v + 2.0 * k3v + k4v) / 6.0
    x[0] = i_line
    x[1] = v_bus
    return sums
