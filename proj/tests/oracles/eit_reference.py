"""Reference storage efficiency for the golden case in test_eit_memory.cpp.

Independent NumPy integration of the same lambda-system equations in units of
Gamma: trapezoid in z, RK4 in t, raised-cosine control ramps.

    python3 tests/oracles/eit_reference.py
    efficiency 0.743566 leakage 0.021261
"""

import numpy as np

GAMMA = 2 * np.pi * 5.75e6
US = 1e-6 * GAMMA  # one microsecond in units of 1/Gamma


def control(t, oc, t_off, t_on, ramp):
    if t_off is None or t <= t_off - ramp:
        return oc
    if t < t_off:
        return oc * 0.5 * (1 + np.cos(np.pi * (t - (t_off - ramp)) / ramp))
    if t <= t_on:
        return 0.0
    if t < t_on + ramp:
        return oc * 0.5 * (1 - np.cos(np.pi * (t - t_on) / ramp))
    return oc


def simulate(depth, oc, fwhm, t_center, t_off, t_on, ramp, end, cells=200, dt=0.05, gamma_s=0.0):
    dz = 1.0 / cells
    sigma = fwhm / np.sqrt(8 * np.log(2))  # intensity FWHM
    amp = 1e-3 * oc

    def probe(t):
        return amp * np.exp(-((t - t_center) ** 2) / (4 * sigma**2))

    def field(t, p31):
        c = np.concatenate([[0], np.cumsum((p31[1:] + p31[:-1]) * 0.5 * dz)])
        return probe(t) + 1j * depth / 2 * c

    def rhs(t, p31, p21):
        e = field(t, p31)
        o = control(t, oc, t_off, t_on, ramp)
        return (1j * e / 2 + 1j * o / 2 * p21 - 0.5 * p31, 1j * o / 2 * p31 - gamma_s * p21)

    steps = int(np.ceil(end / dt))
    ts = np.arange(steps + 1) * dt
    p31 = np.zeros(cells + 1, complex)
    p21 = np.zeros(cells + 1, complex)
    e_in = np.zeros(steps + 1, complex)
    e_out = np.zeros(steps + 1, complex)
    e_in[0], e_out[0] = probe(0), field(0, p31)[-1]
    for k in range(steps):
        t = ts[k]
        a1, b1 = rhs(t, p31, p21)
        a2, b2 = rhs(t + dt / 2, p31 + dt / 2 * a1, p21 + dt / 2 * b1)
        a3, b3 = rhs(t + dt / 2, p31 + dt / 2 * a2, p21 + dt / 2 * b2)
        a4, b4 = rhs(t + dt, p31 + dt * a3, p21 + dt * b3)
        p31 = p31 + dt / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
        p21 = p21 + dt / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
        e_in[k + 1], e_out[k + 1] = probe(ts[k + 1]), field(ts[k + 1], p31)[-1]
    return ts, np.abs(e_in) ** 2, np.abs(e_out) ** 2


def storage(depth, oc, fwhm, off_after_center, dark):
    ramp = 0.1 * US
    t_center = 3 * fwhm
    t_off = t_center + off_after_center
    t_on = t_off + dark
    end = t_on + ramp + 4 * depth / oc**2 + 4 * fwhm
    ts, i_in, i_out = simulate(depth, oc, fwhm, t_center, t_off, t_on, ramp, end)
    return i_out[ts >= t_on].sum() / i_in.sum(), i_out[ts < t_on].sum() / i_in.sum()


if __name__ == "__main__":
    eff, leak = storage(100, 1.0, 40, 60, 20)
    print(f"efficiency {eff:.6f} leakage {leak:.6f}")
