"""Exact memory-kernel formulation of the adiabatic condition.

For the effective two-level reduction of each schedule (the single-qubit
sweep directly, the two-qubit sweep through its {|01>, |10>} block) the
leakage out of the tracked level obeys a one-component Volterra
integro-differential equation

    d/dt psi0 = -<E0|dE0/dt> psi0 - int_0^t g(t, s) psi0(s) ds,

with the two-time kernel

    g(t, s) = -<E0(t)|dE1/dt> <E1(s)|dE0/ds> exp(i int_s^t E(u) du),

where E = E1 - E0 = -2 (J0 + c) k is the signed gap in the connected
labeling (tracked level first).  Noise rescales the gap pointwise and
leaves the coupling matrix elements untouched, so it only accelerates the
kernel phase; the kernel modulus factorizes as
1 / (4 T^2 k^2(t) k^2(s)) independent of the noise.

The adiabatic condition is the vanishing of |int_0^t g(t,s) psi0(s) ds|;
`adiabatic_defect` reports exactly that magnitude.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import NoiseRealization, SingleQubitSchedule, SpectatorSchedule, noise_values


class ResolutionError(ValueError):
    """Grid too coarse for the requested kernel or memory computation."""


@dataclass(frozen=True)
class CouplingElements:
    """Analytic eigenbasis matrix elements at one time."""

    c01: float  # <E0|dE1/dt>
    c10: float  # <E1|dE0/dt>
    c11: float  # <E1|dE1/dt>
    gap: float  # E1 - E0 (negative: the tracked level is the upper one)


@dataclass(frozen=True)
class KernelGrid:
    """Lower-triangular table of g(t_i, t_j) on a uniform grid."""

    times: np.ndarray
    values: np.ndarray  # (n, n) complex, zero above the diagonal


@dataclass(frozen=True)
class MemorySolution:
    """psi0 on a uniform grid, with the kernel split kept for defect queries."""

    times: np.ndarray
    psi0: np.ndarray
    _p: np.ndarray = field(repr=False)       # c01(t) e^{+i Phi(t)}
    _history: np.ndarray = field(repr=False)  # trapezoid of q(s) psi0(s) up to t


def _base(schedule):
    return schedule.base if isinstance(schedule, SpectatorSchedule) else schedule


def coupling_elements(schedule, t: float) -> CouplingElements:
    """Closed-form <E_m|dE_n/dt> elements and gap of the two-level reduction."""
    total_time = schedule.total_time
    if not 0.0 <= t <= total_time * (1.0 + 1e-12):
        raise ValueError(f"t={t} outside [0, {total_time}]")
    j0 = _base(schedule).j0_rad
    a, b = schedule.ab(t)
    da, db = schedule.ab_dot(t)
    a, b = float(a), float(b)
    k = np.hypot(a, b)
    n0sq = (b + k) ** 2 + a ** 2
    # <E0|dH/dt|E1> with gauge-fixed real eigenvectors.
    hdot_me = j0 * (da * ((b + k) ** 2 - a ** 2) - 2.0 * db * a * (b + k)) / n0sq
    gap = -2.0 * j0 * k
    c01 = hdot_me / gap
    return CouplingElements(c01=c01, c10=-c01, c11=0.0, gap=gap)


def _quadratic_kt(schedule):
    """k(t/T)^2 = alpha x^2 + beta x + gamma for the reduction's (a, b)."""
    a0, b0 = schedule.ab(0.0)
    a1, b1 = schedule.ab(schedule.total_time)
    ah, bh = schedule.ab(0.5 * schedule.total_time)
    k0 = a0 * a0 + b0 * b0
    k1 = a1 * a1 + b1 * b1
    kh = ah * ah + bh * bh
    gamma = float(k0)
    alpha = float(2.0 * k0 + 2.0 * k1 - 4.0 * kh)
    beta = float(k1 - k0 - alpha)
    return alpha, beta, gamma


def _int_sqrt_quadratic(alpha, beta, gamma, x):
    """Antiderivative of sqrt(alpha x^2 + beta x + gamma), alpha > 0, positive discriminant."""
    q = np.sqrt(alpha * x * x + beta * x + gamma)
    disc = 4.0 * alpha * gamma - beta * beta
    u = 2.0 * alpha * x + beta
    return u * q / (4.0 * alpha) + disc / (8.0 * alpha ** 1.5) * np.arcsinh(u / np.sqrt(disc))


def gap_integral(schedule, noise: NoiseRealization | None, s: float, t: float) -> float:
    """int_s^t E(u) du with E = -2 (J0 + c) k, closed form when noise-free."""
    j0 = _base(schedule).j0_rad
    total_time = schedule.total_time
    if noise is None:
        alpha, beta, gamma = _quadratic_kt(schedule)
        lo, hi = s / total_time, t / total_time
        return -2.0 * j0 * total_time * (
            _int_sqrt_quadratic(alpha, beta, gamma, hi)
            - _int_sqrt_quadratic(alpha, beta, gamma, lo))
    if t == s:
        return 0.0
    res = np.pi / (5.0 * noise.spec.omega_cut_rad)
    n = max(8, int(np.ceil(abs(t - s) / res)) + 1)

    def quad(m):
        grid = np.linspace(s, t, m)
        a, b = schedule.ab(grid)
        e = -2.0 * (j0 + noise_values(noise, grid)) * np.hypot(a, b)
        return float(np.trapezoid(e, grid))

    # Composite trapezoid, doubled until the relative change is below 1e-8.
    value = quad(n)
    for _ in range(24):
        n = 2 * n - 1
        refined = quad(n)
        if abs(refined - value) <= 1e-8 * max(abs(refined), 1e-300):
            return refined
        value = refined
    return value


def kernel_value(schedule, noise: NoiseRealization | None, t: float, s: float) -> complex:
    """g(t, s) for 0 <= s <= t <= T."""
    if s > t:
        raise ValueError("kernel requires s <= t")
    c01_t = coupling_elements(schedule, t).c01
    c01_s = coupling_elements(schedule, s).c01
    phase = gap_integral(schedule, noise, s, t)
    # -c01(t) c10(s) = +c01(t) c01(s): real positive modulus 1/(4 T^2 k^2 k^2)
    return complex(c01_t * c01_s * np.exp(1.0j * phase))


def _phase_on_grid(schedule, noise, times) -> np.ndarray:
    """Cumulative int_0^t E, refined below the noise resolution when needed."""
    j0 = _base(schedule).j0_rad
    if noise is None:
        alpha, beta, gamma = _quadratic_kt(schedule)
        x = times / schedule.total_time
        anti = _int_sqrt_quadratic(alpha, beta, gamma, x)
        return -2.0 * j0 * schedule.total_time * (anti - anti[0])
    res = np.pi / (5.0 * noise.spec.omega_cut_rad)
    h = times[1] - times[0]
    sub = max(1, int(np.ceil(h / res)))
    n_fine = (len(times) - 1) * sub + 1
    fine = np.linspace(times[0], times[-1], n_fine)
    a, b = schedule.ab(fine)
    k = np.hypot(a, b)
    e = -2.0 * (j0 + noise_values(noise, fine)) * k
    cum = np.zeros(n_fine)
    cum[1:] = np.cumsum(0.5 * (e[1:] + e[:-1]) * np.diff(fine))
    return cum[::sub]


def _split_kernel(schedule, noise, times):
    """Rank-one split g(t_i, t_j) = p_i q_j from the cumulative gap phase."""
    c01 = np.array([coupling_elements(schedule, t).c01 for t in times])
    phi = _phase_on_grid(schedule, noise, times)
    p = c01 * np.exp(1.0j * phi)
    q = c01 * np.exp(-1.0j * phi)
    return p, q


def build_kernel_grid(schedule, noise: NoiseRealization | None, n_points: int) -> KernelGrid:
    """Tabulate g on the lower triangle of a uniform n-point grid."""
    if n_points < 2:
        raise ValueError("need at least two grid points")
    times = np.linspace(0.0, schedule.total_time, n_points)
    p, q = _split_kernel(schedule, noise, times)
    values = np.tril(np.outer(p, q))
    return KernelGrid(times=times, values=values)


def _eta00(schedule, times) -> np.ndarray:
    """<E0|dE0/dt> by central finite differences of the gauge-fixed eigenvector.

    Analytically zero in the real gauge; computed rather than assumed.
    """
    total_time = schedule.total_time
    delta = 1e-7 * total_time
    out = np.zeros(len(times))
    for i, t in enumerate(times):
        lo, hi = max(t - delta, 0.0), min(t + delta, total_time)
        vs = []
        for u in (lo, hi):
            a, b = schedule.ab(u)
            a, b = float(a), float(b)
            k = np.hypot(a, b)
            v = np.array([b + k, a])
            vs.append(v / np.linalg.norm(v))
        mid = 0.5 * (vs[0] + vs[1])
        mid /= np.linalg.norm(mid)
        out[i] = float(mid @ (vs[1] - vs[0])) / (hi - lo)
    return out


def solve_memory_equation(schedule, noise: NoiseRealization | None,
                          n_points: int = 1000) -> MemorySolution:
    """Advance the one-component memory equation on a uniform grid.

    Second-order predictor-corrector with trapezoid history quadrature; the
    rank-one phase split keeps the history integral O(1) per step.
    """
    if n_points < 500:
        raise ResolutionError("memory grid needs at least 500 points")
    times = np.linspace(0.0, schedule.total_time, n_points)
    h = times[1] - times[0]
    if noise is not None and noise.spec.omega_cut_rad * h > 0.5 * np.pi:
        raise ResolutionError("grid does not resolve the noise cutoff frequency")
    p, q = _split_kernel(schedule, noise, times)
    # Noise-free per-step phase advance bounds the history quadrature error.
    phase_step = np.abs(np.diff(np.angle(p * np.exp(-0.0j))))
    if noise is None and np.max(np.abs(np.diff(_phase_on_grid(schedule, None, times)))) > 0.5:
        raise ResolutionError("grid does not resolve the kernel phase")
    del phase_step
    eta = _eta00(schedule, times)

    psi = np.zeros(len(times), dtype=complex)
    hist = np.zeros(len(times), dtype=complex)  # trapezoid of q psi up to node i
    psi[0] = 1.0
    f_prev = -eta[0] * psi[0] - p[0] * hist[0]
    for i in range(1, len(times)):
        partial = hist[i - 1] + 0.5 * h * q[i - 1] * psi[i - 1]
        guess = psi[i - 1] + h * f_prev
        for _ in range(2):
            s_i = partial + 0.5 * h * q[i] * guess
            f_i = -eta[i] * guess - p[i] * s_i
            guess = psi[i - 1] + 0.5 * h * (f_prev + f_i)
        psi[i] = guess
        hist[i] = partial + 0.5 * h * q[i] * psi[i]
        f_prev = -eta[i] * psi[i] - p[i] * hist[i]
    return MemorySolution(times=times, psi0=psi, _p=p, _history=hist)


def adiabatic_defect(schedule, noise: NoiseRealization | None,
                     memory: MemorySolution, t: float) -> float:
    """|int_0^t g(t, s) psi0(s) ds| at a grid time of the memory solution."""
    idx = int(np.argmin(np.abs(memory.times - t)))
    if abs(memory.times[idx] - t) > 1e-9 * max(memory.times[-1], 1.0):
        raise ValueError("t must lie on the memory solution grid")
    return float(abs(memory._p[idx] * memory._history[idx]))


def max_defect(memory: MemorySolution) -> float:
    """Largest adiabatic defect over the whole grid."""
    return float(np.max(np.abs(memory._p * memory._history)))
