"""Wiener oscillator phase noise: time-domain traces, frequency-domain phase-drift
spectra, and the second-order drift correlation kernel."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, Tuple

import numpy as np

from .network import SimulationLayout


def pn_increment_variance(carrier_hz: float, gamma: float, sample_time: float) -> float:
    """Per-sample phase increment variance 4 * pi^2 * f_c^2 * gamma * T_s (rad^2)."""
    if carrier_hz < 0 or gamma < 0 or sample_time < 0:
        raise ValueError("phase-noise parameters must be non-negative")
    return 4.0 * np.pi**2 * carrier_hz**2 * gamma * sample_time


@dataclass(frozen=True)
class PnParams:
    """Oscillator quality parameters and the derived Wiener increment variances."""

    carrier_hz: float
    gamma_ap: float
    gamma_ue: float
    sample_time: float

    @property
    def sigma2_ap(self) -> float:
        return pn_increment_variance(self.carrier_hz, self.gamma_ap, self.sample_time)

    @property
    def sigma2_ue(self) -> float:
        return pn_increment_variance(self.carrier_hz, self.gamma_ue, self.sample_time)

    @property
    def sigma2_tot(self) -> float:
        """Combined per-sample increment variance of the received phase."""
        return self.sigma2_ap + self.sigma2_ue


@dataclass
class PhaseNoiseTrace:
    """Per-node Wiener phase walks over one coherence block.

    The received phase for the (UE k, AP l) pair is the sum of the two node
    walks, so traces of UEs observed at the same AP share the AP component by
    construction.
    """

    ap_phase: np.ndarray  # (L, tau_c, N) radians
    ue_phase: np.ndarray  # (K, tau_c, N) radians

    def combined(self, k: int, l: int) -> np.ndarray:
        """theta_{k,l}: (tau_c, N) phase of the k -> l uplink."""
        return self.ue_phase[k] + self.ap_phase[l]


def wiener_walks(
    n_nodes: int,
    n_symbols: int,
    n_samples: int,
    sigma2: float,
    cp_len: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Discrete Wiener phase walks with cyclic-prefix jumps at symbol boundaries.

    Per-sample increments are N(0, sigma2); the step from the last sample of a
    symbol to the first sample of the next has variance (cp_len + 1) * sigma2.
    The initial phase is uniform on [0, 2*pi) per node.
    """
    inc = rng.normal(0.0, np.sqrt(sigma2), size=(n_nodes, n_symbols * n_samples))
    inc[:, 0] = rng.uniform(0.0, 2.0 * np.pi, size=n_nodes)
    if n_symbols > 1:
        inc[:, n_samples::n_samples] *= np.sqrt(cp_len + 1.0)
    return np.cumsum(inc, axis=1).reshape(n_nodes, n_symbols, n_samples)


def gen_pn_trace(params: PnParams, layout: SimulationLayout,
                 rng: np.random.Generator) -> PhaseNoiseTrace:
    """Independent per-AP and per-UE phase walks spanning one coherence block."""
    ap = wiener_walks(layout.n_aps, layout.block_symbols, layout.n_subcarriers,
                      params.sigma2_ap, layout.cp_len, rng)
    ue = wiener_walks(layout.n_ues, layout.block_symbols, layout.n_subcarriers,
                      params.sigma2_ue, layout.cp_len, rng)
    return PhaseNoiseTrace(ap_phase=ap, ue_phase=ue)


def phase_drift(theta_symbol: np.ndarray) -> np.ndarray:
    """Frequency-domain phase-drift vector of one OFDM symbol.

    J_i = (1/N) * sum_n exp(j*theta_n) * exp(-2j*pi*n*i/N).  The result is in
    natural DFT layout: entry ``J[i % N]`` is the coefficient for offset i, for
    any i in {-N/2, ..., N/2 - 1} (the definition is N-periodic in i).  J[0] is
    the common phase error.  The drift of a unit-modulus sequence satisfies
    sum_i |J_i|^2 = 1.
    """
    theta_symbol = np.asarray(theta_symbol)
    n = theta_symbol.shape[-1]
    if theta_symbol.ndim < 1 or n < 1:
        raise ValueError("theta_symbol must hold at least one sample")
    return np.fft.fft(np.exp(1j * theta_symbol), axis=-1) / n


def cpe_per_symbol(trace: PhaseNoiseTrace) -> np.ndarray:
    """Common phase errors J_{k,l,0}^{(tau)} for all pairs: (K, L, tau_c) complex."""
    n_sym = trace.ue_phase.shape[1]
    n = trace.ue_phase.shape[-1]
    out = np.empty((trace.ue_phase.shape[0], trace.ap_phase.shape[0], n_sym),
                   dtype=complex)
    for t in range(n_sym):
        out[:, :, t] = np.exp(1j * trace.ue_phase[:, t, :]) @ np.exp(
            1j * trace.ap_phase[:, t, :]).T / n
    return out


@dataclass(frozen=True)
class KernelParams:
    """Evaluation parameters for the drift correlation kernel.

    ``stride`` is the assumed sample spacing between equal-index samples of
    consecutive OFDM symbols: N as the kernel is usually printed, or N + N_cp
    to match trace generation with cyclic-prefix jumps.
    """

    n: int
    sigma2_tot: float
    stride: int

    @classmethod
    def from_layout(cls, layout: SimulationLayout, pn: PnParams,
                    cp_consistent: bool = False) -> "KernelParams":
        stride = layout.n_subcarriers + (layout.cp_len if cp_consistent else 0)
        return cls(n=layout.n_subcarriers, sigma2_tot=pn.sigma2_tot, stride=stride)


def correlation_b_oracle(i1: int, i2: int, dtau: int, params: KernelParams) -> complex:
    """Literal O(N^2) double sum for B_{i1,i2}^{(dtau)} = E{J_i1^(t1) J_i2^(t2)*}."""
    n = params.n
    n1 = np.arange(n)[:, None]
    n2 = np.arange(n)[None, :]
    damp = np.exp(-params.sigma2_tot / 2.0 * np.abs(dtau * params.stride + n1 - n2))
    phase = np.exp(-2j * np.pi * (n1 * i1 - n2 * i2) / n)
    return complex((damp * phase).sum() / n**2)


def _b_fast_core(i1, i2, dtau, params, weights=None):
    # Substitute d = n1 - n2; the inner sum over n2 is geometric with ratio
    # exp(-2j*pi*(i1-i2)/N) over N - |d| terms starting at max(0, -d).
    n = params.n
    d = np.arange(-(n - 1), n)
    damp = np.exp(-params.sigma2_tot / 2.0 * np.abs(dtau * params.stride + d))
    if weights is not None:
        damp = damp * weights
    phase = np.exp(-2j * np.pi * d * i1 / n)
    count = n - np.abs(d)
    delta = (i1 - i2) % n
    if delta == 0:
        inner = count.astype(complex)
    else:
        q = np.exp(-2j * np.pi * delta / n)
        inner = q ** np.maximum(0, -d) * (1.0 - q**count) / (1.0 - q)
    return complex((damp * phase * inner).sum() / n**2)


def correlation_b_fast(i1: int, i2: int, dtau: int, params: KernelParams) -> complex:
    """O(N) evaluation of the kernel, equal to the literal double sum."""
    return _b_fast_core(i1, i2, dtau, params)


class CorrelationTable:
    """Cache of kernel values over a fixed index set; lookups are exact-hit only."""

    def __init__(self, params: KernelParams, values: Dict[Tuple[int, int, int], complex]):
        self.params = params
        self._values = dict(values)

    def get(self, i1: int, i2: int, dtau: int) -> complex:
        try:
            return self._values[(i1, i2, dtau)]
        except KeyError:
            raise LookupError(
                "correlation table miss at (i1=%d, i2=%d, dtau=%d): "
                "table was built for a different index set" % (i1, i2, dtau)
            ) from None

    def cpe(self, dtau: int) -> float:
        """Diagonal CPE entry B_{0,0}^{(dtau)} (real by construction)."""
        return self.get(0, 0, dtau).real

    def __len__(self) -> int:
        return len(self._values)

    def __contains__(self, key) -> bool:
        return key in self._values


def build_correlation_table(
    params: KernelParams, needed: Iterable[Tuple[int, int, int]]
) -> CorrelationTable:
    """Evaluate the fast kernel over exactly the requested (i1, i2, dtau) tuples.

    Tuples sharing a lag, a row offset, or an offset difference reuse the
    corresponding factor of the reduction, which keeps large pilot-pair index
    sets affordable.
    """
    n = params.n
    d = np.arange(-(n - 1), n)
    count = n - np.abs(d)
    damp_cache: Dict[int, np.ndarray] = {}
    phase_cache: Dict[int, np.ndarray] = {}
    inner_cache: Dict[int, np.ndarray] = {}
    values = {}
    for key in sorted(set(needed)):
        i1, i2, dtau = key
        damp = damp_cache.get(dtau)
        if damp is None:
            damp = damp_cache[dtau] = np.exp(
                -params.sigma2_tot / 2.0 * np.abs(dtau * params.stride + d))
        phase = phase_cache.get(i1)
        if phase is None:
            phase = phase_cache[i1] = np.exp(-2j * np.pi * d * i1 / n)
        delta = (i1 - i2) % n
        inner = inner_cache.get(delta)
        if inner is None:
            if delta == 0:
                inner = count.astype(complex)
            else:
                q = np.exp(-2j * np.pi * delta / n)
                inner = q ** np.maximum(0, -d) * (1.0 - q**count) / (1.0 - q)
            inner_cache[delta] = inner
        values[key] = complex((damp * phase * inner).sum() / n**2)
    return CorrelationTable(params, values)
