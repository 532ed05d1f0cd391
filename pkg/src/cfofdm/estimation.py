"""Phase-noise-aware LMMSE channel estimation, its error statistics, and the
two single-carrier-style baseline estimators."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Set, Tuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.signal import fftconvolve

from .network import NetworkRealization, SimulationLayout
from .phase_noise import CorrelationTable, KernelParams, PnParams, _b_fast_core

ESTIMATOR_KINDS = ("pna_ofdm", "pna_sc", "unaware")
ICI_MODES = ("as_printed", "independent_data")


def _slot_geometry(layout: SimulationLayout, eval_block: int = 1):
    """Absolute subcarrier and 1-based symbol index of every pilot slot."""
    lo = (eval_block - 1) * layout.block_subcarriers
    subs = np.array([lo + nu for nu, _ in layout.pilot_slots])
    syms = np.array([t for _, t in layout.pilot_slots])
    return subs, syms


def required_kernel_indices(layout: SimulationLayout, eval_block: int = 1) -> Set[Tuple[int, int, int]]:
    """Kernel index tuples consumed by the estimator for this pilot placement.

    Covers the CPE diagonal B_{0,0}^{(dtau)} for |dtau| < tau_c and every
    (subcarrier-offset pair, symbol lag) reached by the pilot-pair double sum
    of the ICI covariance.
    """
    needed = {(0, 0, dt) for dt in range(-(layout.block_symbols - 1), layout.block_symbols)}
    subs, syms = _slot_geometry(layout, eval_block)
    pilot_cols = layout.pilot_subcarriers_absolute()
    for n1, t1 in set(zip(subs.tolist(), syms.tolist())):
        off1 = n1 - pilot_cols[pilot_cols != n1]
        for n2, t2 in set(zip(subs.tolist(), syms.tolist())):
            off2 = n2 - pilot_cols[pilot_cols != n2]
            dt = t1 - t2
            o1, o2 = np.meshgrid(off1, off2, indexing="ij")
            needed.update(zip(o1.ravel().tolist(), o2.ravel().tolist(), [dt] * o1.size))
    return needed


def _data_sum_as_printed(n1, n2, dt, params: KernelParams, data_ind: np.ndarray) -> complex:
    """Full double sum of bare kernel values over data-subcarrier pairs.

    Reduces sum_{j1,j2 in D} B_{n1-j1,n2-j2}^{(dt)} to a lag-domain correlation
    computable in O(N log N): expanding B over its defining sample pairs
    (m1, m2) factorizes the j sums into DFTs of the data-set indicator.
    """
    n = params.n
    m = np.arange(n)
    u = n * np.fft.ifft(data_ind)  # U[m] = sum_{j in D} exp(+2j pi m j / N)
    f1 = np.exp(-2j * np.pi * m * n1 / n) * u
    f2 = np.exp(2j * np.pi * m * n2 / n) * np.conj(u)
    conv = fftconvolve(f1, f2[::-1])  # conv[N-1+d] = sum_m f1[m+d] f2[m]
    d = np.arange(-(n - 1), n)
    damp = np.exp(-params.sigma2_tot / 2.0 * np.abs(dt * params.stride + d))
    return complex((damp * conv[n - 1 + d]).sum() / n**2)


def _data_sum_independent(n1, n2, dt, params: KernelParams, data_ind: np.ndarray) -> complex:
    """Diagonal-only data sum sum_{j in D} B_{n1-j,n2-j}^{(dt)}.

    The common shift j turns the sum into a per-lag weight G(d) = sum_{j in D}
    exp(2j pi j d / N) on the kernel's geometric reduction.
    """
    n = params.n
    g = n * np.fft.ifft(data_ind)
    d = np.arange(-(n - 1), n)
    return _b_fast_core(int(n1), int(n2), dt, params, weights=g[d % n])


@dataclass
class IciBase:
    """Geometry-independent pieces of the ICI covariance for one configuration.

    ``pilot_terms[t]`` is the pilot-pair double sum for pilot sequence t and
    ``data_term`` the shared data-subcarrier sum, both (tau_p, tau_p).
    """

    mode: str
    eval_block: int
    pilot_terms: np.ndarray  # (tau_p, tau_p, tau_p)
    data_term: np.ndarray    # (tau_p, tau_p)


def build_ici_base(
    layout: SimulationLayout,
    table: CorrelationTable,
    book: np.ndarray,
    mode: str = "as_printed",
    eval_block: int = 1,
) -> IciBase:
    """Precompute the pilot-pair and data-pair sums entering the ICI covariance."""
    if mode not in ICI_MODES:
        raise ValueError("unknown ICI mode: %r" % (mode,))
    tau_p = layout.tau_p
    subs, syms = _slot_geometry(layout, eval_block)
    pilot_cols = layout.pilot_subcarriers_absolute()
    slot_of = {slot: i for i, slot in enumerate(layout.pilot_slots)}
    nc = layout.block_subcarriers

    pilot_terms = np.zeros((tau_p, tau_p, tau_p), dtype=complex)
    for i1 in range(tau_p):
        j1s = pilot_cols[pilot_cols != subs[i1]]
        rows1 = np.array([slot_of[(j % nc, syms[i1])] for j in j1s])
        for i2 in range(tau_p):
            j2s = pilot_cols[pilot_cols != subs[i2]]
            if j1s.size == 0 or j2s.size == 0:
                continue
            rows2 = np.array([slot_of[(j % nc, syms[i2])] for j in j2s])
            dt = int(syms[i1] - syms[i2])
            bsub = np.array(
                [[table.get(int(subs[i1] - j1), int(subs[i2] - j2), dt) for j2 in j2s]
                 for j1 in j1s]
            )
            # w1/w2 pick the pilot samples transmitted on those subcarriers
            w1 = book[rows1, :]  # (|j1s|, tau_p) columns indexed by pilot t
            w2 = book[rows2, :]
            pilot_terms[:, i1, i2] = np.einsum("at,ab,bt->t", w1, bsub, np.conj(w2))

    data_ind = np.ones(layout.n_subcarriers)
    data_ind[pilot_cols] = 0.0
    data_sum = _data_sum_as_printed if mode == "as_printed" else _data_sum_independent
    cache: Dict[Tuple[int, int, int], complex] = {}
    data_term = np.zeros((tau_p, tau_p), dtype=complex)
    for i1 in range(tau_p):
        for i2 in range(tau_p):
            key = (int(subs[i1]), int(subs[i2]), int(syms[i1] - syms[i2]))
            if key not in cache:
                cache[key] = data_sum(key[0], key[1], key[2], table.params, data_ind)
            data_term[i1, i2] = cache[key]
    return IciBase(mode=mode, eval_block=eval_block,
                   pilot_terms=pilot_terms, data_term=data_term)


def build_z_ici(
    network: NetworkRealization,
    layout: SimulationLayout,
    table: CorrelationTable,
    mode: str = "as_printed",
    book: Optional[np.ndarray] = None,
    eval_block: int = 1,
    base: Optional[IciBase] = None,
) -> np.ndarray:
    """Per-AP ICI covariance of the stacked pilot observation: (L, tau_p, tau_p).

    ``as_printed`` evaluates the pilot-pair double sum with pilot-sample
    weights plus the unweighted double sum over all data-subcarrier pairs of
    the full symbol; ``independent_data`` keeps only equal-index data pairs,
    as implied by i.i.d. zero-mean data symbols.
    """
    if base is None:
        if book is None:
            from .ofdm import build_pilot_book

            book = build_pilot_book(layout.tau_p)
        base = build_ici_base(layout, table, book, mode=mode, eval_block=eval_block)
    elif base.mode != mode or base.eval_block != eval_block:
        raise ValueError("precomputed ICI base was built for mode=%r, eval_block=%d"
                         % (base.mode, base.eval_block))
    pb = network.p[:, None] * network.beta  # (K, L)
    z = np.zeros((layout.n_aps, layout.tau_p, layout.tau_p), dtype=complex)
    for t in np.unique(network.pilot_index):
        coeff = pb[network.pilot_index == t].sum(axis=0)  # (L,)
        z += coeff[:, None, None] * base.pilot_terms[int(t)][None, :, :]
    z += pb.sum(axis=0)[:, None, None] * base.data_term[None, :, :]
    return z


def cpe_kernel_value(kind: str, dtau: int, table: Optional[CorrelationTable],
                     pn: Optional[PnParams], layout: SimulationLayout) -> float:
    """Symbol-lag CPE correlation assumed by each estimator kind."""
    if kind == "pna_ofdm":
        return table.cpe(dtau)
    if kind == "pna_sc":
        # One drift sample per OFDM symbol, N sample periods apart.
        return float(np.exp(-pn.sigma2_tot * layout.n_subcarriers * abs(dtau) / 2.0))
    if kind == "unaware":
        return 1.0
    raise ValueError("unknown estimator kind: %r" % (kind,))


def build_psi(
    network: NetworkRealization,
    layout: SimulationLayout,
    table: Optional[CorrelationTable],
    z_ici: Optional[np.ndarray],
    kind: str = "pna_ofdm",
    pn: Optional[PnParams] = None,
    book: Optional[np.ndarray] = None,
):
    """Pilot observation covariance Psi_l per AP, with Cholesky factorizations.

    Psi_l = sum_k p_k beta_{k,l} Phi_{t_k} + Z_l + sigma^2 I, where
    [Phi_t]_{i1,i2} = s_t[i1] s_t[i2]^* k(sym_{i1} - sym_{i2}) under the
    estimator kind's CPE kernel k.
    """
    if book is None:
        from .ofdm import build_pilot_book

        book = build_pilot_book(layout.tau_p)
    tau_p = layout.tau_p
    _, syms = _slot_geometry(layout)
    kmat = np.array(
        [[cpe_kernel_value(kind, int(t1 - t2), table, pn, layout) for t2 in syms]
         for t1 in syms]
    )
    pb = network.p[:, None] * network.beta
    psi = np.zeros((layout.n_aps, tau_p, tau_p), dtype=complex)
    for t in np.unique(network.pilot_index):
        s = book[:, int(t)]
        phi = np.outer(s, np.conj(s)) * kmat
        coeff = pb[network.pilot_index == t].sum(axis=0)
        psi += coeff[:, None, None] * phi[None, :, :]
    if z_ici is not None:
        psi += z_ici
    psi += network.sigma2 * np.eye(tau_p)[None, :, :]
    psi = 0.5 * (psi + np.conj(np.swapaxes(psi, 1, 2)))
    try:
        factors = [cho_factor(psi[l]) for l in range(layout.n_aps)]
    except np.linalg.LinAlgError as exc:
        raise RuntimeError("pilot covariance factorization failed: %s" % exc) from exc
    return psi, factors


@dataclass
class EstimatorContext:
    """Statistics-only estimator state, reusable across all Monte Carlo trials."""

    kind: str
    layout: SimulationLayout
    book: np.ndarray
    pilot_index: np.ndarray
    p: np.ndarray
    beta: np.ndarray
    sigma2: float
    psi: np.ndarray        # (L, tau_p, tau_p)
    b_weights: np.ndarray  # (tau_c, tau_p) CPE kernel k(tau - sym_i)
    coef: np.ndarray       # (L, K, tau_c, tau_p); h_hat = coef . y_l
    eps: np.ndarray        # (K, L, tau_c) estimate variances
    err_var: np.ndarray    # (K, L, tau_c) error variances beta - eps


def build_context(
    network: NetworkRealization,
    layout: SimulationLayout,
    table: Optional[CorrelationTable],
    kind: str = "pna_ofdm",
    ici_mode: str = "as_printed",
    pn: Optional[PnParams] = None,
    book: Optional[np.ndarray] = None,
    eval_block: int = 1,
    ici_base: Optional[IciBase] = None,
) -> EstimatorContext:
    """Assemble the per-geometry estimator state for one estimator kind.

    Only the phase-noise-aware OFDM estimator carries an ICI covariance; the
    single-carrier and unaware baselines assume none.
    """
    if kind not in ESTIMATOR_KINDS:
        raise ValueError("unknown estimator kind: %r" % (kind,))
    if book is None:
        from .ofdm import build_pilot_book

        book = build_pilot_book(layout.tau_p)
    z = None
    if kind == "pna_ofdm":
        z = build_z_ici(network, layout, table, mode=ici_mode, book=book,
                        eval_block=eval_block, base=ici_base)
    psi, factors = build_psi(network, layout, table, z, kind=kind, pn=pn, book=book)

    _, syms = _slot_geometry(layout)
    tau_c, tau_p = layout.block_symbols, layout.tau_p
    b_weights = np.array(
        [[cpe_kernel_value(kind, int(tau - t_i), table, pn, layout) for t_i in syms]
         for tau in range(1, tau_c + 1)]
    )

    K, L = network.beta.shape
    coef = np.zeros((L, K, tau_c, tau_p), dtype=complex)
    eps = np.zeros((K, L, tau_c))
    s_all = book[:, network.pilot_index]  # (tau_p, K)
    # rhs columns: B^(tau)H s_{t_k} for every (k, tau) pair
    rhs = (np.conj(b_weights).T[:, None, :] * s_all[:, :, None]).reshape(tau_p, -1)
    for l in range(L):
        sol = cho_solve(factors[l], rhs)  # Psi_l^{-1} rhs
        quad = np.real(np.sum(np.conj(rhs) * sol, axis=0)).reshape(K, tau_c)
        scale = np.sqrt(network.p) * network.beta[:, l]  # (K,)
        coef[l] = np.conj(sol.reshape(tau_p, K, tau_c)).transpose(1, 2, 0) * scale[:, None, None]
        eps[:, l, :] = network.p[:, None] * network.beta[:, l, None] ** 2 * quad
    err_var = network.beta[:, :, None] - eps
    return EstimatorContext(
        kind=kind, layout=layout, book=book, pilot_index=network.pilot_index,
        p=network.p, beta=network.beta, sigma2=network.sigma2, psi=psi,
        b_weights=b_weights, coef=coef, eps=eps, err_var=err_var,
    )


@dataclass
class EstimateSet:
    """Per-trial effective-channel estimates with their model variances."""

    h_hat: np.ndarray    # (K, L, tau_c)
    eps: np.ndarray      # (K, L, tau_c)
    err_var: np.ndarray  # (K, L, tau_c)


def estimate_all(ctx: EstimatorContext, y: np.ndarray) -> EstimateSet:
    """Estimates for every (UE, AP, symbol) from stacked pilot observations (L, tau_p)."""
    h_hat = np.einsum("lktp,lp->klt", ctx.coef, y)
    return EstimateSet(h_hat=h_hat, eps=ctx.eps, err_var=ctx.err_var)


def lmmse_estimate(ctx: EstimatorContext, y_l: np.ndarray, k: int, l: int, tau: int) -> complex:
    """Single effective-channel estimate for UE k at AP l and 1-based symbol tau.

    The estimate is reused for every subcarrier of the coherence block.
    """
    return complex(ctx.coef[l, k, tau - 1] @ y_l)


def estimation_stats(ctx: EstimatorContext, k: int, l: int, tau: int):
    """(estimate variance, error variance) for UE k, AP l, 1-based symbol tau."""
    e = float(ctx.eps[k, l, tau - 1])
    return e, float(ctx.beta[k, l] - e)


def baseline_unaware_estimate(ctx: EstimatorContext, y_l, k: int, l: int, tau: int) -> complex:
    """Phase-noise-unaware MMSE baseline (unit CPE weights, no ICI term)."""
    if ctx.kind != "unaware":
        raise ValueError("context was built for kind %r" % (ctx.kind,))
    return lmmse_estimate(ctx, y_l, k, l, tau)


def baseline_sc_estimate(ctx: EstimatorContext, y_l, k: int, l: int, tau: int) -> complex:
    """Single-carrier phase-noise-aware LMMSE baseline (per-symbol drift kernel)."""
    if ctx.kind != "pna_sc":
        raise ValueError("context was built for kind %r" % (ctx.kind,))
    return lmmse_estimate(ctx, y_l, k, l, tau)
