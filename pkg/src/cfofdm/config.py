"""Experiment configuration: flat key = value files, defaults, presets, and the
effective-configuration echo."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from typing import List, Tuple

import numpy as np

from .network import SimulationLayout, noise_power_w
from .phase_noise import PnParams


class ConfigError(Exception):
    """Raised for unparsable or invalid configuration input."""


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError("expected a boolean, got %r" % text)


def _parse_int_list(text: str) -> Tuple[int, ...]:
    """Comma-separated integers; 'a:b' expands to the inclusive range a..b."""
    out: List[int] = []
    for piece in text.split(","):
        piece = piece.strip()
        if not piece:
            continue
        if ":" in piece:
            lo, hi = piece.split(":", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(piece))
    if not out:
        raise ValueError("expected at least one integer")
    return tuple(out)


def _parse_str_list(text: str) -> Tuple[str, ...]:
    items = tuple(s.strip() for s in text.split(",") if s.strip())
    if not items:
        raise ValueError("expected at least one item")
    return items


@dataclass(frozen=True)
class ExperimentConfig:
    """Full experiment description.  Defaults give the full-scale scenario."""

    name: str = "run"
    # OFDM / coherence-block layout
    n_subcarriers: int = 1200          # N, subcarriers per OFDM symbol
    cp_len: int = -1                   # N_cp in samples; -1 means round(0.07 N)
    subcarrier_spacing_hz: float = 15e3
    block_subcarriers: int = 12        # N_c
    block_symbols: int = 15            # tau_c
    pilot_subcarriers: Tuple[int, ...] = (0,)      # block-local indices
    pilot_symbols: Tuple[int, ...] = tuple(range(1, 13))  # 1-based symbols
    eval_block: int = 1                # 1-based coherence block under evaluation
    # network
    n_aps: int = 200
    n_ues: int = 10
    area_side_m: float = 1000.0
    ap_height_m: float = 10.0
    tx_power_w: float = 0.1
    noise_figure_db: float = 7.0
    shadow_sigma_db: float = 4.0
    wraparound: bool = True
    pilot_policy: str = "round_robin"  # round_robin | greedy
    # oscillators
    carrier_hz: float = 2e9
    gamma_ap: float = 4e-17
    gamma_ue: float = 4e-17
    # receiver configuration
    estimators: Tuple[str, ...] = ("pna_ofdm",)    # pna_ofdm | pna_sc | unaware
    schemes: Tuple[str, ...] = ("mmse", "mr")      # mr | lp_mmse | p_mmse | mmse
    ici_mode: str = "as_printed"       # as_printed | independent_data
    cp_consistent_correlation: bool = False  # kernel stride N + N_cp instead of N
    data_symbols: str = "gaussian"     # gaussian | qpsk
    gaussian_ici: bool = False         # matched-power Gaussian instead of exact ICI
    # Monte Carlo
    n_geometries: int = 50
    n_trials: int = 200
    master_seed: int = 1

    @property
    def cp_len_effective(self) -> int:
        return self.cp_len if self.cp_len >= 0 else round(0.07 * self.n_subcarriers)

    def layout(self) -> SimulationLayout:
        return SimulationLayout(
            n_subcarriers=self.n_subcarriers,
            cp_len=self.cp_len_effective,
            subcarrier_spacing=self.subcarrier_spacing_hz,
            block_subcarriers=self.block_subcarriers,
            block_symbols=self.block_symbols,
            pilot_subcarriers=tuple(self.pilot_subcarriers),
            pilot_symbols=tuple(self.pilot_symbols),
            n_aps=self.n_aps,
            n_ues=self.n_ues,
            area_side=self.area_side_m,
        )

    def pn_params(self) -> PnParams:
        return PnParams(
            carrier_hz=self.carrier_hz,
            gamma_ap=self.gamma_ap,
            gamma_ue=self.gamma_ue,
            sample_time=self.layout().sample_time,
        )

    def validate(self) -> None:
        try:
            layout = self.layout()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.n_geometries < 1 or self.n_trials < 1:
            raise ConfigError("n_geometries and n_trials must be >= 1")
        if self.eval_block < 1 or self.eval_block > layout.n_blocks:
            raise ConfigError("eval_block must lie in [1, %d]" % layout.n_blocks)
        if self.pilot_policy not in ("round_robin", "greedy"):
            raise ConfigError("unknown pilot_policy %r" % self.pilot_policy)
        if self.ici_mode not in ("as_printed", "independent_data"):
            raise ConfigError("unknown ici_mode %r" % self.ici_mode)
        if self.data_symbols not in ("gaussian", "qpsk"):
            raise ConfigError("unknown data_symbols %r" % self.data_symbols)
        for e in self.estimators:
            if e not in ("pna_ofdm", "pna_sc", "unaware"):
                raise ConfigError("unknown estimator %r" % e)
        for s in self.schemes:
            if s not in ("mr", "lp_mmse", "p_mmse", "mmse"):
                raise ConfigError("unknown scheme %r" % s)
        # ensure pilot placement consistency, with the explicit constraint message
        if layout.tau_p > layout.block_subcarriers * layout.block_symbols:
            raise ConfigError(
                "tau_p exceeds coherence block size N_c * tau_c"
            )
        if self.n_ues > self.n_aps * layout.tau_p:
            raise ConfigError(
                "n_ues = %d exceeds serving capacity n_aps * tau_p = %d"
                % (self.n_ues, self.n_aps * layout.tau_p)
            )


_PARSERS = {
    "name": str,
    "n_subcarriers": int,
    "cp_len": int,
    "subcarrier_spacing_hz": float,
    "block_subcarriers": int,
    "block_symbols": int,
    "pilot_subcarriers": _parse_int_list,
    "pilot_symbols": _parse_int_list,
    "eval_block": int,
    "n_aps": int,
    "n_ues": int,
    "area_side_m": float,
    "ap_height_m": float,
    "tx_power_w": float,
    "noise_figure_db": float,
    "shadow_sigma_db": float,
    "wraparound": _parse_bool,
    "pilot_policy": str,
    "carrier_hz": float,
    "gamma_ap": float,
    "gamma_ue": float,
    "estimators": _parse_str_list,
    "schemes": _parse_str_list,
    "ici_mode": str,
    "cp_consistent_correlation": _parse_bool,
    "data_symbols": str,
    "gaussian_ici": _parse_bool,
    "n_geometries": int,
    "n_trials": int,
    "master_seed": int,
}


def parse_config(text: str, base: ExperimentConfig = None) -> ExperimentConfig:
    """Parse flat ``key = value`` text ('#' comments) over the defaults.

    Unknown keys and unparsable values raise ConfigError with the line number.
    """
    cfg = base if base is not None else ExperimentConfig()
    updates = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("line %d: expected 'key = value', got %r" % (lineno, raw))
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _PARSERS:
            raise ConfigError("line %d: unknown key %r" % (lineno, key))
        try:
            updates[key] = _PARSERS[key](value)
        except (ValueError, TypeError) as exc:
            raise ConfigError("line %d: invalid value for %s: %s" % (lineno, key, exc)) from None
    cfg = replace(cfg, **updates)
    cfg.validate()
    return cfg


def load_config(path: str, base: ExperimentConfig = None) -> ExperimentConfig:
    """Read and validate a configuration file."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as exc:
        raise ConfigError("cannot read %s: %s" % (path, exc)) from None
    return parse_config(text, base=base)


def apply_overrides(cfg: ExperimentConfig, overrides) -> ExperimentConfig:
    """Apply command-line ``key=value`` overrides onto a configuration."""
    text = "\n".join(overrides)
    return parse_config(text, base=cfg)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def effective_config_text(cfg: ExperimentConfig) -> str:
    """Echo of every configured and derived value actually used by a run."""
    lines = ["# effective configuration"]
    for f in fields(cfg):
        lines.append("%s = %s" % (f.name, _fmt(getattr(cfg, f.name))))
    layout = cfg.layout()
    pn = cfg.pn_params()
    lines.append("# derived")
    lines.append("cp_len_effective = %d            # samples" % layout.cp_len)
    lines.append("tau_p = %d                       # pilot channel uses" % layout.tau_p)
    lines.append("n_blocks = %d                    # coherence blocks per symbol" % layout.n_blocks)
    lines.append("bandwidth_hz = %s" % repr(layout.bandwidth))
    lines.append("sample_time_s = %s" % repr(layout.sample_time))
    lines.append("sigma2_phase_ap = %s             # rad^2 per sample" % repr(pn.sigma2_ap))
    lines.append("sigma2_phase_ue = %s             # rad^2 per sample" % repr(pn.sigma2_ue))
    lines.append("noise_power_w = %s" % repr(noise_power_w(layout.bandwidth, cfg.noise_figure_db)))
    return "\n".join(lines) + "\n"


def fig2_config() -> ExperimentConfig:
    """Full-scale preset: SE versus channel use in the first coherence block."""
    return ExperimentConfig(
        name="fig2",
        estimators=("unaware", "pna_sc", "pna_ofdm"),
        schemes=("mmse", "mr"),
    )


def fig3_config(n_ues: int) -> ExperimentConfig:
    """Full-scale preset at one channel use, swept over the UE count."""
    return ExperimentConfig(
        name="fig3_K%d" % n_ues,
        n_ues=n_ues,
        estimators=("unaware", "pna_sc", "pna_ofdm"),
        schemes=("mmse", "mr"),
    )


def ci_config() -> ExperimentConfig:
    """Reduced-scale configuration exercising every code path in well under a minute."""
    return ExperimentConfig(
        name="ci",
        n_subcarriers=120,
        block_subcarriers=12,
        block_symbols=5,
        pilot_subcarriers=(0,),
        pilot_symbols=(1, 2, 3, 4),
        n_aps=30,
        n_ues=5,
        shadow_sigma_db=0.0,
        n_geometries=5,
        n_trials=50,
    )
