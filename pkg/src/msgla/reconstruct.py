"""Iterative phase reconstruction: classical GLA and the two multi-source loops.

All three loops alternate consistency projections with magnitude or phase
replacement. ``nm_msgla`` consumes speech and noise magnitude estimates;
``np_msgla`` consumes a speech magnitude and a noise phase estimate. Both
drive the speech-phase iterate toward one of the closed-form candidates in
:mod:`msgla.geometry`, resolving the sign ambiguity implicitly.

Runs are deterministic: random initialization is seeded, and a fixed
iteration count (default 5) is used rather than a convergence test.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import apply_sign_field, cosine_phase_candidates, nearest_candidate_distance
from .metrics import phase_cos_sim, weighted_frobenius
from .spectral import (
    Spectrogram,
    StftConfig,
    Waveform,
    canonical_length,
    decompose,
    istft,
    project_values,
    recompose,
    wrap_phase,
)

__all__ = [
    "ReconConfig",
    "IterationStats",
    "ReconReport",
    "Estimates",
    "METHODS",
    "gla",
    "nm_msgla",
    "np_msgla",
    "enhance",
]

INIT_KINDS = ("noisy", "zero", "random")
METHODS = ("passthrough", "gla", "nm", "np", "sign")


@dataclass(frozen=True)
class ReconConfig:
    """Loop parameters shared by every reconstruction method."""

    iterations: int = 5
    init: str = "noisy"
    seed: int = 0
    trace: bool = True

    def __post_init__(self) -> None:
        if int(self.iterations) != self.iterations or self.iterations < 0:
            raise ValueError(f"iterations must be a non-negative integer, got {self.iterations!r}")
        object.__setattr__(self, "iterations", int(self.iterations))
        if self.init not in INIT_KINDS:
            raise ValueError(f"init must be one of {INIT_KINDS}, got {self.init!r}")


@dataclass
class IterationStats:
    """Scalar diagnostics for one phase iterate.

    ``inconsistency`` measures the current speech estimate; the other two
    fields are filled only when oracle references were supplied.
    """

    iteration: int
    inconsistency: float
    phase_cos_sim: float | None = None
    candidate_distance: float | None = None


@dataclass
class ReconReport:
    """Outcome of a reconstruction run, with optional per-iteration trace."""

    final_phase: np.ndarray
    per_iteration: list[IterationStats] = field(default_factory=list)
    phases: list[np.ndarray] | None = None
    method: str = ""


@dataclass
class Estimates:
    """Spectral quantities a reconstruction method may consume."""

    mag_speech: np.ndarray | None = None
    mag_noise: np.ndarray | None = None
    phase_noise: np.ndarray | None = None
    sign: object | None = None


def _initial_phase(cfg: ReconConfig, shape, noisy_phase) -> np.ndarray:
    if cfg.init == "noisy":
        if noisy_phase is None:
            raise ValueError("init 'noisy' requires the mixture phase")
        return np.array(noisy_phase, dtype=np.float64)
    if cfg.init == "zero":
        return np.zeros(shape)
    rng = np.random.default_rng(cfg.seed)
    return rng.uniform(-np.pi, np.pi, size=shape)


def _stats(
    n: int,
    speech_values: np.ndarray,
    projected: np.ndarray,
    phase: np.ndarray,
    stft_cfg: StftConfig,
    ref_phase,
    candidates,
) -> IterationStats:
    return IterationStats(
        iteration=n,
        inconsistency=weighted_frobenius(speech_values - projected, stft_cfg),
        phase_cos_sim=None if ref_phase is None else phase_cos_sim(phase, ref_phase),
        candidate_distance=(
            None
            if candidates is None
            else float(np.mean(nearest_candidate_distance(phase, candidates)))
        ),
    )


def _check_like(name: str, arr, spectrogram: Spectrogram) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.shape != spectrogram.values.shape:
        raise ValueError(
            f"{name} shape {arr.shape} does not match spectrogram shape {spectrogram.values.shape}"
        )
    return arr


def gla(
    mag_speech,
    cfg: ReconConfig | None = None,
    stft_cfg: StftConfig | None = None,
    *,
    origin_length: int | None = None,
    noisy_phase=None,
    ref_phase=None,
    candidates=None,
) -> ReconReport:
    """Classical Griffin-Lim: repeatedly take the phase of the projection.

    At bins where the projection is exactly zero the previous phase is
    retained (zero magnitude carries no phase information), so an all-zero
    magnitude leaves the initialization untouched.
    """
    cfg = cfg if cfg is not None else ReconConfig()
    stft_cfg = stft_cfg if stft_cfg is not None else StftConfig()
    mag = np.asarray(mag_speech, dtype=np.float64)
    if mag.ndim != 2 or mag.shape[1] != stft_cfg.n_bins:
        raise ValueError(f"magnitude shape {mag.shape} does not fit config bins {stft_cfg.n_bins}")
    if np.any(mag < 0) or not np.all(np.isfinite(mag)):
        raise ValueError("magnitude must be finite and non-negative")
    length = origin_length if origin_length is not None else canonical_length(mag.shape[0], stft_cfg)

    phase = _initial_phase(cfg, mag.shape, noisy_phase)
    stats: list[IterationStats] = []
    phases: list[np.ndarray] | None = [phase] if cfg.trace else None
    for n in range(cfg.iterations):
        current = recompose(mag, phase)
        projected = project_values(current, stft_cfg, length)
        if cfg.trace:
            stats.append(_stats(n, current, projected, phase, stft_cfg, ref_phase, candidates))
        phase = wrap_phase(np.where(np.abs(projected) == 0.0, phase, np.angle(projected)))
        if cfg.trace:
            phases.append(phase)
    if cfg.trace:
        current = recompose(mag, phase)
        projected = project_values(current, stft_cfg, length)
        stats.append(
            _stats(cfg.iterations, current, projected, phase, stft_cfg, ref_phase, candidates)
        )
    return ReconReport(final_phase=phase, per_iteration=stats, phases=phases, method="gla")


def nm_msgla(
    noisy: Spectrogram,
    mag_speech,
    mag_noise,
    cfg: ReconConfig | None = None,
    *,
    ref_phase=None,
    candidates=None,
) -> ReconReport:
    """Noise-magnitude multi-source loop.

    Each iteration: (i) project the current speech estimate onto consistent
    spectrograms and keep its phase, (ii) project the mixture residual and
    keep its phase as the noise phase, (iii) subtract the re-phased noise
    magnitude from the mixture and take the angle as the next speech phase.
    Exact zeros in step (iii) take phase 0.
    """
    cfg = cfg if cfg is not None else ReconConfig()
    mag_speech = _check_like("mag_speech", mag_speech, noisy)
    mag_noise = _check_like("mag_noise", mag_noise, noisy)
    mixture = noisy.values
    stft_cfg = noisy.config
    length = noisy.origin_length
    _, phase_mix = decompose(noisy)

    phase = _initial_phase(cfg, mixture.shape, phase_mix)
    stats: list[IterationStats] = []
    phases: list[np.ndarray] | None = [phase] if cfg.trace else None
    for n in range(cfg.iterations):
        current = recompose(mag_speech, phase)
        projected = project_values(current, stft_cfg, length)
        if cfg.trace:
            stats.append(_stats(n, current, projected, phase, stft_cfg, ref_phase, candidates))
        phase_speech = wrap_phase(np.angle(projected))
        residual = mixture - recompose(mag_speech, phase_speech)
        projected_noise = project_values(residual, stft_cfg, length)
        phase_noise = wrap_phase(np.angle(projected_noise))
        phase = wrap_phase(np.angle(mixture - recompose(mag_noise, phase_noise)))
        if cfg.trace:
            phases.append(phase)
    if cfg.trace:
        current = recompose(mag_speech, phase)
        projected = project_values(current, stft_cfg, length)
        stats.append(
            _stats(cfg.iterations, current, projected, phase, stft_cfg, ref_phase, candidates)
        )
    return ReconReport(final_phase=phase, per_iteration=stats, phases=phases, method="nm")


def np_msgla(
    noisy: Spectrogram,
    mag_speech,
    phase_noise,
    cfg: ReconConfig | None = None,
    *,
    ref_phase=None,
    candidates=None,
) -> ReconReport:
    """Noise-phase multi-source loop.

    Each iteration: (i) project the current speech estimate and keep its
    phase, (ii) project the mixture residual and keep its *magnitude* as the
    implied noise magnitude, (iii) subtract that magnitude at the supplied
    noise phase from the mixture and take the angle as the next speech phase.
    """
    cfg = cfg if cfg is not None else ReconConfig()
    mag_speech = _check_like("mag_speech", mag_speech, noisy)
    phase_noise = _check_like("phase_noise", phase_noise, noisy)
    mixture = noisy.values
    stft_cfg = noisy.config
    length = noisy.origin_length
    _, phase_mix = decompose(noisy)

    phase = _initial_phase(cfg, mixture.shape, phase_mix)
    stats: list[IterationStats] = []
    phases: list[np.ndarray] | None = [phase] if cfg.trace else None
    for n in range(cfg.iterations):
        current = recompose(mag_speech, phase)
        projected = project_values(current, stft_cfg, length)
        if cfg.trace:
            stats.append(_stats(n, current, projected, phase, stft_cfg, ref_phase, candidates))
        phase_speech = wrap_phase(np.angle(projected))
        residual = mixture - recompose(mag_speech, phase_speech)
        implied_mag_noise = np.abs(project_values(residual, stft_cfg, length))
        phase = wrap_phase(np.angle(mixture - recompose(implied_mag_noise, phase_noise)))
        if cfg.trace:
            phases.append(phase)
    if cfg.trace:
        current = recompose(mag_speech, phase)
        projected = project_values(current, stft_cfg, length)
        stats.append(
            _stats(cfg.iterations, current, projected, phase, stft_cfg, ref_phase, candidates)
        )
    return ReconReport(final_phase=phase, per_iteration=stats, phases=phases, method="np")


def _require(value, method: str, name: str):
    if value is None:
        raise ValueError(f"method '{method}' requires estimate '{name}'")
    return value


def _static_report(
    mag, phase, noisy: Spectrogram, cfg: ReconConfig, ref_phase, candidates, method: str
) -> ReconReport:
    stats: list[IterationStats] = []
    phases = None
    if cfg.trace:
        current = recompose(mag, phase)
        projected = project_values(current, noisy.config, noisy.origin_length)
        stats = [_stats(0, current, projected, phase, noisy.config, ref_phase, candidates)]
        phases = [phase]
    return ReconReport(final_phase=phase, per_iteration=stats, phases=phases, method=method)


def enhance(
    noisy: Spectrogram,
    method: str,
    estimates: Estimates | None = None,
    cfg: ReconConfig | None = None,
    *,
    ref_phase=None,
    candidates=None,
) -> tuple[Waveform, ReconReport]:
    """Reconstruct a speech phase with ``method`` and synthesize the estimate.

    The output waveform is the inversion of the (estimated) speech magnitude
    combined with the reconstructed phase, trimmed to the mixture's original
    length. ``passthrough`` keeps the mixture phase; ``sign`` applies a
    supplied sign field to the law-of-cosines candidates in one shot.
    """
    cfg = cfg if cfg is not None else ReconConfig()
    est = estimates if estimates is not None else Estimates()
    method = method.lower()
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    mag_mix, phase_mix = decompose(noisy)

    if method == "passthrough":
        mag = est.mag_speech if est.mag_speech is not None else mag_mix
        mag = _check_like("mag_speech", mag, noisy)
        report = _static_report(mag, phase_mix, noisy, cfg, ref_phase, candidates, method)
    elif method == "gla":
        mag = _check_like("mag_speech", _require(est.mag_speech, method, "mag_speech"), noisy)
        report = gla(
            mag,
            cfg,
            noisy.config,
            origin_length=noisy.origin_length,
            noisy_phase=phase_mix,
            ref_phase=ref_phase,
            candidates=candidates,
        )
    elif method == "nm":
        mag = _check_like("mag_speech", _require(est.mag_speech, method, "mag_speech"), noisy)
        mag_noise = _require(est.mag_noise, method, "mag_noise")
        report = nm_msgla(noisy, mag, mag_noise, cfg, ref_phase=ref_phase, candidates=candidates)
    elif method == "np":
        mag = _check_like("mag_speech", _require(est.mag_speech, method, "mag_speech"), noisy)
        phase_noise = _require(est.phase_noise, method, "phase_noise")
        report = np_msgla(noisy, mag, phase_noise, cfg, ref_phase=ref_phase, candidates=candidates)
    else:  # sign
        mag = _check_like("mag_speech", _require(est.mag_speech, method, "mag_speech"), noisy)
        mag_noise = _check_like("mag_noise", _require(est.mag_noise, method, "mag_noise"), noisy)
        sign = _require(est.sign, method, "sign")
        cand = cosine_phase_candidates(mag_mix, phase_mix, mag, mag_noise)
        phase = apply_sign_field(phase_mix, cand.abs_delta, sign)
        report = _static_report(mag, phase, noisy, cfg, ref_phase, candidates, method)

    estimate = Spectrogram(
        recompose(mag, report.final_phase), noisy.config, noisy.origin_length, noisy.sample_rate
    )
    return istft(estimate), report
