"""Synthetic mixtures, oracle/degraded estimate providers, and experiment runs.

The experiment runner reproduces, at desk scale, the oracle-versus-degraded
matrix: each reconstruction method is evaluated with every combination of a
speech-magnitude provider and a noise-quantity provider. Trained estimators
are replaced by a seeded perturbed oracle; output metadata labels them as
such.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .geometry import cosine_phase_candidates, oracle_sign
from .metrics import phase_cos_sim, si_snr, metric_row
from .reconstruct import Estimates, ReconConfig, enhance
from .spectral import DEFAULT_SAMPLE_RATE, Spectrogram, StftConfig, Waveform, decompose, stft, wrap_phase

__all__ = [
    "MixtureTriple",
    "MixtureSpec",
    "EstimateProvider",
    "ExperimentSpec",
    "ResultTable",
    "RESULT_COLUMNS",
    "MIXTURE_KINDS",
    "synthesize_mixture",
    "provide_estimates",
    "default_provider_pairs",
    "run_experiment",
    "perturb_magnitude",
    "perturb_phase",
]

log = logging.getLogger(__name__)

MIXTURE_KINDS = ("harmonic", "speech_shaped", "wav_pair")
PROVIDER_KINDS = ("oracle", "noisy_baseline", "perturbed_oracle")

HARMONIC_PARTIALS = 8
CLEAN_RMS = 0.05

# Stable per-quantity stream tags so perturbations are independent.
_QUANTITY_TAGS = {"mag_speech": 0, "mag_noise": 1, "phase_noise": 2}

METHOD_NEEDS = {
    "passthrough": (),
    "gla": ("mag_speech",),
    "nm": ("mag_speech", "mag_noise"),
    "np": ("mag_speech", "phase_noise"),
    "sign": ("mag_speech", "mag_noise"),
}

RESULT_COLUMNS = [
    "row_kind",
    "method",
    "speech_provider",
    "noise_provider",
    "mixture_kind",
    "mixture_seed",
    "snr_db",
    "si_snr_db",
    "snr_db_plain",
    "phase_cos_sim",
    "inconsistency",
    "si_snr_noisy_db",
    "phase_cos_sim_noisy",
    "fingerprint",
]

_MEAN_COLUMNS = [
    "si_snr_db",
    "snr_db_plain",
    "phase_cos_sim",
    "inconsistency",
    "si_snr_noisy_db",
    "phase_cos_sim_noisy",
]


@dataclass
class MixtureTriple:
    """Aligned clean/noise/noisy waveforms; noisy = clean + noise samplewise."""

    clean: Waveform
    noise: Waveform
    noisy: Waveform
    snr_db: float
    seed: int


@dataclass(frozen=True)
class MixtureSpec:
    """Recipe for one synthetic (or WAV-backed) mixture."""

    kind: str = "harmonic"
    snr_db: float = 0.0
    duration_s: float = 0.5
    sample_rate: int = DEFAULT_SAMPLE_RATE
    seed: int = 0
    clean_path: str | None = None
    noise_path: str | None = None


@dataclass(frozen=True)
class EstimateProvider:
    """Source of spectral estimates: exact, degraded, or the noisy baseline."""

    kind: str = "oracle"
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in PROVIDER_KINDS:
            raise ValueError(f"provider kind must be one of {PROVIDER_KINDS}, got {self.kind!r}")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")

    def label(self) -> str:
        if self.kind == "perturbed_oracle":
            return f"perturbed({self.noise_std:g})"
        return self.kind


def _harmonic_clean(n: int, sample_rate: int, rng: np.random.Generator) -> np.ndarray:
    # 8-partial tone with mild vibrato: strong quasi-stationary harmonic bins
    # plus a broad low-energy floor, the two regimes the experiments contrast.
    f0 = rng.uniform(110.0, 220.0)
    vib_rate = rng.uniform(4.0, 6.0)
    vib_depth = 0.005
    offsets = rng.uniform(-np.pi, np.pi, size=HARMONIC_PARTIALS)
    t = np.arange(n) / sample_rate
    inst_freq = f0 * (1.0 + vib_depth * np.sin(2.0 * np.pi * vib_rate * t))
    base_phase = 2.0 * np.pi * np.cumsum(inst_freq) / sample_rate
    clean = np.zeros(n)
    for k in range(1, HARMONIC_PARTIALS + 1):
        clean += np.sin(k * base_phase + offsets[k - 1]) / k
    rms = np.sqrt(np.mean(clean**2))
    return clean * (CLEAN_RMS / rms)


def _speech_shaped_noise(clean: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    # White noise colored by a smoothed magnitude envelope of the clean signal.
    white = rng.standard_normal(clean.shape[0])
    envelope = np.abs(np.fft.rfft(clean))
    width = max(len(envelope) // 64, 3)
    kernel = np.ones(width) / width
    smoothed = np.convolve(envelope, kernel, mode="same")
    smoothed = smoothed / smoothed.max() + 1e-3
    return np.fft.irfft(np.fft.rfft(white) * smoothed, n=clean.shape[0])


def _scale_noise(clean: np.ndarray, noise: np.ndarray, snr_db: float) -> np.ndarray:
    if np.isinf(snr_db) and snr_db > 0:
        return np.zeros_like(noise)
    clean_norm = float(np.linalg.norm(clean))
    noise_norm = float(np.linalg.norm(noise))
    if noise_norm == 0.0:
        raise ValueError("noise signal is silent; cannot scale to a finite SNR")
    if clean_norm == 0.0:
        raise ValueError("clean signal is silent; SNR is undefined")
    gain = clean_norm / noise_norm * 10.0 ** (-snr_db / 20.0)
    return noise * gain


def synthesize_mixture(
    kind: str = "harmonic",
    snr_db: float = 0.0,
    duration_s: float = 0.5,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
    seed: int = 0,
    *,
    clean_path: str | None = None,
    noise_path: str | None = None,
    truncate: bool = False,
) -> MixtureTriple:
    """Deterministically build an additive clean/noise/noisy triple.

    The noise is scaled so that ``10*log10(|clean|^2 / |noise|^2)`` equals
    ``snr_db`` exactly; ``snr_db = inf`` yields zero noise.
    """
    if kind not in MIXTURE_KINDS:
        raise ValueError(f"kind must be one of {MIXTURE_KINDS}, got {kind!r}")
    if kind == "wav_pair":
        from .audio_io import read_wav

        if clean_path is None or noise_path is None:
            raise ValueError("wav_pair mixtures need clean_path and noise_path")
        clean_wave = read_wav(clean_path)
        noise_wave = read_wav(noise_path)
        if clean_wave.sample_rate != noise_wave.sample_rate:
            raise ValueError(
                f"sample rate mismatch: {clean_wave.sample_rate} vs {noise_wave.sample_rate}"
            )
        if len(clean_wave) != len(noise_wave):
            if not truncate:
                raise ValueError(
                    f"length mismatch ({len(clean_wave)} vs {len(noise_wave)}); "
                    "pass truncate=True to clip both to the shorter signal"
                )
            n = min(len(clean_wave), len(noise_wave))
            clean_wave = Waveform(clean_wave.samples[:n], clean_wave.sample_rate)
            noise_wave = Waveform(noise_wave.samples[:n], noise_wave.sample_rate)
        clean = clean_wave.samples
        noise = noise_wave.samples
        sample_rate = clean_wave.sample_rate
    else:
        if duration_s <= 0:
            raise ValueError("duration_s must be positive")
        if sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        n = int(round(duration_s * sample_rate))
        rng = np.random.default_rng(seed)
        clean = _harmonic_clean(n, sample_rate, rng)
        if kind == "harmonic":
            noise = rng.standard_normal(n)
        else:
            noise = _speech_shaped_noise(clean, rng)

    noise = _scale_noise(clean, noise, snr_db)
    return MixtureTriple(
        clean=Waveform(clean, sample_rate),
        noise=Waveform(noise, sample_rate),
        noisy=Waveform(clean + noise, sample_rate),
        snr_db=snr_db,
        seed=seed,
    )


def perturb_magnitude(mag: np.ndarray, std: float, rng: np.random.Generator) -> np.ndarray:
    """Multiplicative log-normal degradation, clamped to stay non-negative."""
    perturbed = mag * np.exp(std * rng.standard_normal(mag.shape))
    return np.maximum(perturbed, 0.0)


def perturb_phase(phase: np.ndarray, std: float, rng: np.random.Generator) -> np.ndarray:
    """Additive Gaussian degradation, re-wrapped to [-pi, pi)."""
    return wrap_phase(phase + std * rng.standard_normal(phase.shape))


def provide_estimates(
    provider: EstimateProvider,
    triple: MixtureTriple,
    stft_cfg: StftConfig,
    scope: tuple[str, ...] = ("mag_speech", "mag_noise", "phase_noise"),
) -> Estimates:
    """Supply the quantities in ``scope`` from the given provider.

    ``oracle`` decomposes the true clean/noise spectrograms;
    ``perturbed_oracle`` additionally applies a seeded multiplicative
    log-normal perturbation to magnitudes and an additive wrapped Gaussian to
    phases; ``noisy_baseline`` supplies the noisy magnitude as the speech
    magnitude and zero as the noise magnitude (it has no noise phase).
    """
    unknown = [q for q in scope if q not in _QUANTITY_TAGS]
    if unknown:
        raise ValueError(f"unknown estimate quantities {unknown}")
    out: dict[str, np.ndarray] = {}
    if provider.kind == "noisy_baseline":
        mag_mix, _ = decompose(stft(triple.noisy, stft_cfg))
        for quantity in scope:
            if quantity == "mag_speech":
                out[quantity] = mag_mix
            elif quantity == "mag_noise":
                out[quantity] = np.zeros_like(mag_mix)
            else:
                raise ValueError("noisy_baseline provider cannot supply phase_noise")
        return Estimates(**out)

    mag_speech, _ = decompose(stft(triple.clean, stft_cfg))
    mag_noise, phase_noise = decompose(stft(triple.noise, stft_cfg))
    exact = {"mag_speech": mag_speech, "mag_noise": mag_noise, "phase_noise": phase_noise}
    for quantity in scope:
        value = exact[quantity]
        if provider.kind == "perturbed_oracle" and provider.noise_std > 0:
            rng = np.random.default_rng([provider.seed, triple.seed, _QUANTITY_TAGS[quantity]])
            if quantity.startswith("mag"):
                value = perturb_magnitude(value, provider.noise_std, rng)
            else:
                value = perturb_phase(value, provider.noise_std, rng)
        out[quantity] = value
    return Estimates(**out)


def default_provider_pairs(
    noise_std: float = 0.3, seed: int = 0
) -> list[tuple[EstimateProvider, EstimateProvider]]:
    """The 2x2 oracle/perturbed matrix, ordered exact-first."""
    exact = EstimateProvider("oracle")
    degraded = EstimateProvider("perturbed_oracle", noise_std=noise_std, seed=seed)
    return [(exact, exact), (exact, degraded), (degraded, exact), (degraded, degraded)]


@dataclass
class ExperimentSpec:
    """Full description of an experiment grid."""

    mixtures: list[MixtureSpec]
    methods: list[str] = field(default_factory=lambda: ["nm", "np"])
    provider_pairs: list[tuple[EstimateProvider, EstimateProvider]] = field(
        default_factory=default_provider_pairs
    )
    stft_cfg: StftConfig = field(default_factory=StftConfig)
    recon_cfg: ReconConfig = field(default_factory=lambda: ReconConfig(trace=False))

    def __post_init__(self) -> None:
        for method in self.methods:
            if method not in METHOD_NEEDS:
                raise ValueError(f"unknown method {method!r}")


@dataclass
class ResultTable:
    """Ordered rows of one experiment run."""

    columns: list[str]
    rows: list[dict]


@dataclass
class _MixtureContext:
    spec: MixtureSpec
    triple: MixtureTriple
    noisy_spec: Spectrogram
    phase_speech: np.ndarray
    si_snr_noisy: float
    cos_sim_noisy: float


def _mixture_context(spec: MixtureSpec, stft_cfg: StftConfig) -> _MixtureContext:
    triple = synthesize_mixture(
        spec.kind,
        spec.snr_db,
        spec.duration_s,
        spec.sample_rate,
        spec.seed,
        clean_path=spec.clean_path,
        noise_path=spec.noise_path,
    )
    noisy_spec = stft(triple.noisy, stft_cfg)
    _, phase_mix = decompose(noisy_spec)
    _, phase_speech = decompose(stft(triple.clean, stft_cfg))
    return _MixtureContext(
        spec=spec,
        triple=triple,
        noisy_spec=noisy_spec,
        phase_speech=phase_speech,
        si_snr_noisy=si_snr(triple.noisy, triple.clean),
        cos_sim_noisy=phase_cos_sim(phase_mix, phase_speech),
    )


def _run_cell(
    ctx: _MixtureContext,
    method: str,
    pair: tuple[EstimateProvider, EstimateProvider] | None,
    recon_cfg: ReconConfig,
    fingerprint: str,
) -> dict:
    stft_cfg = ctx.noisy_spec.config
    needs = METHOD_NEEDS[method]
    estimates = Estimates()
    if pair is None:
        speech_label = noise_label = "-"
    else:
        speech_provider, noise_provider = pair
        speech_label, noise_label = speech_provider.label(), noise_provider.label()
        speech_scope = tuple(q for q in needs if q == "mag_speech")
        noise_scope = tuple(q for q in needs if q != "mag_speech")
        if speech_scope:
            estimates.mag_speech = provide_estimates(
                speech_provider, ctx.triple, stft_cfg, speech_scope
            ).mag_speech
        if noise_scope:
            supplied = provide_estimates(noise_provider, ctx.triple, stft_cfg, noise_scope)
            estimates.mag_noise = supplied.mag_noise
            estimates.phase_noise = supplied.phase_noise
    if method == "sign":
        mag_mix, phase_mix = decompose(ctx.noisy_spec)
        cand = cosine_phase_candidates(
            mag_mix, phase_mix, estimates.mag_speech, estimates.mag_noise
        )
        estimates.sign = oracle_sign(cand, ctx.phase_speech)

    enhanced, report = enhance(ctx.noisy_spec, method, estimates, recon_cfg)
    mag_used = (
        estimates.mag_speech
        if estimates.mag_speech is not None
        else decompose(ctx.noisy_spec)[0]
    )
    row_metrics = metric_row(
        enhanced,
        ctx.triple.clean,
        report.final_phase,
        ctx.phase_speech,
        mag_used,
        stft_cfg,
        ctx.noisy_spec.origin_length,
    )
    return {
        "row_kind": "cell",
        "method": method,
        "speech_provider": speech_label,
        "noise_provider": noise_label,
        "mixture_kind": ctx.spec.kind,
        "mixture_seed": ctx.spec.seed,
        "snr_db": ctx.spec.snr_db,
        "si_snr_db": row_metrics.si_snr_db,
        "snr_db_plain": row_metrics.snr_db_plain,
        "phase_cos_sim": row_metrics.phase_cos_sim,
        "inconsistency": row_metrics.inconsistency,
        "si_snr_noisy_db": ctx.si_snr_noisy,
        "phase_cos_sim_noisy": ctx.cos_sim_noisy,
        "fingerprint": fingerprint,
    }


def run_experiment(spec: ExperimentSpec, jobs: int = 1, fingerprint: str = "") -> ResultTable:
    """Run every (method x provider pair x mixture) cell and append means.

    Rows are grouped by method, then provider pair (exact-first order), then
    mixture, and the ordering is independent of ``jobs``. Mean rows, one per
    (method, provider pair), follow the cell rows.
    """
    if not spec.mixtures:
        return ResultTable(columns=list(RESULT_COLUMNS), rows=[])
    contexts = [_mixture_context(m, spec.stft_cfg) for m in spec.mixtures]

    cells: list[tuple[_MixtureContext, str, tuple | None]] = []
    for method in spec.methods:
        pairs = spec.provider_pairs if METHOD_NEEDS[method] else [None]
        for pair in pairs:
            for ctx in contexts:
                cells.append((ctx, method, pair))

    log.info("running %d experiment cells with %d worker(s)", len(cells), jobs)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(
                pool.map(
                    lambda c: _run_cell(c[0], c[1], c[2], spec.recon_cfg, fingerprint), cells
                )
            )
    else:
        rows = [_run_cell(ctx, method, pair, spec.recon_cfg, fingerprint) for ctx, method, pair in cells]

    aggregates: list[dict] = []
    seen: list[tuple[str, str, str]] = []
    for row in rows:
        key = (row["method"], row["speech_provider"], row["noise_provider"])
        if key not in seen:
            seen.append(key)
    for method, speech_label, noise_label in seen:
        group = [
            r
            for r in rows
            if (r["method"], r["speech_provider"], r["noise_provider"])
            == (method, speech_label, noise_label)
        ]
        aggregate = {
            "row_kind": "mean",
            "method": method,
            "speech_provider": speech_label,
            "noise_provider": noise_label,
            "mixture_kind": "",
            "mixture_seed": "",
            "snr_db": "",
            "fingerprint": fingerprint,
        }
        for column in _MEAN_COLUMNS:
            aggregate[column] = float(np.mean([r[column] for r in group]))
        aggregates.append(aggregate)
    return ResultTable(columns=list(RESULT_COLUMNS), rows=rows + aggregates)
