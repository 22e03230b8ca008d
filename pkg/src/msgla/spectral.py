"""Short-time Fourier analysis, least-squares synthesis, and the consistency projection.

Every reconstruction loop in this package is built from three operations:
analysis (``stft``), synthesis (``istft``), and their composition
``stft(istft(.))`` which maps an arbitrary complex array onto the set of
spectrograms that belong to a real time signal ("consistent" spectrograms).

The synthesis implemented here is the exact least-squares inverse of the
analysis pipeline, including the reflect padding used for centered frames.
That makes the composition an orthogonal projection, which several
monotonicity guarantees in :mod:`msgla.reconstruct` rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DEFAULT_SAMPLE_RATE",
    "StftConfig",
    "Waveform",
    "Spectrogram",
    "wrap_phase",
    "angular_distance",
    "stft",
    "istft",
    "decompose",
    "recompose",
    "consistency_project",
    "project_values",
    "canonical_length",
]

DEFAULT_SAMPLE_RATE = 16000

# Minimum summed squared-window power accepted during inversion.
COLA_FLOOR = 1e-12

WINDOW_KINDS = ("hann", "rectangular")


def wrap_phase(angles) -> np.ndarray:
    """Map angles into the principal interval [-pi, pi)."""
    a = np.asarray(angles, dtype=np.float64)
    return np.mod(a + np.pi, 2.0 * np.pi) - np.pi


def angular_distance(a, b) -> np.ndarray:
    """Absolute wrapped difference between two angles, in [0, pi]."""
    return np.abs(wrap_phase(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)))


@dataclass(frozen=True)
class StftConfig:
    """Transform configuration shared by analysis, synthesis and projection.

    The defaults (512-sample Hann window, 256-sample hop) match the setup
    used throughout the reconstruction experiments.
    """

    window_length: int = 512
    hop_length: int = 256
    window_kind: str = "hann"
    fft_length: int | None = None
    center: bool = True

    def __post_init__(self) -> None:
        if self.fft_length is None:
            object.__setattr__(self, "fft_length", int(self.window_length))
        for name in ("window_length", "hop_length", "fft_length"):
            value = getattr(self, name)
            if int(value) != value or int(value) <= 0:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if self.hop_length > self.window_length:
            raise ValueError(
                f"hop_length ({self.hop_length}) must not exceed window_length ({self.window_length})"
            )
        if self.fft_length < self.window_length:
            raise ValueError(
                f"fft_length ({self.fft_length}) must be at least window_length ({self.window_length})"
            )
        if self.window_kind not in WINDOW_KINDS:
            raise ValueError(f"window_kind must be one of {WINDOW_KINDS}, got {self.window_kind!r}")

    @property
    def n_bins(self) -> int:
        return self.fft_length // 2 + 1

    def window(self) -> np.ndarray:
        if self.window_kind == "hann":
            # Periodic Hann: the variant whose shifted squares overlap-add
            # to a strictly positive sum for hop <= window/2.
            n = np.arange(self.window_length)
            return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / self.window_length)
        return np.ones(self.window_length)


@dataclass
class Waveform:
    """Mono time-domain signal with its sample rate."""

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError(f"waveform must be one-dimensional, got shape {self.samples.shape}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform contains non-finite samples")
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate!r}")
        self.sample_rate = int(self.sample_rate)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


@dataclass
class Spectrogram:
    """Complex T-F array together with the transform that produced it.

    ``origin_length`` remembers the length of the time signal the array
    represents so that inversion restores the exact sample count.
    """

    values: np.ndarray
    config: StftConfig
    origin_length: int
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.values.ndim != 2:
            raise ValueError(f"spectrogram must be two-dimensional, got shape {self.values.shape}")
        if self.values.shape[1] != self.config.n_bins:
            raise ValueError(
                f"spectrogram has {self.values.shape[1]} bins but config implies {self.config.n_bins}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("spectrogram contains non-finite values")
        self.origin_length = int(self.origin_length)
        if self.origin_length < 0:
            raise ValueError("origin_length must be non-negative")

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_bins(self) -> int:
        return self.values.shape[1]


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def frame_count(n_samples: int, cfg: StftConfig) -> int:
    """Number of analysis frames produced for a signal of ``n_samples``."""
    if cfg.center:
        return _ceil_div(n_samples, cfg.hop_length) + 1
    return _ceil_div(max(n_samples - cfg.window_length, 0), cfg.hop_length) + 1


def canonical_length(n_frames: int, cfg: StftConfig) -> int:
    """Longest signal length analyzed into exactly ``n_frames`` frames."""
    if n_frames < 1:
        raise ValueError("a spectrogram needs at least one frame")
    if cfg.center:
        return (n_frames - 1) * cfg.hop_length
    return (n_frames - 1) * cfg.hop_length + cfg.window_length


def _analyze(x: np.ndarray, cfg: StftConfig) -> np.ndarray:
    n = x.shape[0]
    w, hop = cfg.window_length, cfg.hop_length
    frames = frame_count(n, cfg)
    target = (frames - 1) * hop + w
    if cfg.center:
        pad = w // 2
        if n < pad + 1:
            raise ValueError(
                f"signal of length {n} is too short for centered analysis with window {w}"
            )
        padded = np.pad(x, (pad, pad), mode="reflect")
    else:
        padded = x
    if padded.shape[0] < target:
        padded = np.pad(padded, (0, target - padded.shape[0]))
    idx = hop * np.arange(frames)[:, None] + np.arange(w)[None, :]
    segments = padded[idx] * cfg.window()
    return np.fft.rfft(segments, n=cfg.fft_length, axis=1)


def _synthesize(values: np.ndarray, cfg: StftConfig, origin_length: int) -> np.ndarray:
    values = np.asarray(values, dtype=np.complex128)
    if values.ndim != 2 or values.shape[1] != cfg.n_bins:
        raise ValueError(
            f"expected a (frames, {cfg.n_bins}) array for this config, got shape {values.shape}"
        )
    frames = values.shape[0]
    w, hop = cfg.window_length, cfg.hop_length
    length = int(origin_length)
    window = cfg.window()

    segments = np.fft.irfft(values, n=cfg.fft_length, axis=1)[:, :w] * window
    total = (frames - 1) * hop + w
    num = np.zeros(total)
    den = np.zeros(total)
    wsq = window * window
    for m in range(frames):
        lo = m * hop
        num[lo : lo + w] += segments[m]
        den[lo : lo + w] += wsq

    pad = w // 2 if cfg.center else 0
    out_num = np.zeros(length)
    out_den = np.zeros(length)
    covered = min(length, max(total - pad, 0))
    out_num[:covered] = num[pad : pad + covered]
    out_den[:covered] = den[pad : pad + covered]

    if cfg.center and length > 1:
        # Fold the windowed energy that landed on reflected padding back onto
        # the source samples; with this, synthesis is the exact least-squares
        # inverse of the centered analysis operator.
        t_left = np.arange(1, min(pad, length - 1) + 1)
        out_num[t_left] += num[pad - t_left]
        out_den[t_left] += den[pad - t_left]
        q = np.arange(pad)
        t_right = length - 2 - q
        p_right = pad + length + q
        keep = (t_right >= 0) & (p_right < total)
        out_num[t_right[keep]] += num[p_right[keep]]
        out_den[t_right[keep]] += den[p_right[keep]]

    core = out_den[:covered]
    if np.any(core < COLA_FLOOR):
        t = int(np.argmax(core < COLA_FLOOR))
        raise ValueError(
            f"overlap-added window power {core[t]:.3g} at sample {t} is below {COLA_FLOOR}; "
            "this window/hop/centering combination is not invertible"
        )
    out = np.zeros(length)
    out[:covered] = out_num[:covered] / core
    return out


def stft(x: Waveform, cfg: StftConfig | None = None) -> Spectrogram:
    """One-sided complex spectrogram of ``x``.

    Frames are centered on multiples of the hop size when ``cfg.center`` is
    true (reflect padding); otherwise the first frame starts at sample 0 and
    the tail is zero-padded to fill the last frame.
    """
    cfg = cfg if cfg is not None else StftConfig()
    if len(x) == 0:
        raise ValueError("cannot analyze an empty signal")
    return Spectrogram(_analyze(x.samples, cfg), cfg, len(x), x.sample_rate)


def istft(s: Spectrogram) -> Waveform:
    """Least-squares overlap-add inversion, trimmed to ``s.origin_length``.

    Raises ``ValueError`` when the summed squared window falls below
    ``COLA_FLOOR`` at any sample the output depends on.
    """
    return Waveform(_synthesize(s.values, s.config, s.origin_length), s.sample_rate)


def decompose(s) -> tuple[np.ndarray, np.ndarray]:
    """Split a spectrogram (or complex array) into magnitude and phase.

    The phase of an exactly zero entry is defined as 0, and all phases are
    wrapped to [-pi, pi).
    """
    values = s.values if isinstance(s, Spectrogram) else np.asarray(s, dtype=np.complex128)
    return np.abs(values), wrap_phase(np.angle(values))


def recompose(mag, phase) -> np.ndarray:
    """Complex array ``mag * exp(j * phase)``."""
    mag = np.asarray(mag, dtype=np.float64)
    phase = np.asarray(phase, dtype=np.float64)
    if mag.shape != phase.shape:
        raise ValueError(f"magnitude shape {mag.shape} does not match phase shape {phase.shape}")
    return mag * np.exp(1j * phase)


def project_values(values, cfg: StftConfig, origin_length: int | None = None) -> np.ndarray:
    """Nearest consistent spectrogram to ``values``: ``stft(istft(values))``.

    ``origin_length`` fixes the length of the intermediate time signal; it
    defaults to the canonical length for the given frame count. Passing the
    true origin length makes consistent inputs exact fixed points.
    """
    values = np.asarray(values, dtype=np.complex128)
    if origin_length is None:
        origin_length = canonical_length(values.shape[0], cfg)
    return _analyze(_synthesize(values, cfg, origin_length), cfg)


def consistency_project(
    mag,
    phase,
    cfg: StftConfig,
    origin_length: int | None = None,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
) -> Spectrogram:
    """Project ``mag * exp(j*phase)`` onto the set of consistent spectrograms."""
    values = recompose(mag, phase)
    if origin_length is None:
        origin_length = canonical_length(values.shape[0], cfg)
    projected = project_values(values, cfg, origin_length)
    return Spectrogram(projected, cfg, origin_length, sample_rate)
