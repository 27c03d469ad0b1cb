"""Synthetic labeled EEG with known spectral structure.

Each trial is 1/f background noise plus class-signature sinusoids in theta
and beta, plus band-limited delta/alpha/gamma components. Misarticulated
trials scale the delta/alpha components up at frontal-central channels and
the gamma component down at temporal channels, so the generator is its own
ground truth for the statistics and decoding stages.

Determinism contract: every trial draws from its own generator seeded with
seed XOR splitmix64(trial_id), and the domain label only multiplies
amplitudes after all random draws, so trials can be generated in any order
and label flips keep shared components identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping

import numpy as np

from .data import AcquisitionSpec, Dataset, DomainLabel, TrialRecord
from .montage import Montage, Region, default_montage
from .spectral import BandTable

_MASK64 = (1 << 64) - 1

# 500/512 Hz bin centers: a periodic-Hann Welch segment confines a
# bin-centered sinusoid to +-1 bin, so components do not leak across bands
_BIN = 500.0 / 512.0
DEFAULT_CLASS_FREQS = (
    (5 * _BIN, 16 * _BIN),   # 4.88 Hz theta + 15.63 Hz beta
    (6 * _BIN, 20 * _BIN),
    (7 * _BIN, 24 * _BIN),
    (8 * _BIN, 28 * _BIN),
)
DEFAULT_DELTA_FREQS = (2 * _BIN, 2.5 * _BIN, 3 * _BIN)    # 1.95-2.93 Hz
DEFAULT_ALPHA_FREQS = (10 * _BIN, 11 * _BIN, 12 * _BIN)   # 9.77-11.72 Hz
DEFAULT_GAMMA_FREQS = (33 * _BIN, 37 * _BIN, 41 * _BIN)   # 32.2-40.0 Hz

# direction of each generator effect: band -> (region, sign of t)
EFFECT_DIRECTIONS = {
    "delta": (Region.FRONTAL_CENTRAL, 1),
    "alpha": (Region.FRONTAL_CENTRAL, 1),
    "gamma": (Region.TEMPORAL, -1),
}


@dataclass(frozen=True)
class SynthConfig:
    """Generator parameters; amplitudes are microvolts per sinusoid."""

    n_trials_per_class: int = 50
    misarticulation_rate: float = 0.3
    pink_noise_scale: float = 1.0
    class_signature_freqs_hz: tuple[tuple[float, ...], ...] = DEFAULT_CLASS_FREQS
    class_signature_amp: float = 0.10
    delta_gain_mis: float = 1.8
    alpha_gain_mis: float = 1.6
    gamma_gain_mis: float = 0.55
    delta_freqs_hz: tuple[float, ...] = DEFAULT_DELTA_FREQS
    alpha_freqs_hz: tuple[float, ...] = DEFAULT_ALPHA_FREQS
    gamma_freqs_hz: tuple[float, ...] = DEFAULT_GAMMA_FREQS
    delta_amp: float = 1.0
    alpha_amp: float = 1.0
    gamma_amp: float = 1.0
    amp_jitter: float = 0.4
    seed: int = 0

    def __post_init__(self):
        if self.n_trials_per_class < 1:
            raise ValueError("n_trials_per_class must be positive")
        if not 0.0 < self.misarticulation_rate < 1.0:
            raise ValueError("misarticulation_rate must be in (0, 1)")
        if self.pink_noise_scale <= 0:
            raise ValueError("pink_noise_scale must be positive")
        if len(self.class_signature_freqs_hz) != 4:
            raise ValueError("need one signature frequency list per class (4)")
        if self.delta_gain_mis < 1 or self.alpha_gain_mis < 1:
            raise ValueError("delta/alpha misarticulation gains must be >= 1")
        if not 0.0 < self.gamma_gain_mis <= 1.0:
            raise ValueError("gamma_gain_mis must be in (0, 1]")
        if not 0.0 <= self.amp_jitter < 1.0:
            raise ValueError("amp_jitter must be in [0, 1)")
        object.__setattr__(
            self,
            "class_signature_freqs_hz",
            tuple(tuple(float(f) for f in row) for row in self.class_signature_freqs_hz),
        )

    def validate_against(self, spec: AcquisitionSpec, bands: BandTable) -> None:
        """Class signatures must sit inside the pass band but outside the
        suppressed delta/alpha/gamma ranges, so class evidence survives the
        class-branch mask."""
        suppressed = [bands.get(name) for name in ("delta", "alpha", "gamma")]
        for class_label, freqs in enumerate(self.class_signature_freqs_hz):
            for f in freqs:
                if not spec.band_low_hz <= f <= spec.band_high_hz:
                    raise ValueError(
                        f"class {class_label} signature {f:g} Hz outside the "
                        f"[{spec.band_low_hz:g}, {spec.band_high_hz:g}] Hz pass band"
                    )
                for band in suppressed:
                    if band.contains(f):
                        raise ValueError(
                            f"class {class_label} signature {f:g} Hz falls in the "
                            f"suppressed {band.name} band"
                        )

    def to_dict(self) -> dict:
        return {
            "n_trials_per_class": self.n_trials_per_class,
            "misarticulation_rate": self.misarticulation_rate,
            "pink_noise_scale": self.pink_noise_scale,
            "class_signature_freqs_hz": [list(r) for r in self.class_signature_freqs_hz],
            "class_signature_amp": self.class_signature_amp,
            "delta_gain_mis": self.delta_gain_mis,
            "alpha_gain_mis": self.alpha_gain_mis,
            "gamma_gain_mis": self.gamma_gain_mis,
            "delta_freqs_hz": list(self.delta_freqs_hz),
            "alpha_freqs_hz": list(self.alpha_freqs_hz),
            "gamma_freqs_hz": list(self.gamma_freqs_hz),
            "delta_amp": self.delta_amp,
            "alpha_amp": self.alpha_amp,
            "gamma_amp": self.gamma_amp,
            "amp_jitter": self.amp_jitter,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "SynthConfig":
        kwargs = dict(d)
        if "class_signature_freqs_hz" in kwargs:
            kwargs["class_signature_freqs_hz"] = tuple(
                tuple(row) for row in kwargs["class_signature_freqs_hz"]
            )
        for key in ("delta_freqs_hz", "alpha_freqs_hz", "gamma_freqs_hz"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


def splitmix64(value: int) -> int:
    """Finalizer of the splitmix64 generator; a 64-bit integer hash."""
    z = (value + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def trial_seed(seed: int, trial_id: int) -> int:
    """Per-trial sub-seed: seed XOR hash(trial_id)."""
    return (seed ^ splitmix64(trial_id)) & _MASK64


@lru_cache(maxsize=8)
def _pink_weights(half: int) -> np.ndarray:
    k = np.arange(1, half + 1)
    weights = 1.0 / np.sqrt(k)  # amplitude ~ f^{-1/2} so power ~ 1/f
    # unit expected power: interior bins count twice (conjugate images)
    weights /= np.sqrt(2.0 * np.sum(weights[:-1] ** 2) + weights[-1] ** 2)
    weights.flags.writeable = False
    return weights


def _pink_noise_batch(n_rows: int, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """Rows of zero-mean 1/f noise with unit expected rms."""
    if n_samples < 2:
        raise ValueError(f"need at least 2 samples, got {n_samples}")
    nfft = n_samples + (n_samples % 2)
    half = nfft // 2
    weights = _pink_weights(half)

    gauss = rng.standard_normal((n_rows, 2 * half - 1))
    spectrum = np.zeros((n_rows, half + 1), dtype=np.complex128)
    parts = spectrum.view(np.float64).reshape(n_rows, -1)  # interleaved re/im
    interior = weights[: half - 1] / np.sqrt(2.0)
    parts[:, 2 : 2 * half : 2] = gauss[:, : half - 1] * interior
    parts[:, 3 : 2 * half + 1 : 2] = gauss[:, half - 1 : 2 * half - 2] * interior
    parts[:, 2 * half] = gauss[:, 2 * half - 2] * weights[half - 1]  # real Nyquist
    x = np.fft.irfft(spectrum, n=nfft, axis=-1) * nfft
    return x[:, :n_samples] - x[:, :n_samples].mean(axis=-1, keepdims=True)


def pink_noise(n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """One zero-mean 1/f-noise realization with unit expected rms."""
    return _pink_noise_batch(1, n_samples, rng)[0]


def _region_gain(
    montage: Montage, channel_names, region: Region, gain: float
) -> np.ndarray:
    g = np.ones(len(channel_names))
    for i, name in enumerate(channel_names):
        if montage.entry(name).region == region:
            g[i] = gain
    return g


@lru_cache(maxsize=64)
def _sin_cos_basis(freqs: tuple[float, ...], n_samples: int, sample_rate_hz: float):
    t = np.arange(n_samples) / sample_rate_hz
    phase = 2.0 * np.pi * np.asarray(freqs)[:, None] * t[None, :]
    basis = np.sin(phase), np.cos(phase)
    for b in basis:
        b.flags.writeable = False
    return basis


def generate_trial(
    class_label: int,
    domain_label: DomainLabel,
    config: SynthConfig,
    montage: Montage,
    rng: np.random.Generator,
    spec: AcquisitionSpec | None = None,
    trial_id: int = 0,
) -> TrialRecord:
    """One synthetic trial; all randomness comes from `rng`.

    The draw sequence does not depend on domain_label: gains only scale
    already-drawn components, so regenerating with the other label keeps the
    shared noise and phases bit-identical.
    """
    spec = spec or AcquisitionSpec()
    names = montage.channel_names[: spec.n_channels]
    n_ch = spec.n_channels
    n = spec.n_samples

    samples = _pink_noise_batch(n_ch, n, rng) * config.pink_noise_scale

    mis = domain_label is DomainLabel.MISARTICULATED
    # (freqs, base amplitude, per-channel gain vector) for every component group
    groups = [
        (config.class_signature_freqs_hz[class_label], config.class_signature_amp,
         np.ones(n_ch)),
        (config.delta_freqs_hz, config.delta_amp,
         _region_gain(montage, names, Region.FRONTAL_CENTRAL,
                      config.delta_gain_mis if mis else 1.0)),
        (config.alpha_freqs_hz, config.alpha_amp,
         _region_gain(montage, names, Region.FRONTAL_CENTRAL,
                      config.alpha_gain_mis if mis else 1.0)),
        (config.gamma_freqs_hz, config.gamma_amp,
         _region_gain(montage, names, Region.TEMPORAL,
                      config.gamma_gain_mis if mis else 1.0)),
    ]
    freqs: list[float] = []
    amps = []
    phases = []
    for group_freqs, base_amp, gain in groups:
        for f in group_freqs:
            # one amplitude factor per component per trial, shared across
            # channels; phases independent per channel
            factor = rng.uniform(1.0 - config.amp_jitter, 1.0 + config.amp_jitter)
            phases.append(rng.uniform(0.0, 2.0 * np.pi, size=n_ch))
            freqs.append(float(f))
            amps.append(base_amp * factor * gain)
    amp = np.stack(amps, axis=1)      # (channels, components)
    phase = np.stack(phases, axis=1)
    sin_t, cos_t = _sin_cos_basis(tuple(freqs), n, spec.sample_rate_hz)
    # sin(2 pi f t + phi) = cos(phi) sin(2 pi f t) + sin(phi) cos(2 pi f t)
    samples += (amp * np.cos(phase)) @ sin_t + (amp * np.sin(phase)) @ cos_t

    return TrialRecord(trial_id, class_label, domain_label, samples)


def generate_dataset(
    config: SynthConfig,
    montage: Montage | None = None,
    spec: AcquisitionSpec | None = None,
    bands: BandTable | None = None,
) -> Dataset:
    """4 * n_trials_per_class trials, classes round-robin, domains Bernoulli.

    A pure function of the config: per-trial generators are derived from
    config.seed, so trial order and prior draws cannot leak between trials.
    """
    montage = montage or default_montage()
    spec = spec or AcquisitionSpec()
    config.validate_against(spec, bands or BandTable())
    if len(montage) < spec.n_channels:
        raise ValueError(
            f"montage has {len(montage)} channels, spec wants {spec.n_channels}"
        )
    names = montage.channel_names[: spec.n_channels]
    trials = []
    for tid in range(4 * config.n_trials_per_class):
        rng = np.random.default_rng(trial_seed(config.seed, tid))
        domain = (
            DomainLabel.MISARTICULATED
            if rng.random() < config.misarticulation_rate
            else DomainLabel.CORRECT
        )
        trials.append(
            generate_trial(tid % 4, domain, config, montage, rng, spec, trial_id=tid)
        )
    return Dataset(spec, names, tuple(trials))
