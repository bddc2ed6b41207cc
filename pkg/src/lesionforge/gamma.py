"""Gamma intensity transforms and gamma-parameter sampling.

The global transform remaps intensities through ``x -> x**gamma`` after
min-max normalization and undoes the normalization afterwards, so the
volume's extrema are preserved.  The local variant normalizes against
the extrema of the mask foreground, remaps foreground voxels only, and
leaves background voxels bit-identical; an all-zero mask falls back to
the global transform so pathology-free volumes still get augmented.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Union

import numpy as np

from .errors import EmptyForegroundError, InvalidParameterError
from .rng import make_stream
from .volume import Mask3D, Volume3D, _check_same_dims, _wrap, minmax, minmax_masked

GAMMA_COMPRESSION = "compression"
GAMMA_IDENTITY = "identity"
GAMMA_EXPANSION = "expansion"

EmptyMaskPolicy = Literal["treat-as-global", "error"]

# A range this small carries no contrast worth remapping; the transform
# degrades to the identity instead of dividing by ~0.
_RANGE_EPS_FACTOR = 1e-12


def _check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not np.isfinite(gamma) or gamma <= 0.0:
        raise InvalidParameterError(f"invalid parameter: gamma must be > 0, got {gamma}")
    return gamma


def _range_degenerate(m1: float, m2: float) -> bool:
    return (m2 - m1) <= _RANGE_EPS_FACTOR * max(1.0, abs(m2))


def _remap(values: np.ndarray, m1: float, m2: float, gamma: float) -> np.ndarray:
    span = m2 - m1
    out = span * ((values - m1) / span) ** gamma + m1
    # Rounding can overshoot the endpoints by an ulp; the output range
    # contract is [m1, m2].
    np.clip(out, m1, m2, out=out)
    return out


def classify_gamma(gamma: float) -> str:
    """Name the transform regime: compression (<1), identity (=1), expansion (>1)."""
    gamma = _check_gamma(gamma)
    if gamma < 1.0:
        return GAMMA_COMPRESSION
    if gamma == 1.0:
        return GAMMA_IDENTITY
    return GAMMA_EXPANSION


def gamma_global(vol: Volume3D, gamma: float) -> Volume3D:
    """Gamma transform normalized against the whole volume's min/max."""
    gamma = _check_gamma(gamma)
    if gamma == 1.0:
        return vol
    m1, m2 = minmax(vol)
    if _range_degenerate(m1, m2):
        return vol
    return _wrap(_remap(vol.data, m1, m2, gamma), vol.spacing)


def gamma_foreground_normalized(vol: Volume3D, mask: Mask3D, gamma: float) -> Volume3D:
    """Gamma transform normalized against, and evaluated on, the mask foreground.

    Background intensities can fall outside the foreground range, where
    a fractional power is undefined over the reals, so evaluation is
    restricted to foreground voxels; background voxels pass through
    bit-identical.
    """
    gamma = _check_gamma(gamma)
    _check_same_dims(vol.dims, mask.dims)
    m1, m2 = minmax_masked(vol, mask)  # raises EmptyForegroundError on all-zero masks
    if gamma == 1.0:
        return vol
    if _range_degenerate(m1, m2):
        return vol
    fg = mask.foreground()
    out = vol.data.copy(order="F")
    out[fg] = _remap(vol.data[fg], m1, m2, gamma)
    return _wrap(out, vol.spacing)


def gamma_local(
    vol: Volume3D,
    mask: Mask3D,
    gamma: float,
    empty_mask: EmptyMaskPolicy = "treat-as-global",
) -> Volume3D:
    """Mask-mixed gamma transform: foreground remapped, background untouched.

    With ``empty_mask="treat-as-global"`` (the default) an all-zero mask
    is replaced by an all-ones one, i.e. the result equals
    ``gamma_global(vol, gamma)``; with ``"error"`` it raises
    :class:`EmptyForegroundError` instead.
    """
    gamma = _check_gamma(gamma)
    if empty_mask not in ("treat-as-global", "error"):
        raise InvalidParameterError(f"invalid parameter: unknown empty_mask policy {empty_mask!r}")
    _check_same_dims(vol.dims, mask.dims)
    if mask.foreground_count == 0:
        if empty_mask == "error":
            raise EmptyForegroundError("empty foreground: mask has no voxel equal to 1")
        return gamma_global(vol, gamma)
    # Mixing through the mask keeps background voxels of the input
    # bit-identical, which is exactly what the foreground-restricted
    # evaluation already produces.
    return gamma_foreground_normalized(vol, mask, gamma)


@dataclass(frozen=True)
class MixtureUniformSpec:
    """Two uniform intervals, the first chosen with probability ``p``.

    The default splits [0.7, 1.5] at 1.0 into an equally weighted
    compression interval and expansion interval.
    """

    lo1: float = 0.7
    hi1: float = 1.0
    lo2: float = 1.0
    hi2: float = 1.5
    p: float = 0.5

    variant = "mixture-uniform"

    def validate(self):
        for lo_name, hi_name in (("lo1", "hi1"), ("lo2", "hi2")):
            lo, hi = getattr(self, lo_name), getattr(self, hi_name)
            if not lo < hi:
                raise InvalidParameterError(
                    f"invalid parameter: {lo_name} must be < {hi_name}, got {lo} >= {hi}"
                )
            if lo <= 0:
                raise InvalidParameterError(
                    f"invalid parameter: {lo_name} must be > 0, got {lo}"
                )
        if not 0.0 <= self.p <= 1.0:
            raise InvalidParameterError(f"invalid parameter: p must be in [0, 1], got {self.p}")

    def draw(self, stream: np.random.Generator) -> float:
        # Exactly two stream draws per sample: interval choice, then the
        # position inside the chosen interval.
        u_choice = stream.random()
        u_value = stream.random()
        lo, hi = (self.lo1, self.hi1) if u_choice < self.p else (self.lo2, self.hi2)
        return lo + u_value * (hi - lo)

    def support(self) -> tuple[float, float]:
        return min(self.lo1, self.lo2), max(self.hi1, self.hi2)


@dataclass(frozen=True)
class LogNormalSpec:
    """``gamma = exp(mu + sigma * z)`` with standard normal ``z``."""

    mu: float = 0.0
    sigma: float = 0.25

    variant = "log-normal"

    def validate(self):
        if not np.isfinite(self.mu):
            raise InvalidParameterError(f"invalid parameter: mu must be finite, got {self.mu}")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise InvalidParameterError(f"invalid parameter: sigma must be > 0, got {self.sigma}")

    def draw(self, stream: np.random.Generator) -> float:
        return float(np.exp(self.mu + self.sigma * stream.standard_normal()))

    def support(self) -> tuple[float, float]:
        return 0.0, np.inf


@dataclass(frozen=True)
class BetaIntervalSpec:
    """Beta(alpha, beta) draw rescaled onto the interval [lo, hi]."""

    alpha: float = 2.0
    beta: float = 2.0
    lo: float = 0.7
    hi: float = 1.5

    variant = "beta-on-interval"

    def validate(self):
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise InvalidParameterError(f"invalid parameter: alpha must be > 0, got {self.alpha}")
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise InvalidParameterError(f"invalid parameter: beta must be > 0, got {self.beta}")
        if not self.lo < self.hi:
            raise InvalidParameterError(
                f"invalid parameter: lo must be < hi, got {self.lo} >= {self.hi}"
            )
        if self.lo <= 0:
            raise InvalidParameterError(f"invalid parameter: lo must be > 0, got {self.lo}")

    def draw(self, stream: np.random.Generator) -> float:
        return self.lo + (self.hi - self.lo) * float(stream.beta(self.alpha, self.beta))

    def support(self) -> tuple[float, float]:
        return self.lo, self.hi


GammaSamplerSpec = Union[MixtureUniformSpec, LogNormalSpec, BetaIntervalSpec]

DEFAULT_GAMMA_SPEC = MixtureUniformSpec()

_SPEC_VARIANTS = {
    MixtureUniformSpec.variant: MixtureUniformSpec,
    LogNormalSpec.variant: LogNormalSpec,
    BetaIntervalSpec.variant: BetaIntervalSpec,
}


def spec_to_dict(spec: GammaSamplerSpec) -> dict:
    """JSON-ready representation of a sampler spec."""
    out = {"variant": spec.variant}
    for name in spec.__dataclass_fields__:
        out[name] = getattr(spec, name)
    return out


def spec_from_dict(doc: dict) -> GammaSamplerSpec:
    """Parse a sampler spec from its JSON representation."""
    if not isinstance(doc, dict):
        raise InvalidParameterError(f"invalid parameter: sampler spec must be an object, got {doc!r}")
    doc = dict(doc)
    variant = doc.pop("variant", MixtureUniformSpec.variant)
    cls = _SPEC_VARIANTS.get(variant)
    if cls is None:
        raise InvalidParameterError(
            f"invalid parameter: variant must be one of {sorted(_SPEC_VARIANTS)}, got {variant!r}"
        )
    unknown = set(doc) - set(cls.__dataclass_fields__)
    if unknown:
        raise InvalidParameterError(
            f"invalid parameter: unknown sampler spec field(s) {sorted(unknown)} for {variant}"
        )
    try:
        spec = cls(**{k: float(v) for k, v in doc.items()})
    except (TypeError, ValueError) as exc:
        raise InvalidParameterError(f"invalid parameter: bad sampler spec value ({exc})") from exc
    spec.validate()
    return spec


class GammaSampler:
    """Deterministic gamma-parameter source.

    Identical ``(spec, seed)`` pairs produce identical sample sequences.
    The instance owns a mutable stream and is not thread-safe; derive
    one sampler per task instead of sharing.
    """

    def __init__(self, spec: GammaSamplerSpec, seed: int):
        if not isinstance(spec, (MixtureUniformSpec, LogNormalSpec, BetaIntervalSpec)):
            raise InvalidParameterError(
                f"invalid parameter: spec must be a GammaSamplerSpec, got {type(spec).__name__}"
            )
        spec.validate()
        self.spec = spec
        self.seed = int(seed)
        self._stream = make_stream(self.seed)

    def sample(self) -> float:
        """Draw one gamma and advance the stream."""
        return self.spec.draw(self._stream)

    def sample_many(self, n: int) -> np.ndarray:
        if n < 0:
            raise InvalidParameterError(f"invalid parameter: n must be >= 0, got {n}")
        return np.array([self.sample() for _ in range(n)], dtype=np.float64)


def make_sampler(spec: GammaSamplerSpec, seed: int) -> GammaSampler:
    """Create a deterministic sampler for ``spec`` seeded with ``seed``."""
    return GammaSampler(spec, seed)


def sample_gamma(sampler: GammaSampler) -> float:
    """Draw one gamma from the sampler, advancing its stream."""
    return sampler.sample()
