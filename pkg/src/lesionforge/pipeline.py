"""Composable, seeded augmentation pipeline for multi-channel studies.

Ops run strictly in config order.  Each op owns a private random
sub-stream seeded by ``derive_seed(master_seed, sample_index, position)``;
its first draw decides whether the op fires, and any further draws
parameterize it.  Inserting an op therefore perturbs later ops only
through their position shift, and identical ``(study, config,
sample_index)`` triples always produce bit-identical outputs.

Parameter defaults for the baseline ops are conventional magnitudes,
not values prescribed by any dataset: noise sigma as a fraction of the
channel's intensity SD, blur sigma in millimetres, brightness shift as
a fraction of the intensity range.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import ndimage

from .errors import ConfigError, InvalidParameterError
from .gamma import (
    DEFAULT_GAMMA_SPEC,
    gamma_global,
    gamma_local,
    spec_from_dict,
    spec_to_dict,
)
from .rng import derive_seed, make_stream
from .volume import Mask3D, Study, Volume3D, _wrap, extract_patch, minmax

# Channel names carrying the diffusion-weighted role, the default
# targets of local gamma ops.
DWI_CHANNEL_NAMES = ("b0", "b1000", "adc")

OP_KINDS = (
    "local-gamma",
    "global-gamma",
    "gaussian-noise",
    "rician-noise",
    "gaussian-blur",
    "brightness",
    "contrast",
    "mirror",
    "random-patch",
)

_DEFAULT_PROBABILITY = {kind: 0.15 for kind in OP_KINDS}
_DEFAULT_PROBABILITY["local-gamma"] = 1.0

_DEFAULT_PARAMS = {
    "local-gamma": lambda: {
        "sampler": spec_to_dict(DEFAULT_GAMMA_SPEC),
        "channels": None,
        "per_channel": False,
    },
    "global-gamma": lambda: {
        "sampler": spec_to_dict(DEFAULT_GAMMA_SPEC),
        "channels": None,
        "per_channel": False,
    },
    "gaussian-noise": lambda: {"sigma_rel": [0.0, 0.1], "channels": None},
    "rician-noise": lambda: {"sigma_rel": [0.0, 0.1], "channels": None},
    "gaussian-blur": lambda: {"sigma_mm": [0.5, 1.5], "channels": None},
    "brightness": lambda: {"shift_rel": [-0.1, 0.1], "scale": [0.9, 1.1], "channels": None},
    "contrast": lambda: {"factor": [0.75, 1.25], "channels": None},
    "mirror": lambda: {"axes": [0, 1, 2]},
    "random-patch": lambda: {"size": [128, 128, 128]},
}


def _canon(value):
    """Normalize a params value to JSON-native types."""
    if isinstance(value, (list, tuple)):
        return [_canon(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _canon(v) for k, v in value.items()}
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    raise ConfigError(f"config error: unsupported params value {value!r}")


def _check_range(name: str, pair, lo_ok=None) -> list[float]:
    if not isinstance(pair, (list, tuple)) or len(pair) != 2:
        raise ConfigError(f"config error: {name} must be a [lo, hi] pair, got {pair!r}")
    lo, hi = float(pair[0]), float(pair[1])
    if not lo <= hi:
        raise ConfigError(f"config error: {name} range is degenerate, got [{lo}, {hi}]")
    if lo_ok is not None and lo < lo_ok:
        raise ConfigError(f"config error: {name} lower bound must be >= {lo_ok}, got {lo}")
    return [lo, hi]


def _validate_params(kind: str, params: dict) -> dict:
    defaults = _DEFAULT_PARAMS[kind]()
    unknown = set(params) - set(defaults)
    if unknown:
        raise ConfigError(f"config error: unknown param(s) {sorted(unknown)} for op {kind!r}")
    merged = {**defaults, **{k: _canon(v) for k, v in params.items()}}

    if "channels" in merged and merged["channels"] is not None:
        chans = merged["channels"]
        if not isinstance(chans, list) or not all(isinstance(c, str) for c in chans):
            raise ConfigError(f"config error: channels must be a list of names, got {chans!r}")
        if len(set(chans)) != len(chans):
            raise ConfigError(f"config error: duplicate channel in {chans}")
    if kind in ("local-gamma", "global-gamma"):
        spec_from_dict(merged["sampler"])  # raises on a bad spec
        if not isinstance(merged["per_channel"], bool):
            raise ConfigError("config error: per_channel must be a boolean")
    if kind in ("gaussian-noise", "rician-noise"):
        merged["sigma_rel"] = _check_range("sigma_rel", merged["sigma_rel"], lo_ok=0.0)
    if kind == "gaussian-blur":
        merged["sigma_mm"] = _check_range("sigma_mm", merged["sigma_mm"], lo_ok=0.0)
    if kind == "brightness":
        merged["shift_rel"] = _check_range("shift_rel", merged["shift_rel"])
        merged["scale"] = _check_range("scale", merged["scale"])
    if kind == "contrast":
        merged["factor"] = _check_range("factor", merged["factor"])
    if kind == "mirror":
        axes = merged["axes"]
        if (
            not isinstance(axes, list)
            or not axes
            or any(a not in (0, 1, 2) for a in axes)
            or len(set(axes)) != len(axes)
        ):
            raise ConfigError(f"config error: axes must be distinct values from (0, 1, 2), got {axes!r}")
        merged["axes"] = [int(a) for a in axes]
    if kind == "random-patch":
        size = merged["size"]
        if not isinstance(size, list) or len(size) != 3 or any(int(s) <= 0 for s in size):
            raise ConfigError(f"config error: patch size must be 3 positive ints, got {size!r}")
        merged["size"] = [int(s) for s in size]
    return merged


@dataclass(frozen=True, eq=True)
class AugmentOpSpec:
    """One pipeline entry: an op kind, its fire probability, and params."""

    kind: str
    probability: float | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in OP_KINDS:
            raise ConfigError(f"config error: unknown op kind {self.kind!r}; known: {OP_KINDS}")
        prob = self.probability
        if prob is None:
            prob = _DEFAULT_PROBABILITY[self.kind]
        prob = float(prob)
        if not 0.0 <= prob <= 1.0:
            raise ConfigError(f"config error: probability must be in [0, 1], got {prob}")
        object.__setattr__(self, "probability", prob)
        object.__setattr__(self, "params", _validate_params(self.kind, dict(self.params)))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "probability": self.probability, "params": self.params}

    @classmethod
    def from_dict(cls, doc: dict) -> "AugmentOpSpec":
        if not isinstance(doc, dict) or "kind" not in doc:
            raise ConfigError(f"config error: op spec must be an object with a 'kind', got {doc!r}")
        unknown = set(doc) - {"kind", "probability", "params"}
        if unknown:
            raise ConfigError(f"config error: unknown op spec field(s) {sorted(unknown)}")
        return cls(doc["kind"], doc.get("probability"), doc.get("params", {}))


@dataclass(frozen=True, eq=True)
class PipelineConfig:
    """Ordered op list plus the master seed and samples-per-study count."""

    ops: tuple[AugmentOpSpec, ...]
    master_seed: int
    samples_per_study: int = 1

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        if isinstance(self.master_seed, bool) or not isinstance(self.master_seed, int):
            raise ConfigError(f"config error: master_seed must be an integer, got {self.master_seed!r}")
        if int(self.samples_per_study) < 1:
            raise ConfigError(
                f"config error: samples_per_study must be >= 1, got {self.samples_per_study}"
            )
        object.__setattr__(self, "samples_per_study", int(self.samples_per_study))

    def to_dict(self) -> dict:
        return {
            "master_seed": self.master_seed,
            "samples_per_study": self.samples_per_study,
            "ops": [op.to_dict() for op in self.ops],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        if not isinstance(doc, dict):
            raise ConfigError(f"config error: pipeline config must be an object, got {doc!r}")
        unknown = set(doc) - {"master_seed", "samples_per_study", "ops"}
        if unknown:
            raise ConfigError(f"config error: unknown pipeline field(s) {sorted(unknown)}")
        ops = doc.get("ops", [])
        if not isinstance(ops, list):
            raise ConfigError(f"config error: ops must be a list, got {ops!r}")
        return cls(
            ops=tuple(AugmentOpSpec.from_dict(op) for op in ops),
            master_seed=doc.get("master_seed", 0),
            samples_per_study=doc.get("samples_per_study", 1),
        )

    def with_master_seed(self, seed: int) -> "PipelineConfig":
        return replace(self, master_seed=int(seed))


# ---------------------------------------------------------------------------
# Elementary ops


def op_gaussian_noise(vol: Volume3D, sigma: float, stream: np.random.Generator) -> Volume3D:
    """Add i.i.d. zero-mean Gaussian noise with standard deviation ``sigma``."""
    sigma = float(sigma)
    if sigma < 0:
        raise InvalidParameterError(f"invalid parameter: sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return vol
    noise = stream.standard_normal(vol.nvox).reshape(vol.dims, order="F")
    return _wrap(vol.data + sigma * noise, vol.spacing)


def op_rician_noise(vol: Volume3D, sigma: float, stream: np.random.Generator) -> Volume3D:
    """Rician-corrupt the volume: sqrt((I + n1)^2 + n2^2) with n1, n2 ~ N(0, sigma^2)."""
    sigma = float(sigma)
    if sigma < 0:
        raise InvalidParameterError(f"invalid parameter: sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return _wrap(np.abs(vol.data), vol.spacing)
    n1 = stream.standard_normal(vol.nvox).reshape(vol.dims, order="F")
    n2 = stream.standard_normal(vol.nvox).reshape(vol.dims, order="F")
    out = np.sqrt((vol.data + sigma * n1) ** 2 + (sigma * n2) ** 2)
    return _wrap(out, vol.spacing)


def op_gaussian_blur(vol: Volume3D, sigma_mm: float, stream=None) -> Volume3D:
    """Separable Gaussian blur with physical sigma in millimetres.

    Per-axis sigma in voxels is ``sigma_mm / spacing``; the kernel is
    truncated at 3 sigma and edges are handled by clamp-to-edge.  The
    ``stream`` argument is accepted for op-interface uniformity and
    unused: the blur is deterministic given its sigma.
    """
    sigma_mm = float(sigma_mm)
    if sigma_mm < 0:
        raise InvalidParameterError(f"invalid parameter: sigma_mm must be >= 0, got {sigma_mm}")
    if sigma_mm == 0:
        return vol
    sigma_vox = [sigma_mm / s for s in vol.spacing]
    out = ndimage.gaussian_filter(vol.data, sigma=sigma_vox, mode="nearest", truncate=3.0)
    return _wrap(out, vol.spacing)


def op_brightness(vol: Volume3D, shift: float, scale: float) -> Volume3D:
    """Affine intensity change: ``scale * I + shift``."""
    shift, scale = float(shift), float(scale)
    if shift == 0.0 and scale == 1.0:
        return vol
    return _wrap(scale * vol.data + shift, vol.spacing)


def op_contrast(vol: Volume3D, factor: float) -> Volume3D:
    """Scale deviations from the volume-wide mean by ``factor``."""
    factor = float(factor)
    if factor == 1.0:
        return vol
    mean = float(vol.data.mean())
    return _wrap(mean + factor * (vol.data - mean), vol.spacing)


def op_mirror(study: Study, axes: Sequence[int], stream: np.random.Generator | None = None) -> Study:
    """Flip the listed axes on every channel and the mask in lockstep.

    Without a stream the listed axes are all flipped; with one, each
    listed axis is flipped independently with probability 1/2 (one draw
    per listed axis, in listed order).
    """
    axes = [int(a) for a in axes]
    if any(a not in (0, 1, 2) for a in axes):
        raise InvalidParameterError(f"invalid parameter: axes must be within (0, 1, 2), got {axes}")
    if stream is not None:
        axes = [a for a in axes if stream.random() < 0.5]
    if not axes:
        return study
    channels = {
        name: _wrap(np.flip(vol.data, axis=tuple(axes)).copy(order="F"), vol.spacing)
        for name, vol in study.channels.items()
    }
    mask = None
    if study.mask is not None:
        mask = Mask3D(np.flip(study.mask.data, axis=tuple(axes)).copy(order="F"))
    return Study(channels, mask)


def _draw_patch_origin(dims, size, stream: np.random.Generator) -> tuple[int, int, int]:
    if any(s > d for s, d in zip(size, dims)):
        raise ConfigError(f"config error: patch size {tuple(size)} exceeds study dims {tuple(dims)}")
    # One integer draw per axis, x then y then z.
    return tuple(int(stream.integers(0, d - s + 1)) for s, d in zip(size, dims))


def op_random_patch(study: Study, size: Sequence[int], stream: np.random.Generator) -> Study:
    """Crop a patch of ``size`` at a uniformly drawn valid origin."""
    size = tuple(int(s) for s in size)
    origin = _draw_patch_origin(study.dims, size, stream)
    return extract_patch(study, origin, size)


# ---------------------------------------------------------------------------
# Pipeline application


def _resolve_channels(study: Study, op: AugmentOpSpec, dwi_default: bool = False) -> list[str]:
    chans = op.params.get("channels")
    if chans is None:
        if dwi_default:
            names = [n for n in study.channel_names if n.lower() in DWI_CHANNEL_NAMES]
            if not names:
                raise ConfigError(
                    f"config error: op {op.kind!r} defaults to DWI-role channels "
                    f"{DWI_CHANNEL_NAMES} but the study has {list(study.channel_names)}; "
                    "set 'channels' explicitly"
                )
            return names
        return list(study.channel_names)
    missing = [c for c in chans if c not in study.channels]
    if missing:
        raise ConfigError(
            f"config error: op {op.kind!r} references channel(s) {missing} "
            f"absent from study channels {list(study.channel_names)}"
        )
    return list(chans)


def _uniform(stream: np.random.Generator, lo: float, hi: float) -> float:
    return lo + (hi - lo) * float(stream.random())


def _apply_gamma_op(study: Study, op: AugmentOpSpec, stream, rec: dict, local: bool) -> Study:
    if local and study.mask is None:
        raise ConfigError("config error: local-gamma op requires a study with a lesion mask")
    targets = _resolve_channels(study, op, dwi_default=local)
    sampler_spec = spec_from_dict(op.params["sampler"])
    if op.params["per_channel"]:
        gammas = {name: sampler_spec.draw(stream) for name in targets}
    else:
        shared = sampler_spec.draw(stream)
        gammas = {name: shared for name in targets}
    channels = dict(study.channels)
    for name in targets:
        if local:
            channels[name] = gamma_local(channels[name], study.mask, gammas[name])
        else:
            channels[name] = gamma_global(channels[name], gammas[name])
    rec["channels"] = targets
    rec["gamma"] = {name: float(g) for name, g in gammas.items()}
    if local:
        rec["empty_mask_treated_as_global"] = study.mask.foreground_count == 0
    return study.with_channels(channels)


def _apply_noise(study: Study, op: AugmentOpSpec, stream, rec: dict, rician: bool) -> Study:
    targets = _resolve_channels(study, op)
    lo, hi = op.params["sigma_rel"]
    channels = dict(study.channels)
    sigmas = {}
    for name in targets:
        rel = _uniform(stream, lo, hi)
        sigma = rel * float(channels[name].data.std())
        sigmas[name] = sigma
        if rician:
            channels[name] = op_rician_noise(channels[name], sigma, stream)
        else:
            channels[name] = op_gaussian_noise(channels[name], sigma, stream)
    rec["channels"] = targets
    rec["sigma"] = sigmas
    return study.with_channels(channels)


def _apply_blur(study: Study, op: AugmentOpSpec, stream, rec: dict) -> Study:
    targets = _resolve_channels(study, op)
    lo, hi = op.params["sigma_mm"]
    sigma_mm = _uniform(stream, lo, hi)
    channels = dict(study.channels)
    for name in targets:
        channels[name] = op_gaussian_blur(channels[name], sigma_mm)
    rec["channels"] = targets
    rec["sigma_mm"] = sigma_mm
    return study.with_channels(channels)


def _apply_brightness(study: Study, op: AugmentOpSpec, stream, rec: dict) -> Study:
    targets = _resolve_channels(study, op)
    slo, shi = op.params["shift_rel"]
    clo, chi = op.params["scale"]
    channels = dict(study.channels)
    drawn = {}
    for name in targets:
        m1, m2 = minmax(channels[name])
        shift = _uniform(stream, slo, shi) * (m2 - m1)
        scale = _uniform(stream, clo, chi)
        drawn[name] = {"shift": shift, "scale": scale}
        channels[name] = op_brightness(channels[name], shift, scale)
    rec["channels"] = targets
    rec["affine"] = drawn
    return study.with_channels(channels)


def _apply_contrast(study: Study, op: AugmentOpSpec, stream, rec: dict) -> Study:
    targets = _resolve_channels(study, op)
    lo, hi = op.params["factor"]
    channels = dict(study.channels)
    factors = {}
    for name in targets:
        factor = _uniform(stream, lo, hi)
        factors[name] = factor
        channels[name] = op_contrast(channels[name], factor)
    rec["channels"] = targets
    rec["factor"] = factors
    return study.with_channels(channels)


def _apply_mirror(study: Study, op: AugmentOpSpec, stream, rec: dict) -> Study:
    flipped = [a for a in op.params["axes"] if stream.random() < 0.5]
    rec["axes_flipped"] = flipped
    return op_mirror(study, flipped) if flipped else study


def _apply_random_patch(study: Study, op: AugmentOpSpec, stream, rec: dict) -> Study:
    size = tuple(op.params["size"])
    origin = _draw_patch_origin(study.dims, size, stream)
    rec["size"] = list(size)
    rec["origin"] = list(origin)
    rec["dims_before"] = list(study.dims)
    return extract_patch(study, origin, size)


_APPLIERS = {
    "local-gamma": lambda s, o, r, rec: _apply_gamma_op(s, o, r, rec, local=True),
    "global-gamma": lambda s, o, r, rec: _apply_gamma_op(s, o, r, rec, local=False),
    "gaussian-noise": lambda s, o, r, rec: _apply_noise(s, o, r, rec, rician=False),
    "rician-noise": lambda s, o, r, rec: _apply_noise(s, o, r, rec, rician=True),
    "gaussian-blur": _apply_blur,
    "brightness": _apply_brightness,
    "contrast": _apply_contrast,
    "mirror": _apply_mirror,
    "random-patch": _apply_random_patch,
}


def _validate_ops_against_study(study: Study, config: PipelineConfig) -> None:
    """Reject configs that cannot apply to this study, fired or not.

    Channel sets and mask presence never change mid-pipeline, so these
    checks are sound before any fire decision.  Patch-size bounds are
    checked at fire time instead: dims shrink when a patch op fires.
    """
    for op in config.ops:
        if op.kind == "local-gamma" and study.mask is None:
            raise ConfigError("config error: local-gamma op requires a study with a lesion mask")
        if "channels" in op.params:
            _resolve_channels(study, op, dwi_default=op.kind == "local-gamma")


def apply_pipeline_recorded(
    study: Study, config: PipelineConfig, sample_index: int
) -> tuple[Study, list[dict]]:
    """Apply the pipeline and return the output study plus one record per op.

    Records carry the drawn parameters (gamma values, sigmas, flip axes,
    patch origins) for provenance sidecars.
    """
    sample_index = int(sample_index)
    if sample_index < 0:
        raise InvalidParameterError(f"invalid parameter: sample_index must be >= 0, got {sample_index}")
    _validate_ops_against_study(study, config)
    current = study
    records: list[dict] = []
    for position, op in enumerate(config.ops):
        stream = make_stream(derive_seed(config.master_seed, sample_index, position))
        fired = float(stream.random()) < op.probability
        rec = {"position": position, "kind": op.kind, "probability": op.probability, "fired": fired}
        if fired:
            current = _APPLIERS[op.kind](current, op, stream, rec)
        records.append(rec)
    return current, records


def apply_pipeline(study: Study, config: PipelineConfig, sample_index: int) -> Study:
    """Apply every op in config order; see :func:`apply_pipeline_recorded`."""
    return apply_pipeline_recorded(study, config, sample_index)[0]
