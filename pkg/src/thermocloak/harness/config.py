"""Run configuration: a flat ``key = value`` text file."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

from thermocloak.heat import BoxEnvelope, ExpEnvelope, GaussianBump, SourceSpec
from thermocloak.medium import ObjectSpec

KNOWN_KEYS = {
    "dimension",
    "epsilons",
    "omegas",
    "nx",
    "t_final",
    "dt",
    "object.tensor",
    "object.density",
    "source.center",
    "source.width",
    "r_obs",
    "out_dir",
    # optional extras
    "source.envelope",
    "scheme",
    "workers",
    "write_fields",
    "spectral",
    "strict_resolution",
}


class ConfigError(ValueError):
    pass


def _floats(text):
    return [float(x) for x in text.replace(",", " ").split()]


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def parse_envelope(text):
    """``box:T``, ``exp:rate`` or ``steady``."""
    text = text.strip().lower()
    if text == "steady":
        return BoxEnvelope()
    kind, _, arg = text.partition(":")
    if kind == "box":
        return BoxEnvelope(float(arg))
    if kind == "exp":
        return ExpEnvelope(float(arg) if arg else 1.0)
    raise ConfigError(f"unknown envelope {text!r}")


@dataclass
class SweepConfig:
    dimension: int = 3
    epsilons: list = field(default_factory=lambda: [0.02, 0.04, 0.08, 0.16])
    omegas: list = field(default_factory=lambda: [1.0])
    nx: int = 400
    t_final: float | None = None
    dt: float | None = None
    objects: list = field(default_factory=lambda: [ObjectSpec()])
    source_center: tuple = (3.0, 0.0, 0.0)
    source_width: float = 0.3
    envelope: object = field(default_factory=BoxEnvelope)
    r_obs: float = 2.0
    out_dir: str = "out"
    scheme: str = "implicit-euler"
    workers: int = 1
    write_fields: bool = True
    spectral: bool = False
    strict_resolution: bool = True

    def __post_init__(self):
        self.validate()

    @property
    def radial(self):
        """3D runs use the radial reduction, 2D runs the Cartesian grid."""
        return self.dimension == 3

    @property
    def h(self):
        """Mesh width: cell size on ``(-4, 4)^2`` in 2D, the coarse radial spacing in 3D."""
        return 8.0 / self.nx if not self.radial else 4.0 / self.nx

    @property
    def source(self):
        return SourceSpec(GaussianBump(tuple(self.source_center), self.source_width), self.envelope, 2.0)

    @property
    def has_time(self):
        return self.t_final is not None and self.dt is not None

    def validate(self):
        if self.dimension not in (2, 3):
            raise ConfigError("dimension must be 2 or 3")
        if not self.epsilons:
            raise ConfigError("at least one epsilon required")
        for e in self.epsilons:
            if not 0 < e < 0.5:
                raise ConfigError(f"epsilon {e} outside (0, 1/2)")
        for w in self.omegas:
            if not w > 0:
                raise ConfigError(f"omega {w} must be positive")
        if self.r_obs < 2:
            raise ConfigError("r_obs must be at least 2")
        if self.nx < 8:
            raise ConfigError("nx too small")
        if not self.radial and self.nx % 2:
            raise ConfigError("2D grids need an even nx so that the origin is a node")
        if self.strict_resolution and not self.radial and min(self.epsilons) < 8 * self.h - 1e-12:
            raise ConfigError(
                f"smallest epsilon {min(self.epsilons):g} is below 8h = {8 * self.h:g};"
                " refine nx or set strict_resolution = false"
            )
        if (self.t_final is None) != (self.dt is None):
            raise ConfigError("t_final and dt go together")
        if not self.objects:
            raise ConfigError("at least one object spec required")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not self.source_width > 0:
            raise ConfigError("source width must be positive")

    def with_objects(self, objects):
        return replace(self, objects=list(objects))


def load_config(path) -> SweepConfig:
    """Read ``key = value`` lines (``#`` comments allowed) into a :class:`SweepConfig`."""
    text = Path(path).read_text()
    return parse_config(text)


def parse_config(text) -> SweepConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    raw = dict(parser["run"])
    unknown = set(raw) - KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(sorted(unknown))}")
    kw = {}
    try:
        if "dimension" in raw:
            kw["dimension"] = int(raw["dimension"])
        if "epsilons" in raw:
            kw["epsilons"] = _floats(raw["epsilons"])
        if "omegas" in raw:
            kw["omegas"] = _floats(raw["omegas"])
        if "nx" in raw:
            kw["nx"] = int(raw["nx"])
        if "t_final" in raw:
            kw["t_final"] = float(raw["t_final"])
        if "dt" in raw:
            kw["dt"] = float(raw["dt"])
        if "r_obs" in raw:
            kw["r_obs"] = float(raw["r_obs"])
        if "out_dir" in raw:
            kw["out_dir"] = raw["out_dir"].strip()
        if "source.center" in raw:
            kw["source_center"] = tuple(_floats(raw["source.center"]))
        if "source.width" in raw:
            kw["source_width"] = float(raw["source.width"])
        if "source.envelope" in raw:
            kw["envelope"] = parse_envelope(raw["source.envelope"])
        if "scheme" in raw:
            kw["scheme"] = raw["scheme"].strip()
        if "workers" in raw:
            kw["workers"] = int(raw["workers"])
        for key in ("write_fields", "spectral", "strict_resolution"):
            if key in raw:
                kw[key] = _bool(raw[key])
        tensors = _floats(raw.get("object.tensor", "2"))
        densities = _floats(raw.get("object.density", "3"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if len(tensors) != len(densities):
        if len(tensors) == 1:
            tensors = tensors * len(densities)
        elif len(densities) == 1:
            densities = densities * len(tensors)
        else:
            raise ConfigError("object.tensor and object.density list lengths differ")
    kw["objects"] = [ObjectSpec.isotropic(a, r) for a, r in zip(tensors, densities)]
    dim = kw.get("dimension", 3)
    if "source_center" in kw:
        c = kw["source_center"]
        kw["source_center"] = tuple(c) + (0.0,) * (3 - len(c))
    if "nx" not in kw and dim == 2:
        kw["nx"] = 192
    return SweepConfig(**kw)
