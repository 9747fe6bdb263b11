"""INI-style run configuration: sections in brackets, key = value lines,
comma-separated lists.  Missing keys take documented defaults; the fully
resolved config can be re-serialized byte-stably for provenance.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .model import (
    ElasticParams,
    Geometry,
    RandomSurfaceModel,
    SourceJitter,
    SourceSpec,
    SurfaceFn,
    cosine_surface,
    flat_surface,
    make_params,
    sawtooth_surface,
)

__all__ = ["RunConfig", "load_config", "resolved_text", "default_config"]

_COMMANDS = ("solve", "mms", "sweep-omega", "ensemble", "verify-all")


@dataclass(frozen=True)
class RunConfig:
    # physics
    lam: float = 1.0
    mu: float = 1.0
    omega: float = 2.0
    omega_list: tuple[float, ...] = ()
    # geometry
    period: float = 1.0
    h: float = 1.4
    m: float = 0.2
    M: float = 0.4
    f0_kind: str = "flat"
    f0_level: float = 0.3
    f0_amplitudes: tuple[float, ...] = ()
    f0_modes: tuple[int, ...] = ()
    f0_phases: tuple[float, ...] = ()
    # surface model
    mode_count: int = 1
    amplitudes: tuple[float, ...] = (0.03,)
    phases: tuple[float, ...] = (0.0,)
    phase_seed: int = -1
    M0: float = 0.25
    seed: int = 12345
    # source
    center: tuple[float, float] = (0.5, 0.8)
    radius: float = 0.15
    amplitude_re: tuple[float, float] = (1.0, 0.0)
    amplitude_im: tuple[float, float] = (0.0, 0.0)
    jitter_center: float = 0.0
    jitter_amplitude: float = 0.0
    jitter_seed: int = 0
    # discretization
    nx: int = 32
    ny: int = 48
    n_max: int = 0  # 0 = auto: smallest n with |xi_n| >= 4 k_s
    quadrature_degree: int = 5
    # run
    command: str = "solve"
    N: int = 32
    parallelism: int = 1
    output_dir: str = "out"
    epsilon_margin: float = 0.05
    delta: float = 0.0  # 0 = auto: gap/8
    levels: int = 3
    calibrated_c: float = 0.0  # 0 = auto-anchor
    anchor_safety: float = 2.0

    # ----- derived builders -------------------------------------------------

    def make_params(self, omega: float | None = None) -> ElasticParams:
        return make_params(self.lam, self.mu,
                           self.omega if omega is None else omega)

    def make_surface(self) -> SurfaceFn:
        if self.f0_kind == "flat":
            return flat_surface(self.f0_level, self.m, self.M, self.period)
        if self.f0_kind == "cosine":
            return cosine_surface(self.f0_level, self.f0_amplitudes,
                                  self.f0_modes, self.f0_phases,
                                  self.m, self.M, self.period)
        if self.f0_kind == "sawtooth":
            amp = self.f0_amplitudes[0] if self.f0_amplitudes else 0.05
            return sawtooth_surface(self.f0_level, amp, self.m, self.M,
                                    self.period)
        raise ConfigError(f"geometry.f0_kind: unknown kind {self.f0_kind!r}")

    def make_geometry(self) -> Geometry:
        return Geometry(surface=self.make_surface(), h=self.h)

    def resolved_phases(self) -> tuple[float, ...]:
        if self.phase_seed >= 0:
            gen = np.random.Generator(np.random.Philox(key=np.array(
                [self.phase_seed, 0x9A5E], dtype=np.uint64)))
            return tuple(float(t) for t in
                         gen.uniform(0.0, 2.0 * math.pi, self.mode_count))
        return self.phases

    def make_model(self) -> RandomSurfaceModel:
        return RandomSurfaceModel(
            f0=self.make_surface(), mode_count=self.mode_count,
            amplitudes=self.amplitudes, phases=self.resolved_phases(),
            M0=self.M0, seed=self.seed)

    def make_source_spec(self) -> SourceSpec:
        amp = (self.amplitude_re[0] + 1j * self.amplitude_im[0],
               self.amplitude_re[1] + 1j * self.amplitude_im[1])
        jitter = None
        if self.jitter_center > 0.0 or self.jitter_amplitude > 0.0:
            jitter = SourceJitter(center_radius=self.jitter_center,
                                  amplitude_rel=self.jitter_amplitude,
                                  seed=self.jitter_seed)
        return SourceSpec(center=self.center, radius=self.radius,
                          amplitude=amp, period=self.period, jitter=jitter)

    def auto_n_max(self, omega: float | None = None) -> int:
        if self.n_max > 0:
            return self.n_max
        p = self.make_params(omega)
        return max(8, int(math.ceil(4.0 * p.k_s * self.period
                                    / (2.0 * math.pi))))

    def auto_delta(self, gap: float) -> float:
        return self.delta if self.delta > 0.0 else gap / 8.0


_SCHEMA = {
    "physics": {
        "lambda": ("lam", float), "mu": ("mu", float),
        "omega": ("omega", float), "omega_list": ("omega_list", "floats"),
    },
    "geometry": {
        "period": ("period", float), "h": ("h", float),
        "m": ("m", float), "M": ("M", float),
        "f0_kind": ("f0_kind", str), "f0_level": ("f0_level", float),
        "f0_amplitudes": ("f0_amplitudes", "floats"),
        "f0_modes": ("f0_modes", "ints"),
        "f0_phases": ("f0_phases", "floats"),
    },
    "surface_model": {
        "mode_count": ("mode_count", int),
        "amplitudes": ("amplitudes", "floats"),
        "phases": ("phases", "floats"),
        "phase_seed": ("phase_seed", int),
        "M0": ("M0", float), "seed": ("seed", int),
    },
    "source": {
        "center": ("center", "floats"), "radius": ("radius", float),
        "amplitude_re": ("amplitude_re", "floats"),
        "amplitude_im": ("amplitude_im", "floats"),
        "jitter_center": ("jitter_center", float),
        "jitter_amplitude": ("jitter_amplitude", float),
        "jitter_seed": ("jitter_seed", int),
    },
    "discretization": {
        "nx": ("nx", int), "ny": ("ny", int), "n_max": ("n_max", int),
        "quadrature_degree": ("quadrature_degree", int),
    },
    "run": {
        "command": ("command", str), "N": ("N", int),
        "parallelism": ("parallelism", int),
        "output_dir": ("output_dir", str),
        "epsilon_margin": ("epsilon_margin", float),
        "delta": ("delta", float), "levels": ("levels", int),
        "calibrated_c": ("calibrated_c", float),
        "anchor_safety": ("anchor_safety", float),
    },
}


def _parse_value(raw: str, kind, path: str):
    try:
        if kind is float:
            return float(raw)
        if kind is int:
            return int(raw)
        if kind is str:
            return raw.strip()
        if kind == "floats":
            items = [s.strip() for s in raw.split(",") if s.strip()]
            return tuple(float(s) for s in items)
        if kind == "ints":
            items = [s.strip() for s in raw.split(",") if s.strip()]
            return tuple(int(s) for s in items)
    except ValueError as exc:
        raise ConfigError(f"{path}: cannot parse {raw!r} ({exc})") from exc
    raise ConfigError(f"{path}: unsupported kind {kind!r}")


def load_config(path: str | Path) -> RunConfig:
    """Parse and fully validate a config file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"no such file: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keys are case-sensitive (m vs M, M0)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"parse error in {path}: {exc}") from exc

    values = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{section}.{key}: unknown key")
            name, kind = _SCHEMA[section][key]
            values[name] = _parse_value(raw, kind, f"{section}.{key}")
    cfg = RunConfig(**values)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    def need(cond, path, msg):
        if not cond:
            raise ConfigError(f"{path}: {msg}")

    need(cfg.lam > 0, "physics.lambda", "must be positive")
    need(cfg.mu > 0, "physics.mu", "must be positive")
    need(cfg.omega > 0, "physics.omega", "must be positive")
    need(all(o > 0 for o in cfg.omega_list), "physics.omega_list",
         "entries must be positive")
    need(cfg.period > 0, "geometry.period", "must be positive")
    need(cfg.m < cfg.M, "geometry.m", "must satisfy m < M")
    need(cfg.h > cfg.M, "geometry.h", "must exceed M")
    need(cfg.f0_kind in ("flat", "cosine", "sawtooth"), "geometry.f0_kind",
         "must be flat, cosine or sawtooth")
    if cfg.f0_kind == "cosine":
        need(len(cfg.f0_amplitudes) == len(cfg.f0_modes) == len(cfg.f0_phases),
             "geometry.f0_amplitudes", "amplitude/mode/phase lists must match")
    need(cfg.mode_count >= 0, "surface_model.mode_count", "must be >= 0")
    need(len(cfg.amplitudes) == cfg.mode_count, "surface_model.amplitudes",
         f"need exactly mode_count={cfg.mode_count} entries")
    if cfg.phase_seed < 0:
        need(len(cfg.phases) == cfg.mode_count, "surface_model.phases",
             f"need exactly mode_count={cfg.mode_count} entries")
    need(cfg.M0 > 0, "surface_model.M0", "must be positive")
    j = np.arange(1, cfg.mode_count + 1)
    bound = float(np.sum(np.abs(np.asarray(cfg.amplitudes))
                         * (1.0 + 2.0 * math.pi * j / cfg.period)))
    need(bound <= cfg.M0, "surface_model.amplitudes",
         f"sum |a_j|(1+2 pi j/period) = {bound:.6g} must not exceed M0")
    need(len(cfg.center) == 2, "source.center", "needs two coordinates")
    need(cfg.radius > 0, "source.radius", "must be positive")
    lo = cfg.center[1] - cfg.radius - cfg.jitter_center
    hi = cfg.center[1] + cfg.radius + cfg.jitter_center
    need(lo > cfg.M and hi < cfg.h, "source.center",
         f"support band [{lo:.6g}, {hi:.6g}] must lie strictly inside "
         f"({cfg.M}, {cfg.h})")
    need(len(cfg.amplitude_re) == 2 and len(cfg.amplitude_im) == 2,
         "source.amplitude_re", "amplitude needs two components")
    need(cfg.nx >= 2 and cfg.ny >= 2, "discretization.nx", "nx, ny must be >= 2")
    need(cfg.n_max >= 0, "discretization.n_max", "must be >= 0 (0 = auto)")
    need(cfg.quadrature_degree == 5, "discretization.quadrature_degree",
         "only the degree-5 rule is provided")
    need(cfg.command in _COMMANDS, "run.command",
         f"must be one of {', '.join(_COMMANDS)}")
    need(cfg.N >= 1, "run.N", "must be >= 1")
    need(cfg.parallelism >= 1, "run.parallelism", "must be >= 1")
    need(0.0 < cfg.epsilon_margin < 1.0, "run.epsilon_margin",
         "must be in (0, 1)")
    need(cfg.levels >= 3, "run.levels", "must be >= 3")
    # the surface itself must respect the declared envelope
    surf = cfg.make_surface()
    try:
        surf.validate()
    except Exception as exc:
        raise ConfigError(f"geometry.f0_level: {exc}") from exc


def _fmt(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def resolved_text(cfg: RunConfig) -> str:
    """Canonical INI text of the fully-resolved config (byte-stable)."""
    lines = []
    for section, keys in _SCHEMA.items():
        lines.append(f"[{section}]")
        for key, (name, _) in keys.items():
            lines.append(f"{key} = {_fmt(getattr(cfg, name))}")
        lines.append("")
    return "\n".join(lines)


def default_config() -> RunConfig:
    return RunConfig()
