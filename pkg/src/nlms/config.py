"""Run configuration (TOML) and initial-data construction."""
from __future__ import annotations

import math
import re
from dataclasses import asdict, dataclass, field

import numpy as np

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .physics import PhysParams, State
from .spectral import Grid, project_hat

SIGMA_RANGE = (4.0 / 3.0, 3.0)


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists every offending key."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class GridConfig:
    N: int
    L: float


@dataclass
class PhysConfig:
    gamma: float
    sigma: float = 4.0 / 3.0


@dataclass
class RunConfig:
    dt: float
    T: float
    integrator: str = "rk4"
    snapshot_every: int = 10
    dealias: bool = True
    diagnostics: bool = True


@dataclass
class IOConfig:
    output_dir: str = "out"
    csv_path: str = "diagnostics.csv"
    snapshot_prefix: str = "snap"


@dataclass
class PicardConfig:
    T: float = 0.05
    tol: float = 1e-10
    max_iter: int = 50
    substeps: int = 4
    samples: int = 20


@dataclass
class Config:
    grid: GridConfig
    phys: PhysConfig
    run: RunConfig
    init: dict = field(default_factory=dict)
    io: IOConfig = field(default_factory=IOConfig)
    picard: PicardConfig = field(default_factory=PicardConfig)

    def make_grid(self) -> Grid:
        return Grid(self.grid.N, self.grid.L)

    def params(self) -> PhysParams:
        return PhysParams(self.phys.gamma, self.phys.sigma)

    def as_dict(self) -> dict:
        return asdict(self)


_PI_EXPR = re.compile(r"^\s*([-+]?[0-9]*\.?[0-9]*(?:[eE][-+]?[0-9]+)?)\s*\*?\s*pi\s*$")


def _number(value, key, errors, kind=float):
    """Coerce a scalar; strings of the form ``"2pi"`` / ``"2*pi"`` are accepted."""
    if isinstance(value, bool):
        errors.append(f"{key}: expected a number, got {value!r}")
        return None
    if isinstance(value, str):
        m = _PI_EXPR.match(value)
        if not m:
            errors.append(f"{key}: cannot interpret {value!r} as a number")
            return None
        coef = m.group(1)
        value = (float(coef) if coef not in ("", "+", "-") else float(coef + "1")) * math.pi
    if kind is int:
        if isinstance(value, float) and not value.is_integer():
            errors.append(f"{key}: expected an integer, got {value!r}")
            return None
        try:
            return int(value)
        except (TypeError, ValueError):
            errors.append(f"{key}: expected an integer, got {value!r}")
            return None
    try:
        return float(value)
    except (TypeError, ValueError):
        errors.append(f"{key}: expected a number, got {value!r}")
        return None


_INIT_KINDS = {
    "u": {"zero": set(), "gaussian": {"amplitude", "width", "center", "phase_k"},
          "mode": {"k", "amplitude"}},
    "A": {"zero": set(), "mode": {"k", "polarization", "amplitude"},
          "random": {"seed", "spectrum_slope", "amplitude"}},
}
_INIT_KINDS["At"] = _INIT_KINDS["A"]


def _check_section(doc, name, allowed, errors):
    sec = doc.get(name, {})
    if not isinstance(sec, dict):
        errors.append(f"{name}: expected a table")
        return {}
    for k in sec:
        if k not in allowed:
            errors.append(f"{name}.{k}: unknown key")
    return sec


def _validate_init(init, errors):
    out = {}
    for k in init:
        if k not in _INIT_KINDS:
            errors.append(f"init.{k}: unknown key (expected one of u, A, At)")
    for slot, kinds in _INIT_KINDS.items():
        spec = init.get(slot, {"kind": "zero"})
        if not isinstance(spec, dict):
            errors.append(f"init.{slot}: expected a table")
            continue
        kind = spec.get("kind", "zero")
        if kind not in kinds:
            errors.append(f"init.{slot}.kind: {kind!r} not in {sorted(kinds)}")
            continue
        for k in spec:
            if k != "kind" and k not in kinds[kind]:
                errors.append(f"init.{slot}.{k}: unknown key for kind {kind!r}")
        if "width" in spec:
            w = _number(spec["width"], f"init.{slot}.width", errors)
            if w is not None and not w > 0:
                errors.append(f"init.{slot}.width: must be positive")
        out[slot] = dict(spec, kind=kind)
    return out


def parse_config(text: str) -> Config:
    """Parse and validate a TOML document.  Raises :class:`ConfigError`."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError([f"parse error: {e}"]) from None
    errors: list[str] = []
    sections = {"grid", "phys", "run", "init", "io", "picard"}
    for k in doc:
        if k not in sections:
            errors.append(f"{k}: unknown key")

    g = _check_section(doc, "grid", {"N", "L"}, errors)
    ph = _check_section(doc, "phys", {"gamma", "sigma"}, errors)
    rn = _check_section(doc, "run", {f for f in RunConfig.__dataclass_fields__}, errors)
    io = _check_section(doc, "io", {f for f in IOConfig.__dataclass_fields__}, errors)
    pc = _check_section(doc, "picard", {f for f in PicardConfig.__dataclass_fields__}, errors)
    init = doc.get("init", {})
    if not isinstance(init, dict):
        errors.append("init: expected a table")
        init = {}

    def req(sec, name, key, kind=float):
        if key not in sec:
            errors.append(f"{name}.{key}: required")
            return None
        return _number(sec[key], f"{name}.{key}", errors, kind)

    N = req(g, "grid", "N", int)
    L = req(g, "grid", "L")
    if N is not None and (N < 4 or N % 2):
        errors.append(f"grid.N: must be an even integer >= 4, got {N}")
    if L is not None and not (L > 0 and math.isfinite(L)):
        errors.append(f"grid.L: must be positive, got {L}")

    gamma = req(ph, "phys", "gamma")
    if gamma is not None and not gamma > 1:
        errors.append(f"phys.gamma: must exceed 1, got {gamma}")
    sigma = _number(ph.get("sigma", 4.0 / 3.0), "phys.sigma", errors)
    if sigma is not None and not (SIGMA_RANGE[0] <= sigma < SIGMA_RANGE[1]):
        errors.append(f"phys.sigma: {sigma} outside the admissible range [4/3, 3)")

    dt = req(rn, "run", "dt")
    T = req(rn, "run", "T")
    if dt is not None and not dt > 0:
        errors.append(f"run.dt: must be positive, got {dt}")
    if T is not None and not (T >= 0 and math.isfinite(T)):
        errors.append(f"run.T: must be nonnegative, got {T}")
    integrator = rn.get("integrator", "rk4")
    if integrator not in ("rk4", "splitting"):
        errors.append(f"run.integrator: {integrator!r} not in ['rk4', 'splitting']")
    snap = _number(rn.get("snapshot_every", 10), "run.snapshot_every", errors, int)
    if snap is not None and snap < 1:
        errors.append("run.snapshot_every: must be >= 1")
    flags = {}
    for key in ("dealias", "diagnostics"):
        v = rn.get(key, True)
        if not isinstance(v, bool):
            errors.append(f"run.{key}: expected true/false")
        flags[key] = bool(v)

    for key in io:
        if not isinstance(io[key], str):
            errors.append(f"io.{key}: expected a string")

    pic = PicardConfig()
    for key, kind in (("T", float), ("tol", float), ("max_iter", int), ("substeps", int),
                      ("samples", int)):
        if key in pc:
            v = _number(pc[key], f"picard.{key}", errors, kind)
            if v is not None and not v > 0:
                errors.append(f"picard.{key}: must be positive")
            setattr(pic, key, v)

    init_spec = _validate_init(init, errors)
    if errors:
        raise ConfigError(errors)
    return Config(
        grid=GridConfig(N, L),
        phys=PhysConfig(gamma, sigma),
        run=RunConfig(dt, T, integrator, snap, flags["dealias"], flags["diagnostics"]),
        init=init_spec,
        io=IOConfig(**{k: str(v) for k, v in io.items()}),
        picard=pic,
    )


def load_config(path) -> Config:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


# -- initial data ------------------------------------------------------------

def _vec3(value, key):
    errs: list[str] = []
    out = [_number(v, key, errs) for v in value] if isinstance(value, (list, tuple)) else None
    if out is None or len(out) != 3 or errs:
        raise ConfigError([f"{key}: expected three numbers, got {value!r}"])
    return np.array(out, dtype=float)


def _periodic_gaussian(x, c, w, L):
    # image sum keeps the profile smooth across the periodic boundary
    return sum(np.exp(-((x - c - n * L) ** 2) / (2 * w * w)) for n in range(-2, 3))


def _scalar_u(grid: Grid, spec) -> np.ndarray:
    kind = spec.get("kind", "zero")
    X, Y, Z = grid.coords()
    if kind == "zero":
        return np.zeros(grid.shape, complex)
    if kind == "gaussian":
        amp = float(spec.get("amplitude", 0.5))
        w = float(spec.get("width", grid.L / 8))
        c = _vec3(spec.get("center", [grid.L / 2] * 3), "init.u.center")
        m = _vec3(spec.get("phase_k", [0, 0, 0]), "init.u.phase_k")
        k = 2 * np.pi * m / grid.L
        env = _periodic_gaussian(X, c[0], w, grid.L) * _periodic_gaussian(Y, c[1], w, grid.L) \
            * _periodic_gaussian(Z, c[2], w, grid.L)
        return amp * env * np.exp(1j * (k[0] * X + k[1] * Y + k[2] * Z))
    if kind == "mode":
        amp = float(spec.get("amplitude", 1.0))
        k = 2 * np.pi * _vec3(spec.get("k", [1, 0, 0]), "init.u.k") / grid.L
        return amp * np.exp(1j * (k[0] * X + k[1] * Y + k[2] * Z)) * np.ones(grid.shape)
    raise ConfigError([f"init.u.kind: unknown kind {kind!r}"])


def _vector(grid: Grid, spec, slot) -> np.ndarray:
    kind = spec.get("kind", "zero")
    X, Y, Z = grid.coords()
    if kind == "zero":
        return np.zeros((3, *grid.shape))
    if kind == "mode":
        amp = float(spec.get("amplitude", 1.0))
        m = _vec3(spec.get("k", [1, 0, 0]), f"init.{slot}.k")
        pol = _vec3(spec.get("polarization", [0, 1, 0]), f"init.{slot}.polarization")
        if not np.any(m):
            F = amp * pol[:, None, None, None] * np.ones((3, *grid.shape))
            return F
        kvec = m / np.linalg.norm(m)
        transverse = pol - kvec * (kvec @ pol)
        if np.linalg.norm(transverse) <= 1e-12 * max(np.linalg.norm(pol), 1e-300):
            raise ConfigError([f"init.{slot}.polarization: parallel to k, "
                               "the divergence-free projection is zero"])
        k = 2 * np.pi * m / grid.L
        phase = np.cos(k[0] * X + k[1] * Y + k[2] * Z)
        return amp * pol[:, None, None, None] * phase[None]
    if kind == "random":
        seed = int(spec.get("seed", 0))
        slope = float(spec.get("spectrum_slope", 2.0))
        amp = float(spec.get("amplitude", 0.1))
        return random_solenoidal(grid, seed, slope, amp)
    raise ConfigError([f"init.{slot}.kind: unknown kind {kind!r}"])


def random_solenoidal(grid: Grid, seed: int, slope: float, amplitude: float) -> np.ndarray:
    """Seeded random divergence-free vector field.

    Algorithm: draw ``3 N^3`` standard normals from numpy's PCG64 generator
    (``numpy.random.Generator(PCG64(seed)).standard_normal``) in C order of
    shape ``(3, N, N, N)``, transform, multiply by ``(1 + |k|^2)^(-slope/2)``,
    remove the mean mode, apply the Leray projection, transform back, keep the
    real part and rescale so that ``max |F| = amplitude``.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    noise = rng.standard_normal((3, *grid.shape))
    Fh = grid.fft(noise) * (1.0 + grid.k2) ** (-0.5 * slope)
    Fh[:, 0, 0, 0] = 0.0
    F = grid.ifft(project_hat(grid, Fh)).real
    peak = np.sqrt(np.sum(F**2, axis=0)).max()
    return F * (amplitude / peak) if peak > 0 else F


def make_initial_data(spec: dict, grid: Grid, dealias: bool = True) -> State:
    """Build ``(u0, A0, A1)``; vector fields pass through the Leray projection."""
    u = _scalar_u(grid, spec.get("u", {"kind": "zero"}))
    A = _vector(grid, spec.get("A", {"kind": "zero"}), "A")
    At = _vector(grid, spec.get("At", {"kind": "zero"}), "At")
    Wh = grid.fft(np.concatenate([A, At]))
    Wh = np.concatenate([project_hat(grid, Wh[:3]), project_hat(grid, Wh[3:])])
    uh = grid.fft(u)
    if dealias:
        Wh *= grid.dealias_mask
        uh *= grid.dealias_mask
    W = grid.ifft(Wh).real
    return State(grid, 0.0, grid.ifft(uh), W[:3], W[3:])
