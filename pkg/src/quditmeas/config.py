"""Experiment configuration files.

A configuration is a flat ``key = value`` text file; ``#`` starts a comment.
Lists are comma separated and real numbers may use ``pi``, e.g.
``theta = 0, pi/2``. A JSON run manifest with a ``"config"`` object is
accepted as well, so every run can be reproduced from its own manifest.

==================  ============================================================
key                 meaning
==================  ============================================================
scheme              ``phase_preserving`` (default) or ``phase_sensitive``
levels              number of levels (optional, checked against ``theta``)
theta               pointer angles, one per level (rad)
clock               ``N``: pointer angles ``2 pi j / N`` (instead of ``theta``)
tau_us              characteristic measurement time (us)
dt_us               integration step (us)
duration_us         simulated time (us)
eta                 detection efficiencies, 2 (phase-preserving) or 1 entries
phi                 amplification axis (rad)
alpha_mag           coherent-state amplitude ``|alpha|``
amp_C               amplification constant ``C``
init_bloch          initial Bloch vector (Gell-Mann order)
init_amplitudes     initial amplitudes; complex entries like ``0.6+0.8j``
n_traj              number of trajectories
seed                base seed (non-negative 64-bit integer)
method              ``ito_sme``, ``pure_exact``, ``stratonovich_kraus``, ``bloch_sme``
record_every        store every k-th step
signal_dt_us        averaging window for signal tables (us)
density_coord       coordinate for densities and post-selection (``x``, ``y``, ``z`` or index)
positivity_abort    abort when an eigenvalue falls below minus this (``none`` disables)
==================  ============================================================
"""
from __future__ import annotations

import ast
import json
import math
import operator
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dispersive import MeasurementConfig, Scheme
from .errors import ConfigError
from .trajectories import DEFAULT_POSITIVITY_ABORT, Method

KEYS = ("scheme", "levels", "theta", "clock", "tau_us", "dt_us", "duration_us", "eta", "phi",
        "alpha_mag", "amp_C", "init_bloch", "init_amplitudes", "n_traj", "seed", "method",
        "record_every", "signal_dt_us", "density_coord", "positivity_abort")

_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
        ast.Div: operator.truediv, ast.Pow: operator.pow}


def parse_real(text):
    """Evaluate a real literal or a small arithmetic expression in ``pi``."""
    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
                and not isinstance(node.value, bool):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        raise ValueError(f"not a real number: {text!r}")
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        return float(text)
    try:
        return float(ev(ast.parse(str(text).strip(), mode="eval")))
    except (SyntaxError, ZeroDivisionError) as exc:
        raise ValueError(f"not a real number: {text!r}") from exc


def _parse_complex(text):
    if isinstance(text, (list, tuple)) and len(text) == 2:
        return complex(float(text[0]), float(text[1]))
    if isinstance(text, (int, float)):
        return complex(text)
    s = str(text).strip().replace(" ", "")
    try:
        return complex(s)
    except ValueError:
        return complex(parse_real(s))


def _split(value):
    if isinstance(value, (list, tuple)):
        return list(value)
    return [v for v in (p.strip() for p in str(value).split(",")) if v != ""]


@dataclass(frozen=True)
class ExperimentConfig:
    """A resolved, validated experiment.

    ``initial`` holds either a Bloch vector or amplitudes, as stated by
    ``initial_form``; it is ``None`` only for configurations used for signal
    tables.
    """

    measurement: MeasurementConfig
    duration: float
    initial: Optional[np.ndarray] = None
    initial_form: Optional[str] = None
    n_traj: int = 1
    seed: int = 0
    method: Method = Method.ITO_SME
    record_every: int = 1
    signal_dt: Optional[float] = None
    density_coord: Optional[str] = None
    positivity_abort: Optional[float] = DEFAULT_POSITIVITY_ABORT

    def to_dict(self):
        """Flat mapping of config keys; :func:`load_config` reads it back unchanged."""
        m = self.measurement
        d = {
            "scheme": m.scheme.value,
            "levels": m.N,
            "theta": list(m.theta),
            "tau_us": m.tau,
            "dt_us": m.dt,
            "duration_us": self.duration,
            "eta": list(m.eta),
            "phi": m.phi,
            "alpha_mag": m.alpha_mag,
            "amp_C": m.C,
            "n_traj": self.n_traj,
            "seed": self.seed,
            "method": self.method.value,
            "record_every": self.record_every,
            "positivity_abort": self.positivity_abort,
        }
        if self.initial_form == "bloch":
            d["init_bloch"] = [float(v) for v in self.initial]
        elif self.initial_form == "amplitudes":
            d["init_amplitudes"] = [[float(v.real), float(v.imag)] for v in self.initial]
        if self.signal_dt is not None:
            d["signal_dt_us"] = self.signal_dt
        if self.density_coord is not None:
            d["density_coord"] = self.density_coord
        return d

    def replace(self, **changes):
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(changes)
        return ExperimentConfig(**d)


def parse_text(text):
    """Parse ``key = value`` lines into ``{key: (value, line)}``."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError("missing key", line=lineno)
        if key not in KEYS:
            raise ConfigError("unknown key", line=lineno, key=key)
        if key in out:
            raise ConfigError(f"duplicate key (first set on line {out[key][1]})", line=lineno, key=key)
        out[key] = (value, lineno)
    return out


def build_config(entries, require_initial=True):
    """Validate parsed entries ``{key: (value, line)}`` into an :class:`ExperimentConfig`."""
    def get(key, conv, default=None, required=False):
        if key not in entries:
            if required:
                raise ConfigError("required key is missing", key=key)
            return default
        value, line = entries[key]
        try:
            return conv(value)
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc), line=line, key=key) from None

    def where(key):
        return entries[key][1] if key in entries else None

    def as_int(v):
        if isinstance(v, int) and not isinstance(v, bool):
            return v
        try:
            return int(str(v).strip())
        except ValueError:
            pass
        f = parse_real(v)
        if f != int(f):
            raise ValueError(f"expected an integer, got {v!r}")
        return int(f)

    def reals(v):
        return [parse_real(x) for x in _split(v)]

    def optional_real(v):
        if v is None or str(v).strip().lower() in ("none", "off", ""):
            return None
        return parse_real(v)

    scheme = get("scheme", lambda v: Scheme(str(v).strip()), Scheme.PHASE_PRESERVING)
    if "theta" in entries and "clock" in entries:
        raise ConfigError("give either theta or clock, not both", line=where("clock"), key="clock")
    if "theta" in entries:
        theta = get("theta", reals)
    elif "clock" in entries:
        n = get("clock", as_int)
        if n < 2:
            raise ConfigError("clock needs at least 2 levels", line=where("clock"), key="clock")
        theta = list(2 * np.pi * np.arange(n) / n)
    else:
        raise ConfigError("one of theta or clock is required", key="theta")
    levels = get("levels", as_int)
    if levels is not None and levels != len(theta):
        raise ConfigError(f"levels = {levels} but {len(theta)} pointer angles given",
                          line=where("levels"), key="levels")
    tau = get("tau_us", parse_real, required=True)
    dt = get("dt_us", parse_real, required=True)
    duration = get("duration_us", parse_real, required=True)
    eta = get("eta", reals)
    phi = get("phi", parse_real, 0.0)
    alpha_mag = get("alpha_mag", parse_real, 1.0)
    C = get("amp_C", parse_real, 1.0)
    try:
        meas = MeasurementConfig(theta=tuple(theta), tau=tau, dt=dt, eta=None if eta is None else tuple(eta),
                                 C=C, scheme=scheme, phi=phi, alpha_mag=alpha_mag)
    except ValueError as exc:
        raise ConfigError(f"invalid measurement configuration: {exc}") from None
    if not duration >= dt:
        raise ConfigError(f"duration {duration} is shorter than one step {dt}",
                          line=where("duration_us"), key="duration_us")
    N = meas.N

    if "init_bloch" in entries and "init_amplitudes" in entries:
        raise ConfigError("give exactly one of init_bloch and init_amplitudes",
                          line=where("init_amplitudes"), key="init_amplitudes")
    initial, form = None, None
    if "init_bloch" in entries:
        initial, form = np.array(get("init_bloch", reals)), "bloch"
        if initial.shape != (N * N - 1,):
            raise ConfigError(f"expected {N * N - 1} Bloch coordinates, got {initial.size}",
                              line=where("init_bloch"), key="init_bloch")
    elif "init_amplitudes" in entries:
        initial = np.array(get("init_amplitudes", lambda v: [_parse_complex(x) for x in _split(v)]))
        form = "amplitudes"
        if initial.shape != (N,):
            raise ConfigError(f"expected {N} amplitudes, got {initial.size}",
                              line=where("init_amplitudes"), key="init_amplitudes")
        if not np.isclose(np.linalg.norm(initial), 1.0, atol=1e-9):
            raise ConfigError(f"amplitudes are not normalized (norm {np.linalg.norm(initial):.12g})",
                              line=where("init_amplitudes"), key="init_amplitudes")
    elif require_initial:
        raise ConfigError("one of init_bloch or init_amplitudes is required", key="init_bloch")
    if initial is not None and N >= 2:
        from .trajectories import prepare_initial
        try:
            prepare_initial(initial, N, Method.ITO_SME)
        except ValueError as exc:
            key = "init_bloch" if form == "bloch" else "init_amplitudes"
            raise ConfigError(str(exc), line=where(key), key=key) from None

    n_traj = get("n_traj", as_int, 1)
    if n_traj < 1:
        raise ConfigError("n_traj must be at least 1", line=where("n_traj"), key="n_traj")
    seed = get("seed", as_int, 0)
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be a non-negative 64-bit integer", line=where("seed"), key="seed")
    method = get("method", lambda v: Method(str(v).strip()), Method.ITO_SME)
    record_every = get("record_every", as_int, 1)
    if record_every < 1:
        raise ConfigError("record_every must be at least 1", line=where("record_every"), key="record_every")
    signal_dt = get("signal_dt_us", parse_real)
    if signal_dt is not None and not signal_dt > 0:
        raise ConfigError("signal_dt_us must be positive", line=where("signal_dt_us"), key="signal_dt_us")
    coord = get("density_coord", lambda v: str(v).strip())
    pos = get("positivity_abort", optional_real, DEFAULT_POSITIVITY_ABORT)
    return ExperimentConfig(meas, duration, initial, form, n_traj, seed, method, record_every,
                            signal_dt, coord, pos)


def loads(text, require_initial=True):
    """Parse configuration text, either ``key = value`` lines or a JSON manifest."""
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
        data = data.get("config", data)
        unknown = sorted(set(data) - set(KEYS))
        if unknown:
            raise ConfigError("unknown key", key=unknown[0])
        entries = {k: (v, None) for k, v in data.items()}
    else:
        entries = parse_text(text)
    return build_config(entries, require_initial)


def load_config(path, require_initial=True):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return loads(text, require_initial)


def dumps(cfg: ExperimentConfig):
    """Render a configuration as ``key = value`` text."""
    lines = []
    for key, value in cfg.to_dict().items():
        if key == "init_amplitudes":
            value = ", ".join(repr(complex(re, im)).strip("()") for re, im in value)
        elif isinstance(value, list):
            value = ", ".join(repr(float(v)) for v in value)
        elif value is None:
            value = "none"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
