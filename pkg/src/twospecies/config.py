"""Scenario files: a TOML document with flat top-level keys and one level of tables.

Example::

    name = "two-deltas"
    n = 200
    scheme = "prox"
    step = 1e-3
    t_end = 0.4

    [initial]
    kind = "oracle"
    oracle = "two_deltas_gf"
    t = 0.0
"""
from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError, TwoSpeciesError
from .oracles import KINDS as ORACLE_KINDS
from .oracles import OracleSpec, exact_state
from .quantile import DensityProfile, StatePair, grids_from_densities, random_block_density
from .scheme import SCHEMES, SOLVERS, ProxConfig

log = logging.getLogger(__name__)

INITIAL_KINDS = ("oracle", "density", "file", "random_blocks")

TOP_KEYS = {"name", "n", "scheme", "step", "t_end", "record_every",
            "initial", "prox", "hyperbolic", "outputs"}
INITIAL_KEYS = {
    "oracle": {"kind", "oracle", "t", "m"},
    "density": {"kind", "rho_atoms", "rho_pieces", "eta_atoms", "eta_pieces"},
    "file": {"kind", "path"},
    "random_blocks": {"kind", "seed", "max_blocks"},
}
PROX_KEYS = {"inner_tol", "inner_max_iter", "huber_eps", "solver", "probe_h"}
HYPERBOLIC_KEYS = {"x_min", "x_max", "nx", "cfl", "record_stride", "snapshot_stride"}
OUTPUT_KEYS = {"summary_path", "snapshots_path", "snapshot_stride", "cdf_path", "cdf_records_path"}


@dataclass(frozen=True)
class InitialSpec:
    kind: str
    oracle: str = "two_deltas_gf"
    t: float = 0.0
    m: float = 0.0
    rho: DensityProfile | None = None
    eta: DensityProfile | None = None
    path: str | None = None
    seed: int = 0
    max_blocks: int = 3


@dataclass(frozen=True)
class HyperbolicSpec:
    x_min: float = -2.0
    x_max: float = 2.0
    nx: int = 4000
    cfl: float = 0.5
    record_stride: int = 100
    snapshot_stride: int | None = None


@dataclass(frozen=True)
class OutputSpec:
    summary_path: str
    snapshots_path: str
    snapshot_stride: int | None = None
    cdf_path: str = ""
    cdf_records_path: str = ""


@dataclass(frozen=True)
class Scenario:
    name: str
    initial: InitialSpec
    n: int
    scheme: str
    step: float
    t_end: float
    record_every: int = 1
    prox: ProxConfig = field(default_factory=ProxConfig)
    probe_h: float = 1e-6
    hyperbolic: HyperbolicSpec = field(default_factory=HyperbolicSpec)
    outputs: OutputSpec | None = None


def _line_of(text: str, key: str) -> int | None:
    pat = re.compile(rf"^\s*{re.escape(key)}\s*=", re.M)
    m = pat.search(text)
    return text.count("\n", 0, m.start()) + 1 if m else None


class _Reader:
    """Typed access to one table with key/line diagnostics."""

    def __init__(self, table: dict, allowed: set, prefix: str, text: str, strict: bool):
        self.table = table
        self.prefix = prefix
        self.text = text
        unknown = sorted(set(table) - allowed)
        for k in unknown:
            if strict:
                raise ConfigError("unknown key", key=self._name(k), line=_line_of(text, k))
            log.warning("ignoring unknown key %s", self._name(k))

    def _name(self, key):
        return f"{self.prefix}{key}"

    def fail(self, key, message):
        raise ConfigError(message, key=self._name(key), line=_line_of(self.text, key))

    def get(self, key, kind, default=None, required=False, positive=False, choices=None):
        if key not in self.table:
            if required:
                self.fail(key, "missing required key")
            return default
        v = self.table[key]
        if kind is float and isinstance(v, int) and not isinstance(v, bool):
            v = float(v)
        if kind is int and isinstance(v, bool) or not isinstance(v, kind):
            self.fail(key, f"expected {kind.__name__}, got {type(v).__name__}")
        if positive and not v > 0:
            self.fail(key, f"must be positive, got {v}")
        if choices is not None and v not in choices:
            self.fail(key, f"must be one of {list(choices)}, got {v!r}")
        return v


def _atoms(r: _Reader, key):
    raw = r.get(key, list, default=[])
    try:
        return tuple((float(p), float(mass)) for p, mass in raw)
    except (TypeError, ValueError):
        r.fail(key, "expected a list of [position, mass] pairs")


def _pieces(r: _Reader, key):
    raw = r.get(key, list, default=[])
    try:
        return tuple((float(a), float(b), float(h)) for a, b, h in raw)
    except (TypeError, ValueError):
        r.fail(key, "expected a list of [left, right, height] triples")


def _parse_initial(table, text, strict) -> InitialSpec:
    kind = table.get("kind")
    if kind not in INITIAL_KINDS:
        raise ConfigError(f"must be one of {list(INITIAL_KINDS)}, got {kind!r}",
                          key="initial.kind", line=_line_of(text, "kind"))
    r = _Reader(table, INITIAL_KEYS[kind], "initial.", text, strict)
    if kind == "oracle":
        return InitialSpec(kind, oracle=r.get("oracle", str, required=True, choices=ORACLE_KINDS),
                           t=r.get("t", float, 0.0), m=r.get("m", float, 0.0))
    if kind == "density":
        try:
            rho = DensityProfile(_atoms(r, "rho_atoms"), _pieces(r, "rho_pieces"))
            eta = DensityProfile(_atoms(r, "eta_atoms"), _pieces(r, "eta_pieces"))
        except TwoSpeciesError as exc:
            raise ConfigError(str(exc), key="initial") from exc
        return InitialSpec(kind, rho=rho, eta=eta)
    if kind == "file":
        return InitialSpec(kind, path=r.get("path", str, required=True))
    return InitialSpec(kind, seed=r.get("seed", int, 0),
                       max_blocks=r.get("max_blocks", int, 3, positive=True))


def parse_config(text: str, strict: bool = True, seed: int | None = None) -> Scenario:
    """Validate a scenario document and fill in defaults.

    ``seed`` overrides the seed of a ``random_blocks`` initial condition.
    """
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"malformed document: {exc}", line=int(m.group(1)) if m else None) from exc
    top = _Reader(doc, TOP_KEYS, "", text, strict)
    name = top.get("name", str, required=True)
    if not re.fullmatch(r"[A-Za-z0-9_.-]+", name):
        top.fail("name", "may only contain letters, digits, '_', '.', '-'")
    init_table = top.get("initial", dict, required=True)
    initial = _parse_initial(init_table, text, strict)
    if initial.kind == "random_blocks" and seed is not None:
        initial = InitialSpec(initial.kind, seed=seed, max_blocks=initial.max_blocks)
    n = top.get("n", int, required=initial.kind != "file", positive=True, default=0)
    if initial.kind != "file" and n < 2:
        top.fail("n", f"must be at least 2, got {n}")
    scheme = top.get("scheme", str, required=True, choices=SCHEMES)
    step = top.get("step", float, 1e-3, positive=True)
    t_end = top.get("t_end", float, required=True, positive=True)
    record_every = top.get("record_every", int, 1, positive=True)

    pr = _Reader(top.get("prox", dict, {}), PROX_KEYS, "prox.", text, strict)
    prox = ProxConfig(
        tau=step,
        inner_tol=pr.get("inner_tol", float, 1e-8, positive=True),
        inner_max_iter=pr.get("inner_max_iter", int, 200_000, positive=True),
        huber_eps=pr.get("huber_eps", float, 1e-7),
        solver=pr.get("solver", str, "exact", choices=SOLVERS),
    )
    if prox.huber_eps < 0:
        pr.fail("huber_eps", "must be nonnegative")
    probe_h = pr.get("probe_h", float, 1e-6, positive=True)

    hr = _Reader(top.get("hyperbolic", dict, {}), HYPERBOLIC_KEYS, "hyperbolic.", text, strict)
    hyp = HyperbolicSpec(
        x_min=hr.get("x_min", float, -2.0), x_max=hr.get("x_max", float, 2.0),
        nx=hr.get("nx", int, 4000, positive=True), cfl=hr.get("cfl", float, 0.5, positive=True),
        record_stride=hr.get("record_stride", int, 100, positive=True),
        snapshot_stride=hr.get("snapshot_stride", int, None, positive=True))
    if not hyp.x_max > hyp.x_min:
        hr.fail("x_max", "must exceed x_min")
    if hyp.cfl > 1:
        hr.fail("cfl", f"must not exceed 1, got {hyp.cfl}")

    orr = _Reader(top.get("outputs", dict, {}), OUTPUT_KEYS, "outputs.", text, strict)
    outputs = OutputSpec(
        summary_path=orr.get("summary_path", str, f"{name}.summary.csv"),
        snapshots_path=orr.get("snapshots_path", str, f"{name}.snapshots.csv"),
        snapshot_stride=orr.get("snapshot_stride", int, None, positive=True),
        cdf_path=orr.get("cdf_path", str, f"{name}.cdf.csv"),
        cdf_records_path=orr.get("cdf_records_path", str, f"{name}.cdf_records.csv"))
    return Scenario(name=name, initial=initial, n=n, scheme=scheme, step=step, t_end=t_end,
                    record_every=record_every, prox=prox, probe_h=probe_h, hyperbolic=hyp,
                    outputs=outputs)


def load_config(path, strict: bool = True, seed: int | None = None) -> Scenario:
    text = Path(path).read_text(encoding="utf-8")
    return parse_config(text, strict=strict, seed=seed)


def read_state_csv(path, time: float | None = None) -> tuple[float, StatePair]:
    """State from a CSV with ``X`` and ``Y`` columns.

    With a ``t`` column (snapshot files), the rows at ``time`` are used, or at
    the last time present when ``time`` is None.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "X" not in rows[0] or "Y" not in rows[0]:
        raise ConfigError(f"{path}: expected a header with X and Y columns")
    try:
        ts = np.array([float(r["t"]) for r in rows]) if "t" in rows[0] else np.zeros(len(rows))
        xs = np.array([float(r["X"]) for r in rows])
        ys = np.array([float(r["Y"]) for r in rows])
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric entry ({exc})") from exc
    target = ts[-1] if time is None else time
    sel = np.isclose(ts, target, rtol=0.0, atol=1e-12)
    if not sel.any():
        raise ConfigError(f"{path}: no rows at t={target}")
    return float(target), StatePair.from_arrays(xs[sel], ys[sel])


def build_initial(sc: Scenario, base_dir: Path | None = None) -> StatePair:
    ini = sc.initial
    if ini.kind == "oracle":
        return exact_state(OracleSpec(ini.oracle, t=ini.t, n=sc.n, m=ini.m))
    if ini.kind == "density":
        return grids_from_densities(ini.rho, ini.eta, sc.n)
    if ini.kind == "random_blocks":
        rng = np.random.default_rng(ini.seed)
        rho = random_block_density(rng, ini.max_blocks)
        eta = random_block_density(rng, ini.max_blocks)
        return grids_from_densities(rho, eta, sc.n)
    path = Path(ini.path)
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    _, s = read_state_csv(path)
    if sc.n and s.n != sc.n:
        raise ConfigError(f"state file has n={s.n} but the scenario asks for n={sc.n}", key="n")
    return s
