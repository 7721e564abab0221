"""Config ingestion, wavefront sampling/export, and the runnable jobs.

A job is described by one JSON document (schema 1):

    {
      "schema": 1,
      "expression": "x1^3/3 - p2^2/2",
      "n": 2,
      "I": [1],
      "window": {"center": [0, 0], "half_widths": [1, 1], "resolution": 41},
      "tolerances": {"tol_root": 1e-8},          # optional, keys as below
      "outputs": ["mesh_m", "reports"],          # optional
      "seed": 0,                                 # optional
      "trials": 100                              # optional (identity suite)
    }

Unknown keys anywhere raise a validation error naming the key.  All outputs
are deterministic for a fixed config and seed; floats are formatted with
shortest round-trip decimals.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo, identities, normalform as nform
from .classify import (A3_TYPE, CUSPIDAL_EDGE, SWALLOWTAIL, ChartWindow,
                       SingularityReport, Tolerances, classify_point,
                       find_singular_set)
from .gfexpr import DslError, EvalDomainError, GeneratingFunction, is_polynomial, parse

VALID_OUTPUTS = ("mesh_e", "mesh_m", "reports", "normalform", "identities")

_TOLERANCE_KEYS = ("tol_root", "tau_zero", "tau_nonzero", "kernel_tol",
                   "probe_radius", "probe_count", "delta", "roundtrip")


class ConfigError(ValueError):
    """Invalid job configuration; the message names the offending key."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"config key {key!r}: {message}")


@dataclass
class JobConfig:
    expression: str
    n: int
    I: frozenset[int]
    window: ChartWindow
    tolerances: Tolerances = field(default_factory=Tolerances)
    outputs: tuple[str, ...] = VALID_OUTPUTS
    seed: int = 0
    trials: int = 100

    def generating_function(self) -> GeneratingFunction:
        return parse(self.expression, self.n, self.I)


def _require(mapping: dict, key: str, types, where: str):
    if key not in mapping:
        raise ConfigError(f"{where}{key}", "missing required key")
    value = mapping[key]
    if not isinstance(value, types):
        raise ConfigError(f"{where}{key}",
                          f"expected {types}, got {type(value).__name__}")
    return value


def load_config(doc: dict | str) -> JobConfig:
    """Validate a config document (dict or JSON text) into a JobConfig."""
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as err:
            raise ConfigError("<document>", f"not valid JSON: {err}") from None
    if not isinstance(doc, dict):
        raise ConfigError("<document>", "top level must be a JSON object")

    known = {"schema", "expression", "n", "I", "window", "tolerances",
             "outputs", "seed", "trials"}
    for key in doc:
        if key not in known:
            raise ConfigError(key, "unknown key")

    schema = _require(doc, "schema", int, "")
    if schema != 1:
        raise ConfigError("schema", f"unsupported schema version {schema}")
    expression = _require(doc, "expression", str, "")
    n = _require(doc, "n", int, "")
    if n < 1:
        raise ConfigError("n", "must be >= 1")
    I_raw = _require(doc, "I", list, "")
    if not all(isinstance(i, int) for i in I_raw):
        raise ConfigError("I", "must be a list of integers")
    I = frozenset(I_raw)
    if not I <= set(range(1, n + 1)):
        raise ConfigError("I", f"must be a subset of 1..{n}")

    win_doc = _require(doc, "window", dict, "")
    for key in win_doc:
        if key not in ("center", "half_widths", "resolution"):
            raise ConfigError(f"window.{key}", "unknown key")
    center = _require(win_doc, "center", list, "window.")
    half = _require(win_doc, "half_widths", list, "window.")
    resolution = _require(win_doc, "resolution", (int, list), "window.")
    if len(center) != n or len(half) != n:
        raise ConfigError("window", f"center and half_widths must have length {n}")
    try:
        window = ChartWindow.create(center, half, resolution
                                    if isinstance(resolution, int)
                                    else tuple(resolution))
    except ValueError as err:
        raise ConfigError("window", str(err)) from None

    tol_doc = doc.get("tolerances", {})
    if not isinstance(tol_doc, dict):
        raise ConfigError("tolerances", "must be an object")
    for key in tol_doc:
        if key not in _TOLERANCE_KEYS:
            raise ConfigError(f"tolerances.{key}", "unknown key")
        if not isinstance(tol_doc[key], (int, float)):
            raise ConfigError(f"tolerances.{key}", "must be a number")
    try:
        tolerances = Tolerances(**{k: (int(v) if k == "probe_count" else float(v))
                                   for k, v in tol_doc.items()})
    except ValueError as err:
        raise ConfigError("tolerances", str(err)) from None

    outputs = doc.get("outputs", list(VALID_OUTPUTS))
    if not isinstance(outputs, list) or not all(isinstance(o, str) for o in outputs):
        raise ConfigError("outputs", "must be a list of strings")
    for o in outputs:
        if o not in VALID_OUTPUTS:
            raise ConfigError("outputs", f"unknown output kind {o!r}")

    seed = doc.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("seed", "must be an integer")
    trials = doc.get("trials", 100)
    if not isinstance(trials, int) or trials < 1:
        raise ConfigError("trials", "must be a positive integer")

    cfg = JobConfig(expression=expression, n=n, I=I, window=window,
                    tolerances=tolerances, outputs=tuple(outputs),
                    seed=seed, trials=trials)
    try:
        cfg.generating_function()
    except DslError as err:
        raise ConfigError("expression", str(err)) from None
    return cfg


def load_config_file(path: str) -> JobConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return load_config(fh.read())


# -- mesh assembly ------------------------------------------------------------------


@dataclass
class MeshFile:
    """Wavefront mesh: vertices with height, triangulated grid, fold polylines."""

    kind: str                              # "e" or "m"
    columns: tuple[str, ...]               # CSV column names
    chart_points: np.ndarray               # (k, n) chart samples that survived
    vertices: np.ndarray                   # (k, n + 1): image coords + height
    faces: list[tuple[int, int, int]]      # 0-based vertex triples (n == 2 only)
    polylines: list[list[int]]             # 0-based chains of singular vertices
    singular_vertices: np.ndarray          # (s, n + 1)
    dropped: int

    def to_obj(self) -> str:
        """OBJ text (surfaces only exist for n == 2)."""
        lines = [f"# emfront {self.kind}-wavefront mesh",
                 f"# dropped vertices: {self.dropped}"]
        for v in self.vertices:
            lines.append("v " + " ".join(repr(float(c)) for c in v))
        for v in self.singular_vertices:
            lines.append("v " + " ".join(repr(float(c)) for c in v))
        for f in self.faces:
            lines.append("f " + " ".join(str(i + 1) for i in f))
        base = len(self.vertices)
        for chain in self.polylines:
            if len(chain) >= 2:
                lines.append("l " + " ".join(str(base + i + 1) for i in chain))
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        for q, v in zip(self.chart_points, self.vertices):
            row = list(q) + list(v)
            lines.append(",".join(repr(float(c)) for c in row))
        return "\n".join(lines) + "\n"


def _build_mesh(g: GeneratingFunction, w: ChartWindow, kind: str,
                singular_points: list[np.ndarray]) -> MeshFile:
    axes = w.axes()
    shape = tuple(w.resolution)
    index_of = -np.ones(shape, dtype=np.int64)
    chart_pts, verts = [], []
    dropped = 0
    for idx in np.ndindex(shape):
        q = np.array([axes[a][idx[a]] for a in range(w.n)])
        try:
            pt = geo.lift(g, q)
            coords, height = (geo.project_e(pt) if kind == "e"
                              else geo.project_m(pt))
        except EvalDomainError:
            dropped += 1
            continue
        if not (np.all(np.isfinite(coords)) and np.isfinite(height)):
            dropped += 1
            continue
        index_of[idx] = len(verts)
        chart_pts.append(q)
        verts.append(np.concatenate([coords, [height]]))

    faces: list[tuple[int, int, int]] = []
    if w.n == 2:
        for i in range(shape[0] - 1):
            for j in range(shape[1] - 1):
                a, b = index_of[i, j], index_of[i + 1, j]
                c, d = index_of[i + 1, j + 1], index_of[i, j + 1]
                if min(a, b, c, d) < 0:
                    continue
                faces.append((int(a), int(b), int(c)))
                faces.append((int(a), int(c), int(d)))

    sing_verts = []
    for q in singular_points:
        try:
            pt = geo.lift(g, q)
            coords, height = (geo.project_e(pt) if kind == "e"
                              else geo.project_m(pt))
            sing_verts.append(np.concatenate([coords, [height]]))
        except EvalDomainError:
            continue
    sing_verts = np.array(sing_verts) if sing_verts else np.zeros((0, w.n + 1))
    # chain consecutive singular points, breaking on jumps > 2 cells
    polylines: list[list[int]] = []
    if len(sing_verts) >= 2:
        jump = 2.0 * np.max(w.spacing())
        chain = [0]
        for i in range(1, len(singular_points)):
            if np.max(np.abs(singular_points[i] - singular_points[i - 1])) <= jump:
                chain.append(i)
            else:
                polylines.append(chain)
                chain = [i]
        polylines.append(chain)

    base_names = ([f"{k}{i}_chart" for k, i in g.chart_vars])
    img = "x" if kind == "e" else "p"
    height_name = "z" if kind == "e" else "z_prime"
    columns = tuple(base_names + [f"{img}{i}" for i in range(1, g.n + 1)]
                    + [height_name])
    return MeshFile(kind=kind, columns=columns,
                    chart_points=np.array(chart_pts) if chart_pts
                    else np.zeros((0, w.n)),
                    vertices=np.array(verts) if verts else np.zeros((0, w.n + 1)),
                    faces=faces, polylines=polylines,
                    singular_vertices=sing_verts, dropped=dropped)


# -- jobs ----------------------------------------------------------------------------


def run_sample(cfg: JobConfig) -> tuple[MeshFile, MeshFile]:
    """Sample both wavefronts over the window; returns (e-mesh, m-mesh)."""
    g = cfg.generating_function()
    singular = find_singular_set(g, cfg.window, cfg.tolerances.tol_root)
    mesh_e = _build_mesh(g, cfg.window, "e", singular)
    mesh_m = _build_mesh(g, cfg.window, "m", singular)
    return mesh_e, mesh_m


def run_classify(cfg: JobConfig) -> dict:
    """Classification report over the window's singular set."""
    g = cfg.generating_function()
    points = find_singular_set(g, cfg.window, cfg.tolerances.tol_root)
    reports = [classify_point(g, q, cfg.tolerances) for q in points]
    histogram: dict[str, int] = {}
    for r in reports:
        histogram[r.classification] = histogram.get(r.classification, 0) + 1
    return {
        "schema": 1,
        "expression": cfg.expression,
        "count": len(reports),
        "histogram": dict(sorted(histogram.items())),
        "reports": [r.to_dict() for r in reports],
    }


def run_identities(cfg: JobConfig, corrupt: bool = False) -> dict:
    """Identity-suite residual report; `passed` keys off the residual bound."""
    g = cfg.generating_function()
    poly = is_polynomial(g.expr)
    bound = 1e-9 if poly else 1e-7
    results = identities.run_suite(g, cfg.window, trials=cfg.trials,
                                   seed=cfg.seed, tols=cfg.tolerances,
                                   corrupt=corrupt)
    worst = max((r.max_residual for r in results), default=0.0)
    return {
        "schema": 1,
        "expression": cfg.expression,
        "polynomial": poly,
        "trials": cfg.trials,
        "seed": cfg.seed,
        "residual_bound": bound,
        "worst_residual": worst,
        "passed": bool(worst <= bound),
        "identities": [r.to_dict() for r in results],
    }


def run_normalform(cfg: JobConfig) -> dict:
    """Normal form extracted at the window center plus its round-trip residual.

    The center must classify as a fold edge or a degenerate branch; the
    swallowtail normal form is out of scope and reports an error.
    """
    g = cfg.generating_function()
    base = np.asarray(cfg.window.center, dtype=float)
    report = classify_point(g, base, cfg.tolerances)
    label = report.classification
    if label == SWALLOWTAIL:
        raise ValueError("no normal form is extracted for swallowtail points")
    if label not in (CUSPIDAL_EDGE, A3_TYPE):
        raise ValueError(
            f"window center classifies as {label}; a fold edge or degenerate "
            "branch base point is required")
    model = nform.adapt(g, base)
    graph = nform.singular_graph(model, cfg.window, label, cfg.tolerances)
    nf = nform.divide(model, graph, label, cfg.tolerances)
    residual = nform.roundtrip_residual(model, nf, cfg.window)
    return {
        "schema": 1,
        "expression": cfg.expression,
        "base_point": base.tolist(),
        "classification": label,
        "max_roundtrip_residual": residual,
        "residual_bound": cfg.tolerances.roundtrip,
        "passed": bool(residual <= cfg.tolerances.roundtrip),
        "model": nf.to_dict(),
    }


def dump_json(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
