"""File formats: CSV datasets/designs/tables and JSON fitted models.

Dataset CSV: header ``x1,...,xd,t,z``; ``#`` starts a comment line. Design
CSV is the same without the ``z`` column. Numbers are written with 17
significant digits so they re-read bit-identically.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from .designs import Design
from .exceptions import ConfigError, DatasetError
from .gp import Dataset, FittedModel, NoiseModel, build_model, level_key
from .kernels import KernelSpec, MaternParams, TemporalCorrParams, Variant

SCHEMA_VERSION = 1


def fmt(v: float) -> str:
    return format(float(v), ".17g")


# -- CSV -----------------------------------------------------------------------

def _read_rows(path):
    """Yield ``(line_number, fields)`` for non-comment, non-blank lines."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            yield lineno, [f.strip() for f in s.split(",")]


def read_table(path):
    """Return ``(header, values, line_numbers)`` of a numeric CSV file."""
    rows = _read_rows(path)
    try:
        lineno, header = next(rows)
    except StopIteration:
        raise DatasetError(f"{path}: file is empty") from None
    values, lines = [], []
    for lineno, fields_ in rows:
        if len(fields_) != len(header):
            raise DatasetError(f"{path}:{lineno}: expected {len(header)} fields, got {len(fields_)}")
        try:
            row = [float(f) for f in fields_]
        except ValueError:
            raise DatasetError(f"{path}:{lineno}: non-numeric value") from None
        if not all(math.isfinite(v) for v in row):
            raise DatasetError(f"{path}:{lineno}: non-finite value")
        values.append(row)
        lines.append(lineno)
    arr = np.array(values, dtype=float).reshape(len(values), len(header))
    return header, arr, lines


def _input_columns(header, path, trailing):
    n_in = len(header) - len(trailing)
    expected = [f"x{j + 1}" for j in range(n_in)] + list(trailing)
    if n_in < 1 or header != expected:
        raise DatasetError(f"{path}: header must be {','.join(expected) if n_in >= 1 else 'x1,...,xd,' + ','.join(trailing)}, "
                           f"got {','.join(header)}")
    return n_in


def read_dataset(path) -> Dataset:
    header, arr, lines = read_table(path)
    d = _input_columns(header, path, ("t", "z"))
    if arr.shape[0] < 2:
        raise DatasetError(f"{path}: a dataset needs at least 2 rows, got {arr.shape[0]}")
    bad = np.flatnonzero(arr[:, d] <= 0)
    if bad.size:
        raise DatasetError(f"{path}:{lines[bad[0]]}: fidelity t must be positive")
    return Dataset(arr[:, :d], arr[:, d], arr[:, d + 1])


def read_design(path) -> Design:
    header, arr, lines = read_table(path)
    if header and header[-1] == "z":
        header, arr = header[:-1], arr[:, :-1]
    d = _input_columns(header, path, ("t",))
    if arr.shape[0] < 1:
        raise DatasetError(f"{path}: design has no rows")
    return Design(arr[:, :d], arr[:, d])


def read_points(path, default_t: Optional[float] = None):
    """Prediction targets: ``x1..xd`` with an optional ``t`` column."""
    header, arr, _ = read_table(path)
    if header[-1] == "t":
        d = _input_columns(header, path, ("t",))
        return arr[:, :d], arr[:, d]
    d = _input_columns(header, path, ())
    if default_t is None:
        raise DatasetError(f"{path}: no t column and no prediction level given")
    return arr, np.full(arr.shape[0], float(default_t))


def write_table(path, columns: Mapping[str, Sequence[Any]], comment: Optional[str] = None):
    """Write equal-length columns as CSV; floats use 17 significant digits."""
    names = list(columns)
    cols = [list(columns[k]) for k in names]
    n = len(cols[0]) if cols else 0
    if any(len(c) != n for c in cols):
        raise ValueError("columns have different lengths")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        fh.write(",".join(names) + "\n")
        for i in range(n):
            fh.write(",".join(c[i] if isinstance(c[i], str) else fmt(c[i]) for c in cols) + "\n")


def _xcols(X):
    X = np.atleast_2d(X)
    return {f"x{j + 1}": X[:, j] for j in range(X.shape[1])}


def write_dataset(path, ds: Dataset):
    write_table(path, {**_xcols(ds.X), "t": ds.T, "z": ds.Z})


def write_design(path, design: Design):
    write_table(path, {**_xcols(design.X), "t": design.T})


# -- JSON ------------------------------------------------------------------------

def _matern_to_dict(p: MaternParams) -> dict:
    return {"variance": p.variance, "lengthscales": list(p.lengthscales), "nu": p.nu}


def _matern_from_dict(d: dict) -> MaternParams:
    return MaternParams(d["variance"], tuple(d["lengthscales"]), d["nu"])


def kernel_to_dict(spec: KernelSpec) -> dict:
    if spec.variant is Variant.TWO_SCALE:
        return {"variant": spec.variant.value,
                "xi0": _matern_to_dict(spec.params_xi0),
                "eps": _matern_to_dict(spec.params_eps),
                "temporal": {"exponent": spec.temporal.exponent,
                             "t_scale": spec.temporal.t_scale}}
    if spec.variant is Variant.STATIONARY:
        return {"variant": spec.variant.value, "joint": _matern_to_dict(spec.params_joint)}
    return {"variant": spec.variant.value, "x": _matern_to_dict(spec.params_x)}


def kernel_from_dict(d: dict) -> KernelSpec:
    variant = Variant.parse(d["variant"])
    if variant is Variant.TWO_SCALE:
        tp = d["temporal"]
        return KernelSpec.two_scale(_matern_from_dict(d["xi0"]), _matern_from_dict(d["eps"]),
                                    TemporalCorrParams(tp["exponent"], tp["t_scale"]))
    if variant is Variant.STATIONARY:
        return KernelSpec.stationary(_matern_from_dict(d["joint"]))
    return KernelSpec.single_level(_matern_from_dict(d["x"]))


def model_to_dict(model: FittedModel, extra: Optional[dict] = None) -> dict:
    ds = model.dataset
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "fitted-model",
        "kernel": kernel_to_dict(model.kernel),
        "noise_log_variance": model.noise.as_dict(),
        "gls_mean": model.gls_mean,
        "gls_denominator": model.gls_denominator,
        "jitter": model.factor.jitter,
        "dataset": {"X": ds.X.tolist(), "T": ds.T.tolist(), "Z": ds.Z.tolist(),
                    "level_counts": {level_key(t): int(c) for t, c in zip(ds.levels, ds.counts)}},
    }
    if extra:
        doc.update(extra)
    return doc


def model_from_dict(doc: dict) -> FittedModel:
    if doc.get("schema_version") != SCHEMA_VERSION or doc.get("kind") != "fitted-model":
        raise DatasetError("not a fitted-model document of a supported schema version")
    data = doc["dataset"]
    ds = Dataset(np.array(data["X"], dtype=float), data["T"], data["Z"])
    noise = NoiseModel.from_dict(doc["noise_log_variance"])
    return build_model(ds, kernel_from_dict(doc["kernel"]), noise)


def write_json(path, doc: dict):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=False, allow_nan=False)
        fh.write("\n")


def read_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def save_model(path, model: FittedModel, extra: Optional[dict] = None):
    write_json(path, model_to_dict(model, extra))


def load_model(path) -> FittedModel:
    return model_from_dict(read_json(path))


# -- run configuration -------------------------------------------------------------

def _level_value(v) -> float:
    if isinstance(v, str) and "/" in v:
        num, den = v.split("/", 1)
        return float(num) / float(den)
    return float(v)


@dataclass
class RunConfig:
    """Every setting of the command-line pipeline, with its default."""

    # model and optimizer
    variant: str = "two-scale"
    nu: float = 2.5
    n_starts: int = 10
    max_iter: int = 300
    optimizer: str = "L-BFGS-B"
    seed: int = 0
    # noise prior
    lambda_fraction: float = 0.01
    within_variance: float = (math.log(2.0) / 3.0) ** 2
    shared_variance: float = math.log(10.0) ** 2
    # prediction and exceedance
    t_star: float = 20.0
    threshold: float = 60.0
    n_sim: int = 1000
    n_pts: int = 5000
    box: Optional[list] = None
    grid_size: int = 512
    # designs
    design_kind: str = "nested"
    levels: list = field(default_factory=lambda: [100.0, 50.0, 100.0 / 3.0, 25.0])
    counts: list = field(default_factory=lambda: [270, 90, 30, 10])
    dim: int = 8
    # paths
    design: Optional[str] = None
    data: Optional[str] = None
    model: Optional[str] = None
    points: Optional[str] = None
    holdout: Optional[str] = None
    inputs: Optional[list] = None
    out: str = "."

    def __post_init__(self):
        try:
            Variant.parse(self.variant)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        self.levels = [_level_value(v) for v in self.levels]
        self.counts = [int(c) for c in self.counts]
        if len(self.levels) != len(self.counts):
            raise ConfigError("levels and counts must have the same length")
        if self.design_kind not in ("nested", "lhs"):
            raise ConfigError(f"design_kind must be 'nested' or 'lhs', got {self.design_kind!r}")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(mapping) - known)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {unknown}")
        return cls(**dict(mapping))

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            doc = read_json(path)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
        doc.pop("schema_version", None)
        return cls.from_mapping(doc)

    def merged(self, overrides: Mapping[str, Any]) -> "RunConfig":
        data = asdict(self)
        data.update({k: v for k, v in overrides.items() if v is not None})
        return RunConfig.from_mapping(data)

    def to_dict(self) -> dict:
        return asdict(self)
