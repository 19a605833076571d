"""
Parameter sweeps, finite-size trends, transition detection and table output.

Config format: flat ``key=value`` tokens separated by whitespace or newlines,
``#`` starts a comment. One parameter may take ``sweep(start,stop,count)``::

    model=free_fermion d=2 lambda=sweep(0,3,121) gamma=1 dims=41,41
"""

from __future__ import annotations

import json
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .bands import build_grid
from .errors import ConfigError, InvalidDimensionError, TwistError
from .models import SSH, FreeFermion, load_table
from .twist import ILL_DEFINED_THRESHOLD, evaluate

COLUMNS = ("param", "re_z", "im_z", "abs_z", "log_abs_z", "gamma_g", "min_gap", "n_singular")
CSV_NOTE = "# gamma_g in (-pi, pi]; -pi and +pi denote the same phase; nan = ill-defined or not evaluated"

DEFAULT_DIMS = 101
Z_MINIMUM_THRESHOLD = 0.1

_KEYS = {
    "model", "d", "lambda", "gamma", "phi", "dims", "sizes", "twist_axis",
    "threshold", "format", "n_convention", "table",
}
_MODEL_PARAMS = {"free_fermion": ("lambda", "gamma"), "ssh": ("phi",), "custom": ()}
_MODEL_EXTRAS = {"free_fermion": {"d"}, "ssh": set(), "custom": {"table"}}
_SWEEP_RE = re.compile(r"^sweep\(([^,()]+),([^,()]+),([^,()]+)\)$")
_TOKEN_RE = re.compile(r"(\w+)\s*=\s*(sweep\([^)]*\)|\S+)|(\S+)")


@dataclass(frozen=True)
class SweepSpec:
    model: object
    dims: tuple[int, ...]
    param: str | None = None
    start: float | None = None
    stop: float | None = None
    count: int | None = None
    sizes: tuple[tuple[int, ...], ...] | None = None
    twist_axis: int = 0
    threshold: float = ILL_DEFINED_THRESHOLD
    fmt: str = "csv"
    n_convention: str = "total"

    @property
    def values(self) -> np.ndarray:
        if self.param is None:
            raise ConfigError("no swept parameter")
        return np.linspace(self.start, self.stop, self.count)


@dataclass
class ResultRow:
    param: float
    re_z: float
    im_z: float
    abs_z: float
    log_abs_z: float
    gamma_g: float
    min_gap: float
    n_singular: int


@dataclass
class ResultTable:
    rows: list[ResultRow] = field(default_factory=list)
    param_name: str = "param"

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def __len__(self) -> int:
        return len(self.rows)


# -----------------------------------------------------------------------------
# Config parsing
# -----------------------------------------------------------------------------

def _float(value: str, key: str, line: int) -> float:
    try:
        out = float(value)
    except ValueError:
        raise ConfigError(f"{key}: not a number: {value!r}", line) from None
    if not math.isfinite(out):
        raise ConfigError(f"{key}: must be finite", line)
    return out


def _int_list(value: str, key: str, line: int) -> tuple[int, ...]:
    try:
        out = tuple(int(v) for v in value.split(","))
    except ValueError:
        raise ConfigError(f"{key}: expected comma-separated integers, got {value!r}", line) from None
    return out


def _tokens(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        for match in _TOKEN_RE.finditer(line):
            if match.group(3) is not None:
                raise ConfigError(f"expected key=value, got {match.group(3)!r}", lineno)
            yield lineno, match.group(1), match.group(2)


def parse_config(text: str, base_dir: Path | None = None) -> SweepSpec:
    """Parse and fully validate a config; unknown keys and bad values raise :class:`ConfigError`."""
    raw: dict[str, tuple[int, str]] = {}
    for lineno, key, value in _tokens(text):
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in raw:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        raw[key] = (lineno, value)

    if "model" not in raw:
        raise ConfigError("missing key 'model'")
    model_line, model_name = raw["model"]
    if model_name not in _MODEL_PARAMS:
        raise ConfigError(f"unknown model {model_name!r}", model_line)
    allowed = set(_MODEL_PARAMS[model_name]) | _MODEL_EXTRAS[model_name]
    for key in ("lambda", "gamma", "phi", "d", "table"):
        if key in raw and key not in allowed:
            raise ConfigError(f"{key!r} does not belong to model {model_name}", raw[key][0])

    # parameters, at most one swept
    values: dict[str, float] = {}
    swept = None
    for key in _MODEL_PARAMS[model_name]:
        if key not in raw:
            raise ConfigError(f"model {model_name} needs {key!r}", model_line)
        line, text_value = raw[key]
        match = _SWEEP_RE.match(text_value.replace(" ", ""))
        if match:
            if swept is not None:
                raise ConfigError("only one parameter may be swept", line)
            start = _float(match.group(1), key, line)
            stop = _float(match.group(2), key, line)
            try:
                count = int(match.group(3))
            except ValueError:
                raise ConfigError(f"{key}: sweep count must be an integer", line) from None
            if count < 2:
                raise ConfigError(f"{key}: sweep needs at least 2 points", line)
            if not start < stop:
                raise ConfigError(f"{key}: sweep needs start < stop", line)
            swept = (key, start, stop, count, line)
            values[key] = start
        else:
            values[key] = _float(text_value, key, line)

    d = 1
    if model_name == "free_fermion" and "d" in raw:
        line, text_value = raw["d"]
        try:
            d = int(text_value)
        except ValueError:
            raise ConfigError(f"d: expected an integer, got {text_value!r}", line) from None
        if d not in (1, 2, 3):
            raise ConfigError(f"d must be 1, 2 or 3, got {d}", line)

    if "dims" in raw:
        line, text_value = raw["dims"]
        dims = _int_list(text_value, "dims", line)
        if model_name == "free_fermion" and len(dims) == 1 and d > 1:
            dims = dims * d
    elif model_name == "custom":
        raise ConfigError("custom model needs 'dims'", model_line)
    else:
        line = model_line
        dims = (DEFAULT_DIMS,) * d
    if model_name == "custom":
        d = len(dims)
    if len(dims) != d:
        raise ConfigError(f"dims has {len(dims)} entries for a {d}-dimensional model", line)
    if any(n < 2 for n in dims):
        raise ConfigError(f"every axis needs at least 2 sites, got {dims}", line)

    sizes = None
    if "sizes" in raw:
        line, text_value = raw["sizes"]
        lengths = _int_list(text_value, "sizes", line)
        if len(lengths) < 3:
            raise ConfigError("a size trend needs at least 3 sizes", line)
        if any(n < 2 for n in lengths):
            raise ConfigError("every size must be at least 2", line)
        sizes = tuple((n,) * d for n in lengths)

    # model construction and domain checks
    if model_name == "free_fermion":
        gammas = [values["gamma"]]
        if swept and swept[0] == "gamma":
            gammas = list(np.linspace(swept[1], swept[2], swept[3]))
        if any(g == 0 for g in gammas):
            raise ConfigError(
                "trivial twist: gamma = 0 makes [H, eta] = 0, so z carries no information",
                raw["gamma"][0],
            )
        model = FreeFermion(d=d, lam=values["lambda"], gamma=values["gamma"])
    elif model_name == "ssh":
        phis = [values["phi"]]
        if swept:
            phis = [swept[1], swept[2]]
        if any(not -1.0 <= p <= 1.0 for p in phis):
            raise ConfigError("phi must lie in [-1, 1]", raw["phi"][0])
        model = SSH(phi=values["phi"])
    else:
        if "table" not in raw:
            raise ConfigError("custom model needs 'table'", model_line)
        line, path_text = raw["table"]
        path = Path(path_text)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        try:
            table_text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read table: {exc}", line) from None
        model = load_table(table_text, dims)

    twist_axis = 0
    if "twist_axis" in raw:
        line, text_value = raw["twist_axis"]
        try:
            twist_axis = int(text_value) - 1
        except ValueError:
            raise ConfigError(f"twist_axis: expected an integer, got {text_value!r}", line) from None
        if not 0 <= twist_axis < d:
            raise ConfigError(f"twist_axis must be in 1..{d}", line)

    threshold = ILL_DEFINED_THRESHOLD
    if "threshold" in raw:
        line, text_value = raw["threshold"]
        threshold = _float(text_value, "threshold", line)
        if threshold < 0:
            raise ConfigError("threshold must be non-negative", line)

    fmt = "csv"
    if "format" in raw:
        line, fmt = raw["format"]
        if fmt not in ("csv", "jsonl"):
            raise ConfigError(f"format must be csv or jsonl, got {fmt!r}", line)

    n_convention = "total"
    if "n_convention" in raw:
        line, n_convention = raw["n_convention"]
        if n_convention not in ("total", "linear"):
            raise ConfigError(f"n_convention must be total or linear, got {n_convention!r}", line)

    return SweepSpec(
        model=model,
        dims=tuple(dims),
        param=swept[0] if swept else None,
        start=swept[1] if swept else None,
        stop=swept[2] if swept else None,
        count=swept[3] if swept else None,
        sizes=sizes,
        twist_axis=twist_axis,
        threshold=threshold,
        fmt=fmt,
        n_convention=n_convention,
    )


# -----------------------------------------------------------------------------
# Evaluation of rows
# -----------------------------------------------------------------------------

def _nan_row(param: float, min_gap: float, n_singular: int) -> ResultRow:
    nan = math.nan
    return ResultRow(param, nan, nan, nan, nan, nan, min_gap, n_singular)


def evaluate_row(
    model,
    dims,
    param: float,
    twist_axis: int = 0,
    threshold: float = ILL_DEFINED_THRESHOLD,
    n_convention: str = "total",
    singular: str = "nan",
) -> ResultRow:
    """
    One output row. ``singular`` decides what an on-grid singular mode does:
    ``"nan"`` blanks the row, ``"exclude"`` keeps the product over the
    regular modes, ``"strict"`` raises.
    """
    grid = build_grid(dims)
    bloch = model.bloch(grid)
    min_gap = float(np.min(np.sqrt(np.sum(bloch[:, 1:] ** 2, axis=1))))
    try:
        result = evaluate(
            model, grid, twist_axis, threshold=threshold, n_convention=n_convention,
            strict=singular == "strict",
        )
    except InvalidDimensionError:
        raise
    except TwistError:
        if singular == "strict":
            raise
        _, _, mask = model.couplings(grid, twist_axis)
        return _nan_row(param, min_gap, int(np.count_nonzero(mask)))
    n_singular = len(result.singular_modes)
    if n_singular and singular == "nan":
        return _nan_row(param, min_gap, n_singular)
    return ResultRow(
        param=param,
        re_z=result.z.real,
        im_z=result.z.imag,
        abs_z=result.abs_z,
        log_abs_z=result.log_abs_z,
        gamma_g=math.nan if result.gamma_g is None else result.gamma_g,
        min_gap=min_gap,
        n_singular=n_singular,
    )


def _sweep_job(args) -> ResultRow:
    spec, value, singular = args
    model = spec.model.with_param(spec.param, float(value))
    return evaluate_row(
        model, spec.dims, float(value), spec.twist_axis, spec.threshold, spec.n_convention, singular
    )


def _trend_job(args) -> ResultRow:
    spec, dims, singular = args
    return evaluate_row(
        spec.model, dims, float(np.prod(dims)), spec.twist_axis, spec.threshold, spec.n_convention, singular
    )


def _ordered_map(func, jobs, workers: int):
    """Map preserving input order; results never depend on ``workers``."""
    if workers <= 1 or len(jobs) <= 1:
        return [func(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def run_sweep(spec: SweepSpec, workers: int = 1, strict: bool = False) -> ResultTable:
    singular = "strict" if strict else "nan"
    jobs = [(spec, value, singular) for value in spec.values]
    return ResultTable(rows=_ordered_map(_sweep_job, jobs, workers), param_name=spec.param)


def finite_size_trend(
    spec: SweepSpec, sizes=None, workers: int = 1, strict: bool = False
) -> ResultTable:
    """
    Rows keyed by the total number of modes, in the given size order.

    Critical points put a gapless mode on every grid (k = 0 at lambda = D),
    so singular modes are left out of the product here and only counted.
    """
    sizes = sizes if sizes is not None else spec.sizes
    if sizes is None or len(sizes) < 3:
        raise ConfigError("a size trend needs at least 3 sizes")
    singular = "strict" if strict else "exclude"
    jobs = [(spec, tuple(dims), singular) for dims in sizes]
    return ResultTable(rows=_ordered_map(_trend_job, jobs, workers), param_name="total_modes")


def point_spec(model, dims, **kwargs) -> SweepSpec:
    return SweepSpec(model=model, dims=tuple(dims), **kwargs)


# -----------------------------------------------------------------------------
# Transition detection
# -----------------------------------------------------------------------------

@dataclass(frozen=True)
class Transition:
    value: float
    kind: str
    lo: float
    hi: float


def detect_transitions(table: ResultTable, z_threshold: float = Z_MINIMUM_THRESHOLD) -> list[Transition]:
    """
    Scan a sweep for

    - ``z-minimum``: interior local minimum of ``|z|`` below ``z_threshold``
      (neighbours are the nearest evaluated rows),
    - ``gamma-jump``: ``|delta gamma_g| > pi/2`` (mod 2 pi) between adjacent
      rows with a defined phase; touching jumps are merged into one bracket,
    - ``ill-defined-onset``: the first evaluated row whose phase is ill-defined.
    """
    found: list[Transition] = []
    params = table.column("param")
    abs_z = table.column("abs_z")
    gamma = table.column("gamma_g")

    evaluated = np.flatnonzero(np.isfinite(abs_z))
    for a, b, c in zip(evaluated, evaluated[1:], evaluated[2:]):
        if abs_z[b] < abs_z[a] and abs_z[b] <= abs_z[c] and abs_z[b] < z_threshold:
            found.append(Transition(float(params[b]), "z-minimum", float(params[a]), float(params[c])))

    # jumps whose brackets share a row (one intermediate point sitting
    # half-way through the jump) are one transition
    defined = np.flatnonzero(np.isfinite(gamma))
    spans: list[list[int]] = []
    for a, b in zip(defined, defined[1:]):
        if b != a + 1:
            continue
        step = math.remainder(gamma[b] - gamma[a], 2.0 * math.pi)
        if abs(step) > 0.5 * math.pi:
            if spans and spans[-1][1] == a:
                spans[-1][1] = b
            else:
                spans.append([a, b])
    for a, b in spans:
        mid = 0.5 * (params[a] + params[b])
        found.append(Transition(float(mid), "gamma-jump", float(params[a]), float(params[b])))

    ill = [i for i in evaluated if not math.isfinite(gamma[i])]
    if ill:
        i = ill[0]
        lo = float(params[i - 1]) if i > 0 else float(params[i])
        found.append(Transition(float(params[i]), "ill-defined-onset", lo, float(params[i])))

    found.sort(key=lambda t: (t.value, t.kind))
    return found


# -----------------------------------------------------------------------------
# Output
# -----------------------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return "nan"
    return format(value, ".17g")


def emit(table: ResultTable, fmt: str = "csv") -> bytes:
    """Serialise a table as CSV (17 significant digits, LF) or JSON lines."""
    if fmt == "csv":
        lines = [CSV_NOTE, ",".join(COLUMNS)]
        for row in table.rows:
            lines.append(",".join(_fmt(getattr(row, c)) for c in COLUMNS))
        return ("\n".join(lines) + "\n").encode()
    if fmt == "jsonl":
        out = []
        for row in table.rows:
            record = asdict(row)
            record["n_singular"] = int(record["n_singular"])
            out.append(json.dumps({c: record[c] for c in COLUMNS}))
        return ("\n".join(out) + "\n").encode() if out else b""
    raise ValueError(f"unknown format {fmt!r}")


def load_jsonl(data: bytes | str, param_name: str = "param") -> ResultTable:
    if isinstance(data, bytes):
        data = data.decode()
    rows = []
    for line in data.splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        kwargs = {f.name: record[f.name] for f in fields(ResultRow)}
        kwargs["n_singular"] = int(kwargs["n_singular"])
        rows.append(ResultRow(**{k: (float(v) if k != "n_singular" else v) for k, v in kwargs.items()}))
    return ResultTable(rows=rows, param_name=param_name)
