"""Command-line front end: YAML job files in, CSV/JSON tables out.

Usage::

    layerqm bound-states --config job.yaml --out eps.csv
    layerqm xi-scan --config job.yaml --format json --no-timestamp

A job file looks like::

    mode: bound-states
    layer: {d: 3.141592653589793}        # optional; add B for the field
    perturbations:
      - {a: [0, 0], b: 0.5235987755982988, alpha: 0.0}
    scan: {start: -3, stop: 3, count: 61}
    output: {path: eps.csv, format: csv}
    options: {independent: true}
"""

import argparse
from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import dataclass, field
import datetime
import io
import json
import math
import sys

import numpy as np
import yaml

from . import __version__
from .errors import ConfigurationError, DomainError, LayerQMError
from .layer_green import LayerConfig, Perturbation, check_transverse, xi
from .magnetic import (MagneticConfig, empty_alpha_intervals, eigenfunction_B,
                       gap_eigenvalues_multi, gaps, krein_matrix_B)
from .scattering import smatrix_single, soperator_N
from .spectrum_multi import eigenfunction_N, find_eigenvalues
from .spectrum_single import solve_bound_state

MODES = ("xi-scan", "bound-states", "smatrix", "magnetic-gaps", "eigenfunction-grid")
FORMATS = ("csv", "json")
EXIT_OK, EXIT_CONFIG, EXIT_DOMAIN = 0, 2, 3
TOLERANCES = {"xi_residual": 1e-11, "merge": 1e-8, "null_residual": 1e-9,
              "threshold_guard": 1e-9}


@dataclass
class ScanSpec:
    start: float
    stop: float
    count: int

    def values(self):
        return np.linspace(self.start, self.stop, self.count)


@dataclass
class JobConfig:
    """A validated job."""

    mode: str
    layer: object
    perturbations: list
    scan: ScanSpec = None
    output_path: str = None
    output_format: str = "csv"
    options: dict = field(default_factory=dict)
    document: dict = field(default_factory=dict)

    @property
    def magnetic(self):
        return isinstance(self.layer, MagneticConfig)

    @property
    def layer_cfg(self):
        return self.layer.layer if self.magnetic else self.layer


@dataclass
class ResultTable:
    """Rectangular table of floats with metadata."""

    columns: list
    rows: list
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for r in self.rows:
            if len(r) != len(self.columns):
                raise ValueError("ragged table row")

    def column(self, name):
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)


def _num(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        if isinstance(value, str) and value.strip().lower() in ("inf", "+inf", ".inf"):
            return math.inf
        raise ConfigurationError(f"{where}: expected a number, got {value!r}")
    return float(value)


def parse_config(text):
    """Parse and validate a YAML job document.

    Raises
    ------
    ConfigurationError
        On malformed YAML (with line information), unknown modes or keys,
        or physically invalid fields (the message names the field).
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = f"line {mark.line + 1}, column {mark.column + 1}: " if mark else ""
        raise ConfigurationError(f"{line}{exc.problem or exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigurationError(str(exc)) from None
    if not isinstance(doc, dict):
        raise ConfigurationError("job document must be a mapping")
    known = {"mode", "layer", "perturbations", "scan", "output", "options"}
    extra = set(doc) - known
    if extra:
        raise ConfigurationError(f"unknown keys: {sorted(extra)}")

    mode = doc.get("mode")
    if mode not in MODES:
        raise ConfigurationError(f"mode: unknown mode {mode!r}; choose from {MODES}")

    lay = doc.get("layer") or {}
    if not isinstance(lay, dict):
        raise ConfigurationError("layer: expected a mapping")
    try:
        d = _num(lay.get("d", math.pi), "layer.d")
        if "B" in lay:
            layer = MagneticConfig(_num(lay["B"], "layer.B"), d)
        else:
            layer = LayerConfig(d)
    except DomainError as exc:
        raise ConfigurationError(f"layer: {exc}") from None
    if mode == "magnetic-gaps" and not isinstance(layer, MagneticConfig):
        raise ConfigurationError("layer.B: required for magnetic-gaps")
    if mode in ("xi-scan", "bound-states", "smatrix") and isinstance(layer, MagneticConfig):
        raise ConfigurationError(f"layer.B: not supported by {mode}")
    lcfg = layer.layer if isinstance(layer, MagneticConfig) else layer

    raw = doc.get("perturbations")
    if not isinstance(raw, list) or not raw:
        raise ConfigurationError("perturbations: expected a non-empty list")
    perts = []
    for i, p in enumerate(raw):
        where = f"perturbations[{i}]"
        if not isinstance(p, dict):
            raise ConfigurationError(f"{where}: expected a mapping")
        a = p.get("a", [0.0, 0.0])
        if not isinstance(a, list) or len(a) != 2:
            raise ConfigurationError(f"{where}.a: expected two numbers")
        a = [_num(v, f"{where}.a") for v in a]
        b = _num(p.get("b", lcfg.d / 2), f"{where}.b")
        alpha = _num(p.get("alpha", 0.0), f"{where}.alpha")
        try:
            check_transverse(b, lcfg, name=f"{where}.b")
            perts.append(Perturbation(tuple(a), b, alpha))
        except DomainError as exc:
            raise ConfigurationError(str(exc) if where in str(exc)
                                     else f"{where}: {exc}") from None

    scan = None
    if doc.get("scan") is not None:
        s = doc["scan"]
        if not isinstance(s, dict):
            raise ConfigurationError("scan: expected a mapping")
        try:
            count = s["count"]
            scan = ScanSpec(_num(s["start"], "scan.start"), _num(s["stop"], "scan.stop"),
                            int(count))
        except KeyError as exc:
            raise ConfigurationError(f"scan: missing {exc.args[0]}") from None
        if isinstance(count, bool) or not isinstance(count, int) or count < 2:
            raise ConfigurationError("scan.count: must be an integer >= 2")
    elif mode in ("xi-scan", "bound-states", "smatrix"):
        raise ConfigurationError(f"scan: required for {mode}")

    out = doc.get("output") or {}
    fmt = out.get("format", "csv")
    if fmt not in FORMATS:
        raise ConfigurationError(f"output.format: must be one of {FORMATS}")
    opts = doc.get("options") or {}
    if not isinstance(opts, dict):
        raise ConfigurationError("options: expected a mapping")
    return JobConfig(mode, layer, perts, scan, out.get("path"), fmt, opts, doc)


def _xi_row(args):
    job, z = args
    row = [z]
    for p in job.perturbations:
        v = complex(xi(p.b, z, job.layer))
        row += [v.real, v.imag]
    return row


def _bound_row(args):
    job, alpha = args
    n = len(job.perturbations)
    if job.options.get("independent", False):
        found = []
        for p in job.perturbations:
            bs = solve_bound_state(p.with_alpha(alpha), job.layer)
            found.append((bs.eps, bs.log_gap))
    else:
        res = find_eigenvalues([p.with_alpha(alpha) for p in job.perturbations],
                               job.layer, grid=0)
        found = [(z, u) for (z, m), u in zip(res.eigenvalues, res.log_gaps)
                 for _ in range(m)]
    found += [(math.nan, math.nan)] * (n - len(found))
    return [alpha] + [e for e, _ in found] + [u for _, u in found]


def _smatrix_row(args):
    job, z, nmax = args
    perts = job.perturbations
    if len(perts) == 1:
        s = smatrix_single(z, perts[0], job.layer).matrix
        q = s.shape[0]
        row = [z, q]
        for i in range(nmax):
            for j in range(nmax):
                v = s[i, j] if i < q and j < q else complex(math.nan, math.nan)
                row += [v.real, v.imag]
        return row
    points = int(job.options.get("quadrature", 256))
    op = soperator_N(z, perts, job.layer)
    return [z, op.basis.open_count, op.unitarity_defect(points)]


def _map(fn, items, jobs):
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def _run_xi(job, jobs):
    cols = ["z"]
    for j in range(len(job.perturbations)):
        cols += [f"xi_re_{j + 1}", f"xi_im_{j + 1}"]
    rows = _map(_xi_row, [(job, float(z)) for z in job.scan.values()], jobs)
    return cols, rows, {}


def _run_bound(job, jobs):
    n = len(job.perturbations)
    cols = (["alpha"] + [f"eps_{j + 1}" for j in range(n)]
            + [f"log_gap_{j + 1}" for j in range(n)])
    rows = _map(_bound_row, [(job, float(a)) for a in job.scan.values()], jobs)
    return cols, rows, {"independent": bool(job.options.get("independent", False))}


def _run_smatrix(job, jobs):
    zs = [float(z) for z in job.scan.values()]
    if len(job.perturbations) == 1:
        nmax = int(math.floor(job.layer.d * math.sqrt(max(zs)) / math.pi))
        cols = ["z", "open_channels"]
        for i in range(1, nmax + 1):
            for j in range(1, nmax + 1):
                cols += [f"S_re_{i}_{j}", f"S_im_{i}_{j}"]
    else:
        nmax = 0
        cols = ["z", "open_channels", "unitarity_defect"]
    rows = _map(_smatrix_row, [(job, z, nmax) for z in zs], jobs)
    return cols, rows, {}


def _run_magnetic(job, jobs):
    cfg = job.layer
    perts = job.perturbations
    if job.scan is not None:
        # M = -Lambda_B branch traces over a z grid inside one gap
        zs = job.scan.values()
        cols = ["z"] + [f"m_{j + 1}" for j in range(len(perts))]
        rows = [[float(z)] + list(np.linalg.eigvalsh(-krein_matrix_B(perts, z, cfg)))
                for z in zs]
        meta = {}
        gap = next((g for g in gaps(cfg, int(job.options.get("gaps", 8)))
                    if g.left <= job.scan.start and job.scan.stop <= g.right), None)
        if gap is not None and gap.left > -math.inf:
            meta["gap"] = [gap.left, gap.right]
            meta["empty_alpha_intervals"] = [list(iv) for iv in
                                             empty_alpha_intervals(perts, gap, cfg)]
        return cols, rows, meta
    cols = ["gap", "left", "right", "eigenvalue", "multiplicity"]
    rows = []
    for g in gaps(cfg, int(job.options.get("gaps", 4))):
        res = gap_eigenvalues_multi(perts, g, cfg)
        if not res.eigenvalues:
            rows.append([g.index, g.left, g.right, math.nan, 0])
        for z, m in res.eigenvalues:
            rows.append([g.index, g.left, g.right, z, m])
    return cols, rows, {}


def _run_eigenfunction(job, jobs):
    opts = job.options
    lcfg = job.layer_cfg
    which = int(opts.get("eigenvalue", 0))
    x2 = float(opts.get("x2", 0.0))
    xs = (job.scan.values() if job.scan is not None
          else np.linspace(-3.0, 3.0, 61))
    ys = np.linspace(0.0, lcfg.d, int(opts.get("y_count", 33)))
    perts = job.perturbations
    if job.magnetic:
        g = gaps(job.layer, int(opts.get("gap", 0)) + 1)[-1]
        res = gap_eigenvalues_multi(perts, g, job.layer)
        if which >= len(res.eigenvalues):
            raise DomainError(f"gap {g.index} has no eigenvalue #{which}")
        z = res.eigenvalues[which][0]
        dvec = res.eigenvectors[which][:, 0]
        f = lambda p: eigenfunction_B(p, z, perts, dvec, job.layer)
    else:
        res = find_eigenvalues(perts, lcfg, grid=0)
        if which >= len(res.eigenvalues):
            raise DomainError(f"no eigenvalue #{which} below the threshold")
        z = res.eigenvalues[which][0]
        E = res.energy(which)
        dvec = res.eigenvectors[which][:, 0]
        normalized = bool(opts.get("normalized", True))
        f = lambda p: eigenfunction_N(p, E, dvec, res.perturbations, lcfg, normalized)
    points = {p.point for p in perts}
    rows = []
    for x in xs:
        for y in ys:
            pt = (float(x), x2, float(y))
            v = complex(math.nan, math.nan) if pt in points else complex(f(pt))
            rows.append([pt[0], float(y), v.real, v.imag])
    return ["x1", "y", "psi_re", "psi_im"], rows, {"eigenvalue": z, "x2": x2}


_RUNNERS = {"xi-scan": _run_xi, "bound-states": _run_bound, "smatrix": _run_smatrix,
            "magnetic-gaps": _run_magnetic, "eigenfunction-grid": _run_eigenfunction}


def run_job(job, timestamp=True, jobs=1):
    """Run a job and return its ResultTable.

    Domain errors are re-raised with the mode name prepended.
    """
    try:
        cols, rows, extra = _RUNNERS[job.mode](job, jobs)
    except DomainError as exc:
        raise type(exc)(f"{job.mode}: {exc}") from exc
    meta = {"mode": job.mode, "version": __version__, "config": job.document,
            "tolerances": TOLERANCES}
    meta.update(extra)
    if timestamp:
        meta["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    rows = [[float(v) for v in r] for r in rows]
    return ResultTable(cols, rows, meta)


def _fmt(v):
    return format(v, ".17g")


def emit(table, fmt="csv"):
    """Serialize a table to bytes (csv with '#' metadata preamble, or json)."""
    if fmt == "json":
        rows = [[None if math.isnan(v) else v for v in r] for r in table.rows]
        doc = {"metadata": table.metadata, "columns": table.columns, "rows": rows}
        return (json.dumps(doc, indent=1, sort_keys=True, allow_nan=False) + "\n").encode()
    if fmt != "csv":
        raise ConfigurationError(f"unknown format {fmt!r}")
    buf = io.StringIO()
    for key in sorted(table.metadata):
        buf.write(f"# {key}: {json.dumps(table.metadata[key], sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for r in table.rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue().encode()


def read_table(data, fmt="csv"):
    """Inverse of ``emit``."""
    text = data.decode() if isinstance(data, bytes) else data
    if fmt == "json":
        doc = json.loads(text)
        rows = [[math.nan if v is None else float(v) for v in r] for r in doc["rows"]]
        return ResultTable(doc["columns"], rows, doc["metadata"])
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, val = line[2:].partition(": ")
            meta[key] = json.loads(val)
        elif line:
            body.append(line)
    rd = list(csv.reader(body))
    return ResultTable(rd[0], [[float(v) for v in r] for r in rd[1:]], meta)


def main(argv=None):
    ap = argparse.ArgumentParser(prog="layerqm",
                                 description="Point interactions in a quantum layer.")
    ap.add_argument("mode", choices=MODES)
    ap.add_argument("--config", required=True, help="YAML job file")
    ap.add_argument("--out", default=None, help="output path (default: job file or stdout)")
    ap.add_argument("--format", choices=FORMATS, default=None)
    ap.add_argument("--no-timestamp", action="store_true",
                    help="omit the timestamp so output is byte-reproducible")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes for scans")
    args = ap.parse_args(argv)

    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"layerqm: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        job = parse_config(text)
        if job.mode != args.mode:
            raise ConfigurationError(f"mode: file says {job.mode!r}, command says {args.mode!r}")
    except ConfigurationError as exc:
        print(f"layerqm: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        table = run_job(job, timestamp=not args.no_timestamp, jobs=args.jobs)
    except (LayerQMError, ArithmeticError, ValueError) as exc:
        print(f"layerqm: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    fmt = args.format or job.output_format
    payload = emit(table, fmt)
    path = args.out or job.output_path
    if path:
        with open(path, "wb") as fh:
            fh.write(payload)
    else:
        sys.stdout.buffer.write(payload)
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
