"""Convergence traces and their on-disk CSV form.

A Trace is a header (flat string key/values: problem config, solver
config, seed, library version, run status) plus one record per solver
iteration. The CSV body is deterministic: floats are written with
shortest round-trip decimals (repr) and per-row wall-clock times are kept
in memory only, so re-running a seeded experiment reproduces the file
byte for byte. Wall totals belong in the run manifest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["TraceRecord", "Trace", "new_trace", "write_trace_csv",
           "read_trace_csv", "emit_plot_data", "snr_db"]

_MAGIC = "sesopt-trace v1"
_BASE_COLUMNS = ("iter", "cum_steps", "f_value", "f_minus_fopt", "stat_norm",
                 "matvecs", "hvps")


@dataclass
class TraceRecord:
    iter: int
    cum_steps: int
    f_value: float
    f_minus_fopt: float | None
    stat_norm: float
    matvecs: int
    hvps: int
    wall_ms: float = 0.0
    aux: float | None = None


@dataclass
class Trace:
    header: dict = field(default_factory=dict)
    records: list = field(default_factory=list)
    aux_name: str | None = None

    def add(self, **kw):
        self.records.append(TraceRecord(**kw))

    def column(self, name):
        vals = [getattr(rec, name) for rec in self.records]
        if name in ("iter", "cum_steps", "matvecs", "hvps"):
            return np.asarray(vals, dtype=np.int64)
        return np.asarray([math.nan if v is None else v for v in vals])

    @property
    def final(self):
        return self.records[-1]

    def __len__(self):
        return len(self.records)


def _fmt(v):
    if v is None:
        return "nan"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def new_trace(obj, solver_desc):
    """Trace with the standard header for a solver run on an objective.

    The problem line comes from the objective's attached spec when one
    exists so that traces of the same problem are directly comparable.
    """
    from ._version import __version__

    spec = getattr(obj, "spec", None)
    if spec is not None:
        problem = spec.to_config()
        seed = str(spec.seed)
    else:
        problem = f"kind=custom,n={getattr(obj, 'dim', 0)}"
        seed = "0"
    return Trace(header={"problem": problem, "solver": solver_desc,
                         "seed": seed, "version": __version__})


def write_trace_csv(trace, path, include_wall=False):
    """Serialize a trace; the default body is deterministic (no wall times)."""
    cols = list(_BASE_COLUMNS)
    if include_wall:
        cols.append("wall_ms")
    if trace.aux_name is not None:
        cols.append(f"aux:{trace.aux_name}")
    lines = [f"# {_MAGIC}"]
    for k in sorted(trace.header):
        lines.append(f"# {k}={trace.header[k]}")
    lines.append("# columns: " + ",".join(cols))
    for rec in trace.records:
        row = [str(rec.iter), str(rec.cum_steps), _fmt(rec.f_value),
               _fmt(rec.f_minus_fopt), _fmt(rec.stat_norm),
               str(rec.matvecs), str(rec.hvps)]
        if include_wall:
            row.append(_fmt(rec.wall_ms))
        if trace.aux_name is not None:
            row.append(_fmt(rec.aux))
        lines.append(",".join(row))
    text = "\n".join(lines) + "\n"
    with open(path, "w") as fh:
        fh.write(text)
    return text


def read_trace_csv(path):
    """Inverse of write_trace_csv."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != f"# {_MAGIC}":
        raise ValueError(f"{path}: not a trace file")
    header, cols, body = {}, None, []
    for ln in lines[1:]:
        if ln.startswith("# columns: "):
            cols = ln[len("# columns: "):].split(",")
        elif ln.startswith("# "):
            k, _, v = ln[2:].partition("=")
            header[k] = v
        elif ln:
            body.append(ln.split(","))
    if cols is None:
        raise ValueError(f"{path}: missing columns header")
    aux_name = None
    for c in cols:
        if c.startswith("aux:"):
            aux_name = c[4:]
    trace = Trace(header=header, aux_name=aux_name)
    idx = {c: i for i, c in enumerate(cols)}
    for parts in body:
        def fval(col, cast=float):
            return cast(parts[idx[col]]) if col in idx else None
        fmf = fval("f_minus_fopt")
        if fmf is not None and math.isnan(fmf):
            fmf = None
        aux = fval(f"aux:{aux_name}") if aux_name else None
        if aux is not None and math.isnan(aux):
            aux = None
        trace.add(iter=int(parts[idx["iter"]]),
                  cum_steps=int(parts[idx["cum_steps"]]),
                  f_value=float(parts[idx["f_value"]]),
                  f_minus_fopt=fmf,
                  stat_norm=float(parts[idx["stat_norm"]]),
                  matvecs=int(parts[idx["matvecs"]]),
                  hvps=int(parts[idx["hvps"]]),
                  wall_ms=fval("wall_ms") or 0.0,
                  aux=aux)
    return trace


_AXES = {"iter": "iter", "matvecs": "matvecs", "cum_cg": "cum_steps",
         "cum_steps": "cum_steps", "wall_ms": "wall_ms"}


def emit_plot_data(traces, axis, value="f_value", labels=None):
    """Tab-separated step-interpolated table aligning several traces.

    The first column is the union of the axis breakpoints across traces;
    each trace contributes its latest value at-or-before the breakpoint
    (step interpolation), blank before its first record. All traces must
    describe the same problem or ValueError("incomparable traces") is
    raised.
    """
    if axis not in _AXES:
        raise ValueError(f"unknown axis {axis!r}; choose from {sorted(_AXES)}")
    col = _AXES[axis]
    problems = {t.header.get("problem") for t in traces}
    if len(problems) > 1:
        raise ValueError("incomparable traces")
    if labels is None:
        labels = [t.header.get("solver", f"trace{i}") for i, t in enumerate(traces)]

    axes = [t.column(col) for t in traces]
    vals = [t.column(value if value != "aux" else "aux") for t in traces]
    breakpoints = np.unique(np.concatenate(axes))
    lines = [axis + "\t" + "\t".join(labels)]
    for bp in breakpoints:
        row = [_fmt(bp) if col == "wall_ms" else str(int(bp))]
        for ax, vv in zip(axes, vals):
            j = int(np.searchsorted(ax, bp, side="right")) - 1
            row.append("" if j < 0 else _fmt(vv[j]))
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"


def snr_db(x_true, x):
    """Recovery signal-to-noise ratio 10 log10(||x_true||^2 / ||x - x_true||^2)."""
    err = float(np.linalg.norm(np.asarray(x) - np.asarray(x_true)) ** 2)
    sig = float(np.linalg.norm(np.asarray(x_true)) ** 2)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(sig / err)
