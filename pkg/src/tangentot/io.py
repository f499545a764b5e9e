"""CSV / JSON / PGM readers and writers.

Measures are stored as ``x1,...,xn,mass`` CSV with a JSON sidecar
(``<file>.json``) describing the manifold. Tangents add velocity and growth
columns; their singular part goes to ``<stem>_singular.csv``. All floats are
written with 12 significant digits so outputs are byte-stable.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .manifold import from_descriptor
from .measure import DiscreteMeasure, RasterImage
from .tangent import HkTangent, ShkTangent, W2Tangent

FMT = "%.12g"


def fmt(x) -> str:
    return FMT % float(x)


def sidecar_path(path) -> Path:
    p = Path(path)
    return p.with_suffix(p.suffix + ".json")


def singular_path(path) -> Path:
    p = Path(path)
    return p.with_name(p.stem + "_singular" + p.suffix)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return float(fmt(x)) if np.isfinite(x) else None
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_json(path, data) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(_jsonable(data), f, indent=2, sort_keys=True)
        f.write("\n")


def read_json(path) -> dict:
    try:
        with open(path) as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInputError(f"cannot read JSON {path}: {exc}") from exc


def write_table(path, header, rows) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    rows = np.atleast_2d(np.asarray(rows, dtype=float)) if len(rows) else np.zeros((0, len(header)))
    with open(path, "w", newline="") as f:
        f.write(",".join(header) + "\n")
        for r in rows:
            f.write(",".join(fmt(x) for x in r) + "\n")


def read_table(path):
    """Read a numeric CSV with a header row. Returns (header, array)."""
    try:
        with open(path, newline="") as f:
            rd = csv.reader(f)
            header = [h.strip() for h in next(rd)]
            data = [[float(x) for x in row] for row in rd if row and any(c.strip() for c in row)]
    except StopIteration:
        raise InvalidInputError(f"{path}: empty file") from None
    except (OSError, ValueError) as exc:
        raise InvalidInputError(f"cannot parse {path}: {exc}") from exc
    arr = np.asarray(data, dtype=float).reshape(-1, len(header))
    return header, arr


# ---------------------------------------------------------------------------
# measures

def write_measure(path, mu: DiscreteMeasure) -> None:
    n = mu.points.shape[1]
    header = [f"x{i + 1}" for i in range(n)] + ["mass"]
    write_table(path, header, np.column_stack([mu.points, mu.masses]))
    write_json(sidecar_path(path), mu.manifold.descriptor())


def read_measure(path, descriptor: dict | None = None) -> DiscreteMeasure:
    header, arr = read_table(path)
    if not header or header[-1] != "mass":
        raise InvalidInputError(f"{path}: last column must be 'mass'")
    n = len(header) - 1
    if descriptor is None:
        sc = sidecar_path(path)
        descriptor = read_json(sc) if sc.exists() else {"manifold": "euclidean", "dim": n}
    if int(descriptor.get("dim", n)) != n:
        raise InvalidInputError(f"{path}: sidecar dim {descriptor.get('dim')} != {n} columns")
    return DiscreteMeasure(from_descriptor(descriptor), arr[:, :n], arr[:, n])


# ---------------------------------------------------------------------------
# tangents

def write_tangent(path, t, metric: str, kappa: float | None = None) -> None:
    ref = t.reference
    n = ref.points.shape[1]
    alpha = getattr(t, "alpha", None)
    alpha = np.zeros(len(ref)) if alpha is None else alpha
    header = ([f"x{i + 1}" for i in range(n)] + ["mass"] + [f"v{i + 1}" for i in range(n)]
              + ["alpha"])
    write_table(path, header, np.column_stack([ref.points, ref.masses, t.v, alpha]))
    sing = getattr(t, "singular", None)
    if sing is not None:
        write_table(singular_path(path), header[:n + 1],
                    np.column_stack([sing.points, sing.masses]) if len(sing) else [])
    side = dict(ref.manifold.descriptor())
    side.update({"metric": metric, "kappa": kappa})
    if isinstance(t, ShkTangent):
        side["s_prime"] = t.s_prime
    write_json(sidecar_path(path), side)


def read_tangent(path):
    """Read a tangent file. Returns (tangent, sidecar dict)."""
    side = read_json(sidecar_path(path))
    header, arr = read_table(path)
    n = (len(header) - 2) // 2
    if len(header) != 2 * n + 2 or header[n] != "mass" or header[-1] != "alpha":
        raise InvalidInputError(f"{path}: expected columns x1..xn,mass,v1..vn,alpha")
    m = from_descriptor(side)
    ref = DiscreteMeasure(m, arr[:, :n], arr[:, n])
    v = arr[:, n + 1:2 * n + 1]
    alpha = arr[:, -1]
    metric = str(side.get("metric", "w2")).lower()
    if metric == "w2":
        return W2Tangent(ref, v), side
    sp = singular_path(path)
    sing = None
    if sp.exists():
        _, s = read_table(sp)
        sing = DiscreteMeasure(m, s[:, :n].reshape(-1, n), s[:, n]) if len(s) else DiscreteMeasure.empty(m)
    if metric == "hk":
        return HkTangent(ref, v, alpha, sing), side
    if metric == "shk":
        return ShkTangent(ref, v, alpha, sing, s_prime=float(side.get("s_prime", 1.0))), side
    raise InvalidInputError(f"{path}: unknown metric {metric!r}")


# ---------------------------------------------------------------------------
# plans, potentials, rasters, reports

def write_plan(path, plan) -> None:
    P = np.asarray(getattr(plan, "matrix", plan))
    write_table(path, [f"j{j}" for j in range(P.shape[1])], P)


def read_plan(path) -> np.ndarray:
    return read_table(path)[1]


def write_potentials(path0, path1, pot) -> None:
    write_table(path0, ["phi0"], np.asarray(pot.phi0)[:, None])
    write_table(path1, ["phi1"], np.asarray(pot.phi1)[:, None])


def write_pgm(path, img: RasterImage) -> None:
    """Plain PGM (P2), values scaled so the maximum maps to 65535.

    Row 0 of the file is the top of the image (largest second coordinate).
    """
    V = np.asarray(img.values, dtype=float)
    if V.ndim == 1:
        V = V[None, :]
    else:
        V = V.T[::-1]
    vmax = V.max() if V.size else 0.0
    Q = np.zeros_like(V, dtype=np.int64) if vmax <= 0 else np.rint(V / vmax * 65535).astype(np.int64)
    h, w = Q.shape
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        f.write(f"P2\n{w} {h}\n65535\n")
        for row in Q:
            f.write(" ".join(str(int(q)) for q in row) + "\n")


def read_pgm(path) -> np.ndarray:
    tok = []
    with open(path) as f:
        for line in f:
            line = line.split("#", 1)[0]
            tok.extend(line.split())
    if not tok or tok[0] != "P2":
        raise InvalidInputError(f"{path}: not a plain PGM")
    w, h, _ = int(tok[1]), int(tok[2]), int(tok[3])
    return np.asarray(tok[4:4 + w * h], dtype=np.int64).reshape(h, w)


def write_raster(stem, img: RasterImage) -> None:
    """``<stem>.pgm`` plus ``<stem>.csv`` holding the raw values."""
    stem = Path(stem)
    write_pgm(stem.with_suffix(".pgm"), img)
    V = np.asarray(img.values, dtype=float)
    V = V[None, :] if V.ndim == 1 else V
    write_table(stem.with_suffix(".csv"), [f"c{j}" for j in range(V.shape[1])], V)


def write_series(path, series: dict) -> None:
    """Write equal-length series as CSV columns (non-tabular entries skipped)."""
    cols = {k: v for k, v in series.items() if np.ndim(v) == 1}
    lens = {len(v) for v in cols.values()}
    if len(lens) > 1:
        n = max(lens, key=lambda L: sum(len(v) == L for v in cols.values()))
        cols = {k: v for k, v in cols.items() if len(v) == n}
    keys = list(cols)
    rows = np.column_stack([np.asarray(cols[k], float) for k in keys]) if keys else []
    write_table(path, keys, rows)


def write_report(outdir, report) -> None:
    """StudyReport: ``<name>.csv`` with the series and ``<name>.json`` summary."""
    outdir = Path(outdir)
    write_series(outdir / f"{report.name}.csv", report.series)
    summary = report.summary()
    summary["passed"] = report.passed
    summary["series"] = report.series
    write_json(outdir / f"{report.name}.json", summary)
