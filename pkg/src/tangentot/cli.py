"""Command-line front end.

Every command accepts ``--config FILE`` (JSON); explicit flags override the
file. When ``--out`` names a directory, the resolved configuration is
written there as ``config.json``.

Exit codes: 0 success, 2 invalid input, 3 non-convergence, 4 unsupported.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .analysis import (Metric, convexity_probe, embed_samples, exp_map, kappa_study, log_map,
                       pca, refinement_study, shoot, symmetric_configuration)
from .errors import InvalidInputError, TangentOTError
from .manifold import from_descriptor
from .measure import (DiscreteMeasure, GridSpec, chart_coords, disk_box_reference,
                      disk_line_reference, gen_disk_box, gen_disk_line, gen_sphere_caps)
from .solver import SolverConfig, duality_gap_hk, solve_hk, solve_w2
from .tangent import geodesic_hk, geodesic_shk, shk_distance

log = logging.getLogger("tangentot")

SOLVER_KEYS = ("epsilon_target", "epsilon_scaling_factor", "max_iters", "marginal_tol",
               "check_every", "newton_every", "newton_max_size")


# ---------------------------------------------------------------------------
# configuration

def _floats(text):
    if text is None or isinstance(text, (list, tuple)):
        return text
    return [float(x) for x in str(text).replace(";", ",").split(",") if x.strip()]


def _ints(text):
    v = _floats(text)
    return None if v is None else [int(x) for x in v]


def resolve_config(args, need_kappa: bool = True) -> dict:
    """Merge the JSON config with explicit command-line flags."""
    cfg = {}
    if getattr(args, "config", None):
        cfg.update(io.read_json(args.config))
    for k, v in vars(args).items():
        if k in ("config", "func", "command") or v is None:
            continue
        cfg[k] = v
    metric = str(cfg.get("metric", "hk")).lower()
    if metric not in ("w2", "hk", "shk"):
        raise InvalidInputError(f"unknown metric {metric!r}")
    cfg["metric"] = metric
    if need_kappa and metric in ("hk", "shk") and cfg.get("kappa") is None:
        raise InvalidInputError(f"metric {metric} needs --kappa")
    if metric == "w2":
        cfg.pop("kappa", None)
    return cfg


def solver_config(cfg: dict) -> SolverConfig:
    d = {k: cfg[k] for k in SOLVER_KEYS if cfg.get(k) is not None}
    if cfg.get("kappa") is not None:
        d["kappa"] = float(cfg["kappa"])
    return SolverConfig.from_dict(d)


def metric_of(cfg) -> Metric:
    return Metric.parse(cfg["metric"], cfg.get("kappa"))


def _echo(cfg, outdir):
    if outdir is None:
        return
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_json(out / "config.json", cfg)


def _emit(data: dict):
    print(json.dumps(io._jsonable(data), indent=2, sort_keys=True))


def _load(path, cfg):
    mu = io.read_measure(path)
    if cfg.get("normalize"):
        mu = mu.normalize()
    return mu


def _solve(metric: Metric, mu0, mu1, scfg):
    if metric.kind == "w2":
        return solve_w2(mu0, mu1, scfg)
    return solve_hk(mu0, mu1, metric.kappa, scfg)


# ---------------------------------------------------------------------------
# commands

def cmd_dist(args):
    cfg = resolve_config(args)
    _echo(cfg, cfg.get("out"))
    mu0, mu1 = _load(cfg["mu0"], cfg), _load(cfg["mu1"], cfg)
    metric = metric_of(cfg)
    if metric.kind == "shk":
        for mu in (mu0, mu1):
            if abs(mu.total_mass - 1) > 1e-6:
                raise InvalidInputError("shk needs probability measures (use --normalize)")
    plan, pot = _solve(metric, mu0, mu1, solver_config(cfg))
    rep = {"metric": metric.kind, "kappa": metric.kappa, "iterations": plan.iterations,
           "epsilon": plan.epsilon, "residual": plan.residual}
    if metric.kind == "w2":
        rep["distance_sq"] = plan.value
        rep["distance"] = float(np.sqrt(max(plan.value, 0.0)))
    else:
        hk2 = plan.value
        rep["hk_sq"] = hk2
        rep["duality_gap"] = duality_gap_hk(plan, pot, mu0, mu1, metric.kappa)
        if metric.kind == "hk":
            rep["distance_sq"], rep["distance"] = hk2, float(np.sqrt(max(hk2, 0.0)))
        else:
            # entropic bias may push HK^2 slightly past 2 kappa^2
            lim = 2.0 * metric.kappa ** 2
            slack = 10.0 * plan.epsilon * (mu0.total_mass + mu1.total_mass)
            s = shk_distance(lim if lim < hk2 <= lim + slack else hk2, metric.kappa)
            rep["distance_sq"], rep["distance"] = s * s, s
    if cfg.get("out"):
        io.write_json(Path(cfg["out"]) / "dist.json", rep)
        if cfg.get("save_plan"):
            io.write_plan(Path(cfg["out"]) / "plan.csv", plan)
            io.write_potentials(Path(cfg["out"]) / "phi0.csv", Path(cfg["out"]) / "phi1.csv", pot)
    _emit(rep)
    return 0


def cmd_log(args):
    cfg = resolve_config(args)
    out = Path(cfg["out"])
    _echo(cfg, out.parent)
    mu0, mu1 = _load(cfg["mu0"], cfg), _load(cfg["mu1"], cfg)
    metric = metric_of(cfg)
    plan, _ = _solve(metric, mu0, mu1, solver_config(cfg))
    t = log_map(mu0, plan, metric)
    io.write_tangent(out, t, metric.kind, metric.kappa)
    _emit({"tangent": str(out), "iterations": plan.iterations, "epsilon": plan.epsilon})
    return 0


def cmd_exp(args):
    cfg = resolve_config_tangent(args)
    t, side = io.read_tangent(cfg["tangent"])
    metric = Metric.parse(side.get("metric", "w2"), side.get("kappa"))
    mu = exp_map(t.reference, t, metric)
    out = Path(cfg["out"])
    _echo(cfg, out.parent)
    io.write_measure(out, mu)
    _emit({"measure": str(out), "mass": mu.total_mass, "atoms": len(mu)})
    return 0


def resolve_config_tangent(args) -> dict:
    cfg = {}
    if getattr(args, "config", None):
        cfg.update(io.read_json(args.config))
    cfg.update({k: v for k, v in vars(args).items()
                if v is not None and k not in ("config", "func", "command")})
    return cfg


def cmd_geodesic(args):
    cfg = resolve_config(args)
    out = Path(cfg["out"])
    _echo(cfg, out)
    mu0, mu1 = _load(cfg["mu0"], cfg), _load(cfg["mu1"], cfg)
    metric = metric_of(cfg)
    plan, _ = _solve(metric, mu0, mu1, solver_config(cfg))
    t = log_map(mu0, plan, metric)
    times = _floats(cfg.get("times")) or [0.0, 0.25, 0.5, 0.75, 1.0]
    rows = []
    for k, s in enumerate(times):
        if metric.kind == "w2":
            mu = exp_map(mu0, t.combine(float(s), t, 0.0), metric)
        elif metric.kind == "hk":
            mu = geodesic_hk(mu0, t, float(s), metric.kappa)
        else:
            mu = geodesic_shk(mu0, t, float(s), metric.kappa)
        io.write_measure(out / f"geodesic_{k:03d}.csv", mu)
        rows.append([s, mu.total_mass])
    io.write_table(out / "times.csv", ["t", "mass"], rows)
    _emit({"outputs": len(times), "masses": [r[1] for r in rows]})
    return 0


def _samples(cfg):
    d = Path(cfg["samples"])
    if not d.is_dir():
        raise InvalidInputError(f"{d} is not a directory")
    ref_path = Path(cfg.get("reference") or d / "reference.csv")
    files = sorted(p for p in d.glob("sample_*.csv"))
    if len(files) < 2:
        raise InvalidInputError("need at least two sample_*.csv files")
    ref = _load(ref_path, cfg)
    return ref, [_load(p, cfg) for p in files]


def _run_pca(cfg):
    ref, samples = _samples(cfg)
    metric = metric_of(cfg)
    emb = embed_samples(ref, samples, metric, solver_config(cfg),
                        workers=int(cfg.get("workers") or 1))
    return emb, pca(emb), samples


def cmd_pca(args):
    cfg = resolve_config(args)
    out = Path(cfg["out"])
    _echo(cfg, out)
    emb, res, _ = _run_pca(cfg)
    metric = emb.metric
    lam = res.eigenvalues
    io.write_table(out / "eigenvalues.csv", ["index", "eigenvalue", "explained_variance_ratio"],
                   np.column_stack([np.arange(len(lam)), lam, res.explained_variance_ratio]))
    r = res.projections.shape[1]
    io.write_table(out / "projections.csv", [f"pc{j + 1}" for j in range(r)], res.projections)
    io.write_tangent(out / "mean.csv", res.mean, metric.kind, metric.kappa)
    nmodes = min(r, int(cfg.get("modes") or 4))
    for j in range(nmodes):
        io.write_tangent(out / f"mode_{j:03d}.csv", res.modes[j], metric.kind, metric.kappa)
    summary = {"metric": metric.kind, "kappa": metric.kappa, "samples": len(emb.embeddings),
               "eigenvalues": lam[:8], "explained_variance_ratio": res.explained_variance_ratio[:8],
               "lambda2_over_lambda1": float(lam[1] / lam[0]) if lam[0] > 0 else 0.0}
    io.write_json(out / "pca.json", summary)
    _emit(summary)
    return 0


def cmd_shoot(args):
    cfg = resolve_config(args)
    out = Path(cfg["out"])
    _echo(cfg, out)
    emb, res, samples = _run_pca(cfg)
    j = int(cfg.get("mode") or 0)
    if j >= len(res.modes):
        raise InvalidInputError(f"mode {j} not available ({len(res.modes)} modes)")
    sigma = cfg.get("sigma")
    if sigma is None:
        sigma = float(cfg.get("n_std", 1.0)) * float(np.sqrt(res.eigenvalues[j]))
    ref = emb.reference
    res_px = int(cfg.get("grid_res") or 64)
    if cfg.get("bounds"):
        b = _floats(cfg["bounds"])
        bounds = list(zip(b[0::2], b[1::2]))
    else:
        # all samples plus a 10% margin
        P = np.concatenate([chart_coords(mu) for mu in [ref, *samples]])
        lo, hi = P.min(axis=0), P.max(axis=0)
        pad = 0.1 * max(float(np.max(hi - lo)), 1e-3)
        bounds = list(zip(lo - pad, hi + pad))
    grid = GridSpec(bounds, (res_px,) * len(bounds))
    sh = shoot(ref, res.mean, res.modes[j], float(sigma), int(cfg.get("steps") or 5), emb.metric,
               grid=grid, blur_sigma=float(cfg.get("blur") or 0.0))
    for k, (t, mu, img) in enumerate(zip(sh.times, sh.measures, sh.rasters)):
        io.write_measure(out / f"shot_{k:03d}.csv", mu)
        io.write_raster(out / f"raster_{k:03d}", img)
    summary = {"mode": j, "sigma": sigma, "times": sh.times, "cut": sh.cut,
               "masses": [mu.total_mass for mu in sh.measures]}
    io.write_json(out / "shoot.json", summary)
    _emit(summary)
    return 0


def cmd_study(args):
    # the kappa study sweeps kappa itself
    cfg = resolve_config(args, need_kappa=args.kind != "kappa")
    out = Path(cfg["out"]) if cfg.get("out") else None
    _echo(cfg, out)
    kind = cfg["kind"]
    scfg = solver_config(cfg)
    metric = metric_of(cfg) if kind != "kappa" else None
    if kind == "kappa":
        mu0, mu1 = _load(cfg["mu0"], cfg), _load(cfg["mu1"], cfg)
        rep = kappa_study(mu0, mu1, _floats(cfg.get("kappas")) or [2, 5, 10, 20, 50], scfg)
    elif kind == "refine":
        mu0, mu1 = _load(cfg["mu0"], cfg), _load(cfg["mu1"], cfg)
        b = _floats(cfg.get("bounds"))
        bounds = list(zip(b[0::2], b[1::2])) if b else None
        rep = refinement_study(mu0, mu1, _ints(cfg.get("resolutions")) or [16, 32, 64, 128],
                               metric, scfg, bounds=bounds, tol=cfg.get("tol"))
    elif kind == "convexity":
        kind_m = cfg.get("manifold", "euclidean")
        dim = int(cfg.get("dim") or (2 if kind_m == "euclidean" else 3))
        m = from_descriptor({"manifold": kind_m, "dim": dim,
                             "radius": float(cfg.get("radius") or 1.0)})
        pts = symmetric_configuration(m, float(cfg.get("a", 1.0)), float(cfg.get("b", 1.0)))
        ts = _floats(cfg.get("times")) or list(np.linspace(0, 1, 11))
        rep = convexity_probe(m, *pts, metric, metric.kappa, ts)
    else:
        raise InvalidInputError(f"unknown study {kind!r}")
    if out is not None:
        io.write_report(out, rep)
    summary = rep.summary()
    summary["passed"] = rep.passed
    summary["series"] = rep.series
    _emit(summary)
    return 0


def cmd_gen_data(args):
    cfg = resolve_config_tangent(args)
    out = Path(cfg["out"])
    _echo(cfg, out)
    kind = cfg["kind"]
    seed = int(cfg.get("seed") or 0)
    count = int(cfg.get("count") or 20)
    h = cfg.get("h")
    if kind == "disk-line":
        L, R = float(cfg.get("L") or 5.0), float(cfg.get("R") or 0.2)
        ref, samples = disk_line_reference(L, R, h), gen_disk_line(L, R, count, seed, h)
    elif kind == "disk-box":
        L = float(cfg.get("L") or 5.0)
        rmin, rmax = float(cfg.get("Rmin") or 0.2), float(cfg.get("Rmax") or 0.5)
        ref, samples = disk_box_reference(L, rmax, h), gen_disk_box(L, rmin, rmax, count, seed, h)
    elif kind == "sphere-caps":
        ref, samples = gen_sphere_caps(float(cfg.get("radius") or 1.0),
                                       float(cfg.get("cap_angle") or 0.3), count, seed,
                                       int(cfg.get("n") or 200))
    elif kind == "dirac-line":
        from .manifold import Euclidean
        L = float(cfg.get("L") or 5.0)
        E = Euclidean(1)
        ref = DiscreteMeasure.dirac(E, [0.5 * L])
        samples = [DiscreteMeasure.dirac(E, [x]) for x in np.linspace(0, L, count)]
    else:
        raise InvalidInputError(f"unknown dataset {kind!r}")
    io.write_measure(out / "reference.csv", ref)
    for i, s in enumerate(samples):
        io.write_measure(out / f"sample_{i:03d}.csv", s)
    _emit({"dataset": kind, "samples": len(samples), "out": str(out)})
    return 0


def cmd_oracle(args):
    from .oracle import TinyInstance, exact_balanced, hk_dirac_closed_form, hk_grid_search
    cfg = resolve_config_tangent(args)
    if cfg["kind"] == "dirac":
        from .manifold import Euclidean
        v, p, f0, f1 = hk_dirac_closed_form(float(cfg.get("m0", 1)), [0.0], float(cfg.get("m1", 1)),
                                            [float(cfg.get("d", 1))], float(cfg.get("kappa") or 1),
                                            Euclidean(1))
        _emit({"value": v, "plan_mass": p, "phi0": f0, "phi1": f1})
        return 0
    mu0, mu1 = _load(cfg["mu0"], cfg), _load(cfg["mu1"], cfg)
    inst = TinyInstance(mu0, mu1)
    if cfg["kind"] == "balanced":
        plan = exact_balanced(inst)
        _emit({"value": plan.value, "plan": plan.matrix})
    else:
        v, P = hk_grid_search(inst, float(cfg.get("kappa") or 1))
        _emit({"value": v, "plan": P})
    return 0


# ---------------------------------------------------------------------------
# parser

def _common(p, metric=True):
    p.add_argument("--config", help="JSON config file; flags override its fields")
    if metric:
        p.add_argument("--metric", choices=["w2", "hk", "shk"])
        p.add_argument("--kappa", type=float)
        p.add_argument("--epsilon-target", dest="epsilon_target", type=float)
        p.add_argument("--epsilon-scaling-factor", dest="epsilon_scaling_factor", type=float)
        p.add_argument("--max-iters", dest="max_iters", type=int)
        p.add_argument("--marginal-tol", dest="marginal_tol", type=float)
        p.add_argument("--check-every", dest="check_every", type=int)
        p.add_argument("--normalize", action="store_true", default=None,
                       help="rescale inputs to unit mass")
        p.add_argument("--workers", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tangentot",
                                 description="Linearized optimal transport (W2, HK, SHK).")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("dist", help="distance between two measures")
    p.add_argument("mu0")
    p.add_argument("mu1")
    p.add_argument("--out")
    p.add_argument("--save-plan", dest="save_plan", action="store_true", default=None)
    _common(p)
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("log", help="tangent of mu1 at mu0")
    p.add_argument("mu0")
    p.add_argument("mu1")
    p.add_argument("--out", required=True, help="tangent CSV")
    _common(p)
    p.set_defaults(func=cmd_log)

    p = sub.add_parser("exp", help="exponential of a tangent file")
    p.add_argument("tangent")
    p.add_argument("--out", required=True, help="measure CSV")
    _common(p, metric=False)
    p.set_defaults(func=cmd_exp)

    p = sub.add_parser("geodesic", help="measures along the geodesic from mu0 to mu1")
    p.add_argument("mu0")
    p.add_argument("mu1")
    p.add_argument("--times", help="comma-separated times in [0, 1]")
    p.add_argument("--out", required=True, help="output directory")
    _common(p)
    p.set_defaults(func=cmd_geodesic)

    for name, fn, hlp in (("pca", cmd_pca, "tangent PCA of a sample directory"),
                          ("shoot", cmd_shoot, "exponential shooting along a PCA mode")):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("samples", help="directory with reference.csv and sample_*.csv")
        p.add_argument("--reference")
        p.add_argument("--out", required=True)
        _common(p)
        if name == "pca":
            p.add_argument("--modes", type=int, help="number of mode tangents to write")
        else:
            p.add_argument("--mode", type=int)
            p.add_argument("--sigma", type=float)
            p.add_argument("--n-std", dest="n_std", type=float)
            p.add_argument("--steps", type=int)
            p.add_argument("--grid-res", dest="grid_res", type=int)
            p.add_argument("--bounds", help="lo1,hi1,lo2,hi2 in chart coordinates")
            p.add_argument("--blur", type=float)
        p.set_defaults(func=fn)

    p = sub.add_parser("study", help="kappa / refine / convexity harnesses")
    p.add_argument("kind", choices=["kappa", "refine", "convexity"])
    p.add_argument("--mu0")
    p.add_argument("--mu1")
    p.add_argument("--kappas")
    p.add_argument("--resolutions")
    p.add_argument("--bounds")
    p.add_argument("--tol", type=float)
    p.add_argument("--manifold", choices=["euclidean", "sphere", "hyperbolic"])
    p.add_argument("--dim", type=int)
    p.add_argument("--radius", type=float)
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--times")
    p.add_argument("--out")
    _common(p)
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("gen-data", help="generate synthetic datasets")
    p.add_argument("kind", choices=["disk-line", "disk-box", "sphere-caps", "dirac-line"])
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--count", type=int)
    p.add_argument("--L", type=float)
    p.add_argument("--R", type=float)
    p.add_argument("--Rmin", type=float)
    p.add_argument("--Rmax", type=float)
    p.add_argument("--h", type=float)
    p.add_argument("--radius", type=float)
    p.add_argument("--cap-angle", dest="cap_angle", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--config")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("oracle", help=argparse.SUPPRESS)
    p.add_argument("kind", choices=["dirac", "balanced", "hk"])
    p.add_argument("--mu0")
    p.add_argument("--mu1")
    p.add_argument("--m0", type=float)
    p.add_argument("--m1", type=float)
    p.add_argument("--d", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--config")
    p.set_defaults(func=cmd_oracle)
    # hide from the usage summary
    sub._choices_actions = [a for a in sub._choices_actions if a.dest != "oracle"]
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    del args.verbose
    try:
        return args.func(args)
    except TangentOTError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return InvalidInputError.exit_code


if __name__ == "__main__":
    sys.exit(main())
