"""Command-line experiments with reproducible, provenance-stamped outputs.

Every run writes its tables (CSV) and summary (JSON) atomically into
``--out`` and the manifest last.  The manifest id is a digest of the
resolved configuration and package version, so identical configurations
produce byte-identical files; every CSV row carries that id.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
Errors are reported as one JSON object on standard error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from rightmost import __version__

SUBCOMMANDS = ("sample", "edge-stats", "girko-check", "dyson", "kernel", "tail", "flow", "stability", "selfcheck")

# desk-scale defaults per subcommand; config files and flags override these
DEFAULTS: dict[str, dict] = {
    "sample": {"n": 64, "dist": "ginibre", "seed": 0, "index": 0},
    "edge-stats": {"n": 256, "dist": "ginibre", "samples": 100, "seed": 0, "theta": 0.0,
                   "backend": "numpy", "omega": False, "C_n": 1.0, "tau": 0.05, "L": None, "l": None},
    "girko-check": {"n": 32, "dist": "ginibre", "seed": 0, "L": 1.05, "l": 0.1, "h": 0.3,
                    "grid_level": 1, "T": 1e6, "eta0": None, "tau": 0.05, "C_n": 1.0, "kind": "lower"},
    "dyson": {"z": "1", "eta": [1e-3]},
    "kernel": {"n": 100, "box": [1.0, 1.2, -0.3, 0.3]},
    "tail": {"n": 100, "delta": 0.2, "samples": 2000, "seed": 0, "dist": "ginibre",
             "y_grid": [0.1, 0.25, 0.5, 0.75, 1.0], "kernel": True},
    "flow": {"n": 128, "dist": "symmetrized-bernoulli-phase", "samples": 50, "seed": 0,
             "z": "1", "eta": None, "t_grid": [0.0, 0.5, 1.0, 2.0, 4.0, 8.0]},
    "stability": {"n": 64, "dist": "ginibre", "samples": 200, "seed": 0, "g": 1.0, "C_n": 1.0},
    "selfcheck": {"dist": "ginibre", "m": 100000, "seed": 0},
}

FIT_SUBCOMMANDS = ("edge-stats", "stability", "tail", "flow")


class ConfigError(ValueError):
    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # structured usage errors
        _emit_error("config", [message], usage=self.format_usage().strip())
        sys.exit(2)


def _emit_error(kind: str, violations: list[str], **extra) -> None:
    payload = {"error": kind, "violations": violations, **extra}
    print(json.dumps(payload), file=sys.stderr)


def _complex(text) -> complex:
    if isinstance(text, (int, float, complex)):
        return complex(text)
    return complex(str(text).replace(" ", "").replace("i", "j"))


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


# -- configuration -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rightmost", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    def common(sp, *names):
        sp.add_argument("--config", help="JSON file with parameter values (flags override)")
        sp.add_argument("--out", default="out", help="output directory (default: out)")
        sp.add_argument("--workers", type=int, help="worker processes (env RIGHTMOST_WORKERS)")
        opts = {
            "n": dict(type=int), "dist": dict(type=str), "samples": dict(type=int),
            "seed": dict(type=int),
        }
        for name in names:
            sp.add_argument(f"--{name}", dest=name, default=None, **opts[name])

    s = sub.add_parser("sample", help="sample one matrix and write its spectrum")
    common(s, "n", "dist", "seed")
    s.add_argument("--index", type=int)

    s = sub.add_parser("edge-stats", help="rightmost-eigenvalue ensemble and Gumbel fit")
    common(s, "n", "dist", "samples", "seed")
    s.add_argument("--theta", type=float)
    s.add_argument("--backend", choices=("numpy", "torch64"))
    s.add_argument("--omega", action="store_const", const=True, help="also count eigenvalues in the Omega boxes")
    s.add_argument("--C-n", dest="C_n", type=float)
    s.add_argument("--tau", type=float)
    s.add_argument("--L", dest="L", type=float, help="Omega_1 centre (desk-scale override)")
    s.add_argument("--l", dest="l", type=float, help="Omega_1 half-width (desk-scale override)")

    s = sub.add_parser("girko-check", help="both sides of Girko's formula for one matrix")
    common(s, "n", "dist", "seed")
    for name in ("L", "l", "h", "T", "eta0", "tau"):
        s.add_argument(f"--{name}", dest=name, type=float)
    s.add_argument("--C-n", dest="C_n", type=float)
    s.add_argument("--grid-level", dest="grid_level", type=int)
    s.add_argument("--kind", choices=("lower", "upper"))

    s = sub.add_parser("dyson", help="solve the scalar Dyson equation on a grid of eta")
    common(s)
    s.add_argument("--z", type=str, help="spectral parameter, e.g. 1 or 0.9+0.3j")
    s.add_argument("--eta", type=_floats, help="comma-separated eta values")

    s = sub.add_parser("kernel", help="Ginibre kernel expectation and variance of a box count")
    common(s, "n")
    s.add_argument("--box", type=float, nargs=4, metavar=("X_LO", "X_HI", "Y_LO", "Y_HI"))

    s = sub.add_parser("tail", help="lower tail of the smallest singular value of X - z")
    common(s, "n", "samples", "seed", "dist")
    s.add_argument("--delta", type=float)
    s.add_argument("--y-grid", dest="y_grid", type=_floats)
    s.add_argument("--no-kernel", dest="kernel", action="store_const", const=False)

    s = sub.add_parser("flow", help="Im<G_t> along the interpolation flow")
    common(s, "n", "dist", "samples", "seed")
    s.add_argument("--z", type=str)
    s.add_argument("--eta", type=float)
    s.add_argument("--t-grid", dest="t_grid", type=_floats)

    s = sub.add_parser("stability", help="stability verdict for u' = (-I + gX)u")
    common(s, "n", "dist", "samples", "seed")
    s.add_argument("--g", type=float)
    s.add_argument("--C-n", dest="C_n", type=float)

    s = sub.add_parser("selfcheck", help="moment self-check of an entry distribution")
    common(s, "dist", "seed")
    s.add_argument("--m", type=int)
    return p


_META = ("subcommand", "config", "out", "workers")


def resolve_config(args: argparse.Namespace) -> dict:
    """Defaults, then the JSON config file, then explicit flags."""
    cfg = dict(DEFAULTS[args.subcommand])
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError([f"cannot read config {args.config}: {exc}"]) from exc
        if not isinstance(loaded, dict):
            raise ConfigError(["config file must hold a JSON object"])
        unknown = sorted(set(loaded) - set(cfg) - {"subcommand"})
        if unknown:
            raise ConfigError([f"unknown config keys: {unknown}"])
        cfg.update({k: v for k, v in loaded.items() if k != "subcommand"})
    for key, value in vars(args).items():
        if key not in _META and value is not None:
            cfg[key] = value
    cfg["subcommand"] = args.subcommand
    return cfg


def validate(config: dict) -> list[str]:
    """Violations of module preconditions; empty when the config can run."""
    from rightmost.edge_stats import gamma_n
    from rightmost.ensembles import KINDS, EntryDistribution

    v: list[str] = []
    sc = config.get("subcommand")
    if sc not in SUBCOMMANDS:
        return [f"unknown subcommand {sc!r}"]
    if "dist" in config:
        try:
            EntryDistribution(config["dist"])
        except ValueError:
            v.append(f"dist must be one of {KINDS}")
    n = config.get("n")
    if "n" in config and (not isinstance(n, int) or n < 1):
        v.append("n must be a positive integer")
    if "samples" in config:
        s = config["samples"]
        if not isinstance(s, int) or s < 0:
            v.append("samples must be a non-negative integer")
        elif sc in FIT_SUBCOMMANDS and s == 0:
            v.append(f"samples must be >= 1 for {sc}")
    if "seed" in config and (not isinstance(config["seed"], int) or config["seed"] < 0):
        v.append("seed must be a non-negative integer")
    if sc == "edge-stats" and config.get("omega") and isinstance(n, int):
        if (config.get("L") is None or config.get("l") is None) and (n < 3 or gamma_n(n) <= 0):
            v.append("gamma_nonpositive: Omega boxes need --L and --l at this n")
    if sc == "girko-check":
        T = config.get("T")
        eta0 = config.get("eta0")
        if eta0 is None and isinstance(n, int):
            eta0 = n ** (-7.0 / 8.0 - config.get("tau", 0.05))
        if T is None or not T > 0:
            v.append("T must be positive")
        elif eta0 is not None and not 0 < eta0 < T:
            v.append("need 0 < eta0 < T")
        if any(config.get(k) is None for k in ("L", "l", "h")) and isinstance(n, int):
            if n < 3 or gamma_n(n) <= 0:
                v.append("gamma_nonpositive: give L, l and h at this n")
        for k in ("l", "h"):
            if config.get(k) is not None and not config[k] > 0:
                v.append(f"{k} must be positive")
        if not isinstance(config.get("grid_level"), int) or config["grid_level"] < 0:
            v.append("grid_level must be a non-negative integer")
    if sc == "dyson":
        try:
            z = _complex(config["z"])
            etas = _floats(config["eta"])
        except (ValueError, TypeError):
            v.append("z must be a complex number and eta a list of reals")
        else:
            if any(not e >= 0 for e in etas):
                v.append("eta must be >= 0")
            if any(e == 0 for e in etas) and abs(abs(z) - 1) == 0:
                v.append("eta = 0 at |z| = 1 is degenerate")
    if sc == "kernel":
        b = config.get("box")
        if not (isinstance(b, (list, tuple)) and len(b) == 4 and b[0] < b[1] and b[2] < b[3]):
            v.append("box must be x_lo < x_hi, y_lo < y_hi")
    if sc == "tail":
        d = config.get("delta")
        if d is None or not d > 0:
            v.append("delta must be > 0")
        elif isinstance(n, int) and n * d * d > 50:
            v.append("n delta^2 must be <= 50")
        if any(y < 0 for y in _floats(config.get("y_grid", []))):
            v.append("y_grid must be non-negative")
    if sc == "flow":
        if any(t < 0 for t in _floats(config.get("t_grid", []))):
            v.append("t_grid must be non-negative")
        if config.get("eta") is not None and not config["eta"] > 0:
            v.append("eta must be > 0")
        if isinstance(config.get("samples"), int) and config["samples"] == 1:
            v.append("flow needs samples >= 2")
    if sc == "stability" and config.get("g") is None:
        v.append("g is required")
    if sc == "selfcheck" and (not isinstance(config.get("m"), int) or config["m"] < 1000):
        v.append("m must be an integer >= 1000")
    return v


# -- output ----------------------------------------------------------------------


@dataclass
class RunManifest:
    id: str
    config: dict
    seed: int | None
    streams: str
    version: str
    wall_time_s: float = 0.0
    outputs: dict = field(default_factory=dict)


def manifest_id(config: dict) -> str:
    blob = json.dumps({"config": config, "version": __version__}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _atomic_write(path: Path, data: bytes) -> str:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return hashlib.sha256(data).hexdigest()


def _csv_bytes(rows: list[dict], mid: str) -> bytes:
    buf = io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]) + ["manifest_id"], lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({**{k: _fmt(v) for k, v in row.items()}, "manifest_id": mid})
    return buf.getvalue().encode()


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


# -- subcommands -----------------------------------------------------------------


def _run_sample(c, workers):
    from rightmost.ensembles import sample_matrix
    from rightmost.spectral import eigvals

    spec = eigvals(sample_matrix(c["dist"], c["n"], c["seed"], c["index"]), residual=True)
    rows = [{"index": i, "re": v.real, "im": v.imag} for i, v in enumerate(spec.values)]
    summary = {"n": c["n"], "spectral_radius": float(np.abs(spec.values).max()),
               "max_re": float(spec.values.real.max()), "residual": spec.residual}
    return rows, summary


def _run_edge(c, workers):
    from rightmost.edge_stats import gamma_n, gumbel_fit, mc_edge_ensemble, omega_boxes

    n = c["n"]
    boxes = None
    if c["omega"]:
        boxes = omega_boxes(n, c["C_n"], c["tau"], c.get("L"), c.get("l"))
    recs = mc_edge_ensemble(c["dist"], n, c["samples"], c["seed"], theta=c["theta"],
                            workers=workers, backend=c["backend"], boxes=boxes)
    rows = []
    for r in recs:
        row = {"index": r.index, "max_re": r.max_re, "argmax_re": r.argmax.real,
               "argmax_im": r.argmax.imag, "rho": r.rho}
        for name, cnt in zip(("omega0", "omega1", "omega2"), r.counts):
            row[f"count_{name}"] = cnt
        rows.append(row)
    m = np.array([r.max_re for r in recs])
    g = gamma_n(n) if n >= 3 else float("nan")
    summary = {
        "samples": len(recs),
        "median": float(np.median(m)) if len(m) else None,
        "gamma_n": g,
        "asymptotic_centre": 1 + math.sqrt(g / (4 * n)) if g > 0 else None,
        "asymptotic_scale": 1 / math.sqrt(4 * n * g) if g > 0 else None,
        "gumbel_fit": gumbel_fit(m).as_dict() if len(m) >= 100 else None,
    }
    if boxes is not None:
        counts = np.array([r.counts for r in recs])
        summary["box_counts"] = {
            name: {"box": list(b.as_tuple()), "mean": float(counts[:, i].mean()),
                   "p_nonempty": float((counts[:, i] > 0).mean())}
            for i, (name, b) in enumerate(zip(("omega0", "omega1", "omega2"), boxes))
        }
    return rows, summary


def _run_girko(c, workers):
    from rightmost.ensembles import sample_matrix
    from rightmost.girko import build_cutoff, default_eta0, girko_lhs, girko_rhs, make_grid
    from rightmost.spectral import eigvals

    X = sample_matrix(c["dist"], c["n"], c["seed"])
    f = build_cutoff(c["kind"], c["n"], c["C_n"], c["tau"], L=c["L"], l=c["l"], h=c["h"])
    ev = eigvals(X).values
    eta0 = c["eta0"] if c["eta0"] is not None else default_eta0(c["n"], c["tau"])
    grid = make_grid(f, c["grid_level"], singular_points=ev)
    r = girko_rhs(X, f, eta0, c["T"], grid)
    lhs = girko_lhs(ev, f)
    summary = {"lhs": lhs, "rhs_total": r.total, "I_small": r.I_small, "I_large": r.I_large,
               "logdet": r.logdet_term, "gap": abs(r.total - lhs), "eta0": eta0, "T": c["T"],
               "nodes": r.nodes}
    return [], summary


def _run_dyson(c, workers):
    from rightmost.dyson import scaling_regime, solve_m

    z = _complex(c["z"])
    rows = []
    for eta in _floats(c["eta"]):
        p = solve_m(z, eta)
        rows.append({"z_re": z.real, "z_im": z.imag, "eta": eta, "v": p.v, "u": p.u,
                     "mfrak_re": p.mfrak.real, "mfrak_im": p.mfrak.imag,
                     "residual": p.self_consistency_residual(),
                     "scaling": scaling_regime(z, eta) if eta <= 1 else float("nan")})
    return rows, {"points": len(rows), "max_residual": max(r["residual"] for r in rows)}


def _run_kernel(c, workers):
    from rightmost.ginibre_kernel import VARIANCE_CAP, expected_count, variance_count

    n, box = c["n"], tuple(c["box"])
    e = expected_count(n, box)
    summary = {"n": n, "box": list(box), "expected": e.value, "expected_error": e.error}
    if n <= VARIANCE_CAP:
        v = variance_count(n, box)
        summary.update(variance=v.value, variance_error=v.error)
    else:
        summary.update(variance=None, variance_error=None)
    summary["errors"] = {"expected": e.error, "variance": summary["variance_error"]}
    return [], summary


def _run_tail(c, workers):
    from rightmost.tail_kernel import TailParams, tail_mc

    p = TailParams(c["n"], c["delta"])
    rep = tail_mc(p, _floats(c["y_grid"]), c["samples"], c["seed"], c["dist"], with_kernel=c["kernel"])
    rows = [{k: r[k] for k in ("y", "mc_p", "ci_lo", "ci_hi", "bound", "kernel_integral")} for r in rep.rows()]
    return rows, {"n": p.n, "delta": p.delta, "n_delta2": p.n_delta2, "samples": rep.samples}


def _run_flow(c, workers):
    from rightmost.flow import drift_probe

    grid = sorted(_floats(c["t_grid"]))
    d = drift_probe(c["dist"], c["n"], c["samples"], c["seed"], _complex(c["z"]), c["eta"],
                    t0=grid[0], t1=grid[1] if len(grid) > 1 else grid[0] + 1.0, t_grid=grid, workers=workers)
    rows = [{"t": t, "mean_im_G": m, "std_error": s} for t, m, s in zip(d.t_grid, d.mean, d.std_error)]
    summary = {"drift": d.drift, "drift_se": d.drift_se, "lemma_scale": d.scale, "ratio": d.ratio,
               "pairs": d.pairs}
    return rows, summary


def _run_stability(c, workers):
    from rightmost.edge_stats import mc_edge_ensemble
    from rightmost.flow import classify_stability, growth_rate

    recs = mc_edge_ensemble(c["dist"], c["n"], c["samples"], c["seed"], workers=workers)
    m = np.array([r.max_re for r in recs])
    ver = classify_stability(c["g"], c["n"], m, C_n=c["C_n"])
    rows = [{"index": r.index, "max_re": r.max_re, "growth_rate": float(growth_rate(c["g"], r.max_re)),
             "label": lab} for r, lab in zip(recs, ver.labels)]
    summary = {"g": ver.g, "verdict": ver.verdict, "decay_fraction": ver.decay_fraction,
               "band": list(ver.band), "band_source": ver.band_source}
    return rows, summary


def _run_selfcheck(c, workers):
    from rightmost.ensembles import moments_selfcheck

    rep = moments_selfcheck(c["dist"], c["m"], c["seed"])
    return rep.rows(), {"dist": rep.kind, "m": rep.m, "ok": rep.ok}


RUNNERS = {
    "sample": _run_sample, "edge-stats": _run_edge, "girko-check": _run_girko, "dyson": _run_dyson,
    "kernel": _run_kernel, "tail": _run_tail, "flow": _run_flow, "stability": _run_stability,
    "selfcheck": _run_selfcheck,
}


def run(config: dict, out: str | Path, workers: int | None = None) -> RunManifest:
    """Validate, execute and persist one experiment."""
    violations = validate(config)
    if violations:
        raise ConfigError(violations)
    sc = config["subcommand"]
    mid = manifest_id(config)
    start = time.perf_counter()
    rows, summary = RUNNERS[sc](config, workers)
    out = Path(out)
    stem = sc.replace("-", "_")
    manifest = RunManifest(
        id=mid, config=_jsonable(config), seed=config.get("seed"),
        streams="Philox(SeedSequence(seed, spawn_key=(channel, index))), index = sample number",
        version=__version__,
    )
    if rows:
        manifest.outputs[f"{stem}.csv"] = _atomic_write(out / f"{stem}.csv", _csv_bytes(rows, mid))
    summary = {"manifest_id": mid, **_jsonable(summary)}
    blob = json.dumps(summary, indent=2, sort_keys=True).encode()
    manifest.outputs[f"{stem}.json"] = _atomic_write(out / f"{stem}.json", blob)
    manifest.wall_time_s = time.perf_counter() - start
    _atomic_write(out / "manifest.json", json.dumps(asdict(manifest), indent=2, sort_keys=True).encode())
    return manifest


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = resolve_config(args)
        manifest = run(config, args.out, args.workers)
    except ConfigError as exc:
        _emit_error("config", exc.violations)
        return 2
    except (ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
        _emit_error("numerical", [str(exc)], type=type(exc).__name__)
        return 3
    except ValueError as exc:
        _emit_error("config", [str(exc)])
        return 2
    print(json.dumps({"manifest_id": manifest.id, "out": str(args.out), "outputs": manifest.outputs}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
