"""Command-line front end.

Usage: ``nskernel <command> --config run.json --out outdir [--model path]
[--threads k | --serial]``.  Exit status 0 on success, 1 on a contract or
schema violation, 2 on a numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import core, experiments, extremal, geometry, kernel, metric

COMMANDS = ("build", "kernel", "metric", "curvature", "extremal", "transform", "pinchuk",
            "asymptotics", "ramadanov", "completeness", "selberg")

COMMON = {"domain", "d", "N", "tol", "seed", "kernel"}
SPECIFIC = {
    "build": set(),
    "kernel": {"points", "w"},
    "metric": {"points", "v"},
    "curvature": {"points", "v"},
    "extremal": {"point", "v", "kinds", "reading"},
    "transform": {"map", "target", "points", "v", "kinds"},
    "pinchuk": {"zeta"},
    "asymptotics": {"p0", "v", "deltas", "m", "tolerance", "window_tol", "tags", "normalization"},
    "ramadanov": {"family", "grid", "samples"},
    "completeness": {"p0", "s_values"},
    "selberg": {"s", "w", "rtol"},
}
REQUIRED = {
    "kernel": {"points"}, "metric": {"points", "v"}, "curvature": {"points", "v"},
    "extremal": {"point", "v"}, "transform": {"map", "points", "v"}, "pinchuk": {"zeta"},
    "asymptotics": {"p0", "v"}, "ramadanov": {"family", "grid"}, "completeness": {"p0", "s_values"},
    "selberg": {"s", "w"},
}

log = logging.getLogger("nskernel")


class ConfigError(core.ContractError):
    """Schema violation; the message starts with the offending field path."""


# ---------------------------------------------------------------------------
# Config parsing


def _int(cfg, key, path, default=None, lo=0):
    x = cfg.get(key, default)
    if isinstance(x, bool) or not isinstance(x, int) or x < lo:
        raise ConfigError(f"{path}.{key}: expected an integer >= {lo}")
    return x


def _real(cfg, key, path, default=None, positive=True):
    x = cfg.get(key, default)
    if isinstance(x, bool) or not isinstance(x, (int, float)) or (positive and not x > 0):
        raise ConfigError(f"{path}.{key}: expected a {'positive ' if positive else ''}number")
    return float(x)


def _complex(x, path) -> complex:
    if isinstance(x, bool):
        raise ConfigError(f"{path}: expected a number or [re, im]")
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, list) and len(x) == 2 and all(isinstance(t, (int, float)) and not isinstance(t, bool) for t in x):
        return complex(x[0], x[1])
    raise ConfigError(f"{path}: expected a number or [re, im]")


def _point(x, path, n) -> np.ndarray:
    if not isinstance(x, list) or len(x) != n:
        raise ConfigError(f"{path}: expected a list of {n} coordinates")
    return np.array([_complex(t, f"{path}[{i}]") for i, t in enumerate(x)])


def _points(x, path, n) -> list:
    if not isinstance(x, list) or not x:
        raise ConfigError(f"{path}: expected a nonempty list of points")
    return [_point(p, f"{path}[{i}]", n) for i, p in enumerate(x)]


def _reals(x, path) -> list:
    if not isinstance(x, list) or not x or not all(isinstance(t, (int, float)) and not isinstance(t, bool) for t in x):
        raise ConfigError(f"{path}: expected a nonempty list of numbers")
    return [float(t) for t in x]


def _domain(doc, path):
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected an object")
    if "n" not in doc:
        raise ConfigError(f"{path}.n: missing")
    try:
        return core.domain_from_dict(doc)
    except core.ContractError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: invalid domain ({exc})") from None


def validate(command: str, cfg) -> dict:
    if not isinstance(cfg, dict):
        raise ConfigError("config: expected a JSON object")
    unknown = set(cfg) - COMMON - SPECIFIC[command]
    if unknown:
        raise ConfigError(f"config.{sorted(unknown)[0]}: unknown field for command {command!r}")
    missing = ({"domain"} | REQUIRED.get(command, set())) - set(cfg)
    if missing:
        raise ConfigError(f"config.{sorted(missing)[0]}: missing")
    out = dict(cfg)
    out["domain"] = _domain(cfg["domain"], "config.domain")
    out["d"] = _int(cfg, "d", "config", 0)
    out["N"] = _int(cfg, "N", "config", 30)
    out["tol"] = _real(cfg, "tol", "config", 1e-12)
    out["seed"] = _int(cfg, "seed", "config", 0)
    out["kernel"] = cfg.get("kernel", "auto")
    if out["kernel"] not in ("auto", "series", "closed"):
        raise ConfigError("config.kernel: expected 'auto', 'series' or 'closed'")
    return out


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


# ---------------------------------------------------------------------------
# Output


class Writer:
    """Single sink for artifacts; every file carries the config hash and the
    truncation certificate."""

    def __init__(self, out: Path, chash: str):
        self.out = out
        self.chash = chash
        self.certificate: dict = {}
        self.written: list = []
        out.mkdir(parents=True, exist_ok=True)

    def _header(self) -> str:
        return f"# config_hash={self.chash}\n# certificate={json.dumps(self.certificate, sort_keys=True)}\n"

    def text(self, name: str, body: str) -> None:
        with open(self.out / name, "w", newline="\n") as fh:
            fh.write(self._header() + body)
        self.written.append(name)

    def json(self, name: str, doc: dict) -> None:
        doc = dict(doc, config_hash=self.chash, certificate=self.certificate)
        with open(self.out / name, "w", newline="\n") as fh:
            fh.write(json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n")
        self.written.append(name)


def _jsonable(x):
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, np.ndarray):
        return [_jsonable(t) for t in x.tolist()] if x.dtype.kind == "c" else x.tolist()
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    raise TypeError(f"not serializable: {type(x)}")


def _certificate(M) -> dict:
    if isinstance(M, kernel.ClosedKernel):
        return {"closed_form": True, "tail_bound": 0.0}
    return {"closed_form": False, "N": M.N, "tol": M.tol, "r_eval": M.r_eval, "tail_bound": M.tail_bound,
            "weight_error": M.weight_error}


def _kernel_object(cfg, model_path):
    D, d = cfg["domain"], cfg["d"]
    if model_path:
        M = kernel.load_model(model_path)
        if M.domain != D or M.d != d:
            raise ConfigError("config.domain: does not match the model file")
        return M
    closed = isinstance(D, (core.Ball, core.DiagonalBall, core.Polydisc))
    if cfg["kernel"] == "closed" or (cfg["kernel"] == "auto" and closed):
        return kernel.closed_kernel(D, d)
    return kernel.build_model(D, d, cfg["N"], tol=cfg["tol"])


def _csv(rows: list) -> str:
    return metric.rows_to_csv(rows)


def _point_cols(z) -> dict:
    out = {}
    for i, t in enumerate(z):
        out[f"z{i + 1}_re"] = float(t.real)
        out[f"z{i + 1}_im"] = float(t.imag)
    return out


# ---------------------------------------------------------------------------
# Commands


def cmd_build(cfg, W, args):
    M = kernel.build_model(cfg["domain"], cfg["d"], cfg["N"], tol=cfg["tol"])
    W.certificate = _certificate(M)
    kernel.save_model(M, W.out / "model.txt")
    W.written.append("model.txt")
    W.json("build.json", {"moments": len(M.alphas), "domain": cfg["domain"].to_dict(), "d": M.d})
    print(f"built {len(M.alphas)} moments, r_eval={M.r_eval:.6g}, tail_bound={M.tail_bound:.3g}")


def cmd_kernel(cfg, W, args, M):
    n = M.n
    pts = _points(cfg["points"], "config.points", n)
    w = _point(cfg["w"], "config.w", n) if "w" in cfg else None
    rows = []
    for z in pts:
        K = complex(M.value(z, z if w is None else w))
        rows.append({**_point_cols(z), "K_re": K.real, "K_im": K.imag})
    W.text("kernel.csv", _csv(rows))


def _vector(cfg, n):
    v = _point(cfg["v"], "config.v", n)
    if not np.any(v):
        raise ConfigError("config.v: must be nonzero")
    return v


def cmd_metric(cfg, W, args, M):
    pts = _points(cfg["points"], "config.points", M.n)
    W.text("metric.csv", _csv(metric.metric_grid_rows(M, pts, _vector(cfg, M.n))))


def cmd_curvature(cfg, W, args, M):
    pts = _points(cfg["points"], "config.points", M.n)
    v = _vector(cfg, M.n)
    rows = []
    for z in pts:
        m = metric.metric_tensor(M, z)
        rows.append({**_point_cols(z), "R_v": metric.holomorphic_sectional(m, v),
                     "Ric_v": metric.ricci_from_point(m, v)})
    W.text("curvature.csv", _csv(rows))


def cmd_extremal(cfg, W, args, M):
    p = _point(cfg["point"], "config.point", M.n)
    v = _vector(cfg, M.n)
    reading = cfg.get("reading", "trace")
    if reading not in extremal.READINGS:
        raise ConfigError(f"config.reading: expected one of {list(extremal.READINGS)}")
    kinds = cfg.get("kinds", ["I0", "I1", "I2", "I", "M"])
    if not isinstance(kinds, list):
        raise ConfigError("config.kinds: expected a list")
    values = {}
    for i, k in enumerate(kinds):
        try:
            kind = extremal.MinIntegralKind.parse(str(k))
        except (ValueError, core.ContractError) as exc:
            raise ConfigError(f"config.kinds[{i}]: {exc}") from None
        values[str(kind)] = extremal.minimum_integral(M, kind, p, v, reading=reading).value
    report = extremal.extremal_identity_report(M, p, v, drift=not isinstance(M, kernel.ClosedKernel))
    W.json("extremal.json", {"values": values, "report": report, "reading": reading})


def _map(cfg, n):
    spec = cfg["map"]
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigError("config.map.type: missing")
    t = spec["type"]
    if t == "cayley":
        if set(spec) != {"type"}:
            raise ConfigError("config.map: cayley takes no parameters")
        return geometry.cayley_data(n)
    if t == "linear":
        m = spec.get("matrix")
        if not isinstance(m, list) or len(m) != n:
            raise ConfigError(f"config.map.matrix: expected {n} rows")
        A = np.array([_point(r, f"config.map.matrix[{i}]", n) for i, r in enumerate(m)])
        if abs(np.linalg.det(A)) < 1e-14:
            raise ConfigError("config.map.matrix: singular")
        return geometry.linear_map(A)
    if t == "dilation":
        return geometry.linear_map(np.eye(n) * _real(spec, "factor", "config.map"))
    raise ConfigError(f"config.map.type: unknown map {t!r}")


def cmd_transform(cfg, W, args, M):
    D, d, n = cfg["domain"], cfg["d"], cfg["domain"].n
    F = _map(cfg, n)
    if cfg["map"]["type"] == "cayley":
        if not isinstance(D, core.Ball):
            raise ConfigError("config.domain: the Cayley map targets the unit ball")
        src, dst = geometry.siegel_kernel(n, d), kernel.closed_kernel(D, d)
    else:
        if "target" not in cfg:
            raise ConfigError("config.target: missing")
        src = M
        T = _domain(cfg["target"], "config.target")
        dst = _kernel_object(dict(cfg, domain=T), None)
    pts = _points(cfg["points"], "config.points", n)
    v = _vector(cfg, n)
    kinds = [extremal.MinIntegralKind.parse(str(k)) for k in cfg.get("kinds", [])]
    rows = []
    for z in pts:
        row = {**_point_cols(z),
               "kernel": geometry.transform_kernel_residual(F, src, dst, z, z),
               "kernel_offdiag": geometry.transform_kernel_residual(F, src, dst, z, pts[0]),
               "metric": geometry.transform_metric_residual(F, src, dst, z, v)}
        for k in kinds:
            row[f"min_{k}"] = geometry.transform_min_integral_residual(F, src, dst, k, z, v)
        rows.append(row)
    W.text("transform.csv", _csv(rows))
    worst = max(max(v for k, v in r.items() if not k.startswith("z")) for r in rows)
    W.json("transform.json", {"max_residual": worst, "points": len(rows)})
    print(f"max residual {worst:.3e}")


def cmd_pinchuk(cfg, W, args):
    D = cfg["domain"]
    zeta = _point(cfg["zeta"], "config.zeta", D.n)
    pm = geometry.pinchuk_normalize(D, zeta)
    doc = pm.to_dict()
    doc["normal_form_residual"] = pm.normal_form_residual()
    doc["normal_image_residual"] = pm.normal_image_residual(1e-3)
    W.json("pinchuk.json", doc)


def cmd_asymptotics(cfg, W, args, M):
    D = cfg["domain"]
    p0 = _point(cfg["p0"], "config.p0", D.n)
    v = _vector(cfg, D.n)
    deltas = _reals(cfg["deltas"], "config.deltas") if "deltas" in cfg else list(experiments.DEFAULT_DELTAS)
    tags = cfg.get("tags", list(experiments.ASYMPTOTIC_TAGS))
    if not isinstance(tags, list) or not set(tags) <= set(experiments.ASYMPTOTIC_TAGS):
        raise ConfigError("config.tags: expected a list drawn from a..g")
    tol = _real(cfg, "tolerance", "config") if "tolerance" in cfg else None
    rows, V = experiments.asymptotics_sweep(
        D, M, p0, v, deltas, m=_int(cfg, "m", "config", 4, lo=1), tol=tol,
        window_tol=_real(cfg, "window_tol", "config", 1e-4), normalization=cfg.get("normalization"),
        threads=args.threads)
    W.text("asymptotics.csv", experiments.sweep_csv(rows))
    for t, body in experiments.plot_files(rows).items():
        W.text(f"plot_{t}.dat", body)
    judged = {t: V.passed[t] for t in tags}
    W.json("verdict.json", json.loads(V.to_json({"judged_tags": tags, "judged_passed": all(judged.values())})))
    for t in experiments.ASYMPTOTIC_TAGS:
        print(f"({t}) limit={V.limits[t]:.12g} target={V.targets[t]:.12g} err={V.errors[t]:.2e} "
              f"{'PASS' if V.passed[t] else 'FAIL'}")
    if not all(judged.values()):
        raise ArithmeticError("asymptotic limits do not match their targets: "
                              + ", ".join(t for t, ok in judged.items() if not ok))


def _family(spec, n):
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigError("config.family.type: missing")
    if spec["type"] == "disc_radii":
        radii = _reals(spec.get("radii"), "config.family.radii")
        if any(not 0 < r for r in radii):
            raise ConfigError("config.family.radii: radii must be positive")
        return [core.DiagonalBall(n, tuple([r**-2] * n)) for r in radii]
    if spec["type"] == "domains":
        docs = spec.get("domains")
        if not isinstance(docs, list) or not docs:
            raise ConfigError("config.family.domains: expected a nonempty list")
        return [_domain(doc, f"config.family.domains[{i}]") for i, doc in enumerate(docs)]
    raise ConfigError(f"config.family.type: unknown family {spec['type']!r}")


def _grid(spec, n):
    if isinstance(spec, list):
        return _points(spec, "config.grid", n)
    if isinstance(spec, dict):
        R = _real(spec, "radius", "config.grid")
        rings = _int(spec, "rings", "config.grid", 5, lo=1)
        angles = _int(spec, "angles", "config.grid", 8, lo=1)
        pts = []
        for k in range(n):
            for r in np.linspace(0, R, rings + 1):
                for th in np.linspace(0, 2 * np.pi, angles, endpoint=False):
                    z = np.zeros(n, dtype=complex)
                    z[k] = r * np.exp(1j * th)
                    pts.append(z)
        return pts
    raise ConfigError("config.grid: expected a point list or {radius, rings, angles}")


def cmd_ramadanov(cfg, W, args, M):
    D = cfg["domain"]
    fam = _family(cfg["family"], D.n)
    grid = _grid(cfg["grid"], D.n)
    res = experiments.ramadanov_run(fam, M, cfg["d"], grid, N=cfg["N"],
                                    samples=_int(cfg, "samples", "config", 1000, lo=1), seed=cfg["seed"])
    W.text("ramadanov.csv", res.to_csv())
    W.json("ramadanov.json", {"monotone": res.monotone, "final": res.final, "start": res.start})
    print(f"monotone={res.monotone} final={res.final:.3e}")


def cmd_completeness(cfg, W, args, M):
    p0 = _point(cfg["p0"], "config.p0", M.n)
    res = experiments.completeness_probe(M, p0, _reals(cfg["s_values"], "config.s_values"))
    W.text("completeness.csv", res.to_csv())
    W.json("completeness.json", {"C": res.C, "increasing": res.increasing, "passed": res.passed})
    print(f"L({res.s[-1]})={res.length[-1]:.12g} C={res.C:.6g}")
    if not res.passed:
        raise ArithmeticError("radial lengths do not grow logarithmically")


def cmd_selberg(cfg, W, args):
    D = cfg["domain"]
    s = _int(cfg, "s", "config", lo=1)
    w = _point(cfg["w"], "config.w", D.n)
    val = kernel.selberg_constant(D, s, w, rtol=_real(cfg, "rtol", "config", 1e-10))
    W.json("selberg.json", {"s": s, "value": val})
    print(repr(val))


MODEL_FREE = {"build": cmd_build, "pinchuk": cmd_pinchuk, "selberg": cmd_selberg}
MODEL_COMMANDS = {"kernel": cmd_kernel, "metric": cmd_metric, "curvature": cmd_curvature,
                  "extremal": cmd_extremal, "transform": cmd_transform, "asymptotics": cmd_asymptotics,
                  "ramadanov": cmd_ramadanov, "completeness": cmd_completeness}


# ---------------------------------------------------------------------------
# Entry point


def _setup_logging() -> None:
    level = os.environ.get("NSKERNEL_LOG", "quiet")
    levels = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}
    if level not in levels:
        raise ConfigError(f"NSKERNEL_LOG: expected one of {sorted(levels)}")
    logging.basicConfig(level=levels[level], format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nskernel", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--model", help="model file written by 'build'")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--serial", action="store_true", help="force single-threaded execution")
    return ap


NUMERICAL = (ArithmeticError, kernel.BuildError, RuntimeError, np.linalg.LinAlgError)


def main(argv=None) -> int:
    args = parser().parse_args(argv)
    if args.serial or args.threads < 1:
        args.threads = 1
    try:
        _setup_logging()
        try:
            with open(args.config) as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"config: cannot read {args.config} ({exc.strerror})") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: invalid JSON ({exc})") from None
        cfg = validate(args.command, raw)
        W = Writer(Path(args.out), config_hash(raw))
        log.info("running %s with config hash %s", args.command, W.chash)
        if args.command in MODEL_FREE:
            MODEL_FREE[args.command](cfg, W, args)
        else:
            M = _kernel_object(cfg, args.model)
            W.certificate = _certificate(M)
            MODEL_COMMANDS[args.command](cfg, W, args, M)
        log.info("wrote %s", ", ".join(W.written))
        return 0
    except (core.ContractError, core.DomainError, core.UnsupportedDomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NUMERICAL as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
