"""Batch entry point: ``polyavg decompose|verify|experiment --config PATH``.

Exit codes: 0 pass, 1 usage or config error, 2 degenerate input,
3 verification failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import combinat, experiments, geomcheck
from .decomp import KAPPA_DEFAULT, decompose
from .measureops import Box
from .polycurve import MAX_DEGREE, CurvePoly, DegenerateCurve

log = logging.getLogger("polyavg")

EXIT_OK, EXIT_CONFIG, EXIT_DEGENERATE, EXIT_FAILED = 0, 1, 2, 3
EXPERIMENTS = ("hull", "scaling", "sin", "sharpness", "uniform")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    curve: list[list[str]]
    dimension: int
    window: tuple[float, float] | None = None
    kappa_target: float = KAPPA_DEFAULT
    seed: int = 0
    budget: int = 20000
    out: str = "out"
    experiment: dict = field(default_factory=dict)
    verify: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        if "curve" not in doc:
            raise ConfigError("config needs a 'curve' entry (coefficient lists, constant term first)")
        try:
            curve = [[str(Fraction(str(c))) for c in comp] for comp in doc["curve"]]
        except (TypeError, ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"bad curve coefficients: {exc}") from None
        dim = int(doc.get("dimension", len(curve)))
        if dim not in (2, 3):
            raise ConfigError(f"dimension must be 2 or 3, got {dim}")
        if len(curve) != dim:
            raise ConfigError(f"curve has {len(curve)} components, dimension is {dim}")
        if any(len(c) - 1 > MAX_DEGREE for c in curve):
            raise ConfigError(f"component degree exceeds cap {MAX_DEGREE}")
        window = doc.get("window")
        if window is not None:
            try:
                window = (float(window[0]), float(window[1]))
            except (TypeError, ValueError, IndexError):
                raise ConfigError("window must be [lo, hi]") from None
            if not (math.isfinite(window[0]) and math.isfinite(window[1]) and window[0] < window[1]):
                raise ConfigError(f"window {window} must be finite with lo < hi")
        try:
            kappa = float(doc.get("kappa_target", KAPPA_DEFAULT))
            seed = int(doc.get("seed", 0))
            budget = int(doc.get("budget", 20000))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        if kappa <= 1:
            raise ConfigError("kappa_target must exceed 1")
        if seed < 0 or seed >= 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if budget < 10:
            raise ConfigError("budget must be at least 10")
        for key in ("experiment", "verify"):
            if not isinstance(doc.get(key, {}), dict):
                raise ConfigError(f"'{key}' must be an object")
        return cls(curve, dim, window, kappa, seed, budget, str(doc.get("out", "out")), dict(doc.get("experiment", {})), dict(doc.get("verify", {})))

    @property
    def P(self) -> CurvePoly:
        return CurvePoly.from_coeffs(self.curve)

    def to_json(self) -> dict:
        row = asdict(self)
        row.pop("out")
        row["window"] = None if self.window is None else list(self.window)
        return row

    def hash(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# deterministic output


def _emit(x, indent: int) -> str:
    pad, inner = " " * indent, " " * (indent + 2)
    if isinstance(x, dict):
        if not x:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {_emit(v, indent + 2)}" for k, v in sorted(x.items(), key=lambda kv: str(kv[0]))]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(x, (list, tuple)):
        if not x:
            return "[]"
        return "[\n" + ",\n".join(inner + _emit(v, indent + 2) for v in x) + "\n" + pad + "]"
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return "null"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        v = float(x)
        return format(v, ".17g") if math.isfinite(v) else json.dumps(str(v))
    if isinstance(x, Fraction):
        return json.dumps(str(x))
    return json.dumps(str(x))


def dumps17(doc) -> str:
    """JSON with sorted keys and every float at 17 significant digits."""
    return _emit(doc, 0) + "\n"


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    log.info("wrote %s", path)


def write_report(rep: experiments.SweepReport, out: Path, config_hash: str) -> list[Path]:
    header = f"config_hash: {config_hash}"
    files = [out / f"{rep.name}{ext}" for ext in (".csv", ".dat", ".json")]
    _write(files[0], rep.to_csv(header))
    _write(files[1], rep.plot_data(header))
    _write(files[2], dumps17({"config_hash": config_hash, **rep.to_json()}))
    return files


# ---------------------------------------------------------------------------
# commands


def cmd_decompose(cfg: RunConfig, out: Path) -> int:
    dec = decompose(cfg.P, cfg.window, cfg.kappa_target, seed=cfg.seed)
    doc = {"config_hash": cfg.hash(), **dec.to_json()}
    _write(out / "decomposition.json", dumps17(doc))
    return EXIT_OK


def _verify_boxes(P: CurvePoly, ci) -> tuple[list[Box], list[Box]]:
    """E around the origin and F around P(t_mid), scaled to the interval."""
    d = P.dim
    t_mid = 0.5 * (ci.lo + ci.hi)
    extent = np.abs(P.point(ci.hi) - P.point(ci.lo))
    widths = np.maximum(extent * 0.25, 1e-3) / 2
    E = [Box.centered(np.zeros(d), widths)]
    F = [Box.centered(P.point(t_mid), widths)]
    return E, F


def cmd_verify(cfg: RunConfig, out: Path) -> int:
    P = cfg.P
    d = P.dim
    opts = cfg.verify
    dec = decompose(P, cfg.window, cfg.kappa_target, seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    report: dict = {"config_hash": cfg.hash(), "intervals": []}
    geom_rows = []
    ok = True
    for i, ci in enumerate(dec.intervals):
        g = geomcheck.geom_constant_estimate(P, ci, budget=cfg.budget, seed=cfg.seed, interval_id=i)
        inj = geomcheck.injectivity_probe(P, ci, budget=min(cfg.budget, 20000), seed=cfg.seed, interval_id=i)
        entry = {"interval": ci.to_json(), "geom": g.to_json(), "injectivity": inj.to_json()}
        passed = g.passed and inj.passed
        if d == 2:
            res = []
            for _ in range(int(opts.get("identity_samples", 8))):
                s, t = rng.uniform(ci.lo, ci.hi, 2)
                res.append(geomcheck.d2_jacobian_identity_check(P, (ci.lo, ci.hi), float(s), float(t)))
            entry["identity_max_residual"] = max(res)
            entry["identity_passed"] = max(res) <= 1e-8
            passed = passed and entry["identity_passed"]
        entry["passed"] = passed
        ok = ok and passed
        report["intervals"].append(entry)
        geom_rows.append(g.csv_row())

    # refinement on a discretised operator and the iterated bound on the widest interval
    ci = max(dec.intervals, key=lambda c: c.hi - c.lo)
    E, F = _verify_boxes(P, ci)
    res = int(opts.get("cells", 2))
    cells_E, cells_F = E[0].subdivide(res), F[0].subdivide(res)
    comb: dict = {"interval": ci.to_json()}
    try:
        kern, mu, nu = combinat.discretize_operator(P, ci, cells_F, cells_E)
        trace = combinat.refine(kern, range(len(cells_E)), range(len(cells_F)), depth=5, mu=mu, nu=nu)
        comb["refine"] = {"checks": trace.check(), "alpha": str(trace.alpha), "beta": str(trace.beta)}
        ok = ok and trace.valid
    except combinat.EmptyPairing as exc:
        comb["refine"] = {"error": str(exc)}
        ok = False
    try:
        sets = combinat.structured_params(P, ci, E, F, d, seed=cfg.seed)
        alpha, beta = sets.floors["alpha"], sets.floors["beta"]
        chk = combinat.iterated_bound_check(ci, sets, alpha, beta, d, "verify", c0=float(opts.get("c0", 0.0)))
        comb["structured"] = sets.floors
        comb["iterated"] = chk
        comb["cases"] = combinat.case_diagnostics(ci, sets, alpha, beta, d)
        ok = ok and chk["passed"]
    except combinat.FloorViolation as exc:
        comb["structured"] = {"error": str(exc)}
        ok = False
    n_suite = int(opts.get("suite_configs", 20))
    if n_suite:
        rows = combinat.random_suite(ci.k, d, n_suite, seed=cfg.seed, regime="alpha<=beta" if d == 2 else "any")
        comb["suite"] = {"k": ci.k, "configs": n_suite, "min_ratio": min(r["ratio"] for r in rows)}
        ok = ok and comb["suite"]["min_ratio"] > 0
    report["combinat"] = comb
    report["passed"] = ok
    _write(out / "verify.json", dumps17(experiments.jsonable(report)))
    header = f"# config_hash: {cfg.hash()}\n"
    cols = ["interval_id", "C_hat"] + [f"t{j + 1}" for j in range(d)] + ["samples"]
    lines = [",".join(cols)] + [",".join(experiments.fmt(v) for v in row) for row in geom_rows]
    _write(out / "geom.csv", header + "\n".join(lines) + "\n")
    return EXIT_OK if ok else EXIT_FAILED


def run_experiment(which: str, cfg: RunConfig) -> list[experiments.SweepReport]:
    opts = cfg.experiment
    d = cfg.dimension
    if which == "hull":
        return [experiments.hull_report(d)]
    if which == "scaling":
        p = float(opts.get("p", 1.5 if d == 2 else 2.0))
        deltas = [float(x) for x in opts.get("deltas", [2.0**-j for j in range(1, 7)])]
        q = opts.get("q")
        return [experiments.scaling_extremizer_sweep(cfg.P, d, p, deltas, q=None if q is None else float(q))]
    if which == "sin":
        deltas = [float(x) for x in opts.get("deltas", [2.0**-j for j in range(1, 7)])]
        return [experiments.sin_obstruction_probe(int(opts.get("k", 2)), deltas)]
    if which == "sharpness":
        N_list = [int(n) for n in opts.get("N", [8, 16, 32, 64])]
        rs = opts.get("r", [(d + 1) / 2, d + 1, "inf"])
        return [experiments.sharpness_counterexample(d, N_list, math.inf if r in ("inf", None) else float(r)) for r in rs]
    if which == "uniform":
        return [
            experiments.uniform_family_sweep(
                d,
                int(opts.get("degree_bound", 4)),
                int(opts.get("num_curves", 50)),
                seed=cfg.seed,
                factor=float(opts.get("factor", 50.0)),
            )
        ]
    raise ConfigError(f"unknown experiment {which!r}; choose from {', '.join(EXPERIMENTS)}")


def cmd_experiment(cfg: RunConfig, out: Path, which: str | None) -> int:
    which = which or cfg.experiment.get("name")
    if which not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {which!r}; choose from {', '.join(EXPERIMENTS)}")
    reports = run_experiment(which, cfg)
    for rep in reports:
        write_report(rep, out, cfg.hash())
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAILED


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="polyavg", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=("decompose", "verify", "experiment"))
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", help="output directory (default ./out)")
    ap.add_argument("--seed", type=int, help="override the config seed (unsigned 64-bit)")
    ap.add_argument("--budget", type=int, help="override the sampling budget")
    ap.add_argument("--experiment", help=f"one of {', '.join(EXPERIMENTS)}")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def load_config(args) -> RunConfig:
    try:
        doc = json.loads(Path(args.config).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {args.config}: {exc}") from None
    if isinstance(doc, dict):
        if args.seed is not None:
            doc["seed"] = args.seed
        if args.budget is not None:
            doc["budget"] = args.budget
    return RunConfig.from_dict(doc)


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args)
        out = Path(args.out or cfg.out or "out")
        if args.command == "decompose":
            return cmd_decompose(cfg, out)
        if args.command == "verify":
            return cmd_verify(cfg, out)
        return cmd_experiment(cfg, out, args.experiment)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DegenerateCurve as exc:
        print(f"degenerate curve: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE


if __name__ == "__main__":
    sys.exit(main())
