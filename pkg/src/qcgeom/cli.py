"""Batch front end: JSON job configs in, CSV/JSON tables and plot data out.

    qcgeom conjugate --config ising.json --out results/
    qcgeom deform --config qft.json --out results/ --seed 3

Each job may declare an ``expect`` block; the process exits with status 1
when any declared threshold is missed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import curvature as curv
from .deform import DeformationFailed, DeformationTrace, builtin_target, continue_in_q, read_unitary, write_unitary
from .extension import boolean_unitaries, canonical_extension, special_extension_check
from .geodesic import canonical_hamiltonian, conserved_quantities, integrate_geodesic, transverse_ising
from .jacobi import ConjugateScan, conjugate_scan
from .metric import PenaltyMetric
from .pauli import PauliVector, algebra, from_terms

log = logging.getLogger(__name__)

COMMANDS = ("geodesic", "conjugate", "deform", "curvature", "extend")

_REQUIRED = {
    "geodesic": {"T": (int, float), "steps": int},
    "conjugate": {"T": (int, float), "steps": int},
    "deform": {"target": (str, dict), "T": (int, float), "q_end": (int, float)},
    "curvature": {"n": int, "q": (int, float)},
    "extend": {},
}


class SchemaError(ValueError):
    pass


@dataclass
class JobConfig:
    command: str
    params: dict = field(default_factory=dict)
    metric: dict | None = None
    seed: int = 0
    out: str = "."
    expect: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise SchemaError(f"command must be one of {COMMANDS}, got {self.command!r}")
        for key, typ in _REQUIRED[self.command].items():
            if key not in self.params:
                raise SchemaError(f"{self.command}: missing parameter {key!r}")
            if not isinstance(self.params[key], typ) or isinstance(self.params[key], bool):
                raise SchemaError(f"{self.command}: parameter {key!r} has the wrong type")
        if self.command in ("geodesic", "conjugate") and self.metric is None:
            raise SchemaError(f"{self.command}: a metric is required")
        if self.metric is not None:
            try:
                PenaltyMetric.from_dict(self.metric)
            except (KeyError, ValueError, TypeError) as exc:
                raise SchemaError(f"bad metric: {exc}") from exc
        if not isinstance(self.seed, int):
            raise SchemaError("seed must be an integer")

    def to_dict(self) -> dict:
        d = {"command": self.command, "params": self.params, "seed": self.seed, "out": self.out}
        if self.metric is not None:
            d["metric"] = self.metric
        if self.expect:
            d["expect"] = self.expect
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "JobConfig":
        unknown = set(d) - {"command", "params", "metric", "seed", "out", "expect"}
        if unknown:
            raise SchemaError(f"unknown top-level keys {sorted(unknown)}")
        if "command" not in d:
            raise SchemaError("missing 'command'")
        return cls(
            command=d["command"],
            params=dict(d.get("params", {})),
            metric=d.get("metric"),
            seed=d.get("seed", 0),
            out=d.get("out", "."),
            expect=dict(d.get("expect", {})),
        )

    @classmethod
    def from_json(cls, text: str) -> "JobConfig":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc}") from exc


@dataclass
class JobResult:
    status: int
    outputs: list[str]
    checks: dict


# inputs ------------------------------------------------------------------------


def _resolve(path: str, base: Path) -> Path:
    p = Path(path)
    return p if p.is_absolute() else base / p


def _target(spec, n: int, seed: int, base: Path) -> np.ndarray:
    if isinstance(spec, str):
        if spec in ("qft", "haar_random"):
            return builtin_target(spec, n, seed)
        return read_unitary(_resolve(spec, base).read_text())
    if isinstance(spec, dict):
        if "builtin" in spec:
            return builtin_target(spec["builtin"], int(spec.get("n", n)), int(spec.get("seed", seed)))
        if "file" in spec:
            return read_unitary(_resolve(spec["file"], base).read_text())
    raise SchemaError(f"cannot interpret target {spec!r}")


def _hamiltonian(spec, n: int, base: Path) -> np.ndarray:
    if isinstance(spec, dict) and "ising" in spec:
        o = spec["ising"]
        return transverse_ising(int(o.get("n", n)), float(o.get("h", 1.0)), float(o.get("J", 1.0)),
                                bool(o.get("periodic", True)))
    if isinstance(spec, dict) and "terms" in spec:
        return from_terms(spec["terms"])
    if isinstance(spec, dict) and "csv" in spec:
        return PauliVector.from_csv(_resolve(spec["csv"], base).read_text()).to_matrix()
    if isinstance(spec, dict) and "target_unitary" in spec:
        return canonical_hamiltonian(_target(spec["target_unitary"], n, 0, base), float(spec["T"]))
    raise SchemaError(f"cannot interpret operator {spec!r}")


def _initial_dual(cfg: JobConfig, metric: PenaltyMetric, base: Path) -> np.ndarray:
    p = cfg.params
    if "L0" in p:
        L0 = _hamiltonian(p["L0"], metric.n, base)
        if isinstance(p["L0"], dict) and "target_unitary" in p["L0"]:
            return metric.G(L0)
        return L0
    if "H0" in p:
        return metric.G(_hamiltonian(p["H0"], metric.n, base))
    raise SchemaError(f"{cfg.command}: need 'L0' or 'H0'")


# plot data ------------------------------------------------------------------------


def emit_plot_data(obj, kind: str | None = None) -> str:
    """Whitespace-delimited columns with a commented header naming each column.

    ``kind``: for a ConjugateScan, ``"scan"`` (t, log10 sigma_min) or
    ``"propagator"`` (t, sigma_min); for a DeformationTrace, ``"trace"``
    (q and every L_q(0) coefficient, tagged by easy/hard class) or
    ``"length"`` (q, length, endpoint error).
    """
    lines = []
    if isinstance(obj, ConjugateScan):
        kind = kind or "scan"
        if kind == "scan":
            lines.append("# t log10_sigma_min")
            for t, s in zip(obj.times, obj.sigma_min):
                lines.append(f"{t:.17g} {np.log10(max(s, 1e-300)):.17g}")
        elif kind == "propagator":
            lines.append("# t sigma_min_J_t")
            for t, s in zip(obj.times, obj.sigma_min):
                lines.append(f"{t:.17g} {s:.17g}")
        else:
            raise ValueError(f"unknown plot kind {kind!r} for a scan")
    elif isinstance(obj, DeformationTrace):
        kind = kind or "trace"
        if kind == "trace":
            alg = algebra(obj.n)
            easy = ~obj.hard_mask if obj.hard_mask is not None else alg.weights <= 2
            cols = ["q"] + [f"{w}[{'P' if e else 'Q'}]" for w, e in zip(alg.words[1:], easy[1:])]
            lines.append("# " + " ".join(cols))
            for nd in obj.nodes:
                lines.append(" ".join([f"{nd.q:.17g}"] + [f"{c:.17g}" for c in nd.l0[1:]]))
        elif kind == "length":
            lines.append("# q length endpoint_error sigma_min_JT")
            for nd in obj.nodes:
                lines.append(f"{nd.q:.17g} {nd.length:.17g} {nd.endpoint_error:.17g} {nd.sigma_min:.17g}")
        else:
            raise ValueError(f"unknown plot kind {kind!r} for a trace")
    else:
        raise TypeError("emit_plot_data expects a ConjugateScan or DeformationTrace")
    return "\n".join(lines) + "\n"


# runners ---------------------------------------------------------------------------


def _write(out: Path, name: str, text: str, outputs: list[str]) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)
    outputs.append(str(out / name))


def _in_range(value, bounds) -> bool:
    return value is not None and bounds[0] <= value <= bounds[1]


def _run_geodesic(cfg, out, base, outputs, checks):
    metric = PenaltyMetric.from_dict(cfg.metric)
    L0 = _initial_dual(cfg, metric, base)
    traj = integrate_geodesic(L0, metric, float(cfg.params["T"]), int(cfg.params["steps"]))
    _write(out, "trajectory.csv", traj.to_csv(bool(cfg.params.get("include_unitary", False))), outputs)
    rep = conserved_quantities(traj)
    summary = {
        "length": traj.length,
        "max_conjugation_drift": rep.max_conjugation_drift,
        "max_speed_drift": rep.max_speed_drift,
        "max_one_body_drift": rep.max_one_body_drift,
        "unitarity_repairs": traj.repairs,
    }
    _write(out, "conservation.json", json.dumps(summary, indent=2, sort_keys=True) + "\n", outputs)
    if "max_drift" in cfg.expect:
        checks["max_drift"] = rep.max_conjugation_drift <= float(cfg.expect["max_drift"])


def _run_conjugate(cfg, out, base, outputs, checks):
    metric = PenaltyMetric.from_dict(cfg.metric)
    L0 = _initial_dual(cfg, metric, base)
    traj = integrate_geodesic(L0, metric, float(cfg.params["T"]), int(cfg.params["steps"]))
    scan = conjugate_scan(traj)
    _write(out, "scan.csv", scan.to_csv(), outputs)
    _write(out, "fig_scan.dat", emit_plot_data(scan, "scan"), outputs)
    dips = {"t_c": scan.t_c, "dips": [[t, s] for t, s in scan.refined], "threshold": scan.threshold}
    _write(out, "dips.json", json.dumps(dips, indent=2, sort_keys=True) + "\n", outputs)
    if "t_c" in cfg.expect:
        checks["t_c"] = _in_range(scan.t_c, cfg.expect["t_c"])


def _run_deform(cfg, out, base, outputs, checks):
    p = cfg.params
    metric = PenaltyMetric.from_dict(cfg.metric) if cfg.metric else None
    n = metric.n if metric else int(p.get("n", 3))
    U = _target(p["target"], n, cfg.seed, base)
    T = float(p["T"])
    try:
        trace = continue_in_q(
            U, T, float(p["q_end"]),
            metric=metric,
            nodes_per_decade=int(p.get("nodes_per_decade", 64)),
            steps=int(p.get("steps", 1000)),
            tol=float(p.get("tol", 1e-6)),
        )
        failed = False
    except DeformationFailed as exc:
        log.error("%s", exc)
        trace, failed = exc.trace, True
    trace.meta["seed"] = cfg.seed
    _write(out, "trace.csv", trace.to_csv(), outputs)
    _write(out, "fig_coefficients.dat", emit_plot_data(trace, "trace"), outputs)
    _write(out, "fig_length.dat", emit_plot_data(trace, "length"), outputs)
    _write(out, "target.txt", write_unitary(U), outputs)
    if trace.final_trajectory is not None and p.get("final_scan", True):
        scan = conjugate_scan(trace.final_trajectory, refine=False)
        _write(out, "fig_final_propagator.dat", emit_plot_data(scan, "propagator"), outputs)
    checks["completed"] = not failed
    if "first_flag_q" in cfg.expect:
        checks["first_flag_q"] = _in_range(trace.first_flag_q, cfg.expect["first_flag_q"])
    if "final_error_max" in cfg.expect:
        checks["final_error_max"] = trace.final_error <= float(cfg.expect["final_error_max"])


def _run_curvature(cfg, out, base, outputs, checks, group="u", jobs=1):
    p = cfg.params
    rep = curv.curvature_report(
        int(p["n"]), float(p["q"]),
        flow_steps=int(p.get("flow_steps", 0)),
        ds=float(p.get("ds", 1e-4)),
        mc_samples=int(p.get("mc_samples", 0)),
        seed=cfg.seed,
        group=p.get("group", group),
        jobs=jobs,
    )
    _write(out, "curvature.json", rep.to_json() + "\n", outputs)
    if "scalar_rel_diff_max" in cfg.expect:
        rel = abs(rep.scalar - rep.scalar_contraction) / max(1.0, abs(rep.scalar_contraction))
        checks["scalar_rel_diff_max"] = rel <= float(cfg.expect["scalar_rel_diff_max"])


def _run_extend(cfg, out, base, outputs, checks):
    p = cfg.params
    result: dict = {}
    if "truth_table" in p:
        Uf, Vf = boolean_unitaries(p["truth_table"])
        _write(out, "U_f.txt", write_unitary(Uf), outputs)
        _write(out, "V_f.txt", write_unitary(Vf), outputs)
        result["truth_table"] = p["truth_table"]
    if "unitary" in p:
        n = int(p.get("n", 1))
        U = _target(p["unitary"], n, cfg.seed, base)
        m = int(p.get("m", 1))
        Um = canonical_extension(U, m)
        ext, special, _ = special_extension_check(Um, U)
        _write(out, "extension.txt", write_unitary(Um), outputs)
        result.update({"m": m, "is_extension": ext, "is_special": special})
        checks["special_extension"] = bool(ext and special)
    _write(out, "extend.json", json.dumps(result, indent=2, sort_keys=True) + "\n", outputs)


def run(cfg: JobConfig, base: Path | None = None, group: str = "u", jobs: int = 1) -> JobResult:
    """Execute one job; status 1 when a declared expectation fails."""
    base = base or Path.cwd()
    out = _resolve(cfg.out, base)
    outputs: list[str] = []
    checks: dict = {}
    if cfg.command == "geodesic":
        _run_geodesic(cfg, out, base, outputs, checks)
    elif cfg.command == "conjugate":
        _run_conjugate(cfg, out, base, outputs, checks)
    elif cfg.command == "deform":
        _run_deform(cfg, out, base, outputs, checks)
    elif cfg.command == "curvature":
        _run_curvature(cfg, out, base, outputs, checks, group, jobs)
    else:
        _run_extend(cfg, out, base, outputs, checks)
    _write(out, "config.json", cfg.to_json() + "\n", outputs)
    _write(out, "checks.json", json.dumps(checks, indent=2, sort_keys=True) + "\n", outputs)
    status = 0 if all(checks.values()) else 1
    return JobResult(status, outputs, checks)


def _run_file(args) -> int:
    path, command, out, seed, group = args
    cfg_path = Path(path)
    d = json.loads(cfg_path.read_text())
    d.setdefault("command", command)
    if d["command"] != command:
        raise SchemaError(f"{path}: config is for {d['command']!r}, not {command!r}")
    if out is not None:
        # command-line paths are relative to the working directory, config paths to the config
        d["out"] = str(Path(out).resolve())
    if seed is not None:
        d["seed"] = seed
    cfg = JobConfig.from_dict(d)
    res = run(cfg, base=cfg_path.parent, group=group)
    for k, ok in sorted(res.checks.items()):
        print(f"{cfg_path.name}: {k}: {'PASS' if ok else 'FAIL'}")
    return res.status


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", action="append", required=True, metavar="FILE",
                        help="job config JSON (repeat for several jobs)")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides the config)")
    common.add_argument("--seed", type=int, help="seed (overrides the config)")
    common.add_argument("--jobs", type=int, default=1, metavar="N", help="run N configs in parallel")
    common.add_argument("--group", choices=("u", "su"), default="u",
                        help="averaging constant for the curvature average")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="qcgeom", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "geodesic": "integrate a geodesic and report conserved quantities",
        "conjugate": "scan a geodesic for conjugate points",
        "deform": "continue a geodesic to a target unitary in the penalty parameter",
        "curvature": "Ricci, scalar curvature, flow steps and curvature averages",
        "extend": "ancilla extensions and Boolean-function unitaries",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    multi = len(args.config) > 1
    work = []
    for path in args.config:
        if multi and args.out is not None:
            # one subdirectory per config
            work.append((path, args.command, str(Path(args.out) / Path(path).stem), args.seed, args.group))
        else:
            work.append((path, args.command, args.out, args.seed, args.group))
    try:
        if args.jobs > 1 and len(work) > 1:
            with ProcessPoolExecutor(args.jobs) as ex:
                statuses = list(ex.map(_run_file, work))
        else:
            statuses = [_run_file(w) for w in work]
    except (SchemaError, OSError) as exc:
        print(f"qcgeom: error: {exc}", file=sys.stderr)
        return 2
    return max(statuses)


if __name__ == "__main__":
    sys.exit(main())
