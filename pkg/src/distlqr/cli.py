"""``dist-lqr`` command line driver.

    dist-lqr <solve|dist|compare|optimize|bound> --config PATH [--seed N] [--out DIR] [--check]

Exit codes: 0 success, 2 invalid config, 3 solver failure, 4 stability failure, 5 I/O.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import rng as rngmod
from .bound import BoundInputs, bound_at, bound_constant
from .config import ExperimentConfig, load_config
from .errors import (
    ConfigError,
    HypothesisViolation,
    InstanceError,
    NonConvergence,
    StabilityBoundary,
    UnstableGain,
)
from .linsys import close_loop, is_bound_admissible
from .lqr import solve_lyapunov, solve_riccati
from .montecarlo import RolloutConfig, build_mc_distribution, cost_scale
from .optimizer import OptimizerTrace, PGConfig, run
from .returns import (
    EmpiricalDistribution,
    ReturnModel,
    build_empirical,
    density_bound_estimate,
    draw_noise,
    histogram,
    ks_distance,
    truncated_return,
)

log = logging.getLogger("distlqr")

COMMANDS = ("solve", "dist", "compare", "optimize", "bound")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_STABILITY = 4
EXIT_IO = 5

MC_HORIZON = 60


def fmt(v) -> str:
    """Round-trip text for CSV cells."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    return repr(float(v))


def write_csv(path: Path, header, rows) -> None:
    """Atomically write a CSV file (temp file in the same directory, then rename)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    _atomic_write(path, buf.getvalue())


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_meta(path: Path, meta: dict) -> None:
    _atomic_write(path, json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _entries(name, M):
    M = np.atleast_2d(M)
    return [(f"{name}[{i},{j}]", M[i, j]) for i in range(M.shape[0]) for j in range(M.shape[1])]


def _entry_names(name, shape):
    return [f"{name}[{i},{j}]" for i in range(shape[0]) for j in range(shape[1])]


class Run:
    """Resolved problem for one command invocation."""

    def __init__(self, cfg: ExperimentConfig, command: str, seed: int, out: Path):
        self.cfg = cfg
        self.command = command
        self.task = cfg.task_for(command)
        self.seed = seed
        self.out = out
        try:
            self.sys = cfg.system.build()
            self.noise = cfg.noise.build()
        except InstanceError as exc:
            raise ConfigError(str(exc)) from None
        if self.noise.dim != self.sys.n:
            raise ConfigError(f"noise dimension {self.noise.dim} does not match state dimension {self.sys.n}")
        for name in ("x",):
            if hasattr(self.task, name) and len(getattr(self.task, name)) != self.sys.n:
                raise ConfigError(f"task.{command}.{name} must have length {self.sys.n}")
        if command == "optimize":
            try:
                self.sys.gain(self.task.K0)
            except InstanceError as exc:
                raise ConfigError(f"task.optimize.K0: {exc}") from None

    def path(self, name: str) -> Path:
        return self.out / f"{self.cfg.output.prefix}{name}"

    def gain(self):
        """``(K, certificate)`` for the task's gain; Riccati when K is 'optimal'."""
        K = getattr(self.task, "K", "optimal")
        if K == "optimal":
            cert, K = solve_riccati(self.sys, self.task.tol, self.task.max_iter)
            return K, cert
        try:
            K = self.sys.gain(K)
        except InstanceError as exc:
            raise ConfigError(f"task.{self.command}.K: {exc}") from None
        return K, solve_lyapunov(self.sys, K, self.task.tol, self.task.max_iter)

    def check(self) -> None:
        """Every deterministic failure the command could hit, without sampling."""
        if self.command == "optimize":
            if not is_bound_admissible(close_loop(self.sys, self.task.K0), self.sys.gamma).mean_square_stable:
                raise UnstableGain("task.optimize.K0 is not mean-square stable")
        else:
            K, _ = self.gain()
            if self.command == "bound":
                BoundInputs.from_problem(self.sys, K, self.noise, self.task.x, self.task.L0)
        target = self.out
        while not target.exists():
            target = target.parent
        if not os.access(target, os.W_OK):
            raise OSError(f"output directory {self.out} is not writable")


def cmd_solve(r: Run) -> list[Path]:
    K, cert = r.gain()
    cl = close_loop(r.sys, K)
    flags = is_bound_admissible(cl, r.sys.gamma)
    rows = _entries("P", cert.P) + _entries("K", K)
    rows += [
        ("residual", cert.residual),
        ("iterations", cert.iterations),
        ("rho_K", cl.rho_K),
        ("spectral_radius", cl.spectral_radius),
        ("mean_square_stable", flags.mean_square_stable),
        ("norm_contractive", flags.norm_contractive),
        ("discount_contractive", flags.discount_contractive),
    ]
    p = r.path("solve.csv")
    write_csv(p, ["field", "value"], rows)
    return [p]


def _common_range(dists, explicit):
    if explicit is not None:
        return tuple(explicit)
    lo = min(float(d.samples[0]) for d in dists)
    hi = max(float(d.samples[-1]) for d in dists)
    return (lo - 0.5, hi + 0.5) if lo == hi else (lo, hi)


def _mc_reference(r: Run, K, cert, x, horizon, M, meta) -> EmpiricalDistribution:
    """Monte Carlo reference; without noise the exact deterministic return is used instead."""
    meta["mc_horizon"] = horizon
    if r.noise.is_zero:
        # a finite rollout would differ from x'Px by the discarded tail and rounding
        meta["mc_reference"] = "exact deterministic return (noise is identically zero)"
        return EmpiricalDistribution(np.full(M, float(x @ cert.P @ x)))
    return build_mc_distribution(r.sys, K, r.noise, x, RolloutConfig(horizon, M), rngmod.stream(r.seed, "mc"))


def cmd_dist(r: Run) -> list[Path]:
    t = r.task
    K, cert = r.gain()
    x = np.asarray(t.x, dtype=float)
    timings = {}
    dists = {}
    for N in t.N:
        t0 = time.perf_counter()
        model = ReturnModel(r.sys, K, cert, r.noise, N)
        dists[f"N{N}"] = build_empirical(model, x, t.M, rngmod.stream(r.seed, "dist", N))
        timings[f"N{N}"] = time.perf_counter() - t0
    meta = {"command": "dist", "seed": r.seed, "M": t.M, "bins": t.bins, "K": np.asarray(K).tolist()}
    if t.mc:
        horizon = t.horizon or MC_HORIZON
        rcfg = RolloutConfig(horizon, t.M)
        t0 = time.perf_counter()
        dists["MC"] = _mc_reference(r, K, cert, x, horizon, t.M, meta)
        timings["MC"] = time.perf_counter() - t0
        meta["mc_tail_estimate"] = rcfg.tail_estimate(r.sys.gamma, cost_scale(r.sys, K, r.noise, x))
        meta["ks_to_mc"] = {k: ks_distance(d, dists["MC"]) for k, d in dists.items() if k != "MC"}
    rng_ = _common_range(dists.values(), t.range)
    meta["range"] = list(rng_)
    meta["timings_s"] = timings
    written = []
    for key, d in dists.items():
        centers, freq = histogram(d, t.bins, rng_)
        p = r.path(f"dist_{key}.csv")
        write_csv(p, ["bin_center", "frequency"], zip(centers, freq))
        ps = r.path(f"dist_{key}_samples.csv")
        write_csv(ps, ["sample"], ((v,) for v in d.samples))
        written += [p, ps]
    pm = r.path(f"{r.command}_meta.json")
    write_meta(pm, meta)
    return written + [pm]


def cmd_compare(r: Run) -> list[Path]:
    t = r.task
    K, cert = r.gain()
    x = np.asarray(t.x, dtype=float)
    depth = max(t.N + ([t.reference] if isinstance(t.reference, int) else []))
    base = ReturnModel(r.sys, K, cert, r.noise, depth)
    # one noise block shared by every depth (common random numbers)
    W = draw_noise(base, t.M, rngmod.stream(r.seed, "compare"), depth)

    def at_depth(N):
        if N == 0 or r.noise.is_zero:
            return EmpiricalDistribution(np.full(t.M, float(x @ cert.P @ x)))
        return EmpiricalDistribution(truncated_return(base, x, W, depth=N))

    meta = {"command": "compare", "seed": r.seed, "M": t.M, "reference": t.reference}
    if t.reference == "mc":
        ref = _mc_reference(r, K, cert, x, t.horizon or MC_HORIZON, t.M, meta)
    else:
        ref = at_depth(t.reference)

    binputs = None
    try:
        L0 = t.L0
        if L0 == "estimate":
            L0 = density_bound_estimate(ref)
            meta["L0_estimate"] = L0
        binputs = BoundInputs.from_problem(r.sys, K, r.noise, x, L0)
    except HypothesisViolation as exc:
        meta["bound"] = f"not computable: {exc}"

    rows = []
    for N in t.N:
        b = bound_at(binputs, N) if binputs is not None and N >= 1 else None
        rows.append((N, ks_distance(at_depth(N), ref), b))
    p = r.path("ks_vs_N.csv")
    write_csv(p, ["N", "ks_to_reference", "bound_at_N"], rows)
    pm = r.path(f"{r.command}_meta.json")
    write_meta(pm, meta)
    return [p, pm]


def cmd_bound(r: Run) -> list[Path]:
    t = r.task
    K, _ = r.gain()
    b = BoundInputs.from_problem(r.sys, K, r.noise, t.x, t.L0)
    const = bound_constant(b)
    rows = [(N, const.C_over_L0, const.C, bound_at(b, N)) for N in t.N]
    p = r.path("bound.csv")
    write_csv(p, ["N", "C_over_L0", "C", "bound_at_N"], rows)
    return [p]


def _trace_rows(trace: OptimizerTrace):
    yield (0, *np.ravel(trace.K0), trace.bootstrap_objective, 0.0, 0, 0)
    for rec in trace.records:
        yield (rec.t, *np.ravel(rec.K_next), rec.objective, float(np.linalg.norm(rec.grad)),
               rec.stability_resamples, rec.step_halvings)


def cmd_optimize(r: Run) -> list[Path]:
    t = r.task
    x = np.asarray(t.x, dtype=float)
    K0 = r.sys.gain(t.K0)
    names = _entry_names("K", K0.shape)
    header = ["t", *names, "objective", "grad_norm", "stability_resamples", "step_halvings"]
    written, traces = [], []
    for s in t.seeds:
        pg = PGConfig(eta=t.eta, delta=t.delta, episodes=t.episodes, N=t.N, M=t.M, alpha=t.alpha,
                      seed=rngmod.derive_seed(r.seed, "optimize", s), crn=t.crn)
        p = r.path(f"trace_{s}.csv")
        try:
            trace = run(r.sys, r.noise, x, K0, pg)
        except StabilityBoundary as exc:
            if exc.trace is not None:
                write_csv(p, header, _trace_rows(exc.trace))
            raise
        write_csv(p, header, _trace_rows(trace))
        written.append(p)
        traces.append(trace)
    gains = np.mean([tr.gains().reshape(len(tr.records) + 1, -1) for tr in traces], axis=0)
    objs = np.mean([[tr.bootstrap_objective, *tr.objectives()] for tr in traces], axis=0)
    p = r.path("summary.csv")
    write_csv(p, ["t", *[f"mean_{n}" for n in names], "mean_objective"],
              ((i, *g, o) for i, (g, o) in enumerate(zip(gains, objs))))
    return written + [p]


HANDLERS = {"solve": cmd_solve, "dist": cmd_dist, "compare": cmd_compare,
            "bound": cmd_bound, "optimize": cmd_optimize}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dist-lqr", description="Distributional LQR experiments")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="YAML or JSON experiment config")
    ap.add_argument("--seed", type=int, default=None, help="root seed (overrides the config)")
    ap.add_argument("--out", default=None, help="output directory (overrides the config)")
    ap.add_argument("--check", action="store_true", help="validate and run deterministic checks only")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        seed = cfg.seed if args.seed is None else args.seed
        if seed < 0:
            raise ConfigError("--seed must be non-negative")
        out = Path(args.out if args.out is not None else cfg.output.directory)
        r = Run(cfg, args.command, seed, out)
        if args.check:
            r.check()
            print(f"{args.command}: configuration OK")
            return EXIT_OK
        for p in HANDLERS[args.command](r):
            print(p)
        return EXIT_OK
    except (ConfigError, InstanceError) as exc:
        log.error("invalid configuration: %s", exc)
        return EXIT_CONFIG
    except NonConvergence as exc:
        log.error("solver failure: %s", exc)
        return EXIT_SOLVER
    except (UnstableGain, StabilityBoundary, HypothesisViolation) as exc:
        log.error("stability failure: %s", exc)
        return EXIT_STABILITY
    except OSError as exc:
        log.error("I/O failure: %s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
