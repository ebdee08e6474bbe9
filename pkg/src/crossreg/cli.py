"""Experiment harness: configure a problem, run the solver, emit CSV traces.

Subcommands:
  run                one problem / one regularizer, stops at acceptance
  sweep              one problem, several regularizers, full error curves
  estimator-report   per-step S_k against the true error norms (dense check)

Configuration comes from flags and/or a plain ``key = value`` file
(``--config``); flags override file entries. Floats are printed with 17
significant digits so traces round-trip exactly, and output files are
written to a temporary name and renamed, so no partial file survives an
error. Exit codes: 0 accepted stop, 2 max_k exhausted, 1 configuration
error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile
from dataclasses import dataclass, fields

import numpy as np

from . import aca, solver
from .problems import PROBLEM_NAMES, add_noise, get_problem
from .regularizers import RegMatrix, build, build_kron

__all__ = ["ExperimentConfig", "main", "run_experiment", "sweep", "estimator_report"]

REG_NAMES = ("l0", "l1", "l2", "l1kron", "l2kron")
TRACE_HEADER = "k,S_k,true_resid_fro,mu,term1,term2,rel_error,unique_evals"


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    problem: str = ""
    n: int = 0
    delta: float | None = None
    delta_rel: float | None = None
    eta: float = 1.0
    eta1: float = 1.0
    eta2: float = 1.0
    reg: str = "l0"
    max_k: int = 50
    seed: int = 0
    probe_factor: float = 50.0
    sk_mode: str = "consistent"
    dense_limit: int = 2048
    out: str | None = None

    def validate(self):
        if self.problem not in PROBLEM_NAMES:
            raise ConfigError(f"unknown problem {self.problem!r}; choose from {PROBLEM_NAMES}")
        if self.n < 1:
            raise ConfigError("problem size n must be positive")
        if (self.delta is None) == (self.delta_rel is None):
            raise ConfigError("give exactly one of delta / delta_rel")
        if self.reg not in REG_NAMES:
            raise ConfigError(f"unknown regularizer {self.reg!r}; choose from {REG_NAMES}")
        if self.sk_mode not in ("consistent", "paper-literal"):
            raise ConfigError("sk_mode must be 'consistent' or 'paper-literal'")
        if self.max_k < 1:
            raise ConfigError("max_k must be positive")
        if self.probe_factor <= 0:
            raise ConfigError("probe_factor must be positive")

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            lines.append(f"{f.name} = {v!r}" if isinstance(v, str) else f"{f.name} = {_fmt(v)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        known = {f.name: f for f in fields(cls)}
        cfg = cls()
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"config line {lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in known:
                raise ConfigError(f"config line {lineno}: unknown key {key!r}")
            setattr(cfg, key, _coerce(known[key].type, value))
        return cfg


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def _coerce(typename: str, value: str):
    value = value.strip().strip("'\"")
    if typename == "int":
        return int(value)
    if typename in ("float", "float | None"):
        return float(value)
    return value


def _build_reg(name: str, n: int) -> RegMatrix:
    if name.endswith("kron"):
        grid = math.isqrt(n)
        if grid * grid != n:
            raise ConfigError(f"{name} needs a square problem size, got n={n}")
        return build_kron(name[:2], grid)
    return build(name, n)


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def _write_atomic(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".crossreg-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _residual_fro_per_step(dense_a, model) -> list[float]:
    """||A - M_k||_F for k = 1..model.k by successive rank-one downdates."""
    resid = dense_a.copy()
    norms = []
    for l in range(model.k):
        resid -= np.outer(model.wc_stack[l], model.wr_stack[l])
        norms.append(float(np.linalg.norm(resid)))
    return norms


def _spectral_norm(a, seed: int = 0, tol: float = 1e-6, max_iter: int = 500) -> float:
    """Largest singular value by power iteration on A^T A."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(a.shape[1])
    x /= np.linalg.norm(x)
    prev = 0.0
    for _ in range(max_iter):
        y = a.T @ (a @ x)
        norm = float(np.linalg.norm(y))
        if norm == 0.0:
            return 0.0
        x = y / norm
        est = math.sqrt(norm)
        if abs(est - prev) <= tol * est:
            return est
        prev = est
    return prev


def run_experiment(config: ExperimentConfig, stop_at_acceptance: bool = True):
    """Run one configuration; returns (summary dict, trace csv text)."""
    config.validate()
    core = get_problem(config.problem, config.n)
    inst = add_noise(core, delta=config.delta, delta_rel=config.delta_rel, seed=config.seed)
    L = _build_reg(config.reg, config.n)
    result = solver.run_solver(
        inst.oracle,
        L,
        inst.g_noisy,
        inst.delta,
        eta1=config.eta1,
        eta2=config.eta2,
        eta=config.eta,
        max_k=min(config.max_k, config.n),
        probe_factor=config.probe_factor,
        seed=config.seed + 1,  # probe stream; noise uses config.seed
        sk_mode=config.sk_mode,
        x_exact=inst.x_exact,
        stop_at_acceptance=stop_at_acceptance,
    )

    fro = None
    if config.n <= config.dense_limit:
        fro = _residual_fro_per_step(core.dense(), result.model)

    lines = [TRACE_HEADER]
    for row in result.trace:
        fro_k = fro[row.k - 1] if fro is not None else None
        lines.append(
            ",".join(
                [
                    str(row.k),
                    _csv_cell(row.s_k),
                    _csv_cell(fro_k),
                    _csv_cell(row.mu),
                    _csv_cell(row.term1),
                    _csv_cell(row.term2),
                    _csv_cell(row.rel_error),
                    str(row.unique_evals),
                ]
            )
        )
    csv_text = "\n".join(lines) + "\n"

    dec = result.decision
    final_rel = None
    if result.solution is not None:
        final_rel = float(
            np.linalg.norm(result.solution.x - inst.x_exact) / np.linalg.norm(inst.x_exact)
        )
    summary = {
        "problem": config.problem,
        "n": config.n,
        "reg": config.reg,
        "accepted": dec.accepted,
        "k_star": dec.k_star,
        "mu_star": dec.mu_star,
        "s_k": dec.s_k,
        "rel_error": final_rel,
        "unique_evals": inst.oracle.counter.unique_entries,
        "pivot_rows_1based": [i + 1 for i in result.model.row_pivots],
        "pivot_cols_1based": [j + 1 for j in result.model.col_pivots],
    }
    return summary, csv_text


def sweep(config: ExperimentConfig, regs: list[str]):
    """Run several regularizers on one problem; returns per-reg results and a table.

    Runs go to max_k without stopping so the error curves are complete; the
    reported k_star is still the first accepted step. The ACA skeleton is
    identical across regularizers (it does not depend on L).
    """
    if not regs:
        raise ConfigError("sweep needs at least one regularizer")
    summaries = {}
    traces = {}
    for reg in regs:
        cfg = ExperimentConfig(**{f.name: getattr(config, f.name) for f in fields(config)})
        cfg.reg = reg
        summary, csv_text = run_experiment(cfg, stop_at_acceptance=False)
        summaries[reg] = summary
        traces[reg] = csv_text

    # Aligned per-k relative-error table for plotting.
    parsed = {}
    for reg, text in traces.items():
        rows = [line.split(",") for line in text.strip().splitlines()[1:]]
        parsed[reg] = {int(r[0]): r[6] for r in rows}
    kmax = max((max(d) for d in parsed.values() if d), default=0)
    table_lines = ["k," + ",".join(f"rel_error_{reg}" for reg in regs)]
    for k in range(1, kmax + 1):
        table_lines.append(f"{k}," + ",".join(parsed[reg].get(k, "") for reg in regs))
    table = "\n".join(table_lines) + "\n"
    return summaries, traces, table


def estimator_report(config: ExperimentConfig):
    """Per-step comparison of S_k with the true ||A - M_k|| and ||A - M_k||_F."""
    config.validate()
    if config.n > config.dense_limit:
        raise ConfigError(
            f"estimator-report materializes A densely; n={config.n} exceeds "
            f"dense_limit={config.dense_limit}"
        )
    core = get_problem(config.problem, config.n)
    dense_a = core.dense()
    m, n = dense_a.shape
    t = min(int(round(config.probe_factor * n)), m * n)
    model, probes = aca.init(core.oracle, t, seed=config.seed + 1)

    lines = ["k,S_k,true_resid_2,true_resid_fro"]
    resid = dense_a.copy()
    for k in range(1, min(config.max_k, n) + 1):
        try:
            aca.step(model, probes, core.oracle)
        except aca.RankExhausted:
            break
        s_k = aca.estimate_error(probes, (m, n), mode=config.sk_mode).s_k
        resid -= np.outer(model.wc_stack[k - 1], model.wr_stack[k - 1])
        spec = _spectral_norm(resid, seed=config.seed)
        fro = float(np.linalg.norm(resid))
        lines.append(f"{k},{_csv_cell(s_k)},{_csv_cell(spec)},{_csv_cell(fro)}")
    return "\n".join(lines) + "\n"


def _add_common_flags(p: argparse.ArgumentParser):
    # name validation happens in ExperimentConfig.validate so that bad
    # values exit with code 1, not argparse's 2
    p.add_argument("--config", help="key = value config file; flags override it")
    p.add_argument("--problem", help=f"one of {', '.join(PROBLEM_NAMES)}")
    p.add_argument("--n", type=int, help="problem size (perfect square for baart2d)")
    p.add_argument("--delta", type=float, help="absolute noise bound")
    p.add_argument("--delta-rel", type=float, help="noise bound as a factor of ||g_exact||")
    p.add_argument("--eta", type=float, help="discrepancy parameter (default 1.0)")
    p.add_argument("--eta1", type=float, help="stopping bound on S_k*||x|| (default 1.0)")
    p.add_argument("--eta2", type=float, help="stopping bound on ||M_k x - g|| (default 1.0)")
    p.add_argument("--reg", help=f"one of {', '.join(REG_NAMES)}")
    p.add_argument("--max-k", type=int, dest="max_k")
    p.add_argument("--seed", type=int)
    p.add_argument("--probe-factor", type=float, dest="probe_factor")
    p.add_argument("--sk-mode", dest="sk_mode", help="consistent | paper-literal")
    p.add_argument("--dense-limit", type=int, dest="dense_limit")
    p.add_argument("--out", help="output CSV path")


def _config_from_args(args) -> ExperimentConfig:
    if args.config:
        with open(args.config) as fh:
            cfg = ExperimentConfig.from_text(fh.read())
    else:
        cfg = ExperimentConfig()
    for f in fields(ExperimentConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            setattr(cfg, f.name, v)
    # A noise bound given on the command line replaces the file's choice of form.
    if args.delta is not None and args.delta_rel is None:
        cfg.delta_rel = None
    if args.delta_rel is not None and args.delta is None:
        cfg.delta = None
    return cfg


def _summary_line(summary) -> str:
    rel = summary["rel_error"]
    return (
        f"status={'accepted' if summary['accepted'] else 'max_k-exhausted'} "
        f"k_star={summary['k_star']} mu={_fmt(summary['mu_star'])} "
        f"rel_error={_fmt(rel) if rel is not None else 'n/a'} "
        f"unique_evals={summary['unique_evals']}"
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="crossreg",
        description="Cross-approximation Tikhonov solver for discrete ill-posed problems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="single experiment, stops at acceptance")
    _add_common_flags(p_run)
    p_run.add_argument("--verbose", action="store_true", help="print pivot indices (1-based)")

    p_sweep = sub.add_parser("sweep", help="compare regularizers on one problem")
    _add_common_flags(p_sweep)
    p_sweep.add_argument(
        "--regs", default="", help="comma-separated regularizer list, e.g. l0,l1,l2"
    )

    p_est = sub.add_parser("estimator-report", help="S_k vs true error norms (dense)")
    _add_common_flags(p_est)

    args = parser.parse_args(argv)
    try:
        cfg = _config_from_args(args)
        if args.command == "run":
            cfg.validate()
            summary, csv_text = run_experiment(cfg)
            out = cfg.out or f"{cfg.problem}_{cfg.reg}_trace.csv"
            _write_atomic(out, csv_text)
            print(_summary_line(summary))
            if args.verbose:
                print(f"pivot_rows={summary['pivot_rows_1based']}")
                print(f"pivot_cols={summary['pivot_cols_1based']}")
            print(f"trace={out}")
            return 0 if summary["accepted"] else 2
        if args.command == "sweep":
            regs = [r for r in args.regs.split(",") if r]
            for reg in regs:
                if reg not in REG_NAMES:
                    raise ConfigError(f"unknown regularizer {reg!r} in --regs")
            cfg.validate()
            summaries, traces, table = sweep(cfg, regs)
            out = cfg.out or f"{cfg.problem}_sweep.csv"
            stem, ext = os.path.splitext(out)
            for reg in regs:
                path = f"{stem}_{reg}{ext or '.csv'}"
                _write_atomic(path, traces[reg])
                print(f"{reg}: {_summary_line(summaries[reg])} trace={path}")
            _write_atomic(out, table)
            print(f"comparison={out}")
            return 0 if all(s["accepted"] for s in summaries.values()) else 2
        if args.command == "estimator-report":
            report = estimator_report(cfg)
            out = cfg.out or f"{cfg.problem}_estimator.csv"
            _write_atomic(out, report)
            print(f"report={out}")
            return 0
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
