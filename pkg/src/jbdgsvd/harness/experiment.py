"""One configured run end to end: build the pair, run JBD, extract, write files.

Outputs in ``config.out``:
  diagnostics.csv  one row per completed step
  estimates.csv    one row per extracted GSVD component
  history.csv      Ritz-value history of the extracted components
  report.txt       configuration, termination status and bound lines
All floats are written with 17 significant digits and nothing depends on the
clock, so a rerun with the same configuration is byte-identical.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from ..diagnostics import (
    ghat_bound, ghat_proxy, lemma41_column_residual, measure_g, orthogonality_level, theta_from,
)
from ..errors import InnerSolverStalled, InvalidInput, JbdError, LuckyBreakdown
from ..extract import (
    ExtractionOptions, attach_history, extract_right_vectors, extract_values, stagnation_step,
)
from ..jbd import JbdFactorization, JbdOptions, jbd_run
from ..oracle import cond_number, dense_qr
from ..sparse import StackedPair
from .generators import gen_A1L1, gen_A2L2, gen_L1d, gen_random
from .mmio import read_matrix_market

log = logging.getLogger(__name__)

DIAG_COLUMNS = (
    "step", "alpha", "beta", "hat_alpha", "hat_beta", "orth_v", "orth_u", "orth_uhat",
    "norm_g", "theta", "inner_iters", "criterion",
)
ESTIMATE_COLUMNS = (
    "index", "source", "c", "s", "gap", "residual", "x_available", "clipped", "stagnation_step",
)

EXIT_OK, EXIT_ERROR, EXIT_PARTIAL = 0, 1, 2


@dataclass(frozen=True)
class RunConfig:
    a: str | None = None          # Matrix Market path for A
    gen: str | None = None        # generator spec NAME:ARGS
    l: str | None = None          # Matrix Market path, or l1d[:scale]
    steps: int = 20
    tau: float = 1e-10
    tau_bar: float | None = None  # defaults to tau
    reorth: str = "mgs"
    inner: str = "lsqr"
    extract: str | None = None    # COUNT:{largest|smallest}:{b|bhat}
    seed: int = 0
    out: str = "out"
    dense_cap: int | None = None
    kappa: float | None = None
    diag: str = "basic"

    def __post_init__(self):
        if (self.a is None) == (self.gen is None):
            raise InvalidInput("give exactly one of a matrix file (a) or a generator (gen)")
        if self.a is not None and self.l is None:
            raise InvalidInput("a matrix file for A needs an L (file or l1d)")
        if self.diag not in ("off", "basic", "full"):
            raise InvalidInput(f"unknown diag level {self.diag!r}")
        if self.steps < 1:
            raise InvalidInput("steps must be at least 1")
        if self.extract is not None:
            parse_extract(self.extract, self.tau_bar or self.tau)
        # reuse the solver's own validation
        self.jbd_options()

    def jbd_options(self) -> JbdOptions:
        return JbdOptions(
            max_steps=self.steps, tau=self.tau, reorth=self.reorth, inner=self.inner,
            seed=self.seed, retain_inner=self.diag == "full", dense_cap=self.dense_cap,
        )


_CONVERT = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, raw: str):
    kind = _CONVERT[key]
    numeric = "int" in kind or "float" in kind
    if raw == "" or (numeric and raw.lower() == "none"):
        return None
    if "int" in kind:
        return int(raw)
    if "float" in kind:
        return float(raw)
    return raw


def read_config_file(path) -> dict:
    """key=value lines; '#' starts a comment; dashes in keys become underscores."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidInput(f"{path}:{lineno}: expected key=value")
            key, raw = (x.strip() for x in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in _CONVERT:
                raise InvalidInput(f"{path}:{lineno}: unknown key {key!r}")
            try:
                out[key] = _coerce(key, raw)
            except ValueError:
                raise InvalidInput(f"{path}:{lineno}: bad value {raw!r} for {key}") from None
    return out


def make_config(file_values: dict | None = None, **overrides) -> RunConfig:
    """File values first, then every override that is not None."""
    merged = dict(file_values or {})
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**merged)


def parse_extract(spec: str, tau_bar: float) -> ExtractionOptions:
    parts = spec.split(":")
    if len(parts) != 3:
        raise InvalidInput(f"extract spec {spec!r} is not COUNT:SIDE:SOURCE")
    try:
        count = int(parts[0])
    except ValueError:
        raise InvalidInput(f"bad count in extract spec {spec!r}") from None
    return ExtractionOptions(count=count, side=parts[1], source=parts[2], tau_bar=tau_bar)


def _numbers(args: str, kinds: tuple, name: str, optional: int = 0) -> list:
    parts = [x for x in args.split(",") if x] if args else []
    if not len(kinds) - optional <= len(parts) <= len(kinds):
        raise InvalidInput(f"generator {name} takes {len(kinds)} arguments")
    try:
        return [k(x) for k, x in zip(kinds, parts)]
    except ValueError:
        raise InvalidInput(f"bad arguments {args!r} for generator {name}") from None


def build_pair(cfg: RunConfig) -> tuple[StackedPair, float | None]:
    """The pair of the run and, for synthetic pairs, its known condition number."""
    kappa = None
    if cfg.gen is not None:
        name, _, args = cfg.gen.partition(":")
        name = name.lower()
        if name == "a1l1":
            n, kap = _numbers(args, (int, float), name)
            g = gen_A1L1(n, kap)
            P, kappa = g.pair, g.kappa
        elif name == "a2l2":
            (n,) = _numbers(args, (int,), name)
            g = gen_A2L2(n)
            P, kappa = g.pair, g.kappa
        elif name == "random":
            vals = _numbers(args, (int, int, int, int), name, optional=1)
            P = gen_random(*vals)
        else:
            raise InvalidInput(f"unknown generator {name!r}")
    else:
        P = None
    A = P.A if P is not None else read_matrix_market(cfg.a)
    if cfg.l is not None:
        kappa = None
        head, _, arg = cfg.l.partition(":")
        if head.lower() == "l1d":
            L = gen_L1d(A.ncols)
            if arg:
                L = L.scaled(float(arg))
        else:
            L = read_matrix_market(cfg.l)
        P = StackedPair(A, L)
    return P, kappa


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def _write_csv(path: Path, header, rows) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="ascii", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    os.replace(tmp, path)


def diagnostics_rows(fact: JbdFactorization, level: str, qr=None) -> list[tuple]:
    """Rows of the diagnostics CSV; columns a level does not compute stay blank."""
    theta = theta_from(fact.hat_alphas, fact.hat_betas)
    rows = []
    for i in range(1, fact.k + 1):
        orth = (None, None, None)
        if level != "off":
            nv = min(i + 1, fact.Vt.shape[1])
            orth = (orthogonality_level(fact.Vt[:, :nv]), orthogonality_level(fact.U[:, :i]),
                    orthogonality_level(fact.Uh[:, :i]))
        g = measure_g(fact, qr, i) if level == "full" and qr is not None else None
        rows.append((
            i, fact.alphas[i - 1], fact.betas[i - 1], fact.hat_alphas[i - 1], fact.hat_betas[i - 1],
            *orth, g, theta[i - 1], int(fact.inner_iterations[i - 1]), fact.criteria[i - 1],
        ))
    return rows


@dataclass
class RunOutcome:
    exit_code: int
    factorization: JbdFactorization | None
    estimates: list
    message: str
    out_dir: Path


def run_experiment(cfg: RunConfig) -> RunOutcome:
    """Execute one run and write its files; never raises for solver failures."""
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        P, kappa = build_pair(cfg)
        opts = cfg.jbd_options()
        qr = dense_qr(P, cfg.dense_cap) if (cfg.inner == "exact" or cfg.diag == "full") else None
        if cfg.kappa is not None:
            kappa = cfg.kappa
        elif kappa is None and cfg.diag == "full":
            kappa = cond_number(P, cfg.dense_cap)
    except (JbdError, OSError) as exc:
        log.error("setup failed: %s", exc)
        return RunOutcome(EXIT_ERROR, None, [], f"error: {exc}", out)

    code, status = EXIT_OK, "completed"
    try:
        fact = jbd_run(P, opts, qr=qr)
    except (LuckyBreakdown, InnerSolverStalled) as exc:
        fact = exc.factorization
        code, status = EXIT_PARTIAL, f"stopped early: {exc}"
        log.warning("run %s", status)
        if fact.k == 0:
            return RunOutcome(EXIT_ERROR, None, [], f"error: {exc}", out)
    except JbdError as exc:
        log.error("run failed: %s", exc)
        return RunOutcome(EXIT_ERROR, None, [], f"error: {exc}", out)

    try:
        _write_csv(out / "diagnostics.csv", DIAG_COLUMNS, diagnostics_rows(fact, cfg.diag, qr))
        estimates = []
        if cfg.extract is not None:
            eopts = parse_extract(cfg.extract, cfg.tau_bar or cfg.tau)
            if eopts.count > fact.k:
                eopts = replace(eopts, count=fact.k)
            eopts = replace(eopts, kappa=kappa)
            estimates = extract_values(fact, eopts)
            extract_right_vectors(fact, P, estimates, eopts.tau_bar)
            attach_history(estimates, fact, eopts.side)
            _write_estimates(out, estimates, cfg.tau)
        _write_report(out / "report.txt", cfg, fact, status, kappa, qr)
    except (JbdError, OSError) as exc:
        log.error("writing results failed: %s", exc)
        return RunOutcome(EXIT_ERROR, fact, [], f"error: {exc}", out)
    return RunOutcome(code, fact, estimates, status, out)


def _write_estimates(out: Path, estimates, tau: float) -> None:
    rows = []
    for e in estimates:
        pos = stagnation_step([c for _, c in e.history], tau)
        stag = None if pos is None else e.history[pos - 1][0]
        rows.append((e.index, e.source, e.c, e.s, e.gap, e.residual, e.x_available, e.clipped, stag))
    _write_csv(out / "estimates.csv", ESTIMATE_COLUMNS, rows)
    # an index only has a Ritz value once the bidiagonal is large enough; earlier cells stay blank
    by_step = [dict(e.history) for e in estimates]
    last = max((max(h) for h in by_step if h), default=0)
    hist_rows = [(k, *[h.get(k) for h in by_step]) for k in range(1, last + 1)]
    _write_csv(out / "history.csv", ("step", *[f"c_{e.index}" for e in estimates]), hist_rows)


def _write_report(path: Path, cfg: RunConfig, fact: JbdFactorization, status: str, kappa, qr) -> None:
    lines = ["run configuration"]
    for f in fields(RunConfig):
        lines.append(f"  {f.name} = {getattr(cfg, f.name)}")
    P = fact.pair
    lines += [
        "",
        f"pair: m = {P.m}, p = {P.p}, n = {P.n}, ||C|| estimate = {_fmt(P.norm)}",
        f"steps completed: {fact.k} of {cfg.steps}",
        f"status: {status}",
        f"total inner iterations: {int(fact.inner_iterations.sum())}",
        f"kappa(C): {_fmt(kappa) if kappa is not None else 'unknown'}",
    ]
    if kappa is not None:
        lines.append(f"3 kappa tau line: {_fmt(3 * kappa * cfg.tau)}")
    if cfg.diag != "off":
        lines.append(f"final orth_v: {_fmt(orthogonality_level(fact.Vt))}")
    if cfg.diag == "full" and qr is not None:
        gmax = max(measure_g(fact, qr, i) for i in range(1, fact.k + 1))
        lines.append(f"max ||g_i||: {_fmt(gmax)}")
        if fact.k >= 2:
            f_max = max(lemma41_column_residual(fact, qr, l) for l in range(1, fact.k))
            lines.append(f"max column residual f_(l+1): {_fmt(f_max)}")
        if fact.Vt.shape[1] > fact.k:
            lines.append(f"G-hat proxy: {_fmt(ghat_proxy(fact, qr))}")
            if kappa is not None:
                try:
                    lines.append(f"G-hat scale sqrt(n) kappa tau / sigma_min(Bhat): {_fmt(ghat_bound(fact, kappa))}")
                except (ZeroDivisionError, FloatingPointError):
                    pass
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def run_sweep(cfg: RunConfig, taus) -> list[RunOutcome]:
    """Independent runs differing only in tau, each in its own subdirectory."""
    outcomes = []
    for tau in taus:
        sub = replace(cfg, tau=float(tau), out=str(Path(cfg.out) / f"tau_{float(tau):.0e}"))
        outcomes.append(run_experiment(sub))
    return outcomes


__all__ = [
    "DIAG_COLUMNS", "ESTIMATE_COLUMNS", "RunConfig", "RunOutcome", "build_pair", "make_config",
    "parse_extract", "read_config_file", "run_experiment", "run_sweep",
]
