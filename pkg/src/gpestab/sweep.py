"""Parameter scans over the sn^2 lattice: one stability record per point.

Rows (combinations of all but the innermost axis) run in parallel; points
along the innermost axis run in order so Newton solves can be warm-started
from the previous point.  Results come back in plan order.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
from concurrent.futures import ProcessPoolExecutor, TimeoutError as FutureTimeout
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from threadpoolctl import threadpool_limits

from .model import EllipticSnSquared, Grid
from .spectral import classify, format_value
from .stationary import (
    DomainError,
    NonConvergenceError,
    StationaryState,
    exact_sn_state,
    residual,
    solve_fixed_N,
    solve_newton,
    thomas_fermi_state,
)

PARAMETERS = ("V0", "k", "g1", "mu", "N")

SWEEP_FIELDS = (
    "V0", "k", "g1", "mu", "N", "status", "classification", "route",
    "mu_s", "mu_minus_mu_s", "band_lower", "band_upper", "alpha_g", "beta_g",
    "min_product_eigenvalue_real_part", "has_complex_product_eigenvalue",
    "lambda_growth", "residual", "message",
)


@dataclass(frozen=True)
class SweepPlan:
    axes: tuple[tuple[str, tuple[float, ...]], ...]
    fixed: dict = field(default_factory=dict)
    n_points: int = 128
    n_periods: int = 1
    n_lattice: int = 1
    backend: str = "spectral"
    newton_tol: float = 1e-10
    eps: Optional[float] = None
    workers: int = 1
    timeout: Optional[float] = None
    max_points: int = 10000

    def __post_init__(self):
        axes = tuple((str(name), tuple(float(v) for v in values)) for name, values in self.axes)
        object.__setattr__(self, "axes", axes)
        if not 1 <= len(axes) <= 3:
            raise ValueError(f"a sweep has 1 to 3 axes, got {len(axes)}")
        names = [a[0] for a in axes]
        for name in names + list(self.fixed):
            if name not in PARAMETERS:
                raise ValueError(f"unknown sweep parameter {name!r}; choose from {PARAMETERS}")
        if len(set(names)) != len(names):
            raise ValueError("duplicate sweep axis")
        if set(names) & set(self.fixed):
            raise ValueError("a parameter cannot be both an axis and fixed")
        if any(len(v) == 0 for _, v in axes):
            raise ValueError("empty sweep axis")
        if self.size > self.max_points:
            raise ValueError(f"sweep has {self.size} points, cap is {self.max_points}")
        given = set(names) | set(self.fixed)
        if {"mu", "N"} <= given:
            raise ValueError("specify at most one of mu and N")
        missing = {"V0", "k"} - given
        if missing:
            raise ValueError(f"sweep needs values for {sorted(missing)}")

    @property
    def size(self) -> int:
        return math.prod(len(v) for _, v in self.axes)

    def points(self) -> list[dict]:
        names = [a[0] for a in self.axes]
        return [dict(self.fixed, **dict(zip(names, combo)))
                for combo in itertools.product(*(v for _, v in self.axes))]

    def rows(self) -> list[list[dict]]:
        inner = len(self.axes[-1][1])
        pts = self.points()
        return [pts[i:i + inner] for i in range(0, len(pts), inner)]


def _resolve_state(p: dict, plan: SweepPlan, warm: Optional[StationaryState]) -> StationaryState:
    V0, k, g1 = p["V0"], p["k"], p.get("g1", 1.0)
    potential = EllipticSnSquared(V0, k)
    grid = Grid.for_potential(potential, plan.n_points, plan.n_periods)
    if "N" in p:
        return solve_fixed_N(potential, p["N"], plan.n_lattice, g1, grid, tol=plan.newton_tol,
                             backend=plan.backend)
    if "mu" in p:
        mu = p["mu"]
        guesses = []
        if warm is not None and warm.grid == grid and not warm.trivial:
            guesses.append(warm.R)
        try:
            guesses.append(exact_sn_state(V0, k, g1, grid, backend=plan.backend).R)
        except DomainError:
            pass
        if g1 > 0:
            guesses.append(thomas_fermi_state(potential, mu, g1, grid).R_tf)
        last = None
        for guess in guesses:
            if not np.any(guess):
                continue
            try:
                st = solve_newton(potential, mu, g1, guess, grid, plan.newton_tol, plan.backend)
            except NonConvergenceError as err:
                last = err
                continue
            if not st.trivial:
                return st
        raise last or NonConvergenceError(f"no nontrivial state at mu={mu!r}")
    return exact_sn_state(V0, k, g1, grid, backend=plan.backend)


def evaluate_point(p: dict, plan: SweepPlan, warm: Optional[StationaryState] = None):
    rec = {name: p.get(name, math.nan) for name in PARAMETERS}
    rec["g1"] = p.get("g1", 1.0)
    state = None
    try:
        state = _resolve_state(p, plan, warm)
        if state.trivial:
            rec.update(status="trivial", message="state is R = 0")
            return rec, state
        verdict = classify(state, plan.eps)
    except DomainError as err:
        rec.update(status="invalid", message=str(err))
        return rec, None
    except NonConvergenceError as err:
        rec.update(status="nonconvergence", message=str(err))
        return rec, None
    except (ArithmeticError, np.linalg.LinAlgError, RuntimeError) as err:
        rec.update(status="numeric-failure", message=str(err))
        return rec, None
    rec.update(verdict.as_record())
    rec["mu"] = state.mu
    if "N" not in p:
        rec["N"] = state.atom_number(plan.n_lattice)
    rec["residual"] = residual(state)
    rec["status"] = "ok"
    rec["message"] = ""
    return rec, state


def _run_row(row: list[dict], plan: SweepPlan) -> list[dict]:
    with threadpool_limits(limits=1):
        out, warm = [], None
        for p in row:
            rec, state = evaluate_point(p, plan, warm)
            if state is not None:
                warm = state
            out.append(rec)
        return out


def run_sweep(plan: SweepPlan) -> list[dict]:
    """One record per plan point, in plan order; failures are recorded, not dropped."""
    rows = plan.rows()
    if plan.workers <= 1:
        results = [_run_row(r, plan) for r in rows]
    else:
        results = []
        with ProcessPoolExecutor(max_workers=plan.workers) as pool:
            futures = [pool.submit(_run_row, r, plan) for r in rows]
            for row, fut in zip(rows, futures):
                limit = None if plan.timeout is None else plan.timeout * len(row)
                try:
                    results.append(fut.result(timeout=limit))
                except FutureTimeout:
                    fut.cancel()
                    results.append([dict({n: p.get(n, math.nan) for n in PARAMETERS},
                                         status="timeout", message=f"row exceeded {limit:g} s")
                                    for p in row])
    return [rec for row in results for rec in row]


def records_to_csv(records: list[dict], header_comment: str | None = None) -> str:
    buf = io.StringIO()
    if header_comment:
        buf.write(f"# {header_comment}\n")
    w = csv.DictWriter(buf, fieldnames=list(SWEEP_FIELDS), lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for rec in records:
        w.writerow({k: format_value(rec.get(k)) for k in SWEEP_FIELDS})
    return buf.getvalue()
