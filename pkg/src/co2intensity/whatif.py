"""What-if (marginal) CO2 intensities from the optimal dispatch basis.

A demand increase of one unit of ``co`` at step ``t`` is a unit change of the
right-hand side of that energy balance row. Keeping the optimal basis, the
resulting change of the total-CO2 column is the marginal intensity, so one
factorization serves every ``(co, t)``. When the basis cannot follow the
perturbation (a zero feasible step, typically at a dispatch kink) the entry
falls back to a finite difference of two full dispatch solves.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import lp as lpcore
from .dispatch import MWH_PER_GWH, InfeasibleSystem, DispatchResult, solve_dispatch
from .model import EnergySystem, ProcessKind, ValidationError

FD_RELATIVE_STEP = 1e-4
DEGENERACY_TOL = 1e-6
STEP_TOL = 1e-9  # GWh; smaller feasible steps count as a kink


class Method(str, enum.Enum):
    BASIS = "basis"
    FD = "fd"


class InfeasiblePerturbation(RuntimeError):
    pass


@dataclass(frozen=True)
class FDEstimate:
    """One-sided difference quotients [t/MWh]; ``backward`` is None if not taken."""

    forward: float
    backward: float | None = None
    step: float = 0.0

    @property
    def value(self) -> float:
        return self.forward

    def kink(self, tol: float = DEGENERACY_TOL) -> bool:
        return self.backward is not None and abs(self.forward - self.backward) > tol

    def __float__(self) -> float:
        return self.forward


@dataclass
class WhatIfResult:
    intensity: dict[str, np.ndarray]
    method: dict[str, list[Method]]
    degenerate: dict[tuple[str, int], tuple[float, float]] = field(default_factory=dict)
    fd_step: dict[str, float] = field(default_factory=dict)
    step_limit: dict[str, np.ndarray] = field(default_factory=dict)

    def n_fallback(self) -> int:
        return sum(m is Method.FD for ms in self.method.values() for m in ms)


def default_fd_step(system: EnergySystem, co: str) -> float:
    """Perturbation size: a small fraction of the commodity's peak demand."""
    peak = float(np.max(system.demand(co), initial=0.0))
    if peak <= 0.0:
        peak = max((float(np.max(system.demand(c), initial=0.0)) for c in system.demanded_commodities),
                   default=0.0)
    return FD_RELATIVE_STEP * peak if peak > 0.0 else FD_RELATIVE_STEP


def _demand_process(system: EnergySystem, co: str) -> str:
    for p in system.processes_of(ProcessKind.DEMAND):
        if co in p.inputs:
            return p.id
    raise KeyError(f"no demand process consumes {co!r}")


def _perturbed_m_tot(system: EnergySystem, co: str, t: int, delta: float) -> float:
    pid = _demand_process(system, co)
    prof = system.demand_profile(pid, co).copy()
    prof[t] += delta
    return solve_dispatch(system.with_demand(pid, co, prof)).m_tot


def finite_difference(system: EnergySystem, co: str, t: int, eps: float | None = None, *,
                      base: DispatchResult | None = None, backward: bool = False) -> FDEstimate:
    """Marginal intensity of ``(co, t)`` by re-solving with perturbed demand.

    The forward quotient needs one extra solve (plus one for the base case if
    ``base`` is not given). With ``backward`` the demand is also lowered; that
    side is skipped when it would turn the demand negative or infeasible.
    """
    eps = default_fd_step(system, co) if eps is None else eps
    base_m = (base or solve_dispatch(system)).m_tot
    try:
        fwd = (_perturbed_m_tot(system, co, t, eps) - base_m) / (eps * MWH_PER_GWH)
    except InfeasibleSystem as exc:
        raise InfeasiblePerturbation(f"raising demand for {co} at t={t} is infeasible") from exc
    bwd = _backward_quotient(system, co, t, eps, base_m) if backward else None
    return FDEstimate(fwd, bwd, eps)


def _backward_quotient(system, co, t, eps, base_m) -> float | None:
    if system.demand(co)[t] < eps:
        return None
    try:
        return (base_m - _perturbed_m_tot(system, co, t, -eps)) / (eps * MWH_PER_GWH)
    except (InfeasibleSystem, ValidationError):
        return None


def compute_whatif(system: EnergySystem, dispatch: DispatchResult | None = None, *,
                   fd_fallback: bool = True, tol: float = DEGENERACY_TOL,
                   fd_step: dict[str, float] | None = None) -> WhatIfResult:
    """Marginal intensities for every demanded commodity and step.

    All entries share one basis factorization. Entries whose feasible step is
    zero are recomputed by finite differences when ``fd_fallback`` is set;
    where the two one-sided values differ by more than ``tol`` the entry is
    recorded in ``degenerate``.
    """
    dispatch = dispatch or solve_dispatch(system)
    factor = dispatch.sol.factor()
    m_col = dispatch.col_index[("M_tot",)]
    T = system.horizon
    steps = {co: (fd_step or {}).get(co, default_fd_step(system, co)) for co in system.demanded_commodities}

    result = WhatIfResult({}, {}, fd_step=steps)
    for co in system.demanded_commodities:
        values = np.empty(T)
        methods: list[Method] = []
        limits = np.empty(T)
        for t in range(T):
            row = dispatch.row_index[("EnergyBalance", co, t)]
            try:
                dx, theta_f = factor.direction({row: 1.0})
                _, theta_b = factor.direction({row: -1.0})
                basis_value = dx[m_col] / MWH_PER_GWH
            except lpcore.SingularBasis:
                theta_f = theta_b = 0.0
                basis_value = np.nan
            limits[t] = theta_f

            if theta_f > STEP_TOL or not fd_fallback:
                values[t] = basis_value
                methods.append(Method.BASIS)
                if theta_b > STEP_TOL or not fd_fallback:
                    continue
                # forward fine, backward blocked: check the other side for a kink
                bwd = _backward_quotient(system, co, t, steps[co], dispatch.m_tot)
                if bwd is not None and abs(basis_value - bwd) > tol:
                    result.degenerate[(co, t)] = (basis_value, bwd)
                continue

            est = finite_difference(system, co, t, steps[co], base=dispatch, backward=theta_b <= STEP_TOL)
            values[t] = est.forward
            methods.append(Method.FD)
            other = est.backward if theta_b <= STEP_TOL else basis_value
            if other is not None and np.isfinite(other) and abs(est.forward - other) > tol:
                result.degenerate[(co, t)] = (est.forward, other)
        result.intensity[co] = values
        result.method[co] = methods
        result.step_limit[co] = limits
    return result


def fd_sweep(system: EnergySystem, base: DispatchResult | None = None, *,
             entries=None, fd_step: dict[str, float] | None = None) -> dict[tuple[str, int], float]:
    """Forward finite differences for ``entries`` (default: every demanded (co, t)).

    Costs one base solve plus one solve per entry.
    """
    base = base or solve_dispatch(system)
    if entries is None:
        entries = [(co, t) for co in system.demanded_commodities for t in range(system.horizon)]
    out = {}
    for co, t in entries:
        eps = (fd_step or {}).get(co, default_fd_step(system, co))
        out[(co, t)] = finite_difference(system, co, t, eps, base=base).forward
    return out
