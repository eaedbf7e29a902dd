"""Towing eigenstates along a ladder of operator perturbations.

A towing plan interpolates from a solved base operator set to a target set
in M increments; each rung re-collapses the previous converged state under
the perturbed set.  Per-target runs are independent, so many targets can be
towed in parallel with a deterministic merge.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .collapse import CollapseConfig, ConvergenceReport, collapse
from .errors import ContractViolationError, ParameterError
from .operators import (
    OperatorSet,
    SparseSymmetricOperator,
    StateVector,
    combine_operators,
)

__all__ = [
    "TowingPlan",
    "TowingResult",
    "make_schedule",
    "tow",
    "refine",
    "tow_many",
    "effective_parallelism",
    "squared_overlap",
]

TargetSpec = int | StateVector


def squared_overlap(a: StateVector, b: StateVector) -> float:
    """|<a|b>|^2 for unit-normalized inputs (normalizes defensively)."""
    denom = a.norm2 * b.norm2
    if denom == 0.0:
        raise ContractViolationError("overlap with a zero vector is undefined")
    return float(a.amps @ b.amps) ** 2 / denom


def effective_parallelism(requested: int) -> int:
    """Requested worker count capped by the EIGENTOW_THREADS environment variable."""
    if requested < 1:
        raise ParameterError("parallelism must be >= 1")
    raw = os.environ.get("EIGENTOW_THREADS", "").strip()
    if raw:
        try:
            cap = int(raw)
        except ValueError as exc:
            raise ParameterError(f"EIGENTOW_THREADS must be an integer, got {raw!r}") from exc
        if cap < 1:
            raise ParameterError(f"EIGENTOW_THREADS must be >= 1, got {cap}")
        return min(requested, cap)
    return requested


@dataclass
class TowingPlan:
    """Base and target operator sets plus the perturbation schedule.

    Without custom_deltas the rung-i set is base + (i/steps)(target - base);
    custom increments must telescope exactly from base to target.
    """

    base_set: OperatorSet
    target_set: OperatorSet
    steps: int = 10
    custom_deltas: Sequence[Sequence[SparseSymmetricOperator]] | None = None
    targets: Sequence[TargetSpec] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if self.base_set.dim != self.target_set.dim:
            raise ContractViolationError("base and target dimensions differ")
        if len(self.base_set) != len(self.target_set):
            raise ContractViolationError("base and target operator counts differ")
        if self.steps < 1:
            raise ParameterError(f"steps must be >= 1, got {self.steps}")
        if self.custom_deltas is not None:
            deltas = tuple(tuple(step) for step in self.custom_deltas)
            if len(deltas) != self.steps:
                raise ContractViolationError("need one delta group per step")
            if any(len(group) != len(self.base_set) for group in deltas):
                raise ContractViolationError("each delta group needs one term per operator")
            self.custom_deltas = deltas
            for j, base_op in enumerate(self.base_set.ops):
                terms = [(1.0, base_op)] + [(1.0, group[j]) for group in deltas]
                total = combine_operators(terms)
                diff = combine_operators(
                    [(1.0, total), (-1.0, self.target_set.ops[j])]
                )
                worst = float(np.abs(diff.vals).max()) if diff.nnz else 0.0
                if worst > 1e-12:
                    raise ContractViolationError(
                        f"deltas do not telescope to the target for operator {j} "
                        f"(max entry deviation {worst:.3e})"
                    )

    def step_set(self, i: int) -> OperatorSet:
        """Operator set at rung i, i = 1..steps (rung steps equals the target)."""
        if not 1 <= i <= self.steps:
            raise ParameterError(f"rung {i} outside 1..{self.steps}")
        if self.custom_deltas is None:
            frac = i / self.steps
            ops = [
                combine_operators(
                    [(1.0 - frac, b), (frac, t)]
                )
                for b, t in zip(self.base_set.ops, self.target_set.ops)
            ]
        else:
            ops = []
            for j, base_op in enumerate(self.base_set.ops):
                terms = [(1.0, base_op)]
                terms += [(1.0, self.custom_deltas[k][j]) for k in range(i)]
                ops.append(combine_operators(terms))
        return OperatorSet(ops)


@dataclass
class TowingResult:
    target_id: int | str
    final_state: StateVector | None
    per_step_reports: list[ConvergenceReport]
    per_step_overlaps: list[float]
    refined_steps: int
    converged: bool
    agreement: bool | None = None
    warnings: list[str] = field(default_factory=list)
    error: str | None = None


def make_schedule(
    base: OperatorSet, target: OperatorSet, steps: int
) -> TowingPlan:
    """Linear interpolation plan from base to target in the given step count."""
    return TowingPlan(base_set=base, target_set=target, steps=steps)


def _resolve_target(plan: TowingPlan, spec: TargetSpec) -> tuple[int | str, StateVector]:
    if isinstance(spec, StateVector):
        return "custom", spec.normalized()
    return int(spec), StateVector.basis(plan.base_set.dim, int(spec))


def tow(
    plan: TowingPlan, target: TargetSpec, cfg: CollapseConfig | None = None
) -> TowingResult:
    """Collapse rung by rung from the base toward the target operator set.

    Aborts with converged=False on the first non-converged rung; overlaps
    below 0.5 are recorded as wrong-branch warnings but do not abort.
    """
    cfg = cfg or CollapseConfig()
    target_id, v = _resolve_target(plan, target)
    reports: list[ConvergenceReport] = []
    overlaps: list[float] = []
    warnings: list[str] = []
    for i in range(1, plan.steps + 1):
        v_new, report = collapse(plan.step_set(i), v, cfg)
        reports.append(report)
        ov = squared_overlap(v, v_new)
        overlaps.append(ov)
        warnings.extend(f"rung {i}: {w}" for w in report.warnings)
        if not report.converged:
            warnings.append(f"rung {i} failed to converge; aborting this target")
            return TowingResult(
                target_id, v_new, reports, overlaps, plan.steps, False, warnings=warnings
            )
        if ov < 0.5:
            warnings.append(
                f"rung {i} squared overlap {ov:.3f} < 0.5; possible wrong-branch capture"
            )
        v = v_new
    return TowingResult(
        target_id, v, reports, overlaps, plan.steps, True, warnings=warnings
    )


def _halved_deltas(
    deltas: Sequence[Sequence[SparseSymmetricOperator]],
) -> tuple[tuple[SparseSymmetricOperator, ...], ...]:
    out = []
    for group in deltas:
        half = tuple(combine_operators([(0.5, op)]) for op in group)
        out.append(half)
        out.append(half)
    return tuple(out)


def refine(
    plan: TowingPlan,
    target: TargetSpec,
    cfg: CollapseConfig | None = None,
    agreement_tol: float = 1e-6,
    max_doublings: int = 6,
) -> TowingResult:
    """Double the rung count until two consecutive ladders land on one state.

    Compares the final states of the M-rung and 2M-rung ladders; on squared
    overlap >= 1 - agreement_tol the finer result is returned.  Custom
    increments are refined by splitting every delta in half, preserving the
    perturbation path.
    """
    if not 0 < agreement_tol < 1:
        raise ParameterError("agreement_tol must lie in (0, 1)")
    cfg = cfg or CollapseConfig()
    current_plan = plan
    current = tow(current_plan, target, cfg)
    for _ in range(max_doublings):
        if current_plan.custom_deltas is None:
            finer_plan = replace(current_plan, steps=2 * current_plan.steps)
        else:
            finer_plan = replace(
                current_plan,
                steps=2 * current_plan.steps,
                custom_deltas=_halved_deltas(current_plan.custom_deltas),
            )
        finer = tow(finer_plan, target, cfg)
        if (
            current.converged
            and finer.converged
            and squared_overlap(current.final_state, finer.final_state)
            >= 1.0 - agreement_tol
        ):
            finer.agreement = True
            return finer
        current_plan = finer_plan
        current = finer
    current.agreement = False
    current.warnings.append(
        f"refinement cap of {max_doublings} doublings reached without agreement"
    )
    return current


def tow_many(
    plan: TowingPlan,
    cfg: CollapseConfig | None = None,
    parallelism: int = 1,
    refine_tol: float | None = None,
) -> list[TowingResult]:
    """Tow every plan target as an independent task; results follow target order.

    A failing target yields a TowingResult carrying its error; siblings are
    unaffected.  Output order is the plan's target order regardless of
    scheduling, so parallel and serial runs produce identical results.
    """
    cfg = cfg or CollapseConfig()
    specs = list(plan.targets)
    if not specs:
        return []
    workers = effective_parallelism(parallelism)

    def run(item: tuple[int, TargetSpec]) -> TowingResult:
        pos, spec = item
        try:
            if refine_tol is not None:
                return refine(plan, spec, cfg, agreement_tol=refine_tol)
            return tow(plan, spec, cfg)
        except Exception as exc:
            tid = int(spec) if isinstance(spec, int) else f"custom_{pos}"
            return TowingResult(
                target_id=tid,
                final_state=None,
                per_step_reports=[],
                per_step_overlaps=[],
                refined_steps=plan.steps,
                converged=False,
                error=str(exc),
            )

    with ThreadPoolExecutor(max_workers=min(workers, len(specs))) as pool:
        return list(pool.map(run, enumerate(specs)))
