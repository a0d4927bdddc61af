"""Damped semismooth Newton solver for mixed complementarity systems.

The convergence test, and the only meaning of "solved", is
:func:`~eirmarket.mcp.complementarity_error` dropping to the tolerance. The
working objective is the Fischer-Burmeister merit ``0.5 * ||Phi(z)||^2``;
every accepted step decreases it, so the recorded merit trace of an attempt
is strictly decreasing.

Each iteration builds one finite-difference Jacobian of the raw residual and
tries up to three step constructions, in order:

1. **Pivotal step.** The linearized complementarity problem
   ``0 <= zhat  perp  F(z) + J (zhat - z)`` (free rows as equations) is
   solved exactly with the complementary-pivot method in
   :mod:`~eirmarket.lemke`. Its solution can change many active constraints
   at once, which matters near degenerate equilibria where the risk weights
   of several tied scenarios must be reassigned together — a move a damped
   smooth step cannot make. The step is accepted under an Armijo decrease of
   the FB merit.
2. **Plain FB Newton step,** with a diagonal regularization ladder for
   near-singular Jacobians, Armijo-damped but not below a handoff step size
   (grinding with microscopic Newton steps is worse than switching methods).
3. **Levenberg-Marquardt step** on the FB merit, accepted on strict
   decrease. The damping is remembered across iterations: after an LM
   step the solver stays in LM mode until the damping has decayed to zero,
   which prevents the undamped methods from immediately undoing slow
   progress through a stiff region.

A system may carry a :class:`~eirmarket.mcp.BlockInitializer`, a warm-up
declared by the model builder: solve the designated sub-system by the same
Newton scheme with the remaining coordinates frozen, then fill those
remaining coordinates with the builder's closed-form completion. The warm-up
is best-effort — of the raw start, the sub-solved point, and the completed
point, the one with the least FB merit launches the main loop, so a good
explicit start is never thrown away.

Failed attempts trigger restarts from deterministic perturbations of the
system's default start; the first converged attempt (by restart index) is
the answer, which makes the result reproducible for a given ``(seed,
start)`` regardless of how attempts might be scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .lemke import MixedLCPStatus, solve_mixed_lcp
from .mcp import (
    MCPSystem,
    complementarity_error,
    fb_chain_partials,
    fb_scalar,
    residual,
    residual_jacobian,
)

__all__ = [
    "SolveStatus",
    "SolveOptions",
    "AttemptReport",
    "SolveReport",
    "default_start",
    "restart_start",
    "solve",
]

#: Diagonal regularization ladder for near-singular Newton systems.
REGULARIZATION_LADDER = tuple(10.0**k for k in range(-10, -3))
#: Newton line searches stop damping below this step and hand off to LM.
NEWTON_HANDOFF_STEP = 1e-4
#: Initial Levenberg-Marquardt damping when entering LM mode.
LM_SEED = 1e-6
LM_SHRINK = 3.0
LM_GROW = 10.0
#: Damping beyond this means regularized linearizations stopped helping.
LM_LIMIT = 1e16
#: Damping below this decays to exactly zero, re-enabling undamped steps.
LM_FLOOR = 1e-10
#: LM declares a stall when the merit gradient is this small (relative).
GRADIENT_STALL_TOL = 1e-12
#: A merit value beyond this is treated as divergence.
MERIT_DIVERGENCE = 1e30
#: Iteration budget of the block-initializer warm-up sub-solve.
INIT_SUB_ITERS = 80
#: Residual inf-norm at which the warm-up sub-solve stops early.
INIT_SUB_TOL = 1e-11


class SolveStatus(Enum):
    """Terminal state of a solve (or of a single attempt)."""

    CONVERGED = "converged"
    MAX_ITERS = "max_iters"
    SINGULAR = "singular"
    DIVERGED = "diverged"


@dataclass(frozen=True)
class SolveOptions:
    """Solver configuration.

    ``proximal_epsilon > 0`` adds ``epsilon * (z - anchor)`` to the residual
    with the anchor at each attempt's starting point. This regularizes the
    problem but changes its solution set, so it is off by default;
    convergence is then measured on the modified system.
    """

    tol: float = 1e-9
    max_iters: int = 200
    armijo_sigma: float = 1e-4
    max_step_halvings: int = 40
    restarts: int = 20
    seed: int = 0
    proximal_epsilon: float = 0.0

    def __post_init__(self) -> None:
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not 0.0 < self.armijo_sigma < 0.5:
            raise ValueError(
                f"armijo_sigma must lie in (0, 0.5), got {self.armijo_sigma}"
            )
        if self.max_step_halvings < 0:
            raise ValueError(
                f"max_step_halvings must be >= 0, got {self.max_step_halvings}"
            )
        if self.restarts < 0:
            raise ValueError(f"restarts must be >= 0, got {self.restarts}")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")
        if self.proximal_epsilon < 0:
            raise ValueError(
                f"proximal_epsilon must be >= 0, got {self.proximal_epsilon}"
            )


@dataclass(frozen=True)
class AttemptReport:
    """Outcome of one attempt (one start point)."""

    restart_index: int
    status: SolveStatus
    complementarity_error: float
    iterations: int
    merit_trace: tuple[float, ...]


@dataclass(frozen=True)
class SolveReport:
    """Outcome of a solve: the returned attempt plus every attempt made."""

    status: SolveStatus
    complementarity_error: float
    iterations: int
    restart_index: int
    merit_trace: tuple[float, ...]
    attempts: tuple[AttemptReport, ...]


def default_start(system: MCPSystem) -> np.ndarray:
    """The system's canonical starting point (a fresh copy).

    Systems built without an explicit default start begin at the origin.
    """
    if system.default_start is None:
        return np.zeros(system.n)
    return np.array(system.default_start, dtype=float)


def restart_start(system: MCPSystem, seed: int, index: int) -> np.ndarray:
    """Deterministic perturbed start for restart attempt ``index >= 1``.

    Each coordinate of the default start is shifted by a uniform draw from
    ``[-1, 1]`` scaled by ``0.5 * (1 + |coordinate|)``, using the stream
    ``numpy.random.default_rng([seed, index])`` so that attempts are
    reproducible individually, independent of execution order.
    """
    z0 = default_start(system)
    rng = np.random.default_rng([seed, index])
    return z0 + rng.uniform(-1.0, 1.0, size=z0.shape) * 0.5 * (1.0 + np.abs(z0))


def _fb_vector(system: MCPSystem, z: np.ndarray, f: np.ndarray) -> np.ndarray:
    """FB residual from a precomputed raw residual ``f = F(z)``."""
    out = fb_scalar(z, f)
    free = system.free_mask()
    out[free] = f[free]
    return out


def _merit(system: MCPSystem, z: np.ndarray) -> float:
    f = residual(system, z)
    if not np.all(np.isfinite(f)):
        return np.inf
    phi = _fb_vector(system, z, f)
    return 0.5 * float(phi @ phi)


def _fb_jacobian(
    system: MCPSystem, z: np.ndarray, f: np.ndarray, jac_f: np.ndarray
) -> np.ndarray:
    """Chain a raw-residual Jacobian into a generalized FB Jacobian."""
    free = system.free_mask()
    d_a, d_b = fb_chain_partials(z, f)
    d_a[free] = 0.0
    d_b[free] = 1.0
    jac = d_b[:, None] * jac_f
    idx = np.arange(z.shape[0])
    jac[idx, idx] += d_a
    return jac


def _armijo_search(
    system: MCPSystem,
    z: np.ndarray,
    direction: np.ndarray,
    theta: float,
    sigma: float,
    max_halvings: int,
    min_step: float = 0.0,
) -> tuple[np.ndarray, float] | None:
    """Backtracking search accepting ``theta_t <= (1 - 2 sigma t) theta``."""
    t = 1.0
    for _ in range(max_halvings + 1):
        zt = z + t * direction
        theta_t = _merit(system, zt)
        if np.isfinite(theta_t) and theta_t <= (1.0 - 2.0 * sigma * t) * theta:
            return zt, theta_t
        t *= 0.5
        if t < min_step:
            break
    return None


def _solve_restricted(
    system: MCPSystem, z_start: np.ndarray, indices: np.ndarray, sigma: float
) -> np.ndarray:
    """Best-effort Newton solve of a coordinate sub-system.

    Only ``z[indices]`` move; the remaining coordinates stay frozen at their
    values in ``z_start``. Used by the block-initializer warm-up, so a stall
    simply returns the best point reached.
    """
    idx = np.asarray(indices, dtype=int)
    k = idx.size
    free = system.free_mask()[idx]
    z = np.array(z_start, dtype=float)
    mu = 0.0

    def sub_phi(z_full: np.ndarray) -> np.ndarray:
        f = residual(system, z_full)[idx]
        out = fb_scalar(z_full[idx], f)
        out[free] = f[free]
        return out

    def sub_merit(z_full: np.ndarray) -> float:
        p = sub_phi(z_full)
        return 0.5 * float(p @ p) if np.all(np.isfinite(p)) else np.inf

    for _ in range(INIT_SUB_ITERS):
        f_sub = residual(system, z)[idx]
        if not np.all(np.isfinite(f_sub)):
            return np.array(z_start, dtype=float)
        phi = fb_scalar(z[idx], f_sub)
        phi[free] = f_sub[free]
        if float(np.abs(phi).max(initial=0.0)) <= INIT_SUB_TOL:
            break
        theta = 0.5 * float(phi @ phi)

        jac_f = residual_jacobian(system, z, columns=idx)[idx]
        d_a, d_b = fb_chain_partials(z[idx], f_sub)
        d_a[free] = 0.0
        d_b[free] = 1.0
        jac = d_b[:, None] * jac_f
        diag = np.arange(k)
        jac[diag, diag] += d_a

        stepped = False
        if mu == 0.0:
            for zeta in (0.0,) + REGULARIZATION_LADDER:
                try:
                    d = np.linalg.solve(jac + zeta * np.eye(k), -phi)
                except np.linalg.LinAlgError:
                    continue
                if not np.all(np.isfinite(d)):
                    continue
                t = 1.0
                while t >= NEWTON_HANDOFF_STEP:
                    zt = z.copy()
                    zt[idx] += t * d
                    if sub_merit(zt) <= (1.0 - 2.0 * sigma * t) * theta:
                        z = zt
                        stepped = True
                        break
                    t *= 0.5
                if stepped:
                    break
            if not stepped:
                mu = LM_SEED
        if not stepped and mu > 0.0:
            g = jac.T @ phi
            if float(np.linalg.norm(g)) <= GRADIENT_STALL_TOL * (1.0 + theta):
                break
            jtj = jac.T @ jac
            scale = np.maximum(np.diag(jtj), 1e-8 * np.trace(jtj) / k)
            while mu <= LM_LIMIT:
                try:
                    d = np.linalg.solve(jtj + mu * np.diag(scale), -g)
                except np.linalg.LinAlgError:
                    mu *= LM_GROW
                    continue
                zt = z.copy()
                zt[idx] += d
                if np.all(np.isfinite(d)) and sub_merit(zt) < theta:
                    z = zt
                    stepped = True
                    mu /= LM_SHRINK
                    if mu < LM_FLOOR:
                        mu = 0.0
                    break
                mu *= LM_GROW
            if not stepped:
                break
    return z


def _warm_up(system: MCPSystem, z: np.ndarray, sigma: float) -> np.ndarray:
    """Apply the system's block initializer, keeping the best candidate.

    Two candidate chains are built: completion-first (repair the completed
    block from the start's own residual data, then sub-solve, then complete
    again) and sub-solve-first (solve the sub-system at the start's frozen
    values, then complete). The start itself always remains a candidate, so
    a good explicit start is never degraded. The least-FB-merit candidate
    launches the main loop.
    """
    init = system.initializer
    if init is None:
        return z
    candidates = [z]

    def push(point: np.ndarray | None) -> np.ndarray | None:
        if point is None:
            return None
        point = np.asarray(point, dtype=float)
        if point.shape != z.shape or not np.all(np.isfinite(point)):
            return None
        candidates.append(point)
        return point

    z_rep = push(init.completion(z))
    if z_rep is not None:
        z_sub = push(_solve_restricted(system, z_rep, init.newton_indices, sigma))
        if z_sub is not None:
            push(init.completion(z_sub))
    z_sub = push(_solve_restricted(system, z, init.newton_indices, sigma))
    if z_sub is not None:
        push(init.completion(z_sub))
    merits = [_merit(system, c) for c in candidates]
    return candidates[int(np.argmin(merits))]


def _run_attempt(
    system: MCPSystem,
    z_start: np.ndarray,
    options: SolveOptions,
    restart_index: int,
) -> tuple[np.ndarray, AttemptReport]:
    z = _warm_up(system, np.array(z_start, dtype=float), options.armijo_sigma)
    free = system.free_mask()
    trace: list[float] = [_merit(system, z)]
    mu = 0.0
    iterations = 0
    status = SolveStatus.MAX_ITERS
    err = np.inf

    for _ in range(options.max_iters):
        f_raw = residual(system, z)
        if not np.all(np.isfinite(f_raw)):
            status = SolveStatus.DIVERGED
            break
        err = complementarity_error(system, z, f_raw)
        if err <= options.tol:
            status = SolveStatus.CONVERGED
            break
        phi = _fb_vector(system, z, f_raw)
        theta = 0.5 * float(phi @ phi)
        if not np.isfinite(theta) or theta > MERIT_DIVERGENCE:
            status = SolveStatus.DIVERGED
            break

        jac_f = residual_jacobian(system, z)
        jac = _fb_jacobian(system, z, f_raw, jac_f)

        new_point: tuple[np.ndarray, float] | None = None

        if mu == 0.0:
            # 1. Pivotal step on the linearized complementarity problem.
            lcp = solve_mixed_lcp(jac_f, f_raw - jac_f @ z, free)
            if lcp.status is MixedLCPStatus.SOLVED and np.all(
                np.isfinite(lcp.z)
            ):
                new_point = _armijo_search(
                    system,
                    z,
                    lcp.z - z,
                    theta,
                    options.armijo_sigma,
                    options.max_step_halvings,
                )
            # 2. Plain FB Newton step with regularization ladder.
            if new_point is None:
                for zeta in (0.0,) + REGULARIZATION_LADDER:
                    try:
                        d = np.linalg.solve(jac + zeta * np.eye(z.shape[0]), -phi)
                    except np.linalg.LinAlgError:
                        continue
                    if not np.all(np.isfinite(d)):
                        continue
                    new_point = _armijo_search(
                        system,
                        z,
                        d,
                        theta,
                        options.armijo_sigma,
                        options.max_step_halvings,
                        min_step=NEWTON_HANDOFF_STEP,
                    )
                    if new_point is not None:
                        break
            # 3. Hand off to Levenberg-Marquardt.
            if new_point is None:
                mu = LM_SEED

        if new_point is None and mu > 0.0:
            g = jac.T @ phi
            if float(np.linalg.norm(g)) <= GRADIENT_STALL_TOL * (1.0 + theta):
                status = SolveStatus.SINGULAR
                break
            jtj = jac.T @ jac
            scale = np.maximum(np.diag(jtj), 1e-8 * np.trace(jtj) / z.shape[0])
            while mu <= LM_LIMIT:
                try:
                    d = np.linalg.solve(jtj + mu * np.diag(scale), -g)
                except np.linalg.LinAlgError:
                    mu *= LM_GROW
                    continue
                if np.all(np.isfinite(d)):
                    zt = z + d
                    theta_t = _merit(system, zt)
                    if theta_t < theta:
                        new_point = (zt, theta_t)
                        mu /= LM_SHRINK
                        if mu < LM_FLOOR:
                            mu = 0.0
                        break
                mu *= LM_GROW
            if new_point is None:
                status = SolveStatus.SINGULAR
                break

        z, theta = new_point
        trace.append(theta)
        iterations += 1
    else:
        err = complementarity_error(system, z)
        status = SolveStatus.MAX_ITERS

    if status in (SolveStatus.SINGULAR, SolveStatus.DIVERGED):
        err = complementarity_error(system, z)
    report = AttemptReport(
        restart_index=restart_index,
        status=status,
        complementarity_error=float(err),
        iterations=iterations,
        merit_trace=tuple(trace),
    )
    return z, report


def _wrap_proximal(
    system: MCPSystem, anchor: np.ndarray, epsilon: float
) -> MCPSystem:
    base = system.residual_fn
    anchor = np.array(anchor, dtype=float)

    def wrapped(z: np.ndarray, plus_mult: np.ndarray | None) -> np.ndarray:
        return base(z, plus_mult) + epsilon * (z - anchor)

    return replace(system, residual_fn=wrapped)


def solve(
    system: MCPSystem,
    options: SolveOptions | None = None,
    start: np.ndarray | None = None,
) -> tuple[np.ndarray, SolveReport]:
    """Solve the system; return the solution vector and a full report.

    Attempt 0 starts from ``start`` if given, else from the system's default
    start; attempts ``1..restarts`` start from deterministic perturbations
    of the default start. The first converged attempt wins. If none
    converges, the attempt with the smallest complementarity error is
    returned with its (non-converged) status.
    """
    if options is None:
        options = SolveOptions()
    if start is not None:
        start = np.asarray(start, dtype=float)
        if start.shape != (system.n,):
            raise ValueError(
                f"start has shape {start.shape}, expected ({system.n},)"
            )

    attempts: list[AttemptReport] = []
    best: tuple[float, int, np.ndarray, AttemptReport] | None = None
    for k in range(options.restarts + 1):
        if k == 0:
            z0 = start.copy() if start is not None else default_start(system)
        else:
            z0 = restart_start(system, options.seed, k)
        work = (
            system
            if options.proximal_epsilon == 0.0
            else _wrap_proximal(system, z0, options.proximal_epsilon)
        )
        z, attempt = _run_attempt(work, z0, options, k)
        attempts.append(attempt)
        if attempt.status is SolveStatus.CONVERGED:
            return z, SolveReport(
                status=attempt.status,
                complementarity_error=attempt.complementarity_error,
                iterations=attempt.iterations,
                restart_index=k,
                merit_trace=attempt.merit_trace,
                attempts=tuple(attempts),
            )
        if best is None or attempt.complementarity_error < best[0]:
            best = (attempt.complementarity_error, k, z, attempt)

    _, k, z, attempt = best
    return z, SolveReport(
        status=attempt.status,
        complementarity_error=attempt.complementarity_error,
        iterations=attempt.iterations,
        restart_index=k,
        merit_trace=attempt.merit_trace,
        attempts=tuple(attempts),
    )
