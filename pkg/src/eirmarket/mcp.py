"""Mixed complementarity problem (MCP) core.

An MCP pairs every variable ``z_j`` with a residual component ``F_j(z)``:

* ``NonNegative`` pairs require ``0 <= z_j  ⊥  F_j(z) >= 0`` (both
  non-negative with a zero product);
* ``Free`` pairs require ``F_j(z) = 0`` with ``z_j`` unrestricted.

The solver works on the Fischer-Burmeister (FB) reformulation: the scalar
function ``phi(a, b) = a + b - sqrt(a^2 + b^2)`` is zero exactly when
``a >= 0``, ``b >= 0`` and ``a * b = 0``, so stacking ``phi(z_j, F_j)`` for
non-negative pairs and raw ``F_j`` for free pairs yields a square system of
semismooth equations whose roots are exactly the MCP solutions.

Residual functions may contain plus-function terms ``max(x, 0)``. Those are
registered on the system (a :class:`PlusKinkGroup` per family of arguments)
so that Jacobian evaluation can pin each plus term to a fixed generalized
derivative branch while differencing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "VariableKind",
    "VariableSpec",
    "PlusKinkGroup",
    "BlockInitializer",
    "MCPSystem",
    "fb_scalar",
    "residual",
    "fb_residual",
    "complementarity_error",
    "residual_jacobian",
    "fb_chain_partials",
    "generalized_jacobian",
]

#: Central finite-difference step factor for the Jacobian.
DEFAULT_FD_STEP = 1e-6

#: Below this (scaled) pair norm an FB pair counts as sitting exactly on the
#: non-smooth point (0, 0).
FB_KINK_TOL = 1e-13

#: Plus-function arguments within this absolute band of zero use the centered
#: generalized-derivative element 0.5.
PLUS_KINK_TOL = 1e-11

#: Fixed Clarke element used for both FB partials at the (0, 0) kink.
FB_KINK_ELEMENT = 1.0 - 1.0 / np.sqrt(2.0)


class VariableKind(Enum):
    """Complementarity class of one variable/residual pair."""

    NON_NEGATIVE = "non_negative"
    FREE = "free"


@dataclass(frozen=True)
class VariableSpec:
    """Name, complementarity kind, and owning block of one variable."""

    name: str
    kind: VariableKind
    block: str


@dataclass(frozen=True)
class PlusKinkGroup:
    """A family of plus-function terms sharing one argument vector.

    Attributes:
        name: label for diagnostics.
        args: maps the full variable vector to the plus-function arguments
            (one entry per term in the family).
    """

    name: str
    args: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class BlockInitializer:
    """Optional per-attempt warm-up declared by the system builder.

    Some systems split into a block that solves easily as a sub-MCP with
    the remaining coordinates frozen (``newton_indices``) plus a complement
    whose values then follow in closed form (``completion``). The solver
    may run this warm-up at the start of each attempt; the completion
    callable must be pure and return a full-length point.
    """

    newton_indices: np.ndarray
    completion: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class MCPSystem:
    """Immutable square MCP: variables plus a pure residual function.

    The residual callable takes ``(z, plus_multipliers)``. With
    ``plus_multipliers=None`` every plus term evaluates as a true
    ``max(x, 0)``. Otherwise it receives one multiplier array per registered
    :class:`PlusKinkGroup` (concatenated in registration order) and each plus
    term evaluates as ``m * x`` — the linearization used while forming
    Jacobians so differencing never steps across a plus kink.
    """

    variables: tuple[VariableSpec, ...]
    residual_fn: Callable[[np.ndarray, np.ndarray | None], np.ndarray]
    plus_kinks: tuple[PlusKinkGroup, ...] = ()
    default_start: np.ndarray | None = None
    initializer: "BlockInitializer | None" = None

    @property
    def n(self) -> int:
        return len(self.variables)

    def free_mask(self) -> np.ndarray:
        return np.array(
            [v.kind is VariableKind.FREE for v in self.variables], dtype=bool
        )

    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    def index_of(self, name: str) -> int:
        for j, v in enumerate(self.variables):
            if v.name == name:
                return j
        raise KeyError(name)


def fb_scalar(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Fischer-Burmeister function ``a + b - sqrt(a^2 + b^2)``, elementwise."""
    return a + b - np.hypot(a, b)


def residual(system: MCPSystem, z: np.ndarray) -> np.ndarray:
    """Raw residual ``F(z)`` with true plus-function evaluation."""
    return system.residual_fn(np.asarray(z, dtype=float), None)


def fb_residual(system: MCPSystem, z: np.ndarray) -> np.ndarray:
    """FB-reformulated residual; zero exactly at MCP solutions."""
    z = np.asarray(z, dtype=float)
    f = system.residual_fn(z, None)
    out = fb_scalar(z, f)
    free = system.free_mask()
    out[free] = f[free]
    return out


def complementarity_error(
    system: MCPSystem, z: np.ndarray, f: np.ndarray | None = None
) -> float:
    """Worst violation of the complementarity conditions at ``z``.

    For non-negative pairs this is the largest of ``|min(z_j, F_j)|``,
    ``max(0, -z_j)`` and ``max(0, -F_j)``; for free pairs ``|F_j|``. Zero
    exactly at solutions; the solver's convergence test and every external
    certification go through this function.
    """
    z = np.asarray(z, dtype=float)
    if f is None:
        f = residual(system, z)
    free = system.free_mask()
    err = 0.0
    if np.any(~free):
        zn, fn = z[~free], f[~free]
        err = max(
            err,
            float(np.abs(np.minimum(zn, fn)).max()),
            float(np.maximum(0.0, -zn).max()),
            float(np.maximum(0.0, -fn).max()),
        )
    if np.any(free):
        err = max(err, float(np.abs(f[free]).max()))
    return err


def _plus_multipliers(system: MCPSystem, z: np.ndarray) -> np.ndarray | None:
    """Fixed plus-function branch multipliers at the point ``z``.

    Strictly positive arguments get slope 1, strictly negative slope 0, and
    arguments on the kink (within ``PLUS_KINK_TOL``) the centered element 0.5.
    """
    if not system.plus_kinks:
        return None
    parts = []
    for group in system.plus_kinks:
        x = np.asarray(group.args(z), dtype=float)
        m = np.where(x > PLUS_KINK_TOL, 1.0, 0.0)
        m = np.where(np.abs(x) <= PLUS_KINK_TOL, 0.5, m)
        parts.append(m)
    return np.concatenate(parts)


def residual_jacobian(
    system: MCPSystem,
    z: np.ndarray,
    step: float = DEFAULT_FD_STEP,
    columns: np.ndarray | None = None,
) -> np.ndarray:
    """Central finite-difference Jacobian of the raw residual ``F``.

    Differencing uses per-coordinate step ``step * max(1, |z_j|)`` while
    every registered plus term is pinned to its branch at ``z`` (slope 0/1
    away from the kink, 0.5 on it), so the differencing never straddles a
    plus kink. With ``columns`` given, only those coordinates are
    differenced and an ``(n, len(columns))`` matrix is returned.
    """
    z = np.asarray(z, dtype=float)
    n = z.shape[0]
    cols = np.arange(n) if columns is None else np.asarray(columns, dtype=int)
    mult = _plus_multipliers(system, z)

    jac_f = np.empty((n, cols.size))
    for out, j in enumerate(cols):
        h = step * max(1.0, abs(z[j]))
        zp = z.copy()
        zp[j] += h
        zm = z.copy()
        zm[j] -= h
        jac_f[:, out] = (system.residual_fn(zp, mult) - system.residual_fn(zm, mult)) / (
            2.0 * h
        )
    return jac_f


def fb_chain_partials(
    a: np.ndarray, b: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Generalized partials of ``fb_scalar`` with fixed kink elements.

    With ``r = sqrt(a^2 + b^2)`` the partials are ``1 - a / r`` and
    ``1 - b / r``; on the kink ``a = b = 0`` both are fixed to
    ``1 - 1/sqrt(2)``.
    """
    r = np.hypot(a, b)
    on_kink = r <= FB_KINK_TOL * (1.0 + np.abs(a) + np.abs(b))
    with np.errstate(divide="ignore", invalid="ignore"):
        d_a = np.where(on_kink, FB_KINK_ELEMENT, 1.0 - np.where(r > 0, a / r, 0.0))
        d_b = np.where(on_kink, FB_KINK_ELEMENT, 1.0 - np.where(r > 0, b / r, 0.0))
    return d_a, d_b


def generalized_jacobian(
    system: MCPSystem, z: np.ndarray, step: float = DEFAULT_FD_STEP
) -> np.ndarray:
    """One element of the generalized Jacobian of :func:`fb_residual`.

    The inner residual is differenced centrally via
    :func:`residual_jacobian`; the FB transformation itself is chained
    analytically through :func:`fb_chain_partials`.
    """
    z = np.asarray(z, dtype=float)
    n = z.shape[0]
    f0 = system.residual_fn(z, None)
    jac_f = residual_jacobian(system, z, step)

    free = system.free_mask()
    d_a, d_b = fb_chain_partials(z, f0)
    d_a[free] = 0.0
    d_b[free] = 1.0

    jac = d_b[:, None] * jac_f
    jac[np.arange(n), np.arange(n)] += d_a
    return jac
