"""Levy-Khintchine symbols q(s, x, xi) with (s, x)-dependent coefficients.

For fixed ``(s, x)`` the symbol is

    q(s,x,xi) = -i b.xi + 1/2 xi.Q xi + lam (1 - phi(xi)) + c^alpha sum_k |xi_k|^alpha

with an uncompensated compound Poisson part (jump law with characteristic
function ``phi``) and a symmetric alpha-stable part taken coordinatewise.
In one dimension the stable term is the isotropic ``c^alpha |xi|^alpha``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .field import FieldExpr, parse_field

__all__ = [
    "SymbolError",
    "JumpDist",
    "CompoundPoisson",
    "StablePart",
    "LevySymbol",
    "Coefficients",
    "SpaceTimeSymbol",
    "SymbolReport",
    "make_symbol",
    "eval_symbol",
    "extend_negative_time",
    "spacetime_symbol",
    "validate_symbol",
    "ldl_factor",
]

PIVOT_TOL = 1e-10
FROZEN_AT_ZERO = "frozen-at-zero"
AS_GIVEN = "as-given"


class SymbolError(ValueError):
    """Invalid coefficients at an evaluation point (non-PSD, negative rate...)."""


@dataclass(frozen=True)
class JumpDist:
    """Jump law of the compound Poisson part.

    kind is ``"point"`` (jump ``a``), ``"two-point"`` (``+a`` or ``-a`` with
    probability 1/2 each) or ``"gaussian"`` (``N(mean, cov)``).
    """

    kind: str
    a: tuple = ()
    mean: tuple = ()
    cov: tuple = ()

    def __post_init__(self):
        if self.kind not in ("point", "two-point", "gaussian"):
            raise ValueError(f"unknown jump kind {self.kind!r}")
        if self.kind == "gaussian":
            cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
            if cov.shape != (len(self.mean), len(self.mean)):
                raise ValueError("gaussian jump covariance must be square and match mean")
            if not np.allclose(cov, cov.T, rtol=0, atol=1e-12):
                raise ValueError("gaussian jump covariance must be symmetric")
            ldl_factor(cov[None])  # raises when not PSD
        elif not self.a:
            raise ValueError(f"{self.kind} jump needs a displacement 'a'")

    @classmethod
    def point(cls, a) -> "JumpDist":
        return cls("point", a=tuple(np.atleast_1d(np.asarray(a, dtype=float)).tolist()))

    @classmethod
    def two_point(cls, a) -> "JumpDist":
        return cls("two-point", a=tuple(np.atleast_1d(np.asarray(a, dtype=float)).tolist()))

    @classmethod
    def gaussian(cls, mean, cov) -> "JumpDist":
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        return cls("gaussian", mean=tuple(mean.tolist()), cov=tuple(map(tuple, cov.tolist())))

    @property
    def dimension(self) -> int:
        return len(self.mean) if self.kind == "gaussian" else len(self.a)

    @property
    def uniforms_per_jump(self) -> int:
        return {"point": 0, "two-point": 1, "gaussian": self.dimension}[self.kind]

    def cf(self, xi) -> np.ndarray:
        """Characteristic function; ``xi`` has trailing axis ``dimension``."""
        xi = np.asarray(xi, dtype=float)
        if self.kind == "point":
            return np.exp(1j * (xi @ np.asarray(self.a)))
        if self.kind == "two-point":
            return np.cos(xi @ np.asarray(self.a)) + 0j
        cov = np.asarray(self.cov)
        quad = np.einsum("...i,ij,...j->...", xi, cov, xi)
        return np.exp(1j * (xi @ np.asarray(self.mean)) - 0.5 * quad)


@dataclass(frozen=True)
class CompoundPoisson:
    intensity: FieldExpr
    jump: JumpDist


@dataclass(frozen=True)
class StablePart:
    alpha: float
    scale: FieldExpr

    def __post_init__(self):
        if not 0.0 < self.alpha < 2.0:
            raise ValueError(
                f"stable alpha must lie in (0, 2), got {self.alpha}; "
                "express alpha = 2 through the diffusion matrix Q"
            )


def ldl_factor(Q: np.ndarray) -> np.ndarray:
    """Batched factor ``F`` with ``F F^T = Q`` for PSD matrices ``(..., d, d)``.

    Symmetric LDL^T without pivoting; pivots in ``[-PIVOT_TOL, PIVOT_TOL]``
    count as zero, a pivot below ``-PIVOT_TOL`` (or a zero pivot with a
    nonzero column below it) raises :class:`SymbolError`.
    """
    Q = np.asarray(Q, dtype=float)
    d = Q.shape[-1]
    if d == 1:
        q = Q[..., 0, 0]
        if np.any(q < -PIVOT_TOL):
            raise SymbolError(f"diffusion not positive semi-definite: Q = {q.min()}")
        return np.sqrt(np.maximum(q, 0.0))[..., None, None]
    A = Q.copy()
    L = np.zeros_like(A)
    D = np.zeros(A.shape[:-1])
    for k in range(d):
        piv = A[..., k, k]
        if np.any(piv < -PIVOT_TOL):
            raise SymbolError(f"diffusion not positive semi-definite: pivot {piv.min()}")
        zero = piv <= PIVOT_TOL
        col = A[..., k + 1 :, k]
        if np.any(zero[..., None] & (np.abs(col) > PIVOT_TOL)):
            raise SymbolError("diffusion not positive semi-definite: zero pivot with coupling")
        safe = np.where(zero, 1.0, piv)
        lk = np.where(zero[..., None], 0.0, col / safe[..., None])
        L[..., k, k] = 1.0
        L[..., k + 1 :, k] = lk
        D[..., k] = np.where(zero, 0.0, piv)
        A[..., k + 1 :, k + 1 :] -= lk[..., :, None] * lk[..., None, :] * D[..., k, None, None]
    return L * np.sqrt(D)[..., None, :]


@dataclass
class Coefficients:
    """Coefficients frozen at a batch of points; leading shape ``B``."""

    drift: np.ndarray  # B + (d,)
    diffusion: Optional[np.ndarray]  # B + (d, d)
    factor: Optional[np.ndarray]  # B + (d, d), factor @ factor.T == diffusion
    intensity: Optional[np.ndarray]  # B
    scale: Optional[np.ndarray]  # B


@dataclass(frozen=True)
class LevySymbol:
    dimension: int
    drift: Optional[tuple] = None  # d FieldExpr
    diffusion: Optional[tuple] = None  # d x d FieldExpr
    cpp: Optional[CompoundPoisson] = None
    stable: Optional[StablePart] = None
    negative_time_mode: str = AS_GIVEN

    def __post_init__(self):
        d = self.dimension
        if d < 1:
            raise ValueError("dimension must be >= 1")
        if self.drift is not None and len(self.drift) != d:
            raise ValueError("drift must have one field per coordinate")
        if self.diffusion is not None and (
            len(self.diffusion) != d or any(len(row) != d for row in self.diffusion)
        ):
            raise ValueError("diffusion must be a d x d matrix of fields")
        if self.cpp is not None and self.cpp.jump.dimension != d:
            raise ValueError("jump law dimension does not match symbol dimension")
        if self.negative_time_mode not in (AS_GIVEN, FROZEN_AT_ZERO):
            raise ValueError(f"unknown negative_time_mode {self.negative_time_mode!r}")

    # -- structure ---------------------------------------------------------

    def fields(self) -> list[FieldExpr]:
        out = list(self.drift or ())
        for row in self.diffusion or ():
            out.extend(row)
        if self.cpp is not None:
            out.append(self.cpp.intensity)
        if self.stable is not None:
            out.append(self.stable.scale)
        return out

    @property
    def depends_on_x(self) -> bool:
        return any(f.depends_on_x for f in self.fields())

    @property
    def depends_on_s(self) -> bool:
        return any(f.depends_on_s for f in self.fields())

    # -- evaluation --------------------------------------------------------

    def effective_time(self, s):
        if self.negative_time_mode == FROZEN_AT_ZERO:
            return np.maximum(s, 0.0)
        return s

    def coefficients(self, s, x) -> Coefficients:
        """Evaluate every coefficient field at points ``(s, x)``.

        ``x`` has trailing axis ``dimension``; ``s`` broadcasts against
        ``x[..., 0]``.
        """
        x = np.asarray(x, dtype=float)
        s = self.effective_time(np.asarray(s, dtype=float))
        shape = s.shape if s.shape == x.shape[:-1] else np.broadcast_shapes(s.shape, x.shape[:-1])
        d = self.dimension
        if self.drift is None:
            b = np.zeros(shape + (d,))
        elif d == 1:
            b = self.drift[0].evaluate(s, x)[..., None]
        else:
            b = np.stack([f.evaluate(s, x) for f in self.drift], axis=-1)
        Q = F = None
        if self.diffusion is not None:
            Q = np.empty(shape + (d, d))
            for i, row in enumerate(self.diffusion):
                for j, f in enumerate(row):
                    Q[..., i, j] = f.evaluate(s, x)
            if d > 1 and np.any(np.abs(Q - np.swapaxes(Q, -1, -2)) > 1e-12):
                raise SymbolError("diffusion matrix is not symmetric")
            F = ldl_factor(Q)
        lam = c = None
        if self.cpp is not None:
            lam = self.cpp.intensity.evaluate(s, x)
            if np.any(lam < 0):
                raise SymbolError(f"negative jump intensity {lam.min()}")
        if self.stable is not None:
            c = self.stable.scale.evaluate(s, x)
            if np.any(c < 0):
                raise SymbolError(f"negative stable scale {c.min()}")
        return Coefficients(b, Q, F, lam, c)

    def exponent(self, coef: Coefficients, xi) -> np.ndarray:
        """q from frozen coefficients; ``xi`` broadcasts against them."""
        xi = np.asarray(xi, dtype=float)
        q = -1j * np.sum(coef.drift * xi, axis=-1)
        if coef.diffusion is not None:
            quad = np.sum(np.sum(coef.diffusion * xi[..., None, :], axis=-1) * xi, axis=-1)
            q = q + 0.5 * quad
        if coef.intensity is not None:
            q = q + coef.intensity * (1.0 - self.cpp.jump.cf(xi))
        if coef.scale is not None:
            a = self.stable.alpha
            q = q + coef.scale**a * np.sum(np.abs(xi) ** a, axis=-1)
        return q

    def evaluate(self, s, x, xi) -> np.ndarray:
        """Vectorised q(s, x, xi); ``x`` and ``xi`` carry a trailing ``d`` axis."""
        return self.exponent(self.coefficients(s, x), xi)

    def __call__(self, s: float, x, xi) -> complex:
        return eval_symbol(self, s, x, xi)


def _fields(values, d, name):
    if values is None:
        return None
    if isinstance(values, (str, FieldExpr)):
        values = [values]
    out = tuple(v if isinstance(v, FieldExpr) else parse_field(str(v), d) for v in values)
    return out


def make_symbol(
    dimension: int = 1,
    drift=None,
    diffusion=None,
    intensity=None,
    jump: Optional[JumpDist] = None,
    alpha: Optional[float] = None,
    scale=None,
    negative_time_mode: str = AS_GIVEN,
) -> LevySymbol:
    """Build a :class:`LevySymbol` from expression strings.

    For ``dimension == 1`` scalars are accepted everywhere, e.g.
    ``make_symbol(drift="1 + step(s - 0.5)", diffusion="1")``.
    """
    d = dimension
    drift_f = _fields(drift, d, "drift")
    diff_f = None
    if diffusion is not None:
        if isinstance(diffusion, (str, FieldExpr, int, float)):
            diffusion = [[diffusion]]
        diff_f = tuple(_fields(row, d, "diffusion") for row in diffusion)
    cpp = None
    if intensity is not None or jump is not None:
        if intensity is None or jump is None:
            raise ValueError("compound Poisson part needs both intensity and jump law")
        cpp = CompoundPoisson(_fields(intensity, d, "intensity")[0], jump)
    stable = None
    if alpha is not None or scale is not None:
        if alpha is None:
            raise ValueError("stable part needs alpha")
        stable = StablePart(float(alpha), _fields("1" if scale is None else scale, d, "scale")[0])
    return LevySymbol(d, drift_f, diff_f, cpp, stable, negative_time_mode)


def eval_symbol(sym: LevySymbol, s: float, x, xi) -> complex:
    x = np.asarray(x, dtype=float).reshape(sym.dimension)
    xi = np.asarray(xi, dtype=float).reshape(sym.dimension)
    return complex(sym.evaluate(float(s), x, xi))


def extend_negative_time(sym: LevySymbol) -> LevySymbol:
    """Copy of ``sym`` that evaluates at ``s < 0`` as at ``s = 0``."""
    return dataclasses.replace(sym, negative_time_mode=FROZEN_AT_ZERO)


@dataclass(frozen=True)
class SpaceTimeSymbol:
    """Symbol of the space-time generator: ``-i sigma + q(s, x, xi)``."""

    base: LevySymbol

    @property
    def dimension(self) -> int:
        return self.base.dimension + 1

    def evaluate(self, s, x, sigma, xi) -> np.ndarray:
        return -1j * np.asarray(sigma, dtype=float) + self.base.evaluate(s, x, xi)

    def __call__(self, s: float, x, sigma: float, xi) -> complex:
        return -1j * float(sigma) + eval_symbol(self.base, s, x, xi)


def spacetime_symbol(sym: LevySymbol) -> SpaceTimeSymbol:
    return SpaceTimeSymbol(sym)


# --------------------------------------------------------------------------
# Validation probe


@dataclass
class SymbolReport:
    bound_constant: float
    continuous: bool
    jump_location: Optional[float]
    jump_by_xi: list = field(default_factory=list)  # [(xi, magnitude)]
    continuity_sequence: list = field(default_factory=list)  # [(delta, max diff)]
    origin_max: float = 0.0
    conjugate_max: float = 0.0
    real_part_min: float = 0.0
    errors: list = field(default_factory=list)  # [(point, message)]
    tolerance: float = 1e-12

    @property
    def origin_ok(self) -> bool:
        return self.origin_max == 0.0

    @property
    def conjugate_ok(self) -> bool:
        return self.conjugate_max <= self.tolerance

    @property
    def real_part_ok(self) -> bool:
        return self.real_part_min >= -self.tolerance

    @property
    def spot_checks_ok(self) -> bool:
        return self.origin_ok and self.conjugate_ok and self.real_part_ok and not self.errors


def _halton(k, n, skip=0):
    from scipy.stats import qmc

    return qmc.Halton(d=k, scramble=False).random(n + skip)[skip:]


def validate_symbol(
    sym: LevySymbol,
    s_range: tuple[float, float],
    x_box: Sequence[tuple[float, float]],
    xi_max: float = 10.0,
    n_points: int = 256,
    n_xi: int = 16,
    deltas: Sequence[float] = (1e-2, 5e-3, 2.5e-3, 1.25e-3, 6.25e-4),
    tolerance: float = 1e-12,
) -> SymbolReport:
    """Empirical probe of the growth bound and time continuity of ``sym``.

    * bound constant: ``max |q| / (1 + |xi|^2)`` over a Halton sample of
      ``(s, x, xi)``;
    * continuity in ``s``: for each delta, the max of ``|q(s+delta) - q(s)|``
      over consecutive points ``s_k = s_lo + k delta`` covering the range and
      over sampled ``(x, xi)``.  The symbol is flagged discontinuous when the
      finest-delta maximum has not dropped below half of the coarsest one;
      the location of the largest jump and its size per probed ``xi`` are
      reported;
    * spot checks at the sampled points: ``q(s,x,0) == 0``, conjugate
      symmetry and ``Re q >= 0``.

    Evaluation failures are recorded in ``errors`` instead of raised.
    """
    d = sym.dimension
    x_box = np.asarray(x_box, dtype=float).reshape(d, 2)
    s_lo, s_hi = map(float, s_range)
    errors = []

    u = _halton(1 + 2 * d, n_points, skip=1)
    s_pts = s_lo + u[:, 0] * (s_hi - s_lo)
    x_pts = x_box[:, 0] + u[:, 1 : 1 + d] * (x_box[:, 1] - x_box[:, 0])
    xi_pts = xi_max * (2.0 * u[:, 1 + d :] - 1.0)

    def safe_eval(s, x, xi):
        try:
            return sym.evaluate(s, x, xi)
        except ValueError as exc:
            errors.append((getattr(exc, "point", None), str(exc)))
            return None

    q = safe_eval(s_pts, x_pts, xi_pts)
    bound = origin = conj = 0.0
    re_min = 0.0
    if q is not None:
        bound = float(np.max(np.abs(q) / (1.0 + np.sum(xi_pts**2, axis=-1))))
        q0 = safe_eval(s_pts, x_pts, np.zeros_like(xi_pts))
        qm = safe_eval(s_pts, x_pts, -xi_pts)
        if q0 is not None:
            origin = float(np.max(np.abs(q0)))
        if qm is not None:
            conj = float(np.max(np.abs(qm - np.conj(q))))
        re_min = float(np.min(q.real))

    # continuity scan: fixed (x, xi) probes, consecutive s pairs
    nx = max(4, min(16, n_points // 16))
    xs = x_box[:, 0] + _halton(d, nx, skip=7) * (x_box[:, 1] - x_box[:, 0])
    xi_line = np.linspace(xi_max / n_xi, xi_max, n_xi)
    xi_probe = xi_line[:, None] * np.ones(d) / np.sqrt(d)
    seq = []
    location = None
    per_xi = []
    for delta in deltas:
        k = int(np.ceil((s_hi - s_lo) / delta))
        s_grid = s_lo + delta * np.arange(k + 1)
        a = safe_eval(s_grid[:, None, None], xs[None, :, None, :], xi_probe[None, None, :, :])
        b = safe_eval(s_grid[:, None, None] + delta, xs[None, :, None, :], xi_probe[None, None, :, :])
        if a is None or b is None:
            break
        diff = np.abs(b - a)  # (k+1, nx, n_xi)
        seq.append((float(delta), float(diff.max())))
        idx = np.unravel_index(int(np.argmax(diff)), diff.shape)
        location = (float(s_grid[idx[0]]), float(s_grid[idx[0]] + delta))
        per_xi = [
            (float(xi_line[j]), float(diff[:, :, j].max())) for j in range(n_xi)
        ]
    continuous = True
    if len(seq) >= 2 and seq[0][1] > tolerance:
        continuous = seq[-1][1] < 0.5 * seq[0][1]
    jump_loc = None
    if not continuous and location is not None:
        jump_loc = 0.5 * (location[0] + location[1])
    return SymbolReport(
        bound_constant=bound,
        continuous=continuous,
        jump_location=jump_loc,
        jump_by_xi=per_xi if not continuous else [],
        continuity_sequence=seq,
        origin_max=origin,
        conjugate_max=conj,
        real_part_min=re_min,
        errors=errors,
        tolerance=tolerance,
    )
