"""Position/clock solving from pseudoranges, and GDOP geometry analysis.

A pseudorange bundles true speaker distance with a common clock-offset term,
so four or more observations are solved jointly for (x, y, z, dt) by
iteratively linearizing the range equations and taking whitened least-squares
steps.  GDOP condenses how a constellation's geometry amplifies ranging noise
into state error at any point of interest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .detector import SPEED_OF_SOUND, PseudorangeSet
from .errors import ConfigError, GeometryError

DEFAULT_SIGMA = 0.05
RCOND_LIMIT = 1e-12

GDOP_BANDS = (
    ("excellent", 0.0, 5.0),
    ("moderate", 5.0, 10.0),
    ("fair", 10.0, 20.0),
)
SOLVABLE_GDOP = 20.0


@dataclass(frozen=True)
class Constellation:
    """Fixed speaker positions with per-speaker pseudorange noise scales."""

    speakers: np.ndarray
    sigmas: np.ndarray | None = None

    def __post_init__(self):
        spk = np.atleast_2d(np.asarray(self.speakers, dtype=float))
        if spk.shape[0] < 4 or spk.shape[1] != 3:
            raise ConfigError(
                f"constellation needs >= 4 speakers with (x, y, z) each, "
                f"got shape {spk.shape}"
            )
        sig = self.sigmas
        if sig is None:
            sig = np.full(spk.shape[0], DEFAULT_SIGMA)
        else:
            sig = np.asarray(sig, dtype=float)
            if sig.shape != (spk.shape[0],):
                raise ConfigError(
                    f"need one sigma per speaker ({spk.shape[0]}), got {sig.shape}"
                )
            if np.any(sig <= 0):
                raise ConfigError("all sigmas must be positive")
        object.__setattr__(self, "speakers", spk)
        object.__setattr__(self, "sigmas", sig)

    def __len__(self) -> int:
        return len(self.speakers)

    def is_coplanar(self, tol: float = 1e-9) -> bool:
        """True when all speakers lie in one plane (rank < 3 after centering),
        which leaves a mirror-image ambiguity across that plane."""
        centered = self.speakers - self.speakers.mean(axis=0)
        s = np.linalg.svd(centered, compute_uv=False)
        return s[-1] <= tol * max(s[0], 1.0)


@dataclass(frozen=True)
class FixEstimate:
    """A receiver state hypothesis: position in meters, clock bias in seconds."""

    position: np.ndarray
    clock_bias: float = 0.0

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float)
        if pos.shape != (3,) or not np.all(np.isfinite(pos)):
            raise ConfigError(f"position must be 3 finite coordinates, got {pos}")
        if not math.isfinite(self.clock_bias):
            raise ConfigError("clock_bias must be finite")
        object.__setattr__(self, "position", pos)


@dataclass(frozen=True)
class PositionFix:
    """Solved receiver state plus solver diagnostics.

    ``status`` is one of 'converged', 'no_convergence' (iteration budget
    exhausted; estimate is the best iterate), or 'unsolvable' (singular or
    near-singular geometry).  ``covariance`` is the 4x4 model covariance of
    (x, y, z, c*dt), all in meters, or None when unsolvable.
    """

    estimate: FixEstimate
    iterations: int
    final_update_norm: float
    residuals: np.ndarray | None
    covariance: np.ndarray | None
    converged: bool
    status: str = "converged"
    note: str = ""


@dataclass(frozen=True)
class Cylinder:
    """Upright circular volume: radius around a (cx, cy) axis, z in [z_min, z_max]."""

    radius: float
    z_min: float
    z_max: float
    center: tuple[float, float] = (0.0, 0.0)

    def contains(self, point) -> bool:
        x, y, z = point
        return (math.hypot(x - self.center[0], y - self.center[1]) <= self.radius
                and self.z_min <= z <= self.z_max)

    def grid_points(self, spacing: float) -> np.ndarray:
        cx, cy = self.center
        xs = np.arange(cx - self.radius, cx + self.radius + spacing / 2, spacing)
        ys = np.arange(cy - self.radius, cy + self.radius + spacing / 2, spacing)
        zs = np.arange(self.z_min, self.z_max + spacing / 2, spacing)
        pts = np.array([(x, y, z) for x in xs for y in ys for z in zs
                        if math.hypot(x - cx, y - cy) <= self.radius])
        return pts.reshape(-1, 3)


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangular volume."""

    mins: tuple[float, float, float]
    maxs: tuple[float, float, float]

    def contains(self, point) -> bool:
        return all(lo <= p <= hi for p, lo, hi in zip(point, self.mins, self.maxs))

    def grid_points(self, spacing: float) -> np.ndarray:
        axes = [np.arange(lo, hi + spacing / 2, spacing)
                for lo, hi in zip(self.mins, self.maxs)]
        pts = np.array([(x, y, z) for x in axes[0] for y in axes[1] for z in axes[2]])
        return pts.reshape(-1, 3)


@dataclass(frozen=True)
class GdopGrid:
    """GDOP sampled over a volume, with band classification per cell."""

    points: np.ndarray
    values: np.ndarray
    bands: tuple[str, ...]
    spacing: float
    solvable_fraction: float
    mean_solvable_gdop: float

    def band_fractions(self) -> dict[str, float]:
        n = len(self.bands)
        out = {}
        for name, _, _ in GDOP_BANDS:
            out[name] = sum(b == name for b in self.bands) / n
        out["unsolvable"] = sum(b == "unsolvable" for b in self.bands) / n
        return out


def predict_range(speaker, receiver) -> float:
    """Euclidean speaker-to-receiver distance."""
    d = np.asarray(speaker, dtype=float) - np.asarray(receiver, dtype=float)
    return float(np.linalg.norm(d))


def model_pseudorange(range_m: float, dt: float, c: float = SPEED_OF_SOUND) -> float:
    """Apparent distance: true range inflated by the clock bias, range + c*dt."""
    return range_m + c * dt


def linearize(constellation: Constellation, estimate: FixEstimate,
              pseudoranges) -> tuple[np.ndarray, np.ndarray]:
    """First-order expansion of the pseudorange equations about an estimate.

    Row i of the design matrix holds the negated unit line-of-sight vector
    from the estimate to speaker i, then the sound speed c:

        A[i] = (-(x_i - x0)/R0_i, -(y_i - y0)/R0_i, -(z_i - z0)/R0_i, c)
        b[i] = P_i - R0_i

    The state solved against this A is (dx, dy, dz, dt) where dt is the
    *absolute* clock bias, not an increment — which is why b carries no
    clock term.  Re-solving the bias from scratch each iteration is
    algebraically identical to accumulating increments, because the model is
    exactly linear in dt.

    Raises :class:`GeometryError` if the estimate coincides with a speaker
    (the line-of-sight direction is undefined there).
    """
    P = _range_array(pseudoranges)
    spk = constellation.speakers
    if len(P) != len(spk):
        raise ConfigError(
            f"{len(P)} pseudoranges vs {len(spk)} speakers"
        )
    diff = spk - estimate.position
    r0 = np.linalg.norm(diff, axis=1)
    if np.any(r0 == 0.0):
        raise GeometryError("estimate coincides with a speaker; cannot linearize")
    a = np.column_stack([-diff / r0[:, None], np.full(len(spk), SPEED_OF_SOUND)])
    b = P - r0
    return a, b


def whiten(a: np.ndarray, b: np.ndarray, sigmas) -> tuple[np.ndarray, np.ndarray]:
    """Scale each observation row by 1/sigma_i so rows carry equal variance."""
    sig = np.asarray(sigmas, dtype=float)
    if np.any(sig <= 0):
        raise ConfigError("all sigmas must be positive for whitening")
    return a / sig[:, None], b / sig


def _range_array(pseudoranges) -> np.ndarray:
    if isinstance(pseudoranges, PseudorangeSet):
        return np.asarray(pseudoranges.ranges, dtype=float)
    return np.asarray(pseudoranges, dtype=float)


def _algebraic_roots(P: np.ndarray, spk: np.ndarray):
    """Closed-form solutions of ||s_i - x|| + beta = P_i for exactly 4 speakers.

    Squaring each equation and eliminating the shared quadratic term
    lam = |x|^2 - beta^2 reduces the system to a 4x4 linear solve in
    (x, beta) parametrized by lam, with lam fixed by a final quadratic.
    The quadratic generically has two roots — an exactly-determined set of
    four spheres intersects in up to two points — and both are returned as
    (x, y, z, beta) rows.
    """
    m = np.column_stack([2.0 * spk, -2.0 * P])
    if abs(np.linalg.det(m)) < 1e-9:
        return []
    minv = np.linalg.inv(m)
    rhs = np.sum(spk * spk, axis=1) - P * P
    u = minv @ rhs
    v = minv @ np.ones(4)
    qa = v[:3] @ v[:3] - v[3] ** 2
    qb = 2.0 * (u[:3] @ v[:3] - u[3] * v[3]) - 1.0
    qc = u[:3] @ u[:3] - u[3] ** 2
    if abs(qa) < 1e-15:
        if abs(qb) < 1e-15:
            return []
        lams = [-qc / qb]
    else:
        disc = qb * qb - 4.0 * qa * qc
        if disc < 0.0:
            return []
        sq = math.sqrt(disc)
        lams = [(-qb + sq) / (2.0 * qa), (-qb - sq) / (2.0 * qa)]
    return [u + lam * v for lam in lams]


def _gauss_newton(P, spk, sigmas, pos0, cdt0, tol, max_iter, step_limit):
    """Damped iteration core.  Works in a homogeneous meters state
    (x, y, z, c*dt): substituting c*dt for dt rescales the clock column of
    the design matrix to ones, which keeps the normal matrix conditioned
    (squaring a c = 1480 column costs ~6 digits otherwise).  Numerically
    equivalent to solving the c-column system of :func:`linearize`."""
    pos = np.array(pos0, dtype=float)
    cdt = float(cdt0)
    n = len(P)
    upd_norm = math.inf
    for it in range(1, max_iter + 1):
        diff = spk - pos
        r0 = np.linalg.norm(diff, axis=1)
        if np.any(r0 == 0.0):
            return pos, cdt, it, upd_norm, "unsolvable"
        a_u = np.column_stack([-diff / r0[:, None], np.ones(n)])
        aw, bw = a_u / sigmas[:, None], (P - r0) / sigmas
        g = aw.T @ aw
        cond = np.linalg.cond(g)
        if not np.isfinite(cond) or 1.0 / cond < RCOND_LIMIT:
            return pos, cdt, it, upd_norm, "unsolvable"
        x = np.linalg.solve(g, aw.T @ bw)
        upd = np.array([x[0], x[1], x[2], x[3] - cdt])
        pn = np.linalg.norm(upd[:3])
        if step_limit and pn > step_limit:
            # a full step can overshoot along the weakly observed vertical
            # axis and land where all lines of sight are nearly parallel;
            # capping the position step keeps the iteration in honest geometry
            upd *= step_limit / pn
        pos = pos + upd[:3]
        cdt = cdt + upd[3]
        upd_norm = float(np.linalg.norm(upd))
        if upd_norm < tol:
            return pos, cdt, it, upd_norm, "converged"
    return pos, cdt, max_iter, upd_norm, "no_convergence"


def solve_fix(pseudoranges, constellation: Constellation,
              init: FixEstimate | None = None, tol: float = 1e-6,
              max_iter: int = 25, step_limit: float = 1.0,
              volume=None) -> PositionFix:
    """Solve receiver position and clock bias from one epoch of pseudoranges.

    Starting from ``init`` (default (0, 0, 1) with zero bias), each iteration
    linearizes about the current estimate, whitens rows by the constellation
    sigmas, and solves the normal equations; it stops when the update norm
    (position plus c*dt, all in meters) drops below ``tol``.

    With exactly four observations the underlying sphere system has up to two
    exact solutions, and an iteration started far from the receiver can fall
    into the wrong one.  After the iterative stage, the closed-form root pair
    is checked: a root is *feasible* when every implied speaker distance
    P_i - c*dt is positive and, if a bounding ``volume`` is supplied, the
    position lies inside it.  If the iterate landed on an infeasible root and
    exactly one feasible root exists, the solve is re-polished from the
    feasible one; likewise a non-converged run is restarted from the feasible
    root nearest ``init``.  With more than four observations the least-squares
    optimum is generically unique and no disambiguation is attempted.

    Returns a :class:`PositionFix`; geometry failures surface as
    ``status='unsolvable'`` rather than an exception so batch runs can
    continue past degenerate waypoints.
    """
    P = _range_array(pseudoranges)
    spk = constellation.speakers
    if len(P) < 4:
        raise ConfigError(f"need >= 4 pseudoranges, got {len(P)}")
    if len(P) != len(spk):
        raise ConfigError(f"{len(P)} pseudoranges vs {len(spk)} speakers")
    if init is None:
        init = FixEstimate(np.array([0.0, 0.0, 1.0]))
    sig = constellation.sigmas

    pos, cdt, its, upd, status = _gauss_newton(
        P, spk, sig, init.position, SPEED_OF_SOUND * init.clock_bias,
        tol, max_iter, step_limit)

    if len(P) == 4:
        roots = _algebraic_roots(P, spk)

        def feasible(w):
            return (np.all(P - w[3] > 0.0)
                    and (volume is None or volume.contains(w[:3])))

        feas = [w for w in roots if feasible(w)]
        if status == "converged":
            here = np.append(pos, cdt)
            if not feasible(here) and len(feas) == 1:
                pos2, cdt2, its2, upd2, st2 = _gauss_newton(
                    P, spk, sig, feas[0][:3], feas[0][3], tol, max_iter, step_limit)
                if st2 == "converged":
                    pos, cdt, upd, status = pos2, cdt2, upd2, st2
                    its += its2
        elif feas:
            w = min(feas, key=lambda w: np.linalg.norm(w[:3] - init.position))
            pos2, cdt2, its2, upd2, st2 = _gauss_newton(
                P, spk, sig, w[:3], w[3], tol, max_iter, step_limit)
            if st2 == "converged":
                pos, cdt, upd, status = pos2, cdt2, upd2, st2
                its += its2

    note = ""
    if constellation.is_coplanar():
        note = ("coplanar constellation: fixes are ambiguous under mirror "
                "reflection across the speaker plane")

    estimate = FixEstimate(pos, cdt / SPEED_OF_SOUND)
    if status == "unsolvable":
        return PositionFix(estimate=estimate, iterations=its,
                           final_update_norm=upd, residuals=None,
                           covariance=None, converged=False,
                           status=status, note=note)

    diff = spk - pos
    r0 = np.linalg.norm(diff, axis=1)
    residuals = P - (r0 + cdt)
    a_u = np.column_stack([-diff / r0[:, None], np.ones(len(P))])
    aw = a_u / sig[:, None]
    g = aw.T @ aw
    covariance = np.linalg.inv(g) if 1.0 / np.linalg.cond(g) > RCOND_LIMIT else None
    return PositionFix(estimate=estimate, iterations=its,
                       final_update_norm=upd, residuals=residuals,
                       covariance=covariance, converged=status == "converged",
                       status=status, note=note)


def gdop(constellation: Constellation, point, c: float = SPEED_OF_SOUND) -> float:
    """Geometric dilution of precision at a point: sqrt(trace((A^T A)^-1)).

    A is the unwhitened design matrix at the point with the clock state
    expressed in meters (c*dt), i.e. a ones column; that makes all four
    diagonal variance terms commensurate so the trace is meaningful.
    Singular geometry (including a point coinciding with a speaker) returns
    ``inf``, which classifies as unsolvable rather than pretending to be a
    number.
    """
    spk = constellation.speakers
    diff = spk - np.asarray(point, dtype=float)
    r0 = np.linalg.norm(diff, axis=1)
    if np.any(r0 == 0.0):
        return math.inf
    a_u = np.column_stack([-diff / r0[:, None], np.ones(len(spk))])
    g = a_u.T @ a_u
    cond = np.linalg.cond(g)
    if not np.isfinite(cond) or 1.0 / cond < RCOND_LIMIT:
        return math.inf
    return float(math.sqrt(np.trace(np.linalg.inv(g))))


def classify_gdop(value: float) -> str:
    """Map a GDOP value onto its quality band; the bands partition [0, inf]."""
    for name, lo, hi in GDOP_BANDS:
        if lo <= value < hi:
            return name
    return "unsolvable"


def gdop_map(constellation: Constellation, volume, spacing: float = 0.1) -> GdopGrid:
    """Evaluate GDOP on a regular grid through a volume.

    Reports the fraction of cells below the solvability cutoff (GDOP < 20)
    and the mean GDOP over those solvable cells — the two headline numbers
    for comparing constellation layouts.
    """
    if spacing <= 0:
        raise ConfigError(f"grid spacing must be positive, got {spacing}")
    pts = volume.grid_points(spacing)
    if len(pts) == 0:
        raise ConfigError("volume produced an empty grid")
    values = np.array([gdop(constellation, p) for p in pts])
    bands = tuple(classify_gdop(v) for v in values)
    solvable = np.isfinite(values) & (values < SOLVABLE_GDOP)
    frac = float(np.mean(solvable))
    mean_solv = float(np.mean(values[solvable])) if solvable.any() else math.nan
    return GdopGrid(points=pts, values=values, bands=bands, spacing=spacing,
                    solvable_fraction=frac, mean_solvable_gdop=mean_solv)
