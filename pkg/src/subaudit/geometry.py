"""Coordinate charts and their Levi-Civita curvature.

Conventions
-----------
``R(X, Y)Z = ∇_X ∇_Y Z − ∇_Y ∇_X Z − ∇_[X,Y] Z`` and
``R(X, Y, Z, W) = g(R(X, Y)Z, W)``.  Sectional curvature is
``K(X, Y) = R(X, Y, Y, X) / (|X|²|Y|² − g(X, Y)²)`` so the unit round
sphere has ``K = +1``.  Riemann arrays are stored fully covariant as
``riemann[i, j, k, l] = R(∂_i, ∂_j, ∂_k, ∂_l)``.

Vectors are coordinate-component arrays; a frame is a 2-D array whose rows
are the frame vectors.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import expr as _expr
from .errors import (
    DegeneratePlaneError,
    DomainBoxError,
    NotPositiveDefiniteError,
    NumericalQualityError,
    PreconditionError,
    RankDeficiencyError,
)

__all__ = [
    "Chart",
    "CurvatureSample",
    "Frame",
    "metric_at",
    "metric_derivatives",
    "christoffel_at",
    "riemann_at",
    "sectional_curvature",
    "scalar_curvature",
    "orthonormalize",
    "random_orthonormal_frame",
    "riemann_in_frame",
    "symmetry_residuals",
    "default_step",
]

EPS = np.finfo(float).eps
BOUNDARY_MARGIN = 1e-6
GRAM_THRESHOLD = 1e-14
SYMMETRY_TOL = 1e-6


@dataclass(frozen=True)
class Chart:
    """A coordinate patch carrying metric components ``g_ij`` as expressions.

    Use :meth:`Chart.from_strings` to build one from text.
    """

    coords: tuple
    metric: tuple  # m x m nested tuple of Expression
    domain: tuple  # m pairs (lo, hi)
    name: str = ""
    _upper: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        m = len(self.coords)
        if m < 1:
            raise PreconditionError("chart needs at least one coordinate")
        if len(self.metric) != m or any(len(row) != m for row in self.metric):
            raise PreconditionError(f"metric must be a {m}x{m} grid")
        if len(self.domain) != m:
            raise PreconditionError("domain needs one interval per coordinate")
        for (lo, hi), c in zip(self.domain, self.coords):
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise PreconditionError(f"bad domain interval for {c!r}: ({lo}, {hi})")
        upper = tuple(
            (i, j, self.metric[i][j]) for i in range(m) for j in range(i, m)
            if not (self.metric[i][j].is_constant and self.metric[i][j]([0.0] * m) == 0.0)
        )
        object.__setattr__(self, "_upper", upper)

    @classmethod
    def from_strings(cls, coords, metric, domain, name=""):
        """Build a chart from coordinate names and metric text.

        ``metric`` is either a full ``m x m`` list of strings or a length-``m``
        list giving the diagonal.  ``domain`` is a list of ``(lo, hi)``.
        """
        coords = tuple(coords)
        m = len(coords)
        if len(metric) == m and all(isinstance(s, str) for s in metric):
            metric = [[metric[i] if i == j else "0" for j in range(m)] for i in range(m)]
        grid = tuple(tuple(_expr.parse(str(s), coords) for s in row) for row in metric)
        return cls(coords, grid, tuple((float(lo), float(hi)) for lo, hi in domain), name)

    @property
    def dim(self):
        return len(self.coords)

    @property
    def widths(self):
        return np.array([hi - lo for lo, hi in self.domain])

    def metric_strings(self):
        return [[e.render() for e in row] for row in self.metric]

    def point(self, values):
        """Coerce a mapping or sequence into a coordinate vector."""
        if isinstance(values, dict):
            try:
                return np.array([float(values[c]) for c in self.coords])
            except KeyError as exc:
                raise PreconditionError(f"point is missing coordinate {exc.args[0]!r}") from None
        x = np.asarray(values, dtype=float)
        if x.shape != (self.dim,):
            raise PreconditionError(f"point must have {self.dim} components, got shape {x.shape}")
        return x

    def check_inside(self, x, pad=None):
        """Raise unless ``x`` is interior, at least ``pad`` from every face.

        ``pad`` defaults to ``1e-6 * width`` per coordinate.
        """
        x = np.asarray(x, dtype=float)
        widths = self.widths
        pad = BOUNDARY_MARGIN * widths if pad is None else np.maximum(pad, BOUNDARY_MARGIN * widths)
        for i, (lo, hi) in enumerate(self.domain):
            if not (lo + pad[i] < x[i] < hi - pad[i]):
                raise DomainBoxError(
                    f"point {self.coords[i]}={x[i]!r} is outside the usable domain "
                    f"({lo}, {hi}) of chart {self.name or self.coords}"
                )

    def random_points(self, count, rng, shrink=0.1):
        """Uniform points in the box shrunk by ``shrink`` of each width."""
        lo = np.array([a for a, _ in self.domain])
        hi = np.array([b for _, b in self.domain])
        w = hi - lo
        return rng.uniform(lo + shrink * w, hi - shrink * w, size=(count, self.dim))

    # fast paths, no domain check
    def _g(self, x):
        m = self.dim
        g = np.zeros((m, m))
        for i, j, e in self._upper:
            g[i, j] = g[j, i] = e(x)
        return g

    def _g_dual(self, x):
        m = self.dim
        g = np.zeros((m, m))
        dg = np.zeros((m, m, m))
        for i, j, e in self._upper:
            d = e.dual(x)
            g[i, j] = g[j, i] = d.value
            dg[:, i, j] = dg[:, j, i] = d.partials
        return g, dg

    def symmetry_defect(self, x):
        """max |g_ij − g_ji| with every entry evaluated separately."""
        m = self.dim
        full = np.array([[self.metric[i][j](x) for j in range(m)] for i in range(m)])
        return float(np.max(np.abs(full - full.T)))


def _check_spd(g, where):
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError(f"metric is not positive definite at {where}") from None


def metric_at(chart: Chart, point):
    """Metric matrix and its inverse at an interior point."""
    x = chart.point(point)
    chart.check_inside(x)
    g = chart._g(x)
    _check_spd(g, x.tolist())
    ginv = np.linalg.solve(g, np.eye(chart.dim))
    return g, ginv


def metric_derivatives(chart: Chart, point):
    """``(g, dg)`` with ``dg[k, i, j] = ∂_k g_ij`` from dual numbers."""
    x = chart.point(point)
    chart.check_inside(x)
    return chart._g_dual(x)


def _christoffel(chart, x):
    g, dg = chart._g_dual(x)
    _check_spd(g, x.tolist())
    ginv = np.linalg.solve(g, np.eye(chart.dim))
    # term[l, i, j] = ∂_i g_jl + ∂_j g_il − ∂_l g_ij
    term = np.transpose(dg, (2, 0, 1)) + np.transpose(dg, (2, 1, 0)) - dg
    return 0.5 * np.einsum("kl,lij->kij", ginv, term), g


def christoffel_at(chart: Chart, point):
    """Christoffel symbols ``gamma[k, i, j] = Γ^k_ij`` at ``point``."""
    x = chart.point(point)
    chart.check_inside(x)
    return _christoffel(chart, x)[0]


def default_step(x):
    """Per-coordinate central-difference step ``eps^(1/3) * max(1, |x_i|)``."""
    return EPS ** (1.0 / 3.0) * np.maximum(1.0, np.abs(x))


def richardson_gradient(func, x, steps, check=None):
    """``out[k] = ∂_k func(x)`` by central differences with one Richardson level.

    ``func`` returns an array; ``steps`` is the per-coordinate base step ``h``.
    The result combines the ``h`` and ``h/2`` central differences as
    ``(4 D(h/2) − D(h)) / 3``.
    """
    x = np.asarray(x, dtype=float)
    out = []
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = steps[k]
        if check is not None:
            check(x + e)
            check(x - e)
        d1 = (func(x + e) - func(x - e)) / (2.0 * steps[k])
        d2 = (func(x + e / 2) - func(x - e / 2)) / steps[k]
        out.append((4.0 * d2 - d1) / 3.0)
    return np.array(out)


@dataclass
class CurvatureSample:
    """Curvature data at one point of a chart."""

    point: np.ndarray
    metric: np.ndarray
    gamma: np.ndarray
    riemann: np.ndarray
    convention: str = "standard"
    residuals: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.point.size


def symmetry_residuals(riemann):
    """Antisymmetry, pair-symmetry and first-Bianchi residuals, scaled by max(1, |R|)."""
    R = riemann
    scale = max(1.0, float(np.max(np.abs(R))))
    return {
        "antisymmetry_ij": float(np.max(np.abs(R + np.transpose(R, (1, 0, 2, 3))))) / scale,
        "antisymmetry_kl": float(np.max(np.abs(R + np.transpose(R, (0, 1, 3, 2))))) / scale,
        "pair_symmetry": float(np.max(np.abs(R - np.transpose(R, (2, 3, 0, 1))))) / scale,
        "bianchi": float(
            np.max(np.abs(R + np.transpose(R, (1, 2, 0, 3)) + np.transpose(R, (2, 0, 1, 3))))
        ) / scale,
    }


def riemann_at(chart: Chart, point, step=None, richardson=True, check=True):
    """Riemann tensor at ``point`` (see module docstring for conventions).

    ``∂Γ`` is taken by central differences of :func:`christoffel_at` with
    step ``h`` (default :func:`default_step`) and one Richardson level.
    With ``check`` the symmetry residuals must stay below ``100 * 1e-6``.
    """
    x = chart.point(point)
    chart.check_inside(x)
    h = default_step(x) if step is None else np.broadcast_to(np.asarray(step, float), x.shape)
    gamma, g = _christoffel(chart, x)

    def inside(y):
        chart.check_inside(y)

    if richardson:
        dgamma = richardson_gradient(lambda y: _christoffel(chart, y)[0], x, h, inside)
    else:
        parts = []
        for k in range(x.size):
            e = np.zeros_like(x)
            e[k] = h[k]
            inside(x + e)
            inside(x - e)
            parts.append((_christoffel(chart, x + e)[0] - _christoffel(chart, x - e)[0]) / (2 * h[k]))
        dgamma = np.array(parts)
    # dgamma[i, l, j, k] = ∂_i Γ^l_jk ; up[i, j, k, l] = R^l_ijk
    up = (
        np.einsum("iljk->ijkl", dgamma)
        - np.einsum("jlik->ijkl", dgamma)
        + np.einsum("lim,mjk->ijkl", gamma, gamma)
        - np.einsum("ljm,mik->ijkl", gamma, gamma)
    )
    riemann = np.einsum("ijkp,pl->ijkl", up, g)
    res = symmetry_residuals(riemann)
    if check and max(res.values()) > 100 * SYMMETRY_TOL:
        raise NumericalQualityError(
            f"Riemann symmetry residual {max(res.values()):.3e} exceeds threshold at {x.tolist()}"
        )
    return CurvatureSample(x, g, gamma, riemann, "standard", res)


def _inner(g, a, b):
    return float(a @ g @ b)


def sectional_curvature(sample: CurvatureSample, X, Y):
    """Sectional curvature of the plane spanned by coordinate vectors X, Y."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    g = sample.metric
    den = _inner(g, X, X) * _inner(g, Y, Y) - _inner(g, X, Y) ** 2
    if den <= GRAM_THRESHOLD:
        raise DegeneratePlaneError(f"degenerate plane (Gram determinant {den:.3e})")
    num = np.einsum("ijkl,i,j,k,l->", sample.riemann, X, Y, Y, X)
    return float(num / den)


@dataclass
class Frame:
    """Orthonormal vectors (rows of ``vectors``) at ``point``."""

    point: np.ndarray
    vectors: np.ndarray
    metric: np.ndarray

    def gram(self):
        return self.vectors @ self.metric @ self.vectors.T

    def orthonormality_defect(self):
        return float(np.max(np.abs(self.gram() - np.eye(len(self.vectors)))))


def _cholesky_qr2(V, g, cond_floor=1e-4):
    """Gram–Schmidt via two Cholesky passes; ``None`` when ``V`` is poorly conditioned."""
    W = V
    for sweep in range(2):
        G = W @ g @ W.T
        try:
            L = np.linalg.cholesky(G)
        except np.linalg.LinAlgError:
            return None
        if sweep == 0:
            rel = np.diag(L) / np.sqrt(np.diag(G))
            if not np.all(rel > cond_floor):
                return None
        W = np.linalg.solve(L, W)
    return W


def orthonormalize(vectors, metric, point=None, pivot_tol=1e-12):
    """Gram–Schmidt in the inner product of ``metric``.

    The first vector keeps its direction.  A vector whose residual norm falls
    below ``pivot_tol`` times its own length signals rank deficiency.
    """
    V = np.atleast_2d(np.asarray(vectors, dtype=float))
    g = np.asarray(metric, dtype=float)
    fast = _cholesky_qr2(V, g)
    if fast is not None:
        pt = np.zeros(g.shape[0]) if point is None else np.asarray(point, dtype=float)
        return Frame(pt, fast, g)
    out = np.zeros_like(V)
    for idx, v in enumerate(V):
        norm0 = np.sqrt(max(float(v @ g @ v), 0.0))
        w = v.copy()
        done = out[:idx]
        # classical Gram–Schmidt applied twice is as stable as the modified form
        for _ in range(2):
            w = w - (done @ (g @ w)) @ done
        n = np.sqrt(max(float(w @ g @ w), 0.0))
        if norm0 == 0.0 or n <= pivot_tol * norm0:
            raise RankDeficiencyError(f"vector {idx} is linearly dependent on its predecessors")
        out[idx] = w / n
    pt = np.zeros(g.shape[0]) if point is None else np.asarray(point, dtype=float)
    return Frame(pt, out, g)


def random_orthonormal_frame(sample: CurvatureSample, seed):
    """Orthonormal frame from Gram–Schmidt of seeded Gaussian vectors."""
    rng = np.random.default_rng(seed)
    m = sample.dim
    return orthonormalize(rng.standard_normal((m, m)), sample.metric, sample.point)


def riemann_in_frame(sample: CurvatureSample, vectors):
    """``R(E_a, E_b, E_c, E_d)`` for frame rows ``E``."""
    E = np.asarray(vectors, dtype=float)
    return np.einsum("ijkl,ai,bj,ck,dl->abcd", sample.riemann, E, E, E, E, optimize=True)


def scalar_curvature(sample: CurvatureSample, frame: Frame, tol=1e-10):
    """``τ = Σ_{a<b} K(e_a, e_b)`` over an orthonormal frame."""
    E = frame.vectors
    defect = float(np.max(np.abs(E @ sample.metric @ E.T - np.eye(len(E)))))
    if defect > tol:
        raise PreconditionError(f"frame is not orthonormal (defect {defect:.3e})")
    Rf = riemann_in_frame(sample, E)
    return float(sum(Rf[a, b, b, a] for a, b in itertools.combinations(range(len(E)), 2)))
