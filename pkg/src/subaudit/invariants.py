"""Chen δ-invariants, the algebraic lemma, the scalar decomposition and the submersion inequalities.

All curvature optimisation happens in orthonormal-frame components, where
the scalar curvature of a ``k``-plane with orthonormal basis ``Q`` (columns)
is ``τ(Q) = ½ R_ijkl P_il P_jk`` with ``P = Q Qᵀ``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalQualityError, PreconditionError
from .geometry import CurvatureSample, orthonormalize, riemann_at, riemann_in_frame
from .submersion import (
    LITERAL_MIXED,
    AdaptedFrame,
    ConventionResolution,
    ONeillTensors,
    SubmersionInstance,
    _tensors_from_jet,
    connection_jet,
    decomposition_residual,
    decomposition_terms,
    fiber_and_horizontal_scalars,
)

__all__ = [
    "ChenLemmaInstance",
    "PlaneSection",
    "DeltaReport",
    "InequalityReport",
    "chen_lemma_check",
    "tau_of_section",
    "delta_invariant",
    "brute_force_inf_tau",
    "scalar_decomposition_residual",
    "inequality_check",
    "equality_case_classify",
    "umbilicity_defect",
    "ricci_extremes",
]

LEMMA_TOL = 1e-9
ORTHO_TOL = 1e-10


# --------------------------------------------------------------------------
# algebraic lemma

@dataclass(frozen=True)
class ChenLemmaInstance:
    """Numbers ``a_1..a_n`` and ``a`` with ``(Σa_i)² = (n−k+1)(Σa_i² + a)``."""

    n: int
    k: int
    values: tuple
    a: float

    def __post_init__(self):
        if not (self.n > self.k >= 2):
            raise PreconditionError(f"need n > k >= 2, got n={self.n}, k={self.k}")
        if len(self.values) != self.n:
            raise PreconditionError(f"expected {self.n} values, got {len(self.values)}")
        v = np.asarray(self.values, dtype=float)
        lhs = float(v.sum()) ** 2
        rhs = (self.n - self.k + 1) * (float(v @ v) + self.a)
        scale = max(1.0, abs(lhs), abs(rhs))
        if abs(lhs - rhs) > LEMMA_TOL * scale:
            raise PreconditionError(
                f"constraint violated: (Σa_i)² = {lhs!r} but (n-k+1)(Σa_i² + a) = {rhs!r}"
            )

    @classmethod
    def solve(cls, values, k):
        """Build the instance whose ``a`` satisfies the constraint exactly."""
        v = np.asarray(values, dtype=float)
        n = v.size
        a = float(v.sum()) ** 2 / (n - k + 1) - float(v @ v)
        return cls(n, k, tuple(float(x) for x in v), a)


def chen_lemma_check(inst: ChenLemmaInstance):
    """Return ``(2Σ_{i<j≤k} a_i a_j − a, equality)``."""
    v = np.asarray(inst.values, dtype=float)
    head = v[: inst.k]
    pair_sum = (head.sum() ** 2 - head @ head) / 2.0
    slack = float(2.0 * pair_sum - inst.a)
    equality = bool(np.all(np.abs(head.sum() - v[inst.k:]) <= LEMMA_TOL))
    return slack, equality


# --------------------------------------------------------------------------
# sections

def _tau_q(R, Q):
    P = Q @ Q.T
    return 0.5 * float(np.einsum("ijkl,il,jk->", R, P, P))


@dataclass
class PlaneSection:
    """A ``k``-plane with orthonormal coordinate-vector basis (rows)."""

    k: int
    basis: np.ndarray
    tau: float = float("nan")


def tau_of_section(curvature: CurvatureSample, section: PlaneSection):
    """``Σ_{a<b} K(e_a, e_b)`` over the section's orthonormal basis."""
    B = np.atleast_2d(np.asarray(section.basis, dtype=float))
    if B.shape[0] != section.k or section.k < 2:
        raise PreconditionError(f"section needs k >= 2 basis vectors, got {B.shape[0]}")
    defect = float(np.max(np.abs(B @ curvature.metric @ B.T - np.eye(section.k))))
    if defect > ORTHO_TOL:
        raise PreconditionError(f"section basis is not orthonormal (defect {defect:.3e})")
    Rf = riemann_in_frame(curvature, B)
    return float(sum(Rf[a, b, b, a] for a, b in itertools.combinations(range(section.k), 2)))


def _complement(Q):
    """Orthonormal basis (columns) of the complement of ``span(Q)``."""
    m = Q.shape[0]
    full, _ = np.linalg.qr(np.hstack([Q, np.eye(m)]))
    return full[:, Q.shape[1] :m]


def _refine(R, Q, max_sweeps=200, tol=1e-10):
    """Block-coordinate descent: each section vector is rotated into the best direction.

    Replacing ``q_a`` by the lowest eigenvector of the partial curvature
    operator on the complement of the other section vectors is the exact
    minimum over all rotations of ``q_a`` with complement vectors.
    """
    Q = Q.copy()
    k = Q.shape[1]
    val = _tau_q(R, Q)
    sweeps = 0
    converged = False
    while sweeps < max_sweeps:
        sweeps += 1
        start = val
        for a in range(k):
            others = np.delete(Q, a, axis=1)
            M = np.einsum("ijkl,jk->il", R, others @ others.T)
            M = 0.5 * (M + M.T)
            C = _complement(others)
            w, V = np.linalg.eigh(C.T @ M @ C)
            cand = C @ V[:, 0]
            current = float(Q[:, a] @ M @ Q[:, a])
            if w[0] < current - 1e-15 * max(1.0, abs(current)):
                Q[:, a] = cand / np.linalg.norm(cand)
        Q, _ = np.linalg.qr(Q)
        new = _tau_q(R, Q)
        if new <= val:
            val = new
        if start - val < tol:
            converged = True
            break
    return Q, val, sweeps, converged


def _coordinate_seeds(g, E, k):
    """All coordinate ``k``-planes, orthonormalised and written in frame components."""
    m = g.shape[0]
    seeds = []
    for combo in itertools.combinations(range(m), k):
        vecs = np.eye(m)[list(combo)]
        B = orthonormalize(vecs, g).vectors
        seeds.append((E @ g @ B.T))  # frame components, columns
    return seeds


def _minimise(R, seeds, rng, restarts, k, max_sweeps):
    m = R.shape[0]
    starts = list(seeds)
    for _ in range(restarts):
        q, r = np.linalg.qr(rng.standard_normal((m, k)))
        starts.append(q * np.sign(np.diag(r)))
    best = None
    sweeps = 0
    unconverged = 0
    # reduce by (value, start index) so the result does not depend on ordering of work
    for idx, Q0 in enumerate(starts):
        Q, val, sw, ok = _refine(R, Q0, max_sweeps)
        sweeps += sw
        unconverged += not ok
        if best is None or val < best[0] - 1e-14:
            best = (val, idx, Q)
    return best, sweeps, unconverged, len(starts)


@dataclass
class DeltaReport:
    k: int
    tau_total: float
    inf_tau: float
    delta: float
    restricted_inf_tau: float
    argmin_basis: np.ndarray
    restricted_argmin_basis: np.ndarray = None
    optimizer_evidence: dict = field(default_factory=dict)

    def to_dict(self):
        out = {
            "k": self.k,
            "tau_total": self.tau_total,
            "inf_tau": self.inf_tau,
            "delta": self.delta,
            "restricted_inf_tau": self.restricted_inf_tau,
            "argmin_basis": np.asarray(self.argmin_basis).tolist(),
            "optimizer_evidence": self.optimizer_evidence,
        }
        if self.restricted_argmin_basis is not None:
            out["restricted_argmin_basis"] = np.asarray(self.restricted_argmin_basis).tolist()
        return out


def delta_invariant(chart, point, k, budget=None, seed=42, restarts=64, frame: AdaptedFrame = None,
                    sample=None, oracle_samples=0):
    """Chen ``δ(k) = τ(p) − inf τ(Π_k)`` by multistart block-coordinate descent.

    Starts are every coordinate ``k``-plane plus ``restarts`` seeded random
    orthonormal ``k``-frames; each start is refined until a sweep improves
    ``τ`` by less than ``1e-10`` or ``budget`` sweeps are spent.  With an
    adapted ``frame`` the infimum over vertical sections is computed first
    and seeds the unrestricted search, so the restricted value is never below
    the unrestricted one.  ``oracle_samples > 0`` also runs the brute-force
    sampler and stores the gap.
    """
    x = chart.point(point)
    m = chart.dim
    if not (isinstance(k, (int, np.integer)) and 2 <= k <= m - 1):
        raise PreconditionError(f"k must satisfy 2 ≤ k ≤ dim−1 = {m - 1}, got {k!r}")
    sample = riemann_at(chart, x) if sample is None else sample
    g = sample.metric
    if frame is not None:
        E = frame.vectors
    else:
        E = orthonormalize(np.eye(m), g).vectors
    R = riemann_in_frame(sample, E)
    tau_total = float(sum(R[a, b, b, a] for a, b in itertools.combinations(range(m), 2)))
    max_sweeps = 200 if budget is None else int(budget)
    rng = np.random.default_rng(seed)
    seeds = _coordinate_seeds(g, E, k)
    evidence = {"seed": seed, "restarts": restarts, "coordinate_seeds": len(seeds)}

    restricted_val = float("nan")
    restricted_Q = None
    if frame is not None and frame.r >= k:
        r = frame.r
        Rv = R[:r, :r, :r, :r]
        vseeds = [np.eye(r)[:, list(c)] for c in itertools.combinations(range(r), k)]
        (rv, _, Qv), sw, unc, n = _minimise(Rv, vseeds, rng, restarts, k, max_sweeps)
        restricted_val = rv
        restricted_Q = np.vstack([Qv, np.zeros((m - r, k))])
        seeds = seeds + [restricted_Q]
        evidence["restricted"] = {"starts": n, "sweeps": sw, "unconverged": unc}

    (val, idx, Q), sweeps, unconverged, nstarts = _minimise(R, seeds, rng, restarts, k, max_sweeps)
    if restricted_Q is not None and val > restricted_val:
        val, Q = restricted_val, restricted_Q
    evidence.update({"starts": nstarts, "sweeps": sweeps, "unconverged": unconverged, "best_start": idx})
    seed_min = min(_tau_q(R, s) for s in seeds)
    if val > seed_min + 1e-12:
        raise NumericalQualityError(f"optimizer result {val!r} exceeds a seed value {seed_min!r}")
    if oracle_samples:
        oracle = brute_force_inf_tau(R, k, oracle_samples, seed, extra=seeds)
        evidence["oracle_value"] = oracle
        evidence["brute_force_gap"] = oracle - val
    basis = Q.T @ E
    rbasis = None if restricted_Q is None else restricted_Q.T @ E
    return DeltaReport(k, tau_total, float(val), tau_total - float(val), float(restricted_val), basis, rbasis, evidence)


def brute_force_inf_tau(R, k, samples=20000, seed=0, extra=()):
    """Smallest ``τ`` over seeded random orthonormal sections plus coordinate sections.

    ``R`` is in orthonormal-frame components.
    """
    R = np.asarray(R, dtype=float)
    m = R.shape[0]
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((samples, m, k))
    Q, _ = np.linalg.qr(G)
    best = float("inf")
    for chunk in range(0, samples, 4000):
        P = np.einsum("nik,njk->nij", Q[chunk : chunk + 4000], Q[chunk : chunk + 4000])
        T = np.einsum("ijkl,njk->nil", R, P, optimize=True)
        vals = 0.5 * np.einsum("nil,nil->n", T, P)
        best = min(best, float(vals.min()))
    for combo in itertools.combinations(range(m), k):
        best = min(best, _tau_q(R, np.eye(m)[:, list(combo)]))
    for S in extra:
        best = min(best, _tau_q(R, S))
    return best


# --------------------------------------------------------------------------
# decomposition + inequalities

def scalar_decomposition_residual(sub, frame, tensors: ONeillTensors, scalars, conv: ConventionResolution,
                                  coeffs=None):
    """``(paper_literal_residual, resolved_residual)`` of the scalar-curvature decomposition.

    ``scalars = (tau, tau_hat, tau_check)`` in the standard orientation.  The
    literal residual uses mixed coefficients ``(-1, +1, -1)`` on
    ``(r·div_H(ħ), ‖T^V‖², ‖A^H‖²)``; the resolved one uses ``coeffs`` (default
    ``conv.mixed_coeffs``).  Both apply ``conv.sigma`` to the curvature terms.
    """
    tau, tau_hat, tau_check = scalars
    terms = decomposition_terms(sub, tensors, tau_hat, tau_check, tau)
    coeffs = conv.mixed_coeffs if coeffs is None else coeffs
    literal = abs(decomposition_residual(terms, conv.sigma, LITERAL_MIXED))
    resolved = abs(decomposition_residual(terms, conv.sigma, coeffs))
    return float(literal), float(resolved)


def _fiber_riemann(R, T_H, r, sigma):
    """Fibre curvature from the direct ambient curvature through the Gauss relation."""
    Rvv = R[:r, :r, :r, :r]
    TT = np.einsum("ils,jks->ijkl", T_H, T_H) - np.einsum("jls,iks->ijkl", T_H, T_H)
    return Rvv - sigma * TT


def ricci_extremes(sample, jet):
    """Smallest and largest ambient Ricci curvature over unit vertical vectors."""
    R = riemann_in_frame(sample, jet.frame.vectors)
    r = jet.r
    ric = np.einsum("iaaj->ij", R)[:r, :r]
    w = np.linalg.eigvalsh(0.5 * (ric + ric.T))
    return float(w[0]), float(w[-1])


@dataclass
class InequalityReport:
    name: str
    lhs: float
    rhs: float
    slack: float
    eta: float
    equality_diagnosis: dict
    terms: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "slack": self.slack,
            "eta": self.eta,
            "equality_diagnosis": self.equality_diagnosis,
            "terms": self.terms,
            "flags": self.flags,
        }


WHICH = {"theorem33": "theorem33", "thm33": "theorem33", "corollary_k2": "corollary_k2",
         "k2": "corollary_k2", "corollary_ricci": "corollary_ricci", "ricci": "corollary_ricci"}


def inequality_check(which, sub: SubmersionInstance, point, k=2, conv=None, seed=42, restarts=64,
                     tol=1e-6, U=None):
    """Evaluate one of the δ-curvature inequalities at ``point``.

    Both sides use standard-orientation curvature values.  The left side of
    ``theorem33`` / ``corollary_k2`` is ``τ(p) − τ(L_k)`` minimised over
    vertical ``k``-planes ``L_k`` and the right side uses that minimising
    plane; the unrestricted ``δ(k)`` is reported in ``terms``.  For
    ``corollary_ricci`` the slack is minimised over unit vertical ``U``
    unless ``U`` (frame components in the vertical space) is given.
    """
    name = WHICH.get(which)
    if name is None:
        raise PreconditionError(f"unknown inequality {which!r}; choose thm33, k2 or ricci")
    conv = ConventionResolution.fixed("standard") if conv is None else conv
    r, n = sub.r, sub.n
    if name == "theorem33" and not (r > k >= 2):
        raise PreconditionError(f"theorem33 needs r > k >= 2 (r={r}, k={k})")
    if name == "corollary_k2":
        if r < 3:
            raise PreconditionError(f"corollary_k2 needs r >= 3 (r={r})")
        k = 2
    if name == "corollary_ricci":
        k = r - 1
    x = sub.total.point(point)
    sample = riemann_at(sub.total, x)
    jet = connection_jet(sub, x)
    t = _tensors_from_jet(jet)
    tau_hat, tau_check = fiber_and_horizontal_scalars(sub, jet.frame, t, conv, sample)
    R = riemann_in_frame(sample, jet.frame.vectors)
    m = r + n
    tau = float(sum(R[a, b, b, a] for a, b in itertools.combinations(range(m), 2)))
    h2 = t.mean_norm ** 2
    div = t.div_H_mean
    AV, TV, AH = t.norms["A_V"], t.norms["T_V"], t.norms["A_H"]
    Rhat = _fiber_riemann(R, t.T_H, r, conv.sigma)
    terms = {
        "tau": tau, "tau_hat": tau_hat, "tau_check": tau_check, "mean_norm2": h2,
        "div_H_mean": div, "A_V": AV, "T_V": TV, "A_H": AH, "T_H": t.norms["T_H"],
    }
    flags = {"sigma": conv.sigma, "orientation": "standard"}
    common = tau_check - 0.5 * r * div + 1.5 * AV + 0.5 * TV
    if k >= 1 and r - k + 1 > 0:
        eta = (2 * tau - 2 * tau_hat - 2 * tau_check - r * r * (r - k) / (r - k + 1) * h2
               + r * div - 3 * AV - TV + AH)
    else:
        eta = float("nan")

    if name in ("theorem33", "corollary_k2"):
        rep = delta_invariant(sub.total, x, k, seed=seed, restarts=restarts, frame=jet.frame, sample=sample)
        Qv = (rep.restricted_argmin_basis @ sub.total._g(x) @ jet.frame.vertical.T).T  # r x k
        tau_hat_L = _tau_q(Rhat, Qv)
        lhs = tau - rep.restricted_inf_tau
        rhs = tau_hat - tau_hat_L + r * r * (r - k) / (2 * (r - k + 1)) * h2 + common
        terms.update({"k": k, "delta_unrestricted": rep.delta, "restricted_inf_tau": rep.restricted_inf_tau,
                      "tau_hat_L": tau_hat_L, "inf_tau": rep.inf_tau,
                      "slack_unrestricted": rhs - rep.delta})
        flags["lhs"] = "tau(p) - min over vertical k-planes of tau(L_k)"
    else:
        ric = np.einsum("iaaj->ij", R)[:r, :r]
        if r >= 2:
            ric_hat = np.einsum("iaaj->ij", Rhat)
        else:
            ric_hat = np.zeros((r, r))
            flags["r_lt_2"] = True
            flags["note"] = "fibre dimension r < 2: vertical-pair terms are empty"
        D = 0.5 * ((ric_hat - ric) + (ric_hat - ric).T)
        if U is None:
            w, V = np.linalg.eigh(D)
            u = V[:, 0]
        else:
            u = np.asarray(U, dtype=float)
            u = u / np.linalg.norm(u)
        lhs = float(u @ ric @ u)
        rhs = float(u @ ric_hat @ u) + r * r / 4 * h2 + common
        terms.update({"k": k, "U_vertical_components": u.tolist(), "ric_V": lhs, "ric_hat": float(u @ ric_hat @ u)})
    diag = equality_case_classify(t, jet.frame, tol, k=k)
    return InequalityReport(name, float(lhs), float(rhs), float(rhs - lhs), float(eta), diag, terms, flags)


# --------------------------------------------------------------------------
# equality case

def umbilicity_defect(tensors: ONeillTensors):
    """``max |T_ij^s − δ_ij h_s|`` (zero for totally umbilical fibres)."""
    r = tensors.T_H.shape[0]
    target = np.einsum("ij,s->ijs", np.eye(r), tensors.mean_components)
    return float(np.max(np.abs(tensors.T_H - target))) if tensors.T_H.size else 0.0


def _shape_pattern(S, k, tol):
    r = S.shape[1]
    n = S.shape[0]
    if r <= k:
        return False, None
    for upper in itertools.combinations(range(r), k):
        lower = [i for i in range(r) if i not in upper]
        up = list(upper)
        s1 = S[0]
        total = float(np.trace(s1[np.ix_(up, up)]))
        if np.max(np.abs(np.diag(s1)[lower] - total)) > tol:
            continue
        ok = True
        for s in range(1, n):
            Ss = S[s]
            if abs(np.trace(Ss[np.ix_(up, up)])) > tol:
                ok = False
                break
            rest = Ss.copy()
            rest[np.ix_(up, up)] = 0.0
            if np.max(np.abs(rest)) > tol:
                ok = False
                break
        if ok:
            return True, up
    return False, None


def equality_case_classify(tensors: ONeillTensors, frame=None, tol=1e-6, k=2):
    """Diagnose the equality case of the δ-inequalities.

    The horizontal basis is rotated so ``X_1`` points along ``ħ`` and the
    vertical basis diagonalises ``S_{X_1}``; the block pattern of the
    equality shape operators is then searched over all choices of the
    ``k`` leading vertical directions.
    """
    S = np.array(tensors.shape_operators(), dtype=float)  # (n, r, r)
    n, r = S.shape[0], S.shape[1]
    if S.size and np.max(np.abs(S - np.transpose(S, (0, 2, 1)))) > 1e3 * max(tol, 1e-9):
        raise NumericalQualityError("shape operators are not symmetric")
    S = 0.5 * (S + np.transpose(S, (0, 2, 1)))
    h = np.asarray(tensors.mean_components, dtype=float)
    if np.linalg.norm(h) > tol:
        O, _ = np.linalg.qr(np.column_stack([h, np.eye(n)]))
        O = O[:, :n] * np.sign(O[:, 0] @ h)
        S = np.einsum("sa,sij->aij", O, S)
    _, V = np.linalg.eigh(S[0])
    S = np.einsum("ia,sij,jb->sab", V, S, V)
    A_H_norm = math.sqrt(tensors.norms["A_H"])
    match, upper = _shape_pattern(S, k, tol) if r > k else (False, None)
    geodesic = max(np.max(np.abs(tensors.T_H), initial=0.0), np.max(np.abs(tensors.T_V), initial=0.0)) <= tol
    umbilical = all(
        np.max(np.abs(Ss - np.trace(Ss) / r * np.eye(r))) <= tol for Ss in S
    )
    cls = "geodesic" if geodesic else ("umbilical" if umbilical else "generic")
    return {
        "A_H_vanishes": bool(A_H_norm <= tol),
        "shape_form_match": bool(match),
        "classification": cls,
        "upper_block": upper,
        "tol": tol,
        "rotated_shape_operators": S.tolist(),
    }
