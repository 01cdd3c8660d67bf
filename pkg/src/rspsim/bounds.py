"""Which Bob states a two-qubit resource can remotely prepare.

Alice may apply any local filter ``M = V^dag D U`` and keep Bob's photon only
when it succeeds.  ``V`` acts after the filter on her photon alone, so only
``D @ U`` matters.  For Bell-diagonal ("tetrahedron") resources
``(I + t1 XX + t2 YY + t3 ZZ)/4`` the reachable Bloch vectors fill the
origin-centred ellipsoid with semi-axes ``|t1|, |t2|, |t3|``; everything
else here either evaluates that closed form or checks it by sampling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qstate
from .errors import StateError
from .optics import procrustean
from .qstate import I2, PAULIS, SX, SY, SZ

EIG_TOL = 1e-12
DEGENERATE_AXIS = 1e-12
DEGENERATE_COORD = 1e-9
MIN_SUCCESS = 1e-12


@dataclass(frozen=True)
class TetrahedronState:
    t1: float
    t2: float
    t3: float

    def __post_init__(self):
        for i, lam in enumerate(self.eigenvalues(), start=1):
            if lam < -EIG_TOL:
                raise StateError(
                    f"({self.t1}, {self.t2}, {self.t3}) lies outside the tetrahedron: eigenvalue lambda{i} = {lam:.6g} < 0"
                )

    @property
    def t(self) -> np.ndarray:
        return np.array([self.t1, self.t2, self.t3], dtype=float)

    def eigenvalues(self) -> np.ndarray:
        t1, t2, t3 = self.t1, self.t2, self.t3
        return np.array(
            [
                (1 - t1 + t2 + t3) / 4,
                (1 + t1 - t2 + t3) / 4,
                (1 + t1 + t2 - t3) / 4,
                (1 - t1 - t2 - t3) / 4,
            ]
        )

    @classmethod
    def from_eigenvalues(cls, lam) -> "TetrahedronState":
        l1, l2, l3, l4 = lam
        return cls(1 - 2 * (l1 + l4), 1 - 2 * (l2 + l4), 1 - 2 * (l3 + l4))

    @classmethod
    def random(cls, rng: np.random.Generator) -> "TetrahedronState":
        """Uniform over the tetrahedron (flat Dirichlet weights on its vertices)."""
        return cls.from_eigenvalues(rng.dirichlet(np.ones(4)))


def tetra_state(t: TetrahedronState) -> np.ndarray:
    rho = np.eye(4, dtype=complex)
    for ti, s in zip(t.t, PAULIS):
        rho = rho + ti * np.kron(s, s)
    return rho / 4


def is_entangled(t: TetrahedronState) -> bool:
    """Entangled iff some eigenvalue exceeds 1/2 (outside the inscribed octahedron)."""
    return bool(t.eigenvalues().max() > 0.5 + EIG_TOL)


@dataclass(frozen=True)
class PreparableEllipsoid:
    semi_axes: tuple[float, float, float]

    def residual(self, s) -> np.ndarray:
        """How far Bloch vectors ``s`` (shape (3,) or (n, 3)) stick out of the ellipsoid.

        Along non-degenerate axes this is ``sqrt(sum (s_i/a_i)^2) - 1``; a zero
        semi-axis contributes ``|s_i|`` directly.  Values <= 0 mean inside.
        """
        single = np.ndim(s) == 1
        s = np.atleast_2d(np.asarray(s, dtype=float))
        a = np.asarray(self.semi_axes)
        live = a >= DEGENERATE_AXIS
        radial = np.sqrt(np.sum((s[:, live] / a[live]) ** 2, axis=1)) - 1 if live.any() else -np.ones(len(s))
        flat = np.abs(s[:, ~live]).max(axis=1) if (~live).any() else np.zeros(len(s))
        out = np.maximum(radial, flat)
        return float(out[0]) if single else out

    def contains(self, s, tol: float = 1e-9) -> np.ndarray:
        s = np.atleast_2d(np.asarray(s, dtype=float))
        a = np.asarray(self.semi_axes)
        live = a >= DEGENERATE_AXIS
        radial_ok = np.sqrt(np.sum((s[:, live] / a[live]) ** 2, axis=1)) <= 1 + tol
        flat_ok = np.all(np.abs(s[:, ~live]) <= DEGENERATE_COORD, axis=1)
        return radial_ok & flat_ok

    @property
    def volume(self) -> float:
        return 4 / 3 * np.pi * float(np.prod(self.semi_axes))


def preparable_ellipsoid(t: TetrahedronState) -> PreparableEllipsoid:
    return PreparableEllipsoid(tuple(float(abs(x)) for x in t.t))


@dataclass(frozen=True)
class RotationAxis:
    """Unit vector ``(sin a cos b, sin a sin b, cos a)``."""

    alpha: float
    beta: float

    @property
    def n(self) -> np.ndarray:
        a, b = self.alpha, self.beta
        return np.array([np.sin(a) * np.cos(b), np.sin(a) * np.sin(b), np.cos(a)])

    def rotation(self, theta: float = np.pi / 2) -> np.ndarray:
        """``cos(theta) I + i sin(theta) n.sigma``; the default is ``i n.sigma``."""
        nx, ny, nz = self.n
        return np.cos(theta) * I2 + 1j * np.sin(theta) * (nx * SX + ny * SY + nz * SZ)


def surface_trace(t: TetrahedronState, axis: RotationAxis) -> np.ndarray:
    a, b = axis.alpha, axis.beta
    return t.t * np.array([np.sin(2 * a) * np.cos(b), np.sin(2 * a) * np.sin(b), np.cos(2 * a)])


def bob_bloch(resource: np.ndarray, m: np.ndarray) -> tuple[np.ndarray, float]:
    """Bob's Bloch vector and success probability after Alice's filter ``m``."""
    bob = qstate.partial_trace_A(qstate.apply_alice(resource, m))
    p = float(np.trace(bob).real)
    if p < 1e-15:
        raise StateError(f"filter success probability {p:.3g} is zero")
    return qstate.bloch_from_state(bob / p), p


SURFACE_TOL = 1e-10


def surface_point(t: TetrahedronState, axis: RotationAxis) -> np.ndarray:
    """Bob's state when Alice rotates by ``i n.sigma`` and projects onto |0>.

    Returns the closed-form trace point after checking it against the direct
    density-matrix computation.
    """
    closed = surface_trace(t, axis)
    m = np.diag([1, 0]).astype(complex) @ axis.rotation()
    direct, _ = bob_bloch(tetra_state(t), m)
    err = np.max(np.abs(direct - closed))
    if err > SURFACE_TOL:
        raise AssertionError(f"closed-form surface point disagrees with direct evaluation by {err:.3g}")
    return closed


def purity_AB(t: TetrahedronState) -> float:
    return float((1 + np.sum(t.t**2)) / 4)


def max_purity_B(t: TetrahedronState) -> float:
    return float((1 + np.max(t.t**2)) / 2)


def best_surface_purity(t: TetrahedronState) -> float:
    """Purity of the surface point along the longest ellipsoid axis (attains :func:`max_purity_B`)."""
    k = int(np.argmax(np.abs(t.t)))
    axis = [RotationAxis(np.pi / 4, 0.0), RotationAxis(np.pi / 4, np.pi / 2), RotationAxis(0.0, 0.0)][k]
    s = surface_point(t, axis)
    return float((1 + s @ s) / 2)


def max_fidelity_pure(t: TetrahedronState, n) -> float:
    """Best fidelity to the pure state with Bloch direction ``n`` over the ellipsoid.

    The support function of the ellipsoid gives ``max n.s = |diag(t) n|``.
    """
    n = np.asarray(n, dtype=float)
    n = n / np.linalg.norm(n)
    return float((1 + np.linalg.norm(t.t * n)) / 2)


def random_filters(n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` filters ``diag(a, b) @ U`` with a, b uniform in [0, 1].

    ``U = cos(theta) I + i sin(theta) n.sigma`` with theta uniform on [0, pi)
    and n area-uniform on the sphere.  This is not exactly Haar, which a
    coverage check does not need.
    """
    a = rng.uniform(0, 1, n)
    b = rng.uniform(0, 1, n)
    theta = rng.uniform(0, np.pi, n)
    nvec = rng.normal(size=(n, 3))
    nvec /= np.linalg.norm(nvec, axis=1, keepdims=True)
    ns = np.einsum("ni,ijk->njk", nvec, np.array(PAULIS))
    u = np.cos(theta)[:, None, None] * I2 + 1j * np.sin(theta)[:, None, None] * ns
    d = np.zeros((n, 2, 2), dtype=complex)
    d[:, 0, 0] = a
    d[:, 1, 1] = b
    return d @ u


def bob_bloch_batch(resource: np.ndarray, filters: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`bob_bloch` without the per-call validation."""
    r = resource.reshape(2, 2, 2, 2)
    povm = np.einsum("nca,ncb->nab", filters.conj(), filters)
    bob = np.einsum("nji,ibjc->nbc", povm, r)
    p = np.einsum("nbb->n", bob).real
    safe = np.where(p > 0, p, 1.0)
    s = np.stack([np.einsum("nij,ji->n", bob, s_).real for s_ in PAULIS], axis=1) / safe[:, None]
    return s, p


@dataclass
class MonteCarloCloud:
    points: np.ndarray
    success: np.ndarray
    max_length: float
    max_residual: float | None = None
    violations: int | None = None

    def summary(self) -> dict:
        out = {"n_points": int(len(self.points)), "max_bloch_length": self.max_length}
        if self.max_residual is not None:
            out["max_ellipsoid_residual"] = self.max_residual
            out["violations"] = self.violations
        return out


def monte_carlo_preparable(
    resource: np.ndarray,
    n_samples: int,
    seed: int,
    *,
    tetra: TetrahedronState | None = None,
    chunk: int = 100_000,
    tol: float = 1e-9,
) -> MonteCarloCloud:
    """Sample single local filters and collect Bob's normalized Bloch vectors.

    Samples are drawn in chunks, each from its own child seed, so the cloud
    is the same however the chunks are scheduled.  Samples whose success
    probability falls below 1e-12 are dropped.  Passing ``tetra`` adds the
    ellipsoid residual summary.
    """
    resource = qstate.validate(resource, dim=4)
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    n_chunks = -(-n_samples // chunk)
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    pts, probs = [], []
    for i, child in enumerate(children):
        size = min(chunk, n_samples - i * chunk)
        filters = random_filters(size, np.random.default_rng(child))
        s, p = bob_bloch_batch(resource, filters)
        keep = p >= MIN_SUCCESS
        pts.append(s[keep])
        probs.append(p[keep])
    points = np.concatenate(pts)
    success = np.concatenate(probs)
    cloud = MonteCarloCloud(points, success, float(np.linalg.norm(points, axis=1).max(initial=0.0)))
    if tetra is not None:
        ell = preparable_ellipsoid(tetra)
        res = ell.residual(points)
        cloud.max_residual = float(res.max(initial=-1.0))
        cloud.violations = int(np.count_nonzero(~ell.contains(points, tol)))
    return cloud


def hull_volume_fraction(points: np.ndarray, t: TetrahedronState, n_probe: int, seed: int) -> float:
    """Share of the ellipsoid volume covered by the convex hull of ``points`` (rejection estimate)."""
    from scipy.spatial import ConvexHull, Delaunay

    hull = ConvexHull(points)
    tess = Delaunay(points[hull.vertices])
    rng = np.random.default_rng(seed)
    a = np.abs(t.t)
    probe = rng.uniform(-1, 1, size=(n_probe, 3))
    probe = probe[np.sum(probe**2, axis=1) <= 1] * a
    return float(np.mean(tess.find_simplex(probe) >= 0))


def pure_resource(p: float) -> np.ndarray:
    """``sqrt(p)|00> + sqrt(1-p)|11>``."""
    psi = np.array([np.sqrt(p), 0, 0, np.sqrt(1 - p)], dtype=complex)
    return qstate.ket_to_dm(psi)


BELL = pure_resource(0.5)


def distill_pure(p: float) -> tuple[np.ndarray, float]:
    """Procrustean filter turning ``sqrt(p)|00> + sqrt(1-p)|11>`` into a Bell state.

    Requires ``1/2 < p < 1``.  Returns the filter ``diag(sqrt((1-p)/p), 1)``
    and its success probability ``2(1-p)``.
    """
    if not 0.5 < p < 1:
        raise ValueError(f"p={p!r} must satisfy 1/2 < p < 1")
    m = procrustean(np.sqrt((1 - p) / p), 1.0)
    out = qstate.apply_alice(pure_resource(p), m)
    return m, float(np.trace(out).real)
