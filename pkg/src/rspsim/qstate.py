"""Dense one- and two-qubit density-matrix algebra.

States are plain ``numpy`` complex arrays (2x2 for a single polarization
qubit, 4x4 for a pair).  The first tensor factor of a pair is always the
trigger photon (Alice), the second the remotely prepared photon (Bob).

Basis convention: the computational basis is {|H>, |V>};
``|D> = (|H>+|V>)/sqrt2``, ``|A> = (|H>-|V>)/sqrt2``,
``|R> = (|H>+i|V>)/sqrt2`` and ``|L> = (|H>-i|V>)/sqrt2``.  Poincare-sphere
coordinates are ``(s1, s2, s3) = (<sx>, <sy>, <sz>)`` so axis 1 runs D/A,
axis 2 runs R/L and axis 3 runs H/V.

Matrices that come out of a local filter are left unnormalized on purpose:
their trace is the probability that the filter fired.  Use :func:`normalize`
to condition on success.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StateError

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-12
TRACE_TOL = 1e-12
BLOCH_TOL = 1e-9

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SX, SY, SZ)

_S = 1 / np.sqrt(2)
KETS = {
    "H": np.array([1, 0], dtype=complex),
    "V": np.array([0, 1], dtype=complex),
    "D": np.array([_S, _S], dtype=complex),
    "A": np.array([_S, -_S], dtype=complex),
    "R": np.array([_S, 1j * _S], dtype=complex),
    "L": np.array([_S, -1j * _S], dtype=complex),
}


@dataclass(frozen=True)
class PureQubit:
    """The pure state ``cos(theta)|D> + exp(i phi) sin(theta)|A>``."""

    theta: float
    phi: float = 0.0

    def ket(self) -> np.ndarray:
        return np.cos(self.theta) * KETS["D"] + np.exp(1j * self.phi) * np.sin(self.theta) * KETS["A"]

    def orthogonal_ket(self) -> np.ndarray:
        return np.sin(self.theta) * KETS["D"] - np.exp(1j * self.phi) * np.cos(self.theta) * KETS["A"]

    def dm(self) -> np.ndarray:
        return ket_to_dm(self.ket())

    def orthogonal_dm(self) -> np.ndarray:
        return ket_to_dm(self.orthogonal_ket())


def ket(label: str) -> np.ndarray:
    """Ket for a polarization label such as ``"H"`` or a product label ``"HV"``."""
    out = np.ones(1, dtype=complex)
    for ch in label:
        try:
            out = np.kron(out, KETS[ch])
        except KeyError:
            raise ValueError(f"unknown polarization label {ch!r} in {label!r}") from None
    return out


def ket_to_dm(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def validate(rho: np.ndarray, *, normalized: bool = True, dim: int | None = None) -> np.ndarray:
    """Check that ``rho`` is Hermitian and PSD (and unit-trace when ``normalized``).

    Returns the matrix as a complex array so calls can be chained.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] not in (2, 4):
        raise StateError(f"expected a 2x2 or 4x4 matrix, got shape {rho.shape}")
    if dim is not None and rho.shape[0] != dim:
        raise StateError(f"expected a {dim}x{dim} matrix, got shape {rho.shape}")
    herm_err = np.max(np.abs(rho - rho.conj().T))
    if herm_err > HERMITIAN_TOL:
        raise StateError(f"matrix is not Hermitian (max deviation {herm_err:.3g})")
    min_eig = np.linalg.eigvalsh(rho).min()
    if min_eig < -PSD_TOL:
        raise StateError(f"matrix is not positive semidefinite (eigenvalue {min_eig:.3g})")
    if normalized:
        tr = np.trace(rho).real
        if abs(tr - 1) > TRACE_TOL:
            raise StateError(f"state is not normalized (trace {tr:.15g})")
    return rho


def normalize(rho: np.ndarray) -> np.ndarray:
    """Condition an unnormalized state on success: ``rho / Tr(rho)``."""
    rho = np.asarray(rho, dtype=complex)
    tr = np.trace(rho).real
    if tr <= 0:
        raise StateError(f"cannot normalize a state with trace {tr:.3g}")
    return rho / tr


def clamp_psd(rho: np.ndarray, floor: float = 1e-9) -> np.ndarray:
    """Zero negative eigenvalues no larger than ``floor`` in magnitude and renormalize.

    Only the tomography code calls this; larger negative eigenvalues are an
    error rather than something to paper over.
    """
    rho = 0.5 * (rho + rho.conj().T)
    w, v = np.linalg.eigh(rho)
    if w.min() < -floor:
        raise StateError(f"eigenvalue {w.min():.3g} is too negative to clamp")
    w = np.clip(w, 0, None)
    out = (v * w) @ v.conj().T
    return out / np.trace(out).real


def bloch_from_state(rho: np.ndarray) -> np.ndarray:
    """Poincare-sphere vector ``(s1, s2, s3)`` of a normalized qubit state."""
    rho = validate(rho, dim=2)
    return np.array([np.trace(rho @ p).real for p in PAULIS])


def state_from_bloch(s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if s.shape != (3,):
        raise ValueError(f"Bloch vector must have three components, got shape {s.shape}")
    norm = np.linalg.norm(s)
    if norm > 1 + BLOCH_TOL:
        raise StateError(f"Bloch vector length {norm:.12g} exceeds 1")
    return 0.5 * (I2 + s[0] * SX + s[1] * SY + s[2] * SZ)


def sqrtm_psd(rho: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def fidelity(rho_e: np.ndarray, rho_p: np.ndarray) -> float:
    """Uhlmann fidelity ``|Tr sqrt(sqrt(rho_e) rho_p sqrt(rho_e))|^2``.

    Works for either dimension; both arguments must be normalized states.
    """
    rho_e = validate(rho_e)
    rho_p = validate(rho_p, dim=rho_e.shape[0])
    r = sqrtm_psd(rho_e)
    w = np.linalg.eigvalsh(r @ rho_p @ r)
    f = float(np.sum(np.sqrt(np.clip(w, 0, None))) ** 2)
    return min(max(f, 0.0), 1.0)


def purity(rho: np.ndarray) -> float:
    rho = validate(rho)
    return float(np.real(np.trace(rho @ rho)))


def partial_trace_A(rho_ab: np.ndarray) -> np.ndarray:
    """Trace out the trigger (first) qubit; the trace is preserved."""
    rho_ab = validate(rho_ab, normalized=False, dim=4)
    return np.einsum("abad->bd", rho_ab.reshape(2, 2, 2, 2))


def partial_trace_B(rho_ab: np.ndarray) -> np.ndarray:
    rho_ab = validate(rho_ab, normalized=False, dim=4)
    return np.einsum("abcb->ac", rho_ab.reshape(2, 2, 2, 2))


def max_singular_value(m: np.ndarray) -> float:
    return float(np.linalg.svd(np.asarray(m, dtype=complex), compute_uv=False)[0])


def apply_alice(rho_ab: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Apply a local filter ``m`` to the trigger qubit: ``(m x 1) rho (m x 1)^dagger``.

    The result is not renormalized; its trace is the filter's success
    probability.
    """
    rho_ab = validate(rho_ab, normalized=False, dim=4)
    m = np.asarray(m, dtype=complex)
    if m.shape != (2, 2):
        raise ValueError(f"local filter must be 2x2, got shape {m.shape}")
    smax = max_singular_value(m)
    if smax > 1 + 1e-12:
        raise StateError(f"filter amplifies (largest singular value {smax:.15g} > 1)")
    k = np.kron(m, I2)
    return k @ rho_ab @ k.conj().T


def concurrence(rho_ab: np.ndarray) -> float:
    """Wootters concurrence of a normalized two-qubit state."""
    rho_ab = validate(rho_ab, dim=4)
    yy = np.kron(SY, SY)
    r = rho_ab @ yy @ rho_ab.conj() @ yy
    lam = np.sqrt(np.clip(np.sort(np.linalg.eigvals(r).real)[::-1], 0, None))
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def tangle(rho_ab: np.ndarray) -> float:
    return concurrence(rho_ab) ** 2


def matrix_to_json(m: np.ndarray) -> list[list[dict[str, float]]]:
    """Row-major list of ``{"re": .., "im": ..}`` entries."""
    return [[{"re": float(z.real), "im": float(z.imag)} for z in row] for row in np.asarray(m, dtype=complex)]


def matrix_from_json(rows) -> np.ndarray:
    try:
        return np.array([[complex(e["re"], e["im"]) for e in row] for row in rows], dtype=complex)
    except (TypeError, KeyError) as exc:
        raise ValueError(f"malformed complex matrix: {exc}") from None


def bloch_to_json(s) -> dict[str, float]:
    s1, s2, s3 = (float(x) for x in s)
    return {"s1": s1, "s2": s2, "s3": s3}
