"""Remote state preparation on a polarization-entangled pair.

Alice's trigger photon passes a QWP, a HWP and a D-axis partial polarizer
before a bucket detector.  Conditioning on that detection leaves Bob's
photon in a state fixed by the plate angles and the polarizer strength.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize

from . import qstate
from .errors import ConvergenceError
from .optics import FilterMixture, PartialPolarizer, WavePlate, compose
from .qstate import I2, PAULIS, PureQubit, StateError

IDEAL_RETARDANCES = (np.pi / 2, np.pi)
MIN_SUCCESS = 1e-15


@dataclass(frozen=True)
class TargetState:
    """``(1 - lam)|psi(theta, phi)><psi(theta, phi)| + lam I/2``."""

    theta: float
    phi: float = 0.0
    lam: float = 0.0

    def __post_init__(self):
        if not 0 <= self.lam <= 1:
            raise ValueError(f"mixedness lam={self.lam!r} must lie in [0, 1]")

    @property
    def pure(self) -> PureQubit:
        return PureQubit(self.theta, self.phi)

    def dm(self) -> np.ndarray:
        return (1 - self.lam) * self.pure.dm() + 0.5 * self.lam * I2

    def bloch(self) -> np.ndarray:
        return qstate.bloch_from_state(self.dm())

    @classmethod
    def from_bloch(cls, s) -> "TargetState":
        s = np.asarray(s, dtype=float)
        r = float(np.linalg.norm(s))
        if r > 1 + qstate.BLOCH_TOL:
            raise StateError(f"Bloch vector length {r:.12g} exceeds 1")
        r = min(r, 1.0)
        if r == 0:
            return cls(0.0, 0.0, 1.0)
        n = s / r
        theta = 0.5 * np.arccos(np.clip(n[0], -1, 1))
        phi = float(np.arctan2(-n[1], n[2]))
        return cls(float(theta), phi, 1 - r)


def axis_targets(fractions=(-1.0, -0.6, -0.2, 0.2, 0.6, 1.0)) -> list[TargetState]:
    """Six targets along each of the three Poincare axes (18 in total)."""
    out = []
    for axis in np.eye(3):
        for f in fractions:
            out.append(TargetState.from_bloch(f * axis))
    return out


@dataclass(frozen=True)
class PrepSettings:
    qwp_angle: float
    hwp_angle: float
    t_d: float = 1.0
    t_a: float = 0.0
    predicted_fidelity: float = float("nan")
    success_probability: float = float("nan")


@dataclass(frozen=True)
class ResourceSpec:
    """``(1-w)|chi><chi| + w I/4`` with ``|chi> = cos(eps)|HH> + e^{i phase} sin(eps)|VV>``."""

    epsilon: float = np.pi / 4
    rel_phase: float = 0.0
    white_noise: float = 0.0

    def __post_init__(self):
        if not 0 <= self.white_noise <= 1:
            raise ValueError(f"white_noise={self.white_noise!r} must lie in [0, 1]")


def make_resource(spec: ResourceSpec = ResourceSpec()) -> np.ndarray:
    chi = np.zeros(4, dtype=complex)
    chi[0] = np.cos(spec.epsilon)
    chi[3] = np.exp(1j * spec.rel_phase) * np.sin(spec.epsilon)
    w = spec.white_noise
    return (1 - w) * np.outer(chi, chi.conj()) + w * np.eye(4) / 4


PHI_PLUS = make_resource()


def transmissions_for(lam: float) -> tuple[float, float]:
    """Partial-polarizer pair giving mixedness ``lam`` with t_d pinned to 1."""
    return 1.0, lam / (2 - lam)


def _plate_angles_for(chi: np.ndarray) -> tuple[float, float]:
    # QWP along the ellipse's major axis linearizes chi; the HWP then turns it onto D.
    s = qstate.bloch_from_state(qstate.ket_to_dm(chi))
    q = 0.5 * np.arctan2(s[0], s[2])
    lin = WavePlate.qwp(q).jones() @ chi
    s_lin = qstate.bloch_from_state(qstate.ket_to_dm(lin))
    a = 0.5 * np.arctan2(s_lin[0], s_lin[2])
    h = 0.5 * (np.pi / 4 + a)
    return float(q % np.pi), float(h % np.pi)


def ideal_settings(target: TargetState) -> PrepSettings:
    """Closed-form plate angles and transmissions for a perfect source and plates.

    Bob's photon ends up in the complex conjugate of whatever state Alice's
    detection projects onto, so the plates must take ``conj(psi)`` to |D>.
    """
    if target.lam >= 1:
        q = h = 0.0
    else:
        q, h = _plate_angles_for(target.pure.ket().conj())
    t_d, t_a = transmissions_for(target.lam)
    settings = PrepSettings(q, h, t_d, t_a)
    bob, p = predict_rpq(PHI_PLUS, settings)
    return replace(settings, predicted_fidelity=qstate.fidelity(target.dm(), bob), success_probability=p)


def _bob_block(resource: np.ndarray, povm: np.ndarray) -> np.ndarray:
    # Tr_A[(E x 1) rho] with E = M^dag M
    return np.einsum("ji,ibjc->bc", povm, resource.reshape(2, 2, 2, 2))


def predict_rpq(
    resource: np.ndarray,
    settings: PrepSettings,
    plate_retardances: tuple[float, float] = IDEAL_RETARDANCES,
    outcome: str = "D",
) -> tuple[np.ndarray, float]:
    """Bob's normalized conditional state and the probability of the trigger click.

    ``outcome="A"`` conditions on the orthogonal output port of the partial
    polarizer instead (transmissions ``1 - t_d`` and ``1 - t_a``).
    """
    resource = qstate.validate(resource, dim=4)
    if outcome == "D":
        t_d, t_a = settings.t_d, settings.t_a
    elif outcome == "A":
        t_d, t_a = 1 - settings.t_d, 1 - settings.t_a
    else:
        raise ValueError(f"outcome must be 'D' or 'A', got {outcome!r}")
    m = compose(
        [
            WavePlate(settings.qwp_angle, plate_retardances[0]),
            WavePlate(settings.hwp_angle, plate_retardances[1]),
            np.sqrt(t_d) * PureQubit(0, 0).dm() + np.sqrt(t_a) * PureQubit(0, 0).orthogonal_dm(),
        ]
    )
    unnorm = qstate.partial_trace_A(qstate.apply_alice(resource, m))
    p = float(np.trace(unnorm).real)
    if p < MIN_SUCCESS:
        raise StateError(f"trigger success probability {p:.3g} is zero; nothing to condition on")
    return unnorm / p, p


def _qubit_fidelity(a: np.ndarray, b: np.ndarray) -> float:
    det = max(np.linalg.det(a).real, 0.0) * max(np.linalg.det(b).real, 0.0)
    return float(np.trace(a @ b).real + 2 * np.sqrt(det))


def _retarder_entries(h: float, c: float, s: float) -> tuple[complex, complex, complex]:
    # symmetric Jones matrix [[a, b], [b, d]] of a retarder; c, s = cos, sin of half the retardance
    c2, s2 = math.cos(2 * h), math.sin(2 * h)
    return complex(c, -s * c2), complex(0, -s * s2), complex(c, s * c2)


def _settings_from_x(x) -> tuple[float, float, float, float]:
    return float(x[0] % np.pi), float(x[1] % np.pi), 1.0, float(np.sin(x[2]) ** 2)


QWP_STARTS = np.linspace(0, np.pi, 5, endpoint=False)
HWP_STARTS = np.linspace(0, np.pi, 5, endpoint=False)
RATIO_STARTS = np.arcsin(np.sqrt([0.05, 0.35, 0.75]))


def optimize_settings(
    resource: np.ndarray,
    plate_retardances: tuple[float, float],
    target: TargetState,
    *,
    fatol: float = 1e-10,
    maxfev: int = 4000,
) -> PrepSettings:
    """Maximize the predicted fidelity to ``target`` over plate angles and polarizer strength.

    Multi-start Nelder-Mead from a fixed 5x5x3 grid over (QWP angle, HWP
    angle, t_a/t_d); t_d stays at 1.  Ties are broken by start index so the
    result does not depend on evaluation order.
    """
    resource = qstate.validate(resource, dim=4)
    rho_t = qstate.validate(target.dm())
    d_q, d_h = plate_retardances

    # Bob's unnormalized state is linear in Alice's POVM element E = e0 I + e.sigma,
    # so precompute the four partial traces once; the loop below is scalar
    # arithmetic because it runs ~10^4 times per target.
    basis = [_bob_block(resource, p) for p in (I2, *PAULIS)]
    (b00, b01, b10, b11) = ([complex(m[i, j]) for m in basis] for i, j in ((0, 0), (0, 1), (1, 0), (1, 1)))
    t00, t01, t10, t11 = (complex(z) for z in rho_t.ravel())
    det_t = max(np.linalg.det(rho_t).real, 0.0)
    cq, sq = np.cos(0.5 * d_q), np.sin(0.5 * d_q)
    ch, sh = np.cos(0.5 * d_h), np.sin(0.5 * d_h)

    def objective(x):
        t_a = math.sin(x[2]) ** 2
        qa, qb, qd = _retarder_entries(x[0], cq, sq)
        ha, hb, hd = _retarder_entries(x[1], ch, sh)
        w00, w01 = ha * qa + hb * qb, ha * qb + hb * qd
        w10, w11 = hb * qa + hd * qb, hb * qb + hd * qd
        # W^dag sigma_x W = n.sigma
        g00 = (w00.conjugate() * w10 + w10.conjugate() * w00).real
        g11 = (w01.conjugate() * w11 + w11.conjugate() * w01).real
        g10 = w01.conjugate() * w10 + w11.conjugate() * w00
        e0, k = 0.5 * (1 + t_a), 0.25 * (1 - t_a)
        e = (2 * k * g10.real, 2 * k * g10.imag, k * (g00 - g11))
        coef = (e0, *e)
        r00 = sum(c * v for c, v in zip(coef, b00))
        r01 = sum(c * v for c, v in zip(coef, b01))
        r10 = sum(c * v for c, v in zip(coef, b10))
        r11 = sum(c * v for c, v in zip(coef, b11))
        p = (r00 + r11).real
        if p < MIN_SUCCESS:
            return 1.0
        det_b = (r00 * r11 - r01 * r10).real / p**2
        overlap = (t00 * r00 + t01 * r10 + t10 * r01 + t11 * r11).real / p
        return 1.0 - overlap - 2 * math.sqrt(max(det_b, 0.0) * det_t)

    best = None
    for idx, x0 in enumerate(itertools.product(QWP_STARTS, HWP_STARTS, RATIO_STARTS)):
        res = minimize(
            objective,
            np.array(x0),
            method="Nelder-Mead",
            options={"xatol": 1e-8, "fatol": fatol, "maxfev": maxfev},
        )
        if best is None or res.fun < best[1].fun:
            best = (idx, res)
    _, res = best
    q, h, t_d, t_a = _settings_from_x(res.x)
    bob, p = predict_rpq(resource, PrepSettings(q, h, t_d, t_a), plate_retardances)
    settings = PrepSettings(q, h, t_d, t_a, qstate.fidelity(rho_t, bob), p)
    if not res.success:
        raise ConvergenceError(f"settings search did not converge: {res.message}", best=settings)
    return settings


GREAT_CIRCLES = {
    "DA-RL": np.array([0.0, 0.0, 1.0]),
    "DA-HV": np.array([0.0, 1.0, 0.0]),
    "HV-RL": np.array([1.0, 0.0, 0.0]),
}


def feedforward_unitary(circle) -> np.ndarray:
    """pi rotation about the circle's normal; sends every state on the circle to its antipode."""
    n = GREAT_CIRCLES[circle] if isinstance(circle, str) else np.asarray(circle, dtype=float)
    n = n / np.linalg.norm(n)
    return sum(c * p for c, p in zip(n, PAULIS))


def feedforward_correct(state: np.ndarray, outcome: str, circle="DA-RL") -> np.ndarray:
    """Bob's correction after Alice announces which trigger port fired.

    Works only for states on the chosen great circle (named in
    ``GREAT_CIRCLES`` or given by its unit normal); no single unitary flips
    arbitrary qubit states.
    """
    state = qstate.validate(state, dim=2)
    n = GREAT_CIRCLES[circle] if isinstance(circle, str) else np.asarray(circle, dtype=float)
    n = n / np.linalg.norm(n)
    off = abs(float(qstate.bloch_from_state(state) @ n))
    if off > 1e-9:
        raise StateError(f"state lies {off:.3g} off the great circle; no fixed correction exists")
    if outcome == "D":
        return state
    if outcome != "A":
        raise ValueError(f"outcome must be 'D' or 'A', got {outcome!r}")
    u = feedforward_unitary(n)
    return u @ state @ u.conj().T


def mixture_rsp(resource: np.ndarray, mix: FilterMixture) -> np.ndarray:
    resource = qstate.validate(resource, dim=4)
    total = sum(p * qstate.apply_alice(resource, m) for p, m in mix.terms)
    bob = qstate.partial_trace_A(total)
    if np.trace(bob).real < MIN_SUCCESS:
        raise StateError("filter mixture never succeeds on this resource")
    return qstate.normalize(bob)


def partial_polarizer_only(t_d: float, t_a: float) -> PrepSettings:
    """Settings with the plates parked so that only the polarizer acts (the D-axis case)."""
    PartialPolarizer(t_d, t_a)
    return PrepSettings(np.pi / 4, np.pi / 4, t_d, t_a)
