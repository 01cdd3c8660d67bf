"""Jones-calculus models of the trigger-arm optics and general local filters."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .qstate import I2, PureQubit, StateError, max_singular_value

SV_TOL = 1e-12


def _rot(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]], dtype=complex)


def retardance_at(design_retardance: float, design_wavelength: float, operating_wavelength: float) -> float:
    """Retardance of a zero-order plate away from its design wavelength.

    Dispersion of the birefringence is ignored, so the phase simply scales as
    ``design_wavelength / operating_wavelength``.
    """
    if design_wavelength <= 0 or operating_wavelength <= 0:
        raise ValueError("wavelengths must be positive")
    return design_retardance * design_wavelength / operating_wavelength


@dataclass(frozen=True)
class WavePlate:
    """A linear retarder; angles in radians, fast axis measured from horizontal."""

    fast_axis_angle: float
    retardance: float
    design_retardance: float | None = None
    design_wavelength: float | None = None
    operating_wavelength: float | None = None

    def __post_init__(self):
        if not 0 < self.retardance < 2 * np.pi:
            raise ValueError(f"retardance {self.retardance!r} outside (0, 2pi)")

    @classmethod
    def from_wavelengths(cls, fast_axis_angle, design_retardance, design_wavelength, operating_wavelength):
        delta = retardance_at(design_retardance, design_wavelength, operating_wavelength)
        return cls(fast_axis_angle, delta, design_retardance, design_wavelength, operating_wavelength)

    @classmethod
    def hwp(cls, fast_axis_angle: float, retardance: float = np.pi) -> "WavePlate":
        return cls(fast_axis_angle, retardance, design_retardance=np.pi)

    @classmethod
    def qwp(cls, fast_axis_angle: float, retardance: float = np.pi / 2) -> "WavePlate":
        return cls(fast_axis_angle, retardance, design_retardance=np.pi / 2)

    def jones(self) -> np.ndarray:
        return waveplate_jones(self)


def waveplate_jones(plate: WavePlate) -> np.ndarray:
    h, d = plate.fast_axis_angle, plate.retardance
    core = np.diag([np.exp(-0.5j * d), np.exp(0.5j * d)])
    return _rot(h) @ core @ _rot(-h)


@dataclass(frozen=True)
class PartialPolarizer:
    """Intensity transmissions along the polarizer axis (``t_d``) and orthogonal to it (``t_a``)."""

    t_d: float
    t_a: float

    def __post_init__(self):
        for name, t in (("t_d", self.t_d), ("t_a", self.t_a)):
            if not 0 <= t <= 1:
                raise ValueError(f"{name}={t!r} must lie in [0, 1]")
        if self.t_d + self.t_a == 0:
            raise ValueError("partial polarizer blocks everything (t_d = t_a = 0)")

    @property
    def norm(self) -> float:
        """N = 1 / (t_d + t_a)."""
        return 1.0 / (self.t_d + self.t_a)

    def kraus(self, axis: PureQubit | None = None) -> np.ndarray:
        return partial_polarizer_kraus(self, axis)


def partial_polarizer_kraus(pp: PartialPolarizer, axis_state: PureQubit | None = None) -> np.ndarray:
    """Amplitude filter ``sqrt(t_d)|z><z| + sqrt(t_a)|z_perp><z_perp|``.

    ``axis_state`` defaults to |D>, the orientation used on the trigger arm.
    """
    axis_state = PureQubit(0.0, 0.0) if axis_state is None else axis_state
    z, zp = axis_state.ket(), axis_state.orthogonal_ket()
    return np.sqrt(pp.t_d) * np.outer(z, z.conj()) + np.sqrt(pp.t_a) * np.outer(zp, zp.conj())


def check_filter(m) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.shape != (2, 2):
        raise ValueError(f"local filter must be 2x2, got shape {m.shape}")
    smax = max_singular_value(m)
    if smax > 1 + SV_TOL:
        raise StateError(f"unphysical filter: singular value {smax:.15g} exceeds 1")
    return m


def filter_svd(m) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split a filter as ``m = V^dagger @ D @ U``.

    ``D`` is real diagonal with entries sorted in descending order.  Only
    ``D @ U`` matters for the remote qubit; ``V`` acts after the filter on
    the trigger photon alone.
    """
    m = check_filter(m)
    w, s, xh = np.linalg.svd(m)
    return w.conj().T, np.diag(s).astype(complex), xh


def procrustean(a: float, b: float) -> np.ndarray:
    """Diagonal filter ``diag(a, b)`` in the H/V basis, ``0 <= a, b <= 1``."""
    if not (0 <= a <= 1 and 0 <= b <= 1):
        raise ValueError(f"Procrustean amplitudes must lie in [0, 1], got a={a!r}, b={b!r}")
    return np.diag([a, b]).astype(complex)


Element = Union[WavePlate, PartialPolarizer, np.ndarray]


def _as_matrix(el: Element) -> np.ndarray:
    if isinstance(el, WavePlate):
        return el.jones()
    if isinstance(el, PartialPolarizer):
        return el.kraus()
    return np.asarray(el, dtype=complex)


def compose(elements: Sequence[Element]) -> np.ndarray:
    """Jones matrix of elements listed in the order light passes through them."""
    if len(elements) == 0:
        raise ValueError("compose needs at least one element")
    out = I2.copy()
    for el in elements:
        out = _as_matrix(el) @ out
    return check_filter(out)


def trigger_filter(
    qwp_angle: float,
    hwp_angle: float,
    t_d: float,
    t_a: float,
    retardances: tuple[float, float] = (np.pi / 2, np.pi),
) -> np.ndarray:
    """QWP, then HWP, then the D-axis partial polarizer."""
    d_q, d_h = retardances
    return compose([WavePlate(qwp_angle, d_q), WavePlate(hwp_angle, d_h), PartialPolarizer(t_d, t_a)])


@dataclass(frozen=True)
class FilterMixture:
    """A probabilistic choice among at most four local filters."""

    terms: tuple[tuple[float, np.ndarray], ...] = field(default_factory=tuple)

    def __post_init__(self):
        terms = tuple((float(p), check_filter(m)) for p, m in self.terms)
        if not 1 <= len(terms) <= 4:
            raise ValueError(f"a filter mixture holds 1 to 4 terms, got {len(terms)}")
        if any(p < 0 for p, _ in terms):
            raise ValueError("mixture probabilities must be non-negative")
        total = sum(p * m.conj().T @ m for p, m in terms)
        top = np.linalg.eigvalsh(total).max()
        if top > 1 + SV_TOL:
            raise StateError(f"mixture is not a valid operation (sum p M^dag M has eigenvalue {top:.15g})")
        object.__setattr__(self, "terms", terms)
