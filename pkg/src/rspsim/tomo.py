"""Simulated polarization tomography and maximum-likelihood reconstruction.

One qubit is measured in the six projections H, V, D, A, L, R; a pair in the
36 products of those.  Counts are Poisson with mean ``n0 * Tr(rho P)``.
Reconstruction follows the usual photonic recipe: a Cholesky-style
parameterization ``rho = T^dag T / Tr(T^dag T)`` with ``T`` lower triangular
and a Gaussian approximation to the Poisson likelihood.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import qstate
from .errors import ConvergenceError
from .qstate import I2, PAULIS
from .rsp import (
    IDEAL_RETARDANCES,
    PrepSettings,
    ResourceSpec,
    TargetState,
    make_resource,
    optimize_settings,
    predict_rpq,
)

LABELS_1Q = ("H", "V", "D", "A", "L", "R")
BASES_1Q = (("H", "V"), ("D", "A"), ("L", "R"))
P_FLOOR = 1e-10
MAX_EVALS = 100_000


@dataclass(frozen=True)
class ProjectorSet:
    labels: tuple[str, ...]
    ops: np.ndarray
    groups: tuple[tuple[int, ...], ...]

    @property
    def n_qubits(self) -> int:
        return len(self.labels[0])

    @property
    def dim(self) -> int:
        return 2**self.n_qubits


def projector_set(n_qubits: int) -> ProjectorSet:
    """The 6 (one qubit) or 36 (two qubits) polarization projectors.

    ``groups`` lists the indices that together form one complete measurement
    basis, i.e. whose projectors sum to the identity.
    """
    if n_qubits not in (1, 2):
        raise ValueError("only one- and two-qubit tomography is supported")
    labels = tuple("".join(p) for p in itertools.product(LABELS_1Q, repeat=n_qubits))
    ops = np.array([qstate.ket_to_dm(qstate.ket(lab)) for lab in labels])
    index = {lab: i for i, lab in enumerate(labels)}
    groups = tuple(
        tuple(index["".join(outcome)] for outcome in itertools.product(*bases))
        for bases in itertools.product(BASES_1Q, repeat=n_qubits)
    )
    return ProjectorSet(labels, ops, groups)


PROJECTORS_1Q = projector_set(1)
PROJECTORS_2Q = projector_set(2)


def projectors_for(labels) -> ProjectorSet:
    labels = tuple(labels)
    for ps in (PROJECTORS_1Q, PROJECTORS_2Q):
        if labels == ps.labels:
            return ps
    raise ValueError(f"labels do not match the 6- or 36-setting tomography sets: {labels}")


@dataclass(frozen=True)
class CountRecord:
    labels: tuple[str, ...]
    counts: np.ndarray
    n0: float
    seed: int | None = None

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=float)
        if counts.shape != (len(self.labels),):
            raise ValueError(f"{len(self.labels)} labels but {counts.size} counts")
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        if not self.n0 > 0:
            raise ValueError(f"n0 must be positive, got {self.n0!r}")
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "counts", counts)

    def to_json(self) -> dict:
        counts = [int(c) if float(c).is_integer() else float(c) for c in self.counts]
        return {"labels": list(self.labels), "counts": counts, "n0": self.n0, "seed": self.seed}

    @classmethod
    def from_json(cls, data) -> "CountRecord":
        if not isinstance(data, dict):
            raise ValueError("count record must be a JSON object")
        missing = {"labels", "counts", "n0"} - data.keys()
        if missing:
            raise ValueError(f"count record is missing fields: {sorted(missing)}")
        extra = data.keys() - {"labels", "counts", "n0", "seed"}
        if extra:
            raise ValueError(f"unknown count record fields: {sorted(extra)}")
        labels = data["labels"]
        if not isinstance(labels, list) or not all(isinstance(s, str) for s in labels):
            raise ValueError("labels must be a list of strings")
        counts = data["counts"]
        if not isinstance(counts, list) or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in counts):
            raise ValueError("counts must be a list of numbers")
        rec = cls(tuple(labels), np.array(counts, dtype=float), float(data["n0"]), data.get("seed"))
        projectors_for(rec.labels)
        return rec


@dataclass(frozen=True)
class TomographyResult:
    rho_hat: np.ndarray
    log_likelihood: float
    iterations: int
    evaluations: int = 0
    metrics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {
            "matrix": qstate.matrix_to_json(self.rho_hat),
            "log_likelihood": self.log_likelihood,
            "iterations": self.iterations,
            "evaluations": self.evaluations,
            "purity": qstate.purity(self.rho_hat),
        }
        if self.rho_hat.shape == (2, 2):
            out["bloch"] = qstate.bloch_to_json(qstate.bloch_from_state(self.rho_hat))
        else:
            out["concurrence"] = qstate.concurrence(self.rho_hat)
            out["tangle"] = qstate.tangle(self.rho_hat)
        return out


def probabilities(rho: np.ndarray, projectors: ProjectorSet) -> np.ndarray:
    return np.einsum("nij,ji->n", projectors.ops, rho).real


def expected_counts(rho, projectors: ProjectorSet, n0: float, efficiency: float = 1.0, background: float = 0.0):
    rho = qstate.validate(rho, dim=projectors.dim)
    return n0 * (efficiency * probabilities(rho, projectors) + background)


def simulate_counts(
    rho,
    projectors: ProjectorSet,
    n0: float,
    seed: int,
    efficiency: float = 1.0,
    background: float = 0.0,
) -> CountRecord:
    """Poisson counts for every projector.

    ``efficiency`` scales all detection probabilities; ``background`` adds a
    constant accidental rate (as a fraction of ``n0``) to every setting.  Both
    are off by default.
    """
    if n0 <= 0:
        raise ValueError(f"n0 must be positive, got {n0!r}")
    mean = expected_counts(rho, projectors, n0, efficiency, background)
    rng = np.random.default_rng(seed)
    return CountRecord(projectors.labels, rng.poisson(np.clip(mean, 0, None)), n0, seed)


def noiseless_counts(rho, projectors: ProjectorSet, n0: float = 1.0) -> CountRecord:
    """Expected counts, not rounded; the large-``n0`` limit of :func:`simulate_counts`."""
    return CountRecord(projectors.labels, expected_counts(rho, projectors, n0), n0)


def _hermitian_basis(dim: int) -> list[np.ndarray]:
    singles = (I2, *PAULIS)
    if dim == 2:
        return list(singles)
    return [np.kron(a, b) for a in singles for b in singles]


def linear_inversion(counts: CountRecord, projectors: ProjectorSet | None = None) -> np.ndarray:
    """Unit-trace Hermitian matrix reproducing the per-basis relative frequencies.

    Frequencies are normalized within each complete basis and matched in the
    least-squares sense; with one qubit this is the textbook Stokes estimate
    ``s3 = (n_H - n_V)/(n_H + n_V)`` and so on.  The result may have negative
    eigenvalues.
    """
    projectors = projectors or projectors_for(counts.labels)
    freq = np.empty(len(projectors.labels))
    for group in projectors.groups:
        total = counts.counts[list(group)].sum()
        if total <= 0:
            labels = [projectors.labels[i] for i in group]
            raise ValueError(f"no counts recorded in basis {labels}")
        freq[list(group)] = counts.counts[list(group)] / total
    d = projectors.dim
    basis = _hermitian_basis(d)[1:]
    design = np.array([[np.trace(p @ b).real for b in basis] for p in projectors.ops])
    rhs = freq - np.trace(projectors.ops, axis1=1, axis2=2).real / d
    coef, *_ = np.linalg.lstsq(design, rhs, rcond=None)
    return np.eye(d, dtype=complex) / d + sum(c * b for c, b in zip(coef, basis))


def _t_from_params(t: np.ndarray, d: int) -> np.ndarray:
    out = np.zeros((d, d), dtype=complex)
    out[np.diag_indices(d)] = t[:d]
    rows, cols = np.tril_indices(d, -1)
    k = len(rows)
    out[rows, cols] = t[d : d + k] + 1j * t[d + k : d + 2 * k]
    return out


def _params_from_rho(rho: np.ndarray) -> np.ndarray:
    # rho = T^dag T with T lower triangular: Cholesky of the index-reversed matrix
    d = rho.shape[0]
    w, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    w = np.clip(w, 0, None)
    rho = (v * w) @ v.conj().T
    rho = 0.99 * rho / np.trace(rho).real + 0.01 * np.eye(d) / d
    rev = rho[::-1, ::-1]
    chol = np.linalg.cholesky(rev)
    t = chol[::-1, ::-1].conj().T
    rows, cols = np.tril_indices(d, -1)
    return np.concatenate([t.diagonal().real, t[rows, cols].real, t[rows, cols].imag])


def _rho_from_params(t: np.ndarray, d: int) -> np.ndarray:
    tm = _t_from_params(t, d)
    rho = tm.conj().T @ tm
    return rho / np.trace(rho).real


def mle_reconstruct(
    counts: CountRecord,
    projectors: ProjectorSet | None = None,
    *,
    fatol: float = 1e-10,
    max_evals: int = MAX_EVALS,
) -> TomographyResult:
    """Maximum-likelihood physical state for the recorded counts.

    Minimizes ``sum (n0 p - n)^2 / (2 n0 p)`` with Nelder-Mead, restarting the
    simplex from its own optimum until a restart no longer improves the
    objective (single simplex runs stall in 16 dimensions).
    """
    projectors = projectors or projectors_for(counts.labels)
    if counts.counts.sum() <= 0:
        raise ValueError("no counts recorded")
    d = projectors.dim
    ops = projectors.ops.transpose(0, 2, 1).reshape(len(projectors.labels), -1)
    n = counts.counts
    n0 = counts.n0

    def objective(t):
        rho = _rho_from_params(t, d)
        p = np.maximum((ops @ rho.ravel()).real, P_FLOOR)
        return float(np.sum((n0 * p - n) ** 2 / (2 * n0 * p)))

    x = _params_from_rho(linear_inversion(counts, projectors))
    f = objective(x)
    evals = 0
    iterations = 0
    scale = 0.1
    while True:
        simplex = _initial_simplex(x, scale)
        res = minimize(
            objective,
            x,
            method="Nelder-Mead",
            options={
                "initial_simplex": simplex,
                "xatol": 1e-9,
                "fatol": fatol,
                "maxfev": max_evals - evals,
                "adaptive": True,
            },
        )
        evals += res.nfev
        iterations += res.nit
        improved = f - res.fun
        if res.fun <= f:
            x, f = res.x, res.fun
        if improved <= fatol * max(1.0, abs(f)) and res.success:
            break
        if evals >= max_evals:
            rho = _rho_from_params(x, d)
            raise ConvergenceError(
                f"likelihood search did not converge in {evals} evaluations (objective {f:.6g})",
                best=TomographyResult(rho, -f, iterations, evals),
            )
        scale = max(scale * 0.5, 1e-4)
    rho = _rho_from_params(x, d)
    qstate.validate(rho)
    return TomographyResult(rho, -f, iterations, evals)


def _initial_simplex(x: np.ndarray, scale: float) -> np.ndarray:
    step = scale * max(1.0, float(np.max(np.abs(x))))
    return np.vstack([x, x + step * np.eye(len(x))])


@dataclass(frozen=True)
class RspRun:
    """One target through the full preparation-and-verification loop."""

    target: TargetState
    settings: PrepSettings
    expected: np.ndarray
    tomography: TomographyResult
    fidelity: float
    counts: CountRecord


@dataclass(frozen=True)
class ResourceCharacterization:
    truth: np.ndarray
    counts: CountRecord
    tomography: TomographyResult


def child_seeds(seed: int, n: int) -> list[int]:
    """Independent integer seeds derived from one master seed."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def characterize_resource(resource_spec: ResourceSpec, n0: float, seed: int) -> ResourceCharacterization:
    truth = make_resource(resource_spec)
    counts = simulate_counts(truth, PROJECTORS_2Q, n0, seed)
    return ResourceCharacterization(truth, counts, mle_reconstruct(counts, PROJECTORS_2Q))


def run_target(
    resource: ResourceCharacterization,
    target: TargetState,
    n0: float,
    seed: int,
    plate_retardances: tuple[float, float] = IDEAL_RETARDANCES,
) -> RspRun:
    """Plan settings on the reconstructed resource, prepare on the true one, tomograph Bob."""
    settings = optimize_settings(resource.tomography.rho_hat, plate_retardances, target)
    expected, _ = predict_rpq(resource.tomography.rho_hat, settings, plate_retardances)
    actual, _ = predict_rpq(resource.truth, settings, plate_retardances)
    counts = simulate_counts(actual, PROJECTORS_1Q, n0, seed)
    result = mle_reconstruct(counts, PROJECTORS_1Q)
    return RspRun(target, settings, expected, result, qstate.fidelity(expected, result.rho_hat), counts)


def run_experiment(
    resource_spec: ResourceSpec,
    targets,
    n0: float,
    seed: int,
    plate_retardances: tuple[float, float] = IDEAL_RETARDANCES,
) -> tuple[ResourceCharacterization, list[RspRun]]:
    """Characterize the source once, then run every target with its own seed stream."""
    targets = list(targets)
    seeds = child_seeds(seed, len(targets) + 1)
    resource = characterize_resource(resource_spec, n0, seeds[0])
    runs = [run_target(resource, t, n0, s, plate_retardances) for t, s in zip(targets, seeds[1:])]
    return resource, runs


def rsp_experiment(
    resource_spec: ResourceSpec,
    target: TargetState,
    n0: float,
    seed: int,
    plate_retardances: tuple[float, float] = IDEAL_RETARDANCES,
) -> RspRun:
    return run_experiment(resource_spec, [target], n0, seed, plate_retardances)[1][0]
