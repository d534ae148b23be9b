"""
link.py: long-term beamforming and uplink SNR for one gNB-sector<->UAV link.

Paths are "dressed" with element gains and steering vectors, the per-side
channel covariances are formed as weighted sums of steering outer products
(the uniform-random-phase expectation of the channel Grammian), and
transmit/receive weights are the dominant eigenvectors of those
covariances.  Received power sums non-coherently across paths: at 400 MHz
the paths are delay-resolvable, so their powers add.

Normalization is pinned so that a single path at both boresights
reproduces the scalar link budget exactly: steering vectors carry
unit-modulus entries (norm sqrt(N)), beamforming vectors are unit norm,
and the received power is tx_power + 10 log10(sum_l w_l |w_rx^H a_rx,l|^2
|w_tx^H a_tx,l|^2) with w_l the linear per-path gain including both
element gains.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .antenna import MountedArray, direction_cosines, global_to_local, steering_vector
from .channel import ChannelSample, LinkState
from .geometry import GnbKind

__all__ = [
    "EIGEN_RESIDUAL_RTOL",
    "NEGATIVE_INFINITY_SNR",
    "LinkBudget",
    "DressedPath",
    "LinkResult",
    "ConvergenceError",
    "noise_power_dbm",
    "dress_paths",
    "long_term_covariance",
    "dominant_eigenvector",
    "beamformed_snr",
    "evaluate_link",
]

# contract on every returned eigenpair: ||Qv - lam v|| <= rtol * lam
EIGEN_RESIDUAL_RTOL = 1e-6

NEGATIVE_INFINITY_SNR = float("-inf")


class ConvergenceError(RuntimeError):
    """Power iteration hit max_iter before meeting the residual bound."""

    def __init__(self, residual_rel: float, eigenvalue: float, iterations: int):
        super().__init__(
            f"power iteration: relative residual {residual_rel:.3e} after "
            f"{iterations} iterations (eigenvalue {eigenvalue:.6e})"
        )
        self.residual_rel = residual_rel
        self.eigenvalue = eigenvalue
        self.iterations = iterations


@dataclass(frozen=True)
class LinkBudget:
    tx_power_dbm: float = 23.0
    bandwidth_hz: float = 4e8
    noise_figure_db: float = 6.0
    thermal_noise_density_dbm_hz: float = -174.0

    @property
    def noise_power_dbm(self) -> float:
        return (
            self.thermal_noise_density_dbm_hz
            + 10.0 * np.log10(self.bandwidth_hz)
            + self.noise_figure_db
        )


def noise_power_dbm(budget: LinkBudget) -> float:
    return budget.noise_power_dbm


@dataclass(frozen=True)
class DressedPath:
    """A path with both element gains and steering vectors attached."""

    path: object  # PathComponent
    tx_element_gain_db: float
    rx_element_gain_db: float
    tx_steering: np.ndarray
    rx_steering: np.ndarray

    @property
    def weight_linear(self) -> float:
        """Linear per-path power weight: channel gain times both element gains."""
        return 10.0 ** (
            (self.path.gain_db + self.tx_element_gain_db + self.rx_element_gain_db)
            / 10.0
        )


@dataclass(frozen=True)
class LinkResult:
    snr_db: float
    state: LinkState
    strongest_path_is_los: bool
    strongest_path_aoa_elevation_deg: float
    gnb_id: str = ""
    sector_idx: int = -1
    kind: GnbKind | None = None


def dress_paths(sample: ChannelSample, tx: MountedArray, rx: MountedArray) -> list[DressedPath]:
    """Rotate each path's global AOD/AOA into the local frames, evaluate
    element gains there, and attach steering vectors."""
    if sample.state is LinkState.OUTAGE:
        raise ValueError("cannot dress an outage sample")
    dressed = []
    for path in sample.paths:
        th_tx, ph_tx = global_to_local(
            tx.orientation, path.aod_azimuth_deg, path.aod_elevation_deg
        )
        th_rx, ph_rx = global_to_local(
            rx.orientation, path.aoa_azimuth_deg, path.aoa_elevation_deg
        )
        dressed.append(
            DressedPath(
                path=path,
                tx_element_gain_db=float(tx.array.element.gain_db(th_tx, ph_tx)),
                rx_element_gain_db=float(rx.array.element.gain_db(th_rx, ph_rx)),
                tx_steering=steering_vector(tx.array, th_tx, ph_tx),
                rx_steering=steering_vector(rx.array, th_rx, ph_rx),
            )
        )
    return dressed


def long_term_covariance(dressed: list[DressedPath], side: str) -> np.ndarray:
    """Hermitian PSD covariance Q = sum_l w_l a_l a_l^H on one side.

    `side` is "tx" or "rx" and selects which steering vectors to use; the
    weight w_l includes the path gain and both element gains.
    """
    if not dressed:
        raise ValueError("long_term_covariance requires at least one path")
    if side not in ("tx", "rx"):
        raise ValueError("side must be 'tx' or 'rx'")
    vecs = np.stack(
        [d.tx_steering if side == "tx" else d.rx_steering for d in dressed]
    )
    w = np.array([d.weight_linear for d in dressed])
    return np.einsum("l,li,lj->ij", w, vecs, vecs.conj())


def dominant_eigenvector(
    Q: np.ndarray, tol: float = 1e-9, max_iter: int = 1000
) -> tuple[float, np.ndarray]:
    """Top eigenpair of a Hermitian PSD matrix by power iteration.

    Starts from the normalized all-ones vector, falling back to canonical
    basis vectors if an iterate lands in the null space.  Converged when
    the relative eigenvalue change drops below `tol` and the residual
    ||Qv - lam v|| is within EIGEN_RESIDUAL_RTOL * lam; raises
    ConvergenceError (carrying the residual) past `max_iter`.
    """
    Q = np.asarray(Q)
    n = Q.shape[0]
    v = np.full(n, 1.0 / np.sqrt(n), dtype=complex)
    lam_prev = np.inf
    lam = 0.0
    res = np.inf
    basis_ptr = 0
    for it in range(max_iter):
        y = Q @ v
        lam = float(np.real(np.vdot(v, y)))
        yn2 = float(np.real(np.vdot(y, y)))
        res = np.sqrt(max(yn2 - lam * lam, 0.0))
        floor = max(lam, 1e-300)
        if abs(lam - lam_prev) <= tol * floor and res <= EIGEN_RESIDUAL_RTOL * floor:
            return lam, v
        lam_prev = lam
        yn = np.sqrt(yn2)
        if yn == 0.0:
            if basis_ptr >= n:
                # Q annihilates every basis vector: Q = 0
                return 0.0, v
            v = np.zeros(n, dtype=complex)
            v[basis_ptr] = 1.0
            basis_ptr += 1
            lam_prev = np.inf
        else:
            v = y / yn
    raise ConvergenceError(res / max(lam, 1e-300), lam, max_iter)


def beamformed_snr(
    dressed: list[DressedPath],
    w_tx: np.ndarray,
    w_rx: np.ndarray,
    budget: LinkBudget,
) -> float:
    """Uplink SNR in dB for given unit-norm beamforming vectors."""
    if not dressed:
        return NEGATIVE_INFINITY_SNR
    for w, name in ((w_tx, "w_tx"), (w_rx, "w_rx")):
        if abs(np.linalg.norm(w) - 1.0) > 1e-6:
            raise ValueError(f"{name} must be unit norm")
    total = 0.0
    for d in dressed:
        g_rx = abs(np.vdot(w_rx, d.rx_steering)) ** 2
        g_tx = abs(np.vdot(w_tx, d.tx_steering)) ** 2
        total += d.weight_linear * g_rx * g_tx
    if total <= 0.0:
        return NEGATIVE_INFINITY_SNR
    rx_power_dbm = budget.tx_power_dbm + 10.0 * np.log10(total)
    return float(rx_power_dbm - budget.noise_power_dbm)


def evaluate_link(
    sample: ChannelSample,
    tx: MountedArray,
    rx: MountedArray,
    budget: LinkBudget,
    *,
    tol: float = 1e-9,
    max_iter: int = 1000,
    gnb_id: str = "",
    sector_idx: int = -1,
    kind: GnbKind | None = None,
) -> LinkResult:
    """Dress -> covariances -> dominant eigenvectors -> SNR, recording
    whether the strongest beamformed path is the geometric LOS path and
    its elevation AOA."""
    if sample.state is LinkState.OUTAGE:
        return LinkResult(
            snr_db=NEGATIVE_INFINITY_SNR,
            state=LinkState.OUTAGE,
            strongest_path_is_los=False,
            strongest_path_aoa_elevation_deg=float("nan"),
            gnb_id=gnb_id,
            sector_idx=sector_idx,
            kind=kind,
        )
    dressed = dress_paths(sample, tx, rx)
    _, v_tx = dominant_eigenvector(long_term_covariance(dressed, "tx"), tol, max_iter)
    _, v_rx = dominant_eigenvector(long_term_covariance(dressed, "rx"), tol, max_iter)
    per_path = np.array(
        [
            d.weight_linear
            * abs(np.vdot(v_rx, d.rx_steering)) ** 2
            * abs(np.vdot(v_tx, d.tx_steering)) ** 2
            for d in dressed
        ]
    )
    strongest = int(np.argmax(per_path))
    snr = beamformed_snr(dressed, v_tx, v_rx, budget)
    return LinkResult(
        snr_db=snr,
        state=sample.state,
        strongest_path_is_los=(sample.state is LinkState.LOS and strongest == 0),
        strongest_path_aoa_elevation_deg=sample.paths[strongest].aoa_elevation_deg,
        gnb_id=gnb_id,
        sector_idx=sector_idx,
        kind=kind,
    )
