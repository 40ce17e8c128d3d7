"""NV-center model parameters, state container, and Hamiltonians.

Unit conventions: all frequencies and rates are ordinary frequencies in Hz
(or 1/s); the evolution code applies the 2*pi factor internally. Magnetic
fields are in tesla, times in seconds, laser power in watts.
"""

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .spin import IDX_MINUS, IDX_PLUS, IDX_ZERO, spin1_matrices

ZERO_TO_PLUS = "zero_to_plus"
ZERO_TO_MINUS = "zero_to_minus"
AUTO_TARGET = "auto"


class PhysicsError(ValueError):
    """Invalid physics parameter or state."""


@dataclass(frozen=True)
class OpticalRates:
    """Decay and pumping rates of the optical cycle (all 1/s except noted).

    Defaults are calibrated plumbing values (see ``nvlab.calibration``),
    chosen so the simulated observables match the targets: 12 ns excited
    lifetime of |e0>, repolarization within ~1.5 us, and |0> brighter
    than |+-1> during early readout. They are not literature constants.
    """

    k_rad: float = 72.0e6
    k_isc_pm: float = 80.0e6
    k_isc_0: float = 11.3e6
    k_s0: float = 3.9e6
    k_s_pm: float = 0.45e6
    pump_rate_per_watt: float = 1.0e10

    def __post_init__(self):
        for name in ("k_rad", "k_isc_pm", "k_isc_0", "k_s0", "k_s_pm",
                     "pump_rate_per_watt"):
            if getattr(self, name) < 0:
                raise PhysicsError(f"{name} must be >= 0")
        if not self.k_isc_pm > self.k_isc_0:
            raise PhysicsError("k_isc_pm must exceed k_isc_0 (decay imbalance)")
        if not self.k_s0 > self.k_s_pm:
            raise PhysicsError("k_s0 must exceed k_s_pm (singlet drains to |0>)")

    def excited_lifetime(self, level: int) -> float:
        """1/e lifetime of excited level (basis index 0,1,2)."""
        k_isc = self.k_isc_0 if level == IDX_ZERO else self.k_isc_pm
        return 1.0 / (self.k_rad + k_isc)

    @property
    def max_excited_lifetime(self) -> float:
        return max(self.excited_lifetime(i) for i in range(3))

    @property
    def singlet_lifetime(self) -> float:
        return 1.0 / (self.k_s0 + 2.0 * self.k_s_pm)

    def with_excited_lifetime(self, lifetime: float) -> "OpticalRates":
        """Rates rescaled so the |e0> lifetime equals ``lifetime``.

        All excited-state decay channels scale together, preserving the
        branching ratios (and hence readout contrast and polarization).
        """
        if lifetime <= 0:
            raise PhysicsError("lifetime must be > 0")
        scale = self.excited_lifetime(IDX_ZERO) / lifetime
        return replace(self, k_rad=self.k_rad * scale,
                       k_isc_pm=self.k_isc_pm * scale,
                       k_isc_0=self.k_isc_0 * scale)


def _unit_axis(v) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    if a.shape != (3,):
        raise PhysicsError("axis must be a 3-vector")
    if abs(np.linalg.norm(a) - 1.0) > 1e-9:
        raise PhysicsError("axis must have unit norm within 1e-9")
    return a


@dataclass(frozen=True)
class NVParameters:
    """Static parameters of one NV center.

    ``t2_star`` sets the phenomenological driven-dephasing channel (active
    while MW is on) so that Rabi envelopes decay with time constant
    ``t2_star``; free-precession dephasing is produced by the classical
    detuning-noise model in the virtual lab, unless ``lindblad_dephasing``
    enables a plain Lindblad dephasing channel at rate 1/t2_star.
    """

    d_zfs: float = 2.87e9
    gamma_e: float = 28.0e9
    t2_star: float = 320e-9
    t1: float = 6.0e-3
    optical_rates: OpticalRates = field(default_factory=OpticalRates)
    axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    lindblad_dephasing: bool = False
    drive_dephasing_rate: float = None  # default 2/t2_star, see __post_init__

    def __post_init__(self):
        if self.d_zfs <= 0:
            raise PhysicsError("d_zfs must be > 0")
        if self.gamma_e <= 0:
            raise PhysicsError("gamma_e must be > 0")
        if self.t2_star <= 0:
            raise PhysicsError("t2_star must be > 0")
        if math.isfinite(self.t1) and math.isfinite(self.t2_star):
            if self.t1 < self.t2_star / 2:
                raise PhysicsError("t1 must be >= t2_star/2")
        object.__setattr__(self, "axis", _unit_axis(self.axis))
        if self.drive_dephasing_rate is None:
            object.__setattr__(self, "drive_dephasing_rate", 2.0 / self.t2_star)

    def transition_frequency(self, target: str, b_axis: float,
                             extra_detuning: float = 0.0) -> float:
        """|0> <-> |+-1> transition frequency (Hz) at axial field b_axis (T).

        ``extra_detuning`` models a magnetic-like shift: it adds to the
        Zeeman term, moving the two transitions in opposite directions.
        """
        zeeman = self.gamma_e * b_axis + extra_detuning
        if target == ZERO_TO_PLUS:
            return self.d_zfs + zeeman
        if target == ZERO_TO_MINUS:
            return self.d_zfs - zeeman
        raise PhysicsError(f"unknown target transition {target!r}")

    def without_relaxation(self) -> "NVParameters":
        """Copy with T1/T2* and drive dephasing disabled (closed system)."""
        return replace(self, t1=math.inf, t2_star=math.inf,
                       lindblad_dephasing=False, drive_dephasing_rate=0.0)


@dataclass
class NVState:
    """Hybrid NV state: ground-triplet density matrix plus classical
    populations of the excited triplet and the metastable singlet."""

    rho_g: np.ndarray
    p_e: np.ndarray
    p_s: float

    @classmethod
    def ground(cls, populations=(0.0, 1.0, 0.0)) -> "NVState":
        """Diagonal ground state; default is pure |0>."""
        rho = np.diag(np.asarray(populations, dtype=float)).astype(complex)
        return cls(rho_g=rho, p_e=np.zeros(3), p_s=0.0)

    @classmethod
    def mixed_ground(cls) -> "NVState":
        return cls.ground((1 / 3, 1 / 3, 1 / 3))

    @property
    def total(self) -> float:
        return float(np.trace(self.rho_g).real + self.p_e.sum() + self.p_s)

    def population(self, level: int) -> float:
        """Ground population of basis index (0=|+1>, 1=|0>, 2=|-1>)."""
        return float(self.rho_g[level, level].real)

    def validate(self, tol: float = 1e-9) -> None:
        if abs(self.total - 1.0) > tol:
            raise PhysicsError(f"total population {self.total} deviates from 1")
        if np.linalg.norm(self.rho_g - self.rho_g.conj().T) > tol:
            raise PhysicsError("rho_g is not Hermitian")
        evals = np.linalg.eigvalsh(self.rho_g)
        if evals.min() < -tol:
            raise PhysicsError("rho_g is not positive semidefinite")
        cls_pop = np.concatenate([self.p_e, [self.p_s]])
        if (cls_pop < -tol).any() or (cls_pop > 1 + tol).any():
            raise PhysicsError("classical populations outside [0, 1]")


@dataclass(frozen=True)
class ControlSegment:
    """One piecewise-constant slice of the control timeline."""

    duration: float
    laser_power: float = 0.0
    mw_on: bool = False
    mw_frequency: float = 0.0
    mw_rabi: float = 0.0
    mw_phase: float = 0.0
    target_transition: str = AUTO_TARGET
    b_axis: float = 0.0          # magnetic field projected on the NV axis (T)
    extra_detuning: float = 0.0  # classical noise detuning for this slice (Hz)

    def __post_init__(self):
        if self.duration <= 0:
            raise PhysicsError("segment duration must be > 0")
        if self.laser_power < 0:
            raise PhysicsError("laser_power must be >= 0")
        if self.mw_rabi < 0:
            raise PhysicsError("mw_rabi must be >= 0")
        if self.target_transition not in (AUTO_TARGET, ZERO_TO_PLUS,
                                          ZERO_TO_MINUS):
            raise PhysicsError(f"unknown target {self.target_transition!r}")


def ground_hamiltonian(params: NVParameters, b0_along_axis: float) -> np.ndarray:
    """Static ground-state Hamiltonian D*Sz^2 + gamma_e*B0*Sz (Hz, lab frame)."""
    ops = spin1_matrices()
    return (params.d_zfs * (ops.sz @ ops.sz)
            + params.gamma_e * b0_along_axis * ops.sz)


def drive_generator(segment: ControlSegment, params: NVParameters) -> np.ndarray:
    """Rotating-frame generator (Hz) for the MW drive of one segment.

    The frame rotates at ``segment.mw_frequency`` for both |+-1> levels, so
    each carries its detuning (transition frequency minus drive frequency)
    on the diagonal; the targeted transition gets an off-diagonal coupling
    of Omega/2 with the segment phase.
    """
    if not segment.mw_on:
        raise PhysicsError("drive_generator requires segment.mw_on")
    h = rotating_frame_hamiltonian(segment, params)
    return h


def rotating_frame_hamiltonian(segment: ControlSegment,
                               params: NVParameters) -> np.ndarray:
    """Ground-manifold Hamiltonian in the segment's rotating frame (Hz).

    When no MW frequency is set the frame defaults to the zero-field
    splitting, which makes both coherences precess at the pure Zeeman
    (plus noise) detuning.
    """
    f_frame = segment.mw_frequency if segment.mw_frequency > 0 else params.d_zfs
    f_plus = params.transition_frequency(ZERO_TO_PLUS, segment.b_axis,
                                         segment.extra_detuning)
    f_minus = params.transition_frequency(ZERO_TO_MINUS, segment.b_axis,
                                          segment.extra_detuning)
    h = np.zeros((3, 3), dtype=complex)
    h[IDX_PLUS, IDX_PLUS] = f_plus - f_frame
    h[IDX_MINUS, IDX_MINUS] = f_minus - f_frame
    if segment.mw_on and segment.mw_rabi > 0:
        target = segment.target_transition
        if target == AUTO_TARGET:
            # the drive addresses whichever transition it is closer to
            # (rotating-wave selectivity; exact degeneracy favors |+1>)
            f_drive = segment.mw_frequency
            target = (ZERO_TO_PLUS
                      if abs(f_drive - f_plus) <= abs(f_drive - f_minus)
                      else ZERO_TO_MINUS)
        tgt = IDX_PLUS if target == ZERO_TO_PLUS else IDX_MINUS
        coupling = 0.5 * segment.mw_rabi * np.exp(1j * segment.mw_phase)
        h[IDX_ZERO, tgt] = coupling
        h[tgt, IDX_ZERO] = np.conj(coupling)
    return h


def warn_polarization(p0: float, target: float) -> None:
    warnings.warn(
        f"polarization target not reached: |0> population {p0:.3f} < {target}",
        RuntimeWarning, stacklevel=3)
