"""Sum-frequency detection-rate model.

Maps a pump spatial profile and an incoherent signal state to the
expected converted-photon detection rate per pump pulse.  The conversion
strength follows the thin-crystal, single-mode-collection picture: the
detected amplitude for one signal component is the triple overlap of
pump, signal component, and the Gaussian collection mode, and incoherent
components add as squared overlaps.  Rates are reported relative to a
reference configuration in which both pump and signal are centered
fundamental Gaussians, so a perfectly matched, aligned setup has
relative efficiency 1.

An ideal anti-symmetric pump converts nothing from a centered source.
Finite contrast in practice comes only from the explicit imperfection
knobs: detector dark counts, spurious even-mode pump contamination, and
pump-centroid misalignment.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .modes import (
    Field,
    GaussianPSF,
    ModeBasis,
    ModeIndex,
    SignalState,
    gaussian_field,
    overlap2d,
    psf_field,
    superposition_field,
)

# Reference beam widths inside the crystal [um]; used as package-wide defaults.
DEFAULT_SIGMA_P = 22.5
DEFAULT_SIGMA_S = 20.5


def matched_collection_width(sigma_p: float, sigma_s: float) -> float:
    """Collection-mode width that maximizes the reference coupling [um].

    The product of the pump and signal Gaussian envelopes is itself a
    Gaussian of width sigma_p * sigma_s / sqrt(sigma_p^2 + sigma_s^2);
    collecting onto that width mode-matches the aligned configuration.
    """
    return sigma_p * sigma_s / np.hypot(sigma_p, sigma_s)


@dataclass(frozen=True, eq=False)
class PumpProfile:
    """Unit-norm pump mode: complex coefficients over a Hermite-Gaussian basis.

    ``optimized`` marks pumps produced by the pump optimizer; the count
    model applies its power-rebalancing gain only to those.
    """

    basis: ModeBasis
    coeffs: np.ndarray
    optimized: bool = False

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=complex)
        if coeffs.shape != (len(self.basis),):
            raise ValueError(
                f"expected {len(self.basis)} coefficients, got shape {coeffs.shape}"
            )
        norm = np.linalg.norm(coeffs)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"pump coefficients must have unit norm, got {norm!r}")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    def odd_l_only(self) -> bool:
        """True when every non-negligible coefficient sits on an odd-l mode."""
        return all(
            idx.l % 2 == 1 or abs(c) < 1e-14
            for idx, c in zip(self.basis.indices, self.coeffs)
        )


def gaussian_pump(sigma_p: float = DEFAULT_SIGMA_P) -> PumpProfile:
    """Fundamental-Gaussian pump of width sigma_p (the calibration mode)."""
    basis = ModeBasis(sigma_p, (ModeIndex(0, 0),))
    return PumpProfile(basis=basis, coeffs=np.array([1.0 + 0.0j]), optimized=False)


@dataclass(frozen=True)
class CountModel:
    """Detection-rate parameters.

    sigma_f         collection-mode width [um]
    eta0            detected photons per pulse for the aligned all-Gaussian
                    reference configuration
    gain_opt        rate multiplier applied when pumping in the optimized
                    mode (emulates pump-power rebalancing)
    dark_per_pulse  dark + background counts per pulse gate
    misalign_x      pump-centroid error along x [um]
    leak_even       amplitude of spurious fundamental-mode pump
                    contamination (relative to the unit-norm pump)
    """

    sigma_f: float
    eta0: float = 1e-4
    gain_opt: float = 1.0
    dark_per_pulse: float = 0.0
    misalign_x: float = 0.0
    leak_even: float = 0.0

    def __post_init__(self):
        if self.sigma_f <= 0:
            raise ValueError(f"sigma_f must be positive, got {self.sigma_f}")
        if self.eta0 < 0:
            raise ValueError(f"eta0 must be non-negative, got {self.eta0}")
        if self.gain_opt <= 0:
            raise ValueError(f"gain_opt must be positive, got {self.gain_opt}")
        if self.dark_per_pulse < 0:
            raise ValueError(f"dark_per_pulse must be non-negative, got {self.dark_per_pulse}")

    def with_gain(self, gain_opt: float) -> "CountModel":
        return replace(self, gain_opt=gain_opt)


@dataclass(frozen=True)
class RateReport:
    """Expected detections per pulse, before and after adding dark counts."""

    rate_signal: float
    rate_total: float
    eta_rel: float


@lru_cache(maxsize=None)
def reference_overlap(sigma_p: float, sigma_s: float, sigma_f: float) -> float:
    """Triple overlap of the aligned fundamental Gaussians (the unit of eta_rel)."""
    value = overlap2d(
        gaussian_field(sigma_p), gaussian_field(sigma_s), gaussian_field(sigma_f)
    )
    ref = float(value.real)
    assert ref > 0.0, "reference overlap cannot vanish for positive widths"
    return ref


def effective_pump_field(pump: PumpProfile, model: CountModel) -> Field:
    """Pump field including even-mode leakage and centroid misalignment.

    The leakage adds ``leak_even`` of the fundamental mode to the unit-norm
    pump; the sum is renormalized and then translated by ``misalign_x``.
    """
    basis = pump.basis
    coeffs = np.array(pump.coeffs, dtype=complex)
    if model.leak_even != 0.0:
        fundamental = ModeIndex(0, 0)
        if fundamental in basis.indices:
            coeffs[basis.indices.index(fundamental)] += model.leak_even
        else:
            basis = ModeBasis(basis.sigma_p, basis.indices + (fundamental,))
            coeffs = np.concatenate([coeffs, [complex(model.leak_even)]])
    coeffs = coeffs / np.linalg.norm(coeffs)
    return superposition_field(basis, coeffs, shift_x=model.misalign_x)


def eta_rel(pump: PumpProfile, state: SignalState, model: CountModel) -> float:
    """Conversion-detection efficiency relative to the aligned reference.

    Sums w_k |overlap(pump_eff, psi_k, collection)|^2 over the incoherent
    signal components and divides by the squared reference overlap.
    Probabilities add across components, never amplitudes.
    """
    sigma_s = state.components[0][1].sigma_s
    ref = reference_overlap(pump.basis.sigma_p, sigma_s, model.sigma_f)
    pump_field = effective_pump_field(pump, model)
    collection = gaussian_field(model.sigma_f)
    total = 0.0
    for weight, psf in state.components:
        amp = overlap2d(pump_field, psf_field(psf), collection)
        total += weight * abs(amp) ** 2
    return total / ref**2


def expected_rate(pump: PumpProfile, state: SignalState, model: CountModel) -> RateReport:
    """Expected detections per pulse for the given pump and signal state."""
    efficiency = eta_rel(pump, state, model)
    gain = model.gain_opt if pump.optimized else 1.0
    rate_signal = model.eta0 * gain * efficiency
    return RateReport(
        rate_signal=rate_signal,
        rate_total=rate_signal + model.dark_per_pulse,
        eta_rel=efficiency,
    )


def selectivity(
    pump: PumpProfile,
    model: CountModel,
    theta_x: float,
    sigma_s: float = DEFAULT_SIGMA_S,
) -> float:
    """Count ratio O_A / O_B of the pump between the two hypotheses.

    Uses total expected rates (dark counts included, as measured counts
    would be).  Small is good: the optimized pump should convert the
    two-source state far more strongly than the single source.
    """
    if theta_x <= 0:
        raise ValueError(f"theta_x must be positive, got {theta_x}")
    rate_a = expected_rate(pump, SignalState.point_source(sigma_s), model).rate_total
    rate_b = expected_rate(pump, SignalState.symmetric_pair(sigma_s, theta_x), model).rate_total
    if rate_b == 0.0:
        raise ZeroDivisionError("two-source rate is zero; selectivity undefined")
    return rate_a / rate_b


def calibrated_gain(
    pump: PumpProfile,
    model: CountModel,
    theta_x: float,
    sigma_s: float = DEFAULT_SIGMA_S,
) -> float:
    """Gain that equalizes the two pumps' expected counts on the two-source state.

    Rebalancing pump power so that E[O_B] = E[G_B] realizes the operating
    point at which the minimum-photon budget formula is derived.
    """
    state_b = SignalState.symmetric_pair(sigma_s, theta_x)
    eta_gauss = eta_rel(gaussian_pump(pump.basis.sigma_p), state_b, model)
    eta_opt = eta_rel(pump, state_b, model)
    if eta_opt == 0.0:
        raise ZeroDivisionError("optimized pump converts nothing from the two-source state")
    return eta_gauss / eta_opt
