"""Projection-based interference cancellation and the cross-ambiguity spectrum.

The interference basis of a node is the reference capture itself together
with its lattice-delayed copies; projecting the surveillance signal onto the
orthogonal complement of their span removes direct-path leakage and clutter
in the least-squares sense.  The spectrum value at a delay/Doppler
hypothesis is the normalized matched-filter power of the cleaned signal
against the cleaned reference-derived steering vector:

    P(tau, omega) = |a_hat^H Pi y|^2 / (a_hat^H Pi a_hat)

with Pi the complement projector.  Scaling of the reference channel cancels
in both the projector and the quotient, which is why the reference-path
amplitude never needs to be known.

Fractional delays of the recorded reference are produced by Kaiser-windowed
sinc interpolation (half-width 16, beta = 12); on a signal occupying 64% of
the Nyquist band its relative error is below -120 dB, far under every
tolerance used by the estimator or the statistical validation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scene import NodeRecord

INTERP_HALFWIDTH = 16
KAISER_BETA = 12.0
RANK_TOL = 1e-10
DEGENERATE_STEERING_TOL = 1e-8


class RankDeficiencyError(ValueError):
    """Reference-derived interference columns are numerically dependent."""


class DegenerateSteeringError(ValueError):
    """Steering vector lies (numerically) inside the interference span."""


class DelayRangeError(ValueError):
    """Requested delay outside the range supported by the recorded reference."""


@dataclass(frozen=True)
class InterferenceBasis:
    """Interference columns and a thin orthonormal factor of their span."""

    columns: np.ndarray  # (Q, L+1): [reference window | delayed windows]
    orthonormal: np.ndarray  # (Q, L+1), orthonormal columns, same span

    @property
    def n_taps(self) -> int:
        return self.columns.shape[1] - 1


@dataclass(frozen=True)
class AmbiguitySurface:
    """Spectrum sampled on a (delay, doppler) grid; NaN marks degenerate cells."""

    tau_grid: np.ndarray
    omega_grid: np.ndarray
    values: np.ndarray  # (n_tau, n_omega)
    node_index: int = 0

    def __post_init__(self):
        if self.values.shape != (len(self.tau_grid), len(self.omega_grid)):
            raise ValueError("values shape must match the grids")


def _kaiser_sinc(offsets: np.ndarray) -> np.ndarray:
    """Interpolation taps at (fractional) offsets from the evaluation point."""
    w = np.zeros_like(offsets)
    inside = np.abs(offsets) <= INTERP_HALFWIDTH
    x = offsets[inside] / INTERP_HALFWIDTH
    w[inside] = np.i0(KAISER_BETA * np.sqrt(1.0 - x * x)) / np.i0(KAISER_BETA)
    return np.sinc(offsets) * w


def interpolate_reference(reference: np.ndarray, positions: np.ndarray) -> np.ndarray:
    """Bandlimited interpolation of the reference record at fractional positions.

    ``positions`` are in sample units relative to the first stored sample.
    Raises :class:`DelayRangeError` when the kernel support would leave the
    record.
    """
    positions = np.asarray(positions, dtype=float)
    W = INTERP_HALFWIDTH
    lo = W - 1
    hi = reference.size - W
    if positions.size == 0:
        return np.zeros(0, dtype=complex)
    if positions.min() < lo or positions.max() > hi:
        raise DelayRangeError(
            f"interpolation positions [{positions.min():.2f}, {positions.max():.2f}] "
            f"outside supported range [{lo}, {hi}]"
        )
    base = np.floor(positions).astype(np.int64)
    frac = positions - base
    offsets = np.arange(-W + 1, W + 1)
    starts = base - W + 1
    windows = np.lib.stride_tricks.sliding_window_view(reference, 2 * W)
    if np.max(frac) - np.min(frac) < 1e-12:
        taps = _kaiser_sinc(frac[0] - offsets)
        return windows[starts] @ taps
    taps = _kaiser_sinc(frac[:, None] - offsets[None, :])
    return np.einsum("ij,ij->i", windows[starts], taps)


def interference_basis(record: NodeRecord, n_taps: int) -> InterferenceBasis:
    """Interference columns [x | delayed x] of a record (or batch view).

    Column l is the reference at the record's sample instants delayed by l
    lattice steps; the orthonormal factor comes from a thin QR with a rank
    check.
    """
    if record.reference.size < record.n_indices.size + n_taps:
        raise ValueError("reference record too short for the requested tap count")
    base = record.max_delay_samples + record.n_indices
    cols = np.empty((record.n_indices.size, n_taps + 1), dtype=complex)
    for l in range(n_taps + 1):
        cols[:, l] = record.reference[base - l]
    q, r = np.linalg.qr(cols, mode="reduced")
    diag = np.abs(np.diag(r))
    if np.min(diag) < RANK_TOL * np.linalg.norm(cols):
        raise RankDeficiencyError(
            f"interference columns are rank deficient (min pivot {np.min(diag):.3e})"
        )
    return InterferenceBasis(columns=cols, orthonormal=q)


def project_out(basis: InterferenceBasis, vectors: np.ndarray) -> np.ndarray:
    """Remove the interference-span component: v - U (U^H v).

    Works on a single vector or a (Q, m) stack of columns; the full
    projector matrix is never formed.
    """
    u = basis.orthonormal
    return vectors - u @ (u.conj().T @ vectors)


def rc_steering(
    record: NodeRecord,
    tau: float,
    omega: float,
    migrating: bool = False,
    carrier: float = None,
) -> np.ndarray:
    """Steering vector built from the recorded reference channel.

    Fractionally delayed reference samples, Doppler phased; with
    ``migrating`` the delay drifts at the rate implied by the Doppler shift
    and the carrier.
    """
    if migrating and not carrier:
        raise ValueError("migrating steering requires the carrier frequency")
    if tau < 0:
        raise DelayRangeError(f"delay must be non-negative, got {tau:.3e} s")
    times = record.times
    lattice = record.n_indices - tau / record.sample_interval
    if migrating:
        lattice = lattice + (omega / carrier) * times / record.sample_interval
    positions = record.max_delay_samples + lattice
    delayed = interpolate_reference(record.reference, positions)
    return delayed * np.exp(1j * omega * times)


def spectrum_value(y: np.ndarray, basis: InterferenceBasis, steer: np.ndarray) -> float:
    """Interference-cleaned, normalized cross-ambiguity value (>= 0).

    Raises :class:`DegenerateSteeringError` when the cleaned steering energy
    falls under the degenerate-steering tolerance (hypothesis inside the
    interference span; callers treating the point as missing add zero).
    """
    z = project_out(basis, steer)
    denom = float(np.real(z.conj() @ z))
    scale = float(np.real(steer.conj() @ steer))
    if denom < DEGENERATE_STEERING_TOL * scale:
        raise DegenerateSteeringError(
            f"cleaned steering energy {denom:.3e} below tolerance"
        )
    num = z.conj() @ y
    return float(np.abs(num) ** 2 / denom)


def spectrum_grid(
    record: NodeRecord,
    basis: InterferenceBasis,
    tau_grid: np.ndarray,
    omega_grid: np.ndarray,
    migrating: bool = False,
    carrier: float = None,
) -> AmbiguitySurface:
    """Spectrum over a full (delay, doppler) grid.

    The surveillance signal is projected once; each delay reuses one
    interpolated reference slice across all Doppler bins.  Degenerate cells
    are reported as NaN.
    """
    tau_grid = np.asarray(tau_grid, dtype=float)
    omega_grid = np.asarray(omega_grid, dtype=float)
    times = record.times
    y_clean = project_out(basis, record.surveillance)
    u = basis.orthonormal
    phases = np.exp(1j * np.outer(times, omega_grid))  # (Q, n_omega)
    values = np.full((tau_grid.size, omega_grid.size), np.nan)
    for i, tau in enumerate(tau_grid):
        if migrating:
            # migration warp varies with omega; fall back to per-cell steering
            for j, omega in enumerate(omega_grid):
                steer = rc_steering(record, tau, omega, migrating, carrier)
                try:
                    values[i, j] = spectrum_value(record.surveillance, basis, steer)
                except DegenerateSteeringError:
                    pass
            continue
        lattice = record.max_delay_samples + record.n_indices - tau / record.sample_interval
        xi = interpolate_reference(record.reference, lattice)
        norm2 = float(np.real(xi.conj() @ xi))
        numer = np.abs((xi.conj() * y_clean) @ phases.conj()) ** 2
        proj = (u.conj().T * xi[None, :]) @ phases  # (L+1, n_omega)
        denom = norm2 - np.sum(np.abs(proj) ** 2, axis=0)
        ok = denom > DEGENERATE_STEERING_TOL * norm2
        values[i, ok] = numer[ok] / denom[ok]
    return AmbiguitySurface(
        tau_grid=tau_grid,
        omega_grid=omega_grid,
        values=values,
        node_index=record.node_index,
    )


def batch_split(record: NodeRecord, m_batches: int, mode: str = "consecutive") -> list:
    """Split a record into batch views sharing the full-rate reference.

    Consecutive mode slices the surveillance window into contiguous blocks;
    sparse mode takes every m-th sample (preserving the observation span at
    the cost of the unambiguous Doppler range).
    """
    n = record.n_indices.size
    if n % m_batches != 0:
        raise ValueError(
            f"record length {n} not divisible into {m_batches} batches"
        )
    if mode not in ("consecutive", "sparse"):
        raise ValueError("mode must be 'consecutive' or 'sparse'")
    if m_batches == 1:
        return [record]
    q = n // m_batches
    out = []
    for m in range(m_batches):
        sel = slice(m * q, (m + 1) * q) if mode == "consecutive" else slice(m, None, m_batches)
        out.append(
            NodeRecord(
                reference=record.reference,
                surveillance=record.surveillance[sel],
                n_indices=record.n_indices[sel],
                sample_interval=record.sample_interval,
                max_delay_samples=record.max_delay_samples,
                truth=record.truth,
                node_index=record.node_index,
            )
        )
    return out


def frame_spectrum(
    batches: list,
    bases: list,
    tau: float,
    omega: float,
    migrating: bool = False,
    carrier: float = None,
) -> float:
    """Incoherent sum of per-batch spectrum values at one hypothesis.

    Cancellation is independent per batch; errors (degenerate steering,
    out-of-range delay) propagate to the caller.
    """
    total = 0.0
    for record, basis in zip(batches, bases):
        steer = rc_steering(record, tau, omega, migrating, carrier)
        total += spectrum_value(record.surveillance, basis, steer)
    return total


def default_tau_grid(record: NodeRecord, step_cells: float = 0.25) -> np.ndarray:
    """Delay grid over the supported range, quarter-sample steps by default."""
    dt = record.sample_interval
    hi = (record.max_delay_samples - INTERP_HALFWIDTH) * dt
    return np.arange(0.0, hi + 1e-12 * dt, step_cells * dt)


def default_omega_grid(
    record: NodeRecord, halfspan_cells: float = None, step_cells: float = 0.25
) -> np.ndarray:
    """Doppler grid in cells of 2*pi / observation span."""
    span = (record.n_indices.max() - record.n_indices.min() + 1) * record.sample_interval
    cell = 2 * np.pi / span
    if halfspan_cells is None:
        halfspan_cells = 16.0
    return np.arange(-halfspan_cells, halfspan_cells + 1e-9, step_cells) * cell
