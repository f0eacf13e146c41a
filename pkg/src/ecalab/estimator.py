"""Delay/Doppler estimation per node and global target-state estimation.

Per node the spectrum is maximized over (delay, doppler); at the fusion
level the per-node spectra are summed at the delay/Doppler pairs implied by
a hypothesized target state and the sum is maximized over the
four-dimensional state.  Maximization uses a Nelder-Mead simplex in scaled
coordinates (delay in samples, Doppler in resolution cells, position in
meters, velocity in m/s) so step sizes are comparable across components;
hypotheses that map outside a node's supported range simply contribute
zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import eca
from .geometry import TargetParams, theta_to_delay_doppler
from .scene import Scenario

DEFAULT_MAX_ITERATIONS = 400
DEFAULT_TOLERANCE = 1e-8
DEFAULT_INITIAL_STEP = 0.25


class AllMissingError(ValueError):
    """Every cell of the surface is degenerate; nothing to pick."""


@dataclass(frozen=True)
class RefineResult:
    point: np.ndarray
    value: float
    iterations: int
    converged: bool
    n_evaluations: int


@dataclass(frozen=True)
class EstimateReport:
    """Outcome of one estimation run."""

    mode: str  # "delay_doppler" or "theta"
    params: np.ndarray  # (tau, omega) or (x, y, vx, vy)
    per_node: np.ndarray  # (K, 2) mapped delay/Doppler pairs
    theta: TargetParams  # None in delay_doppler mode
    objective: float
    iterations: int
    converged: bool
    init_mode: str
    init_params: np.ndarray


def peak_pick(surface: eca.AmbiguitySurface) -> tuple:
    """Argmax cell of a surface; ties break to the smallest delay, then Doppler."""
    values = surface.values
    if np.all(np.isnan(values)):
        raise AllMissingError("surface has no valid cells")
    best = np.nanmax(values)
    ti, oi = np.argwhere(values == best)[0]  # row-major: smallest tau, then omega
    return float(surface.tau_grid[ti]), float(surface.omega_grid[oi])


def refine(
    objective,
    init_point,
    scales,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    tolerance: float = DEFAULT_TOLERANCE,
    initial_step=DEFAULT_INITIAL_STEP,
) -> RefineResult:
    """Maximize ``objective`` with a Nelder-Mead simplex in scaled coordinates.

    Standard simplex coefficients (reflection 1, expansion 2, contraction
    and shrink 0.5); stops when the scaled simplex diameter drops under
    ``tolerance`` or after ``max_iterations``.  Deterministic given the
    starting point.
    """
    scales = np.asarray(scales, dtype=float)
    x0 = np.asarray(init_point, dtype=float) / scales
    step = np.broadcast_to(np.asarray(initial_step, dtype=float), x0.shape)
    simplex = np.vstack([x0, x0 + np.diag(step)])

    def negated(z):
        return -objective(z * scales)

    res = minimize(
        negated,
        x0,
        method="Nelder-Mead",
        options={
            "initial_simplex": simplex,
            "xatol": tolerance,
            "fatol": np.inf,
            "maxiter": max_iterations,
            "adaptive": False,
        },
    )
    return RefineResult(
        point=res.x * scales,
        value=-res.fun,
        iterations=res.nit,
        converged=bool(res.success),
        n_evaluations=res.nfev,
    )


def prepare_node_data(scenario: Scenario, records: list) -> list:
    """Batch views and interference bases for every node."""
    data = []
    for record in records:
        batches = eca.batch_split(record, scenario.m_batches, scenario.batch_mode)
        bases = [eca.interference_basis(b, scenario.clutter_taps) for b in batches]
        data.append((batches, bases))
    return data


def node_objective(
    scenario: Scenario, node_data, k: int, tau: float, omega: float
) -> float:
    """Frame spectrum of node ``k``; zero when the hypothesis is unsupported."""
    batches, bases = node_data[k]
    try:
        return eca.frame_spectrum(
            batches,
            bases,
            tau,
            omega,
            scenario.migration,
            scenario.nodes[k].carrier_angular_frequency,
        )
    except (eca.DelayRangeError, eca.DegenerateSteeringError):
        return 0.0


def global_objective(scenario: Scenario, node_data, theta_vec) -> float:
    """Weighted sum of node spectra at the pairs implied by a target state."""
    theta = TargetParams.from_vector(theta_vec)
    pairs = theta_to_delay_doppler(theta, scenario.nodes)
    total = 0.0
    for k, w in enumerate(scenario.weights):
        if w == 0.0:
            continue
        total += w * node_objective(scenario, node_data, k, pairs[k, 0], pairs[k, 1])
    return total


def _doppler_cell(scenario: Scenario) -> float:
    return 2 * np.pi / (scenario.n_samples * scenario.sample_interval)


def _peaks_init_theta(scenario: Scenario, node_data, search_box) -> np.ndarray:
    """Coarse target-state grid seeded by per-node peak cells."""
    peaks = []
    for k in range(scenario.n_nodes):
        batches, bases = node_data[k]
        surface = eca.spectrum_grid(
            batches[0],
            bases[0],
            eca.default_tau_grid(batches[0]),
            eca.default_omega_grid(batches[0], halfspan_cells=32.0, step_cells=0.5),
            scenario.migration,
            scenario.nodes[k].carrier_angular_frequency,
        )
        peaks.append(peak_pick(surface))
    peaks = np.asarray(peaks)
    (x_lo, x_hi), (y_lo, y_hi) = search_box["position"]
    (vx_lo, vx_hi), (vy_lo, vy_hi) = search_box["speed"]
    n_pos = int(search_box.get("position_points", 15))
    n_vel = int(search_box.get("speed_points", 7))
    tau_scale = scenario.sample_interval
    omega_scale = _doppler_cell(scenario)
    best, best_cost = None, np.inf
    for x in np.linspace(x_lo, x_hi, n_pos):
        for y in np.linspace(y_lo, y_hi, n_pos):
            for vx in np.linspace(vx_lo, vx_hi, n_vel):
                for vy in np.linspace(vy_lo, vy_hi, n_vel):
                    try:
                        pairs = theta_to_delay_doppler(
                            TargetParams(x, y, vx, vy), scenario.nodes
                        )
                    except ValueError:
                        continue
                    cost = float(
                        np.sum(((pairs[:, 0] - peaks[:, 0]) / tau_scale) ** 2)
                        + np.sum(((pairs[:, 1] - peaks[:, 1]) / omega_scale) ** 2)
                    )
                    if cost < best_cost:
                        best, best_cost = np.array([x, y, vx, vy]), cost
    return best


def localize(
    scenario: Scenario,
    records: list,
    init: str = "oracle_truth",
    mode: str = None,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    tolerance: float = DEFAULT_TOLERANCE,
    initial_step=DEFAULT_INITIAL_STEP,
    search_box: dict = None,
    node_data: list = None,
) -> EstimateReport:
    """Estimate target parameters from node records.

    ``mode`` "delay_doppler" (single node, parameters are that node's delay
    and Doppler) or "theta" (full state via the fused objective); default is
    delay_doppler for one node.  ``init`` is "oracle_truth" (start at the
    generating truth, the convention for MSE studies) or "per_node_peaks"
    (best-effort grid initialization).
    """
    if mode is None:
        mode = "delay_doppler" if scenario.n_nodes == 1 else "theta"
    if node_data is None:
        node_data = prepare_node_data(scenario, records)

    if mode == "delay_doppler":
        if scenario.n_nodes != 1:
            raise ValueError("delay_doppler mode estimates a single node")
        truth = np.array(records[0].truth[:2])
        if init == "oracle_truth":
            x0 = truth
        elif init == "per_node_peaks":
            batches, bases = node_data[0]
            surface = eca.spectrum_grid(
                batches[0],
                bases[0],
                eca.default_tau_grid(batches[0]),
                eca.default_omega_grid(batches[0], halfspan_cells=32.0, step_cells=0.5),
                scenario.migration,
                scenario.nodes[0].carrier_angular_frequency,
            )
            x0 = np.array(peak_pick(surface))
        else:
            raise ValueError(f"unknown init mode {init!r}")
        scales = np.array([scenario.sample_interval, _doppler_cell(scenario)])
        result = refine(
            lambda p: node_objective(scenario, node_data, 0, p[0], p[1]),
            x0,
            scales,
            max_iterations,
            tolerance,
            initial_step,
        )
        return EstimateReport(
            mode=mode,
            params=result.point,
            per_node=result.point.reshape(1, 2),
            theta=None,
            objective=result.value,
            iterations=result.iterations,
            converged=result.converged,
            init_mode=init,
            init_params=x0,
        )

    if mode != "theta":
        raise ValueError(f"unknown mode {mode!r}")
    if scenario.truth_delay_doppler is not None:
        raise ValueError("theta mode needs geometry-derived truth")
    if init == "oracle_truth":
        x0 = scenario.target.as_vector()
    elif init == "per_node_peaks":
        if search_box is None:
            raise ValueError("per_node_peaks init in theta mode needs a search_box")
        x0 = _peaks_init_theta(scenario, node_data, search_box)
    else:
        raise ValueError(f"unknown init mode {init!r}")
    scales = np.ones(4)
    result = refine(
        lambda p: global_objective(scenario, node_data, p),
        x0,
        scales,
        max_iterations,
        tolerance,
        initial_step,
    )
    theta = TargetParams.from_vector(result.point)
    per_node = theta_to_delay_doppler(theta, scenario.nodes)
    return EstimateReport(
        mode=mode,
        params=result.point,
        per_node=per_node,
        theta=theta,
        objective=result.value,
        iterations=result.iterations,
        converged=result.converged,
        init_mode=init,
        init_params=x0,
    )
