"""Bistatic geometry: target state to per-node delay/Doppler, with Jacobians.

All positions are 2D Cartesian coordinates in meters, velocities in m/s,
delays in seconds, Doppler in rad/s.  The bistatic delay of a node is the
excess of the transmitter-target-receiver path over the direct
transmitter-receiver baseline, so a target sitting on the baseline has
exactly zero delay.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


class DegenerateGeometryError(ValueError):
    """Target coincides with the transmitter or a receiver position."""


@dataclass(frozen=True)
class TargetParams:
    """Target state vector: position (x, y) in meters, velocity (vx, vy) in m/s."""

    x: float
    y: float
    vx: float = 0.0
    vy: float = 0.0

    def __post_init__(self):
        vec = (self.x, self.y, self.vx, self.vy)
        if not all(np.isfinite(vec)):
            raise ValueError(f"target state must be finite, got {vec}")

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @property
    def velocity(self) -> np.ndarray:
        return np.array([self.vx, self.vy])

    def as_vector(self) -> np.ndarray:
        return np.array([self.x, self.y, self.vx, self.vy])

    @staticmethod
    def from_vector(theta) -> "TargetParams":
        x, y, vx, vy = np.asarray(theta, dtype=float)
        return TargetParams(x, y, vx, vy)


@dataclass(frozen=True)
class NodeGeometry:
    """One transmitter/receiver pair with its carrier and propagation speed.

    ``io_position`` is the illuminator (transmitter of opportunity),
    ``rn_position`` the receiving node; ``carrier_angular_frequency`` is the
    RF carrier in rad/s used to map delay rate to Doppler shift.
    """

    io_position: tuple
    rn_position: tuple
    carrier_angular_frequency: float
    propagation_speed: float = SPEED_OF_LIGHT

    def __post_init__(self):
        io = np.asarray(self.io_position, dtype=float)
        rn = np.asarray(self.rn_position, dtype=float)
        if io.shape != (2,) or rn.shape != (2,):
            raise ValueError("positions must be 2D points")
        if not (np.all(np.isfinite(io)) and np.all(np.isfinite(rn))):
            raise ValueError("positions must be finite")
        if np.array_equal(io, rn):
            raise ValueError("illuminator and receiver must not coincide")
        if not self.carrier_angular_frequency > 0:
            raise ValueError("carrier_angular_frequency must be > 0")
        if not self.propagation_speed > 0:
            raise ValueError("propagation_speed must be > 0")
        object.__setattr__(self, "io_position", tuple(io))
        object.__setattr__(self, "rn_position", tuple(rn))

    @property
    def baseline(self) -> float:
        io = np.asarray(self.io_position)
        rn = np.asarray(self.rn_position)
        return float(np.linalg.norm(rn - io))


def bistatic_delay(position, node: NodeGeometry) -> float:
    """Excess two-leg propagation delay (seconds) relative to the direct path.

    Always non-negative by the triangle inequality; zero exactly when the
    target lies on the segment between illuminator and receiver.
    """
    u = np.asarray(position, dtype=float)
    io = np.asarray(node.io_position)
    rn = np.asarray(node.rn_position)
    r_rx = np.linalg.norm(u - rn)
    r_tx = np.linalg.norm(u - io)
    return float((r_rx + r_tx - node.baseline) / node.propagation_speed)


def bistatic_delay_rate(position, velocity, node: NodeGeometry) -> float:
    """Time derivative of the bistatic delay (s/s) for a constant velocity.

    Raises :class:`DegenerateGeometryError` when the target coincides with
    either endpoint (the radial unit vectors are undefined there).
    """
    u = np.asarray(position, dtype=float)
    v = np.asarray(velocity, dtype=float)
    io = np.asarray(node.io_position)
    rn = np.asarray(node.rn_position)
    to_rx = u - rn
    to_tx = u - io
    r_rx = np.linalg.norm(to_rx)
    r_tx = np.linalg.norm(to_tx)
    if r_rx == 0.0 or r_tx == 0.0:
        raise DegenerateGeometryError(
            "delay rate undefined: target coincides with a node position"
        )
    return float((v @ to_rx / r_rx + v @ to_tx / r_tx) / node.propagation_speed)


def doppler_from_rate(delay_rate: float, carrier_angular_frequency: float) -> float:
    """Doppler shift (rad/s) of a target whose delay changes at ``delay_rate``.

    A receding target (growing delay) produces a negative shift.
    """
    return -delay_rate * carrier_angular_frequency


def theta_to_delay_doppler(theta: TargetParams, nodes) -> np.ndarray:
    """Map a target state to the (delay, doppler) pair seen by each node.

    Returns an array of shape (K, 2) with delays in seconds and Doppler in
    rad/s.  Degenerate-geometry errors are re-raised tagged with the node
    index.
    """
    out = np.empty((len(nodes), 2))
    for k, node in enumerate(nodes):
        try:
            tau = bistatic_delay(theta.position, node)
            rate = bistatic_delay_rate(theta.position, theta.velocity, node)
        except DegenerateGeometryError as err:
            raise DegenerateGeometryError(f"node {k}: {err}") from None
        out[k, 0] = tau
        out[k, 1] = doppler_from_rate(rate, node.carrier_angular_frequency)
    return out


def delay_doppler_jacobian(theta: TargetParams, nodes) -> np.ndarray:
    """Analytic Jacobian d(delay, doppler)/d(x, y, vx, vy) per node, shape (K, 2, 4).

    Closed-form partials of the two-leg range sum and its rate; the delay row
    never depends on velocity.
    """
    u = theta.position
    v = theta.velocity
    out = np.empty((len(nodes), 2, 4))
    for k, node in enumerate(nodes):
        io = np.asarray(node.io_position)
        rn = np.asarray(node.rn_position)
        to_rx = u - rn
        to_tx = u - io
        r_rx = np.linalg.norm(to_rx)
        r_tx = np.linalg.norm(to_tx)
        if r_rx == 0.0 or r_tx == 0.0:
            raise DegenerateGeometryError(
                f"node {k}: Jacobian undefined at a node position"
            )
        u_rx = to_rx / r_rx
        u_tx = to_tx / r_tx
        c = node.propagation_speed
        wc = node.carrier_angular_frequency

        dtau_du = (u_rx + u_tx) / c
        # rate = (v.u_rx + v.u_tx)/c; d(v.u)/du = (v - (v.u)u)/r
        drate_du = ((v - (v @ u_rx) * u_rx) / r_rx + (v - (v @ u_tx) * u_tx) / r_tx) / c
        drate_dv = (u_rx + u_tx) / c

        out[k, 0, :2] = dtau_du
        out[k, 0, 2:] = 0.0
        out[k, 1, :2] = -wc * drate_du
        out[k, 1, 2:] = -wc * drate_dv
    return out
