"""Nonlinear CCCV charging power, discrete integration, and FCFS stations."""

from __future__ import annotations

from dataclasses import dataclass, field

from .netmodel import ChargerSpec


class StationLogicError(RuntimeError):
    """Duplicate arrival or release of a non-occupant."""


def cccv_power(soc: float, p_max: float, p_min: float) -> float:
    """SoC-dependent charging power (kW) with a high-SoC taper."""
    if not (0.0 <= soc <= 1.0):
        raise ValueError(f"soc must be in [0,1], got {soc}")
    if soc <= 0.10:
        return p_max * (0.6 + 3.0 * soc)
    if soc <= 0.50:
        return p_max * (0.9 + 0.25 * (soc - 0.10))
    if soc <= 0.80:
        return p_max
    # algebraically (soc - 0.8)/0.2; this form is exact at soc = 1.0
    p = soc * 5.0 - 4.0
    return max(p_min, p_max * (1.0 - 0.6 * p**1.5))


def integrate_charge(
    battery: float,
    capacity: float,
    duration: float,
    eta: float,
    p_max: float,
    p_min: float,
    dt: float,
) -> tuple[float, float]:
    """Forward-rectangle integration of the charge curve over `duration` hours.

    Returns (battery_after, energy_added); never exceeds capacity.
    """
    if not (0.0 <= battery <= capacity):
        raise ValueError("battery must be within [0, capacity]")
    if duration < 0 or dt <= 0:
        raise ValueError("duration must be >= 0 and dt > 0")
    b = battery
    remaining = duration
    while remaining > 1e-12 and b < capacity:
        step = dt if remaining >= dt else remaining
        b = min(capacity, b + eta * cccv_power(b / capacity, p_max, p_min) * step)
        remaining -= step
    return b, b - battery


@dataclass
class ChargeSession:
    truck_id: int
    station: int
    start_time: float
    duration: float
    energy_added: float = 0.0
    waited: float = 0.0
    arrive_time: float = 0.0
    end_time: float = 0.0


@dataclass
class AdmitOutcome:
    started_at: float | None = None
    queued_position: int | None = None


@dataclass
class StationState:
    spec: ChargerSpec
    # truck_id -> scheduled session end time
    occupants: dict[int, float] = field(default_factory=dict)
    # FIFO of (truck_id, arrival_time, requested_duration)
    queue: list[tuple[int, float, float]] = field(default_factory=list)

    def station_arrive(self, truck_id: int, t: float, requested_duration: float) -> AdmitOutcome:
        if truck_id in self.occupants or any(q[0] == truck_id for q in self.queue):
            raise StationLogicError(f"truck {truck_id} already present at station {self.spec.node}")
        if len(self.occupants) < self.spec.ports:
            self.occupants[truck_id] = t + requested_duration
            return AdmitOutcome(started_at=t)
        self.queue.append((truck_id, t, requested_duration))
        return AdmitOutcome(queued_position=len(self.queue))

    def station_release(self, truck_id: int, t: float) -> tuple[int, float, float, float] | None:
        """Free the port; admit the queue head if any.

        Returns (next_truck, start_time, requested_duration, waited) or None.
        """
        if truck_id not in self.occupants:
            raise StationLogicError(f"truck {truck_id} does not occupy a port at station {self.spec.node}")
        del self.occupants[truck_id]
        if not self.queue:
            return None
        next_truck, arrival, duration = self.queue.pop(0)
        self.occupants[next_truck] = t + duration
        return next_truck, t, duration, t - arrival

    def has_free_port(self) -> bool:
        return len(self.occupants) < self.spec.ports
