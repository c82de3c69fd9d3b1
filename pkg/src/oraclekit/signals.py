"""Signal traces and their control-point encoding."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import LengthMismatchError, SchemaError
from .grammar import InputSchema, control_point_name


@dataclass(frozen=True)
class Signal:
    """A signal given by its control values, one per grid position.

    Piecewise-constant semantics: the value on ``[j*I, (j+1)*I)`` is
    ``control_values[j]``; the value at the horizon itself is the last
    control value.
    """

    name: str
    control_values: tuple[float, ...]

    def value(self, t: float, interval: float, horizon: float) -> float:
        if not 0 <= t <= horizon:
            raise ValueError(f"t={t} outside [0, {horizon}]")
        j = min(int(t // interval), len(self.control_values) - 1)
        return self.control_values[j]


def signal_value(schema: InputSchema, sig: Signal, t: float) -> float:
    return sig.value(t, schema.sampling_interval(sig.name), schema.time_horizon)


def encode_signals(signals: Sequence[Signal], schema: InputSchema) -> dict[str, float]:
    """Flatten signal traces into a control-point test input."""
    out: dict[str, float] = {}
    for sig in signals:
        spec = schema.signal(sig.name)
        if spec is None:
            raise SchemaError(f"unknown signal: {sig.name}")
        if len(sig.control_values) != spec.n_points:
            raise LengthMismatchError(
                f"signal {sig.name}: {len(sig.control_values)} control values, "
                f"schema declares {spec.n_points}"
            )
        for j, v in enumerate(sig.control_values):
            out[control_point_name(sig.name, j)] = float(v)
    return out
