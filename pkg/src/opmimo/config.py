"""Scenario configuration, validation and the flat ``key = value`` file format."""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

SPEED_OF_LIGHT = 299_792_458.0

# Frame must span less than half a Doppler cycle.
MAX_DOPPLER_FRAME_PRODUCT = 0.5


class ConfigError(ValueError):
    """Base class for invalid scenario parameters."""


class DimensionError(ConfigError):
    """Grid dimensions are incompatible with the requested precoder or code."""


class PhysicsError(ConfigError):
    """A physical parameter is outside its admissible range."""


class PrecoderKind(str, enum.Enum):
    WHT = "WHT"
    DSFT = "DSFT"
    IDENTITY = "IDENTITY"


class CsiModel(str, enum.Enum):
    PERBF = "PERBF"
    BFBF = "BFBF"


class Modulation(str, enum.Enum):
    QPSK = "QPSK"
    QAM16 = "QAM16"

    @property
    def bits_per_symbol(self) -> int:
        return {"QPSK": 2, "QAM16": 4}[self.value]


@dataclass(frozen=True)
class CodeSpec:
    """Feed-forward convolutional code, rate ``1/len(generators)``.

    Generators are given in octal notation with the MSB acting on the
    current input bit (the usual convention for the (133, 171) code).
    """

    constraint_length: int = 7
    generators: tuple[int, ...] = (0o133, 0o171)

    @property
    def rate(self) -> float:
        return 1.0 / len(self.generators)

    @property
    def memory(self) -> int:
        return self.constraint_length - 1

    def to_text(self) -> str:
        gens = ",".join(format(g, "o") for g in self.generators)
        return f"{self.constraint_length}:{gens}"

    @classmethod
    def from_text(cls, text: str) -> "CodeSpec":
        try:
            k, gens = text.split(":")
            return cls(int(k), tuple(int(g, 8) for g in gens.split(",")))
        except ValueError as exc:
            raise ConfigError(f"bad code spec {text!r}, expected e.g. '7:133,171'") from exc


@dataclass(frozen=True)
class SystemConfig:
    """All scenario parameters, SI units.

    Defaults reproduce the 802.11p-like vehicular scenario: 64 subcarriers,
    44 OFDM symbols, 10 MHz, 5.9 GHz carrier, 64 antennas at 200 km/h.
    ``snr`` is the linear noise scaling ``rho`` of the downlink model; use
    :func:`snr_from_ebn0` to obtain it from an Eb/N0 value.
    """

    num_subcarriers: int = 64
    num_ofdm_symbols: int = 44
    cp_length: int = 16
    bandwidth: float = 10e6
    carrier_freq: float = 5.9e9
    num_antennas: int = 64
    velocity: float = 200.0 / 3.6
    rms_delay_spread: float = 0.4e-6
    snr: float = math.inf
    precoder_kind: PrecoderKind = PrecoderKind.WHT
    csi_model: CsiModel = CsiModel.BFBF
    num_pic_iterations: int = 4
    modulation: Modulation = Modulation.QPSK
    code_spec: CodeSpec = field(default_factory=CodeSpec)
    num_frames: int = 2000
    rng_seed: int = 0
    num_cisoids: int = 32

    def replace(self, **changes: Any) -> "SystemConfig":
        return dataclasses.replace(self, **_coerce_fields(changes))


@dataclass(frozen=True)
class ValidatedConfig:
    """A checked :class:`SystemConfig` plus derived quantities."""

    config: SystemConfig
    symbol_duration: float
    max_doppler: float
    grid_size: int
    num_taps: int

    # Convenience passthroughs used throughout the simulation code.
    @property
    def N(self) -> int:
        return self.config.num_subcarriers

    @property
    def M(self) -> int:
        return self.config.num_ofdm_symbols

    @property
    def A(self) -> int:
        return self.config.num_antennas

    @property
    def coded_length(self) -> int:
        return self.grid_size * self.config.modulation.bits_per_symbol

    @property
    def info_length(self) -> int:
        n_out = len(self.config.code_spec.generators)
        return self.coded_length // n_out - self.config.code_spec.memory

    def fingerprint(self) -> str:
        return hashlib.sha256(dumps_config(self.config).encode()).hexdigest()[:16]


def _is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def num_taps_for(rms_delay_spread: float, bandwidth: float, cp_length: int) -> int:
    """Number of integer-delay taps of the sampled exponential profile.

    Enough taps for 99.9 % of the energy, truncated to delays strictly
    shorter than the cyclic prefix (and at least one tap).
    """
    decay = rms_delay_spread * bandwidth
    if decay <= 0:
        return 1
    needed = math.ceil(-decay * math.log(1e-3))
    return max(1, min(needed, max(cp_length, 1)))


def validate(config: SystemConfig | ValidatedConfig) -> ValidatedConfig:
    """Check ``config`` and compute derived quantities; idempotent."""
    if isinstance(config, ValidatedConfig):
        config = config.config
    c = config
    for name in ("num_subcarriers", "num_ofdm_symbols", "num_antennas",
                 "num_pic_iterations", "num_frames", "num_cisoids"):
        if getattr(c, name) < 1:
            raise DimensionError(f"{name} must be >= 1, got {getattr(c, name)}")
    if c.cp_length < 0:
        raise DimensionError(f"cp_length must be >= 0, got {c.cp_length}")
    if not c.bandwidth > 0:
        raise PhysicsError(f"bandwidth must be positive, got {c.bandwidth}")
    if not c.carrier_freq > 0:
        raise PhysicsError(f"carrier_freq must be positive, got {c.carrier_freq}")
    if c.velocity < 0:
        raise PhysicsError(f"velocity must be non-negative, got {c.velocity}")
    if c.rms_delay_spread < 0:
        raise PhysicsError(f"rms_delay_spread must be non-negative, got {c.rms_delay_spread}")
    if not c.snr > 0:
        raise PhysicsError(f"snr must be positive, got {c.snr}")

    if c.precoder_kind is PrecoderKind.WHT:
        from .precoding import hadamard_constructible
        for axis, n in (("num_subcarriers", c.num_subcarriers),
                        ("num_ofdm_symbols", c.num_ofdm_symbols)):
            if not hadamard_constructible(n):
                raise DimensionError(f"no Hadamard matrix of order {n} ({axis}) can be built")

    gens = c.code_spec.generators
    if c.code_spec.constraint_length < 1 or not gens:
        raise DimensionError("code needs constraint_length >= 1 and at least one generator")
    if any(g <= 0 or g >= 1 << c.code_spec.constraint_length for g in gens):
        raise DimensionError(f"generators {c.code_spec.to_text()} do not fit the constraint length")
    grid = c.num_subcarriers * c.num_ofdm_symbols
    coded = grid * c.modulation.bits_per_symbol
    if coded % len(gens) or coded // len(gens) <= c.code_spec.memory:
        raise DimensionError(f"{coded} coded bits cannot hold a terminated {c.code_spec.to_text()} codeword")

    ts = (c.num_subcarriers + c.cp_length) / c.bandwidth
    fd = c.velocity * c.carrier_freq / SPEED_OF_LIGHT
    if fd * ts * c.num_ofdm_symbols >= MAX_DOPPLER_FRAME_PRODUCT:
        raise PhysicsError(
            f"f_d*T_s*M = {fd * ts * c.num_ofdm_symbols:.3f} >= {MAX_DOPPLER_FRAME_PRODUCT}; frame too long for the Doppler"
        )
    return ValidatedConfig(
        config=c,
        symbol_duration=ts,
        max_doppler=fd,
        grid_size=grid,
        num_taps=num_taps_for(c.rms_delay_spread, c.bandwidth, c.cp_length),
    )


def snr_from_ebn0(ebn0_db: float, config: SystemConfig | ValidatedConfig) -> float:
    """Noise scaling ``rho`` for a given Eb/N0 in dB.

    Per grid element ``Es/N0 = Eb/N0 * rate * bits_per_symbol``. The
    unit-norm beam-former spreads one unit of energy over the ``MN`` grid
    elements, so ``rho`` carries an extra factor ``MN``.
    """
    v = validate(config)
    c = v.config
    es_n0 = 10.0 ** (ebn0_db / 10.0) * c.code_spec.rate * c.modulation.bits_per_symbol
    return es_n0 * v.grid_size


# --- flat key = value file format ------------------------------------------

_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(SystemConfig)}
_ENUMS = {"precoder_kind": PrecoderKind, "csi_model": CsiModel, "modulation": Modulation}
_INTS = {"num_subcarriers", "num_ofdm_symbols", "cp_length", "num_antennas",
         "num_pic_iterations", "num_frames", "rng_seed", "num_cisoids"}
_FLOATS = {"bandwidth", "carrier_freq", "velocity", "rms_delay_spread", "snr"}

_VELOCITY_RE = re.compile(r"^\s*([-+0-9.eE]+)\s*(km/h|kmh|kph|m/s|mps)?\s*$")


def parse_velocity(text: str) -> float:
    """Parse a velocity with optional unit suffix; bare numbers are m/s."""
    m = _VELOCITY_RE.match(text)
    if not m:
        raise ConfigError(f"cannot parse velocity {text!r}")
    value = float(m.group(1))
    if m.group(2) in ("km/h", "kmh", "kph"):
        value /= 3.6
    return value


def _coerce(name: str, value: Any) -> Any:
    if name not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {name!r}")
    if name in _ENUMS:
        try:
            return _ENUMS[name](value.upper() if isinstance(value, str) else value)
        except ValueError as exc:
            raise ConfigError(f"bad value {value!r} for {name}") from exc
    if name == "code_spec":
        return value if isinstance(value, CodeSpec) else CodeSpec.from_text(str(value))
    if name in _INTS:
        if isinstance(value, str):
            value = value.strip()
        try:
            return int(value)
        except ValueError as exc:
            raise ConfigError(f"bad integer {value!r} for {name}") from exc
    if name == "velocity" and isinstance(value, str):
        return parse_velocity(value)
    try:
        return float(value)
    except ValueError as exc:
        raise ConfigError(f"bad number {value!r} for {name}") from exc


def _coerce_fields(values: Mapping[str, Any]) -> dict[str, Any]:
    return {k: _coerce(k, v) for k, v in values.items()}


def _format(value: Any) -> str:
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, CodeSpec):
        return value.to_text()
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dumps_config(config: SystemConfig) -> str:
    lines = [f"{f.name} = {_format(getattr(config, f.name))}" for f in dataclasses.fields(config)]
    return "\n".join(lines) + "\n"


def loads_config(text: str, base: SystemConfig | None = None) -> SystemConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment. Unset keys keep ``base`` values."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key] = value
    return (base or SystemConfig()).replace(**values)


def save_config(config: SystemConfig, path: str | Path) -> None:
    Path(path).write_text(dumps_config(config))


def load_config(path: str | Path, base: SystemConfig | None = None) -> SystemConfig:
    return loads_config(Path(path).read_text(), base)
