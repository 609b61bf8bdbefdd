"""Seeded Monte-Carlo experiments: BER sweeps, hardening study, channel surfaces.

Every random draw comes from a generator keyed by ``(rng_seed, frame index,
stream label)``, so results do not depend on worker count or scheduling.
The channel stream ignores the sweep point, which gives common random
numbers across SNR points, CSI models and precoders.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .beamforming import beamformed_channel, transmit_downlink
from .channel import generate_channel
from .coding import encode, interleave, interleaver, map_bits
from .config import (ConfigError, CsiModel, PrecoderKind, SystemConfig, ValidatedConfig,
                     dumps_config, snr_from_ebn0, validate)
from .metrics import (BerTally, GammaCollector, HardeningStats, format_beta_table, gamma_from_phi,
                      gamma_no_op, tally_ber)
from .precoding import build_precoder, spread
from .receiver import detect_frame

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
STREAMS = {"channel": 1, "bits": 2, "noise": 3}
_SEED_MASK = (1 << 64) - 1

# Extra sweep axis on top of the config fields.
EBN0_AXIS = "ebn0_db"

PROFILES = {
    "desk": dict(num_antennas=16, num_frames=500),
    "paper": dict(num_antennas=64, num_frames=2000),
}
DESK_EBN0 = (10.0, 15.0)
FULL_EBN0 = tuple(float(x) for x in range(0, 21, 2))


def frame_rng(seed: int, frame: int, stream: str) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed & _SEED_MASK, spawn_key=(frame, STREAMS[stream]))
    return np.random.Generator(np.random.PCG64(ss))


# --- plans and records -------------------------------------------------------

@dataclass
class ExperimentPlan:
    base: SystemConfig
    axes: list[tuple[str, list[Any]]] = field(default_factory=list)
    max_frames: int | None = None
    min_bit_errors: int = 200
    batch_frames: int = 10
    output_dir: Path = Path("results")
    workers: int = 1
    noiseless: bool = False

    def __post_init__(self) -> None:
        fields = set(SystemConfig.__dataclass_fields__)
        for name, values in self.axes:
            if name != EBN0_AXIS and name not in fields:
                raise ConfigError(f"sweep axis {name!r} is not a config field")
            if not len(values):
                raise ConfigError(f"sweep axis {name!r} has no values")
        if self.batch_frames < 1 or self.min_bit_errors < 0:
            raise ConfigError("batch_frames must be >= 1 and min_bit_errors >= 0")
        self.output_dir = Path(self.output_dir)

    @property
    def frame_limit(self) -> int:
        return self.max_frames if self.max_frames is not None else self.base.num_frames

    def points(self) -> Iterable[dict[str, Any]]:
        names = [a for a, _ in self.axes]
        for combo in itertools.product(*(v for _, v in self.axes)):
            yield dict(zip(names, combo))

    def point_config(self, point: dict[str, Any]) -> SystemConfig:
        """Config for one sweep point; Eb/N0 is converted to the noise scaling."""
        changes = {k: v for k, v in point.items() if k != EBN0_AXIS}
        cfg = self.base.replace(**changes)
        if self.noiseless:
            cfg = cfg.replace(snr=float("inf"))
        elif EBN0_AXIS in point:
            cfg = cfg.replace(snr=snr_from_ebn0(float(point[EBN0_AXIS]), cfg))
        return cfg


RESULT_FIELDS = [
    "schema_version", "fingerprint", "point", "ebn0_db", "snr", "precoder_kind", "csi_model",
    "num_antennas", "ber", "fer", "bit_errors", "bits", "frame_errors", "frames",
    "beta", "mu_gamma", "sigma_gamma", "seed", "wall_time",
]
# Columns excluded from reproducibility comparisons.
NONDETERMINISTIC_FIELDS = {"wall_time"}


@dataclass
class ResultRecord:
    fingerprint: str
    point: dict[str, Any]
    ebn0_db: float | None
    snr: float
    precoder_kind: str
    csi_model: str
    num_antennas: int
    tally: BerTally
    hardening: HardeningStats
    seed: int
    wall_time: float

    def row(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "fingerprint": self.fingerprint,
            "point": ";".join(f"{k}={_fmt(v)}" for k, v in self.point.items()),
            "ebn0_db": "" if self.ebn0_db is None else repr(float(self.ebn0_db)),
            "snr": repr(float(self.snr)),
            "precoder_kind": self.precoder_kind,
            "csi_model": self.csi_model,
            "num_antennas": self.num_antennas,
            "ber": repr(self.tally.ber),
            "fer": repr(self.tally.fer),
            "bit_errors": self.tally.bit_errors,
            "bits": self.tally.bits,
            "frame_errors": self.tally.frame_errors,
            "frames": self.tally.frames,
            "beta": repr(self.hardening.beta),
            "mu_gamma": repr(self.hardening.mean),
            "sigma_gamma": repr(self.hardening.std),
            "seed": self.seed,
            "wall_time": f"{self.wall_time:.3f}",
        }


def _fmt(v: Any) -> str:
    return getattr(v, "value", v) if not isinstance(v, float) else repr(v)


def write_results(records: Sequence[ResultRecord], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# opmimo results schema {SCHEMA_VERSION}\n")
        writer = csv.DictWriter(fh, fieldnames=RESULT_FIELDS, lineterminator="\n")
        writer.writeheader()
        for rec in records:
            writer.writerow(rec.row())


def read_results(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("# opmimo results schema"):
            raise ValueError(f"{path}: missing schema line")
        return list(csv.DictReader(fh))


# --- single frame ------------------------------------------------------------

def frame_gammas(phi: np.ndarray, kind: PrecoderKind) -> np.ndarray:
    """Gamma samples a frame contributes: one value for CM sets, MN without precoding."""
    if kind is PrecoderKind.IDENTITY:
        return gamma_no_op(phi).ravel(order="F")
    return np.array([gamma_from_phi(phi)])


def simulate_frame(config: ValidatedConfig, frame: int, trace: list | None = None) -> tuple[BerTally, np.ndarray]:
    """Run the whole link for one frame; returns the tally and the frame's gamma samples."""
    c = config.config
    S = build_precoder(c.precoder_kind, config.N, config.M)
    channel = generate_channel(config, frame_rng(c.rng_seed, frame, "channel"))
    phi = beamformed_channel(channel, c.csi_model)

    info = frame_rng(c.rng_seed, frame, "bits").integers(0, 2, config.info_length, dtype=np.int8)
    pos = interleaver(config.N, config.M, c.modulation.bits_per_symbol)
    symbols = map_bits(interleave(encode(info, c.code_spec), pos), c.modulation, config.grid_size)
    psi = transmit_downlink(spread(S, symbols), phi, c.snr, frame_rng(c.rng_seed, frame, "noise"))

    decisions, _ = detect_frame(psi, phi, S, config, trace)
    return tally_ber(info, decisions), frame_gammas(phi, c.precoder_kind)


def _frame_batch(args: tuple[SystemConfig, Sequence[int]]) -> list[tuple[BerTally, np.ndarray]]:
    cfg, frames = args
    v = validate(cfg)
    return [simulate_frame(v, f) for f in frames]


def _chunks(start: int, stop: int, size: int) -> list[range]:
    return [range(i, min(i + size, stop)) for i in range(start, stop, size)]


def run_point(config: SystemConfig, plan: ExperimentPlan, pool: ProcessPoolExecutor | None = None
              ) -> tuple[BerTally, HardeningStats]:
    """Simulate batches of frames until ``max_frames`` or ``min_bit_errors``.

    The stopping rule is checked only between whole batches whose size does
    not depend on the worker count, so the set of simulated frames is fixed.
    """
    tally = BerTally()
    gammas = GammaCollector()
    limit = plan.frame_limit
    per_round = plan.batch_frames * max(plan.workers, 1)
    start = 0
    done = False
    while start < limit and not done:
        batches = _chunks(start, min(start + per_round, limit), plan.batch_frames)
        jobs = [(config, list(b)) for b in batches]
        results = pool.map(_frame_batch, jobs) if pool else map(_frame_batch, jobs)
        for batch_result in results:
            for t, g in batch_result:
                tally = tally.merge(t)
                gammas.add("gamma", g)
            if plan.min_bit_errors and tally.bit_errors >= plan.min_bit_errors:
                done = True
                break
        start = batches[-1].stop
    return tally, gammas.stats("gamma")


def _pool(workers: int) -> ProcessPoolExecutor | None:
    return ProcessPoolExecutor(max_workers=workers) if workers > 1 else None


def run_ber_sweep(plan: ExperimentPlan, filename: str = "ber_sweep.csv") -> list[ResultRecord]:
    """BER/FER per sweep point; writes one CSV row per point (plus a JSON summary)."""
    records = []
    pool = _pool(plan.workers)
    try:
        for point in plan.points():
            cfg = plan.point_config(point)
            v = validate(cfg)
            t0 = time.perf_counter()
            tally, hard = run_point(cfg, plan, pool)
            rec = ResultRecord(
                fingerprint=v.fingerprint(),
                point=point,
                ebn0_db=point.get(EBN0_AXIS),
                snr=cfg.snr,
                precoder_kind=cfg.precoder_kind.value,
                csi_model=cfg.csi_model.value,
                num_antennas=cfg.num_antennas,
                tally=tally,
                hardening=hard,
                seed=cfg.rng_seed,
                wall_time=time.perf_counter() - t0,
            )
            log.info("%s: BER %.3e over %d frames", rec.row()["point"], tally.ber, tally.frames)
            records.append(rec)
    finally:
        if pool:
            pool.shutdown()
    out = plan.output_dir / filename
    write_results(records, out)
    summary = [{k: v for k, v in r.row().items()} for r in records]
    out.with_suffix(".json").write_text(json.dumps(summary, indent=2) + "\n")
    return records


# --- hardening study ---------------------------------------------------------

HARDENING_ROWS = [
    (CsiModel.PERBF, False), (CsiModel.PERBF, True),
    (CsiModel.BFBF, False), (CsiModel.BFBF, True),
]


def row_label(model: CsiModel, precoded: bool) -> str:
    return f"{model.value} + {'CM' if precoded else 'NO'} OP"


def _hardening_frames(args: tuple[SystemConfig, Sequence[int]]) -> list[dict[str, np.ndarray]]:
    cfg, frames = args
    v = validate(cfg)
    out = []
    for f in frames:
        channel = generate_channel(v, frame_rng(cfg.rng_seed, f, "channel"))
        row = {}
        for model in (CsiModel.PERBF, CsiModel.BFBF):
            phi = beamformed_channel(channel, model)
            row[row_label(model, False)] = gamma_no_op(phi).ravel(order="F")
            row[row_label(model, True)] = np.array([gamma_from_phi(phi)])
        out.append(row)
    return out


@dataclass
class HardeningResult:
    stats: dict[str, HardeningStats]
    table: str
    fingerprint: str
    frames: int

    @property
    def betas(self) -> dict[str, float]:
        return {k: s.beta for k, s in self.stats.items()}


def hardening_study(config: SystemConfig, workers: int = 1, batch_frames: int = 25) -> HardeningResult:
    """Gamma statistics for every CSI model / precoding row on shared channel draws."""
    v = validate(config)
    frames = config.num_frames
    jobs = [(config, list(r)) for r in _chunks(0, frames, batch_frames)]
    collector = GammaCollector()
    pool = _pool(workers)
    try:
        results = pool.map(_hardening_frames, jobs) if pool else map(_hardening_frames, jobs)
        for batch in results:
            for row in batch:
                for label, g in row.items():
                    collector.add(label, g)
    finally:
        if pool:
            pool.shutdown()
    stats = {row_label(m, p): collector.stats(row_label(m, p)) for m, p in HARDENING_ROWS}
    return HardeningResult(stats, format_beta_table(stats), v.fingerprint(), frames)


def run_hardening_study(config: SystemConfig, output_dir: Path, workers: int = 1) -> HardeningResult:
    """Run :func:`hardening_study` and write the table, a stats CSV and the pdf histograms."""
    res = hardening_study(config, workers)
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    (output_dir / "beta_table.txt").write_text(res.table)
    with open(output_dir / "hardening_stats.csv", "w", newline="") as fh:
        fh.write(f"# opmimo hardening schema {SCHEMA_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "beta", "mu_gamma", "sigma_gamma", "samples", "beta_amplitude",
                    "frames", "seed", "fingerprint"])
        for label, st in res.stats.items():
            amp = np.sqrt(st.samples)
            w.writerow([label, repr(st.beta), repr(st.mean), repr(st.std), st.num_samples,
                        repr(float(amp.std() / amp.mean())), res.frames, config.rng_seed,
                        res.fingerprint])
    with open(output_dir / "gamma_pdf.csv", "w", newline="") as fh:
        fh.write(f"# opmimo gamma-pdf schema {SCHEMA_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "bin_left", "bin_right", "density"])
        for label, st in res.stats.items():
            for lo, hi, d in zip(st.bin_edges[:-1], st.bin_edges[1:], st.density):
                w.writerow([label, repr(float(lo)), repr(float(hi)), repr(float(d))])
    (output_dir / "hardening_config.txt").write_text(dumps_config(config))
    return res


# --- combined channel surface ------------------------------------------------

def combined_channel_surface(config: SystemConfig, frame: int = 0) -> np.ndarray:
    """``|phi_{q,m}|`` of one frame under the configured CSI model, shape (N, M)."""
    v = validate(config)
    channel = generate_channel(v, frame_rng(config.rng_seed, frame, "channel"))
    return np.abs(beamformed_channel(channel, config.csi_model))


def dump_combined_channel(config: SystemConfig, path: str | Path, frame: int = 0) -> np.ndarray:
    """CSV grid with one row per subcarrier q and one column per OFDM symbol m."""
    surface = combined_channel_surface(config, frame)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["q"] + [f"m{m}" for m in range(surface.shape[1])])
        for q, row in enumerate(surface):
            w.writerow([q] + [repr(float(x)) for x in row])
    return surface


def load_surface(path: str | Path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    return np.array([[float(x) for x in r[1:]] for r in rows])


def iteration_diagnostics(config: SystemConfig, frames: Iterable[int], path: str | Path) -> None:
    """Per-iteration CSV: iteration, mean |alpha - gain * b~|^2, cumulative BER."""
    v = validate(config)
    errors: dict[int, int] = {}
    resid: dict[int, list[float]] = {}
    bits = 0
    for f in frames:
        trace: list = []
        simulate_frame(v, f, trace)
        info = frame_rng(config.rng_seed, f, "bits").integers(0, 2, v.info_length, dtype=np.int8)
        bits += info.size
        for st in trace:
            errors[st.iteration] = errors.get(st.iteration, 0) + int(np.count_nonzero(st.decisions != info))
            resid.setdefault(st.iteration, []).append(
                float(np.mean(np.abs(st.alphas - st.gains * st.soft_symbols) ** 2)))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "mean_residual", "ber"])
        for it in sorted(errors):
            w.writerow([it, repr(float(np.mean(resid[it]))), repr(errors[it] / bits)])


def ber_plan_from_profile(base: SystemConfig, profile: str, ebn0: Sequence[float] | None = None,
                          **kwargs: Any) -> ExperimentPlan:
    """BFBF sweep over Eb/N0, with and without precoding."""
    base = base.replace(**PROFILES[profile], csi_model=CsiModel.BFBF)
    if ebn0 is None:
        ebn0 = DESK_EBN0 if profile == "desk" else FULL_EBN0
    axes = [("precoder_kind", [base.precoder_kind if base.precoder_kind is not PrecoderKind.IDENTITY
                               else PrecoderKind.WHT, PrecoderKind.IDENTITY]),
            (EBN0_AXIS, list(ebn0))]
    return ExperimentPlan(base=base, axes=axes, **kwargs)

