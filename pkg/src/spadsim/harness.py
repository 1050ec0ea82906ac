"""End-to-end experiments: one rate point, a rate sweep, and comparison
against the reference autocorrelation table."""

from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import detector as det
from .detector import DetectorParams, PulseSource
from .reference import COLUMNS, GRID_HZ, ReferenceTable, load_reference
from .resolver import ResolverConfig, StreamingResolver
from .sampling import derive_seed
from .stats import AutocorrResult, rms_error, serial_autocorrelation

log = logging.getLogger(__name__)

RATE_MODES = ("direct", "calibrated")
MIN_BITS = 10_000


@dataclass(frozen=True)
class RunConfig:
    detector0: DetectorParams
    detector1: DetectorParams
    resolver: ResolverConfig = field(default_factory=ResolverConfig)
    frequencies_hz: tuple[float, ...] = GRID_HZ
    n_bits_per_point: int = 10_000_000
    master_seed: int = 0
    rate_mode: str = "direct"
    label: str = "custom"

    def __post_init__(self):
        freqs = tuple(float(f) for f in self.frequencies_hz)
        object.__setattr__(self, "frequencies_hz", freqs)
        if any(f <= 0 for f in freqs):
            raise ValueError("frequencies must be positive")
        if any(b <= a for a, b in zip(freqs, freqs[1:])):
            raise ValueError("frequencies must be sorted and distinct")
        if self.n_bits_per_point < MIN_BITS:
            raise ValueError(f"n_bits_per_point must be >= {MIN_BITS}")
        if self.rate_mode not in RATE_MODES:
            raise ValueError(f"rate_mode must be one of {RATE_MODES}, got {self.rate_mode!r}")


def preset_config(name: str, n_bits: int = 10_000_000, master_seed: int = 0,
                  window_ns: float = 12.0, rate_mode: str = "direct",
                  frequencies_hz=GRID_HZ) -> RunConfig:
    """D0/D1 afterpulse parameters combined with one of the dead-time presets."""
    if name not in det.DEAD_TIME_PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(det.DEAD_TIME_PRESETS)}")
    return RunConfig(det.d0_params(1e6, name), det.d1_params(1e6, name),
                     ResolverConfig(window_ns), tuple(frequencies_hz), n_bits,
                     master_seed, rate_mode, name)


def calibrate_input_rate(params: DetectorParams, target_output_hz: float,
                         dead_ns: float | None = None, rel_tol: float = 1e-3) -> float:
    """Photo-electron rate whose mean output pulse rate equals the target."""
    if dead_ns is None:
        dead_ns = det.effective_dead_time(params.dead_time, target_output_hz)
    if not target_output_hz > 0:
        raise ValueError(f"target rate must be positive, got {target_output_hz}")
    if dead_ns > 0 and target_output_hz >= det.NS_PER_S / dead_ns:
        raise ValueError(f"target {target_output_hz:g} Hz is at or beyond the "
                         f"saturation rate {det.NS_PER_S / dead_ns:g} Hz")

    def excess(x):
        return det.expected_output_rate(params.with_rate(x), dead_ns) - target_output_hz

    lo, hi = 0.5 * target_output_hz, 100.0 * target_output_hz
    if excess(lo) > 0 or excess(hi) < 0:
        raise ValueError(f"target {target_output_hz:g} Hz not reachable with photon "
                         f"rates in [{lo:g}, {hi:g}] Hz")
    x = optimize.bisect(excess, lo, hi, xtol=1e-12 * hi, rtol=4 * np.finfo(float).eps,
                        maxiter=200)
    if abs(excess(x)) > rel_tol * target_output_hz:
        raise ArithmeticError(f"rate calibration missed {target_output_hz:g} Hz")
    return x


@dataclass(frozen=True)
class PointDiagnostics:
    frequency_hz: float
    photon_rates_hz: tuple[float, float]
    dead_ns: tuple[float, float]
    seeds: tuple[int, int]
    n_coincidences: int
    output_rates_hz: tuple[float, float]
    afterpulses: tuple[int, int]
    pulses: tuple[int, int]


def point_params(cfg: RunConfig, f_hz: float):
    """Per-detector (params, dead time) for one rate point."""
    out = []
    for p in (cfg.detector0, cfg.detector1):
        dead = det.effective_dead_time(p.dead_time, f_hz)
        rate = f_hz if cfg.rate_mode == "direct" else calibrate_input_rate(p, f_hz, dead)
        out.append((p.with_rate(rate), dead))
    return out


def simulate_bits(cfg: RunConfig, f_hz: float, point_index: int, n_bits: int):
    """Resolve bits from the two detectors until ``n_bits`` are available."""
    seeds = (derive_seed(cfg.master_seed, 2 * point_index),
             derive_seed(cfg.master_seed, 2 * point_index + 1))
    (p0, d0), (p1, d1) = point_params(cfg, f_hz)
    sources = (PulseSource(p0, seeds[0], d0), PulseSource(p1, seeds[1], d1))
    res = StreamingResolver(cfg.resolver)
    while res.n_bits < n_bits:
        for k, src in enumerate(sources):
            if res.needs(k):
                res.push(k, src.next_chunk()[0])
        res.step()
    bits = res.finish().bits[:n_bits]
    t_end = res.t_last
    diag = PointDiagnostics(
        f_hz, (p0.photon_rate_hz, p1.photon_rate_hz), (d0, d1), seeds,
        res.n_coincidences,
        tuple(det.NS_PER_S * c / t_end for c in res.consumed),
        tuple(s.n_afterpulses for s in sources),
        tuple(s.n_pulses for s in sources),
    )
    return bits, diag


def run_point(cfg: RunConfig, f_hz: float, point_index: int):
    bits, diag = simulate_bits(cfg, f_hz, point_index, cfg.n_bits_per_point)
    ac = serial_autocorrelation(bits, 1)
    log.info("f=%g Hz a=%.5f coincidences=%d", f_hz, ac.coefficient, diag.n_coincidences)
    return ac, diag


SWEEP_FIELDS = ("frequency_hz", "autocorr", "std_error", "n_bits", "n_coincidences",
                "rate_d0_hz", "rate_d1_hz", "mode", "seed")


@dataclass(frozen=True)
class SweepRow:
    frequency_hz: float
    autocorr: float
    std_error: float
    n_bits: int
    n_coincidences: int
    rate_d0_hz: float
    rate_d1_hz: float
    mode: str
    seed: int


@dataclass
class SweepReport:
    rows: list[SweepRow]
    label: str = ""
    window_ns: float | None = None

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([r.frequency_hz for r in self.rows])

    @property
    def autocorr(self) -> np.ndarray:
        return np.array([r.autocorr for r in self.rows])

    @property
    def std_error(self) -> np.ndarray:
        return np.array([r.std_error for r in self.rows])

    def matches_grid(self, ref: ReferenceTable) -> bool:
        return len(self.rows) == len(ref) and np.allclose(self.frequencies, ref.frequency_hz,
                                                          rtol=1e-9, atol=0)

    def rms_vs(self, ref: ReferenceTable | None = None) -> dict[str, float]:
        """R against each reference column, empty off the reference grid."""
        ref = ref or load_reference()
        if not self.rows or not self.matches_grid(ref):
            return {}
        return {c: rms_error(self.autocorr, ref.column(c)) for c in COLUMNS}

    def ratios_vs(self, column: str = "meas", ref: ReferenceTable | None = None) -> np.ndarray:
        ref = ref or load_reference()
        if not self.matches_grid(ref):
            raise ValueError("report does not cover the reference grid")
        return self.autocorr / ref.column(column)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_FIELDS)
        for r in self.rows:
            w.writerow([f"{r.frequency_hz:.17g}", f"{r.autocorr:.17g}", f"{r.std_error:.17g}",
                        r.n_bits, r.n_coincidences, f"{r.rate_d0_hz:.17g}",
                        f"{r.rate_d1_hz:.17g}", r.mode, r.seed])
        buf.write(f"# label={self.label}\n")
        if self.window_ns is not None:
            buf.write(f"# coincidence_window_ns={self.window_ns:g}\n")
        for col, value in self.rms_vs().items():
            buf.write(f"# R_{col}={value:.6g}\n")
        return buf.getvalue()

    def to_records(self) -> list[dict]:
        return [dict(zip(SWEEP_FIELDS, (r.frequency_hz, r.autocorr, r.std_error, r.n_bits,
                                        r.n_coincidences, r.rate_d0_hz, r.rate_d1_hz,
                                        r.mode, r.seed))) for r in self.rows]

    @classmethod
    def from_csv(cls, text: str) -> "SweepReport":
        meta = {}
        body = []
        for line in text.splitlines():
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key] = value
            elif line.strip():
                body.append(line)
        reader = csv.DictReader(body)
        missing = set(SWEEP_FIELDS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"sweep CSV lacks columns {sorted(missing)}")
        rows = [SweepRow(float(d["frequency_hz"]), float(d["autocorr"]), float(d["std_error"]),
                         int(d["n_bits"]), int(d["n_coincidences"]), float(d["rate_d0_hz"]),
                         float(d["rate_d1_hz"]), d["mode"], int(d["seed"])) for d in reader]
        window = meta.get("coincidence_window_ns")
        return cls(rows, meta.get("label", ""), float(window) if window else None)

    @classmethod
    def from_reference(cls, ref: ReferenceTable, column: str) -> "SweepReport":
        a, err = ref.column(column), ref.errors(column)
        rows = [SweepRow(f, float(x), float(e), 0, 0, f, f, "reference", 0)
                for f, x, e in zip(ref.frequency_hz, a, err)]
        return cls(rows, f"reference:{column}")


def run_sweep(cfg: RunConfig, threads: int = 1) -> SweepReport:
    """Run every configured rate point; output does not depend on ``threads``."""
    idx = range(len(cfg.frequencies_hz))

    def one(i):
        return run_point(cfg, cfg.frequencies_hz[i], i)

    if threads > 1 and len(idx) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, idx))
    else:
        results = [one(i) for i in idx]
    rows = [SweepRow(f, ac.coefficient, ac.std_error, ac.n_bits, d.n_coincidences,
                     d.output_rates_hz[0], d.output_rates_hz[1], cfg.rate_mode, cfg.master_seed)
            for f, (ac, d) in zip(cfg.frequencies_hz, results)]
    return SweepReport(rows, cfg.label, cfg.resolver.coincidence_window_ns)


@dataclass(frozen=True)
class ComparisonRow:
    frequency_hz: float
    a_run: float
    a_ref: float
    diff: float
    ratio: float
    zscore: float


@dataclass(frozen=True)
class Comparison:
    column: str
    rows: list[ComparisonRow]
    rms: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["frequency_hz", "a_run", "a_ref", "diff", "ratio", "zscore"])
        for r in self.rows:
            w.writerow([f"{r.frequency_hz:.17g}"] + [f"{v:.6g}" for v in
                                                     (r.a_run, r.a_ref, r.diff, r.ratio, r.zscore)])
        w.writerow([f"R_{self.column}", f"{self.rms:.6g}"])
        return buf.getvalue()


def compare_to_reference(report: SweepReport, ref: ReferenceTable | None = None,
                         column: str = "meas") -> Comparison:
    ref = ref or load_reference()
    if not report.matches_grid(ref):
        raise ValueError("report frequencies do not match the reference grid")
    a_ref, e_ref = ref.column(column), ref.errors(column)
    a_run, e_run = report.autocorr, report.std_error
    diff = a_run - a_ref
    sigma = np.sqrt(e_run ** 2 + e_ref ** 2)
    z = np.divide(diff, sigma, out=np.zeros_like(diff), where=sigma > 0)
    rows = [ComparisonRow(float(f), float(x), float(y), float(d), float(x / y), float(s))
            for f, x, y, d, s in zip(ref.frequency_hz, a_run, a_ref, diff, z)]
    return Comparison(column, rows, rms_error(a_run, a_ref))

