"""Cost kernels: energy, latency, load status and network usage.

Time-varying quantities are piecewise constant on a fixed step grid (``step_ms``
wide, starting at 0). Integrals over such series are exact rectangle sums.
Rates are per second, durations reported in milliseconds unless a name says
otherwise.

Besides the per-series kernels, this module recomputes the same quantities
directly from a simulator event log (``*_from_log`` functions); the two routes
are independent and must agree.
"""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DeviceProfile", "MetricsReport", "RunningZScore", "StallError",
    "device_power", "compute_energy", "transmission_rate", "power_for_rate",
    "transmission_energy", "total_energy", "work_duration_ms", "transfer_latency",
    "compute_latency", "average_latency", "load_status", "network_usage",
    "db_to_linear", "dbm_to_watts",
]


class StallError(RuntimeError):
    """Work can never finish: the rate series is zero from some point on."""


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class DeviceProfile:
    kind: str                          # "mobile" | "edge" | "cloud"
    p_full_watts: float
    k_ratio: float
    proc_rate_cycles_per_s: float
    channel_gain: float = db_to_linear(-50.0)
    noise_watts: float = dbm_to_watts(-100.0)
    interference_watts: float = 0.0
    bandwidth_hz: float = 1e6
    tx_power_watts: float = 0.1
    cpu_capacity_cycles_per_s: float | None = None
    mem_bytes: float = 4e9

    def __post_init__(self):
        if self.kind not in ("mobile", "edge", "cloud"):
            raise ValueError(f"unknown device kind {self.kind!r}")
        if not 0.0 < self.k_ratio <= 1.0:
            raise ValueError("k_ratio must lie in (0, 1]")
        for name in ("p_full_watts", "proc_rate_cycles_per_s", "channel_gain",
                     "noise_watts", "bandwidth_hz", "mem_bytes"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.interference_watts < 0 or self.tx_power_watts < 0:
            raise ValueError("interference and transmit power must be non-negative")

    @property
    def cpu_capacity(self) -> float:
        if self.cpu_capacity_cycles_per_s is None:
            return self.proc_rate_cycles_per_s
        return self.cpu_capacity_cycles_per_s


# --- energy -----------------------------------------------------------------

def device_power(u: float, profile: DeviceProfile) -> float:
    """Compute power at CPU usage ``u``; no idle offset."""
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"CPU usage {u} outside [0, 1]")
    return profile.k_ratio * profile.p_full_watts * u if u > 0 else 0.0


def _window_overlaps(n_steps: int, step_ms: float, t0_ms: float, t_ms: float) -> np.ndarray:
    """Length in seconds of each grid step's overlap with [t0, t0 + t]."""
    if t_ms < 0 or t0_ms < 0 or t0_ms + t_ms > n_steps * step_ms * (1 + 1e-12):
        raise ValueError(f"window [{t0_ms}, {t0_ms + t_ms}] ms outside trace of "
                         f"{n_steps * step_ms} ms")
    edges = np.arange(n_steps + 1) * step_ms
    lo = np.maximum(edges[:-1], t0_ms)
    hi = np.minimum(edges[1:], t0_ms + t_ms)
    return np.clip(hi - lo, 0.0, None) / 1000.0


def compute_energy(usage, profile: DeviceProfile, step_ms: float,
                   t0_ms: float = 0.0, t_ms: float | None = None) -> float:
    """Joules consumed over [t0, t0 + t] for a per-step usage series."""
    u = np.asarray(usage, dtype=float)
    if np.any((u < 0) | (u > 1)):
        raise ValueError("usage series must lie in [0, 1]")
    if t_ms is None:
        t_ms = len(u) * step_ms - t0_ms
    dt = _window_overlaps(len(u), step_ms, t0_ms, t_ms)
    power = np.where(u > 0, profile.k_ratio * profile.p_full_watts * u, 0.0)
    return float(np.dot(power, dt))


def transmission_rate(p_watts: float, profile: DeviceProfile, gain: float | None = None) -> float:
    """Shannon rate in bits/s at transmit power ``p_watts``."""
    if p_watts < 0:
        raise ValueError("transmit power must be non-negative")
    h = profile.channel_gain if gain is None else gain
    snr = p_watts * h / (profile.noise_watts + profile.interference_watts)
    return profile.bandwidth_hz * math.log1p(snr) / math.log(2.0)


def power_for_rate(r: float, profile: DeviceProfile, gain: float | None = None) -> float:
    """Minimum transmit power achieving rate ``r`` (inverse of transmission_rate)."""
    if r < 0:
        raise ValueError("rate must be non-negative")
    h = profile.channel_gain if gain is None else gain
    return math.expm1(r / profile.bandwidth_hz * math.log(2.0)) * \
        (profile.noise_watts + profile.interference_watts) / h


def transmission_energy(p_watts: float, duration_s: float) -> float:
    if duration_s < 0:
        raise ValueError("duration must be non-negative")
    return p_watts * duration_s


def total_energy(compute_joules, transmit_joules) -> float:
    """Sum of compute energy over every device and transmit energy over mobiles."""
    return float(math.fsum(compute_joules) + math.fsum(transmit_joules))


# --- latency ----------------------------------------------------------------

def work_duration_ms(work: float, rates, step_ms: float, start_ms: float = 0.0) -> float:
    """Time needed to push ``work`` units through a per-step rate series (units/s),
    starting at ``start_ms``. The last rate extends indefinitely."""
    if work <= 0:
        return 0.0
    rates = np.asarray(rates, dtype=float)
    if np.any(rates < 0):
        raise ValueError("rates must be non-negative")
    k = int(start_ms // step_ms)
    t = start_ms
    left = float(work)
    while k < len(rates):
        span_ms = (k + 1) * step_ms - t
        cap = rates[k] * span_ms / 1000.0
        if cap >= left:
            return t + left / rates[k] * 1000.0 - start_ms
        left -= cap
        t = (k + 1) * step_ms
        k += 1
    last = rates[-1] if len(rates) else 0.0
    if last <= 0:
        raise StallError(f"{left} units left with zero rate")
    return t + left / last * 1000.0 - start_ms


def transfer_latency(data_in_bits: float, data_out_bits: float, x_dow: bool, x_up: bool,
                     down_rates, up_rates, step_ms: float,
                     down_start_ms: float = 0.0, up_start_ms: float = 0.0) -> float:
    """Download latency (when dependent data lives elsewhere) plus upload latency
    (when a consumer lives elsewhere), in ms."""
    total = 0.0
    if x_dow:
        total += work_duration_ms(data_in_bits, down_rates, step_ms, down_start_ms)
    if x_up:
        total += work_duration_ms(data_out_bits, up_rates, step_ms, up_start_ms)
    return total


def compute_latency(cycles: float, x_off: bool, server_rates, local_rates,
                    step_ms: float, start_ms: float = 0.0) -> float:
    """Execution time in ms at the (possibly time-varying) share of the chosen device."""
    rates = server_rates if x_off else local_rates
    if np.isscalar(rates):
        rates = [rates]
    return work_duration_ms(cycles, rates, step_ms, start_ms)


def average_latency(per_job_latencies) -> float:
    """Mean over applications of the summed (transfer + compute) subtask latency.

    ``per_job_latencies`` holds one sequence of (trans, comp) pairs per job.
    """
    jobs = list(per_job_latencies)
    if not jobs:
        raise ValueError("average latency over zero applications")
    return math.fsum(tr + co for job in jobs for tr, co in job) / len(jobs)


# --- load status and network usage -------------------------------------------

DEFAULT_LOAD_WEIGHTS = (0.7, 0.3)   # CPU, memory


def load_status(usage, step_ms: float, weights=DEFAULT_LOAD_WEIGHTS):
    """Per-device integrated weighted load and the cluster's RMS deviation.

    ``usage`` has shape (devices, indicators, steps) with fractions in [0, 1].
    Load integrates over seconds.
    """
    L = np.asarray(usage, dtype=float)
    w = np.asarray(weights, dtype=float)
    if L.ndim != 3 or L.shape[1] != len(w):
        raise ValueError(f"usage shape {L.shape} does not match {len(w)} indicators")
    if abs(w.sum() - 1.0) > 1e-9 or np.any(w < 0):
        raise ValueError("load weights must be non-negative and sum to 1")
    loads = np.einsum("k,dks->d", w, L) * (step_ms / 1000.0)
    ls = math.sqrt(np.mean((loads - loads.mean()) ** 2)) if len(loads) else 0.0
    return loads, ls


def rms_deviation(loads) -> float:
    loads = np.asarray(loads, dtype=float)
    return math.sqrt(np.mean((loads - loads.mean()) ** 2)) if loads.size else 0.0


def network_usage(total_bits: float, avg_latency_s: float, n_apps: int, window_s: float) -> float:
    if window_s <= 0:
        raise ValueError("window must be positive")
    return avg_latency_s * n_apps * total_bits / window_s


# --- reward normalisation -----------------------------------------------------

class RunningZScore:
    """Welford running mean/variance; ``update`` returns the z-score of the new value
    against the statistics including it."""

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self._m2 = 0.0

    @property
    def std(self) -> float:
        return math.sqrt(self._m2 / self.n) if self.n > 1 else 0.0

    def push(self, x: float) -> None:
        self.n += 1
        d = x - self.mean
        self.mean += d / self.n
        self._m2 += d * (x - self.mean)

    def z(self, x: float) -> float:
        s = self.std
        return (x - self.mean) / s if s > 0 else 0.0

    def update(self, x: float) -> float:
        self.push(x)
        return self.z(x)

    def state(self) -> dict:
        return {"n": self.n, "mean": self.mean, "m2": self._m2}


# --- event-log metrics --------------------------------------------------------

def union_length(intervals, lo: float = -math.inf, hi: float = math.inf) -> float:
    """Total length of the union of [a, b) intervals clipped to [lo, hi]."""
    total = 0.0
    cur_a = cur_b = None
    for a, b in sorted((max(a, lo), min(b, hi)) for a, b in intervals):
        if b <= a:
            continue
        if cur_b is None or a > cur_b:
            if cur_b is not None:
                total += cur_b - cur_a
            cur_a, cur_b = a, b
        else:
            cur_b = max(cur_b, b)
    if cur_b is not None:
        total += cur_b - cur_a
    return total


@dataclass
class SubtaskSpan:
    """Lifecycle of one subtask reconstructed from the event log."""
    key: str
    device: str | None = None
    submit: float | None = None
    exec_start: float | None = None
    exec_end: float | None = None
    cycles: float = 0.0
    downloads: list = field(default_factory=list)   # (start, end, sender, bits)
    uploads: list = field(default_factory=list)

    @property
    def placed_at(self) -> float | None:
        starts = [d[0] for d in self.downloads]
        if self.exec_start is not None:
            starts.append(self.exec_start)
        return min(starts) if starts else None

    @property
    def trans_ms(self) -> float:
        return sum(e - s for s, e, _, _ in self.downloads + self.uploads)

    @property
    def comp_ms(self) -> float:
        if self.exec_start is None or self.exec_end is None:
            return 0.0
        return self.exec_end - self.exec_start


def spans_from_log(events) -> dict[str, SubtaskSpan]:
    spans: dict[str, SubtaskSpan] = {}
    open_tx: dict[str, tuple] = {}
    for ev in events:
        sp = spans.setdefault(ev.subtask, SubtaskSpan(ev.subtask))
        if ev.kind == "submit":
            sp.submit = ev.time_ms
        elif ev.kind == "transfer_start":
            open_tx[ev.subtask] = (ev.time_ms, ev.device, ev.quantity)
        elif ev.kind == "transfer_end":
            start, sender, bits = open_tx.pop(ev.subtask)
            rec = (start, ev.time_ms, sender, ev.quantity)
            (sp.uploads if sp.exec_end is not None else sp.downloads).append(rec)
        elif ev.kind == "exec_start":
            sp.exec_start = ev.time_ms
            sp.device = ev.device
        elif ev.kind == "exec_end":
            sp.exec_end = ev.time_ms
            sp.cycles = ev.quantity
    return spans


def energy_from_log(events, devices, lo_ms: float = 0.0, hi_ms: float = math.inf):
    """(compute joules per device, transmit joules per mobile) over [lo, hi] ms.

    ``devices`` maps device id to DeviceProfile. A device draws K * P_full while
    at least one subtask executes on it; a mobile radio draws its transmit power
    while at least one of its transfers is in flight.
    """
    spans = spans_from_log(events)
    exec_iv = defaultdict(list)
    radio_iv = defaultdict(list)
    for sp in spans.values():
        if sp.exec_start is not None:
            end = sp.exec_end if sp.exec_end is not None else math.inf
            exec_iv[sp.device].append((sp.exec_start, end))
        for s, e, sender, _ in sp.downloads + sp.uploads:
            radio_iv[sender].append((s, e))
    comp = {d: p.k_ratio * p.p_full_watts * union_length(exec_iv[d], lo_ms, hi_ms) / 1000.0
            for d, p in devices.items()}
    trans = {d: p.tx_power_watts * union_length(radio_iv[d], lo_ms, hi_ms) / 1000.0
             for d, p in devices.items() if p.kind == "mobile"}
    return comp, trans


def loads_from_log(events, devices, mem_req: dict, lo_ms: float, hi_ms: float,
                   weights=DEFAULT_LOAD_WEIGHTS) -> dict[str, float]:
    """Integrated weighted load per device: CPU busy indicator and reserved memory
    fraction, over [lo, hi] ms, in load-seconds."""
    spans = spans_from_log(events)
    busy = defaultdict(list)
    mem = defaultdict(float)
    for sp in spans.values():
        if sp.exec_start is None:
            continue
        end = sp.exec_end if sp.exec_end is not None else hi_ms
        busy[sp.device].append((sp.exec_start, end))
        held = max(0.0, min(end, hi_ms) - max(sp.placed_at, lo_ms))
        mem[sp.device] += mem_req[sp.key] * held
    w_cpu, w_mem = weights
    return {d: (w_cpu * union_length(busy[d], lo_ms, hi_ms)
                + w_mem * mem[d] / p.mem_bytes) / 1000.0
            for d, p in devices.items()}


def transferred_bits_from_log(events, keys=None) -> float:
    return math.fsum(ev.quantity for ev in events if ev.kind == "transfer_end"
                     and (keys is None or ev.subtask in keys))


# --- reports ------------------------------------------------------------------

REPORT_COLUMNS = ("energy_j", "avg_latency_ms", "load_status", "network_usage", "makespan_ms")


@dataclass
class MetricsReport:
    energy_j: float
    avg_latency_ms: float
    load_status: float
    network_usage: float
    makespan_ms: dict            # job id -> completion minus submission
    service_times: np.ndarray    # devices x job blocks, executed-subtask counts
    device_ids: list
    total_bits: float = 0.0
    window_ms: float = 0.0
    n_jobs: int = 0

    def row(self) -> dict:
        ms = list(self.makespan_ms.values())
        return {
            "n_jobs": self.n_jobs,
            "energy_j": self.energy_j,
            "avg_latency_ms": self.avg_latency_ms,
            "load_status": self.load_status,
            "network_usage": self.network_usage,
            "makespan_ms": float(np.mean(ms)) if ms else 0.0,
        }

    def summary(self) -> dict:
        d = self.row()
        d.update(total_bits=self.total_bits, window_ms=self.window_ms,
                 makespan_by_job=self.makespan_ms,
                 service_times={dev: self.service_times[i].tolist()
                                for i, dev in enumerate(self.device_ids)})
        return d


def placement_entropy(counts) -> float:
    """Shannon entropy (nats) of a placement count vector; 0 for an empty one."""
    c = np.asarray(counts, dtype=float).ravel()
    total = c.sum()
    if total <= 0:
        return 0.0
    p = c[c > 0] / total
    return float(-(p * np.log(p)).sum())


def top_share(counts, frac: float) -> float:
    """Share of placements landing on the first ``ceil(frac * len(counts))`` entries."""
    c = np.asarray(counts, dtype=float).ravel()
    if c.sum() <= 0:
        return 0.0
    k = max(1, math.ceil(frac * c.size))
    return float(c[:k].sum() / c.sum())


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["n_jobs", *REPORT_COLUMNS], lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerow({k: repr(float(v)) if isinstance(v, float) else v for k, v in r.row().items()})
    return buf.getvalue()


def report_from_log(events, jobs, devices: dict, step_ms: float, hi_ms: float | None = None,
                    block_size: int = 10, weights=DEFAULT_LOAD_WEIGHTS) -> MetricsReport:
    """Metrics for ``jobs`` recomputed from the event log over [0, hi_ms].

    ``hi_ms`` defaults to the completion time of the last of ``jobs``. Energy
    and load status cover every device over that window; latency, transferred
    data and makespan cover only the given jobs.
    """
    spans = spans_from_log(events)
    job_keys = {j.job_id: [f"{j.job_id}/{s.id}" for s in j.subtasks] for j in jobs}
    makespan = {}
    finish = {}
    for j in jobs:
        ks = job_keys[j.job_id]
        ends = []
        for k in ks:
            sp = spans.get(k)
            if sp is None or sp.exec_end is None:
                ends = None
                break
            ends.append(max([sp.exec_end] + [u[1] for u in sp.uploads]))
        if ends is not None:
            sub = spans[ks[0]].submit
            finish[j.job_id] = max(ends)
            makespan[j.job_id] = max(ends) - sub
    if hi_ms is None:
        hi_ms = max(finish.values(), default=0.0)
    comp, trans = energy_from_log(events, devices, 0.0, hi_ms)
    energy = total_energy(comp.values(), trans.values())
    per_job = [[(spans[k].trans_ms, spans[k].comp_ms) for k in job_keys[j.job_id] if k in spans]
               for j in jobs]
    avg_lat = average_latency(per_job) if per_job else 0.0
    mem_req = {f"{j.job_id}/{s.id}": s.mem_req for j in jobs for s in j.subtasks}
    for sp in spans.values():
        mem_req.setdefault(sp.key, 0.0)
    if hi_ms > 0:
        loads = loads_from_log(events, devices, mem_req, 0.0, hi_ms, weights)
        ls = rms_deviation(list(loads.values()))
    else:
        ls = 0.0
    keys = {k for ks in job_keys.values() for k in ks}
    td = transferred_bits_from_log(events, keys)
    nu = network_usage(td, avg_lat / 1000.0, len(jobs), hi_ms / 1000.0) if hi_ms > 0 else 0.0
    dev_ids = list(devices)
    n_blocks = max(1, -(-len(jobs) // block_size))
    st = np.zeros((len(dev_ids), n_blocks), dtype=int)
    index = {d: i for i, d in enumerate(dev_ids)}
    for b, j in enumerate(jobs):
        for k in job_keys[j.job_id]:
            sp = spans.get(k)
            if sp is not None and sp.exec_end is not None:
                st[index[sp.device], b // block_size] += 1
    return MetricsReport(energy_j=energy, avg_latency_ms=avg_lat, load_status=ls,
                         network_usage=nu, makespan_ms=makespan, service_times=st,
                         device_ids=dev_ids, total_bits=td, window_ms=hi_ms, n_jobs=len(jobs))
