"""Benchmark metrics (delivery rate, cost, delay) and cross-run statistics.

All three metrics are computed from the same per-run counters for every
protocol, so comparisons stay apples-to-apples. Undefined values (e.g. cost
with zero deliveries) are reported as absent, never as 0.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field

# two-sided 95% Student-t quantiles (t_{0.975, df}); df > 30 falls back to
# the normal approximation 1.960
_T_TABLE = {
    1: 12.706, 2: 4.303, 3: 3.182, 4: 2.776, 5: 2.571, 6: 2.447, 7: 2.365,
    8: 2.306, 9: 2.262, 10: 2.228, 11: 2.201, 12: 2.179, 13: 2.160,
    14: 2.145, 15: 2.131, 16: 2.120, 17: 2.110, 18: 2.101, 19: 2.093,
    20: 2.086, 21: 2.080, 22: 2.074, 23: 2.069, 24: 2.064, 25: 2.060,
    26: 2.056, 27: 2.052, 28: 2.048, 29: 2.045, 30: 2.042,
}
_T_NORMAL = 1.960


class MetricsError(Exception):
    pass


def t_quantile(df: int) -> float:
    if df < 1:
        raise MetricsError("t quantile needs df >= 1")
    return _T_TABLE.get(df, _T_NORMAL)


def delivery_rate(delivered: int, created: int) -> float:
    """Delivered / created over the measurement window; 0/0 is 0 by convention."""
    if delivered < 0 or created < 0:
        raise MetricsError("counts must be non-negative")
    if delivered > created:
        raise MetricsError(f"delivered ({delivered}) exceeds created ({created})")
    if created == 0:
        return 0.0
    return delivered / created


def cost(replications: int, delivered: int) -> float | None:
    """Replica transfers per delivered message; undefined when nothing delivered.

    `replications` excludes the unavoidable delivery hops (completed
    transfers minus first-delivery transfers).
    """
    if replications < 0:
        raise MetricsError("replications must be non-negative")
    if delivered == 0:
        return None
    return replications / delivered


def mean_delay(delays: list[float]) -> float | None:
    """Mean creation-to-final-byte time; undefined with no deliveries."""
    if not delays:
        return None
    return sum(delays) / len(delays)


def confidence_interval(samples: list[float], level: float = 0.95) -> tuple[float, float | None]:
    """(mean, half-width) of the t-based CI; half-width absent for n < 2."""
    if level != 0.95:
        raise MetricsError("only the 0.95 level is tabulated")
    n = len(samples)
    if n == 0:
        raise MetricsError("confidence interval needs at least one sample")
    mean = sum(samples) / n
    if n < 2:
        return mean, None
    s = statistics.stdev(samples)
    return mean, t_quantile(n - 1) * s / math.sqrt(n)


# ---------------------------------------------------------------------------
# Report assembly

@dataclass(frozen=True)
class RunMetrics:
    seed: int
    created: int
    delivered: int
    forwardings: int  # completed transfers, delivery hops included
    delivery_rate: float
    cost: float | None
    mean_delay_s: float | None


@dataclass(frozen=True)
class ExperimentReport:
    experiment: str
    protocol: str
    ttl_hours: float
    runs: list[RunMetrics] = field(default_factory=list)

    def _samples(self, attr: str) -> list[float]:
        return [v for v in (getattr(r, attr) for r in self.runs) if v is not None]

    def aggregate(self) -> dict:
        """Means and 95% CI half-widths across runs (absent metrics excluded)."""
        out = {}
        for attr in ("created", "delivered", "forwardings",
                     "delivery_rate", "cost", "mean_delay_s"):
            samples = self._samples(attr)
            if not samples:
                out[attr] = (None, None)
                continue
            mean, half = confidence_interval([float(s) for s in samples]) \
                if len(samples) >= 2 else (float(samples[0]), None)
            out[attr] = (mean, half)
        return out


def run_metrics(result) -> RunMetrics:
    """Metric row for one RunResult."""
    delivered = result.delivered
    created = result.created
    delays = [rec.delivered_at - rec.created_at
              for rec in result.records if rec.delivered]
    return RunMetrics(
        seed=result.seed,
        created=created,
        delivered=delivered,
        forwardings=result.forwardings,
        delivery_rate=delivery_rate(delivered, created),
        cost=cost(max(result.forwardings - delivered, 0), delivered),
        mean_delay_s=mean_delay(delays),
    )


def build_report(experiment: str, protocol: str, ttl_hours: float,
                 results) -> ExperimentReport:
    return ExperimentReport(experiment=experiment, protocol=protocol,
                            ttl_hours=ttl_hours,
                            runs=[run_metrics(r) for r in results])


CSV_COLUMNS = ("experiment", "protocol", "ttl_hours", "seed", "created",
               "delivered", "forwardings", "delivery_rate", "cost",
               "mean_delay_s", "ci_delivery", "ci_cost", "ci_delay")


def _cell(value, fmt: str = "{:.6f}") -> str:
    if value is None:
        return ""
    if isinstance(value, int):
        return str(value)
    return fmt.format(value)


def render_csv(reports: list[ExperimentReport]) -> str:
    """Deterministic CSV text: per-run rows then one aggregate row per report."""
    if not reports:
        raise MetricsError("write_report needs at least one report")
    lines = [",".join(CSV_COLUMNS)]
    for rep in reports:
        base = f"{rep.experiment},{rep.protocol},{_cell(rep.ttl_hours, '{:g}')}"
        for r in rep.runs:
            lines.append(",".join([
                base, str(r.seed), str(r.created), str(r.delivered),
                str(r.forwardings), _cell(r.delivery_rate), _cell(r.cost),
                _cell(r.mean_delay_s, "{:.3f}"), "", "", "",
            ]))
        agg = rep.aggregate()
        lines.append(",".join([
            base, "aggregate",
            _cell(agg["created"][0], "{:.3f}"),
            _cell(agg["delivered"][0], "{:.3f}"),
            _cell(agg["forwardings"][0], "{:.3f}"),
            _cell(agg["delivery_rate"][0]),
            _cell(agg["cost"][0]),
            _cell(agg["mean_delay_s"][0], "{:.3f}"),
            _cell(agg["delivery_rate"][1]),
            _cell(agg["cost"][1]),
            _cell(agg["mean_delay_s"][1], "{:.3f}"),
        ]))
    return "\n".join(lines) + "\n"


def write_report(reports: list[ExperimentReport], path) -> None:
    """Emit the combined CSV; I/O failures carry the path."""
    text = render_csv(reports)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise MetricsError(f"cannot write report to {path}: {exc}") from exc
