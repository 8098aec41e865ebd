"""Load-balance counters per place and their max/min/avg aggregation."""
import json
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, List, Optional

# Counters that go into the max/min/avg load report.
LOAD_METRICS = (
    "outgoing_terms",
    "local_terms",
    "misses",
    "hits",
    "processed_terms",
    "received_bytes",
    "received_records",
    "parsed_terms",
    "encoded_statements",
)


@dataclass
class MetricCounters:
    """Counters of one place, accumulated over the whole run.

    ``outgoing_terms`` counts only terms pushed to a *different* place;
    self-destined terms are counted in ``local_terms``. ``received_bytes``
    and ``received_records`` cover term frames from remote origins.
    """

    outgoing_terms: int = 0
    local_terms: int = 0
    misses: int = 0
    hits: int = 0
    processed_terms: int = 0
    received_bytes: int = 0
    received_records: int = 0
    parsed_terms: int = 0
    encoded_statements: int = 0
    phase_seconds: Dict[str, float] = field(default_factory=dict)

    @property
    def miss_ratio(self) -> Optional[float]:
        total = self.hits + self.misses
        if total == 0:
            return None
        return self.misses / total

    def add_time(self, phase, seconds):
        self.phase_seconds[phase] = self.phase_seconds.get(phase, 0.0) + seconds

    def snapshot(self):
        return MetricCounters(**{f.name: getattr(self, f.name) for f in fields(self)}).to_dict()

    def to_dict(self):
        d = asdict(self)
        d["miss_ratio"] = self.miss_ratio
        return d

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


@dataclass
class MetricSummary:
    max: float
    min: float
    avg: float
    total: float

    @property
    def skew(self) -> float:
        """max/avg; 1.0 when every place is idle."""
        if self.avg == 0:
            return 1.0
        return self.max / self.avg


@dataclass
class LoadReport:
    places: int
    metrics: Dict[str, MetricSummary]
    miss_ratio: Optional[MetricSummary] = None

    def to_dict(self):
        out = {"places": self.places, "metrics": {}}
        for name, s in self.metrics.items():
            out["metrics"][name] = {**asdict(s), "skew": s.skew}
        if self.miss_ratio is not None:
            out["miss_ratio"] = {**asdict(self.miss_ratio), "skew": self.miss_ratio.skew}
        return out


def _summary(values) -> MetricSummary:
    if not values:
        return MetricSummary(0, 0, 0.0, 0)
    total = sum(values)
    return MetricSummary(max(values), min(values), total / len(values), total)


def aggregate(counters: List[MetricCounters]) -> LoadReport:
    report = LoadReport(len(counters), {name: _summary([getattr(c, name) for c in counters]) for name in LOAD_METRICS})
    ratios = [c.miss_ratio for c in counters if c.miss_ratio is not None]
    if ratios:
        report.miss_ratio = _summary(ratios)
    return report


def throughput(statements, plain_bytes, seconds):
    if seconds <= 0:
        return {"statements_per_s": 0.0, "mb_per_s": 0.0}
    return {"statements_per_s": statements / seconds, "mb_per_s": plain_bytes / seconds / 1e6}


def format_table(load: LoadReport) -> str:
    """Aligned text table with one row per metric."""
    header = ("metric", "max", "min", "avg", "total", "skew")
    rows = [header]
    items = list(load.metrics.items())
    if load.miss_ratio is not None:
        items.append(("miss_ratio", load.miss_ratio))
    for name, s in items:
        if isinstance(s, dict):
            s = MetricSummary(s["max"], s["min"], s["avg"], s["total"])
        rows.append((name, _fmt(s.max), _fmt(s.min), _fmt(s.avg), _fmt(s.total), f"{s.skew:.3f}"))
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = []
    for r in rows:
        lines.append("  ".join(r[0].ljust(widths[0]) if i == 0 else r[i].rjust(widths[i]) for i in range(len(r))))
    return "\n".join(lines)


def _fmt(v):
    if isinstance(v, float) and not v.is_integer():
        return f"{v:.3f}"
    return str(int(v))


def emit_report(load: LoadReport, run_report: Optional[dict] = None):
    """Return ``(json_text, table_text)`` for a load report and optional run report."""
    doc = {"load": load.to_dict()}
    if run_report is not None:
        doc["run"] = run_report
    text = format_table(load)
    if run_report is not None and "throughput" in run_report:
        tp = run_report["throughput"]
        text += f"\n\nthroughput: {tp['statements_per_s']:.0f} statements/s, {tp['mb_per_s']:.2f} MB/s"
    return json.dumps(doc, indent=2, sort_keys=True), text


def load_report_from_dict(d) -> LoadReport:
    metrics = {k: MetricSummary(v["max"], v["min"], v["avg"], v["total"]) for k, v in d["metrics"].items()}
    mr = d.get("miss_ratio")
    return LoadReport(d["places"], metrics, MetricSummary(mr["max"], mr["min"], mr["avg"], mr["total"]) if mr else None)
