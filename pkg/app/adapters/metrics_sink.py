import csv

from pathlib import Path
from typing import Sequence

from app.domain.models import EpisodeMetrics

SLOT_TRACE_HEADER = ["interval", "slot", "slice", "user", "rate_bps", "delivered_bits", "queue_length"]


class CsvMetricsSink:
    """Streams one metrics row per episode; rows are flushed as they arrive."""

    def __init__(self, path: Path, slice_names: Sequence[str]) -> None:
        self._slice_names = list(slice_names)
        self._handle = Path(path).open("w", newline="", encoding="utf-8")
        self._writer = csv.writer(self._handle, lineterminator="\n")
        self._writer.writerow(EpisodeMetrics.csv_header(self._slice_names))

    def write(self, metrics: EpisodeMetrics) -> None:
        self._writer.writerow(metrics.csv_row(self._slice_names))
        self._handle.flush()

    def close(self) -> None:
        if not self._handle.closed:
            self._handle.close()

    def __enter__(self) -> "CsvMetricsSink":
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()


class MemorySink:
    def __init__(self) -> None:
        self.rows: list[EpisodeMetrics] = []

    def write(self, metrics: EpisodeMetrics) -> None:
        self.rows.append(metrics)


class CsvSlotTrace:
    """Per-slot scheduler decisions, for debugging the link simulator."""

    def __init__(self, path: Path) -> None:
        self._handle = Path(path).open("w", newline="", encoding="utf-8")
        self._writer = csv.writer(self._handle, lineterminator="\n")
        self._writer.writerow(SLOT_TRACE_HEADER)

    def record(
        self,
        *,
        interval: int,
        slot: int,
        slice_name: str,
        user: int,
        rate_bps: float,
        delivered_bits: float,
        queue_length: int,
    ) -> None:
        self._writer.writerow([interval, slot, slice_name, user, rate_bps, delivered_bits, queue_length])

    def close(self) -> None:
        if not self._handle.closed:
            self._handle.close()

    def __enter__(self) -> "CsvSlotTrace":
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()
