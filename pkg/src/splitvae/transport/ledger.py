import threading
from dataclasses import dataclass

from splitvae.errors import ReportError
from splitvae.transport.envelope import FLOAT_BYTES, PHASES


class PayloadLedger:
    """Cumulative bytes moved by the collectives, per phase and per epoch.

    Only raw float64 payload is counted, no framing.
    """

    def __init__(self, raw_bytes: int = 0):
        self.raw_bytes = int(raw_bytes)
        self._lock = threading.Lock()
        self._epoch = 0
        self._phase_totals: dict[str, int] = {p: 0 for p in PHASES}
        self._epoch_phase: dict[tuple[int, str], int] = {}
        self._completed_epochs: list[int] = []

    def begin_epoch(self, epoch: int) -> None:
        with self._lock:
            self._epoch = int(epoch)

    def end_epoch(self) -> None:
        with self._lock:
            if self._epoch not in self._completed_epochs:
                self._completed_epochs.append(self._epoch)

    def credit(self, phase: str, nbytes: int) -> None:
        with self._lock:
            self._phase_totals[phase] += int(nbytes)
            key = (self._epoch, phase)
            self._epoch_phase[key] = self._epoch_phase.get(key, 0) + int(nbytes)

    @property
    def total(self) -> int:
        with self._lock:
            return sum(self._phase_totals.values())

    def phase_totals(self) -> dict[str, int]:
        with self._lock:
            return dict(self._phase_totals)

    def epoch_total(self, epoch: int) -> int:
        with self._lock:
            return sum(v for (e, _), v in self._epoch_phase.items() if e == epoch)

    @property
    def completed_epochs(self) -> list[int]:
        with self._lock:
            return list(self._completed_epochs)

    def rows(self) -> list[dict]:
        """One row per (epoch, phase) in protocol order, with the running total."""
        with self._lock:
            items = sorted(self._epoch_phase.items(), key=lambda kv: (kv[0][0], PHASES.index(kv[0][1])))
        out = []
        cumulative = 0
        for (epoch, phase), nbytes in items:
            cumulative += nbytes
            out.append({"epoch": epoch, "phase": phase, "bytes": nbytes, "cumulative_bytes": cumulative})
        return out


@dataclass(frozen=True)
class PayloadReport:
    phase_bytes: dict[str, int]
    total_bytes: int
    epoch_bytes: int
    raw_bytes: int
    reduction_factor: float


def ledger_report(ledger: PayloadLedger) -> PayloadReport:
    completed = ledger.completed_epochs
    if not completed:
        raise ReportError("payload report needs at least one completed epoch")
    epoch_bytes = ledger.epoch_total(completed[-1])
    if epoch_bytes == 0:
        raise ReportError("no bytes were transmitted in the last completed epoch")
    return PayloadReport(
        phase_bytes=ledger.phase_totals(),
        total_bytes=ledger.total,
        epoch_bytes=epoch_bytes,
        raw_bytes=ledger.raw_bytes,
        reduction_factor=ledger.raw_bytes / epoch_bytes,
    )


def analytic_epoch_bytes(batch_sizes: list[int], embed_dims: list[int]) -> int:
    """Bytes one epoch moves: four collectives per batch, each carrying ``B x embed`` per edge."""
    width = sum(embed_dims)
    return sum(len(PHASES) * b * width * FLOAT_BYTES for b in batch_sizes)
