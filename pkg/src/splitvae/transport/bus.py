"""In-process collective bus.

Every rank (0 = server/root, 1..N = edges) talks to the bus as if it were an
MPI communicator: edges deposit gather contributions and pick up scatter
parts, the root collects gathers and posts scatters. Calls block until the
rendezvous completes or the collective timeout fires.
"""

import logging
import threading

import numpy as np

from splitvae.errors import CollectiveTimeoutError, ProtocolError, ProtocolOrderError
from splitvae.transport.envelope import (
    GATHER_PHASES,
    PHASES,
    ROOT_RANK,
    SCATTER_PHASES,
    Envelope,
)
from splitvae.transport.ledger import PayloadLedger

logger = logging.getLogger(__name__)


class InProcessBus:
    def __init__(
        self,
        n_edges: int,
        ledger: PayloadLedger | None = None,
        timeout: float = 30.0,
        record: bool = False,
    ):
        if n_edges < 1:
            raise ProtocolError(f"bus needs at least one edge rank, got {n_edges}")
        self.root = ROOT_RANK
        self.edge_ranks = list(range(1, n_edges + 1))
        self.ledger = ledger or PayloadLedger()
        self.timeout = timeout
        self.record = record
        self.envelopes: list[Envelope] = []
        self._cond = threading.Condition()
        self._gathers: dict[str, dict[int, np.ndarray]] = {p: {} for p in GATHER_PHASES}
        self._scatters: dict[str, dict[int, np.ndarray]] = {p: {} for p in SCATTER_PHASES}
        self._cursor: dict[int, int] = {r: 0 for r in [self.root, *self.edge_ranks]}
        self._failure: BaseException | None = None

    @property
    def n_edges(self) -> int:
        return len(self.edge_ranks)

    def abort(self, exc: BaseException) -> None:
        """Wakes every waiting rank; they re-raise ``exc`` wrapped in a ProtocolError."""
        with self._cond:
            if self._failure is None:
                self._failure = exc
            self._cond.notify_all()

    def _check_alive(self) -> None:
        if self._failure is not None:
            raise ProtocolError(f"bus aborted: {self._failure}")

    def _advance(self, rank: int, phase: str) -> None:
        if rank not in self._cursor:
            raise ProtocolError(f"unknown rank {rank}")
        expected = PHASES[self._cursor[rank] % len(PHASES)]
        if phase != expected:
            raise ProtocolOrderError(f"rank={rank} called {phase}, expected {expected}")
        self._cursor[rank] += 1

    def _log(self, envelopes: list[Envelope]) -> None:
        if self.record:
            self.envelopes.extend(envelopes)

    def _wait(self, predicate, phase: str, missing) -> None:
        ok = self._cond.wait_for(lambda: self._failure is not None or predicate(), timeout=self.timeout)
        self._check_alive()
        if not ok:
            absent = missing()
            logger.error("collective timeout phase=%s missing_ranks=%s", phase, absent)
            raise CollectiveTimeoutError(phase, absent, self.timeout)

    # edge side

    def send_gather(self, rank: int, phase: str, payload: np.ndarray) -> None:
        if phase not in GATHER_PHASES:
            raise ProtocolError(f"{phase} is not a gather phase")
        if rank == self.root:
            raise ProtocolError("root does not contribute to its own gather")
        with self._cond:
            self._check_alive()
            box = self._gathers[phase]
            if rank in box:
                raise ProtocolError(f"duplicate {phase} contribution from rank {rank}")
            self._advance(rank, phase)
            box[rank] = np.array(payload, dtype=np.float64, copy=True)
            self._cond.notify_all()

    def recv_scatter(self, rank: int, phase: str) -> np.ndarray:
        if phase not in SCATTER_PHASES:
            raise ProtocolError(f"{phase} is not a scatter phase")
        with self._cond:
            self._check_alive()
            self._advance(rank, phase)
            box = self._scatters[phase]
            self._wait(lambda: rank in box, phase, lambda: [self.root])
            return box.pop(rank)

    # root side

    def gather(self, root: int, phase: str) -> list[np.ndarray]:
        """Blocks until every edge contributed; returns payloads in ascending rank order."""
        if root != self.root:
            raise ProtocolError(f"rank {root} is not the root")
        if phase not in GATHER_PHASES:
            raise ProtocolError(f"{phase} is not a gather phase")
        with self._cond:
            self._check_alive()
            self._advance(root, phase)
            box = self._gathers[phase]
            self._wait(
                lambda: all(r in box for r in self.edge_ranks),
                phase,
                lambda: [r for r in self.edge_ranks if r not in box],
            )
            parts = [box.pop(r) for r in self.edge_ranks]
            envelopes = [Envelope(r, root, phase, p) for r, p in zip(self.edge_ranks, parts)]
            self.ledger.credit(phase, sum(e.byte_size for e in envelopes))
            self._log(envelopes)
            return parts

    def scatter(self, root: int, phase: str, parts: list[np.ndarray]) -> None:
        if root != self.root:
            raise ProtocolError(f"rank {root} is not the root")
        if phase not in SCATTER_PHASES:
            raise ProtocolError(f"{phase} is not a scatter phase")
        if len(parts) != self.n_edges:
            raise ProtocolError(f"scatter got {len(parts)} parts for {self.n_edges} edge ranks")
        with self._cond:
            self._check_alive()
            box = self._scatters[phase]
            if box:
                raise ProtocolError(f"previous {phase} not yet consumed by ranks {sorted(box)}")
            self._advance(root, phase)
            envelopes = []
            for rank, part in zip(self.edge_ranks, parts):
                payload = np.array(part, dtype=np.float64, copy=True)
                box[rank] = payload
                envelopes.append(Envelope(root, rank, phase, payload))
            self.ledger.credit(phase, sum(e.byte_size for e in envelopes))
            self._log(envelopes)
            self._cond.notify_all()
