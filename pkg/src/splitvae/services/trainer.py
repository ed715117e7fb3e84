import logging
import math
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from splitvae.core import LossReport, RngStream
from splitvae.errors import ConfigError, ModelStateError, NumericError, SplitVaeError, TrainingError
from splitvae.services.edge_agent import EdgeAgent
from splitvae.services.server_agent import ServerAgent
from splitvae.settings import TrainConfig
from splitvae.transport import InProcessBus, PayloadLedger

logger = logging.getLogger(__name__)


class LossChannel:
    """Out-of-protocol channel where edges post their per-batch reconstruction losses."""

    def __init__(self):
        self._lock = threading.Lock()
        self._items: dict[tuple[int, int, int], float] = {}

    def post(self, epoch: int, batch: int, rank: int, loss: float) -> None:
        with self._lock:
            self._items[(epoch, batch, rank)] = loss

    def batch_sum(self, epoch: int, batch: int) -> float:
        with self._lock:
            return sum(v for (e, b, _), v in sorted(self._items.items()) if e == epoch and b == batch)

    def edge_epoch_means(self, epoch: int) -> dict[int, float]:
        with self._lock:
            per_rank: dict[int, list[float]] = {}
            for (e, _, rank), v in sorted(self._items.items()):
                if e == epoch:
                    per_rank.setdefault(rank, []).append(v)
        return {rank: float(np.mean(vs)) for rank, vs in per_rank.items()}


@dataclass
class TrainResult:
    losses: list[LossReport]
    edge_losses: list[dict] = field(default_factory=list)
    ledger: PayloadLedger | None = None
    batch_sizes: list[int] = field(default_factory=list)
    seconds: float = 0.0


def batch_plan(n_rows: int, batch_size: int) -> list[int]:
    """Contiguous batch sizes covering every row once; the last batch may be short."""
    if batch_size > n_rows:
        raise ConfigError(f"batch_size {batch_size} exceeds the {n_rows} training rows")
    n_batches = math.ceil(n_rows / batch_size)
    return [min(batch_size, n_rows - b * batch_size) for b in range(n_batches)]


class SplitTrainer:
    def __init__(
        self,
        agents: list[EdgeAgent],
        server: ServerAgent,
        cfg: TrainConfig,
        bus: InProcessBus | None = None,
        threaded: bool = True,
        timeout: float = 30.0,
    ):
        if not agents:
            raise ConfigError("training needs at least one edge agent")
        rows = {a.n_rows for a in agents}
        if len(rows) != 1:
            raise ConfigError(f"edge silos disagree on row count: {sorted(rows)}")
        ranks = [a.rank for a in agents]
        if ranks != list(range(1, len(agents) + 1)):
            raise ConfigError(f"edge ranks must be 1..N in order, got {ranks}")
        if list(server.dims) != ranks or server.dim_list != [a.embed_dim for a in agents]:
            raise ConfigError(f"server dims map {server.dims} does not match edge embeddings")
        self.agents = agents
        self.server = server
        self.cfg = cfg
        self.threaded = threaded
        raw = sum(a.silo.nbytes for a in agents)
        self.bus = bus or InProcessBus(len(agents), ledger=PayloadLedger(raw), timeout=timeout)
        if self.bus.ledger.raw_bytes == 0:
            self.bus.ledger.raw_bytes = raw
        self.batches = batch_plan(agents[0].n_rows, cfg.batch_size)
        self.channel = LossChannel()
        self.losses: list[LossReport] = []
        self.edge_losses: list[dict] = []
        self._kl: dict[tuple[int, int], float] = {}

    # per-rank steps

    def _edge_fp(self, agent: EdgeAgent, epoch: int, b: int) -> None:
        agent.edge_enc_fp(self.bus, b, self.cfg.batch_size)

    def _edge_mid(self, agent: EdgeAgent, epoch: int, b: int) -> None:
        loss = agent.edge_dec_fp(self.bus)
        self.channel.post(epoch, b, agent.rank, loss)
        agent.edge_dec_bp(self.bus)

    def _server_batch(self, epoch: int, b: int) -> None:
        self._kl[(epoch, b)] = self.server.vae_server_fp(self.bus, epoch, b)

    def _close_epoch(self, epoch: int) -> None:
        n = len(self.batches)
        bc = sum(self.channel.batch_sum(epoch, b) for b in range(n)) / n
        kl = sum(self._kl[(epoch, b)] for b in range(n)) / n
        report = LossReport(bc_loss=bc, kl_loss=kl)
        if not math.isfinite(report.total):
            raise NumericError(f"non-finite training loss at epoch {epoch}")
        self.losses.append(report)
        for rank, value in self.channel.edge_epoch_means(epoch).items():
            self.edge_losses.append({"epoch": epoch, "rank": rank, "bc_loss": value})
            logger.debug("edge_loss epoch=%s rank=%s bc=%.6f", epoch, rank, value)
        self.bus.ledger.end_epoch()
        logger.info("epoch done epoch=%s bc=%.6f kl=%.6f total=%.6f", epoch, bc, kl, report.total)

    # drivers

    def _run_lockstep(self) -> None:
        for epoch in range(self.cfg.epochs):
            self.bus.ledger.begin_epoch(epoch)
            for b in range(len(self.batches)):
                rank = None
                try:
                    for agent in self.agents:
                        rank = agent.rank
                        self._edge_fp(agent, epoch, b)
                    rank = self.server.rank
                    self._server_batch(epoch, b)
                    for agent in self.agents:
                        rank = agent.rank
                        self._edge_mid(agent, epoch, b)
                    rank = self.server.rank
                    self.server.vae_server_bp(self.bus)
                    for agent in self.agents:
                        rank = agent.rank
                        agent.edge_enc_bp(self.bus)
                except SplitVaeError as exc:
                    raise TrainingError(epoch, b, rank, exc) from exc
            try:
                self._close_epoch(epoch)
            except SplitVaeError as exc:
                raise TrainingError(epoch, len(self.batches) - 1, self.server.rank, exc) from exc

    def _run_threaded(self) -> None:
        errors: list[TrainingError] = []
        errors_lock = threading.Lock()

        def fail(epoch: int, b: int, rank: int, exc: BaseException) -> None:
            with errors_lock:
                errors.append(TrainingError(epoch, b, rank, exc))
            self.bus.abort(exc)

        def edge_worker(agent: EdgeAgent) -> None:
            epoch = b = 0
            try:
                for epoch in range(self.cfg.epochs):
                    for b in range(len(self.batches)):
                        self._edge_fp(agent, epoch, b)
                        self._edge_mid(agent, epoch, b)
                        agent.edge_enc_bp(self.bus)
            except BaseException as exc:
                fail(epoch, b, agent.rank, exc)

        def server_worker() -> None:
            epoch = b = 0
            try:
                for epoch in range(self.cfg.epochs):
                    self.bus.ledger.begin_epoch(epoch)
                    for b in range(len(self.batches)):
                        self._server_batch(epoch, b)
                        self.server.vae_server_bp(self.bus)
                    self._close_epoch(epoch)
            except BaseException as exc:
                fail(epoch, b, self.server.rank, exc)

        threads = [threading.Thread(target=server_worker, name="rank-0-server", daemon=True)]
        threads += [
            threading.Thread(target=edge_worker, args=(a,), name=f"rank-{a.rank}-edge", daemon=True)
            for a in self.agents
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        if errors:
            raise errors[0]

    def train(self) -> TrainResult:
        started = time.perf_counter()
        logger.info(
            "train started edges=%s rows=%s batches=%s epochs=%s threaded=%s",
            len(self.agents),
            self.agents[0].n_rows,
            len(self.batches),
            self.cfg.epochs,
            self.threaded,
        )
        if self.threaded:
            self._run_threaded()
        else:
            self._run_lockstep()
        for agent in self.agents:
            agent.trained = True
        self.server.trained = True
        elapsed = time.perf_counter() - started
        logger.info("train done epochs=%s seconds=%.2f bytes=%s", self.cfg.epochs, elapsed, self.bus.ledger.total)
        return TrainResult(
            losses=list(self.losses),
            edge_losses=list(self.edge_losses),
            ledger=self.bus.ledger,
            batch_sizes=list(self.batches),
            seconds=elapsed,
        )


def train(
    agents: list[EdgeAgent],
    server: ServerAgent,
    cfg: TrainConfig,
    bus: InProcessBus | None = None,
    threaded: bool = True,
    timeout: float = 30.0,
) -> TrainResult:
    return SplitTrainer(agents, server, cfg, bus=bus, threaded=threaded, timeout=timeout).train()


def generate_scenarios(
    agents: list[EdgeAgent],
    server: ServerAgent,
    count: int,
    rng: RngStream,
    original_units: bool = True,
) -> list[np.ndarray]:
    """Samples z ~ N(0, I), decodes at the server, then at each edge."""
    if not server.trained or not all(a.trained for a in agents):
        raise ModelStateError("scenario generation needs trained or loaded parameters")
    if count < 0:
        raise ConfigError(f"count must be >= 0, got {count}")
    if count == 0:
        return [np.empty((0, a.width)) for a in agents]
    z = rng.standard_normal((count, server.latent_dim))
    parts = server.decode_latent(z)
    return [agent.decode(part, original_units=original_units) for agent, part in zip(agents, parts)]
