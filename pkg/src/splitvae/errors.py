class SplitVaeError(Exception):
    """Base error. ``exit_code`` is what the CLI returns for it."""

    exit_code = 3


class ConfigError(SplitVaeError):
    exit_code = 2


class DataError(SplitVaeError):
    exit_code = 2


class DataParseError(DataError):
    def __init__(self, message: str, row: int | None = None, col: int | None = None):
        where = []
        if row is not None:
            where.append(f"row={row}")
        if col is not None:
            where.append(f"col={col}")
        super().__init__(f"{message} ({' '.join(where)})" if where else message)
        self.row = row
        self.col = col


class MissingArtifactError(SplitVaeError):
    exit_code = 2


class DimensionError(SplitVaeError, ValueError):
    pass


class InsufficientSamplesError(SplitVaeError, ValueError):
    pass


class NotPsdError(SplitVaeError, ValueError):
    pass


class NumericError(SplitVaeError):
    pass


class ProtocolError(SplitVaeError):
    pass


class ProtocolOrderError(ProtocolError):
    pass


class CollectiveTimeoutError(ProtocolError):
    def __init__(self, phase: str, missing: list[int], timeout: float):
        super().__init__(f"collective {phase} timed out after {timeout}s waiting for ranks {missing}")
        self.phase = phase
        self.missing = missing


class ModelStateError(SplitVaeError):
    pass


class ReportError(SplitVaeError):
    pass


class TrainingError(SplitVaeError):
    def __init__(self, epoch: int, batch: int, rank: int | None, cause: BaseException):
        who = "server" if rank in (None, 0) else f"rank={rank}"
        super().__init__(f"training aborted epoch={epoch} batch={batch} {who}: {cause}")
        self.epoch = epoch
        self.batch = batch
        self.rank = rank
        self.cause = cause
        if isinstance(cause, SplitVaeError):
            self.exit_code = cause.exit_code
