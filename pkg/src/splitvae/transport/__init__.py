from .bus import InProcessBus
from .envelope import (
    DEC_BP_GATHER,
    DEC_FP_SCATTER,
    ENC_BP_SCATTER,
    ENC_FP_GATHER,
    PHASES,
    ROOT_RANK,
    Envelope,
)
from .ledger import PayloadLedger, PayloadReport, analytic_epoch_bytes, ledger_report
from .tensors import tensor_concat, tensor_split

__all__ = [
    "DEC_BP_GATHER",
    "DEC_FP_SCATTER",
    "ENC_BP_SCATTER",
    "ENC_FP_GATHER",
    "Envelope",
    "InProcessBus",
    "PHASES",
    "PayloadLedger",
    "PayloadReport",
    "ROOT_RANK",
    "analytic_epoch_bytes",
    "ledger_report",
    "tensor_concat",
    "tensor_split",
]
