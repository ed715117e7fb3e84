from dataclasses import dataclass, field

import numpy as np

ROOT_RANK = 0

ENC_FP_GATHER = "enc_fp_gather"
DEC_FP_SCATTER = "dec_fp_scatter"
DEC_BP_GATHER = "dec_bp_gather"
ENC_BP_SCATTER = "enc_bp_scatter"

# Fixed per-batch order of the four collectives.
PHASES = (ENC_FP_GATHER, DEC_FP_SCATTER, DEC_BP_GATHER, ENC_BP_SCATTER)
GATHER_PHASES = frozenset({ENC_FP_GATHER, DEC_BP_GATHER})
SCATTER_PHASES = frozenset({DEC_FP_SCATTER, ENC_BP_SCATTER})

FLOAT_BYTES = 8


def payload_bytes(payload: np.ndarray) -> int:
    return FLOAT_BYTES * int(np.prod(payload.shape))


@dataclass(frozen=True)
class Envelope:
    source: int
    dest: int
    phase: str
    payload: np.ndarray
    byte_size: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "byte_size", payload_bytes(self.payload))

    @property
    def width(self) -> int:
        return int(self.payload.shape[-1]) if self.payload.ndim else 1
