import re

from splitvae.errors import ConfigError


UNIFORM_RE = re.compile(r"uniform\s*[:\s]\s*(\d+)", re.IGNORECASE)
INT_LIST_RE = re.compile(r"\d+(\s*,\s*\d+)*")


def parse_int_list(value: str, what: str = "value") -> list[int]:
    text = (value or "").strip()
    if not INT_LIST_RE.fullmatch(text):
        raise ConfigError(f"{what}: expected comma-separated integers, got {value!r}")
    return [int(part) for part in text.split(",")]


def parse_silo_spec(value) -> tuple[str, int | list[int]]:
    """``"uniform:3"`` / ``"uniform 3"`` -> ("uniform", 3); ``"4,7,9"`` or a list -> ("explicit", [4, 7, 9])."""
    if isinstance(value, (list, tuple)):
        dims = [int(v) for v in value]
        return "explicit", dims
    text = (value or "").strip()
    uniform = UNIFORM_RE.fullmatch(text)
    if uniform:
        return "uniform", int(uniform.group(1))
    return "explicit", parse_int_list(text, what="--silos")


def parse_embed_dim(value: str) -> int | tuple[int, ...]:
    dims = parse_int_list(value, what="--embed-dim")
    return dims[0] if len(dims) == 1 else tuple(dims)
