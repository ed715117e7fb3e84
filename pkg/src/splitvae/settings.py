import hashlib
import json
import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from dotenv import load_dotenv

from splitvae.errors import ConfigError
from splitvae.utils import parse_silo_spec


BASE_DIR = Path(__file__).resolve().parents[2]
load_dotenv(BASE_DIR / ".env")


def _as_bool(value: str, default: bool = False) -> bool:
    if value is None:
        return default
    return value.strip().lower() in {"1", "true", "yes", "on"}


@dataclass(frozen=True)
class Settings:
    base_dir: Path
    out_dir: Path
    log_level: str
    collective_timeout: float
    threaded: bool

    @classmethod
    def from_env(cls) -> "Settings":
        return cls(
            base_dir=BASE_DIR,
            out_dir=Path(os.getenv("SPLITVAE_OUT", BASE_DIR / "runs")),
            log_level=os.getenv("SPLITVAE_LOG_LEVEL", "INFO").upper(),
            collective_timeout=float(os.getenv("SPLITVAE_COLLECTIVE_TIMEOUT", "30")),
            threaded=_as_bool(os.getenv("SPLITVAE_THREADED"), default=True),
        )


KL_FORMS = ("standard", "printed")
FID_FORMS = ("standard", "printed")


@dataclass(frozen=True)
class TrainConfig:
    """Run configuration. Defaults, then a JSON config file, then CLI flags."""

    epochs: int = 50
    batch_size: int = 64
    seed: int = 0
    gen_seed: int = 1
    latent_dim: int = 8
    # one width for every edge, or one per rank in rank order
    embed_dim: int | tuple[int, ...] = 8
    silos: str = "uniform:4"
    lr_edge_enc: float = 1e-2
    lr_edge_dec: float = 1e-2
    lr_server_enc: float = 1e-2
    lr_server_dec: float = 1e-2
    kl_form: str = "standard"
    fid_form: str = "standard"
    train_frac: float = 0.8
    edge_hidden: tuple[int, ...] = (64,)
    server_hidden: tuple[int, ...] = (128,)
    runs: int = 100
    data: str | None = None
    series_length: int | None = None
    synth_nodes: int = 8
    synth_steps: int = 24
    synth_samples: int = 2000
    synth_correlation: float = 0.6
    synth_temporal_correlation: float = 0.5
    synth_noise: float = 0.2

    @classmethod
    def field_names(cls) -> set[str]:
        return {f.name for f in fields(cls)}

    @classmethod
    def from_dict(cls, values: dict) -> "TrainConfig":
        unknown = sorted(set(values) - cls.field_names())
        if unknown:
            raise ConfigError(f"unknown config fields: {', '.join(unknown)}")
        cleaned = {}
        for key, value in values.items():
            if isinstance(value, list):
                value = tuple(value)
            cleaned[key] = value
        cfg = cls(**cleaned)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path: Path) -> "TrainConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"--config: file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--config: invalid JSON in {path}: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"--config: expected a JSON object in {path}")
        return cls.from_dict(raw)

    def with_overrides(self, **overrides) -> "TrainConfig":
        values = {k: v for k, v in overrides.items() if v is not None}
        unknown = sorted(set(values) - self.field_names())
        if unknown:
            raise ConfigError(f"unknown config fields: {', '.join(unknown)}")
        cfg = replace(self, **values)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        positive_ints = ("batch_size", "latent_dim", "runs", "synth_nodes", "synth_steps", "synth_samples")
        for name in positive_ints:
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        embeds = self.embed_dim if isinstance(self.embed_dim, tuple) else (self.embed_dim,)
        if not embeds or min(embeds) < 1:
            raise ConfigError(f"embed_dim must be >= 1, got {self.embed_dim}")
        for name in ("edge_hidden", "server_hidden"):
            if any(w < 1 for w in getattr(self, name)):
                raise ConfigError(f"{name} widths must be >= 1, got {getattr(self, name)}")
        for name in ("lr_edge_enc", "lr_edge_dec", "lr_server_enc", "lr_server_dec"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.kl_form not in KL_FORMS:
            raise ConfigError(f"kl_form must be one of {KL_FORMS}, got {self.kl_form!r}")
        if self.fid_form not in FID_FORMS:
            raise ConfigError(f"fid_form must be one of {FID_FORMS}, got {self.fid_form!r}")
        if not 0.0 < self.train_frac <= 1.0:
            raise ConfigError(f"train_frac must be in (0, 1], got {self.train_frac}")
        if not 0.0 <= self.synth_correlation < 1.0:
            raise ConfigError(f"synth_correlation must be in [0, 1), got {self.synth_correlation}")
        if not 0.0 <= self.synth_temporal_correlation < 1.0:
            raise ConfigError(
                f"synth_temporal_correlation must be in [0, 1), got {self.synth_temporal_correlation}"
            )
        parse_silo_spec(self.silos)
        if self.series_length is not None and self.series_length < 1:
            raise ConfigError(f"series_length must be >= 1, got {self.series_length}")

    def embed_dims_for(self, n_edges: int) -> list[int]:
        if isinstance(self.embed_dim, tuple):
            if len(self.embed_dim) != n_edges:
                raise ConfigError(f"embed_dim lists {len(self.embed_dim)} widths for {n_edges} edges")
            return [int(e) for e in self.embed_dim]
        return [int(self.embed_dim)] * n_edges

    def to_dict(self) -> dict:
        out = asdict(self)
        for key, value in out.items():
            if isinstance(value, tuple):
                out[key] = list(value)
        return out

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
