from .silos import parse_embed_dim, parse_int_list, parse_silo_spec

__all__ = ["parse_embed_dim", "parse_int_list", "parse_silo_spec"]
