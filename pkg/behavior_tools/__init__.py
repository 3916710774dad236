"""Behaviour tools package initialization"""

from behavior_tools.ingest import filter_accounts, load_labels, parse_events
from behavior_tools.sequence import actions_only, build_pairs, decode_pair, encode_pair
from behavior_tools.trajectory import assemble_dataset, chunk_nonoverlapping, sliding_windows
from behavior_tools.synthgen import ArchetypeSpec, default_archetypes, generate_account, generate_dataset

__all__ = [
    "parse_events",
    "filter_accounts",
    "load_labels",
    "build_pairs",
    "encode_pair",
    "decode_pair",
    "actions_only",
    "chunk_nonoverlapping",
    "sliding_windows",
    "assemble_dataset",
    "ArchetypeSpec",
    "default_archetypes",
    "generate_account",
    "generate_dataset",
]
