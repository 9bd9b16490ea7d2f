"""Shared fixtures: a small deterministic corpus and a prepared world.

Session scope keeps generation and detector training to one pass for the
whole suite; every consumer treats the fixtures as read-only.
"""

from __future__ import annotations

import pytest

from amg.corpus import CorpusSpec, generate
from amg.harness import World, prepare_world
from amg.pe_mods import BenignContentPool, build_pool

UNIT_SPEC = CorpusSpec(malicious=140, benign=80, seed=7)


@pytest.fixture(scope="session")
def corpus_files():
    return generate(UNIT_SPEC)


@pytest.fixture(scope="session")
def mal_bytes(corpus_files) -> list[bytes]:
    return [f.data for f in corpus_files if f.label == "malicious"]


@pytest.fixture(scope="session")
def ben_bytes(corpus_files) -> list[bytes]:
    return [f.data for f in corpus_files if f.label == "benign"]


@pytest.fixture(scope="session")
def pool(ben_bytes) -> BenignContentPool:
    return build_pool(ben_bytes)


@pytest.fixture(scope="session")
def world(mal_bytes, ben_bytes) -> World:
    return prepare_world(mal_bytes, ben_bytes, seed=1)
