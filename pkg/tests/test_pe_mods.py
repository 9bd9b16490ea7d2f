"""Rewrite actions: outcomes, effects, determinism, structural cleanliness."""

from __future__ import annotations

import pytest

from amg import pe_model
from amg.pe_mods import (
    ACTION_COUNT,
    ActionId,
    BenignContentPool,
    ModificationAction,
    Outcome,
    TIMESTAMP_STEP,
    action_from_name,
    apply_action,
    build_pool,
)

DIR_IMPORT = 1
DIR_SECURITY = 4
DIR_DEBUG = 6


def _first_with(corpus_files, want_quirk: str, present: bool) -> bytes:
    for f in corpus_files:
        if (want_quirk in f.planted["quirks"]) == present:
            return f.data
    raise AssertionError(f"no file with {want_quirk}={present}")


def test_action_registry_shape():
    assert ACTION_COUNT == 10
    assert [a.value for a in ActionId] == list(range(10))
    assert action_from_name("break_checksum") is ActionId.BREAK_CHECKSUM
    assert action_from_name("APPEND_NEW_IMPORT") is ActionId.APPEND_NEW_IMPORT
    with pytest.raises(ValueError):
        action_from_name("nope")


def test_break_checksum_zeroes_unconditionally(corpus_files, pool):
    raw = _first_with(corpus_files, "checksum", True)
    img = pe_model.parse(raw)
    assert img.optional.checksum != 0
    res = apply_action(img, ActionId.BREAK_CHECKSUM, pool, seed=1)
    assert res.outcome is Outcome.APPLIED
    assert res.image.optional.checksum == 0
    again = apply_action(res.image, ActionId.BREAK_CHECKSUM, pool, seed=2)
    assert again.outcome is Outcome.APPLIED
    assert again.image.optional.checksum == 0


def test_timestamp_actions_step_by_fixed_quantum(mal_bytes, pool):
    img = pe_model.parse(mal_bytes[0])
    before = img.coff.time_date_stamp
    up = apply_action(img, ActionId.INCREASE_TIMESTAMP, pool, seed=0)
    assert up.outcome is Outcome.APPLIED
    assert up.image.coff.time_date_stamp == before + TIMESTAMP_STEP
    down = apply_action(up.image, ActionId.DECREASE_TIMESTAMP, pool, seed=0)
    assert down.image.coff.time_date_stamp == before


def test_append_overlay_grows_tail_only(mal_bytes, pool):
    raw = mal_bytes[0]
    res = apply_action(pe_model.parse(raw), ActionId.APPEND_OVERLAY, pool, seed=5)
    assert res.outcome is Outcome.APPLIED
    out = pe_model.serialize(res.image)
    assert len(out) > len(raw)
    assert out[: len(raw)] == raw
    assert res.delta_bytes == len(out) - len(raw)


def test_remove_debug_clears_directory(corpus_files, pool):
    raw = _first_with(corpus_files, "debug", True)
    img = pe_model.parse(raw)
    assert img.directory(DIR_DEBUG).rva != 0
    res = apply_action(img, ActionId.REMOVE_DEBUG, pool, seed=0)
    assert res.outcome is Outcome.APPLIED
    assert res.image.directory(DIR_DEBUG).rva == 0
    assert res.image.directory(DIR_DEBUG).size == 0

    clean = _first_with(corpus_files, "debug", False)
    res = apply_action(pe_model.parse(clean), ActionId.REMOVE_DEBUG, pool, seed=0)
    assert res.outcome is Outcome.NOOP


def test_remove_certificate_excises_overlay_resident_table(corpus_files, pool):
    raw = _first_with(corpus_files, "certificate", True)
    img = pe_model.parse(raw)
    d = img.directory(DIR_SECURITY)
    assert d.rva != 0 and d.size != 0
    res = apply_action(img, ActionId.REMOVE_CERTIFICATE, pool, seed=0)
    assert res.outcome is Outcome.APPLIED
    out = pe_model.serialize(res.image)
    assert len(out) == len(raw) - d.size
    assert res.delta_bytes == -d.size
    cleared = res.image.directory(DIR_SECURITY)
    assert cleared.rva == 0 and cleared.size == 0
    assert raw[d.rva : d.rva + d.size] not in out

    clean = _first_with(corpus_files, "certificate", False)
    res = apply_action(pe_model.parse(clean), ActionId.REMOVE_CERTIFICATE, pool, seed=0)
    assert res.outcome is Outcome.NOOP


def test_rename_section_uses_pool_vocabulary(mal_bytes, pool):
    img = pe_model.parse(mal_bytes[0])
    res = apply_action(img, ActionId.RENAME_SECTION, pool, seed=3)
    assert res.outcome is Outcome.APPLIED
    stripped = {s.name.rstrip(b"\x00") for s in res.image.sections}
    vocab = {n[:8].rstrip(b"\x00") for n in pool.section_names}
    assert stripped & vocab
    assert all(len(s.name) == 8 for s in res.image.sections)


def test_add_new_section_appends_header_and_data(corpus_files, pool):
    for f in corpus_files:
        if f.planted["slack"] >= 40:
            raw = f.data
            break
    img = pe_model.parse(raw)
    n = len(img.sections)
    res = apply_action(img, ActionId.ADD_NEW_SECTION, pool, seed=4)
    assert res.outcome is Outcome.APPLIED
    assert len(res.image.sections) == n + 1
    assert res.image.coff.number_of_sections == n + 1
    out = pe_model.serialize(res.image)
    reparsed = pe_model.parse(out)
    assert len(reparsed.sections) == n + 1


def test_header_slack_governs_failed_outcomes(corpus_files, pool):
    """The two actions that need a fresh 40-byte header slot fail exactly on
    tight files, never on roomy ones."""
    for action in (ActionId.ADD_NEW_SECTION, ActionId.APPEND_NEW_IMPORT):
        for f in corpus_files[:80]:
            img = pe_model.parse(f.data)
            res = apply_action(img, action, pool, seed=9)
            failed = res.outcome is Outcome.FAILED
            assert failed == (f.planted["slack"] < 40), (f.name, action.name)


def test_append_new_import_adds_descriptor(corpus_files, pool):
    for f in corpus_files:
        if f.planted["slack"] >= 40:
            raw = f.data
            break
    img = pe_model.parse(raw)
    before = {d.dll_name for d in pe_model.parse_imports(img)}
    res = apply_action(img, ActionId.APPEND_NEW_IMPORT, pool, seed=11)
    assert res.outcome is Outcome.APPLIED
    out = pe_model.serialize(res.image)
    after = {d.dll_name for d in pe_model.parse_imports(pe_model.parse(out))}
    assert before < after
    added = after - before
    assert all(dll in pool.dll_catalog for dll in added)


def test_append_to_section_fills_slack_or_grows_tail(mal_bytes, pool):
    """Two applied branches exist: overwrite the on-disk gap behind a short
    section (size unchanged, bytes change) or grow the raw tail of the
    region-ending section (size grows)."""
    saw_fill = saw_grow = False
    for raw in mal_bytes[:40]:
        img = pe_model.parse(raw)
        res = apply_action(img, ActionId.APPEND_TO_SECTION, pool, seed=2)
        if res.outcome is not Outcome.APPLIED:
            continue
        out = pe_model.serialize(res.image)
        assert pe_model.parse(out).coff.number_of_sections == img.coff.number_of_sections
        if res.delta_bytes:
            assert len(out) == len(raw) + res.delta_bytes
            saw_grow = True
        else:
            assert len(out) == len(raw) and out != raw
            saw_fill = True
    assert saw_fill and saw_grow


def test_applied_results_keep_invariants_clean(mal_bytes, pool):
    for action in ActionId:
        for raw in mal_bytes[:12]:
            res = apply_action(pe_model.parse(raw), action, pool, seed=42)
            if res.outcome is Outcome.FAILED:
                continue
            assert pe_model.check_invariants(res.image) == [], action.name
            out = pe_model.serialize(res.image)
            assert pe_model.parse(out).diagnostics == [], action.name


def test_same_seed_same_bytes(mal_bytes, pool):
    for action in ActionId:
        a = apply_action(pe_model.parse(mal_bytes[2]), action, pool, seed=7)
        b = apply_action(pe_model.parse(mal_bytes[2]), action, pool, seed=7)
        if a.outcome is Outcome.FAILED:
            assert b.outcome is Outcome.FAILED
            continue
        assert pe_model.serialize(a.image) == pe_model.serialize(b.image), action.name


def test_different_seed_changes_appended_content(mal_bytes, pool):
    a = apply_action(pe_model.parse(mal_bytes[3]), ActionId.APPEND_OVERLAY, pool, seed=1)
    b = apply_action(pe_model.parse(mal_bytes[3]), ActionId.APPEND_OVERLAY, pool, seed=2)
    assert pe_model.serialize(a.image) != pe_model.serialize(b.image)


def test_modification_action_wrapper_carries_seed(mal_bytes, pool):
    act = ModificationAction(ActionId.APPEND_OVERLAY, rng_seed=77)
    a = apply_action(pe_model.parse(mal_bytes[4]), act, pool)
    b = apply_action(pe_model.parse(mal_bytes[4]), ActionId.APPEND_OVERLAY, pool, seed=77)
    assert pe_model.serialize(a.image) == pe_model.serialize(b.image)


def test_pool_drops_tiny_blobs_and_has_fallback():
    pool = BenignContentPool(blobs=[b"short", b"x" * 64])
    assert pool.blobs == [b"x" * 64]
    empty = BenignContentPool(blobs=[b""])
    assert empty.blobs


def test_build_pool_harvests_benign_content(ben_bytes):
    pool = build_pool(ben_bytes)
    assert pool.blobs
    assert all(len(b) >= 16 for b in pool.blobs)
    assert pool.dll_catalog
