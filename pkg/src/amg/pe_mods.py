"""The ten functionality-preserving rewrite actions.

Every action is a pure function: it deep-copies the input image, mutates the
copy, and reports an outcome.  ``Failed`` and ``NoOp`` results hand back the
untouched input.  Given the same image and seed an action always produces the
same bytes.  None of them move the entry point or any existing section, so a
loader would still map the file the same way; they only add content, clear
optional metadata, or rewrite header scalars.
"""

from __future__ import annotations

import enum
import random
import struct
from dataclasses import dataclass, field

from . import pe_model
from .pe_model import (
    DIR_DEBUG,
    DIR_IMPORT,
    DIR_SECURITY,
    PE32PLUS_MAGIC,
    PeImage,
    align_up,
)

#: 500 days, deliberately not a whole number of years so shifted build dates
#: do not land on the same calendar day.
TIMESTAMP_STEP = 43_200_000
_TS_MAX = 2**32 - 1

#: Name pool used when adding or renaming sections.
DEFAULT_SECTION_NAMES: tuple[bytes, ...] = (
    b".text",
    b".data",
    b".rdata",
    b".rsrc",
    b".reloc",
    b".idata",
    b".bss",
)

#: Common libraries with unremarkable imports, used to pad import tables.
DLL_CATALOG: dict[str, tuple[str, ...]] = {
    "KERNEL32.dll": (
        "ReadFile", "WriteFile", "CloseHandle", "CreateFileA", "GetLastError",
        "HeapAlloc", "HeapFree", "Sleep", "GetModuleHandleA", "ExitProcess",
        "MultiByteToWideChar", "lstrlenA",
    ),
    "USER32.dll": (
        "MessageBoxA", "LoadStringA", "GetSystemMetrics", "PostQuitMessage",
        "DefWindowProcA", "ShowWindow",
    ),
    "GDI32.dll": ("TextOutA", "SelectObject", "DeleteObject", "GetStockObject"),
    "ADVAPI32.dll": ("RegOpenKeyExA", "RegQueryValueExA", "RegCloseKey"),
    "SHELL32.dll": ("SHGetFolderPathA", "DragQueryFileA", "SHFileOperationA"),
}

_FALLBACK_BLOB = (
    b"Copyright (c) example software. All rights reserved. "
    b"This block is ordinary static data used for padding. "
) * 32


class ActionId(enum.IntEnum):
    BREAK_CHECKSUM = 0
    APPEND_OVERLAY = 1
    REMOVE_DEBUG = 2
    REMOVE_CERTIFICATE = 3
    ADD_NEW_SECTION = 4
    APPEND_TO_SECTION = 5
    RENAME_SECTION = 6
    INCREASE_TIMESTAMP = 7
    DECREASE_TIMESTAMP = 8
    APPEND_NEW_IMPORT = 9


ACTION_NAMES: dict[ActionId, str] = {a: a.name.lower() for a in ActionId}
_NAME_TO_ACTION = {v: k for k, v in ACTION_NAMES.items()}


def action_from_name(name: str) -> ActionId:
    try:
        return _NAME_TO_ACTION[name.lower()]
    except KeyError:
        raise ValueError(f"unknown action {name!r}") from None


class Outcome(enum.Enum):
    APPLIED = "applied"
    NOOP = "noop"
    FAILED = "failed"


@dataclass
class ModResult:
    outcome: Outcome
    image: PeImage
    delta_bytes: int
    detail: str = ""


@dataclass
class ModificationAction:
    id: ActionId
    rng_seed: int = 0


@dataclass
class BenignContentPool:
    """Byte blobs, section names and import names drawn from benign files."""

    blobs: list[bytes] = field(default_factory=lambda: [_FALLBACK_BLOB])
    section_names: tuple[bytes, ...] = DEFAULT_SECTION_NAMES
    dll_catalog: dict[str, tuple[str, ...]] = field(default_factory=lambda: dict(DLL_CATALOG))

    def __post_init__(self) -> None:
        self.blobs = [b for b in self.blobs if len(b) >= 16] or [_FALLBACK_BLOB]

    def pick_blob(self, rng: random.Random) -> bytes:
        return rng.choice(self.blobs)

    def pick_section_name(self, rng: random.Random) -> bytes:
        return rng.choice(self.section_names)

    def pick_dll(self, rng: random.Random) -> tuple[str, list[str]]:
        dll = rng.choice(sorted(self.dll_catalog))
        names = list(self.dll_catalog[dll])
        count = rng.randint(min(4, len(names)), len(names))
        return dll, rng.sample(names, count)


def build_pool(benign_files: list[bytes], max_blobs: int = 96) -> BenignContentPool:
    """Harvest section contents and overlays from benign files into a pool."""
    blobs: list[bytes] = []
    for raw in benign_files:
        try:
            img = pe_model.parse(raw)
        except pe_model.PeError:
            continue
        chunks = [s.data for s in img.sections if s.has_raw()]
        if img.overlay:
            chunks.append(img.overlay)
        for chunk in chunks:
            trimmed = chunk.rstrip(b"\x00")
            if len(trimmed) < 1024:
                continue
            blobs.append(trimmed[:16384])
            if len(blobs) >= max_blobs:
                return BenignContentPool(blobs=blobs)
    return BenignContentPool(blobs=blobs)


# ---------------------------------------------------------------------------
# helpers


def _fill_from(blob: bytes, n: int) -> bytes:
    if n <= 0:
        return b""
    reps = n // len(blob) + 1
    return (blob * reps)[:n]


def _shift_security(img: PeImage, watermark: int, delta: int) -> None:
    d = img.directory(DIR_SECURITY)
    if d.rva and d.rva >= watermark:
        d.rva += delta


def _consume_header_slack(img: PeImage, old_headers_end: int) -> bool:
    """Take 40 bytes of padding at ``old_headers_end`` for a new section header."""
    for k, (off, blob) in enumerate(img.padding_spans):
        if off == old_headers_end and len(blob) >= pe_model.SECTION_HEADER_SIZE:
            rest = blob[pe_model.SECTION_HEADER_SIZE :]
            if rest:
                img.padding_spans[k] = (off + pe_model.SECTION_HEADER_SIZE, rest)
            else:
                del img.padding_spans[k]
            return True
    return False


def _new_section_home(img: PeImage) -> tuple[int, int] | None:
    """(virtual address, raw pointer) for a would-be appended section."""
    if not img.sections:
        return None
    sa = img.optional.section_alignment
    fa = img.optional.file_alignment
    image_end = max(s.virtual_address + max(s.virtual_size, 1) for s in img.sections)
    new_va = align_up(max(image_end, img.sections[-1].virtual_address + 1), sa)
    ptr = img.last_raw_end
    if fa <= 0 or ptr % fa:
        return None
    return new_va, ptr


def _append_section(img: PeImage, name: bytes, data: bytes, virtual_size: int,
                    characteristics: int) -> int:
    """Append a section whose placement came from :func:`_new_section_home`.

    Returns the number of file bytes inserted.  The caller has already
    verified 40 bytes of header slack exist.
    """
    home = _new_section_home(img)
    assert home is not None
    new_va, ptr = home
    fa = img.optional.file_alignment
    sa = img.optional.section_alignment
    srd = align_up(len(data), fa)
    old_headers_end = img.headers_end
    section = pe_model.Section(
        name=name[:8].ljust(8, b"\x00"),
        virtual_size=virtual_size,
        virtual_address=new_va,
        size_of_raw_data=srd,
        pointer_to_raw_data=ptr,
        reserved=b"\x00" * 12,
        characteristics=characteristics,
        data=data.ljust(srd, b"\x00"),
    )
    if not _consume_header_slack(img, old_headers_end):
        raise pe_model.InvariantViolation("advertised header slack is not backed by padding")
    img.sections.append(section)
    img.coff.number_of_sections += 1
    img.optional.size_of_image = align_up(new_va + max(virtual_size, 1), sa)
    _shift_security(img, ptr, srd)
    img.source_len += srd
    return srd


# ---------------------------------------------------------------------------
# the ten actions


def break_checksum(img: PeImage, pool: BenignContentPool, seed: int = 0) -> ModResult:
    """Zero the optional-header checksum."""
    out = img.copy()
    out.optional.checksum = 0
    return ModResult(Outcome.APPLIED, out, 0)


def append_overlay(img: PeImage, pool: BenignContentPool, seed: int = 0) -> ModResult:
    """Append one benign blob after the end of the file."""
    rng = random.Random(seed)
    blob = pool.pick_blob(rng)
    out = img.copy()
    out.overlay += blob
    out.source_len += len(blob)
    return ModResult(Outcome.APPLIED, out, len(blob))


def remove_debug(img: PeImage, pool: BenignContentPool, seed: int = 0) -> ModResult:
    """Clear the debug directory and zero-fill its data in place."""
    d = img.directory(DIR_DEBUG)
    if d.rva == 0 and d.size == 0:
        return ModResult(Outcome.NOOP, img, 0, "no debug directory")
    out = img.copy()
    detail = []
    entry_count = d.size // 28
    for i in range(entry_count):
        blob = pe_model.read_virtual(out, d.rva + i * 28, 28)
        if blob is None:
            detail.append(f"entry {i} not mappable")
            continue
        size_of_data, _, pointer = struct.unpack_from("<III", blob, 16)
        if pointer and size_of_data:
            pe_model.zero_file_range(out, pointer, size_of_data)
    table_off = pe_model.rva_to_offset(out, d.rva)
    if table_off is not None:
        pe_model.zero_file_range(out, table_off, d.size)
    out.directory(DIR_DEBUG).rva = 0
    out.directory(DIR_DEBUG).size = 0
    return ModResult(Outcome.APPLIED, out, 0, "; ".join(detail))


def remove_certificate(img: PeImage, pool: BenignContentPool, seed: int = 0) -> ModResult:
    """Drop the certificate table; the file shrinks when it sits in the overlay."""
    d = img.directory(DIR_SECURITY)
    if d.rva == 0 or d.size == 0:
        return ModResult(Outcome.NOOP, img, 0, "no certificate")
    out = img.copy()
    start, size = d.rva, d.size
    base = out.last_raw_end
    end = min(start + size, base + len(out.overlay))
    if start >= base and end > start:
        lo = start - base
        hi = end - base
        out.overlay = out.overlay[:lo] + out.overlay[hi:]
        removed = hi - lo
        out.source_len -= removed
        delta = -removed
        detail = "excised from overlay"
    else:
        pe_model.zero_file_range(out, start, size)
        delta = 0
        detail = "outside overlay; zero-filled in place"
    out.directory(DIR_SECURITY).rva = 0
    out.directory(DIR_SECURITY).size = 0
    return ModResult(Outcome.APPLIED, out, delta, detail)


def add_new_section(img: PeImage, pool: BenignContentPool, seed: int = 0) -> ModResult:
    """Add a benign data section; needs 40 spare bytes after the section table."""
    if not img.sections:
        return ModResult(Outcome.FAILED, img, 0, "image has no sections")
    if img.header_slack < pe_model.SECTION_HEADER_SIZE:
        return ModResult(Outcome.FAILED, img, 0, f"header slack {img.header_slack} < 40")
    if _new_section_home(img) is None:
        return ModResult(Outcome.FAILED, img, 0, "no aligned spot for raw data")
    rng = random.Random(seed)
    blob = pool.pick_blob(rng)
    name = pool.pick_section_name(rng)
    out = img.copy()
    delta = _append_section(out, name, blob, len(blob), 0x40000040)
    return ModResult(Outcome.APPLIED, out, delta)


def append_to_section(img: PeImage, pool: BenignContentPool, seed: int = 0) -> ModResult:
    """Write benign bytes into the dead space of a section whose virtual size
    exceeds its raw size.

    Prefers overwriting an existing on-disk gap after the section (headers
    stay untouched); otherwise grows the raw size by whole alignment units,
    which is only provably safe for the section that ends the raw region.
    """
    eligible = [i for i, s in enumerate(img.sections) if s.has_raw() and s.virtual_size > s.size_of_raw_data]
    if not eligible:
        return ModResult(Outcome.FAILED, img, 0, "no section with virtual_size > size_of_raw_data")
    rng = random.Random(seed)
    order = rng.sample(eligible, len(eligible))
    fa = img.optional.file_alignment
    last_end = img.last_raw_end
    starts = sorted(s.pointer_to_raw_data for s in img.sections if s.has_raw())
    for i in order:
        s = img.sections[i]
        raw_end = s.pointer_to_raw_data + s.size_of_raw_data
        want = s.virtual_size - s.size_of_raw_data
        next_start = next((p for p in starts if p >= raw_end), None)
        if next_start is not None and next_start > raw_end:
            fill = min(want, next_start - raw_end)
            out = img.copy()
            blob = pool.pick_blob(rng)
            payload = _fill_from(blob, fill)
            spans = []
            for off, data in out.padding_spans:
                if off <= raw_end < off + len(data):
                    k = raw_end - off
                    data = data[:k] + payload + data[k + fill :]
                spans.append((off, data))
            out.padding_spans = spans
            return ModResult(Outcome.APPLIED, out, 0, f"slack-fill {fill}B in sections[{i}]")
        if raw_end == last_end:
            grow = align_up(want, fa)
            out = img.copy()
            t = out.sections[i]
            blob = pool.pick_blob(rng)
            payload = _fill_from(blob, want).ljust(grow, b"\x00")
            t.data += payload
            t.size_of_raw_data += grow
            _shift_security(out, raw_end, grow)
            out.source_len += grow
            return ModResult(Outcome.APPLIED, out, grow, f"grow {grow}B in sections[{i}]")
    return ModResult(Outcome.NOOP, img, 0, "eligible sections are boxed in")


def rename_section(img: PeImage, pool: BenignContentPool, seed: int = 0) -> ModResult:
    """Give one randomly chosen section an ordinary name."""
    if not img.sections:
        return ModResult(Outcome.FAILED, img, 0, "image has no sections")
    rng = random.Random(seed)
    index = rng.randrange(len(img.sections))
    name = pool.pick_section_name(rng)
    out = img.copy()
    out.sections[index].name = name[:8].ljust(8, b"\x00")
    return ModResult(Outcome.APPLIED, out, 0, f"sections[{index}] -> {name.decode()}")


def increase_timestamp(img: PeImage, pool: BenignContentPool, seed: int = 0) -> ModResult:
    """Move the build timestamp 500 days forward, saturating at the maximum."""
    out = img.copy()
    out.coff.time_date_stamp = min(out.coff.time_date_stamp + TIMESTAMP_STEP, _TS_MAX)
    return ModResult(Outcome.APPLIED, out, 0)


def decrease_timestamp(img: PeImage, pool: BenignContentPool, seed: int = 0) -> ModResult:
    """Move the build timestamp 500 days back, saturating at zero."""
    out = img.copy()
    out.coff.time_date_stamp = max(out.coff.time_date_stamp - TIMESTAMP_STEP, 0)
    return ModResult(Outcome.APPLIED, out, 0)


def append_new_import(img: PeImage, pool: BenignContentPool, seed: int = 0) -> ModResult:
    """Extend the import table with one benign DLL inside a new section.

    The old descriptor array is copied verbatim (its tables stay where they
    were), a descriptor for the new DLL plus its lookup/address tables and
    name strings are laid out behind it, and the import directory is pointed
    at the copy.
    """
    if not img.sections:
        return ModResult(Outcome.FAILED, img, 0, "image has no sections")
    if img.header_slack < pe_model.SECTION_HEADER_SIZE:
        return ModResult(Outcome.FAILED, img, 0, f"header slack {img.header_slack} < 40")
    home = _new_section_home(img)
    if home is None:
        return ModResult(Outcome.FAILED, img, 0, "no aligned spot for raw data")
    rng = random.Random(seed)
    dll, funcs = pool.pick_dll(rng)
    out = img.copy()

    old_raw = bytearray()
    d = out.directory(DIR_IMPORT)
    if d.rva:
        for i in range(512):
            blob = pe_model.read_virtual(out, d.rva + i * 20, 20)
            if blob is None or blob == b"\x00" * 20:
                break
            old_raw += blob

    base = home[0]
    entry_size = 8 if out.optional.magic == PE32PLUS_MAGIC else 4
    thunk_fmt = "<Q" if entry_size == 8 else "<I"
    idt_len = len(old_raw) + 40
    ilt_off = idt_len
    ilt_len = (len(funcs) + 1) * entry_size
    iat_off = ilt_off + ilt_len
    cursor = iat_off + ilt_len
    hint_rvas = []
    hints = bytearray()
    for fn in funcs:
        if cursor % 2:
            hints += b"\x00"
            cursor += 1
        hint_rvas.append(base + cursor)
        blob = struct.pack("<H", 0) + fn.encode("ascii") + b"\x00"
        hints += blob
        cursor += len(blob)
    name_rva = base + cursor
    names_blob = dll.encode("ascii") + b"\x00"

    thunks = b"".join(struct.pack(thunk_fmt, rva) for rva in hint_rvas)
    thunks += struct.pack(thunk_fmt, 0)
    descriptor = struct.pack("<IIIII", base + ilt_off, 0, 0, name_rva, base + iat_off)
    content = bytes(old_raw) + descriptor + b"\x00" * 20 + thunks + thunks + bytes(hints) + names_blob

    delta = _append_section(out, b".idata", content, len(content), 0xC0000040)
    out.directory(DIR_IMPORT).rva = base
    out.directory(DIR_IMPORT).size = idt_len
    return ModResult(Outcome.APPLIED, out, delta, f"{dll} +{len(funcs)} imports")


ACTIONS = {
    ActionId.BREAK_CHECKSUM: break_checksum,
    ActionId.APPEND_OVERLAY: append_overlay,
    ActionId.REMOVE_DEBUG: remove_debug,
    ActionId.REMOVE_CERTIFICATE: remove_certificate,
    ActionId.ADD_NEW_SECTION: add_new_section,
    ActionId.APPEND_TO_SECTION: append_to_section,
    ActionId.RENAME_SECTION: rename_section,
    ActionId.INCREASE_TIMESTAMP: increase_timestamp,
    ActionId.DECREASE_TIMESTAMP: decrease_timestamp,
    ActionId.APPEND_NEW_IMPORT: append_new_import,
}

ACTION_COUNT = len(ACTIONS)


def apply_action(
    img: PeImage,
    action: ActionId | ModificationAction | int,
    pool: BenignContentPool,
    seed: int | None = None,
) -> ModResult:
    """Apply one action by id; the seed defaults to the action's own."""
    if isinstance(action, ModificationAction):
        action_id, rng_seed = action.id, action.rng_seed
    else:
        action_id, rng_seed = ActionId(action), 0
    if seed is not None:
        rng_seed = seed
    return ACTIONS[action_id](img, pool, rng_seed)
