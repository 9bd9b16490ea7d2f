"""Strict PE reader/writer with byte-for-byte round-trip fidelity.

The model keeps every field we rewrite as a named attribute and everything
else as opaque byte runs, so ``serialize(parse(data)) == data`` holds for any
file the parser accepts with a clean bill of structural health.  Parsing is
total: arbitrary input either yields a ``PeImage`` or raises one of the
declared ``PeError`` subclasses, never anything else.

Hard problems (bad magic, offsets outside the file, overlapping raw ranges)
raise.  Soft problems (unsorted sections, misrounded ``size_of_image`` and
friends) come back as ``Diagnostic`` entries from :func:`check_invariants`
and are attached to the image at parse time.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

MZ_MAGIC = 0x5A4D
PE_SIGNATURE = b"PE\x00\x00"
PE32_MAGIC = 0x10B
PE32PLUS_MAGIC = 0x20B

DOS_HEADER_SIZE = 64
COFF_HEADER_SIZE = 20
SECTION_HEADER_SIZE = 40

DIR_EXPORT = 0
DIR_IMPORT = 1
DIR_RESOURCE = 2
# The security directory's first field is a raw file offset, not an RVA;
# certificates live in the overlay, outside any mapped section.
DIR_SECURITY = 4
DIR_DEBUG = 6

ORDINAL_FLAG_32 = 0x8000_0000
ORDINAL_FLAG_64 = 0x8000_0000_0000_0000

_MAX_IMPORT_DESCRIPTORS = 512
_MAX_IMPORT_THUNKS = 4096


class PeError(Exception):
    """Base class for all structural PE failures."""


class NotPe(PeError):
    """The bytes are not a PE file at all (bad magic or signature)."""


class Truncated(PeError):
    """A header or section points past the end of the file."""


class MalformedSectionTable(PeError):
    """Section raw ranges overlap each other or the headers."""


class InvariantViolation(PeError):
    """Serialization refused because the image breaks a structural rule."""


def align_up(value: int, alignment: int) -> int:
    if alignment <= 0:
        return value
    return (value + alignment - 1) // alignment * alignment


def _u16(data: bytes, off: int) -> int:
    if off + 2 > len(data):
        raise Truncated(f"u16 read at {off} past end ({len(data)} bytes)")
    return struct.unpack_from("<H", data, off)[0]


def _u32(data: bytes, off: int) -> int:
    if off + 4 > len(data):
        raise Truncated(f"u32 read at {off} past end ({len(data)} bytes)")
    return struct.unpack_from("<I", data, off)[0]


def _take(data: bytes, off: int, n: int, what: str) -> bytes:
    if off + n > len(data):
        raise Truncated(f"{what} at {off}..{off + n} past end ({len(data)} bytes)")
    return bytes(data[off : off + n])


@dataclass
class Diagnostic:
    severity: str  # "error" (structurally broken file) or "warning" (loader-facing rule)
    path: str
    rule: str

    def __str__(self) -> str:
        return f"{self.severity} {self.path}: {self.rule}"


@dataclass
class DosHeader:
    e_magic: int
    reserved: bytes  # the 58 bytes between e_magic and e_lfanew, kept verbatim
    e_lfanew: int

    def pack(self) -> bytes:
        return struct.pack("<H", self.e_magic) + self.reserved + struct.pack("<I", self.e_lfanew)


@dataclass
class CoffHeader:
    machine: int
    number_of_sections: int
    time_date_stamp: int
    pointer_to_symbol_table: int
    number_of_symbols: int
    size_of_optional_header: int
    characteristics: int

    def pack(self) -> bytes:
        return struct.pack(
            "<HHIIIHH",
            self.machine,
            self.number_of_sections,
            self.time_date_stamp,
            self.pointer_to_symbol_table,
            self.number_of_symbols,
            self.size_of_optional_header,
            self.characteristics,
        )


@dataclass
class DataDirectory:
    rva: int  # for DIR_SECURITY this is a raw file offset
    size: int


@dataclass
class OptionalHeader:
    """Optional header with rewrite targets named and the rest opaque.

    ``run_a`` .. ``run_e`` hold the byte spans between named fields; their
    widths differ between PE32 and PE32+ only for ``run_e`` (24 vs 40 bytes).
    ``trailing`` keeps any bytes past the data directories that
    ``size_of_optional_header`` claims.
    """

    magic: int
    run_a: bytes  # linker versions (2 bytes)
    size_of_code: int
    run_b: bytes  # initialized/uninitialized data sizes (8 bytes)
    address_of_entry_point: int
    run_c: bytes  # base_of_code, base_of_data/image_base (12 bytes)
    section_alignment: int
    file_alignment: int
    run_d: bytes  # version fields, win32_version_value (16 bytes)
    size_of_image: int
    size_of_headers: int
    checksum: int
    run_e: bytes  # subsystem through loader_flags (24 bytes PE32, 40 PE32+)
    number_of_rva_and_sizes: int
    data_directories: list[DataDirectory]
    trailing: bytes = b""

    def pack(self) -> bytes:
        parts = [
            struct.pack("<H", self.magic),
            self.run_a,
            struct.pack("<I", self.size_of_code),
            self.run_b,
            struct.pack("<I", self.address_of_entry_point),
            self.run_c,
            struct.pack("<II", self.section_alignment, self.file_alignment),
            self.run_d,
            struct.pack("<III", self.size_of_image, self.size_of_headers, self.checksum),
            self.run_e,
            struct.pack("<I", self.number_of_rva_and_sizes),
        ]
        for d in self.data_directories:
            parts.append(struct.pack("<II", d.rva, d.size))
        parts.append(self.trailing)
        return b"".join(parts)


@dataclass
class Section:
    """One section header plus its on-disk raw data (``len(data) == size_of_raw_data``)."""

    name: bytes  # 8 bytes, zero padded
    virtual_size: int
    virtual_address: int
    size_of_raw_data: int
    pointer_to_raw_data: int
    reserved: bytes  # relocation/line-number fields we never touch (12 bytes)
    characteristics: int
    data: bytes

    def pack_header(self) -> bytes:
        return (
            self.name
            + struct.pack(
                "<IIII",
                self.virtual_size,
                self.virtual_address,
                self.size_of_raw_data,
                self.pointer_to_raw_data,
            )
            + self.reserved
            + struct.pack("<I", self.characteristics)
        )

    @property
    def display_name(self) -> str:
        return self.name.rstrip(b"\x00").decode("latin-1")

    def has_raw(self) -> bool:
        # A zero raw pointer means "no bytes on disk" even if a size is claimed.
        return self.size_of_raw_data > 0 and self.pointer_to_raw_data > 0


@dataclass
class ImportDescriptor:
    dll_name: str
    ilt_rva: int
    iat_rva: int
    function_names: list[str]


@dataclass
class PeImage:
    dos_header: DosHeader
    dos_stub: bytes
    coff: CoffHeader
    optional: OptionalHeader
    sections: list[Section]
    # Bytes inside the section region not owned by any section (header slack,
    # inter-section gaps), as (absolute offset, bytes) pairs sorted by offset.
    padding_spans: list[tuple[int, bytes]]
    overlay: bytes
    source_len: int
    diagnostics: list[Diagnostic] = field(default_factory=list)

    # -- derived layout ----------------------------------------------------
    @property
    def headers_end(self) -> int:
        return (
            self.dos_header.e_lfanew
            + len(PE_SIGNATURE)
            + COFF_HEADER_SIZE
            + self.coff.size_of_optional_header
            + SECTION_HEADER_SIZE * len(self.sections)
        )

    @property
    def first_raw_ptr(self) -> int | None:
        ptrs = [s.pointer_to_raw_data for s in self.sections if s.has_raw()]
        return min(ptrs) if ptrs else None

    @property
    def last_raw_end(self) -> int:
        ends = [s.pointer_to_raw_data + s.size_of_raw_data for s in self.sections if s.has_raw()]
        return max(ends, default=self.headers_end)

    @property
    def header_slack(self) -> int:
        """Unused bytes between the section table and the first raw data."""
        first = self.first_raw_ptr
        if first is None:
            first = max(self.optional.size_of_headers, self.headers_end)
        return max(0, first - self.headers_end)

    def directory(self, index: int) -> DataDirectory:
        dirs = self.optional.data_directories
        if index < len(dirs):
            return dirs[index]
        return DataDirectory(0, 0)

    def entry_section_index(self) -> int | None:
        aep = self.optional.address_of_entry_point
        for i, s in enumerate(self.sections):
            span = max(s.virtual_size, s.size_of_raw_data)
            if s.virtual_address <= aep < s.virtual_address + max(span, 1):
                return i
        return None

    def copy(self) -> PeImage:
        dos = DosHeader(self.dos_header.e_magic, self.dos_header.reserved, self.dos_header.e_lfanew)
        coff = CoffHeader(
            self.coff.machine,
            self.coff.number_of_sections,
            self.coff.time_date_stamp,
            self.coff.pointer_to_symbol_table,
            self.coff.number_of_symbols,
            self.coff.size_of_optional_header,
            self.coff.characteristics,
        )
        opt = self.optional
        optional = OptionalHeader(
            opt.magic,
            opt.run_a,
            opt.size_of_code,
            opt.run_b,
            opt.address_of_entry_point,
            opt.run_c,
            opt.section_alignment,
            opt.file_alignment,
            opt.run_d,
            opt.size_of_image,
            opt.size_of_headers,
            opt.checksum,
            opt.run_e,
            opt.number_of_rva_and_sizes,
            [DataDirectory(d.rva, d.size) for d in opt.data_directories],
            opt.trailing,
        )
        sections = [
            Section(
                s.name,
                s.virtual_size,
                s.virtual_address,
                s.size_of_raw_data,
                s.pointer_to_raw_data,
                s.reserved,
                s.characteristics,
                s.data,
            )
            for s in self.sections
        ]
        return PeImage(
            dos_header=dos,
            dos_stub=self.dos_stub,
            coff=coff,
            optional=optional,
            sections=sections,
            padding_spans=list(self.padding_spans),
            overlay=self.overlay,
            source_len=self.source_len,
            diagnostics=list(self.diagnostics),
        )


# ---------------------------------------------------------------------------
# parsing


def _parse_optional(raw: bytes, off: int, size: int) -> OptionalHeader:
    blob = _take(raw, off, size, "optional header")
    if size < 2:
        raise Truncated("optional header smaller than its magic field")
    magic = _u16(blob, 0)
    if magic == PE32_MAGIC:
        run_e_len, fixed = 24, 0x60
    elif magic == PE32PLUS_MAGIC:
        run_e_len, fixed = 40, 0x70
    else:
        raise NotPe(f"unsupported optional header magic 0x{magic:x}")
    if size < fixed:
        raise Truncated(f"optional header of {size} bytes cannot hold the fixed fields ({fixed})")

    run_a = blob[2:4]
    size_of_code = _u32(blob, 0x04)
    run_b = blob[0x08:0x10]
    aep = _u32(blob, 0x10)
    run_c = blob[0x14:0x20]
    section_alignment = _u32(blob, 0x20)
    file_alignment = _u32(blob, 0x24)
    run_d = blob[0x28:0x38]
    size_of_image = _u32(blob, 0x38)
    size_of_headers = _u32(blob, 0x3C)
    checksum = _u32(blob, 0x40)
    run_e = blob[0x44 : 0x44 + run_e_len]
    n_dirs = _u32(blob, fixed - 4)
    dirs_end = fixed + n_dirs * 8
    if dirs_end > size:
        raise Truncated(f"{n_dirs} data directories do not fit a {size}-byte optional header")
    dirs = [
        DataDirectory(_u32(blob, fixed + i * 8), _u32(blob, fixed + i * 8 + 4))
        for i in range(n_dirs)
    ]
    return OptionalHeader(
        magic=magic,
        run_a=run_a,
        size_of_code=size_of_code,
        run_b=run_b,
        address_of_entry_point=aep,
        run_c=run_c,
        section_alignment=section_alignment,
        file_alignment=file_alignment,
        run_d=run_d,
        size_of_image=size_of_image,
        size_of_headers=size_of_headers,
        checksum=checksum,
        run_e=run_e,
        number_of_rva_and_sizes=n_dirs,
        data_directories=dirs,
        trailing=blob[dirs_end:],
    )


def parse(raw: bytes) -> PeImage:
    """Parse ``raw`` into a :class:`PeImage` or raise a :class:`PeError`."""
    if len(raw) < 2 or _u16(raw, 0) != MZ_MAGIC:
        raise NotPe("missing MZ magic")
    if len(raw) < DOS_HEADER_SIZE:
        raise Truncated("file ends inside the DOS header")
    e_lfanew = _u32(raw, 0x3C)
    if e_lfanew < DOS_HEADER_SIZE:
        raise NotPe(f"e_lfanew {e_lfanew} overlaps the DOS header")
    sig = _take(raw, e_lfanew, 4, "PE signature")
    if sig != PE_SIGNATURE:
        raise NotPe("missing PE signature at e_lfanew")
    dos = DosHeader(MZ_MAGIC, bytes(raw[2:0x3C]), e_lfanew)
    dos_stub = bytes(raw[DOS_HEADER_SIZE:e_lfanew])

    coff_off = e_lfanew + 4
    coff_blob = _take(raw, coff_off, COFF_HEADER_SIZE, "COFF header")
    coff = CoffHeader(*struct.unpack("<HHIIIHH", coff_blob))

    opt_off = coff_off + COFF_HEADER_SIZE
    optional = _parse_optional(raw, opt_off, coff.size_of_optional_header)

    table_off = opt_off + coff.size_of_optional_header
    table_end = table_off + SECTION_HEADER_SIZE * coff.number_of_sections
    if table_end > len(raw):
        raise Truncated("file ends inside the section table")

    sections: list[Section] = []
    for i in range(coff.number_of_sections):
        off = table_off + i * SECTION_HEADER_SIZE
        name = bytes(raw[off : off + 8])
        vs, va, srd, ptr = struct.unpack_from("<IIII", raw, off + 8)
        reserved = bytes(raw[off + 24 : off + 36])
        characteristics = _u32(raw, off + 36)
        sections.append(Section(name, vs, va, srd, ptr, reserved, characteristics, b""))

    headers_end = table_end
    intervals: list[tuple[int, int, int]] = []  # (start, end, section index)
    for i, s in enumerate(sections):
        if not s.has_raw():
            continue
        start, end = s.pointer_to_raw_data, s.pointer_to_raw_data + s.size_of_raw_data
        if end > len(raw):
            raise Truncated(f"sections[{i}] raw data {start}..{end} past end ({len(raw)} bytes)")
        if start < headers_end:
            raise MalformedSectionTable(f"sections[{i}] raw data starts inside the headers")
        intervals.append((start, end, i))
        s.data = bytes(raw[start:end])

    intervals.sort()
    for (s1, e1, i1), (s2, e2, i2) in zip(intervals, intervals[1:]):
        if s2 < e1:
            raise MalformedSectionTable(f"sections[{i1}] and sections[{i2}] raw ranges overlap")

    last_raw_end = max((end for _, end, _ in intervals), default=headers_end)
    spans: list[tuple[int, bytes]] = []
    cursor = headers_end
    for start, end, _ in intervals:
        if start > cursor:
            spans.append((cursor, bytes(raw[cursor:start])))
        cursor = end
    overlay = bytes(raw[last_raw_end:])

    img = PeImage(
        dos_header=dos,
        dos_stub=dos_stub,
        coff=coff,
        optional=optional,
        sections=sections,
        padding_spans=spans,
        overlay=overlay,
        source_len=len(raw),
    )
    img.diagnostics = check_invariants(img)
    return img


# ---------------------------------------------------------------------------
# serialization


def _serialize_headers(img: PeImage) -> bytes:
    parts = [
        img.dos_header.pack(),
        img.dos_stub,
        PE_SIGNATURE,
        img.coff.pack(),
        img.optional.pack(),
    ]
    parts.extend(s.pack_header() for s in img.sections)
    return b"".join(parts)


def _serialize_gate(img: PeImage) -> None:
    """Raise :class:`InvariantViolation` on rules that make byte layout ambiguous.

    Everything a parse can represent serializes back losslessly; the gate
    only guards in-memory edits that leave the model unable to decide what
    bytes to write (length mismatches, overlapping raw ranges). Value-level
    breakage such as misalignment stays serializable and is reported by
    :func:`check_invariants` instead.
    """
    if img.dos_header.e_magic != MZ_MAGIC:
        raise InvariantViolation("dos_header.e_magic is not MZ")
    if len(img.dos_header.reserved) != DOS_HEADER_SIZE - 6:
        raise InvariantViolation("dos_header.reserved must be 58 bytes")
    if img.dos_header.e_lfanew != DOS_HEADER_SIZE + len(img.dos_stub):
        raise InvariantViolation("e_lfanew does not match the DOS stub length")
    if img.coff.number_of_sections != len(img.sections):
        raise InvariantViolation("coff.number_of_sections does not match the section list")
    opt_len = len(img.optional.pack())
    if img.coff.size_of_optional_header != opt_len:
        raise InvariantViolation("coff.size_of_optional_header does not match the optional header")
    if img.optional.number_of_rva_and_sizes != len(img.optional.data_directories):
        raise InvariantViolation("number_of_rva_and_sizes does not match the directory list")
    headers_end = img.headers_end
    intervals = []
    for i, s in enumerate(img.sections):
        if len(s.name) != 8 or len(s.reserved) != 12:
            raise InvariantViolation(f"sections[{i}] header field widths are wrong")
        if not s.has_raw():
            continue
        if len(s.data) != s.size_of_raw_data:
            raise InvariantViolation(f"sections[{i}] data length != size_of_raw_data")
        if s.pointer_to_raw_data < headers_end:
            raise InvariantViolation(f"sections[{i}] raw data overlaps the headers")
        intervals.append((s.pointer_to_raw_data, s.pointer_to_raw_data + s.size_of_raw_data, i))
    intervals.sort()
    for (a1, b1, i1), (a2, b2, i2) in zip(intervals, intervals[1:]):
        if a2 < b1:
            raise InvariantViolation(f"sections[{i1}] and sections[{i2}] raw ranges overlap")
    spans = sorted((off, off + len(blob)) for off, blob in img.padding_spans)
    for (_, b1), (a2, _) in zip(spans, spans[1:]):
        if a2 < b1:
            raise InvariantViolation("padding spans overlap each other")
    for a2, b2 in spans:
        for a1, b1, i1 in intervals:
            if a2 < b1 and a1 < b2:
                raise InvariantViolation(
                    f"padding span at {a2} overlaps sections[{i1}] raw data"
                )


def serialize(img: PeImage) -> bytes:
    """Write the image back to bytes; inverse of :func:`parse` for clean files."""
    _serialize_gate(img)
    headers = _serialize_headers(img)
    if len(headers) != img.headers_end:
        raise InvariantViolation("serialized header length disagrees with the model")
    body_end = img.last_raw_end
    buf = bytearray(body_end)
    buf[: len(headers)] = headers
    for s in img.sections:
        if s.has_raw():
            buf[s.pointer_to_raw_data : s.pointer_to_raw_data + s.size_of_raw_data] = s.data
    for off, blob in img.padding_spans:
        if off < len(headers) or off + len(blob) > body_end:
            raise InvariantViolation("padding span outside the section region")
        buf[off : off + len(blob)] = blob
    buf += img.overlay
    if img.source_len != len(buf):
        raise InvariantViolation(f"source_len {img.source_len} != serialized length {len(buf)}")
    return bytes(buf)


# ---------------------------------------------------------------------------
# invariants


def check_invariants(img: PeImage) -> list[Diagnostic]:
    """Collect every violated structural rule; empty means the image is clean.

    Severity "error" marks hard structural breakage (a loader would reject
    the file outright); "warning" marks softer loader-facing soundness
    rules. Errors do not necessarily block :func:`serialize` — the writer
    refuses only layout ambiguity, so broken-but-representable states still
    round-trip and stay visible here.
    """
    out: list[Diagnostic] = []

    def err(path: str, rule: str) -> None:
        out.append(Diagnostic("error", path, rule))

    def warn(path: str, rule: str) -> None:
        out.append(Diagnostic("warning", path, rule))

    if img.dos_header.e_magic != MZ_MAGIC:
        err("dos_header.e_magic", "must equal 0x5A4D")
    if len(img.dos_header.reserved) != DOS_HEADER_SIZE - 6:
        err("dos_header.reserved", "must be 58 bytes")
    if img.dos_header.e_lfanew != DOS_HEADER_SIZE + len(img.dos_stub):
        err("dos_header.e_lfanew", "must equal 64 plus the DOS stub length")
    if img.coff.number_of_sections != len(img.sections):
        err("coff.number_of_sections", "must match the section list length")
    opt = img.optional
    if opt.magic not in (PE32_MAGIC, PE32PLUS_MAGIC):
        err("optional.magic", "must be PE32 (0x10B) or PE32+ (0x20B)")
    if img.coff.size_of_optional_header != len(opt.pack()):
        err("coff.size_of_optional_header", "must match the optional header length")
    if opt.number_of_rva_and_sizes != len(opt.data_directories):
        err("optional.number_of_rva_and_sizes", "must match the data directory count")

    sa, fa = opt.section_alignment, opt.file_alignment
    sa_ok = sa > 0 and not (sa & (sa - 1))
    fa_ok = fa > 0 and not (fa & (fa - 1))
    if not sa_ok:
        err("optional.section_alignment", "must be a positive power of two")
    if not fa_ok:
        err("optional.file_alignment", "must be a positive power of two")

    for i, d in enumerate(opt.data_directories):
        if d.rva == 0 and d.size != 0:
            warn(f"optional.data_directories[{i}]", "zero rva requires zero size")

    headers_end = img.headers_end
    prev_va = -1
    intervals = []
    image_end = 0
    for i, s in enumerate(img.sections):
        path = f"sections[{i}]"
        if s.virtual_address <= prev_va:
            warn(f"{path}.virtual_address", "sections must ascend strictly by virtual address")
        prev_va = s.virtual_address
        if sa_ok and s.virtual_address % sa:
            warn(f"{path}.virtual_address", "must be a multiple of section_alignment")
        image_end = max(image_end, s.virtual_address + s.virtual_size)
        if s.has_raw():
            if len(s.data) != s.size_of_raw_data:
                err(f"{path}.data", "length must equal size_of_raw_data")
            if fa_ok and s.size_of_raw_data % fa:
                err(f"{path}.size_of_raw_data", "must be a multiple of file_alignment")
            if fa_ok and s.pointer_to_raw_data % fa:
                err(f"{path}.pointer_to_raw_data", "must be a multiple of file_alignment")
            if s.pointer_to_raw_data < headers_end:
                err(f"{path}.pointer_to_raw_data", "raw data must not overlap the headers")
            intervals.append((s.pointer_to_raw_data, s.pointer_to_raw_data + s.size_of_raw_data, i))
    intervals.sort()
    for (a1, b1, i1), (a2, b2, i2) in zip(intervals, intervals[1:]):
        if a2 < b1:
            err(f"sections[{i2}].pointer_to_raw_data", f"raw range overlaps sections[{i1}]")

    if sa_ok and img.sections and opt.size_of_image != align_up(image_end, sa):
        warn("optional.size_of_image", "must be the image end rounded up to section_alignment")
    if fa_ok and opt.size_of_headers % fa:
        warn("optional.size_of_headers", "must be a multiple of file_alignment")
    if opt.size_of_headers < headers_end:
        warn("optional.size_of_headers", "must cover all headers")

    out.extend(_import_table_diagnostics(img))
    return out


def _import_table_diagnostics(img: PeImage) -> list[Diagnostic]:
    d = img.directory(DIR_IMPORT)
    if d.rva == 0:
        return []
    out: list[Diagnostic] = []
    entry_size = 8 if img.optional.magic == PE32PLUS_MAGIC else 4
    terminated = False
    for i in range(_MAX_IMPORT_DESCRIPTORS):
        blob = read_virtual(img, d.rva + i * 20, 20)
        if blob is None:
            out.append(Diagnostic("warning", "imports", "descriptor table is not mappable"))
            return out
        if blob == b"\x00" * 20:
            terminated = True
            break
        ilt_rva = _u32(blob, 0)
        iat_rva = _u32(blob, 16)
        ilt = _read_thunks_raw(img, ilt_rva, entry_size)
        iat = _read_thunks_raw(img, iat_rva, entry_size)
        if ilt is None or iat is None:
            out.append(Diagnostic("warning", f"imports[{i}]", "thunk tables are not mappable"))
        elif ilt != iat:
            out.append(Diagnostic("warning", f"imports[{i}]", "ILT and IAT differ on disk"))
    if not terminated:
        out.append(Diagnostic("warning", "imports", "descriptor table lacks a zero terminator"))
    return out


# ---------------------------------------------------------------------------
# virtual address helpers


def rva_to_offset(img: PeImage, rva: int) -> int | None:
    """Map an RVA to a raw file offset, or None if it hits no file bytes."""
    if 0 <= rva < min(img.optional.size_of_headers, img.headers_end):
        return rva
    for s in img.sections:
        if not s.has_raw():
            continue
        if s.virtual_address <= rva < s.virtual_address + s.size_of_raw_data:
            return s.pointer_to_raw_data + (rva - s.virtual_address)
    return None


def read_virtual(img: PeImage, rva: int, n: int) -> bytes | None:
    """Read ``n`` bytes at ``rva`` from section data, zero-extended to virtual size."""
    if n < 0:
        return None
    for s in img.sections:
        span = max(s.virtual_size, s.size_of_raw_data if s.has_raw() else 0)
        if s.virtual_address <= rva < s.virtual_address + span:
            local = rva - s.virtual_address
            if local + n > span:
                return None
            chunk = s.data[local : local + n]
            if len(chunk) < n:
                chunk += b"\x00" * (n - len(chunk))
            return bytes(chunk)
    return None


def _read_c_string(img: PeImage, rva: int, limit: int = 256) -> str | None:
    blob = read_virtual(img, rva, limit)
    if blob is None:
        # Retry with whatever fits before the section end.
        for probe in (128, 64, 16):
            blob = read_virtual(img, rva, probe)
            if blob is not None:
                break
        if blob is None:
            return None
    end = blob.find(b"\x00")
    if end < 0:
        end = len(blob)
    try:
        return blob[:end].decode("ascii")
    except UnicodeDecodeError:
        return blob[:end].decode("latin-1")


def _read_thunks_raw(img: PeImage, rva: int, entry_size: int) -> list[int] | None:
    if rva == 0:
        return None
    out: list[int] = []
    for i in range(_MAX_IMPORT_THUNKS):
        blob = read_virtual(img, rva + i * entry_size, entry_size)
        if blob is None:
            return None
        value = int.from_bytes(blob, "little")
        if value == 0:
            return out
        out.append(value)
    return out


def parse_imports(img: PeImage) -> list[ImportDescriptor]:
    """Walk the import directory; tolerant of unmappable tables (returns what it can)."""
    d = img.directory(DIR_IMPORT)
    if d.rva == 0:
        return []
    is_plus = img.optional.magic == PE32PLUS_MAGIC
    entry_size = 8 if is_plus else 4
    ordinal_flag = ORDINAL_FLAG_64 if is_plus else ORDINAL_FLAG_32
    out: list[ImportDescriptor] = []
    for i in range(_MAX_IMPORT_DESCRIPTORS):
        blob = read_virtual(img, d.rva + i * 20, 20)
        if blob is None or blob == b"\x00" * 20:
            break
        oft = _u32(blob, 0)
        name_rva = _u32(blob, 12)
        iat_rva = _u32(blob, 16)
        dll = _read_c_string(img, name_rva) or f"rva:{name_rva:#x}"
        thunks = _read_thunks_raw(img, oft or iat_rva, entry_size) or []
        names: list[str] = []
        for value in thunks:
            if value & ordinal_flag:
                names.append(f"ordinal:{value & 0xFFFF}")
                continue
            name = _read_c_string(img, (value & 0x7FFF_FFFF) + 2)
            names.append(name if name is not None else f"rva:{value:#x}")
        out.append(ImportDescriptor(dll, oft, iat_rva, names))
    return out


def zero_file_range(img: PeImage, offset: int, size: int) -> int:
    """Zero-fill ``size`` bytes at raw file ``offset`` in place, wherever they live.

    Touches section data, padding spans and the overlay; header bytes are left
    alone.  Returns how many bytes were actually cleared.
    """
    if size <= 0 or offset < 0:
        return 0
    cleared = 0
    lo, hi = offset, offset + size
    for s in img.sections:
        if not s.has_raw():
            continue
        a, b = s.pointer_to_raw_data, s.pointer_to_raw_data + s.size_of_raw_data
        cut_lo, cut_hi = max(lo, a), min(hi, b)
        if cut_lo < cut_hi:
            local_lo, local_hi = cut_lo - a, cut_hi - a
            s.data = s.data[:local_lo] + b"\x00" * (local_hi - local_lo) + s.data[local_hi:]
            cleared += cut_hi - cut_lo
    new_spans = []
    for off, blob in img.padding_spans:
        a, b = off, off + len(blob)
        cut_lo, cut_hi = max(lo, a), min(hi, b)
        if cut_lo < cut_hi:
            local_lo, local_hi = cut_lo - a, cut_hi - a
            blob = blob[:local_lo] + b"\x00" * (local_hi - local_lo) + blob[local_hi:]
            cleared += cut_hi - cut_lo
        new_spans.append((off, blob))
    img.padding_spans = new_spans
    base = img.last_raw_end
    a, b = base, base + len(img.overlay)
    cut_lo, cut_hi = max(lo, a), min(hi, b)
    if cut_lo < cut_hi:
        local_lo, local_hi = cut_lo - base, cut_hi - base
        img.overlay = (
            img.overlay[:local_lo] + b"\x00" * (local_hi - local_lo) + img.overlay[local_hi:]
        )
        cleared += cut_hi - cut_lo
    return cleared
