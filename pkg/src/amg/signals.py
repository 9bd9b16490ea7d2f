"""Planted-signal vocabulary shared by the corpus generator and detector A.

The synthetic corpus marks its "malicious" files with a handful of structural
tells: rare 16-byte motifs sprinkled through section data, imports of
suspicious API names, oddly named sections, and header quirks.  Detector A's
feature extractor looks for the same vocabulary.  The RL observation code
deliberately does not import this module; the agent only ever sees byte
statistics and generic header scalars.
"""

from __future__ import annotations

import hashlib


def _motif(i: int) -> bytes:
    return hashlib.sha256(f"amg-motif-{i:02d}".encode()).digest()[:16]


#: 16-byte patterns that essentially never occur by accident.
MOTIFS: tuple[bytes, ...] = tuple(_motif(i) for i in range(32))

#: API names the corpus plants into malicious import tables.
SUSPICIOUS_APIS: tuple[str, ...] = (
    "VirtualAllocEx",
    "WriteProcessMemory",
    "CreateRemoteThread",
    "OpenProcess",
    "SetWindowsHookExA",
    "RegSetValueExA",
    "InternetOpenUrlA",
    "URLDownloadToFileA",
    "WinExec",
    "ShellExecuteA",
    "IsDebuggerPresent",
    "AdjustTokenPrivileges",
    "CryptEncrypt",
    "GetAsyncKeyState",
    "SetFileAttributesA",
    "TerminateProcess",
)

#: Section names that read as packer/crypter output.
SUSPICIOUS_SECTION_NAMES: tuple[bytes, ...] = (
    b".enc",
    b".xyz",
    b".upx0",
    b".upx1",
    b".vmp0",
    b".crypt",
    b".zz",
    b".pack",
)

#: Conventional section names seen in ordinary executables.
COMMON_SECTION_NAMES: tuple[bytes, ...] = (
    b".text",
    b".data",
    b".rdata",
    b".rsrc",
    b".reloc",
    b".idata",
    b".bss",
    b".tls",
)

#: Fixed 16-slot vocabulary used for section-name one-hot features.
SECTION_NAME_VOCAB: tuple[bytes, ...] = COMMON_SECTION_NAMES + SUSPICIOUS_SECTION_NAMES


def count_motif_hits(data: bytes) -> list[int]:
    """Occurrence count of every motif in ``data`` (non-overlapping)."""
    return [data.count(m) for m in MOTIFS]
