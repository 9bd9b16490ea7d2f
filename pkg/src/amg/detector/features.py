"""Feature extraction for the two black-box classifiers.

The structural extractor summarizes a parsed image into 128 numbers covering
header fields, section shape, imports, planted byte motifs and coarse byte
texture.  Counts that an attacker can only grow (motif hits, suspicious
imports, hot-band bytes) are expressed as densities or fractions so that
appending innocuous content genuinely dilutes them.

The bigram extractor ignores structure entirely: it hashes consecutive byte
pairs from the first 64 KiB into 1024 buckets and L1-normalizes the counts.
"""

from __future__ import annotations

import math

import numpy as np

from .. import pe_model, signals
from ..pe_model import PeImage

N_FEATURES_STRUCTURAL = 128
N_FEATURES_BIGRAM = 1024
BIGRAM_WINDOW = 65_536

# Build-timestamp boundaries (seconds since 1970) separating the ordinary
# release window from implausibly old or not-yet-reached dates.
TS_OLD_BOUNDARY = 1_120_000_000  # mid-2005
TS_NEW_BOUNDARY = 1_751_000_000  # mid-2025


def shannon_entropy(data: bytes) -> float:
    """Byte-level Shannon entropy in bits (0..8)."""
    if not data:
        return 0.0
    counts = np.bincount(np.frombuffer(data, dtype=np.uint8), minlength=256)
    p = counts[counts > 0] / len(data)
    return float(-(p * np.log2(p)).sum())


def _byte_counts(raw: bytes) -> np.ndarray:
    return np.bincount(np.frombuffer(raw, dtype=np.uint8), minlength=256).astype(np.float64)


def extract_features_structural(img: PeImage, raw: bytes) -> np.ndarray:
    """128 structural features for a parsed image and its exact bytes."""
    x = np.zeros(N_FEATURES_STRUCTURAL, dtype=np.float64)
    size = max(len(raw), 1)
    opt = img.optional

    x[0] = 1.0 if opt.checksum == 0 else 0.0
    stamp = img.coff.time_date_stamp
    x[1] = stamp / 2.0**32
    x[2] = 1.0 if stamp < TS_OLD_BOUNDARY else 0.0
    x[3] = 1.0 if stamp > TS_NEW_BOUNDARY else 0.0
    x[4] = 1.0 if img.directory(pe_model.DIR_DEBUG).rva else 0.0
    x[5] = 1.0 if img.directory(pe_model.DIR_SECURITY).size else 0.0
    x[6] = len(img.overlay) / size
    x[7] = 1.0 if img.overlay else 0.0
    x[8] = len(img.sections) / 16.0

    imports = pe_model.parse_imports(img)
    n_funcs = sum(len(d.function_names) for d in imports)
    suspicious_api = set(signals.SUSPICIOUS_APIS)
    n_susp = sum(
        1 for d in imports for fn in d.function_names if fn in suspicious_api
    )
    x[9] = len(imports) / 16.0
    x[10] = n_funcs / 64.0
    x[11] = n_susp / n_funcs if n_funcs else 0.0

    hits = signals.count_motif_hits(raw)
    x[12] = sum(hits) / (size / 4096.0)
    x[13] = sum(1 for h in hits if h) / len(hits)

    entropies = [shannon_entropy(s.data) for s in img.sections if s.data]
    if entropies:
        x[14] = (sum(entropies) / len(entropies)) / 8.0
        x[15] = max(entropies) / 8.0
        x[16] = min(entropies) / 8.0
    x[17] = img.header_slack / 4096.0
    x[18] = math.log2(size) / 32.0

    vs_slack = [
        max(s.virtual_size - s.size_of_raw_data, 0) / max(s.virtual_size, 1)
        for s in img.sections
    ]
    x[19] = sum(vs_slack) / len(vs_slack) if vs_slack else 0.0

    names = {s.display_name for s in img.sections}
    for i, vocab_name in enumerate(signals.SECTION_NAME_VOCAB):
        x[20 + i] = 1.0 if vocab_name in names else 0.0

    imported_funcs = {fn for d in imports for fn in d.function_names}
    for i, api in enumerate(signals.SUSPICIOUS_APIS):
        x[36 + i] = 1.0 if api in imported_funcs else 0.0

    for d in imports:
        x[52 + (hash_dll(d.dll_name) % 16)] = 1.0

    for i, h in enumerate(hits):
        x[68 + i] = 1.0 if h else 0.0

    counts = _byte_counts(raw)
    coarse = counts.reshape(16, 16).sum(axis=1) / size
    x[100:116] = coarse
    x[116] = counts[0x20:0x7F].sum() / size
    x[117] = counts[0] / size
    x[118] = counts[0xA0:0xC0].sum() / size

    entry = img.entry_section_index()
    if entry is not None:
        x[119] = shannon_entropy(img.sections[entry].data) / 8.0
        x[120] = opt.address_of_entry_point / max(opt.size_of_image, 1)
    x[121] = (
        sum(1 for s in img.sections if not s.has_raw()) / len(img.sections)
        if img.sections
        else 0.0
    )
    name_lens = [len(s.name.rstrip(b"\x00")) for s in img.sections]
    x[122] = (sum(name_lens) / len(name_lens)) / 8.0 if name_lens else 0.0
    x[123] = opt.number_of_rva_and_sizes / 16.0
    x[124] = opt.size_of_image / 2.0**24
    x[125] = opt.size_of_headers / 4096.0
    x[126] = len(img.dos_stub) / 1024.0
    x[127] = len(img.padding_spans) / 16.0
    return x


def hash_dll(name: str) -> int:
    """Stable tiny hash of a DLL name (case-folded) for bucketed presence flags."""
    h = 2166136261
    for ch in name.lower().encode("ascii", "replace"):
        h = ((h ^ ch) * 16777619) & 0xFFFFFFFF
    return h


def extract_features_bigram(raw: bytes) -> np.ndarray:
    """1024 hashed byte-bigram frequencies over the first 64 KiB."""
    window = np.frombuffer(raw[:BIGRAM_WINDOW], dtype=np.uint8)
    x = np.zeros(N_FEATURES_BIGRAM, dtype=np.float64)
    if window.size < 2:
        return x
    idx = ((window[:-1].astype(np.int32) << 8) | window[1:]) % N_FEATURES_BIGRAM
    counts = np.bincount(idx, minlength=N_FEATURES_BIGRAM).astype(np.float64)
    total = counts.sum()
    if total > 0:
        counts /= total
    x[:] = counts
    return x
