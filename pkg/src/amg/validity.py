"""Functionality validation for rewritten executables.

A file's behavior is summarized as three string sets (signatures, API calls,
processes).  The original file is profiled three times (control reports),
the rewritten file three times (test reports), and each test report's
features are compared against the controls with a set-agreement score.  If
any test run failed outright the file is declared broken; otherwise it
passes when at least two feature observations agree at the 0.95 level.

Two report sources exist: a structural backend that derives deterministic
pseudo-reports from the bytes themselves (parse health, import names, entry
section identity, planted byte motifs), and a fixture backend that replays
reports stored as JSON, for plugging in externally captured traces.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import pe_model, signals
from .pe_mods import ActionId, BenignContentPool, ModResult, Outcome, apply_action, ACTION_NAMES
from .seeds import fanout

AGREEMENT_THRESHOLD = 0.95
FEATURES = ("signatures", "api_calls", "processes")
REPORT_ROUNDS = 3
MATCH_MINIMUM = 2


class ArityError(ValueError):
    """Raised when a report triple is missing or oversized."""


@dataclass
class BehaviorReport:
    signatures: set[str] = field(default_factory=set)
    api_calls: set[str] = field(default_factory=set)
    processes: set[str] = field(default_factory=set)
    failed: bool = False

    def feature(self, name: str) -> set[str]:
        return getattr(self, name)

    def to_dict(self) -> dict:
        return {
            "signatures": sorted(self.signatures),
            "api_calls": sorted(self.api_calls),
            "processes": sorted(self.processes),
            "failed": self.failed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BehaviorReport":
        return cls(
            signatures=set(d.get("signatures", ())),
            api_calls=set(d.get("api_calls", ())),
            processes=set(d.get("processes", ())),
            failed=bool(d.get("failed", False)),
        )


@dataclass
class FeatureDetail:
    test_report: int
    feature: str
    best_agreement: float
    matched: bool


@dataclass
class ValidityVerdict:
    decision: str  # "success" or "failure"
    matched_features: int
    per_feature_detail: list[FeatureDetail] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.decision == "success"


def agreement(a: set[str], b: set[str]) -> float:
    """Set agreement in [0, 1]: intersection over the larger set; 1.0 for two empties."""
    if not a and not b:
        return 1.0
    return len(a & b) / max(len(a), len(b))


def evaluate_validity(
    controls: list[BehaviorReport], tests: list[BehaviorReport]
) -> ValidityVerdict:
    """Compare three test reports against three controls.

    Any failed test report is an immediate failure.  Otherwise every
    (test report, feature) pair that agrees at least 0.95 with some control's
    same feature counts once, and two counted pairs make a success.
    """
    if len(controls) != REPORT_ROUNDS or len(tests) != REPORT_ROUNDS:
        raise ArityError(
            f"need {REPORT_ROUNDS} control and {REPORT_ROUNDS} test reports, "
            f"got {len(controls)} and {len(tests)}"
        )
    matched = 0
    detail: list[FeatureDetail] = []
    for t_index, test in enumerate(tests):
        if test.failed:
            return ValidityVerdict("failure", matched, detail)
        for feature in FEATURES:
            best = 0.0
            hit = False
            for control in controls:
                score = agreement(test.feature(feature), control.feature(feature))
                best = max(best, score)
                if score >= AGREEMENT_THRESHOLD:
                    hit = True
                    break
            if hit:
                matched += 1
            detail.append(FeatureDetail(t_index, feature, best, hit))
    decision = "success" if matched >= MATCH_MINIMUM else "failure"
    return ValidityVerdict(decision, matched, detail)


# ---------------------------------------------------------------------------
# report backends


class StructuralBackend:
    """Deterministic pseudo-reports computed from the bytes themselves."""

    def reports_for(self, file_id: str, data: bytes, role: str) -> list[BehaviorReport]:
        report = self._report(data)
        return [
            BehaviorReport(
                set(report.signatures), set(report.api_calls), set(report.processes), report.failed
            )
            for _ in range(REPORT_ROUNDS)
        ]

    def _report(self, data: bytes) -> BehaviorReport:
        try:
            img = pe_model.parse(data)
        except pe_model.PeError:
            return BehaviorReport(failed=True)
        if any(d.severity == "error" for d in img.diagnostics):
            return BehaviorReport(failed=True)

        sigs = {f"diag:{d.severity}:{d.path}" for d in img.diagnostics}
        for i, count in enumerate(signals.count_motif_hits(data)):
            if count:
                sigs.add(f"motif:{i:02d}")

        calls = set()
        for desc in pe_model.parse_imports(img):
            for fn in desc.function_names:
                calls.add(f"{desc.dll_name.lower()}!{fn}")

        entry = img.entry_section_index()
        if entry is None:
            procs = {"proc:none"}
        else:
            digest = hashlib.sha256(img.sections[entry].data).hexdigest()[:16]
            procs = {f"proc:{digest}"}
        return BehaviorReport(signatures=sigs, api_calls=calls, processes=procs)


class FixtureBackend:
    """Replays reports stored as ``<id>.control_N.json`` / ``<id>.test_N.json``."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def reports_for(self, file_id: str, data: bytes, role: str) -> list[BehaviorReport]:
        out = []
        for i in range(1, REPORT_ROUNDS + 1):
            path = self.root / f"{file_id}.{role}_{i}.json"
            out.append(BehaviorReport.from_dict(json.loads(path.read_text())))
        return out


def write_fixture_report(root: str | Path, file_id: str, role: str, index: int,
                         report: BehaviorReport) -> Path:
    path = Path(root) / f"{file_id}.{role}_{index}.json"
    path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return path


# ---------------------------------------------------------------------------
# suite runner


@dataclass
class ValidityRow:
    action: str
    valid: int
    total: int
    outcomes: dict[str, int] = field(default_factory=dict)
    failures: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "action": self.action,
            "valid": self.valid,
            "total": self.total,
            "outcomes": dict(self.outcomes),
            "failures": list(self.failures),
        }


def run_validity_suite(
    entries: list[tuple[str, bytes]],
    action: ActionId,
    backend,
    pool: BenignContentPool,
    seed: int = 0,
    mutate=None,
) -> ValidityRow:
    """Apply one action to every file and tally how many stay valid.

    ``mutate`` overrides the action application for tests that want to model
    a deliberately corrupting rewrite; it must map (image, seed) to a
    :class:`ModResult`.
    """
    valid = 0
    outcomes: dict[str, int] = {}
    failures: list[str] = []
    for file_id, raw in entries:
        img = pe_model.parse(raw)
        action_seed = fanout(seed, "validity", file_id, int(action))
        if mutate is None:
            result: ModResult = apply_action(img, action, pool, seed=action_seed)
        else:
            result = mutate(img, action_seed)
        outcomes[result.outcome.value] = outcomes.get(result.outcome.value, 0) + 1
        if result.outcome is Outcome.APPLIED:
            modified = pe_model.serialize(result.image)
        else:
            modified = raw
        controls = backend.reports_for(file_id, raw, "control")
        tests = backend.reports_for(file_id, modified, "test")
        verdict = evaluate_validity(controls, tests)
        if verdict.ok:
            valid += 1
        else:
            failures.append(file_id)
    return ValidityRow(
        action=ACTION_NAMES[action],
        valid=valid,
        total=len(entries),
        outcomes=outcomes,
        failures=failures,
    )
