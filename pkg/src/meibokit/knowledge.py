"""Clinical-knowledge Q&A corpora: trial criteria and clinician cases."""

import csv
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from meibokit.clinical import MEASUREMENT_NAMES, DiseaseLabels, TriState
from meibokit.errors import KnowledgeError
from meibokit.reporting import QAPair, Source, render_answer


class Relation(Enum):
    LT = "<"
    LE = "<="
    GT = ">"
    GE = ">="
    RANGE = "range"

    @classmethod
    def parse(cls, raw) -> "Relation":
        text = str(raw or "").strip().lower()
        aliases = {
            "<": cls.LT, "lt": cls.LT,
            "<=": cls.LE, "le": cls.LE, "≤": cls.LE,
            ">": cls.GT, "gt": cls.GT,
            ">=": cls.GE, "ge": cls.GE, "≥": cls.GE,
            "range": cls.RANGE, "between": cls.RANGE,
        }
        if text not in aliases:
            raise KnowledgeError(f"unknown relation: {raw!r}")
        return aliases[text]


VARIABLE_DISPLAY = {
    "tmh_mm": "TMH",
    "nikbut_s": "NIKBUT",
    "ftbut_s": "FTBUT",
    "schirmer_mm": "Schirmer's test measurement",
    "osdi": "OSDI",
    "bulbar_hyperemia": "bulbar hyperemia",
    "mg_expression_quality": "MG expression quality",
    "mg_expression_quantity": "MG expression quantity",
}
VARIABLE_UNITS = {
    "tmh_mm": "mm",
    "nikbut_s": "sec",
    "ftbut_s": "sec",
    "schirmer_mm": "mm",
    "osdi": "",
    "bulbar_hyperemia": "",
    "mg_expression_quality": "",
    "mg_expression_quantity": "",
}


@dataclass
class TrialCriterion:
    trial_id: str
    variable: str
    relation: Relation
    low: float | None
    high: float | None
    meaning: str

    @property
    def units(self) -> str:
        return VARIABLE_UNITS[self.variable]

    def validate(self) -> None:
        if self.variable not in MEASUREMENT_NAMES:
            raise KnowledgeError(f"unknown variable name: {self.variable!r}")
        if not self.meaning.strip():
            raise KnowledgeError("empty meaning")
        if self.relation is Relation.RANGE:
            if self.low is None or self.high is None:
                raise KnowledgeError("range relation needs both low and high")
            if not self.low < self.high:
                raise KnowledgeError(f"inverted range: low={self.low} high={self.high}")
        else:
            if self.low is None:
                raise KnowledgeError("threshold relation needs a value in the low column")


@dataclass
class CriteriaIngestResult:
    criteria: list
    rejected: list  # (row_number, reason)


def _fmt_threshold(v: float) -> str:
    return str(int(v)) if v == int(v) else str(v)


def _parse_opt_float(raw):
    text = str(raw or "").strip()
    if not text:
        return None
    return float(text)


def ingest_trial_criteria(path) -> CriteriaIngestResult:
    """Read the criteria CSV contract: trial_id,variable,relation,low,high,meaning.

    Invalid rows (unknown variable, inverted range, empty meaning) are
    rejected individually with reasons.
    """
    path = Path(path)
    if not path.exists():
        raise KnowledgeError(f"criteria file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise KnowledgeError(f"criteria file {path} has no header row")
        missing = {"trial_id", "variable", "relation", "low", "high", "meaning"} - set(
            reader.fieldnames
        )
        if missing:
            raise KnowledgeError(f"criteria file {path} missing columns: {sorted(missing)}")
        rows = list(reader)

    criteria, rejected = [], []
    for i, row in enumerate(rows, start=1):
        try:
            criterion = TrialCriterion(
                trial_id=str(row.get("trial_id") or "").strip(),
                variable=str(row.get("variable") or "").strip(),
                relation=Relation.parse(row.get("relation")),
                low=_parse_opt_float(row.get("low")),
                high=_parse_opt_float(row.get("high")),
                meaning=str(row.get("meaning") or "").strip(),
            )
            criterion.validate()
        except (KnowledgeError, ValueError) as exc:
            rejected.append((i, str(exc)))
            continue
        criteria.append(criterion)
    return CriteriaIngestResult(criteria=criteria, rejected=rejected)


def criterion_phrase(criterion: TrialCriterion) -> str:
    name = VARIABLE_DISPLAY[criterion.variable]
    units = criterion.units
    suffix = f" {units}" if units else ""
    if criterion.relation is Relation.RANGE:
        return (
            f"{name} between {_fmt_threshold(criterion.low)} and "
            f"{_fmt_threshold(criterion.high)}{suffix}"
        )
    return f"{name} {criterion.relation.value} {_fmt_threshold(criterion.low)}{suffix}"


def criteria_to_qa(criteria) -> list:
    """One Q&A pair per criterion, order preserved, labels Unknown."""
    criteria = list(criteria)
    if not criteria:
        raise KnowledgeError("no criteria to convert")
    pairs = []
    for i, criterion in enumerate(criteria):
        pairs.append(
            QAPair(
                id=f"trial:{criterion.trial_id}:{i}",
                question=f"What does {criterion_phrase(criterion)} indicate?",
                answer=criterion.meaning,
                source=Source.TRIAL_KNOWLEDGE,
                labels=DiseaseLabels.unknown(),
            )
        )
    return pairs


@dataclass
class ClinicianCase:
    case_id: str
    presentation: str
    labels: DiseaseLabels
    diagnosis_names: list = field(default_factory=list)
    rationale: str = ""

    def validate(self) -> None:
        if not self.case_id.strip():
            raise KnowledgeError("case without case_id")
        if not self.presentation.strip():
            raise KnowledgeError(f"case {self.case_id}: empty presentation")
        if not self.rationale.strip():
            raise KnowledgeError(f"case {self.case_id}: missing rationale")


def load_clinician_cases(path) -> list:
    """Read the cases JSON contract: array of
    {case_id, presentation, diagnosis:{dry_eye,mgd,blepharitis,names[]}, rationale}.
    """
    path = Path(path)
    if not path.exists():
        raise KnowledgeError(f"cases file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise KnowledgeError(f"malformed cases file {path}: {exc}") from None
    if not isinstance(data, list):
        raise KnowledgeError(f"cases file {path} must be a JSON array")
    cases = []
    for entry in data:
        diagnosis = entry.get("diagnosis") or {}
        case = ClinicianCase(
            case_id=str(entry.get("case_id") or ""),
            presentation=str(entry.get("presentation") or ""),
            labels=DiseaseLabels(
                dry_eye=TriState.parse(diagnosis.get("dry_eye")),
                mgd=TriState.parse(diagnosis.get("mgd")),
                blepharitis=TriState.parse(diagnosis.get("blepharitis")),
            ),
            diagnosis_names=[str(n) for n in diagnosis.get("names", [])],
            rationale=str(entry.get("rationale") or ""),
        )
        case.validate()
        cases.append(case)
    return cases


def cases_to_qa(cases) -> list:
    """One Q&A pair per clinician case: diagnosis statement, then rationale."""
    cases = list(cases)
    if not cases:
        raise KnowledgeError("no cases to convert")
    pairs = []
    for case in cases:
        case.validate()
        names = ""
        if case.diagnosis_names:
            names = f" The diagnosed conditions are: {', '.join(case.diagnosis_names)}."
        pairs.append(
            QAPair(
                id=f"case:{case.case_id}",
                question=case.presentation,
                answer=f"{render_answer(case.labels)}{names} {case.rationale}".strip(),
                source=Source.CLINICIAN_CASE,
                labels=case.labels,
            )
        )
    return pairs
