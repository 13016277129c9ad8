"""Clinical metadata ingestion and the per-eye record model.

The table contract is strict-name, order-free: CSV (UTF-8, header row) or a
JSON array of objects whose keys equal the record field names. Disease
labels are tri-state so one schema serves both training rows (definite
labels) and inference rows (Unknown).
"""

import csv
import json
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

from meibokit.errors import DuplicateIdError, TableError
from meibokit.morphometry import EyelidMorphology


class TriState(Enum):
    YES = "Yes"
    NO = "No"
    UNKNOWN = "Unknown"

    @classmethod
    def parse(cls, raw) -> "TriState":
        if raw is None:
            return cls.UNKNOWN
        text = str(raw).strip()
        if not text:
            return cls.UNKNOWN
        low = text.lower()
        if low in ("yes", "y", "true", "1"):
            return cls.YES
        if low in ("no", "n", "false", "0"):
            return cls.NO
        if low in ("unknown", "na", "n/a", "none"):
            return cls.UNKNOWN
        raise ValueError(f"not a tri-state label: {raw!r}")


class Gender(Enum):
    MALE = "Male"
    FEMALE = "Female"
    OTHER_UNKNOWN = "Other/Unknown"

    @classmethod
    def parse(cls, raw) -> "Gender":
        text = ("" if raw is None else str(raw)).strip().lower()
        if text in ("male", "m"):
            return cls.MALE
        if text in ("female", "f"):
            return cls.FEMALE
        return cls.OTHER_UNKNOWN


DISEASE_ORDER = ("dry_eye", "mgd", "blepharitis")


@dataclass(frozen=True)
class DiseaseLabels:
    """Independent tri-state labels; no implication between conditions."""

    dry_eye: TriState = TriState.UNKNOWN
    mgd: TriState = TriState.UNKNOWN
    blepharitis: TriState = TriState.UNKNOWN

    def is_definite(self) -> bool:
        return TriState.UNKNOWN not in (self.dry_eye, self.mgd, self.blepharitis)

    def to_dict(self) -> dict:
        return {name: getattr(self, name).value for name in DISEASE_ORDER}

    @classmethod
    def from_dict(cls, d: dict) -> "DiseaseLabels":
        return cls(**{name: TriState.parse(d.get(name)) for name in DISEASE_ORDER})

    @classmethod
    def unknown(cls) -> "DiseaseLabels":
        return cls()


SUBJECT_EYE_ID_RE = re.compile(r"^(?P<patient>.+)_(?P<category>[^_]+)_(?P<eye>[LR])$")

# measurement fields: (name, must_be_nonnegative, closed range or None)
MEASUREMENT_FIELDS = (
    ("tmh_mm", True, None),
    ("nikbut_s", True, None),
    ("ftbut_s", True, None),
    ("schirmer_mm", True, None),
    ("osdi", True, (0.0, 100.0)),
    ("bulbar_hyperemia", True, None),
    ("mg_expression_quality", False, None),
    ("mg_expression_quantity", False, None),
)
MEASUREMENT_NAMES = tuple(name for name, _, _ in MEASUREMENT_FIELDS)

TABLE_COLUMNS = (
    ("subject_eye_id", "gender", "age", "race")
    + MEASUREMENT_NAMES
    + DISEASE_ORDER
)


@dataclass
class ClinicalRecord:
    subject_eye_id: str
    gender: Gender = Gender.OTHER_UNKNOWN
    age: int = 0
    race: str = ""
    tmh_mm: float | None = None
    nikbut_s: float | None = None
    ftbut_s: float | None = None
    schirmer_mm: float | None = None
    osdi: float | None = None
    bulbar_hyperemia: float | None = None
    mg_expression_quality: float | None = None
    mg_expression_quantity: float | None = None
    morphology: EyelidMorphology | None = None
    labels: DiseaseLabels = field(default_factory=DiseaseLabels.unknown)

    @property
    def patient_id(self) -> str:
        return parse_subject_eye_id(self.subject_eye_id)[0]

    @property
    def eye(self) -> str:
        return parse_subject_eye_id(self.subject_eye_id)[2]

    def validate(self) -> None:
        parse_subject_eye_id(self.subject_eye_id)
        if self.age <= 0:
            raise TableError(f"{self.subject_eye_id}: age must be positive, got {self.age}")
        for name, nonneg, rng in MEASUREMENT_FIELDS:
            v = getattr(self, name)
            if v is None:
                continue
            if nonneg and v < 0:
                raise TableError(f"{self.subject_eye_id}: {name} must be >= 0, got {v}")
            if rng and not (rng[0] <= v <= rng[1]):
                raise TableError(
                    f"{self.subject_eye_id}: {name} must be in [{rng[0]}, {rng[1]}], got {v}"
                )

    def to_row(self) -> dict:
        row = {
            "subject_eye_id": self.subject_eye_id,
            "gender": self.gender.value,
            "age": self.age,
            "race": self.race,
        }
        for name in MEASUREMENT_NAMES:
            row[name] = getattr(self, name)
        row.update(self.labels.to_dict())
        return row


def parse_subject_eye_id(subject_eye_id: str) -> tuple:
    """Split ``<patientID>_<category>_<L|R>`` into its three parts."""
    m = SUBJECT_EYE_ID_RE.match(subject_eye_id or "")
    if not m:
        raise TableError(
            f"subject_eye_id {subject_eye_id!r} does not match <patientID>_<category>_<L|R>"
        )
    return m.group("patient"), m.group("category"), m.group("eye")


@dataclass
class RowIssue:
    row: int  # 1-based data row number (or JSON array index)
    reason: str


@dataclass
class TableParseResult:
    records: list
    rejected: list
    warnings: list


def _parse_optional_float(raw, name):
    if raw is None:
        return None
    text = str(raw).strip()
    if not text:
        return None
    try:
        return float(text)
    except ValueError:
        raise ValueError(f"{name}: not a number: {raw!r}") from None


def _record_from_mapping(row: dict) -> ClinicalRecord:
    sid = str(row.get("subject_eye_id") or "").strip()
    parse_subject_eye_id(sid)
    age_raw = row.get("age")
    try:
        age = int(str(age_raw).strip())
    except (TypeError, ValueError):
        raise ValueError(f"age: not an integer: {age_raw!r}") from None
    labels = DiseaseLabels(
        dry_eye=TriState.parse(row.get("dry_eye")),
        mgd=TriState.parse(row.get("mgd")),
        blepharitis=TriState.parse(row.get("blepharitis")),
    )
    kwargs = {}
    for name in MEASUREMENT_NAMES:
        kwargs[name] = _parse_optional_float(row.get(name), name)
    rec = ClinicalRecord(
        subject_eye_id=sid,
        gender=Gender.parse(row.get("gender")),
        age=age,
        race=str(row.get("race") or "").strip(),
        labels=labels,
        **kwargs,
    )
    rec.validate()
    return rec


def parse_clinical_table(path) -> TableParseResult:
    """Parse a clinical CSV or JSON table into validated records.

    Row-level failures are collected, not fatal; unknown columns produce a
    warning; duplicated subject_eye_id raises DuplicateIdError.
    """
    path = Path(path)
    if not path.exists():
        raise TableError(f"clinical table not found: {path}")
    rows: list
    warnings: list = []
    if path.suffix.lower() == ".json":
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise TableError(f"malformed JSON table {path}: {exc}") from None
        if not isinstance(data, list):
            raise TableError(f"JSON table {path} must be an array of objects")
        rows = data
        seen_columns = set()
        for r in rows:
            if isinstance(r, dict):
                seen_columns.update(r.keys())
    else:
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise TableError(f"clinical table {path} has no header row")
            seen_columns = set(reader.fieldnames)
            rows = list(reader)
    unknown = seen_columns - set(TABLE_COLUMNS)
    if unknown:
        warnings.append(f"ignoring unknown columns: {sorted(unknown)}")

    records, rejected = [], []
    for i, row in enumerate(rows, start=1):
        if not isinstance(row, dict):
            rejected.append(RowIssue(i, "row is not an object"))
            continue
        try:
            records.append(_record_from_mapping(row))
        except (ValueError, TableError) as exc:
            rejected.append(RowIssue(i, str(exc)))

    counts: dict = {}
    for rec in records:
        counts[rec.subject_eye_id] = counts.get(rec.subject_eye_id, 0) + 1
    duplicates = [sid for sid, n in counts.items() if n > 1]
    if duplicates:
        raise DuplicateIdError(duplicates)
    return TableParseResult(records=records, rejected=rejected, warnings=warnings)


def write_clinical_csv(records, path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(TABLE_COLUMNS))
        writer.writeheader()
        for rec in records:
            row = rec.to_row()
            writer.writerow({k: ("" if row[k] is None else row[k]) for k in TABLE_COLUMNS})


@dataclass
class JoinReport:
    joined: list
    metadata_only: list
    orphan_morphologies: list

    def to_json_dict(self) -> dict:
        return {
            "joined": self.joined,
            "metadata_only": self.metadata_only,
            "orphan_morphologies": self.orphan_morphologies,
        }


def join_morphology(records, morphologies) -> tuple:
    """Attach morphology to records by subject_eye_id.

    Returns (new records, JoinReport). Records without a match stay
    metadata-only; morphologies without a record are reported as orphans.
    Label and measurement fields are never altered.
    """
    by_id = {}
    for morph in morphologies:
        if morph.subject_eye_id in by_id:
            raise TableError(f"duplicate morphology for {morph.subject_eye_id}")
        by_id[morph.subject_eye_id] = morph
    joined, metadata_only, out = [], [], []
    for rec in records:
        morph = by_id.pop(rec.subject_eye_id, None)
        if morph is None:
            metadata_only.append(rec.subject_eye_id)
            out.append(rec)
        else:
            joined.append(rec.subject_eye_id)
            out.append(replace(rec, morphology=morph))
    report = JoinReport(
        joined=joined,
        metadata_only=metadata_only,
        orphan_morphologies=sorted(by_id.keys()),
    )
    return out, report
