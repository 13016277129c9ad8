"""Dataset assembly: ablation masking, record-to-pair composition, split, JSONL."""

import hashlib
import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

from meibokit.clinical import MEASUREMENT_NAMES, DiseaseLabels, parse_subject_eye_id
from meibokit.errors import AssemblyError
from meibokit.reporting import QAPair, Source, parse_summary, render_report_deterministic

KNOWLEDGE_SOURCES = (Source.TRIAL_KNOWLEDGE, Source.CLINICIAN_CASE)
MG_EXPRESSION_FIELDS = ("mg_expression_quality", "mg_expression_quantity")
METADATA_FIELDS = tuple(n for n in MEASUREMENT_NAMES if n not in MG_EXPRESSION_FIELDS)


@dataclass(frozen=True)
class AblationConfig:
    """Which training variables survive into the rendered question."""

    include_metadata: bool = True
    include_morphology: bool = True
    include_mg_expression: bool = True
    include_real_diagnoses: bool = True

    def validate(self) -> None:
        others = (
            self.include_morphology
            or self.include_mg_expression
            or self.include_real_diagnoses
        )
        if others and not self.include_metadata:
            raise AssemblyError("include_metadata must be true whenever any other flag is true")

    def to_dict(self) -> dict:
        return {
            "include_metadata": self.include_metadata,
            "include_morphology": self.include_morphology,
            "include_mg_expression": self.include_mg_expression,
            "include_real_diagnoses": self.include_real_diagnoses,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AblationConfig":
        cfg = cls(**{k: bool(d[k]) for k in cls().to_dict() if k in d})
        cfg.validate()
        return cfg


def apply_ablation(record, cfg: AblationConfig):
    """Masked copy of a record; disease labels are always retained."""
    cfg.validate()
    changes = {}
    if not cfg.include_morphology:
        changes["morphology"] = None
    if not cfg.include_mg_expression:
        changes.update({name: None for name in MG_EXPRESSION_FIELDS})
    if not cfg.include_metadata:
        changes.update({name: None for name in METADATA_FIELDS})
    return replace(record, **changes) if changes else replace(record)


def deterministic_render_batch(records) -> list:
    return [render_report_deterministic(rec) for rec in records]


@dataclass
class AssembleResult:
    pairs: list
    rejected: list  # (subject_eye_id, reason)


def assemble(
    records,
    knowledge_pairs=(),
    cfg: AblationConfig | None = None,
    render_batch=None,
) -> AssembleResult:
    """Compose labeled records (ablated view) plus knowledge pairs.

    Records with any Unknown label are rejected from training assembly and
    itemized. Trial-knowledge pairs are always appended when provided;
    clinician-case pairs only when ``include_real_diagnoses`` is set.
    Nothing is dropped silently: |pairs| + |rejected| accounts for every
    input record.
    """
    cfg = cfg or AblationConfig()
    cfg.validate()
    render_batch = render_batch or deterministic_render_batch

    renderable, rejected = [], []
    for rec in records:
        if not rec.labels.is_definite():
            rejected.append((rec.subject_eye_id, "labels not definite"))
        else:
            renderable.append(apply_ablation(rec, cfg))

    pairs = []
    if renderable:
        rendered = render_batch(renderable)
        by_id = {p.id: p for p in rendered}
        if len(by_id) != len(rendered):
            raise AssemblyError("renderer returned duplicate pair ids")
        for rec in renderable:
            pair = by_id.get(rec.subject_eye_id)
            if pair is None:
                rejected.append((rec.subject_eye_id, "renderer returned no pair"))
                continue
            pairs.append(replace(pair, labels=rec.labels))

    for pair in knowledge_pairs:
        if pair.source is Source.TRIAL_KNOWLEDGE:
            pairs.append(pair)
        elif pair.source is Source.CLINICIAN_CASE:
            if cfg.include_real_diagnoses:
                pairs.append(pair)
        else:
            raise AssemblyError(
                f"knowledge pair {pair.id} has non-knowledge source {pair.source.value}"
            )
    return AssembleResult(pairs=pairs, rejected=rejected)


class Grouping(Enum):
    BY_SUBJECT = "by_subject"
    BY_RECORD = "by_record"


@dataclass
class DatasetSplit:
    train: list
    test: list
    seed: int
    ratio: float
    grouping: Grouping

    def manifest_dict(self) -> dict:
        train_ids = [p.id for p in self.train]
        test_ids = [p.id for p in self.test]
        digest = hashlib.sha256(
            json.dumps([train_ids, test_ids]).encode()
        ).hexdigest()
        return {
            "seed": self.seed,
            "ratio": self.ratio,
            "grouping": self.grouping.value,
            "counts": {
                "train": len(self.train),
                "test": len(self.test),
                "knowledge_in_train": sum(
                    1 for p in self.train if p.source in KNOWLEDGE_SOURCES
                ),
            },
            "train_ids": train_ids,
            "test_ids": test_ids,
            "content_hash": digest,
        }


def _shuffle_key(seed: int, key: str) -> str:
    return hashlib.sha256(f"{seed}:{key}".encode()).hexdigest()


def split(pairs, ratio: float, seed: int, grouping: Grouping = Grouping.BY_SUBJECT) -> DatasetSplit:
    """Deterministic train/test split.

    The shuffle is keyed by sha256(seed, group key), never by input
    position, so the split is invariant to input order. Knowledge pairs
    always land in train and are excluded from the ratio arithmetic.
    Under by_record the train side gets floor(n * ratio) pairs and the
    remainder goes to test; under by_subject whole patient groups are
    assigned to test (in shuffle order) until the test side reaches that
    same remainder target, so the test fraction lands within one
    subject-group of the requested complement.
    """
    if not 0 < ratio < 1:
        raise AssemblyError(f"ratio must be in (0, 1), got {ratio}")
    pairs = list(pairs)
    seen = set()
    for p in pairs:
        if p.id in seen:
            raise AssemblyError(f"duplicate pair id: {p.id}")
        seen.add(p.id)
    knowledge = [p for p in pairs if p.source in KNOWLEDGE_SOURCES]
    record_pairs = [p for p in pairs if p.source not in KNOWLEDGE_SOURCES]

    if grouping is Grouping.BY_RECORD:
        groups = [(p.id, [p]) for p in record_pairs]
    else:
        by_patient: dict = {}
        for p in record_pairs:
            patient, _, _ = parse_subject_eye_id(p.id)
            by_patient.setdefault(patient, []).append(p)
        groups = sorted(by_patient.items())
    if len(groups) < 2:
        raise AssemblyError(f"need at least 2 groups to split, got {len(groups)}")

    groups = sorted(groups, key=lambda kv: _shuffle_key(seed, kv[0]))
    n = len(record_pairs)
    target_test = n - int(n * ratio)

    test, train = [], []
    test_count = 0
    for _, members in groups:
        if test_count < target_test:
            test.extend(members)
            test_count += len(members)
        else:
            train.extend(members)
    train.extend(knowledge)
    return DatasetSplit(train=train, test=test, seed=seed, ratio=ratio, grouping=grouping)


def _pair_line(pair: QAPair, question_only: bool) -> str:
    obj = {
        "id": pair.id,
        "text": pair.as_text(),
        "labels": pair.labels.to_dict(),
        "source": pair.source.value,
    }
    if question_only:
        obj["question_only"] = pair.question_only_text()
    return json.dumps(obj, ensure_ascii=False)


def emit_jsonl(dataset: DatasetSplit, out_dir) -> dict:
    """Write train.jsonl / test.jsonl plus the split manifest.

    Test lines additionally carry a ``question_only`` text with the
    assistant body stripped. Returns the written paths.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "train": out_dir / "train.jsonl",
        "test": out_dir / "test.jsonl",
        "manifest": out_dir / "split_manifest.json",
    }
    with paths["train"].open("w", encoding="utf-8") as fh:
        for pair in dataset.train:
            fh.write(_pair_line(pair, question_only=False) + "\n")
    with paths["test"].open("w", encoding="utf-8") as fh:
        for pair in dataset.test:
            fh.write(_pair_line(pair, question_only=True) + "\n")
    paths["manifest"].write_text(
        json.dumps(dataset.manifest_dict(), indent=2, sort_keys=True) + "\n"
    )
    return paths


def read_jsonl_pairs(path) -> list:
    """Read pairs back from an emitted JSONL file (round-trip counterpart)."""
    pairs = []
    for line_no, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise AssemblyError(f"{path}:{line_no}: malformed JSON line: {exc}") from None
        parsed = parse_summary(obj["text"], source=Source(obj["source"]))
        if len(parsed) != 1:
            raise AssemblyError(f"{path}:{line_no}: expected exactly one pair in text")
        pair = parsed[0]
        pairs.append(
            QAPair(
                id=obj["id"],
                question=pair.question,
                answer=pair.answer,
                source=Source(obj["source"]),
                labels=DiseaseLabels.from_dict(obj.get("labels", {})),
            )
        )
    return pairs
