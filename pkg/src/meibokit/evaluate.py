"""Label extraction from free-form answers and per-disease diagnostic metrics."""

import csv
import io
import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from meibokit.clinical import DISEASE_ORDER, DiseaseLabels, TriState
from meibokit.errors import EvaluationError

DISEASE_DISPLAY = {"dry_eye": "DE", "mgd": "MGD", "blepharitis": "Blepharitis"}

_DISEASE_PATTERNS = {
    "dry_eye": (r"dry\s+eye", r"\bDE\b"),
    "mgd": (r"meibomian\s+gland\s+dysfunction", r"\bMGD\b"),
    "blepharitis": (r"blepharitis",),
}
_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+|\n+")
_VERDICT_TOKEN = re.compile(r"\b(yes|no|unknown)\b", re.IGNORECASE)


def extract_labels_detailed(raw_answer: str) -> tuple:
    """Per-disease extraction: disease mention, then the nearest following
    yes/no token in the same sentence.

    Total function: no mention or no verdict token yields Unknown;
    conflicting verdicts across mentions yield Unknown with a note.
    """
    sentences = [s for s in _SENTENCE_SPLIT.split(raw_answer or "") if s]
    notes = []
    values = {}
    for disease in DISEASE_ORDER:
        verdicts = []
        for sentence in sentences:
            tokens = list(_VERDICT_TOKEN.finditer(sentence))
            for pattern in _DISEASE_PATTERNS[disease]:
                for mention in re.finditer(pattern, sentence, re.IGNORECASE):
                    following = [t for t in tokens if t.start() >= mention.end()]
                    if following:
                        verdicts.append(following[0].group(1).lower())
        distinct = set(verdicts)
        if not distinct:
            values[disease] = TriState.UNKNOWN
            notes.append(f"{DISEASE_DISPLAY[disease]}: no mention with a yes/no verdict")
        elif len(distinct) > 1:
            values[disease] = TriState.UNKNOWN
            notes.append(
                f"{DISEASE_DISPLAY[disease]}: conflicting verdicts {sorted(distinct)}"
            )
        else:
            values[disease] = {
                "yes": TriState.YES,
                "no": TriState.NO,
                "unknown": TriState.UNKNOWN,
            }[distinct.pop()]
    return DiseaseLabels(**values), notes


def extract_labels(raw_answer: str) -> DiseaseLabels:
    return extract_labels_detailed(raw_answer)[0]


@dataclass
class PredictionRecord:
    id: str
    raw_answer: str
    extracted: DiseaseLabels = None
    extraction_notes: list = field(default_factory=list)

    def __post_init__(self):
        if self.extracted is None:
            self.extracted, self.extraction_notes = extract_labels_detailed(self.raw_answer)


def load_predictions_jsonl(path) -> list:
    """Read inference output lines: {"id", "raw_answer"}."""
    path = Path(path)
    preds = []
    for line_no, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise EvaluationError(f"{path}:{line_no}: malformed JSON line: {exc}") from None
        if "id" not in obj or "raw_answer" not in obj:
            raise EvaluationError(f"{path}:{line_no}: line needs id and raw_answer keys")
        preds.append(PredictionRecord(id=str(obj["id"]), raw_answer=str(obj["raw_answer"])))
    return preds


class ScoringPolicy(Enum):
    COUNT_AS_WRONG = "count_as_wrong"
    EXCLUDE = "exclude"


@dataclass
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0
    unknown_pred_pos: int = 0  # prediction Unknown, truth Yes
    unknown_pred_neg: int = 0  # prediction Unknown, truth No

    @property
    def unknown_pred(self) -> int:
        return self.unknown_pred_pos + self.unknown_pred_neg

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn + self.unknown_pred

    def to_json_dict(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "tn": self.tn,
            "fn": self.fn,
            "unknown_pred": self.unknown_pred,
        }


@dataclass
class DiseaseMetrics:
    accuracy: float | None
    sensitivity: float | None
    specificity: float | None
    f1: float | None
    counts: ConfusionCounts

    def to_json_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "f1": self.f1,
            "counts": self.counts.to_json_dict(),
        }


def metrics_from_counts(counts: ConfusionCounts, policy: ScoringPolicy) -> DiseaseMetrics:
    """Acc/SN/SP/F1 from a confusion decomposition under an Unknown policy.

    count_as_wrong keeps Unknown predictions in every denominator (they can
    never be correct); exclude drops them. Zero-denominator metrics are
    None; F1 is 0 when there are positives but no true positive.
    """
    if policy is ScoringPolicy.COUNT_AS_WRONG:
        pos = counts.tp + counts.fn + counts.unknown_pred_pos
        neg = counts.tn + counts.fp + counts.unknown_pred_neg
    else:
        pos = counts.tp + counts.fn
        neg = counts.tn + counts.fp
    total = pos + neg
    accuracy = (counts.tp + counts.tn) / total if total else None
    sensitivity = counts.tp / pos if pos else None
    specificity = counts.tn / neg if neg else None
    predicted_pos = counts.tp + counts.fp
    if counts.tp > 0:
        precision = counts.tp / predicted_pos
        f1 = 2 * precision * sensitivity / (precision + sensitivity)
    elif pos > 0 or predicted_pos > 0:
        f1 = 0.0
    else:
        f1 = None
    return DiseaseMetrics(
        accuracy=accuracy,
        sensitivity=sensitivity,
        specificity=specificity,
        f1=f1,
        counts=counts,
    )


@dataclass
class EvalReport:
    model_name: str
    policy: ScoringPolicy
    per_disease: dict  # disease name -> DiseaseMetrics
    ablation: object = None  # AblationConfig | None
    split_manifest_hash: str | None = None

    def has_unscorable_disease(self) -> bool:
        return any(m.counts.total == 0 for m in self.per_disease.values())

    def to_json_dict(self) -> dict:
        return {
            "model_name": self.model_name,
            "policy": self.policy.value,
            "per_disease": {
                name: metrics.to_json_dict() for name, metrics in self.per_disease.items()
            },
            "ablation": self.ablation.to_dict() if self.ablation is not None else None,
            "split_manifest_hash": self.split_manifest_hash,
        }


def score(
    preds,
    truth_records,
    policy: ScoringPolicy = ScoringPolicy.COUNT_AS_WRONG,
    model_name: str = "",
    ablation=None,
    split_manifest_hash: str | None = None,
) -> EvalReport:
    """Score predictions against ground-truth records, per disease.

    Every prediction id must exist in the truth set and every scored truth
    label must be definite. Unknown predictions are never silently dropped:
    they are counted per ``policy``.
    """
    truth_by_id = {rec.subject_eye_id: rec.labels for rec in truth_records}
    seen = set()
    for pred in preds:
        if pred.id in seen:
            raise EvaluationError(f"duplicate prediction id: {pred.id}")
        seen.add(pred.id)
        if pred.id not in truth_by_id:
            raise EvaluationError(f"prediction id missing from truth: {pred.id}")

    per_disease = {}
    for disease in DISEASE_ORDER:
        counts = ConfusionCounts()
        for pred in preds:
            truth = getattr(truth_by_id[pred.id], disease)
            if truth is TriState.UNKNOWN:
                raise EvaluationError(
                    f"truth label for {pred.id}/{disease} is Unknown; cannot score"
                )
            predicted = getattr(pred.extracted, disease)
            if predicted is TriState.UNKNOWN:
                if truth is TriState.YES:
                    counts.unknown_pred_pos += 1
                else:
                    counts.unknown_pred_neg += 1
            elif predicted is TriState.YES:
                if truth is TriState.YES:
                    counts.tp += 1
                else:
                    counts.fp += 1
            else:
                if truth is TriState.NO:
                    counts.tn += 1
                else:
                    counts.fn += 1
        per_disease[disease] = metrics_from_counts(counts, policy)
    return EvalReport(
        model_name=model_name,
        policy=policy,
        per_disease=per_disease,
        ablation=ablation,
        split_manifest_hash=split_manifest_hash,
    )


def _pct(value: float | None) -> str:
    return "--" if value is None else f"{100.0 * value:.1f}"


_METRIC_COLS = ("accuracy", "sensitivity", "specificity", "f1")
_METRIC_HEADS = ("Acc.", "SN", "SP", "F1")


def render_comparison_table(reports, fmt: str = "text") -> str:
    """Model-per-row comparison: four metric columns per disease.

    Percentages to one decimal; undefined metrics render as ``--``.
    """
    reports = list(reports)
    if not reports:
        raise EvaluationError("no reports to render")
    disease_sets = {tuple(r.per_disease.keys()) for r in reports}
    if len(disease_sets) != 1:
        raise EvaluationError("reports have heterogeneous disease sets")
    diseases = list(disease_sets.pop())

    header = ["Method"]
    for disease in diseases:
        header.extend(f"{DISEASE_DISPLAY[disease]} {h}" for h in _METRIC_HEADS)
    rows = [header]
    for report in reports:
        row = [report.model_name or "(unnamed)"]
        for disease in diseases:
            metrics = report.per_disease[disease]
            row.extend(_pct(getattr(metrics, col)) for col in _METRIC_COLS)
        rows.append(row)
    return _render_rows(rows, fmt)


def render_ablation_table(reports, fmt: str = "text") -> str:
    """Flag columns plus per-disease accuracy, one row per ablation run."""
    reports = list(reports)
    if not reports:
        raise EvaluationError("no reports to render")
    disease_sets = {tuple(r.per_disease.keys()) for r in reports}
    if len(disease_sets) != 1:
        raise EvaluationError("reports have heterogeneous disease sets")
    diseases = list(disease_sets.pop())

    header = ["Metadata", "Morphology", "MG-Express.", "Real Diag."]
    header.extend(f"{DISEASE_DISPLAY[d]} Acc." for d in diseases)
    rows = [header]
    for report in reports:
        if report.ablation is None:
            raise EvaluationError(
                f"report {report.model_name!r} carries no ablation config"
            )
        flags = report.ablation
        row = [
            "yes" if flags.include_metadata else "no",
            "yes" if flags.include_morphology else "no",
            "yes" if flags.include_mg_expression else "no",
            "yes" if flags.include_real_diagnoses else "no",
        ]
        row.extend(_pct(report.per_disease[d].accuracy) for d in diseases)
        rows.append(row)
    return _render_rows(rows, fmt)


def _render_rows(rows, fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerows(rows)
        return buf.getvalue()
    if fmt != "text":
        raise EvaluationError(f"unknown table format: {fmt!r}")
    widths = [max(len(str(row[i])) for row in rows) for i in range(len(rows[0]))]
    lines = []
    for i, row in enumerate(rows):
        lines.append("  ".join(str(cell).ljust(w) for cell, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
