"""Dataset validation and loading over the train/test JSONL file contract.

Each line is a JSON object with at least {"id", "text"}; text must contain
exactly one "###Human:" and one "###Assistant:" marker. Test-side lines
additionally carry "question_only".
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

HUMAN_MARKER = "###Human:"
ASSISTANT_MARKER = "###Assistant:"


class DatasetError(ValueError):
    pass


@dataclass
class DatasetStats:
    count: int
    length_percentiles: dict  # whitespace-token counts at p50/p90/max
    label_distribution: dict  # disease -> value -> count
    failures: list  # (line_number, reason)

    @property
    def ok(self) -> bool:
        return not self.failures and self.count > 0

    def to_json_dict(self) -> dict:
        return {
            "count": self.count,
            "length_percentiles": self.length_percentiles,
            "label_distribution": self.label_distribution,
            "failures": [[line, reason] for line, reason in self.failures],
        }


def _percentile(sorted_values, q: float) -> int:
    if not sorted_values:
        return 0
    idx = min(len(sorted_values) - 1, int(round(q * (len(sorted_values) - 1))))
    return sorted_values[idx]


def validate_dataset(path) -> DatasetStats:
    """Validate a training JSONL file and report statistics.

    Malformed lines are itemized, never silently skipped. An empty file is
    an error.
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"dataset not found: {path}")
    failures = []
    lengths = []
    label_distribution: dict = {}
    count = 0
    lines = path.read_text().splitlines()
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            failures.append((line_no, f"malformed JSON: {exc}"))
            continue
        if not isinstance(obj, dict) or "id" not in obj or "text" not in obj:
            failures.append((line_no, "line must be an object with id and text"))
            continue
        text = str(obj["text"])
        if text.count(HUMAN_MARKER) != 1:
            failures.append((line_no, f"expected exactly one {HUMAN_MARKER!r}"))
            continue
        if text.count(ASSISTANT_MARKER) != 1:
            failures.append((line_no, f"expected exactly one {ASSISTANT_MARKER!r}"))
            continue
        if text.index(HUMAN_MARKER) > text.index(ASSISTANT_MARKER):
            failures.append((line_no, "markers out of order"))
            continue
        count += 1
        lengths.append(len(text.split()))
        for disease, value in (obj.get("labels") or {}).items():
            label_distribution.setdefault(disease, {})
            label_distribution[disease][value] = (
                label_distribution[disease].get(value, 0) + 1
            )
    if count == 0 and not failures:
        raise DatasetError(f"no examples in {path}")
    lengths.sort()
    return DatasetStats(
        count=count,
        length_percentiles={
            "p50": _percentile(lengths, 0.50),
            "p90": _percentile(lengths, 0.90),
            "max": lengths[-1] if lengths else 0,
        },
        label_distribution=label_distribution,
        failures=failures,
    )


@dataclass
class Example:
    id: str
    text: str


def load_examples(path) -> list:
    stats = validate_dataset(path)
    if not stats.ok:
        first = stats.failures[0]
        raise DatasetError(
            f"{path} failed validation ({len(stats.failures)} bad line(s); "
            f"first: line {first[0]}: {first[1]})"
        )
    out = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        out.append(Example(id=str(obj["id"]), text=str(obj["text"])))
    return out


def load_questions(path) -> list:
    """Load inference prompts: question_only when present, else the text."""
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"question file not found: {path}")
    out = []
    for line_no, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"{path}:{line_no}: malformed JSON: {exc}") from None
        prompt = obj.get("question_only") or obj.get("text")
        if "id" not in obj or not prompt:
            raise DatasetError(
                f"{path}:{line_no}: line needs id and question_only (or text)"
            )
        out.append(Example(id=str(obj["id"]), text=str(prompt)))
    if not out:
        raise DatasetError(f"no questions in {path}")
    return out
