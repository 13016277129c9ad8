"""Clinical report generation: prompt building, deterministic rendering, parsing.

The deterministic renderer and the prompt templates reproduce one fixed
report phrasing; numeric values are truncated (not rounded) to two
decimals everywhere a report shows them.
"""

import json
import math
import re
from dataclasses import dataclass, field
from decimal import ROUND_DOWN, Decimal, localcontext
from enum import Enum

from meibokit.clinical import ClinicalRecord, DiseaseLabels, Gender, TriState, parse_subject_eye_id
from meibokit.errors import SummaryParseError, TableError, TemplateError
from meibokit.morphometry import EyelidMorphology


class Source(Enum):
    SUMMARIZER_LLM = "summarizer_llm"
    DETERMINISTIC_TEMPLATE = "deterministic_template"
    TRIAL_KNOWLEDGE = "trial_knowledge"
    CLINICIAN_CASE = "clinician_case"


@dataclass
class QAPair:
    id: str
    question: str
    answer: str
    source: Source
    labels: DiseaseLabels = field(default_factory=DiseaseLabels.unknown)

    @property
    def inference_only(self) -> bool:
        return not self.answer

    def as_text(self) -> str:
        return f"###Human: {self.question}\n###Assistant: {self.answer}"

    def question_only_text(self) -> str:
        return f"###Human: {self.question}\n###Assistant:"


TASK_DESCRIPTION = (
    "You are an intelligent medical summary generator. Your task is to generate "
    "a clinical report summary for the raw clinical metadata mentioned in the "
    "caption. I will provide you with medical data obtained from meibography "
    "images of patients and generate concise summaries. Please generate a human "
    "readable summary with Q&A format by setting subject's demography, and MG "
    "morphology as the Question while the ocular surface disease as the Answer."
)

DEFAULT_SUPPORTING_EXAMPLE = (
    "Here's an example:\n"
    '{"42_2_R": {"gender": "Male", "age": 30, "race": "Asian", "TMH": 0.28, '
    '"NIKBUT": 12.33, "MG_Morph": {"avg_length": 4.878048, "avg_width": 0.463366, '
    '"avg_contrast": 13.573304, "avg_tortuosity": 0.277598}, "Dry Eye": "Yes", '
    '"Meibomian Gland Dysfunction": "No", "Blepharitis": "Yes"}}\n'
    "You should output something like:\n"
    "###Human: Subject 42_2_R and right eye. The person is a male with an age of "
    "30, and the race is Asian. The Tear Meniscus Height (TMH) is 0.28mm, The "
    "Non-Invasive Keratograph Tear Breakup Time (NIKBUT) is 12.33 sec. The "
    "meibomian gland morphology has average length of 4.87mm, average width of "
    "0.46mm, avg contrast is 13.57, and average tortuosity is 0.28.\n"
    "###Assistant: The Dry Eye (DE) condition for this subject is Yes, and The "
    "Meibomian Gland Dysfunction (MGD) is No, and the Blepharitis is also Yes.\n"
    "This is the patient 42_2_R, 2 means OS2 category, 42 is patient ID, R is "
    "right eye. MG_Morph means meibomian gland morphology features. Please "
    "remove values after second decimal place. Please write in one paragraph as "
    "a clinical report summary. This summary could be an input data to fine "
    "tune large language model."
)

PAYLOAD_REQUEST = "Could you give a clinical report summary of the data?"


@dataclass
class PromptBundle:
    """Three prompt sections, serialized strictly in this order."""

    task_description: str
    supporting_examples: list
    metadata_payload: str

    def to_messages(self) -> list:
        messages = [{"role": "system", "content": self.task_description}]
        for example in self.supporting_examples:
            messages.append({"role": "user", "content": example})
        messages.append({"role": "user", "content": self.metadata_payload})
        return messages

    def as_text(self) -> str:
        parts = [self.task_description, *self.supporting_examples, self.metadata_payload]
        return "\n\n".join(parts)


def round_for_report(value) -> str:
    """Decimal text with exactly two fractional digits, truncated toward zero."""
    value = float(value)
    if not math.isfinite(value):
        raise TemplateError(f"cannot render non-finite value {value!r}")
    with localcontext() as ctx:
        ctx.prec = 400
        return str(Decimal(repr(value)).quantize(Decimal("0.01"), rounding=ROUND_DOWN))


def _fmt_score(value) -> str:
    # ordinal grading scores read better as integers when integral
    return str(int(value)) if float(value) == int(value) else round_for_report(value)


_MEASUREMENT_CLAUSES = (
    ("tmh_mm", lambda v: f"The Tear Meniscus Height (TMH) is {round_for_report(v)}mm"),
    ("nikbut_s", lambda v: f"The Non-Invasive Keratograph Tear Breakup Time (NIKBUT) is {round_for_report(v)} sec"),
    ("ftbut_s", lambda v: f"The Fluorescein Tear Breakup Time (FTBUT) is {round_for_report(v)} sec"),
    ("schirmer_mm", lambda v: f"The Schirmer's test measurement is {round_for_report(v)}mm"),
    ("osdi", lambda v: f"The Ocular Surface Disease Index (OSDI) score is {round_for_report(v)}"),
    ("bulbar_hyperemia", lambda v: f"The bulbar hyperemia grade is {round_for_report(v)}"),
    ("mg_expression_quality", lambda v: f"The meibomian gland expression quality score is {_fmt_score(v)}"),
    ("mg_expression_quantity", lambda v: f"The meibomian gland expression quantity score is {_fmt_score(v)}"),
)

_MORPHOLOGY_CLAUSES = (
    ("avg_length_mm", lambda v: f"average length of {round_for_report(v)}mm"),
    ("avg_width_mm", lambda v: f"average width of {round_for_report(v)}mm"),
    ("avg_contrast", lambda v: f"avg contrast is {round_for_report(v)}"),
    ("avg_tortuosity", lambda v: f"average tortuosity is {round_for_report(v)}"),
    ("percent_atrophy", lambda v: f"percent atrophy is {round_for_report(v)}"),
    ("gland_density", lambda v: f"gland density is {round_for_report(v)}"),
)

_GENDER_WORD = {
    Gender.MALE: "male",
    Gender.FEMALE: "female",
    Gender.OTHER_UNKNOWN: "person",
}
_EYE_WORD = {"R": "right", "L": "left"}


def _join_and(items: list) -> str:
    if len(items) == 1:
        return items[0]
    return ", ".join(items[:-1]) + ", and " + items[-1]


def render_question(record: ClinicalRecord) -> str:
    """Fixed-order narrative: subject/eye, demographics, measurements, morphology.

    Absent fields are skipped, never fabricated.
    """
    _, _, eye = parse_subject_eye_id(record.subject_eye_id)
    sentences = [f"Subject {record.subject_eye_id} and {_EYE_WORD[eye]} eye."]
    if record.age > 0:
        demo = f"The person is a {_GENDER_WORD[record.gender]} with an age of {record.age}"
        if record.race:
            demo += f", and the race is {record.race}"
        sentences.append(demo + ".")
    clauses = [
        template(getattr(record, name))
        for name, template in _MEASUREMENT_CLAUSES
        if getattr(record, name) is not None
    ]
    if clauses:
        sentences.append(", ".join(clauses) + ".")
    morph = record.morphology
    if morph is not None:
        morph_clauses = [
            template(getattr(morph, name))
            for name, template in _MORPHOLOGY_CLAUSES
            if getattr(morph, name) is not None
        ]
        if morph_clauses:
            sentences.append(
                "The meibomian gland morphology has " + _join_and(morph_clauses) + "."
            )
    if len(sentences) == 1:
        raise TemplateError(f"empty record: {record.subject_eye_id}")
    return " ".join(sentences)


def render_answer(labels: DiseaseLabels) -> str:
    return (
        f"The Dry Eye (DE) condition for this subject is {labels.dry_eye.value}, "
        f"and The Meibomian Gland Dysfunction (MGD) is {labels.mgd.value}, "
        f"and the Blepharitis is also {labels.blepharitis.value}."
    )


def render_report_deterministic(record: ClinicalRecord) -> QAPair:
    """Render one record into a Q&A report without any LLM involvement.

    Records with definite labels get the full answer (training path);
    records with any Unknown label get an empty answer and are flagged for
    inference use via ``QAPair.inference_only``.
    """
    question = render_question(record)
    answer = render_answer(record.labels) if record.labels.is_definite() else ""
    return QAPair(
        id=record.subject_eye_id,
        question=question,
        answer=answer,
        source=Source.DETERMINISTIC_TEMPLATE,
        labels=record.labels,
    )


_PAYLOAD_MORPH_KEYS = (
    ("avg_length", "avg_length_mm"),
    ("avg_width", "avg_width_mm"),
    ("avg_contrast", "avg_contrast"),
    ("avg_tortuosity", "avg_tortuosity"),
    ("percent_atrophy", "percent_atrophy"),
    ("gland_density", "gland_density"),
)
_PAYLOAD_MEASUREMENT_KEYS = (
    ("TMH", "tmh_mm"),
    ("NIKBUT", "nikbut_s"),
    ("FTBUT", "ftbut_s"),
    ("Schirmer", "schirmer_mm"),
    ("OSDI", "osdi"),
    ("Bulbar_Hyperemia", "bulbar_hyperemia"),
    ("MG_Expression_Quality", "mg_expression_quality"),
    ("MG_Expression_Quantity", "mg_expression_quantity"),
)
_PAYLOAD_LABEL_KEYS = (
    ("Dry Eye", "dry_eye"),
    ("Meibomian Gland Dysfunction", "mgd"),
    ("Blepharitis", "blepharitis"),
)


def serialize_record_payload(records) -> str:
    """Serialize records to the JSON object form the prompt carries."""
    payload = {}
    for rec in records:
        entry = {"gender": rec.gender.value, "age": rec.age}
        if rec.race:
            entry["race"] = rec.race
        for key, attr in _PAYLOAD_MEASUREMENT_KEYS:
            v = getattr(rec, attr)
            if v is not None:
                entry[key] = v
        if rec.morphology is not None:
            morph = {
                key: getattr(rec.morphology, attr)
                for key, attr in _PAYLOAD_MORPH_KEYS
                if getattr(rec.morphology, attr) is not None
            }
            if morph:
                entry["MG_Morph"] = morph
        for key, attr in _PAYLOAD_LABEL_KEYS:
            label = getattr(rec.labels, attr)
            if label is not TriState.UNKNOWN:
                entry[key] = label.value
        payload[rec.subject_eye_id] = entry
    return json.dumps(payload)


def parse_record_payload(text: str) -> list:
    """Recover records from prompt text carrying a serialized payload.

    Used by the offline mock endpoint; returns [] when no payload object
    can be found.
    """
    start = text.find("{")
    end = text.rfind("}")
    if start < 0 or end <= start:
        return []
    try:
        payload = json.loads(text[start:end + 1])
    except json.JSONDecodeError:
        return []
    if not isinstance(payload, dict):
        return []
    records = []
    for sid, entry in payload.items():
        if not isinstance(entry, dict):
            continue
        try:
            parse_subject_eye_id(sid)
        except TableError:
            continue
        labels = DiseaseLabels(
            dry_eye=TriState.parse(entry.get("Dry Eye")),
            mgd=TriState.parse(entry.get("Meibomian Gland Dysfunction")),
            blepharitis=TriState.parse(entry.get("Blepharitis")),
        )
        morphology = None
        if isinstance(entry.get("MG_Morph"), dict):
            morph_in = entry["MG_Morph"]
            morphology = EyelidMorphology(
                subject_eye_id=sid,
                **{
                    attr: (None if morph_in.get(key) is None else float(morph_in[key]))
                    for key, attr in _PAYLOAD_MORPH_KEYS
                },
            )
        kwargs = {}
        for key, attr in _PAYLOAD_MEASUREMENT_KEYS:
            v = entry.get(key)
            kwargs[attr] = None if v is None else float(v)
        try:
            age = int(entry.get("age", 0))
        except (TypeError, ValueError):
            age = 0
        records.append(
            ClinicalRecord(
                subject_eye_id=sid,
                gender=Gender.parse(entry.get("gender")),
                age=age,
                race=str(entry.get("race") or ""),
                morphology=morphology,
                labels=labels,
                **kwargs,
            )
        )
    return records


def build_prompt(records, examples=None) -> PromptBundle:
    """Assemble the three-section prompt for a batch of records.

    ``examples=None`` selects the default supporting example; pass an empty
    list for a prompt with no examples (section order is preserved either
    way).
    """
    records = list(records)
    if not records:
        raise TemplateError("cannot build a prompt for zero records")
    if examples is None:
        examples = [DEFAULT_SUPPORTING_EXAMPLE]
    payload = PAYLOAD_REQUEST + " " + serialize_record_payload(records)
    return PromptBundle(
        task_description=TASK_DESCRIPTION,
        supporting_examples=list(examples),
        metadata_payload=payload,
    )


_HUMAN_MARKER = "###Human:"
_ASSISTANT_MARKER = "###Assistant:"
_SUBJECT_RE = re.compile(r"Subject\s+([^\s.,]+)")


@dataclass
class SummaryParseOutcome:
    pairs: list
    rejected: list  # (fragment_excerpt, reason)


def parse_summary_detailed(raw: str, source: Source = Source.SUMMARIZER_LLM) -> SummaryParseOutcome:
    pairs, rejected = [], []
    starts = [m.start() for m in re.finditer(re.escape(_HUMAN_MARKER), raw)]
    for i, start in enumerate(starts):
        end = starts[i + 1] if i + 1 < len(starts) else len(raw)
        block = raw[start:end]
        body = block[len(_HUMAN_MARKER):]
        if _ASSISTANT_MARKER not in body:
            rejected.append((block.strip()[:80], "dangling question without answer"))
            continue
        q_text, a_text = body.split(_ASSISTANT_MARKER, 1)
        question, answer = q_text.strip(), a_text.strip()
        if not question:
            rejected.append((block.strip()[:80], "empty question"))
            continue
        if not answer:
            rejected.append((block.strip()[:80], "empty answer"))
            continue
        subject = _SUBJECT_RE.search(question)
        pairs.append(
            QAPair(
                id=subject.group(1) if subject else "",
                question=question,
                answer=answer,
                source=source,
            )
        )
    return SummaryParseOutcome(pairs=pairs, rejected=rejected)


def parse_summary(raw: str, source: Source = Source.SUMMARIZER_LLM) -> list:
    """Split raw summarizer output on the Human/Assistant markers.

    Raises SummaryParseError when nothing parseable is present.
    """
    outcome = parse_summary_detailed(raw, source=source)
    if not outcome.pairs:
        raise SummaryParseError(
            "no parsable pairs"
            + (f" ({outcome.rejected[0][1]})" if outcome.rejected else "")
        )
    return outcome.pairs
