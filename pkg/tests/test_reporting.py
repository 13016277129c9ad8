"""Report rendering fidelity, truncation rule, prompt structure, parsing."""

import re
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import appendix_record, random_full_record
from meibokit.clinical import ClinicalRecord, DiseaseLabels, Gender, TriState
from meibokit.errors import SummaryParseError, TemplateError
from meibokit.morphometry import EyelidMorphology
from meibokit.reporting import (
    DEFAULT_SUPPORTING_EXAMPLE,
    PAYLOAD_REQUEST,
    TASK_DESCRIPTION,
    QAPair,
    Source,
    build_prompt,
    parse_record_payload,
    parse_summary,
    parse_summary_detailed,
    render_report_deterministic,
    round_for_report,
    serialize_record_payload,
)


class TestRoundForReport:
    @pytest.mark.parametrize(
        "value,expected",
        [
            (4.878048, "4.87"),
            (13.573304, "13.57"),
            (0.277598, "0.27"),
            (0.463366, "0.46"),
            (-1.239, "-1.23"),
            (0.28, "0.28"),
            (0.29, "0.29"),
            (12.33, "12.33"),
            (5, "5.00"),
            (0.0, "0.00"),
        ],
    )
    def test_truncation_cases(self, value, expected):
        assert round_for_report(value) == expected

    @pytest.mark.parametrize("bad", [float("nan"), float("inf"), float("-inf")])
    def test_non_finite_rejected(self, bad):
        with pytest.raises(TemplateError):
            round_for_report(bad)

    @given(st.floats(allow_nan=False, allow_infinity=False))
    @settings(max_examples=300, deadline=None)
    def test_output_pattern_and_truncation_property(self, value):
        text = round_for_report(value)
        assert re.fullmatch(r"-?\d+\.\d{2}", text)
        parsed = float(text)
        assert abs(parsed) <= abs(value) + 1e-9  # truncated toward zero
        assert abs(value - parsed) < 0.01 + abs(value) * 1e-12


class TestDeterministicRenderer:
    def test_golden_report_byte_for_byte(self, golden_report_text):
        pair = render_report_deterministic(appendix_record())
        assert pair.as_text() == golden_report_text

    def test_renderer_is_deterministic(self):
        a = render_report_deterministic(appendix_record())
        b = render_report_deterministic(appendix_record())
        assert a.as_text() == b.as_text()

    def test_omission_rule_demographics_only(self):
        rec = ClinicalRecord(
            subject_eye_id="9_1_L",
            gender=Gender.FEMALE,
            age=41,
            labels=DiseaseLabels(TriState.NO, TriState.NO, TriState.NO),
        )
        pair = render_report_deterministic(rec)
        assert pair.question == (
            "Subject 9_1_L and left eye. The person is a female with an age of 41."
        )

    def test_unknown_labels_yield_inference_pair(self):
        rec = replace(appendix_record(), labels=DiseaseLabels.unknown())
        pair = render_report_deterministic(rec)
        assert pair.answer == ""
        assert pair.inference_only

    def test_empty_record_rejected(self):
        rec = ClinicalRecord(subject_eye_id="9_1_L", age=0)
        with pytest.raises(TemplateError, match="empty record"):
            render_report_deterministic(rec)

    def test_absent_fields_never_fabricated(self):
        rec = replace(appendix_record(), tmh_mm=None)
        pair = render_report_deterministic(rec)
        assert "TMH" not in pair.question
        assert "NIKBUT" in pair.question

    def test_full_record_renders_every_field(self):
        rec = random_full_record(np.random.default_rng(0), 0)
        q = render_report_deterministic(rec).question
        for token in ("TMH", "NIKBUT", "FTBUT", "Schirmer", "OSDI", "hyperemia",
                      "quality score", "quantity score", "average length",
                      "percent atrophy", "gland density"):
            assert token in q, token


class TestBuildPrompt:
    def test_default_example_and_task(self):
        bundle = build_prompt([appendix_record()])
        assert bundle.task_description.startswith(
            "You are an intelligent medical summary generator"
        )
        assert bundle.supporting_examples == [DEFAULT_SUPPORTING_EXAMPLE]
        assert bundle.metadata_payload.startswith(PAYLOAD_REQUEST)

    def test_empty_examples_keep_section_order(self):
        bundle = build_prompt([appendix_record()], examples=[])
        messages = bundle.to_messages()
        assert [m["role"] for m in messages] == ["system", "user"]
        assert messages[0]["content"] == TASK_DESCRIPTION
        assert messages[-1]["content"] == bundle.metadata_payload

    def test_two_records_one_payload(self):
        rec2 = replace(appendix_record(), subject_eye_id="42_2_L")
        bundle = build_prompt([appendix_record(), rec2])
        assert "42_2_R" in bundle.metadata_payload
        assert "42_2_L" in bundle.metadata_payload
        assert bundle.metadata_payload.count(PAYLOAD_REQUEST) == 1
        assert sum(
            DEFAULT_SUPPORTING_EXAMPLE == e for e in bundle.supporting_examples
        ) == 1

    def test_zero_records_rejected(self):
        with pytest.raises(TemplateError):
            build_prompt([])

    def test_message_order_invariant_under_counts(self):
        recs = [appendix_record(), replace(appendix_record(), subject_eye_id="42_2_L")]
        for examples in ([], ["example one"], ["one", "two"]):
            roles = [m["role"] for m in build_prompt(recs, examples).to_messages()]
            assert roles == ["system"] + ["user"] * (len(examples) + 1)


class TestPayloadRoundTrip:
    def test_payload_matches_appendix_key_style(self):
        text = serialize_record_payload([appendix_record()])
        assert '"42_2_R"' in text
        assert '"TMH": 0.28' in text
        assert '"MG_Morph"' in text
        assert '"Dry Eye": "Yes"' in text

    def test_parse_recovers_record(self):
        rec = appendix_record()
        parsed = parse_record_payload(serialize_record_payload([rec]))
        assert len(parsed) == 1
        back = parsed[0]
        assert back.subject_eye_id == rec.subject_eye_id
        assert back.tmh_mm == rec.tmh_mm
        assert back.labels == rec.labels
        assert back.morphology.avg_length_mm == rec.morphology.avg_length_mm

    def test_parse_rejects_prose(self):
        assert parse_record_payload("no json here") == []


class TestParseSummary:
    def test_appendix_text_single_pair(self, golden_report_text):
        pairs = parse_summary(golden_report_text)
        assert len(pairs) == 1
        assert pairs[0].id == "42_2_R"
        assert pairs[0].question.startswith("Subject 42_2_R")
        assert pairs[0].answer.endswith("the Blepharitis is also Yes.")

    def test_two_blocks_in_order(self):
        text = (
            "###Human: Subject 1_1_R and right eye. Age 30.\n###Assistant: The Dry Eye (DE) "
            "condition for this subject is Yes, and The Meibomian Gland Dysfunction (MGD) is "
            "No, and the Blepharitis is also No.\n\n"
            "###Human: Subject 2_1_L and left eye. Age 40.\n###Assistant: The Dry Eye (DE) "
            "condition for this subject is No, and The Meibomian Gland Dysfunction (MGD) is "
            "Yes, and the Blepharitis is also Yes."
        )
        pairs = parse_summary(text)
        assert [p.id for p in pairs] == ["1_1_R", "2_1_L"]

    def test_prose_without_markers(self):
        with pytest.raises(SummaryParseError, match="no parsable pairs"):
            parse_summary("The patient seems fine to me.")

    def test_dangling_question_rejected_with_reason(self):
        text = (
            "###Human: Subject 1_1_R and right eye.\n###Assistant: The Dry Eye (DE) condition "
            "for this subject is No, and The Meibomian Gland Dysfunction (MGD) is No, and the "
            "Blepharitis is also No.\n"
            "###Human: Subject 2_1_R and right eye, no answer follows."
        )
        outcome = parse_summary_detailed(text)
        assert len(outcome.pairs) == 1
        assert len(outcome.rejected) == 1
        assert "dangling question" in outcome.rejected[0][1]

    def test_round_trip_question_and_answer_preserved(self):
        pair = render_report_deterministic(appendix_record())
        back = parse_summary(pair.as_text())[0]
        assert back.question == pair.question
        assert back.answer == pair.answer


class TestQAPairText:
    def test_as_text_shape(self):
        pair = QAPair(
            id="1_1_R", question="Q", answer="A", source=Source.DETERMINISTIC_TEMPLATE
        )
        assert pair.as_text() == "###Human: Q\n###Assistant: A"
        assert pair.question_only_text() == "###Human: Q\n###Assistant:"
