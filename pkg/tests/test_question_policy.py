import pytest
from hypothesis import given, strategies as st

from groundsight.question_policy import (
    ABSTAIN_ANSWER,
    AbstentionPolicy,
    DEFAULT_POLICY,
    QuestionType,
    classify,
    parse_question_type,
    should_abstain,
)


class TestClassify:
    @pytest.mark.parametrize(
        "query,expected",
        [
            ("Who invented this kind of tape?", QuestionType.WHO),
            ("Whose jacket is this?", QuestionType.WHO),
            ("Whom does this statue depict?", QuestionType.WHO),
            ("Is this a sports car?", QuestionType.YES_NO),
            ("Does this plant need sunlight?", QuestionType.YES_NO),
            ("Can this bird fly?", QuestionType.YES_NO),
            ("How many passengers can the red car seat?", QuestionType.COUNTING),
            ("How much does this cost?", QuestionType.COUNTING),
            ("Give a count of the windows.", QuestionType.COUNTING),
            ("What color is the door?", QuestionType.COLOR),
            ("Tell me the colour of the roof.", QuestionType.COLOR),
            ("Where was this photo taken?", QuestionType.LOCATION),
            ("In which city is this building located?", QuestionType.LOCATION),
            ("Why is the sky orange here?", QuestionType.REASONING),
            ("When was this bridge built?", QuestionType.REASONING),
            ("How old was this artist when he started hosting his own show on NBC?", QuestionType.REASONING),
            ("Explain how does this engine work.", QuestionType.REASONING),
            ("What is the typical filling of this Chinese steamed bun?", QuestionType.OBJECT_RECOGNITION),
            ("Which brand is this laptop?", QuestionType.OBJECT_RECOGNITION),
            ("Name the landmark in the photo.", QuestionType.OTHER),
        ],
    )
    def test_rule_table(self, query, expected):
        assert classify(query) is expected

    def test_precedence_who_beats_substrings(self):
        # mentions a color but leads with "who"
        assert classify("Who painted this red colour mural?") is QuestionType.WHO

    def test_precedence_yesno_beats_counting(self):
        assert classify("Is there a count of ten here?") is QuestionType.YES_NO

    def test_precedence_counting_beats_color(self):
        assert classify("How many colors are in the flag?") is QuestionType.COUNTING

    def test_case_insensitive(self):
        assert classify("WHO IS THIS?") is QuestionType.WHO

    def test_leading_punctuation_skipped(self):
        assert classify("\"Who is this?\"") is QuestionType.WHO

    def test_empty_query_rejected(self):
        with pytest.raises(ValueError):
            classify("   ")

    @given(st.text(min_size=1).filter(lambda s: s.strip()))
    def test_total_and_deterministic(self, query):
        assert classify(query) is classify(query)


class TestParseQuestionType:
    def test_tolerant_spelling(self):
        assert parse_question_type("Object-Recognition") is QuestionType.OBJECT_RECOGNITION
        assert parse_question_type(" who ") is QuestionType.WHO

    def test_unknown_rejected(self):
        with pytest.raises(ValueError):
            parse_question_type("riddle")


class TestPolicy:
    def test_default_policy(self):
        assert DEFAULT_POLICY.abstain_types == {QuestionType.WHO, QuestionType.REASONING}
        assert DEFAULT_POLICY.abstain_on_empty_context is True

    def test_from_names_string(self):
        p = AbstentionPolicy.from_names("who,reasoning", abstain_on_empty_context=True)
        assert p == DEFAULT_POLICY

    def test_abstain_on_type(self):
        assert should_abstain(QuestionType.WHO, DEFAULT_POLICY, context_empty=False)

    def test_no_abstain_with_context(self):
        assert not should_abstain(QuestionType.COLOR, DEFAULT_POLICY, context_empty=False)

    def test_any_type_abstains_on_empty_context(self):
        for qtype in QuestionType:
            assert should_abstain(qtype, DEFAULT_POLICY, context_empty=True)

    def test_empty_policy_never_abstains(self):
        p = AbstentionPolicy()
        for qtype in QuestionType:
            assert not should_abstain(qtype, p, context_empty=True)

    def test_enlarging_types_is_monotone(self):
        queries = [
            "Who is this?",
            "Why is it wet?",
            "What animal is shown?",
            "Is it raining?",
            "Where is the bench?",
        ]
        small = AbstentionPolicy(abstain_types=frozenset({QuestionType.WHO}))
        large = AbstentionPolicy(
            abstain_types=frozenset({QuestionType.WHO, QuestionType.REASONING})
        )
        n_small = sum(should_abstain(classify(q), small, False) for q in queries)
        n_large = sum(should_abstain(classify(q), large, False) for q in queries)
        assert n_large >= n_small

    def test_abstain_answer_is_exact(self):
        assert ABSTAIN_ANSWER == "I don't know"
