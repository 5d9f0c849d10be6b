import random

import pytest
from hypothesis import given, settings, strategies as st

from trialmatch.baseline import (
    And,
    BaselineResult,
    Not,
    Or,
    Phrase,
    Term,
    evaluate,
    load_baseline_result,
    parse_query,
    query_to_text,
    run_baseline,
    save_baseline_result,
)
from trialmatch.errors import ParseError

from conftest import make_case, make_trial


# Independent recursive evaluator, written from the documented matching
# semantics with its own tokenizer; used as the truth table oracle.
def oracle_evaluate(node, record):
    texts = [record.diseases] + list(record.diseases_list)

    def tokens_of(text):
        cleaned = "".join(ch if (ch.isalnum() and ch != "_") else " " for ch in text.casefold())
        return cleaned.split()

    if isinstance(node, Term):
        want = node.word.casefold()
        return any(want in tokens_of(t) for t in texts)
    if isinstance(node, Phrase):
        return any(node.text.casefold() in t.casefold() for t in texts)
    if isinstance(node, Not):
        return not oracle_evaluate(node.child, record)
    if isinstance(node, And):
        return oracle_evaluate(node.left, record) and oracle_evaluate(node.right, record)
    if isinstance(node, Or):
        return oracle_evaluate(node.left, record) or oracle_evaluate(node.right, record)
    raise TypeError(node)


VOCAB = ["asthma", "melanoma", "diabetes", "stage", "chronic", "acute", "iv", "ii"]


def random_query(rng: random.Random, budget: int):
    """Random AST with at most ``budget`` nodes (ands/ors/nots/leaves)."""
    if budget <= 1:
        if rng.random() < 0.3:
            return Phrase(" ".join(rng.sample(VOCAB, k=rng.randint(1, 2)))), 1
        return Term(rng.choice(VOCAB)), 1
    pick = rng.random()
    if pick < 0.2:
        child, used = random_query(rng, budget - 1)
        return Not(child), used + 1
    if pick < 0.6:
        left, used_left = random_query(rng, budget - 2)
        right, used_right = random_query(rng, budget - 1 - used_left)
        return And(left, right), used_left + used_right + 1
    left, used_left = random_query(rng, budget - 2)
    right, used_right = random_query(rng, budget - 1 - used_left)
    return Or(left, right), used_left + used_right + 1


def random_record(rng: random.Random, trial_id="NCT1"):
    diseases = rng.sample(VOCAB, k=rng.randint(0, 4))
    return make_trial(
        trial_id=trial_id,
        diseases=" ".join(diseases),
        diseases_list=[d.title() for d in diseases] or ["Other"],
    )


class TestParser:
    def test_precedence(self):
        assert parse_query("a AND b OR c") == Or(And(Term("a"), Term("b")), Term("c"))

    def test_grouping_and_phrase(self):
        assert parse_query('NOT (a OR "b c")') == Not(Or(Term("a"), Phrase("b c")))

    def test_dangling_operator_offset(self):
        with pytest.raises(ParseError) as err:
            parse_query("a AND")
        assert err.value.offset == 5

    def test_unbalanced_paren(self):
        with pytest.raises(ParseError):
            parse_query("(a OR b")
        with pytest.raises(ParseError):
            parse_query("a OR b)")

    def test_unterminated_quote_offset(self):
        with pytest.raises(ParseError) as err:
            parse_query('a AND "unfinished')
        assert err.value.offset == 6

    def test_empty_phrase(self):
        with pytest.raises(ParseError):
            parse_query('""')

    def test_operators_case_insensitive(self):
        assert parse_query("a and b") == And(Term("a"), Term("b"))
        assert parse_query("not a or b") == Or(Not(Term("a")), Term("b"))

    def test_trailing_tokens_rejected(self):
        with pytest.raises(ParseError):
            parse_query("a b")

    def test_empty_query(self):
        with pytest.raises(ParseError) as err:
            parse_query("   ")
        assert err.value.offset == 3

    def test_byte_offset_multibyte(self):
        # The ellipsis character is 3 bytes in UTF-8; error points past it.
        with pytest.raises(ParseError) as err:
            parse_query("… AND")
        assert err.value.offset == len("… AND".encode("utf-8"))

    def test_double_negation(self):
        assert parse_query("NOT NOT a") == Not(Not(Term("a")))


class TestPrinter:
    def test_examples(self):
        assert query_to_text(Or(And(Term("a"), Term("b")), Term("c"))) == "a AND b OR c"
        assert query_to_text(And(Term("a"), Or(Term("b"), Term("c")))) == "a AND (b OR c)"
        assert query_to_text(Not(Or(Term("a"), Phrase("b c")))) == 'NOT (a OR "b c")'

    @settings(max_examples=300)
    @given(st.integers(0, 2**32 - 1))
    def test_parse_print_parse_fixpoint(self, seed):
        rng = random.Random(seed)
        query, _ = random_query(rng, 7)
        text = query_to_text(query)
        assert parse_query(text) == query


class TestEvaluate:
    def test_case_folding_token_match(self):
        record = make_trial(diseases_list=["Glioblastoma"], diseases="Glioblastoma")
        assert evaluate(Term("glioblastoma"), record)
        assert evaluate(Term("GLIOBLASTOMA"), record)

    def test_not_on_absent_term(self):
        record = make_trial(diseases_list=["Asthma"], diseases="Asthma")
        assert evaluate(Not(Term("melanoma")), record)

    def test_phrase_substring_vs_term_token(self):
        record = make_trial(diseases="chronic obstructive disease", diseases_list=["COPD"])
        assert evaluate(Phrase("obstructive dis"), record)
        assert not evaluate(Term("obstructive dis"), record)
        assert evaluate(Term("copd"), record)

    def test_only_condition_fields_searched(self):
        record = make_trial(
            brief_title="melanoma vaccine", diseases="asthma", diseases_list=["Asthma"]
        )
        assert not evaluate(Term("melanoma"), record)

    def test_agreement_with_oracle(self):
        rng = random.Random(123)
        for _ in range(2000):
            query, _ = random_query(rng, 7)
            record = random_record(rng)
            assert evaluate(query, record) == oracle_evaluate(query, record)

    def test_de_morgan(self):
        rng = random.Random(77)
        for _ in range(500):
            a, _ = random_query(rng, 3)
            b, _ = random_query(rng, 3)
            record = random_record(rng)
            assert evaluate(Not(And(a, b)), record) == evaluate(Or(Not(a), Not(b)), record)
            assert evaluate(Not(Or(a, b)), record) == evaluate(And(Not(a), Not(b)), record)


class QueryAdapter:
    kind = "service"
    name = "service:query"

    def __init__(self, *queries):
        self.queries = list(queries)

    def complete(self, system, user, temperature=0.0):
        return self.queries.pop(0) if len(self.queries) > 1 else self.queries[0]


class TestRunBaseline:
    def corpus(self, n_matching, disease="asthma", total=30):
        records = []
        for i in range(total):
            has = i < n_matching
            records.append(
                make_trial(
                    trial_id=f"NCT{i:04d}",
                    diseases=disease if has else "other condition",
                    diseases_list=[disease.title()] if has else ["Other"],
                )
            )
        return records

    def test_zero_matches(self):
        result = run_baseline(make_case(), self.corpus(0), QueryAdapter("asthma"))
        assert result.matched == ()
        assert result.error is None

    def test_five_matches(self):
        result = run_baseline(make_case(), self.corpus(5), QueryAdapter("asthma"))
        assert len(result.matched) == 5

    def test_capped_at_ten_in_id_order(self):
        result = run_baseline(make_case(), self.corpus(30), QueryAdapter("asthma"))
        assert len(result.matched) == 10
        assert list(result.matched) == sorted(result.matched)
        assert result.matched[0] == "NCT0000"

    def test_unparseable_query_regenerated_once(self):
        adapter = QueryAdapter("asthma AND", "asthma")
        result = run_baseline(make_case(), self.corpus(3), adapter)
        assert len(result.matched) == 3
        assert result.error is None

    def test_double_failure_records_error(self):
        adapter = QueryAdapter("asthma AND", "OR broken")
        result = run_baseline(make_case(), self.corpus(3), adapter)
        assert result.matched == ()
        assert result.error is not None

    def test_round_trip_file(self, tmp_path):
        result = BaselineResult("case_1", "asthma OR copd", ("NCT1", "NCT2"), None)
        path = save_baseline_result(result, tmp_path)
        assert load_baseline_result(path) == result
