import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from trolldetect.config import DEMO_DIR
from trolldetect.embeddings import EmbeddingTable
from trolldetect.lexicons import (
    Entry,
    Lexicon,
    SentimentResources,
    count_matches,
    expand_lexicon,
    gazetteer_entities,
    load_lexicon,
    sentiment_scores,
)
from trolldetect.textproc import StemRules, tokenize


def lex(name, *terms, kind="terms", cat=None):
    return Lexicon(name, {t: Entry((cat,) if cat else ()) for t in terms}, kind)


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


@pytest.fixture
def gazetteers():
    return [
        lex("location", "софия", "пловдив"),
        lex("country", "русия", "българия"),
        lex("person_name", "бойко", "иван"),
        lex("date_unit", "понеделник", "януари"),
    ]


class TestLoadLexicon:
    def test_case_duplicates_collapse(self, tmp_path, caplog):
        p = write(tmp_path, "t.txt", "трол\nТрол\n")
        out = load_lexicon(p)
        assert len(out) == 1 and "трол" in out.entries
        assert "duplicate" in caplog.text

    def test_comments_and_blank_lines(self, tmp_path):
        p = write(tmp_path, "t.txt", "# header\n\nмурзи\n  \n")
        assert list(load_lexicon(p).entries) == ["мурзи"]

    def test_bundled_bad_words_bounded_by_lines(self):
        path = DEMO_DIR / "bad_words" / "bad_words_bg_1.txt"
        lines = [l for l in path.read_text(encoding="utf-8").splitlines() if l.strip() and not l.startswith("#")]
        assert 0 < len(load_lexicon(path)) <= len(lines)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_lexicon(tmp_path / "nope.txt")

    def test_empty_file(self, tmp_path):
        with pytest.raises(ValueError, match="empty"):
            load_lexicon(write(tmp_path, "e.txt", "# only a comment\n"))

    def test_bad_polarity_category(self, tmp_path):
        with pytest.raises(ValueError, match="polarity"):
            load_lexicon(write(tmp_path, "p.tsv", "добър\tgood\n"), "polarity")

    def test_bad_weight(self, tmp_path):
        with pytest.raises(ValueError, match="weight"):
            load_lexicon(write(tmp_path, "w.tsv", "добър\tpositive\tmuch\n"), "polarity")

    def test_emotion_term_keeps_all_categories(self, tmp_path):
        out = load_lexicon(write(tmp_path, "e.tsv", "война\tfear\nвойна\tanger\n"), "emotion")
        assert out.entries["война"].categories == ("fear", "anger")

    def test_multiword_whitespace_normalized(self, tmp_path):
        out = load_lexicon(write(tmp_path, "m.txt", "Бат   Бойко\n"))
        assert "бат бойко" in out.entries

    def test_patterns_keep_case(self, tmp_path):
        out = load_lexicon(write(tmp_path, "e.txt", ":D\n:d\n"), "patterns")
        assert set(out.entries) == {":D", ":d"}


class TestExpandLexicon:
    table = EmbeddingTable(
        ["гад", "n1", "n2", "n3", "far"],
        np.array([[1, 0, 0], [0.99, 0.1, 0], [0.95, 0.3, 0], [0.9, 0.4, 0], [0, 0, 1]], dtype=float),
    )

    def test_three_neighbours(self):
        out = expand_lexicon(lex("bad", "гад"), self.table, 3)
        assert set(out.entries) == {"гад", "n1", "n2", "n3"}

    def test_out_of_vocabulary_base(self):
        base = lex("bad", "простак")
        assert set(expand_lexicon(base, self.table, 3).entries) == {"простак"}

    def test_no_duplicate_when_neighbour_in_base(self):
        out = expand_lexicon(lex("bad", "гад", "n1"), self.table, 3)
        assert sorted(out.entries) == sorted({"гад", "n1", "n2", "n3"})

    def test_empty_embeddings(self):
        with pytest.raises(ValueError):
            expand_lexicon(lex("bad", "гад"), EmbeddingTable([], np.zeros((0, 3))), 3)

    @given(st.integers(1, 4), st.sets(st.sampled_from(["гад", "n1", "n2", "n3", "far", "x", "y"]), min_size=1))
    def test_superset_and_size_bound(self, k, terms):
        base = lex("bad", *sorted(terms))
        out = expand_lexicon(base, self.table, k)
        assert set(base.entries) <= set(out.entries)
        assert len(out) <= len(base) * (k + 1)


class TestCountMatches:
    def test_two_hits(self):
        bad = lex("bad_words", "идиот", "простак")
        assert count_matches(tokenize("Ти си идиот и простак!"), bad)["bad_words"] == 2

    def test_no_hits(self):
        assert sum(count_matches(tokenize("добър ден"), lex("bad", "идиот")).values()) == 0

    def test_two_token_nickname(self):
        nick = lex("nicknames", "бат бойко")
        assert count_matches(tokenize("Пак Бат Бойко говори"), nick)["nicknames"] == 1

    def test_longest_sequence_wins(self):
        nick = lex("nicknames", "бат", "бат бойко")
        assert count_matches(tokenize("бат бойко"), nick)["nicknames"] == 1

    def test_match_stems(self):
        rules = StemRules({"ове": ""}, 3)
        assert count_matches(["тролове"], lex("t", "трол"), match_stems=True, rules=rules)["t"] == 1
        assert count_matches(["тролове"], lex("t", "трол"))["t"] == 0

    def test_match_stems_needs_rules(self):
        with pytest.raises(ValueError):
            count_matches(["a"], lex("t", "a"), match_stems=True)

    @given(
        st.lists(st.sampled_from(["бат", "бойко", "идиот", "и", "ден"]), max_size=8),
        st.lists(st.sampled_from(["бат", "бойко", "идиот", "и", "ден"]), max_size=8),
    )
    def test_additive_without_multiword_seam(self, a, b):
        single = lex("bad", "идиот", "ден")
        assert count_matches(a + b, single) == count_matches(a, single) + count_matches(b, single)


class TestSentiment:
    @pytest.fixture
    def res(self):
        pol = Lexicon("pol", {"добър": Entry(("positive",)), "хубав": Entry(("positive",)), "лош": Entry(("negative",))}, "polarity")
        emo = Lexicon("emo", {"лош": Entry(("anger",)), "радост": Entry(("joy",))}, "emotion")
        op = Lexicon("op", {"браво": Entry(("positive",))}, "polarity")
        return SentimentResources(pol, emo, op)

    def test_counts_and_net(self, res):
        s = sentiment_scores(["добър", "хубав", "лош", "ден"], res)
        assert (s["polarity_pos"], s["polarity_neg"], s["polarity_net"]) == (2, 1, 1)
        assert s["polarity_pos_norm"] == 0.5

    def test_empty_tokens(self, res):
        s = sentiment_scores([], res)
        assert all(v == 0 for v in s.values())

    def test_token_in_polarity_and_emotion(self, res):
        s = sentiment_scores(["лош"], res)
        assert s["polarity_neg"] == 1 and s["emotion_anger"] == 1

    def test_non_polarity_category_rejected(self):
        bad = Lexicon("x", {"a": Entry(("joy",))})
        with pytest.raises(ValueError):
            SentimentResources(bad, bad, bad)

    def test_normalized_within_count(self, res):
        s = sentiment_scores(["добър", "добър", "радост"], res)
        for key in ("polarity_pos", "emotion_joy"):
            assert 0 <= s[key + "_norm"] <= s[key]


class TestGazetteers:
    def test_one_country(self, gazetteers):
        out = gazetteer_entities(tokenize("Русия пак"), gazetteers)
        assert out == {"location": 0, "country": 1, "person_name": 0, "date_unit": 0}

    def test_nothing(self, gazetteers):
        assert set(gazetteer_entities(["нищо"], gazetteers).values()) == {0}

    def test_same_form_in_two_gazetteers(self, gazetteers):
        both = gazetteers + [lex("city", "софия")]
        out = gazetteer_entities(["софия"], both)
        assert out["location"] == 1 and out["city"] == 1

    def test_required_types(self):
        with pytest.raises(ValueError, match="missing gazetteer"):
            gazetteer_entities(["софия"], [lex("location", "софия")])

    def test_bundled_gazetteers(self):
        gz = [load_lexicon(p) for p in sorted((DEMO_DIR / "gazetteers").glob("*.txt"))]
        assert {g.name for g in gz} >= {"location", "country", "person_name", "date_unit"}
