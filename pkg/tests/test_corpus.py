import csv
import json
from datetime import datetime

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_comment
from oracles import kappa
from trolldetect.corpus import (
    Comment,
    IngestError,
    Label,
    UserStats,
    build_pairs,
    build_user_dataset,
    cohen_kappa,
    compute_user_stats,
    kappa_from_confusion,
    load_comments,
    load_dataset,
    load_user_stats,
    mine_accusations,
    write_comments,
    write_dataset,
    write_user_stats,
)
from trolldetect.synthetic import make_planted_corpus, make_user_corpus


def record(i, **over):
    rec = {
        "id": f"c{i}",
        "user_id": f"u{i}",
        "publication_id": "p1",
        "timestamp": "2014-03-12T10:30:00+02:00",
        "rank": i,
        "thread_size": 3,
        "text": f"коментар {i}",
    }
    rec.update(over)
    return rec


def write_jsonl(path, recs):
    path.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in recs), encoding="utf-8")
    return path


class TestComment:
    def test_naive_timestamp_rejected(self):
        with pytest.raises(ValueError, match="timezone"):
            Comment("c", "u", "p", datetime(2014, 1, 1), 1, 1, "")

    def test_rank_beyond_thread(self):
        with pytest.raises(ValueError, match="exceeds"):
            make_comment(rank=3, size=2)

    def test_record_round_trip(self):
        c = make_comment("текст", parent="c0", pos_tags=("Ncfsi",))
        assert Comment.from_record(c.to_record()) == c


class TestLoadComments:
    def test_three_records_in_order(self, tmp_path):
        p = write_jsonl(tmp_path / "c.jsonl", [record(i) for i in (1, 2, 3)])
        assert [c.id for c in load_comments(p)] == ["c1", "c2", "c3"]

    def test_strict_missing_timestamp(self, tmp_path):
        recs = [record(1), record(2, timestamp=None), record(3)]
        p = write_jsonl(tmp_path / "c.jsonl", recs)
        with pytest.raises(IngestError, match="record 2: missing field.*timestamp"):
            load_comments(p, strict=True)

    def test_lenient_skips(self, tmp_path, caplog):
        p = write_jsonl(tmp_path / "c.jsonl", [record(1), record(2, timestamp=None)])
        problems = []
        out = load_comments(p, problems=problems)
        assert [c.id for c in out] == ["c1"] and problems[0][0] == 2
        assert "skipping record 2" in caplog.text

    def test_invalid_json_line(self, tmp_path):
        p = tmp_path / "c.jsonl"
        p.write_text(json.dumps(record(1)) + "\n{oops\n")
        problems = []
        assert len(load_comments(p, problems=problems)) == 1
        assert "invalid JSON" in problems[0][1]

    def test_empty_file(self, tmp_path):
        p = tmp_path / "c.jsonl"
        p.write_text("")
        problems = []
        assert load_comments(p, strict=True, problems=problems) == [] and problems == []

    def test_csv(self, tmp_path):
        p = tmp_path / "c.csv"
        recs = [record(1), record(2, parent_id="c1", text="с, запетая")]
        with open(p, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=list(recs[0]) + ["parent_id"])
            w.writeheader()
            w.writerows(recs)
        out = load_comments(p)
        assert out[1].parent_id == "c1" and out[1].text == "с, запетая" and out[0].parent_id is None

    def test_unreadable(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_comments(tmp_path / "missing.jsonl")

    def test_write_then_load(self, tmp_path):
        cs = [make_comment("а", cid="a"), make_comment("б", cid="b", parent="a")]
        write_comments(cs, tmp_path / "c.jsonl")
        assert load_comments(tmp_path / "c.jsonl") == cs


class TestMineAccusations:
    root = make_comment("Боко е прав", cid="c1")

    def test_reply_with_trigger(self):
        reply = make_comment("Ти си troll", cid="c2", parent="c1")
        out = mine_accusations([self.root, reply], ["troll"])
        assert len(out) == 1 and out[0].matched_trigger == "troll" and out[0].accused_comment_id == "c1"

    def test_top_level_ignored(self):
        assert mine_accusations([make_comment("troll", cid="c9")], ["troll"]) == []

    def test_no_trigger(self):
        assert mine_accusations([self.root, make_comment("съгласен", cid="c2", parent="c1")], ["troll"]) == []

    def test_prefix_and_case(self):
        reply = make_comment("МУРЗИЛКИ навсякъде", cid="c2", parent="c1")
        assert mine_accusations([self.root, reply], ["мурзи"])[0].matched_trigger == "мурзи"

    def test_dangling_parent(self, caplog):
        assert mine_accusations([make_comment("трол", cid="c2", parent="gone")], ["трол"]) == []
        assert "unknown comment" in caplog.text

    def test_empty_triggers(self):
        with pytest.raises(ValueError):
            mine_accusations([self.root], [])

    @given(st.sets(st.sampled_from(["трол", "мурзи", "платен", "troll", "агент"])), st.sampled_from(["трол", "мурзи", "платен", "troll", "агент"]))
    def test_adding_trigger_is_monotone(self, base, extra):
        texts = ["трол", "мурзилка", "платен агент", "Troll!", "нищо", "агентът"]
        cs = [self.root] + [make_comment(t, cid=f"r{i}", parent="c1") for i, t in enumerate(texts)]
        before = {c.accusation_comment_id for c in mine_accusations(cs, base)} if base else set()
        after = {c.accusation_comment_id for c in mine_accusations(cs, base | {extra})}
        assert before <= after


class TestKappa:
    def test_identical(self):
        assert cohen_kappa([1, 0, 1, 1], [1, 0, 1, 1]) == 1.0

    def test_confusion_example(self):
        assert kappa_from_confusion([[20, 5], [10, 15]]) == pytest.approx(float(kappa([[20, 5], [10, 15]])), abs=1e-9)
        assert kappa_from_confusion([[20, 5], [10, 15]]) == pytest.approx(0.4, abs=1e-9)

    def test_full_disagreement(self):
        assert cohen_kappa([1, 0], [0, 1]) == -1.0

    def test_constant_identical(self):
        assert cohen_kappa(["x", "x"], ["x", "x"]) == 1.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length"):
            cohen_kappa([1], [1, 0])

    @given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 2)), min_size=1, max_size=40))
    def test_bounds_and_oracle(self, pairs):
        a, b = zip(*pairs)
        k = cohen_kappa(a, b)
        assert -1.0 - 1e-12 <= k <= 1.0 + 1e-12
        if len(set(a)) > 1:
            assert cohen_kappa(a, a) == 1.0
        conf = [[sum(1 for x, y in pairs if x == i and y == j) for j in range(3)] for i in range(3)]
        if not (len(set(a)) == 1 and set(a) == set(b)):
            assert k == pytest.approx(float(kappa(conf)), abs=1e-12)


class TestUserStats:
    def test_counts(self):
        cs = [make_comment("x", cid="a", user="bob"), make_comment("трол", cid="b", user="ann", parent="a"),
              make_comment("трол", cid="c", user="ann", parent="a")]
        stats = {s.user_id: s for s in compute_user_stats(cs, mine_accusations(cs, ["трол"]))}
        assert stats["bob"] == UserStats("bob", 1, 2, 1)

    def test_file_round_trip(self, tmp_path):
        stats = [UserStats("a", 5, 2, 1), UserStats("b", 100)]
        write_user_stats(stats, tmp_path / "s.tsv")
        assert load_user_stats(tmp_path / "s.tsv") == stats

    def test_two_column_counts_file(self, tmp_path):
        (tmp_path / "s.tsv").write_text("u1\t120\n")
        assert load_user_stats(tmp_path / "s.tsv") == [UserStats("u1", 120)]

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            UserStats("a", -1)


@pytest.fixture(scope="module")
def planted():
    return make_planted_corpus(n_trolls=100, n_threads=10, seed=3)


class TestBuildPairs:
    def build(self, sc, seed=0):
        return build_pairs(sc.trolls, sc.comments, sc.stats, sc.accused_users, seed)

    def test_balanced_and_complete(self, planted):
        ds = self.build(planted)
        assert ds.class_counts() == (100, 100) and ds.dropped_troll_ids == []

    def test_partner_rules(self, planted):
        ds = self.build(planted)
        counts = {s.user_id: s.comment_count for s in planted.stats}
        troll_threads = {c.publication_id for c, lab in ds.examples if lab.is_troll}
        partners = [c for c, lab in ds.examples if not lab.is_troll]
        assert len({c.id for c in partners}) == len(partners)
        for c in partners:
            assert c.publication_id in troll_threads
            assert c.user_id not in planted.accused_users and counts[c.user_id] >= 100

    def test_pairs_share_thread(self, planted):
        ex = self.build(planted).examples
        assert all(t.publication_id == n.publication_id for (t, _), (n, _) in zip(ex[::2], ex[1::2]))

    def test_drop_when_only_casual_partners(self):
        troll = make_comment("платено", cid="t", user="troll", pub="p9")
        other = make_comment("мнение", cid="o", user="casual", pub="p9", rank=1)
        ds = build_pairs([(troll, Label.PAID_TROLL)], [troll, other], [UserStats("casual", 50)], set(), seed=0)
        assert len(ds) == 0 and ds.dropped_troll_ids == ["t"]

    def test_troll_author_never_partner(self):
        t1 = make_comment("а", cid="t1", user="x", pub="p")
        t2 = make_comment("б", cid="t2", user="x", pub="p")
        ds = build_pairs([(t1, Label.PAID_TROLL)], [t1, t2], [UserStats("x", 500)], set(), seed=0)
        assert ds.dropped_troll_ids == ["t1"]

    def test_non_troll_label_rejected(self):
        c = make_comment("а")
        with pytest.raises(ValueError):
            build_pairs([(c, Label.NON_TROLL)], [c], [], set(), seed=0)

    def test_deterministic_bytes(self, planted, tmp_path):
        write_dataset(self.build(planted, seed=7), tmp_path / "a.jsonl")
        write_dataset(self.build(planted, seed=7), tmp_path / "b.jsonl")
        assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
        assert len(load_dataset(tmp_path / "a.jsonl")) == 200

    @given(st.integers(0, 2**31))
    @settings(max_examples=15, deadline=None)
    def test_balance_for_any_seed(self, planted, seed):
        pos, neg = self.build(planted, seed).class_counts()
        assert pos == neg


@pytest.fixture(scope="module")
def users():
    return make_user_corpus(seed=0)


class TestUserDataset:
    def test_threshold_membership(self):
        cs = [make_comment("а", cid="a1", user="acc"), make_comment("б", cid="r1", user="reg")]
        stats = [UserStats("acc", 200, 12), UserStats("reg", 300, 0)]
        ds10 = build_user_dataset(cs, stats, 10, seed=0)
        assert {(c.user_id, lab) for c, lab in ds10.examples} == {("acc", Label.MENTIONED_TROLL), ("reg", Label.NON_TROLL)}
        ds15 = build_user_dataset(cs, stats, 15, seed=0)
        assert len(ds15) == 0

    @pytest.mark.parametrize("threshold", [5, 10, 15, 20])
    def test_default_thresholds_balanced(self, users, threshold):
        ds = build_user_dataset(*users, threshold, seed=0)
        pos, neg = ds.class_counts()
        assert pos == neg > 0
        assert ds.info["positive_pool"] >= pos

    def test_pool_shrinks_with_threshold(self, users):
        pools = [build_user_dataset(*users, t, seed=0).info["positive_pool"] for t in (5, 10, 15, 20)]
        assert pools == sorted(pools, reverse=True)

    def test_user_document_averages_metadata(self, users):
        ds = build_user_dataset(*users, 5, seed=0)
        doc = ds.examples[0][0]
        assert set(doc.metadata) == {"worktime", "night", "weekend", "rank_ratio"}
        assert 0 <= doc.metadata["night"] <= 1

    def test_bad_threshold(self, users):
        with pytest.raises(ValueError):
            build_user_dataset(*users, 0, seed=0)
