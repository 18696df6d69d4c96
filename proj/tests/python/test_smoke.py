import json

import pytest

import mas2


def small_dataset(tmp_path):
    lines = [
        {"kind": "q", "id": "q1", "origin_id": "q1", "text": "what is red", "lang": "en", "prov": ["en"]},
        {"kind": "c", "id": "c1", "qid": "q1", "origin_id": "c1", "text": "red is a colour",
         "label": 1, "lang": "en", "prov": ["en"]},
        {"kind": "c", "id": "c2", "qid": "q1", "origin_id": "c2", "text": "blue sky",
         "label": 0, "lang": "en", "prov": ["en"]},
    ]
    path = tmp_path / "en.jsonl"
    path.write_text("".join(json.dumps(l) + "\n" for l in lines))
    return mas2.Dataset.load(path)


def test_parse_and_render():
    assert mas2.parse_composition("EnDe+DeEn") == [("en", "de"), ("de", "en")]
    assert mas2.render_composition([("en", "en"), ("de", "de")]) == "En+De"
    with pytest.raises(mas2.UsageError):
        mas2.parse_composition("En+")


def test_mock_translation_round_trip():
    out = mas2.mock_translate(["a b"], "en", "de")
    assert out == ["de:a de:b"]
    assert mas2.mock_translate(out, "de", "en") == ["a b"]


def test_dataset_algebra(tmp_path):
    en = small_dataset(tmp_path)
    assert en.stats() == mas2.Dataset.load(tmp_path / "en.jsonl").stats()
    assert (en.stats().num_questions, en.stats().num_correct, en.stats().num_incorrect) == (1, 1, 1)
    de = mas2.transfer(en, "de")
    assert de.validate() == []
    mixed = mas2.mix(en, de)
    assert mixed.validate() == []
    both = mas2.concat([en, de])
    assert len(both) == 2 and both.num_candidates == 4
    composed = mas2.compose("En+De", en)
    assert composed.fingerprint() == both.fingerprint()


def test_metrics():
    assert mas2.average_precision([1, 0, 0]) == 1.0
    assert mas2.average_precision([0, 1, 1]) == pytest.approx(7 / 12, abs=1e-15)
    assert mas2.reciprocal_rank([0, 0, 1]) == pytest.approx(1 / 3)
    rep = mas2.evaluate([[1, 0], [0, 1]])
    assert rep["p_at_1"] == 0.5 and rep["map"] == 0.75 and rep["n"] == 2
    d = mas2.delta({"p_at_1": 0.6, "map": 0.7, "mrr": 0.8}, {"p_at_1": 0.54, "map": 0.7, "mrr": 0.8})
    assert d["p_at_1"] == -10.0 and d["map"] == 0.0


def test_scoring_helpers():
    assert mas2.linear_head([0.3, 0.1], [0.0] * 4, [0.0, 0.0]) == 0.5
    assert mas2.lexical_score("red apple", "red apple", ["red apple", "green pear"]) == pytest.approx(1.0)
    assert mas2.early_stop([0.5, 0.6, 0.55]) == (2, 3)
    assert mas2.early_stop([0.5, 0.4]) == (1, 2)


def test_missing_file_raises_io_error(tmp_path):
    with pytest.raises(mas2.IoError):
        mas2.Dataset.load(tmp_path / "nope.jsonl")
