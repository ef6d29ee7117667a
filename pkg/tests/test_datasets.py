import json
import logging

import pytest
from conftest import TOY_MANIFEST
from hypothesis import given, settings
from hypothesis import strategies as st

from aspectchain.converters import convert
from aspectchain.datasets import (
    AspectDecl,
    DatasetManifest,
    instance_record,
    load_dataset,
    validate_dataset,
    write_instances,
    write_manifest,
)
from aspectchain.errors import DatasetError
from aspectchain.model import EvaluationInstance

text = st.text(alphabet=st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=30).filter(str.strip)
instances = st.lists(
    st.builds(
        lambda i, src, hyp, fact, refs, scores: EvaluationInstance(
            f"i{i}", "dialog", src, hyp, refs, {"overall": scores}, fact),
        st.integers(0, 10**6), text, text, st.none() | text, st.lists(text, max_size=2).map(tuple),
        st.lists(st.integers(1, 5), min_size=1, max_size=3),
    ),
    min_size=1, max_size=6, unique_by=lambda inst: inst.id,
)


def _manifest(path, size, aspects=(AspectDecl("overall", 1, 5, 3),)):
    return DatasetManifest("d", "dialog", str(path), aspects, size)


@settings(max_examples=50, deadline=None)
@given(instances)
def test_round_trip_and_order(tmp_path_factory, insts):
    out = tmp_path_factory.mktemp("rt")
    write_instances(insts, out / "d.jsonl")
    write_manifest(_manifest(out / "d.jsonl", len(insts)), out / "d.manifest.json")
    loaded = load_dataset(DatasetManifest.from_file(out / "d.manifest.json"))
    assert [instance_record(i) for i in loaded.instances] == [instance_record(i) for i in insts]
    assert loaded.instances == tuple(insts)


def test_toy_loads_clean():
    ds = load_dataset(DatasetManifest.from_file(TOY_MANIFEST))
    assert len(ds) == 12 and ds.warnings == ()
    assert validate_dataset(ds) == []


def test_missing_field_named(tmp_path):
    (tmp_path / "d.jsonl").write_text(json.dumps({"id": "x7", "source": "s", "human_scores": {"overall": [3]}}) + "\n")
    with pytest.raises(DatasetError, match=r"x7.*hypothesis"):
        load_dataset(_manifest(tmp_path / "d.jsonl", 1))


def test_missing_aspect_named(tmp_path):
    (tmp_path / "d.jsonl").write_text(json.dumps({"id": "x8", "source": "s", "hypothesis": "h", "human_scores": {}}) + "\n")
    with pytest.raises(DatasetError, match=r"x8.*human_scores.overall"):
        load_dataset(_manifest(tmp_path / "d.jsonl", 1))


def test_size_mismatch_only_warns(tmp_path, caplog):
    write_instances([EvaluationInstance("a", "dialog", "s", "h", human_scores={"overall": [3]})], tmp_path / "d.jsonl")
    with caplog.at_level(logging.WARNING):
        ds = load_dataset(_manifest(tmp_path / "d.jsonl", 5))
    assert len(ds) == 1 and "expected 5" in ds.warnings[0]


def test_bad_json_line(tmp_path):
    (tmp_path / "d.jsonl").write_text("{oops\n")
    with pytest.raises(DatasetError, match=":1:"):
        load_dataset(_manifest(tmp_path / "d.jsonl", 1))


def test_manifest_invariants():
    with pytest.raises(DatasetError):
        DatasetManifest("d", "dialog", "p", (), 1)
    with pytest.raises(DatasetError):
        DatasetManifest("d", "dialog", "p", (AspectDecl("overall"),), 0)


def test_validate_seeded_defects(tmp_path):
    recs = [EvaluationInstance(i, "dialog", "s", "h", human_scores={"overall": [v]}) for i, v in
            (("a", 3), ("b", 6), ("a", 2))]
    write_instances(recs, tmp_path / "d.jsonl")
    problems = validate_dataset(load_dataset(_manifest(tmp_path / "d.jsonl", 3)))
    assert [(p.kind, p.instance_id) for p in problems] == [("uniqueness", "a"), ("range", "b")]


def test_rescale():
    assert AspectDecl("u", 0, 1).rescale(0.5) == 3.0
    assert AspectDecl("n", 1, 3).rescale(3) == 5.0


class TestConverters:
    def test_summeval(self, tmp_path):
        experts = [{"coherence": 3, "consistency": 5, "fluency": 4, "relevance": 2}] * 3
        with (tmp_path / "up.jsonl").open("w") as fh:
            for doc in range(100):
                for model in range(16):
                    fh.write(json.dumps({"id": f"d{doc}", "model_id": f"M{model}", "text": "article", "decoded": "summary",
                                         "references": ["ref"], "expert_annotations": experts}) + "\n")
        ds = load_dataset(DatasetManifest.from_file(convert("summeval", tmp_path / "up.jsonl", tmp_path / "out")))
        assert len(ds) == 1600 and not ds.warnings
        assert ds.manifest.aspect_names == ["coherence", "consistency", "fluency", "relevance"]
        assert ds.instances[0].human_scores["coherence"] == (3.0, 3.0, 3.0)

    def test_topicalchat(self, tmp_path):
        def resp(model, text):
            return {"model": model, "response": text, "Overall": [4, 5, 4], "Natural": [3, 3, 2],
                    "Maintains Context": [3, 2, 3], "Understandable": [1, 1, 0], "Engaging": [2, 2, 3]}

        models = ["Original Ground Truth", "Argmax Decoding", "Nucleus Decoding (p = 0.3)",
                  "Nucleus Decoding (p = 0.5)", "Nucleus Decoding (p = 0.7)", "New Human Generated"]
        data = [{"context": f"ctx {c}", "fact": "a fact", "responses": [resp(m, f"r{c}{m}") for m in models]}
                for c in range(60)]
        (tmp_path / "tc.json").write_text(json.dumps(data))
        ds = load_dataset(DatasetManifest.from_file(convert("topicalchat", tmp_path / "tc.json", tmp_path)))
        assert len(ds) == 300 and not ds.warnings
        assert ds.manifest.aspect_names == ["overall", "natural", "context", "understandable", "engaging"]
        assert ds.instances[0].references == ("r0Original Ground Truth",)
        assert validate_dataset(ds) == []

    def test_bagel(self, tmp_path):
        data = {str(k): {"src": "inform(name=X)", "ref_summs": ["X is a place."], "sys_summ": "X is here.",
                         "scores": {"quality": [5, 6, 4]}} for k in range(404)}
        (tmp_path / "bagel.json").write_text(json.dumps(data))
        ds = load_dataset(DatasetManifest.from_file(convert("bagel", tmp_path / "bagel.json", tmp_path)))
        assert len(ds) == 404 and ds.manifest.aspect_names == ["overall"] and ds.task == "data2text"

    def test_openmeva_and_iwslt(self, tmp_path):
        (tmp_path / "roc.json").write_text(json.dumps(
            {"s1": {"prompt": "Once", "gold": "upon", "gen": {"gpt": {"text": "a time", "score": [3, 4]}}}}))
        ds = load_dataset(DatasetManifest.from_file(convert("openmeva", tmp_path / "roc.json", tmp_path)))
        assert ds.instances[0].human_mean("overall") == 3.5 and ds.task == "story"
        (tmp_path / "mt.tsv").write_text("source\treference\thypothesis\trating_1\nHallo\tHello\tHi\t4\n")
        ds = load_dataset(DatasetManifest.from_file(convert("iwslt14", tmp_path / "mt.tsv", tmp_path)))
        assert ds.instances[0].references == ("Hello",) and ds.task == "translation"

    def test_layout_errors(self, tmp_path):
        (tmp_path / "bad.json").write_text(json.dumps([{"context": "c"}]))
        with pytest.raises(DatasetError, match="layout"):
            convert("topicalchat", tmp_path / "bad.json", tmp_path)
        with pytest.raises(DatasetError, match="unknown corpus"):
            convert("wmt", tmp_path / "bad.json", tmp_path)
