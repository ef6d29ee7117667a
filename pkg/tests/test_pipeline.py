from collections import Counter

import pytest
from conftest import (
    CASES_SCRIPT,
    TOY_SCRIPT,
    knowledge_sensitive_client,
    script_rules,
    scripted_client,
)
from hypothesis import given, settings
from hypothesis import strategies as st

from aspectchain.datasets import aspect_spec
from aspectchain.errors import EmptyKnowledgeError, InvalidInputError, StageOneFailure
from aspectchain.llm import JudgeClient, ScriptedBackend
from aspectchain.model import (
    Aspect,
    AspectChain,
    AspectScoreSet,
    ChainKnowledge,
    KnowledgeEntry,
)
from aspectchain.pipeline import (
    PipelineConfig,
    assemble_knowledge,
    coascore,
    evaluate_dataset,
    generate_relevant_aspects,
    instance_seed,
    inter_knowledge,
    randomize_scores,
    run_stage_two,
    score_relevant_aspects,
)

FIVE = ["relevance", "coherence", "completeness", "accuracy", "naturalness"]
SUMMARY_ASPECTS = """1. **Logical Flow**: Do the sentences follow one another in a sensible order?
2. **Consistency**: Are facts presented the same way throughout?
3. **Relevance**: Does each sentence contribute to the main point?
4. **Cohesive Devices**: Are connectives and references used to link ideas?
5. **Conciseness**: Is the summary free of redundancy?"""


def stage_calls(backend, stage):
    return sum(1 for r in backend.calls if r.tag.startswith(stage + ":"))


class TestStageOne:
    def test_dialog_chain(self, overall):
        chain = generate_relevant_aspects(overall, "dialog", 5, scripted_client(CASES_SCRIPT))
        assert chain.names == FIVE

    def test_summarization_chain(self):
        client = JudgeClient(ScriptedBackend([("aspect_gen:*", SUMMARY_ASPECTS)]))
        chain = generate_relevant_aspects(aspect_spec("summarization", "coherence"), "summarization", 5, client)
        assert chain.names == ["logical flow", "consistency", "relevance", "cohesive devices", "conciseness"]

    def test_m_one(self, overall):
        chain = generate_relevant_aspects(overall, "dialog", 1, scripted_client(CASES_SCRIPT))
        assert chain.names == ["relevance"]

    def test_short_list_requeried_once(self, overall):
        answers = iter(["Clarity: clear?", "Clarity: clear?\nTone: polite?"])
        backend = ScriptedBackend([("*", lambda r: next(answers))])
        chain = generate_relevant_aspects(overall, "dialog", 3, JudgeClient(backend))
        assert chain.names == ["clarity", "tone"] and len(backend.calls) == 2 and chain.warnings

    def test_nothing_parseable(self, overall):
        with pytest.raises(StageOneFailure):
            generate_relevant_aspects(overall, "dialog", 5, JudgeClient(ScriptedBackend([("*", "sorry")])))

    def test_backend_error(self, overall):
        with pytest.raises(StageOneFailure):
            generate_relevant_aspects(overall, "dialog", 5, JudgeClient(ScriptedBackend([])))


@pytest.fixture(scope="module")
def chain(overall):
    return generate_relevant_aspects(overall, "dialog", 5, scripted_client(CASES_SCRIPT))


class TestStageTwo:
    def test_worked_example(self, chain, cases_dataset):
        result = score_relevant_aspects(chain, cases_dataset.instances[1], scripted_client(CASES_SCRIPT))
        assert dict(result.scores) == dict(zip(FIVE, (5.0, 5.0, 4.0, 5.0, 5.0))) and result.missing == ()

    def test_repair_path(self, chain, cases_dataset):
        answers = iter(["Relevance: 4\nCoherence: 4\nCompleteness: 3\nNaturalness: 5", "Accuracy: 2"])
        backend = ScriptedBackend([("*", lambda r: next(answers))])
        result = score_relevant_aspects(chain, cases_dataset.instances[0], JudgeClient(backend))
        assert result.missing == () and result.scores["accuracy"] == 2.0
        assert list(result.scores) == FIVE
        assert "Accuracy:" in backend.calls[1].prompt and "Relevance:" not in backend.calls[1].prompt

    def test_foreign_names_ignored(self, chain, cases_dataset):
        client = JudgeClient(ScriptedBackend([("*", '{"relevance": 3, "humor": 1}')]))
        result = score_relevant_aspects(chain, cases_dataset.instances[0], client)
        assert "humor" not in result.scores and result.scores["relevance"] == 3.0


class TestKnowledge:
    def test_full_overlap(self, chain):
        k = assemble_knowledge(chain, AspectScoreSet(dict.fromkeys(FIVE, 4.0)))
        assert [e.name for e in k.entries] == FIVE

    def test_partial(self, chain):
        k = assemble_knowledge(chain, AspectScoreSet(dict.fromkeys(FIVE[:4], 4.0), ("naturalness",)))
        assert len(k) == 4

    def test_disjoint(self, chain):
        with pytest.raises(EmptyKnowledgeError):
            assemble_knowledge(chain, AspectScoreSet({"humor": 3.0}))


class TestCoascore:
    def test_worked_example(self, chain, cases_dataset, overall):
        sharks = cases_dataset.instances[1]
        client = scripted_client(CASES_SCRIPT)
        k = assemble_knowledge(chain, score_relevant_aspects(chain, sharks, client))
        assert coascore(sharks, overall, k, client).value == 5.0

    def test_average(self, cases_dataset, overall):
        k = ChainKnowledge(tuple(KnowledgeEntry(n, "d", s) for n, s in zip(FIVE, (5, 5, 4, 5, 5))))
        client = JudgeClient(ScriptedBackend([]))
        assert coascore(cases_dataset.instances[0], overall, k, client, "average").value == pytest.approx(4.8)
        single = ChainKnowledge((KnowledgeEntry("a", "d", 3.5),))
        assert coascore(cases_dataset.instances[0], overall, single, client, "average").value == 3.5
        assert client.live_calls == 0

    def test_random_needs_seed(self, cases_dataset, overall):
        k = ChainKnowledge((KnowledgeEntry("a", "d", 3.0),))
        with pytest.raises(InvalidInputError):
            coascore(cases_dataset.instances[0], overall, k, JudgeClient(ScriptedBackend([])), "random")

    def test_config_names(self, overall):
        assert PipelineConfig(overall, m=20).metric_name == "coascore_m20"
        assert PipelineConfig(overall, "random", 5, seed=3).metric_name == "coascore_random_m5_seed3"
        assert PipelineConfig(overall, "inter").metric_name == "coascore_inter"
        with pytest.raises(InvalidInputError):
            PipelineConfig(overall, "random")
        with pytest.raises(InvalidInputError):
            PipelineConfig(overall, m=0)


class TestRandomize:
    def _chain(self, overall, n):
        return AspectChain(overall, tuple(Aspect(f"a{i}", "d") for i in range(n)))

    def test_deterministic_and_in_range(self, overall):
        chain = self._chain(overall, 20)
        a, b = randomize_scores(chain, 7), randomize_scores(chain, 7)
        assert a == b and set(a.scores.values()) <= {1.0, 2.0, 3.0, 4.0, 5.0}
        assert randomize_scores(chain, 8) != a

    def test_uniform_within_five_sigma(self, overall):
        # 10^4 draws: count ~ Binomial(10^4, 0.2), mean 2000, sigma 40
        chain = self._chain(overall, 100)
        counts = Counter(v for seed in range(100) for v in randomize_scores(chain, seed).scores.values())
        assert sum(counts.values()) == 10_000
        for value in range(1, 6):
            assert abs(counts[float(value)] - 2000) <= 5 * 40

    def test_instance_seed(self):
        assert instance_seed(1, "a") == instance_seed(1, "a") != instance_seed(1, "b")


class TestInter:
    def test_rescaled_knowledge(self, toy_dataset):
        inst = toy_dataset.instances[1]  # natural (2,1,2) on 1-3; understandable (1,0,1) on 0-1
        k = inter_knowledge(inst, toy_dataset, "overall")
        assert [e.name for e in k.entries] == ["naturalness", "understandability"]
        assert k.entries[0].description == "human-annotated naturalness quality"
        assert k.scores == pytest.approx([1 + (5 / 3 - 1) * 2, 1 + (2 / 3) * 4])

    def test_no_other_aspects(self, cases_dataset):
        with pytest.raises(EmptyKnowledgeError):
            inter_knowledge(cases_dataset.instances[0], cases_dataset, "overall")


class TestEvaluateDataset:
    def test_toy_full(self, toy_dataset, overall):
        client = scripted_client()
        table = evaluate_dataset(toy_dataset, PipelineConfig(overall), client)
        assert len(table.rows) == 12 and not table.exclusions
        assert list(table.rows) == [i.id for i in toy_dataset.instances]
        backend = client.backend
        # one amortized stage-1 call, then exactly one stage-2 and one stage-3 call per instance
        assert stage_calls(backend, "aspect_gen") == 1
        assert stage_calls(backend, "aspect_score") == 12 and stage_calls(backend, "coa_score") == 12
        assert all(1.0 <= s.value <= 5.0 for s in table.rows.values())

    def test_partial_failures(self, toy_dataset, overall):
        rules = [("coa_score:toy-03", "no number here"), ("aspect_score:toy-07", "???")] + script_rules(TOY_SCRIPT)
        table = evaluate_dataset(toy_dataset, PipelineConfig(overall), JudgeClient(ScriptedBackend(rules)))
        assert len(table.rows) == 10
        assert [i for i, _ in table.exclusions] == ["toy-03", "toy-07"]
        assert all(reason for _, reason in table.exclusions)

    def test_average_makes_no_stage3_calls(self, toy_dataset, overall):
        client = scripted_client()
        table = evaluate_dataset(toy_dataset, PipelineConfig(overall, "average"), client)
        assert stage_calls(client.backend, "coa_score") == 0
        assert table.rows["toy-01"].value == pytest.approx(4.8)

    def test_empty_knowledge_falls_back(self, toy_dataset, overall, chain):
        client = scripted_client()
        stage_two = run_stage_two(toy_dataset, chain, client)
        stage_two["toy-05"] = AspectScoreSet({}, tuple(FIVE))
        table = evaluate_dataset(toy_dataset, PipelineConfig(overall), client, chain=chain, stage_two=stage_two)
        assert table.rows["toy-05"].value == 3.0  # the toy llmscore answer
        assert any("toy-05" in w for w in table.warnings)

    def test_unscorable_instance_excluded(self, toy_dataset, overall):
        rules = [("aspect_score:toy-05", "Humor: 3")] + script_rules(TOY_SCRIPT)
        table = evaluate_dataset(toy_dataset, PipelineConfig(overall), JudgeClient(ScriptedBackend(rules)))
        assert [i for i, _ in table.exclusions] == ["toy-05"]

    def test_stage_one_failure_aborts(self, toy_dataset, overall):
        client = JudgeClient(ScriptedBackend([("aspect_gen:*", "nothing useful")]))
        with pytest.raises(StageOneFailure):
            evaluate_dataset(toy_dataset, PipelineConfig(overall), client)

    def test_without_chain_reuse(self, toy_dataset, overall):
        client = scripted_client()
        evaluate_dataset(toy_dataset, PipelineConfig(overall, reuse_chain_per_dataset=False), client)
        assert stage_calls(client.backend, "aspect_gen") == 12

    def test_shared_stage_two(self, toy_dataset, overall, chain):
        client = scripted_client()
        stage_two = run_stage_two(toy_dataset, chain, client)
        before = client.live_calls
        evaluate_dataset(toy_dataset, PipelineConfig(overall), client, chain=chain, stage_two=stage_two)
        assert client.live_calls - before == 12

    @settings(max_examples=5, deadline=None)
    @given(st.sampled_from([2, 3, 8]))
    def test_worker_count_irrelevant(self, toy_dataset, overall, workers):
        config = PipelineConfig(overall, "random", seed=4)
        one = evaluate_dataset(toy_dataset, config, knowledge_sensitive_client(), workers=1)
        many = evaluate_dataset(toy_dataset, config, knowledge_sensitive_client(max_concurrency=workers), workers=workers)
        assert one.values() == many.values() and list(one.rows) == list(many.rows)
