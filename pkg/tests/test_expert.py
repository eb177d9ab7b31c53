from __future__ import annotations

import itertools
import json
from concurrent.futures import ThreadPoolExecutor

import httpx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cogplan.core import (
    DocKind,
    ImageRef,
    MultimodalQuery,
    PlanDecision,
    QuerySet,
    RetrievalAction,
    RetrievedDoc,
    apply_decision,
    init_state,
)
from cogplan.errors import BackendError, ParseError
from cogplan.expert import (
    ExpertRequest,
    ExpertResponse,
    PromptSet,
    RecordingExpert,
    RemoteChatExpert,
    ScriptedExpert,
    coerce_action,
    parse_expert_output,
    reformulate,
    render_evidence_digest,
    select_action,
)

TS, IS, NS = RetrievalAction.TEXT_SEARCH, RetrievalAction.IMAGE_SEARCH, RetrievalAction.NO_SEARCH


def doc(source_id, n_tokens, iteration=1, kind=DocKind.TEXT):
    content = " ".join(f"w{i}" for i in range(n_tokens))
    image = ImageRef(f"{source_id}.png") if kind is DocKind.IMAGE else None
    return RetrievedDoc(kind, content, source_id, iteration, "q", n_tokens, image)


class FixedReply:
    """Backend returning canned texts in order, then repeating the last."""

    def __init__(self, *texts):
        self.texts = list(texts)
        self.calls = 0

    def complete(self, request):
        text = self.texts[min(self.calls, len(self.texts) - 1)]
        self.calls += 1
        return ExpertResponse(text, prompt_tokens=10, completion_tokens=2, latency_ms=1.0)


class TestParsing:
    @pytest.mark.parametrize(
        "raw, expected",
        [
            ("Action: text_search", TS),
            ("IMAGE_SEARCH", IS),
            ('```json\n{"action": "no_search"}\n```', NS),
            ("Action: IMAGE-SEARCH\nBecause the image shows a game.", IS),
            ("I would pick TEXT_SEARCH then maybe NO_SEARCH", TS),
        ],
    )
    def test_action_labels(self, raw, expected):
        assert parse_expert_output(raw, "action") is expected

    def test_action_without_label(self):
        with pytest.raises(ParseError):
            parse_expert_output("I think we should browse the web", "action")

    def test_label_inside_word_is_not_a_label(self):
        with pytest.raises(ParseError):
            parse_expert_output("context_search_text_searcher", "action")

    def test_numbered_list(self):
        assert parse_expert_output("1. q-one\n2. q-two", "query-set") == ["q-one", "q-two"]

    def test_fenced_list_with_prose(self):
        raw = "Here you go:\n```\n1. What game is this?\n2) Who made it?\n```\nHope that helps. 3. not a query"
        assert parse_expert_output(raw, "query-set") == ["What game is this?", "Who made it?"]

    def test_bullets_and_trailing_prose(self):
        raw = "- a\n- b\nThat is all.\n- c"
        assert parse_expert_output(raw, "query-set") == ["a", "b"]

    def test_json_list(self):
        assert parse_expert_output('```json\n["x", "y"]\n```', "query-set") == ["x", "y"]

    def test_no_list(self):
        with pytest.raises(ParseError):
            parse_expert_output("just some prose", "query-set")

    def test_answer(self):
        assert parse_expert_output("  Answer: 42 \n", "answer") == "42"
        with pytest.raises(ParseError):
            parse_expert_output("   ", "answer")

    @given(st.text(), st.sampled_from(["action", "query-set", "answer"]))
    def test_total_on_arbitrary_unicode(self, raw, mode):
        try:
            value = parse_expert_output(raw, mode)
        except ParseError:
            return
        if mode == "action":
            assert value in (TS, IS, NS)
        elif mode == "query-set":
            assert value and all(isinstance(v, str) and v for v in value)
        else:
            assert value.strip() == value and value


class TestEvidenceDigest:
    def test_empty(self):
        assert render_evidence_digest([], 100) == ""

    def test_both_fit_newest_first(self):
        docs = [doc("old", 300, 1), doc("new", 300, 2)]
        out = render_evidence_digest(docs, 1000)
        assert out.index("[new]") < out.index("[old]")

    def test_oldest_dropped(self):
        docs = [doc("a", 400, 1), doc("b", 400, 2), doc("c", 400, 3)]
        # greedy block-packing oracle: blocks cost 401 tokens ("[id]" + 400),
        # newest first: 401 -> 802 -> 1203 > 1000, so c and b survive.
        out = render_evidence_digest(docs, 1000)
        assert "[c]" in out and "[b]" in out and "[a]" not in out
        assert len(out.split()) == 802

    def test_whole_blocks_only(self):
        out = render_evidence_digest([doc("big", 50)], 10)
        assert out == ""

    def test_image_marker(self):
        out = render_evidence_digest([doc("i1", 3, kind=DocKind.IMAGE)], 100)
        assert out.startswith("[i1] [image] ")

    def test_same_iteration_keeps_order(self):
        out = render_evidence_digest([doc("x", 1, 1), doc("y", 1, 1)], 100)
        assert out.index("[x]") < out.index("[y]")

    @given(st.lists(st.integers(1, 60), max_size=8), st.integers(1, 200))
    def test_budget_respected(self, sizes, budget):
        docs = [doc(f"d{i}", n, 1 + i // 3) for i, n in enumerate(sizes)]
        assert len(render_evidence_digest(docs, budget).split()) <= budget


@pytest.fixture
def game_state(game_query):
    s0 = init_state(game_query)
    caption = RetrievedDoc(DocKind.IMAGE, "Astro Bot gameplay screenshot", "i01", 1, "q", 3, ImageRef("i01.png"))
    return apply_decision(s0, PlanDecision(IS, QuerySet.of("What game is shown in this screenshot?")), [caption])


class TestReformulate:
    def test_decomposition(self, game_state, game_script):
        result = reformulate(game_script, game_state)
        assert list(result.value) == ["How many copies did Astro Bot sell?", "How many copies did Black Myth Wukong sell?"]
        assert result.degraded == ()
        assert result.tokens > 0

    def test_identity_script(self, game_state):
        result = reformulate(ScriptedExpert({"steps": []}), game_state)
        assert result.value == game_state.current_queries

    def test_malformed_twice_falls_back(self, game_state):
        backend = FixedReply("no list here", "still nothing")
        result = reformulate(backend, game_state)
        assert result.value == game_state.current_queries
        assert result.degraded == ("reformulation-fallback-identity",)
        assert backend.calls == 2

    def test_retry_recovers(self, game_state):
        backend = FixedReply("garbage", "1. fixed query")
        result = reformulate(backend, game_state)
        assert list(result.value) == ["fixed query"] and result.degraded == ()
        assert result.tokens == 24 and result.latency_ms == 2.0

    def test_too_many_queries_truncated(self, game_state):
        backend = FixedReply("\n".join(f"{i}. q{i}" for i in range(1, 8)))
        result = reformulate(backend, game_state)
        assert len(result.value) == 5 and result.degraded

    def test_duplicates_dropped(self, game_state):
        result = reformulate(FixedReply("1. a\n2. a\n3. b"), game_state)
        assert list(result.value) == ["a", "b"]

    def test_prompt_contents(self, game_state, game_script):
        rec = RecordingExpert(game_script)
        reformulate(rec, game_state)
        (req,) = rec.requests
        assert game_state.origin.text in req.user_text
        assert "What game is shown in this screenshot?" in req.user_text
        assert "[i01] [image] Astro Bot gameplay screenshot" in req.user_text
        assert req.images == (game_state.origin.image,)

    def test_transport_error_propagates(self, game_state):
        class Down:
            def complete(self, request):
                raise BackendError("down")

        with pytest.raises(BackendError):
            reformulate(Down(), game_state)


class TestSelectAction:
    def test_script_replay(self, game_query, game_script):
        s0 = init_state(game_query)
        assert select_action(game_script, s0, s0.current_queries).value is IS

    def test_text_only_image_search_coerced(self):
        s0 = init_state(MultimodalQuery("text only"))
        result = select_action(FixedReply("IMAGE_SEARCH"), s0, s0.current_queries)
        assert result.value is TS
        assert result.degraded == ("image-search-coerced-to-text",)

    def test_malformed_twice_is_no_search(self, game_query):
        s0 = init_state(game_query)
        result = select_action(FixedReply("hmm", "dunno"), s0, s0.current_queries)
        assert result.value is NS and result.degraded == ("action-fallback-no-search",)

    def test_image_search_offered_only_with_image(self, game_query):
        rec = RecordingExpert(FixedReply("NO_SEARCH"))
        s_img = init_state(game_query)
        s_txt = init_state(MultimodalQuery("text only"))
        select_action(rec, s_img, s_img.current_queries)
        select_action(rec, s_txt, s_txt.current_queries)
        offered_img = rec.requests[0].user_text.split("Available actions:")[1].splitlines()[0]
        offered_txt = rec.requests[1].user_text.split("Available actions:")[1].splitlines()[0]
        assert "IMAGE_SEARCH" in offered_img
        assert "IMAGE_SEARCH" not in offered_txt

    def test_coercion_table_exhaustive(self, tmp_path):
        img = tmp_path / "q.png"
        img.write_bytes(b"png")
        for action, has_origin_image, has_image_evidence in itertools.product(
            [TS, IS, NS], [False, True], [False, True]
        ):
            q = MultimodalQuery("q", ImageRef(str(img)) if has_origin_image else None)
            s = init_state(q)
            docs = [doc("i1", 2, 1, DocKind.IMAGE)] if has_image_evidence else []
            s = apply_decision(s, PlanDecision(IS if docs else NS, s.current_queries), docs, t_max=5)
            out, note = coerce_action(action, s)
            can_image = has_origin_image or has_image_evidence
            if action is IS and not can_image:
                assert out is TS and note
            else:
                assert out is action and note is None


class TestScriptedExpert:
    def test_keyed_by_iteration_and_role_not_call_order(self, game_script):
        def req(role, it):
            return ExpertRequest("s", "u", meta={"role": role, "iteration": it, "queries": ("q",)})

        order = [("action", 2), ("action", 0), ("reformulate", 1), ("action", 1)]
        with ThreadPoolExecutor(4) as pool:
            texts = list(pool.map(lambda p: game_script.complete(req(*p)).text, order * 5))
        assert texts[:4] == ["Action: NO_SEARCH", "Action: IMAGE_SEARCH",
                             texts[2], "Action: TEXT_SEARCH"]
        assert "How many copies did Astro Bot sell?" in texts[2]
        assert texts == texts[:4] * 5

    def test_multi_sample_script(self):
        expert = ScriptedExpert({"samples": {"a": {"answer": "A"}}, "default": {"answer": "D"}})
        ask = lambda sid: expert.complete(ExpertRequest("", "u", meta={"role": "answer", "sample_id": sid})).text
        assert ask("a") == "A" and ask("zzz") == "D"

    def test_closed_book_answer(self):
        expert = ScriptedExpert({"answer": "with docs", "closed_book_answer": "without"})
        ask = lambda n: expert.complete(ExpertRequest("", "u", meta={"role": "answer", "evidence_count": n})).text
        assert ask(0) == "without" and ask(3) == "with docs"


class TestRemoteChatExpert:
    def _client(self, handler):
        return httpx.Client(transport=httpx.MockTransport(handler))

    def test_payload_and_parse(self, game_query):
        seen = {}

        def handler(request):
            seen["url"] = str(request.url)
            seen["auth"] = request.headers.get("authorization")
            seen["body"] = json.loads(request.content)
            return httpx.Response(200, json={
                "choices": [{"message": {"content": "Action: TEXT_SEARCH"}}],
                "usage": {"prompt_tokens": 7, "completion_tokens": 3},
            })

        expert = RemoteChatExpert("http://llm.local/v1", "m1", "secret", client=self._client(handler))
        resp = expert.complete(ExpertRequest("sys", "hello", images=(game_query.image,)))
        assert resp.text == "Action: TEXT_SEARCH" and resp.total_tokens == 10
        assert seen["url"] == "http://llm.local/v1/chat/completions"
        assert seen["auth"] == "Bearer secret"
        body = seen["body"]
        assert body["model"] == "m1"
        assert body["messages"][0] == {"role": "system", "content": "sys"}
        parts = body["messages"][1]["content"]
        assert parts[0] == {"type": "text", "text": "hello"}
        assert parts[1]["image_url"]["url"].startswith("data:image/png;base64,")

    def test_url_images_passed_through(self):
        expert = RemoteChatExpert("http://x", "m", client=self._client(lambda r: httpx.Response(500)))
        payload = expert.build_payload(ExpertRequest("", "u", images=(ImageRef.from_locator("https://img/a.png"),)))
        assert payload["messages"][-1]["content"][1]["image_url"]["url"] == "https://img/a.png"

    def test_retries_then_succeeds(self):
        calls = []

        def handler(request):
            calls.append(1)
            if len(calls) < 3:
                return httpx.Response(503)
            return httpx.Response(200, json={"choices": [{"message": {"content": "ok"}}]})

        expert = RemoteChatExpert("http://x", "m", max_retries=3, backoff_s=0, client=self._client(handler))
        assert expert.complete(ExpertRequest("", "u")).text == "ok"
        assert len(calls) == 3

    def test_gives_up(self):
        def handler(request):
            raise httpx.ConnectError("refused")

        expert = RemoteChatExpert("http://x", "m", max_retries=2, backoff_s=0, client=self._client(handler))
        with pytest.raises(BackendError):
            expert.complete(ExpertRequest("", "u"))

    def test_client_error_not_retried(self):
        calls = []

        def handler(request):
            calls.append(1)
            return httpx.Response(401)

        expert = RemoteChatExpert("http://x", "m", max_retries=3, backoff_s=0, client=self._client(handler))
        with pytest.raises(BackendError):
            expert.complete(ExpertRequest("", "u"))
        assert len(calls) == 1

    def test_from_env(self, monkeypatch):
        monkeypatch.setenv("COGPLAN_EXPERT_URL", "http://env/v1/chat/completions")
        monkeypatch.setenv("COGPLAN_EXPERT_MODEL", "envmodel")
        monkeypatch.delenv("COGPLAN_EXPERT_KEY", raising=False)
        expert = RemoteChatExpert.from_env()
        assert expert.url == "http://env/v1/chat/completions" and expert.model == "envmodel"


def test_prompt_override(tmp_path):
    (tmp_path / "action.txt").write_text("# version: 9\nSYS {origin}\n---\nUSER {queries} {actions} {evidence} {image_note}")
    prompts = PromptSet(tmp_path)
    assert prompts.get("action").version == "9"
    assert prompts.get("reformulate").version == "1"
    rec = RecordingExpert(FixedReply("NO_SEARCH"))
    s0 = init_state(MultimodalQuery("the question"))
    select_action(rec, s0, s0.current_queries, prompts=prompts)
    assert rec.requests[0].system_prompt == "SYS the question"
    assert rec.requests[0].user_text.startswith("USER 1. the question")
