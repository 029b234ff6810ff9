import json
import math
import socket

import pytest

from kgqa.llm import (
    ChatRequest,
    Message,
    ProviderConfig,
    ProviderUnavailable,
    HttpProvider,
    ScriptExhausted,
    ScriptedProvider,
    ScriptRule,
    make_provider,
)


def req(text):
    return ChatRequest(messages=[Message("user", text)])


def test_chat_request_invariants():
    with pytest.raises(ValueError):
        ChatRequest(messages=[])
    with pytest.raises(ValueError):
        ChatRequest(messages=[Message("assistant", "hi")])
    ChatRequest(messages=[Message("system", "s"), Message("user", "u")])


def test_catch_all_rule():
    provider = ScriptedProvider([ScriptRule(".*", "OK")])
    assert provider.complete(req("anything at all")).text == "OK"


def test_first_matching_rule_wins():
    provider = ScriptedProvider(
        [ScriptRule("hello", "first"), ScriptRule("hello world", "second")]
    )
    assert provider.complete(req("hello world")).text == "first"


def test_turn_constraint_per_conversation():
    rules = [
        ScriptRule(".*", "round one", turn=1),
        ScriptRule(".*", "round two", turn=2),
    ]
    provider = ScriptedProvider(rules)
    assert provider.complete(req("q"), conversation_id="a").text == "round one"
    assert provider.complete(req("q"), conversation_id="a").text == "round two"
    # a fresh conversation id restarts the counter
    assert provider.complete(req("q"), conversation_id="b").text == "round one"


def test_script_exhausted():
    provider = ScriptedProvider([ScriptRule("only this", "x")])
    with pytest.raises(ScriptExhausted):
        provider.complete(req("something else"))


def test_script_from_file(tmp_path):
    path = tmp_path / "script.json"
    path.write_text(json.dumps([{"pattern": ".*", "response": "OK"}]))
    provider = make_provider(ProviderConfig(kind="scripted", script_path=str(path)))
    assert provider.complete(req("x")).text == "OK"


def test_scripted_determinism():
    rules = [ScriptRule("a", "A"), ScriptRule(".*", "B")]
    seq = ["has a", "nothing", "also a"]
    runs = []
    for _ in range(2):
        provider = ScriptedProvider(rules)
        runs.append([provider.complete(req(m)).text for m in seq])
    assert runs[0] == runs[1] == ["A", "B", "A"]


# --- embeddings ---------------------------------------------------------------

def test_embed_deterministic_and_normalized():
    provider = ScriptedProvider([])
    [a], [b] = provider.embed(["same text"]), provider.embed(["same text"])
    assert a == b
    assert len(a) == 32
    assert math.isclose(sum(x * x for x in a), 1.0, abs_tol=1e-9)


def test_embed_one_vector_per_text():
    provider = ScriptedProvider([], embedding_dim=16)
    vectors = provider.embed(["a", "b", "c"])
    assert len(vectors) == 3
    assert all(len(v) == 16 for v in vectors)
    assert vectors[0] != vectors[1]


def test_embed_self_cosine_one():
    provider = ScriptedProvider([])
    (v,) = provider.embed(["text"])
    cosine = sum(x * x for x in v)
    assert abs(cosine - 1.0) < 1e-6


# --- provider config ------------------------------------------------------------

def test_provider_config_validation():
    with pytest.raises(ValueError):
        ProviderConfig(kind="remote_api", model="m")  # endpoint required
    with pytest.raises(ValueError):
        ProviderConfig(kind="scripted")  # script required
    ProviderConfig(kind="local_server", endpoint="http://localhost:1", model="m")


def test_http_provider_offline_gives_provider_unavailable():
    # a bound-but-not-listening port refuses connections
    sock = socket.socket()
    sock.bind(("127.0.0.1", 0))
    port = sock.getsockname()[1]
    sock.close()
    provider = HttpProvider(
        ProviderConfig(kind="remote_api", endpoint=f"http://127.0.0.1:{port}/v1", model="m")
    )
    provider.RETRIES = 2
    calls = []
    original_post = provider._client.post

    def counting_post(*args, **kwargs):
        calls.append(1)
        return original_post(*args, **kwargs)

    provider._client.post = counting_post
    with pytest.raises(ProviderUnavailable):
        provider.complete(req("hello"))
    assert len(calls) == 3  # initial + 2 retries


def test_http_provider_parses_openai_shape():
    class FakeResponse:
        status_code = 200

        def raise_for_status(self):
            pass

        def json(self):
            return {
                "choices": [{"message": {"content": "the answer"}}],
                "usage": {"prompt_tokens": 5, "completion_tokens": 2},
            }

    class FakeClient:
        def post(self, url, json=None, headers=None):
            assert url.endswith("/chat/completions")
            assert json["messages"][0]["content"] == "hello"
            return FakeResponse()

    provider = HttpProvider(
        ProviderConfig(kind="remote_api", endpoint="http://x/v1", model="m"),
        client=FakeClient(),
    )
    completion = provider.complete(req("hello"))
    assert completion.text == "the answer"
    assert completion.usage["prompt_tokens"] == 5
