from __future__ import annotations

import json
import math
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from forge.backend import (
    BackendError,
    BackendProtocolError,
    BackendTimeout,
    GenerationBackend,
    HttpBackend,
    MockBackend,
    SamplingParams,
    ScoreResult,
    perplexity_from_logprobs,
    run_bounded,
)


# --- SamplingParams / ScoreResult contracts ---------------------------------

def test_sampling_defaults_match_standard_settings():
    params = SamplingParams()
    assert params.top_p == 0.9
    assert params.top_k == 40
    assert params.temperature == 0.7
    body = params.to_request("hi", 2)
    assert body["top_p"] == 0.9 and body["top_k"] == 40 and body["temperature"] == 0.7
    assert "seed" not in body
    assert params.with_seed(7).to_request("hi", 1)["seed"] == 7


@pytest.mark.parametrize(
    "kwargs",
    [
        {"top_p": 0.0},
        {"top_p": 1.5},
        {"top_k": -1},
        {"temperature": 0.0},
        {"temperature": -1.0},
        {"max_tokens": 0},
    ],
)
def test_sampling_params_range_enforcement(kwargs):
    with pytest.raises(ValueError):
        SamplingParams(**kwargs)


def test_score_result_invariants():
    result = ScoreResult.from_logprobs([-0.5, 0.0, -1.0])
    assert result.token_count == 3
    with pytest.raises(ValueError):
        ScoreResult.from_logprobs([])
    with pytest.raises(ValueError):
        ScoreResult.from_logprobs([0.1])
    with pytest.raises(ValueError):
        ScoreResult(token_logprobs=(-1.0,), token_count=2)


# --- MockBackend -------------------------------------------------------------

def test_mock_generate_distinct_and_deterministic():
    mock = MockBackend()
    params = SamplingParams(seed=3)
    completions = mock.generate("prompt P", params, n=3)
    assert len(completions) == 3
    assert len(set(completions)) == 3
    assert completions == mock.generate("prompt P", params, n=3)
    assert mock.generate("prompt P", params, n=1)[0] == completions[0]
    assert mock.generate("other prompt", params, n=1) != completions[:1]


def test_mock_generate_seed_offset_matches_batch():
    mock = MockBackend()
    batch = mock.generate("P", SamplingParams(seed=10), n=4)
    sequential = [mock.generate("P", SamplingParams(seed=10 + j), n=1)[0] for j in range(4)]
    assert batch == sequential


def test_mock_generate_rejects_bad_args():
    mock = MockBackend()
    with pytest.raises(ValueError):
        mock.generate("", SamplingParams(), n=1)
    with pytest.raises(ValueError):
        mock.generate("p", SamplingParams(), n=0)


def test_mock_score_constant_logprob_table():
    mock = MockBackend(default_logprob=-math.log(2))
    result = mock.score("ctx", "one two three four")
    assert result.token_count == 4
    assert all(lp == pytest.approx(-math.log(2)) for lp in result.token_logprobs)
    assert mock.score("ctx", "one two three four") == result


def test_mock_score_prefix_and_context_keys():
    mock = MockBackend(
        score_table={
            "hello": [-1.0, -2.0],
            ("needle context", "hello"): [-3.0],
            ("needle context", ""): -0.25,
        }
    )
    # longest/most specific key wins: tuple beats plain prefix
    assert mock.score("has needle context inside", "hello world").token_logprobs == (-3.0,)
    assert mock.score("elsewhere", "hello world").token_logprobs == (-1.0, -2.0)
    assert mock.score("has needle context inside", "other words").token_logprobs == (-0.25, -0.25)


def test_mock_score_empty_continuation_is_error():
    with pytest.raises(BackendError, match="empty continuation"):
        MockBackend().score("ctx", "   ")


def test_mock_score_hash_fallback_is_deterministic_and_negative():
    mock = MockBackend()
    first = mock.score("ctx A", "some words here")
    second = mock.score("ctx A", "some words here")
    other = mock.score("ctx B", "some words here")
    assert first == second
    assert first != other
    assert all(-2.0 <= lp <= -0.5 for lp in first.token_logprobs)


def test_mock_health():
    assert MockBackend().health() is True


def test_perplexity_from_logprobs():
    assert perplexity_from_logprobs([0.0, 0.0]) == 1.0
    assert perplexity_from_logprobs([-1.0, -3.0]) == pytest.approx(math.e**2, rel=1e-12)
    with pytest.raises(ValueError):
        perplexity_from_logprobs([])


# --- HttpBackend against a real local server ---------------------------------

class _Handler(BaseHTTPRequestHandler):
    def do_POST(self):  # noqa: N802 - stdlib naming
        server = self.server
        length = int(self.headers.get("Content-Length", "0"))
        body = json.loads(self.rfile.read(length) or b"{}")
        with server.lock:
            server.requests.append((self.path, body))
            server.active += 1
            server.peak = max(server.peak, server.active)
        try:
            delay = server.delays.pop(0) if server.delays else 0.0
            if delay:
                time.sleep(delay)
            if server.fail_status is not None:
                self.send_response(server.fail_status)
                self.send_header("Content-Length", "0")
                self.end_headers()
                return
            if self.path == "/generate":
                payload = {"completions": [f"completion {i}" for i in range(body.get("n", 1))]}
            elif self.path == "/score":
                tokens = body.get("continuation", "").split()
                payload = {"token_logprobs": [-0.5] * len(tokens)}
            else:
                self.send_response(404)
                self.send_header("Content-Length", "0")
                self.end_headers()
                return
            data = json.dumps(payload).encode("utf-8")
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)
        except (BrokenPipeError, ConnectionResetError):
            pass
        finally:
            with server.lock:
                server.active -= 1

    def log_message(self, *args):  # silence request logging
        pass


@pytest.fixture
def http_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
    server.requests = []
    server.delays = []
    server.fail_status = None
    server.lock = threading.Lock()
    server.active = 0
    server.peak = 0
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield server
    finally:
        server.shutdown()
        server.server_close()


def _client(server, **kwargs) -> HttpBackend:
    host, port = server.server_address
    defaults = dict(timeout_ms=2000, max_in_flight=4, retries=3, backoff_s=0.01)
    defaults.update(kwargs)
    return HttpBackend(f"http://{host}:{port}", **defaults)


def test_http_generate_payload_carries_sampling_defaults(http_server):
    client = _client(http_server)
    completions = client.generate("the prompt", SamplingParams(seed=5), n=2)
    assert completions == ["completion 0", "completion 1"]
    path, body = http_server.requests[-1]
    assert path == "/generate"
    assert body == {
        "prompt": "the prompt",
        "n": 2,
        "max_tokens": 256,
        "top_p": 0.9,
        "top_k": 40,
        "temperature": 0.7,
        "seed": 5,
    }


def test_http_score_round_trip(http_server):
    client = _client(http_server)
    result = client.score("ctx", "three tokens here")
    assert result.token_logprobs == (-0.5, -0.5, -0.5)
    path, body = http_server.requests[-1]
    assert path == "/score"
    assert body == {"context": "ctx", "continuation": "three tokens here"}
    assert client.health() is True


def test_http_retries_timeouts_then_succeeds(http_server):
    http_server.delays = [0.5]  # first request sleeps past the client timeout
    client = _client(http_server, timeout_ms=100)
    result = client.score("ctx", "ok")
    assert result.token_count == 1
    score_requests = [r for r in http_server.requests if r[0] == "/score"]
    assert len(score_requests) == 2


def test_http_timeout_exhausts_attempts(http_server):
    http_server.delays = [0.5, 0.5]
    client = _client(http_server, timeout_ms=100, retries=2)
    with pytest.raises(BackendTimeout) as excinfo:
        client.score("ctx", "ok")
    assert excinfo.value.attempts == 2


def test_http_server_error_is_fatal_not_retried(http_server):
    http_server.fail_status = 500
    client = _client(http_server)
    with pytest.raises(BackendProtocolError, match="500"):
        client.generate("p", SamplingParams(), n=1)
    assert len(http_server.requests) == 1


def test_http_wrong_completion_count_is_protocol_error(http_server):
    client = _client(http_server)

    # ask for n=3 but patch the handler response via a tiny subclass request:
    # easiest is to request n=0 upstream, so instead check the n-mismatch by
    # scoring a completions payload through generate with a lying n.
    class Lying(HttpBackend):
        def _post(self, path, body):
            return {"completions": ["only one"]}

    lying = Lying(client.base_url)
    with pytest.raises(BackendProtocolError, match="expected 2"):
        lying.generate("p", SamplingParams(), n=2)


def test_http_in_flight_cap_enforced(http_server):
    http_server.delays = [0.05] * 8
    client = _client(http_server, max_in_flight=2, timeout_ms=5000)
    results, failures = run_bounded(
        lambda i: client.score("ctx", f"word {i}"), {i: i for i in range(8)}, max_in_flight=8
    )
    assert not failures
    assert len(results) == 8
    assert http_server.peak <= 2


# --- bounded concurrency helper ----------------------------------------------

class CountingBackend(GenerationBackend):
    def __init__(self) -> None:
        self.lock = threading.Lock()
        self.active = 0
        self.peak = 0

    def score(self, context, continuation):
        with self.lock:
            self.active += 1
            self.peak = max(self.peak, self.active)
        time.sleep(0.01)
        with self.lock:
            self.active -= 1
        return ScoreResult.from_logprobs([-1.0])

    def generate(self, prompt, params, n=1):
        raise NotImplementedError


def test_run_bounded_respects_limit_and_reassociates_by_key():
    backend = CountingBackend()
    items = {f"key-{i}": i for i in range(20)}
    results, failures = run_bounded(lambda i: backend.score("c", f"t{i}") and i, items, 3)
    assert not failures
    assert backend.peak <= 3
    assert results == {f"key-{i}": i for i in range(20)}


def test_run_bounded_collects_failures_per_key():
    def flaky(i: int) -> int:
        if i % 2:
            raise RuntimeError(f"boom {i}")
        return i * 10

    results, failures = run_bounded(flaky, {i: i for i in range(6)}, 2)
    assert set(results) == {0, 2, 4}
    assert set(failures) == {1, 3, 5}
    assert all(isinstance(exc, RuntimeError) for exc in failures.values())
