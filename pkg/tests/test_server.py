import json
import urllib.error
import urllib.request

import numpy as np
import pytest
from oracles import constant_target

from synthsteal.generator import ConditionalGaussianGenerator, RemoteGenerator
from synthsteal.server import make_server, serve_in_thread


@pytest.fixture
def server():
    gen = ConditionalGaussianGenerator(np.eye(3, 2) * 2, seed=0)
    srv = make_server(constant_target(3, 2), generator=gen)
    serve_in_thread(srv)
    yield srv
    srv.shutdown()
    srv.server_close()


def post(url, body: bytes):
    req = urllib.request.Request(url, data=body, headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=5) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as exc:
        return exc.code, json.loads(exc.read())


def test_meta(server):
    with urllib.request.urlopen(server.url + "/v1/meta") as resp:
        assert json.loads(resp.read()) == {"classes": 3, "dim": 2, "mode": "confidence"}


@pytest.mark.parametrize("body", [
    b"not json",
    b"[1, 2]",
    b'{"inputs": 5}',
    b'{"inputs": [[1, 2, 3]]}',
    b'{"inputs": [["a", "b"]]}',
    b'{"inputs": [[1, 2]], "kind": "logits"}',
])
def test_malformed_bodies_get_400(server, body):
    status, doc = post(server.url + "/v1/query", body)
    assert status == 400
    assert doc["error"]


def test_unknown_route_404(server):
    status, _ = post(server.url + "/v1/nope", b"{}")
    assert status == 404


def test_stats_counts_queries(server):
    post(server.url + "/v1/query", b'{"inputs": [[1, 2], [3, 4]]}')
    with urllib.request.urlopen(server.url + "/v1/stats") as resp:
        assert json.loads(resp.read()) == {"queries": 2}


def test_remote_generator_round_trip(server):
    gen = RemoteGenerator(server.url, 3, 2)
    ds = gen.generate(1, 5)
    assert ds.X.shape == (5, 2) and set(ds.y) == {1}
