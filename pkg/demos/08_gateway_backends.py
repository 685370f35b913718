"""
Talking to a model server
=========================

The gateway speaks an OpenAI-compatible chat and embeddings API. Here
the transport is faked so the example runs offline; pointing
``MOTIVEREC_API_BASE`` at a real server and calling
``HttpBackend.from_env()`` is all that changes.
"""

import json

import httpx

from motiverec.gateway import Gateway, HttpBackend


def fake_server(request):
    body = json.loads(request.content)
    if request.url.path.endswith("/embeddings"):
        data = [{"index": n, "embedding": [1.0, float(len(t)), 0.0]} for n, t in enumerate(body["input"])]
        return httpx.Response(200, json={"data": data})
    reply = "SCORE: 0.8\nFEEDBACK:\nlooks right\nQUERIES:\nwar epic"
    return httpx.Response(200, json={"choices": [{"message": {"content": reply}}], "usage": {"total_tokens": 9}})


backend = HttpBackend("http://model.local/v1", chat_model="any-chat", embed_model="any-embed",
                      client=httpx.Client(transport=httpx.MockTransport(fake_server)))
gateway = Gateway(backend)
print(gateway.embed(["war drama", "romcom"]))
response = gateway.generate("reflect", {"query": "war", "motives": "Prefers war.", "queries": "war",
                                        "candidates": "1. Glory"})
print(response.parsed, response.usage)
