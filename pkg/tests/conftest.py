from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from samalm.llm.gateway import Prompt, PromptTag, ScriptedParams
from samalm.llm.scripted import scripted_complete


class StubChatServer:
    """Minimal OpenAI-compatible endpoint.

    By default it answers with the scripted oracle, so a "live" run through
    it behaves like the scripted backend. ``script`` overrides the reply
    sequence with (status, body) tuples; the last entry repeats.
    """

    def __init__(self):
        self.requests: list[dict] = []
        self.script: list[tuple[int, str]] | None = None
        self.delay_s = 0.0
        self.params = ScriptedParams()
        self._server = ThreadingHTTPServer(("127.0.0.1", 0), self._handler())
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self._server.server_address
        return f"http://{host}:{port}/v1"

    def _reply_for(self, payload: dict) -> tuple[int, str]:
        if self.script:
            idx = min(len(self.requests) - 1, len(self.script) - 1)
            return self.script[idx]
        msgs = payload["messages"]
        system = next(m["content"] for m in msgs if m["role"] == "system")
        user = next(m["content"] for m in msgs if m["role"] == "user")
        # The tag is not on the wire; infer it from the prompt shape.
        if user.startswith("## robot-"):
            tag = PromptTag.parse("central_actor")
        elif "Current world model:" in user:
            tag = PromptTag.actor(0)
        else:
            tag = PromptTag.parse("global_critic")
        text = scripted_complete(Prompt(system, user, tag, 0), self.params)
        body = {"choices": [{"index": 0, "message": {"role": "assistant", "content": text}}]}
        return 200, json.dumps(body)

    def _handler(self):
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):  # noqa: N802
                length = int(self.headers.get("Content-Length", 0))
                payload = json.loads(self.rfile.read(length))
                stub.requests.append({"path": self.path, "payload": payload, "auth": self.headers.get("Authorization")})
                if stub.delay_s:
                    import time

                    time.sleep(stub.delay_s)
                status, body = stub._reply_for(payload)
                data = body.encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        return Handler

    def start(self) -> "StubChatServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()


@pytest.fixture
def stub_server():
    server = StubChatServer().start()
    yield server
    server.stop()


def chat_body(content: str) -> str:
    return json.dumps({"choices": [{"index": 0, "message": {"role": "assistant", "content": content}}]})


ACCEPTANCE_LINES: list[str] = []


def acceptance_line(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {title} :: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
