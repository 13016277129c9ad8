"""Offline mock of the chat-completion endpoint.

Answers any prompt that carries a serialized record payload with that
record's deterministic rendering, so the full summarize path can run and
be tested with no network. Supports failure injection for retry tests.
"""

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from meibokit.reporting import (
    QAPair,
    Source,
    parse_record_payload,
    render_answer,
    render_question,
)

REFUSAL_TEXT = (
    "I could not find a parseable clinical record in the prompt, "
    "so no clinical report summary can be generated."
)


def _render_payload_records(records) -> str:
    reports = []
    for rec in records:
        pair = QAPair(
            id=rec.subject_eye_id,
            question=render_question(rec),
            answer=render_answer(rec.labels),
            source=Source.DETERMINISTIC_TEMPLATE,
            labels=rec.labels,
        )
        reports.append(pair.as_text())
    return "\n\n".join(reports)


class MockLLMServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address=("127.0.0.1", 0), fail_times: int = 0):
        super().__init__(address, _Handler)
        self.fail_times = fail_times
        self.attempts = 0
        self._counter_lock = threading.Lock()

    @property
    def base_url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}/v1"

    def count_attempt(self) -> int:
        with self._counter_lock:
            self.attempts += 1
            return self.attempts


class _Handler(BaseHTTPRequestHandler):
    def log_message(self, fmt, *args):
        pass  # keep test output quiet

    def _send_json(self, status: int, obj: dict) -> None:
        body = json.dumps(obj).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_POST(self):
        attempt = self.server.count_attempt()
        if attempt <= self.server.fail_times:
            self._send_json(500, {"error": "injected failure"})
            return
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length)
        try:
            request = json.loads(raw)
        except json.JSONDecodeError:
            self._send_json(400, {"error": "malformed JSON body"})
            return
        messages = request.get("messages")
        if not isinstance(messages, list) or not messages:
            self._send_json(400, {"error": "missing messages array"})
            return
        user_texts = [
            str(m.get("content", "")) for m in messages if m.get("role") == "user"
        ]
        prompt = user_texts[-1] if user_texts else ""
        records = parse_record_payload(prompt)
        content = _render_payload_records(records) if records else REFUSAL_TEXT
        self._send_json(
            200,
            {
                "id": f"mock-{attempt}",
                "object": "chat.completion",
                "model": request.get("model", "mock"),
                "choices": [
                    {
                        "index": 0,
                        "message": {"role": "assistant", "content": content},
                        "finish_reason": "stop",
                    }
                ],
            },
        )


def start_mock_server(port: int = 0, host: str = "127.0.0.1", fail_times: int = 0):
    """Start the mock endpoint on a background thread.

    Returns the server; ``server.base_url`` points at its /v1 prefix and
    ``server.shutdown()`` stops it.
    """
    server = MockLLMServer((host, port), fail_times=fail_times)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server


def serve_forever(port: int, host: str = "127.0.0.1", fail_times: int = 0) -> None:
    server = MockLLMServer((host, port), fail_times=fail_times)
    print(f"mock chat-completion endpoint listening on {server.base_url}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
