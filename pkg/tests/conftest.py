import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest
from hypothesis import strategies as st

from ooc_detect import datasets
from ooc_detect.detections import DetectionRecord
from ooc_detect.features import default_whitelist

LABEL_POOL = ["finger", "wood", "face", "tie", "human", "decor", "hand", "hair", "plant", "person"]


@pytest.fixture(scope="session")
def table2():
    return datasets.load("table2")[0]


@pytest.fixture(scope="session")
def table3():
    return datasets.load("table3")[0]


@pytest.fixture(scope="session")
def table4():
    return datasets.load("table4")


@pytest.fixture(scope="session")
def mixed():
    return datasets.load_labeled("mixed_labeled")


@pytest.fixture(scope="session")
def whitelist():
    return default_whitelist()


confidences = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


@st.composite
def records(draw, pool=LABEL_POOL, min_size=0):
    labels = draw(st.dictionaries(st.sampled_from(pool), confidences, min_size=min_size))
    image_id = draw(st.text(min_size=1, max_size=8))
    return DetectionRecord(image_id, labels)


class FakeVendor:
    """Tiny HTTP server answering every POST with a canned body."""

    def __init__(self, body, status=200):
        self.body = body
        self.status = status
        self.requests = []
        vendor = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                payload = self.rfile.read(length)
                vendor.requests.append((dict(self.headers), payload))
                data = vendor.body if isinstance(vendor.body, bytes) else json.dumps(vendor.body).encode()
                self.send_response(vendor.status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.server.server_address[1]}/detect"
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def fake_vendor():
    return FakeVendor


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
