import threading
import time

import pytest
import uvicorn
from fastapi.testclient import TestClient

from model_services import ServiceConfig, create_app


@pytest.fixture
def client() -> TestClient:
    return TestClient(create_app(ServiceConfig()))


class LiveServer:
    """uvicorn in a thread on an ephemeral port, for real-HTTP clients."""

    def __init__(self, app):
        config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
        self.server = uvicorn.Server(config)
        self.thread = threading.Thread(target=self.server.run, daemon=True)

    def __enter__(self) -> str:
        self.thread.start()
        deadline = time.monotonic() + 10.0
        while not self.server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("server did not start")
            time.sleep(0.01)
        port = self.server.servers[0].sockets[0].getsockname()[1]
        return f"http://127.0.0.1:{port}"

    def __exit__(self, *exc_info):
        self.server.should_exit = True
        self.thread.join(timeout=10.0)


@pytest.fixture
def live_server_factory():
    servers = []

    def start(app) -> str:
        server = LiveServer(app)
        url = server.__enter__()
        servers.append(server)
        return url

    yield start
    for server in servers:
        server.__exit__(None, None, None)
