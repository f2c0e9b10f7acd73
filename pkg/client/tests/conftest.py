import socket
import subprocess
import sys
import time
from pathlib import Path

import pytest
import requests

CLIENT_DIR = Path(__file__).resolve().parents[1]
FIXTURES = CLIENT_DIR.parent / "fixtures"

sys.path.insert(0, str(CLIENT_DIR / "src"))


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


@pytest.fixture(scope="session")
def service():
    """A real service process serving the bundled fixtures, torn down after."""
    port = free_port()
    proc = subprocess.Popen(
        [
            sys.executable, "-m", "med.cli_service", "serve",
            "--host", "127.0.0.1", "--port", str(port),
            "--geocoder-cache", str(FIXTURES / "fig1_geocodes.jsonl"),
        ],
        stdout=subprocess.DEVNULL,
        stderr=subprocess.DEVNULL,
    )
    url = f"http://127.0.0.1:{port}"
    deadline = time.monotonic() + 30
    while True:
        try:
            if requests.get(f"{url}/v1/health", timeout=1).status_code == 200:
                break
        except requests.ConnectionError:
            pass
        if proc.poll() is not None:
            raise RuntimeError("service process exited during startup")
        if time.monotonic() > deadline:
            proc.kill()
            raise RuntimeError("service did not become healthy in time")
        time.sleep(0.1)
    yield url
    proc.terminate()
    proc.wait(timeout=10)
