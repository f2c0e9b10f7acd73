import json
import socket
import subprocess
import sys
from pathlib import Path

import pytest
import requests

from med_client import ApiError, MedClient

FIXTURES = Path(__file__).resolve().parents[2] / "fixtures"
ARTICLE = FIXTURES / "fig1.json"
GEOCODES = FIXTURES / "fig1_geocodes.jsonl"


def unused_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


def test_result_bytes_equal_cli_output(service):
    cli = subprocess.run(
        [
            sys.executable, "-m", "med.cli_service", "extract",
            "--annotated", str(ARTICLE), "--geocoder-cache", str(GEOCODES),
        ],
        capture_output=True,
        check=True,
    )
    client = MedClient(endpoint=service)
    assert client.extract_bytes(annotated=json.loads(ARTICLE.read_bytes())) == cli.stdout


def test_parsed_result_answers(service):
    result = MedClient(endpoint=service).extract(annotated=json.loads(ARTICLE.read_bytes()))
    questions = result["questions"]
    assert questions["who"]["best"]["text"] == "Taliban"
    assert questions["where"]["best"]["geocode"]["place_id"] == "6610621"
    assert questions["why"]["best"] is None


def test_empty_article_maps_to_api_error_422(service):
    with pytest.raises(ApiError) as excinfo:
        MedClient(endpoint=service).extract(title=" ", body="")
    assert excinfo.value.status == 422
    assert excinfo.value.message == "empty article"
    assert json.loads(excinfo.value.body) == {"error": "empty article"}


def test_schema_violation_maps_to_api_error_400(service):
    with pytest.raises(ApiError) as excinfo:
        MedClient(endpoint=service).extract(annotated={"version": "bogus"})
    assert excinfo.value.status == 400


def test_raw_fields_without_annotator_map_to_502(service):
    with pytest.raises(ApiError) as excinfo:
        MedClient(endpoint=service).extract(title="A", body="B c.")
    assert excinfo.value.status == 502


def test_health_and_config(service):
    client = MedClient(endpoint=service)
    assert client.health() == "ok"
    assert sum(client.config()["weights_who"]) == pytest.approx(1.0)


def test_unreachable_service_raises_builtin_connection_error():
    client = MedClient(endpoint=f"http://127.0.0.1:{unused_port()}", timeout_s=2.0)
    with pytest.raises(ConnectionError):
        client.health()


def test_endpoint_from_environment(service, monkeypatch):
    monkeypatch.setenv("MED_ENDPOINT", service)
    assert MedClient().health() == "ok"
    monkeypatch.delenv("MED_ENDPOINT")
    with pytest.raises(ValueError):
        MedClient()


class _OkResponse:
    status_code = 200
    content = b"ok"

    def json(self):
        raise ValueError("not json")


def test_transient_failure_is_retried_once():
    calls = []

    class FlakySession:
        def request(self, method, url, **kwargs):
            calls.append(url)
            if len(calls) == 1:
                raise requests.ConnectionError("first attempt drops")
            return _OkResponse()

    assert MedClient(endpoint="http://svc.test", session=FlakySession()).health() == "ok"
    assert len(calls) == 2


def test_persistent_failure_gives_up_after_one_retry():
    calls = []

    class DeadSession:
        def request(self, method, url, **kwargs):
            calls.append(url)
            raise requests.Timeout("no answer")

    with pytest.raises(ConnectionError):
        MedClient(endpoint="http://svc.test", session=DeadSession()).health()
    assert len(calls) == 2
