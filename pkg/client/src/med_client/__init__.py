"""Thin HTTP client for the med extraction service.

Speaks only the public REST schema (``/v1/extract``, ``/v1/health``,
``/v1/config``); all extraction work happens server-side.  The extract
endpoint's canonical JSON is exposed both parsed and as the raw bytes
the service produced, so callers can diff results across deployments
without re-serialization noise.
"""

from __future__ import annotations

import json
import os

import requests

__version__ = "0.1.0"

DEFAULT_TIMEOUT_S = 30.0


class ApiError(Exception):
    """The service answered with a non-2xx status."""

    def __init__(self, status: int, message: str, body: bytes = b""):
        super().__init__(f"HTTP {status}: {message}")
        self.status = status
        self.message = message
        self.body = body


class MedClient:
    """Calls a running med service.

    The endpoint comes from the constructor or the ``MED_ENDPOINT``
    environment variable.  A transient transport failure is retried
    once (extraction is a pure function of its input, so replaying a
    request is safe); a service that stays unreachable raises the
    builtin :class:`ConnectionError`.
    """

    def __init__(
        self,
        endpoint: str | None = None,
        timeout_s: float = DEFAULT_TIMEOUT_S,
        session: requests.Session | None = None,
    ):
        endpoint = endpoint or os.environ.get("MED_ENDPOINT")
        if not endpoint:
            raise ValueError("no service endpoint: pass one or set MED_ENDPOINT")
        self.endpoint = endpoint.rstrip("/")
        self.timeout_s = timeout_s
        self.session = session if session is not None else requests.Session()

    # -- transport ----------------------------------------------------------

    def _request(self, method: str, path: str, body: bytes | None = None):
        url = f"{self.endpoint}{path}"
        headers = {"content-type": "application/json"} if body is not None else None
        last: Exception | None = None
        for _ in range(2):  # one retry on transient transport failure
            try:
                return self.session.request(
                    method, url, data=body, headers=headers, timeout=self.timeout_s
                )
            except (requests.ConnectionError, requests.Timeout) as exc:
                last = exc
        raise ConnectionError(f"med service unreachable at {url}: {last}")

    @staticmethod
    def _checked(response) -> bytes:
        if response.status_code >= 400:
            try:
                message = response.json().get("error", "")
            except ValueError:
                message = ""
            raise ApiError(
                response.status_code,
                message or getattr(response, "reason", "") or "request failed",
                response.content,
            )
        return response.content

    # -- API ----------------------------------------------------------------

    def extract_bytes(
        self,
        *,
        annotated: dict | None = None,
        title: str | None = None,
        lead: str | None = None,
        body: str | None = None,
        date: str | None = None,
    ) -> bytes:
        """The result JSON exactly as the service serialized it.

        Pass either a pre-annotated interchange document or the raw
        article fields (the service then needs an annotation server).
        """
        if annotated is not None:
            payload: dict = {"annotated": annotated}
        else:
            fields = {"title": title, "lead": lead, "body": body, "date": date}
            payload = {key: value for key, value in fields.items() if value is not None}
        raw = json.dumps(payload, ensure_ascii=False).encode("utf-8")
        return self._checked(self._request("POST", "/v1/extract", raw))

    def extract(self, **kwargs) -> dict:
        """Parsed extraction result (see :meth:`extract_bytes`)."""
        return json.loads(self.extract_bytes(**kwargs))

    def health(self) -> str:
        return self._checked(self._request("GET", "/v1/health")).decode("utf-8")

    def config(self) -> dict:
        return json.loads(self._checked(self._request("GET", "/v1/config")))
