"""Shared test plumbing: drive the ASGI mock server through a sync transport
so client tests exercise the real HTTP layer without opening a socket."""

import asyncio
import sys

import httpx
import pytest

from veracity.mockserver import create_app


class SyncASGITransport(httpx.BaseTransport):
    """Bridge httpx.Client requests onto an ASGI app, one event loop per call."""

    def __init__(self, app):
        self._inner = httpx.ASGITransport(app=app)

    def handle_request(self, request: httpx.Request) -> httpx.Response:
        async def _run():
            response = await self._inner.handle_async_request(request)
            body = await response.aread()
            return httpx.Response(
                response.status_code, headers=response.headers, content=body
            )

        return asyncio.run(_run())


def make_transport(config=None) -> SyncASGITransport:
    return SyncASGITransport(create_app(config))


@pytest.fixture
def mock_transport():
    """Transport factory bound to a fresh mock server per test."""
    return make_transport


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance verdict lines after the run, capture or not."""
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "ACCEPTANCE_LINES", None) if mod else None
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
