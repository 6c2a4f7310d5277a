"""Shared hooks: repeat acceptance verdicts in the terminal summary so they survive output capture."""
import pytest

VERDICTS: list[str] = []


@pytest.fixture(autouse=True)
def _isolated_out_dir(tmp_path, monkeypatch):
    # commands run without --out must never write into the working tree
    monkeypatch.setenv("SALNET_OUT", str(tmp_path / "salnet-out"))


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
