"""Command line checks: schema export freshness and hash helper."""

from __future__ import annotations

import json

from click.testing import CliRunner

from model_adapter.cli import main
from model_adapter.service import AdapterSettings, create_app
from model_adapter.stub import prompt_hash


class TestExportOpenapi:
    def test_writes_current_schema(self, tmp_path):
        out = tmp_path / "schema.json"
        result = CliRunner().invoke(main, ["export-openapi", "--out", str(out)])
        assert result.exit_code == 0, result.output
        doc = json.loads(out.read_text())
        assert doc == create_app(AdapterSettings(stub=True)).openapi()

    def test_committed_schema_file_is_fresh(self, repo_openapi):
        assert repo_openapi == create_app(AdapterSettings(stub=True)).openapi()


class TestHash:
    def test_matches_library_hash(self):
        result = CliRunner().invoke(main, ["hash", "How many movers?"])
        assert result.exit_code == 0
        assert result.output.strip() == prompt_hash("How many movers?")


def test_serve_help_lists_contract_flags():
    result = CliRunner().invoke(main, ["serve", "--help"])
    assert result.exit_code == 0
    for flag in ("--stub", "--port", "--script", "--margin"):
        assert flag in result.output
