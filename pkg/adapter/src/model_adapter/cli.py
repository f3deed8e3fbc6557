"""Command line entry points for the sidecar."""

from __future__ import annotations

import json
from pathlib import Path

import click

from .service import AdapterSettings, create_app
from .stub import DEFAULT_MARGIN, load_script, prompt_hash


@click.group()
def main():
    """Model sidecar: serve, or inspect its contract."""


@main.command()
@click.option("--stub", is_flag=True, help="Serve the deterministic stand-ins.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8765, show_default=True, type=int)
@click.option(
    "--script",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="JSON map of prompt hashes to stub answers.",
)
@click.option(
    "--margin",
    default=DEFAULT_MARGIN,
    show_default=True,
    type=int,
    help="Stub rectangle inflation in pixels.",
)
@click.option("--session-ttl", default=300.0, show_default=True, type=float)
@click.option("--lane-timeout", default=30.0, show_default=True, type=float)
@click.option(
    "--seg-model",
    envvar="ADAPTER_SEG_MODEL",
    default=None,
    help="Checkpoint path for a real segmenter (env ADAPTER_SEG_MODEL).",
)
@click.option(
    "--vlm-model",
    envvar="ADAPTER_VLM_MODEL",
    default=None,
    help="Checkpoint path for a real responder (env ADAPTER_VLM_MODEL).",
)
def serve(stub, host, port, script, margin, session_ttl, lane_timeout, seg_model, vlm_model):
    """Run the HTTP service."""
    import uvicorn

    settings = AdapterSettings(
        stub=stub,
        margin=margin,
        script=load_script(script) if script else {},
        session_ttl_s=session_ttl,
        lane_timeout_s=lane_timeout,
    )
    app = create_app(settings)
    if not stub:
        # Real weights need a Segmenter/Responder integration wired into
        # create_app; until then the service reports loading and 503s.
        click.echo(
            f"real mode: no model integration bundled "
            f"(seg={seg_model or 'unset'}, vlm={vlm_model or 'unset'}); "
            f"endpoints answer 503 until models are injected",
            err=True,
        )
    uvicorn.run(app, host=host, port=port, log_level="info")


@main.command("export-openapi")
@click.option(
    "--out",
    type=click.Path(dir_okay=False, path_type=Path),
    required=True,
    help="Where to write the schema document.",
)
def export_openapi(out: Path):
    """Write the service's OpenAPI description to a JSON file."""
    doc = create_app(AdapterSettings(stub=True)).openapi()
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(doc, indent=2) + "\n")
    click.echo(f"wrote {out}")


@main.command("hash")
@click.argument("text")
def hash_cmd(text: str):
    """Print the script key for a prompt."""
    click.echo(prompt_hash(text))


if __name__ == "__main__":
    main()
