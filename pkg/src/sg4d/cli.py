"""Command-line interface.

Subcommands cover the whole life cycle: synthesize a scene, validate a
recorded sequence, build the 4-D structure, query it through a language
model client, and score point-cloud labels against ground truth.

Exit codes: 0 success, 2 for configuration and schema problems, 3 when a
remote model service cannot be reached, 1 for any other processing error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from .config import PipelineConfig, config_from_dict, config_to_dict, load_config
from .errors import (
    CalibrationInvalid,
    ClientUnavailable,
    ConfigError,
    MalformedFrame,
    ManifestError,
    SchemaVersionMismatch,
    Sg4dError,
)
from .graph import (
    IdentityPoseProvider,
    PatchStore,
    TumPoseProvider,
    deserialize_4dsg,
    graph_sha256,
    serialize_4dsg,
)
from .lidarseg import map_to_classes, miou, project_labels, save_label_file
from .pipeline import run_pipeline
from .prompting import MockClient, RemoteClient, query as run_query
from .sceneio import load_frame, load_manifest, validate_sequence
from .segbackends import FileBackend, OracleBackend, RemoteBackend
from .synth import (
    ObjectSpec,
    ScenarioSpec,
    forward_camera,
    generate,
    load_ground_truth,
    scenario_from_dict,
    scenario_to_dict,
)

_CONFIG_EXIT = (
    ConfigError,
    SchemaVersionMismatch,
    ManifestError,
    CalibrationInvalid,
    MalformedFrame,
)


def _run(action):
    try:
        action()
    except ClientUnavailable as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(3)
    except _CONFIG_EXIT as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except Sg4dError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


@click.group()
def main() -> None:
    """Build and query 4-D scene structures from sensor sequences."""


def _make_backend(spec: str, sequence_dir: Path):
    kind, _, rest = spec.partition(":")
    if kind == "oracle":
        root = Path(rest) if rest else sequence_dir
        return OracleBackend(load_ground_truth(root))
    if kind == "files":
        if not rest:
            raise ConfigError("backend 'files' needs a path: files:DIR")
        return FileBackend(rest)
    if kind == "remote":
        if not rest:
            raise ConfigError("backend 'remote' needs a URL: remote:http://...")
        return RemoteBackend(rest)
    raise ConfigError(f"unknown backend {spec!r}")


def _load_graph(graph_path: str, store_path: str | None):
    """Deserialize a saved graph, finding a sibling patch store if present."""
    path = Path(graph_path)
    if store_path:
        store = PatchStore(store_path)
    else:
        sibling = path.parent / "patches"
        store = PatchStore(sibling) if sibling.is_dir() else None
    try:
        return deserialize_4dsg(path.read_text(), patch_store=store)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"cannot load {path}: {exc}") from exc


def _make_pose_provider(spec: str):
    kind, _, rest = spec.partition(":")
    if kind == "manifest":
        return None
    if kind == "identity":
        return IdentityPoseProvider()
    if kind == "tum":
        if not rest:
            raise ConfigError("pose source 'tum' needs a path: tum:FILE")
        return TumPoseProvider(rest)
    raise ConfigError(f"unknown pose source {spec!r}")


@main.command()
@click.argument("sequence_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE")
@click.option(
    "--backend",
    "backend_spec",
    default="oracle",
    show_default=True,
    help="oracle[:GT_DIR], files:DIR, or remote:URL.",
)
@click.option(
    "--pose",
    "pose_spec",
    default="manifest",
    show_default=True,
    help="manifest, identity, or tum:FILE.",
)
@click.option(
    "--patches",
    type=click.Choice(["store", "inline", "drop"]),
    default="store",
    show_default=True,
)
@click.option("--log-file", type=click.Path(dir_okay=False))
def build(
    sequence_dir, out_dir, config_path, overrides, backend_spec, pose_spec, patches, log_file
):
    """Process a sequence directory into OUT/4dsg.json."""

    def action():
        sequence = Path(sequence_dir)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        if config_path:
            config = load_config(config_path, list(overrides))
        elif overrides:
            from .config import apply_overrides

            config = config_from_dict(apply_overrides({}, list(overrides)))
        else:
            config = PipelineConfig()
        manifest = load_manifest(sequence)
        frames = (load_frame(sequence / name) for name in manifest.frames)
        backend = _make_backend(backend_spec, sequence)
        pose_provider = _make_pose_provider(pose_spec)
        result = run_pipeline(frames, backend, config, pose_provider)
        patch_store = (
            PatchStore(out / "patches") if patches == "store" else None
        )
        text = serialize_4dsg(
            result.graph,
            patch_store=patch_store,
            inline_patches=(patches == "inline"),
        )
        (out / "4dsg.json").write_text(text)
        (out / "config.json").write_text(
            json.dumps(config_to_dict(config), indent=2, sort_keys=True)
        )
        report_path = Path(log_file) if log_file else out / "reports.jsonl"
        with report_path.open("w") as fh:
            for report in result.reports:
                fh.write(
                    json.dumps(
                        {
                            "frame_index": report.frame_index,
                            "t": report.timestamp,
                            "n_points": report.n_points,
                            "accepted": report.n_accepted,
                            "rejected": report.n_rejected,
                            "born": report.n_born,
                            "terminated": report.n_terminated,
                            "unmapped": report.n_unmapped,
                            "timings": report.timings,
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )
        click.echo(
            f"built {out / '4dsg.json'}: {len(result.graph.tracks)} tracks, "
            f"{len(result.graph.frames)} frames, sha256 {graph_sha256(text)[:16]}"
        )

    _run(action)


@main.command("query")
@click.argument("graph_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--question", required=True)
@click.option(
    "--client",
    "client_spec",
    default="mock",
    show_default=True,
    help="mock[:SCRIPT.json] or remote:URL.",
)
@click.option("--patch-store", type=click.Path(exists=True, file_okay=False))
@click.option("--json", "as_json", is_flag=True, help="Emit the full result as JSON.")
@click.option(
    "--show-prompt", is_flag=True, help="Print the rendered prompt instead of asking."
)
def query_cmd(graph_path, question, client_spec, patch_store, as_json, show_prompt):
    """Ask a question about a built 4dsg.json."""

    def action():
        graph = _load_graph(graph_path, patch_store)
        if show_prompt:
            from .prompting import render_prompt

            click.echo(render_prompt(graph, question=question).full_text)
            return
        kind, _, rest = client_spec.partition(":")
        if kind == "mock":
            script = {}
            if rest:
                script = json.loads(Path(rest).read_text())
            client = MockClient(script)
        elif kind == "remote":
            if not rest:
                raise ConfigError("client 'remote' needs a URL: remote:http://...")
            client = RemoteClient(rest)
        else:
            raise ConfigError(f"unknown client {client_spec!r}")
        result = run_query(graph, question, client)
        if as_json:
            click.echo(
                json.dumps(
                    {
                        "question": result.question,
                        "answer": result.answer,
                        "client_id": result.client_id,
                        "graph_sha256": result.graph_sha256,
                        "prompt_sha256": result.prompt_sha256,
                        "latency_s": result.latency_s,
                    },
                    sort_keys=True,
                )
            )
        else:
            click.echo(result.answer)

    _run(action)


_PRESETS = {
    "boxes": dict(
        name="boxes",
        seed=7,
        frame_count=20,
        rate_hz=2.0,
        objects=tuple(
            ObjectSpec(
                name=f"box{i}",
                class_name=f"box{i}",
                shape="box",
                size=(1.2, 1.0, 0.9),
                waypoints=(
                    (0.0, 5.0 + 2.5 * i, -3.0 + 2.0 * i, 0.45),
                    (9.5, 6.5 + 2.5 * i, -3.0 + 2.0 * i, 0.45),
                ),
            )
            for i in range(4)
        ),
        cameras=(
            forward_camera("front"),
            forward_camera("left", yaw_deg=60.0),
        ),
        ego_waypoints=((0.0, 0.0, 0.0, 0.0, 0.0), (9.5, 2.0, 0.0, 0.0, 0.0)),
    ),
}


@main.command()
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--spec", "spec_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--preset", type=click.Choice(sorted(_PRESETS)))
def synth(out_dir, spec_path, preset):
    """Generate a synthetic sequence with ground truth."""

    def action():
        if bool(spec_path) == bool(preset):
            raise ConfigError("pass exactly one of --spec or --preset")
        if spec_path:
            doc = json.loads(Path(spec_path).read_text())
            spec = scenario_from_dict(doc)
        else:
            spec = ScenarioSpec(**_PRESETS[preset])
        manifest_path, truth = generate(spec, Path(out_dir))
        click.echo(
            f"wrote {manifest_path}: {len(truth.frames)} frames, "
            f"{len(spec.objects)} objects"
        )

    _run(action)


@main.command()
@click.option("--spec", "spec_path", type=click.Path(dir_okay=False), required=True)
@click.option("--preset", type=click.Choice(sorted(_PRESETS)), default="boxes")
def scenario(spec_path, preset):
    """Write a preset scenario description to edit and reuse."""

    def action():
        spec = ScenarioSpec(**_PRESETS[preset])
        Path(spec_path).write_text(
            json.dumps(scenario_to_dict(spec), indent=2, sort_keys=True)
        )
        click.echo(f"wrote {spec_path}")

    _run(action)


@main.command("eval-lidarseg")
@click.argument("graph_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("sequence_dir", type=click.Path(exists=True, file_okay=False))
@click.option(
    "--object-classes",
    "classes_path",
    type=click.Path(exists=True, dir_okay=False),
    help="JSON mapping of object id to class id.",
)
@click.option(
    "--classes-from-gt",
    is_flag=True,
    help="Assign each object the majority ground-truth class of its points "
    "(association-quality upper bound).",
)
@click.option("--dump-labels", type=click.Path(file_okay=False))
def eval_lidarseg(graph_path, sequence_dir, classes_path, classes_from_gt, dump_labels):
    """Score point labels induced by GRAPH_PATH against synthetic truth."""

    def action():
        if bool(classes_path) == bool(classes_from_gt):
            raise ConfigError(
                "pass exactly one of --object-classes or --classes-from-gt"
            )
        sequence = Path(sequence_dir)
        graph = _load_graph(graph_path, None)
        truth = load_ground_truth(sequence)
        manifest = load_manifest(sequence)
        truth_by_t = {ft.timestamp: ft for ft in truth.frames}
        object_classes: dict[int, int] = {}
        if classes_path:
            doc = json.loads(Path(classes_path).read_text())
            object_classes = {int(k): int(v) for k, v in doc.items()}
        else:
            votes: dict[int, dict[int, int]] = {}
            for track in graph.tracks:
                for step in track.steps:
                    ft = truth_by_t.get(step.timestamp)
                    if ft is None:
                        continue
                    gt_classes = ft.class_ids[step.point_indices]
                    bucket = votes.setdefault(track.object_id, {})
                    for cls, count in zip(*np.unique(gt_classes, return_counts=True)):
                        bucket[int(cls)] = bucket.get(int(cls), 0) + int(count)
            object_classes = {
                oid: max(sorted(bucket), key=lambda c: (bucket[c], -c))
                for oid, bucket in votes.items()
            }
        frame_rows = []
        pooled_pred = []
        pooled_gt = []
        for name in manifest.frames:
            frame = load_frame(sequence / name)
            ft = truth_by_t.get(frame.timestamp)
            if ft is None or frame.timestamp < graph.window_start:
                continue
            objects = project_labels(
                list(graph.tracks), frame.timestamp, frame.n_points
            )
            pred = map_to_classes(objects, object_classes)
            gt = ft.class_ids.astype(np.int64)
            scores = miou(pred, gt)
            frame_rows.append(
                {
                    "t": frame.timestamp,
                    "miou": scores.mean,
                    "per_class": {str(k): v for k, v in sorted(scores.per_class.items())},
                }
            )
            pooled_pred.append(pred)
            pooled_gt.append(gt)
            if dump_labels:
                directory = Path(dump_labels)
                directory.mkdir(parents=True, exist_ok=True)
                save_label_file(directory / f"{name}.bin", pred)
        overall = (
            miou(np.concatenate(pooled_pred), np.concatenate(pooled_gt))
            if pooled_pred
            else None
        )
        click.echo(
            json.dumps(
                {
                    "frames": frame_rows,
                    "overall_miou": overall.mean if overall else 0.0,
                    "overall_per_class": {
                        str(k): v for k, v in sorted(overall.per_class.items())
                    }
                    if overall
                    else {},
                },
                sort_keys=True,
            )
        )

    _run(action)


@main.command()
@click.argument("sequence_dir", type=click.Path(exists=True, file_okay=False))
def validate(sequence_dir):
    """Check a sequence directory; print warnings, if any."""

    def action():
        warnings = validate_sequence(sequence_dir)
        for warning in warnings:
            click.echo(f"warning: {warning}")
        if not warnings:
            click.echo("ok")

    _run(action)


if __name__ == "__main__":
    main()
