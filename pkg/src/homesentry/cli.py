"""Single command-line entry point.

Structured results go to stdout, diagnostics to stderr. Exit codes:
0 success, 1 domain negative (unknown face / failed assertion),
2 input error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
import tempfile
import time
from pathlib import Path

from . import fisherface, nodesim, scenario, vision

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_INPUT = 2
EXIT_INTERNAL = 3


def _out(payload) -> None:
    print(json.dumps(payload, indent=2))


def cmd_train(args) -> int:
    corpus = Path(args.corpus)
    if not corpus.is_dir():
        print(f"corpus directory not found: {corpus}", file=sys.stderr)
        return EXIT_INPUT
    try:
        ts = fisherface.load_corpus(corpus, args.face_width, args.face_height)
    except fisherface.TrainingError as e:
        print(f"unusable corpus: {e}", file=sys.stderr)
        return EXIT_INPUT
    model = fisherface.train(
        ts,
        fisherface.TrainConfig(
            face_width=args.face_width,
            face_height=args.face_height,
            reject_threshold=args.reject_threshold,
        ),
    )
    fisherface.save_model(model, args.out)
    _out(
        {
            "model": str(args.out),
            "classes": {
                lab: int(s.shape[0]) for lab, s in zip(ts.labels, ts.samples)
            },
            "class_count": ts.class_count,
            "sample_count": ts.total_count,
            "eigenvalues": [float(v) for v in model.eigenvalues],
            "reject_threshold": model.reject_threshold,
        }
    )
    return EXIT_OK


def _candidate_crops(args, model):
    from .imaging import load_gray, resize_nearest

    img = load_gray(args.image)
    if not args.cascade:
        return [resize_nearest(img, model.face_width, model.face_height)]
    cascade = vision.load_cascade(args.cascade)
    boxes = vision.detect_faces(
        img, cascade, vision.DetectParams(min_neighbors=0, step=2)
    )
    return [
        resize_nearest(
            img[b.y: b.y + b.h, b.x: b.x + b.w], model.face_width, model.face_height
        )
        for b in boxes
    ]


def cmd_recognize(args) -> int:
    model = fisherface.load_model(args.model)
    crops = _candidate_crops(args, model)
    if not crops:
        _out({"verdict": "no-face"})
        return EXIT_INPUT
    # detection can return several overlapping windows; keep the best match
    result = min(
        (fisherface.recognize(model, fisherface.flatten(c)) for c in crops),
        key=lambda r: r.distance,
    )
    _out(
        {
            "verdict": "known" if result.known else "unknown",
            "label": result.label,
            "distance": result.distance,
            "class_distances": result.class_distances,
        }
    )
    return EXIT_OK if result.known else EXIT_NEGATIVE


def cmd_detect(args) -> int:
    from .imaging import load_gray

    cascade = vision.load_cascade(args.cascade)
    img = load_gray(args.image)
    boxes = vision.detect_faces(
        img,
        cascade,
        vision.DetectParams(min_neighbors=args.min_neighbors, step=args.step),
    )
    _out([{"x": b.x, "y": b.y, "w": b.w, "h": b.h, "neighbors": b.neighbors} for b in boxes])
    return EXIT_OK if boxes else EXIT_NEGATIVE


def cmd_node(args) -> int:
    if args.config:
        doc = json.loads(Path(args.config).read_text())
        cfg = nodesim.NodeConfig(**doc)
    else:
        cfg = nodesim.NodeConfig(
            node_id=args.node_id,
            kind=args.kind,
            name=f"{args.kind}_sensor_module",
            port=args.port,
            fire_threshold_celsius=args.fire_threshold,
        )
    node = nodesim.SensorNode(cfg)
    node.start()
    print(f"node {cfg.node_id} ({cfg.kind}) serving {node.url}", file=sys.stderr)
    try:
        while True:
            time.sleep(1)
    except KeyboardInterrupt:
        node.stop()
    return EXIT_OK


def cmd_run(args) -> int:
    from .controller import Controller, ControllerConfig

    config = ControllerConfig.from_file(args.config)
    controller = Controller(config)
    controller.start()
    print(
        f"controller running: api port {controller.api_port}, "
        f"stream port {controller.stream_port}",
        file=sys.stderr,
    )
    try:
        while True:
            time.sleep(1)
    except KeyboardInterrupt:
        controller.stop()
    return EXIT_OK


def cmd_scenario(args) -> int:
    workdir = args.workdir or tempfile.mkdtemp(prefix="homesentry-scenario-")
    report = scenario.run_scenario_file(args.file, workdir)
    _out(
        {
            "scenario": str(args.file),
            "workdir": str(workdir),
            "actions_applied": report.actions_applied,
            "passed": report.passed,
            "assertions": [
                {
                    "kind": r.assertion.kind,
                    "params": r.assertion.params,
                    "passed": r.passed,
                    "detail": r.detail,
                    "elapsed_ms": round(r.elapsed_ms, 1),
                }
                for r in report.results
            ],
        }
    )
    return EXIT_OK if report.passed else EXIT_NEGATIVE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="homesentry")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a recognition model from a corpus directory")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--face-width", type=int, default=16)
    p.add_argument("--face-height", type=int, default=16)
    p.add_argument("--reject-threshold", type=float, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("recognize", help="recognize the face in an image")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--cascade", help="detect the face first with this cascade")
    p.set_defaults(func=cmd_recognize)

    p = sub.add_parser("detect", help="detect faces in an image")
    p.add_argument("--cascade", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--min-neighbors", type=int, default=0)
    p.add_argument("--step", type=int, default=2)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("node", help="run an emulated sensor node")
    p.add_argument("--config", help="node config file (JSON)")
    p.add_argument("--node-id", default="id1")
    p.add_argument("--kind", choices=["pir", "fire"], default="pir")
    p.add_argument("--port", type=int, default=0)
    p.add_argument("--fire-threshold", type=float, default=50.0)
    p.set_defaults(func=cmd_node)

    p = sub.add_parser("run", help="start the controller")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("scenario", help="run a scripted end-to-end scenario")
    p.add_argument("file")
    p.add_argument("--workdir")
    p.set_defaults(func=cmd_scenario)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, ValueError, json.JSONDecodeError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as e:  # pragma: no cover - last resort
        print(f"internal error: {e!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
