"""Scripted end-to-end scenario runner.

Owns every mock endpoint (SMTP sink, mock modem, emulated node fleet),
builds deterministic synthetic fixtures (face corpus, trained model,
cascade, frame playback), starts a controller against them, drives the
scripted actions, and evaluates machine-readable assertions with
per-assertion deadlines on a monotonic clock.
"""

from __future__ import annotations

import json
import socket
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import fisherface, nodesim, synthetic, vision
from .controller import Controller, ControllerConfig, NodeRef
from .gsm import AtChannel, MockModem, socketpair_channel
from .mocksmtp import MockSmtpServer

SCENARIO_SPEC_VERSION = 1

_ASSERTION_KINDS = (
    "transcript-contains",
    "state-reached",
    "file-absent",
    "file-present",
    "stream-frames-at-least",
    "email-received",
    "captures-exactly",
    "sms-count",
)


@dataclass
class Assertion:
    kind: str
    params: dict
    deadline_ms: int = 5000
    finally_: bool = False  # negative assertions: check once when the deadline expires

    def __post_init__(self):
        if self.kind not in _ASSERTION_KINDS:
            raise ValueError(f"unknown assertion kind {self.kind!r}")
        if self.deadline_ms <= 0:
            raise ValueError("assertion deadline must be > 0")


@dataclass
class AssertionResult:
    assertion: Assertion
    passed: bool
    detail: str
    elapsed_ms: float


@dataclass
class ScenarioReport:
    results: list[AssertionResult] = field(default_factory=list)
    actions_applied: int = 0

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)


class _StreamClient:
    """Background MJPEG client counting received parts."""

    def __init__(self, port: int):
        self.parts = 0
        self._stop = False
        self._thread = threading.Thread(target=self._run, args=(port,), daemon=True)
        self._thread.start()

    def _run(self, port: int):
        try:
            sock = socket.create_connection(("127.0.0.1", port), timeout=5)
            sock.sendall(b"GET /stream HTTP/1.1\r\nHost: localhost\r\n\r\n")
            sock.settimeout(0.2)
            buf = b""
            while not self._stop:
                try:
                    chunk = sock.recv(65536)
                except socket.timeout:
                    continue
                if not chunk:
                    break
                buf += chunk
                self.parts = buf.count(b"Content-Length:")
            sock.close()
        except OSError:
            pass

    def stop(self):
        self._stop = True


def load_scenario_spec(path: str | Path) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format_version") != SCENARIO_SPEC_VERSION:
        raise ValueError(f"unsupported scenario spec version {doc.get('format_version')!r}")
    return doc


class ScenarioRunner:
    def __init__(self, spec: dict, workdir: str | Path):
        self.spec = spec
        self.workdir = Path(workdir)
        self.smtp: Optional[MockSmtpServer] = None
        self.modem: Optional[MockModem] = None
        self.channel: Optional[AtChannel] = None
        self.controller: Optional[Controller] = None
        self.fleet: dict[str, nodesim.SensorNode] = {}
        self.stream_client: Optional[_StreamClient] = None

    # -- setup ------------------------------------------------------------

    def _build_fixtures(self) -> tuple[Path, Path, Path]:
        fx = self.spec.get("fixtures", {})
        seed = int(fx.get("seed", 7))
        labels = list(fx.get("labels", ["alice", "bob", "carol"]))
        corpus_dir = self.workdir / "corpus"
        patterns = synthetic.write_face_corpus(
            corpus_dir, labels, per_class=int(fx.get("per_class", 5)), seed=seed
        )
        ts = fisherface.load_corpus(corpus_dir, 16, 16)
        model = fisherface.train(ts, fisherface.TrainConfig(face_width=16, face_height=16))
        model_path = self.workdir / "model.json"
        fisherface.save_model(model, model_path)

        cascade = synthetic.center_bright_cascade()
        cascade_path = self.workdir / "cascade.json"
        vision.save_cascade(cascade, cascade_path)

        scene_kind = fx.get("scene", "known")
        if scene_kind == "known":
            pattern = patterns[fx.get("known_label", labels[0])]
        elif scene_kind == "unknown":
            import numpy as np

            pattern = synthetic.face_pattern(np.random.default_rng(seed + 1000))
        else:  # "blank" — fire-only scenarios never look at frames
            pattern = None
        frames = []
        if pattern is not None:
            frames = [synthetic.scene_with_pattern(pattern)] * 4
        else:
            frames = [synthetic.blank_scene()] * 4
        frame_dir = self.workdir / "frames"
        synthetic.write_frame_sequence(frame_dir, frames)
        return model_path, cascade_path, frame_dir

    def _start_fleet(self):
        for node_spec in self.spec.get("nodes", []):
            cfg = nodesim.NodeConfig(
                node_id=node_spec["node_id"],
                name=node_spec.get("name", f"{node_spec['kind']}_sensor_module"),
                kind=node_spec["kind"],
                fire_threshold_celsius=float(node_spec.get("fire_threshold_celsius", 50.0)),
            )
            node = nodesim.SensorNode(cfg)
            node.start()
            self.fleet[cfg.node_id] = node

    def setup(self):
        self.workdir.mkdir(parents=True, exist_ok=True)
        model_path, cascade_path, frame_dir = self._build_fixtures()

        self.smtp = MockSmtpServer().start()
        self.smtp.reject_data = bool(self.spec.get("smtp", {}).get("reject_data", False))

        ctl_end, modem_end = socketpair_channel()
        self.modem = MockModem(modem_end)
        self._start_fleet()

        overrides = dict(self.spec.get("controller", {}))
        config = ControllerConfig(
            nodes=[
                NodeRef(node_id=nid, kind=node.cfg.kind, url=node.url)
                for nid, node in self.fleet.items()
            ],
            poll_period_ms=int(overrides.get("poll_period_ms", 100)),
            rearm_lockout_ms=int(overrides.get("rearm_lockout_ms", 10000)),
            owner_number=overrides.get("owner_number", "+918547616766"),
            authority_numbers=list(overrides.get("authority_numbers", [])),
            smtp_host=self.smtp.host,
            smtp_port=self.smtp.port,
            frame_rate=float(overrides.get("frame_rate", 10.0)),
            storage_dir=str(self.workdir / "storage"),
            retention_seconds=float(overrides.get("retention_seconds", 3600.0)),
            model_path=str(model_path),
            cascade_path=str(cascade_path),
            frame_dir=str(frame_dir),
            email_retries=int(overrides.get("email_retries", 0)),
        )
        detect_params = vision.DetectParams(
            scale_factor=1.2, step=4, min_neighbors=0, max_size=26
        )
        self.controller = Controller(config, detect_params=detect_params)
        self.channel = AtChannel(
            ctl_end, on_unsolicited=self.controller.on_unsolicited_modem_event
        )
        self.controller.modem = self.channel
        self.controller.start()
        self.stream_client = _StreamClient(self.controller.stream_port)

    def teardown(self):
        if self.stream_client:
            self.stream_client.stop()
        if self.controller:
            self.controller.stop()
        for node in self.fleet.values():
            node.stop()
        if self.channel:
            self.channel.close()
        if self.modem:
            self.modem.close()
        if self.smtp:
            self.smtp.stop()

    # -- execution --------------------------------------------------------

    def run(self) -> ScenarioReport:
        self.setup()
        try:
            script = nodesim.ScenarioScript(
                actions=[
                    nodesim.ScenarioAction(
                        at_ms=int(a["at_ms"]),
                        node_id=str(a.get("node_id", "")),
                        action=str(a["action"]),
                        value=a.get("value"),
                    )
                    for a in self.spec.get("actions", [])
                ]
            )
            owner = self.controller.config.owner_number
            applied = nodesim.run_scenario(
                script,
                self.fleet,
                sms_injector=lambda text: self.modem.inject_inbound_sms(owner, text),
            )
            report = ScenarioReport(actions_applied=len(applied))
            for spec in self.spec.get("assertions", []):
                assertion = Assertion(
                    kind=spec["kind"],
                    params=dict(spec.get("params", {})),
                    deadline_ms=int(spec.get("deadline_ms", 5000)),
                    finally_=bool(spec.get("finally", False)),
                )
                report.results.append(self._evaluate(assertion))
            return report
        finally:
            self.teardown()

    def _evaluate(self, assertion: Assertion) -> AssertionResult:
        start = time.monotonic()
        deadline = start + assertion.deadline_ms / 1000.0
        if assertion.finally_:
            remaining = deadline - time.monotonic()
            if remaining > 0:
                time.sleep(remaining)
            ok, detail = self._check(assertion)
            return AssertionResult(assertion, ok, detail, (time.monotonic() - start) * 1000)
        while True:
            ok, detail = self._check(assertion)
            if ok or time.monotonic() >= deadline:
                return AssertionResult(
                    assertion, ok, detail, (time.monotonic() - start) * 1000
                )
            time.sleep(0.05)

    def _check(self, assertion: Assertion) -> tuple[bool, str]:
        p = assertion.params
        kind = assertion.kind
        if kind == "transcript-contains":
            direction = p.get("direction", "rx")
            needle = p["text"].encode()
            data = self.modem.transcript_bytes(direction)
            return needle in data, f"{direction} transcript {len(data)} bytes"
        if kind == "state-reached":
            want = p["state"]
            for event in self.controller.snapshot_events():
                if want in event["history"] or event["resolution"] == want:
                    return True, f"event {event['event_id']} reached {want}"
            return False, f"no event reached {want}"
        if kind in ("file-absent", "file-present"):
            matches = list(Path(self.controller.config.storage_dir).glob(p["glob"]))
            present = bool(matches)
            ok = present if kind == "file-present" else not present
            return ok, f"{len(matches)} match(es) for {p['glob']}"
        if kind == "stream-frames-at-least":
            count = self.stream_client.parts if self.stream_client else 0
            return count >= int(p["count"]), f"{count} stream parts"
        if kind == "email-received":
            msgs = list(self.smtp.messages)
            if "body_contains" in p:
                msgs = [m for m in msgs if p["body_contains"] in m.data.decode(errors="replace")]
            if p.get("has_attachment"):
                msgs = [
                    m for m in msgs
                    if any(part.get_filename() for part in m.message.walk())
                ]
            count = len(msgs)
            if "count_exactly" in p:
                return count == int(p["count_exactly"]), f"{count} matching email(s)"
            return count >= int(p.get("count", 1)), f"{count} matching email(s)"
        if kind == "captures-exactly":
            count = sum(len(e["captures"]) for e in self.controller.snapshot_events())
            return count == int(p["count"]), f"{count} capture(s)"
        if kind == "sms-count":
            sent = self.modem.sent_sms
            if "text" in p:
                sent = [s for s in sent if s[1] == p["text"]]
            if "number" in p:
                sent = [s for s in sent if s[0] == p["number"]]
            count = len(sent)
            if "count_exactly" in p:
                return count == int(p["count_exactly"]), f"{count} SMS"
            return count >= int(p.get("count", 1)), f"{count} SMS"
        raise AssertionError(f"unhandled assertion kind {kind}")


def run_scenario_file(path: str | Path, workdir: str | Path) -> ScenarioReport:
    return ScenarioRunner(load_scenario_spec(path), workdir).run()
