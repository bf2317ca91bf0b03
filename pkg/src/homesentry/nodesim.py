"""Emulated WiFi sensor nodes: each node is a small HTTP server publishing
its status payload, with scriptable event injection replacing physical
stimuli.

Two node kinds exist: PIR motion nodes (a 0/1 motion value) and fire nodes
(a temperature that drives a fire flag, buzzer and relay together).
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Callable, Optional

PIR = "pir"
FIRE = "fire"

SCENARIO_FORMAT_VERSION = 1


@dataclass
class NodeConfig:
    node_id: str = "id1"
    name: str = "pir_sensor_module"
    hardware: str = "esp8266"
    kind: str = PIR
    host: str = "127.0.0.1"
    port: int = 0  # 0 = ephemeral
    fire_threshold_celsius: float = 50.0

    def __post_init__(self):
        if self.kind not in (PIR, FIRE):
            raise ValueError(f"unknown node kind {self.kind!r}")
        if not (0 <= self.port <= 65535):
            raise ValueError(f"invalid port {self.port}")


def render_status(cfg: NodeConfig, value: int, connected: bool) -> bytes:
    """Wire payload: {"variables":[{"<key>":v},{metadata}]}, stable field order."""
    key = "pirvalue" if cfg.kind == PIR else "firevalue"
    doc = {
        "variables": [
            {key: value},
            {
                "id": cfg.node_id,
                "name": cfg.name,
                "hardware": cfg.hardware,
                "connected": connected,
            },
        ]
    }
    return json.dumps(doc, separators=(", ", ": ")).encode()


class SensorNode:
    """One emulated node: HTTP status server plus injectable state.

    State changes happen only through the set_* operations (single writer);
    HTTP reads see a consistent snapshot.
    """

    def __init__(self, cfg: NodeConfig):
        self.cfg = cfg
        self._lock = threading.Lock()
        self._pir_value = 0
        self._temperature = 25.0
        self._connected = True
        self._server: Optional[ThreadingHTTPServer] = None
        self._thread: Optional[threading.Thread] = None

    # -- state ------------------------------------------------------------

    def set_pir(self, value: int) -> None:
        if self.cfg.kind != PIR:
            raise ValueError(f"node {self.cfg.node_id} is not a PIR node")
        if value not in (0, 1):
            raise ValueError("pir value must be 0 or 1")
        with self._lock:
            self._pir_value = value

    def set_temperature(self, celsius: float) -> None:
        if self.cfg.kind != FIRE:
            raise ValueError(f"node {self.cfg.node_id} is not a fire node")
        with self._lock:
            self._temperature = float(celsius)

    def set_connected(self, connected: bool) -> None:
        with self._lock:
            self._connected = bool(connected)

    @property
    def fire_value(self) -> int:
        """Fire flag: boundary inclusive (temperature >= threshold)."""
        with self._lock:
            return 1 if self._temperature >= self.cfg.fire_threshold_celsius else 0

    @property
    def buzzer_on(self) -> bool:
        return self.cfg.kind == FIRE and self.fire_value == 1

    @property
    def relay_on(self) -> bool:
        return self.buzzer_on

    def status_payload(self) -> bytes:
        with self._lock:
            connected = self._connected
            value = (
                self._pir_value
                if self.cfg.kind == PIR
                else (1 if self._temperature >= self.cfg.fire_threshold_celsius else 0)
            )
        return render_status(self.cfg, value, connected)

    # -- server -----------------------------------------------------------

    def start(self) -> None:
        node = self

        class Handler(BaseHTTPRequestHandler):
            def do_GET(self):
                if self.path in ("/status", "/"):
                    body = node.status_payload()
                    self.send_response(200)
                    self.send_header("Content-Type", "application/json")
                    self.send_header("Content-Length", str(len(body)))
                    self.end_headers()
                    self.wfile.write(body)
                else:
                    self.send_error(404)

            def log_message(self, *args):
                pass

        try:
            self._server = ThreadingHTTPServer((self.cfg.host, self.cfg.port), Handler)
        except OSError as e:
            raise RuntimeError(
                f"node {self.cfg.node_id}: cannot bind {self.cfg.host}:{self.cfg.port}: {e}"
            ) from e
        self.cfg.port = self._server.server_address[1]
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        if self._server:
            self._server.shutdown()
            self._server.server_close()
            self._server = None

    @property
    def url(self) -> str:
        return f"http://{self.cfg.host}:{self.cfg.port}/status"


# ---------------------------------------------------------------------------
# Scenario scripts

@dataclass
class ScenarioAction:
    at_ms: int
    node_id: str
    action: str  # set_pir | set_temperature | set_connected | inject_user_sms
    value: object = None


@dataclass
class ScenarioScript:
    actions: list[ScenarioAction] = field(default_factory=list)

    def __post_init__(self):
        offsets = [a.at_ms for a in self.actions]
        if offsets != sorted(offsets):
            raise ValueError("scenario action offsets must be nondecreasing")


@dataclass
class AppliedAction:
    action: ScenarioAction
    applied_at_ms: float


def load_scenario_script(path: str | Path) -> ScenarioScript:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format_version") != SCENARIO_FORMAT_VERSION:
        raise ValueError(f"unsupported scenario format version {doc.get('format_version')!r}")
    actions = [
        ScenarioAction(
            at_ms=int(a["at_ms"]),
            node_id=str(a.get("node_id", "")),
            action=str(a["action"]),
            value=a.get("value"),
        )
        for a in doc.get("actions", [])
    ]
    return ScenarioScript(actions)


_ACTIONS = ("set_pir", "set_temperature", "set_connected", "inject_user_sms")


def run_scenario(
    script: ScenarioScript,
    fleet: dict[str, SensorNode],
    sms_injector: Optional[Callable[[str], None]] = None,
) -> list[AppliedAction]:
    """Apply scripted actions at their offsets against a monotonic clock.

    Validates every action before starting; returns the applied-action
    report with actual timestamps (ms since scenario start).
    """
    for a in script.actions:
        if a.action not in _ACTIONS:
            raise ValueError(f"unknown scenario action {a.action!r}")
        if a.action == "inject_user_sms":
            if sms_injector is None:
                raise ValueError("scenario injects user SMS but no injector was provided")
        elif a.node_id not in fleet:
            raise ValueError(f"scenario references unknown node {a.node_id!r}")

    start = time.monotonic()
    report: list[AppliedAction] = []
    for a in script.actions:
        delay = a.at_ms / 1000.0 - (time.monotonic() - start)
        if delay > 0:
            time.sleep(delay)
        if a.action == "set_pir":
            fleet[a.node_id].set_pir(int(a.value))
        elif a.action == "set_temperature":
            fleet[a.node_id].set_temperature(float(a.value))
        elif a.action == "set_connected":
            fleet[a.node_id].set_connected(bool(a.value))
        elif a.action == "inject_user_sms":
            sms_injector(str(a.value))
        report.append(AppliedAction(a, (time.monotonic() - start) * 1000.0))
    return report
