"""The master controller: polls sensor nodes, drives the surveillance
pipeline, dispatches email/SMS/call alerts, serves the MJPEG live stream
and the dashboard API, and manages recording storage.

Concurrency layout: one poll loop per node feeds a single serialized
pipeline executor; the stream server and dashboard API read shared state
through snapshot reads; the modem channel is owned by the alert dispatch
path, with unsolicited inbound-SMS notices handed to a worker thread.
Poll loops never block on camera, email or modem I/O.
"""

from __future__ import annotations

import itertools
import json
import queue
import smtplib
import threading
import time
from dataclasses import dataclass, field, asdict
from email.message import EmailMessage
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import requests

from . import fisherface, vision
from .gsm import AtChannel, IncomingSmsNotice
from .imaging import encode_jpeg, load_gray, resize_nearest, save_gray

# Pipeline states
IDLE = "IDLE"
TRIGGERED = "TRIGGERED"
CAPTURED = "CAPTURED"
RECOGNIZED = "RECOGNIZED"
ALERTED = "ALERTED"
ACTIVE = "ACTIVE"
CEASED = "CEASED"
ESCALATED = "ESCALATED"

_INTRUDER_PATH = [IDLE, TRIGGERED, CAPTURED, RECOGNIZED, ALERTED, ACTIVE]
_FIRE_PATH = [IDLE, TRIGGERED, ALERTED, IDLE]

ALLOWED_TRANSITIONS = {
    IDLE: {TRIGGERED},
    TRIGGERED: {CAPTURED, ALERTED},
    CAPTURED: {RECOGNIZED},
    RECOGNIZED: {ALERTED},
    ALERTED: {ACTIVE, IDLE},
    ACTIVE: {CEASED, ESCALATED},
    CEASED: {IDLE},
    ESCALATED: {IDLE},
}

SMS_INTRUDER = "Intruder Detected!!"
SMS_FIRE = "Fire Detected!!"
CMD_FOUND_OK = "found ok"
CMD_INFORM_AUTHORITIES = "inform authorities"


class ParseError(ValueError):
    def __init__(self, message: str, raw: bytes = b""):
        super().__init__(message)
        self.raw = raw


class NodeUnreachable(Exception):
    pass


class StateError(Exception):
    """Operation not valid in the current pipeline state."""

    def __init__(self, message: str, state: str):
        super().__init__(message)
        self.state = state


@dataclass
class NodeRef:
    node_id: str
    kind: str  # "pir" | "fire"
    url: str


@dataclass
class ControllerConfig:
    nodes: list[NodeRef] = field(default_factory=list)
    poll_period_ms: int = 200
    rearm_lockout_ms: int = 10000
    owner_number: str = "+918547616766"
    authority_numbers: list[str] = field(default_factory=list)
    email_from: str = "controller@homesentry.local"
    email_to: str = "owner@example.com"
    smtp_host: str = "127.0.0.1"
    smtp_port: int = 25
    stream_port: int = 0
    api_port: int = 0
    frame_rate: float = 10.0
    storage_dir: str = "storage"
    retention_seconds: float = 3600.0
    model_path: Optional[str] = None
    cascade_path: Optional[str] = None
    frame_dir: Optional[str] = None   # image-directory playback
    frame_device: Optional[int] = None
    static_dir: Optional[str] = None  # dashboard assets served at /
    email_retries: int = 1

    def __post_init__(self):
        if self.poll_period_ms < 50:
            raise ValueError("poll_period_ms must be >= 50")

    @classmethod
    def from_file(cls, path: str | Path) -> "ControllerConfig":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        nodes = [NodeRef(**n) for n in doc.pop("nodes", [])]
        return cls(nodes=nodes, **doc)


@dataclass
class NodeStatus:
    node_id: str
    kind: str
    value: int
    connected: bool
    fetched_at: float
    raw: bytes = b""


@dataclass
class Alert:
    channel: str  # email | sms | call
    at: float
    outcome: str  # ok | failed
    detail: str = ""


@dataclass
class SurveillanceEvent:
    event_id: str
    kind: str                      # "pir" | "fire"
    trigger_node: str
    triggered_at: float
    state: str = IDLE
    history: list[str] = field(default_factory=lambda: [IDLE])
    captures: list[str] = field(default_factory=list)
    verdict: Optional[fisherface.RecognitionResult] = None
    alerts: list[Alert] = field(default_factory=list)
    recording_path: Optional[str] = None
    recording_frames: list[bytes] = field(default_factory=list)
    resolution: Optional[str] = None
    command_source: Optional[str] = None
    retention_deadline: Optional[float] = None
    notes: list[str] = field(default_factory=list)


def extract_sensor_value(payload: bytes, key: str) -> tuple[int, bool]:
    """Pull the sensor value and connected flag out of a node status payload."""
    try:
        doc = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ParseError(f"unparseable node payload: {e}", raw=payload) from e
    variables = doc.get("variables")
    if not isinstance(variables, list) or not variables:
        raise ParseError("payload missing 'variables' list", raw=payload)
    value = None
    connected = True
    for entry in variables:
        if isinstance(entry, dict):
            if key in entry and value is None:
                value = entry[key]
            if "connected" in entry:
                connected = bool(entry["connected"])
    if value is None:
        raise ParseError(f"payload missing sensor key {key!r}", raw=payload)
    if value not in (0, 1):
        raise ParseError(f"sensor value {value!r} is not 0/1", raw=payload)
    return int(value), connected


def poll_node(url: str, kind: str, timeout: float = 2.0) -> NodeStatus:
    key = "pirvalue" if kind == "pir" else "firevalue"
    try:
        resp = requests.get(url, timeout=timeout)
        resp.raise_for_status()
    except requests.RequestException as e:
        raise NodeUnreachable(f"{url}: {e}") from e
    value, connected = extract_sensor_value(resp.content, key)
    return NodeStatus(
        node_id="", kind=kind, value=value, connected=connected,
        fetched_at=time.time(), raw=resp.content,
    )


def send_email(
    smtp_host: str,
    smtp_port: int,
    sender: str,
    recipient: str,
    subject: str,
    body: str,
    attachments: list[tuple[str, bytes, str, str]] = (),
    timeout: float = 5.0,
) -> Alert:
    """Submit one message; attachments are (filename, data, maintype, subtype)."""
    msg = EmailMessage()
    msg["From"] = sender
    msg["To"] = recipient
    msg["Subject"] = subject
    msg.set_content(body)
    for filename, data, maintype, subtype in attachments:
        msg.add_attachment(data, maintype=maintype, subtype=subtype, filename=filename)
    try:
        with smtplib.SMTP(smtp_host, smtp_port, timeout=timeout) as client:
            client.send_message(msg)
        return Alert("email", time.time(), "ok")
    except (smtplib.SMTPException, OSError) as e:
        return Alert("email", time.time(), "failed", detail=str(e))


# ---------------------------------------------------------------------------
# Frame sources

class FrameSource:
    def next_frame(self) -> np.ndarray:
        raise NotImplementedError


class DirectoryFrameSource(FrameSource):
    """Scripted playback: cycles through the images of a directory in name order."""

    def __init__(self, directory: str | Path):
        self.paths = sorted(p for p in Path(directory).iterdir() if p.is_file())
        if not self.paths:
            raise ValueError(f"no frames in {directory}")
        self._cycle = itertools.cycle(self.paths)
        self._lock = threading.Lock()

    def next_frame(self) -> np.ndarray:
        with self._lock:
            path = next(self._cycle)
        return load_gray(path)


class DeviceFrameSource(FrameSource):
    """Live capture through OpenCV; imported lazily, device mode only."""

    def __init__(self, device: int = 0):
        import cv2  # heavyweight; only needed for live devices

        self._cv2 = cv2
        self._cap = cv2.VideoCapture(device)
        if not self._cap.isOpened():
            raise RuntimeError(f"cannot open capture device {device}")
        self._lock = threading.Lock()

    def next_frame(self) -> np.ndarray:
        with self._lock:
            ok, frame = self._cap.read()
        if not ok:
            raise RuntimeError("frame capture failed")
        return self._cv2.cvtColor(frame, self._cv2.COLOR_BGR2GRAY)


# ---------------------------------------------------------------------------
# Controller

class Controller:
    def __init__(
        self,
        config: ControllerConfig,
        frame_source: Optional[FrameSource] = None,
        modem: Optional[AtChannel] = None,
        model: Optional[fisherface.FisherModel] = None,
        cascade: Optional[vision.CascadeModel] = None,
        detect_params: vision.DetectParams = vision.DetectParams(min_neighbors=0, step=4),
        clock: Callable[[], float] = time.time,
    ):
        self.config = config
        self.clock = clock
        self.detect_params = detect_params
        self.frame_source = frame_source or self._build_frame_source(config)
        self.modem = modem
        self.model = model or (
            fisherface.load_model(config.model_path) if config.model_path else None
        )
        self.cascade = cascade or (
            vision.load_cascade(config.cascade_path) if config.cascade_path else None
        )
        self.storage = Path(config.storage_dir)
        self.storage.mkdir(parents=True, exist_ok=True)

        self.node_statuses: dict[str, NodeStatus] = {}
        self.events: list[SurveillanceEvent] = []
        self.active_event: Optional[SurveillanceEvent] = None
        self.buzzer_on = False
        self.audit_log: list[str] = []

        self._lock = threading.RLock()
        self._triggers: queue.Queue = queue.Queue()
        self._sms_indices: queue.Queue = queue.Queue()
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._event_counter = itertools.count(1)
        self._rec_threads: dict[str, threading.Thread] = {}
        self._last_values: dict[str, int] = {}
        self._lockout_until: dict[str, float] = {}
        self._stream_server: Optional[ThreadingHTTPServer] = None
        self._api_server: Optional[ThreadingHTTPServer] = None

    @staticmethod
    def _build_frame_source(config: ControllerConfig) -> Optional[FrameSource]:
        if config.frame_dir:
            return DirectoryFrameSource(config.frame_dir)
        if config.frame_device is not None:
            return DeviceFrameSource(config.frame_device)
        return None

    # -- lifecycle --------------------------------------------------------

    def start(self):
        for ref in self.config.nodes:
            t = threading.Thread(target=self._poll_loop, args=(ref,), daemon=True)
            t.start()
            self._threads.append(t)
        t = threading.Thread(target=self._pipeline_loop, daemon=True)
        t.start()
        self._threads.append(t)
        t = threading.Thread(target=self._inbound_sms_loop, daemon=True)
        t.start()
        self._threads.append(t)
        self._start_stream_server()
        self._start_api_server()

    def stop(self):
        self._stop.set()
        for server in (self._stream_server, self._api_server):
            if server:
                server.shutdown()
                server.server_close()

    @property
    def stream_port(self) -> int:
        return self._stream_server.server_address[1] if self._stream_server else 0

    @property
    def api_port(self) -> int:
        return self._api_server.server_address[1] if self._api_server else 0

    def _audit(self, message: str):
        with self._lock:
            self.audit_log.append(f"{self.clock():.3f} {message}")

    # -- polling ----------------------------------------------------------

    def _poll_loop(self, ref: NodeRef):
        period = self.config.poll_period_ms / 1000.0
        while not self._stop.is_set():
            started = time.monotonic()
            try:
                status = poll_node(ref.url, ref.kind, timeout=period)
                status.node_id = ref.node_id
                with self._lock:
                    self.node_statuses[ref.node_id] = status
                self._detect_edge(ref, status)
            except NodeUnreachable as e:
                self._audit(f"node {ref.node_id} unreachable: {e}")
            except ParseError as e:
                self._audit(f"node {ref.node_id} bad payload: {e}")
            elapsed = time.monotonic() - started
            self._stop.wait(max(0.0, period - elapsed))

    def _detect_edge(self, ref: NodeRef, status: NodeStatus):
        """Edge (0 -> 1) triggering with a re-arm lockout per node."""
        with self._lock:
            prev = self._last_values.get(ref.node_id, 0)
            self._last_values[ref.node_id] = status.value
            if prev == 0 and status.value == 1:
                now = self.clock()
                if now < self._lockout_until.get(ref.node_id, 0.0):
                    self._audit(f"node {ref.node_id} edge suppressed by lockout")
                    return
                self._lockout_until[ref.node_id] = now + self.config.rearm_lockout_ms / 1000.0
                self._triggers.put((ref.node_id, ref.kind, now))

    # -- pipeline ---------------------------------------------------------

    def _pipeline_loop(self):
        while not self._stop.is_set():
            try:
                node_id, kind, at = self._triggers.get(timeout=0.1)
            except queue.Empty:
                continue
            try:
                if kind == "fire":
                    self.on_fire_trigger(node_id, at)
                else:
                    self.on_pir_trigger(node_id, at)
            except Exception as e:  # pipeline must survive any single failure
                self._audit(f"pipeline error on {node_id}: {e!r}")

    def _transition(self, event: SurveillanceEvent, new_state: str):
        if new_state not in ALLOWED_TRANSITIONS.get(event.state, ()):
            raise StateError(
                f"illegal transition {event.state} -> {new_state}", event.state
            )
        event.state = new_state
        event.history.append(new_state)
        self._write_event_log(event, f"state {new_state}")

    def _event_dir(self, event: SurveillanceEvent) -> Path:
        d = self.storage / event.event_id
        d.mkdir(parents=True, exist_ok=True)
        return d

    def _write_event_log(self, event: SurveillanceEvent, line: str):
        with (self._event_dir(event) / "event.log").open("a") as f:
            f.write(f"{self.clock():.3f} {line}\n")

    def _new_event(self, kind: str, node_id: str, at: float) -> SurveillanceEvent:
        event = SurveillanceEvent(
            event_id=f"evt-{next(self._event_counter):04d}",
            kind=kind,
            trigger_node=node_id,
            triggered_at=at,
        )
        with self._lock:
            self.events.append(event)
        return event

    def on_pir_trigger(self, node_id: str, at: float):
        with self._lock:
            if self.active_event is not None:
                self.active_event.notes.append(f"pir retrigger from {node_id} at {at:.3f}")
                self._write_event_log(self.active_event, f"retrigger {node_id}")
                return
            event = self._new_event("pir", node_id, at)
            self.active_event = event
        self._transition(event, TRIGGERED)

        # capture
        frame = self.frame_source.next_frame()
        capture_path = self._event_dir(event) / "capture-0.png"
        save_gray(frame, capture_path)
        event.captures.append(str(capture_path))
        self._transition(event, CAPTURED)

        # detect + recognize
        face_comment = "no face found"
        if self.cascade is not None:
            boxes = vision.detect_faces(frame, self.cascade, self.detect_params)
            if boxes and self.model is not None:
                box = max(boxes, key=lambda b: b.w * b.h)
                if len(boxes) > 1:
                    event.notes.append(f"{len(boxes)} faces detected; recognizing largest")
                crop = frame[box.y: box.y + box.h, box.x: box.x + box.w]
                crop = resize_nearest(crop, self.model.face_width, self.model.face_height)
                event.verdict = fisherface.recognize(self.model, fisherface.flatten(crop))
                face_comment = (
                    f"recognized {event.verdict.label}"
                    if event.verdict.known
                    else "unknown person"
                )
        self._transition(event, RECOGNIZED)

        # email alert
        if event.verdict is not None and event.verdict.known:
            body = f"'{event.verdict.label}' entered in your home"
        elif event.verdict is not None:
            body = (
                "An unknown person entered in your home. "
                "The picture of the unknown person is attached."
            )
        else:
            body = f"Intruder detected by {node_id}; {face_comment}. Full frame attached."
        attachment = (capture_path.name, capture_path.read_bytes(), "image", "png")
        event.alerts.append(self._email_with_retry("Intrusion alert", body, [attachment]))
        self._transition(event, ALERTED)

        # buzzer, recording+streaming, SMS + call
        with self._lock:
            self.buzzer_on = True
        event.recording_path = str(self._event_dir(event) / "recording.mjpeg")
        self._transition(event, ACTIVE)
        rec = threading.Thread(target=self._record_loop, args=(event,), daemon=True)
        rec.start()
        self._rec_threads[event.event_id] = rec
        self._send_sms_alert(event, self.config.owner_number, SMS_INTRUDER)
        self._dial_alert(event, self.config.owner_number)

    def on_fire_trigger(self, node_id: str, at: float):
        event = self._new_event("fire", node_id, at)
        self._transition(event, TRIGGERED)
        self._send_sms_alert(event, self.config.owner_number, SMS_FIRE)
        self._dial_alert(event, self.config.owner_number)
        self._transition(event, ALERTED)
        self._transition(event, IDLE)

    def _email_with_retry(self, subject: str, body: str, attachments) -> Alert:
        alert = None
        for _ in range(1 + max(0, self.config.email_retries)):
            alert = send_email(
                self.config.smtp_host, self.config.smtp_port,
                self.config.email_from, self.config.email_to,
                subject, body, attachments,
            )
            if alert.outcome == "ok":
                break
        return alert

    def _send_sms_alert(self, event: SurveillanceEvent, number: str, text: str):
        if self.modem is None:
            event.alerts.append(Alert("sms", self.clock(), "failed", "no modem configured"))
            return
        try:
            self.modem.send_sms(number, text)
            event.alerts.append(Alert("sms", self.clock(), "ok", text))
        except Exception as e:
            event.alerts.append(Alert("sms", self.clock(), "failed", str(e)))

    def _dial_alert(self, event: SurveillanceEvent, number: str):
        if self.modem is None:
            event.alerts.append(Alert("call", self.clock(), "failed", "no modem configured"))
            return
        try:
            self.modem.dial(number)
            event.alerts.append(Alert("call", self.clock(), "ok", number))
        except Exception as e:
            event.alerts.append(Alert("call", self.clock(), "failed", str(e)))

    # -- recording + streaming -------------------------------------------

    def _record_loop(self, event: SurveillanceEvent):
        """Pump frames into the event recording while it stays ACTIVE.

        The recording file is an MJPEG concatenation; stream clients follow
        the in-memory frame list so every client sees the full sequence.
        """
        interval = 1.0 / self.config.frame_rate
        with open(event.recording_path, "ab") as sink:
            while not self._stop.is_set():
                with self._lock:
                    if event.state != ACTIVE:
                        break
                try:
                    frame = self.frame_source.next_frame()
                except Exception as e:
                    event.notes.append(f"recording truncated: {e}")
                    break
                data = encode_jpeg(frame)
                sink.write(data)
                with self._lock:
                    event.recording_frames.append(data)
                time.sleep(interval)

    # -- resolution -------------------------------------------------------

    def handle_user_sms(self, sender: str, text: str):
        """Owner command loop: 'Found OK' ceases, 'Inform Authorities' escalates."""
        if sender != self.config.owner_number:
            self._audit(f"ignored SMS from non-owner {sender!r}: {text!r}")
            return
        normalized = text.strip().lower()
        if normalized == CMD_FOUND_OK:
            self._resolve("found_ok", source="sms")
        elif normalized == CMD_INFORM_AUTHORITIES:
            self._resolve("inform_authorities", source="sms")
        else:
            self._audit(f"ignored unrecognized owner SMS: {text!r}")

    def resolve_via_api(self, action: str) -> SurveillanceEvent:
        return self._resolve(action, source="api")

    def _resolve(self, action: str, source: str) -> SurveillanceEvent:
        with self._lock:
            event = self.active_event
            if event is None or event.state != ACTIVE:
                state = event.state if event else IDLE
                raise StateError(f"no active event to resolve (state {state})", state)
            event.command_source = source
            if action == "found_ok":
                self._transition(event, CEASED)
                event.resolution = CEASED
                self.buzzer_on = False
            elif action == "inform_authorities":
                self._transition(event, ESCALATED)
                event.resolution = ESCALATED
                self.buzzer_on = False
            else:
                raise ValueError(f"unknown command action {action!r}")
            self.active_event = None
        if action == "inform_authorities":
            for number in self.config.authority_numbers:
                self._send_sms_alert(event, number, SMS_INTRUDER)
        self._finalize_recording(event)
        self._transition(event, IDLE)
        return event

    def _inbound_sms_loop(self):
        """Worker draining +CMTI notices: read the SMS, run the command loop."""
        while not self._stop.is_set():
            try:
                index = self._sms_indices.get(timeout=0.1)
            except queue.Empty:
                continue
            try:
                content = self.modem.read_sms(index)
                self.handle_user_sms(content.sender, content.text)
            except Exception as e:
                self._audit(f"inbound SMS {index} failed: {e}")

    def on_unsolicited_modem_event(self, event):
        if isinstance(event, IncomingSmsNotice):
            self._sms_indices.put(event.index)

    # -- storage lifecycle ------------------------------------------------

    def _finalize_recording(self, event: SurveillanceEvent):
        """Email the recording; delete on confirmed success, else retain
        until the configured retention period expires."""
        if not event.recording_path:
            return
        rec = self._rec_threads.pop(event.event_id, None)
        if rec is not None:
            rec.join(timeout=5.0)
        path = Path(event.recording_path)
        if not path.exists():
            return
        alert = self._email_with_retry(
            f"Event recording {event.event_id}",
            f"Recording of event {event.event_id} attached.",
            [(path.name, path.read_bytes(), "video", "x-motion-jpeg")],
        )
        event.alerts.append(alert)
        if alert.outcome == "ok":
            path.unlink()
            self._write_event_log(event, "recording emailed and deleted")
        else:
            event.retention_deadline = self.clock() + self.config.retention_seconds
            self._write_event_log(
                event, f"recording retained until {event.retention_deadline:.3f}"
            )

    def sweep_storage(self, now: Optional[float] = None):
        """Remove recordings whose retention period has expired."""
        now = self.clock() if now is None else now
        with self._lock:
            events = list(self.events)
        for event in events:
            if (
                event.retention_deadline is not None
                and now >= event.retention_deadline
                and event.recording_path
            ):
                path = Path(event.recording_path)
                if path.exists():
                    path.unlink()
                    self._write_event_log(event, "recording expired and removed")

    # -- HTTP servers -----------------------------------------------------

    _BOUNDARY = "homesentryframe"

    def _serve_mjpeg(self, handler: BaseHTTPRequestHandler):
        handler.send_response(200)
        handler.send_header(
            "Content-Type", f"multipart/x-mixed-replace; boundary={self._BOUNDARY}"
        )
        handler.end_headers()
        sent = 0
        current: Optional[SurveillanceEvent] = None
        interval = 1.0 / self.config.frame_rate
        try:
            while not self._stop.is_set():
                with self._lock:
                    event = self.active_event
                    if event is not current:
                        current, sent = event, 0
                    frames = list(current.recording_frames) if current else []
                if sent < len(frames):
                    for data in frames[sent:]:
                        handler.wfile.write(
                            f"--{self._BOUNDARY}\r\n"
                            f"Content-Type: image/jpeg\r\n"
                            f"Content-Length: {len(data)}\r\n\r\n".encode()
                        )
                        handler.wfile.write(data)
                        handler.wfile.write(b"\r\n")
                    handler.wfile.flush()
                    sent = len(frames)
                time.sleep(interval / 2)
        except (BrokenPipeError, ConnectionResetError, OSError):
            pass  # client went away; other clients are unaffected

    def _start_stream_server(self):
        controller = self

        class StreamHandler(BaseHTTPRequestHandler):
            def do_GET(self):
                if self.path == "/stream":
                    controller._serve_mjpeg(self)
                else:
                    self.send_error(404)

            def log_message(self, *args):
                pass

        self._stream_server = ThreadingHTTPServer(
            ("127.0.0.1", self.config.stream_port), StreamHandler
        )
        self._stream_server.daemon_threads = True
        t = threading.Thread(target=self._stream_server.serve_forever, daemon=True)
        t.start()
        self._threads.append(t)

    def snapshot_nodes(self) -> list[dict]:
        with self._lock:
            statuses = list(self.node_statuses.values())
        return [
            {
                "node_id": s.node_id,
                "kind": s.kind,
                "value": s.value,
                "connected": s.connected,
                "fetched_at": s.fetched_at,
            }
            for s in statuses
        ]

    def snapshot_events(self) -> list[dict]:
        with self._lock:
            events = list(self.events)
        out = []
        for e in reversed(events):  # most recent first
            verdict = None
            if e.verdict is not None:
                verdict = {
                    "known": e.verdict.known,
                    "label": e.verdict.label,
                    "distance": e.verdict.distance,
                }
            out.append(
                {
                    "event_id": e.event_id,
                    "kind": e.kind,
                    "trigger_node": e.trigger_node,
                    "triggered_at": e.triggered_at,
                    "state": e.state,
                    "history": list(e.history),
                    "resolution": e.resolution,
                    "verdict": verdict,
                    "captures": [Path(c).name for c in e.captures],
                    "alerts": [asdict(a) for a in e.alerts],
                    "command_source": e.command_source,
                    "buzzer_on": self.buzzer_on and e is self.active_event,
                }
            )
        return out

    def _start_api_server(self):
        controller = self

        class ApiHandler(BaseHTTPRequestHandler):
            def _json(self, code: int, payload):
                body = json.dumps(payload).encode()
                self.send_response(code)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def do_GET(self):
                if self.path == "/api/nodes":
                    self._json(200, controller.snapshot_nodes())
                elif self.path == "/api/events":
                    self._json(200, controller.snapshot_events())
                elif self.path.startswith("/api/events/") and self.path.endswith("/capture"):
                    event_id = self.path.split("/")[3]
                    with controller._lock:
                        match = [e for e in controller.events if e.event_id == event_id]
                    if not match or not match[0].captures:
                        self.send_error(404)
                        return
                    data = Path(match[0].captures[0]).read_bytes()
                    self.send_response(200)
                    self.send_header("Content-Type", "image/png")
                    self.send_header("Content-Length", str(len(data)))
                    self.end_headers()
                    self.wfile.write(data)
                elif self.path == "/stream":
                    controller._serve_mjpeg(self)
                else:
                    self._serve_static()

            def _serve_static(self):
                root = controller.config.static_dir
                if not root:
                    self.send_error(404)
                    return
                rel = self.path.lstrip("/") or "index.html"
                target = (Path(root) / rel).resolve()
                if not str(target).startswith(str(Path(root).resolve())) or not target.is_file():
                    self.send_error(404)
                    return
                ctype = {
                    ".html": "text/html", ".js": "text/javascript", ".css": "text/css",
                }.get(target.suffix, "application/octet-stream")
                data = target.read_bytes()
                self.send_response(200)
                self.send_header("Content-Type", ctype)
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def do_POST(self):
                if self.path != "/api/command":
                    self.send_error(404)
                    return
                length = int(self.headers.get("Content-Length", 0))
                try:
                    doc = json.loads(self.rfile.read(length) or b"{}")
                except json.JSONDecodeError:
                    self._json(400, {"error": "invalid JSON body"})
                    return
                action = doc.get("action")
                if action not in ("found_ok", "inform_authorities"):
                    self._json(400, {"error": f"unknown action {action!r}"})
                    return
                try:
                    event = controller.resolve_via_api(action)
                except StateError as e:
                    self._json(409, {"error": str(e), "state": e.state})
                    return
                self._json(200, {"event_id": event.event_id, "state": event.state,
                                 "resolution": event.resolution})

            def log_message(self, *args):
                pass

        self._api_server = ThreadingHTTPServer(
            ("127.0.0.1", self.config.api_port), ApiHandler
        )
        self._api_server.daemon_threads = True
        t = threading.Thread(target=self._api_server.serve_forever, daemon=True)
        t.start()
        self._threads.append(t)
