"""AT-command codec for the GSM dialogs the controller drives, plus a
scriptable mock modem speaking the same byte protocol.

The codec runs over any duplex byte channel; tests and the scenario runner
use an in-process socket pair, a deployment would hand in a serial device.
Text mode (AT+CMGF=1) is assumed throughout; PDU mode is out of scope.
"""

from __future__ import annotations

import re
import socket
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

CTRL_Z = b"\x1a"

_NUMBER_RE = re.compile(r"^\+\d{6,15}$")


class GsmError(Exception):
    pass


class GsmTimeout(GsmError):
    """Command exchange timed out; message names the awaited step."""


class GsmProtocolError(GsmError):
    """Modem answered ERROR mid-exchange."""


def validate_number(number: str) -> str:
    if not _NUMBER_RE.match(number):
        raise ValueError(f"invalid phone number {number!r}: expected '+' then 6-15 digits")
    return number


# ---------------------------------------------------------------------------
# Events

@dataclass(frozen=True)
class Ok:
    pass


@dataclass(frozen=True)
class Error:
    pass


@dataclass(frozen=True)
class Prompt:
    pass


@dataclass(frozen=True)
class SmsSent:
    ref: Optional[int]


@dataclass(frozen=True)
class IncomingSmsNotice:
    index: int


@dataclass(frozen=True)
class SmsContent:
    sender: str
    text: str


@dataclass(frozen=True)
class Line:
    raw: str


AtEvent = Ok | Error | Prompt | SmsSent | IncomingSmsNotice | SmsContent | Line


# ---------------------------------------------------------------------------
# Encoding

def encode_dial(number: str) -> bytes:
    return b"ATD" + validate_number(number).encode() + b";\r"


def encode_sms_header(number: str) -> bytes:
    return b'AT+CMGS="' + validate_number(number).encode() + b'"\r'


def encode_sms_body(text: str) -> bytes:
    data = text.encode()
    if CTRL_Z in data:
        raise ValueError("SMS body must not contain the CTRL-Z byte")
    return data + CTRL_Z


def encode_text_mode() -> bytes:
    return b"AT+CMGF=1\r"


def encode_read_sms(index: int) -> bytes:
    return b"AT+CMGR=" + str(int(index)).encode() + b"\r"


# ---------------------------------------------------------------------------
# Incremental event parser

_CMGS_RE = re.compile(r"^\+CMGS:\s*(\d+)?\s*$")
_CMTI_RE = re.compile(r'^\+CMTI:\s*"[^"]*"\s*,\s*(\d+)\s*$')
_CMGR_RE = re.compile(r'^\+CMGR:\s*"[^"]*"\s*,\s*"([^"]*)"')


@dataclass
class ParserState:
    buffer: bytes = b""
    pending_sender: Optional[str] = None  # set after a +CMGR header line


def parse_events(chunk: bytes, state: ParserState) -> tuple[list[AtEvent], ParserState]:
    """Incremental parse; chunks may split lines (and the prompt) arbitrarily."""
    buf = state.buffer + chunk
    sender = state.pending_sender
    events: list[AtEvent] = []
    while True:
        if buf.startswith(b"> "):
            events.append(Prompt())
            buf = buf[2:]
            continue
        if buf == b">":
            break  # possible prompt prefix, wait for more bytes
        nl = buf.find(b"\n")
        if nl < 0:
            break
        line = buf[:nl].rstrip(b"\r").decode(errors="replace")
        buf = buf[nl + 1:]
        if line == "":
            continue
        if sender is not None:
            events.append(SmsContent(sender=sender, text=line))
            sender = None
            continue
        if line == "OK":
            events.append(Ok())
        elif line == "ERROR":
            events.append(Error())
        elif m := _CMGS_RE.match(line):
            events.append(SmsSent(int(m.group(1)) if m.group(1) else None))
        elif m := _CMTI_RE.match(line):
            events.append(IncomingSmsNotice(int(m.group(1))))
        elif m := _CMGR_RE.match(line):
            sender = m.group(1)
        else:
            events.append(Line(line))
    return events, ParserState(buffer=buf, pending_sender=sender)


# ---------------------------------------------------------------------------
# Channel: duplex byte stream + background parser

def socketpair_channel() -> tuple[socket.socket, socket.socket]:
    """In-process duplex byte pipe: (controller end, modem end)."""
    return socket.socketpair()


class AtChannel:
    """Exclusive command issuer over a duplex byte channel.

    A background reader pumps parsed events into a queue; unsolicited
    incoming-SMS notices are routed to ``on_unsolicited`` without
    disturbing an in-flight command exchange.
    """

    def __init__(self, sock: socket.socket,
                 on_unsolicited: Optional[Callable[[AtEvent], None]] = None):
        self._sock = sock
        self._on_unsolicited = on_unsolicited
        self._events: list[AtEvent] = []
        self._cond = threading.Condition()
        self._cmd_lock = threading.Lock()
        self._closed = False
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self):
        state = ParserState()
        self._sock.settimeout(0.1)
        while not self._closed:
            try:
                chunk = self._sock.recv(4096)
            except socket.timeout:
                continue
            except OSError:
                break
            if not chunk:
                break
            events, state = parse_events(chunk, state)
            for ev in events:
                if isinstance(ev, IncomingSmsNotice) and self._on_unsolicited:
                    self._on_unsolicited(ev)
                    continue
                with self._cond:
                    self._events.append(ev)
                    self._cond.notify_all()

    def close(self):
        self._closed = True
        try:
            self._sock.close()
        except OSError:
            pass

    def _write(self, data: bytes):
        self._sock.sendall(data)

    def _await(self, types: tuple[type, ...], step: str, timeout: float) -> AtEvent:
        deadline = time.monotonic() + timeout
        with self._cond:
            while True:
                for i, ev in enumerate(self._events):
                    if isinstance(ev, Error):
                        del self._events[: i + 1]
                        raise GsmProtocolError(f"modem answered ERROR while awaiting {step}")
                    if isinstance(ev, types):
                        del self._events[: i + 1]
                        return ev
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise GsmTimeout(f"timed out awaiting {step}")
                self._cond.wait(remaining)

    def set_text_mode(self, timeout: float = 2.0):
        with self._cmd_lock:
            self._write(encode_text_mode())
            self._await((Ok,), "OK after AT+CMGF=1", timeout)

    def dial(self, number: str, timeout: float = 2.0):
        data = encode_dial(number)
        with self._cmd_lock:
            self._write(data)
            self._await((Ok,), "OK after dial", timeout)

    def send_sms(self, number: str, text: str, timeout: float = 2.0) -> Optional[int]:
        header = encode_sms_header(number)
        body = encode_sms_body(text)
        with self._cmd_lock:
            self._write(header)
            self._await((Prompt,), "prompt after CMGS header", timeout)
            self._write(body)
            sent = self._await((SmsSent,), "+CMGS confirmation", timeout)
            self._await((Ok,), "OK after +CMGS", timeout)
            return sent.ref

    def read_sms(self, index: int, timeout: float = 2.0) -> SmsContent:
        with self._cmd_lock:
            self._write(encode_read_sms(index))
            content = self._await((SmsContent,), "+CMGR content", timeout)
            self._await((Ok,), "OK after +CMGR", timeout)
            return content


# ---------------------------------------------------------------------------
# Mock modem

@dataclass
class TranscriptEntry:
    direction: str  # "rx" bytes the modem received, "tx" bytes it sent
    data: bytes


class MockModem:
    """Protocol-exact scripted modem on the far end of a byte channel.

    ``auto_ok=False`` makes it silent (for timeout tests);
    ``fail_sms_header=True`` answers ERROR to CMGS headers.
    """

    def __init__(self, sock: socket.socket, auto_ok: bool = True,
                 fail_sms_header: bool = False):
        self._sock = sock
        self.auto_ok = auto_ok
        self.fail_sms_header = fail_sms_header
        self.transcript: list[TranscriptEntry] = []
        self.sent_sms: list[tuple[str, str]] = []  # (number, text) in send order
        self.dialed: list[str] = []
        self.inbox: dict[int, tuple[str, str]] = {}
        self._next_ref = 1
        self._next_index = 1
        self._lock = threading.Lock()
        self._closed = False
        self._thread = threading.Thread(target=self._serve, daemon=True)
        self._thread.start()

    def inject_inbound_sms(self, sender: str, text: str) -> int:
        """Queue an inbound SMS and emit the +CMTI unsolicited notice."""
        with self._lock:
            index = self._next_index
            self._next_index += 1
            self.inbox[index] = (sender, text)
        self._send(f'+CMTI: "SM",{index}\r\n'.encode())
        return index

    def close(self):
        self._closed = True
        try:
            self._sock.close()
        except OSError:
            pass

    def transcript_bytes(self, direction: str) -> bytes:
        with self._lock:
            return b"".join(e.data for e in self.transcript if e.direction == direction)

    def _send(self, data: bytes):
        with self._lock:
            self.transcript.append(TranscriptEntry("tx", data))
        try:
            self._sock.sendall(data)
        except OSError:
            pass

    def _serve(self):
        self._sock.settimeout(0.1)
        buf = b""
        awaiting_body: Optional[str] = None  # destination number while in SMS body mode
        while not self._closed:
            try:
                chunk = self._sock.recv(4096)
            except socket.timeout:
                continue
            except OSError:
                break
            if not chunk:
                break
            with self._lock:
                self.transcript.append(TranscriptEntry("rx", chunk))
            buf += chunk
            while True:
                if awaiting_body is not None:
                    z = buf.find(CTRL_Z)
                    if z < 0:
                        break
                    text = buf[:z].decode(errors="replace")
                    buf = buf[z + 1:]
                    number, awaiting_body = awaiting_body, None
                    self.sent_sms.append((number, text))
                    if self.auto_ok:
                        ref = self._next_ref
                        self._next_ref += 1
                        self._send(f"\r\n+CMGS: {ref}\r\n\r\nOK\r\n".encode())
                    continue
                cr = buf.find(b"\r")
                if cr < 0:
                    break
                cmd = buf[:cr].decode(errors="replace").strip()
                buf = buf[cr + 1:]
                if cmd:
                    awaiting_body = self._handle(cmd)

    def _handle(self, cmd: str) -> Optional[str]:
        """React to one command line; returns the SMS number when a body follows."""
        if cmd.startswith("ATD") and cmd.endswith(";"):
            self.dialed.append(cmd[3:-1])
            if self.auto_ok:
                self._send(b"\r\nOK\r\n")
            return None
        if cmd == "AT+CMGF=1":
            if self.auto_ok:
                self._send(b"\r\nOK\r\n")
            return None
        if m := re.match(r'^AT\+CMGS="(\+\d+)"$', cmd):
            if self.fail_sms_header:
                self._send(b"\r\nERROR\r\n")
                return None
            if self.auto_ok:
                self._send(b"\r\n> ")
            return m.group(1)
        if m := re.match(r"^AT\+CMGR=(\d+)$", cmd):
            index = int(m.group(1))
            entry = self.inbox.get(index)
            if entry is None:
                self._send(b"\r\nERROR\r\n")
            else:
                sender, text = entry
                self._send(
                    f'\r\n+CMGR: "REC UNREAD","{sender}",,"24/08/24,12:00:00+00"\r\n'
                    f"{text}\r\n\r\nOK\r\n".encode()
                )
            return None
        if self.auto_ok:
            self._send(b"\r\nOK\r\n")
        return None
