"""Minimal threaded SMTP sink for integration testing.

Speaks enough of RFC 5321 for smtplib clients (EHLO/HELO, MAIL, RCPT,
DATA, RSET, NOOP, QUIT) and stores every accepted message for assertions.
Can be scripted to reject DATA to exercise email-failure paths.
"""

from __future__ import annotations

import email
import email.message
import socket
import socketserver
import threading
from dataclasses import dataclass, field


@dataclass
class StoredMessage:
    mail_from: str
    rcpt_tos: list[str]
    data: bytes

    @property
    def message(self) -> email.message.Message:
        return email.message_from_bytes(self.data)


class MockSmtpServer:
    """In-process SMTP sink; messages land in .messages."""

    def __init__(self, host: str = "127.0.0.1", port: int = 0):
        self.messages: list[StoredMessage] = []
        self.reject_data = False  # when True, DATA is answered 554
        self._lock = threading.Lock()
        sink = self

        class Handler(socketserver.StreamRequestHandler):
            def handle(self):
                self.wfile.write(b"220 mocksmtp ready\r\n")
                mail_from = ""
                rcpt_tos: list[str] = []
                while True:
                    try:
                        line = self.rfile.readline()
                    except OSError:
                        return
                    if not line:
                        return
                    cmd = line.strip().decode(errors="replace")
                    verb = cmd.split(":")[0].split(" ")[0].upper()
                    if verb in ("EHLO", "HELO"):
                        self.wfile.write(b"250 mocksmtp\r\n")
                    elif verb == "MAIL":
                        mail_from = cmd.partition(":")[2].strip().strip("<>")
                        self.wfile.write(b"250 OK\r\n")
                    elif verb == "RCPT":
                        rcpt_tos.append(cmd.partition(":")[2].strip().strip("<>"))
                        self.wfile.write(b"250 OK\r\n")
                    elif verb == "DATA":
                        if sink.reject_data:
                            self.wfile.write(b"554 transaction failed\r\n")
                            continue
                        self.wfile.write(b"354 end with <CRLF>.<CRLF>\r\n")
                        chunks = []
                        while True:
                            dline = self.rfile.readline()
                            if not dline:
                                return
                            if dline.rstrip(b"\r\n") == b".":
                                break
                            if dline.startswith(b".."):
                                dline = dline[1:]
                            chunks.append(dline)
                        with sink._lock:
                            sink.messages.append(
                                StoredMessage(mail_from, list(rcpt_tos), b"".join(chunks))
                            )
                        mail_from, rcpt_tos = "", []
                        self.wfile.write(b"250 OK message accepted\r\n")
                    elif verb == "RSET":
                        mail_from, rcpt_tos = "", []
                        self.wfile.write(b"250 OK\r\n")
                    elif verb == "NOOP":
                        self.wfile.write(b"250 OK\r\n")
                    elif verb == "QUIT":
                        self.wfile.write(b"221 bye\r\n")
                        return
                    else:
                        self.wfile.write(b"502 command not implemented\r\n")

        class Server(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

        self._server = Server((host, port), Handler)
        self.host, self.port = self._server.server_address[:2]
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    def start(self) -> "MockSmtpServer":
        self._thread.start()
        return self

    def stop(self):
        self._server.shutdown()
        self._server.server_close()
