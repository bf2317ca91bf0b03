import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from homesentry.gsm import (
    CTRL_Z,
    AtChannel,
    Error,
    GsmProtocolError,
    GsmTimeout,
    IncomingSmsNotice,
    Line,
    MockModem,
    Ok,
    ParserState,
    Prompt,
    SmsContent,
    SmsSent,
    encode_dial,
    encode_read_sms,
    encode_sms_body,
    encode_sms_header,
    encode_text_mode,
    parse_events,
    socketpair_channel,
    validate_number,
)

OWNER = "+918547616766"


class TestEncoding:
    def test_dial_bytes(self):
        assert encode_dial(OWNER) == b"ATD+918547616766;\r"

    def test_sms_header_bytes(self):
        assert encode_sms_header(OWNER) == b'AT+CMGS="+918547616766"\r'

    def test_sms_body_ends_with_ctrl_z(self):
        body = encode_sms_body("Intruder Detected!!")
        assert body == b"Intruder Detected!!\x1a"
        assert body.count(CTRL_Z) == 1

    def test_body_rejects_ctrl_z(self):
        with pytest.raises(ValueError, match="CTRL-Z"):
            encode_sms_body("bad\x1abyte")

    def test_text_mode_and_read(self):
        assert encode_text_mode() == b"AT+CMGF=1\r"
        assert encode_read_sms(3) == b"AT+CMGR=3\r"

    @pytest.mark.parametrize("bad", ["12345", "+12", "+", "", "+1234567890123456", "+12a45678"])
    def test_invalid_numbers(self, bad):
        with pytest.raises(ValueError):
            validate_number(bad)

    def test_valid_number_round_trips(self):
        assert validate_number("+123456") == "+123456"


def parse_all(data: bytes, chunks=None):
    """Feed data through the incremental parser in the given chunk sizes."""
    state = ParserState()
    events = []
    if chunks is None:
        chunks = [len(data)]
    pos = 0
    for size in chunks:
        evs, state = parse_events(data[pos: pos + size], state)
        events.extend(evs)
        pos += size
    if pos < len(data):
        evs, state = parse_events(data[pos:], state)
        events.extend(evs)
    return events, state


SMS_EXCHANGE = (
    b"\r\n> "
    b"\r\n+CMGS: 4\r\n\r\nOK\r\n"
    b'+CMTI: "SM",2\r\n'
    b'\r\n+CMGR: "REC UNREAD","+918547616766",,"24/08/24,12:00:00+00"\r\n'
    b"Found OK\r\n\r\nOK\r\n"
)

SMS_EXPECTED = [
    Prompt(),
    SmsSent(4),
    Ok(),
    IncomingSmsNotice(2),
    SmsContent(sender=OWNER, text="Found OK"),
    Ok(),
]


class TestParser:
    def test_full_exchange_single_chunk(self):
        events, state = parse_all(SMS_EXCHANGE)
        assert events == SMS_EXPECTED
        assert state.buffer == b"" and state.pending_sender is None

    def test_byte_at_a_time(self):
        events, _ = parse_all(SMS_EXCHANGE, [1] * len(SMS_EXCHANGE))
        assert events == SMS_EXPECTED

    def test_every_split_point(self):
        for cut in range(len(SMS_EXCHANGE) + 1):
            events, _ = parse_all(SMS_EXCHANGE, [cut])
            assert events == SMS_EXPECTED, f"split at {cut}"

    @given(st.lists(st.integers(1, len(SMS_EXCHANGE)), max_size=20))
    @settings(max_examples=100, deadline=None)
    def test_chunking_invariance(self, sizes):
        events, _ = parse_all(SMS_EXCHANGE, sizes)
        assert events == SMS_EXPECTED

    def test_lone_gt_is_buffered(self):
        events, state = parse_all(b">")
        assert events == [] and state.buffer == b">"
        events, state = parse_events(b" ", state)
        assert events == [Prompt()] and state.buffer == b""

    def test_cmgs_without_reference(self):
        events, _ = parse_all(b"+CMGS:\r\nOK\r\n")
        assert events == [SmsSent(None), Ok()]

    def test_error_line(self):
        events, _ = parse_all(b"\r\nERROR\r\n")
        assert events == [Error()]

    def test_unknown_line_surfaces_raw(self):
        events, _ = parse_all(b"RING\r\n")
        assert events == [Line("RING")]

    def test_cmgr_header_split_from_body(self):
        header = b'+CMGR: "REC READ","+111222333",,"24/08/24,09:00:00+00"\r\n'
        events, state = parse_all(header)
        assert events == [] and state.pending_sender == "+111222333"
        events, state = parse_events(b"hello\r\nOK\r\n", state)
        assert events == [SmsContent("+111222333", "hello"), Ok()]


@pytest.fixture
def channel_pair():
    ctl_sock, modem_sock = socketpair_channel()
    modem = MockModem(modem_sock)
    unsolicited = []
    channel = AtChannel(ctl_sock, on_unsolicited=unsolicited.append)
    yield channel, modem, unsolicited
    channel.close()
    modem.close()


class TestChannelWithMockModem:
    def test_text_mode_then_dial(self, channel_pair):
        channel, modem, _ = channel_pair
        channel.set_text_mode()
        channel.dial(OWNER)
        assert modem.dialed == [OWNER]
        assert b"AT+CMGF=1\r" in modem.transcript_bytes("rx")
        assert b"ATD+918547616766;\r" in modem.transcript_bytes("rx")

    def test_send_sms_happy_path(self, channel_pair):
        channel, modem, _ = channel_pair
        ref = channel.send_sms(OWNER, "Intruder Detected!!")
        assert ref == 1
        assert modem.sent_sms == [(OWNER, "Intruder Detected!!")]

    def test_sms_transcript_ordering(self, channel_pair):
        channel, modem, _ = channel_pair
        channel.send_sms(OWNER, "hello")
        rx = modem.transcript_bytes("rx")
        # header line arrives before the body, body ends with exactly one CTRL-Z
        header_at = rx.find(b'AT+CMGS="+918547616766"\r')
        body_at = rx.find(b"hello\x1a")
        assert 0 <= header_at < body_at
        assert rx.count(CTRL_Z) == 1
        # the modem sent its prompt before the body bytes arrived
        order = [(e.direction, e.data) for e in modem.transcript]
        prompt_pos = next(i for i, (d, b) in enumerate(order) if d == "tx" and b"> " in b)
        body_pos = next(i for i, (d, b) in enumerate(order) if d == "rx" and b"hello" in b)
        assert prompt_pos < body_pos

    def test_sms_references_increment(self, channel_pair):
        channel, modem, _ = channel_pair
        assert channel.send_sms(OWNER, "one") == 1
        assert channel.send_sms(OWNER, "two") == 2
        assert [t for _, t in modem.sent_sms] == ["one", "two"]

    def test_inbound_sms_round_trip(self, channel_pair):
        channel, modem, unsolicited = channel_pair
        index = modem.inject_inbound_sms(OWNER, "Found OK")
        deadline = time.monotonic() + 2.0
        while not unsolicited and time.monotonic() < deadline:
            time.sleep(0.01)
        assert unsolicited == [IncomingSmsNotice(index)]
        content = channel.read_sms(index)
        assert content == SmsContent(sender=OWNER, text="Found OK")

    def test_read_missing_index_errors(self, channel_pair):
        channel, _, _ = channel_pair
        with pytest.raises(GsmProtocolError):
            channel.read_sms(99)

    def test_failed_sms_header_raises(self):
        ctl_sock, modem_sock = socketpair_channel()
        modem = MockModem(modem_sock, fail_sms_header=True)
        channel = AtChannel(ctl_sock)
        try:
            with pytest.raises(GsmProtocolError, match="ERROR"):
                channel.send_sms(OWNER, "never delivered")
            assert modem.sent_sms == []
        finally:
            channel.close()
            modem.close()

    def test_silent_modem_times_out_naming_step(self):
        ctl_sock, modem_sock = socketpair_channel()
        modem = MockModem(modem_sock, auto_ok=False)
        channel = AtChannel(ctl_sock)
        try:
            with pytest.raises(GsmTimeout, match="prompt after CMGS header"):
                channel.send_sms(OWNER, "x", timeout=0.3)
            with pytest.raises(GsmTimeout, match="OK after dial"):
                channel.dial(OWNER, timeout=0.3)
        finally:
            channel.close()
            modem.close()
