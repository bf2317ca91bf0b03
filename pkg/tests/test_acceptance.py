"""System acceptance suite.

Each test covers one release criterion end to end, enforces its runtime
budget, and prints a single PASS line with the measured runtime.
"""

import random
import time
from pathlib import Path

import numpy as np
import pytest
import requests

from homesentry import fisherface, synthetic, vision
from homesentry.controller import (
    ACTIVE,
    CEASED,
    ESCALATED,
    Controller,
    ControllerConfig,
    NodeRef,
)
from homesentry.gsm import AtChannel, MockModem, ParserState, parse_events, socketpair_channel
from homesentry.mocksmtp import MockSmtpServer
from homesentry.nodesim import NodeConfig, SensorNode
from homesentry.scenario import _StreamClient
from homesentry.vision import DetectParams, detect_faces, integral_image, rect_sum

from oracles import FisherOracle, brute_rect_sum, exhaustive_scan

OWNER = "+918547616766"
AUTHORITIES = ["+911000000001", "+911000000002"]


class Budget:
    """Runtime budget guard that prints the acceptance verdict line."""

    def __init__(self, name: str, seconds: float):
        self.name = name
        self.seconds = seconds

    def __enter__(self):
        self.start = time.monotonic()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.monotonic() - self.start
        if exc_type is not None:
            print(f"[FAIL] {self.name} ({elapsed:.2f}s)")
            return False
        if elapsed > self.seconds:
            print(f"[FAIL] {self.name}: took {elapsed:.2f}s > {self.seconds:.0f}s budget")
            raise AssertionError(
                f"{self.name} exceeded runtime budget: {elapsed:.2f}s > {self.seconds}s"
            )
        print(f"[PASS] {self.name} ({elapsed:.2f}s)")
        return False


def wait_for(predicate, timeout=10.0, interval=0.02):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return True
        time.sleep(interval)
    return predicate()


# ---------------------------------------------------------------------------
# 1. Integral-image exactness

def test_integral_image_exactness():
    rng = np.random.default_rng(101)
    with Budget("integral-image exactness", 1.0):
        for _ in range(100):
            img = rng.integers(0, 256, (32, 32))
            ii = integral_image(img)
            rows = img.tolist()  # plain lists keep the pixel-loop oracle fast
            for _ in range(50):
                w = int(rng.integers(1, 33))
                h = int(rng.integers(1, 33))
                x = int(rng.integers(0, 33 - w))
                y = int(rng.integers(0, 33 - h))
                assert rect_sum(ii, x, y, w, h) == brute_rect_sum(rows, x, y, w, h)


# ---------------------------------------------------------------------------
# 2. Detector-oracle equivalence

def test_detector_oracle_equivalence():
    rng = np.random.default_rng(202)
    cascade = synthetic.center_bright_cascade()
    params = DetectParams(scale_factor=1.25, step=4, min_neighbors=0)
    positions = [(8, 12), (40, 40), (60, 20), (96, 96), (0, 0)]
    with Budget("detector-oracle equivalence", 10.0):
        for i in range(20):
            scene = synthetic.blank_scene(128)
            if i % 5 != 4:  # every fifth image stays empty
                x, y = positions[i % len(positions)]
                scene[y: y + 24, x: x + 24] = synthetic.face_pattern(rng)
            if i % 7 == 3:  # occasionally a second pattern
                scene[100:124, 4:28] = synthetic.face_pattern(rng)
            got = {(b.x, b.y, b.w, b.h) for b in detect_faces(scene, cascade, params)}
            want = exhaustive_scan(scene, cascade, 1.25, 4)
            assert got == want, f"image {i}: {got ^ want}"


# ---------------------------------------------------------------------------
# 3. Fisherface numerical suite

def _random_training_set(rng, class_count, dim=256):
    labels = [f"class{k}" for k in range(class_count)]
    groups = []
    for _ in labels:
        n_k = int(rng.integers(2, 7))
        mean = rng.normal(0, 10, dim)
        groups.append(mean + rng.normal(0, 1.0, (n_k, dim)))
    return fisherface.TrainingSet(labels, groups)


def test_fisherface_numerical_suite():
    rng = np.random.default_rng(303)
    reg = 1e-6
    with Budget("fisherface numerical suite", 30.0):
        for class_count in (2, 3, 4, 5):
            ts = _random_training_set(rng, class_count)
            basis, Z = fisherface.pca_reduce(ts)
            _, row_labels = ts.stacked()
            s_b, s_w = fisherface.scatter_matrices(Z, row_labels)

            # scatter decomposition: S_T = S_B + S_W within 1e-9 relative
            Zc = Z - Z.mean(axis=0)
            s_t = Zc.T @ Zc
            err = np.linalg.norm(s_t - (s_b + s_w)) / np.linalg.norm(s_t)
            assert err <= 1e-9, f"C={class_count}: decomposition error {err:.3e}"

            # generalized-eigen residual per column, relative, <= 1e-8
            p = s_b.shape[0]
            eps = reg * np.trace(s_w) / p
            s_w_reg = s_w + eps * np.eye(p)
            target = min(class_count - 1, p)
            u, evals = fisherface.lda_solve(s_b, s_w, target, reg)
            for j in range(u.shape[1]):
                lhs = s_b @ u[:, j]
                rhs = evals[j] * (s_w_reg @ u[:, j])
                denom = np.linalg.norm(lhs) + np.linalg.norm(rhs)
                assert np.linalg.norm(lhs - rhs) <= 1e-8 * max(denom, 1.0)

            # leading direction maximizes the Rayleigh surrogate
            def rayleigh(v):
                return float(v @ s_b @ v) / float(v @ s_w_reg @ v)

            best = rayleigh(u[:, 0])
            for _ in range(1000):
                v = rng.normal(size=p)
                v /= np.linalg.norm(v)
                assert rayleigh(v) <= best * (1 + 1e-9)


# ---------------------------------------------------------------------------
# 4. Recognition oracle equivalence

def test_recognition_oracle_equivalence():
    rng = np.random.default_rng(404)
    labels = ["alice", "bob", "carol"]
    with Budget("recognition oracle equivalence", 10.0):
        patterns = {lab: synthetic.face_pattern(rng, size=16) for lab in labels}
        groups = [
            np.stack([
                fisherface.flatten(synthetic.noisy_sample(patterns[lab], rng))
                for _ in range(5)
            ])
            for lab in labels
        ]
        ts = fisherface.TrainingSet(labels, groups)
        config = fisherface.TrainConfig(face_width=16, face_height=16)
        model = fisherface.train(ts, config)
        oracle = FisherOracle(groups, labels)

        # 15 held-out probes: 12 in-class, 3 strangers
        probes = []
        for lab in labels:
            for _ in range(4):
                probes.append(fisherface.flatten(synthetic.noisy_sample(patterns[lab], rng)))
        for seed in (1, 2, 3):
            stranger = synthetic.face_pattern(np.random.default_rng(9000 + seed), size=16)
            probes.append(fisherface.flatten(stranger))
        assert len(probes) == 15

        for probe in probes:
            got = fisherface.recognize(model, probe)
            want_label, _ = oracle.recognize(probe)
            assert (got.label if got.known else None) == want_label

        for group, lab in zip(groups, labels):
            for sample in group:
                got = fisherface.recognize(model, sample)
                assert got.known and got.label == lab
                assert got.distance <= 1e-9


# ---------------------------------------------------------------------------
# End-to-end harness for criteria 5-7

class LiveRun:
    """Full stack: emulated node fleet + polling controller + mock endpoints."""

    def __init__(self, tmp_path, assets, *, scene="known", authorities=(),
                 poll_period_ms=200):
        patterns, model, cascade = assets
        if scene == "known":
            frames = [synthetic.scene_with_pattern(patterns["alice"])] * 4
        else:
            frames = [synthetic.blank_scene()] * 4
        synthetic.write_frame_sequence(tmp_path / "frames", frames)

        self.pir = SensorNode(NodeConfig(node_id="pir1"))
        self.fire = SensorNode(
            NodeConfig(node_id="fire1", name="fire_sensor_module", kind="fire")
        )
        self.pir.start()
        self.fire.start()

        self.smtp = MockSmtpServer().start()
        ctl_end, modem_end = socketpair_channel()
        self.modem = MockModem(modem_end)

        config = ControllerConfig(
            nodes=[
                NodeRef("pir1", "pir", self.pir.url),
                NodeRef("fire1", "fire", self.fire.url),
            ],
            poll_period_ms=poll_period_ms,
            owner_number=OWNER,
            authority_numbers=list(authorities),
            smtp_host=self.smtp.host,
            smtp_port=self.smtp.port,
            frame_rate=10.0,
            frame_dir=str(tmp_path / "frames"),
            storage_dir=str(tmp_path / "storage"),
            email_retries=0,
        )
        self.controller = Controller(
            config,
            modem=None,
            model=model,
            cascade=cascade,
            detect_params=DetectParams(scale_factor=1.2, step=4,
                                       min_neighbors=0, max_size=26),
        )
        self.channel = AtChannel(
            ctl_end, on_unsolicited=self.controller.on_unsolicited_modem_event
        )
        self.controller.modem = self.channel
        self.controller.start()
        self.stream = _StreamClient(self.controller.stream_port)

    def close(self):
        self.stream.stop()
        self.controller.stop()
        self.channel.close()
        self.modem.close()
        self.smtp.stop()
        self.pir.stop()
        self.fire.stop()


@pytest.fixture(scope="module")
def live_assets(tmp_path_factory):
    root = tmp_path_factory.mktemp("live-assets")
    patterns = synthetic.write_face_corpus(root / "corpus", ["alice", "bob", "carol"])
    ts = fisherface.load_corpus(root / "corpus", 16, 16)
    model = fisherface.train(ts, fisherface.TrainConfig())
    return patterns, model, synthetic.center_bright_cascade()


# ---------------------------------------------------------------------------
# 5. End-to-end intrusion scenario

def test_e2e_intrusion_scenario(tmp_path, live_assets):
    with Budget("end-to-end intrusion (cease run)", 30.0):
        run = LiveRun(tmp_path / "run1", live_assets, poll_period_ms=500)
        try:
            poll_s = run.controller.config.poll_period_ms / 1000.0
            t0 = time.monotonic()
            run.pir.set_pir(1)
            assert wait_for(
                lambda: any(
                    Path(c).exists()
                    for e in run.controller.events for c in e.captures
                ),
                timeout=2 * poll_s + 0.5,
            )
            capture_elapsed = time.monotonic() - t0
            assert capture_elapsed <= 2 * poll_s + 0.5, (
                f"capture took {capture_elapsed:.2f}s"
            )

            assert wait_for(lambda: len(run.smtp.messages) >= 1)
            assert len(run.smtp.messages) == 1
            msg = run.smtp.messages[0]
            assert "entered in your home" in msg.data.decode(errors="replace")
            assert any(p.get_filename() for p in msg.message.walk())

            assert wait_for(lambda: run.modem.dialed == [OWNER])
            rx = run.modem.transcript_bytes("rx")
            assert f"ATD{OWNER};".encode() in rx
            assert f'AT+CMGS="{OWNER}"'.encode() in rx
            assert b"Intruder Detected!!\x1a" in rx
            tx = run.modem.transcript_bytes("tx")
            assert b"> " in tx and b"+CMGS:" in tx

            assert wait_for(lambda: run.stream.parts >= 5)

            run.modem.inject_inbound_sms(OWNER, "Found OK")
            event = run.controller.events[0]
            assert wait_for(lambda: event.resolution == CEASED)
            assert CEASED in event.history
            frames_then = len(event.recording_frames)
            time.sleep(0.3)
            assert len(event.recording_frames) == frames_then  # recording stopped
        finally:
            run.close()

    with Budget("end-to-end intrusion (escalation run)", 30.0):
        run = LiveRun(tmp_path / "run2", live_assets, authorities=AUTHORITIES)
        try:
            run.pir.set_pir(1)
            assert wait_for(lambda: bool(run.controller.events), timeout=5)
            event = run.controller.events[0]
            assert wait_for(lambda: event.state == ACTIVE)
            run.modem.inject_inbound_sms(OWNER, "Inform Authorities")
            assert wait_for(lambda: event.resolution == ESCALATED)
            authority_sms = [s for s in run.modem.sent_sms if s[0] != OWNER]
            assert authority_sms == [(n, "Intruder Detected!!") for n in AUTHORITIES]
        finally:
            run.close()


# ---------------------------------------------------------------------------
# 6. Fire scenario

def test_fire_scenario(tmp_path, live_assets):
    with Budget("fire scenario", 10.0):
        run = LiveRun(tmp_path / "fire", live_assets, scene="blank")
        try:
            run.fire.set_temperature(60.0)
            assert run.fire.fire_value == 1
            assert run.fire.buzzer_on and run.fire.relay_on
            payload = requests.get(run.fire.url, timeout=2).json()
            assert payload["variables"][0] == {"firevalue": 1}

            assert wait_for(
                lambda: run.modem.sent_sms == [(OWNER, "Fire Detected!!")]
                and run.modem.dialed == [OWNER]
            )
            time.sleep(0.5)  # allow any stray pipeline work to surface
            events = run.controller.events
            assert len(events) == 1 and events[0].kind == "fire"
            assert all(e.captures == [] for e in events)
            assert run.smtp.messages == []
            assert run.stream.parts == 0
        finally:
            run.close()


# ---------------------------------------------------------------------------
# 7. Storage lifecycle

def test_storage_lifecycle(tmp_path, live_assets):
    with Budget("storage lifecycle", 10.0):
        # successful recording email: file deleted at resolution
        run = LiveRun(tmp_path / "ok", live_assets)
        try:
            run.pir.set_pir(1)
            assert wait_for(lambda: bool(run.controller.events), timeout=5)
            event = run.controller.events[0]
            assert wait_for(lambda: event.state == ACTIVE)
            assert wait_for(lambda: len(event.recording_frames) >= 2)
            run.controller.resolve_via_api("found_ok")
            assert not Path(event.recording_path).exists()
        finally:
            run.close()

        # forced email failure: file retained until retention expiry
        run = LiveRun(tmp_path / "fail", live_assets)
        try:
            run.pir.set_pir(1)
            assert wait_for(lambda: bool(run.controller.events), timeout=5)
            event = run.controller.events[0]
            assert wait_for(lambda: event.state == ACTIVE)
            assert wait_for(lambda: len(event.recording_frames) >= 2)
            run.smtp.reject_data = True
            run.controller.resolve_via_api("found_ok")
            path = Path(event.recording_path)
            assert path.exists()
            assert event.retention_deadline is not None
            run.controller.sweep_storage(now=event.retention_deadline - 1.0)
            assert path.exists()
            run.controller.sweep_storage(now=event.retention_deadline + 1.0)
            assert not path.exists()
        finally:
            run.close()


# ---------------------------------------------------------------------------
# 8. AT chunking invariance

def test_at_chunking_invariance():
    with Budget("AT chunking invariance", 10.0):
        # record a real modem-to-controller byte stream
        ctl_end, modem_end = socketpair_channel()
        modem = MockModem(modem_end)
        channel = AtChannel(ctl_end)
        try:
            channel.set_text_mode()
            channel.send_sms(OWNER, "Intruder Detected!!")
            channel.dial(OWNER)
            index = modem.inject_inbound_sms(OWNER, "Found OK")
            time.sleep(0.1)
            channel.read_sms(index)
            time.sleep(0.1)
            stream = modem.transcript_bytes("tx")
        finally:
            channel.close()
            modem.close()
        assert stream

        def parse_with_cuts(cuts):
            state = ParserState()
            events = []
            pos = 0
            for cut in cuts + [len(stream)]:
                evs, state = parse_events(stream[pos:cut], state)
                events.extend(evs)
                pos = cut
            return events

        reference = parse_with_cuts([])
        assert reference  # the exchange produced events
        rng = random.Random(808)
        for _ in range(200):
            k = rng.randint(0, min(12, len(stream)))
            cuts = sorted(rng.sample(range(1, len(stream)), k))
            assert parse_with_cuts(cuts) == reference
