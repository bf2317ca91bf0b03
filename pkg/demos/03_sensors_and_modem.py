"""
Sensor nodes and the GSM channel
================================

Starts an emulated motion node and a fire node, polls their HTTP status
payloads, then runs an SMS + dial exchange against the mock modem and
prints the raw byte transcript.
"""

import requests

from homesentry.gsm import AtChannel, MockModem, socketpair_channel
from homesentry.nodesim import NodeConfig, SensorNode

# Each node is a tiny HTTP server with an injectable sensor state.
pir = SensorNode(NodeConfig(node_id="id1"))
fire = SensorNode(NodeConfig(node_id="id2", name="fire_sensor_module", kind="fire"))
pir.start()
fire.start()

print("motion node idle: ", requests.get(pir.url, timeout=2).text)
pir.set_pir(1)
print("motion node active:", requests.get(pir.url, timeout=2).text)

fire.set_temperature(60.0)  # threshold defaults to 50 C
print("fire node hot:    ", requests.get(fire.url, timeout=2).text)
print(f"fire node buzzer={fire.buzzer_on} relay={fire.relay_on}")

pir.stop()
fire.stop()

# The modem link is a duplex byte channel speaking AT commands. Here both
# ends are in-process; a deployment would hand the channel a serial device.
controller_end, modem_end = socketpair_channel()
modem = MockModem(modem_end)
channel = AtChannel(controller_end)

channel.set_text_mode()
ref = channel.send_sms("+918547616766", "Intruder Detected!!")
channel.dial("+918547616766")
print(f"\nSMS accepted with reference {ref}; dialed {modem.dialed}")

print("\nbytes the modem received:")
print(modem.transcript_bytes("rx"))
print("\nbytes the modem sent back:")
print(modem.transcript_bytes("tx"))

channel.close()
modem.close()
