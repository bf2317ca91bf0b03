"""Active building surveillance toolkit.

Subpackages cover the full pipeline: integral-image face detection
(:mod:`homesentry.vision`), Fisherface recognition
(:mod:`homesentry.fisherface`), emulated WiFi sensor nodes
(:mod:`homesentry.nodesim`), the GSM AT-command codec and mock modem
(:mod:`homesentry.gsm`), and the master controller
(:mod:`homesentry.controller`).
"""

__version__ = "0.1.0"
