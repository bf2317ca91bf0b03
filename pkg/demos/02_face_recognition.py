"""
Face recognition walkthrough
============================

Trains the subspace recognizer on a small synthetic corpus, then probes it
with noisy in-class samples and a stranger to show the distance-based
unknown rejection.
"""

import tempfile
from pathlib import Path

import numpy as np

from homesentry import fisherface, synthetic

workdir = Path(tempfile.mkdtemp(prefix="recognition-demo-"))

# Build a directory-per-class corpus of noisy 24x24 samples.
labels = ["alice", "bob", "carol"]
patterns = synthetic.write_face_corpus(workdir / "corpus", labels, per_class=5)
print(f"corpus written to {workdir / 'corpus'} with classes {labels}")

# Training crops every image to 16x16 and runs a two-step projection:
# a variance-maximizing basis first, then a class-separating basis on top.
ts = fisherface.load_corpus(workdir / "corpus", 16, 16)
model = fisherface.train(ts, fisherface.TrainConfig())
print(f"model: {len(set(model.projected_labels))} classes, "
      f"discriminant dims {model.lda_matrix.shape[1]}, "
      f"reject threshold {model.reject_threshold:.2f}")

# Noisy probes of known people land close to their class.
from homesentry.imaging import resize_nearest

rng = np.random.default_rng(42)
for label in labels:
    probe = synthetic.noisy_sample(patterns[label], rng)
    crop = fisherface.flatten(resize_nearest(probe, 16, 16))
    result = fisherface.recognize(model, crop)
    print(f"probe of {label!r}: verdict={result.label} distance={result.distance:.2f}")

# A face never seen in training is rejected by the distance threshold.
stranger = synthetic.face_pattern(np.random.default_rng(999))
result = fisherface.recognize(model, fisherface.flatten(resize_nearest(stranger, 16, 16)))
print(f"stranger: known={result.known} nearest={result.label} "
      f"distance={result.distance:.2f} (threshold {model.reject_threshold:.2f})")

# Models round-trip through JSON bit-exactly.
fisherface.save_model(model, workdir / "model.json")
reloaded = fisherface.load_model(workdir / "model.json")
print("model round-trips:", np.array_equal(reloaded.lda_matrix, model.lda_matrix))
