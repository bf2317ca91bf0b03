"""
Face detection walkthrough
==========================

Plants a synthetic "face" pattern in a larger scene, then walks the
detection stack from integral images up to multi-scale window scanning.
"""

import numpy as np

from homesentry import synthetic
from homesentry.vision import (
    DetectParams,
    detect_faces,
    integral_image,
    rect_sum,
)

rng = np.random.default_rng(7)

# A scene is a flat gray background with one bright-center pattern pasted in.
pattern = synthetic.face_pattern(rng)
scene = synthetic.scene_with_pattern(pattern, position=(40, 40))
print(f"scene {scene.shape}, pattern pasted at (40, 40)")

# Integral images make any rectangle sum a 4-lookup operation.
ii = integral_image(scene)
print("sum of the pattern region:", rect_sum(ii, 40, 40, 24, 24))
print("sum of a background region:", rect_sum(ii, 0, 0, 24, 24))

# The bundled demonstration cascade has two stages, both keyed on a bright
# center against a darker surround. Each stage can reject a window early,
# which is what makes cascade scanning cheap on mostly-empty scenes.
cascade = synthetic.center_bright_cascade()
print(f"cascade: {len(cascade.stages)} stages, base {cascade.base_width}x{cascade.base_height}")

# Scan every window position over a 1.25x scale pyramid. With
# min_neighbors=0 the raw accepted windows come back ungrouped.
params = DetectParams(scale_factor=1.25, step=4, min_neighbors=0)
boxes = detect_faces(scene, cascade, params)
for box in boxes:
    print(f"accepted window: x={box.x} y={box.y} {box.w}x{box.h}")

# A blank scene produces nothing.
print("blank scene detections:", detect_faces(synthetic.blank_scene(), cascade, params))
