"""Rasterization of env states into small RGB observations with OpenCV"""

import cv2
import numpy as np

from ..config.config import AGENT_RADIUS, BLOCK_RADIUS, MARKER_RADIUS, WRIST_VIEW_SIZE

SHIFT = 4                      # cv2 sub-pixel bits
SUBPIXEL = 1 << SHIFT
OUTSIDE_COLOR = (70, 70, 70)
FLOOR_COLOR = (235, 235, 235)
AGENT_COLOR = (30, 30, 30)
BLOCK_COLOR = (150, 90, 40)


def view_frame(view, agent_pos, image_size):
    """World-to-pixel transform of a view as (origin_x, origin_y, pixels per world unit)."""
    if view == "scene":
        return 0.0, 0.0, float(image_size)
    if view == "wrist":
        half = WRIST_VIEW_SIZE / 2.0
        return float(agent_pos[0]) - half, float(agent_pos[1]) - half, image_size / WRIST_VIEW_SIZE
    raise ValueError(f"Unknown view '{view}'")


def world_to_pixel(point, frame):
    """Continuous pixel coordinates; pixel centers sit at integer positions."""
    ox, oy, scale = frame
    return (point[0] - ox) * scale - 0.5, (point[1] - oy) * scale - 0.5


def _fixed(point, frame):
    px, py = world_to_pixel(point, frame)
    return int(round(px * SUBPIXEL)), int(round(py * SUBPIXEL))


def _disc(canvas, center, radius, color, frame, thickness=-1):
    r = max(1, int(round(radius * frame[2] * SUBPIXEL)))
    cv2.circle(canvas, _fixed(center, frame), r, tuple(int(c) for c in color), thickness, cv2.LINE_AA, SHIFT)


def _square(canvas, center, half_side, color, frame):
    top_left = _fixed((center[0] - half_side, center[1] - half_side), frame)
    bottom_right = _fixed((center[0] + half_side, center[1] + half_side), frame)
    cv2.rectangle(canvas, top_left, bottom_right, tuple(int(c) for c in color), -1, cv2.LINE_AA, SHIFT)


def render_view(state, view):
    """Render one camera view of a state

    Args:
        state: EnvState
        view: 'scene' (whole workspace) or 'wrist' (agent-centred crop)

    Returns:
        numpy.ndarray: (G, G, 3) float32 image with values in [0, 1]
    """
    size = state.image_size
    frame = view_frame(view, state.agent_pos, size)
    canvas = np.empty((size, size, 3), dtype=np.uint8)
    canvas[:] = OUTSIDE_COLOR
    top_left = _fixed((0.0, 0.0), frame)
    bottom_right = _fixed((1.0, 1.0), frame)
    cv2.rectangle(canvas, top_left, bottom_right, FLOOR_COLOR, -1, cv2.LINE_AA, SHIFT)

    task = state.task
    visited = set(task.waypoints[:state.subgoal_index]) if task.family == "sequence" else set()
    for marker in task.markers:
        if marker.position in visited:
            _disc(canvas, marker.position, MARKER_RADIUS, marker.color, frame, thickness=1)
        else:
            _disc(canvas, marker.position, MARKER_RADIUS, marker.color, frame)

    if state.block_pos is not None:
        _square(canvas, state.block_pos, BLOCK_RADIUS, BLOCK_COLOR, frame)
    _disc(canvas, state.agent_pos, AGENT_RADIUS, AGENT_COLOR, frame)
    return canvas.astype(np.float32) / 255.0
