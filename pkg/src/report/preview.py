"""Contact sheet of the first frame of every view of every task, captioned with the instruction"""

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from ..cleanup.cleanup_utils import ensure_output_dir
from ..dataio.demos import records_for_task

SCALE = 6                  # nearest-neighbour enlargement of each frame
CAPTION_HEIGHT = 28
PADDING = 8
BACKGROUND = (255, 255, 255)
TEXT_COLOR = (20, 20, 20)


def _frame_image(frame):
    pixels = (np.clip(frame, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    image = Image.fromarray(pixels)
    return image.resize((image.width * SCALE, image.height * SCALE), Image.Resampling.NEAREST)


def build_preview(suite, demos):
    """One row per task (first demo of the task), one column per view.

    Returns:
        PIL.Image.Image
    """
    views = list(suite.views)
    tile = suite.image_size * SCALE
    width = PADDING + len(views) * (tile + PADDING)
    row_height = tile + CAPTION_HEIGHT + PADDING
    sheet = Image.new("RGB", (max(width, 360), PADDING + len(suite.tasks) * row_height), BACKGROUND)
    draw = ImageDraw.Draw(sheet)
    font = ImageFont.load_default()
    for row, task in enumerate(suite.tasks):
        y = PADDING + row * row_height
        records = records_for_task(demos, task.task_id)
        for col, view in enumerate(views):
            x = PADDING + col * (tile + PADDING)
            if records:
                sheet.paste(_frame_image(records[0].views[view][0]), (x, y))
            draw.text((x, y + tile + 2), view, fill=TEXT_COLOR, font=font)
        draw.text((PADDING, y + tile + 14), f"{task.task_id}: {task.instruction}", fill=TEXT_COLOR, font=font)
    return sheet


def save_preview(suite, demos, output_path):
    output_path = ensure_output_dir(output_path)
    build_preview(suite, demos).save(output_path, format="PNG")
    return output_path
