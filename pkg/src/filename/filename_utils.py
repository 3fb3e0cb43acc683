from datetime import datetime
import re
import uuid


def generate_run_name(command):
    """
    Generate a run directory name with format: YYYY-MM-DD_HH-MM-SS_{command}_{uuid}
    Example: 2025-12-23_14-30-25_train_f47ac10b

    Args:
        command (str): CLI command the directory belongs to

    Returns:
        str: Timestamped directory name with short UUID
    """
    timestamp = datetime.now().strftime("%Y-%m-%d_%H-%M-%S")
    unique_id = str(uuid.uuid4())[:8]  # Use short UUID (first 8 chars)
    return f"{timestamp}_{command}_{unique_id}"


def variant_dirname(settings):
    """
    Directory-safe name for an ablation variant.
    Example: {"chunking": "off", "head": "mlp"} -> "chunking-off_head-mlp"

    Args:
        settings (dict): Axis name -> chosen value (insertion order kept)

    Returns:
        str: Variant name ("default" when no axis is varied)
    """
    if not settings:
        return "default"
    name = "_".join(f"{axis}-{value}" for axis, value in settings.items())
    return re.sub(r"[^A-Za-z0-9_.=-]", "-", name)
