import logging
from pathlib import Path
from typing import Any, Dict, Union

logger = logging.getLogger(__name__)

TRUE_WORDS = ("true", "yes", "on")
FALSE_WORDS = ("false", "no", "off")


def coerce_value(text: str) -> Any:
    """
    Converts a config value to bool, int, float or a list of those; anything
    else stays a string.

    Examples:
        'yes' -> True, '8' -> 8, '1e-4' -> 0.0001, '8,16' -> [8, 16], 'gmres' -> 'gmres'
    """
    text = text.strip()
    if "," in text:
        return [coerce_value(item) for item in text.split(",") if item.strip()]
    if text.lower() in TRUE_WORDS:
        return True
    if text.lower() in FALSE_WORDS:
        return False
    for convert in (int, float):
        try:
            return convert(text)
        except ValueError:
            pass
    return text


def load_config(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Reads a `key = value` configuration file.

    Blank lines and lines starting with '#' are skipped, trailing '#'
    comments are removed and '-' in keys is replaced by '_' so that keys
    match command-line flag names.

    Parameters:
        path (Union[str, Path]): The configuration file.

    Returns:
        dict: The parsed settings.

    Raises:
        FileNotFoundError: If the file does not exist.
        ValueError: If a line is not of the form `key = value` or a key repeats.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Config file not found: {path}")

    config = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got '{raw.strip()}'.")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ValueError(f"{path}:{lineno}: missing key.")
        key = key.replace("-", "_")
        if key in config:
            raise ValueError(f"{path}:{lineno}: duplicate key '{key}'.")
        config[key] = coerce_value(value)
    logger.debug("Loaded %d settings from %s", len(config), path)
    return config
