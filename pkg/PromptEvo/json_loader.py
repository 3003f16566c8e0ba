from pathlib import Path
from urllib.parse import urlparse
import json

import requests

from .errors import ConfigInvalid


class JSONLoader:
    @staticmethod
    def load(source, timeout=30):
        """Load JSON from a local path or an http(s) URL."""
        if urlparse(str(source)).scheme in ("http", "https"):
            response = requests.get(str(source), timeout=timeout)
            response.raise_for_status()
            return response.json()

        source = Path(source)
        if not source.is_file():
            raise ConfigInvalid(f"File does not exist: {source}")
        try:
            return json.loads(source.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigInvalid(f"{source} is not valid JSON: {e}") from e

    @staticmethod
    def load_lines(source):
        """Read a line-delimited JSON file into a list of objects.

        Raises json.JSONDecodeError on the first undecodable line; callers
        decide which typed error that becomes.
        """
        source = Path(source)
        if not source.is_file():
            raise FileNotFoundError(f"File does not exist: {source}")
        records = []
        with open(source, "r", encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if line:
                    records.append(json.loads(line))
        return records
