"""Configuration file parser for heisenberg-morrey experiments."""

import json
from pathlib import Path


class ConfigManager:
    """Parse experiment configuration files (key = value text, or JSON)."""

    @staticmethod
    def load(config_path: str) -> dict:
        """Load configuration from file."""
        path = Path(config_path)
        if not path.exists():
            raise FileNotFoundError(f"Config not found: {config_path}")

        if path.suffix.lower() == '.json':
            with open(path, 'r', encoding='utf-8') as f:
                config = json.load(f)
            if not isinstance(config, dict):
                raise ValueError(f"JSON config must be an object: {config_path}")
            return config

        config = {}

        with open(path, 'r', encoding='utf-8') as f:
            for line in f:
                line = line.strip()

                if not line or line.startswith('#'):
                    continue

                if '=' not in line:
                    continue

                key, value = line.split('=', 1)
                key = key.strip()
                value = value.strip()

                if '#' in value:
                    value = value.split('#')[0].strip()

                config[key] = ConfigManager._parse_value(value)

        return config

    @staticmethod
    def _parse_value(value: str):
        """Parse string value to appropriate Python type."""
        if ',' in value:
            items = [ConfigManager._parse_value(v.strip()) for v in value.split(',') if v.strip()]
            return items

        if value.lower() in ['true', 'false']:
            return value.lower() == 'true'

        if value.lower() in ['none', 'null']:
            return None

        try:
            if '.' in value or 'e' in value.lower():
                return float(value)
            else:
                return int(value)
        except ValueError:
            return value
