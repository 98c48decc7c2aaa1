"""Flat dotted-key run configuration documents.

One `key.path = value` per line, `#` comments.  Values are parsed as int,
float, complex, bool, or bare string; several whitespace- or comma-separated
scalars form a list.  Manifests reuse the same format: a manifest is the full
config echo plus `result.*` keys, so re-running a manifest reproduces the run.
"""

from __future__ import annotations

__all__ = ["Config", "ConfigError", "parse_config", "format_value"]


class ConfigError(ValueError):
    pass


def _parse_scalar(tok):
    low = tok.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        return int(tok)
    except ValueError:
        pass
    try:
        return float(tok)
    except ValueError:
        pass
    if ("j" in low or "J" in tok) and not any(c.isalpha() for c in tok if c not in "jJeE+-."):
        try:
            return complex(tok)
        except ValueError:
            pass
    return tok


def _parse_value(text):
    toks = text.replace(",", " ").split()
    if not toks:
        return ""
    if len(toks) == 1:
        return _parse_scalar(toks[0])
    return [_parse_scalar(t) for t in toks]


def format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (list, tuple)):
        return " ".join(format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parse_config(text, source="<string>"):
    data = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        data[key] = _parse_value(val.strip())
    return Config(data)


class Config:
    def __init__(self, data=None):
        self.data = dict(data or {})

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config(fh.read(), source=str(path))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_text())

    def to_text(self):
        lines = [f"{k} = {format_value(v)}" for k, v in sorted(self.data.items())]
        return "\n".join(lines) + "\n"

    def __contains__(self, key):
        return key in self.data

    def set(self, key, value):
        self.data[key] = value

    def get(self, key, default=None):
        return self.data.get(key, default)

    def require(self, key):
        if key not in self.data:
            raise ConfigError(f"missing required key {key!r}")
        return self.data[key]

    def get_float(self, key, default=None):
        v = self._scalar(key, default)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{key} must be a number, got {v!r}")
        return float(v)

    def get_int(self, key, default=None):
        v = self._scalar(key, default)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"{key} must be an integer, got {v!r}")
        return v

    def get_bool(self, key, default=None):
        v = self._scalar(key, default)
        if v is None:
            return None
        if not isinstance(v, bool):
            raise ConfigError(f"{key} must be true/false, got {v!r}")
        return v

    def get_str(self, key, default=None):
        v = self._scalar(key, default)
        return None if v is None else str(v)

    def get_list(self, key, default=None):
        if key not in self.data:
            if default is None:
                return []
            return list(default)
        v = self.data[key]
        return list(v) if isinstance(v, list) else [v]

    def get_floats(self, key, default=None):
        return [float(x) for x in self.get_list(key, default)]

    def _scalar(self, key, default):
        if key not in self.data:
            if default is None:
                return None
            return default
        return self.data[key]

    def numbered(self, prefix):
        """Values of `prefix.1`, `prefix.2`, ... in numeric order."""
        found = []
        for key, val in self.data.items():
            if key.startswith(prefix + "."):
                tail = key[len(prefix) + 1:]
                if tail.isdigit():
                    found.append((int(tail), val))
        return [v for _, v in sorted(found)]

    def section_keys(self, prefix):
        return sorted(k for k in self.data if k.startswith(prefix + "."))

    def without_section(self, prefix):
        out = Config({k: v for k, v in self.data.items()
                      if not k.startswith(prefix + ".")})
        return out
