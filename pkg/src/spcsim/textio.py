"""Flat key-value structured text, used for manifests and config files.

Format: one `key = value` pair per line, '#' starts a comment, blank lines
ignored. Values are kept as strings by the parser; typed access helpers live
on the returned KeyValueFile. Floats are written with repr() so round-trips
are bit-exact.
"""

from __future__ import annotations

from .errors import ConfigError


class KeyValueFile:
    """Parsed key-value text with line numbers retained for error messages."""

    def __init__(self, pairs: dict[str, str], lines: dict[str, int], source: str = "<memory>"):
        self.pairs = pairs
        self.lines = lines
        self.source = source

    def __contains__(self, key: str) -> bool:
        return key in self.pairs

    def _fail(self, key: str, message: str):
        line = self.lines.get(key)
        where = f"{self.source}:{line}" if line is not None else self.source
        raise ConfigError(f"{where}: key '{key}' {message}")

    def require(self, key: str) -> str:
        if key not in self.pairs:
            raise ConfigError(f"{self.source}: missing required key '{key}'")
        return self.pairs[key]

    def get_str(self, key: str, default: str | None = None) -> str:
        if key not in self.pairs:
            if default is None:
                return self.require(key)
            return default
        return self.pairs[key]

    def get_int(self, key: str, default: int | None = None) -> int:
        if key not in self.pairs:
            if default is None:
                self._fail(key, "is required")
            return default
        try:
            return int(self.pairs[key])
        except ValueError:
            self._fail(key, f"is not an integer: {self.pairs[key]!r}")

    def get_float(self, key: str, default: float | None = None) -> float:
        if key not in self.pairs:
            if default is None:
                self._fail(key, "is required")
            return default
        try:
            return float(self.pairs[key])
        except ValueError:
            self._fail(key, f"is not a number: {self.pairs[key]!r}")

    def get_bool(self, key: str, default: bool | None = None) -> bool:
        if key not in self.pairs:
            if default is None:
                self._fail(key, "is required")
            return default
        v = self.pairs[key].strip().lower()
        if v in ("true", "yes", "on", "1"):
            return True
        if v in ("false", "no", "off", "0"):
            return False
        self._fail(key, f"is not a boolean: {self.pairs[key]!r}")

    def get_int_list(self, key: str, default: list[int] | None = None) -> list[int]:
        if key not in self.pairs:
            if default is None:
                self._fail(key, "is required")
            return list(default)
        try:
            return [int(t) for t in self.pairs[key].split(",") if t.strip()]
        except ValueError:
            self._fail(key, f"is not a comma-separated integer list: {self.pairs[key]!r}")

    def get_float_list(self, key: str, default: list[float] | None = None) -> list[float]:
        if key not in self.pairs:
            if default is None:
                self._fail(key, "is required")
            return list(default)
        try:
            return [float(t) for t in self.pairs[key].split(",") if t.strip()]
        except ValueError:
            self._fail(key, f"is not a comma-separated number list: {self.pairs[key]!r}")


def parse_kv_text(text: str, source: str = "<memory>") -> KeyValueFile:
    pairs: dict[str, str] = {}
    lines: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in pairs:
            raise ConfigError(f"{source}:{lineno}: duplicate key '{key}'")
        pairs[key] = value.strip()
        lines[key] = lineno
    return KeyValueFile(pairs, lines, source)


def read_kv_file(path) -> KeyValueFile:
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    return parse_kv_text(text, source=str(path))


def format_value(value) -> str:
    """Render a value losslessly: floats via repr, lists comma-joined."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ",".join(format_value(v) for v in value)
    return str(value)


def write_kv_file(path, pairs: dict, header: str | None = None) -> None:
    """Write pairs in insertion order; deterministic byte-for-byte output."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        if header:
            for line in header.splitlines():
                f.write(f"# {line}\n")
        for key, value in pairs.items():
            f.write(f"{key} = {format_value(value)}\n")
