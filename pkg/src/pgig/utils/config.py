# -*- coding: utf-8 -*-
"""
Configuration for pgig.

Runs are configured with INI files (sections [run], [stress], [task],
[train], [attribution], [degradation]). The bundled data/defaults.ini
lists every key; a user file overrides single keys, the environment
(.env via python-dotenv) and command-line flags override both.

Settings keep the raw text of every value, so a resolved configuration
can be stored in a run manifest and parsed again bit-exactly.
"""

import configparser
import os
import re
from pathlib import Path
from typing import Any, Callable, Dict, Mapping, Optional, Tuple, Union

from dotenv import load_dotenv

from pgig.core.attribution import METHOD_NAMES, MethodConfig, SeedConvention, get_method
from pgig.core.degradation import Aggregation, DegradationConfig, ExplainedClass, FillScope
from pgig.core.patterns import ExpectationScope
from pgig.core.stress import StressConfig
from pgig.core.trainer import SPLIT_NAMES, SyntheticImageTask, TrainConfig
from pgig.utils.errors import ArgumentError, ConfigError
from pgig.utils.logger import get_logger

logger = get_logger(__name__)

Converter = Callable[[str], Any]
RawConfig = Dict[str, Dict[str, str]]
LineIndex = Dict[Tuple[str, Optional[str]], int]  # (section, key or None) -> line

ENV_OUT_DIR = "PGIG_OUT_DIR"


# ---------------------------------------------------------------------------
# Value converters (raise ValueError with a readable message)
# ---------------------------------------------------------------------------


def _int(text: str) -> int:
    return int(text.strip())


def _float(text: str) -> float:
    return float(text.strip())


def _seed(text: str) -> int:
    value = int(text.strip())
    if not 0 <= value < 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {value}")
    return value


def _str(text: str) -> str:
    value = text.strip()
    if not value:
        raise ValueError("value must not be empty")
    return value


def _list(item: Converter) -> Converter:
    def convert(text: str) -> Tuple[Any, ...]:
        parts = [p.strip() for p in text.split(",") if p.strip()]
        if not parts:
            raise ValueError("list must not be empty")
        return tuple(item(p) for p in parts)
    return convert


def _choice(*values: str) -> Converter:
    def convert(text: str) -> str:
        value = text.strip().lower()
        if value not in values:
            raise ValueError(f"expected one of {', '.join(values)}, got '{text.strip()}'")
        return value
    return convert


def _count_or_all(text: str) -> Optional[int]:
    value = text.strip().lower()
    return None if value == "all" else int(value)


def _methods(text: str) -> Tuple[str, ...]:
    if text.strip().lower() == "all":
        return METHOD_NAMES
    names: Tuple[str, ...] = _list(_str)(text)
    for name in names:
        try:
            get_method(name)
        except ArgumentError as e:
            raise ValueError(str(e)) from None
    return names


SCHEMA: Dict[str, Dict[str, Converter]] = {
    "run": {"seed": _seed, "out_dir": _str},
    "stress": {
        "z_start": _float, "z_end": _float, "z_step": _float,
        "noise_mu": _float, "noise_sigma": _float, "steps": _int,
    },
    "task": {
        "side": _int, "classes": _list(_str), "signal_level": _float, "background": _float,
        "shared_sigma": _float, "pixel_sigma": _float,
        "train_size": _int, "val_size": _int, "test_size": _int,
    },
    "train": {
        "hidden_sizes": _list(_int), "learning_rate": _float, "epochs": _int,
        "batch_size": _int, "pattern_scope": _choice(*(s.value for s in ExpectationScope)),
    },
    "attribution": {
        "method": _methods, "steps": _int, "samples": _int, "noise_mu": _float,
        "noise_sigma": _float, "baseline_draws": _int, "baseline": _float,
        "pgig_seed": _choice(*(s.value for s in SeedConvention)),
    },
    "degradation": {
        "patch": _int, "max_patches": _count_or_all,
        "aggregation": _choice(*(a.value for a in Aggregation)),
        "methods": _methods, "split": _choice(*SPLIT_NAMES),
        "explained_class": _choice(*(c.value for c in ExplainedClass)),
        "fill": _choice(*(f.value for f in FillScope)),
    },
}


def get_defaults_path() -> Path:
    """
    Get path to the bundled defaults.ini file.

    Raises:
        FileNotFoundError: If the file is not found
    """
    locations = [
        # Relative to this file (development)
        Path(__file__).parent.parent.parent.parent / "data" / "defaults.ini",
        # Current working directory
        Path.cwd() / "data" / "defaults.ini",
        # Installed package
        Path(__file__).parent.parent / "data" / "defaults.ini",
    ]

    for path in locations:
        if path.exists():
            return path

    raise FileNotFoundError(
        f"defaults.ini not found. Tried: {', '.join(str(p) for p in locations)}"
    )


def load_environment(env_file: Optional[Union[str, Path]] = None) -> bool:
    """Load a .env file (default: ./.env) without overriding set variables."""
    path = Path(env_file) if env_file else Path.cwd() / ".env"
    if not path.exists():
        return False
    return bool(load_dotenv(path, override=False))


_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^([^\s=:#;\[][^=:]*?)\s*[=:]")


def _key_lines(text: str) -> LineIndex:
    """Line number of every section header and key, for error messages."""
    lines: LineIndex = {}
    section = ""
    for number, line in enumerate(text.splitlines(), start=1):
        header = _SECTION_RE.match(line)
        if header:
            section = header.group(1).strip()
            lines.setdefault((section, None), number)
            continue
        key = _KEY_RE.match(line)
        if key and section:
            lines[(section, key.group(1).strip().lower())] = number
    return lines


def parse_ini(text: str, path: str = "<string>") -> Tuple[RawConfig, LineIndex]:
    """
    Parse INI text and check it against the schema.

    Returns:
        (raw values per section, line numbers per (section, key))

    Raises:
        ConfigError: On syntax errors, unknown sections or unknown keys
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=None)
    try:
        parser.read_string(text, source=path)
    except configparser.MissingSectionHeaderError as e:
        raise ConfigError("key outside of any [section]", path, e.lineno) from None
    except (configparser.DuplicateSectionError, configparser.DuplicateOptionError) as e:
        raise ConfigError(e.message.split(":", 1)[-1].strip(), path, e.lineno) from None
    except configparser.ParsingError as e:
        line = e.errors[0][0] if e.errors else None
        raise ConfigError("cannot parse line", path, line) from None

    lines = _key_lines(text)
    raw: RawConfig = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]; valid sections: {', '.join(SCHEMA)}",
                              path, lines.get((section, None)))
        for key, value in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key '{key}' in [{section}]", path,
                                  lines.get((section, key)))
            raw.setdefault(section, {})[key] = value
    return raw, lines


class Settings:
    """
    Resolved configuration of one run.

    Example:
        >>> settings = Settings.load("my.ini")
        >>> settings.set("run", "seed", "7")
        >>> settings.stress_config().random_seed
        7
    """

    def __init__(self, raw: RawConfig, source: str = "<defaults>",
                 lines: Optional[LineIndex] = None):
        self.raw: RawConfig = {section: dict(raw.get(section, {})) for section in SCHEMA}
        self.source = source
        self._lines = lines or {}
        self._origin: Dict[Tuple[str, str], str] = {}
        self.validate()

    @classmethod
    def load(cls, path: Optional[Union[str, Path]] = None) -> "Settings":
        """
        Bundled defaults, overridden by an optional user file and PGIG_OUT_DIR.

        Raises:
            ConfigError: If the file is missing, cannot be parsed or holds an invalid value
        """
        defaults_path = get_defaults_path()
        raw, _ = parse_ini(defaults_path.read_text(encoding="utf-8"), str(defaults_path))
        lines: LineIndex = {}
        source = "<defaults>"

        if path is not None:
            path = Path(path)
            if not path.exists():
                raise ConfigError("config file not found", str(path))
            user, lines = parse_ini(path.read_text(encoding="utf-8"), str(path))
            for section, values in user.items():
                raw.setdefault(section, {}).update(values)
            source = str(path)
            logger.info("loaded config %s", path)

        env_out = os.environ.get(ENV_OUT_DIR)
        if env_out:
            raw.setdefault("run", {})["out_dir"] = env_out

        return cls(raw, source, lines)

    @classmethod
    def from_dict(
        cls, raw: Mapping[str, Mapping[str, Any]], source: str = "<manifest>"
    ) -> "Settings":
        """Rebuild settings from as_dict() output (e.g. a run manifest)."""
        unknown = [s for s in raw if s not in SCHEMA]
        if unknown:
            raise ConfigError(f"unknown section(s) {', '.join(unknown)}", source)
        return cls({s: {k: str(v) for k, v in values.items()} for s, values in raw.items()}, source)

    def as_dict(self) -> RawConfig:
        """Raw text of every value, sections in schema order."""
        return {section: dict(values) for section, values in self.raw.items()}

    def _error(self, section: str, key: Optional[str], message: str) -> ConfigError:
        if key is not None and (section, key) in self._origin:
            return ConfigError(f"[{section}] {key}: {message}", self._origin[(section, key)])
        line = self._lines.get((section, key)) or self._lines.get((section, None))
        path = self.source if line is not None or not self.source.startswith("<") else None
        where = f"[{section}] {key}: " if key else f"[{section}]: "
        return ConfigError(f"{where}{message}", path, line)

    def get(self, section: str, key: str) -> Any:
        """
        Converted value of one key.

        Raises:
            ConfigError: If the key is unknown, unset or malformed
        """
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"unknown key '{key}' in [{section}]")
        if key not in self.raw[section]:
            raise self._error(section, key, "value is missing")
        try:
            return SCHEMA[section][key](self.raw[section][key])
        except ValueError as e:
            raise self._error(section, key, str(e)) from None

    def set(self, section: str, key: str, value: Any, origin: str = "command line") -> None:
        """Override one key; the value is validated immediately."""
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"unknown key '{key}' in [{section}]", origin)
        self.raw[section][key] = str(value)
        self._origin[(section, key)] = origin
        self.get(section, key)

    def validate(self) -> None:
        """Convert every value once so errors surface before any work is done."""
        for section, keys in SCHEMA.items():
            for key in keys:
                if key in self.raw[section]:
                    self.get(section, key)

    def section(self, name: str) -> Dict[str, Any]:
        """All converted values of a section."""
        return {key: self.get(name, key) for key in SCHEMA[name] if key in self.raw[name]}

    def _build(self, section: str, factory: Callable[..., Any], **kwargs: Any) -> Any:
        try:
            return factory(**kwargs)
        except ArgumentError as e:
            raise self._error(section, None, str(e)) from None

    # -- typed views ---------------------------------------------------------

    @property
    def seed(self) -> int:
        """Run seed shared by every random stream."""
        result: int = self.get("run", "seed")
        return result

    @property
    def out_dir(self) -> Path:
        """Output directory."""
        return Path(self.get("run", "out_dir"))

    def stress_config(self) -> StressConfig:
        """[stress] as a StressConfig."""
        return self._build("stress", StressConfig, random_seed=self.seed, **self.section("stress"))

    def task_config(self) -> SyntheticImageTask:
        """[task] as a SyntheticImageTask."""
        return self._build("task", SyntheticImageTask, seed=self.seed, **self.section("task"))

    def train_config(self) -> TrainConfig:
        """[train] as a TrainConfig (pattern_scope is read separately)."""
        values = self.section("train")
        values.pop("pattern_scope", None)
        values["hidden_sizes"] = list(values.get("hidden_sizes", (64, 32)))
        return self._build("train", TrainConfig, seed=self.seed, **values)

    def pattern_scope(self) -> ExpectationScope:
        """Expectation scope used when fitting patterns."""
        return ExpectationScope(self.get("train", "pattern_scope"))

    @property
    def method(self) -> str:
        """Attribution method of cmd_explain (first name if a list is given)."""
        names: Tuple[str, ...] = self.get("attribution", "method")
        return names[0]

    def method_config(self, input_dim: Optional[int] = None, reference: Any = None) -> MethodConfig:
        """
        [attribution] as a MethodConfig.

        A non-zero constant baseline needs input_dim to be expanded.
        """
        values = self.section("attribution")
        values.pop("method", None)
        constant = values.pop("baseline", 0.0)
        baseline = None
        if constant != 0.0:
            if input_dim is None:
                raise ConfigError("a constant baseline needs the input dimension")
            baseline = [constant] * input_dim
        return self._build("attribution", MethodConfig, baseline=baseline, reference=reference,
                           random_seed=self.seed, **values)

    def degradation_config(self, method_cfg: MethodConfig) -> DegradationConfig:
        """[degradation] as a DegradationConfig."""
        values = self.section("degradation")
        return self._build("degradation", DegradationConfig, method_config=method_cfg, **values)

